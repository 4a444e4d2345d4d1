//! Chain-centric pre-training corpus synthesis.
//!
//! Pseudo chains of controlled hop length are sampled from table structure
//! and cell-passage links, paired with generated questions and same-block
//! hard negatives. Every passage is represented by the single sentence most
//! similar to its title so synthesized chains stay sentence-granular.
//!
//! Hop templates (a hop is one node): 1-hop (c0) or (p0); 2-hop (p0,c0) or
//! (c0,c1); 3-hop (c0,c1,p1) or (p0,c0,c1); 4-hop (p0,c0,c1,p1), where the
//! two cells come from the same row and each p is a sentence of the
//! respective cell's linked passage.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{build_fused_blocks, Corpus, FusedBlock, Passage};
use crate::gateway::ModelGateway;
use crate::text::Lexicon;

#[derive(Debug, Error)]
pub enum PretrainError {
    #[error("hop ratios must be non-negative and sum to 1.0 (sum = {0})")]
    BadRatios(f64),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sampling ratios for hop lengths 1..=4; non-negative, summing to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopRatioConfig {
    ratios: [f64; 4],
}

impl Default for HopRatioConfig {
    fn default() -> Self {
        HopRatioConfig {
            ratios: [0.10, 0.25, 0.35, 0.30],
        }
    }
}

impl HopRatioConfig {
    pub fn new(ratios: [f64; 4]) -> Result<Self, PretrainError> {
        let sum: f64 = ratios.iter().sum();
        if ratios.iter().any(|r| *r < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(PretrainError::BadRatios(sum));
        }
        Ok(HopRatioConfig { ratios })
    }

    pub fn ratios(&self) -> [f64; 4] {
        self.ratios
    }
}

/// One element of a synthesized chain, with enough origin information to map
/// it back onto graph nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SynthNode {
    Cell {
        col_index: usize,
        column_name: String,
        content: String,
    },
    Sentence {
        passage_id: String,
        sentence_index: usize,
        content: String,
    },
}

/// A synthesized chain over one fused block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SynthChain {
    pub block_id: String,
    pub nodes: Vec<SynthNode>,
}

impl SynthChain {
    pub fn hop_length(&self) -> usize {
        self.nodes.len()
    }

    /// Same segment templates as extraction-time chains, question omitted.
    pub fn verbalize(&self) -> String {
        self.nodes
            .iter()
            .map(|n| match n {
                SynthNode::Cell {
                    column_name,
                    content,
                    ..
                } => format!("[Table] {column_name} is {content}."),
                SynthNode::Sentence { content, .. } => format!("[Passage] {content}"),
            })
            .collect::<Vec<_>>()
            .join(" [SEP] ")
    }
}

/// The sentence most similar to the passage title; ties go to the earliest.
pub fn best_sentence<'a>(passage: &'a Passage, lexicon: &Lexicon) -> Option<(usize, &'a str)> {
    let mut best: Option<(usize, &'a str, f64)> = None;
    for (i, s) in passage.sentences().iter().enumerate() {
        let sim = lexicon.similarity(s, &passage.title);
        if best.as_ref().is_none_or(|(_, _, b)| sim > *b) {
            best = Some((i, s, sim));
        }
    }
    best.map(|(i, s, _)| (i, s))
}

/// One sampleable (passage, best sentence) choice attached to a cell.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Pick {
    passage_id: String,
    sentence_index: usize,
    sentence: String,
}

#[derive(Debug, Clone)]
struct CellView {
    col_index: usize,
    column_name: String,
    content: String,
    picks: Vec<Pick>,
}

/// Non-empty cells of a block with their sentence-bearing linked passages,
/// in deterministic order.
fn block_view(block: &FusedBlock, corpus: &Corpus, lexicon: &Lexicon) -> Vec<CellView> {
    block
        .cells
        .iter()
        .filter(|c| !c.content.trim().is_empty())
        .map(|c| {
            let mut picks = Vec::new();
            for link in &block.linked_passages {
                if link.col_index != c.col_index {
                    continue;
                }
                if let Some(p) = corpus.passage(&link.passage_id) {
                    if let Some((si, s)) = best_sentence(p, lexicon) {
                        picks.push(Pick {
                            passage_id: p.passage_id.clone(),
                            sentence_index: si,
                            sentence: s.to_string(),
                        });
                    }
                }
            }
            CellView {
                col_index: c.col_index,
                column_name: c.column_name.clone(),
                content: c.content.clone(),
                picks,
            }
        })
        .collect()
}

fn cell_node(c: &CellView) -> SynthNode {
    SynthNode::Cell {
        col_index: c.col_index,
        column_name: c.column_name.clone(),
        content: c.content.clone(),
    }
}

fn sentence_node(p: &Pick) -> SynthNode {
    SynthNode::Sentence {
        passage_id: p.passage_id.clone(),
        sentence_index: p.sentence_index,
        content: p.sentence.clone(),
    }
}

/// Template variants per hop length, in fixed order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Variant {
    C0,       // 1-hop
    P0,       // 1-hop
    P0C0,     // 2-hop
    C0C1,     // 2-hop
    C0C1P1,   // 3-hop
    P0C0C1,   // 3-hop
    P0C0C1P1, // 4-hop
}

fn variants_for(hop_length: usize) -> &'static [Variant] {
    match hop_length {
        1 => &[Variant::C0, Variant::P0],
        2 => &[Variant::P0C0, Variant::C0C1],
        3 => &[Variant::C0C1P1, Variant::P0C0C1],
        4 => &[Variant::P0C0C1P1],
        _ => &[],
    }
}

/// Distinct (passage, sentence) picks across the whole row, sorted.
fn row_picks(cells: &[CellView]) -> Vec<Pick> {
    let mut picks: Vec<Pick> = cells.iter().flat_map(|c| c.picks.iter().cloned()).collect();
    picks.sort_by(|a, b| (&a.passage_id, a.sentence_index).cmp(&(&b.passage_id, b.sentence_index)));
    picks.dedup();
    picks
}

fn linked_cells(cells: &[CellView]) -> Vec<usize> {
    (0..cells.len()).filter(|&i| !cells[i].picks.is_empty()).collect()
}

/// Ordered distinct pairs of linked cells admitting two distinct sentence
/// nodes (the 4-hop template's endpoints may not collapse onto one node).
fn four_hop_pairs(cells: &[CellView]) -> Vec<(usize, usize)> {
    let linked = linked_cells(cells);
    let mut pairs = Vec::new();
    for &i in &linked {
        for &j in &linked {
            if i == j {
                continue;
            }
            let only_shared_pick = cells[i].picks.len() == 1
                && cells[j].picks.len() == 1
                && cells[i].picks[0] == cells[j].picks[0];
            if !only_shared_pick {
                pairs.push((i, j));
            }
        }
    }
    pairs
}

fn satisfiable(cells: &[CellView], variant: Variant) -> bool {
    let n = cells.len();
    match variant {
        Variant::C0 => n >= 1,
        Variant::P0 => !row_picks(cells).is_empty(),
        Variant::P0C0 => !linked_cells(cells).is_empty(),
        Variant::C0C1 => n >= 2,
        Variant::C0C1P1 | Variant::P0C0C1 => n >= 2 && !linked_cells(cells).is_empty(),
        Variant::P0C0C1P1 => !four_hop_pairs(cells).is_empty(),
    }
}

fn pick_uniform<'a, T>(items: &'a [T], rng: &mut ChaCha8Rng) -> &'a T {
    &items[rng.random_range(0..items.len())]
}

fn instantiate(
    cells: &[CellView],
    variant: Variant,
    rng: &mut ChaCha8Rng,
) -> Vec<SynthNode> {
    match variant {
        Variant::C0 => {
            let c = pick_uniform(cells, rng);
            vec![cell_node(c)]
        }
        Variant::P0 => {
            let picks = row_picks(cells);
            vec![sentence_node(pick_uniform(&picks, rng))]
        }
        Variant::P0C0 => {
            let linked = linked_cells(cells);
            let c = &cells[*pick_uniform(&linked, rng)];
            let p = pick_uniform(&c.picks, rng);
            vec![sentence_node(p), cell_node(c)]
        }
        Variant::C0C1 => {
            let i = rng.random_range(0..cells.len());
            let others: Vec<usize> = (0..cells.len()).filter(|&j| j != i).collect();
            let j = *pick_uniform(&others, rng);
            vec![cell_node(&cells[i]), cell_node(&cells[j])]
        }
        Variant::C0C1P1 => {
            let linked = linked_cells(cells);
            let c1 = *pick_uniform(&linked, rng);
            let others: Vec<usize> = (0..cells.len()).filter(|&j| j != c1).collect();
            let c0 = *pick_uniform(&others, rng);
            let p1 = pick_uniform(&cells[c1].picks, rng);
            vec![cell_node(&cells[c0]), cell_node(&cells[c1]), sentence_node(p1)]
        }
        Variant::P0C0C1 => {
            let linked = linked_cells(cells);
            let c0 = *pick_uniform(&linked, rng);
            let others: Vec<usize> = (0..cells.len()).filter(|&j| j != c0).collect();
            let c1 = *pick_uniform(&others, rng);
            let p0 = pick_uniform(&cells[c0].picks, rng);
            vec![sentence_node(p0), cell_node(&cells[c0]), cell_node(&cells[c1])]
        }
        Variant::P0C0C1P1 => {
            let pairs = four_hop_pairs(cells);
            let &(c0, c1) = pick_uniform(&pairs, rng);
            // p0 must leave at least one distinct pick for p1.
            let p0_options: Vec<&Pick> = cells[c0]
                .picks
                .iter()
                .filter(|p0| cells[c1].picks.iter().any(|p1| p1 != *p0))
                .collect();
            let p0 = *pick_uniform(&p0_options, rng);
            let p1_options: Vec<&Pick> =
                cells[c1].picks.iter().filter(|p1| *p1 != p0).collect();
            let p1 = *pick_uniform(&p1_options, rng);
            vec![
                sentence_node(p0),
                cell_node(&cells[c0]),
                cell_node(&cells[c1]),
                sentence_node(p1),
            ]
        }
    }
}

/// Sample one pseudo chain of the requested hop length from a block.
/// The template variant is chosen uniformly among the satisfiable ones,
/// cells uniformly from the row, passages from the chosen cell's links.
/// Deterministic given the seed; None when no variant is satisfiable.
pub fn synthesize_chain(
    block: &FusedBlock,
    corpus: &Corpus,
    hop_length: usize,
    rng_seed: u64,
    lexicon: &Lexicon,
) -> Option<SynthChain> {
    let cells = block_view(block, corpus, lexicon);
    let variants: Vec<Variant> = variants_for(hop_length)
        .iter()
        .copied()
        .filter(|v| satisfiable(&cells, *v))
        .collect();
    if variants.is_empty() {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let variant = *pick_uniform(&variants, &mut rng);
    Some(SynthChain {
        block_id: block.block_id.clone(),
        nodes: instantiate(&cells, variant, &mut rng),
    })
}

/// Every distinct chain a block can produce, all templates and choices, in
/// deterministic order, capped.
fn enumerate_chains(
    block: &FusedBlock,
    corpus: &Corpus,
    lexicon: &Lexicon,
    cap: usize,
) -> Vec<SynthChain> {
    let cells = block_view(block, corpus, lexicon);
    let mut out: Vec<Vec<SynthNode>> = Vec::new();

    for c in &cells {
        out.push(vec![cell_node(c)]);
    }
    for p in row_picks(&cells) {
        out.push(vec![sentence_node(&p)]);
    }
    for &ci in &linked_cells(&cells) {
        for p in &cells[ci].picks {
            out.push(vec![sentence_node(p), cell_node(&cells[ci])]);
        }
    }
    for i in 0..cells.len() {
        for j in 0..cells.len() {
            if i != j {
                out.push(vec![cell_node(&cells[i]), cell_node(&cells[j])]);
            }
        }
    }
    for &c1 in &linked_cells(&cells) {
        for c0 in 0..cells.len() {
            if c0 == c1 {
                continue;
            }
            for p1 in &cells[c1].picks {
                out.push(vec![cell_node(&cells[c0]), cell_node(&cells[c1]), sentence_node(p1)]);
            }
        }
    }
    for &c0 in &linked_cells(&cells) {
        for c1 in 0..cells.len() {
            if c1 == c0 {
                continue;
            }
            for p0 in &cells[c0].picks {
                out.push(vec![sentence_node(p0), cell_node(&cells[c0]), cell_node(&cells[c1])]);
            }
        }
    }
    for (c0, c1) in four_hop_pairs(&cells) {
        for p0 in &cells[c0].picks {
            for p1 in &cells[c1].picks {
                if p0 != p1 {
                    out.push(vec![
                        sentence_node(p0),
                        cell_node(&cells[c0]),
                        cell_node(&cells[c1]),
                        sentence_node(p1),
                    ]);
                }
            }
        }
    }

    out.truncate(cap);
    out.into_iter()
        .map(|nodes| SynthChain {
            block_id: block.block_id.clone(),
            nodes,
        })
        .collect()
}

/// Alternative same-block chains ranked by similarity to the question
/// (lexicographic tie-break), the positive excluded. May return fewer
/// than `n`.
pub fn sample_hard_negatives(
    positive: &SynthChain,
    block: &FusedBlock,
    corpus: &Corpus,
    lexicon: &Lexicon,
    question: &str,
    n: usize,
) -> Vec<String> {
    let positive_text = positive.verbalize();
    let mut seen = BTreeSet::new();
    let mut scored: Vec<(String, f64)> = Vec::new();
    for alt in enumerate_chains(block, corpus, lexicon, 256) {
        let text = alt.verbalize();
        if text == positive_text || !seen.insert(text.clone()) {
            continue;
        }
        let sim = lexicon.similarity(question, &text);
        scored.push((text, sim));
    }
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    scored.into_iter().take(n).map(|(t, _)| t).collect()
}

/// Segment of a parsed verbalized chain.
enum ParsedSegment {
    Table { column: String, content: String },
    Passage(String),
}

fn parse_segments(chain_text: &str) -> Vec<ParsedSegment> {
    let mut out = Vec::new();
    for seg in chain_text.split(" [SEP] ") {
        if seg.starts_with("[Question] ") {
            continue;
        }
        if let Some(rest) = seg.strip_prefix("[Table] ") {
            let rest = rest.strip_suffix('.').unwrap_or(rest);
            let (column, content) = rest.split_once(" is ").unwrap_or((rest, ""));
            out.push(ParsedSegment::Table {
                column: column.to_string(),
                content: content.to_string(),
            });
        } else if let Some(rest) = seg.strip_prefix("[Passage] ") {
            out.push(ParsedSegment::Passage(rest.to_string()));
        } else if !seg.trim().is_empty() {
            out.push(ParsedSegment::Passage(seg.to_string()));
        }
    }
    out
}

fn strip_final_punct(s: &str) -> &str {
    s.trim_end_matches(['.', '!', '?'])
}

/// Cloze-style fallback question: the chain's first segment becomes the
/// context, the terminal's content is replaced by an interrogative.
/// `title_hint` supplies the passage title for sentence terminals when the
/// caller knows it; otherwise the sentence's first content token stands in.
/// Never returns an empty string.
pub fn template_question(chain_text: &str, title_hint: Option<&str>, lexicon: &Lexicon) -> String {
    let segments = parse_segments(chain_text);
    let Some(terminal) = segments.last() else {
        return "what is this about?".to_string();
    };
    let context = if segments.len() < 2 {
        String::new()
    } else {
        match &segments[0] {
            ParsedSegment::Table { column, content } => format!(" when {column} is {content}"),
            ParsedSegment::Passage(s) => format!(" when {}", strip_final_punct(s)),
        }
    };
    let body = match terminal {
        ParsedSegment::Table { column, .. } => format!("what is {column}{context}?"),
        ParsedSegment::Passage(sentence) => {
            let title = match title_hint {
                Some(t) if !t.trim().is_empty() => t.to_string(),
                _ => lexicon
                    .content_tokens(sentence)
                    .into_iter()
                    .next()
                    .unwrap_or_else(|| "passage".to_string()),
            };
            format!("which {title}{context}?")
        }
    };
    body.to_lowercase()
}

/// Question for a synthesized chain: the external generator when configured
/// (via the gateway), otherwise the template with the terminal passage's
/// real title.
pub fn generate_question(chain: &SynthChain, corpus: &Corpus, gateway: &ModelGateway) -> String {
    let text = chain.verbalize();
    let title_hint = match chain.nodes.last() {
        Some(SynthNode::Sentence { passage_id, .. }) => {
            corpus.passage(passage_id).map(|p| p.title.clone())
        }
        _ => None,
    };
    gateway.generate_with_hint(&text, title_hint.as_deref())
}

/// One pre-training record.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PretrainInstance {
    pub instance_id: String,
    pub question: String,
    pub positive: String,
    pub negatives: Vec<String>,
    pub hop_length: usize,
    pub source_block_id: String,
}

/// Summary record written alongside the corpus.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct PretrainStats {
    pub target: usize,
    pub emitted: usize,
    /// Realized instances per hop length 1..=4.
    pub hop_histogram: [usize; 4],
    /// Draws that could not be filled per hop length.
    pub hop_shortfall: [usize; 4],
    pub generator_warnings: u64,
    pub instances_without_negatives: usize,
}

fn derive_seed(seed: u64, index: usize, block_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ seed;
    for b in index.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    for b in block_id.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn sample_hop(rng: &mut ChaCha8Rng, ratios: &HopRatioConfig) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    for (i, r) in ratios.ratios().iter().enumerate() {
        acc += r;
        if x < acc {
            return i + 1;
        }
    }
    4
}

/// Synthesize `target_size` instances with multinomial hop lengths. Hop
/// eligibility is exact: a block enters a hop's pool only when some template
/// of that length is satisfiable (4-hop rows need two distinct linked
/// cells). Fully reproducible from the seed.
pub fn synthesize_pretrain_instances(
    corpus: &Corpus,
    ratios: &HopRatioConfig,
    target_size: usize,
    negatives_per_instance: usize,
    rng_seed: u64,
    gateway: &ModelGateway,
    lexicon: &Lexicon,
) -> (Vec<PretrainInstance>, PretrainStats) {
    let blocks = build_fused_blocks(corpus, 0);
    let views: Vec<Vec<CellView>> = blocks
        .iter()
        .map(|b| block_view(b, corpus, lexicon))
        .collect();
    let mut pools: [Vec<usize>; 4] = Default::default();
    for (i, cells) in views.iter().enumerate() {
        for hop in 1..=4usize {
            if variants_for(hop).iter().any(|v| satisfiable(cells, *v)) {
                pools[hop - 1].push(i);
            }
        }
    }

    let mut stats = PretrainStats {
        target: target_size,
        ..PretrainStats::default()
    };
    let warnings_before = gateway.warning_count();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut instances = Vec::new();
    for i in 0..target_size {
        let hop = sample_hop(&mut rng, ratios);
        let pool = &pools[hop - 1];
        if pool.is_empty() {
            stats.hop_shortfall[hop - 1] += 1;
            continue;
        }
        let block = &blocks.blocks()[pool[rng.random_range(0..pool.len())]];
        let seed = derive_seed(rng_seed, i, &block.block_id);
        let Some(chain) = synthesize_chain(block, corpus, hop, seed, lexicon) else {
            stats.hop_shortfall[hop - 1] += 1;
            continue;
        };
        let question = generate_question(&chain, corpus, gateway);
        let negatives =
            sample_hard_negatives(&chain, block, corpus, lexicon, &question, negatives_per_instance);
        if negatives.is_empty() {
            stats.instances_without_negatives += 1;
        }
        stats.hop_histogram[hop - 1] += 1;
        stats.emitted += 1;
        instances.push(PretrainInstance {
            instance_id: format!("pt-{i:06}"),
            question,
            positive: chain.verbalize(),
            negatives,
            hop_length: chain.hop_length(),
            source_block_id: chain.block_id,
        });
    }
    stats.generator_warnings = gateway.warning_count() - warnings_before;
    (instances, stats)
}

/// Synthesize and write the corpus as line-delimited JSON; returns stats.
#[allow(clippy::too_many_arguments)]
pub fn build_pretrain_corpus(
    corpus: &Corpus,
    ratios: &HopRatioConfig,
    target_size: usize,
    negatives_per_instance: usize,
    rng_seed: u64,
    gateway: &ModelGateway,
    lexicon: &Lexicon,
    out_path: &Path,
) -> Result<PretrainStats, PretrainError> {
    let (instances, stats) = synthesize_pretrain_instances(
        corpus,
        ratios,
        target_size,
        negatives_per_instance,
        rng_seed,
        gateway,
        lexicon,
    );
    let mut w = BufWriter::new(File::create(out_path)?);
    for inst in &instances {
        serde_json::to_writer(&mut w, inst).map_err(io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CellLink, Table};
    use crate::gateway::ModelGateway;

    fn lex() -> Lexicon {
        Lexicon::default()
    }

    /// One row, two cells, each linked to its own passage.
    fn linked_block() -> (Corpus, crate::corpus::FusedBlockSet) {
        let table = Table {
            table_id: "t".into(),
            title: "Fixture".into(),
            section_title: String::new(),
            header: vec!["Year".into(), "Points".into()],
            rows: vec![vec!["19-20".into(), "25.3".into()]],
        };
        let passages = vec![
            Passage::new(
                "p_year".into(),
                "Season overview".into(),
                "The season overview covers 19-20. Unrelated filler here.".into(),
            ),
            Passage::new(
                "p_points".into(),
                "Scoring record".into(),
                "A scoring record of 25.3 points. Another filler.".into(),
            ),
        ];
        let links = vec![
            CellLink {
                table_id: "t".into(),
                row_index: 0,
                col_index: 0,
                passage_id: "p_year".into(),
            },
            CellLink {
                table_id: "t".into(),
                row_index: 0,
                col_index: 1,
                passage_id: "p_points".into(),
            },
        ];
        let corpus = Corpus::from_parts(vec![table], passages, links).unwrap();
        let blocks = build_fused_blocks(&corpus, 0);
        (corpus, blocks)
    }

    #[test]
    fn four_hop_template_shape() {
        let (corpus, blocks) = linked_block();
        let block = &blocks.blocks()[0];
        let chain = synthesize_chain(block, &corpus, 4, 11, &lex()).unwrap();
        assert_eq!(chain.hop_length(), 4);
        assert!(matches!(chain.nodes[0], SynthNode::Sentence { .. }));
        assert!(matches!(chain.nodes[1], SynthNode::Cell { .. }));
        assert!(matches!(chain.nodes[2], SynthNode::Cell { .. }));
        assert!(matches!(chain.nodes[3], SynthNode::Sentence { .. }));
        assert_ne!(chain.nodes[0], chain.nodes[3]);
        assert_ne!(chain.nodes[1], chain.nodes[2]);
    }

    #[test]
    fn four_hop_without_links_is_none() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["A".into(), "B".into()],
            rows: vec![vec!["a".into(), "b".into()]],
        };
        let corpus = Corpus::from_parts(vec![table], vec![], vec![]).unwrap();
        let blocks = build_fused_blocks(&corpus, 0);
        assert!(synthesize_chain(&blocks.blocks()[0], &corpus, 4, 1, &lex()).is_none());
        // 2-hop still works through the (c0, c1) variant.
        assert!(synthesize_chain(&blocks.blocks()[0], &corpus, 2, 1, &lex()).is_some());
    }

    #[test]
    fn synthesis_is_deterministic() {
        let (corpus, blocks) = linked_block();
        let block = &blocks.blocks()[0];
        for hop in 1..=4 {
            let a = synthesize_chain(block, &corpus, hop, 99, &lex());
            let b = synthesize_chain(block, &corpus, hop, 99, &lex());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn best_sentence_prefers_title_match() {
        let lexicon = lex();
        let p = Passage::new(
            "p".into(),
            "COVID-19".into(),
            "An opening line without the term. The pandemic COVID-19 shut it down.".into(),
        );
        let (idx, s) = best_sentence(&p, &lexicon).unwrap();
        assert_eq!(idx, 1);
        assert!(s.contains("COVID-19"));

        let single = Passage::new("p2".into(), "T".into(), "Only sentence.".into());
        assert_eq!(best_sentence(&single, &lexicon).unwrap().0, 0);

        let allzero = Passage::new(
            "p3".into(),
            "Zebra".into(),
            "First filler line. Second filler line.".into(),
        );
        assert_eq!(best_sentence(&allzero, &lexicon).unwrap().0, 0);
    }

    #[test]
    fn template_question_golden() {
        let q = template_question(
            "[Table] Year is 19-20. [SEP] [Table] Points is 25.3.",
            None,
            &lex(),
        );
        assert_eq!(q, "what is points when year is 19-20?");
    }

    #[test]
    fn template_question_sentence_terminal_uses_hint() {
        let q = template_question(
            "[Table] Year is 19-20. [SEP] [Passage] The season was suspended.",
            Some("2019-20 season"),
            &lex(),
        );
        assert_eq!(q, "which 2019-20 season when year is 19-20?");
        let q2 = template_question("[Passage] The season was suspended.", None, &lex());
        assert_eq!(q2, "which season?");
    }

    #[test]
    fn template_question_never_empty() {
        assert!(!template_question("", None, &lex()).is_empty());
        assert!(!template_question("[Table] X is y.", None, &lex()).is_empty());
    }

    #[test]
    fn hard_negatives_forced_choice() {
        // Single row with two unlinked cells: alternatives beyond the
        // positive are (c1), (c0,c1), (c1,c0) and (c0).
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["A".into(), "B".into()],
            rows: vec![vec!["left".into(), "right".into()]],
        };
        let corpus = Corpus::from_parts(vec![table], vec![], vec![]).unwrap();
        let blocks = build_fused_blocks(&corpus, 0);
        let block = &blocks.blocks()[0];
        let positive = SynthChain {
            block_id: block.block_id.clone(),
            nodes: vec![SynthNode::Cell {
                col_index: 0,
                column_name: "A".into(),
                content: "left".into(),
            }],
        };
        let negs = sample_hard_negatives(&positive, block, &corpus, &lex(), "left question", 10);
        assert!(!negs.is_empty());
        assert!(negs.iter().all(|n| n != &positive.verbalize()));
    }

    #[test]
    fn hard_negatives_top_n_by_similarity() {
        let (corpus, blocks) = linked_block();
        let block = &blocks.blocks()[0];
        let positive = synthesize_chain(block, &corpus, 4, 3, &lex()).unwrap();
        let question = "what is points when year is 19-20?";
        let got = sample_hard_negatives(&positive, block, &corpus, &lex(), question, 2);
        assert_eq!(got.len(), 2);

        // Independent re-ranking of every alternative.
        let lexicon = lex();
        let positive_text = positive.verbalize();
        let mut all: Vec<(String, f64)> = enumerate_chains(block, &corpus, &lexicon, 256)
            .into_iter()
            .map(|c| c.verbalize())
            .filter(|t| t != &positive_text)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .map(|t| {
                let s = lexicon.similarity(question, &t);
                (t, s)
            })
            .collect();
        all.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let expected: Vec<String> = all.into_iter().take(2).map(|(t, _)| t).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn degenerate_single_cell_row_yields_no_negatives() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["A".into()],
            rows: vec![vec!["only".into()]],
        };
        let corpus = Corpus::from_parts(vec![table], vec![], vec![]).unwrap();
        let blocks = build_fused_blocks(&corpus, 0);
        let block = &blocks.blocks()[0];
        let positive = SynthChain {
            block_id: block.block_id.clone(),
            nodes: vec![SynthNode::Cell {
                col_index: 0,
                column_name: "A".into(),
                content: "only".into(),
            }],
        };
        let negs = sample_hard_negatives(&positive, block, &corpus, &lex(), "q", 5);
        assert!(negs.is_empty());
    }

    #[test]
    fn target_zero_is_empty() {
        let (corpus, _) = linked_block();
        let gw = ModelGateway::offline(lex());
        let (instances, stats) = synthesize_pretrain_instances(
            &corpus,
            &HopRatioConfig::default(),
            0,
            2,
            1,
            &gw,
            &lex(),
        );
        assert!(instances.is_empty());
        assert_eq!(stats.emitted, 0);
    }

    #[test]
    fn corpus_build_is_seed_deterministic() {
        let (corpus, _) = linked_block();
        let lexicon = lex();
        let dir = tempfile::TempDir::new().unwrap();
        let a = dir.path().join("a.jsonl");
        let b = dir.path().join("b.jsonl");
        let gw = ModelGateway::offline(lexicon.clone());
        build_pretrain_corpus(&corpus, &HopRatioConfig::default(), 50, 2, 7, &gw, &lexicon, &a)
            .unwrap();
        build_pretrain_corpus(&corpus, &HopRatioConfig::default(), 50, 2, 7, &gw, &lexicon, &b)
            .unwrap();
        assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_ne!(std::fs::read(&a).unwrap().len(), 0);
    }

    #[test]
    fn histogram_accounts_for_every_draw() {
        let (corpus, _) = linked_block();
        let lexicon = lex();
        let gw = ModelGateway::offline(lexicon.clone());
        let (instances, stats) = synthesize_pretrain_instances(
            &corpus,
            &HopRatioConfig::default(),
            500,
            1,
            21,
            &gw,
            &lexicon,
        );
        assert_eq!(stats.emitted, instances.len());
        let histo_sum: usize = stats.hop_histogram.iter().sum();
        let shortfall_sum: usize = stats.hop_shortfall.iter().sum();
        assert_eq!(histo_sum + shortfall_sum, 500);
        for inst in &instances {
            let expected_hop = inst.positive.split(" [SEP] ").count();
            assert_eq!(inst.hop_length, expected_hop);
        }
    }

    #[test]
    fn ratio_validation() {
        assert!(HopRatioConfig::new([0.25, 0.25, 0.25, 0.25]).is_ok());
        assert!(HopRatioConfig::new([0.5, 0.5, 0.5, -0.5]).is_err());
        assert!(HopRatioConfig::new([0.1, 0.2, 0.3, 0.5]).is_err());
    }
}
