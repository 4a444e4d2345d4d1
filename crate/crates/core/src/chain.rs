//! Hybrid chain enumeration and supervision construction.
//!
//! Candidate chains are the shortest paths from the question node to every
//! other node. Pseudo ground-truth chains are the shortest paths to
//! answer-bearing nodes with maximum textual similarity to the question;
//! hard negatives are built the same way over answer-free paths (InnerNeg)
//! or mined from other instances' positives with a BM25 scorer (BMNeg).

use std::collections::{BTreeMap, BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{block_contains_answer, Corpus, FusedBlockSet, QAInstance};
use crate::graph::{GraphOptions, HybridGraph, NodeKind, NodeOrigin};
use crate::retrieval::Bm25Index;
use crate::text::{token_seq_contains, tokenize, Lexicon};

/// Two path costs within this distance count as equal when collecting
/// predecessor sets in weighted mode.
pub const COST_TOLERANCE: f64 = 1e-9;

/// An ordered node sequence beginning at the question node.
#[derive(Debug, Clone, PartialEq)]
pub struct HybridChain {
    pub node_ids: Vec<usize>,
    pub total_cost: f64,
    pub hop_count: usize,
}

impl HybridChain {
    fn new(node_ids: Vec<usize>, total_cost: f64) -> Self {
        let hop_count = node_ids.len() - 1;
        HybridChain {
            node_ids,
            total_cost,
            hop_count,
        }
    }

    pub fn terminal(&self) -> usize {
        *self.node_ids.last().expect("chains are non-empty")
    }
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Maximum number of non-question nodes per chain.
    pub max_hops: usize,
    /// Deterministic truncation bound for each node's path list.
    pub max_paths_per_node: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            max_hops: 4,
            max_paths_per_node: 64,
        }
    }
}

/// All candidate chains plus the per-node shortest-path counts SP(i).
#[derive(Debug, Clone)]
pub struct ChainCandidateSet {
    pub chains: Vec<HybridChain>,
    pub per_node_counts: BTreeMap<usize, u64>,
    pub truncated: bool,
}

impl ChainCandidateSet {
    pub fn total_count(&self) -> u64 {
        self.per_node_counts.values().sum()
    }
}

/// Min-heap entry; weights are finite so the ordering is total.
struct MinScored(f64, usize);

impl PartialEq for MinScored {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 && self.1 == other.1
    }
}
impl Eq for MinScored {}
impl PartialOrd for MinScored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for MinScored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Reversed so the smallest cost pops first from BinaryHeap.
        other
            .0
            .partial_cmp(&self.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| other.1.cmp(&self.1))
    }
}

/// Shortest-path distances from the question node plus the full predecessor
/// sets (every parent achieving the minimum cost within [`COST_TOLERANCE`]).
/// Strictly positive edge weights make the predecessor relation a DAG.
struct ShortestPathDag {
    dist: Vec<f64>,
    preds: Vec<Vec<usize>>,
    succs: Vec<Vec<usize>>,
}

fn shortest_path_dag(graph: &HybridGraph) -> ShortestPathDag {
    let n = graph.len();
    let mut dist = vec![f64::INFINITY; n];
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut popped = vec![false; n];
    let mut heap = BinaryHeap::new();
    dist[0] = 0.0;
    heap.push(MinScored(0.0, 0));
    while let Some(MinScored(d, u)) = heap.pop() {
        if popped[u] {
            continue;
        }
        popped[u] = true;
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] - COST_TOLERANCE {
                dist[v] = nd;
                preds[v] = vec![u];
                heap.push(MinScored(nd, v));
            } else if (nd - dist[v]).abs() <= COST_TOLERANCE && !preds[v].contains(&u) {
                preds[v].push(u);
            }
        }
    }
    for p in &mut preds {
        p.sort_unstable();
    }
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in 0..n {
        for &p in &preds[v] {
            succs[p].push(v);
        }
    }
    for s in &mut succs {
        s.sort_unstable();
    }
    ShortestPathDag { dist, preds, succs }
}

/// Number of minimum-cost paths per node, split by hop count (DP over the
/// predecessor DAG in increasing-distance order).
fn count_paths_by_hops(dag: &ShortestPathDag, max_hops: usize) -> Vec<Vec<u64>> {
    let n = dag.dist.len();
    let mut counts = vec![vec![0u64; max_hops + 1]; n];
    counts[0][0] = 1;
    let mut order: Vec<usize> = (0..n).filter(|&v| dag.dist[v].is_finite()).collect();
    order.sort_by(|&a, &b| {
        dag.dist[a]
            .partial_cmp(&dag.dist[b])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for v in order {
        if v == 0 {
            continue;
        }
        for h in 1..=max_hops {
            let mut total = 0u64;
            for &p in &dag.preds[v] {
                total = total.saturating_add(counts[p][h - 1]);
            }
            counts[v][h] = total;
        }
    }
    counts
}

fn ancestors(dag: &ShortestPathDag, v: usize) -> HashSet<usize> {
    let mut seen = HashSet::from([v]);
    let mut stack = vec![v];
    while let Some(u) = stack.pop() {
        for &p in &dag.preds[u] {
            if seen.insert(p) {
                stack.push(p);
            }
        }
    }
    seen
}

/// Minimum-cost paths from the question to `target`, in lexicographic
/// node-id order, at most `cap` of them, skipping any path that touches an
/// excluded node.
fn enumerate_paths_to(
    dag: &ShortestPathDag,
    target: usize,
    max_hops: usize,
    cap: usize,
    exclude: &HashSet<usize>,
) -> Vec<Vec<usize>> {
    if !dag.dist[target].is_finite() || exclude.contains(&target) || exclude.contains(&0) {
        return Vec::new();
    }
    let allowed = ancestors(dag, target);
    let mut out = Vec::new();
    let mut path = vec![0usize];
    dfs_paths(
        dag, 0, target, max_hops, cap, exclude, &allowed, &mut path, &mut out,
    );
    out
}

#[allow(clippy::too_many_arguments)]
fn dfs_paths(
    dag: &ShortestPathDag,
    u: usize,
    target: usize,
    max_hops: usize,
    cap: usize,
    exclude: &HashSet<usize>,
    allowed: &HashSet<usize>,
    path: &mut Vec<usize>,
    out: &mut Vec<Vec<usize>>,
) -> bool {
    if u == target {
        out.push(path.clone());
        return out.len() < cap;
    }
    if path.len() - 1 >= max_hops {
        return true;
    }
    for &w in &dag.succs[u] {
        if !allowed.contains(&w) || exclude.contains(&w) {
            continue;
        }
        path.push(w);
        let keep_going = dfs_paths(dag, w, target, max_hops, cap, exclude, allowed, path, out);
        path.pop();
        if !keep_going {
            return false;
        }
    }
    true
}

/// Enumerate all candidate chains: for each reachable non-question node, the
/// minimum-cost paths from the question (breadth-first-equivalent in Simple
/// mode, least-cost with predecessor sets in Weighted mode). Paths longer
/// than `max_hops` are excluded; per-node lists are truncated
/// deterministically at `max_paths_per_node` in lexicographic order, setting
/// `truncated`.
pub fn enumerate_candidates(graph: &HybridGraph, opts: &SearchOptions) -> ChainCandidateSet {
    let n = graph.len();
    let eff_hops = opts.max_hops.min(n.saturating_sub(1));
    let dag = shortest_path_dag(graph);
    let counts = count_paths_by_hops(&dag, eff_hops);
    let mut chains = Vec::new();
    let mut per_node_counts = BTreeMap::new();
    let mut truncated = false;
    for v in 1..n {
        if !dag.dist[v].is_finite() {
            continue;
        }
        let total: u64 = counts[v].iter().sum();
        if total == 0 {
            continue; // reachable, but only beyond the hop bound
        }
        per_node_counts.insert(v, total);
        if total > opts.max_paths_per_node as u64 {
            truncated = true;
        }
        let paths = enumerate_paths_to(&dag, v, eff_hops, opts.max_paths_per_node, &HashSet::new());
        for p in paths {
            chains.push(HybridChain::new(p, dag.dist[v]));
        }
    }
    ChainCandidateSet {
        chains,
        per_node_counts,
        truncated,
    }
}

/// Flatten a chain into its tagged text form, segments joined by " [SEP] ".
/// The question segment is included only on request.
pub fn verbalize_chain(chain: &HybridChain, graph: &HybridGraph, include_question: bool) -> String {
    let mut segments = Vec::with_capacity(chain.node_ids.len());
    for &id in &chain.node_ids {
        let node = graph.node(id);
        match (&node.kind, &node.origin) {
            (NodeKind::Question, _) => {
                if include_question {
                    segments.push(format!("[Question] {}", node.content));
                }
            }
            (NodeKind::Cell, NodeOrigin::Cell { column_name, .. }) => {
                segments.push(format!("[Table] {} is {}.", column_name, node.content));
            }
            (NodeKind::Sentence, _) => {
                segments.push(format!("[Passage] {}", node.content));
            }
            (kind, origin) => unreachable!("kind {kind:?} with origin {origin:?}"),
        }
    }
    segments.join(" [SEP] ")
}

fn scored_candidates(
    graph: &HybridGraph,
    terminals: &[usize],
    exclude: &HashSet<usize>,
    lexicon: &Lexicon,
    opts: &SearchOptions,
) -> Vec<(HybridChain, f64)> {
    let n = graph.len();
    let eff_hops = opts.max_hops.min(n.saturating_sub(1));
    let dag = shortest_path_dag(graph);
    let question_text = graph.question().content.clone();
    let mut out = Vec::new();
    for &v in terminals {
        for path in enumerate_paths_to(&dag, v, eff_hops, opts.max_paths_per_node, exclude) {
            let chain = HybridChain::new(path, dag.dist[v]);
            let sim = lexicon.similarity(&question_text, &verbalize_chain(&chain, graph, false));
            out.push((chain, sim));
        }
    }
    out
}

/// Higher similarity wins; ties prefer fewer hops, then the lexicographically
/// smaller node-id sequence.
fn pick_best(candidates: Vec<(HybridChain, f64)>) -> Option<HybridChain> {
    candidates
        .into_iter()
        .reduce(|best, cand| {
            let better = cand.1 > best.1
                || (cand.1 == best.1
                    && (cand.0.hop_count < best.0.hop_count
                        || (cand.0.hop_count == best.0.hop_count
                            && cand.0.node_ids < best.0.node_ids)));
            if better {
                cand
            } else {
                best
            }
        })
        .map(|(chain, _)| chain)
}

/// Pseudo ground-truth chain: among all shortest paths from the question to
/// any answer-bearing node, the one with maximum textual similarity to the
/// question. None when no answer node is reachable.
pub fn oracle_chain(
    graph: &HybridGraph,
    answer_text: &str,
    lexicon: &Lexicon,
    opts: &SearchOptions,
) -> Option<HybridChain> {
    let answer_nodes = graph.answer_nodes(answer_text);
    if answer_nodes.is_empty() {
        return None;
    }
    let candidates = scored_candidates(graph, &answer_nodes, &HashSet::new(), lexicon, opts);
    pick_best(candidates)
}

/// Hard-negative chain: the same selection restricted to paths that end at a
/// non-answer node and touch no answer node anywhere along the way. None
/// when no such path exists.
pub fn negative_chain(
    graph: &HybridGraph,
    answer_text: &str,
    lexicon: &Lexicon,
    opts: &SearchOptions,
) -> Option<HybridChain> {
    pick_best(negative_candidates(graph, answer_text, lexicon, opts))
}

fn negative_candidates(
    graph: &HybridGraph,
    answer_text: &str,
    lexicon: &Lexicon,
    opts: &SearchOptions,
) -> Vec<(HybridChain, f64)> {
    let answer_nodes: HashSet<usize> = graph.answer_nodes(answer_text).into_iter().collect();
    let terminals: Vec<usize> = (1..graph.len())
        .filter(|id| !answer_nodes.contains(id))
        .collect();
    scored_candidates(graph, &terminals, &answer_nodes, lexicon, opts)
}

/// Answer-free chains of one graph ranked for InnerNeg sampling: similarity
/// descending, then fewer hops, then lexicographic node-id order.
fn ranked_inner_negatives(
    graph: &HybridGraph,
    answer_text: &str,
    lexicon: &Lexicon,
    opts: &SearchOptions,
) -> Vec<String> {
    let mut candidates = negative_candidates(graph, answer_text, lexicon, opts);
    candidates.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.hop_count.cmp(&b.0.hop_count))
            .then(a.0.node_ids.cmp(&b.0.node_ids))
    });
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (chain, _) in candidates {
        let text = verbalize_chain(&chain, graph, false);
        if seen.insert(text.clone()) {
            out.push(text);
        }
    }
    out
}

/// Whether a verbalized chain string contains the answer as a contiguous
/// whole-token subsequence.
pub fn chain_text_contains_answer(chain_text: &str, answer: &str) -> bool {
    token_seq_contains(tokenize(chain_text).tokens(), tokenize(answer).tokens())
}

/// Negative sampling strategy for extractor training instances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegativeStrategy {
    /// Other chains constructed from the same fused block.
    InnerNeg,
    /// Most-similar positive chains of other instances under BM25.
    BMNeg,
}

/// One extractor-training record: a question, its pseudo ground-truth chain,
/// and hard negatives. Terminal of the positive contains the answer; no
/// negative contains the answer; negatives are non-empty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingInstance {
    pub question_id: String,
    pub question: String,
    pub positive: String,
    pub negatives: Vec<String>,
    pub strategy: NegativeStrategy,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingSkip {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct TrainingBuild {
    pub instances: Vec<TrainingInstance>,
    pub skipped: Vec<TrainingSkip>,
}

struct BuiltPositive {
    qa_index: usize,
    graph: HybridGraph,
    positive_text: String,
}

/// Construct one training instance per resolvable QA record. The gold block
/// is taken from `gold_block_id` when present, otherwise searched among the
/// gold table's blocks (or the whole corpus) by answer containment.
/// Unresolvable records are skipped with a reason.
pub fn emit_training_instances(
    qa_set: &[QAInstance],
    corpus: &Corpus,
    blocks: &FusedBlockSet,
    lexicon: &Lexicon,
    strategy: NegativeStrategy,
    negatives_per_instance: usize,
    graph_opts: &GraphOptions,
    search_opts: &SearchOptions,
) -> TrainingBuild {
    let mut skipped = Vec::new();
    let mut built: Vec<BuiltPositive> = Vec::new();

    for (qa_index, qa) in qa_set.iter().enumerate() {
        let candidate_ids: Vec<&str> = if let Some(bid) = &qa.gold_block_id {
            match blocks.get(bid) {
                Some(b) => vec![b.block_id.as_str()],
                None => Vec::new(),
            }
        } else if let Some(tid) = &qa.gold_table_id {
            blocks
                .iter()
                .filter(|b| &b.table_id == tid)
                .map(|b| b.block_id.as_str())
                .collect()
        } else {
            blocks
                .iter()
                .filter(|b| block_contains_answer(b, corpus, &qa.answer_text))
                .map(|b| b.block_id.as_str())
                .collect()
        };
        if candidate_ids.is_empty() {
            skipped.push(TrainingSkip {
                question_id: qa.question_id.clone(),
                reason: "no gold block".into(),
            });
            continue;
        }
        let mut found = None;
        for bid in candidate_ids {
            let block = blocks.get(bid).expect("candidate ids come from the set");
            let Ok(graph) =
                HybridGraph::build(&qa.question_text, &[block], corpus, lexicon, graph_opts)
            else {
                continue;
            };
            if let Some(chain) = oracle_chain(&graph, &qa.answer_text, lexicon, search_opts) {
                let positive_text = verbalize_chain(&chain, &graph, false);
                found = Some(BuiltPositive {
                    qa_index,
                    graph,
                    positive_text,
                });
                break;
            }
        }
        match found {
            Some(b) => built.push(b),
            None => skipped.push(TrainingSkip {
                question_id: qa.question_id.clone(),
                reason: "answer unreachable".into(),
            }),
        }
    }

    // BMNeg mines negatives from the other instances' positives.
    let bm25 = match strategy {
        NegativeStrategy::BMNeg => {
            let docs: Vec<(String, String)> = built
                .iter()
                .enumerate()
                .map(|(i, b)| (i.to_string(), b.positive_text.clone()))
                .collect();
            if docs.is_empty() {
                None
            } else {
                Some(Bm25Index::build(&docs))
            }
        }
        NegativeStrategy::InnerNeg => None,
    };

    let mut instances = Vec::new();
    for (built_index, b) in built.iter().enumerate() {
        let qa = &qa_set[b.qa_index];
        let negatives: Vec<String> = match strategy {
            NegativeStrategy::InnerNeg => {
                ranked_inner_negatives(&b.graph, &qa.answer_text, lexicon, search_opts)
                    .into_iter()
                    .filter(|t| t != &b.positive_text)
                    .take(negatives_per_instance)
                    .collect()
            }
            NegativeStrategy::BMNeg => {
                let index = bm25.as_ref().expect("built is non-empty here");
                let scores = index.score_all(&qa.question_text);
                let mut ranked: Vec<usize> = (0..built.len()).collect();
                ranked.sort_by(|&x, &y| {
                    scores[y]
                        .partial_cmp(&scores[x])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(x.cmp(&y))
                });
                let mut seen = HashSet::new();
                ranked
                    .into_iter()
                    .filter(|&i| i != built_index)
                    .map(|i| built[i].positive_text.clone())
                    .filter(|t| !chain_text_contains_answer(t, &qa.answer_text))
                    .filter(|t| t != &b.positive_text && seen.insert(t.clone()))
                    .take(negatives_per_instance)
                    .collect()
            }
        };
        if negatives.is_empty() {
            skipped.push(TrainingSkip {
                question_id: qa.question_id.clone(),
                reason: "no negative chains".into(),
            });
            continue;
        }
        instances.push(TrainingInstance {
            question_id: qa.question_id.clone(),
            question: qa.question_text.clone(),
            positive: b.positive_text.clone(),
            negatives,
            strategy,
        });
    }
    TrainingBuild { instances, skipped }
}
