//! Corpus data model: tables, passages, cell links, QA records, and the
//! fused blocks (one table row plus its linked passages) that act as the
//! retrieval and graph-building unit.
//!
//! All corpus files are UTF-8, line-delimited JSON. A [`Corpus`] is immutable
//! after load and safe for concurrent reads.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{self, cell_contains, normalize_space, sentence_contains, split_sentences};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}:{line}: malformed record: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: duplicate {kind} id `{id}`")]
    DuplicateId {
        path: String,
        line: usize,
        kind: &'static str,
        id: String,
    },
    #[error("{path}:{line}: {message}")]
    Invalid {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}:{line}: link references unknown passage `{passage_id}`")]
    DanglingPassage {
        path: String,
        line: usize,
        passage_id: String,
    },
    #[error("{path}:{line}: link references unknown table `{table_id}`")]
    DanglingTable {
        path: String,
        line: usize,
        table_id: String,
    },
    #[error("{path}:{line}: link cell ({row_index},{col_index}) out of bounds for table `{table_id}`")]
    LinkOutOfBounds {
        path: String,
        line: usize,
        table_id: String,
        row_index: usize,
        col_index: usize,
    },
    #[error("validation failed: {0}")]
    Validation(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A web table: ordered header plus rows of cell strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub table_id: String,
    pub title: String,
    #[serde(default)]
    pub section_title: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// A passage with sentences derived at load time.
///
/// Invariant: joining `sentences()` with single spaces reconstructs the
/// whitespace-normalized text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Passage {
    pub passage_id: String,
    pub title: String,
    pub text: String,
    sentences: Vec<String>,
}

impl Passage {
    pub fn new(passage_id: String, title: String, text: String) -> Self {
        let normalized = text.split_whitespace().collect::<Vec<_>>().join(" ");
        let sentences = split_sentences(&normalized);
        Passage {
            passage_id,
            title,
            text,
            sentences,
        }
    }

    pub fn sentences(&self) -> &[String] {
        &self.sentences
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PassageRec {
    passage_id: String,
    title: String,
    text: String,
}

/// A link from one table cell to a passage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellLink {
    pub table_id: String,
    pub row_index: usize,
    pub col_index: usize,
    pub passage_id: String,
}

/// A question with its answer and optional gold provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAInstance {
    pub question_id: String,
    #[serde(rename = "question")]
    pub question_text: String,
    #[serde(rename = "answer")]
    pub answer_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_table_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_block_id: Option<String>,
}

/// One cell of a fused block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockCell {
    pub col_index: usize,
    pub column_name: String,
    pub content: String,
}

/// One (cell, passage) link inside a fused block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockLink {
    pub col_index: usize,
    pub passage_id: String,
}

/// One table row plus the passages linked from its cells.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FusedBlock {
    pub block_id: String,
    pub table_id: String,
    pub row_index: usize,
    pub cells: Vec<BlockCell>,
    pub linked_passages: Vec<BlockLink>,
}

/// `<table_id>#<row_index>`.
pub fn make_block_id(table_id: &str, row_index: usize) -> String {
    format!("{table_id}#{row_index}")
}

/// Inverse of [`make_block_id`]; splits on the last `#` so table ids may
/// themselves contain the separator.
pub fn parse_block_id(block_id: &str) -> Option<(&str, usize)> {
    let (table_id, row) = block_id.rsplit_once('#')?;
    let row_index = row.parse().ok()?;
    Some((table_id, row_index))
}

/// Validated, id-indexed corpus. Immutable after construction.
#[derive(Debug, Clone)]
pub struct Corpus {
    tables: Vec<Table>,
    passages: Vec<Passage>,
    links: Vec<CellLink>,
    table_idx: HashMap<String, usize>,
    passage_idx: HashMap<String, usize>,
    row_links: HashMap<(String, usize), Vec<usize>>,
}

impl Corpus {
    /// Build and validate a corpus from in-memory parts.
    pub fn from_parts(
        tables: Vec<Table>,
        passages: Vec<Passage>,
        links: Vec<CellLink>,
    ) -> Result<Corpus, CorpusError> {
        let mut table_idx = HashMap::new();
        for (i, t) in tables.iter().enumerate() {
            if t.header.is_empty() {
                return Err(CorpusError::Validation(format!(
                    "table `{}` has an empty header",
                    t.table_id
                )));
            }
            for (r, row) in t.rows.iter().enumerate() {
                if row.len() != t.header.len() {
                    return Err(CorpusError::Validation(format!(
                        "table `{}` row {} has {} cells, header has {}",
                        t.table_id,
                        r,
                        row.len(),
                        t.header.len()
                    )));
                }
            }
            if table_idx.insert(t.table_id.clone(), i).is_some() {
                return Err(CorpusError::Validation(format!(
                    "duplicate table id `{}`",
                    t.table_id
                )));
            }
        }
        let mut passage_idx = HashMap::new();
        for (i, p) in passages.iter().enumerate() {
            if passage_idx.insert(p.passage_id.clone(), i).is_some() {
                return Err(CorpusError::Validation(format!(
                    "duplicate passage id `{}`",
                    p.passage_id
                )));
            }
        }
        let mut seen = HashSet::new();
        let mut kept_links = Vec::new();
        let mut row_links: HashMap<(String, usize), Vec<usize>> = HashMap::new();
        for l in links {
            let Some(&ti) = table_idx.get(&l.table_id) else {
                return Err(CorpusError::Validation(format!(
                    "link references unknown table `{}`",
                    l.table_id
                )));
            };
            let table = &tables[ti];
            if l.row_index >= table.rows.len() || l.col_index >= table.header.len() {
                return Err(CorpusError::Validation(format!(
                    "link cell ({},{}) out of bounds for table `{}`",
                    l.row_index, l.col_index, l.table_id
                )));
            }
            if !passage_idx.contains_key(&l.passage_id) {
                return Err(CorpusError::Validation(format!(
                    "link references unknown passage `{}`",
                    l.passage_id
                )));
            }
            // Exact duplicates are tolerated but stored once.
            if seen.insert(l.clone()) {
                row_links
                    .entry((l.table_id.clone(), l.row_index))
                    .or_default()
                    .push(kept_links.len());
                kept_links.push(l);
            }
        }
        Ok(Corpus {
            tables,
            passages,
            links: kept_links,
            table_idx,
            passage_idx,
            row_links,
        })
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn passages(&self) -> &[Passage] {
        &self.passages
    }

    pub fn links(&self) -> &[CellLink] {
        &self.links
    }

    pub fn table(&self, table_id: &str) -> Option<&Table> {
        self.table_idx.get(table_id).map(|&i| &self.tables[i])
    }

    pub fn passage(&self, passage_id: &str) -> Option<&Passage> {
        self.passage_idx.get(passage_id).map(|&i| &self.passages[i])
    }

    /// Links attached to one table row, sorted by (col_index, passage_id).
    pub fn links_for_row(&self, table_id: &str, row_index: usize) -> Vec<&CellLink> {
        let mut out: Vec<&CellLink> = self
            .row_links
            .get(&(table_id.to_string(), row_index))
            .map(|ids| ids.iter().map(|&i| &self.links[i]).collect())
            .unwrap_or_default();
        out.sort_by(|a, b| {
            (a.col_index, a.passage_id.as_str()).cmp(&(b.col_index, b.passage_id.as_str()))
        });
        out
    }

    /// Exact-title links across every table that are not already present.
    pub fn heuristic_links(&self) -> Vec<CellLink> {
        let title_index = build_title_index(&self.passages);
        let existing: HashSet<&CellLink> = self.links.iter().collect();
        let mut out = Vec::new();
        for table in &self.tables {
            link_table(table, &title_index, |l| !existing.contains(&l), &mut out);
        }
        out
    }
}

fn build_title_index(passages: &[Passage]) -> HashMap<String, Vec<&str>> {
    let mut index: HashMap<String, Vec<&str>> = HashMap::new();
    for p in passages {
        let key = normalize_space(&p.title);
        if key.is_empty() {
            continue;
        }
        index.entry(key).or_default().push(&p.passage_id);
    }
    for ids in index.values_mut() {
        ids.sort_unstable();
        ids.dedup();
    }
    index
}

fn link_table(
    table: &Table,
    title_index: &HashMap<String, Vec<&str>>,
    keep: impl Fn(&CellLink) -> bool,
    out: &mut Vec<CellLink>,
) {
    for (r, row) in table.rows.iter().enumerate() {
        for (c, cell) in row.iter().enumerate() {
            let key = normalize_space(cell);
            if key.is_empty() {
                continue;
            }
            if let Some(ids) = title_index.get(&key) {
                for pid in ids {
                    let link = CellLink {
                        table_id: table.table_id.clone(),
                        row_index: r,
                        col_index: c,
                        passage_id: pid.to_string(),
                    };
                    if keep(&link) {
                        out.push(link);
                    }
                }
            }
        }
    }
}

/// Emit a link wherever a cell's normalized content exactly equals a passage
/// title. Deterministic; never duplicates a link in `existing`.
pub fn heuristic_link(table: &Table, passages: &[Passage], existing: &[CellLink]) -> Vec<CellLink> {
    let title_index = build_title_index(passages);
    let existing: HashSet<&CellLink> = existing.iter().collect();
    let mut out = Vec::new();
    link_table(table, &title_index, |l| !existing.contains(l), &mut out);
    out
}

/// Fused blocks in deterministic (table_id, row_index) order, indexed by id.
#[derive(Debug, Clone)]
pub struct FusedBlockSet {
    blocks: Vec<FusedBlock>,
    idx: HashMap<String, usize>,
}

impl FusedBlockSet {
    pub fn blocks(&self) -> &[FusedBlock] {
        &self.blocks
    }

    pub fn get(&self, block_id: &str) -> Option<&FusedBlock> {
        self.idx.get(block_id).map(|&i| &self.blocks[i])
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &FusedBlock> {
        self.blocks.iter()
    }
}

/// One block per table row with at least `min_linked_passages` linked
/// passages (0 keeps every row).
pub fn build_fused_blocks(corpus: &Corpus, min_linked_passages: usize) -> FusedBlockSet {
    let mut table_ids: Vec<&str> = corpus.tables().iter().map(|t| t.table_id.as_str()).collect();
    table_ids.sort_unstable();
    let mut blocks = Vec::new();
    let mut idx = HashMap::new();
    for table_id in table_ids {
        let table = corpus.table(table_id).expect("table indexed");
        for (r, row) in table.rows.iter().enumerate() {
            let links = corpus.links_for_row(table_id, r);
            if links.len() < min_linked_passages {
                continue;
            }
            let cells = row
                .iter()
                .enumerate()
                .map(|(c, content)| BlockCell {
                    col_index: c,
                    column_name: table.header[c].clone(),
                    content: content.clone(),
                })
                .collect();
            let linked_passages = links
                .iter()
                .map(|l| BlockLink {
                    col_index: l.col_index,
                    passage_id: l.passage_id.clone(),
                })
                .collect();
            let block = FusedBlock {
                block_id: make_block_id(table_id, r),
                table_id: table_id.to_string(),
                row_index: r,
                cells,
                linked_passages,
            };
            idx.insert(block.block_id.clone(), blocks.len());
            blocks.push(block);
        }
    }
    FusedBlockSet { blocks, idx }
}

/// Flatten a block to its retrieval document:
/// `[TAB] [TITLE] <title> [DATA] <cell> [SEP] ... [PASSAGES] <text> [SEP] ...`
/// The `[PASSAGES]` segment is omitted entirely when no passage is linked.
pub fn verbalize_fused_block(block: &FusedBlock, corpus: &Corpus) -> String {
    let table = corpus.table(&block.table_id);
    let title = table.map(|t| t.title.as_str()).unwrap_or("");
    let cells = block
        .cells
        .iter()
        .map(|c| c.content.as_str())
        .collect::<Vec<_>>()
        .join(" [SEP] ");
    let mut out = format!("[TAB] [TITLE] {title} [DATA] {cells}");
    if !block.linked_passages.is_empty() {
        let passages = block
            .linked_passages
            .iter()
            .filter_map(|l| corpus.passage(&l.passage_id))
            .map(|p| p.text.as_str())
            .collect::<Vec<_>>()
            .join(" [SEP] ");
        out.push_str(" [PASSAGES] ");
        out.push_str(&passages);
    }
    out
}

/// Answer containment over a block's structured content: any cell under the
/// cell rule, or any sentence of a linked passage under the sentence rule.
pub fn block_contains_answer(block: &FusedBlock, corpus: &Corpus, answer: &str) -> bool {
    if block.cells.iter().any(|c| cell_contains(&c.content, answer)) {
        return true;
    }
    block.linked_passages.iter().any(|l| {
        corpus
            .passage(&l.passage_id)
            .is_some_and(|p| p.sentences().iter().any(|s| sentence_contains(s, answer)))
    })
}

fn read_lines<T, F>(path: &Path, mut parse: F) -> Result<Vec<T>, CorpusError>
where
    F: FnMut(&str, usize) -> Result<T, CorpusError>,
{
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(parse(&line, i + 1)?);
    }
    Ok(out)
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Load and validate a corpus from line-delimited JSON files.
///
/// Errors report the offending file and 1-based line number. Loading is
/// idempotent: the same files always produce an identical corpus.
pub fn load_corpus(
    tables_path: &Path,
    passages_path: &Path,
    links_path: &Path,
) -> Result<Corpus, CorpusError> {
    let mut table_ids = HashSet::new();
    let tables = read_lines(tables_path, |line, n| {
        let t: Table = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            path: path_str(tables_path),
            line: n,
            message: e.to_string(),
        })?;
        if t.header.is_empty() {
            return Err(CorpusError::Invalid {
                path: path_str(tables_path),
                line: n,
                message: format!("table `{}` has an empty header", t.table_id),
            });
        }
        for (r, row) in t.rows.iter().enumerate() {
            if row.len() != t.header.len() {
                return Err(CorpusError::Invalid {
                    path: path_str(tables_path),
                    line: n,
                    message: format!(
                        "table `{}` row {} has {} cells, header has {}",
                        t.table_id,
                        r,
                        row.len(),
                        t.header.len()
                    ),
                });
            }
        }
        if !table_ids.insert(t.table_id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path_str(tables_path),
                line: n,
                kind: "table",
                id: t.table_id,
            });
        }
        Ok(t)
    })?;

    let mut passage_ids = HashSet::new();
    let passages = read_lines(passages_path, |line, n| {
        let rec: PassageRec = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            path: path_str(passages_path),
            line: n,
            message: e.to_string(),
        })?;
        if !passage_ids.insert(rec.passage_id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path_str(passages_path),
                line: n,
                kind: "passage",
                id: rec.passage_id,
            });
        }
        Ok(Passage::new(rec.passage_id, rec.title, rec.text))
    })?;

    let table_by_id: HashMap<&str, &Table> =
        tables.iter().map(|t| (t.table_id.as_str(), t)).collect();
    let links = read_lines(links_path, |line, n| {
        let l: CellLink = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            path: path_str(links_path),
            line: n,
            message: e.to_string(),
        })?;
        let Some(table) = table_by_id.get(l.table_id.as_str()) else {
            return Err(CorpusError::DanglingTable {
                path: path_str(links_path),
                line: n,
                table_id: l.table_id,
            });
        };
        if l.row_index >= table.rows.len() || l.col_index >= table.header.len() {
            return Err(CorpusError::LinkOutOfBounds {
                path: path_str(links_path),
                line: n,
                table_id: l.table_id,
                row_index: l.row_index,
                col_index: l.col_index,
            });
        }
        if !passage_ids.contains(&l.passage_id) {
            return Err(CorpusError::DanglingPassage {
                path: path_str(links_path),
                line: n,
                passage_id: l.passage_id,
            });
        }
        Ok(l)
    })?;

    Corpus::from_parts(tables, passages, links)
}

/// Load QA records, validating answers and gold references against `corpus`.
pub fn load_qa(path: &Path, corpus: &Corpus) -> Result<Vec<QAInstance>, CorpusError> {
    let mut ids = HashSet::new();
    read_lines(path, |line, n| {
        let qa: QAInstance = serde_json::from_str(line).map_err(|e| CorpusError::Malformed {
            path: path_str(path),
            line: n,
            message: e.to_string(),
        })?;
        if qa.answer_text.trim().is_empty() {
            return Err(CorpusError::Invalid {
                path: path_str(path),
                line: n,
                message: format!("question `{}` has an empty answer", qa.question_id),
            });
        }
        if !ids.insert(qa.question_id.clone()) {
            return Err(CorpusError::DuplicateId {
                path: path_str(path),
                line: n,
                kind: "question",
                id: qa.question_id,
            });
        }
        if let Some(tid) = &qa.gold_table_id {
            if corpus.table(tid).is_none() {
                return Err(CorpusError::Invalid {
                    path: path_str(path),
                    line: n,
                    message: format!("gold_table_id `{tid}` not in corpus"),
                });
            }
        }
        if let Some(bid) = &qa.gold_block_id {
            let ok = parse_block_id(bid)
                .and_then(|(tid, row)| corpus.table(tid).map(|t| row < t.rows.len()))
                .unwrap_or(false);
            if !ok {
                return Err(CorpusError::Invalid {
                    path: path_str(path),
                    line: n,
                    message: format!("gold_block_id `{bid}` not in corpus"),
                });
            }
        }
        Ok(qa)
    })
}

/// Write the corpus back out in canonical line-delimited form.
///
/// For input already in canonical form, load → dump is byte-identical.
pub fn dump_corpus(
    corpus: &Corpus,
    tables_path: &Path,
    passages_path: &Path,
    links_path: &Path,
) -> Result<(), CorpusError> {
    let mut tw = BufWriter::new(File::create(tables_path)?);
    for t in corpus.tables() {
        serde_json::to_writer(&mut tw, t).map_err(io::Error::from)?;
        tw.write_all(b"\n")?;
    }
    tw.flush()?;
    let mut pw = BufWriter::new(File::create(passages_path)?);
    for p in corpus.passages() {
        let rec = PassageRec {
            passage_id: p.passage_id.clone(),
            title: p.title.clone(),
            text: p.text.clone(),
        };
        serde_json::to_writer(&mut pw, &rec).map_err(io::Error::from)?;
        pw.write_all(b"\n")?;
    }
    pw.flush()?;
    let mut lw = BufWriter::new(File::create(links_path)?);
    for l in corpus.links() {
        serde_json::to_writer(&mut lw, l).map_err(io::Error::from)?;
        lw.write_all(b"\n")?;
    }
    lw.flush()?;
    Ok(())
}

/// Serialize any record stream as line-delimited JSON.
pub fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<(), io::Error> {
    let mut w = BufWriter::new(File::create(path)?);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// The shared example fixture: one table row about a suspended season plus
/// its linked passage. Used across module tests and the acceptance suite.
pub fn fig1_fixture() -> (Corpus, String) {
    let table = Table {
        table_id: "t_fig1".to_string(),
        title: "Season statistics".to_string(),
        section_title: String::new(),
        header: vec!["Year".to_string(), "Points".to_string()],
        rows: vec![vec!["19-20".to_string(), "25.3".to_string()]],
    };
    let passage = Passage::new(
        "p_covid".to_string(),
        "2019-20 season".to_string(),
        "The season was suspended by COVID-19.".to_string(),
    );
    let link = CellLink {
        table_id: "t_fig1".to_string(),
        row_index: 0,
        col_index: 0,
        passage_id: "p_covid".to_string(),
    };
    let corpus = Corpus::from_parts(vec![table], vec![passage], vec![link])
        .expect("fixture is well-formed");
    let question =
        "How many points did the player average in the year when the season was suspended by COVID-19?"
            .to_string();
    (corpus, question)
}

/// Whitespace-trimmed cell normalization used when matching cells to titles.
pub fn normalized_cell(content: &str) -> String {
    text::normalize_space(content)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;
    use tempfile::TempDir;

    fn write_file(dir: &TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let path = dir.path().join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    fn two_table_fixture(dir: &TempDir, links: &str) -> Result<Corpus, CorpusError> {
        let tables = write_file(
            dir,
            "tables.jsonl",
            concat!(
                r#"{"table_id":"t1","title":"T1","section_title":"","header":["A","B"],"rows":[["a1","b1"],["a2","b2"]]}"#,
                "\n",
                r#"{"table_id":"t2","title":"T2","section_title":"","header":["C"],"rows":[["c1"]]}"#,
                "\n"
            ),
        );
        let passages = write_file(
            dir,
            "passages.jsonl",
            concat!(
                r#"{"passage_id":"p1","title":"A1","text":"About a1. More text."}"#,
                "\n"
            ),
        );
        let links = write_file(dir, "links.jsonl", links);
        load_corpus(&tables, &passages, &links)
    }

    #[test]
    fn load_empty_files() {
        let dir = TempDir::new().unwrap();
        let t = write_file(&dir, "t.jsonl", "");
        let p = write_file(&dir, "p.jsonl", "");
        let l = write_file(&dir, "l.jsonl", "");
        let corpus = load_corpus(&t, &p, &l).unwrap();
        assert_eq!(corpus.tables().len(), 0);
        assert_eq!(corpus.passages().len(), 0);
    }

    #[test]
    fn load_reports_line_numbers() {
        let dir = TempDir::new().unwrap();
        let t = write_file(&dir, "t.jsonl", "not json\n");
        let p = write_file(&dir, "p.jsonl", "");
        let l = write_file(&dir, "l.jsonl", "");
        let err = load_corpus(&t, &p, &l).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains(":1:"), "{msg}");
    }

    #[test]
    fn dangling_link_names_passage() {
        let dir = TempDir::new().unwrap();
        let err = two_table_fixture(
            &dir,
            "{\"table_id\":\"t1\",\"row_index\":0,\"col_index\":0,\"passage_id\":\"missing\"}\n",
        )
        .unwrap_err();
        match err {
            CorpusError::DanglingPassage { passage_id, .. } => assert_eq!(passage_id, "missing"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn duplicate_table_id_rejected() {
        let dir = TempDir::new().unwrap();
        let rec = r#"{"table_id":"t1","title":"T","section_title":"","header":["A"],"rows":[]}"#;
        let t = write_file(&dir, "t.jsonl", &format!("{rec}\n{rec}\n"));
        let p = write_file(&dir, "p.jsonl", "");
        let l = write_file(&dir, "l.jsonl", "");
        assert!(matches!(
            load_corpus(&t, &p, &l).unwrap_err(),
            CorpusError::DuplicateId { kind: "table", .. }
        ));
    }

    #[test]
    fn row_arity_checked() {
        let dir = TempDir::new().unwrap();
        let t = write_file(
            &dir,
            "t.jsonl",
            r#"{"table_id":"t1","title":"T","section_title":"","header":["A","B"],"rows":[["only"]]}"#,
        );
        let p = write_file(&dir, "p.jsonl", "");
        let l = write_file(&dir, "l.jsonl", "");
        assert!(matches!(
            load_corpus(&t, &p, &l).unwrap_err(),
            CorpusError::Invalid { .. }
        ));
    }

    #[test]
    fn heuristic_link_exact_title() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["Player".into()],
            rows: vec![vec!["Lionel Messi".into()], vec!["19-20".into()]],
        };
        let passages = vec![Passage::new(
            "p".into(),
            "Lionel  Messi".into(),
            "A footballer.".into(),
        )];
        let links = heuristic_link(&table, &passages, &[]);
        assert_eq!(links.len(), 1);
        assert_eq!(links[0].passage_id, "p");
        assert_eq!((links[0].row_index, links[0].col_index), (0, 0));

        // An existing identical link suppresses re-emission.
        let again = heuristic_link(&table, &passages, &links);
        assert!(again.is_empty());
    }

    #[test]
    fn heuristic_link_matches_brute_force() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["A".into(), "B".into(), "C".into()],
            rows: vec![
                vec!["alpha".into(), "Beta".into(), "gamma".into()],
                vec!["delta".into(), "alpha".into(), "unknown".into()],
                vec!["Epsilon".into(), "".into(), "beta".into()],
            ],
        };
        let passages: Vec<Passage> = [
            ("p_alpha", "Alpha"),
            ("p_beta", "beta"),
            ("p_eps", "epsilon"),
            ("p_other", "Zeta"),
            ("p_beta2", "BETA"),
        ]
        .iter()
        .map(|(id, title)| Passage::new(id.to_string(), title.to_string(), "x.".into()))
        .collect();

        let got = heuristic_link(&table, &passages, &[]);

        // Independent oracle: scan every (cell, passage) pair.
        let mut expected = Vec::new();
        for (r, row) in table.rows.iter().enumerate() {
            for (c, cell) in row.iter().enumerate() {
                let mut pids: Vec<&str> = passages
                    .iter()
                    .filter(|p| {
                        !normalized_cell(cell).is_empty()
                            && normalize_space(&p.title) == normalized_cell(cell)
                    })
                    .map(|p| p.passage_id.as_str())
                    .collect();
                pids.sort_unstable();
                for pid in pids {
                    expected.push((r, c, pid.to_string()));
                }
            }
        }
        let got_tuples: Vec<(usize, usize, String)> = got
            .iter()
            .map(|l| (l.row_index, l.col_index, l.passage_id.clone()))
            .collect();
        assert_eq!(got_tuples, expected);
    }

    #[test]
    fn blocks_threshold() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["A".into()],
            rows: vec![vec!["a0".into()], vec!["a1".into()], vec!["a2".into()]],
        };
        let passages = vec![
            Passage::new("p0".into(), "x".into(), "x.".into()),
            Passage::new("p2".into(), "y".into(), "y.".into()),
        ];
        let links = vec![
            CellLink {
                table_id: "t".into(),
                row_index: 0,
                col_index: 0,
                passage_id: "p0".into(),
            },
            CellLink {
                table_id: "t".into(),
                row_index: 2,
                col_index: 0,
                passage_id: "p2".into(),
            },
        ];
        let corpus = Corpus::from_parts(vec![table], passages, links).unwrap();
        assert_eq!(build_fused_blocks(&corpus, 1).len(), 2);
        assert_eq!(build_fused_blocks(&corpus, 0).len(), 3);
    }

    #[test]
    fn fig1_block() {
        let (corpus, _q) = fig1_fixture();
        let blocks = build_fused_blocks(&corpus, 1);
        assert_eq!(blocks.len(), 1);
        let block = &blocks.blocks()[0];
        assert_eq!(block.block_id, "t_fig1#0");
        let contents: Vec<&str> = block.cells.iter().map(|c| c.content.as_str()).collect();
        assert_eq!(contents, ["19-20", "25.3"]);
        assert_eq!(block.linked_passages.len(), 1);
        assert_eq!(
            verbalize_fused_block(block, &corpus),
            "[TAB] [TITLE] Season statistics [DATA] 19-20 [SEP] 25.3 [PASSAGES] The season was suspended by COVID-19."
        );
    }

    #[test]
    fn verbalize_template() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["H1".into(), "H2".into()],
            rows: vec![vec!["a".into(), "b".into()]],
        };
        let passages = vec![Passage::new("p".into(), "P".into(), "p.".into())];
        let links = vec![CellLink {
            table_id: "t".into(),
            row_index: 0,
            col_index: 0,
            passage_id: "p".into(),
        }];
        let corpus = Corpus::from_parts(vec![table], passages, links).unwrap();
        let blocks = build_fused_blocks(&corpus, 0);
        assert_eq!(
            verbalize_fused_block(&blocks.blocks()[0], &corpus),
            "[TAB] [TITLE] T [DATA] a [SEP] b [PASSAGES] p."
        );
    }

    #[test]
    fn verbalize_without_passages_omits_segment() {
        let table = Table {
            table_id: "t".into(),
            title: "T".into(),
            section_title: String::new(),
            header: vec!["H1".into(), "H2".into()],
            rows: vec![vec!["a".into(), "b".into()]],
        };
        let corpus = Corpus::from_parts(vec![table], vec![], vec![]).unwrap();
        let blocks = build_fused_blocks(&corpus, 0);
        assert_eq!(
            verbalize_fused_block(&blocks.blocks()[0], &corpus),
            "[TAB] [TITLE] T [DATA] a [SEP] b"
        );
    }

    #[test]
    fn block_id_round_trip() {
        let id = make_block_id("weird#table", 7);
        assert_eq!(parse_block_id(&id), Some(("weird#table", 7)));
        assert_eq!(parse_block_id("no-separator"), None);
    }

    #[test]
    fn dump_round_trip_is_byte_identical() {
        let dir = TempDir::new().unwrap();
        let tables_body = concat!(
            r#"{"table_id":"t1","title":"T1","section_title":"S","header":["A","B"],"rows":[["a1","b1"]]}"#,
            "\n"
        );
        let passages_body = concat!(
            r#"{"passage_id":"p1","title":"A1","text":"About a1. More text."}"#,
            "\n"
        );
        let links_body = concat!(
            r#"{"table_id":"t1","row_index":0,"col_index":0,"passage_id":"p1"}"#,
            "\n"
        );
        let t = write_file(&dir, "t.jsonl", tables_body);
        let p = write_file(&dir, "p.jsonl", passages_body);
        let l = write_file(&dir, "l.jsonl", links_body);
        let corpus = load_corpus(&t, &p, &l).unwrap();
        let t2 = dir.path().join("t2.jsonl");
        let p2 = dir.path().join("p2.jsonl");
        let l2 = dir.path().join("l2.jsonl");
        dump_corpus(&corpus, &t2, &p2, &l2).unwrap();
        assert_eq!(std::fs::read(&t2).unwrap(), tables_body.as_bytes());
        assert_eq!(std::fs::read(&p2).unwrap(), passages_body.as_bytes());
        assert_eq!(std::fs::read(&l2).unwrap(), links_body.as_bytes());
    }

    #[test]
    fn qa_validation() {
        let (corpus, _) = fig1_fixture();
        let dir = TempDir::new().unwrap();
        let good = write_file(
            &dir,
            "qa.jsonl",
            concat!(
                r#"{"question_id":"q1","question":"How many points?","answer":"25.3","gold_table_id":"t_fig1","gold_block_id":"t_fig1#0"}"#,
                "\n"
            ),
        );
        assert_eq!(load_qa(&good, &corpus).unwrap().len(), 1);

        let bad = write_file(
            &dir,
            "qa_bad.jsonl",
            concat!(r#"{"question_id":"q1","question":"x","answer":""}"#, "\n"),
        );
        assert!(load_qa(&bad, &corpus).is_err());

        let dangling = write_file(
            &dir,
            "qa_dangling.jsonl",
            concat!(
                r#"{"question_id":"q1","question":"x","answer":"y","gold_table_id":"nope"}"#,
                "\n"
            ),
        );
        assert!(load_qa(&dangling, &corpus).is_err());
    }

    #[test]
    fn passage_sentences_reconstruct_normalized_text() {
        let p = Passage::new(
            "p".into(),
            "T".into(),
            "First sentence.   Second one!  And a third?".into(),
        );
        let joined = p.sentences().join(" ");
        let normalized = p.text.split_whitespace().collect::<Vec<_>>().join(" ");
        assert_eq!(joined, normalized);
    }
}
