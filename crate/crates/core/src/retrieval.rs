//! Fused-block retrieval: a from-scratch BM25 index, an exhaustive
//! dot-product dense index, table/block recall metrics, and single-file
//! index persistence with a versioned header.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{
    block_contains_answer, parse_block_id, verbalize_fused_block, Corpus, FusedBlockSet,
};
use crate::gateway::{GatewayError, ModelGateway};
use crate::text::tokenize;

pub const BM25_K1: f64 = 1.2;
pub const BM25_B: f64 = 0.75;

const INDEX_FORMAT: &str = "chainqa-block-index";
const INDEX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("index requires at least one block")]
    EmptyBlocks,
    #[error("embedding aborted after {embedded} of {total} documents: {source}")]
    EmbedFailed {
        embedded: usize,
        total: usize,
        source: GatewayError,
    },
    #[error("unsupported index file: {0}")]
    Format(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Okapi BM25 statistics over tokenized documents (k1 = 1.2, b = 0.75).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Bm25Index {
    k1: f64,
    b: f64,
    doc_ids: Vec<String>,
    doc_lengths: Vec<usize>,
    avg_doc_length: f64,
    postings: BTreeMap<String, Vec<(u32, u32)>>,
}

impl Bm25Index {
    pub fn build(docs: &[(String, String)]) -> Bm25Index {
        let mut doc_ids = Vec::with_capacity(docs.len());
        let mut doc_lengths = Vec::with_capacity(docs.len());
        let mut postings: BTreeMap<String, Vec<(u32, u32)>> = BTreeMap::new();
        for (i, (id, text)) in docs.iter().enumerate() {
            let tokens = tokenize(text);
            doc_ids.push(id.clone());
            doc_lengths.push(tokens.len());
            let mut counts: BTreeMap<&str, u32> = BTreeMap::new();
            for t in tokens.tokens() {
                *counts.entry(t).or_insert(0) += 1;
            }
            for (term, tf) in counts {
                postings
                    .entry(term.to_string())
                    .or_default()
                    .push((i as u32, tf));
            }
        }
        let avg_doc_length = if doc_lengths.is_empty() {
            0.0
        } else {
            doc_lengths.iter().sum::<usize>() as f64 / doc_lengths.len() as f64
        };
        Bm25Index {
            k1: BM25_K1,
            b: BM25_B,
            doc_ids,
            doc_lengths,
            avg_doc_length,
            postings,
        }
    }

    pub fn doc_count(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn avg_doc_length(&self) -> f64 {
        self.avg_doc_length
    }

    /// BM25 score of the query against every document, by document index.
    pub fn score_all(&self, query: &str) -> Vec<f64> {
        let mut scores = vec![0.0; self.doc_ids.len()];
        if self.doc_ids.is_empty() || self.avg_doc_length == 0.0 {
            return scores;
        }
        let n = self.doc_ids.len() as f64;
        for term in tokenize(query).tokens() {
            let Some(postings) = self.postings.get(term.as_str()) else {
                continue;
            };
            let df = postings.len() as f64;
            let idf = ((n - df + 0.5) / (df + 0.5) + 1.0).ln();
            for &(doc, tf) in postings {
                let dl = self.doc_lengths[doc as usize] as f64;
                let tf = tf as f64;
                let tf_norm = tf * (self.k1 + 1.0)
                    / (tf + self.k1 * (1.0 - self.b + self.b * dl / self.avg_doc_length));
                scores[doc as usize] += idf * tf_norm;
            }
        }
        scores
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Sparse,
    Dense,
}

/// Immutable block index, either BM25 statistics or unit-norm dense vectors.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BlockIndex {
    Sparse { bm25: Bm25Index },
    Dense {
        dim: usize,
        block_ids: Vec<String>,
        vectors: Vec<Vec<f64>>,
    },
}

impl BlockIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            BlockIndex::Sparse { .. } => IndexKind::Sparse,
            BlockIndex::Dense { .. } => IndexKind::Dense,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BlockIndex::Sparse { bm25 } => bm25.doc_count(),
            BlockIndex::Dense { block_ids, .. } => block_ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Index fused-block verbalizations. Dense indexing embeds every document
/// through the gateway (endpoint or hashed-TF fallback) and aborts with a
/// partial-progress report on endpoint failure.
pub fn build_index(
    blocks: &FusedBlockSet,
    corpus: &Corpus,
    kind: IndexKind,
    gateway: &ModelGateway,
) -> Result<BlockIndex, IndexError> {
    if blocks.is_empty() {
        return Err(IndexError::EmptyBlocks);
    }
    let docs: Vec<(String, String)> = blocks
        .iter()
        .map(|b| (b.block_id.clone(), verbalize_fused_block(b, corpus)))
        .collect();
    match kind {
        IndexKind::Sparse => Ok(BlockIndex::Sparse {
            bm25: Bm25Index::build(&docs),
        }),
        IndexKind::Dense => {
            let total = docs.len();
            let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(total);
            // Chunked so a failure reports how far the build got.
            for chunk in docs.chunks(gateway.batch_size().max(1)) {
                let texts: Vec<String> = chunk.iter().map(|(_, t)| t.clone()).collect();
                match gateway.embed_texts(&texts) {
                    Ok(vs) => vectors.extend(vs),
                    Err(source) => {
                        return Err(IndexError::EmbedFailed {
                            embedded: vectors.len(),
                            total,
                            source,
                        })
                    }
                }
            }
            let dim = vectors.first().map(|v| v.len()).unwrap_or(0);
            Ok(BlockIndex::Dense {
                dim,
                block_ids: docs.into_iter().map(|(id, _)| id).collect(),
                vectors,
            })
        }
    }
}

/// Ranked retrieval output: (block_id, score), scores non-increasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub ranked: Vec<(String, f64)>,
}

fn rank_top_k(ids: &[String], scores: &[f64], k: usize) -> Vec<(String, f64)> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| ids[a].cmp(&ids[b]))
    });
    order
        .into_iter()
        .take(k)
        .map(|i| (ids[i].clone(), scores[i]))
        .collect()
}

/// Score the question against every block (exhaustive in both kinds) and
/// return the top k, ties broken by lexicographic block id.
pub fn retrieve(
    index: &BlockIndex,
    question: &str,
    k: usize,
    gateway: &ModelGateway,
) -> Result<RetrievalResult, IndexError> {
    let ranked = match index {
        BlockIndex::Sparse { bm25 } => {
            let scores = bm25.score_all(question);
            rank_top_k(bm25.doc_ids(), &scores, k)
        }
        BlockIndex::Dense {
            block_ids, vectors, ..
        } => {
            let q = gateway
                .embed_texts(std::slice::from_ref(&question.to_string()))?
                .pop()
                .unwrap_or_default();
            let scores: Vec<f64> = vectors
                .iter()
                .map(|v| v.iter().zip(&q).map(|(a, b)| a * b).sum())
                .collect();
            rank_top_k(block_ids, &scores, k)
        }
    };
    Ok(RetrievalResult { ranked })
}

fn block_table_id(block_id: &str) -> &str {
    parse_block_id(block_id).map(|(t, _)| t).unwrap_or(block_id)
}

/// Fraction of questions with at least one top-k block from the gold table.
pub fn table_recall(results: &[RetrievalResult], gold_table_ids: &[String], k: usize) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let hits = results
        .iter()
        .zip(gold_table_ids)
        .filter(|(r, gold)| {
            r.ranked
                .iter()
                .take(k)
                .any(|(bid, _)| block_table_id(bid) == gold.as_str())
        })
        .count();
    hits as f64 / results.len() as f64
}

/// Stricter recall: a block counts only when it comes from the gold table
/// AND its structured content (cells plus linked sentences) contains the
/// answer.
pub fn block_recall(
    results: &[RetrievalResult],
    gold_table_ids: &[String],
    answers: &[String],
    k: usize,
    blocks: &FusedBlockSet,
    corpus: &Corpus,
) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let hits = results
        .iter()
        .zip(gold_table_ids.iter().zip(answers))
        .filter(|(r, (gold, answer))| {
            r.ranked.iter().take(k).any(|(bid, _)| {
                block_table_id(bid) == gold.as_str()
                    && blocks
                        .get(bid)
                        .is_some_and(|b| block_contains_answer(b, corpus, answer))
            })
        })
        .count();
    hits as f64 / results.len() as f64
}

#[derive(Serialize, Deserialize)]
struct IndexFile {
    format: String,
    version: u32,
    index: BlockIndex,
}

/// Persist the index to a single file with a versioned header.
pub fn save_index(index: &BlockIndex, path: &Path) -> Result<(), IndexError> {
    let file = IndexFile {
        format: INDEX_FORMAT.to_string(),
        version: INDEX_VERSION,
        index: index.clone(),
    };
    let w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(w, &file)?;
    Ok(())
}

pub fn load_index(path: &Path) -> Result<BlockIndex, IndexError> {
    let r = BufReader::new(File::open(path)?);
    let file: IndexFile = serde_json::from_reader(r)?;
    if file.format != INDEX_FORMAT {
        return Err(IndexError::Format(format!(
            "expected format `{INDEX_FORMAT}`, found `{}`",
            file.format
        )));
    }
    if file.version != INDEX_VERSION {
        return Err(IndexError::Format(format!(
            "unsupported version {} (this build reads {INDEX_VERSION})",
            file.version
        )));
    }
    Ok(file.index)
}
