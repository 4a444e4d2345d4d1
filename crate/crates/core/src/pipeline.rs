//! End-to-end pipeline: retrieve top-k fused blocks, build the joint graph,
//! enumerate and select a chain, and read the predicted answer off the
//! chain's terminal node. Per-question failures are recorded and the
//! pipeline continues.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{enumerate_candidates, SearchOptions};
use crate::corpus::{build_fused_blocks, Corpus, QAInstance};
use crate::eval::{exact_match, select_chain, token_f1, EvalReport};
use crate::gateway::{EndpointConfig, ModelGateway};
use crate::graph::{
    contains_answer, GraphError, GraphMode, GraphOptions, HybridGraph, NodeKind, NodeOrigin,
};
use crate::retrieval::{build_index, retrieve, IndexError, IndexKind};
use crate::text::Lexicon;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config {path}:{line}: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Corpus(#[from] crate::corpus::CorpusError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Declarative pipeline configuration. File format: one `key = value` per
/// line, `#` comments; endpoint URLs may also come from `CHAINQA_*`
/// environment variables.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub mode: GraphMode,
    pub top_k: usize,
    pub max_hops: usize,
    pub max_paths_per_node: usize,
    pub contextual_degree_cap: usize,
    pub index_kind: IndexKind,
    pub min_linked_passages: usize,
    pub recall_ks: Vec<usize>,
    pub endpoints: EndpointConfig,
    pub stopwords_path: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mode: GraphMode::Weighted,
            top_k: 15,
            max_hops: 4,
            max_paths_per_node: 64,
            contextual_degree_cap: 32,
            index_kind: IndexKind::Sparse,
            min_linked_passages: 0,
            recall_ks: vec![1, 2, 5],
            endpoints: EndpointConfig::default(),
            stopwords_path: None,
        }
    }
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, PipelineError> {
        let body = std::fs::read_to_string(path)?;
        let mut cfg = PipelineConfig::default();
        let err = |line: usize, message: String| PipelineError::Config {
            path: path.display().to_string(),
            line,
            message,
        };
        for (i, raw) in body.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(err(i + 1, format!("expected `key = value`, got `{line}`")));
            };
            let (key, value) = (key.trim(), value.trim());
            let parse_usize = |v: &str| {
                v.parse::<usize>()
                    .map_err(|e| err(i + 1, format!("{key}: {e}")))
            };
            match key {
                "mode" => {
                    cfg.mode = match value {
                        "simple" => GraphMode::Simple,
                        "weighted" => GraphMode::Weighted,
                        other => {
                            return Err(err(i + 1, format!("unknown mode `{other}`")));
                        }
                    }
                }
                "top_k" => cfg.top_k = parse_usize(value)?,
                "max_hops" => cfg.max_hops = parse_usize(value)?,
                "max_paths_per_node" => cfg.max_paths_per_node = parse_usize(value)?,
                "contextual_degree_cap" => cfg.contextual_degree_cap = parse_usize(value)?,
                "min_linked_passages" => cfg.min_linked_passages = parse_usize(value)?,
                "index" => {
                    cfg.index_kind = match value {
                        "sparse" => IndexKind::Sparse,
                        "dense" => IndexKind::Dense,
                        other => {
                            return Err(err(i + 1, format!("unknown index kind `{other}`")));
                        }
                    }
                }
                "recall_ks" => {
                    let ks: Result<Vec<usize>, _> =
                        value.split(',').map(|v| v.trim().parse::<usize>()).collect();
                    cfg.recall_ks = ks.map_err(|e| err(i + 1, format!("recall_ks: {e}")))?;
                }
                "timeout_ms" => {
                    cfg.endpoints.timeout =
                        Duration::from_millis(parse_usize(value)? as u64)
                }
                "retries" => cfg.endpoints.retries = parse_usize(value)? as u32,
                "scorer_url" => cfg.endpoints.scorer_url = Some(value.to_string()),
                "generator_url" => cfg.endpoints.generator_url = Some(value.to_string()),
                "embedder_url" => cfg.endpoints.embedder_url = Some(value.to_string()),
                "bearer_token" => cfg.endpoints.bearer_token = Some(value.to_string()),
                "batch_size" => cfg.endpoints.batch_size = parse_usize(value)?,
                "stopwords" => cfg.stopwords_path = Some(PathBuf::from(value)),
                other => {
                    return Err(err(i + 1, format!("unknown key `{other}`")));
                }
            }
        }
        Ok(cfg)
    }

    pub fn graph_options(&self) -> GraphOptions {
        GraphOptions {
            mode: self.mode,
            contextual_degree_cap: self.contextual_degree_cap,
        }
    }

    pub fn search_options(&self) -> SearchOptions {
        SearchOptions {
            max_hops: self.max_hops,
            max_paths_per_node: self.max_paths_per_node,
        }
    }

    pub fn lexicon(&self) -> Result<Lexicon, io::Error> {
        match &self.stopwords_path {
            Some(p) => Lexicon::from_file(p),
            None => Ok(Lexicon::default()),
        }
    }
}

/// A node of the selected chain as written to the predictions file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionNode {
    pub kind: NodeKind,
    pub content: String,
    pub origin: NodeOrigin,
}

/// One prediction line: `{question_id, prediction, chain, flags, margin}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Prediction {
    pub question_id: String,
    pub prediction: String,
    pub chain: Vec<PredictionNode>,
    pub flags: Vec<String>,
    /// Confidence gap between the best and second-best chain.
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineFailure {
    pub question_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub predictions: Vec<Prediction>,
    pub report: EvalReport,
    pub failures: Vec<PipelineFailure>,
}

/// Run retrieval → graph → chain selection → terminal-node answer for every
/// question. Deterministic for a fixed corpus and config (with fallback
/// services or deterministic endpoints).
pub fn run_pipeline(
    qa_set: &[QAInstance],
    corpus: &Corpus,
    config: &PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let lexicon = config.lexicon()?;
    let gateway = ModelGateway::new(
        config.endpoints.clone().with_env_overrides(),
        lexicon.clone(),
    );
    let blocks = build_fused_blocks(corpus, config.min_linked_passages);
    let graph_opts = config.graph_options();
    let search_opts = config.search_options();

    let index = if blocks.is_empty() {
        None
    } else {
        Some(build_index(&blocks, corpus, config.index_kind, &gateway)?)
    };

    let mut predictions = Vec::with_capacity(qa_set.len());
    let mut failures = Vec::new();
    let mut skipped = 0usize;
    let mut em_sum = 0f64;
    let mut f1_sum = 0f64;
    let mut evaluated = 0usize;
    let mut recall_hits: BTreeMap<usize, usize> =
        config.recall_ks.iter().map(|&k| (k, 0)).collect();

    for qa in qa_set {
        let mut flags = Vec::new();
        let empty_prediction = |flags: Vec<String>| Prediction {
            question_id: qa.question_id.clone(),
            prediction: String::new(),
            chain: Vec::new(),
            flags,
            margin: 0.0,
        };

        let Some(index) = &index else {
            skipped += 1;
            predictions.push(empty_prediction(vec!["empty-retrieval".into()]));
            continue;
        };
        let result = retrieve(index, &qa.question_text, config.top_k, &gateway)?;
        if result.ranked.is_empty() {
            skipped += 1;
            predictions.push(empty_prediction(vec!["empty-retrieval".into()]));
            continue;
        }
        let retrieved: Vec<_> = result
            .ranked
            .iter()
            .filter_map(|(bid, _)| blocks.get(bid))
            .collect();
        let graph = match HybridGraph::build(
            &qa.question_text,
            &retrieved,
            corpus,
            &lexicon,
            &graph_opts,
        ) {
            Ok(g) => g,
            Err(e) => {
                skipped += 1;
                failures.push(PipelineFailure {
                    question_id: qa.question_id.clone(),
                    reason: e.to_string(),
                });
                predictions.push(empty_prediction(vec!["graph-error".into()]));
                continue;
            }
        };
        let candidates = enumerate_candidates(&graph, &search_opts);
        if candidates.chains.is_empty() {
            skipped += 1;
            predictions.push(empty_prediction(vec!["no-candidates".into()]));
            continue;
        }
        let selection = match select_chain(
            &qa.question_id,
            &qa.question_text,
            &candidates,
            &graph,
            &gateway,
            Some(&qa.answer_text),
        ) {
            Ok(s) => s,
            Err(e) => {
                skipped += 1;
                failures.push(PipelineFailure {
                    question_id: qa.question_id.clone(),
                    reason: e.to_string(),
                });
                predictions.push(empty_prediction(vec!["scorer-error".into()]));
                continue;
            }
        };

        let best = selection.best();
        let terminal = graph.node(*best.node_ids.last().expect("chains are non-empty"));
        let prediction_text = match terminal.kind {
            NodeKind::Sentence => {
                flags.push("sentence-answer".to_string());
                terminal.content.clone()
            }
            _ => terminal.content.clone(),
        };
        let chain_nodes: Vec<PredictionNode> = best
            .node_ids
            .iter()
            .map(|&id| {
                let n = graph.node(id);
                PredictionNode {
                    kind: n.kind,
                    content: n.content.clone(),
                    origin: n.origin.clone(),
                }
            })
            .collect();

        evaluated += 1;
        em_sum += f64::from(exact_match(&prediction_text, &qa.answer_text));
        f1_sum += token_f1(&prediction_text, &qa.answer_text);
        for (&k, hits) in recall_hits.iter_mut() {
            let hit = selection.ranked.iter().take(k).any(|c| {
                c.node_ids
                    .iter()
                    .any(|&id| contains_answer(graph.node(id), &qa.answer_text))
            });
            if hit {
                *hits += 1;
            }
        }

        predictions.push(Prediction {
            question_id: qa.question_id.clone(),
            prediction: prediction_text,
            chain: chain_nodes,
            flags,
            margin: selection.margin(),
        });
    }

    let report = EvalReport {
        recall_at: recall_hits
            .into_iter()
            .map(|(k, hits)| {
                let denom = evaluated.max(1);
                (k, hits as f64 / denom as f64)
            })
            .collect(),
        em: em_sum / evaluated.max(1) as f64,
        f1: f1_sum / evaluated.max(1) as f64,
        evaluated,
        skipped,
    };
    Ok(PipelineOutcome {
        predictions,
        report,
        failures,
    })
}
