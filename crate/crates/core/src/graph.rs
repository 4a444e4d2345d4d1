//! Fine-grained heterogeneous graph over a question and one or more fused
//! blocks.
//!
//! Nodes are the question, the cells of each block's row, and the sentences
//! of linked passages. Structural edges connect same-row cell pairs and each
//! cell to the sentences of its linked passages; contextual edges connect any
//! two nodes whose keyword sets overlap. The question attaches only
//! contextually.

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, FusedBlock};
use crate::text::{cell_contains, overlap_ratio, sentence_contains, KeywordSet, Lexicon};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("question must be non-empty")]
    EmptyQuestion,
    #[error("at least one fused block is required")]
    NoBlocks,
    #[error("invalid node {node_id}: {message}")]
    InvalidNode { node_id: usize, message: String },
    #[error("invalid edge ({a},{b}): {message}")]
    InvalidEdge { a: usize, b: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Question,
    Cell,
    Sentence,
}

/// Where a node came from; consistent with its kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeOrigin {
    Question,
    Cell {
        block_id: String,
        col_index: usize,
        column_name: String,
    },
    Sentence {
        passage_id: String,
        sentence_index: usize,
    },
}

#[derive(Debug, Clone)]
pub struct GraphNode {
    pub node_id: usize,
    pub kind: NodeKind,
    pub content: String,
    pub origin: NodeOrigin,
    pub keywords: KeywordSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Structural,
    Contextual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphMode {
    Simple,
    Weighted,
}

/// Undirected edge; endpoints stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct GraphOptions {
    pub mode: GraphMode,
    /// Per-node cap on contextual degree; pathological keyword sharing would
    /// otherwise make the graph quadratic. Highest overlap kept first.
    pub contextual_degree_cap: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            mode: GraphMode::Weighted,
            contextual_degree_cap: 32,
        }
    }
}

/// Edge weight under the given mode: 1.0 in Simple mode, and
/// `1 - 0.5 * overlap_ratio` in Weighted mode so highly related pairs cost
/// less while every weight stays in [0.5, 1.0]. Applies to both edge kinds.
pub fn edge_weight(a: &GraphNode, b: &GraphNode, _kind: EdgeKind, mode: GraphMode) -> f64 {
    match mode {
        GraphMode::Simple => 1.0,
        GraphMode::Weighted => 1.0 - 0.5 * overlap_ratio(&a.keywords, &b.keywords),
    }
}

/// Whether a node's content contains the answer. Cells match on normalized
/// equality or a whole-token subsequence; sentences on a whole-token
/// subsequence; the question node never matches.
pub fn contains_answer(node: &GraphNode, answer_text: &str) -> bool {
    match node.kind {
        NodeKind::Question => false,
        NodeKind::Cell => cell_contains(&node.content, answer_text),
        NodeKind::Sentence => sentence_contains(&node.content, answer_text),
    }
}

#[derive(Debug, Clone)]
pub struct HybridGraph {
    nodes: Vec<GraphNode>,
    edges: Vec<GraphEdge>,
    adjacency: Vec<Vec<(usize, f64)>>,
    mode: GraphMode,
    contextual_cap_applied: bool,
}

impl HybridGraph {
    /// Build the graph for a question over fused blocks. Node numbering is
    /// deterministic: question = 0, then blocks in order, cells by column,
    /// sentences by (link order, sentence index). Sentence nodes are shared
    /// when two links reference the same passage.
    pub fn build(
        question: &str,
        blocks: &[&FusedBlock],
        corpus: &Corpus,
        lexicon: &Lexicon,
        opts: &GraphOptions,
    ) -> Result<HybridGraph, GraphError> {
        if question.trim().is_empty() {
            return Err(GraphError::EmptyQuestion);
        }
        if blocks.is_empty() {
            return Err(GraphError::NoBlocks);
        }

        let mut nodes = vec![GraphNode {
            node_id: 0,
            kind: NodeKind::Question,
            content: question.to_string(),
            origin: NodeOrigin::Question,
            keywords: lexicon.extract_keywords(question),
        }];
        let mut sentence_ids: HashMap<(String, usize), usize> = HashMap::new();
        // Per block: cell node ids by col, and per-cell sentence node ids.
        let mut structural: Vec<(usize, usize)> = Vec::new();

        for block in blocks {
            let mut cell_ids: Vec<(usize, usize)> = Vec::new(); // (col, node_id)
            for cell in &block.cells {
                if cell.content.trim().is_empty() {
                    continue; // empty cells carry no content and form no node
                }
                let id = nodes.len();
                nodes.push(GraphNode {
                    node_id: id,
                    kind: NodeKind::Cell,
                    content: cell.content.clone(),
                    origin: NodeOrigin::Cell {
                        block_id: block.block_id.clone(),
                        col_index: cell.col_index,
                        column_name: cell.column_name.clone(),
                    },
                    keywords: lexicon.extract_keywords(&cell.content),
                });
                cell_ids.push((cell.col_index, id));
            }
            // Same-row cell pairs.
            for i in 0..cell_ids.len() {
                for j in i + 1..cell_ids.len() {
                    structural.push((cell_ids[i].1, cell_ids[j].1));
                }
            }
            // Each cell to every sentence of its linked passages.
            for link in &block.linked_passages {
                let Some(passage) = corpus.passage(&link.passage_id) else {
                    continue;
                };
                let Some(&(_, cell_node)) =
                    cell_ids.iter().find(|(col, _)| *col == link.col_index)
                else {
                    continue; // linked cell was empty, no anchor node
                };
                for (si, sentence) in passage.sentences().iter().enumerate() {
                    let key = (link.passage_id.clone(), si);
                    let id = *sentence_ids.entry(key).or_insert_with(|| {
                        let id = nodes.len();
                        nodes.push(GraphNode {
                            node_id: id,
                            kind: NodeKind::Sentence,
                            content: sentence.clone(),
                            origin: NodeOrigin::Sentence {
                                passage_id: link.passage_id.clone(),
                                sentence_index: si,
                            },
                            keywords: lexicon.extract_keywords(sentence),
                        });
                        id
                    });
                    structural.push((cell_node, id));
                }
            }
        }

        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (a, b) in structural {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if a == b || !seen.insert((a, b)) {
                continue;
            }
            let w = edge_weight(&nodes[a], &nodes[b], EdgeKind::Structural, opts.mode);
            edges.push(GraphEdge {
                a,
                b,
                kind: EdgeKind::Structural,
                weight: w,
            });
        }

        // Contextual candidates: any pair sharing a keyword/entity/numeric.
        let n = nodes.len();
        let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
        for a in 0..n {
            if nodes[a].keywords.is_empty() {
                continue;
            }
            for b in a + 1..n {
                if nodes[a].keywords.shares_any(&nodes[b].keywords) {
                    candidates.push((a, b, overlap_ratio(&nodes[a].keywords, &nodes[b].keywords)));
                }
            }
        }
        let (kept, cap_applied) = apply_degree_cap(&candidates, n, opts.contextual_degree_cap);
        for &(a, b, _) in &candidates {
            if !kept.contains(&(a, b)) {
                continue;
            }
            let w = edge_weight(&nodes[a], &nodes[b], EdgeKind::Contextual, opts.mode);
            edges.push(GraphEdge {
                a,
                b,
                kind: EdgeKind::Contextual,
                weight: w,
            });
        }
        edges.sort_by(|x, y| (x.a, x.b, x.kind).cmp(&(y.a, y.b, y.kind)));

        Ok(HybridGraph::assemble(nodes, edges, opts.mode, cap_applied))
    }

    /// Assemble a graph from explicit parts, validating the node and edge
    /// invariants. This is the reload path for dumped graphs and the entry
    /// point for synthetic graphs in tests. Weights must lie in
    /// (1e-6, 1.0]; smaller weights would defeat the cost-equality
    /// tolerance used by shortest-path search.
    pub fn from_parts(
        node_specs: Vec<(NodeKind, String, NodeOrigin)>,
        edge_specs: Vec<(usize, usize, EdgeKind, f64)>,
        mode: GraphMode,
        lexicon: &Lexicon,
    ) -> Result<HybridGraph, GraphError> {
        let mut nodes = Vec::with_capacity(node_specs.len());
        for (i, (kind, content, origin)) in node_specs.into_iter().enumerate() {
            if content.trim().is_empty() {
                return Err(GraphError::InvalidNode {
                    node_id: i,
                    message: "content must be non-empty".into(),
                });
            }
            let is_question = matches!(kind, NodeKind::Question);
            if is_question != (i == 0) {
                return Err(GraphError::InvalidNode {
                    node_id: i,
                    message: "exactly one question node, at id 0".into(),
                });
            }
            let keywords = lexicon.extract_keywords(&content);
            nodes.push(GraphNode {
                node_id: i,
                kind,
                content,
                origin,
                keywords,
            });
        }
        if nodes.is_empty() {
            return Err(GraphError::InvalidNode {
                node_id: 0,
                message: "graph needs a question node".into(),
            });
        }
        let mut edges = Vec::new();
        let mut seen = HashSet::new();
        for (a, b, kind, weight) in edge_specs {
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            if a == b {
                return Err(GraphError::InvalidEdge {
                    a,
                    b,
                    message: "self-loop".into(),
                });
            }
            if b >= nodes.len() {
                return Err(GraphError::InvalidEdge {
                    a,
                    b,
                    message: "endpoint out of range".into(),
                });
            }
            if !(weight > 1e-6 && weight <= 1.0) {
                return Err(GraphError::InvalidEdge {
                    a,
                    b,
                    message: format!("weight {weight} outside (1e-6, 1.0]"),
                });
            }
            if !seen.insert((a, b, kind)) {
                return Err(GraphError::InvalidEdge {
                    a,
                    b,
                    message: "duplicate edge for (pair, kind)".into(),
                });
            }
            edges.push(GraphEdge { a, b, kind, weight });
        }
        edges.sort_by(|x, y| (x.a, x.b, x.kind).cmp(&(y.a, y.b, y.kind)));
        Ok(HybridGraph::assemble(nodes, edges, mode, false))
    }

    fn assemble(
        nodes: Vec<GraphNode>,
        edges: Vec<GraphEdge>,
        mode: GraphMode,
        contextual_cap_applied: bool,
    ) -> HybridGraph {
        let mut adjacency: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nodes.len()];
        for e in &edges {
            adjacency[e.a].push((e.b, e.weight));
            adjacency[e.b].push((e.a, e.weight));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_by(|x, y| x.0.cmp(&y.0));
            // Parallel structural/contextual edges share the weight formula;
            // traversal needs each neighbor once.
            nbrs.dedup_by_key(|p| p.0);
        }
        HybridGraph {
            nodes,
            edges,
            adjacency,
            mode,
            contextual_cap_applied,
        }
    }

    pub fn nodes(&self) -> &[GraphNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &GraphNode {
        &self.nodes[id]
    }

    pub fn question(&self) -> &GraphNode {
        &self.nodes[0]
    }

    pub fn edges(&self) -> &[GraphEdge] {
        &self.edges
    }

    pub fn neighbors(&self, id: usize) -> &[(usize, f64)] {
        &self.adjacency[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn mode(&self) -> GraphMode {
        self.mode
    }

    /// True when the contextual-degree cap dropped at least one candidate
    /// edge; surfaced in dump metadata.
    pub fn contextual_cap_applied(&self) -> bool {
        self.contextual_cap_applied
    }

    /// Node ids whose content contains the answer.
    pub fn answer_nodes(&self, answer_text: &str) -> Vec<usize> {
        self.nodes
            .iter()
            .filter(|n| contains_answer(n, answer_text))
            .map(|n| n.node_id)
            .collect()
    }
}

/// Keep, per node, the `cap` highest-overlap contextual partners (ties to the
/// lower node id); an edge survives only if both endpoints keep it.
fn apply_degree_cap(
    candidates: &[(usize, usize, f64)],
    n_nodes: usize,
    cap: usize,
) -> (HashSet<(usize, usize)>, bool) {
    let mut per_node: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_nodes];
    for &(a, b, ratio) in candidates {
        per_node[a].push((b, ratio));
        per_node[b].push((a, ratio));
    }
    let mut cap_applied = false;
    let mut keep: Vec<BTreeSet<usize>> = Vec::with_capacity(n_nodes);
    for partners in per_node.iter_mut() {
        partners.sort_by(|x, y| {
            y.1.partial_cmp(&x.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(x.0.cmp(&y.0))
        });
        if partners.len() > cap {
            cap_applied = true;
        }
        keep.push(partners.iter().take(cap).map(|p| p.0).collect());
    }
    let kept = candidates
        .iter()
        .filter(|(a, b, _)| keep[*a].contains(b) && keep[*b].contains(a))
        .map(|&(a, b, _)| (a, b))
        .collect();
    (kept, cap_applied)
}

/// Line records for the debug graph dump.
#[derive(Debug, Serialize, Deserialize)]
pub struct NodeRecord {
    pub node_id: usize,
    pub kind: NodeKind,
    pub content: String,
    pub origin: NodeOrigin,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: usize,
    pub b: usize,
    pub kind: EdgeKind,
    pub weight: f64,
}

pub fn node_records(graph: &HybridGraph) -> Vec<NodeRecord> {
    graph
        .nodes()
        .iter()
        .map(|n| NodeRecord {
            node_id: n.node_id,
            kind: n.kind,
            content: n.content.clone(),
            origin: n.origin.clone(),
        })
        .collect()
}

pub fn edge_records(graph: &HybridGraph) -> Vec<EdgeRecord> {
    graph
        .edges()
        .iter()
        .map(|e| EdgeRecord {
            a: e.a,
            b: e.b,
            kind: e.kind,
            weight: e.weight,
        })
        .collect()
}
