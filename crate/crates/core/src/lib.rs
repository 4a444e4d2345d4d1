//! Chain-centric reasoning over tables and text, without the neural parts.
//!
//! The library builds heterogeneous graphs over a question and fused
//! table/passage blocks, enumerates and ranks hybrid reasoning chains,
//! constructs extraction-training and pre-training corpora, retrieves fused
//! blocks, and evaluates retrieval and answer quality. Neural scoring,
//! generation, and embedding are delegated to external services behind
//! [`gateway::ModelGateway`], with deterministic lexical fallbacks so every
//! pipeline runs standalone.

pub mod chain;
pub mod corpus;
pub mod eval;
pub mod gateway;
pub mod graph;
pub mod pipeline;
pub mod pretrain;
pub mod retrieval;
pub mod synthetic;
pub mod text;

pub use chain::{
    enumerate_candidates, negative_chain, oracle_chain, verbalize_chain, ChainCandidateSet,
    HybridChain, NegativeStrategy, SearchOptions, TrainingInstance,
};
pub use corpus::{
    build_fused_blocks, load_corpus, load_qa, verbalize_fused_block, CellLink, Corpus,
    CorpusError, FusedBlock, FusedBlockSet, Passage, QAInstance, Table,
};
pub use eval::{chain_recall, exact_match, select_chain, token_f1, ChainSelection, EvalReport};
pub use gateway::{EndpointConfig, GatewayError, ModelGateway, ScoredChain};
pub use graph::{
    contains_answer, edge_weight, EdgeKind, GraphEdge, GraphMode, GraphNode, GraphOptions,
    HybridGraph, NodeKind, NodeOrigin,
};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, PipelineOutcome, Prediction};
pub use pretrain::{
    build_pretrain_corpus, synthesize_chain, HopRatioConfig, PretrainInstance, PretrainStats,
    SynthChain, SynthNode,
};
pub use retrieval::{
    block_recall, build_index, load_index, retrieve, save_index, table_recall, BlockIndex,
    Bm25Index, IndexError, IndexKind, RetrievalResult,
};
pub use text::{overlap_ratio, split_sentences, tokenize, KeywordSet, Lexicon, TokenSet};
