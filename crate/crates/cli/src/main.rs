//! Command-line surface: each stage reads and writes line-delimited JSON so
//! stages compose through files.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use chainqa_core::chain::{
    emit_training_instances, enumerate_candidates, negative_chain, oracle_chain, verbalize_chain,
    NegativeStrategy, SearchOptions,
};
use chainqa_core::corpus::{
    build_fused_blocks, dump_corpus, load_corpus, load_qa, verbalize_fused_block, Corpus,
    FusedBlockSet, QAInstance,
};
use chainqa_core::eval::{exact_match, token_f1, EvalReport};
use chainqa_core::gateway::{EndpointConfig, ModelGateway};
use chainqa_core::graph::{edge_records, node_records, GraphMode, GraphOptions, HybridGraph};
use chainqa_core::pipeline::{run_pipeline, PipelineConfig};
use chainqa_core::pretrain::{build_pretrain_corpus, HopRatioConfig};
use chainqa_core::retrieval::{
    block_recall, build_index, load_index, retrieve, save_index, table_recall, IndexKind,
    RetrievalResult,
};
use chainqa_core::text::Lexicon;

#[derive(Parser)]
#[command(
    name = "chainqa",
    version,
    about = "Hybrid table-and-text reasoning chains: corpus ingestion, graph and chain construction, training-data synthesis, retrieval, and evaluation"
)]
struct Cli {
    /// Override the built-in stopword list (plain text, one word per line).
    #[arg(long, global = true, value_name = "FILE")]
    stopwords: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CorpusArgs {
    /// Tables file: one JSON record per line.
    #[arg(long, value_name = "FILE")]
    tables: PathBuf,
    /// Passages file: one JSON record per line.
    #[arg(long, value_name = "FILE")]
    passages: PathBuf,
    /// Cell-passage links file: one JSON record per line.
    #[arg(long, value_name = "FILE")]
    links: PathBuf,
}

impl CorpusArgs {
    fn load(&self) -> Result<Corpus> {
        load_corpus(&self.tables, &self.passages, &self.links).context("loading corpus")
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Simple,
    Weighted,
}

impl From<ModeArg> for GraphMode {
    fn from(m: ModeArg) -> GraphMode {
        match m {
            ModeArg::Simple => GraphMode::Simple,
            ModeArg::Weighted => GraphMode::Weighted,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Sparse,
    Dense,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    InnerNeg,
    BmNeg,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a corpus; print summary statistics as JSON.
    Ingest {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Optional QA file to validate against the corpus.
        #[arg(long, value_name = "FILE")]
        qa: Option<PathBuf>,
        /// Re-dump the validated corpus in canonical form into a directory.
        #[arg(long, value_name = "DIR")]
        dump_dir: Option<PathBuf>,
    },
    /// Emit heuristic exact-title cell-passage links.
    Link {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Also copy the corpus's existing links into the output.
        #[arg(long)]
        include_existing: bool,
    },
    /// Build fused blocks (one per table row) and write them as JSON lines.
    Blocks {
        #[command(flatten)]
        corpus: CorpusArgs,
        /// Keep only rows with at least this many linked passages.
        #[arg(long, default_value_t = 0)]
        min_linked: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Include each block's flattened text form.
        #[arg(long)]
        verbalize: bool,
    },
    /// Dump the heterogeneous graph for a question over selected blocks.
    Graph {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        question: String,
        /// Block ids to include (repeatable); all blocks when omitted.
        #[arg(long = "block-id")]
        block_ids: Vec<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Weighted)]
        mode: ModeArg,
        #[arg(long, default_value_t = 32)]
        contextual_cap: usize,
        #[arg(long, value_name = "FILE")]
        out_nodes: PathBuf,
        #[arg(long, value_name = "FILE")]
        out_edges: PathBuf,
    },
    /// Enumerate candidate chains for a question over selected blocks.
    Chains {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        question: String,
        #[arg(long = "block-id")]
        block_ids: Vec<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Weighted)]
        mode: ModeArg,
        #[arg(long, default_value_t = 4)]
        max_hops: usize,
        #[arg(long, default_value_t = 64)]
        max_paths: usize,
        /// With an answer, also report the oracle and hard-negative chains.
        #[arg(long)]
        answer: Option<String>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Build extractor-training instances from QA supervision.
    MakeTrain {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_name = "FILE")]
        qa: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::InnerNeg)]
        strategy: StrategyArg,
        #[arg(long, default_value_t = 3)]
        negatives: usize,
        #[arg(long, value_enum, default_value_t = ModeArg::Weighted)]
        mode: ModeArg,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write per-question skip reasons here.
        #[arg(long, value_name = "FILE")]
        skips_out: Option<PathBuf>,
    },
    /// Synthesize the chain-centric pre-training corpus.
    SynthPretrain {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        target: usize,
        /// Hop-length ratios for 1..4 hops, comma-separated.
        #[arg(long, default_value = "0.1,0.25,0.35,0.3")]
        ratios: String,
        #[arg(long, default_value_t = 3)]
        negatives: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write the stats summary record here (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        stats_out: Option<PathBuf>,
    },
    /// Build and persist a block index.
    Index {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_enum, default_value_t = KindArg::Sparse)]
        kind: KindArg,
        #[arg(long, default_value_t = 0)]
        min_linked: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Retrieve top-k blocks for every question in a QA file.
    Retrieve {
        #[arg(long, value_name = "FILE")]
        index: PathBuf,
        #[arg(long, value_name = "FILE")]
        qa: PathBuf,
        #[arg(long, default_value_t = 15)]
        k: usize,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
    },
    /// Score candidate chains (from `chains`) for one question.
    Select {
        #[arg(long)]
        question: String,
        /// Candidate chains file produced by the `chains` subcommand.
        #[arg(long, value_name = "FILE")]
        chains: PathBuf,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Compute answer metrics from predictions and/or retrieval results.
    Eval {
        #[arg(long, value_name = "FILE")]
        qa: PathBuf,
        /// Predictions file from `pipeline`.
        #[arg(long, value_name = "FILE")]
        predictions: Option<PathBuf>,
        /// Retrieval results file from `retrieve`.
        #[arg(long, value_name = "FILE")]
        retrieval: Option<PathBuf>,
        /// Corpus files, required for block recall with --retrieval.
        #[arg(long, value_name = "FILE")]
        tables: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        passages: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        links: Option<PathBuf>,
        /// Recall cutoffs, comma-separated.
        #[arg(long, default_value = "1,10,100")]
        k_list: String,
    },
    /// Run retrieval, graph construction, chain selection and answer
    /// prediction end to end.
    Pipeline {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long, value_name = "FILE")]
        qa: PathBuf,
        /// Declarative `key = value` config file.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        out: PathBuf,
        /// Write the evaluation report here (stdout when omitted).
        #[arg(long, value_name = "FILE")]
        report_out: Option<PathBuf>,
    },
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    );
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .with_context(|| format!("{}:{}", path.display(), i + 1))?;
        out.push(record);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(items: &[T], path: &Path) -> Result<()> {
    let mut w = BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    );
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

fn lexicon_for(stopwords: &Option<PathBuf>) -> Result<Lexicon> {
    match stopwords {
        Some(p) => Lexicon::from_file(p).with_context(|| format!("reading {}", p.display())),
        None => Ok(Lexicon::default()),
    }
}

fn env_gateway(lexicon: Lexicon) -> ModelGateway {
    ModelGateway::new(EndpointConfig::default().with_env_overrides(), lexicon)
}

fn select_blocks<'a>(
    blocks: &'a FusedBlockSet,
    block_ids: &[String],
) -> Result<Vec<&'a chainqa_core::corpus::FusedBlock>> {
    if block_ids.is_empty() {
        return Ok(blocks.iter().collect());
    }
    block_ids
        .iter()
        .map(|id| {
            blocks
                .get(id)
                .with_context(|| format!("unknown block id `{id}`"))
        })
        .collect()
}

#[derive(Serialize)]
struct ChainLine {
    terminal: usize,
    node_ids: Vec<usize>,
    hop_count: usize,
    total_cost: f64,
    text: String,
}

#[derive(Deserialize)]
struct ChainLineIn {
    text: String,
}

#[derive(Serialize)]
struct RetrieveLine {
    question_id: String,
    ranked: Vec<RankedBlock>,
}

#[derive(Serialize)]
struct RankedBlock {
    block_id: String,
    score: f64,
}

#[derive(Deserialize)]
struct RetrieveLineIn {
    question_id: String,
    ranked: Vec<RankedBlockIn>,
}

#[derive(Deserialize)]
struct RankedBlockIn {
    block_id: String,
    score: f64,
}

#[derive(Deserialize)]
struct PredictionIn {
    question_id: String,
    prediction: String,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let lexicon = lexicon_for(&cli.stopwords)?;
    match cli.command {
        Command::Ingest {
            corpus,
            qa,
            dump_dir,
        } => {
            let loaded = corpus.load()?;
            let qa_count = match &qa {
                Some(path) => Some(load_qa(path, &loaded)?.len()),
                None => None,
            };
            let blocks = build_fused_blocks(&loaded, 0);
            let rows: usize = loaded.tables().iter().map(|t| t.rows.len()).sum();
            if let Some(dir) = dump_dir {
                std::fs::create_dir_all(&dir)?;
                dump_corpus(
                    &loaded,
                    &dir.join("tables.jsonl"),
                    &dir.join("passages.jsonl"),
                    &dir.join("links.jsonl"),
                )?;
            }
            let summary = serde_json::json!({
                "tables": loaded.tables().len(),
                "passages": loaded.passages().len(),
                "links": loaded.links().len(),
                "rows": rows,
                "blocks": blocks.len(),
                "qa": qa_count,
            });
            println!("{summary}");
        }
        Command::Link {
            corpus,
            out,
            include_existing,
        } => {
            let loaded = corpus.load()?;
            let mut links = Vec::new();
            if include_existing {
                links.extend(loaded.links().iter().cloned());
            }
            let new_links = loaded.heuristic_links();
            eprintln!("discovered {} new link(s)", new_links.len());
            links.extend(new_links);
            write_jsonl(&links, &out)?;
        }
        Command::Blocks {
            corpus,
            min_linked,
            out,
            verbalize,
        } => {
            let loaded = corpus.load()?;
            let blocks = build_fused_blocks(&loaded, min_linked);
            if verbalize {
                #[derive(Serialize)]
                struct BlockLine<'a> {
                    #[serde(flatten)]
                    block: &'a chainqa_core::corpus::FusedBlock,
                    text: String,
                }
                let lines: Vec<BlockLine> = blocks
                    .iter()
                    .map(|b| BlockLine {
                        block: b,
                        text: verbalize_fused_block(b, &loaded),
                    })
                    .collect();
                write_jsonl(&lines, &out)?;
            } else {
                let lines: Vec<_> = blocks.iter().collect();
                write_jsonl(&lines, &out)?;
            }
            eprintln!("wrote {} block(s)", blocks.len());
        }
        Command::Graph {
            corpus,
            question,
            block_ids,
            mode,
            contextual_cap,
            out_nodes,
            out_edges,
        } => {
            let loaded = corpus.load()?;
            let blocks = build_fused_blocks(&loaded, 0);
            let selected = select_blocks(&blocks, &block_ids)?;
            let opts = GraphOptions {
                mode: mode.into(),
                contextual_degree_cap: contextual_cap,
            };
            let graph = HybridGraph::build(&question, &selected, &loaded, &lexicon, &opts)?;
            write_jsonl(&node_records(&graph), &out_nodes)?;
            write_jsonl(&edge_records(&graph), &out_edges)?;
            eprintln!(
                "graph: {} nodes, {} edges{}",
                graph.len(),
                graph.edges().len(),
                if graph.contextual_cap_applied() {
                    " (contextual degree cap applied)"
                } else {
                    ""
                }
            );
        }
        Command::Chains {
            corpus,
            question,
            block_ids,
            mode,
            max_hops,
            max_paths,
            answer,
            out,
        } => {
            let loaded = corpus.load()?;
            let blocks = build_fused_blocks(&loaded, 0);
            let selected = select_blocks(&blocks, &block_ids)?;
            let opts = GraphOptions {
                mode: mode.into(),
                ..GraphOptions::default()
            };
            let graph = HybridGraph::build(&question, &selected, &loaded, &lexicon, &opts)?;
            let search = SearchOptions {
                max_hops,
                max_paths_per_node: max_paths,
            };
            let set = enumerate_candidates(&graph, &search);
            let lines: Vec<ChainLine> = set
                .chains
                .iter()
                .map(|c| ChainLine {
                    terminal: c.terminal(),
                    node_ids: c.node_ids.clone(),
                    hop_count: c.hop_count,
                    total_cost: c.total_cost,
                    text: verbalize_chain(c, &graph, false),
                })
                .collect();
            write_jsonl(&lines, &out)?;
            eprintln!(
                "{} candidate chain(s), truncated = {}",
                set.chains.len(),
                set.truncated
            );
            if let Some(answer) = answer {
                match oracle_chain(&graph, &answer, &lexicon, &search) {
                    Some(c) => eprintln!("oracle: {}", verbalize_chain(&c, &graph, false)),
                    None => eprintln!("oracle: none (answer unreachable)"),
                }
                match negative_chain(&graph, &answer, &lexicon, &search) {
                    Some(c) => eprintln!("negative: {}", verbalize_chain(&c, &graph, false)),
                    None => eprintln!("negative: none"),
                }
            }
        }
        Command::MakeTrain {
            corpus,
            qa,
            strategy,
            negatives,
            mode,
            out,
            skips_out,
        } => {
            let loaded = corpus.load()?;
            let qa_set = load_qa(&qa, &loaded)?;
            let blocks = build_fused_blocks(&loaded, 0);
            let strategy = match strategy {
                StrategyArg::InnerNeg => NegativeStrategy::InnerNeg,
                StrategyArg::BmNeg => NegativeStrategy::BMNeg,
            };
            let opts = GraphOptions {
                mode: mode.into(),
                ..GraphOptions::default()
            };
            let build = emit_training_instances(
                &qa_set,
                &loaded,
                &blocks,
                &lexicon,
                strategy,
                negatives,
                &opts,
                &SearchOptions::default(),
            );
            write_jsonl(&build.instances, &out)?;
            eprintln!(
                "{} instance(s), {} skipped",
                build.instances.len(),
                build.skipped.len()
            );
            if let Some(path) = skips_out {
                write_jsonl(&build.skipped, &path)?;
            }
        }
        Command::SynthPretrain {
            corpus,
            target,
            ratios,
            negatives,
            seed,
            out,
            stats_out,
        } => {
            let loaded = corpus.load()?;
            let parsed: Vec<f64> = ratios
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .context("parsing --ratios")?;
            if parsed.len() != 4 {
                bail!("--ratios needs exactly four values (1..4 hops)");
            }
            let ratio_config = HopRatioConfig::new([parsed[0], parsed[1], parsed[2], parsed[3]])?;
            let gateway = env_gateway(lexicon.clone());
            let stats = build_pretrain_corpus(
                &loaded,
                &ratio_config,
                target,
                negatives,
                seed,
                &gateway,
                &lexicon,
                &out,
            )?;
            let stats_json = serde_json::to_string(&stats)?;
            match stats_out {
                Some(path) => std::fs::write(path, format!("{stats_json}\n"))?,
                None => println!("{stats_json}"),
            }
        }
        Command::Index {
            corpus,
            kind,
            min_linked,
            out,
        } => {
            let loaded = corpus.load()?;
            let blocks = build_fused_blocks(&loaded, min_linked);
            let kind = match kind {
                KindArg::Sparse => IndexKind::Sparse,
                KindArg::Dense => IndexKind::Dense,
            };
            let gateway = env_gateway(lexicon);
            let index = build_index(&blocks, &loaded, kind, &gateway)?;
            save_index(&index, &out)?;
            eprintln!("indexed {} block(s)", index.len());
        }
        Command::Retrieve { index, qa, k, out } => {
            let index = load_index(&index)?;
            let qa_set: Vec<QAInstance> = read_jsonl(&qa)?;
            let gateway = env_gateway(lexicon);
            let mut lines = Vec::with_capacity(qa_set.len());
            for q in &qa_set {
                let result = retrieve(&index, &q.question_text, k, &gateway)?;
                lines.push(RetrieveLine {
                    question_id: q.question_id.clone(),
                    ranked: result
                        .ranked
                        .into_iter()
                        .map(|(block_id, score)| RankedBlock { block_id, score })
                        .collect(),
                });
            }
            write_jsonl(&lines, &out)?;
        }
        Command::Select {
            question,
            chains,
            out,
        } => {
            let candidates: Vec<ChainLineIn> = read_jsonl(&chains)?;
            if candidates.is_empty() {
                bail!("no candidate chains in input");
            }
            let texts: Vec<String> = candidates.into_iter().map(|c| c.text).collect();
            let gateway = env_gateway(lexicon);
            let scored = gateway.score_chains(&question, &texts)?;
            let mut order: Vec<usize> = (0..scored.len()).collect();
            order.sort_by(|&a, &b| {
                scored[b]
                    .score
                    .partial_cmp(&scored[a].score)
                    .unwrap_or(std::cmp::Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let result = serde_json::json!({
                "question": question,
                "best_index": order[0],
                "ranked": order
                    .iter()
                    .map(|&i| serde_json::json!({
                        "index": i,
                        "score": scored[i].score,
                        "text": scored[i].chain,
                    }))
                    .collect::<Vec<_>>(),
            });
            match out {
                Some(path) => std::fs::write(path, format!("{result}\n"))?,
                None => println!("{result}"),
            }
        }
        Command::Eval {
            qa,
            predictions,
            retrieval,
            tables,
            passages,
            links,
            k_list,
        } => {
            let ks: Vec<usize> = k_list
                .split(',')
                .map(|v| v.trim().parse::<usize>())
                .collect::<Result<_, _>>()
                .context("parsing --k-list")?;
            let qa_set: Vec<QAInstance> = read_jsonl(&qa)?;
            let by_id: HashMap<&str, &QAInstance> = qa_set
                .iter()
                .map(|q| (q.question_id.as_str(), q))
                .collect();
            let mut output = serde_json::Map::new();

            if let Some(path) = predictions {
                let preds: Vec<PredictionIn> = read_jsonl(&path)?;
                let mut em_sum = 0.0;
                let mut f1_sum = 0.0;
                let mut n = 0usize;
                for p in &preds {
                    let Some(q) = by_id.get(p.question_id.as_str()) else {
                        continue;
                    };
                    em_sum += f64::from(exact_match(&p.prediction, &q.answer_text));
                    f1_sum += token_f1(&p.prediction, &q.answer_text);
                    n += 1;
                }
                output.insert(
                    "answers".into(),
                    serde_json::json!({
                        "evaluated": n,
                        "em": em_sum / n.max(1) as f64,
                        "f1": f1_sum / n.max(1) as f64,
                    }),
                );
            }

            if let Some(path) = retrieval {
                let lines: Vec<RetrieveLineIn> = read_jsonl(&path)?;
                let mut results = Vec::new();
                let mut golds = Vec::new();
                let mut answers = Vec::new();
                for line in &lines {
                    let Some(q) = by_id.get(line.question_id.as_str()) else {
                        continue;
                    };
                    let Some(gold) = &q.gold_table_id else {
                        continue;
                    };
                    results.push(RetrievalResult {
                        ranked: line
                            .ranked
                            .iter()
                            .map(|r| (r.block_id.clone(), r.score))
                            .collect(),
                    });
                    golds.push(gold.clone());
                    answers.push(q.answer_text.clone());
                }
                let mut table_at = serde_json::Map::new();
                for &k in &ks {
                    table_at.insert(k.to_string(), table_recall(&results, &golds, k).into());
                }
                let mut retrieval_out = serde_json::json!({
                    "questions_with_gold": results.len(),
                    "table_recall": table_at,
                });
                if let (Some(t), Some(p), Some(l)) = (&tables, &passages, &links) {
                    let corpus = load_corpus(t, p, l)?;
                    let blocks = build_fused_blocks(&corpus, 0);
                    let mut block_at = serde_json::Map::new();
                    for &k in &ks {
                        block_at.insert(
                            k.to_string(),
                            block_recall(&results, &golds, &answers, k, &blocks, &corpus).into(),
                        );
                    }
                    retrieval_out["block_recall"] = serde_json::Value::Object(block_at);
                }
                output.insert("retrieval".into(), retrieval_out);
            }

            if output.is_empty() {
                bail!("nothing to evaluate: pass --predictions and/or --retrieval");
            }
            println!("{}", serde_json::Value::Object(output));
        }
        Command::Pipeline {
            corpus,
            qa,
            config,
            out,
            report_out,
        } => {
            let loaded = corpus.load()?;
            let qa_set = load_qa(&qa, &loaded)?;
            let mut cfg = match config {
                Some(path) => PipelineConfig::from_file(&path)?,
                None => PipelineConfig::default(),
            };
            if cfg.stopwords_path.is_none() {
                cfg.stopwords_path = cli.stopwords.clone();
            }
            let outcome = run_pipeline(&qa_set, &loaded, &cfg)?;
            write_jsonl(&outcome.predictions, &out)?;
            for failure in &outcome.failures {
                eprintln!("{}: {}", failure.question_id, failure.reason);
            }
            let report: &EvalReport = &outcome.report;
            let report_json = serde_json::to_string(report)?;
            match report_out {
                Some(path) => std::fs::write(path, format!("{report_json}\n"))?,
                None => println!("{report_json}"),
            }
        }
    }
    Ok(())
}
