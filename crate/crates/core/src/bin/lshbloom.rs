//! Command-line front end: capacity planning, streaming deduplication,
//! index build/query, benchmark synthesis, F1 evaluation, and a scaling
//! bench harness.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (some records could
//! not be processed), 3 I/O error.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use lshbloom::baselines::ParagraphWeighting;
use lshbloom::index::{plan, LshBloomIndex};
use lshbloom::minhash::{minhash_signature, UniversalHashFamily};
use lshbloom::pipeline::{
    self, dedup_stream, evaluate, parse_record, synthesize_benchmark, DedupDecision, DedupEngine,
    Label, MethodConfig, MethodKind, StreamItem, Verdict,
};
use lshbloom::shingle::{shingle, Document, ShingleUnit};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "lshbloom", version, about = "Document deduplication with LSH over per-band Bloom filters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct RecordArgs {
    /// Field holding the document id in each input record.
    #[arg(long, default_value = "id")]
    id_field: String,
    /// Field holding the document text in each input record.
    #[arg(long, default_value = "text")]
    text_field: String,
}

#[derive(Args, Clone)]
struct MethodArgs {
    /// Deduplication method.
    #[arg(long, value_enum, default_value = "lshbloom")]
    method: MethodKind,
    /// Jaccard (LSH) or overlap (baseline) threshold T.
    #[arg(long, default_value_t = 0.8)]
    threshold: f64,
    /// MinHash permutations.
    #[arg(long, default_value_t = 128)]
    num_perm: usize,
    /// n-gram width for the ngram baseline.
    #[arg(long, default_value_t = 5)]
    ngram_size: usize,
    /// Effective FP rate (lshbloom) or per-filter FP rate (baselines);
    /// 0 selects the exact-set baseline state.
    #[arg(long, default_value_t = 1e-5)]
    fp_rate: f64,
    /// Expected documents (LSH) or items (baselines) for filter sizing.
    #[arg(long, default_value_t = 1_000_000)]
    expected_docs: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Shingle width for MinHash methods.
    #[arg(long, default_value_t = 3)]
    shingle_size: usize,
    /// Shingle unit: word or char.
    #[arg(long, default_value = "word")]
    shingle_unit: String,
    /// Paragraph-baseline weighting: chars or count.
    #[arg(long, default_value = "chars")]
    weighting: String,
    /// Worker threads for signature computation (0 = all cores;
    /// LSHBLOOM_WORKERS overrides the default).
    #[arg(long)]
    workers: Option<usize>,
}

impl MethodArgs {
    fn to_config(&self) -> Result<MethodConfig, CliError> {
        Ok(MethodConfig {
            method: self.method,
            threshold: self.threshold,
            num_perm: self.num_perm,
            ngram_n: self.ngram_size,
            fp_rate: self.fp_rate,
            expected_docs: self.expected_docs,
            seed: self.seed,
            shingle_n: self.shingle_size,
            shingle_unit: parse_unit(&self.shingle_unit)?,
            weighting: match self.weighting.as_str() {
                "chars" => ParagraphWeighting::Chars,
                "count" => ParagraphWeighting::Count,
                other => return Err(CliError::usage(format!("unknown weighting \"{other}\""))),
            },
        })
    }

    fn workers(&self) -> usize {
        self.workers.unwrap_or_else(pipeline::default_workers)
    }
}

fn parse_unit(s: &str) -> Result<ShingleUnit, CliError> {
    match s {
        "word" => Ok(ShingleUnit::Word),
        "char" => Ok(ShingleUnit::Char),
        other => Err(CliError::usage(format!("unknown shingle unit \"{other}\""))),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Predict index geometry and disk usage for a corpus size.
    Plan {
        /// Expected number of documents.
        #[arg(long)]
        num_docs: u64,
        /// Target effective false-positive rate.
        #[arg(long, default_value_t = 1e-5)]
        fp_rate: f64,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long, default_value_t = 128)]
        num_perm: usize,
        /// Emit the plan as JSON instead of the human-readable table.
        #[arg(long)]
        json: bool,
    },
    /// Stream records through a dedup method, emitting one verdict per line.
    Dedup {
        /// Input record files (line-delimited JSON); use "-" for stdin.
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        record: RecordArgs,
        /// LSHBloom index file: loaded if present, created otherwise, and
        /// saved back after the run.
        #[arg(long)]
        index: Option<PathBuf>,
        /// Allow flags to proceed when they conflict with a loaded index
        /// (the index parameters win).
        #[arg(long)]
        force_params: bool,
        /// Decision output path (default stdout).
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Build an LSHBloom index from a corpus and save it.
    Build {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        record: RecordArgs,
        /// Where to write the index.
        #[arg(long, short)]
        output: PathBuf,
    },
    /// Query a saved index without inserting.
    Query {
        inputs: Vec<PathBuf>,
        /// Saved index file.
        #[arg(long)]
        index: PathBuf,
        #[command(flatten)]
        record: RecordArgs,
        /// Shingle width used when the index was built.
        #[arg(long, default_value_t = 3)]
        shingle_size: usize,
        #[arg(long, default_value = "word")]
        shingle_unit: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Synthesize a labeled benchmark corpus by cloning and perturbing
    /// documents from a base corpus.
    Synth {
        /// Base corpus file.
        input: PathBuf,
        #[command(flatten)]
        record: RecordArgs,
        #[arg(long)]
        n_duplicates: usize,
        /// Per-token dropout rate applied to each clone.
        #[arg(long, default_value_t = 0.05)]
        dropout: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Output corpus path.
        #[arg(long, short)]
        output: PathBuf,
        /// Output labels path.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Score a decision file against a label file.
    Eval {
        /// Decisions emitted by `dedup`.
        #[arg(long)]
        decisions: PathBuf,
        /// Labels emitted by `synth`.
        #[arg(long)]
        labels: PathBuf,
    },
    /// Run a method over growing prefixes of a corpus, reporting wall time
    /// and index bytes per size point.
    Bench {
        /// Corpus file; omit to use a synthetic corpus.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        record: RecordArgs,
        /// Prefix sizes, comma separated.
        #[arg(long, value_delimiter = ',', default_values_t = vec![10_000usize, 100_000, 1_000_000])]
        sizes: Vec<usize>,
        /// Methods to bench.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = vec![MethodKind::Lshbloom, MethodKind::ClassicLsh])]
        methods: Vec<MethodKind>,
        #[arg(long, default_value_t = 0.8)]
        threshold: f64,
        #[arg(long, default_value_t = 128)]
        num_perm: usize,
        #[arg(long, default_value_t = 1e-5)]
        fp_rate: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Tokens per document for the synthetic corpus.
        #[arg(long, default_value_t = 20)]
        doc_tokens: usize,
    },
}

struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<lshbloom::Error> for CliError {
    fn from(e: lshbloom::Error) -> Self {
        let code = match &e {
            lshbloom::Error::Io(_) => EXIT_IO,
            lshbloom::Error::InvalidParameter(_) | lshbloom::Error::ConfigMismatch(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: e.to_string(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are success, anything else is usage
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}

fn open_inputs(paths: &[PathBuf]) -> Result<Box<dyn Iterator<Item = io::Result<String>>>, CliError> {
    if paths.is_empty() || (paths.len() == 1 && paths[0].as_os_str() == "-") {
        return Ok(Box::new(BufReader::new(io::stdin()).lines()));
    }
    let mut readers: Vec<Box<dyn Iterator<Item = io::Result<String>>>> = Vec::new();
    for path in paths {
        let file = File::open(path)?;
        readers.push(Box::new(BufReader::new(file).lines()));
    }
    Ok(Box::new(readers.into_iter().flatten()))
}

fn open_output(path: &Option<PathBuf>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn read_corpus(path: &Path, record: &RecordArgs) -> Result<Vec<Document>, CliError> {
    let file = File::open(path)?;
    let mut docs = Vec::new();
    for line in BufReader::new(file).lines() {
        docs.push(parse_record(&line?, &record.id_field, &record.text_field)?);
    }
    Ok(docs)
}

fn run(cli: Cli) -> Result<u8, CliError> {
    match cli.command {
        Command::Plan {
            num_docs,
            fp_rate,
            threshold,
            num_perm,
            json,
        } => {
            let plan = plan(num_docs, fp_rate, threshold, num_perm)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&plan).unwrap());
            } else {
                println!("documents              {num_docs}");
                println!("effective fp rate      {fp_rate:e}");
                println!("bands (filters)        {}", plan.bands);
                println!("rows per band          {}", plan.rows);
                println!("per-filter fp rate     {:.6e}", plan.per_filter_p);
                println!("per-filter bits        {}", plan.per_filter_bits);
                println!("probes per filter      {}", plan.probes_per_filter);
                println!("payload bytes          {}", plan.total_bytes);
                println!("payload                {:.2} GB", plan.total_gigabytes());
                println!("file size with headers {} bytes", plan.file_bytes());
            }
            Ok(0)
        }

        Command::Dedup {
            inputs,
            method,
            record,
            index,
            force_params,
            output,
        } => {
            let config = method.to_config()?;
            let mut engine = match (&index, config.method) {
                (Some(path), MethodKind::Lshbloom) if path.exists() => {
                    let loaded = LshBloomIndex::load(path)?;
                    let requested = config.lsh_params()?;
                    if *loaded.params() != requested && !force_params {
                        return Err(CliError::usage(format!(
                            "index parameters {:?} conflict with flags {:?}; pass --force-params to use the index's",
                            loaded.params(),
                            requested
                        )));
                    }
                    DedupEngine::from_lshbloom_index(loaded, config.shingle_n, config.shingle_unit)?
                }
                (Some(_), kind) if kind != MethodKind::Lshbloom => {
                    return Err(CliError::usage("--index is only supported for the lshbloom method"));
                }
                _ => DedupEngine::new(&config)?,
            };

            let mut out = open_output(&output)?;
            let lines = open_inputs(&inputs)?;
            let stats = dedup_stream(
                lines,
                &mut engine,
                &record.id_field,
                &record.text_field,
                method.workers(),
                |item| {
                    writeln!(out, "{}", serde_json::to_string(item).unwrap())?;
                    Ok(())
                },
            )?;
            out.flush()?;
            if let (Some(path), Some(idx)) = (&index, engine.lshbloom_index()) {
                idx.save(path)?;
            }
            eprintln!("{}", serde_json::to_string(&stats).unwrap());
            Ok(if stats.errors > 0 { EXIT_DATA } else { 0 })
        }

        Command::Build {
            inputs,
            method,
            record,
            output,
        } => {
            let mut config = method.to_config()?;
            config.method = MethodKind::Lshbloom;
            let mut engine = DedupEngine::new(&config)?;
            let lines = open_inputs(&inputs)?;
            let stats = dedup_stream(
                lines,
                &mut engine,
                &record.id_field,
                &record.text_field,
                method.workers(),
                |_| Ok(()),
            )?;
            engine.lshbloom_index().unwrap().save(&output)?;
            eprintln!("{}", serde_json::to_string(&stats).unwrap());
            Ok(if stats.errors > 0 { EXIT_DATA } else { 0 })
        }

        Command::Query {
            inputs,
            index,
            record,
            shingle_size,
            shingle_unit,
            output,
        } => {
            let index = LshBloomIndex::load(&index)?;
            let unit = parse_unit(&shingle_unit)?;
            let family =
                UniversalHashFamily::new(index.params().signature_seed, index.params().num_perm)?;
            let mut out = open_output(&output)?;
            let mut errors = 0u64;
            for (line_no, line) in open_inputs(&inputs)?.enumerate() {
                let line = line?;
                let item = parse_record(&line, &record.id_field, &record.text_field)
                    .and_then(|doc| {
                        let shingles = shingle(&doc.text, shingle_size, unit)?;
                        let sig = minhash_signature(&shingles, &family)?;
                        let outcome = index.query(&sig)?;
                        Ok(StreamItem::Decision(DedupDecision {
                            doc_id: doc.id,
                            verdict: if outcome.duplicate {
                                Verdict::Duplicate
                            } else {
                                Verdict::Unique
                            },
                            method: MethodKind::Lshbloom,
                            bands: Some(outcome.colliding_bands),
                            duplicated_fraction: None,
                        }))
                    })
                    .unwrap_or_else(|e| {
                        errors += 1;
                        StreamItem::LineError {
                            line: line_no + 1,
                            error: e.to_string(),
                        }
                    });
                writeln!(out, "{}", serde_json::to_string(&item).unwrap())?;
            }
            out.flush()?;
            Ok(if errors > 0 { EXIT_DATA } else { 0 })
        }

        Command::Synth {
            input,
            record,
            n_duplicates,
            dropout,
            seed,
            output,
            labels,
        } => {
            let base = read_corpus(&input, &record)?;
            let corpus = synthesize_benchmark(&base, n_duplicates, dropout, seed)?;
            let mut doc_out = BufWriter::new(File::create(&output)?);
            for doc in &corpus.documents {
                writeln!(doc_out, "{}", serde_json::to_string(doc).unwrap())?;
            }
            doc_out.flush()?;
            let mut label_out = BufWriter::new(File::create(&labels)?);
            for doc in &corpus.documents {
                let mut obj = serde_json::to_value(&corpus.labels[&doc.id]).unwrap();
                obj["id"] = serde_json::Value::String(doc.id.clone());
                writeln!(label_out, "{obj}")?;
            }
            label_out.flush()?;
            Ok(0)
        }

        Command::Eval { decisions, labels } => {
            let mut label_map = std::collections::HashMap::new();
            for line in BufReader::new(File::open(&labels)?).lines() {
                let line = line?;
                let value: serde_json::Value = serde_json::from_str(&line)
                    .map_err(|e| lshbloom::Error::MalformedRecord(e.to_string()))?;
                let id = value
                    .get("id")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| lshbloom::Error::MalformedRecord("label without id".into()))?
                    .to_string();
                let label: Label = serde_json::from_value(value)
                    .map_err(|e| lshbloom::Error::MalformedRecord(e.to_string()))?;
                label_map.insert(id, label);
            }
            let mut decision_list = Vec::new();
            for line in BufReader::new(File::open(&decisions)?).lines() {
                let line = line?;
                // skip interleaved per-line error records
                if let Ok(d) = serde_json::from_str::<DedupDecision>(&line) {
                    decision_list.push(d);
                }
            }
            let report = evaluate(decision_list.iter(), &label_map)?;
            println!("{}", serde_json::to_string_pretty(&report).unwrap());
            Ok(0)
        }

        Command::Bench {
            input,
            record,
            sizes,
            methods,
            threshold,
            num_perm,
            fp_rate,
            seed,
            doc_tokens,
        } => {
            let max_size = *sizes.iter().max().ok_or_else(|| CliError::usage("no sizes given"))?;
            let corpus: Vec<Document> = match &input {
                Some(path) => read_corpus(path, &record)?,
                None => pipeline::random_corpus(max_size, doc_tokens, 5_000_000, seed),
            };
            if corpus.len() < max_size {
                return Err(CliError::usage(format!(
                    "corpus has {} documents, largest prefix wants {max_size}",
                    corpus.len()
                )));
            }
            for &size in &sizes {
                for &method in &methods {
                    let point = bench_point(&corpus[..size], method, threshold, num_perm, fp_rate, seed)?;
                    println!("{}", serde_json::to_string(&point).unwrap());
                }
            }
            Ok(0)
        }
    }
}

#[derive(serde::Serialize)]
struct BenchPoint {
    method: MethodKind,
    docs: usize,
    wall_seconds: f64,
    signature_seconds: f64,
    index_seconds: f64,
    index_bytes: u64,
    planned_bytes: Option<u64>,
}

/// The scaling protocol at desk scale: signatures once, then timed
/// insert+query passes per method over the prefix.
fn bench_point(
    docs: &[Document],
    method: MethodKind,
    threshold: f64,
    num_perm: usize,
    fp_rate: f64,
    seed: u64,
) -> Result<BenchPoint, CliError> {
    let config = MethodConfig {
        method,
        threshold,
        num_perm,
        fp_rate,
        expected_docs: docs.len() as u64,
        seed,
        ..Default::default()
    };
    let mut engine = DedupEngine::new(&config)?;
    let start = Instant::now();
    let mut stats = dedup_stream(
        docs.iter()
            .map(|d| Ok(serde_json::to_string(&serde_json::json!({"id": d.id, "text": d.text})).unwrap())),
        &mut engine,
        "id",
        "text",
        0,
        |_| Ok(()),
    )?;
    stats.wall_seconds = start.elapsed().as_secs_f64();
    let planned = match method {
        MethodKind::Lshbloom => Some(
            plan(docs.len() as u64, fp_rate, threshold, num_perm)?.file_bytes(),
        ),
        _ => None,
    };
    Ok(BenchPoint {
        method,
        docs: docs.len(),
        wall_seconds: stats.wall_seconds,
        signature_seconds: stats.signature_seconds,
        index_seconds: stats.index_seconds,
        index_bytes: stats.index_bytes,
        planned_bytes: planned,
    })
}
