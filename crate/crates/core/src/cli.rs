//! Command-line front end. `run` returns the process exit code: 0 on
//! success, 1 on usage errors, 2 on data errors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::align::gram_volume;
use crate::chem::{default_library, detect_functional_groups, load_library, parse_smiles, scaffold_key, FGPattern};
use crate::encode::{EmbeddingBundle, EmbeddingStore, Modality, RAW_DIM};
use crate::eval::{linear_probe, load_labeled, retrieval_metrics, Direction, ProbeConfig, Scoring};
use crate::tensor::{PoolMode, Tensor};
use crate::train::{
    embed, fit, load_triplets, split_dataset, Checkpoint, EncoderMode, Encoder, Model, RawFeatures, SplitMode,
    TrainConfig, TripletRecord,
};

#[derive(Parser, Debug)]
#[command(name = "trimodal", version, about = "Tri-modal molecule/text/taxonomy alignment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train projection heads on a JSON-lines triplet corpus.
    Train(TrainArgs),
    /// Recall@{1,5,10} in both directions over a corpus, as CSV.
    EvalRetrieval(EvalArgs),
    /// Logistic-regression probe on projected SMILES features, as CSV.
    Probe(ProbeArgs),
    /// Functional groups detected in a SMILES string, as JSON.
    Fg {
        smiles: String,
        #[arg(long)]
        fg_lib: Option<PathBuf>,
    },
    /// Murcko scaffold key of a SMILES string (empty line when acyclic).
    Scaffold { smiles: String },
    /// Toy-encode a corpus and its functional-group library into an embedding directory.
    EncodeToy {
        #[command(flatten)]
        common: Common,
    },
    /// Parallelotope volume of the three (normalized) vectors in a file, one per line.
    Gramvol { file: PathBuf },
    /// Write train/val/test id lists.
    Split {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "scaffold")]
        split: SplitArg,
        /// Comma-separated train,val,test fractions.
        #[arg(long, default_value = "0.8,0.1,0.1")]
        ratios: String,
    },
}

#[derive(Args, Debug)]
struct Common {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    fg_lib: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_enum)]
    pool: Option<PoolArg>,
    #[arg(long)]
    aux_infonce: bool,
    #[arg(long)]
    tau_learnable: bool,
    /// Continue from a checkpoint written under the same configuration.
    #[arg(long)]
    resume: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, value_enum, default_value = "volume")]
    scoring: ScoringArg,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Comma-separated probe seeds.
    #[arg(long, default_value = "0,1,2")]
    seeds: String,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum PoolArg {
    Max,
    Mean,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SplitArg {
    Scaffold,
    Random,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScoringArg {
    Volume,
    Cosine,
}

enum Failure {
    Usage(String),
    Data(String),
}

type Outcome = Result<(), Failure>;

fn data<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Data(e.to_string())
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::EvalRetrieval(a) => cmd_eval(a),
        Command::Probe(a) => cmd_probe(a),
        Command::Fg { smiles, fg_lib } => cmd_fg(&smiles, fg_lib.as_deref()),
        Command::Scaffold { smiles } => cmd_scaffold(&smiles),
        Command::EncodeToy { common } => cmd_encode_toy(common),
        Command::Gramvol { file } => cmd_gramvol(&file),
        Command::Split { common, split, ratios } => cmd_split(common, split, &ratios),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            1
        }
        Err(Failure::Data(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

fn library(path: Option<&Path>) -> Result<Vec<FGPattern>, Failure> {
    match path {
        Some(p) => load_library(p).map_err(data),
        None => Ok(default_library()),
    }
}

/// File values first, then flags.
fn resolve_config(common: &Common) -> Result<TrainConfig, Failure> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
            TrainConfig::from_kv_text(&text).map_err(|e| data(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(dir) = &common.embeddings {
        cfg.encoder = EncoderMode::File;
        cfg.embeddings = Some(dir.clone());
    }
    Ok(cfg)
}

fn log_config(cfg: &TrainConfig) -> Result<Vec<String>, Failure> {
    let warnings = cfg.validate().map_err(data)?;
    eprintln!("# resolved config");
    eprint!("{}", cfg.to_kv_text());
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    Ok(warnings)
}

fn load_corpus(path: &Path, lib: &[FGPattern]) -> Result<Vec<TripletRecord>, Failure> {
    let (records, rejects) = load_triplets(path, lib).map_err(data)?;
    for r in &rejects.rejects {
        eprintln!("skipped {}:{} ({}): {}", path.display(), r.line, r.id, r.reason);
    }
    Ok(records)
}

fn write_or_print(out: Option<&Path>, body: &str) -> Outcome {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| data(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(body.as_bytes()).map_err(data),
    }
}

fn cmd_train(a: TrainArgs) -> Outcome {
    let out = a.common.out.clone().ok_or_else(|| usage("train requires --out"))?;
    let mut cfg = resolve_config(&a.common)?;
    if let Some(p) = a.pool {
        cfg.pooling = match p {
            PoolArg::Max => PoolMode::Max,
            PoolArg::Mean => PoolMode::Mean,
        };
    }
    cfg.aux_infonce |= a.aux_infonce;
    cfg.tau_learnable |= a.tau_learnable;
    if a.resume.is_some() {
        cfg.resume = a.resume;
    }
    log_config(&cfg)?;
    let lib = library(a.common.fg_lib.as_deref())?;
    let records = load_corpus(&a.common.data, &lib)?;
    let result = fit(&cfg, &records, &lib, &out).map_err(data)?;
    fs::write(out.join("config.resolved"), cfg.to_kv_text()).map_err(data)?;
    let last = result.metrics.last();
    eprintln!(
        "trained {} epochs{}; final train L_g {}; checkpoint {}",
        result.state.epoch,
        if result.stopped_early { " (early stop)" } else { "" },
        last.map_or_else(|| "n/a".to_string(), |m| m.train_lg.to_string()),
        result.final_checkpoint.display()
    );
    Ok(())
}

fn load_model(path: &Path, cfg: &TrainConfig) -> Result<Model, Failure> {
    let ckpt = Checkpoint::read(path).map_err(data)?;
    let named: BTreeMap<String, Tensor> = ckpt.tensors.into_iter().collect();
    Model::from_named(&named, cfg.dropout).map_err(|r| data(format!("{}: {r}", path.display())))
}

fn rows(t: Tensor) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|i| t.row(i).to_vec()).collect()
}

fn cmd_eval(a: EvalArgs) -> Outcome {
    let cfg = resolve_config(&a.common)?;
    log_config(&cfg)?;
    let lib = library(a.common.fg_lib.as_deref())?;
    let records = load_corpus(&a.common.data, &lib)?;
    let model = load_model(&a.checkpoint, &cfg)?;
    let raw = RawFeatures::build(&Encoder::from_config(&cfg).map_err(data)?, &records, &lib).map_err(data)?;
    let m = rows(embed(&model, Modality::Smiles, &raw.smiles).map_err(data)?);
    let t = rows(embed(&model, Modality::Text, &raw.text).map_err(data)?);
    let h = rows(embed(&model, Modality::Hta, &raw.hta).map_err(data)?);
    let scoring = match a.scoring {
        ScoringArg::Volume => Scoring::Volume,
        ScoringArg::Cosine => Scoring::Cosine,
    };
    let mut csv = String::from("direction,pool,recall_at_1,recall_at_5,recall_at_10\n");
    for (name, dir) in [("M2TH", Direction::M2TH), ("TH2M", Direction::TH2M)] {
        let r = retrieval_metrics(&m, &t, &h, dir, scoring).map_err(data)?;
        writeln!(csv, "{name},{},{},{},{}", r.pool, r.recall_at_1, r.recall_at_5, r.recall_at_10).unwrap();
    }
    write_or_print(a.common.out.as_deref(), &csv)
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, Failure> {
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| usage(format!("invalid {what} list {text:?}"))))
        .collect()
}

fn cmd_probe(a: ProbeArgs) -> Outcome {
    let cfg = resolve_config(&a.common)?;
    log_config(&cfg)?;
    let seeds: Vec<u64> = parse_list(&a.seeds, "seed")?;
    let labeled = load_labeled(&a.common.data, cfg.seed).map_err(data)?;
    let model = load_model(&a.checkpoint, &cfg)?;
    let encoder = Encoder::from_config(&cfg).map_err(data)?;
    let mut raw = Vec::with_capacity(labeled.items.len());
    for item in &labeled.items {
        parse_smiles(&item.smiles).map_err(|e| data(format!("{}: {e}", item.id)))?;
        raw.push(encoder.encode(Modality::Smiles, &item.id, &item.smiles).map_err(data)?);
    }
    let features = rows(embed(&model, Modality::Smiles, &raw).map_err(data)?);
    let res = linear_probe(&features, &labeled, &seeds, &ProbeConfig::default()).map_err(data)?;
    let mut csv = String::from("seed,auc,accuracy\n");
    for s in &res.per_seed {
        writeln!(csv, "{},{},{}", s.seed, s.auc, s.accuracy).unwrap();
    }
    writeln!(csv, "mean,{},{}", res.auc_mean, res.accuracy_mean).unwrap();
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    writeln!(csv, "std,{},{}", opt(res.auc_std), opt(res.accuracy_std)).unwrap();
    write_or_print(a.common.out.as_deref(), &csv)
}

fn cmd_fg(smiles: &str, fg_lib: Option<&Path>) -> Outcome {
    let lib = library(fg_lib)?;
    let mol = parse_smiles(smiles).map_err(data)?;
    let groups: Vec<_> = detect_functional_groups(&mol, &lib)
        .into_iter()
        .map(|m| {
            let name = lib.iter().find(|p| p.id == m.pattern_id).map_or("", |p| p.name.as_str());
            json!({"id": m.pattern_id, "name": name, "atoms": m.atom_indices})
        })
        .collect();
    println!("{}", serde_json::to_string_pretty(&json!({"smiles": smiles, "groups": groups})).unwrap());
    Ok(())
}

fn cmd_scaffold(smiles: &str) -> Outcome {
    let mol = parse_smiles(smiles).map_err(data)?;
    println!("{}", scaffold_key(&mol));
    Ok(())
}

fn cmd_encode_toy(common: Common) -> Outcome {
    let out = common.out.clone().ok_or_else(|| usage("encode-toy requires --out"))?;
    let mut cfg = resolve_config(&common)?;
    cfg.encoder = EncoderMode::Toy;
    cfg.embeddings = None;
    let lib = library(common.fg_lib.as_deref())?;
    let records = load_corpus(&common.data, &lib)?;
    let encoder = Encoder::from_config(&cfg).map_err(data)?;
    let empty = || EmbeddingStore::new(RAW_DIM);
    let mut bundle = EmbeddingBundle {
        smiles: empty(),
        text: empty(),
        hta: empty(),
        fg_pattern: empty(),
        fg_text: empty(),
    };
    let mut put = |m: Modality, id: &str, text: &str| -> Outcome {
        let v = encoder.encode(m, id, text).map_err(data)?;
        bundle.store_mut(m).insert(id, v).map_err(data)
    };
    for r in &records {
        put(Modality::Smiles, &r.id, &r.smiles)?;
        put(Modality::Text, &r.id, &r.text)?;
        put(Modality::Hta, &r.id, &r.hta)?;
    }
    for p in &lib {
        put(Modality::FgPattern, &p.id, &p.pattern)?;
        put(Modality::FgText, &p.id, &p.description)?;
    }
    fs::create_dir_all(&out).map_err(data)?;
    bundle.write(&out).map_err(data)?;
    eprintln!("wrote {} records and {} groups to {}", records.len(), lib.len(), out.display());
    Ok(())
}

fn cmd_gramvol(file: &Path) -> Outcome {
    let text = fs::read_to_string(file).map_err(|e| data(format!("{}: {e}", file.display())))?;
    let mut vecs = Vec::new();
    for (k, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| data(format!("{}:{}: {e}", file.display(), k + 1)))?;
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            return Err(data(format!("{}:{}: zero vector", file.display(), k + 1)));
        }
        vecs.push(v.into_iter().map(|x| x / n).collect::<Vec<f64>>());
    }
    if vecs.len() != 3 {
        return Err(data(format!("{}: expected 3 vectors, found {}", file.display(), vecs.len())));
    }
    let vol = gram_volume(&vecs[0], &vecs[1], &vecs[2]).map_err(data)?;
    println!("{vol:?}");
    Ok(())
}

fn cmd_split(common: Common, split: SplitArg, ratios: &str) -> Outcome {
    let out = common.out.clone().ok_or_else(|| usage("split requires --out"))?;
    let ratios: Vec<f64> = parse_list(ratios, "ratio")?;
    let ratios: [f64; 3] = ratios
        .try_into()
        .map_err(|_| usage("--ratios needs exactly three values"))?;
    let cfg = resolve_config(&common)?;
    let lib = library(common.fg_lib.as_deref())?;
    let records = load_corpus(&common.data, &lib)?;
    let mode = match split {
        SplitArg::Scaffold => SplitMode::Scaffold,
        SplitArg::Random => SplitMode::Random,
    };
    let s = split_dataset(&records, mode, ratios, cfg.seed).map_err(data)?;
    fs::create_dir_all(&out).map_err(data)?;
    for (name, part) in [("train", &s.train), ("val", &s.val), ("test", &s.test)] {
        let body: String = part.iter().map(|r| format!("{}\n", r.id)).collect();
        fs::write(out.join(format!("{name}.txt")), body).map_err(data)?;
        eprintln!("{name}: {}", part.len());
    }
    Ok(())
}
