use std::collections::BTreeMap;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use gclrec_core::eval::{evaluate, group_analysis, EvalSplit, DEFAULT_CUTOFFS};
use gclrec_core::ingest::{InteractionSet, SplitData};
use gclrec_core::trainer::{final_embeddings, prepare_data, train, EpochLog, ModelKind, TrainConfig, TrainInputs};
use gclrec_core::{suggest_edges, Checkpoint, EdgeCandidateSet, Error};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "gclrec", version, about = "Graph collaborative filtering with learnable edge augmentation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Interaction file: `user<TAB>item[<TAB>...]` per line.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// `key=value` config override; repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    set: Vec<String>,
    /// Run single-threaded.
    #[arg(long, global = true, default_value_t = true, action = clap::ArgAction::Set)]
    deterministic: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train BPRMF or LightGCN on BPR only.
    Pretrain,
    /// Build the edge candidate set from a pre-trained checkpoint.
    Suggest {
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Train the configured model.
    Train {
        /// Candidate set from `suggest`.
        #[arg(long)]
        candidates: Option<PathBuf>,
        /// Pre-trained checkpoint; candidates are derived from it when not given.
        #[arg(long)]
        pretrained: Option<PathBuf>,
    },
    /// Full-ranking evaluation of a checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_CUTOFFS)]
        cutoffs: Vec<usize>,
        /// Adds a breakdown over this many training-degree groups.
        #[arg(long)]
        groups: Option<usize>,
        #[arg(long, default_value = "test")]
        split: EvalSplit,
    },
}

#[derive(Serialize)]
struct DataFingerprint {
    path: String,
    sha256: String,
    records: usize,
    n_users: usize,
    n_items: usize,
    train: usize,
    valid: usize,
    test: usize,
}

#[derive(Serialize)]
struct Manifest {
    command: &'static str,
    version: &'static str,
    config: BTreeMap<&'static str, String>,
    seed: u64,
    deterministic: bool,
    data: DataFingerprint,
    inputs: BTreeMap<&'static str, String>,
    artifacts: BTreeMap<&'static str, String>,
    timings_sec: BTreeMap<&'static str, f64>,
}

struct Run {
    config: TrainConfig,
    set: InteractionSet,
    data: SplitData,
    fingerprint: DataFingerprint,
    out: PathBuf,
    deterministic: bool,
    timings: BTreeMap<&'static str, f64>,
    inputs: BTreeMap<&'static str, String>,
    artifacts: BTreeMap<&'static str, String>,
}

fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn require_file(path: &Path) -> anyhow::Result<()> {
    if !path.is_file() {
        return Err(Error::Io {
            path: path.to_owned(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        }
        .into());
    }
    Ok(())
}

fn load_config(common: &Common) -> anyhow::Result<TrainConfig> {
    let mut config = TrainConfig::default();
    if let Some(path) = &common.config {
        require_file(path)?;
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_text(&text)?;
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    for s in &common.set {
        config.apply_override(s)?;
    }
    config.validate()?;
    Ok(config)
}

impl Run {
    fn start(common: &Common, config: TrainConfig) -> anyhow::Result<Self> {
        let path = common.data.as_ref().context("--data is required")?;
        require_file(path)?;
        let t = Instant::now();
        let (set, data) = prepare_data(&config, path)?;
        let fingerprint = DataFingerprint {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
            records: set.len(),
            n_users: set.n_users(),
            n_items: set.n_items(),
            train: data.train.n_edges(),
            valid: data.valid.iter().map(Vec::len).sum(),
            test: data.test.iter().map(Vec::len).sum(),
        };
        fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
        let mut timings = BTreeMap::new();
        timings.insert("load", t.elapsed().as_secs_f64());
        Ok(Self {
            config,
            set,
            data,
            fingerprint,
            out: common.out.clone(),
            deterministic: common.deterministic,
            timings,
            inputs: BTreeMap::new(),
            artifacts: BTreeMap::new(),
        })
    }

    fn path(&mut self, name: &'static str, file: &str) -> PathBuf {
        let p = self.out.join(file);
        self.artifacts.insert(name, p.display().to_string());
        p
    }

    fn finish(mut self, command: &'static str) -> anyhow::Result<()> {
        let manifest_path = self.path("manifest", "manifest.json");
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            config: self.config.entries().into_iter().collect(),
            seed: self.config.seed,
            deterministic: self.deterministic,
            data: self.fingerprint,
            inputs: self.inputs,
            artifacts: self.artifacts,
            timings_sec: self.timings,
        };
        fs::write(&manifest_path, serde_json::to_string_pretty(&manifest)? + "\n")?;
        Ok(())
    }

    fn write_splits(&mut self) -> anyhow::Result<()> {
        let p = self.path("splits", "splits.tsv");
        let mut buf = Vec::new();
        self.set.write_splits(&mut buf)?;
        fs::write(p, buf)?;
        Ok(())
    }

    fn load_checkpoint(&mut self, name: &'static str, path: &Path) -> anyhow::Result<Checkpoint> {
        require_file(path)?;
        let ck = Checkpoint::load(path)?;
        if ck.n_users != self.data.n_users() || ck.n_items != self.data.n_items() {
            bail!(
                "checkpoint {} covers {}+{} nodes but the data has {}+{}; check --data and the split settings",
                path.display(),
                ck.n_users,
                ck.n_items,
                self.data.n_users(),
                self.data.n_items()
            );
        }
        self.inputs.insert(name, path.display().to_string());
        Ok(ck)
    }

    fn suggest_from(&mut self, ck: &Checkpoint) -> anyhow::Result<EdgeCandidateSet> {
        let t = Instant::now();
        let z = final_embeddings(ck, &self.data.train, self.config.depth())?;
        let cands = suggest_edges(&z, &self.data.train)?;
        cands.check_contract()?;
        self.timings.insert("suggest", t.elapsed().as_secs_f64());
        Ok(cands)
    }

    fn train_and_save(&mut self, inputs: TrainInputs<'_>) -> anyhow::Result<()> {
        let t = Instant::now();
        let mut lines = String::new();
        let outcome = train(&self.config, &self.data, inputs, |l: &EpochLog| {
            lines.push_str(&l.to_json_line());
            lines.push('\n');
        })?;
        self.timings.insert("train", t.elapsed().as_secs_f64());
        let log_path = self.path("metrics_log", "metrics.jsonl");
        fs::write(log_path, lines)?;
        let ck_path = self.path("checkpoint", "checkpoint.bin");
        outcome.checkpoint.save(ck_path)?;
        log::info!(
            "best validation NDCG@10 {:.5} at epoch {} of {}",
            outcome.best_val_ndcg10,
            outcome.best_epoch,
            outcome.log.len()
        );
        Ok(())
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if cli.common.deterministic {
        rayon::ThreadPoolBuilder::new().num_threads(1).build_global()?;
    }
    let config = load_config(&cli.common)?;
    match cli.command {
        Command::Pretrain => {
            let mut config = config;
            if !matches!(config.model, ModelKind::Bprmf | ModelKind::Lightgcn) {
                log::info!("pretrain uses lightgcn (config model is {})", config.model);
                config.model = ModelKind::Lightgcn;
            }
            let mut run = Run::start(&cli.common, config)?;
            run.write_splits()?;
            run.train_and_save(TrainInputs::default())?;
            run.finish("pretrain")
        }
        Command::Suggest { checkpoint } => {
            let mut run = Run::start(&cli.common, config)?;
            let ck = run.load_checkpoint("checkpoint", &checkpoint)?;
            let cands = run.suggest_from(&ck)?;
            let p = run.path("candidates", "candidates.tsv");
            cands.write_tsv(std::io::BufWriter::new(fs::File::create(&p)?))?;
            let back = EdgeCandidateSet::read_tsv(BufReader::new(fs::File::open(&p)?), &p.display().to_string())?;
            if back != cands {
                bail!("candidate file {} did not read back identically", p.display());
            }
            println!(
                "{} candidates: {} original, {} suggested, shortfall {}",
                cands.len(),
                cands.n_original(),
                cands.n_suggested(),
                cands.total_shortfall()
            );
            run.finish("suggest")
        }
        Command::Train { candidates, pretrained } => {
            let mut run = Run::start(&cli.common, config)?;
            let pre = match &pretrained {
                Some(p) => Some(run.load_checkpoint("pretrained", p)?),
                None => None,
            };
            let needs_candidates = match run.config.model {
                ModelKind::LdaGcl => run.config.edge_operator,
                ModelKind::DaGcl => run.config.p_add > 0.0,
                _ => false,
            };
            let cands = match (&candidates, &pre) {
                (Some(p), _) => {
                    require_file(p)?;
                    run.inputs.insert("candidates", p.display().to_string());
                    let c = EdgeCandidateSet::read_tsv(BufReader::new(fs::File::open(p)?), &p.display().to_string())?;
                    Some(c)
                }
                (None, Some(ck)) if needs_candidates => Some(run.suggest_from(ck)?),
                _ => None,
            };
            if needs_candidates && cands.is_none() {
                bail!(
                    "model {} needs edge candidates: run `gclrec pretrain` first, then pass --pretrained or \
                     `gclrec suggest` output via --candidates",
                    run.config.model
                );
            }
            run.write_splits()?;
            run.train_and_save(TrainInputs {
                candidates: cands.as_ref(),
                pretrained: pre.as_ref(),
            })?;
            run.finish("train")
        }
        Command::Eval {
            checkpoint,
            cutoffs,
            groups,
            split,
        } => {
            let mut run = Run::start(&cli.common, config)?;
            let ck = run.load_checkpoint("checkpoint", &checkpoint)?;
            let t = Instant::now();
            let z = final_embeddings(&ck, &run.data.train, run.config.depth())?;
            let report = match groups {
                Some(n) => group_analysis(&z, &run.data, split, &cutoffs, n)?,
                None => evaluate(&z, &run.data, split, &cutoffs)?,
            };
            run.timings.insert("eval", t.elapsed().as_secs_f64());
            let json = run.path("metrics_json", "metrics.json");
            fs::write(json, report.to_json() + "\n")?;
            let csv = run.path("metrics_csv", "metrics.csv");
            fs::write(csv, report.to_csv())?;
            print!("{}", report.to_csv());
            run.finish("eval")
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let missing = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Io { .. })));
            ExitCode::from(if missing { 2 } else { 1 })
        }
    }
}
