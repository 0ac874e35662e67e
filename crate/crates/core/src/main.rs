use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use madegan::config::RunConfig;
use madegan::pipeline::{self, count_table, Run};
use madegan::Error;

#[derive(Parser)]
#[command(name = "madegan", version, about = "ECG anomaly detection and arrhythmia classification")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// Override one configuration key, e.g. `--set l1.epochs=10`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic beats (CSV) and recordings (WFDB).
    Synth {
        #[arg(long)]
        beats: Option<usize>,
        /// Class proportions, e.g. `N:0.9,V:0.05,S:0.04,F:0.01`.
        #[arg(long)]
        mix: Option<String>,
        #[arg(long)]
        recordings: Option<usize>,
        #[arg(long)]
        duration: Option<f64>,
        #[arg(long)]
        bpm: Option<f64>,
    },
    /// Segment WFDB recordings into labeled, normalized beats.
    Preprocess {
        #[arg(long)]
        input: PathBuf,
        /// Comma-separated record ids; default is every record in the input.
        #[arg(long, value_delimiter = ',')]
        records: Option<Vec<String>>,
        /// Keep records on the exclusion list.
        #[arg(long)]
        no_exclude: bool,
        #[arg(long)]
        notch: Option<f64>,
    },
    /// Train the anomaly detector on normal beats.
    TrainLevel1 {
        #[arg(long)]
        data: PathBuf,
        /// Continue from a checkpoint up to `l1.epochs`.
        #[arg(long)]
        resume: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the multi-branch classifier on abnormal beats.
    TrainLevel2 {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Write anomaly scores (and class probabilities) of beats.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Metrics, confusion matrices and curves.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Also report k-fold mean and standard deviation.
        #[arg(long)]
        folds: bool,
    },
}

const USAGE: u8 = 1;
const RUNTIME: u8 = 2;

fn resolve(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for kv in &cli.global.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("`--set {kv}` is not KEY=VALUE")))?;
        cfg.set(k.trim(), v)?;
    }
    let mut set = |k: &str, v: Option<String>| v.map_or(Ok(()), |v| cfg.set(k, &v));
    match &cli.command {
        Command::Synth { beats, mix, recordings, duration, bpm } => {
            set("synth.beats", beats.map(|v| v.to_string()))?;
            set("synth.mix", mix.clone())?;
            set("synth.recordings", recordings.map(|v| v.to_string()))?;
            set("synth.duration_s", duration.map(|v| v.to_string()))?;
            set("synth.bpm", bpm.map(|v| v.to_string()))?;
        }
        Command::Preprocess { no_exclude, notch, .. } => {
            set("prep.notch_hz", notch.map(|v| v.to_string()))?;
            if *no_exclude {
                set("prep.exclude", Some(String::new()))?;
            }
        }
        Command::TrainLevel1 { epochs, .. } => set("l1.epochs", epochs.map(|v| v.to_string()))?,
        Command::TrainLevel2 { epochs, .. } => set("l2.epochs", epochs.map(|v| v.to_string()))?,
        Command::Score { .. } | Command::Evaluate { .. } => {}
    }
    if let Some(s) = cli.global.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli, run: &Run) -> Result<(), Error> {
    match &cli.command {
        Command::Synth { .. } => {
            let s = pipeline::synth(run)?;
            println!("wrote {} beats to {}", s.beats, run.path(pipeline::BEATS_FILE).display());
            print!("{}", count_table(&s.counts));
            if !s.recordings.is_empty() {
                println!("recordings: {}", s.recordings.join(", "));
            }
        }
        Command::Preprocess { input, records, .. } => {
            let s = pipeline::preprocess(run, input, records.as_deref())?;
            println!("records: {} (excluded: {})", s.records.len(), s.excluded.join(", "));
            print!("{}", count_table(&s.counts));
            println!("dropped: {} at boundaries, {} unlabeled", s.dropped_boundary, s.dropped_unlabeled);
        }
        Command::TrainLevel1 { data, resume, .. } => {
            let s = pipeline::train_level1(run, data, resume.as_deref())?;
            println!(
                "trained on {} normal beats; test set {} normal + {} abnormal",
                s.train, s.test_normal, s.test_abnormal
            );
            if let Some(l) = s.logs.last() {
                println!("final epoch {}: {}", l.epoch, l.csv_row());
            }
        }
        Command::TrainLevel2 { checkpoint, data, .. } => {
            let s = pipeline::train_level2(run, checkpoint, data)?;
            let m = &s.report.metrics;
            println!("trained on {} beats, tested on {}", s.train, s.test);
            println!(
                "macro recall {:.4} precision {:.4} f-score {:.4} accuracy {:.4}",
                m.recall, m.precision, m.f_score, m.accuracy
            );
        }
        Command::Score { checkpoint, data } => {
            let n = pipeline::score(run, checkpoint, data)?;
            println!("scored {n} beats");
        }
        Command::Evaluate { checkpoint, data, folds } => {
            let s = pipeline::evaluate(run, checkpoint, data, *folds)?;
            let r = &s.level1;
            println!(
                "level 1: auroc {:.4} auprc {:.4} recall {:.4} precision {:.4} f-score {:.4} accuracy {:.4}",
                r.auroc, r.auprc, r.metrics.recall, r.metrics.precision, r.metrics.f_score, r.metrics.accuracy
            );
            if let Some(r) = &s.level2 {
                println!("level 2: macro recall {:.4} f-score {:.4}", r.metrics.recall, r.metrics.f_score);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { USAGE } else { 0 });
        }
    };
    let cfg = match resolve(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    let run = match Run::new(cfg, cli.global.out_dir.clone()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(USAGE);
        }
    };
    match execute(&cli, &run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(RUNTIME)
        }
    }
}
