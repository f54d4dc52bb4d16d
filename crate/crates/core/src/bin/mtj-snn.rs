use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mtj_snn::commands;
use mtj_snn::{Command, Error, RunConfig};

/// Spiking neural network simulator with stochastic binary MTJ synapses.
#[derive(Parser)]
#[command(name = "mtj-snn", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Config file of `key = value` lines, applied over the command preset.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override one key; repeatable, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: one per core).
    #[arg(long)]
    threads: Option<usize>,
    /// Emit JSON lines instead of aligned text.
    #[arg(long)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Program the 2x2 targets and classify all 16 inputs by Hamming distance.
    VmmDemo(Common),
    /// Cluster the two 2x2 images; with --runs, convergence statistics over seeds.
    ClusterDemo {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// Train on MNIST, label neurons, evaluate, and write results to --out.
    TrainEval {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "runs/train-eval")]
        out: PathBuf,
    },
    /// Print the effective configuration for a command.
    PrintConfig {
        #[arg(value_enum)]
        preset: Preset,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    VmmDemo,
    ClusterDemo,
    TrainEval,
}

impl From<Preset> for Command {
    fn from(p: Preset) -> Self {
        match p {
            Preset::VmmDemo => Command::VmmDemo,
            Preset::ClusterDemo => Command::ClusterDemo,
            Preset::TrainEval => Command::TrainEval,
        }
    }
}

const EXIT_UNMET: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

enum Failure {
    Sim(Error),
    Output(io::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Sim(e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Output(e)
    }
}

fn build_config(cmd: Command, common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::preset(cmd);
    if let Some(path) = &common.config {
        cfg.apply_file(path)?;
    }
    for pair in &common.set {
        cfg.set_pair(pair)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(t) = common.threads {
        cfg.threads = Some(t);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Failure> {
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let passed = match cli.cmd {
        Cmd::VmmDemo(common) => {
            let cfg = build_config(Command::VmmDemo, &common)?;
            let rep = commands::with_threads(cfg.threads, || commands::vmm_demo(&cfg))??;
            if common.json {
                rep.write_json(&mut out)?;
            } else {
                rep.write_text(&mut out)?;
            }
            rep.passed()
        }
        Cmd::ClusterDemo { common, runs } => {
            let mut cfg = build_config(Command::ClusterDemo, &common)?;
            if let Some(r) = runs {
                cfg.runs = r;
                cfg.validate()?;
            }
            let rep = commands::with_threads(cfg.threads, || commands::cluster_demo(&cfg))??;
            if common.json {
                rep.write_json(&mut out)?;
            } else {
                rep.write_text(&mut out)?;
            }
            rep.passed()
        }
        Cmd::TrainEval { common, out: dir } => {
            let cfg = build_config(Command::TrainEval, &common)?;
            let json = common.json;
            let rep = {
                let mut progress: Box<dyn Write + Send> = if json { Box::new(io::sink()) } else { Box::new(io::stderr()) };
                commands::with_threads(cfg.threads, || commands::train_eval(&cfg, &dir, &mut progress))??
            };
            if json {
                rep.write_json(&mut out)?;
            } else {
                rep.write_text(&mut out)?;
            }
            true
        }
        Cmd::PrintConfig { preset, common } => {
            let cfg = build_config(preset.into(), &common)?;
            if common.json {
                let map: serde_json::Map<String, serde_json::Value> =
                    cfg.entries().into_iter().map(|(k, v)| (k.to_string(), v.into())).collect();
                serde_json::to_writer(&mut out, &map).map_err(io::Error::from)?;
                writeln!(out)?;
            } else {
                write!(out, "{}", cfg.to_text())?;
            }
            true
        }
    };
    out.flush()?;
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_UNMET),
        Err(Failure::Sim(e)) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } | Error::Argument(_) => ExitCode::from(EXIT_USAGE),
                Error::Parse { .. } | Error::Io { .. } => ExitCode::from(EXIT_IO),
            }
        }
        Err(Failure::Output(e)) if e.kind() == io::ErrorKind::BrokenPipe => ExitCode::SUCCESS,
        Err(Failure::Output(e)) => {
            eprintln!("error: writing output: {e}");
            ExitCode::from(EXIT_IO)
        }
    }
}
