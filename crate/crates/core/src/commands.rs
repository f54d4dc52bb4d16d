//! The three experiments behind the `mtj-snn` binary: the 2x2 crossbar
//! inference demo, the two-image clustering demo and MNIST training with
//! evaluation. Each returns a report that renders as aligned text or as
//! JSON lines.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Command, RunConfig};
use crate::crossbar::{hamming_from_output, subtract, InputVector, ReadNoise, SynapseArray};
use crate::data::{builtin_corpus, load_idx, Corpus, LabeledDataset};
use crate::device::PulseOutcome;
use crate::error::{Error, Result};
use crate::network::{ClusteringRun, Evaluation, Network, NeuronLabels, TrainOptions, TrainReport};
use crate::neuron::NeuronParams;
use crate::snapshot;

/// Minimum converged fraction for a multi-seed clustering run to pass.
pub const CLUSTER_PASS_FRACTION: f64 = 0.95;

pub const SNAPSHOT_FILE: &str = "snapshot.mtjsnn";
pub const METRICS_FILE: &str = "metrics.jsonl";
pub const WEIGHTS_DIR: &str = "weights";

/// Run `f` on a pool of `threads` workers, or the global pool for `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| Error::config("cli", format!("cannot start {n} threads: {e}"))),
    }
}

fn write_json(out: &mut dyn Write, v: &Value) -> io::Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    out.write_all(b"\n")
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmmRow {
    pub input: InputVector,
    pub dendrite: usize,
    pub target: InputVector,
    pub raw: f64,
    pub output: f64,
    pub bin: usize,
    pub hamming: usize,
}

impl VmmRow {
    pub fn correct(&self) -> bool {
        self.bin == self.hamming
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VmmReport {
    pub rows: Vec<VmmRow>,
}

impl VmmReport {
    pub fn wrong(&self) -> usize {
        self.rows.iter().filter(|r| !r.correct()).count()
    }

    pub fn passed(&self) -> bool {
        self.wrong() == 0
    }

    pub fn write_text(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "{:>5}  {:>8}  {:>6}  {:>9}  {:>9}  {:>3}  {:>4}  ok", "input", "dendrite", "target", "raw", "output", "bin", "true")?;
        for r in &self.rows {
            writeln!(
                out,
                "{:>5}  {:>8}  {:>6}  {:>9.4}  {:>9.4}  {:>3}  {:>4}  {}",
                r.input.to_string(),
                r.dendrite,
                r.target.to_string(),
                r.raw,
                r.output,
                r.bin,
                r.hamming,
                if r.correct() { "yes" } else { "NO" }
            )?;
        }
        writeln!(out, "{} of {} bins correct", self.rows.len() - self.wrong(), self.rows.len())
    }

    pub fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        for r in &self.rows {
            write_json(
                out,
                &json!({
                    "record": "vmm",
                    "input": r.input.to_string(),
                    "dendrite": r.dendrite,
                    "target": r.target.to_string(),
                    "raw": r.raw,
                    "output": r.output,
                    "bin": r.bin,
                    "hamming": r.hamming,
                    "correct": r.correct(),
                }),
            )?;
        }
        write_json(out, &json!({"record": "summary", "bins": self.rows.len(), "wrong": self.wrong()}))
    }
}

/// Program the two 2x2 targets, read all sixteen inputs and bin each
/// output by Hamming distance. Read noise, if configured, is seeded from
/// `seed` and the input index.
pub fn vmm_demo(cfg: &RunConfig) -> Result<VmmReport> {
    let params = cfg.network_params(NeuronParams::default().theta0)?;
    let targets = builtin_corpus(Corpus::Fig1Targets);
    let r = cfg.replicas;
    let mut array = SynapseArray::new(targets.len(), 4, r, params.device)?;
    for (row, t) in targets.iter().enumerate() {
        array.program(row, t)?;
    }
    let weight = r as f64 * params.device.g_ap * (params.device.ratio_rho - 1.0) / 2.0;
    let mut rows = Vec::new();
    for (i, input) in builtin_corpus(Corpus::Fig1Inputs).into_iter().enumerate() {
        let noise = (params.device.read_noise_sigma > 0.0).then_some(ReadNoise {
            seed: cfg.seed,
            cycle: i as u64,
        });
        let raw = array.vmm_raw(&input, noise)?;
        let out = subtract(&raw, &input, &params.subtraction, r);
        for (d, t) in targets.iter().enumerate() {
            let hamming = input.bits().iter().zip(t.bits()).filter(|(a, b)| a != b).count();
            rows.push(VmmRow {
                input: input.clone(),
                dendrite: d,
                target: t.clone(),
                raw: raw[d],
                output: out[d],
                bin: hamming_from_output(out[d], t.ones(), weight, input.len()),
                hamming,
            });
        }
    }
    Ok(VmmReport { rows })
}

/// Clustering network with every row programmed to `cfg.cluster_init`.
pub fn clustering_network(cfg: &RunConfig, seed: u64) -> Result<Network> {
    let params = cfg.network_params(NeuronParams::default().theta0)?;
    let n_in = cfg.cluster_init.len();
    let mut net = Network::new(cfg.n_out, n_in, cfg.replicas, params, seed)?;
    for row in 0..cfg.n_out {
        net.array_mut().program(row, &cfg.cluster_init)?;
    }
    Ok(net)
}

/// One clustering run on the built-in image pair; `seed` keys both the
/// learning draws and the presentation order.
pub fn cluster_run(cfg: &RunConfig, seed: u64) -> Result<(Network, ClusteringRun)> {
    let images = builtin_corpus(Corpus::Fig3Inputs);
    let mut net = clustering_network(cfg, seed)?;
    let run = net.run_clustering(&images, seed, cfg.max_presentations, cfg.max_cycles)?;
    Ok((net, run))
}

/// Pulse outcome symbols for the winner's row: `+` switched, `x` attempted
/// without switching, `.` no attempt. Replicas of a column are adjacent.
pub fn pulse_symbols(run_record: &crate::network::PresentationRecord, n_in: usize, r: usize) -> String {
    let mut grid = vec!['.'; n_in * r];
    if let Some(stdp) = &run_record.result.stdp {
        for e in &stdp.events {
            grid[e.col * r + e.replica] = match e.outcome {
                PulseOutcome::Switched => '+',
                PulseOutcome::AttemptedNoSwitch => 'x',
                PulseOutcome::NoAttempt => '.',
            };
        }
    }
    grid.into_iter().collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterSingle {
    pub seed: u64,
    pub n_in: usize,
    pub replicas: usize,
    pub run: ClusteringRun,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterMonteCarlo {
    pub first_seed: u64,
    /// Presentations used per seed, `None` when the run hit the cap.
    pub outcomes: Vec<Option<usize>>,
    pub max_presentations: usize,
}

impl ClusterMonteCarlo {
    pub fn converged(&self) -> usize {
        self.outcomes.iter().flatten().count()
    }

    pub fn fraction(&self) -> f64 {
        self.converged() as f64 / self.outcomes.len() as f64
    }

    /// Median presentations over converged runs (lower median).
    pub fn median(&self) -> Option<usize> {
        let mut v: Vec<usize> = self.outcomes.iter().flatten().copied().collect();
        v.sort_unstable();
        (!v.is_empty()).then(|| v[(v.len() - 1) / 2])
    }

    pub fn max(&self) -> Option<usize> {
        self.outcomes.iter().flatten().copied().max()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ClusterReport {
    Single(ClusterSingle),
    MonteCarlo(ClusterMonteCarlo),
}

impl ClusterReport {
    pub fn passed(&self) -> bool {
        match self {
            ClusterReport::Single(s) => s.run.converged,
            ClusterReport::MonteCarlo(m) => m.fraction() >= CLUSTER_PASS_FRACTION,
        }
    }

    pub fn write_text(&self, out: &mut dyn Write) -> io::Result<()> {
        match self {
            ClusterReport::Single(s) => {
                writeln!(out, "legend: + switched, x attempted without switching, . no attempt")?;
                writeln!(out, "{:>4}  {:>5}  {:>6}  {:>6}  {:<8}  rows after", "#", "image", "winner", "cycles", "pulses")?;
                for rec in &s.run.log {
                    let winner = rec.result.winner.map_or("-".to_string(), |w| format!("n{w}"));
                    let rows: Vec<String> = rec.rows_after.iter().map(|r| r.to_string()).collect();
                    writeln!(
                        out,
                        "{:>4}  {:>5}  {:>6}  {:>6}  {:<8}  {}",
                        rec.presentation,
                        rec.image.to_string(),
                        winner,
                        rec.result.cycles_elapsed,
                        pulse_symbols(rec, s.n_in, s.replicas),
                        rows.join(" ")
                    )?;
                }
                let failed = s.run.attempted() - s.run.switched();
                if s.run.converged {
                    writeln!(
                        out,
                        "seed {}: converged after {} presentations; {} switched, {} failed attempts",
                        s.seed,
                        s.run.presentations_used,
                        s.run.switched(),
                        failed
                    )
                } else {
                    writeln!(
                        out,
                        "seed {}: NOT converged after {} presentations; {} switched, {} failed attempts",
                        s.seed,
                        s.run.presentations_used,
                        s.run.switched(),
                        failed
                    )
                }
            }
            ClusterReport::MonteCarlo(m) => {
                let fmt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
                writeln!(
                    out,
                    "seeds {}..{}: {} of {} converged within {} presentations ({:.1}%), median {}, max {}",
                    m.first_seed,
                    m.first_seed + m.outcomes.len() as u64 - 1,
                    m.converged(),
                    m.outcomes.len(),
                    m.max_presentations,
                    100.0 * m.fraction(),
                    fmt(m.median()),
                    fmt(m.max())
                )
            }
        }
    }

    pub fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        match self {
            ClusterReport::Single(s) => {
                for rec in &s.run.log {
                    write_json(
                        out,
                        &json!({
                            "record": "presentation",
                            "presentation": rec.presentation,
                            "image": rec.image.to_string(),
                            "winner": rec.result.winner,
                            "cycles": rec.result.cycles_elapsed,
                            "pulses": pulse_symbols(rec, s.n_in, s.replicas),
                            "switched": rec.result.switched(),
                            "failed": rec.result.attempted() - rec.result.switched(),
                            "rows": rec.rows_after.iter().map(|r| r.to_string()).collect::<Vec<_>>(),
                        }),
                    )?;
                }
                write_json(
                    out,
                    &json!({
                        "record": "summary",
                        "seed": s.seed,
                        "converged": s.run.converged,
                        "presentations": s.run.presentations_used,
                        "switched": s.run.switched(),
                        "failed": s.run.attempted() - s.run.switched(),
                    }),
                )
            }
            ClusterReport::MonteCarlo(m) => write_json(
                out,
                &json!({
                    "record": "summary",
                    "first_seed": m.first_seed,
                    "runs": m.outcomes.len(),
                    "converged": m.converged(),
                    "fraction": m.fraction(),
                    "median": m.median(),
                    "max": m.max(),
                    "max_presentations": m.max_presentations,
                }),
            ),
        }
    }
}

/// A single logged run for `runs = 1`, otherwise convergence statistics
/// over seeds `seed .. seed + runs`.
pub fn cluster_demo(cfg: &RunConfig) -> Result<ClusterReport> {
    cfg.validate()?;
    if cfg.runs == 1 {
        let (_, run) = cluster_run(cfg, cfg.seed)?;
        return Ok(ClusterReport::Single(ClusterSingle {
            seed: cfg.seed,
            n_in: cfg.cluster_init.len(),
            replicas: cfg.replicas,
            run,
        }));
    }
    let outcomes = (0..cfg.runs as u64)
        .into_par_iter()
        .map(|k| {
            let (_, run) = cluster_run(cfg, cfg.seed.wrapping_add(k))?;
            Ok(run.converged.then_some(run.presentations_used))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ClusterReport::MonteCarlo(ClusterMonteCarlo {
        first_seed: cfg.seed,
        outcomes,
        max_presentations: cfg.max_presentations,
    }))
}

/// P5 gray map of one row: pixel value is the number of parallel replicas,
/// `maxval` is the replica count.
pub fn weight_map_pgm(array: &SynapseArray, row: usize, width: usize, height: usize) -> Result<Vec<u8>> {
    if width * height != array.n_in() {
        return Err(Error::argument(format!(
            "{width}x{height} map for {} inputs",
            array.n_in()
        )));
    }
    if array.replicas() > 255 {
        return Err(Error::argument("weight maps support at most 255 replicas"));
    }
    let mut out = format!("P5\n{width} {height}\n{}\n", array.replicas()).into_bytes();
    for col in 0..array.n_in() {
        out.push(array.p_count(row, col)? as u8);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainEvalReport {
    pub theta0: f64,
    pub mean_active: f64,
    pub train: TrainReport,
    pub labels: NeuronLabels,
    pub evaluation: Evaluation,
    pub snapshot_path: PathBuf,
    pub metrics_path: PathBuf,
}

impl TrainEvalReport {
    pub fn write_text(&self, out: &mut dyn Write) -> io::Result<()> {
        writeln!(out, "theta0            {:.4}", self.theta0)?;
        writeln!(out, "images trained    {}", self.train.presentations)?;
        writeln!(out, "timeouts          {}", self.train.timeouts)?;
        writeln!(out, "switch events     {} of {} attempts", self.train.switched, self.train.attempted)?;
        writeln!(out, "fire entropy      {:.3} bits", self.train.fire_entropy())?;
        writeln!(out, "labeled neurons   {} of {}", self.labels.assigned(), self.labels.len())?;
        writeln!(
            out,
            "test accuracy     {:.4} ({} of {})",
            self.evaluation.accuracy, self.evaluation.correct, self.evaluation.total
        )?;
        writeln!(out, "snapshot          {}", self.snapshot_path.display())?;
        writeln!(out, "metrics           {}", self.metrics_path.display())
    }

    pub fn write_json(&self, out: &mut dyn Write) -> io::Result<()> {
        write_json(out, &final_record(&self.train, &self.labels, &self.evaluation))
    }
}

fn labels_json(labels: &NeuronLabels) -> Value {
    Value::from(labels.as_slice().iter().map(|l| l.map(i64::from)).collect::<Vec<_>>())
}

fn final_record(train: &TrainReport, labels: &NeuronLabels, ev: &Evaluation) -> Value {
    json!({
        "record": "final",
        "images": train.presentations,
        "accuracy": ev.accuracy,
        "correct": ev.correct,
        "total": ev.total,
        "timeouts": train.timeouts,
        "switched": train.switched,
        "attempted": train.attempted,
        "fire_entropy": train.fire_entropy(),
        "assigned": labels.assigned(),
        "labels": labels_json(labels),
        "confusion": ev.confusion,
    })
}

fn load_split(images: &Path, labels: &Path, limit: Option<usize>) -> Result<LabeledDataset> {
    let ds = load_idx(images, labels)?;
    Ok(match limit {
        Some(n) => ds.truncated(n),
        None => ds,
    })
}

/// Train on MNIST, label neurons on the training set, evaluate on the test
/// set. Writes the snapshot, `metrics.jsonl` and, if enabled, one PGM
/// weight map per neuron into `out_dir`. `progress` receives a line per
/// checkpoint.
pub fn train_eval(cfg: &RunConfig, out_dir: &Path, progress: &mut dyn Write) -> Result<TrainEvalReport> {
    cfg.validate()?;
    let [tri, trl, tei, tel] = cfg.dataset_paths();
    let train = load_split(&tri, &trl, cfg.train_limit)?;
    let test = load_split(&tei, &tel, cfg.test_limit)?;
    if (train.width, train.height) != (test.width, test.height) {
        return Err(Error::argument(format!(
            "train images are {}x{}, test images {}x{}",
            train.width, train.height, test.width, test.height
        )));
    }
    if train.is_empty() || test.is_empty() {
        return Err(Error::argument("training and test sets must be non-empty"));
    }
    let xtr = train.binarized(cfg.binarize_threshold);
    let xte = test.binarized(cfg.binarize_threshold);
    let mean_active = xtr.iter().map(|x| x.ones() as f64).sum::<f64>() / xtr.len() as f64;
    let auto_theta0 = NeuronParams::scaled_theta0(mean_active, cfg.replicas, cfg.g_ap, cfg.ratio_rho);
    let params = cfg.network_params(auto_theta0)?;
    let n_in = train.width * train.height;
    let mut net = Network::init_random(cfg.n_out, n_in, cfg.replicas, params, cfg.seed)?;

    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let metrics_path = out_dir.join(METRICS_FILE);
    let file = fs::File::create(&metrics_path).map_err(|e| Error::io(&metrics_path, e))?;
    let mut metrics = BufWriter::new(file);
    let io_err = |e: io::Error| Error::io(&metrics_path, e);

    // Thread count is an execution detail and is left out so records
    // compare equal across pools.
    let settings: serde_json::Map<String, Value> = cfg
        .entries()
        .into_iter()
        .filter(|(k, _)| *k != "threads")
        .map(|(k, v)| (k.to_string(), Value::from(v)))
        .collect();
    let np = &params.neuron;
    write_json(
        &mut metrics,
        &json!({
            "record": "config",
            "command": Command::TrainEval.name(),
            "settings": settings,
            "train_images": train.len(),
            "test_images": test.len(),
            "n_in": n_in,
            "mean_active": mean_active,
            "theta0": np.theta0,
            "homeo_bump": np.homeo_bump,
            "threshold_floor": np.threshold_floor,
            "subtraction": params.subtraction.s,
        }),
    )
    .map_err(io_err)?;

    let opts = TrainOptions {
        epochs: cfg.epochs,
        max_cycles: cfg.max_cycles,
        shuffle_seed: cfg.shuffle.then_some(cfg.seed),
    };
    let mut last = TrainReport::new(cfg.n_out);
    let every = cfg.metrics_every as u64;
    let report = if cfg.epochs == 0 {
        TrainReport::new(cfg.n_out)
    } else {
        net.train(&xtr, &opts, |net, rep| {
            if rep.presentations % every != 0 {
                return Ok(());
            }
            let labels = net.label_neurons(&xtr, &train.labels, cfg.max_cycles)?;
            let ev = net.evaluate(&labels, &xte, &test.labels, cfg.max_cycles)?;
            let window = (rep.presentations - last.presentations) as f64;
            let record = json!({
                "record": "checkpoint",
                "images": rep.presentations,
                "accuracy": ev.accuracy,
                "fire_entropy": rep.fire_entropy(),
                "switch_rate": (rep.switched - last.switched) as f64 / window,
                "attempt_rate": (rep.attempted - last.attempted) as f64 / window,
                "timeouts": rep.timeouts - last.timeouts,
                "assigned": labels.assigned(),
                "labels": labels_json(&labels),
            });
            write_json(&mut metrics, &record).map_err(io_err)?;
            writeln!(
                progress,
                "{:>8} images  accuracy {:.4}  entropy {:.3}  switches/image {:.2}  timeouts {}",
                rep.presentations,
                ev.accuracy,
                rep.fire_entropy(),
                (rep.switched - last.switched) as f64 / window,
                rep.timeouts - last.timeouts
            )
            .map_err(|e| Error::io("<progress>", e))?;
            last = rep.clone();
            Ok(())
        })?
    };

    let labels = net.label_neurons(&xtr, &train.labels, cfg.max_cycles)?;
    let evaluation = net.evaluate(&labels, &xte, &test.labels, cfg.max_cycles)?;
    write_json(&mut metrics, &final_record(&report, &labels, &evaluation)).map_err(io_err)?;
    metrics.flush().map_err(io_err)?;

    let snapshot_path = out_dir.join(SNAPSHOT_FILE);
    fs::write(&snapshot_path, snapshot::save(&net)).map_err(|e| Error::io(&snapshot_path, e))?;

    if cfg.weight_maps {
        let dir = out_dir.join(WEIGHTS_DIR);
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for row in 0..net.n_out() {
            let path = dir.join(format!("neuron_{row:05}.pgm"));
            let pgm = weight_map_pgm(net.array(), row, train.width, train.height)?;
            fs::write(&path, pgm).map_err(|e| Error::io(&path, e))?;
        }
    }

    Ok(TrainEvalReport {
        theta0: params.neuron.theta0,
        mean_active,
        train: report,
        labels,
        evaluation,
        snapshot_path,
        metrics_path,
    })
}
