use std::path::Path;
use std::process::{Command, Output};

use mtj_snn::data::{GrayImage, LabeledDataset};
use serde_json::Value;

fn mtj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtj-snn"))
        .args(args)
        .output()
        .expect("run mtj-snn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json_lines(o: &Output) -> Vec<Value> {
    stdout(o).lines().map(|l| serde_json::from_str(l).unwrap()).collect()
}

#[test]
fn vmm_demo_ideal_passes() {
    let o = mtj(&["vmm-demo"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("32 of 32 bins correct"));
    let o = mtj(&["vmm-demo", "--json"]);
    let recs = json_lines(&o);
    assert_eq!(recs.len(), 33);
    let r = recs
        .iter()
        .find(|r| r["input"] == "1001" && r["dendrite"] == 1)
        .unwrap();
    assert!((r["output"].as_f64().unwrap() - 0.9).abs() < 1e-12);
}

#[test]
fn vmm_demo_heavy_noise_exits_unmet() {
    let o = mtj(&["vmm-demo", "--set", "read_noise_sigma=0.5", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let summary = json_lines(&o).pop().unwrap();
    assert!(summary["wrong"].as_u64().unwrap() > 0);
}

#[test]
fn config_errors_exit_two() {
    let o = mtj(&["vmm-demo", "--set", "ratio_rhoo=2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));

    let o = mtj(&["cluster-demo", "--set", "p_pot=1.5"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("(device)"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "# ok\nseed = 3\nleak_alphaa = 0.1\n").unwrap();
    let o = mtj(&["vmm-demo", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("run.cfg:3"));

    assert_eq!(mtj(&["no-such-command"]).status.code(), Some(2));
}

#[test]
fn missing_files_exit_three() {
    let o = mtj(&["vmm-demo", "--config", "/nonexistent/run.cfg"]);
    assert_eq!(o.status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let o = mtj(&[
        "train-eval",
        "--set",
        "mnist_dir=/nonexistent",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn print_config_round_trips() {
    let o = mtj(&["print-config", "train-eval", "--set", "n_out=17"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("n_out = 17\n") && text.contains("p_pot = 0.01\n"));
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("printed.cfg");
    std::fs::write(&cfg, &text).unwrap();
    let again = mtj(&["print-config", "vmm-demo", "--config", cfg.to_str().unwrap()]);
    assert_eq!(stdout(&again), text);
}

/// Replay of the reference clustering run: nine presentations,
/// four switches, six failed attempts, first neuron ends on 0110.
#[test]
fn cluster_demo_documented_seed() {
    let o = mtj(&["cluster-demo", "--seed", "143", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let recs = json_lines(&o);
    let summary = recs.last().unwrap();
    assert_eq!(summary["converged"], true);
    assert_eq!(summary["presentations"], 9);
    assert_eq!(summary["switched"], 4);
    assert_eq!(summary["failed"], 6);
    let last = &recs[recs.len() - 2];
    assert_eq!(last["rows"], serde_json::json!(["0110", "1001"]));
    let text = stdout(&mtj(&["cluster-demo", "--seed", "143"]));
    assert!(text.contains("converged after 9 presentations; 4 switched, 6 failed attempts"));
}

#[test]
fn cluster_demo_without_switching_never_converges() {
    let o = mtj(&["cluster-demo", "--set", "p_pot=0", "--set", "p_dep=0", "--json"]);
    assert_eq!(o.status.code(), Some(1));
    let summary = json_lines(&o).pop().unwrap();
    assert_eq!(summary["converged"], false);
    assert_eq!(summary["presentations"], 200);
}

#[test]
fn cluster_demo_monte_carlo() {
    let o = mtj(&["cluster-demo", "--runs", "200", "--threads", "2", "--json"]);
    assert_eq!(o.status.code(), Some(0));
    let s = json_lines(&o).pop().unwrap();
    assert_eq!(s["runs"], 200);
    assert!(s["fraction"].as_f64().unwrap() >= 0.95);
}

/// Two classes of 4x4 images: a left bar and a right bar, with noise.
fn write_toy_dataset(dir: &Path, n: usize, prefix: &str) {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n {
        let class = (i % 2) as u8;
        let pixels = (0..16)
            .map(|p| {
                let col = p % 4;
                let on = if class == 0 { col < 2 } else { col >= 2 };
                let jitter = ((i * 7 + p * 13) % 50) as u8;
                if on {
                    200 + jitter
                } else {
                    jitter
                }
            })
            .collect();
        images.push(GrayImage::new(4, 4, pixels).unwrap());
        labels.push(class);
    }
    let ds = LabeledDataset {
        name: prefix.to_string(),
        width: 4,
        height: 4,
        images,
        labels,
    };
    let (ib, lb) = ds.to_idx_bytes();
    std::fs::write(dir.join(format!("{prefix}-images-idx3-ubyte")), ib).unwrap();
    std::fs::write(dir.join(format!("{prefix}-labels-idx1-ubyte")), lb).unwrap();
}

#[test]
fn train_eval_writes_outputs_deterministically() {
    let data = tempfile::tempdir().unwrap();
    write_toy_dataset(data.path(), 200, "train");
    write_toy_dataset(data.path(), 50, "t10k");
    let run = |out: &Path, threads: &str| {
        let o = mtj(&[
            "train-eval",
            "--set",
            &format!("mnist_dir={}", data.path().display()),
            "--set",
            "n_out=4",
            "--set",
            "replicas=3",
            "--set",
            "p_pot=0.2",
            "--set",
            "p_dep=0.2",
            "--set",
            "metrics_every=50",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
            "--json",
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        json_lines(&o).pop().unwrap()
    };
    let out = tempfile::tempdir().unwrap();
    let (a, b) = (out.path().join("a"), out.path().join("b"));
    let fin = run(&a, "1");
    run(&b, "3");
    assert!(fin["accuracy"].as_f64().unwrap() > 0.9, "{fin}");

    for f in ["snapshot.mtjsnn", "metrics.jsonl", "weights/neuron_00003.pgm"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let metrics = std::fs::read_to_string(a.join("metrics.jsonl")).unwrap();
    let recs: Vec<Value> = metrics.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs[0]["record"], "config");
    assert!(recs[0]["theta0"].as_f64().unwrap() > 0.0);
    assert_eq!(recs.iter().filter(|r| r["record"] == "checkpoint").count(), 4);
    assert_eq!(recs.last().unwrap()["record"], "final");

    let pgm = std::fs::read(a.join("weights/neuron_00000.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n4 4\n3\n"));
    assert_eq!(pgm.len(), 9 + 16);
    assert!(pgm[9..].iter().all(|&v| v <= 3));
}
