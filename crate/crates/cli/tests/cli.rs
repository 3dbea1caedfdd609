use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_hawkes-dt"));
    c.env("HAWKES_DT_LOG", "error");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn summary(o: &Output) -> Value {
    let text = String::from_utf8(o.stdout.clone()).unwrap();
    let line = text.lines().last().expect("a summary line");
    serde_json::from_str(line).expect("summary is JSON")
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    let oa = run(&["simulate-dthp", "--seed", "9", "--out", path_str(&a)]);
    let ob = run(&["simulate-dthp", "--seed", "9", "--out", path_str(&b)]);
    run(&["simulate-dthp", "--seed", "10", "--out", path_str(&c)]);
    assert_eq!(code(&oa), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
    let (sa, sb) = (summary(&oa), summary(&ob));
    assert_eq!(sa["seed"], 9);
    assert_eq!(sa["config_digest"], sb["config_digest"]);
    assert_eq!(sa["config_digest"].as_str().unwrap().len(), 16);
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text.lines().next(), Some("t,lambda,xi,L,jump"));
    assert_eq!(text.lines().count(), 10_002);
}

#[test]
fn invalid_config_leaves_no_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("traj.csv");
    let cfg = dir.path().join("cfg.json");
    let cases = [
        r#"{"params": {"kernel": "exp", "alpha": 6, "beta": 5, "lambda_inf": 3, "x0": 4, "marks": {"type": "exponential", "rate": 1}}}"#,
        r#"{"params": {"kernel": "exp", "alpha": 2, "beta": 5, "lambda_inf": 3, "x0": 4, "marks": {"type": "exponential", "rate": 1}}, "colour": 1}"#,
        r#"{"params": {"kernel": "exp", "alpha": 2, "beta": 5, "lambda_inf": 3, "x0": 4, "marks": {"type": "exponential", "rate": 1}}, "steps": 0}"#,
        r#"{"params": "#,
    ];
    for text in cases {
        std::fs::write(&cfg, text).unwrap();
        for cmd in [
            "simulate-dthp",
            "simulate-exact",
            "check-convergence",
            "check-generator",
        ] {
            let o = run(&[cmd, "--config", path_str(&cfg), "--out", path_str(&out)]);
            assert_eq!(code(&o), 2, "{cmd} with {text}");
            assert!(!out.exists(), "{cmd} wrote output for {text}");
            assert!(!o.stderr.is_empty());
        }
    }
    for args in [
        vec!["simulate-dthp", "--param", "beta=-1"],
        vec!["simulate-dthp", "--param", "gamma=1"],
        vec!["simulate-dthp", "--jobs", "0"],
        vec!["check-generator", "--param", r#"functions=["nope"]"#],
        vec![
            "check-generator",
            "--param",
            "kernel=erlang",
            "--param",
            r#"functions=["bump_mid"]"#,
        ],
    ] {
        let mut full = args.clone();
        full.extend(["--out", path_str(&out)]);
        assert_eq!(code(&run(&full)), 2, "{args:?}");
        assert!(!out.exists());
    }
    assert_eq!(code(&run(&["simulate-dthp"])), 2, "missing --out");
    assert_eq!(code(&run(&["frobnicate"])), 2);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("missing").join("x.csv");
    for cmd in ["simulate-dthp", "simulate-exact", "reproduce-fig4"] {
        assert_eq!(code(&run(&[cmd, "--out", path_str(&bad)])), 3, "{cmd}");
    }
    let o = run(&[
        "check-generator",
        "--param",
        r#"functions=["zero"]"#,
        "--out",
        path_str(&bad),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn no_excitation_trajectory_has_no_jumps() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.csv");
    let o = run(&[
        "simulate-dthp",
        "--param",
        "alpha=0",
        "--param",
        "horizon=3",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
    // Poisson arrivals still accumulate loss.
    assert!(summary(&o)["events"].as_u64().unwrap() > 0);
}

#[test]
fn exact_events_are_ordered_and_dispatched() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("ev.csv");
    let states = dir.path().join("st.csv");
    let o = run(&[
        "simulate-exact",
        "--param",
        "horizon=5",
        "--param",
        "steps=500",
        "--out",
        path_str(&events),
        "--states",
        path_str(&states),
    ]);
    assert_eq!(code(&o), 0);
    let s = summary(&o);
    assert_eq!(s["sampler"], "exact");
    let text = std::fs::read_to_string(&events).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("theta,mark"));
    let thetas: Vec<f64> = lines
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(thetas.len() as u64, s["events"].as_u64().unwrap());
    assert!(thetas.len() > 5);
    assert!(thetas.windows(2).all(|w| w[0] < w[1]));
    let st = std::fs::read_to_string(&states).unwrap();
    assert_eq!(st.lines().count(), 502);

    let o = run(&[
        "simulate-exact",
        "--param",
        "kernel=erlang",
        "--param",
        r#"marks={"type":"constant","value":1}"#,
        "--out",
        path_str(&events),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(summary(&o)["sampler"], "thinning");
    assert_eq!(summary(&o)["kernel"], "erlang");
}

#[test]
fn poisson_event_counts_over_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ev.csv");
    let counts: Vec<f64> = (0..400u64)
        .map(|seed| {
            let seed = seed.to_string();
            let o = run(&[
                "simulate-exact",
                "--seed",
                &seed,
                "--param",
                "alpha=0",
                "--param",
                "lambda_inf=3",
                "--param",
                "x0=3",
                "--param",
                "horizon=2",
                "--out",
                path_str(&out),
            ]);
            assert_eq!(code(&o), 0);
            summary(&o)["events"].as_f64().unwrap()
        })
        .collect();
    let n = counts.len() as f64;
    let mean = counts.iter().sum::<f64>() / n;
    let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
    assert!((mean - 6.0).abs() <= 4.0 * (var / n).sqrt(), "mean {mean}");
}

#[test]
fn generator_check_reports_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gen.json");
    let o = run(&[
        "check-generator",
        "--param",
        "kernel=erlang",
        "--param",
        r#"marks={"type":"constant","value":1}"#,
        "--param",
        r#"functions=["tensor_mid","zero"]"#,
        "--param",
        "n_list=[100,1000]",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    let fns = report["functions"].as_array().unwrap();
    let mid = &fns[0]["rows"];
    assert!(
        mid[1]["sup_norm_error"].as_f64().unwrap() < mid[0]["sup_norm_error"].as_f64().unwrap()
    );
    assert!(mid[0]["argmax_v"].is_number());
    for row in fns[1]["rows"].as_array().unwrap() {
        assert_eq!(row["sup_norm_error"].as_f64(), Some(0.0));
    }
}

#[test]
fn generator_check_fails_when_norms_stall() {
    // A repeated grid size reproduces the same norm, which is not a decrease.
    let o = run(&[
        "check-generator",
        "--param",
        r#"functions=["bump_narrow"]"#,
        "--param",
        "n_list=[1000,1000]",
    ]);
    assert_eq!(code(&o), 4);
    assert_eq!(summary(&o)["passed"], false);
}

#[test]
fn convergence_check_without_excitation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("conv.csv");
    let o = run(&[
        "check-convergence",
        "--param",
        "alpha=0",
        "--param",
        "paths=500",
        "--jobs",
        "2",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code(&o), 0);
    let s = summary(&o);
    let rows = s["reports"][0]["rows"].as_array().unwrap();
    assert!(rows.last().unwrap()["wasserstein1"].as_f64().unwrap() < 1e-10);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("coordinate,t,N,h,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn convergence_check_rejects_a_mismatched_oracle() {
    let o = run(&[
        "check-convergence",
        "--param",
        "oracle_params.beta=6",
        "--param",
        "paths=2000",
        "--param",
        "n_list=[10,100]",
    ]);
    assert_eq!(code(&o), 4);
    let s = summary(&o);
    assert_eq!(s["passed"], false);
    assert!(s["reports"][0]["rows"][1]["ks_pvalue"].as_f64().unwrap() <= 0.01);
}

#[test]
fn figure_reproduction_documents_its_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig.csv");
    let o = run(&["reproduce-fig4", "--out", path_str(&out)]);
    assert_eq!(code(&o), 0);
    let s = summary(&o);
    assert_eq!(s["horizon"], 5.0);
    assert_eq!(s["steps"], 100_000);
    assert!(s["note"].as_str().unwrap().contains("T defaults to 5"));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 100_002);
    let last: Vec<&str> = text.lines().last().unwrap().split(',').collect();
    assert_eq!(last[0].parse::<f64>().unwrap(), 5.0);
    assert_eq!(
        last[3].parse::<f64>().unwrap(),
        s["final_loss"].as_f64().unwrap()
    );
}
