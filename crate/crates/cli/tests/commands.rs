use std::fs;
use std::path::Path;

use dpcrm_cli::run;

fn args(list: &[&str]) -> Vec<String> {
    std::iter::once("dpcrm")
        .chain(list.iter().copied())
        .map(String::from)
        .collect()
}

fn run_ok(list: &[&str]) {
    assert_eq!(run(args(list)), 0, "command failed: {list:?}");
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

#[test]
fn single_observation_gives_one_cluster() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    run_ok(&[
        "sample",
        "--model",
        "gbfry",
        "--sigma",
        "0.2",
        "--tau",
        "3",
        "--eta",
        "40",
        "--n",
        "1",
        "--out",
        p(&out),
    ]);
    let counts = fs::read_to_string(out.join("counts.csv")).unwrap();
    let lines: Vec<_> = counts.lines().collect();
    assert_eq!(lines, vec!["item,count", "1,1"]);
    for f in [
        "spectrum.csv",
        "rank.csv",
        "spectrum.svg",
        "rank.svg",
        "summary.json",
        "manifest.json",
    ] {
        assert!(out.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn same_seed_reproduces_every_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s");
    let cmd = [
        "sample",
        "--model",
        "bp",
        "--sigma",
        "0.3",
        "--tau",
        "2",
        "--eta",
        "200",
        "--n",
        "5000",
        "--seed",
        "9",
        "--out",
        p(&out),
    ];
    run_ok(&cmd);
    let names = [
        "counts.csv",
        "spectrum.csv",
        "rank.csv",
        "spectrum.svg",
        "rank.svg",
        "summary.json",
        "manifest.json",
    ];
    let first: Vec<_> = names.iter().map(|f| read(&out.join(f))).collect();
    run_ok(&cmd);
    for (f, bytes) in names.iter().zip(&first) {
        assert_eq!(&read(&out.join(f)), bytes, "{f} differs");
    }
    let other = dir.path().join("t");
    let mut cmd2 = cmd.to_vec();
    cmd2[12] = "10";
    cmd2[14] = p(&other);
    run_ok(&cmd2);
    assert_ne!(read(&other.join("counts.csv")), first[0]);
}

#[test]
fn config_file_supplies_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    let out = dir.path().join("s");
    fs::write(
        &cfg,
        format!(
            "model = \"mixture\"\nsigma = 0.4\neta = 50.0\nmixture_beta = 5.0\ntail = \"pareto:1:1.5\"\nn = 300\nout = \"{}\"\nno_plots = true\n",
            p(&out)
        ),
    )
    .unwrap();
    run_ok(&["sample", "--config", p(&cfg), "--seed", "4"]);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n"], 300);
    assert_eq!(summary["config"]["seed"], 4);
    assert_eq!(summary["config"]["model"]["family"], "mixture");
    assert!(!out.join("spectrum.svg").exists());
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    // Invalid parameters.
    assert_eq!(
        run(args(&[
            "sample",
            "--model",
            "gbfry",
            "--sigma",
            "1.2",
            "--tau",
            "2",
            "--n",
            "5",
            "--out",
            p(&out)
        ])),
        2
    );
    // Unknown flag.
    assert_eq!(run(args(&["sample", "--bogus"])), 2);
    // Missing data file.
    assert_eq!(
        run(args(&[
            "fit",
            "--data",
            p(&dir.path().join("none.txt")),
            "--model",
            "ggp",
            "--out",
            p(&out)
        ])),
        4
    );
    // Malformed data.
    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "3\nfoo\n").unwrap();
    assert_eq!(
        run(args(&[
            "fit",
            "--data",
            p(&bad),
            "--model",
            "ggp",
            "--out",
            p(&out)
        ])),
        4
    );
    // Missing fit artifacts.
    assert_eq!(
        run(args(&["predict", "--fit", p(&dir.path().join("nofit"))])),
        2
    );
    // Jump budget exhausted under strict truncation.
    assert_eq!(
        run(args(&[
            "sample",
            "--model",
            "stable",
            "--sigma",
            "0.9",
            "--eta",
            "10",
            "--n",
            "10",
            "--max-jumps",
            "100",
            "--out",
            p(&out),
        ])),
        3
    );
}

fn small_fit(dir: &Path, model: &str, name: &str) -> std::path::PathBuf {
    let data = dir.join("data");
    if !data.join("counts.csv").exists() {
        run_ok(&[
            "sample",
            "--model",
            "gbfry",
            "--sigma",
            "0.2",
            "--tau",
            "2",
            "--eta",
            "300",
            "--n",
            "3000",
            "--seed",
            "3",
            "--out",
            p(&data),
            "--no-plots",
        ]);
    }
    let out = dir.join(name);
    run_ok(&[
        "fit",
        "--data",
        p(&data.join("counts.csv")),
        "--model",
        model,
        "--iters",
        "60",
        "--burnin",
        "20",
        "--thin",
        "2",
        "--seed",
        "5",
        "--chains",
        "2",
        "--out",
        p(&out),
    ]);
    out
}

#[test]
fn fit_is_deterministic_and_writes_traces() {
    let dir = tempfile::tempdir().unwrap();
    let a = small_fit(dir.path(), "gbfry", "a");
    let b = small_fit(dir.path(), "gbfry", "b");
    for f in ["trace_0.csv", "trace_1.csv"] {
        assert_eq!(read(&a.join(f)), read(&b.join(f)), "{f} differs");
    }
    assert_ne!(read(&a.join("trace_0.csv")), read(&a.join("trace_1.csv")));
    let trace = fs::read_to_string(a.join("trace_0.csv")).unwrap();
    let mut lines = trace.lines();
    assert_eq!(lines.next(), Some("iter,eta,sigma,tau,u,log_joint"));
    assert_eq!(lines.count(), 20);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["config"]["chain"]["seed"], 5);
    assert_eq!(summary["data"]["n"], 3000);
    let params: Vec<_> = summary["intervals"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| i["param"].as_str().unwrap().to_string())
        .collect();
    assert_eq!(params, ["eta", "sigma", "tau", "u"]);
}

#[test]
fn predict_writes_band_schema_and_report_tabulates() {
    let dir = tempfile::tempdir().unwrap();
    let g = small_fit(dir.path(), "gbfry", "gbfry");
    let py = small_fit(dir.path(), "py", "py");
    for fit in [&g, &py] {
        run_ok(&[
            "predict",
            "--fit",
            p(fit),
            "--replicates",
            "8",
            "--seed",
            "2",
        ]);
        let pred = fit.join("predict");
        for f in ["bands_spectrum.csv", "bands_rank.csv"] {
            let text = fs::read_to_string(pred.join(f)).unwrap();
            let mut lines = text.lines();
            assert_eq!(lines.next(), Some("axis,lower,median,upper"));
            let mut rows = 0;
            for l in lines {
                let v: Vec<f64> = l.split(',').map(|x| x.parse().unwrap()).collect();
                assert_eq!(v.len(), 4);
                assert!(v[1] <= v[2] && v[2] <= v[3], "{f}: {l}");
                rows += 1;
            }
            assert!(rows > 0);
        }
        let svg = fs::read_to_string(pred.join("bands_rank.svg")).unwrap();
        assert!(
            svg.contains(dpcrm_cli::svg::DATA_COLOR) && svg.contains(dpcrm_cli::svg::MODEL_COLOR)
        );
    }
    let rep = dir.path().join("report");
    run_ok(&["report", "--fits", p(&g), p(&py), "--out", p(&rep)]);
    let ks = fs::read_to_string(rep.join("ks_table.csv")).unwrap();
    let rows: Vec<_> = ks.lines().collect();
    assert_eq!(rows[0], "fit,model,n,replicates,ks_reweighted,ks_plain");
    assert!(rows[1].starts_with("gbfry,GBFRY,3000,8,"));
    assert!(rows[2].starts_with("py,PY,3000,8,"));
    let iv = fs::read_to_string(rep.join("intervals.csv")).unwrap();
    assert!(iv.lines().any(|l| l.starts_with("py,PY,alpha,0.95,")));
}

#[test]
fn zero_replicates_gives_empty_bands() {
    let dir = tempfile::tempdir().unwrap();
    let fit = small_fit(dir.path(), "ggp", "ggp");
    let out = dir.path().join("pred0");
    run_ok(&[
        "predict",
        "--fit",
        p(&fit),
        "--replicates",
        "0",
        "--out",
        p(&out),
    ]);
    assert_eq!(
        fs::read_to_string(out.join("bands_rank.csv")).unwrap(),
        "axis,lower,median,upper\n"
    );
    assert_eq!(
        fs::read_to_string(out.join("ks.csv")).unwrap(),
        "model,replicates,ks_reweighted,ks_plain\n"
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["replicates"], 0);
    assert!(summary["ks_reweighted"].is_null());
    assert_eq!(
        run(args(&[
            "predict",
            "--fit",
            p(&fit),
            "--replicates",
            "1",
            "--out",
            p(&out)
        ])),
        2
    );
}
