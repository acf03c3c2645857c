use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn decoh(args: &[&str], envs: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_decoh"));
    cmd.args(args).env_remove("DECOH_OUTPUT_DIR");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn cap_check_matches_prediction() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cap.csv");
    let o = decoh(
        &["cap-check", "--n", "5", "--epsilon", "0.3", "--trials", "1000000", "--seed", "1",
          "--tolerance", "0.0015", "--output", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# experiment=cap-check\n# seed=1\n"));
    let lines = data_lines(&text);
    let header: Vec<&str> = lines[0].split(',').collect();
    let row: Vec<&str> = lines[1].split(',').collect();
    let col = |k: &str| row[header.iter().position(|h| *h == k).unwrap()].parse::<f64>().unwrap();
    assert!((col("estimate") - 0.68575).abs() < 0.0015);
    assert!((col("prediction") - 0.685_749_61).abs() < 1e-8);
    assert!(String::from_utf8_lossy(&o.stdout).contains("max deviation"));
}

#[test]
fn eta_mean_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut texts = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("eta{k}.csv"));
        let o = decoh(
            &["eta-mean", "--n", "10", "--d-range", "2:100:log", "--trials", "1000", "--seed", "42",
              "--output", out.to_str().unwrap()],
            &[],
        );
        assert!(o.status.success());
        texts.push(fs::read(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    let text = String::from_utf8(texts.remove(0)).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines[0], "n,d,trials,estimate,std_error,prediction,seed");
    assert!(lines.len() > 10);
}

#[test]
fn dmax_rows_carry_analytic_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("dmax.csv");
    let plot = dir.path().join("dmax.plot.csv");
    let o = decoh(
        &["dmax", "--n-range", "2:12", "--epsilon", "0.4", "--s", "0.9", "--trials", "2000", "--seed", "7",
          "--tolerance", "2", "--output", out.to_str().unwrap(), "--plot", plot.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let text = fs::read_to_string(&out).unwrap();
    let lines = data_lines(&text);
    assert_eq!(lines.len(), 12);
    assert!(lines[0].contains("prediction") && lines[0].contains("asymptotic"));
    let plot_text = fs::read_to_string(&plot).unwrap();
    assert_eq!(plot_text.lines().next().unwrap(), "n,estimate,prediction");
    assert_eq!(plot_text.lines().count(), 12);
}

#[test]
fn impossible_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let o = decoh(
        &["cap-check", "--n", "3", "--epsilon", "0.5", "--trials", "500", "--tolerance", "0",
          "--output", out.to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(out.exists());
}

#[test]
fn bad_config_names_the_key() {
    let o = decoh(&["cap-check", "--n", "3", "--epsilon", "1.5"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`epsilon`"));
    let o = decoh(&["dmax", "--n", "3", "--epsilon", "0.4"], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("`s`"));
}

#[test]
fn config_file_and_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.conf");
    fs::write(&cfg, "experiment = entropy-check\nseed = 5\n").unwrap();
    let o = decoh(&["run", "--config", cfg.to_str().unwrap()], &[("DECOH_OUTPUT_DIR", dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("entropy-check.csv")).unwrap();
    assert_eq!(data_lines(&text).len(), 39);

    fs::write(&cfg, "n = 3\nepsilon = 0.2\ntrials = 200\n").unwrap();
    let out = dir.path().join("flags-win.csv");
    let o = decoh(
        &["cap-check", "--config", cfg.to_str().unwrap(), "--n", "4", "--output", out.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("# n=4\n"));
}

#[test]
fn other_experiments_run() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["eta-tilde", "--d", "8", "--trials", "50", "--tolerance", "0.1"],
        &["interaction", "--p", "3", "--N", "3", "--trials", "3", "--tolerance", "0.2"],
        &["brownian-mixing", "--n", "3", "--trials", "2000", "--seed", "9"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let out = dir.path().join(format!("{k}.csv"));
        let mut a = args.to_vec();
        a.extend(["--output", out.to_str().unwrap()]);
        let o = decoh(&a, &[]);
        assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stdout));
    }
}
