use std::process::Command;

fn ppoc() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ppoc"))
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = ppoc().args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn gradcheck_exit_status() {
    let (code, stdout, _) = run(&["gradcheck", "--seeds", "2"]);
    assert_eq!(code, 0, "{stdout}");
    assert!(stdout.contains("PASS"));
    let (code, stdout, _) = run(&["gradcheck", "--seeds", "1", "--flip-termination"]);
    assert_eq!(code, 1);
    assert!(stdout.contains("FAIL"));
}

#[test]
fn train_eval_plot() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(
        &cfg,
        "env = icecorridor\nn_options = 3\niterations = 5\nhorizon = 100\nepochs = 1\nhidden = 8\neta = 0.1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    let (code, _, stderr) = run(&[
        "train",
        "--config",
        cfg.to_str().unwrap(),
        "--options",
        "2",
        "--seeds",
        "2",
        "--iterations",
        "2",
        "--set",
        "base_seed=10",
        "--out",
        out_s,
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stderr.contains("seed 11 iter    2"), "{stderr}");
    let resolved = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(resolved.contains("n_options = 2"));
    assert!(resolved.contains("iterations = 2"));
    assert!(resolved.contains("horizon = 100"));
    let log = std::fs::read_to_string(out.join("seed_10.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);

    let ckpt = out.join("seed_10.ckpt");
    let (code, stdout, _) = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--episodes",
        "2",
        "--deterministic",
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("success rate"), "{stdout}");
    let (code, _, stderr) = run(&[
        "eval",
        "--checkpoint",
        ckpt.to_str().unwrap(),
        "--env",
        "pointmass1d",
    ]);
    assert_ne!(code, 0);
    assert!(stderr.contains("pointmass1d"), "{stderr}");

    let svg = dir.path().join("c.svg");
    let summary = out.join("summary.csv");
    let (code, _, stderr) = run(&[
        "plot",
        "--inputs",
        summary.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{stderr}");
    assert!(std::fs::read_to_string(&svg).unwrap().contains("<polyline"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "iteration,return_mean,return_std\n1,oops,0\n").unwrap();
    let (code, _, stderr) = run(&[
        "plot",
        "--inputs",
        bad.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert_ne!(code, 0);
    assert!(
        stderr.contains("bad.csv") && stderr.contains("line 2"),
        "{stderr}"
    );
}

#[test]
fn bad_arguments_fail() {
    let (code, _, stderr) = run(&["train", "--env", "hopper", "--iterations", "1"]);
    assert_ne!(code, 0);
    assert!(stderr.contains("hopper"), "{stderr}");
    let (code, _, _) = run(&["train", "--set", "nonsense"]);
    assert_ne!(code, 0);
    let (code, _, stderr) = run(&["train", "--config", "/nonexistent/x.cfg"]);
    assert_ne!(code, 0);
    assert!(stderr.contains("/nonexistent/x.cfg"));
}
