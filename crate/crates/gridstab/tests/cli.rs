use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
}

fn gridstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gridstab"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn stage_artifacts_chain_through_commands() {
    let dir = tempfile::tempdir().unwrap();
    let case = dir.path().join("case.json");
    let net = dir.path().join("net.json");
    let plan = dir.path().join("plan.json");
    let c39 = data("case39.m");
    let dynamics = data("case39_dynamics.csv");

    let o = gridstab(&[
        "parse",
        s(&c39),
        "--dynamics",
        s(&dynamics),
        "--out",
        s(&case),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gridstab(&["reduce", s(&case), "--out", s(&net)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = gridstab(&["optimize", s(&case), "--method", "equal", "--out", s(&plan)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let o = gridstab(&["lyapunov", s(&net), "--beta", s(&plan)]);
    assert!(o.status.success());
    let lambda: f64 = String::from_utf8(o.stdout).unwrap().trim().parse().unwrap();
    assert!((lambda + 3.87446).abs() < 1e-4);

    let o = gridstab(&[
        "lyapunov",
        s(&net),
        "--beta",
        s(&plan),
        "--spectrum",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("re,im"));
    assert_eq!(text.lines().count(), 21);
}

#[test]
fn powerflow_prints_solution() {
    let o = gridstab(&["powerflow", s(&data("case39.m"))]);
    assert!(o.status.success());
    let sol: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(sol["converged"], true);
    assert!(String::from_utf8_lossy(&o.stderr).contains("converged: true"));
}

#[test]
fn evaluate_is_seeded_and_writes_all_files() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan.json");
    let c39 = data("case39.m");
    let dynamics = data("case39_dynamics.csv");
    let o = gridstab(&[
        "optimize",
        s(&c39),
        "--dynamics",
        s(&dynamics),
        "--method",
        "equal",
        "--out",
        s(&plan),
    ]);
    assert!(o.status.success());

    let run = |out: &Path, seed: Option<&str>| {
        let mut args = vec![
            "evaluate",
            s(&c39),
            "--dynamics",
            s(&dynamics),
            "--plan",
            s(&plan),
            "--sigma",
            "0.1",
            "--draws",
            "150",
            "--out",
            s(out),
        ];
        if let Some(seed) = seed {
            args.extend(["--seed", seed]);
        }
        gridstab(&args)
    };
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&a, Some("5")).status.success());
    assert!(run(&b, Some("5")).status.success());
    for f in [
        "distribution.csv",
        "quantiles.csv",
        "critical.json",
        "histogram.csv",
    ] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let dist = std::fs::read_to_string(a.join("distribution.csv")).unwrap();
    assert_eq!(dist.lines().count(), 151);

    let o = run(&dir.path().join("c"), None);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed: "));
}

#[test]
fn exit_codes() {
    let c39 = data("case39.m");
    assert_eq!(
        gridstab(&["parse", "/no/such/case.m"]).status.code(),
        Some(2)
    );
    assert_eq!(
        gridstab(&["parse", s(&c39), "--format", "csv"])
            .status
            .code(),
        Some(2)
    );
    // no dynamics attached
    assert_eq!(gridstab(&["reduce", s(&c39)]).status.code(), Some(2));
    assert_eq!(gridstab(&["frobnicate"]).status.code(), Some(2));
    // three iterations are not enough from a flat start
    assert_eq!(
        gridstab(&["powerflow", s(&c39), "--max-iter", "2"])
            .status
            .code(),
        Some(3)
    );
}
