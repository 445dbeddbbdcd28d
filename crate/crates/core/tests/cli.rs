use std::fs;
use std::path::Path;
use std::process::Command;

use lclab::cli::list_csv;

const SMALL: &[&str] = &[
    "--set",
    "pairs=4000",
    "--set",
    "samples=3000",
    "--set",
    "runs=3",
    "--set",
    "particles=2000",
    "--set",
    "dt=0.02",
    "--set",
    "horizon=0.2",
    "--set",
    "trials=10",
    "--set",
    "stochastic_trials=3",
    "--set",
    "stochastic_pairs=1000",
    "--set",
    "directions=4",
    "--set",
    "poincare_trials=2",
];

fn lclab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_lclab"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn run(cmd: &str, out: &Path, extra: &[&str]) -> i32 {
    let mut args = vec![cmd, "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    lclab(&args).0
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    for extra in [
        &["--set", "bogus=1"][..],
        &["--set", "q=3"],
        &["--set", "dims=0"],
        &["--set", "families=sphere"],
        &["--set", "novalue"],
        &["--config", "/nonexistent/config.txt"],
        &["--seed", "minus-one"],
    ] {
        assert_eq!(run("selftest", &out, extra), 2, "{extra:?}");
    }
    assert_eq!(lclab(&["frobnicate"]).0, 2);
    assert_eq!(lclab(&[]).0, 2);
    assert_eq!(lclab(&["--help"]).0, 0);
}

#[test]
fn selftest_passes_and_writes_header() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("selftest", dir.path(), &[]), 0);
    let text = fs::read_to_string(dir.path().join("selftest.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# config_hash=") && first.ends_with(" seed=20240601"));
    assert!(text.lines().skip(2).all(|l| l.contains(",true,")));
}

#[test]
fn config_file_round_trips_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("in.txt");
    fs::write(&cfg, "# small run\npairs = 3000\ndims = 4\nseed = 5\n").unwrap();
    let a = dir.path().join("a");
    assert_eq!(
        run(
            "third-moment",
            &a,
            &["--config", cfg.to_str().unwrap(), "--seed", "7"]
        ),
        0
    );
    let csv = fs::read_to_string(a.join("third_moment.csv")).unwrap();
    assert!(csv.lines().next().unwrap().ends_with(" seed=7"));
    let echoed = fs::read_to_string(a.join("config.txt")).unwrap();
    assert!(
        echoed.contains("seed = 7")
            && echoed.contains("dims = 4")
            && echoed.contains("pairs = 3000")
    );

    // Feeding the echo back reproduces the artifacts exactly.
    let b = dir.path().join("b");
    assert_eq!(
        run(
            "third-moment",
            &b,
            &["--config", a.join("config.txt").to_str().unwrap()]
        ),
        0
    );
    assert_eq!(csv, fs::read_to_string(b.join("third_moment.csv")).unwrap());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in [
        "gen-clt",
        "third-moment",
        "localize",
        "tensor-suite",
        "cheeger-scan",
        "selftest",
    ] {
        let (a, b) = (
            dir.path().join(format!("{cmd}-a")),
            dir.path().join(format!("{cmd}-b")),
        );
        assert_eq!(run(cmd, &a, SMALL), 0, "{cmd}");
        assert_eq!(
            run(cmd, &b, &[SMALL, &["--threads", "1"]].concat()),
            0,
            "{cmd}"
        );
        let files = list_csv(&a).unwrap();
        assert!(!files.is_empty());
        assert_eq!(files, list_csv(&b).unwrap());
        for f in files {
            let (x, y) = (fs::read(a.join(&f)).unwrap(), fs::read(b.join(&f)).unwrap());
            assert!(x == y, "{cmd}: {} differs", f.display());
            assert!(x.starts_with(b"# config_hash="));
        }
    }
}

#[test]
fn localize_writes_one_trace_per_run() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run("localize", dir.path(), SMALL), 0);
    let traces: Vec<_> = fs::read_dir(dir.path().join("traces")).unwrap().collect();
    assert_eq!(traces.len(), 3);
    let t = fs::read_to_string(dir.path().join("traces/gaussian_n8_run0000.csv")).unwrap();
    assert_eq!(
        t.lines().nth(1).unwrap(),
        "t,mu_norm,a_op,tr_a2,phi_q,ess,g_x1"
    );
}

#[test]
fn violations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let poincare = [
        SMALL,
        &[
            "--set",
            "poincare_c=1e-6",
            "--set",
            "families=cube",
            "--set",
            "dims=2",
        ],
    ]
    .concat();
    assert_eq!(run("cheeger-scan", &dir.path().join("c"), &poincare), 1);
    let collapse = [
        SMALL,
        &[
            "--set",
            "ess_fraction=0.99",
            "--set",
            "horizon=2",
            "--set",
            "dt=0.5",
        ],
    ]
    .concat();
    assert_eq!(run("localize", &dir.path().join("l"), &collapse), 1);
}
