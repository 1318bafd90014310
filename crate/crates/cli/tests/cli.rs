use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cupgame::invariants::fixtures::violation;
use cupgame::invariants::Checker;
use cupgame::io::{write_run, Summary};
use num_bigint::BigInt;
use num_rational::BigRational;
use serde_json::Value;
use tempfile::tempdir;

fn cupgame(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cupgame"))
        .args(args)
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn summary(dir: &Path) -> Summary {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn exit_codes() {
    let tmp = tempdir().unwrap();
    let run = tmp.path().join("run");
    let o = cupgame(&[
        "run",
        "--n",
        "8",
        "--p",
        "2",
        "--steps",
        "100",
        "--filler",
        "random:1/2",
        "--out",
        s(&run),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(
        code(&cupgame(&["check", s(&run), "--checkers", "cup-reset"])),
        0
    );
    assert_eq!(
        code(&cupgame(&[
            "check",
            s(&run),
            "--checkers",
            "no-such-checker"
        ])),
        2
    );

    // A trace with a planted violation makes check fail but not error.
    let bad = tmp.path().join("bad");
    let (trace, _) = violation(Checker::CupReset);
    write_run(&bad, &trace, false).unwrap();
    let o = cupgame(&["check", s(&bad), "--checkers", "cup-reset"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("cup-reset: FAIL"));

    assert_eq!(code(&cupgame(&["sweep", "--n", "8,16"])), 2);
    assert_eq!(
        code(&cupgame(&[
            "montecarlo",
            "crossing-prob",
            "--seeds",
            "0..99"
        ])),
        2
    );
    assert_eq!(code(&cupgame(&["lowerbound", "--n", "4", "--p", "4"])), 2);
    assert_eq!(
        code(&cupgame(&[
            "run",
            "--n",
            "4",
            "--out",
            s(&tmp.path().join("x"))
        ])),
        2
    );
}

#[test]
fn harmonic_game_reaches_its_sum() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("h");
    let o = cupgame(&[
        "run",
        "--n",
        "8",
        "--p",
        "1",
        "--steps",
        "200",
        "--filler",
        "harmonic",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    // 1/2 + 1/3 + ... + 1/8.
    let oracle: BigRational = (2..=8)
        .map(|k| BigRational::new(BigInt::from(1), BigInt::from(k)))
        .sum();
    let got = summary(&out).max_backlog.exact;
    assert_eq!(BigRational::new(got.numer(), got.denom()), oracle);
    assert_eq!(got.to_string(), "481/280");
}

#[test]
fn zero_filler_never_builds_backlog() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("z");
    let o = cupgame(&[
        "run",
        "--n",
        "6",
        "--p",
        "2",
        "--steps",
        "50",
        "--filler",
        "zero",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert!(summary(&out).max_backlog.exact.is_zero());
}

#[test]
fn replay_is_byte_identical() {
    let tmp = tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = cupgame(&[
        "run",
        "--n",
        "10",
        "--p",
        "3",
        "--steps",
        "120",
        "--filler",
        "random:3/4",
        "--emptier",
        "smoothed-greedy",
        "--seeds",
        "5",
        "--out",
        s(&a),
        "--checkers",
        "all",
    ]);
    assert!(code(&o) <= 1);
    let o = cupgame(&["replay", s(&a.join("spec.json")), "--out", s(&b)]);
    assert!(code(&o) <= 1);
    for f in ["trace.csv", "summary.json", "report.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn several_seeds_get_their_own_directories() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("m");
    let o = cupgame(&[
        "run",
        "--n",
        "6",
        "--p",
        "2",
        "--steps",
        "30",
        "--filler",
        "random:1",
        "--seeds",
        "0..3",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    for seed in 0..3 {
        assert_eq!(summary(&out.join(format!("seed-{seed}"))).config.seed, seed);
    }
    assert_ne!(
        fs::read(out.join("seed-0/trace.csv")).unwrap(),
        fs::read(out.join("seed-1/trace.csv")).unwrap()
    );
}

#[test]
fn svg_has_one_vertex_per_state() {
    let tmp = tempdir().unwrap();
    let out = tmp.path().join("g");
    cupgame(&[
        "run",
        "--n",
        "8",
        "--p",
        "2",
        "--steps",
        "77",
        "--filler",
        "growth",
        "--out",
        s(&out),
        "--svg",
    ]);
    let svg = fs::read_to_string(out.join("backlog.svg")).unwrap();
    let points = svg
        .split("points=\"")
        .nth(1)
        .unwrap()
        .split('"')
        .next()
        .unwrap();
    let rows = fs::read_to_string(out.join("trace.csv"))
        .unwrap()
        .lines()
        .count()
        - 1;
    assert_eq!(points.split_whitespace().count(), rows);
    assert_eq!(rows, 78);
}

#[test]
fn deterministic_sweeps_ignore_extra_seeds() {
    let tmp = tempdir().unwrap();
    let (one, many) = (tmp.path().join("one"), tmp.path().join("many"));
    for (dir, seeds) in [(&one, "0"), (&many, "0..5")] {
        let o = cupgame(&[
            "sweep",
            "--n",
            "5,6,7,8",
            "--p",
            "1,2",
            "--steps",
            "60",
            "--seeds",
            seeds,
            "--out",
            s(dir),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let json = |d: &Path| -> Value {
        serde_json::from_str(&fs::read_to_string(d.join("sweep.json")).unwrap()).unwrap()
    };
    let (one, many) = (json(&one), json(&many));
    let one = one["rows"].as_array().unwrap();
    let many = many["rows"].as_array().unwrap();
    assert_eq!((one.len(), many.len()), (8, 40));
    // Every seed repeats the single-seed row.
    for (i, row) in many.iter().enumerate() {
        let base = &one[i / 5];
        assert_eq!(row["seed"].as_u64(), Some((i % 5) as u64));
        for key in ["n", "p", "max_backlog", "bound"] {
            assert_eq!(row[key], base[key]);
        }
    }
}

#[test]
fn anchor_swap_always_clears_zero() {
    let tmp = tempdir().unwrap();
    let o = cupgame(&[
        "montecarlo",
        "anchor-swap-backlog",
        "--n",
        "12",
        "--p",
        "4",
        "--rounds",
        "4",
        "--threshold",
        "0",
        "--seeds",
        "0..100",
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("montecarlo.json")).unwrap())
            .unwrap();
    assert_eq!(v["frequency"].as_f64(), Some(1.0));
    assert_eq!(v["seeds"].as_u64(), Some(100));
}

#[test]
fn lowerbound_reports_the_step() {
    let tmp = tempdir().unwrap();
    let o = cupgame(&["lowerbound", "--n", "8", "--p", "2", "--out", s(tmp.path())]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("reached"));
    assert!(tmp.path().join("lowerbound.json").exists());
}
