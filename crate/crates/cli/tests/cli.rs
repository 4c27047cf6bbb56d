use std::path::Path;
use std::process::{Command, Output};

fn eventum(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eventum"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("EVENTUM_SEED")
        .output()
        .unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn poisson(k: usize, mu: f64) -> f64 {
    (1..=k).fold((-mu).exp(), |p, i| p * mu / i as f64)
}

#[test]
fn integrate_clock_gives_poisson_occupations() {
    let dir = tempfile::tempdir().unwrap();
    let o = eventum(
        &["integrate", "--model", "clock", "--kappa", "1.5", "--horizon", "3", "--checkpoints", "1,2,3", "--verbose"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header[0], "t");
    assert_eq!(header[1], "tr_1");
    assert!(header.contains(&"total_trace"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 4);
    let sites = header.iter().filter(|h| h.starts_with("tr_")).count();
    for row in &rows {
        let mu = 1.5 * row[0];
        for i in 0..sites - 1 {
            assert!((row[1 + i] - poisson(i, mu)).abs() < 1e-6, "t = {} site {i}", row[0]);
        }
        let total_col = header.iter().position(|h| *h == "total_trace").unwrap();
        assert!((row[total_col] - 1.0).abs() < 1e-8);
    }
}

#[test]
fn simulate_writes_one_based_event_log() {
    let dir = tempfile::tempdir().unwrap();
    let o = eventum(&["simulate", "--model", "testpair", "--seed", "5", "--n", "50", "--t-end", "1"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(dir.path().join("events.jsonl")).unwrap();
    let mut previous: Option<(u64, f64)> = None;
    for line in log.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in ["trajectory", "seed", "t", "from", "to", "norm_sq_at_jump"] {
            assert!(v.get(key).is_some(), "missing {key} in {line}");
        }
        assert_eq!(v["seed"], 5);
        let (from, to) = (v["from"].as_u64().unwrap(), v["to"].as_u64().unwrap());
        assert!((1..=2).contains(&from) && (1..=2).contains(&to) && from != to);
        let traj = v["trajectory"].as_u64().unwrap();
        let t = v["t"].as_f64().unwrap();
        if let Some((pt, ptime)) = previous {
            assert!(traj > pt || (traj == pt && t > ptime));
        }
        previous = Some((traj, t));
    }
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 51);
    assert!(summary.starts_with("trajectory,n_events,final_alpha,survival_norm_sq"));
}

#[test]
fn model_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("qubit.json");
    std::fs::write(
        &model,
        r#"{
            "m": 2, "dims": [2, 2],
            "hamiltonians": [[[1, 0], [0, -1]], "zero"],
            "couplings": [
                {"from": 1, "to": 2, "matrix": [[[0, 0], [1, 0]], [[0, 0], [0, 0]]]},
                {"from": 2, "to": 1, "builtin": "identity", "scale": 0.5}
            ],
            "initial": {"alpha": 1, "psi": [1, [0, 1]]},
            "horizon": 2
        }"#,
    )
    .unwrap();
    let m = model.to_str().unwrap();
    assert_eq!(code(&eventum(&["simulate", "--model", m, "--n", "20"], dir.path())), 0);
    assert_eq!(code(&eventum(&["integrate", "--model", m], dir.path())), 0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    // usage and input errors
    assert_eq!(code(&eventum(&["simulate"], p)), 2);
    assert_eq!(code(&eventum(&["simulate", "--model", "nosuchmodel"], p)), 2);
    assert_eq!(code(&eventum(&["simulate", "--model", "testpair", "--n", "0"], p)), 2);
    assert_eq!(code(&eventum(&["bogus"], p)), 2);
    assert_eq!(code(&eventum(&["integrate", "--model", "detector1d"], p)), 2);
    assert_eq!(code(&eventum(&["simulate", "--model", "detector1d", "--width", "1000"], p)), 2);
    // a check that fails: the horizon is far too short for five ticks
    assert_eq!(code(&eventum(&["demo", "clock", "--n", "200", "--horizon", "1"], p)), 1);
    // numerical abort: an unstable master step
    assert_eq!(code(&eventum(&["integrate", "--model", "testtriad", "--dt", "5", "--t-end", "5000"], p)), 3);
}

#[test]
fn seed_comes_from_environment_when_no_flag_is_given() {
    let dir = tempfile::tempdir().unwrap();
    let run = |env: Option<&str>, extra: &[&str], sub: &str| {
        let out = dir.path().join(sub);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_eventum"));
        cmd.args(["simulate", "--model", "testpair", "--n", "30", "--t-end", "1"]).args(extra).arg("--out").arg(&out);
        match env {
            Some(v) => cmd.env("EVENTUM_SEED", v),
            None => cmd.env_remove("EVENTUM_SEED"),
        };
        assert!(cmd.status().unwrap().success());
        std::fs::read(out.join("events.jsonl")).unwrap()
    };
    let from_env = run(Some("77"), &[], "a");
    let from_flag = run(None, &["--seed", "77"], "b");
    let flag_wins = run(Some("1"), &["--seed", "77"], "c");
    assert_eq!(from_env, from_flag);
    assert_eq!(flag_wins, from_flag);
    assert_ne!(run(None, &[], "d"), from_flag);
}
