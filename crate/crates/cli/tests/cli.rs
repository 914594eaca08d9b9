use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_phi-regret");

const SMALL: &str = "family = int
link = polynomial
link_param = 2
estimator = noisy
noise_scale = 0.2
adversary = adaptive_best_response
num_actions = 3
horizon = 300
seeds = 0..4
";

fn phi(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn run_then_verify() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("out");
    let o = phi(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["seed_0.csv", "seed_3.csv", "average.csv", "summary.svg", "metadata.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["config_sha256"].as_str().unwrap().len(), 64);
    assert_eq!(meta["bound_params"]["num_transformations"], 7);

    let o = phi(&["verify", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert_eq!(stdout(&o).matches("PASS").count(), 5);
    let o = phi(&["--verify", out.join("average.csv").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("domination, potential, envelope"));
}

#[test]
fn corrupted_envelope_cell_fails_with_its_row() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let out = dir.path().join("out");
    assert_eq!(phi(&["--config", &cfg, "--out", out.to_str().unwrap()]).status.code(), Some(0));
    let path = out.join("seed_2.csv");
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    // data row 42 sits on line 43
    let mut cells: Vec<String> = lines[42].split(',').map(String::from).collect();
    let v: f64 = cells[5].parse().unwrap();
    cells[5] = format!("{:?}", v * 1.01);
    lines[42] = cells.join(",");
    fs::write(&path, lines.join("\n") + "\n").unwrap();

    let o = phi(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let report = stdout(&o);
    assert!(report.contains("envelope: row 42 (t = 42)"), "{report}");
}

#[test]
fn invalid_config_exits_two_with_the_line() {
    let dir = TempDir::new().unwrap();
    let bad = SMALL.replace("link = polynomial\nlink_param = 2", "link = exponential\nlink_param = -0.5");
    let cfg = write_config(dir.path(), "bad.cfg", &bad);
    let o = phi(&["run", "--config", &cfg, "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3: link_param:"), "{}", stderr(&o));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn io_failures_exit_three() {
    let o = phi(&["run", "--config", "/nonexistent/x.cfg"]);
    assert_eq!(o.status.code(), Some(3));
    let o = phi(&["verify", "/nonexistent/trace.csv"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_trace_exits_two() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("average.csv");
    fs::write(&path, "t,objective\n1,0.5\n").unwrap();
    let o = phi(&["verify", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 1"));
}

#[test]
fn worker_count_does_not_change_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "small.cfg", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(phi(&["run", "--config", &cfg, "--jobs", "1", "--out", a.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(phi(&["run", "--config", &cfg, "--jobs", "3", "--out", b.to_str().unwrap()]).status.code(), Some(0));
    for name in ["seed_0.csv", "seed_1.csv", "average.csv", "summary.svg", "metadata.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn game_file_resolves_relative_to_config() {
    let dir = TempDir::new().unwrap();
    fs::create_dir(dir.path().join("games")).unwrap();
    fs::write(dir.path().join("games/pd.txt"), "# prisoner's dilemma\n3 0\n5 1\n\n3 5\n0 1\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "pd.cfg",
        "family = ext\nlink = polynomial\nlink_param = 2\ngame = games/pd.txt\nhorizon = 200\nseeds = 0..3\noutput_dir = out\n",
    );
    let o = phi(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    for name in ["seed_0_p1.csv", "seed_2_p2.csv", "average_p1.csv", "average_p2.csv", "ce_gap.csv", "metadata.json"] {
        assert!(out.join(name).is_file(), "{name} missing");
    }
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["normalization"][0]["scale"], 0.2);
    assert_eq!(phi(&["verify", out.to_str().unwrap()]).status.code(), Some(0));
}

#[test]
fn no_arguments_is_a_usage_error() {
    assert_eq!(phi(&[]).status.code(), Some(2));
}

#[test]
fn single_action_player_has_no_trace() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("g.txt"), "0.2 0.9\n\n1 0\n").unwrap();
    let cfg = write_config(
        dir.path(),
        "g.cfg",
        "family = int\nlink = polynomial\nlink_param = 2\ngame = g.txt\nhorizon = 100\nseeds = 0,1\noutput_dir = out\n",
    );
    let o = phi(&["run", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let out = dir.path().join("out");
    assert!(!out.join("seed_0_p1.csv").exists());
    assert!(out.join("seed_0_p2.csv").is_file());
    let meta: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("metadata.json")).unwrap()).unwrap();
    assert!(meta.get("bound_params_p1").is_none());
    assert_eq!(phi(&["verify", out.to_str().unwrap()]).status.code(), Some(0));
}
