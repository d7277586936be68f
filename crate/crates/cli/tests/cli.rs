use std::path::PathBuf;
use std::process::{Command, Output};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("fixtures").join(name).display().to_string()
}

fn config(name: &str) -> String {
    root().join("configs").join(name).display().to_string()
}

fn netauction(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netauction"))
        .args(args)
        .env_remove("NETAUCTION_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_example_2() {
    let out = netauction(&["run", &fixture("example2.json"), "-m", "ran-ht"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("s1                1           23"), "{text}");
    assert!(text.contains("social cost  31"));
    assert!(text.contains("expenditure  50"));
    assert!(text.contains("budget       69"));
}

#[test]
fn run_json_is_machine_readable() {
    let out = netauction(&["run", &fixture("example1.json"), "-m", "ran-hm", "--json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["mechanism"], "ran-hm");
    assert!(v["outcome"]["allocation"].is_object());
}

#[test]
fn wrong_variant_exits_3() {
    let out = netauction(&["run", &fixture("example1.json"), "-m", "ran-ht"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn malformed_file_exits_2_with_position() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"variant\": \"homogeneous\",\n \"requester\": {\"demand\": }}").unwrap();
    let out = netauction(&["run", path.to_str().unwrap(), "-m", "ran-hm"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2"), "{err}");
}

#[test]
fn fuzz_finds_d_in_example_1() {
    let out = netauction(&["fuzz", &fixture("example1.json"), "-m", "non-monotone", "--exhaustive"]);
    assert_eq!(out.status.code(), Some(1));
    let text = stdout(&out);
    assert!(text.contains("VIOLATION IC by d under non-monotone"), "{text}");
}

#[test]
fn fuzz_finds_f_in_fig_1() {
    let out = netauction(&["fuzz", &fixture("fig1.json"), "-m", "dna-mu", "--agent", "f"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("VIOLATION IC by f under dna-mu"));
}

#[test]
fn fuzz_json_carries_the_instance() {
    let out = netauction(&["fuzz", &fixture("fig1.json"), "-m", "dna-mu", "--json"]);
    assert_eq!(out.status.code(), Some(1));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["instance_json"]["variant"], "forward");
    assert_eq!(v["report"]["verdicts"]["incentive-compatibility"]["verdict"], "violation");
}

#[test]
fn fuzz_random_truthful_mechanisms_pass() {
    for m in ["ran-hm", "ran-ht"] {
        let out = netauction(&["fuzz", "-m", m, "--random", "25", "--threads", "2"]);
        assert_eq!(out.status.code(), Some(0), "{m}: {}", stdout(&out));
    }
    let out = netauction(&["fuzz", "-m", "d-vcg", "--random", "25", "--samples", "16"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn oracle_reports_gaps_and_refuses_large_markets() {
    let out = netauction(&["oracle", &fixture("example2.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout(&out).contains("ran-ht       31  gap 0"));

    let suppliers: Vec<String> = (1..=13)
        .map(|i| format!("{{\"id\": {i}, \"ability\": 1, \"cost\": 1}}"))
        .collect();
    let neighbors: Vec<String> = (1..=13).map(|i| i.to_string()).collect();
    let text = format!(
        "{{\"variant\": \"homogeneous\", \"requester\": {{\"demand\": 3, \"reserve\": 5, \"neighbors\": [{}]}}, \"suppliers\": [{}]}}",
        neighbors.join(","),
        suppliers.join(",")
    );
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    std::fs::write(&path, text).unwrap();
    let out = netauction(&["oracle", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn shipped_prob_sweep_has_every_row() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("prob.csv");
    let out = netauction(&["sweep", &config("hom_prob_sweep.json"), "-o", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 1 + 13 * 3 * 3 * 20);
}

#[test]
fn sweeps_are_reproducible_and_seedable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, seed: Option<&str>| {
        let path = dir.path().join(name);
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_netauction"));
        cmd.args(["sweep", &config("hom_tree.json"), "-o", path.to_str().unwrap(), "--no-timing"]);
        match seed {
            Some(s) => cmd.env("NETAUCTION_SEED", s),
            None => cmd.env_remove("NETAUCTION_SEED"),
        };
        assert!(cmd.output().unwrap().status.success());
        std::fs::read(path).unwrap()
    };
    let a = run("a.csv", None);
    assert_eq!(a, run("b.csv", None));
    assert_ne!(a, run("c.csv", Some("99")));
}
