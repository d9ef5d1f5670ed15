use std::fs;
use std::process::{Command, Output};

use tempfile::TempDir;

const SAMPLE_CNF: &str = "p cnf 3 2\n-1 -2 0\n2 3 0\n";

fn hmldist(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hmldist"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn gen_file(dir: &TempDir, name: &str, family: &[&str]) -> String {
    let mut args = vec!["gen"];
    args.extend_from_slice(family);
    let out = hmldist(&args);
    assert!(out.status.success());
    write(dir, name, &stdout(&out))
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_slice(&o.stdout).expect("valid JSON")
}

#[test]
fn gen_chain_writes_aut() {
    let out = hmldist(&["gen", "a", "3"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "des (0,3,4)\n(1,a,0)\n(2,a,1)\n(3,a,2)\n");
}

#[test]
fn chain_witness_has_no_negation() {
    let dir = TempDir::new().unwrap();
    let a3 = gen_file(&dir, "a3.aut", &["a", "3"]);
    let out = hmldist(&["distinguish", &a3, "3", "2"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("verdict: distinguishable\n"));
    assert!(text.contains("depth: 3\n") && text.contains("negdepth: 0\n"));
    assert!(text.contains("formula: <a><a><a>true\n"));
}

#[test]
fn ladder_lexicographic_json() {
    let dir = TempDir::new().unwrap();
    let b3 = gen_file(&dir, "b3.aut", &["b", "3"]);
    let out = hmldist(&[
        "distinguish",
        &b3,
        "3",
        "7",
        "--mode",
        "lexicographic",
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["method"], "ours");
    assert_eq!(v["depth"], 4);
    assert_eq!(v["negdepth"], 3);
    assert_eq!(v["holds_in"], 3);

    let depth_only = json(&hmldist(&[
        "distinguish",
        &b3,
        "3",
        "7",
        "--mode",
        "depth",
        "--format",
        "json",
    ]));
    assert_eq!(depth_only["depth"], 4);
}

#[test]
fn same_state_is_bisimilar() {
    let dir = TempDir::new().unwrap();
    let a3 = gen_file(&dir, "a3.aut", &["a", "3"]);
    let out = hmldist(&["distinguish", &a3, "2", "2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).starts_with("verdict: bisimilar\n"));
    let v = json(&hmldist(&["distinguish", &a3, "2", "2", "--format", "json"]));
    assert_eq!(v["verdict"], "bisimilar");
}

#[test]
fn bad_input_exits_with_two() {
    let dir = TempDir::new().unwrap();
    let a3 = gen_file(&dir, "a3.aut", &["a", "3"]);
    assert_eq!(hmldist(&["distinguish", &a3, "0", "9"]).status.code(), Some(2));
    assert_eq!(
        hmldist(&["distinguish", "/nonexistent.aut", "0", "1"]).status.code(),
        Some(2)
    );
    let junk = write(&dir, "junk.aut", "des (0,1\n");
    assert_eq!(hmldist(&["distinguish", &junk, "0", "0"]).status.code(), Some(2));
    assert_eq!(
        hmldist(&["distinguish", &a3, "0", "1", "--mode", "sideways"])
            .status
            .code(),
        Some(2)
    );
    let bad_cnf = write(&dir, "bad.cnf", "p cnf 1 1\n2 0\n");
    assert_eq!(hmldist(&["reduce", &bad_cnf, "--decide"]).status.code(), Some(2));
}

#[test]
fn both_methods_print_a_table() {
    let dir = TempDir::new().unwrap();
    let m = gen_file(&dir, "m.aut", &["m"]);
    let out = hmldist(&["distinguish", &m, "0", "1", "--method", "both"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("method: ours\n") && text.contains("method: cleaveland\n"));
    let header = text.lines().find(|l| l.starts_with("method ")).expect("table header");
    assert!(header.contains("depth") && header.contains("size") && header.contains("negdepth"));
    assert!(text.lines().any(|l| l.starts_with("cleaveland ")));

    let v = json(&hmldist(&[
        "distinguish",
        &m,
        "0",
        "1",
        "--method",
        "both",
        "--format",
        "json",
    ]));
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["reports"][0]["method"], "ours");
    assert_eq!(v["reports"][1]["method"], "cleaveland");
}

#[test]
fn oracle_reports_minimal_size() {
    let dir = TempDir::new().unwrap();
    let m = gen_file(&dir, "m.aut", &["m"]);
    let v = json(&hmldist(&["distinguish", &m, "0", "1", "--oracle", "--format", "json"]));
    assert_eq!(v["oracle"]["min_size"], "1");
    assert_eq!(v["dist"], 1);
}

#[test]
fn seeded_runs_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let r = gen_file(&dir, "r.aut", &["random", "--states", "60", "--seed", "5"]);
    for s in 0..6 {
        let s = s.to_string();
        let args = ["distinguish", &r, &s, "59", "--seed", "11", "--format", "json"];
        let (a, b) = (hmldist(&args), hmldist(&args));
        assert_eq!(a.stdout, b.stdout);
        assert_ne!(a.status.code(), Some(2));
    }
    let again = hmldist(&["gen", "random", "--states", "60", "--seed", "5"]);
    assert_eq!(stdout(&again), fs::read_to_string(&r).unwrap());
}

#[test]
fn refine_dumps_levels() {
    let dir = TempDir::new().unwrap();
    let a3 = gen_file(&dir, "a3.aut", &["a", "3"]);
    let out = hmldist(&["refine", &a3, "--dump-levels"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("stable level: 3\n"));
    assert!(text.contains("level 1: 2 blocks {0} {1 2 3}\n"));
}

#[test]
fn reduction_round_trip() {
    let dir = TempDir::new().unwrap();
    let cnf = write(&dir, "sample.cnf", SAMPLE_CNF);
    let decide = hmldist(&["reduce", &cnf, "--decide"]);
    assert_eq!(decide.status.code(), Some(0));
    assert!(stdout(&decide).starts_with("s SATISFIABLE\nv "));

    let roles = dir.path().join("roles.json");
    let emitted = hmldist(&["reduce", &cnf, "--emit-aut", "--roles", roles.to_str().unwrap()]);
    assert_eq!(emitted.status.code(), Some(0));
    assert!(stdout(&emitted).starts_with("des (16,32,19)\n"));
    let roles: serde_json::Value = serde_json::from_str(&fs::read_to_string(&roles).unwrap()).unwrap();
    assert_eq!(roles.as_array().unwrap().len(), 19);
    assert_eq!(roles[16]["role"], "s");

    let via_gen = hmldist(&["gen", "reduction", &cnf]);
    assert_eq!(via_gen.stdout, emitted.stdout);

    let unsat = write(&dir, "unsat.cnf", "p cnf 1 2\n1 0\n-1 0\n");
    let out = hmldist(&["reduce", &unsat, "--decide"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout(&out), "s UNSATISFIABLE\n");
    assert_eq!(hmldist(&["reduce", &cnf]).status.code(), Some(2));
}

#[test]
fn reduction_pair_is_distinguished() {
    let dir = TempDir::new().unwrap();
    let cnf = write(&dir, "sample.cnf", SAMPLE_CNF);
    let aut = gen_file(&dir, "sample.aut", &["reduction", &cnf]);
    let v = json(&hmldist(&["distinguish", &aut, "16", "17", "--format", "json"]));
    assert_eq!(v["verdict"], "distinguishable");
    assert!(v["depth"].as_u64().unwrap() >= 2);
}

#[test]
fn metrics_of_formula_files() {
    let dir = TempDir::new().unwrap();
    let f = write(&dir, "f.hml", "phi1 = phi2 && <a>phi2\nphi2 = <b><c>true\n");
    let out = hmldist(&["metrics", &f]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout(&out), "size: 5\ndag size: 3\ndepth: 3\nnegdepth: 0\n");
    let v = json(&hmldist(&["metrics", &f, "--format", "json"]));
    assert_eq!(v["size"], "5");
    let bad = write(&dir, "bad.hml", "<a>(true");
    assert_eq!(hmldist(&["metrics", &bad]).status.code(), Some(2));
}

#[test]
fn bench_csv_is_reproducible_and_ours_is_never_deeper() {
    let args = ["bench", "--random", "20", "--states", "50", "--seed", "1"];
    let (a, b) = (hmldist(&args), hmldist(&args));
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (ours, base) = (col("max_depth_ours"), col("max_depth_cleaveland"));
    let mut rows = 0;
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[col("states")], "50");
        assert!(cells[ours].parse::<u32>().unwrap() <= cells[base].parse::<u32>().unwrap());
        rows += 1;
    }
    assert_eq!(rows, 20);
}
