use std::path::PathBuf;

use cardmso_core::cli::{run, Outcome, EXIT_BUDGET, EXIT_FAILS, EXIT_HOLDS, EXIT_INPUT};
use cardmso_core::formula::Formula;
use cardmso_core::graph::Graph;
use cardmso_core::oracle;

fn corpus(name: &str) -> String {
    format!("{}/corpus/{name}.cms", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str, contents: &str) -> String {
    let dir = std::env::temp_dir().join(format!("cardmso-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path: PathBuf = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path.to_string_lossy().into_owned()
}

fn cardmso(args: &[&str]) -> Outcome {
    run(std::iter::once("cardmso").chain(args.iter().copied()))
}

const C4: &str = "p 4 4\ne 1 2\ne 2 3\ne 3 4\ne 4 1\n";
const P3: &str = "p 3 2\nv 1 a\nv 2 b\nv 3 c\ne 1 2\ne 2 3\n";
const P4: &str = "p 4 3\ne 1 2\ne 2 3\ne 3 4\n";

#[test]
fn check_exit_codes() {
    let c4 = scratch("c4.g", C4);
    let p3 = scratch("p3.g", P3);
    let be = corpus("bipartite_equal");
    let out = cardmso(&["check", "--graph", &c4, "--formula", &be]);
    assert_eq!(out.code, EXIT_HOLDS, "{}", out.stderr);
    assert!(out.stdout.starts_with("holds\nX1 = {"));
    assert_eq!(cardmso(&["check", "--graph", &p3, "--formula", &be]).code, EXIT_FAILS);
    let ids = corpus("ids_k");
    let out = cardmso(&["check", "--graph", &p3, "--formula", &ids, "--param", "k=1"]);
    assert_eq!(out.code, EXIT_HOLDS);
    assert!(out.stdout.contains("X = {b}"), "{}", out.stdout);
    let nd = cardmso(&["check", "--graph", &p3, "--formula", &ids, "--param", "k=1", "--mode", "nd"]);
    assert_eq!(nd.code, EXIT_HOLDS);
}

#[test]
fn json_report_is_ordered_and_round_trips() {
    let c4 = scratch("c4-json.g", C4);
    let be = corpus("bipartite_equal");
    let out = cardmso(&["check", "--graph", &c4, "--formula", &be, "--json"]);
    assert_eq!(out.code, EXIT_HOLDS);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["status", "witness", "alpha", "stats"]);
    assert_eq!(v["status"], "holds");
    let g = Graph::parse(C4).unwrap();
    let f = Formula::parse(&std::fs::read_to_string(&be).unwrap()).unwrap();
    let sets: Vec<Vec<usize>> = f
        .prefix
        .iter()
        .map(|z| {
            let mut s: Vec<usize> = v["witness"][z]
                .as_array()
                .unwrap()
                .iter()
                .map(|n| g.index_of(n.as_str().unwrap()).unwrap())
                .collect();
            s.sort_unstable();
            s
        })
        .collect();
    assert!(oracle::eval_with_prefix(&g, &f, &sets));

    let p4 = scratch("p4-json.g", P4);
    let out = cardmso(&["cbalance", "--graph", &p4, "-c", "2", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(keys, ["status", "stats", "cut_value", "parts"]);
    assert_eq!(v["cut_value"], 1);
}

#[test]
fn cbalance_and_partition() {
    let p4 = scratch("p4.g", P4);
    let out = cardmso(&["cbalance", "--graph", &p4, "-c", "2"]);
    assert_eq!(out.code, EXIT_HOLDS);
    assert!(out.stdout.starts_with("optimal\ncut 1\n"));
    let oracle_out = cardmso(&["oracle-cbalance", "--graph", &p4, "-c", "2"]);
    assert!(oracle_out.stdout.starts_with("optimal\ncut 1\n"));
    let two = scratch("k2.g", "p 2 1\ne 1 2\n");
    assert_eq!(cardmso(&["cbalance", "--graph", &two, "-c", "3", "--no-empty-parts"]).code, EXIT_FAILS);

    let c5 = scratch("c5.g", "p 5 5\ne 1 2\ne 2 3\ne 3 4\ne 4 5\ne 5 1\n");
    let indep = corpus("independence");
    for (r, code) in [("2", EXIT_FAILS), ("3", EXIT_HOLDS)] {
        assert_eq!(cardmso(&["partition", "--graph", &c5, "--formula", &indep, "-r", r]).code, code);
        assert_eq!(cardmso(&["oracle-partition", "--graph", &c5, "--formula", &indep, "-r", r]).code, code);
    }
    let out = cardmso(&["partition", "--graph", &c5, "--formula", &indep, "-r", "3", "--json"]);
    let v: serde_json::Value = serde_json::from_str(&out.stdout).unwrap();
    assert_eq!(v["parts"].as_array().unwrap().len(), 3);
}

#[test]
fn input_errors() {
    let c4 = scratch("c4-err.g", C4);
    let bad = scratch("bad.g", "p 2 1\ne 1 1\n");
    let be = corpus("bipartite_equal");
    let ids = corpus("ids_k");
    for args in [
        vec!["check", "--graph", bad.as_str(), "--formula", be.as_str()],
        vec!["check", "--graph", c4.as_str(), "--formula", ids.as_str()],
        vec!["check", "--graph", c4.as_str(), "--formula", "/nonexistent/f.cms"],
        vec!["check", "--graph", c4.as_str()],
        vec!["check", "--graph", c4.as_str(), "--formula", be.as_str(), "--param", "k"],
        vec!["cbalance", "--graph", c4.as_str(), "-c", "2", "--mode", "nd"],
        vec!["cbalance", "--graph", c4.as_str(), "-c", "0"],
        vec!["partition", "--graph", c4.as_str(), "--formula", be.as_str(), "-r", "2"],
        vec!["frobnicate"],
    ] {
        let out = cardmso(&args);
        assert_eq!(out.code, EXIT_INPUT, "{args:?}: {}", out.stdout);
        assert!(!out.stderr.is_empty());
    }
    let big = scratch("big.g", &Graph::path(9).to_text());
    let out = cardmso(&["oracle-check", "--graph", &big, "--formula", &be]);
    assert_eq!(out.code, EXIT_INPUT);
    let unused = cardmso(&["check", "--graph", &c4, "--formula", &be, "--param", "k=3"]);
    assert_eq!(unused.code, EXIT_HOLDS);
    assert!(unused.stderr.contains("warning"));
}

#[test]
fn budgets() {
    let c4 = scratch("c4-budget.g", C4);
    let be = corpus("bipartite_equal");
    let out = cardmso(&["check", "--graph", &c4, "--formula", &be, "--k-max", "1"]);
    assert_eq!(out.code, EXIT_BUDGET);
    let out = cardmso(&["check", "--graph", &c4, "--formula", &be, "--eval-budget", "3"]);
    assert_eq!(out.code, EXIT_BUDGET);
}

#[test]
fn dump_threads_and_dedup() {
    let c4 = scratch("c4-dump.g", C4);
    let be = corpus("bipartite_equal");
    let dump = scratch("dump.txt", "");
    let out = cardmso(&["check", "--graph", &c4, "--formula", &be, "--dump-ilp", &dump, "--threads", "2", "--no-dedup"]);
    assert_eq!(out.code, EXIT_HOLDS);
    let text = std::fs::read_to_string(&dump).unwrap();
    assert!(text.starts_with("# program 1\n"));
    assert!(text.contains("minimize") || text.contains("x_t0_s"));
}

#[test]
fn corpus_listing() {
    let out = cardmso(&["corpus"]);
    assert!(out.stdout.contains("bipartite_equal"));
    let out = cardmso(&["corpus", "equitable_connected", "-c", "2"]);
    assert!(Formula::parse(&out.stdout).is_ok());
    assert_eq!(cardmso(&["corpus", "equitable_coloring"]).code, EXIT_INPUT);
    assert_eq!(cardmso(&["corpus", "nope"]).code, EXIT_INPUT);
    assert_eq!(cardmso(&["--version"]).code, EXIT_HOLDS);
}
