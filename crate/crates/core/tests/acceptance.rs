//! One line per acceptance criterion; exits non-zero if any fails.
//!
//! Pass criterion names as arguments to run a subset.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use cardmso_core::balanced::cbalanced;
use cardmso_core::corpus;
use cardmso_core::formula::Formula;
use cardmso_core::graph::{nd_partition, partition_for_mode, Graph, PartitionMode, TypePartition};
use cardmso_core::ilp::{self, IlpInstance, IlpOptions, Relation};
use cardmso_core::mso_eval::{mso_check, EvalOptions};
use cardmso_core::oracle;
use cardmso_core::partitioning::mso_partition;
use cardmso_core::solver::{check, SolverOptions, Verdict};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const CAP: usize = 8;

/// Witnesses re-validated under direct semantics across all criteria.
#[derive(Default)]
struct Integrity {
    checked: usize,
    failures: Vec<String>,
}

impl Integrity {
    fn fail(&mut self, what: String) {
        if self.failures.len() < 5 {
            self.failures.push(what);
        }
    }

    fn verdict(&mut self, g: &Graph, f: &Formula, v: &Verdict, label: &str) {
        let Some(w) = &v.witness else {
            if v.holds {
                self.fail(format!("{label}: positive verdict without a witness"));
            }
            return;
        };
        self.checked += 1;
        let sizes: Vec<usize> = w.sets.iter().map(Vec::len).collect();
        let in_range = w.sets.iter().flatten().all(|&x| x < g.n());
        if !in_range || !oracle::eval_with_prefix(g, f, &w.sets) {
            self.fail(format!("{label}: witness {:?} does not satisfy the sentence", w.sets));
        } else if oracle::constraint_values(f, &sizes) != w.alpha {
            self.fail(format!("{label}: reported pre-evaluation does not comply with {sizes:?}"));
        }
    }

    fn parts_cover(&mut self, g: &Graph, parts: &[Vec<usize>], label: &str) -> bool {
        let mut seen = vec![0usize; g.n()];
        for &v in parts.iter().flatten() {
            if v >= g.n() {
                self.fail(format!("{label}: vertex {v} out of range"));
                return false;
            }
            seen[v] += 1;
        }
        if seen.iter().any(|&c| c != 1) {
            self.fail(format!("{label}: parts {parts:?} do not partition V"));
            return false;
        }
        true
    }

    fn partition(&mut self, g: &Graph, phi: &Formula, r: usize, parts: &[Vec<usize>], label: &str) {
        self.checked += 1;
        if parts.len() != r {
            self.fail(format!("{label}: {} parts, expected {r}", parts.len()));
        } else if self.parts_cover(g, parts, label) {
            if let Some(p) = parts.iter().find(|p| !oracle::models(&g.induced_subgraph(p), phi)) {
                self.fail(format!("{label}: part {p:?} does not model the formula"));
            }
        }
    }

    fn balanced(&mut self, g: &Graph, c: usize, cut: usize, parts: &[Vec<usize>], label: &str) {
        self.checked += 1;
        if parts.len() != c || !self.parts_cover(g, parts, label) {
            return;
        }
        let sizes: Vec<usize> = parts.iter().map(Vec::len).collect();
        if sizes.iter().max().unwrap() - sizes.iter().min().unwrap() > 1 {
            self.fail(format!("{label}: part sizes {sizes:?} are not equitable"));
        }
        let mut label_of = vec![0; g.n()];
        for (p, part) in parts.iter().enumerate() {
            for &v in part {
                label_of[v] = p;
            }
        }
        if g.cut_size(&label_of) != cut {
            self.fail(format!("{label}: parts cut {} edges, reported {cut}", g.cut_size(&label_of)));
        }
    }
}

type Outcome = Result<String, String>;

fn mismatch(mismatches: &[String], total: usize) -> Outcome {
    if mismatches.is_empty() {
        Ok(format!("{total} instances agree"))
    } else {
        Err(format!("{} of {total} disagree, first: {}", mismatches.len(), mismatches[0]))
    }
}

fn family_up_to_6() -> Vec<Graph> {
    common::connected_family(6)
}

fn cardmso_formulas() -> Vec<(String, Formula)> {
    let mut out = Vec::new();
    for name in ["bipartite_equal", "equitable_coloring_3", "equitable_connected_3"] {
        out.push((name.to_string(), corpus::shipped_formula(name).unwrap()));
    }
    let ids = corpus::shipped_formula("ids_k").unwrap();
    for k in 1..=3 {
        let bindings = BTreeMap::from([("k".to_string(), k)]);
        out.push((format!("ids_k(k={k})"), ids.substitute_params(&bindings).unwrap().0));
    }
    out
}

fn criterion_cardmso(integrity: &mut Integrity) -> Outcome {
    let mut graphs = family_up_to_6();
    graphs.extend(common::random_graphs(7, 200, 7));
    let opts = SolverOptions::default();
    let mut bad = Vec::new();
    let mut total = 0;
    for (name, f) in cardmso_formulas() {
        for (i, g) in graphs.iter().enumerate() {
            total += 1;
            let label = format!("{name} on graph {i} ({} vertices, edges {:?})", g.n(), g.edges().collect::<Vec<_>>());
            let v = check(g, &f, &opts).map_err(|e| format!("{label}: {e}"))?;
            let expected = oracle::brute_check(g, &f, CAP).map_err(|e| format!("{label}: {e}"))?;
            if v.holds != expected {
                bad.push(format!("{label}: solver {} oracle {expected}", v.holds));
            }
            integrity.verdict(g, &f, &v, &label);
        }
    }
    mismatch(&bad, total)
}

fn criterion_partition(integrity: &mut Integrity) -> Outcome {
    let opts = SolverOptions::default();
    let mut bad = Vec::new();
    let mut total = 0;
    let mut chromatic_checked = 0;
    for name in ["independence", "clique"] {
        let phi = corpus::shipped_formula(name).unwrap();
        for (i, g) in family_up_to_6().iter().enumerate() {
            let mut least = None;
            for r in 1..=g.n() {
                total += 1;
                let label = format!("{name}, r={r}, graph {i} (edges {:?})", g.edges().collect::<Vec<_>>());
                let res = mso_partition(g, &phi, r, true, &opts).map_err(|e| format!("{label}: {e}"))?;
                let expected = oracle::brute_partition(g, &phi, r, true, CAP).map_err(|e| format!("{label}: {e}"))?;
                if res.holds != expected {
                    bad.push(format!("{label}: solver {} oracle {expected}", res.holds));
                }
                match &res.parts {
                    Some(parts) => integrity.partition(g, &phi, r, parts, &label),
                    None if res.holds => integrity.fail(format!("{label}: positive verdict without parts")),
                    None => {}
                }
                if res.holds && least.is_none() {
                    least = Some(r);
                }
            }
            if name == "independence" {
                chromatic_checked += 1;
                let chi = oracle::chromatic_number(g);
                if least != Some(chi) {
                    bad.push(format!("graph {i}: least r {least:?}, chromatic number {chi}"));
                }
            }
        }
    }
    mismatch(&bad, total).map(|s| format!("{s}; chromatic number matches on {chromatic_checked} graphs"))
}

fn criterion_cbalanced(integrity: &mut Integrity) -> Outcome {
    let mut graphs = common::connected_family(7);
    graphs.extend(common::random_graphs(8, 100, 8));
    let opts = SolverOptions::default();
    let mut bad = Vec::new();
    let mut total = 0;
    for c in [2, 3] {
        for (i, g) in graphs.iter().enumerate() {
            total += 1;
            let label = format!("c={c}, graph {i} (edges {:?})", g.edges().collect::<Vec<_>>());
            let res = cbalanced(g, c, true, &opts).map_err(|e| format!("{label}: {e}"))?;
            let expected = oracle::brute_cbalanced(g, c, true, CAP).map_err(|e| format!("{label}: {e}"))?;
            let got = res.as_ref().map(|r| r.cut_value);
            if got != expected {
                bad.push(format!("{label}: solver {got:?} oracle {expected:?}"));
            }
            if let Some(r) = &res {
                integrity.balanced(g, c, r.cut_value, &r.parts, &label);
            }
        }
    }
    for (name, g, want) in [
        ("P4", Graph::path(4), 1),
        ("K4", Graph::complete(4), 4),
        ("C6", Graph::cycle(6), 2),
    ] {
        total += 1;
        let got = cbalanced(&g, 2, true, &opts).map_err(|e| e.to_string())?.map(|r| r.cut_value);
        let oracle_value = oracle::brute_cbalanced(&g, 2, true, CAP).map_err(|e| e.to_string())?;
        if got != Some(want) || oracle_value != Some(want) {
            bad.push(format!("{name}, c=2: solver {got:?} oracle {oracle_value:?}, expected {want}"));
        }
    }
    mismatch(&bad, total)
}

/// Constraint-free sentences: the partition formulas and the pre-evaluated
/// cardMSO bodies under every pre-evaluation met by small prefix sizes.
fn mso_bodies() -> Vec<(String, Formula)> {
    let mut out: Vec<(String, Formula)> = ["independence", "clique"]
        .iter()
        .map(|n| (n.to_string(), corpus::shipped_formula(n).unwrap()))
        .collect();
    for (name, f) in cardmso_formulas() {
        let m = f.prefix.len();
        let mut alphas = BTreeSet::new();
        let mut sizes = vec![0usize; m];
        loop {
            alphas.insert(f.complying_alpha(&sizes));
            let Some(j) = (0..m).find(|&j| sizes[j] < 6) else { break };
            sizes[j] += 1;
            sizes[..j].iter_mut().for_each(|s| *s = 0);
        }
        let mut seen = BTreeSet::new();
        for alpha in alphas {
            let pre = f.pre_evaluate(&alpha).unwrap();
            if seen.insert(format!("{pre:?}")) {
                out.push((format!("{name}/alpha#{}", seen.len()), pre));
            }
        }
    }
    out
}

fn padded_graphs() -> Vec<Graph> {
    let mut out: Vec<Graph> = (7..=29).map(Graph::star).collect();
    for a in 2..=3 {
        out.extend((a..=30 - a).map(|b| Graph::complete_bipartite(a, b)));
    }
    out
}

fn criterion_shrinking() -> Outcome {
    let mut comparisons = 0;
    let mut bad = Vec::new();
    let plain = EvalOptions::default();
    let symmetric = EvalOptions {
        symmetry: true,
        ..EvalOptions::default()
    };
    let bodies = mso_bodies();
    let cases: Vec<(Graph, EvalOptions)> = family_up_to_6()
        .into_iter()
        .map(|g| (g, plain))
        .chain(padded_graphs().into_iter().map(|g| (g, symmetric)))
        .collect();
    for (name, f) in &bodies {
        let threshold = f.analyze().reduce_threshold();
        for (i, (g, opts)) in cases.iter().enumerate() {
            let mut partitions: Vec<TypePartition> = vec![nd_partition(g)];
            if let Ok((tp, _)) = partition_for_mode(g, PartitionMode::VertexCover, 20) {
                partitions.push(tp);
            }
            let mut victims = BTreeSet::new();
            for tp in &partitions {
                victims.extend(tp.types().iter().filter(|t| t.len() > threshold).map(|t| t[t.len() - 1]));
            }
            if victims.is_empty() {
                continue;
            }
            let before = mso_check(g, f, opts).map_err(|e| format!("{name} on graph {i}: {e}"))?;
            for v in victims {
                comparisons += 1;
                let keep: Vec<usize> = (0..g.n()).filter(|&u| u != v).collect();
                let after = mso_check(&g.induced_subgraph(&keep), f, opts).map_err(|e| e.to_string())?;
                if after != before {
                    bad.push(format!("{name}: graph {i} gives {before}, minus vertex {v} gives {after}"));
                }
            }
        }
    }
    mismatch(&bad, comparisons).map(|s| format!("{s} ({} sentences)", bodies.len()))
}

fn random_instance(rng: &mut StdRng) -> IlpInstance {
    let mut inst = IlpInstance::new();
    let n = rng.gen_range(1..=4);
    for i in 0..n {
        let lo = rng.gen_range(0..=6);
        let hi = rng.gen_range(lo..=6);
        inst.add_var(format!("x{i}"), lo, hi);
    }
    for _ in 0..rng.gen_range(0..=4) {
        let coeffs: Vec<(usize, i64)> = (0..n)
            .map(|i| (i, rng.gen_range(-3..=3)))
            .filter(|&(_, a)| a != 0)
            .collect();
        let rel = [Relation::Le, Relation::Ge, Relation::Eq][rng.gen_range(0..3)];
        inst.add_row(coeffs, rel, rng.gen_range(-6..=18));
    }
    if rng.gen_bool(0.8) {
        inst.set_objective((0..n).map(|i| (i, rng.gen_range(-3..=3))).collect());
    }
    inst
}

/// Feasibility and minimum by visiting every integer point of the box.
fn grid(inst: &IlpInstance) -> (bool, Option<i64>) {
    let mut x: Vec<i64> = inst.vars.iter().map(|v| v.lo).collect();
    let mut feasible = false;
    let mut best: Option<i64> = None;
    loop {
        if inst.is_satisfied(&x) {
            feasible = true;
            if let Some(value) = inst.objective_value(&x) {
                best = Some(best.map_or(value, |b| b.min(value)));
            }
        }
        let Some(j) = (0..x.len()).find(|&j| x[j] < inst.vars[j].hi) else {
            return (feasible, best);
        };
        x[j] += 1;
        for (k, var) in inst.vars.iter().enumerate().take(j) {
            x[k] = var.lo;
        }
    }
}

fn criterion_ilp() -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let opts = IlpOptions::default();
    let mut bad = Vec::new();
    for i in 0..1000 {
        let inst = random_instance(&mut rng);
        let (feasible, minimum) = grid(&inst);
        let f = ilp::solve_feasibility(&inst, &opts).map_err(|e| e.to_string())?;
        let m = if inst.objective.is_some() {
            ilp::solve_min(&inst, &opts).map_err(|e| e.to_string())?
        } else {
            f.clone()
        };
        let assignments_valid = [&f, &m]
            .iter()
            .all(|r| r.assignment.as_ref().is_none_or(|x| inst.is_satisfied(x)));
        if f.is_feasible() != feasible || m.is_feasible() != feasible || !assignments_valid {
            bad.push(format!("instance {i}: feasibility {} / {}, grid {feasible}", f.is_feasible(), m.is_feasible()));
        } else if m.objective_value != minimum {
            bad.push(format!("instance {i}: minimum {:?}, grid {minimum:?}", m.objective_value));
        }
    }
    mismatch(&bad, 1000)
}

fn median_time(g: &Graph, f: &Formula) -> Result<Duration, String> {
    let mut times = Vec::new();
    for _ in 0..15 {
        let start = Instant::now();
        let v = check(g, f, &SolverOptions::default()).map_err(|e| e.to_string())?;
        times.push(start.elapsed());
        if v.holds {
            return Err(format!("K1,{} reported an equal bipartition", g.n() - 1));
        }
    }
    times.sort();
    Ok(times[times.len() / 2])
}

fn criterion_scaling() -> Outcome {
    let f = corpus::shipped_formula("bipartite_equal").unwrap();
    let mut times = Vec::new();
    for n in [8, 16, 32, 64, 128] {
        times.push((n, median_time(&Graph::star(n), &f)?));
    }
    let ratio = times[4].1.as_secs_f64() / times[0].1.as_secs_f64().max(1e-9);
    let shown: Vec<String> = times.iter().map(|(n, t)| format!("n={n}: {:.2}ms", t.as_secs_f64() * 1e3)).collect();
    let detail = format!("{}; time(128)/time(8) = {ratio:.2}", shown.join(", "));
    if ratio <= 64.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let filters: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let selected = |name: &str| filters.is_empty() || filters.iter().any(|f| name.contains(f.as_str()));
    let mut integrity = Integrity::default();
    let mut failed = 0;
    let mut report = |name: &str, outcome: Outcome, elapsed: Duration| {
        let secs = elapsed.as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{secs:.1}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} [{secs:.1}s]");
            }
        }
    };
    type Criterion = fn(&mut Integrity) -> Outcome;
    let criteria: [(&str, Criterion); 6] = [
        ("cardmso_oracle_equivalence", criterion_cardmso),
        ("partition_oracle_equivalence", criterion_partition),
        ("cbalanced_oracle_equivalence", criterion_cbalanced),
        ("shrinking_property", |_| criterion_shrinking()),
        ("ilp_exactness", |_| criterion_ilp()),
        ("star_scaling", |_| criterion_scaling()),
    ];
    for (name, run) in criteria {
        if selected(name) {
            let start = Instant::now();
            let outcome = run(&mut integrity);
            report(name, outcome, start.elapsed());
        }
    }
    if selected("witness_integrity") {
        let outcome = if integrity.failures.is_empty() {
            Ok(format!("{} witnesses re-validated", integrity.checked))
        } else {
            Err(integrity.failures.join("; "))
        };
        report("witness_integrity", outcome, Duration::ZERO);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
