//! Decision procedure for cardMSO on graphs with few types.
//!
//! For every pre-evaluation `α` of the linear constraints (a binary counter,
//! all-true first, skipping those no prefix cardinalities satisfy), the prefix assignments satisfying `α(φ̄)` on the reduced
//! graph are enumerated, and an integer program decides whether one of them
//! extends to the full graph with cardinalities that comply with `α`.

use std::collections::HashMap;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::formula::{Formula, FormulaError, FormulaStats};
use crate::graph::{partition_for_mode, Graph, GraphError, PartitionMode, TypePartition, VertexCover};
use crate::ilp::{self, IlpError, IlpInstance, IlpOptions, Relation, DEFAULT_NODE_BUDGET};
use crate::mso_eval::{reduce_graph, EvalError, PrefixEnumerator, Program, ReducedGraph, Tri, DEFAULT_EVAL_BUDGET};

/// Pre-evaluations are kept in a `u64`.
pub const MAX_CONSTRAINTS: usize = 63;
/// Subtypes per type are indexed by a `2^m` bitmask.
pub const MAX_PREFIX: usize = 16;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Formula(#[from] FormulaError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ilp(#[from] IlpError),
    #[error("{0} linear constraints; at most {MAX_CONSTRAINTS} are supported")]
    TooManyConstraints(usize),
    #[error("{0} prefix variables; at most {MAX_PREFIX} are supported")]
    TooManyPrefixVariables(usize),
    #[error("inconsistent extension: {0}")]
    InconsistentAssignment(String),
    #[error("{count} shapes exceed the cap of {cap}")]
    ShapeBudget { count: u128, cap: u64 },
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl SolverError {
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            SolverError::Eval(EvalError::Budget(_)) | SolverError::Ilp(IlpError::NodeBudget(_))
        )
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub mode: PartitionMode,
    pub k_max: usize,
    /// Enumerate one prefix assignment per per-type signature multiset.
    pub dedup: bool,
    pub node_budget: u64,
    pub eval_budget: u64,
    /// Symmetry reduction in direct model checking (used by partitioning).
    pub symmetry: bool,
    /// Keep a text dump of every integer program that is solved.
    pub record_ilps: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mode: PartitionMode::VertexCover,
            k_max: 20,
            dedup: true,
            node_budget: DEFAULT_NODE_BUDGET,
            eval_budget: DEFAULT_EVAL_BUDGET,
            symmetry: false,
            record_ilps: false,
        }
    }
}

impl SolverOptions {
    pub(crate) fn ilp(&self) -> IlpOptions {
        IlpOptions {
            node_budget: self.node_budget,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SolverStats {
    pub pre_evaluations: u64,
    pub prefix_assignments: u64,
    pub ilp_solves: u64,
    #[serde(serialize_with = "as_seconds")]
    pub elapsed: Duration,
}

fn as_seconds<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

/// Prefix sets on the input graph together with the pre-evaluation they
/// comply with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub sets: Vec<Vec<usize>>,
    pub alpha: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub holds: bool,
    pub witness: Option<Witness>,
    pub stats: SolverStats,
    pub ilps: Vec<String>,
}

/// Extension program with the variable index of each `(type, signature)`.
#[derive(Debug, Clone)]
pub struct ExtensionIlp {
    pub instance: IlpInstance,
    pub var_of: Vec<Vec<usize>>,
}

/// `counts[t][σ]`: vertices of reduced type `t` with signature `σ`.
pub fn subtype_counts(rg: &ReducedGraph, chi_phi: &[u128]) -> Vec<Vec<usize>> {
    let width = 1usize << chi_phi.len();
    let mut counts = vec![vec![0usize; width]; rg.types.len()];
    for v in 0..rg.graph.n() {
        counts[rg.types.type_of(v)][signature(chi_phi, v)] += 1;
    }
    counts
}

fn signature(masks: &[u128], v: usize) -> usize {
    masks
        .iter()
        .enumerate()
        .fold(0, |acc, (j, &m)| acc | ((m >> v & 1) as usize) << j)
}

/// `Σ_i coef_i·|Z_i| + constant ≤ 0` for each constraint, with prefix indices.
fn constraint_rows(f: &Formula) -> Vec<(Vec<(usize, i64)>, i64)> {
    f.constraints
        .iter()
        .map(|c| {
            let (coefs, constant) = c.difference();
            let coefs = coefs
                .into_iter()
                .map(|(name, a)| {
                    let i = f.prefix.iter().position(|p| *p == name).expect("prefix variable");
                    (i, a)
                })
                .collect();
            (coefs, constant)
        })
        .collect()
}

fn sig_coef(coefs: &[(usize, i64)], sig: usize) -> i64 {
    coefs.iter().filter(|&&(i, _)| sig >> i & 1 == 1).map(|&(_, a)| a).sum()
}

pub fn build_extension_ilp(
    rg: &ReducedGraph,
    chi_phi: &[u128],
    alpha: &[bool],
    f: &Formula,
    stats: &FormulaStats,
) -> ExtensionIlp {
    let counts = subtype_counts(rg, chi_phi);
    build_from_counts(rg, &counts, alpha, &constraint_rows(f), stats.small_threshold())
}

fn build_from_counts(
    rg: &ReducedGraph,
    counts: &[Vec<usize>],
    alpha: &[bool],
    rows: &[(Vec<(usize, i64)>, i64)],
    small: usize,
) -> ExtensionIlp {
    let mut inst = IlpInstance::new();
    let mut var_of = Vec::with_capacity(counts.len());
    for (t, per_sig) in counts.iter().enumerate() {
        let size = rg.original_sizes[t] as i64;
        let mut vars = Vec::with_capacity(per_sig.len());
        for (sig, &c) in per_sig.iter().enumerate() {
            let x = inst.add_var(format!("x_t{t}_s{sig}"), 0, size);
            // Sizes at or above `small` are interchangeable, so only a lower
            // bound is imposed on those.
            let rel = if c < small { Relation::Eq } else { Relation::Ge };
            inst.add_row(vec![(x, 1)], rel, c as i64);
            vars.push(x);
        }
        inst.add_row(vars.iter().map(|&x| (x, 1)).collect(), Relation::Eq, size);
        var_of.push(vars);
    }
    for ((coefs, constant), &holds) in rows.iter().zip(alpha) {
        let mut lhs = Vec::new();
        for vars in &var_of {
            for (sig, &x) in vars.iter().enumerate() {
                let a = sig_coef(coefs, sig);
                if a != 0 {
                    lhs.push((x, a));
                }
            }
        }
        if holds {
            inst.add_row(lhs, Relation::Le, -constant);
        } else {
            inst.add_row(lhs, Relation::Ge, 1 - constant);
        }
    }
    ExtensionIlp { instance: inst, var_of }
}

/// Extends `chi_phi` to the input graph. Deleted vertices of each type are
/// handed out in index order, signatures in ascending order.
pub fn extract_witness(
    chi_phi: &[u128],
    ext: &ExtensionIlp,
    assignment: &[i64],
    rg: &ReducedGraph,
) -> Result<Vec<Vec<usize>>, SolverError> {
    let m = chi_phi.len();
    let mut sets = vec![Vec::new(); m];
    let place = |sets: &mut Vec<Vec<usize>>, v: usize, sig: usize| {
        for (j, set) in sets.iter_mut().enumerate() {
            if sig >> j & 1 == 1 {
                set.push(v);
            }
        }
    };
    let counts = subtype_counts(rg, chi_phi);
    for v in 0..rg.graph.n() {
        place(&mut sets, rg.to_original[v], signature(chi_phi, v));
    }
    for (t, deleted) in rg.deleted.iter().enumerate() {
        let mut pending = deleted.iter();
        for (sig, &x) in ext.var_of[t].iter().enumerate() {
            let extra = assignment[x] - counts[t][sig] as i64;
            if extra < 0 {
                return Err(SolverError::InconsistentAssignment(format!(
                    "type {t} signature {sig}: {} below the reduced count {}",
                    assignment[x], counts[t][sig]
                )));
            }
            for _ in 0..extra {
                let v = pending.next().ok_or_else(|| {
                    SolverError::InconsistentAssignment(format!("type {t} has too few deleted vertices"))
                })?;
                place(&mut sets, *v, sig);
            }
        }
        if pending.next().is_some() {
            return Err(SolverError::InconsistentAssignment(format!(
                "type {t} has unassigned deleted vertices"
            )));
        }
    }
    for set in &mut sets {
        set.sort_unstable();
    }
    Ok(sets)
}

/// A satisfying prefix assignment on the reduced graph.
pub(crate) struct Candidate {
    pub masks: Vec<u128>,
    pub counts: Vec<Vec<usize>>,
}

/// Constraint bits fixed by the per-type sums and the small-subtype pins.
/// `None` if those alone are infeasible.
fn forced_bits(
    counts: &[Vec<usize>],
    sizes: &[usize],
    rows: &[(Vec<(usize, i64)>, i64)],
    small: usize,
) -> Option<(u64, u64)> {
    for (per_sig, &size) in counts.iter().zip(sizes) {
        let pinned: usize = per_sig.iter().filter(|&&c| c < small).sum();
        let has_large = per_sig.iter().any(|&c| c >= small);
        let total: usize = per_sig.iter().sum();
        if (!has_large && pinned != size) || total > size {
            return None;
        }
    }
    let (mut mask, mut value) = (0u64, 0u64);
    for (i, (coefs, constant)) in rows.iter().enumerate() {
        let (mut lo, mut hi) = (*constant as i128, *constant as i128);
        for (per_sig, &size) in counts.iter().zip(sizes) {
            let mut slack = size as i128;
            let (mut cmin, mut cmax) = (i128::MAX, i128::MIN);
            for (sig, &c) in per_sig.iter().enumerate() {
                let a = sig_coef(coefs, sig) as i128;
                lo += a * c as i128;
                hi += a * c as i128;
                slack -= c as i128;
                if c >= small {
                    cmin = cmin.min(a);
                    cmax = cmax.max(a);
                }
            }
            if slack > 0 {
                lo += slack * cmin;
                hi += slack * cmax;
            }
        }
        if hi <= 0 {
            mask |= 1 << i;
            value |= 1 << i;
        } else if lo > 0 {
            mask |= 1 << i;
        }
    }
    Some((mask, value))
}

/// Candidates of one folded body, indexed by their forced constraint bits.
pub(crate) struct CandidatePool {
    candidates: Vec<Candidate>,
    by_mask: Vec<(u64, HashMap<u64, Vec<usize>>)>,
}

impl CandidatePool {
    fn compatible(&self, alpha: u64) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .by_mask
            .iter()
            .filter_map(|(mask, by_value)| by_value.get(&(alpha & mask)))
            .flatten()
            .copied()
            .collect();
        out.sort_unstable();
        out
    }
}

/// Shared setup for everything built on the extension programs.
pub(crate) struct Pipeline<'a> {
    pub f: &'a Formula,
    pub stats: FormulaStats,
    pub tp: TypePartition,
    pub cover: Option<VertexCover>,
    pub rg: ReducedGraph,
    prog: Program,
    rows: Vec<(Vec<(usize, i64)>, i64)>,
    opts: SolverOptions,
}

/// One `(α, χ_φ)` pair whose extension program must be solved.
pub(crate) struct WorkItem<'c> {
    pub alpha: Vec<bool>,
    pub candidate: &'c Candidate,
}

impl<'a> Pipeline<'a> {
    pub fn new(g: &Graph, f: &'a Formula, opts: &SolverOptions) -> Result<Self, SolverError> {
        f.require_parameter_free()?;
        if f.constraints.len() > MAX_CONSTRAINTS {
            return Err(SolverError::TooManyConstraints(f.constraints.len()));
        }
        if f.prefix.len() > MAX_PREFIX {
            return Err(SolverError::TooManyPrefixVariables(f.prefix.len()));
        }
        let stats = f.analyze();
        let (tp, cover) = partition_for_mode(g, opts.mode, opts.k_max)?;
        let rg = reduce_graph(g, &tp, &stats);
        let prog = Program::compile(f)?;
        Ok(Pipeline {
            f,
            stats,
            tp,
            cover,
            rg,
            prog,
            rows: constraint_rows(f),
            opts: *opts,
        })
    }

    pub fn build(&self, cand: &Candidate, alpha: &[bool]) -> ExtensionIlp {
        build_from_counts(&self.rg, &cand.counts, alpha, &self.rows, self.stats.small_threshold())
    }

    fn candidate(&self, masks: Vec<u128>) -> Candidate {
        let counts = subtype_counts(&self.rg, &masks);
        Candidate { masks, counts }
    }

    fn enumerator<'p>(&self, prog: &'p Program, canonical: bool) -> Result<PrefixEnumerator<'p>, SolverError> {
        let tp = canonical.then_some(&self.rg.types);
        Ok(PrefixEnumerator::new(&self.rg.graph, prog, tp, self.opts.eval_budget)?)
    }

    fn pool(&self, prog: &Program, counters: &mut SolverStats) -> Result<CandidatePool, SolverError> {
        let mut e = self.enumerator(prog, true)?;
        let small = self.stats.small_threshold();
        let mut candidates = Vec::new();
        let mut by_mask: Vec<(u64, HashMap<u64, Vec<usize>>)> = Vec::new();
        while let Some(masks) = e.next_masks()? {
            counters.prefix_assignments += 1;
            let cand = self.candidate(masks);
            let Some((mask, value)) = forced_bits(&cand.counts, &self.rg.original_sizes, &self.rows, small)
            else {
                continue;
            };
            let idx = candidates.len();
            candidates.push(cand);
            let slot = match by_mask.iter().position(|(m, _)| *m == mask) {
                Some(p) => p,
                None => {
                    by_mask.push((mask, HashMap::new()));
                    by_mask.len() - 1
                }
            };
            by_mask[slot].1.entry(value).or_default().push(idx);
        }
        Ok(CandidatePool { candidates, by_mask })
    }

    /// Feeds work items to `visit` in `(α, χ_φ)` order, one batch per `α`.
    pub fn run(
        &self,
        counters: &mut SolverStats,
        mut visit: impl FnMut(&[WorkItem<'_>], &mut SolverStats) -> Result<ControlFlow<()>, SolverError>,
    ) -> Result<(), SolverError> {
        let l = self.f.constraints.len();
        let full: u64 = if l == 0 { 0 } else { u64::MAX >> (64 - l) };
        let bearing = self.prog.constraint_bearing();
        // Fold key → index into `programs`; folds are memoised per key.
        let mut fold_of: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut program_index: HashMap<Program, usize> = HashMap::new();
        let mut programs: Vec<Program> = Vec::new();
        let mut pools: Vec<Option<CandidatePool>> = Vec::new();
        let mut key = Vec::new();
        let mut leaf = |bits: u64, counters: &mut SolverStats| -> Result<ControlFlow<()>, SolverError> {
            counters.pre_evaluations += 1;
            let alpha: Vec<bool> = (0..l).map(|i| bits >> i & 1 == 1).collect();
            if self.prog.fold_key(&alpha, &bearing, &mut key) == Tri::F {
                return Ok(ControlFlow::Continue(()));
            }
            let pi = match fold_of.get(&key) {
                Some(&pi) => pi,
                None => {
                    let folded = self.prog.fold(Some(&alpha));
                    let pi = *program_index.entry(folded.clone()).or_insert_with(|| {
                        programs.push(folded);
                        pools.push(None);
                        programs.len() - 1
                    });
                    fold_of.insert(key.clone(), pi);
                    pi
                }
            };
            let folded = &programs[pi];
            if self.opts.dedup {
                if pools[pi].is_none() {
                    pools[pi] = Some(self.pool(folded, counters)?);
                }
                let pool = pools[pi].as_ref().expect("pool built");
                let items: Vec<WorkItem<'_>> = pool
                    .compatible(bits & full)
                    .into_iter()
                    .map(|i| WorkItem {
                        alpha: alpha.clone(),
                        candidate: &pool.candidates[i],
                    })
                    .collect();
                if items.is_empty() {
                    return Ok(ControlFlow::Continue(()));
                }
                return visit(&items, counters);
            }
            let mut e = self.enumerator(folded, false)?;
            while let Some(masks) = e.next_masks()? {
                counters.prefix_assignments += 1;
                let cand = self.candidate(masks);
                let item = WorkItem {
                    alpha: alpha.clone(),
                    candidate: &cand,
                };
                if visit(std::slice::from_ref(&item), counters)?.is_break() {
                    return Ok(ControlFlow::Break(()));
                }
            }
            Ok(ControlFlow::Continue(()))
        };
        let mut sizes = self.size_program();
        self.consistent_alphas(&mut sizes, l, 0, counters, &mut leaf).map(|_| ())
    }

    /// Prefix cardinalities in `[0, n]`; rows are added per decided bit.
    fn size_program(&self) -> IlpInstance {
        let n: usize = self.rg.original_sizes.iter().sum();
        let mut inst = IlpInstance::new();
        for z in &self.f.prefix {
            inst.add_var(format!("|{z}|"), 0, n as i64);
        }
        inst
    }

    /// Depth-first over bits `l-1, …, 0`, true before false, which is the
    /// counter order. A branch is cut once the decided constraints admit no
    /// prefix cardinalities.
    fn consistent_alphas(
        &self,
        sizes: &mut IlpInstance,
        remaining: usize,
        bits: u64,
        counters: &mut SolverStats,
        leaf: &mut impl FnMut(u64, &mut SolverStats) -> Result<ControlFlow<()>, SolverError>,
    ) -> Result<ControlFlow<()>, SolverError> {
        if remaining == 0 {
            return leaf(bits, counters);
        }
        let i = remaining - 1;
        let (coefs, constant) = &self.rows[i];
        for value in [true, false] {
            if value {
                sizes.add_row(coefs.clone(), Relation::Le, -constant);
            } else {
                sizes.add_row(coefs.clone(), Relation::Ge, 1 - constant);
            }
            let feasible = ilp::solve_feasibility(sizes, &self.opts.ilp())?.is_feasible();
            let flow = if feasible {
                self.consistent_alphas(sizes, i, bits | u64::from(value) << i, counters, leaf)?
            } else {
                ControlFlow::Continue(())
            };
            sizes.rows.pop();
            if flow.is_break() {
                return Ok(flow);
            }
        }
        Ok(ControlFlow::Continue(()))
    }
}

/// Decides `g ⊨ f`; the witness comes from the first feasible work item.
pub fn check(g: &Graph, f: &Formula, opts: &SolverOptions) -> Result<Verdict, SolverError> {
    let start = Instant::now();
    let pipeline = Pipeline::new(g, f, opts)?;
    let mut counters = SolverStats::default();
    let mut found: Option<Witness> = None;
    let mut ilps = Vec::new();
    pipeline.run(&mut counters, |items, counters| {
        let built: Vec<ExtensionIlp> = items.iter().map(|it| pipeline.build(it.candidate, &it.alpha)).collect();
        if opts.record_ilps {
            ilps.extend(built.iter().map(|e| e.instance.dump()));
        }
        let ilp_opts = opts.ilp();
        let results: Vec<Option<Result<Vec<i64>, IlpError>>> = built
            .par_iter()
            .map(|e| match ilp::solve_feasibility(&e.instance, &ilp_opts) {
                Ok(r) => r.assignment.map(Ok),
                Err(err) => Some(Err(err)),
            })
            .collect();
        for ((item, ext), res) in items.iter().zip(&built).zip(results) {
            counters.ilp_solves += 1;
            if let Some(res) = res {
                let x = res?;
                let sets = extract_witness(&item.candidate.masks, ext, &x, &pipeline.rg)?;
                found = Some(Witness {
                    sets,
                    alpha: item.alpha.clone(),
                });
                return Ok(ControlFlow::Break(()));
            }
        }
        Ok(ControlFlow::Continue(()))
    })?;
    counters.elapsed = start.elapsed();
    Ok(Verdict {
        holds: found.is_some(),
        witness: found,
        stats: counters,
        ilps,
    })
}
