//! Partitioning into parts that each induce a model of a fixed MSO₁ sentence.
//!
//! Vertex sets are classified by their shape: the number of vertices they take
//! from each type, with every count above the small threshold collapsed to ⊤.
//! Sets of equal shape are interchangeable for the sentence, so one
//! representative per shape is model checked and an integer program picks how
//! many parts of each satisfying shape to use.

use std::fmt;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use crate::formula::{Formula, FormulaStats};
use crate::graph::{partition_for_mode, Graph, TypePartition};
use crate::ilp::{self, IlpInstance, Relation};
use crate::mso_eval::{check_program, EvalOptions, Program};
use crate::solver::{SolverError, SolverOptions};

pub const DEFAULT_SHAPE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ShapeEntry {
    Exact(usize),
    Top,
}

impl fmt::Display for ShapeEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ShapeEntry::Exact(c) => write!(f, "{c}"),
            ShapeEntry::Top => f.write_str("T"),
        }
    }
}

/// One entry per type. `Top` only for types larger than the small threshold.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Shape(pub Vec<ShapeEntry>);

impl Shape {
    pub fn is_empty_set(&self) -> bool {
        self.0.iter().all(|e| *e == ShapeEntry::Exact(0))
    }
}

fn options_for(size: usize, small: usize) -> usize {
    size.min(small) + 1 + usize::from(size > small)
}

fn entry(option: usize, size: usize, small: usize) -> ShapeEntry {
    if option > size.min(small) {
        ShapeEntry::Top
    } else {
        ShapeEntry::Exact(option)
    }
}

/// Number of shapes, saturating at `u128::MAX`.
pub fn shape_count(tp: &TypePartition, stats: &FormulaStats) -> u128 {
    let small = stats.small_threshold();
    tp.types()
        .iter()
        .fold(1u128, |acc, t| acc.saturating_mul(options_for(t.len(), small) as u128))
}

/// All shapes in mixed-radix order, the last type varying fastest.
pub fn enumerate_shapes(tp: &TypePartition, stats: &FormulaStats, cap: u64) -> Result<Vec<Shape>, SolverError> {
    let count = shape_count(tp, stats);
    if count > cap as u128 {
        return Err(SolverError::ShapeBudget { count, cap });
    }
    let small = stats.small_threshold();
    let sizes: Vec<usize> = tp.types().iter().map(Vec::len).collect();
    let radix: Vec<usize> = sizes.iter().map(|&s| options_for(s, small)).collect();
    let mut digits = vec![0usize; sizes.len()];
    let mut shapes = Vec::with_capacity(count as usize);
    loop {
        shapes.push(Shape(
            digits
                .iter()
                .zip(&sizes)
                .map(|(&d, &size)| entry(d, size, small))
                .collect(),
        ));
        let mut i = digits.len();
        loop {
            if i == 0 {
                return Ok(shapes);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < radix[i] {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// A vertex set of the given shape: the lowest-indexed members of each type,
/// `small + 1` of them for ⊤.
pub fn representative(tp: &TypePartition, shape: &Shape, small: usize) -> Vec<usize> {
    let mut set: Vec<usize> = tp
        .types()
        .iter()
        .zip(&shape.0)
        .flat_map(|(members, e)| {
            let k = match *e {
                ShapeEntry::Exact(c) => c,
                ShapeEntry::Top => small + 1,
            };
            assert!(k <= members.len(), "shape does not fit its type");
            members[..k].iter().copied()
        })
        .collect();
    set.sort_unstable();
    set
}

pub fn shape_satisfies(
    g: &Graph,
    tp: &TypePartition,
    shape: &Shape,
    phi: &Program,
    stats: &FormulaStats,
    opts: &EvalOptions,
) -> Result<bool, SolverError> {
    let set = representative(tp, shape, stats.small_threshold());
    Ok(check_program(&g.induced_subgraph(&set), phi, opts)?)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct PartitionStats {
    pub shapes: u64,
    pub satisfying_shapes: u64,
    pub ilp_nodes: u64,
    #[serde(serialize_with = "as_seconds")]
    pub elapsed: Duration,
}

fn as_seconds<S: serde::Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone)]
pub struct PartitionResult {
    pub holds: bool,
    /// Exactly `r` disjoint parts covering the vertices.
    pub parts: Option<Vec<Vec<usize>>>,
    pub stats: PartitionStats,
    pub ilp: Option<String>,
}

/// Satisfying shapes of one `(graph, sentence)` pair, reusable across `r`.
pub struct ShapeTable {
    tp: TypePartition,
    small: usize,
    satisfying: Vec<Shape>,
    shapes: u64,
    setup: Duration,
    node_budget: u64,
}

impl ShapeTable {
    pub fn new(g: &Graph, phi: &Formula, opts: &SolverOptions, shape_cap: u64) -> Result<Self, SolverError> {
        let start = Instant::now();
        phi.require_parameter_free()?;
        phi.require_constraint_free()?;
        let stats = phi.analyze();
        let (tp, _) = partition_for_mode(g, opts.mode, opts.k_max)?;
        let shapes = enumerate_shapes(&tp, &stats, shape_cap)?;
        let prog = Program::compile_sentence(phi)?.fold(None);
        let eval = EvalOptions {
            budget: opts.eval_budget,
            symmetry: opts.symmetry,
        };
        let verdicts: Vec<bool> = shapes
            .par_iter()
            .map(|s| shape_satisfies(g, &tp, s, &prog, &stats, &eval))
            .collect::<Result<_, _>>()?;
        let count = shapes.len() as u64;
        let satisfying = shapes
            .into_iter()
            .zip(verdicts)
            .filter_map(|(s, ok)| ok.then_some(s))
            .collect();
        Ok(ShapeTable {
            tp,
            small: stats.small_threshold(),
            satisfying,
            shapes: count,
            setup: start.elapsed(),
            node_budget: opts.node_budget,
        })
    }

    pub fn satisfying(&self) -> &[Shape] {
        &self.satisfying
    }

    /// Counting program: `x_s ∈ [0, r]` parts of each usable shape.
    pub fn program(&self, r: usize, allow_empty: bool) -> (IlpInstance, Vec<usize>) {
        let usable: Vec<usize> = (0..self.satisfying.len())
            .filter(|&i| allow_empty || !self.satisfying[i].is_empty_set())
            .collect();
        let mut inst = IlpInstance::new();
        let vars: Vec<usize> = usable
            .iter()
            .map(|&i| {
                let label: Vec<String> = self.satisfying[i].0.iter().map(ToString::to_string).collect();
                inst.add_var(format!("x_[{}]", label.join(",")), 0, r as i64)
            })
            .collect();
        inst.add_row(vars.iter().map(|&x| (x, 1)).collect(), Relation::Eq, r as i64);
        for (t, members) in self.tp.types().iter().enumerate() {
            let size = members.len() as i64;
            let mut fit = Vec::new();
            let mut cover = Vec::new();
            for (&i, &x) in usable.iter().zip(&vars) {
                match self.satisfying[i].0[t] {
                    ShapeEntry::Exact(0) => {}
                    ShapeEntry::Exact(c) => {
                        fit.push((x, c as i64));
                        cover.push((x, c as i64));
                    }
                    ShapeEntry::Top => {
                        fit.push((x, self.small as i64));
                        cover.push((x, size));
                    }
                }
            }
            inst.add_row(fit, Relation::Le, size);
            inst.add_row(cover, Relation::Ge, size);
        }
        (inst, usable)
    }

    pub fn solve(&self, r: usize, allow_empty: bool, record_ilp: bool) -> Result<PartitionResult, SolverError> {
        let start = Instant::now();
        if r == 0 {
            return Err(SolverError::InvalidInput("r must be at least 1".into()));
        }
        let (inst, usable) = self.program(r, allow_empty);
        let res = ilp::solve_feasibility(
            &inst,
            &ilp::IlpOptions {
                node_budget: self.node_budget,
            },
        )?;
        let parts = res
            .assignment
            .as_ref()
            .map(|x| self.reconstruct(&usable, x))
            .transpose()?;
        Ok(PartitionResult {
            holds: parts.is_some(),
            parts,
            stats: PartitionStats {
                shapes: self.shapes,
                satisfying_shapes: self.satisfying.len() as u64,
                ilp_nodes: res.nodes,
                elapsed: self.setup + start.elapsed(),
            },
            ilp: record_ilp.then(|| inst.dump()),
        })
    }

    /// Exact counts first, then `small` vertices per ⊤ entry, then leftovers
    /// to the first part with ⊤ at that type.
    fn reconstruct(&self, usable: &[usize], x: &[i64]) -> Result<Vec<Vec<usize>>, SolverError> {
        let mut part_shapes: Vec<&Shape> = Vec::new();
        for (&i, &copies) in usable.iter().zip(x) {
            for _ in 0..copies {
                part_shapes.push(&self.satisfying[i]);
            }
        }
        let mut parts = vec![Vec::new(); part_shapes.len()];
        for (t, members) in self.tp.types().iter().enumerate() {
            let mut next = members.iter().copied();
            for (part, shape) in parts.iter_mut().zip(&part_shapes) {
                let k = match shape.0[t] {
                    ShapeEntry::Exact(c) => c,
                    ShapeEntry::Top => self.small,
                };
                part.extend(next.by_ref().take(k));
            }
            let leftover: Vec<usize> = next.collect();
            if leftover.is_empty() {
                continue;
            }
            let Some(p) = part_shapes.iter().position(|s| s.0[t] == ShapeEntry::Top) else {
                return Err(SolverError::InconsistentAssignment(format!(
                    "type {t} has {} unmapped vertices and no part with ⊤",
                    leftover.len()
                )));
            };
            parts[p].extend(leftover);
        }
        for part in &mut parts {
            part.sort_unstable();
        }
        Ok(parts)
    }
}

/// Can `V(g)` be split into `r` parts that each induce a model of `phi`?
pub fn mso_partition(
    g: &Graph,
    phi: &Formula,
    r: usize,
    allow_empty: bool,
    opts: &SolverOptions,
) -> Result<PartitionResult, SolverError> {
    ShapeTable::new(g, phi, opts, DEFAULT_SHAPE_CAP)?.solve(r, allow_empty, opts.record_ilps)
}
