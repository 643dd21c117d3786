//! Exact integer linear programming over small, bounded domains.
//!
//! Depth-first branch and bound: before each branching step every row
//! tightens variable bounds until a fixpoint; the variable with the smallest
//! remaining domain (lowest index on ties) is then fixed to each of its values
//! in ascending order.

use std::fmt::Write as _;

use thiserror::Error;

pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum IlpError {
    #[error("branch-and-bound node budget of {0} exceeded")]
    NodeBudget(u64),
    #[error("variable `{name}` has lower bound {lo} above upper bound {hi}")]
    InvalidBounds { name: String, lo: i64, hi: i64 },
    #[error("row references undeclared variable index {0}")]
    UnknownVariable(usize),
    #[error("minimization requested but the instance has no objective")]
    NoObjective,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn symbol(self) -> &'static str {
        match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub lo: i64,
    pub hi: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub coeffs: Vec<(usize, i64)>,
    pub rel: Relation,
    pub rhs: i64,
}

impl Row {
    fn lhs(&self, x: &[i64]) -> i128 {
        self.coeffs
            .iter()
            .map(|&(i, a)| a as i128 * x[i] as i128)
            .sum()
    }

    pub fn satisfied_by(&self, x: &[i64]) -> bool {
        let lhs = self.lhs(x);
        let rhs = self.rhs as i128;
        match self.rel {
            Relation::Le => lhs <= rhs,
            Relation::Eq => lhs == rhs,
            Relation::Ge => lhs >= rhs,
        }
    }
}

/// Integer program `rows` over bounded `vars`, with an optional objective to
/// minimize.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IlpInstance {
    pub vars: Vec<Variable>,
    pub rows: Vec<Row>,
    pub objective: Option<Vec<(usize, i64)>>,
}

impl IlpInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lo: i64, hi: i64) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            lo,
            hi,
        });
        self.vars.len() - 1
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, i64)>, rel: Relation, rhs: i64) {
        self.rows.push(Row { coeffs, rel, rhs });
    }

    pub fn set_objective(&mut self, coeffs: Vec<(usize, i64)>) {
        self.objective = Some(coeffs);
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    pub fn validate(&self) -> Result<(), IlpError> {
        for v in &self.vars {
            if v.lo > v.hi {
                return Err(IlpError::InvalidBounds {
                    name: v.name.clone(),
                    lo: v.lo,
                    hi: v.hi,
                });
            }
        }
        let n = self.vars.len();
        let rows = self.rows.iter().map(|r| &r.coeffs);
        for coeffs in rows.chain(self.objective.iter()) {
            if let Some(&(i, _)) = coeffs.iter().find(|&&(i, _)| i >= n) {
                return Err(IlpError::UnknownVariable(i));
            }
        }
        Ok(())
    }

    /// `true` iff `x` respects every bound and row.
    pub fn is_satisfied(&self, x: &[i64]) -> bool {
        x.len() == self.vars.len()
            && self.vars.iter().zip(x).all(|(v, &xi)| v.lo <= xi && xi <= v.hi)
            && self.rows.iter().all(|r| r.satisfied_by(x))
    }

    pub fn objective_value(&self, x: &[i64]) -> Option<i64> {
        self.objective
            .as_ref()
            .map(|obj| obj.iter().map(|&(i, a)| a * x[i]).sum())
    }

    /// One line per bound and row: `<coef>*<var> ... <rel> <rhs>`.
    pub fn dump(&self) -> String {
        let term = |coeffs: &[(usize, i64)]| {
            coeffs
                .iter()
                .map(|&(i, a)| format!("{a}*{}", self.vars[i].name))
                .collect::<Vec<_>>()
                .join(" ")
        };
        let mut out = String::new();
        for v in &self.vars {
            let _ = writeln!(out, "1*{} >= {}", v.name, v.lo);
            let _ = writeln!(out, "1*{} <= {}", v.name, v.hi);
        }
        for r in &self.rows {
            let _ = writeln!(out, "{} {} {}", term(&r.coeffs), r.rel.symbol(), r.rhs);
        }
        if let Some(obj) = &self.objective {
            let _ = writeln!(out, "minimize {}", term(obj));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IlpStatus {
    Feasible,
    Infeasible,
    Optimal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IlpResult {
    pub status: IlpStatus,
    pub assignment: Option<Vec<i64>>,
    pub objective_value: Option<i64>,
    pub nodes: u64,
}

impl IlpResult {
    pub fn is_feasible(&self) -> bool {
        self.status != IlpStatus::Infeasible
    }
}

fn div_floor(a: i128, b: i128) -> i128 {
    let q = a / b;
    if (a % b != 0) && ((a < 0) != (b < 0)) {
        q - 1
    } else {
        q
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    -div_floor(-a, b)
}

/// `Σ a·x ≤ b`.
struct LeRow {
    coeffs: Vec<(usize, i128)>,
    rhs: i128,
}

struct Search<'a> {
    inst: &'a IlpInstance,
    rows: Vec<LeRow>,
    /// Index into `rows` of the incumbent cut `objective ≤ best - 1`.
    cut: Option<usize>,
    minimize: bool,
    best: Option<Vec<i64>>,
    nodes: u64,
    budget: u64,
}

impl Search<'_> {
    /// Tightens bounds to a fixpoint; `false` if some row cannot be met.
    fn propagate(&self, lo: &mut [i128], hi: &mut [i128]) -> bool {
        loop {
            let mut changed = false;
            for row in &self.rows {
                let mut min_sum: i128 = 0;
                for &(i, a) in &row.coeffs {
                    min_sum += if a > 0 { a * lo[i] } else { a * hi[i] };
                }
                if min_sum > row.rhs {
                    return false;
                }
                let slack = row.rhs - min_sum;
                for &(i, a) in &row.coeffs {
                    if a > 0 {
                        let bound = lo[i] + div_floor(slack, a);
                        if bound < hi[i] {
                            if bound < lo[i] {
                                return false;
                            }
                            hi[i] = bound;
                            changed = true;
                        }
                    } else if a < 0 {
                        let bound = hi[i] + div_ceil(slack, a);
                        if bound > lo[i] {
                            if bound > hi[i] {
                                return false;
                            }
                            lo[i] = bound;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return true;
            }
        }
    }

    fn dfs(&mut self, mut lo: Vec<i128>, mut hi: Vec<i128>) -> Result<bool, IlpError> {
        self.nodes += 1;
        if self.nodes > self.budget {
            return Err(IlpError::NodeBudget(self.budget));
        }
        if !self.propagate(&mut lo, &mut hi) {
            return Ok(false);
        }
        let branch = (0..lo.len())
            .filter(|&i| hi[i] > lo[i])
            .min_by_key(|&i| (hi[i] - lo[i], i));
        let Some(var) = branch else {
            let x: Vec<i64> = lo.iter().map(|&v| v as i64).collect();
            assert!(self.inst.is_satisfied(&x), "branch and bound produced an invalid point");
            if self.minimize {
                let value = self.inst.objective_value(&x).expect("objective present") as i128;
                let cut = self.cut.expect("minimization keeps an incumbent cut");
                self.rows[cut].rhs = value - 1;
            }
            self.best = Some(x);
            return Ok(!self.minimize);
        };
        for value in lo[var]..=hi[var] {
            let (mut l, mut h) = (lo.clone(), hi.clone());
            l[var] = value;
            h[var] = value;
            if self.dfs(l, h)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IlpOptions {
    pub node_budget: u64,
}

impl Default for IlpOptions {
    fn default() -> Self {
        IlpOptions {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

fn solve(inst: &IlpInstance, opts: &IlpOptions, minimize: bool) -> Result<IlpResult, IlpError> {
    inst.validate()?;
    let mut rows = Vec::new();
    for r in &inst.rows {
        let pos: Vec<(usize, i128)> = r.coeffs.iter().map(|&(i, a)| (i, a as i128)).collect();
        let neg: Vec<(usize, i128)> = pos.iter().map(|&(i, a)| (i, -a)).collect();
        let rhs = r.rhs as i128;
        match r.rel {
            Relation::Le => rows.push(LeRow { coeffs: pos, rhs }),
            Relation::Ge => rows.push(LeRow { coeffs: neg, rhs: -rhs }),
            Relation::Eq => {
                rows.push(LeRow { coeffs: pos, rhs });
                rows.push(LeRow { coeffs: neg, rhs: -rhs });
            }
        }
    }
    let mut cut = None;
    if minimize {
        let obj = inst.objective.as_ref().ok_or(IlpError::NoObjective)?;
        cut = Some(rows.len());
        rows.push(LeRow {
            coeffs: obj.iter().map(|&(i, a)| (i, a as i128)).collect(),
            rhs: i128::MAX / 4,
        });
    }
    let mut search = Search {
        inst,
        rows,
        cut,
        minimize,
        best: None,
        nodes: 0,
        budget: opts.node_budget,
    };
    let lo = inst.vars.iter().map(|v| v.lo as i128).collect();
    let hi = inst.vars.iter().map(|v| v.hi as i128).collect();
    search.dfs(lo, hi)?;
    let nodes = search.nodes;
    Ok(match search.best {
        None => IlpResult {
            status: IlpStatus::Infeasible,
            assignment: None,
            objective_value: None,
            nodes,
        },
        Some(x) => IlpResult {
            status: if minimize { IlpStatus::Optimal } else { IlpStatus::Feasible },
            objective_value: if minimize { inst.objective_value(&x) } else { None },
            assignment: Some(x),
            nodes,
        },
    })
}

/// Finds some integer point, the first one in branching order.
pub fn solve_feasibility(inst: &IlpInstance, opts: &IlpOptions) -> Result<IlpResult, IlpError> {
    solve(inst, opts, false)
}

/// Minimizes the objective; among optimal points the first found in branching
/// order is returned.
pub fn solve_min(inst: &IlpInstance, opts: &IlpOptions) -> Result<IlpResult, IlpError> {
    solve(inst, opts, true)
}
