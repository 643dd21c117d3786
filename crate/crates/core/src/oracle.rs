//! Brute-force reference semantics.
//!
//! Everything here works directly on the syntax tree and the input graph. It
//! never consults covers, types, reductions or integer programs, so it can
//! serve as ground truth for the solvers.

use std::collections::HashMap;

use thiserror::Error;

use crate::formula::{is_set_name, Formula, FormulaError, LinearConstraint, Mso};
use crate::graph::Graph;

pub const DEFAULT_CAP: usize = 8;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error("graph has {n} vertices, above the oracle cap of {cap}")]
    CapExceeded { n: usize, cap: usize },
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

fn require_cap(g: &Graph, cap: usize) -> Result<(), OracleError> {
    if g.n() > cap || g.n() > 128 {
        Err(OracleError::CapExceeded { n: g.n(), cap })
    } else {
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Value {
    Vertex(usize),
    Set(u128),
}

struct Interp<'a> {
    n: usize,
    adj: Vec<u128>,
    constraints: &'a [LinearConstraint],
    env: Vec<(&'a str, Value)>,
}

impl<'a> Interp<'a> {
    fn new(g: &Graph, constraints: &'a [LinearConstraint]) -> Self {
        let adj = (0..g.n())
            .map(|v| g.neighbors(v).iter().fold(0u128, |m, &w| m | 1 << w))
            .collect();
        Interp {
            n: g.n(),
            adj,
            constraints,
            env: Vec::new(),
        }
    }

    fn lookup(&self, name: &str) -> Value {
        self.env
            .iter()
            .rev()
            .find(|(k, _)| *k == name)
            .map(|&(_, v)| v)
            .unwrap_or_else(|| panic!("unbound variable `{name}`"))
    }

    fn vertex(&self, name: &str) -> usize {
        match self.lookup(name) {
            Value::Vertex(v) => v,
            Value::Set(_) => panic!("`{name}` is a set"),
        }
    }

    fn set(&self, name: &str) -> u128 {
        match self.lookup(name) {
            Value::Set(s) => s,
            Value::Vertex(_) => panic!("`{name}` is a vertex"),
        }
    }

    fn eval(&mut self, f: &'a Mso) -> bool {
        match f {
            Mso::True => true,
            Mso::False => false,
            Mso::Member { vertex, set } => self.set(set) >> self.vertex(vertex) & 1 == 1,
            Mso::Adj(a, b) => self.adj[self.vertex(a)] >> self.vertex(b) & 1 == 1,
            Mso::VertexEq(a, b) => self.vertex(a) == self.vertex(b),
            Mso::SetEq(a, b) => self.set(a) == self.set(b),
            Mso::Constraint(i) => {
                let c = &self.constraints[*i];
                let side = |rho: &crate::formula::Rho| -> i64 {
                    assert!(rho.params.is_empty(), "unbound parameter");
                    rho.constant
                        + rho
                            .cards
                            .iter()
                            .map(|s| self.set(s).count_ones() as i64)
                            .sum::<i64>()
                };
                side(&c.lhs) <= side(&c.rhs)
            }
            Mso::Not(a) => !self.eval(a),
            Mso::And(a, b) => self.eval(a) && self.eval(b),
            Mso::Or(a, b) => self.eval(a) || self.eval(b),
            Mso::Implies(a, b) => !self.eval(a) || self.eval(b),
            Mso::Iff(a, b) => self.eval(a) == self.eval(b),
            Mso::Exists(v, body) => self.quantify(v, body, true),
            Mso::Forall(v, body) => self.quantify(v, body, false),
        }
    }

    fn quantify(&mut self, var: &'a str, body: &'a Mso, exists: bool) -> bool {
        let attempt = |it: &mut Self, value: Value| {
            it.env.push((var, value));
            let r = it.eval(body);
            it.env.pop();
            r == exists
        };
        let decided = if is_set_name(var) {
            (0u128..1u128 << self.n).any(|s| attempt(self, Value::Set(s)))
        } else {
            (0..self.n).any(|v| attempt(self, Value::Vertex(v)))
        };
        decided == exists
    }
}

/// `g ⊨ f` by direct recursion over the whole sentence, prefix included.
pub fn brute_check(g: &Graph, f: &Formula, cap: usize) -> Result<bool, OracleError> {
    require_cap(g, cap)?;
    f.require_parameter_free()?;
    let sentence = f
        .prefix
        .iter()
        .rev()
        .fold(f.body.clone(), |acc, z| Mso::exists(z.clone(), acc));
    let mut it = Interp::new(g, &f.constraints);
    Ok(it.eval(&sentence))
}

/// `g ⊨_χ φ̄`: the body of `f` with the prefix bound to `prefix`.
pub fn eval_with_prefix(g: &Graph, f: &Formula, prefix: &[Vec<usize>]) -> bool {
    assert!(g.n() <= 128, "direct evaluation supports at most 128 vertices");
    assert_eq!(prefix.len(), f.prefix.len());
    let mut it = Interp::new(g, &f.constraints);
    for (name, set) in f.prefix.iter().zip(prefix) {
        let mask = set.iter().fold(0u128, |m, &v| m | 1 << v);
        it.env.push((name, Value::Set(mask)));
    }
    it.eval(&f.body)
}

/// Truth value of each constraint when the prefix variables have the given
/// cardinalities.
pub fn constraint_values(f: &Formula, prefix_sizes: &[usize]) -> Vec<bool> {
    let size = |name: &str| {
        let i = f.prefix.iter().position(|p| p == name).expect("prefix variable");
        prefix_sizes[i] as i64
    };
    f.constraints
        .iter()
        .map(|c| {
            let side = |rho: &crate::formula::Rho| {
                rho.constant + rho.cards.iter().map(|s| size(s)).sum::<i64>()
            };
            side(&c.lhs) <= side(&c.rhs)
        })
        .collect()
}

/// Evaluates a prefix-free, constraint-free sentence on `g` directly.
pub fn models(g: &Graph, phi: &Formula) -> bool {
    let sentence = phi
        .prefix
        .iter()
        .rev()
        .fold(phi.body.clone(), |acc, z| Mso::exists(z.clone(), acc));
    Interp::new(g, &phi.constraints).eval(&sentence)
}

/// Calls `visit` with every partition of `0..n` into at most `max_blocks`
/// non-empty blocks, each block sorted and blocks ordered by smallest element.
/// Stops early when `visit` returns `true`.
fn for_each_set_partition(n: usize, max_blocks: usize, visit: &mut impl FnMut(&[Vec<usize>]) -> bool) -> bool {
    fn rec(
        v: usize,
        n: usize,
        max_blocks: usize,
        blocks: &mut Vec<Vec<usize>>,
        visit: &mut impl FnMut(&[Vec<usize>]) -> bool,
    ) -> bool {
        if v == n {
            return visit(blocks);
        }
        for b in 0..blocks.len() {
            blocks[b].push(v);
            let stop = rec(v + 1, n, max_blocks, blocks, visit);
            blocks[b].pop();
            if stop {
                return true;
            }
        }
        if blocks.len() < max_blocks {
            blocks.push(vec![v]);
            let stop = rec(v + 1, n, max_blocks, blocks, visit);
            blocks.pop();
            if stop {
                return true;
            }
        }
        false
    }
    rec(0, n, max_blocks, &mut Vec::new(), visit)
}

/// A partition of `V(g)` into `r` parts each inducing a model of `phi`, with
/// parts listed by smallest vertex and empty parts last.
pub fn brute_partition_witness(
    g: &Graph,
    phi: &Formula,
    r: usize,
    allow_empty: bool,
    cap: usize,
) -> Result<Option<Vec<Vec<usize>>>, OracleError> {
    require_cap(g, cap)?;
    phi.require_parameter_free()?;
    let empty_ok = allow_empty && models(&Graph::new(0), phi);
    let mut cache: HashMap<Vec<usize>, bool> = HashMap::new();
    let mut found = None;
    for_each_set_partition(g.n(), r, &mut |blocks| {
        let missing = r - blocks.len();
        if missing > 0 && !empty_ok {
            return false;
        }
        let ok = blocks.iter().all(|b| {
            *cache
                .entry(b.clone())
                .or_insert_with(|| models(&g.induced_subgraph(b), phi))
        });
        if ok {
            let mut parts = blocks.to_vec();
            parts.resize(r, Vec::new());
            found = Some(parts);
        }
        ok
    });
    Ok(found)
}

pub fn brute_partition(
    g: &Graph,
    phi: &Formula,
    r: usize,
    allow_empty: bool,
    cap: usize,
) -> Result<bool, OracleError> {
    Ok(brute_partition_witness(g, phi, r, allow_empty, cap)?.is_some())
}

/// Minimum number of cut edges over partitions into `c` parts whose sizes
/// differ by at most one, with the labelling achieving it (first in
/// lexicographic order). `None` if no such partition exists.
pub fn brute_cbalanced_witness(
    g: &Graph,
    c: usize,
    allow_empty: bool,
    cap: usize,
) -> Result<Option<(usize, Vec<usize>)>, OracleError> {
    require_cap(g, cap)?;
    assert!(c >= 1, "c must be positive");
    let n = g.n();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut label = vec![0usize; n];
    let mut best: Option<(usize, Vec<usize>)> = None;
    loop {
        let mut sizes = vec![0usize; c];
        for &l in &label {
            sizes[l] += 1;
        }
        let (lo, hi) = (*sizes.iter().min().unwrap(), *sizes.iter().max().unwrap());
        if hi - lo <= 1 && (allow_empty || lo > 0) {
            let cut = edges.iter().filter(|&&(u, v)| label[u] != label[v]).count();
            if best.as_ref().is_none_or(|(b, _)| cut < *b) {
                best = Some((cut, label.clone()));
            }
        }
        // Odometer with the last vertex as the least significant digit.
        let mut i = n;
        loop {
            if i == 0 {
                return Ok(best);
            }
            i -= 1;
            label[i] += 1;
            if label[i] < c {
                break;
            }
            label[i] = 0;
        }
    }
}

pub fn brute_cbalanced(
    g: &Graph,
    c: usize,
    allow_empty: bool,
    cap: usize,
) -> Result<Option<usize>, OracleError> {
    Ok(brute_cbalanced_witness(g, c, allow_empty, cap)?.map(|(cut, _)| cut))
}

/// Chromatic number by trying every colouring with `k = 0, 1, …` colours.
pub fn chromatic_number(g: &Graph) -> usize {
    let n = g.n();
    let edges: Vec<(usize, usize)> = g.edges().collect();
    for k in 0..=n {
        let mut found = false;
        for_each_set_partition(n, k, &mut |blocks| {
            let mut colour = vec![0; n];
            for (i, b) in blocks.iter().enumerate() {
                for &v in b {
                    colour[v] = i;
                }
            }
            found = edges.iter().all(|&(u, v)| colour[u] != colour[v]);
            found
        });
        if found {
            return k;
        }
    }
    n
}
