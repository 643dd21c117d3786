//! cardMSO sentences: abstract syntax, static analysis, parameter
//! substitution and pre-evaluation.
//!
//! A sentence has the normal form `∃Z₁…∃Z_m. φ̄` where the prefix variables
//! `Z_i` are the only variables that may occur inside linear cardinality
//! constraints `[ρ₁ ≤ ρ₂]`. Set variables start with an uppercase letter,
//! vertex variables with a lowercase letter.

mod parser;
mod print;

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

pub use parser::parse_formula;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("variable `{0}` inside a linear constraint is not a prefix variable")]
    NonPrefixInConstraint(String),
    #[error("variable `{0}` is not bound")]
    Unbound(String),
    #[error("variable `{0}` is bound twice on the same branch")]
    Shadowed(String),
    #[error("no binding for parameter `${0}`")]
    MissingParam(String),
    #[error("pre-evaluation has {found} values but the formula has {expected} constraints")]
    AlphaLength { expected: usize, found: usize },
    #[error("formula still contains {0} linear constraint(s)")]
    HasConstraints(usize),
    #[error("formula still contains unbound parameter(s): {0}")]
    HasParams(String),
}

/// `true` for set-variable names (uppercase initial).
pub fn is_set_name(name: &str) -> bool {
    name.chars().next().is_some_and(|c| c.is_ascii_uppercase())
}

/// MSO₁ syntax tree with linear-constraint leaves.
///
/// `Constraint(i)` refers to entry `i` of the owning [`Formula`]'s constraint
/// list. Binary connectives are binary so that printing is unambiguous.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Mso {
    True,
    False,
    Member { vertex: String, set: String },
    Adj(String, String),
    VertexEq(String, String),
    SetEq(String, String),
    Constraint(usize),
    Not(Box<Mso>),
    And(Box<Mso>, Box<Mso>),
    Or(Box<Mso>, Box<Mso>),
    Implies(Box<Mso>, Box<Mso>),
    Iff(Box<Mso>, Box<Mso>),
    Exists(String, Box<Mso>),
    Forall(String, Box<Mso>),
}

impl Mso {
    pub fn not(a: Mso) -> Mso {
        Mso::Not(Box::new(a))
    }

    pub fn and(a: Mso, b: Mso) -> Mso {
        Mso::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Mso, b: Mso) -> Mso {
        Mso::Or(Box::new(a), Box::new(b))
    }

    pub fn implies(a: Mso, b: Mso) -> Mso {
        Mso::Implies(Box::new(a), Box::new(b))
    }

    pub fn iff(a: Mso, b: Mso) -> Mso {
        Mso::Iff(Box::new(a), Box::new(b))
    }

    pub fn exists(var: impl Into<String>, body: Mso) -> Mso {
        Mso::Exists(var.into(), Box::new(body))
    }

    pub fn forall(var: impl Into<String>, body: Mso) -> Mso {
        Mso::Forall(var.into(), Box::new(body))
    }

    pub fn member(vertex: impl Into<String>, set: impl Into<String>) -> Mso {
        Mso::Member {
            vertex: vertex.into(),
            set: set.into(),
        }
    }

    pub fn adj(u: impl Into<String>, v: impl Into<String>) -> Mso {
        Mso::Adj(u.into(), v.into())
    }

    /// Left-nested conjunction; `True` when empty.
    pub fn all(items: impl IntoIterator<Item = Mso>) -> Mso {
        items.into_iter().reduce(Mso::and).unwrap_or(Mso::True)
    }

    /// Left-nested disjunction; `False` when empty.
    pub fn any(items: impl IntoIterator<Item = Mso>) -> Mso {
        items.into_iter().reduce(Mso::or).unwrap_or(Mso::False)
    }

    pub fn is_compound(&self) -> bool {
        !matches!(
            self,
            Mso::True
                | Mso::False
                | Mso::Member { .. }
                | Mso::Adj(..)
                | Mso::VertexEq(..)
                | Mso::SetEq(..)
                | Mso::Constraint(_)
        )
    }

    /// Pre-order visit of every node.
    pub fn visit(&self, f: &mut impl FnMut(&Mso)) {
        f(self);
        match self {
            Mso::Not(a) | Mso::Exists(_, a) | Mso::Forall(_, a) => a.visit(f),
            Mso::And(a, b) | Mso::Or(a, b) | Mso::Implies(a, b) | Mso::Iff(a, b) => {
                a.visit(f);
                b.visit(f);
            }
            _ => {}
        }
    }

    /// Rebuilds the tree bottom-up, replacing constraint leaves.
    pub fn map_constraints(&self, f: &impl Fn(usize) -> Mso) -> Mso {
        let rec = |a: &Mso| Box::new(a.map_constraints(f));
        match self {
            Mso::Constraint(i) => f(*i),
            Mso::Not(a) => Mso::Not(rec(a)),
            Mso::And(a, b) => Mso::And(rec(a), rec(b)),
            Mso::Or(a, b) => Mso::Or(rec(a), rec(b)),
            Mso::Implies(a, b) => Mso::Implies(rec(a), rec(b)),
            Mso::Iff(a, b) => Mso::Iff(rec(a), rec(b)),
            Mso::Exists(v, a) => Mso::Exists(v.clone(), rec(a)),
            Mso::Forall(v, a) => Mso::Forall(v.clone(), rec(a)),
            leaf => leaf.clone(),
        }
    }

    /// Constraint indices in left-to-right order.
    pub fn constraint_leaves(&self) -> Vec<usize> {
        let mut out = Vec::new();
        self.visit(&mut |n| {
            if let Mso::Constraint(i) = n {
                out.push(*i);
            }
        });
        out
    }
}

/// A `ρ`-expression: a sum of cardinality atoms, parameters and a constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct Rho {
    pub cards: Vec<String>,
    pub params: Vec<String>,
    pub constant: i64,
}

impl Rho {
    pub fn constant(c: i64) -> Rho {
        Rho {
            constant: c,
            ..Rho::default()
        }
    }

    pub fn card(set: impl Into<String>) -> Rho {
        Rho {
            cards: vec![set.into()],
            ..Rho::default()
        }
    }

    pub fn plus(mut self, other: Rho) -> Rho {
        self.cards.extend(other.cards);
        self.params.extend(other.params);
        self.constant += other.constant;
        self
    }

    /// Value under the given set cardinalities. Parameters must be bound.
    pub fn eval(&self, card: impl Fn(&str) -> i64) -> i64 {
        assert!(self.params.is_empty(), "unbound parameter in constraint");
        self.constant + self.cards.iter().map(|s| card(s)).sum::<i64>()
    }
}

/// `lhs ≤ rhs`; the only relation stored.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LinearConstraint {
    pub lhs: Rho,
    pub rhs: Rho,
}

impl LinearConstraint {
    pub fn holds(&self, card: impl Fn(&str) -> i64) -> bool {
        self.lhs.eval(&card) <= self.rhs.eval(&card)
    }

    /// `(coefficient per set name, constant)` of `lhs - rhs`, so the
    /// constraint reads `Σ coef·|Z| + constant ≤ 0`. Names appear in order of
    /// first occurrence.
    pub fn difference(&self) -> (Vec<(String, i64)>, i64) {
        let mut coefs: Vec<(String, i64)> = Vec::new();
        let mut add = |name: &String, c: i64| match coefs.iter_mut().find(|(n, _)| n == name) {
            Some((_, k)) => *k += c,
            None => coefs.push((name.clone(), c)),
        };
        for s in &self.lhs.cards {
            add(s, 1);
        }
        for s in &self.rhs.cards {
            add(s, -1);
        }
        assert!(
            self.lhs.params.is_empty() && self.rhs.params.is_empty(),
            "unbound parameter in constraint"
        );
        (coefs, self.lhs.constant - self.rhs.constant)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Formula {
    pub prefix: Vec<String>,
    pub body: Mso,
    pub constraints: Vec<LinearConstraint>,
}

/// Variable counts and the derived thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct FormulaStats {
    pub m: usize,
    pub q_s: usize,
    pub q_v: usize,
    pub constraint_count: usize,
    /// Set equality `X = Y` hides one vertex quantifier.
    pub uses_set_equality: bool,
}

impl FormulaStats {
    /// Vertex-variable count used by the thresholds, at least 1.
    pub fn effective_q_v(&self) -> usize {
        (self.q_v + usize::from(self.uses_set_equality)).max(1)
    }

    /// `2^{q_S} · q_v`: subtypes above this size are interchangeable.
    pub fn small_threshold(&self) -> usize {
        pow2_times(self.q_s, self.effective_q_v())
    }

    /// `2^{q_S + m} · q_v`: number of vertices kept per type.
    pub fn reduce_threshold(&self) -> usize {
        pow2_times(self.q_s + self.m, self.effective_q_v())
    }
}

fn pow2_times(exp: usize, factor: usize) -> usize {
    if exp >= usize::BITS as usize {
        return usize::MAX;
    }
    (1usize << exp).saturating_mul(factor)
}

impl Formula {
    /// A sentence without prefix or constraints.
    pub fn sentence(body: Mso) -> Formula {
        Formula {
            prefix: Vec::new(),
            body,
            constraints: Vec::new(),
        }
    }

    pub fn parse(text: &str) -> Result<Formula, FormulaError> {
        parse_formula(text)
    }

    /// Parameter names occurring in constraints, sorted.
    pub fn params(&self) -> BTreeSet<String> {
        self.constraints
            .iter()
            .flat_map(|c| c.lhs.params.iter().chain(&c.rhs.params))
            .cloned()
            .collect()
    }

    pub fn analyze(&self) -> FormulaStats {
        let mut vertex_vars = BTreeSet::new();
        let mut set_vars = BTreeSet::new();
        let mut uses_set_equality = false;
        self.body.visit(&mut |n| match n {
            Mso::Exists(v, _) | Mso::Forall(v, _) => {
                if is_set_name(v) {
                    set_vars.insert(v.clone());
                } else {
                    vertex_vars.insert(v.clone());
                }
            }
            Mso::SetEq(..) => uses_set_equality = true,
            _ => {}
        });
        FormulaStats {
            m: self.prefix.len(),
            q_s: set_vars.len(),
            q_v: vertex_vars.len(),
            constraint_count: self.constraints.len(),
            uses_set_equality,
        }
    }

    /// Replaces every parameter by its bound value. Returns the substituted
    /// formula and the names of bindings that matched no parameter.
    pub fn substitute_params(
        &self,
        bindings: &BTreeMap<String, i64>,
    ) -> Result<(Formula, Vec<String>), FormulaError> {
        let params = self.params();
        if let Some(missing) = params.iter().find(|p| !bindings.contains_key(*p)) {
            return Err(FormulaError::MissingParam(missing.clone()));
        }
        let unused = bindings
            .keys()
            .filter(|k| !params.contains(*k))
            .cloned()
            .collect();
        let subst = |rho: &Rho| Rho {
            cards: rho.cards.clone(),
            params: Vec::new(),
            constant: rho.constant + rho.params.iter().map(|p| bindings[p]).sum::<i64>(),
        };
        let constraints = self
            .constraints
            .iter()
            .map(|c| LinearConstraint {
                lhs: subst(&c.lhs),
                rhs: subst(&c.rhs),
            })
            .collect();
        Ok((
            Formula {
                prefix: self.prefix.clone(),
                body: self.body.clone(),
                constraints,
            },
            unused,
        ))
    }

    /// `α(φ̄)`: every constraint leaf replaced by its pre-evaluated truth value.
    pub fn pre_evaluated_body(&self, alpha: &[bool]) -> Result<Mso, FormulaError> {
        if alpha.len() != self.constraints.len() {
            return Err(FormulaError::AlphaLength {
                expected: self.constraints.len(),
                found: alpha.len(),
            });
        }
        Ok(self.body.map_constraints(&|i| if alpha[i] { Mso::True } else { Mso::False }))
    }

    /// The MSO₁ sentence `∃Z₁…∃Z_m. α(φ̄)`, returned with the prefix kept and
    /// no constraints.
    pub fn pre_evaluate(&self, alpha: &[bool]) -> Result<Formula, FormulaError> {
        Ok(Formula {
            prefix: self.prefix.clone(),
            body: self.pre_evaluated_body(alpha)?,
            constraints: Vec::new(),
        })
    }

    /// Truth values of all constraints under the given prefix cardinalities.
    pub fn complying_alpha(&self, prefix_sizes: &[usize]) -> Vec<bool> {
        let card = |name: &str| {
            let i = self
                .prefix
                .iter()
                .position(|p| p == name)
                .expect("constraint variable is a prefix variable");
            prefix_sizes[i] as i64
        };
        self.constraints.iter().map(|c| c.holds(card)).collect()
    }

    /// Errors unless the formula is free of parameters.
    pub fn require_parameter_free(&self) -> Result<(), FormulaError> {
        let params = self.params();
        if params.is_empty() {
            Ok(())
        } else {
            let names: Vec<String> = params.iter().map(|p| format!("${p}")).collect();
            Err(FormulaError::HasParams(names.join(", ")))
        }
    }

    /// Errors unless the formula is a plain MSO₁ sentence.
    pub fn require_constraint_free(&self) -> Result<(), FormulaError> {
        if self.body.constraint_leaves().is_empty() {
            Ok(())
        } else {
            Err(FormulaError::HasConstraints(self.constraints.len()))
        }
    }
}
