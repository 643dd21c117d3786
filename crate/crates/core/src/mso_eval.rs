//! Exhaustive MSO₁ evaluation, graph reduction, and enumeration of satisfying
//! prefix assignments.
//!
//! Formulas are compiled into a flat [`Program`] whose variables are slots:
//! prefix set variables take set slots `0..m`, a body set quantifier at set
//! depth `d` takes slot `m + d`, and a vertex quantifier at vertex depth `d`
//! takes vertex slot `d`. Evaluation is three-valued so that the enumerator
//! can discard partial prefix assignments early; with every prefix vertex
//! decided it coincides with ordinary two-valued semantics.

use thiserror::Error;

use crate::formula::{is_set_name, Formula, FormulaError, FormulaStats, Mso};
use crate::graph::{nd_partition, Graph, TypePartition};

/// Carrier graphs are evaluated with `u128` vertex masks.
pub const MAX_CARRIER: usize = 128;

pub const DEFAULT_EVAL_BUDGET: u64 = 4_000_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("evaluation budget of {0} steps exceeded")]
    Budget(u64),
    #[error("graph has {0} vertices; direct evaluation supports at most {MAX_CARRIER}")]
    TooLarge(usize),
    #[error("formula uses {0} variable slots; at most 64 are supported")]
    TooManySlots(usize),
    #[error(transparent)]
    Formula(#[from] FormulaError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sort {
    Vertex,
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Node {
    True,
    False,
    Member { vertex: u16, set: u16 },
    Adj(u16, u16),
    VertexEq(u16, u16),
    SetEq(u16, u16),
    Constraint(u32),
    Not(u32),
    And(u32, u32),
    Or(u32, u32),
    Implies(u32, u32),
    Iff(u32, u32),
    Exists { sort: Sort, slot: u16, body: u32 },
    Forall { sort: Sort, slot: u16, body: u32 },
}

/// Compiled formula. Nodes are stored children-first, so two programs with the
/// same structure compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Program {
    nodes: Vec<Node>,
    root: u32,
    prefix_len: usize,
    vertex_slots: usize,
    set_slots: usize,
}

struct Compiler<'a> {
    nodes: Vec<Node>,
    prefix: &'a [String],
    vertex_scope: Vec<String>,
    set_scope: Vec<String>,
    max_vertex: usize,
    max_set: usize,
}

impl Compiler<'_> {
    fn push(&mut self, n: Node) -> u32 {
        self.nodes.push(n);
        (self.nodes.len() - 1) as u32
    }

    fn vertex(&self, name: &str) -> Result<u16, FormulaError> {
        self.vertex_scope
            .iter()
            .rposition(|v| v == name)
            .map(|i| i as u16)
            .ok_or_else(|| FormulaError::Unbound(name.to_string()))
    }

    fn set(&self, name: &str) -> Result<u16, FormulaError> {
        if let Some(i) = self.set_scope.iter().rposition(|v| v == name) {
            return Ok((self.prefix.len() + i) as u16);
        }
        self.prefix
            .iter()
            .position(|v| v == name)
            .map(|i| i as u16)
            .ok_or_else(|| FormulaError::Unbound(name.to_string()))
    }

    fn compile(&mut self, f: &Mso) -> Result<u32, FormulaError> {
        let node = match f {
            Mso::True => Node::True,
            Mso::False => Node::False,
            Mso::Member { vertex, set } => Node::Member {
                vertex: self.vertex(vertex)?,
                set: self.set(set)?,
            },
            Mso::Adj(a, b) => Node::Adj(self.vertex(a)?, self.vertex(b)?),
            Mso::VertexEq(a, b) => Node::VertexEq(self.vertex(a)?, self.vertex(b)?),
            Mso::SetEq(a, b) => Node::SetEq(self.set(a)?, self.set(b)?),
            Mso::Constraint(i) => Node::Constraint(*i as u32),
            Mso::Not(a) => Node::Not(self.compile(a)?),
            Mso::And(a, b) => Node::And(self.compile(a)?, self.compile(b)?),
            Mso::Or(a, b) => Node::Or(self.compile(a)?, self.compile(b)?),
            Mso::Implies(a, b) => Node::Implies(self.compile(a)?, self.compile(b)?),
            Mso::Iff(a, b) => Node::Iff(self.compile(a)?, self.compile(b)?),
            Mso::Exists(v, a) | Mso::Forall(v, a) => {
                let (sort, slot) = if is_set_name(v) {
                    self.set_scope.push(v.clone());
                    self.max_set = self.max_set.max(self.set_scope.len());
                    (Sort::Set, (self.prefix.len() + self.set_scope.len() - 1) as u16)
                } else {
                    self.vertex_scope.push(v.clone());
                    self.max_vertex = self.max_vertex.max(self.vertex_scope.len());
                    (Sort::Vertex, (self.vertex_scope.len() - 1) as u16)
                };
                let body = self.compile(a)?;
                match sort {
                    Sort::Set => self.set_scope.pop(),
                    Sort::Vertex => self.vertex_scope.pop(),
                };
                if matches!(f, Mso::Exists(..)) {
                    Node::Exists { sort, slot, body }
                } else {
                    Node::Forall { sort, slot, body }
                }
            }
        };
        Ok(self.push(node))
    }
}

impl Program {
    /// Compiles the body of `f`; prefix variables stay free in slots `0..m`.
    pub fn compile(f: &Formula) -> Result<Program, EvalError> {
        Self::build(&f.prefix, &f.body)
    }

    /// Compiles `f` as a closed sentence: the prefix becomes leading
    /// existential set quantifiers.
    pub fn compile_sentence(f: &Formula) -> Result<Program, EvalError> {
        let body = f
            .prefix
            .iter()
            .rev()
            .fold(f.body.clone(), |acc, z| Mso::exists(z.clone(), acc));
        Self::build(&[], &body)
    }

    fn build(prefix: &[String], body: &Mso) -> Result<Program, EvalError> {
        let mut c = Compiler {
            nodes: Vec::new(),
            prefix,
            vertex_scope: Vec::new(),
            set_scope: Vec::new(),
            max_vertex: 0,
            max_set: 0,
        };
        let root = c.compile(body)?;
        let set_slots = prefix.len() + c.max_set;
        if set_slots > 64 || c.max_vertex > 64 {
            return Err(EvalError::TooManySlots(set_slots.max(c.max_vertex)));
        }
        Ok(Program {
            nodes: c.nodes,
            root,
            prefix_len: prefix.len(),
            vertex_slots: c.max_vertex,
            set_slots,
        })
    }

    pub fn prefix_len(&self) -> usize {
        self.prefix_len
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn is_true(&self) -> bool {
        self.nodes[self.root as usize] == Node::True
    }

    pub fn is_false(&self) -> bool {
        self.nodes[self.root as usize] == Node::False
    }

    pub fn has_constraints(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Constraint(_)))
    }

    /// Constant folding that holds on every graph. Constraint leaves are
    /// replaced by `alpha` when given.
    pub fn fold(&self, alpha: Option<&[bool]>) -> Program {
        let mut out = Vec::with_capacity(self.nodes.len());
        let root = fold_node(&self.nodes, self.root, alpha, &mut out);
        Program {
            nodes: out,
            root,
            prefix_len: self.prefix_len,
            vertex_slots: self.vertex_slots,
            set_slots: self.set_slots,
        }
    }

    /// `true` iff `fold(Some(alpha))` is the constant `false`; only visits
    /// nodes whose subtree contains a constraint.
    pub fn folds_to_false(&self, alpha: &[bool], bearing: &[bool]) -> bool {
        self.fold_key(alpha, bearing, &mut Vec::new()) == Tri::F
    }

    /// Writes into `key` a byte string such that equal keys imply equal
    /// `fold(Some(alpha))`. Returns `F` only if that fold is `false` and `T`
    /// only if it is `true`.
    pub fn fold_key(&self, alpha: &[bool], bearing: &[bool], key: &mut Vec<u8>) -> Tri {
        key.clear();
        skeleton(&self.nodes, bearing, self.root, alpha, key)
    }

    /// Per node: does its subtree contain a constraint leaf.
    pub fn constraint_bearing(&self) -> Vec<bool> {
        let mut out = vec![false; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            out[i] = match *n {
                Node::Constraint(_) => true,
                Node::Not(a) | Node::Exists { body: a, .. } | Node::Forall { body: a, .. } => {
                    out[a as usize]
                }
                Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) | Node::Iff(a, b) => {
                    out[a as usize] || out[b as usize]
                }
                _ => false,
            };
        }
        out
    }
}

fn emit(out: &mut Vec<Node>, n: Node) -> u32 {
    out.push(n);
    (out.len() - 1) as u32
}

fn fold_node(nodes: &[Node], i: u32, alpha: Option<&[bool]>, out: &mut Vec<Node>) -> u32 {
    let constant = |b: bool| if b { Node::True } else { Node::False };
    let node = match nodes[i as usize] {
        Node::Constraint(c) => match alpha {
            Some(a) => constant(a[c as usize]),
            None => Node::Constraint(c),
        },
        Node::Not(a) => {
            let a = fold_node(nodes, a, alpha, out);
            match const_of(out[a as usize]) {
                Some(v) => {
                    out.truncate(a as usize);
                    constant(!v)
                }
                None => Node::Not(a),
            }
        }
        Node::And(a, b) | Node::Or(a, b) | Node::Implies(a, b) | Node::Iff(a, b) => {
            let orig = nodes[i as usize];
            let mark = out.len();
            let fa = fold_node(nodes, a, alpha, out);
            let ca = const_of(out[fa as usize]);
            // Short-circuit on a dominating left operand.
            let dominant = match (orig, ca) {
                (Node::And(..), Some(false)) => Some(false),
                (Node::Or(..), Some(true)) | (Node::Implies(..), Some(false)) => Some(true),
                _ => None,
            };
            if let Some(v) = dominant {
                out.truncate(mark);
                return emit(out, constant(v));
            }
            let fb = fold_node(nodes, b, alpha, out);
            let cb = const_of(out[fb as usize]);
            let result = match (orig, ca, cb) {
                (Node::And(..), _, Some(false)) => Err(Node::False),
                (Node::And(..), Some(true), _) => Ok(fb),
                (Node::And(..), _, Some(true)) => Ok(fa),
                (Node::And(..), _, _) => Err(Node::And(fa, fb)),
                (Node::Or(..), _, Some(true)) => Err(Node::True),
                (Node::Or(..), Some(false), _) => Ok(fb),
                (Node::Or(..), _, Some(false)) => Ok(fa),
                (Node::Or(..), _, _) => Err(Node::Or(fa, fb)),
                (Node::Implies(..), _, Some(true)) => Err(Node::True),
                (Node::Implies(..), Some(true), _) => Ok(fb),
                (Node::Implies(..), _, Some(false)) => Err(Node::Not(fa)),
                (Node::Implies(..), _, _) => Err(Node::Implies(fa, fb)),
                (_, Some(x), Some(y)) => Err(constant(x == y)),
                (_, Some(true), None) => Ok(fb),
                (_, None, Some(true)) => Ok(fa),
                (_, Some(false), None) => Err(Node::Not(fb)),
                (_, None, Some(false)) => Err(Node::Not(fa)),
                (_, None, None) => Err(Node::Iff(fa, fb)),
            };
            match result {
                Ok(kept) => return relocate(out, mark, kept),
                Err(Node::True) => {
                    out.truncate(mark);
                    Node::True
                }
                Err(Node::False) => {
                    out.truncate(mark);
                    Node::False
                }
                Err(n) => n,
            }
        }
        Node::Exists { sort, slot, body } | Node::Forall { sort, slot, body } => {
            let exists = matches!(nodes[i as usize], Node::Exists { .. });
            let mark = out.len();
            let b = fold_node(nodes, body, alpha, out);
            match (sort, exists, const_of(out[b as usize])) {
                // A set quantifier always has at least one candidate (∅).
                (Sort::Set, _, Some(v)) | (Sort::Vertex, true, Some(v @ false)) | (Sort::Vertex, false, Some(v @ true)) => {
                    out.truncate(mark);
                    constant(v)
                }
                _ if exists => Node::Exists { sort, slot, body: b },
                _ => Node::Forall { sort, slot, body: b },
            }
        }
        leaf => leaf,
    };
    emit(out, node)
}

/// Drops every node emitted after `mark` except the subtree rooted at `kept`,
/// which is moved down so the arena stays compact and canonical.
fn relocate(out: &mut Vec<Node>, mark: usize, kept: u32) -> u32 {
    let mut tmp = Vec::new();
    let root = copy_subtree(out, kept, mark as u32, &mut tmp);
    out.truncate(mark);
    out.extend(tmp);
    root
}

fn copy_subtree(src: &[Node], i: u32, base: u32, dst: &mut Vec<Node>) -> u32 {
    let map = |x: u32, dst: &mut Vec<Node>| copy_subtree(src, x, base, dst);
    let node = match src[i as usize] {
        Node::Not(a) => Node::Not(map(a, dst)),
        Node::And(a, b) => {
            let a = map(a, dst);
            Node::And(a, map(b, dst))
        }
        Node::Or(a, b) => {
            let a = map(a, dst);
            Node::Or(a, map(b, dst))
        }
        Node::Implies(a, b) => {
            let a = map(a, dst);
            Node::Implies(a, map(b, dst))
        }
        Node::Iff(a, b) => {
            let a = map(a, dst);
            Node::Iff(a, map(b, dst))
        }
        Node::Exists { sort, slot, body } => Node::Exists {
            sort,
            slot,
            body: map(body, dst),
        },
        Node::Forall { sort, slot, body } => Node::Forall {
            sort,
            slot,
            body: map(body, dst),
        },
        leaf => leaf,
    };
    dst.push(node);
    base + (dst.len() - 1) as u32
}

fn const_of(n: Node) -> Option<bool> {
    match n {
        Node::True => Some(true),
        Node::False => Some(false),
        _ => None,
    }
}

/// Three-valued truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tri {
    F,
    T,
    U,
}

impl Tri {
    fn of(b: bool) -> Tri {
        if b {
            Tri::T
        } else {
            Tri::F
        }
    }

    fn not(self) -> Tri {
        match self {
            Tri::F => Tri::T,
            Tri::T => Tri::F,
            Tri::U => Tri::U,
        }
    }
}

/// Kleene value at node `i` under `alpha`, with constraint-free subtrees
/// unknown. Appends the node's key to `key`: the value alone when it is
/// constant, otherwise the keys of its constraint-bearing children followed by
/// `U`. Read back to front, the key determines `fold(Some(alpha))`.
fn skeleton(nodes: &[Node], bearing: &[bool], i: u32, alpha: &[bool], key: &mut Vec<u8>) -> Tri {
    let node = nodes[i as usize];
    if !bearing[i as usize] {
        return match node {
            Node::True => Tri::T,
            Node::False => Tri::F,
            _ => Tri::U,
        };
    }
    let mark = key.len();
    let rec = |j: u32, key: &mut Vec<u8>| skeleton(nodes, bearing, j, alpha, key);
    let t = match node {
        Node::Constraint(c) => Tri::of(alpha[c as usize]),
        Node::Not(a) => rec(a, key).not(),
        Node::And(a, b) => match rec(a, key) {
            Tri::F => Tri::F,
            ta => match (ta, rec(b, key)) {
                (_, Tri::F) => Tri::F,
                (Tri::T, Tri::T) => Tri::T,
                _ => Tri::U,
            },
        },
        Node::Or(a, b) => match rec(a, key) {
            Tri::T => Tri::T,
            ta => match (ta, rec(b, key)) {
                (_, Tri::T) => Tri::T,
                (Tri::F, Tri::F) => Tri::F,
                _ => Tri::U,
            },
        },
        Node::Implies(a, b) => match rec(a, key) {
            Tri::F => Tri::T,
            ta => match (ta, rec(b, key)) {
                (_, Tri::T) => Tri::T,
                (Tri::T, Tri::F) => Tri::F,
                _ => Tri::U,
            },
        },
        Node::Iff(a, b) => match (rec(a, key), rec(b, key)) {
            (Tri::U, _) | (_, Tri::U) => Tri::U,
            (x, y) => Tri::of(x == y),
        },
        Node::Exists { sort, body, .. } | Node::Forall { sort, body, .. } => {
            let exists = matches!(node, Node::Exists { .. });
            match (sort, exists, rec(body, key)) {
                (Sort::Set, _, t @ (Tri::T | Tri::F)) => t,
                (Sort::Vertex, true, Tri::F) => Tri::F,
                (Sort::Vertex, false, Tri::T) => Tri::T,
                _ => Tri::U,
            }
        }
        _ => Tri::U,
    };
    if t != Tri::U {
        key.truncate(mark);
    }
    key.push(t as u8);
    t
}

/// Adjacency as bit masks.
#[derive(Debug, Clone)]
pub struct Carrier {
    n: usize,
    adj: Vec<u128>,
    twin_class: Vec<usize>,
}

impl Carrier {
    pub fn new(g: &Graph) -> Result<Carrier, EvalError> {
        if g.n() > MAX_CARRIER {
            return Err(EvalError::TooLarge(g.n()));
        }
        let adj = (0..g.n())
            .map(|v| g.neighbors(v).iter().fold(0u128, |m, &w| m | 1 << w))
            .collect();
        let tp = nd_partition(g);
        let twin_class = (0..g.n()).map(|v| tp.type_of(v)).collect();
        Ok(Carrier {
            n: g.n(),
            adj,
            twin_class,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    fn full(&self) -> u128 {
        if self.n == 128 {
            u128::MAX
        } else {
            (1u128 << self.n) - 1
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EvalOptions {
    pub budget: u64,
    /// Quantifiers try one representative per class of vertices that no
    /// automorphism fixing the bound variables distinguishes.
    pub symmetry: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            budget: DEFAULT_EVAL_BUDGET,
            symmetry: false,
        }
    }
}

struct Evaluator<'a> {
    prog: &'a Program,
    carrier: &'a Carrier,
    full: u128,
    verts: Vec<usize>,
    sets: Vec<u128>,
    known: Vec<u128>,
    /// Set quantifiers give up (`U`) instead of enumerating.
    partial: bool,
    symmetry: bool,
    /// Set slots bound at the current point of evaluation.
    bound_sets: Vec<u16>,
    vertex_depth: usize,
    steps: u64,
    budget: u64,
    exceeded: bool,
}

impl<'a> Evaluator<'a> {
    fn new(prog: &'a Program, carrier: &'a Carrier, opts: &EvalOptions) -> Self {
        let full = carrier.full();
        Evaluator {
            prog,
            carrier,
            full,
            verts: vec![0; prog.vertex_slots],
            sets: vec![0; prog.set_slots],
            known: vec![full; prog.set_slots],
            partial: false,
            symmetry: opts.symmetry,
            bound_sets: (0..prog.prefix_len as u16).collect(),
            vertex_depth: 0,
            steps: 0,
            budget: opts.budget,
            exceeded: false,
        }
    }

    fn run(&mut self) -> Tri {
        self.eval(self.prog.root)
    }

    fn eval(&mut self, i: u32) -> Tri {
        self.steps += 1;
        if self.steps > self.budget {
            self.exceeded = true;
            return Tri::U;
        }
        match self.prog.nodes[i as usize] {
            Node::True => Tri::T,
            Node::False => Tri::F,
            Node::Member { vertex, set } => {
                let v = self.verts[vertex as usize];
                let s = set as usize;
                if self.known[s] >> v & 1 == 0 {
                    Tri::U
                } else {
                    Tri::of(self.sets[s] >> v & 1 == 1)
                }
            }
            Node::Adj(a, b) => {
                let (u, v) = (self.verts[a as usize], self.verts[b as usize]);
                Tri::of(self.carrier.adj[u] >> v & 1 == 1)
            }
            Node::VertexEq(a, b) => Tri::of(self.verts[a as usize] == self.verts[b as usize]),
            Node::SetEq(a, b) => {
                let (a, b) = (a as usize, b as usize);
                let known = self.known[a] & self.known[b];
                if (self.sets[a] ^ self.sets[b]) & known != 0 {
                    Tri::F
                } else if known == self.full {
                    Tri::T
                } else {
                    Tri::U
                }
            }
            Node::Constraint(_) => Tri::U,
            Node::Not(a) => self.eval(a).not(),
            Node::And(a, b) => match self.eval(a) {
                Tri::F => Tri::F,
                ta => match (ta, self.eval(b)) {
                    (_, Tri::F) => Tri::F,
                    (Tri::T, Tri::T) => Tri::T,
                    _ => Tri::U,
                },
            },
            Node::Or(a, b) => match self.eval(a) {
                Tri::T => Tri::T,
                ta => match (ta, self.eval(b)) {
                    (_, Tri::T) => Tri::T,
                    (Tri::F, Tri::F) => Tri::F,
                    _ => Tri::U,
                },
            },
            Node::Implies(a, b) => match self.eval(a) {
                Tri::F => Tri::T,
                ta => match (ta, self.eval(b)) {
                    (_, Tri::T) => Tri::T,
                    (Tri::T, Tri::F) => Tri::F,
                    _ => Tri::U,
                },
            },
            Node::Iff(a, b) => match (self.eval(a), self.eval(b)) {
                (Tri::U, _) | (_, Tri::U) => Tri::U,
                (x, y) => Tri::of(x == y),
            },
            Node::Exists { sort, slot, body } => self.quantify(sort, slot, body, true),
            Node::Forall { sort, slot, body } => self.quantify(sort, slot, body, false),
        }
    }

    /// Existential quantification; universal is its dual (`stop` is the value
    /// that settles the quantifier).
    fn quantify(&mut self, sort: Sort, slot: u16, body: u32, exists: bool) -> Tri {
        let stop = Tri::of(exists);
        let mut acc = stop.not();
        match sort {
            Sort::Vertex => {
                let candidates = if self.symmetry {
                    self.vertex_representatives()
                } else {
                    (0..self.carrier.n).collect()
                };
                self.vertex_depth += 1;
                for v in candidates {
                    self.verts[slot as usize] = v;
                    match self.eval(body) {
                        t if t == stop => {
                            acc = stop;
                            break;
                        }
                        Tri::U => acc = Tri::U,
                        _ => {}
                    }
                    if self.exceeded {
                        break;
                    }
                }
                self.vertex_depth -= 1;
            }
            Sort::Set => {
                if self.partial {
                    return Tri::U;
                }
                let s = slot as usize;
                self.known[s] = self.full;
                self.bound_sets.push(slot);
                if self.symmetry {
                    let classes = self.classes();
                    let mut counts = vec![0usize; classes.len()];
                    loop {
                        self.sets[s] = classes
                            .iter()
                            .zip(&counts)
                            .flat_map(|(c, &k)| c[..k].iter())
                            .fold(0u128, |m, &v| m | 1 << v);
                        match self.eval(body) {
                            t if t == stop => {
                                acc = stop;
                                break;
                            }
                            Tri::U => acc = Tri::U,
                            _ => {}
                        }
                        if self.exceeded || !advance(&mut counts, |i| classes[i].len()) {
                            break;
                        }
                    }
                } else {
                    let mut mask: u128 = 0;
                    loop {
                        self.sets[s] = mask;
                        match self.eval(body) {
                            t if t == stop => {
                                acc = stop;
                                break;
                            }
                            Tri::U => acc = Tri::U,
                            _ => {}
                        }
                        if self.exceeded || mask == self.full {
                            break;
                        }
                        mask += 1;
                    }
                }
                self.bound_sets.pop();
            }
        }
        acc
    }

    /// Classes of vertices interchangeable under the bound variables: same twin
    /// class, same membership in every bound set, and not bound to a vertex
    /// variable (bound vertices are singletons). Members are ascending.
    fn classes(&self) -> Vec<Vec<usize>> {
        let bound = &self.verts[..self.vertex_depth];
        let mut keys: Vec<(usize, u64, usize)> = Vec::new();
        let mut classes: Vec<Vec<usize>> = Vec::new();
        for v in 0..self.carrier.n {
            let pinned = bound.iter().position(|&b| b == v).map_or(usize::MAX, |_| v);
            let membership = self
                .bound_sets
                .iter()
                .enumerate()
                .fold(0u64, |m, (k, &s)| m | ((self.sets[s as usize] >> v & 1) as u64) << k);
            let key = (self.carrier.twin_class[v], membership, pinned);
            match keys.iter().position(|k| *k == key) {
                Some(c) => classes[c].push(v),
                None => {
                    keys.push(key);
                    classes.push(vec![v]);
                }
            }
        }
        classes
    }

    fn vertex_representatives(&self) -> Vec<usize> {
        self.classes().into_iter().map(|c| c[0]).collect()
    }
}

/// Mixed-radix increment of `digits` where digit `i` ranges over
/// `0..=radix(i)`. Returns `false` after the last value.
fn advance(digits: &mut [usize], radix: impl Fn(usize) -> usize) -> bool {
    for i in 0..digits.len() {
        if digits[i] < radix(i) {
            digits[i] += 1;
            return true;
        }
        digits[i] = 0;
    }
    false
}

/// Decides `g ⊨ f` by exhaustive recursion. The prefix of `f` is read as
/// existential set quantifiers; `f` must not contain linear constraints.
pub fn mso_check(g: &Graph, f: &Formula, opts: &EvalOptions) -> Result<bool, EvalError> {
    f.require_constraint_free()?;
    let prog = Program::compile_sentence(f)?.fold(None);
    check_program(g, &prog, opts)
}

/// Evaluates a closed constraint-free program on `g`.
pub fn check_program(g: &Graph, prog: &Program, opts: &EvalOptions) -> Result<bool, EvalError> {
    assert_eq!(prog.prefix_len, 0, "program has free prefix variables");
    let carrier = Carrier::new(g)?;
    let mut ev = Evaluator::new(prog, &carrier, opts);
    let r = ev.run();
    if ev.exceeded {
        return Err(EvalError::Budget(opts.budget));
    }
    Ok(r == Tri::T)
}

/// Evaluates a program with free prefix slots under fully specified prefix
/// sets (one mask per slot).
pub fn eval_with_prefix(
    carrier: &Carrier,
    prog: &Program,
    prefix: &[u128],
    opts: &EvalOptions,
) -> Result<bool, EvalError> {
    assert_eq!(prefix.len(), prog.prefix_len);
    let mut ev = Evaluator::new(prog, carrier, opts);
    ev.sets[..prefix.len()].copy_from_slice(prefix);
    let r = ev.run();
    if ev.exceeded {
        return Err(EvalError::Budget(opts.budget));
    }
    Ok(r == Tri::T)
}

/// `G_φ`: every type cut down to its first `reduce_threshold` vertices.
#[derive(Debug, Clone)]
pub struct ReducedGraph {
    pub graph: Graph,
    /// Types of `graph`, index-aligned with the original types.
    pub types: TypePartition,
    pub original_sizes: Vec<usize>,
    /// Original vertex of each reduced vertex.
    pub to_original: Vec<usize>,
    /// Per type, the removed original vertices in ascending order.
    pub deleted: Vec<Vec<usize>>,
}

pub fn reduce_graph(g: &Graph, tp: &TypePartition, stats: &FormulaStats) -> ReducedGraph {
    let keep_per_type = stats.reduce_threshold();
    let mut keep = vec![false; g.n()];
    let mut deleted = Vec::with_capacity(tp.len());
    for members in tp.types() {
        let k = members.len().min(keep_per_type);
        for &v in &members[..k] {
            keep[v] = true;
        }
        deleted.push(members[k..].to_vec());
    }
    let to_original: Vec<usize> = (0..g.n()).filter(|&v| keep[v]).collect();
    let mut new_index = vec![usize::MAX; g.n()];
    for (i, &v) in to_original.iter().enumerate() {
        new_index[v] = i;
    }
    let graph = g.induced_subgraph(&to_original);
    let classes = tp
        .types()
        .iter()
        .enumerate()
        .map(|(t, members)| {
            let kept = members
                .iter()
                .filter(|&&v| keep[v])
                .map(|&v| new_index[v])
                .collect();
            (kept, tp.is_cover_type(t))
        })
        .collect();
    let types = TypePartition::from_classes(graph.n(), classes, tp.mode());
    ReducedGraph {
        graph,
        types,
        original_sizes: tp.types().iter().map(Vec::len).collect(),
        to_original,
        deleted,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CarrierKind {
    Reduced,
    Full,
}

/// Values of the prefix variables, as sorted vertex lists over a carrier.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixAssignment {
    pub sets: Vec<Vec<usize>>,
    pub carrier: CarrierKind,
}

impl PrefixAssignment {
    pub fn from_masks(masks: &[u128], carrier: CarrierKind) -> Self {
        let sets = masks
            .iter()
            .map(|&m| (0..128).filter(|&v| m >> v & 1 == 1).collect())
            .collect();
        PrefixAssignment { sets, carrier }
    }

    /// Signature of `v`: bit `j` set iff `v ∈ Z_j`.
    pub fn signature(&self, v: usize) -> usize {
        self.sets
            .iter()
            .enumerate()
            .filter(|(_, s)| s.binary_search(&v).is_ok())
            .fold(0, |acc, (j, _)| acc | 1 << j)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EnumStats {
    pub nodes: u64,
    pub yielded: u64,
}

/// Depth-first enumeration of the prefix assignments satisfying a program
/// with free prefix slots.
///
/// Vertices are decided from the highest index down, each taking its
/// signature in ascending order, so assignments come out in increasing order
/// of the counter `Σ_v sig(v)·2^{m·v}`. After each decision the body is
/// evaluated three-valued and the branch is dropped once it is false.
///
/// In canonical mode, `sig(v) ≤ sig(w)` is enforced for `w` the next higher
/// vertex of the same type, so exactly one assignment is produced per
/// multiset of signatures within each type.
pub struct PrefixEnumerator<'a> {
    carrier: Carrier,
    prog: &'a Program,
    m: usize,
    n: usize,
    budget: u64,
    /// For canonical mode: next higher vertex of the same type.
    next_same: Option<Vec<Option<usize>>>,
    sig: Vec<usize>,
    /// Next signature to try at each depth.
    next_try: Vec<usize>,
    depth: usize,
    started: bool,
    done: bool,
    pub stats: EnumStats,
    steps: u64,
}

impl<'a> PrefixEnumerator<'a> {
    pub fn new(
        graph: &Graph,
        prog: &'a Program,
        canonical: Option<&TypePartition>,
        budget: u64,
    ) -> Result<Self, EvalError> {
        let carrier = Carrier::new(graph)?;
        let n = graph.n();
        let next_same = canonical.map(|tp| {
            let mut next = vec![None; n];
            for members in tp.types() {
                for w in members.windows(2) {
                    next[w[0]] = Some(w[1]);
                }
            }
            next
        });
        Ok(PrefixEnumerator {
            carrier,
            prog,
            m: prog.prefix_len,
            n,
            budget,
            next_same,
            sig: vec![0; n],
            next_try: vec![0; n + 1],
            depth: 0,
            started: false,
            done: false,
            stats: EnumStats::default(),
            steps: 0,
        })
    }

    fn vertex_at(&self, depth: usize) -> usize {
        self.n - 1 - depth
    }

    fn max_sig(&self, v: usize) -> usize {
        let all = (1usize << self.m) - 1;
        match self.next_same.as_ref().and_then(|next| next[v]) {
            Some(w) => self.sig[w].min(all),
            None => all,
        }
    }

    /// Evaluates the program with vertices `vertex_at(0..decided)` fixed.
    fn evaluate(&mut self, decided: usize) -> Result<Tri, EvalError> {
        let mut masks = vec![0u128; self.m];
        let mut known = 0u128;
        for d in 0..decided {
            let v = self.vertex_at(d);
            known |= 1 << v;
            for (j, mask) in masks.iter_mut().enumerate() {
                if self.sig[v] >> j & 1 == 1 {
                    *mask |= 1 << v;
                }
            }
        }
        let opts = EvalOptions {
            budget: self.budget.saturating_sub(self.steps),
            symmetry: false,
        };
        let mut ev = Evaluator::new(self.prog, &self.carrier, &opts);
        ev.partial = decided < self.n;
        ev.sets[..self.m].copy_from_slice(&masks);
        for k in &mut ev.known[..self.m] {
            *k = known;
        }
        let r = ev.run();
        self.steps += ev.steps;
        if ev.exceeded {
            return Err(EvalError::Budget(self.budget));
        }
        Ok(r)
    }

    fn current_masks(&self) -> Vec<u128> {
        let mut masks = vec![0u128; self.m];
        for v in 0..self.n {
            for (j, mask) in masks.iter_mut().enumerate() {
                if self.sig[v] >> j & 1 == 1 {
                    *mask |= 1 << v;
                }
            }
        }
        masks
    }

    /// Next satisfying assignment as one mask per prefix variable.
    pub fn next_masks(&mut self) -> Result<Option<Vec<u128>>, EvalError> {
        if self.done {
            return Ok(None);
        }
        if self.n == 0 {
            self.done = true;
            self.stats.nodes += 1;
            return Ok(if self.evaluate(0)? == Tri::T {
                self.stats.yielded += 1;
                Some(vec![0u128; self.m])
            } else {
                None
            });
        }
        if !self.started {
            self.started = true;
            self.depth = 0;
            self.next_try[0] = 0;
        }
        loop {
            let d = self.depth;
            let v = self.vertex_at(d);
            if self.next_try[d] > self.max_sig(v) {
                if d == 0 {
                    self.done = true;
                    return Ok(None);
                }
                self.sig[v] = 0;
                self.depth -= 1;
                self.next_try[d - 1] += 1;
                continue;
            }
            self.sig[v] = self.next_try[d];
            self.stats.nodes += 1;
            let verdict = self.evaluate(d + 1)?;
            if d + 1 == self.n {
                self.next_try[d] += 1;
                if verdict == Tri::T {
                    self.stats.yielded += 1;
                    return Ok(Some(self.current_masks()));
                }
            } else if verdict == Tri::F {
                self.next_try[d] += 1;
            } else {
                self.depth += 1;
                self.next_try[d + 1] = 0;
            }
        }
    }
}

impl Iterator for PrefixEnumerator<'_> {
    type Item = Result<PrefixAssignment, EvalError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_masks() {
            Ok(Some(masks)) => Some(Ok(PrefixAssignment::from_masks(&masks, CarrierKind::Reduced))),
            Ok(None) => None,
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

/// Every prefix assignment on `rg` satisfying `body` (a formula without
/// constraints whose free variables are its prefix), once each, in counter
/// order.
pub fn satisfying_prefix_assignments<'a>(
    rg: &ReducedGraph,
    body: &'a Program,
    budget: u64,
) -> Result<PrefixEnumerator<'a>, EvalError> {
    PrefixEnumerator::new(&rg.graph, body, None, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{min_vertex_cover, type_partition};
    use std::collections::HashMap;

    fn parse(text: &str) -> Formula {
        Formula::parse(text).unwrap()
    }

    fn check(g: &Graph, text: &str) -> bool {
        mso_check(g, &parse(text), &EvalOptions::default()).unwrap()
    }

    const BIPARTITE: &str = "exists X1, X2. (forall v. (v in X1 <-> not v in X2)) \
        and (forall u, v. adj(u, v) -> ((u in X1 and v in X2) or (u in X2 and v in X1)))";

    #[test]
    fn small_sentences() {
        assert!(check(&Graph::complete(3), "exists X. (forall u, v. (u in X and v in X) -> not adj(u, v)) and (exists x. x in X)"));
        assert!(check(&Graph::new(0), "forall x. false"));
        assert!(!check(&Graph::new(0), "exists x. true"));
        assert!(check(&Graph::cycle(4), BIPARTITE));
        assert!(!check(&Graph::cycle(5), BIPARTITE));
        assert!(check(&Graph::new(0), "exists X. forall x. x in X"));
    }

    #[test]
    fn symmetry_agrees() {
        let sym = EvalOptions {
            symmetry: true,
            ..EvalOptions::default()
        };
        for g in [Graph::cycle(5), Graph::star(5), Graph::complete_bipartite(2, 3), Graph::path(5)] {
            for text in [
                BIPARTITE,
                "exists X. (forall a, b in X. not adj(a, b)) and (forall b. b in X or (exists a in X. adj(a, b)))",
                "exists S, T. S = T and not (exists x. x in S)",
                "forall u. exists v. adj(u, v)",
            ] {
                let f = parse(text);
                assert_eq!(
                    mso_check(&g, &f, &sym).unwrap(),
                    mso_check(&g, &f, &EvalOptions::default()).unwrap(),
                    "{text}"
                );
            }
        }
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let f = parse("forall X. forall Y. forall x. x in X or not x in Y or x in Y");
        let opts = EvalOptions {
            budget: 1000,
            symmetry: false,
        };
        assert_eq!(mso_check(&Graph::path(8), &f, &opts), Err(EvalError::Budget(1000)));
    }

    #[test]
    fn constraints_are_rejected() {
        let f = parse("exists Z. [|Z| <= 1]");
        assert!(matches!(
            mso_check(&Graph::path(2), &f, &EvalOptions::default()),
            Err(EvalError::Formula(FormulaError::HasConstraints(_)))
        ));
    }

    #[test]
    fn folding() {
        let f = parse("exists Z. [|Z| <= 3] and not [5 <= |Z|] and (forall x. x in Z)");
        let p = Program::compile(&f).unwrap();
        let bearing = p.constraint_bearing();
        let t = p.fold(Some(&[true, false]));
        let expected = Program::compile(&parse("exists Z. [|Z| <= 1] and (forall x. x in Z)"))
            .unwrap()
            .fold(Some(&[true]));
        assert_eq!(t, expected);
        assert_eq!(t.len(), 2);
        assert!(!p.folds_to_false(&[true, false], &bearing));
        assert!(p.fold(Some(&[false, false])).is_false());
        assert!(p.folds_to_false(&[false, false], &bearing));
        assert!(p.folds_to_false(&[true, true], &bearing));
    }

    #[test]
    fn fold_keeps_graph_dependent_quantifiers() {
        let p = Program::compile(&parse("forall x. false")).unwrap().fold(None);
        assert!(!p.is_false());
        let q = Program::compile(&parse("exists x. false")).unwrap().fold(None);
        assert!(q.is_false());
        let r = Program::compile(&parse("exists X. true")).unwrap().fold(None);
        assert!(r.is_true());
    }

    #[test]
    fn reduction_thresholds() {
        let stats = FormulaStats {
            m: 2,
            q_s: 1,
            q_v: 2,
            constraint_count: 0,
            uses_set_equality: false,
        };
        let g = Graph::star(20);
        let tp = type_partition(&g, &min_vertex_cover(&g, 3).unwrap()).unwrap();
        let rg = reduce_graph(&g, &tp, &stats);
        assert_eq!(rg.types.members(1).len(), 16);
        assert_eq!(rg.deleted[1].len(), 4);
        assert_eq!(rg.original_sizes, vec![1, 20]);

        let small = Graph::star(3);
        let tp = type_partition(&small, &min_vertex_cover(&small, 3).unwrap()).unwrap();
        assert_eq!(reduce_graph(&small, &tp, &stats).graph, small);
    }

    #[test]
    fn star_reduces_for_bipartite_equal() {
        let f = parse(
            "exists X1, X2. (forall v. (v in X1 <-> not v in X2)) and [|X1| = |X2|] \
             and (forall u, v. adj(u, v) -> ((u in X1 and v in X2) or (u in X2 and v in X1)))",
        );
        let g = Graph::star(99);
        let tp = type_partition(&g, &min_vertex_cover(&g, 3).unwrap()).unwrap();
        let rg = reduce_graph(&g, &tp, &f.analyze());
        assert_eq!(rg.graph, Graph::star(8));
        assert_eq!(rg.to_original, (0..9).collect::<Vec<_>>());
    }

    fn all_assignments(g: &Graph, prog: &Program) -> Vec<Vec<u128>> {
        let carrier = Carrier::new(g).unwrap();
        let m = prog.prefix_len();
        let n = g.n();
        let total = 1u64 << (n * m);
        let mut out = Vec::new();
        for counter in 0..total {
            let mut masks = vec![0u128; m];
            for v in 0..n {
                for (j, mask) in masks.iter_mut().enumerate() {
                    if counter >> (v * m + j) & 1 == 1 {
                        *mask |= 1 << v;
                    }
                }
            }
            if eval_with_prefix(&carrier, prog, &masks, &EvalOptions::default()).unwrap() {
                out.push(masks);
            }
        }
        out
    }

    fn enumerate(g: &Graph, prog: &Program, canonical: Option<&TypePartition>) -> Vec<Vec<u128>> {
        let mut e = PrefixEnumerator::new(g, prog, canonical, u64::MAX).unwrap();
        let mut out = Vec::new();
        while let Some(m) = e.next_masks().unwrap() {
            out.push(m);
        }
        out
    }

    #[test]
    fn enumeration_examples() {
        let p = Program::compile(&parse("exists Z. [|Z| <= 5] and forall x. x in Z"))
            .unwrap()
            .fold(Some(&[true]));
        assert_eq!(enumerate(&Graph::complete(2), &p, None), vec![vec![0b11]]);

        let t = Program::compile(&parse("exists Z. [|Z| <= 5]")).unwrap().fold(Some(&[true]));
        assert_eq!(enumerate(&Graph::path(4), &t, None).len(), 16);
        assert_eq!(enumerate(&Graph::new(0), &t, None), vec![vec![0]]);
    }

    #[test]
    fn enumeration_matches_counter_order() {
        let f = parse(
            "exists X1, X2. (forall v. (v in X1 <-> not v in X2)) and [|X1| = |X2|] \
             and (forall u, v. adj(u, v) -> ((u in X1 and v in X2) or (u in X2 and v in X1)))",
        );
        let p = Program::compile(&f).unwrap().fold(Some(&[true, true]));
        for g in [Graph::path(3), Graph::cycle(4), Graph::star(3), Graph::new(3)] {
            let expected = all_assignments(&g, &p);
            assert_eq!(enumerate(&g, &p, None), expected);
        }
        let p3 = enumerate(&Graph::path(3), &p, None);
        assert!(p3.contains(&vec![0b010, 0b101]));
        assert!(p3.contains(&vec![0b101, 0b010]));
        assert_eq!(p3.len(), 2);
    }

    #[test]
    fn canonical_enumeration_picks_one_per_orbit() {
        let f = parse("exists A, B. [|A| <= |B| + 9] and forall x. not (x in A and x in B)");
        let p = Program::compile(&f).unwrap().fold(Some(&[true]));
        let g = Graph::star(4);
        let tp = type_partition(&g, &min_vertex_cover(&g, 2).unwrap()).unwrap();
        let canon = enumerate(&g, &p, Some(&tp));
        // centre: 3 signatures; leaves: multisets of size 4 over 3 signatures.
        assert_eq!(canon.len(), 3 * 15);
        let full = enumerate(&g, &p, None);
        assert_eq!(full.len(), 3usize.pow(5));
    }

    #[test]
    fn equal_fold_keys_mean_equal_folds() {
        let f = parse(
            "exists A, B. ([|A| <= 1] or (forall x. x in A and [|B| <= 2])) \
             and (not [|A| <= |B|] <-> (exists y. y in B or [|B| <= 0])) \
             and ((exists X. [|A| <= 3]) -> false)",
        );
        let prog = Program::compile(&f).unwrap();
        let bearing = prog.constraint_bearing();
        let l = f.constraints.len();
        let mut seen: HashMap<Vec<u8>, Program> = HashMap::new();
        let mut key = Vec::new();
        for bits in 0u32..1 << l {
            let alpha: Vec<bool> = (0..l).map(|i| bits >> i & 1 == 1).collect();
            let t = prog.fold_key(&alpha, &bearing, &mut key);
            let folded = prog.fold(Some(&alpha));
            match t {
                Tri::F => assert!(folded.is_false()),
                Tri::T => assert!(folded.is_true()),
                Tri::U => {}
            }
            assert_eq!(seen.entry(key.clone()).or_insert_with(|| folded.clone()), &folded);
        }
        assert!(seen.len() > 2);
    }
}
