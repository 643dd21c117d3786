//! Simple undirected graphs, exact vertex cover and the partition of a graph
//! into vertex types.
//!
//! Two vertices `u`, `v` have the same *type* when `N(u) \ {v} = N(v) \ {u}`.
//! In vertex-cover mode every cover vertex is additionally split off into a
//! singleton type, so every remaining type is an independent set whose
//! neighbourhood lies inside the cover.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: self-loop on vertex {vertex}")]
    SelfLoop { line: usize, vertex: usize },
    #[error("line {line}: unknown vertex {vertex} (graph has {n} vertices)")]
    UnknownVertex { line: usize, vertex: usize, n: usize },
    #[error("header declares {declared} edges but {found} distinct edges were listed")]
    EdgeCountMismatch { declared: usize, found: usize },
    #[error("missing `p <n> <m>` header")]
    MissingHeader,
    #[error("self-loop on vertex {0}")]
    Loop(usize),
    #[error("vertex index {0} out of range")]
    OutOfRange(usize),
    #[error("minimum vertex cover exceeds the budget of {k_max}")]
    CoverExceedsBudget { k_max: usize },
    #[error("set is not a vertex cover: edge {0}-{1} is uncovered")]
    InvalidCover(usize, usize),
}

/// A simple undirected graph on dense vertex indices `0..n` with optional
/// external names.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    names: Vec<String>,
    adj: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    /// Edgeless graph on `n` vertices named `1..=n`.
    pub fn new(n: usize) -> Self {
        Graph {
            names: (1..=n).map(|i| i.to_string()).collect(),
            adj: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        let mut g = Graph::new(n);
        for &(u, v) in edges {
            g.add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Adds the edge `u`-`v`. Returns `false` if it was already present.
    pub fn add_edge(&mut self, u: usize, v: usize) -> Result<bool, GraphError> {
        let n = self.n();
        if u >= n {
            return Err(GraphError::OutOfRange(u));
        }
        if v >= n {
            return Err(GraphError::OutOfRange(v));
        }
        if u == v {
            return Err(GraphError::Loop(u));
        }
        match self.adj[u].binary_search(&v) {
            Ok(_) => Ok(false),
            Err(pos) => {
                self.adj[u].insert(pos, v);
                let pos = self.adj[v].binary_search(&u).unwrap_err();
                self.adj[v].insert(pos, u);
                self.edge_count += 1;
                Ok(true)
            }
        }
    }

    pub fn set_name(&mut self, v: usize, name: impl Into<String>) {
        self.names[v] = name.into();
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn m(&self) -> usize {
        self.edge_count
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    pub fn name(&self, v: usize) -> &str {
        &self.names[v]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Edges `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, ns)| ns.iter().filter(move |&&v| v > u).map(move |&v| (u, v)))
    }

    /// Subgraph induced by `vertices`; vertex `i` of the result is
    /// `vertices[i]` of `self` and keeps its name.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> Graph {
        let mut pos = vec![usize::MAX; self.n()];
        for (i, &v) in vertices.iter().enumerate() {
            pos[v] = i;
        }
        let mut g = Graph {
            names: vertices.iter().map(|&v| self.names[v].clone()).collect(),
            adj: vec![Vec::new(); vertices.len()],
            edge_count: 0,
        };
        for (i, &v) in vertices.iter().enumerate() {
            for &w in &self.adj[v] {
                let j = pos[w];
                if j != usize::MAX && i < j {
                    g.add_edge(i, j).expect("induced edge is valid");
                }
            }
        }
        g
    }

    /// `N(u) \ {v} = N(v) \ {u}`.
    pub fn are_twins(&self, u: usize, v: usize) -> bool {
        let a = self.adj[u].iter().filter(|&&w| w != v);
        let b = self.adj[v].iter().filter(|&&w| w != u);
        a.eq(b)
    }

    /// Number of edges whose endpoints carry different labels.
    pub fn cut_size(&self, label: &[usize]) -> usize {
        self.edges().filter(|&(u, v)| label[u] != label[v]).count()
    }

    pub fn is_vertex_cover(&self, cover: &[usize]) -> bool {
        self.uncovered_edge(cover).is_none()
    }

    fn uncovered_edge(&self, cover: &[usize]) -> Option<(usize, usize)> {
        let mut in_cover = vec![false; self.n()];
        for &v in cover {
            in_cover[v] = true;
        }
        self.edges().find(|&(u, v)| !in_cover[u] && !in_cover[v])
    }

    /// Parses the line-oriented graph format:
    ///
    /// ```text
    /// # comment
    /// p <n> <m>
    /// v <index> <name>      (optional, 1-based)
    /// e <i> <j>             (1-based)
    /// ```
    pub fn parse(text: &str) -> Result<Graph, GraphError> {
        let mut graph: Option<Graph> = None;
        let mut declared = 0;
        let mut seen_names: HashMap<String, usize> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split_whitespace().collect();
            let malformed = |message: &str| GraphError::Malformed {
                line,
                message: message.to_string(),
            };
            let number = |s: &str| -> Result<usize, GraphError> {
                s.parse::<usize>()
                    .map_err(|_| malformed(&format!("expected a non-negative integer, found `{s}`")))
            };
            match fields[0] {
                "p" => {
                    if graph.is_some() {
                        return Err(malformed("duplicate header"));
                    }
                    if fields.len() != 3 {
                        return Err(malformed("header must be `p <n> <m>`"));
                    }
                    graph = Some(Graph::new(number(fields[1])?));
                    declared = number(fields[2])?;
                }
                "v" => {
                    let g = graph.as_mut().ok_or_else(|| malformed("vertex line before header"))?;
                    if fields.len() != 3 {
                        return Err(malformed("vertex line must be `v <index> <name>`"));
                    }
                    let i = number(fields[1])?;
                    if i == 0 || i > g.n() {
                        return Err(GraphError::UnknownVertex { line, vertex: i, n: g.n() });
                    }
                    let name = fields[2].to_string();
                    if let Some(&other) = seen_names.get(&name) {
                        if other != i {
                            return Err(malformed(&format!("name `{name}` already used")));
                        }
                    }
                    seen_names.insert(name.clone(), i);
                    g.set_name(i - 1, name);
                }
                "e" => {
                    let g = graph.as_mut().ok_or_else(|| malformed("edge line before header"))?;
                    if fields.len() != 3 {
                        return Err(malformed("edge line must be `e <i> <j>`"));
                    }
                    let (i, j) = (number(fields[1])?, number(fields[2])?);
                    for v in [i, j] {
                        if v == 0 || v > g.n() {
                            return Err(GraphError::UnknownVertex { line, vertex: v, n: g.n() });
                        }
                    }
                    if i == j {
                        return Err(GraphError::SelfLoop { line, vertex: i });
                    }
                    g.add_edge(i - 1, j - 1)?;
                }
                other => return Err(malformed(&format!("unknown line type `{other}`"))),
            }
        }
        let g = graph.ok_or(GraphError::MissingHeader)?;
        if g.m() != declared {
            return Err(GraphError::EdgeCountMismatch { declared, found: g.m() });
        }
        // A name that collides with the default numeric name of another vertex
        // would make output ambiguous.
        let mut names: Vec<&String> = g.names.iter().collect();
        names.sort();
        names.dedup();
        if names.len() != g.n() {
            return Err(GraphError::Malformed {
                line: 0,
                message: "vertex names are not unique".into(),
            });
        }
        Ok(g)
    }

    /// Serializes back into the text format accepted by [`Graph::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("p {} {}\n", self.n(), self.m());
        for (i, name) in self.names.iter().enumerate() {
            if *name != (i + 1).to_string() {
                let _ = writeln!(out, "v {} {}", i + 1, name);
            }
        }
        for (u, v) in self.edges() {
            let _ = writeln!(out, "e {} {}", u + 1, v + 1);
        }
        out
    }

    pub fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::from_edges(n, &edges).expect("path")
    }

    pub fn cycle(n: usize) -> Graph {
        let mut edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        if n >= 3 {
            edges.push((n - 1, 0));
        }
        Graph::from_edges(n, &edges).expect("cycle")
    }

    pub fn complete(n: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                edges.push((u, v));
            }
        }
        Graph::from_edges(n, &edges).expect("complete")
    }

    /// `K_{1,leaves}` with the centre at index 0.
    pub fn star(leaves: usize) -> Graph {
        let edges: Vec<_> = (1..=leaves).map(|i| (0, i)).collect();
        Graph::from_edges(leaves + 1, &edges).expect("star")
    }

    /// `K_{a,b}` with the `a` side first.
    pub fn complete_bipartite(a: usize, b: usize) -> Graph {
        let mut edges = Vec::new();
        for u in 0..a {
            for v in a..a + b {
                edges.push((u, v));
            }
        }
        Graph::from_edges(a + b, &edges).expect("complete bipartite")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VertexCover {
    pub vertices: Vec<usize>,
}

impl VertexCover {
    pub fn size(&self) -> usize {
        self.vertices.len()
    }

    pub fn contains(&self, v: usize) -> bool {
        self.vertices.binary_search(&v).is_ok()
    }
}

/// Exact minimum vertex cover by 2-way edge branching with iterative
/// deepening on the budget.
///
/// The first uncovered edge `(u, v)`, `u < v`, is branched on with `u` tried
/// first, so among minimum covers the search returns the first one in that
/// order.
pub fn min_vertex_cover(g: &Graph, k_max: usize) -> Result<VertexCover, GraphError> {
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let mut in_cover = vec![false; g.n()];
    let mut chosen = Vec::new();
    for budget in 0..=k_max {
        if branch(&edges, 0, budget, &mut in_cover, &mut chosen) {
            chosen.sort_unstable();
            return Ok(VertexCover { vertices: chosen });
        }
    }
    Err(GraphError::CoverExceedsBudget { k_max })
}

fn branch(
    edges: &[(usize, usize)],
    from: usize,
    budget: usize,
    in_cover: &mut [bool],
    chosen: &mut Vec<usize>,
) -> bool {
    let Some(offset) = edges[from..]
        .iter()
        .position(|&(u, v)| !in_cover[u] && !in_cover[v])
    else {
        return true;
    };
    if budget == 0 {
        return false;
    }
    let at = from + offset;
    let (u, v) = edges[at];
    for w in [u, v] {
        in_cover[w] = true;
        chosen.push(w);
        if branch(edges, at + 1, budget - 1, in_cover, chosen) {
            return true;
        }
        chosen.pop();
        in_cover[w] = false;
    }
    false
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionMode {
    VertexCover,
    NeighborhoodDiversity,
}

/// Partition of `V(G)` into types, ordered by smallest member; members of each
/// type are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypePartition {
    types: Vec<Vec<usize>>,
    cover_types: Vec<usize>,
    type_of: Vec<usize>,
    mode: PartitionMode,
}

impl TypePartition {
    /// Builds a partition from explicit classes. Classes are reordered by their
    /// smallest member and `cover_types` is remapped accordingly.
    pub fn from_classes(
        n: usize,
        mut classes: Vec<(Vec<usize>, bool)>,
        mode: PartitionMode,
    ) -> TypePartition {
        for (c, _) in classes.iter_mut() {
            c.sort_unstable();
        }
        classes.retain(|(c, _)| !c.is_empty());
        classes.sort_by_key(|(c, _)| c[0]);
        let mut type_of = vec![usize::MAX; n];
        let mut cover_types = Vec::new();
        for (t, (members, is_cover)) in classes.iter().enumerate() {
            for &v in members {
                type_of[v] = t;
            }
            if *is_cover {
                cover_types.push(t);
            }
        }
        TypePartition {
            types: classes.into_iter().map(|(c, _)| c).collect(),
            cover_types,
            type_of,
            mode,
        }
    }

    pub fn types(&self) -> &[Vec<usize>] {
        &self.types
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn members(&self, t: usize) -> &[usize] {
        &self.types[t]
    }

    pub fn type_of(&self, v: usize) -> usize {
        self.type_of[v]
    }

    pub fn cover_types(&self) -> &[usize] {
        &self.cover_types
    }

    pub fn is_cover_type(&self, t: usize) -> bool {
        self.cover_types.binary_search(&t).is_ok()
    }

    pub fn mode(&self) -> PartitionMode {
        self.mode
    }
}

/// Vertex-cover-mode types: each cover vertex alone, remaining vertices grouped
/// by their (cover-contained) neighbourhood.
pub fn type_partition(g: &Graph, cover: &VertexCover) -> Result<TypePartition, GraphError> {
    if let Some((u, v)) = g.uncovered_edge(&cover.vertices) {
        return Err(GraphError::InvalidCover(u, v));
    }
    let mut classes: Vec<(Vec<usize>, bool)> = Vec::new();
    let mut by_neighbourhood: HashMap<&[usize], usize> = HashMap::new();
    for v in 0..g.n() {
        if cover.contains(v) {
            classes.push((vec![v], true));
            continue;
        }
        let key = g.neighbors(v);
        match by_neighbourhood.get(key) {
            Some(&c) => classes[c].0.push(v),
            None => {
                by_neighbourhood.insert(key, classes.len());
                classes.push((vec![v], false));
            }
        }
    }
    Ok(TypePartition::from_classes(g.n(), classes, PartitionMode::VertexCover))
}

/// Neighbourhood-diversity types: the twin classes of `g`, without the
/// cover-singleton convention. Types may be cliques or independent sets.
pub fn nd_partition(g: &Graph) -> TypePartition {
    let mut classes: Vec<(Vec<usize>, bool)> = Vec::new();
    for v in 0..g.n() {
        // Being twins is an equivalence relation, so comparing against one
        // representative per class suffices.
        match classes.iter_mut().find(|(c, _)| g.are_twins(c[0], v)) {
            Some((c, _)) => c.push(v),
            None => classes.push((vec![v], false)),
        }
    }
    TypePartition::from_classes(g.n(), classes, PartitionMode::NeighborhoodDiversity)
}

/// Type partition for the requested mode. In vertex-cover mode a minimum cover
/// of size at most `k_max` is computed first.
pub fn partition_for_mode(
    g: &Graph,
    mode: PartitionMode,
    k_max: usize,
) -> Result<(TypePartition, Option<VertexCover>), GraphError> {
    match mode {
        PartitionMode::VertexCover => {
            let cover = min_vertex_cover(g, k_max)?;
            let tp = type_partition(g, &cover)?;
            Ok((tp, Some(cover)))
        }
        PartitionMode::NeighborhoodDiversity => Ok((nd_partition(g), None)),
    }
}
