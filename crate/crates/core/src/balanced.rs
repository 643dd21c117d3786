//! Minimum-cut equitable partitioning.
//!
//! The equitable `c`-partition sentence is run through the extension-program
//! pipeline. Every edge has an endpoint in the vertex cover, so once the
//! cover vertices are placed the cut is affine in the subtype sizes: an
//! objective variable `β` is tied to that expression and minimized per work
//! item.

use std::ops::ControlFlow;
use std::time::Instant;

use crate::corpus;
use crate::formula::{Formula, Mso};
use crate::graph::{Graph, PartitionMode};
use crate::ilp::{self, Relation};
use crate::solver::{extract_witness, Candidate, Pipeline, SolverError, SolverOptions, SolverStats};

/// `A, B, …, Z`, then `P27, P28, …`.
pub fn part_names(c: usize) -> Vec<String> {
    (0..c)
        .map(|i| {
            if i < 26 {
                char::from(b'A' + i as u8).to_string()
            } else {
                format!("P{}", i + 1)
            }
        })
        .collect()
}

/// Equitable `c`-partition sentence with the part variables as prefix.
pub fn generate_equitable_formula(c: usize, no_empty_parts: bool) -> Formula {
    let text = corpus::equitable_partition(c, no_empty_parts);
    let mut f = Formula::parse(&text).expect("generated sentence parses");
    if f.prefix.is_empty() {
        // With one part and no constraints nothing pins `A` to the prefix.
        let Mso::Exists(name, body) = f.body else {
            unreachable!("sentence starts with an existential set block")
        };
        f = Formula {
            prefix: vec![name],
            body: *body,
            constraints: Vec::new(),
        };
    }
    f
}

#[derive(Debug, Clone)]
pub struct BalancedResult {
    pub cut_value: usize,
    pub parts: Vec<Vec<usize>>,
    pub stats: SolverStats,
    pub ilps: Vec<String>,
}

/// Part index of each reduced vertex; `None` unless it lies in exactly one set.
fn part_of(masks: &[u128], v: usize) -> Option<usize> {
    let mut hits = masks.iter().enumerate().filter(|(_, &m)| m >> v & 1 == 1);
    match (hits.next(), hits.next()) {
        (Some((p, _)), None) => Some(p),
        _ => None,
    }
}

struct CutModel {
    /// Reduced index of every cover vertex.
    cover_reduced: Vec<usize>,
    /// Edges between cover vertices, as positions in `cover_reduced`.
    cover_edges: Vec<(usize, usize)>,
    /// Per type: positions in `cover_reduced` of its cover neighbours (empty
    /// for cover types).
    type_neighbours: Vec<Vec<usize>>,
    is_cover_type: Vec<bool>,
}

impl CutModel {
    fn new(g: &Graph, p: &Pipeline<'_>) -> CutModel {
        let cover = &p.cover.as_ref().expect("vertex-cover mode").vertices;
        let mut reduced_of = vec![usize::MAX; g.n()];
        for (i, &v) in p.rg.to_original.iter().enumerate() {
            reduced_of[v] = i;
        }
        let pos = |v: usize| cover.binary_search(&v).ok();
        let cover_edges = g
            .edges()
            .filter_map(|(u, v)| Some((pos(u)?, pos(v)?)))
            .collect();
        let type_neighbours = (0..p.tp.len())
            .map(|t| {
                if p.tp.is_cover_type(t) {
                    Vec::new()
                } else {
                    let rep = p.tp.members(t)[0];
                    g.neighbors(rep).iter().map(|&w| pos(w).expect("neighbour in cover")).collect()
                }
            })
            .collect();
        CutModel {
            cover_reduced: cover.iter().map(|&v| reduced_of[v]).collect(),
            cover_edges,
            type_neighbours,
            is_cover_type: (0..p.tp.len()).map(|t| p.tp.is_cover_type(t)).collect(),
        }
    }

    /// `const₀` and `const_S` per `(type, signature)` for one assignment.
    fn constants(&self, cand: &Candidate) -> (i64, Vec<Vec<i64>>) {
        let parts: Vec<Option<usize>> = self
            .cover_reduced
            .iter()
            .map(|&v| part_of(&cand.masks, v))
            .collect();
        let base = self
            .cover_edges
            .iter()
            .filter(|&&(a, b)| parts[a] != parts[b])
            .count() as i64;
        let per_type = cand
            .counts
            .iter()
            .enumerate()
            .map(|(t, per_sig)| {
                (0..per_sig.len())
                    .map(|sig| {
                        if self.is_cover_type[t] || sig.count_ones() != 1 {
                            return 0;
                        }
                        let p = sig.trailing_zeros() as usize;
                        self.type_neighbours[t]
                            .iter()
                            .filter(|&&c| parts[c] != Some(p))
                            .count() as i64
                    })
                    .collect()
            })
            .collect();
        (base, per_type)
    }
}

/// Minimum of `Σ const_S·x_S` over the per-type sums and subtype pins.
fn lower_bound(counts: &[Vec<usize>], sizes: &[usize], consts: &[Vec<i64>], small: usize) -> i64 {
    let mut total = 0;
    for ((per_sig, &size), k) in counts.iter().zip(sizes).zip(consts) {
        let mut slack = size as i64;
        let mut cheapest = i64::MAX;
        for (&c, &k) in per_sig.iter().zip(k) {
            total += k * c as i64;
            slack -= c as i64;
            if c >= small {
                cheapest = cheapest.min(k);
            }
        }
        if slack > 0 && cheapest != i64::MAX {
            total += slack * cheapest;
        }
    }
    total
}

/// Minimum number of cut edges over partitions into `c` parts whose sizes
/// differ by at most one. `None` if no such partition exists.
pub fn cbalanced(
    g: &Graph,
    c: usize,
    allow_empty: bool,
    opts: &SolverOptions,
) -> Result<Option<BalancedResult>, SolverError> {
    let start = Instant::now();
    if c == 0 {
        return Err(SolverError::InvalidInput("c must be at least 1".into()));
    }
    if opts.mode != PartitionMode::VertexCover {
        return Err(SolverError::InvalidInput(
            "balanced partitioning needs vertex-cover mode".into(),
        ));
    }
    let f = generate_equitable_formula(c, !allow_empty);
    let pipeline = Pipeline::new(g, &f, opts)?;
    let model = CutModel::new(g, &pipeline);
    let ilp_opts = opts.ilp();
    let small = pipeline.stats.small_threshold();
    let mut counters = SolverStats::default();
    let mut best: Option<(i64, Vec<Vec<usize>>)> = None;
    let mut ilps = Vec::new();
    pipeline.run(&mut counters, |items, counters| {
        for item in items {
            let (base, per_type) = model.constants(item.candidate);
            if let Some((b, _)) = &best {
                let lb = base + lower_bound(&item.candidate.counts, &pipeline.rg.original_sizes, &per_type, small);
                if lb >= *b {
                    continue;
                }
            }
            let mut ext = pipeline.build(item.candidate, &item.alpha);
            let inst = &mut ext.instance;
            let beta = inst.add_var("beta", 0, g.m() as i64);
            let mut row = vec![(beta, 1)];
            for (vars, consts) in ext.var_of.iter().zip(&per_type) {
                row.extend(vars.iter().zip(consts).filter(|(_, &k)| k != 0).map(|(&x, &k)| (x, -k)));
            }
            inst.add_row(row, Relation::Eq, base);
            inst.set_objective(vec![(beta, 1)]);
            if let Some((b, _)) = &best {
                inst.add_row(vec![(beta, 1)], Relation::Le, b - 1);
            }
            if opts.record_ilps {
                ilps.push(inst.dump());
            }
            counters.ilp_solves += 1;
            let res = ilp::solve_min(inst, &ilp_opts)?;
            if let (Some(x), Some(value)) = (res.assignment, res.objective_value) {
                let sets = extract_witness(&item.candidate.masks, &ext, &x, &pipeline.rg)?;
                best = Some((value, sets));
                if value == 0 {
                    return Ok(ControlFlow::Break(()));
                }
            }
        }
        Ok(ControlFlow::Continue(()))
    })?;
    counters.elapsed = start.elapsed();
    let Some((beta, parts)) = best else {
        return Ok(None);
    };
    let mut label = vec![usize::MAX; g.n()];
    for (p, part) in parts.iter().enumerate() {
        for &v in part {
            label[v] = p;
        }
    }
    let cut_value = g.cut_size(&label);
    if cut_value as i64 != beta || label.contains(&usize::MAX) {
        return Err(SolverError::InconsistentAssignment(format!(
            "objective {beta} but the parts cut {cut_value} edges"
        )));
    }
    Ok(Some(BalancedResult {
        cut_value,
        parts,
        stats: counters,
        ilps,
    }))
}
