//! Intersections of two independent branching random walks: the exact
//! expected pair count, Monte Carlo records, the thinning coupling and ends
//! diagnostics.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group_graph::{radial_ln_column, Elem, GroupSpec};
use crate::gw_trees::{sample_gw_with, MarkedTree, OffspringDistribution, TreeLimits};
use crate::magic::{branching_vertices, ends_profile, OrientedTree};
use crate::numeric::CompensatedSum;
use crate::rng::substream;
use crate::tree_walk::{run_walk, trace};

/// `n · ln a`, with `0⁰ = 1`.
fn ln_pow(ln_a: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        n as f64 * ln_a
    }
}

/// `ln p_s(x, y)` for `s = 0..=s_max`.
fn ln_transition_column(g: GroupSpec, x: &Elem, y: &Elem, s_max: usize) -> Result<Vec<f64>> {
    let j = g.distance(x, y)?;
    match g.tree_degree() {
        Some(d) => Ok(radial_ln_column(d, j, s_max)),
        None => (0..=s_max).map(|s| g.ln_return_probability(s, x, y)).collect(),
    }
}

/// Partial sums `S_0..S_N` of `Σ_{n,m ≤ N} a^n b^m p_{n+m}(x,y)`.
///
/// `S_N − S_{N−1}` collects the pairs with `max(n, m) = N`, so the whole
/// sequence costs `O(N²)` terms.
pub fn expected_pairs_partial_sums(
    mean1: f64,
    mean2: f64,
    g: GroupSpec,
    x: &Elem,
    y: &Elem,
    n_max: usize,
) -> Result<Vec<f64>> {
    if !(mean1 >= 0.0 && mean2 >= 0.0) || !mean1.is_finite() || !mean2.is_finite() {
        return Err(Error::Domain("means must be finite and non-negative".into()));
    }
    let ln_p = ln_transition_column(g, x, y, 2 * n_max)?;
    let (la, lb) = (mean1.ln(), mean2.ln());
    let term = |n: usize, m: usize| {
        let l = ln_p[n + m];
        if l == f64::NEG_INFINITY {
            return 0.0;
        }
        let t = ln_pow(la, n) + ln_pow(lb, m) + l;
        if t == f64::NEG_INFINITY || t.is_nan() {
            0.0
        } else {
            t.exp()
        }
    };
    let mut total = CompensatedSum::new();
    let mut out = Vec::with_capacity(n_max + 1);
    for big in 0..=n_max {
        for m in 0..=big {
            total.add(term(big, m));
        }
        for n in 0..big {
            total.add(term(n, big));
        }
        out.push(total.value());
    }
    Ok(out)
}

/// `Σ_{n,m ≤ N} mean1ⁿ · mean2ᵐ · p_{n+m}(x, y)`: the expected number of
/// pairs `(u, v)` with `X₁(u) = X₂(v)` when both trees are cut at depth N.
pub fn expected_pairs_truncated(mean1: f64, mean2: f64, g: GroupSpec, x: &Elem, y: &Elem, n_max: usize) -> Result<f64> {
    Ok(*expected_pairs_partial_sums(mean1, mean2, g, x, y, n_max)?.last().unwrap())
}

/// One Monte Carlo realisation of two independent truncated BRWs.
#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionRecord {
    pub group: GroupSpec,
    pub depths: (usize, usize),
    /// Deepest generation fully present in each tree.
    pub achieved_depths: (usize, usize),
    pub truncated: bool,
    /// Group elements visited by both walks, sorted.
    pub intersection: Vec<Elem>,
    /// `X₁⁻¹(X₂(V(T₂)))` as vertex ids of `T₁`, sorted.
    pub pulled_back: Vec<usize>,
    /// `#{(u, v) : X₁(u) = X₂(v)}`.
    pub pair_count: u64,
    /// `T₁` with the pulled-back set as its marks.
    pub tree1: MarkedTree,
}

/// Sizes and truncation for [`sample_intersections`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairDepths {
    pub depth1: usize,
    pub depth2: usize,
    /// Vertex budget per tree.
    pub budget: usize,
}

fn complete_depth(tree: &MarkedTree, limit: usize) -> usize {
    (0..tree.len())
        .filter(|&v| !tree.is_expanded(v) && tree.depth(v) < limit)
        .map(|v| tree.depth(v))
        .min()
        .unwrap_or(limit)
}

fn visit_counts(values: &[Elem]) -> HashMap<&Elem, u64> {
    let mut counts: HashMap<&Elem, u64> = HashMap::new();
    for x in values {
        *counts.entry(x).or_default() += 1;
    }
    counts
}

#[allow(clippy::too_many_arguments)]
pub fn sample_intersections<R: Rng + ?Sized>(
    mu1: &OffspringDistribution,
    mu2: &OffspringDistribution,
    g: GroupSpec,
    x: &Elem,
    y: &Elem,
    depths: PairDepths,
    rng: &mut R,
) -> Result<IntersectionRecord> {
    g.validate(x)?;
    g.validate(y)?;
    let mut t1 = sample_gw_with(mu1, TreeLimits::depth(depths.depth1, depths.budget), rng);
    let t2 = sample_gw_with(mu2, TreeLimits::depth(depths.depth2, depths.budget), rng);
    let w1 = run_walk(&t1, g, x, rng)?;
    let w2 = run_walk(&t2, g, y, rng)?;
    let c1 = visit_counts(w1.values());
    let c2 = visit_counts(w2.values());
    let mut pair_count = 0u64;
    let mut intersection = Vec::new();
    for (z, a) in &c1 {
        if let Some(b) = c2.get(z) {
            pair_count += a * b;
            intersection.push((*z).clone());
        }
    }
    intersection.sort_unstable();
    let pulled_back: Vec<usize> = (0..t1.len()).filter(|&v| c2.contains_key(w1.value(v))).collect();
    let achieved_depths = (complete_depth(&t1, depths.depth1), complete_depth(&t2, depths.depth2));
    let truncated = t1.is_truncated() || t2.is_truncated();
    t1.mark_set(&pulled_back)?;
    Ok(IntersectionRecord {
        group: g,
        depths: (depths.depth1, depths.depth2),
        achieved_depths,
        truncated,
        intersection,
        pulled_back,
        pair_count,
        tree1: t1,
    })
}

/// `I^p` for one replicate at one thinning level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinnedIntersection {
    pub p: f64,
    /// `(X₁^p)⁻¹(X₂^p(V(T₂^p)))` as vertex ids of the unthinned `T₁`.
    pub pulled_back: BTreeSet<usize>,
    /// Group elements visited by both thinned walks.
    pub elements: usize,
    pub pair_count: u64,
    pub truncated: bool,
}

/// Thins both trees of one replicate at every `p` in `p_grid` using one
/// set of edge labels, so the results are coupled monotonically in `p`. Both
/// walks start at the identity; the thinned walks are the restrictions of
/// the full walks to the root components.
pub fn thinned_intersections<R: Rng + ?Sized>(
    mu1: &OffspringDistribution,
    mu2: &OffspringDistribution,
    g: GroupSpec,
    p_grid: &[f64],
    depth: usize,
    budget: usize,
    rng: &mut R,
) -> Result<Vec<ThinnedIntersection>> {
    if let Some(p) = p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Domain(format!("thinning level {p} outside [0,1]")));
    }
    let e = g.identity();
    let mut t1 = sample_gw_with(mu1, TreeLimits::depth(depth, budget), rng);
    let mut t2 = sample_gw_with(mu2, TreeLimits::depth(depth, budget), rng);
    let w1 = run_walk(&t1, g, &e, rng)?.values().to_vec();
    let w2 = run_walk(&t2, g, &e, rng)?.values().to_vec();
    t1.ensure_labels(rng);
    t2.ensure_labels(rng);
    let mut out = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let (s1, keep1) = t1.root_component(p)?;
        let (s2, keep2) = t2.root_component(p)?;
        let c2 = visit_counts(&keep2.iter().map(|&v| w2[v].clone()).collect::<Vec<_>>())
            .into_iter()
            .map(|(k, v)| (k.clone(), v))
            .collect::<HashMap<Elem, u64>>();
        let mut pulled_back = BTreeSet::new();
        let mut pair_count = 0;
        let mut elements = BTreeSet::new();
        for &v in &keep1 {
            if let Some(b) = c2.get(&w1[v]) {
                pulled_back.insert(v);
                pair_count += b;
                elements.insert(&w1[v]);
            }
        }
        out.push(ThinnedIntersection {
            p,
            pulled_back,
            elements: elements.len(),
            pair_count,
            truncated: s1.is_truncated() || s2.is_truncated(),
        });
    }
    Ok(out)
}

/// One CSV row of the thinning sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p: f64,
    pub replicate: u64,
    pub intersection_size: usize,
    pub pair_count: u64,
    pub truncated: bool,
}

/// Settings for the replicate-parallel experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replicates {
    pub count: u64,
    pub seed: u64,
    pub budget: usize,
}

/// Thinned intersections for every replicate, replicate `i` drawn from
/// `substream(seed, i)`. Also returns, per replicate, whether the pulled-back
/// sets were nested along the sorted grid.
pub fn thinned_intersection_sweep(
    mu1: &OffspringDistribution,
    mu2: &OffspringDistribution,
    g: GroupSpec,
    p_grid: &[f64],
    depth: usize,
    reps: Replicates,
) -> Result<(Vec<SweepRow>, Vec<bool>)> {
    if p_grid.is_empty() {
        return Err(Error::Domain("empty thinning grid".into()));
    }
    let mut grid = p_grid.to_vec();
    grid.sort_by(f64::total_cmp);
    let per_rep: Vec<Result<(Vec<SweepRow>, bool)>> = (0..reps.count)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(reps.seed, rep);
            let sets = thinned_intersections(mu1, mu2, g, &grid, depth, reps.budget, &mut rng)?;
            let nested = sets.windows(2).all(|w| w[0].pulled_back.is_subset(&w[1].pulled_back));
            let rows = sets
                .iter()
                .map(|s| SweepRow {
                    p: s.p,
                    replicate: rep,
                    intersection_size: s.pulled_back.len(),
                    pair_count: s.pair_count,
                    truncated: s.truncated,
                })
                .collect();
            Ok((rows, nested))
        })
        .collect();
    let mut rows = Vec::new();
    let mut nested = Vec::new();
    for r in per_rep {
        let (r, n) = r?;
        rows.extend(r);
        nested.push(n);
    }
    Ok((rows, nested))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EndsVerdict {
    /// The pulled-back set is empty.
    Empty,
    /// No vertex is branching for any `(k, r)` in the grid.
    AtMostTwoEnded,
    /// Some vertex is branching: compatible with three or more ends.
    MultiEnded,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchingCensusRow {
    pub k: usize,
    pub r: usize,
    pub branching: usize,
    /// Fraction of `I` that is branching: `P(o ∈ B_{k,r})` for a root
    /// uniform on `I`.
    pub root_frequency: f64,
    /// `2r/k`.
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndsDiagnostic {
    pub verdict: EndsVerdict,
    pub census: Vec<BranchingCensusRow>,
}

/// Branching census of the pulled-back set inside `T₁`.
pub fn intersection_ends_diagnostic(record: &IntersectionRecord, k_grid: &[usize], r_grid: &[usize]) -> Result<EndsDiagnostic> {
    branching_census(&record.tree1, record.tree1.marks(), k_grid, r_grid)
}

/// Branching census of an arbitrary marked tree.
pub fn branching_census(tree: &MarkedTree, marks: &[bool], k_grid: &[usize], r_grid: &[usize]) -> Result<EndsDiagnostic> {
    let size = marks.iter().filter(|&&m| m).count();
    if size == 0 {
        return Ok(EndsDiagnostic { verdict: EndsVerdict::Empty, census: Vec::new() });
    }
    let oriented = OrientedTree::new(tree);
    let mut census = Vec::new();
    for &r in r_grid {
        for &k in k_grid {
            let b = branching_vertices(&oriented, marks, k, r)?;
            let in_marks = b.iter().filter(|&&v| marks[v]).count();
            census.push(BranchingCensusRow {
                k,
                r,
                branching: b.len(),
                root_frequency: in_marks as f64 / size as f64,
                bound: 2.0 * r as f64 / k as f64,
            });
        }
    }
    let verdict = if census.iter().all(|c| c.branching == 0) { EndsVerdict::AtMostTwoEnded } else { EndsVerdict::MultiEnded };
    Ok(EndsDiagnostic { verdict, census })
}

/// One CSV row of the trace-ends experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndsRow {
    pub radius: usize,
    pub replicate: u64,
    pub qualifying_components: usize,
    /// Whether the tree reached the depth budget.
    pub survived: bool,
    /// Generation-`radius` tree vertices with at least `m_threshold`
    /// descendants (within the depth budget).
    pub m_n: usize,
}

/// Grows a BRW to `depth`, then for each radius removes the ball around the
/// start from the trace and counts the components holding at least
/// `m_threshold` trace vertices.
pub fn trace_ends_experiment(
    mu: &OffspringDistribution,
    g: GroupSpec,
    depth: usize,
    radius_grid: &[usize],
    m_threshold: usize,
    reps: Replicates,
) -> Result<Vec<EndsRow>> {
    if radius_grid.is_empty() {
        return Err(Error::Domain("empty radius grid".into()));
    }
    let per_rep: Vec<Result<Vec<EndsRow>>> = (0..reps.count)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(reps.seed, rep);
            let tree = sample_gw_with(mu, TreeLimits::depth(depth, reps.budget), &mut rng);
            let walk = run_walk(&tree, g, &g.identity(), &mut rng)?;
            let tr = trace(&walk);
            let graph = tr.to_graph();
            let marks = vec![true; graph.len()];
            let survived = tree.height() == depth;
            let mut desc = vec![1usize; tree.len()];
            for v in tree.post_order() {
                if let Some(p) = tree.parent(v) {
                    desc[p] += desc[v];
                }
            }
            radius_grid
                .iter()
                .map(|&radius| {
                    let census = ends_profile(&graph, &marks, 0, radius, m_threshold)?;
                    let m_n = (0..tree.len()).filter(|&v| tree.depth(v) == radius && desc[v] >= m_threshold).count();
                    Ok(EndsRow { radius, replicate: rep, qualifying_components: census.qualifying, survived, m_n })
                })
                .collect()
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_rep {
        rows.extend(r?);
    }
    Ok(rows)
}

/// Serialises any row type as CSV with a header.
pub fn write_rows_csv<W: Write, T: Serialize>(out: W, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
