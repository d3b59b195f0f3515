//! Exact and Monte Carlo checks of the mass-transport principle on marked
//! rooted graphs, including its weighted (quasi-unimodular) form
//!
//! `E[W · Σ_{v∈A} F(G,A,ρ,v)] = E[W · Σ_{v∈A} F(G,A,v,ρ)]`.
//!
//! Transport functions are local: each declares the radius of the ball
//! around the root that determines both sums. Truncated samples certify a
//! radius; samples whose certified radius is too small are counted as
//! inconclusive rather than silently evaluated.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::group_graph::{Elem, GroupSpec};
use crate::gw_trees::{sample_unimodular_gw_with, GwVariant, MarkedTree, OffspringDistribution, TreeLimits, DEFAULT_RETRY_LIMIT};
use crate::numeric::CompensatedSum;
use crate::rng::{substream, Rng as StreamRng};
use crate::stats::{two_sided_z, Moments};
use crate::tree_walk::run_walk;

/// Minimum number of samples accepted by [`mc_mtp_test`].
pub const MIN_SAMPLES: usize = 1000;
/// Largest tolerated fraction of inconclusive samples.
pub const MAX_INCONCLUSIVE_FRACTION: f64 = 0.10;

/// A finite marked graph handed to transport functions.
#[derive(Debug, Clone, Copy)]
pub struct MarkedGraph<'a> {
    pub graph: &'a SimpleGraph,
    pub marks: &'a [bool],
}

impl MarkedGraph<'_> {
    /// Marked vertices within distance `radius` of `u` (including `u`).
    pub fn marked_within(&self, u: usize, radius: usize) -> usize {
        self.graph
            .distances_within(u, radius)
            .iter()
            .zip(self.marks)
            .filter(|(d, &m)| d.is_some() && m)
            .count()
    }

    pub fn distance_at_most(&self, u: usize, v: usize, radius: usize) -> bool {
        self.graph.distances_within(u, radius)[v].is_some()
    }
}

/// A non-negative transport function `F(G, A, u, v)`.
pub trait Transport: Sync {
    fn name(&self) -> &str;

    /// `F(u, v) = 0` whenever `dist(u, v)` exceeds this; `None` if unbounded.
    fn support(&self) -> Option<usize>;

    /// Radius of the ball around the root that determines both transport
    /// sums at the root: every vertex closer than this has all its
    /// neighbours present and every vertex within it has its mark. `None`
    /// means the whole graph is needed.
    fn radius(&self) -> Option<usize>;

    fn eval(&self, g: MarkedGraph<'_>, u: usize, v: usize) -> f64;
}

/// Built-in transport functions, selectable by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinTransport {
    /// `1(u ~ v)`.
    Adjacent,
    /// `1(u ~ v) · deg(v)`.
    Degree,
    /// `1(dist(u,v) ≤ 1) · |B₁(v) ∩ A|`.
    Crowd,
    /// `1(dist(u,v) ≤ 2) / |B₂(u) ∩ A|`: each vertex spreads unit mass
    /// evenly over the marked vertices within distance 2.
    Share,
    /// `1(deg u = 1) · 1(v ≠ u)`: every leaf sends one unit to every other
    /// marked vertex. Not local; needs complete finite samples.
    LeafBroadcast,
}

impl BuiltinTransport {
    pub const ALL: [BuiltinTransport; 5] = [Self::Adjacent, Self::Degree, Self::Crowd, Self::Share, Self::LeafBroadcast];

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == name)
            .ok_or_else(|| Error::Domain(format!("unknown transport function {name:?}")))
    }
}

impl Transport for BuiltinTransport {
    fn name(&self) -> &str {
        match self {
            Self::Adjacent => "adjacent",
            Self::Degree => "degree",
            Self::Crowd => "crowd",
            Self::Share => "share",
            Self::LeafBroadcast => "leaf-broadcast",
        }
    }

    fn support(&self) -> Option<usize> {
        match self {
            Self::Adjacent | Self::Degree | Self::Crowd => Some(1),
            Self::Share => Some(2),
            Self::LeafBroadcast => None,
        }
    }

    fn radius(&self) -> Option<usize> {
        match self {
            Self::Adjacent => Some(1),
            Self::Degree | Self::Crowd => Some(2),
            Self::Share => Some(4),
            Self::LeafBroadcast => None,
        }
    }

    fn eval(&self, g: MarkedGraph<'_>, u: usize, v: usize) -> f64 {
        match self {
            Self::Adjacent => f64::from(u8::from(g.graph.has_edge(u, v))),
            Self::Degree => {
                if g.graph.has_edge(u, v) {
                    g.graph.degree(v) as f64
                } else {
                    0.0
                }
            }
            Self::Crowd => {
                if u == v || g.graph.has_edge(u, v) {
                    g.marked_within(v, 1) as f64
                } else {
                    0.0
                }
            }
            Self::Share => {
                if g.distance_at_most(u, v, 2) {
                    1.0 / g.marked_within(u, 2).max(1) as f64
                } else {
                    0.0
                }
            }
            Self::LeafBroadcast => f64::from(u8::from(g.graph.degree(u) == 1 && u != v)),
        }
    }
}

/// Wraps a closure as a transport function of unbounded radius.
pub struct FnTransport<F> {
    pub name: String,
    pub f: F,
}

impl<F> Transport for FnTransport<F>
where
    F: Fn(MarkedGraph<'_>, usize, usize) -> f64 + Sync,
{
    fn name(&self) -> &str {
        &self.name
    }
    fn support(&self) -> Option<usize> {
        None
    }
    fn radius(&self) -> Option<usize> {
        None
    }
    fn eval(&self, g: MarkedGraph<'_>, u: usize, v: usize) -> f64 {
        (self.f)(g, u, v)
    }
}

/// Result of the exact double-sum check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactMtp {
    pub lhs: f64,
    pub rhs: f64,
    pub equal: bool,
}

/// With the root uniform on `A`: `lhs = |A|⁻¹ Σ_{u∈A} Σ_{v∈A} F(u,v)`
/// summed row by row, `rhs` the same with `F(v,u)` summed column by column.
pub fn exact_mtp_check(graph: &SimpleGraph, marks: &[bool], f: &dyn Transport) -> Result<ExactMtp> {
    if marks.len() != graph.len() {
        return Err(Error::Domain(format!("{} marks for {} vertices", marks.len(), graph.len())));
    }
    let a: Vec<usize> = (0..graph.len()).filter(|&v| marks[v]).collect();
    if a.is_empty() {
        return Err(Error::Domain("the marked set is empty".into()));
    }
    let g = MarkedGraph { graph, marks };
    let mut lhs = CompensatedSum::new();
    for &u in &a {
        for &v in &a {
            lhs.add(f.eval(g, u, v));
        }
    }
    let mut rhs = CompensatedSum::new();
    for &v in a.iter().rev() {
        for &u in a.iter().rev() {
            rhs.add(f.eval(g, u, v));
        }
    }
    let n = a.len() as f64;
    let (lhs, rhs) = (lhs.value() / n, rhs.value() / n);
    Ok(ExactMtp { lhs, rhs, equal: (lhs - rhs).abs() < 1e-12 })
}

/// One rooted marked sample with its weight ingredient.
#[derive(Debug, Clone, PartialEq)]
pub struct RootedSample {
    pub graph: SimpleGraph,
    pub marks: Vec<bool>,
    pub root: usize,
    /// Vertices closer than this to the root have all their neighbours
    /// present and marks within it are final; `usize::MAX` for complete
    /// samples.
    pub certified_radius: usize,
    /// Positive weight ingredient (e.g. `(#X⁻¹(ρ))⁻¹`); 1 when unused.
    pub weight_ingredient: f64,
}

impl RootedSample {
    /// `(Σ_{v∈A} F(ρ,v), Σ_{v∈A} F(v,ρ))`, or `None` if the sample cannot
    /// certify the radius `F` needs.
    pub fn transport_sums(&self, f: &dyn Transport) -> Option<(f64, f64)> {
        match f.radius() {
            Some(r) if self.certified_radius < r => return None,
            None if self.certified_radius != usize::MAX => return None,
            _ => {}
        }
        let g = MarkedGraph { graph: &self.graph, marks: &self.marks };
        let candidates: Vec<usize> = match f.support() {
            Some(s) => {
                let d = self.graph.distances_within(self.root, s);
                (0..self.graph.len()).filter(|&v| d[v].is_some() && self.marks[v]).collect()
            }
            None => (0..self.graph.len()).filter(|&v| self.marks[v]).collect(),
        };
        let mut out = CompensatedSum::new();
        let mut inn = CompensatedSum::new();
        for v in candidates {
            out.add(f.eval(g, self.root, v));
            inn.add(f.eval(g, v, self.root));
        }
        Some((out.value(), inn.value()))
    }
}

/// Source of rooted marked samples.
pub trait Sampler: Sync {
    fn sample(&self, rng: &mut StreamRng) -> Result<RootedSample>;
}

/// Root uniform on the marked set of a fixed finite graph.
#[derive(Debug, Clone)]
pub struct UniformRoot {
    pub graph: SimpleGraph,
    pub marks: Vec<bool>,
}

impl Sampler for UniformRoot {
    fn sample(&self, rng: &mut StreamRng) -> Result<RootedSample> {
        let a: Vec<usize> = (0..self.graph.len()).filter(|&v| self.marks[v]).collect();
        let root = *a.choose(rng).ok_or_else(|| Error::Domain("the marked set is empty".into()))?;
        Ok(RootedSample {
            graph: self.graph.clone(),
            marks: self.marks.clone(),
            root,
            certified_radius: usize::MAX,
            weight_ingredient: 1.0,
        })
    }
}

/// Always the same root of a fixed finite graph.
#[derive(Debug, Clone)]
pub struct FixedRoot {
    pub graph: SimpleGraph,
    pub marks: Vec<bool>,
    pub root: usize,
}

impl Sampler for FixedRoot {
    fn sample(&self, _rng: &mut StreamRng) -> Result<RootedSample> {
        Ok(RootedSample {
            graph: self.graph.clone(),
            marks: self.marks.clone(),
            root: self.root,
            certified_radius: usize::MAX,
            weight_ingredient: 1.0,
        })
    }
}

/// Target sets `A ⊆ V(G)` for the pull-back sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "rule")]
pub enum TargetRule {
    /// `A = {ρ}`.
    Start,
    /// `A = B(ρ, radius)`. Not locally unimodular: the root is not uniform on
    /// the ball, so the pull-back need not satisfy the transport identity.
    Ball { radius: usize },
    /// `A = V(G)`.
    Everything,
    /// `A = X₂(V(T₂))` for an independent unimodular BRW started at `ρ`,
    /// with `T₂` truncated at `depth`.
    IndependentTrace { mu: OffspringDistribution, depth: usize },
}

/// Truncation settings shared by the tree-based samplers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub depth: usize,
    pub budget: usize,
}

/// Unimodular GW tree `T`, walk `X` on `G` with `X(o) = ρ`, marks
/// `X⁻¹(A)`. For the independent-trace rule the weight ingredient is
/// `(#X₂⁻¹(ρ))⁻¹`; otherwise it is 1.
#[derive(Debug, Clone)]
pub struct Pullback {
    pub group: GroupSpec,
    pub mu: OffspringDistribution,
    pub truncation: Truncation,
    pub target: TargetRule,
}

/// Unimodular BRW `X` pushed into `G`: the sample is the ball of radius
/// `view_radius` around `ρ` in `G` with marks `X(V(T))`, and the weight
/// ingredient is `(#X⁻¹(ρ))⁻¹`.
#[derive(Debug, Clone)]
pub struct Pushforward {
    pub group: GroupSpec,
    pub mu: OffspringDistribution,
    pub truncation: Truncation,
    pub view_radius: usize,
}

fn unimodular_tree(mu: &OffspringDistribution, t: Truncation, rng: &mut StreamRng) -> Result<MarkedTree> {
    sample_unimodular_gw_with(mu, TreeLimits::depth(t.depth, t.budget), GwVariant::Unimodular, DEFAULT_RETRY_LIMIT, rng)
}

/// Smallest depth of an unexpanded vertex (`usize::MAX` if none).
fn tree_certified_radius(tree: &MarkedTree) -> usize {
    (0..tree.len()).filter(|&v| !tree.is_expanded(v)).map(|v| tree.depth(v)).min().unwrap_or(usize::MAX)
}

/// Visited set of an independent BRW from `start`, with multiplicities.
fn observed_trace(
    group: GroupSpec,
    mu: &OffspringDistribution,
    t: Truncation,
    rng: &mut StreamRng,
) -> Result<HashMap<Elem, usize>> {
    let tree = unimodular_tree(mu, t, rng)?;
    let walk = run_walk(&tree, group, &group.identity(), rng)?;
    let mut visited: HashMap<Elem, usize> = HashMap::new();
    for v in 0..tree.len() {
        *visited.entry(walk.value(v).clone()).or_default() += 1;
    }
    Ok(visited)
}

impl Sampler for Pullback {
    fn sample(&self, rng: &mut StreamRng) -> Result<RootedSample> {
        let tree = unimodular_tree(&self.mu, self.truncation, rng)?;
        let start = self.group.identity();
        let walk = run_walk(&tree, self.group, &start, rng)?;
        let certified = tree_certified_radius(&tree);
        let mut weight = 1.0;
        let marks: Vec<bool> = match &self.target {
            TargetRule::Start => (0..tree.len()).map(|v| walk.value(v) == &start).collect(),
            TargetRule::Ball { radius } => {
                (0..tree.len()).map(|v| self.group.norm(walk.value(v)) <= *radius).collect()
            }
            TargetRule::Everything => vec![true; tree.len()],
            TargetRule::IndependentTrace { mu, depth } => {
                // the target is the trace of the depth-truncated BRW, which is
                // fully observed, so it never limits the certified radius
                let second = observed_trace(self.group, mu, Truncation { depth: *depth, ..self.truncation }, rng)?;
                weight = 1.0 / second[&start] as f64;
                (0..tree.len()).map(|v| second.contains_key(walk.value(v))).collect()
            }
        };
        Ok(RootedSample {
            graph: tree.to_graph(),
            marks,
            root: tree.root(),
            certified_radius: certified,
            weight_ingredient: weight,
        })
    }
}

/// Ball of radius `radius` around the identity as a graph, vertex 0 the
/// identity, with the element of each vertex.
pub fn cayley_ball(group: GroupSpec, radius: usize) -> (SimpleGraph, Vec<Elem>) {
    let mut elems = vec![group.identity()];
    let mut index: HashMap<Elem, usize> = HashMap::from([(group.identity(), 0)]);
    let mut edges = Vec::new();
    let mut frontier = vec![0usize];
    for _ in 0..radius {
        let mut next = Vec::new();
        for &i in &frontier {
            for s in 0..group.degree() {
                let y = group.step(&elems[i], s);
                let j = match index.get(&y) {
                    Some(&j) => j,
                    None => {
                        elems.push(y.clone());
                        index.insert(y, elems.len() - 1);
                        next.push(elems.len() - 1);
                        elems.len() - 1
                    }
                };
                edges.push((i, j));
            }
        }
        frontier = next;
    }
    (SimpleGraph::from_edges(elems.len(), &edges), elems)
}

impl Sampler for Pushforward {
    fn sample(&self, rng: &mut StreamRng) -> Result<RootedSample> {
        let trace = observed_trace(self.group, &self.mu, self.truncation, rng)?;
        let (graph, elems) = cayley_ball(self.group, self.view_radius);
        let marks = elems.iter().map(|x| trace.contains_key(x)).collect();
        let start = self.group.identity();
        Ok(RootedSample {
            graph,
            marks,
            root: 0,
            certified_radius: self.view_radius,
            weight_ingredient: 1.0 / trace[&start] as f64,
        })
    }
}

/// Weight applied to each sample, normalised by its sample mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightRule {
    /// `W ≡ 1`.
    Unit,
    /// The sampler's weight ingredient, e.g. `(#X₂⁻¹(ρ))⁻¹`.
    InverseLocalTime,
}

impl WeightRule {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "unit" => Ok(Self::Unit),
            "inverse-local-time" => Ok(Self::InverseLocalTime),
            other => Err(Error::Domain(format!("unknown weight {other:?}"))),
        }
    }

    fn apply(&self, s: &RootedSample) -> f64 {
        match self {
            Self::Unit => 1.0,
            Self::InverseLocalTime => s.weight_ingredient,
        }
    }
}

/// Outcome of a Monte Carlo transport test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MtpReport {
    pub transport: String,
    pub n: usize,
    pub inconclusive: usize,
    /// `Σ W(out − in) / Σ W` over conclusive samples.
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub alpha: f64,
    pub mean_weight: f64,
    pub mean_out: f64,
    pub mean_in: f64,
    pub pass: bool,
}

/// Paired test of `E[W(Σ_v F(ρ,v) − Σ_v F(v,ρ))] = 0`.
///
/// Sample `i` is drawn from `substream(seed, i)`. Weights are normalised by
/// their sample mean; since the identity is invariant under scaling `W`,
/// the decision is taken on the unnormalised products `W·Δ` with a normal
/// confidence interval, and the interval is then rescaled for reporting.
pub fn mc_mtp_test(
    sampler: &dyn Sampler,
    f: &dyn Transport,
    weight: WeightRule,
    n_samples: usize,
    alpha: f64,
    seed: u64,
) -> Result<MtpReport> {
    if n_samples < MIN_SAMPLES {
        return Err(Error::Domain(format!("at least {MIN_SAMPLES} samples are required")));
    }
    if !(0.0 < alpha && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0,1), got {alpha}")));
    }
    let draws: Vec<Result<Option<(f64, f64, f64)>>> = (0..n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i);
            let s = sampler.sample(&mut rng)?;
            Ok(s.transport_sums(f).map(|(out, inn)| (weight.apply(&s), out, inn)))
        })
        .collect();
    let mut diffs = Moments::new();
    let mut weights = Moments::new();
    let mut outs = Moments::new();
    let mut ins = Moments::new();
    let mut inconclusive = 0;
    for d in draws {
        match d? {
            Some((w, out, inn)) => {
                diffs.push(w * (out - inn));
                weights.push(w);
                outs.push(w * out);
                ins.push(w * inn);
            }
            None => inconclusive += 1,
        }
    }
    if inconclusive as f64 > MAX_INCONCLUSIVE_FRACTION * n_samples as f64 {
        return Err(Error::TruncationInsufficient { inconclusive, total: n_samples });
    }
    let half = two_sided_z(alpha) * diffs.std_error();
    let (lo, hi) = (diffs.mean - half, diffs.mean + half);
    let pass = lo <= 0.0 && 0.0 <= hi;
    let scale = weights.mean;
    Ok(MtpReport {
        transport: f.name().to_string(),
        n: n_samples,
        inconclusive,
        estimate: diffs.mean / scale,
        ci_low: lo / scale,
        ci_high: hi / scale,
        alpha,
        mean_weight: scale,
        mean_out: outs.mean / scale,
        mean_in: ins.mean / scale,
        pass,
    })
}

/// Relabels a marked graph by a random permutation; used to spot-check
/// that transport functions only see the graph structure.
pub fn random_relabel<R: Rng + ?Sized>(graph: &SimpleGraph, marks: &[bool], rng: &mut R) -> (SimpleGraph, Vec<bool>, Vec<usize>) {
    let n = graph.len();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut g = SimpleGraph::new(n);
    for u in 0..n {
        for &v in graph.neighbors(u) {
            if u < v {
                g.add_edge(perm[u], perm[v]);
            }
        }
    }
    let mut m = vec![false; n];
    for v in 0..n {
        m[perm[v]] = marks[v];
    }
    (g, m, perm)
}
