//! Offspring distributions, Galton-Watson trees and their augmented and
//! unimodular variants, Bernoulli edge thinning.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::numeric::compensated_sum;

/// Largest supported offspring count.
pub const MAX_OFFSPRING: usize = 64;
/// Default retry cap for the unimodular rejection sampler.
pub const DEFAULT_RETRY_LIMIT: usize = 1_000_000;

/// A probability vector over `{0, 1, …, K}` with `K ≤ 64`.
///
/// Serialises as the plain array of probabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct OffspringDistribution {
    pmf: Vec<f64>,
    mean: f64,
    sampler: WeightedIndex<f64>,
}

impl PartialEq for OffspringDistribution {
    fn eq(&self, other: &Self) -> bool {
        self.pmf == other.pmf
    }
}

impl TryFrom<Vec<f64>> for OffspringDistribution {
    type Error = Error;
    fn try_from(pmf: Vec<f64>) -> Result<Self> {
        Self::new(pmf)
    }
}

impl From<OffspringDistribution> for Vec<f64> {
    fn from(mu: OffspringDistribution) -> Vec<f64> {
        mu.pmf
    }
}

impl OffspringDistribution {
    /// Validates and stores `pmf`. Entries must be finite and non-negative
    /// and sum to 1 within 1e-9; the vector is then renormalised exactly.
    /// Trailing zeros are dropped.
    pub fn new(mut pmf: Vec<f64>) -> Result<Self> {
        while pmf.len() > 1 && pmf.last() == Some(&0.0) {
            pmf.pop();
        }
        if pmf.is_empty() {
            return Err(Error::InvalidDistribution("empty probability vector".into()));
        }
        if pmf.len() > MAX_OFFSPRING + 1 {
            return Err(Error::InvalidDistribution(format!("support exceeds {MAX_OFFSPRING}")));
        }
        if let Some(bad) = pmf.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("entry {bad} is not a probability")));
        }
        let total = compensated_sum(pmf.iter().copied());
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
        }
        for p in pmf.iter_mut() {
            *p /= total;
        }
        let mean = compensated_sum(pmf.iter().enumerate().map(|(k, p)| k as f64 * p));
        let sampler = WeightedIndex::new(&pmf).map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(Self { pmf, mean, sampler })
    }

    /// Point mass at `k`.
    pub fn delta(k: usize) -> Result<Self> {
        let mut pmf = vec![0.0; k + 1];
        pmf[k] = 1.0;
        Self::new(pmf)
    }

    /// `(1 − m/2, 0, m/2)`: zero or two children with mean `m ∈ [0, 2]`.
    pub fn binary(mean: f64) -> Result<Self> {
        if !(0.0..=2.0).contains(&mean) {
            return Err(Error::InvalidDistribution(format!("binary law needs mean in [0,2], got {mean}")));
        }
        Self::new(vec![1.0 - mean / 2.0, 0.0, mean / 2.0])
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn max_offspring(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `μ(1) < 1`.
    pub fn is_nontrivial(&self) -> bool {
        self.prob(1) < 1.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.sampler.sample(rng)
    }

    /// Probability generating function `Σ μ(k) s^k`.
    pub fn pgf(&self, s: f64) -> f64 {
        self.pmf.iter().rev().fold(0.0, |acc, p| acc * s + p)
    }

    /// Binomial p-thinning: `μ^p(k) = Σ_{n≥k} C(n,k) p^k (1−p)^{n−k} μ(n)`.
    pub fn thin(&self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("thinning probability {p} outside [0,1]")));
        }
        let k_max = self.max_offspring();
        let mut out = vec![0.0; k_max + 1];
        for (n, &mu_n) in self.pmf.iter().enumerate() {
            if mu_n == 0.0 {
                continue;
            }
            let mut binom = 1.0f64;
            for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
                if k > 0 {
                    binom = binom * (n + 1 - k) as f64 / k as f64;
                }
                *slot += binom * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32) * mu_n;
            }
        }
        Self::new(out)
    }

    /// Smallest fixed point of the generating function in `[0, 1]`.
    ///
    /// Returns 1 directly when `μ̄ ≤ 1` and μ is non-trivial, and 0 for
    /// `δ₁`. Otherwise iterates `q ← f(q)` from 0 until successive values
    /// differ by less than 1e-12.
    pub fn extinction_probability(&self) -> f64 {
        if !self.is_nontrivial() {
            return 0.0;
        }
        if self.mean <= 1.0 {
            return 1.0;
        }
        let mut q = 0.0;
        for _ in 0..100_000_000 {
            let next = self.pgf(q);
            if (next - q).abs() < 1e-12 {
                return next;
            }
            q = next;
        }
        q
    }
}

/// Free-standing form of [`OffspringDistribution::thin`].
pub fn thin(mu: &OffspringDistribution, p: f64) -> Result<OffspringDistribution> {
    mu.thin(p)
}

/// Free-standing form of [`OffspringDistribution::extinction_probability`].
pub fn extinction_probability(mu: &OffspringDistribution) -> f64 {
    mu.extinction_probability()
}

/// A finite rooted tree with an optional set of marked vertices and optional
/// edge labels.
///
/// The label of the edge `v — σ(v)` is stored at `v`. Vertices whose
/// offspring were not generated (because a budget or depth limit was hit) are
/// recorded as not `expanded`; `truncated` is set when the vertex budget cut
/// the tree short.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkedTree {
    root: usize,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    expanded: Vec<bool>,
    marks: Vec<bool>,
    labels: Option<Vec<f64>>,
    truncated: bool,
}

impl MarkedTree {
    /// Single vertex tree.
    pub fn singleton() -> Self {
        Self::from_parents(&[None]).expect("valid")
    }

    /// Builds a tree from a parent array (exactly one `None`, the root).
    pub fn from_parents(parents: &[Option<usize>]) -> Result<Self> {
        let n = parents.len();
        if n == 0 {
            return Err(Error::InvalidTree("no vertices".into()));
        }
        let roots: Vec<usize> = (0..n).filter(|&v| parents[v].is_none()).collect();
        if roots.len() != 1 {
            return Err(Error::InvalidTree(format!("expected one root, found {}", roots.len())));
        }
        let mut children = vec![Vec::new(); n];
        for (v, p) in parents.iter().enumerate() {
            if let Some(p) = *p {
                if p >= n {
                    return Err(Error::InvalidTree(format!("parent {p} of {v} out of range")));
                }
                children[p].push(v);
            }
        }
        let root = roots[0];
        let mut depth = vec![usize::MAX; n];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        let mut seen = 1;
        while let Some(u) = queue.pop_front() {
            for &c in &children[u] {
                depth[c] = depth[u] + 1;
                seen += 1;
                queue.push_back(c);
            }
        }
        if seen != n {
            return Err(Error::InvalidTree("parent map has a cycle".into()));
        }
        Ok(Self {
            root,
            parent: parents.to_vec(),
            children,
            depth,
            expanded: vec![true; n],
            marks: vec![false; n],
            labels: None,
            truncated: false,
        })
    }

    /// Path `0 — 1 — … — (n−1)` rooted at 0.
    pub fn path(n: usize) -> Self {
        let parents: Vec<Option<usize>> = (0..n).map(|v| v.checked_sub(1)).collect();
        Self::from_parents(&parents).expect("valid path")
    }

    /// Star: root 0 with `leaves` children.
    pub fn star(leaves: usize) -> Self {
        let parents: Vec<Option<usize>> = (0..=leaves).map(|v| if v == 0 { None } else { Some(0) }).collect();
        Self::from_parents(&parents).expect("valid star")
    }

    /// Complete binary tree of the given height (`2^{h+1} − 1` vertices),
    /// vertices in breadth-first order.
    pub fn complete_binary(height: usize) -> Self {
        let n = (1usize << (height + 1)) - 1;
        let parents: Vec<Option<usize>> = (0..n).map(|v| if v == 0 { None } else { Some((v - 1) / 2) }).collect();
        Self::from_parents(&parents).expect("valid binary tree")
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parent
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.children[v]
    }

    pub fn depth(&self, v: usize) -> usize {
        self.depth[v]
    }

    pub fn height(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    /// Number of tree neighbours (children plus parent).
    pub fn degree(&self, v: usize) -> usize {
        self.children[v].len() + usize::from(self.parent[v].is_some())
    }

    pub fn is_expanded(&self, v: usize) -> bool {
        self.expanded[v]
    }

    pub fn is_truncated(&self) -> bool {
        self.truncated
    }

    /// Vertices in breadth-first order from the root.
    pub fn bfs_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        order.push(self.root);
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            order.extend_from_slice(&self.children[u]);
            i += 1;
        }
        order
    }

    /// Children before parents.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = self.bfs_order();
        order.reverse();
        order
    }

    /// Number of vertices at each depth.
    pub fn generation_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.height() + 1];
        for &d in &self.depth {
            sizes[d] += 1;
        }
        sizes
    }

    pub fn is_marked(&self, v: usize) -> bool {
        self.marks[v]
    }

    pub fn marks(&self) -> &[bool] {
        &self.marks
    }

    pub fn marked_vertices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&v| self.marks[v]).collect()
    }

    pub fn mark_count(&self) -> usize {
        self.marks.iter().filter(|&&m| m).count()
    }

    pub fn set_marks(&mut self, marks: Vec<bool>) -> Result<()> {
        if marks.len() != self.len() {
            return Err(Error::InvalidTree(format!("{} marks for {} vertices", marks.len(), self.len())));
        }
        self.marks = marks;
        Ok(())
    }

    pub fn mark_set(&mut self, vertices: &[usize]) -> Result<()> {
        let mut marks = vec![false; self.len()];
        for &v in vertices {
            if v >= self.len() {
                return Err(Error::InvalidTree(format!("marked vertex {v} out of range")));
            }
            marks[v] = true;
        }
        self.marks = marks;
        Ok(())
    }

    pub fn labels(&self) -> Option<&[f64]> {
        self.labels.as_deref()
    }

    /// Label of the edge between `v` and its parent.
    pub fn label(&self, v: usize) -> Option<f64> {
        self.labels.as_ref().and_then(|l| self.parent[v].map(|_| l[v]))
    }

    pub fn set_labels(&mut self, labels: Vec<f64>) -> Result<()> {
        if labels.len() != self.len() {
            return Err(Error::InvalidTree(format!("{} labels for {} vertices", labels.len(), self.len())));
        }
        if labels.iter().enumerate().any(|(v, l)| self.parent[v].is_some() && !(0.0..=1.0).contains(l)) {
            return Err(Error::InvalidTree("edge labels must lie in [0,1]".into()));
        }
        self.labels = Some(labels);
        Ok(())
    }

    /// Draws i.i.d. uniform edge labels if none are present.
    pub fn ensure_labels<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        if self.labels.is_none() {
            let labels = (0..self.len())
                .map(|v| if self.parent[v].is_some() { rng.gen::<f64>() } else { f64::NAN })
                .collect();
            self.labels = Some(labels);
        }
    }

    /// Root component of the edges with label `≤ p`, together with the map
    /// from new vertex ids to the ids in `self`. Requires labels.
    pub fn root_component(&self, p: f64) -> Result<(MarkedTree, Vec<usize>)> {
        let labels = self
            .labels
            .as_ref()
            .ok_or_else(|| Error::InvalidTree("root_component needs edge labels".into()))?;
        let mut keep = vec![self.root];
        let mut new_id = vec![usize::MAX; self.len()];
        new_id[self.root] = 0;
        let mut parents = vec![None];
        let mut i = 0;
        while i < keep.len() {
            let u = keep[i];
            for &c in &self.children[u] {
                if labels[c] <= p {
                    new_id[c] = keep.len();
                    keep.push(c);
                    parents.push(Some(new_id[u]));
                }
            }
            i += 1;
        }
        let mut sub = MarkedTree::from_parents(&parents)?;
        sub.expanded = keep.iter().map(|&v| self.expanded[v]).collect();
        sub.marks = keep.iter().map(|&v| self.marks[v]).collect();
        sub.labels = Some(keep.iter().map(|&v| labels[v]).collect());
        sub.truncated = self.truncated && keep.iter().any(|&v| !self.expanded[v]);
        Ok((sub, keep))
    }

    /// Tree as an undirected graph on the same vertex ids.
    pub fn to_graph(&self) -> SimpleGraph {
        let mut g = SimpleGraph::new(self.len());
        for (v, p) in self.parent.iter().enumerate() {
            if let Some(p) = *p {
                g.add_edge(v, p);
            }
        }
        g
    }

    /// Line-based parent-array text: a header `# vertices=N root=R truncated=0|1`
    /// followed by one line `id parent depth mark label` per vertex, with `-`
    /// for the root's parent and for absent labels.
    pub fn write_parent_array<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# vertices={} root={} truncated={}", self.len(), self.root, u8::from(self.truncated))?;
        let mut line = String::new();
        for v in 0..self.len() {
            line.clear();
            write!(line, "{v} ").unwrap();
            match self.parent[v] {
                Some(p) => write!(line, "{p} ").unwrap(),
                None => line.push_str("- "),
            }
            write!(line, "{} {} ", self.depth[v], u8::from(self.marks[v])).unwrap();
            match self.label(v) {
                Some(l) => write!(line, "{l:?}").unwrap(),
                None => line.push('-'),
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    /// Inverse of [`write_parent_array`](Self::write_parent_array). When the
    /// header says the tree was truncated, its leaves are treated as
    /// unexpanded.
    pub fn read_parent_array<R: BufRead>(input: R) -> Result<Self> {
        let mut truncated = false;
        let mut rows: Vec<(usize, Option<usize>, usize, bool, Option<f64>)> = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = i + 1;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(header) = line.strip_prefix('#') {
                truncated |= header.split_whitespace().any(|kv| kv == "truncated=1");
                continue;
            }
            let err = |message: String| Error::Parse { line: lineno, message };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 5 {
                return Err(err(format!("expected 5 fields, found {}", f.len())));
            }
            let num = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
            let id = num(f[0])?;
            let parent = if f[1] == "-" { None } else { Some(num(f[1])?) };
            let depth = num(f[2])?;
            let mark = match f[3] {
                "0" => false,
                "1" => true,
                other => return Err(err(format!("mark must be 0 or 1, got {other:?}"))),
            };
            let label = if f[4] == "-" { None } else { Some(f[4].parse::<f64>().map_err(|e| err(format!("{e}")))?) };
            rows.push((id, parent, depth, mark, label));
        }
        rows.sort_by_key(|r| r.0);
        if rows.iter().enumerate().any(|(i, r)| r.0 != i) {
            return Err(Error::InvalidTree("vertex ids must be 0..N without gaps".into()));
        }
        let parents: Vec<Option<usize>> = rows.iter().map(|r| r.1).collect();
        let mut tree = MarkedTree::from_parents(&parents)?;
        if rows.iter().any(|r| tree.depth[r.0] != r.2) {
            return Err(Error::InvalidTree("depth column inconsistent with parents".into()));
        }
        tree.marks = rows.iter().map(|r| r.3).collect();
        let with_label = rows.iter().filter(|r| r.1.is_some() && r.4.is_some()).count();
        if with_label == tree.len() - 1 && with_label > 0 {
            tree.set_labels(rows.iter().map(|r| r.4.unwrap_or(f64::NAN)).collect())?;
        } else if with_label != 0 {
            return Err(Error::InvalidTree("labels must be present on all edges or none".into()));
        }
        tree.truncated = truncated;
        if truncated {
            for v in 0..tree.len() {
                tree.expanded[v] = !tree.children[v].is_empty();
            }
        }
        Ok(tree)
    }
}

/// Size limits for tree sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeLimits {
    /// Maximum number of vertices.
    pub budget: usize,
    /// Vertices at this depth are not expanded.
    pub max_depth: Option<usize>,
}

impl TreeLimits {
    pub fn budget(budget: usize) -> Self {
        Self { budget, max_depth: None }
    }

    pub fn depth(max_depth: usize, budget: usize) -> Self {
        Self { budget, max_depth: Some(max_depth) }
    }
}

/// Breadth-first growth. The root gets `root_children` children; all other
/// vertices draw from μ. A vertex whose offspring would exceed the budget is
/// left unexpanded and the tree is flagged truncated; generation stops there.
fn grow<R: Rng + ?Sized>(mu: &OffspringDistribution, root_children: usize, limits: TreeLimits, rng: &mut R) -> MarkedTree {
    let mut parent = vec![None];
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut depth = vec![0usize];
    let mut expanded = vec![false];
    let mut truncated = false;
    let mut head = 0;
    while head < parent.len() {
        let u = head;
        head += 1;
        if limits.max_depth.is_some_and(|m| depth[u] >= m) {
            continue;
        }
        let k = if u == 0 { root_children } else { mu.sample(rng) };
        if parent.len() + k > limits.budget {
            truncated = true;
            break;
        }
        for _ in 0..k {
            let c = parent.len();
            parent.push(Some(u));
            children.push(Vec::new());
            depth.push(depth[u] + 1);
            expanded.push(false);
            children[u].push(c);
        }
        expanded[u] = true;
    }
    let n = parent.len();
    MarkedTree { root: 0, parent, children, depth, expanded, marks: vec![false; n], labels: None, truncated }
}

/// Galton-Watson tree with offspring law μ, cut at `budget` vertices.
pub fn sample_gw<R: Rng + ?Sized>(mu: &OffspringDistribution, budget: usize, rng: &mut R) -> MarkedTree {
    sample_gw_with(mu, TreeLimits::budget(budget), rng)
}

pub fn sample_gw_with<R: Rng + ?Sized>(mu: &OffspringDistribution, limits: TreeLimits, rng: &mut R) -> MarkedTree {
    let k = if limits.max_depth == Some(0) { 0 } else { mu.sample(rng) };
    grow(mu, k, TreeLimits { budget: limits.budget.max(1), ..limits }, rng)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GwVariant {
    /// Two independent GW(μ) trees with their roots joined by an edge.
    Augmented,
    /// The augmented tree biased by `deg(o)⁻¹`.
    Unimodular,
}

/// Augmented or unimodular Galton-Watson tree.
///
/// The augmented tree is generated as a root with `k + 1` children, `k ~ μ`,
/// since the extra neighbour `o'` is itself the root of an independent
/// GW(μ) tree. The unimodular variant accepts the root offspring count `k`
/// with probability `1/(k+1)` before anything else is sampled.
pub fn sample_unimodular_gw<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    budget: usize,
    rng: &mut R,
    variant: GwVariant,
) -> Result<MarkedTree> {
    sample_unimodular_gw_with(mu, TreeLimits::budget(budget), variant, DEFAULT_RETRY_LIMIT, rng)
}

pub fn sample_unimodular_gw_with<R: Rng + ?Sized>(
    mu: &OffspringDistribution,
    limits: TreeLimits,
    variant: GwVariant,
    retry_limit: usize,
    rng: &mut R,
) -> Result<MarkedTree> {
    if limits.budget < 2 {
        return Err(Error::Domain("augmented trees need a budget of at least 2".into()));
    }
    let k = match variant {
        GwVariant::Augmented => mu.sample(rng),
        GwVariant::Unimodular => {
            let mut attempts = 0;
            loop {
                if attempts == retry_limit {
                    return Err(Error::SamplingFailure { attempts });
                }
                attempts += 1;
                let k = mu.sample(rng);
                if rng.gen::<f64>() * ((k + 1) as f64) < 1.0 {
                    break k;
                }
            }
        }
    };
    let root_children = if limits.max_depth == Some(0) { 0 } else { k + 1 };
    Ok(grow(mu, root_children, limits, rng))
}

/// Root component `T^p` of the edges with label `≤ p`. Labels are drawn
/// first if `tree` has none, and kept, so repeated calls with different `p`
/// are monotonically coupled.
pub fn percolate_root_component<R: Rng + ?Sized>(tree: &mut MarkedTree, p: f64, rng: &mut R) -> Result<MarkedTree> {
    tree.ensure_labels(rng);
    Ok(tree.root_component(p)?.0)
}
