//! Branching and supported vertices of marked trees.
//!
//! Trees are oriented toward an end by attaching a virtual infinite ray at an
//! anchor vertex. `σ(v)` is the neighbour of `v` toward the anchor (for the
//! anchor itself, the first ray vertex), layers are distances from the anchor,
//! and the descendants of `v` are the vertices whose path to the anchor passes
//! through `v`.
//!
//! For distinct vertices `u, v` we write `A_{u,v}` for the marks `a` whose
//! path from `u` passes through `v` (so `v` itself counts if marked, `u`
//! never does). A vertex `u` is **(k,r)-branching** if
//! `|A| − |A_{u,v} ∪ A_{u,w}| ≥ k` for every pair `v, w` (equal or not) at
//! distance exactly `r` from `u`, the ray included. Distinct vertices at the
//! same distance from `u` have disjoint sets, so the worst pair is made of the
//! two largest branches, and `u` is branching iff its *branching slack*
//! `|A| − top₁ − top₂` is at least `k`. Ray vertices carry no marks, so the
//! orientation never changes which vertices are branching.
//!
//! `A_v` is the set of marked descendants of `v` other than `v` itself. A
//! vertex `v` is **(k,r)-supported** if it has at least one descendant `w` with
//! `σ^r(w) = v` and `|A_v| − |A_w| ≥ k` for every such `w`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::gw_trees::MarkedTree;

/// A tree oriented toward a virtual ray attached at `anchor`.
///
/// Vertex ids `0..real_len()` are the real vertices; ids beyond that (only
/// produced by [`auxiliary_tree`]) are virtual and never marked or reported.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrientedTree {
    up: Vec<Option<usize>>,
    down: Vec<Vec<usize>>,
    layer: Vec<i64>,
    anchor: usize,
    real: usize,
}

impl OrientedTree {
    /// Orientation toward a ray attached at the tree's root.
    pub fn new(tree: &MarkedTree) -> Self {
        Self::with_anchor(tree, tree.root()).expect("root is a vertex")
    }

    /// Orientation toward a ray attached at `anchor`.
    pub fn with_anchor(tree: &MarkedTree, anchor: usize) -> Result<Self> {
        if anchor >= tree.len() {
            return Err(Error::Domain(format!("anchor {anchor} not in tree")));
        }
        let g = tree.to_graph();
        let n = tree.len();
        let mut up = vec![None; n];
        let mut layer = vec![-1i64; n];
        let mut down = vec![Vec::new(); n];
        layer[anchor] = 0;
        let mut order = vec![anchor];
        let mut i = 0;
        while i < order.len() {
            let u = order[i];
            for &v in g.neighbors(u) {
                if layer[v] < 0 && v != anchor {
                    layer[v] = layer[u] + 1;
                    up[v] = Some(u);
                    down[u].push(v);
                    order.push(v);
                }
            }
            i += 1;
        }
        Ok(Self { up, down, layer, anchor, real: n })
    }

    fn from_parts(up: Vec<Option<usize>>, anchor: usize, real: usize) -> Self {
        let n = up.len();
        let mut down = vec![Vec::new(); n];
        for (v, p) in up.iter().enumerate() {
            if let Some(p) = *p {
                down[p].push(v);
            }
        }
        let mut layer = vec![0i64; n];
        let mut stack = vec![anchor];
        while let Some(u) = stack.pop() {
            for &c in &down[u] {
                layer[c] = layer[u] + 1;
                stack.push(c);
            }
        }
        Self { up, down, layer, anchor, real }
    }

    /// Number of vertices including virtual ones.
    pub fn len(&self) -> usize {
        self.up.len()
    }

    pub fn is_empty(&self) -> bool {
        self.up.is_empty()
    }

    pub fn real_len(&self) -> usize {
        self.real
    }

    pub fn anchor(&self) -> usize {
        self.anchor
    }

    /// `σ(v)`, or `None` when the next vertex is on the virtual ray.
    pub fn sigma(&self, v: usize) -> Option<usize> {
        self.up[v]
    }

    pub fn children(&self, v: usize) -> &[usize] {
        &self.down[v]
    }

    pub fn layer(&self, v: usize) -> i64 {
        self.layer[v]
    }

    /// Descendants `w` with `σ^r(w) = v`.
    pub fn descendants_at(&self, v: usize, r: usize) -> Vec<usize> {
        let mut level = vec![v];
        for _ in 0..r {
            level = level.iter().flat_map(|&x| self.down[x].iter().copied()).collect();
        }
        level
    }

    /// Vertices in an order where children come before parents.
    fn post_order(&self) -> Vec<usize> {
        let mut order = vec![self.anchor];
        let mut i = 0;
        while i < order.len() {
            order.extend_from_slice(&self.down[order[i]]);
            i += 1;
        }
        order.reverse();
        order
    }

    /// Marked descendants of each vertex, the vertex itself included.
    fn subtree_marks(&self, marks: &[bool]) -> Vec<usize> {
        let mut s = vec![0usize; self.len()];
        for v in self.post_order() {
            s[v] += usize::from(self.is_marked(marks, v));
            if let Some(p) = self.up[v] {
                s[p] += s[v];
            }
        }
        s
    }

    fn is_marked(&self, marks: &[bool], v: usize) -> bool {
        v < self.real && marks[v]
    }

    fn check_marks(&self, marks: &[bool]) -> Result<usize> {
        if marks.len() != self.real {
            return Err(Error::Domain(format!("{} marks for {} vertices", marks.len(), self.real)));
        }
        Ok(marks.iter().filter(|&&m| m).count())
    }
}

/// `|A| − top₁ − top₂` for every real vertex, where the tops are the two
/// largest branch counts `|A_{u,v}|` over vertices `v` at distance exactly
/// `r` from `u` (missing entries count as 0, which is what the ray supplies).
pub fn branching_slack(tree: &OrientedTree, marks: &[bool], r: usize) -> Result<Vec<i64>> {
    let total = tree.check_marks(marks)?;
    if r == 0 {
        return Err(Error::Domain("r must be at least 1".into()));
    }
    let sub = tree.subtree_marks(marks);
    let mut out = Vec::with_capacity(tree.real);
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for u in 0..tree.real {
        let (mut top1, mut top2) = (0usize, 0usize);
        stack.clear();
        stack.push((u, usize::MAX, 0));
        while let Some((x, from, dist)) = stack.pop() {
            let mut visit = |y: usize, count: usize, stack: &mut Vec<(usize, usize, usize)>| {
                if y == from {
                    return;
                }
                if dist + 1 == r {
                    if count > top1 {
                        top2 = top1;
                        top1 = count;
                    } else if count > top2 {
                        top2 = count;
                    }
                } else {
                    stack.push((y, x, dist + 1));
                }
            };
            if let Some(p) = tree.up[x] {
                visit(p, total - sub[x], &mut stack);
            }
            for &c in &tree.down[x] {
                visit(c, sub[c], &mut stack);
            }
        }
        out.push(total as i64 - top1 as i64 - top2 as i64);
    }
    Ok(out)
}

/// Real vertices that are (k,r)-branching for the marked set.
pub fn branching_vertices(tree: &OrientedTree, marks: &[bool], k: usize, r: usize) -> Result<Vec<usize>> {
    if tree.check_marks(marks)? == 0 {
        return Err(Error::Domain("the marked set is empty".into()));
    }
    if k == 0 {
        return Err(Error::Domain("k must be at least 1".into()));
    }
    let slack = branching_slack(tree, marks, r)?;
    Ok((0..tree.real).filter(|&u| slack[u] >= k as i64).collect())
}

/// For r = 1: `min_c (|A_v| − |A_c|)` over the children `c`, `None` for
/// leaves. Indexed over all vertices, virtual ones included.
fn supported_slack_r1(tree: &OrientedTree, marks: &[bool]) -> Vec<Option<i64>> {
    let sub = tree.subtree_marks(marks);
    let a = |v: usize| sub[v] as i64 - i64::from(tree.is_marked(marks, v));
    (0..tree.len())
        .map(|v| tree.down[v].iter().map(|&c| a(v) - a(c)).min())
        .collect()
}

/// `min_w (|A_v| − |A_w|)` over the depth-r descendants `w` of each real
/// vertex, `None` when there are none. Computed by one pass over each
/// auxiliary tree `T_m`.
pub fn supported_slack(tree: &OrientedTree, marks: &[bool], r: usize) -> Result<Vec<Option<i64>>> {
    tree.check_marks(marks)?;
    if r == 0 {
        return Err(Error::Domain("r must be at least 1".into()));
    }
    if r == 1 {
        let mut s = supported_slack_r1(tree, marks);
        s.truncate(tree.real);
        return Ok(s);
    }
    let mut out = vec![None; tree.real];
    for m in 1..=r {
        let aux = auxiliary_tree(tree, m, r)?;
        let slack = supported_slack_r1(&aux, marks);
        for v in 0..tree.real {
            if in_residue_class(tree.layer[v], m, r) && aux.down[v].iter().any(|&c| c < tree.real && in_residue_class(tree.layer[c], m, r)) {
                out[v] = slack[v];
            }
        }
    }
    Ok(out)
}

/// Real vertices that are (k,r)-supported.
pub fn supported_vertices(tree: &OrientedTree, marks: &[bool], k: usize, r: usize) -> Result<Vec<usize>> {
    let slack = supported_slack(tree, marks, r)?;
    Ok((0..tree.real).filter(|&v| slack[v].is_some_and(|s| s >= k as i64)).collect())
}

fn in_residue_class(layer: i64, m: usize, r: usize) -> bool {
    (layer - m as i64).rem_euclid(r as i64) == 0
}

/// The auxiliary tree `T_m` (`1 ≤ m ≤ r`): every vertex of a layer
/// `nr + m` becomes the parent of all its descendants in the next `r`
/// layers, so vertices outside that residue class are leaves.
///
/// Real vertex ids are preserved. For `m < r` the vertices above the first
/// real layer of the class hang from one virtual vertex (id `real_len()`),
/// standing for the ray vertex in layer `m − r`.
pub fn auxiliary_tree(tree: &OrientedTree, m: usize, r: usize) -> Result<OrientedTree> {
    if r == 0 || m == 0 || m > r {
        return Err(Error::Domain(format!("residue {m} must lie in 1..={r}")));
    }
    if tree.real != tree.len() {
        return Err(Error::Domain("auxiliary trees are built from trees without virtual vertices".into()));
    }
    let n = tree.real;
    let needs_virtual = m < r;
    let virtual_id = n;
    let mut up = vec![None; n + usize::from(needs_virtual)];
    for v in 0..n {
        let layer = tree.layer[v];
        let steps = ((layer - m as i64 - 1).rem_euclid(r as i64) + 1) as usize;
        let mut x = Some(v);
        for _ in 0..steps {
            x = x.and_then(|y| tree.up[y]);
        }
        up[v] = match x {
            Some(p) => Some(p),
            None if layer - (steps as i64) < 0 && needs_virtual => Some(virtual_id),
            None => None,
        };
    }
    let anchor = if needs_virtual { virtual_id } else { tree.anchor };
    Ok(OrientedTree::from_parts(up, anchor, n))
}

/// Outcome of checking the branching bound on one marked tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchingReport {
    pub k: usize,
    pub r: usize,
    pub vertices: usize,
    pub marked: usize,
    pub branching: Vec<usize>,
    pub supported: Vec<usize>,
    /// `⌊r(2|A| − k)/k⌋`, possibly negative.
    pub bound: i64,
    /// `|branching| ≤ max(bound, 0)`.
    pub pass: bool,
}

/// `⌊r(2|A| − k)/k⌋`.
pub fn branching_bound(marked: usize, k: usize, r: usize) -> i64 {
    (r as i64 * (2 * marked as i64 - k as i64)).div_euclid(k as i64)
}

pub fn magic_bound_check(tree: &OrientedTree, marks: &[bool], k: usize, r: usize) -> Result<BranchingReport> {
    let branching = branching_vertices(tree, marks, k, r)?;
    let supported = supported_vertices(tree, marks, k, r)?;
    Ok(report_from(tree.real, marks, k, r, branching, supported))
}

fn report_from(
    vertices: usize,
    marks: &[bool],
    k: usize,
    r: usize,
    branching: Vec<usize>,
    supported: Vec<usize>,
) -> BranchingReport {
    let marked = marks.iter().filter(|&&m| m).count();
    let bound = branching_bound(marked, k, r);
    let pass = branching.len() as i64 <= bound.max(0);
    BranchingReport { k, r, vertices, marked, branching, supported, bound, pass }
}

/// Reports for every `k ∈ ks`, sharing one slack computation per `r`.
pub fn magic_bound_sweep(tree: &OrientedTree, marks: &[bool], ks: &[usize], rs: &[usize]) -> Result<Vec<BranchingReport>> {
    if tree.check_marks(marks)? == 0 {
        return Err(Error::Domain("the marked set is empty".into()));
    }
    let mut out = Vec::with_capacity(ks.len() * rs.len());
    for &r in rs {
        let b = branching_slack(tree, marks, r)?;
        let s = supported_slack(tree, marks, r)?;
        for &k in ks {
            if k == 0 {
                return Err(Error::Domain("k must be at least 1".into()));
            }
            let branching = (0..tree.real).filter(|&u| b[u] >= k as i64).collect();
            let supported = (0..tree.real).filter(|&u| s[u].is_some_and(|x| x >= k as i64)).collect();
            out.push(report_from(tree.real, marks, k, r, branching, supported));
        }
    }
    Ok(out)
}

/// One CSV row per report:
/// `tree_id,vertices,marked,k,r,branching_count,supported_count,bound,pass`.
pub fn write_reports_csv<W: Write>(out: W, rows: &[(u64, BranchingReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tree_id", "vertices", "marked", "k", "r", "branching_count", "supported_count", "bound", "pass"])?;
    for (id, rep) in rows {
        w.write_record([
            id.to_string(),
            rep.vertices.to_string(),
            rep.marked.to_string(),
            rep.k.to_string(),
            rep.r.to_string(),
            rep.branching.len().to_string(),
            rep.supported.len().to_string(),
            rep.bound.to_string(),
            rep.pass.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One component left after removing the ball.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ComponentInfo {
    pub size: usize,
    pub marked: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EndsCensus {
    /// Components sorted by decreasing `(size, marked)`.
    pub components: Vec<ComponentInfo>,
    /// Components holding at least `m_threshold` marked vertices.
    pub qualifying: usize,
}

/// Removes the closed ball of `radius` around `center` and lists the
/// remaining components with their marked counts.
pub fn ends_profile(
    graph: &SimpleGraph,
    marks: &[bool],
    center: usize,
    radius: usize,
    m_threshold: usize,
) -> Result<EndsCensus> {
    if center >= graph.len() {
        return Err(Error::Domain(format!("center {center} not in graph")));
    }
    if marks.len() != graph.len() {
        return Err(Error::Domain(format!("{} marks for {} vertices", marks.len(), graph.len())));
    }
    if m_threshold == 0 {
        return Err(Error::Domain("m_threshold must be at least 1".into()));
    }
    let removed: Vec<bool> = graph.distances_within(center, radius).iter().map(Option::is_some).collect();
    let (comp, count) = graph.components_without(&removed);
    let mut components = vec![ComponentInfo { size: 0, marked: 0 }; count];
    for v in 0..graph.len() {
        if let Some(c) = comp[v] {
            components[c].size += 1;
            components[c].marked += usize::from(marks[v]);
        }
    }
    components.sort_unstable_by(|a, b| b.cmp(a));
    let qualifying = components.iter().filter(|c| c.marked >= m_threshold).count();
    Ok(EndsCensus { components, qualifying })
}
