//! Tree-indexed random walks and their traces.

use std::collections::{HashMap, VecDeque};
use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SimpleGraph;
use crate::group_graph::{Elem, GroupSpec};
use crate::gw_trees::{sample_gw_with, MarkedTree, OffspringDistribution, TreeLimits};
use crate::rng::substream;
use crate::stats::Moments;

/// A map `X` from the vertices of a tree to group elements such that
/// adjacent tree vertices go to adjacent group elements.
#[derive(Debug, Clone)]
pub struct TreeWalk<'t> {
    tree: &'t MarkedTree,
    group: GroupSpec,
    values: Vec<Elem>,
}

impl<'t> TreeWalk<'t> {
    pub fn tree(&self) -> &'t MarkedTree {
        self.tree
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn value(&self, v: usize) -> &Elem {
        &self.values[v]
    }

    pub fn values(&self) -> &[Elem] {
        &self.values
    }

    pub fn start(&self) -> &Elem {
        &self.values[self.tree.root()]
    }

    /// `#X⁻¹(x)`.
    pub fn preimage_count(&self, x: &Elem) -> usize {
        self.values.iter().filter(|y| *y == x).count()
    }

    /// Tree vertices mapped to `x`.
    pub fn preimage(&self, x: &Elem) -> Vec<usize> {
        (0..self.values.len()).filter(|&v| &self.values[v] == x).collect()
    }
}

/// Walk started with `X(o) = start` at the root, children assigned in
/// breadth-first order, each an independent uniform neighbour of its parent.
pub fn run_walk<'t, R: Rng + ?Sized>(
    tree: &'t MarkedTree,
    group: GroupSpec,
    start: &Elem,
    rng: &mut R,
) -> Result<TreeWalk<'t>> {
    run_walk_from(tree, group, tree.root(), start, rng)
}

/// Walk with `X(u) = x`, spreading outward from `u` along tree edges.
pub fn run_walk_from<'t, R: Rng + ?Sized>(
    tree: &'t MarkedTree,
    group: GroupSpec,
    u: usize,
    x: &Elem,
    rng: &mut R,
) -> Result<TreeWalk<'t>> {
    group.validate(x)?;
    if u >= tree.len() {
        return Err(Error::Domain(format!("vertex {u} not in tree")));
    }
    let deg = group.degree();
    let mut values: Vec<Option<Elem>> = vec![None; tree.len()];
    values[u] = Some(x.clone());
    let mut queue = VecDeque::from([u]);
    while let Some(a) = queue.pop_front() {
        let here = values[a].clone().expect("assigned before enqueued");
        let nbrs = tree.parent(a).into_iter().chain(tree.children(a).iter().copied());
        for b in nbrs {
            if values[b].is_none() {
                values[b] = Some(group.step(&here, rng.gen_range(0..deg)));
                queue.push_back(b);
            }
        }
    }
    Ok(TreeWalk { tree, group, values: values.into_iter().map(|v| v.expect("tree is connected")).collect() })
}

/// The subgraph of the Cayley graph spanned by the edges a walk crosses.
///
/// Vertices are numbered in order of first visit along a breadth-first scan
/// of the tree, so the start is vertex 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceGraph {
    group: GroupSpec,
    elems: Vec<Elem>,
    index: HashMap<Elem, usize>,
    visits: Vec<usize>,
    /// `(a, b, multiplicity)` with `a < b`, sorted.
    edges: Vec<(usize, usize, usize)>,
    /// Trace vertex of each tree vertex.
    tree_to_trace: Vec<usize>,
}

impl TraceGraph {
    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn elem(&self, i: usize) -> &Elem {
        &self.elems[i]
    }

    pub fn elems(&self) -> &[Elem] {
        &self.elems
    }

    pub fn index_of(&self, x: &Elem) -> Option<usize> {
        self.index.get(x).copied()
    }

    pub fn contains(&self, x: &Elem) -> bool {
        self.index.contains_key(x)
    }

    /// `#X⁻¹(x)`, zero for unvisited elements.
    pub fn visit_count(&self, x: &Elem) -> usize {
        self.index_of(x).map_or(0, |i| self.visits[i])
    }

    pub fn visits(&self) -> &[usize] {
        &self.visits
    }

    pub fn edges(&self) -> &[(usize, usize, usize)] {
        &self.edges
    }

    /// Trace vertex that tree vertex `v` is mapped to.
    pub fn trace_vertex(&self, v: usize) -> usize {
        self.tree_to_trace[v]
    }

    pub fn to_graph(&self) -> SimpleGraph {
        let mut g = SimpleGraph::new(self.len());
        for &(a, b, _) in &self.edges {
            g.add_edge(a, b);
        }
        g
    }

    /// CSV edge list `u,v,multiplicity` with elements in text form.
    pub fn write_edge_list<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["u", "v", "multiplicity"])?;
        for &(a, b, m) in &self.edges {
            w.write_record([self.group.format(&self.elems[a]), self.group.format(&self.elems[b]), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Builds `Tr(X)` with visit counts and edge multiplicities.
pub fn trace(walk: &TreeWalk<'_>) -> TraceGraph {
    let tree = walk.tree;
    let mut elems = Vec::new();
    let mut index = HashMap::new();
    let mut visits = Vec::new();
    let mut tree_to_trace = vec![usize::MAX; tree.len()];
    for v in tree.bfs_order() {
        let x = &walk.values[v];
        let i = *index.entry(x.clone()).or_insert_with(|| {
            elems.push(x.clone());
            visits.push(0);
            elems.len() - 1
        });
        visits[i] += 1;
        tree_to_trace[v] = i;
    }
    let mut mult: HashMap<(usize, usize), usize> = HashMap::new();
    for v in 0..tree.len() {
        if let Some(p) = tree.parent(v) {
            let (a, b) = (tree_to_trace[v], tree_to_trace[p]);
            *mult.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut edges: Vec<(usize, usize, usize)> = mult.into_iter().map(|((a, b), m)| (a, b, m)).collect();
    edges.sort_unstable();
    TraceGraph { group: walk.group, elems, index, visits, edges, tree_to_trace }
}

/// One row of the origin-visit experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitRow {
    pub depth: usize,
    pub replicate: u64,
    /// `#X⁻¹(start)` among generations `≤ depth`.
    pub visit_count: usize,
    /// Whether generation `depth` is non-empty.
    pub survived: bool,
}

/// Settings for [`origin_visit_experiment`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct VisitExperiment {
    pub depth_budget: usize,
    pub replicates: u64,
    /// Vertex budget per tree.
    pub vertex_budget: usize,
}

/// For each replicate, grows a GW(μ) tree to `depth_budget` generations,
/// runs the walk from `start` and records `#X⁻¹(start)` restricted to
/// generations `≤ n` for every cutoff `n`. If a replicate's tree hits the
/// vertex budget, rows are only emitted for cutoffs whose generations are
/// complete. Replicate `i` uses `substream(seed, i)`.
pub fn origin_visit_experiment(
    mu: &OffspringDistribution,
    group: GroupSpec,
    start: &Elem,
    settings: VisitExperiment,
    seed: u64,
) -> Result<Vec<VisitRow>> {
    if settings.depth_budget < 1 {
        return Err(Error::Domain("depth budget must be at least 1".into()));
    }
    group.validate(start)?;
    let per_rep: Vec<Vec<VisitRow>> = (0..settings.replicates)
        .into_par_iter()
        .map(|rep| {
            let mut rng = substream(seed, rep);
            let limits = TreeLimits::depth(settings.depth_budget, settings.vertex_budget);
            let tree = sample_gw_with(mu, limits, &mut rng);
            let walk = run_walk(&tree, group, start, &mut rng).expect("start validated");
            let complete = complete_depth(&tree, settings.depth_budget);
            let mut hits = vec![0usize; settings.depth_budget + 1];
            let mut alive = vec![false; settings.depth_budget + 1];
            for v in 0..tree.len() {
                let d = tree.depth(v);
                alive[d] = true;
                if walk.value(v) == start {
                    hits[d] += 1;
                }
            }
            let mut rows = Vec::with_capacity(complete + 1);
            let mut acc = 0;
            for n in 0..=complete {
                acc += hits[n];
                rows.push(VisitRow { depth: n, replicate: rep, visit_count: acc, survived: alive[n] });
            }
            rows
        })
        .collect();
    Ok(per_rep.into_iter().flatten().collect())
}

/// Largest `n ≤ limit` such that generations `0..=n` are fully present.
fn complete_depth(tree: &MarkedTree, limit: usize) -> usize {
    (0..tree.len())
        .filter(|&v| !tree.is_expanded(v) && tree.depth(v) < limit)
        .map(|v| tree.depth(v))
        .min()
        .unwrap_or(limit)
}

/// Mean visit count per depth over surviving replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisitSummary {
    pub depth: usize,
    pub survivors: u64,
    pub mean_visits: f64,
    pub std_error: f64,
}

pub fn summarize_visits(rows: &[VisitRow], depth_budget: usize) -> Vec<VisitSummary> {
    let mut by_depth = vec![Moments::new(); depth_budget + 1];
    for r in rows.iter().filter(|r| r.survived && r.depth <= depth_budget) {
        by_depth[r.depth].push(r.visit_count as f64);
    }
    by_depth
        .iter()
        .enumerate()
        .map(|(depth, m)| VisitSummary { depth, survivors: m.n, mean_visits: m.mean, std_error: m.std_error() })
        .collect()
}

pub fn write_visit_rows<W: Write>(out: W, rows: &[VisitRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
