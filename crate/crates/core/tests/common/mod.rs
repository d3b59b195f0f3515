#![allow(dead_code)]
//! Brute-force oracles and random inputs shared by the integration tests.

use std::collections::{BTreeSet, VecDeque};

use brw_core::gw_trees::{sample_gw, MarkedTree, OffspringDistribution};
use rand::seq::SliceRandom;
use rand::Rng;

/// Adjacency lists of `tree` plus a path of `ray_len` extra vertices hanging
/// off `anchor`. Ray vertices get ids `n..n+ray_len`.
pub fn with_ray(tree: &MarkedTree, anchor: usize, ray_len: usize) -> Vec<Vec<usize>> {
    let n = tree.len();
    let mut adj = vec![Vec::new(); n + ray_len];
    for v in 0..n {
        if let Some(p) = tree.parent(v) {
            adj[v].push(p);
            adj[p].push(v);
        }
    }
    let mut prev = anchor;
    for i in 0..ray_len {
        let y = n + i;
        adj[prev].push(y);
        adj[y].push(prev);
        prev = y;
    }
    adj
}

/// BFS distances and predecessor pointers.
pub fn bfs(adj: &[Vec<usize>], src: usize) -> (Vec<usize>, Vec<usize>) {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut pred = vec![usize::MAX; adj.len()];
    dist[src] = 0;
    let mut q = VecDeque::from([src]);
    while let Some(x) = q.pop_front() {
        for &y in &adj[x] {
            if dist[y] == usize::MAX {
                dist[y] = dist[x] + 1;
                pred[y] = x;
                q.push_back(y);
            }
        }
    }
    (dist, pred)
}

/// Vertices on the path from `src` (BFS source of `pred`) to `a`, both ends
/// included.
pub fn path_to(pred: &[usize], a: usize) -> BTreeSet<usize> {
    let mut out = BTreeSet::from([a]);
    let mut x = a;
    while pred[x] != usize::MAX {
        x = pred[x];
        out.insert(x);
    }
    out
}

/// `min over pairs (v, w) at distance r of |A| − |A_{u,v} ∪ A_{u,w}|` for
/// every real vertex, computed directly on the ray-augmented tree.
pub fn brute_branching_slack(tree: &MarkedTree, anchor: usize, marks: &[bool], r: usize) -> Vec<i64> {
    let n = tree.len();
    let adj = with_ray(tree, anchor, r + 1);
    let a: Vec<usize> = (0..n).filter(|&v| marks[v]).collect();
    let mut out = Vec::with_capacity(n);
    for u in 0..n {
        let (dist, pred) = bfs(&adj, u);
        let paths: Vec<BTreeSet<usize>> = a.iter().map(|&x| path_to(&pred, x)).collect();
        let sphere: Vec<usize> = (0..adj.len()).filter(|&v| dist[v] == r).collect();
        let sets: Vec<BTreeSet<usize>> = sphere
            .iter()
            .map(|&v| a.iter().zip(&paths).filter(|(_, p)| p.contains(&v)).map(|(&x, _)| x).collect())
            .collect();
        let total = a.len() as i64;
        let worst = sets
            .iter()
            .flat_map(|s| sets.iter().map(move |t| total - s.union(t).count() as i64))
            .min()
            .expect("the ray provides a vertex at distance r");
        out.push(worst);
    }
    out
}

/// Direct check of the (k,r)-branching definition on the ray-augmented tree.
pub fn brute_branching(tree: &MarkedTree, anchor: usize, marks: &[bool], k: usize, r: usize) -> Vec<usize> {
    let slack = brute_branching_slack(tree, anchor, marks, r);
    (0..tree.len()).filter(|&u| slack[u] >= k as i64).collect()
}

/// `min over depth-r descendants w of |A_v| − |A_w|` (None without such
/// descendants), computed from explicit descendant sets with the
/// orientation toward the ray at `anchor`.
pub fn brute_supported_slack(tree: &MarkedTree, anchor: usize, marks: &[bool], r: usize) -> Vec<Option<i64>> {
    let n = tree.len();
    let adj = with_ray(tree, anchor, 0);
    let (dist, pred) = bfs(&adj, anchor);
    // descendants of v: vertices x whose path to the anchor contains v
    let to_anchor: Vec<BTreeSet<usize>> = (0..n).map(|x| path_to(&pred, x)).collect();
    let a_size = |v: usize| -> i64 {
        (0..n).filter(|&x| x != v && marks[x] && to_anchor[x].contains(&v)).count() as i64
    };
    (0..n)
        .map(|v| {
            let av = a_size(v);
            (0..n)
                .filter(|&w| dist[w] == dist[v] + r && to_anchor[w].contains(&v))
                .map(|w| av - a_size(w))
                .min()
        })
        .collect()
}

/// Direct check of the (k,r)-supported definition.
pub fn brute_supported(tree: &MarkedTree, anchor: usize, marks: &[bool], k: usize, r: usize) -> Vec<usize> {
    let slack = brute_supported_slack(tree, anchor, marks, r);
    (0..tree.len()).filter(|&v| slack[v].is_some_and(|s| s >= k as i64)).collect()
}

/// A random tree from a mix of shapes, with at most `max_n` vertices.
pub fn random_tree<R: Rng>(rng: &mut R, max_n: usize) -> MarkedTree {
    let n = rng.gen_range(1..=max_n);
    match rng.gen_range(0..5) {
        0 => {
            // uniform random recursive tree
            let parents: Vec<Option<usize>> =
                (0..n).map(|v| if v == 0 { None } else { Some(rng.gen_range(0..v)) }).collect();
            MarkedTree::from_parents(&parents).unwrap()
        }
        1 => {
            // preferential toward recent vertices: long, path-like trees
            let parents: Vec<Option<usize>> = (0..n)
                .map(|v| if v == 0 { None } else { Some(v - 1 - rng.gen_range(0..v.min(3))) })
                .collect();
            MarkedTree::from_parents(&parents).unwrap()
        }
        2 => {
            // few hubs: stars and spiders
            let hubs = rng.gen_range(1..=3usize).min(n);
            let parents: Vec<Option<usize>> = (0..n)
                .map(|v| match v {
                    0 => None,
                    v if v < hubs => Some(v - 1),
                    _ => Some(rng.gen_range(0..hubs)),
                })
                .collect();
            MarkedTree::from_parents(&parents).unwrap()
        }
        3 => {
            let mu = OffspringDistribution::new(vec![0.3, 0.2, 0.3, 0.2]).unwrap();
            sample_gw(&mu, n, rng)
        }
        _ => MarkedTree::path(n),
    }
}

/// Random non-empty mark vector.
pub fn random_marks<R: Rng>(rng: &mut R, n: usize) -> Vec<bool> {
    let density: f64 = *[0.05, 0.2, 0.5, 1.0].choose(rng).unwrap();
    let mut marks: Vec<bool> = (0..n).map(|_| rng.gen_bool(density)).collect();
    if !marks.iter().any(|&m| m) {
        marks[rng.gen_range(0..n)] = true;
    }
    marks
}
