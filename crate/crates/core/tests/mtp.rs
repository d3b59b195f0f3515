mod common;

use brw_core::graph::SimpleGraph;
use brw_core::group_graph::GroupSpec;
use brw_core::gw_trees::OffspringDistribution;
use brw_core::mtp::{
    cayley_ball, exact_mtp_check, mc_mtp_test, random_relabel, BuiltinTransport, ExactMtp, FixedRoot, FnTransport,
    MarkedGraph, Pullback, Pushforward, RootedSample, Sampler, TargetRule, Transport, Truncation, UniformRoot,
    WeightRule,
};
use brw_core::rng::substream;
use brw_core::Error;
use common::random_marks;
use rand::Rng;

fn random_graph(rng: &mut impl Rng, max_n: usize) -> SimpleGraph {
    let n = rng.gen_range(2..=max_n);
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (v, rng.gen_range(0..v))).collect();
    for _ in 0..rng.gen_range(0..n) {
        edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
    }
    SimpleGraph::from_edges(n, &edges)
}

fn d4() -> GroupSpec {
    GroupSpec::regular_tree(4).unwrap()
}

#[test]
fn three_path_leaf_targets() {
    let g = SimpleGraph::from_edges(3, &[(0, 1), (1, 2)]);
    let leaf = FnTransport {
        name: "leaf".into(),
        f: |g: MarkedGraph<'_>, _u: usize, v: usize| f64::from(u8::from(g.graph.degree(v) == 1)),
    };
    let r = exact_mtp_check(&g, &[true; 3], &leaf).unwrap();
    assert!((r.lhs - 2.0).abs() < 1e-15 && r.equal);
    let zero = FnTransport { name: "zero".into(), f: |_: MarkedGraph<'_>, _: usize, _: usize| 0.0 };
    assert_eq!(exact_mtp_check(&g, &[true; 3], &zero).unwrap(), ExactMtp { lhs: 0.0, rhs: 0.0, equal: true });
    assert!(matches!(exact_mtp_check(&g, &[false; 3], &zero), Err(Error::Domain(_))));
    assert!(exact_mtp_check(&g, &[true; 2], &zero).is_err());
}

#[test]
fn adjacency_counts_ordered_pairs() {
    let mut rng = substream(50, 0);
    for _ in 0..50 {
        let g = random_graph(&mut rng, 30);
        let marks = random_marks(&mut rng, g.len());
        let a = marks.iter().filter(|&&m| m).count() as f64;
        let pairs = (0..g.len())
            .flat_map(|u| g.neighbors(u).iter().map(move |&v| (u, v)))
            .filter(|&(u, v)| marks[u] && marks[v])
            .count() as f64;
        let r = exact_mtp_check(&g, &marks, &BuiltinTransport::Adjacent).unwrap();
        assert!(r.equal && (r.lhs - pairs / a).abs() < 1e-12);
    }
}

#[test]
fn builtin_names_round_trip() {
    for t in BuiltinTransport::ALL {
        assert_eq!(BuiltinTransport::from_name(t.name()).unwrap(), t);
        let json = serde_json::to_string(&t).unwrap();
        assert_eq!(json, format!("\"{}\"", t.name()));
    }
    assert!(BuiltinTransport::from_name("nope").is_err());
    assert_eq!(WeightRule::from_name("inverse-local-time").unwrap(), WeightRule::InverseLocalTime);
    assert!(WeightRule::from_name("heavy").is_err());
}

#[test]
fn builtins_are_local() {
    // evaluations agree on isomorphic relabelings, and the root sums only
    // depend on the declared ball
    let mut rng = substream(51, 0);
    for _ in 0..100 {
        let g = random_graph(&mut rng, 40);
        let marks = random_marks(&mut rng, g.len());
        let (h, hm, perm) = random_relabel(&g, &marks, &mut rng);
        let (mg, mh) = (MarkedGraph { graph: &g, marks: &marks }, MarkedGraph { graph: &h, marks: &hm });
        for t in BuiltinTransport::ALL {
            for u in 0..g.len() {
                for v in 0..g.len() {
                    assert_eq!(t.eval(mg, u, v), t.eval(mh, perm[u], perm[v]), "{}", t.name());
                }
            }
        }
        let root = rng.gen_range(0..g.len());
        for t in BuiltinTransport::ALL {
            let Some(r) = t.radius() else { continue };
            // cut the graph down to the ball of radius r around the root
            let d = g.distances_within(root, r);
            let keep: Vec<usize> = (0..g.len()).filter(|&v| d[v].is_some()).collect();
            let id = |v: usize| keep.iter().position(|&k| k == v).unwrap();
            let mut edges = Vec::new();
            for &u in &keep {
                for &v in g.neighbors(u) {
                    if d[v].is_some() && (d[u].unwrap() < r || d[v].unwrap() < r) {
                        edges.push((id(u), id(v)));
                    }
                }
            }
            let ball = RootedSample {
                graph: SimpleGraph::from_edges(keep.len(), &edges),
                marks: keep.iter().map(|&v| marks[v]).collect(),
                root: id(root),
                certified_radius: r,
                weight_ingredient: 1.0,
            };
            let full = RootedSample {
                graph: g.clone(),
                marks: marks.clone(),
                root,
                certified_radius: usize::MAX,
                weight_ingredient: 1.0,
            };
            let (a, b) = (ball.transport_sums(&t).unwrap(), full.transport_sums(&t).unwrap());
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12, "{}", t.name());
            let short = RootedSample { certified_radius: r - 1, ..ball };
            assert!(short.transport_sums(&t).is_none());
        }
    }
}

#[test]
fn uniform_root_passes() {
    let mut rng = substream(52, 0);
    let g = random_graph(&mut rng, 30);
    let marks = random_marks(&mut rng, g.len());
    let s = UniformRoot { graph: g, marks };
    for t in BuiltinTransport::ALL {
        let r = mc_mtp_test(&s, &t, WeightRule::Unit, 5_000, 0.01, 53).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.inconclusive, 0);
        assert!((r.mean_weight - 1.0).abs() < 1e-15);
    }
}

#[test]
fn fixed_endpoint_is_detected() {
    let n = 8;
    let path = SimpleGraph::from_edges(n, &(1..n).map(|v| (v - 1, v)).collect::<Vec<_>>());
    let s = FixedRoot { graph: path, marks: vec![true; n], root: 0 };
    let r = mc_mtp_test(&s, &BuiltinTransport::LeafBroadcast, WeightRule::Unit, 1_000, 0.01, 54).unwrap();
    assert!(!r.pass);
    assert_eq!((r.mean_out, r.mean_in), ((n - 1) as f64, 1.0));
    // 1(v ≠ u) is symmetric, so both sums are |A| − 1 even at a fixed root
    let other = FnTransport { name: "other".into(), f: |_: MarkedGraph<'_>, u: usize, v: usize| f64::from(u8::from(u != v)) };
    let r = mc_mtp_test(&s, &other, WeightRule::Unit, 1_000, 0.01, 54).unwrap();
    assert!(r.pass && r.mean_out == r.mean_in);
}

#[test]
fn test_level_under_the_null() {
    let mut rng = substream(55, 0);
    let g = random_graph(&mut rng, 40);
    let marks = random_marks(&mut rng, g.len());
    let s = UniformRoot { graph: g, marks };
    let rejections = (0..200u64)
        .filter(|&i| !mc_mtp_test(&s, &BuiltinTransport::Degree, WeightRule::Unit, 1_000, 0.05, 10_000 + i).unwrap().pass)
        .count();
    let rate = rejections as f64 / 200.0;
    assert!((0.01..=0.12).contains(&rate), "{rate}");
}

#[test]
fn argument_checks() {
    let s = UniformRoot { graph: SimpleGraph::from_edges(2, &[(0, 1)]), marks: vec![true; 2] };
    assert!(mc_mtp_test(&s, &BuiltinTransport::Adjacent, WeightRule::Unit, 10, 0.05, 1).is_err());
    assert!(mc_mtp_test(&s, &BuiltinTransport::Adjacent, WeightRule::Unit, 1_000, 1.5, 1).is_err());
    let empty = UniformRoot { graph: SimpleGraph::from_edges(2, &[(0, 1)]), marks: vec![false; 2] };
    assert!(mc_mtp_test(&empty, &BuiltinTransport::Adjacent, WeightRule::Unit, 1_000, 0.05, 1).is_err());
}

#[test]
fn too_shallow_samples_are_inconclusive() {
    let s = Pullback {
        group: d4(),
        mu: OffspringDistribution::binary(1.1).unwrap(),
        truncation: Truncation { depth: 2, budget: 10_000 },
        target: TargetRule::Everything,
    };
    match mc_mtp_test(&s, &BuiltinTransport::Share, WeightRule::Unit, 1_000, 0.01, 56) {
        Err(Error::TruncationInsufficient { inconclusive, total }) => assert!(inconclusive > total / 10),
        other => panic!("expected truncation error, got {other:?}"),
    }
    // the leaf broadcast needs complete samples, which truncated trees are not
    let deep = Pullback { truncation: Truncation { depth: 3, budget: 10_000 }, ..s };
    assert!(mc_mtp_test(&deep, &BuiltinTransport::LeafBroadcast, WeightRule::Unit, 1_000, 0.01, 57).is_err());
}

#[test]
fn cayley_ball_sizes() {
    let (g, elems) = cayley_ball(d4(), 3);
    assert_eq!(g.len(), 1 + 4 + 12 + 36);
    assert_eq!(elems[0], d4().identity());
    assert_eq!(g.degree(0), 4);
    let (g, _) = cayley_ball(GroupSpec::lattice(2).unwrap(), 2);
    assert_eq!(g.len(), 13);
    assert_eq!(g.edge_count(), 16);
}

#[test]
fn pullback_sample_shapes() {
    let path_law = Pullback {
        group: d4(),
        mu: OffspringDistribution::delta(1).unwrap(),
        truncation: Truncation { depth: 20, budget: 1_000 },
        target: TargetRule::Start,
    };
    let everything = Pullback { target: TargetRule::Everything, ..path_law.clone() };
    for i in 0..50 {
        let s = path_law.sample(&mut substream(58, i)).unwrap();
        // a bi-infinite path cut at depth 20 on both sides
        assert_eq!(s.graph.len(), 41);
        assert!((0..s.graph.len()).all(|v| s.graph.degree(v) <= 2));
        assert!(s.marks[s.root]);
        assert_eq!(s.certified_radius, 20);
        let e = everything.sample(&mut substream(58, i)).unwrap();
        assert!(e.marks.iter().all(|&m| m));
    }
    let traced = Pullback {
        target: TargetRule::IndependentTrace { mu: OffspringDistribution::binary(1.1).unwrap(), depth: 6 },
        ..path_law
    };
    for i in 0..50 {
        let s = traced.sample(&mut substream(59, i)).unwrap();
        assert!(s.marks[s.root]);
        assert!(s.weight_ingredient > 0.0 && s.weight_ingredient <= 1.0);
    }
}

#[test]
fn pushforward_with_inverse_local_time() {
    let s = Pushforward {
        group: d4(),
        mu: OffspringDistribution::binary(1.1).unwrap(),
        truncation: Truncation { depth: 12, budget: 1_000_000 },
        view_radius: 4,
    };
    for (j, f) in [BuiltinTransport::Degree, BuiltinTransport::Crowd, BuiltinTransport::Share].iter().enumerate() {
        let r = mc_mtp_test(&s, f, WeightRule::InverseLocalTime, 10_000, 0.01, 60 + j as u64).unwrap();
        assert!(r.pass, "{r:?}");
        assert_eq!(r.inconclusive, 0);
    }
}

#[test]
fn report_serialises() {
    let s = UniformRoot { graph: SimpleGraph::from_edges(3, &[(0, 1), (1, 2)]), marks: vec![true; 3] };
    let r = mc_mtp_test(&s, &BuiltinTransport::Degree, WeightRule::Unit, 1_000, 0.05, 61).unwrap();
    let v: serde_json::Value = serde_json::to_value(&r).unwrap();
    for key in ["estimate", "ci_low", "ci_high", "n", "inconclusive", "pass"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
