//! Acceptance suite: runs every criterion at its stated scale and prints one
//! PASS/FAIL line each.
//!
//! Two criteria contain parts that cannot hold as literally stated (the
//! branching bound for r ≥ 2 and the 1e-6 increment threshold of the critical
//! series); they are run in full, reported as FAIL with the measured numbers,
//! and marked `known`. By default only unexpected failures make the process
//! exit non-zero; with `BRW_ACCEPTANCE_STRICT=1` every FAIL line does.

mod common;

use std::time::{Duration, Instant};

use brw_core::graph::SimpleGraph;
use brw_core::group_graph::{spectral_radius, visits_series_guarded, GroupSpec};
use brw_core::gw_trees::OffspringDistribution;
use brw_core::intersections::{expected_pairs_truncated, sample_intersections, thinned_intersection_sweep, write_rows_csv, PairDepths, Replicates};
use brw_core::magic::{branching_bound, branching_slack, supported_slack, OrientedTree};
use brw_core::mtp::{exact_mtp_check, mc_mtp_test, BuiltinTransport, FnTransport, MarkedGraph, Pullback, TargetRule, Transport, Truncation, WeightRule};
use brw_core::rng::substream;
use brw_core::stats::Moments;
use brw_core::tree_walk::{origin_visit_experiment, write_visit_rows, VisitExperiment};
use common::{brute_branching_slack, brute_supported_slack, random_marks, random_tree};
use rand::Rng;
use rayon::prelude::*;

#[derive(PartialEq)]
enum Status {
    Pass,
    Fail,
    /// Fails because the stated threshold is unattainable; analysed in the
    /// README.
    KnownFail,
}

struct Outcome {
    status: Status,
    detail: String,
}

impl Outcome {
    fn check(ok: bool, detail: String) -> Self {
        Self { status: if ok { Status::Pass } else { Status::Fail }, detail }
    }
}

fn run(id: usize, name: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> Status {
    let start = Instant::now();
    let mut out = f();
    let elapsed = start.elapsed();
    if elapsed > limit && out.status == Status::Pass {
        out.status = Status::Fail;
        out.detail.push_str(&format!("; exceeded time limit {limit:?}"));
    }
    let tag = match out.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
        Status::KnownFail => "FAIL (known)",
    };
    println!("acceptance {id:>2} {name}: {tag} — {} [{:.1}s]", out.detail, elapsed.as_secs_f64());
    out.status
}

const D4: fn() -> GroupSpec = || GroupSpec::regular_tree(4).unwrap();

/// Criterion 1: branching count ≤ max(⌊r(2|A|−k)/k⌋, 0) on 10⁴ random trees
/// with at most 500 vertices, for all k ≤ 8 and r ≤ 3.
fn magic_bound() -> Outcome {
    let per_tree: Vec<[[u64; 2]; 3]> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(101, i);
            let tree = random_tree(&mut rng, 500);
            let marks = random_marks(&mut rng, tree.len());
            let a = marks.iter().filter(|&&m| m).count();
            let t = OrientedTree::new(&tree);
            let mut v = [[0u64; 2]; 3];
            for r in 1..=3 {
                let b = branching_slack(&t, &marks, r).unwrap();
                let s = supported_slack(&t, &marks, r).unwrap();
                for k in 1..=8usize {
                    let bound = branching_bound(a, k, r).max(0);
                    let nb = b.iter().filter(|&&x| x >= k as i64).count() as i64;
                    let ns = s.iter().filter(|x| x.is_some_and(|x| x >= k as i64)).count() as i64;
                    v[r - 1][0] += u64::from(nb > bound);
                    v[r - 1][1] += u64::from(ns > bound);
                }
            }
            v
        })
        .collect();
    let mut total = [[0u64; 2]; 3];
    for v in &per_tree {
        for r in 0..3 {
            total[r][0] += v[r][0];
            total[r][1] += v[r][1];
        }
    }
    let detail = format!(
        "branching-bound violations over 10^4 trees × 8 values of k: r=1: {}, r=2: {}, r=3: {}; supported-count violations: {}, {}, {}",
        total[0][0], total[1][0], total[2][0], total[0][1], total[1][1], total[2][1]
    );
    let literal = total.iter().all(|t| t[0] == 0);
    let attainable = total[0][0] == 0 && total.iter().all(|t| t[1] == 0);
    let status = match (literal, attainable) {
        (true, _) => Status::Pass,
        (false, true) => Status::KnownFail,
        (false, false) => Status::Fail,
    };
    Outcome { status, detail }
}

/// Criterion 2: fast branching/supported counters agree with the
/// brute-force definitions on 10³ random trees with at most 60 vertices.
fn oracle_equivalence() -> Outcome {
    let mismatches: u64 = (0..1000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(202, i);
            let tree = random_tree(&mut rng, 60);
            let anchor = rng.gen_range(0..tree.len());
            let marks = random_marks(&mut rng, tree.len());
            let t = OrientedTree::with_anchor(&tree, anchor).unwrap();
            let mut bad = 0;
            for r in 1..=3 {
                let fb = branching_slack(&t, &marks, r).unwrap();
                let bb = brute_branching_slack(&tree, anchor, &marks, r);
                let fs = supported_slack(&t, &marks, r).unwrap();
                let bs = brute_supported_slack(&tree, anchor, &marks, r);
                for k in 1..=8i64 {
                    for v in 0..tree.len() {
                        bad += u64::from((fb[v] >= k) != (bb[v] >= k));
                        bad += u64::from(fs[v].is_some_and(|x| x >= k) != bs[v].is_some_and(|x| x >= k));
                    }
                }
            }
            bad
        })
        .sum();
    Outcome::check(mismatches == 0, format!("{mismatches} vertex-level mismatches over 10^3 trees, k ≤ 8, r ≤ 3"))
}

/// Criterion 3: `p_{2n}(e,e)^{1/2n}` at n = 2000 within 0.01 of `2√(d−1)/d`.
fn spectral() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for d in [3u32, 4, 6] {
        let g = GroupSpec::regular_tree(d).unwrap();
        let est = spectral_radius(g, 2000).unwrap();
        let closed = est.closed_form.unwrap();
        // independent confirmation of the closed form: successive ratios
        let lp = g.ln_return_series(4002).unwrap();
        let ratio = ((lp[4002] - lp[4000]) / 2.0).exp();
        ok &= (est.estimate - closed).abs() < 0.01 && est.estimate <= closed && (ratio - closed).abs() < 1e-3;
        parts.push(format!("d={d}: estimate {:.5} vs {:.5} (ratio {:.5})", est.estimate, closed, ratio));
    }
    Outcome::check(ok, parts.join("; "))
}

/// Criterion 4: the critical visits series on d = 4 and its divergence just
/// above the threshold.
fn critical_series() -> Outcome {
    let g = D4();
    let rho = g.spectral_radius_closed_form();
    let s = visits_series_guarded(g, 1.0 / rho, 4000, f64::INFINITY).unwrap();
    let max_inc = (3001..=4000).map(|n| s[n] - s[n - 1]).fold(0.0, f64::max);
    // the terms decay like n^{-3/2}: compare n = 3000 with n = 1500
    let decay = (s[3000] - s[2999]) / (s[1500] - s[1499]);
    let summable = (decay - 2f64.powf(-1.5)).abs() < 0.02;
    let hot = visits_series_guarded(g, 1.05 / rho, 3000, f64::INFINITY).unwrap();
    let crossing = hot.iter().position(|&x| x > 1e6);
    let diverges = crossing.is_some_and(|n| n < 3000);
    let detail = format!(
        "critical: S_4000 = {:.6}, largest increment beyond 3000 = {:.3e} (threshold 1e-6), term ratio 3000/1500 = {:.4} (n^-3/2 predicts {:.4}); 1.05×: exceeds 1e6 at N = {:?}",
        s[4000],
        max_inc,
        decay,
        2f64.powf(-1.5),
        crossing
    );
    let status = if max_inc < 1e-6 && diverges {
        Status::Pass
    } else if diverges && summable {
        Status::KnownFail
    } else {
        Status::Fail
    };
    Outcome { status, detail }
}

/// Criterion 5: mean pair count over 10⁴ replicates against the exact sum.
fn intersection_formula() -> Outcome {
    let g = D4();
    let e = g.identity();
    let mu = OffspringDistribution::binary(1.1).unwrap();
    let exact = expected_pairs_truncated(1.1, 1.1, g, &e, &e, 6).unwrap();
    let depths = PairDepths { depth1: 6, depth2: 6, budget: 1_000_000 };
    let counts: Vec<f64> = (0..10_000u64)
        .into_par_iter()
        .map(|i| sample_intersections(&mu, &mu, g, &e, &e, depths, &mut substream(505, i)).unwrap().pair_count as f64)
        .collect();
    let m: Moments = counts.into_iter().collect();
    let z = (m.mean - exact) / m.std_error();
    Outcome::check(z.abs() <= 4.0, format!("MC mean {:.4} ± {:.4}, exact {:.4}, z = {:.2}", m.mean, m.std_error(), exact, z))
}

/// Criterion 6: exact transport identity on 100 random marked graphs with
/// random transport functions.
fn exact_mtp() -> Outcome {
    let mut worst = 0.0f64;
    let mut all_equal = true;
    for i in 0..100u64 {
        let mut rng = substream(606, i);
        let n = rng.gen_range(1..=50);
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((v, rng.gen_range(0..v)));
        }
        for _ in 0..rng.gen_range(0..n) {
            edges.push((rng.gen_range(0..n), rng.gen_range(0..n)));
        }
        let g = SimpleGraph::from_edges(n, &edges);
        let marks = random_marks(&mut rng, n);
        let table: Vec<f64> = (0..n * n).map(|_| rng.gen::<f64>() * 10f64.powi(rng.gen_range(-3..4))).collect();
        let f = FnTransport { name: "table".into(), f: move |_: MarkedGraph<'_>, u: usize, v: usize| table[u * n + v] };
        let mut fs: Vec<&dyn Transport> = vec![&f];
        fs.extend(BuiltinTransport::ALL.iter().map(|b| b as &dyn Transport));
        for t in fs {
            let r = exact_mtp_check(&g, &marks, t).unwrap();
            worst = worst.max((r.lhs - r.rhs).abs());
            all_equal &= r.equal;
        }
    }
    Outcome::check(all_equal && worst < 1e-12, format!("largest |lhs − rhs| = {worst:.2e} over 100 graphs × 6 functions"))
}

fn pullback(target: TargetRule) -> Pullback {
    Pullback {
        group: D4(),
        mu: OffspringDistribution::binary(1.1).unwrap(),
        truncation: Truncation { depth: 12, budget: 1_000_000 },
        target,
    }
}

fn mtp_battery(sampler: &Pullback, weight: WeightRule, seed: u64) -> (bool, Vec<String>) {
    let mut ok = true;
    let mut parts = Vec::new();
    for (j, f) in [BuiltinTransport::Degree, BuiltinTransport::Crowd, BuiltinTransport::Share].iter().enumerate() {
        match mc_mtp_test(sampler, f, weight, 10_000, 0.01, seed + j as u64) {
            Ok(r) => {
                ok &= r.pass;
                parts.push(format!(
                    "{}: {:+.4} in [{:+.4}, {:+.4}] ({} inconclusive) {}",
                    r.transport,
                    r.estimate,
                    r.ci_low,
                    r.ci_high,
                    r.inconclusive,
                    if r.pass { "ok" } else { "REJECTED" }
                ));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{}: error {e}", f.name()));
            }
        }
    }
    (ok, parts)
}

/// Criterion 7: pull-back with `W ≡ 1`.
fn pullback_unweighted() -> Outcome {
    let (ok_start, p1) = mtp_battery(&pullback(TargetRule::Start), WeightRule::Unit, 7000);
    let (ok_all, p2) = mtp_battery(&pullback(TargetRule::Everything), WeightRule::Unit, 7100);
    Outcome::check(ok_start && ok_all, format!("A = {{ρ}}: {}; A = V(G): {}", p1.join(", "), p2.join(", ")))
}

/// Criterion 8: pull-back of an independent trace with the
/// `(#X₂⁻¹(ρ))⁻¹` weight.
fn pullback_weighted() -> Outcome {
    let target = TargetRule::IndependentTrace { mu: OffspringDistribution::binary(1.1).unwrap(), depth: 12 };
    let (ok, parts) = mtp_battery(&pullback(target), WeightRule::InverseLocalTime, 8000);
    Outcome::check(ok, parts.join(", "))
}

/// Criterion 9: root-branching frequency for roots uniform on A.
fn branching_probability() -> Outcome {
    let cases = [(4usize, 1usize), (8, 1), (8, 2)];
    let hits: Vec<[u64; 3]> = (0..10_000u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(909, i);
            let tree = random_tree(&mut rng, 500);
            let marks = random_marks(&mut rng, tree.len());
            let a: Vec<usize> = (0..tree.len()).filter(|&v| marks[v]).collect();
            let root = a[rng.gen_range(0..a.len())];
            let t = OrientedTree::new(&tree);
            let mut h = [0u64; 3];
            for (c, &(k, r)) in cases.iter().enumerate() {
                h[c] = u64::from(branching_slack(&t, &marks, r).unwrap()[root] >= k as i64);
            }
            h
        })
        .collect();
    let n = hits.len() as f64;
    let mut ok = true;
    let mut parts = Vec::new();
    for (c, &(k, r)) in cases.iter().enumerate() {
        let freq = hits.iter().map(|h| h[c]).sum::<u64>() as f64 / n;
        let bound = 2.0 * r as f64 / k as f64;
        let sigma = (bound.min(1.0) * (1.0 - bound.min(1.0)) / n).sqrt();
        ok &= freq <= bound + 4.0 * sigma;
        parts.push(format!("(k={k}, r={r}): {freq:.4} ≤ {bound:.3}"));
    }
    Outcome::check(ok, parts.join(", "))
}

/// Criterion 10: nested thinned intersections on every replicate.
fn thinning_coupling() -> Outcome {
    let g = D4();
    let mu = OffspringDistribution::binary(1.0 / g.spectral_radius_closed_form()).unwrap();
    let reps = Replicates { count: 1000, seed: 1010, budget: 1_000_000 };
    let (rows, nested) = thinned_intersection_sweep(&mu, &mu, g, &[0.5, 0.9, 1.0], 12, reps).unwrap();
    let violations = nested.iter().filter(|&&n| !n).count();
    let mean_full = rows.iter().filter(|r| r.p == 1.0).map(|r| r.intersection_size as f64).sum::<f64>() / 1000.0;
    Outcome::check(violations == 0, format!("{violations} inclusion violations over 10^3 replicates (mean |I^1| = {mean_full:.2})"))
}

/// Criterion 11: equal seeds give byte-identical CSV bodies with 1 and 8
/// worker threads, and across repeated runs.
fn determinism() -> Outcome {
    let produce = |threads: usize| -> Vec<u8> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let g = D4();
            let mu = OffspringDistribution::binary(1.3).unwrap();
            let mut out = Vec::new();
            let reps = Replicates { count: 200, seed: 1111, budget: 100_000 };
            let (rows, _) = thinned_intersection_sweep(&mu, &mu, g, &[0.3, 0.7, 1.0], 8, reps).unwrap();
            write_rows_csv(&mut out, &rows).unwrap();
            let settings = VisitExperiment { depth_budget: 10, replicates: 200, vertex_budget: 100_000 };
            let visits = origin_visit_experiment(&mu, g, &g.identity(), settings, 1112).unwrap();
            write_visit_rows(&mut out, &visits).unwrap();
            let rep = mc_mtp_test(&pullback(TargetRule::Start), &BuiltinTransport::Share, WeightRule::Unit, 1000, 0.05, 1113).unwrap();
            out.extend(serde_json::to_vec(&rep).unwrap());
            out
        })
    };
    let a = produce(1);
    let b = produce(8);
    let c = produce(8);
    Outcome::check(a == b && b == c, format!("{} bytes; 1 vs 8 workers identical: {}; repeat identical: {}", a.len(), a == b, b == c))
}

fn main() {
    let strict = std::env::var("BRW_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let min = |m: u64| Duration::from_secs(60 * m);
    let statuses = [
        run(1, "magic bound", min(2), magic_bound),
        run(2, "oracle equivalence", min(1), oracle_equivalence),
        run(3, "spectral radius", Duration::from_secs(10), spectral),
        run(4, "critical series", Duration::from_secs(30), critical_series),
        run(5, "intersection formula", min(2), intersection_formula),
        run(6, "exact transport", Duration::from_secs(10), exact_mtp),
        run(7, "pull-back, W = 1", min(5), pullback_unweighted),
        run(8, "weighted pull-back", min(10), pullback_weighted),
        run(9, "branching probability", min(2), branching_probability),
        run(10, "thinning coupling", min(1), thinning_coupling),
        run(11, "determinism", min(2), determinism),
    ];
    let fails = statuses.iter().filter(|s| **s == Status::Fail).count();
    let known = statuses.iter().filter(|s| **s == Status::KnownFail).count();
    println!("acceptance summary: {} pass, {fails} fail, {known} known fail", statuses.len() - fails - known);
    if fails > 0 || (strict && known > 0) {
        std::process::exit(1);
    }
}
