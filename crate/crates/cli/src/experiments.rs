//! One function per experiment. Each returns its output files (name and
//! bytes, in a fixed order) and the outcome of its checks; nothing here
//! depends on the worker count or the clock.

use brw_core::graph::SimpleGraph;
use brw_core::group_graph::{spectral_estimates, visits_series, write_series_csv};
use brw_core::gw_trees::{sample_gw, MarkedTree};
use brw_core::intersections::{
    expected_pairs_truncated, intersection_ends_diagnostic, sample_intersections, thinned_intersection_sweep,
    trace_ends_experiment, write_rows_csv, EndsVerdict, PairDepths, Replicates,
};
use brw_core::magic::{magic_bound_sweep, write_reports_csv, BranchingReport, OrientedTree};
use brw_core::mtp::{
    cayley_ball, mc_mtp_test, BuiltinTransport, FixedRoot, MtpReport, Pullback, Pushforward, Sampler, Truncation,
    UniformRoot,
};
use brw_core::rng::substream;
use brw_core::stats::Moments;
use brw_core::tree_walk::{origin_visit_experiment, write_visit_rows, VisitExperiment};
use brw_core::Error;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, Experiment, GraphSpec, SamplerSpec};
use crate::UsageError;

pub struct Outcome {
    pub files: Vec<(&'static str, Vec<u8>)>,
    /// Failed checks, one line each.
    pub failures: Vec<String>,
    /// Checks that could not be carried out, one line each.
    pub notes: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Self { files: Vec::new(), failures: Vec::new(), notes: Vec::new() }
    }

    fn json(&mut self, name: &'static str, value: &impl Serialize) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("serialisable");
        bytes.push(b'\n');
        self.files.push((name, bytes));
    }
}

fn usage(e: Error) -> UsageError {
    UsageError(e.to_string())
}

fn csv_bytes(write: impl FnOnce(&mut Vec<u8>) -> brw_core::Result<()>) -> Vec<u8> {
    let mut out = Vec::new();
    write(&mut out).expect("writing to memory");
    out
}

pub fn run(experiment: &Experiment, seed: u64) -> Result<Outcome, UsageError> {
    match experiment {
        Experiment::Spectra(c) => spectra(c),
        Experiment::Visits(c) => visits(c, seed),
        Experiment::MagicFuzz(c) => magic_fuzz(c, seed),
        Experiment::MtpTest(c) => mtp_test(c, seed),
        Experiment::Intersect(c) => intersect(c, seed),
        Experiment::ThinSweep(c) => thin_sweep(c, seed),
        Experiment::Ends(c) => ends(c, seed),
    }
}

fn spectra(c: &config::Spectra) -> Result<Outcome, UsageError> {
    let rows = spectral_estimates(c.group, c.n_max).map_err(usage)?;
    let (last_n, last) = *rows.last().expect("n_max ≥ 1");
    let closed = c.group.spectral_radius_closed_form();
    let mut out = Outcome::new();
    out.files.push(("spectra.csv", csv_bytes(|w| write_series_csv(w, &rows))));
    let pass = (last - closed).abs() <= c.tolerance;
    if !pass {
        out.failures.push(format!("estimate {last:.6} at n = {last_n} is not within {} of {closed:.6}", c.tolerance));
    }
    out.json("summary.json", &json!({ "n": last_n, "estimate": last, "closed_form": closed, "pass": pass }));
    Ok(out)
}

#[derive(Serialize)]
struct VisitCheck {
    depth: usize,
    replicates: u64,
    mean_visits: f64,
    std_error: f64,
    exact: Option<f64>,
    pass: Option<bool>,
}

fn visits(c: &config::Visits, seed: u64) -> Result<Outcome, UsageError> {
    let mu = c.offspring.build()?;
    let settings = VisitExperiment { depth_budget: c.depth, replicates: c.replicates, vertex_budget: c.budget };
    let rows = origin_visit_experiment(&mu, c.group, &c.group.identity(), settings, seed).map_err(usage)?;
    let mut out = Outcome::new();
    let exact = match visits_series(c.group, mu.mean(), c.depth) {
        Ok(s) => s,
        Err(Error::DivergenceSuspected { index, .. }) => {
            out.notes.push(format!("the exact series diverges from n = {index}; means are not compared"));
            Vec::new()
        }
        Err(e) => return Err(usage(e)),
    };
    let mut by_depth = vec![Moments::new(); c.depth + 1];
    for r in &rows {
        by_depth[r.depth].push(r.visit_count as f64);
    }
    let mut checks = Vec::with_capacity(c.depth + 1);
    for (depth, m) in by_depth.iter().enumerate() {
        // replicates cut by the vertex budget have no row at this depth
        let complete = m.n == c.replicates;
        let exact = exact.get(depth).copied();
        let pass = exact.filter(|_| complete).map(|e| (m.mean - e).abs() <= c.sigmas * m.std_error() + 1e-9 * e.max(1.0));
        if pass == Some(false) {
            out.failures.push(format!("depth {depth}: mean {:.6} vs exact {:.6}", m.mean, exact.unwrap()));
        }
        checks.push(VisitCheck { depth, replicates: m.n, mean_visits: m.mean, std_error: m.std_error(), exact, pass });
    }
    if checks.iter().any(|c| c.exact.is_some() && c.pass.is_none()) {
        out.notes.push("some depths were cut by the vertex budget and are not compared".into());
    }
    out.files.push(("visits.csv", csv_bytes(|w| write_visit_rows(w, &rows))));
    out.files.push(("visits_summary.csv", csv_bytes(|w| write_rows_csv(w, &checks))));
    Ok(out)
}

fn fuzz_instance(c: &config::MagicFuzz, mu: &brw_core::OffspringDistribution, seed: u64, i: u64) -> (MarkedTree, usize, Vec<bool>) {
    let mut rng = substream(seed, i);
    let tree = sample_gw(mu, c.max_vertices, &mut rng);
    let n = tree.len();
    let anchor = rng.gen_range(0..n);
    let mut marks: Vec<bool> = (0..n).map(|_| rng.gen_bool(c.mark_probability)).collect();
    if !marks.contains(&true) {
        marks[rng.gen_range(0..n)] = true;
    }
    (tree, anchor, marks)
}

#[derive(Serialize)]
struct FuzzCell {
    k: usize,
    r: usize,
    branching_violations: u64,
    supported_violations: u64,
}

fn magic_fuzz(c: &config::MagicFuzz, seed: u64) -> Result<Outcome, UsageError> {
    let mu = c.offspring.build()?;
    let reports: Vec<Vec<BranchingReport>> = (0..c.trees)
        .into_par_iter()
        .map(|i| {
            let (tree, anchor, marks) = fuzz_instance(c, &mu, seed, i);
            let oriented = OrientedTree::with_anchor(&tree, anchor)?;
            magic_bound_sweep(&oriented, &marks, &c.k_grid, &c.r_grid)
        })
        .collect::<brw_core::Result<_>>()
        .map_err(usage)?;
    let mut cells: Vec<FuzzCell> = c
        .r_grid
        .iter()
        .flat_map(|&r| c.k_grid.iter().map(move |&k| FuzzCell { k, r, branching_violations: 0, supported_violations: 0 }))
        .collect();
    let mut rows = Vec::new();
    for (i, per_tree) in reports.into_iter().enumerate() {
        for (cell, rep) in cells.iter_mut().zip(per_tree) {
            cell.branching_violations += u64::from(!rep.pass);
            cell.supported_violations += u64::from(rep.supported.len() as i64 > rep.bound.max(0));
            rows.push((i as u64, rep));
        }
    }
    let mut out = Outcome::new();
    for cell in &cells {
        if cell.branching_violations + cell.supported_violations > 0 {
            out.failures.push(format!(
                "(k, r) = ({}, {}): {} branching and {} supported bound violations",
                cell.k, cell.r, cell.branching_violations, cell.supported_violations
            ));
        }
    }
    out.files.push(("magic.csv", csv_bytes(|w| write_reports_csv(w, &rows))));
    out.json("summary.json", &json!({ "trees": c.trees, "cells": cells }));
    Ok(out)
}

fn build_graph(spec: &GraphSpec) -> Result<SimpleGraph, UsageError> {
    Ok(match spec {
        GraphSpec::Path { n } => {
            if *n == 0 {
                return Err(UsageError("a path needs at least one vertex".into()));
            }
            SimpleGraph::from_edges(*n, &(1..*n).map(|v| (v - 1, v)).collect::<Vec<_>>())
        }
        GraphSpec::Star { leaves } => SimpleGraph::from_edges(leaves + 1, &(1..=*leaves).map(|v| (0, v)).collect::<Vec<_>>()),
        GraphSpec::Edges { n, edges } => {
            if let Some(&(a, b)) = edges.iter().find(|&&(a, b)| a >= *n || b >= *n || a == b) {
                return Err(UsageError(format!("bad edge ({a}, {b}) for {n} vertices")));
            }
            SimpleGraph::from_edges(*n, edges)
        }
        GraphSpec::CayleyBall { group, radius } => cayley_ball(*group, *radius).0,
    })
}

fn build_marks(n: usize, marks: &Option<Vec<usize>>) -> Result<Vec<bool>, UsageError> {
    match marks {
        None => Ok(vec![true; n]),
        Some(list) => {
            let mut m = vec![false; n];
            for &v in list {
                *m.get_mut(v).ok_or_else(|| UsageError(format!("marked vertex {v} not in graph")))? = true;
            }
            if list.is_empty() {
                return Err(UsageError("the marked set is empty".into()));
            }
            Ok(m)
        }
    }
}

fn build_sampler(spec: &SamplerSpec) -> Result<Box<dyn Sampler>, UsageError> {
    Ok(match spec {
        SamplerSpec::UniformRoot { graph, marks } => {
            let graph = build_graph(graph)?;
            let marks = build_marks(graph.len(), marks)?;
            Box::new(UniformRoot { graph, marks })
        }
        SamplerSpec::FixedRoot { graph, marks, root } => {
            let graph = build_graph(graph)?;
            let marks = build_marks(graph.len(), marks)?;
            if *root >= graph.len() {
                return Err(UsageError(format!("root {root} not in graph")));
            }
            Box::new(FixedRoot { graph, marks, root: *root })
        }
        SamplerSpec::Pullback { group, offspring, depth, budget, target } => Box::new(Pullback {
            group: *group,
            mu: offspring.build()?,
            truncation: Truncation { depth: *depth, budget: *budget },
            target: target.clone(),
        }),
        SamplerSpec::Pushforward { group, offspring, depth, budget, view_radius } => Box::new(Pushforward {
            group: *group,
            mu: offspring.build()?,
            truncation: Truncation { depth: *depth, budget: *budget },
            view_radius: *view_radius,
        }),
    })
}

#[derive(Serialize)]
#[serde(untagged)]
enum MtpEntry {
    Report(MtpReport),
    Inconclusive { transport: String, pass: bool, error: String },
}

fn mtp_test(c: &config::MtpTest, seed: u64) -> Result<Outcome, UsageError> {
    let sampler = build_sampler(&c.sampler)?;
    let transports: Vec<BuiltinTransport> =
        c.transports.iter().map(|t| BuiltinTransport::from_name(t)).collect::<brw_core::Result<_>>().map_err(usage)?;
    let mut out = Outcome::new();
    let mut entries = Vec::new();
    for (i, t) in transports.iter().enumerate() {
        // each transport gets its own block of streams
        let stream_seed = seed.wrapping_add(i as u64);
        match mc_mtp_test(sampler.as_ref(), t, c.weight, c.samples, c.alpha, stream_seed) {
            Ok(r) => {
                if !r.pass {
                    out.failures.push(format!(
                        "{}: estimate {:.4} with interval [{:.4}, {:.4}] excludes 0",
                        r.transport, r.estimate, r.ci_low, r.ci_high
                    ));
                }
                entries.push(MtpEntry::Report(r));
            }
            Err(e @ Error::TruncationInsufficient { .. }) => {
                out.failures.push(format!("{}: {e}", c.transports[i]));
                entries.push(MtpEntry::Inconclusive { transport: c.transports[i].clone(), pass: false, error: e.to_string() });
            }
            Err(e) => return Err(usage(e)),
        }
    }
    out.json("mtp.json", &json!({ "weight": c.weight, "reports": entries }));
    Ok(out)
}

#[derive(Serialize)]
struct IntersectRow {
    replicate: u64,
    pair_count: u64,
    intersection_size: usize,
    pulled_back: usize,
    truncated: bool,
    verdict: EndsVerdict,
}

#[derive(Serialize)]
struct CensusRow {
    replicate: u64,
    k: usize,
    r: usize,
    branching: usize,
    root_frequency: f64,
    bound: f64,
}

fn intersect(c: &config::Intersect, seed: u64) -> Result<Outcome, UsageError> {
    let (mu1, mu2) = (c.offspring1.build()?, c.offspring2.build()?);
    let x = c.group.identity();
    let y = match &c.y {
        Some(w) => c.group.parse(w).map_err(usage)?,
        None => x.clone(),
    };
    let depths = PairDepths { depth1: c.depth, depth2: c.depth, budget: c.budget };
    let per_rep: Vec<(IntersectRow, Vec<CensusRow>)> = (0..c.replicates)
        .into_par_iter()
        .map(|i| {
            let rec = sample_intersections(&mu1, &mu2, c.group, &x, &y, depths, &mut substream(seed, i))?;
            let diag = intersection_ends_diagnostic(&rec, &c.k_grid, &c.r_grid)?;
            let census = diag
                .census
                .iter()
                .map(|row| CensusRow {
                    replicate: i,
                    k: row.k,
                    r: row.r,
                    branching: row.branching,
                    root_frequency: row.root_frequency,
                    bound: row.bound,
                })
                .collect();
            let row = IntersectRow {
                replicate: i,
                pair_count: rec.pair_count,
                intersection_size: rec.intersection.len(),
                pulled_back: rec.pulled_back.len(),
                truncated: rec.truncated,
                verdict: diag.verdict,
            };
            Ok((row, census))
        })
        .collect::<brw_core::Result<_>>()
        .map_err(usage)?;
    let (rows, census): (Vec<IntersectRow>, Vec<Vec<CensusRow>>) = per_rep.into_iter().unzip();
    let census: Vec<CensusRow> = census.into_iter().flatten().collect();

    let exact = expected_pairs_truncated(mu1.mean(), mu2.mean(), c.group, &x, &y, c.depth).map_err(usage)?;
    let pairs: Moments = rows.iter().map(|r| r.pair_count as f64).collect();
    let truncated = rows.iter().filter(|r| r.truncated).count();
    let z = if pairs.std_error() > 0.0 { (pairs.mean - exact) / pairs.std_error() } else { 0.0 };
    let agrees = (pairs.mean - exact).abs() <= c.sigmas * pairs.std_error() + 1e-9 * exact.max(1.0);
    let mut out = Outcome::new();
    let checked = truncated == 0;
    if !checked {
        out.notes.push(format!("{truncated} replicates hit the vertex budget; the pair-count mean is not compared"));
    } else if !agrees {
        out.failures.push(format!("mean pair count {:.6} vs exact {exact:.6} (z = {z:.2})", pairs.mean));
    }
    let verdicts = |v: EndsVerdict| rows.iter().filter(|r| r.verdict == v).count();
    let frequencies: Vec<Value> = c
        .r_grid
        .iter()
        .flat_map(|&r| c.k_grid.iter().map(move |&k| (k, r)))
        .map(|(k, r)| {
            let m: Moments = census.iter().filter(|row| row.k == k && row.r == r).map(|row| row.root_frequency).collect();
            json!({ "k": k, "r": r, "nonempty": m.n, "mean_root_frequency": m.mean, "std_error": m.std_error(), "bound": 2.0 * r as f64 / k as f64 })
        })
        .collect();
    out.files.push(("intersect.csv", csv_bytes(|w| write_rows_csv(w, &rows))));
    out.files.push(("census.csv", csv_bytes(|w| write_rows_csv(w, &census))));
    out.json(
        "summary.json",
        &json!({
            "replicates": c.replicates,
            "truncated": truncated,
            "exact_mean_pairs": exact,
            "mean_pairs": pairs.mean,
            "std_error": pairs.std_error(),
            "z": z,
            "checked": checked,
            "pass": !checked || agrees,
            "verdicts": {
                "empty": verdicts(EndsVerdict::Empty),
                "at-most-two-ended": verdicts(EndsVerdict::AtMostTwoEnded),
                "multi-ended": verdicts(EndsVerdict::MultiEnded),
            },
            "root_frequencies": frequencies,
        }),
    );
    Ok(out)
}

fn thin_sweep(c: &config::ThinSweep, seed: u64) -> Result<Outcome, UsageError> {
    let (mu1, mu2) = (c.offspring1.build()?, c.offspring2.build()?);
    let reps = Replicates { count: c.replicates, seed, budget: c.budget };
    let (rows, nested) = thinned_intersection_sweep(&mu1, &mu2, c.group, &c.p_grid, c.depth, reps).map_err(usage)?;
    let mut out = Outcome::new();
    let broken = nested.iter().filter(|&&n| !n).count();
    if broken > 0 {
        out.failures.push(format!("{broken} replicates have non-nested thinned intersections"));
    }
    let mut ps: Vec<f64> = rows.iter().map(|r| r.p).collect();
    ps.dedup();
    let levels: Vec<Value> = ps
        .iter()
        .map(|&p| {
            let at: Vec<_> = rows.iter().filter(|r| r.p == p).collect();
            let sizes: Moments = at.iter().map(|r| r.intersection_size as f64).collect();
            let nonempty = at.iter().filter(|r| r.intersection_size > 0).count();
            json!({
                "p": p,
                "mean_intersection_size": sizes.mean,
                "std_error": sizes.std_error(),
                "nonempty_fraction": nonempty as f64 / at.len() as f64,
                "truncated": at.iter().filter(|r| r.truncated).count(),
            })
        })
        .collect();
    out.files.push(("thin_sweep.csv", csv_bytes(|w| write_rows_csv(w, &rows))));
    out.json("summary.json", &json!({ "replicates": c.replicates, "non_nested": broken, "levels": levels }));
    Ok(out)
}

fn ends(c: &config::Ends, seed: u64) -> Result<Outcome, UsageError> {
    let mu = c.offspring.build()?;
    let reps = Replicates { count: c.replicates, seed, budget: c.budget };
    let rows = trace_ends_experiment(&mu, c.group, c.depth, &c.radius_grid, c.m_threshold, reps).map_err(usage)?;
    let radii: Vec<Value> = c
        .radius_grid
        .iter()
        .map(|&radius| {
            let mut counts: Vec<usize> =
                rows.iter().filter(|r| r.radius == radius && r.survived).map(|r| r.qualifying_components).collect();
            counts.sort_unstable();
            let mean: Moments = counts.iter().map(|&c| c as f64).collect();
            json!({
                "radius": radius,
                "survivors": counts.len(),
                "median_components": counts.get(counts.len() / 2),
                "mean_components": mean.mean,
            })
        })
        .collect();
    let mut out = Outcome::new();
    out.files.push(("ends.csv", csv_bytes(|w| write_rows_csv(w, &rows))));
    out.json("summary.json", &json!({ "replicates": c.replicates, "radii": radii }));
    Ok(out)
}
