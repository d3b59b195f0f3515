//! Experiment configuration documents.

use std::path::PathBuf;

use brw_core::group_graph::GroupSpec;
use brw_core::gw_trees::OffspringDistribution;
use brw_core::mtp::{TargetRule, WeightRule};
use serde::{Deserialize, Serialize};

use crate::UsageError;

/// Largest replicate / sample / tree count accepted in a config.
pub const MAX_REPLICATES: u64 = 10_000_000;
/// Largest per-tree vertex budget.
pub const MAX_BUDGET: usize = 50_000_000;
/// Largest tree in a magic-fuzz run.
pub const MAX_FUZZ_VERTICES: usize = 100_000;
/// Largest `n_max` for the spectra and series experiments.
pub const MAX_SERIES_LENGTH: usize = 1_000_000;

/// The document root: the experiment's own fields next to `experiment`,
/// `seed` and `out`. Unknown fields are rejected by the experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Config {
    #[serde(flatten)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    Spectra(Spectra),
    Visits(Visits),
    MagicFuzz(MagicFuzz),
    MtpTest(MtpTest),
    Intersect(Intersect),
    ThinSweep(ThinSweep),
    Ends(Ends),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Spectra(_) => "spectra",
            Self::Visits(_) => "visits",
            Self::MagicFuzz(_) => "magic-fuzz",
            Self::MtpTest(_) => "mtp-test",
            Self::Intersect(_) => "intersect",
            Self::ThinSweep(_) => "thin-sweep",
            Self::Ends(_) => "ends",
        }
    }
}

/// An offspring law: a probability vector, `{"binary": m}` for
/// `(1 − m/2, 0, m/2)`, or `{"delta": k}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OffspringSpec {
    Pmf(Vec<f64>),
    Binary { binary: f64 },
    Delta { delta: usize },
}

impl OffspringSpec {
    pub fn build(&self) -> Result<OffspringDistribution, UsageError> {
        let mu = match self {
            Self::Pmf(p) => OffspringDistribution::new(p.clone()),
            Self::Binary { binary } => OffspringDistribution::binary(*binary),
            Self::Delta { delta } => OffspringDistribution::delta(*delta),
        };
        mu.map_err(|e| UsageError(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Spectra {
    pub group: GroupSpec,
    /// Estimates `p_{2n}(e,e)^{1/2n}` for `n = 1..=n_max`.
    pub n_max: usize,
    /// Allowed gap between the last estimate and the closed form.
    #[serde(default = "default_spectral_tolerance")]
    pub tolerance: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Visits {
    pub group: GroupSpec,
    pub offspring: OffspringSpec,
    pub depth: usize,
    pub replicates: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Allowed deviation of each mean from the exact series, in standard errors.
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MagicFuzz {
    pub trees: u64,
    /// Trees are GW(offspring) cut at `max_vertices`.
    pub offspring: OffspringSpec,
    pub max_vertices: usize,
    /// Each vertex is marked independently with this probability; a tree
    /// with no marks gets one uniformly chosen mark.
    pub mark_probability: f64,
    pub k_grid: Vec<usize>,
    #[serde(default = "default_r_grid")]
    pub r_grid: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MtpTest {
    pub sampler: SamplerSpec,
    pub transports: Vec<String>,
    #[serde(default = "default_weight")]
    pub weight: WeightRule,
    pub samples: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

/// A finite graph for the fixed-graph samplers.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GraphSpec {
    Path { n: usize },
    Star { leaves: usize },
    Edges { n: usize, edges: Vec<(usize, usize)> },
    CayleyBall { group: GroupSpec, radius: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerSpec {
    /// Root uniform on the marked set (all vertices unless `marks` is given).
    UniformRoot { graph: GraphSpec, marks: Option<Vec<usize>> },
    /// Always the same root: a deliberately non-unimodular sampler.
    FixedRoot { graph: GraphSpec, marks: Option<Vec<usize>>, root: usize },
    Pullback { group: GroupSpec, offspring: OffspringSpec, depth: usize, budget: usize, target: TargetRule },
    Pushforward { group: GroupSpec, offspring: OffspringSpec, depth: usize, budget: usize, view_radius: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Intersect {
    pub group: GroupSpec,
    pub offspring1: OffspringSpec,
    pub offspring2: OffspringSpec,
    pub depth: usize,
    pub replicates: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
    /// Start of the second walk as a word; the first starts at the identity.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<String>,
    #[serde(default = "default_k_grid")]
    pub k_grid: Vec<usize>,
    #[serde(default = "default_r_grid")]
    pub r_grid: Vec<usize>,
    #[serde(default = "default_sigmas")]
    pub sigmas: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThinSweep {
    pub group: GroupSpec,
    pub offspring1: OffspringSpec,
    pub offspring2: OffspringSpec,
    pub p_grid: Vec<f64>,
    pub depth: usize,
    pub replicates: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ends {
    pub group: GroupSpec,
    pub offspring: OffspringSpec,
    pub depth: usize,
    pub radius_grid: Vec<usize>,
    pub m_threshold: usize,
    pub replicates: u64,
    #[serde(default = "default_budget")]
    pub budget: usize,
}

fn default_spectral_tolerance() -> f64 {
    0.01
}
fn default_budget() -> usize {
    1_000_000
}
fn default_sigmas() -> f64 {
    4.0
}
fn default_r_grid() -> Vec<usize> {
    vec![1]
}
fn default_k_grid() -> Vec<usize> {
    vec![2, 4, 8]
}
fn default_weight() -> WeightRule {
    WeightRule::Unit
}
fn default_alpha() -> f64 {
    0.01
}

fn nonempty<T>(grid: &[T], name: &str) -> Result<(), UsageError> {
    if grid.is_empty() {
        return Err(UsageError(format!("{name} must not be empty")));
    }
    Ok(())
}

fn at_most<T: PartialOrd + std::fmt::Display>(value: T, cap: T, name: &str) -> Result<(), UsageError> {
    if value > cap {
        return Err(UsageError(format!("{name} = {value} exceeds the cap {cap}")));
    }
    Ok(())
}

fn positive_grid(grid: &[usize], name: &str) -> Result<(), UsageError> {
    nonempty(grid, name)?;
    if grid.contains(&0) {
        return Err(UsageError(format!("{name} entries must be at least 1")));
    }
    Ok(())
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let config: Config = serde_json::from_str(text).map_err(|e| UsageError(format!("invalid config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    /// Checks grids, caps and offspring laws beyond what the schema enforces.
    pub fn validate(&self) -> Result<(), UsageError> {
        match &self.experiment {
            Experiment::Spectra(c) => {
                at_most(c.n_max, MAX_SERIES_LENGTH, "n_max")?;
                if c.n_max == 0 {
                    return Err(UsageError("n_max must be at least 1".into()));
                }
            }
            Experiment::Visits(c) => {
                c.offspring.build()?;
                at_most(c.replicates, MAX_REPLICATES, "replicates")?;
                at_most(c.budget, MAX_BUDGET, "budget")?;
                at_most(c.depth, MAX_SERIES_LENGTH, "depth")?;
                if c.depth == 0 {
                    return Err(UsageError("depth must be at least 1".into()));
                }
            }
            Experiment::MagicFuzz(c) => {
                c.offspring.build()?;
                at_most(c.trees, MAX_REPLICATES, "trees")?;
                at_most(c.max_vertices, MAX_FUZZ_VERTICES, "max_vertices")?;
                positive_grid(&c.k_grid, "k_grid")?;
                positive_grid(&c.r_grid, "r_grid")?;
                if !(0.0..=1.0).contains(&c.mark_probability) {
                    return Err(UsageError("mark_probability must lie in [0,1]".into()));
                }
            }
            Experiment::MtpTest(c) => {
                nonempty(&c.transports, "transports")?;
                at_most(c.samples as u64, MAX_REPLICATES, "samples")?;
                match &c.sampler {
                    SamplerSpec::Pullback { offspring, budget, .. } | SamplerSpec::Pushforward { offspring, budget, .. } => {
                        offspring.build()?;
                        at_most(*budget, MAX_BUDGET, "budget")?;
                    }
                    _ => {}
                }
            }
            Experiment::Intersect(c) => {
                c.offspring1.build()?;
                c.offspring2.build()?;
                at_most(c.replicates, MAX_REPLICATES, "replicates")?;
                at_most(c.budget, MAX_BUDGET, "budget")?;
                positive_grid(&c.k_grid, "k_grid")?;
                positive_grid(&c.r_grid, "r_grid")?;
                if let Some(y) = &c.y {
                    c.group.parse(y).map_err(|e| UsageError(e.to_string()))?;
                }
            }
            Experiment::ThinSweep(c) => {
                c.offspring1.build()?;
                c.offspring2.build()?;
                nonempty(&c.p_grid, "p_grid")?;
                at_most(c.replicates, MAX_REPLICATES, "replicates")?;
                at_most(c.budget, MAX_BUDGET, "budget")?;
                if c.p_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
                    return Err(UsageError("p_grid entries must lie in [0,1]".into()));
                }
            }
            Experiment::Ends(c) => {
                c.offspring.build()?;
                nonempty(&c.radius_grid, "radius_grid")?;
                at_most(c.replicates, MAX_REPLICATES, "replicates")?;
                at_most(c.budget, MAX_BUDGET, "budget")?;
                if c.m_threshold == 0 {
                    return Err(UsageError("m_threshold must be at least 1".into()));
                }
            }
        }
        Ok(())
    }
}
