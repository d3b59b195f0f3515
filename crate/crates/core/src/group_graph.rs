//! Cayley graphs with exact word arithmetic and exact n-step transition
//! probabilities.
//!
//! Three families are supported:
//!
//! * `RegularTree(d)` — the d-regular tree, realised as the Cayley graph of the
//!   free product of `d` copies of ℤ/2 (every generator is an involution);
//! * `FreeGroup(k)` — the free group of rank k, whose Cayley graph is the
//!   (2k)-regular tree;
//! * `IntegerLattice(d)` — ℤ^d with the standard generators.
//!
//! Return probabilities on the trees come from a radial recursion (the
//! distance from the start is itself a Markov chain), carried out in
//! rescaled form so that probabilities far below `f64::MIN_POSITIVE` are still
//! available as logarithms. Lattice probabilities use the exact multinomial
//! decomposition over coordinates.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::CompensatedSum;

/// Largest word alphabet we print with single letters.
const MAX_LETTERS: u32 = 26;
/// Lattice probability computations are limited to this dimension.
pub const MAX_LATTICE_DP_DIM: u32 = 3;
/// Entry cap for lattice transition tables.
const MAX_LATTICE_TABLE_ENTRIES: usize = 50_000_000;
/// Default magnitude at which [`visits_series`] stops and reports divergence.
pub const DEFAULT_TERM_GUARD: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupKind {
    RegularTree,
    FreeGroup,
    IntegerLattice,
}

/// A validated group presentation, written in configs as
/// `{"kind": "regular-tree", "param": 4}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGroupSpec")]
pub struct GroupSpec {
    pub kind: GroupKind,
    pub param: u32,
}

#[derive(Deserialize)]
struct RawGroupSpec {
    kind: GroupKind,
    param: u32,
}

impl TryFrom<RawGroupSpec> for GroupSpec {
    type Error = Error;
    fn try_from(raw: RawGroupSpec) -> Result<Self> {
        GroupSpec::new(raw.kind, raw.param)
    }
}

/// A group element in normal form.
///
/// Words are sequences of generator indices. For `RegularTree(d)` the
/// letters are `0..d`, each its own inverse. For `FreeGroup(k)` letter `2i`
/// is the i-th generator and `2i+1` its inverse. A word is reduced when no
/// letter is immediately followed by its inverse.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Elem {
    Word(Vec<u8>),
    Point(Vec<i64>),
}

impl GroupSpec {
    pub fn new(kind: GroupKind, param: u32) -> Result<Self> {
        let ok = match kind {
            GroupKind::RegularTree => (3..=MAX_LETTERS).contains(&param),
            GroupKind::FreeGroup => (2..=MAX_LETTERS).contains(&param),
            GroupKind::IntegerLattice => (1..=16).contains(&param),
        };
        if !ok {
            return Err(Error::InvalidGroup(format!("{kind:?} with parameter {param} is not supported")));
        }
        Ok(Self { kind, param })
    }

    pub fn regular_tree(d: u32) -> Result<Self> {
        Self::new(GroupKind::RegularTree, d)
    }

    pub fn free_group(k: u32) -> Result<Self> {
        Self::new(GroupKind::FreeGroup, k)
    }

    pub fn lattice(d: u32) -> Result<Self> {
        Self::new(GroupKind::IntegerLattice, d)
    }

    pub fn degree(&self) -> usize {
        match self.kind {
            GroupKind::RegularTree => self.param as usize,
            GroupKind::FreeGroup | GroupKind::IntegerLattice => 2 * self.param as usize,
        }
    }

    pub fn is_amenable(&self) -> bool {
        self.kind == GroupKind::IntegerLattice
    }

    /// Degree of the regular tree that is the Cayley graph, if any.
    pub fn tree_degree(&self) -> Option<usize> {
        match self.kind {
            GroupKind::IntegerLattice => None,
            _ => Some(self.degree()),
        }
    }

    /// `2√(d−1)/d` for trees, `1` for lattices.
    pub fn spectral_radius_closed_form(&self) -> f64 {
        match self.tree_degree() {
            Some(d) => 2.0 * ((d - 1) as f64).sqrt() / d as f64,
            None => 1.0,
        }
    }

    pub fn identity(&self) -> Elem {
        match self.kind {
            GroupKind::IntegerLattice => Elem::Point(vec![0; self.param as usize]),
            _ => Elem::Word(Vec::new()),
        }
    }

    fn inverse_letter(&self, l: u8) -> u8 {
        match self.kind {
            GroupKind::FreeGroup => l ^ 1,
            _ => l,
        }
    }

    pub fn validate(&self, x: &Elem) -> Result<()> {
        match (self.kind, x) {
            (GroupKind::IntegerLattice, Elem::Point(p)) => {
                if p.len() != self.param as usize {
                    return Err(Error::InvalidElement(format!(
                        "point of dimension {} in ℤ^{}",
                        p.len(),
                        self.param
                    )));
                }
                Ok(())
            }
            (GroupKind::IntegerLattice, Elem::Word(_)) => {
                Err(Error::InvalidElement("word given for a lattice".into()))
            }
            (_, Elem::Point(_)) => Err(Error::InvalidElement("point given for a tree group".into())),
            (_, Elem::Word(w)) => {
                let deg = self.degree();
                for (i, &l) in w.iter().enumerate() {
                    if l as usize >= deg {
                        return Err(Error::InvalidElement(format!("letter {l} out of range at position {i}")));
                    }
                    if i > 0 && w[i - 1] == self.inverse_letter(l) {
                        return Err(Error::InvalidElement(format!("word is not reduced at position {i}")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Right multiplication by generator `s` (`0 ≤ s < degree`). The input
    /// must already be valid.
    pub fn step(&self, x: &Elem, s: usize) -> Elem {
        match x {
            Elem::Word(w) => {
                let l = s as u8;
                let mut w = w.clone();
                if w.last() == Some(&self.inverse_letter(l)) {
                    w.pop();
                } else {
                    w.push(l);
                }
                Elem::Word(w)
            }
            Elem::Point(p) => {
                let mut p = p.clone();
                p[s / 2] += if s % 2 == 0 { 1 } else { -1 };
                Elem::Point(p)
            }
        }
    }

    /// All `degree` neighbours of `x`, ordered by generator index.
    pub fn neighbors(&self, x: &Elem) -> Result<Vec<Elem>> {
        self.validate(x)?;
        Ok((0..self.degree()).map(|s| self.step(x, s)).collect())
    }

    pub fn inverse(&self, x: &Elem) -> Elem {
        match x {
            Elem::Word(w) => Elem::Word(w.iter().rev().map(|&l| self.inverse_letter(l)).collect()),
            Elem::Point(p) => Elem::Point(p.iter().map(|c| -c).collect()),
        }
    }

    pub fn multiply(&self, x: &Elem, y: &Elem) -> Elem {
        match (x, y) {
            (Elem::Word(a), Elem::Word(b)) => {
                let mut w = a.clone();
                for &l in b {
                    if w.last() == Some(&self.inverse_letter(l)) {
                        w.pop();
                    } else {
                        w.push(l);
                    }
                }
                Elem::Word(w)
            }
            (Elem::Point(a), Elem::Point(b)) => Elem::Point(a.iter().zip(b).map(|(s, t)| s + t).collect()),
            _ => panic!("mixed element types"),
        }
    }

    /// Distance to the identity: word length or L¹ norm.
    pub fn norm(&self, x: &Elem) -> usize {
        match x {
            Elem::Word(w) => w.len(),
            Elem::Point(p) => p.iter().map(|c| c.unsigned_abs() as usize).sum(),
        }
    }

    pub fn distance(&self, x: &Elem, y: &Elem) -> Result<usize> {
        self.validate(x)?;
        self.validate(y)?;
        Ok(match (x, y) {
            (Elem::Word(a), Elem::Word(b)) => {
                let common = a.iter().zip(b).take_while(|(s, t)| s == t).count();
                a.len() + b.len() - 2 * common
            }
            (Elem::Point(a), Elem::Point(b)) => a.iter().zip(b).map(|(s, t)| s.abs_diff(*t) as usize).sum(),
            _ => unreachable!("validated"),
        })
    }

    /// Text form used in trace files: letters `a, b, …` (free-group inverses
    /// in upper case), `1` for the empty word, `(x,y,…)` for lattice points.
    pub fn format(&self, x: &Elem) -> String {
        match x {
            Elem::Word(w) if w.is_empty() => "1".to_string(),
            Elem::Word(w) => w
                .iter()
                .map(|&l| match self.kind {
                    GroupKind::FreeGroup if l % 2 == 1 => (b'A' + l / 2) as char,
                    GroupKind::FreeGroup => (b'a' + l / 2) as char,
                    _ => (b'a' + l) as char,
                })
                .collect(),
            Elem::Point(p) => {
                let mut s = String::from("(");
                for (i, c) in p.iter().enumerate() {
                    if i > 0 {
                        s.push(',');
                    }
                    write!(s, "{c}").unwrap();
                }
                s.push(')');
                s
            }
        }
    }

    pub fn parse(&self, s: &str) -> Result<Elem> {
        let s = s.trim();
        let x = match self.kind {
            GroupKind::IntegerLattice => {
                let inner = s
                    .strip_prefix('(')
                    .and_then(|t| t.strip_suffix(')'))
                    .ok_or_else(|| Error::InvalidElement(format!("expected (x,…), got {s:?}")))?;
                let coords = inner
                    .split(',')
                    .map(|c| c.trim().parse::<i64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| Error::InvalidElement(format!("{s:?}: {e}")))?;
                Elem::Point(coords)
            }
            _ if s == "1" => Elem::Word(Vec::new()),
            kind => {
                let mut w = Vec::with_capacity(s.len());
                for c in s.chars() {
                    let l = match (kind, c) {
                        (GroupKind::FreeGroup, 'A'..='Z') => 2 * (c as u8 - b'A') + 1,
                        (GroupKind::FreeGroup, 'a'..='z') => 2 * (c as u8 - b'a'),
                        (_, 'a'..='z') => c as u8 - b'a',
                        _ => return Err(Error::InvalidElement(format!("bad letter {c:?} in {s:?}"))),
                    };
                    w.push(l);
                }
                Elem::Word(w)
            }
        };
        self.validate(&x)?;
        Ok(x)
    }

    /// `ln p_n(x, y)`; `-∞` when the probability is zero.
    pub fn ln_return_probability(&self, n: usize, x: &Elem, y: &Elem) -> Result<f64> {
        let j = self.distance(x, y)?;
        match self.tree_degree() {
            Some(d) => Ok(*radial_ln_column(d, j, n).last().unwrap()),
            None => {
                let (Elem::Point(a), Elem::Point(b)) = (x, y) else { unreachable!("validated") };
                let z: Vec<i64> = a.iter().zip(b).map(|(s, t)| t - s).collect();
                lattice_ln_probability(n, &z)
            }
        }
    }

    /// Exact `p_n(x, y)` for the simple random walk.
    pub fn return_probability(&self, n: usize, x: &Elem, y: &Elem) -> Result<f64> {
        Ok(self.ln_return_probability(n, x, y)?.exp())
    }

    /// `ln p_n(e, e)` for `n = 0..=n_max`.
    pub fn ln_return_series(&self, n_max: usize) -> Result<Vec<f64>> {
        match self.tree_degree() {
            Some(d) => Ok(radial_ln_column(d, 0, n_max)),
            None => {
                let z = vec![0i64; self.param as usize];
                (0..=n_max).map(|n| lattice_ln_probability(n, &z)).collect()
            }
        }
    }
}

/// Radial recursion for the d-regular tree.
///
/// Writes `p_n(j)` for the probability of being at one particular vertex at
/// distance `j` after `n` steps. With `s(j) = p(j)·(d−1)^{j/2}` the update is
/// `s'(0) = s(1)/√(d−1)`, `s'(1) = (√(d−1)/d)(s(0) + s(2))` and
/// `s'(j) = (√(d−1)/d)(s(j−1) + s(j+1))`, whose coefficients are all O(1). The
/// vector is renormalised every step and the logarithm of the scale carried
/// separately.
struct RadialDp {
    s: Vec<f64>,
    log_scale: CompensatedSum,
    n: usize,
    c: f64,
    inv_sqrt: f64,
    half_ln_dm1: f64,
}

impl RadialDp {
    fn new(d: usize, capacity: usize) -> Self {
        let sq = ((d - 1) as f64).sqrt();
        let mut s = vec![0.0; capacity + 3];
        s[0] = 1.0;
        Self {
            s,
            log_scale: CompensatedSum::new(),
            n: 0,
            c: sq / d as f64,
            inv_sqrt: 1.0 / sq,
            half_ln_dm1: 0.5 * ((d - 1) as f64).ln(),
        }
    }

    fn ln_p(&self, j: usize) -> f64 {
        if j > self.n || (self.n - j) % 2 == 1 || self.s[j] == 0.0 {
            return f64::NEG_INFINITY;
        }
        self.s[j].ln() + self.log_scale.value() - j as f64 * self.half_ln_dm1
    }

    fn advance(&mut self) {
        let top = (self.n + 1).min(self.s.len() - 2);
        let mut next = vec![0.0; self.s.len()];
        next[0] = self.s[1] * self.inv_sqrt;
        if top >= 1 {
            next[1] = self.c * (self.s[0] + self.s[2]);
        }
        for j in 2..=top {
            next[j] = self.c * (self.s[j - 1] + self.s[j + 1]);
        }
        let max = next.iter().cloned().fold(0.0, f64::max);
        for v in next.iter_mut() {
            *v /= max;
        }
        self.log_scale.add(max.ln());
        self.s = next;
        self.n += 1;
    }
}

/// `ln p_n(j)` for `n = 0..=n_max` at a fixed distance `j` on the d-regular
/// tree.
pub fn radial_ln_column(d: usize, j: usize, n_max: usize) -> Vec<f64> {
    assert!(d >= 3, "radial recursion needs d ≥ 3");
    // Distances above n_max are never reached; distances above (n_max + j)/2 + 1
    // cannot come back to j in time, so the state can be truncated there.
    let cap = ((n_max + j) / 2 + 2).min(n_max + 1);
    let mut dp = RadialDp::new(d, cap.max(j + 1));
    let mut out = Vec::with_capacity(n_max + 1);
    out.push(dp.ln_p(j));
    for _ in 0..n_max {
        dp.advance();
        out.push(dp.ln_p(j));
    }
    out
}


#[derive(Debug, Clone)]
enum TableData {
    /// `ln_p[n][j]` for `0 ≤ j ≤ n`.
    Radial { degree: usize, ln_p: Vec<Vec<f64>> },
    /// Flattened box of side `2N+1` per step.
    Lattice { side: usize, p: Vec<Vec<f64>> },
}

/// Immutable table of n-step transition probabilities for `n ≤ N`.
#[derive(Debug, Clone)]
pub struct TransitionTable {
    group: GroupSpec,
    n_max: usize,
    data: TableData,
}

impl TransitionTable {
    pub fn new(group: GroupSpec, n_max: usize) -> Result<Self> {
        let data = match group.tree_degree() {
            Some(d) => {
                let mut dp = RadialDp::new(d, n_max + 1);
                let mut ln_p = Vec::with_capacity(n_max + 1);
                for n in 0..=n_max {
                    if n > 0 {
                        dp.advance();
                    }
                    ln_p.push((0..=n).map(|j| dp.ln_p(j)).collect());
                }
                TableData::Radial { degree: d, ln_p }
            }
            None => {
                let dim = group.param as usize;
                if group.param > MAX_LATTICE_DP_DIM {
                    return Err(Error::TooLarge(format!("lattice tables need dimension ≤ {MAX_LATTICE_DP_DIM}")));
                }
                let side = 2 * n_max + 1;
                let cells = side.pow(dim as u32);
                if cells.saturating_mul(n_max + 1) > MAX_LATTICE_TABLE_ENTRIES {
                    return Err(Error::TooLarge(format!("lattice table with {} entries", cells * (n_max + 1))));
                }
                let strides: Vec<usize> = (0..dim).map(|i| side.pow(i as u32)).collect();
                let mut cur = vec![0.0; cells];
                let origin: usize = strides.iter().map(|s| s * n_max).sum();
                cur[origin] = 1.0;
                let mut p = vec![cur.clone()];
                let w = 1.0 / (2 * dim) as f64;
                for _ in 0..n_max {
                    let mut next = vec![0.0; cells];
                    for (idx, &v) in cur.iter().enumerate() {
                        if v == 0.0 {
                            continue;
                        }
                        for &st in &strides {
                            let coord = (idx / st) % side;
                            if coord + 1 < side {
                                next[idx + st] += w * v;
                            }
                            if coord > 0 {
                                next[idx - st] += w * v;
                            }
                        }
                    }
                    p.push(next.clone());
                    cur = next;
                }
                TableData::Lattice { side, p }
            }
        };
        Ok(Self { group, n_max, data })
    }

    pub fn group(&self) -> GroupSpec {
        self.group
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// `p_n(x, y)` for `n ≤ N`.
    pub fn prob(&self, n: usize, x: &Elem, y: &Elem) -> Result<f64> {
        if n > self.n_max {
            return Err(Error::Domain(format!("step {n} beyond table size {}", self.n_max)));
        }
        let j = self.group.distance(x, y)?;
        Ok(match &self.data {
            TableData::Radial { ln_p, .. } => ln_p[n].get(j).map_or(0.0, |l| l.exp()),
            TableData::Lattice { side, p, .. } => {
                let (Elem::Point(a), Elem::Point(b)) = (x, y) else { unreachable!("validated") };
                let mut idx = 0usize;
                let mut stride = 1usize;
                for (s, t) in a.iter().zip(b) {
                    let off = t - s + self.n_max as i64;
                    if off < 0 || off as usize >= *side {
                        return Ok(0.0);
                    }
                    idx += off as usize * stride;
                    stride *= side;
                }
                p[n][idx]
            }
        })
    }

    /// Σ over all reachable targets of `p_n(e, ·)`.
    pub fn total_mass(&self, n: usize) -> f64 {
        match &self.data {
            TableData::Radial { degree, ln_p } => {
                let d = *degree as f64;
                let mut sum = CompensatedSum::new();
                for (j, &l) in ln_p[n].iter().enumerate() {
                    let ln_sphere = if j == 0 { 0.0 } else { d.ln() + (j - 1) as f64 * (d - 1.0).ln() };
                    sum.add((l + ln_sphere).exp());
                }
                sum.value()
            }
            TableData::Lattice { p, .. } => p[n].iter().copied().collect::<CompensatedSum>().value(),
        }
    }
}

/// `ln k!` for `k = 0..=n`.
fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = CompensatedSum::new();
    out.push(0.0);
    for k in 1..=n {
        acc.add((k as f64).ln());
        out.push(acc.value());
    }
    out
}

/// ln of the probability that a one-dimensional walk of `m` steps ends at `z`.
fn ln_line(lf: &[f64], m: usize, z: i64) -> f64 {
    let z = z.unsigned_abs() as usize;
    if z > m || (m - z) % 2 == 1 {
        return f64::NEG_INFINITY;
    }
    let up = (m + z) / 2;
    lf[m] - lf[up] - lf[m - up] - m as f64 * std::f64::consts::LN_2
}

fn ln_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let s: CompensatedSum = terms.iter().map(|t| (t - max).exp()).collect();
    max + s.value().ln()
}

/// Exact `ln p_n(0, z)` on ℤ^d via the split of the n steps among the
/// coordinates: a multinomial(n; 1/d,…,1/d) allocation followed by
/// independent one-dimensional walks.
fn lattice_ln_probability(n: usize, z: &[i64]) -> Result<f64> {
    let dim = z.len();
    if dim as u32 > MAX_LATTICE_DP_DIM {
        return Err(Error::TooLarge(format!("lattice probabilities need dimension ≤ {MAX_LATTICE_DP_DIM}")));
    }
    let lf = ln_factorials(n);
    let ln_dim = (dim as f64).ln();
    let mut terms = Vec::new();
    match dim {
        1 => return Ok(ln_line(&lf, n, z[0])),
        2 => {
            for a in 0..=n {
                let b = n - a;
                terms.push(lf[n] - lf[a] - lf[b] - n as f64 * ln_dim + ln_line(&lf, a, z[0]) + ln_line(&lf, b, z[1]));
            }
        }
        3 => {
            for a in 0..=n {
                let la = ln_line(&lf, a, z[0]);
                if la == f64::NEG_INFINITY {
                    continue;
                }
                for b in 0..=n - a {
                    let c = n - a - b;
                    terms.push(
                        lf[n] - lf[a] - lf[b] - lf[c] - n as f64 * ln_dim
                            + la
                            + ln_line(&lf, b, z[1])
                            + ln_line(&lf, c, z[2]),
                    );
                }
            }
        }
        _ => unreachable!("dimension checked"),
    }
    Ok(ln_sum_exp(&terms))
}

/// Spectral radius estimate `p_{2n}(e,e)^{1/2n}` with the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralEstimate {
    pub n_max: usize,
    pub estimate: f64,
    pub closed_form: Option<f64>,
}

/// `p_{2n}(e,e)^{1/(2n)}` for `n = 1..=n_max`, as `(2n, estimate)` rows.
pub fn spectral_estimates(g: GroupSpec, n_max: usize) -> Result<Vec<(usize, f64)>> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be at least 1".into()));
    }
    let ln_p = g.ln_return_series(2 * n_max)?;
    Ok((1..=n_max).map(|n| (2 * n, (ln_p[2 * n] / (2 * n) as f64).exp())).collect())
}

pub fn spectral_radius(g: GroupSpec, n_max: usize) -> Result<SpectralEstimate> {
    let rows = spectral_estimates(g, n_max)?;
    Ok(SpectralEstimate { n_max, estimate: rows.last().unwrap().1, closed_form: Some(g.spectral_radius_closed_form()) })
}

/// Partial sums `S_0..S_N` of `Σ meanⁿ p_n(e,e)`, stopping with
/// [`Error::DivergenceSuspected`] once a term exceeds [`DEFAULT_TERM_GUARD`].
pub fn visits_series(g: GroupSpec, mean: f64, n: usize) -> Result<Vec<f64>> {
    visits_series_guarded(g, mean, n, DEFAULT_TERM_GUARD)
}

pub fn visits_series_guarded(g: GroupSpec, mean: f64, n: usize, term_guard: f64) -> Result<Vec<f64>> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::Domain(format!("mean must be finite and non-negative, got {mean}")));
    }
    let ln_p = g.ln_return_series(n)?;
    let ln_mean = mean.ln();
    let mut acc = CompensatedSum::new();
    let mut out = Vec::with_capacity(n + 1);
    for (k, &lp) in ln_p.iter().enumerate() {
        let term = if k == 0 { lp.exp() } else if lp == f64::NEG_INFINITY || mean == 0.0 { 0.0 } else { (k as f64 * ln_mean + lp).exp() };
        acc.add(term);
        if term > term_guard {
            return Err(Error::DivergenceSuspected { index: k, partial_sum: acc.value() });
        }
        out.push(acc.value());
    }
    Ok(out)
}

/// Writes `(n, value)` rows as CSV.
pub fn write_series_csv<W: Write>(out: W, rows: &[(usize, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n", "value"])?;
    for (n, v) in rows {
        w.write_record([n.to_string(), format!("{v:.17e}")])?;
    }
    w.flush()?;
    Ok(())
}
