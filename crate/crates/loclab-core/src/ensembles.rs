//! Site distributions and non-stationary potential ensembles.
//!
//! Distributions are exact mixtures of atoms and uniform pieces on `[0, M]`.
//! This representation is closed under the Bernoulli-decomposition
//! construction and admits exact CDF/inverse-CDF algebra, so all
//! anti-concentration and variance functionals below are computed on a
//! finite candidate set rather than by grid search.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::geometry::{Site, Square};
use crate::math;
use crate::rng;

const MASS_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum EnsembleError {
    BadMass(f64),
    BadSupport,
    BadParameter,
    FrozenOutOfRange { site: Site, value: f64 },
    UnresolvedSite(Site),
}

impl fmt::Display for EnsembleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EnsembleError::BadMass(m) => write!(f, "total mass {m} is not 1"),
            EnsembleError::BadSupport => write!(f, "support escapes [0, M]"),
            EnsembleError::BadParameter => write!(f, "parameter outside its domain"),
            EnsembleError::FrozenOutOfRange { site, value } => {
                write!(f, "frozen value {value} at ({}, {}) outside [0, M]", site.x, site.y)
            }
            EnsembleError::UnresolvedSite(site) => {
                write!(f, "ensemble does not resolve site ({}, {})", site.x, site.y)
            }
        }
    }
}

/// A bounded law on `[0, M]`: point masses plus uniform pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct SiteDistribution {
    atoms: Vec<(f64, f64)>,
    pieces: Vec<(f64, f64, f64)>,
    bound: f64,
}

impl SiteDistribution {
    pub fn new(
        atoms: Vec<(f64, f64)>,
        pieces: Vec<(f64, f64, f64)>,
        bound: f64,
    ) -> Result<Self, EnsembleError> {
        let d = Self::from_parts_unchecked(atoms, pieces, bound)?;
        let in_bound = d.atoms.iter().all(|&(loc, _)| loc >= 0.0 && loc <= bound)
            && d.pieces.iter().all(|&(lo, hi, _)| lo >= 0.0 && hi <= bound);
        if !in_bound || bound <= 0.0 {
            return Err(EnsembleError::BadSupport);
        }
        Ok(d)
    }

    /// Internal constructor that allows supports outside `[0, M]`; used for
    /// the reflection trick in the decomposition and never exposed.
    pub(crate) fn from_parts_unchecked(
        mut atoms: Vec<(f64, f64)>,
        mut pieces: Vec<(f64, f64, f64)>,
        bound: f64,
    ) -> Result<Self, EnsembleError> {
        atoms.retain(|&(_, m)| m != 0.0);
        pieces.retain(|&(_, _, m)| m != 0.0);
        if pieces.iter().any(|&(lo, hi, _)| hi <= lo) {
            return Err(EnsembleError::BadParameter);
        }
        if atoms.iter().any(|&(_, m)| m < 0.0) || pieces.iter().any(|&(_, _, m)| m < 0.0) {
            return Err(EnsembleError::BadParameter);
        }
        let total: f64 = atoms.iter().map(|&(_, m)| m).sum::<f64>()
            + pieces.iter().map(|&(_, _, m)| m).sum::<f64>();
        if math::abs(total - 1.0) > MASS_TOL {
            return Err(EnsembleError::BadMass(total));
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pieces.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        Ok(SiteDistribution { atoms, pieces, bound })
    }

    pub fn point_mass(c: f64, bound: f64) -> Self {
        SiteDistribution::new(alloc::vec![(c, 1.0)], Vec::new(), bound).expect("valid point mass")
    }

    /// Two-point law `(1-p)·δ_lo + p·δ_hi`.
    pub fn two_point(lo: f64, hi: f64, p: f64, bound: f64) -> Self {
        SiteDistribution::new(alloc::vec![(lo, 1.0 - p), (hi, p)], Vec::new(), bound)
            .expect("valid two-point law")
    }

    pub fn bernoulli_half() -> Self {
        SiteDistribution::two_point(0.0, 1.0, 0.5, 1.0)
    }

    pub fn uniform(lo: f64, hi: f64, bound: f64) -> Self {
        SiteDistribution::new(Vec::new(), alloc::vec![(lo, hi, 1.0)], bound)
            .expect("valid uniform law")
    }

    pub fn uniform_01() -> Self {
        SiteDistribution::uniform(0.0, 1.0, 1.0)
    }

    /// `⅓(δ_0 + δ_{1/2} + δ_1)`.
    pub fn three_atom() -> Self {
        SiteDistribution::new(
            alloc::vec![(0.0, 1.0 / 3.0), (0.5, 1.0 / 3.0), (1.0, 1.0 / 3.0)],
            Vec::new(),
            1.0,
        )
        .expect("valid three-atom law")
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn pieces(&self) -> &[(f64, f64, f64)] {
        &self.pieces
    }

    /// `P[X ≤ u]`.
    pub fn cdf(&self, u: f64) -> f64 {
        let mut c = 0.0;
        for &(loc, m) in &self.atoms {
            if loc <= u {
                c += m;
            }
        }
        for &(lo, hi, m) in &self.pieces {
            if u >= hi {
                c += m;
            } else if u > lo {
                c += m * (u - lo) / (hi - lo);
            }
        }
        c
    }

    /// `P[X < u]`.
    pub fn cdf_left(&self, u: f64) -> f64 {
        let mut c = 0.0;
        for &(loc, m) in &self.atoms {
            if loc < u {
                c += m;
            }
        }
        for &(lo, hi, m) in &self.pieces {
            if u >= hi {
                c += m;
            } else if u > lo {
                c += m * (u - lo) / (hi - lo);
            }
        }
        c
    }

    /// Mass of the closed interval `[lo, hi]`.
    pub fn interval_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi < lo {
            return 0.0;
        }
        self.cdf(hi) - self.cdf_left(lo)
    }

    /// Sorted distinct locations where the CDF changes slope or jumps.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut bs: Vec<f64> = self
            .atoms
            .iter()
            .map(|&(loc, _)| loc)
            .chain(self.pieces.iter().flat_map(|&(lo, hi, _)| [lo, hi]))
            .collect();
        bs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        bs.dedup_by(|a, b| *a == *b);
        bs
    }

    /// The quantile function `G(t) = inf{u : P[X ≤ u] ≥ t}` for `t ∈ (0, 1)`;
    /// left-continuous and nondecreasing, with `G(t) ≤ u ⇔ P[X ≤ u] ≥ t`.
    pub fn inverse_cdf(&self, t: f64) -> Result<f64, EnsembleError> {
        if !(t > 0.0 && t < 1.0) {
            return Err(EnsembleError::BadParameter);
        }
        let bs = self.breakpoints();
        debug_assert!(!bs.is_empty());
        if self.cdf(bs[0]) >= t {
            return Ok(bs[0]);
        }
        for w in bs.windows(2) {
            let (b0, b1) = (w[0], w[1]);
            let c1_left = self.cdf_left(b1);
            if c1_left >= t {
                // The CDF climbs linearly on (b0, b1).
                let c0 = self.cdf(b0);
                debug_assert!(c1_left > c0);
                return Ok(b0 + (t - c0) / (c1_left - c0) * (b1 - b0));
            }
            if self.cdf(b1) >= t {
                return Ok(b1);
            }
        }
        // Only reachable through rounding at t near 1; the essential sup.
        Ok(*bs.last().unwrap())
    }

    pub fn mean(&self) -> f64 {
        let a: f64 = self.atoms.iter().map(|&(loc, m)| loc * m).sum();
        let p: f64 = self.pieces.iter().map(|&(lo, hi, m)| m * (lo + hi) / 2.0).sum();
        a + p
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        let a: f64 = self.atoms.iter().map(|&(loc, m)| m * (loc - mu) * (loc - mu)).sum();
        let p: f64 = self
            .pieces
            .iter()
            .map(|&(lo, hi, m)| {
                let c = (lo + hi) / 2.0 - mu;
                m * (c * c + (hi - lo) * (hi - lo) / 12.0)
            })
            .sum();
        a + p
    }
}

/// Exact anti-concentration remainder `ρ*(γ) = inf_{t ∈ [0,M]} P[|X-t| > γ/2]`.
///
/// The captured-window mass is upper semicontinuous and piecewise linear in
/// `t`, so its supremum is attained on the candidate set built from the
/// distribution breakpoints shifted by `±γ/2`.
pub fn anti_concentration(dist: &SiteDistribution, gamma: f64) -> Result<f64, EnsembleError> {
    if gamma <= 0.0 {
        return Err(EnsembleError::BadParameter);
    }
    let half = gamma / 2.0;
    let m = dist.bound();
    let mut candidates: Vec<f64> = Vec::new();
    for b in dist.breakpoints() {
        candidates.push(b - half);
        candidates.push(b + half);
        candidates.push(b);
    }
    candidates.push(0.0);
    candidates.push(m);
    let mut best_window = 0.0f64;
    for t in candidates {
        let t = t.max(0.0).min(m);
        let w = dist.interval_mass(t - half, t + half);
        if w > best_window {
            best_window = w;
        }
    }
    Ok((1.0 - best_window).max(0.0))
}

/// Exact variance with the second-moment-method resonance bound
/// `min_r P[|X - r| ≥ σ/2] ≥ (9/16)·σ⁴/(σ⁴ + M⁴)` and the
/// anti-concentration-implied variance bound `max_γ ρ*(γ)·γ²/4`.
#[derive(Clone, Copy, Debug)]
pub struct VarianceAcReport {
    pub var: f64,
    pub pz_bound: f64,
    /// `inf_r P[|X - r| ≥ σ/2]`, evaluated exactly via one-sided limits at
    /// the breakpoints of the piecewise-linear objective.
    pub pz_actual: f64,
    pub ac_implied_var: f64,
}

pub fn variance_ac_bounds(dist: &SiteDistribution) -> VarianceAcReport {
    let var = dist.variance();
    let m = dist.bound();
    let sigma4 = var * var;
    let m4 = m * m * m * m;
    let pz_bound = if sigma4 + m4 > 0.0 { 9.0 / 16.0 * sigma4 / (sigma4 + m4) } else { 0.0 };

    let half = math::sqrt(var.max(0.0)) / 2.0;
    let mut pz_actual = f64::INFINITY;
    let mut candidates: Vec<f64> = Vec::new();
    for b in dist.breakpoints() {
        candidates.push(b - half);
        candidates.push(b + half);
    }
    candidates.push(0.0);
    candidates.push(m);
    candidates.push(dist.mean());
    for r in candidates {
        // g(r) = P[X ≤ r - σ/2] + P[X ≥ r + σ/2] and its one-sided limits.
        let at = dist.cdf(r - half) + 1.0 - dist.cdf_left(r + half);
        let left = dist.cdf_left(r - half) + 1.0 - dist.cdf_left(r + half);
        let right = dist.cdf(r - half) + 1.0 - dist.cdf(r + half);
        pz_actual = pz_actual.min(at).min(left).min(right);
    }

    let mut ac_implied_var = 0.0f64;
    let mut g = m / 64.0;
    while g <= 2.0 * m {
        if let Ok(rho) = anti_concentration(dist, g) {
            ac_implied_var = ac_implied_var.max(rho * g * g / 4.0);
        }
        g *= 2.0;
    }
    VarianceAcReport { var, pz_bound, pz_actual, ac_implied_var }
}

/// Largest distance between two CDFs, probed just off the union of their
/// breakpoints. For piecewise-linear CDFs the supremum is attained at a
/// breakpoint's one-sided limits; probing at `±1e-12` captures them while
/// letting one-ulp rounding of reconstructed atom locations pass as equal
/// rather than as a jump-sized discrepancy.
pub fn sup_cdf_distance(a: &SiteDistribution, b: &SiteDistribution) -> f64 {
    const PROBE: f64 = 1e-12;
    let mut points = a.breakpoints();
    points.extend(b.breakpoints());
    points.sort_by(|x, y| x.partial_cmp(y).unwrap());
    points.dedup_by(|x, y| *x == *y);
    let mut sup: f64 = 0.0;
    for u in points {
        sup = sup.max(math::abs(a.cdf(u - PROBE) - b.cdf(u - PROBE)));
        sup = sup.max(math::abs(a.cdf(u + PROBE) - b.cdf(u + PROBE)));
    }
    sup
}

/// Assignment rule of a site distribution to every lattice site.
#[derive(Clone, Debug)]
pub enum EnsembleSpec {
    Iid(SiteDistribution),
    /// Distribution index by `(x mod width, y mod height)`, row-major into
    /// `indices`, resolved through the palette.
    Periodic {
        width: i64,
        height: i64,
        indices: Vec<usize>,
        palette: Vec<SiteDistribution>,
    },
    /// `left` for `x < boundary_column`, `right` otherwise.
    Interface {
        left: SiteDistribution,
        right: SiteDistribution,
        boundary_column: i64,
    },
    /// Explicit per-site overrides on top of a default palette entry.
    Custom {
        assignments: BTreeMap<Site, usize>,
        default: usize,
        palette: Vec<SiteDistribution>,
    },
}

impl EnsembleSpec {
    /// The alternating-parity ensemble: the two-point law on even-parity
    /// sites and the uniform law on odd-parity sites.
    pub fn checkerboard() -> Self {
        EnsembleSpec::Periodic {
            width: 2,
            height: 2,
            indices: alloc::vec![0, 1, 1, 0],
            palette: alloc::vec![
                SiteDistribution::bernoulli_half(),
                SiteDistribution::uniform_01()
            ],
        }
    }

    pub fn dist_at(&self, site: Site) -> Result<&SiteDistribution, EnsembleError> {
        match self {
            EnsembleSpec::Iid(d) => Ok(d),
            EnsembleSpec::Periodic { width, height, indices, palette } => {
                let ix = site.x.rem_euclid(*width);
                let iy = site.y.rem_euclid(*height);
                let idx = indices
                    .get((iy * width + ix) as usize)
                    .copied()
                    .ok_or(EnsembleError::UnresolvedSite(site))?;
                palette.get(idx).ok_or(EnsembleError::UnresolvedSite(site))
            }
            EnsembleSpec::Interface { left, right, boundary_column } => {
                Ok(if site.x < *boundary_column { left } else { right })
            }
            EnsembleSpec::Custom { assignments, default, palette } => {
                let idx = assignments.get(&site).copied().unwrap_or(*default);
                palette.get(idx).ok_or(EnsembleError::UnresolvedSite(site))
            }
        }
    }

    /// Uniform essential-range bound over every distribution in play.
    pub fn bound(&self) -> f64 {
        match self {
            EnsembleSpec::Iid(d) => d.bound(),
            EnsembleSpec::Periodic { palette, .. } | EnsembleSpec::Custom { palette, .. } => {
                palette.iter().map(|d| d.bound()).fold(0.0, f64::max)
            }
            EnsembleSpec::Interface { left, right, .. } => left.bound().max(right.bound()),
        }
    }
}

/// Fixed potential values on a frozen set of sites.
#[derive(Clone, Debug, Default)]
pub struct FrozenAssignment {
    values: BTreeMap<Site, f64>,
}

impl FrozenAssignment {
    pub fn new() -> Self {
        FrozenAssignment { values: BTreeMap::new() }
    }

    pub fn from_values<I: IntoIterator<Item = (Site, f64)>>(iter: I) -> Self {
        FrozenAssignment { values: iter.into_iter().collect() }
    }

    pub fn set(&mut self, site: Site, value: f64) {
        self.values.insert(site, value);
    }

    pub fn get(&self, site: Site) -> Option<f64> {
        self.values.get(&site).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        self.values.keys().copied()
    }
}

/// A realized potential on a box, with its sampling provenance.
#[derive(Clone, Debug)]
pub struct PotentialField {
    pub bx: Square,
    values: Vec<f64>,
    pub seed: u64,
    pub replica: u64,
}

impl PotentialField {
    pub fn value(&self, site: Site) -> f64 {
        self.values[self.bx.index_of(site).expect("site inside the field's box")]
    }

    pub fn get(&self, site: Site) -> Option<f64> {
        self.bx.index_of(site).map(|i| self.values[i])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Field with every value shifted by a constant.
    pub fn shifted(&self, c: f64) -> PotentialField {
        PotentialField {
            bx: self.bx,
            values: self.values.iter().map(|v| v + c).collect(),
            seed: self.seed,
            replica: self.replica,
        }
    }

    pub fn from_values(bx: Square, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), (bx.side * bx.side) as usize);
        PotentialField { bx, values, seed: 0, replica: 0 }
    }
}

/// Sample a potential on a box: unfrozen sites draw independently through
/// the inverse CDF of their site law, keyed by `(seed, site, replica)`;
/// frozen sites copy the assignment verbatim.
pub fn sample_potential(
    spec: &EnsembleSpec,
    bx: &Square,
    frozen: &FrozenAssignment,
    seed: u64,
    replica: u64,
) -> Result<PotentialField, EnsembleError> {
    let bound = spec.bound();
    let mut values = Vec::with_capacity((bx.side * bx.side) as usize);
    for site in bx.sites() {
        if let Some(v) = frozen.get(site) {
            if !(0.0..=bound).contains(&v) {
                return Err(EnsembleError::FrozenOutOfRange { site, value: v });
            }
            values.push(v);
        } else {
            let t = rng::site_uniform(seed, replica, site);
            values.push(spec.dist_at(site)?.inverse_cdf(t)?);
        }
    }
    Ok(PotentialField { bx: *bx, values, seed, replica })
}

/// Sample values on an arbitrary collection of sites (used by the tilted
/// propagation domains). Keying is per site, so the result is independent
/// of iteration order and consistent with [`sample_potential`].
pub fn sample_on_sites<I: IntoIterator<Item = Site>>(
    spec: &EnsembleSpec,
    sites: I,
    frozen: &FrozenAssignment,
    seed: u64,
    replica: u64,
) -> Result<BTreeMap<Site, f64>, EnsembleError> {
    let bound = spec.bound();
    let mut map = BTreeMap::new();
    for site in sites {
        let v = if let Some(v) = frozen.get(site) {
            if !(0.0..=bound).contains(&v) {
                return Err(EnsembleError::FrozenOutOfRange { site, value: v });
            }
            v
        } else {
            let t = rng::site_uniform(seed, replica, site);
            spec.dist_at(site)?.inverse_cdf(t)?
        };
        map.insert(site, v);
    }
    Ok(map)
}
