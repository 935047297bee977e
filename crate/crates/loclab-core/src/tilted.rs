//! Eigenfunction propagation on tilted rectangles.
//!
//! On a tilted rectangle `R`, values on the west boundary (the first two
//! s-diagonals and the first two t-diagonals) extend uniquely to a field
//! satisfying `Hψ = Eψ` at every interior site. The sweep solves each
//! interior equation for its north-east neighbor:
//!
//! `ψ(s,t) = (4 + V(s-1,t-1) - E)·ψ(s-1,t-1) - ψ(s-2,t-2) - ψ(s,t-2) - ψ(s-2,t)`
//!
//! derived directly from the standard-coordinate equation; any sweep order
//! respecting the dependency partial order produces the same field.
//!
//! Residuals here are relative to `max(1, ‖ψ‖_∞)`: the extension grows
//! exponentially in the rectangle dimensions, so absolute residuals scale
//! with the field.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::ensembles::{sample_on_sites, sample_potential, EnsembleSpec, FrozenAssignment};
use crate::geometry::{GeometryError, ScaleFactor, Site, Square, TiltedRect};
use crate::math;
use crate::rng::KeyedStream;
use crate::spectral::{assemble, eigensolve, SpectralError};

#[derive(Clone, Debug, PartialEq)]
pub enum TiltedError {
    Degenerate,
    MissingBoundary { s: i64, t: i64 },
    MissingPotential { s: i64, t: i64 },
    BoundaryNotZero { s: i64, t: i64 },
    ZeroField,
    EmptyDenominator,
    BadParameter,
    InsufficientSamples,
    Spectral(SpectralError),
    Geometry(GeometryError),
}

impl fmt::Display for TiltedError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TiltedError::Degenerate => write!(f, "rectangle too small to extend"),
            TiltedError::MissingBoundary { s, t } => {
                write!(f, "boundary datum missing at (s, t) = ({s}, {t})")
            }
            TiltedError::MissingPotential { s, t } => {
                write!(f, "potential missing at (s, t) = ({s}, {t})")
            }
            TiltedError::BoundaryNotZero { s, t } => {
                write!(f, "datum at ({s}, {t}) must vanish on the first two diagonals")
            }
            TiltedError::ZeroField => write!(f, "field is identically zero"),
            TiltedError::EmptyDenominator => write!(f, "no unfrozen sites on the target diagonals"),
            TiltedError::BadParameter => write!(f, "parameter outside its domain"),
            TiltedError::InsufficientSamples => write!(f, "need at least 20 samples per cell"),
            TiltedError::Spectral(e) => write!(f, "{e}"),
            TiltedError::Geometry(e) => write!(f, "{e}"),
        }
    }
}

impl From<SpectralError> for TiltedError {
    fn from(e: SpectralError) -> Self {
        TiltedError::Spectral(e)
    }
}

impl From<GeometryError> for TiltedError {
    fn from(e: GeometryError) -> Self {
        TiltedError::Geometry(e)
    }
}

/// Values prescribed on the west boundary, keyed by tilted coordinates.
#[derive(Clone, Debug, Default)]
pub struct WestBoundaryData {
    values: BTreeMap<(i64, i64), f64>,
}

impl WestBoundaryData {
    pub fn new() -> Self {
        WestBoundaryData { values: BTreeMap::new() }
    }

    pub fn set(&mut self, s: i64, t: i64, value: f64) {
        self.values.insert((s, t), value);
    }

    pub fn get(&self, s: i64, t: i64) -> Option<f64> {
        self.values.get(&(s, t)).copied()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.values().fold(0.0f64, |a, &v| a.max(math::abs(v)))
    }

    /// Zero data on the whole west boundary of `rect`.
    pub fn zeros(rect: &TiltedRect) -> Self {
        let mut data = WestBoundaryData::new();
        for p in rect.west_boundary().iter() {
            let (s, t) = p.to_tilted();
            data.set(s, t, 0.0);
        }
        data
    }

    /// Random data: zero on the first two t-diagonals, uniform on the rest
    /// of the west boundary, normalized to unit sup norm.
    pub fn random_off_first_diagonals(rect: &TiltedRect, stream: &mut KeyedStream) -> Self {
        let mut data = WestBoundaryData::zeros(rect);
        let mut peak = 0.0f64;
        let mut entries = Vec::new();
        for p in rect.west_boundary().iter() {
            let (s, t) = p.to_tilted();
            if t >= rect.t_lo + 2 {
                let v = stream.next_signed();
                peak = peak.max(math::abs(v));
                entries.push((s, t, v));
            }
        }
        if peak > 0.0 {
            for (s, t, v) in entries {
                data.set(s, t, v / peak);
            }
        }
        data
    }

    pub fn scaled(&self, factor: f64) -> Self {
        WestBoundaryData {
            values: self.values.iter().map(|(&k, &v)| (k, v * factor)).collect(),
        }
    }

    pub fn plus(&self, other: &WestBoundaryData) -> Self {
        let mut values = self.values.clone();
        for (&k, &v) in &other.values {
            *values.entry(k).or_insert(0.0) += v;
        }
        WestBoundaryData { values }
    }
}

/// A real field on every site of a tilted rectangle.
#[derive(Clone, Debug)]
pub struct TiltedField {
    pub rect: TiltedRect,
    values: BTreeMap<(i64, i64), f64>,
}

impl TiltedField {
    pub fn value(&self, s: i64, t: i64) -> f64 {
        self.values[&(s, t)]
    }

    pub fn get(&self, s: i64, t: i64) -> Option<f64> {
        self.values.get(&(s, t)).copied()
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.values().fold(0.0f64, |a, &v| a.max(math::abs(v)))
    }

    pub fn iter(&self) -> impl Iterator<Item = ((i64, i64), f64)> + '_ {
        self.values.iter().map(|(&k, &v)| (k, v))
    }

    /// Sup norm of the restriction to the west data diagonals
    /// `s ∈ {s_lo, s_lo+1}`, `t ≥ t_lo+2`.
    pub fn west_column_norm(&self) -> f64 {
        self.values
            .iter()
            .filter(|(&(s, t), _)| s <= self.rect.s_lo + 1 && t >= self.rect.t_lo + 2)
            .fold(0.0f64, |a, (_, &v)| a.max(math::abs(v)))
    }
}

/// Potential values on tilted sites.
pub type TiltedPotential = BTreeMap<Site, f64>;

fn potential_at(v: &TiltedPotential, s: i64, t: i64) -> Result<f64, TiltedError> {
    let site = crate::geometry::from_tilted(s, t).map_err(|_| TiltedError::MissingPotential { s, t })?;
    v.get(&site).copied().ok_or(TiltedError::MissingPotential { s, t })
}

/// Unique extension of west-boundary data to an eigenfield on the
/// rectangle. Linear in the data.
pub fn extend_from_west(
    rect: &TiltedRect,
    data: &WestBoundaryData,
    e: f64,
    v: &TiltedPotential,
) -> Result<TiltedField, TiltedError> {
    let (a, b) = rect.dims();
    if a < 3 || b < 3 {
        return Err(TiltedError::Degenerate);
    }
    let mut values: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for s in rect.s_lo..=rect.s_hi {
        for t in rect.t_lo..=rect.t_hi {
            if (s + t).rem_euclid(2) != 0 {
                continue;
            }
            if s <= rect.s_lo + 1 || t <= rect.t_lo + 1 {
                let val = data.get(s, t).ok_or(TiltedError::MissingBoundary { s, t })?;
                values.insert((s, t), val);
            } else {
                let center = values[&(s - 1, t - 1)];
                let pot = potential_at(v, s - 1, t - 1)?;
                let val = (4.0 + pot - e) * center
                    - values[&(s - 2, t - 2)]
                    - values[&(s, t - 2)]
                    - values[&(s - 2, t)];
                values.insert((s, t), val);
            }
        }
    }
    Ok(TiltedField { rect: *rect, values })
}

/// Worst interior eigen-equation defect, relative to `max(1, ‖ψ‖_∞)`.
pub fn interior_residual(
    field: &TiltedField,
    e: f64,
    v: &TiltedPotential,
) -> Result<f64, TiltedError> {
    let rect = field.rect;
    let interior = rect.interior().map_err(|_| TiltedError::Degenerate)?;
    let scale = field.sup_norm().max(1.0);
    let mut worst = 0.0f64;
    for s in interior.s_lo..=interior.s_hi {
        for t in interior.t_lo..=interior.t_hi {
            if (s + t).rem_euclid(2) != 0 {
                continue;
            }
            let pot = potential_at(v, s, t)?;
            let lhs = (4.0 + pot - e) * field.value(s, t);
            let rhs = field.value(s + 1, t + 1)
                + field.value(s - 1, t - 1)
                + field.value(s + 1, t - 1)
                + field.value(s - 1, t + 1);
            worst = worst.max(math::abs(lhs - rhs));
        }
    }
    Ok(worst / scale)
}

/// One growth observation: rectangle dims and the log amplification.
#[derive(Clone, Copy, Debug)]
pub struct GrowthSample {
    pub a: i64,
    pub b: i64,
    pub log_ratio: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct GrowthFit {
    /// Least-squares slope of `log(‖ψ‖/‖data‖)` against `b·log a`.
    pub c1_hat: f64,
    pub max_log_ratio: f64,
    pub samples: usize,
}

/// Regression for the growth constant. Requires at least 20 samples in
/// every `(a, b)` cell present.
pub fn fit_growth_constant(samples: &[GrowthSample]) -> Result<GrowthFit, TiltedError> {
    if samples.is_empty() {
        return Err(TiltedError::InsufficientSamples);
    }
    let mut cells: BTreeMap<(i64, i64), usize> = BTreeMap::new();
    for s in samples {
        *cells.entry((s.a, s.b)).or_insert(0) += 1;
    }
    if cells.values().any(|&c| c < 20) {
        return Err(TiltedError::InsufficientSamples);
    }
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut max_log = f64::NEG_INFINITY;
    for s in samples {
        let x = s.b as f64 * math::ln(s.a as f64);
        sxy += x * s.log_ratio;
        sxx += x * x;
        max_log = max_log.max(s.log_ratio);
    }
    Ok(GrowthFit { c1_hat: sxy / sxx, max_log_ratio: max_log, samples: samples.len() })
}

/// Generates growth samples: random potentials and random unit boundary
/// data on each `(a, b)` cell.
pub fn growth_samples(
    spec: &EnsembleSpec,
    cells: &[(i64, i64)],
    per_cell: usize,
    e: f64,
    seed: u64,
) -> Result<Vec<GrowthSample>, TiltedError> {
    let mut out = Vec::new();
    for (cell, &(a, b)) in cells.iter().enumerate() {
        let rect = TiltedRect::canonical(a, b)?;
        for rep in 0..per_cell {
            let replica = (cell * per_cell + rep) as u64;
            let v = sample_on_sites(spec, rect.sites(), &FrozenAssignment::new(), seed, replica)
                .map_err(|_| TiltedError::BadParameter)?;
            let mut stream = KeyedStream::new(seed ^ 0x9c0f, replica);
            let mut data = WestBoundaryData::zeros(&rect);
            let mut peak = 0.0f64;
            let mut entries = Vec::new();
            for p in rect.west_boundary().iter() {
                let (s, t) = p.to_tilted();
                let val = stream.next_signed();
                peak = peak.max(math::abs(val));
                entries.push((s, t, val));
            }
            for (s, t, val) in entries {
                data.set(s, t, val / peak);
            }
            let field = extend_from_west(&rect, &data, e, &v)?;
            out.push(GrowthSample {
                a,
                b,
                log_ratio: math::ln(field.sup_norm().max(1e-300) / data.sup_norm()),
            });
        }
    }
    Ok(out)
}

/// `‖ψ_0 - ψ_1‖_∞ / (|E_1 - E_0| · ‖data‖_∞)`, the normalized energy
/// sensitivity of the extension; zero when the energies coincide.
pub fn energy_variation_gap(
    rect: &TiltedRect,
    v: &TiltedPotential,
    data: &WestBoundaryData,
    e0: f64,
    e1: f64,
) -> Result<f64, TiltedError> {
    if e0 == e1 {
        return Ok(0.0);
    }
    let f0 = extend_from_west(rect, data, e0, v)?;
    let f1 = extend_from_west(rect, data, e1, v)?;
    let mut diff = 0.0f64;
    for ((s, t), val) in f0.iter() {
        diff = diff.max(math::abs(val - f1.value(s, t)));
    }
    Ok(diff / (math::abs(e1 - e0) * data.sup_norm()))
}

/// Alternating-sum representation for fields vanishing on the first two
/// t-diagonals: evaluates
/// `ψ(s',t') = -ψ(s'-2,t') + Σ_k (-1)^k (4 - Ē + V(s'-1, t'-1-2k)) ψ(s'-1, t'-1-2k)`
/// and returns the deviation from the sweep extension at the target,
/// relative to `max(1, ‖ψ‖_∞)`.
pub fn zero_column_formula_check(
    rect: &TiltedRect,
    v: &TiltedPotential,
    data: &WestBoundaryData,
    ebar: f64,
    target: (i64, i64),
) -> Result<f64, TiltedError> {
    // Precondition: data vanishes on the first two t-diagonals.
    for p in rect.west_boundary().iter() {
        let (s, t) = p.to_tilted();
        if t <= rect.t_lo + 1 {
            match data.get(s, t) {
                Some(0.0) => {}
                Some(_) => return Err(TiltedError::BoundaryNotZero { s, t }),
                None => return Err(TiltedError::MissingBoundary { s, t }),
            }
        }
    }
    let (sp, tp) = target;
    if sp < rect.s_lo + 2 || sp > rect.s_hi || tp < rect.t_lo + 2 || tp > rect.t_hi {
        return Err(TiltedError::BadParameter);
    }
    if (sp + tp).rem_euclid(2) != 0 {
        return Err(TiltedError::BadParameter);
    }
    let field = extend_from_west(rect, data, ebar, v)?;
    let mut sum = -field.value(sp - 2, tp);
    let mut sign = 1.0;
    let mut t = tp - 1;
    while t >= rect.t_lo {
        let pot = potential_at(v, sp - 1, t)?;
        sum += sign * (4.0 - ebar + pot) * field.value(sp - 1, t);
        sign = -sign;
        t -= 2;
    }
    Ok(math::abs(field.value(sp, tp) - sum) / field.sup_norm().max(1.0))
}

/// Winning row of the large-row scan.
#[derive(Clone, Copy, Debug)]
pub struct RowSearch {
    /// West anchor of the winning row: `s0 ∈ {s_lo, s_lo+1}` by parity.
    pub s0: i64,
    pub t0: i64,
    /// Smallest `|ψ|` along the full row `t = t0`.
    pub min_abs: f64,
    /// `-log(min_abs / ‖ψ⁰‖_∞) / (b·log a)`.
    pub implied_c2: f64,
}

/// Scans the candidate rows `t0 ∈ [t_lo+2, t_hi]` and returns the one
/// maximizing the minimum of `|ψ|` along the full row.
pub fn best_row_search(field: &TiltedField) -> Result<RowSearch, TiltedError> {
    let rect = field.rect;
    let west_norm = field.west_column_norm();
    if west_norm == 0.0 {
        return Err(TiltedError::ZeroField);
    }
    let (a, b) = rect.dims();
    let mut best: Option<(i64, f64)> = None;
    for t0 in (rect.t_lo + 2)..=rect.t_hi {
        let mut row_min = f64::INFINITY;
        for s in rect.s_lo..=rect.s_hi {
            if (s + t0).rem_euclid(2) != 0 {
                continue;
            }
            row_min = row_min.min(math::abs(field.value(s, t0)));
        }
        if best.map(|(_, m)| row_min > m).unwrap_or(true) {
            best = Some((t0, row_min));
        }
    }
    let (t0, min_abs) = best.ok_or(TiltedError::Degenerate)?;
    let s0 = if (rect.s_lo + t0).rem_euclid(2) == 0 { rect.s_lo } else { rect.s_lo + 1 };
    let implied_c2 = if min_abs > 0.0 {
        -math::ln(min_abs / west_norm) / (b as f64 * math::ln(a as f64))
    } else {
        f64::INFINITY
    };
    Ok(RowSearch { s0, t0, min_abs, implied_c2 })
}

/// Monte Carlo estimate of the propagation event: for each sampled
/// potential the fraction of unfrozen sites on the last two t-diagonals
/// where `|ψ| ≥ e^{-α·b·log(a)/2}` must reach `2ε` for every sampled
/// unit boundary datum (worst case over data).
#[allow(clippy::too_many_arguments)]
pub fn ni_event_mc(
    spec: &EnsembleSpec,
    rect: &TiltedRect,
    ebar: f64,
    alpha: f64,
    eps: f64,
    frozen: &FrozenAssignment,
    trials: u64,
    boundary_samples: u64,
    seed: u64,
    relaxed: bool,
) -> Result<f64, TiltedError> {
    let (a, b) = rect.dims();
    if trials == 0 || boundary_samples == 0 || eps <= 0.0 {
        return Err(TiltedError::BadParameter);
    }
    if !relaxed && (a as f64) < alpha * (b * b) as f64 * math::ln(a as f64) {
        return Err(TiltedError::BadParameter);
    }
    // Target sites: last two t-diagonals, unfrozen.
    let targets: Vec<(i64, i64)> = rect
        .sites()
        .filter_map(|p| {
            let (s, t) = p.to_tilted();
            (t >= rect.t_hi - 1 && frozen.get(p).is_none()).then_some((s, t))
        })
        .collect();
    if targets.is_empty() {
        return Err(TiltedError::EmptyDenominator);
    }
    let threshold = math::exp(-0.5 * alpha * b as f64 * math::ln(a as f64));

    let mut successes = 0u64;
    for replica in 0..trials {
        let v = sample_on_sites(spec, rect.sites(), frozen, seed, replica)
            .map_err(|_| TiltedError::BadParameter)?;
        let mut worst_fraction = f64::INFINITY;
        for bs in 0..boundary_samples {
            let mut stream = KeyedStream::new(seed ^ 0xb0_17, replica * boundary_samples + bs);
            let data = WestBoundaryData::random_off_first_diagonals(rect, &mut stream);
            if data.sup_norm() == 0.0 {
                continue;
            }
            let field = extend_from_west(rect, &data, ebar, &v)?;
            let hits = targets
                .iter()
                .filter(|&&(s, t)| math::abs(field.value(s, t)) >= threshold)
                .count();
            worst_fraction = worst_fraction.min(hits as f64 / targets.len() as f64);
        }
        if worst_fraction >= 2.0 * eps {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}

/// Monte Carlo estimate of the box-level continuation event: for each
/// sampled potential, every eigenpair in the energy window must satisfy
/// `sup_{½Λ} |ψ| ≤ e^{α L log L} · q`, where `q` is the
/// `(1 - ε(L log L)^{-1/2})`-quantile of `|ψ|` over the unfrozen sites.
/// Samples with no windowed eigenvalue count as successes.
#[allow(clippy::too_many_arguments)]
pub fn uc_event_mc(
    spec: &EnsembleSpec,
    bx: &Square,
    ebar: f64,
    alpha: f64,
    eps: f64,
    frozen: &FrozenAssignment,
    trials: u64,
    seed: u64,
) -> Result<f64, TiltedError> {
    if trials == 0 || eps <= 0.0 || bx.side < 4 {
        return Err(TiltedError::BadParameter);
    }
    let l = bx.side as f64;
    let window = math::exp(-alpha * math::sqrt(l * math::ln(l)));
    let bound = math::exp(alpha * l * math::ln(l));
    let allowed_fraction = eps / math::sqrt(l * math::ln(l));
    let half = bx.scale(ScaleFactor::Half)?;

    let unfrozen: Vec<usize> = bx
        .sites()
        .filter(|p| frozen.get(*p).is_none())
        .map(|p| bx.index_of(p).unwrap())
        .collect();
    if unfrozen.is_empty() {
        return Err(TiltedError::EmptyDenominator);
    }
    let half_indices: Vec<usize> =
        half.sites().filter_map(|p| bx.index_of(p)).collect();
    let allowed = (allowed_fraction * unfrozen.len() as f64) as usize;

    let mut successes = 0u64;
    for replica in 0..trials {
        let field = sample_potential(spec, bx, frozen, seed, replica)
            .map_err(|_| TiltedError::BadParameter)?;
        let h = assemble(bx, &field)?;
        let data = eigensolve(&h)?;
        let mut ok = true;
        for (k, &e) in data.eigenvalues.iter().enumerate() {
            if math::abs(e - ebar) > window {
                continue;
            }
            let psi = data.eigenvector(k);
            let mut magnitudes: Vec<f64> =
                unfrozen.iter().map(|&i| math::abs(psi[i])).collect();
            magnitudes.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let q = magnitudes[allowed.min(magnitudes.len() - 1)];
            let sup_half =
                half_indices.iter().map(|&i| math::abs(psi[i])).fold(0.0f64, f64::max);
            if sup_half > bound * q {
                ok = false;
                break;
            }
        }
        if ok {
            successes += 1;
        }
    }
    Ok(successes as f64 / trials as f64)
}
