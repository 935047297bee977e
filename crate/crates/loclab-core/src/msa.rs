//! Multiscale bookkeeping at desk scale: dyadic scale schedules, the
//! frozen-set recursion, good/bad/ready classification of aligned squares,
//! hereditary-bad chain counting, the deterministic propagation check, and
//! the initial-scale net probe.
//!
//! Goodness is an almost-sure conditional event in the underlying theory;
//! here it is replaced by a decidable surrogate — all of `trials`
//! resamplings of the unfrozen sites must satisfy the resolvent bound —
//! with the trial count recorded so the surrogate's strength is explicit.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::fmt;

use crate::ensembles::{sample_potential, EnsembleSpec, FrozenAssignment};
use crate::geometry::{
    is_dyadic, is_r_net, regularity_check, RegularityVerdict, Site, SiteSet, Square, TiltedRect,
};
use crate::math;
use crate::spectral::{assemble, resolvent, CheckOutcome, SpectralError};

#[derive(Clone, Debug, PartialEq)]
pub enum MsaError {
    InfeasibleParameters,
    ConstantExponent,
    NotDyadic,
    ScaleNotInSchedule(i64),
    MissingClassification { corner: Site, side: i64 },
    BadParameter,
    Spectral(SpectralError),
}

impl fmt::Display for MsaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MsaError::InfeasibleParameters => write!(f, "schedule parameters are infeasible"),
            MsaError::ConstantExponent => write!(f, "scale exponent fails to grow"),
            MsaError::NotDyadic => write!(f, "scale is not a power of two"),
            MsaError::ScaleNotInSchedule(side) => {
                write!(f, "side {side} does not appear in the schedule")
            }
            MsaError::MissingClassification { corner, side } => {
                write!(f, "missing verdict for side-{side} square at ({}, {})", corner.x, corner.y)
            }
            MsaError::BadParameter => write!(f, "parameter outside its domain"),
            MsaError::Spectral(e) => write!(f, "{e}"),
        }
    }
}

impl From<SpectralError> for MsaError {
    fn from(e: SpectralError) -> Self {
        MsaError::Spectral(e)
    }
}

/// Dyadic scale ladder with decay rates. Exponents carry the schedule;
/// the scales themselves outgrow `i64` within a few steps and are only
/// materialized on demand.
#[derive(Clone, Debug)]
pub struct ScaleSchedule {
    pub eps: f64,
    pub nu: f64,
    pub delta: f64,
    pub m_tilde: usize,
    /// Exponents `log2 L_k`, with
    /// `log2 L_{k+1} = ⌊log2 L_k / (1 - 6ε)⌋` (exact integers).
    pub exponents: Vec<u32>,
    /// Decay rates `m_k`.
    pub decay: Vec<f64>,
}

/// Closed-form base-case offset `⌈-log2(δ) / (1 - 6ε)⌉`.
pub fn m_tilde_offset(eps: f64, delta: f64) -> usize {
    math::ceil(-math::log2(delta) / (1.0 - 6.0 * eps)) as usize
}

/// Builds the schedule. Exponent arithmetic uses a `1e-12` guard inside
/// the floor so that integral quotients are not lost to rounding.
pub fn build_schedule(
    eps: f64,
    nu: f64,
    delta: f64,
    l0: i64,
    depth: usize,
) -> Result<ScaleSchedule, MsaError> {
    if !(eps > 0.0 && eps < 1.0 / 6.0 && eps > nu && nu > delta && delta > 0.0) {
        return Err(MsaError::InfeasibleParameters);
    }
    if !is_dyadic(l0) || l0 < 2 {
        return Err(MsaError::NotDyadic);
    }
    let shrink = 1.0 - 6.0 * eps;
    let mut exponents: Vec<u32> = Vec::with_capacity(depth + 1);
    exponents.push(l0.trailing_zeros());
    for k in 0..depth {
        let next = math::floor(exponents[k] as f64 / shrink + 1e-12) as u32;
        if next <= exponents[k] {
            return Err(MsaError::ConstantExponent);
        }
        exponents.push(next);
    }
    let m_tilde = m_tilde_offset(eps, delta);

    let mut decay: Vec<f64> = Vec::with_capacity(depth + 1);
    for (k, &e) in exponents.iter().enumerate() {
        let floor_rate = math::powf(2.0, -delta * e as f64);
        let m = if k <= m_tilde {
            floor_rate
        } else {
            decay[k - 1] - math::powf(2.0, -nu * e as f64)
        };
        if !(m >= floor_rate - 1e-15 && m <= 1.0) {
            return Err(MsaError::InfeasibleParameters);
        }
        decay.push(m);
    }
    Ok(ScaleSchedule { eps, nu, delta, m_tilde, exponents, decay })
}

impl ScaleSchedule {
    pub fn depth(&self) -> usize {
        self.exponents.len() - 1
    }

    /// `L_k` when it fits a machine integer.
    pub fn scale(&self, k: usize) -> Option<i64> {
        (self.exponents[k] < 63).then(|| 1i64 << self.exponents[k])
    }

    pub fn index_of_side(&self, side: i64) -> Result<usize, MsaError> {
        if !is_dyadic(side) {
            return Err(MsaError::NotDyadic);
        }
        let e = side.trailing_zeros();
        self.exponents
            .iter()
            .position(|&x| x == e)
            .ok_or(MsaError::ScaleNotInSchedule(side))
    }

    /// Whether the separation window
    /// `(δ/4)·log2 L_{k+M} ≤ log2 L_k ≤ δ·log2 L_{k+M}` holds at offset
    /// `m` for every `k` the schedule can express.
    pub fn window_holds(&self, m: usize) -> bool {
        let mut any = false;
        for k in 0..self.exponents.len() {
            if k + m >= self.exponents.len() {
                break;
            }
            any = true;
            let ek = self.exponents[k] as f64;
            let ekm = self.exponents[k + m] as f64;
            if !(self.delta / 4.0 * ekm <= ek && ek <= self.delta * ekm) {
                return false;
            }
        }
        any
    }

    /// Smallest offset (if any, up to the schedule depth) for which the
    /// separation window holds.
    pub fn smallest_window_offset(&self) -> Option<usize> {
        (1..self.exponents.len()).find(|&m| self.window_holds(m))
    }

    /// Regularity budget `η_k = ε² + c·Σ_{j≤k} L_j^{-ε}`.
    pub fn eta(&self, k: usize, c: f64) -> f64 {
        let sum: f64 = self.exponents[..=k]
            .iter()
            .map(|&e| math::powf(2.0, -self.eps * e as f64))
            .sum();
        self.eps * self.eps + c * sum
    }
}

/// Frozen sites at a scale step with their regularity budget.
#[derive(Clone, Debug)]
pub struct FrozenSetState {
    pub k: usize,
    pub sites: SiteSet,
    pub eta: f64,
}

/// Base frozen set: the pitch-`⌈2/ε²⌉` grid inside the domain, with
/// budget `ε²`.
pub fn base_frozen_set(eps: f64, domain: &Square) -> Result<FrozenSetState, MsaError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MsaError::BadParameter);
    }
    let pitch = math::ceil(2.0 / (eps * eps)) as i64;
    let sites = grid_sites(pitch, domain, false);
    Ok(FrozenSetState { k: 0, sites, eta: eps * eps })
}

/// Variant resolving the thinning reading: grid points in alternating
/// pitch-cells are discarded.
pub fn base_frozen_set_thinned(eps: f64, domain: &Square) -> Result<FrozenSetState, MsaError> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(MsaError::BadParameter);
    }
    let pitch = math::ceil(2.0 / (eps * eps)) as i64;
    let sites = grid_sites(pitch, domain, true);
    Ok(FrozenSetState { k: 0, sites, eta: eps * eps })
}

fn grid_sites(pitch: i64, domain: &Square, thinned: bool) -> SiteSet {
    let mut set = SiteSet::new();
    let x0 = domain.corner.x.div_euclid(pitch) * pitch;
    let y0 = domain.corner.y.div_euclid(pitch) * pitch;
    let mut x = x0;
    while x <= domain.x_hi() {
        let mut y = y0;
        while y <= domain.y_hi() {
            let keep = !thinned || (x.div_euclid(pitch) + y.div_euclid(pitch)).rem_euclid(2) == 0;
            if keep && domain.contains(Site::new(x, y)) {
                set.insert(Site::new(x, y));
            }
            y += pitch;
        }
        x += pitch;
    }
    set
}

/// Verdict for one aligned square.
#[derive(Clone, Debug)]
pub struct BoxClassification {
    pub square: Square,
    pub good: bool,
    /// Number of resamplings behind the verdict (the surrogate strength).
    pub trials: u64,
}

/// Number of energy probes on `[0, ebar_max]` used by the goodness test.
const ENERGY_GRID: usize = 5;

/// Classifies an aligned square at its schedule scale: good iff every one
/// of `trials` resamplings of the unfrozen sites satisfies
/// `|R_E(x,y)| ≤ 2·e^{L_k^{1-ε} - m_k·|x-y|}` (ℓ∞ distance) for all `E`
/// on the energy grid.
#[allow(clippy::too_many_arguments)]
pub fn classify_square(
    square: &Square,
    schedule: &ScaleSchedule,
    frozen: &FrozenAssignment,
    spec: &EnsembleSpec,
    ebar_max: f64,
    trials: u64,
    seed: u64,
) -> Result<BoxClassification, MsaError> {
    if square.side > 64 {
        return Err(MsaError::BadParameter);
    }
    let k = schedule.index_of_side(square.side)?;
    let lk = math::powf(2.0, schedule.exponents[k] as f64);
    let amplitude = math::powf(lk, 1.0 - schedule.eps);
    let rate = schedule.decay[k];
    let sites: Vec<Site> = square.sites().collect();

    let mut good = true;
    'outer: for replica in 0..trials {
        let field = sample_potential(spec, square, frozen, seed, replica)
            .map_err(|_| MsaError::BadParameter)?;
        let h = assemble(square, &field)?;
        for g in 0..ENERGY_GRID {
            let e = ebar_max * g as f64 / (ENERGY_GRID - 1) as f64;
            let r = match resolvent(&h, e) {
                Ok(r) => r,
                Err(SpectralError::Resonance { .. }) => {
                    good = false;
                    break 'outer;
                }
                Err(other) => return Err(other.into()),
            };
            for (i, &x) in sites.iter().enumerate() {
                for (j, &y) in sites.iter().enumerate() {
                    let bound = 2.0 * math::exp(amplitude - rate * x.linf_dist(y) as f64);
                    if math::abs(r[(i, j)]) > bound {
                        good = false;
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(BoxClassification { square: *square, good, trials })
}

/// Verdicts for all aligned squares of one side length, keyed by corner.
#[derive(Clone, Debug, Default)]
pub struct ScaleVerdicts {
    pub side: i64,
    bad: BTreeMap<(i64, i64), bool>,
}

impl ScaleVerdicts {
    pub fn new(side: i64) -> Self {
        ScaleVerdicts { side, bad: BTreeMap::new() }
    }

    pub fn record(&mut self, square: &Square, good: bool) {
        debug_assert_eq!(square.side, self.side);
        self.bad.insert((square.corner.x, square.corner.y), !good);
    }

    pub fn is_bad(&self, corner: (i64, i64)) -> Option<bool> {
        self.bad.get(&corner).copied()
    }

    pub fn bad_count(&self) -> usize {
        self.bad.values().filter(|&&b| b).count()
    }
}

/// Enumerate the corners of aligned side-`side` squares contained in the
/// parent (alignment: corners on the half-side grid).
pub fn aligned_subsquare_corners(parent: &Square, side: i64) -> Vec<(i64, i64)> {
    let half = (side / 2).max(1);
    let mut corners = Vec::new();
    let mut x = parent.corner.x.div_euclid(half) * half;
    if x < parent.corner.x {
        x += half;
    }
    while x + side - 1 <= parent.x_hi() {
        let mut y = parent.corner.y.div_euclid(half) * half;
        if y < parent.corner.y {
            y += half;
        }
        while y + side - 1 <= parent.y_hi() {
            corners.push((x, y));
            y += half;
        }
        x += half;
    }
    corners
}

/// Counts hereditary bad subsquares: bottom squares completing a fully
/// nested bad chain through every provided level. `levels[0]` holds
/// verdicts one scale below the parent, and so on downward; every aligned
/// candidate must carry a verdict.
pub fn hereditary_bad_count(
    parent: &Square,
    levels: &[ScaleVerdicts],
) -> Result<u64, MsaError> {
    if levels.is_empty() {
        return Ok(0);
    }
    let mut reachable: Vec<Square> = alloc::vec![*parent];
    for level in levels {
        let mut next: BTreeMap<(i64, i64), Square> = BTreeMap::new();
        for ancestor in &reachable {
            for corner in aligned_subsquare_corners(ancestor, level.side) {
                let is_bad = level.is_bad(corner).ok_or(MsaError::MissingClassification {
                    corner: Site::new(corner.0, corner.1),
                    side: level.side,
                })?;
                if is_bad {
                    next.entry(corner).or_insert_with(|| {
                        Square::new(Site::new(corner.0, corner.1), level.side).unwrap()
                    });
                }
            }
        }
        reachable = next.into_values().collect();
        if reachable.is_empty() {
            return Ok(0);
        }
    }
    Ok(reachable.len() as u64)
}

/// Grows the frozen set with cover squares of ready boxes and advances the
/// regularity budget. Consumes only classifications (through the covers),
/// never potential values.
pub fn freeze_update(
    state: &FrozenSetState,
    covers: &[Square],
    schedule: &ScaleSchedule,
    eta_constant: f64,
) -> Result<FrozenSetState, MsaError> {
    let k = state.k + 1;
    if k >= schedule.exponents.len() {
        return Err(MsaError::BadParameter);
    }
    let mut sites = state.sites.clone();
    for cover in covers {
        for site in cover.sites() {
            sites.insert(site);
        }
    }
    let eta = schedule.eta(k, eta_constant);
    Ok(FrozenSetState { k, sites, eta })
}

/// Re-certifies the regularity of a frozen set at its budget on the given
/// tilted squares.
pub fn recertify(
    state: &FrozenSetState,
    boxes: &[TiltedRect],
) -> Vec<(TiltedRect, RegularityVerdict)> {
    boxes
        .iter()
        .map(|q| (*q, regularity_check(&state.sites, q, state.eta)))
        .collect()
}

/// Scale ladder for the deterministic propagation check.
#[derive(Clone, Copy, Debug)]
pub struct DetScales {
    /// `L_0 ≥ L_1 ≥ … ≥ L_6 > 0`; `L_0` is the box side and `L_2` the
    /// defect side.
    pub l: [f64; 7],
    pub nu: f64,
}

#[derive(Clone, Debug)]
pub struct PropagationReport {
    pub outcome: CheckOutcome,
    /// Largest decay rate for which the concluded bound holds with the
    /// given `L_1` amplitude.
    pub empirical_decay: f64,
}

/// Deterministic propagation: hypotheses are checked (defect resolvents
/// below `e^{L_4}`, every site deep inside a defect or a good `L_5`
/// square), then the conclusion `|R_Λ(x,y)| ≤ e^{L_1 - m̃·|x-y|}` with
/// `m̃ = m - L_5^{-ν}` is verified entrywise.
pub fn deterministic_propagation(
    h: &crate::spectral::HamiltonianMatrix,
    defects: &[Square],
    good_squares: &[Square],
    scales: &DetScales,
    m: f64,
    e: f64,
) -> Result<PropagationReport, MsaError> {
    let bx = *h.bx();
    let l = scales.l;
    if l.windows(2).any(|w| w[0] < w[1]) || l[6] <= 0.0 {
        return Err(MsaError::BadParameter);
    }
    if (bx.side as f64 - l[0]).abs() > 1e-9 {
        return Err(MsaError::BadParameter);
    }
    if defects.iter().any(|d| (d.side as f64 - l[2]).abs() > 1e-9) {
        return Err(MsaError::BadParameter);
    }
    let m_floor = 2.0 * math::powf(l[5], -scales.nu);
    if !(m >= m_floor && m <= 1.0) {
        return Err(MsaError::BadParameter);
    }

    // Defect resolvent norms stay below e^{L4}.
    for d in defects {
        let hd = assemble(d, h.potential())?;
        let norm = crate::spectral::resolvent_norm(&hd, e)?;
        if norm > math::exp(l[4]) {
            return Ok(PropagationReport {
                outcome: CheckOutcome::Inapplicable,
                empirical_decay: 0.0,
            });
        }
    }
    // Good squares obey the small-scale decay bound.
    let mut good_res: Vec<(Square, crate::linalg::DenseMat)> = Vec::new();
    for g in good_squares {
        if (g.side as f64 - l[5]).abs() > 1e-9 || !bx.contains_square(g) {
            return Err(MsaError::BadParameter);
        }
        let hg = assemble(g, h.potential())?;
        let r = resolvent(&hg, e)?;
        let sites: Vec<Site> = g.sites().collect();
        for (i, &x) in sites.iter().enumerate() {
            for (j, &y) in sites.iter().enumerate() {
                if math::abs(r[(i, j)]) > math::exp(l[6] - m * x.linf_dist(y) as f64) {
                    return Ok(PropagationReport {
                        outcome: CheckOutcome::Inapplicable,
                        empirical_decay: 0.0,
                    });
                }
            }
        }
        good_res.push((*g, r));
    }
    // Coverage: every site deep inside a defect or a good square, with
    // depth measured against the square's complement inside the box (a
    // face flush with the box boundary has nothing beyond it).
    let deep_margin = |side: i64| (side + 7) / 8;
    for x in bx.sites() {
        let in_defect = defects
            .iter()
            .any(|d| d.contains(x) && interior_depth(&bx, d, x) >= deep_margin(d.side));
        let in_good = good_squares
            .iter()
            .any(|g| g.contains(x) && interior_depth(&bx, g, x) >= deep_margin(g.side));
        if !(in_defect || in_good) {
            return Ok(PropagationReport {
                outcome: CheckOutcome::Inapplicable,
                empirical_decay: 0.0,
            });
        }
    }

    // Conclusion.
    let m_tilde = m - math::powf(l[5], -scales.nu);
    let r = resolvent(h, e)?;
    let sites: Vec<Site> = bx.sites().collect();
    let mut margin = f64::INFINITY;
    let mut empirical = f64::INFINITY;
    for (i, &x) in sites.iter().enumerate() {
        for (j, &y) in sites.iter().enumerate() {
            let dist = x.linf_dist(y) as f64;
            let log_bound = l[1] - m_tilde * dist;
            let log_entry = math::ln(math::abs(r[(i, j)]).max(1e-300));
            margin = margin.min(log_bound - log_entry);
            if dist > 0.0 {
                empirical = empirical.min((l[1] - log_entry) / dist);
            }
        }
    }
    let outcome = if margin >= 0.0 {
        CheckOutcome::Holds { margin }
    } else {
        CheckOutcome::Violated { margin }
    };
    Ok(PropagationReport { outcome, empirical_decay: empirical })
}

/// ℓ∞ distance from a site to the square's complement inside the ambient
/// box; faces flush with the box contribute nothing.
fn interior_depth(bx: &Square, sq: &Square, x: Site) -> i64 {
    let mut depth = i64::MAX;
    if sq.corner.x > bx.corner.x {
        depth = depth.min(1 + x.x - sq.corner.x);
    }
    if sq.x_hi() < bx.x_hi() {
        depth = depth.min(1 + sq.x_hi() - x.x);
    }
    if sq.corner.y > bx.corner.y {
        depth = depth.min(1 + x.y - sq.corner.y);
    }
    if sq.y_hi() < bx.y_hi() {
        depth = depth.min(1 + sq.y_hi() - x.y);
    }
    depth
}

#[derive(Clone, Debug)]
pub struct NetProbeReport {
    pub net_frequency: f64,
    /// Mean fitted amplitude constant `C` over trials where the net event
    /// held (`|H^{-1}(x,y)| ≤ e^{C·R̃ - c·R̃^{-1}|x-y|}`, `R̃ = R² log R`).
    pub c_fit: f64,
    /// Mean fitted decay constant `c` over the same trials.
    pub decay_fit: f64,
    pub conditioned_trials: u64,
}

/// Initial-scale probe: frequency with which `{V ≥ κ} ∩ F` is an `R`-net
/// in the box, and the fitted inverse bound constants conditional on the
/// net event.
#[allow(clippy::too_many_arguments)]
pub fn initial_scale_probe(
    spec: &EnsembleSpec,
    kappa: f64,
    r: f64,
    bx: &Square,
    frozen_grid: &SiteSet,
    trials: u64,
    seed: u64,
) -> Result<NetProbeReport, MsaError> {
    if trials == 0 || r <= 1.0 {
        return Err(MsaError::BadParameter);
    }
    let r_tilde = r * r * math::ln(r);
    let mut net_hits = 0u64;
    let mut c_sum = 0.0;
    let mut decay_sum = 0.0;
    let mut conditioned = 0u64;
    for replica in 0..trials {
        let field = sample_potential(spec, bx, &FrozenAssignment::new(), seed, replica)
            .map_err(|_| MsaError::BadParameter)?;
        let net_set: SiteSet = frozen_grid
            .iter()
            .filter(|&p| bx.contains(p) && field.value(p) >= kappa)
            .collect();
        if net_set.is_empty() {
            continue;
        }
        if !is_r_net(&net_set, bx, r).map_err(|_| MsaError::BadParameter)? {
            continue;
        }
        net_hits += 1;
        let h = assemble(bx, &field)?;
        let inv = resolvent(&h, 0.0)?;
        // Least squares of max log-entry per ℓ∞ distance ring.
        let sites: Vec<Site> = bx.sites().collect();
        let mut per_dist: BTreeMap<i64, f64> = BTreeMap::new();
        for (i, &x) in sites.iter().enumerate() {
            for (j, &y) in sites.iter().enumerate() {
                let d = x.linf_dist(y);
                let v = math::ln(math::abs(inv[(i, j)]).max(1e-300));
                per_dist
                    .entry(d)
                    .and_modify(|cur| *cur = cur.max(v))
                    .or_insert(v);
            }
        }
        let n = per_dist.len() as f64;
        let sx: f64 = per_dist.keys().map(|&d| d as f64).sum();
        let sy: f64 = per_dist.values().sum();
        let sxx: f64 = per_dist.keys().map(|&d| (d * d) as f64).sum();
        let sxy: f64 = per_dist.iter().map(|(&d, &v)| d as f64 * v).sum();
        let denom = n * sxx - sx * sx;
        if denom > 0.0 {
            let slope = (n * sxy - sx * sy) / denom;
            let intercept = (sy - slope * sx) / n;
            c_sum += intercept / r_tilde;
            decay_sum += -slope * r_tilde;
            conditioned += 1;
        }
    }
    let net_frequency = net_hits as f64 / trials as f64;
    Ok(NetProbeReport {
        net_frequency,
        c_fit: if conditioned > 0 { c_sum / conditioned as f64 } else { f64::NAN },
        decay_fit: if conditioned > 0 { decay_sum / conditioned as f64 } else { f64::NAN },
        conditioned_trials: conditioned,
    })
}
