//! Finite-volume Hamiltonians `H_Λ = -Δ + V` on boxes, eigensolves,
//! resolvents, the geometric resolvent identity, resonance Monte Carlo,
//! and the deterministic eigenvalue-variation / almost-orthogonality /
//! large-mass checkers.
//!
//! The matrix has diagonal `4 + V_n` and `-1` on unit-distance pairs
//! inside the box, so its spectrum lies in `[0, 8 + M]`. Distances in
//! decay bounds are ℓ∞ throughout this module.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::ensembles::{sample_potential, EnsembleSpec, FrozenAssignment, PotentialField};
use crate::geometry::{box_boundary, GeometryError, Site, Square};
use crate::linalg::{sym_eigen, BandedLu, BandedSym, DenseMat, LinalgError};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub enum SpectralError {
    MissingPotential(Site),
    Resonance { distance: f64 },
    BadParameter,
    NoAdmissibleSquare,
    EmptyDenominator,
    Geometry(GeometryError),
    Linalg(LinalgError),
}

impl fmt::Display for SpectralError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralError::MissingPotential(s) => {
                write!(f, "potential missing at ({}, {})", s.x, s.y)
            }
            SpectralError::Resonance { distance } => {
                write!(f, "energy within {distance} of the spectrum")
            }
            SpectralError::BadParameter => write!(f, "parameter outside its domain"),
            SpectralError::NoAdmissibleSquare => write!(f, "no admissible square"),
            SpectralError::EmptyDenominator => write!(f, "empty site set in a fraction"),
            SpectralError::Geometry(e) => write!(f, "{e}"),
            SpectralError::Linalg(e) => write!(f, "{e}"),
        }
    }
}

impl From<GeometryError> for SpectralError {
    fn from(e: GeometryError) -> Self {
        SpectralError::Geometry(e)
    }
}

impl From<LinalgError> for SpectralError {
    fn from(e: LinalgError) -> Self {
        SpectralError::Linalg(e)
    }
}

/// `H_Λ` in row-major site order; off-diagonal structure is implicit.
#[derive(Clone, Debug)]
pub struct HamiltonianMatrix {
    bx: Square,
    diag: Vec<f64>,
    potential: PotentialField,
}

/// Assemble `H_Λ` from a sampled potential covering the box.
pub fn assemble(bx: &Square, potential: &PotentialField) -> Result<HamiltonianMatrix, SpectralError> {
    let mut diag = Vec::with_capacity((bx.side * bx.side) as usize);
    for site in bx.sites() {
        let v = potential.get(site).ok_or(SpectralError::MissingPotential(site))?;
        diag.push(4.0 + v);
    }
    Ok(HamiltonianMatrix { bx: *bx, diag, potential: potential.clone() })
}

impl HamiltonianMatrix {
    pub fn bx(&self) -> &Square {
        &self.bx
    }

    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn potential(&self) -> &PotentialField {
        &self.potential
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        let a = self.bx.site_at(i);
        let b = self.bx.site_at(j);
        if a.l1_dist(b) == 1 {
            -1.0
        } else {
            0.0
        }
    }

    pub fn to_dense(&self) -> DenseMat {
        let n = self.n();
        let side = self.bx.side as usize;
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            let x = i % side;
            let y = i / side;
            if x + 1 < side {
                m[(i, i + 1)] = -1.0;
                m[(i + 1, i)] = -1.0;
            }
            if y + 1 < side {
                m[(i, i + side)] = -1.0;
                m[(i + side, i)] = -1.0;
            }
        }
        m
    }

    pub fn to_banded(&self) -> BandedSym {
        let n = self.n();
        let side = self.bx.side as usize;
        let mut b = BandedSym::zeros(n, side);
        for i in 0..n {
            b.set(i, i, self.diag[i]);
            let x = i % side;
            let y = i / side;
            if x + 1 < side {
                b.set(i + 1, i, -1.0);
            }
            if y + 1 < side {
                b.set(i + side, i, -1.0);
            }
        }
        b
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let side = self.bx.side as usize;
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            let col = i % side;
            let row = i / side;
            if col > 0 {
                acc -= x[i - 1];
            }
            if col + 1 < side {
                acc -= x[i + 1];
            }
            if row > 0 {
                acc -= x[i - side];
            }
            if row + 1 < side {
                acc -= x[i + side];
            }
            y[i] = acc;
        }
        y
    }

    /// Gershgorin bracket containing the whole spectrum.
    pub fn spectrum_bracket(&self) -> (f64, f64) {
        let lo = self.diag.iter().fold(f64::INFINITY, |a, &d| a.min(d)) - 4.0 - 1e-9;
        let hi = self.diag.iter().fold(f64::NEG_INFINITY, |a, &d| a.max(d)) + 4.0 + 1e-9;
        (lo, hi)
    }

    /// Distance from `e` to the spectrum, via inertia bisection.
    pub fn spectrum_distance(&self, e: f64) -> f64 {
        let banded = self.to_banded();
        let (lo, hi) = self.spectrum_bracket();
        let n = self.n();
        let tol = 1e-13 * (math::abs(hi) + math::abs(lo)).max(1.0);
        let k = banded.count_below(e);
        let mut dist = f64::INFINITY;
        if k >= 1 {
            // Largest eigenvalue below e.
            let (mut a, mut b) = (lo.min(e), e);
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if banded.count_below(mid) < k {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            dist = dist.min(e - 0.5 * (a + b));
        }
        if k < n {
            // Smallest eigenvalue at or above e.
            let (mut a, mut b) = (e, hi.max(e));
            while b - a > tol {
                let mid = 0.5 * (a + b);
                if banded.count_below(mid) > k {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            dist = dist.min(0.5 * (a + b) - e);
        }
        dist.max(0.0)
    }

    /// Smallest eigenvalue, via inertia bisection.
    pub fn min_eigenvalue(&self) -> f64 {
        let banded = self.to_banded();
        let (lo, hi) = self.spectrum_bracket();
        banded.min_eigenvalue(lo, hi, 1e-11)
    }
}

/// Eigensolve output: ascending eigenvalues (the descending convention is
/// exposed through [`SpectralData::desc`]), orthonormal eigenvector
/// columns, and the worst achieved residual `‖Hψ - Eψ‖₂`.
#[derive(Clone, Debug)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DenseMat,
    pub residual_tol: f64,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    /// k-th eigenvalue in descending order (`k = 0` is the largest).
    pub fn desc(&self, k: usize) -> f64 {
        self.eigenvalues[self.n() - 1 - k]
    }

    pub fn descending(&self) -> impl Iterator<Item = f64> + '_ {
        self.eigenvalues.iter().rev().copied()
    }

    pub fn eigenvector(&self, k: usize) -> Vec<f64> {
        self.eigenvectors.column(k)
    }
}

pub fn eigensolve(h: &HamiltonianMatrix) -> Result<SpectralData, SpectralError> {
    let dense = h.to_dense();
    let (eigenvalues, eigenvectors) = sym_eigen(&dense)?;
    let n = eigenvalues.len();
    let mut worst = 0.0f64;
    for k in 0..n {
        let col = eigenvectors.column(k);
        let hv = h.apply(&col);
        let mut res = 0.0;
        for i in 0..n {
            let r = hv[i] - eigenvalues[k] * col[i];
            res += r * r;
        }
        worst = worst.max(math::sqrt(res));
    }
    Ok(SpectralData { eigenvalues, eigenvectors, residual_tol: worst })
}

/// Guard radius around the spectrum below which a resolvent is refused.
pub const RESONANCE_GUARD: f64 = 1e-12;

/// Full resolvent `(H - e)^{-1}` as a dense matrix, computed by banded
/// factorized solves column by column. Refuses energies within
/// [`RESONANCE_GUARD`] of the spectrum.
pub fn resolvent(h: &HamiltonianMatrix, e: f64) -> Result<DenseMat, SpectralError> {
    let dist = h.spectrum_distance(e);
    if dist < RESONANCE_GUARD {
        return Err(SpectralError::Resonance { distance: dist });
    }
    let n = h.n();
    let side = h.bx.side as usize;
    let lu = BandedLu::factor(n, side, |i, j| {
        let v = h.entry(i, j);
        if i == j {
            v - e
        } else {
            v
        }
    })?;
    let mut out = DenseMat::zeros(n, n);
    let mut unit = vec![0.0f64; n];
    for j in 0..n {
        unit[j] = 1.0;
        let col = lu.solve(&unit);
        unit[j] = 0.0;
        for i in 0..n {
            out[(i, j)] = col[i];
        }
    }
    Ok(out)
}

/// Operator norm of the resolvent: `1 / dist(e, spec H)` for symmetric `H`.
pub fn resolvent_norm(h: &HamiltonianMatrix, e: f64) -> Result<f64, SpectralError> {
    let dist = h.spectrum_distance(e);
    if dist < RESONANCE_GUARD {
        return Err(SpectralError::Resonance { distance: dist });
    }
    Ok(1.0 / dist)
}

/// Outcome of the geometric resolvent identity evaluation.
#[derive(Clone, Copy, Debug)]
pub struct GeomResReport {
    /// Worst absolute deviation between the two sides of the identity over
    /// all `x ∈ inner`, `y ∈ outer`.
    pub max_identity_residual: f64,
    /// Worst slack in the boundary-pair inequality with the `|∂Λ'|` factor.
    pub inequality_margin: f64,
    /// Worst slack in the coarser `|Λ|`-factor inequality.
    pub coarse_margin: f64,
}

/// Evaluates `R_Λ(x,y) = R_{Λ'}(x,y) + Σ_{(u,v) ∈ ∂Λ'} R_{Λ'}(x,u) R_Λ(v,y)`
/// for all `x ∈ inner`, `y ∈ outer`, together with its inequality forms.
pub fn geometric_resolvent_check(
    h: &HamiltonianMatrix,
    inner: &Square,
    e: f64,
) -> Result<GeomResReport, SpectralError> {
    if !h.bx.contains_square(inner) {
        return Err(SpectralError::Geometry(GeometryError::NotContained));
    }
    let outer_res = resolvent(h, e)?;
    let h_inner = assemble(inner, &h.potential)?;
    let inner_res = resolvent(&h_inner, e)?;
    let pairs = box_boundary(inner, &h.bx)?;

    let outer_index = |s: Site| h.bx.index_of(s).expect("inside outer box");
    let inner_index = |s: Site| inner.index_of(s);

    let mut max_residual = 0.0f64;
    let mut inequality_margin = f64::INFINITY;
    let mut coarse_margin = f64::INFINITY;
    let boundary_count = pairs.len() as f64;
    let volume = (h.bx.side * h.bx.side) as f64;

    for x in inner.sites() {
        let xi = inner_index(x).unwrap();
        for y in h.bx.sites() {
            let yo = outer_index(y);
            let lhs = outer_res[(outer_index(x), yo)];
            let direct = inner_index(y).map(|yi| inner_res[(xi, yi)]).unwrap_or(0.0);
            let mut coupling = 0.0;
            let mut peak = 0.0f64;
            for &(u, v) in &pairs {
                let term = inner_res[(xi, inner_index(u).unwrap())] * outer_res[(outer_index(v), yo)];
                coupling += term;
                peak = peak.max(math::abs(term));
            }
            max_residual = max_residual.max(math::abs(lhs - (direct + coupling)));
            inequality_margin =
                inequality_margin.min(math::abs(direct) + boundary_count * peak - math::abs(lhs));
            coarse_margin =
                coarse_margin.min(math::abs(direct) + volume * peak - math::abs(lhs));
        }
    }
    Ok(GeomResReport { max_identity_residual: max_residual, inequality_margin, coarse_margin })
}

/// Verdict of a deterministic checker whose premises may fail to hold.
#[derive(Clone, Debug, PartialEq)]
pub enum CheckOutcome {
    /// Premises and conclusion both verified; `margin ≥ 0` is the slack.
    Holds { margin: f64 },
    /// Premises hold but the conclusion failed (should never happen).
    Violated { margin: f64 },
    /// Premises could not be verified; the checker abstains.
    Inapplicable,
}

impl CheckOutcome {
    pub fn is_conclusive_failure(&self) -> bool {
        matches!(self, CheckOutcome::Violated { .. })
    }
}

/// Energy-window transfer: if `|R_Ē(x,y)| ≤ e^{α - β|x-y|}` entrywise, then
/// for `|E - Ē| ≤ 1/(2L²e^α)` the doubled bound holds. Checks the
/// hypothesis first and abstains when it fails.
pub fn energy_window_check(
    h: &HamiltonianMatrix,
    ebar: f64,
    alpha: f64,
    beta_rate: f64,
    probes: usize,
) -> Result<CheckOutcome, SpectralError> {
    let base = resolvent(h, ebar)?;
    let n = h.n();
    let sites: Vec<Site> = h.bx.sites().collect();
    for i in 0..n {
        for j in 0..n {
            let bound = math::exp(alpha - beta_rate * sites[i].linf_dist(sites[j]) as f64);
            if math::abs(base[(i, j)]) > bound {
                return Ok(CheckOutcome::Inapplicable);
            }
        }
    }
    let radius = 1.0 / (2.0 * n as f64 * math::exp(alpha));
    let mut margin = f64::INFINITY;
    for p in 0..probes {
        let frac = if probes == 1 { 1.0 } else { p as f64 / (probes - 1) as f64 * 2.0 - 1.0 };
        let e = ebar + frac * radius;
        let shifted = resolvent(h, e)?;
        for i in 0..n {
            for j in 0..n {
                let bound = 2.0 * math::exp(alpha - beta_rate * sites[i].linf_dist(sites[j]) as f64);
                margin = margin.min(bound - math::abs(shifted[(i, j)]));
            }
        }
    }
    if margin >= 0.0 {
        Ok(CheckOutcome::Holds { margin })
    } else {
        Ok(CheckOutcome::Violated { margin })
    }
}

/// Rank-one eigenvalue push. Indices are 0-based into the descending
/// eigenvalue order; `i` and `j` locate the trapped eigenvalues
/// (`E_j ≤ E_i < r1`), `k` the bumped coordinate. The unknown universal
/// constant in the radius condition is the caller-supplied `c`.
#[allow(clippy::too_many_arguments)]
pub fn eigenvalue_push_check(
    a: &DenseMat,
    k: usize,
    radii: [f64; 5],
    i: usize,
    j: usize,
    c: f64,
) -> Result<CheckOutcome, SpectralError> {
    let n = a.rows;
    if k >= n || i >= n || j >= n || j < i {
        return Err(SpectralError::BadParameter);
    }
    let [r1, r2, r3, r4, r5] = radii;
    // (A) ordered radii inside (0, 1).
    if !(0.0 < r1 && r1 < r2 && r2 < r3 && r3 < r4 && r4 < r5 && r5 < 1.0) {
        return Ok(CheckOutcome::Inapplicable);
    }
    // (B) smallness of r1 against the configured universal constant.
    if r1 > c * (r3 * r5).min(r2 * r3 / r4) {
        return Ok(CheckOutcome::Inapplicable);
    }
    let (evals, evecs) = sym_eigen(a)?;
    let desc = |idx: usize| evals[n - 1 - idx];
    // (C) both eigenvalues trapped below r1 with a gap above.
    let upper_ok = if i == 0 { true } else { desc(i - 1) > r2 };
    if !(desc(j) > 0.0 && desc(j) <= desc(i) && desc(i) < r1 && upper_ok) {
        return Ok(CheckOutcome::Inapplicable);
    }
    // (D) mass of the pushed eigenvector at coordinate k.
    let vj = evecs.column(n - 1 - j);
    if vj[k] * vj[k] < r3 {
        return Ok(CheckOutcome::Inapplicable);
    }
    // (E) little nearby-band mass at coordinate k.
    let mut band_mass = 0.0;
    for (idx, &ev) in evals.iter().enumerate() {
        if ev > r2 && ev < r5 {
            let comp = evecs[(k, idx)];
            band_mass += comp * comp;
        }
    }
    if band_mass > r4 {
        return Ok(CheckOutcome::Inapplicable);
    }

    let before = evals.iter().filter(|&&ev| ev >= r1).count();
    let mut bumped = a.clone();
    bumped[(k, k)] += 1.0;
    let (after_evals, _) = sym_eigen(&bumped)?;
    let after = after_evals.iter().filter(|&&ev| ev >= r1).count();
    if after > before {
        Ok(CheckOutcome::Holds { margin: (after - before) as f64 })
    } else {
        Ok(CheckOutcome::Violated { margin: (after as f64) - (before as f64) })
    }
}

/// Almost-orthogonal vector count: if all pairwise Gram deviations are
/// below `1/√(5n)`, at most `(5-√5)n/2` vectors fit.
pub fn almost_orthogonal_count(vectors: &[Vec<f64>]) -> CheckOutcome {
    let m = vectors.len();
    if m == 0 {
        return CheckOutcome::Holds { margin: 0.0 };
    }
    let n = vectors[0].len();
    let threshold = 1.0 / math::sqrt(5.0 * n as f64);
    let mut max_dev = 0.0f64;
    for a in 0..m {
        for b in a..m {
            let dot: f64 = vectors[a].iter().zip(&vectors[b]).map(|(x, y)| x * y).sum();
            let target = if a == b { 1.0 } else { 0.0 };
            max_dev = max_dev.max(math::abs(dot - target));
        }
    }
    if max_dev >= threshold {
        return CheckOutcome::Inapplicable;
    }
    let bound = (5.0 - math::sqrt(5.0)) * n as f64 / 2.0;
    let margin = bound - m as f64;
    if margin >= 0.0 {
        CheckOutcome::Holds { margin }
    } else {
        CheckOutcome::Violated { margin }
    }
}

/// Best `lp`-square by sup-norm mass whose doubling avoids the given
/// squares, together with the mass ratio and the implied decay constant.
pub fn large_mass_square_search(
    psi: &[f64],
    bx: &Square,
    avoid: &[Square],
    lp: i64,
) -> Result<(Square, f64, f64), SpectralError> {
    if psi.len() != (bx.side * bx.side) as usize || lp < 1 || lp > bx.side {
        return Err(SpectralError::BadParameter);
    }
    let global = psi.iter().fold(0.0f64, |a, &v| a.max(math::abs(v)));
    if global == 0.0 {
        return Err(SpectralError::BadParameter);
    }
    let mut best: Option<(Square, f64)> = None;
    for y0 in bx.corner.y..=(bx.y_hi() - lp + 1) {
        for x0 in bx.corner.x..=(bx.x_hi() - lp + 1) {
            let cand = Square::new(Site::new(x0, y0), lp).unwrap();
            let doubled = cand.scale(crate::geometry::ScaleFactor::Two).unwrap();
            if !bx.contains_square(&doubled) {
                continue;
            }
            if avoid.iter().any(|a| a.intersects(&doubled)) {
                continue;
            }
            let mut local = 0.0f64;
            for site in cand.sites() {
                local = local.max(math::abs(psi[bx.index_of(site).unwrap()]));
            }
            if best.as_ref().map(|&(_, b)| local > b).unwrap_or(true) {
                best = Some((cand, local));
            }
        }
    }
    let (square, local) = best.ok_or(SpectralError::NoAdmissibleSquare)?;
    let ratio = local / global;
    let implied = if ratio > 0.0 { -math::ln(ratio) / lp as f64 } else { f64::INFINITY };
    Ok((square, ratio, implied))
}

/// Wilson score interval at 95%.
pub fn wilson_interval(hits: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959963984540054f64;
    let n = trials as f64;
    let p = hits as f64 / n;
    let z2 = z * z;
    let center = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = z * math::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / (1.0 + z2 / n);
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Monte Carlo resonance estimate.
#[derive(Clone, Copy, Debug)]
pub struct WegnerEstimate {
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub hits: u64,
    pub trials: u64,
}

/// Frequency of `‖(H_Λ - Ē)^{-1}‖ > e^{L1}`, i.e. of an eigenvalue within
/// `e^{-L1}` of `Ē`, under frozen-site conditioning. Detection goes
/// through inertia counts, so no eigenproblem is solved.
#[allow(clippy::too_many_arguments)]
pub fn wegner_mc(
    spec: &EnsembleSpec,
    bx: &Square,
    ebar: f64,
    l1: f64,
    frozen: &FrozenAssignment,
    trials: u64,
    seed: u64,
) -> Result<WegnerEstimate, SpectralError> {
    if trials == 0 {
        return Err(SpectralError::BadParameter);
    }
    let tau = math::exp(-l1);
    let mut hits = 0u64;
    for replica in 0..trials {
        let field = sample_potential(spec, bx, frozen, seed, replica)
            .map_err(|_| SpectralError::BadParameter)?;
        let h = assemble(bx, &field)?;
        let banded = h.to_banded();
        if banded.count_in(ebar - tau, ebar + tau) > 0 {
            hits += 1;
        }
    }
    let p_hat = hits as f64 / trials as f64;
    let (ci_lo, ci_hi) = wilson_interval(hits, trials);
    Ok(WegnerEstimate { p_hat, ci_lo, ci_hi, hits, trials })
}

/// Experimental: resonance frequency conditioned on a quasi-localization
/// screen. A sample qualifies when every eigenfunction with eigenvalue
/// within `e^{-l5}` of `ebar` satisfies
/// `e^{l4}·‖ψ‖_{ℓ2(Λ∖G)} ≤ ‖ψ‖ ≤ (1 + L^{-delta})·‖ψ‖_{ℓ2(G)}`;
/// the estimate is the resonance frequency among qualifying samples.
/// Requires full eigensolves, so it is desk-scale only.
#[allow(clippy::too_many_arguments)]
pub fn wegner_mc_conditional(
    spec: &EnsembleSpec,
    bx: &Square,
    ebar: f64,
    l1: f64,
    frozen: &FrozenAssignment,
    mass_set: &crate::geometry::SiteSet,
    l4: f64,
    l5: f64,
    delta: f64,
    trials: u64,
    seed: u64,
) -> Result<(WegnerEstimate, u64), SpectralError> {
    if trials == 0 {
        return Err(SpectralError::BadParameter);
    }
    let tau = math::exp(-l1);
    let window = math::exp(-l5);
    let slack = 1.0 + math::powf(bx.side as f64, -delta);
    let g_indices: Vec<usize> =
        mass_set.iter().filter_map(|p| bx.index_of(p)).collect();
    let off_indices: Vec<usize> = bx
        .sites()
        .filter(|p| !mass_set.contains(*p))
        .map(|p| bx.index_of(p).unwrap())
        .collect();
    let mut qualifying = 0u64;
    let mut hits = 0u64;
    for replica in 0..trials {
        let field = sample_potential(spec, bx, frozen, seed, replica)
            .map_err(|_| SpectralError::BadParameter)?;
        let h = assemble(bx, &field)?;
        let data = eigensolve(&h)?;
        let mut qualifies = true;
        for (k, &e) in data.eigenvalues.iter().enumerate() {
            if math::abs(e - ebar) > window {
                continue;
            }
            let psi = data.eigenvector(k);
            let norm_sq = |ix: &[usize]| -> f64 { ix.iter().map(|&i| psi[i] * psi[i]).sum() };
            let off = math::sqrt(norm_sq(&off_indices));
            let on = math::sqrt(norm_sq(&g_indices));
            if math::exp(l4) * off > 1.0 || 1.0 > slack * on {
                qualifies = false;
                break;
            }
        }
        if !qualifies {
            continue;
        }
        qualifying += 1;
        if h.to_banded().count_in(ebar - tau, ebar + tau) > 0 {
            hits += 1;
        }
    }
    let p_hat = if qualifying > 0 { hits as f64 / qualifying as f64 } else { f64::NAN };
    let (ci_lo, ci_hi) = wilson_interval(hits, qualifying.max(1));
    Ok((WegnerEstimate { p_hat, ci_lo, ci_hi, hits, trials: qualifying }, qualifying))
}

/// Sorted smallest-eigenvalue samples for each requested box side.
pub fn low_spectrum_histogram(
    spec: &EnsembleSpec,
    sides: &[i64],
    trials: u64,
    seed: u64,
) -> Result<Vec<(i64, Vec<f64>)>, SpectralError> {
    if trials == 0 {
        return Err(SpectralError::BadParameter);
    }
    let mut out = Vec::new();
    for &side in sides {
        let bx = Square::new(Site::new(0, 0), side)?;
        let mut samples = Vec::with_capacity(trials as usize);
        for replica in 0..trials {
            let field = sample_potential(spec, &bx, &FrozenAssignment::new(), seed, replica)
                .map_err(|_| SpectralError::BadParameter)?;
            let h = assemble(&bx, &field)?;
            samples.push(h.min_eigenvalue());
        }
        samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
        out.push((side, samples));
    }
    Ok(out)
}

/// Dirichlet ground energy of the clean box: `8 sin²(π / (2(L+1)))`.
pub fn clean_ground_energy(side: i64) -> f64 {
    let s = math::sin(core::f64::consts::PI / (2.0 * (side as f64 + 1.0)));
    8.0 * s * s
}

/// Resonance threshold ladder `s_ℓ = e^{-L1 + ℓ(L2 - L4 + C)}`.
#[derive(Clone, Copy, Debug)]
pub struct ResonanceLadder {
    pub l1: f64,
    pub l2: f64,
    pub l4: f64,
    pub c: f64,
}

impl ResonanceLadder {
    pub fn new(l1: f64, l2: f64, l4: f64, c: f64) -> Result<Self, SpectralError> {
        if !(l2 - l4 + c > 0.0) {
            return Err(SpectralError::BadParameter);
        }
        Ok(ResonanceLadder { l1, l2, l4, c })
    }

    pub fn level(&self, ell: u32) -> f64 {
        math::exp(-self.l1 + ell as f64 * (self.l2 - self.l4 + self.c))
    }

    /// Number of levels until the ladder passes `e^{-L2}`.
    pub fn levels_to_coarse(&self) -> u32 {
        let mut ell = 0;
        while self.level(ell) < math::exp(-self.l2) && ell < 10_000 {
            ell += 1;
        }
        ell
    }
}
