//! Constructive uniform Bernoulli decompositions.
//!
//! Given a law `X` on `[0, M]` that is anti-concentrated with gap `γ` and
//! remainder `ρ`, produce step/ramp functions `(Y, Z)` on `(0, 1)` and a
//! probability `p` so that `X ≐ Y(t) + Z(t)ξ` with `t` uniform and `ξ`
//! Bernoulli(`p`), with `p` inside a closed-form window and `Z` bounded
//! below by a closed-form `ι > 0` independent of the particular law.
//!
//! The construction locates a mass point, partitions a nearby band into
//! `K = 8·⌈max{2/ρ, 2M/γ}⌉ + 1` intervals, finds an adjacent low-mass
//! pair, splits the CDF at the pair's midpoint, and reads `Y` and `Z` off
//! the quantile function: `Y(t) = G((1-p)t)`, `Z(t) = G(1-p+pt) - Y(t)`.

use alloc::vec::Vec;
use core::fmt;

use crate::ensembles::{anti_concentration, sup_cdf_distance, SiteDistribution};
use crate::math;

#[derive(Clone, Debug, PartialEq)]
pub enum DecompositionError {
    BadParameter,
    NotAntiConcentrated { required: f64, actual: f64 },
    /// The pigeonhole step failed to produce an adjacent low-mass pair;
    /// impossible under a verified anti-concentration precondition.
    NoLowMassPair,
}

impl fmt::Display for DecompositionError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecompositionError::BadParameter => write!(f, "parameter outside its domain"),
            DecompositionError::NotAntiConcentrated { required, actual } => {
                write!(f, "law is not anti-concentrated: remainder {actual} < required {required}")
            }
            DecompositionError::NoLowMassPair => {
                write!(f, "no adjacent low-mass interval pair (internal invariant)")
            }
        }
    }
}

/// Closed-form decomposition window: any admissible law decomposes with
/// `p ∈ [p_minus, p_plus]` and `inf Z ≥ iota`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformWindow {
    pub p_minus: f64,
    pub p_plus: f64,
    pub iota: f64,
}

/// Number of partition intervals for the low-mass pair search.
pub fn partition_count(gamma: f64, rho: f64, m: f64) -> i64 {
    8 * (math::ceil((2.0 / rho).max(2.0 * m / gamma)) as i64) + 1
}

/// The closed-form window parameters. The gap is clipped to `M/4` first
/// (anti-concentration is monotone, so a smaller gap remains valid).
pub fn uniform_parameter_bounds(
    gamma: f64,
    rho: f64,
    m: f64,
) -> Result<UniformWindow, DecompositionError> {
    if !(gamma > 0.0) || !(rho > 0.0 && rho < 1.0) || !(m > 0.0) {
        return Err(DecompositionError::BadParameter);
    }
    let g = gamma.min(m / 4.0);
    let p_minus = (rho / 2.0).min(g / (2.0 * m));
    let k = partition_count(g, rho, m);
    Ok(UniformWindow { p_minus, p_plus: 1.0 - p_minus, iota: g / (4.0 * k as f64) })
}

/// Piecewise-linear function on `(0, 1]` stored as contiguous segments
/// `(t0, t1, v0, v1)`: on `(t0, t1]` the value ramps linearly from `v0`
/// (right limit at `t0`) to `v1`. Jumps show up as value mismatches at
/// shared segment endpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRamp {
    segments: Vec<(f64, f64, f64, f64)>,
}

impl StepRamp {
    pub fn from_segments(segments: Vec<(f64, f64, f64, f64)>) -> Self {
        debug_assert!(!segments.is_empty());
        debug_assert!(segments.windows(2).all(|w| w[0].1 == w[1].0));
        StepRamp { segments }
    }

    pub fn segments(&self) -> &[(f64, f64, f64, f64)] {
        &self.segments
    }

    /// Value at `t ∈ (0, 1]` (the segment with `t0 < t ≤ t1` applies).
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|&(_, t1, _, _)| t1 < t);
        let (t0, t1, v0, v1) = self.segments[i.min(self.segments.len() - 1)];
        if t1 == t0 {
            return v1;
        }
        v0 + (t - t0) / (t1 - t0) * (v1 - v0)
    }

    /// Right limit at `t ∈ [0, 1)`.
    pub fn eval_right(&self, t: f64) -> f64 {
        let i = self.segments.partition_point(|&(_, t1, _, _)| t1 <= t);
        let (t0, t1, v0, v1) = self.segments[i.min(self.segments.len() - 1)];
        if t1 == t0 {
            return v1;
        }
        v0 + (t - t0) / (t1 - t0) * (v1 - v0)
    }

    /// Greatest lower bound over `(0, 1]` (segment endpoints suffice for a
    /// piecewise-linear function).
    pub fn inf(&self) -> f64 {
        self.segments.iter().map(|&(_, _, v0, v1)| v0.min(v1)).fold(f64::INFINITY, f64::min)
    }

    pub fn sup(&self) -> f64 {
        self.segments.iter().map(|&(_, _, v0, v1)| v0.max(v1)).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.segments.iter().map(|&(t0, _, _, _)| t0).collect();
        ts.push(1.0);
        ts
    }

    pub fn map_values<F: Fn(f64) -> f64>(&self, f: F) -> StepRamp {
        StepRamp {
            segments: self
                .segments
                .iter()
                .map(|&(t0, t1, v0, v1)| (t0, t1, f(v0), f(v1)))
                .collect(),
        }
    }

    /// Pointwise combination on the common refinement of both partitions.
    pub fn combine<F: Fn(f64, f64) -> f64>(&self, other: &StepRamp, f: F) -> StepRamp {
        let mut cuts: Vec<f64> =
            self.breakpoints().into_iter().chain(other.breakpoints()).collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        let mut segments = Vec::with_capacity(cuts.len());
        for w in cuts.windows(2) {
            let (c0, c1) = (w[0], w[1]);
            if c1 <= c0 {
                continue;
            }
            let v0 = f(self.eval_right(c0), other.eval_right(c0));
            let v1 = f(self.eval(c1), other.eval(c1));
            segments.push((c0, c1, v0, v1));
        }
        StepRamp { segments }
    }

    /// Pushforward of the uniform law on `(0, 1]` through this function, as
    /// atoms (flat segments) and uniform pieces (ramps) weighted by `scale`.
    fn pushforward(
        &self,
        scale: f64,
        atoms: &mut Vec<(f64, f64)>,
        pieces: &mut Vec<(f64, f64, f64)>,
    ) {
        for &(t0, t1, v0, v1) in &self.segments {
            let mass = scale * (t1 - t0);
            if mass <= 0.0 {
                continue;
            }
            if v0 == v1 {
                atoms.push((v0, mass));
            } else {
                pieces.push((v0.min(v1), v0.max(v1), mass));
            }
        }
    }
}

/// Quantile function as explicit segments over `(0, 1]`: plateaus for
/// atoms, ramps for uniform pieces, jumps across support gaps.
fn quantile_segments(dist: &SiteDistribution) -> StepRamp {
    let bs = dist.breakpoints();
    let mut segments: Vec<(f64, f64, f64, f64)> = Vec::new();
    for (i, &b) in bs.iter().enumerate() {
        let cl = dist.cdf_left(b);
        let c = dist.cdf(b);
        if c > cl {
            segments.push((cl, c, b, b));
        }
        if let Some(&b2) = bs.get(i + 1) {
            let cl2 = dist.cdf_left(b2);
            if cl2 > c {
                segments.push((c, cl2, b, b2));
            }
        }
    }
    if let Some(first) = segments.first_mut() {
        first.0 = 0.0;
    }
    if let Some(last) = segments.last_mut() {
        last.1 = 1.0;
    }
    // Close rounding slivers between consecutive segments.
    for i in 1..segments.len() {
        segments[i].0 = segments[i - 1].1;
    }
    StepRamp::from_segments(segments)
}

/// Restriction of the quantile to `u ∈ (lo, hi]`, reparametrized to
/// `t ∈ (0, 1]` via `u = lo + (hi - lo)·t`.
fn quantile_window(g: &StepRamp, lo: f64, hi: f64) -> StepRamp {
    let width = hi - lo;
    let mut segments = Vec::new();
    for &(u0, u1, v0, v1) in g.segments() {
        let a = u0.max(lo);
        let b = u1.min(hi);
        if b <= a {
            continue;
        }
        let va = if u1 == u0 { v0 } else { v0 + (a - u0) / (u1 - u0) * (v1 - v0) };
        let vb = if u1 == u0 { v1 } else { v0 + (b - u0) / (u1 - u0) * (v1 - v0) };
        segments.push(((a - lo) / width, (b - lo) / width, va, vb));
    }
    if let Some(first) = segments.first_mut() {
        first.0 = 0.0;
    }
    if let Some(last) = segments.last_mut() {
        last.1 = 1.0;
    }
    for i in 1..segments.len() {
        segments[i].0 = segments[i - 1].1;
    }
    StepRamp::from_segments(segments)
}

/// A realized decomposition `X ≐ Y(t) + Z(t)ξ`.
#[derive(Clone, Debug)]
pub struct BernoulliDecomposition {
    pub p: f64,
    pub y: StepRamp,
    pub z: StepRamp,
    pub iota_witness: f64,
    pub gap_interval: (f64, f64),
}

impl BernoulliDecomposition {
    /// `Y + Z`: the value branch taken when the Bernoulli component fires.
    pub fn upper(&self) -> StepRamp {
        self.y.combine(&self.z, |a, b| a + b)
    }
}

const DECOMP_SLACK: f64 = 1e-12;

/// Decompose an anti-concentrated law. The returned `p` lies in the
/// window of [`uniform_parameter_bounds`] and `inf Z ≥ ι`.
pub fn decompose(
    dist: &SiteDistribution,
    gamma: f64,
    rho: f64,
) -> Result<BernoulliDecomposition, DecompositionError> {
    let m = dist.bound();
    let window = uniform_parameter_bounds(gamma, rho, m)?;
    let g = gamma.min(m / 4.0);
    let actual = anti_concentration(dist, g).map_err(|_| DecompositionError::BadParameter)?;
    if actual < rho - DECOMP_SLACK {
        return Err(DecompositionError::NotAntiConcentrated { required: rho, actual });
    }

    // Mass point: smallest x whose γ/2-window holds at least γ/2M.
    let target = g / (2.0 * m);
    let quarter = g / 4.0;
    let lo_support = dist.breakpoints()[0];
    let hi_support = *dist.breakpoints().last().unwrap();
    let mut candidates: Vec<f64> = Vec::new();
    for b in dist.breakpoints() {
        candidates.push(b - quarter);
        candidates.push(b);
        candidates.push(b + quarter);
    }
    candidates.push(lo_support);
    candidates.push(hi_support);
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut x = f64::NAN;
    for cand in candidates {
        let cand = cand.max(lo_support).min(hi_support);
        if dist.interval_mass(cand - quarter, cand + quarter) >= target - DECOMP_SLACK {
            x = cand;
            break;
        }
    }
    debug_assert!(!x.is_nan(), "a window of mass at least γ/2M always exists");

    if 1.0 - dist.cdf(x + g / 2.0) >= rho / 2.0 - DECOMP_SLACK {
        // At least ρ/2 of the mass sits above the window.
        decompose_above(dist, x, g, rho, m, window)
    } else {
        // Mirror branch: reflect about x, reuse the main construction,
        // then reflect the resulting functions back.
        let reflected = reflect(dist, x);
        let d = decompose_above(&reflected, x, g, rho, m, window)?;
        let upper = d.upper();
        let y = upper.map_values(|v| 2.0 * x - v);
        let z = d.z.clone();
        Ok(BernoulliDecomposition {
            p: 1.0 - d.p,
            y,
            z,
            iota_witness: d.iota_witness,
            gap_interval: d.gap_interval,
        })
    }
}

/// Main branch: at least ρ/2 of the mass lies above `x + γ/2`.
fn decompose_above(
    dist: &SiteDistribution,
    x: f64,
    g: f64,
    rho: f64,
    m: f64,
    window: UniformWindow,
) -> Result<BernoulliDecomposition, DecompositionError> {
    let k_count = partition_count(g, rho, m);
    let step = g / (4.0 * k_count as f64);
    let low_mass = 0.5 * (rho / 2.0).min(g / (2.0 * m));

    let mut pair = None;
    for k in 0..(k_count - 1) {
        let a0 = x + g / 4.0 + k as f64 * step;
        let m0 = dist.interval_mass(a0, a0 + step);
        let m1 = dist.interval_mass(a0 + step, a0 + 2.0 * step);
        if m0 <= low_mass + DECOMP_SLACK && m1 <= low_mass + DECOMP_SLACK {
            pair = Some(k);
            break;
        }
    }
    let k = pair.ok_or(DecompositionError::NoLowMassPair)?;
    let a = x + g / 4.0 + k as f64 * step;
    let b = a + 2.0 * step;
    let midpoint = a + step;
    let one_minus_p = dist.cdf(midpoint);
    let p = 1.0 - one_minus_p;

    let gq = quantile_segments(dist);
    let y = quantile_window(&gq, 0.0, one_minus_p);
    let upper = quantile_window(&gq, one_minus_p, 1.0);
    let z = upper.combine(&y, |u, v| u - v);

    Ok(BernoulliDecomposition { p, y, z, iota_witness: window.iota, gap_interval: (a, b) })
}

/// The law of `2x - X`, kept internal: its support generally escapes `[0, M]`.
fn reflect(dist: &SiteDistribution, x: f64) -> SiteDistribution {
    let atoms = dist.atoms().iter().map(|&(loc, m)| (2.0 * x - loc, m)).collect();
    let pieces =
        dist.pieces().iter().map(|&(lo, hi, m)| (2.0 * x - hi, 2.0 * x - lo, m)).collect();
    SiteDistribution::from_parts_unchecked(atoms, pieces, dist.bound())
        .expect("reflection preserves masses")
}

/// Exact reconstruction check: rebuilds the law of `Y(t) + Z(t)ξ` from the
/// stored segments as the mixture of the two pushforwards and returns the
/// sup-distance between its CDF and the target's.
pub fn verify_distribution(dist: &SiteDistribution, decomp: &BernoulliDecomposition) -> f64 {
    let mut atoms = Vec::new();
    let mut pieces = Vec::new();
    decomp.y.pushforward(1.0 - decomp.p, &mut atoms, &mut pieces);
    decomp.upper().pushforward(decomp.p, &mut atoms, &mut pieces);
    let reconstructed = SiteDistribution::from_parts_unchecked(atoms, pieces, dist.bound())
        .expect("pushforward masses sum to one");
    sup_cdf_distance(dist, &reconstructed)
}

#[cfg(test)]
mod tests;
