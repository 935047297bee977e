//! Product measures on the discrete hypercube, Poisson-binomial layer
//! laws, κ-Sperner verification, LYM sums, and the exact maximal-chain
//! sampler whose layer marginals reproduce the conditioned product law.
//!
//! Subsets of `{1, …, N}` are bit vectors (`u32`, so `N ≤ 30` for the
//! exact routines).

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;
use crate::rng::KeyedStream;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SpernerError {
    BadProbability,
    GroundSetTooLarge,
    EmptyFamily,
    BadSubset,
}

impl fmt::Display for SpernerError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpernerError::BadProbability => write!(f, "probabilities must lie in (0, 1)"),
            SpernerError::GroundSetTooLarge => write!(f, "ground set too large for exact routine"),
            SpernerError::EmptyFamily => write!(f, "family is empty"),
            SpernerError::BadSubset => write!(f, "subset escapes the ground set"),
        }
    }
}

/// Independent Bernoulli coordinates with probabilities `p_1..p_N`, all
/// strictly inside `(0, 1)`.
#[derive(Clone, Debug)]
pub struct ProductLaw {
    probs: Vec<f64>,
    beta: f64,
}

impl ProductLaw {
    pub fn new(probs: Vec<f64>) -> Result<Self, SpernerError> {
        if probs.is_empty() || probs.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(SpernerError::BadProbability);
        }
        let beta = probs.iter().map(|&p| p.min(1.0 - p)).fold(1.0, f64::min);
        Ok(ProductLaw { probs, beta })
    }

    pub fn uniform(n: usize) -> Self {
        ProductLaw::new(vec![0.5; n]).expect("uniform law is valid")
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Odds `q_j = p_j / (1 - p_j)`.
    pub fn odds(&self, j: usize) -> f64 {
        self.probs[j] / (1.0 - self.probs[j])
    }

    /// Exact probability of one configuration.
    pub fn point_prob(&self, mask: u32) -> f64 {
        let mut prob = 1.0;
        for (j, &p) in self.probs.iter().enumerate() {
            prob *= if mask >> j & 1 == 1 { p } else { 1.0 - p };
        }
        prob
    }
}

/// Exact Poisson-binomial law of the layer index `|ξ|` by dynamic
/// programming; entry `k` is `P[|ξ| = k]`.
pub fn layer_law(law: &ProductLaw) -> Vec<f64> {
    let n = law.len();
    let mut pmf = vec![0.0; n + 1];
    pmf[0] = 1.0;
    for (count, &p) in law.probs().iter().enumerate() {
        for k in (0..=count + 1).rev() {
            let stay = if k <= count { pmf[k] * (1.0 - p) } else { 0.0 };
            let step = if k > 0 { pmf[k - 1] * p } else { 0.0 };
            pmf[k] = stay + step;
        }
    }
    pmf
}

/// A family of subsets of `{1, …, N}` as distinct bit vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubsetFamily {
    n: usize,
    members: Vec<u32>,
}

impl SubsetFamily {
    pub fn new(n: usize, mut members: Vec<u32>) -> Result<Self, SpernerError> {
        if n > 30 {
            return Err(SpernerError::GroundSetTooLarge);
        }
        let mask = if n == 32 { u32::MAX } else { (1u32 << n) - 1 };
        if members.iter().any(|&m| m & !mask != 0) {
            return Err(SpernerError::BadSubset);
        }
        members.sort_unstable();
        members.dedup();
        Ok(SubsetFamily { n, members })
    }

    /// All subsets of a fixed cardinality.
    pub fn layer(n: usize, k: usize) -> Result<Self, SpernerError> {
        let members = (0u32..1 << n).filter(|m| m.count_ones() as usize == k).collect();
        SubsetFamily::new(n, members)
    }

    pub fn ground_size(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn full_mask(&self) -> u32 {
        (1u32 << self.n) - 1
    }

    /// Exact probability that a product-law draw lands in the family.
    pub fn probability(&self, law: &ProductLaw) -> f64 {
        self.members.iter().map(|&m| law.point_prob(m)).sum()
    }
}

/// The κ-Sperner margin of a family together with the canonical maximal
/// witnesses `B(η) = η^c ∖ ∪{η' ∈ 𝒜 : η' ⊋ η}`.
#[derive(Clone, Debug)]
pub struct KappaSperner {
    /// Largest κ for which the family is κ-Sperner; 0 when some witness is
    /// empty, 1 for antichains.
    pub kappa_star: f64,
    pub witnesses: BTreeMap<u32, u32>,
}

/// Computes the κ-Sperner margin. The canonical witness is the unique
/// inclusion-maximal valid choice, so the family is κ-Sperner exactly for
/// `κ ≤ kappa_star`. Members equal to the full set are vacuous.
pub fn kappa_sperner_max(family: &SubsetFamily) -> Result<KappaSperner, SpernerError> {
    if family.is_empty() {
        return Err(SpernerError::EmptyFamily);
    }
    let full = family.full_mask();
    let mut kappa_star = 1.0f64;
    let mut witnesses = BTreeMap::new();
    for &eta in family.members() {
        let complement = !eta & full;
        if complement == 0 {
            continue;
        }
        let mut blocked = 0u32;
        for &other in family.members() {
            if other != eta && other & eta == eta {
                blocked |= other;
            }
        }
        let witness = complement & !blocked;
        witnesses.insert(eta, witness);
        let ratio = witness.count_ones() as f64 / complement.count_ones() as f64;
        if ratio < kappa_star {
            kappa_star = ratio;
        }
    }
    Ok(KappaSperner { kappa_star, witnesses })
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Classical and layer-weighted LYM sums:
/// `Σ_η C(N,|η|)^{-1}` and `Σ_k P[ξ ∈ 𝒜_k] / P[|ξ| = k]`.
pub fn lym_sums(family: &SubsetFamily, law: &ProductLaw) -> (f64, f64) {
    let n = family.ground_size();
    let classical: f64 =
        family.members().iter().map(|&m| 1.0 / binomial(n, m.count_ones() as usize)).sum();
    let layers = layer_law(law);
    let mut by_layer = vec![0.0f64; n + 1];
    for &m in family.members() {
        by_layer[m.count_ones() as usize] += law.point_prob(m);
    }
    let weighted: f64 = by_layer
        .iter()
        .zip(&layers)
        .filter(|&(&num, _)| num > 0.0)
        .map(|(&num, &den)| num / den)
        .sum();
    (classical, weighted)
}

/// One chain step: the law of the element added to `psi` (`|psi| = k`),
/// with `P[add j] ∝ q_j · h_{psi,j}` where
/// `h_{psi,j} = Σ_{|η|=k, η∌j} (|psi∖η|+1)^{-1} Π_{ℓ∈η} q_ℓ`.
///
/// `h` is evaluated by a DP over positions tracking `(|η|, |η ∩ psi|)`,
/// exact and `O(N·k²)` per candidate instead of the exponential sum.
pub fn chain_step_distribution(
    law: &ProductLaw,
    psi: u32,
) -> Result<Vec<(usize, f64)>, SpernerError> {
    let n = law.len();
    if n > 30 {
        return Err(SpernerError::GroundSetTooLarge);
    }
    let k = psi.count_ones() as usize;
    if k >= n {
        return Err(SpernerError::BadSubset);
    }
    let mut weights: Vec<(usize, f64)> = Vec::new();
    for j in 0..n {
        if psi >> j & 1 == 1 {
            continue;
        }
        let h = h_function(law, psi, j);
        weights.push((j, law.odds(j) * h));
    }
    let total: f64 = weights.iter().map(|&(_, w)| w).sum();
    debug_assert!(total > 0.0);
    Ok(weights.into_iter().map(|(j, w)| (j, w / total)).collect())
}

fn h_function(law: &ProductLaw, psi: u32, j: usize) -> f64 {
    let n = law.len();
    let k = psi.count_ones() as usize;
    // dp[c][m] = sum over partial subsets η with |η| = c, |η ∩ psi| = m of Π q.
    let mut dp = vec![vec![0.0f64; k + 1]; k + 1];
    dp[0][0] = 1.0;
    for l in 0..n {
        if l == j {
            continue;
        }
        let q = law.odds(l);
        let in_psi = psi >> l & 1 == 1;
        for c in (0..k).rev() {
            for m in 0..=c {
                let add = dp[c][m] * q;
                if add == 0.0 {
                    continue;
                }
                if in_psi {
                    dp[c + 1][m + 1] += add;
                } else {
                    dp[c + 1][m] += add;
                }
            }
        }
    }
    // |psi ∖ η| = k - |η ∩ psi|.
    (0..=k).map(|m| dp[k][m] / (k - m + 1) as f64).sum()
}

/// A maximal chain `∅ = ψ_0 ⊂ ψ_1 ⊂ … ⊂ ψ_N`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaximalChain {
    sets: Vec<u32>,
}

impl MaximalChain {
    pub fn sets(&self) -> &[u32] {
        &self.sets
    }

    pub fn at_layer(&self, k: usize) -> u32 {
        self.sets[k]
    }
}

/// Sample a maximal chain by iterating the one-step law; keyed and
/// replay-deterministic.
pub fn sample_chain(law: &ProductLaw, seed: u64, replica: u64) -> Result<MaximalChain, SpernerError> {
    let n = law.len();
    let mut stream = KeyedStream::new(seed, replica ^ 0xc4a1);
    let mut sets = Vec::with_capacity(n + 1);
    let mut psi = 0u32;
    sets.push(psi);
    for _ in 0..n {
        let dist = chain_step_distribution(law, psi)?;
        let weights: Vec<f64> = dist.iter().map(|&(_, w)| w).collect();
        let pick = dist[stream.next_weighted(&weights)].0;
        psi |= 1 << pick;
        sets.push(psi);
    }
    Ok(MaximalChain { sets })
}

/// Exact layer-`k` marginal of the chain by forward recursion over all
/// masks. Dense in the ground set, so `N ≤ 20`.
pub fn chain_marginal(law: &ProductLaw, k: usize) -> Result<Vec<(u32, f64)>, SpernerError> {
    let n = law.len();
    if n > 20 {
        return Err(SpernerError::GroundSetTooLarge);
    }
    if k > n {
        return Err(SpernerError::BadSubset);
    }
    let mut probs = vec![0.0f64; 1 << n];
    probs[0] = 1.0;
    for level in 0..k {
        let mut next = vec![0.0f64; 1 << n];
        for (mask, &pr) in probs.iter().enumerate() {
            if pr == 0.0 || (mask as u32).count_ones() as usize != level {
                continue;
            }
            for (j, w) in chain_step_distribution(law, mask as u32)? {
                next[mask | 1 << j] += pr * w;
            }
        }
        probs = next;
    }
    Ok(probs
        .into_iter()
        .enumerate()
        .filter(|&(mask, pr)| pr > 0.0 && (mask as u32).count_ones() as usize == k)
        .map(|(mask, pr)| (mask as u32, pr))
        .collect())
}

/// Exact family probability together with the scale-invariant ratio
/// `P[ξ ∈ 𝒜] · κ* · √N · β^{5/2} (1-β)^{-3/2}`, the quantity a universal
/// constant is claimed to dominate. Reported for empirical study, never
/// asserted against an invented constant.
pub fn combbound_probe(
    family: &SubsetFamily,
    law: &ProductLaw,
) -> Result<(f64, f64), SpernerError> {
    if family.ground_size() > 25 {
        return Err(SpernerError::GroundSetTooLarge);
    }
    let prob = family.probability(law);
    if family.is_empty() {
        return Ok((0.0, 0.0));
    }
    let kappa = kappa_sperner_max(family)?.kappa_star;
    let n = family.ground_size() as f64;
    let beta = law.beta();
    let ratio = prob * kappa * math::sqrt(n) * math::powf(beta, 2.5) / math::powf(1.0 - beta, 1.5);
    Ok((prob, ratio))
}

#[cfg(test)]
mod tests;
