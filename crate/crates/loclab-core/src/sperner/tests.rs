use super::*;
use crate::rng::KeyedStream;
use alloc::vec;
use alloc::vec::Vec;

fn random_law(stream: &mut KeyedStream, n: usize, beta_floor: f64) -> ProductLaw {
    let probs: Vec<f64> =
        (0..n).map(|_| stream.next_range(beta_floor, 1.0 - beta_floor)).collect();
    ProductLaw::new(probs).unwrap()
}

#[test]
fn layer_law_examples() {
    let pmf = layer_law(&ProductLaw::uniform(4));
    let expect = [1.0, 4.0, 6.0, 4.0, 1.0];
    for (k, &e) in expect.iter().enumerate() {
        assert!((pmf[k] - e / 16.0).abs() < 1e-15);
    }

    let law = ProductLaw::new(vec![0.2, 0.8]).unwrap();
    let pmf = layer_law(&law);
    assert!((pmf[1] - 0.68).abs() < 1e-15);

    let mut stream = KeyedStream::new(4, 0);
    for n in [1usize, 5, 17] {
        let law = random_law(&mut stream, n, 0.05);
        let pmf = layer_law(&law);
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        // Exhaustive oracle at small n.
        if n <= 10 {
            for k in 0..=n {
                let brute: f64 = (0u32..1 << n)
                    .filter(|m| m.count_ones() as usize == k)
                    .map(|m| law.point_prob(m))
                    .sum();
                assert!((pmf[k] - brute).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn layer_concentration_stays_bounded() {
    // max_k P[|ξ| = k] · sqrt(β(1-β)N) should not grow with N.
    for &beta in &[0.1, 0.3, 0.5] {
        let mut prev_product = f64::INFINITY;
        for &n in &[64usize, 256, 1024] {
            let law = ProductLaw::new(vec![beta; n]).unwrap();
            let pmf = layer_law(&law);
            let peak = pmf.iter().fold(0.0f64, |a, &b| a.max(b));
            let product = peak * math::sqrt(beta * (1.0 - beta) * n as f64);
            assert!(product < 1.0, "beta {beta} n {n}: product {product}");
            // Allow small wiggle; the trend must not grow.
            assert!(product < prev_product * 1.05);
            prev_product = product;
        }
    }
}

#[test]
fn kappa_examples() {
    // One middle layer is a classical antichain.
    let layer = SubsetFamily::layer(4, 2).unwrap();
    let ks = kappa_sperner_max(&layer).unwrap();
    assert_eq!(ks.kappa_star, 1.0);

    // {∅, {1}} in the 2-cube: B(∅) = {2}, ratio 1/2.
    let fam = SubsetFamily::new(2, vec![0b00, 0b01]).unwrap();
    let ks = kappa_sperner_max(&fam).unwrap();
    assert!((ks.kappa_star - 0.5).abs() < 1e-15);
    assert_eq!(ks.witnesses[&0b00], 0b10);

    // A full chain has an empty witness at the bottom.
    let chain = SubsetFamily::new(2, vec![0b00, 0b01, 0b11]).unwrap();
    assert_eq!(kappa_sperner_max(&chain).unwrap().kappa_star, 0.0);
}

#[test]
fn kappa_witnesses_reverify() {
    let mut stream = KeyedStream::new(9, 0);
    for _ in 0..50 {
        let n = 5 + stream.next_index(3);
        let members: Vec<u32> =
            (0u32..1 << n).filter(|_| stream.next_unit() < 0.15).collect();
        if members.is_empty() {
            continue;
        }
        let fam = SubsetFamily::new(n, members).unwrap();
        let ks = kappa_sperner_max(&fam).unwrap();
        let full = (1u32 << n) - 1;
        for (&eta, &witness) in &ks.witnesses {
            assert_eq!(witness & eta, 0);
            assert_eq!(witness & !full, 0);
            for &other in fam.members() {
                if other != eta && other & eta == eta {
                    assert_eq!(other & witness, 0, "witness intersects a superset");
                }
            }
            // Maximality: every complement element outside the witness is
            // blocked by some superset in the family.
            let mut blocked = 0u32;
            for &other in fam.members() {
                if other != eta && other & eta == eta {
                    blocked |= other;
                }
            }
            assert_eq!(witness, !eta & full & !blocked);
        }
    }
}

/// All antichains of the n-cube by brute force (including the empty one).
fn antichains(n: usize) -> Vec<Vec<u32>> {
    let subsets = 1u32 << n;
    let mut result = Vec::new();
    for fam_mask in 0u64..(1 << subsets) {
        let members: Vec<u32> =
            (0..subsets).filter(|&s| fam_mask >> s & 1 == 1).collect();
        let ok = members.iter().all(|&a| {
            members.iter().all(|&b| a == b || (a & b != a && a & b != b))
        });
        if ok {
            result.push(members);
        }
    }
    result
}

#[test]
fn lym_examples_and_exhaustive_antichains() {
    // Middle layer of the 3-cube under the uniform law: equality.
    let fam = SubsetFamily::layer(3, 1).unwrap();
    let law = ProductLaw::uniform(3);
    let (classical, weighted) = lym_sums(&fam, &law);
    assert!((classical - 1.0).abs() < 1e-15);
    assert!((weighted - 1.0).abs() < 1e-12);
    let beta = law.beta();
    let kappa = kappa_sperner_max(&fam).unwrap().kappa_star;
    assert!(weighted <= (1.0 - beta) * (1.0 - beta) / (beta * beta * kappa) + 1e-12);

    // Every antichain of the 4-cube (Dedekind count 168), random laws.
    let all = antichains(4);
    assert_eq!(all.len(), 168);
    let mut stream = KeyedStream::new(14, 0);
    for members in all {
        if members.is_empty() {
            continue;
        }
        let fam = SubsetFamily::new(4, members).unwrap();
        let ks = kappa_sperner_max(&fam).unwrap();
        assert_eq!(ks.kappa_star, 1.0, "antichains are 1-Sperner");
        for _ in 0..3 {
            let law = random_law(&mut stream, 4, 0.15);
            let beta = law.beta();
            let (classical, weighted) = lym_sums(&fam, &law);
            assert!(classical <= 1.0 / ks.kappa_star + 1e-12);
            assert!(weighted <= (1.0 - beta) * (1.0 - beta) / (beta * beta) + 1e-12);
        }
    }
}

#[test]
fn lym_bounds_on_random_sperner_families() {
    let mut stream = KeyedStream::new(15, 0);
    let mut tested = 0;
    while tested < 120 {
        let n = 6 + stream.next_index(5);
        let members: Vec<u32> =
            (0u32..1 << n).filter(|_| stream.next_unit() < 0.05).collect();
        if members.is_empty() {
            continue;
        }
        let fam = SubsetFamily::new(n, members).unwrap();
        let ks = kappa_sperner_max(&fam).unwrap();
        if ks.kappa_star <= 0.0 {
            continue;
        }
        let law = random_law(&mut stream, n, 0.2);
        let beta = law.beta();
        let (classical, weighted) = lym_sums(&fam, &law);
        assert!(classical <= 1.0 / ks.kappa_star + 1e-9);
        assert!(
            weighted <= (1.0 - beta) * (1.0 - beta) / (beta * beta * ks.kappa_star) + 1e-9,
            "weighted {weighted} kappa {} beta {beta}",
            ks.kappa_star
        );
        tested += 1;
    }
}

#[test]
fn uniform_law_reproduces_cardinality_bound() {
    // κ-Sperner cardinality bound under the uniform law:
    // |𝒜| ≤ 2^N / (κ*·sqrt(N)).
    let mut stream = KeyedStream::new(16, 0);
    let mut tested = 0;
    while tested < 60 {
        let n = 6 + stream.next_index(4);
        let members: Vec<u32> =
            (0u32..1 << n).filter(|_| stream.next_unit() < 0.08).collect();
        if members.is_empty() {
            continue;
        }
        let fam = SubsetFamily::new(n, members).unwrap();
        let ks = kappa_sperner_max(&fam).unwrap();
        if ks.kappa_star <= 0.0 {
            continue;
        }
        let bound = (1u64 << n) as f64 / (ks.kappa_star * math::sqrt(n as f64));
        assert!(fam.len() as f64 <= bound + 1e-9);
        tested += 1;
    }
}

fn h_oracle(law: &ProductLaw, psi: u32, j: usize) -> f64 {
    let n = law.len();
    let k = psi.count_ones();
    let mut sum = 0.0;
    for eta in 0u32..1 << n {
        if eta.count_ones() != k || eta >> j & 1 == 1 {
            continue;
        }
        let mut prod = 1.0;
        for l in 0..n {
            if eta >> l & 1 == 1 {
                prod *= law.odds(l);
            }
        }
        sum += prod / ((psi & !eta).count_ones() as f64 + 1.0);
    }
    sum
}

#[test]
fn chain_step_examples_and_oracle() {
    // Forced last step.
    let law = ProductLaw::uniform(2);
    let dist = chain_step_distribution(&law, 0b01).unwrap();
    assert_eq!(dist.len(), 1);
    assert_eq!(dist[0].0, 1);
    assert!((dist[0].1 - 1.0).abs() < 1e-15);

    // First step of the uniform 3-cube is uniform.
    let law = ProductLaw::uniform(3);
    for (_, w) in chain_step_distribution(&law, 0).unwrap() {
        assert!((w - 1.0 / 3.0).abs() < 1e-15);
    }

    // Skewed law against the exhaustive sum, psi = {3} (bit 2).
    let law = ProductLaw::new(vec![0.2, 0.4, 0.6, 0.8]).unwrap();
    let psi = 0b100u32;
    let dist = chain_step_distribution(&law, psi).unwrap();
    let total_oracle: f64 = (0..4)
        .filter(|&j| psi >> j & 1 == 0)
        .map(|j| law.odds(j) * h_oracle(&law, psi, j))
        .sum();
    for (j, w) in dist {
        let expect = law.odds(j) * h_oracle(&law, psi, j) / total_oracle;
        assert!((w - expect).abs() < 1e-13, "j {j}: {w} vs {expect}");
    }

    // Random laws and random partial sets.
    let mut stream = KeyedStream::new(21, 0);
    for _ in 0..40 {
        let n = 3 + stream.next_index(5);
        let law = random_law(&mut stream, n, 0.1);
        let psi = (stream.next_u64() as u32) & ((1 << n) - 1);
        if psi.count_ones() as usize >= n {
            continue;
        }
        let dist = chain_step_distribution(&law, psi).unwrap();
        let total: f64 = dist.iter().map(|&(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let denom: f64 = (0..n)
            .filter(|&j| psi >> j & 1 == 0)
            .map(|j| law.odds(j) * h_oracle(&law, psi, j))
            .sum();
        for (j, w) in dist {
            let expect = law.odds(j) * h_oracle(&law, psi, j) / denom;
            assert!((w - expect).abs() < 1e-12);
        }
    }
}

#[test]
fn one_step_odds_ratio_bound() {
    // For all j, j' outside psi the contributions obey
    // β²/(1-β)² ≤ (q_j h_j)/(q_{j'} h_{j'}) ≤ (1-β)²/β².
    let mut stream = KeyedStream::new(22, 0);
    for _ in 0..60 {
        let n = 4 + stream.next_index(5);
        let law = random_law(&mut stream, n, 0.12);
        let beta = law.beta();
        let psi = (stream.next_u64() as u32) & ((1 << n) - 1);
        if psi.count_ones() as usize >= n {
            continue;
        }
        let weights: Vec<f64> = (0..n)
            .filter(|&j| psi >> j & 1 == 0)
            .map(|j| law.odds(j) * h_oracle(&law, psi, j))
            .collect();
        let lo = beta * beta / ((1.0 - beta) * (1.0 - beta));
        for &a in &weights {
            for &b in &weights {
                let ratio = a / b;
                assert!(ratio >= lo - 1e-10 && ratio <= 1.0 / lo + 1e-10);
            }
        }
    }
}

#[test]
fn chain_marginal_matches_conditioned_law() {
    assert_eq!(chain_marginal(&ProductLaw::uniform(3), 0).unwrap(), vec![(0, 1.0)]);

    let mut stream = KeyedStream::new(23, 0);
    for n in [2usize, 4, 6] {
        for _ in 0..6 {
            let law = random_law(&mut stream, n, 0.1);
            let layers = layer_law(&law);
            for k in 0..=n {
                let marginal = chain_marginal(&law, k).unwrap();
                let mut tv = 0.0;
                let mut seen = 0usize;
                for (mask, pr) in marginal {
                    let conditioned = law.point_prob(mask) / layers[k];
                    tv += (pr - conditioned).abs();
                    seen += 1;
                }
                assert_eq!(seen as f64, binomial(n, k));
                assert!(tv / 2.0 <= 1e-12, "n {n} k {k}: tv {tv}");
            }
        }
    }
}

#[test]
fn sampled_chains_match_exact_marginal() {
    let law = ProductLaw::new(vec![0.3, 0.5, 0.7, 0.4, 0.6, 0.25]).unwrap();
    let k = 3;
    let exact: BTreeMap<u32, f64> = chain_marginal(&law, k).unwrap().into_iter().collect();
    let trials = 20_000u64;
    let mut counts: BTreeMap<u32, u64> = BTreeMap::new();
    for r in 0..trials {
        let chain = sample_chain(&law, 77, r).unwrap();
        *counts.entry(chain.at_layer(k)).or_insert(0) += 1;
    }
    for (&mask, &p) in &exact {
        let freq = *counts.get(&mask).unwrap_or(&0) as f64 / trials as f64;
        let se = math::sqrt(p * (1.0 - p) / trials as f64);
        assert!(
            (freq - p).abs() <= 4.0 * se + 1e-9,
            "mask {mask:b}: freq {freq} expect {p}"
        );
    }
    // Replay determinism.
    assert_eq!(sample_chain(&law, 77, 5).unwrap(), sample_chain(&law, 77, 5).unwrap());
}

#[test]
fn combbound_probe_examples() {
    let fam = SubsetFamily::layer(16, 8).unwrap();
    let law = ProductLaw::uniform(16);
    let (prob, ratio) = combbound_probe(&fam, &law).unwrap();
    assert!((prob - binomial(16, 8) / 65536.0).abs() < 1e-12);
    assert!(ratio.is_finite() && ratio > 0.0);

    let empty = SubsetFamily::new(8, vec![]).unwrap();
    let (prob, _) = combbound_probe(&empty, &ProductLaw::uniform(8)).unwrap();
    assert_eq!(prob, 0.0);
}
