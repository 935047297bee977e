use super::*;
use alloc::vec;
use alloc::vec::Vec;
use proptest::prelude::*;

#[test]
fn window_examples() {
    let w = uniform_parameter_bounds(0.25, 0.5, 1.0).unwrap();
    assert!((w.p_minus - 0.125).abs() < 1e-15);
    assert!((w.p_plus - 0.875).abs() < 1e-15);
    assert!((w.iota - 1.0 / 1040.0).abs() < 1e-15);
    assert_eq!(partition_count(0.25, 0.5, 1.0), 65);

    // Gap clipped to M/4, ceiling inside the partition count.
    let w2 = uniform_parameter_bounds(1.0, 0.9, 4.0).unwrap();
    assert_eq!(partition_count(1.0, 0.9, 4.0), 65);
    assert!((w2.iota - 1.0 / 260.0).abs() < 1e-15);

    // Monotone in gamma.
    let mut prev = 0.0;
    for i in 1..=16 {
        let g = i as f64 / 16.0;
        let w = uniform_parameter_bounds(g, 0.5, 1.0).unwrap();
        assert!(w.iota >= prev);
        prev = w.iota;
    }

    assert!(uniform_parameter_bounds(0.0, 0.5, 1.0).is_err());
    assert!(uniform_parameter_bounds(0.25, 1.0, 1.0).is_err());
}

#[test]
fn two_point_law_decomposes_to_pure_bernoulli() {
    let d = SiteDistribution::bernoulli_half();
    let dec = decompose(&d, 0.25, 0.5).unwrap();
    assert!((dec.p - 0.5).abs() < 1e-12);
    assert_eq!(dec.y.inf(), 0.0);
    assert_eq!(dec.y.sup(), 0.0);
    assert_eq!(dec.z.inf(), 1.0);
    assert_eq!(dec.z.sup(), 1.0);
    assert_eq!(verify_distribution(&d, &dec), 0.0);
}

#[test]
fn uniform_law_decomposition() {
    let d = SiteDistribution::uniform_01();
    let w = uniform_parameter_bounds(0.25, 0.5, 1.0).unwrap();
    let dec = decompose(&d, 0.25, 0.5).unwrap();
    assert!(dec.p >= w.p_minus - 1e-12 && dec.p <= w.p_plus + 1e-12);
    assert!(dec.z.inf() >= w.iota - 1e-12);
    assert!(verify_distribution(&d, &dec) <= 1e-9);
}

#[test]
fn three_atom_law_verifies_exactly() {
    let d = SiteDistribution::three_atom();
    let dec = decompose(&d, 0.25, 0.5).unwrap();
    assert!(verify_distribution(&d, &dec) <= 1e-9);
    let w = uniform_parameter_bounds(0.25, 0.5, 1.0).unwrap();
    assert!(dec.p >= w.p_minus - 1e-12 && dec.p <= w.p_plus + 1e-12);
    assert!(dec.z.inf() >= w.iota - 1e-12);
}

#[test]
fn gap_bound_holds_on_breakpoints() {
    for d in [
        SiteDistribution::bernoulli_half(),
        SiteDistribution::uniform_01(),
        SiteDistribution::three_atom(),
        SiteDistribution::new(vec![(0.2, 0.3)], vec![(0.4, 1.0, 0.7)], 1.0).unwrap(),
    ] {
        let dec = decompose(&d, 0.25, 0.25).unwrap();
        let (a, b) = dec.gap_interval;
        assert!(b > a);
        assert!(dec.z.inf() >= (b - a) / 2.0 - 1e-12, "gap bound failed");
        // The range constraint: Y and Y + Z stay within [0, M].
        assert!(dec.y.inf() >= -1e-12 && dec.y.sup() <= d.bound() + 1e-12);
        let up = dec.upper();
        assert!(up.inf() >= -1e-12 && up.sup() <= d.bound() + 1e-12);
    }
}

#[test]
fn mirror_branch_is_exercised() {
    // Mass concentrated above with a spread below forces the reflected
    // construction: most mass at the top, anti-concentration from below.
    let d = SiteDistribution::new(vec![(1.0, 0.6)], vec![(0.0, 0.6, 0.4)], 1.0).unwrap();
    let rho = crate::ensembles::anti_concentration(&d, 0.25).unwrap();
    assert!(rho > 0.3);
    let dec = decompose(&d, 0.25, rho * 0.95).unwrap();
    assert!(verify_distribution(&d, &dec) <= 1e-9);
    let w = uniform_parameter_bounds(0.25, rho * 0.95, 1.0).unwrap();
    assert!(dec.p >= w.p_minus - 1e-12 && dec.p <= w.p_plus + 1e-12);
    assert!(dec.z.inf() >= w.iota - 1e-12);
}

#[test]
fn corrupted_strength_is_detected() {
    let d = SiteDistribution::uniform_01();
    let mut dec = decompose(&d, 0.25, 0.5).unwrap();
    dec.z = dec.z.map_values(|v| v + 0.1);
    assert!(verify_distribution(&d, &dec) >= 0.01);
}

#[test]
fn rejects_insufficient_anti_concentration() {
    let d = SiteDistribution::point_mass(0.5, 1.0);
    assert!(matches!(
        decompose(&d, 0.25, 0.5),
        Err(DecompositionError::NotAntiConcentrated { .. })
    ));
}

fn arbitrary_law() -> impl Strategy<Value = SiteDistribution> {
    (
        proptest::collection::vec((0.0f64..1.0, 0.05f64..1.0), 0..4),
        proptest::collection::vec((0.0f64..0.7, 0.05f64..0.3, 0.05f64..1.0), 0..3),
    )
        .prop_filter_map("needs some mass", |(atoms, raw_pieces)| {
            let total: f64 = atoms.iter().map(|a| a.1).sum::<f64>()
                + raw_pieces.iter().map(|p| p.2).sum::<f64>();
            if total < 0.1 {
                return None;
            }
            let atoms: Vec<(f64, f64)> =
                atoms.into_iter().map(|(loc, m)| (loc, m / total)).collect();
            let pieces: Vec<(f64, f64, f64)> = raw_pieces
                .into_iter()
                .map(|(lo, width, m)| (lo, (lo + width).min(1.0), m / total))
                .filter(|&(lo, hi, _)| hi > lo)
                .collect();
            SiteDistribution::new(atoms, pieces, 1.0).ok()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]
    #[test]
    fn random_laws_decompose_and_verify(d in arbitrary_law()) {
        let gamma = 0.125;
        let rho_star = crate::ensembles::anti_concentration(&d, gamma).unwrap();
        prop_assume!(rho_star > 0.05);
        let rho = rho_star * 0.9;
        let dec = decompose(&d, gamma, rho).unwrap();
        let w = uniform_parameter_bounds(gamma, rho, 1.0).unwrap();
        prop_assert!(dec.p >= w.p_minus - 1e-9 && dec.p <= w.p_plus + 1e-9);
        prop_assert!(dec.z.inf() >= w.iota - 1e-9);
        prop_assert!(verify_distribution(&d, &dec) <= 1e-9);
    }
}
