use super::*;
use crate::rng::KeyedStream;
use alloc::vec;

#[test]
fn tilted_examples() {
    assert_eq!(Site::new(0, 0).to_tilted(), (0, 0));
    assert_eq!(Site::new(1, 0).to_tilted(), (1, 1));
    assert_eq!(Site::new(2, 3).to_tilted(), (5, -1));
    assert_eq!(from_tilted(5, -1).unwrap(), Site::new(2, 3));
    assert!(matches!(from_tilted(1, 0), Err(GeometryError::OddParity { .. })));
}

#[test]
fn tilted_roundtrip_exhaustive() {
    for x in -50..=50 {
        for y in -50..=50 {
            let p = Site::new(x, y);
            let (s, t) = p.to_tilted();
            assert_eq!((s + t).rem_euclid(2), 0);
            assert_eq!(from_tilted(s, t).unwrap(), p);
        }
    }
}

#[test]
fn scale_square_examples() {
    let q = Square::new(Site::new(0, 0), 64).unwrap();
    let half = q.scale(ScaleFactor::Half).unwrap();
    assert_eq!(half.side, 46); // ceil(64 / sqrt(2))
    assert_eq!(q.scale(ScaleFactor::One).unwrap(), q);
    let tiny = Square::new(Site::new(0, 0), 4).unwrap();
    let point = tiny.scale(ScaleFactor::SixtyFourth).unwrap();
    assert_eq!(point.side, 1);
    assert!(tiny.contains(point.corner));
    // Center preservation up to rounding.
    assert!((point.corner.x - 1).abs() <= 1 && (point.corner.y - 1).abs() <= 1);
}

#[test]
fn scale_square_area_ratio_converges() {
    for &side in &[64i64, 256, 1024, 4096] {
        let q = Square::new(Site::new(0, 0), side).unwrap();
        let half = q.scale(ScaleFactor::Half).unwrap();
        let ratio = half.area() as f64 / q.area() as f64;
        assert!((ratio - 0.5).abs() < 4.0 / side as f64, "side {side}: ratio {ratio}");
    }
    // Doubling convention: side becomes ceil(sqrt(2) * side).
    let q = Square::new(Site::new(3, -7), 10).unwrap();
    assert_eq!(q.scale(ScaleFactor::Two).unwrap().side, 15);
}

#[test]
fn scale_square_rounding_enumeration() {
    // Oracle: recompute expected side and corner directly for all small squares.
    for side in 1..=40i64 {
        for &f in &[
            ScaleFactor::SixtyFourth,
            ScaleFactor::Quarter,
            ScaleFactor::Half,
            ScaleFactor::One,
            ScaleFactor::Two,
            ScaleFactor::Four,
        ] {
            let q = Square::new(Site::new(5, -3), side).unwrap();
            let scaled = q.scale(f).unwrap();
            let expect = (math::ceil(side as f64 * math::sqrt(f.value())) as i64).max(1);
            assert_eq!(scaled.side, expect);
            let old_center = q.corner.x as f64 + (side as f64 - 1.0) / 2.0;
            let new_center = scaled.corner.x as f64 + (scaled.side as f64 - 1.0) / 2.0;
            assert!((old_center - new_center).abs() <= 0.5 + 1e-12);
        }
    }
}

#[test]
fn west_boundary_matches_definition() {
    let r = TiltedRect::canonical(4, 4).unwrap();
    let w = r.west_boundary();
    for p in r.sites() {
        let (s, t) = p.to_tilted();
        assert_eq!(w.contains(p), s <= 2 || t <= 2);
    }

    let r3 = TiltedRect::canonical(3, 3).unwrap();
    assert_eq!(r3.interior().unwrap(), TiltedRect::new((2, 2), (2, 2)).unwrap());

    // Brute-force count for a = b = 6.
    let r6 = TiltedRect::canonical(6, 6).unwrap();
    let w6 = r6.west_boundary();
    let brute = r6
        .sites()
        .filter(|p| {
            let (s, t) = p.to_tilted();
            s <= 2 || t <= 2
        })
        .count();
    assert_eq!(w6.len(), brute);
}

#[test]
fn tilted_site_count_matches_enumeration() {
    for a in 1..=9 {
        for b in 1..=9 {
            let r = TiltedRect::new((-2, -2 + a - 1), (3, 3 + b - 1)).unwrap();
            assert_eq!(r.site_count(), r.sites().count() as i64);
            for s in r.s_lo..=r.s_hi {
                let brute = r.sites().filter(|p| p.to_tilted().0 == s).count() as i64;
                assert_eq!(r.diagonal_count_s(s), brute);
            }
        }
    }
}

#[test]
fn box_boundary_examples() {
    let outer = Square::new(Site::new(0, 0), 5).unwrap();
    let inner = Square::new(Site::new(2, 2), 1).unwrap();
    assert_eq!(box_boundary(&inner, &outer).unwrap().len(), 4);

    assert!(box_boundary(&outer, &outer).unwrap().is_empty());

    let outer9 = Square::new(Site::new(0, 0), 9).unwrap();
    let inner3 = Square::new(Site::new(3, 3), 3).unwrap();
    let pairs = box_boundary(&inner3, &outer9).unwrap();
    assert_eq!(pairs.len(), 12);
    assert!(pairs.len() as i64 <= 4 * inner3.side + 4);
    for (u, v) in pairs {
        assert!(inner3.contains(u) && outer9.contains(v) && !inner3.contains(v));
        assert_eq!(u.l1_dist(v), 1);
    }

    let stray = Square::new(Site::new(7, 7), 3).unwrap();
    assert!(box_boundary(&stray, &outer).is_err());
}

fn sparse_oracle(f: &SiteSet, r: &TiltedRect, eps: f64) -> bool {
    let mut ok = true;
    for s in r.s_lo..=r.s_hi {
        let count = r.sites().filter(|p| f.contains(*p) && p.to_tilted().0 == s).count();
        if count as f64 > eps * r.diagonal_count_s(s) as f64 + 1e-9 {
            ok = false;
        }
    }
    for t in r.t_lo..=r.t_hi {
        let count = r.sites().filter(|p| f.contains(*p) && p.to_tilted().1 == t).count();
        if count as f64 > eps * r.diagonal_count_t(t) as f64 + 1e-9 {
            ok = false;
        }
    }
    ok
}

#[test]
fn sparsity_examples_and_oracle() {
    let r = TiltedRect::canonical(9, 9).unwrap();
    assert!(is_sparse(&SiteSet::new(), &r, 0.0));
    assert!(is_sparse(&SiteSet::new(), &r, 1.0));

    // One full diagonal is not half-sparse.
    let diag: SiteSet = r.sites().filter(|p| p.to_tilted().0 == 5).collect();
    assert!(!is_sparse(&diag, &r, 0.5));
    assert!(is_sparse(&diag, &r, 1.0));

    // Random density-0.1 sets agree with the brute-force oracle.
    let r40 = TiltedRect::canonical(40, 40).unwrap();
    let mut stream = KeyedStream::new(11, 0);
    for _ in 0..20 {
        let f: SiteSet = r40.sites().filter(|_| stream.next_unit() < 0.1).collect();
        assert_eq!(is_sparse(&f, &r40, 0.4), sparse_oracle(&f, &r40, 0.4));
        assert_eq!(is_sparse(&f, &r40, 0.15), sparse_oracle(&f, &r40, 0.15));
    }
}

#[test]
fn sparsity_monotone_in_eps_antitone_in_f() {
    let r = TiltedRect::canonical(24, 24).unwrap();
    let mut stream = KeyedStream::new(5, 1);
    for _ in 0..10 {
        let f: SiteSet = r.sites().filter(|_| stream.next_unit() < 0.2).collect();
        let mut grown = f.clone();
        for p in r.sites() {
            if grown.len() >= f.len() + 5 {
                break;
            }
            grown.insert(p);
        }
        for &eps in &[0.05, 0.2, 0.5, 0.9] {
            if is_sparse(&f, &r, eps) {
                assert!(is_sparse(&f, &r, eps + 0.05));
            }
            if is_sparse(&grown, &r, eps) {
                assert!(is_sparse(&f, &r, eps), "adding sites never restores sparsity");
            }
        }
    }
}

#[test]
fn regularity_empty_set_is_regular() {
    let q = TiltedRect::canonical(64, 64).unwrap();
    assert_eq!(regularity_check(&SiteSet::new(), &q, 0.3), RegularityVerdict::CertifiedRegular);
}

#[test]
fn regularity_concentrated_quarter_is_irregular() {
    // Frozen sites fill the diagonals of one corner subsquare amounting to
    // a quarter of Q; at eps = 0.1 that packing is a witness.
    let q = TiltedRect::canonical(32, 32).unwrap();
    let corner = TiltedRect::new((1, 16), (1, 16)).unwrap();
    let f: SiteSet = corner.sites().collect();
    match regularity_check(&f, &q, 0.1) {
        RegularityVerdict::CertifiedIrregular(witness) => {
            // Witness re-verifies: disjoint, non-sparse, total above budget.
            let mut total = 0i64;
            for (i, w) in witness.iter().enumerate() {
                assert!(q.contains_rect(w));
                assert!(!is_sparse(&f, w, 0.1));
                for other in witness.iter().skip(i + 1) {
                    assert!(!w.intersects(other));
                }
                total += w.site_count();
            }
            assert!(total as f64 > 0.1 * q.site_count() as f64);
        }
        other => panic!("expected irregularity certificate, got {other:?}"),
    }
}

#[test]
fn regularity_single_far_point_is_regular() {
    let q = TiltedRect::canonical(48, 48).unwrap();
    let f = SiteSet::from_sites([from_tilted(24, 24).unwrap()]);
    assert_eq!(regularity_check(&f, &q, 0.5), RegularityVerdict::CertifiedRegular);
}

#[test]
fn covering_squares_postconditions() {
    for &side in &[1 << 10, 1 << 12] {
        let b = Square::new(Site::new(-side / 2, -side / 2), side).unwrap();
        let squares = covering_tilted_squares(&b).unwrap();
        assert!(!squares.is_empty());
        assert!((squares.len() as u64) < 1 << 50);
        // (B) containment and (C) minimum side.
        for q in &squares {
            assert!(q.contained_in_square(&b));
            assert!(q.side() * 256 >= side);
        }
        // (A) the shrunken pieces cover the half square: mark coverage.
        let half = b.scale(ScaleFactor::Half).unwrap();
        let mut covered = vec![false; (half.side * half.side) as usize];
        for q in &squares {
            let piece = q.scale(ScaleFactor::SixtyFourth).unwrap();
            for p in piece.sites() {
                if let Some(i) = half.index_of(p) {
                    covered[i] = true;
                }
            }
        }
        let missing = covered.iter().filter(|&&c| !c).count();
        assert_eq!(missing, 0, "side {side}: {missing} uncovered half-square sites");
    }
}

#[test]
fn covering_rejects_small_boxes() {
    let b = Square::new(Site::new(0, 0), 512).unwrap();
    assert!(matches!(covering_tilted_squares(&b), Err(GeometryError::BoxTooSmall)));
}

fn check_cover_margins(b: &Square, bad: &[Square], covers: &[Square], l1: i64) {
    let margin = (l1 + 7) / 8;
    for (sq, cover) in bad.iter().zip(covers) {
        assert!(cover.contains_square(sq));
        // Exhaustive oracle: ℓ∞ distance from the defect to the in-box
        // complement of its cover.
        let mut min_dist = i64::MAX;
        for p in b.sites() {
            if !cover.contains(p) {
                min_dist = min_dist.min(sq.linf_dist_to(p));
            }
        }
        assert!(min_dist >= margin, "defect margin {min_dist} < {margin}");
    }
}

#[test]
fn cover_defects_cases() {
    let b = Square::new(Site::new(0, 0), 256).unwrap();

    // Single defect mid-box.
    let bad = vec![Square::new(Site::new(100, 120), 4).unwrap()];
    let (lt, covers) = cover_defects(&b, &bad, 32, 4).unwrap();
    assert!(lt >= 32 && lt <= 128 && is_dyadic(lt));
    check_cover_margins(&b, &bad, &covers, 32);

    // Three clustered defects share covers.
    let bad3 = vec![
        Square::new(Site::new(60, 60), 4).unwrap(),
        Square::new(Site::new(70, 64), 4).unwrap(),
        Square::new(Site::new(64, 72), 4).unwrap(),
    ];
    let (lt3, covers3) = cover_defects(&b, &bad3, 32, 4).unwrap();
    assert!(lt3 >= 32 && lt3 <= 128);
    check_cover_margins(&b, &bad3, &covers3, 32);

    // Two far-separated defects get disjoint covers at the base scale.
    let bad2 = vec![
        Square::new(Site::new(20, 20), 4).unwrap(),
        Square::new(Site::new(200, 200), 4).unwrap(),
    ];
    let (lt2, covers2) = cover_defects(&b, &bad2, 32, 4).unwrap();
    assert_eq!(lt2, 32);
    assert!(!covers2[0].intersects(&covers2[1]));
    check_cover_margins(&b, &bad2, &covers2, 32);

    // Scale hypotheses violated.
    assert!(cover_defects(&b, &bad, 512, 4).is_err());
}

#[test]
fn smallest_alpha_is_reported() {
    let b = Square::new(Site::new(0, 0), 512).unwrap();
    let bad = vec![
        Square::new(Site::new(100, 100), 4).unwrap(),
        Square::new(Site::new(140, 100), 4).unwrap(),
    ];
    let alpha = smallest_cover_alpha(&b, &bad, 32).unwrap();
    assert!(cover_defects(&b, &bad, 32, alpha).is_ok());
    if alpha > 1 {
        assert!(cover_defects(&b, &bad, 32, alpha / 2).is_err());
    }
}

#[test]
fn r_net_examples_and_oracle() {
    let b = Square::new(Site::new(0, 0), 10).unwrap();

    let all: SiteSet = b.sites().collect();
    assert!(is_r_net(&all, &b, 0.0).unwrap());

    let corner = SiteSet::from_sites([Site::new(0, 0)]);
    assert!(!is_r_net(&corner, &b, 3.0).unwrap());

    let b20 = Square::new(Site::new(0, 0), 20).unwrap();
    let grid: SiteSet = b20.sites().filter(|p| p.x % 4 == 2 && p.y % 4 == 2).collect();
    assert!(is_r_net(&grid, &b20, 2.0 * math::sqrt(2.0) + 1e-12).unwrap());

    // Brute-force sup-inf agreement on random sets.
    let mut stream = KeyedStream::new(3, 7);
    for _ in 0..10 {
        let x: SiteSet = b.sites().filter(|_| stream.next_unit() < 0.2).collect();
        if x.is_empty() {
            assert!(is_r_net(&x, &b, 1.0).is_err());
            continue;
        }
        let sup_inf = b
            .sites()
            .map(|y| {
                x.iter().map(|p| p.euclid_dist(y)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max);
        for &r in &[1.0, 2.0, 3.5, 6.0] {
            assert_eq!(is_r_net(&x, &b, r).unwrap(), sup_inf <= r);
        }
        assert!(is_r_net_with(&x, &b, sup_inf, Metric::Euclidean).unwrap());
    }
}

/// Full Bellman-Ford over every site of the box, with explicit direct and
/// shortcut edges. Quadratic and only usable on small boxes.
fn bellman_ford_oracle(g: &DefectGraph, x: Site, y: Site) -> i64 {
    let sites: Vec<Site> = g.bx.sites().collect();
    let idx = |p: Site| -> usize { g.bx.index_of(p).unwrap() };
    let n = sites.len();
    let mut shortcuts: Vec<(usize, usize)> = Vec::new();
    for d in &g.defects {
        let m = (d.side + 7) / 8;
        for &u in &sites {
            if !d.contains(u) {
                continue;
            }
            // Distance from u to the complement of the defect.
            let face = (u.x - d.corner.x)
                .min(d.x_hi() - u.x)
                .min(u.y - d.corner.y)
                .min(d.y_hi() - u.y);
            if 1 + face < m {
                continue;
            }
            for &v in &sites {
                if g.defects.iter().any(|o| o.contains(v)) {
                    continue;
                }
                if d.linf_dist_to(v) == 1 {
                    shortcuts.push((idx(u), idx(v)));
                }
            }
        }
    }
    let mut dist = vec![i64::MAX / 4; n];
    dist[idx(x)] = 0;
    for _ in 0..n {
        let mut changed = false;
        for i in 0..n {
            if dist[i] >= i64::MAX / 4 {
                continue;
            }
            for j in 0..n {
                let w = sites[i].linf_dist(sites[j]);
                if dist[i] + w < dist[j] {
                    dist[j] = dist[i] + w;
                    changed = true;
                }
            }
        }
        for &(u, v) in &shortcuts {
            if dist[u] + (-g.shortcut_weight) < dist[v] {
                dist[v] = dist[u] - g.shortcut_weight;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist[idx(y)]
}

#[test]
fn defect_graph_no_defects_is_metric() {
    let b = Square::new(Site::new(0, 0), 12).unwrap();
    let g = DefectGraph::new(b, Vec::new(), 1).unwrap();
    let mut stream = KeyedStream::new(21, 0);
    for _ in 0..50 {
        let x = Site::new(stream.next_index(12) as i64, stream.next_index(12) as i64);
        let y = Site::new(stream.next_index(12) as i64, stream.next_index(12) as i64);
        assert_eq!(g.distance(x, y), x.linf_dist(y));
    }
}

#[test]
fn defect_graph_single_defect_shortcut() {
    let b = Square::new(Site::new(0, 0), 10).unwrap();
    let defect = Square::new(Site::new(3, 3), 4).unwrap();
    let g = DefectGraph::new(b, vec![defect], 1).unwrap();
    let x = Site::new(4, 4); // deep inside
    let y = Site::new(8, 4); // just outside
    let d = g.distance(x, y);
    assert!(d <= x.linf_dist(y));
    assert!(d >= x.linf_dist(y) - defect.side);
    assert_eq!(d, bellman_ford_oracle(&g, x, y));
}

#[test]
fn defect_graph_matches_oracle_and_bounds() {
    // Defects of side 9 with shortcut weight 1 keep a strict margin
    // (ceil(9/8) = 2 > 1), where the sandwich bounds are exact.
    let b = Square::new(Site::new(0, 0), 20).unwrap();
    let mut stream = KeyedStream::new(77, 0);
    for trial in 0..2 {
        let defects = if trial == 0 {
            vec![Square::new(Site::new(1, 1), 9).unwrap()]
        } else {
            vec![
                Square::new(Site::new(1, 1), 9).unwrap(),
                Square::new(Site::new(10, 10), 9).unwrap(),
            ]
        };
        let g = DefectGraph::new(b, defects.clone(), 1).unwrap();
        let k = defects.len() as i64;
        let l2 = defects.iter().map(|d| d.side).max().unwrap();
        for _ in 0..10 {
            let x = Site::new(stream.next_index(20) as i64, stream.next_index(20) as i64);
            let y = Site::new(stream.next_index(20) as i64, stream.next_index(20) as i64);
            let d = g.distance(x, y);
            assert_eq!(d, bellman_ford_oracle(&g, x, y), "x {x:?} y {y:?}");
            assert!(d <= x.linf_dist(y));
            assert!(d >= x.linf_dist(y) - k * l2);
        }
        // Triangle inequality on sampled triples.
        for _ in 0..200 {
            let p = Site::new(stream.next_index(20) as i64, stream.next_index(20) as i64);
            let q = Site::new(stream.next_index(20) as i64, stream.next_index(20) as i64);
            let r = Site::new(stream.next_index(20) as i64, stream.next_index(20) as i64);
            assert!(g.distance(p, r) <= g.distance(p, q) + g.distance(q, r));
        }
    }
}

#[test]
fn defect_graph_degenerate_margin_slips_by_at_most_one_per_defect() {
    // When the deep margin equals the shortcut weight (side-3 defects,
    // weight 1), one lattice unit per defect can leak past the clean
    // lower bound; the relaxed sandwich still holds and the condensed
    // distance stays exact against the full-graph oracle.
    let b = Square::new(Site::new(0, 0), 10).unwrap();
    let defects = vec![
        Square::new(Site::new(1, 1), 3).unwrap(),
        Square::new(Site::new(6, 5), 3).unwrap(),
    ];
    let g = DefectGraph::new(b, defects.clone(), 1).unwrap();
    let k = defects.len() as i64;
    let l2 = 3i64;
    let mut stream = KeyedStream::new(78, 0);
    for _ in 0..40 {
        let x = Site::new(stream.next_index(10) as i64, stream.next_index(10) as i64);
        let y = Site::new(stream.next_index(10) as i64, stream.next_index(10) as i64);
        let d = g.distance(x, y);
        assert_eq!(d, bellman_ford_oracle(&g, x, y));
        assert!(d <= x.linf_dist(y));
        assert!(d >= x.linf_dist(y) - k * (l2 + 1));
    }
}

#[test]
fn defect_graph_rejects_negative_cycles() {
    let b = Square::new(Site::new(0, 0), 16).unwrap();
    let defect = Square::new(Site::new(4, 4), 4).unwrap();
    // Shortcut weight exceeding side/8 is rejected up front.
    assert!(matches!(
        DefectGraph::new(b, vec![defect], 3),
        Err(GeometryError::NegativeCycleRisk)
    ));
}

#[test]
fn aligned_square_form() {
    assert!(Square::new_aligned(Site::new(8, -8), 16).is_ok());
    assert!(Square::new_aligned(Site::new(4, 0), 16).is_err());
    assert!(Square::new_aligned(Site::new(0, 0), 12).is_err());
}
