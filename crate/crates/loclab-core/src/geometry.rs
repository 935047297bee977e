//! Discrete geometry of `ℤ²`: standard and tilted boxes, boundaries,
//! sparsity and regularity of frozen sets, covers, nets, and the
//! defect-graph distance of the deterministic multiscale step.
//!
//! Tilted coordinates are `(s, t) = (x + y, x - y)`; they map the lattice
//! onto the even-parity sublattice `{(s, t) : s + t even}`. A tilted
//! rectangle is the set of lattice sites whose tilted coordinates lie in a
//! product of integer intervals.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;
use core::fmt;

use crate::math;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum GeometryError {
    OddParity { s: i64, t: i64 },
    EmptyRegion,
    NotAligned,
    DegenerateRectangle,
    NotContained,
    EmptyNet,
    ScaleHypotheses,
    NegativeCycleRisk,
    BoxTooSmall,
}

impl fmt::Display for GeometryError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeometryError::OddParity { s, t } => {
                write!(f, "tilted point ({s}, {t}) has odd parity and is not a lattice site")
            }
            GeometryError::EmptyRegion => write!(f, "region is empty"),
            GeometryError::NotAligned => write!(f, "square does not satisfy the alignment form"),
            GeometryError::DegenerateRectangle => write!(f, "rectangle too small for the operation"),
            GeometryError::NotContained => write!(f, "inner region is not contained in the outer one"),
            GeometryError::EmptyNet => write!(f, "candidate net is empty"),
            GeometryError::ScaleHypotheses => write!(f, "scale hypotheses violated"),
            GeometryError::NegativeCycleRisk => {
                write!(f, "defect graph admits a negative-weight cycle")
            }
            GeometryError::BoxTooSmall => write!(f, "box side too small for the construction"),
        }
    }
}

/// A lattice point of `ℤ²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Site {
    pub x: i64,
    pub y: i64,
}

impl Site {
    pub const fn new(x: i64, y: i64) -> Self {
        Site { x, y }
    }

    /// Tilted coordinates `(s, t) = (x + y, x - y)`.
    pub fn to_tilted(self) -> (i64, i64) {
        (self.x + self.y, self.x - self.y)
    }

    pub fn linf_dist(self, other: Site) -> i64 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn l1_dist(self, other: Site) -> i64 {
        (self.x - other.x).abs() + (self.y - other.y).abs()
    }

    pub fn euclid_dist(self, other: Site) -> f64 {
        math::hypot((self.x - other.x) as f64, (self.y - other.y) as f64)
    }

    /// The four unit-distance neighbors.
    pub fn neighbors(self) -> [Site; 4] {
        [
            Site::new(self.x - 1, self.y),
            Site::new(self.x + 1, self.y),
            Site::new(self.x, self.y - 1),
            Site::new(self.x, self.y + 1),
        ]
    }
}

/// Inverse of [`Site::to_tilted`]; rejects odd-parity pairs.
pub fn from_tilted(s: i64, t: i64) -> Result<Site, GeometryError> {
    if (s + t).rem_euclid(2) != 0 {
        return Err(GeometryError::OddParity { s, t });
    }
    Ok(Site::new((s + t) / 2, (s - t) / 2))
}

/// Area scaling factors used for concentric enlargements and shrinkages.
/// `kQ` denotes the concentric square with `k` times the area, so the side
/// scales by `√k` (rounded up to keep the result nonempty).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScaleFactor {
    SixtyFourth,
    Quarter,
    Half,
    One,
    Two,
    Four,
}

impl ScaleFactor {
    pub fn value(self) -> f64 {
        match self {
            ScaleFactor::SixtyFourth => 1.0 / 64.0,
            ScaleFactor::Quarter => 0.25,
            ScaleFactor::Half => 0.5,
            ScaleFactor::One => 1.0,
            ScaleFactor::Two => 2.0,
            ScaleFactor::Four => 4.0,
        }
    }

    fn scaled_len(self, len: i64) -> i64 {
        let scaled = math::ceil(len as f64 * math::sqrt(self.value())) as i64;
        scaled.max(1)
    }
}

/// An axis-parallel square of lattice sites: `corner + [0, side)²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Square {
    pub corner: Site,
    pub side: i64,
    /// Set when the square has the half-aligned dyadic form
    /// `x + [0, 2^n)² ∩ ℤ²` with `x ∈ 2^{n-1}ℤ²`.
    pub aligned: bool,
}

impl Square {
    pub fn new(corner: Site, side: i64) -> Result<Self, GeometryError> {
        if side < 1 {
            return Err(GeometryError::EmptyRegion);
        }
        Ok(Square { corner, side, aligned: false })
    }

    /// Construct a half-aligned dyadic square, validating the form.
    pub fn new_aligned(corner: Site, side: i64) -> Result<Self, GeometryError> {
        if side < 1 {
            return Err(GeometryError::EmptyRegion);
        }
        if side & (side - 1) != 0 {
            return Err(GeometryError::NotAligned);
        }
        let half = (side / 2).max(1);
        if corner.x.rem_euclid(half) != 0 || corner.y.rem_euclid(half) != 0 {
            return Err(GeometryError::NotAligned);
        }
        Ok(Square { corner, side, aligned: true })
    }

    pub fn x_hi(&self) -> i64 {
        self.corner.x + self.side - 1
    }

    pub fn y_hi(&self) -> i64 {
        self.corner.y + self.side - 1
    }

    pub fn area(&self) -> i64 {
        self.side * self.side
    }

    pub fn contains(&self, p: Site) -> bool {
        p.x >= self.corner.x && p.x <= self.x_hi() && p.y >= self.corner.y && p.y <= self.y_hi()
    }

    pub fn contains_square(&self, other: &Square) -> bool {
        other.corner.x >= self.corner.x
            && other.x_hi() <= self.x_hi()
            && other.corner.y >= self.corner.y
            && other.y_hi() <= self.y_hi()
    }

    pub fn intersects(&self, other: &Square) -> bool {
        self.corner.x <= other.x_hi()
            && other.corner.x <= self.x_hi()
            && self.corner.y <= other.y_hi()
            && other.corner.y <= self.y_hi()
    }

    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let sq = *self;
        (0..sq.side).flat_map(move |dy| {
            (0..sq.side).map(move |dx| Site::new(sq.corner.x + dx, sq.corner.y + dy))
        })
    }

    /// Row-major index of a site inside the square.
    pub fn index_of(&self, p: Site) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        Some(((p.y - self.corner.y) * self.side + (p.x - self.corner.x)) as usize)
    }

    pub fn site_at(&self, index: usize) -> Site {
        let i = index as i64;
        Site::new(self.corner.x + i % self.side, self.corner.y + i / self.side)
    }

    /// ℓ∞ distance from a point to the square (0 when inside).
    pub fn linf_dist_to(&self, p: Site) -> i64 {
        let dx = (self.corner.x - p.x).max(p.x - self.x_hi()).max(0);
        let dy = (self.corner.y - p.y).max(p.y - self.y_hi()).max(0);
        dx.max(dy)
    }

    /// ℓ∞ gap between two squares (0 when they intersect).
    pub fn linf_gap(&self, other: &Square) -> i64 {
        let dx = (self.corner.x - other.x_hi()).max(other.corner.x - self.x_hi()).max(0);
        let dy = (self.corner.y - other.y_hi()).max(other.corner.y - self.y_hi()).max(0);
        dx.max(dy)
    }

    /// Concentric rescaling by an area factor. The side becomes
    /// `⌈√factor · side⌉` (never below 1) and the center is preserved up to
    /// lattice rounding.
    pub fn scale(&self, factor: ScaleFactor) -> Result<Square, GeometryError> {
        let new_side = factor.scaled_len(self.side);
        if new_side < 1 {
            return Err(GeometryError::EmptyRegion);
        }
        let shift = (self.side - new_side).div_euclid(2);
        Square::new(Site::new(self.corner.x + shift, self.corner.y + shift), new_side)
    }
}

/// Tilted rectangle: the lattice sites with `s ∈ [s_lo, s_hi]`,
/// `t ∈ [t_lo, t_hi]` (and automatically `s + t` even).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TiltedRect {
    pub s_lo: i64,
    pub s_hi: i64,
    pub t_lo: i64,
    pub t_hi: i64,
}

/// Number of integers in `[lo, hi]` with the same parity as `parity`.
fn count_with_parity(lo: i64, hi: i64, parity: i64) -> i64 {
    if lo > hi {
        return 0;
    }
    let first = if lo.rem_euclid(2) == parity.rem_euclid(2) { lo } else { lo + 1 };
    if first > hi {
        0
    } else {
        (hi - first) / 2 + 1
    }
}

impl TiltedRect {
    pub fn new(s_range: (i64, i64), t_range: (i64, i64)) -> Result<Self, GeometryError> {
        if s_range.0 > s_range.1 || t_range.0 > t_range.1 {
            return Err(GeometryError::EmptyRegion);
        }
        Ok(TiltedRect { s_lo: s_range.0, s_hi: s_range.1, t_lo: t_range.0, t_hi: t_range.1 })
    }

    /// The rectangle `R_{[1,a],[1,b]}`.
    pub fn canonical(a: i64, b: i64) -> Result<Self, GeometryError> {
        TiltedRect::new((1, a), (1, b))
    }

    /// `(a, b)`: the number of s-values and t-values spanned.
    pub fn dims(&self) -> (i64, i64) {
        (self.s_hi - self.s_lo + 1, self.t_hi - self.t_lo + 1)
    }

    pub fn is_square(&self) -> bool {
        let (a, b) = self.dims();
        a == b
    }

    /// Side length of a tilted square.
    pub fn side(&self) -> i64 {
        self.dims().0
    }

    pub fn contains_st(&self, s: i64, t: i64) -> bool {
        (s + t).rem_euclid(2) == 0
            && s >= self.s_lo
            && s <= self.s_hi
            && t >= self.t_lo
            && t <= self.t_hi
    }

    pub fn contains(&self, p: Site) -> bool {
        let (s, t) = p.to_tilted();
        self.contains_st(s, t)
    }

    pub fn contains_rect(&self, other: &TiltedRect) -> bool {
        other.s_lo >= self.s_lo
            && other.s_hi <= self.s_hi
            && other.t_lo >= self.t_lo
            && other.t_hi <= self.t_hi
    }

    pub fn intersects(&self, other: &TiltedRect) -> bool {
        self.s_lo <= other.s_hi
            && other.s_lo <= self.s_hi
            && self.t_lo <= other.t_hi
            && other.t_lo <= self.t_hi
    }

    /// All member sites, ordered by (s, t).
    pub fn sites(&self) -> impl Iterator<Item = Site> + '_ {
        let r = *self;
        (r.s_lo..=r.s_hi).flat_map(move |s| {
            (r.t_lo..=r.t_hi)
                .filter(move |t| (s + t).rem_euclid(2) == 0)
                .map(move |t| from_tilted(s, t).expect("parity filtered"))
        })
    }

    pub fn site_count(&self) -> i64 {
        (self.s_lo..=self.s_hi).map(|s| self.diagonal_count_s(s)).sum()
    }

    /// Number of sites on the diagonal `{s = k}`.
    pub fn diagonal_count_s(&self, s: i64) -> i64 {
        if s < self.s_lo || s > self.s_hi {
            return 0;
        }
        count_with_parity(self.t_lo, self.t_hi, s)
    }

    /// Number of sites on the diagonal `{t = k}`.
    pub fn diagonal_count_t(&self, t: i64) -> i64 {
        if t < self.t_lo || t > self.t_hi {
            return 0;
        }
        count_with_parity(self.s_lo, self.s_hi, t)
    }

    /// The west boundary: the first two t-diagonals together with the
    /// first two s-diagonals.
    pub fn west_boundary(&self) -> SiteSet {
        let mut set = BTreeSet::new();
        for p in self.sites() {
            let (s, t) = p.to_tilted();
            if t <= self.t_lo + 1 || s <= self.s_lo + 1 {
                set.insert(p);
            }
        }
        SiteSet { members: set }
    }

    /// The interior: both index ranges shrunk by one on each side.
    pub fn interior(&self) -> Result<TiltedRect, GeometryError> {
        let (a, b) = self.dims();
        if a < 3 || b < 3 {
            return Err(GeometryError::DegenerateRectangle);
        }
        TiltedRect::new((self.s_lo + 1, self.s_hi - 1), (self.t_lo + 1, self.t_hi - 1))
    }

    /// Concentric rescaling by an area factor, mirroring [`Square::scale`].
    pub fn scale(&self, factor: ScaleFactor) -> Result<TiltedRect, GeometryError> {
        let (a, b) = self.dims();
        let na = factor.scaled_len(a);
        let nb = factor.scaled_len(b);
        let s_shift = (a - na).div_euclid(2);
        let t_shift = (b - nb).div_euclid(2);
        TiltedRect::new(
            (self.s_lo + s_shift, self.s_lo + s_shift + na - 1),
            (self.t_lo + t_shift, self.t_lo + t_shift + nb - 1),
        )
    }

    /// Bounding box in standard coordinates.
    pub fn standard_bounds(&self) -> (i64, i64, i64, i64) {
        let x_lo = (self.s_lo + self.t_lo).div_euclid(2);
        let x_hi = (self.s_hi + self.t_hi).div_euclid(2);
        let y_lo = (self.s_lo - self.t_hi).div_euclid(2);
        let y_hi = (self.s_hi - self.t_lo).div_euclid(2);
        (x_lo, x_hi, y_lo, y_hi)
    }

    /// Whether every member site lies in the square.
    pub fn contained_in_square(&self, sq: &Square) -> bool {
        let (x_lo, x_hi, y_lo, y_hi) = self.standard_bounds();
        x_lo >= sq.corner.x && x_hi <= sq.x_hi() && y_lo >= sq.corner.y && y_hi <= sq.y_hi()
    }
}

/// A finite set of lattice sites.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SiteSet {
    members: BTreeSet<Site>,
}

impl SiteSet {
    pub fn new() -> Self {
        SiteSet { members: BTreeSet::new() }
    }

    pub fn from_sites<I: IntoIterator<Item = Site>>(iter: I) -> Self {
        SiteSet { members: iter.into_iter().collect() }
    }

    pub fn insert(&mut self, p: Site) -> bool {
        self.members.insert(p)
    }

    pub fn contains(&self, p: Site) -> bool {
        self.members.contains(&p)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Iterates in sorted (x, y) order.
    pub fn iter(&self) -> impl Iterator<Item = Site> + '_ {
        self.members.iter().copied()
    }

    pub fn union(&self, other: &SiteSet) -> SiteSet {
        SiteSet { members: self.members.union(&other.members).copied().collect() }
    }

    pub fn intersect_square(&self, sq: &Square) -> SiteSet {
        SiteSet { members: self.members.iter().copied().filter(|p| sq.contains(*p)).collect() }
    }

    pub fn difference(&self, other: &SiteSet) -> SiteSet {
        SiteSet { members: self.members.difference(&other.members).copied().collect() }
    }
}

impl FromIterator<Site> for SiteSet {
    fn from_iter<I: IntoIterator<Item = Site>>(iter: I) -> Self {
        SiteSet::from_sites(iter)
    }
}

/// Unit-distance crossing pairs `(u, v)` with `u ∈ inner`, `v ∈ outer ∖ inner`.
pub fn box_boundary(inner: &Square, outer: &Square) -> Result<Vec<(Site, Site)>, GeometryError> {
    if !outer.contains_square(inner) {
        return Err(GeometryError::NotContained);
    }
    let mut pairs = Vec::new();
    for u in inner.sites() {
        for v in u.neighbors() {
            if outer.contains(v) && !inner.contains(v) {
                pairs.push((u, v));
            }
        }
    }
    Ok(pairs)
}

/// Comparison slack for `count ≤ eps · diagonal` so that exact rational
/// thresholds (e.g. eps = 1/3 on a 3-site diagonal) are not lost to
/// rounding.
const SPARSE_SLACK: f64 = 1e-9;

/// Per-diagonal sparsity: every `{s = k}` and `{t = k}` diagonal of `r`
/// carries at most an `eps` fraction of frozen sites.
pub fn is_sparse(f: &SiteSet, r: &TiltedRect, eps: f64) -> bool {
    let mut s_counts: BTreeMap<i64, i64> = BTreeMap::new();
    let mut t_counts: BTreeMap<i64, i64> = BTreeMap::new();
    for p in f.iter() {
        let (s, t) = p.to_tilted();
        if r.contains_st(s, t) {
            *s_counts.entry(s).or_insert(0) += 1;
            *t_counts.entry(t).or_insert(0) += 1;
        }
    }
    for (&s, &count) in &s_counts {
        if count as f64 > eps * r.diagonal_count_s(s) as f64 + SPARSE_SLACK {
            return false;
        }
    }
    for (&t, &count) in &t_counts {
        if count as f64 > eps * r.diagonal_count_t(t) as f64 + SPARSE_SLACK {
            return false;
        }
    }
    true
}

/// Outcome of the three-valued regularity decision.
#[derive(Clone, Debug, PartialEq)]
pub enum RegularityVerdict {
    CertifiedRegular,
    /// Disjoint subsquares, each failing eps-sparsity, with total site
    /// count exceeding `eps |Q|`.
    CertifiedIrregular(Vec<TiltedRect>),
    Unknown,
}

/// Frozen-set positions indexed by diagonal for windowed counting.
struct DiagonalIndex {
    by_s: BTreeMap<i64, Vec<i64>>,
    by_t: BTreeMap<i64, Vec<i64>>,
}

impl DiagonalIndex {
    fn build(f: &SiteSet, q: &TiltedRect) -> Self {
        let mut by_s: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        let mut by_t: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for p in f.iter() {
            let (s, t) = p.to_tilted();
            if q.contains_st(s, t) {
                by_s.entry(s).or_default().push(t);
                by_t.entry(t).or_default().push(s);
            }
        }
        for v in by_s.values_mut() {
            v.sort_unstable();
        }
        for v in by_t.values_mut() {
            v.sort_unstable();
        }
        DiagonalIndex { by_s, by_t }
    }

    fn count_s(&self, s: i64, t_lo: i64, t_hi: i64) -> i64 {
        match self.by_s.get(&s) {
            None => 0,
            Some(v) => {
                (v.partition_point(|&t| t <= t_hi) - v.partition_point(|&t| t < t_lo)) as i64
            }
        }
    }

    fn count_t(&self, t: i64, s_lo: i64, s_hi: i64) -> i64 {
        match self.by_t.get(&t) {
            None => 0,
            Some(v) => {
                (v.partition_point(|&s| s <= s_hi) - v.partition_point(|&s| s < s_lo)) as i64
            }
        }
    }

    fn is_sparse_in(&self, sub: &TiltedRect, eps: f64) -> bool {
        for s in sub.s_lo..=sub.s_hi {
            let c = self.count_s(s, sub.t_lo, sub.t_hi);
            if c as f64 > eps * sub.diagonal_count_s(s) as f64 + SPARSE_SLACK {
                return false;
            }
        }
        for t in sub.t_lo..=sub.t_hi {
            let c = self.count_t(t, sub.s_lo, sub.s_hi);
            if c as f64 > eps * sub.diagonal_count_t(t) as f64 + SPARSE_SLACK {
                return false;
            }
        }
        true
    }
}

/// Budget on exact sparsity tests before the decision gives up.
const REGULARITY_WORK_CAP: usize = 400_000;

/// Three-valued regularity check of a frozen set in a tilted square.
///
/// `CertifiedIrregular` carries disjoint subsquares that each fail
/// eps-sparsity and jointly occupy more than an `eps` fraction of `q`: a
/// valid counterexample by definition. `CertifiedRegular` is returned when
/// an upper bound on the total area of all non-sparse subsquares (every
/// one of them, not merely a disjoint selection) stays within the budget,
/// which certifies regularity. When neither certificate is reached within
/// the work cap the verdict is `Unknown`.
pub fn regularity_check(f: &SiteSet, q: &TiltedRect, eps: f64) -> RegularityVerdict {
    let index = DiagonalIndex::build(f, q);
    if index.by_s.is_empty() {
        // No frozen site in q: every subsquare is sparse for eps ≥ 0.
        return RegularityVerdict::CertifiedRegular;
    }
    let budget = eps * q.site_count() as f64;

    if let Some(witness) = irregularity_witness(&index, q, eps, budget) {
        return RegularityVerdict::CertifiedIrregular(witness);
    }

    match total_nonsparse_area(&index, q, eps) {
        Some(total) if total as f64 <= budget + SPARSE_SLACK => RegularityVerdict::CertifiedRegular,
        _ => RegularityVerdict::Unknown,
    }
}

/// Greedy largest-first packing of non-sparse subsquares.
fn irregularity_witness(
    index: &DiagonalIndex,
    q: &TiltedRect,
    eps: f64,
    budget: f64,
) -> Option<Vec<TiltedRect>> {
    let side = q.side();
    let mut sizes: Vec<i64> = Vec::new();
    let mut sigma = side;
    while sigma >= 2 {
        sizes.push(sigma);
        sigma /= 2;
    }
    // Largest square a single frozen site can make non-sparse.
    let single = ((2.0 / eps.max(1e-12)) as i64).min(side).max(2);
    sizes.push(single);
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes.dedup();

    let mut accepted: Vec<TiltedRect> = Vec::new();
    let mut covered: f64 = 0.0;
    let mut work = 0usize;

    for &sigma in &sizes {
        // Candidate positions centered on frozen sites.
        for (&s, ts) in &index.by_s {
            for &t in ts {
                work += 1;
                if work > REGULARITY_WORK_CAP {
                    return None;
                }
                let half = sigma / 2;
                let s_lo = (s - half).min(q.s_hi - sigma + 1).max(q.s_lo);
                let t_lo = (t - half).min(q.t_hi - sigma + 1).max(q.t_lo);
                let cand =
                    TiltedRect { s_lo, s_hi: s_lo + sigma - 1, t_lo, t_hi: t_lo + sigma - 1 };
                if !q.contains_rect(&cand) {
                    continue;
                }
                if accepted.iter().any(|a| a.intersects(&cand)) {
                    continue;
                }
                if index.is_sparse_in(&cand, eps) {
                    continue;
                }
                covered += cand.site_count() as f64;
                accepted.push(cand);
                if covered > budget + SPARSE_SLACK {
                    return Some(accepted);
                }
            }
        }
    }
    None
}

/// Upper bound on the summed site count of every non-sparse subsquare of
/// `q` (candidates may be counted once per frozen site they contain, which
/// only strengthens the certificate). Returns `None` if the work cap is
/// exceeded.
fn total_nonsparse_area(index: &DiagonalIndex, q: &TiltedRect, eps: f64) -> Option<i64> {
    let side = q.side();
    let mut total = 0i64;
    let mut work = 0usize;
    for sigma in 1..=side {
        // A sigma-square is non-sparse only if some diagonal segment of
        // length sigma holds more than eps * floor(sigma/2) frozen sites
        // (the shorter of the two possible diagonal cardinalities).
        let needed = eps * (sigma / 2) as f64;
        let mut possible = false;
        'scan: for ts in index.by_s.values() {
            for (i, &t0) in ts.iter().enumerate() {
                let in_window = ts[i..].iter().take_while(|&&t| t < t0 + sigma).count();
                if in_window as f64 > needed {
                    possible = true;
                    break 'scan;
                }
            }
        }
        if !possible {
            'scan_t: for ss in index.by_t.values() {
                for (i, &s0) in ss.iter().enumerate() {
                    let in_window = ss[i..].iter().take_while(|&&s| s < s0 + sigma).count();
                    if in_window as f64 > needed {
                        possible = true;
                        break 'scan_t;
                    }
                }
            }
        }
        if !possible {
            continue;
        }
        // Enumerate sigma-squares near frozen sites.
        for (&s, ts) in &index.by_s {
            for &t in ts {
                for ds in 0..sigma {
                    for dt in 0..sigma {
                        work += 1;
                        if work > REGULARITY_WORK_CAP {
                            return None;
                        }
                        let cand = TiltedRect {
                            s_lo: s - ds,
                            s_hi: s - ds + sigma - 1,
                            t_lo: t - dt,
                            t_hi: t - dt + sigma - 1,
                        };
                        if !q.contains_rect(&cand) {
                            continue;
                        }
                        if !index.is_sparse_in(&cand, eps) {
                            total += cand.site_count();
                        }
                    }
                }
            }
        }
    }
    Some(total)
}

/// A covering family of tilted squares for a standard box: the shrunken
/// pieces `(1/64)Q_n` cover the concentric half-area square, every `Q_n`
/// stays inside the box, and all sides are at least `side/256`.
pub fn covering_tilted_squares(b: &Square) -> Result<Vec<TiltedRect>, GeometryError> {
    if b.side < (1 << 10) {
        return Err(GeometryError::BoxTooSmall);
    }
    let half = b.scale(ScaleFactor::Half).expect("half of a large square");
    let sigma = (b.side + 15) / 16; // tilted side of each Q_n, well above side/256
    let piece = ScaleFactor::SixtyFourth.scaled_len(sigma);
    let pitch = (piece - 2).max(1);

    // Tilted extent of the half square, padded by one pitch cell.
    let s_min = half.corner.x + half.corner.y - pitch;
    let s_max = half.x_hi() + half.y_hi() + pitch;
    let t_min = half.corner.x - half.y_hi() - pitch;
    let t_max = half.x_hi() - half.corner.y + pitch;

    let mut squares = Vec::new();
    let mut s0 = s_min;
    while s0 <= s_max {
        let mut t0 = t_min;
        while t0 <= t_max {
            // Center the full square so its 1/64 shrinkage starts at (s0, t0).
            let off = (sigma - piece).div_euclid(2);
            let q = TiltedRect {
                s_lo: s0 - off,
                s_hi: s0 - off + sigma - 1,
                t_lo: t0 - off,
                t_hi: t0 - off + sigma - 1,
            };
            let shrunk = q.scale(ScaleFactor::SixtyFourth).expect("nonempty");
            // Keep only pieces whose standard-coordinate footprint meets the
            // half square; the (s, t) product range is a diamond's bounding
            // box and its corners map far outside the box.
            let (x_lo, x_hi, y_lo, y_hi) = shrunk.standard_bounds();
            let keep = x_hi >= half.corner.x
                && x_lo <= half.x_hi()
                && y_hi >= half.corner.y
                && y_lo <= half.y_hi();
            if keep {
                if !q.contained_in_square(b) {
                    return Err(GeometryError::BoxTooSmall);
                }
                squares.push(q);
            }
            t0 += pitch;
        }
        s0 += pitch;
    }
    if squares.is_empty() {
        return Err(GeometryError::BoxTooSmall);
    }
    Ok(squares)
}

/// Whether a positive integer is a power of two.
pub fn is_dyadic(n: i64) -> bool {
    n > 0 && n & (n - 1) == 0
}

/// Covers for defect squares: a dyadic scale `L̃ ∈ [l1, alpha·l1]` and one
/// cover per defect such that each defect sits inside its cover at
/// ℓ∞ distance at least `l1/8` from the cover's in-box complement.
pub fn cover_defects(
    b: &Square,
    bad: &[Square],
    l1: i64,
    alpha: i64,
) -> Result<(i64, Vec<Square>), GeometryError> {
    if bad.is_empty() {
        return Ok((l1, Vec::new()));
    }
    let l2 = bad[0].side;
    if !is_dyadic(l1) || !is_dyadic(alpha) {
        return Err(GeometryError::ScaleHypotheses);
    }
    if b.side < alpha * l1 || l1 < alpha * l2 || bad.iter().any(|s| s.side != l2) {
        return Err(GeometryError::ScaleHypotheses);
    }
    if bad.iter().any(|s| !b.contains_square(s)) {
        return Err(GeometryError::NotContained);
    }
    let margin = (l1 + 7) / 8;

    let mut ltilde = l1;
    while ltilde <= alpha * l1 {
        if let Some(covers) = try_cover_at_scale(b, bad, ltilde, margin) {
            return Ok((ltilde, covers));
        }
        ltilde *= 2;
    }
    Err(GeometryError::ScaleHypotheses)
}

fn try_cover_at_scale(b: &Square, bad: &[Square], ltilde: i64, margin: i64) -> Option<Vec<Square>> {
    let k = bad.len();
    // Union-find clustering: defects closer than the cover scale share one.
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..k {
        for j in (i + 1)..k {
            if bad[i].linf_gap(&bad[j]) <= ltilde {
                let (a, c) = (find(&mut parent, i), find(&mut parent, j));
                if a != c {
                    parent[a] = c;
                }
            }
        }
    }
    let mut cover_of = alloc::vec![Square::new(Site::new(0, 0), 1).unwrap(); k];
    let mut roots: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..k {
        let r = find(&mut parent, i);
        roots.entry(r).or_default().push(i);
    }
    for members in roots.values() {
        let x_lo = members.iter().map(|&i| bad[i].corner.x).min().unwrap();
        let y_lo = members.iter().map(|&i| bad[i].corner.y).min().unwrap();
        let x_hi = members.iter().map(|&i| bad[i].x_hi()).max().unwrap();
        let y_hi = members.iter().map(|&i| bad[i].y_hi()).max().unwrap();
        let need = (x_hi - x_lo + 1).max(y_hi - y_lo + 1) + 2 * margin;
        if need > ltilde {
            return None;
        }
        let place = |lo: i64, hi: i64, b_lo: i64, b_hi: i64| -> i64 {
            let start = lo - (ltilde - (hi - lo + 1)) / 2;
            start.max(b_lo).min(b_hi - ltilde + 1)
        };
        let cx = place(x_lo, x_hi, b.corner.x, b.x_hi());
        let cy = place(y_lo, y_hi, b.corner.y, b.y_hi());
        let cover = Square::new(Site::new(cx, cy), ltilde).unwrap();
        for &i in members {
            // Distance to the in-box complement: sides flush with the box
            // have no complement sites and are vacuously fine.
            if !cover.contains_square(&bad[i]) {
                return None;
            }
            let ok_x_lo = cover.corner.x <= b.corner.x || bad[i].corner.x - cover.corner.x >= margin;
            let ok_x_hi = cover.x_hi() >= b.x_hi() || cover.x_hi() - bad[i].x_hi() >= margin;
            let ok_y_lo = cover.corner.y <= b.corner.y || bad[i].corner.y - cover.corner.y >= margin;
            let ok_y_hi = cover.y_hi() >= b.y_hi() || cover.y_hi() - bad[i].y_hi() >= margin;
            if !(ok_x_lo && ok_x_hi && ok_y_lo && ok_y_hi) {
                return None;
            }
            cover_of[i] = cover;
        }
    }
    Some(cover_of)
}

/// Smallest dyadic `alpha` for which [`cover_defects`] succeeds, if any.
pub fn smallest_cover_alpha(b: &Square, bad: &[Square], l1: i64) -> Option<i64> {
    let mut alpha = 1i64;
    while alpha * l1 <= b.side {
        if cover_defects(b, bad, l1, alpha).is_ok() {
            return Some(alpha);
        }
        alpha *= 2;
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Metric {
    Euclidean,
    Linf,
}

/// Whether `x` is an `r`-net for the box: every box site lies within
/// distance `r` of some member of `x`.
pub fn is_r_net_with(x: &SiteSet, b: &Square, r: f64, metric: Metric) -> Result<bool, GeometryError> {
    if x.is_empty() {
        return Err(GeometryError::EmptyNet);
    }
    let points: Vec<Site> = x.iter().collect();
    for y in b.sites() {
        let mut best = f64::INFINITY;
        for &p in &points {
            let d = match metric {
                Metric::Euclidean => p.euclid_dist(y),
                Metric::Linf => p.linf_dist(y) as f64,
            };
            if d < best {
                best = d;
            }
            if best <= r {
                break;
            }
        }
        if best > r {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Euclidean-metric `r`-net check (the default metric).
pub fn is_r_net(x: &SiteSet, b: &Square, r: f64) -> Result<bool, GeometryError> {
    is_r_net_with(x, b, r, Metric::Euclidean)
}

/// Weighted shortcut graph over a box: direct edges between all site pairs
/// with ℓ∞ weight, plus directed shortcut edges of weight `-l3` from sites
/// deep inside a defect square to the sites adjacent to that defect.
#[derive(Clone, Debug)]
pub struct DefectGraph {
    pub bx: Square,
    pub defects: Vec<Square>,
    pub shortcut_weight: i64,
    deep: Vec<Square>,
    rings: Vec<Vec<Site>>,
    /// chain[j][k]: minimal cost from standing deep in defect j (about to
    /// jump) to standing deep in defect k (about to jump).
    chain: Vec<Vec<i64>>,
}

const UNREACHABLE: i64 = i64::MAX / 4;

impl DefectGraph {
    pub fn new(bx: Square, defects: Vec<Square>, shortcut_weight: i64) -> Result<Self, GeometryError> {
        if shortcut_weight < 0 {
            return Err(GeometryError::ScaleHypotheses);
        }
        for (i, d) in defects.iter().enumerate() {
            if !bx.contains_square(d) {
                return Err(GeometryError::NotContained);
            }
            for other in defects.iter().skip(i + 1) {
                if d.intersects(other) {
                    return Err(GeometryError::NotContained);
                }
            }
        }
        let min_side = defects.iter().map(|d| d.side).min().unwrap_or(i64::MAX);
        if !defects.is_empty() && (min_side + 7) / 8 < shortcut_weight {
            return Err(GeometryError::NegativeCycleRisk);
        }

        let deep: Vec<Square> = defects.iter().map(deep_square).collect();
        let rings: Vec<Vec<Site>> = defects
            .iter()
            .map(|d| {
                let grown = Square::new(
                    Site::new(d.corner.x - 1, d.corner.y - 1),
                    d.side + 2,
                )
                .unwrap();
                grown
                    .sites()
                    .filter(|&p| {
                        bx.contains(p)
                            && !d.contains(p)
                            && defects.iter().all(|o| !o.contains(p))
                    })
                    .collect()
            })
            .collect();

        let k = defects.len();
        let mut chain = alloc::vec![alloc::vec![UNREACHABLE; k]; k];
        for (j, row) in chain.iter_mut().enumerate() {
            row[j] = 0;
        }
        // Single-jump edges, then Floyd-Warshall with a diagonal check.
        let mut edge = alloc::vec![alloc::vec![UNREACHABLE; k]; k];
        for j in 0..k {
            for m in 0..k {
                if j == m {
                    continue;
                }
                if let Some(gap) = ring_to_square_gap(&rings[j], &deep[m]) {
                    edge[j][m] = gap - shortcut_weight;
                }
            }
        }
        for j in 0..k {
            for m in 0..k {
                if edge[j][m] < chain[j][m] {
                    chain[j][m] = edge[j][m];
                }
            }
        }
        for mid in 0..k {
            for a in 0..k {
                for b in 0..k {
                    if chain[a][mid] < UNREACHABLE && chain[mid][b] < UNREACHABLE {
                        let via = chain[a][mid] + chain[mid][b];
                        if via < chain[a][b] {
                            chain[a][b] = via;
                        }
                    }
                }
            }
        }
        for (j, row) in chain.iter().enumerate() {
            if row[j] < 0 {
                return Err(GeometryError::NegativeCycleRisk);
            }
        }
        Ok(DefectGraph { bx, defects, shortcut_weight, deep, rings, chain })
    }

    /// Shortest weighted distance from `x` to `y`. Not symmetric in
    /// general: shortcut edges are directed outward from defect interiors.
    pub fn distance(&self, x: Site, y: Site) -> i64 {
        let mut best = x.linf_dist(y);
        let k = self.defects.len();
        for j in 0..k {
            let enter = self.deep[j].linf_dist_to(x);
            if enter >= best + self.shortcut_weight * k as i64 {
                continue;
            }
            for m in 0..k {
                if self.chain[j][m] >= UNREACHABLE {
                    continue;
                }
                let exit = ring_to_site_dist(&self.rings[m], y);
                if let Some(exit) = exit {
                    let total = enter + self.chain[j][m] - self.shortcut_weight + exit;
                    if total < best {
                        best = total;
                    }
                }
            }
        }
        best
    }
}

/// Sites of a defect at ℓ∞ distance at least `ceil(side/8)` from its
/// complement form a concentric square.
fn deep_square(d: &Square) -> Square {
    let m = (d.side + 7) / 8;
    // Distance to the complement is 1 + distance to the nearest face.
    let shrink = m - 1;
    let side = (d.side - 2 * shrink).max(1);
    let off = shrink.min((d.side - 1) / 2);
    Square::new(Site::new(d.corner.x + off, d.corner.y + off), side).unwrap()
}

fn ring_to_square_gap(ring: &[Site], target: &Square) -> Option<i64> {
    ring.iter().map(|&v| target.linf_dist_to(v)).min()
}

fn ring_to_site_dist(ring: &[Site], y: Site) -> Option<i64> {
    ring.iter().map(|&v| v.linf_dist(y)).min()
}

#[cfg(test)]
mod tests;
