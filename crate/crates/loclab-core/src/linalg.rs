//! Dense and banded linear algebra for real symmetric problems.
//!
//! The eigensolver is the classical two-stage reduction: Householder
//! tridiagonalization with accumulated transforms followed by implicitly
//! shifted QL iteration, returning eigenvalues in ascending order with an
//! orthonormal eigenvector matrix. Resolvents go through partial-pivot LU.
//! Spectrum counting uses the inertia of a banded LDLᵀ factorization, which
//! locates eigenvalues at `O(n·b²)` per probe without solving for them.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::math;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LinalgError {
    NotSquare,
    Singular,
    NoConvergence,
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NotSquare => write!(f, "matrix is not square"),
            LinalgError::Singular => write!(f, "matrix is singular to working precision"),
            LinalgError::NoConvergence => write!(f, "eigensolve failed to converge"),
        }
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<f64>,
}

impl DenseMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = DenseMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        DenseMat { rows, cols, data }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = 0.0;
            for (a, b) in row.iter().zip(x) {
                acc += a * b;
            }
            y[i] = acc;
        }
        y
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |a, &b| a.max(math::abs(b)))
    }
}

impl core::ops::Index<(usize, usize)> for DenseMat {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for DenseMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Eigendecomposition of a real symmetric matrix: ascending eigenvalues and
/// the matrix whose columns are the matching orthonormal eigenvectors.
pub fn sym_eigen(a: &DenseMat) -> Result<(Vec<f64>, DenseMat), LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare);
    }
    let n = a.rows;
    if n == 0 {
        return Ok((Vec::new(), DenseMat::zeros(0, 0)));
    }
    let mut v = a.clone();
    let mut d = vec![0.0f64; n];
    let mut e = vec![0.0f64; n];
    tred2(&mut v, &mut d, &mut e);
    tql2(&mut v, &mut d, &mut e)?;
    Ok((d, v))
}

/// Householder reduction to symmetric tridiagonal form with accumulation.
fn tred2(v: &mut DenseMat, d: &mut [f64], e: &mut [f64]) {
    let n = v.rows;
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }

    for i in (1..n).rev() {
        let mut scale = 0.0;
        let mut h = 0.0;
        for item in d.iter().take(i) {
            scale += math::abs(*item);
        }
        if scale == 0.0 {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
                v[(j, i)] = 0.0;
            }
        } else {
            for item in d.iter_mut().take(i) {
                *item /= scale;
                h += *item * *item;
            }
            let f = d[i - 1];
            let mut g = math::sqrt(h);
            if f > 0.0 {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for item in e.iter_mut().take(i) {
                *item = 0.0;
            }

            for j in 0..i {
                let f = d[j];
                v[(j, i)] = f;
                let mut g = e[j] + v[(j, j)] * f;
                for k in (j + 1)..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            let mut f = 0.0;
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                let f = d[j];
                let g = e[j];
                for k in j..i {
                    v[(k, j)] -= f * e[k] + g * d[k];
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = 0.0;
            }
        }
        d[i] = h;
    }

    for i in 0..(n - 1) {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = 1.0;
        let h = d[i + 1];
        if h != 0.0 {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = 0.0;
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    v[(k, j)] -= g * d[k];
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = 0.0;
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = 0.0;
    }
    v[(n - 1, n - 1)] = 1.0;
    e[0] = 0.0;
}

/// Implicitly shifted QL iteration on the tridiagonal form, accumulating
/// rotations into the eigenvector matrix, with a final ascending sort.
fn tql2(v: &mut DenseMat, d: &mut [f64], e: &mut [f64]) -> Result<(), LinalgError> {
    let n = v.rows;
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = 0.0;

    let mut f = 0.0f64;
    let mut tst1 = 0.0f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(math::abs(d[l]) + math::abs(e[l]));
        let mut m = l;
        while m < n {
            if math::abs(e[m]) <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 64 {
                    return Err(LinalgError::NoConvergence);
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = math::hypot(p, 1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for item in d.iter_mut().take(n).skip(l + 2) {
                    *item -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0f64;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0f64;
                let mut s2 = 0.0f64;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    h = c * p;
                    r = math::hypot(p, e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    for k in 0..n {
                        let h = v[(k, i + 1)];
                        v[(k, i + 1)] = s * v[(k, i)] + c * h;
                        v[(k, i)] = c * v[(k, i)] - s * h;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if math::abs(e[l]) <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }

    // Ascending order.
    for i in 0..n.saturating_sub(1) {
        let mut k = i;
        let mut p = d[i];
        for j in (i + 1)..n {
            if d[j] < p {
                k = j;
                p = d[j];
            }
        }
        if k != i {
            d[k] = d[i];
            d[i] = p;
            for row in 0..n {
                let tmp = v[(row, i)];
                v[(row, i)] = v[(row, k)];
                v[(row, k)] = tmp;
            }
        }
    }
    Ok(())
}

/// Partial-pivot LU factorization.
pub struct LuFactors {
    n: usize,
    lu: DenseMat,
    pivots: Vec<usize>,
}

pub fn lu_factor(a: &DenseMat) -> Result<LuFactors, LinalgError> {
    if a.rows != a.cols {
        return Err(LinalgError::NotSquare);
    }
    let n = a.rows;
    let mut lu = a.clone();
    let mut pivots: Vec<usize> = (0..n).collect();
    for col in 0..n {
        let mut pivot = col;
        let mut best = math::abs(lu[(col, col)]);
        for row in (col + 1)..n {
            let v = math::abs(lu[(row, col)]);
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if best == 0.0 {
            return Err(LinalgError::Singular);
        }
        if pivot != col {
            for j in 0..n {
                let tmp = lu[(col, j)];
                lu[(col, j)] = lu[(pivot, j)];
                lu[(pivot, j)] = tmp;
            }
            pivots.swap(col, pivot);
        }
        let diag = lu[(col, col)];
        for row in (col + 1)..n {
            let factor = lu[(row, col)] / diag;
            lu[(row, col)] = factor;
            if factor != 0.0 {
                for j in (col + 1)..n {
                    let sub = factor * lu[(col, j)];
                    lu[(row, j)] -= sub;
                }
            }
        }
    }
    Ok(LuFactors { n, lu, pivots })
}

impl LuFactors {
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.pivots.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut acc = x[i];
            for j in 0..i {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = x[i];
            for j in (i + 1)..n {
                acc -= self.lu[(i, j)] * x[j];
            }
            x[i] = acc / self.lu[(i, i)];
        }
        x
    }

    /// Full inverse, column by column.
    pub fn inverse(&self) -> DenseMat {
        let n = self.n;
        let mut out = DenseMat::zeros(n, n);
        let mut unit = vec![0.0f64; n];
        for j in 0..n {
            unit[j] = 1.0;
            let col = self.solve(&unit);
            unit[j] = 0.0;
            for i in 0..n {
                out[(i, j)] = col[i];
            }
        }
        out
    }
}

/// Symmetric banded matrix (lower band storage): `bands[i]` holds
/// `A[i][i-b..=i]` clamped at the left edge.
#[derive(Clone, Debug)]
pub struct BandedSym {
    pub n: usize,
    pub bandwidth: usize,
    bands: Vec<Vec<f64>>,
}

impl BandedSym {
    pub fn zeros(n: usize, bandwidth: usize) -> Self {
        let bands = (0..n).map(|i| vec![0.0; i.min(bandwidth) + 1]).collect();
        BandedSym { n, bandwidth, bands }
    }

    fn lo(&self, i: usize) -> usize {
        i.saturating_sub(self.bandwidth)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        if j < self.lo(i) {
            0.0
        } else {
            self.bands[i][j - self.lo(i)]
        }
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (i, j) = if i >= j { (i, j) } else { (j, i) };
        debug_assert!(j >= self.lo(i), "entry outside the band");
        let lo = self.lo(i);
        self.bands[i][j - lo] = value;
    }

    /// Number of eigenvalues strictly below `shift`, by the inertia of the
    /// LDLᵀ factorization of `A - shift·I`. Vanishing pivots are treated as
    /// negative after an infinitesimal perturbation.
    pub fn count_below(&self, shift: f64) -> usize {
        let n = self.n;
        let b = self.bandwidth;
        // Work rows of L (unit diagonal implicit) and the pivot vector.
        let mut l_rows: Vec<Vec<f64>> = self.bands.clone();
        let mut d = vec![0.0f64; n];
        let mut negatives = 0usize;
        for i in 0..n {
            let lo = self.lo(i);
            for j in lo..i {
                // L[i][j] = (A[i][j] - Σ_k L[i][k] L[j][k] d[k]) / d[j]
                let mut acc = self.bands[i][j - lo];
                let k_start = lo.max(j.saturating_sub(b));
                for k in k_start..j {
                    acc -= l_rows[i][k - lo] * l_rows[j][k - j.saturating_sub(b)] * d[k];
                }
                l_rows[i][j - lo] = acc / d[j];
            }
            let mut acc = self.bands[i][i - lo] - shift;
            for k in lo..i {
                let lik = l_rows[i][k - lo];
                acc -= lik * lik * d[k];
            }
            if acc == 0.0 {
                acc = -1e-300;
            }
            d[i] = acc;
            if acc < 0.0 {
                negatives += 1;
            }
        }
        negatives
    }

    /// Number of eigenvalues in the open interval `(a, b)`.
    pub fn count_in(&self, a: f64, b: f64) -> usize {
        self.count_below(b).saturating_sub(self.count_below(a))
    }

    /// Smallest eigenvalue located by bisection on the inertia count.
    pub fn min_eigenvalue(&self, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
        debug_assert!(self.count_below(lo) == 0);
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// Banded LU with partial pivoting (LAPACK band layout: entry `A[i][j]`
/// lives at `ab[j·ldab + kl + ku + i - j]` with `kl = ku = bandwidth` and
/// `ldab = 3·bandwidth + 1`; the extra `kl` rows absorb pivoting fill).
pub struct BandedLu {
    n: usize,
    kl: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factor a banded matrix given by an entry oracle.
    pub fn factor<F: Fn(usize, usize) -> f64>(
        n: usize,
        bandwidth: usize,
        entry: F,
    ) -> Result<Self, LinalgError> {
        let kl = bandwidth;
        let ku = bandwidth;
        let ldab = 2 * kl + ku + 1;
        let mut ab = vec![0.0f64; n * ldab];
        for j in 0..n {
            let lo = j.saturating_sub(ku);
            let hi = (j + kl).min(n - 1);
            for i in lo..=hi {
                ab[j * ldab + kl + ku + i - j] = entry(i, j);
            }
        }
        let mut ipiv = vec![0usize; n];
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = 0usize;
            let mut best = math::abs(ab[j * ldab + kl + ku]);
            for i in 1..=km {
                let v = math::abs(ab[j * ldab + kl + ku + i]);
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return Err(LinalgError::Singular);
            }
            ipiv[j] = j + p;
            let jend = (j + ku + kl).min(n - 1);
            if p > 0 {
                for col in j..=jend {
                    let a = col * ldab + kl + ku + (j + p) - col;
                    let b = col * ldab + kl + ku + j - col;
                    ab.swap(a, b);
                }
            }
            let pivot = ab[j * ldab + kl + ku];
            for i in 1..=km {
                ab[j * ldab + kl + ku + i] /= pivot;
            }
            for col in (j + 1)..=jend {
                let f = ab[col * ldab + kl + ku + j - col];
                if f != 0.0 {
                    for i in 1..=km {
                        let m = ab[j * ldab + kl + ku + i];
                        ab[col * ldab + kl + ku + (j + i) - col] -= m * f;
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ab, ipiv })
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        let kl = self.kl;
        let ku = kl;
        let ldab = 2 * kl + ku + 1;
        let mut x = rhs.to_vec();
        for j in 0..n {
            if self.ipiv[j] != j {
                x.swap(j, self.ipiv[j]);
            }
            let km = kl.min(n - 1 - j);
            let xj = x[j];
            if xj != 0.0 {
                for i in 1..=km {
                    x[j + i] -= self.ab[j * ldab + kl + ku + i] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let jend = (j + ku + kl).min(n - 1);
            let mut acc = x[j];
            for col in (j + 1)..=jend {
                acc -= self.ab[col * ldab + kl + ku + j - col] * x[col];
            }
            x[j] = acc / self.ab[j * ldab + kl + ku];
        }
        x
    }
}
