//! Dense linear algebra kernels.
//!
//! Everything here is dense and desk-scale (matrices up to a few hundred
//! rows): a row-major matrix type, Cholesky factorization, triangular
//! solves, a symmetric eigensolver (Householder tridiagonalization followed
//! by the implicit-shift QL iteration), and a Householder basis for the
//! orthogonal complement of a vector.

use crate::scalar::{real, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn transpose(&self) -> Mat<T> {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        // ikj loop order keeps the inner loop contiguous in both operands.
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                let src = other.row(k);
                let dst = out.row_mut(i);
                for j in 0..dst.len() {
                    dst[j] = dst[j] + a * src[j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v = *v * s;
        }
    }

    pub fn add_assign(&mut self, other: &Mat<T>) {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + *b;
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a = *a - *b;
        }
        m
    }

    /// ½(A + Aᵀ) for square matrices.
    pub fn symmetrize(&self) -> Mat<T> {
        assert_eq!(self.rows, self.cols);
        let half = real::<T>(0.5);
        Mat::from_fn(self.rows, self.cols, |i, j| (self[(i, j)] + self[(j, i)]) * half)
    }

    pub fn frobenius_norm(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc + v * v)
            .sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &v| acc.max(v.abs()))
    }

    pub fn trace(&self) -> T {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn dot(&self, other: &Mat<T>) -> T {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix.
/// Returns `None` when a non-positive pivot is hit.
pub fn cholesky<T: Scalar>(a: &Mat<T>) -> Option<Mat<T>> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d = d - l[(j, k)] * l[(j, k)];
        }
        if d <= T::zero() || !d.is_finite() {
            return None;
        }
        let dj = d.sqrt();
        l[(j, j)] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            // Contiguous row slices keep this O(n^3) loop cache-friendly.
            let (ri, rj) = (i * n, j * n);
            for k in 0..j {
                s = s - l.data[ri + k] * l.data[rj + k];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some(l)
}

/// Solves L x = b in place for lower-triangular L.
pub fn solve_lower<T: Scalar>(l: &Mat<T>, b: &mut [T]) {
    let n = l.rows();
    for i in 0..n {
        let mut s = b[i];
        let row = l.row(i);
        for k in 0..i {
            s = s - row[k] * b[k];
        }
        b[i] = s / row[i];
    }
}

/// Solves Lᵀ x = b in place for lower-triangular L.
pub fn solve_lower_transpose<T: Scalar>(l: &Mat<T>, b: &mut [T]) {
    let n = l.rows();
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * b[k];
        }
        b[i] = s / l[(i, i)];
    }
}

/// Solves A x = b via a precomputed Cholesky factor.
pub fn cholesky_solve<T: Scalar>(l: &Mat<T>, b: &[T]) -> Vec<T> {
    let mut x = b.to_vec();
    solve_lower(l, &mut x);
    solve_lower_transpose(l, &mut x);
    x
}

/// Inverse via Cholesky; caller guarantees positive definiteness.
pub fn cholesky_inverse<T: Scalar>(l: &Mat<T>) -> Mat<T> {
    let n = l.rows();
    let mut inv = Mat::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        let col = cholesky_solve(l, &e);
        for i in 0..n {
            inv[(i, j)] = col[i];
        }
    }
    inv
}

/// Householder reduction of a symmetric matrix to tridiagonal form,
/// accumulating the orthogonal transformation when `want_vectors` is set.
/// Classic tred2 (Numerical Recipes / EISPACK lineage).
fn tred2<T: Scalar>(a: &mut Mat<T>, d: &mut [T], e: &mut [T], want_vectors: bool) {
    let n = a.rows();
    for i in (1..n).rev() {
        let l = i - 1;
        let mut h = T::zero();
        let mut scale = T::zero();
        if l > 0 {
            for k in 0..=l {
                scale = scale + a[(i, k)].abs();
            }
            if scale == T::zero() {
                e[i] = a[(i, l)];
            } else {
                for k in 0..=l {
                    let v = a[(i, k)] / scale;
                    a[(i, k)] = v;
                    h = h + v * v;
                }
                let mut f = a[(i, l)];
                let g = if f >= T::zero() { -h.sqrt() } else { h.sqrt() };
                e[i] = scale * g;
                h = h - f * g;
                a[(i, l)] = f - g;
                f = T::zero();
                for j in 0..=l {
                    if want_vectors {
                        a[(j, i)] = a[(i, j)] / h;
                    }
                    let mut g = T::zero();
                    for k in 0..=j {
                        g = g + a[(j, k)] * a[(i, k)];
                    }
                    for k in (j + 1)..=l {
                        g = g + a[(k, j)] * a[(i, k)];
                    }
                    e[j] = g / h;
                    f = f + e[j] * a[(i, j)];
                }
                let hh = f / (h + h);
                for j in 0..=l {
                    let f = a[(i, j)];
                    let g = e[j] - hh * f;
                    e[j] = g;
                    for k in 0..=j {
                        let v = a[(j, k)] - (f * e[k] + g * a[(i, k)]);
                        a[(j, k)] = v;
                    }
                }
            }
        } else {
            e[i] = a[(i, l)];
        }
        d[i] = h;
    }
    if want_vectors {
        d[0] = T::zero();
    }
    e[0] = T::zero();
    for i in 0..n {
        if want_vectors {
            let l = i;
            if d[i] != T::zero() {
                for j in 0..l {
                    let mut g = T::zero();
                    for k in 0..l {
                        g = g + a[(i, k)] * a[(k, j)];
                    }
                    for k in 0..l {
                        let v = a[(k, j)] - g * a[(k, i)];
                        a[(k, j)] = v;
                    }
                }
            }
            d[i] = a[(i, i)];
            a[(i, i)] = T::one();
            for j in 0..l {
                a[(j, i)] = T::zero();
                a[(i, j)] = T::zero();
            }
        } else {
            d[i] = a[(i, i)];
        }
    }
}

/// Implicit-shift QL iteration on a symmetric tridiagonal matrix.
/// Eigenvalues land in `d` (ascending after the final sort); when
/// `z` is `Some`, its columns become the eigenvectors.
fn tql2<T: Scalar>(d: &mut [T], e: &mut [T], mut z: Option<&mut Mat<T>>) -> Result<(), ()> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    for l in 0..n {
        let mut iter = 0usize;
        loop {
            // Find a negligible off-diagonal element.
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= T::epsilon() * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            if iter >= 50 {
                return Err(());
            }
            iter += 1;
            let two = real::<T>(2.0);
            let mut g = (d[l + 1] - d[l]) / (two * e[l]);
            let mut r = g.hypot(T::one());
            let sign_r = if g >= T::zero() { r.abs() } else { -r.abs() };
            g = d[m] - d[l] + e[l] / (g + sign_r);
            let mut s = T::one();
            let mut c = T::one();
            let mut p = T::zero();
            for i in (l..m).rev() {
                let mut f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == T::zero() {
                    d[i + 1] = d[i + 1] - p;
                    e[m] = T::zero();
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + two * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                if let Some(zm) = z.as_deref_mut() {
                    for k in 0..n {
                        f = zm[(k, i + 1)];
                        zm[(k, i + 1)] = s * zm[(k, i)] + c * f;
                        zm[(k, i)] = c * zm[(k, i)] - s * f;
                    }
                }
            }
            if r == T::zero() && m > l {
                continue;
            }
            d[l] = d[l] - p;
            e[l] = g;
            e[m] = T::zero();
        }
    }
    Ok(())
}

/// Eigen decomposition of a symmetric matrix.
pub struct SymEigen<T> {
    /// Eigenvalues in ascending order.
    pub values: Vec<T>,
    /// Matching eigenvectors as columns, when requested.
    pub vectors: Option<Mat<T>>,
}

/// Eigenvalues (and optionally eigenvectors) of a symmetric matrix via
/// Householder tridiagonalization + QL with implicit shifts.
pub fn sym_eigen<T: Scalar>(a: &Mat<T>, want_vectors: bool) -> SymEigen<T> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    if n == 0 {
        return SymEigen { values: vec![], vectors: want_vectors.then(|| Mat::zeros(0, 0)) };
    }
    let mut work = a.clone();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut work, &mut d, &mut e, want_vectors);
    let mut z = want_vectors.then_some(&mut work);
    tql2(&mut d, &mut e, z.as_deref_mut()).expect("QL iteration failed to converge");
    // Sort ascending, permuting vectors alongside.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).unwrap());
    let values: Vec<T> = order.iter().map(|&i| d[i]).collect();
    let vectors = if want_vectors {
        let zm = work;
        let mut v = Mat::zeros(n, n);
        for (newc, &oldc) in order.iter().enumerate() {
            for r in 0..n {
                v[(r, newc)] = zm[(r, oldc)];
            }
        }
        Some(v)
    } else {
        None
    };
    SymEigen { values, vectors }
}

/// Minimum eigenvalue of a symmetric matrix.
pub fn min_eigenvalue<T: Scalar>(a: &Mat<T>) -> T {
    sym_eigen(a, false).values[0]
}

/// Maximum eigenvalue of a symmetric matrix.
pub fn max_eigenvalue<T: Scalar>(a: &Mat<T>) -> T {
    *sym_eigen(a, false).values.last().unwrap()
}

/// Orthonormal basis of the hyperplane orthogonal to `v`, as the last
/// n−1 columns of the Householder reflector that maps v/|v| to ±e₁.
/// Columns b satisfy bᵀv = 0 and BᵀB = I.
pub fn orthogonal_complement<T: Scalar>(v: &[T]) -> Mat<T> {
    let n = v.len();
    assert!(n >= 1);
    let norm = v.iter().fold(T::zero(), |acc, &x| acc + x * x).sqrt();
    assert!(norm > T::zero(), "cannot build complement of the zero vector");
    let mut u: Vec<T> = v.iter().map(|&x| x / norm).collect();
    // Reflector H = I − 2uuᵀ/(uᵀu) with u = v̂ − sign(v̂₁)e₁ maps v̂ to ±e₁;
    // its columns 2..n are orthogonal to v.
    let sign = if u[0] >= T::zero() { T::one() } else { -T::one() };
    u[0] = u[0] + sign;
    let uu = u.iter().fold(T::zero(), |acc, &x| acc + x * x);
    let mut b = Mat::zeros(n, n.saturating_sub(1));
    if uu == T::zero() {
        // v is already ±e₁.
        for j in 1..n {
            b[(j, j - 1)] = T::one();
        }
        return b;
    }
    let two = real::<T>(2.0);
    for j in 1..n {
        for i in 0..n {
            let h = if i == j { T::one() } else { T::zero() };
            b[(i, j - 1)] = h - two * u[i] * u[j] / uu;
        }
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(rows: usize, cols: usize, v: &[f64]) -> Mat<f64> {
        assert_eq!(v.len(), rows * cols);
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = v[i * cols + j];
            }
        }
        m
    }

    #[test]
    fn cholesky_reconstructs() {
        let a = mat(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = cholesky(&a).unwrap();
        let llt = l.matmul(&l.transpose());
        for i in 0..3 {
            for j in 0..3 {
                assert!((llt[(i, j)] - a[(i, j)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = mat(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(cholesky(&a).is_none());
    }

    #[test]
    fn cholesky_solve_roundtrip() {
        let a = mat(3, 3, &[4.0, 2.0, 0.4, 2.0, 5.0, 1.0, 0.4, 1.0, 3.0]);
        let l = cholesky(&a).unwrap();
        let x = cholesky_solve(&l, &[1.0, -2.0, 0.5]);
        let b = a.matvec(&x);
        for (bi, want) in b.iter().zip(&[1.0, -2.0, 0.5]) {
            assert!((bi - want).abs() < 1e-12);
        }
    }

    #[test]
    fn eigen_diagonal() {
        let a = mat(3, 3, &[3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2.0]);
        let eig = sym_eigen(&a, false);
        assert!((eig.values[0] - 1.0).abs() < 1e-13);
        assert!((eig.values[1] - 2.0).abs() < 1e-13);
        assert!((eig.values[2] - 3.0).abs() < 1e-13);
    }

    #[test]
    fn eigen_known_2x2() {
        // [[2,1],[1,2]] has eigenvalues 1 and 3.
        let a = mat(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        let eig = sym_eigen(&a, true);
        assert!((eig.values[0] - 1.0).abs() < 1e-13);
        assert!((eig.values[1] - 3.0).abs() < 1e-13);
        let v = eig.vectors.unwrap();
        // A v = λ v for each column.
        for c in 0..2 {
            let col = [v[(0, c)], v[(1, c)]];
            let av = a.matvec(&col);
            for i in 0..2 {
                assert!((av[i] - eig.values[c] * col[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn eigen_reconstructs_random_symmetric() {
        // Deterministic pseudo-random symmetric matrix.
        let n = 12;
        let mut seed = 1234u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let mut a = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v = next();
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        let eig = sym_eigen(&a, true);
        let v = eig.vectors.unwrap();
        // V diag(λ) Vᵀ == A
        let mut rec = Mat::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    s += v[(i, k)] * eig.values[k] * v[(j, k)];
                }
                rec[(i, j)] = s;
            }
        }
        assert!(rec.sub(&a).max_abs() < 1e-10);
        // Orthonormality.
        let vtv = v.transpose().matmul(&v);
        assert!(vtv.sub(&Mat::identity(n)).max_abs() < 1e-12);
    }

    #[test]
    fn complement_is_orthonormal() {
        let v = [0.3, -1.2, 0.7];
        let b = orthogonal_complement(&v);
        assert_eq!((b.rows(), b.cols()), (3, 2));
        for c in 0..2 {
            let mut dot = 0.0;
            for i in 0..3 {
                dot += b[(i, c)] * v[i];
            }
            assert!(dot.abs() < 1e-12);
        }
        let btb = b.transpose().matmul(&b);
        assert!(btb.sub(&Mat::identity(2)).max_abs() < 1e-12);
    }

    #[test]
    fn complement_of_negative_axis() {
        let b = orthogonal_complement(&[-2.0, 0.0]);
        assert_eq!((b.rows(), b.cols()), (2, 1));
        assert!((b[(0, 0)].abs() - 0.0).abs() < 1e-15);
        assert!((b[(1, 0)].abs() - 1.0).abs() < 1e-15);
    }
}
