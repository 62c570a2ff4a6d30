//! Polynomial matrices, vector fields, Jacobians and orbital derivatives.

use super::{PolyError, Polynomial};
use crate::linalg::Mat;
use crate::scalar::Scalar;

/// Matrix with polynomial entries.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyMatrix<T> {
    rows: usize,
    cols: usize,
    entries: Vec<Polynomial<T>>,
}

impl<T: Scalar> PolyMatrix<T> {
    pub fn zeros(rows: usize, cols: usize, arity: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            entries: vec![Polynomial::zero(arity); rows * cols],
        }
    }

    pub fn identity(n: usize, arity: usize) -> Self {
        let mut m = Self::zeros(n, n, arity);
        for i in 0..n {
            *m.entry_mut(i, i) = Polynomial::one(arity);
        }
        m
    }

    pub fn from_entries(rows: usize, cols: usize, entries: Vec<Polynomial<T>>) -> Self {
        assert_eq!(entries.len(), rows * cols);
        let arity = entries[0].arity();
        assert!(entries.iter().all(|p| p.arity() == arity));
        PolyMatrix { rows, cols, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn arity(&self) -> usize {
        self.entries[0].arity()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Polynomial<T> {
        &self.entries[i * self.cols + j]
    }

    pub fn entry_mut(&mut self, i: usize, j: usize) -> &mut Polynomial<T> {
        &mut self.entries[i * self.cols + j]
    }

    /// Term-for-term symmetry check.
    pub fn is_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.entry(i, j) != self.entry(j, i) {
                    return false;
                }
            }
        }
        true
    }

    pub fn require_symmetric(&self) -> Result<(), PolyError> {
        if self.rows != self.cols {
            return Err(PolyError::DimensionMismatch(format!(
                "{}x{} matrix cannot be symmetric",
                self.rows, self.cols
            )));
        }
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                if self.entry(i, j) != self.entry(j, i) {
                    return Err(PolyError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(())
    }

    /// Evaluates every entry at a point, producing a numeric matrix.
    pub fn evaluate(&self, point: &[T]) -> Result<Mat<T>, PolyError> {
        let mut out = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.entry(i, j).evaluate(point)?;
            }
        }
        Ok(out)
    }

    pub fn max_total_degree(&self) -> u32 {
        self.entries.iter().map(Polynomial::total_degree).max().unwrap_or(0)
    }

    /// True when no entry has any term (degree-0 matrix of zeros included).
    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Polynomial::is_zero)
    }
}

/// Polynomial vector field f = (f₁,…,f_n), each component of arity n.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    components: Vec<Polynomial<T>>,
}

impl<T: Scalar> VectorField<T> {
    pub fn new(components: Vec<Polynomial<T>>) -> Result<Self, PolyError> {
        let n = components.len();
        for c in &components {
            if c.arity() != n {
                return Err(PolyError::ArityMismatch { left: n, right: c.arity() });
            }
        }
        Ok(VectorField { components })
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn component(&self, i: usize) -> &Polynomial<T> {
        &self.components[i]
    }

    pub fn components(&self) -> &[Polynomial<T>] {
        &self.components
    }

    pub fn evaluate(&self, point: &[T]) -> Result<Vec<T>, PolyError> {
        self.components.iter().map(|c| c.evaluate(point)).collect()
    }

    pub fn max_total_degree(&self) -> u32 {
        self.components.iter().map(Polynomial::total_degree).max().unwrap_or(0)
    }
}

/// Jacobian J(x) of a vector field: entry (i,j) = ∂f_i/∂x_j.
pub fn jacobian<T: Scalar>(field: &VectorField<T>) -> PolyMatrix<T> {
    let n = field.dim();
    let mut out = PolyMatrix::zeros(n, n, n);
    for i in 0..n {
        for j in 0..n {
            *out.entry_mut(i, j) = field.component(i).partial(j).expect("index in range");
        }
    }
    out
}

/// Orbital derivative of a symmetric polynomial matrix along a field:
/// entry (k,l) = Σⱼ fⱼ · ∂g_kl/∂xⱼ.
pub fn orbital_derivative<T: Scalar>(
    g: &PolyMatrix<T>,
    field: &VectorField<T>,
) -> Result<PolyMatrix<T>, PolyError> {
    g.require_symmetric()?;
    let n = field.dim();
    if g.rows() != n || g.arity() != n {
        return Err(PolyError::DimensionMismatch(format!(
            "metric is {}x{} arity {}, field dimension {}",
            g.rows(),
            g.cols(),
            g.arity(),
            n
        )));
    }
    let mut out = PolyMatrix::zeros(n, n, n);
    for k in 0..n {
        for l in k..n {
            let mut acc = Polynomial::zero(n);
            for j in 0..n {
                let dg = g.entry(k, l).partial(j)?;
                acc = acc.add(&field.component(j).mul(&dg)?)?;
            }
            *out.entry_mut(k, l) = acc.clone();
            *out.entry_mut(l, k) = acc;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Monomial;

    type P = Polynomial<f64>;

    fn m(exps: &[u32]) -> Monomial {
        Monomial::new(exps.to_vec())
    }

    #[test]
    fn jacobian_of_linear_rotation() {
        // F = (−y, x) → [[0,−1],[1,0]]
        let f = VectorField::new(vec![P::var(2, 1).neg(), P::var(2, 0)]).unwrap();
        let j = jacobian(&f);
        assert!(j.entry(0, 0).is_zero());
        assert_eq!(j.entry(0, 1), &P::constant(2, -1.0));
        assert_eq!(j.entry(1, 0), &P::one(2));
        assert!(j.entry(1, 1).is_zero());
    }

    #[test]
    fn orbital_derivative_of_constant_is_zero() {
        let f = VectorField::new(vec![P::var(2, 1).neg(), P::var(2, 0)]).unwrap();
        let g = PolyMatrix::identity(2, 2);
        let gd = orbital_derivative(&g, &f).unwrap();
        assert!(gd.is_zero());
    }

    #[test]
    fn orbital_derivative_1d() {
        // G = [x²], f = −x → Ġ = [−2x²]
        let g = PolyMatrix::from_entries(1, 1, vec![P::from_terms(1, [(m(&[2]), 1.0)])]);
        let f = VectorField::new(vec![P::var(1, 0).neg()]).unwrap();
        let gd = orbital_derivative(&g, &f).unwrap();
        assert_eq!(gd.entry(0, 0), &P::from_terms(1, [(m(&[2]), -2.0)]));
    }

    #[test]
    fn orbital_derivative_rejects_asymmetric() {
        let mut g = PolyMatrix::identity(2, 2);
        *g.entry_mut(0, 1) = P::var(2, 0);
        let f = VectorField::new(vec![P::var(2, 1).neg(), P::var(2, 0)]).unwrap();
        assert!(matches!(
            orbital_derivative(&g, &f),
            Err(PolyError::NotSymmetric { row: 0, col: 1 })
        ));
    }

    #[test]
    fn vector_field_rejects_wrong_arity() {
        assert!(VectorField::new(vec![P::var(2, 0), P::var(3, 1).neg()]).is_err());
    }
}
