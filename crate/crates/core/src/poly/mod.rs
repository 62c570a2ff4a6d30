//! Sparse multivariate polynomial arithmetic with floating-point
//! coefficients.
//!
//! Polynomials are stored as exponent-vector → coefficient maps, keyed in
//! graded-lexicographic order so every iteration over terms is
//! deterministic. Coefficients with magnitude below [`PRUNE_THRESHOLD`] are
//! dropped after each arithmetic operation; this keeps float noise from
//! inflating term counts while staying far below any solver tolerance.

mod basis;
mod matrix;

pub use basis::{monomial_basis, WBlockCap};
pub use matrix::{jacobian, orbital_derivative, PolyMatrix, VectorField};

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::scalar::{real, Scalar};

/// Absolute coefficient magnitude below which a term is dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;

/// Errors from polynomial-level operations.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PolyError {
    #[error("arity mismatch: {left} vs {right}")]
    ArityMismatch { left: usize, right: usize },
    #[error("variable index {index} out of range for arity {arity}")]
    VarIndexOutOfRange { index: usize, arity: usize },
    #[error("point length {point_len} does not match arity {arity}")]
    PointLengthMismatch { point_len: usize, arity: usize },
    #[error("matrix is not symmetric at entry ({row},{col})")]
    NotSymmetric { row: usize, col: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// A monomial: one exponent per indeterminate, fixed arity per context.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Monomial {
    exps: Vec<u32>,
}

impl Monomial {
    pub fn new(exps: Vec<u32>) -> Self {
        Monomial { exps }
    }

    /// The constant monomial 1.
    pub fn unit(arity: usize) -> Self {
        Monomial { exps: vec![0; arity] }
    }

    /// Single variable x_i.
    pub fn var(arity: usize, index: usize) -> Self {
        let mut exps = vec![0; arity];
        exps[index] = 1;
        Monomial { exps }
    }

    pub fn arity(&self) -> usize {
        self.exps.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exps
    }

    pub fn exponent(&self, index: usize) -> u32 {
        self.exps[index]
    }

    pub fn total_degree(&self) -> u32 {
        self.exps.iter().sum()
    }

    /// Total degree restricted to indices in `range`.
    pub fn degree_in(&self, range: std::ops::Range<usize>) -> u32 {
        self.exps[range].iter().sum()
    }

    pub fn is_unit(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        debug_assert_eq!(self.arity(), other.arity());
        Monomial {
            exps: self
                .exps
                .iter()
                .zip(&other.exps)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// Evaluates the monomial at a point.
    pub fn evaluate<T: Scalar>(&self, point: &[T]) -> T {
        debug_assert_eq!(self.arity(), point.len());
        let mut acc = T::one();
        for (&e, &x) in self.exps.iter().zip(point) {
            if e > 0 {
                acc = acc * x.powi(e as i32);
            }
        }
        acc
    }

    /// Extends the monomial to a larger arity, placing the existing
    /// exponents starting at `offset`.
    pub fn embed(&self, arity: usize, offset: usize) -> Monomial {
        assert!(offset + self.arity() <= arity);
        let mut exps = vec![0; arity];
        exps[offset..offset + self.arity()].copy_from_slice(&self.exps);
        Monomial { exps }
    }
}

/// Graded-lexicographic order: compare total degree first, then exponent
/// vectors lexicographically.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.total_degree()
            .cmp(&other.total_degree())
            .then_with(|| self.exps.cmp(&other.exps))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse multivariate polynomial over a real scalar type.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    arity: usize,
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero(arity: usize) -> Self {
        Polynomial { arity, terms: BTreeMap::new() }
    }

    pub fn constant(arity: usize, value: T) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(Monomial::unit(arity), value);
        p
    }

    pub fn one(arity: usize) -> Self {
        Self::constant(arity, T::one())
    }

    /// The variable x_i as a polynomial.
    pub fn var(arity: usize, index: usize) -> Self {
        let mut p = Self::zero(arity);
        p.add_term(Monomial::var(arity, index), T::one());
        p
    }

    pub fn from_terms(arity: usize, terms: impl IntoIterator<Item = (Monomial, T)>) -> Self {
        let mut p = Self::zero(arity);
        for (m, c) in terms {
            assert_eq!(m.arity(), arity, "term arity mismatch");
            p.add_term(m, c);
        }
        p
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, m: &Monomial) -> T {
        self.terms.get(m).copied().unwrap_or_else(T::zero)
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(Monomial::total_degree).max().unwrap_or(0)
    }

    /// Maximum degree over the index range (e.g. the W block).
    pub fn degree_in(&self, range: std::ops::Range<usize>) -> u32 {
        self.terms
            .keys()
            .map(|m| m.degree_in(range.clone()))
            .max()
            .unwrap_or(0)
    }

    pub fn max_coeff_abs(&self) -> T {
        self.terms
            .values()
            .fold(T::zero(), |acc, c| acc.max(c.abs()))
    }

    /// Adds `c·m`, keeping the polynomial canonical and pruned.
    pub fn add_term(&mut self, m: Monomial, c: T) {
        debug_assert_eq!(m.arity(), self.arity);
        let threshold = real::<T>(PRUNE_THRESHOLD);
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                if c.abs() >= threshold {
                    e.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let v = *e.get() + c;
                if v.abs() >= threshold {
                    *e.get_mut() = v;
                } else {
                    e.remove();
                }
            }
        }
    }

    fn check_arity(&self, other: &Self) -> Result<(), PolyError> {
        if self.arity != other.arity {
            return Err(PolyError::ArityMismatch { left: self.arity, right: other.arity });
        }
        Ok(())
    }

    /// Coefficient-wise sum.
    pub fn add(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_arity(other)?;
        let mut out = self.clone();
        for (m, &c) in other.terms.iter() {
            out.add_term(m.clone(), c);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_arity(other)?;
        let mut out = self.clone();
        for (m, &c) in other.terms.iter() {
            out.add_term(m.clone(), -c);
        }
        Ok(out)
    }

    pub fn neg(&self) -> Self {
        let mut out = self.clone();
        for c in out.terms.values_mut() {
            *c = -*c;
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = Self::zero(self.arity);
        for (m, &c) in self.terms.iter() {
            out.add_term(m.clone(), c * s);
        }
        out
    }

    /// Distributive product.
    pub fn mul(&self, other: &Self) -> Result<Self, PolyError> {
        self.check_arity(other)?;
        let mut out = Self::zero(self.arity);
        for (ma, &ca) in self.terms.iter() {
            for (mb, &cb) in other.terms.iter() {
                out.add_term(ma.mul(mb), ca * cb);
            }
        }
        Ok(out)
    }

    /// Multiplies every term by a monomial.
    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        let mut out = Self::zero(self.arity);
        for (ma, &ca) in self.terms.iter() {
            out.add_term(ma.mul(m), ca);
        }
        out
    }

    /// Formal partial derivative with respect to variable `var_index`.
    pub fn partial(&self, var_index: usize) -> Result<Self, PolyError> {
        if var_index >= self.arity {
            return Err(PolyError::VarIndexOutOfRange { index: var_index, arity: self.arity });
        }
        let mut out = Self::zero(self.arity);
        for (m, &c) in self.terms.iter() {
            let e = m.exponent(var_index);
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[var_index] = e - 1;
            out.add_term(Monomial::new(exps), c * real::<T>(e as f64));
        }
        Ok(out)
    }

    /// Evaluates at a point.
    pub fn evaluate(&self, point: &[T]) -> Result<T, PolyError> {
        if point.len() != self.arity {
            return Err(PolyError::PointLengthMismatch { point_len: point.len(), arity: self.arity });
        }
        let mut acc = T::zero();
        for (m, &c) in self.terms.iter() {
            acc = acc + c * m.evaluate(point);
        }
        Ok(acc)
    }

    /// Gradient as one polynomial per variable.
    pub fn gradient(&self) -> Vec<Self> {
        (0..self.arity)
            .map(|i| self.partial(i).expect("index in range"))
            .collect()
    }

    /// Re-interprets the polynomial in a larger ring, placing its
    /// variables at `offset`.
    pub fn embed(&self, arity: usize, offset: usize) -> Self {
        let mut out = Self::zero(arity);
        for (m, &c) in self.terms.iter() {
            out.add_term(m.embed(arity, offset), c);
        }
        out
    }

    /// Largest absolute coefficient difference against another polynomial.
    pub fn max_coeff_diff(&self, other: &Self) -> T {
        let mut d = T::zero();
        for (m, &c) in self.terms.iter() {
            d = d.max((c - other.coefficient(m)).abs());
        }
        for (m, &c) in other.terms.iter() {
            d = d.max((c - self.coefficient(m)).abs());
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type P = Polynomial<f64>;

    /// Parses nothing; builds small polynomials by hand for the oracle tests.
    fn m(exps: &[u32]) -> Monomial {
        Monomial::new(exps.to_vec())
    }

    #[test]
    fn add_cancels() {
        // (x² + 1) + (−x² + x) = x + 1
        let a = P::from_terms(2, [(m(&[2, 0]), 1.0), (m(&[0, 0]), 1.0)]);
        let b = P::from_terms(2, [(m(&[2, 0]), -1.0), (m(&[1, 0]), 1.0)]);
        let s = a.add(&b).unwrap();
        let want = P::from_terms(2, [(m(&[1, 0]), 1.0), (m(&[0, 0]), 1.0)]);
        assert_eq!(s, want);
    }

    #[test]
    fn add_identity_and_scalars() {
        let p = P::from_terms(2, [(m(&[1, 1]), -0.25), (m(&[0, 2]), 3.0)]);
        assert_eq!(p.add(&P::zero(2)).unwrap(), p);
        let a = P::from_terms(1, [(m(&[1]), 0.1)]);
        let b = P::from_terms(1, [(m(&[1]), 0.2)]);
        let s = a.add(&b).unwrap();
        let c = s.coefficient(&m(&[1]));
        assert!(((c - 0.3) / 0.3).abs() < 1e-15);
    }

    #[test]
    fn add_arity_mismatch_reports_both() {
        let a = P::zero(2);
        let b = P::zero(3);
        match a.add(&b) {
            Err(PolyError::ArityMismatch { left: 2, right: 3 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn mul_difference_of_squares() {
        let x = P::var(1, 0);
        let one = P::one(1);
        let a = x.add(&one).unwrap();
        let b = x.sub(&one).unwrap();
        let p = a.mul(&b).unwrap();
        let want = P::from_terms(1, [(m(&[2]), 1.0), (m(&[0]), -1.0)]);
        assert_eq!(p, want);
        assert_eq!(p.mul(&P::one(1)).unwrap(), p);
    }

    #[test]
    fn mul_limit_cycle_factor_expansion() {
        // x(1−x²−y²)(x+0.5) = −x⁴ − 0.5x³ − x²y² − 0.5xy² + x² + 0.5x
        let x = P::var(2, 0);
        let y = P::var(2, 1);
        let r2 = x.mul(&x).unwrap().add(&y.mul(&y).unwrap()).unwrap();
        let f = x
            .mul(&P::one(2).sub(&r2).unwrap())
            .unwrap()
            .mul(&x.add(&P::constant(2, 0.5)).unwrap())
            .unwrap();
        let want = P::from_terms(
            2,
            [
                (m(&[4, 0]), -1.0),
                (m(&[3, 0]), -0.5),
                (m(&[2, 2]), -1.0),
                (m(&[1, 2]), -0.5),
                (m(&[2, 0]), 1.0),
                (m(&[1, 0]), 0.5),
            ],
        );
        assert_eq!(f, want);
    }

    #[test]
    fn partial_power_rule() {
        // ∂/∂x (x²y) = 2xy; ∂/∂y (x²) = 0
        let p = P::from_terms(2, [(m(&[2, 1]), 1.0)]);
        assert_eq!(p.partial(0).unwrap(), P::from_terms(2, [(m(&[1, 1]), 2.0)]));
        let q = P::from_terms(2, [(m(&[2, 0]), 1.0)]);
        assert!(q.partial(1).unwrap().is_zero());
        assert!(matches!(
            p.partial(5),
            Err(PolyError::VarIndexOutOfRange { index: 5, arity: 2 })
        ));
    }

    #[test]
    fn evaluate_direct() {
        let p = P::from_terms(2, [(m(&[2, 0]), 1.0), (m(&[0, 2]), 1.0)]);
        assert_eq!(p.evaluate(&[3.0, 4.0]).unwrap(), 25.0);
        assert!(matches!(
            p.evaluate(&[1.0]),
            Err(PolyError::PointLengthMismatch { point_len: 1, arity: 2 })
        ));
    }

    #[test]
    fn prune_threshold_applies() {
        let mut p = P::zero(1);
        p.add_term(m(&[1]), 1.0);
        p.add_term(m(&[1]), -1.0 + 1e-16);
        assert!(p.is_zero());
    }

    #[test]
    fn graded_lex_ordering() {
        let mut ms = [m(&[0, 2]), m(&[1, 0]), m(&[0, 0]), m(&[2, 0]), m(&[1, 1])];
        ms.sort();
        let degrees: Vec<u32> = ms.iter().map(Monomial::total_degree).collect();
        assert_eq!(degrees, vec![0, 1, 2, 2, 2]);
        // Within degree 2: lexicographic on exponent vectors.
        assert_eq!(ms[2], m(&[0, 2]));
        assert_eq!(ms[3], m(&[1, 1]));
        assert_eq!(ms[4], m(&[2, 0]));
    }
}
