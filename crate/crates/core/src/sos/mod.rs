//! Symbolic sum-of-squares programs.
//!
//! A program is a set of decision polynomials (named template monomials,
//! one scalar decision variable per monomial) together with constrained
//! expressions whose coefficients are affine in the decision variables and
//! which must admit a positive-semidefinite Gram representation. Everything
//! lives in the joint ring ℝ[X,W] with the X block first and the W block
//! (when present) last.

mod build;

pub use build::{
    build_contraction_program, build_invariance_program, build_rate_program, putinar_augment,
    ContractionProgram, InvarianceProgram, MasterParts, RateProgram,
};

use std::collections::BTreeMap;

use crate::poly::{Monomial, Polynomial, PRUNE_THRESHOLD};
use crate::scalar::{real, Scalar};

/// Index of a scalar decision variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

/// How a decision polynomial is constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolyKind {
    /// Unconstrained coefficients.
    Free,
    /// Must be a sum of squares (a membership constraint is attached).
    Sos,
    /// Entry of a symmetric matrix whose definiteness is enforced through a
    /// scalarized wᵀ·M·w constraint elsewhere in the program.
    SosMatrixScalarized,
}

/// A polynomial with unknown coefficients: one scalar decision variable per
/// template monomial.
#[derive(Debug, Clone)]
pub struct DecisionPoly {
    pub name: String,
    pub kind: PolyKind,
    pub arity: usize,
    /// Allowed support, ascending graded-lex.
    pub template: Vec<Monomial>,
    /// Decision variable per template monomial (parallel to `template`).
    pub vars: Vec<VarId>,
}

impl DecisionPoly {
    /// Substitutes decision values, producing a numeric polynomial.
    pub fn instantiate<T: Scalar>(&self, values: &[T]) -> Polynomial<T> {
        let mut p = Polynomial::zero(self.arity);
        for (m, &VarId(v)) in self.template.iter().zip(&self.vars) {
            p.add_term(m.clone(), values[v]);
        }
        p
    }
}

/// An affine function of the decision variables: `constant + Σ coef·var`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineCoeff<T> {
    pub constant: T,
    /// Sorted by variable id, no duplicates, no near-zero coefficients.
    pub terms: Vec<(VarId, T)>,
}

impl<T: Scalar> AffineCoeff<T> {
    pub fn constant(c: T) -> Self {
        AffineCoeff { constant: c, terms: Vec::new() }
    }

    pub fn variable(v: VarId, coef: T) -> Self {
        AffineCoeff { constant: T::zero(), terms: vec![(v, coef)] }
    }

    pub fn is_zero(&self) -> bool {
        self.constant == T::zero() && self.terms.is_empty()
    }

    /// True when no decision variable appears.
    pub fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = AffineCoeff {
            constant: self.constant * s,
            terms: self.terms.iter().map(|&(v, c)| (v, c * s)).collect(),
        };
        out.prune();
        out
    }

    pub fn add_assign(&mut self, other: &Self, scale: T) {
        self.constant = self.constant + other.constant * scale;
        for &(v, c) in &other.terms {
            match self.terms.binary_search_by_key(&v, |&(vv, _)| vv) {
                Ok(i) => self.terms[i].1 = self.terms[i].1 + c * scale,
                Err(i) => self.terms.insert(i, (v, c * scale)),
            }
        }
        self.prune();
    }

    fn prune(&mut self) {
        let threshold = real::<T>(PRUNE_THRESHOLD);
        self.terms.retain(|&(_, c)| c.abs() >= threshold);
        if self.constant.abs() < threshold {
            self.constant = T::zero();
        }
    }

    /// Evaluates the affine form at a decision-variable assignment.
    pub fn eval(&self, values: &[T]) -> T {
        self.terms
            .iter()
            .fold(self.constant, |acc, &(VarId(v), c)| acc + c * values[v])
    }
}

/// Polynomial whose coefficients are affine in the decision variables.
#[derive(Debug, Clone)]
pub struct AffineExpr<T> {
    arity: usize,
    coeffs: BTreeMap<Monomial, AffineCoeff<T>>,
}

impl<T: Scalar> AffineExpr<T> {
    pub fn zero(arity: usize) -> Self {
        AffineExpr { arity, coeffs: BTreeMap::new() }
    }

    pub fn from_poly(p: &Polynomial<T>) -> Self {
        let mut e = Self::zero(p.arity());
        for (m, &c) in p.terms() {
            e.coeffs.insert(m.clone(), AffineCoeff::constant(c));
        }
        e
    }

    pub fn from_decision(dp: &DecisionPoly) -> Self {
        let mut e = Self::zero(dp.arity);
        for (m, &v) in dp.template.iter().zip(&dp.vars) {
            e.coeffs.insert(m.clone(), AffineCoeff::variable(v, T::one()));
        }
        e
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn coeffs(&self) -> impl Iterator<Item = (&Monomial, &AffineCoeff<T>)> {
        self.coeffs.iter()
    }

    pub fn support(&self) -> impl Iterator<Item = &Monomial> {
        self.coeffs.keys()
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff_at(&self, m: &Monomial) -> AffineCoeff<T> {
        self.coeffs
            .get(m)
            .cloned()
            .unwrap_or_else(|| AffineCoeff::constant(T::zero()))
    }

    fn insert(&mut self, m: Monomial, c: AffineCoeff<T>) {
        if c.is_zero() {
            return;
        }
        match self.coeffs.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                e.get_mut().add_assign(&c, T::one());
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn add_assign(&mut self, other: &Self, scale: T) {
        debug_assert_eq!(self.arity, other.arity);
        for (m, c) in &other.coeffs {
            self.insert(m.clone(), c.scale(scale));
        }
        self.coeffs.retain(|_, c| !c.is_zero());
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other, T::one());
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_assign(other, -T::one());
        out
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = Self::zero(self.arity);
        for (m, c) in &self.coeffs {
            out.insert(m.clone(), c.scale(s));
        }
        out
    }

    /// Product with a numeric polynomial (keeps coefficients affine).
    pub fn mul_poly(&self, p: &Polynomial<T>) -> Self {
        debug_assert_eq!(self.arity, p.arity());
        let mut out = Self::zero(self.arity);
        for (ma, ca) in &self.coeffs {
            for (mb, &cb) in p.terms() {
                out.insert(ma.mul(mb), ca.scale(cb));
            }
        }
        out
    }

    pub fn mul_monomial(&self, m: &Monomial) -> Self {
        let mut out = Self::zero(self.arity);
        for (ma, ca) in &self.coeffs {
            out.insert(ma.mul(m), ca.clone());
        }
        out
    }

    /// Formal partial derivative.
    pub fn partial(&self, var_index: usize) -> Self {
        let mut out = Self::zero(self.arity);
        for (m, c) in &self.coeffs {
            let e = m.exponent(var_index);
            if e == 0 {
                continue;
            }
            let mut exps = m.exponents().to_vec();
            exps[var_index] = e - 1;
            out.insert(Monomial::new(exps), c.scale(real::<T>(e as f64)));
        }
        out
    }

    /// Substitutes decision values, producing a numeric polynomial.
    pub fn instantiate(&self, values: &[T]) -> Polynomial<T> {
        let mut p = Polynomial::zero(self.arity);
        for (m, c) in &self.coeffs {
            p.add_term(m.clone(), c.eval(values));
        }
        p
    }

    /// Evaluates at a point after substituting decision values.
    pub fn evaluate(&self, values: &[T], point: &[T]) -> T {
        debug_assert_eq!(point.len(), self.arity);
        let mut acc = T::zero();
        for (m, c) in &self.coeffs {
            acc = acc + c.eval(values) * m.evaluate(point);
        }
        acc
    }

    /// Maximum degree over an index range across the support.
    pub fn degree_in(&self, range: std::ops::Range<usize>) -> u32 {
        self.coeffs
            .keys()
            .map(|m| m.degree_in(range.clone()))
            .max()
            .unwrap_or(0)
    }

    pub fn total_degree(&self) -> u32 {
        self.coeffs
            .keys()
            .map(Monomial::total_degree)
            .max()
            .unwrap_or(0)
    }
}

/// An expression required to be a sum of squares.
#[derive(Debug, Clone)]
pub struct SosConstraint<T> {
    pub name: String,
    pub expr: AffineExpr<T>,
}

/// Errors from program construction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SosError {
    #[error("degree bookkeeping failure in `{constraint}`: monomial {monomial:?} has X-degree {x_degree} (cap {x_cap}) and W-degree {w_degree} (cap {w_cap})")]
    DegreeOverflow {
        constraint: String,
        monomial: Vec<u32>,
        x_degree: u32,
        x_cap: u32,
        w_degree: u32,
        w_cap: u32,
    },
    #[error("{0}")]
    Invalid(String),
}

/// A symbolic SOS feasibility/optimization problem.
#[derive(Debug, Clone)]
pub struct SosProgram<T> {
    /// Joint-ring arity (2n with a W block, n without).
    pub arity: usize,
    /// Size of the X block; the W block is `x_count..arity`.
    pub x_count: usize,
    pub decision_polys: Vec<DecisionPoly>,
    pub constraints: Vec<SosConstraint<T>>,
    /// Variable to maximize, when this is an optimization problem.
    pub objective: Option<VarId>,
    pub var_count: usize,
    /// Human-readable provenance (problem name, degrees).
    pub description: String,
}

impl<T: Scalar> SosProgram<T> {
    pub fn new(arity: usize, x_count: usize, description: String) -> Self {
        SosProgram {
            arity,
            x_count,
            decision_polys: Vec::new(),
            constraints: Vec::new(),
            objective: None,
            var_count: 0,
            description,
        }
    }

    pub fn w_range(&self) -> std::ops::Range<usize> {
        self.x_count..self.arity
    }

    /// Allocates a decision polynomial with the given template; for
    /// [`PolyKind::Sos`] the membership constraint is appended as well.
    pub fn add_decision_poly(
        &mut self,
        name: impl Into<String>,
        kind: PolyKind,
        template: Vec<Monomial>,
    ) -> usize {
        let name = name.into();
        let vars: Vec<VarId> = (0..template.len())
            .map(|i| VarId(self.var_count + i))
            .collect();
        self.var_count += template.len();
        let dp = DecisionPoly { name: name.clone(), kind, arity: self.arity, template, vars };
        if kind == PolyKind::Sos {
            let expr = AffineExpr::from_decision(&dp);
            self.constraints.push(SosConstraint { name: format!("{name} sos"), expr });
        }
        self.decision_polys.push(dp);
        self.decision_polys.len() - 1
    }

    /// Allocates a single scalar decision variable (a constant polynomial).
    pub fn add_scalar(&mut self, name: impl Into<String>) -> VarId {
        let idx = self.add_decision_poly(name, PolyKind::Free, vec![Monomial::unit(self.arity)]);
        self.decision_polys[idx].vars[0]
    }

    pub fn add_constraint(&mut self, name: impl Into<String>, expr: AffineExpr<T>) {
        self.constraints.push(SosConstraint { name: name.into(), expr });
    }

    pub fn poly(&self, index: usize) -> &DecisionPoly {
        &self.decision_polys[index]
    }

    /// Checks that every term of every constrained expression respects the
    /// stated degree caps.
    pub fn check_degrees(&self, x_cap: u32, w_cap: u32) -> Result<(), SosError> {
        for c in &self.constraints {
            for m in c.expr.support() {
                let xd = m.degree_in(0..self.x_count);
                let wd = m.degree_in(self.w_range());
                if xd > x_cap || wd > w_cap {
                    return Err(SosError::DegreeOverflow {
                        constraint: c.name.clone(),
                        monomial: m.exponents().to_vec(),
                        x_degree: xd,
                        x_cap,
                        w_degree: wd,
                        w_cap,
                    });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_coeff_arithmetic() {
        let mut a = AffineCoeff::variable(VarId(3), 2.0);
        a.add_assign(&AffineCoeff::constant(1.0), 0.5);
        a.add_assign(&AffineCoeff::variable(VarId(1), 4.0), 1.0);
        assert_eq!(a.constant, 0.5);
        assert_eq!(a.terms, vec![(VarId(1), 4.0), (VarId(3), 2.0)]);
        assert_eq!(a.eval(&[0.0, 1.0, 0.0, 2.0]), 0.5 + 4.0 + 4.0);
    }

    #[test]
    fn expr_mul_poly_keeps_affinity() {
        // (v0·x + 1)·(x − 2) = v0·x² + (1−2v0)·x − 2
        let dp = DecisionPoly {
            name: "c".into(),
            kind: PolyKind::Free,
            arity: 1,
            template: vec![Monomial::var(1, 0)],
            vars: vec![VarId(0)],
        };
        let mut e = AffineExpr::from_decision(&dp);
        e.add_assign(&AffineExpr::from_poly(&Polynomial::one(1)), 1.0);
        let p = Polynomial::from_terms(1, [(Monomial::var(1, 0), 1.0), (Monomial::unit(1), -2.0)]);
        let prod = e.mul_poly(&p);
        let inst = prod.instantiate(&[3.0]);
        // 3x² − 5x − 2
        assert_eq!(inst.coefficient(&Monomial::new(vec![2])), 3.0);
        assert_eq!(inst.coefficient(&Monomial::new(vec![1])), -5.0);
        assert_eq!(inst.coefficient(&Monomial::new(vec![0])), -2.0);
    }

    #[test]
    fn expr_partial_tracks_vars() {
        // ∂/∂x (v0·x²) = 2·v0·x
        let dp = DecisionPoly {
            name: "c".into(),
            kind: PolyKind::Free,
            arity: 1,
            template: vec![Monomial::new(vec![2])],
            vars: vec![VarId(0)],
        };
        let e = AffineExpr::<f64>::from_decision(&dp);
        let d = e.partial(0);
        let c = d.coeff_at(&Monomial::new(vec![1]));
        assert_eq!(c.terms, vec![(VarId(0), 2.0)]);
    }

    #[test]
    fn coefficients_are_affine() {
        // Midpoint test on a product expression: c(½(a+b)) == ½(c(a)+c(b)).
        let dp = DecisionPoly {
            name: "c".into(),
            kind: PolyKind::Free,
            arity: 2,
            template: vec![Monomial::unit(2), Monomial::var(2, 0), Monomial::var(2, 1)],
            vars: vec![VarId(0), VarId(1), VarId(2)],
        };
        let q = Polynomial::from_terms(
            2,
            [(Monomial::new(vec![1, 1]), 2.0), (Monomial::unit(2), -1.0)],
        );
        let expr = AffineExpr::from_decision(&dp).mul_poly(&q);
        let a = [0.3, -1.2, 2.0];
        let b = [1.0, 0.5, -0.25];
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        for (m, _) in expr.coeffs() {
            let ca = expr.coeff_at(m).eval(&a);
            let cb = expr.coeff_at(m).eval(&b);
            let cm = expr.coeff_at(m).eval(&mid);
            assert!((cm - 0.5 * (ca + cb)).abs() < 1e-10);
        }
    }
}
