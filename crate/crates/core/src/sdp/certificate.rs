//! Concrete certificates: numeric metric, multipliers and Gram witnesses,
//! with the recomposition residual that ties them together.

use sha2::{Digest, Sha256};

use super::{SdpProblem, SdpSolution, SolveStatus};
use crate::linalg::Mat;
use crate::poly::{jacobian, orbital_derivative, Monomial, PolyMatrix, Polynomial};
use crate::problem::ProblemSpec;
use crate::scalar::{real, Scalar};
use crate::sos::ContractionProgram;

/// PSD Gram witness of one SOS constraint: the polynomial basisᵀ·Q·basis.
#[derive(Debug, Clone)]
pub struct GramWitness<T> {
    pub label: String,
    /// Index of the witnessed constraint in the originating program.
    pub constraint: usize,
    pub basis: Vec<Monomial>,
    pub matrix: Mat<T>,
}

impl<T: Scalar> GramWitness<T> {
    /// Recomposes the witnessed polynomial.
    pub fn polynomial(&self, arity: usize) -> Polynomial<T> {
        let mut p = Polynomial::zero(arity);
        let two = real::<T>(2.0);
        for a in 0..self.basis.len() {
            for b in a..self.basis.len() {
                let c = if a == b { self.matrix[(a, b)] } else { self.matrix[(a, b)] * two };
                p.add_term(self.basis[a].mul(&self.basis[b]), c);
            }
        }
        p
    }

    pub fn min_eigenvalue(&self) -> T {
        if self.basis.is_empty() {
            T::zero()
        } else {
            crate::linalg::min_eigenvalue(&self.matrix)
        }
    }
}

/// Provenance block: enough to reject a certificate offered for the wrong
/// problem or settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Provenance<T> {
    pub spec_hash: String,
    pub metric_degree: u32,
    pub delta: T,
    pub metric_upper: T,
    pub solver_tol: T,
    pub solver_iterations: usize,
}

/// A concrete contraction certificate.
#[derive(Debug, Clone)]
pub struct Certificate<T> {
    /// Certified margin: λ'_G ≤ −ε on the region.
    pub epsilon: T,
    /// State dimension n.
    pub dim: usize,
    /// State variable names.
    pub state_vars: Vec<String>,
    /// The synthesized metric, entries in ℝ[X].
    pub metric: PolyMatrix<T>,
    /// Equality multipliers in ℝ[X,W].
    pub p1: Polynomial<T>,
    pub p2: Polynomial<T>,
    /// Quadratic-module multipliers s_i ∈ Σ²[X,W], one per constraint.
    pub s: Vec<Polynomial<T>>,
    /// Multipliers of the metric bound constraints.
    pub sigma_lower: Vec<Polynomial<T>>,
    pub sigma_upper: Vec<Polynomial<T>>,
    /// Gram witnesses for every SOS constraint of the program.
    pub grams: Vec<GramWitness<T>>,
    /// Constraint index of the master expression.
    pub master_constraint: usize,
    /// Scaled max-norm mismatch between the master target and its Gram
    /// recomposition, frozen at extraction time.
    pub recomposition_residual: T,
    pub provenance: Provenance<T>,
}

impl<T: Scalar> Certificate<T> {
    pub fn joint_arity(&self) -> usize {
        2 * self.dim
    }

    /// Variable names of the joint ring: state names then w_<name>.
    pub fn joint_vars(&self) -> Vec<String> {
        let mut v = self.state_vars.clone();
        v.extend(self.state_vars.iter().map(|s| format!("w_{s}")));
        v
    }
}

/// SHA-256 of the canonical problem text.
pub fn spec_hash<T: Scalar>(spec: &ProblemSpec<T>) -> String {
    let mut h = Sha256::new();
    h.update(spec.canonical_text().as_bytes());
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

/// Errors from certificate extraction.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExtractError {
    #[error("solution status is {0}, not optimal")]
    NotOptimal(super::SolveStatus),
    #[error("{0}")]
    Inconsistent(String),
}

fn strip_w<T: Scalar>(p: &Polynomial<T>, n: usize) -> Polynomial<T> {
    let mut out = Polynomial::zero(n);
    for (m, &c) in p.terms() {
        debug_assert!(m.exponents()[n..].iter().all(|&e| e == 0));
        out.add_term(Monomial::new(m.exponents()[..n].to_vec()), c);
    }
    out
}

/// Substitutes the SDP solution into the contraction program's decision
/// polynomials and packages the Gram witnesses.
pub fn extract_certificate<T: Scalar>(
    prog: &ContractionProgram<T>,
    sdp: &SdpProblem<T>,
    sol: &SdpSolution<T>,
    spec: &ProblemSpec<T>,
) -> Result<Certificate<T>, ExtractError> {
    if sol.status != SolveStatus::Optimal {
        return Err(ExtractError::NotOptimal(sol.status));
    }
    let n = spec.dim();
    let values = &sol.y;
    if values.len() < prog.program.var_count {
        return Err(ExtractError::Inconsistent(format!(
            "solution has {} variables, program needs {}",
            values.len(),
            prog.program.var_count
        )));
    }

    let mut metric = PolyMatrix::zeros(n, n, n);
    for &(k, l, idx) in &prog.g_entries {
        let entry = strip_w(&prog.program.poly(idx).instantiate(values), n);
        *metric.entry_mut(k, l) = entry.clone();
        if k != l {
            *metric.entry_mut(l, k) = entry;
        }
    }

    let p1 = prog.program.poly(prog.p1).instantiate(values);
    let p2 = prog.program.poly(prog.p2).instantiate(values);
    let s: Vec<_> = prog
        .s
        .iter()
        .map(|&i| prog.program.poly(i).instantiate(values))
        .collect();
    let sigma_lower: Vec<_> = prog
        .sigma_lower
        .iter()
        .map(|&i| prog.program.poly(i).instantiate(values))
        .collect();
    let sigma_upper: Vec<_> = prog
        .sigma_upper
        .iter()
        .map(|&i| prog.program.poly(i).instantiate(values))
        .collect();

    let mut grams = Vec::new();
    for (b, m) in sdp.blocks.iter().zip(&sol.block_matrices) {
        if let Some(info) = &b.gram {
            grams.push(GramWitness {
                label: b.label.clone(),
                constraint: info.constraint,
                basis: info.basis.clone(),
                matrix: m.clone(),
            });
        }
    }

    let mut cert = Certificate {
        epsilon: values[prog.epsilon.0],
        dim: n,
        state_vars: spec.vars.clone(),
        metric,
        p1,
        p2,
        s,
        sigma_lower,
        sigma_upper,
        grams,
        master_constraint: prog.master_index,
        recomposition_residual: T::zero(),
        provenance: Provenance {
            spec_hash: spec_hash(spec),
            metric_degree: prog.metric_degree,
            delta: spec.options.delta,
            metric_upper: spec.options.metric_upper,
            solver_tol: spec.options.tol,
            solver_iterations: sol.iterations.len(),
        },
    };
    cert.recomposition_residual = residual(&cert, spec);
    Ok(cert)
}

/// The master expression rebuilt from the certificate's numeric pieces:
///
///   −ε − Wᵀ·sym(J·G − ½Ġ)·W − Σ sᵢqᵢ + p₁(|W|²−1) + p₂·Wᵀf
pub fn master_target<T: Scalar>(
    cert: &Certificate<T>,
    spec: &ProblemSpec<T>,
) -> Polynomial<T> {
    let n = cert.dim;
    let arity = 2 * n;
    let half = real::<T>(0.5);
    let jac = jacobian(&spec.field);
    let gdot = orbital_derivative(&cert.metric, &spec.field).expect("metric symmetric");

    let mut target = Polynomial::constant(arity, -cert.epsilon);

    // −Wᵀ sym(J·G − ½Ġ) W
    for k in 0..n {
        for l in k..n {
            // sym entry (k,l) of J·G − ½Ġ
            let mut m_kl = Polynomial::zero(n);
            let mut m_lk = Polynomial::zero(n);
            for mm in 0..n {
                m_kl = m_kl
                    .add(&jac.entry(k, mm).mul(cert.metric.entry(mm, l)).unwrap())
                    .unwrap();
                m_lk = m_lk
                    .add(&jac.entry(l, mm).mul(cert.metric.entry(mm, k)).unwrap())
                    .unwrap();
            }
            m_kl = m_kl.sub(&gdot.entry(k, l).scale(half)).unwrap();
            m_lk = m_lk.sub(&gdot.entry(l, k).scale(half)).unwrap();
            let sym = m_kl.add(&m_lk).unwrap().scale(half);
            let wkl = Monomial::var(arity, n + k).mul(&Monomial::var(arity, n + l));
            let factor = if k == l { -T::one() } else { -(T::one() + T::one()) };
            target = target
                .add(&sym.embed(arity, 0).scale(factor).mul_monomial(&wkl))
                .unwrap();
        }
    }

    // −Σ s_i q_i
    for (si, c) in cert.s.iter().zip(&spec.constraints) {
        target = target
            .sub(&si.mul(&c.poly.embed(arity, 0)).unwrap())
            .unwrap();
    }

    // p1·(|W|²−1)
    let mut wnorm = Polynomial::constant(arity, -T::one());
    for j in 0..n {
        let wj = Monomial::var(arity, n + j);
        wnorm.add_term(wj.mul(&wj), T::one());
    }
    target = target.add(&cert.p1.mul(&wnorm).unwrap()).unwrap();

    // p2·Wᵀf
    let mut wtf = Polynomial::zero(arity);
    for (j, f) in spec.field.components().iter().enumerate() {
        wtf = wtf
            .add(&f.embed(arity, 0).mul_monomial(&Monomial::var(arity, n + j)))
            .unwrap();
    }
    target = target.add(&cert.p2.mul(&wtf).unwrap()).unwrap();
    target
}

/// Recomposition residual: the master expression recomputed from the
/// stored pieces against the stored Gram matrices, as a max-norm
/// coefficient mismatch scaled by the largest target coefficient.
pub fn residual<T: Scalar>(cert: &Certificate<T>, spec: &ProblemSpec<T>) -> T {
    let arity = 2 * cert.dim;
    let target = master_target(cert, spec);
    let mut recomposed = Polynomial::zero(arity);
    for g in &cert.grams {
        if g.constraint == cert.master_constraint {
            recomposed = recomposed.add(&g.polynomial(arity)).unwrap();
        }
    }
    let scale = target.max_coeff_abs().max(T::one());
    target.max_coeff_diff(&recomposed) / scale
}
