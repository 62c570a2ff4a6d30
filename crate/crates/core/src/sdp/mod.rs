//! Standard-form semidefinite programs, the lowering from SOS programs,
//! the embedded primal-dual interior-point solver, and certificate
//! extraction.
//!
//! A problem holds m scalar variables y, an objective `maximize bᵀy`,
//! affine PSD block constraints `C + Σ_k y_k·A_k ⪰ 0`, and free linear
//! equalities `E·y = d`. The lowering produces blocks in Gram form (C = 0,
//! every A_k a distinct coordinate selector), which the solver detects and
//! treats as primal matrix variables; hand-built blocks with general
//! affine structure are handled through slack matrices.

mod certificate;
mod lower;
mod solve;

pub use certificate::{
    extract_certificate, master_target, residual, spec_hash, Certificate, ExtractError,
    GramWitness, Provenance,
};
pub use lower::{lower, LoweringError};
pub use solve::solve;
pub(crate) use solve::solve_with_iters;

use crate::linalg::Mat;
use crate::poly::Monomial;
use crate::scalar::Scalar;

/// Links a Gram-form block back to the SOS constraint it represents.
#[derive(Debug, Clone)]
pub struct GramInfo {
    /// Index into `SosProgram::constraints`.
    pub constraint: usize,
    /// Gram basis monomials; the block witnesses `basisᵀ·Q·basis`.
    pub basis: Vec<Monomial>,
}

/// One PSD block constraint `C + Σ_k y_k·A_k ⪰ 0`. Entries address the
/// upper triangle (row ≤ col) and extend symmetrically.
#[derive(Debug, Clone)]
pub struct Block<T> {
    pub dim: usize,
    pub label: String,
    /// Nonzero entries of C.
    pub const_entries: Vec<(usize, usize, T)>,
    /// Entries of the A_k: (row, col, variable, coefficient).
    pub var_entries: Vec<(usize, usize, usize, T)>,
    /// Present when the block is the Gram matrix of an SOS constraint.
    pub gram: Option<GramInfo>,
}

/// One linear equality Σ coef·y = rhs.
#[derive(Debug, Clone)]
pub struct EqRow<T> {
    pub coeffs: Vec<(usize, T)>,
    pub rhs: T,
}

/// A standard-form semidefinite program: maximize bᵀy subject to the PSD
/// block constraints and linear equalities.
#[derive(Debug, Clone)]
pub struct SdpProblem<T> {
    pub var_count: usize,
    /// b: maximize bᵀy. All-zero for feasibility problems.
    pub objective: Vec<T>,
    pub blocks: Vec<Block<T>>,
    pub equalities: Vec<EqRow<T>>,
    pub description: String,
}

impl<T: Scalar> SdpProblem<T> {
    pub fn new(var_count: usize, description: impl Into<String>) -> Self {
        SdpProblem {
            var_count,
            objective: vec![T::zero(); var_count],
            blocks: Vec::new(),
            equalities: Vec::new(),
            description: description.into(),
        }
    }

    /// Value of a block at a given y, as a dense symmetric matrix.
    pub fn block_value(&self, block: usize, y: &[T]) -> Mat<T> {
        let b = &self.blocks[block];
        let mut m = Mat::zeros(b.dim, b.dim);
        for &(r, c, v) in &b.const_entries {
            m[(r, c)] = m[(r, c)] + v;
            if r != c {
                m[(c, r)] = m[(c, r)] + v;
            }
        }
        for &(r, c, k, coef) in &b.var_entries {
            let v = coef * y[k];
            m[(r, c)] = m[(r, c)] + v;
            if r != c {
                m[(c, r)] = m[(c, r)] + v;
            }
        }
        m
    }

    /// Plain-text dump for cross-checking against external solvers:
    /// a header line `sdp <vars> <blocks> <equalities>`, the objective,
    /// then per block its dimension, the dense constant matrix row-major,
    /// and one `entry r c var coef` line per variable entry; finally one
    /// `eq rhs [var coef]*` line per equality. All numbers carry 17
    /// significant digits.
    pub fn debug_dump(&self) -> String {
        use std::fmt::Write;
        let mut s = String::new();
        writeln!(
            s,
            "sdp {} {} {}",
            self.var_count,
            self.blocks.len(),
            self.equalities.len()
        )
        .unwrap();
        write!(s, "objective").unwrap();
        for v in &self.objective {
            write!(s, " {v:.16e}").unwrap();
        }
        writeln!(s).unwrap();
        for (i, b) in self.blocks.iter().enumerate() {
            writeln!(s, "block {i} dim {} label {}", b.dim, b.label).unwrap();
            let zero = T::zero();
            let mut c = vec![zero; b.dim * b.dim];
            for &(r, cc, v) in &b.const_entries {
                c[r * b.dim + cc] = c[r * b.dim + cc] + v;
                if r != cc {
                    c[cc * b.dim + r] = c[cc * b.dim + r] + v;
                }
            }
            for row in 0..b.dim {
                write!(s, "const").unwrap();
                for col in 0..b.dim {
                    write!(s, " {:.16e}", c[row * b.dim + col]).unwrap();
                }
                writeln!(s).unwrap();
            }
            for &(r, cc, k, coef) in &b.var_entries {
                writeln!(s, "entry {r} {cc} {k} {coef:.16e}").unwrap();
            }
        }
        for e in &self.equalities {
            write!(s, "eq {:.16e}", e.rhs).unwrap();
            for &(k, coef) in &e.coeffs {
                write!(s, " {k} {coef:.16e}").unwrap();
            }
            writeln!(s).unwrap();
        }
        s
    }
}

/// Termination status of the interior-point method.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Stalled,
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::Stalled => "stalled",
        };
        f.write_str(s)
    }
}

/// Per-iteration log entry, in the maximize convention of [`SdpProblem`].
#[derive(Debug, Clone, Copy)]
pub struct IterStats<T> {
    pub mu: T,
    pub primal_objective: T,
    pub dual_objective: T,
    /// Complementarity Σ⟨X_j, S_j⟩ ≥ 0.
    pub gap: T,
    pub primal_residual: T,
    pub dual_residual: T,
    /// |zᵀr_p| + |Σ⟨R_d,X⟩| + |r_fᵀu|: the exact slack in the weak-duality
    /// identity while iterates are still infeasible.
    pub infeasibility_slack: T,
    pub step_primal: T,
    pub step_dual: T,
}

/// Solution of a semidefinite program.
#[derive(Debug, Clone)]
pub struct SdpSolution<T> {
    pub status: SolveStatus,
    /// Values of all scalar variables.
    pub y: Vec<T>,
    /// Primal PSD matrix per block (for Gram blocks: the Gram matrix).
    pub block_matrices: Vec<Mat<T>>,
    /// bᵀy.
    pub objective: T,
    /// Final relative duality gap.
    pub gap: T,
    pub iterations: Vec<IterStats<T>>,
    pub message: String,
}
