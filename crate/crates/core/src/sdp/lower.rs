//! Lowering of SOS programs to semidefinite programs by Gram-matrix
//! coefficient matching.
//!
//! Per SOS-constrained expression: choose a Gram basis, add one PSD block
//! per basis class, and emit one linear equality per distinct monomial of
//! the union of the expression's support and the basis products. Every
//! expression here has even W-degree, so the Gram matrix can be taken
//! block-diagonal across W-parity (conjugation by W ↦ −W preserves both
//! the target and positive semidefiniteness); the basis therefore splits
//! into a W-even class (pure X monomials) and a W-odd class (X·w_j
//! monomials), each with its own X-degree cap read off the target support.

use std::collections::BTreeMap;

use super::{Block, EqRow, GramInfo, SdpProblem};
use crate::poly::{monomial_basis, Monomial, WBlockCap};
use crate::scalar::Scalar;
use crate::sos::{AffineExpr, SosProgram};

/// Structural lowering failures.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LoweringError {
    #[error("constraint `{constraint}`: empty Gram basis for a non-zero target ({detail})")]
    EmptyBasis { constraint: String, detail: String },
    #[error("constraint `{constraint}`: target has odd W-degree terms")]
    OddWDegree { constraint: String },
}

fn div_ceil(a: u32, b: u32) -> u32 {
    a.div_ceil(b)
}

/// Basis classes for one constraint.
fn gram_basis<T: Scalar>(
    prog: &SosProgram<T>,
    expr: &AffineExpr<T>,
    name: &str,
    newton_reduction: bool,
) -> Result<Vec<Vec<Monomial>>, LoweringError> {
    let arity = prog.arity;
    let x_count = prog.x_count;
    let w = prog.w_range();

    let mut classes: Vec<Vec<Monomial>> = Vec::new();
    if w.is_empty() {
        // Plain ring: half-degree basis.
        let deg = expr.total_degree();
        classes.push(monomial_basis(arity, div_ceil(deg, 2), None));
    } else {
        // Max X-degree of the W-even and W-quadratic parts of the target.
        let mut d0: Option<u32> = None;
        let mut d2: Option<u32> = None;
        for m in expr.support() {
            let wd = m.degree_in(w.clone());
            let xd = m.degree_in(0..x_count);
            match wd {
                0 => d0 = Some(d0.unwrap_or(0).max(xd)),
                2 => d2 = Some(d2.unwrap_or(0).max(xd)),
                _ => return Err(LoweringError::OddWDegree { constraint: name.into() }),
            }
        }
        if let Some(d0) = d0 {
            classes.push(monomial_basis(
                arity,
                div_ceil(d0, 2),
                Some(WBlockCap { start: x_count, cap: 0 }),
            ));
        }
        if let Some(d2) = d2 {
            let xs = monomial_basis(
                arity,
                div_ceil(d2, 2),
                Some(WBlockCap { start: x_count, cap: 0 }),
            );
            let mut odd = Vec::with_capacity(xs.len() * w.len());
            for j in w.clone() {
                let wj = Monomial::var(arity, j);
                for x in &xs {
                    odd.push(x.mul(&wj));
                }
            }
            odd.sort();
            classes.push(odd);
        }
    }

    if classes.iter().all(Vec::is_empty) && expr.num_terms() > 0 {
        return Err(LoweringError::EmptyBasis {
            constraint: name.into(),
            detail: format!("{} target monomials, no representable class", expr.num_terms()),
        });
    }

    if newton_reduction {
        let support: std::collections::BTreeSet<Monomial> = expr.support().cloned().collect();
        for class in &mut classes {
            reduce_class(class, &support);
        }
        if classes.iter().all(Vec::is_empty) && expr.num_terms() > 0 {
            return Err(LoweringError::EmptyBasis {
                constraint: name.into(),
                detail: "support reduction removed every basis monomial".into(),
            });
        }
    }
    Ok(classes)
}

/// Conservative support-based basis reduction: drop a basis monomial m when
/// its square 2m is outside the target support and no other basis pair
/// produces 2m — the PSD diagonal entry of m is then forced to zero, and
/// with it m's whole row. Iterates to a fixed point.
fn reduce_class(class: &mut Vec<Monomial>, support: &std::collections::BTreeSet<Monomial>) {
    loop {
        let mut product_count: BTreeMap<Monomial, usize> = BTreeMap::new();
        for (i, a) in class.iter().enumerate() {
            for b in &class[i..] {
                *product_count.entry(a.mul(b)).or_insert(0) += 1;
            }
        }
        let before = class.len();
        class.retain(|m| {
            let sq = m.mul(m);
            support.contains(&sq) || product_count.get(&sq).copied().unwrap_or(0) > 1
        });
        if class.len() == before {
            return;
        }
    }
}

/// Lowers an SOS program to a semidefinite program.
pub fn lower<T: Scalar>(
    prog: &SosProgram<T>,
    newton_reduction: bool,
) -> Result<SdpProblem<T>, LoweringError> {
    let mut sdp = SdpProblem::new(prog.var_count, prog.description.clone());
    if let Some(v) = prog.objective {
        sdp.objective[v.0] = T::one();
    }
    let mut var_count = prog.var_count;

    for (ci, c) in prog.constraints.iter().enumerate() {
        let classes = gram_basis(prog, &c.expr, &c.name, newton_reduction)?;

        // One equality per distinct monomial of the union of the target
        // support and the basis products.
        let mut rows: BTreeMap<Monomial, EqRow<T>> = BTreeMap::new();
        for m in c.expr.support() {
            rows.entry(m.clone()).or_insert_with(|| EqRow { coeffs: vec![], rhs: T::zero() });
        }

        for (cls_idx, basis) in classes.iter().enumerate() {
            if basis.is_empty() {
                continue;
            }
            let dim = basis.len();
            let mut block = Block {
                dim,
                label: if classes.len() > 1 {
                    format!("{} [{}]", c.name, if cls_idx == 0 { "w-even" } else { "w-odd" })
                } else {
                    c.name.clone()
                },
                const_entries: vec![],
                var_entries: vec![],
                gram: Some(GramInfo { constraint: ci, basis: basis.clone() }),
            };
            let two = T::one() + T::one();
            for a in 0..dim {
                for b in a..dim {
                    let k = var_count;
                    var_count += 1;
                    block.var_entries.push((a, b, k, T::one()));
                    let prod = basis[a].mul(&basis[b]);
                    let row = rows
                        .entry(prod)
                        .or_insert_with(|| EqRow { coeffs: vec![], rhs: T::zero() });
                    // p = Σ Q_aa·m_{2a} + 2·Σ_{a<b} Q_ab·m_{a+b}
                    row.coeffs.push((k, if a == b { T::one() } else { two }));
                }
            }
            sdp.blocks.push(block);
        }

        // Match affine coefficients: Σ gram-products − Σ lₖ·uₖ = constant.
        for (mono, mut row) in rows {
            let coeff = c.expr.coeff_at(&mono);
            for (v, coef) in coeff.terms {
                row.coeffs.push((v.0, -coef));
            }
            row.rhs = coeff.constant;
            sdp.equalities.push(row);
        }
    }

    sdp.var_count = var_count;
    sdp.objective.resize(var_count, T::zero());
    Ok(sdp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;
    use crate::sos::{PolyKind, SosProgram};

    /// Feasibility program: `target + Σ decision·monomial ∈ Σ²`.
    fn sos_test_program(target: Polynomial<f64>) -> SosProgram<f64> {
        let mut prog = SosProgram::new(target.arity(), target.arity(), "sos test".into());
        let expr = crate::sos::AffineExpr::from_poly(&target);
        prog.add_constraint("target", expr);
        prog
    }

    #[test]
    fn perfect_square_has_basis_one_x() {
        // x² + 2x + 1 over basis {1, x}: equalities force Q = [[1,1],[1,1]].
        let p = Polynomial::from_terms(
            1,
            [
                (crate::poly::Monomial::new(vec![2]), 1.0),
                (crate::poly::Monomial::new(vec![1]), 2.0),
                (crate::poly::Monomial::new(vec![0]), 1.0),
            ],
        );
        let sdp = lower(&sos_test_program(p), false).unwrap();
        assert_eq!(sdp.blocks.len(), 1);
        assert_eq!(sdp.blocks[0].dim, 2);
        // Three distinct monomials: 1, x, x².
        assert_eq!(sdp.equalities.len(), 3);
    }

    #[test]
    fn equality_count_is_support_union() {
        let mut prog = SosProgram::new(1, 1, "t".into());
        let dp = prog.add_decision_poly(
            "h",
            PolyKind::Free,
            vec![
                crate::poly::Monomial::new(vec![0]),
                crate::poly::Monomial::new(vec![1]),
            ],
        );
        // Constraint: x⁴ + h(x) ∈ Σ²; basis {1, x, x²} products give
        // degrees 0..4 → 5 equality rows.
        let mut expr =
            crate::sos::AffineExpr::from_poly(&Polynomial::from_terms(
                1,
                [(crate::poly::Monomial::new(vec![4]), 1.0)],
            ));
        expr.add_assign(&crate::sos::AffineExpr::from_decision(prog.poly(dp)), 1.0);
        prog.add_constraint("c", expr);
        let sdp = lower(&prog, false).unwrap();
        assert_eq!(sdp.equalities.len(), 5);
        // Gram variables: 3×4/2 = 6 on top of the 2 decision variables.
        assert_eq!(sdp.var_count, 2 + 6);
    }

    #[test]
    fn parity_split_produces_two_blocks() {
        // Joint ring (x | w), target with W-degrees 0 and 2.
        let mut prog = SosProgram::new(2, 1, "t".into());
        let w2 = crate::poly::Monomial::new(vec![0, 2]);
        let x2 = crate::poly::Monomial::new(vec![2, 0]);
        let unit = crate::poly::Monomial::new(vec![0, 0]);
        let target =
            Polynomial::from_terms(2, [(w2, 1.0), (x2.clone(), 1.0), (unit, 1.0)]);
        prog.add_constraint("t", crate::sos::AffineExpr::from_poly(&target));
        let sdp = lower(&prog, false).unwrap();
        assert_eq!(sdp.blocks.len(), 2);
        let dims: Vec<usize> = sdp.blocks.iter().map(|b| b.dim).collect();
        // W-even class {1, x}; W-odd class {w}.
        assert_eq!(dims, vec![2, 1]);
    }

    #[test]
    fn support_reduction_drops_unreachable_monomials() {
        // x⁴ + 1: the classic reduction drops x² never... here basis {1,x,x²};
        // x appears in no support square and only pairs with itself and
        // across (1·x² covers x²·1); square of x is x², not in support, and
        // 1·x² also produces x² (count 2) so x is kept; nothing drops.
        let p1 = Polynomial::from_terms(
            1,
            [
                (crate::poly::Monomial::new(vec![4]), 1.0),
                (crate::poly::Monomial::new(vec![0]), 1.0),
            ],
        );
        let sdp = lower(&sos_test_program(p1.clone()), true).unwrap();
        assert_eq!(sdp.blocks[0].dim, 3);
        // x⁶ + 1 in two variables: monomials with y never help; the y-pure
        // basis members get dropped.
        let p2 = Polynomial::from_terms(
            2,
            [
                (crate::poly::Monomial::new(vec![6, 0]), 1.0),
                (crate::poly::Monomial::new(vec![0, 0]), 1.0),
            ],
        );
        let full = lower(&sos_test_program(p2.clone()), false).unwrap();
        let reduced = lower(&sos_test_program(p2), true).unwrap();
        assert!(reduced.blocks[0].dim < full.blocks[0].dim);
    }
}
