//! Monomial basis enumeration for Gram matrices.

use super::Monomial;

/// Degree cap for a trailing block of indeterminates. In the joint ring
/// ℝ[X,W] the W block occupies indices `start..arity`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WBlockCap {
    /// First index of the W block.
    pub start: usize,
    /// Maximum total degree within the block.
    pub cap: u32,
}

/// All monomials of total degree ≤ `max_degree` in `arity` indeterminates,
/// optionally restricted to W-block degree ≤ `w_block.cap`, in ascending
/// graded-lexicographic order. Deterministic.
pub fn monomial_basis(arity: usize, max_degree: u32, w_block: Option<WBlockCap>) -> Vec<Monomial> {
    let mut out = Vec::new();
    let mut exps = vec![0u32; arity];
    enumerate(&mut out, &mut exps, 0, max_degree, arity);
    if let Some(wb) = w_block {
        out.retain(|m| m.degree_in(wb.start..arity) <= wb.cap);
    }
    out.sort();
    out
}

fn enumerate(out: &mut Vec<Monomial>, exps: &mut Vec<u32>, index: usize, remaining: u32, arity: usize) {
    if index == arity {
        out.push(Monomial::new(exps.clone()));
        return;
    }
    for e in 0..=remaining {
        exps[index] = e;
        enumerate(out, exps, index + 1, remaining - e, arity);
    }
    exps[index] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_match_binomials() {
        // C(2+2, 2) = 6 and C(3+6, 6) = 84.
        assert_eq!(monomial_basis(2, 2, None).len(), 6);
        assert_eq!(monomial_basis(3, 6, None).len(), 84);
    }

    #[test]
    fn w_cap_filters_quadratic_w_terms() {
        // (x, y | w1, w2), degree ≤ 2, W-degree ≤ 1: of the C(6,2) = 15
        // monomials, w1², w1w2, w2² are excluded.
        let basis = monomial_basis(4, 2, Some(WBlockCap { start: 2, cap: 1 }));
        assert_eq!(basis.len(), 12);
        for m in &basis {
            assert!(m.degree_in(2..4) <= 1);
        }
    }

    #[test]
    fn ordering_is_graded_lex_ascending() {
        let basis = monomial_basis(2, 2, None);
        let mut sorted = basis.clone();
        sorted.sort();
        assert_eq!(basis, sorted);
        assert!(basis[0].is_unit());
        assert_eq!(basis.last().unwrap().exponents(), &[2, 0]);
    }
}
