//! Embedded primal-dual interior-point solver.
//!
//! Path-following with the HKM scaling direction and a Mehrotra
//! predictor-corrector step. The solver converts the functional form
//! (`maximize bᵀy, C + Σ y_k A_k ⪰ 0, E y = d`) into a primal standard
//! form whose matrix variables are the PSD blocks themselves:
//!
//! ```text
//! min Σ⟨C_j,X_j⟩ + c_uᵀu   s.t.  ⟨B_r, X_j(r)⟩ + F_r·u = d_r,  X_j ⪰ 0
//! ```
//!
//! Gram-form blocks (every entry a distinct coordinate-selector variable)
//! become matrix variables directly; general blocks get a slack matrix and
//! per-entry equality rows. Each equality row touches at most one block, so
//! the Schur complement is block-diagonal over the PSD blocks plus a dense
//! coupling through the free variables — the Newton system is solved with
//! per-block Cholesky factors and one dense quasi-definite saddle system
//! for the free variables.
//!
//! Everything is dense, single-threaded and deterministic: identical
//! problems produce bitwise identical solutions.

use crate::linalg::{cholesky, cholesky_solve, solve_lower, sym_eigen, Mat};
use crate::scalar::{real, Scalar};

use super::{IterStats, SdpProblem, SdpSolution, SolveStatus};

/// Fraction of the step to the PSD boundary.
const STEP_FRACTION: f64 = 0.98;

#[derive(Debug, Clone, Copy, PartialEq)]
enum YKind {
    Free(usize),
    Gram { block: usize, row: usize, col: usize },
}

struct IRow<T> {
    block: Option<usize>,
    /// Ordered symmetric entries (p, q, w): row value contains w·X[p,q].
    pat: Vec<(u32, u32, T)>,
    /// Upper-triangle form of the same pattern, for projection.
    pat_upper: Vec<(usize, usize, T)>,
    u: Vec<(usize, T)>,
    rhs: T,
}

struct Internal<T> {
    dims: Vec<usize>,
    costs: Vec<Mat<T>>,
    c_u: Vec<T>,
    rows: Vec<IRow<T>>,
    rows_of_block: Vec<Vec<usize>>,
    pure_rows: Vec<usize>,
    /// Per block: sorted u-column indices appearing in its rows.
    block_cols: Vec<Vec<usize>>,
    /// Per block: dense F_j (rows × block_cols).
    block_f: Vec<Mat<T>>,
    y_kind: Vec<YKind>,
    p: usize,
}

fn convert<T: Scalar>(prob: &SdpProblem<T>) -> Result<Internal<T>, String> {
    let nb = prob.blocks.len();

    // Appearance count of every variable across blocks.
    let mut appearances = vec![0usize; prob.var_count];
    for b in &prob.blocks {
        for &(_, _, k, _) in &b.var_entries {
            appearances[k] += 1;
        }
    }

    // A block is in Gram form when it has no constant part and its upper
    // triangle is a bijection onto distinct variables with coefficient one,
    // none of which appear anywhere else.
    let mut is_gram = vec![false; nb];
    for (j, b) in prob.blocks.iter().enumerate() {
        if b.const_entries.iter().any(|&(_, _, v)| v != T::zero()) {
            continue;
        }
        let need = b.dim * (b.dim + 1) / 2;
        if b.var_entries.len() != need {
            continue;
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut ok = true;
        for &(r, c, k, coef) in &b.var_entries {
            if r > c || coef != T::one() || appearances[k] != 1 || !seen.insert((r, c)) {
                ok = false;
                break;
            }
        }
        is_gram[j] = ok && seen.len() == need;
    }

    // Variable classification, demoting Gram blocks whose variables are
    // shared across blocks by an equality row that already references
    // another Gram block.
    loop {
        let mut var_block = vec![None; prob.var_count];
        for (j, b) in prob.blocks.iter().enumerate() {
            if is_gram[j] {
                for &(_, _, k, _) in &b.var_entries {
                    var_block[k] = Some(j);
                }
            }
        }
        let mut demote = None;
        'rows: for e in &prob.equalities {
            let mut seen: Option<usize> = None;
            for &(k, _) in &e.coeffs {
                if let Some(j) = var_block[k] {
                    match seen {
                        None => seen = Some(j),
                        Some(prev) if prev != j => {
                            demote = Some(j);
                            break 'rows;
                        }
                        _ => {}
                    }
                }
            }
        }
        match demote {
            Some(j) => is_gram[j] = false,
            None => break,
        }
    }

    let mut y_kind = vec![YKind::Free(usize::MAX); prob.var_count];
    for (j, b) in prob.blocks.iter().enumerate() {
        if is_gram[j] {
            for &(r, c, k, _) in &b.var_entries {
                y_kind[k] = YKind::Gram { block: j, row: r, col: c };
            }
        }
    }
    let mut p = 0usize;
    for k in 0..prob.var_count {
        if matches!(y_kind[k], YKind::Free(_)) {
            y_kind[k] = YKind::Free(p);
            p += 1;
        }
    }

    // Costs: minimize −bᵀy.
    let mut costs: Vec<Mat<T>> = prob.blocks.iter().map(|b| Mat::zeros(b.dim, b.dim)).collect();
    let mut c_u = vec![T::zero(); p];
    let half = real::<T>(0.5);
    for k in 0..prob.var_count {
        let w = prob.objective[k];
        if w == T::zero() {
            continue;
        }
        match y_kind[k] {
            YKind::Free(ui) => c_u[ui] = -w,
            YKind::Gram { block, row, col } => {
                if row == col {
                    costs[block][(row, col)] = costs[block][(row, col)] - w;
                } else {
                    costs[block][(row, col)] = costs[block][(row, col)] - w * half;
                    costs[block][(col, row)] = costs[block][(col, row)] - w * half;
                }
            }
        }
    }

    let mut rows: Vec<IRow<T>> = Vec::new();

    // Equalities.
    for e in &prob.equalities {
        let mut block = None;
        let mut pat_upper: Vec<(usize, usize, T)> = Vec::new();
        let mut u: Vec<(usize, T)> = Vec::new();
        for &(k, coef) in &e.coeffs {
            match y_kind[k] {
                YKind::Free(ui) => u.push((ui, coef)),
                YKind::Gram { block: j, row: r, col: c } => {
                    if block.is_some() && block != Some(j) {
                        return Err("equality row spans two Gram blocks".into());
                    }
                    block = Some(j);
                    pat_upper.push((r, c, coef));
                }
            }
        }
        rows.push(IRow { block, pat_upper, pat: Vec::new(), u, rhs: e.rhs });
    }

    // Matrix equalities for non-Gram blocks: X_j − Σ y_k A_jk = C_j.
    for (j, b) in prob.blocks.iter().enumerate() {
        if is_gram[j] {
            continue;
        }
        let mut cmat: std::collections::BTreeMap<(usize, usize), T> = std::collections::BTreeMap::new();
        for &(r, c, v) in &b.const_entries {
            let (r, c) = if r <= c { (r, c) } else { (c, r) };
            *cmat.entry((r, c)).or_insert(T::zero()) = *cmat.get(&(r, c)).unwrap_or(&T::zero()) + v;
        }
        let mut amap: std::collections::BTreeMap<(usize, usize), Vec<(usize, T)>> =
            std::collections::BTreeMap::new();
        for &(r, c, k, coef) in &b.var_entries {
            let (r, c) = if r <= c { (r, c) } else { (c, r) };
            amap.entry((r, c)).or_default().push((k, coef));
        }
        for r in 0..b.dim {
            for c in r..b.dim {
                let mut u: Vec<(usize, T)> = Vec::new();
                if let Some(vars) = amap.get(&(r, c)) {
                    for &(k, coef) in vars {
                        match y_kind[k] {
                            YKind::Free(ui) => u.push((ui, -coef)),
                            YKind::Gram { .. } => unreachable!("gram var in non-gram block"),
                        }
                    }
                }
                let rhs = cmat.get(&(r, c)).copied().unwrap_or(T::zero());
                rows.push(IRow {
                    block: Some(j),
                    pat_upper: vec![(r, c, T::one())],
                    pat: Vec::new(),
                    u,
                    rhs,
                });
            }
        }
    }

    // Merge duplicate u coefficients, scale rows, expand symmetric patterns.
    for row in &mut rows {
        row.u.sort_by_key(|&(i, _)| i);
        row.u.dedup_by(|a, b| {
            if a.0 == b.0 {
                b.1 = b.1 + a.1;
                true
            } else {
                false
            }
        });
        let mut scale = row.rhs.abs();
        for &(_, _, w) in &row.pat_upper {
            scale = scale.max(w.abs());
        }
        for &(_, w) in &row.u {
            scale = scale.max(w.abs());
        }
        if scale > T::one() {
            let inv = T::one() / scale;
            row.rhs = row.rhs * inv;
            for e in &mut row.pat_upper {
                e.2 = e.2 * inv;
            }
            for e in &mut row.u {
                e.1 = e.1 * inv;
            }
        }
        let half = real::<T>(0.5);
        for &(r, c, w) in &row.pat_upper {
            if r == c {
                row.pat.push((r as u32, c as u32, w));
            } else {
                row.pat.push((r as u32, c as u32, w * half));
                row.pat.push((c as u32, r as u32, w * half));
            }
        }
    }

    let mut rows_of_block: Vec<Vec<usize>> = vec![Vec::new(); nb];
    let mut pure_rows = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        match row.block {
            Some(j) => rows_of_block[j].push(i),
            None => pure_rows.push(i),
        }
    }

    // Per-block dense F over the u columns its rows actually touch.
    let mut block_cols: Vec<Vec<usize>> = Vec::with_capacity(nb);
    let mut block_f: Vec<Mat<T>> = Vec::with_capacity(nb);
    for j in 0..nb {
        let mut cols: Vec<usize> = rows_of_block[j]
            .iter()
            .flat_map(|&r| rows[r].u.iter().map(|&(i, _)| i))
            .collect();
        cols.sort_unstable();
        cols.dedup();
        let index_of: std::collections::BTreeMap<usize, usize> =
            cols.iter().enumerate().map(|(a, &b)| (b, a)).collect();
        let mut f = Mat::zeros(rows_of_block[j].len(), cols.len());
        for (local, &r) in rows_of_block[j].iter().enumerate() {
            for &(i, w) in &rows[r].u {
                f[(local, index_of[&i])] = w;
            }
        }
        block_cols.push(cols);
        block_f.push(f);
    }

    Ok(Internal {
        dims: prob.blocks.iter().map(|b| b.dim).collect(),
        costs,
        c_u,
        rows,
        rows_of_block,
        pure_rows,
        block_cols,
        block_f,
        y_kind,
        p,
    })
}

/// ⟨B_r, M⟩ for a symmetric M using the ordered pattern.
fn pat_dot<T: Scalar>(pat: &[(u32, u32, T)], m: &Mat<T>) -> T {
    pat.iter()
        .fold(T::zero(), |acc, &(p, q, w)| acc + w * m[(p as usize, q as usize)])
}

/// Adds w·B_r to a symmetric accumulator.
fn pat_axpy<T: Scalar>(pat: &[(u32, u32, T)], scale: T, out: &mut Mat<T>) {
    for &(p, q, w) in pat {
        out[(p as usize, q as usize)] = out[(p as usize, q as usize)] + scale * w;
    }
}

/// Largest step α with X + α·ΔX ⪰ 0, via min-eig of L⁻¹·ΔX·L⁻ᵀ.
fn max_step<T: Scalar>(x: &Mat<T>, dx: &Mat<T>) -> T {
    let n = x.rows();
    if n == 0 {
        return T::infinity();
    }
    let l = match cholesky(x) {
        Some(l) => l,
        None => return T::zero(),
    };
    // T = L⁻¹ ΔX L⁻ᵀ: solve column-wise.
    let mut t = dx.clone();
    // L⁻¹ · ΔX (column-wise forward substitution on each column).
    for c in 0..n {
        let mut col: Vec<T> = (0..n).map(|r| t[(r, c)]).collect();
        solve_lower(&l, &mut col);
        for r in 0..n {
            t[(r, c)] = col[r];
        }
    }
    // (L⁻¹ ΔX) L⁻ᵀ = (L⁻¹ (L⁻¹ ΔX)ᵀ)ᵀ
    let mut t2 = t.transpose();
    for c in 0..n {
        let mut col: Vec<T> = (0..n).map(|r| t2[(r, c)]).collect();
        solve_lower(&l, &mut col);
        for r in 0..n {
            t2[(r, c)] = col[r];
        }
    }
    let sym = t2.symmetrize();
    let lambda = sym_eigen(&sym, false).values[0];
    if lambda >= T::zero() {
        T::infinity()
    } else {
        -(T::one() / lambda)
    }
}

/// LDLᵀ without pivoting for quasi-definite matrices.
fn ldl<T: Scalar>(a: &Mat<T>) -> Option<(Mat<T>, Vec<T>)> {
    let n = a.rows();
    let mut l = Mat::identity(n);
    let mut d = vec![T::zero(); n];
    for j in 0..n {
        let mut dj = a[(j, j)];
        for k in 0..j {
            dj = dj - l[(j, k)] * l[(j, k)] * d[k];
        }
        if dj == T::zero() || !dj.is_finite() {
            return None;
        }
        d[j] = dj;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)] * d[k];
            }
            l[(i, j)] = s / dj;
        }
    }
    Some((l, d))
}

fn ldl_solve<T: Scalar>(l: &Mat<T>, d: &[T], b: &[T]) -> Vec<T> {
    let n = d.len();
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s = s - l[(i, k)] * x[k];
        }
        x[i] = s;
    }
    for i in 0..n {
        x[i] = x[i] / d[i];
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s;
    }
    x
}

struct Factorization<T> {
    chol_m: Vec<Option<Mat<T>>>,
    sinv: Vec<Mat<T>>,
    kl: Mat<T>,
    kd: Vec<T>,
}

struct Direction<T> {
    dx: Vec<Mat<T>>,
    ds: Vec<Mat<T>>,
    dz: Vec<T>,
    du: Vec<T>,
}

/// Solves a semidefinite program with the embedded interior-point method.
pub fn solve<T: Scalar>(prob: &SdpProblem<T>, tol: T) -> SdpSolution<T> {
    assert!(tol > T::zero(), "tolerance must be positive");
    let max_iter = 200usize;
    match convert(prob) {
        Ok(internal) => run(prob, &internal, tol, max_iter),
        Err(msg) => SdpSolution {
            status: SolveStatus::Stalled,
            y: vec![T::zero(); prob.var_count],
            block_matrices: prob.blocks.iter().map(|b| Mat::zeros(b.dim, b.dim)).collect(),
            objective: T::zero(),
            gap: T::infinity(),
            iterations: vec![],
            message: format!("conversion failed: {msg}"),
        },
    }
}

/// Like [`solve`] with an explicit iteration cap.
pub(crate) fn solve_with_iters<T: Scalar>(
    prob: &SdpProblem<T>,
    tol: T,
    max_iter: usize,
) -> SdpSolution<T> {
    match convert(prob) {
        Ok(internal) => run(prob, &internal, tol, max_iter),
        Err(msg) => SdpSolution {
            status: SolveStatus::Stalled,
            y: vec![T::zero(); prob.var_count],
            block_matrices: prob.blocks.iter().map(|b| Mat::zeros(b.dim, b.dim)).collect(),
            objective: T::zero(),
            gap: T::infinity(),
            iterations: vec![],
            message: format!("conversion failed: {msg}"),
        },
    }
}

#[allow(clippy::too_many_lines)]
fn run<T: Scalar>(
    prob: &SdpProblem<T>,
    it: &Internal<T>,
    tol: T,
    max_iter: usize,
) -> SdpSolution<T> {
    let nb = it.dims.len();
    let p = it.p;
    let total_dim: usize = it.dims.iter().sum::<usize>().max(1);

    // Problem scales.
    let d_norm = it
        .rows
        .iter()
        .fold(T::zero(), |acc, r| acc.max(r.rhs.abs()));
    let c_norm = it
        .costs
        .iter()
        .map(Mat::max_abs)
        .fold(T::zero(), T::max)
        .max(it.c_u.iter().fold(T::zero(), |a, &v| a.max(v.abs())));
    let scale = T::one() + d_norm.max(c_norm);

    // Initial iterate: identity-scaled interior point.
    let mut x: Vec<Mat<T>> = Vec::with_capacity(nb);
    let mut s: Vec<Mat<T>> = Vec::with_capacity(nb);
    for j in 0..nb {
        let n = it.dims[j];
        let mut xi = real::<T>(10.0).max(real::<T>(n as f64).sqrt());
        for &r in &it.rows_of_block[j] {
            let row = &it.rows[r];
            let bn = row
                .pat
                .iter()
                .fold(T::zero(), |acc, &(_, _, w)| acc + w * w)
                .sqrt();
            xi = xi.max(real::<T>(n as f64) * row.rhs.abs() / (T::one() + bn));
        }
        let eta = real::<T>(10.0)
            .max(real::<T>(n as f64).sqrt())
            .max(it.costs[j].frobenius_norm());
        let mut xm = Mat::zeros(n, n);
        let mut sm = Mat::zeros(n, n);
        for i in 0..n {
            xm[(i, i)] = xi;
            sm[(i, i)] = eta;
        }
        x.push(xm);
        s.push(sm);
    }
    let mut z = vec![T::zero(); it.rows.len()];
    let mut u = vec![T::zero(); p];

    let mut iterations: Vec<IterStats<T>> = Vec::new();
    let mut status = SolveStatus::Stalled;
    let mut message = String::new();
    let mut final_relgap = T::infinity();
    let mut tiny_steps = 0usize;

    let gamma = real::<T>(STEP_FRACTION);

    for iter in 0..max_iter {
        // Residuals.
        let mut r_p = vec![T::zero(); it.rows.len()];
        for (r, row) in it.rows.iter().enumerate() {
            let mut v = row.rhs;
            if let Some(j) = row.block {
                v = v - pat_dot(&row.pat, &x[j]);
            }
            for &(i, w) in &row.u {
                v = v - w * u[i];
            }
            r_p[r] = v;
        }
        let mut r_d: Vec<Mat<T>> = Vec::with_capacity(nb);
        for j in 0..nb {
            let mut m = it.costs[j].clone();
            for &r in &it.rows_of_block[j] {
                pat_axpy(&it.rows[r].pat, -z[r], &mut m);
            }
            let mut neg_s = s[j].clone();
            neg_s.scale(-T::one());
            m.add_assign(&neg_s);
            r_d.push(m);
        }
        let mut r_f = it.c_u.clone();
        for (r, row) in it.rows.iter().enumerate() {
            for &(i, w) in &row.u {
                r_f[i] = r_f[i] - w * z[r];
            }
        }

        let gap = (0..nb).fold(T::zero(), |acc, j| acc + x[j].dot(&s[j]));
        let mu = gap / real::<T>(total_dim as f64);
        let p_int = (0..nb).fold(T::zero(), |acc, j| acc + it.costs[j].dot(&x[j]))
            + it.c_u.iter().zip(&u).fold(T::zero(), |a, (&c, &uu)| a + c * uu);
        let d_int = it
            .rows
            .iter()
            .zip(&z)
            .fold(T::zero(), |a, (row, &zz)| a + row.rhs * zz);

        let prim_res = r_p.iter().fold(T::zero(), |a, &v| a.max(v.abs())) / (T::one() + d_norm);
        let dual_res = {
            let mut m = r_f.iter().fold(T::zero(), |a, &v| a.max(v.abs()));
            for rd in &r_d {
                m = m.max(rd.max_abs());
            }
            m / (T::one() + c_norm)
        };
        let relgap = gap.abs() / (T::one() + p_int.abs() + d_int.abs());

        let slack = {
            let zt_rp = z
                .iter()
                .zip(&r_p)
                .fold(T::zero(), |a, (&zz, &rr)| a + zz * rr);
            let rd_x = (0..nb).fold(T::zero(), |acc, j| acc + r_d[j].dot(&x[j]));
            let rf_u = r_f.iter().zip(&u).fold(T::zero(), |a, (&rr, &uu)| a + rr * uu);
            zt_rp.abs() + rd_x.abs() + rf_u.abs()
        };

        iterations.push(IterStats {
            mu,
            primal_objective: -p_int,
            dual_objective: -d_int,
            gap,
            primal_residual: prim_res,
            dual_residual: dual_res,
            infeasibility_slack: slack,
            step_primal: T::zero(),
            step_dual: T::zero(),
        });

        if relgap <= tol && prim_res <= tol && dual_res <= tol {
            status = SolveStatus::Optimal;
            final_relgap = relgap;
            message = format!("converged in {iter} iterations");
            break;
        }
        final_relgap = relgap;

        // Divergence heuristics: a diverging dual objective with small dual
        // residuals is a Farkas ray (primal infeasible); the mirror image
        // certifies unboundedness.
        let big = real::<T>(1e8) * scale;
        if iter >= 8 {
            if d_int > big && dual_res < real(1e-5) {
                status = SolveStatus::Infeasible;
                message = "dual objective diverged with vanishing dual residual".into();
                break;
            }
            if p_int < -big && prim_res < real(1e-5) {
                status = SolveStatus::Unbounded;
                message = "primal objective diverged with vanishing primal residual".into();
                break;
            }
        }

        // Factorize.
        let fact = match factorize(it, &x, &s) {
            Ok(f) => f,
            Err(msg2) => {
                status = SolveStatus::Stalled;
                message = format!("Newton system numerically singular: {msg2}");
                break;
            }
        };

        // Predictor (affine scaling direction).
        let zero_corr: Vec<Mat<T>> = (0..nb).map(|j| Mat::zeros(it.dims[j], it.dims[j])).collect();
        let aff = match newton(it, &x, &s, &r_p, &r_d, &r_f, &fact, T::zero(), &zero_corr) {
            Ok(d) => d,
            Err(msg2) => {
                status = SolveStatus::Stalled;
                message = format!("Newton solve failed: {msg2}");
                break;
            }
        };
        let mut ap = T::infinity();
        let mut ad = T::infinity();
        for j in 0..nb {
            ap = ap.min(max_step(&x[j], &aff.dx[j]));
            ad = ad.min(max_step(&s[j], &aff.ds[j]));
        }
        let ap_aff = T::one().min(gamma * ap);
        let ad_aff = T::one().min(gamma * ad);
        let mut gap_aff = T::zero();
        for j in 0..nb {
            let mut xa = x[j].clone();
            let mut dxs = aff.dx[j].clone();
            dxs.scale(ap_aff);
            xa.add_assign(&dxs);
            let mut sa = s[j].clone();
            let mut dss = aff.ds[j].clone();
            dss.scale(ad_aff);
            sa.add_assign(&dss);
            gap_aff = gap_aff + xa.dot(&sa);
        }
        let mu_aff = gap_aff.max(T::zero()) / real::<T>(total_dim as f64);
        let sigma = if mu > T::zero() {
            (mu_aff / mu).powi(3).min(T::one()).max(real(1e-10))
        } else {
            real(1e-10)
        };

        // Corrector with the Mehrotra cross term ΔX_aff·ΔS_aff.
        let corr: Vec<Mat<T>> = (0..nb).map(|j| aff.dx[j].matmul(&aff.ds[j])).collect();
        let dir = match newton(it, &x, &s, &r_p, &r_d, &r_f, &fact, sigma * mu, &corr) {
            Ok(d) => d,
            Err(msg2) => {
                status = SolveStatus::Stalled;
                message = format!("corrector solve failed: {msg2}");
                break;
            }
        };
        let mut ap = T::infinity();
        let mut ad = T::infinity();
        for j in 0..nb {
            ap = ap.min(max_step(&x[j], &dir.dx[j]));
            ad = ad.min(max_step(&s[j], &dir.ds[j]));
        }
        let ap = T::one().min(gamma * ap);
        let ad = T::one().min(gamma * ad);

        for j in 0..nb {
            let mut dxs = dir.dx[j].clone();
            dxs.scale(ap);
            x[j].add_assign(&dxs);
            let mut dss = dir.ds[j].clone();
            dss.scale(ad);
            s[j].add_assign(&dss);
        }
        for i in 0..p {
            u[i] = u[i] + ap * dir.du[i];
        }
        for (r, dzr) in dir.dz.iter().enumerate() {
            z[r] = z[r] + ad * *dzr;
        }
        if let Some(last) = iterations.last_mut() {
            last.step_primal = ap;
            last.step_dual = ad;
        }

        if ap < real(1e-10) && ad < real(1e-10) {
            tiny_steps += 1;
            if tiny_steps >= 3 {
                status = SolveStatus::Stalled;
                message = "step sizes collapsed".into();
                break;
            }
        } else {
            tiny_steps = 0;
        }
        if iter + 1 == max_iter {
            status = SolveStatus::Stalled;
            message = format!("no convergence in {max_iter} iterations");
        }
    }

    // Exact re-projection of Gram blocks onto the equality rows: row
    // patterns are disjoint within a block, so the minimum-norm correction
    // is a single pass and the recomposition residual drops to rounding.
    if status == SolveStatus::Optimal {
        for (r, row) in it.rows.iter().enumerate() {
            let _ = r;
            if let Some(j) = row.block {
                let mut want = row.rhs;
                for &(i, w) in &row.u {
                    want = want - w * u[i];
                }
                let cur = pat_dot(&row.pat, &x[j]);
                let delta = want - cur;
                if delta == T::zero() {
                    continue;
                }
                let norm2 = row
                    .pat
                    .iter()
                    .fold(T::zero(), |a, &(_, _, w)| a + w * w);
                if norm2 > T::zero() {
                    pat_axpy(&row.pat, delta / norm2, &mut x[j]);
                }
            }
        }
    }

    // Reconstruct y.
    let mut y = vec![T::zero(); prob.var_count];
    for (k, kind) in it.y_kind.iter().enumerate() {
        match *kind {
            YKind::Free(ui) => y[k] = u[ui],
            YKind::Gram { block, row, col } => y[k] = x[block][(row, col)],
        }
    }
    let objective = prob
        .objective
        .iter()
        .zip(&y)
        .fold(T::zero(), |a, (&b, &v)| a + b * v);

    SdpSolution {
        status,
        y,
        block_matrices: x,
        objective,
        gap: final_relgap,
        iterations,
        message,
    }
}

/// Per-iteration factorizations: S Cholesky/inverse, the per-block Schur
/// matrices M_j with their Cholesky factors, and the free-variable saddle
/// system.
fn factorize<T: Scalar>(
    it: &Internal<T>,
    x: &[Mat<T>],
    s: &[Mat<T>],
) -> Result<Factorization<T>, String> {
    let nb = it.dims.len();
    let p = it.p;
    let m0 = it.pure_rows.len();

    let mut sinv = Vec::with_capacity(nb);
    let mut chol_m: Vec<Option<Mat<T>>> = Vec::with_capacity(nb);
    let mut h = Mat::zeros(p, p);

    for j in 0..nb {
        let n = it.dims[j];
        let ls = cholesky(&s[j]).ok_or_else(|| format!("S block {j} lost definiteness"))?;
        let si = crate::linalg::cholesky_inverse(&ls);
        let rows = &it.rows_of_block[j];
        let mj = rows.len();
        if mj == 0 {
            sinv.push(si);
            chol_m.push(None);
            continue;
        }
        // M[α][β] = tr(B_α X B_β S⁻¹) over the ordered patterns.
        let mut m = Mat::zeros(mj, mj);
        let xd = x[j].data();
        let sd = si.data();
        for a in 0..mj {
            let pa = &it.rows[rows[a]].pat;
            for b in a..mj {
                let pb = &it.rows[rows[b]].pat;
                let mut acc = T::zero();
                for &(pp, qq, wa) in pa {
                    let (pp, qq) = (pp as usize, qq as usize);
                    for &(tt, vv, wb) in pb {
                        let (tt, vv) = (tt as usize, vv as usize);
                        acc = acc + wa * wb * xd[qq * n + tt] * sd[vv * n + pp];
                    }
                }
                m[(a, b)] = acc;
                m[(b, a)] = acc;
            }
        }
        // Cholesky with escalating diagonal regularization.
        let mut reg = T::zero();
        let base = m.trace() / real::<T>(mj as f64);
        let lm = loop {
            let mut mr = m.clone();
            if reg > T::zero() {
                for i in 0..mj {
                    mr[(i, i)] = mr[(i, i)] + reg;
                }
            }
            match cholesky(&mr) {
                Some(l) => break l,
                None => {
                    reg = if reg == T::zero() { real::<T>(1e-14) * (T::one() + base) } else { reg * real(100.0) };
                    if reg > real::<T>(1e-4) * (T::one() + base) {
                        return Err(format!("Schur block {j} not positive definite"));
                    }
                }
            }
        };
        // G = L⁻¹ F (forward substitution on every column at once).
        let f = &it.block_f[j];
        let pc = f.cols();
        let mut g = f.clone();
        for i in 0..mj {
            let li = lm.row(i);
            // g.row(i) -= Σ_k L[i,k]·g.row(k); then /= L[i,i]
            for k in 0..i {
                let lik = li[k];
                if lik == T::zero() {
                    continue;
                }
                let (head, tail) = g.data_split(k, i);
                let src = &head[k * pc..(k + 1) * pc];
                let dst = &mut tail[..pc];
                for c in 0..pc {
                    dst[c] = dst[c] - lik * src[c];
                }
            }
            let dii = li[i];
            let row = g.row_mut(i);
            for v in row.iter_mut() {
                *v = *v / dii;
            }
        }
        // H += GᵀG scattered over the block's columns.
        let cols = &it.block_cols[j];
        for a in 0..pc {
            for b in a..pc {
                let mut acc = T::zero();
                for r in 0..mj {
                    acc = acc + g[(r, a)] * g[(r, b)];
                }
                let (ga, gb) = (cols[a], cols[b]);
                h[(ga, gb)] = h[(ga, gb)] + acc;
                if ga != gb {
                    h[(gb, ga)] = h[(gb, ga)] + acc;
                }
            }
        }
        sinv.push(si);
        chol_m.push(Some(lm));
    }

    // Saddle system over (u, pure-row duals).
    let dim = p + m0;
    let mut k = Mat::zeros(dim, dim);
    let hreg = real::<T>(1e-12) * (T::one() + h.trace().abs() / real::<T>(p.max(1) as f64));
    for a in 0..p {
        for b in 0..p {
            k[(a, b)] = h[(a, b)];
        }
        k[(a, a)] = k[(a, a)] + hreg;
    }
    let theta = real::<T>(1e-10);
    for (local, &r) in it.pure_rows.iter().enumerate() {
        for &(i, w) in &it.rows[r].u {
            k[(p + local, i)] = w;
            k[(i, p + local)] = w;
        }
        k[(p + local, p + local)] = -theta;
    }
    let (kl, kd) = ldl(&k).ok_or_else(|| "saddle system singular".to_string())?;

    Ok(Factorization { chol_m, sinv, kl, kd })
}

impl<T: Scalar> Mat<T> {
    /// Split borrow helper: rows `..split` immutably, row `target` mutably.
    fn data_split(&mut self, _src_row: usize, target: usize) -> (&[T], &mut [T]) {
        let cols = self.cols();
        let (head, tail) = self.data_mut().split_at_mut(target * cols);
        (head, &mut tail[..cols])
    }
}

/// One Newton solve for a given centering target ν and corrector term,
/// reusing the iteration's factorizations.
#[allow(clippy::too_many_arguments)]
fn newton<T: Scalar>(
    it: &Internal<T>,
    x: &[Mat<T>],
    s: &[Mat<T>],
    r_p: &[T],
    r_d: &[Mat<T>],
    r_f: &[T],
    fact: &Factorization<T>,
    nu: T,
    corr: &[Mat<T>],
) -> Result<Direction<T>, String> {
    let nb = it.dims.len();
    let p = it.p;
    let m0 = it.pure_rows.len();

    // Ξ_j = ν·S⁻¹ − X − Corr·S⁻¹ ; P_j = sym(Ξ_j − X·R_d·S⁻¹)
    let mut pmat: Vec<Mat<T>> = Vec::with_capacity(nb);
    let mut xi: Vec<Mat<T>> = Vec::with_capacity(nb);
    for j in 0..nb {
        let mut xij = fact.sinv[j].clone();
        xij.scale(nu);
        let mut neg_x = x[j].clone();
        neg_x.scale(-T::one());
        xij.add_assign(&neg_x);
        if corr[j].max_abs() > T::zero() {
            let mut cs = corr[j].matmul(&fact.sinv[j]);
            cs.scale(-T::one());
            xij.add_assign(&cs);
        }
        let mut xr = x[j].matmul(&r_d[j]).matmul(&fact.sinv[j]);
        xr.scale(-T::one());
        let mut pj = xij.clone();
        pj.add_assign(&xr);
        let pj = pj.symmetrize();
        pmat.push(pj);
        xi.push(xij);
    }

    // g1 and the per-block partial solves.
    let mut g1 = vec![T::zero(); it.rows.len()];
    for (r, row) in it.rows.iter().enumerate() {
        g1[r] = r_p[r];
        if let Some(j) = row.block {
            g1[r] = g1[r] - pat_dot(&row.pat, &pmat[j]);
        }
    }

    let mut h1 = vec![T::zero(); p];
    for i in 0..p {
        h1[i] = -r_f[i];
    }
    let mut t_j: Vec<Vec<T>> = Vec::with_capacity(nb);
    for j in 0..nb {
        let rows = &it.rows_of_block[j];
        if rows.is_empty() {
            t_j.push(vec![]);
            continue;
        }
        let lm = fact.chol_m[j].as_ref().unwrap();
        let rhs: Vec<T> = rows.iter().map(|&r| g1[r]).collect();
        let t = cholesky_solve(lm, &rhs);
        // h1 += F_jᵀ t
        let f = &it.block_f[j];
        let cols = &it.block_cols[j];
        for (local, &col) in cols.iter().enumerate() {
            let mut acc = T::zero();
            for r in 0..rows.len() {
                acc = acc + f[(r, local)] * t[r];
            }
            h1[col] = h1[col] + acc;
        }
        t_j.push(t);
    }

    // Saddle solve with one round of iterative refinement.
    let dim = p + m0;
    let mut rhs = vec![T::zero(); dim];
    rhs[..p].copy_from_slice(&h1);
    for (local, &r) in it.pure_rows.iter().enumerate() {
        rhs[p + local] = g1[r];
    }
    let sol = ldl_solve(&fact.kl, &fact.kd, &rhs);
    let du: Vec<T> = sol[..p].to_vec();
    let dz_pure: Vec<T> = sol[p..].iter().map(|&w| -w).collect();

    // Back-substitute per-block duals: Δz_j = M⁻¹(g1_j − F_jΔu).
    let mut dz = vec![T::zero(); it.rows.len()];
    for j in 0..nb {
        let rows = &it.rows_of_block[j];
        if rows.is_empty() {
            continue;
        }
        let lm = fact.chol_m[j].as_ref().unwrap();
        let f = &it.block_f[j];
        let cols = &it.block_cols[j];
        let mut rhs: Vec<T> = rows.iter().map(|&r| g1[r]).collect();
        for (local, &col) in cols.iter().enumerate() {
            let duc = du[col];
            if duc == T::zero() {
                continue;
            }
            for r in 0..rows.len() {
                rhs[r] = rhs[r] - f[(r, local)] * duc;
            }
        }
        let t = cholesky_solve(lm, &rhs);
        for (local, &r) in rows.iter().enumerate() {
            dz[r] = t[local];
        }
    }
    for (local, &r) in it.pure_rows.iter().enumerate() {
        dz[r] = dz_pure[local];
    }

    // ΔS = R_d − 𝒜*(Δz);  ΔX = sym(Ξ − X·ΔS·S⁻¹).
    let mut ds: Vec<Mat<T>> = Vec::with_capacity(nb);
    let mut dx: Vec<Mat<T>> = Vec::with_capacity(nb);
    for j in 0..nb {
        let mut dsj = r_d[j].clone();
        for &r in &it.rows_of_block[j] {
            pat_axpy(&it.rows[r].pat, -dz[r], &mut dsj);
        }
        let mut xds = x[j].matmul(&dsj).matmul(&fact.sinv[j]);
        xds.scale(-T::one());
        let mut dxj = xi[j].clone();
        dxj.add_assign(&xds);
        let dxj = dxj.symmetrize();
        ds.push(dsj);
        dx.push(dxj);
    }

    Ok(Direction { dx, ds, dz, du })
}
