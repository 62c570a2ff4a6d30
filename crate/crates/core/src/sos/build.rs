//! Construction of the SOS programs: the contraction-metric search, the
//! metric positivity/boundedness side constraints, the invariance
//! certificates, and the fixed-metric rate maximization.

use super::{AffineExpr, PolyKind, SosError, SosProgram, VarId};
use crate::poly::{jacobian, monomial_basis, Monomial, PolyMatrix, Polynomial, WBlockCap};
use crate::problem::ProblemSpec;
use crate::scalar::{real, Scalar};

/// Appends the compactifying ball constraint R² − |x|² when one was
/// scheduled by validation. Idempotent.
pub fn putinar_augment<T: Scalar>(mut spec: ProblemSpec<T>) -> ProblemSpec<T> {
    if !spec.ball_scheduled || spec.ball_added {
        return spec;
    }
    let n = spec.dim();
    let radius = spec.options.ball_radius.unwrap_or_else(|| {
        // Enclose the region's bounding box with a 1.5× margin.
        let corner = spec
            .bounding_box
            .iter()
            .fold(T::zero(), |acc, &(lo, hi)| acc + lo.abs().max(hi.abs()).powi(2))
            .sqrt();
        corner * real::<T>(1.5)
    });
    let mut ball = Polynomial::constant(n, radius * radius);
    for i in 0..n {
        let mut exps = vec![0u32; n];
        exps[i] = 2;
        ball.add_term(Monomial::new(exps), -T::one());
    }
    spec.constraints.push(crate::problem::Constraint { name: "ball".into(), poly: ball });
    for (lo, hi) in &mut spec.bounding_box {
        *lo = lo.max(-radius);
        *hi = hi.min(radius);
    }
    spec.ball_added = true;
    spec.ball_scheduled = false;
    spec
}

/// The five summands of the master expression, kept separately so tests can
/// check the symbolic construction against part-by-part evaluation.
#[derive(Debug, Clone)]
pub struct MasterParts<T> {
    /// −Wᵀ·sym(J·G − ½Ġ)·W
    pub quad_form: AffineExpr<T>,
    /// −s_i·q_i per constraint.
    pub s_terms: Vec<AffineExpr<T>>,
    /// p₁·(|W|² − 1)
    pub p1_term: AffineExpr<T>,
    /// p₂·Wᵀf
    pub p2_term: AffineExpr<T>,
    /// −ε
    pub epsilon_term: AffineExpr<T>,
}

impl<T: Scalar> MasterParts<T> {
    pub fn sum(&self) -> AffineExpr<T> {
        let mut e = self.quad_form.clone();
        for s in &self.s_terms {
            e.add_assign(s, T::one());
        }
        e.add_assign(&self.p1_term, T::one());
        e.add_assign(&self.p2_term, T::one());
        e.add_assign(&self.epsilon_term, T::one());
        e
    }
}

/// Contraction-metric search program with handles into its decision polys.
#[derive(Debug, Clone)]
pub struct ContractionProgram<T> {
    pub program: SosProgram<T>,
    pub epsilon: VarId,
    /// Upper-triangle metric entries: (row, col, decision poly index).
    pub g_entries: Vec<(usize, usize, usize)>,
    pub p1: usize,
    pub p2: usize,
    pub s: Vec<usize>,
    /// Multipliers of the G ⪰ δI constraint.
    pub sigma_lower: Vec<usize>,
    /// Multipliers of the G ⪯ κI constraint.
    pub sigma_upper: Vec<usize>,
    /// Index of the master constraint in `program.constraints`.
    pub master_index: usize,
    pub metric_degree: u32,
    pub parts: MasterParts<T>,
}

/// Fixed-metric rate maximization program.
#[derive(Debug, Clone)]
pub struct RateProgram<T> {
    pub program: SosProgram<T>,
    /// The rate variable c replacing ε.
    pub rate: VarId,
    pub p1: usize,
    pub p2: usize,
    pub s: Vec<usize>,
    pub master_index: usize,
}

/// Invariance certificate program for one boundary constraint.
#[derive(Debug, Clone)]
pub struct InvarianceProgram<T> {
    pub program: SosProgram<T>,
    pub constraint_index: usize,
    pub mu: usize,
    /// (constraint index j ≠ i, decision poly index) pairs.
    pub tau: Vec<(usize, usize)>,
}

fn w_monomial(arity: usize, x_count: usize, j: usize) -> Monomial {
    Monomial::var(arity, x_count + j)
}

fn w_pair(arity: usize, x_count: usize, j: usize, k: usize) -> Monomial {
    w_monomial(arity, x_count, j).mul(&w_monomial(arity, x_count, k))
}

/// Template of X-only monomials of degree ≤ cap in the joint ring.
fn x_template(arity: usize, x_count: usize, cap: u32) -> Vec<Monomial> {
    monomial_basis(arity, cap, Some(WBlockCap { start: x_count, cap: 0 }))
}

/// Template {x^α·w_j} with |α| ≤ cap.
fn xw_template(arity: usize, x_count: usize, cap: u32) -> Vec<Monomial> {
    let n = arity - x_count;
    let xs = x_template(arity, x_count, cap);
    let mut out = Vec::with_capacity(xs.len() * n);
    for j in 0..n {
        let wj = w_monomial(arity, x_count, j);
        for x in &xs {
            out.push(x.mul(&wj));
        }
    }
    out.sort();
    out
}

/// Template {x^α·w_j·w_k} (j ≤ k) with |α| ≤ cap.
fn xww_template(arity: usize, x_count: usize, cap: u32) -> Vec<Monomial> {
    let n = arity - x_count;
    let xs = x_template(arity, x_count, cap);
    let mut out = Vec::new();
    for j in 0..n {
        for k in j..n {
            let wjk = w_pair(arity, x_count, j, k);
            for x in &xs {
                out.push(x.mul(&wjk));
            }
        }
    }
    out.sort();
    out
}

/// Template with even W-degree ≤ 2: X-part degree ≤ cap, plus W-quadratic
/// part with X-degree ≤ cap − 2.
fn even_w_template(arity: usize, x_count: usize, cap: u32) -> Vec<Monomial> {
    let mut out = x_template(arity, x_count, cap);
    if cap >= 2 {
        out.extend(xww_template(arity, x_count, cap - 2));
    }
    out.sort();
    out
}

/// |W|² − 1 in the joint ring.
fn w_norm_minus_one<T: Scalar>(arity: usize, x_count: usize) -> Polynomial<T> {
    let n = arity - x_count;
    let mut p = Polynomial::constant(arity, -T::one());
    for j in 0..n {
        p.add_term(w_pair(arity, x_count, j, j), T::one());
    }
    p
}

/// Wᵀ·A·W as an affine expression, for a symmetric affine matrix given by
/// its upper triangle (row-major pairs (k, l, entry), k ≤ l).
fn scalarize_quadratic_form<T: Scalar>(
    arity: usize,
    x_count: usize,
    entries: &[(usize, usize, AffineExpr<T>)],
) -> AffineExpr<T> {
    let mut out = AffineExpr::zero(arity);
    let two = real::<T>(2.0);
    for (k, l, e) in entries {
        let wkl = w_pair(arity, x_count, *k, *l);
        let scaled = if k == l { e.clone() } else { e.scale(two) };
        out.add_assign(&scaled.mul_monomial(&wkl), T::one());
    }
    out
}

/// Metric entries as affine expressions, upper triangle.
type MetricEntries<T> = Vec<(usize, usize, AffineExpr<T>)>;

/// How the metric enters the master expression: as decision polynomials or
/// frozen to a numeric matrix.
enum MetricSource<'a, T> {
    Decision(u32),
    Fixed(&'a PolyMatrix<T>),
}

struct MasterBuild<T> {
    program: SosProgram<T>,
    objective: VarId,
    g_entries: Vec<(usize, usize, usize)>,
    g_exprs: MetricEntries<T>,
    p1: usize,
    p2: usize,
    s: Vec<usize>,
    master_index: usize,
    parts: MasterParts<T>,
}

/// Shared construction of the master expression
///
///   −ε − Wᵀ(J·G − ½Ġ)W − Σᵢ sᵢqᵢ + p₁(|W|²−1) + p₂·Wᵀf ∈ Σ²[X,W]
///
/// with the quadratic-form matrix symmetrized as ½(M + Mᵀ).
fn build_master<T: Scalar>(
    spec: &ProblemSpec<T>,
    metric: MetricSource<'_, T>,
    objective_name: &str,
) -> Result<MasterBuild<T>, SosError> {
    let n = spec.dim();
    let arity = 2 * n;
    let opts = &spec.options;
    let d_s = opts.s_degree();
    let d_p1 = opts.p1_degree();
    let d_p2 = opts.p2_degree();

    let mut program = SosProgram::new(
        arity,
        n,
        format!("contraction certificate for `{}`", spec.name),
    );

    // Lift problem data into the joint ring.
    let field_j: Vec<Polynomial<T>> = spec
        .field
        .components()
        .iter()
        .map(|f| f.embed(arity, 0))
        .collect();
    let q_j: Vec<Polynomial<T>> = spec
        .constraints
        .iter()
        .map(|c| c.poly.embed(arity, 0))
        .collect();
    let jac = jacobian(&spec.field);

    // Metric entries.
    let (metric_degree, g_entries, g_exprs): (u32, Vec<(usize, usize, usize)>, MetricEntries<T>) =
        match metric {
            MetricSource::Decision(dg) => {
                let template = x_template(arity, n, dg);
                let mut handles = Vec::new();
                let mut exprs = Vec::new();
                for k in 0..n {
                    for l in k..n {
                        let idx = program.add_decision_poly(
                            format!("g_{}_{}", k + 1, l + 1),
                            PolyKind::SosMatrixScalarized,
                            template.clone(),
                        );
                        handles.push((k, l, idx));
                        exprs.push((k, l, AffineExpr::from_decision(program.poly(idx))));
                    }
                }
                (dg, handles, exprs)
            }
            MetricSource::Fixed(g) => {
                if g.rows() != n || g.cols() != n {
                    return Err(SosError::Invalid(format!(
                        "fixed metric is {}x{}, expected {n}x{n}",
                        g.rows(),
                        g.cols()
                    )));
                }
                g.require_symmetric()
                    .map_err(|e| SosError::Invalid(format!("fixed metric: {e}")))?;
                let mut exprs = Vec::new();
                for k in 0..n {
                    for l in k..n {
                        exprs.push((k, l, AffineExpr::from_poly(&g.entry(k, l).embed(arity, 0))));
                    }
                }
                (g.max_total_degree(), Vec::new(), exprs)
            }
        };

    let entry_expr = |k: usize, l: usize| -> &AffineExpr<T> {
        let (a, b) = if k <= l { (k, l) } else { (l, k) };
        g_exprs
            .iter()
            .find(|(r, c, _)| *r == a && *c == b)
            .map(|(_, _, e)| e)
            .expect("upper triangle complete")
    };

    // M = J·G − ½Ġ, then symmetrized entry by entry.
    let half = real::<T>(0.5);
    let mut m_full: Vec<Vec<AffineExpr<T>>> = vec![vec![AffineExpr::zero(arity); n]; n];
    for k in 0..n {
        for l in 0..n {
            let mut acc = AffineExpr::zero(arity);
            for m in 0..n {
                let jkm = jac.entry(k, m).embed(arity, 0);
                if jkm.is_zero() {
                    continue;
                }
                acc.add_assign(&entry_expr(m, l).mul_poly(&jkm), T::one());
            }
            // Orbital derivative of the (k,l) entry: Σⱼ fⱼ·∂ⱼg_kl.
            let mut gdot = AffineExpr::zero(arity);
            for j in 0..n {
                gdot.add_assign(&entry_expr(k, l).partial(j).mul_poly(&field_j[j]), T::one());
            }
            acc.add_assign(&gdot, -half);
            m_full[k][l] = acc;
        }
    }
    let mut sym_entries: MetricEntries<T> = Vec::new();
    for k in 0..n {
        for l in k..n {
            let e = m_full[k][l].add(&m_full[l][k]).scale(half);
            sym_entries.push((k, l, e));
        }
    }
    let quad_form = scalarize_quadratic_form(arity, n, &sym_entries).scale(-T::one());

    // Multipliers.
    let p1 = program.add_decision_poly("p1", PolyKind::Free, x_template(arity, n, d_p1));
    let p2 = program.add_decision_poly("p2", PolyKind::Free, xw_template(arity, n, d_p2));
    let mut s = Vec::new();
    for (i, c) in spec.constraints.iter().enumerate() {
        let idx = program.add_decision_poly(
            format!("s_{} ({})", i + 1, c.name),
            PolyKind::Sos,
            even_w_template(arity, n, d_s),
        );
        s.push(idx);
    }
    let objective = program.add_scalar(objective_name);

    // Assemble the master expression.
    let mut s_terms = Vec::new();
    for (i, &si) in s.iter().enumerate() {
        let term = AffineExpr::from_decision(program.poly(si))
            .mul_poly(&q_j[i])
            .scale(-T::one());
        s_terms.push(term);
    }
    let p1_term =
        AffineExpr::from_decision(program.poly(p1)).mul_poly(&w_norm_minus_one(arity, n));
    let mut wtf = Polynomial::zero(arity);
    for (j, f) in field_j.iter().enumerate() {
        let wj = w_monomial(arity, n, j);
        wtf = wtf.add(&f.mul_monomial(&wj)).expect("same arity");
    }
    let p2_term = AffineExpr::from_decision(program.poly(p2)).mul_poly(&wtf);
    let mut epsilon_term = AffineExpr::zero(arity);
    epsilon_term.add_assign(
        &AffineExpr::from_decision(program.poly(program.decision_polys.len() - 1)),
        -T::one(),
    );

    let parts = MasterParts { quad_form, s_terms, p1_term, p2_term, epsilon_term };
    let master = parts.sum();
    program.add_constraint("master", master);
    let master_index = program.constraints.len() - 1;
    program.objective = Some(objective);

    // Degree bookkeeping: no term may exceed the construction caps.
    let deg_f = spec.field.max_total_degree();
    let deg_q = spec
        .constraints
        .iter()
        .map(|c| c.poly.total_degree())
        .max()
        .unwrap_or(0);
    let x_cap = (metric_degree + deg_f.max(1) - 1)
        .max(d_s + deg_q)
        .max(d_p1)
        .max(d_p2 + deg_f);
    program.check_degrees(x_cap, 2)?;

    Ok(MasterBuild {
        program,
        objective,
        g_entries,
        g_exprs,
        p1,
        p2,
        s,
        master_index,
        parts,
    })
}

/// Appends the scalarized metric bounds to a program:
///
///   Wᵀ(G − δI)W − Σᵢ σᵢqᵢ ∈ Σ²[X,W]      (G ⪰ δI on K)
///   Wᵀ(κI − G)W − Σᵢ σ̂ᵢqᵢ ∈ Σ²[X,W]      (G ⪯ κI on K)
///
/// The fresh multipliers are SOS and homogeneous of W-degree two: any
/// W-degree-0 component is forced to vanish identically on a region with
/// interior, so allowing one would only destroy strict feasibility. The
/// upper bound pins the metric's scale; without it the contraction
/// objective could be driven to infinity by scaling G, s, p and ε together.
/// Returns the (lower, upper) multiplier handles.
pub fn add_metric_bound_constraints<T: Scalar>(
    program: &mut SosProgram<T>,
    spec: &ProblemSpec<T>,
    g_exprs: &MetricEntries<T>,
) -> (Vec<usize>, Vec<usize>) {
    let n = spec.dim();
    let arity = 2 * n;
    let d_sigma = spec.options.sigma_degree();
    let delta = spec.options.delta;
    let kappa = spec.options.metric_upper;
    let q_j: Vec<Polynomial<T>> = spec
        .constraints
        .iter()
        .map(|c| c.poly.embed(arity, 0))
        .collect();

    let mut build_bound = |sign: T, shift: T, tag: &str| -> (usize, Vec<usize>) {
        // sign·WᵀGW + shift·|W|² − Σ σ q
        let shifted: MetricEntries<T> = g_exprs
            .iter()
            .map(|(k, l, e)| {
                let mut e = e.scale(sign);
                if k == l {
                    e.add_assign(
                        &AffineExpr::from_poly(&Polynomial::constant(arity, shift)),
                        T::one(),
                    );
                }
                (*k, *l, e)
            })
            .collect();
        let mut expr = scalarize_quadratic_form(arity, n, &shifted);
        let mut sigmas = Vec::new();
        for (i, c) in spec.constraints.iter().enumerate() {
            let idx = program.add_decision_poly(
                format!("sigma{tag}_{} ({})", i + 1, c.name),
                PolyKind::Sos,
                xww_template(arity, n, d_sigma.saturating_sub(2)),
            );
            sigmas.push(idx);
            expr.add_assign(
                &AffineExpr::from_decision(program.poly(idx)).mul_poly(&q_j[i]),
                -T::one(),
            );
        }
        program.add_constraint(format!("metric {tag} bound"), expr);
        (program.constraints.len() - 1, sigmas)
    };

    let (_, lower) = build_bound(T::one(), -delta, "lower");
    let (_, upper) = build_bound(-T::one(), kappa, "upper");
    (lower, upper)
}

/// Builds the contraction-certificate program for an augmented spec:
/// maximize ε subject to the master expression and the metric bounds.
pub fn build_contraction_program<T: Scalar>(
    spec: &ProblemSpec<T>,
    metric_degree: u32,
) -> Result<ContractionProgram<T>, SosError> {
    if metric_degree % 2 != 0 {
        return Err(SosError::Invalid(format!(
            "metric degree must be even, got {metric_degree}"
        )));
    }
    let mut b = build_master(spec, MetricSource::Decision(metric_degree), "epsilon")?;
    let (sigma_lower, sigma_upper) =
        add_metric_bound_constraints(&mut b.program, spec, &b.g_exprs);
    Ok(ContractionProgram {
        program: b.program,
        epsilon: b.objective,
        g_entries: b.g_entries,
        p1: b.p1,
        p2: b.p2,
        s: b.s,
        sigma_lower,
        sigma_upper,
        master_index: b.master_index,
        metric_degree,
        parts: b.parts,
    })
}

/// Builds the rate-maximization program for a fixed numeric metric: the
/// same master expression with G frozen and the objective renamed to c.
pub fn build_rate_program<T: Scalar>(
    spec: &ProblemSpec<T>,
    g_fixed: &PolyMatrix<T>,
) -> Result<RateProgram<T>, SosError> {
    let b = build_master(spec, MetricSource::Fixed(g_fixed), "c")?;
    Ok(RateProgram {
        program: b.program,
        rate: b.objective,
        p1: b.p1,
        p2: b.p2,
        s: b.s,
        master_index: b.master_index,
    })
}

/// Builds the invariance feasibility program for boundary constraint `i`:
///
///   Dqᵢ[f] − μ·qᵢ − Σ_{j≠i} τⱼ·qⱼ ∈ Σ²[X]
///
/// with μ free and τⱼ SOS. Feasibility certifies Dqᵢ[f] ≥ 0 on the active
/// boundary K ∩ {qᵢ = 0}, the inward-flow reading of the Nagumo condition
/// for K = {q ≥ 0}: the flow may not decrease qᵢ where it is active.
pub fn build_invariance_program<T: Scalar>(
    spec: &ProblemSpec<T>,
    i: usize,
) -> Result<InvarianceProgram<T>, SosError> {
    let n = spec.dim();
    let l = spec.constraints.len();
    if i >= l {
        return Err(SosError::Invalid(format!(
            "constraint index {i} out of range (have {l})"
        )));
    }
    let d = spec.options.invariance_degree;
    let mut program = SosProgram::new(
        n,
        n,
        format!(
            "invariance certificate for `{}` boundary `{}`",
            spec.name, spec.constraints[i].name
        ),
    );

    // Dq_i[f] = ∇q_i · f
    let qi = &spec.constraints[i].poly;
    let mut dqf = Polynomial::zero(n);
    for j in 0..n {
        dqf = dqf
            .add(&qi.partial(j).expect("index in range").mul(spec.field.component(j)).expect("arity"))
            .expect("arity");
    }

    let template = monomial_basis(n, d, None);
    let mu = program.add_decision_poly("mu", PolyKind::Free, template.clone());
    let mut expr = AffineExpr::from_poly(&dqf);
    expr.add_assign(
        &AffineExpr::from_decision(program.poly(mu)).mul_poly(qi),
        -T::one(),
    );
    let mut tau = Vec::new();
    for (j, c) in spec.constraints.iter().enumerate() {
        if j == i {
            continue;
        }
        let idx = program.add_decision_poly(
            format!("tau_{} ({})", j + 1, c.name),
            PolyKind::Sos,
            template.clone(),
        );
        expr.add_assign(
            &AffineExpr::from_decision(program.poly(idx)).mul_poly(&c.poly),
            -T::one(),
        );
        tau.push((j, idx));
    }
    program.add_constraint(format!("boundary flow on {}", spec.constraints[i].name), expr);
    let constraint_index = program.constraints.len() - 1;

    Ok(InvarianceProgram { program, constraint_index, mu, tau })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{parse_problem, validate, Constraint, Options};
    use crate::poly::VectorField;

    fn shell_spec() -> ProblemSpec<f64> {
        let src = "\
system shell
vars x y z
dynamics
  dx = x*(1 - x^2 - y^2)*(x + 0.5) - y
  dy = y*(1 - x^2 - y^2)*(x + 0.5) + x
  dz = -z
set
  q1: x^2 + y^2 + z^2 - 0.49 >= 0
  q2: 2.25 - x^2 - y^2 - z^2 >= 0
options
  metric_degree = 6
";
        validate(parse_problem(src).unwrap()).unwrap()
    }

    #[test]
    fn augment_is_identity_on_compact_region() {
        let spec = shell_spec();
        let before = spec.constraints.len();
        let spec = putinar_augment(spec);
        assert_eq!(spec.constraints.len(), before);
    }

    #[test]
    fn augment_adds_ball_from_box_rule() {
        // 1-D half-line with box [0, 10]: R = 15, ball = 225 − x².
        let spec = ProblemSpec::<f64> {
            name: "halfline".into(),
            vars: vec!["x".into()],
            field: VectorField::new(vec![crate::poly::Polynomial::var(1, 0).neg()]).unwrap(),
            constraints: vec![Constraint {
                name: "q".into(),
                poly: crate::poly::Polynomial::var(1, 0),
            }],
            options: Options::default(),
            ball_scheduled: true,
            ball_added: false,
            bounding_box: vec![(0.0, 10.0)],
            warnings: vec![],
        };
        let spec = putinar_augment(spec);
        assert_eq!(spec.constraints.len(), 2);
        let ball = &spec.constraints[1].poly;
        assert_eq!(ball.coefficient(&Monomial::new(vec![0])), 225.0);
        assert_eq!(ball.coefficient(&Monomial::new(vec![2])), -1.0);
        // Idempotent.
        let again = putinar_augment(spec.clone());
        assert_eq!(again.constraints.len(), spec.constraints.len());
    }

    #[test]
    fn metric_contributes_expected_variable_count() {
        // Degree-6 metric on a 3-D system: 6 distinct entries × C(9,3) = 84
        // coefficients each = 504 decision variables.
        let spec = shell_spec();
        let prog = build_contraction_program(&spec, 6).unwrap();
        let g_vars: usize = prog
            .g_entries
            .iter()
            .map(|&(_, _, idx)| prog.program.poly(idx).vars.len())
            .sum();
        assert_eq!(prog.g_entries.len(), 6);
        assert_eq!(g_vars, 504);
    }

    #[test]
    fn master_w_degree_is_exactly_two() {
        let spec = shell_spec();
        let prog = build_contraction_program(&spec, 4).unwrap();
        let master = &prog.program.constraints[prog.master_index].expr;
        let w = prog.program.w_range();
        let mut max_w = 0;
        for m in master.support() {
            let wd = m.degree_in(w.clone());
            assert!(wd <= 2 && wd % 2 == 0, "W-degree {wd} in master");
            max_w = max_w.max(wd);
        }
        assert_eq!(max_w, 2);
        // Same evenness cap for every SOS-constrained expression.
        for c in &prog.program.constraints {
            for m in c.expr.support() {
                let wd = m.degree_in(w.clone());
                assert!(wd <= 2, "{}: W-degree {wd}", c.name);
            }
        }
    }

    #[test]
    fn rotation_field_identity_metric_quad_form_vanishes() {
        // f = (−y, x), G = I: J is skew, so sym(J·I) = 0 and Ġ = 0.
        let src = "\
system rot
vars x y
dynamics
  dx = 0 - y
  dy = x
set
  q1: x^2 + y^2 - 0.5 >= 0
  q2: 1.5 - x^2 - y^2 >= 0
";
        let spec: ProblemSpec<f64> = validate(parse_problem(src).unwrap()).unwrap();
        let g = crate::poly::PolyMatrix::identity(2, 2);
        let prog = build_rate_program(&spec, &g).unwrap();
        // The quadratic-form part is identically zero.
        assert_eq!(prog.program.constraints[prog.master_index].expr.arity(), 4);
        let b = build_master(&spec, MetricSource::Fixed(&g), "c").unwrap();
        assert_eq!(b.parts.quad_form.num_terms(), 0);
    }

    #[test]
    fn evaluation_identity_on_random_points() {
        // Master evaluated symbolically-then-numerically equals the sum of
        // its parts evaluated separately.
        let spec = shell_spec();
        let prog = build_contraction_program(&spec, 4).unwrap();
        let master = &prog.program.constraints[prog.master_index].expr;
        let nvars = prog.program.var_count;
        let mut seed = 42u64;
        let mut next = || {
            seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((seed >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        for _ in 0..5 {
            let values: Vec<f64> = (0..nvars).map(|_| next()).collect();
            let point: Vec<f64> = (0..6).map(|_| next()).collect();
            let whole = master.evaluate(&values, &point);
            let parts = prog.parts.quad_form.evaluate(&values, &point)
                + prog
                    .parts
                    .s_terms
                    .iter()
                    .map(|t| t.evaluate(&values, &point))
                    .sum::<f64>()
                + prog.parts.p1_term.evaluate(&values, &point)
                + prog.parts.p2_term.evaluate(&values, &point)
                + prog.parts.epsilon_term.evaluate(&values, &point);
            let scale = 1.0 + whole.abs() + parts.abs();
            assert!(((whole - parts) / scale).abs() < 1e-8);
        }
    }

    #[test]
    fn invariance_program_shape() {
        let spec = shell_spec();
        let prog = build_invariance_program(&spec, 0).unwrap();
        assert_eq!(prog.program.arity, 3);
        assert_eq!(prog.tau.len(), 1);
        assert!(prog.program.objective.is_none());
        assert!(build_invariance_program(&spec, 7).is_err());
    }
}
