//! Problem definition: the text file format, the validated [`ProblemSpec`],
//! and the region sanity checks.
//!
//! A problem file is line-oriented with five sections:
//!
//! ```text
//! system <name>
//! vars <v1> <v2> ...
//! dynamics
//!   d<var> = <expression>
//! set
//!   <name>: <expression> >= 0
//! options
//!   <key> = <value>
//! ```
//!
//! `#` starts a comment. The `options` section is optional; all keys have
//! defaults. Expressions use the grammar in [`crate::parse`].

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::parse::{parse_polynomial_at, ParseError};
use crate::poly::{Polynomial, VectorField};
use crate::scalar::{real, Scalar};

/// Errors from problem parsing and validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("syntax error at {0}")]
    Syntax(ParseError),
    #[error("missing required section `{0}`")]
    MissingSection(String),
    #[error("{0}")]
    Invalid(String),
    #[error("constraint region is empty: no point satisfied all constraints after {samples} samples")]
    EmptyRegion { samples: usize },
}

impl From<ParseError> for ProblemError {
    fn from(e: ParseError) -> Self {
        ProblemError::Syntax(e)
    }
}

/// One inequality q(x) ≥ 0 of the semialgebraic region.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub name: String,
    pub poly: Polynomial<T>,
}

/// Solver and search options with their defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct Options<T> {
    /// Degree of the metric entries (even). Starting value of the search.
    pub metric_degree: u32,
    /// Cap for the degree-raising outer loop.
    pub metric_degree_max: u32,
    /// Total-degree cap for the SOS multipliers s_i; default `metric_degree`.
    pub s_degree: Option<u32>,
    /// X-degree cap for the free multiplier p1; default `metric_degree`.
    pub p1_degree: Option<u32>,
    /// X-degree cap for the free multiplier p2; default `metric_degree − 1`.
    pub p2_degree: Option<u32>,
    /// Total-degree cap for the metric-bound multipliers; default `metric_degree`.
    pub sigma_degree: Option<u32>,
    /// Degree cap for invariance multipliers.
    pub invariance_degree: u32,
    /// Lower bound δ: the metric must satisfy G ⪰ δ·I on the region.
    pub delta: T,
    /// Upper bound κ: G ⪯ κ·I on the region. Pins the metric's scale,
    /// without which "maximize ε" has an unbounded scaling ray.
    pub metric_upper: T,
    /// Interior-point convergence tolerance.
    pub tol: T,
    /// Interior-point iteration cap.
    pub max_iter: usize,
    /// Half-width of the default sampling box.
    pub box_halfwidth: T,
    /// Radius of the compactifying ball constraint, when given explicitly.
    pub ball_radius: Option<T>,
    /// RNG seed for all sampling.
    pub seed: u64,
    /// Default sample count for verification sweeps.
    pub samples: usize,
    /// Enable the conservative Gram-basis support reduction.
    pub newton_reduction: bool,
}

impl<T: Scalar> Default for Options<T> {
    fn default() -> Self {
        Options {
            metric_degree: 4,
            metric_degree_max: 6,
            s_degree: None,
            p1_degree: None,
            p2_degree: None,
            sigma_degree: None,
            invariance_degree: 4,
            delta: real(1e-3),
            metric_upper: real(100.0),
            tol: real(1e-8),
            max_iter: 200,
            box_halfwidth: real(10.0),
            ball_radius: None,
            seed: 0x0b17ce27,
            samples: 10_000,
            newton_reduction: false,
        }
    }
}

impl<T: Scalar> Options<T> {
    pub fn s_degree(&self) -> u32 {
        self.s_degree.unwrap_or(self.metric_degree)
    }
    pub fn p1_degree(&self) -> u32 {
        self.p1_degree.unwrap_or(self.metric_degree)
    }
    pub fn p2_degree(&self) -> u32 {
        self.p2_degree.unwrap_or(self.metric_degree.saturating_sub(1))
    }
    pub fn sigma_degree(&self) -> u32 {
        self.sigma_degree.unwrap_or(self.metric_degree)
    }
}

/// A parsed and (after [`validate`]) sanity-checked problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<T> {
    pub name: String,
    pub vars: Vec<String>,
    pub field: VectorField<T>,
    pub constraints: Vec<Constraint<T>>,
    pub options: Options<T>,
    /// Set by [`validate`] when no single constraint bounds the region and
    /// no explicit ball radius was given: a ball constraint is scheduled.
    pub ball_scheduled: bool,
    /// Set once the compactifying ball has been appended.
    pub ball_added: bool,
    /// Per-coordinate bounding box of the region (heuristic clip).
    pub bounding_box: Vec<(T, T)>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> ProblemSpec<T> {
    pub fn dim(&self) -> usize {
        self.vars.len()
    }

    pub fn constraint_polys(&self) -> impl Iterator<Item = &Polynomial<T>> {
        self.constraints.iter().map(|c| &c.poly)
    }

    /// True when x satisfies every constraint.
    pub fn contains(&self, x: &[T]) -> bool {
        self.constraints
            .iter()
            .all(|c| c.poly.evaluate(x).map(|v| v >= T::zero()).unwrap_or(false))
    }

    /// Canonical text used for hashing and provenance.
    pub fn canonical_text(&self) -> String {
        use crate::parse::print_polynomial_exact;
        let mut s = String::new();
        s.push_str(&format!("system {}\nvars {}\n", self.name, self.vars.join(" ")));
        for (i, f) in self.field.components().iter().enumerate() {
            s.push_str(&format!("d{} = {}\n", self.vars[i], print_polynomial_exact(f, &self.vars)));
        }
        for c in &self.constraints {
            s.push_str(&format!("{}: {} >= 0\n", c.name, print_polynomial_exact(&c.poly, &self.vars)));
        }
        s
    }
}

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn parse_option_value<T: Scalar>(key: &str, value: &str, opts: &mut Options<T>) -> Result<(), ProblemError> {
    let bad = |what: &str| ProblemError::Invalid(format!("option `{key}`: {what} (got `{value}`)"));
    let as_u32 = || value.parse::<u32>().map_err(|_| bad("expected an integer"));
    let as_usize = || value.parse::<usize>().map_err(|_| bad("expected an integer"));
    let as_real = || {
        value
            .parse::<f64>()
            .map(real::<T>)
            .map_err(|_| bad("expected a number"))
    };
    let as_bool = || match value {
        "true" | "1" | "on" => Ok(true),
        "false" | "0" | "off" => Ok(false),
        _ => Err(bad("expected true/false")),
    };
    match key {
        "metric_degree" => opts.metric_degree = as_u32()?,
        "metric_degree_max" => opts.metric_degree_max = as_u32()?,
        "s_degree" => opts.s_degree = Some(as_u32()?),
        "p1_degree" => opts.p1_degree = Some(as_u32()?),
        "p2_degree" => opts.p2_degree = Some(as_u32()?),
        "sigma_degree" => opts.sigma_degree = Some(as_u32()?),
        "invariance_degree" => opts.invariance_degree = as_u32()?,
        "delta" => opts.delta = as_real()?,
        "metric_upper" => opts.metric_upper = as_real()?,
        "tol" => opts.tol = as_real()?,
        "max_iter" => opts.max_iter = as_usize()?,
        "box" => opts.box_halfwidth = as_real()?,
        "ball_radius" => opts.ball_radius = Some(as_real()?),
        "seed" => opts.seed = value.parse::<u64>().map_err(|_| bad("expected an integer"))?,
        "samples" => opts.samples = as_usize()?,
        "newton_reduction" => opts.newton_reduction = as_bool()?,
        _ => return Err(ProblemError::Invalid(format!("unknown option `{key}`"))),
    }
    Ok(())
}

/// Parses a problem file into a [`ProblemSpec`]. Structural validation
/// only; run [`validate`] afterwards for the region checks.
pub fn parse_problem<T: Scalar>(src: &str) -> Result<ProblemSpec<T>, ProblemError> {
    #[derive(PartialEq, Clone, Copy)]
    enum Section {
        None,
        Dynamics,
        Set,
        Options,
    }

    let mut name: Option<String> = None;
    let mut vars: Option<Vec<String>> = None;
    let mut dynamics: Vec<(String, Polynomial<T>, usize)> = Vec::new();
    let mut constraints: Vec<Constraint<T>> = Vec::new();
    let mut options = Options::default();
    let mut section = Section::None;
    let mut saw_dynamics = false;
    let mut saw_set = false;

    for (lineno, raw) in src.lines().enumerate() {
        let lineno = lineno + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let head = line.split_whitespace().next().unwrap();
        match head {
            "system" => {
                let rest = line["system".len()..].trim();
                if rest.is_empty() {
                    return Err(ProblemError::Invalid(format!("line {lineno}: `system` needs a name")));
                }
                name = Some(rest.to_string());
                section = Section::None;
            }
            "vars" => {
                let names: Vec<String> = line["vars".len()..]
                    .split_whitespace()
                    .map(str::to_string)
                    .collect();
                if names.is_empty() {
                    return Err(ProblemError::Invalid(format!("line {lineno}: `vars` needs at least one name")));
                }
                let mut seen = std::collections::HashSet::new();
                for v in &names {
                    if !seen.insert(v.clone()) {
                        return Err(ProblemError::Invalid(format!("line {lineno}: duplicate variable `{v}`")));
                    }
                }
                vars = Some(names);
                section = Section::None;
            }
            "dynamics" if line == "dynamics" => {
                section = Section::Dynamics;
                saw_dynamics = true;
            }
            "set" if line == "set" => {
                section = Section::Set;
                saw_set = true;
            }
            "options" if line == "options" => {
                section = Section::Options;
            }
            _ => match section {
                Section::Dynamics => {
                    let vars = vars
                        .as_ref()
                        .ok_or_else(|| ProblemError::Invalid(format!("line {lineno}: `dynamics` before `vars`")))?;
                    let (lhs, rhs) = line.split_once('=').ok_or_else(|| {
                        ProblemError::Invalid(format!("line {lineno}: expected `d<var> = <expr>`"))
                    })?;
                    let lhs = lhs.trim();
                    let var = lhs.strip_prefix('d').ok_or_else(|| {
                        ProblemError::Invalid(format!("line {lineno}: dynamics lines start with `d<var>`"))
                    })?;
                    if !vars.iter().any(|v| v == var) {
                        return Err(ProblemError::Invalid(format!(
                            "line {lineno}: `d{var}` does not match any declared variable"
                        )));
                    }
                    let poly = parse_polynomial_at(rhs.trim(), vars, lineno)?;
                    dynamics.push((var.to_string(), poly, lineno));
                }
                Section::Set => {
                    let vars = vars
                        .as_ref()
                        .ok_or_else(|| ProblemError::Invalid(format!("line {lineno}: `set` before `vars`")))?;
                    let (cname, rest) = line.split_once(':').ok_or_else(|| {
                        ProblemError::Invalid(format!("line {lineno}: expected `<name>: <expr> >= 0`"))
                    })?;
                    let rest = rest.trim();
                    let (expr, bound) = rest.split_once(">=").ok_or_else(|| {
                        ProblemError::Invalid(format!("line {lineno}: constraint must end with `>= 0`"))
                    })?;
                    if bound.trim() != "0" {
                        return Err(ProblemError::Invalid(format!(
                            "line {lineno}: constraint right-hand side must be 0"
                        )));
                    }
                    let poly = parse_polynomial_at(expr.trim(), vars, lineno)?;
                    constraints.push(Constraint { name: cname.trim().to_string(), poly });
                }
                Section::Options => {
                    let (key, value) = line.split_once('=').ok_or_else(|| {
                        ProblemError::Invalid(format!("line {lineno}: expected `key = value`"))
                    })?;
                    parse_option_value(key.trim(), value.trim(), &mut options)?;
                }
                Section::None => {
                    return Err(ProblemError::Invalid(format!(
                        "line {lineno}: `{head}` outside of any section"
                    )));
                }
            },
        }
    }

    let name = name.ok_or_else(|| ProblemError::MissingSection("system".into()))?;
    let vars = vars.ok_or_else(|| ProblemError::MissingSection("vars".into()))?;
    if !saw_dynamics {
        return Err(ProblemError::MissingSection("dynamics".into()));
    }
    if !saw_set {
        return Err(ProblemError::MissingSection("set".into()));
    }
    let n = vars.len();
    if n < 2 {
        return Err(ProblemError::Invalid(format!(
            "need at least 2 state variables, got {n}"
        )));
    }
    if constraints.is_empty() {
        return Err(ProblemError::Invalid("`set` section defines no constraints".into()));
    }

    // Every variable needs exactly one dynamics line.
    let mut by_var: HashMap<&str, &Polynomial<T>> = HashMap::new();
    for (v, p, lineno) in &dynamics {
        if by_var.insert(v.as_str(), p).is_some() {
            return Err(ProblemError::Invalid(format!(
                "line {lineno}: duplicate dynamics for `{v}`"
            )));
        }
    }
    let mut components = Vec::with_capacity(n);
    for v in &vars {
        let p = by_var
            .get(v.as_str())
            .ok_or_else(|| ProblemError::Invalid(format!("no dynamics line for `{v}`")))?;
        components.push((*p).clone());
    }
    let field = VectorField::new(components)
        .map_err(|e| ProblemError::Invalid(format!("dynamics arity inconsistency: {e}")))?;

    if options.metric_degree % 2 != 0 {
        return Err(ProblemError::Invalid(format!(
            "metric_degree must be even, got {}",
            options.metric_degree
        )));
    }
    if options.metric_degree_max < options.metric_degree {
        options.metric_degree_max = options.metric_degree;
    }

    Ok(ProblemSpec {
        name,
        vars,
        field,
        constraints,
        options,
        ball_scheduled: false,
        ball_added: false,
        bounding_box: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Number of deterministic sphere directions used by the compactness probe.
const COMPACTNESS_DIRECTIONS: usize = 2048;

/// Sufficient check that {q ≥ 0} is bounded: q has even degree and its
/// top-degree homogeneous part is negative on every sampled unit direction.
fn bounds_region<T: Scalar>(q: &Polynomial<T>, n: usize) -> bool {
    let deg = q.total_degree();
    if deg == 0 || deg % 2 != 0 {
        return false;
    }
    let top: Vec<(Vec<u32>, T)> = q
        .terms()
        .filter(|(m, _)| m.total_degree() == deg)
        .map(|(m, &c)| (m.exponents().to_vec(), c))
        .collect();
    let eval_top = |u: &[T]| {
        top.iter().fold(T::zero(), |acc, (exps, c)| {
            let mut t = *c;
            for (i, &e) in exps.iter().enumerate() {
                if e > 0 {
                    t = t * u[i].powi(e as i32);
                }
            }
            acc + t
        })
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xD12EC7105);
    let mut dirs: Vec<Vec<T>> = Vec::new();
    for i in 0..n {
        let mut e = vec![T::zero(); n];
        e[i] = T::one();
        dirs.push(e.clone());
        e[i] = -T::one();
        dirs.push(e);
    }
    for _ in 0..COMPACTNESS_DIRECTIONS {
        let mut u: Vec<T> = (0..n).map(|_| real::<T>(rng.gen_range(-1.0..1.0))).collect();
        let norm = u.iter().fold(T::zero(), |a, &v| a + v * v).sqrt();
        if norm < real(1e-6) {
            continue;
        }
        for v in &mut u {
            *v = *v / norm;
        }
        dirs.push(u);
    }
    dirs.iter().all(|u| eval_top(u) < T::zero())
}

/// Heuristic per-coordinate clip of the sampling box by constraints with
/// recognizable shape (axis-aligned halfspaces and diagonal balls).
fn clip_box<T: Scalar>(spec: &ProblemSpec<T>, b: T) -> Vec<(T, T)> {
    let n = spec.dim();
    let mut lo = vec![-b; n];
    let mut hi = vec![b; n];
    for c in &spec.constraints {
        let q = &c.poly;
        let deg = q.total_degree();
        if deg == 1 {
            // a·x + c0 ≥ 0 with a single nonzero coefficient: axis clip.
            let mut c0 = T::zero();
            let mut axis: Option<(usize, T)> = None;
            let mut simple = true;
            for (m, &coef) in q.terms() {
                if m.is_unit() {
                    c0 = coef;
                } else if m.total_degree() == 1 {
                    let i = m.exponents().iter().position(|&e| e == 1).unwrap();
                    if axis.is_some() {
                        simple = false;
                    }
                    axis = Some((i, coef));
                } else {
                    simple = false;
                }
            }
            if let (true, Some((i, a))) = (simple, axis) {
                let bound = -c0 / a;
                if a > T::zero() {
                    lo[i] = lo[i].max(bound);
                } else {
                    hi[i] = hi[i].min(bound);
                }
            }
        } else if deg == 2 {
            // c0 − Σ a_i x_i² ≥ 0 with all a_i > 0: per-coordinate clip.
            let mut c0 = T::zero();
            let mut diag: Vec<Option<T>> = vec![None; n];
            let mut simple = true;
            for (m, &coef) in q.terms() {
                if m.is_unit() {
                    c0 = coef;
                } else if m.total_degree() == 2 && m.exponents().iter().any(|&e| e == 2) {
                    let i = m.exponents().iter().position(|&e| e == 2).unwrap();
                    if coef < T::zero() {
                        diag[i] = Some(-coef);
                    } else {
                        simple = false;
                    }
                } else {
                    simple = false;
                }
            }
            if simple && c0 > T::zero() {
                for i in 0..n {
                    if let Some(a) = diag[i] {
                        let r = (c0 / a).sqrt();
                        lo[i] = lo[i].max(-r);
                        hi[i] = hi[i].min(r);
                    }
                }
            }
        }
    }
    lo.into_iter().zip(hi).collect()
}

/// Attempts before the region is declared empty.
pub const EMPTINESS_SAMPLES: usize = 1_000_000;

/// Region sanity checks: schedules a compactifying ball when needed and
/// confirms non-emptiness by rejection sampling in the bounding box.
pub fn validate<T: Scalar>(mut spec: ProblemSpec<T>) -> Result<ProblemSpec<T>, ProblemError> {
    let n = spec.dim();
    let compact = spec
        .constraints
        .iter()
        .any(|c| bounds_region(&c.poly, n));
    if !compact && !spec.ball_added {
        if spec.options.ball_radius.is_none() {
            spec.warnings.push(
                "no single constraint bounds the region; a ball constraint will be added".into(),
            );
        }
        spec.ball_scheduled = true;
    }

    let b = spec.options.ball_radius.unwrap_or(spec.options.box_halfwidth);
    spec.bounding_box = clip_box(&spec, b);
    if spec.bounding_box.iter().any(|&(lo, hi)| lo > hi) {
        return Err(ProblemError::EmptyRegion { samples: 0 });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.options.seed);
    let mut found = false;
    for _ in 0..EMPTINESS_SAMPLES {
        let x: Vec<T> = spec
            .bounding_box
            .iter()
            .map(|&(lo, hi)| {
                let t: f64 = rng.gen();
                lo + (hi - lo) * real::<T>(t)
            })
            .collect();
        if spec.contains(&x) {
            found = true;
            break;
        }
    }
    if !found {
        return Err(ProblemError::EmptyRegion { samples: EMPTINESS_SAMPLES });
    }
    Ok(spec)
}

/// Draws points uniformly from the region by rejection in its bounding box.
pub fn sample_region<T: Scalar>(
    spec: &ProblemSpec<T>,
    count: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vec<T>>, ProblemError> {
    assert!(!spec.bounding_box.is_empty(), "validate() must run first");
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let cap = EMPTINESS_SAMPLES.max(count * 1000);
    while out.len() < count {
        attempts += 1;
        if attempts > cap {
            return Err(ProblemError::EmptyRegion { samples: attempts });
        }
        let x: Vec<T> = spec
            .bounding_box
            .iter()
            .map(|&(lo, hi)| {
                let t: f64 = rng.gen();
                lo + (hi - lo) * real::<T>(t)
            })
            .collect();
        if spec.contains(&x) {
            out.push(x);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SHELL_3D: &str = "\
system unit_circle_3d
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

    #[test]
    fn parses_shell_example() {
        let spec: ProblemSpec<f64> = parse_problem(SHELL_3D).unwrap();
        assert_eq!(spec.dim(), 3);
        assert_eq!(spec.constraints.len(), 2);
        assert_eq!(spec.options.metric_degree, 6);
        assert_eq!(spec.name, "unit_circle_3d");
        // dz/dt at z = 0.7 is −0.7.
        let f3 = spec.field.component(2);
        assert_eq!(f3.evaluate(&[0.0, 0.0, 0.7]).unwrap(), -0.7);
    }

    #[test]
    fn missing_dynamics_names_section() {
        let src = "system t\nvars x y\nset\n q: 1 - x^2 - y^2 >= 0\n";
        match parse_problem::<f64>(src) {
            Err(ProblemError::MissingSection(s)) => assert_eq!(s, "dynamics"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn odd_metric_degree_rejected() {
        let src = "system t\nvars x y\ndynamics\n dx = -x\n dy = -y\nset\n q: 1 - x^2 - y^2 >= 0\noptions\n metric_degree = 5\n";
        match parse_problem::<f64>(src) {
            Err(ProblemError::Invalid(msg)) => assert!(msg.contains("must be even"), "{msg}"),
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn shell_is_compact_no_ball() {
        let spec: ProblemSpec<f64> = parse_problem(SHELL_3D).unwrap();
        let spec = validate(spec).unwrap();
        assert!(!spec.ball_scheduled);
        assert!(spec.warnings.is_empty());
        // Ball constraint q2 clips the box to ±1.5.
        for &(lo, hi) in &spec.bounding_box {
            assert!((lo + 1.5).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
        }
    }

    #[test]
    fn halfspace_needs_ball() {
        // Unbounded region: x ≥ 0 (2-D so the file parses).
        let src = "system t\nvars x y\ndynamics\n dx = -x\n dy = -y\nset\n q: x >= 0\n";
        let spec: ProblemSpec<f64> = parse_problem(src).unwrap();
        let spec = validate(spec).unwrap();
        assert!(spec.ball_scheduled);
        assert_eq!(spec.warnings.len(), 1);
        assert_eq!(spec.bounding_box[0], (0.0, 10.0));
        assert_eq!(spec.bounding_box[1], (-10.0, 10.0));
    }

    #[test]
    fn contradictory_constraints_are_empty() {
        let src = "system t\nvars x y\ndynamics\n dx = -x\n dy = -y\nset\n a: x - 1 >= 0\n b: 0 - x >= 0\n";
        let spec: ProblemSpec<f64> = parse_problem(src).unwrap();
        assert!(matches!(validate(spec), Err(ProblemError::EmptyRegion { .. })));
    }

    #[test]
    fn canonical_text_is_stable() {
        let spec: ProblemSpec<f64> = parse_problem(SHELL_3D).unwrap();
        assert_eq!(spec.canonical_text(), spec.clone().canonical_text());
        assert!(spec.canonical_text().contains("system unit_circle_3d"));
    }
}
