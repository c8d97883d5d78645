//! The six normal forms of metrics whose projective symmetries act transitively,
//! their Killing field, curvature fingerprints, and a procedure that tells any
//! two of them apart.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::expr::{parse, simplify, EvalError, Expr, ParamEnv};
use crate::geometry::{grad_norm_sq, laplacian, scalar_curvature, Domain, GeometryError, Metric2};
use crate::projective::VectorField;

/// Default probe abscissas for fingerprints.
pub const DEFAULT_PROBES: [f64; 4] = [0.3, 0.7, 1.1, 1.6];
/// Relative mismatch below which two numbers count as equal.
pub const MATCH_TOL: f64 = 1e-8;
/// Relative mismatch above which two numbers count as different.
pub const DISTINCT_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum CatalogError {
    #[error("unknown normal form `{0}`")]
    UnknownId(String),
    #[error("invalid parameter for {id}: {constraint} violated")]
    InvalidParameter { id: NormalFormId, constraint: String },
    #[error("missing parameter `{name}` for {id}")]
    MissingParameter { id: NormalFormId, name: String },
    #[error("unexpected parameter `{name}` for {id}")]
    UnexpectedParameter { id: NormalFormId, name: String },
    #[error("probe x = {0} lies outside the domain")]
    ProbeOutsideDomain(f64),
    #[error("indeterminate comparison: {0}")]
    Indeterminate(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NormalFormId {
    OneA,
    OneB,
    OneC,
    TwoA,
    TwoB,
    TwoC,
}

impl NormalFormId {
    pub const ALL: [NormalFormId; 6] = [
        NormalFormId::OneA,
        NormalFormId::OneB,
        NormalFormId::OneC,
        NormalFormId::TwoA,
        NormalFormId::TwoB,
        NormalFormId::TwoC,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NormalFormId::OneA => "1a",
            NormalFormId::OneB => "1b",
            NormalFormId::OneC => "1c",
            NormalFormId::TwoA => "2a",
            NormalFormId::TwoB => "2b",
            NormalFormId::TwoC => "2c",
        }
    }

    /// Dimension of the space of projective vector fields.
    pub fn projective_dimension(self) -> usize {
        match self {
            NormalFormId::OneA | NormalFormId::OneB | NormalFormId::OneC => 2,
            _ => 3,
        }
    }

    /// Parameter names in canonical order.
    pub fn parameter_names(self) -> &'static [&'static str] {
        match self {
            NormalFormId::OneA => &["b", "eps1", "eps2"],
            NormalFormId::OneB => &["a", "b", "eps1", "eps2"],
            NormalFormId::OneC => &["a", "eps"],
            NormalFormId::TwoA => &["eps1", "eps2"],
            NormalFormId::TwoB => &["a", "eps1", "eps2"],
            NormalFormId::TwoC => &["a", "c", "eps1", "eps2"],
        }
    }

    /// Components `(E, G)` with the parameters left symbolic.
    pub fn components(self) -> (Expr, Expr) {
        let (e, g) = match self {
            NormalFormId::OneA => ("eps1*exp((b+2)*x)", "eps2*exp(b*x)"),
            NormalFormId::OneB => (
                "a*exp((b+2)*x)/(exp(b*x)+eps2)^2",
                "a*eps1*exp(b*x)/(exp(b*x)+eps2)",
            ),
            NormalFormId::OneC => ("a*exp(2*x)/x^2", "a*eps/x"),
            NormalFormId::TwoA => ("eps1*exp(3*x)", "eps2*exp(x)"),
            NormalFormId::TwoB => (
                "a*exp(3*x)/(exp(x)+eps2)^2",
                "a*eps1*exp(x)/(exp(x)+eps2)",
            ),
            NormalFormId::TwoC => (
                "a/((c*x+2*x^2+eps2)^2*x)",
                "a*eps1*x/(c*x+2*x^2+eps2)",
            ),
        };
        (parse(e).expect("normal form"), parse(g).expect("normal form"))
    }

    /// Functions whose zero sets are singular for the form.
    pub fn excluded_loci(self) -> Vec<Expr> {
        let src: &[&str] = match self {
            NormalFormId::OneA | NormalFormId::TwoA => &[],
            NormalFormId::OneB => &["exp(b*x)+eps2"],
            NormalFormId::OneC => &["x"],
            NormalFormId::TwoB => &["exp(x)+eps2"],
            NormalFormId::TwoC => &["x", "c*x+2*x^2+eps2"],
        };
        src.iter().map(|s| parse(s).expect("locus")).collect()
    }
}

impl fmt::Display for NormalFormId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NormalFormId {
    type Err = CatalogError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        NormalFormId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.trim())
            .ok_or_else(|| CatalogError::UnknownId(s.to_string()))
    }
}

/// A normal form together with values for its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalFormParams {
    id: NormalFormId,
    values: Vec<f64>,
}

impl NormalFormParams {
    /// Validate and build. `values` follow [`NormalFormId::parameter_names`].
    pub fn new(id: NormalFormId, values: &[f64]) -> Result<Self, CatalogError> {
        let names = id.parameter_names();
        if values.len() != names.len() {
            let name = names.get(values.len()).copied().unwrap_or("?");
            return Err(CatalogError::MissingParameter {
                id,
                name: name.to_string(),
            });
        }
        let p = NormalFormParams {
            id,
            values: values.to_vec(),
        };
        p.validate()?;
        Ok(p)
    }

    /// Build from `name = value` pairs in any order.
    pub fn from_pairs(id: NormalFormId, pairs: &[(String, f64)]) -> Result<Self, CatalogError> {
        for (k, _) in pairs {
            if !id.parameter_names().contains(&k.as_str()) {
                return Err(CatalogError::UnexpectedParameter { id, name: k.clone() });
            }
        }
        let mut values = Vec::new();
        for name in id.parameter_names() {
            let v = pairs
                .iter()
                .rev()
                .find(|(k, _)| k == name)
                .map(|(_, v)| *v)
                .ok_or_else(|| CatalogError::MissingParameter {
                    id,
                    name: name.to_string(),
                })?;
            values.push(v);
        }
        NormalFormParams::new(id, &values)
    }

    pub fn one_a(b: f64, eps1: f64, eps2: f64) -> Result<Self, CatalogError> {
        NormalFormParams::new(NormalFormId::OneA, &[b, eps1, eps2])
    }

    pub fn one_b(a: f64, b: f64, eps1: f64, eps2: f64) -> Result<Self, CatalogError> {
        NormalFormParams::new(NormalFormId::OneB, &[a, b, eps1, eps2])
    }

    pub fn one_c(a: f64, eps: f64) -> Result<Self, CatalogError> {
        NormalFormParams::new(NormalFormId::OneC, &[a, eps])
    }

    pub fn two_a(eps1: f64, eps2: f64) -> Result<Self, CatalogError> {
        NormalFormParams::new(NormalFormId::TwoA, &[eps1, eps2])
    }

    pub fn two_b(a: f64, eps1: f64, eps2: f64) -> Result<Self, CatalogError> {
        NormalFormParams::new(NormalFormId::TwoB, &[a, eps1, eps2])
    }

    pub fn two_c(a: f64, c: f64, eps1: f64, eps2: f64) -> Result<Self, CatalogError> {
        NormalFormParams::new(NormalFormId::TwoC, &[a, c, eps1, eps2])
    }

    pub fn id(&self) -> NormalFormId {
        self.id
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.id
            .parameter_names()
            .iter()
            .position(|n| *n == name)
            .map(|i| self.values[i])
    }

    pub fn env(&self) -> ParamEnv {
        let mut env = ParamEnv::new();
        for (n, v) in self.id.parameter_names().iter().zip(&self.values) {
            env.set(n, *v);
        }
        env
    }

    fn validate(&self) -> Result<(), CatalogError> {
        let bad = |c: &str| {
            Err(CatalogError::InvalidParameter {
                id: self.id,
                constraint: c.to_string(),
            })
        };
        for (n, v) in self.id.parameter_names().iter().zip(&self.values) {
            if !v.is_finite() {
                return bad(&format!("{n} finite"));
            }
            if n.starts_with("eps") && *v != 1.0 && *v != -1.0 {
                return bad(&format!("{n} ∈ {{-1, 1}}"));
            }
        }
        if let Some(b) = self.get("b") {
            if b == -2.0 || b == 0.0 || b == 1.0 {
                return bad("b ∉ {-2, 0, 1}");
            }
        }
        if let Some(a) = self.get("a") {
            if self.id == NormalFormId::TwoC {
                if !(a > 0.0) {
                    return bad("a > 0");
                }
            } else if a == 0.0 {
                return bad("a ≠ 0");
            }
        }
        Ok(())
    }
}

impl fmt::Display for NormalFormParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.id)?;
        for (i, (n, v)) in self.id.parameter_names().iter().zip(&self.values).enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{n}={v}")?;
        }
        write!(f, ")")
    }
}

/// Default sampling domain of the catalog.
pub fn default_domain() -> Domain {
    Domain::rect(0.25, 1.75, -1.0, 1.0)
}

/// The metric of a normal form on the default domain.
pub fn instantiate(p: &NormalFormParams) -> Result<Metric2, CatalogError> {
    instantiate_on(p, default_domain())
}

/// The metric of a normal form on a given rectangle; the form's singular
/// loci are excluded automatically.
pub fn instantiate_on(p: &NormalFormParams, domain: Domain) -> Result<Metric2, CatalogError> {
    let (e, g) = p.id.components();
    let mut domain = domain;
    domain.exclude.extend(p.id.excluded_loci());
    Ok(Metric2::diagonal(e, g, p.env(), domain)?)
}

/// `∂/∂y`, a Killing field of every normal form.
pub fn killing_field(_id: NormalFormId) -> VectorField {
    VectorField::new(Expr::zero(), Expr::one())
}

/// Components `(L_K g)_11, (L_K g)_12, (L_K g)_22` of the Lie derivative of `g`.
pub fn killing_equations(g: &Metric2, k: &VectorField) -> [Expr; 3] {
    let comps = [&k.z1, &k.z2];
    let d = |e: &Expr, i: usize| if i == 0 { e.dx() } else { e.dy() };
    let entry = |i: usize, j: usize| {
        let mut terms = vec![&k.z1 * g.component(i, j).dx() + &k.z2 * g.component(i, j).dy()];
        for m in 0..2 {
            terms.push(g.component(m, j) * d(comps[m], i));
            terms.push(g.component(i, m) * d(comps[m], j));
        }
        simplify(&Expr::sum(terms))
    };
    [entry(0, 0), entry(0, 1), entry(1, 1)]
}

/// Maximum absolute value of the Killing equations over the points.
pub fn killing_residual(g: &Metric2, k: &VectorField, points: &[(f64, f64)]) -> Result<f64, EvalError> {
    crate::geometry::max_abs(&killing_equations(g, k), points, &g.env)
}

/// Curvature invariants of a normal form: `R`, `I = |∇R|^2` and `ΔR`.
#[derive(Clone, Debug)]
pub struct Fingerprint {
    pub params: NormalFormParams,
    pub r: Expr,
    pub i: Expr,
    pub delta_r: Expr,
    /// `(x, [R, I, ΔR])` at each probe (y = 0).
    pub probes: Vec<(f64, [f64; 3])>,
    /// For (2c): the values `(R, ΔR)` at the distinguished point `x = 0`.
    pub origin: Option<(f64, f64)>,
}

impl Fingerprint {
    pub fn eval_at(&self, x: f64) -> Result<[f64; 3], EvalError> {
        let env = self.params.env();
        Ok([
            self.r.eval((x, 0.0), &env)?,
            self.i.eval((x, 0.0), &env)?,
            self.delta_r.eval((x, 0.0), &env)?,
        ])
    }
}

/// Compute the fingerprint at the probe abscissas.
pub fn fingerprint(p: &NormalFormParams, probes: &[f64]) -> Result<Fingerprint, CatalogError> {
    let g = instantiate(p)?.bound();
    let r = simplify(&scalar_curvature(&g));
    let i = simplify(&grad_norm_sq(&g, &r));
    let delta_r = simplify(&laplacian(&g, &r));
    let mut fp = Fingerprint {
        params: p.clone(),
        r,
        i,
        delta_r,
        probes: Vec::new(),
        origin: None,
    };
    for &x in probes {
        if !g.domain.admits((x, 0.0), &g.env) {
            return Err(CatalogError::ProbeOutsideDomain(x));
        }
        let v = fp.eval_at(x)?;
        fp.probes.push((x, v));
    }
    if p.id == NormalFormId::TwoC {
        let env = p.env();
        let radius = origin_radius(p);
        let r0 = limit_at(|x| fp.r.eval((x, 0.0), &env), 0.0, radius)?;
        let d0 = limit_at(|x| fp.delta_r.eval((x, 0.0), &env), 0.0, radius)?;
        fp.origin = Some((r0, d0));
    }
    Ok(fp)
}

/// Half-width of the interpolation window around `x = 0` for (2c): a quarter of
/// the distance to the nearest root of `c x + 2x^2 + ε2`, at most 0.1.
fn origin_radius(p: &NormalFormParams) -> f64 {
    let c = p.get("c").unwrap_or(0.0);
    let e2 = p.get("eps2").unwrap_or(1.0);
    let disc = c * c - 8.0 * e2;
    let rho = if disc < 0.0 {
        f64::INFINITY
    } else {
        let s = disc.sqrt();
        ((-c + s) / 4.0).abs().min(((-c - s) / 4.0).abs())
    };
    (rho / 4.0).min(0.1)
}

/// Value at `x0` of a function with a removable singularity there, via
/// barycentric interpolation on 16 Chebyshev nodes in `[x0 − r, x0 + r]`.
/// The node set never contains `x0` itself.
pub fn limit_at<F>(f: F, x0: f64, radius: f64) -> Result<f64, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    const N: usize = 16;
    let mut num = 0.0;
    let mut den = 0.0;
    for k in 0..N {
        let theta = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * N) as f64;
        let xk = x0 + radius * theta.cos();
        let wk = if k % 2 == 0 { theta.sin() } else { -theta.sin() };
        let t = wk / (x0 - xk);
        num += t * f(xk)?;
        den += t;
    }
    Ok(num / den)
}

/// Outcome of comparing two normal forms.
#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    Identical,
    Distinct { witness: String },
    /// Same normal form and no invariant separates the parameters.
    SameFamily,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Identical => write!(f, "identical"),
            Verdict::Distinct { witness } => write!(f, "distinct: {witness}"),
            Verdict::SameFamily => write!(f, "same-family"),
        }
    }
}

fn distinct(w: &str) -> Verdict {
    Verdict::Distinct {
        witness: w.to_string(),
    }
}

/// Conjugacy type of the Killing field inside `sl(2, R)` for the 3-dimensional forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KillingType {
    X,
    Y,
    Z,
}

pub fn killing_type(p: &NormalFormParams) -> Option<KillingType> {
    match p.id {
        NormalFormId::TwoA | NormalFormId::TwoB => Some(KillingType::X),
        NormalFormId::TwoC => {
            let s = p.get("eps1")? * p.get("eps2")?;
            Some(if s < 0.0 { KillingType::Y } else { KillingType::Z })
        }
        _ => None,
    }
}

/// Relative mismatch of two values.
fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

/// Three-way classification of a relative mismatch.
fn compare(label: &str, diff: f64) -> Result<bool, CatalogError> {
    if diff <= MATCH_TOL {
        Ok(true)
    } else if diff > DISTINCT_TOL || diff.is_nan() {
        Ok(false)
    } else {
        Err(CatalogError::Indeterminate(format!("{label}: relative mismatch {diff:e}")))
    }
}

/// Sample abscissas for invariant comparisons.
fn fit_points() -> Vec<f64> {
    (0..8).map(|k| 0.3 + 1.3 * k as f64 / 7.0).collect()
}

/// Whether `I / (9R^3) ≡ 1` on the probe set.
fn unit_ratio(fp: &Fingerprint) -> Result<bool, CatalogError> {
    let mut worst: f64 = 0.0;
    for x in fit_points() {
        let [r, i, _] = fp.eval_at(x)?;
        worst = worst.max(rel_diff(i / (9.0 * r * r * r), 1.0));
    }
    compare("I/(9R^3)", worst)
}

/// Smallest relative residual of `R_A(x + x0) − R_B(x)` over shifts `x0 ∈ [−3, 3]`,
/// and the minimizing shift.
pub fn translation_fit(ra: &Expr, env_a: &ParamEnv, rb: &Expr, env_b: &ParamEnv) -> Result<(f64, f64), CatalogError> {
    let xs = fit_points();
    let target: Vec<f64> = xs
        .iter()
        .map(|&x| rb.eval((x, 0.0), env_b))
        .collect::<Result<_, _>>()?;
    let scale = target.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    let residual = |x0: f64| -> f64 {
        let mut worst: f64 = 0.0;
        for (x, t) in xs.iter().zip(&target) {
            match ra.eval((x + x0, 0.0), env_a) {
                Ok(v) if v.is_finite() => worst = worst.max((v - t).abs() / scale),
                _ => return f64::INFINITY,
            }
        }
        worst
    };
    let step = 0.01;
    let mut candidates: Vec<(f64, f64)> = (0..=600)
        .map(|k| {
            let x0 = -3.0 + step * k as f64;
            (residual(x0), x0)
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = (f64::INFINITY, 0.0);
    for &(_, c) in candidates.iter().take(3) {
        // Golden-section refinement on the bracket around the grid candidate.
        let (mut lo, mut hi) = (c - step, c + step);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut m1 = hi - g * (hi - lo);
        let mut m2 = lo + g * (hi - lo);
        let (mut f1, mut f2) = (residual(m1), residual(m2));
        for _ in 0..200 {
            if f1 <= f2 {
                hi = m2;
                m2 = m1;
                f2 = f1;
                m1 = hi - g * (hi - lo);
                f1 = residual(m1);
            } else {
                lo = m1;
                m1 = m2;
                f1 = f2;
                m2 = lo + g * (hi - lo);
                f2 = residual(m2);
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let x0 = 0.5 * (lo + hi);
        let f = residual(x0).min(residual(c));
        if f < best.0 {
            best = (f, x0);
        }
    }
    Ok(best)
}

/// Sign of `det g` and of `g(K, K)` at a point.
fn signs(g: &Metric2, x: f64) -> Result<(f64, f64), EvalError> {
    let m = g.matrix_at((x, 0.0))?;
    let det = m[0][0] * m[1][1] - m[0][1] * m[0][1];
    Ok((det.signum(), m[1][1].signum()))
}

/// Decide whether two normal forms can be isometric, following the chain of
/// invariants: projective dimension, Killing type, `I/(9R^3)`, the (2c)
/// point `x = 0`, curvature up to translation in `x`, signature and the sign
/// of the Killing field's squared length.
pub fn distinguish(a: &NormalFormParams, b: &NormalFormParams) -> Result<Verdict, CatalogError> {
    if a == b {
        return Ok(Verdict::Identical);
    }
    if a.id.projective_dimension() != b.id.projective_dimension() {
        return Ok(distinct("dim p"));
    }
    if killing_type(a) != killing_type(b) {
        return Ok(distinct("Killing type"));
    }
    distinguish_with(&fingerprint(a, &[])?, &fingerprint(b, &[])?)
}

/// [`distinguish`] with precomputed fingerprints.
pub fn distinguish_with(fa: &Fingerprint, fb: &Fingerprint) -> Result<Verdict, CatalogError> {
    let (a, b) = (&fa.params, &fb.params);
    if a == b {
        return Ok(Verdict::Identical);
    }
    if a.id.projective_dimension() != b.id.projective_dimension() {
        return Ok(distinct("dim p"));
    }
    if killing_type(a) != killing_type(b) {
        return Ok(distinct("Killing type"));
    }
    let (ea, eb) = (a.env(), b.env());
    let ga = instantiate(a)?;
    let gb = instantiate(b)?;
    // x0 with R_A(x + x0) = R_B(x), once fitted.
    let mut shift = 0.0;
    if a.id.projective_dimension() == 3
        && (a.id != NormalFormId::TwoC || b.id != NormalFormId::TwoC)
        && unit_ratio(fa)? != unit_ratio(fb)?
    {
        return Ok(distinct("I/(9R^3)"));
    }
    if a.id == NormalFormId::TwoC && b.id == NormalFormId::TwoC {
        let (ra, da) = fa.origin.expect("origin values");
        let (rb, db) = fb.origin.expect("origin values");
        let scale = ra.abs().max(rb.abs()).max(da.abs()).max(db.abs());
        if !compare("R at x=0", (ra - rb).abs() / scale)? {
            return Ok(distinct("R at x=0"));
        }
        if !compare("Delta R at x=0", rel_diff(da, db))? {
            return Ok(distinct("Delta R at x=0"));
        }
    } else {
        let (fit, x0) = translation_fit(&fa.r, &ea, &fb.r, &eb)?;
        if !compare("R up to translation", fit)? {
            return Ok(distinct("R up to translation"));
        }
        shift = x0;
    }
    for x in fit_points() {
        let (sa, ka) = signs(&ga, x + shift)?;
        let (sb, kb) = signs(&gb, x)?;
        if sa != sb {
            return Ok(distinct("signature"));
        }
        if ka != kb {
            return Ok(distinct("Killing length sign"));
        }
    }
    if a.id == b.id {
        Ok(Verdict::SameFamily)
    } else {
        Err(CatalogError::Indeterminate(format!(
            "no invariant separates {a} and {b}"
        )))
    }
}
