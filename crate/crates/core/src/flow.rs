//! Geodesic flow and the checks built on it: conservation of quadratic
//! integrals, projective equivalence of two metrics, the Knebelman map, the
//! map `F ↦ Z_F`, transfer of integrals, and the superintegrable examples.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::killing_residual;
use crate::expr::{parse, simplify, EvalError, Expr, ParamEnv};
use crate::geometry::{christoffel, Domain, GeometryError, Metric2, DEFAULT_SAMPLES};
use crate::liouville::QuadraticForm;
use crate::projective::VectorField;
use crate::scalar::Scalar;

/// Default integration step.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Drift below which a function counts as conserved.
pub const CONSERVATION_TOL: f64 = 1e-6;
/// Tolerance on the Killing equations used as a precondition.
pub const KILLING_TOL: f64 = 1e-6;
/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 20_080_801;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum FlowError {
    #[error("invalid initial state: {0}")]
    InvalidState(String),
    #[error("initial point ({x}, {y}) lies outside the domain")]
    OutsideDomain { x: f64, y: f64 },
    #[error("integration step failed at t = {t} near ({x}, {y})")]
    StepFailure { t: f64, x: f64, y: f64 },
    #[error("metrics are not projectively equivalent (drift {drift:e})")]
    NotEquivalent { drift: f64 },
    #[error("vector field is not a Killing field (residual {residual:e})")]
    NotKilling { residual: f64 },
    #[error("`{label}` is not an integral of the geodesic flow (drift {drift:e})")]
    NotIntegral { label: String, drift: f64 },
    #[error("parameter D must be nonzero")]
    ZeroParameter,
    #[error("the two domains do not overlap")]
    EmptyDomain,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A point of the tangent bundle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeodesicState<T: Scalar> {
    pub x: T,
    pub y: T,
    pub vx: T,
    pub vy: T,
}

impl<T: Scalar> GeodesicState<T> {
    pub fn new(x: T, y: T, vx: T, vy: T) -> Result<Self, FlowError> {
        let s = GeodesicState { x, y, vx, vy };
        if !(x.is_finite() && y.is_finite() && vx.is_finite() && vy.is_finite()) {
            return Err(FlowError::InvalidState("non-finite component".into()));
        }
        if vx == T::zero() && vy == T::zero() {
            return Err(FlowError::InvalidState("zero velocity".into()));
        }
        Ok(s)
    }

    pub fn point(&self) -> (f64, f64) {
        (self.x.to_f64_lossy(), self.y.to_f64_lossy())
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.vx.to_f64_lossy(), self.vy.to_f64_lossy())
    }

    fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.vx.is_finite() && self.vy.is_finite()
    }

    fn axpy(&self, h: T, d: &[T; 4]) -> Self {
        GeodesicState {
            x: self.x + h * d[0],
            y: self.y + h * d[1],
            vx: self.vx + h * d[2],
            vy: self.vy + h * d[3],
        }
    }
}

/// Geodesic equations of a metric with parameters bound and symbols simplified.
#[derive(Clone, Debug)]
pub struct GeodesicFlow {
    gamma: [Expr; 6],
    env: ParamEnv,
    domain: Domain,
}

impl GeodesicFlow {
    pub fn new(g: &Metric2) -> Self {
        let gamma = christoffel(g)
            .components()
            .map(|c| simplify(&c.bind(&g.env)));
        GeodesicFlow {
            gamma,
            env: g.env.clone(),
            domain: g.domain.clone(),
        }
    }

    /// `(ẋ, ẏ, −Γ^1_jk v^j v^k, −Γ^2_jk v^j v^k)`.
    pub fn rhs<T: Scalar>(&self, s: &GeodesicState<T>) -> Result<[T; 4], EvalError> {
        let mut c = [T::zero(); 6];
        for (slot, e) in c.iter_mut().zip(&self.gamma) {
            *slot = e.eval_as(s.x, s.y, &self.env)?;
        }
        let two = T::from_f64_lossy(2.0);
        let quad = |a: T, b: T, d: T| a * s.vx * s.vx + two * b * s.vx * s.vy + d * s.vy * s.vy;
        Ok([s.vx, s.vy, -quad(c[0], c[1], c[2]), -quad(c[3], c[4], c[5])])
    }

    /// One classical fourth-order Runge-Kutta step.
    pub fn step<T: Scalar>(&self, s: &GeodesicState<T>, h: T) -> Result<GeodesicState<T>, EvalError> {
        let half = h / T::from_f64_lossy(2.0);
        let k1 = self.rhs(s)?;
        let k2 = self.rhs(&s.axpy(half, &k1))?;
        let k3 = self.rhs(&s.axpy(half, &k2))?;
        let k4 = self.rhs(&s.axpy(h, &k3))?;
        let sixth = h / T::from_f64_lossy(6.0);
        let two = T::from_f64_lossy(2.0);
        let mut d = [T::zero(); 4];
        for i in 0..4 {
            d[i] = k1[i] + two * k2[i] + two * k3[i] + k4[i];
        }
        Ok(s.axpy(sixth, &d))
    }
}

/// States of a geodesic on a uniform time grid.
#[derive(Clone, Debug)]
pub struct Trajectory<T: Scalar> {
    pub step: f64,
    pub times: Vec<f64>,
    pub states: Vec<GeodesicState<T>>,
    /// Requested end time.
    pub t_end: f64,
    /// Set when the curve left the domain before `t_end`; only the part inside is kept.
    pub truncated: bool,
    /// Maximum relative drift of `g(ξ, ξ)` over the retained part.
    pub energy_drift: f64,
    pub env: ParamEnv,
}

impl<T: Scalar> Trajectory<T> {
    pub fn final_state(&self) -> &GeodesicState<T> {
        self.states.last().expect("nonempty trajectory")
    }

    /// Time actually covered.
    pub fn duration(&self) -> f64 {
        *self.times.last().unwrap_or(&0.0)
    }
}

/// Integrate the geodesic through `s0` up to time `t_end` with fixed step `h`.
pub fn integrate_geodesic<T: Scalar>(
    g: &Metric2,
    s0: GeodesicState<T>,
    t_end: f64,
    h: f64,
) -> Result<Trajectory<T>, FlowError> {
    integrate_with(&GeodesicFlow::new(g), g, s0, t_end, h)
}

fn integrate_with<T: Scalar>(
    flow: &GeodesicFlow,
    g: &Metric2,
    s0: GeodesicState<T>,
    t_end: f64,
    h: f64,
) -> Result<Trajectory<T>, FlowError> {
    if !(h > 0.0 && t_end >= 0.0) {
        return Err(FlowError::InvalidState(format!("step {h} and end time {t_end}")));
    }
    let s0 = GeodesicState::new(s0.x, s0.y, s0.vx, s0.vy)?;
    let check = flow.domain.checker();
    let (x0, y0) = s0.point();
    if !check.admits((x0, y0), &flow.env) {
        return Err(FlowError::OutsideDomain { x: x0, y: y0 });
    }
    let n = (t_end / h).round() as usize;
    let mut times = vec![0.0];
    let mut states = vec![s0];
    let mut truncated = false;
    let ht = T::from_f64_lossy(h);
    for i in 1..=n {
        let prev = states.last().expect("nonempty");
        let t = i as f64 * h;
        let next = match flow.step(prev, ht) {
            Ok(s) if s.is_finite() => s,
            _ => {
                let (x, y) = prev.point();
                return Err(FlowError::StepFailure { t, x, y });
            }
        };
        if !check.admits(next.point(), &flow.env) {
            truncated = true;
            break;
        }
        times.push(t);
        states.push(next);
    }
    let mut tr = Trajectory {
        step: h,
        times,
        states,
        t_end,
        truncated,
        energy_drift: 0.0,
        env: g.env.clone(),
    };
    tr.energy_drift = integral_drift(&tr, &QuadraticForm::of_metric(g))?;
    Ok(tr)
}

/// Values of `F` along the trajectory.
pub fn integral_values<T: Scalar>(tr: &Trajectory<T>, f: &QuadraticForm) -> Result<Vec<f64>, EvalError> {
    tr.states
        .iter()
        .map(|s| f.value(s.point(), s.velocity(), &tr.env))
        .collect()
}

/// `max_t |F(ξ(t)) − F(ξ(0))| / |F(ξ(0))|` over the trajectory.
pub fn integral_drift<T: Scalar>(tr: &Trajectory<T>, f: &QuadraticForm) -> Result<f64, EvalError> {
    let values = integral_values(tr, f)?;
    let f0 = values[0];
    Ok(values
        .iter()
        .map(|v| (v - f0).abs() / (f0.abs() + 1e-300))
        .fold(0.0, f64::max))
}

/// Labelled quadratic functions on the tangent bundle.
#[derive(Clone, Debug, Default)]
pub struct QuadraticIntegralSet {
    pub items: Vec<(String, QuadraticForm)>,
}

impl QuadraticIntegralSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, label: &str, f: QuadraticForm) -> Self {
        self.items.push((label.to_string(), f));
        self
    }

    pub fn get(&self, label: &str) -> Option<&QuadraticForm> {
        self.items.iter().find(|(l, _)| l == label).map(|(_, f)| f)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.items.iter().map(|(l, _)| l.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Settings shared by the drift-based checks.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub trials: usize,
    pub t_end: f64,
    pub step: f64,
    pub seed: u64,
    /// Euclidean length of the initial velocities.
    pub speed: f64,
    pub tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            trials: 5,
            t_end: 3.0,
            step: DEFAULT_STEP,
            seed: DEFAULT_SEED,
            speed: 0.5,
            tol: CONSERVATION_TOL,
        }
    }
}

/// `n` random initial states in the domain of `g`, reproducible from `seed`.
pub fn random_states(g: &Metric2, n: usize, seed: u64, speed: f64) -> Vec<GeodesicState<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let check = g.domain.checker();
    let (x0, x1) = g.domain.x;
    let (y0, y1) = g.domain.y;
    // Keep seeds off the boundary so short trajectories stay inside.
    let (mx, my) = ((x1 - x0) * 0.2, (y1 - y0) * 0.2);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 1000 * (n + 1) {
        attempts += 1;
        let p = (rng.gen_range(x0 + mx..=x1 - mx), rng.gen_range(y0 + my..=y1 - my));
        let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
        if !check.admits(p, &g.env) {
            continue;
        }
        out.push(GeodesicState {
            x: p.0,
            y: p.1,
            vx: speed * theta.cos(),
            vy: speed * theta.sin(),
        });
    }
    out
}

/// Drift of one quadratic function along several seeded geodesics.
#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub max_drift: f64,
    pub drifts: Vec<f64>,
    /// Time covered by each trajectory.
    pub durations: Vec<f64>,
    pub seed: u64,
}

impl DriftReport {
    pub fn conserved(&self, tol: f64) -> bool {
        self.max_drift <= tol
    }
}

/// Drift of each function in `fs` along `opts.trials` seeded geodesics of `g`.
pub fn drift_suite(g: &Metric2, fs: &[&QuadraticForm], opts: &FlowOptions) -> Result<Vec<DriftReport>, FlowError> {
    let flow = GeodesicFlow::new(g);
    let mut reports: Vec<DriftReport> = fs
        .iter()
        .map(|_| DriftReport {
            max_drift: 0.0,
            drifts: Vec::new(),
            durations: Vec::new(),
            seed: opts.seed,
        })
        .collect();
    for s0 in random_states(g, opts.trials, opts.seed, opts.speed) {
        let tr = integrate_with(&flow, g, s0, opts.t_end, opts.step)?;
        for (rep, f) in reports.iter_mut().zip(fs) {
            let d = integral_drift(&tr, f)?;
            rep.max_drift = rep.max_drift.max(d);
            rep.drifts.push(d);
            rep.durations.push(tr.duration());
        }
    }
    Ok(reports)
}

/// Rectangle intersection with the excluded loci of both domains.
fn common_domain(a: &Domain, b: &Domain) -> Result<Domain, FlowError> {
    let x = (a.x.0.max(b.x.0), a.x.1.min(b.x.1));
    let y = (a.y.0.max(b.y.0), a.y.1.min(b.y.1));
    if x.0 >= x.1 || y.0 >= y.1 {
        return Err(FlowError::EmptyDomain);
    }
    let mut d = Domain::rect(x.0, x.1, y.0, y.1);
    d.exclude = a.exclude.iter().chain(&b.exclude).cloned().collect();
    Ok(d)
}

/// `g` and `ḡ` with parameters bound, both on the common domain.
fn common_pair(g: &Metric2, gbar: &Metric2) -> Result<(Metric2, Metric2), FlowError> {
    let domain = common_domain(&g.domain, &gbar.domain)?;
    let mut a = g.bound();
    let mut b = gbar.bound();
    a.domain = domain.clone();
    b.domain = domain;
    Ok((a, b))
}

/// `I(ξ) = ḡ(ξ, ξ) (det g / det ḡ)^{2/3}`, an integral of `g` exactly when
/// the two metrics share their geodesics.
pub fn equivalence_integral(g: &Metric2, gbar: &Metric2) -> QuadraticForm {
    let factor = (g.det() / gbar.det()).pow_rat(2, 3);
    QuadraticForm::of_metric(gbar).scaled(&factor)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub drift: DriftReport,
}

/// Test projective equivalence of `g` and `ḡ` by the conservation of
/// [`equivalence_integral`] along geodesics of `g`.
pub fn projective_equivalence_check(g: &Metric2, gbar: &Metric2, opts: &FlowOptions) -> Result<EquivalenceReport, FlowError> {
    let (a, b) = common_pair(g, gbar)?;
    let integral = equivalence_integral(&a, &b);
    let drift = drift_suite(&a, &[&integral], opts)?.remove(0);
    Ok(EquivalenceReport {
        equivalent: drift.conserved(opts.tol),
        drift,
    })
}

fn require_killing(g: &Metric2, k: &VectorField) -> Result<(), FlowError> {
    let residual = killing_residual(g, k, &g.samples(DEFAULT_SAMPLES))?;
    if residual > KILLING_TOL {
        return Err(FlowError::NotKilling { residual });
    }
    Ok(())
}

fn require_equivalent(g: &Metric2, gbar: &Metric2, opts: &FlowOptions) -> Result<(), FlowError> {
    let rep = projective_equivalence_check(g, gbar, opts)?;
    if !rep.equivalent {
        return Err(FlowError::NotEquivalent {
            drift: rep.drift.max_drift,
        });
    }
    Ok(())
}

fn require_integral(g: &Metric2, label: &str, f: &QuadraticForm, opts: &FlowOptions) -> Result<(), FlowError> {
    let drift = drift_suite(g, &[f], opts)?.remove(0).max_drift;
    if drift > opts.tol {
        return Err(FlowError::NotIntegral {
            label: label.to_string(),
            drift,
        });
    }
    Ok(())
}

/// `g(K, ·)` as a pair of expressions.
fn lower(g: &Metric2, k: &VectorField) -> (Expr, Expr) {
    (
        &g.e * &k.z1 + &g.f * &k.z2,
        &g.f * &k.z1 + &g.g * &k.z2,
    )
}

/// `K̄ = (det ḡ / det g)^{1/3} ḡ^{-1} g(K)` without precondition checks.
pub fn knebelman_field(g: &Metric2, gbar: &Metric2, k: &VectorField) -> VectorField {
    let (w1, w2) = lower(g, k);
    let inv = gbar.inverse();
    let s = (gbar.det() / g.det()).pow_rat(1, 3);
    VectorField::new(
        simplify(&(&s * (&inv[0] * &w1 + &inv[1] * &w2))),
        simplify(&(&s * (&inv[1] * &w1 + &inv[2] * &w2))),
    )
}

/// Image of a Killing field of `g` under projective equivalence: a Killing field of `ḡ`.
pub fn knebelman_map(g: &Metric2, gbar: &Metric2, k: &VectorField, opts: &FlowOptions) -> Result<VectorField, FlowError> {
    require_killing(g, k)?;
    require_equivalent(g, gbar, opts)?;
    let (a, b) = common_pair(g, gbar)?;
    Ok(knebelman_field(&a, &b, &k.bind(&g.env)))
}

/// `Z_F = (det f / det g) f^{-1} g(K) = adj(f) g(K) / det g` without precondition checks.
pub fn zf_field(g: &Metric2, k: &VectorField, f: &QuadraticForm) -> VectorField {
    let (w1, w2) = lower(g, k);
    let det = g.det();
    VectorField::new(
        simplify(&((&f.a22 * &w1 - &f.a12 * &w2) / &det)),
        simplify(&((&f.a11 * &w2 - &f.a12 * &w1) / &det)),
    )
}

/// Projective vector field attached to a quadratic integral `F` of a metric with Killing field `K`.
pub fn zf_map(g: &Metric2, k: &VectorField, f: &QuadraticForm, opts: &FlowOptions) -> Result<VectorField, FlowError> {
    require_killing(g, k)?;
    require_integral(g, "F", f, opts)?;
    Ok(zf_field(g, k, f))
}

/// `F_K = g(K, ·)^2`, which spans the kernel of `F ↦ Z_F`.
pub fn killing_square(g: &Metric2, k: &VectorField) -> QuadraticForm {
    let (w1, w2) = lower(g, k);
    QuadraticForm::new(
        simplify(&(&w1 * &w1)),
        simplify(&(&w1 * &w2)),
        simplify(&(&w2 * &w2)),
    )
}

/// `h ↦ (det ḡ / det g)^{2/3} h`, carrying integrals of `g` to integrals of `ḡ`.
pub fn transfer_integral(g: &Metric2, gbar: &Metric2, h: &QuadraticForm, opts: &FlowOptions) -> Result<QuadraticForm, FlowError> {
    require_equivalent(g, gbar, opts)?;
    let (a, b) = common_pair(g, gbar)?;
    let h = h.bind(&g.env);
    require_integral(&a, "h", &h, opts)?;
    Ok(transfer_form(&a, &b, &h))
}

/// The formula of [`transfer_integral`] without checks.
pub fn transfer_form(g: &Metric2, gbar: &Metric2, h: &QuadraticForm) -> QuadraticForm {
    h.scaled(&(gbar.det() / g.det()).pow_rat(2, 3))
}

fn form(a11: &str, a12: &str, a22: &str) -> QuadraticForm {
    let p = |s: &str| parse(s).expect("built-in integral");
    QuadraticForm::new(p(a11), p(a12), p(a22))
}

/// Metric `e^{3x} dx^2 − 2D e^x dy^2` with its four quadratic integrals
/// `H = g/2`, `F1`, `F2`, `F3`. The forms use the parameter `D`.
pub fn superintegrable_suite(d: f64) -> Result<(Metric2, QuadraticIntegralSet), FlowError> {
    if d == 0.0 {
        return Err(FlowError::ZeroParameter);
    }
    let env = ParamEnv::new().with("D", d);
    let g = Metric2::diagonal(
        parse("exp(3*x)").expect("metric"),
        parse("-2*D*exp(x)").expect("metric"),
        env,
        Domain::rect(-1.0, 1.0, -1.5, 1.5),
    )?;
    let set = QuadraticIntegralSet::new()
        .with("H", form("exp(3*x)/2", "0", "-D*exp(x)"))
        .with("F1", form("0", "0", "exp(2*x)"))
        .with("F2", form("y*exp(3*x)/2", "-exp(3*x)/2", "-D*y*exp(x)"))
        .with(
            "F3",
            form("y^2*exp(3*x)/2", "-y*exp(3*x)", "-D*y^2*exp(x) + 2*exp(3*x)"),
        );
    Ok((g, set))
}

/// The metric `(4x^2 + y^2 + 1)(dx^2 + dy^2)` with three quadratic integrals;
/// it has no Killing field.
pub fn koenigs_suite() -> (Metric2, QuadraticIntegralSet) {
    let w = "(4*x^2 + y^2 + 1)";
    let g = Metric2::diagonal(
        parse(w).expect("metric"),
        parse(w).expect("metric"),
        ParamEnv::new(),
        Domain::rect(-1.5, 1.5, -1.5, 1.5),
    )
    .expect("positive definite");
    let set = QuadraticIntegralSet::new()
        .with("F0", form(w, "0", w))
        .with("F1", form(&format!("{w}*y^2"), "0", &format!("-{w}*(4*x^2 + 1)")))
        .with(
            "F2",
            form(
                &format!("{w}*x*y^2"),
                &format!("-{w}^2*y/2"),
                &format!("{w}*x*y^2 + {w}^2*x"),
            ),
        );
    (g, set)
}

/// Rank of the matrix of values of the forms at `n` random tangent vectors.
pub fn evaluation_rank(g: &Metric2, set: &QuadraticIntegralSet, n: usize, seed: u64) -> Result<usize, EvalError> {
    let states = random_states(g, n, seed, 1.0);
    let mut m = DMatrix::zeros(states.len(), set.len());
    for (i, s) in states.iter().enumerate() {
        for (j, (_, f)) in set.items.iter().enumerate() {
            m[(i, j)] = f.value(s.point(), s.velocity(), &g.env)?;
        }
    }
    let sv = m.singular_values();
    let top = sv.iter().cloned().fold(0.0, f64::max);
    Ok(sv.iter().filter(|v| **v > 1e-9 * top).count())
}
