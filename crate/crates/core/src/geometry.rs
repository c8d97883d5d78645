//! Two-dimensional (pseudo-)Riemannian metrics and the fields derived from them.
//!
//! Every derived object (Christoffel symbols, curvature, Laplacian, ...) is an
//! [`Expr`], built by symbolic differentiation and then simplified.

use thiserror::Error;

use crate::expr::{simplify, Coord, EvalError, Expr, ParamEnv};

/// Tolerance below which `|det g|` counts as degenerate.
pub const DET_TOL: f64 = 1e-9;
/// Default number of sample points.
pub const DEFAULT_SAMPLES: usize = 100;
/// Points closer than this to an excluded locus are skipped.
pub const EXCLUSION_RADIUS: f64 = 1e-3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("degenerate metric at ({x}, {y}): det = {det:e}")]
    Degenerate { x: f64, y: f64, det: f64 },
    #[error("singular coordinate map at ({x}, {y})")]
    SingularJacobian { x: f64, y: f64 },
    #[error("no admissible sample points in the domain")]
    NoSamples,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Sampling region: a rectangle minus neighbourhoods of the zero sets of some functions.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub exclude: Vec<Expr>,
}

impl Domain {
    pub fn rect(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Domain {
            x: (x0.min(x1), x0.max(x1)),
            y: (y0.min(y1), y0.max(y1)),
            exclude: Vec::new(),
        }
    }

    pub fn excluding(mut self, locus: Expr) -> Self {
        self.exclude.push(locus);
        self
    }

    pub fn in_rect(&self, p: (f64, f64)) -> bool {
        p.0 >= self.x.0 && p.0 <= self.x.1 && p.1 >= self.y.0 && p.1 <= self.y.1
    }

    /// True when `p` lies in the rectangle and away from every excluded locus.
    ///
    /// The distance to a locus `f = 0` is estimated by `|f| / |grad f|`.
    pub fn admits(&self, p: (f64, f64), env: &ParamEnv) -> bool {
        self.checker().admits(p, env)
    }

    /// Membership test with the locus gradients differentiated once.
    pub fn checker(&self) -> DomainChecker<'_> {
        DomainChecker {
            domain: self,
            loci: self.exclude.iter().map(|f| (f.clone(), f.dx(), f.dy())).collect(),
        }
    }

    /// `n` admissible points from the Halton sequence in bases 2 and 3.
    pub fn samples(&self, n: usize, env: &ParamEnv) -> Vec<(f64, f64)> {
        let check = self.checker();
        let mut out = Vec::with_capacity(n);
        let mut index = 1u64;
        let limit = 50 * n as u64 + 100;
        while out.len() < n && index < limit {
            let p = (
                self.x.0 + (self.x.1 - self.x.0) * halton(index, 2),
                self.y.0 + (self.y.1 - self.y.0) * halton(index, 3),
            );
            index += 1;
            if check.admits(p, env) {
                out.push(p);
            }
        }
        out
    }
}

/// A [`Domain`] with precomputed locus gradients, for repeated membership tests.
#[derive(Clone, Debug)]
pub struct DomainChecker<'a> {
    domain: &'a Domain,
    loci: Vec<(Expr, Expr, Expr)>,
}

impl DomainChecker<'_> {
    pub fn admits(&self, p: (f64, f64), env: &ParamEnv) -> bool {
        if !self.domain.in_rect(p) {
            return false;
        }
        self.loci.iter().all(|(f, fx, fy)| {
            let v = match f.eval(p, env) {
                Ok(v) => v,
                Err(_) => return false,
            };
            let gx = fx.eval(p, env).unwrap_or(0.0);
            let gy = fy.eval(p, env).unwrap_or(0.0);
            let grad = gx.hypot(gy);
            let dist = if grad > 0.0 { v.abs() / grad } else { v.abs() };
            v.is_finite() && dist >= EXCLUSION_RADIUS
        })
    }
}

/// Radical inverse of `i` in the given base.
pub fn halton(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// A metric `E dx^2 + 2F dx dy + G dy^2`.
#[derive(Clone, Debug)]
pub struct Metric2 {
    pub e: Expr,
    pub f: Expr,
    pub g: Expr,
    pub env: ParamEnv,
    pub domain: Domain,
}

impl Metric2 {
    /// Build a metric and check that it is nondegenerate at the domain samples.
    pub fn new(e: Expr, f: Expr, g: Expr, env: ParamEnv, domain: Domain) -> Result<Self, GeometryError> {
        let m = Metric2 { e, f, g, env, domain };
        m.check_nondegenerate(DEFAULT_SAMPLES)?;
        Ok(m)
    }

    /// Build without validation.
    pub fn new_unchecked(e: Expr, f: Expr, g: Expr, env: ParamEnv, domain: Domain) -> Self {
        Metric2 { e, f, g, env, domain }
    }

    pub fn diagonal(e: Expr, g: Expr, env: ParamEnv, domain: Domain) -> Result<Self, GeometryError> {
        Metric2::new(e, Expr::zero(), g, env, domain)
    }

    pub fn euclidean() -> Self {
        Metric2::new_unchecked(
            Expr::one(),
            Expr::zero(),
            Expr::one(),
            ParamEnv::new(),
            Domain::rect(-1.0, 1.0, -1.0, 1.0),
        )
    }

    pub fn check_nondegenerate(&self, n: usize) -> Result<(), GeometryError> {
        let pts = self.samples(n);
        if pts.is_empty() {
            return Err(GeometryError::NoSamples);
        }
        let det = self.det();
        for p in pts {
            let d = det.eval(p, &self.env)?;
            if !(d.abs() > DET_TOL) {
                return Err(GeometryError::Degenerate { x: p.0, y: p.1, det: d });
            }
        }
        Ok(())
    }

    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        self.domain.samples(n, &self.env)
    }

    /// Component `g_ij` with indices in {0, 1}.
    pub fn component(&self, i: usize, j: usize) -> &Expr {
        match (i, j) {
            (0, 0) => &self.e,
            (1, 1) => &self.g,
            _ => &self.f,
        }
    }

    pub fn det(&self) -> Expr {
        simplify(&(&self.e * &self.g - self.f.powi(2)))
    }

    /// Inverse components `[g^11, g^12, g^22]`.
    pub fn inverse(&self) -> [Expr; 3] {
        let det = self.det();
        [
            simplify(&(&self.g / &det)),
            simplify(&(-(&self.f) / &det)),
            simplify(&(&self.e / &det)),
        ]
    }

    /// Inverse component `g^ij`.
    pub fn inverse_component(inv: &[Expr; 3], i: usize, j: usize) -> &Expr {
        match (i, j) {
            (0, 0) => &inv[0],
            (1, 1) => &inv[2],
            _ => &inv[1],
        }
    }

    /// Numeric matrix of the metric at a point.
    pub fn matrix_at(&self, p: (f64, f64)) -> Result<[[f64; 2]; 2], EvalError> {
        let e = self.e.eval(p, &self.env)?;
        let f = self.f.eval(p, &self.env)?;
        let g = self.g.eval(p, &self.env)?;
        Ok([[e, f], [f, g]])
    }

    /// `g(v, v)` at a point.
    pub fn norm_sq(&self, p: (f64, f64), v: (f64, f64)) -> Result<f64, EvalError> {
        let m = self.matrix_at(p)?;
        Ok(m[0][0] * v.0 * v.0 + 2.0 * m[0][1] * v.0 * v.1 + m[1][1] * v.1 * v.1)
    }

    /// Replace parameters by their bound values in all components.
    pub fn bound(&self) -> Metric2 {
        Metric2 {
            e: simplify(&self.e.bind(&self.env)),
            f: simplify(&self.f.bind(&self.env)),
            g: simplify(&self.g.bind(&self.env)),
            env: self.env.clone(),
            domain: self.domain.clone(),
        }
    }
}

fn coord(i: usize) -> Coord {
    if i == 0 {
        Coord::X
    } else {
        Coord::Y
    }
}

/// Christoffel symbols `Γ^i_jk`, stored for all index triples (symmetric in j, k).
#[derive(Clone, Debug)]
pub struct ChristoffelField {
    gamma: [[[Expr; 2]; 2]; 2],
}

impl ChristoffelField {
    /// Assemble from the six independent symbols
    /// `Γ¹₁₁, Γ¹₁₂, Γ¹₂₂, Γ²₁₁, Γ²₁₂, Γ²₂₂`.
    pub fn from_components(c: [Expr; 6]) -> Self {
        let [a, b, c2, d, e, f] = c;
        ChristoffelField {
            gamma: [
                [[a, b.clone()], [b, c2]],
                [[d, e.clone()], [e, f]],
            ],
        }
    }

    /// `Γ^i_jk` with zero-based indices.
    pub fn get(&self, i: usize, j: usize, k: usize) -> &Expr {
        &self.gamma[i][j][k]
    }

    /// The six independent symbols in the order of [`ChristoffelField::from_components`].
    pub fn components(&self) -> [Expr; 6] {
        [
            self.gamma[0][0][0].clone(),
            self.gamma[0][0][1].clone(),
            self.gamma[0][1][1].clone(),
            self.gamma[1][0][0].clone(),
            self.gamma[1][0][1].clone(),
            self.gamma[1][1][1].clone(),
        ]
    }
}

/// Levi-Civita connection of `g`.
pub fn christoffel(g: &Metric2) -> ChristoffelField {
    let inv = g.inverse();
    let dg = |l: usize, k: usize, m: usize| g.component(l, k).diff(coord(m));
    let sym = |i: usize, j: usize, k: usize| {
        let terms = (0..2).map(|l| {
            let bracket = dg(l, k, j) + dg(l, j, k) - dg(j, k, l);
            Metric2::inverse_component(&inv, i, l) * bracket
        });
        simplify(&(0.5 * Expr::sum(terms)))
    };
    ChristoffelField::from_components([
        sym(0, 0, 0),
        sym(0, 0, 1),
        sym(0, 1, 1),
        sym(1, 0, 0),
        sym(1, 0, 1),
        sym(1, 1, 1),
    ])
}

/// Components `g_{ij,k} = ∂_k g_ij − Γ^m_ki g_mj − Γ^m_kj g_im` of the covariant
/// derivative of `g` with respect to `gamma`.
pub fn covariant_derivative(g: &Metric2, gamma: &ChristoffelField) -> Vec<Expr> {
    let mut out = Vec::with_capacity(6);
    for (i, j) in [(0, 0), (0, 1), (1, 1)] {
        for k in 0..2 {
            let mut terms = vec![g.component(i, j).diff(coord(k))];
            for m in 0..2 {
                terms.push(-(gamma.get(m, k, i) * g.component(m, j)));
                terms.push(-(gamma.get(m, k, j) * g.component(i, m)));
            }
            out.push(Expr::sum(terms));
        }
    }
    out
}

/// Maximum of `|g_{ij,k}|` over the points.
pub fn levi_civita_residual(
    g: &Metric2,
    gamma: &ChristoffelField,
    points: &[(f64, f64)],
) -> Result<f64, EvalError> {
    max_abs(&covariant_derivative(g, gamma), points, &g.env)
}

/// Maximum absolute value of several expressions over several points.
pub fn max_abs(exprs: &[Expr], points: &[(f64, f64)], env: &ParamEnv) -> Result<f64, EvalError> {
    let mut worst: f64 = 0.0;
    for &p in points {
        for e in exprs {
            let v = e.eval(p, env)?;
            worst = if v.is_nan() { f64::NAN } else { worst.max(v.abs()) };
            if worst.is_nan() {
                return Ok(worst);
            }
        }
    }
    Ok(worst)
}

/// Scalar curvature `R = g^{jk} R^i_{jik}` with
/// `R^i_{jkl} = ∂_k Γ^i_{lj} − ∂_l Γ^i_{kj} + Γ^i_{km} Γ^m_{lj} − Γ^i_{lm} Γ^m_{kj}`.
///
/// With this convention the round sphere has positive curvature and `R = 2K`.
pub fn scalar_curvature(g: &Metric2) -> Expr {
    let gamma = christoffel(g);
    let inv = g.inverse();
    let ricci = |j: usize, l: usize| {
        let mut terms = Vec::new();
        for i in 0..2 {
            terms.push(gamma.get(i, l, j).diff(coord(i)));
            terms.push(-gamma.get(i, i, j).diff(coord(l)));
            for m in 0..2 {
                terms.push(gamma.get(i, i, m) * gamma.get(m, l, j));
                terms.push(-(gamma.get(i, l, m) * gamma.get(m, i, j)));
            }
        }
        Expr::sum(terms)
    };
    let r = Expr::sum([
        Metric2::inverse_component(&inv, 0, 0) * ricci(0, 0),
        2.0 * Metric2::inverse_component(&inv, 0, 1) * ricci(0, 1),
        Metric2::inverse_component(&inv, 1, 1) * ricci(1, 1),
    ]);
    simplify(&r)
}

/// `g^{ij} ∂_i f ∂_j f`.
pub fn grad_norm_sq(g: &Metric2, f: &Expr) -> Expr {
    let inv = g.inverse();
    let fx = f.dx();
    let fy = f.dy();
    simplify(&Expr::sum([
        &inv[0] * fx.powi(2),
        2.0 * &inv[1] * &fx * &fy,
        &inv[2] * fy.powi(2),
    ]))
}

/// Laplace-Beltrami operator `|det|^{-1/2} ∂_i(|det|^{1/2} g^{ij} ∂_j f)`, expanded as
/// `∂_i(g^{ij} f_j) + g^{ij} f_j ∂_i(det) / (2 det)` so no absolute value is needed.
pub fn laplacian(g: &Metric2, f: &Expr) -> Expr {
    let inv = g.inverse();
    let det = g.det();
    let fx = f.dx();
    let fy = f.dy();
    // Contravariant gradient components.
    let vx = &inv[0] * &fx + &inv[1] * &fy;
    let vy = &inv[1] * &fx + &inv[2] * &fy;
    let div = vx.dx() + vy.dy();
    let correction = (&vx * det.dx() + &vy * det.dy()) / (2.0 * &det);
    simplify(&(div + correction))
}

/// A change of coordinates given by the old coordinates as functions of the new ones:
/// `x = X(x̄, ȳ)`, `y = Y(x̄, ȳ)`. In the expressions, `x` and `y` stand for `x̄`, `ȳ`.
#[derive(Clone, Debug)]
pub struct CoordinateMap {
    pub x_of: Expr,
    pub y_of: Expr,
}

impl CoordinateMap {
    pub fn new(x_of: Expr, y_of: Expr) -> Self {
        CoordinateMap { x_of, y_of }
    }

    pub fn identity() -> Self {
        CoordinateMap::new(Expr::x(), Expr::y())
    }

    /// Jacobian `[[X_x̄, X_ȳ], [Y_x̄, Y_ȳ]]`.
    pub fn jacobian(&self) -> [[Expr; 2]; 2] {
        [
            [self.x_of.dx(), self.x_of.dy()],
            [self.y_of.dx(), self.y_of.dy()],
        ]
    }

    /// Image of a point in the new coordinates.
    pub fn apply(&self, p: (f64, f64), env: &ParamEnv) -> Result<(f64, f64), EvalError> {
        Ok((self.x_of.eval(p, env)?, self.y_of.eval(p, env)?))
    }
}

/// Express `g` in new coordinates: the components become `Jᵀ g J`, evaluated at
/// the image point. `domain` is the sampling domain in the new coordinates.
pub fn pullback(g: &Metric2, map: &CoordinateMap, domain: Domain) -> Result<Metric2, GeometryError> {
    let [[a, b], [c, d]] = map.jacobian();
    let sub = |e: &Expr| e.substitute(&map.x_of, &map.y_of);
    let (e, f, gg) = (sub(&g.e), sub(&g.f), sub(&g.g));
    let new_e = &e * a.powi(2) + 2.0 * &f * &a * &c + &gg * c.powi(2);
    let new_f = &e * &a * &b + &f * (&a * &d + &b * &c) + &gg * &c * &d;
    let new_g = &e * b.powi(2) + 2.0 * &f * &b * &d + &gg * d.powi(2);
    let jdet = &a * &d - &b * &c;
    for p in domain.samples(DEFAULT_SAMPLES, &g.env) {
        let j = jdet.eval(p, &g.env)?;
        if !(j.abs() > DET_TOL) {
            return Err(GeometryError::SingularJacobian { x: p.0, y: p.1 });
        }
    }
    Metric2::new(
        simplify(&new_e),
        simplify(&new_f),
        simplify(&new_g),
        g.env.clone(),
        domain,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn metric(e: &str, f: &str, g: &str, env: ParamEnv, domain: Domain) -> Metric2 {
        Metric2::new(parse(e).unwrap(), parse(f).unwrap(), parse(g).unwrap(), env, domain).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    // Diagonal-metric formulas, used as an independent oracle.
    fn diagonal_oracle(e: &Expr, g: &Expr) -> [Expr; 6] {
        let two = Expr::constant(2.0);
        [
            e.dx() / (&two * e),
            e.dy() / (&two * e),
            -g.dx() / (&two * e),
            -e.dy() / (&two * g),
            g.dx() / (&two * g),
            g.dy() / (&two * g),
        ]
    }

    #[test]
    fn flat_metric_has_no_christoffels() {
        let g = Metric2::euclidean();
        for c in christoffel(&g).components() {
            assert!(c.is_zero(), "{c}");
        }
        assert!(scalar_curvature(&g).is_zero());
    }

    #[test]
    fn christoffels_of_exponential_metric() {
        let env = ParamEnv::new().with("D", -0.5);
        let g = metric("exp(3*x)", "0", "-2*D*exp(x)", env.clone(), Domain::rect(0.0, 2.0, -1.0, 1.0));
        let gamma = christoffel(&g).components();
        let oracle = diagonal_oracle(&g.e, &g.g);
        let expected = [1.5, 0.0, f64::NAN, 0.0, 0.5, 0.0];
        for p in g.samples(20) {
            for k in 0..6 {
                let v = gamma[k].eval(p, &env).unwrap();
                assert!(close(v, oracle[k].eval(p, &env).unwrap(), 1e-12));
                if !expected[k].is_nan() {
                    assert!(close(v, expected[k], 1e-12));
                }
            }
            let g122 = gamma[2].eval(p, &env).unwrap();
            assert!(close(g122, -0.5 * (-2.0 * p.0).exp(), 1e-12));
        }
    }

    #[test]
    fn christoffels_of_koenigs_metric() {
        let w = "(4*x^2+y^2+1)";
        let g = metric(w, "0", w, ParamEnv::new(), Domain::rect(-1.0, 1.0, -1.0, 1.0));
        let gamma = christoffel(&g).components();
        let oracle = diagonal_oracle(&g.e, &g.g);
        for p in g.samples(30) {
            let v = gamma[0].eval(p, &g.env).unwrap();
            assert!(close(v, 4.0 * p.0 / (4.0 * p.0 * p.0 + p.1 * p.1 + 1.0), 1e-12));
            for k in 0..6 {
                let a = gamma[k].eval(p, &g.env).unwrap();
                let b = oracle[k].eval(p, &g.env).unwrap();
                assert!(close(a, b, 1e-12));
            }
        }
        assert!(levi_civita_residual(&g, &christoffel(&g), &g.samples(100)).unwrap() < 1e-12);
    }

    #[test]
    fn sphere_curvature_is_positive() {
        // Stereographic sphere of radius 1: 4(dx^2+dy^2)/(1+x^2+y^2)^2 has R = 2.
        let e = "4/(1+x^2+y^2)^2";
        let g = metric(e, "0", e, ParamEnv::new(), Domain::rect(-1.0, 1.0, -1.0, 1.0));
        let r = scalar_curvature(&g);
        for p in g.samples(10) {
            assert!(close(r.eval(p, &g.env).unwrap(), 2.0, 1e-10));
        }
    }

    #[test]
    fn curvature_of_exponential_family() {
        let env = ParamEnv::from([("b", 3.0), ("eps1", 1.0), ("eps2", 1.0)]);
        let g = metric(
            "eps1*exp((b+2)*x)",
            "0",
            "eps2*exp(b*x)",
            env.clone(),
            Domain::rect(0.25, 1.75, -1.0, 1.0),
        );
        let r = scalar_curvature(&g);
        for &x in &[0.3, 0.7, 1.1, 1.6] {
            let v = r.eval((x, 0.0), &env).unwrap();
            assert!(close(v, 3.0 * (-5.0 * x).exp(), 1e-10));
        }
    }

    #[test]
    fn euclidean_operators() {
        let g = Metric2::euclidean();
        let f = parse("x^2").unwrap();
        let h = parse("x^2+y^2").unwrap();
        for p in g.samples(10) {
            assert!(close(grad_norm_sq(&g, &f).eval(p, &g.env).unwrap(), 4.0 * p.0 * p.0, 1e-14));
            assert!(close(laplacian(&g, &h).eval(p, &g.env).unwrap(), 4.0, 1e-14));
        }
        assert!(grad_norm_sq(&g, &Expr::constant(3.0)).is_zero());
        assert!(laplacian(&g, &Expr::constant(3.0)).is_zero());
    }

    #[test]
    fn laplacian_matches_textbook_formula_for_lorentzian_metric() {
        // For a diagonal metric, Δf = (1/sqrt|EG|)(∂x(sqrt|EG| f_x / E) + ∂y(sqrt|EG| f_y / G)).
        let g = metric("exp(x)", "0", "-(1+x^2)", ParamEnv::new(), Domain::rect(0.0, 1.0, 0.0, 1.0));
        let f = parse("x^3*y + exp(y)").unwrap();
        let s = parse("(exp(x)*(1+x^2))^(1/2)").unwrap();
        let oracle = (((&s * f.dx()) / &g.e).dx() + ((&s * f.dy()) / &g.g).dy()) / &s;
        let lap = laplacian(&g, &f);
        for p in g.samples(20) {
            assert!(close(lap.eval(p, &g.env).unwrap(), oracle.eval(p, &g.env).unwrap(), 1e-10));
        }
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let err = Metric2::new(
            Expr::zero(),
            Expr::zero(),
            Expr::one(),
            ParamEnv::new(),
            Domain::rect(0.0, 1.0, 0.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::Degenerate { .. }));
    }

    #[test]
    fn samples_avoid_excluded_locus() {
        let d = Domain::rect(-1.0, 1.0, -1.0, 1.0).excluding(Expr::x());
        let pts = d.samples(100, &ParamEnv::new());
        assert_eq!(pts.len(), 100);
        assert!(pts.iter().all(|p| p.0.abs() >= EXCLUSION_RADIUS));
    }

    fn exp_family() -> Metric2 {
        let env = ParamEnv::from([("b", 3.0), ("eps1", 1.0), ("eps2", -1.0)]);
        metric(
            "eps1*exp((b+2)*x)",
            "0",
            "eps2*exp(b*x)",
            env,
            Domain::rect(0.25, 1.75, -1.0, 1.0),
        )
    }

    #[test]
    fn pullback_identity_and_rescaling() {
        let g = exp_family();
        let id = pullback(&g, &CoordinateMap::identity(), g.domain.clone()).unwrap();
        let c = 2.5;
        // y = ȳ / c rescales G by c^-2.
        let scaled = pullback(
            &g,
            &CoordinateMap::new(Expr::x(), Expr::y() / c),
            g.domain.clone(),
        )
        .unwrap();
        // x = x̄ + c multiplies E and G by e^{(b+2)c} and e^{bc}.
        let shifted = pullback(
            &g,
            &CoordinateMap::new(Expr::x() + c, Expr::y()),
            Domain::rect(-2.0, -1.0, -1.0, 1.0),
        )
        .unwrap();
        for p in g.samples(16) {
            let m = g.matrix_at(p).unwrap();
            let mi = id.matrix_at(p).unwrap();
            let ms = scaled.matrix_at(p).unwrap();
            assert!(close(mi[0][0], m[0][0], 1e-14) && close(mi[1][1], m[1][1], 1e-14));
            assert!(close(ms[0][0], m[0][0], 1e-13));
            assert!(close(ms[1][1], m[1][1] / (c * c), 1e-13));
            assert!(ms[0][1].abs() < 1e-14);
            let q = (p.0 - c, p.1);
            let mt = shifted.matrix_at(q).unwrap();
            let mq = g.matrix_at(q).unwrap();
            assert!(close(mt[0][0], mq[0][0] * (5.0 * c).exp(), 1e-12));
            assert!(close(mt[1][1], mq[1][1] * (3.0 * c).exp(), 1e-12));
        }
    }

    #[test]
    fn curvature_is_invariant_under_pullback() {
        let g = exp_family();
        let r = scalar_curvature(&g);
        let maps = [
            CoordinateMap::new(parse("x + 0.1*y^2").unwrap(), parse("y").unwrap()),
            CoordinateMap::new(parse("x").unwrap(), parse("y + atan(x)").unwrap()),
            CoordinateMap::new(parse("ln(x)").unwrap(), parse("2*y - x").unwrap()),
        ];
        let domains = [
            Domain::rect(0.3, 1.5, -1.0, 1.0),
            Domain::rect(0.3, 1.5, -1.0, 1.0),
            Domain::rect(1.4, 5.0, -1.0, 1.0),
        ];
        for (map, dom) in maps.iter().zip(domains) {
            let h = pullback(&g, map, dom).unwrap();
            let rh = scalar_curvature(&h);
            for p in h.samples(10) {
                let q = map.apply(p, &g.env).unwrap();
                let a = rh.eval(p, &h.env).unwrap();
                let b = r.eval(q, &g.env).unwrap();
                assert!((a - b).abs() <= 1e-7 * b.abs().max(1e-12), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn singular_map_is_rejected() {
        let g = Metric2::euclidean();
        let err = pullback(
            &g,
            &CoordinateMap::new(Expr::x(), Expr::x()),
            Domain::rect(0.0, 1.0, 0.0, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::SingularJacobian { .. }));
    }
}
