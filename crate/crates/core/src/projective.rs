//! Projective connections `y'' = K0 + K1 y' + K2 y'^2 + K3 y'^3`, their
//! infinitesimal symmetries, Liouville's invariants and the prolongation of
//! the symmetry equations to a linear connection on an 8-dimensional bundle.
//!
//! Layout of the prolonged jet used throughout:
//! `Ẑ = (Z1, Z2, Z1_x, Z2_x, Z1_y, Z2_y, Z1_xy, Z2_xy)`, treated as a row
//! vector so that `dẐ = Ẑ (X dx + Y dy)`. Column `j` of `X` holds the
//! coefficients of `∂x Ẑ_j` in terms of `Ẑ`.

use nalgebra::{DMatrix, SMatrix};
use thiserror::Error;

use crate::expr::{simplify, Coord, EvalError, Expr, ParamEnv};
use crate::geometry::{christoffel, ChristoffelField, Domain, Metric2, DEFAULT_SAMPLES};

/// Flatness tolerance for the Liouville invariants.
pub const FLAT_TOL: f64 = 1e-9;
/// Curvature norm below which the prolonged connection counts as flat.
pub const CURVATURE_TOL: f64 = 1e-6;
/// Step for the finite differences of `X` and `Y`.
pub const FD_STEP: f64 = 1e-3;

pub type Mat8 = SMatrix<f64, 8, 8>;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ProjectiveError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("third-order relations are singular at ({x}, {y})")]
    SingularProlongation { x: f64, y: f64 },
}

/// The four coefficients of a projective connection.
#[derive(Clone, Debug)]
pub struct ProjectiveConnection {
    pub k: [Expr; 4],
    pub env: ParamEnv,
    pub domain: Domain,
}

impl ProjectiveConnection {
    pub fn new(k: [Expr; 4], env: ParamEnv, domain: Domain) -> Self {
        ProjectiveConnection { k, env, domain }
    }

    /// `y'' = 0`.
    pub fn straight_lines(domain: Domain) -> Self {
        ProjectiveConnection::new(
            [Expr::zero(), Expr::zero(), Expr::zero(), Expr::zero()],
            ParamEnv::new(),
            domain,
        )
    }

    /// `y'' = A e^x + B y' + C e^{-x} y'^2 + D e^{-2x} y'^3`.
    pub fn abcd(a: f64, b: f64, c: f64, d: f64, domain: Domain) -> Self {
        let x = Expr::x();
        ProjectiveConnection::new(
            [
                a * x.exp(),
                Expr::constant(b),
                c * (-&x).exp(),
                d * (-2.0 * &x).exp(),
            ],
            ParamEnv::new(),
            domain,
        )
    }

    /// Connection whose unparametrized geodesics are those of `g`.
    pub fn of_metric(g: &Metric2) -> Self {
        projective_connection(&christoffel(g), g.env.clone(), g.domain.clone())
    }

    pub fn samples(&self, n: usize) -> Vec<(f64, f64)> {
        self.domain.samples(n, &self.env)
    }

    /// Values of `K0..K3` at a point.
    pub fn eval_at(&self, p: (f64, f64)) -> Result<[f64; 4], EvalError> {
        Ok([
            self.k[0].eval(p, &self.env)?,
            self.k[1].eval(p, &self.env)?,
            self.k[2].eval(p, &self.env)?,
            self.k[3].eval(p, &self.env)?,
        ])
    }
}

/// `K0 = −Γ²₁₁`, `K1 = Γ¹₁₁ − 2Γ²₁₂`, `K2 = −(Γ²₂₂ − 2Γ¹₁₂)`, `K3 = Γ¹₂₂`.
pub fn projective_connection(gamma: &ChristoffelField, env: ParamEnv, domain: Domain) -> ProjectiveConnection {
    let g = |i, j, k| gamma.get(i, j, k).clone();
    let k = [
        -g(1, 0, 0),
        g(0, 0, 0) - 2.0 * g(1, 0, 1),
        2.0 * g(0, 0, 1) - g(1, 1, 1),
        g(0, 1, 1),
    ];
    ProjectiveConnection::new(k.map(|e| simplify(&e)), env, domain)
}

/// A vector field `Z1 ∂x + Z2 ∂y`.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub z1: Expr,
    pub z2: Expr,
}

impl VectorField {
    pub fn new(z1: Expr, z2: Expr) -> Self {
        VectorField { z1, z2 }
    }

    pub fn zero() -> Self {
        VectorField::new(Expr::zero(), Expr::zero())
    }

    /// Replace parameters by their values.
    pub fn bind(&self, env: &ParamEnv) -> Self {
        VectorField::new(self.z1.bind(env), self.z2.bind(env))
    }

    pub fn component(&self, c: usize) -> &Expr {
        if c == 0 {
            &self.z1
        } else {
            &self.z2
        }
    }

    pub fn eval(&self, p: (f64, f64), env: &ParamEnv) -> Result<(f64, f64), EvalError> {
        Ok((self.z1.eval(p, env)?, self.z2.eval(p, env)?))
    }

    /// The prolonged jet `Ẑ` at a point, from exact derivatives.
    pub fn jet(&self, p: (f64, f64), env: &ParamEnv) -> Result<[f64; 8], EvalError> {
        let mut out = [0.0; 8];
        for c in 0..2 {
            let z = self.component(c);
            out[c] = z.eval(p, env)?;
            out[2 + c] = z.dx().eval(p, env)?;
            out[4 + c] = z.dy().eval(p, env)?;
            out[6 + c] = z.dx().dy().eval(p, env)?;
        }
        Ok(out)
    }
}

/// One term `coef · ∂^{nx,ny} Z_comp` of a linear equation in the jet of `Z`.
#[derive(Clone, Debug)]
struct JetTerm {
    coef: Expr,
    comp: usize,
    nx: usize,
    ny: usize,
}

fn term(coef: Expr, comp: usize, nx: usize, ny: usize) -> JetTerm {
    JetTerm { coef, comp, nx, ny }
}

/// The four left-hand sides of the symmetry equations as linear forms on the jet.
fn symmetry_system(k: &[Expr; 4]) -> [Vec<JetTerm>; 4] {
    let c = |v: f64| Expr::constant(v);
    let kx: Vec<Expr> = k.iter().map(Expr::dx).collect();
    let ky: Vec<Expr> = k.iter().map(Expr::dy).collect();
    [
        vec![
            term(c(1.0), 1, 2, 0),
            term(-2.0 * &k[0], 0, 1, 0),
            term(-&k[1], 1, 1, 0),
            term(k[0].clone(), 1, 0, 1),
            term(-&kx[0], 0, 0, 0),
            term(-&ky[0], 1, 0, 0),
        ],
        vec![
            term(c(-1.0), 0, 2, 0),
            term(c(2.0), 1, 1, 1),
            term(-&k[1], 0, 1, 0),
            term(-3.0 * &k[0], 0, 0, 1),
            term(-2.0 * &k[2], 1, 1, 0),
            term(-&kx[1], 0, 0, 0),
            term(-&ky[1], 1, 0, 0),
        ],
        vec![
            term(c(-2.0), 0, 1, 1),
            term(c(1.0), 1, 0, 2),
            term(-2.0 * &k[1], 0, 0, 1),
            term(-3.0 * &k[3], 1, 1, 0),
            term(-&k[2], 1, 0, 1),
            term(-&kx[2], 0, 0, 0),
            term(-&ky[2], 1, 0, 0),
        ],
        vec![
            term(c(-1.0), 0, 0, 2),
            term(k[3].clone(), 0, 1, 0),
            term(-&k[2], 0, 0, 1),
            term(-2.0 * &k[3], 1, 0, 1),
            term(-&kx[3], 0, 0, 0),
            term(-&ky[3], 1, 0, 0),
        ],
    ]
}

fn diff_terms(terms: &[JetTerm], c: Coord) -> Vec<JetTerm> {
    let mut out = Vec::with_capacity(2 * terms.len());
    for t in terms {
        let (dx, dy) = if c == Coord::X { (1, 0) } else { (0, 1) };
        out.push(term(t.coef.clone(), t.comp, t.nx + dx, t.ny + dy));
        let dc = t.coef.diff(c);
        if !dc.is_zero() {
            out.push(term(dc, t.comp, t.nx, t.ny));
        }
    }
    out
}

fn apply_terms(terms: &[JetTerm], z: &VectorField) -> Expr {
    Expr::sum(terms.iter().map(|t| {
        let mut d = z.component(t.comp).clone();
        for _ in 0..t.nx {
            d = d.dx();
        }
        for _ in 0..t.ny {
            d = d.dy();
        }
        &t.coef * d
    }))
}

/// The four symmetry equations applied to `z`, as expressions.
pub fn symmetry_equations(pc: &ProjectiveConnection, z: &VectorField) -> [Expr; 4] {
    symmetry_system(&pc.k).map(|eq| simplify(&apply_terms(&eq, z)))
}

/// Maximum absolute residuals over a set of points.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub per_equation: Vec<f64>,
    pub worst_point: Option<(f64, f64)>,
}

impl ResidualReport {
    pub fn from_exprs(exprs: &[Expr], points: &[(f64, f64)], env: &ParamEnv) -> Result<Self, EvalError> {
        let mut per = vec![0.0f64; exprs.len()];
        let mut max_abs = 0.0f64;
        let mut worst = None;
        for &p in points {
            for (i, e) in exprs.iter().enumerate() {
                let v = e.eval(p, env)?.abs();
                let v = if v.is_nan() { f64::INFINITY } else { v };
                per[i] = per[i].max(v);
                if v > max_abs || worst.is_none() {
                    max_abs = max_abs.max(v);
                    worst = Some(p);
                }
            }
        }
        Ok(ResidualReport {
            max_abs,
            per_equation: per,
            worst_point: worst,
        })
    }
}

/// Residuals of the symmetry equations for `z` at the points.
pub fn symmetry_residual(
    pc: &ProjectiveConnection,
    z: &VectorField,
    points: &[(f64, f64)],
) -> Result<ResidualReport, EvalError> {
    ResidualReport::from_exprs(&symmetry_equations(pc, z), points, &pc.env)
}

/// Liouville's invariants; both vanish exactly when the connection is flat.
#[derive(Clone, Debug)]
pub struct LiouvilleInvariant {
    pub l1: Expr,
    pub l2: Expr,
}

pub fn liouville_invariants(pc: &ProjectiveConnection) -> LiouvilleInvariant {
    let [k0, k1, k2, k3] = &pc.k;
    let (x, y) = (Coord::X, Coord::Y);
    let l1 = Expr::sum([
        2.0 * k1.dx().dy(),
        -k2.diff(x).diff(x),
        -3.0 * k0.diff(y).diff(y),
        -6.0 * k0 * k3.dx(),
        -3.0 * k3 * k0.dx(),
        3.0 * k0 * k2.dy(),
        3.0 * k2 * k0.dy(),
        k1 * k2.dx(),
        -2.0 * k1 * k1.dy(),
    ]);
    let l2 = Expr::sum([
        2.0 * k2.dx().dy(),
        -k1.diff(y).diff(y),
        -3.0 * k3.diff(x).diff(x),
        6.0 * k3 * k0.dy(),
        3.0 * k0 * k3.dy(),
        -3.0 * k3 * k1.dx(),
        -3.0 * k1 * k3.dx(),
        -k2 * k1.dy(),
        2.0 * k2 * k2.dx(),
    ]);
    LiouvilleInvariant {
        l1: simplify(&l1),
        l2: simplify(&l2),
    }
}

/// True iff `max(|L1|, |L2|) <= tol` at every point.
pub fn is_flat(pc: &ProjectiveConnection, points: &[(f64, f64)], tol: f64) -> Result<bool, EvalError> {
    let inv = liouville_invariants(pc);
    let r = ResidualReport::from_exprs(&[inv.l1, inv.l2], points, &pc.env)?;
    Ok(r.max_abs <= tol)
}

/// Components of the Lie derivative of `λ = (L1 dx + L2 dy) ⊗ (dx ∧ dy)` along `z`.
pub fn lambda_lie_derivative(pc: &ProjectiveConnection, z: &VectorField) -> [Expr; 2] {
    let inv = liouville_invariants(pc);
    let l = [inv.l1, inv.l2];
    let div = z.z1.dx() + z.z2.dy();
    let coords = [Coord::X, Coord::Y];
    let comp = |i: usize| {
        let transport = &z.z1 * l[i].dx() + &z.z2 * l[i].dy();
        let twist = &l[0] * z.z1.diff(coords[i]) + &l[1] * z.z2.diff(coords[i]);
        simplify(&(transport + twist + &div * &l[i]))
    };
    [comp(0), comp(1)]
}

/// Connection matrices and curvature of the prolonged system at one point.
#[derive(Clone, Debug)]
pub struct SymmetryConnectionSample {
    pub point: (f64, f64),
    pub x: Mat8,
    pub y: Mat8,
    pub curvature: Mat8,
}

impl SymmetryConnectionSample {
    /// Singular values of the curvature, largest first.
    pub fn curvature_singular_values(&self) -> Vec<f64> {
        let mut s: Vec<f64> = self.curvature.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    /// Numerical rank of the curvature with a relative threshold.
    pub fn curvature_rank(&self, rel_tol: f64) -> usize {
        let s = self.curvature_singular_values();
        let top = s.first().copied().unwrap_or(0.0);
        if top <= CURVATURE_TOL {
            return 0;
        }
        s.iter().filter(|&&v| v > rel_tol * top).count()
    }
}

// Jet variables: for each component, the derivatives with nx + ny <= 3.
const JET_ORDERS: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

fn jet_index(comp: usize, nx: usize, ny: usize) -> usize {
    let pos = JET_ORDERS
        .iter()
        .position(|&o| o == (nx, ny))
        .expect("jet order above three");
    comp * 10 + pos
}

// Positions of Ẑ inside the full jet.
const HAT: [(usize, usize, usize); 8] = [
    (0, 0, 0),
    (1, 0, 0),
    (0, 1, 0),
    (1, 1, 0),
    (0, 0, 1),
    (1, 0, 1),
    (0, 1, 1),
    (1, 1, 1),
];

/// Symbolic data needed to assemble `X` and `Y` at arbitrary points.
pub struct Prolongation {
    equations: Vec<Vec<JetTerm>>,
    env: ParamEnv,
}

impl Prolongation {
    pub fn new(pc: &ProjectiveConnection) -> Self {
        let base = symmetry_system(&pc.k);
        let mut equations: Vec<Vec<JetTerm>> = base.to_vec();
        for eq in &base {
            equations.push(diff_terms(eq, Coord::X));
            equations.push(diff_terms(eq, Coord::Y));
        }
        for eq in equations.iter_mut() {
            for t in eq.iter_mut() {
                t.coef = simplify(&t.coef);
            }
        }
        Prolongation {
            equations,
            env: pc.env.clone(),
        }
    }

    /// `X(p)` and `Y(p)`.
    pub fn matrices_at(&self, p: (f64, f64)) -> Result<(Mat8, Mat8), ProjectiveError> {
        // Linear system over the 20 jet variables, split into the 8 free ones (Ẑ)
        // and the 12 dependent ones.
        let free: Vec<usize> = HAT.iter().map(|&(c, nx, ny)| jet_index(c, nx, ny)).collect();
        let dependent: Vec<usize> = (0..20).filter(|i| !free.contains(i)).collect();
        let n = self.equations.len();
        let mut a = DMatrix::<f64>::zeros(n, 20);
        for (r, eq) in self.equations.iter().enumerate() {
            for t in eq {
                a[(r, jet_index(t.comp, t.nx, t.ny))] += t.coef.eval(p, &self.env)?;
            }
        }
        let a_dep = DMatrix::from_fn(n, dependent.len(), |r, c| a[(r, dependent[c])]);
        let a_free = DMatrix::from_fn(n, 8, |r, c| a[(r, free[c])]);
        let lu = a_dep.lu();
        let solved = lu
            .solve(&(-a_free))
            .ok_or(ProjectiveError::SingularProlongation { x: p.0, y: p.1 })?;
        // Row `k` of `express` gives jet variable k as a combination of Ẑ.
        let express = |comp: usize, nx: usize, ny: usize| -> [f64; 8] {
            let idx = jet_index(comp, nx, ny);
            let mut row = [0.0; 8];
            if let Some(f) = free.iter().position(|&i| i == idx) {
                row[f] = 1.0;
            } else {
                let d = dependent.iter().position(|&i| i == idx).unwrap();
                for (j, v) in row.iter_mut().enumerate() {
                    *v = solved[(d, j)];
                }
            }
            row
        };
        let mut x = Mat8::zeros();
        let mut y = Mat8::zeros();
        for (j, &(c, nx, ny)) in HAT.iter().enumerate() {
            let rx = express(c, nx + 1, ny);
            let ry = express(c, nx, ny + 1);
            for i in 0..8 {
                x[(i, j)] = rx[i];
                y[(i, j)] = ry[i];
            }
        }
        Ok((x, y))
    }

    /// `X`, `Y` and the curvature `L = Y_x − X_y + XY − YX` at `p`.
    pub fn sample_at(&self, p: (f64, f64)) -> Result<SymmetryConnectionSample, ProjectiveError> {
        let (x, y) = self.matrices_at(p)?;
        let h = FD_STEP;
        let stencil = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];
        let mut y_x = Mat8::zeros();
        let mut x_y = Mat8::zeros();
        for (s, w) in stencil {
            let (_, ys) = self.matrices_at((p.0 + s * h, p.1))?;
            let (xs, _) = self.matrices_at((p.0, p.1 + s * h))?;
            y_x += ys * (w / (12.0 * h));
            x_y += xs * (w / (12.0 * h));
        }
        let curvature = y_x - x_y + x * y - y * x;
        Ok(SymmetryConnectionSample {
            point: p,
            x,
            y,
            curvature,
        })
    }
}

/// Assemble the prolonged connection and its curvature at `p`.
pub fn prolonged_connection_at(
    pc: &ProjectiveConnection,
    p: (f64, f64),
) -> Result<SymmetryConnectionSample, ProjectiveError> {
    Prolongation::new(pc).sample_at(p)
}

/// Whether the symmetry algebra can be 8-dimensional.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimensionBound {
    Eight,
    LessThanEight,
}

impl std::fmt::Display for DimensionBound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DimensionBound::Eight => write!(f, "=8"),
            DimensionBound::LessThanEight => write!(f, "<8"),
        }
    }
}

/// `=8` iff the Frobenius norm of the prolonged curvature is at most
/// [`CURVATURE_TOL`] at every point.
pub fn symmetry_dimension_bound(
    pc: &ProjectiveConnection,
    points: &[(f64, f64)],
) -> Result<DimensionBound, ProjectiveError> {
    let pro = Prolongation::new(pc);
    for &p in points {
        if pro.sample_at(p)?.curvature.norm() > CURVATURE_TOL {
            return Ok(DimensionBound::LessThanEight);
        }
    }
    Ok(DimensionBound::Eight)
}

/// Default sample set of a connection.
pub fn default_samples(pc: &ProjectiveConnection) -> Vec<(f64, f64)> {
    pc.samples(DEFAULT_SAMPLES)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn vf(a: &str, b: &str) -> VectorField {
        VectorField::new(parse(a).unwrap(), parse(b).unwrap())
    }

    fn dom() -> Domain {
        Domain::rect(0.25, 1.75, -1.0, 1.0)
    }

    fn metric(e: &str, g: &str, env: ParamEnv) -> Metric2 {
        Metric2::diagonal(parse(e).unwrap(), parse(g).unwrap(), env, dom()).unwrap()
    }

    fn connection_12(d: f64) -> ProjectiveConnection {
        ProjectiveConnection::abcd(0.0, 0.5, 0.0, d, dom())
    }

    #[test]
    fn flat_metric_gives_zero_connection() {
        let pc = ProjectiveConnection::of_metric(&Metric2::euclidean());
        assert!(pc.k.iter().all(Expr::is_zero));
    }

    #[test]
    fn connection_of_exponential_metric() {
        let env = ParamEnv::new().with("D", 0.7);
        let pc = ProjectiveConnection::of_metric(&metric("exp(3*x)", "-2*D*exp(x)", env));
        for p in pc.samples(10) {
            let k = pc.eval_at(p).unwrap();
            assert!(k[0].abs() < 1e-14 && k[2].abs() < 1e-14);
            assert!((k[1] - 0.5).abs() < 1e-14);
            assert!((k[3] - 0.7 * (-2.0 * p.0).exp()).abs() < 1e-13);
        }
        let pc = ProjectiveConnection::of_metric(&metric("exp(3*x)", "exp(x)", ParamEnv::new()));
        for p in pc.samples(10) {
            let k = pc.eval_at(p).unwrap();
            assert!((k[3] + 0.5 * (-2.0 * p.0).exp()).abs() < 1e-13);
        }
    }

    #[test]
    fn known_symmetries_have_zero_residual() {
        let pc = ProjectiveConnection::abcd(0.3, -1.2, 0.8, 1.5, dom());
        let pts = pc.samples(50);
        assert!(symmetry_residual(&pc, &vf("0", "1"), &pts).unwrap().max_abs <= 1e-10);
        let pc = connection_12(0.9);
        let r = symmetry_residual(&pc, &vf("2*y", "1+y^2"), &pts).unwrap();
        assert!(r.max_abs <= 1e-10, "{r:?}");
        assert!(symmetry_residual(&pc, &vf("1", "y"), &pts).unwrap().max_abs <= 1e-10);
    }

    #[test]
    fn non_symmetry_is_detected() {
        let w = "4*x^2+y^2+1";
        let g = Metric2::diagonal(
            parse(w).unwrap(),
            parse(w).unwrap(),
            ParamEnv::new(),
            Domain::rect(-1.0, 1.0, -1.0, 1.0),
        )
        .unwrap();
        let pc = ProjectiveConnection::of_metric(&g);
        let r = symmetry_residual(&pc, &vf("y", "0"), &pc.samples(100)).unwrap();
        assert!(r.max_abs > 0.1);
        assert_eq!(r.per_equation.len(), 4);
    }

    #[test]
    fn invariants_of_abcd_family() {
        // L1 = e^{-x}(9AD - C - BC), L2 = e^{-2x}(6D(B-2) - 2C^2), by hand expansion.
        let (a, b, c, d) = (0.4, 1.3, -0.7, 2.1);
        let pc = ProjectiveConnection::abcd(a, b, c, d, dom());
        let inv = liouville_invariants(&pc);
        for p in pc.samples(10) {
            let l1 = inv.l1.eval(p, &pc.env).unwrap();
            let l2 = inv.l2.eval(p, &pc.env).unwrap();
            let e1 = (-p.0).exp() * (9.0 * a * d - c - b * c);
            let e2 = (-2.0 * p.0).exp() * (6.0 * d * (b - 2.0) - 2.0 * c * c);
            assert!((l1 - e1).abs() < 1e-12 && (l2 - e2).abs() < 1e-12);
        }
    }

    #[test]
    fn flatness_examples() {
        let pts = dom().samples(50, &ParamEnv::new());
        assert!(is_flat(&ProjectiveConnection::straight_lines(dom()), &pts, FLAT_TOL).unwrap());
        let e = "1/(1+x^2+y^2)^2";
        let sphere = ProjectiveConnection::of_metric(&metric(e, e, ParamEnv::new()));
        assert!(is_flat(&sphere, &pts, FLAT_TOL).unwrap());
        let two_a = ProjectiveConnection::of_metric(&metric("exp(3*x)", "exp(x)", ParamEnv::new()));
        assert!(!is_flat(&two_a, &pts, FLAT_TOL).unwrap());
        let env = ParamEnv::from([("b", 3.0), ("eps1", 1.0), ("eps2", 1.0)]);
        let one_a = ProjectiveConnection::of_metric(&metric("eps1*exp((b+2)*x)", "eps2*exp(b*x)", env));
        let inv = liouville_invariants(&one_a);
        let big = pts
            .iter()
            .any(|&p| inv.l1.eval(p, &one_a.env).unwrap().abs() + inv.l2.eval(p, &one_a.env).unwrap().abs() > 1e-3);
        assert!(big);
    }

    #[test]
    fn lie_derivative_of_lambda_vanishes_along_symmetries() {
        let pc = connection_12(-0.5);
        for z in [vf("0", "1"), vf("1", "y"), vf("2*y", "1+y^2")] {
            let comps = lambda_lie_derivative(&pc, &z);
            let r = ResidualReport::from_exprs(&comps, &pc.samples(30), &pc.env).unwrap();
            assert!(r.max_abs <= 1e-9);
        }
    }

    #[test]
    fn prolongation_transports_known_symmetry_jets() {
        let pc = connection_12(0.8);
        let z = vf("2*y", "1+y^2");
        let pro = Prolongation::new(&pc);
        let h = 1e-5;
        for p in [(0.5, 0.2), (1.2, -0.7)] {
            let (x, y) = pro.matrices_at(p).unwrap();
            let jet = z.jet(p, &pc.env).unwrap();
            let row = SMatrix::<f64, 1, 8>::from_row_slice(&jet);
            let jp = z.jet((p.0 + h, p.1), &pc.env).unwrap();
            let jm = z.jet((p.0 - h, p.1), &pc.env).unwrap();
            let kp = z.jet((p.0, p.1 + h), &pc.env).unwrap();
            let km = z.jet((p.0, p.1 - h), &pc.env).unwrap();
            let ax = row * x;
            let ay = row * y;
            for j in 0..8 {
                assert!((ax[j] - (jp[j] - jm[j]) / (2.0 * h)).abs() < 1e-5);
                assert!((ay[j] - (kp[j] - km[j]) / (2.0 * h)).abs() < 1e-5);
            }
            // The constant field (0,1) has a constant jet annihilated by X and Y.
            let c = SMatrix::<f64, 1, 8>::from_row_slice(&vf("0", "1").jet(p, &pc.env).unwrap());
            assert!((c * x).norm() < 1e-12 && (c * y).norm() < 1e-12);
        }
    }

    #[test]
    fn symmetry_jets_lie_in_curvature_kernel() {
        let pc = connection_12(0.8);
        let s = prolonged_connection_at(&pc, (0.9, 0.3)).unwrap();
        assert!(s.curvature_rank(1e-8) >= 1);
        for z in [vf("0", "1"), vf("1", "y"), vf("2*y", "1+y^2")] {
            let row = SMatrix::<f64, 1, 8>::from_row_slice(&z.jet(s.point, &pc.env).unwrap());
            assert!((row * s.curvature).norm() < 1e-6);
        }
    }

    #[test]
    fn dimension_bound() {
        let pts = dom().samples(10, &ParamEnv::new());
        let flat = ProjectiveConnection::straight_lines(dom());
        assert_eq!(symmetry_dimension_bound(&flat, &pts).unwrap(), DimensionBound::Eight);
        let e = "1/(1+x^2+y^2)^2";
        let sphere = ProjectiveConnection::of_metric(&metric(e, e, ParamEnv::new()));
        assert_eq!(symmetry_dimension_bound(&sphere, &pts).unwrap(), DimensionBound::Eight);
        assert_eq!(
            symmetry_dimension_bound(&connection_12(-0.5), &pts).unwrap(),
            DimensionBound::LessThanEight
        );
        assert_eq!(DimensionBound::LessThanEight.to_string(), "<8");
    }
}
