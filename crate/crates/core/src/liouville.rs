//! Metrization of projective connections.
//!
//! A metric `g` has the projective connection `K` iff `a = det(g)^{-2/3} g`
//! solves a linear first-order system in `K` (see [`lin1_equations`]). For the
//! connections `y'' = A e^x + B y' + C e^{-x} y'^2 + D e^{-2x} y'^3` the
//! solutions with a three-term exponential-polynomial ansatz in `y`
//!
//! ```text
//! a11 = Σ c0j(x) φj(y),   a12 = ½ Σ c1j(x) φj(y),   a22 = Σ c2j(x) φj(y)
//! ```
//!
//! reduce to a 9×9 linear ODE `c' = M(x) c` together with three pointwise
//! linear constraints. [`solution_space_dimension`] counts the solutions of
//! that combined system numerically.

use nalgebra::{ComplexField, DMatrix, SMatrix, SVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::expr::{simplify, EvalError, Expr, ParamEnv};
use crate::geometry::{Domain, GeometryError, Metric2};
use crate::projective::{ProjectiveConnection, ResidualReport};

/// Relative singular-value threshold for rank decisions.
pub const RANK_REL_TOL: f64 = 1e-7;
/// Minimum ratio between the smallest kept and the largest dropped singular value.
pub const RANK_GAP: f64 = 1e3;
/// Default integration interval.
pub const DEFAULT_X_RANGE: (f64, f64) = (0.5, 2.5);
/// Default number of constraint points.
pub const DEFAULT_N_CHECK: usize = 12;
/// Largest step of the fundamental-matrix integration.
pub const MAX_STEP: f64 = 1e-3;

#[derive(Clone, Debug, Error, PartialEq)]
pub enum LiouvilleError {
    #[error("inconsistent case {case} for alphas {alphas}")]
    InconsistentCase { case: u8, alphas: String },
    #[error("indeterminate rank: singular value gap {gap:.3e} below {RANK_GAP:e}")]
    IndeterminateRank { gap: f64, singular_values: Vec<f64> },
    #[error("integration produced non-finite values at x = {x}")]
    IntegratorFailure { x: f64 },
    #[error("degenerate family: lambda must be nonzero")]
    DegenerateFamily,
    #[error("invalid x range [{0}, {1}]")]
    InvalidRange(f64, f64),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// A symmetric field `a11 dx^2 + 2 a12 dx dy + a22 dy^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticForm {
    pub a11: Expr,
    pub a12: Expr,
    pub a22: Expr,
}

impl QuadraticForm {
    pub fn new(a11: Expr, a12: Expr, a22: Expr) -> Self {
        QuadraticForm { a11, a12, a22 }
    }

    pub fn diagonal(a11: Expr, a22: Expr) -> Self {
        QuadraticForm::new(a11, Expr::zero(), a22)
    }

    pub fn identity() -> Self {
        QuadraticForm::diagonal(Expr::one(), Expr::one())
    }

    pub fn of_metric(g: &Metric2) -> Self {
        QuadraticForm::new(g.e.clone(), g.f.clone(), g.g.clone())
    }

    pub fn det(&self) -> Expr {
        simplify(&(&self.a11 * &self.a22 - self.a12.powi(2)))
    }

    pub fn scaled(&self, s: &Expr) -> Self {
        QuadraticForm::new(
            simplify(&(s * &self.a11)),
            simplify(&(s * &self.a12)),
            simplify(&(s * &self.a22)),
        )
    }

    /// Replace parameters by their values.
    pub fn bind(&self, env: &ParamEnv) -> Self {
        QuadraticForm::new(self.a11.bind(env), self.a12.bind(env), self.a22.bind(env))
    }

    /// `α·self + β·other`.
    pub fn combine(&self, alpha: f64, other: &QuadraticForm, beta: f64) -> Self {
        let lin = |a: &Expr, b: &Expr| simplify(&(alpha * a + beta * b));
        QuadraticForm::new(
            lin(&self.a11, &other.a11),
            lin(&self.a12, &other.a12),
            lin(&self.a22, &other.a22),
        )
    }

    /// Numeric components `[a11, a12, a22]`.
    pub fn eval(&self, p: (f64, f64), env: &ParamEnv) -> Result<[f64; 3], EvalError> {
        Ok([
            self.a11.eval(p, env)?,
            self.a12.eval(p, env)?,
            self.a22.eval(p, env)?,
        ])
    }

    /// Value on a tangent vector.
    pub fn value(&self, p: (f64, f64), v: (f64, f64), env: &ParamEnv) -> Result<f64, EvalError> {
        let [a, b, c] = self.eval(p, env)?;
        Ok(a * v.0 * v.0 + 2.0 * b * v.0 * v.1 + c * v.1 * v.1)
    }
}

/// `a = det(g)^{-2/3} g`, with the real cube root for negative determinants.
pub fn mobility_matrix(g: &Metric2) -> QuadraticForm {
    let factor = g.det().pow_rat(-2, 3);
    QuadraticForm::of_metric(g).scaled(&factor)
}

/// Inverse of [`mobility_matrix`]: `g = a / det(a)^2`.
pub fn metric_from_mobility(a: &QuadraticForm, env: ParamEnv, domain: Domain) -> Result<Metric2, LiouvilleError> {
    let factor = a.det().powi(-2);
    let g = a.scaled(&factor);
    Ok(Metric2::new(g.a11, g.a12, g.a22, env, domain)?)
}

/// Left-hand sides of the linear system for `a` given the connection values
/// `k`, the components `a = [a11, a12, a22]` and their partial derivatives.
pub fn lin1_equations<T: ComplexField<RealField = f64> + Copy>(k: [f64; 4], a: [T; 3], a_x: [T; 3], a_y: [T; 3]) -> [T; 4] {
    let r = |v: f64| T::from_real(v);
    let [k0, k1, k2, k3] = k;
    let [a11, a12, a22] = a;
    [
        a_x[0] - r(2.0 / 3.0 * k1) * a11 + r(2.0 * k0) * a12,
        a_y[0] + r(2.0) * a_x[1] - r(4.0 / 3.0 * k2) * a11 + r(2.0 / 3.0 * k1) * a12 + r(2.0 * k0) * a22,
        r(2.0) * a_y[1] + a_x[2] - r(2.0 * k3) * a11 - r(2.0 / 3.0 * k2) * a12 + r(4.0 / 3.0 * k1) * a22,
        a_y[2] - r(2.0 * k3) * a12 + r(2.0 / 3.0 * k2) * a22,
    ]
}

/// Symbolic left-hand sides of the linear system.
pub fn lin1_exprs(pc: &ProjectiveConnection, a: &QuadraticForm) -> [Expr; 4] {
    let [k0, k1, k2, k3] = &pc.k;
    let (a11, a12, a22) = (&a.a11, &a.a12, &a.a22);
    let c = |v: f64| Expr::constant(v);
    [
        a11.dx() - c(2.0 / 3.0) * k1 * a11 + c(2.0) * k0 * a12,
        a11.dy() + c(2.0) * a12.dx() - c(4.0 / 3.0) * k2 * a11 + c(2.0 / 3.0) * k1 * a12 + c(2.0) * k0 * a22,
        c(2.0) * a12.dy() + a22.dx() - c(2.0) * k3 * a11 - c(2.0 / 3.0) * k2 * a12 + c(4.0 / 3.0) * k1 * a22,
        a22.dy() - c(2.0) * k3 * a12 + c(2.0 / 3.0) * k2 * a22,
    ]
}

/// Maximum residual of the linear system over the points.
pub fn lin1_residual(
    pc: &ProjectiveConnection,
    a: &QuadraticForm,
    points: &[(f64, f64)],
) -> Result<ResidualReport, EvalError> {
    ResidualReport::from_exprs(&lin1_exprs(pc, a), points, &pc.env)
}

/// Constants of `y'' = A e^x + B y' + C e^{-x} y'^2 + D e^{-2x} y'^3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AbcdConnection {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl AbcdConnection {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        AbcdConnection { a, b, c, d }
    }

    /// One of the normalized classes: `(D≠0, C=0)`, `(D=0, C≠0, B=0)` or all zero.
    pub fn is_normalized(&self) -> bool {
        (self.d != 0.0 && self.c == 0.0)
            || (self.d == 0.0 && self.c != 0.0 && self.b == 0.0)
            || (self.a == 0.0 && self.b == 0.0 && self.c == 0.0 && self.d == 0.0)
    }

    /// The flatness conditions in terms of the constants.
    pub fn flatness_conditions(&self) -> (f64, f64) {
        let AbcdConnection { a, b, c, d } = *self;
        (6.0 * d * (b - 2.0) - 2.0 * c * c, 9.0 * a * d - c - b * c)
    }

    pub fn connection(&self, domain: Domain) -> ProjectiveConnection {
        ProjectiveConnection::abcd(self.a, self.b, self.c, self.d, domain)
    }

    /// `[K0, K1, K2, K3]` at abscissa `x`.
    pub fn k_at(&self, x: f64) -> [f64; 4] {
        [
            self.a * x.exp(),
            self.b,
            self.c * (-x).exp(),
            self.d * (-2.0 * x).exp(),
        ]
    }
}

/// The two-parameter family of solutions for `A = C = 0`, `D ≠ 0`:
/// `a = λ diag(e^{2Bx/3}, (D e^{2(B−1)x}/(B−1) + H) e^{−4Bx/3})` for `B ≠ 1` and
/// `a = λ diag(e^{2x/3}, (2Dx + H) e^{−4x/3})` for `B = 1`.
pub fn general_solution_family(b: f64, d: f64, lambda: f64, h: f64) -> Result<QuadraticForm, LiouvilleError> {
    if lambda == 0.0 {
        return Err(LiouvilleError::DegenerateFamily);
    }
    let x = Expr::x();
    let a11 = lambda * (2.0 * b / 3.0 * &x).exp();
    let bracket = if b == 1.0 {
        2.0 * d * &x + h
    } else {
        d / (b - 1.0) * (2.0 * (b - 1.0) * &x).exp() + h
    };
    let a22 = lambda * bracket * (-4.0 * b / 3.0 * &x).exp();
    Ok(QuadraticForm::diagonal(simplify(&a11), simplify(&a22)))
}

/// Multiplicity pattern of the characteristic roots in the ansatz.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnsatzCase {
    /// Three distinct roots, basis `e^{αj y}`.
    Distinct,
    /// `α1 ≠ α2 = α3`, basis `e^{α1 y}, e^{α2 y}, y e^{α2 y}`.
    OneRepeated,
    /// `α1 = α2 = α3`, basis `e^{α y}, y e^{α y}, y^2 e^{α y}`.
    TripleRoot,
}

impl AnsatzCase {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(AnsatzCase::Distinct),
            2 => Some(AnsatzCase::OneRepeated),
            3 => Some(AnsatzCase::TripleRoot),
            _ => None,
        }
    }

    pub fn number(self) -> u8 {
        match self {
            AnsatzCase::Distinct => 1,
            AnsatzCase::OneRepeated => 2,
            AnsatzCase::TripleRoot => 3,
        }
    }

    /// The coupling constants `(k1, k2)`.
    pub fn ks(self) -> (f64, f64) {
        match self {
            AnsatzCase::Distinct => (0.0, 0.0),
            AnsatzCase::OneRepeated => (0.0, -1.0),
            AnsatzCase::TripleRoot => (-1.0, -2.0),
        }
    }
}

/// Scalars the ODE system can be integrated over.
pub trait OdeField: ComplexField<RealField = f64> + Copy {
    fn from_complex(z: Complex64) -> Option<Self>;
    fn to_complex(self) -> Complex64;
}

impl OdeField for f64 {
    fn from_complex(z: Complex64) -> Option<Self> {
        (z.im == 0.0).then_some(z.re)
    }

    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl OdeField for Complex64 {
    fn from_complex(z: Complex64) -> Option<Self> {
        Some(z)
    }

    fn to_complex(self) -> Complex64 {
        self
    }
}

pub type Mat9<T> = SMatrix<T, 9, 9>;
pub type Mat3<T> = SMatrix<T, 3, 3>;

/// The 9×9 system `c' = M(x) c` with its three constraints
/// `T(x) (c21, c22, c23) = D e^{−2x} (c11, c12, c13)`.
///
/// `c` is ordered `(c01, c02, c03, c11, c12, c13, c21, c22, c23)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientSystem {
    pub abcd: AbcdConnection,
    pub case: AnsatzCase,
    pub alphas: [Complex64; 3],
}

impl CoefficientSystem {
    pub fn ks(&self) -> (f64, f64) {
        self.case.ks()
    }

    pub fn is_real(&self) -> bool {
        self.alphas.iter().all(|a| a.im == 0.0)
    }

    /// Entry-wise `M(x)`.
    pub fn m_at<T: OdeField>(&self, x: f64) -> Mat9<T> {
        let AbcdConnection { a, b, c, d } = self.abcd;
        let (k1, k2) = self.ks();
        let ks = [k1, k2];
        let r = |v: f64| Complex64::new(v, 0.0);
        let mut m = SMatrix::<Complex64, 9, 9>::zeros();
        let (ex, emx, em2x) = (x.exp(), (-x).exp(), (-2.0 * x).exp());
        for i in 0..3 {
            let al = self.alphas[i];
            m[(i, i)] = r(2.0 / 3.0 * b);
            m[(i, 3 + i)] = r(-a * ex);
            m[(3 + i, i)] = r(4.0 / 3.0 * c * emx) - al;
            m[(3 + i, 3 + i)] = r(-b / 3.0);
            m[(3 + i, 6 + i)] = r(-2.0 * a * ex);
            m[(6 + i, i)] = r(2.0 * d * em2x);
            m[(6 + i, 3 + i)] = r(c / 3.0 * emx) - al;
            m[(6 + i, 6 + i)] = r(-4.0 / 3.0 * b);
            if i < 2 {
                m[(3 + i, i + 1)] = r(ks[i]);
                m[(6 + i, 3 + i + 1)] = r(ks[i]);
            }
        }
        m.map(|z| T::from_complex(z).expect("complex entry in a real system"))
    }

    /// Entry-wise `T(x)`.
    pub fn t_at<T: OdeField>(&self, x: f64) -> Mat3<T> {
        let (k1, k2) = self.ks();
        let mut t = SMatrix::<Complex64, 3, 3>::zeros();
        let shift = 2.0 / 3.0 * self.abcd.c * (-x).exp();
        for i in 0..3 {
            t[(i, i)] = self.alphas[i] + shift;
        }
        t[(0, 1)] = Complex64::new(-k1, 0.0);
        t[(1, 2)] = Complex64::new(-k2, 0.0);
        t.map(|z| T::from_complex(z).expect("complex entry in a real system"))
    }

    /// Residuals `T(x) c2 − D e^{−2x} c1` of the constraints for a coefficient vector.
    pub fn constraint_rows<T: OdeField>(&self, x: f64) -> SMatrix<T, 3, 9> {
        let t = self.t_at::<T>(x);
        let mut rows = SMatrix::<T, 3, 9>::zeros();
        let coupling = T::from_real(self.abcd.d * (-2.0 * x).exp());
        for i in 0..3 {
            rows[(i, 3 + i)] = -coupling;
            for j in 0..3 {
                rows[(i, 6 + j)] = t[(i, j)];
            }
        }
        rows
    }

    /// Basis functions `φj(y)` and their derivatives.
    pub fn basis_at<T: OdeField>(&self, y: f64) -> ([T; 3], [T; 3]) {
        let e = |al: Complex64| (al * y).exp();
        let z: ([Complex64; 3], [Complex64; 3]) = match self.case {
            AnsatzCase::Distinct => {
                let v = self.alphas.map(e);
                (v, [0, 1, 2].map(|i| self.alphas[i] * v[i]))
            }
            AnsatzCase::OneRepeated => {
                let (a1, a2) = (self.alphas[0], self.alphas[1]);
                let (e1, e2) = (e(a1), e(a2));
                let yy = Complex64::new(y, 0.0);
                (
                    [e1, e2, yy * e2],
                    [a1 * e1, a2 * e2, e2 + a2 * yy * e2],
                )
            }
            AnsatzCase::TripleRoot => {
                let al = self.alphas[0];
                let e0 = e(al);
                let yy = Complex64::new(y, 0.0);
                let two = Complex64::new(2.0, 0.0);
                (
                    [e0, yy * e0, yy * yy * e0],
                    [al * e0, e0 + al * yy * e0, two * yy * e0 + al * yy * yy * e0],
                )
            }
        };
        (
            z.0.map(|v| T::from_complex(v).expect("complex basis in a real system")),
            z.1.map(|v| T::from_complex(v).expect("complex basis in a real system")),
        )
    }
}

/// Assemble and validate a coefficient system.
pub fn build_ode_system(
    abcd: AbcdConnection,
    case: AnsatzCase,
    alphas: [Complex64; 3],
) -> Result<CoefficientSystem, LiouvilleError> {
    let same = |a: Complex64, b: Complex64| (a - b).norm() <= 1e-12 * (1.0 + a.norm());
    let [a1, a2, a3] = alphas;
    let ok = match case {
        AnsatzCase::Distinct => !same(a1, a2) && !same(a2, a3) && !same(a1, a3),
        AnsatzCase::OneRepeated => !same(a1, a2) && same(a2, a3),
        AnsatzCase::TripleRoot => same(a1, a2) && same(a2, a3),
    };
    // The set of roots must be closed under conjugation for the ansatz to be real.
    let closed = alphas
        .iter()
        .all(|a| alphas.iter().any(|b| same(a.conj(), *b)));
    if !ok || !closed {
        return Err(LiouvilleError::InconsistentCase {
            case: case.number(),
            alphas: format!("{alphas:?}"),
        });
    }
    let mut alphas = alphas;
    if case == AnsatzCase::OneRepeated {
        alphas[2] = alphas[1];
    }
    if case == AnsatzCase::TripleRoot {
        alphas = [alphas[0]; 3];
    }
    Ok(CoefficientSystem { abcd, case, alphas })
}

/// Fundamental matrix `Φ(x)` (with `Φ(x0) = I`) sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct FundamentalSolution<T: OdeField> {
    pub x0: f64,
    pub step: f64,
    pub values: Vec<Mat9<T>>,
}

impl<T: OdeField> FundamentalSolution<T> {
    pub fn x_at(&self, i: usize) -> f64 {
        self.x0 + self.step * i as f64
    }
}

/// Integrate `Φ' = M(x) Φ` with the classical fourth-order Runge-Kutta scheme.
pub fn fundamental_matrix<T: OdeField>(
    sys: &CoefficientSystem,
    x_range: (f64, f64),
    max_step: f64,
) -> Result<FundamentalSolution<T>, LiouvilleError> {
    let (x0, x1) = x_range;
    if !(x1 > x0) || !x0.is_finite() || !x1.is_finite() {
        return Err(LiouvilleError::InvalidRange(x0, x1));
    }
    let n = ((x1 - x0) / max_step).ceil().max(1.0) as usize;
    let h = (x1 - x0) / n as f64;
    let hh = T::from_real(h);
    let half = T::from_real(0.5);
    let sixth = T::from_real(1.0 / 6.0);
    let two = T::from_real(2.0);
    let mut phi = Mat9::<T>::identity();
    let mut values = Vec::with_capacity(n + 1);
    values.push(phi);
    for i in 0..n {
        let x = x0 + h * i as f64;
        let m0 = sys.m_at::<T>(x);
        let mh = sys.m_at::<T>(x + 0.5 * h);
        let m1 = sys.m_at::<T>(x + h);
        let k1 = m0 * phi;
        let k2 = mh * (phi + k1 * (hh * half));
        let k3 = mh * (phi + k2 * (hh * half));
        let k4 = m1 * (phi + k3 * hh);
        phi += (k1 + k2 * two + k3 * two + k4) * (hh * sixth);
        if phi.iter().any(|v| !v.is_finite()) {
            return Err(LiouvilleError::IntegratorFailure { x: x + h });
        }
        values.push(phi);
    }
    Ok(FundamentalSolution { x0, step: h, values })
}

/// Outcome of a solution-space count.
#[derive(Clone, Debug)]
pub struct DimensionReport {
    pub dimension: usize,
    /// Singular values of the stacked constraint map, largest first.
    pub singular_values: Vec<f64>,
    /// Ratio between the smallest kept and the largest dropped singular value
    /// (infinite when nothing is dropped or everything is).
    pub gap: f64,
    /// Initial conditions `c(x0)` spanning the solution space.
    pub basis: Vec<SVector<Complex64, 9>>,
    /// Largest relative residual of the original linear system for `a`,
    /// rebuilt from the basis solutions at interior points.
    pub reassembly_residual: f64,
    pub x_range: (f64, f64),
}

/// Decide a numerical rank from singular values (largest first).
pub fn decide_rank(singular_values: &[f64]) -> Result<(usize, f64), LiouvilleError> {
    let top = singular_values.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok((0, f64::INFINITY));
    }
    let rank = singular_values.iter().filter(|&&s| s > RANK_REL_TOL * top).count();
    if rank == singular_values.len() {
        return Ok((rank, f64::INFINITY));
    }
    let kept = singular_values[rank - 1];
    let dropped = singular_values[rank];
    let gap = if dropped == 0.0 { f64::INFINITY } else { kept / dropped };
    if gap < RANK_GAP {
        return Err(LiouvilleError::IndeterminateRank {
            gap,
            singular_values: singular_values.to_vec(),
        });
    }
    Ok((rank, gap))
}

fn dimension_over<T: OdeField>(
    sys: &CoefficientSystem,
    x_range: (f64, f64),
    n_check: usize,
) -> Result<DimensionReport, LiouvilleError> {
    let fund = fundamental_matrix::<T>(sys, x_range, MAX_STEP)?;
    let last = fund.values.len() - 1;
    let n_check = n_check.max(1);
    // Constraint points spread over the interval, snapped to the grid.
    let idx: Vec<usize> = (0..n_check)
        .map(|k| (((k as f64 + 0.5) / n_check as f64) * last as f64).round() as usize)
        .collect();
    let mut stacked = DMatrix::<T>::zeros(3 * n_check, 9);
    for (r, &i) in idx.iter().enumerate() {
        let rows = sys.constraint_rows::<T>(fund.x_at(i)) * fund.values[i];
        for a in 0..3 {
            let norm = (0..9).map(|j| rows[(a, j)].modulus_squared()).sum::<f64>().sqrt();
            let scale = if norm > 0.0 { 1.0 / norm } else { 0.0 };
            for j in 0..9 {
                stacked[(3 * r + a, j)] = rows[(a, j)] * T::from_real(scale);
            }
        }
    }
    let svd = stacked.svd(false, true);
    let mut pairs: Vec<(f64, usize)> = svd.singular_values.iter().copied().zip(0..).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut singular_values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    singular_values.resize(9, 0.0);
    let (rank, gap) = decide_rank(&singular_values)?;
    let v_t = svd.v_t.expect("right singular vectors requested");
    // Null space: right singular vectors of dropped values plus any missing rows.
    let mut basis = Vec::new();
    let kept: Vec<usize> = pairs.iter().take(rank).map(|p| p.1).collect();
    let mut span = DMatrix::<Complex64>::zeros(kept.len(), 9);
    for (r, &k) in kept.iter().enumerate() {
        for j in 0..9 {
            span[(r, j)] = v_t[(k, j)].to_complex();
        }
    }
    // Orthogonal complement of the kept rows, computed over C.
    let gram = if kept.is_empty() {
        DMatrix::<Complex64>::identity(9, 9)
    } else {
        let proj = span.adjoint() * &span;
        DMatrix::<Complex64>::identity(9, 9) - proj
    };
    let comp = gram.svd(true, false);
    let u = comp.u.expect("left singular vectors requested");
    let mut order: Vec<(f64, usize)> = comp.singular_values.iter().copied().zip(0..).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));
    for &(_, c) in order.iter().take(9 - rank) {
        basis.push(SVector::<Complex64, 9>::from_fn(|i, _| u[(i, c)]));
    }
    let reassembly_residual = reassembly_check(sys, &fund, &basis)?;
    Ok(DimensionReport {
        dimension: 9 - rank,
        singular_values,
        gap,
        basis,
        reassembly_residual,
        x_range,
    })
}

/// Rebuild `a` from each basis solution and evaluate the linear system for `a`
/// at interior points. Returns the largest residual relative to the size of
/// the terms involved.
fn reassembly_check<T: OdeField>(
    sys: &CoefficientSystem,
    fund: &FundamentalSolution<T>,
    basis: &[SVector<Complex64, 9>],
) -> Result<f64, LiouvilleError> {
    let last = fund.values.len() - 1;
    let mut worst: f64 = 0.0;
    let half = Complex64::new(0.5, 0.0);
    for v in basis {
        for k in 0..50 {
            let i = ((k as f64 + 0.5) / 50.0 * last as f64).round() as usize;
            let x = fund.x_at(i);
            let phi = fund.values[i].map(OdeField::to_complex);
            let c = phi * v;
            let m = sys.m_at::<Complex64>(x);
            let dc = m * c;
            for y in [-0.5, 0.0, 0.5] {
                let (f, df) = sys.basis_at::<Complex64>(y);
                let comb = |off: usize, vec: &SVector<Complex64, 9>, b: &[Complex64; 3]| {
                    (0..3).map(|j| vec[off + j] * b[j]).sum::<Complex64>()
                };
                let a = [comb(0, &c, &f), half * comb(3, &c, &f), comb(6, &c, &f)];
                let a_x = [comb(0, &dc, &f), half * comb(3, &dc, &f), comb(6, &dc, &f)];
                let a_y = [comb(0, &c, &df), half * comb(3, &c, &df), comb(6, &c, &df)];
                let res = lin1_equations(sys.abcd.k_at(x), a, a_x, a_y);
                let scale = a
                    .iter()
                    .chain(a_x.iter())
                    .chain(a_y.iter())
                    .map(|z| z.norm())
                    .fold(0.0, f64::max)
                    .max(1e-300);
                for r in res {
                    worst = worst.max(r.norm() / scale);
                }
            }
        }
    }
    Ok(worst)
}

/// Dimension of the space of coefficient vectors solving both the ODE and the
/// constraints on `x_range`.
///
/// For complex roots (closed under conjugation) the system is integrated over
/// `C`; the real solutions form a real form of the complex solution space, so
/// the count is the same.
pub fn solution_space_dimension(
    sys: &CoefficientSystem,
    x_range: (f64, f64),
    n_check: usize,
) -> Result<DimensionReport, LiouvilleError> {
    if sys.is_real() {
        dimension_over::<f64>(sys, x_range, n_check)
    } else {
        dimension_over::<Complex64>(sys, x_range, n_check)
    }
}

/// Solution values `c(x)` for an initial condition, at grid points of the
/// fundamental solution.
pub fn solution_values<T: OdeField>(fund: &FundamentalSolution<T>, c0: &SVector<Complex64, 9>) -> Vec<(f64, SVector<Complex64, 9>)> {
    fund.values
        .iter()
        .enumerate()
        .map(|(i, phi)| (fund.x_at(i), phi.map(OdeField::to_complex) * c0))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn dom() -> Domain {
        Domain::rect(0.5, 2.5, -1.0, 1.0)
    }

    fn real3(a: f64) -> [Complex64; 3] {
        [Complex64::new(a, 0.0); 3]
    }

    fn metric(e: &str, g: &str, env: ParamEnv) -> Metric2 {
        Metric2::diagonal(parse(e).unwrap(), parse(g).unwrap(), env, dom()).unwrap()
    }

    #[test]
    fn mobility_of_flat_and_exponential_metrics() {
        let a = mobility_matrix(&Metric2::euclidean());
        for p in [(0.1, 0.2), (-0.5, 0.9)] {
            let v = a.eval(p, &ParamEnv::new()).unwrap();
            assert!((v[0] - 1.0).abs() < 1e-15 && v[1] == 0.0 && (v[2] - 1.0).abs() < 1e-15);
        }
        let env = ParamEnv::from([("eps1", 1.0), ("eps2", 1.0)]);
        let g = metric("eps1*exp(3*x)", "eps2*exp(x)", env.clone());
        let a = mobility_matrix(&g);
        for p in g.samples(10) {
            let v = a.eval(p, &env).unwrap();
            assert!((v[0] - (p.0 / 3.0).exp()).abs() < 1e-12 * v[0]);
            assert!((v[2] - (-5.0 * p.0 / 3.0).exp()).abs() < 1e-12 * v[2]);
        }
        let env = ParamEnv::from([("eps1", 1.0), ("eps2", -1.0)]);
        let g = metric("eps1*exp(3*x)", "eps2*exp(x)", env.clone());
        let a = mobility_matrix(&g);
        for p in g.samples(10) {
            assert!(a.det().eval(p, &env).unwrap() < 0.0);
        }
    }

    #[test]
    fn lin1_detects_perturbation() {
        let g = metric("exp(3*x)", "exp(x)", ParamEnv::new());
        let pc = ProjectiveConnection::of_metric(&g);
        let a = mobility_matrix(&g);
        let pts = g.samples(100);
        assert!(lin1_residual(&pc, &a, &pts).unwrap().max_abs <= 1e-10);
        let bumped = QuadraticForm::new(&a.a11 + 0.01, a.a12.clone(), a.a22.clone());
        assert!(lin1_residual(&pc, &bumped, &pts).unwrap().max_abs > 1e-4);
        let flat = ProjectiveConnection::straight_lines(dom());
        assert_eq!(lin1_residual(&flat, &QuadraticForm::identity(), &pts).unwrap().max_abs, 0.0);
    }

    #[test]
    fn numeric_and_symbolic_lin1_agree() {
        let g = metric("exp(2*x)*(1+y^2)", "x+exp(y)", ParamEnv::new());
        let pc = ProjectiveConnection::abcd(0.3, 1.1, -0.4, 0.9, dom());
        let a = QuadraticForm::of_metric(&g);
        let sym = lin1_exprs(&pc, &a);
        for p in g.samples(5) {
            let k = pc.eval_at(p).unwrap();
            let v = a.eval(p, &g.env).unwrap();
            let vx = QuadraticForm::new(a.a11.dx(), a.a12.dx(), a.a22.dx()).eval(p, &g.env).unwrap();
            let vy = QuadraticForm::new(a.a11.dy(), a.a12.dy(), a.a22.dy()).eval(p, &g.env).unwrap();
            let num = lin1_equations(k, v, vx, vy);
            for i in 0..4 {
                assert!((num[i] - sym[i].eval(p, &g.env).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_through_mobility() {
        let g = metric("exp(3*x)", "-exp(x)", ParamEnv::new());
        let back = metric_from_mobility(&mobility_matrix(&g), g.env.clone(), dom()).unwrap();
        for p in g.samples(20) {
            let a = g.matrix_at(p).unwrap();
            let b = back.matrix_at(p).unwrap();
            assert!((a[0][0] - b[0][0]).abs() <= 1e-10 * a[0][0].abs());
            assert!((a[1][1] - b[1][1]).abs() <= 1e-10 * a[1][1].abs());
        }
        let id = metric_from_mobility(&QuadraticForm::identity(), ParamEnv::new(), dom()).unwrap();
        assert_eq!(id.e.eval((0.7, 0.1), &ParamEnv::new()).unwrap(), 1.0);
    }

    #[test]
    fn family_solves_lin1() {
        for &(b, d, l, h) in &[(-1.0, 1.0, 1.0, 0.0), (-0.5, 2.0, 0.7, 1.5), (1.0, 1.0, 1.0, 0.0), (3.0, -1.0, 2.0, -0.3)] {
            let a = general_solution_family(b, d, l, h).unwrap();
            let pc = ProjectiveConnection::abcd(0.0, b, 0.0, d, dom());
            let r = lin1_residual(&pc, &a, &dom().samples(50, &ParamEnv::new())).unwrap();
            assert!(r.max_abs <= 1e-8, "{b} {d}: {}", r.max_abs);
        }
        let a = general_solution_family(1.0, 1.0, 1.0, 0.0).unwrap();
        let v = a.eval((0.8, 0.0), &ParamEnv::new()).unwrap();
        assert!((v[2] - 1.6 * (-4.0 * 0.8 / 3.0f64).exp()).abs() < 1e-14);
        assert_eq!(general_solution_family(1.0, 1.0, 0.0, 0.0), Err(LiouvilleError::DegenerateFamily));
    }

    #[test]
    fn family_metric_matches_exponential_normal_form() {
        // B = -1, D = 1, H = 0 gives b = 2(1 - B) = 4 after rescaling.
        let a = general_solution_family(-1.0, 1.0, 1.0, 0.0).unwrap();
        let g = metric_from_mobility(&a, ParamEnv::new(), dom()).unwrap();
        for p in g.samples(10) {
            let m = g.matrix_at(p).unwrap();
            let m2 = g.matrix_at((p.0 + 0.1, p.1)).unwrap();
            assert!(((m2[0][0] / m[0][0]).ln() / 0.1 - 6.0).abs() < 1e-9);
            assert!(((m2[1][1] / m[1][1]).ln() / 0.1 - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn matrices_follow_the_displayed_layout() {
        let sys = build_ode_system(AbcdConnection::new(0.0, 0.0, 0.0, 0.0), AnsatzCase::TripleRoot, real3(0.0)).unwrap();
        let m = sys.m_at::<f64>(0.3);
        assert_eq!(m[(3, 1)], -1.0);
        assert_eq!(m[(4, 2)], -2.0);
        assert_eq!(m[(6, 4)], -1.0);
        assert_eq!(m[(7, 5)], -2.0);
        assert_eq!(m.iter().filter(|v| **v != 0.0).count(), 4);
        let c = AbcdConnection::new(0.0, 0.0, 1.5, 0.0);
        let alphas = [0.0, 1.0, 2.0].map(|a| Complex64::new(a, 0.0));
        let sys = build_ode_system(c, AnsatzCase::Distinct, alphas).unwrap();
        let t = sys.t_at::<f64>(0.4);
        for i in 0..3 {
            assert!((t[(i, i)] - (i as f64 + 1.0 * (2.0 / 3.0) * 1.5 * (-0.4f64).exp())).abs() < 1e-15);
        }
        let sys = build_ode_system(AbcdConnection::new(0.0, 1.0, 0.0, 2.0), AnsatzCase::TripleRoot, real3(0.0)).unwrap();
        let rows = sys.constraint_rows::<f64>(0.5);
        assert!((rows[(0, 3)] + 2.0 * (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn inconsistent_cases_are_rejected() {
        let abcd = AbcdConnection::new(0.0, 0.0, 1.0, 0.0);
        assert!(build_ode_system(abcd, AnsatzCase::TripleRoot, [0.0, 1.0, 0.0].map(|a| Complex64::new(a, 0.0))).is_err());
        assert!(build_ode_system(abcd, AnsatzCase::Distinct, real3(1.0)).is_err());
        let unpaired = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(2.0, 0.0)];
        assert!(build_ode_system(abcd, AnsatzCase::Distinct, unpaired).is_err());
        let paired = [Complex64::new(0.0, 0.0), Complex64::new(1.0, 1.0), Complex64::new(1.0, -1.0)];
        assert!(build_ode_system(abcd, AnsatzCase::Distinct, paired).is_ok());
    }

    fn dim(abcd: AbcdConnection, case: AnsatzCase, alphas: [Complex64; 3]) -> DimensionReport {
        let sys = build_ode_system(abcd, case, alphas).unwrap();
        solution_space_dimension(&sys, DEFAULT_X_RANGE, DEFAULT_N_CHECK).unwrap()
    }

    #[test]
    fn trivial_solutions_only() {
        let r = dim(AbcdConnection::new(0.0, 0.0, 1.0, 0.0), AnsatzCase::TripleRoot, real3(0.0));
        assert_eq!(r.dimension, 0);
        let r = dim(AbcdConnection::new(1.0, 0.0, 0.0, 1.0), AnsatzCase::TripleRoot, real3(0.0));
        assert_eq!(r.dimension, 0);
        let alphas = [0.0, 1.0, -1.0].map(|a| Complex64::new(a, 0.0));
        let r = dim(AbcdConnection::new(0.0, 0.0, 1.0, 0.0), AnsatzCase::Distinct, alphas);
        assert_eq!(r.dimension, 0);
    }

    #[test]
    fn two_parameter_families() {
        for b in [-1.0, 1.0] {
            let r = dim(AbcdConnection::new(0.0, b, 0.0, 1.0), AnsatzCase::TripleRoot, real3(0.0));
            assert_eq!(r.dimension, 2, "B = {b}: {:?}", r.singular_values);
            assert!(r.reassembly_residual < 1e-8, "{}", r.reassembly_residual);
        }
    }

    #[test]
    fn family_spans_the_closed_form_solutions() {
        let (b, d) = (-1.0, 1.0);
        let sys = build_ode_system(AbcdConnection::new(0.0, b, 0.0, d), AnsatzCase::TripleRoot, real3(0.0)).unwrap();
        let r = solution_space_dimension(&sys, DEFAULT_X_RANGE, DEFAULT_N_CHECK).unwrap();
        let fund = fundamental_matrix::<f64>(&sys, DEFAULT_X_RANGE, MAX_STEP).unwrap();
        // Sample the solutions and the closed-form directions (∂a/∂λ, ∂a/∂H) at the same x.
        let xs: Vec<usize> = (0..20).map(|k| k * (fund.values.len() - 1) / 19).collect();
        let mut sol = DMatrix::<f64>::zeros(2 * xs.len(), r.basis.len());
        for (j, v) in r.basis.iter().enumerate() {
            let vals = solution_values(&fund, v);
            for (i, &k) in xs.iter().enumerate() {
                sol[(2 * i, j)] = vals[k].1[0].re;
                sol[(2 * i + 1, j)] = vals[k].1[6].re;
            }
        }
        let mut fam = DMatrix::<f64>::zeros(2 * xs.len(), 2);
        for (i, &k) in xs.iter().enumerate() {
            let x = fund.x_at(k);
            fam[(2 * i, 0)] = (2.0 * b * x / 3.0).exp();
            fam[(2 * i + 1, 0)] = d / (b - 1.0) * (2.0 * (b - 1.0) * x).exp() * (-4.0 * b * x / 3.0).exp();
            fam[(2 * i + 1, 1)] = (-4.0 * b * x / 3.0).exp();
        }
        let q1 = sol.qr().q();
        let q2 = fam.qr().q();
        let cosines = (q1.transpose() * q2).singular_values();
        for c in cosines.iter() {
            assert!((1.0 - c.min(1.0)).abs() < 1e-12, "{cosines}");
        }
    }

    #[test]
    fn complex_roots_are_integrated_over_c() {
        let paired = [Complex64::new(0.5, 0.0), Complex64::new(0.0, 1.0), Complex64::new(0.0, -1.0)];
        let r = dim(AbcdConnection::new(0.0, 0.0, 1.0, 0.0), AnsatzCase::Distinct, paired);
        assert_eq!(r.dimension, 0);
    }

    #[test]
    fn rank_decision_requires_a_gap() {
        assert_eq!(decide_rank(&[1.0, 1e-12]).unwrap().0, 1);
        assert!(matches!(decide_rank(&[1.0, 1e-6, 1e-8]), Err(LiouvilleError::IndeterminateRank { .. })));
        assert_eq!(decide_rank(&[0.0, 0.0]).unwrap().0, 0);
    }
}
