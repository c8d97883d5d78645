//! Closed-form expressions in the coordinates `x`, `y` and named real parameters.
//!
//! Expressions are immutable trees behind an [`Arc`], so cloning is cheap and
//! evaluation or differentiation may run from several threads at once.
//! Arithmetic operators build lightly folded nodes (zeros and ones are
//! absorbed, constants are folded, nested sums and products are flattened);
//! [`simplify`] does the heavier like-term collection.
//!
//! Deciding whether an expression vanishes identically is done numerically
//! (see [`is_identically_zero`]) and is therefore probabilistic.

mod parse;
mod simplify;

use std::collections::BTreeMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::sync::Arc;

use thiserror::Error;

use crate::scalar::Scalar;

pub use parse::{parse, ParseError};
pub use simplify::simplify;

/// One of the two coordinates of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Coord {
    X,
    Y,
}

#[derive(Clone, Debug)]
pub enum Node {
    Const(f64),
    Coord(Coord),
    Param(Arc<str>),
    Neg(Expr),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Div(Expr, Expr),
    PowInt(Expr, i32),
    /// `base^(p/q)` with `q > 0`; negative bases are allowed only for odd `q`.
    PowRat(Expr, i32, u32),
    Exp(Expr),
    Ln(Expr),
    Atan(Expr),
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        use Node::*;
        match (self, other) {
            (Const(a), Const(b)) => a.to_bits() == b.to_bits(),
            (Coord(a), Coord(b)) => a == b,
            (Param(a), Param(b)) => a == b,
            (Neg(a), Neg(b)) | (Exp(a), Exp(b)) | (Ln(a), Ln(b)) | (Atan(a), Atan(b)) => a == b,
            (Add(a), Add(b)) | (Mul(a), Mul(b)) => a == b,
            (Div(a, b), Div(c, d)) => a == c && b == d,
            (PowInt(a, n), PowInt(b, m)) => n == m && a == b,
            (PowRat(a, p, q), PowRat(b, r, s)) => p == r && q == s && a == b,
            _ => false,
        }
    }
}

impl Eq for Node {}

impl Hash for Node {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        match self {
            Node::Const(c) => c.to_bits().hash(state),
            Node::Coord(c) => c.hash(state),
            Node::Param(p) => p.hash(state),
            Node::Neg(a) | Node::Exp(a) | Node::Ln(a) | Node::Atan(a) => a.hash(state),
            Node::Add(v) | Node::Mul(v) => v.hash(state),
            Node::Div(a, b) => {
                a.hash(state);
                b.hash(state);
            }
            Node::PowInt(a, n) => {
                a.hash(state);
                n.hash(state);
            }
            Node::PowRat(a, p, q) => {
                a.hash(state);
                p.hash(state);
                q.hash(state);
            }
        }
    }
}

/// A shared, immutable expression tree.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

/// Parameter bindings used during evaluation.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamEnv(BTreeMap<String, f64>);

impl ParamEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Union of two environments; bindings in `other` win.
    pub fn merged(&self, other: &ParamEnv) -> ParamEnv {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }
}

impl<const N: usize> From<[(&str, f64); N]> for ParamEnv {
    fn from(pairs: [(&str, f64); N]) -> Self {
        let mut env = ParamEnv::new();
        for (k, v) in pairs {
            env.set(k, v);
        }
        env
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DomainKind {
    DivisionByZero,
    LogOfNonPositive,
    EvenRootOfNegative,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DomainKind::DivisionByZero => write!(f, "division by zero"),
            DomainKind::LogOfNonPositive => write!(f, "logarithm of a non-positive number"),
            DomainKind::EvenRootOfNegative => write!(f, "even root of a negative number"),
        }
    }
}

#[derive(Clone, Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),
    #[error("domain violation at ({x}, {y}): {kind}")]
    Domain { kind: DomainKind, x: f64, y: f64 },
}

impl Expr {
    pub fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn constant(c: f64) -> Self {
        // adding 0.0 turns -0.0 into 0.0
        Expr::from_node(Node::Const(c + 0.0))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn x() -> Self {
        Expr::from_node(Node::Coord(Coord::X))
    }

    pub fn y() -> Self {
        Expr::from_node(Node::Coord(Coord::Y))
    }

    pub fn coord(c: Coord) -> Self {
        Expr::from_node(Node::Coord(c))
    }

    pub fn param(name: &str) -> Self {
        Expr::from_node(Node::Param(Arc::from(name)))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn is_one(&self) -> bool {
        self.as_const() == Some(1.0)
    }

    /// Sum with flattening, zero dropping and constant folding.
    pub fn sum<I: IntoIterator<Item = Expr>>(terms: I) -> Expr {
        let mut out = Vec::new();
        let mut constant = 0.0;
        for t in terms {
            match t.node() {
                Node::Const(c) => constant += c,
                Node::Add(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(c) => constant += c,
                            _ => out.push(u.clone()),
                        }
                    }
                }
                _ => out.push(t),
            }
        }
        if constant != 0.0 {
            out.push(Expr::constant(constant));
        }
        match out.len() {
            0 => Expr::zero(),
            1 => out.pop().unwrap(),
            _ => Expr::from_node(Node::Add(out)),
        }
    }

    /// Product with flattening, zero absorption, one dropping and constant folding.
    pub fn product<I: IntoIterator<Item = Expr>>(factors: I) -> Expr {
        let mut out = Vec::new();
        let mut constant = 1.0;
        for f in factors {
            match f.node() {
                Node::Const(c) => constant *= c,
                Node::Mul(inner) => {
                    for u in inner {
                        match u.node() {
                            Node::Const(c) => constant *= c,
                            _ => out.push(u.clone()),
                        }
                    }
                }
                _ => out.push(f),
            }
        }
        if constant == 0.0 {
            return Expr::zero();
        }
        if out.is_empty() {
            return Expr::constant(constant);
        }
        if constant == -1.0 {
            let inner = if out.len() == 1 {
                out.pop().unwrap()
            } else {
                Expr::from_node(Node::Mul(out))
            };
            return Expr::from_node(Node::Neg(inner));
        }
        if constant != 1.0 {
            out.insert(0, Expr::constant(constant));
        }
        if out.len() == 1 {
            out.pop().unwrap()
        } else {
            Expr::from_node(Node::Mul(out))
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        match (self.node(), n) {
            (_, 0) => Expr::one(),
            (_, 1) => self.clone(),
            (Node::Const(c), _) if c.powi(n).is_finite() => Expr::constant(c.powi(n)),
            (Node::PowInt(b, m), _) => b.powi(m * n),
            _ => Expr::from_node(Node::PowInt(self.clone(), n)),
        }
    }

    /// `self^(p/q)` with the fraction reduced; negative bases require odd `q`.
    pub fn pow_rat(&self, p: i32, q: u32) -> Expr {
        assert!(q > 0, "rational exponent with zero denominator");
        let g = gcd(p.unsigned_abs(), q).max(1);
        let (p, q) = (p / g as i32, q / g);
        if q == 1 {
            return self.powi(p);
        }
        if p == 0 {
            return Expr::one();
        }
        Expr::from_node(Node::PowRat(self.clone(), p, q))
    }

    pub fn sqrt(&self) -> Expr {
        self.pow_rat(1, 2)
    }

    pub fn exp(&self) -> Expr {
        match self.node() {
            Node::Const(c) if c.exp().is_finite() => Expr::constant(c.exp()),
            _ => Expr::from_node(Node::Exp(self.clone())),
        }
    }

    pub fn ln(&self) -> Expr {
        match self.node() {
            Node::Const(c) if *c > 0.0 => Expr::constant(c.ln()),
            Node::Exp(a) => a.clone(),
            _ => Expr::from_node(Node::Ln(self.clone())),
        }
    }

    pub fn atan(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(c.atan()),
            _ => Expr::from_node(Node::Atan(self.clone())),
        }
    }

    /// True when the expression mentions the coordinate anywhere.
    pub fn depends_on(&self, c: Coord) -> bool {
        match self.node() {
            Node::Const(_) | Node::Param(_) => false,
            Node::Coord(d) => *d == c,
            Node::Neg(a) | Node::Exp(a) | Node::Ln(a) | Node::Atan(a) => a.depends_on(c),
            Node::PowInt(a, _) | Node::PowRat(a, _, _) => a.depends_on(c),
            Node::Add(v) | Node::Mul(v) => v.iter().any(|t| t.depends_on(c)),
            Node::Div(a, b) => a.depends_on(c) || b.depends_on(c),
        }
    }

    /// Number of nodes in the tree (shared subtrees counted every time).
    pub fn size(&self) -> usize {
        1 + match self.node() {
            Node::Const(_) | Node::Param(_) | Node::Coord(_) => 0,
            Node::Neg(a) | Node::Exp(a) | Node::Ln(a) | Node::Atan(a) => a.size(),
            Node::PowInt(a, _) | Node::PowRat(a, _, _) => a.size(),
            Node::Add(v) | Node::Mul(v) => v.iter().map(Expr::size).sum(),
            Node::Div(a, b) => a.size() + b.size(),
        }
    }

    /// Names of all parameters mentioned, sorted and deduplicated.
    pub fn parameters(&self) -> Vec<String> {
        fn walk(e: &Expr, out: &mut Vec<String>) {
            match e.node() {
                Node::Param(p) => out.push(p.to_string()),
                Node::Const(_) | Node::Coord(_) => {}
                Node::Neg(a) | Node::Exp(a) | Node::Ln(a) | Node::Atan(a) => walk(a, out),
                Node::PowInt(a, _) | Node::PowRat(a, _, _) => walk(a, out),
                Node::Add(v) | Node::Mul(v) => v.iter().for_each(|t| walk(t, out)),
                Node::Div(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Exact symbolic derivative with respect to a coordinate.
    pub fn diff(&self, c: Coord) -> Expr {
        if !self.depends_on(c) {
            return Expr::zero();
        }
        match self.node() {
            Node::Const(_) | Node::Param(_) => Expr::zero(),
            Node::Coord(d) => {
                if *d == c {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => -a.diff(c),
            Node::Add(v) => Expr::sum(v.iter().map(|t| t.diff(c))),
            Node::Mul(v) => {
                let mut terms = Vec::with_capacity(v.len());
                for (i, f) in v.iter().enumerate() {
                    let df = f.diff(c);
                    if df.is_zero() {
                        continue;
                    }
                    let rest = v
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, g)| g.clone());
                    terms.push(Expr::product(std::iter::once(df).chain(rest)));
                }
                Expr::sum(terms)
            }
            Node::Div(a, b) => {
                let da = a.diff(c);
                let db = b.diff(c);
                let first = if da.is_zero() { Expr::zero() } else { &da / b };
                let second = if db.is_zero() {
                    Expr::zero()
                } else {
                    a * &db / b.powi(2)
                };
                first - second
            }
            Node::PowInt(b, n) => Expr::product([Expr::constant(*n as f64), b.powi(n - 1), b.diff(c)]),
            Node::PowRat(b, p, q) => {
                let factor = *p as f64 / *q as f64;
                Expr::product([
                    Expr::constant(factor),
                    b.pow_rat(p - *q as i32, *q),
                    b.diff(c),
                ])
            }
            Node::Exp(a) => self * &a.diff(c),
            Node::Ln(a) => a.diff(c) / a,
            Node::Atan(a) => a.diff(c) / (Expr::one() + a.powi(2)),
        }
    }

    pub fn dx(&self) -> Expr {
        self.diff(Coord::X)
    }

    pub fn dy(&self) -> Expr {
        self.diff(Coord::Y)
    }

    /// Replace the coordinates by expressions (simultaneously).
    pub fn substitute(&self, x: &Expr, y: &Expr) -> Expr {
        match self.node() {
            Node::Const(_) | Node::Param(_) => self.clone(),
            Node::Coord(Coord::X) => x.clone(),
            Node::Coord(Coord::Y) => y.clone(),
            Node::Neg(a) => -a.substitute(x, y),
            Node::Add(v) => Expr::sum(v.iter().map(|t| t.substitute(x, y))),
            Node::Mul(v) => Expr::product(v.iter().map(|t| t.substitute(x, y))),
            Node::Div(a, b) => a.substitute(x, y) / b.substitute(x, y),
            Node::PowInt(a, n) => a.substitute(x, y).powi(*n),
            Node::PowRat(a, p, q) => a.substitute(x, y).pow_rat(*p, *q),
            Node::Exp(a) => a.substitute(x, y).exp(),
            Node::Ln(a) => a.substitute(x, y).ln(),
            Node::Atan(a) => a.substitute(x, y).atan(),
        }
    }

    /// Replace parameters by constants taken from `env` (unbound names stay symbolic).
    pub fn bind(&self, env: &ParamEnv) -> Expr {
        match self.node() {
            Node::Param(p) => env.get(p).map(Expr::constant).unwrap_or_else(|| self.clone()),
            Node::Const(_) | Node::Coord(_) => self.clone(),
            Node::Neg(a) => -a.bind(env),
            Node::Add(v) => Expr::sum(v.iter().map(|t| t.bind(env))),
            Node::Mul(v) => Expr::product(v.iter().map(|t| t.bind(env))),
            Node::Div(a, b) => a.bind(env) / b.bind(env),
            Node::PowInt(a, n) => a.bind(env).powi(*n),
            Node::PowRat(a, p, q) => a.bind(env).pow_rat(*p, *q),
            Node::Exp(a) => a.bind(env).exp(),
            Node::Ln(a) => a.bind(env).ln(),
            Node::Atan(a) => a.bind(env).atan(),
        }
    }

    /// Evaluate at `(x, y)` in double precision.
    pub fn eval(&self, point: (f64, f64), env: &ParamEnv) -> Result<f64, EvalError> {
        self.eval_as(point.0, point.1, env)
    }

    /// Evaluate in any supported floating point type.
    pub fn eval_as<T: Scalar>(&self, x: T, y: T, env: &ParamEnv) -> Result<T, EvalError> {
        let domain = |kind| EvalError::Domain {
            kind,
            x: x.to_f64_lossy(),
            y: y.to_f64_lossy(),
        };
        Ok(match self.node() {
            Node::Const(c) => T::from_f64_lossy(*c),
            Node::Coord(Coord::X) => x,
            Node::Coord(Coord::Y) => y,
            Node::Param(p) => {
                let v = env
                    .get(p)
                    .ok_or_else(|| EvalError::UnboundParameter(p.to_string()))?;
                T::from_f64_lossy(v)
            }
            Node::Neg(a) => -a.eval_as(x, y, env)?,
            Node::Add(v) => {
                let mut acc = T::zero();
                for t in v {
                    acc = acc + t.eval_as(x, y, env)?;
                }
                acc
            }
            Node::Mul(v) => {
                let mut acc = T::one();
                for t in v {
                    acc = acc * t.eval_as(x, y, env)?;
                }
                acc
            }
            Node::Div(a, b) => {
                let den = b.eval_as(x, y, env)?;
                if den == T::zero() {
                    return Err(domain(DomainKind::DivisionByZero));
                }
                a.eval_as(x, y, env)? / den
            }
            Node::PowInt(a, n) => {
                let base = a.eval_as(x, y, env)?;
                if base == T::zero() && *n < 0 {
                    return Err(domain(DomainKind::DivisionByZero));
                }
                base.powi(*n)
            }
            Node::PowRat(a, p, q) => {
                let base = a.eval_as(x, y, env)?;
                if base == T::zero() && *p < 0 {
                    return Err(domain(DomainKind::DivisionByZero));
                }
                let e = T::from_f64_lossy(*p as f64 / *q as f64);
                if base < T::zero() {
                    if q % 2 == 0 {
                        return Err(domain(DomainKind::EvenRootOfNegative));
                    }
                    let mag = (-base).powf(e);
                    if p % 2 == 0 {
                        mag
                    } else {
                        -mag
                    }
                } else {
                    base.powf(e)
                }
            }
            Node::Exp(a) => a.eval_as(x, y, env)?.exp(),
            Node::Ln(a) => {
                let v = a.eval_as(x, y, env)?;
                if v <= T::zero() {
                    return Err(domain(DomainKind::LogOfNonPositive));
                }
                v.ln()
            }
            Node::Atan(a) => a.eval_as(x, y, env)?.atan(),
        })
    }
}

fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Numeric zero test: true when `|e| <= tol` at every point.
pub fn is_identically_zero(
    e: &Expr,
    env: &ParamEnv,
    points: &[(f64, f64)],
    tol: f64,
) -> Result<bool, EvalError> {
    for &p in points {
        if e.eval(p, env)?.abs() > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

// Printer precedence levels: sum < product < unary minus < power < atom.
const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_UNARY: u8 = 3;
const PREC_POWER: u8 = 4;
const PREC_ATOM: u8 = 5;

fn precedence(e: &Expr) -> u8 {
    match e.node() {
        Node::Const(c) if *c < 0.0 || c.is_sign_negative() => PREC_UNARY,
        Node::Const(_) | Node::Coord(_) | Node::Param(_) => PREC_ATOM,
        Node::Exp(_) | Node::Ln(_) | Node::Atan(_) => PREC_ATOM,
        Node::Add(_) => PREC_SUM,
        Node::Mul(_) | Node::Div(_, _) => PREC_PRODUCT,
        Node::Neg(_) => PREC_UNARY,
        Node::PowInt(_, _) | Node::PowRat(_, _, _) => PREC_POWER,
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(c) => {
                if c.is_sign_negative() {
                    write!(f, "-{}", -c)
                } else {
                    write!(f, "{c}")
                }
            }
            Node::Coord(Coord::X) => write!(f, "x"),
            Node::Coord(Coord::Y) => write!(f, "y"),
            Node::Param(p) => write!(f, "{p}"),
            Node::Neg(a) => {
                write!(f, "-")?;
                write_wrapped(f, a, PREC_POWER)
            }
            Node::Add(v) => {
                for (i, t) in v.iter().enumerate() {
                    if i == 0 {
                        write_wrapped(f, t, PREC_SUM)?;
                        continue;
                    }
                    match t.node() {
                        Node::Neg(inner) => {
                            write!(f, " - ")?;
                            write_wrapped(f, inner, PREC_PRODUCT)?;
                        }
                        _ => {
                            write!(f, " + ")?;
                            write_wrapped(f, t, PREC_PRODUCT)?;
                        }
                    }
                }
                Ok(())
            }
            Node::Mul(v) => {
                for (i, t) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    // Division and negation inside a product keep their own parentheses
                    // so that the tree shape survives a round trip.
                    let needs = matches!(t.node(), Node::Div(_, _) | Node::Mul(_))
                        || precedence(t) < PREC_POWER && i > 0
                        || precedence(t) < PREC_PRODUCT;
                    if needs {
                        write!(f, "({t})")?;
                    } else {
                        write!(f, "{t}")?;
                    }
                }
                Ok(())
            }
            Node::Div(a, b) => {
                if matches!(a.node(), Node::Div(_, _)) {
                    write!(f, "({a})")?;
                } else {
                    write_wrapped(f, a, PREC_PRODUCT)?;
                }
                write!(f, "/")?;
                write_wrapped(f, b, PREC_POWER)
            }
            Node::PowInt(b, n) => {
                write_wrapped(f, b, PREC_ATOM)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
            Node::PowRat(b, p, q) => {
                write_wrapped(f, b, PREC_ATOM)?;
                write!(f, "^({p}/{q})")
            }
            Node::Exp(a) => write!(f, "exp({a})"),
            Node::Ln(a) => write!(f, "ln({a})"),
            Node::Atan(a) => write!(f, "atan({a})"),
        }
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $build:expr) => {
        impl $trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $build(&self, &rhs)
            }
        }
        impl $trait<&Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $build(&self, rhs)
            }
        }
        impl $trait<Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $build(self, &rhs)
            }
        }
        impl $trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $build(self, rhs)
            }
        }
        impl $trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                $build(&self, &Expr::constant(rhs))
            }
        }
        impl $trait<f64> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                $build(self, &Expr::constant(rhs))
            }
        }
        impl $trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                $build(&Expr::constant(self), &rhs)
            }
        }
        impl $trait<&Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                $build(&Expr::constant(self), rhs)
            }
        }
    };
}

fn build_add(a: &Expr, b: &Expr) -> Expr {
    Expr::sum([a.clone(), b.clone()])
}

fn build_sub(a: &Expr, b: &Expr) -> Expr {
    Expr::sum([a.clone(), -b])
}

fn build_mul(a: &Expr, b: &Expr) -> Expr {
    Expr::product([a.clone(), b.clone()])
}

fn build_div(a: &Expr, b: &Expr) -> Expr {
    if a.is_zero() {
        return Expr::zero();
    }
    match (a.node(), b.node()) {
        (_, Node::Const(c)) if *c == 1.0 => a.clone(),
        (Node::Const(p), Node::Const(q)) if (p / q).is_finite() => Expr::constant(p / q),
        (_, Node::Const(q)) if *q != 0.0 => Expr::product([Expr::constant(1.0 / q), a.clone()]),
        _ => Expr::from_node(Node::Div(a.clone(), b.clone())),
    }
}

binop!(Add, add, build_add);
binop!(Sub, sub, build_sub);
binop!(Mul, mul, build_mul);
binop!(Div, div, build_div);

impl Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(a) => a.clone(),
            _ => Expr::from_node(Node::Neg(self.clone())),
        }
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -&self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env_b(b: f64) -> ParamEnv {
        ParamEnv::new().with("b", b)
    }

    #[test]
    fn diff_exp_chain_rule() {
        let e = parse("exp(b*x)").unwrap();
        let d = e.dx();
        let env = env_b(1.7);
        for &p in &[(0.3f64, 1.0f64), (-1.2, 0.4), (2.0, -3.0)] {
            let expected = 1.7 * (1.7 * p.0).exp();
            assert!((d.eval(p, &env).unwrap() - expected).abs() < 1e-12);
        }
        assert!(e.dy().is_zero());
    }

    #[test]
    fn diff_polynomial_at_point() {
        let e = parse("4*x^2+y^2+1").unwrap();
        let env = ParamEnv::new();
        let h = 1e-5;
        let fd = (e.eval((1.0 + h, 2.0), &env).unwrap() - e.eval((1.0 - h, 2.0), &env).unwrap())
            / (2.0 * h);
        let exact = e.dx().eval((1.0, 2.0), &env).unwrap();
        assert!((fd - 8.0).abs() < 1e-6);
        assert!((exact - 8.0).abs() < 1e-12);
    }

    #[test]
    fn eval_basic_and_errors() {
        let env = ParamEnv::new();
        assert_eq!(parse("x+y").unwrap().eval((1.0, 2.0), &env).unwrap(), 3.0);
        let e = parse("exp((b+2)*x)").unwrap();
        assert_eq!(e.eval((0.0, 5.0), &env_b(3.0)).unwrap(), 1.0);
        let err = parse("1/x").unwrap().eval((0.0, 0.0), &env).unwrap_err();
        assert!(matches!(
            err,
            EvalError::Domain {
                kind: DomainKind::DivisionByZero,
                ..
            }
        ));
        assert_eq!(
            e.eval((0.0, 0.0), &env).unwrap_err(),
            EvalError::UnboundParameter("b".into())
        );
        let ln = parse("ln(x)").unwrap().eval((-1.0, 0.0), &env).unwrap_err();
        assert!(matches!(
            ln,
            EvalError::Domain {
                kind: DomainKind::LogOfNonPositive,
                ..
            }
        ));
    }

    #[test]
    fn rational_powers_use_real_branch() {
        let env = ParamEnv::new();
        let cbrt_sq = parse("x^(2/3)").unwrap();
        assert!((cbrt_sq.eval((-8.0, 0.0), &env).unwrap() - 4.0).abs() < 1e-12);
        let cbrt = parse("x^(1/3)").unwrap();
        assert!((cbrt.eval((-8.0, 0.0), &env).unwrap() + 2.0).abs() < 1e-12);
        let sq = parse("x^(1/2)").unwrap().eval((-4.0, 0.0), &env).unwrap_err();
        assert!(matches!(
            sq,
            EvalError::Domain {
                kind: DomainKind::EvenRootOfNegative,
                ..
            }
        ));
    }

    #[test]
    fn eval_in_single_precision() {
        let e = parse("exp(x)*y + atan(x)").unwrap();
        let v32: f32 = e.eval_as(0.5f32, 2.0f32, &ParamEnv::new()).unwrap();
        let v64 = e.eval((0.5, 2.0), &ParamEnv::new()).unwrap();
        assert!((v32 as f64 - v64).abs() < 1e-5);
    }

    #[test]
    fn substitution_composes() {
        let e = parse("x^2 + y").unwrap();
        let s = e.substitute(&parse("y+1").unwrap(), &parse("3*x").unwrap());
        let v = s.eval((2.0, 4.0), &ParamEnv::new()).unwrap();
        assert_eq!(v, 25.0 + 6.0);
    }

    #[test]
    fn operators_fold_trivial_cases() {
        let x = Expr::x();
        assert!((&x * 0.0).is_zero());
        assert_eq!(&x * 1.0, x);
        assert_eq!(&x + 0.0, x);
        assert_eq!(-(-&x), x);
        assert_eq!(Expr::constant(2.0) * 3.0, Expr::constant(6.0));
    }
}
