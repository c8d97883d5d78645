//! Algebraic clean-up: like terms in sums and like bases in products are
//! collected, exponentials in a product are merged, and constants folded.
//!
//! The result agrees with the input wherever both are defined. Cancellation
//! such as `x/x -> 1` may enlarge the domain.

use std::collections::HashMap;

use super::{Expr, Node};

/// Return an algebraically simplified copy of `e`.
pub fn simplify(e: &Expr) -> Expr {
    match e.node() {
        Node::Const(_) | Node::Coord(_) | Node::Param(_) => e.clone(),
        Node::Neg(a) => collect_product(vec![Expr::constant(-1.0), simplify(a)]),
        Node::Add(v) => collect_sum(v.iter().map(simplify).collect()),
        Node::Mul(v) => collect_product(v.iter().map(simplify).collect()),
        Node::Div(a, b) => {
            let den = simplify(b);
            collect_product(vec![simplify(a), den.powi(-1)])
        }
        Node::PowInt(a, n) => power(simplify(a), Rat::new(*n as i64, 1)),
        Node::PowRat(a, p, q) => power(simplify(a), Rat::new(*p as i64, *q as i64)),
        Node::Exp(a) => simplify(a).exp(),
        Node::Ln(a) => simplify(a).ln(),
        Node::Atan(a) => simplify(a).atan(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Rat {
    p: i64,
    q: i64,
}

impl Rat {
    fn new(p: i64, q: i64) -> Rat {
        let g = gcd(p.unsigned_abs(), q.unsigned_abs()).max(1) as i64;
        let s = if q < 0 { -1 } else { 1 };
        Rat {
            p: s * p / g,
            q: s * q / g,
        }
    }

    fn add(self, o: Rat) -> Rat {
        Rat::new(self.p * o.q + o.p * self.q, self.q * o.q)
    }

    fn mul(self, o: Rat) -> Rat {
        Rat::new(self.p * o.p, self.q * o.q)
    }

    fn is_zero(self) -> bool {
        self.p == 0
    }
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn make_power(base: &Expr, r: Rat) -> Expr {
    if r.q == 1 {
        base.powi(r.p as i32)
    } else {
        base.pow_rat(r.p as i32, r.q as u32)
    }
}

fn power(base: Expr, r: Rat) -> Expr {
    match base.node() {
        Node::Const(c) if r.q == 1 && c.powi(r.p as i32).is_finite() => Expr::constant(c.powi(r.p as i32)),
        Node::PowInt(b, n) => power(b.clone(), Rat::new(*n as i64, 1).mul(r)),
        // (b^(p/q))^r is only rewritten for integer r, which is always valid
        Node::PowRat(b, p, q) if r.q == 1 => power(b.clone(), Rat::new(*p as i64, *q as i64).mul(r)),
        Node::Exp(a) if r.q == 1 => collect_product(vec![Expr::constant(r.p as f64), a.clone()]).exp(),
        Node::Mul(_) if r.q == 1 => {
            let Node::Mul(factors) = base.node() else { unreachable!() };
            collect_product(factors.iter().map(|f| power(f.clone(), r)).collect())
        }
        _ => make_power(&base, r),
    }
}

fn sort_key(e: &Expr) -> String {
    e.to_string()
}

/// Split a product-like expression into a numeric coefficient and the rest.
fn split_coefficient(e: &Expr) -> (f64, Expr) {
    match e.node() {
        Node::Const(c) => (*c, Expr::one()),
        Node::Neg(a) => {
            let (c, rest) = split_coefficient(a);
            (-c, rest)
        }
        Node::Mul(v) => {
            let mut c = 1.0;
            let mut rest = Vec::new();
            for f in v {
                match f.node() {
                    Node::Const(k) => c *= k,
                    _ => rest.push(f.clone()),
                }
            }
            (c, Expr::product(rest))
        }
        _ => (1.0, e.clone()),
    }
}

fn collect_sum(terms: Vec<Expr>) -> Expr {
    let mut flat = Vec::new();
    for t in terms {
        match t.node() {
            Node::Add(v) => flat.extend(v.iter().cloned()),
            _ => flat.push(t),
        }
    }
    let mut order: Vec<Expr> = Vec::new();
    let mut coeffs: HashMap<Expr, f64> = HashMap::new();
    for t in flat {
        let (c, rest) = split_coefficient(&t);
        if c == 0.0 {
            continue;
        }
        match coeffs.get_mut(&rest) {
            Some(acc) => *acc += c,
            None => {
                coeffs.insert(rest.clone(), c);
                order.push(rest);
            }
        }
    }
    let mut out: Vec<(String, Expr)> = Vec::new();
    let mut constant = 0.0;
    for key in order {
        let c = coeffs[&key];
        if c == 0.0 {
            continue;
        }
        if key.is_one() {
            constant += c;
            continue;
        }
        let term = collect_product(vec![Expr::constant(c), key.clone()]);
        out.push((sort_key(&key), term));
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    let mut terms: Vec<Expr> = out.into_iter().map(|(_, t)| t).collect();
    if constant != 0.0 {
        terms.push(Expr::constant(constant));
    }
    Expr::sum(terms)
}

fn collect_product(factors: Vec<Expr>) -> Expr {
    let mut coeff = 1.0;
    let mut order: Vec<Expr> = Vec::new();
    let mut exps: HashMap<Expr, Rat> = HashMap::new();
    let mut exp_args: Vec<Expr> = Vec::new();
    let mut stack = factors;
    while let Some(f) = stack.pop() {
        let (base, r) = match f.node() {
            Node::Const(c) => {
                coeff *= c;
                continue;
            }
            Node::Neg(a) => {
                coeff = -coeff;
                stack.push(a.clone());
                continue;
            }
            Node::Mul(v) => {
                stack.extend(v.iter().cloned());
                continue;
            }
            Node::Div(a, b) => {
                stack.push(a.clone());
                stack.push(b.powi(-1));
                continue;
            }
            Node::Exp(a) => {
                exp_args.push(a.clone());
                continue;
            }
            Node::PowInt(b, n) => {
                if let Node::Exp(a) = b.node() {
                    exp_args.push(collect_product(vec![Expr::constant(*n as f64), a.clone()]));
                    continue;
                }
                (b.clone(), Rat::new(*n as i64, 1))
            }
            Node::PowRat(b, p, q) => (b.clone(), Rat::new(*p as i64, *q as i64)),
            _ => (f.clone(), Rat::new(1, 1)),
        };
        // Numeric bases with integer exponents fold into the coefficient.
        if let (Some(c), 1) = (base.as_const(), r.q) {
            if c.powi(r.p as i32).is_finite() {
                coeff *= c.powi(r.p as i32);
                continue;
            }
        }
        match exps.get_mut(&base) {
            Some(acc) => *acc = acc.add(r),
            None => {
                exps.insert(base.clone(), r);
                order.push(base);
            }
        }
    }
    if coeff == 0.0 {
        return Expr::zero();
    }
    let mut parts: Vec<(String, Expr)> = Vec::new();
    for base in order {
        let r = exps[&base];
        if r.is_zero() {
            continue;
        }
        let f = make_power(&base, r);
        parts.push((sort_key(&f), f));
    }
    if !exp_args.is_empty() {
        let arg = collect_sum(exp_args);
        if !arg.is_zero() {
            let f = arg.exp();
            parts.push((sort_key(&f), f));
        }
    }
    parts.sort_by(|a, b| a.0.cmp(&b.0));
    Expr::product(std::iter::once(Expr::constant(coeff)).chain(parts.into_iter().map(|(_, f)| f)))
}
