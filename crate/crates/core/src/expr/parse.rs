//! Recursive-descent parser for the expression text format.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor (('*' | '/') factor)*
//! factor   := '-' factor | atom ('^' exponent)?
//! atom     := number | ident | '(' expr ')' | func '(' expr ')'
//! func     := 'exp' | 'ln' | 'atan'
//! exponent := integer | '(' ['-'] integer ['/' integer] ')'
//! ```
//!
//! `x` and `y` are the coordinates; any other identifier is a parameter.
//! The tree is returned as written, without simplification.

use thiserror::Error;

use super::{Coord, Expr, Node};

#[derive(Clone, Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown function `{name}` at byte {offset}")]
    UnknownFunction { name: String, offset: usize },
}

impl ParseError {
    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. } | ParseError::UnknownFunction { offset, .. } => *offset,
        }
    }
}

/// Parse an expression.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    let mut p = Parser { src, pos: 0 };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < src.len() {
        return Err(p.error("unexpected trailing input"));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn error(&self, message: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek_raw() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    fn peek_raw(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.peek_raw()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut terms = vec![self.term()?];
        loop {
            if self.eat('+') {
                terms.push(self.term()?);
            } else if self.eat('-') {
                let t = self.term()?;
                terms.push(Expr::from_node(Node::Neg(t)));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 {
            terms.pop().unwrap()
        } else {
            Expr::from_node(Node::Add(terms))
        })
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        let mut run: Vec<Expr> = Vec::new();
        loop {
            if self.eat('*') {
                if run.is_empty() {
                    run.push(acc.clone());
                }
                run.push(self.factor()?);
            } else if self.eat('/') {
                if !run.is_empty() {
                    acc = Expr::from_node(Node::Mul(std::mem::take(&mut run)));
                }
                let den = self.factor()?;
                acc = Expr::from_node(Node::Div(acc, den));
            } else {
                break;
            }
            if !run.is_empty() {
                acc = Expr::from_node(Node::Mul(run.clone()));
            }
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            let inner = self.factor()?;
            return Ok(Expr::from_node(Node::Neg(inner)));
        }
        let base = self.atom()?;
        if self.eat('^') {
            return self.exponent(base);
        }
        Ok(base)
    }

    fn exponent(&mut self, base: Expr) -> Result<Expr, ParseError> {
        if self.eat('(') {
            let neg = self.eat('-');
            let p = self.integer()?;
            let p = if neg { -p } else { p };
            let q = if self.eat('/') { self.integer()? } else { 1 };
            self.expect(')')?;
            if q == 0 {
                return Err(self.error("zero denominator in exponent"));
            }
            return Ok(if q == 1 {
                Expr::from_node(Node::PowInt(base, p))
            } else {
                Expr::from_node(Node::PowRat(base, p, q as u32))
            });
        }
        let p = self.integer()?;
        Ok(Expr::from_node(Node::PowInt(base, p)))
    }

    fn integer(&mut self) -> Result<i32, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek_raw(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected an integer exponent"));
        }
        self.src[start..self.pos].parse().map_err(|_| ParseError::Syntax {
            offset: start,
            message: "exponent out of range".into(),
        })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_alphabetic() || c == '_' => self.ident(),
            Some(_) => Err(self.error("unexpected character")),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        self.pos = i;
        self.src[start..i]
            .parse::<f64>()
            .map(Expr::constant)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{}`", &self.src[start..i]),
            })
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        while let Some(c) = self.peek_raw() {
            if c.is_alphanumeric() || c == '_' {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
        let name = &self.src[start..self.pos];
        if self.peek() == Some('(') {
            let make: fn(Expr) -> Node = match name {
                "exp" => Node::Exp,
                "ln" => Node::Ln,
                "atan" => Node::Atan,
                _ => {
                    return Err(ParseError::UnknownFunction {
                        name: name.to_string(),
                        offset: start,
                    })
                }
            };
            self.pos += 1;
            let arg = self.expr()?;
            self.expect(')')?;
            return Ok(Expr::from_node(make(arg)));
        }
        Ok(match name {
            "x" => Expr::coord(Coord::X),
            "y" => Expr::coord(Coord::Y),
            _ => Expr::param(name),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ParamEnv;

    #[test]
    fn parses_product_with_exponential() {
        let e = parse("eps1*exp((b+2)*x)").unwrap();
        let expected = Expr::from_node(Node::Mul(vec![
            Expr::param("eps1"),
            Expr::from_node(Node::Exp(Expr::from_node(Node::Mul(vec![
                Expr::from_node(Node::Add(vec![Expr::param("b"), Expr::constant(2.0)])),
                Expr::x(),
            ])))),
        ]));
        assert_eq!(e, expected);
    }

    #[test]
    fn reports_offset_of_missing_paren() {
        let err = parse("1/(x").unwrap_err();
        assert_eq!(err.offset(), 4);
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn rejects_unknown_function() {
        let err = parse("2*sin(x)").unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownFunction {
                name: "sin".into(),
                offset: 2
            }
        );
    }

    #[test]
    fn scientific_notation_and_exponents() {
        let env = ParamEnv::new();
        let e = parse("1.5e2 + x^(-2) + x^(2/3) - 2.5E-1").unwrap();
        let v = e.eval((8.0, 0.0), &env).unwrap();
        assert!((v - (150.0 + 1.0 / 64.0 + 4.0 - 0.25)).abs() < 1e-12);
    }

    #[test]
    fn division_is_left_associative() {
        let e = parse("x/y/2").unwrap();
        assert_eq!(e.eval((8.0, 2.0), &ParamEnv::new()).unwrap(), 2.0);
        let e = parse("x*y/2*3").unwrap();
        assert_eq!(e.eval((1.0, 2.0), &ParamEnv::new()).unwrap(), 3.0);
    }

    #[test]
    fn unary_minus_binds_looser_than_power() {
        let e = parse("-x^2").unwrap();
        assert_eq!(e.eval((3.0, 0.0), &ParamEnv::new()).unwrap(), -9.0);
    }

    #[test]
    fn trailing_garbage_is_an_error() {
        assert!(parse("x y").is_err());
        assert!(parse("").is_err());
        assert!(parse("x^").is_err());
    }
}
