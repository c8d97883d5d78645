//! Plain-text input files for metrics, connections, vector fields and integrals.
//!
//! One `key = value` statement per line, `#` starts a comment:
//!
//! ```text
//! # metric
//! E = exp(3*x)
//! F = 0
//! G = -2*D*exp(x)
//! param D = -0.5
//! domain = -1 1 -1 1
//! exclude = x
//! # connection, instead of or besides a metric
//! K0 = 0
//! K1 = 1/2
//! # vector field
//! Z1 = 2*y
//! Z2 = 1 + y^2
//! # quadratic integral: a11 ; a12 ; a22
//! integral F1 = 0 ; 0 ; exp(2*x)
//! ```

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{parse, Expr, ParamEnv, ParseError};
use crate::flow::QuadraticIntegralSet;
use crate::geometry::{Domain, GeometryError, Metric2};
use crate::liouville::QuadraticForm;
use crate::projective::{ProjectiveConnection, VectorField};

/// Rectangle used when a file has no `domain` line.
pub const DEFAULT_DOMAIN: (f64, f64, f64, f64) = (-1.0, 1.0, -1.0, 1.0);

#[derive(Clone, Debug, Error, PartialEq)]
pub enum SpecError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}, column {column}: {source}")]
    Expression {
        line: usize,
        column: usize,
        source: ParseError,
    },
    #[error("missing `{0}`")]
    Missing(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Contents of a spec file.
#[derive(Clone, Debug, Default)]
pub struct SpecFile {
    entries: BTreeMap<String, Expr>,
    pub env: ParamEnv,
    pub domain: Option<Domain>,
    excludes: Vec<Expr>,
    integrals: Vec<(String, QuadraticForm)>,
}

const KEYS: [&str; 9] = ["E", "F", "G", "K0", "K1", "K2", "K3", "Z1", "Z2"];

impl SpecFile {
    pub fn parse(text: &str) -> Result<Self, SpecError> {
        let mut spec = SpecFile::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("");
            if content.trim().is_empty() {
                continue;
            }
            let syntax = |message: String| SpecError::Syntax { line, message };
            let eq = content
                .find('=')
                .ok_or_else(|| syntax("expected `key = value`".into()))?;
            let key = content[..eq].trim();
            let value_start = eq + 1;
            let value = &content[value_start..];
            let expr_at = |src: &str, offset: usize| {
                parse(src).map_err(|e| SpecError::Expression {
                    line,
                    column: offset + e.offset() + 1,
                    source: e,
                })
            };
            let mut words = key.split_whitespace();
            match (words.next(), words.next(), words.next()) {
                (Some("param"), Some(name), None) => {
                    let v: f64 = value
                        .trim()
                        .parse()
                        .map_err(|_| syntax(format!("parameter `{name}` needs a real value")))?;
                    if !is_identifier(name) || name == "x" || name == "y" {
                        return Err(syntax(format!("invalid parameter name `{name}`")));
                    }
                    spec.env.set(name, v);
                }
                (Some("domain"), None, None) => {
                    let nums: Vec<f64> = value
                        .split_whitespace()
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .map_err(|_| syntax("domain needs four numbers".into()))?;
                    if nums.len() != 4 || nums[0] >= nums[1] || nums[2] >= nums[3] {
                        return Err(syntax("domain must be `x0 x1 y0 y1` with x0 < x1 and y0 < y1".into()));
                    }
                    if spec.domain.is_some() {
                        return Err(syntax("duplicate `domain`".into()));
                    }
                    spec.domain = Some(Domain::rect(nums[0], nums[1], nums[2], nums[3]));
                }
                (Some("exclude"), None, None) => {
                    spec.excludes.push(expr_at(value, value_start)?);
                }
                (Some("integral"), Some(name), None) => {
                    let parts: Vec<&str> = value.split(';').collect();
                    if parts.len() != 3 {
                        return Err(syntax(format!("integral `{name}` needs `a11 ; a12 ; a22`")));
                    }
                    let mut offset = value_start;
                    let mut comps = Vec::with_capacity(3);
                    for part in parts {
                        comps.push(expr_at(part, offset)?);
                        offset += part.len() + 1;
                    }
                    if spec.integrals.iter().any(|(n, _)| n == name) {
                        return Err(syntax(format!("duplicate integral `{name}`")));
                    }
                    let [a11, a12, a22]: [Expr; 3] = comps.try_into().expect("three components");
                    spec.integrals.push((name.to_string(), QuadraticForm::new(a11, a12, a22)));
                }
                (Some(k), None, None) if KEYS.contains(&k) => {
                    if spec.entries.contains_key(k) {
                        return Err(syntax(format!("duplicate `{k}`")));
                    }
                    spec.entries.insert(k.to_string(), expr_at(value, value_start)?);
                }
                _ => return Err(syntax(format!("unknown key `{key}`"))),
            }
        }
        Ok(spec)
    }

    pub fn get(&self, key: &str) -> Option<&Expr> {
        self.entries.get(key)
    }

    pub fn has_metric(&self) -> bool {
        self.entries.contains_key("E") || self.entries.contains_key("G")
    }

    pub fn has_connection(&self) -> bool {
        (0..4).any(|i| self.entries.contains_key(&format!("K{i}")))
    }

    pub fn has_vector_field(&self) -> bool {
        self.entries.contains_key("Z1") || self.entries.contains_key("Z2")
    }

    /// The declared rectangle with the `exclude` loci.
    pub fn domain(&self) -> Domain {
        let (x0, x1, y0, y1) = DEFAULT_DOMAIN;
        let mut d = self
            .domain
            .clone()
            .unwrap_or_else(|| Domain::rect(x0, x1, y0, y1));
        d.exclude.extend(self.excludes.iter().cloned());
        d
    }

    /// The metric; `F` defaults to 0, `E` and `G` are required.
    pub fn metric(&self) -> Result<Metric2, SpecError> {
        let need = |k: &str| self.get(k).cloned().ok_or_else(|| SpecError::Missing(k.to_string()));
        let e = need("E")?;
        let g = need("G")?;
        let f = self.get("F").cloned().unwrap_or_else(Expr::zero);
        Ok(Metric2::new(e, f, g, self.env.clone(), self.domain())?)
    }

    /// The connection given by `K0..K3` (missing ones are 0), or the one of the metric.
    pub fn connection(&self) -> Result<ProjectiveConnection, SpecError> {
        if self.has_connection() {
            let k = [0, 1, 2, 3].map(|i| self.get(&format!("K{i}")).cloned().unwrap_or_else(Expr::zero));
            return Ok(ProjectiveConnection::new(k, self.env.clone(), self.domain()));
        }
        Ok(ProjectiveConnection::of_metric(&self.metric()?))
    }

    /// The vector field `(Z1, Z2)`; a missing component is 0.
    pub fn vector_field(&self) -> Result<VectorField, SpecError> {
        if !self.has_vector_field() {
            return Err(SpecError::Missing("Z1/Z2".into()));
        }
        let c = |k: &str| self.get(k).cloned().unwrap_or_else(Expr::zero);
        Ok(VectorField::new(c("Z1"), c("Z2")))
    }

    pub fn integrals(&self) -> QuadraticIntegralSet {
        QuadraticIntegralSet {
            items: self.integrals.clone(),
        }
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
