//! Report assembly: an ordered list of entries rendered as `key = value`
//! (keyvalue) or `key: value` (text), with `#` comment lines.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::ValueEnum;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Keyvalue,
}

enum Line {
    Entry(String, String),
    Comment(String),
}

pub struct Report {
    command: &'static str,
    lines: Vec<Line>,
}

/// Lowercase hex SHA-256 of some bytes.
pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Shortest round-trip form for moderate magnitudes, exponent form otherwise.
pub fn num(v: f64) -> String {
    let v = v + 0.0;
    let a = v.abs();
    if v == 0.0 || (1e-4..1e6).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

pub fn nums(vs: &[f64]) -> String {
    let parts: Vec<String> = vs.iter().map(|v| num(*v)).collect();
    format!("[{}]", parts.join(", "))
}

impl Report {
    pub fn new(command: &'static str) -> Self {
        let mut r = Report {
            command,
            lines: Vec::new(),
        };
        r.entry("tool", format!("projmetric {}", env!("CARGO_PKG_VERSION")));
        r.entry("command", command);
        r
    }

    pub fn command(&self) -> &'static str {
        self.command
    }

    pub fn entry(&mut self, key: impl Into<String>, value: impl ToString) {
        self.lines.push(Line::Entry(key.into(), value.to_string()));
    }

    pub fn comment(&mut self, text: impl Into<String>) {
        self.lines.push(Line::Comment(text.into()));
    }

    /// Record the hash of an input under `input.<name>.sha256`.
    pub fn input(&mut self, name: &str, data: &[u8]) {
        self.entry(format!("input.{name}.sha256"), sha256_hex(data));
    }

    pub fn render(&self, format: Format) -> String {
        let mut out = String::new();
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(out, "# generated at unix time {secs}");
        for line in &self.lines {
            match line {
                Line::Comment(c) => {
                    let _ = writeln!(out, "# {c}");
                }
                Line::Entry(k, v) => {
                    let sep = match format {
                        Format::Text => ": ",
                        Format::Keyvalue => " = ",
                    };
                    let _ = writeln!(out, "{k}{sep}{v}");
                }
            }
        }
        out
    }
}
