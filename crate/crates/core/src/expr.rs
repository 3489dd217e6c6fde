//! Polynomial expressions over `x`, `y`, `t` for configuration files:
//! initial conditions are polynomials in the coordinates, loads are
//! polynomials in time (so their step averages are exact).

use crate::error::{Error, Result};
use crate::poly::Poly;
use std::collections::BTreeMap;

/// Multivariate polynomial in (x, y, t), kept in a canonical sorted form.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyExpr {
    /// Map from (x power, y power, t power) to coefficient.
    terms: BTreeMap<[u32; 3], f64>,
}

impl PolyExpr {
    pub fn zero() -> Self {
        PolyExpr { terms: BTreeMap::new() }
    }

    pub fn constant(c: f64) -> Self {
        let mut p = PolyExpr::zero();
        if c != 0.0 {
            p.terms.insert([0, 0, 0], c);
        }
        p
    }

    fn variable(idx: usize) -> Self {
        let mut pow = [0u32; 3];
        pow[idx] = 1;
        let mut p = PolyExpr::zero();
        p.terms.insert(pow, 1.0);
        p
    }

    fn add(&self, other: &PolyExpr) -> PolyExpr {
        let mut out = self.clone();
        for (k, v) in &other.terms {
            *out.terms.entry(*k).or_insert(0.0) += v;
        }
        out.prune();
        out
    }

    fn scale(&self, s: f64) -> PolyExpr {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= s;
        }
        out.prune();
        out
    }

    fn mul(&self, other: &PolyExpr) -> PolyExpr {
        let mut out = PolyExpr::zero();
        for (ka, va) in &self.terms {
            for (kb, vb) in &other.terms {
                let k = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2]];
                *out.terms.entry(k).or_insert(0.0) += va * vb;
            }
        }
        out.prune();
        out
    }

    fn powi(&self, n: u32) -> PolyExpr {
        let mut out = PolyExpr::constant(1.0);
        for _ in 0..n {
            out = out.mul(self);
        }
        out
    }

    fn prune(&mut self) {
        self.terms.retain(|_, v| *v != 0.0);
    }

    pub fn eval(&self, x: f64, y: f64, t: f64) -> f64 {
        self.terms
            .iter()
            .map(|(k, v)| v * x.powi(k[0] as i32) * y.powi(k[1] as i32) * t.powi(k[2] as i32))
            .sum()
    }

    pub fn uses_variable(&self, idx: usize) -> bool {
        self.terms.keys().any(|k| k[idx] > 0)
    }

    /// Collapse to a univariate polynomial in `t`; errors if `x` or `y`
    /// appear.
    pub fn to_time_poly(&self) -> Result<Poly> {
        if self.uses_variable(0) || self.uses_variable(1) {
            return Err(Error::Config(vec![
                "load expression may depend on t only".into()
            ]));
        }
        let deg = self.terms.keys().map(|k| k[2]).max().unwrap_or(0) as usize;
        let mut coeffs = vec![0.0; deg + 1];
        for (k, v) in &self.terms {
            coeffs[k[2] as usize] += v;
        }
        Ok(Poly::new(coeffs))
    }

    /// Serialize to a canonical expression string that re-parses to the same
    /// polynomial.
    pub fn to_string_canonical(&self) -> String {
        if self.terms.is_empty() {
            return "0".into();
        }
        let mut parts = Vec::new();
        for (k, v) in &self.terms {
            let mut s = format!("{v}");
            for (idx, name) in ["x", "y", "t"].iter().enumerate() {
                match k[idx] {
                    0 => {}
                    1 => s.push_str(&format!("*{name}")),
                    p => s.push_str(&format!("*{name}^{p}")),
                }
            }
            parts.push(s);
        }
        parts.join(" + ")
    }
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
    allowed: [bool; 3],
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.input.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<u8> {
        let c = self.peek();
        if c.is_some() {
            self.pos += 1;
        }
        c
    }

    fn err(&self, msg: &str) -> Error {
        Error::Config(vec![format!(
            "expression error at byte {}: {} in `{}`",
            self.pos,
            msg,
            String::from_utf8_lossy(self.input)
        )])
    }

    fn parse_expr(&mut self) -> Result<PolyExpr> {
        let mut acc = self.parse_term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.bump();
                    acc = acc.add(&self.parse_term()?);
                }
                Some(b'-') => {
                    self.bump();
                    acc = acc.add(&self.parse_term()?.scale(-1.0));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn parse_term(&mut self) -> Result<PolyExpr> {
        let mut acc = self.parse_factor()?;
        while let Some(b'*') = self.peek() {
            self.bump();
            acc = acc.mul(&self.parse_factor()?);
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<PolyExpr> {
        let base = self.parse_atom()?;
        if let Some(b'^') = self.peek() {
            self.bump();
            let start = self.pos;
            while self
                .input
                .get(self.pos)
                .is_some_and(|c| c.is_ascii_digit())
            {
                self.pos += 1;
            }
            if self.pos == start {
                return Err(self.err("expected integer exponent"));
            }
            let n: u32 = std::str::from_utf8(&self.input[start..self.pos])
                .unwrap()
                .parse()
                .map_err(|_| self.err("bad exponent"))?;
            return Ok(base.powi(n));
        }
        Ok(base)
    }

    fn parse_atom(&mut self) -> Result<PolyExpr> {
        match self.peek() {
            Some(b'(') => {
                self.bump();
                let inner = self.parse_expr()?;
                match self.bump() {
                    Some(b')') => Ok(inner),
                    _ => Err(self.err("expected `)`")),
                }
            }
            Some(b'-') => {
                self.bump();
                Ok(self.parse_atom()?.scale(-1.0))
            }
            Some(b'+') => {
                self.bump();
                self.parse_atom()
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => {
                let start = self.pos;
                while self.input.get(self.pos).is_some_and(|&c| {
                    c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E'
                }) {
                    self.pos += 1;
                    // Exponent sign directly after e/E.
                    if matches!(self.input.get(self.pos - 1), Some(b'e') | Some(b'E'))
                        && matches!(self.input.get(self.pos), Some(b'+') | Some(b'-'))
                    {
                        self.pos += 1;
                    }
                }
                let text = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
                let v: f64 = text.parse().map_err(|_| self.err("bad number"))?;
                Ok(PolyExpr::constant(v))
            }
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .input
                    .get(self.pos)
                    .is_some_and(|c| c.is_ascii_alphanumeric() || *c == b'_')
                {
                    self.pos += 1;
                }
                let name = std::str::from_utf8(&self.input[start..self.pos]).unwrap();
                let idx = match name {
                    "x" => 0,
                    "y" => 1,
                    "t" => 2,
                    _ => return Err(self.err(&format!("unknown identifier `{name}`"))),
                };
                if !self.allowed[idx] {
                    return Err(self.err(&format!("variable `{name}` not allowed here")));
                }
                Ok(PolyExpr::variable(idx))
            }
            _ => Err(self.err("expected number, variable or `(`")),
        }
    }
}

fn parse_with(text: &str, allowed: [bool; 3]) -> Result<PolyExpr> {
    let mut p = Parser { input: text.as_bytes(), pos: 0, allowed };
    let e = p.parse_expr()?;
    p.skip_ws();
    if p.pos != p.input.len() {
        return Err(p.err("trailing input"));
    }
    Ok(e)
}

/// Parse a spatial expression (polynomial in x, y).
pub fn parse_spatial(text: &str) -> Result<PolyExpr> {
    parse_with(text, [true, true, false])
}

/// Parse a temporal expression (polynomial in t).
pub fn parse_temporal(text: &str) -> Result<PolyExpr> {
    parse_with(text, [false, false, true])
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn arithmetic_and_powers() {
        let e = parse_spatial("2*x^2 - 3*x*y + (1 - y)^2").unwrap();
        for (x, y) in [(0.0, 0.0), (1.5, -2.0), (0.3, 0.7)] {
            let expect = 2.0 * x * x - 3.0 * x * y + (1.0 - y) * (1.0 - y);
            assert_relative_eq!(e.eval(x, y, 0.0), expect, max_relative = 1e-14);
        }
    }

    #[test]
    fn temporal_average_is_exact() {
        let e = parse_temporal("0.5*t^2 + 1").unwrap();
        let p = e.to_time_poly().unwrap();
        // integral over [0,2] of t^2/2 + 1 = 4/3 + 2; average = 2/3 + 1.
        assert_relative_eq!(p.average(0.0, 2.0), 2.0 / 3.0 + 1.0, max_relative = 1e-14);
    }

    #[test]
    fn variable_restrictions() {
        assert!(parse_spatial("t + 1").is_err());
        assert!(parse_temporal("x").is_err());
        assert!(parse_spatial("z").is_err());
        assert!(parse_spatial("sin(x)").is_err());
    }

    #[test]
    fn canonical_round_trip() {
        let e = parse_spatial("1 - 2*x + 0.5*y^2*x").unwrap();
        let back = parse_spatial(&e.to_string_canonical()).unwrap();
        assert_eq!(e, back);
    }

    #[test]
    fn scientific_notation() {
        let e = parse_temporal("1.5e-3*t").unwrap();
        assert_relative_eq!(e.eval(0.0, 0.0, 2.0), 3e-3);
    }
}
