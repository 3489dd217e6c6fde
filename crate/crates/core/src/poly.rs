//! Dense univariate polynomials with exact secant quotients.

/// Polynomial with coefficients in ascending order of degree.
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<f64>,
}

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Poly { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Poly { coeffs: vec![c] }
    }

    pub fn zero() -> Self {
        Poly { coeffs: vec![] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|&c| c != 0.0)
            .unwrap_or(0)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
    }

    pub fn deriv_eval(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, &c) in self.coeffs.iter().enumerate().skip(1).rev() {
            acc = acc * x + k as f64 * c;
        }
        acc
    }

    /// Difference quotient `(p(a) - p(b)) / (a - b)`, with the derivative at
    /// coincident arguments. Multiplying the result by `a - b` reproduces
    /// `p(a) - p(b)` up to round-off.
    pub fn secant(&self, a: f64, b: f64) -> f64 {
        if a == b {
            self.deriv_eval(a)
        } else {
            (self.eval(a) - self.eval(b)) / (a - b)
        }
    }

    /// For polynomials of degree <= 2 the secant in the first argument is
    /// affine: `secant(x, b) = quad * x + lin`. Returns `None` otherwise.
    pub fn secant_affine(&self, b: f64) -> Option<(f64, f64)> {
        if self.degree() > 2 {
            return None;
        }
        let p1 = self.coeffs.get(1).copied().unwrap_or(0.0);
        let p2 = self.coeffs.get(2).copied().unwrap_or(0.0);
        Some((p2, p1 + p2 * b))
    }

    /// Exact average `1/(t1-t0) * integral of p over [t0, t1]`.
    pub fn average(&self, t0: f64, t1: f64) -> f64 {
        debug_assert!(t1 > t0);
        let anti = |t: f64| -> f64 {
            let mut acc = 0.0;
            for (k, &c) in self.coeffs.iter().enumerate().rev() {
                acc = acc * t + c / (k as f64 + 1.0);
            }
            acc * t
        };
        (anti(t1) - anti(t0)) / (t1 - t0)
    }

    pub fn add_scaled(&mut self, other: &Poly, s: f64) {
        if self.coeffs.len() < other.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), 0.0);
        }
        for (c, &o) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *c += s * o;
        }
    }
}
