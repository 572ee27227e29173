//! Diagonal pattern functions `f_nn` for phase-averaged homodyne data.
//!
//! In the quadrature convention of this crate, with `y = √2·X`,
//!
//! ```text
//! f_nn(X) = (1/π) ∫₀^∞ k·exp(−k²/4)·L_n(k²/2)·cos(k·y) dk
//! ```
//!
//! so that `ρ_nn = π ∫ pr(X) f_nn(X) dX`. Writing `L_n(k²/2)` as a polynomial
//! in `k²` turns the integral into even derivatives of
//! `I(y) = ∫₀^∞ k·exp(−k²/4)·cos(k·y) dk = 2 − 4y·D(y)`, with `D` the Dawson
//! integral. Since `D′ = 1 − 2yD`, every derivative has the form
//! `P(y) + Q(y)·D(y)` with polynomial `P`, `Q`. For large `|y|` that form
//! cancels catastrophically, and the asymptotic series of `I` is used instead.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

/// Highest supported Fock index.
pub const MAX_FOCK_INDEX: usize = 3;

/// Switch to the asymptotic expansion at `|y| ≥` this value.
const ASYMPTOTIC_FROM: f64 = 6.5;
/// Upper bound on asymptotic terms; the sum stops at the smallest term.
const ASYMPTOTIC_TERMS: usize = 80;

/// Polynomials `P`, `Q` (ascending coefficients) of `P(y) + Q(y)·D(y)`.
#[derive(Debug, Clone, PartialEq)]
struct DawsonForm {
    p: Vec<f64>,
    q: Vec<f64>,
}

impl DawsonForm {
    /// `I(y) = 2 − 4y·D(y)`.
    fn base() -> Self {
        Self {
            p: vec![2.0],
            q: vec![0.0, -4.0],
        }
    }

    /// `(P + QD)′ = (P′ + Q) + (Q′ − 2yQ)·D`.
    fn derivative(&self) -> Self {
        let mut p = poly_derivative(&self.p);
        add_into(&mut p, &self.q, 1.0);
        let mut q = poly_derivative(&self.q);
        let mut yq = vec![0.0; self.q.len() + 1];
        for (i, c) in self.q.iter().enumerate() {
            yq[i + 1] = -2.0 * c;
        }
        add_into(&mut q, &yq, 1.0);
        Self { p, q }
    }
}

fn poly_derivative(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(i, v)| i as f64 * v).collect()
}

fn add_into(acc: &mut Vec<f64>, other: &[f64], factor: f64) {
    if acc.len() < other.len() {
        acc.resize(other.len(), 0.0);
    }
    for (a, b) in acc.iter_mut().zip(other) {
        *a += factor * b;
    }
}

fn horner(c: &[f64], y: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, v| acc * y + v)
}

/// Dawson integral `D(y) = exp(−y²) ∫₀^y exp(t²) dt`, for `|y| < 26`.
///
/// Uses the all-positive series `exp(−y²) Σ y^{2n+1} / (n!·(2n+1))`.
pub(crate) fn dawson_series(y: f64) -> f64 {
    let y2 = y * y;
    let mut term = y;
    let mut sum = y;
    let mut n = 0.0;
    while term.abs() > 1e-17 * sum.abs() {
        term *= y2 * (2.0 * n + 1.0) / ((n + 1.0) * (2.0 * n + 3.0));
        sum += term;
        n += 1.0;
    }
    (-y2).exp() * sum
}

/// One diagonal pattern function, precomputed for fast evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct PatternFunction {
    n: usize,
    /// `f_nn` for small `|y|` as `P(y) + Q(y)·D(y)`.
    near: DawsonForm,
    /// `far[k−1][j]` multiplies `y^{−2k−2j}` in the asymptotic series.
    far: Vec<Vec<f64>>,
}

impl PatternFunction {
    pub fn new(n: usize) -> Result<Self> {
        if n > MAX_FOCK_INDEX {
            return Err(Error::UnsupportedFockIndex { n, max: MAX_FOCK_INDEX });
        }
        // L_n(k²/2) = Σ_j a_j k^{2j};  k^{2j} cos(ky) = (−1)^j ∂^{2j}_y cos(ky).
        let laguerre: Vec<f64> = (0..=n)
            .map(|j| {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                sign * binomial(n, j) / (factorial(j) * 2f64.powi(j as i32))
            })
            .collect();

        let mut derivs = vec![DawsonForm::base()];
        for _ in 0..2 * n {
            let next = derivs.last().unwrap().derivative();
            derivs.push(next);
        }
        let mut near = DawsonForm { p: vec![], q: vec![] };
        for (j, a) in laguerre.iter().enumerate() {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign * a / PI;
            add_into(&mut near.p, &derivs[2 * j].p, w);
            add_into(&mut near.q, &derivs[2 * j].q, w);
        }

        // I(y) ~ −Σ_{k≥1} c_k y^{−2k},  c_k = (2k−1)!!/2^{k−1}, and
        // ∂^{2j} y^{−2k} = (2k)(2k+1)…(2k+2j−1) · y^{−2k−2j}.
        let mut far = Vec::with_capacity(ASYMPTOTIC_TERMS);
        let mut c = 1.0;
        for k in 1..=ASYMPTOTIC_TERMS {
            if k > 1 {
                c *= (2 * k - 1) as f64 / 2.0;
            }
            let row = laguerre
                .iter()
                .enumerate()
                .map(|(j, a)| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    let rising: f64 = (0..2 * j).map(|i| (2 * k + i) as f64).product();
                    -sign * a / PI * c * rising
                })
                .collect();
            far.push(row);
        }
        Ok(Self { n, near, far })
    }

    pub fn index(&self) -> usize {
        self.n
    }

    /// Evaluates `f_nn(X)`.
    pub fn eval(&self, x: f64) -> f64 {
        let y = (SQRT_2 * x).abs();
        if y < ASYMPTOTIC_FROM {
            horner(&self.near.p, y) + horner(&self.near.q, y) * dawson_series(y)
        } else {
            let inv = 1.0 / (y * y);
            let mut sum = 0.0;
            let mut prev = f64::INFINITY;
            let mut y_pow = 1.0;
            for row in &self.far {
                y_pow *= inv;
                let term = y_pow * horner(row, inv);
                if term.abs() > prev {
                    break;
                }
                sum += term;
                prev = term.abs();
            }
            sum
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// Evaluates the diagonal pattern function `f_nn(X)` for `n ≤ 3`.
pub fn pattern_function(n: usize, x: f64) -> Result<f64> {
    Ok(PatternFunction::new(n)?.eval(x))
}
