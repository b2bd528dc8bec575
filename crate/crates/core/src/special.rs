//! Gamma-function helpers.
//!
//! `1/Γ` is evaluated so that it vanishes exactly at the poles
//! `0, -1, -2, …`; the asymptotic expansions rely on those zeros.

use std::f64::consts::PI;

/// Γ(x).
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// ln|Γ(x)|.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma_r(x).0
}

/// sin(πx) with exact zeros at the integers.
pub fn sin_pi(x: f64) -> f64 {
    if x == x.floor() {
        return 0.0;
    }
    // reduce to [-1, 1]; the reduction is exact in binary floating point
    let r = x - 2.0 * (x / 2.0).round();
    if r.abs() <= 0.25 {
        (PI * r).sin()
    } else if r > 0.75 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.75 {
        -(PI * (1.0 + r)).sin()
    } else if r > 0.0 {
        (PI * (0.5 - r)).cos()
    } else {
        -(PI * (0.5 + r)).cos()
    }
}

/// cos(πx) with exact zeros at the half-integers.
pub fn cos_pi(x: f64) -> f64 {
    sin_pi(x + 0.5)
}

/// Returns true when `x` is a pole of Γ.
pub fn is_gamma_pole(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Reciprocal gamma 1/Γ(x), exactly zero at nonpositive integers.
pub fn rgamma(x: f64) -> f64 {
    if is_gamma_pole(x) {
        return 0.0;
    }
    if x > 171.0 {
        return (-ln_gamma(x)).exp();
    }
    if x < -170.0 {
        // 1/Γ(x) = sin(πx) Γ(1-x) / π
        let (ln_mag, sign) = ln_abs_rgamma(x).expect("non-pole");
        return sign * ln_mag.exp();
    }
    1.0 / gamma(x)
}

/// `(ln|1/Γ(x)|, sign(1/Γ(x)))`, or `None` at a pole.
pub fn ln_abs_rgamma(x: f64) -> Option<(f64, f64)> {
    if is_gamma_pole(x) {
        return None;
    }
    if x > 0.0 {
        return Some((-ln_gamma(x), 1.0));
    }
    let s = sin_pi(x);
    let ln_mag = ln_gamma(1.0 - x) + (s.abs() / PI).ln();
    Some((ln_mag, s.signum()))
}

/// Generalized binomial coefficient binom(a, n) = a(a-1)…(a-n+1)/n!.
pub fn binomial(a: f64, n: usize) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (a - i as f64) / (i as f64 + 1.0))
}

/// Neumaier-compensated sum in iteration order.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for v in iter {
            s.add(v);
        }
        s
    }
}
