//! Two-parameter Mittag-Leffler function on the negative real axis.
//!
//! `E_{α,β}(-x) = Σ_k (-x)^k / Γ(αk + β)` is evaluated by one of three
//! regimes:
//!
//! * the power series, when its rounding-error estimate (driven by the
//!   cancellation between terms) stays below the working tolerance;
//! * the optimally truncated asymptotic expansion, for `x >= 50` once the
//!   first omitted term is negligible. For `1 < α <= 2` the two decaying
//!   oscillatory pole contributions are added;
//! * a real-line integral representation in between. For `α < 1` it is the
//!   `ε → 0` limit of the Hankel-contour representation. For `α > 1` the
//!   argument is split as `E_{α,β}(-x) = Re E_{α/2,β}(i√x)` first, which
//!   brings the order below one and adds one residue term.
//!
//! Parameters with `β >= 1 + α` (resp. `1 + α/2`) are reduced through
//! `E_{α,β}(-x) = (1/Γ(β-α) - E_{α,β-α}(-x)) / x`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::special::{cos_pi, ln_abs_rgamma, rgamma, sin_pi, CompensatedSum};

/// Relative tolerance every regime is held to internally.
pub const WORKING_TOL: f64 = 1e-13;
/// Smallest argument at which the asymptotic expansion is tried.
pub const ASYMPTOTIC_MIN_X: f64 = 50.0;
/// Cut-off of `e^{-u}` in the integral representation.
const EXP_CUTOFF: f64 = 745.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(invalid("alpha", format!("must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be positive, got {beta}")));
        }
        if alpha > 2.0 {
            return Err(invalid(
                "alpha",
                format!("orders above 2 are not supported, got {alpha}"),
            ));
        }
        Ok(Self { alpha, beta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    ClosedForm,
    Series,
    Integral,
    Asymptotic,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::ClosedForm => "closed-form",
            Regime::Series => "series",
            Regime::Integral => "integral",
            Regime::Asymptotic => "asymptotic",
        }
    }
}

/// Value of `E_{α,β}(-x)` with an absolute error bound.
///
/// `degraded` is set when no regime reached the working tolerance; the
/// value is still the best available estimate and `error_bound` says how
/// far it can be trusted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlValue {
    pub value: f64,
    pub error_bound: f64,
    pub regime: Regime,
    pub degraded: bool,
}

/// Evaluates `E_{α,β}(-x)` for `x >= 0`.
pub fn ml_eval(params: MlParams, x: f64) -> Result<MlValue> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(invalid("x", format!("must be finite and nonnegative, got {x}")));
    }
    let MlParams { alpha, beta } = params;
    if x == 0.0 {
        return Ok(exact(rgamma(beta), Regime::ClosedForm));
    }
    if alpha == 1.0 && beta == 1.0 {
        return Ok(exact((-x).exp(), Regime::ClosedForm));
    }
    if let Some(v) = series(alpha, beta, x) {
        return Ok(v);
    }
    if x >= ASYMPTOTIC_MIN_X {
        let v = asymptotic_full(alpha, beta, x);
        if v.error_bound <= WORKING_TOL * magnitude_scale(alpha, beta, x, v.value) {
            return Ok(v);
        }
    }
    if alpha == 1.0 {
        return order_one_integral(beta, x);
    }
    let effective = if alpha < 1.0 { alpha } else { 0.5 * alpha };
    if beta >= 1.0 + effective {
        let lower = ml_eval(MlParams { alpha, beta: beta - alpha }, x)?;
        return Ok(MlValue {
            value: (rgamma(beta - alpha) - lower.value) / x,
            error_bound: (lower.error_bound + f64::EPSILON * rgamma(beta - alpha).abs()) / x,
            regime: lower.regime,
            degraded: lower.degraded,
        });
    }
    if alpha < 1.0 {
        integral_real(alpha, beta, x)
    } else {
        integral_complex(alpha, beta, x)
    }
}

/// `E_{α,β}(-x)` from the integral representation alone, bypassing the
/// series and the large-argument expansion.
pub fn ml_eval_integral(params: MlParams, x: f64) -> Result<MlValue> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(invalid("x", format!("must be finite and positive, got {x}")));
    }
    let MlParams { alpha, beta } = params;
    if alpha == 1.0 {
        return order_one_integral(beta, x);
    }
    let effective = if alpha < 1.0 { alpha } else { 0.5 * alpha };
    if beta >= 1.0 + effective {
        let lower = ml_eval_integral(MlParams { alpha, beta: beta - alpha }, x)?;
        return Ok(MlValue {
            value: (rgamma(beta - alpha) - lower.value) / x,
            error_bound: (lower.error_bound + f64::EPSILON * rgamma(beta - alpha).abs()) / x,
            regime: lower.regime,
            degraded: lower.degraded,
        });
    }
    if alpha < 1.0 {
        integral_real(alpha, beta, x)
    } else {
        integral_complex(alpha, beta, x)
    }
}

/// Convenience wrapper returning only the value. Panics on invalid input.
pub fn ml(alpha: f64, beta: f64, x: f64) -> f64 {
    let p = MlParams::new(alpha, beta).expect("valid Mittag-Leffler parameters");
    ml_eval(p, x).expect("nonnegative argument").value
}

/// Truncated asymptotic sum `Σ_{k=1..K} (-1)^{k+1} x^{-k} / Γ(β - kα)` and the
/// magnitude of the `(K+1)`-th term.
pub fn ml_asymptotic(params: MlParams, x: f64, terms: usize) -> Result<(f64, f64)> {
    if !(x > 0.0) {
        return Err(invalid("x", format!("must be positive, got {x}")));
    }
    if terms == 0 {
        return Err(invalid("K", "at least one term is required"));
    }
    let mut sum = CompensatedSum::new();
    for k in 1..=terms {
        sum.add(asymptotic_term(params.alpha, params.beta, x, k));
    }
    let omitted = asymptotic_term(params.alpha, params.beta, x, terms + 1).abs();
    Ok((sum.value(), omitted))
}

/// `s^{α-1} E_{α,α}(-λ s^α)`, the relaxation kernel of the per-mode response.
pub fn ml_kernel(alpha: f64, lambda: f64, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(invalid("s", format!("kernel is evaluated for s > 0 only, got {s}")));
    }
    if !(lambda > 0.0) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    let p = MlParams::new(alpha, alpha)?;
    let e = ml_eval(p, lambda * s.powf(alpha))?;
    Ok(s.powf(alpha - 1.0) * e.value)
}

/// Empirical constant `sup_x (1+x)|E_{α,β}(-x)|` over a geometric grid of
/// `[0, x_max]` with `per_decade` points per decade starting at `1e-3`.
pub fn boundedness_constant(params: MlParams, x_max: f64, per_decade: usize) -> Result<f64> {
    let mut sup = rgamma(params.beta).abs();
    let decades = (x_max / 1e-3).log10();
    let n = (decades * per_decade as f64).ceil() as usize;
    for i in 0..=n {
        let x = 1e-3 * 10f64.powf(i as f64 / per_decade as f64);
        let x = x.min(x_max);
        let v = ml_eval(params, x)?.value;
        sup = sup.max((1.0 + x) * v.abs());
    }
    Ok(sup)
}

fn exact(value: f64, regime: Regime) -> MlValue {
    MlValue {
        value,
        error_bound: f64::EPSILON * value.abs(),
        regime,
        degraded: false,
    }
}

/// A scale against which relative accuracy is judged. Near zeros of an
/// oscillating `E` the value itself is not a usable scale.
fn magnitude_scale(alpha: f64, beta: f64, x: f64, value: f64) -> f64 {
    let mut scale = value.abs();
    if alpha > 1.0 {
        scale = scale.max(pole_amplitude(alpha, beta, x));
    }
    let first = (1..=3)
        .map(|k| asymptotic_term(alpha, beta, x, k).abs())
        .fold(0.0, f64::max);
    scale.max(first)
}

fn asymptotic_term(alpha: f64, beta: f64, x: f64, k: usize) -> f64 {
    let parity = if k % 2 == 1 { 1.0 } else { -1.0 };
    let arg = beta - k as f64 * alpha;
    if arg <= 0.5 && (arg - arg.round()).abs() <= 1e-12 * arg.abs().max(1.0) {
        // rounding in kα must not turn a vanishing coefficient into a tiny one
        return 0.0;
    }
    let ln_x = x.ln();
    if k as f64 * ln_x.abs() < 600.0 && arg > -160.0 {
        return parity * rgamma(arg) * x.powi(-(k as i32));
    }
    match ln_abs_rgamma(arg) {
        None => 0.0,
        Some((ln_mag, sign)) => parity * sign * (ln_mag - k as f64 * ln_x).exp(),
    }
}

fn series(alpha: f64, beta: f64, x: f64) -> Option<MlValue> {
    // the largest term is roughly exp(x^{1/α}); beyond this the cancellation
    // cannot be recovered in double precision
    if x.powf(1.0 / alpha) > 36.0 {
        return None;
    }
    let mut sum = CompensatedSum::new();
    let mut abs_sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0usize;
    loop {
        let arg = alpha * k as f64 + beta;
        if arg > 170.0 {
            break;
        }
        let mag = x.powi(k as i32) * rgamma(arg);
        let term = if k % 2 == 0 { mag } else { -mag };
        sum.add(term);
        abs_sum += mag.abs();
        let s = sum.value().abs();
        if k > 2 && mag.abs() < prev && mag.abs() <= 1e-17 * s.max(f64::MIN_POSITIVE) {
            break;
        }
        if mag != 0.0 {
            prev = mag.abs();
        }
        k += 1;
        if k > 4000 {
            return None;
        }
    }
    let value = sum.value();
    let error_bound = 4.0 * f64::EPSILON * abs_sum;
    if error_bound <= WORKING_TOL * value.abs() {
        Some(MlValue {
            value,
            error_bound,
            regime: Regime::Series,
            degraded: false,
        })
    } else {
        None
    }
}

fn pole_amplitude(alpha: f64, beta: f64, x: f64) -> f64 {
    let r = x.powf(1.0 / alpha);
    (2.0 / alpha) * x.powf((1.0 - beta) / alpha) * (r * cos_pi(1.0 / alpha)).exp()
}

/// Contribution of the poles `s = x^{1/α} e^{±iπ/α}` for `1 < α <= 2`.
fn pole_term(alpha: f64, beta: f64, x: f64) -> f64 {
    let r = x.powf(1.0 / alpha);
    let phase = r * sin_pi(1.0 / alpha) + PI * (1.0 - beta) / alpha;
    pole_amplitude(alpha, beta, x) * phase.cos()
}

/// Optimally truncated asymptotic expansion including pole terms.
fn asymptotic_full(alpha: f64, beta: f64, x: f64) -> MlValue {
    let mut sum = CompensatedSum::new();
    let mut last_nonzero = f64::INFINITY;
    let mut omitted = 0.0;
    let mut abs_sum = 0.0;
    let mut k = 1;
    loop {
        let term = asymptotic_term(alpha, beta, x, k);
        if term != 0.0 {
            if term.abs() > last_nonzero {
                // terms started growing: optimal truncation point reached
                omitted = last_nonzero;
                break;
            }
            let current = sum.value().abs();
            if term.abs() <= 1e-18 * current {
                omitted = term.abs();
                break;
            }
            sum.add(term);
            abs_sum += term.abs();
            last_nonzero = term.abs();
        } else if beta - k as f64 * alpha <= 0.0
            && (k as f64 * alpha).fract() == 0.0
            && alpha.fract() == 0.0
            && beta.fract() == 0.0
        {
            // integer α and β: every further term vanishes as well
            break;
        }
        k += 1;
        if k > 600 {
            omitted = last_nonzero;
            break;
        }
    }
    let mut error_bound = omitted;
    if alpha > 1.0 {
        sum.add(pole_term(alpha, beta, x));
        error_bound += 64.0 * f64::EPSILON * x.powf(1.0 / alpha) * pole_amplitude(alpha, beta, x);
    } else if alpha == 1.0 {
        // the real pole at s = -x contributes at most e^{-x} x^{1-β}
        error_bound += (-x).exp() * x.powf(1.0 - beta);
    }
    let value = sum.value();
    error_bound += 4.0 * f64::EPSILON * abs_sum.max(value.abs());
    MlValue {
        value,
        error_bound,
        regime: Regime::Asymptotic,
        degraded: false,
    }
}

fn finish_integral(value: f64, abs_error: f64, failed: bool) -> MlValue {
    let error_bound = abs_error + 8.0 * f64::EPSILON * value.abs();
    MlValue {
        value,
        error_bound,
        regime: Regime::Integral,
        degraded: failed,
    }
}

/// Breakpoints in `w` for the substituted integrals `u = w^p`.
fn u_breaks(peak_u: f64, p: f64) -> Vec<f64> {
    let mut us = vec![0.0, 1e-3, 1e-1, 1.0, 5.0, 20.0, 80.0, 250.0, EXP_CUTOFF];
    for f in [0.25, 0.5, 0.8, 1.0, 1.25, 2.0, 4.0] {
        us.push(peak_u * f);
    }
    us.retain(|u| *u >= 0.0 && *u <= EXP_CUTOFF);
    us.sort_by(f64::total_cmp);
    us.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1e-300));
    us.into_iter().map(|u| u.powf(1.0 / p)).collect()
}

fn quad_or_degraded<F: Fn(f64) -> f64>(f: F, breaks: &[f64]) -> (f64, f64, bool) {
    match integrate_with_breaks(f, breaks, Tolerance::relative(WORKING_TOL), 4000) {
        Ok(r) => (r.value, r.abs_error, false),
        Err(Error::QuadratureFailure {
            value, achieved, ..
        }) => (value, achieved, true),
        Err(_) => (f64::NAN, f64::INFINITY, true),
    }
}

/// `0 < α < 1`, `β < 1 + α`.
fn integral_real(alpha: f64, beta: f64, x: f64) -> Result<MlValue> {
    let p = 1.0 / (1.0 + alpha - beta);
    let s1 = sin_pi(1.0 - beta);
    let s2 = sin_pi(1.0 - beta + alpha);
    let c = cos_pi(alpha);
    let sa = sin_pi(alpha);
    let f = |w: f64| {
        let u = w.powf(p);
        if u > EXP_CUTOFF {
            return 0.0;
        }
        let chi = u.powf(alpha);
        let num = chi * s1 + x * s2;
        let shifted = chi + x * c;
        let den = shifted * shifted + (x * sa) * (x * sa);
        (-u).exp() * num / den
    };
    let breaks = u_breaks(x.powf(1.0 / alpha), p);
    let (v, e, failed) = quad_or_degraded(f, &breaks);
    let scale = p / PI;
    Ok(finish_integral(scale * v, scale * e, failed))
}

/// `1 < α <= 2` via `E_{α,β}(-x) = Re E_{α/2,β}(i√x)`, `β < 1 + α/2`.
fn integral_complex(alpha: f64, beta: f64, x: f64) -> Result<MlValue> {
    let a = 0.5 * alpha;
    let p = 1.0 / (1.0 + a - beta);
    let s1 = sin_pi(1.0 - beta);
    let s2 = sin_pi(1.0 - beta + a);
    let c = cos_pi(a);
    let y = x.sqrt();
    let f = |w: f64| {
        let u = w.powf(p);
        if u > EXP_CUTOFF {
            return 0.0;
        }
        let chi = u.powf(a);
        let nr = chi * s1;
        let ni = -y * s2;
        let dr = (chi - y) * (chi + y);
        let di = -2.0 * chi * y * c;
        let den = dr * dr + di * di;
        (-u).exp() * (nr * dr + ni * di) / den
    };
    let breaks = u_breaks(x.powf(1.0 / alpha), p);
    let (v, e, failed) = quad_or_degraded(f, &breaks);
    let scale = p / PI;
    let pole = pole_term(alpha, beta, x);
    let mut out = finish_integral(scale * v + pole, scale * e, failed);
    out.error_bound += 64.0 * f64::EPSILON * x.powf(1.0 / alpha) * pole_amplitude(alpha, beta, x);
    Ok(out)
}

/// `α = 1`, `β != 1`, moderate `x`.
fn order_one_integral(beta: f64, x: f64) -> Result<MlValue> {
    if beta <= 1.0 {
        let upper = order_one_integral(beta + 1.0, x)?;
        return Ok(MlValue {
            value: rgamma(beta) - x * upper.value,
            error_bound: x * upper.error_bound + f64::EPSILON * rgamma(beta).abs(),
            ..upper
        });
    }
    // E_{1,β}(-x) = 1/Γ(β) ∫_0^1 exp(-x (1 - v^{1/(β-1)})) dv
    let q = 1.0 / (beta - 1.0);
    let f = |v: f64| (-x * (1.0 - v.powf(q))).exp();
    let mut breaks = vec![0.0];
    for w in [1e-8, 1e-4, 1e-2, 0.1, 0.3, 0.6] {
        // v^q sweeps from 0 to 1 over a layer of width ~ (β - 1) near v = 1
        let v = f64::powf(w, beta - 1.0);
        if v > *breaks.last().unwrap() && v < 1.0 {
            breaks.push(v);
        }
    }
    for d in [1e-1, 1e-2, 1e-3, 1e-4] {
        // resolve the boundary layer near v = 1 where the integrand lives
        let v = (1.0 - d / x.max(1.0)).powf(beta - 1.0);
        if v > *breaks.last().unwrap() && v < 1.0 {
            breaks.push(v);
        }
    }
    breaks.push(1.0);
    let (v, e, failed) = quad_or_degraded(f, &breaks);
    let r = rgamma(beta);
    Ok(finish_integral(r * v, r.abs() * e, failed))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn zero_argument_is_reciprocal_gamma() {
        let v = ml(0.7, 0.7, 0.0);
        assert!(rel(v, 1.0 / crate::special::gamma(0.7)) < 1e-15);
    }

    #[test]
    fn exponential_identity() {
        assert!(rel(ml(1.0, 1.0, 2.0), 0.1353352832366127) < 1e-15);
    }

    #[test]
    fn rejects_negative_argument_and_bad_params() {
        let p = MlParams::new(0.5, 0.5).unwrap();
        assert!(ml_eval(p, -1.0).is_err());
        assert!(MlParams::new(0.0, 1.0).is_err());
        assert!(MlParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn asymptotic_first_term() {
        let p = MlParams::new(0.7, 1.0).unwrap();
        let (v, _) = ml_asymptotic(p, 1e6, 1).unwrap();
        let expected = 1e-6 / crate::special::gamma(0.3);
        assert!(rel(v, expected) < 1e-14);
    }

    #[test]
    fn asymptotic_vanishing_first_term() {
        let p = MlParams::new(0.5, 0.5).unwrap();
        for x in [3.0, 100.0, 1e5] {
            let (v, _) = ml_asymptotic(p, x, 1).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn asymptotic_agrees_within_proxy() {
        let p = MlParams::new(0.7, 0.7).unwrap();
        let (v, proxy) = ml_asymptotic(p, 1e4, 3).unwrap();
        let e = ml_eval(p, 1e4).unwrap().value;
        assert!((v - e).abs() <= proxy, "{v} {e} {proxy}");
    }

    #[test]
    fn kernel_reduces_to_exponential() {
        let k = ml_kernel(1.0, 3.0, 2.0).unwrap();
        assert!(rel(k, (-6.0f64).exp()) < 1e-14);
        assert!(ml_kernel(0.5, 1.0, 0.0).is_err());
    }

    #[test]
    fn kernel_small_s_behaviour() {
        let s = 1e-12;
        let k = ml_kernel(0.5, 1.0, s).unwrap();
        let lead = s.powf(-0.5) / crate::special::gamma(0.5);
        assert!(rel(k, lead) < 1e-5);
    }

    #[test]
    fn order_one_general_beta() {
        // frozen high-precision series values
        assert!(rel(ml(1.0, 0.5, 20.0), -0.015325407164895395749) < 1e-11);
        assert!(rel(ml(1.0, 2.5, 12.0), 0.089923469058666201594) < 1e-11);
    }
}
