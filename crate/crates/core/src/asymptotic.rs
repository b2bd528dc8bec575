//! Long-time expansions of `ψ_n(t)` and of the weighted sums `Σ a_n ψ_n(t)`.
//!
//! A series is a list of terms `c · t^{γ} · (log t)^ε`; each term records the
//! power of `λ` (or the spectral moment) its coefficient came from.

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::forward::ObservationTrace;
use crate::spectral::least_squares_line;
use crate::special::{binomial, rgamma, CompensatedSum};
use crate::temporal::{c_mu, TemporalSource};

pub const DEFAULT_DETECTION_BOUND: u64 = 1_000_000;

/// Internal splitting exponents of the truncation rules.
const BETA1: f64 = 1.0 / 3.0;
const BETA2: f64 = 2.0 / 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Rationality {
    Rational { p: u64, q: u64 },
    IrrationalPresumed,
}

/// The order `α ∈ (0,1) ∪ (1,2)` with its rationality classification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalOrder {
    pub alpha: f64,
    pub rationality: Rationality,
    pub detection_bound: u64,
}

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        Self::with_bound(alpha, DEFAULT_DETECTION_BOUND)
    }

    pub fn with_bound(alpha: f64, detection_bound: u64) -> Result<Self> {
        check_alpha(alpha)?;
        if detection_bound == 0 {
            return Err(invalid("detection_bound", "must be at least 1"));
        }
        Ok(Self {
            alpha,
            rationality: detect_rational(alpha, detection_bound),
            detection_bound,
        })
    }

    /// Skips detection and treats `alpha` as irrational.
    pub fn irrational(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            rationality: Rationality::IrrationalPresumed,
            detection_bound: 0,
        })
    }

    pub fn is_rational(&self) -> bool {
        matches!(self.rationality, Rationality::Rational { .. })
    }

    /// `-(l α + j)`, exact in the rational case so that equal exponents
    /// produce identical floats.
    pub(crate) fn t_exponent(&self, l: u64, j: u64) -> f64 {
        match self.rationality {
            Rationality::Rational { p, q } => -((l * p + j * q) as f64) / q as f64,
            Rationality::IrrationalPresumed => -(l as f64 * self.alpha) - j as f64,
        }
    }

    /// `-1 - m/α`.
    fn placeholder_lambda_power(&self, m: u64) -> f64 {
        match self.rationality {
            Rationality::Rational { p, q } => -((p + m * q) as f64) / p as f64,
            Rationality::IrrationalPresumed => -1.0 - m as f64 / self.alpha,
        }
    }

    /// `l α` as used in Gamma arguments.
    pub(crate) fn l_alpha(&self, l: u64) -> f64 {
        match self.rationality {
            Rationality::Rational { p, q } => (l * p) as f64 / q as f64,
            Rationality::IrrationalPresumed => l as f64 * self.alpha,
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 2.0 && alpha != 1.0) {
        return Err(invalid("alpha", format!("must lie in (0,1)∪(1,2), got {alpha}")));
    }
    Ok(())
}

/// Continued-fraction convergents up to the denominator bound; rational when
/// a convergent reproduces `alpha` to working precision.
fn detect_rational(alpha: f64, bound: u64) -> Rationality {
    let (mut p0, mut q0, mut p1, mut q1) = (0u64, 1u64, 1u64, 0u64);
    let mut x = alpha;
    for _ in 0..64 {
        let a = x.floor();
        if a > 1e12 {
            break;
        }
        let a = a as u64;
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > bound {
            break;
        }
        let approx = p2 as f64 / q2 as f64;
        if (approx - alpha).abs() <= 2.0 * f64::EPSILON * alpha {
            return Rationality::Rational { p: p2, q: q2 };
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = x - a as f64;
        if frac <= 0.0 {
            break;
        }
        x = 1.0 / frac;
    }
    Rationality::IrrationalPresumed
}

/// The first `count` integers `k >= 1` with `-1 + kα` not a nonnegative
/// integer.
pub fn lk_sequence(alpha: &FractionalOrder, count: usize) -> Vec<u64> {
    match alpha.rationality {
        // with gcd(p, q) = 1, kp/q is an integer iff q | k, and then kp/q >= 1
        Rationality::Rational { q, .. } => (1..).filter(|k| k % q != 0).take(count).collect(),
        Rationality::IrrationalPresumed => (1..=count as u64).collect(),
    }
}

/// Term counts `K` (powers of `λ t^α`), `J` (powers of `1/t` in `μ`) and `M`
/// (Taylor depth of the placeholder terms).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Truncation {
    pub k_terms: usize,
    pub j_terms: usize,
    pub m_terms: usize,
}

impl Truncation {
    /// Minimal counts meeting `α β₂ l_{K+1} > N`, `(J+1) β₁ > N`,
    /// `1 + (M+1)(1-β₁) > N` and `(M+1)(1-β₂) > N`.
    pub fn for_order(alpha: &FractionalOrder, order: u32) -> Self {
        let n = order as f64;
        let mut k = 0;
        loop {
            let l = *lk_sequence(alpha, k + 1).last().expect("nonempty");
            if alpha.alpha * BETA2 * l as f64 > n {
                break;
            }
            k += 1;
        }
        let mut j = 0;
        while (j as f64 + 1.0) * BETA1 <= n {
            j += 1;
        }
        let mut m = 0;
        while 1.0 + (m as f64 + 1.0) * (1.0 - BETA1) <= n || (m as f64 + 1.0) * (1.0 - BETA2) <= n {
            m += 1;
        }
        Self {
            k_terms: k,
            j_terms: j,
            m_terms: m,
        }
    }
}

/// One term `coeff · t^{t_power} · (log t)^{has_log}`. `coeff` already
/// contains the spectral factor `λ^{lambda_power}` (or its moment).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesTerm {
    pub coeff: f64,
    pub lambda_power: f64,
    pub t_power: f64,
    pub has_log: bool,
    /// False for coefficients that are only known structurally.
    pub explicit: bool,
}

impl SeriesTerm {
    pub fn eval(&self, t: f64) -> f64 {
        let v = self.coeff * t.powf(self.t_power);
        if self.has_log {
            v * t.ln()
        } else {
            v
        }
    }

    fn same_key(&self, other: &SeriesTerm) -> bool {
        self.lambda_power == other.lambda_power
            && self.t_power == other.t_power
            && self.has_log == other.has_log
    }
}

fn term_order(a: &SeriesTerm, b: &SeriesTerm) -> Ordering {
    b.t_power
        .total_cmp(&a.t_power)
        .then_with(|| b.has_log.cmp(&a.has_log))
        .then_with(|| b.lambda_power.total_cmp(&a.lambda_power))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticSeries {
    pub terms: Vec<SeriesTerm>,
    /// Remainder order `N`; `None` for a manually truncated series.
    pub order: Option<u32>,
    pub truncation: Truncation,
    pub alpha: FractionalOrder,
}

impl AsymptoticSeries {
    pub fn value(&self, t: f64) -> f64 {
        self.terms.iter().map(|term| term.eval(t)).collect::<CompensatedSum>().value()
    }

    /// Sum of the terms that decay in `t`.
    pub fn decaying_value(&self, t: f64) -> f64 {
        self.terms
            .iter()
            .filter(|term| term.t_power < 0.0)
            .map(|term| term.eval(t))
            .collect::<CompensatedSum>()
            .value()
    }

    pub fn constant(&self) -> f64 {
        self.terms
            .iter()
            .filter(|term| term.t_power == 0.0 && !term.has_log)
            .map(|term| term.coeff)
            .sum()
    }

    pub fn explicit_mask(&self) -> Vec<bool> {
        self.terms.iter().map(|term| term.explicit).collect()
    }

    /// Distinct `(t_power, has_log)` pairs in series order.
    pub fn time_basis(&self) -> Vec<(f64, bool)> {
        let mut out: Vec<(f64, bool)> = Vec::new();
        for term in &self.terms {
            if !out.iter().any(|&(p, l)| p == term.t_power && l == term.has_log) {
                out.push((term.t_power, term.has_log));
            }
        }
        out
    }

    /// CSV with header `coeff,lambda_power,t_power,has_log,explicit`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("coeff,lambda_power,t_power,has_log,explicit\n");
        for t in &self.terms {
            s.push_str(&format!(
                "{:e},{:e},{:e},{},{}\n",
                t.coeff, t.lambda_power, t.t_power, t.has_log as u8, t.explicit as u8
            ));
        }
        s
    }
}

/// Merges terms with equal keys and sorts by descending `t_power`.
fn collect(mut terms: Vec<SeriesTerm>) -> Vec<SeriesTerm> {
    terms.sort_by(term_order);
    let mut out: Vec<SeriesTerm> = Vec::with_capacity(terms.len());
    for term in terms {
        match out.last_mut() {
            Some(last) if last.same_key(&term) => {
                last.coeff += term.coeff;
                last.explicit &= term.explicit;
            }
            _ => out.push(term),
        }
    }
    out
}

/// Builds the term list; `spectral(γ)` supplies the factor standing in for
/// `λ^{-γ-1}`.
fn build_terms(
    alpha: &FractionalOrder,
    src: &TemporalSource,
    trunc: Truncation,
    spectral: &dyn Fn(f64) -> f64,
) -> Result<Vec<SeriesTerm>> {
    src.validate()?;
    let ls = lk_sequence(alpha, trunc.k_terms);
    let mut terms = Vec::new();
    let mu0 = src.mu_coeff(0);
    if mu0 != 0.0 {
        terms.push(SeriesTerm {
            coeff: mu0 * spectral(0.0),
            lambda_power: -1.0,
            t_power: 0.0,
            has_log: false,
            explicit: true,
        });
        for &l in &ls {
            terms.push(SeriesTerm {
                coeff: limit_factor(alpha, l) * mu0 * spectral(l as f64),
                lambda_power: -(l as f64) - 1.0,
                t_power: alpha.t_exponent(l, 0),
                has_log: false,
                explicit: true,
            });
        }
    }

    let tail = src.has_decaying_tail();
    let constant_only = matches!(src, TemporalSource::Constant { .. });
    for j in 1..=trunc.j_terms as u64 {
        let mu_j = src.mu_coeff(j as usize);
        let c = if constant_only {
            0.0
        } else {
            c_mu(src, j as usize - 1)?.value
        };
        for &l in &ls {
            let factor = decay_factor(alpha, l, j) * spectral(l as f64);
            let lambda_power = -(l as f64) - 1.0;
            let t_power = alpha.t_exponent(l, j);
            if mu_j != 0.0 {
                terms.push(SeriesTerm {
                    coeff: factor * mu_j,
                    lambda_power,
                    t_power,
                    has_log: true,
                    explicit: true,
                });
            }
            if c != 0.0 || tail {
                terms.push(SeriesTerm {
                    coeff: factor * c,
                    lambda_power,
                    t_power,
                    has_log: false,
                    explicit: !tail,
                });
            }
        }
    }
    if tail {
        for j in 1..=trunc.j_terms as u64 {
            for m in 0..=trunc.m_terms as u64 {
                terms.push(SeriesTerm {
                    coeff: 0.0,
                    lambda_power: alpha.placeholder_lambda_power(m),
                    t_power: -((j + m) as f64),
                    has_log: false,
                    explicit: false,
                });
            }
        }
    }
    Ok(collect(terms))
}

/// Temporal factor of `t^{-lα}` per unit `μ_0` and spectral moment:
/// `(-1)^l / Γ(1 - lα)`.
pub fn limit_factor(alpha: &FractionalOrder, l: u64) -> f64 {
    parity(l) * rgamma(1.0 - alpha.l_alpha(l))
}

/// Temporal factor of `t^{-lα-j}` (with or without `log t`) per unit
/// spectral moment: `(-1)^{l-1+j} / Γ(-lα) · binom(-lα-1, j-1)`.
pub fn decay_factor(alpha: &FractionalOrder, l: u64, j: u64) -> f64 {
    let la = alpha.l_alpha(l);
    parity(l - 1 + j) * rgamma(-la) * binomial(-la - 1.0, j as usize - 1)
}

fn parity(n: u64) -> f64 {
    if n % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Expansion of `ψ_n` with truncation chosen for remainder order `order`.
pub fn expansion_psi(
    alpha: &FractionalOrder,
    lambda: f64,
    src: &TemporalSource,
    order: u32,
) -> Result<AsymptoticSeries> {
    let trunc = Truncation::for_order(alpha, order);
    let mut s = expansion_psi_truncated(alpha, lambda, src, trunc)?;
    s.order = Some(order);
    Ok(s)
}

pub fn expansion_psi_truncated(
    alpha: &FractionalOrder,
    lambda: f64,
    src: &TemporalSource,
    truncation: Truncation,
) -> Result<AsymptoticSeries> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    let terms = build_terms(alpha, src, truncation, &|g| lambda.powf(-g - 1.0))?;
    Ok(AsymptoticSeries {
        terms,
        order: None,
        truncation,
        alpha: *alpha,
    })
}

/// `A_γ = Σ_n a_n λ_n^{-γ-1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralMoments {
    pub gammas: Vec<f64>,
    pub values: Vec<f64>,
}

impl SpectralMoments {
    pub fn compute(weights: &[f64], lambdas: &[f64], gammas: &[f64]) -> Self {
        let values = gammas.iter().map(|&g| moment(weights, lambdas, g)).collect();
        Self {
            gammas: gammas.to_vec(),
            values,
        }
    }
}

pub fn moment(weights: &[f64], lambdas: &[f64], gamma: f64) -> f64 {
    weights
        .iter()
        .zip(lambdas)
        .map(|(a, l)| a * l.powf(-gamma - 1.0))
        .collect::<CompensatedSum>()
        .value()
}

fn check_weights(weights: &[f64], lambdas: &[f64]) -> Result<()> {
    if weights.len() != lambdas.len() || weights.is_empty() {
        return Err(invalid(
            "weights",
            format!("{} weights for {} eigenvalues", weights.len(), lambdas.len()),
        ));
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(invalid("lambdas", format!("must be positive, got {l}")));
    }
    let s: f64 = weights
        .iter()
        .zip(lambdas)
        .map(|(a, l)| a.abs() * (1.0 + l).ln() / l)
        .sum();
    if !s.is_finite() {
        return Err(Error::Divergent(format!("Σ|a_n| λ_n^{{-1}} log(1+λ_n) = {s}")));
    }
    Ok(())
}

/// Expansion of `Σ a_n ψ_n(t)`; the `λ` factors become spectral moments.
pub fn expansion_sum(
    weights: &[f64],
    lambdas: &[f64],
    alpha: &FractionalOrder,
    src: &TemporalSource,
    order: u32,
) -> Result<AsymptoticSeries> {
    let trunc = Truncation::for_order(alpha, order);
    let mut s = expansion_sum_truncated(weights, lambdas, alpha, src, trunc)?;
    s.order = Some(order);
    Ok(s)
}

pub fn expansion_sum_truncated(
    weights: &[f64],
    lambdas: &[f64],
    alpha: &FractionalOrder,
    src: &TemporalSource,
    truncation: Truncation,
) -> Result<AsymptoticSeries> {
    check_weights(weights, lambdas)?;
    let terms = build_terms(alpha, src, truncation, &|g| moment(weights, lambdas, g))?;
    Ok(AsymptoticSeries {
        terms,
        order: None,
        truncation,
        alpha: *alpha,
    })
}

/// Residual of a series against data.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub residual: Vec<f64>,
    /// `(decade start, max |residual| in the decade)`.
    pub per_decade: Vec<(f64, f64)>,
    /// Log-log slope of `|residual|`; `None` if it vanishes identically.
    pub slope: Option<f64>,
}

pub fn compare(times: &[f64], values: &[f64], series: &AsymptoticSeries) -> Result<Comparison> {
    let residual: Vec<f64> = times.iter().zip(values).map(|(&t, &v)| v - series.value(t)).collect();
    summarize(times, residual)
}

/// Compares a forward trace. The constant terms are matched against the
/// trace baseline and the decaying terms against the transient part, so the
/// residual does not suffer cancellation against the limit.
pub fn compare_trace(trace: &ObservationTrace, series: &AsymptoticSeries) -> Result<Comparison> {
    compare_split(trace.times(), &trace.baseline, &trace.transient, series)
}

/// As [`compare_trace`] for data given as `baseline + transient`.
pub fn compare_split(
    times: &[f64],
    baseline: &[f64],
    transient: &[f64],
    series: &AsymptoticSeries,
) -> Result<Comparison> {
    if baseline.len() != times.len() || transient.len() != times.len() {
        return Err(Error::InsufficientData(format!(
            "{} times for {} + {} values",
            times.len(),
            baseline.len(),
            transient.len()
        )));
    }
    let c = series.constant();
    let residual = times
        .iter()
        .zip(baseline.iter().zip(transient))
        .map(|(&t, (&b, &tr))| (b - c) + (tr - series.decaying_value(t)))
        .collect();
    summarize(times, residual)
}

fn summarize(times: &[f64], residual: Vec<f64>) -> Result<Comparison> {
    if times.len() != residual.len() || times.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} times for {} values",
            times.len(),
            residual.len()
        )));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0)) {
        return Err(invalid("times", format!("must be positive, got {t}")));
    }
    let mut per_decade: Vec<(f64, f64)> = Vec::new();
    for (&t, r) in times.iter().zip(&residual) {
        let start = 10f64.powf(t.log10().floor());
        match per_decade.last_mut() {
            Some(last) if last.0 == start => last.1 = last.1.max(r.abs()),
            _ => per_decade.push((start, r.abs())),
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(&residual)
        .filter(|(_, r)| **r != 0.0)
        .map(|(t, r)| (t.ln(), r.abs().ln()))
        .unzip();
    let slope = (xs.len() >= 2).then(|| least_squares_line(&xs, &ys).0);
    Ok(Comparison {
        residual,
        per_decade,
        slope,
    })
}
