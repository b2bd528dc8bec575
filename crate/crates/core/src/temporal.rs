//! Temporal source profiles `μ(t)` with their large-time expansion
//! `μ(t) ~ Σ_j μ_j t^{-j}`, the glued remainder `R̄_{μ,m'}` and the moment
//! coefficients `c_{μ,m}`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::special::{binomial, CompensatedSum};

/// Polynomial `Σ_k coeffs[k] (t - start)^k` on `[start, end)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TemporalSource {
    /// `μ ≡ mu0`.
    Constant { mu0: f64 },
    /// `Σ_{j=0..J} coeffs[j] (1+t)^{-j}`.
    RationalTail { coeffs: Vec<f64> },
    /// `amplitude / (1 + rate·t)`.
    InverseLinear { amplitude: f64, rate: f64 },
    /// Piecewise polynomial, zero outside the pieces.
    CompactSupport { pieces: Vec<Piece> },
    /// `c1 exp(-c2 √t)`.
    SubGaussian { c1: f64, c2: f64 },
    /// `amplitude · exp(-decay·t) · sin(frequency·t)`.
    DampedOscillation {
        amplitude: f64,
        decay: f64,
        frequency: f64,
    },
}

/// Which decay hypothesis a source is certified under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Certification {
    /// `μ` keeps one sign after `t_star`.
    ConstantSign { t_star: f64 },
    /// `|μ(t)| <= c1 exp(-c2 √t)`.
    FastDecay { c1: f64, c2: f64 },
}

impl TemporalSource {
    pub fn indicator(start: f64, end: f64, value: f64) -> Self {
        TemporalSource::CompactSupport {
            pieces: vec![Piece {
                start,
                end,
                coeffs: vec![value],
            }],
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            TemporalSource::Constant { .. } => "constant",
            TemporalSource::RationalTail { .. } => "rational-tail",
            TemporalSource::InverseLinear { .. } => "inverse-linear",
            TemporalSource::CompactSupport { .. } => "compact-support",
            TemporalSource::SubGaussian { .. } => "sub-gaussian",
            TemporalSource::DampedOscillation { .. } => "damped-oscillation",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &'static str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(invalid(name, format!("must be finite, got {v}")))
            }
        };
        match self {
            TemporalSource::Constant { mu0 } => finite("mu0", *mu0),
            TemporalSource::RationalTail { coeffs } => {
                if coeffs.is_empty() {
                    return Err(invalid("coeffs", "at least one coefficient is required"));
                }
                coeffs.iter().try_for_each(|c| finite("coeffs", *c))
            }
            TemporalSource::InverseLinear { amplitude, rate } => {
                finite("amplitude", *amplitude)?;
                if !(*rate > 0.0 && rate.is_finite()) {
                    return Err(invalid("rate", format!("must be positive, got {rate}")));
                }
                Ok(())
            }
            TemporalSource::CompactSupport { pieces } => {
                let mut previous_end = 0.0;
                for p in pieces {
                    if !(p.start >= previous_end && p.end > p.start && p.end.is_finite()) {
                        return Err(invalid(
                            "pieces",
                            format!(
                                "pieces must be ordered, nonoverlapping, nonnegative and bounded; got [{}, {})",
                                p.start, p.end
                            ),
                        ));
                    }
                    p.coeffs.iter().try_for_each(|c| finite("coeffs", *c))?;
                    previous_end = p.end;
                }
                Ok(())
            }
            TemporalSource::SubGaussian { c1, c2 } => {
                finite("c1", *c1)?;
                if !(*c2 > 0.0 && c2.is_finite()) {
                    return Err(invalid("c2", format!("must be positive, got {c2}")));
                }
                Ok(())
            }
            TemporalSource::DampedOscillation {
                amplitude,
                decay,
                frequency,
            } => {
                finite("amplitude", *amplitude)?;
                finite("frequency", *frequency)?;
                if !(*decay > 0.0 && decay.is_finite()) {
                    return Err(invalid("decay", format!("must be positive, got {decay}")));
                }
                Ok(())
            }
        }
    }

    pub fn mu_eval(&self, t: f64) -> f64 {
        match self {
            TemporalSource::Constant { mu0 } => *mu0,
            TemporalSource::RationalTail { coeffs } => {
                // Horner in 1/(1+t)
                let w = 1.0 / (1.0 + t);
                coeffs.iter().rev().fold(0.0, |acc, c| acc * w + c)
            }
            TemporalSource::InverseLinear { amplitude, rate } => amplitude / (1.0 + rate * t),
            TemporalSource::CompactSupport { pieces } => pieces
                .iter()
                .find(|p| t >= p.start && t < p.end)
                .map(|p| {
                    let d = t - p.start;
                    p.coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c)
                })
                .unwrap_or(0.0),
            TemporalSource::SubGaussian { c1, c2 } => c1 * (-c2 * t.sqrt()).exp(),
            TemporalSource::DampedOscillation {
                amplitude,
                decay,
                frequency,
            } => amplitude * (-decay * t).exp() * (frequency * t).sin(),
        }
    }

    /// Sign of `μ(t)`, robust against underflow of decaying factors.
    pub fn sign_at(&self, t: f64) -> f64 {
        let s = match self {
            TemporalSource::SubGaussian { c1, .. } => *c1,
            TemporalSource::DampedOscillation {
                amplitude,
                frequency,
                ..
            } => amplitude * (frequency * t).sin(),
            _ => self.mu_eval(t),
        };
        if s > 0.0 {
            1.0
        } else if s < 0.0 {
            -1.0
        } else {
            0.0
        }
    }

    /// `μ_j` of the large-time expansion.
    pub fn mu_coeff(&self, j: usize) -> f64 {
        match self {
            TemporalSource::Constant { mu0 } => {
                if j == 0 {
                    *mu0
                } else {
                    0.0
                }
            }
            TemporalSource::RationalTail { coeffs } => {
                if j == 0 {
                    return coeffs[0];
                }
                // (1+t)^{-i} = Σ_k binom(-i, k) t^{-i-k}
                (1..=j.min(coeffs.len() - 1))
                    .map(|i| coeffs[i] * binomial(-(i as f64), j - i))
                    .collect::<CompensatedSum>()
                    .value()
            }
            TemporalSource::InverseLinear { amplitude, rate } => {
                if j == 0 {
                    0.0
                } else {
                    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                    sign * amplitude * rate.powi(-(j as i32))
                }
            }
            TemporalSource::CompactSupport { .. }
            | TemporalSource::SubGaussian { .. }
            | TemporalSource::DampedOscillation { .. } => 0.0,
        }
    }

    /// `[μ_0, …, μ_J]`.
    pub fn mu_coeffs(&self, max_j: usize) -> Vec<f64> {
        (0..=max_j).map(|j| self.mu_coeff(j)).collect()
    }

    /// True when some `μ_j` with `j >= 1` is nonzero.
    pub fn has_decaying_tail(&self) -> bool {
        match self {
            TemporalSource::RationalTail { coeffs } => coeffs.iter().skip(1).any(|c| *c != 0.0),
            TemporalSource::InverseLinear { amplitude, .. } => *amplitude != 0.0,
            _ => false,
        }
    }

    /// Times where `μ` or its derivatives jump.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            TemporalSource::CompactSupport { pieces } => {
                let mut k: Vec<f64> = pieces.iter().flat_map(|p| [p.start, p.end]).collect();
                k.retain(|t| *t > 0.0);
                k.sort_by(f64::total_cmp);
                k.dedup();
                k
            }
            _ => Vec::new(),
        }
    }

    /// Bound on `sup |μ|`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            TemporalSource::Constant { mu0 } => mu0.abs(),
            TemporalSource::RationalTail { coeffs } => coeffs.iter().map(|c| c.abs()).sum(),
            TemporalSource::InverseLinear { amplitude, .. } => amplitude.abs(),
            TemporalSource::CompactSupport { pieces } => pieces
                .iter()
                .map(|p| {
                    (0..=256)
                        .map(|i| {
                            let d = (p.end - p.start) * i as f64 / 256.0;
                            p.coeffs.iter().rev().fold(0.0, |acc: f64, c| acc * d + c).abs()
                        })
                        .fold(0.0, f64::max)
                })
                .fold(0.0, f64::max),
            TemporalSource::SubGaussian { c1, .. } => c1.abs(),
            TemporalSource::DampedOscillation { amplitude, .. } => amplitude.abs(),
        }
    }

    /// Radius beyond which `Σ_j μ_j s^{-j}` converges to `μ(s)`.
    fn series_radius(&self) -> Option<f64> {
        match self {
            TemporalSource::RationalTail { .. } => Some(1.0),
            TemporalSource::InverseLinear { rate, .. } => Some(1.0 / rate),
            _ => None,
        }
    }

    pub fn certification(&self) -> Certification {
        match self {
            TemporalSource::SubGaussian { c1, c2 } => Certification::FastDecay {
                c1: c1.abs(),
                c2: *c2,
            },
            TemporalSource::DampedOscillation {
                amplitude, decay, ..
            } => {
                // e^{-bt} <= e^{b/4} e^{-b√t} for every t >= 0
                Certification::FastDecay {
                    c1: amplitude.abs() * (decay / 4.0).exp(),
                    c2: *decay,
                }
            }
            TemporalSource::CompactSupport { pieces } => Certification::ConstantSign {
                t_star: pieces.last().map_or(0.0, |p| p.end),
            },
            TemporalSource::RationalTail { .. } => {
                let t_star = sign_stabilization_time(self, 1e6).unwrap_or(f64::INFINITY);
                Certification::ConstantSign { t_star }
            }
            TemporalSource::Constant { .. } | TemporalSource::InverseLinear { .. } => {
                Certification::ConstantSign { t_star: 0.0 }
            }
        }
    }

    /// The source with its limit `μ_0` removed.
    pub fn without_limit(&self) -> TemporalSource {
        match self {
            TemporalSource::Constant { .. } => TemporalSource::Constant { mu0: 0.0 },
            TemporalSource::RationalTail { coeffs } => {
                let mut c = coeffs.clone();
                c[0] = 0.0;
                TemporalSource::RationalTail { coeffs: c }
            }
            other => other.clone(),
        }
    }
}

/// `R̄_{μ,m'}(s) = μ(s) - Σ_{j=1..m} μ_j s^{-j} - μ_{m+1} s^{-m}/(1+s)
/// - Σ_{j=m+2..m'} (μ_j + (-1)^{j-m} μ_{m+1}) s^{-j}`.
pub fn rbar_eval(src: &TemporalSource, m: usize, m_prime: usize, s: f64) -> Result<f64> {
    if m_prime <= m {
        return Err(invalid("m'", format!("must exceed m = {m}, got {m_prime}")));
    }
    if !(s > 0.0) {
        return Err(invalid("s", format!("must be positive, got {s}")));
    }
    Ok(rbar_direct(src, m, m_prime, s))
}

fn rbar_direct(src: &TemporalSource, m: usize, m_prime: usize, s: f64) -> f64 {
    let mut sum = CompensatedSum::new();
    sum.add(src.mu_eval(s));
    for j in 1..=m {
        sum.add(-src.mu_coeff(j) * s.powi(-(j as i32)));
    }
    let glue = src.mu_coeff(m + 1);
    sum.add(-glue * s.powi(-(m as i32)) / (1.0 + s));
    for j in m + 2..=m_prime {
        let parity = if (j - m) % 2 == 0 { 1.0 } else { -1.0 };
        sum.add(-(src.mu_coeff(j) + parity * glue) * s.powi(-(j as i32)));
    }
    sum.value()
}

/// Large-`s` form of `R̄` for `μ - μ_0`:
/// `Σ_{j > max(m', m+1)} (μ_j + (-1)^{j-m} μ_{m+1}) s^{-j}`.
fn rbar_tail_series(src: &TemporalSource, m: usize, m_prime: usize, s: f64) -> f64 {
    let glue = src.mu_coeff(m + 1);
    let first = (m_prime + 1).max(m + 2);
    let mut sum = CompensatedSum::new();
    let mut previous = f64::INFINITY;
    for j in first..first + 400 {
        let parity = if (j - m) % 2 == 0 { 1.0 } else { -1.0 };
        let term = (src.mu_coeff(j) + parity * glue) * s.powi(-(j as i32));
        sum.add(term);
        if term.abs() <= 1e-18 * sum.value().abs() && term.abs() <= previous {
            break;
        }
        previous = term.abs();
    }
    sum.value()
}

/// `R̄_{μ-μ_0, m'}(s)`, switching to the convergent tail series where the
/// direct formula would cancel.
fn rbar_centered(src: &TemporalSource, m: usize, m_prime: usize, s: f64) -> f64 {
    match src.series_radius() {
        Some(r) if s >= 4.0 * r => rbar_tail_series(src, m, m_prime, s),
        _ => rbar_direct(src, m, m_prime, s) - src.mu_coeff(0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub value: f64,
    pub abs_error: f64,
}

/// `c_{μ,m} = ∫_0^∞ s^m R̄_{μ-μ_0, m+1}(s) ds`.
///
/// The limit `μ_0` is removed first; with it the integral diverges.
pub fn c_mu(src: &TemporalSource, m: usize) -> Result<Moment> {
    c_mu_with_tolerance(src, m, 1e-12)
}

pub fn c_mu_with_tolerance(src: &TemporalSource, m: usize, rel_tol: f64) -> Result<Moment> {
    if let TemporalSource::InverseLinear { amplitude, rate } = *src {
        // R̄ = (-1)^m A r^{-m-1} (r-1) s^{-m} / ((1+rs)(1+s)), whose moment is
        // (-1)^m A r^{-m-1} ln r
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        let value = sign * amplitude * rate.powi(-(m as i32) - 1) * rate.ln();
        return Ok(Moment {
            value,
            abs_error: 4.0 * f64::EPSILON * value.abs(),
        });
    }
    let centered = src.without_limit();
    let g = |s: f64| {
        if s <= 0.0 {
            return 0.0;
        }
        s.powi(m as i32) * rbar_centered(&centered, m, m + 1, s)
    };
    // the remainder can cancel to rounding level, so the absolute floor
    // follows the size of μ
    let tol = Tolerance {
        abs: 1e-13
            * (centered.sup_norm() + (1..=m + 1).map(|j| src.mu_coeff(j).abs()).sum::<f64>())
                .max(f64::MIN_POSITIVE),
        rel: rel_tol,
    };
    let kinks = src.kinks();
    let mut head = vec![0.0];
    head.extend(kinks.iter().copied().filter(|k| *k < 1.0));
    head.push(1.0);
    let mut tail = vec![0.0];
    let mut inverted: Vec<f64> = kinks.iter().filter(|k| **k > 1.0).map(|k| 1.0 / k).collect();
    inverted.sort_by(f64::total_cmp);
    tail.extend(inverted);
    tail.push(1.0);
    // geometric breaks resolve the slow exp(-c√s) and e^{-bs} tails
    for u in [1e-4, 1e-3, 1e-2, 1e-1] {
        tail.push(u);
    }
    tail.sort_by(f64::total_cmp);
    tail.dedup();

    let near = integrate_with_breaks(g, &head, tol, 4000)?;
    let far = integrate_with_breaks(
        |u: f64| if u <= 0.0 { 0.0 } else { g(1.0 / u) / (u * u) },
        &tail,
        tol,
        4000,
    )?;
    Ok(Moment {
        value: near.value + far.value,
        abs_error: near.abs_error + far.abs_error,
    })
}

/// Smallest sampled time after which `μ` keeps one sign up to `horizon`;
/// `None` when sign changes continue into the last tenth of the horizon.
pub fn sign_stabilization_time(src: &TemporalSource, horizon: f64) -> Option<f64> {
    sign_stabilization_time_sampled(src, horizon, 200_000)
}

pub fn sign_stabilization_time_sampled(
    src: &TemporalSource,
    horizon: f64,
    samples: usize,
) -> Option<f64> {
    if !(horizon > 0.0) {
        return None;
    }
    let mut current = 0.0;
    let mut last_change: Option<f64> = None;
    for i in 0..=samples {
        let t = horizon * i as f64 / samples as f64;
        let s = src.sign_at(t);
        if s == 0.0 {
            continue;
        }
        if current != 0.0 && s != current {
            last_change = Some(t);
        }
        current = s;
    }
    match last_change {
        None => Some(0.0),
        Some(t) if t > 0.9 * horizon => None,
        Some(t) => Some(t),
    }
}
