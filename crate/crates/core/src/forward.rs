//! Per-mode responses `ψ_n(t) = ∫_0^t (t-s)^{α-1} E_{α,α}(-λ_n (t-s)^α) μ(s) ds`,
//! the eigenfunction series for `u` and the observation operators.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::mittag_leffler::{boundedness_constant, ml_eval, MlParams};
use crate::quadrature::{integrate_with_breaks, QuadResult, Tolerance};
use crate::spectral::{least_squares_line, EigenSystem, Endpoint};
use crate::special::CompensatedSum;
use crate::temporal::TemporalSource;

/// Relative accuracy requested from each quadrature panel set.
pub const PSI_REL_TOL: f64 = 1e-11;
const MAX_PANELS: usize = 3000;

/// `ψ = steady + transient`. The split keeps the decaying part of `ψ` at
/// full relative precision when it is tiny next to the limit `μ_0/λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsiValue {
    pub steady: f64,
    pub transient: f64,
    pub abs_error: f64,
}

impl PsiValue {
    pub fn value(&self) -> f64 {
        self.steady + self.transient
    }
}

fn check_args(lambda: f64, alpha: f64, t: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(invalid("alpha", format!("must lie in (0, 2], got {alpha}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("must be positive, got {lambda}")));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid("t", format!("must be nonnegative, got {t}")));
    }
    Ok(())
}

fn ml_value(p: MlParams, x: f64) -> f64 {
    ml_eval(p, x).map_or(f64::NAN, |v| v.value)
}

/// The convolution integral evaluated by quadrature for the full `μ`.
///
/// The interval is split at `t/2`. Near `s = t` the substitution
/// `τ = (t-s)^α` turns the integrand into `E_{α,α}(-λτ) μ(t - τ^{1/α}) / α`,
/// which is free of the endpoint singularity; the remaining half is
/// integrated in `s` with geometric breakpoints.
pub fn psi_quadrature(lambda: f64, alpha: f64, src: &TemporalSource, t: f64) -> Result<QuadResult> {
    check_args(lambda, alpha, t)?;
    if t == 0.0 {
        return Ok(QuadResult {
            value: 0.0,
            abs_error: 0.0,
            evaluations: 0,
        });
    }
    let p = MlParams {
        alpha,
        beta: alpha,
    };
    let half = 0.5 * t;
    let scale = src.sup_norm() / lambda * (lambda * t.powf(alpha)).min(1.0);
    let tol = Tolerance {
        abs: 1e-15 * scale,
        rel: PSI_REL_TOL,
    };
    let kinks = src.kinks();

    let tau_max = half.powf(alpha);
    let near = |tau: f64| {
        let s = t - tau.powf(1.0 / alpha);
        ml_value(p, lambda * tau) * src.mu_eval(s.max(0.0)) / alpha
    };
    let mut near_breaks = vec![0.0, tau_max];
    for j in -3..=4 {
        near_breaks.push(10f64.powi(j) / lambda);
    }
    for &k in &kinks {
        if k > half && k < t {
            near_breaks.push((t - k).powf(alpha));
        }
    }
    let near_breaks = clean_breaks(near_breaks, 0.0, tau_max);

    let far = |s: f64| {
        let r = t - s;
        r.powf(alpha - 1.0) * ml_value(p, lambda * r.powf(alpha)) * src.mu_eval(s)
    };
    let mut far_breaks = vec![0.0, half];
    let mut b = 1e-3;
    while b < half {
        far_breaks.push(b);
        b *= 10.0;
    }
    far_breaks.extend(kinks.iter().copied().filter(|k| *k < half));
    let far_breaks = clean_breaks(far_breaks, 0.0, half);

    let a = integrate_with_breaks(near, &near_breaks, tol, MAX_PANELS)?;
    let b = integrate_with_breaks(far, &far_breaks, tol, MAX_PANELS)?;
    Ok(QuadResult {
        value: a.value + b.value,
        abs_error: a.abs_error + b.abs_error,
        evaluations: a.evaluations + b.evaluations,
    })
}

fn clean_breaks(mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    v.retain(|x| *x >= lo && *x <= hi && x.is_finite());
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * b.abs().max(f64::MIN_POSITIVE));
    v
}

/// `ψ_n(t)`: the constant limit `μ_0` is handled in closed form,
/// `μ_0 λ^{-1} (1 - E_{α,1}(-λ t^α))`, and only `μ - μ_0` goes through
/// quadrature.
pub fn psi_n(lambda: f64, alpha: f64, src: &TemporalSource, t: f64) -> Result<PsiValue> {
    check_args(lambda, alpha, t)?;
    let mu0 = src.mu_coeff(0);
    let (steady, mut transient, mut abs_error) = if mu0 != 0.0 {
        let e = ml_eval(
            MlParams {
                alpha,
                beta: 1.0,
            },
            lambda * t.powf(alpha),
        )?;
        (mu0 / lambda, -mu0 / lambda * e.value, (mu0 / lambda).abs() * e.error_bound)
    } else {
        (0.0, 0.0, 0.0)
    };
    let rest = src.without_limit();
    if !is_zero_source(&rest) {
        let q = psi_quadrature(lambda, alpha, &rest, t)?;
        transient += q.value;
        abs_error += q.abs_error;
    }
    Ok(PsiValue {
        steady,
        transient,
        abs_error,
    })
}

fn is_zero_source(src: &TemporalSource) -> bool {
    match src {
        TemporalSource::Constant { mu0 } => *mu0 == 0.0,
        TemporalSource::RationalTail { coeffs } => coeffs.iter().all(|c| *c == 0.0),
        TemporalSource::InverseLinear { amplitude, .. } => *amplitude == 0.0,
        TemporalSource::CompactSupport { pieces } => {
            pieces.iter().all(|p| p.coeffs.iter().all(|c| *c == 0.0))
        }
        TemporalSource::SubGaussian { c1, .. } => *c1 == 0.0,
        TemporalSource::DampedOscillation { amplitude, .. } => *amplitude == 0.0,
    }
}

/// `ψ` values keyed by the bit patterns of `(λ, t)`.
#[derive(Debug, Clone)]
pub struct PsiTable {
    pub alpha: f64,
    pub source: TemporalSource,
    values: HashMap<(u64, u64), PsiValue>,
}

impl PsiTable {
    pub fn new(alpha: f64, source: TemporalSource) -> Self {
        Self {
            alpha,
            source,
            values: HashMap::new(),
        }
    }

    /// Computes every missing `(λ, t)` pair, in parallel on the current
    /// rayon pool.
    pub fn fill(&mut self, lambdas: &[f64], times: &[f64]) -> Result<()> {
        let missing: Vec<(f64, f64)> = lambdas
            .iter()
            .flat_map(|&l| times.iter().map(move |&t| (l, t)))
            .filter(|(l, t)| !self.values.contains_key(&(l.to_bits(), t.to_bits())))
            .collect();
        let alpha = self.alpha;
        let src = &self.source;
        let computed: Vec<Result<PsiValue>> = missing
            .par_iter()
            .map(|&(l, t)| psi_n(l, alpha, src, t))
            .collect();
        for ((l, t), v) in missing.into_iter().zip(computed) {
            self.values.insert((l.to_bits(), t.to_bits()), v?);
        }
        Ok(())
    }

    pub fn get(&self, lambda: f64, t: f64) -> Option<PsiValue> {
        self.values.get(&(lambda.to_bits(), t.to_bits())).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ObservationKind {
    InteriorPoint { x0: f64 },
    BoundaryFlux { endpoint: Endpoint },
    /// Discrete `L²(ω)` norm over `ω = [a, b]`.
    SubdomainNorm { a: f64, b: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSpec {
    pub kind: ObservationKind,
    pub times: Vec<f64>,
}

impl ObservationSpec {
    pub fn new(kind: ObservationKind, times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(invalid("times", "at least one observation time is required"));
        }
        if times.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
            return Err(invalid("times", "observation times must be positive and finite"));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("times", "observation times must be strictly increasing"));
        }
        Ok(Self { kind, times })
    }

    fn check_location(&self, length: f64) -> Result<()> {
        match self.kind {
            ObservationKind::InteriorPoint { x0 } => {
                if !(x0 > 0.0 && x0 < length) {
                    return Err(invalid("location", format!("{x0} is not inside (0, {length})")));
                }
            }
            ObservationKind::SubdomainNorm { a, b } => {
                if !(a >= 0.0 && b <= length && b > a) {
                    return Err(invalid(
                        "location",
                        format!("[{a}, {b}] is not a subinterval of [0, {length}]"),
                    ));
                }
            }
            ObservationKind::BoundaryFlux { .. } => {}
        }
        Ok(())
    }
}

/// `n` points from `t_min` to `t_max` equally spaced in `log t`.
pub fn geometric_times(t_min: f64, t_max: f64, n: usize) -> Result<Vec<f64>> {
    if !(t_min > 0.0 && t_max > t_min) || n < 2 {
        return Err(invalid(
            "times",
            format!("need 0 < t_min < t_max and at least two points, got [{t_min}, {t_max}] with {n}"),
        ));
    }
    let (a, b) = (t_min.log10(), t_max.log10());
    let step = (b - a) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| 10f64.powf(a + step * i as f64)).collect();
    v[0] = t_min;
    v[n - 1] = t_max;
    Ok(v)
}

/// Observation values `baseline + transient`, one per time, and a bound on
/// the contribution of the discarded modes.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationTrace {
    pub spec: ObservationSpec,
    pub baseline: Vec<f64>,
    pub transient: Vec<f64>,
    pub tail_bound: Vec<f64>,
    pub modes_used: usize,
    pub warnings: Vec<String>,
}

impl ObservationTrace {
    pub fn values(&self) -> Vec<f64> {
        self.baseline.iter().zip(&self.transient).map(|(a, b)| a + b).collect()
    }

    pub fn times(&self) -> &[f64] {
        &self.spec.times
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Modes entering the series; coefficients beyond it only feed the tail
    /// bound.
    pub n_modes: usize,
    /// Warn when the tail bound exceeds this fraction of the largest value.
    pub tail_tolerance: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            n_modes: 64,
            tail_tolerance: 1e-6,
        }
    }
}

/// Per-mode weights of the observation functional, or the mode samples on
/// `ω` for the subdomain norm.
enum Functional {
    Weights(Vec<f64>),
    Subdomain { samples: Vec<Vec<f64>>, h: f64 },
}

fn functional(sys: &EigenSystem, kind: &ObservationKind, modes: usize) -> Functional {
    match *kind {
        ObservationKind::InteriorPoint { x0 } => {
            Functional::Weights((0..modes).map(|n| sys.mode_value(n, x0)).collect())
        }
        ObservationKind::BoundaryFlux { endpoint } => {
            let side = match endpoint {
                Endpoint::Left => 0,
                Endpoint::Right => 1,
            };
            Functional::Weights((0..modes).map(|n| sys.boundary_slopes[n][side]).collect())
        }
        ObservationKind::SubdomainNorm { a, b } => {
            let h = sys.spacing();
            let idx: Vec<usize> = (0..sys.grid.len())
                .filter(|&i| sys.grid[i] >= a - 1e-12 * h && sys.grid[i] <= b + 1e-12 * h)
                .collect();
            let samples = (0..modes)
                .map(|n| idx.iter().map(|&i| sys.modes[n][i]).collect())
                .collect();
            Functional::Subdomain { samples, h }
        }
    }
}

/// Evaluates the observation of `u = Σ_n a_n ψ_n(t) φ_n`.
pub fn solve(
    sys: &EigenSystem,
    coefficients: &[f64],
    src: &TemporalSource,
    alpha: f64,
    spec: &ObservationSpec,
    options: SolveOptions,
) -> Result<ObservationTrace> {
    let mut table = PsiTable::new(alpha, src.clone());
    solve_with_table(sys, coefficients, &mut table, spec, options)
}

pub fn solve_with_table(
    sys: &EigenSystem,
    coefficients: &[f64],
    table: &mut PsiTable,
    spec: &ObservationSpec,
    options: SolveOptions,
) -> Result<ObservationTrace> {
    src_check(&table.source)?;
    spec.check_location(sys.length)?;
    let available = coefficients.len().min(sys.n_modes());
    let modes = options.n_modes.min(available);
    if modes == 0 {
        return Err(invalid("n_modes", "at least one mode is required"));
    }
    let alpha = table.alpha;
    let lambdas = &sys.lambdas[..modes];
    table.fill(lambdas, &spec.times)?;

    let func = functional(sys, &spec.kind, available);
    let nt = spec.times.len();
    let mut baseline = vec![0.0; nt];
    let mut transient = vec![0.0; nt];
    match &func {
        Functional::Weights(w) => {
            for (i, &t) in spec.times.iter().enumerate() {
                let mut steady = CompensatedSum::new();
                let mut moving = CompensatedSum::new();
                for n in 0..modes {
                    let psi = table.get(lambdas[n], t).expect("filled");
                    steady.add(coefficients[n] * w[n] * psi.steady);
                    moving.add(coefficients[n] * w[n] * psi.transient);
                }
                baseline[i] = steady.value();
                transient[i] = moving.value();
            }
        }
        Functional::Subdomain { samples, h } => {
            let points = samples.first().map_or(0, |s| s.len());
            for (i, &t) in spec.times.iter().enumerate() {
                let mut norm2 = CompensatedSum::new();
                for p in 0..points {
                    let mut u = CompensatedSum::new();
                    for n in 0..modes {
                        let psi = table.get(lambdas[n], t).expect("filled");
                        u.add(coefficients[n] * samples[n][p] * psi.value());
                    }
                    let u = u.value();
                    norm2.add(h * u * u);
                }
                transient[i] = norm2.value().sqrt();
            }
        }
    }

    // tail: ‖μ‖ C_E log(1 + λ t^α) / (α λ) per discarded mode
    let mut tail_bound = vec![0.0; nt];
    let mut warnings = Vec::new();
    if available > modes {
        let ce = boundedness_constant(
            MlParams {
                alpha,
                beta: alpha,
            },
            1e8,
            10,
        )?;
        let norm = table.source.sup_norm();
        for (i, &t) in spec.times.iter().enumerate() {
            let mut sum = CompensatedSum::new();
            for n in modes..available {
                let weight = match &func {
                    Functional::Weights(w) => w[n].abs(),
                    Functional::Subdomain { samples, h } => {
                        (h * samples[n].iter().map(|v| v * v).sum::<f64>()).sqrt()
                    }
                };
                let l = sys.lambdas[n];
                sum.add(coefficients[n].abs() * weight * (1.0 + l * t.powf(alpha)).ln() / (alpha * l));
            }
            tail_bound[i] = norm * ce * sum.value();
        }
    } else {
        warnings.push(format!(
            "no coefficients beyond mode {modes}; the truncation tail is not estimated"
        ));
    }
    let peak = baseline
        .iter()
        .zip(&transient)
        .map(|(a, b)| (a + b).abs())
        .fold(0.0, f64::max);
    let worst_tail = tail_bound.iter().copied().fold(0.0, f64::max);
    if worst_tail > options.tail_tolerance * peak {
        warnings.push(format!(
            "truncation tail bound {worst_tail:.3e} exceeds {:.1e} of the peak observation {peak:.3e}",
            options.tail_tolerance
        ));
    }
    Ok(ObservationTrace {
        spec: spec.clone(),
        baseline,
        transient,
        tail_bound,
        modes_used: modes,
        warnings,
    })
}

fn src_check(src: &TemporalSource) -> Result<()> {
    src.validate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayProbe {
    pub decaying: bool,
    pub slope: f64,
    pub slope_stderr: f64,
    /// Sign changes of the values inside the fit window.
    pub sign_changes: usize,
}

/// Fits `log|v|` against `log t` over the last decade of the trace.
pub fn decay_probe(times: &[f64], values: &[f64], order: f64) -> Result<DecayProbe> {
    if times.len() != values.len() {
        return Err(invalid("values", "one value per time is required"));
    }
    if times.len() < 12 {
        return Err(Error::InsufficientData(format!(
            "decay probe needs at least 12 points, got {}",
            times.len()
        )));
    }
    let t_first = times[0];
    let t_last = *times.last().unwrap();
    if !(t_first > 0.0) || t_last / t_first < 1e3 * (1.0 - 1e-12) {
        return Err(Error::InsufficientData(format!(
            "decay probe needs three decades of time, got [{t_first}, {t_last}]"
        )));
    }
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_last / 10.0 * (1.0 - 1e-12))
        .map(|(t, v)| (*t, *v))
        .collect();
    let sign_changes = window
        .windows(2)
        .filter(|w| w[0].1 != 0.0 && w[1].1 != 0.0 && w[0].1.signum() != w[1].1.signum())
        .count();
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|(t, v)| (t.ln(), v.abs().ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(
            "fewer than three nonzero values in the last decade".into(),
        ));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let rss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let slope_stderr = if n > 2.0 {
        (rss / (n - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(DecayProbe {
        decaying: slope <= -order + 2.0 * slope_stderr,
        slope,
        slope_stderr,
        sign_changes,
    })
}
