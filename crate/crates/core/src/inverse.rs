//! Recovery of source components from long-time observation tails.
//!
//! Observation tails are fitted against the term structure of the
//! expansion of `Σ a_n ψ_n(t)`. The fitted coefficients are products of
//! spectral moments `A_γ` and temporal factors; knowing one side recovers
//! the other.

use nalgebra::DMatrix;
use serde::Serialize;
use twofloat::TwoFloat;

use crate::asymptotic::{
    decay_factor, limit_factor, lk_sequence, moment, AsymptoticSeries, FractionalOrder, SpectralMoments,
};
use crate::error::{invalid, Error, Result};
use crate::temporal::{c_mu, TemporalSource};

pub const DEFAULT_CONDITION_THRESHOLD: f64 = 1e12;
pub const DEFAULT_MAX_MODES: usize = 8;
/// Deepest basis tried by [`fit_tail_auto`].
pub const MAX_FIT_DEPTH: usize = 16;

/// Which terms the source can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceStructure {
    /// `μ ≡ μ_0`: constant and `t^{-l_k α}` terms.
    Constant,
    /// All `μ_j` vanish: `t^{-l_k α - j}` moment terms.
    Compact,
    /// Some `μ_j`, `j >= 1`, nonzero: moment terms, their `log t` partners
    /// and the placeholder powers `t^{-j-m}`.
    DecayingTail,
    /// Everything above.
    General,
}

impl SourceStructure {
    pub fn of(src: &TemporalSource) -> Self {
        match (src.mu_coeff(0) != 0.0, src.has_decaying_tail()) {
            (_, true) => {
                if src.mu_coeff(0) != 0.0 {
                    SourceStructure::General
                } else {
                    SourceStructure::DecayingTail
                }
            }
            (true, false) => {
                if matches!(src, TemporalSource::Constant { .. }) {
                    SourceStructure::Constant
                } else {
                    SourceStructure::General
                }
            }
            (false, false) => SourceStructure::Compact,
        }
    }

    fn limit(self) -> bool {
        matches!(self, SourceStructure::Constant | SourceStructure::General)
    }

    fn moments(self) -> bool {
        !matches!(self, SourceStructure::Constant)
    }

    fn tail(self) -> bool {
        matches!(self, SourceStructure::DecayingTail | SourceStructure::General)
    }
}

/// Index pair a basis function comes from. `k` counts the `l_k` sequence
/// from 1; `j = 0` marks the `μ_0` terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Origin {
    Constant,
    Decay { k: usize, l: u64, j: u64 },
    Placeholder { j: u64, m: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasisTerm {
    pub t_power: f64,
    pub has_log: bool,
    pub origins: Vec<Origin>,
}

impl BasisTerm {
    pub fn eval(&self, t: f64) -> f64 {
        let v = t.powf(self.t_power);
        if self.has_log {
            v * t.ln()
        } else {
            v
        }
    }

    fn single(&self) -> Option<Origin> {
        match self.origins.as_slice() {
            [o] => Some(*o),
            _ => None,
        }
    }
}

/// Basis `{1, t^{-l_kα}, t^{-l_kα-j}, t^{-l_kα-j} log t, t^{-j-m}}` for the
/// given structure, with coinciding exponents collected.
pub fn tail_basis(
    alpha: &FractionalOrder,
    structure: SourceStructure,
    k_terms: usize,
    j_terms: usize,
    m_terms: usize,
) -> Vec<BasisTerm> {
    let ls = lk_sequence(alpha, k_terms);
    let mut raw: Vec<(f64, bool, Origin)> = Vec::new();
    if structure.limit() {
        raw.push((0.0, false, Origin::Constant));
        for (i, &l) in ls.iter().enumerate() {
            raw.push((alpha.t_exponent(l, 0), false, Origin::Decay { k: i + 1, l, j: 0 }));
        }
    }
    if structure.moments() {
        for j in 1..=j_terms as u64 {
            for (i, &l) in ls.iter().enumerate() {
                let origin = Origin::Decay { k: i + 1, l, j };
                raw.push((alpha.t_exponent(l, j), false, origin));
                if structure.tail() {
                    raw.push((alpha.t_exponent(l, j), true, origin));
                }
            }
        }
    }
    if structure.tail() {
        for j in 1..=j_terms as u64 {
            for m in 0..=m_terms as u64 {
                raw.push((-((j + m) as f64), false, Origin::Placeholder { j, m }));
            }
        }
    }
    raw.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| b.1.cmp(&a.1)));
    let mut basis: Vec<BasisTerm> = Vec::new();
    for (p, log, origin) in raw {
        match basis.last_mut() {
            Some(last) if last.t_power == p && last.has_log == log => last.origins.push(origin),
            _ => basis.push(BasisTerm {
                t_power: p,
                has_log: log,
                origins: vec![origin],
            }),
        }
    }
    basis
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub condition_threshold: f64,
    pub min_decades: f64,
    pub min_points_per_decade: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            condition_threshold: DEFAULT_CONDITION_THRESHOLD,
            min_decades: 3.0,
            min_points_per_decade: 8.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailFit {
    pub basis: Vec<BasisTerm>,
    pub coefficients: Vec<f64>,
    /// Root-mean-square of the relative residual.
    pub residual_norm: f64,
    /// Condition number of the column-scaled weighted design matrix.
    pub condition: f64,
    pub trusted: bool,
}

impl TailFit {
    pub fn value(&self, t: f64) -> f64 {
        self.basis.iter().zip(&self.coefficients).map(|(b, c)| c * b.eval(t)).sum()
    }

    /// Coefficient of the basis function with the given exponent.
    pub fn coefficient(&self, t_power: f64, has_log: bool) -> Option<f64> {
        self.basis
            .iter()
            .position(|b| (b.t_power - t_power).abs() <= 1e-12 * t_power.abs().max(1.0) && b.has_log == has_log)
            .map(|i| self.coefficients[i])
    }
}

/// Relative-weighted least squares of `values` on the basis.
pub fn fit_tail(times: &[f64], values: &[f64], basis: &[BasisTerm], opts: FitOptions) -> Result<TailFit> {
    if times.len() != values.len() {
        return Err(Error::InsufficientData(format!(
            "{} times for {} values",
            times.len(),
            values.len()
        )));
    }
    if basis.is_empty() {
        return Err(invalid("basis", "is empty"));
    }
    if let Some(t) = times.iter().find(|t| !(**t > 0.0 && t.is_finite())) {
        return Err(invalid("times", format!("must be positive, got {t}")));
    }
    let (lo, hi) = times
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &t| (a.min(t), b.max(t)));
    let decades = (hi / lo).log10();
    if decades < opts.min_decades - 1e-9 {
        return Err(Error::InsufficientData(format!(
            "trace spans {decades:.2} decades, at least {} required",
            opts.min_decades
        )));
    }
    if (times.len() as f64) < opts.min_points_per_decade * decades {
        return Err(Error::InsufficientData(format!(
            "{} samples over {decades:.2} decades, at least {} per decade required",
            times.len(),
            opts.min_points_per_decade
        )));
    }
    if times.len() < basis.len() {
        return Err(Error::InsufficientData(format!(
            "{} samples for {} basis functions",
            times.len(),
            basis.len()
        )));
    }

    let weights: Vec<f64> = values.iter().map(|v| if *v != 0.0 { 1.0 / v.abs() } else { 1.0 }).collect();
    let rows: Vec<Vec<f64>> = times
        .iter()
        .zip(&weights)
        .map(|(&t, w)| basis.iter().map(|b| w * b.eval(t)).collect())
        .collect();
    let rhs: Vec<f64> = values.iter().zip(&weights).map(|(v, w)| v * w).collect();
    let scales = column_scales(&rows, basis.len());
    let scaled: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&scales).map(|(a, s)| a * s).collect())
        .collect();
    let condition = condition_number(&scaled);
    let y = householder_lsq(&scaled, &rhs)?;
    let coefficients: Vec<f64> = y.iter().zip(&scales).map(|(y, s)| y * s).collect();

    let mut sum2 = 0.0;
    for (row, r) in rows.iter().zip(&rhs) {
        let fitted: f64 = row.iter().zip(&coefficients).map(|(a, c)| a * c).sum();
        sum2 += (fitted - r) * (fitted - r);
    }
    Ok(TailFit {
        basis: basis.to_vec(),
        coefficients,
        residual_norm: (sum2 / times.len() as f64).sqrt(),
        condition,
        trusted: condition <= opts.condition_threshold,
    })
}

/// Depth `d` of an automatically sized basis: `K = J = d`, `M = d - 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AutoFit {
    pub fit: TailFit,
    pub k_terms: usize,
    pub j_terms: usize,
    pub m_terms: usize,
    /// `(depth, residual_norm, condition)` for every depth tried.
    pub scanned: Vec<(usize, f64, f64)>,
}

/// Fits with increasing depth while the design stays within the condition
/// threshold, then keeps the shallowest depth whose residual is within a
/// factor 2 of the best one.
pub fn fit_tail_auto(
    times: &[f64],
    values: &[f64],
    alpha: &FractionalOrder,
    structure: SourceStructure,
    opts: FitOptions,
) -> Result<AutoFit> {
    let dims = |d: usize| match structure {
        SourceStructure::Constant => (d, 0, 0),
        SourceStructure::Compact => (d, d, 0),
        _ => (d, d, d - 1),
    };
    let mut fits: Vec<(usize, TailFit)> = Vec::new();
    let mut scanned = Vec::new();
    for d in 1..=MAX_FIT_DEPTH {
        let (k, j, m) = dims(d);
        let basis = tail_basis(alpha, structure, k, j, m);
        if 2 * basis.len() > times.len() {
            break;
        }
        let fit = fit_tail(times, values, &basis, opts)?;
        scanned.push((d, fit.residual_norm, fit.condition));
        if !fit.trusted {
            break;
        }
        fits.push((d, fit));
    }
    let best = fits
        .iter()
        .map(|(_, f)| f.residual_norm)
        .fold(f64::INFINITY, f64::min);
    let Some((d, fit)) = fits.into_iter().find(|(_, f)| f.residual_norm <= 2.0 * best) else {
        return Err(Error::IllConditioned {
            condition: scanned.first().map_or(f64::INFINITY, |s| s.2),
            threshold: opts.condition_threshold,
        });
    };
    let (k_terms, j_terms, m_terms) = dims(d);
    Ok(AutoFit {
        fit,
        k_terms,
        j_terms,
        m_terms,
        scanned,
    })
}

/// Powers of two bringing each column to unit Euclidean norm.
fn column_scales(rows: &[Vec<f64>], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let norm = rows.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
            if norm > 0.0 && norm.is_finite() {
                2f64.powi(-norm.log2().round() as i32)
            } else {
                1.0
            }
        })
        .collect()
}

fn condition_number(rows: &[Vec<f64>]) -> f64 {
    let m = rows.len();
    let n = rows.first().map_or(0, |r| r.len());
    let a = DMatrix::from_fn(m, n, |i, j| rows[i][j]);
    let sv = a.singular_values();
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min > 0.0 {
        max / min
    } else {
        f64::INFINITY
    }
}

/// Least squares by Householder QR carried out in double-double arithmetic.
fn householder_lsq(rows: &[Vec<f64>], rhs: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let n = rows[0].len();
    let mut a: Vec<Vec<TwoFloat>> = rows
        .iter()
        .map(|r| r.iter().map(|&v| TwoFloat::from(v)).collect())
        .collect();
    let mut b: Vec<TwoFloat> = rhs.iter().map(|&v| TwoFloat::from(v)).collect();
    let zero = TwoFloat::from(0.0);
    for j in 0..n {
        let mut norm2 = zero;
        for row in a.iter().skip(j) {
            norm2 += row[j] * row[j];
        }
        if norm2.hi() == 0.0 {
            continue;
        }
        let norm = norm2.sqrt();
        let alpha = if a[j][j].hi() > 0.0 { -norm } else { norm };
        let mut v: Vec<TwoFloat> = (j..m).map(|i| a[i][j]).collect();
        v[0] -= alpha;
        let mut vnorm2 = zero;
        for x in &v {
            vnorm2 += *x * *x;
        }
        if vnorm2.hi() == 0.0 {
            continue;
        }
        for c in j..n {
            let mut s = zero;
            for (i, x) in v.iter().enumerate() {
                s += *x * a[j + i][c];
            }
            let f = s * 2.0 / vnorm2;
            for (i, x) in v.iter().enumerate() {
                a[j + i][c] -= f * *x;
            }
        }
        let mut s = zero;
        for (i, x) in v.iter().enumerate() {
            s += *x * b[j + i];
        }
        let f = s * 2.0 / vnorm2;
        for (i, x) in v.iter().enumerate() {
            b[j + i] -= f * *x;
        }
    }
    let mut x = vec![zero; n];
    for j in (0..n).rev() {
        let mut s = b[j];
        for c in j + 1..n {
            s -= a[j][c] * x[c];
        }
        if a[j][j].hi() == 0.0 {
            return Err(Error::IllConditioned {
                condition: f64::INFINITY,
                threshold: DEFAULT_CONDITION_THRESHOLD,
            });
        }
        x[j] = s / a[j][j];
    }
    Ok(x.iter().map(|v| v.hi() + v.lo()).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecoveryOptions {
    pub max_modes: usize,
    /// Above this estimate the trailing modes are dropped.
    pub condition_threshold: f64,
}

impl Default for RecoveryOptions {
    fn default() -> Self {
        Self {
            max_modes: DEFAULT_MAX_MODES,
            condition_threshold: 1e14,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpatialRecovery {
    /// Recovered `a_n` for the leading modes.
    pub coefficients: Vec<f64>,
    pub condition: f64,
    pub partial: bool,
    pub requested_modes: usize,
}

/// Solves `Σ_n a_n λ_n^{-γ_k-1} = A_{γ_k}` for the leading `a_n`.
pub fn recover_spatial(
    moments: &[f64],
    gammas: &[f64],
    lambdas: &[f64],
    opts: RecoveryOptions,
) -> Result<SpatialRecovery> {
    if moments.len() != gammas.len() {
        return Err(invalid("moments", format!("{} values for {} exponents", moments.len(), gammas.len())));
    }
    let requested = lambdas.len();
    if requested == 0 {
        return Err(invalid("lambdas", "at least one eigenvalue is required"));
    }
    if moments.len() < requested {
        return Err(Error::InsufficientData(format!(
            "{} moments for {} unknown coefficients",
            moments.len(),
            requested
        )));
    }
    for w in lambdas.windows(2) {
        if !(w[1] > w[0]) {
            return Err(invalid("lambdas", "must be distinct and increasing"));
        }
    }
    if let Some(l) = lambdas.iter().find(|l| !(**l > 0.0)) {
        return Err(invalid("lambdas", format!("must be positive, got {l}")));
    }
    let mut n = requested.min(opts.max_modes);
    loop {
        let (rows, rhs, scales) = vandermonde(moments, gammas, &lambdas[..n]);
        let condition = condition_number(&rows);
        if condition <= opts.condition_threshold || n == 1 {
            if condition > opts.condition_threshold {
                return Err(Error::IllConditioned {
                    condition,
                    threshold: opts.condition_threshold,
                });
            }
            let y = householder_lsq(&rows, &rhs)?;
            let coefficients = y.iter().zip(&scales).map(|(y, s)| y * s).collect();
            return Ok(SpatialRecovery {
                coefficients,
                condition,
                partial: n < requested,
                requested_modes: requested,
            });
        }
        n -= 1;
    }
}

/// Rows `λ_n^{-γ_k-1}` scaled by powers of two; returns the column scales.
fn vandermonde(moments: &[f64], gammas: &[f64], lambdas: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (&a, &g) in moments.iter().zip(gammas) {
        let row: Vec<f64> = lambdas.iter().map(|l| l.powf(-g - 1.0)).collect();
        let peak = row.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let s = 2f64.powi(-peak.log2().round() as i32);
        rows.push(row.iter().map(|v| v * s).collect());
        rhs.push(a * s);
    }
    let scales = column_scales(&rows, lambdas.len());
    let rows = rows
        .iter()
        .map(|r| r.iter().zip(&scales).map(|(a, s)| a * s).collect())
        .collect();
    (rows, rhs, scales)
}

/// A recovered number with the spread of the individual estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub spread: f64,
    pub samples: usize,
}

impl Estimate {
    fn from_samples(samples: &[f64]) -> Option<Self> {
        let first = *samples.first()?;
        let spread = samples.iter().map(|s| (s - first).abs()).fold(0.0, f64::max);
        Some(Self {
            value: first,
            spread,
            samples: samples.len(),
        })
    }
}

/// `c_{μ,j-1}` estimate. When the source has a decaying tail, the fitted
/// constant also contains the unspecified `b×` part and only its range over
/// the `l_k` is reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MomentEstimate {
    Exact(Estimate),
    Unresolved { low: f64, high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TemporalRecovery {
    pub mu0: Option<Estimate>,
    /// `μ_j` for `j = 1..`, `None` where no usable term was fitted.
    pub mu: Vec<Option<Estimate>>,
    /// `c_{μ,j-1}` for `j = 1..`.
    pub c_mu: Vec<Option<MomentEstimate>>,
}

/// Observation weights `a_n φ_n(x0)` at or below this magnitude are taken
/// as nodal zeros.
pub const NODAL_WEIGHT_FLOOR: f64 = 1e-12;

/// Divides fitted coefficients by the known spectral moments and the
/// explicit factors. Each estimate is taken from the leading usable `l_k`;
/// the spread is over the remaining ones.
pub fn recover_temporal(
    fit: &TailFit,
    weights: &[f64],
    lambdas: &[f64],
    alpha: &FractionalOrder,
    structure: SourceStructure,
) -> Result<TemporalRecovery> {
    if weights.len() != lambdas.len() || weights.is_empty() {
        return Err(invalid("weights", format!("{} weights for {} eigenvalues", weights.len(), lambdas.len())));
    }
    let weights: Vec<f64> = weights
        .iter()
        .map(|&w| if w.abs() <= NODAL_WEIGHT_FLOOR { 0.0 } else { w })
        .collect();
    let usable = |gamma: f64| -> Option<f64> {
        let a = moment(&weights, lambdas, gamma);
        let scale: f64 = weights.iter().zip(lambdas).map(|(w, l)| (w * l.powf(-gamma - 1.0)).abs()).sum();
        (a.abs() > 1e-10 * scale && scale > 0.0).then_some(a)
    };

    let j_max = fit
        .basis
        .iter()
        .flat_map(|b| b.origins.iter())
        .filter_map(|o| match o {
            Origin::Decay { j, .. } => Some(*j as usize),
            _ => None,
        })
        .max()
        .unwrap_or(0);
    let mut mu0 = Vec::new();
    let mut mu: Vec<Vec<f64>> = vec![Vec::new(); j_max];
    let mut cm: Vec<Vec<f64>> = vec![Vec::new(); j_max];
    let mut any_usable = false;
    for (b, &c) in fit.basis.iter().zip(&fit.coefficients) {
        let Some(origin) = b.single() else { continue };
        match origin {
            Origin::Constant => {
                if let Some(a0) = usable(0.0) {
                    any_usable = true;
                    mu0.push(c / a0);
                }
            }
            Origin::Decay { l, j: 0, .. } => {
                if let Some(a) = usable(l as f64) {
                    any_usable = true;
                    mu0.push(c / (limit_factor(alpha, l) * a));
                }
            }
            Origin::Decay { l, j, .. } => {
                if let Some(a) = usable(l as f64) {
                    any_usable = true;
                    let v = c / (decay_factor(alpha, l, j) * a);
                    if b.has_log {
                        mu[j as usize - 1].push(v);
                    } else {
                        cm[j as usize - 1].push(v);
                    }
                }
            }
            Origin::Placeholder { .. } => {}
        }
    }
    if !any_usable {
        return Err(Error::BlindSpot(
            "every spectral moment A_γ of the observed weights vanishes".into(),
        ));
    }
    let c_mu = cm
        .iter()
        .map(|samples| {
            if structure.tail() {
                let low = samples.iter().copied().fold(f64::INFINITY, f64::min);
                let high = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (!samples.is_empty()).then_some(MomentEstimate::Unresolved { low, high })
            } else {
                Estimate::from_samples(samples).map(MomentEstimate::Exact)
            }
        })
        .collect();
    Ok(TemporalRecovery {
        mu0: Estimate::from_samples(&mu0),
        mu: mu.iter().map(|s| Estimate::from_samples(s)).collect(),
        c_mu,
    })
}

/// Temporal factor multiplying the spectral moment in a fitted coefficient,
/// when it is fully explicit.
fn temporal_factor(
    alpha: &FractionalOrder,
    src: &TemporalSource,
    origin: Origin,
    has_log: bool,
) -> Result<Option<f64>> {
    Ok(match origin {
        Origin::Constant => Some(src.mu_coeff(0)),
        Origin::Decay { l, j: 0, .. } => Some(limit_factor(alpha, l) * src.mu_coeff(0)),
        Origin::Decay { l, j, .. } => {
            if has_log {
                Some(decay_factor(alpha, l, j) * src.mu_coeff(j as usize))
            } else if src.has_decaying_tail() {
                None
            } else {
                Some(decay_factor(alpha, l, j) * c_mu(src, j as usize - 1)?.value)
            }
        }
        Origin::Placeholder { .. } => None,
    })
}

/// Spectral moments read off a fit with a known temporal source, one per
/// distinct `γ`, each from its slowest-decaying explicit term. Sorted by `γ`.
pub fn moments_from_fit(fit: &TailFit, alpha: &FractionalOrder, src: &TemporalSource) -> Result<SpectralMoments> {
    let mut found: Vec<(f64, f64)> = Vec::new();
    for (b, &c) in fit.basis.iter().zip(&fit.coefficients) {
        let Some(origin) = b.single() else { continue };
        let gamma = match origin {
            Origin::Constant => 0.0,
            Origin::Decay { l, .. } => l as f64,
            Origin::Placeholder { .. } => continue,
        };
        if found.iter().any(|(g, _)| *g == gamma) {
            continue;
        }
        if let Some(f) = temporal_factor(alpha, src, origin, b.has_log)? {
            if f != 0.0 {
                found.push((gamma, c / f));
            }
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(SpectralMoments {
        gammas: found.iter().map(|f| f.0).collect(),
        values: found.iter().map(|f| f.1).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Proportional,
    NotProportional,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Proportional => "proportional",
            Verdict::NotProportional => "not proportional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaOptions {
    /// Leading matched coefficients used.
    pub max_terms: usize,
    /// Relative spread above which the pair is declared not proportional.
    pub spread_threshold: f64,
}

impl Default for KappaOptions {
    fn default() -> Self {
        Self {
            max_terms: 3,
            spread_threshold: 1e-2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KappaEstimate {
    pub kappa: f64,
    /// Largest relative deviation of a single ratio from the mean.
    pub spread: f64,
    /// `(t_power, has_log, ratio)` per matched coefficient.
    pub ratios: Vec<(f64, bool, f64)>,
    pub verdict: Verdict,
}

/// Estimates `κ` with `a_n = κ ã_n`, `μ̃ = κ μ` from two tail fits on a
/// common basis. Each matched explicit coefficient, divided by its temporal
/// factor, gives a spectral moment; the ratio of the two moments is one
/// estimate of `κ`.
pub fn estimate_kappa(
    fit: &TailFit,
    fit_tilde: &TailFit,
    alpha: &FractionalOrder,
    src: &TemporalSource,
    src_tilde: &TemporalSource,
    opts: KappaOptions,
) -> Result<KappaEstimate> {
    if alpha.is_rational() {
        return Err(invalid(
            "alpha",
            "proportionality recovery needs an irrational-presumed order",
        ));
    }
    if fit.basis != fit_tilde.basis {
        return Err(invalid("basis", "the two fits use different bases"));
    }
    let mut ratios = Vec::new();
    for (i, b) in fit.basis.iter().enumerate() {
        if ratios.len() >= opts.max_terms {
            break;
        }
        let Some(origin) = b.single() else { continue };
        let (Some(f), Some(ft)) = (
            temporal_factor(alpha, src, origin, b.has_log)?,
            temporal_factor(alpha, src_tilde, origin, b.has_log)?,
        ) else {
            continue;
        };
        let (c, ct) = (fit.coefficients[i], fit_tilde.coefficients[i]);
        if f == 0.0 || ft == 0.0 || c == 0.0 || ct == 0.0 {
            continue;
        }
        ratios.push((b.t_power, b.has_log, (c / f) / (ct / ft)));
    }
    if ratios.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} matched explicit coefficients, at least 2 required",
            ratios.len()
        )));
    }
    let kappa = ratios.iter().map(|r| r.2).sum::<f64>() / ratios.len() as f64;
    let spread = ratios
        .iter()
        .map(|r| (r.2 - kappa).abs() / kappa.abs())
        .fold(0.0, f64::max);
    let verdict = if spread.is_finite() && spread <= opts.spread_threshold {
        Verdict::Proportional
    } else {
        Verdict::NotProportional
    };
    Ok(KappaEstimate {
        kappa,
        spread,
        ratios,
        verdict,
    })
}

/// Ten times the time after which the first dropped term stays below 1% of
/// the smallest retained decaying term.
pub fn fit_window_start(series: &AsymptoticSeries, retained: usize) -> Option<f64> {
    let active: Vec<_> = series
        .terms
        .iter()
        .filter(|t| t.t_power < 0.0 && t.coeff != 0.0)
        .collect();
    if retained == 0 || active.len() <= retained {
        return None;
    }
    let dropped = active[retained];
    let kept = active[retained - 1];
    // |c_d| t^{p_d} (log t)^{ε_d} <= 0.01 |c_k| t^{p_k} (log t)^{ε_k}, scanned on a
    // fine geometric grid
    let ratio = |t: f64| (dropped.eval(t) / kept.eval(t)).abs();
    let mut t: f64 = 1.0;
    while t < 1e30 {
        if ratio(t) <= 0.01 && ratio(t * 10.0) <= 0.01 {
            return Some(10.0 * t);
        }
        t *= 10f64.powf(0.05);
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn householder_solves_square_system() {
        let rows = vec![vec![2.0, 1.0], vec![1.0, 3.0]];
        let x = householder_lsq(&rows, &[3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-15 && (x[1] - 1.4).abs() < 1e-15);
    }

    #[test]
    fn collisions_merge_origins() {
        let a = FractionalOrder::new(0.5).unwrap();
        let b = tail_basis(&a, SourceStructure::General, 3, 2, 1);
        let at = b.iter().find(|t| t.t_power == -1.5 && !t.has_log).unwrap();
        assert_eq!(at.origins.len(), 2);
        for w in b.windows(2) {
            assert!(!(w[0].t_power == w[1].t_power && w[0].has_log == w[1].has_log));
        }
    }
}
