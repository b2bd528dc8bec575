//! The experiment tasks. Each one fills the run's artifacts and manifest
//! and returns its report.

use std::path::Path;

use fracsource_core::asymptotic::{
    compare_trace, expansion_sum_truncated, AsymptoticSeries, FractionalOrder, Rationality, Truncation,
    DEFAULT_DETECTION_BOUND,
};
use fracsource_core::forward::{solve, ObservationKind, ObservationSpec, ObservationTrace, SolveOptions, PSI_REL_TOL};
use fracsource_core::inverse::{
    estimate_kappa, fit_tail, fit_tail_auto, fit_window_start, moments_from_fit, recover_spatial, recover_temporal,
    AutoFit, FitOptions, KappaOptions, MomentEstimate, RecoveryOptions, SourceStructure, Verdict, MAX_FIT_DEPTH,
    NODAL_WEIGHT_FLOOR,
};
use fracsource_core::mittag_leffler::{ml_asymptotic, ml_eval, MlParams, WORKING_TOL};
use fracsource_core::spectral::{blind_spots, weyl_check, EigenSystem, Endpoint};
use fracsource_core::temporal::{c_mu, TemporalSource};
use fracsource_core::Error as CoreError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::config::{coefficients, linear_grid, ExperimentConfig, NoiseConfig, Spacing, Task, DEFAULT_RECOVERED_MODES};
use crate::error::CliError;
use crate::output::{num, Artifacts, Manifest};

pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_BLIND_SPOT_TOLERANCE: f64 = 1e-10;
/// Relative slope agreement reported by `expand`.
pub const SLOPE_TOLERANCE: f64 = 0.1;
const DEFAULT_EXPAND_TERMS: usize = 1;

/// Command-line overrides.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub modes: Option<usize>,
    pub tolerance: Option<f64>,
}

pub struct Run {
    pub artifacts: Artifacts,
    pub manifest: Manifest,
}

impl Run {
    pub fn new(prefix: impl Into<String>) -> Self {
        Self {
            artifacts: Artifacts::new(prefix),
            manifest: Manifest::default(),
        }
    }

    /// Adds the manifest to the artifacts.
    pub fn finish(&mut self) {
        let m = self.manifest.value();
        self.artifacts.json("manifest.json", &m);
    }
}

pub fn run_task(task: Task, cfg: &ExperimentConfig, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    run.manifest.set("task", task.as_str());
    run.manifest.set("alpha", cfg.alpha);
    let order = cfg.order()?;
    run.manifest.set(
        "alpha_class",
        match order.rationality {
            Rationality::Rational { p, q } => format!("rational {p}/{q}"),
            Rationality::IrrationalPresumed => "irrational-presumed".to_string(),
        },
    );
    run.manifest.set("rationality_denominator_bound", DEFAULT_DETECTION_BOUND);
    match task {
        Task::Forward => forward(cfg, ov, run),
        Task::Expand => expand(cfg, &order, ov, run),
        Task::InvertX => invert_x(cfg, &order, ov, run),
        Task::InvertT => invert_t(cfg, &order, ov, run),
        Task::Kappa => kappa(cfg, &order, ov, run),
        Task::Ml => ml(cfg, run),
        Task::Eigen => eigen(cfg, ov, run),
        Task::Demo => Err(CliError::config("task", "demo takes a demo name, not a config")),
    }
}

fn system(cfg: &ExperimentConfig, run: &mut Run) -> Result<EigenSystem, CliError> {
    system_of(cfg, cfg.basis_modes(), run)
}

fn system_of(cfg: &ExperimentConfig, basis: usize, run: &mut Run) -> Result<EigenSystem, CliError> {
    let sys = cfg.eigensystem_of(basis)?;
    run.manifest.set("basis_modes", basis);
    run.manifest.set(
        "operator",
        json!({
            "kind": cfg.operator.kind,
            "L": cfg.length(),
            "n_modes": cfg.n_modes(),
            "grid_size": cfg.grid_size(),
            "a": cfg.operator.a,
            "q": cfg.operator.q,
        }),
    );
    Ok(sys)
}

fn observation(cfg: &ExperimentConfig, run: &mut Run) -> Result<ObservationSpec, CliError> {
    let (o, spec) = cfg.observation()?;
    let (t_min, t_max, points) = cfg.time_range(o);
    run.manifest.set(
        "observation",
        json!({
            "kind": o.kind,
            "location": o.location,
            "t_min": t_min,
            "t_max": t_max,
            "points": points,
            "spacing": o.spacing.unwrap_or_default(),
        }),
    );
    Ok(spec)
}

fn series_modes(cfg: &ExperimentConfig, ov: Overrides, sys: &EigenSystem, run: &mut Run) -> usize {
    let n = ov.modes.unwrap_or(cfg.n_modes()).min(sys.n_modes());
    run.manifest.set("series_modes", n);
    n
}

fn solve_options(n_modes: usize, ov: Overrides, run: &mut Run) -> SolveOptions {
    let tail_tolerance = ov.tolerance.unwrap_or(DEFAULT_TAIL_TOLERANCE);
    run.manifest.set("tail_tolerance", tail_tolerance);
    run.manifest.set("psi_relative_tolerance", PSI_REL_TOL);
    run.manifest.set("ml_working_tolerance", WORKING_TOL);
    SolveOptions {
        n_modes,
        tail_tolerance,
    }
}

fn forward_trace(
    sys: &EigenSystem,
    a: &[f64],
    src: &TemporalSource,
    alpha: f64,
    spec: &ObservationSpec,
    opts: SolveOptions,
) -> Result<ObservationTrace, CliError> {
    solve(sys, a, src, alpha, spec, opts).map_err(|e| CliError::from_core_at("forward", e))
}

fn trace_csv(run: &mut Run, suffix: &str, trace: &ObservationTrace) {
    let rows = trace
        .times()
        .iter()
        .zip(trace.values())
        .zip(&trace.tail_bound)
        .map(|((t, v), b)| vec![num(*t), num(v), num(*b)]);
    run.artifacts.csv(suffix, &["t", "value", "tail_bound"], rows);
}

fn forward(cfg: &ExperimentConfig, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    let sys = system(cfg, run)?;
    let (a, defect) = coefficients(cfg.spatial()?, &sys);
    let src = cfg.temporal()?;
    run.manifest.set("temporal_source", src);
    let spec = observation(cfg, run)?;
    let n = series_modes(cfg, ov, &sys, run);
    let opts = solve_options(n, ov, run);
    let trace = forward_trace(&sys, &a, src, cfg.alpha, &spec, opts)?;
    trace_csv(run, "trace.csv", &trace);
    let report = json!({
        "modes_used": trace.modes_used,
        "parseval_defect": defect,
        "max_tail_bound": trace.tail_bound.iter().copied().fold(0.0, f64::max),
        "warnings": trace.warnings,
    });
    run.artifacts.json("forward.json", &report);
    Ok(report)
}

/// Per-mode weights of a linear observation functional.
fn functional_weights(sys: &EigenSystem, spec: &ObservationSpec, n: usize) -> Result<Vec<f64>, CliError> {
    match spec.kind {
        ObservationKind::InteriorPoint { x0 } => Ok((0..n).map(|k| sys.mode_value(k, x0)).collect()),
        ObservationKind::BoundaryFlux { endpoint } => {
            let side = match endpoint {
                Endpoint::Left => 0,
                Endpoint::Right => 1,
            };
            Ok((0..n).map(|k| sys.boundary_slopes[k][side]).collect())
        }
        ObservationKind::SubdomainNorm { .. } => Err(CliError::config(
            "observation.kind",
            "this task needs a linear observation (interior-point or boundary-flux)",
        )),
    }
}

fn truncation(cfg: &ExperimentConfig, order: &FractionalOrder, run: &mut Run) -> Result<Truncation, CliError> {
    let e = &cfg.expand;
    let manual = e.k_terms.is_some() || e.j_terms.is_some() || e.m_terms.is_some();
    let t = match (e.order, manual) {
        (Some(_), true) => {
            return Err(CliError::config(
                "expand.order",
                "give either order or k_terms/j_terms/m_terms, not both",
            ))
        }
        (Some(n), false) => Truncation::for_order(order, n),
        (None, _) => Truncation {
            k_terms: e.k_terms.unwrap_or(DEFAULT_EXPAND_TERMS),
            j_terms: e.j_terms.unwrap_or(DEFAULT_EXPAND_TERMS),
            m_terms: e.m_terms.unwrap_or(DEFAULT_EXPAND_TERMS),
        },
    };
    run.manifest.set("remainder_order", e.order);
    run.manifest.set("truncation", t);
    Ok(t)
}

fn deeper(t: Truncation) -> Truncation {
    Truncation {
        k_terms: t.k_terms + 1,
        j_terms: t.j_terms + 1,
        m_terms: t.m_terms + 1,
    }
}

/// Exponent of the slowest term present in `next` but missing from, or
/// different in, `series`.
fn leading_omitted(series: &AsymptoticSeries, next: &AsymptoticSeries) -> Option<(f64, bool)> {
    next.terms
        .iter()
        .filter(|t| t.t_power < 0.0 && (t.coeff != 0.0 || !t.explicit))
        .find(|t| {
            !series.terms.iter().any(|s| {
                s.t_power == t.t_power
                    && s.has_log == t.has_log
                    && (s.coeff - t.coeff).abs() <= 1e-12 * t.coeff.abs()
            })
        })
        .map(|t| (t.t_power, t.has_log))
}

fn expand(cfg: &ExperimentConfig, order: &FractionalOrder, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    let sys = system(cfg, run)?;
    let (a, _) = coefficients(cfg.spatial()?, &sys);
    let src = cfg.temporal()?;
    run.manifest.set("temporal_source", src);
    let spec = observation(cfg, run)?;
    let n = series_modes(cfg, ov, &sys, run);
    let fw = functional_weights(&sys, &spec, n)?;
    let weights: Vec<f64> = a.iter().zip(&fw).map(|(a, w)| a * w).collect();
    let lambdas = &sys.lambdas[..n];
    let trunc = truncation(cfg, order, run)?;
    let series = expansion_sum_truncated(&weights, lambdas, order, src, trunc)
        .map_err(|e| CliError::from_core_at("expand", e))?;
    let next = expansion_sum_truncated(&weights, lambdas, order, src, deeper(trunc))
        .map_err(|e| CliError::from_core_at("expand", e))?;
    let opts = solve_options(n, ov, run);
    let trace = forward_trace(&sys, &a, src, cfg.alpha, &spec, opts)?;
    let cmp = compare_trace(&trace, &series)?;
    run.artifacts.text("series.csv", series.to_csv());
    let rows = trace
        .times()
        .iter()
        .zip(trace.values())
        .zip(&cmp.residual)
        .map(|((t, v), r)| vec![num(*t), num(v), num(*r)]);
    run.artifacts.csv("residual.csv", &["t", "value", "residual"], rows);
    let omitted = leading_omitted(&series, &next);
    let expected = omitted.map(|o| o.0);
    let matches = match (cmp.slope, expected) {
        (Some(s), Some(e)) => Some(((s - e) / e).abs() <= SLOPE_TOLERANCE),
        _ => None,
    };
    run.manifest.set("slope_tolerance", SLOPE_TOLERANCE);
    let report = json!({
        "truncation": trunc,
        "terms": series.terms.len(),
        "explicit_terms": series.terms.iter().filter(|t| t.explicit).count(),
        "expected_slope": expected,
        "leading_omitted_has_log": omitted.map(|o| o.1),
        "slope": cmp.slope,
        "slope_matches": matches,
        "per_decade": cmp.per_decade,
        "max_residual": cmp.residual.iter().map(|r| r.abs()).fold(0.0, f64::max),
    });
    run.artifacts.json("expand.json", &report);
    Ok(report)
}

#[derive(Deserialize)]
struct DataRow {
    t: f64,
    value: f64,
}

fn read_trace(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let key = "inverse.data";
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::config(key, format!("cannot read {}: {e}", path.display())))?;
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (i, row) in rdr.deserialize::<DataRow>().enumerate() {
        let row = row.map_err(|e| CliError::config(key, format!("row {}: {e}", i + 1)))?;
        if !(row.t > 0.0 && row.t.is_finite() && row.value.is_finite()) {
            return Err(CliError::config(key, format!("row {}: t must be positive and values finite", i + 1)));
        }
        if times.last().is_some_and(|&last| row.t <= last) {
            return Err(CliError::config(key, format!("row {}: times must increase", i + 1)));
        }
        times.push(row.t);
        values.push(row.value);
    }
    Ok((times, values))
}

fn perturb(values: &mut [f64], noise: NoiseConfig) {
    if noise.sigma == 0.0 {
        return;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
    let normal = Normal::new(0.0, noise.sigma).expect("validated sigma");
    for v in values.iter_mut() {
        *v += normal.sample(&mut rng);
    }
}

/// Observed `(t, value)` pairs: a data file, or a synthetic forward trace
/// of the configured sources.
fn observed(
    cfg: &ExperimentConfig,
    sys: &EigenSystem,
    a: Option<&[f64]>,
    src: Option<&TemporalSource>,
    n: usize,
    ov: Overrides,
    run: &mut Run,
) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    run.manifest.set("noise", cfg.inverse.noise);
    if let Some(path) = &cfg.inverse.data {
        run.manifest.set("data", path);
        return read_trace(Path::new(path));
    }
    let (Some(a), Some(src)) = (a, src) else {
        return Err(CliError::config(
            "inverse.data",
            "without a data file, both sources are needed to synthesize the trace",
        ));
    };
    let spec = observation(cfg, run)?;
    let opts = solve_options(n, ov, run);
    let trace = forward_trace(sys, a, src, cfg.alpha, &spec, opts)?;
    let mut values = trace.values();
    if let Some(noise) = cfg.inverse.noise {
        perturb(&mut values, noise);
    }
    let rows = trace
        .times()
        .iter()
        .zip(&values)
        .zip(&trace.tail_bound)
        .map(|((t, v), b)| vec![num(*t), num(*v), num(*b)]);
    run.artifacts.csv("trace.csv", &["t", "value", "tail_bound"], rows);
    Ok((trace.spec.times, values))
}

fn structure(cfg: &ExperimentConfig, src: Option<&TemporalSource>, run: &mut Run) -> Result<SourceStructure, CliError> {
    let s = match (cfg.inverse.structure, src) {
        (Some(s), _) => s.into(),
        (None, Some(src)) => SourceStructure::of(src),
        (None, None) => {
            return Err(CliError::config(
                "inverse.structure",
                "required when no temporal source is configured",
            ))
        }
    };
    run.manifest.set("source_structure", s);
    Ok(s)
}

fn fit_options(cfg: &ExperimentConfig, run: &mut Run) -> FitOptions {
    let mut o = FitOptions::default();
    if let Some(c) = cfg.inverse.condition_threshold {
        o.condition_threshold = c;
    }
    run.manifest.set(
        "fit",
        json!({
            "condition_threshold": o.condition_threshold,
            "min_decades": o.min_decades,
            "min_points_per_decade": o.min_points_per_decade,
            "max_depth": MAX_FIT_DEPTH,
            "depth_rule": "shallowest depth with residual within 2x of the best trusted depth",
        }),
    );
    o
}

fn fit_summary(auto: &AutoFit) -> Value {
    json!({
        "k_terms": auto.k_terms,
        "j_terms": auto.j_terms,
        "m_terms": auto.m_terms,
        "basis_size": auto.fit.basis.len(),
        "condition": auto.fit.condition,
        "trusted": auto.fit.trusted,
        "scanned": auto.scanned,
    })
}

fn invert_x(cfg: &ExperimentConfig, order: &FractionalOrder, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    let sys = system(cfg, run)?;
    let src = cfg.temporal()?;
    run.manifest.set("temporal_source", src);
    let truth = cfg.spatial_source.as_ref().map(|s| coefficients(s, &sys).0);
    let n_series = series_modes(cfg, ov, &sys, run);
    let (times, values) = observed(cfg, &sys, truth.as_deref(), Some(src), n_series, ov, run)?;
    let spec = match cfg.observation {
        Some(_) => cfg.observation()?.1,
        None => return Err(CliError::config("observation", "required to locate the sensor")),
    };
    let structure = structure(cfg, Some(src), run)?;
    let fopts = fit_options(cfg, run);
    let auto = fit_tail_auto(&times, &values, order, structure, fopts)?;
    let moments = moments_from_fit(&auto.fit, order, src)?;
    let n = ov.modes.or(cfg.inverse.modes).unwrap_or(DEFAULT_RECOVERED_MODES).min(sys.n_modes());
    let ropts = RecoveryOptions::default();
    run.manifest.set("recovered_modes", n);
    run.manifest.set(
        "recovery",
        json!({"max_modes": ropts.max_modes, "condition_threshold": ropts.condition_threshold, "extended_precision": "double-double"}),
    );
    if moments.values.len() < n {
        return Err(CliError::Untrusted(format!(
            "the tail fit resolves {} spectral moments, {n} modes requested",
            moments.values.len()
        )));
    }
    let rec = recover_spatial(&moments.values[..n], &moments.gammas[..n], &sys.lambdas[..n], ropts)?;
    let fw = functional_weights(&sys, &spec, rec.coefficients.len())?;
    let coeffs: Vec<Option<f64>> = rec
        .coefficients
        .iter()
        .zip(&fw)
        .map(|(w, f)| (f.abs() > NODAL_WEIGHT_FLOOR).then(|| w / f))
        .collect();
    let errors: Option<Vec<Option<f64>>> = truth.as_ref().map(|t| {
        coeffs
            .iter()
            .zip(t)
            .map(|(c, t)| c.map(|c| if *t == 0.0 { (c - t).abs() } else { ((c - t) / t).abs() }))
            .collect()
    });
    let advice = truth.as_ref().and_then(|t| {
        let weights: Vec<f64> = functional_weights(&sys, &spec, n_series)
            .ok()?
            .iter()
            .zip(t)
            .map(|(f, a)| f * a)
            .collect();
        let kept = Truncation {
            k_terms: auto.k_terms,
            j_terms: auto.j_terms,
            m_terms: auto.m_terms,
        };
        let retained = expansion_sum_truncated(&weights, &sys.lambdas[..n_series], order, src, kept)
            .ok()?
            .terms
            .iter()
            .filter(|t| t.t_power < 0.0 && t.coeff != 0.0)
            .count();
        let series = expansion_sum_truncated(&weights, &sys.lambdas[..n_series], order, src, deeper(kept)).ok()?;
        fit_window_start(&series, retained)
    });
    let report = json!({
        "coefficients": coeffs,
        "condition": rec.condition,
        "residual": auto.fit.residual_norm,
        "verdict": if rec.partial { "partial" } else { "recovered" },
        "requested_modes": rec.requested_modes,
        "moments": moments,
        "fit": fit_summary(&auto),
        "truth": truth.as_ref().map(|t| &t[..n.min(t.len())]),
        "relative_errors": errors,
        "window_start_advice": advice,
    });
    run.artifacts.json("report.json", &report);
    Ok(report)
}

fn invert_t(cfg: &ExperimentConfig, order: &FractionalOrder, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    let sys = system(cfg, run)?;
    let (a, _) = coefficients(cfg.spatial()?, &sys);
    let truth = cfg.temporal_source.as_ref();
    run.manifest.set("temporal_source", truth);
    let n = ov.modes.or(cfg.inverse.modes).unwrap_or(cfg.n_modes()).min(sys.n_modes());
    run.manifest.set("series_modes", n);
    run.manifest.set("nodal_weight_floor", NODAL_WEIGHT_FLOOR);
    let spec = match cfg.observation {
        Some(_) => cfg.observation()?.1,
        None => return Err(CliError::config("observation", "required to locate the sensor")),
    };
    let fw = functional_weights(&sys, &spec, n)?;
    let weights: Vec<f64> = a.iter().zip(&fw).map(|(a, f)| a * f).collect();
    if weights.iter().all(|w| w.abs() <= NODAL_WEIGHT_FLOOR) {
        return Err(CliError::Numerical(CoreError::BlindSpot(
            "every projected mode vanishes at the observation point".into(),
        )));
    }
    let structure = structure(cfg, truth, run)?;
    let (times, values) = observed(cfg, &sys, Some(&a), truth, n, ov, run)?;
    let fopts = fit_options(cfg, run);
    let auto = fit_tail_auto(&times, &values, order, structure, fopts)?;
    let rec = recover_temporal(&auto.fit, &weights, &sys.lambdas[..n], order, structure)?;
    let expected = truth.map(|src| {
        let js = rec.mu.len();
        json!({
            "mu0": src.mu_coeff(0),
            "mu": (1..=js).map(|j| src.mu_coeff(j)).collect::<Vec<_>>(),
            "c_mu": (0..js).map(|m| c_mu(src, m).ok().map(|c| c.value)).collect::<Vec<_>>(),
        })
    });
    let resolved = rec.mu0.is_some()
        || rec.mu.iter().any(Option::is_some)
        || rec.c_mu.iter().any(|c| matches!(c, Some(MomentEstimate::Exact(_))));
    let report = json!({
        "coefficients": rec,
        "condition": auto.fit.condition,
        "residual": auto.fit.residual_norm,
        "verdict": if resolved { "recovered" } else { "unresolved" },
        "fit": fit_summary(&auto),
        "truth": expected,
    });
    run.artifacts.json("report.json", &report);
    Ok(report)
}

fn kappa(cfg: &ExperimentConfig, order: &FractionalOrder, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    if order.is_rational() {
        return Err(CliError::config(
            "alpha",
            format!("κ recovery needs an irrational order; {} is classified rational", cfg.alpha),
        ));
    }
    let sys = system(cfg, run)?;
    let pair = cfg
        .pair
        .as_ref()
        .ok_or_else(|| CliError::config("pair", "required for this task"))?;
    let (a1, _) = coefficients(cfg.spatial()?, &sys);
    let (a2, _) = coefficients(&pair.spatial_source, &sys);
    let src1 = cfg.temporal()?;
    let src2 = &pair.temporal_source;
    run.manifest.set("temporal_source", src1);
    run.manifest.set("pair_temporal_source", src2);
    let spec = observation(cfg, run)?;
    let n = series_modes(cfg, ov, &sys, run);
    let opts = solve_options(n, ov, run);
    let (t1, t2) = rayon::join(
        || forward_trace(&sys, &a1, src1, cfg.alpha, &spec, opts),
        || forward_trace(&sys, &a2, src2, cfg.alpha, &spec, opts),
    );
    let (t1, t2) = (t1?, t2?);
    trace_csv(run, "trace.csv", &t1);
    trace_csv(run, "pair_trace.csv", &t2);
    let structure = structure(cfg, Some(src1), run)?;
    let fopts = fit_options(cfg, run);
    let auto = fit_tail_auto(t1.times(), &t1.values(), order, structure, fopts)?;
    let second = fit_tail(t2.times(), &t2.values(), &auto.fit.basis, fopts)?;
    if !second.trusted {
        return Err(CliError::Untrusted(format!(
            "fit of the second trace has condition {:e}",
            second.condition
        )));
    }
    let kopts = KappaOptions::default();
    run.manifest.set(
        "kappa",
        json!({"max_terms": kopts.max_terms, "spread_threshold": kopts.spread_threshold}),
    );
    let k = estimate_kappa(&auto.fit, &second, order, src1, src2, kopts)
        .map_err(|e| CliError::from_core_at("kappa", e))?;
    let report = json!({
        "coefficients": k.ratios.iter().map(|r| json!({"t_power": r.0, "has_log": r.1, "ratio": r.2})).collect::<Vec<_>>(),
        "condition": auto.fit.condition.max(second.condition),
        "residual": auto.fit.residual_norm.max(second.residual_norm),
        "verdict": k.verdict.as_str(),
        "kappa": k.kappa,
        "spread": k.spread,
        "proportional": k.verdict == Verdict::Proportional,
        "fit": fit_summary(&auto),
    });
    run.artifacts.json("report.json", &report);
    Ok(report)
}

fn ml(cfg: &ExperimentConfig, run: &mut Run) -> Result<Value, CliError> {
    let m = cfg
        .ml
        .as_ref()
        .ok_or_else(|| CliError::config("ml", "required for this task"))?;
    let alpha = m.alpha.unwrap_or(cfg.alpha);
    let beta = m.beta.unwrap_or(alpha);
    let params = MlParams::new(alpha, beta).map_err(|e| CliError::from_core_at("ml", e))?;
    let spacing = m.spacing.unwrap_or(Spacing::Linear);
    let xs = match spacing {
        Spacing::Linear => linear_grid(m.x_min, m.x_max, m.points),
        Spacing::Geometric => {
            fracsource_core::forward::geometric_times(m.x_min, m.x_max, m.points).map_err(|e| CliError::from_core_at("ml", e))?
        }
    };
    run.manifest.set(
        "ml",
        json!({
            "alpha": alpha,
            "beta": beta,
            "x_min": m.x_min,
            "x_max": m.x_max,
            "points": m.points,
            "spacing": spacing,
            "asymptotic_terms": m.asymptotic_terms,
            "working_tolerance": WORKING_TOL,
        }),
    );
    let mut header = vec!["x", "value", "error_bound", "regime"];
    if m.asymptotic_terms.is_some() {
        header.extend(["asymptotic", "asymptotic_omitted"]);
    }
    let mut rows = Vec::with_capacity(xs.len());
    let mut degraded = 0;
    let mut regimes = std::collections::BTreeMap::<&str, usize>::new();
    for &x in &xs {
        let v = ml_eval(params, x)?;
        degraded += v.degraded as usize;
        *regimes.entry(v.regime.as_str()).or_default() += 1;
        let mut row = vec![num(x), num(v.value), num(v.error_bound), v.regime.as_str().to_string()];
        if let Some(terms) = m.asymptotic_terms {
            match ml_asymptotic(params, x, terms) {
                Ok((s, omitted)) => row.extend([num(s), num(omitted)]),
                Err(_) => row.extend([String::new(), String::new()]),
            }
        }
        rows.push(row);
    }
    run.artifacts.csv("ml.csv", &header, rows);
    let report = json!({"points": xs.len(), "degraded": degraded, "regimes": regimes});
    run.artifacts.json("ml.json", &report);
    Ok(report)
}

fn eigen(cfg: &ExperimentConfig, ov: Overrides, run: &mut Run) -> Result<Value, CliError> {
    let sys = system_of(cfg, cfg.n_modes(), run)?;
    let rows = sys.lambdas.iter().zip(&sys.boundary_slopes).enumerate().map(|(n, (l, s))| {
        vec![(n + 1).to_string(), num(*l), num(s[0]), num(s[1])]
    });
    run.artifacts.csv("eigen.csv", &["n", "lambda", "slope_left", "slope_right"], rows);
    let weyl = match weyl_check(&sys) {
        Ok(w) => json!({"exponent": w.exponent, "constant": w.constant, "max_residual": w.max_residual}),
        Err(e) => json!({"skipped": e.to_string()}),
    };
    let blind = match &cfg.spatial_source {
        Some(s) => {
            let tol = ov.tolerance.unwrap_or(DEFAULT_BLIND_SPOT_TOLERANCE);
            run.manifest.set("blind_spot_tolerance", tol);
            let (a, defect) = coefficients(s, &sys);
            let b = blind_spots(&sys, &a, tol);
            json!({
                "interior": b.interior,
                "boundary": b.boundary.iter().map(|e| match e { Endpoint::Left => "left", Endpoint::Right => "right" }).collect::<Vec<_>>(),
                "warning": b.warning,
                "parseval_defect": defect,
            })
        }
        None => Value::Null,
    };
    let report = json!({
        "n_modes": sys.n_modes(),
        "orthonormality_defect": sys.orthonormality_defect(),
        "weyl": weyl,
        "blind_spots": blind,
    });
    run.artifacts.json("eigen.json", &report);
    Ok(report)
}
