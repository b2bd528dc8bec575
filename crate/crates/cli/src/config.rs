//! Experiment configuration: JSON schema, validation and resolution into
//! solver inputs.

use std::f64::consts::PI;
use std::path::Path;

use fracsource_core::asymptotic::FractionalOrder;
use fracsource_core::forward::{geometric_times, ObservationKind, ObservationSpec};
use fracsource_core::inverse::SourceStructure;
use fracsource_core::spectral::{
    build_dirichlet_laplacian, build_sturm_liouville, default_grid_size, project, EigenSystem, Endpoint,
    SpatialSource,
};
use fracsource_core::temporal::TemporalSource;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;

pub const DEFAULT_N_MODES: usize = 32;
pub const DEFAULT_T_MIN: f64 = 1e2;
pub const DEFAULT_T_MAX: f64 = 1e6;
pub const DEFAULT_POINTS: usize = 81;
pub const TAIL_MODE_FACTOR: usize = 4;
pub const DEFAULT_RECOVERED_MODES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Forward,
    Expand,
    InvertX,
    InvertT,
    Kappa,
    Ml,
    Eigen,
    Demo,
}

impl Task {
    pub fn as_str(&self) -> &'static str {
        match self {
            Task::Forward => "forward",
            Task::Expand => "expand",
            Task::InvertX => "invert-x",
            Task::InvertT => "invert-t",
            Task::Kappa => "kappa",
            Task::Ml => "ml",
            Task::Eigen => "eigen",
            Task::Demo => "demo",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub alpha: f64,
    #[serde(default)]
    pub operator: OperatorConfig,
    pub spatial_source: Option<SpatialConfig>,
    pub temporal_source: Option<TemporalSource>,
    pub observation: Option<ObservationConfig>,
    pub task: Option<Task>,
    pub output: Option<String>,
    #[serde(default)]
    pub expand: ExpandConfig,
    #[serde(default)]
    pub inverse: InverseConfig,
    pub pair: Option<PairConfig>,
    pub ml: Option<MlConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    #[default]
    DirichletLaplacian,
    SturmLiouville,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default)]
    pub kind: OperatorKind,
    #[serde(rename = "L")]
    pub length: Option<f64>,
    pub n_modes: Option<usize>,
    pub grid_size: Option<usize>,
    pub a: Option<Coefficient>,
    pub q: Option<Coefficient>,
}

/// A coefficient function of `x` on `[0, L]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Coefficient {
    Constant { value: f64 },
    /// `Σ coeffs[k] x^k`.
    Polynomial { coeffs: Vec<f64> },
    /// `amplitude · sin(frequency · x) + offset`.
    Sine {
        amplitude: f64,
        #[serde(default = "one")]
        frequency: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Piecewise-linear interpolation of samples covering `[0, L]`.
    Tabulated { x: Vec<f64>, y: Vec<f64> },
}

fn one() -> f64 {
    1.0
}

impl Coefficient {
    fn check(&self, key: &str, length: f64) -> Result<(), CliError> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            Coefficient::Constant { value } if !value.is_finite() => Err(CliError::config(key, "value must be finite")),
            Coefficient::Polynomial { coeffs } if coeffs.is_empty() || !finite(coeffs) => {
                Err(CliError::config(key, "coeffs must be a nonempty list of finite numbers"))
            }
            Coefficient::Sine {
                amplitude,
                frequency,
                offset,
            } if !finite(&[*amplitude, *frequency, *offset]) => Err(CliError::config(key, "parameters must be finite")),
            Coefficient::Tabulated { x, y } => {
                if x.len() != y.len() || x.len() < 2 {
                    return Err(CliError::config(key, "x and y need equal lengths of at least 2"));
                }
                if !finite(x) || !finite(y) || x.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(CliError::config(key, "x must be strictly increasing and values finite"));
                }
                let tol = 1e-12 * length;
                if x[0] > tol || x[x.len() - 1] < length - tol {
                    return Err(CliError::config(
                        key,
                        format!("samples must cover [0, {length}], got [{}, {}]", x[0], x[x.len() - 1]),
                    ));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Coefficient::Constant { value } => *value,
            Coefficient::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Coefficient::Sine {
                amplitude,
                frequency,
                offset,
            } => amplitude * (frequency * x).sin() + offset,
            Coefficient::Tabulated { x: xs, y } => {
                let i = xs.partition_point(|v| *v <= x).clamp(1, xs.len() - 1);
                let (x0, x1) = (xs[i - 1], xs[i]);
                let w = (x - x0) / (x1 - x0);
                y[i - 1] * (1.0 - w) + y[i] * w
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SpatialConfig {
    /// Explicit coefficients `a_n` on the eigenfunctions.
    Modes { coefficients: Vec<f64> },
    /// A function of `x` projected onto the eigensystem.
    Function { function: Coefficient },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservationKindConfig {
    InteriorPoint,
    BoundaryFlux,
    SubdomainNorm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Spacing {
    #[default]
    Geometric,
    Linear,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationConfig {
    pub kind: ObservationKindConfig,
    /// `x0`, `"left"`/`"right"` or `[a, b]` according to `kind`.
    pub location: Value,
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
    pub spacing: Option<Spacing>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpandConfig {
    /// Remainder order `N`; the truncation follows from it.
    pub order: Option<u32>,
    pub k_terms: Option<usize>,
    pub j_terms: Option<usize>,
    pub m_terms: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureConfig {
    Constant,
    Compact,
    DecayingTail,
    General,
}

impl From<StructureConfig> for SourceStructure {
    fn from(s: StructureConfig) -> Self {
        match s {
            StructureConfig::Constant => SourceStructure::Constant,
            StructureConfig::Compact => SourceStructure::Compact,
            StructureConfig::DecayingTail => SourceStructure::DecayingTail,
            StructureConfig::General => SourceStructure::General,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseConfig {
    /// Modes recovered by `invert-x`; modes assumed known by `invert-t`.
    pub modes: Option<usize>,
    /// CSV file with columns `t,value` replacing the synthetic trace.
    pub data: Option<String>,
    pub structure: Option<StructureConfig>,
    pub condition_threshold: Option<f64>,
    pub noise: Option<NoiseConfig>,
}

/// Additive Gaussian perturbation of synthetic traces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// The second source pair of a `kappa` run.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    pub spatial_source: SpatialConfig,
    pub temporal_source: TemporalSource,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlConfig {
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub x_min: f64,
    pub x_max: f64,
    pub points: usize,
    pub spacing: Option<Spacing>,
    /// Adds a column with the large-argument expansion of this many terms.
    pub asymptotic_terms: Option<usize>,
}

/// Parses a configuration file, naming the offending key on failure.
pub fn load(path: &Path) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { "<root>".to_string() } else { path };
        CliError::config(&key, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    fn validate(&self) -> Result<(), CliError> {
        let a = self.alpha;
        if !(a > 0.0 && a < 2.0 && a != 1.0) {
            return Err(CliError::config(
                "alpha",
                format!("must lie in (0,1)∪(1,2), got {a}"),
            ));
        }
        if let Some(l) = self.operator.length {
            if !(l > 0.0 && l.is_finite()) {
                return Err(CliError::config("operator.L", format!("must be positive, got {l}")));
            }
        }
        if self.operator.n_modes == Some(0) {
            return Err(CliError::config("operator.n_modes", "at least one mode is required"));
        }
        let length = self.length();
        for (key, c) in [("operator.a", &self.operator.a), ("operator.q", &self.operator.q)] {
            if let Some(c) = c {
                c.check(key, length)?;
            }
        }
        if self.operator.kind == OperatorKind::DirichletLaplacian
            && (self.operator.a.is_some() || self.operator.q.is_some() || self.operator.grid_size.is_some())
        {
            return Err(CliError::config(
                "operator.kind",
                "a, q and grid_size require kind \"sturm-liouville\"",
            ));
        }
        if let Some(s) = &self.spatial_source {
            check_spatial("spatial_source", s, length)?;
        }
        if let Some(src) = &self.temporal_source {
            src.validate().map_err(|e| CliError::from_core_at("temporal_source", e))?;
        }
        if let Some(p) = &self.pair {
            check_spatial("pair.spatial_source", &p.spatial_source, length)?;
            p.temporal_source
                .validate()
                .map_err(|e| CliError::from_core_at("pair.temporal_source", e))?;
        }
        if let Some(o) = &self.observation {
            let (t_min, t_max, points) = self.time_range(o);
            if !(t_min > 0.0 && t_max > t_min && t_max.is_finite()) {
                return Err(CliError::config(
                    "observation.t_min",
                    format!("need 0 < t_min < t_max, got [{t_min}, {t_max}]"),
                ));
            }
            if points < 2 {
                return Err(CliError::config("observation.points", "at least 2 points are required"));
            }
            self.observation_kind(o)?;
        }
        if let Some(m) = self.inverse.modes {
            if m == 0 {
                return Err(CliError::config("inverse.modes", "at least one mode is required"));
            }
        }
        if let Some(c) = self.inverse.condition_threshold {
            if !(c > 1.0) {
                return Err(CliError::config("inverse.condition_threshold", "must exceed 1"));
            }
        }
        if let Some(n) = self.inverse.noise {
            if !(n.sigma >= 0.0 && n.sigma.is_finite()) {
                return Err(CliError::config("inverse.noise.sigma", "must be nonnegative"));
            }
        }
        if let Some(ml) = &self.ml {
            for (key, v) in [("ml.alpha", ml.alpha), ("ml.beta", ml.beta)] {
                if let Some(v) = v {
                    if !(v > 0.0 && v <= 2.0) {
                        return Err(CliError::config(key, format!("must lie in (0, 2], got {v}")));
                    }
                }
            }
            if !(ml.x_min >= 0.0 && ml.x_max > ml.x_min && ml.x_max.is_finite()) {
                return Err(CliError::config("ml.x_min", "need 0 <= x_min < x_max"));
            }
            if ml.points < 2 {
                return Err(CliError::config("ml.points", "at least 2 points are required"));
            }
            if ml.spacing == Some(Spacing::Geometric) && ml.x_min == 0.0 {
                return Err(CliError::config("ml.spacing", "geometric spacing needs x_min > 0"));
            }
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.operator.length.unwrap_or(PI)
    }

    pub fn n_modes(&self) -> usize {
        self.operator.n_modes.unwrap_or(DEFAULT_N_MODES)
    }

    pub fn grid_size(&self) -> Option<usize> {
        match self.operator.kind {
            OperatorKind::DirichletLaplacian => None,
            OperatorKind::SturmLiouville => Some(
                self.operator
                    .grid_size
                    .unwrap_or(default_grid_size(TAIL_MODE_FACTOR * self.n_modes())),
            ),
        }
    }

    /// Eigenpairs to compute. A source given as a function gets modes beyond
    /// the series so the truncation tail can be bounded.
    pub fn basis_modes(&self) -> usize {
        let n = self.n_modes();
        match self.spatial_source {
            Some(SpatialConfig::Function { .. }) => {
                let wanted = TAIL_MODE_FACTOR * n;
                self.grid_size().map_or(wanted, |g| wanted.min(g / 8)).max(n)
            }
            _ => n,
        }
    }

    pub fn order(&self) -> Result<FractionalOrder, CliError> {
        FractionalOrder::new(self.alpha).map_err(|e| CliError::from_core_at("alpha", e))
    }

    pub fn eigensystem(&self) -> Result<EigenSystem, CliError> {
        self.eigensystem_of(self.basis_modes())
    }

    pub fn eigensystem_of(&self, n: usize) -> Result<EigenSystem, CliError> {
        match self.operator.kind {
            OperatorKind::DirichletLaplacian => {
                build_dirichlet_laplacian(self.length(), n).map_err(|e| CliError::from_core_at("operator", e))
            }
            OperatorKind::SturmLiouville => {
                let a = self.operator.a.clone().unwrap_or(Coefficient::Constant { value: 1.0 });
                let q = self.operator.q.clone().unwrap_or(Coefficient::Constant { value: 0.0 });
                build_sturm_liouville(
                    &|x| a.eval(x),
                    &|x| q.eval(x),
                    self.length(),
                    self.grid_size().expect("finite-difference operator"),
                    n,
                )
                .map_err(|e| CliError::from_core_at("operator", e))
            }
        }
    }

    pub fn time_range(&self, o: &ObservationConfig) -> (f64, f64, usize) {
        (
            o.t_min.unwrap_or(DEFAULT_T_MIN),
            o.t_max.unwrap_or(DEFAULT_T_MAX),
            o.points.unwrap_or(DEFAULT_POINTS),
        )
    }

    pub fn observation_kind(&self, o: &ObservationConfig) -> Result<ObservationKind, CliError> {
        let key = "observation.location";
        let length = self.length();
        match o.kind {
            ObservationKindConfig::InteriorPoint => {
                let x0 = o
                    .location
                    .as_f64()
                    .ok_or_else(|| CliError::config(key, "interior-point expects a number"))?;
                if !(x0 > 0.0 && x0 < length) {
                    return Err(CliError::config(key, format!("{x0} is not inside (0, {length})")));
                }
                Ok(ObservationKind::InteriorPoint { x0 })
            }
            ObservationKindConfig::BoundaryFlux => match o.location.as_str() {
                Some("left") => Ok(ObservationKind::BoundaryFlux {
                    endpoint: Endpoint::Left,
                }),
                Some("right") => Ok(ObservationKind::BoundaryFlux {
                    endpoint: Endpoint::Right,
                }),
                _ => Err(CliError::config(key, "boundary-flux expects \"left\" or \"right\"")),
            },
            ObservationKindConfig::SubdomainNorm => {
                let pair: Option<Vec<f64>> = o
                    .location
                    .as_array()
                    .map(|v| v.iter().filter_map(Value::as_f64).collect());
                match pair.as_deref() {
                    Some(&[a, b]) if a >= 0.0 && b <= length && b > a => Ok(ObservationKind::SubdomainNorm { a, b }),
                    _ => Err(CliError::config(
                        key,
                        format!("subdomain-norm expects [a, b] with 0 <= a < b <= {length}"),
                    )),
                }
            }
        }
    }

    pub fn observation(&self) -> Result<(&ObservationConfig, ObservationSpec), CliError> {
        let o = self
            .observation
            .as_ref()
            .ok_or_else(|| CliError::config("observation", "required for this task"))?;
        let (t_min, t_max, points) = self.time_range(o);
        let times = match o.spacing.unwrap_or_default() {
            Spacing::Geometric => geometric_times(t_min, t_max, points),
            Spacing::Linear => Ok(linear_grid(t_min, t_max, points)),
        }
        .map_err(|e| CliError::from_core_at("observation", e))?;
        let spec = ObservationSpec::new(self.observation_kind(o)?, times)
            .map_err(|e| CliError::from_core_at("observation", e))?;
        Ok((o, spec))
    }

    pub fn temporal(&self) -> Result<&TemporalSource, CliError> {
        self.temporal_source
            .as_ref()
            .ok_or_else(|| CliError::config("temporal_source", "required for this task"))
    }

    pub fn spatial(&self) -> Result<&SpatialConfig, CliError> {
        self.spatial_source
            .as_ref()
            .ok_or_else(|| CliError::config("spatial_source", "required for this task"))
    }
}

fn check_spatial(key: &str, s: &SpatialConfig, length: f64) -> Result<(), CliError> {
    match s {
        SpatialConfig::Modes { coefficients } => {
            if coefficients.is_empty() || coefficients.iter().any(|c| !c.is_finite()) {
                return Err(CliError::config(
                    &format!("{key}.coefficients"),
                    "must be a nonempty list of finite numbers",
                ));
            }
            Ok(())
        }
        SpatialConfig::Function { function } => function.check(&format!("{key}.function"), length),
    }
}

/// Mode coefficients `a_n` of a spatial source on the system.
pub fn coefficients(s: &SpatialConfig, sys: &EigenSystem) -> (Vec<f64>, f64) {
    let src = match s {
        SpatialConfig::Modes { coefficients } => SpatialSource::Modes(coefficients.clone()),
        SpatialConfig::Function { function } => {
            let f = function.clone();
            SpatialSource::function(move |x| f.eval(x))
        }
    };
    let p = project(&src, sys);
    (p.coefficients, p.parseval_defect)
}

pub fn linear_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    let mut v: Vec<f64> = (0..n).map(|i| a + step * i as f64).collect();
    v[n - 1] = b;
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> String {
        r#"{
            "alpha": 0.7,
            "spatial_source": {"kind": "modes", "coefficients": [1.0]},
            "temporal_source": {"family": "constant", "mu0": 1.0},
            "observation": {"kind": "interior-point", "location": 1.0}
        }"#
        .into()
    }

    #[test]
    fn minimal_config_parses() {
        let cfg = parse(&minimal()).unwrap();
        assert_eq!(cfg.n_modes(), DEFAULT_N_MODES);
        let (_, spec) = cfg.observation().unwrap();
        assert_eq!(spec.times.len(), DEFAULT_POINTS);
    }

    #[test]
    fn unknown_keys_are_named() {
        let text = minimal().replace("\"location\"", "\"locaton\"");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("observation"), "{err}");
        assert!(err.contains("locaton"), "{err}");
        let text = minimal().replace("\"mu0\"", "\"mu_0\"");
        let err = parse(&text).unwrap_err().to_string();
        assert!(err.contains("temporal_source") && err.contains("mu_0"), "{err}");
    }

    #[test]
    fn alpha_range_enforced() {
        for bad in ["1.0", "0.0", "2.0", "-0.5"] {
            let text = minimal().replace("0.7", bad);
            let err = parse(&text).unwrap_err();
            assert_eq!(err.exit_code(), 1);
            assert!(err.to_string().contains("(0,1)∪(1,2)"), "{err}");
        }
    }

    #[test]
    fn location_checked_against_domain() {
        let text = minimal().replace("\"location\": 1.0", "\"location\": 4.0");
        assert!(parse(&text).unwrap_err().to_string().contains("observation.location"));
    }

    #[test]
    fn tabulated_coefficient_interpolates() {
        let c = Coefficient::Tabulated {
            x: vec![0.0, 1.0, 3.0],
            y: vec![1.0, 3.0, 7.0],
        };
        assert_eq!(c.eval(0.5), 2.0);
        assert_eq!(c.eval(2.0), 5.0);
        assert_eq!(c.eval(3.0), 7.0);
    }
}
