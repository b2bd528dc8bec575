//! Curated end-to-end scenarios.

use std::fmt::Write as _;

use serde_json::Value;

use crate::config::{parse, Task};
use crate::error::CliError;
use crate::output::Artifacts;
use crate::tasks::{run_task, Overrides, Run};

pub const DEMOS: [&str; 3] = ["pollutant-1d", "kappa-pair", "blindspot"];

const POLLUTANT: &str = r#"{
    "alpha": 0.5,
    "operator": {"kind": "dirichlet-laplacian", "L": 3.141592653589793, "n_modes": 3},
    "spatial_source": {"kind": "modes", "coefficients": [1.0, -0.5, 0.25]},
    "temporal_source": {"family": "constant", "mu0": 1.0},
    "observation": {"kind": "interior-point", "location": 1.0, "t_min": 100.0, "t_max": 1e6, "points": 81},
    "inverse": {"modes": 3}
}"#;

const KAPPA_PAIR: &str = r#"{
    "alpha": 0.6180339887498949,
    "operator": {"kind": "dirichlet-laplacian", "L": 3.141592653589793, "n_modes": 3},
    "spatial_source": {"kind": "modes", "coefficients": [1.0, 0.5]},
    "temporal_source": {"family": "constant", "mu0": 1.0},
    "observation": {"kind": "interior-point", "location": 1.0, "t_min": 100.0, "t_max": 1e5, "points": 61},
    "pair": {
        "spatial_source": {"kind": "modes", "coefficients": [0.5, 0.25]},
        "temporal_source": {"family": "constant", "mu0": 2.0}
    }
}"#;

const KAPPA_CONTROL: &str = r#"{
    "alpha": 0.6180339887498949,
    "operator": {"kind": "dirichlet-laplacian", "L": 3.141592653589793, "n_modes": 3},
    "spatial_source": {"kind": "modes", "coefficients": [1.0]},
    "temporal_source": {"family": "constant", "mu0": 1.0},
    "observation": {"kind": "interior-point", "location": 1.0, "t_min": 100.0, "t_max": 1e5, "points": 61},
    "pair": {
        "spatial_source": {"kind": "modes", "coefficients": [0.0, 1.0]},
        "temporal_source": {"family": "constant", "mu0": 1.0}
    }
}"#;

const BLIND_NODE: &str = r#"{
    "alpha": 0.7,
    "operator": {"kind": "dirichlet-laplacian", "L": 3.141592653589793, "n_modes": 2},
    "spatial_source": {"kind": "modes", "coefficients": [0.0, 1.0]},
    "temporal_source": {"family": "constant", "mu0": 1.0},
    "observation": {"kind": "interior-point", "location": 1.5707963267948966, "t_min": 100.0, "t_max": 1e5, "points": 61}
}"#;

/// Runs `name`, writing every step under `prefix`. Returns the summary text.
pub fn run_demo(name: &str, prefix: &str, ov: Overrides) -> Result<String, CliError> {
    let mut summary = String::new();
    let mut runs: Vec<Run> = Vec::new();
    match name {
        "pollutant-1d" => {
            let cfg = parse(POLLUTANT)?;
            let truth = [1.0, -0.5, 0.25];
            let fw = step(&mut runs, prefix, "forward", Task::Forward, &cfg, ov)?;
            let inv = step(&mut runs, prefix, "invert-x", Task::InvertX, &cfg, ov)?;
            writeln!(summary, "pollutant-1d: three-mode source, constant release, sensor at x0 = 1, alpha = 0.5").unwrap();
            writeln!(summary, "forward trace: {} modes", fw["modes_used"]).unwrap();
            writeln!(summary, "recovered coefficients (truth, recovered, relative error):").unwrap();
            for (n, t) in truth.iter().enumerate() {
                let r = inv["coefficients"][n].as_f64();
                let e = inv["relative_errors"][n].as_f64();
                writeln!(summary, "  a_{} = {t}: {} ({})", n + 1, show(r), show(e)).unwrap();
            }
            writeln!(summary, "moment matrix condition: {}", inv["condition"]).unwrap();
            writeln!(summary, "verdict: {}", inv["verdict"].as_str().unwrap_or("?")).unwrap();
        }
        "kappa-pair" => {
            let cfg = parse(KAPPA_PAIR)?;
            let k = step(&mut runs, prefix, "kappa", Task::Kappa, &cfg, ov)?;
            let cfg = parse(KAPPA_CONTROL)?;
            let c = step(&mut runs, prefix, "control", Task::Kappa, &cfg, ov)?;
            writeln!(summary, "kappa-pair: (f, mu) against (f/2, 2 mu), golden-ratio order").unwrap();
            writeln!(summary, "ground truth kappa = 2").unwrap();
            writeln!(summary, "estimated kappa = {} with spread {}", k["kappa"], k["spread"]).unwrap();
            writeln!(summary, "verdict: {}", k["verdict"].as_str().unwrap_or("?")).unwrap();
            writeln!(summary, "negative control (phi_1 against phi_2): spread {}, verdict: {}", c["spread"], c["verdict"].as_str().unwrap_or("?")).unwrap();
        }
        "blindspot" => {
            let cfg = parse(BLIND_NODE)?;
            let e = step(&mut runs, prefix, "eigen", Task::Eigen, &cfg, ov)?;
            writeln!(summary, "blindspot: f = phi_2 on (0, pi), sensor at its node x0 = pi/2").unwrap();
            writeln!(summary, "interior blind spots of f: {}", e["blind_spots"]["interior"]).unwrap();
            let mut run = Run::new(format!("{prefix}_invert-t"));
            match run_task(Task::InvertT, &cfg, ov, &mut run) {
                Ok(_) => writeln!(summary, "temporal recovery at the node unexpectedly succeeded").unwrap(),
                Err(err) => {
                    run.artifacts.json("error.json", &err.diagnostic());
                    writeln!(summary, "temporal recovery at the node refused: {err}").unwrap();
                }
            }
            run.finish();
            runs.push(run);
            let moved = parse(&BLIND_NODE.replace("1.5707963267948966", "1.0"))?;
            let r = step(&mut runs, prefix, "contrast", Task::InvertT, &moved, ov)?;
            writeln!(
                summary,
                "same source seen from x0 = 1: mu_0 recovered as {}",
                r["coefficients"]["mu0"]["value"]
            )
            .unwrap();
        }
        other => {
            return Err(CliError::config(
                "demo",
                format!("unknown demo `{other}`; available: {}", DEMOS.join(", ")),
            ))
        }
    }
    for run in &runs {
        run.artifacts.write()?;
    }
    let mut top = Artifacts::new(prefix);
    top.text("summary.txt", summary.clone());
    top.write()?;
    Ok(summary)
}

fn step(
    runs: &mut Vec<Run>,
    prefix: &str,
    name: &str,
    task: Task,
    cfg: &crate::config::ExperimentConfig,
    ov: Overrides,
) -> Result<Value, CliError> {
    let mut run = Run::new(format!("{prefix}_{name}"));
    let report = run_task(task, cfg, ov, &mut run)?;
    run.finish();
    runs.push(run);
    Ok(report)
}

fn show(v: Option<f64>) -> String {
    v.map_or("n/a".to_string(), |v| format!("{v:.3e}"))
}
