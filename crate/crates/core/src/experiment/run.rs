//! Sweep and optimum runners.

use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;

use super::spec::{ExperimentSpec, SweepKind};
use super::{nats_to_bits, ExperimentError, TOOL_NAME, TOOL_VERSION};
use crate::det_equiv::{evaluate, SolverOptions};
use crate::monte_carlo::{estimate_net_rate, estimate_net_rate_grid, MonteCarloEstimate};
use crate::system_model::Scenario;
use crate::train_opt::{optimize_det, optimize_mc, tau_grid, TrainingOptimum};

pub const SWEEP_SCHEMA: &str = "sweep-v1";
pub const OPTIMUM_SCHEMA: &str = "optimum-v1";

const SWEEP_COLUMNS: [&str; 9] = [
    "sweep_value",
    "r_net_det_bits",
    "r_net_mc_bits",
    "mc_std_err_bits",
    "tau_used",
    "tau_star_det",
    "tau_star_mc",
    "seed",
    "status",
];

const OPTIMUM_COLUMNS: [&str; 10] = [
    "sweep_value",
    "tau_star_det",
    "tau_star_det_int",
    "clamp",
    "tau_star_mc",
    "r_net_det_bits",
    "r_net_mc_bits",
    "mc_std_err_bits",
    "seed",
    "status",
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub rows: usize,
    pub failed_rows: usize,
    pub summary: String,
}

impl RunOutcome {
    /// 0 when every row succeeded, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed_rows == 0 {
            0
        } else {
            2
        }
    }
}

fn fmt(x: f64) -> String {
    format!("{x}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

/// One point of a sweep, before choosing backhaul and SNR.
#[derive(Debug, Clone, Copy)]
struct Point {
    value: f64,
    snr_db: f64,
    backhaul: f64,
    tau: f64,
}

/// One output file: a fixed backhaul for SNR/τ sweeps, or the whole C sweep.
struct Series {
    backhaul: Option<f64>,
    points: Vec<Point>,
}

fn series(spec: &ExperimentSpec) -> Vec<Series> {
    let s = &spec.system;
    let values = spec.sweep_values();
    let point = |value: f64, backhaul: f64| match spec.sweep.kind {
        SweepKind::Snr => Point {
            value,
            snr_db: value,
            backhaul,
            tau: s.training,
        },
        SweepKind::Tau => Point {
            value,
            snr_db: s.snr_db,
            backhaul,
            tau: value,
        },
        SweepKind::Backhaul => Point {
            value,
            snr_db: s.snr_db,
            backhaul: value,
            tau: s.training,
        },
    };
    match spec.sweep.kind {
        SweepKind::Backhaul => vec![Series {
            backhaul: None,
            points: values.iter().map(|&v| point(v, f64::NAN)).collect(),
        }],
        _ => s
            .backhaul
            .iter()
            .map(|&c| Series {
                backhaul: Some(c),
                points: values.iter().map(|&v| point(v, c)).collect(),
            })
            .collect(),
    }
}

fn scenario(spec: &ExperimentSpec, p: &Point) -> Result<Scenario, crate::Error> {
    let a = spec.path_loss_matrix().expect("validated spec");
    Scenario::new(spec.system_config(p.backhaul, p.snr_db), a)
}

fn output_path(spec: &ExperimentSpec, backhaul: Option<f64>) -> PathBuf {
    match backhaul {
        Some(c) => PathBuf::from(format!("{}_C{}.csv", spec.output.prefix, fmt(c))),
        None => PathBuf::from(format!("{}.csv", spec.output.prefix)),
    }
}

fn header(spec: &ExperimentSpec, schema: &str, backhaul: Option<f64>, extra: &[String]) -> String {
    let unit = match spec.sweep.kind {
        SweepKind::Snr => "dB",
        SweepKind::Tau => "channel uses",
        SweepKind::Backhaul => "bits/channel use",
    };
    let mut h = String::new();
    let _ = writeln!(h, "# tool: {TOOL_NAME} {TOOL_VERSION}");
    let _ = writeln!(h, "# schema: {schema}");
    let _ = writeln!(h, "# config-sha256: {}", spec.config_hash());
    let _ = writeln!(h, "# seed: {}", spec.mc.seed);
    let _ = writeln!(h, "# mc-samples: {}", spec.mc.samples);
    let _ = writeln!(h, "# sweep: {}", spec.sweep.kind.as_str());
    let _ = writeln!(h, "# sweep-unit: {unit}");
    let _ = writeln!(h, "# rate-unit: bits/channel use per receive antenna");
    match backhaul {
        Some(c) => {
            let _ = writeln!(h, "# backhaul: {}", fmt(c));
            let _ = writeln!(h, "# label: C = {}", fmt(c));
        }
        None => {
            let _ = writeln!(h, "# backhaul: swept");
            let _ = writeln!(h, "# label: SNR = {} dB", fmt(spec.system.snr_db));
        }
    }
    for line in extra {
        let _ = writeln!(h, "# {line}");
    }
    h
}

fn write_file(
    path: &PathBuf,
    header: String,
    columns: &[&str],
    rows: &[Vec<String>],
) -> Result<(), ExperimentError> {
    let mut buf = header.into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| ExperimentError::io(path, std::io::Error::other(e));
        w.write_record(columns).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| ExperimentError::io(path, e))?;
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ExperimentError::io(dir, e))?;
    }
    std::fs::write(path, buf).map_err(|e| ExperimentError::io(path, e))
}

fn bits(est: &MonteCarloEstimate) -> (f64, f64) {
    (nats_to_bits(est.mean), nats_to_bits(est.std_err))
}

/// Net rate at fixed training length for every sweep value; one CSV per
/// backhaul value (or one for a backhaul sweep).
pub fn run_sweep(spec: &ExperimentSpec) -> Result<RunOutcome, ExperimentError> {
    spec.validate()?;
    let opts = SolverOptions::default();
    let m = &spec.methods;
    let mc = &spec.mc;
    let mut outcome = RunOutcome {
        files: vec![],
        rows: 0,
        failed_rows: 0,
        summary: String::new(),
    };

    for ser in series(spec) {
        let det: Vec<Option<Result<f64, crate::Error>>> = ser
            .points
            .par_iter()
            .map(|p| {
                m.det.then(|| {
                    let sc = scenario(spec, p)?;
                    let eval = evaluate(&sc, p.tau, &opts)?;
                    Ok(eval.net_rate(sc.config.coherence))
                })
            })
            .collect();

        let sim: Vec<Option<Result<MonteCarloEstimate, crate::Error>>> = if !m.mc {
            ser.points.iter().map(|_| None).collect()
        } else if spec.sweep.kind == SweepKind::Tau {
            // one simulation with common random numbers over the whole τ grid
            let taus: Vec<f64> = ser.points.iter().map(|p| p.tau).collect();
            let grid = scenario(spec, &ser.points[0])
                .and_then(|sc| estimate_net_rate_grid(&sc, &taus, mc.samples, mc.seed));
            match grid {
                Ok(est) => est.into_iter().map(|e| Some(Ok(e))).collect(),
                Err(e) => ser.points.iter().map(|_| Some(Err(e.clone()))).collect(),
            }
        } else {
            ser.points
                .par_iter()
                .map(|p| {
                    Some(
                        scenario(spec, p)
                            .and_then(|sc| estimate_net_rate(&sc, p.tau, mc.samples, mc.seed)),
                    )
                })
                .collect()
        };

        let mut failed = 0;
        let rows: Vec<Vec<String>> = ser
            .points
            .iter()
            .zip(det.iter().zip(&sim))
            .map(|(p, (d, s))| {
                let mut errors = Vec::new();
                if let Some(Err(e)) = d {
                    errors.push(e.to_string());
                }
                if let Some(Err(e)) = s {
                    errors.push(e.to_string());
                }
                let st = if errors.is_empty() {
                    "ok".to_string()
                } else {
                    failed += 1;
                    format!("failed: {}", errors.join("; "))
                };
                let det_bits = d
                    .as_ref()
                    .and_then(|r| r.as_ref().ok())
                    .map(|&x| nats_to_bits(x));
                let mc_bits = s.as_ref().and_then(|r| r.as_ref().ok()).map(bits);
                vec![
                    fmt(p.value),
                    opt(det_bits),
                    opt(mc_bits.map(|b| b.0)),
                    opt(mc_bits.map(|b| b.1)),
                    fmt(p.tau),
                    String::new(),
                    String::new(),
                    if m.mc {
                        mc.seed.to_string()
                    } else {
                        String::new()
                    },
                    st,
                ]
            })
            .collect();

        let path = output_path(spec, ser.backhaul);
        write_file(
            &path,
            header(spec, SWEEP_SCHEMA, ser.backhaul, &[]),
            &SWEEP_COLUMNS,
            &rows,
        )?;
        let _ = writeln!(
            outcome.summary,
            "wrote {} ({} rows, {} failed)",
            path.display(),
            rows.len(),
            failed
        );
        outcome.rows += rows.len();
        outcome.failed_rows += failed;
        outcome.files.push(path);
    }
    Ok(outcome)
}

struct OptimumResult {
    det: Option<Result<TrainingOptimum, crate::Error>>,
    mc: Option<Result<TrainingOptimum, crate::Error>>,
    /// Simulated net rate at the deterministic optimum.
    mc_at_det: Option<Result<MonteCarloEstimate, crate::Error>>,
}

fn optimum_point(spec: &ExperimentSpec, p: &Point) -> OptimumResult {
    let m = &spec.methods;
    let mc = &spec.mc;
    let sc = match scenario(spec, p) {
        Ok(sc) => sc,
        Err(e) => {
            return OptimumResult {
                det: Some(Err(e)),
                mc: None,
                mc_at_det: None,
            }
        }
    };
    let need_det = m.det || (m.mc && mc.window.is_some());
    let det = need_det.then(|| optimize_det(&sc, spec.optimize.tol_tau, &SolverOptions::default()));
    let (mc_opt, mc_at_det) = if !m.mc {
        (None, None)
    } else {
        let users = sc.config.users as f64;
        let full = tau_grid(users, sc.config.coherence, mc.grid_step);
        let grid: Result<Vec<f64>, crate::Error> = match (mc.window, &det) {
            (None, _) => Ok(full),
            (Some(w), Some(Ok(d))) => Ok(full
                .into_iter()
                .filter(|t| (t - d.tau_star).abs() <= w)
                .collect()),
            (Some(_), Some(Err(e))) => Err(e.clone()),
            (Some(_), None) => unreachable!("det optimum computed when a window is set"),
        };
        let mc_opt = grid.and_then(|g| optimize_mc(&sc, &g, mc.samples, mc.seed));
        let at_det = match &det {
            Some(Ok(d)) if m.det => Some(estimate_net_rate(&sc, d.tau_star, mc.samples, mc.seed)),
            _ => None,
        };
        (Some(mc_opt), at_det)
    };
    OptimumResult {
        det: if m.det { det } else { None },
        mc: mc_opt,
        mc_at_det,
    }
}

/// Optimal training length for every sweep value (SNR or backhaul sweeps).
pub fn run_optimum(spec: &ExperimentSpec) -> Result<RunOutcome, ExperimentError> {
    spec.validate()?;
    if spec.sweep.kind == SweepKind::Tau {
        return Err(ExperimentError::Invalid {
            field: "sweep.kind".into(),
            reason: "optimization sweeps over snr or backhaul, not tau".into(),
        });
    }
    if !(spec.system.coherence > spec.system.users as f64) {
        return Err(ExperimentError::Invalid {
            field: "system.coherence".into(),
            reason: "optimization needs coherence > users".into(),
        });
    }
    let m = &spec.methods;
    let mut outcome = RunOutcome {
        files: vec![],
        rows: 0,
        failed_rows: 0,
        summary: String::new(),
    };
    let simulated_at = if m.det {
        "r_net_mc_bits: simulated at tau_star_det"
    } else {
        "r_net_mc_bits: simulated at tau_star_mc"
    };

    for ser in series(spec) {
        let results: Vec<OptimumResult> = ser
            .points
            .par_iter()
            .map(|p| optimum_point(spec, p))
            .collect();
        let mut failed = 0;
        let rows: Vec<Vec<String>> = ser
            .points
            .iter()
            .zip(&results)
            .map(|(p, r)| {
                let mut errors = Vec::new();
                if let Some(Err(e)) = &r.det {
                    errors.push(e.to_string());
                }
                if let Some(Err(e)) = &r.mc {
                    errors.push(e.to_string());
                }
                if let Some(Err(e)) = &r.mc_at_det {
                    errors.push(e.to_string());
                }
                let st = if errors.is_empty() {
                    "ok".to_string()
                } else {
                    failed += 1;
                    format!("failed: {}", errors.join("; "))
                };
                let det = r.det.as_ref().and_then(|d| d.as_ref().ok());
                let mc = r.mc.as_ref().and_then(|d| d.as_ref().ok());
                let mc_rate = match &r.mc_at_det {
                    Some(Ok(e)) => Some(bits(e)),
                    Some(Err(_)) => None,
                    None => mc.map(|o| {
                        (
                            nats_to_bits(o.net_rate),
                            nats_to_bits(o.net_rate_std_err.unwrap_or(0.0)),
                        )
                    }),
                };
                vec![
                    fmt(p.value),
                    opt(det.map(|d| d.tau_star)),
                    det.and_then(|d| d.tau_star_int)
                        .map(|t| t.to_string())
                        .unwrap_or_default(),
                    det.map(|d| d.clamped.as_str().to_string())
                        .unwrap_or_default(),
                    opt(mc.map(|o| o.tau_star)),
                    opt(det.map(|d| nats_to_bits(d.net_rate))),
                    opt(mc_rate.map(|b| b.0)),
                    opt(mc_rate.map(|b| b.1)),
                    if m.mc {
                        spec.mc.seed.to_string()
                    } else {
                        String::new()
                    },
                    st,
                ]
            })
            .collect();

        let path = output_path(spec, ser.backhaul);
        let extra = [
            simulated_at.to_string(),
            format!("tol-tau: {}", fmt(spec.optimize.tol_tau)),
            match spec.mc.window {
                Some(w) => format!(
                    "mc-grid: step {} within {} of tau_star_det",
                    fmt(spec.mc.grid_step),
                    fmt(w)
                ),
                None => format!(
                    "mc-grid: step {} over [users, coherence]",
                    fmt(spec.mc.grid_step)
                ),
            },
        ];
        write_file(
            &path,
            header(spec, OPTIMUM_SCHEMA, ser.backhaul, &extra),
            &OPTIMUM_COLUMNS,
            &rows,
        )?;
        let _ = writeln!(
            outcome.summary,
            "wrote {} ({} rows, {} failed)",
            path.display(),
            rows.len(),
            failed
        );
        outcome.rows += rows.len();
        outcome.failed_rows += failed;
        outcome.files.push(path);
    }
    Ok(outcome)
}
