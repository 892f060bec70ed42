//! Experiment descriptions: TOML config files and the figure presets.
//!
//! ```toml
//! [system]
//! base_stations = 3
//! antennas = 2
//! users = 3
//! subcarriers = 1
//! coherence = 1000
//! snr_db = 0
//! backhaul = [1, 5, 10]      # one output file per value; `inf` allowed
//! training = 40
//!
//! [path_loss]
//! preset = "paper-3x3"       # or: matrix = [[...], [...]], or distances + exponent
//!
//! [sweep]
//! kind = "snr"               # snr | tau | backhaul
//! min = -10
//! max = 30
//! step = 2
//! append = []                # extra sweep values, e.g. [inf] for backhaul
//!
//! [methods]
//! det = true
//! mc = true
//!
//! [mc]
//! samples = 10000
//! seed = 1
//!
//! [output]
//! prefix = "out/fig3"
//! ```

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ExperimentError;
use crate::monte_carlo::DEFAULT_SAMPLES;
use crate::system_model::{PathLossMatrix, SystemConfig};
use crate::train_opt::DEFAULT_TAU_TOLERANCE;

pub const PRESET_NAMES: [&str; 5] = ["fig3", "fig4", "fig5", "fig6", "topt-snr"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub system: SystemSection,
    pub path_loss: PathLossSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub methods: MethodsSection,
    #[serde(default)]
    pub mc: McSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    #[serde(default = "default_three")]
    pub base_stations: usize,
    #[serde(default = "default_two")]
    pub antennas: usize,
    #[serde(default = "default_three")]
    pub users: usize,
    #[serde(default = "default_one")]
    pub subcarriers: usize,
    #[serde(default = "default_coherence")]
    pub coherence: f64,
    #[serde(default)]
    pub snr_db: f64,
    /// Backhaul capacities in bits per channel use.
    #[serde(default = "default_backhaul")]
    pub backhaul: Vec<f64>,
    /// Training length for sweeps at fixed `tau`.
    #[serde(default = "default_training")]
    pub training: f64,
}

fn default_one() -> usize {
    1
}
fn default_two() -> usize {
    2
}
fn default_three() -> usize {
    3
}
fn default_coherence() -> f64 {
    1000.0
}
fn default_backhaul() -> Vec<f64> {
    vec![f64::INFINITY]
}
fn default_training() -> f64 {
    40.0
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathLossSection {
    pub preset: Option<String>,
    pub matrix: Option<Vec<Vec<f64>>>,
    /// Normalized UT-BS distances, converted with `d^(-exponent)`.
    pub distances: Option<Vec<Vec<f64>>>,
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepKind {
    Snr,
    Tau,
    Backhaul,
}

impl SweepKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKind::Snr => "snr",
            SweepKind::Tau => "tau",
            SweepKind::Backhaul => "backhaul",
        }
    }

    pub fn axis_label(&self) -> &'static str {
        match self {
            SweepKind::Snr => "SNR [dB]",
            SweepKind::Tau => "training length tau [channel uses]",
            SweepKind::Backhaul => "backhaul capacity C [bits/channel use]",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub kind: SweepKind,
    pub min: f64,
    pub max: f64,
    pub step: f64,
    #[serde(default)]
    pub append: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodsSection {
    #[serde(default = "default_true")]
    pub det: bool,
    #[serde(default)]
    pub mc: bool,
}

fn default_true() -> bool {
    true
}

impl Default for MethodsSection {
    fn default() -> Self {
        MethodsSection {
            det: true,
            mc: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Grid spacing of the exhaustive search for the simulated optimum.
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    /// Half-width of the search window around the deterministic optimum;
    /// absent means the full range `[K, T]`.
    #[serde(default)]
    pub window: Option<f64>,
}

fn default_samples() -> usize {
    DEFAULT_SAMPLES
}
fn default_seed() -> u64 {
    1
}
fn default_grid_step() -> f64 {
    1.0
}

impl Default for McSection {
    fn default() -> Self {
        McSection {
            samples: DEFAULT_SAMPLES,
            seed: 1,
            grid_step: 1.0,
            window: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default = "default_tol_tau")]
    pub tol_tau: f64,
}

fn default_tol_tau() -> f64 {
    DEFAULT_TAU_TOLERANCE
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            tol_tau: DEFAULT_TAU_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub prefix: String,
}

fn invalid(field: &str, reason: impl Into<String>) -> ExperimentError {
    ExperimentError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ExperimentSpec {
    /// Parses a TOML config; `origin` names the source in diagnostics.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ExperimentError> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| ExperimentError::Config {
            origin: origin.to_string(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn preset(name: &str) -> Result<Self, ExperimentError> {
        let base_system = |snr_db: f64, backhaul: Vec<f64>, coherence: f64| SystemSection {
            base_stations: 3,
            antennas: 2,
            users: 3,
            subcarriers: 1,
            coherence,
            snr_db,
            backhaul,
            training: 40.0,
        };
        let base_loss = PathLossSection {
            preset: Some("paper-3x3".into()),
            ..Default::default()
        };
        let both = MethodsSection {
            det: true,
            mc: true,
        };
        let spec = match name {
            "fig3" => ExperimentSpec {
                system: base_system(0.0, vec![1.0, 5.0, 10.0], 1000.0),
                path_loss: base_loss,
                sweep: SweepSection {
                    kind: SweepKind::Snr,
                    min: -10.0,
                    max: 30.0,
                    step: 2.0,
                    append: vec![],
                },
                methods: both,
                mc: McSection::default(),
                optimize: OptimizeSection::default(),
                output: OutputSection {
                    prefix: "fig3".into(),
                },
            },
            "fig4" => ExperimentSpec {
                system: base_system(0.0, vec![1.0, 5.0, 10.0], 1000.0),
                path_loss: base_loss,
                sweep: SweepSection {
                    kind: SweepKind::Tau,
                    min: 3.0,
                    max: 300.0,
                    step: 1.0,
                    append: vec![],
                },
                methods: both,
                mc: McSection::default(),
                optimize: OptimizeSection::default(),
                output: OutputSection {
                    prefix: "fig4".into(),
                },
            },
            "fig5" | "fig6" => ExperimentSpec {
                system: base_system(10.0, vec![f64::INFINITY], 1000.0),
                path_loss: base_loss,
                sweep: SweepSection {
                    kind: SweepKind::Backhaul,
                    min: 1.0,
                    max: 30.0,
                    step: 1.0,
                    append: vec![f64::INFINITY],
                },
                methods: if name == "fig5" {
                    MethodsSection::default()
                } else {
                    both
                },
                mc: McSection {
                    window: Some(20.0),
                    ..McSection::default()
                },
                optimize: OptimizeSection::default(),
                output: OutputSection {
                    prefix: name.into(),
                },
            },
            "topt-snr" => ExperimentSpec {
                system: base_system(0.0, vec![1.0], 100.0),
                path_loss: base_loss,
                sweep: SweepSection {
                    kind: SweepKind::Snr,
                    min: -10.0,
                    max: 30.0,
                    step: 2.0,
                    append: vec![],
                },
                methods: both,
                mc: McSection::default(),
                optimize: OptimizeSection::default(),
                output: OutputSection {
                    prefix: "topt-snr".into(),
                },
            },
            other => {
                return Err(invalid(
                    "preset",
                    format!("unknown preset {other:?}; expected one of {PRESET_NAMES:?}"),
                ))
            }
        };
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let s = &self.system;
        if s.backhaul.is_empty() {
            return Err(invalid("system.backhaul", "needs at least one value"));
        }
        if let Some(c) = s.backhaul.iter().find(|c| c.is_nan() || **c <= 0.0) {
            return Err(invalid("system.backhaul", format!("{c} is not positive")));
        }
        if !s.snr_db.is_finite() {
            return Err(invalid("system.snr_db", "must be finite"));
        }
        if !(s.training > 0.0 && s.training <= s.coherence) {
            return Err(invalid(
                "system.training",
                format!("must lie in (0, coherence], got {}", s.training),
            ));
        }
        self.system_config(s.backhaul[0], s.snr_db)
            .validate()
            .map_err(|e| invalid("system", e.to_string()))?;
        let a = self.path_loss_matrix()?;
        if a.rows() != s.base_stations || a.cols() != s.users {
            return Err(invalid(
                "path_loss",
                format!(
                    "matrix is {}x{}, system needs {}x{} (base_stations x users)",
                    a.rows(),
                    a.cols(),
                    s.base_stations,
                    s.users
                ),
            ));
        }

        let w = &self.sweep;
        if !(w.min.is_finite() && w.max.is_finite()) || w.max < w.min {
            return Err(invalid("sweep.max", "range must be finite with max >= min"));
        }
        if !(w.step > 0.0 && w.step.is_finite()) {
            return Err(invalid("sweep.step", "must be positive"));
        }
        let values = self.sweep_values();
        if values.is_empty() {
            return Err(invalid("sweep", "range is empty"));
        }
        match w.kind {
            SweepKind::Tau => {
                if let Some(t) = values.iter().find(|t| !(**t > 0.0 && **t <= s.coherence)) {
                    return Err(invalid(
                        "sweep",
                        format!("training length {t} outside (0, coherence]"),
                    ));
                }
            }
            SweepKind::Backhaul => {
                if let Some(c) = values.iter().find(|c| c.is_nan() || **c <= 0.0) {
                    return Err(invalid("sweep", format!("backhaul {c} is not positive")));
                }
            }
            SweepKind::Snr => {
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("sweep.append", "SNR values must be finite"));
                }
            }
        }
        if !self.methods.det && !self.methods.mc {
            return Err(invalid("methods", "enable at least one of det, mc"));
        }
        if self.methods.mc && self.mc.samples == 0 {
            return Err(invalid("mc.samples", "must be at least 1"));
        }
        if !(self.mc.grid_step > 0.0) {
            return Err(invalid("mc.grid_step", "must be positive"));
        }
        if let Some(wd) = self.mc.window {
            if !(wd >= 0.0) {
                return Err(invalid("mc.window", "must be nonnegative"));
            }
        }
        if !(self.optimize.tol_tau > 0.0) {
            return Err(invalid("optimize.tol_tau", "must be positive"));
        }
        if self.output.prefix.is_empty() {
            return Err(invalid("output.prefix", "must not be empty"));
        }
        Ok(())
    }

    pub fn path_loss_matrix(&self) -> Result<PathLossMatrix, ExperimentError> {
        let p = &self.path_loss;
        let given = [
            p.preset.is_some(),
            p.matrix.is_some(),
            p.distances.is_some(),
        ];
        if given.iter().filter(|g| **g).count() != 1 {
            return Err(invalid(
                "path_loss",
                "give exactly one of preset, matrix, distances",
            ));
        }
        let model = |e: crate::Error| invalid("path_loss", e.to_string());
        if let Some(name) = &p.preset {
            return match name.as_str() {
                "paper-3x3" => Ok(PathLossMatrix::reference()),
                other => Err(invalid(
                    "path_loss.preset",
                    format!("unknown preset {other:?}; expected \"paper-3x3\""),
                )),
            };
        }
        if let Some(rows) = &p.matrix {
            return PathLossMatrix::from_rows(rows).map_err(model);
        }
        let d = p.distances.as_ref().expect("checked above");
        PathLossMatrix::from_distances(d, p.exponent.unwrap_or(3.6)).map_err(model)
    }

    /// Ordered sweep values: the range, then `append`.
    pub fn sweep_values(&self) -> Vec<f64> {
        let w = &self.sweep;
        let mut values = crate::train_opt::tau_grid(w.min, w.max, w.step);
        values.extend_from_slice(&w.append);
        values
    }

    pub(crate) fn system_config(&self, backhaul: f64, snr_db: f64) -> SystemConfig {
        let s = &self.system;
        let mut cfg = SystemConfig {
            base_stations: s.base_stations,
            antennas: s.antennas,
            users: s.users,
            subcarriers: s.subcarriers,
            coherence: s.coherence,
            power: 0.0,
            backhaul,
        };
        cfg.set_snr_db(snr_db);
        cfg
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for name in PRESET_NAMES {
            let spec = ExperimentSpec::preset(name).unwrap();
            spec.validate().unwrap();
        }
        assert!(ExperimentSpec::preset("fig9").is_err());
    }

    #[test]
    fn preset_expands_to_reference_matrix() {
        let spec = ExperimentSpec::preset("fig3").unwrap();
        assert_eq!(
            spec.path_loss_matrix().unwrap(),
            PathLossMatrix::reference()
        );
        assert_eq!(spec.sweep_values().len(), 21);
    }

    #[test]
    fn toml_round_trip_keeps_infinity() {
        let spec = ExperimentSpec::preset("fig5").unwrap();
        let text = spec.to_toml();
        let back = ExperimentSpec::from_toml(&text, "inline").unwrap();
        assert_eq!(back, spec);
        assert!(back.sweep_values().last().unwrap().is_infinite());
        assert_eq!(spec.config_hash(), back.config_hash());
    }

    #[test]
    fn parse_errors_name_the_location() {
        let text = "[system]\nusers = \"three\"\n";
        let err = ExperimentSpec::from_toml(text, "bad.toml").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("bad.toml"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let mut spec = ExperimentSpec::preset("fig3").unwrap();
        spec.sweep.step = 0.0;
        assert!(spec
            .validate()
            .unwrap_err()
            .to_string()
            .contains("sweep.step"));

        let mut spec = ExperimentSpec::preset("fig3").unwrap();
        spec.path_loss.matrix = Some(vec![vec![1.0]]);
        assert!(spec.validate().is_err());

        let mut spec = ExperimentSpec::preset("fig3").unwrap();
        spec.path_loss = PathLossSection {
            matrix: Some(vec![vec![1.0, 0.0, 1.0]; 3]),
            ..Default::default()
        };
        assert!(spec
            .validate()
            .unwrap_err()
            .to_string()
            .contains("path_loss"));

        let mut spec = ExperimentSpec::preset("fig3").unwrap();
        spec.methods = MethodsSection {
            det: false,
            mc: false,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn inline_matrix_and_distances() {
        let text = r#"
[system]
base_stations = 2
antennas = 1
users = 2
backhaul = [inf]

[path_loss]
matrix = [
  [1.0, 0.5],
  [0.5, 1.0],
]

[sweep]
kind = "tau"
min = 2
max = 10
step = 4

[output]
prefix = "x"
"#;
        let spec = ExperimentSpec::from_toml(text, "inline").unwrap();
        assert_eq!(spec.sweep_values(), vec![2.0, 6.0, 10.0]);
        assert_eq!(spec.path_loss_matrix().unwrap().get(0, 1), 0.5);

        let text = text.replace(
            "matrix = [\n  [1.0, 0.5],\n  [0.5, 1.0],\n]",
            "distances = [[1.0, 0.5], [0.5, 1.0]]",
        );
        let spec = ExperimentSpec::from_toml(&text, "inline").unwrap();
        let a = spec.path_loss_matrix().unwrap();
        assert!((a.get(0, 1) - 0.5f64.powf(-3.6)).abs() < 1e-12);
    }
}
