//! Experiment configuration documents.

use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use crate::channels::{PauliTransferMatrix, UnitaryMatrix};
use crate::error::{Error, Result};
use crate::estimators::{AnalysisSettings, Asymptote, EstimatorMethod};
use crate::gauge::{GaugeOrigin, GaugeSettings, ScgTarget};
use crate::groups::{cnot, cnot_unitary, TwirlGroupKind};
use crate::noise::{CustomModel, ErrorModel, NoiseModel, Placement};
use crate::pauli::PauliString;
use crate::protocols::{default_depths, ProtocolSpec};

/// How angles given in degrees map onto the exponent `e^{iθ'G}` used internally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AngleConvention {
    /// `e^{iθG/2}`, the usual rotation-gate reading.
    #[default]
    Rotation,
    /// `e^{iθG}`.
    Exponent,
}

impl AngleConvention {
    pub fn radians(self, deg: f64) -> f64 {
        let r = deg.to_radians();
        match self {
            AngleConvention::Rotation => 0.5 * r,
            AngleConvention::Exponent => r,
        }
    }
}

fn default_zz() -> String {
    "ZZ".into()
}
fn default_z() -> String {
    "Z".into()
}
fn default_xz() -> String {
    "XZ".into()
}
fn default_yy() -> String {
    "YY".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum ErrorModelConfig {
    Ideal,
    FixedCoherent {
        theta2_deg: f64,
        theta1_deg: f64,
        #[serde(default = "default_zz")]
        two_qubit_generator: String,
        #[serde(default = "default_z")]
        single_qubit_generator: String,
        #[serde(default)]
        angle_convention: AngleConvention,
    },
    Overrotation {
        delta2: f64,
        delta1: f64,
    },
    Adversarial {
        theta_deg: f64,
        /// `+1` or `-1`: sign of the twirl-gate error relative to the interleaved one.
        sign: f64,
        #[serde(default = "default_xz")]
        interleaved_generator: String,
        #[serde(default = "default_yy")]
        twirl_generator: String,
        #[serde(default)]
        angle_convention: AngleConvention,
    },
    /// Depolarizing channels with the given decay parameters.
    Depolarizing {
        p2: f64,
        #[serde(default = "one")]
        p1: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn generator(s: &str, qubits: usize, path: &str) -> Result<PauliString> {
    let p: PauliString = s.parse().map_err(|_| cfg_err(path, format!("`{s}` is not a Pauli string")))?;
    if p.num_qubits() != qubits {
        return Err(cfg_err(path, format!("expected a {qubits}-qubit Pauli string, got `{s}`")));
    }
    Ok(p)
}

pub(crate) fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config { path: path.to_string(), message: message.into() }
}

impl ErrorModelConfig {
    pub fn to_model(&self) -> Result<ErrorModel> {
        let finite = |x: f64, name: &str| {
            if x.is_finite() {
                Ok(x)
            } else {
                Err(cfg_err(&format!("error_model.{name}"), "must be finite"))
            }
        };
        Ok(match self {
            ErrorModelConfig::Ideal => ErrorModel::Ideal,
            ErrorModelConfig::FixedCoherent {
                theta2_deg,
                theta1_deg,
                two_qubit_generator,
                single_qubit_generator,
                angle_convention,
            } => ErrorModel::FixedCoherent {
                two_qubit_generator: generator(two_qubit_generator, 2, "error_model.two_qubit_generator")?,
                theta2: angle_convention.radians(finite(*theta2_deg, "theta2_deg")?),
                single_qubit_generator: generator(single_qubit_generator, 1, "error_model.single_qubit_generator")?,
                theta1: angle_convention.radians(finite(*theta1_deg, "theta1_deg")?),
            },
            ErrorModelConfig::Overrotation { delta2, delta1 } => {
                ErrorModel::Overrotation { delta2: finite(*delta2, "delta2")?, delta1: finite(*delta1, "delta1")? }
            }
            ErrorModelConfig::Adversarial { theta_deg, sign, interleaved_generator, twirl_generator, angle_convention } => {
                if *sign != 1.0 && *sign != -1.0 {
                    return Err(cfg_err("error_model.sign", "must be 1 or -1"));
                }
                let theta = angle_convention.radians(finite(*theta_deg, "theta_deg")?);
                ErrorModel::Adversarial {
                    interleaved_generator: generator(interleaved_generator, 2, "error_model.interleaved_generator")?,
                    interleaved_theta: theta,
                    twirl_generator: generator(twirl_generator, 2, "error_model.twirl_generator")?,
                    twirl_theta: sign * theta,
                }
            }
            ErrorModelConfig::Depolarizing { p2, p1 } => {
                for (v, name) in [(p2, "p2"), (p1, "p1")] {
                    if !(0.0..=1.0).contains(v) {
                        return Err(cfg_err(&format!("error_model.{name}"), "must lie in [0, 1]"));
                    }
                }
                ErrorModel::Custom(CustomModel {
                    two_qubit: Some(PauliTransferMatrix::depolarizing(4, *p2)),
                    interleaved: None,
                    pulse: Some(PauliTransferMatrix::depolarizing(2, *p1)),
                })
            }
        })
    }

    /// Overrides a named angle parameter, for sweeps.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match (self, name) {
            (ErrorModelConfig::FixedCoherent { theta1_deg, .. }, "theta1_deg") => theta1_deg,
            (ErrorModelConfig::FixedCoherent { theta2_deg, .. }, "theta2_deg") => theta2_deg,
            (ErrorModelConfig::Overrotation { delta1, .. }, "delta1") => delta1,
            (ErrorModelConfig::Overrotation { delta2, .. }, "delta2") => delta2,
            _ => return Err(cfg_err("error_model", format!("parameter `{name}` cannot be swept for this model"))),
        };
        *slot = value;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterleavedGate {
    #[default]
    Cnot,
    /// CNOT with control and target swapped.
    CnotReversed,
}

impl InterleavedGate {
    pub fn unitary(self) -> UnitaryMatrix {
        match self {
            InterleavedGate::Cnot => cnot_unitary(),
            InterleavedGate::CnotReversed => UnitaryMatrix::new(cnot(1)).expect("CNOT is unitary"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub group: TwirlGroupKind,
    /// Total shots per experiment, spread over depths; each shot runs on a freshly sampled circuit.
    #[serde(default = "default_shots")]
    pub shots: usize,
    #[serde(default)]
    pub reference_depths: Option<Vec<usize>>,
    #[serde(default)]
    pub interleaved_depths: Option<Vec<usize>>,
}

fn default_shots() -> usize {
    1500
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatorConfig {
    pub method: EstimatorMethod,
    pub asymptote: Asymptote,
    pub model_weights: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig { method: EstimatorMethod::Ratio, asymptote: Asymptote::Fixed, model_weights: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    /// Zero disables the statistical interval.
    pub resamples: usize,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { resamples: 1000, level: 0.95 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GaugeConfig {
    pub enabled: bool,
    #[serde(rename = "N")]
    pub samples: usize,
    #[serde(rename = "M")]
    pub fidelity_samples: usize,
    pub origin: GaugeOrigin,
    pub target: ScgTarget,
}

impl Default for GaugeConfig {
    fn default() -> Self {
        let g = GaugeSettings::default();
        GaugeConfig { enabled: false, samples: g.samples, fidelity_samples: g.fidelity_samples, origin: g.origin, target: g.target }
    }
}

impl GaugeConfig {
    pub fn settings(&self) -> GaugeSettings {
        GaugeSettings { samples: self.samples, fidelity_samples: self.fidelity_samples, origin: self.origin, target: self.target }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct XrbConfig {
    pub enabled: bool,
    /// Random circuits per depth.
    pub circuits: usize,
    pub shots_per_observable: usize,
    pub depths: Vec<usize>,
}

impl Default for XrbConfig {
    fn default() -> Self {
        XrbConfig { enabled: false, circuits: 100, shots_per_observable: 100, depths: vec![1, 4, 8, 12, 16, 20] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub seed: u64,
    pub error_model: ErrorModelConfig,
    #[serde(default)]
    pub placement: Placement,
    #[serde(default)]
    pub readout_flip: f64,
    #[serde(default)]
    pub interleaved_gate: InterleavedGate,
    pub protocols: Vec<ProtocolConfig>,
    #[serde(default)]
    pub exact: bool,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub gauge: GaugeConfig,
    #[serde(default)]
    pub xrb: XrbConfig,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub threads: Option<usize>,
}

fn check_depths(depths: &[usize], path: &str) -> Result<()> {
    if depths.is_empty() {
        return Err(cfg_err(path, "depth list is empty"));
    }
    if depths[0] < 1 || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(cfg_err(path, "depths must be at least 1 and strictly increasing"));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses and validates a JSON document, reporting the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            cfg_err(if path.is_empty() { "." } else { &path }, e.into_inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.protocols.is_empty() {
            return Err(cfg_err("protocols", "at least one protocol is required"));
        }
        for (i, p) in self.protocols.iter().enumerate() {
            if p.shots == 0 {
                return Err(cfg_err(&format!("protocols[{i}].shots"), "must be positive"));
            }
            for (d, name) in [(&p.reference_depths, "reference_depths"), (&p.interleaved_depths, "interleaved_depths")] {
                if let Some(d) = d {
                    check_depths(d, &format!("protocols[{i}].{name}"))?;
                }
            }
        }
        if !(0.0..=0.5).contains(&self.readout_flip) {
            return Err(cfg_err("readout_flip", "must lie in [0, 0.5]"));
        }
        if !(self.bootstrap.level > 0.0 && self.bootstrap.level < 1.0) {
            return Err(cfg_err("bootstrap.level", "must lie strictly between 0 and 1"));
        }
        if self.gauge.enabled && (self.gauge.samples == 0 || self.gauge.fidelity_samples == 0) {
            return Err(cfg_err("gauge", "N and M must be positive"));
        }
        if self.xrb.enabled {
            check_depths(&self.xrb.depths, "xrb.depths")?;
            if self.xrb.circuits == 0 {
                return Err(cfg_err("xrb.circuits", "must be positive"));
            }
            if self.xrb.shots_per_observable < 2 {
                return Err(cfg_err("xrb.shots_per_observable", "must be at least 2"));
            }
        }
        if self.threads == Some(0) {
            return Err(cfg_err("threads", "must be positive"));
        }
        self.noise_model()?;
        for (i, p) in self.protocols.iter().enumerate() {
            self.protocol_specs(p).map_err(|e| cfg_err(&format!("protocols[{i}]"), e.to_string()))?;
        }
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        NoiseModel::new(self.error_model.to_model()?, self.placement)?.with_readout_flip(self.readout_flip)
    }

    /// Reference and interleaved specs for one protocol entry.
    pub fn protocol_specs(&self, p: &ProtocolConfig) -> Result<(ProtocolSpec, ProtocolSpec)> {
        let depths = |given: &Option<Vec<usize>>, interleaved| given.clone().unwrap_or_else(|| default_depths(p.group, interleaved));
        let reference = ProtocolSpec::new(p.group, None, depths(&p.reference_depths, false), p.shots, self.seed)?;
        let interleaved =
            ProtocolSpec::new(p.group, Some(self.interleaved_gate.unitary()), depths(&p.interleaved_depths, true), p.shots, self.seed)?;
        Ok((reference, interleaved))
    }

    pub fn analysis_settings(&self) -> AnalysisSettings {
        AnalysisSettings {
            method: self.estimator.method,
            asymptote: self.estimator.asymptote,
            model_weights: self.estimator.model_weights,
            resamples: self.bootstrap.resamples,
            seed: self.seed,
            level: self.bootstrap.level,
            unitarity: None,
        }
    }

    /// Canonical JSON of the parsed configuration, the basis of the config hash.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"seed": 1, "error_model": {"model": "fixed_coherent", "theta2_deg": 10, "theta1_deg": 1},
        "protocols": [{"group": "clifford"}]}"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let c = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(c.protocols[0].shots, 1500);
        assert_eq!(c.bootstrap.resamples, 1000);
        match c.error_model.to_model().unwrap() {
            ErrorModel::FixedCoherent { theta2, theta1, .. } => {
                assert!((theta2 - 5f64.to_radians()).abs() < 1e-15);
                assert!((theta1 - 0.5f64.to_radians()).abs() < 1e-15);
            }
            m => panic!("unexpected model {m:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_path() {
        let text = MINIMAL.replace(r#""group": "clifford""#, r#""group": "clifford", "shot": 3"#);
        match ExperimentConfig::from_json(&text) {
            Err(Error::Config { path, .. }) => assert_eq!(path, "protocols[0].shot"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_seed_rejected() {
        let text = MINIMAL.replace(r#""seed": 1,"#, "");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(Error::Config { .. })));
    }

    #[test]
    fn empty_depths_rejected() {
        let text = MINIMAL.replace(r#""group": "clifford""#, r#""group": "clifford", "reference_depths": []"#);
        match ExperimentConfig::from_json(&text) {
            Err(e @ Error::Config { .. }) => {
                assert_eq!(e.exit_code(), 2);
                assert!(e.to_string().contains("protocols[0].reference_depths"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn exponent_convention_keeps_angle() {
        assert!((AngleConvention::Exponent.radians(10.0) - 10f64.to_radians()).abs() < 1e-15);
    }
}
