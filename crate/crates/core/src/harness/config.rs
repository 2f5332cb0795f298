use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orlicz::{OrliczFunction, OrliczSpec};

use super::corpus::{default_bodies, default_fields, BumpSpec, FieldGenerator, NamedBody, NamedField};

/// Inequality tolerances, all relative.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub affine_ps: f64,
    pub euclidean_ps: f64,
    pub radial_equality: f64,
    pub steiner_inclusion: f64,
    pub steiner_chain: f64,
    pub petty_slack: f64,
    pub petty_ellipse: f64,
    pub sandwich: f64,
    pub bridge: f64,
    pub sl_invariance: f64,
    pub approx_sdr: f64,
    pub certificate: f64,
    pub cone_closed_form: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            affine_ps: 0.02,
            euclidean_ps: 0.02,
            radial_equality: 0.02,
            steiner_inclusion: 0.03,
            steiner_chain: 0.01,
            petty_slack: 0.005,
            petty_ellipse: 0.015,
            sandwich: 0.02,
            bridge: 0.03,
            sl_invariance: 0.015,
            approx_sdr: 0.03,
            certificate: 1e-10,
            cone_closed_form: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSpec {
    pub dim: usize,
    pub resolution: usize,
    pub half_width: f64,
    pub fields: Vec<NamedField>,
    pub bodies: Vec<NamedBody>,
    /// Radial samples per generated body.
    pub body_nodes: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            dim: 2,
            resolution: 128,
            half_width: 1.0,
            fields: default_fields(),
            bodies: default_bodies(),
            body_nodes: 512,
        }
    }
}

/// Knobs of the individual suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteParams {
    /// Random SL(n) matrices per field.
    pub sl_matrices: usize,
    pub sl_max_condition: f64,
    /// Box growth factor for the SL suite, at fixed spacing.
    pub sl_box_growth: usize,
    pub sl_phis: Vec<OrliczSpec>,
    pub chain_steps: usize,
    /// Fields (by name) used for the Steiner volume chain; empty means all.
    pub chain_fields: Vec<String>,
    pub shear_taus: Vec<f64>,
    pub approx_sdr_steps: usize,
    pub approx_sdr_field: FieldGenerator,
    pub rearrangement_levels: usize,
    /// Bodies (by name) for the bridge identity; empty means the first six.
    pub bridge_bodies: Vec<String>,
    /// φ used for the bridge identity; empty means the first four of `phis`.
    pub bridge_phis: Vec<OrliczSpec>,
    pub bridge_resolution: usize,
    pub bridge_nodes: usize,
    pub petty_phis: Vec<OrliczSpec>,
    pub ellipse_aspects: Vec<f64>,
    /// Grid resolutions of the cone-over-disk calibration case, coarse first.
    pub calibration_resolutions: Vec<usize>,
}

impl Default for SuiteParams {
    fn default() -> Self {
        Self {
            sl_matrices: 20,
            sl_max_condition: 4.0,
            sl_box_growth: 2,
            sl_phis: vec![OrliczSpec::Power { p: 2.0 }],
            chain_steps: 10,
            chain_fields: Vec::new(),
            shear_taus: vec![1.0, 2.0, 4.0, 8.0],
            approx_sdr_steps: 40,
            approx_sdr_field: FieldGenerator::Bump(BumpSpec::round([0.3, -0.2], 0.5, 2.0, 1.0)),
            rearrangement_levels: 64,
            bridge_bodies: Vec::new(),
            bridge_phis: Vec::new(),
            bridge_resolution: 256,
            bridge_nodes: 128,
            petty_phis: vec![OrliczSpec::Power { p: 2.0 }],
            ellipse_aspects: vec![1.0, 1.5, 2.0, 3.0],
            calibration_resolutions: vec![128, 256],
        }
    }
}

fn default_phis() -> Vec<OrliczSpec> {
    vec![
        OrliczSpec::Power { p: 1.5 },
        OrliczSpec::Power { p: 2.0 },
        OrliczSpec::Power { p: 3.0 },
        OrliczSpec::AsymmetricPower { p: 2.0, lambda: 0.3 },
        OrliczSpec::AsymmetricPower { p: 2.0, lambda: 0.0 },
        OrliczSpec::Exponential,
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus: CorpusSpec,
    pub phis: Vec<OrliczSpec>,
    pub quadrature_count: usize,
    pub tolerances: Tolerances,
    pub suites: SuiteParams,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 20240601,
            corpus: CorpusSpec::default(),
            phis: default_phis(),
            quadrature_count: 512,
            tolerances: Tolerances::default(),
            suites: SuiteParams::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.corpus.dim == 2 || self.corpus.dim == 3) {
            return Err(Error::Config(format!("corpus dimension {} unsupported", self.corpus.dim)));
        }
        if self.quadrature_count < 8 {
            return Err(Error::Config("quadrature_count must be at least 8".into()));
        }
        if self.phis.is_empty() {
            return Err(Error::Config("at least one φ is required".into()));
        }
        let s = &self.suites;
        for spec in self.phis.iter().chain(&s.bridge_phis).chain(&s.petty_phis).chain(&s.sl_phis) {
            spec.build().map_err(|e| Error::Config(format!("bad φ {spec:?}: {e}")))?;
        }
        let mut names = std::collections::BTreeSet::new();
        for f in &self.corpus.fields {
            if !names.insert(f.name.as_str()) {
                return Err(Error::Config(format!("duplicate field name {}", f.name)));
            }
            f.generator.check(self.corpus.dim)?;
        }
        for name in &self.suites.chain_fields {
            if !self.corpus.fields.iter().any(|f| &f.name == name) {
                return Err(Error::Config(format!("chain field {name} not in the corpus")));
            }
        }
        s.approx_sdr_field.check(self.corpus.dim)?;
        if s.sl_box_growth == 0 || s.sl_max_condition < 1.0 {
            return Err(Error::Config("sl_box_growth must be positive and sl_max_condition at least 1".into()));
        }
        if s.calibration_resolutions.is_empty() {
            return Err(Error::Config("calibration_resolutions must not be empty".into()));
        }
        let mut body_names = std::collections::BTreeSet::new();
        for b in &self.corpus.bodies {
            if !body_names.insert(b.name.as_str()) {
                return Err(Error::Config(format!("duplicate body name {}", b.name)));
            }
        }
        for name in &self.suites.bridge_bodies {
            if !self.corpus.bodies.iter().any(|b| &b.name == name) {
                return Err(Error::Config(format!("bridge body {name} not in the corpus")));
            }
        }
        Ok(())
    }

    pub fn build_phis(&self) -> Result<Vec<OrliczFunction>> {
        self.phis.iter().map(|s| s.build()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.corpus.fields.len(), 20);
        assert_eq!(cfg.build_phis().unwrap().len(), 6);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"seed": 7, "phis": [{"family": "power", "p": 2.0}]}"#).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.phis.len(), 1);
        assert_eq!(cfg.tolerances.affine_ps, 0.02);
    }

    #[test]
    fn unknown_keys_and_bad_phis_are_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"sed": 7}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"phis": [{"family": "power", "p": 0.5}]}"#).is_err());
        assert!(ExperimentConfig::from_json(r#"{"suites": {"chain_fields": ["nope"]}}"#).is_err());
    }
}
