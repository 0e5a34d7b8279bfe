//! JSON experiment configuration.

use std::path::Path;

use lazygap_core::activation::Activation;
use lazygap_core::spectra::{make_mg_instance, make_qf_target, DeltaSpec, Measure, TargetSpec};
use lazygap_core::{Matrix, Vector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

/// Step sizes tried by the SGD pilot.
pub const STEP_GRID: [f64; 6] = [0.001, 0.002, 0.005, 0.01, 0.02, 0.03];

pub const PAPER_D: usize = 450;
pub const PAPER_NEURONS: [usize; 7] = [45, 90, 225, 450, 900, 2250, 4500];
pub const PAPER_STEPS_QF: usize = 200_000;
pub const PAPER_STEPS_MG: usize = 140_000;

const MAX_LANDSCAPE_D: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Sweep,
    SgdEvolution,
    Landscape,
    Accept,
    TheoryTable,
}

impl ExperimentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Sweep => "sweep",
            Self::SgdEvolution => "sgd_evolution",
            Self::Landscape => "landscape",
            Self::Accept => "accept",
            Self::TheoryTable => "theory_table",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Qf,
    Mg,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Qf => "qf",
            Self::Mg => "mg",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetConfig {
    #[default]
    Exp1Diag,
    Identity,
    Spiked { rank: usize, scale: f64 },
    Diag { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DeltaConfig {
    #[default]
    Uniform3Diag,
    Zero,
    Diag { values: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaChoice {
    Isotropic,
    Aligned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SgdSection {
    /// Hidden units; defaults to `rho_grid[0] · d`.
    pub n_neurons: Option<usize>,
    /// Fixed step size; when absent a pilot run picks one from `step_grid`.
    pub step_size: Option<f64>,
    pub step_grid: Vec<f64>,
    pub pilot_steps: usize,
    pub n_steps: usize,
    pub batch: usize,
    pub log_every: usize,
    pub decay: f64,
    pub stability_cap: f64,
}

impl Default for SgdSection {
    fn default() -> Self {
        Self {
            n_neurons: None,
            step_size: None,
            step_grid: STEP_GRID.to_vec(),
            pilot_steps: 5_000,
            n_steps: 20_000,
            batch: 100,
            log_every: 1_000,
            decay: 1.0,
            stability_cap: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    pub n_neurons: usize,
    pub directions: usize,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self { n_neurons: 4, directions: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    pub model: ModelChoice,
    pub d: usize,
    #[serde(default = "default_rho_grid")]
    pub rho_grid: Vec<f64>,
    #[serde(default = "default_activation")]
    pub activation: String,
    #[serde(default)]
    pub target: TargetConfig,
    #[serde(default)]
    pub delta: DeltaConfig,
    #[serde(default = "default_gamma")]
    pub gamma: Vec<GammaChoice>,
    #[serde(default)]
    pub sgd: SgdSection,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Seed for the target or mixture instance, shared by all cells.
    #[serde(default)]
    pub instance_seed: u64,
    /// Monte Carlo samples for random-features moments of non-quadratic
    /// activations.
    #[serde(default = "default_mc_samples")]
    pub mc_samples: usize,
    #[serde(default = "default_bayes_samples")]
    pub bayes_samples: usize,
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default)]
    pub output_path: Option<String>,
}

fn default_rho_grid() -> Vec<f64> {
    vec![0.25, 0.5, 1.0, 2.0]
}

fn default_activation() -> String {
    "quadratic".into()
}

fn default_gamma() -> Vec<GammaChoice> {
    vec![GammaChoice::Isotropic, GammaChoice::Aligned]
}

fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}

fn default_mc_samples() -> usize {
    200_000
}

fn default_bayes_samples() -> usize {
    50_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| HarnessError::config("$", e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
    }

    /// Minimal config for `experiment` with every other field defaulted.
    pub fn new(experiment: ExperimentKind, model: ModelChoice, d: usize) -> Self {
        Self {
            experiment: Some(experiment),
            model,
            d,
            rho_grid: default_rho_grid(),
            activation: default_activation(),
            target: TargetConfig::default(),
            delta: DeltaConfig::default(),
            gamma: default_gamma(),
            sgd: SgdSection::default(),
            landscape: LandscapeSection::default(),
            seeds: default_seeds(),
            instance_seed: 0,
            mc_samples: default_mc_samples(),
            bayes_samples: default_bayes_samples(),
            paper_scale: false,
            output_path: None,
        }
    }

    pub fn kind(&self) -> ExperimentKind {
        self.experiment.unwrap_or(ExperimentKind::Sweep)
    }

    /// Fixes the experiment kind from the CLI subcommand.
    pub fn bind_experiment(&mut self, kind: ExperimentKind) -> Result<()> {
        match self.experiment {
            Some(k) if k != kind => Err(HarnessError::config(
                "experiment",
                format!("config declares `{}` but the command runs `{}`", k.as_str(), kind.as_str()),
            )),
            _ => {
                self.experiment = Some(kind);
                Ok(())
            }
        }
    }

    pub fn override_seed(&mut self, seed: u64) {
        self.seeds = vec![seed];
    }

    /// Switches to d = 450, N up to 4500 and full-length SGD runs.
    pub fn apply_paper_scale(&mut self) {
        self.paper_scale = true;
        if self.kind() == ExperimentKind::Landscape {
            return;
        }
        self.d = PAPER_D;
        self.rho_grid = PAPER_NEURONS.iter().map(|&n| n as f64 / PAPER_D as f64).collect();
        self.sgd.n_steps = match self.model {
            ModelChoice::Qf => PAPER_STEPS_QF,
            ModelChoice::Mg => PAPER_STEPS_MG,
        };
        self.sgd.log_every = 2_000;
    }

    /// `N = round(ρ d)` for each grid point.
    pub fn neurons(&self) -> Vec<usize> {
        self.rho_grid.iter().map(|r| (r * self.d as f64).round() as usize).collect()
    }

    pub fn sgd_neurons(&self) -> usize {
        self.sgd.n_neurons.unwrap_or_else(|| self.neurons().first().copied().unwrap_or(1))
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.kind();
        let min_d = if kind == ExperimentKind::Landscape { 1 } else { 2 };
        if self.d < min_d {
            return Err(HarnessError::config("d", format!("must be at least {min_d} (got {})", self.d)));
        }
        if self.rho_grid.is_empty() {
            return Err(HarnessError::config("rho_grid", "must not be empty"));
        }
        for (i, &r) in self.rho_grid.iter().enumerate() {
            if !(r > 0.0) || !r.is_finite() {
                return Err(HarnessError::config(format!("rho_grid[{i}]"), format!("must be positive and finite (got {r})")));
            }
            if (r * self.d as f64).round() < 1.0 {
                return Err(HarnessError::config(format!("rho_grid[{i}]"), format!("rho·d rounds to zero neurons (rho = {r})")));
            }
        }
        Activation::from_name(&self.activation).map_err(|e| HarnessError::config("activation", e.to_string()))?;
        if self.seeds.is_empty() {
            return Err(HarnessError::config("seeds", "must not be empty"));
        }
        if self.gamma.is_empty() {
            return Err(HarnessError::config("gamma", "must list at least one feature covariance"));
        }
        self.validate_target()?;
        self.validate_delta()?;
        if self.activation != "quadratic" && self.mc_samples < 1000 {
            return Err(HarnessError::config("mc_samples", format!("must be at least 1000 (got {})", self.mc_samples)));
        }
        if self.model == ModelChoice::Mg && self.bayes_samples < 2 {
            return Err(HarnessError::config("bayes_samples", "must be at least 2"));
        }
        if kind == ExperimentKind::SgdEvolution {
            self.validate_sgd()?;
        }
        if kind == ExperimentKind::Landscape {
            self.validate_landscape()?;
        }
        Ok(())
    }

    fn validate_target(&self) -> Result<()> {
        match &self.target {
            TargetConfig::Spiked { rank, scale } => {
                if *rank > self.d {
                    return Err(HarnessError::config("target.rank", format!("{rank} exceeds d = {}", self.d)));
                }
                if !scale.is_finite() {
                    return Err(HarnessError::config("target.scale", "must be finite"));
                }
            }
            TargetConfig::Diag { values } => {
                if values.len() != self.d {
                    return Err(HarnessError::config("target.values", format!("expected {} entries, got {}", self.d, values.len())));
                }
                if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                    return Err(HarnessError::config(format!("target.values[{i}]"), "must be finite"));
                }
            }
            TargetConfig::Exp1Diag | TargetConfig::Identity => {}
        }
        Ok(())
    }

    fn validate_delta(&self) -> Result<()> {
        if let DeltaConfig::Diag { values } = &self.delta {
            if values.len() != self.d {
                return Err(HarnessError::config(
                    "delta.values",
                    format!("expected {} entries, got {}", self.d, values.len()),
                ));
            }
            if let Some(i) = values.iter().position(|v| !v.is_finite()) {
                return Err(HarnessError::config(format!("delta.values[{i}]"), "must be finite"));
            }
        }
        Ok(())
    }

    fn validate_sgd(&self) -> Result<()> {
        let s = &self.sgd;
        if let Some(n) = s.n_neurons {
            if n == 0 {
                return Err(HarnessError::config("sgd.n_neurons", "must be at least 1"));
            }
        }
        if let Some(eps) = s.step_size {
            if !(eps > 0.0) || !eps.is_finite() {
                return Err(HarnessError::config("sgd.step_size", format!("must be positive (got {eps})")));
            }
        } else {
            if s.step_grid.is_empty() {
                return Err(HarnessError::config("sgd.step_grid", "must not be empty when step_size is absent"));
            }
            if let Some(i) = s.step_grid.iter().position(|e| !(*e > 0.0) || !e.is_finite()) {
                return Err(HarnessError::config(format!("sgd.step_grid[{i}]"), "must be positive"));
            }
            if s.pilot_steps == 0 {
                return Err(HarnessError::config("sgd.pilot_steps", "must be at least 1"));
            }
        }
        if s.n_steps == 0 {
            return Err(HarnessError::config("sgd.n_steps", "must be at least 1"));
        }
        if s.batch == 0 {
            return Err(HarnessError::config("sgd.batch", "must be at least 1"));
        }
        if s.log_every == 0 {
            return Err(HarnessError::config("sgd.log_every", "must be at least 1"));
        }
        if !(s.decay > 0.0 && s.decay <= 1.0) {
            return Err(HarnessError::config("sgd.decay", format!("must lie in (0, 1] (got {})", s.decay)));
        }
        if !(s.stability_cap > 0.0) {
            return Err(HarnessError::config("sgd.stability_cap", "must be positive"));
        }
        Ok(())
    }

    fn validate_landscape(&self) -> Result<()> {
        if self.model != ModelChoice::Qf {
            return Err(HarnessError::config("model", "landscape reports need the qf model"));
        }
        if self.d > MAX_LANDSCAPE_D {
            return Err(HarnessError::config("d", format!("landscape enumeration needs d ≤ {MAX_LANDSCAPE_D} (got {})", self.d)));
        }
        if self.landscape.n_neurons == 0 {
            return Err(HarnessError::config("landscape.n_neurons", "must be at least 1"));
        }
        match &self.target {
            TargetConfig::Spiked { scale, .. } if *scale < 0.0 => {
                Err(HarnessError::config("target.scale", "landscape needs a PSD target"))
            }
            TargetConfig::Diag { values } => match values.iter().position(|v| *v < 0.0) {
                Some(i) => Err(HarnessError::config(format!("target.values[{i}]"), "landscape needs a PSD target")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn target_spec(&self) -> TargetSpec {
        match &self.target {
            TargetConfig::Exp1Diag => TargetSpec::Exp1Diag,
            TargetConfig::Identity => TargetSpec::Identity,
            TargetConfig::Spiked { rank, scale } => TargetSpec::Spiked { rank: *rank, scale: *scale },
            TargetConfig::Diag { values } => TargetSpec::Custom(diag(values)),
        }
    }

    pub fn delta_spec(&self) -> DeltaSpec {
        match &self.delta {
            DeltaConfig::Uniform3Diag => DeltaSpec::Uniform3Diag,
            DeltaConfig::Zero => DeltaSpec::Custom(Matrix::zeros(self.d, self.d)),
            DeltaConfig::Diag { values } => DeltaSpec::Custom(diag(values)),
        }
    }

    /// The data measure shared by every cell of the run.
    pub fn measure(&self) -> Result<Measure> {
        Ok(match self.model {
            ModelChoice::Qf => Measure::Qf(make_qf_target(self.d, &self.target_spec(), self.instance_seed)?),
            ModelChoice::Mg => Measure::Mg(make_mg_instance(self.d, &self.delta_spec(), self.instance_seed)?),
        })
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON.
    pub fn config_hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_json().as_bytes());
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn diag(values: &[f64]) -> Matrix {
    Matrix::from_diagonal(&Vector::from_vec(values.to_vec()))
}
