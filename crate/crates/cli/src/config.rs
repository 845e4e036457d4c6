//! Run configuration, loaded from TOML with command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vibecycle_core::metrics::FidMode;
use vibecycle_core::networks::{CriticSpec, GeneratorSpec};
use vibecycle_core::synth::SimulationSpec;
use vibecycle_core::training::{Direction, Hyperparams};

use crate::CliError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Spring-mass chain driven by white noise.
    #[default]
    Modal,
    /// Two sinusoid-plus-noise domains.
    Toy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModalConfig {
    pub mass: Vec<f64>,
    /// Per-spring stiffness; spring 1 ties DOF 1 to ground.
    pub stiffness: Vec<f64>,
    pub damping_ratio: f64,
    /// 1-based spring index whose stiffness is reduced in the damaged record.
    pub damage_spring: usize,
    pub damage_factor: f64,
    pub force_dof: usize,
    pub measured_dof: usize,
    pub amplitude: f64,
}

impl Default for ModalConfig {
    fn default() -> Self {
        let k = (2.0 * std::f64::consts::PI * 10.0).powi(2);
        let sim = SimulationSpec::default();
        ModalConfig {
            mass: vec![1.0; 3],
            stiffness: vec![k; 3],
            damping_ratio: 0.02,
            damage_spring: 2,
            damage_factor: 0.6,
            force_dof: sim.force_dof,
            measured_dof: sim.measured_dof,
            amplitude: sim.amplitude,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    pub undamaged_freq_hz: f64,
    pub damaged_freq_hz: f64,
    pub amplitude: f64,
    pub noise_std: f64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            undamaged_freq_hz: 5.0,
            damaged_freq_hz: 12.0,
            amplitude: 1.0,
            noise_std: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
    pub modal: ModalConfig,
    pub toy: ToyConfig,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let sim = SimulationSpec::default();
        SynthConfig {
            kind: SynthKind::Modal,
            duration_s: sim.duration_s,
            sample_rate_hz: sim.sample_rate_hz,
            seed: sim.seed,
            modal: ModalConfig::default(),
            toy: ToyConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub undamaged: PathBuf,
    pub damaged: PathBuf,
    /// Write a numbered checkpoint every this many epochs (0: only the
    /// final one).
    pub checkpoint_every: usize,
    /// Caps the epochs run by one invocation.
    pub max_epochs: Option<usize>,
    pub hyperparams: Hyperparams,
    pub generator: GeneratorSpec,
    pub critic: CriticSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            undamaged: PathBuf::from("undamaged.f64"),
            damaged: PathBuf::from("damaged.f64"),
            checkpoint_every: 0,
            max_epochs: None,
            hyperparams: Hyperparams::default(),
            generator: GeneratorSpec::default(),
            critic: CriticSpec::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateConfig {
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub direction: Option<Direction>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub real: Option<PathBuf>,
    pub fake: Option<PathBuf>,
    pub fid_mode: FidMode,
}

/// Every command's parameters. Sections irrelevant to a command are
/// ignored by it.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub synth: SynthConfig,
    pub train: TrainConfig,
    pub translate: TranslateConfig,
    pub evaluate: EvaluateConfig,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    /// Makes relative dataset paths relative to the config file's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.train.undamaged);
        fix(&mut self.train.damaged);
        for p in [
            &mut self.translate.checkpoint,
            &mut self.translate.input,
            &mut self.evaluate.real,
            &mut self.evaluate.fake,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = toml::from_str("[train.hyperparams]\nepochs = 3\n").unwrap();
        assert_eq!(cfg.train.hyperparams.epochs, 3);
        assert_eq!(cfg.train.hyperparams.critic_iterations, 20);
        assert_eq!(cfg.synth.kind, SynthKind::Modal);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[synth]\nbogus = 1\n").is_err());
    }
}
