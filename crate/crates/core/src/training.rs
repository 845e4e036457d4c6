//! Adversarial training loop, translation, monitoring and checkpoints.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{grad, no_grad, Var};
use crate::losses::{
    critic_loss, cycle_loss_from, generator_adversarial_loss, gradient_penalty, identity_loss, total_losses, GpAt,
    LossBreakdown, LossError, LossWeights,
};
use crate::metrics::{fid, xcross, FidMode, MetricError};
use crate::networks::{BoundCritic, BoundGenerator, Critic, CriticSpec, Generator, GeneratorSpec, NetworkError};
use crate::optim::{AdamW, AdamWConfig};
use crate::signal::{reassemble, segment, DataError, DomainLabel, Provenance, RecordId, Segment, VibrationRecord};
use crate::tensor::Tensor;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"VCGP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid hyperparameter {field}: {message}")]
    Config { field: &'static str, message: String },
    #[error("empty dataset for the {0} domain")]
    EmptyDataset(DomainLabel),
    #[error("dataset domain is {found}, expected {expected}")]
    WrongDomain { expected: DomainLabel, found: DomainLabel },
    #[error("non-finite {what} at epoch {epoch}, step {step}: {value}")]
    Diverged {
        what: &'static str,
        epoch: usize,
        step: usize,
        value: f64,
    },
    #[error("direction/domain mismatch: {direction} expects a {expected} record, got {found}")]
    DirectionMismatch {
        direction: Direction,
        expected: DomainLabel,
        found: DomainLabel,
    },
    #[error("segment length {found} does not match the generator input length {expected}")]
    SegmentLength { expected: usize, found: usize },
    #[error("not a checkpoint")]
    NotCheckpoint,
    #[error("unsupported checkpoint version {0} (expected {CHECKPOINT_VERSION})")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    U2d,
    D2u,
}

impl Direction {
    pub fn source(self) -> DomainLabel {
        match self {
            Direction::U2d => DomainLabel::Undamaged,
            Direction::D2u => DomainLabel::Damaged,
        }
    }

    pub fn target(self) -> DomainLabel {
        self.source().opposite()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::U2d => "u2d",
            Direction::D2u => "d2u",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "u2d" => Ok(Direction::U2d),
            "d2u" => Ok(Direction::D2u),
            other => Err(format!("unknown direction `{other}` (expected u2d or d2u)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyperparams {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_generators: f64,
    pub lr_critics: f64,
    pub critic_iterations: usize,
    pub weights: LossWeights,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
    pub gp_at: GpAt,
    /// Compute FID and cross-correlation every this many epochs; 0 never.
    pub monitor_every: usize,
    /// When set, both learning rates decay linearly from this epoch
    /// (0-based) towards zero at `epochs`.
    pub lr_decay_from: Option<usize>,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            batch_size: 1,
            epochs: 1000,
            lr_generators: 1e-4,
            lr_critics: 2e-4,
            critic_iterations: 20,
            weights: LossWeights::default(),
            weight_decay: 1e-2,
            beta1: 0.5,
            beta2: 0.9,
            seed: 0,
            gp_at: GpAt::Interpolate,
            monitor_every: 1,
            lr_decay_from: None,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |field, message: &str| {
            Err(TrainError::Config {
                field,
                message: message.to_string(),
            })
        };
        if self.batch_size != 1 {
            return bad("batch_size", "only batch size 1 is supported");
        }
        if !(self.lr_generators > 0.0 && self.lr_generators.is_finite()) {
            return bad("lr_generators", "must be positive");
        }
        if !(self.lr_critics > 0.0 && self.lr_critics.is_finite()) {
            return bad("lr_critics", "must be positive");
        }
        if self.critic_iterations == 0 {
            return bad("critic_iterations", "must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be nonnegative");
        }
        for (field, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(field, "must lie in [0, 1)");
            }
        }
        self.weights.validate()?;
        Ok(())
    }

    /// Learning-rate multiplier for the 0-based epoch `epoch`.
    pub fn lr_factor(&self, epoch: usize) -> f64 {
        match self.lr_decay_from {
            Some(start) if epoch >= start && self.epochs > start => {
                let span = (self.epochs - start + 1) as f64;
                (1.0 - (epoch - start + 1) as f64 / span).max(0.0)
            }
            _ => 1.0,
        }
    }

    fn adamw(&self, lr: f64) -> AdamWConfig {
        AdamWConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamWConfig::new(lr, self.weight_decay)
        }
    }
}

/// The two generators and two critics.
#[derive(Clone, Debug)]
pub struct ModelQuad {
    /// Undamaged to damaged.
    pub g_u2d: Generator,
    /// Damaged to undamaged.
    pub g_d2u: Generator,
    /// Scores damaged-domain realism.
    pub c_d: Critic,
    /// Scores undamaged-domain realism.
    pub c_u: Critic,
}

impl ModelQuad {
    pub fn new(gspec: &GeneratorSpec, cspec: &CriticSpec, seeds: [u64; 4]) -> Result<Self, NetworkError> {
        Ok(ModelQuad {
            g_u2d: Generator::new(gspec, seeds[0])?,
            g_d2u: Generator::new(gspec, seeds[1])?,
            c_d: Critic::new(cspec, seeds[2])?,
            c_u: Critic::new(cspec, seeds[3])?,
        })
    }

    pub fn generator(&self, direction: Direction) -> &Generator {
        match direction {
            Direction::U2d => &self.g_u2d,
            Direction::D2u => &self.g_d2u,
        }
    }

    pub fn generator_spec(&self) -> &GeneratorSpec {
        self.g_u2d.spec()
    }

    pub fn critic_spec(&self) -> &CriticSpec {
        self.c_d.spec()
    }
}

impl PartialEq for ModelQuad {
    fn eq(&self, other: &Self) -> bool {
        self.g_u2d.spec() == other.g_u2d.spec()
            && self.c_d.spec() == other.c_d.spec()
            && self.g_u2d.params() == other.g_u2d.params()
            && self.g_d2u.params() == other.g_d2u.params()
            && self.c_d.params() == other.c_d.params()
            && self.c_u.params() == other.c_u.params()
    }
}

/// Per-epoch summary. Loss values are means over the epoch's updates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub total_critic_loss: f64,
    pub total_generator_loss: f64,
    pub losses: LossBreakdown,
    pub fid_u: Option<f64>,
    pub fid_d: Option<f64>,
    pub xcross_u: Option<f64>,
    pub xcross_d: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Serialize)]
struct MonitorLine<'a> {
    epoch: usize,
    total_critic_loss: f64,
    total_generator_loss: f64,
    losses: &'a LossBreakdown,
    fid_u: Option<f64>,
    fid_d: Option<f64>,
    xcross_u: Option<f64>,
    xcross_d: Option<f64>,
}

impl EpochRecord {
    /// One JSON line with everything except wall time, so logs from two
    /// runs with the same seed compare byte for byte.
    pub fn monitor_line(&self) -> String {
        serde_json::to_string(&MonitorLine {
            epoch: self.epoch,
            total_critic_loss: self.total_critic_loss,
            total_generator_loss: self.total_generator_loss,
            losses: &self.losses,
            fid_u: self.fid_u,
            fid_d: self.fid_d,
            xcross_u: self.xcross_u,
            xcross_d: self.xcross_d,
        })
        .expect("plain data serializes")
    }

    pub fn timing_line(&self) -> String {
        format!("{{\"epoch\":{},\"wall_time_s\":{}}}", self.epoch, self.wall_time_s)
    }
}

/// FID and normalized cross-correlation peaks between real records and
/// their translated counterparts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MonitorValues {
    pub fid_u: f64,
    pub fid_d: f64,
    pub xcross_u: f64,
    pub xcross_d: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateCounters {
    pub generator_updates: u64,
    pub critic_updates: u64,
}

/// Segmented training data for both domains.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub real_u: VibrationRecord,
    pub real_d: VibrationRecord,
    segs_u: Vec<Tensor>,
    segs_d: Vec<Tensor>,
}

impl TrainingData {
    pub fn new(real_u: VibrationRecord, real_d: VibrationRecord) -> Result<Self, TrainError> {
        for (r, expected) in [(&real_u, DomainLabel::Undamaged), (&real_d, DomainLabel::Damaged)] {
            if r.domain() != expected {
                return Err(TrainError::WrongDomain {
                    expected,
                    found: r.domain(),
                });
            }
        }
        let to_tensors = |r: &VibrationRecord| -> Vec<Tensor> {
            segment(r).iter().map(|s| Tensor::signal(s.samples())).collect()
        };
        let segs_u = to_tensors(&real_u);
        let segs_d = to_tensors(&real_d);
        if segs_u.is_empty() {
            return Err(TrainError::EmptyDataset(DomainLabel::Undamaged));
        }
        if segs_d.is_empty() {
            return Err(TrainError::EmptyDataset(DomainLabel::Damaged));
        }
        Ok(TrainingData {
            real_u,
            real_d,
            segs_u,
            segs_d,
        })
    }

    /// Generator updates per epoch.
    pub fn steps_per_epoch(&self) -> usize {
        self.segs_u.len().max(self.segs_d.len())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct RngState {
    seed: [u8; 32],
    stream: u64,
    word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        RngState {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng, TrainError> {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        let pos = self
            .word_pos
            .parse::<u128>()
            .map_err(|e| TrainError::Corrupt(format!("rng position: {e}")))?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

/// Full training state.
#[derive(Clone, Debug)]
pub struct Trainer {
    hp: Hyperparams,
    models: ModelQuad,
    opt_generators: AdamW,
    opt_critics: AdamW,
    rng: ChaCha8Rng,
    epoch: usize,
    counters: UpdateCounters,
    history: Vec<EpochRecord>,
}

fn gen_tensors(m: &ModelQuad) -> Vec<Tensor> {
    m.g_u2d.params().tensors().iter().chain(m.g_d2u.params().tensors()).cloned().collect()
}

fn critic_tensors(m: &ModelQuad) -> Vec<Tensor> {
    m.c_d.params().tensors().iter().chain(m.c_u.params().tensors()).cloned().collect()
}

fn finite_or(value: f64, what: &'static str, epoch: usize, step: usize) -> Result<f64, TrainError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(TrainError::Diverged {
            what,
            epoch,
            step,
            value,
        })
    }
}

fn grads_of(loss: &Var, params: &[Var]) -> Vec<Option<Tensor>> {
    let refs: Vec<&Var> = params.iter().collect();
    grad(loss, &refs, false)
        .into_iter()
        .map(|g| g.map(|g| g.value().clone()))
        .collect()
}

impl Trainer {
    /// Fresh models and optimizers; every random draw derives from `hp.seed`.
    pub fn new(gspec: &GeneratorSpec, cspec: &CriticSpec, hp: &Hyperparams) -> Result<Self, TrainError> {
        hp.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let seeds = [rng.random(), rng.random(), rng.random(), rng.random()];
        let models = ModelQuad::new(gspec, cspec, seeds)?;
        let opt_generators = AdamW::new(hp.adamw(hp.lr_generators), &gen_tensors(&models));
        let opt_critics = AdamW::new(hp.adamw(hp.lr_critics), &critic_tensors(&models));
        Ok(Trainer {
            hp: hp.clone(),
            models,
            opt_generators,
            opt_critics,
            rng,
            epoch: 0,
            counters: UpdateCounters::default(),
            history: Vec::new(),
        })
    }

    pub fn hyperparams(&self) -> &Hyperparams {
        &self.hp
    }

    pub fn models(&self) -> &ModelQuad {
        &self.models
    }

    pub fn into_models(self) -> ModelQuad {
        self.models
    }

    /// Epochs completed so far.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn counters(&self) -> UpdateCounters {
        self.counters
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    /// Changes the epoch budget, e.g. when resuming with a larger target.
    pub fn set_epochs(&mut self, epochs: usize) {
        self.hp.epochs = epochs;
    }

    fn critic_step(&mut self, data: &TrainingData, step: usize) -> Result<(f64, f64), TrainError> {
        let u = Var::constant(data.segs_u[self.rng.random_range(0..data.segs_u.len())].clone());
        let d = Var::constant(data.segs_d[self.rng.random_range(0..data.segs_d.len())].clone());
        let seed_d: u64 = self.rng.random();
        let seed_u: u64 = self.rng.random();
        let m = &self.models;
        let (fake_d, fake_u) = no_grad(|| {
            let pg1 = m.g_u2d.params().bind(false);
            let pg2 = m.g_d2u.params().bind(false);
            (
                Var::constant(m.g_u2d.forward(&u, &pg1).value().clone()),
                Var::constant(m.g_d2u.forward(&d, &pg2).value().clone()),
            )
        });
        let pd = m.c_d.params().bind(true);
        let pu = m.c_u.params().bind(true);
        let cd = BoundCritic { net: &m.c_d, params: &pd };
        let cu = BoundCritic { net: &m.c_u, params: &pu };
        let w = self.hp.weights;
        let gp_d = gradient_penalty(&cd, std::slice::from_ref(&d), std::slice::from_ref(&fake_d), w.lambda_gp, self.hp.gp_at, seed_d)?;
        let gp_u = gradient_penalty(&cu, std::slice::from_ref(&u), std::slice::from_ref(&fake_u), w.lambda_gp, self.hp.gp_at, seed_u)?;
        let loss_d = critic_loss(&cd, &[d], &[fake_d], &gp_d)?;
        let loss_u = critic_loss(&cu, &[u], &[fake_u], &gp_u)?;
        let total = loss_d.add(&loss_u);
        finite_or(total.item(), "critic loss", self.epoch + 1, step)?;
        let all: Vec<Var> = pd.into_iter().chain(pu).collect();
        let grads = grads_of(&total, &all);
        let (cd_params, cu_params) = (&mut self.models.c_d, &mut self.models.c_u);
        let params = cd_params
            .params_mut()
            .tensors_mut()
            .iter_mut()
            .chain(cu_params.params_mut().tensors_mut().iter_mut());
        self.opt_critics.step(params, &grads);
        self.counters.critic_updates += 1;
        Ok((loss_d.item(), loss_u.item()))
    }

    fn generator_step(&mut self, u: &Tensor, d: &Tensor, step: usize) -> Result<LossBreakdown, TrainError> {
        let u = Var::constant(u.clone());
        let d = Var::constant(d.clone());
        let m = &self.models;
        let pg1 = m.g_u2d.params().bind(true);
        let pg2 = m.g_d2u.params().bind(true);
        let pd = m.c_d.params().bind(false);
        let pu = m.c_u.params().bind(false);
        let g_u2d = BoundGenerator { net: &m.g_u2d, params: &pg1 };
        let g_d2u = BoundGenerator { net: &m.g_d2u, params: &pg2 };
        let cd = BoundCritic { net: &m.c_d, params: &pd };
        let cu = BoundCritic { net: &m.c_u, params: &pu };
        let w = self.hp.weights;
        let fake_d = m.g_u2d.forward(&u, &pg1);
        let fake_u = m.g_d2u.forward(&d, &pg2);
        let adv_d = generator_adversarial_loss(&cd, std::slice::from_ref(&fake_d))?;
        let adv_u = generator_adversarial_loss(&cu, std::slice::from_ref(&fake_u))?;
        let back_u = m.g_d2u.forward(&fake_d, &pg2);
        let back_d = m.g_u2d.forward(&fake_u, &pg1);
        let (bu, bd) = (std::slice::from_ref(&u), std::slice::from_ref(&d));
        let cyc = cycle_loss_from(bu, bd, &[back_u], &[back_d], w.lambda_cyc)?;
        let idt = identity_loss(&g_u2d, &g_d2u, bu, bd, w.lambda_id)?;
        let total = adv_d.add(&adv_u).add(&cyc).add(&idt);
        finite_or(total.item(), "generator loss", self.epoch + 1, step)?;
        let all: Vec<Var> = pg1.into_iter().chain(pg2).collect();
        let grads = grads_of(&total, &all);
        let (g1, g2) = (&mut self.models.g_u2d, &mut self.models.g_d2u);
        let params = g1
            .params_mut()
            .tensors_mut()
            .iter_mut()
            .chain(g2.params_mut().tensors_mut().iter_mut());
        self.opt_generators.step(params, &grads);
        self.counters.generator_updates += 1;
        Ok(total_losses(0.0, 0.0, adv_d.item(), adv_u.item(), cyc.item(), idt.item()))
    }

    /// One pass over a fresh shuffle of both domains' segment indices.
    pub fn run_epoch(&mut self, data: &TrainingData) -> Result<EpochRecord, TrainError> {
        let start = Instant::now();
        let factor = self.hp.lr_factor(self.epoch);
        self.opt_generators.config.lr = self.hp.lr_generators * factor;
        self.opt_critics.config.lr = self.hp.lr_critics * factor;
        let mut order_u: Vec<usize> = (0..data.segs_u.len()).collect();
        let mut order_d: Vec<usize> = (0..data.segs_d.len()).collect();
        order_u.shuffle(&mut self.rng);
        order_d.shuffle(&mut self.rng);
        let steps = data.steps_per_epoch();
        let mut sum = LossBreakdown::default();
        for step in 0..steps {
            for _ in 0..self.hp.critic_iterations {
                let (cd, cu) = self.critic_step(data, step)?;
                sum.critic_d += cd;
                sum.critic_u += cu;
            }
            let u = &data.segs_u[order_u[step % order_u.len()]];
            let d = &data.segs_d[order_d[step % order_d.len()]];
            let g = self.generator_step(u, d, step)?;
            sum.gen_adv_d += g.gen_adv_d;
            sum.gen_adv_u += g.gen_adv_u;
            sum.cycle += g.cycle;
            sum.identity += g.identity;
        }
        let nc = (steps * self.hp.critic_iterations) as f64;
        let ng = steps as f64;
        let mean = total_losses(
            sum.critic_d / nc,
            sum.critic_u / nc,
            sum.gen_adv_d / ng,
            sum.gen_adv_u / ng,
            sum.cycle / ng,
            sum.identity / ng,
        );
        self.epoch += 1;
        let monitored = self.hp.monitor_every > 0 && self.epoch % self.hp.monitor_every == 0;
        let values = if monitored {
            Some(monitor(&self.models, &data.real_u, &data.real_d)?)
        } else {
            None
        };
        let record = EpochRecord {
            epoch: self.epoch,
            total_critic_loss: mean.total_critic,
            total_generator_loss: mean.total_generator,
            losses: mean,
            fid_u: values.map(|v| v.fid_u),
            fid_d: values.map(|v| v.fid_d),
            xcross_u: values.map(|v| v.xcross_u),
            xcross_d: values.map(|v| v.xcross_d),
            wall_time_s: start.elapsed().as_secs_f64(),
        };
        self.history.push(record.clone());
        Ok(record)
    }

    /// Runs until `hp.epochs` epochs are complete, calling `on_epoch` after
    /// each one.
    pub fn run(&mut self, data: &TrainingData, on_epoch: &mut dyn FnMut(&EpochRecord)) -> Result<(), TrainError> {
        while self.epoch < self.hp.epochs {
            let record = self.run_epoch(data)?;
            on_epoch(&record);
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            hyperparams: self.hp.clone(),
            models: self.models.clone(),
            opt_generators: self.opt_generators.clone(),
            opt_critics: self.opt_critics.clone(),
            epoch: self.epoch,
            counters: self.counters,
            history: self.history.clone(),
            rng: RngState::capture(&self.rng),
        }
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, TrainError> {
        Ok(Trainer {
            rng: ck.rng.restore()?,
            hp: ck.hyperparams,
            models: ck.models,
            opt_generators: ck.opt_generators,
            opt_critics: ck.opt_critics,
            epoch: ck.epoch,
            counters: ck.counters,
            history: ck.history,
        })
    }
}

/// Trains a fresh model quad on one undamaged and one damaged record.
pub fn train(
    dataset_u: VibrationRecord,
    dataset_d: VibrationRecord,
    gspec: &GeneratorSpec,
    cspec: &CriticSpec,
    hp: &Hyperparams,
    on_epoch: &mut dyn FnMut(&EpochRecord),
) -> Result<(ModelQuad, Vec<EpochRecord>), TrainError> {
    let data = TrainingData::new(dataset_u, dataset_d)?;
    let mut trainer = Trainer::new(gspec, cspec, hp)?;
    trainer.run(&data, on_epoch)?;
    let history = trainer.history.clone();
    Ok((trainer.into_models(), history))
}

/// Segments `record`, maps every segment with `map`, and reassembles the
/// result as a fake record of the direction's target domain.
pub fn translate_with(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    record: &VibrationRecord,
    direction: Direction,
) -> Result<VibrationRecord, TrainError> {
    if record.domain() != direction.source() {
        return Err(TrainError::DirectionMismatch {
            direction,
            expected: direction.source(),
            found: record.domain(),
        });
    }
    let parent = RecordId {
        joint_id: record.joint_id(),
        domain: direction.target(),
        provenance: Provenance::Fake,
    };
    let by = Some(direction.as_str().to_string());
    let segments = segment(record)
        .iter()
        .map(|s| {
            Segment::new(parent, s.sample_rate_hz(), s.index(), map(s.samples())).map(|s| s.with_generated_by(by.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(reassemble(&segments)?)
}

/// Translates a record with the model's generator for `direction`.
pub fn translate(model: &ModelQuad, record: &VibrationRecord, direction: Direction) -> Result<VibrationRecord, TrainError> {
    let g = model.generator(direction);
    let expected = g.spec().input_length;
    if expected != crate::signal::SEGMENT_LEN {
        return Err(TrainError::SegmentLength {
            expected,
            found: crate::signal::SEGMENT_LEN,
        });
    }
    translate_with(&|x| g.translate(x), record, direction)
}

/// Translates both real records and compares each fake with the real
/// record of its target domain.
pub fn monitor(model: &ModelQuad, real_u: &VibrationRecord, real_d: &VibrationRecord) -> Result<MonitorValues, TrainError> {
    monitor_with(
        &|x| model.g_u2d.translate(x),
        &|x| model.g_d2u.translate(x),
        real_u,
        real_d,
    )
}

pub fn monitor_with(
    u2d: &dyn Fn(&[f64]) -> Vec<f64>,
    d2u: &dyn Fn(&[f64]) -> Vec<f64>,
    real_u: &VibrationRecord,
    real_d: &VibrationRecord,
) -> Result<MonitorValues, TrainError> {
    let fake_d = translate_with(u2d, real_u, Direction::U2d)?;
    let fake_u = translate_with(d2u, real_d, Direction::D2u)?;
    let pair = |real: &VibrationRecord, fake: &VibrationRecord| -> Result<(f64, f64), TrainError> {
        let n = real.len().min(fake.len());
        let f = fid(real, fake, FidMode::Univariate)?;
        let x = xcross(&real.samples()[..n], &fake.samples()[..n])?;
        Ok((f, x.peak_normalized))
    };
    let (fid_u, xcross_u) = pair(real_u, &fake_u)?;
    let (fid_d, xcross_d) = pair(real_d, &fake_d)?;
    Ok(MonitorValues {
        fid_u,
        fid_d,
        xcross_u,
        xcross_d,
    })
}

/// Everything needed to resume training exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub hyperparams: Hyperparams,
    pub models: ModelQuad,
    pub opt_generators: AdamW,
    pub opt_critics: AdamW,
    pub epoch: usize,
    pub counters: UpdateCounters,
    pub history: Vec<EpochRecord>,
    rng: RngState,
}

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    hyperparams: Hyperparams,
    generator_spec: GeneratorSpec,
    critic_spec: CriticSpec,
    opt_generators: (AdamWConfig, u64),
    opt_critics: (AdamWConfig, u64),
    epoch: usize,
    counters: UpdateCounters,
    history: Vec<EpochRecord>,
    rng: RngState,
}

impl Checkpoint {
    fn tensor_groups(&self) -> [&[Tensor]; 8] {
        let m = &self.models;
        [
            m.g_u2d.params().tensors(),
            m.g_d2u.params().tensors(),
            m.c_d.params().tensors(),
            m.c_u.params().tensors(),
            &self.opt_generators.m,
            &self.opt_generators.v,
            &self.opt_critics.m,
            &self.opt_critics.v,
        ]
    }

    /// Serialized file contents: magic, version, payload length, payload,
    /// CRC-32 of the payload. The payload is a JSON header followed by every
    /// tensor as little-endian f64 in a fixed order.
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta = CheckpointMeta {
            hyperparams: self.hyperparams.clone(),
            generator_spec: self.models.generator_spec().clone(),
            critic_spec: self.models.critic_spec().clone(),
            opt_generators: (self.opt_generators.config, self.opt_generators.step),
            opt_critics: (self.opt_critics.config, self.opt_critics.step),
            epoch: self.epoch,
            counters: self.counters,
            history: self.history.clone(),
            rng: self.rng.clone(),
        };
        let header = serde_json::to_vec(&meta).expect("plain data serializes");
        let mut payload = Vec::new();
        payload.extend_from_slice(&(header.len() as u64).to_le_bytes());
        payload.extend_from_slice(&header);
        for group in self.tensor_groups() {
            for t in group {
                for v in t.data() {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let mut out = Vec::with_capacity(payload.len() + 20);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&self.format_version.to_le_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&payload);
        out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrainError> {
        if bytes.len() < 4 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(TrainError::NotCheckpoint);
        }
        let corrupt = |m: &str| TrainError::Corrupt(m.to_string());
        if bytes.len() < 16 {
            return Err(corrupt("truncated header"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != CHECKPOINT_VERSION {
            return Err(TrainError::Version(version));
        }
        let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        if bytes.len() != 16 + len + 4 {
            return Err(corrupt("length does not match header"));
        }
        let payload = &bytes[16..16 + len];
        let crc = u32::from_le_bytes(bytes[16 + len..].try_into().expect("4 bytes"));
        if crc32fast::hash(payload) != crc {
            return Err(corrupt("checksum mismatch"));
        }
        if payload.len() < 8 {
            return Err(corrupt("truncated payload"));
        }
        let hlen = u64::from_le_bytes(payload[..8].try_into().expect("8 bytes")) as usize;
        let header = payload.get(8..8 + hlen).ok_or_else(|| corrupt("truncated metadata"))?;
        let meta: CheckpointMeta =
            serde_json::from_slice(header).map_err(|e| TrainError::Corrupt(format!("metadata: {e}")))?;
        let mut models = ModelQuad::new(&meta.generator_spec, &meta.critic_spec, [0; 4])?;
        let mut opt_generators = AdamW::new(meta.opt_generators.0, &gen_tensors(&models));
        opt_generators.step = meta.opt_generators.1;
        let mut opt_critics = AdamW::new(meta.opt_critics.0, &critic_tensors(&models));
        opt_critics.step = meta.opt_critics.1;

        let mut rest = &payload[8 + hlen..];
        let mut fill = |tensors: &mut [Tensor]| -> Result<(), TrainError> {
            for t in tensors {
                let n = t.len() * 8;
                if rest.len() < n {
                    return Err(corrupt("truncated tensor data"));
                }
                for (dst, chunk) in t.data_mut().iter_mut().zip(rest[..n].chunks_exact(8)) {
                    *dst = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
                }
                rest = &rest[n..];
            }
            Ok(())
        };
        fill(models.g_u2d.params_mut().tensors_mut())?;
        fill(models.g_d2u.params_mut().tensors_mut())?;
        fill(models.c_d.params_mut().tensors_mut())?;
        fill(models.c_u.params_mut().tensors_mut())?;
        fill(&mut opt_generators.m)?;
        fill(&mut opt_generators.v)?;
        fill(&mut opt_critics.m)?;
        fill(&mut opt_critics.v)?;
        if !rest.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        Ok(Checkpoint {
            format_version: version,
            hyperparams: meta.hyperparams,
            models,
            opt_generators,
            opt_critics,
            epoch: meta.epoch,
            counters: meta.counters,
            history: meta.history,
            rng: meta.rng,
        })
    }
}

pub fn checkpoint_save(path: &Path, state: &Checkpoint) -> Result<(), TrainError> {
    fs::write(path, state.to_bytes())?;
    Ok(())
}

pub fn checkpoint_load(path: &Path) -> Result<Checkpoint, TrainError> {
    Checkpoint::from_bytes(&fs::read(path)?)
}
