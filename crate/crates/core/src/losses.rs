//! Wasserstein critic and generator objectives with gradient penalty,
//! cycle consistency and identity terms.
//!
//! Batches are slices of `[1, len]` variables. Every function returns a
//! scalar variable so the result can be differentiated by the caller.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{grad, Var};
use crate::tensor::Tensor;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch sizes differ: {0} vs {1}")]
    BatchMismatch(usize, usize),
    #[error("shape mismatch: {0:?} vs {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("critic output does not depend on its input")]
    NotDifferentiable,
    #[error("negative loss weight {field} = {value}")]
    NegativeWeight { field: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub lambda_gp: f64,
    pub lambda_cyc: f64,
    pub lambda_id: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            lambda_gp: 10.0,
            lambda_cyc: 10.0,
            lambda_id: 10.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), LossError> {
        for (field, value) in [
            ("lambda_gp", self.lambda_gp),
            ("lambda_cyc", self.lambda_cyc),
            ("lambda_id", self.lambda_id),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(LossError::NegativeWeight { field, value });
            }
        }
        Ok(())
    }
}

/// Where the gradient penalty evaluates the critic's input gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GpAt {
    /// Random convex combinations of real and fake samples.
    #[default]
    Interpolate,
    /// The fake samples themselves.
    Fake,
}

impl fmt::Display for GpAt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GpAt::Interpolate => "interpolate",
            GpAt::Fake => "fake",
        })
    }
}

impl FromStr for GpAt {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "interpolate" => Ok(GpAt::Interpolate),
            "fake" => Ok(GpAt::Fake),
            other => Err(format!("unknown gp_at `{other}` (expected interpolate or fake)")),
        }
    }
}

/// Anything that scores a `[1, len]` segment with a `[1]` scalar.
pub trait CriticFn {
    fn score(&self, x: &Var) -> Var;
}

/// Anything that maps a `[1, len]` segment to a segment of the same shape.
pub trait GeneratorFn {
    fn translate(&self, x: &Var) -> Var;
}

impl<F: Fn(&Var) -> Var> CriticFn for F {
    fn score(&self, x: &Var) -> Var {
        self(x)
    }
}

/// Wraps a closure as a generator.
pub struct MapGenerator<F>(pub F);

impl<F: Fn(&Var) -> Var> GeneratorFn for MapGenerator<F> {
    fn translate(&self, x: &Var) -> Var {
        (self.0)(x)
    }
}

fn check_pair(a: &[Var], b: &[Var]) -> Result<(), LossError> {
    if a.is_empty() || b.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    if a.len() != b.len() {
        return Err(LossError::BatchMismatch(a.len(), b.len()));
    }
    for (x, y) in a.iter().zip(b) {
        if x.shape() != y.shape() {
            return Err(LossError::ShapeMismatch(x.shape().to_vec(), y.shape().to_vec()));
        }
    }
    Ok(())
}

fn mean_of(terms: Vec<Var>) -> Var {
    let n = terms.len() as f64;
    let mut it = terms.into_iter();
    let first = it.next().expect("non-empty batch");
    it.fold(first, |acc, t| acc.add(&t)).scale(1.0 / n)
}

fn mean_score(critic: &dyn CriticFn, batch: &[Var]) -> Var {
    mean_of(batch.iter().map(|x| critic.score(x).sum()).collect())
}

const NORM_EPS: f64 = 1e-12;

/// `lambda_gp * mean((||grad C(x_hat)||_2 - 1)^2)`, differentiable with
/// respect to the critic's parameters. `eps_seed` seeds the mixing
/// coefficients, one per batch element.
pub fn gradient_penalty(
    critic: &dyn CriticFn,
    real: &[Var],
    fake: &[Var],
    lambda_gp: f64,
    gp_at: GpAt,
    eps_seed: u64,
) -> Result<Var, LossError> {
    check_pair(real, fake)?;
    if lambda_gp == 0.0 {
        return Ok(Var::scalar(0.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(eps_seed);
    let mut terms = Vec::with_capacity(real.len());
    for (r, f) in real.iter().zip(fake) {
        let point = match gp_at {
            GpAt::Interpolate => {
                let eps: f64 = rng.random();
                r.value().zip_map(f.value(), |a, b| eps * a + (1.0 - eps) * b)
            }
            GpAt::Fake => f.value().clone(),
        };
        let x_hat = Var::leaf(point);
        let score = critic.score(&x_hat).sum();
        let g = grad(&score, &[&x_hat], true)
            .pop()
            .flatten()
            .ok_or(LossError::NotDifferentiable)?;
        let norm = g.mul(&g).sum().add_scalar(NORM_EPS).powf(0.5);
        let dev = norm.add_scalar(-1.0);
        terms.push(dev.mul(&dev));
    }
    Ok(mean_of(terms).scale(lambda_gp))
}

/// `E[C(fake)] - E[C(real)] + gp`; minimizing it raises real scores.
pub fn critic_loss(critic: &dyn CriticFn, real: &[Var], fake: &[Var], gp: &Var) -> Result<Var, LossError> {
    check_pair(real, fake)?;
    Ok(mean_score(critic, fake).sub(&mean_score(critic, real)).add(gp))
}

/// `-E[C(translated)]`.
pub fn generator_adversarial_loss(critic: &dyn CriticFn, translated: &[Var]) -> Result<Var, LossError> {
    if translated.is_empty() {
        return Err(LossError::EmptyBatch);
    }
    Ok(mean_score(critic, translated).neg())
}

fn l1_mean(a: &Var, b: &Var) -> Result<Var, LossError> {
    if a.shape() != b.shape() {
        return Err(LossError::ShapeMismatch(a.shape().to_vec(), b.shape().to_vec()));
    }
    Ok(a.sub(b).abs().mean())
}

fn batch_l1(outputs: &[Var], targets: &[Var]) -> Result<Var, LossError> {
    let terms = outputs
        .iter()
        .zip(targets)
        .map(|(o, t)| l1_mean(o, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(mean_of(terms))
}

fn nonempty(u: &[Var], d: &[Var]) -> Result<(), LossError> {
    if u.is_empty() || d.is_empty() {
        Err(LossError::EmptyBatch)
    } else {
        Ok(())
    }
}

/// `lambda_cyc * (mean|G_d2u(G_u2d(u)) - u| + mean|G_u2d(G_d2u(d)) - d|)`.
pub fn cycle_loss(
    g_u2d: &dyn GeneratorFn,
    g_d2u: &dyn GeneratorFn,
    batch_u: &[Var],
    batch_d: &[Var],
    lambda_cyc: f64,
) -> Result<Var, LossError> {
    nonempty(batch_u, batch_d)?;
    let back_u: Vec<Var> = batch_u.iter().map(|u| g_d2u.translate(&g_u2d.translate(u))).collect();
    let back_d: Vec<Var> = batch_d.iter().map(|d| g_u2d.translate(&g_d2u.translate(d))).collect();
    cycle_loss_from(batch_u, batch_d, &back_u, &back_d, lambda_cyc)
}

/// Cycle loss from precomputed round trips.
pub fn cycle_loss_from(
    batch_u: &[Var],
    batch_d: &[Var],
    back_u: &[Var],
    back_d: &[Var],
    lambda_cyc: f64,
) -> Result<Var, LossError> {
    nonempty(batch_u, batch_d)?;
    Ok(batch_l1(back_u, batch_u)?.add(&batch_l1(back_d, batch_d)?).scale(lambda_cyc))
}

/// `lambda_id * (mean|G_d2u(u) - u| + mean|G_u2d(d) - d|)`.
pub fn identity_loss(
    g_u2d: &dyn GeneratorFn,
    g_d2u: &dyn GeneratorFn,
    batch_u: &[Var],
    batch_d: &[Var],
    lambda_id: f64,
) -> Result<Var, LossError> {
    nonempty(batch_u, batch_d)?;
    if lambda_id == 0.0 {
        return Ok(Var::scalar(0.0));
    }
    let same_u: Vec<Var> = batch_u.iter().map(|u| g_d2u.translate(u)).collect();
    let same_d: Vec<Var> = batch_d.iter().map(|d| g_u2d.translate(d)).collect();
    Ok(batch_l1(&same_u, batch_u)?.add(&batch_l1(&same_d, batch_d)?).scale(lambda_id))
}

/// Per-step loss values.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub critic_d: f64,
    pub critic_u: f64,
    pub gen_adv_d: f64,
    pub gen_adv_u: f64,
    pub cycle: f64,
    pub identity: f64,
    pub total_critic: f64,
    pub total_generator: f64,
}

/// Fills in both totals from the six components.
pub fn total_losses(critic_d: f64, critic_u: f64, gen_adv_d: f64, gen_adv_u: f64, cycle: f64, identity: f64) -> LossBreakdown {
    LossBreakdown {
        critic_d,
        critic_u,
        gen_adv_d,
        gen_adv_u,
        cycle,
        identity,
        total_critic: critic_d + critic_u,
        total_generator: gen_adv_d + gen_adv_u + cycle + identity,
    }
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [
            self.critic_d,
            self.critic_u,
            self.gen_adv_d,
            self.gen_adv_u,
            self.cycle,
            self.identity,
            self.total_critic,
            self.total_generator,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Linear critic `w . x`, used as a reference in tests and examples.
pub fn linear_critic(w: Vec<f64>) -> impl Fn(&Var) -> Var {
    let len = w.len();
    let w = std::rc::Rc::new(Tensor::new(vec![1, len], w));
    move |x: &Var| x.mul_const(w.clone()).sum()
}
