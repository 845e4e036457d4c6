//! 1-D convolutional generators and critics.
//!
//! The generator is an encoder/decoder built from stages. Every stage is a
//! convolution (or transposed convolution) with instance normalization and
//! ReLU, followed by two residual layers that use batch normalization. A
//! pointwise linear projection maps the last stage back to one channel with
//! no output squashing, since inputs are raw accelerations. By default the
//! input is added to the projection output.
//!
//! Layer counting: each convolution or transposed convolution counts as one
//! layer (its normalization and activation are bundled into it), each
//! residual layer counts as one, and the output projection counts as one.
//! A channel plan of five widths gives `9 * 3 + 1 = 28` layers.
//!
//! Training uses batch size 1, so batch normalization statistics are the
//! per-segment statistics over the length axis. They are computed the same
//! way at inference; no running averages are kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{conv1d, conv1d_input_grad, no_grad, Var};
use crate::conv::ConvGeometry;
use crate::losses::{CriticFn, GeneratorFn};
use crate::signal::SEGMENT_LEN;
use crate::tensor::Tensor;

/// Layer count the generator architecture must have.
pub const GENERATOR_LAYERS: usize = 28;
pub const RESIDUAL_LAYERS_PER_STAGE: usize = 2;
const NORM_EPS: f64 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("no layers: channel plan is empty")]
    NoLayers,
    #[error("generator has {0} layers, expected {GENERATOR_LAYERS}")]
    LayerCount(usize),
    #[error("each stage must be followed by exactly {RESIDUAL_LAYERS_PER_STAGE} residual layers, got {0}")]
    ResidualCount(usize),
    #[error("kernel size {0} must be odd and positive")]
    Kernel(usize),
    #[error("stride must be positive")]
    Stride,
    #[error("input length {length} is not divisible by {divisor}")]
    InputLength { length: usize, divisor: usize },
    #[error("channel widths must be positive")]
    Channels,
    #[error("batch normalization is not allowed in a critic")]
    BatchNormInCritic,
    #[error("parameter mismatch: {0}")]
    Params(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Batch,
    Instance,
    None,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    pub input_length: usize,
    /// Widths of the input stage then each downsampling stage; the
    /// upsampling path mirrors them back.
    pub channel_plan: Vec<usize>,
    pub kernel_size: usize,
    /// Stride of the resampling stages.
    pub stride: usize,
    pub residual_per_stage: usize,
    pub residual_norm: Norm,
    pub stage_norm: Norm,
    /// Adds the input to the projection output, so the network learns a
    /// correction to its input.
    pub input_skip: bool,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        GeneratorSpec {
            input_length: SEGMENT_LEN,
            channel_plan: vec![16, 32, 64, 64, 64],
            kernel_size: 15,
            stride: 2,
            residual_per_stage: RESIDUAL_LAYERS_PER_STAGE,
            residual_norm: Norm::Batch,
            stage_norm: Norm::Instance,
            input_skip: true,
        }
    }
}

/// One counted layer of a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerKind {
    Conv { in_ch: usize, out_ch: usize, stride: usize },
    TransposeConv { in_ch: usize, out_ch: usize, stride: usize },
    Residual { channels: usize },
    Projection { in_ch: usize, out_ch: usize },
}

impl LayerKind {
    pub fn is_resampling_or_conv(&self) -> bool {
        matches!(self, LayerKind::Conv { .. } | LayerKind::TransposeConv { .. })
    }
}

/// Ordered list of the generator's counted layers.
pub fn layer_plan(spec: &GeneratorSpec) -> Result<Vec<LayerKind>, NetworkError> {
    let plan = &spec.channel_plan;
    let Some(&first) = plan.first() else {
        return Err(NetworkError::NoLayers);
    };
    let mut layers = Vec::new();
    let push_stage = |layers: &mut Vec<LayerKind>, kind: LayerKind, channels: usize| {
        layers.push(kind);
        for _ in 0..spec.residual_per_stage {
            layers.push(LayerKind::Residual { channels });
        }
    };
    push_stage(&mut layers, LayerKind::Conv { in_ch: 1, out_ch: first, stride: 1 }, first);
    for w in plan.windows(2) {
        let kind = LayerKind::Conv { in_ch: w[0], out_ch: w[1], stride: spec.stride };
        push_stage(&mut layers, kind, w[1]);
    }
    for w in plan.windows(2).rev() {
        let kind = LayerKind::TransposeConv { in_ch: w[1], out_ch: w[0], stride: spec.stride };
        push_stage(&mut layers, kind, w[0]);
    }
    layers.push(LayerKind::Projection { in_ch: first, out_ch: 1 });
    Ok(layers)
}

/// Number of counted layers under the convention in the module docs.
pub fn count_layers(spec: &GeneratorSpec) -> Result<usize, NetworkError> {
    Ok(layer_plan(spec)?.len())
}

/// Checks that every convolution and transposed convolution is followed by
/// exactly the configured number of residual layers, and nothing else.
pub fn residual_pattern_holds(layers: &[LayerKind], per_stage: usize) -> bool {
    layers.iter().enumerate().all(|(i, l)| {
        if !l.is_resampling_or_conv() {
            return true;
        }
        let run = layers[i + 1..]
            .iter()
            .take_while(|l| matches!(l, LayerKind::Residual { .. }))
            .count();
        run == per_stage
    })
}

impl GeneratorSpec {
    pub fn validate(&self) -> Result<(), NetworkError> {
        let n = count_layers(self)?;
        if self.residual_per_stage != RESIDUAL_LAYERS_PER_STAGE {
            return Err(NetworkError::ResidualCount(self.residual_per_stage));
        }
        if n != GENERATOR_LAYERS {
            return Err(NetworkError::LayerCount(n));
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(NetworkError::Kernel(self.kernel_size));
        }
        if self.stride == 0 {
            return Err(NetworkError::Stride);
        }
        if self.channel_plan.contains(&0) {
            return Err(NetworkError::Channels);
        }
        let divisor = self.stride.pow(self.channel_plan.len() as u32 - 1);
        if self.input_length == 0 || self.input_length % divisor != 0 {
            return Err(NetworkError::InputLength {
                length: self.input_length,
                divisor,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticSpec {
    pub input_length: usize,
    /// Output width of each strided convolution.
    pub channel_plan: Vec<usize>,
    pub kernel_size: usize,
    pub stride: usize,
    /// Applied after every convolution except the first.
    pub normalization: Norm,
    pub leaky_slope: f64,
}

impl Default for CriticSpec {
    fn default() -> Self {
        CriticSpec {
            input_length: SEGMENT_LEN,
            channel_plan: vec![16, 32, 64, 64],
            kernel_size: 15,
            stride: 2,
            normalization: Norm::Instance,
            leaky_slope: 0.2,
        }
    }
}

impl CriticSpec {
    pub fn validate(&self) -> Result<(), NetworkError> {
        if self.normalization == Norm::Batch {
            return Err(NetworkError::BatchNormInCritic);
        }
        if self.channel_plan.is_empty() {
            return Err(NetworkError::NoLayers);
        }
        if self.channel_plan.contains(&0) {
            return Err(NetworkError::Channels);
        }
        if self.kernel_size == 0 || self.kernel_size % 2 == 0 {
            return Err(NetworkError::Kernel(self.kernel_size));
        }
        if self.stride == 0 {
            return Err(NetworkError::Stride);
        }
        let divisor = self.stride.pow(self.channel_plan.len() as u32);
        if self.input_length == 0 || self.input_length % divisor != 0 {
            return Err(NetworkError::InputLength {
                length: self.input_length,
                divisor,
            });
        }
        Ok(())
    }

    pub fn uses_batch_norm(&self) -> bool {
        self.normalization == Norm::Batch
    }
}

/// Named parameter tensors of one network, in a fixed order.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    names: Vec<String>,
    tensors: Vec<Tensor>,
}

impl ParamSet {
    fn push(&mut self, name: String, tensor: Tensor) -> usize {
        self.names.push(name);
        self.tensors.push(tensor);
        self.tensors.len() - 1
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn n_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Wraps every tensor as a graph variable.
    pub fn bind(&self, trainable: bool) -> Vec<Var> {
        self.tensors
            .iter()
            .map(|t| if trainable { Var::leaf(t.clone()) } else { Var::constant(t.clone()) })
            .collect()
    }

    /// Replaces the values, keeping names; shapes must match.
    pub fn load(&mut self, other: &ParamSet) -> Result<(), NetworkError> {
        if other.names != self.names {
            return Err(NetworkError::Params("parameter names differ".into()));
        }
        for (name, (a, b)) in self.names.iter().zip(self.tensors.iter().zip(&other.tensors)) {
            if a.shape() != b.shape() {
                return Err(NetworkError::Params(format!(
                    "{name}: shape {:?} vs {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        self.tensors = other.tensors.clone();
        Ok(())
    }
}

struct Init {
    rng: ChaCha8Rng,
}

impl Init {
    fn uniform(&mut self, shape: &[usize], fan_in: usize) -> Tensor {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let n = shape.iter().product();
        Tensor::new(
            shape.to_vec(),
            (0..n).map(|_| self.rng.random_range(-bound..bound)).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug)]
struct NormParams {
    norm: Norm,
    gamma: usize,
    beta: usize,
}

#[derive(Clone, Copy, Debug)]
enum Block {
    Stage {
        transpose: bool,
        weight: usize,
        bias: Option<usize>,
        norm: Option<NormParams>,
        geom: ConvGeometry,
        out_len: usize,
    },
    Residual {
        w1: usize,
        n1: NormParams,
        w2: usize,
        n2: NormParams,
        geom: ConvGeometry,
    },
    Projection {
        weight: usize,
        bias: usize,
    },
}

/// Per-channel standardization over the length axis.
pub fn normalize(x: &Var) -> Var {
    let len = x.shape()[1];
    let centered = x.sub(&x.mean_len().expand_len(len));
    let var = centered.mul(&centered).mean_len();
    centered.mul(&var.add_scalar(NORM_EPS).powf(-0.5).expand_len(len))
}

fn affine_norm(x: &Var, p: &NormParams, params: &[Var]) -> Var {
    let len = x.shape()[1];
    let h = normalize(x);
    h.mul(&params[p.gamma].expand_len(len))
        .add(&params[p.beta].expand_len(len))
}

fn add_bias(x: &Var, bias: &Var) -> Var {
    x.add(&bias.expand_len(x.shape()[1]))
}

fn push_norm(params: &mut ParamSet, prefix: &str, norm: Norm, channels: usize) -> NormParams {
    NormParams {
        norm,
        gamma: params.push(format!("{prefix}.gamma"), Tensor::full(&[channels, 1], 1.0)),
        beta: params.push(format!("{prefix}.beta"), Tensor::zeros(&[channels, 1])),
    }
}

/// Maps a 1-channel segment to a 1-channel segment of the same length.
#[derive(Clone, Debug)]
pub struct Generator {
    spec: GeneratorSpec,
    params: ParamSet,
    blocks: Vec<Block>,
}

impl Generator {
    /// Builds a generator with parameters drawn deterministically from
    /// `seed`. Rejects specs that do not have 28 counted layers.
    pub fn new(spec: &GeneratorSpec, seed: u64) -> Result<Self, NetworkError> {
        spec.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let mut params = ParamSet::default();
        let mut blocks = Vec::new();
        let k = spec.kernel_size;
        let pad = (k - 1) / 2;
        let mut len = spec.input_length;
        let mut stage = 0;
        for layer in layer_plan(spec)? {
            match layer {
                LayerKind::Conv { in_ch, out_ch, stride } | LayerKind::TransposeConv { in_ch, out_ch, stride } => {
                    let transpose = matches!(layer, LayerKind::TransposeConv { .. });
                    let prefix = format!("stage{stage}");
                    stage += 1;
                    let geom = ConvGeometry::new(k, stride, pad);
                    // A transposed convolution stores its weight as the
                    // adjoint forward convolution: [in, out, k].
                    let (shape, fan_in) = if transpose {
                        ([in_ch, out_ch, k], in_ch * k)
                    } else {
                        ([out_ch, in_ch, k], in_ch * k)
                    };
                    let weight = params.push(format!("{prefix}.weight"), init.uniform(&shape, fan_in));
                    let (bias, norm) = if spec.stage_norm == Norm::None {
                        let b = params.push(format!("{prefix}.bias"), init.uniform(&[out_ch, 1], fan_in));
                        (Some(b), None)
                    } else {
                        (None, Some(push_norm(&mut params, &format!("{prefix}.norm"), spec.stage_norm, out_ch)))
                    };
                    len = if transpose { len * stride } else { len / stride };
                    blocks.push(Block::Stage {
                        transpose,
                        weight,
                        bias,
                        norm,
                        geom,
                        out_len: len,
                    });
                }
                LayerKind::Residual { channels } => {
                    let prefix = format!("stage{}.res{}", stage - 1, blocks.len());
                    let fan_in = channels * k;
                    let w1 = params.push(format!("{prefix}.conv1.weight"), init.uniform(&[channels, channels, k], fan_in));
                    let n1 = push_norm(&mut params, &format!("{prefix}.norm1"), spec.residual_norm, channels);
                    let w2 = params.push(format!("{prefix}.conv2.weight"), init.uniform(&[channels, channels, k], fan_in));
                    let n2 = push_norm(&mut params, &format!("{prefix}.norm2"), spec.residual_norm, channels);
                    blocks.push(Block::Residual {
                        w1,
                        n1,
                        w2,
                        n2,
                        geom: ConvGeometry::new(k, 1, pad),
                    });
                }
                LayerKind::Projection { in_ch, out_ch } => {
                    let weight = params.push("head.weight".into(), init.uniform(&[out_ch, in_ch, 1], in_ch));
                    let bias = params.push("head.bias".into(), Tensor::zeros(&[out_ch, 1]));
                    blocks.push(Block::Projection { weight, bias });
                }
            }
        }
        Ok(Generator {
            spec: spec.clone(),
            params,
            blocks,
        })
    }

    /// Rebuilds a generator around saved parameters.
    pub fn from_params(spec: &GeneratorSpec, params: &ParamSet) -> Result<Self, NetworkError> {
        let mut g = Generator::new(spec, 0)?;
        g.params.load(params)?;
        Ok(g)
    }

    pub fn spec(&self) -> &GeneratorSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Differentiable forward pass; `x` has shape `[1, input_length]` and
    /// `params` comes from [`ParamSet::bind`].
    pub fn forward(&self, x: &Var, params: &[Var]) -> Var {
        assert_eq!(x.shape(), &[1, self.spec.input_length], "generator input shape");
        let mut h = x.clone();
        for block in &self.blocks {
            h = match *block {
                Block::Stage {
                    transpose,
                    weight,
                    bias,
                    norm,
                    geom,
                    out_len,
                } => {
                    let mut y = if transpose {
                        conv1d_input_grad(&h, &params[weight], geom, out_len)
                    } else {
                        conv1d(&h, &params[weight], geom)
                    };
                    if let Some(b) = bias {
                        y = add_bias(&y, &params[b]);
                    }
                    if let Some(n) = norm {
                        y = affine_norm(&y, &n, params);
                    }
                    y.relu()
                }
                Block::Residual { w1, n1, w2, n2, geom } => {
                    let r = conv1d(&h, &params[w1], geom);
                    let r = affine_norm(&r, &n1, params).relu();
                    let r = conv1d(&r, &params[w2], geom);
                    let r = affine_norm(&r, &n2, params);
                    h.add(&r)
                }
                Block::Projection { weight, bias } => {
                    let y = add_bias(&conv1d(&h, &params[weight], ConvGeometry::new(1, 1, 0)), &params[bias]);
                    if self.spec.input_skip {
                        y.add(x)
                    } else {
                        y
                    }
                }
            };
        }
        h
    }

    /// Inference on one segment.
    pub fn translate(&self, samples: &[f64]) -> Vec<f64> {
        no_grad(|| {
            let params = self.params.bind(false);
            self.forward(&Var::constant(Tensor::signal(samples)), &params)
                .value()
                .data()
                .to_vec()
        })
    }

    /// Sets every parameter of every residual layer to zero.
    pub fn zero_residual_layers(&mut self) {
        let mut idx = Vec::new();
        for block in &self.blocks {
            if let Block::Residual { w1, n1, w2, n2, .. } = *block {
                idx.extend([w1, n1.gamma, n1.beta, w2, n2.gamma, n2.beta]);
            }
        }
        for i in idx {
            self.params.tensors[i].data_mut().fill(0.0);
        }
    }

    /// Normalization kinds in forward order, for architecture audits.
    pub fn norms(&self) -> Vec<Norm> {
        let mut out = Vec::new();
        for block in &self.blocks {
            match block {
                Block::Stage { norm, .. } => out.push(norm.map_or(Norm::None, |n| n.norm)),
                Block::Residual { n1, n2, .. } => out.extend([n1.norm, n2.norm]),
                Block::Projection { .. } => out.push(Norm::None),
            }
        }
        out
    }
}

/// Scores a segment with one unbounded scalar.
#[derive(Clone, Debug)]
pub struct Critic {
    spec: CriticSpec,
    params: ParamSet,
    convs: Vec<(usize, Option<usize>, Option<NormParams>)>,
    geom: ConvGeometry,
    head_weight: usize,
    head_bias: usize,
}

impl Critic {
    pub fn new(spec: &CriticSpec, seed: u64) -> Result<Self, NetworkError> {
        spec.validate()?;
        let mut init = Init {
            rng: ChaCha8Rng::seed_from_u64(seed),
        };
        let mut params = ParamSet::default();
        let k = spec.kernel_size;
        let geom = ConvGeometry::new(k, spec.stride, (k - 1) / 2);
        let mut convs = Vec::new();
        let mut in_ch = 1;
        let mut len = spec.input_length;
        for (i, &out_ch) in spec.channel_plan.iter().enumerate() {
            let fan_in = in_ch * k;
            let w = params.push(format!("conv{i}.weight"), init.uniform(&[out_ch, in_ch, k], fan_in));
            let normed = i > 0 && spec.normalization != Norm::None;
            let (bias, norm) = if normed {
                (None, Some(push_norm(&mut params, &format!("conv{i}.norm"), spec.normalization, out_ch)))
            } else {
                (Some(params.push(format!("conv{i}.bias"), init.uniform(&[out_ch, 1], fan_in))), None)
            };
            convs.push((w, bias, norm));
            in_ch = out_ch;
            len /= spec.stride;
        }
        let fan_in = in_ch * len;
        let head_weight = params.push("head.weight".into(), init.uniform(&[in_ch, len], fan_in));
        let head_bias = params.push("head.bias".into(), Tensor::zeros(&[1]));
        Ok(Critic {
            spec: spec.clone(),
            params,
            convs,
            geom,
            head_weight,
            head_bias,
        })
    }

    pub fn from_params(spec: &CriticSpec, params: &ParamSet) -> Result<Self, NetworkError> {
        let mut c = Critic::new(spec, 0)?;
        c.params.load(params)?;
        Ok(c)
    }

    pub fn spec(&self) -> &CriticSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Differentiable score of `x` (shape `[1, input_length]`), shape `[1]`.
    pub fn forward(&self, x: &Var, params: &[Var]) -> Var {
        assert_eq!(x.shape(), &[1, self.spec.input_length], "critic input shape");
        let mut h = x.clone();
        for &(w, bias, norm) in &self.convs {
            h = conv1d(&h, &params[w], self.geom);
            if let Some(b) = bias {
                h = add_bias(&h, &params[b]);
            }
            if let Some(n) = norm {
                h = affine_norm(&h, &n, params);
            }
            h = h.leaky_relu(self.spec.leaky_slope);
        }
        h.mul(&params[self.head_weight]).sum().add(&params[self.head_bias])
    }

    pub fn score(&self, samples: &[f64]) -> f64 {
        no_grad(|| {
            let params = self.params.bind(false);
            self.forward(&Var::constant(Tensor::signal(samples)), &params).item()
        })
    }

    pub fn norms(&self) -> Vec<Norm> {
        self.convs
            .iter()
            .map(|(_, _, n)| n.map_or(Norm::None, |n| n.norm))
            .collect()
    }
}

/// A generator paired with bound parameter variables.
pub struct BoundGenerator<'a> {
    pub net: &'a Generator,
    pub params: &'a [Var],
}

impl GeneratorFn for BoundGenerator<'_> {
    fn translate(&self, x: &Var) -> Var {
        self.net.forward(x, self.params)
    }
}

/// A critic paired with bound parameter variables.
pub struct BoundCritic<'a> {
    pub net: &'a Critic,
    pub params: &'a [Var],
}

impl CriticFn for BoundCritic<'_> {
    fn score(&self, x: &Var) -> Var {
        self.net.forward(x, self.params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::grad;

    pub(crate) fn reduced_generator(len: usize) -> GeneratorSpec {
        GeneratorSpec {
            input_length: len,
            channel_plan: vec![2, 2, 3, 3, 2],
            kernel_size: 3,
            ..GeneratorSpec::default()
        }
    }

    fn reduced_critic(len: usize) -> CriticSpec {
        CriticSpec {
            input_length: len,
            channel_plan: vec![2, 3, 3, 2],
            kernel_size: 3,
            ..CriticSpec::default()
        }
    }

    fn input(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn fd_input_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
        (0..x.len())
            .map(|i| {
                let mut xp = x.to_vec();
                xp[i] += h;
                let mut xm = x.to_vec();
                xm[i] -= h;
                (f(&xp) - f(&xm)) / (2.0 * h)
            })
            .collect()
    }

    fn assert_rel_close(a: &[f64], b: &[f64], rel: f64) {
        let scale = b.iter().map(|v| v.abs()).fold(1e-12, f64::max);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= rel * scale, "{x} vs {y} (scale {scale})");
        }
    }

    #[test]
    fn default_generator_has_28_layers() {
        let spec = GeneratorSpec::default();
        assert_eq!(count_layers(&spec).unwrap(), 28);
        assert!(residual_pattern_holds(&layer_plan(&spec).unwrap(), 2));
    }

    #[test]
    fn single_stage_count_by_hand() {
        // input conv + 2 residual layers + projection
        let spec = GeneratorSpec {
            channel_plan: vec![8],
            ..GeneratorSpec::default()
        };
        assert_eq!(count_layers(&spec).unwrap(), 4);
        assert_eq!(Generator::new(&spec, 0).unwrap_err(), NetworkError::LayerCount(4));
    }

    #[test]
    fn empty_plan_has_no_layers() {
        let spec = GeneratorSpec {
            channel_plan: vec![],
            ..GeneratorSpec::default()
        };
        assert_eq!(count_layers(&spec).unwrap_err().to_string(), "no layers: channel plan is empty");
    }

    #[test]
    fn default_generator_is_shape_preserving() {
        let g = Generator::new(&GeneratorSpec::default(), 1).unwrap();
        let out = g.translate(&vec![0.0; SEGMENT_LEN]);
        assert_eq!(out.len(), SEGMENT_LEN);
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn generator_uses_batch_norm_only_in_residual_layers() {
        let g = Generator::new(&reduced_generator(64), 1).unwrap();
        let norms = g.norms();
        assert_eq!(norms.iter().filter(|n| **n == Norm::Batch).count(), 9 * 2 * 2);
        assert_eq!(norms.iter().filter(|n| **n == Norm::Instance).count(), 9);
    }

    #[test]
    fn initialization_is_seeded() {
        let spec = reduced_generator(64);
        let a = Generator::new(&spec, 5).unwrap();
        let b = Generator::new(&spec, 5).unwrap();
        let c = Generator::new(&spec, 6).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        let ca = Critic::new(&CriticSpec::default(), 1).unwrap();
        let cb = Critic::new(&CriticSpec::default(), 2).unwrap();
        assert_ne!(ca.params(), cb.params());
    }

    #[test]
    fn zeroed_residual_layers_are_identity() {
        let spec = reduced_generator(32);
        let mut g = Generator::new(&spec, 3).unwrap();
        g.zero_residual_layers();
        let params = g.params().bind(false);
        let x = Var::constant(Tensor::new(vec![2, 32], input(64, 4)));
        for block in &g.blocks {
            if let Block::Residual { w1, n1, w2, n2, geom } = *block {
                let r = conv1d(&x, &params[w1], geom);
                let r = affine_norm(&r, &n1, &params).relu();
                let r = conv1d(&r, &params[w2], geom);
                let out = x.add(&affine_norm(&r, &n2, &params));
                assert_eq!(out.value(), x.value());
                return;
            }
        }
        panic!("no residual block");
    }

    #[test]
    fn critic_rejects_batch_norm() {
        let spec = CriticSpec {
            normalization: Norm::Batch,
            ..CriticSpec::default()
        };
        assert_eq!(Critic::new(&spec, 0).unwrap_err(), NetworkError::BatchNormInCritic);
        let c = Critic::new(&CriticSpec::default(), 0).unwrap();
        assert!(!c.norms().contains(&Norm::Batch));
        assert!(c.score(&vec![0.0; SEGMENT_LEN]).is_finite());
    }

    #[test]
    fn generator_input_gradient_matches_finite_differences() {
        let spec = reduced_generator(16);
        let g = Generator::new(&spec, 11).unwrap();
        let x0 = input(16, 12);
        let x = Var::leaf(Tensor::signal(&x0));
        let params = g.params().bind(false);
        let out = g.forward(&x, &params).sum();
        let analytic = grad(&out, &[&x], false)[0].clone().unwrap();
        let f = |xs: &[f64]| g.translate(xs).iter().sum::<f64>();
        assert_rel_close(analytic.value().data(), &fd_input_grad(&f, &x0, 1e-6), 1e-4);
    }

    #[test]
    fn critic_input_gradient_matches_finite_differences() {
        let spec = reduced_critic(64);
        let c = Critic::new(&spec, 21).unwrap();
        let x0 = input(64, 22);
        let x = Var::leaf(Tensor::signal(&x0));
        let score = c.forward(&x, &c.params().bind(false));
        let analytic = grad(&score, &[&x], false)[0].clone().unwrap();
        let f = |xs: &[f64]| c.score(xs);
        assert_rel_close(analytic.value().data(), &fd_input_grad(&f, &x0, 1e-6), 1e-4);
    }

    #[test]
    fn generator_parameter_gradients_exist() {
        let spec = reduced_generator(32);
        let g = Generator::new(&spec, 1).unwrap();
        let params = g.params().bind(true);
        let out = g.forward(&Var::constant(Tensor::signal(&input(32, 2))), &params);
        let loss = out.mul(&out).mean();
        let refs: Vec<&Var> = params.iter().collect();
        let grads = grad(&loss, &refs, false);
        assert!(grads.iter().all(|g| g.as_ref().is_some_and(|g| g.value().is_finite())));
    }
}
