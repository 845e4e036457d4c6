//! Desk-scale vibration datasets.
//!
//! Two generators: a pure tone plus Gaussian noise per domain, and a
//! lumped-mass chain whose modal response to white-noise forcing is
//! integrated exactly. Damage in the chain is a stiffness reduction of one
//! spring, which lowers the natural frequencies the way loosened bolts do.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{DataError, DomainLabel, RecordId, VibrationRecord, SEGMENT_LEN};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("carrier frequency {freq} Hz is at or above Nyquist ({nyquist} Hz)")]
    Nyquist { freq: f64, nyquist: f64 },
    #[error("invalid duration: {0}")]
    Duration(String),
    #[error("invalid parameter {field}: {message}")]
    Parameter { field: &'static str, message: String },
    #[error(transparent)]
    Data(#[from] DataError),
}

fn param(field: &'static str, message: impl Into<String>) -> SynthError {
    SynthError::Parameter {
        field,
        message: message.into(),
    }
}

/// Number of samples for `duration_s` at `rate`, which must be a positive
/// multiple of the segment length.
pub fn sample_count(duration_s: f64, rate: f64) -> Result<usize, SynthError> {
    if !(duration_s.is_finite() && duration_s > 0.0) {
        return Err(SynthError::Duration(format!("duration {duration_s} s must be positive")));
    }
    if !(rate.is_finite() && rate > 0.0) {
        return Err(param("sample_rate_hz", format!("{rate} must be positive")));
    }
    let exact = duration_s * rate;
    let n = exact.round();
    if (exact - n).abs() > 1e-9 * exact.max(1.0) || n < 1.0 || (n as usize) % SEGMENT_LEN != 0 {
        return Err(SynthError::Duration(format!(
            "{duration_s} s at {rate} Hz gives {exact} samples, not a positive multiple of {SEGMENT_LEN}"
        )));
    }
    Ok(n as usize)
}

/// One domain of the two-tone toy problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyDomainSpec {
    pub carrier_freq_hz: f64,
    pub amplitude: f64,
    pub noise_std: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl ToyDomainSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(self.sample_rate_hz.is_finite() && self.sample_rate_hz > 0.0) {
            return Err(param("sample_rate_hz", "must be positive"));
        }
        if !(self.carrier_freq_hz.is_finite() && self.carrier_freq_hz > 0.0) {
            return Err(param("carrier_freq_hz", "must be positive"));
        }
        let nyquist = self.sample_rate_hz / 2.0;
        if self.carrier_freq_hz >= nyquist {
            return Err(SynthError::Nyquist {
                freq: self.carrier_freq_hz,
                nyquist,
            });
        }
        if !(self.amplitude.is_finite() && self.amplitude > 0.0) {
            return Err(param("amplitude", "must be positive"));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(param("noise_std", "must be non-negative"));
        }
        Ok(())
    }
}

/// `amplitude * sin(2 pi f t) + N(0, noise_std^2)`, reproducible from the seed.
pub fn generate_toy_record(
    spec: &ToyDomainSpec,
    duration_s: f64,
    domain: DomainLabel,
) -> Result<VibrationRecord, SynthError> {
    spec.validate()?;
    let n = sample_count(duration_s, spec.sample_rate_hz)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let w = 2.0 * std::f64::consts::PI * spec.carrier_freq_hz / spec.sample_rate_hz;
    let samples = (0..n)
        .map(|i| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            spec.amplitude * (w * i as f64).sin() + spec.noise_std * noise
        })
        .collect();
    Ok(VibrationRecord::new(RecordId::real(1, domain), spec.sample_rate_hz, samples)?)
}

/// Stiffness reduction of one spring of the chain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Damage {
    /// 1-based spring index; spring 1 ties DOF 1 to ground.
    pub spring: usize,
    /// Multiplier on that spring's stiffness, in `(0, 1]`.
    pub factor: f64,
}

/// A fixed-free spring-mass chain with classical modal damping.
///
/// DOFs and springs are numbered from 1. Spring `i` connects DOF `i - 1`
/// (ground for `i = 1`) to DOF `i`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModalModel {
    mass: Vec<f64>,
    stiffness: Vec<f64>,
    damping_ratio: f64,
    damage: Option<Damage>,
    natural_freqs_hz: Vec<f64>,
    /// Mass-normalized mode shapes; `mode_shapes[mode][dof]`.
    mode_shapes: Vec<Vec<f64>>,
}

/// Chain stiffness matrix for per-spring stiffnesses.
pub fn chain_stiffness(stiffness: &[f64]) -> DMatrix<f64> {
    let n = stiffness.len();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            stiffness[i] + stiffness.get(i + 1).copied().unwrap_or(0.0)
        } else if j == i + 1 {
            -stiffness[j]
        } else if i == j + 1 {
            -stiffness[i]
        } else {
            0.0
        }
    })
}

impl ModalModel {
    pub fn build(
        mass: &[f64],
        stiffness: &[f64],
        damping_ratio: f64,
        damage: Option<Damage>,
    ) -> Result<Self, SynthError> {
        let n = mass.len();
        if n == 0 {
            return Err(param("n_dof", "must be positive"));
        }
        if stiffness.len() != n {
            return Err(param(
                "stiffness",
                format!("{} springs given for {n} DOFs", stiffness.len()),
            ));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(param("mass", "all masses must be positive"));
        }
        if stiffness.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
            return Err(param("stiffness", "all stiffnesses must be positive"));
        }
        if !(damping_ratio > 0.0 && damping_ratio < 1.0) {
            return Err(param("damping_ratio", format!("{damping_ratio} not in (0, 1)")));
        }
        let mut springs = stiffness.to_vec();
        if let Some(d) = damage {
            if d.spring == 0 || d.spring > n {
                return Err(param("damage_dof", format!("spring {} out of range 1..={n}", d.spring)));
            }
            if !(d.factor > 0.0 && d.factor <= 1.0) {
                return Err(param("damage_factor", format!("{} not in (0, 1]", d.factor)));
            }
            springs[d.spring - 1] *= d.factor;
        }

        // M^{-1/2} K M^{-1/2} is symmetric with the same eigenvalues as M^{-1} K.
        let k = chain_stiffness(&springs);
        let inv_sqrt_m: Vec<f64> = mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        let a = DMatrix::from_fn(n, n, |i, j| inv_sqrt_m[i] * k[(i, j)] * inv_sqrt_m[j]);
        let eig = SymmetricEigen::new(a);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

        let mut natural_freqs_hz = Vec::with_capacity(n);
        let mut mode_shapes = Vec::with_capacity(n);
        for &m in &order {
            let lambda = eig.eigenvalues[m];
            if lambda <= 0.0 {
                return Err(param("stiffness", "system is not positive definite"));
            }
            natural_freqs_hz.push(lambda.sqrt() / (2.0 * std::f64::consts::PI));
            let v = eig.eigenvectors.column(m);
            // Sign convention: first nonzero component positive.
            let sign = v.iter().find(|x| x.abs() > 1e-12).map_or(1.0, |x| x.signum());
            mode_shapes.push((0..n).map(|i| sign * v[i] * inv_sqrt_m[i]).collect());
        }

        Ok(ModalModel {
            mass: mass.to_vec(),
            stiffness: stiffness.to_vec(),
            damping_ratio,
            damage,
            natural_freqs_hz,
            mode_shapes,
        })
    }

    /// The desk-scale default: three unit masses, natural frequencies near
    /// 4.5, 12.5 and 18 Hz, 2% damping.
    pub fn desk_scale(damage: Option<Damage>) -> Result<Self, SynthError> {
        let k = (2.0 * std::f64::consts::PI * 10.0).powi(2);
        Self::build(&[1.0; 3], &[k; 3], 0.02, damage)
    }

    pub fn n_dof(&self) -> usize {
        self.mass.len()
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness(&self) -> &[f64] {
        &self.stiffness
    }

    pub fn damping_ratio(&self) -> f64 {
        self.damping_ratio
    }

    pub fn damage(&self) -> Option<Damage> {
        self.damage
    }

    /// Whether the model carries an actual stiffness reduction.
    pub fn is_damaged(&self) -> bool {
        self.damage.is_some_and(|d| d.factor < 1.0)
    }

    /// Undamped natural frequencies, ascending.
    pub fn natural_freqs_hz(&self) -> &[f64] {
        &self.natural_freqs_hz
    }

    pub fn mode_shapes(&self) -> &[Vec<f64>] {
        &self.mode_shapes
    }
}

/// White-noise forcing and measurement setup for [`simulate_response`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    /// 1-based DOF receiving the force.
    pub force_dof: usize,
    /// 1-based DOF whose acceleration is recorded; also used as the joint id.
    pub measured_dof: usize,
    /// Standard deviation of the force samples.
    pub amplitude: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            force_dof: 1,
            measured_dof: 2,
            amplitude: 1.0,
            duration_s: 256.0,
            sample_rate_hz: 1024.0,
            seed: 7,
        }
    }
}

/// Zero-order-hold discretization of `q'' + 2 zeta w q' + w^2 q = u`.
#[derive(Clone, Copy, Debug)]
struct DiscreteOscillator {
    a: [[f64; 2]; 2],
    b: [f64; 2],
    omega: f64,
    zeta: f64,
}

impl DiscreteOscillator {
    fn new(omega: f64, zeta: f64, dt: f64) -> Self {
        let wd = omega * (1.0 - zeta * zeta).sqrt();
        let decay = (-zeta * omega * dt).exp();
        let (s, c) = (wd * dt).sin_cos();
        let zw = zeta * omega;
        // exp(A dt) for A = [[0, 1], [-w^2, -2 zeta w]]
        let a = [
            [decay * (c + zw / wd * s), decay * s / wd],
            [-decay * omega * omega / wd * s, decay * (c - zw / wd * s)],
        ];
        // B_d = A^{-1} (exp(A dt) - I) [0, 1]^T
        let (e01, e11) = (a[0][1], a[1][1] - 1.0);
        let w2 = omega * omega;
        let b = [(-2.0 * zw * e01 - e11) / w2, e01];
        DiscreteOscillator { a, b, omega, zeta }
    }
}

/// Acceleration at `sim.measured_dof` under white-noise force at
/// `sim.force_dof`, by exact per-mode integration and modal superposition.
pub fn simulate_response(
    model: &ModalModel,
    sim: &SimulationSpec,
    domain: DomainLabel,
) -> Result<VibrationRecord, SynthError> {
    let n_dof = model.n_dof();
    if sim.force_dof == 0 || sim.force_dof > n_dof {
        return Err(param("force_dof", format!("{} out of range 1..={n_dof}", sim.force_dof)));
    }
    if sim.measured_dof == 0 || sim.measured_dof > n_dof {
        return Err(param("measured_dof", format!("{} out of range 1..={n_dof}", sim.measured_dof)));
    }
    if !(sim.amplitude.is_finite() && sim.amplitude >= 0.0) {
        return Err(param("amplitude", "must be non-negative"));
    }
    let n = sample_count(sim.duration_s, sim.sample_rate_hz)?;
    let dt = 1.0 / sim.sample_rate_hz;

    let modes: Vec<(DiscreteOscillator, f64, f64)> = model
        .natural_freqs_hz
        .iter()
        .zip(&model.mode_shapes)
        .map(|(&f, shape)| {
            let osc = DiscreteOscillator::new(2.0 * std::f64::consts::PI * f, model.damping_ratio, dt);
            (osc, shape[sim.force_dof - 1], shape[sim.measured_dof - 1])
        })
        .collect();
    let mut state = vec![[0.0f64; 2]; modes.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let mut samples = Vec::with_capacity(n);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let force = sim.amplitude * z;
        let mut acc = 0.0;
        for ((osc, phi_in, phi_out), x) in modes.iter().zip(state.iter_mut()) {
            let u = phi_in * force;
            let qdd = u - 2.0 * osc.zeta * osc.omega * x[1] - osc.omega * osc.omega * x[0];
            acc += phi_out * qdd;
            let q = osc.a[0][0] * x[0] + osc.a[0][1] * x[1] + osc.b[0] * u;
            let qd = osc.a[1][0] * x[0] + osc.a[1][1] * x[1] + osc.b[1] * u;
            *x = [q, qd];
        }
        samples.push(acc);
    }
    let id = RecordId::real(sim.measured_dof as u32, domain);
    Ok(VibrationRecord::new(id, sim.sample_rate_hz, samples)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn single_dof_frequency() {
        let k = (2.0 * PI * 10.0).powi(2);
        let m = ModalModel::build(&[1.0], &[k], 0.02, None).unwrap();
        assert!((m.natural_freqs_hz()[0] - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_dof_matches_hand_eigensolution() {
        let m = ModalModel::build(&[1.0, 1.0], &[1.0, 1.0], 0.02, None).unwrap();
        let omega_sq: Vec<f64> = m.natural_freqs_hz().iter().map(|f| (2.0 * PI * f).powi(2)).collect();
        let s5 = 5.0f64.sqrt();
        assert!((omega_sq[0] - (3.0 - s5) / 2.0).abs() < 1e-9);
        assert!((omega_sq[1] - (3.0 + s5) / 2.0).abs() < 1e-9);
    }

    #[test]
    fn mode_shapes_are_mass_normalized() {
        let m = ModalModel::build(&[1.0, 2.0, 0.5], &[3.0, 1.0, 2.0], 0.02, None).unwrap();
        for shape in m.mode_shapes() {
            let norm: f64 = shape.iter().zip(m.mass()).map(|(p, mm)| p * p * mm).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn damage_lowers_frequencies() {
        let healthy = ModalModel::desk_scale(None).unwrap();
        let damaged = ModalModel::desk_scale(Some(Damage { spring: 2, factor: 0.6 })).unwrap();
        let mut strictly = false;
        for (h, d) in healthy.natural_freqs_hz().iter().zip(damaged.natural_freqs_hz()) {
            assert!(d <= h);
            strictly |= d < h;
        }
        assert!(strictly);
        let unit = ModalModel::desk_scale(Some(Damage { spring: 2, factor: 1.0 })).unwrap();
        assert_eq!(unit.natural_freqs_hz(), healthy.natural_freqs_hz());
    }

    #[test]
    fn parameter_validation() {
        assert!(ModalModel::build(&[1.0, -1.0], &[1.0, 1.0], 0.02, None).is_err());
        assert!(ModalModel::build(&[1.0], &[1.0], 1.5, None).is_err());
        let err = ModalModel::build(&[1.0], &[1.0], 0.02, Some(Damage { spring: 1, factor: 1.5 })).unwrap_err();
        assert!(err.to_string().contains("damage_factor"));
        assert!(ModalModel::build(&[1.0], &[1.0], 0.02, Some(Damage { spring: 2, factor: 0.5 })).is_err());
    }

    #[test]
    fn toy_record_is_deterministic_and_validated() {
        let spec = ToyDomainSpec {
            carrier_freq_hz: 10.0,
            amplitude: 1.0,
            noise_std: 0.1,
            sample_rate_hz: 1024.0,
            seed: 3,
        };
        let a = generate_toy_record(&spec, 2.0, DomainLabel::Undamaged).unwrap();
        let b = generate_toy_record(&spec, 2.0, DomainLabel::Undamaged).unwrap();
        assert_eq!(a, b);
        let nyq = ToyDomainSpec { carrier_freq_hz: 600.0, ..spec.clone() };
        assert!(matches!(generate_toy_record(&nyq, 1.0, DomainLabel::Undamaged), Err(SynthError::Nyquist { .. })));
        assert!(matches!(generate_toy_record(&spec, 1.5, DomainLabel::Undamaged), Err(SynthError::Duration(_))));
    }

    #[test]
    fn toy_variance_is_tone_power_plus_noise() {
        // a^2 / 2 + sigma^2
        let spec = ToyDomainSpec {
            carrier_freq_hz: 10.0,
            amplitude: 1.0,
            noise_std: 0.1,
            sample_rate_hz: 1024.0,
            seed: 11,
        };
        let r = generate_toy_record(&spec, 256.0, DomainLabel::Undamaged).unwrap();
        let s = crate::signal::summary_stats(&r);
        assert!((s.variance - 0.51).abs() / 0.51 < 0.05, "variance {}", s.variance);
    }

    #[test]
    fn oscillator_discretization_matches_fine_euler() {
        // Free response from q = 1 after 0.1 s, compared with a very fine
        // semi-implicit Euler integration.
        let (omega, zeta, dt) = (2.0 * PI * 5.0, 0.05, 1.0 / 1024.0);
        let osc = DiscreteOscillator::new(omega, zeta, dt);
        let mut x = [1.0, 0.0];
        for _ in 0..102 {
            x = [osc.a[0][0] * x[0] + osc.a[0][1] * x[1], osc.a[1][0] * x[0] + osc.a[1][1] * x[1]];
        }
        let steps = 102 * 2000;
        let h = dt / 2000.0;
        let (mut q, mut v) = (1.0f64, 0.0f64);
        for _ in 0..steps {
            v += h * (-2.0 * zeta * omega * v - omega * omega * q);
            q += h * v;
        }
        assert!((x[0] - q).abs() < 1e-3, "{} vs {q}", x[0]);
        // Constant unit force settles at the static deflection 1 / w^2.
        let mut y = [0.0, 0.0];
        for _ in 0..200_000 {
            y = [
                osc.a[0][0] * y[0] + osc.a[0][1] * y[1] + osc.b[0],
                osc.a[1][0] * y[0] + osc.a[1][1] * y[1] + osc.b[1],
            ];
        }
        assert!((y[0] - 1.0 / (omega * omega)).abs() < 1e-9);
    }

    #[test]
    fn zero_excitation_gives_silence() {
        let m = ModalModel::desk_scale(None).unwrap();
        let sim = SimulationSpec {
            amplitude: 0.0,
            duration_s: 1.0,
            ..SimulationSpec::default()
        };
        let r = simulate_response(&m, &sim, DomainLabel::Undamaged).unwrap();
        assert!(r.samples().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn unit_damage_factor_is_bit_identical() {
        let sim = SimulationSpec {
            duration_s: 4.0,
            ..SimulationSpec::default()
        };
        let a = simulate_response(&ModalModel::desk_scale(None).unwrap(), &sim, DomainLabel::Undamaged).unwrap();
        let m1 = ModalModel::desk_scale(Some(Damage { spring: 2, factor: 1.0 })).unwrap();
        let b = simulate_response(&m1, &sim, DomainLabel::Undamaged).unwrap();
        assert!(a.samples().iter().zip(b.samples()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn invalid_dofs_rejected() {
        let m = ModalModel::desk_scale(None).unwrap();
        let sim = SimulationSpec {
            measured_dof: 4,
            duration_s: 1.0,
            ..SimulationSpec::default()
        };
        assert!(simulate_response(&m, &sim, DomainLabel::Undamaged).is_err());
        let sim = SimulationSpec {
            duration_s: 0.0,
            ..SimulationSpec::default()
        };
        assert!(simulate_response(&m, &sim, DomainLabel::Undamaged).is_err());
    }
}
