//! Similarity indicators between a real and a generated record.

use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::{moments, segment, VibrationRecord};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("zero-energy input: normalized cross-correlation undefined")]
    ZeroEnergy,
    #[error("each set needs at least 2 vectors, got {0}")]
    TooFewVectors(usize),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// How the moments entering the Fréchet distance are formed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FidMode {
    /// Every sample is a draw from one scalar distribution.
    #[default]
    Univariate,
    /// Every 1024-sample segment is one observation of a vector distribution.
    Multivariate,
}

impl FromStr for FidMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "univariate" => Ok(FidMode::Univariate),
            "multivariate" => Ok(FidMode::Multivariate),
            other => Err(format!("unknown fid mode {other:?}")),
        }
    }
}

/// Fréchet distance between the sample distributions of two records; lower
/// is more similar. Lengths may differ.
pub fn fid(x: &VibrationRecord, g: &VibrationRecord, mode: FidMode) -> Result<f64, MetricError> {
    match mode {
        FidMode::Univariate => fid_univariate(x.samples(), g.samples()),
        FidMode::Multivariate => {
            let to_obs = |r: &VibrationRecord| -> Vec<Vec<f64>> {
                segment(r).into_iter().map(|s| s.samples().to_vec()).collect()
            };
            frechet_distance(&to_obs(x), &to_obs(g))
        }
    }
}

/// `(mu_x - mu_g)^2 + (sigma_x - sigma_g)^2` with population moments: the
/// one-dimensional case of the Gaussian Fréchet distance.
pub fn fid_univariate(x: &[f64], g: &[f64]) -> Result<f64, MetricError> {
    if x.is_empty() || g.is_empty() {
        return Err(MetricError::Empty);
    }
    let a = moments(x);
    let b = moments(g);
    Ok((a.mean - b.mean).powi(2) + (a.std - b.std).powi(2))
}

/// `|mu_x - mu_g|^2 + Tr(C_x + C_g - 2 (C_x C_g)^{1/2})` over vector
/// observations, population covariances.
pub fn frechet_distance(xs: &[Vec<f64>], gs: &[Vec<f64>]) -> Result<f64, MetricError> {
    let (mx, cx) = mean_and_cov(xs)?;
    let (mg, cg) = mean_and_cov(gs)?;
    if mx.len() != mg.len() {
        return Err(MetricError::DimensionMismatch(mx.len(), mg.len()));
    }
    let mean_term: f64 = mx.iter().zip(&mg).map(|(a, b)| (a - b).powi(2)).sum();
    // Tr((C_x C_g)^{1/2}) = sum of sqrt eigenvalues of C_x^{1/2} C_g C_x^{1/2}.
    let sx = psd_sqrt(&cx);
    let inner = &sx * &cg * &sx;
    let inner = (&inner + inner.transpose()) * 0.5;
    let cross: f64 = SymmetricEigen::new(inner)
        .eigenvalues
        .iter()
        .map(|l| l.max(0.0).sqrt())
        .sum();
    let value = mean_term + cx.trace() + cg.trace() - 2.0 * cross;
    Ok(value.max(0.0))
}

fn mean_and_cov(obs: &[Vec<f64>]) -> Result<(Vec<f64>, DMatrix<f64>), MetricError> {
    let first = obs.first().ok_or(MetricError::Empty)?;
    let d = first.len();
    if d == 0 {
        return Err(MetricError::Empty);
    }
    if let Some(bad) = obs.iter().find(|o| o.len() != d) {
        return Err(MetricError::DimensionMismatch(d, bad.len()));
    }
    let n = obs.len() as f64;
    let mut mean = vec![0.0; d];
    for o in obs {
        for (m, v) in mean.iter_mut().zip(o) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let centered = DMatrix::from_fn(obs.len(), d, |i, j| obs[i][j] - mean[j]);
    let cov = centered.transpose() * &centered / n;
    Ok((mean, cov))
}

fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

/// Circular cross-correlation and its peak.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossCorrelation {
    /// `r[k] = sum_n x[(n + k) mod N] * y[n]`.
    pub sequence: Vec<f64>,
    pub peak_raw: f64,
    /// `peak_raw / sqrt(sum x^2 * sum y^2)`, in `[-1, 1]`.
    pub peak_normalized: f64,
}

/// Circular cross-correlation computed in the frequency domain:
/// inverse transform of `X * conj(Y)`.
pub fn xcross(x: &[f64], y: &[f64]) -> Result<CrossCorrelation, MetricError> {
    if x.is_empty() || y.is_empty() {
        return Err(MetricError::Empty);
    }
    if x.len() != y.len() {
        return Err(MetricError::LengthMismatch(x.len(), y.len()));
    }
    let ex: f64 = x.iter().map(|v| v * v).sum();
    let ey: f64 = y.iter().map(|v| v * v).sum();
    if ex == 0.0 || ey == 0.0 {
        return Err(MetricError::ZeroEnergy);
    }
    let n = x.len();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut fx: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut fy: Vec<Complex<f64>> = y.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fwd.process(&mut fx);
    fwd.process(&mut fy);
    let mut prod: Vec<Complex<f64>> = fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).collect();
    inv.process(&mut prod);
    let scale = 1.0 / n as f64;
    let sequence: Vec<f64> = prod.iter().map(|c| c.re * scale).collect();
    let peak_raw = sequence.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let peak_normalized = peak_raw / (ex * ey).sqrt();
    Ok(CrossCorrelation {
        sequence,
        peak_raw,
        peak_normalized,
    })
}

/// Two-sample Kolmogorov–Smirnov statistic: the largest gap between the two
/// empirical distribution functions.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Distance-based separability index between two point sets.
///
/// Intra-class distance sets are the pairwise Euclidean distances within
/// each set; the between-class set is every cross pair. The index is the
/// mean of the KS statistics between each intra-class set and the
/// between-class set (Guan & Loew's DSI).
pub fn separability_index(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64, MetricError> {
    for set in [xs, ys] {
        if set.len() < 2 {
            return Err(MetricError::TooFewVectors(set.len()));
        }
    }
    let d = xs[0].len();
    if let Some(bad) = xs.iter().chain(ys).find(|v| v.len() != d) {
        return Err(MetricError::DimensionMismatch(d, bad.len()));
    }
    let intra = |set: &[Vec<f64>]| -> Vec<f64> {
        let mut out = Vec::with_capacity(set.len() * (set.len() - 1) / 2);
        for i in 0..set.len() {
            for j in i + 1..set.len() {
                out.push(euclidean(&set[i], &set[j]));
            }
        }
        out
    };
    let icd_x = intra(xs);
    let icd_y = intra(ys);
    let bcd: Vec<f64> = xs
        .iter()
        .flat_map(|a| ys.iter().map(move |b| euclidean(a, b)))
        .collect();
    Ok((ks_statistic(&icd_x, &bcd) + ks_statistic(&icd_y, &bcd)) / 2.0)
}

/// `1 - DSI`: 1 when the sets are statistically inseparable, 0 when fully
/// separated.
pub fn likeliness_score(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64, MetricError> {
    Ok((1.0 - separability_index(xs, ys)?).clamp(0.0, 1.0))
}

/// Likeliness score between the segment sets of two records.
pub fn likeliness_score_records(x: &VibrationRecord, y: &VibrationRecord) -> Result<f64, MetricError> {
    let to_set = |r: &VibrationRecord| -> Vec<Vec<f64>> {
        segment(r).into_iter().map(|s| s.samples().to_vec()).collect()
    };
    likeliness_score(&to_set(x), &to_set(y))
}

/// One-sided power spectrum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    /// `0, df, 2 df, ..., fs / 2` with `df = fs / n`.
    pub freq_hz: Vec<f64>,
    /// `|X_k|^2 / n` for `k = 0..=n/2`, not doubled.
    pub power: Vec<f64>,
}

impl Spectrum {
    pub fn bin_width_hz(&self) -> f64 {
        self.freq_hz.get(1).copied().unwrap_or(0.0)
    }

    /// Total energy with the mirrored negative-frequency bins counted.
    pub fn two_sided_energy(&self, n_samples: usize) -> f64 {
        let last = self.power.len() - 1;
        self.power
            .iter()
            .enumerate()
            .map(|(k, p)| {
                let mirrored = k != 0 && !(n_samples % 2 == 0 && k == last);
                if mirrored {
                    2.0 * p
                } else {
                    *p
                }
            })
            .sum()
    }

    /// Frequency of the strongest bin above 0 Hz, ties toward lower
    /// frequency.
    pub fn dominant_frequency(&self) -> f64 {
        self.peak_in(f64::MIN_POSITIVE, f64::INFINITY).unwrap_or(0.0)
    }

    /// Frequency of the strongest bin within `[lo, hi]` Hz.
    pub fn peak_in(&self, lo: f64, hi: f64) -> Option<f64> {
        let idx: Vec<usize> = (0..self.power.len())
            .filter(|&k| self.freq_hz[k] >= lo && self.freq_hz[k] <= hi)
            .collect();
        let max = idx.iter().map(|&k| self.power[k]).fold(f64::NEG_INFINITY, f64::max);
        // Relative tolerance so rounding noise cannot break exact ties.
        let threshold = max - 1e-9 * max.abs();
        idx.into_iter()
            .find(|&k| self.power[k] >= threshold)
            .map(|k| self.freq_hz[k])
    }
}

/// Full-length, unwindowed periodogram of a signal.
pub fn power_spectrum(samples: &[f64], sample_rate_hz: f64) -> Spectrum {
    let n = samples.len();
    let mut buf: Vec<Complex<f64>> = samples.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    let df = sample_rate_hz / n as f64;
    Spectrum {
        freq_hz: (0..=half).map(|k| k as f64 * df).collect(),
        power: buf[..=half].iter().map(|c| c.norm_sqr() / n as f64).collect(),
    }
}

pub fn fft_power(record: &VibrationRecord) -> Spectrum {
    power_spectrum(record.samples(), record.sample_rate_hz())
}

/// Mean periodogram over consecutive non-overlapping blocks of
/// `block_len` samples (Bartlett's method). Resolution is
/// `sample_rate / block_len`.
pub fn averaged_power(samples: &[f64], sample_rate_hz: f64, block_len: usize) -> Spectrum {
    assert!(block_len > 0 && samples.len() >= block_len, "record shorter than one block");
    let blocks: Vec<Spectrum> = samples
        .chunks_exact(block_len)
        .map(|b| power_spectrum(b, sample_rate_hz))
        .collect();
    let mut power = vec![0.0; blocks[0].power.len()];
    for b in &blocks {
        for (p, q) in power.iter_mut().zip(&b.power) {
            *p += q;
        }
    }
    let count = blocks.len() as f64;
    power.iter_mut().for_each(|p| *p /= count);
    Spectrum {
        freq_hz: blocks[0].freq_hz.clone(),
        power,
    }
}

/// Frequency of the maximum-power bin of the full-length spectrum,
/// excluding 0 Hz, ties toward the lower frequency.
pub fn dominant_frequency(record: &VibrationRecord) -> f64 {
    fft_power(record).dominant_frequency()
}

/// Average ranks, 1-based, with ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation; `None` when either series is constant or the
/// lengths differ or are below 2.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// All indicators for one real/fake pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub fid: f64,
    pub fid_mode: FidMode,
    pub ls: f64,
    pub xcross_peak_raw: f64,
    pub xcross_peak_normalized: f64,
    pub spectrum_real: Spectrum,
    pub spectrum_fake: Spectrum,
}

pub fn evaluate_pair(
    real: &VibrationRecord,
    fake: &VibrationRecord,
    fid_mode: FidMode,
) -> Result<MetricReport, MetricError> {
    if real.len() != fake.len() {
        return Err(MetricError::LengthMismatch(real.len(), fake.len()));
    }
    let xc = xcross(real.samples(), fake.samples())?;
    Ok(MetricReport {
        fid: fid(real, fake, fid_mode)?,
        fid_mode,
        ls: likeliness_score_records(real, fake)?,
        xcross_peak_raw: xc.peak_raw,
        xcross_peak_normalized: xc.peak_normalized,
        spectrum_real: fft_power(real),
        spectrum_fake: fft_power(fake),
    })
}
