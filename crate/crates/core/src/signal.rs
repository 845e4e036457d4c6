//! Vibration records, their on-disk layout, and 1-second segmentation.
//!
//! A record file is a flat sequence of acceleration samples, either raw
//! little-endian `f64` (`.f64`) or one decimal value per line (`.txt`). A
//! sidecar `.meta` file next to it carries the joint, domain, provenance and
//! sample rate. Samples are stored and returned exactly as read: no scaling,
//! detrending or normalization happens anywhere in this module.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Samples per segment (one second at the canonical sample rate).
pub const SEGMENT_LEN: usize = 1024;
pub const CANONICAL_SAMPLE_RATE_HZ: f64 = 1024.0;
/// 256 seconds at 1024 Hz.
pub const CANONICAL_RECORD_LEN: usize = 262_144;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("record file not found: {0}")]
    NotFound(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("empty record")]
    Empty,
    #[error("length not multiple of segment size: {len} samples is not a multiple of {SEGMENT_LEN}")]
    NotSegmentMultiple { len: usize },
    #[error("non-finite sample at index {index}")]
    NonFinite { index: usize },
    #[error("invalid sample rate {0}")]
    InvalidSampleRate(f64),
    #[error("joint id must be positive")]
    InvalidJoint,
    #[error("parse error in {path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("unsupported record extension {0:?} (expected .f64 or .txt)")]
    UnsupportedFormat(String),
    #[error("binary record size {0} bytes is not a multiple of 8")]
    TruncatedBinary(usize),
    #[error("invalid metadata: {0}")]
    Meta(String),
    #[error("segment has {0} samples, expected {SEGMENT_LEN}")]
    SegmentLength(usize),
    #[error("no segments to reassemble")]
    NoSegments,
    #[error("missing index {0}")]
    MissingIndex(usize),
    #[error("duplicate index {0}")]
    DuplicateIndex(usize),
    #[error("segments come from different records")]
    MixedParents,
}

/// Structural condition of the monitored joint.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum DomainLabel {
    Undamaged = 0,
    Damaged = 1,
}

impl DomainLabel {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DomainLabel::Undamaged),
            1 => Some(DomainLabel::Damaged),
            _ => None,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            DomainLabel::Undamaged => DomainLabel::Damaged,
            DomainLabel::Damaged => DomainLabel::Undamaged,
        }
    }
}

impl From<DomainLabel> for u8 {
    fn from(d: DomainLabel) -> u8 {
        d.code()
    }
}

impl TryFrom<u8> for DomainLabel {
    type Error = String;

    fn try_from(code: u8) -> Result<Self, Self::Error> {
        DomainLabel::from_code(code).ok_or_else(|| format!("domain code {code} is not 0 or 1"))
    }
}

impl fmt::Display for DomainLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainLabel::Undamaged => "undamaged",
            DomainLabel::Damaged => "damaged",
        })
    }
}

impl FromStr for DomainLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "undamaged" | "u" => Ok(DomainLabel::Undamaged),
            "1" | "damaged" | "d" => Ok(DomainLabel::Damaged),
            other => Err(format!("unknown domain {other:?}")),
        }
    }
}

/// Whether a record was measured or produced by a generator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Real,
    Fake,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::Real => "real",
            Provenance::Fake => "fake",
        })
    }
}

impl FromStr for Provenance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Provenance::Real),
            "fake" => Ok(Provenance::Fake),
            other => Err(format!("unknown provenance {other:?}")),
        }
    }
}

/// Identity of a record: which joint, which domain, measured or generated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RecordId {
    pub joint_id: u32,
    pub domain: DomainLabel,
    pub provenance: Provenance,
}

impl RecordId {
    pub fn real(joint_id: u32, domain: DomainLabel) -> Self {
        RecordId {
            joint_id,
            domain,
            provenance: Provenance::Real,
        }
    }
}

/// A full-length acceleration time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VibrationRecord {
    id: RecordId,
    sample_rate_hz: f64,
    /// For fake records, what produced them (e.g. `"u2d"`).
    generated_by: Option<String>,
    samples: Vec<f64>,
}

impl VibrationRecord {
    /// Validates and wraps `samples`. The length must be a positive multiple
    /// of [`SEGMENT_LEN`] and every sample finite.
    pub fn new(id: RecordId, sample_rate_hz: f64, samples: Vec<f64>) -> Result<Self, DataError> {
        if id.joint_id == 0 {
            return Err(DataError::InvalidJoint);
        }
        if !(sample_rate_hz.is_finite() && sample_rate_hz > 0.0) {
            return Err(DataError::InvalidSampleRate(sample_rate_hz));
        }
        if samples.is_empty() {
            return Err(DataError::Empty);
        }
        if samples.len() % SEGMENT_LEN != 0 {
            return Err(DataError::NotSegmentMultiple { len: samples.len() });
        }
        if let Some(index) = samples.iter().position(|x| !x.is_finite()) {
            return Err(DataError::NonFinite { index });
        }
        Ok(VibrationRecord {
            id,
            sample_rate_hz,
            generated_by: None,
            samples,
        })
    }

    /// Marks the record as generator output.
    pub fn into_generated(mut self, by: impl Into<String>) -> Self {
        self.id.provenance = Provenance::Fake;
        self.generated_by = Some(by.into());
        self
    }

    pub fn id(&self) -> RecordId {
        self.id
    }

    pub fn joint_id(&self) -> u32 {
        self.id.joint_id
    }

    pub fn domain(&self) -> DomainLabel {
        self.id.domain
    }

    pub fn provenance(&self) -> Provenance {
        self.id.provenance
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    pub fn generated_by(&self) -> Option<&str> {
        self.generated_by.as_deref()
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_segments(&self) -> usize {
        self.samples.len() / SEGMENT_LEN
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Same samples under a different identity.
    pub fn relabeled(&self, id: RecordId) -> Self {
        VibrationRecord {
            id,
            ..self.clone()
        }
    }
}

/// One 1-second slice of a record; `index` is 1-based.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    parent: RecordId,
    sample_rate_hz: f64,
    generated_by: Option<String>,
    index: usize,
    samples: Vec<f64>,
}

impl Segment {
    pub fn new(
        parent: RecordId,
        sample_rate_hz: f64,
        index: usize,
        samples: Vec<f64>,
    ) -> Result<Self, DataError> {
        if samples.len() != SEGMENT_LEN {
            return Err(DataError::SegmentLength(samples.len()));
        }
        Ok(Segment {
            parent,
            sample_rate_hz,
            generated_by: None,
            index,
            samples,
        })
    }

    pub fn with_generated_by(mut self, by: Option<String>) -> Self {
        self.generated_by = by;
        self
    }

    pub fn parent(&self) -> RecordId {
        self.parent
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }
}

/// Splits a record into contiguous, non-overlapping 1024-sample segments in
/// their original order, indexed from 1.
pub fn segment(record: &VibrationRecord) -> Vec<Segment> {
    record
        .samples
        .chunks_exact(SEGMENT_LEN)
        .enumerate()
        .map(|(i, chunk)| Segment {
            parent: record.id,
            sample_rate_hz: record.sample_rate_hz,
            generated_by: record.generated_by.clone(),
            index: i + 1,
            samples: chunk.to_vec(),
        })
        .collect()
}

/// Inverse of [`segment`]. Segments may arrive in any order but must share a
/// parent and cover indices `1..=N` exactly once.
pub fn reassemble(segments: &[Segment]) -> Result<VibrationRecord, DataError> {
    let first = segments.first().ok_or(DataError::NoSegments)?;
    if segments.iter().any(|s| {
        s.parent != first.parent
            || s.sample_rate_hz.to_bits() != first.sample_rate_hz.to_bits()
            || s.generated_by != first.generated_by
    }) {
        return Err(DataError::MixedParents);
    }
    let mut order: Vec<&Segment> = segments.iter().collect();
    order.sort_by_key(|s| s.index);
    for pair in order.windows(2) {
        if pair[0].index == pair[1].index {
            return Err(DataError::DuplicateIndex(pair[0].index));
        }
    }
    for (expected, s) in (1..).zip(&order) {
        if s.index != expected {
            return Err(DataError::MissingIndex(expected));
        }
    }
    let samples: Vec<f64> = order.iter().flat_map(|s| s.samples.iter().copied()).collect();
    let mut record = VibrationRecord::new(first.parent, first.sample_rate_hz, samples)?;
    record.generated_by = first.generated_by.clone();
    Ok(record)
}

/// Population moments of a record's samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub mean: f64,
    pub variance: f64,
    pub std: f64,
}

pub fn summary_stats(record: &VibrationRecord) -> SummaryStats {
    moments(record.samples())
}

/// Welford's single-pass population mean and variance.
pub(crate) fn moments(xs: &[f64]) -> SummaryStats {
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (x - mean);
    }
    let variance = if xs.is_empty() { 0.0 } else { (m2 / xs.len() as f64).max(0.0) };
    SummaryStats {
        mean,
        variance,
        std: variance.sqrt(),
    }
}

/// Contents of a `.meta` sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordMeta {
    pub joint_id: u32,
    pub domain: DomainLabel,
    pub provenance: Provenance,
    pub sample_rate_hz: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generated_by: Option<String>,
}

impl RecordMeta {
    pub fn of(record: &VibrationRecord) -> Self {
        RecordMeta {
            joint_id: record.joint_id(),
            domain: record.domain(),
            provenance: record.provenance(),
            sample_rate_hz: record.sample_rate_hz(),
            n_samples: record.len(),
            generated_by: record.generated_by.clone(),
        }
    }
}

/// Path of the sidecar belonging to a record file.
pub fn meta_path(record_path: &Path) -> PathBuf {
    record_path.with_extension("meta")
}

enum Format {
    Binary,
    Text,
}

fn format_of(path: &Path) -> Result<Format, DataError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("f64") => Ok(Format::Binary),
        Some("txt") => Ok(Format::Text),
        other => Err(DataError::UnsupportedFormat(other.unwrap_or("").to_string())),
    }
}

fn read_samples(path: &Path) -> Result<Vec<f64>, DataError> {
    let format = format_of(path)?;
    if !path.exists() {
        return Err(DataError::NotFound(path.to_path_buf()));
    }
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    match format {
        Format::Binary => {
            let bytes = fs::read(path).map_err(io_err)?;
            if bytes.len() % 8 != 0 {
                return Err(DataError::TruncatedBinary(bytes.len()));
            }
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect())
        }
        Format::Text => {
            let text = fs::read_to_string(path).map_err(io_err)?;
            let mut out = Vec::new();
            for (i, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let v: f64 = line.parse().map_err(|e: std::num::ParseFloatError| DataError::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: e.to_string(),
                })?;
                out.push(v);
            }
            Ok(out)
        }
    }
}

/// Loads a record file with an explicitly supplied identity. The sample
/// rate comes from the sidecar when one exists, else the canonical 1024 Hz.
pub fn load_record(
    path: &Path,
    joint_id: u32,
    domain: DomainLabel,
    provenance: Provenance,
) -> Result<VibrationRecord, DataError> {
    let samples = read_samples(path)?;
    let mpath = meta_path(path);
    let (rate, generated_by) = if mpath.exists() {
        let meta = read_meta(&mpath)?;
        (meta.sample_rate_hz, meta.generated_by)
    } else {
        (CANONICAL_SAMPLE_RATE_HZ, None)
    };
    let id = RecordId {
        joint_id,
        domain,
        provenance,
    };
    let mut record = VibrationRecord::new(id, rate, samples)?;
    if provenance == Provenance::Fake {
        record.generated_by = generated_by;
    }
    Ok(record)
}

/// Loads a record whose identity comes from its `.meta` sidecar.
pub fn read_record(path: &Path) -> Result<VibrationRecord, DataError> {
    let mpath = meta_path(path);
    if !mpath.exists() {
        return Err(DataError::Meta(format!("sidecar {} not found", mpath.display())));
    }
    let meta = read_meta(&mpath)?;
    let samples = read_samples(path)?;
    if samples.len() != meta.n_samples {
        return Err(DataError::Meta(format!(
            "sidecar declares {} samples, file holds {}",
            meta.n_samples,
            samples.len()
        )));
    }
    let id = RecordId {
        joint_id: meta.joint_id,
        domain: meta.domain,
        provenance: meta.provenance,
    };
    let mut record = VibrationRecord::new(id, meta.sample_rate_hz, samples)?;
    record.generated_by = meta.generated_by;
    Ok(record)
}

pub fn read_meta(path: &Path) -> Result<RecordMeta, DataError> {
    let text = fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    toml::from_str(&text).map_err(|e| DataError::Meta(e.to_string()))
}

/// Writes `record` to `path` (format chosen by extension) plus its sidecar.
pub fn save_record(record: &VibrationRecord, path: &Path) -> Result<(), DataError> {
    let io_err = |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    };
    match format_of(path)? {
        Format::Binary => {
            let mut bytes = Vec::with_capacity(record.len() * 8);
            for x in record.samples() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            fs::write(path, bytes).map_err(io_err)?;
        }
        Format::Text => {
            let mut text = String::with_capacity(record.len() * 24);
            for x in record.samples() {
                // `{:?}` is the shortest representation that parses back exactly.
                text.push_str(&format!("{x:?}\n"));
            }
            fs::write(path, text).map_err(io_err)?;
        }
    }
    let meta = toml::to_string(&RecordMeta::of(record)).map_err(|e| DataError::Meta(e.to_string()))?;
    fs::write(meta_path(path), meta).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(samples: Vec<f64>) -> VibrationRecord {
        VibrationRecord::new(RecordId::real(1, DomainLabel::Undamaged), 1024.0, samples).unwrap()
    }

    fn ramp(n: usize) -> Vec<f64> {
        (0..n).map(|i| (i as f64 * 0.37).sin() * 1e-3).collect()
    }

    #[test]
    fn rejects_invalid_lengths_and_values() {
        let id = RecordId::real(1, DomainLabel::Undamaged);
        assert!(matches!(VibrationRecord::new(id, 1024.0, vec![]), Err(DataError::Empty)));
        assert!(matches!(
            VibrationRecord::new(id, 1024.0, vec![0.0; 1025]),
            Err(DataError::NotSegmentMultiple { len: 1025 })
        ));
        let mut bad = vec![0.0; 1024];
        bad[17] = f64::NAN;
        assert!(matches!(VibrationRecord::new(id, 1024.0, bad), Err(DataError::NonFinite { index: 17 })));
    }

    #[test]
    fn canonical_record_has_256_segments() {
        let r = rec(ramp(CANONICAL_RECORD_LEN));
        let segs = segment(&r);
        assert_eq!(segs.len(), 256);
        assert!(segs.iter().all(|s| s.samples().len() == SEGMENT_LEN));
        assert_eq!(segs[0].index(), 1);
        assert_eq!(segs[255].index(), 256);
    }

    #[test]
    fn single_segment_equals_record() {
        let r = rec(ramp(1024));
        let segs = segment(&r);
        assert_eq!(segs.len(), 1);
        assert_eq!(segs[0].samples(), r.samples());
    }

    #[test]
    fn three_segments_concatenate_to_input() {
        let r = rec(ramp(3072));
        let segs = segment(&r);
        assert_eq!(segs.len(), 3);
        let joined: Vec<f64> = segs.iter().flat_map(|s| s.samples().to_vec()).collect();
        for (a, b) in joined.iter().zip(r.samples()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn reassemble_reports_gaps_and_duplicates() {
        let r = rec(ramp(3072));
        let segs = segment(&r);
        let gap = vec![segs[0].clone(), segs[2].clone()];
        assert_eq!(reassemble(&gap).unwrap_err().to_string(), "missing index 2");
        let dup = vec![segs[0].clone(), segs[0].clone(), segs[1].clone()];
        assert!(matches!(reassemble(&dup), Err(DataError::DuplicateIndex(1))));
        let other = rec(ramp(1024)).relabeled(RecordId::real(2, DomainLabel::Undamaged));
        let mixed = vec![segs[0].clone(), segment(&other)[0].clone()];
        assert!(matches!(reassemble(&mixed), Err(DataError::MixedParents)));
        assert!(matches!(reassemble(&[]), Err(DataError::NoSegments)));
    }

    #[test]
    fn reassemble_accepts_shuffled_order() {
        let r = rec(ramp(4096));
        let mut segs = segment(&r);
        segs.reverse();
        assert_eq!(reassemble(&segs).unwrap(), r);
    }

    #[test]
    fn fake_segments_reassemble_into_fake_record() {
        let id = RecordId {
            joint_id: 1,
            domain: DomainLabel::Damaged,
            provenance: Provenance::Fake,
        };
        let segs: Vec<Segment> = (1..=256)
            .map(|i| {
                Segment::new(id, 1024.0, i, vec![i as f64; SEGMENT_LEN])
                    .unwrap()
                    .with_generated_by(Some("u2d".into()))
            })
            .collect();
        let r = reassemble(&segs).unwrap();
        assert_eq!(r.len(), CANONICAL_RECORD_LEN);
        assert_eq!(r.provenance(), Provenance::Fake);
        assert_eq!(r.domain(), DomainLabel::Damaged);
        assert_eq!(r.generated_by(), Some("u2d"));
    }

    #[test]
    fn summary_stats_hand_cases() {
        let c = summary_stats(&rec(vec![2.5; 1024]));
        assert_eq!(c.mean, 2.5);
        assert_eq!(c.variance, 0.0);
        let alt: Vec<f64> = (0..1024).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let s = summary_stats(&rec(alt));
        assert!(s.mean.abs() < 1e-15);
        assert!((s.variance - 1.0).abs() < 1e-15);
        assert!((s.std - 1.0).abs() < 1e-15);
    }

    #[test]
    fn variance_matches_two_pass_on_full_length_record() {
        let xs: Vec<f64> = (0..CANONICAL_RECORD_LEN)
            .map(|i| 3.0 + (i as f64 * 0.011).sin() + 0.1 * (i as f64 * 1.7).cos())
            .collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let s = summary_stats(&rec(xs));
        assert!(((s.variance - var) / var).abs() < 1e-12);
        assert!((s.mean - mean).abs() < 1e-12);
    }

    #[test]
    fn binary_and_text_files_load_without_rescaling() {
        let dir = tempfile::tempdir().unwrap();
        let r = rec(ramp(2048));
        for name in ["a.f64", "a.txt"] {
            let p = dir.path().join(name);
            save_record(&r, &p).unwrap();
            let back = load_record(&p, 1, DomainLabel::Undamaged, Provenance::Real).unwrap();
            let max_diff = back
                .samples()
                .iter()
                .zip(r.samples())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert_eq!(max_diff, 0.0);
            assert_eq!(read_record(&p).unwrap(), r);
        }
    }

    #[test]
    fn load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("none.f64");
        assert!(matches!(
            load_record(&missing, 1, DomainLabel::Damaged, Provenance::Real),
            Err(DataError::NotFound(_))
        ));
        let empty = dir.path().join("empty.txt");
        fs::write(&empty, "").unwrap();
        let err = load_record(&empty, 1, DomainLabel::Damaged, Provenance::Real).unwrap_err();
        assert_eq!(err.to_string(), "empty record");
        let odd = dir.path().join("odd.f64");
        fs::write(&odd, vec![0u8; 8 * (CANONICAL_RECORD_LEN + 1)]).unwrap();
        let err = load_record(&odd, 1, DomainLabel::Damaged, Provenance::Real).unwrap_err();
        assert!(err.to_string().starts_with("length not multiple of segment size"));
        let nan = dir.path().join("nan.txt");
        fs::write(&nan, "1.0\nNaN\n").unwrap();
        assert!(load_record(&nan, 1, DomainLabel::Damaged, Provenance::Real).is_err());
    }

    #[test]
    fn full_length_file_loads() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("full.f64");
        let bytes: Vec<u8> = ramp(CANONICAL_RECORD_LEN).iter().flat_map(|x| x.to_le_bytes()).collect();
        fs::write(&p, bytes).unwrap();
        let r = load_record(&p, 1, DomainLabel::Undamaged, Provenance::Real).unwrap();
        assert_eq!(r.len(), CANONICAL_RECORD_LEN);
    }

    #[test]
    fn domain_codes() {
        assert_eq!(DomainLabel::Undamaged.code(), 0);
        assert_eq!(DomainLabel::Damaged.code(), 1);
        assert_eq!("1".parse::<DomainLabel>().unwrap(), DomainLabel::Damaged);
        assert!(DomainLabel::from_code(2).is_none());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn segment_reassemble_round_trip(n in 1usize..6, seed in any::<u64>()) {
            let xs: Vec<f64> = (0..n * SEGMENT_LEN)
                .map(|i| ((i as u64).wrapping_mul(seed | 1) % 1000) as f64 * 1e-4 - 0.05)
                .collect();
            let r = rec(xs);
            let segs = segment(&r);
            prop_assert_eq!(segs.len(), n);
            let back = reassemble(&segs).unwrap();
            prop_assert_eq!(back.samples().len(), r.samples().len());
            for (a, b) in back.samples().iter().zip(r.samples()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            prop_assert_eq!(back, r);
        }
    }
}
