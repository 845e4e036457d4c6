//! The four subcommands. Each takes the effective configuration and an
//! output directory, and writes its artifacts there.

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vibecycle_core::metrics::{evaluate_pair, MetricReport};
use vibecycle_core::signal::{read_record, save_record, DomainLabel, VibrationRecord};
use vibecycle_core::synth::{generate_toy_record, simulate_response, Damage, ModalModel, SimulationSpec, ToyDomainSpec};
use vibecycle_core::training::{
    checkpoint_load, checkpoint_save, translate as translate_record, Direction, EpochRecord, Trainer, TrainingData,
};

use crate::config::{EvaluateConfig, RunConfig, SynthConfig, SynthKind, TrainConfig, TranslateConfig};
use crate::plot::{line_chart, Series, BLUE, RED};
use crate::CliError;

pub const UNDAMAGED_FILE: &str = "undamaged.f64";
pub const DAMAGED_FILE: &str = "damaged.f64";
pub const MONITOR_LOG: &str = "monitor.log";
pub const TIMING_LOG: &str = "timing.log";
pub const FINAL_CHECKPOINT: &str = "checkpoint.vcgp";
pub const CONFIG_ECHO: &str = "config.toml";

fn prepare_out(out: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("cannot create output directory {}: {e}", out.display())))
}

/// Writes the effective configuration next to the results.
pub fn echo_config(cfg: &RunConfig, out: &Path) -> Result<(), CliError> {
    fs::write(out.join(CONFIG_ECHO), cfg.to_toml())?;
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("plain data serializes");
    fs::write(path, text + "\n")?;
    Ok(())
}

fn load_dataset(path: &Path) -> Result<VibrationRecord, CliError> {
    if !path.exists() {
        return Err(CliError::Data(format!("dataset not found: {}", path.display())));
    }
    Ok(read_record(path)?)
}

#[derive(Debug, Serialize)]
pub struct SynthManifest {
    pub kind: SynthKind,
    pub undamaged: String,
    pub damaged: String,
    pub n_samples: usize,
    pub sample_rate_hz: f64,
    /// Eigen-solved frequencies, modal records only.
    pub natural_freqs_undamaged_hz: Option<Vec<f64>>,
    pub natural_freqs_damaged_hz: Option<Vec<f64>>,
}

/// Generates an undamaged/damaged record pair.
pub fn synth(cfg: &SynthConfig, out: &Path) -> Result<SynthManifest, CliError> {
    let (u, d, freqs) = match cfg.kind {
        SynthKind::Modal => {
            let m = &cfg.modal;
            let healthy = ModalModel::build(&m.mass, &m.stiffness, m.damping_ratio, None)?;
            let damage = Damage {
                spring: m.damage_spring,
                factor: m.damage_factor,
            };
            let damaged = ModalModel::build(&m.mass, &m.stiffness, m.damping_ratio, Some(damage))?;
            let sim = SimulationSpec {
                force_dof: m.force_dof,
                measured_dof: m.measured_dof,
                amplitude: m.amplitude,
                duration_s: cfg.duration_s,
                sample_rate_hz: cfg.sample_rate_hz,
                seed: cfg.seed,
            };
            let u = simulate_response(&healthy, &sim, DomainLabel::Undamaged)?;
            let d = simulate_response(&damaged, &sim, DomainLabel::Damaged)?;
            let freqs = (healthy.natural_freqs_hz().to_vec(), damaged.natural_freqs_hz().to_vec());
            (u, d, Some(freqs))
        }
        SynthKind::Toy => {
            let t = &cfg.toy;
            let spec = |freq, seed| ToyDomainSpec {
                carrier_freq_hz: freq,
                amplitude: t.amplitude,
                noise_std: t.noise_std,
                sample_rate_hz: cfg.sample_rate_hz,
                seed,
            };
            let u = generate_toy_record(&spec(t.undamaged_freq_hz, cfg.seed), cfg.duration_s, DomainLabel::Undamaged)?;
            let d = generate_toy_record(
                &spec(t.damaged_freq_hz, cfg.seed.wrapping_add(1)),
                cfg.duration_s,
                DomainLabel::Damaged,
            )?;
            (u, d, None)
        }
    };
    prepare_out(out)?;
    save_record(&u, &out.join(UNDAMAGED_FILE))?;
    save_record(&d, &out.join(DAMAGED_FILE))?;
    let manifest = SynthManifest {
        kind: cfg.kind,
        undamaged: UNDAMAGED_FILE.into(),
        damaged: DAMAGED_FILE.into(),
        n_samples: u.len(),
        sample_rate_hz: u.sample_rate_hz(),
        natural_freqs_undamaged_hz: freqs.as_ref().map(|f| f.0.clone()),
        natural_freqs_damaged_hz: freqs.map(|f| f.1),
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub epochs_completed: usize,
    pub checkpoint: PathBuf,
    pub history: Vec<EpochRecord>,
}

fn write_logs(history: &[EpochRecord], out: &Path) -> Result<(File, File), CliError> {
    let mut monitor = File::create(out.join(MONITOR_LOG))?;
    let mut timing = File::create(out.join(TIMING_LOG))?;
    for r in history {
        writeln!(monitor, "{}", r.monitor_line())?;
        writeln!(timing, "{}", r.timing_line())?;
    }
    Ok((monitor, timing))
}

/// Draws the four monitoring families versus epoch.
pub fn training_plots(history: &[EpochRecord], out: &Path) -> Result<(), CliError> {
    let pts = |f: &dyn Fn(&EpochRecord) -> Option<f64>| -> Vec<(f64, f64)> {
        history
            .iter()
            .map(|r| (r.epoch as f64, f(r).unwrap_or(f64::NAN)))
            .collect()
    };
    let critic = pts(&|r| Some(r.total_critic_loss));
    let generator = pts(&|r| Some(r.total_generator_loss));
    let (fid_u, fid_d) = (pts(&|r| r.fid_u), pts(&|r| r.fid_d));
    let (xc_u, xc_d) = (pts(&|r| r.xcross_u), pts(&|r| r.xcross_d));
    line_chart(&out.join("critic_loss.png"), &[Series { points: &critic, color: BLUE }], false)?;
    line_chart(&out.join("generator_loss.png"), &[Series { points: &generator, color: BLUE }], false)?;
    line_chart(
        &out.join("fid.png"),
        &[Series { points: &fid_u, color: BLUE }, Series { points: &fid_d, color: RED }],
        true,
    )?;
    line_chart(
        &out.join("xcross.png"),
        &[Series { points: &xc_u, color: BLUE }, Series { points: &xc_d, color: RED }],
        false,
    )?;
    Ok(())
}

/// Trains from scratch, or resumes from `resume`, until the configured
/// epoch count (capped by `max_epochs`) is reached.
pub fn train(cfg: &TrainConfig, out: &Path, resume: Option<&Path>) -> Result<TrainOutcome, CliError> {
    let u = load_dataset(&cfg.undamaged)?;
    let d = load_dataset(&cfg.damaged)?;
    let data = TrainingData::new(u, d)?;
    let mut trainer = match resume {
        Some(path) => {
            let mut t = Trainer::from_checkpoint(checkpoint_load(path)?)?;
            if t.models().generator_spec() != &cfg.generator || t.models().critic_spec() != &cfg.critic {
                return Err(CliError::Config(format!(
                    "checkpoint {} was trained with different network specs",
                    path.display()
                )));
            }
            t.set_epochs(cfg.hyperparams.epochs);
            t
        }
        None => Trainer::new(&cfg.generator, &cfg.critic, &cfg.hyperparams)?,
    };
    prepare_out(out)?;
    let target = cfg
        .max_epochs
        .map_or(cfg.hyperparams.epochs, |m| m.min(cfg.hyperparams.epochs));
    let (mut monitor, mut timing) = write_logs(trainer.history(), out)?;
    while trainer.epoch() < target {
        let record = trainer.run_epoch(&data)?;
        writeln!(monitor, "{}", record.monitor_line())?;
        writeln!(timing, "{}", record.timing_line())?;
        monitor.flush()?;
        if cfg.checkpoint_every > 0 && record.epoch % cfg.checkpoint_every == 0 {
            let path = out.join(format!("checkpoint_epoch{:04}.vcgp", record.epoch));
            checkpoint_save(&path, &trainer.checkpoint())?;
        }
    }
    let checkpoint = out.join(FINAL_CHECKPOINT);
    checkpoint_save(&checkpoint, &trainer.checkpoint())?;
    training_plots(trainer.history(), out)?;
    Ok(TrainOutcome {
        epochs_completed: trainer.epoch(),
        checkpoint,
        history: trainer.history().to_vec(),
    })
}

#[derive(Debug, Serialize)]
pub struct TranslateReport {
    pub input: PathBuf,
    pub output: PathBuf,
    pub direction: Direction,
    pub joint_id: u32,
    pub n_samples: usize,
    /// Mean absolute difference between the input and the translation.
    pub translation_l1: f64,
    /// Mean absolute difference between the input and its round trip
    /// through both generators.
    pub cycle_l1: f64,
}

fn mean_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

pub fn translate(cfg: &TranslateConfig, out: &Path) -> Result<TranslateReport, CliError> {
    let ck_path = cfg
        .checkpoint
        .as_deref()
        .ok_or_else(|| CliError::Config("translate needs --checkpoint".into()))?;
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Config("translate needs --input".into()))?;
    let direction = cfg
        .direction
        .ok_or_else(|| CliError::Config("translate needs --direction".into()))?;
    let models = checkpoint_load(ck_path)?.models;
    let record = load_dataset(input)?;
    let fake = translate_record(&models, &record, direction)?;
    let back_dir = match direction {
        Direction::U2d => Direction::D2u,
        Direction::D2u => Direction::U2d,
    };
    let back = translate_record(&models, &fake, back_dir)?;
    prepare_out(out)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("record");
    let output = out.join(format!("{stem}_{direction}.f64"));
    save_record(&fake, &output)?;
    let report = TranslateReport {
        input: input.to_path_buf(),
        output,
        direction,
        joint_id: fake.joint_id(),
        n_samples: fake.len(),
        translation_l1: mean_abs_diff(fake.samples(), record.samples()),
        cycle_l1: mean_abs_diff(back.samples(), record.samples()),
    };
    write_json(&out.join(format!("{stem}_{direction}.json")), &report)?;
    Ok(report)
}

#[derive(Debug, Serialize)]
struct ReportFile<'a> {
    real: &'a Path,
    fake: &'a Path,
    fid: f64,
    fid_mode: vibecycle_core::metrics::FidMode,
    ls: f64,
    xcross_peak_raw: f64,
    xcross_peak_normalized: f64,
    dominant_frequency_real_hz: f64,
    dominant_frequency_fake_hz: f64,
}

/// `real / fake` from the two file stems.
pub fn pair_label(real: &Path, fake: &Path) -> String {
    let stem = |p: &Path| p.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    format!("{} / {}", stem(real), stem(fake))
}

/// Indicator table with one row per indicator, tab separated.
pub fn metric_table(report: &MetricReport, pair: &str) -> String {
    let rows = [
        ("FID", report.fid),
        ("LS", report.ls),
        ("X-cross peak (raw)", report.xcross_peak_raw),
        ("X-cross peak (normalized)", report.xcross_peak_normalized),
    ];
    let mut s = String::from("indicator\tpair\tvalue\n");
    for (name, value) in rows {
        s.push_str(&format!("{name}\t{pair}\t{value:e}\n"));
    }
    s
}

pub fn evaluate(cfg: &EvaluateConfig, out: &Path) -> Result<MetricReport, CliError> {
    let real_path = cfg
        .real
        .as_deref()
        .ok_or_else(|| CliError::Config("evaluate needs --real".into()))?;
    let fake_path = cfg
        .fake
        .as_deref()
        .ok_or_else(|| CliError::Config("evaluate needs --fake".into()))?;
    let real = load_dataset(real_path)?;
    let fake = load_dataset(fake_path)?;
    let report = evaluate_pair(&real, &fake, cfg.fid_mode)?;
    prepare_out(out)?;
    write_json(
        &out.join("report.json"),
        &ReportFile {
            real: real_path,
            fake: fake_path,
            fid: report.fid,
            fid_mode: report.fid_mode,
            ls: report.ls,
            xcross_peak_raw: report.xcross_peak_raw,
            xcross_peak_normalized: report.xcross_peak_normalized,
            dominant_frequency_real_hz: report.spectrum_real.dominant_frequency(),
            dominant_frequency_fake_hz: report.spectrum_fake.dominant_frequency(),
        },
    )?;
    fs::write(out.join("metrics.txt"), metric_table(&report, &pair_label(real_path, fake_path)))?;
    let mut spectra = String::from("freq_hz\tpower_real\tpower_fake\n");
    let (sr, sf) = (&report.spectrum_real, &report.spectrum_fake);
    for i in 0..sr.freq_hz.len() {
        spectra.push_str(&format!("{}\t{:e}\t{:e}\n", sr.freq_hz[i], sr.power[i], sf.power[i]));
    }
    fs::write(out.join("spectra.tsv"), spectra)?;
    let pr: Vec<(f64, f64)> = sr.freq_hz.iter().copied().zip(sr.power.iter().copied()).collect();
    let pf: Vec<(f64, f64)> = sf.freq_hz.iter().copied().zip(sf.power.iter().copied()).collect();
    line_chart(
        &out.join("spectrum.png"),
        &[Series { points: &pr, color: BLUE }, Series { points: &pf, color: RED }],
        true,
    )?;
    Ok(report)
}
