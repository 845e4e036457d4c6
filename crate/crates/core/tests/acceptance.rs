//! End-to-end acceptance checks. Runs as a plain binary so every criterion
//! prints exactly one PASS/FAIL line, even when an earlier one fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vibecycle_core::autodiff::{grad, Var};
use vibecycle_core::losses::{
    cycle_loss, gradient_penalty, identity_loss, linear_critic, total_losses, GpAt, MapGenerator,
};
use vibecycle_core::metrics::{
    averaged_power, fid, fid_univariate, likeliness_score, likeliness_score_records, power_spectrum, spearman, xcross,
    FidMode,
};
use vibecycle_core::networks::{
    count_layers, layer_plan, residual_pattern_holds, Critic, CriticSpec, Generator, GeneratorSpec, LayerKind, Norm,
};
use vibecycle_core::signal::{read_record, segment, DomainLabel, RecordId, VibrationRecord};
use vibecycle_core::synth::{generate_toy_record, simulate_response, Damage, ModalModel, SimulationSpec, ToyDomainSpec};
use vibecycle_core::tensor::Tensor;
use vibecycle_core::training::{
    checkpoint_load, checkpoint_save, translate, Direction, EpochRecord, Hyperparams, Trainer, TrainingData,
};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

const RATE: f64 = 1024.0;

fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn record(domain: DomainLabel, samples: Vec<f64>) -> VibrationRecord {
    VibrationRecord::new(RecordId::real(1, domain), RATE, samples).unwrap()
}

fn toy(freq: f64, seed: u64, seconds: f64, domain: DomainLabel) -> VibrationRecord {
    let spec = ToyDomainSpec {
        carrier_freq_hz: freq,
        amplitude: 1.0,
        noise_std: 0.1,
        sample_rate_hz: RATE,
        seed,
    };
    generate_toy_record(&spec, seconds, domain).unwrap()
}

fn tiny_generator() -> GeneratorSpec {
    GeneratorSpec {
        channel_plan: vec![2, 2, 2, 2, 2],
        kernel_size: 3,
        ..GeneratorSpec::default()
    }
}

fn tiny_critic() -> CriticSpec {
    CriticSpec {
        channel_plan: vec![2, 2, 2, 2],
        kernel_size: 3,
        ..CriticSpec::default()
    }
}

fn crit1_xcross_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for n in [64, 1024, 4096] {
        for _ in 0..50 {
            let x = random_signal(&mut rng, n);
            let y = random_signal(&mut rng, n);
            let fast = xcross(&x, &y).map_err(|e| e.to_string())?.sequence;
            let oracle: Vec<f64> = (0..n)
                .map(|k| (0..n).map(|i| x[(i + k) % n] * y[i]).sum())
                .collect();
            let scale = oracle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let err = fast.iter().zip(&oracle).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            worst = worst.max(err / scale);
            count += 1;
        }
    }
    ensure!(worst <= 1e-9, "max relative error {worst:e} > 1e-9");
    Ok(format!("{count} signals, max relative error {worst:.2e}"))
}

fn crit2_fid() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_signal(&mut rng, 8192);
    let shifted: Vec<f64> = x.iter().map(|v| v + 0.1).collect();
    let other = random_signal(&mut rng, 8192);
    let rx = record(DomainLabel::Damaged, x.clone());
    let ro = record(DomainLabel::Damaged, other);

    let self_fid = fid(&rx, &rx, FidMode::Univariate).map_err(|e| e.to_string())?;
    ensure!(self_fid == 0.0, "fid(x, x) = {self_fid:e}");
    let ab = fid(&rx, &ro, FidMode::Univariate).map_err(|e| e.to_string())?;
    let ba = fid(&ro, &rx, FidMode::Univariate).map_err(|e| e.to_string())?;
    ensure!(ab == ba, "asymmetric: {ab:e} vs {ba:e}");
    let d = fid_univariate(&x, &shifted).map_err(|e| e.to_string())?;
    ensure!((d - 0.01).abs() <= 1e-12, "shifted fid {d:e} != 0.01");
    Ok(format!("fid(x,x)=0, symmetric, mean shift 0.1 gives {d:.15}"))
}

fn fd_grad(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let (mut p, mut m) = (x.to_vec(), x.to_vec());
            p[i] += h;
            m[i] -= h;
            (f(&p) - f(&m)) / (2.0 * h)
        })
        .collect()
}

fn crit3_gradient_penalty() -> Outcome {
    let len = 16;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let real = vec![Var::constant(Tensor::signal(&random_signal(&mut rng, len)))];
    let fake = vec![Var::constant(Tensor::signal(&random_signal(&mut rng, len)))];
    let mut values = Vec::new();
    for (g, expected) in [(1.0, 0.0), (3.0, 40.0)] {
        let w = random_signal(&mut rng, len);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        let critic = linear_critic(w.iter().map(|v| v * g / norm).collect());
        let gp = gradient_penalty(&critic, &real, &fake, 10.0, GpAt::Interpolate, 9)
            .map_err(|e| e.to_string())?
            .item();
        ensure!((gp - expected).abs() <= 1e-6, "g={g}: penalty {gp} != {expected}");
        values.push(gp);
    }

    let spec = CriticSpec {
        input_length: 64,
        channel_plan: vec![2, 3, 3, 2],
        kernel_size: 3,
        ..CriticSpec::default()
    };
    let c = Critic::new(&spec, 21).map_err(|e| e.to_string())?;
    let x0 = random_signal(&mut rng, 64);
    let x = Var::leaf(Tensor::signal(&x0));
    let score = c.forward(&x, &c.params().bind(false));
    let analytic = grad(&score, &[&x], false)[0].clone().ok_or("no input gradient")?;
    let numeric = fd_grad(&|v| c.score(v), &x0, 1e-6);
    let scale = numeric.iter().fold(1e-12f64, |m, v| m.max(v.abs()));
    let err = analytic
        .value()
        .data()
        .iter()
        .zip(&numeric)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    ensure!(err <= 1e-4 * scale, "critic input gradient off by {:.2e} relative", err / scale);
    Ok(format!(
        "penalties {:?}, critic FD relative error {:.2e}",
        values,
        err / scale
    ))
}

fn crit4_loss_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let batch = |rng: &mut ChaCha8Rng| -> Vec<Var> {
        (0..3)
            .map(|_| Var::constant(Tensor::signal(&random_signal(rng, 32))))
            .collect()
    };
    let (u, d) = (batch(&mut rng), batch(&mut rng));
    let ident = MapGenerator(|x: &Var| x.clone());
    let cyc = cycle_loss(&ident, &ident, &u, &d, 10.0).map_err(|e| e.to_string())?.item();
    let id = identity_loss(&ident, &ident, &u, &d, 10.0).map_err(|e| e.to_string())?.item();
    ensure!(cyc == 0.0 && id == 0.0, "identity generators: cycle {cyc}, identity {id}");

    let up = MapGenerator(|x: &Var| x.scale(2.0));
    let down = MapGenerator(|x: &Var| x.scale(0.5));
    let inv = cycle_loss(&up, &down, &u, &d, 10.0).map_err(|e| e.to_string())?.item();
    ensure!(inv == 0.0, "perfect inverses: cycle {inv}");

    let parts: Vec<f64> = random_signal(&mut rng, 6);
    let b = total_losses(parts[0], parts[1], parts[2], parts[3], parts[4], parts[5]);
    ensure!(b.total_critic == parts[0] + parts[1], "critic total does not decompose");
    ensure!(
        b.total_generator == parts[2] + parts[3] + parts[4] + parts[5],
        "generator total does not decompose"
    );

    let skew = MapGenerator(|x: &Var| x.scale(1.3).add_scalar(0.2));
    let critic = linear_critic(random_signal(&mut rng, 32));
    let lin = |f: &dyn Fn(f64) -> Result<f64, String>| -> Result<f64, String> {
        let (a, b) = (f(1.5)?, f(4.5)?);
        Ok((b - 3.0 * a).abs() / b.abs().max(1e-300))
    };
    let worst = [
        lin(&|l| Ok(cycle_loss(&skew, &skew, &u, &d, l).map_err(|e| e.to_string())?.item()))?,
        lin(&|l| Ok(identity_loss(&skew, &skew, &u, &d, l).map_err(|e| e.to_string())?.item()))?,
        lin(&|l| Ok(gradient_penalty(&critic, &u, &d, l, GpAt::Interpolate, 1).map_err(|e| e.to_string())?.item()))?,
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    ensure!(worst <= 1e-12, "lambda scaling off by {worst:e} relative");
    Ok(format!("zero losses exact, totals additive, lambda scaling error {worst:.1e}"))
}

fn crit5_architecture() -> Outcome {
    let spec = GeneratorSpec::default();
    let layers = layer_plan(&spec).map_err(|e| e.to_string())?;
    let n = count_layers(&spec).map_err(|e| e.to_string())?;
    ensure!(n == 28, "count_layers = {n}");
    ensure!(residual_pattern_holds(&layers, 2), "residual pattern broken");
    let g = Generator::new(&spec, 0).map_err(|e| e.to_string())?;
    let norms = g.norms();
    let mut it = norms.iter();
    for layer in &layers {
        let take = if matches!(layer, LayerKind::Residual { .. }) { 2 } else { 1 };
        for _ in 0..take {
            let norm = it.next().ok_or("norm list shorter than layer plan")?;
            let residual = matches!(layer, LayerKind::Residual { .. });
            ensure!(residual || *norm != Norm::Batch, "batch norm outside a residual layer: {layer:?}");
        }
    }
    let cspec = CriticSpec::default();
    let c = Critic::new(&cspec, 0).map_err(|e| e.to_string())?;
    ensure!(
        !cspec.uses_batch_norm() && c.norms().iter().all(|n| *n != Norm::Batch),
        "critic has batch norm"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let out = g.translate(&random_signal(&mut rng, 1024));
    ensure!(out.len() == 1024, "generator output length {}", out.len());
    Ok("28 layers, 2 residual layers per conv/tconv, critic BN-free, 1024 -> 1024".into())
}

fn monitor_lines(t: &Trainer) -> Vec<String> {
    t.history().iter().map(EpochRecord::monitor_line).collect()
}

fn crit6_determinism() -> Outcome {
    let data = TrainingData::new(
        toy(5.0, 1, 4.0, DomainLabel::Undamaged),
        toy(12.0, 2, 4.0, DomainLabel::Damaged),
    )
    .map_err(|e| e.to_string())?;
    let hp = |epochs| Hyperparams {
        epochs,
        critic_iterations: 2,
        seed: 6,
        ..Hyperparams::default()
    };
    let run = |epochs| -> Result<Trainer, String> {
        let mut t = Trainer::new(&tiny_generator(), &tiny_critic(), &hp(epochs)).map_err(|e| e.to_string())?;
        t.run(&data, &mut |_| {}).map_err(|e| e.to_string())?;
        Ok(t)
    };
    let (a, b) = (run(2)?, run(2)?);
    let (la, lb) = (monitor_lines(&a).join("\n"), monitor_lines(&b).join("\n"));
    ensure!(la.as_bytes() == lb.as_bytes(), "monitor logs differ between seeded runs");

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("epoch2.vcgp");
    checkpoint_save(&path, &a.checkpoint()).map_err(|e| e.to_string())?;
    let mut resumed = Trainer::from_checkpoint(checkpoint_load(&path).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    resumed.set_epochs(4);
    resumed.run(&data, &mut |_| {}).map_err(|e| e.to_string())?;
    let straight = run(4)?;
    ensure!(monitor_lines(&straight) == monitor_lines(&resumed), "resumed log differs");
    ensure!(straight.models() == resumed.models(), "resumed parameters differ");
    Ok("identical 2-epoch logs; resume at epoch 2 equals a 4-epoch run".into())
}

fn crit7_update_counts() -> Outcome {
    let data = TrainingData::new(
        toy(5.0, 1, 256.0, DomainLabel::Undamaged),
        toy(12.0, 2, 256.0, DomainLabel::Damaged),
    )
    .map_err(|e| e.to_string())?;
    let hp = Hyperparams {
        epochs: 1,
        critic_iterations: 20,
        monitor_every: 0,
        seed: 7,
        ..Hyperparams::default()
    };
    let mut t = Trainer::new(&tiny_generator(), &tiny_critic(), &hp).map_err(|e| e.to_string())?;
    t.run(&data, &mut |_| {}).map_err(|e| e.to_string())?;
    let c = t.counters();
    ensure!(
        c.generator_updates == 256 && c.critic_updates == 5120,
        "{} generator / {} critic updates",
        c.generator_updates,
        c.critic_updates
    );
    Ok("256 generator updates, 5120 critic updates".into())
}

fn crit8_toy_translation() -> Outcome {
    let u = toy(5.0, 1, 64.0, DomainLabel::Undamaged);
    let d = toy(12.0, 2, 64.0, DomainLabel::Damaged);
    let gspec = GeneratorSpec {
        channel_plan: vec![4, 8, 8, 8, 8],
        kernel_size: 7,
        ..GeneratorSpec::default()
    };
    let cspec = CriticSpec {
        channel_plan: vec![4, 8, 8, 8],
        kernel_size: 7,
        ..CriticSpec::default()
    };
    let hp = Hyperparams {
        epochs: 50,
        critic_iterations: 5,
        lr_generators: 1e-3,
        lr_critics: 1e-3,
        lr_decay_from: Some(20),
        monitor_every: 0,
        seed: 0,
        ..Hyperparams::default()
    };
    let data = TrainingData::new(u.clone(), d.clone()).map_err(|e| e.to_string())?;
    let mut t = Trainer::new(&gspec, &cspec, &hp).map_err(|e| e.to_string())?;
    t.run(&data, &mut |_| {}).map_err(|e| e.to_string())?;

    let fake = translate(t.models(), &u, Direction::U2d).map_err(|e| e.to_string())?;
    let fake_segs: Vec<Vec<f64>> = segment(&fake).iter().map(|s| s.samples().to_vec()).collect();
    let real_segs: Vec<Vec<f64>> = segment(&d).iter().map(|s| s.samples().to_vec()).collect();
    let hits = fake_segs
        .iter()
        .filter(|s| {
            let sp = power_spectrum(s, RATE);
            (sp.dominant_frequency() - 12.0).abs() <= sp.bin_width_hz()
        })
        .count();
    let hit = hits as f64 / fake_segs.len() as f64;
    let ls = likeliness_score(&real_segs, &fake_segs).map_err(|e| e.to_string())?;
    let g: Vec<f64> = t.history().iter().map(|r| r.total_generator_loss).collect();
    let epochs: Vec<f64> = (1..=g.len()).map(|e| e as f64).collect();
    let rho = spearman(&epochs, &g).ok_or("generator loss is constant")?;
    let summary = format!("hit fraction {hit:.2}, LS {ls:.3}, Spearman rho {rho:.3}");
    ensure!(hit >= 0.8, "{summary}: hit fraction below 0.8");
    ensure!(ls >= 0.7, "{summary}: LS below 0.7");
    ensure!(rho < 0.0, "{summary}: generator loss not decreasing");
    Ok(summary)
}

fn crit9_structure_physics() -> Outcome {
    let k = (2.0 * std::f64::consts::PI * 10.0).powi(2);
    let (mass, stiffness) = ([1.0; 3], [k; 3]);
    let healthy = ModalModel::build(&mass, &stiffness, 0.02, None).map_err(|e| e.to_string())?;
    let damage = Damage { spring: 2, factor: 0.6 };
    let damaged = ModalModel::build(&mass, &stiffness, 0.02, Some(damage)).map_err(|e| e.to_string())?;
    for (fd, fu) in damaged.natural_freqs_hz().iter().zip(healthy.natural_freqs_hz()) {
        ensure!(fd <= fu, "damaged frequency {fd} above undamaged {fu}");
    }
    let sim = SimulationSpec::default();
    let mut worst: f64 = 0.0;
    for (model, domain) in [(&healthy, DomainLabel::Undamaged), (&damaged, DomainLabel::Damaged)] {
        let rec = simulate_response(model, &sim, domain).map_err(|e| e.to_string())?;
        let sp = averaged_power(rec.samples(), rec.sample_rate_hz(), 1024);
        let bin = sp.bin_width_hz();
        for &f in model.natural_freqs_hz() {
            let peak = sp.peak_in(f - 2.0, f + 2.0).ok_or("no spectral peak")?;
            ensure!((peak - f).abs() <= bin, "{domain:?}: peak {peak} Hz vs eigen {f:.3} Hz");
            worst = worst.max((peak - f).abs());
        }
    }

    let two = ModalModel::build(&[1.0, 1.0], &[1.0, 1.0], 0.02, None).map_err(|e| e.to_string())?;
    let eig: Vec<f64> = two
        .natural_freqs_hz()
        .iter()
        .map(|f| (2.0 * std::f64::consts::PI * f).powi(2))
        .collect();
    let oracle = [(3.0 - 5f64.sqrt()) / 2.0, (3.0 + 5f64.sqrt()) / 2.0];
    for (e, o) in eig.iter().zip(oracle) {
        ensure!(approx::abs_diff_eq!(*e, o, epsilon = 1e-9), "2-DOF eigenvalue {e} vs {o}");
    }
    Ok(format!(
        "damaged <= undamaged, max peak offset {worst:.2} Hz, 2-DOF eigenvalues match"
    ))
}

/// Real benchmark records are looked up in `VIBECYCLE_BENCHMARK_DIR`: a
/// trained `checkpoint.vcgp` plus `joint{N}_undamaged.f64` and
/// `joint{N}_damaged.f64` for joints 1, 2, 16 and 30.
fn crit10_benchmark(dir: &Path) -> Outcome {
    let models = checkpoint_load(&dir.join("checkpoint.vcgp")).map_err(|e| e.to_string())?.models;
    let mut rows = Vec::new();
    for joint in [1, 2, 16, 30] {
        let load = |kind: &str| read_record(&dir.join(format!("joint{joint}_{kind}.f64"))).map_err(|e| e.to_string());
        let (u, d) = (load("undamaged")?, load("damaged")?);
        let fake = translate(&models, &u, Direction::U2d).map_err(|e| e.to_string())?;
        let f = fid(&d, &fake, FidMode::Univariate).map_err(|e| e.to_string())?;
        let ls = likeliness_score_records(&d, &fake).map_err(|e| e.to_string())?;
        rows.push((joint, f, ls));
    }
    let (_, f1, ls1) = rows[0];
    ensure!((1e-6..=1e-5).contains(&f1), "joint 1 FID {f1:e} outside [1e-6, 1e-5]");
    ensure!(ls1 >= 0.95, "joint 1 LS {ls1}");
    for &(j, f, ls) in &rows[1..] {
        ensure!(f > f1 && ls < ls1, "joint {j} (FID {f:e}, LS {ls}) not worse than joint 1");
    }
    Ok(format!("{rows:?}"))
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: Box<dyn Fn() -> Outcome>,
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let minutes = |m: u64| Duration::from_secs(60 * m);
    let mut criteria = vec![
        Criterion { id: 1, name: "cross-correlation oracle", budget: Duration::from_secs(10), run: Box::new(crit1_xcross_oracle) },
        Criterion { id: 2, name: "FID analytics", budget: Duration::from_secs(1), run: Box::new(crit2_fid) },
        Criterion { id: 3, name: "gradient-penalty analytics", budget: Duration::from_secs(30), run: Box::new(crit3_gradient_penalty) },
        Criterion { id: 4, name: "loss identities", budget: Duration::from_secs(5), run: Box::new(crit4_loss_identities) },
        Criterion { id: 5, name: "architecture audit", budget: Duration::from_secs(5), run: Box::new(crit5_architecture) },
        Criterion { id: 6, name: "pipeline determinism", budget: minutes(10), run: Box::new(crit6_determinism) },
        Criterion { id: 7, name: "update-count arithmetic", budget: minutes(10), run: Box::new(crit7_update_counts) },
        Criterion { id: 8, name: "toy domain translation", budget: minutes(60), run: Box::new(crit8_toy_translation) },
        Criterion { id: 9, name: "synthetic-structure physics", budget: minutes(1), run: Box::new(crit9_structure_physics) },
    ];
    let bench: Option<PathBuf> = std::env::var_os("VIBECYCLE_BENCHMARK_DIR").map(PathBuf::from);
    if let Some(dir) = bench.clone() {
        criteria.push(Criterion {
            id: 10,
            name: "benchmark comparison",
            budget: minutes(60),
            run: Box::new(move || crit10_benchmark(&dir)),
        });
    }

    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f == &c.id.to_string()) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(|| (c.run)()))
            .unwrap_or_else(|_| Err("panicked".into()));
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if took > c.budget => Err(format!("{msg}; took {took:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {} ({:.1?}): {msg}", c.id, c.name, took),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {} ({:.1?}): {msg}", c.id, c.name, took);
            }
        }
    }
    if bench.is_none() && (filter.is_empty() || filter.iter().any(|f| f == "10")) {
        println!("criterion 10 SKIP  benchmark comparison: set VIBECYCLE_BENCHMARK_DIR to run it");
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
