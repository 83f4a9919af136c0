//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any fails.

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::*;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use semvq::analytics::channel_distortion;
use semvq::channel::transmit_indices;
use semvq::codebook::{empirical_entropy, mutual_information_estimate, quantize};
use semvq::losses::{codeword_gradients, train_codebook, UpdateRule};
use semvq::pipeline::{generate_mixture, load_features, run_compare, run_sweep, run_train, KeyValues, MixtureSpec, RunConfig};
use semvq::{ChannelSpec, Codebook, IndexSequence, LossWeights, TrainConfig, UsageStats};

const QUANTIZER_INSTANCES: usize = 1_000;
const QUANTIZER_BUDGET: Duration = Duration::from_secs(5);
const ENTROPY_EXACT_TOL: f64 = 1e-12;
const ENTROPY_BOUND_TOL: f64 = 1e-12;
const ENTROPY_RANDOM_VECTORS: usize = 10_000;
const CHANNEL_SYMBOLS: usize = 1_000_000;
const CHANNEL_SIGMAS: f64 = 3.0;
const CHANNEL_BUDGET: Duration = Duration::from_secs(60);
const JUMP_DRAWS: usize = 1_000_000;
const JUMP_REL_TOL: f64 = 0.01;
const GRADIENT_REL_TOL: f64 = 1e-5;
const GRADIENT_FLOOR: f64 = 1e-6;
const GRADIENT_STEP: f64 = 1e-4;
const LLOYD_STEP_TOL: f64 = 1e-12;
const SYMMETRIC_ENTROPY_GAP: f64 = 0.15;
const DEMO_TRIALS: usize = 100_000;
const DEMO_BUDGET: Duration = Duration::from_secs(300);

type Check = fn() -> Result<String, String>;

fn config_path(name: &str) -> PathBuf {
    manifest_path(&format!("configs/{name}"))
}

fn load_config(name: &str, out: &Path, overrides: &[(&str, &str)]) -> RunConfig {
    let mut flags = KeyValues::default();
    for (k, v) in overrides {
        flags.push(k, *v);
    }
    flags.push("out", out.display().to_string());
    RunConfig::from_layers(Some(&config_path(name)), &flags).unwrap()
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn quantizer_oracle_equivalence() -> Result<String, String> {
    let start = Instant::now();
    let mut r = rng(1);
    let mut ties = 0;
    for i in 0..QUANTIZER_INSTANCES {
        let k = r.random_range(2..=64);
        let n = r.random_range(1..=16);
        // Every third instance lives on an integer grid, every third has a
        // duplicated codeword; both produce exact ties.
        let mut flat: Vec<f64> = (0..k * n)
            .map(|_| if i % 3 == 0 { r.random_range(-2..=2) as f64 } else { r.random_range(-1.0..1.0) })
            .collect();
        if i % 3 == 1 {
            let (a, b) = (r.random_range(0..k), r.random_range(0..k));
            let src: Vec<f64> = flat[a * n..(a + 1) * n].to_vec();
            flat[b * n..(b + 1) * n].copy_from_slice(&src);
        }
        let c = Codebook::from_flat(flat, n).unwrap();
        let z: Vec<f64> = if i % 3 == 1 {
            c.codeword(r.random_range(0..k)).to_vec()
        } else if i % 3 == 0 {
            (0..n).map(|_| r.random_range(-4..=4) as f64 * 0.5).collect()
        } else {
            (0..n).map(|_| r.random_range(-1.0..1.0)).collect()
        };
        let d: Vec<f64> = c.codewords().map(|w| sq_dist(&z, w)).collect();
        let min = d.iter().cloned().fold(f64::INFINITY, f64::min);
        if d.iter().filter(|&&v| v == min).count() > 1 {
            ties += 1;
        }
        let got = quantize(&z, &c).map_err(|e| e.to_string())?;
        let want = argmin_oracle(&z, &c);
        ensure(got == want, || format!("instance {i}: quantize {got}, oracle {want}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < QUANTIZER_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("{QUANTIZER_INSTANCES}/{QUANTIZER_INSTANCES} exact, {ties} with ties, {elapsed:.2?}"))
}

fn entropy_bound_and_extremes() -> Result<String, String> {
    let mut worst_uniform: f64 = 0.0;
    for k in 2..=512 {
        let h = empirical_entropy(&UsageStats::from_counts(vec![3; k]).unwrap());
        worst_uniform = worst_uniform.max((h - (k as f64).ln()).abs());
        let mut one_hot = vec![0; k];
        one_hot[k / 2] = 10;
        let h0 = empirical_entropy(&UsageStats::from_counts(one_hot).unwrap());
        ensure(h0 == 0.0, || format!("one-hot K={k} gave {h0}"))?;
    }
    ensure(worst_uniform <= ENTROPY_EXACT_TOL, || format!("uniform off by {worst_uniform}"))?;
    let mut r = rng(2);
    let mut max_excess = f64::NEG_INFINITY;
    for i in 0..ENTROPY_RANDOM_VECTORS {
        let k = r.random_range(2..=300);
        // Alternate dense, sparse and heavily peaked vectors.
        let raw: Vec<f64> = (0..k)
            .map(|_| match i % 3 {
                0 => r.random_range(0.0..1.0),
                1 => if r.random_bool(0.2) { r.random_range(0.0..1.0) } else { 0.0 },
                _ => r.random_range(0.0f64..1.0).powi(20),
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            continue;
        }
        let mut pi: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let drift: f64 = 1.0 - pi.iter().sum::<f64>();
        pi[0] = (pi[0] + drift).max(0.0);
        let h = empirical_entropy(&UsageStats::from_frequencies(pi).unwrap());
        max_excess = max_excess.max(h - (k as f64).ln());
        ensure(h >= 0.0 && h <= (k as f64).ln() + ENTROPY_BOUND_TOL, || format!("vector {i}: H={h}, K={k}"))?;
    }
    Ok(format!(
        "uniform max error {worst_uniform:.1e}, one-hot 0, max H - ln K over {ENTROPY_RANDOM_VECTORS} vectors {max_excess:.3}"
    ))
}

fn channel_formula_agreement() -> Result<String, String> {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for l in [1u32, 4, 8] {
        let k = 1usize << l;
        let sent = IndexSequence::new((0..CHANNEL_SYMBOLS).map(|i| (i * 7919) % k).collect(), k).unwrap();
        for p in [0.01, 0.05, 0.1, 0.3] {
            let received = transmit_indices(&sent, &ChannelSpec::bsc(k, p).unwrap(), 1000 + l as u64).unwrap();
            let errors = sent.indices().iter().zip(received.indices()).filter(|(a, b)| a != b).count() as f64;
            let pe = 1.0 - (1.0 - p).powi(l as i32);
            let n = CHANNEL_SYMBOLS as f64;
            let z = (errors - n * pe) / (n * pe * (1.0 - pe)).sqrt();
            worst = worst.max(z.abs());
            ensure(z.abs() <= CHANNEL_SIGMAS, || format!("L={l} p={p}: {errors} errors, z = {z:.2}"))?;
        }
    }
    let elapsed = start.elapsed();
    ensure(elapsed < CHANNEL_BUDGET, || format!("took {elapsed:?}"))?;
    Ok(format!("12 cells, worst |z| = {worst:.2}, {elapsed:.2?}"))
}

fn analytic_channel_distortion_vs_monte_carlo() -> Result<String, String> {
    let mut worst: f64 = 0.0;
    for i in 0..20u64 {
        let k = [4usize, 8, 16][i as usize % 3];
        let p = if i % 2 == 0 { 0.1 } else { 0.2 };
        let c = random_codebook(100 + i, k, 8, 1.0);
        let mut r = rng(200 + i);
        let counts: Vec<u64> = (0..k).map(|_| r.random_range(1..100)).collect();
        let stats = UsageStats::from_counts(counts).unwrap();
        let pick = WeightedIndex::new(stats.frequencies()).unwrap();
        let sent = IndexSequence::new((0..JUMP_DRAWS).map(|_| pick.sample(&mut r)).collect(), k).unwrap();
        let received = transmit_indices(&sent, &ChannelSpec::uniform(k, p).unwrap(), 300 + i).unwrap();
        let mc = sent
            .indices()
            .iter()
            .zip(received.indices())
            .map(|(&a, &b)| sq_dist(c.codeword(a), c.codeword(b)))
            .sum::<f64>()
            / JUMP_DRAWS as f64;
        let analytic = channel_distortion(&c, &stats, p).unwrap();
        let rel = (mc - analytic).abs() / analytic;
        worst = worst.max(rel);
        ensure(rel <= JUMP_REL_TOL, || format!("instance {i} (K={k}, p={p}): analytic {analytic}, simulated {mc}"))?;
    }
    Ok(format!("20 codebooks, worst relative gap {:.3}%", worst * 100.0))
}

fn gradient_correctness() -> Result<String, String> {
    let weights = LossWeights::new(0.1, 0.1).unwrap();
    let ch = ChannelSpec::uniform(8, 0.05).unwrap();
    let tau = 1.0;
    let mut worst: f64 = 0.0;
    let mut seed = 0;
    let mut checked = 0;
    let mut skipped = 0;
    while checked < 20 {
        seed += 1;
        let c = random_codebook(seed, 8, 4, 1.0);
        let z = random_features(seed + 500, 200, 4, 1.2);
        let Some(fd) = finite_difference_gradient(&z, &c, &weights, &ch, tau, GRADIENT_STEP) else {
            skipped += 1;
            continue;
        };
        let g = codeword_gradients(&z, &c, &weights, &ch, tau).unwrap();
        let err = max_relative_error(&g, &fd, GRADIENT_FLOOR);
        worst = worst.max(err);
        ensure(err <= GRADIENT_REL_TOL, || format!("seed {seed}: relative error {err:.2e}"))?;
        checked += 1;
    }
    Ok(format!("20 instances, worst relative error {worst:.2e} ({skipped} skipped: a row changed cell)"))
}

fn lloyd_monotonicity() -> Result<String, String> {
    let skewed = generate_mixture(&MixtureSpec::load(config_path("skewed.mix"), 0).unwrap()).unwrap().features;
    let mut runs = 0;
    let mut worst_rise = f64::NEG_INFINITY;
    for seed in 0..12u64 {
        let uniform = random_features(seed, 500, 3, 2.0);
        for (name, z) in [("uniform", &uniform), ("skewed", &skewed)] {
            let k = [2usize, 5, 16, 33][seed as usize % 4];
            let cfg = TrainConfig { epochs: 40, update: UpdateRule::Lloyd, seed, ..TrainConfig::default() };
            let ch = ChannelSpec::uniform(k, 0.0).unwrap();
            let (_, report) = train_codebook(z, k, &LossWeights::quantization_only(), &ch, &cfg).unwrap();
            for w in report.records.windows(2) {
                let rise = w[1].quantization_loss - w[0].quantization_loss;
                worst_rise = worst_rise.max(rise);
                ensure(rise <= LLOYD_STEP_TOL, || format!("{name} seed {seed} K={k} epoch {}: +{rise:e}", w[1].epoch))?;
            }
            runs += 1;
        }
    }
    Ok(format!("{runs} runs x 40 epochs, largest step change {worst_rise:.2e}"))
}

fn trained_entropy(cfg: &RunConfig) -> f64 {
    let z = load_features(cfg).unwrap().features;
    let out = run_train(cfg).unwrap();
    mutual_information_estimate(&z, &out.codebook).unwrap()
}

fn entropy_regularizer_effect() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let base = trained_entropy(&load_config("skewed.cfg", &dir.path().join("g0"), &[("gamma", "0")]));
    let reg = trained_entropy(&load_config("skewed.cfg", &dir.path().join("g1"), &[("gamma", "0.1")]));
    ensure(reg > base, || format!("skewed: gamma=0.1 entropy {reg} not above gamma=0 {base}"))?;
    let sym_cfg = load_config("symmetric.cfg", &dir.path().join("sym"), &[]);
    let ln_k = (sym_cfg.k as f64).ln();
    let sym = trained_entropy(&sym_cfg);
    ensure((ln_k - sym).abs() <= SYMMETRIC_ENTROPY_GAP, || format!("symmetric: H={sym}, ln K={ln_k}"))?;
    Ok(format!(
        "skewed H: {base:.4} -> {reg:.4} nats; symmetric H = {sym:.4} vs ln K = {ln_k:.4}"
    ))
}

fn channel_aware_effect() -> Result<String, String> {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let trials = DEMO_TRIALS.to_string();
    let cfg = load_config("demo.cfg", dir.path(), &[("trials", &trials)]);
    let p = cfg.flip_probability().unwrap();
    ensure(p == 0.05, || format!("demo config runs at p = {p}"))?;
    let report = run_compare(&cfg).map_err(|e| e.to_string())?;
    let base = report.row("baseline", p).ok_or("missing baseline row")?;
    let aware = report.row("channel_aware", p).ok_or("missing channel_aware row")?;
    ensure(base.omega == 0.0 && aware.omega == 0.1, || "variant weights differ from 0 / 0.1".into())?;
    let (ci_b, ci_a) = (1.96 * base.mse_stderr, 1.96 * aware.mse_stderr);
    let elapsed = start.elapsed();
    let detail = format!(
        "MSE omega=0 {:.5} +/- {ci_b:.5}, omega=0.1 {:.5} +/- {ci_a:.5}, {DEMO_TRIALS} trials, {elapsed:.1?}",
        base.mse_mean, aware.mse_mean
    );
    ensure(aware.mse_mean + ci_a < base.mse_mean - ci_b, || format!("intervals overlap: {detail}"))?;
    ensure(elapsed < DEMO_BUDGET, || format!("too slow: {detail}"))?;
    Ok(detail)
}

fn optimal_k_self_consistency() -> Result<String, String> {
    let dir = tempfile::tempdir().unwrap();
    let mut summary = Vec::new();
    for name in ["sweep_fidelity.cfg", "sweep_rate.cfg", "sweep_balanced.cfg"] {
        let cfg = load_config(name, &dir.path().join(name), &[]);
        let z = load_features(&cfg).unwrap().features;
        let out = run_sweep(&cfg).map_err(|e| e.to_string())?;
        let p = out.result.p;
        let lambda = out.result.lambda;
        let mut best: Option<(f64, usize)> = None;
        for c in &out.result.codebooks {
            let j = quantization_oracle(&z, c)
                + channel_distortion_oracle(c, &usage_oracle(&z, c), p)
                + lambda * z.len() as f64 * (c.size() as f64).log2();
            if best.is_none_or(|(b, _)| j < b) {
                best = Some((j, c.size()));
            }
        }
        let oracle_k = best.unwrap().1;
        ensure(out.result.best_k == oracle_k, || format!("{name}: sweep K*={} oracle K*={oracle_k}", out.result.best_k))?;
        let ks = &cfg.ks;
        let (lo, hi) = (*ks.iter().min().unwrap(), *ks.iter().max().unwrap());
        if name == "sweep_rate.cfg" {
            ensure(oracle_k == lo, || format!("rate-dominated sweep chose {oracle_k}, not {lo}"))?;
        }
        if name == "sweep_fidelity.cfg" {
            ensure(lambda == 0.0 && p == 0.0, || "fidelity config is not lambda = 0, p = 0".into())?;
            ensure(oracle_k == hi, || format!("rate-free sweep chose {oracle_k}, not {hi}"))?;
        }
        summary.push(format!("(lambda={lambda}, p={p}) K*={oracle_k}"));
    }
    Ok(summary.join("; "))
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn cli_chain(dir: &Path) -> Result<(), String> {
    let mix = config_path("symmetric.mix").display().to_string();
    let steps: Vec<Vec<&str>> = vec![
        vec!["gen", "--mixture", &mix, "--seed", "4"],
        vec!["train", "--features", "features.semf", "--k", "8", "--p", "0.05", "--seed", "4"],
        vec!["simulate", "--features", "features.semf", "--codebook", "codebook.semc", "--p", "0.05", "--trials", "200", "--seed", "4"],
        vec!["analyze", "--features", "features.semf", "--codebook", "codebook.semc", "--snr-db", "8", "--mod", "16", "--fading", "rayleigh"],
        vec!["sweep", "--features", "features.semf", "--ks", "2,4,8,16", "--ps", "0,0.05,0.1", "--lambda", "0.001", "--p", "0.05", "--seed", "4"],
        vec!["compare", "--features", "features.semf", "--k", "8", "--p", "0.05", "--ps", "0,0.05", "--trials", "50", "--seed", "4", "--confusion", "uniform"],
    ];
    for args in steps {
        let out = Command::new(env!("CARGO_BIN_EXE_semvq"))
            .args(&args)
            .args(["--out", "."])
            .current_dir(dir)
            .output()
            .map_err(|e| e.to_string())?;
        ensure(out.status.success(), || format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))?;
    }
    Ok(())
}

fn determinism() -> Result<String, String> {
    let root = tempfile::tempdir().unwrap();
    let (a, b) = (root.path().join("a"), root.path().join("b"));
    for d in [&a, &b] {
        fs::create_dir_all(d).unwrap();
        cli_chain(d)?;
    }
    let (sa, sb) = (snapshot(&a), snapshot(&b));
    ensure(sa.keys().eq(sb.keys()), || format!("file sets differ: {:?} vs {:?}", sa.keys(), sb.keys()))?;
    for (name, bytes) in &sa {
        ensure(&sb[name] == bytes, || format!("{name} differs between runs"))?;
    }
    Ok(format!("6 commands, {} files byte-identical across two runs", sa.len()))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("quantizer oracle equivalence", quantizer_oracle_equivalence),
        ("entropy bound and extremes", entropy_bound_and_extremes),
        ("channel formula agreement", channel_formula_agreement),
        ("analytic channel distortion vs Monte Carlo", analytic_channel_distortion_vs_monte_carlo),
        ("gradient correctness", gradient_correctness),
        ("Lloyd monotonicity", lloyd_monotonicity),
        ("entropy regularizer effect", entropy_regularizer_effect),
        ("channel-aware effect", channel_aware_effect),
        ("optimal-K self-consistency", optimal_k_self_consistency),
        ("determinism", determinism),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failures += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {}/{} passed", criteria.len() - failures, criteria.len());
    if failures > 0 {
        std::process::exit(1);
    }
}
