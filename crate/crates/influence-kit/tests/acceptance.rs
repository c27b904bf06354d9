//! End-to-end acceptance suite. Each test prints one
//! `ACCEPTANCE <n> <name>: PASS|FAIL` line and then asserts, so the
//! verdict is visible in the log even when a later assertion trips.
//!
//! Expected values come from independent oracles in `common` (finite
//! differences, dense elimination, direct correlation formulas) or from
//! exact retraining; pinned seeds were chosen after multi-seed scans and
//! sit in the typical range, not at a favorable extreme.

mod common;

use std::collections::HashSet;
use std::time::{Duration, Instant};

use ndarray::{Array1, Array2};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use influence_kit::applications::{
    check_nonconvergence_identity, run_loo_validation, run_mislabel_triage,
    run_smooth_hinge_sweep, run_training_attack, upweighted_newton_step, AttackConfig,
    LooPredictor, SweepConfig, TriageStrategy,
};
use influence_kit::influence::{influence_up_loss_batch, influence_variants, s_test};
use influence_kit::synth;
use influence_kit::trainer::train;
use influence_kit::{Dataset, Example, Family, IhvpConfig, ModelSpec, TrainConfig};

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    println!("ACCEPTANCE {n} {name}: {}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "criterion {n} ({name}): {detail}");
}

fn within(budget: Duration, elapsed: Duration) -> bool {
    elapsed <= budget
}

/// LiSSA configuration used wherever the stochastic backend is compared
/// against the explicit solve: depth five passes over the data, averaging
/// eight Hessian samples per recursion step to keep the estimator's
/// variance inside the equivalence budget at the pinned repeat count.
fn lissa_cfg(n: usize, repeats: usize, seed: u64) -> IhvpConfig {
    let mut cfg = IhvpConfig::lissa(5 * n, repeats, seed);
    cfg.lissa_batch = 8;
    cfg
}

#[test]
fn criterion_01_derivative_correctness() {
    let started = Instant::now();
    let pass_budget = Duration::from_secs(10);
    let specs = [
        (ModelSpec::new(Family::BinaryLogistic, 0.05).unwrap(), 2usize),
        (ModelSpec::new(Family::MultinomialLogistic, 0.05).unwrap(), 3),
        (
            ModelSpec::new(Family::SmoothHinge { temperature: 0.1 }, 0.05).unwrap(),
            2,
        ),
        (
            ModelSpec::new(Family::SmoothHinge { temperature: 0.02 }, 0.05).unwrap(),
            2,
        ),
        (ModelSpec::new(Family::Ridge, 0.05).unwrap(), 2),
    ];
    let d = 6usize;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_grad = 0.0f64;
    let mut worst_hvp = 0.0f64;
    let mut draws_per_family = usize::MAX;
    for (spec, k) in &specs {
        let p = spec.param_len(d, *k);
        let mut draws = 0usize;
        for _ in 0..120 {
            let theta =
                Array1::from_shape_fn(p, |_| 0.7 * rng.sample::<f64, _>(StandardNormal));
            let features =
                Array1::from_shape_fn(d, |_| rng.sample::<f64, _>(StandardNormal));
            let label = match spec.family {
                Family::MultinomialLogistic => rng.random_range(0..*k as i32),
                _ => {
                    if rng.random::<bool>() {
                        1
                    } else {
                        -1
                    }
                }
            };
            let z = Example::new(features, label);
            let analytic_g = spec.grad_theta(&theta, z.view()).unwrap();
            let fd_g = common::central_grad(|t| spec.loss(t, z.view()).unwrap(), &theta);
            worst_grad = worst_grad.max(common::rel_err(&analytic_g, &fd_g, 1e-10));

            let v = Array1::from_shape_fn(p, |_| rng.sample::<f64, _>(StandardNormal));
            let analytic_h = spec.hvp(&theta, z.view(), &v).unwrap();
            let fd_h = common::central_directional(
                |t| spec.grad_theta(t, z.view()).unwrap(),
                &theta,
                &v,
            );
            worst_hvp = worst_hvp.max(common::rel_err(&analytic_h, &fd_h, 1e-10));
            draws += 1;
        }
        draws_per_family = draws_per_family.min(draws);
    }
    let elapsed = started.elapsed();
    let pass = worst_grad <= 1e-5
        && worst_hvp <= 1e-4
        && draws_per_family >= 100
        && within(pass_budget, elapsed);
    verdict(
        1,
        "derivative-correctness",
        pass,
        &format!(
            "worst grad rel {worst_grad:.3e} (<=1e-5), worst hvp rel {worst_hvp:.3e} \
             (<=1e-4), {draws_per_family} draws/family, {elapsed:?} (<10s)"
        ),
    );
}

#[test]
fn criterion_02_ihvp_oracle_equivalence() {
    let started = Instant::now();
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01).unwrap();
    let data = synth::gaussian_binary(500, 20, 1.2, 5).unwrap();
    let artifact = train(&spec, &data, &TrainConfig::default()).unwrap();
    let pool = synth::gaussian_binary(100, 20, 1.2, 1005).unwrap();
    let z = pool.example(0);
    let exact = s_test(&spec, &artifact, &data, z, &IhvpConfig::explicit()).unwrap();
    let cg = s_test(&spec, &artifact, &data, z, &IhvpConfig::cg()).unwrap();
    let lissa = s_test(&spec, &artifact, &data, z, &lissa_cfg(data.n(), 10, 12)).unwrap();
    let cg_rel = common::rel_err(&cg.s, &exact.s, 1e-30);
    let lissa_rel = common::rel_err(&lissa.s, &exact.s, 1e-30);
    let elapsed = started.elapsed();
    let pass = cg_rel <= 1e-6 && lissa_rel <= 0.05 && within(Duration::from_secs(30), elapsed);
    verdict(
        2,
        "ihvp-oracle-equivalence",
        pass,
        &format!(
            "cg rel {cg_rel:.3e} (<=1e-6), lissa rel {lissa_rel:.4} (<=0.05), \
             {elapsed:?} (<30s)"
        ),
    );
}

#[test]
fn criterion_03_loo_validation() {
    let started = Instant::now();
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01).unwrap();
    let tc = TrainConfig::default();
    let data = synth::gaussian_binary(500, 20, 1.2, 5).unwrap();
    let artifact = train(&spec, &data, &tc).unwrap();
    let pool = synth::gaussian_binary(200, 20, 1.2, 505).unwrap();
    let mis = (0..pool.n())
        .find(|&i| {
            let z = pool.example(i);
            f64::from(z.label) * artifact.theta.dot(&z.features) < 0.0
        })
        .expect("pool contains a misclassified point");
    let z = pool.example(mis);

    let explicit = run_loo_validation(
        &spec,
        &data,
        z,
        &IhvpConfig::explicit(),
        100,
        &tc,
        LooPredictor::Linearized,
    )
    .unwrap();
    // Correlation recomputed from the raw pairs with the independent
    // formula rather than trusting the run's own statistics.
    let predicted: Vec<f64> = explicit.pairs.iter().map(|p| p.predicted_loo_delta).collect();
    let actual: Vec<f64> = explicit.pairs.iter().map(|p| p.actual_loo_delta).collect();
    let r_explicit = common::pearson(&predicted, &actual);

    let lissa = run_loo_validation(
        &spec,
        &data,
        z,
        &lissa_cfg(data.n(), 10, 12),
        100,
        &tc,
        LooPredictor::Linearized,
    )
    .unwrap();
    let lp: Vec<f64> = lissa.pairs.iter().map(|p| p.predicted_loo_delta).collect();
    let la: Vec<f64> = lissa.pairs.iter().map(|p| p.actual_loo_delta).collect();
    let r_lissa = common::pearson(&lp, &la);

    // Single-repeat stochastic run must still recover the explicit
    // top-10 most harmful training points almost entirely.
    let full_explicit =
        influence_up_loss_batch(&spec, &artifact, &data, z, None, &IhvpConfig::explicit())
            .unwrap();
    let full_r1 =
        influence_up_loss_batch(&spec, &artifact, &data, z, None, &lissa_cfg(data.n(), 1, 12))
            .unwrap();
    let top10 = |report: &influence_kit::InfluenceReport| -> HashSet<usize> {
        let mut ranked: Vec<(usize, f64)> = report
            .scores
            .iter()
            .map(|s| (s.train_idx, s.i_up_loss))
            .collect();
        ranked.sort_by(|a, b| b.1.total_cmp(&a.1));
        ranked.truncate(10);
        ranked.into_iter().map(|(i, _)| i).collect()
    };
    let overlap = top10(&full_explicit).intersection(&top10(&full_r1)).count();

    let elapsed = started.elapsed();
    let pass = r_explicit >= 0.95
        && (r_explicit - r_lissa).abs() <= 0.02
        && overlap >= 8
        && explicit.failures.is_empty()
        && lissa.failures.is_empty()
        && within(Duration::from_secs(300), elapsed);
    verdict(
        3,
        "loo-validation",
        pass,
        &format!(
            "R explicit {r_explicit:.4} (>=0.95), |dR| {:.4} (<=0.02), r=1 top-10 overlap \
             {overlap}/10 (>=8), {elapsed:?} (<5min)",
            (r_explicit - r_lissa).abs()
        ),
    );
}

#[test]
fn criterion_04_quadratic_exactness() {
    let spec = ModelSpec::new(Family::Ridge, 0.1).unwrap();
    let tc = TrainConfig::default();
    let data = synth::gaussian_binary(200, 10, 1.2, 0).unwrap();
    let pool = synth::gaussian_binary(50, 10, 1.2, 900).unwrap();
    let run = run_loo_validation(
        &spec,
        &data,
        pool.example(0),
        &IhvpConfig::explicit(),
        50,
        &tc,
        LooPredictor::NewtonStep,
    )
    .unwrap();
    let max_rel = run
        .pairs
        .iter()
        .map(|p| {
            (p.predicted_loo_delta - p.actual_loo_delta).abs()
                / p.actual_loo_delta.abs().max(1e-12)
        })
        .fold(0.0f64, f64::max);
    let pass = max_rel <= 1e-6 && run.failures.is_empty() && run.pairs.len() == 50;
    verdict(
        4,
        "quadratic-exactness",
        pass,
        &format!(
            "max per-point rel {max_rel:.3e} (<=1e-6) over {} retrained points",
            run.pairs.len()
        ),
    );
}

#[test]
fn criterion_05_smooth_hinge_sweep() {
    let started = Instant::now();
    let data = synth::margin_dataset(3000, 10, 42).unwrap();
    let d = data.d();
    // Probe with a component against the class direction and one across
    // it, so rankings depend on the anisotropic curvature.
    let probe = Example::new(
        Array1::from_shape_fn(d, |j| {
            let sign: f64 = if j % 2 == 0 { 1.0 } else { -1.0 };
            (-0.4 + 0.8 * sign) / (d as f64).sqrt()
        }),
        -1,
    );
    let sweep = run_smooth_hinge_sweep(
        &data,
        &[0.001, 0.1],
        0.01,
        probe.view(),
        60,
        &SweepConfig::default(),
    )
    .unwrap();
    let r_at = |t: f64| -> f64 {
        let run = sweep
            .runs
            .iter()
            .find(|r| (r.temperature - t).abs() < 1e-12)
            .expect("temperature present");
        let p: Vec<f64> = run.validation.pairs.iter().map(|x| x.predicted_loo_delta).collect();
        let a: Vec<f64> = run.validation.pairs.iter().map(|x| x.actual_loo_delta).collect();
        common::pearson(&p, &a)
    };
    let r_fine = r_at(0.001);
    let r_coarse = r_at(0.1);
    let zero = sweep.zero_fill.as_ref().expect("zero-fill diagnostic present");
    let zp: Vec<f64> = zero.pairs.iter().map(|x| x.predicted_loo_delta).collect();
    let za: Vec<f64> = zero.pairs.iter().map(|x| x.actual_loo_delta).collect();
    let r_zero = common::pearson(&zp, &za);
    let elapsed = started.elapsed();
    let pass = r_fine >= 0.9
        && r_coarse >= 0.8
        && r_coarse < r_fine
        && r_zero <= r_fine - 0.05
        && within(Duration::from_secs(300), elapsed);
    verdict(
        5,
        "smooth-hinge-sweep",
        pass,
        &format!(
            "R(t=0.001) {r_fine:.4} (>=0.9), R(t=0.1) {r_coarse:.4} (>=0.8 and <R fine), \
             zero-fill {r_zero:.4} (<=R fine - 0.05), {elapsed:?} (<5min)"
        ),
    );
}

#[test]
fn criterion_06_nonconvergence_identity() {
    let started = Instant::now();
    let tc = TrainConfig::default();
    let data = synth::gaussian_binary(300, 8, 1.5, 0).unwrap();

    // Early-stopped logistic: the deviation between the exact upweighted
    // Newton step and its first-order split halves with epsilon.
    let logistic = ModelSpec::new(Family::BinaryLogistic, 0.01).unwrap();
    let points: Vec<usize> = (0..8).collect();
    let eps = 3e-4;
    let full =
        check_nonconvergence_identity(&logistic, &data, 1e-2, 0.01, eps, &points, &tc).unwrap();
    let half =
        check_nonconvergence_identity(&logistic, &data, 1e-2, 0.01, eps / 2.0, &points, &tc)
            .unwrap();
    let ratio = half.max_relative_deviation / full.max_relative_deviation;
    let grad_ok = full.grad_norm <= 1e-2 && full.grad_norm >= 1e-3;

    // Quadratic objective: one undamped upweighted Newton step lands on
    // the reweighted minimizer, checked against a dense elimination
    // oracle assembled directly from the data.
    let ridge = ModelSpec::new(Family::Ridge, 0.1).unwrap();
    let theta = train(&ridge, &data, &tc).unwrap().theta;
    let n = data.n();
    let d = data.d();
    let mut quad_worst = 0.0f64;
    for (z_idx, eps_q) in [(3usize, -1.0 / n as f64), (17, 0.25)] {
        let stepped = &theta
            + &upweighted_newton_step(&ridge, &data, &theta, data.example(z_idx), eps_q, 0.0)
                .unwrap();
        let mut a = vec![vec![0.0f64; d]; d];
        let mut b = vec![0.0f64; d];
        let features = data.features();
        for i in 0..n {
            let w = 1.0 / n as f64 + if i == z_idx { eps_q } else { 0.0 };
            let x = features.row(i);
            let y = f64::from(data.labels()[i]);
            for r in 0..d {
                for c in 0..d {
                    a[r][c] += w * x[r] * x[c];
                }
                b[r] += w * y * x[r];
            }
        }
        for r in 0..d {
            a[r][r] += (1.0 + eps_q) * ridge.l2;
        }
        let oracle = Array1::from_vec(common::solve_dense(a, b));
        quad_worst = quad_worst.max(common::rel_err(&stepped, &oracle, 1e-30));
    }

    let elapsed = started.elapsed();
    let pass = (0.4..=0.6).contains(&ratio)
        && grad_ok
        && quad_worst <= 1e-10
        && within(Duration::from_secs(60), elapsed);
    verdict(
        6,
        "nonconvergence-identity",
        pass,
        &format!(
            "halving ratio {ratio:.3} (in 0.4..0.6), stopped grad {:.3e} (~1e-2), quadratic \
             deviation {quad_worst:.3e} (<=1e-10), {elapsed:?} (<1min)",
            full.grad_norm
        ),
    );
}

#[test]
fn criterion_07_mislabel_triage() {
    let started = Instant::now();
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01).unwrap();
    let clean = synth::bag_of_words(400, 30, 0).unwrap();
    // Flipped-label refits sometimes stall a hair above the default
    // gradient tolerance; 1e-7 is far below the resolution the curves
    // need and keeps all 80 runs convergent.
    let tc = TrainConfig {
        tol_grad: 1e-7,
        ..TrainConfig::default()
    };
    let grid = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
    let repeats = 40u64;
    let mut influence_mean = vec![0.0f64; grid.len()];
    let mut random_samples: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
    let mut effective_fraction = vec![0.0f64; grid.len()];
    for rep in 0..repeats {
        let inf = run_mislabel_triage(
            &spec,
            &clean,
            0.1,
            TriageStrategy::Influence,
            rep,
            &grid,
            &tc,
            &IhvpConfig::explicit(),
        )
        .unwrap();
        let rnd = run_mislabel_triage(
            &spec,
            &clean,
            0.1,
            TriageStrategy::Random,
            rep,
            &grid,
            &tc,
            &IhvpConfig::explicit(),
        )
        .unwrap();
        for (i, p) in inf.curve.iter().enumerate() {
            influence_mean[i] += p.fraction_flips_found / repeats as f64;
        }
        for (i, p) in rnd.curve.iter().enumerate() {
            random_samples[i].push(p.fraction_flips_found);
            effective_fraction[i] = p.fraction_checked;
        }
    }
    let random_mean: Vec<f64> = random_samples
        .iter()
        .map(|v| v.iter().sum::<f64>() / repeats as f64)
        .collect();
    let at_10 = grid.iter().position(|&f| (f - 0.10).abs() < 1e-12).unwrap();
    let dominates = influence_mean
        .iter()
        .zip(&random_mean)
        .all(|(inf, rnd)| inf >= rnd);
    let random_tracks_diagonal = (0..grid.len()).all(|i| {
        let mean = random_mean[i];
        let var = random_samples[i]
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (repeats as f64 - 1.0);
        let se = (var / repeats as f64).sqrt();
        (mean - effective_fraction[i]).abs() <= 3.0 * se
    });
    let elapsed = started.elapsed();
    let pass = influence_mean[at_10] >= 2.0 * random_mean[at_10]
        && dominates
        && random_tracks_diagonal
        && within(Duration::from_secs(600), elapsed);
    verdict(
        7,
        "mislabel-triage",
        pass,
        &format!(
            "influence@10% {:.3} vs random {:.3} (>=2x), dominates {dominates}, random within \
             3 SE of diagonal {random_tracks_diagonal}, {elapsed:?} (<10min)",
            influence_mean[at_10], random_mean[at_10]
        ),
    );
}

#[test]
fn criterion_08_training_set_attack() {
    let started = Instant::now();
    let (train_data, targets) = synth::attack_instance(0).unwrap();
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01).unwrap();
    let state = run_training_attack(
        &spec,
        &train_data,
        &targets,
        0.02,
        synth::ATTACK_LEVELS,
        100,
        1,
        &AttackConfig::default(),
    )
    .unwrap();
    let invariant = state.log.iter().all(|it| it.quantization_ok);
    let elapsed = started.elapsed();
    let pass = !state.flips.is_empty()
        && invariant
        && !state.log.is_empty()
        && within(Duration::from_secs(300), elapsed);
    verdict(
        8,
        "training-set-attack",
        pass,
        &format!(
            "flips {:?} (nonempty), quantization invariant {invariant} over {} iterations, \
             {elapsed:?} (<5min)",
            state.flips,
            state.log.len()
        ),
    );
}

#[test]
fn criterion_09_ablation_coherence() {
    // Strictly positive feature grid with mixed labels; no ridge term so
    // the closed forms and the generic engine describe the same loss.
    let n = 60usize;
    let d = 5usize;
    let features = Array2::from_shape_fn((n, d), |(i, j)| {
        0.15 + 0.8 * ((i * 5 + j + 1) as f64 * 0.618_033_988_749_894_9).fract()
    });
    let labels: Vec<i32> = (0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
    let data = Dataset::new(features, labels, 2).unwrap();
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.0).unwrap();
    let artifact = train(&spec, &data, &TrainConfig::default()).unwrap();
    let z_test = Example::new(Array1::from_vec(vec![0.3, 0.45, 0.25, 0.6, 0.5]), 1);

    let table = influence_variants(&spec, &artifact, &data, z_test.view()).unwrap();
    let generic = influence_up_loss_batch(
        &spec,
        &artifact,
        &data,
        z_test.view(),
        None,
        &IhvpConfig::explicit(),
    )
    .unwrap();
    let mut by_idx = vec![0.0f64; data.n()];
    for s in &generic.scores {
        by_idx[s.train_idx] = s.i_up_loss;
    }
    let scale = by_idx.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let max_rel = table
        .iter()
        .map(|v| (v.full - by_idx[v.train_idx]).abs() / by_idx[v.train_idx].abs().max(1e-6 * scale))
        .fold(0.0f64, f64::max);

    let signs_ok = table.iter().all(|v| {
        let expected = -f64::from(z_test.label) * f64::from(data.labels()[v.train_idx]);
        v.identity_hessian.signum() == expected.signum()
    });
    let pass = max_rel <= 1e-8 && signs_ok;
    verdict(
        9,
        "ablation-coherence",
        pass,
        &format!(
            "closed-form vs generic max rel {max_rel:.3e} (<=1e-8), identity-Hessian signs \
             match -y_test*y: {signs_ok}"
        ),
    );
}

#[test]
fn criterion_10_reproducibility() {
    let bin = env!("CARGO_BIN_EXE_influence-kit");
    let dir = std::env::temp_dir().join(format!("influence-kit-acc-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = |name: &str| dir.join(name).display().to_string();

    let model_out = path("model.json");
    // Train once up front so the commands that read a model artifact have
    // one; its own byte-stability is checked like the rest.
    let seed_train = [
        "train",
        "--data",
        "synth:logistic:n=60,d=5,sep=1.5,seed=3",
        "--out",
        &model_out,
    ];
    run_ok(bin, &seed_train);

    let train_data = "synth:logistic:n=60,d=5,sep=1.5,seed=3";
    let commands: Vec<Vec<String>> = vec![
        vec_of(&["train", "--data", train_data]),
        vec_of(&[
            "influence",
            "--model",
            &model_out,
            "--train-data",
            train_data,
            "--test-data",
            "synth:logistic:n=20,d=5,sep=1.5,seed=77",
            "--test-idx",
            "0",
            "--ihvp",
            "lissa",
            "--lissa-depth",
            "200",
            "--lissa-repeats",
            "2",
            "--seed",
            "9",
        ]),
        vec_of(&[
            "self-influence",
            "--model",
            &model_out,
            "--train-data",
            train_data,
        ]),
        vec_of(&[
            "loo-validate",
            "--data",
            "synth:logistic:n=80,d=5,sep=1.5,seed=2",
            "--test-data",
            "synth:logistic:n=20,d=5,sep=1.5,seed=77",
            "--test-idx",
            "1",
            "--top-k",
            "10",
        ]),
        vec_of(&[
            "sweep-hinge",
            "--data",
            "synth:margin:n=200,d=6,seed=4",
            "--test-data",
            "synth:margin:n=40,d=6,seed=5",
            "--test-idx",
            "0",
            "--temperatures",
            "0.01,0.1",
            "--top-k",
            "15",
        ]),
        vec_of(&[
            "fix-labels",
            "--data",
            "synth:bow:n=120,d=10,seed=2",
            "--flip-frac",
            "0.1",
            "--strategy",
            "influence",
            "--repeats",
            "2",
            "--seed",
            "6",
            "--grid",
            "0.1,0.2",
        ]),
        vec_of(&[
            "attack",
            "--data",
            "synth:attack:seed=1",
            "--targets",
            "synth:attack:seed=1",
            "--alpha",
            "0.02",
            "--iters",
            "5",
            "--budget",
            "1",
        ]),
        vec_of(&[
            "identity-check",
            "--data",
            "synth:logistic:n=100,d=5,sep=1.5,seed=8",
            "--stop-grad-norm",
            "1e-2",
            "--epsilon",
            "1e-3",
            "--sample-points",
            "0,1,2",
        ]),
    ];

    let mut all_identical = true;
    let mut detail = String::new();
    for (i, base) in commands.iter().enumerate() {
        let out_a = path(&format!("cmd{i}_a.json"));
        let out_b = path(&format!("cmd{i}_b.json"));
        let stdout_a = run_with_out(bin, base, &out_a);
        let stdout_b = run_with_out(bin, base, &out_b);
        let bytes_a = std::fs::read(&out_a).unwrap();
        let bytes_b = std::fs::read(&out_b).unwrap();
        if bytes_a != bytes_b || stdout_a != stdout_b {
            all_identical = false;
            detail.push_str(&format!("{} rerun differs; ", base[0]));
        }
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(
        10,
        "reproducibility",
        all_identical,
        &format!("{detail}all {} commands byte-identical on rerun", commands.len()),
    );
}

fn vec_of(parts: &[&str]) -> Vec<String> {
    parts.iter().map(|s| s.to_string()).collect()
}

fn run_ok(bin: &str, args: &[&str]) {
    let output = std::process::Command::new(bin)
        .args(args)
        .arg("--no-timestamp")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&output.stderr)
    );
}

/// Run a command with `--no-timestamp` and a fresh `--out`, asserting
/// success; returns captured stdout (the one-line headline, which echoes
/// the out path only for `train`, so reruns stay comparable).
fn run_with_out(bin: &str, base: &[String], out: &str) -> Vec<u8> {
    let output = std::process::Command::new(bin)
        .args(base)
        .arg("--out")
        .arg(out)
        .arg("--no-timestamp")
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "command {:?} failed: {}",
        base,
        String::from_utf8_lossy(&output.stderr)
    );
    // The headline echoes the output path for some commands; strip the
    // differing path before comparing.
    let text = String::from_utf8(output.stdout).unwrap();
    text.replace(out, "<out>").into_bytes()
}
