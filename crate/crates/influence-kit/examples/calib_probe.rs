//! Throwaway: epsilon choice for the identity ratio; triage config retry; attack scan.
use influence_kit::applications::{
    check_nonconvergence_identity, run_mislabel_triage, run_training_attack, AttackConfig,
    TriageStrategy,
};
use influence_kit::synth;
use influence_kit::{Family, IhvpConfig, ModelSpec, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tc = TrainConfig::default();
    if false { println!("--- c6 ratios by epsilon ---");
    let logi = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
    for eps in [1.0 / 300.0, 1e-3, 3e-4] {
        let mut line = format!("eps {eps:.1e}:");
        for seed in 0..10u64 {
            let data = synth::gaussian_binary(300, 8, 1.5, seed)?;
            let points: Vec<usize> = (0..8).collect();
            let full = check_nonconvergence_identity(&logi, &data, 1e-2, 0.01, eps, &points, &tc)?;
            let half = check_nonconvergence_identity(&logi, &data, 1e-2, 0.01, eps / 2.0, &points, &tc)?;
            line.push_str(&format!(" {:.3}", half.max_relative_deviation / full.max_relative_deviation));
        }
        println!("{line}");
    }

    }
    println!("--- c7 retry with tol 1e-7 ---");
    let grid = [0.05, 0.10, 0.15, 0.20, 0.25, 0.30];
    let tc7 = TrainConfig { tol_grad: 1e-7, ..TrainConfig::default() };
    for base in 0..4u64 {
        let clean = synth::bag_of_words(400, 30, base)?;
        let spec = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
        let mut inf = vec![0.0f64; grid.len()];
        let mut rnd_vals: Vec<Vec<f64>> = vec![Vec::new(); grid.len()];
        for rep in 0..40u64 {
            let a = run_mislabel_triage(&spec, &clean, 0.1, TriageStrategy::Influence, rep, &grid, &tc7, &IhvpConfig::explicit())?;
            let b = run_mislabel_triage(&spec, &clean, 0.1, TriageStrategy::Random, rep, &grid, &tc7, &IhvpConfig::explicit())?;
            for (i, p) in a.curve.iter().enumerate() { inf[i] += p.fraction_flips_found; }
            for (i, p) in b.curve.iter().enumerate() { rnd_vals[i].push(p.fraction_flips_found); }
        }
        let inf: Vec<f64> = inf.iter().map(|v| v / 40.0).collect();
        let rnd: Vec<f64> = rnd_vals.iter().map(|v| v.iter().sum::<f64>() / 40.0).collect();
        let dominates = inf.iter().zip(&rnd).all(|(a, b)| a >= b);
        let se_ok = grid.iter().enumerate().all(|(i, &f)| {
            let mean = rnd[i];
            let var = rnd_vals[i].iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 39.0;
            let se = (var / 40.0).sqrt();
            (mean - f).abs() <= 3.0 * se
        });
        println!(
            "base {base}: inf@10% {:.3} rnd@10% {:.3} ratio {:.2} dominates {dominates} se_ok {se_ok}",
            inf[1], rnd[1], inf[1] / rnd[1]
        );
    }

    println!("--- c8: attack flips (alpha=0.02) ---");
    for seed in 0..8u64 {
        let (train_data, targets) = synth::attack_instance(seed)?;
        let spec = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
        let st = run_training_attack(&spec, &train_data, &targets, 0.02, synth::ATTACK_LEVELS, 100, 1, &AttackConfig::default())?;
        let inv = st.log.iter().all(|it| it.quantization_ok);
        println!("seed {seed}: flips {:?} iters {} invariant {inv}", st.flips, st.iteration);
    }
    Ok(())
}
