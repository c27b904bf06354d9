//! Score every training point's influence on one test prediction, with all
//! three inverse-Hessian backends, and compare their rankings.
//!
//! The influence of upweighting training point z on the loss at z_test is
//! -∇L(z_test)ᵀ(H+λI)⁻¹∇L(z): negative scores mean "upweighting z would
//! lower the test loss" (a helpful point), positive scores mean the point
//! is hurting this particular prediction. One linear solve per test point
//! is shared across all n training scores.

use influence_kit::influence::influence_up_loss_batch;
use influence_kit::synth;
use influence_kit::trainer::train;
use influence_kit::{Family, IhvpConfig, ModelSpec, TrainConfig};
use std::collections::HashSet;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth::gaussian_binary(500, 12, 1.5, 3)?;
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
    let artifact = train(&spec, &data, &TrainConfig::default())?;

    // Probe with a point the model gets wrong: draw fresh candidates and
    // keep the first misclassified one.
    let pool = synth::gaussian_binary(200, 12, 1.5, 99)?;
    let test_idx = (0..pool.n())
        .find(|&i| {
            let z = pool.example(i);
            f64::from(z.label) * artifact.theta.dot(&z.features) <= 0.0
        })
        .expect("the pool should contain at least one misclassified point");
    let z_test = pool.example(test_idx);

    let explicit = influence_up_loss_batch(
        &spec,
        &artifact,
        &data,
        z_test,
        None,
        &IhvpConfig::explicit(),
    )?;

    println!("most harmful training points (raising the test loss):");
    for s in explicit.scores.iter().filter(|s| s.i_up_loss > 0.0).take(5) {
        println!(
            "  train[{:3}]  i_up_loss {:+.4e}  predicted loo delta {:+.4e}",
            s.train_idx,
            s.i_up_loss,
            -s.i_up_loss / data.n() as f64
        );
    }
    println!("most helpful training points (lowering the test loss):");
    for s in explicit.scores.iter().filter(|s| s.i_up_loss < 0.0).take(5) {
        println!(
            "  train[{:3}]  i_up_loss {:+.4e}  predicted loo delta {:+.4e}",
            s.train_idx,
            s.i_up_loss,
            -s.i_up_loss / data.n() as f64
        );
    }

    // The iterative backends should land on the same leaderboard.
    let cg = influence_up_loss_batch(&spec, &artifact, &data, z_test, None, &IhvpConfig::cg())?;
    let lissa_cfg = IhvpConfig::lissa(5 * data.n(), 10, 42);
    let lissa = influence_up_loss_batch(&spec, &artifact, &data, z_test, None, &lissa_cfg)?;

    let top = |r: &influence_kit::InfluenceReport| -> HashSet<usize> {
        r.scores.iter().take(10).map(|s| s.train_idx).collect()
    };
    let top_explicit = top(&explicit);
    println!(
        "top-10 overlap with explicit solve: cg {}/10, lissa {}/10",
        top(&cg).intersection(&top_explicit).count(),
        top(&lissa).intersection(&top_explicit).count()
    );
    println!(
        "lissa diagnostics: depth {:?}, repeats {:?}, residual {:?}",
        lissa.ihvp_diagnostics.depth,
        lissa.ihvp_diagnostics.repeats,
        lissa.ihvp_diagnostics.residual
    );
    Ok(())
}
