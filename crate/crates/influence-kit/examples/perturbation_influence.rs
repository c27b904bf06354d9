//! Feature-space influence: how does nudging one training point's features
//! move the loss at a test point?
//!
//! influence_pert_loss returns the gradient -s_testᵀ∇ₓ∇θL(z) with respect
//! to z's features. Dotted with a feature step δ and scaled by 1/n it is a
//! first-order prediction of the test-loss change after retraining on the
//! moved point — verified here against an actual retrain.

use influence_kit::influence::{influence_pert_loss, influence_up_loss_batch};
use influence_kit::synth;
use influence_kit::trainer::train;
use influence_kit::{Family, IhvpConfig, ModelSpec, TrainConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = synth::gaussian_binary(250, 6, 1.5, 11)?;
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
    let artifact = train(&spec, &data, &TrainConfig::default())?;

    let pool = synth::gaussian_binary(80, 6, 1.5, 77)?;
    let z_test = pool.example(0);

    // Pick the training point with the largest upweighting influence on
    // the probe; it is also the most movable one.
    let report = influence_up_loss_batch(
        &spec,
        &artifact,
        &data,
        z_test,
        None,
        &IhvpConfig::explicit(),
    )?;
    let target = report.scores[0].train_idx;

    let sensitivity = influence_pert_loss(
        &spec,
        &artifact,
        &data,
        data.example(target),
        z_test,
        &IhvpConfig::explicit(),
    )?;
    println!("perturbation influence for train[{target}] on the probe:");
    for (j, v) in sensitivity.iter().enumerate() {
        println!("  feature[{j}]  {v:+.4e}");
    }

    // First-order check: step the point along the sensitivity direction.
    let step = 1e-3;
    let delta = sensitivity.mapv(|v| step * v / sensitivity.dot(&sensitivity).sqrt());
    let predicted = sensitivity.dot(&delta) / data.n() as f64;

    let mut moved_row = data.features().row(target).to_owned();
    moved_row += &delta;
    let moved = data.with_features_row(target, moved_row.view())?;
    let retrain_cfg = TrainConfig::default().with_warm_start(artifact.theta.clone());
    let retrained = train(&spec, &moved, &retrain_cfg)?;

    let before = spec.loss(&artifact.theta, z_test)?;
    let after = spec.loss(&retrained.theta, z_test)?;
    println!("predicted test-loss change {:+.6e}", predicted);
    println!("actual after retraining    {:+.6e}", after - before);
    Ok(())
}
