//! A data-poisoning simulation with an invisibility constraint.
//!
//! The attacker may move a few training points, but the poisoned
//! features must round back to the exact same 8-bit codes as the
//! originals — to a data pipeline that quantizes its inputs, the attack
//! is invisible. Each iteration takes a sign step along the
//! perturbation influence toward raising the target's loss, projects
//! back into the quantization-preserving box, and retrains.
//!
//! The box is genuinely restrictive: moving one point moves the
//! decision boundary at the target by about 1e-3 in logit terms. The
//! runs below bracket that reach from both sides.

use influence_kit::applications::{run_training_attack, AttackConfig, AttackState};
use influence_kit::synth;
use influence_kit::trainer::train;
use influence_kit::{Dataset, Family, ModelSpec, TrainConfig};
use ndarray::{Array1, Axis};

fn describe(tag: &str, state: &AttackState) {
    println!("{tag}");
    println!(
        "  attacked train rows {:?} over {} iterations",
        state.perturbed_indices, state.iteration
    );
    for it in state.log.iter().take(5) {
        println!(
            "    iter {:3}  target loss {:.6}  max displacement {:.5}  quantization ok: {}",
            it.iteration, it.mean_target_loss, it.max_sup_displacement, it.quantization_ok
        );
    }
    if state.log.len() > 5 {
        println!("    ... {} more iterations", state.log.len() - 5);
    }
    match state.flips.as_slice() {
        [] => println!("  no target flipped within budget"),
        flips => println!("  flipped target predictions: {flips:?}"),
    }
    // The invariant the whole construction hangs on: every poisoned
    // feature still rounds to its original code.
    assert!(state.log.iter().all(|it| it.quantization_ok));
}

/// A target the trained model classifies positive with the given
/// probability, built by sliding a grid-center point along θ.
fn target_at(
    train_data: &Dataset,
    theta: &Array1<f64>,
    prob: f64,
) -> Result<Dataset, influence_kit::Error> {
    let wanted = (prob / (1.0 - prob)).ln();
    let base = Array1::from_elem(train_data.d(), 0.5);
    let shift = (wanted - theta.dot(&base)) / theta.dot(theta);
    let x = &base + &(theta * shift);
    Dataset::new(x.insert_axis(Axis(0)), vec![1], 2)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train_data, stock_targets) = synth::attack_instance(11)?;
    let spec = ModelSpec::new(Family::BinaryLogistic, 0.01)?;
    let alpha = 0.0005;
    let run = |targets: &Dataset, budget: usize| {
        run_training_attack(
            &spec,
            &train_data,
            targets,
            alpha,
            synth::ATTACK_LEVELS,
            100,
            budget,
            &AttackConfig::default(),
        )
    };

    // A target a hair past the boundary falls to a single poisoned row.
    let easy = run(&stock_targets, 1)?;
    describe("target at probability 0.5001, budget 1:", &easy);
    assert_eq!(easy.flips, vec![0]);

    // Ten times deeper and the quantization box wins: one row cannot
    // drag the boundary far enough no matter how long it tries.
    let theta = train(&spec, &train_data, &TrainConfig::default())?.theta;
    let deeper = target_at(&train_data, &theta, 0.501)?;
    let blocked = run(&deeper, 1)?;
    describe("\ntarget at probability 0.501, budget 1:", &blocked);
    assert!(blocked.flips.is_empty());

    // Four rows moving in concert reach it in a couple of steps.
    let swarmed = run(&deeper, 4)?;
    describe("\ntarget at probability 0.501, budget 4:", &swarmed);
    assert_eq!(swarmed.flips, vec![0]);

    println!("\nquantization invariant held at every iteration of every run");
    Ok(())
}
