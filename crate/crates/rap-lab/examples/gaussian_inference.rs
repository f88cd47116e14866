//! Inference under dropconnect without sampling every mask: the
//! pre-activations of the dropconnect layer are approximated as
//! Gaussians via moment matching, sampled a few times, and the softmax
//! outputs averaged. Compares predictions against the plain
//! deterministic forward pass.

use rap_lab::data::{disjoint_split, synthetic_dataset};
use rap_lab::net::{
    forward, gaussian_inference, init_mlp, train, DropconnectConfig, NetArchitecture, TrainConfig,
};
use rap_lab::rng::subseed;

fn main() -> rap_lab::Result<()> {
    let seed = 23;
    let arch = NetArchitecture::new(vec![20, 16, 12, 4])?;
    let full = synthetic_dataset(4, 20, 500, 0.08, subseed(seed, 0))?;
    let (train_set, test_set) = disjoint_split(&full, 400, 100, subseed(seed, 1))?;
    let config = TrainConfig {
        epochs: 10,
        schedule: vec![(10, 0.5)],
        batch_size: 10,
        seed: subseed(seed, 2),
    };
    let mlp = init_mlp(&arch, subseed(seed, 3));
    let layers = arch.num_weight_layers();
    let dropconnect = DropconnectConfig::single(layers, 1, 0.5)?;
    let (trained, _) = train(&mlp, &train_set, &test_set, &config, &dropconnect, None)?;

    let argmax = |probs: &[f64]| {
        probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| {
                if p > acc.1 {
                    (i, p)
                } else {
                    acc
                }
            })
            .0
    };

    let mut agree = 0;
    let mut correct = 0;
    for idx in 0..test_set.len() {
        let input = &test_set.inputs[idx];
        let plain = forward(&trained, input, None)?;
        let sampled =
            gaussian_inference(&trained, input, &dropconnect, 50, subseed(seed, 100 + idx as u64))?;
        let g = argmax(&sampled);
        if g == argmax(plain.output()) {
            agree += 1;
        }
        if g == test_set.labels[idx] {
            correct += 1;
        }
    }
    let n = test_set.len();
    println!("Gaussian-sampling inference on {n} test examples (50 samples each):");
    println!("  accuracy                     = {:.3}", correct as f64 / n as f64);
    println!("  agreement with plain forward = {:.3}", agree as f64 / n as f64);
    Ok(())
}
