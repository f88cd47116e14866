//! Trains a network, then deletes a growing random fraction of one
//! weight population after training and measures the test error. The
//! error stays near baseline for small removal fractions before
//! deteriorating — the redundancy plateau.

use rap_lab::data::{disjoint_split, synthetic_dataset};
use rap_lab::net::{dilution_sweep, init_mlp, train, DropconnectConfig, NetArchitecture, TrainConfig};
use rap_lab::rng::subseed;

fn main() -> rap_lab::Result<()> {
    let seed = 13;
    let arch = NetArchitecture::new(vec![20, 16, 12, 4])?;
    let full = synthetic_dataset(4, 20, 600, 0.08, subseed(seed, 0))?;
    let (train_set, test_set) = disjoint_split(&full, 400, 200, subseed(seed, 1))?;
    let config = TrainConfig {
        epochs: 10,
        schedule: vec![(10, 0.5)],
        batch_size: 10,
        seed: subseed(seed, 2),
    };
    let mlp = init_mlp(&arch, subseed(seed, 3));
    let dropconnect = DropconnectConfig::none(arch.num_weight_layers());
    let (trained, _) = train(&mlp, &train_set, &test_set, &config, &dropconnect, None)?;

    // remove a fraction of the first weight population only
    let grid: Vec<Vec<f64>> = (0..=10)
        .map(|k| vec![0.1 * k as f64, 0.0, 0.0])
        .collect();
    let rows = dilution_sweep(&trained, &grid, 10, &test_set, subseed(seed, 4))?;

    println!("p_remove  err_mean  err_stderr");
    for row in &rows {
        println!(
            "{:8.2}  {:8.4}  {:10.4}",
            row.remove_probs[0], row.err_mean, row.err_stderr
        );
    }
    Ok(())
}
