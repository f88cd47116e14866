//! Compares standard backprop against random feedback alignment, where
//! one layer transports the error signal through a fixed random matrix
//! instead of the transposed weights, and against backprop with
//! dropconnect applied to that same layer.

use rap_lab::data::{disjoint_split, synthetic_dataset};
use rap_lab::net::{
    init_mlp, train, DropconnectConfig, FeedbackConfig, NetArchitecture, TrainConfig,
};
use rap_lab::rng::subseed;

fn main() -> rap_lab::Result<()> {
    let seed = 19;
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
    let layers = arch.num_weight_layers();
    let none = DropconnectConfig::none(layers);

    let (_, bp_curve) = train(&mlp, &train_set, &test_set, &config, &none, None)?;

    // fixed random feedback on the top weight population
    let mut flags = vec![false; layers];
    flags[layers - 1] = true;
    let feedback = FeedbackConfig::new(&arch, &flags, 0.5, subseed(seed, 4))?;
    let (_, fa_curve) = train(&mlp, &train_set, &test_set, &config, &none, Some(&feedback))?;

    // dropconnect (keep 0.5) on the same population, trained with backprop
    let dropconnect = DropconnectConfig::single(layers, layers - 1, 0.5)?;
    let (_, dc_curve) = train(&mlp, &train_set, &test_set, &config, &dropconnect, None)?;

    println!("epoch  err(backprop)  err(feedback)  err(dropconnect)");
    for ((bp, fa), dc) in bp_curve.iter().zip(&fa_curve).zip(&dc_curve) {
        println!(
            "{:5}  {:13.4}  {:13.4}  {:16.4}",
            bp.epoch, bp.test_error, fa.test_error, dc.test_error
        );
    }
    Ok(())
}
