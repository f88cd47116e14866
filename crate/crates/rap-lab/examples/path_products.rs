//! Samples random input-to-output paths through a trained network and
//! histograms the product of weights along each path. Trained networks
//! concentrate these products near zero with balanced signs — most
//! active paths are individually weak and redundant.

use rap_lab::data::{disjoint_split, synthetic_dataset};
use rap_lab::net::{
    init_mlp, path_product_histogram, train, DropconnectConfig, NetArchitecture, TrainConfig,
};
use rap_lab::rng::subseed;

fn main() -> rap_lab::Result<()> {
    let seed = 17;
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

    let hist = path_product_histogram(&trained, 50_000, 21, subseed(seed, 4))?;
    println!("sign balance (fraction positive) = {:.4}", hist.sign_balance);
    println!(
        "fraction within central 10% of the range = {:.4}",
        hist.central_fraction(0.10)
    );
    println!("\n    bin                count");
    let max = hist.bins.iter().map(|b| b.2).max().unwrap_or(1).max(1);
    for (lo, hi, count) in &hist.bins {
        let bar = "#".repeat(60 * count / max);
        println!("[{lo:8.4},{hi:8.4})  {count:7}  {bar}");
    }
    Ok(())
}
