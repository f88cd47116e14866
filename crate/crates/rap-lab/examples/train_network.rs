//! Trains a small sigmoid/softmax network by minibatch SGD on a
//! synthetic prototype dataset and prints the learning curve.

use rap_lab::data::{disjoint_split, synthetic_dataset};
use rap_lab::net::{init_mlp, train, DropconnectConfig, NetArchitecture, TrainConfig};
use rap_lab::rng::subseed;

fn main() -> rap_lab::Result<()> {
    let seed = 11;
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
    let (_, curve) = train(&mlp, &train_set, &test_set, &config, &dropconnect, None)?;

    println!("epoch  train_loss  test_error");
    for s in &curve {
        println!("{:5}  {:10.5}  {:10.4}", s.epoch, s.train_loss, s.test_error);
    }
    Ok(())
}
