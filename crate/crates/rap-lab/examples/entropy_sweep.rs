//! Sweeps the mean interaction degree lambda, running BP on a few random
//! instances per grid point, and prints sample-averaged per-weight
//! energy and entropy next to the closed-form paramagnetic values.

use rap_lab::solver::{paramagnetic_observables, sweep_lambda, InitMode, SolverConfig};

fn main() -> rap_lab::Result<()> {
    let n = 500;
    let depth = 3;
    let beta = 1.0;
    let grid: Vec<f64> = (1..=14).map(|k| 0.5 * k as f64).collect();
    let config = SolverConfig {
        beta,
        init: InitMode::Random {
            amplitude: 0.1,
            seed: 0,
        },
        ..SolverConfig::default()
    };
    let (_, aggregates) = sweep_lambda(n, depth, &grid, 4, &config, 7)?;

    println!("lambda   e(BP)      s(BP)      e(para)    s(para)   conv");
    for agg in &aggregates {
        let (_, e_para, s_para) = paramagnetic_observables(agg.lambda, beta, depth);
        println!(
            "{:5.2}  {:9.5}  {:9.5}  {:9.5}  {:9.5}  {:4.2}",
            agg.lambda, agg.e_mean, agg.s_mean, e_para, s_para, agg.convergence_rate
        );
    }
    Ok(())
}
