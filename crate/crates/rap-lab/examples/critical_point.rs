//! Locates the zero-entropy point of the diluted p-weight-interaction
//! model two ways — closed-form paramagnetic entropy and sample-averaged
//! BP entropy on finite instances — then prints the frozen-ansatz energy
//! curve that clamps the energy above it.

use rap_lab::solver::{
    analytic_lambda_c, find_lambda_c, frozen_energy_curve, CriticalMethod, InitMode, SolverConfig,
};

fn main() -> rap_lab::Result<()> {
    let beta = 1.0;
    let depth = 3;
    println!("closed-form lambda_c = {:.10}", analytic_lambda_c(beta, depth));

    let config = SolverConfig {
        beta,
        init: InitMode::Random {
            amplitude: 0.1,
            seed: 0,
        },
        ..SolverConfig::default()
    };
    let analytic = find_lambda_c(
        CriticalMethod::Analytic,
        depth,
        &config,
        (1.0, 12.0),
        1e-12,
        1,
    )?;
    println!(
        "bisection (analytic s): lambda_c = {:.6}, e_c = {:.6}",
        analytic.lambda_c, analytic.e_c
    );

    let bp = find_lambda_c(
        CriticalMethod::Bp {
            n: 500,
            num_samples: 4,
        },
        depth,
        &config,
        (1.0, 12.0),
        1e-3,
        1,
    )?;
    println!(
        "bisection (BP s, N=500): lambda_c = {:.4}, e_c = {:.4}",
        bp.lambda_c, bp.e_c
    );

    println!("\nlambda  e (frozen above lambda_c)");
    let grid: Vec<f64> = (0..=12).map(|k| k as f64).collect();
    for (lambda, e) in frozen_energy_curve(&grid, &analytic, beta, depth) {
        println!("{lambda:6.2}  {e:9.5}");
    }
    Ok(())
}
