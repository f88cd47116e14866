//! Builds a random active path instance and checks that the per-weight
//! interaction degrees follow a Poisson law with mean M/N: histogram,
//! total-variation distance, and a chi-square goodness-of-fit test.

use rap_lab::graph::{
    build_rap, degree_histogram, dropconnect_from_lambda, poisson_goodness_of_fit, poisson_pmf,
    RapParams,
};

fn main() -> rap_lab::Result<()> {
    let params = RapParams {
        population_size: 2000,
        depth: 3,
        num_paths: 12672, // mean degree 6.336
        seed: 42,
    };
    let (graph, _) = build_rap(&params)?;
    let stats = degree_histogram(&graph);
    let lambda = stats.mean_degree;

    println!("N = {}, p = {}, M = {}", params.population_size, params.depth, params.num_paths);
    println!("empirical mean degree = {lambda:.4}");
    println!(
        "equivalent dropconnect keep prob = {:.5}",
        dropconnect_from_lambda(lambda, params.population_size, params.depth)?
    );

    println!("\n  k   count   expected");
    let total: usize = stats.histogram.iter().sum();
    for (k, &count) in stats.histogram.iter().enumerate() {
        let expected = total as f64 * poisson_pmf(lambda, k as u64)?;
        println!("{k:3}  {count:6}  {expected:9.1}");
    }

    println!(
        "\nTV distance to Poisson({lambda:.3}) = {:.5}",
        stats.tv_distance_to_poisson(lambda)?
    );
    let (statistic, dof, p_value) = poisson_goodness_of_fit(&stats, lambda)?;
    println!("chi-square = {statistic:.2} on {dof} dof, p = {p_value:.3}");
    Ok(())
}
