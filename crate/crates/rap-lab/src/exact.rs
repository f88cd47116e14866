//! Brute-force enumeration of the Boltzmann measure on small instances,
//! used as an independent oracle for the BP solver.

use crate::error::{Error, Result};
use crate::graph::FactorGraph;
use crate::rng::KahanSum;
use crate::solver::{self, SolverConfig};

/// Hard cap on enumerable instance size (2^24 configurations).
pub const MAX_ENUM_VARS: usize = 24;

/// Exact Boltzmann-measure summary of one instance.
#[derive(Debug, Clone)]
pub struct ExactResult {
    pub log_z: f64,
    /// Boltzmann-average energy <H>.
    pub energy: f64,
    /// Gibbs entropy beta*(<H> - F) with F = -log Z / beta.
    pub entropy: f64,
    /// <w_i> per variable.
    pub marginals: Vec<f64>,
    pub ground_energy: f64,
}

/// Sums over all 2^N configurations by Gray-code walk, updating the
/// energy incrementally. Weights are taken relative to the energy floor
/// -M, so every term is in (0, 1] and nothing overflows.
pub fn enumerate(graph: &FactorGraph, beta: f64) -> Result<ExactResult> {
    let n = graph.num_variables();
    if n > MAX_ENUM_VARS {
        return Err(Error::Param(format!(
            "refusing to enumerate {n} variables (limit {MAX_ENUM_VARS})"
        )));
    }
    let m = graph.num_interactions() as i64;

    let mut spins = vec![1i8; n];
    // signed term value J_a * prod_{i in da} w_i; starts at J_a for all-up
    let mut terms: Vec<i64> = graph
        .interactions
        .iter()
        .map(|inter| inter.coupling as i64)
        .collect();
    let mut energy: i64 = -terms.iter().sum::<i64>();

    // compensated sums: the walk visits up to 2^24 terms, and naive
    // accumulation error (~n*eps) would swamp the BP comparison
    let mut z_sum = KahanSum::default();
    let mut e_sum = KahanSum::default();
    let mut m_sums = vec![KahanSum::default(); n];
    let mut ground = i64::MAX;

    let total: u64 = 1u64 << n;
    for step in 0..total {
        let weight = (-beta * (energy + m) as f64).exp();
        z_sum.add(weight);
        e_sum.add(energy as f64 * weight);
        for i in 0..n {
            m_sums[i].add(spins[i] as f64 * weight);
        }
        ground = ground.min(energy);
        if step + 1 < total {
            let flip = (step + 1).trailing_zeros() as usize;
            spins[flip] = -spins[flip];
            for &a in &graph.var_adjacency[flip] {
                energy += 2 * terms[a];
                terms[a] = -terms[a];
            }
        }
    }

    let log_z = beta * m as f64 + z_sum.value().ln();
    let avg_energy = e_sum.value() / z_sum.value();
    let free_energy = -log_z / beta;
    Ok(ExactResult {
        log_z,
        energy: avg_energy,
        entropy: beta * (avg_energy - free_energy),
        marginals: m_sums.iter().map(|s| s.value() / z_sum.value()).collect(),
        ground_energy: ground as f64,
    })
}

/// BP-vs-enumeration discrepancy report for one instance.
#[derive(Debug, Clone)]
pub struct Discrepancy {
    pub bp_free_energy: f64,
    pub exact_free_energy: f64,
    pub bp_energy: f64,
    pub exact_energy: f64,
    /// Max over variables of |m_i(BP) - m_i(exact)|, plus both values at
    /// the maximizing variable.
    pub max_marginal_diff: f64,
    pub bp_marginal_at_max: f64,
    pub exact_marginal_at_max: f64,
    pub acyclic: bool,
    pub bp_converged: bool,
}

impl Discrepancy {
    pub fn free_energy_diff(&self) -> f64 {
        (self.bp_free_energy - self.exact_free_energy).abs()
    }

    pub fn energy_diff(&self) -> f64 {
        (self.bp_energy - self.exact_energy).abs()
    }
}

/// Runs BP and exact enumeration on the same instance. On acyclic graphs
/// BP is exact and the discrepancies should vanish; on loopy graphs they
/// are reported as-is.
pub fn compare_bp_exact(graph: &FactorGraph, config: &SolverConfig) -> Result<Discrepancy> {
    let exact = enumerate(graph, config.beta)?;
    let messages = solver::init_messages(graph, config);
    let outcome = solver::bp_iterate(graph, messages, config);
    let bp_f = solver::bethe_free_energy(graph, &outcome.messages, config.beta)?;
    let bp_e = solver::bethe_energy(graph, &outcome.messages, config.beta)?;
    let bp_m = solver::marginals(graph, &outcome.messages);
    let (max_i, max_diff) = bp_m
        .iter()
        .zip(&exact.marginals)
        .map(|(b, e)| (b - e).abs())
        .enumerate()
        .fold((0, 0.0), |acc, (i, d)| if d > acc.1 { (i, d) } else { acc });
    Ok(Discrepancy {
        bp_free_energy: bp_f,
        exact_free_energy: -exact.log_z / config.beta,
        bp_energy: bp_e,
        exact_energy: exact.energy,
        max_marginal_diff: max_diff,
        bp_marginal_at_max: bp_m[max_i],
        exact_marginal_at_max: exact.marginals[max_i],
        acyclic: graph.is_acyclic(),
        bp_converged: outcome.converged,
    })
}

/// Samples a seeded suite of small instances: `acyclic` tree-like and
/// `loopy` cyclic graphs, alternating between depth-2 and depth-3
/// interactions, all with at most `max_vars` variables.
pub fn small_instance_suite(
    seed: u64,
    acyclic: usize,
    loopy: usize,
    max_vars: usize,
) -> Result<Vec<FactorGraph>> {
    use crate::graph::{build_rap, RapParams};
    use rand::Rng as _;

    if max_vars < 4 {
        return Err(Error::Param(format!(
            "max-vars {max_vars} leaves no room for a depth-2 interaction"
        )));
    }
    let mut rng = crate::rng::seeded(crate::rng::subseed(seed, 0xacdc));
    let mut trees = Vec::with_capacity(acyclic);
    let mut cyclic = Vec::with_capacity(loopy);
    let mut attempt: u64 = 0;
    while trees.len() < acyclic || cyclic.len() < loopy {
        attempt += 1;
        if attempt > 200_000 {
            return Err(Error::Numerical(
                "instance suite sampling did not fill both buckets".into(),
            ));
        }
        let depth = if attempt % 2 == 0 { 2 } else { 3 };
        let n = rng.gen_range(2..=max_vars / depth);
        let m = rng.gen_range(1..=2 * n);
        let (graph, _) = build_rap(&RapParams {
            population_size: n,
            depth,
            num_paths: m,
            seed: crate::rng::subseed(seed, attempt),
        })?;
        if graph.is_acyclic() {
            if trees.len() < acyclic {
                trees.push(graph);
            }
        } else if cyclic.len() < loopy {
            cyclic.push(graph);
        }
    }
    trees.extend(cyclic);
    Ok(trees)
}

/// Writes a single-instance report with rows `quantity,bp,exact,abs_diff`.
pub fn write_discrepancy_csv<W: std::io::Write>(d: &Discrepancy, mut w: W) -> Result<()> {
    write!(w, "quantity,bp,exact,abs_diff\n")?;
    write!(
        w,
        "free_energy,{},{},{}\n",
        d.bp_free_energy,
        d.exact_free_energy,
        d.free_energy_diff()
    )?;
    write!(
        w,
        "energy,{},{},{}\n",
        d.bp_energy,
        d.exact_energy,
        d.energy_diff()
    )?;
    write!(
        w,
        "max_marginal,{},{},{}\n",
        d.bp_marginal_at_max, d.exact_marginal_at_max, d.max_marginal_diff
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_rap, RapParams};
    use crate::solver::InitMode;

    fn build(n: usize, p: usize, m: usize, seed: u64) -> FactorGraph {
        build_rap(&RapParams {
            population_size: n,
            depth: p,
            num_paths: m,
            seed,
        })
        .unwrap()
        .0
    }

    #[test]
    fn empty_graph_is_uniform() {
        let graph = build(1, 3, 0, 0);
        let r = enumerate(&graph, 1.0).unwrap();
        assert!((r.log_z - 3.0 * 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(r.energy, 0.0);
        assert!((r.entropy - 3.0 * 2.0f64.ln()).abs() < 1e-12);
        assert!(r.marginals.iter().all(|&m| m.abs() < 1e-15));
    }

    #[test]
    fn single_interaction_hand_enumeration() {
        let graph = build(1, 3, 1, 3);
        let r = enumerate(&graph, 1.0).unwrap();
        let expect = (4.0 * (1.0f64.exp() + (-1.0f64).exp())).ln();
        assert!((r.log_z - expect).abs() < 1e-12);
        assert!((expect - 2.5132224).abs() < 1e-6);
        assert!((r.energy + 1.0f64.tanh()).abs() < 1e-12);
        assert_eq!(r.ground_energy, -1.0);
    }

    #[test]
    fn disjoint_interactions_factorize() {
        // two depth-3 interactions over disjoint variables
        let graph = crate::graph::FactorGraph::load(
            &b"RAP v1 2 3 2 0\n0 +1 0 2 4\n1 +1 1 3 5\n"[..],
        )
        .unwrap();
        let r = enumerate(&graph, 1.0).unwrap();
        assert!((r.energy + 2.0 * 1.0f64.tanh()).abs() < 1e-12);
        assert!(r.marginals.iter().all(|&m| m.abs() < 1e-12));
    }

    #[test]
    fn refuses_large_instances() {
        let graph = build(9, 3, 5, 0); // 27 variables
        assert!(enumerate(&graph, 1.0).is_err());
    }

    #[test]
    fn large_beta_energy_approaches_ground_state() {
        let graph = build(3, 3, 4, 5);
        let beta = 20.0;
        let r = enumerate(&graph, beta).unwrap();
        assert!(r.energy >= r.ground_energy);
        assert!(r.energy - r.ground_energy < 10.0 * (-beta).exp() * 512.0);
    }

    #[test]
    fn entropy_nonnegative_and_bounded() {
        for seed in 0..5 {
            let graph = build(4, 3, 6, seed);
            let r = enumerate(&graph, 1.0).unwrap();
            assert!(r.entropy >= -1e-12);
            assert!(r.entropy <= graph.num_variables() as f64 * 2.0f64.ln() + 1e-12);
            assert!(r.marginals.iter().all(|&m| m.abs() <= 1.0 + 1e-12));
        }
    }

    #[test]
    fn bp_matches_enumeration_on_trees() {
        let config = SolverConfig {
            init: InitMode::Random {
                amplitude: 0.2,
                seed: 11,
            },
            tol: 1e-13,
            ..SolverConfig::default()
        };
        let mut found = 0;
        for seed in 0..200 {
            let graph = build(4, 3, 4, seed);
            if !graph.is_acyclic() {
                continue;
            }
            let d = compare_bp_exact(&graph, &config).unwrap();
            assert!(d.acyclic);
            assert!(d.free_energy_diff() < 1e-10, "dF = {}", d.free_energy_diff());
            assert!(d.energy_diff() < 1e-10, "dE = {}", d.energy_diff());
            assert!(d.max_marginal_diff < 1e-10);
            found += 1;
            if found >= 10 {
                break;
            }
        }
        assert!(found >= 10, "not enough acyclic instances in seed range");
    }

    #[test]
    fn loopy_discrepancies_are_finite() {
        // force a short loop with duplicated paths
        let graph = crate::graph::FactorGraph::load(
            &b"RAP v1 2 3 4 0\n0 +1 0 2 4\n1 +1 0 2 5\n2 -1 1 3 4\n3 +1 1 2 4\n"[..],
        )
        .unwrap();
        assert!(!graph.is_acyclic());
        let d = compare_bp_exact(&graph, &SolverConfig::default()).unwrap();
        assert!(d.free_energy_diff().is_finite());
        assert!(d.energy_diff().is_finite());
    }

    #[test]
    fn discrepancy_csv_shape() {
        let graph = build(1, 3, 1, 3);
        let d = compare_bp_exact(&graph, &SolverConfig::default()).unwrap();
        let mut buf = Vec::new();
        write_discrepancy_csv(&d, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("quantity,bp,exact,abs_diff\n"));
        assert_eq!(text.lines().count(), 4);
    }

}
