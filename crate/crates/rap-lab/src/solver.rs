//! Belief-propagation solver with Bethe thermodynamics.
//!
//! Cavity messages live on the directed edges of the factor graph:
//! `m_{i->a} = tanh(sum_{b in di\a} atanh mhat_{b->i})` and
//! `mhat_{b->i} = tanh(beta J_b) prod_{j in db\i} m_{j->b}`.
//! At a fixed point the Bethe free energy, energy, and entropy follow from
//! the converged messages; the all-zero message set is always a fixed
//! point (the paramagnetic solution) and dominates at small mean degree.

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_rap, FactorGraph, RapParams};
use crate::rng::{seeded, subseed, KahanSum};

const ATANH_CLAMP: f64 = 1.0 - 1e-15;

/// Message initialization strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitMode {
    /// All messages exactly zero (the paramagnetic fixed point).
    Zero,
    /// Variable-to-interaction messages i.i.d. uniform in
    /// [-amplitude, amplitude]; interaction-to-variable messages follow
    /// from one update.
    Random { amplitude: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Inverse temperature.
    pub beta: f64,
    /// Fraction of the old message retained at each update, in [0,1).
    pub damping: f64,
    /// Convergence threshold on the max absolute message change.
    pub tol: f64,
    pub max_iters: usize,
    pub init: InitMode,
    /// Seed for the per-sweep random edge ordering.
    pub schedule_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            beta: 1.0,
            damping: 0.0,
            tol: 1e-10,
            max_iters: 10_000,
            init: InitMode::Zero,
            schedule_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Param("tol must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.damping) {
            return Err(Error::Param("damping must be in [0,1)".into()));
        }
        if let InitMode::Random { amplitude, .. } = self.init {
            if !(0.0..1.0).contains(&amplitude) {
                return Err(Error::Param("init amplitude must be in [0,1)".into()));
            }
        }
        Ok(())
    }
}

/// Cavity messages, indexed by directed edge. Edge id of the pair
/// (interaction `a`, member slot `s`) is `a * depth + s`.
#[derive(Debug, Clone, PartialEq)]
pub struct Messages {
    /// m_{i->a}, in [-1, 1].
    pub var_to_fac: Vec<f64>,
    /// mhat_{a->i}, in [-tanh beta, tanh beta].
    pub fac_to_var: Vec<f64>,
}

/// Per-weight thermodynamic observables at a BP fixed point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThermoObservables {
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Zero-entropy point of the lambda sweep and the energy clamped there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub lambda_c: f64,
    pub e_c: f64,
    pub method: String,
    pub tol: f64,
}

fn edge_id(depth: usize, interaction: usize, slot: usize) -> usize {
    interaction * depth + slot
}

/// For each variable, the directed-edge ids of its adjacent interactions.
fn var_edges(graph: &FactorGraph) -> Vec<Vec<usize>> {
    let p = graph.depth;
    (0..graph.num_variables())
        .map(|i| {
            let slot = graph.population_of(i);
            graph.var_adjacency[i]
                .iter()
                .map(|&a| edge_id(p, a, slot))
                .collect()
        })
        .collect()
}

fn clamped_atanh(x: f64) -> f64 {
    x.clamp(-ATANH_CLAMP, ATANH_CLAMP).atanh()
}

pub fn init_messages(graph: &FactorGraph, config: &SolverConfig) -> Messages {
    let num_edges = graph.num_interactions() * graph.depth;
    match config.init {
        InitMode::Zero => Messages {
            var_to_fac: vec![0.0; num_edges],
            fac_to_var: vec![0.0; num_edges],
        },
        InitMode::Random { amplitude, seed } => {
            let mut rng = seeded(seed);
            let var_to_fac: Vec<f64> = (0..num_edges)
                .map(|_| {
                    if amplitude == 0.0 {
                        0.0
                    } else {
                        rng.gen_range(-amplitude..=amplitude)
                    }
                })
                .collect();
            let mut messages = Messages {
                var_to_fac,
                fac_to_var: vec![0.0; num_edges],
            };
            update_fac_to_var(graph, &mut messages, config.beta, 0.0, None);
            messages
        }
    }
}

/// Recomputes every mhat from the current m. With `order` given, updates
/// follow that edge permutation; damping mixes in the old value. Returns
/// the max absolute change.
fn update_fac_to_var(
    graph: &FactorGraph,
    messages: &mut Messages,
    beta: f64,
    damping: f64,
    order: Option<&[usize]>,
) -> f64 {
    let p = graph.depth;
    let num_edges = graph.num_interactions() * p;
    let mut max_change = 0.0f64;
    let mut step = |e: usize| {
        let a = e / p;
        let slot = e % p;
        let tj = (beta * graph.interactions[a].coupling as f64).tanh();
        let mut prod = tj;
        for s in 0..p {
            if s != slot {
                prod *= messages.var_to_fac[edge_id(p, a, s)];
            }
        }
        let new = (1.0 - damping) * prod + damping * messages.fac_to_var[e];
        max_change = max_change.max((new - messages.fac_to_var[e]).abs());
        messages.fac_to_var[e] = new;
    };
    match order {
        Some(order) => order.iter().for_each(|&e| step(e)),
        None => (0..num_edges).for_each(step),
    }
    max_change
}

/// Outcome of a BP run. Non-convergence is reported, not raised.
#[derive(Debug, Clone)]
pub struct BpOutcome {
    pub messages: Messages,
    pub converged: bool,
    pub iterations: usize,
}

/// Iterates random-sequential sweeps (shuffled edge order, reseeded per
/// sweep) until the max message change drops below `tol`.
pub fn bp_iterate(graph: &FactorGraph, mut messages: Messages, config: &SolverConfig) -> BpOutcome {
    let p = graph.depth;
    let num_edges = graph.num_interactions() * p;
    let edges = var_edges(graph);
    let mut order: Vec<usize> = (0..num_edges).collect();
    let mut schedule_rng = seeded(subseed(config.schedule_seed, 0x5eed));
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..config.max_iters {
        iterations += 1;
        let mut max_change = 0.0f64;
        // variable-to-interaction pass
        order.shuffle(&mut schedule_rng);
        for &e in &order {
            let a = e / p;
            let slot = e % p;
            let i = graph.interactions[a].members[slot];
            let mut field = 0.0;
            for &other in &edges[i] {
                if other != e {
                    field += clamped_atanh(messages.fac_to_var[other]);
                }
            }
            let new = (1.0 - config.damping) * field.tanh() + config.damping * messages.var_to_fac[e];
            max_change = max_change.max((new - messages.var_to_fac[e]).abs());
            messages.var_to_fac[e] = new;
        }
        // interaction-to-variable pass
        order.shuffle(&mut schedule_rng);
        let hat_change =
            update_fac_to_var(graph, &mut messages, config.beta, config.damping, Some(&order));
        max_change = max_change.max(hat_change);
        if max_change < config.tol {
            converged = true;
            break;
        }
    }
    BpOutcome {
        messages,
        converged,
        iterations,
    }
}

/// Single-site BP marginals `m_i = tanh(sum_{b in di} atanh mhat_{b->i})`.
pub fn marginals(graph: &FactorGraph, messages: &Messages) -> Vec<f64> {
    let edges = var_edges(graph);
    edges
        .iter()
        .map(|adj| {
            let field: f64 = adj.iter().map(|&e| clamped_atanh(messages.fac_to_var[e])).sum();
            field.tanh()
        })
        .collect()
}

/// Bethe free energy `F = -sum_i ln Z_i + sum_a (|da|-1) ln Z_a` at the
/// given messages. Degree-0 variables contribute `Z_i = 2`.
pub fn bethe_free_energy(graph: &FactorGraph, messages: &Messages, beta: f64) -> Result<f64> {
    let p = graph.depth;
    let edges = var_edges(graph);
    let mut total = KahanSum::default();
    for (i, adj) in edges.iter().enumerate() {
        // Z_i = sum_x prod_b cosh(beta J_b) (1 + x mhat_{b->i})
        let mut log_cosh = 0.0;
        let mut plus = 1.0;
        let mut minus = 1.0;
        for &e in adj {
            let j = graph.interactions[e / p].coupling as f64;
            log_cosh += (beta * j).cosh().ln();
            plus *= 1.0 + messages.fac_to_var[e];
            minus *= 1.0 - messages.fac_to_var[e];
        }
        let site = plus + minus;
        if site <= 0.0 {
            return Err(Error::Numerical(format!("non-positive Z at variable {i}")));
        }
        total.add(-(log_cosh + site.ln()));
    }
    for (a, inter) in graph.interactions.iter().enumerate() {
        let j = inter.coupling as f64;
        let tj = (beta * j).tanh();
        let mut prod = 1.0;
        for s in 0..p {
            prod *= messages.var_to_fac[edge_id(p, a, s)];
        }
        let za = (beta * j).cosh() * (1.0 + tj * prod);
        if za <= 0.0 {
            return Err(Error::Numerical(format!("non-positive Z at interaction {a}")));
        }
        total.add((p as f64 - 1.0) * za.ln());
    }
    Ok(total.value())
}

/// Bethe energy `E = -sum_i dE_i + sum_a (|da|-1) dE_a`. Degree-0
/// variables contribute zero.
pub fn bethe_energy(graph: &FactorGraph, messages: &Messages, beta: f64) -> Result<f64> {
    let p = graph.depth;
    let edges = var_edges(graph);
    let mut total = KahanSum::default();
    for (i, adj) in edges.iter().enumerate() {
        if adj.is_empty() {
            continue;
        }
        // dE_i = sum_x G_i(x) / sum_x H_i(x), where the x-dependent site
        // factors are prod_b cosh(beta J_b)(1 + x mhat). The common
        // positive factor prod_b cosh(beta J_b) cancels in the ratio.
        let mut h = [0.0f64; 2]; // H_i(x) / prod cosh
        let mut g = [0.0f64; 2]; // G_i(x) / prod cosh
        for (xi, &x) in [1.0f64, -1.0].iter().enumerate() {
            let mut prod = 1.0;
            for &e in adj {
                prod *= 1.0 + x * messages.fac_to_var[e];
            }
            h[xi] = prod;
            let mut sum = 0.0;
            for &e in adj {
                let j = graph.interactions[e / p].coupling as f64;
                let tj = (beta * j).tanh();
                let mhat = messages.fac_to_var[e];
                // cavity product prod_{j in db\i} m equals mhat / tanh(beta J_b)
                let cavity_prod = if tj != 0.0 { mhat / tj } else { 0.0 };
                // [J sinh(bJ)(1+x mhat) + x J cosh(bJ)(1-tanh^2 bJ) prod m]
                // divided by cosh(bJ)(1+x mhat)
                let term = j * (beta * j).tanh() + x * j * (1.0 - tj * tj) * cavity_prod / (1.0 + x * mhat);
                sum += term;
            }
            g[xi] = sum * prod;
        }
        let denom = h[0] + h[1];
        if denom <= 0.0 {
            return Err(Error::Numerical(format!("non-positive Z at variable {i}")));
        }
        total.add(-(g[0] + g[1]) / denom);
    }
    for (a, inter) in graph.interactions.iter().enumerate() {
        let j = inter.coupling as f64;
        let tj = (beta * j).tanh();
        let mut prod = 1.0;
        for s in 0..p {
            prod *= messages.var_to_fac[edge_id(p, a, s)];
        }
        let denom = 1.0 + tj * prod;
        if denom <= 0.0 {
            return Err(Error::Numerical(format!("non-positive Z at interaction {a}")));
        }
        let de_a = j * (tj + prod) / denom;
        total.add((p as f64 - 1.0) * de_a);
    }
    Ok(total.value())
}

/// Thermodynamic identity `S = beta (E - F)`.
pub fn entropy(free_energy: f64, energy: f64, beta: f64) -> f64 {
    beta * (energy - free_energy)
}

/// Runs BP on one instance and evaluates per-weight observables.
pub fn solve(graph: &FactorGraph, config: &SolverConfig) -> Result<ThermoObservables> {
    config.validate()?;
    let messages = init_messages(graph, config);
    let outcome = bp_iterate(graph, messages, config);
    let n = graph.num_variables() as f64;
    let f = bethe_free_energy(graph, &outcome.messages, config.beta)? / n;
    let e = bethe_energy(graph, &outcome.messages, config.beta)? / n;
    Ok(ThermoObservables {
        free_energy: f,
        energy: e,
        entropy: entropy(f, e, config.beta),
        converged: outcome.converged,
        iterations: outcome.iterations,
    })
}

/// Closed-form per-weight observables at the zero-message (paramagnetic)
/// fixed point: `f = -ln 2 - (lambda/p) ln cosh beta`,
/// `e = -(lambda/p) tanh beta`, `s = beta (e - f)`.
pub fn paramagnetic_observables(lambda: f64, beta: f64, depth: usize) -> (f64, f64, f64) {
    let per_weight = lambda / depth as f64;
    let f = -(2.0f64.ln()) - per_weight * beta.cosh().ln();
    let e = -per_weight * beta.tanh();
    (f, e, entropy(f, e, beta))
}

/// One instance's row of a lambda sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub sample: usize,
    pub f: f64,
    pub e: f64,
    pub s: f64,
    pub converged: bool,
    pub iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepAggregate {
    pub lambda: f64,
    pub f_mean: f64,
    pub f_stderr: f64,
    pub e_mean: f64,
    pub e_stderr: f64,
    pub s_mean: f64,
    pub s_stderr: f64,
    pub convergence_rate: f64,
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn instance_seed(root: u64, lambda: f64, sample: usize) -> u64 {
    subseed(subseed(root, lambda.to_bits()), sample as u64)
}

fn run_instance(
    n: usize,
    depth: usize,
    lambda: f64,
    sample: usize,
    config: &SolverConfig,
    root_seed: u64,
) -> Result<SweepRow> {
    let seed = instance_seed(root_seed, lambda, sample);
    let m = (lambda * n as f64).round() as usize;
    let params = RapParams {
        population_size: n,
        depth,
        num_paths: m,
        seed,
    };
    let (graph, _) = build_rap(&params)?;
    // per-instance derived seeds keep runs independent of scheduling
    let mut config = *config;
    config.schedule_seed = subseed(seed, 2);
    if let InitMode::Random { amplitude, .. } = config.init {
        config.init = InitMode::Random {
            amplitude,
            seed: subseed(seed, 3),
        };
    }
    let obs = solve(&graph, &config)?;
    Ok(SweepRow {
        lambda,
        sample,
        f: obs.free_energy,
        e: obs.energy,
        s: obs.entropy,
        converged: obs.converged,
        iters: obs.iterations,
    })
}

/// Generates `num_samples` instances per grid point (M = round(lambda N)),
/// runs BP on each, and averages per-weight observables. Non-convergence
/// is counted, never fatal.
pub fn sweep_lambda(
    n: usize,
    depth: usize,
    lambda_grid: &[f64],
    num_samples: usize,
    config: &SolverConfig,
    root_seed: u64,
) -> Result<(Vec<SweepRow>, Vec<SweepAggregate>)> {
    if lambda_grid.is_empty() {
        return Err(Error::Param("empty lambda grid".into()));
    }
    config.validate()?;
    let tasks: Vec<(f64, usize)> = lambda_grid
        .iter()
        .flat_map(|&l| (0..num_samples).map(move |s| (l, s)))
        .collect();
    let rows: Vec<SweepRow> = tasks
        .par_iter()
        .map(|&(lambda, sample)| run_instance(n, depth, lambda, sample, config, root_seed))
        .collect::<Result<Vec<_>>>()?;
    let aggregates = lambda_grid
        .iter()
        .map(|&lambda| {
            let group: Vec<&SweepRow> = rows.iter().filter(|r| r.lambda == lambda).collect();
            let fs: Vec<f64> = group.iter().map(|r| r.f).collect();
            let es: Vec<f64> = group.iter().map(|r| r.e).collect();
            let ss: Vec<f64> = group.iter().map(|r| r.s).collect();
            let (f_mean, f_stderr) = mean_stderr(&fs);
            let (e_mean, e_stderr) = mean_stderr(&es);
            let (s_mean, s_stderr) = mean_stderr(&ss);
            let convergence_rate =
                group.iter().filter(|r| r.converged).count() as f64 / group.len().max(1) as f64;
            SweepAggregate {
                lambda,
                f_mean,
                f_stderr,
                e_mean,
                e_stderr,
                s_mean,
                s_stderr,
                convergence_rate,
            }
        })
        .collect();
    Ok((rows, aggregates))
}

/// How the zero-entropy point is located.
#[derive(Debug, Clone, Copy)]
pub enum CriticalMethod {
    /// Root of the closed-form paramagnetic entropy.
    Analytic,
    /// Sample-averaged BP entropy at each bisection probe.
    Bp { n: usize, num_samples: usize },
}

/// Bisection on s(lambda) over `bracket` down to `bisect_tol`; the
/// bracket must straddle zero entropy.
pub fn find_lambda_c(
    method: CriticalMethod,
    depth: usize,
    config: &SolverConfig,
    bracket: (f64, f64),
    bisect_tol: f64,
    root_seed: u64,
) -> Result<CriticalPoint> {
    config.validate()?;
    let eval_s = |lambda: f64| -> Result<(f64, f64)> {
        match method {
            CriticalMethod::Analytic => {
                let (_, e, s) = paramagnetic_observables(lambda, config.beta, depth);
                Ok((s, e))
            }
            CriticalMethod::Bp { n, num_samples } => {
                let rows: Vec<SweepRow> = (0..num_samples)
                    .into_par_iter()
                    .map(|sample| run_instance(n, depth, lambda, sample, config, root_seed))
                    .collect::<Result<Vec<_>>>()?;
                let s = rows.iter().map(|r| r.s).sum::<f64>() / rows.len() as f64;
                let e = rows.iter().map(|r| r.e).sum::<f64>() / rows.len() as f64;
                Ok((s, e))
            }
        }
    };
    let (mut lo, mut hi) = bracket;
    if !(lo < hi) {
        return Err(Error::Param(format!("invalid bracket [{lo}, {hi}]")));
    }
    let (s_lo, _) = eval_s(lo)?;
    let (s_hi, _) = eval_s(hi)?;
    if !(s_lo > 0.0 && s_hi < 0.0) {
        return Err(Error::Param(format!(
            "bracket does not straddle zero entropy: s({lo}) = {s_lo}, s({hi}) = {s_hi}"
        )));
    }
    while hi - lo > bisect_tol {
        let mid = 0.5 * (lo + hi);
        let (s_mid, _) = eval_s(mid)?;
        if s_mid > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let lambda_c = 0.5 * (lo + hi);
    let (_, e_c) = eval_s(lambda_c)?;
    let method_name = match method {
        CriticalMethod::Analytic => "analytic".to_string(),
        CriticalMethod::Bp { n, num_samples } => format!("bp(n={n},samples={num_samples})"),
    };
    Ok(CriticalPoint {
        lambda_c,
        e_c,
        method: method_name,
        tol: bisect_tol,
    })
}

/// Frozen-ansatz energy curve: paramagnetic energy below lambda_c,
/// clamped at e_c above.
pub fn frozen_energy_curve(
    lambda_grid: &[f64],
    critical: &CriticalPoint,
    beta: f64,
    depth: usize,
) -> Vec<(f64, f64)> {
    lambda_grid
        .iter()
        .map(|&lambda| {
            let e = if lambda < critical.lambda_c {
                paramagnetic_observables(lambda, beta, depth).1
            } else {
                critical.e_c
            };
            (lambda, e)
        })
        .collect()
}

/// Closed-form zero-entropy point at beta = 1, depth 3:
/// `lambda_c = 3 ln 2 / (tanh 1 - ln cosh 1)`.
pub fn analytic_lambda_c(beta: f64, depth: usize) -> f64 {
    depth as f64 * 2.0f64.ln() / (beta.tanh() - beta.cosh().ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::degree_histogram;

    fn small_graph(n: usize, p: usize, m: usize, seed: u64) -> FactorGraph {
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
    fn zero_messages_are_fixed_point() {
        let graph = small_graph(30, 3, 90, 4);
        let config = SolverConfig::default();
        let outcome = bp_iterate(&graph, init_messages(&graph, &config), &config);
        assert!(outcome.converged);
        assert_eq!(outcome.iterations, 1);
        assert!(outcome.messages.var_to_fac.iter().all(|&m| m == 0.0));
        assert!(outcome.messages.fac_to_var.iter().all(|&m| m == 0.0));
    }

    #[test]
    fn random_init_amplitude_zero_equals_zero_init() {
        let graph = small_graph(10, 3, 20, 1);
        let zero = init_messages(&graph, &SolverConfig::default());
        let random = init_messages(
            &graph,
            &SolverConfig {
                init: InitMode::Random {
                    amplitude: 0.0,
                    seed: 9,
                },
                ..SolverConfig::default()
            },
        );
        assert_eq!(zero, random);
    }

    #[test]
    fn random_init_is_reproducible() {
        let graph = small_graph(10, 3, 20, 1);
        let config = SolverConfig {
            init: InitMode::Random {
                amplitude: 0.1,
                seed: 31,
            },
            ..SolverConfig::default()
        };
        let a = init_messages(&graph, &config);
        let b = init_messages(&graph, &config);
        assert_eq!(a, b);
        assert!(a.var_to_fac.iter().any(|&m| m != 0.0));
    }

    #[test]
    fn single_interaction_fixed_point() {
        let graph = small_graph(1, 3, 1, 0);
        let config = SolverConfig {
            init: InitMode::Random {
                amplitude: 0.3,
                seed: 5,
            },
            ..SolverConfig::default()
        };
        let outcome = bp_iterate(&graph, init_messages(&graph, &config), &config);
        assert!(outcome.converged);
        let tanh1 = 1.0f64.tanh();
        for &mhat in &outcome.messages.fac_to_var {
            assert!(mhat.abs() <= tanh1 + 1e-12);
        }
        // exhaustive enumeration over the 8 states gives <w_i> = 0
        for m in marginals(&graph, &outcome.messages) {
            assert!(m.abs() < 1e-9, "marginal {m}");
        }
        // F = -ln(4(e + 1/e)) at the fixed point
        let f = bethe_free_energy(&graph, &outcome.messages, 1.0).unwrap();
        let expect = -(4.0 * (1.0f64.exp() + (-1.0f64).exp())).ln();
        assert!((f - expect).abs() < 1e-9, "F = {f}, expect {expect}");
        assert!((expect - -2.5132224).abs() < 1e-6);
        // E = -tanh 1
        let e = bethe_energy(&graph, &outcome.messages, 1.0).unwrap();
        assert!((e + tanh1).abs() < 1e-9, "E = {e}");
    }

    #[test]
    fn paramagnetic_closed_forms_at_zero_messages() {
        let graph = small_graph(100, 3, 250, 8);
        let messages = init_messages(&graph, &SolverConfig::default());
        let f = bethe_free_energy(&graph, &messages, 1.0).unwrap();
        let e = bethe_energy(&graph, &messages, 1.0).unwrap();
        let n_tilde = graph.num_variables() as f64;
        let m = graph.num_interactions() as f64;
        let f_expect = -n_tilde * 2.0f64.ln() - m * 1.0f64.cosh().ln();
        let e_expect = -m * 1.0f64.tanh();
        assert!((f - f_expect).abs() < 1e-9 * n_tilde);
        assert!((e - e_expect).abs() < 1e-9 * n_tilde);
    }

    #[test]
    fn empty_graph_thermo() {
        let graph = small_graph(5, 3, 0, 0);
        let messages = init_messages(&graph, &SolverConfig::default());
        let f = bethe_free_energy(&graph, &messages, 1.0).unwrap();
        let e = bethe_energy(&graph, &messages, 1.0).unwrap();
        assert!((f + 15.0 * 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(e, 0.0);
        let s = entropy(f / 15.0, e / 15.0, 1.0);
        assert!((s - 2.0f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn paramagnetic_phase_returns_to_zero_messages() {
        // lambda = 3 instance with random init relaxes back to the
        // paramagnetic fixed point
        let graph = small_graph(400, 3, 1200, 13);
        let config = SolverConfig {
            init: InitMode::Random {
                amplitude: 0.1,
                seed: 2,
            },
            tol: 1e-12,
            ..SolverConfig::default()
        };
        let outcome = bp_iterate(&graph, init_messages(&graph, &config), &config);
        assert!(outcome.converged);
        let max_m = outcome
            .messages
            .var_to_fac
            .iter()
            .fold(0.0f64, |acc, &m| acc.max(m.abs()));
        assert!(max_m < 1e-10, "max |m| = {max_m}");
    }

    #[test]
    fn entropy_identity_holds() {
        let graph = small_graph(50, 3, 300, 17);
        let obs = solve(&graph, &SolverConfig::default()).unwrap();
        assert!((obs.entropy - (obs.energy - obs.free_energy)).abs() < 1e-9);
    }

    #[test]
    fn paramagnetic_observable_values() {
        let (f, e, s) = paramagnetic_observables(0.0, 1.0, 3);
        assert!((f + 2.0f64.ln()).abs() < 1e-15);
        assert_eq!(e, 0.0);
        assert!((s - 2.0f64.ln()).abs() < 1e-15);
        let (_, e, s) = paramagnetic_observables(3.0, 1.0, 3);
        assert!((s - 0.36533).abs() < 1e-5);
        assert!((e + 1.0f64.tanh()).abs() < 1e-12);
        let (_, e, _) = paramagnetic_observables(6.336, 1.0, 3);
        assert!((e + 1.6085).abs() < 1e-3);
        // within half a percent of the clamped value reported for Fig. 4b
        assert!(((e - -1.6115) / 1.6115).abs() < 5e-3);
    }

    #[test]
    fn schedule_reshuffle_leaves_observables_fixed() {
        let graph = small_graph(100, 3, 400, 23);
        let base = SolverConfig {
            init: InitMode::Random {
                amplitude: 0.2,
                seed: 6,
            },
            tol: 1e-12,
            ..SolverConfig::default()
        };
        let a = solve(&graph, &base).unwrap();
        let b = solve(
            &graph,
            &SolverConfig {
                schedule_seed: 12345,
                ..base
            },
        )
        .unwrap();
        assert!((a.free_energy - b.free_energy).abs() < 1e-9);
        assert!((a.energy - b.energy).abs() < 1e-9);
    }

    #[test]
    fn gauge_flip_of_planting_preserves_observables() {
        // flipping w0 re-randomizes couplings but the observable
        // distribution is gauge invariant; at the paramagnetic point the
        // values are identical given equal degree sequences
        let graph = small_graph(80, 3, 320, 29);
        let mut flipped = graph.clone();
        for inter in &mut flipped.interactions {
            // flip one population's planted sign: an even number of member
            // flips per interaction keeps J, odd flips negate it; flipping
            // every population-0 weight negates every J once
            inter.coupling = -inter.coupling;
        }
        let a = solve(&graph, &SolverConfig::default()).unwrap();
        let b = solve(&flipped, &SolverConfig::default()).unwrap();
        assert!((a.free_energy - b.free_energy).abs() < 1e-12);
        assert!((a.energy - b.energy).abs() < 1e-12);
        assert_eq!(
            degree_histogram(&graph).histogram,
            degree_histogram(&flipped).histogram
        );
    }

    #[test]
    fn sweep_lambda_zero_grid_point() {
        let config = SolverConfig::default();
        let (rows, agg) = sweep_lambda(50, 3, &[0.0], 3, &config, 99).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].e_mean, 0.0);
        assert!((agg[0].s_mean - 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(agg[0].convergence_rate, 1.0);
    }

    #[test]
    fn sweep_is_deterministic() {
        let config = SolverConfig {
            init: InitMode::Random {
                amplitude: 0.1,
                seed: 0,
            },
            ..SolverConfig::default()
        };
        let (rows_a, _) = sweep_lambda(50, 3, &[1.0, 2.0], 4, &config, 7).unwrap();
        let (rows_b, _) = sweep_lambda(50, 3, &[1.0, 2.0], 4, &config, 7).unwrap();
        for (a, b) in rows_a.iter().zip(&rows_b) {
            assert_eq!(a.f, b.f);
            assert_eq!(a.e, b.e);
        }
    }

    #[test]
    fn analytic_critical_point() {
        let config = SolverConfig::default();
        let cp = find_lambda_c(
            CriticalMethod::Analytic,
            3,
            &config,
            (1.0, 10.0),
            1e-12,
            0,
        )
        .unwrap();
        let expect = 3.0 * 2.0f64.ln() / (1.0f64.tanh() - 1.0f64.cosh().ln());
        assert!((cp.lambda_c - expect).abs() < 1e-9);
        assert!((cp.lambda_c - 6.3434).abs() < 1e-4);
        assert!((cp.e_c - -(expect / 3.0) * 1.0f64.tanh()).abs() < 1e-9);
        assert!((cp.e_c - -1.6104).abs() < 1e-4);
    }

    #[test]
    fn invalid_bracket_rejected() {
        let config = SolverConfig::default();
        let err = find_lambda_c(CriticalMethod::Analytic, 3, &config, (1.0, 2.0), 1e-6, 0);
        assert!(err.is_err());
    }

    #[test]
    fn frozen_curve_shape() {
        let cp = CriticalPoint {
            lambda_c: analytic_lambda_c(1.0, 3),
            e_c: -(analytic_lambda_c(1.0, 3) / 3.0) * 1.0f64.tanh(),
            method: "analytic".into(),
            tol: 1e-12,
        };
        let curve = frozen_energy_curve(&[0.0, cp.lambda_c, 10.0], &cp, 1.0, 3);
        assert_eq!(curve[0].1, 0.0);
        assert!((curve[1].1 - cp.e_c).abs() < 1e-12);
        assert!((curve[2].1 - cp.e_c).abs() < 1e-12);
        assert!((curve[2].1 - -1.6115).abs() < 2e-3);
    }
}
