//! Random active path instances as sparse factor graphs.
//!
//! An instance has `p` weight populations of size `N` and `M`
//! interactions; each interaction picks one variable per population and
//! carries a planted coupling `J_a = prod_i w0_i` over its members, so the
//! planting attains energy `-M` exactly.

use std::io::{BufRead, Write};

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::rng::{seeded, subseed};

/// Parameters of one random active path instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RapParams {
    /// Weights per population (N).
    pub population_size: usize,
    /// Number of populations (p, one per consecutive layer pair).
    pub depth: usize,
    /// Number of interactions / active paths (M).
    pub num_paths: usize,
    pub seed: u64,
}

impl RapParams {
    pub fn validate(&self) -> Result<()> {
        if self.population_size < 1 {
            return Err(Error::Param("population size must be >= 1".into()));
        }
        if self.depth < 2 {
            return Err(Error::Param("depth must be >= 2".into()));
        }
        Ok(())
    }

    /// Mean degree lambda = M/N.
    pub fn mean_degree(&self) -> f64 {
        self.num_paths as f64 / self.population_size as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interaction {
    /// One global variable index per population, in population order.
    pub members: Vec<usize>,
    /// Planted coupling, +1 or -1.
    pub coupling: i8,
}

/// Immutable sparse factor graph over `depth * population_size` variables.
///
/// Variable indices are global and 0-based; population `l` owns the range
/// `l*N .. (l+1)*N`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FactorGraph {
    pub population_size: usize,
    pub depth: usize,
    pub seed: u64,
    pub interactions: Vec<Interaction>,
    /// For each variable, the interaction indices it participates in.
    pub var_adjacency: Vec<Vec<usize>>,
}

impl FactorGraph {
    pub fn num_variables(&self) -> usize {
        self.depth * self.population_size
    }

    pub fn num_interactions(&self) -> usize {
        self.interactions.len()
    }

    pub fn degree(&self, var: usize) -> usize {
        self.var_adjacency[var].len()
    }

    /// Population a global variable index belongs to.
    pub fn population_of(&self, var: usize) -> usize {
        var / self.population_size
    }

    pub fn mean_degree(&self) -> f64 {
        self.num_interactions() as f64 / self.population_size as f64
    }

    fn from_interactions(
        population_size: usize,
        depth: usize,
        seed: u64,
        interactions: Vec<Interaction>,
    ) -> Result<Self> {
        let num_vars = depth * population_size;
        let mut var_adjacency = vec![Vec::new(); num_vars];
        for (a, inter) in interactions.iter().enumerate() {
            if inter.members.len() != depth {
                return Err(Error::Parse(format!(
                    "interaction {a} has {} members, expected {depth}",
                    inter.members.len()
                )));
            }
            if inter.coupling != 1 && inter.coupling != -1 {
                return Err(Error::Parse(format!("interaction {a} coupling not +-1")));
            }
            for (slot, &i) in inter.members.iter().enumerate() {
                if i >= num_vars || i / population_size != slot {
                    return Err(Error::Parse(format!(
                        "interaction {a} member {i} is not in population {slot}"
                    )));
                }
                var_adjacency[i].push(a);
            }
        }
        Ok(FactorGraph {
            population_size,
            depth,
            seed,
            interactions,
            var_adjacency,
        })
    }

    /// True when the variable-interaction incidence graph has no cycle
    /// (union-find over incidence edges).
    pub fn is_acyclic(&self) -> bool {
        let n = self.num_variables();
        let total = n + self.num_interactions();
        let mut parent: Vec<usize> = (0..total).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for (a, inter) in self.interactions.iter().enumerate() {
            for &i in &inter.members {
                let ri = find(&mut parent, i);
                let ra = find(&mut parent, n + a);
                if ri == ra {
                    return false;
                }
                parent[ri] = ra;
            }
        }
        true
    }

    /// Line-oriented text dump: header `RAP v1 N p M seed`, then one line
    /// per interaction `a J_a i_1 ... i_p`.
    pub fn dump<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "RAP v1 {} {} {} {}",
            self.population_size,
            self.depth,
            self.num_interactions(),
            self.seed
        )?;
        for (a, inter) in self.interactions.iter().enumerate() {
            write!(w, "{a} {:+}", inter.coupling)?;
            for &i in &inter.members {
                write!(w, " {i}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn load<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty graph dump".into()))??;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 6 || fields[0] != "RAP" || fields[1] != "v1" {
            return Err(Error::Parse(format!("bad graph header: {header}")));
        }
        let parse = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad {what}: {s}")))
        };
        let population_size = parse(fields[2], "N")?;
        let depth = parse(fields[3], "p")?;
        let num_paths = parse(fields[4], "M")?;
        let seed: u64 = fields[5]
            .parse()
            .map_err(|_| Error::Parse(format!("bad seed: {}", fields[5])))?;
        let mut interactions = Vec::with_capacity(num_paths);
        for (a, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != depth + 2 {
                return Err(Error::Parse(format!("bad interaction line: {line}")));
            }
            if parse(fields[0], "interaction index")? != a {
                return Err(Error::Parse(format!("out-of-order interaction: {line}")));
            }
            let coupling: i8 = fields[1]
                .parse()
                .map_err(|_| Error::Parse(format!("bad coupling: {}", fields[1])))?;
            let members = fields[2..]
                .iter()
                .map(|s| parse(s, "variable index"))
                .collect::<Result<Vec<_>>>()?;
            interactions.push(Interaction { members, coupling });
        }
        if interactions.len() != num_paths {
            return Err(Error::Parse(format!(
                "expected {num_paths} interactions, found {}",
                interactions.len()
            )));
        }
        Self::from_interactions(population_size, depth, seed, interactions)
    }
}

/// The weight assignment the couplings were planted from. Attains energy
/// exactly `-M` on its own graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedConfig {
    /// One +-1 value per global variable index.
    pub values: Vec<i8>,
}

/// Exact degree statistics of one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeStats {
    /// histogram[k] = number of variables with degree k.
    pub histogram: Vec<usize>,
    /// p*M / (p*N) = M/N, exact up to rounding of the division.
    pub mean_degree: f64,
    /// Mean degree within each population.
    pub population_split: Vec<f64>,
}

impl DegreeStats {
    /// Total-variation distance between the empirical degree distribution
    /// and Poisson(lambda).
    pub fn tv_distance_to_poisson(&self, lambda: f64) -> Result<f64> {
        let total: usize = self.histogram.iter().sum();
        let mut tv = 0.0;
        let mut poisson_tail = 1.0;
        for (k, &count) in self.histogram.iter().enumerate() {
            let pmf = poisson_pmf(lambda, k as u64)?;
            tv += (count as f64 / total as f64 - pmf).abs();
            poisson_tail -= pmf;
        }
        // mass Poisson puts beyond the largest observed degree
        tv += poisson_tail.max(0.0);
        Ok(tv / 2.0)
    }
}

/// Builds one instance: each interaction draws one uniform variable per
/// population, independently across interactions (whole-interaction
/// duplicates are permitted); couplings come from an i.i.d. +-1 planting.
pub fn build_rap(params: &RapParams) -> Result<(FactorGraph, PlantedConfig)> {
    params.validate()?;
    let n = params.population_size;
    let p = params.depth;
    let num_vars = p * n;

    let mut planted_rng = seeded(subseed(params.seed, 0));
    let values: Vec<i8> = (0..num_vars)
        .map(|_| if planted_rng.gen::<bool>() { 1 } else { -1 })
        .collect();

    let mut path_rng = seeded(subseed(params.seed, 1));
    let mut interactions = Vec::with_capacity(params.num_paths);
    for _ in 0..params.num_paths {
        let members: Vec<usize> = (0..p).map(|l| l * n + path_rng.gen_range(0..n)).collect();
        let coupling: i8 = members.iter().map(|&i| values[i]).product();
        interactions.push(Interaction { members, coupling });
    }
    let graph = FactorGraph::from_interactions(n, p, params.seed, interactions)?;
    Ok((graph, PlantedConfig { values }))
}

/// Exact energy of a full +-1 assignment: `-sum_a J_a prod_{i in da} w_i`.
pub fn hamiltonian(graph: &FactorGraph, config: &[i8]) -> Result<f64> {
    if config.len() != graph.num_variables() {
        return Err(Error::Param(format!(
            "configuration has {} entries, graph has {} variables",
            config.len(),
            graph.num_variables()
        )));
    }
    if let Some(&bad) = config.iter().find(|&&v| v != 1 && v != -1) {
        return Err(Error::Param(format!("configuration entry {bad} is not +-1")));
    }
    let mut energy: i64 = 0;
    for inter in &graph.interactions {
        let prod: i64 = inter.members.iter().map(|&i| config[i] as i64).product();
        energy -= inter.coupling as i64 * prod;
    }
    Ok(energy as f64)
}

pub fn degree_histogram(graph: &FactorGraph) -> DegreeStats {
    let max_degree = (0..graph.num_variables())
        .map(|i| graph.degree(i))
        .max()
        .unwrap_or(0);
    let mut histogram = vec![0usize; max_degree + 1];
    let mut population_split = vec![0.0; graph.depth];
    for i in 0..graph.num_variables() {
        let d = graph.degree(i);
        histogram[d] += 1;
        population_split[graph.population_of(i)] += d as f64;
    }
    for split in &mut population_split {
        *split /= graph.population_size as f64;
    }
    DegreeStats {
        histogram,
        mean_degree: graph.mean_degree(),
        population_split,
    }
}

/// Poisson pmf `e^{-lambda} lambda^k / k!`, evaluated in log space.
pub fn poisson_pmf(lambda: f64, k: u64) -> Result<f64> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Param(format!("lambda must be >= 0, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(if k == 0 { 1.0 } else { 0.0 });
    }
    let kf = k as f64;
    let log_pmf = kf * lambda.ln() - lambda - statrs::function::gamma::ln_gamma(kf + 1.0);
    Ok(log_pmf.exp())
}

/// Mean degree implied by a homogeneous dropconnect keep probability:
/// `lambda = N * p_dc^p` (exponent generalizes the depth-3 cube law).
pub fn lambda_from_dropconnect(p_dc: f64, population_size: usize, depth: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_dc) {
        return Err(Error::Param(format!(
            "dropconnect probability must be in [0,1], got {p_dc}"
        )));
    }
    Ok(population_size as f64 * p_dc.powi(depth as i32))
}

/// Inverse map: `p_dc = (lambda/N)^{1/p}`. Requires `lambda <= N`.
pub fn dropconnect_from_lambda(lambda: f64, population_size: usize, depth: usize) -> Result<f64> {
    if lambda < 0.0 {
        return Err(Error::Param(format!("lambda must be >= 0, got {lambda}")));
    }
    let n = population_size as f64;
    if lambda > n {
        return Err(Error::Param(format!(
            "lambda {lambda} exceeds population size {n}; keep probability would exceed 1"
        )));
    }
    Ok((lambda / n).powf(1.0 / depth as f64))
}

/// Pearson chi-square goodness-of-fit of the degree histogram against
/// Poisson(lambda). Bins with expected count < 5 are pooled from the right
/// tail. Returns (statistic, degrees of freedom, p-value).
pub fn poisson_goodness_of_fit(stats: &DegreeStats, lambda: f64) -> Result<(f64, usize, f64)> {
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    let total: usize = stats.histogram.iter().sum();
    if total == 0 {
        return Err(Error::Param("empty histogram".into()));
    }
    let n = total as f64;
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let mut tail_prob = 1.0;
    for (k, &count) in stats.histogram.iter().enumerate() {
        let pmf = poisson_pmf(lambda, k as u64)?;
        tail_prob -= pmf;
        observed.push(count as f64);
        expected.push(n * pmf);
    }
    // everything past the largest observed degree goes into the last cell
    *expected.last_mut().unwrap() += n * tail_prob.max(0.0);
    // pool sparse tail cells
    while expected.len() > 2 && *expected.last().unwrap() < 5.0 {
        let e = expected.pop().unwrap();
        let o = observed.pop().unwrap();
        *expected.last_mut().unwrap() += e;
        *observed.last_mut().unwrap() += o;
    }
    // pool sparse head cells
    while expected.len() > 2 && expected[0] < 5.0 {
        expected[1] += expected[0];
        observed[1] += observed[0];
        expected.remove(0);
        observed.remove(0);
    }
    let statistic: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e).powi(2) / e)
        .sum();
    let dof = expected.len().saturating_sub(1).max(1);
    let chi2 = ChiSquared::new(dof as f64)
        .map_err(|e| Error::Numerical(format!("chi-squared setup: {e}")))?;
    let p_value = 1.0 - chi2.cdf(statistic);
    Ok((statistic, dof, p_value))
}

/// CSV emitter for degree histograms: `k,count,poisson_pmf`.
pub fn write_degree_csv<W: Write>(stats: &DegreeStats, lambda: f64, mut w: W) -> Result<()> {
    write!(w, "k,count,poisson_pmf\n")?;
    for (k, &count) in stats.histogram.iter().enumerate() {
        let pmf = poisson_pmf(lambda, k as u64)?;
        write!(w, "{k},{count},{pmf}\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: usize, p: usize, m: usize, seed: u64) -> RapParams {
        RapParams {
            population_size: n,
            depth: p,
            num_paths: m,
            seed,
        }
    }

    #[test]
    fn forced_adjacency_single_path() {
        let (graph, planted) = build_rap(&params(1, 3, 1, 99)).unwrap();
        assert_eq!(graph.num_variables(), 3);
        assert_eq!(graph.interactions[0].members, vec![0, 1, 2]);
        let expected: i8 = planted.values.iter().product();
        assert_eq!(graph.interactions[0].coupling, expected);
    }

    #[test]
    fn planted_energy_is_minus_m() {
        for seed in 0..5 {
            let (graph, planted) = build_rap(&params(50, 3, 120, seed)).unwrap();
            let e = hamiltonian(&graph, &planted.values).unwrap();
            assert_eq!(e, -120.0);
        }
    }

    #[test]
    fn flipping_degree_d_variable_raises_energy_by_2d() {
        let (graph, planted) = build_rap(&params(20, 3, 40, 3)).unwrap();
        for var in [0, 7, 25, 59] {
            let mut config = planted.values.clone();
            config[var] = -config[var];
            let e = hamiltonian(&graph, &config).unwrap();
            let d = graph.degree(var) as f64;
            assert_eq!(e, -40.0 + 2.0 * d);
        }
    }

    #[test]
    fn empty_graph_energy_zero() {
        let (graph, planted) = build_rap(&params(4, 3, 0, 0)).unwrap();
        assert_eq!(hamiltonian(&graph, &planted.values).unwrap(), 0.0);
    }

    #[test]
    fn hamiltonian_rejects_bad_configs() {
        let (graph, _) = build_rap(&params(4, 3, 2, 0)).unwrap();
        assert!(hamiltonian(&graph, &[1; 5]).is_err());
        let mut config = vec![1i8; 12];
        config[3] = 0;
        assert!(hamiltonian(&graph, &config).is_err());
    }

    #[test]
    fn build_is_reproducible() {
        let (g1, w1) = build_rap(&params(100, 3, 300, 42)).unwrap();
        let (g2, w2) = build_rap(&params(100, 3, 300, 42)).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(w1, w2);
        let (g3, _) = build_rap(&params(100, 3, 300, 43)).unwrap();
        assert_ne!(g1, g3);
    }

    #[test]
    fn degree_histogram_counts() {
        let (graph, _) = build_rap(&params(1, 3, 1, 5)).unwrap();
        let stats = degree_histogram(&graph);
        assert_eq!(stats.histogram, vec![0, 3]);
        assert_eq!(stats.mean_degree, 1.0);
        assert_eq!(stats.population_split, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn fig4_regime_mean_degree() {
        let (graph, _) = build_rap(&params(2000, 3, 12672, 7)).unwrap();
        let stats = degree_histogram(&graph);
        assert!((stats.mean_degree - 6.336).abs() < 1e-12);
        let total_degree: usize = stats
            .histogram
            .iter()
            .enumerate()
            .map(|(k, &c)| k * c)
            .sum();
        assert_eq!(total_degree, 3 * 12672);
    }

    #[test]
    fn degree_zero_fraction_matches_poisson() {
        // empirical fraction of isolated weights vs e^{-lambda}
        let (graph, _) = build_rap(&params(2000, 3, 12672, 11)).unwrap();
        let stats = degree_histogram(&graph);
        let frac = stats.histogram[0] as f64 / graph.num_variables() as f64;
        let expect = poisson_pmf(6.336, 0).unwrap();
        assert!((expect - (-6.336f64).exp()).abs() < 1e-15);
        // binomial std err ~ sqrt(p(1-p)/6000) ~ 5.4e-4; allow 4 sigma
        assert!((frac - expect).abs() < 4.0 * (expect / 6000.0).sqrt() + 1e-9);
    }

    #[test]
    fn poisson_pmf_values() {
        assert_eq!(poisson_pmf(0.0, 0).unwrap(), 1.0);
        assert!((poisson_pmf(1.0, 1).unwrap() - (-1.0f64).exp()).abs() < 1e-15);
        let total: f64 = (0..=200).map(|k| poisson_pmf(6.336, k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(poisson_pmf(-1.0, 0).is_err());
    }

    #[test]
    fn dropconnect_lambda_maps() {
        assert_eq!(lambda_from_dropconnect(1.0, 2000, 3).unwrap(), 2000.0);
        assert_eq!(lambda_from_dropconnect(0.0, 2000, 3).unwrap(), 0.0);
        let p_dc = dropconnect_from_lambda(6.336, 2000, 3).unwrap();
        assert!((p_dc - (6.336f64 / 2000.0).cbrt()).abs() < 1e-15);
        assert!((p_dc - 0.1467).abs() < 1e-3);
        assert!(dropconnect_from_lambda(2001.0, 2000, 3).is_err());
    }

    #[test]
    fn tv_distance_small_at_scale() {
        let (graph, _) = build_rap(&params(2000, 3, 12672, 1)).unwrap();
        let stats = degree_histogram(&graph);
        let tv = stats.tv_distance_to_poisson(stats.mean_degree).unwrap();
        assert!(tv < 5.0 / (graph.num_variables() as f64).sqrt(), "tv = {tv}");
    }

    #[test]
    fn dump_load_round_trip() {
        let (graph, _) = build_rap(&params(10, 3, 25, 77)).unwrap();
        let mut buf = Vec::new();
        graph.dump(&mut buf).unwrap();
        let loaded = FactorGraph::load(&buf[..]).unwrap();
        assert_eq!(graph, loaded);
    }

    #[test]
    fn load_rejects_malformed() {
        assert!(FactorGraph::load(&b"bogus"[..]).is_err());
        assert!(FactorGraph::load(&b"RAP v1 2 3 1 0\n0 +1 0 1 2\n"[..]).is_err()); // member 1 not in population 1 of size 2
        assert!(FactorGraph::load(&b"RAP v1 2 3 2 0\n0 +1 0 2 4\n"[..]).is_err()); // missing interaction
    }

    #[test]
    fn acyclicity_detection() {
        let (single, _) = build_rap(&params(1, 3, 1, 0)).unwrap();
        assert!(single.is_acyclic());
        // duplicate path => cycle through shared variables
        let dup = FactorGraph::from_interactions(
            1,
            3,
            0,
            vec![
                Interaction {
                    members: vec![0, 1, 2],
                    coupling: 1,
                },
                Interaction {
                    members: vec![0, 1, 2],
                    coupling: 1,
                },
            ],
        )
        .unwrap();
        assert!(!dup.is_acyclic());
    }

    #[test]
    fn gof_accepts_true_lambda() {
        let (graph, _) = build_rap(&params(2000, 3, 12672, 21)).unwrap();
        let stats = degree_histogram(&graph);
        let (_, _, p) = poisson_goodness_of_fit(&stats, 6.336).unwrap();
        assert!(p > 0.01, "p-value {p}");
        // a wrong lambda is firmly rejected
        let (_, _, p_bad) = poisson_goodness_of_fit(&stats, 4.0).unwrap();
        assert!(p_bad < 1e-6);
    }
}
