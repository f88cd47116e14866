//! Subcommand front end: each experiment is a seeded batch
//! run that writes CSV (plus a JSON run manifest) under `--out`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::data::{self, Dataset, ExperimentConfig};
use crate::error::{Error, Result};
use crate::exact;
use crate::graph::{self, RapParams};
use crate::net::{self, DropconnectConfig, FeedbackConfig, Mlp, NetArchitecture, TrainConfig};
use crate::rng::subseed;
use crate::solver::{self, CriticalMethod, InitMode, SolverConfig};

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "rap-lab", version, about = "Random active path model experiments")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; 1 forces the fully sequential reference mode.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Lambda sweep of BP thermodynamics plus critical point and frozen
    /// energy curve.
    RapSweep(RapSweepArgs),
    /// Build one instance; dump the graph and its degree histogram.
    RapGraph(RapGraphArgs),
    /// BP vs exhaustive enumeration on a seeded suite of small instances.
    RapOracle(RapOracleArgs),
    /// Train a network per config file; writes checkpoint and curve.
    Train(TrainArgs),
    /// Dilution sweep of a trained checkpoint.
    Dilute(DiluteArgs),
    /// Path-product histogram of a trained checkpoint.
    PathStats(PathStatsArgs),
    /// Gaussian-sampling prediction on the test set.
    Infer(InferArgs),
}

#[derive(Debug, Args, Serialize)]
struct RapSweepArgs {
    /// Population size N.
    #[arg(long)]
    n: usize,
    /// Populations per interaction.
    #[arg(long, default_value_t = 3)]
    p: usize,
    /// Grid spec `lo:hi:step` (inclusive) or a single value.
    #[arg(long)]
    lambda_grid: String,
    #[arg(long, default_value_t = 10)]
    samples: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Random-init message amplitude (0 = start at the paramagnetic
    /// fixed point).
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.0)]
    damping: f64,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 10_000)]
    max_iters: usize,
    /// Critical-point method: `analytic` or `bp`.
    #[arg(long, default_value = "analytic")]
    critical_mode: String,
    #[arg(long, default_value_t = 1.0)]
    bracket_lo: f64,
    #[arg(long, default_value_t = 12.0)]
    bracket_hi: f64,
    #[arg(long)]
    bisect_tol: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct RapGraphArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    p: usize,
    /// Mean degree; M = round(lambda * N).
    #[arg(long)]
    lambda: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct RapOracleArgs {
    /// Number of acyclic instances in the suite.
    #[arg(long, default_value_t = 50)]
    acyclic: usize,
    /// Number of loopy instances in the suite.
    #[arg(long, default_value_t = 20)]
    loopy: usize,
    /// Variable-count cap per instance (enumeration guard).
    #[arg(long, default_value_t = 20)]
    max_vars: usize,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    /// Experiment config file (flat key=value).
    #[arg(long)]
    config: PathBuf,
    /// Use synthetic data even when the config names IDX paths.
    #[arg(long, default_value_t = false)]
    synthetic: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct DiluteArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = false)]
    synthetic: bool,
    /// Grid specs per weight population, `lo:hi:step` or a single value.
    #[arg(long, default_value = "0")]
    p1: String,
    #[arg(long, default_value = "0")]
    p2: String,
    #[arg(long, default_value = "0")]
    p3: String,
    #[arg(long, default_value_t = 20)]
    replicates: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct PathStatsArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    num_paths: usize,
    #[arg(long, default_value_t = 60)]
    bins: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct InferArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = false)]
    synthetic: bool,
    /// Gaussian pre-activation samples per example.
    #[arg(long, default_value_t = 100)]
    samples: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    subcommand: &'a str,
    config: serde_json::Value,
    root_seed: u64,
    out_dir: String,
    wall_clock_unix: u64,
    artifact_version: &'a str,
}

fn write_manifest<T: Serialize>(subcommand: &str, args: &T, seed: u64, out: &Path) -> Result<()> {
    fs::create_dir_all(out)?;
    let manifest = RunManifest {
        subcommand,
        config: serde_json::to_value(args)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?,
        root_seed: seed,
        out_dir: out.display().to_string(),
        wall_clock_unix: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        artifact_version: ARTIFACT_VERSION,
    };
    let json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
    fs::write(out.join("manifest.json"), json + "\n")?;
    Ok(())
}

/// Parses `lo:hi:step` (endpoints inclusive within step/2) or a single
/// value.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    if !spec.contains(':') {
        let v: f64 = spec
            .trim()
            .parse()
            .map_err(|_| Error::Param(format!("bad grid value: {spec}")))?;
        return Ok(vec![v]);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Param(format!("grid spec must be lo:hi:step, got {spec}")));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|s| {
            s.trim()
                .parse()
                .map_err(|_| Error::Param(format!("bad grid number: {s}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let (lo, hi, step) = (nums[0], nums[1], nums[2]);
    if !(step > 0.0) || hi < lo {
        return Err(Error::Param(format!("bad grid range: {spec}")));
    }
    let mut grid = Vec::new();
    let mut k = 0usize;
    loop {
        let v = lo + step * k as f64;
        if v > hi + step / 2.0 {
            break;
        }
        grid.push(v);
        k += 1;
    }
    Ok(grid)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes)?;
    Ok(())
}

fn cmd_rap_sweep(args: &RapSweepArgs) -> Result<()> {
    write_manifest("rap-sweep", args, args.seed, &args.out)?;
    let grid = parse_grid(&args.lambda_grid)?;
    let config = SolverConfig {
        beta: args.beta,
        damping: args.damping,
        tol: args.tol,
        max_iters: args.max_iters,
        init: InitMode::Random {
            amplitude: args.amplitude,
            seed: 0, // per-instance seeds are derived inside the sweep
        },
        schedule_seed: 0,
    };
    let (rows, aggregates) = solver::sweep_lambda(args.n, args.p, &grid, args.samples, &config, args.seed)?;

    let instance_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.lambda.to_string(),
                r.sample.to_string(),
                r.f.to_string(),
                r.e.to_string(),
                r.s.to_string(),
                r.converged.to_string(),
                r.iters.to_string(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    data::write_csv("lambda,sample,f,e,s,converged,iters", &instance_rows, &mut buf)?;
    write_file(&args.out.join("sweep_instances.csv"), &buf)?;

    let agg_rows: Vec<Vec<String>> = aggregates
        .iter()
        .map(|a| {
            vec![
                a.lambda.to_string(),
                a.e_mean.to_string(),
                a.e_stderr.to_string(),
                a.s_mean.to_string(),
                a.s_stderr.to_string(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    data::write_csv("lambda,e_mean,e_stderr,s_mean,s_stderr", &agg_rows, &mut buf)?;
    write_file(&args.out.join("sweep_aggregate.csv"), &buf)?;

    let (method, bisect_tol) = match args.critical_mode.as_str() {
        "analytic" => (CriticalMethod::Analytic, args.bisect_tol.unwrap_or(1e-12)),
        "bp" => (
            CriticalMethod::Bp {
                n: args.n,
                num_samples: args.samples,
            },
            args.bisect_tol.unwrap_or(1e-3),
        ),
        other => return Err(Error::Param(format!("unknown critical mode: {other}"))),
    };
    let critical = solver::find_lambda_c(
        method,
        args.p,
        &config,
        (args.bracket_lo, args.bracket_hi),
        bisect_tol,
        args.seed,
    )?;
    let json = serde_json::to_string_pretty(&critical)
        .map_err(|e| Error::Numerical(format!("critical point serialization: {e}")))?;
    write_file(&args.out.join("critical_point.json"), (json + "\n").as_bytes())?;

    let frozen = solver::frozen_energy_curve(&grid, &critical, args.beta, args.p);
    let frozen_rows: Vec<Vec<String>> = frozen
        .iter()
        .map(|(l, e)| vec![l.to_string(), e.to_string()])
        .collect();
    let mut buf = Vec::new();
    data::write_csv("lambda,e", &frozen_rows, &mut buf)?;
    write_file(&args.out.join("frozen_energy.csv"), &buf)?;
    Ok(())
}

fn cmd_rap_graph(args: &RapGraphArgs) -> Result<()> {
    write_manifest("rap-graph", args, args.seed, &args.out)?;
    let params = RapParams {
        population_size: args.n,
        depth: args.p,
        num_paths: (args.lambda * args.n as f64).round() as usize,
        seed: args.seed,
    };
    let (graph, _) = graph::build_rap(&params)?;
    let mut buf = Vec::new();
    graph.dump(&mut buf)?;
    write_file(&args.out.join("graph.txt"), &buf)?;

    let stats = graph::degree_histogram(&graph);
    let mut buf = Vec::new();
    graph::write_degree_csv(&stats, stats.mean_degree, &mut buf)?;
    write_file(&args.out.join("degree_histogram.csv"), &buf)?;

    let (statistic, dof, p_value) = graph::poisson_goodness_of_fit(&stats, stats.mean_degree)?;
    let tv = stats.tv_distance_to_poisson(stats.mean_degree)?;
    let summary = serde_json::json!({
        "mean_degree": stats.mean_degree,
        "population_split": stats.population_split,
        "tv_distance": tv,
        "chi2_statistic": statistic,
        "chi2_dof": dof,
        "chi2_p_value": p_value,
    });
    write_file(
        &args.out.join("degree_stats.json"),
        (serde_json::to_string_pretty(&summary).unwrap() + "\n").as_bytes(),
    )?;
    Ok(())
}

fn cmd_rap_oracle(args: &RapOracleArgs) -> Result<()> {
    write_manifest("rap-oracle", args, args.seed, &args.out)?;
    if args.max_vars > exact::MAX_ENUM_VARS {
        return Err(Error::Param(format!(
            "max-vars {} exceeds the enumeration limit {}",
            args.max_vars,
            exact::MAX_ENUM_VARS
        )));
    }
    let suite = exact::small_instance_suite(args.seed, args.acyclic, args.loopy, args.max_vars)?;
    let config = SolverConfig {
        beta: args.beta,
        tol: 1e-13,
        init: InitMode::Random {
            amplitude: 0.2,
            seed: subseed(args.seed, 1),
        },
        schedule_seed: subseed(args.seed, 2),
        ..SolverConfig::default()
    };
    let mut rows = Vec::new();
    for (idx, graph) in suite.iter().enumerate() {
        let d = exact::compare_bp_exact(graph, &config)?;
        let prefix = vec![idx.to_string(), d.acyclic.to_string()];
        for (quantity, bp, ex, diff) in [
            ("free_energy", d.bp_free_energy, d.exact_free_energy, d.free_energy_diff()),
            ("energy", d.bp_energy, d.exact_energy, d.energy_diff()),
            (
                "max_marginal",
                d.bp_marginal_at_max,
                d.exact_marginal_at_max,
                d.max_marginal_diff,
            ),
        ] {
            let mut row = prefix.clone();
            row.extend([
                quantity.to_string(),
                bp.to_string(),
                ex.to_string(),
                diff.to_string(),
            ]);
            rows.push(row);
        }
    }
    let mut buf = Vec::new();
    data::write_csv("instance,acyclic,quantity,bp,exact,abs_diff", &rows, &mut buf)?;
    write_file(&args.out.join("oracle.csv"), &buf)?;
    Ok(())
}

/// Resolves the train/test datasets named by a config: IDX pairs when
/// paths are given and `synthetic` is off, otherwise a balanced synthetic
/// set split disjointly into B1/B2.
pub fn load_experiment_data(
    config: &ExperimentConfig,
    synthetic: bool,
) -> Result<(Dataset, Dataset)> {
    let have_paths = config.train_images.is_some()
        && config.train_labels.is_some()
        && config.test_images.is_some()
        && config.test_labels.is_some();
    if have_paths && !synthetic {
        let train = data::load_idx_pair(
            config.train_images.as_ref().unwrap(),
            config.train_labels.as_ref().unwrap(),
        )?;
        let test = data::load_idx_pair(
            config.test_images.as_ref().unwrap(),
            config.test_labels.as_ref().unwrap(),
        )?;
        Ok((
            data::subset(&train, config.b1.min(train.len()), subseed(config.seed, 10))?,
            data::subset(&test, config.b2.min(test.len()), subseed(config.seed, 11))?,
        ))
    } else {
        let num_classes = *config.arch.last().unwrap();
        let full = data::synthetic_dataset(
            num_classes,
            config.arch[0],
            config.b1 + config.b2,
            config.synthetic_noise,
            subseed(config.seed, 12),
        )?;
        data::disjoint_split(&full, config.b1, config.b2, subseed(config.seed, 13))
    }
}

/// Builds the net-facing configs (dropconnect, feedback, training
/// schedule) from an experiment config.
pub fn build_experiment(
    config: &ExperimentConfig,
) -> Result<(NetArchitecture, TrainConfig, DropconnectConfig, Option<FeedbackConfig>)> {
    config.validate()?;
    let arch = NetArchitecture::new(config.arch.clone())?;
    let train_config = TrainConfig {
        epochs: config.epochs,
        schedule: config.schedule.clone(),
        batch_size: config.batch_size,
        seed: subseed(config.seed, 20),
    };
    let layers = config.num_weight_layers();
    let mut dropconnect = DropconnectConfig::none(layers);
    if !config.dropconnect.is_empty() {
        dropconnect.keep_probs = config.dropconnect.clone();
    }
    if let Some(layer) = config.dropconnect_layer {
        dropconnect.inference_flags[layer - 1] = true;
    }
    let feedback = if config.fa_layers.is_empty() {
        None
    } else {
        let mut flags = vec![false; layers];
        for &l in &config.fa_layers {
            flags[l - 1] = true;
        }
        Some(FeedbackConfig::new(
            &arch,
            &flags,
            config.fa_bound,
            subseed(config.seed, 21),
        )?)
    };
    Ok((arch, train_config, dropconnect, feedback))
}

fn load_checkpoint_file(path: &Path) -> Result<Mlp> {
    let file = fs::File::open(path)?;
    net::load_checkpoint(std::io::BufReader::new(file))
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let config = data::load_config(&args.config)?;
    write_manifest("train", args, config.seed, &args.out)?;
    let (arch, train_config, dropconnect, feedback) = build_experiment(&config)?;
    let (train_set, test_set) = load_experiment_data(&config, args.synthetic)?;
    let mlp = net::init_mlp(&arch, subseed(config.seed, 22));
    let (trained, curve) = net::train(
        &mlp,
        &train_set,
        &test_set,
        &train_config,
        &dropconnect,
        feedback.as_ref(),
    )?;
    let mut buf = Vec::new();
    net::save_checkpoint(&trained, &mut buf)?;
    write_file(&args.out.join("checkpoint.txt"), &buf)?;
    let rows: Vec<Vec<String>> = curve
        .iter()
        .map(|s| {
            vec![
                s.epoch.to_string(),
                s.train_loss.to_string(),
                s.test_error.to_string(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    data::write_csv("epoch,train_loss,test_error", &rows, &mut buf)?;
    write_file(&args.out.join("curve.csv"), &buf)?;
    Ok(())
}

fn cmd_dilute(args: &DiluteArgs) -> Result<()> {
    let config = data::load_config(&args.config)?;
    write_manifest("dilute", args, args.seed, &args.out)?;
    let mlp = load_checkpoint_file(&args.checkpoint)?;
    if mlp.num_weight_layers() != 3 {
        return Err(Error::Param(format!(
            "dilution grids cover three weight populations, checkpoint has {}",
            mlp.num_weight_layers()
        )));
    }
    let (_, test_set) = load_experiment_data(&config, args.synthetic)?;
    let g1 = parse_grid(&args.p1)?;
    let g2 = parse_grid(&args.p2)?;
    let g3 = parse_grid(&args.p3)?;
    let mut grid = Vec::new();
    for &a in &g1 {
        for &b in &g2 {
            for &c in &g3 {
                grid.push(vec![a, b, c]);
            }
        }
    }
    let rows = net::dilution_sweep(&mlp, &grid, args.replicates, &test_set, args.seed)?;
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.remove_probs[0].to_string(),
                r.remove_probs[1].to_string(),
                r.remove_probs[2].to_string(),
                r.err_mean.to_string(),
                r.err_stderr.to_string(),
                r.replicates.to_string(),
            ]
        })
        .collect();
    let mut buf = Vec::new();
    data::write_csv("p1,p2,p3,err_mean,err_stderr,replicates", &csv_rows, &mut buf)?;
    write_file(&args.out.join("dilution.csv"), &buf)?;
    Ok(())
}

fn cmd_path_stats(args: &PathStatsArgs) -> Result<()> {
    write_manifest("path-stats", args, args.seed, &args.out)?;
    let mlp = load_checkpoint_file(&args.checkpoint)?;
    let hist = net::path_product_histogram(&mlp, args.num_paths, args.bins, args.seed)?;
    let rows: Vec<Vec<String>> = hist
        .bins
        .iter()
        .map(|(lo, hi, count)| vec![lo.to_string(), hi.to_string(), count.to_string()])
        .collect();
    let mut buf = Vec::new();
    data::write_csv("bin_lo,bin_hi,count", &rows, &mut buf)?;
    write_file(&args.out.join("path_histogram.csv"), &buf)?;
    let summary = serde_json::json!({
        "sign_balance": hist.sign_balance,
        "num_paths": args.num_paths,
        "central_fraction_10pct": hist.central_fraction(0.10),
    });
    write_file(
        &args.out.join("path_stats.json"),
        (serde_json::to_string_pretty(&summary).unwrap() + "\n").as_bytes(),
    )?;
    Ok(())
}

fn cmd_infer(args: &InferArgs) -> Result<()> {
    let config = data::load_config(&args.config)?;
    write_manifest("infer", args, args.seed, &args.out)?;
    let mlp = load_checkpoint_file(&args.checkpoint)?;
    let (_, dropconnect_cfg) = {
        let (_, _, dc, _) = build_experiment(&config)?;
        ((), dc)
    };
    let (_, test_set) = load_experiment_data(&config, args.synthetic)?;
    let mut rows = Vec::with_capacity(test_set.len());
    for idx in 0..test_set.len() {
        let probs = net::gaussian_inference(
            &mlp,
            &test_set.inputs[idx],
            &dropconnect_cfg,
            args.samples,
            subseed(args.seed, idx as u64),
        )?;
        let prediction = probs
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| {
                if p > acc.1 {
                    (i, p)
                } else {
                    acc
                }
            })
            .0;
        rows.push(vec![
            idx.to_string(),
            test_set.labels[idx].to_string(),
            prediction.to_string(),
        ]);
    }
    let mut buf = Vec::new();
    data::write_csv("example,label,prediction", &rows, &mut buf)?;
    write_file(&args.out.join("predictions.csv"), &buf)?;
    Ok(())
}

/// Parses argv and runs the selected subcommand.
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::parse_from(argv);
    if let Some(threads) = cli.threads {
        // ignore the error when a global pool already exists (tests)
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match &cli.command {
        Command::RapSweep(args) => cmd_rap_sweep(args),
        Command::RapGraph(args) => cmd_rap_graph(args),
        Command::RapOracle(args) => cmd_rap_oracle(args),
        Command::Train(args) => cmd_train(args),
        Command::Dilute(args) => cmd_dilute(args),
        Command::PathStats(args) => cmd_path_stats(args),
        Command::Infer(args) => cmd_infer(args),
    }
}
