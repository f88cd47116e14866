//! Feedforward sigmoid/softmax network with cross-entropy training,
//! per-layer dropconnect masks, random-feedback-alignment error
//! transport, post-training dilution, path-product statistics, and
//! Gaussian-sampling inference.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::{seeded, subseed};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Layer widths, input through output: "784-100-200-10" has four layers
/// and three weight populations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetArchitecture {
    pub widths: Vec<usize>,
}

impl NetArchitecture {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Param("architecture needs at least two layers".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::Param("layer widths must be >= 1".into()));
        }
        Ok(NetArchitecture { widths })
    }

    pub fn num_weight_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Multilayer perceptron. `weights[l]` maps layer `l` to layer `l+1` and
/// carries the bias as an extra trailing column driven by a constant 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub widths: Vec<usize>,
    pub weights: Vec<Matrix>,
}

impl Mlp {
    pub fn num_weight_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn num_classes(&self) -> usize {
        *self.widths.last().unwrap()
    }
}

/// Gaussian init with std 1/sqrt(fan-in); bias column zero.
pub fn init_mlp(arch: &NetArchitecture, seed: u64) -> Mlp {
    let mut weights = Vec::with_capacity(arch.num_weight_layers());
    for l in 0..arch.num_weight_layers() {
        let fan_in = arch.widths[l];
        let fan_out = arch.widths[l + 1];
        let normal = Normal::new(0.0, 1.0 / (fan_in as f64).sqrt()).unwrap();
        let mut rng = seeded(subseed(seed, l as u64));
        let mut w = Matrix::zeros(fan_out, fan_in + 1);
        for r in 0..fan_out {
            for c in 0..fan_in {
                w.set(r, c, normal.sample(&mut rng));
            }
        }
        weights.push(w);
    }
    Mlp {
        widths: arch.widths.clone(),
        weights,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}

/// All layer activations of one forward pass; `layers[0]` is the input,
/// the last entry the softmax output.
#[derive(Debug, Clone)]
pub struct Activations {
    pub layers: Vec<Vec<f64>>,
}

impl Activations {
    pub fn output(&self) -> &[f64] {
        self.layers.last().unwrap()
    }
}

fn masked_weight(w: &Matrix, mask: Option<&Matrix>, r: usize, c: usize) -> f64 {
    match mask {
        Some(m) => w.get(r, c) * m.get(r, c),
        None => w.get(r, c),
    }
}

/// Forward pass: sigmoid hidden layers, softmax top layer. `masks`, when
/// given, holds one optional 0/1 matrix per weight layer (full extended
/// shape, bias column included) applied as `W o mask`.
pub fn forward(mlp: &Mlp, input: &[f64], masks: Option<&[Option<Matrix>]>) -> Result<Activations> {
    if input.len() != mlp.widths[0] {
        return Err(Error::Shape(format!(
            "input length {} != first layer width {}",
            input.len(),
            mlp.widths[0]
        )));
    }
    if input.iter().any(|x| !x.is_finite()) {
        return Err(Error::Param("non-finite input entry".into()));
    }
    if let Some(masks) = masks {
        if masks.len() != mlp.num_weight_layers() {
            return Err(Error::Shape("one mask slot per weight layer required".into()));
        }
    }
    let mut layers = Vec::with_capacity(mlp.widths.len());
    layers.push(input.to_vec());
    for (l, w) in mlp.weights.iter().enumerate() {
        let mask = masks.and_then(|m| m[l].as_ref());
        if let Some(m) = mask {
            if m.rows != w.rows || m.cols != w.cols {
                return Err(Error::Shape(format!("mask shape mismatch at layer {l}")));
            }
        }
        let prev = layers.last().unwrap();
        let mut next = vec![0.0; mlp.widths[l + 1]];
        for (r, out) in next.iter_mut().enumerate() {
            let mut acc = masked_weight(w, mask, r, prev.len()); // bias
            for (c, &a) in prev.iter().enumerate() {
                acc += masked_weight(w, mask, r, c) * a;
            }
            *out = acc;
        }
        if l + 1 == mlp.widths.len() - 1 {
            softmax_in_place(&mut next);
        } else {
            for x in next.iter_mut() {
                *x = sigmoid(*x);
            }
        }
        layers.push(next);
    }
    Ok(Activations { layers })
}

const OUTPUT_FLOOR: f64 = 1e-30;

/// Cross-entropy `-sum_c y_c ln yhat_c` with the output clamped below.
pub fn cross_entropy(output: &[f64], one_hot_target: &[f64]) -> f64 {
    output
        .iter()
        .zip(one_hot_target)
        .map(|(&yhat, &y)| -y * yhat.max(OUTPUT_FLOOR).ln())
        .sum()
}

/// Fixed random feedback matrices for the backward pass. `matrices[l]`,
/// when present, replaces the transpose of `weights[l]` for transporting
/// the error from layer l+1 into layer l; shape widths[l] x widths[l+1],
/// entries i.i.d. uniform in [-bound, bound], never updated.
#[derive(Debug, Clone)]
pub struct FeedbackConfig {
    pub matrices: Vec<Option<Matrix>>,
    pub bound: f64,
}

impl FeedbackConfig {
    pub fn new(arch: &NetArchitecture, flags: &[bool], bound: f64, seed: u64) -> Result<Self> {
        if flags.len() != arch.num_weight_layers() {
            return Err(Error::Config("one feedback flag per weight layer required".into()));
        }
        if !(bound > 0.0) {
            return Err(Error::Config("feedback bound must be > 0".into()));
        }
        let mut matrices = Vec::with_capacity(flags.len());
        for (l, &on) in flags.iter().enumerate() {
            if !on {
                matrices.push(None);
                continue;
            }
            let mut rng = seeded(subseed(seed, l as u64));
            let mut b = Matrix::zeros(arch.widths[l], arch.widths[l + 1]);
            for v in b.data.iter_mut() {
                *v = rng.gen_range(-bound..=bound);
            }
            matrices.push(Some(b));
        }
        Ok(FeedbackConfig { matrices, bound })
    }

    /// Feedback set to the exact transpose of the forward weights (bias
    /// column dropped); reproduces standard backprop.
    pub fn transpose_of(mlp: &Mlp, flags: &[bool]) -> Self {
        let matrices = flags
            .iter()
            .enumerate()
            .map(|(l, &on)| {
                if !on {
                    return None;
                }
                let w = &mlp.weights[l];
                let mut b = Matrix::zeros(mlp.widths[l], mlp.widths[l + 1]);
                for r in 0..b.rows {
                    for c in 0..b.cols {
                        b.set(r, c, w.get(c, r));
                    }
                }
                Some(b)
            })
            .collect();
        FeedbackConfig {
            matrices,
            bound: 0.0,
        }
    }
}

/// Per-layer keep probabilities for training-time connection masks plus
/// the layer designated for Gaussian-sampling inference. Masks cover the
/// full extended matrix (bias column included) so the sampled-moment
/// identities hold exactly; layers with keep probability 1 skip masking.
#[derive(Debug, Clone, PartialEq)]
pub struct DropconnectConfig {
    pub keep_probs: Vec<f64>,
    pub inference_flags: Vec<bool>,
}

impl DropconnectConfig {
    pub fn none(num_weight_layers: usize) -> Self {
        DropconnectConfig {
            keep_probs: vec![1.0; num_weight_layers],
            inference_flags: vec![false; num_weight_layers],
        }
    }

    /// Dropconnect on a single weight layer.
    pub fn single(num_weight_layers: usize, layer: usize, keep_prob: f64) -> Result<Self> {
        let mut cfg = Self::none(num_weight_layers);
        if layer >= num_weight_layers {
            return Err(Error::Config(format!("no weight layer {layer}")));
        }
        if !(0.0..=1.0).contains(&keep_prob) {
            return Err(Error::Config(format!("keep probability {keep_prob} out of range")));
        }
        cfg.keep_probs[layer] = keep_prob;
        cfg.inference_flags[layer] = true;
        Ok(cfg)
    }

    pub fn validate(&self, num_weight_layers: usize) -> Result<()> {
        if self.keep_probs.len() != num_weight_layers
            || self.inference_flags.len() != num_weight_layers
        {
            return Err(Error::Config("one dropconnect entry per weight layer required".into()));
        }
        if self.keep_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("keep probabilities must be in [0,1]".into()));
        }
        Ok(())
    }

    fn is_active(&self) -> bool {
        self.keep_probs.iter().any(|&p| p < 1.0)
    }

    /// Fresh per-example masks; `None` for mask-free layers.
    pub fn sample_masks(&self, mlp: &Mlp, rng: &mut crate::rng::Rng) -> Vec<Option<Matrix>> {
        mlp.weights
            .iter()
            .zip(&self.keep_probs)
            .map(|(w, &keep)| {
                if keep >= 1.0 {
                    None
                } else {
                    let mut m = Matrix::zeros(w.rows, w.cols);
                    for v in m.data.iter_mut() {
                        *v = if rng.gen::<f64>() < keep { 1.0 } else { 0.0 };
                    }
                    Some(m)
                }
            })
            .collect()
    }
}

/// Error backpropagation. Top delta is `yhat - y`; transport into the
/// previous layer goes through the (masked) transpose, or through the
/// fixed feedback matrix where one is configured — in that case the mask
/// is ignored on the transport, though the layer's weight gradient is
/// still masked.
pub fn backward(
    mlp: &Mlp,
    activations: &Activations,
    one_hot_target: &[f64],
    feedback: Option<&FeedbackConfig>,
    masks: Option<&[Option<Matrix>]>,
) -> Result<Vec<Matrix>> {
    if activations.layers.len() != mlp.widths.len() {
        return Err(Error::Shape("activations do not match architecture".into()));
    }
    if one_hot_target.len() != mlp.num_classes() {
        return Err(Error::Shape("target length != number of classes".into()));
    }
    let num_layers = mlp.num_weight_layers();
    let mut grads: Vec<Matrix> = mlp
        .weights
        .iter()
        .map(|w| Matrix::zeros(w.rows, w.cols))
        .collect();
    let mut delta: Vec<f64> = activations
        .output()
        .iter()
        .zip(one_hot_target)
        .map(|(&yhat, &y)| yhat - y)
        .collect();
    for l in (0..num_layers).rev() {
        let mask = masks.and_then(|m| m[l].as_ref());
        let prev = &activations.layers[l];
        let grad = &mut grads[l];
        for (r, &d) in delta.iter().enumerate() {
            for (c, &a) in prev.iter().enumerate() {
                grad.set(r, c, d * a);
            }
            grad.set(r, prev.len(), d); // bias
        }
        if let Some(m) = mask {
            for (g, &keep) in grad.data.iter_mut().zip(&m.data) {
                *g *= keep;
            }
        }
        if l == 0 {
            break;
        }
        let fb = feedback.and_then(|f| f.matrices[l].as_ref());
        let mut transported = vec![0.0; mlp.widths[l]];
        match fb {
            Some(b) => {
                if b.rows != mlp.widths[l] || b.cols != mlp.widths[l + 1] {
                    return Err(Error::Shape(format!("feedback shape mismatch at layer {l}")));
                }
                for (j, t) in transported.iter_mut().enumerate() {
                    let row = b.row(j);
                    *t = row.iter().zip(&delta).map(|(&bji, &d)| bji * d).sum();
                }
            }
            None => {
                let w = &mlp.weights[l];
                for (i, &d) in delta.iter().enumerate() {
                    for (j, t) in transported.iter_mut().enumerate() {
                        *t += masked_weight(w, mask, i, j) * d;
                    }
                }
            }
        }
        let a = &activations.layers[l];
        delta = transported
            .iter()
            .zip(a)
            .map(|(&t, &ai)| t * ai * (1.0 - ai))
            .collect();
    }
    Ok(grads)
}

/// Training schedule and bookkeeping. The schedule is a sequence of
/// (epoch span, learning rate) pairs whose spans must cover `epochs`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub schedule: Vec<(usize, f64)>,
    pub batch_size: usize,
    pub seed: u64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|&(_, r)| !(r > 0.0)) {
            return Err(Error::Config("learning rates must be > 0".into()));
        }
        let covered: usize = self.schedule.iter().map(|&(span, _)| span).sum();
        if covered < self.epochs {
            return Err(Error::Config(format!(
                "schedule covers {covered} epochs, need {}",
                self.epochs
            )));
        }
        Ok(())
    }

    pub fn rate_for_epoch(&self, epoch: usize) -> f64 {
        let mut consumed = 0;
        for &(span, rate) in &self.schedule {
            consumed += span;
            if epoch < consumed {
                return rate;
            }
        }
        self.schedule.last().unwrap().1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_error: f64,
}

/// Minibatch SGD with seeded shuffling. Dropconnect masks are resampled
/// per example during the forward pass and reused in that example's
/// backward pass. Aborts on non-finite loss.
pub fn train(
    mlp: &Mlp,
    train_set: &Dataset,
    test_set: &Dataset,
    config: &TrainConfig,
    dropconnect: &DropconnectConfig,
    feedback: Option<&FeedbackConfig>,
) -> Result<(Mlp, Vec<EpochStats>)> {
    config.validate()?;
    dropconnect.validate(mlp.num_weight_layers())?;
    if train_set.len() == 0 {
        return Err(Error::Param("empty training set".into()));
    }
    let mut mlp = mlp.clone();
    let mut shuffle_rng = seeded(subseed(config.seed, 1));
    let mut mask_rng = seeded(subseed(config.seed, 2));
    let use_masks = dropconnect.is_active();
    let mut curve = Vec::with_capacity(config.epochs);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        let rate = config.rate_for_epoch(epoch);
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(config.batch_size) {
            let mut grad_sum: Vec<Matrix> = mlp
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows, w.cols))
                .collect();
            for &idx in batch {
                let masks = if use_masks {
                    Some(dropconnect.sample_masks(&mlp, &mut mask_rng))
                } else {
                    None
                };
                let acts = forward(&mlp, &train_set.inputs[idx], masks.as_deref())?;
                let target = train_set.one_hot(idx);
                let loss = cross_entropy(acts.output(), &target);
                if !loss.is_finite() {
                    return Err(Error::Numerical(format!(
                        "non-finite loss at epoch {epoch}, example {idx}"
                    )));
                }
                epoch_loss += loss;
                let grads = backward(&mlp, &acts, &target, feedback, masks.as_deref())?;
                for (sum, g) in grad_sum.iter_mut().zip(&grads) {
                    for (s, &v) in sum.data.iter_mut().zip(&g.data) {
                        *s += v;
                    }
                }
            }
            let scale = rate / batch.len() as f64;
            for (w, g) in mlp.weights.iter_mut().zip(&grad_sum) {
                for (wv, &gv) in w.data.iter_mut().zip(&g.data) {
                    *wv -= scale * gv;
                }
            }
        }
        curve.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            test_error: test_error(&mlp, test_set)?,
        });
    }
    Ok((mlp, curve))
}

/// Test-time dilution settings: per-layer independent removal
/// probabilities. The bias column is never diluted.
#[derive(Debug, Clone, PartialEq)]
pub struct DilutionConfig {
    pub remove_probs: Vec<f64>,
    pub seed: u64,
}

impl DilutionConfig {
    pub fn validate(&self, num_weight_layers: usize) -> Result<()> {
        if self.remove_probs.len() != num_weight_layers {
            return Err(Error::Config("one removal probability per weight layer required".into()));
        }
        if self.remove_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("removal probabilities must be in [0,1]".into()));
        }
        Ok(())
    }
}

/// Independent Bernoulli zeroing of weight entries per layer; returns a
/// new network, the input is untouched.
pub fn dilute(mlp: &Mlp, config: &DilutionConfig) -> Result<Mlp> {
    config.validate(mlp.num_weight_layers())?;
    let mut diluted = mlp.clone();
    for (l, (w, &p)) in diluted
        .weights
        .iter_mut()
        .zip(&config.remove_probs)
        .enumerate()
    {
        if p == 0.0 {
            continue;
        }
        let mut rng = seeded(subseed(config.seed, l as u64));
        let bias_col = w.cols - 1;
        for r in 0..w.rows {
            for c in 0..bias_col {
                if rng.gen::<f64>() < p {
                    w.set(r, c, 0.0);
                }
            }
        }
    }
    Ok(diluted)
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Fraction of misclassified examples; argmax ties break to the lowest
/// class index.
pub fn test_error(mlp: &Mlp, dataset: &Dataset) -> Result<f64> {
    if dataset.len() == 0 {
        return Err(Error::Param("empty dataset".into()));
    }
    let mut wrong = 0usize;
    for idx in 0..dataset.len() {
        let acts = forward(mlp, &dataset.inputs[idx], None)?;
        if argmax(acts.output()) != dataset.labels[idx] {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / dataset.len() as f64)
}

#[derive(Debug, Clone)]
pub struct DilutionSweepRow {
    pub remove_probs: Vec<f64>,
    pub err_mean: f64,
    pub err_stderr: f64,
    pub replicates: usize,
}

/// Averages the test error over independent dilution masks at each grid
/// point.
pub fn dilution_sweep(
    mlp: &Mlp,
    grid: &[Vec<f64>],
    replicates: usize,
    dataset: &Dataset,
    seed: u64,
) -> Result<Vec<DilutionSweepRow>> {
    use rayon::prelude::*;
    grid.iter()
        .enumerate()
        .map(|(gi, probs)| {
            let errs: Vec<f64> = (0..replicates)
                .into_par_iter()
                .map(|rep| {
                    let config = DilutionConfig {
                        remove_probs: probs.clone(),
                        seed: subseed(seed, (gi * replicates + rep) as u64),
                    };
                    test_error(&dilute(mlp, &config)?, dataset)
                })
                .collect::<Result<Vec<_>>>()?;
            let n = errs.len() as f64;
            let mean = errs.iter().sum::<f64>() / n;
            let stderr = if errs.len() > 1 {
                let var = errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
            Ok(DilutionSweepRow {
                remove_probs: probs.clone(),
                err_mean: mean,
                err_stderr: stderr,
                replicates,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct PathHistogram {
    /// (bin_lo, bin_hi, count) over the observed product range.
    pub bins: Vec<(f64, f64, usize)>,
    /// Fraction of strictly positive products.
    pub sign_balance: f64,
    pub products: Vec<f64>,
}

impl PathHistogram {
    /// Fraction of products inside the central `width_fraction` of the
    /// observed range, centered at zero.
    pub fn central_fraction(&self, width_fraction: f64) -> f64 {
        let min = self.products.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let half = 0.5 * width_fraction * (max - min);
        let inside = self.products.iter().filter(|p| p.abs() <= half).count();
        inside as f64 / self.products.len() as f64
    }
}

/// Samples uniform random paths (one unit per layer) and bins the product
/// of the traversed weight entries, bias excluded.
pub fn path_product_histogram(
    mlp: &Mlp,
    num_paths: usize,
    num_bins: usize,
    seed: u64,
) -> Result<PathHistogram> {
    if num_paths == 0 || num_bins == 0 {
        return Err(Error::Param("need at least one path and one bin".into()));
    }
    let mut rng = seeded(seed);
    let mut products = Vec::with_capacity(num_paths);
    for _ in 0..num_paths {
        let units: Vec<usize> = mlp.widths.iter().map(|&w| rng.gen_range(0..w)).collect();
        let mut product = 1.0;
        for (l, w) in mlp.weights.iter().enumerate() {
            product *= w.get(units[l + 1], units[l]);
        }
        products.push(product);
    }
    let min = products.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let span = (max - min).max(f64::MIN_POSITIVE);
    let mut counts = vec![0usize; num_bins];
    for &p in &products {
        let bin = (((p - min) / span) * num_bins as f64) as usize;
        counts[bin.min(num_bins - 1)] += 1;
    }
    let bins = counts
        .iter()
        .enumerate()
        .map(|(b, &c)| {
            let lo = min + span * b as f64 / num_bins as f64;
            let hi = min + span * (b + 1) as f64 / num_bins as f64;
            (lo, hi, c)
        })
        .collect();
    let positive = products.iter().filter(|&&p| p > 0.0).count();
    Ok(PathHistogram {
        bins,
        sign_balance: positive as f64 / num_paths as f64,
        products,
    })
}

/// Model-averaged prediction for a dropconnect-trained layer: the
/// pre-activation there is treated per-unit as Gaussian with mean
/// `p (W a)` and variance `p(1-p) ((WoW)(aoa))`; each of `num_samples`
/// draws completes the forward pass and the softmax outputs are averaged.
pub fn gaussian_inference(
    mlp: &Mlp,
    input: &[f64],
    dropconnect: &DropconnectConfig,
    num_samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    dropconnect.validate(mlp.num_weight_layers())?;
    let flagged: Vec<usize> = dropconnect
        .inference_flags
        .iter()
        .enumerate()
        .filter(|(_, &on)| on)
        .map(|(l, _)| l)
        .collect();
    if flagged.len() != 1 {
        return Err(Error::Config(format!(
            "exactly one layer must be flagged for dropconnect inference, got {}",
            flagged.len()
        )));
    }
    if num_samples == 0 {
        return Err(Error::Param("need at least one sample".into()));
    }
    let layer = flagged[0];
    let keep = dropconnect.keep_probs[layer];
    // deterministic pass up to the flagged layer
    let acts = forward(mlp, input, None)?;
    let a = &acts.layers[layer];
    let w = &mlp.weights[layer];
    let mut mean = vec![0.0; mlp.widths[layer + 1]];
    let mut var = vec![0.0; mlp.widths[layer + 1]];
    for r in 0..w.rows {
        let mut mu = w.get(r, a.len());
        let mut v2 = w.get(r, a.len()).powi(2);
        for (c, &ac) in a.iter().enumerate() {
            mu += w.get(r, c) * ac;
            v2 += (w.get(r, c) * ac).powi(2);
        }
        mean[r] = keep * mu;
        var[r] = keep * (1.0 - keep) * v2;
    }
    let mut rng = seeded(seed);
    let num_layers = mlp.num_weight_layers();
    let mut averaged = vec![0.0; mlp.num_classes()];
    for _ in 0..num_samples {
        let mut current: Vec<f64> = mean
            .iter()
            .zip(&var)
            .map(|(&m, &v)| {
                if v > 0.0 {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    m + v.sqrt() * z
                } else {
                    m
                }
            })
            .collect();
        if layer + 1 == mlp.widths.len() - 1 {
            softmax_in_place(&mut current);
        } else {
            for x in current.iter_mut() {
                *x = sigmoid(*x);
            }
            // finish deterministically through the remaining layers
            for l in layer + 1..num_layers {
                let w = &mlp.weights[l];
                let mut next = vec![0.0; mlp.widths[l + 1]];
                for (r, out) in next.iter_mut().enumerate() {
                    let mut acc = w.get(r, current.len());
                    for (c, &ac) in current.iter().enumerate() {
                        acc += w.get(r, c) * ac;
                    }
                    *out = acc;
                }
                if l + 1 == mlp.widths.len() - 1 {
                    softmax_in_place(&mut next);
                } else {
                    for x in next.iter_mut() {
                        *x = sigmoid(*x);
                    }
                }
                current = next;
            }
        }
        for (avg, &c) in averaged.iter_mut().zip(&current) {
            *avg += c;
        }
    }
    for avg in averaged.iter_mut() {
        *avg /= num_samples as f64;
    }
    Ok(averaged)
}

/// Versioned text checkpoint of architecture and weights; round-trip
/// exact (shortest round-trip float formatting).
pub fn save_checkpoint<W: std::io::Write>(mlp: &Mlp, mut w: W) -> Result<()> {
    writeln!(w, "MLP v1")?;
    write!(w, "widths")?;
    for width in &mlp.widths {
        write!(w, " {width}")?;
    }
    writeln!(w)?;
    for (l, weight) in mlp.weights.iter().enumerate() {
        writeln!(w, "layer {l} {} {}", weight.rows, weight.cols)?;
        for r in 0..weight.rows {
            let row: Vec<String> = weight.row(r).iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", row.join(" "))?;
        }
    }
    Ok(())
}

pub fn load_checkpoint<R: std::io::BufRead>(r: R) -> Result<Mlp> {
    let mut lines = r.lines();
    let mut next_line = || -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Parse("truncated checkpoint".into()))?
            .map_err(Error::from)
    };
    let header = next_line()?;
    if header != "MLP v1" {
        return Err(Error::Parse(format!("bad checkpoint header: {header}")));
    }
    let widths_line = next_line()?;
    let mut fields = widths_line.split_whitespace();
    if fields.next() != Some("widths") {
        return Err(Error::Parse("missing widths line".into()));
    }
    let widths: Vec<usize> = fields
        .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad width: {s}"))))
        .collect::<Result<Vec<_>>>()?;
    let arch = NetArchitecture::new(widths.clone())?;
    let mut weights = Vec::with_capacity(arch.num_weight_layers());
    for l in 0..arch.num_weight_layers() {
        let header = next_line()?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "layer" {
            return Err(Error::Parse(format!("bad layer header: {header}")));
        }
        let rows: usize = fields[2]
            .parse()
            .map_err(|_| Error::Parse("bad row count".into()))?;
        let cols: usize = fields[3]
            .parse()
            .map_err(|_| Error::Parse("bad column count".into()))?;
        if rows != widths[l + 1] || cols != widths[l] + 1 {
            return Err(Error::Parse(format!("layer {l} shape mismatch")));
        }
        let mut m = Matrix::zeros(rows, cols);
        for r in 0..rows {
            let line = next_line()?;
            let values: Vec<f64> = line
                .split_whitespace()
                .map(|s| s.parse().map_err(|_| Error::Parse(format!("bad weight: {s}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != cols {
                return Err(Error::Parse(format!("layer {l} row {r} has {} values", values.len())));
            }
            m.data[r * cols..(r + 1) * cols].copy_from_slice(&values);
        }
        weights.push(m);
    }
    Ok(Mlp { widths, weights })
}
