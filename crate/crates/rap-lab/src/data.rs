//! Dataset ingestion (IDX image/label pairs), synthetic fallback data,
//! flat key=value experiment configuration, and CSV emission.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::{seeded, subseed};

const IDX_IMAGES_MAGIC: u32 = 2051;
const IDX_LABELS_MAGIC: u32 = 2049;

/// Labeled inputs in [0,1]^dim with integer class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub name: String,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.first().map(|v| v.len()).unwrap_or(0)
    }

    /// One-hot view of the label of example `idx`.
    pub fn one_hot(&self, idx: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.num_classes];
        v[self.labels[idx]] = 1.0;
        v
    }
}

fn read_u32_be(bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    let slice = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| Error::Parse(format!("truncated {what}")))?;
    Ok(u32::from_be_bytes(slice.try_into().unwrap()))
}

/// Parses a big-endian IDX image/label pair (magic 2051 and 2049).
/// Pixels are scaled by 1/255 with row-major flattening; the example
/// counts of the two files must match.
pub fn load_idx_pair<P: AsRef<Path>, Q: AsRef<Path>>(
    images_path: P,
    labels_path: Q,
) -> Result<Dataset> {
    let mut image_bytes = Vec::new();
    fs::File::open(&images_path)?.read_to_end(&mut image_bytes)?;
    let mut label_bytes = Vec::new();
    fs::File::open(&labels_path)?.read_to_end(&mut label_bytes)?;
    let name = format!("idx:{}", images_path.as_ref().display());
    parse_idx_pair(&image_bytes, &label_bytes, name)
}

pub fn parse_idx_pair(image_bytes: &[u8], label_bytes: &[u8], name: String) -> Result<Dataset> {
    let magic = read_u32_be(image_bytes, 0, "image header")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse(format!(
            "bad image magic {magic}, expected {IDX_IMAGES_MAGIC}"
        )));
    }
    let count = read_u32_be(image_bytes, 4, "image header")? as usize;
    let rows = read_u32_be(image_bytes, 8, "image header")? as usize;
    let cols = read_u32_be(image_bytes, 12, "image header")? as usize;
    let dim = rows * cols;
    let payload = &image_bytes[16..];
    if payload.len() != count * dim {
        return Err(Error::Parse(format!(
            "image payload has {} bytes, expected {}",
            payload.len(),
            count * dim
        )));
    }

    let magic = read_u32_be(label_bytes, 0, "label header")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse(format!(
            "bad label magic {magic}, expected {IDX_LABELS_MAGIC}"
        )));
    }
    let label_count = read_u32_be(label_bytes, 4, "label header")? as usize;
    if label_count != count {
        return Err(Error::Parse(format!(
            "{count} images but {label_count} labels"
        )));
    }
    let label_payload = &label_bytes[8..];
    if label_payload.len() != count {
        return Err(Error::Parse(format!(
            "label payload has {} bytes, expected {count}",
            label_payload.len()
        )));
    }

    let inputs: Vec<Vec<f64>> = (0..count)
        .map(|i| {
            payload[i * dim..(i + 1) * dim]
                .iter()
                .map(|&b| b as f64 / 255.0)
                .collect()
        })
        .collect();
    let labels: Vec<usize> = label_payload.iter().map(|&b| b as usize).collect();
    let num_classes = labels.iter().max().map(|&m| m + 1).unwrap_or(0).max(1);
    Ok(Dataset {
        inputs,
        labels,
        num_classes,
        name,
    })
}

/// Serializes a dataset back to IDX bytes (pixels quantized to
/// round(x*255)). Images are written as count x dim x 1.
pub fn write_idx_pair<W1: Write, W2: Write>(
    dataset: &Dataset,
    mut images: W1,
    mut labels: W2,
) -> Result<()> {
    let count = dataset.len() as u32;
    images.write_all(&IDX_IMAGES_MAGIC.to_be_bytes())?;
    images.write_all(&count.to_be_bytes())?;
    images.write_all(&(dataset.dim() as u32).to_be_bytes())?;
    images.write_all(&1u32.to_be_bytes())?;
    for input in &dataset.inputs {
        let row: Vec<u8> = input.iter().map(|&x| (x * 255.0).round() as u8).collect();
        images.write_all(&row)?;
    }
    labels.write_all(&IDX_LABELS_MAGIC.to_be_bytes())?;
    labels.write_all(&count.to_be_bytes())?;
    let bytes: Vec<u8> = dataset.labels.iter().map(|&l| l as u8).collect();
    labels.write_all(&bytes)?;
    Ok(())
}

/// Seeded uniform sample of `count` examples without replacement.
pub fn subset(dataset: &Dataset, count: usize, seed: u64) -> Result<Dataset> {
    if count > dataset.len() {
        return Err(Error::Param(format!(
            "requested {count} examples from a set of {}",
            dataset.len()
        )));
    }
    let indices = permutation(dataset.len(), seed);
    Ok(take(dataset, &indices[..count]))
}

/// Two disjoint seeded subsets, e.g. a train/test split.
pub fn disjoint_split(
    dataset: &Dataset,
    first: usize,
    second: usize,
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    if first + second > dataset.len() {
        return Err(Error::Param(format!(
            "requested {first}+{second} examples from a set of {}",
            dataset.len()
        )));
    }
    let indices = permutation(dataset.len(), seed);
    Ok((
        take(dataset, &indices[..first]),
        take(dataset, &indices[first..first + second]),
    ))
}

fn permutation(len: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut indices: Vec<usize> = (0..len).collect();
    indices.shuffle(&mut seeded(seed));
    indices
}

fn take(dataset: &Dataset, indices: &[usize]) -> Dataset {
    Dataset {
        inputs: indices.iter().map(|&i| dataset.inputs[i].clone()).collect(),
        labels: indices.iter().map(|&i| dataset.labels[i].clone()).collect(),
        num_classes: dataset.num_classes,
        name: format!("{}[subset {}]", dataset.name, indices.len()),
    }
}

/// Balanced synthetic classification data: one uniform prototype per
/// class, examples are prototype plus Gaussian noise clamped to [0,1].
pub fn synthetic_dataset(
    num_classes: usize,
    dim: usize,
    size: usize,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if num_classes == 0 || dim == 0 || size == 0 {
        return Err(Error::Param("synthetic dataset parameters must be positive".into()));
    }
    if noise_std < 0.0 {
        return Err(Error::Param("noise std must be >= 0".into()));
    }
    let mut proto_rng = seeded(subseed(seed, 0));
    let prototypes: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| (0..dim).map(|_| proto_rng.gen::<f64>()).collect())
        .collect();
    let mut noise_rng = seeded(subseed(seed, 1));
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).unwrap();
    let mut inputs = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for i in 0..size {
        let class = i % num_classes;
        let example: Vec<f64> = prototypes[class]
            .iter()
            .map(|&p| {
                let noise = if noise_std > 0.0 {
                    normal.sample(&mut noise_rng)
                } else {
                    0.0
                };
                (p + noise).clamp(0.0, 1.0)
            })
            .collect();
        inputs.push(example);
        labels.push(class);
    }
    Ok(Dataset {
        inputs,
        labels,
        num_classes,
        name: format!("synthetic(classes={num_classes},dim={dim},noise={noise_std})"),
    })
}

/// Harder synthetic variant: every class prototype is a shared uniform
/// base vector plus a class-specific uniform perturbation of amplitude
/// `margin`. The between-class signal scales with `margin` while each
/// input keeps full-sized common structure, so classification hinges on
/// small differences riding on a large shared component.
pub fn synthetic_dataset_margin(
    num_classes: usize,
    dim: usize,
    size: usize,
    margin: f64,
    noise_std: f64,
    seed: u64,
) -> Result<Dataset> {
    if !(margin > 0.0 && margin <= 1.0) {
        return Err(Error::Param(format!("margin must be in (0, 1], got {margin}")));
    }
    if num_classes == 0 || dim == 0 || size == 0 {
        return Err(Error::Param("synthetic dataset parameters must be positive".into()));
    }
    if noise_std < 0.0 {
        return Err(Error::Param("noise std must be >= 0".into()));
    }
    let mut proto_rng = seeded(subseed(seed, 0));
    let base: Vec<f64> = (0..dim).map(|_| proto_rng.gen::<f64>()).collect();
    let prototypes: Vec<Vec<f64>> = (0..num_classes)
        .map(|_| {
            base.iter()
                .map(|&b| b + margin * (proto_rng.gen::<f64>() - 0.5))
                .collect()
        })
        .collect();
    let mut noise_rng = seeded(subseed(seed, 1));
    let normal = Normal::new(0.0, noise_std.max(f64::MIN_POSITIVE)).unwrap();
    let mut inputs = Vec::with_capacity(size);
    let mut labels = Vec::with_capacity(size);
    for i in 0..size {
        let class = i % num_classes;
        let example: Vec<f64> = prototypes[class]
            .iter()
            .map(|&p| {
                let noise = if noise_std > 0.0 {
                    normal.sample(&mut noise_rng)
                } else {
                    0.0
                };
                (p + noise).clamp(0.0, 1.0)
            })
            .collect();
        inputs.push(example);
        labels.push(class);
    }
    Ok(Dataset {
        inputs,
        labels,
        num_classes,
        name: format!(
            "synthetic-margin(classes={num_classes},dim={dim},margin={margin},noise={noise_std})"
        ),
    })
}

/// Validated experiment configuration, read from a flat key=value file.
///
/// Keys: `arch` (dash-separated widths), `seed`, `epochs`, `batch_size`,
/// `schedule` (comma list of `rate x span`, e.g. `0.1x600,0.005x200`),
/// `b1`, `b2` (train/test sizes), `dropconnect` (comma list of per-layer
/// keep probabilities), `dropconnect_layer` (1-based weight layer for
/// Gaussian inference), `fa_layers` (comma list of 1-based weight layers),
/// `fa_bound`, `train_images`, `train_labels`, `test_images`,
/// `test_labels` (IDX paths), `synthetic_noise`. Unknown keys are errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub arch: Vec<usize>,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub schedule: Vec<(usize, f64)>,
    pub b1: usize,
    pub b2: usize,
    pub dropconnect: Vec<f64>,
    pub dropconnect_layer: Option<usize>,
    pub fa_layers: Vec<usize>,
    pub fa_bound: f64,
    pub train_images: Option<String>,
    pub train_labels: Option<String>,
    pub test_images: Option<String>,
    pub test_labels: Option<String>,
    pub synthetic_noise: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            arch: vec![784, 100, 200, 10],
            seed: 1,
            epochs: 50,
            batch_size: 10,
            schedule: vec![(1000, 0.1)],
            b1: 2000,
            b2: 1000,
            dropconnect: Vec::new(),
            dropconnect_layer: None,
            fa_layers: Vec::new(),
            fa_bound: 0.5,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            synthetic_noise: 0.05,
        }
    }
}

impl ExperimentConfig {
    pub fn num_weight_layers(&self) -> usize {
        self.arch.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.arch.len() < 2 || self.arch.iter().any(|&w| w == 0) {
            return Err(Error::Config("arch needs at least two nonzero widths".into()));
        }
        if self.batch_size == 0 || self.b1 == 0 || self.b2 == 0 {
            return Err(Error::Config("batch_size, b1, b2 must be positive".into()));
        }
        if self.schedule.is_empty() || self.schedule.iter().any(|&(_, r)| !(r > 0.0)) {
            return Err(Error::Config("schedule rates must be > 0".into()));
        }
        let covered: usize = self.schedule.iter().map(|&(s, _)| s).sum();
        if covered < self.epochs {
            return Err(Error::Config(format!(
                "schedule covers {covered} epochs, need {}",
                self.epochs
            )));
        }
        if !self.dropconnect.is_empty() && self.dropconnect.len() != self.num_weight_layers() {
            return Err(Error::Config("dropconnect needs one entry per weight layer".into()));
        }
        if self.dropconnect.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("dropconnect probabilities must be in [0,1]".into()));
        }
        if let Some(layer) = self.dropconnect_layer {
            if layer == 0 || layer > self.num_weight_layers() {
                return Err(Error::Config(format!("dropconnect_layer {layer} out of range")));
            }
        }
        if self
            .fa_layers
            .iter()
            .any(|&l| l == 0 || l > self.num_weight_layers())
        {
            return Err(Error::Config("fa_layers entries are 1-based weight layers".into()));
        }
        if !(self.fa_bound > 0.0) {
            return Err(Error::Config("fa_bound must be > 0".into()));
        }
        if self.synthetic_noise < 0.0 {
            return Err(Error::Config("synthetic_noise must be >= 0".into()));
        }
        Ok(())
    }
}

fn parse_schedule(value: &str) -> Result<Vec<(usize, f64)>> {
    value
        .split(',')
        .map(|entry| {
            let (rate, span) = entry
                .split_once('x')
                .ok_or_else(|| Error::Config(format!("bad schedule entry: {entry}")))?;
            let rate: f64 = rate
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad rate: {rate}")))?;
            let span: usize = span
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad span: {span}")))?;
            Ok((span, rate))
        })
        .collect()
}

/// Parses the flat key=value format; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", line_no + 1)))?;
        let key = key.trim();
        let value = value.trim();
        let bad = |what: &str| Error::Config(format!("bad {what}: {value}"));
        match key {
            "arch" => {
                config.arch = value
                    .split('-')
                    .map(|s| s.parse().map_err(|_| bad("arch")))
                    .collect::<Result<Vec<_>>>()?;
            }
            "seed" => config.seed = value.parse().map_err(|_| bad("seed"))?,
            "epochs" => config.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => config.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "schedule" => config.schedule = parse_schedule(value)?,
            "b1" => config.b1 = value.parse().map_err(|_| bad("b1"))?,
            "b2" => config.b2 = value.parse().map_err(|_| bad("b2"))?,
            "dropconnect" => {
                config.dropconnect = value
                    .split(',')
                    .map(|s| s.trim().parse().map_err(|_| bad("dropconnect")))
                    .collect::<Result<Vec<_>>>()?;
            }
            "dropconnect_layer" => {
                config.dropconnect_layer =
                    Some(value.parse().map_err(|_| bad("dropconnect_layer"))?)
            }
            "fa_layers" => {
                config.fa_layers = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.trim().parse().map_err(|_| bad("fa_layers")))
                    .collect::<Result<Vec<_>>>()?;
            }
            "fa_bound" => config.fa_bound = value.parse().map_err(|_| bad("fa_bound"))?,
            "train_images" => config.train_images = Some(value.to_string()),
            "train_labels" => config.train_labels = Some(value.to_string()),
            "test_images" => config.test_images = Some(value.to_string()),
            "test_labels" => config.test_labels = Some(value.to_string()),
            "synthetic_noise" => {
                config.synthetic_noise = value.parse().map_err(|_| bad("synthetic_noise"))?
            }
            other => return Err(Error::Config(format!("unknown key: {other}"))),
        }
    }
    config.validate()?;
    Ok(config)
}

pub fn load_config<P: AsRef<Path>>(path: P) -> Result<ExperimentConfig> {
    parse_config(&fs::read_to_string(path)?)
}

pub fn write_config<W: Write>(config: &ExperimentConfig, mut w: W) -> Result<()> {
    let arch: Vec<String> = config.arch.iter().map(|w| w.to_string()).collect();
    writeln!(w, "arch = {}", arch.join("-"))?;
    writeln!(w, "seed = {}", config.seed)?;
    writeln!(w, "epochs = {}", config.epochs)?;
    writeln!(w, "batch_size = {}", config.batch_size)?;
    let schedule: Vec<String> = config
        .schedule
        .iter()
        .map(|(span, rate)| format!("{rate}x{span}"))
        .collect();
    writeln!(w, "schedule = {}", schedule.join(","))?;
    writeln!(w, "b1 = {}", config.b1)?;
    writeln!(w, "b2 = {}", config.b2)?;
    if !config.dropconnect.is_empty() {
        let probs: Vec<String> = config.dropconnect.iter().map(|p| p.to_string()).collect();
        writeln!(w, "dropconnect = {}", probs.join(","))?;
    }
    if let Some(layer) = config.dropconnect_layer {
        writeln!(w, "dropconnect_layer = {layer}")?;
    }
    if !config.fa_layers.is_empty() {
        let layers: Vec<String> = config.fa_layers.iter().map(|l| l.to_string()).collect();
        writeln!(w, "fa_layers = {}", layers.join(","))?;
    }
    writeln!(w, "fa_bound = {}", config.fa_bound)?;
    for (key, value) in [
        ("train_images", &config.train_images),
        ("train_labels", &config.train_labels),
        ("test_images", &config.test_images),
        ("test_labels", &config.test_labels),
    ] {
        if let Some(value) = value {
            writeln!(w, "{key} = {value}")?;
        }
    }
    writeln!(w, "synthetic_noise = {}", config.synthetic_noise)?;
    Ok(())
}

/// CSV with a header row, `.` decimal separator, LF endings.
pub fn write_csv<W: Write>(header: &str, rows: &[Vec<String>], mut w: W) -> Result<()> {
    write!(w, "{header}\n")?;
    for row in rows {
        write!(w, "{}\n", row.join(","))?;
    }
    Ok(())
}
