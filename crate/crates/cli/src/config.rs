//! Experiment config files: flat `key = value` lines with dotted section
//! names, `#` comments, and strict key checking (any unknown key aborts).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use nsfx_core::data::{
    load_mnist_idx, mean_subtract, subset_per_class, synthetic_digits, synthetic_two_gaussians,
    Dataset,
};
use nsfx_core::losses::{NoiseSpec, NoiseVariant};
use nsfx_core::network::{desk_cnn, desk_mlp, LayerSpec};
use nsfx_core::training::{LrSchedule, TrainConfig};

const KNOWN_KEYS: &[&str] = &[
    "dataset.kind",
    "dataset.train_images",
    "dataset.train_labels",
    "dataset.test_images",
    "dataset.test_labels",
    "dataset.n_per_class",
    "dataset.test_n_per_class",
    "dataset.dim",
    "dataset.separation",
    "dataset.data_seed",
    "dataset.subset_per_class",
    "dataset.subset_seed",
    "dataset.mean_subtract",
    "network.layers",
    "noise.variant",
    "noise.alpha_squared",
    "train.batch_size",
    "train.total_iterations",
    "train.base_lr",
    "train.lr_drop_iterations",
    "train.lr_drop_factor",
    "train.weight_decay",
    "train.momentum",
    "train.seed",
    "train.pbar_interval",
    "train.eval_interval",
    "output.dir",
    "output.real_timing",
    "sweep.variants",
    "sweep.alpha_squared",
    "sweep.seeds",
];

#[derive(Debug, Clone)]
pub enum DatasetSpec {
    MnistIdx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
    },
    TwoGaussians {
        n_per_class: usize,
        test_n_per_class: usize,
        dim: usize,
        separation: f64,
        data_seed: u64,
    },
    Digits {
        n_per_class: usize,
        test_n_per_class: usize,
        data_seed: u64,
    },
}

/// A fully resolved experiment definition.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub subset_per_class: Option<usize>,
    pub subset_seed: Option<u64>,
    pub mean_subtract: bool,
    pub layers: Vec<LayerSpec>,
    pub variant: NoiseVariant,
    pub alpha_squared: f64,
    pub batch_size: usize,
    pub total_iterations: u64,
    pub base_lr: f64,
    /// None = auto (one drop at 75% of the run).
    pub lr_drop_iterations: Option<Vec<u64>>,
    pub lr_drop_factor: f64,
    pub weight_decay: f64,
    pub momentum: f64,
    pub seed: u64,
    pub pbar_interval: u64,
    pub eval_interval: u64,
    pub output_dir: PathBuf,
    pub real_timing: bool,
    pub sweep_variants: Vec<NoiseVariant>,
    pub sweep_alpha_squared: Vec<f64>,
    pub sweep_seeds: Vec<u64>,
}

struct RawConfig {
    values: BTreeMap<String, String>,
}

impl RawConfig {
    fn parse(text: &str, origin: &Path) -> Result<RawConfig> {
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(idx) => &raw[..idx],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "{}:{}: expected `key = value`, got `{raw}`",
                    origin.display(),
                    lineno + 1
                );
            };
            let key = key.trim().to_string();
            if !KNOWN_KEYS.contains(&key.as_str()) {
                bail!("{}:{}: unknown key `{key}`", origin.display(), lineno + 1);
            }
            if values.insert(key.clone(), value.trim().to_string()).is_some() {
                bail!("{}:{}: duplicate key `{key}`", origin.display(), lineno + 1);
            }
        }
        Ok(RawConfig { values })
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| anyhow!("missing required key `{key}`"))
    }

    fn parse_as<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}")),
        }
    }

    fn parse_opt<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("key `{key}`: cannot parse `{v}`: {e}")),
        }
    }
}

fn parse_bool(raw: &RawConfig, key: &str, default: bool) -> Result<bool> {
    match raw.get(key) {
        None => Ok(default),
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        Some(other) => bail!("key `{key}`: expected true or false, got `{other}`"),
    }
}

fn parse_list<T: std::str::FromStr>(value: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse()
                .map_err(|e| anyhow!("key `{key}`: cannot parse `{s}`: {e}"))
        })
        .collect()
}

fn parse_layers(value: &str) -> Result<Vec<LayerSpec>> {
    match value.trim() {
        "desk_mlp" => Ok(desk_mlp()),
        "desk_cnn" => Ok(desk_cnn()),
        other => Ok(LayerSpec::parse_list(other)?),
    }
}

impl ExperimentConfig {
    /// Parse a config file. `seed_override` and `out_override` come from
    /// the command line and win over the file.
    pub fn load(
        path: &Path,
        seed_override: Option<u64>,
        out_override: Option<PathBuf>,
    ) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let raw = RawConfig::parse(&text, path)?;

        let dataset = match raw.required("dataset.kind")? {
            "mnist_idx" => DatasetSpec::MnistIdx {
                train_images: raw.required("dataset.train_images")?.into(),
                train_labels: raw.required("dataset.train_labels")?.into(),
                test_images: raw.required("dataset.test_images")?.into(),
                test_labels: raw.required("dataset.test_labels")?.into(),
            },
            "two_gaussians" => DatasetSpec::TwoGaussians {
                n_per_class: raw.parse_as("dataset.n_per_class", 100usize)?,
                test_n_per_class: raw.parse_as("dataset.test_n_per_class", 100usize)?,
                dim: raw.parse_as("dataset.dim", 2usize)?,
                separation: raw.parse_as("dataset.separation", 4.0f64)?,
                data_seed: raw.parse_as("dataset.data_seed", 1000u64)?,
            },
            "digits" => DatasetSpec::Digits {
                n_per_class: raw.parse_as("dataset.n_per_class", 600usize)?,
                test_n_per_class: raw.parse_as("dataset.test_n_per_class", 200usize)?,
                data_seed: raw.parse_as("dataset.data_seed", 1000u64)?,
            },
            other => bail!("dataset.kind `{other}` is not one of mnist_idx, two_gaussians, digits"),
        };

        let variant = NoiseVariant::parse(raw.parse_as("noise.variant", "none".to_string())?.as_str())?;
        let alpha_squared = raw.parse_as("noise.alpha_squared", 0.0f64)?;
        if !(alpha_squared.is_finite() && alpha_squared >= 0.0) {
            bail!("noise.alpha_squared must be finite and >= 0, got {alpha_squared}");
        }

        let lr_drop_iterations = match raw.get("train.lr_drop_iterations") {
            None => None,
            Some("none") => Some(Vec::new()),
            Some(v) => Some(parse_list(v, "train.lr_drop_iterations")?),
        };

        let output_dir = match out_override {
            Some(dir) => dir,
            None => PathBuf::from(raw.required("output.dir")?),
        };

        let sweep_variants = match raw.get("sweep.variants") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(NoiseVariant::parse)
                .collect::<nsfx_core::Result<Vec<_>>>()?,
        };
        let sweep_alpha_squared = match raw.get("sweep.alpha_squared") {
            None => Vec::new(),
            Some(v) => parse_list(v, "sweep.alpha_squared")?,
        };
        let seed = seed_override.unwrap_or(raw.parse_as("train.seed", 1u64)?);
        let sweep_seeds = match raw.get("sweep.seeds") {
            None => vec![seed],
            Some(v) => parse_list(v, "sweep.seeds")?,
        };

        Ok(ExperimentConfig {
            dataset,
            subset_per_class: raw.parse_opt("dataset.subset_per_class")?,
            subset_seed: raw.parse_opt("dataset.subset_seed")?,
            mean_subtract: parse_bool(&raw, "dataset.mean_subtract", true)?,
            layers: parse_layers(raw.required("network.layers")?)?,
            variant,
            alpha_squared,
            batch_size: raw.parse_as("train.batch_size", 64usize)?,
            total_iterations: raw.parse_as("train.total_iterations", 2000u64)?,
            base_lr: raw.parse_as("train.base_lr", 0.05f64)?,
            lr_drop_iterations,
            lr_drop_factor: raw.parse_as("train.lr_drop_factor", 10.0f64)?,
            weight_decay: raw.parse_as("train.weight_decay", 1e-3f64)?,
            momentum: raw.parse_as("train.momentum", 0.9f64)?,
            seed,
            pbar_interval: raw.parse_as("train.pbar_interval", 100u64)?,
            eval_interval: raw.parse_as("train.eval_interval", 100u64)?,
            output_dir,
            real_timing: parse_bool(&raw, "output.real_timing", false)?,
            sweep_variants,
            sweep_alpha_squared,
            sweep_seeds,
        })
    }

    fn drops(&self) -> Vec<u64> {
        match &self.lr_drop_iterations {
            Some(list) => list.clone(),
            None => vec![self.total_iterations * 3 / 4],
        }
    }

    /// Core training config for a given noise cell and seed.
    pub fn train_config(
        &self,
        variant: NoiseVariant,
        alpha_squared: f64,
        seed: u64,
    ) -> Result<TrainConfig> {
        Ok(TrainConfig {
            layers: self.layers.clone(),
            noise: NoiseSpec::from_alpha_squared(variant, alpha_squared)?,
            batch_size: self.batch_size,
            total_iterations: self.total_iterations,
            schedule: LrSchedule {
                base: self.base_lr,
                drop_iterations: self.drops(),
                factor: self.lr_drop_factor,
            },
            weight_decay: self.weight_decay,
            momentum: self.momentum,
            seed,
            pbar_interval: self.pbar_interval,
            eval_interval: self.eval_interval,
            real_timing: self.real_timing,
        })
    }

    /// Resolved key/value echo for summary.json.
    pub fn echo(&self, variant: NoiseVariant, alpha_squared: f64, seed: u64) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_string(), v);
        };
        match &self.dataset {
            DatasetSpec::MnistIdx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => {
                put("dataset.kind", "mnist_idx".into());
                put("dataset.train_images", train_images.display().to_string());
                put("dataset.train_labels", train_labels.display().to_string());
                put("dataset.test_images", test_images.display().to_string());
                put("dataset.test_labels", test_labels.display().to_string());
            }
            DatasetSpec::TwoGaussians {
                n_per_class,
                test_n_per_class,
                dim,
                separation,
                data_seed,
            } => {
                put("dataset.kind", "two_gaussians".into());
                put("dataset.n_per_class", n_per_class.to_string());
                put("dataset.test_n_per_class", test_n_per_class.to_string());
                put("dataset.dim", dim.to_string());
                put("dataset.separation", separation.to_string());
                put("dataset.data_seed", data_seed.to_string());
            }
            DatasetSpec::Digits {
                n_per_class,
                test_n_per_class,
                data_seed,
            } => {
                put("dataset.kind", "digits".into());
                put("dataset.n_per_class", n_per_class.to_string());
                put("dataset.test_n_per_class", test_n_per_class.to_string());
                put("dataset.data_seed", data_seed.to_string());
            }
        }
        if let Some(p) = self.subset_per_class {
            put("dataset.subset_per_class", p.to_string());
            put(
                "dataset.subset_seed",
                self.subset_seed.unwrap_or(seed).to_string(),
            );
        }
        put("dataset.mean_subtract", self.mean_subtract.to_string());
        let layers: Vec<String> = self.layers.iter().map(|l| l.to_string()).collect();
        put("network.layers", layers.join(" "));
        put("noise.variant", variant.name().into());
        put("noise.alpha_squared", alpha_squared.to_string());
        put("train.batch_size", self.batch_size.to_string());
        put("train.total_iterations", self.total_iterations.to_string());
        put("train.base_lr", self.base_lr.to_string());
        let drops: Vec<String> = self.drops().iter().map(u64::to_string).collect();
        put("train.lr_drop_iterations", drops.join(","));
        put("train.lr_drop_factor", self.lr_drop_factor.to_string());
        put("train.weight_decay", self.weight_decay.to_string());
        put("train.momentum", self.momentum.to_string());
        put("train.seed", seed.to_string());
        put("train.pbar_interval", self.pbar_interval.to_string());
        put("train.eval_interval", self.eval_interval.to_string());
        put("output.real_timing", self.real_timing.to_string());
        map
    }

    /// Load or generate the base train/test pair, before subsetting.
    pub fn build_base_datasets(&self) -> Result<(Dataset, Dataset)> {
        let pair = match &self.dataset {
            DatasetSpec::MnistIdx {
                train_images,
                train_labels,
                test_images,
                test_labels,
            } => (
                load_mnist_idx(train_images, train_labels)?,
                load_mnist_idx(test_images, test_labels)?,
            ),
            DatasetSpec::TwoGaussians {
                n_per_class,
                test_n_per_class,
                dim,
                separation,
                data_seed,
            } => (
                synthetic_two_gaussians(*n_per_class, *dim, *separation, *data_seed)?,
                synthetic_two_gaussians(*test_n_per_class, *dim, *separation, data_seed + 1)?,
            ),
            DatasetSpec::Digits {
                n_per_class,
                test_n_per_class,
                data_seed,
            } => (
                synthetic_digits(*n_per_class, *data_seed)?,
                synthetic_digits(*test_n_per_class, data_seed + 1)?,
            ),
        };
        Ok(pair)
    }

    /// Subset and preprocess for one run seed. The subset seed defaults to
    /// the run seed so paired-seed sweeps share data; an explicit
    /// dataset.subset_seed pins it across all seeds.
    pub fn materialize(
        &self,
        base_train: &Dataset,
        base_test: &Dataset,
        seed: u64,
    ) -> Result<(Dataset, Dataset)> {
        let mut train = match self.subset_per_class {
            Some(per_class) => {
                subset_per_class(base_train, per_class, self.subset_seed.unwrap_or(seed))?
            }
            None => base_train.clone(),
        };
        let mut test = base_test.clone();
        if self.mean_subtract {
            mean_subtract(&mut train, &mut [&mut test])?;
        }
        Ok((train, test))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_config(content: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("exp.conf");
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(content.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn parses_minimal_config() {
        let (_d, path) = write_config(
            "dataset.kind = two_gaussians\n\
             network.layers = dense(2,8) prelu(8) dense(8,4)\n\
             output.dir = /tmp/out\n",
        );
        let cfg = ExperimentConfig::load(&path, None, None).unwrap();
        assert_eq!(cfg.batch_size, 64);
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.layers.len(), 3);
        assert!(!cfg.real_timing);
    }

    #[test]
    fn rejects_unknown_key_with_name() {
        let (_d, path) = write_config("dataset.kind = digits\nfoo.bar = 1\n");
        let err = ExperimentConfig::load(&path, None, None).unwrap_err();
        assert!(err.to_string().contains("foo.bar"), "{err}");
    }

    #[test]
    fn rejects_duplicate_key() {
        let (_d, path) = write_config(
            "dataset.kind = digits\ndataset.kind = digits\n",
        );
        let err = ExperimentConfig::load(&path, None, None).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let (_d, path) = write_config(
            "# experiment\n\n\
             dataset.kind = digits  # procedural\n\
             network.layers = desk_mlp\n\
             output.dir = /tmp/x\n\
             train.seed = 9\n",
        );
        let cfg = ExperimentConfig::load(&path, None, None).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.layers, desk_mlp());
    }

    #[test]
    fn overrides_win() {
        let (_d, path) = write_config(
            "dataset.kind = digits\nnetwork.layers = desk_mlp\noutput.dir = /tmp/a\ntrain.seed = 3\n",
        );
        let cfg =
            ExperimentConfig::load(&path, Some(77), Some(PathBuf::from("/tmp/b"))).unwrap();
        assert_eq!(cfg.seed, 77);
        assert_eq!(cfg.output_dir, PathBuf::from("/tmp/b"));
    }

    #[test]
    fn missing_required_key_errors() {
        let (_d, path) = write_config("dataset.kind = digits\noutput.dir = /tmp/x\n");
        let err = ExperimentConfig::load(&path, None, None).unwrap_err();
        assert!(err.to_string().contains("network.layers"), "{err}");
    }

    #[test]
    fn lr_drop_list_and_none() {
        let (_d, path) = write_config(
            "dataset.kind = digits\nnetwork.layers = desk_mlp\noutput.dir = /tmp/x\n\
             train.lr_drop_iterations = 100, 200\n",
        );
        let cfg = ExperimentConfig::load(&path, None, None).unwrap();
        assert_eq!(cfg.lr_drop_iterations, Some(vec![100, 200]));

        let (_d2, path2) = write_config(
            "dataset.kind = digits\nnetwork.layers = desk_mlp\noutput.dir = /tmp/x\n\
             train.lr_drop_iterations = none\n",
        );
        let cfg2 = ExperimentConfig::load(&path2, None, None).unwrap();
        assert_eq!(cfg2.lr_drop_iterations, Some(vec![]));
    }

    #[test]
    fn negative_alpha_squared_rejected() {
        let (_d, path) = write_config(
            "dataset.kind = digits\nnetwork.layers = desk_mlp\noutput.dir = /tmp/x\n\
             noise.alpha_squared = -0.5\n",
        );
        assert!(ExperimentConfig::load(&path, None, None).is_err());
    }

    #[test]
    fn echo_is_deterministic_and_resolved() {
        let (_d, path) = write_config(
            "dataset.kind = digits\nnetwork.layers = desk_mlp\noutput.dir = /tmp/x\n\
             dataset.subset_per_class = 60\n",
        );
        let cfg = ExperimentConfig::load(&path, None, None).unwrap();
        let echo = cfg.echo(NoiseVariant::Annealed, 0.5, 4);
        assert_eq!(echo["noise.variant"], "annealed");
        assert_eq!(echo["noise.alpha_squared"], "0.5");
        assert_eq!(echo["train.seed"], "4");
        assert_eq!(echo["dataset.subset_seed"], "4");
        assert_eq!(echo["train.lr_drop_iterations"], "1500");
    }
}
