//! Flat `key = value` run configuration with `#` comments.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use crate::data::{validate_pair, AugmentPolicy, ImbalanceProfile, ShotThresholds};
use crate::error::{Error, Result};
use crate::loss::{default_lambdas, DistillConfig};
use crate::net::{Schedule, SgdConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// Seeded Gaussian mixture with an exponential long-tail profile and a
    /// balanced test set.
    Synthetic {
        profile: ImbalanceProfile,
        dim: usize,
        separation: f64,
        test_per_class: usize,
    },
    Files { train: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub data: DataSource,
    pub lambdas: Vec<f64>,
    pub hidden: Vec<usize>,
    pub scale: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub schedule: Schedule,
    pub momentum: f64,
    pub weight_decay: f64,
    pub nesterov: bool,
    pub distill: DistillConfig,
    pub weak: AugmentPolicy,
    pub strong: AugmentPolicy,
    pub thresholds: ShotThresholds,
    /// Seeds per sweep point: `seed, seed + 1, ...`.
    pub repeats: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            data: DataSource::Synthetic {
                profile: ImbalanceProfile {
                    classes: 10,
                    n_max: 500,
                    beta: 100.0,
                },
                dim: 16,
                separation: 2.5,
                test_per_class: 100,
            },
            lambdas: default_lambdas(3).expect("three experts"),
            hidden: vec![64, 64],
            scale: 16.0,
            epochs: 30,
            batch_size: 64,
            lr: 0.1,
            schedule: Schedule::Linear,
            momentum: 0.9,
            weight_decay: 5e-4,
            nesterov: true,
            distill: DistillConfig::default(),
            weak: AugmentPolicy::weak(0.1),
            strong: AugmentPolicy::strong(0.5, 0.2, (0.7, 1.3), 1),
            thresholds: ShotThresholds::default(),
            repeats: 1,
            seed: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "dataset",
    "test_dataset",
    "classes",
    "dim",
    "n_max",
    "beta",
    "separation",
    "test_per_class",
    "M",
    "lambda",
    "hidden",
    "scale",
    "epochs",
    "batch_size",
    "lr",
    "schedule",
    "momentum",
    "weight_decay",
    "nesterov",
    "alpha",
    "temperature",
    "detach_teacher",
    "supervise_both_views",
    "weak_jitter",
    "strong_jitter",
    "strong_dropout",
    "strong_scale_min",
    "strong_scale_max",
    "strong_ops",
    "many_threshold",
    "few_threshold",
    "repeats",
    "seed",
];

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("`{key}`: cannot parse `{value}`")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("`{key}`: expected a boolean, got `{value}`"))),
    }
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let inner = value.trim_start_matches(['[', '{']).trim_end_matches([']', '}']);
    inner
        .split(',')
        .map(|s| parse_value(key, s.trim()))
        .collect()
}

fn join<T: std::fmt::Display>(items: &[T]) -> String {
    items.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl TrainConfig {
    /// Parses config text. Missing keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = TrainConfig::default();
        let mut seen = BTreeSet::new();
        let mut experts: Option<usize> = None;
        let mut lambdas: Option<Vec<f64>> = None;
        let (mut classes, mut n_max, mut beta, mut dim, mut separation, mut test_per_class) =
            match &cfg.data {
                DataSource::Synthetic {
                    profile,
                    dim,
                    separation,
                    test_per_class,
                } => (profile.classes, profile.n_max, profile.beta, *dim, *separation, *test_per_class),
                DataSource::Files { .. } => unreachable!("default is synthetic"),
            };
        let mut train_path: Option<PathBuf> = None;
        let mut test_path: Option<PathBuf> = None;
        let (mut scale_min, mut scale_max) = cfg.strong.scale_range;

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", lineno + 1)));
            }
            if !seen.insert(key.to_string()) {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "dataset" => {
                    if value != "synthetic" {
                        train_path = Some(PathBuf::from(value));
                    }
                }
                "test_dataset" => test_path = Some(PathBuf::from(value)),
                "classes" => classes = parse_value(key, value)?,
                "dim" => dim = parse_value(key, value)?,
                "n_max" => n_max = parse_value(key, value)?,
                "beta" => beta = parse_value(key, value)?,
                "separation" => separation = parse_value(key, value)?,
                "test_per_class" => test_per_class = parse_value(key, value)?,
                "M" => experts = Some(parse_value(key, value)?),
                "lambda" => {
                    if value != "auto" {
                        lambdas = Some(parse_list(key, value)?);
                    }
                }
                "hidden" => {
                    cfg.hidden = if value.is_empty() || value == "none" {
                        Vec::new()
                    } else {
                        parse_list(key, value)?
                    }
                }
                "scale" => cfg.scale = parse_value(key, value)?,
                "epochs" => cfg.epochs = parse_value(key, value)?,
                "batch_size" => cfg.batch_size = parse_value(key, value)?,
                "lr" => cfg.lr = parse_value(key, value)?,
                "schedule" => {
                    cfg.schedule = value.parse().map_err(|e: Error| Error::Config(e.to_string()))?
                }
                "momentum" => cfg.momentum = parse_value(key, value)?,
                "weight_decay" => cfg.weight_decay = parse_value(key, value)?,
                "nesterov" => cfg.nesterov = parse_bool(key, value)?,
                "alpha" => cfg.distill.alpha = parse_value(key, value)?,
                "temperature" => cfg.distill.temperature = parse_value(key, value)?,
                "detach_teacher" => cfg.distill.detach_teacher = parse_bool(key, value)?,
                "supervise_both_views" => cfg.distill.supervise_both_views = parse_bool(key, value)?,
                "weak_jitter" => cfg.weak.jitter_sigma = parse_value(key, value)?,
                "strong_jitter" => cfg.strong.jitter_sigma = parse_value(key, value)?,
                "strong_dropout" => cfg.strong.dropout_prob = parse_value(key, value)?,
                "strong_scale_min" => scale_min = parse_value(key, value)?,
                "strong_scale_max" => scale_max = parse_value(key, value)?,
                "strong_ops" => cfg.strong.op_count = parse_value(key, value)?,
                "many_threshold" => cfg.thresholds.many = parse_value(key, value)?,
                "few_threshold" => cfg.thresholds.few = parse_value(key, value)?,
                "repeats" => cfg.repeats = parse_value(key, value)?,
                "seed" => cfg.seed = parse_value(key, value)?,
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.strong.scale_range = (scale_min, scale_max);
        cfg.lambdas = match (experts, lambdas) {
            (None, None) => cfg.lambdas,
            (Some(m), None) => default_lambdas(m).map_err(|e| Error::Config(e.to_string()))?,
            (None, Some(list)) => list,
            (Some(m), Some(list)) => {
                if list.len() != m {
                    return Err(Error::Config(format!(
                        "lambda list has {} entries but M = {m}",
                        list.len()
                    )));
                }
                list
            }
        };
        cfg.data = match (train_path, test_path) {
            (None, None) => DataSource::Synthetic {
                profile: ImbalanceProfile {
                    classes,
                    n_max,
                    beta,
                },
                dim,
                separation,
                test_per_class,
            },
            (Some(train), Some(test)) => DataSource::Files { train, test },
            (Some(_), None) => {
                return Err(Error::Config("`dataset` path needs a `test_dataset` path".into()))
            }
            (None, Some(_)) => {
                return Err(Error::Config("`test_dataset` requires a `dataset` path".into()))
            }
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.lambdas.is_empty() {
            return bad("need at least one expert".into());
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return bad("lambda values must be finite".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden widths must be positive".into());
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and >= 0".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)".into());
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay must be finite and >= 0".into());
        }
        if !self.scale.is_finite() {
            return bad("scale must be finite".into());
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        self.distill.validate().map_err(|e| Error::Config(e.to_string()))?;
        validate_pair(&self.weak, &self.strong).map_err(|e| Error::Config(e.to_string()))?;
        if self.thresholds.few > self.thresholds.many {
            return bad("few_threshold must not exceed many_threshold".into());
        }
        if let DataSource::Synthetic {
            profile,
            dim,
            separation,
            ..
        } = &self.data
        {
            if profile.classes < 2 || *dim < 2 {
                return bad("synthetic data needs classes >= 2 and dim >= 2".into());
            }
            if !(profile.beta >= 1.0) || profile.n_max == 0 {
                return bad("synthetic data needs beta >= 1 and n_max >= 1".into());
            }
            if !(*separation > 0.0) {
                return bad("separation must be positive".into());
            }
        }
        Ok(())
    }

    pub fn experts(&self) -> usize {
        self.lambdas.len()
    }

    pub fn sgd(&self) -> SgdConfig {
        SgdConfig {
            lr0: self.lr,
            momentum: self.momentum,
            weight_decay: self.weight_decay,
            nesterov: self.nesterov,
            schedule: self.schedule,
            total_epochs: self.epochs,
        }
    }

    /// Canonical resolved form; parsing it yields this config again.
    pub fn echo(&self) -> String {
        let mut lines = Vec::new();
        let mut put = |k: &str, v: String| lines.push(format!("{k} = {v}"));
        match &self.data {
            DataSource::Synthetic {
                profile,
                dim,
                separation,
                test_per_class,
            } => {
                put("dataset", "synthetic".into());
                put("classes", profile.classes.to_string());
                put("dim", dim.to_string());
                put("n_max", profile.n_max.to_string());
                put("beta", profile.beta.to_string());
                put("separation", separation.to_string());
                put("test_per_class", test_per_class.to_string());
            }
            DataSource::Files { train, test } => {
                put("dataset", train.display().to_string());
                put("test_dataset", test.display().to_string());
            }
        }
        put("M", self.experts().to_string());
        put("lambda", join(&self.lambdas));
        put(
            "hidden",
            if self.hidden.is_empty() {
                "none".into()
            } else {
                join(&self.hidden)
            },
        );
        put("scale", self.scale.to_string());
        put("epochs", self.epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("lr", self.lr.to_string());
        put("schedule", self.schedule.name().into());
        put("momentum", self.momentum.to_string());
        put("weight_decay", self.weight_decay.to_string());
        put("nesterov", self.nesterov.to_string());
        put("alpha", self.distill.alpha.to_string());
        put("temperature", self.distill.temperature.to_string());
        put("detach_teacher", self.distill.detach_teacher.to_string());
        put("supervise_both_views", self.distill.supervise_both_views.to_string());
        put("weak_jitter", self.weak.jitter_sigma.to_string());
        put("strong_jitter", self.strong.jitter_sigma.to_string());
        put("strong_dropout", self.strong.dropout_prob.to_string());
        put("strong_scale_min", self.strong.scale_range.0.to_string());
        put("strong_scale_max", self.strong.scale_range.1.to_string());
        put("strong_ops", self.strong.op_count.to_string());
        put("many_threshold", self.thresholds.many.to_string());
        put("few_threshold", self.thresholds.few.to_string());
        put("repeats", self.repeats.to_string());
        put("seed", self.seed.to_string());
        lines.join("\n") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = TrainConfig::parse("").unwrap();
        assert_eq!(cfg, TrainConfig::default());
        assert_eq!(cfg.lambdas, [-0.5, 1.0, 2.5]);
        assert_eq!(cfg.distill.alpha, 0.6);
        assert_eq!(cfg.distill.temperature, 2.0);
        assert_eq!(cfg.momentum, 0.9);
        assert_eq!(cfg.weight_decay, 5e-4);
        assert!(cfg.nesterov);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(TrainConfig::parse("alpha = -1"), Err(Error::Config(_))));
        assert!(TrainConfig::parse("colour = red").is_err());
        assert!(TrainConfig::parse("epochs = many").is_err());
        assert!(TrainConfig::parse("M = 2\nlambda = 1, 2, 3").is_err());
        assert!(TrainConfig::parse("seed = 1\nseed = 2").is_err());
        assert!(TrainConfig::parse("just words").is_err());
        assert!(TrainConfig::parse("dataset = train.csv").is_err());
        assert!(TrainConfig::parse("temperature = 0").is_err());
    }

    #[test]
    fn auto_lambdas_follow_expert_count() {
        let cfg = TrainConfig::parse("M = 2, lambda = auto".replace(", ", "\n").as_str()).unwrap();
        assert_eq!(cfg.lambdas, [-0.5, 2.5]);
        let cfg = TrainConfig::parse("M = 1 # single expert\nlambda = auto").unwrap();
        assert_eq!(cfg.lambdas, [1.0]);
        let cfg = TrainConfig::parse("lambda = {0, 1, 2}").unwrap();
        assert_eq!(cfg.lambdas, [0.0, 1.0, 2.0]);
    }

    #[test]
    fn echo_reparses_to_same_config() {
        let text = "M = 4\nalpha = 0.25\nhidden = 32, 16\nschedule = cosine\nnesterov = off\nseed = 77\n";
        let cfg = TrainConfig::parse(text).unwrap();
        assert_eq!(TrainConfig::parse(&cfg.echo()).unwrap(), cfg);
        let files = TrainConfig::parse("dataset = a.csv\ntest_dataset = b.csv\nhidden = none").unwrap();
        assert_eq!(TrainConfig::parse(&files.echo()).unwrap(), files);
    }
}
