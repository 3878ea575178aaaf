//! Line-based configuration: `key = value` entries grouped under
//! `[section]` headers, plus the typed structs the pipeline consumes.
//!
//! The format is deliberately tiny: `#` starts a comment, blank lines are
//! ignored, keys are unique within a section. Parsing a serialized config
//! reproduces it exactly (lossless round-trip), which lets resolved configs
//! double as reproducibility records inside artifact directories and model
//! bundles.

use crate::error::{Error, Result};
use std::collections::BTreeSet;
use std::fmt::Write as _;

/// Ordered section → ordered `(key, value)` pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConfigMap {
    sections: Vec<(String, Vec<(String, String)>)>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends `key = value` under `section`, creating the section on first
    /// use. Duplicate keys within a section are rejected.
    pub fn push(&mut self, section: &str, key: &str, value: impl Into<String>) -> Result<()> {
        let entries = match self.sections.iter_mut().find(|(s, _)| s == section) {
            Some((_, entries)) => entries,
            None => {
                self.sections.push((section.to_string(), Vec::new()));
                &mut self.sections.last_mut().unwrap().1
            }
        };
        if entries.iter().any(|(k, _)| k == key) {
            return Err(Error::Config(format!("duplicate key `{key}` in section [{section}]")));
        }
        entries.push((key.to_string(), value.into()));
        Ok(())
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .and_then(|(_, entries)| entries.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.iter().any(|(s, _)| s == section)
    }

    pub fn section_keys(&self, section: &str) -> Vec<&str> {
        self.sections
            .iter()
            .find(|(s, _)| s == section)
            .map(|(_, entries)| entries.iter().map(|(k, _)| k.as_str()).collect())
            .unwrap_or_default()
    }

    /// Parses the line-based text form.
    pub fn parse(text: &str) -> Result<ConfigMap> {
        let mut map = ConfigMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or_else(|| {
                    Error::Config(format!("line {}: unterminated section header `{raw}`", lineno + 1))
                })?;
                section = name.trim().to_string();
                if section.is_empty() {
                    return Err(Error::Config(format!("line {}: empty section name", lineno + 1)));
                }
                if !map.has_section(&section) {
                    map.sections.push((section.clone(), Vec::new()));
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{raw}`", lineno + 1))
            })?;
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: `{}` appears before any [section] header",
                    lineno + 1,
                    key.trim()
                )));
            }
            map.push(&section, key.trim(), value.trim().to_string())?;
        }
        Ok(map)
    }

    /// Serializes back to the text form parsed by [`ConfigMap::parse`].
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (i, (section, entries)) in self.sections.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "[{section}]");
            for (k, v) in entries {
                let _ = writeln!(out, "{k} = {v}");
            }
        }
        out
    }
}

fn parse_value<T: std::str::FromStr>(section: &str, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| {
        Error::Config(format!(
            "[{section}] {key}: cannot parse `{value}` as {}",
            std::any::type_name::<T>()
        ))
    })
}

/// Shared hyperparameters for autoencoder pretraining and all three
/// adversarial trainers.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Master seed; every random stream in the pipeline derives from it.
    pub seed: u64,
    /// Width of the latent code z.
    pub latent_dim: usize,
    /// Channel widths of the two convolutional stages (first, second).
    pub conv_channels: (usize, usize),
    /// Hidden width of the dense stacks used for 1×1 vector "images".
    pub dense_hidden: usize,
    /// Autoencoder pretraining epochs (early-stopped on plateau).
    pub ae_epochs: usize,
    /// Autoencoder batch size.
    pub ae_batch_size: usize,
    /// Adversarial training epochs.
    pub gan_epochs: usize,
    /// Discriminator batch size during adversarial training.
    pub batch_size: usize,
    /// Adam step size, shared by every optimizer in the pipeline.
    pub learning_rate: f64,
    /// Adam first-moment decay.
    pub beta1: f64,
    /// Adam second-moment decay.
    pub beta2: f64,
    /// Adam denominator offset.
    pub eps: f64,
    /// Initial Cholesky jitter for per-class covariance factorization.
    pub jitter: f64,
    /// Fit diagonal covariances only (skip cross-correlations).
    pub diagonal_covariance: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            seed: 0,
            latent_dim: 64,
            conv_channels: (8, 16),
            dense_hidden: 64,
            ae_epochs: 30,
            ae_batch_size: 128,
            gan_epochs: 30,
            batch_size: 110,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-8,
            jitter: 1e-5,
            diagonal_covariance: false,
        }
    }
}

impl TrainConfig {
    pub const SECTION: &'static str = "train";

    /// Writes every field under `[train]` in a fixed order.
    pub fn to_map(&self, map: &mut ConfigMap) -> Result<()> {
        let s = Self::SECTION;
        map.push(s, "seed", self.seed.to_string())?;
        map.push(s, "latent_dim", self.latent_dim.to_string())?;
        map.push(s, "conv_channels", format!("{},{}", self.conv_channels.0, self.conv_channels.1))?;
        map.push(s, "dense_hidden", self.dense_hidden.to_string())?;
        map.push(s, "ae_epochs", self.ae_epochs.to_string())?;
        map.push(s, "ae_batch_size", self.ae_batch_size.to_string())?;
        map.push(s, "gan_epochs", self.gan_epochs.to_string())?;
        map.push(s, "batch_size", self.batch_size.to_string())?;
        map.push(s, "learning_rate", format!("{:?}", self.learning_rate))?;
        map.push(s, "beta1", format!("{:?}", self.beta1))?;
        map.push(s, "beta2", format!("{:?}", self.beta2))?;
        map.push(s, "eps", format!("{:?}", self.eps))?;
        map.push(s, "jitter", format!("{:?}", self.jitter))?;
        map.push(s, "diagonal_covariance", self.diagonal_covariance.to_string())?;
        Ok(())
    }

    /// Reads `[train]`, starting from defaults; unknown keys are errors.
    pub fn from_map(map: &ConfigMap) -> Result<TrainConfig> {
        let s = Self::SECTION;
        let known: BTreeSet<&str> = [
            "seed",
            "latent_dim",
            "conv_channels",
            "dense_hidden",
            "ae_epochs",
            "ae_batch_size",
            "gan_epochs",
            "batch_size",
            "learning_rate",
            "beta1",
            "beta2",
            "eps",
            "jitter",
            "diagonal_covariance",
        ]
        .into();
        for key in map.section_keys(s) {
            if !known.contains(key) {
                return Err(Error::Config(format!("[{s}] unknown key `{key}`")));
            }
        }
        let mut cfg = TrainConfig::default();
        if let Some(v) = map.get(s, "seed") {
            cfg.seed = parse_value(s, "seed", v)?;
        }
        if let Some(v) = map.get(s, "latent_dim") {
            cfg.latent_dim = parse_value(s, "latent_dim", v)?;
        }
        if let Some(v) = map.get(s, "conv_channels") {
            let (a, b) = v.split_once(',').ok_or_else(|| {
                Error::Config(format!("[{s}] conv_channels: expected `first,second`, got `{v}`"))
            })?;
            cfg.conv_channels =
                (parse_value(s, "conv_channels", a.trim())?, parse_value(s, "conv_channels", b.trim())?);
        }
        if let Some(v) = map.get(s, "dense_hidden") {
            cfg.dense_hidden = parse_value(s, "dense_hidden", v)?;
        }
        if let Some(v) = map.get(s, "ae_epochs") {
            cfg.ae_epochs = parse_value(s, "ae_epochs", v)?;
        }
        if let Some(v) = map.get(s, "ae_batch_size") {
            cfg.ae_batch_size = parse_value(s, "ae_batch_size", v)?;
        }
        if let Some(v) = map.get(s, "gan_epochs") {
            cfg.gan_epochs = parse_value(s, "gan_epochs", v)?;
        }
        if let Some(v) = map.get(s, "batch_size") {
            cfg.batch_size = parse_value(s, "batch_size", v)?;
        }
        if let Some(v) = map.get(s, "learning_rate") {
            cfg.learning_rate = parse_value(s, "learning_rate", v)?;
        }
        if let Some(v) = map.get(s, "beta1") {
            cfg.beta1 = parse_value(s, "beta1", v)?;
        }
        if let Some(v) = map.get(s, "beta2") {
            cfg.beta2 = parse_value(s, "beta2", v)?;
        }
        if let Some(v) = map.get(s, "eps") {
            cfg.eps = parse_value(s, "eps", v)?;
        }
        if let Some(v) = map.get(s, "jitter") {
            cfg.jitter = parse_value(s, "jitter", v)?;
        }
        if let Some(v) = map.get(s, "diagonal_covariance") {
            cfg.diagonal_covariance = parse_value(s, "diagonal_covariance", v)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Standalone `[train]` text block (used inside model bundles).
    pub fn to_config_text(&self) -> String {
        let mut map = ConfigMap::new();
        self.to_map(&mut map).expect("fresh map cannot hold duplicates");
        map.serialize()
    }

    /// Parses a standalone `[train]` text block.
    pub fn from_config_text(text: &str) -> Result<TrainConfig> {
        Self::from_map(&ConfigMap::parse(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 {
            return Err(Error::Config("latent_dim must be positive".into()));
        }
        if self.batch_size == 0 || self.ae_batch_size == 0 {
            return Err(Error::Config("batch sizes must be positive".into()));
        }
        if self.conv_channels.0 == 0 || self.conv_channels.1 == 0 || self.dense_hidden == 0 {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        for (name, v) in [
            ("learning_rate", self.learning_rate),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("eps", self.eps),
            ("jitter", self.jitter),
        ] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!("{name} must be finite and non-negative")));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config("beta1/beta2 must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Applies the `BAGAN_SEED` environment override, if set. Returns the
    /// override value when one was applied.
    pub fn apply_env_seed(&mut self) -> Result<Option<u64>> {
        match std::env::var("BAGAN_SEED") {
            Ok(text) => {
                let seed: u64 = text.trim().parse().map_err(|_| {
                    Error::Config(format!("BAGAN_SEED: cannot parse `{text}` as u64"))
                })?;
                self.seed = seed;
                Ok(Some(seed))
            }
            Err(_) => Ok(None),
        }
    }
}

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    /// IDX image/label file pair (optionally .gz).
    Idx { images: String, labels: String },
    /// Synthetic ring-of-Gaussians mixture.
    Synth { modes: usize, per_mode: usize, spread: f64 },
}

/// Optional class-rarefaction step applied to the training split.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImbalanceConfig {
    pub class: usize,
    pub drop_percentage: f64,
}

/// Evaluation-protocol sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Number of generated pairs for the image-diversity score.
    pub couples_pairs: usize,
    /// Generated images per class for label-faithfulness scoring.
    pub generated_per_class: usize,
    /// Probes per class for the nearest-neighbor similarity score.
    pub nn_probes: usize,
    /// Classifier epochs for the label-faithfulness oracle and the
    /// augmented-training protocol.
    pub classifier_epochs: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { couples_pairs: 100, generated_per_class: 100, nn_probes: 8, classifier_epochs: 2 }
    }
}

impl EvalConfig {
    pub const SECTION: &'static str = "eval";

    pub fn to_map(&self, map: &mut ConfigMap) -> Result<()> {
        let s = Self::SECTION;
        map.push(s, "couples_pairs", self.couples_pairs.to_string())?;
        map.push(s, "generated_per_class", self.generated_per_class.to_string())?;
        map.push(s, "nn_probes", self.nn_probes.to_string())?;
        map.push(s, "classifier_epochs", self.classifier_epochs.to_string())?;
        Ok(())
    }

    pub fn from_map(map: &ConfigMap) -> Result<EvalConfig> {
        let s = Self::SECTION;
        let known: BTreeSet<&str> =
            ["couples_pairs", "generated_per_class", "nn_probes", "classifier_epochs"].into();
        for key in map.section_keys(s) {
            if !known.contains(key) {
                return Err(Error::Config(format!("[{s}] unknown key `{key}`")));
            }
        }
        let mut cfg = EvalConfig::default();
        if let Some(v) = map.get(s, "couples_pairs") {
            cfg.couples_pairs = parse_value(s, "couples_pairs", v)?;
        }
        if let Some(v) = map.get(s, "generated_per_class") {
            cfg.generated_per_class = parse_value(s, "generated_per_class", v)?;
        }
        if let Some(v) = map.get(s, "nn_probes") {
            cfg.nn_probes = parse_value(s, "nn_probes", v)?;
        }
        if let Some(v) = map.get(s, "classifier_epochs") {
            cfg.classifier_epochs = parse_value(s, "classifier_epochs", v)?;
        }
        Ok(cfg)
    }
}

/// Full pipeline configuration: data source, optional imbalance, training
/// hyperparameters, and evaluation sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source: DataSource,
    pub imbalance: Option<ImbalanceConfig>,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn to_map(&self) -> Result<ConfigMap> {
        let mut map = ConfigMap::new();
        match &self.source {
            DataSource::Idx { images, labels } => {
                map.push("dataset", "kind", "idx")?;
                map.push("dataset", "images", images.clone())?;
                map.push("dataset", "labels", labels.clone())?;
            }
            DataSource::Synth { modes, per_mode, spread } => {
                map.push("dataset", "kind", "synth")?;
                map.push("dataset", "modes", modes.to_string())?;
                map.push("dataset", "per_mode", per_mode.to_string())?;
                map.push("dataset", "spread", format!("{spread:?}"))?;
            }
        }
        if let Some(imb) = &self.imbalance {
            map.push("imbalance", "class", imb.class.to_string())?;
            map.push("imbalance", "drop", format!("{:?}", imb.drop_percentage))?;
        }
        self.train.to_map(&mut map)?;
        self.eval.to_map(&mut map)?;
        Ok(map)
    }

    pub fn from_map(map: &ConfigMap) -> Result<PipelineConfig> {
        if !map.has_section("dataset") {
            return Err(Error::Config("missing [dataset] section".into()));
        }
        let kind = map
            .get("dataset", "kind")
            .ok_or_else(|| Error::Config("[dataset] missing `kind`".into()))?;
        let source = match kind {
            "idx" => DataSource::Idx {
                images: map
                    .get("dataset", "images")
                    .ok_or_else(|| Error::Config("[dataset] kind=idx needs `images`".into()))?
                    .to_string(),
                labels: map
                    .get("dataset", "labels")
                    .ok_or_else(|| Error::Config("[dataset] kind=idx needs `labels`".into()))?
                    .to_string(),
            },
            "synth" => DataSource::Synth {
                modes: parse_value(
                    "dataset",
                    "modes",
                    map.get("dataset", "modes")
                        .ok_or_else(|| Error::Config("[dataset] kind=synth needs `modes`".into()))?,
                )?,
                per_mode: parse_value(
                    "dataset",
                    "per_mode",
                    map.get("dataset", "per_mode")
                        .ok_or_else(|| Error::Config("[dataset] kind=synth needs `per_mode`".into()))?,
                )?,
                spread: parse_value(
                    "dataset",
                    "spread",
                    map.get("dataset", "spread")
                        .ok_or_else(|| Error::Config("[dataset] kind=synth needs `spread`".into()))?,
                )?,
            },
            other => {
                return Err(Error::Config(format!(
                    "[dataset] kind must be `idx` or `synth`, got `{other}`"
                )))
            }
        };
        let imbalance = if map.has_section("imbalance") {
            Some(ImbalanceConfig {
                class: parse_value(
                    "imbalance",
                    "class",
                    map.get("imbalance", "class")
                        .ok_or_else(|| Error::Config("[imbalance] missing `class`".into()))?,
                )?,
                drop_percentage: parse_value(
                    "imbalance",
                    "drop",
                    map.get("imbalance", "drop")
                        .ok_or_else(|| Error::Config("[imbalance] missing `drop`".into()))?,
                )?,
            })
        } else {
            None
        };
        Ok(PipelineConfig {
            source,
            imbalance,
            train: TrainConfig::from_map(map)?,
            eval: EvalConfig::from_map(map)?,
        })
    }

    pub fn parse(text: &str) -> Result<PipelineConfig> {
        Self::from_map(&ConfigMap::parse(text)?)
    }

    pub fn serialize(&self) -> Result<String> {
        Ok(self.to_map()?.serialize())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_reads_sections_keys_and_comments() {
        let text = "# pipeline\n[dataset]\nkind = synth\nmodes = 8\nper_mode = 100\nspread = 0.05\n\n[train]\nseed = 7\n";
        let map = ConfigMap::parse(text).unwrap();
        assert_eq!(map.get("dataset", "kind"), Some("synth"));
        assert_eq!(map.get("train", "seed"), Some("7"));
        assert_eq!(map.get("train", "missing"), None);
    }

    #[test]
    fn serialize_then_parse_is_lossless() {
        let mut map = ConfigMap::new();
        map.push("a", "x", "1").unwrap();
        map.push("a", "y", "two words").unwrap();
        map.push("b", "z", "3.5").unwrap();
        let text = map.serialize();
        assert_eq!(ConfigMap::parse(&text).unwrap(), map);
    }

    #[test]
    fn train_config_round_trips_through_text() {
        let cfg = TrainConfig {
            seed: 123,
            latent_dim: 32,
            conv_channels: (4, 8),
            learning_rate: 1e-3,
            diagonal_covariance: true,
            ..TrainConfig::default()
        };
        let text = cfg.to_config_text();
        assert_eq!(TrainConfig::from_config_text(&text).unwrap(), cfg);
    }

    #[test]
    fn defaults_fill_missing_train_keys() {
        let cfg = TrainConfig::from_config_text("[train]\nseed = 9\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.latent_dim, TrainConfig::default().latent_dim);
    }

    #[test]
    fn unknown_keys_and_malformed_lines_are_config_errors() {
        assert!(matches!(
            TrainConfig::from_config_text("[train]\nlurning_rate = 0.1\n"),
            Err(Error::Config(_))
        ));
        assert!(matches!(ConfigMap::parse("[a]\nno equals sign\n"), Err(Error::Config(_))));
        assert!(matches!(ConfigMap::parse("key = before any section\n"), Err(Error::Config(_))));
        assert!(matches!(ConfigMap::parse("[unclosed\n"), Err(Error::Config(_))));
        assert!(matches!(
            TrainConfig::from_config_text("[train]\nbeta1 = 1.5\n"),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn pipeline_config_round_trips() {
        let cfg = PipelineConfig {
            source: DataSource::Idx { images: "imgs.gz".into(), labels: "lbls.gz".into() },
            imbalance: Some(ImbalanceConfig { class: 0, drop_percentage: 97.5 }),
            train: TrainConfig { seed: 3, ..TrainConfig::default() },
            eval: EvalConfig::default(),
        };
        let text = cfg.serialize().unwrap();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), cfg);

        let synth = PipelineConfig {
            source: DataSource::Synth { modes: 8, per_mode: 1000, spread: 0.05 },
            imbalance: None,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
        };
        let text = synth.serialize().unwrap();
        assert_eq!(PipelineConfig::parse(&text).unwrap(), synth);
    }

    #[test]
    fn env_seed_override_applies_and_validates() {
        // Env vars are process-global: set, apply, and restore in one test.
        let mut cfg = TrainConfig::default();
        std::env::set_var("BAGAN_SEED", "4242");
        let applied = cfg.apply_env_seed().unwrap();
        assert_eq!(applied, Some(4242));
        assert_eq!(cfg.seed, 4242);
        std::env::set_var("BAGAN_SEED", "not-a-number");
        assert!(cfg.apply_env_seed().is_err());
        std::env::remove_var("BAGAN_SEED");
        assert_eq!(cfg.apply_env_seed().unwrap(), None);
    }
}
