//! Flat `key = value` run configuration.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{DegreeMode, DEFAULT_EPSILON};
use crate::ingest::{SplitMode, SplitRatios};
use crate::losses::LossWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Matrix factorization: no propagation.
    Bprmf,
    Lightgcn,
    /// Random edge drop/add on the second view.
    DaGcl,
    /// Learned edge operator trained adversarially.
    LdaGcl,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Bprmf => "bprmf",
            ModelKind::Lightgcn => "lightgcn",
            ModelKind::DaGcl => "da_gcl",
            ModelKind::LdaGcl => "lda_gcl",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "bprmf" | "mf" => Ok(ModelKind::Bprmf),
            "lightgcn" => Ok(ModelKind::Lightgcn),
            "da_gcl" | "dagcl" => Ok(ModelKind::DaGcl),
            "lda_gcl" | "ldagcl" => Ok(ModelKind::LdaGcl),
            _ => Err(config_err("model", format!("unknown model `{s}`"))),
        }
    }
}

/// What the encoder's L2 term covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RegScope {
    /// Layer-0 rows of the batch's users, positives and negatives, averaged
    /// over the batch.
    #[default]
    Batch,
    /// Every embedding table entry.
    Full,
}

fn config_err(key: &str, message: impl Into<String>) -> Error {
    Error::Config {
        key: key.to_owned(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub embedding_dim: usize,
    /// Propagation depth. Ignored (treated as 0) for BPRMF.
    pub layers: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Edge-operator learning rate; `None` follows `lr`.
    pub lr_t: Option<f64>,
    pub lambda_ssl: f64,
    pub lambda_reg: f64,
    pub reg_scope: RegScope,
    pub lambda_t: f64,
    pub tau: f64,
    pub tau_g: f64,
    pub p_add: f64,
    pub p_drop: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub seed: u64,
    pub min_interactions: usize,
    pub split_ratios: SplitRatios,
    pub split_mode: SplitMode,
    pub degree_mode: DegreeMode,
    pub epsilon: f64,
    /// When off, LDA-GCL uses the original graph as its second view.
    pub edge_operator: bool,
    /// Hidden width of the edge operator; 0 means `embedding_dim`.
    pub operator_hidden: usize,
    /// Start `f` from the pre-trained embeddings instead of Xavier.
    pub warm_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::default();
        Self {
            model: ModelKind::LdaGcl,
            embedding_dim: 64,
            layers: 3,
            batch_size: 4096,
            lr: 1e-3,
            lr_t: None,
            lambda_ssl: w.lambda_ssl,
            lambda_reg: w.lambda_reg,
            reg_scope: RegScope::Batch,
            lambda_t: w.lambda_t,
            tau: w.tau,
            tau_g: 1.0,
            p_add: 0.0,
            p_drop: 0.0,
            patience: 10,
            max_epochs: 300,
            seed: 0,
            min_interactions: 0,
            split_ratios: SplitRatios::default(),
            split_mode: SplitMode::PerUser,
            degree_mode: DegreeMode::Weighted,
            epsilon: DEFAULT_EPSILON,
            edge_operator: true,
            operator_hidden: 0,
            warm_start: false,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| config_err(key, format!("cannot parse `{value}`: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value.to_ascii_lowercase().as_str() {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(config_err(key, format!("`{value}` is not a boolean"))),
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "model",
        "embedding_dim",
        "layers",
        "batch_size",
        "lr",
        "lr_t",
        "lambda_ssl",
        "lambda_reg",
        "reg_scope",
        "lambda_t",
        "tau",
        "tau_g",
        "p_add",
        "p_drop",
        "patience",
        "max_epochs",
        "seed",
        "min_interactions",
        "train_ratio",
        "valid_ratio",
        "test_ratio",
        "split_mode",
        "degree_mode",
        "epsilon",
        "edge_operator",
        "operator_hidden",
        "warm_start",
    ];

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "model" => self.model = value.parse()?,
            "embedding_dim" => self.embedding_dim = parse(key, value)?,
            "layers" => self.layers = parse(key, value)?,
            "batch_size" => self.batch_size = parse(key, value)?,
            "lr" => self.lr = parse(key, value)?,
            "lr_t" => {
                self.lr_t = match value {
                    "" | "auto" | "lr" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "lambda_ssl" => self.lambda_ssl = parse(key, value)?,
            "lambda_reg" => self.lambda_reg = parse(key, value)?,
            "reg_scope" => {
                self.reg_scope = match value {
                    "batch" => RegScope::Batch,
                    "full" => RegScope::Full,
                    _ => return Err(config_err(key, format!("unknown reg scope `{value}`"))),
                }
            }
            "lambda_t" => self.lambda_t = parse(key, value)?,
            "tau" => self.tau = parse(key, value)?,
            "tau_g" => self.tau_g = parse(key, value)?,
            "p_add" => self.p_add = parse(key, value)?,
            "p_drop" | "rho" => self.p_drop = parse(key, value)?,
            "patience" => self.patience = parse(key, value)?,
            "max_epochs" => self.max_epochs = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "min_interactions" => self.min_interactions = parse(key, value)?,
            "train_ratio" => self.split_ratios.train = parse(key, value)?,
            "valid_ratio" => self.split_ratios.valid = parse(key, value)?,
            "test_ratio" => self.split_ratios.test = parse(key, value)?,
            "split_mode" => {
                self.split_mode = match value {
                    "per_user" | "user" => SplitMode::PerUser,
                    "global" => SplitMode::Global,
                    _ => return Err(config_err(key, format!("unknown split mode `{value}`"))),
                }
            }
            "degree_mode" => {
                self.degree_mode = match value {
                    "weighted" => DegreeMode::Weighted,
                    "binary" => DegreeMode::Binary,
                    _ => return Err(config_err(key, format!("unknown degree mode `{value}`"))),
                }
            }
            "epsilon" => self.epsilon = parse(key, value)?,
            "edge_operator" => self.edge_operator = parse_bool(key, value)?,
            "operator_hidden" => self.operator_hidden = parse(key, value)?,
            "warm_start" => self.warm_start = parse_bool(key, value)?,
            other => return Err(config_err(other, "unknown key")),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| config_err(assignment, "expected key=value"))?;
        self.set(k, v)
    }

    /// Parses `key = value` lines on top of the defaults. `#` starts a comment.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: "config".into(),
                line: n + 1,
                message: format!("expected `key = value`, got `{line}`"),
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Every key with its resolved value, in [`Self::KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let r = self.split_ratios;
        let values = [
            self.model.to_string(),
            self.embedding_dim.to_string(),
            self.layers.to_string(),
            self.batch_size.to_string(),
            self.lr.to_string(),
            self.lr_t().to_string(),
            self.lambda_ssl.to_string(),
            self.lambda_reg.to_string(),
            match self.reg_scope {
                RegScope::Batch => "batch".into(),
                RegScope::Full => "full".into(),
            },
            self.lambda_t.to_string(),
            self.tau.to_string(),
            self.tau_g.to_string(),
            self.p_add.to_string(),
            self.p_drop.to_string(),
            self.patience.to_string(),
            self.max_epochs.to_string(),
            self.seed.to_string(),
            self.min_interactions.to_string(),
            r.train.to_string(),
            r.valid.to_string(),
            r.test.to_string(),
            match self.split_mode {
                SplitMode::PerUser => "per_user".into(),
                SplitMode::Global => "global".into(),
            },
            match self.degree_mode {
                DegreeMode::Weighted => "weighted".into(),
                DegreeMode::Binary => "binary".into(),
            },
            self.epsilon.to_string(),
            self.edge_operator.to_string(),
            self.hidden_width().to_string(),
            self.warm_start.to_string(),
        ];
        Self::KEYS.iter().copied().zip(values).collect()
    }

    /// The resolved config as `key = value` text; parses back to an equal config.
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn lr_t(&self) -> f64 {
        self.lr_t.unwrap_or(self.lr)
    }

    pub fn hidden_width(&self) -> usize {
        if self.operator_hidden == 0 {
            self.embedding_dim
        } else {
            self.operator_hidden
        }
    }

    /// Propagation depth actually used.
    pub fn depth(&self) -> usize {
        match self.model {
            ModelKind::Bprmf => 0,
            _ => self.layers,
        }
    }

    pub fn loss_weights(&self) -> LossWeights {
        LossWeights {
            lambda_ssl: self.lambda_ssl,
            lambda_reg: self.lambda_reg,
            lambda_t: self.lambda_t,
            tau: self.tau,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be positive, got {v}")))
            }
        };
        let non_negative = |key: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(key, format!("must be non-negative, got {v}")))
            }
        };
        if self.embedding_dim == 0 {
            return Err(config_err("embedding_dim", "must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(config_err("batch_size", "must be at least 1"));
        }
        if self.patience == 0 {
            return Err(config_err("patience", "must be at least 1"));
        }
        // A zero learning rate is allowed: it freezes the corresponding model.
        non_negative("lr", self.lr)?;
        non_negative("lr_t", self.lr_t())?;
        non_negative("lambda_ssl", self.lambda_ssl)?;
        non_negative("lambda_reg", self.lambda_reg)?;
        non_negative("lambda_t", self.lambda_t)?;
        non_negative("epsilon", self.epsilon)?;
        positive("tau", self.tau)?;
        positive("tau_g", self.tau_g)?;
        if !(0.0..=1.0).contains(&self.p_add) {
            return Err(config_err("p_add", "must be in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.p_drop) {
            return Err(config_err("p_drop", "must be in [0, 1)"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!((c.embedding_dim, c.layers, c.batch_size, c.patience), (64, 3, 4096, 10));
        assert_eq!((c.lambda_ssl, c.lambda_reg, c.tau, c.tau_g), (0.1, 1e-4, 0.2, 1.0));
        assert_eq!(c.lr_t(), c.lr);
        assert_eq!(c.hidden_width(), 64);
        c.validate().unwrap();
    }

    #[test]
    fn text_and_overrides() {
        let mut c = TrainConfig::from_text("# run\nmodel = lightgcn\nlayers=2  # depth\n\nlr = 0.01\n").unwrap();
        assert_eq!(c.model, ModelKind::Lightgcn);
        assert_eq!(c.layers, 2);
        c.apply_override("layers=4").unwrap();
        assert_eq!(c.layers, 4);
        assert!(c.apply_override("nonsense=1").is_err());
        assert!(c.apply_override("layers").is_err());
        assert!(TrainConfig::from_text("lr 0.1").is_err());
    }

    #[test]
    fn text_roundtrip() {
        let c = TrainConfig {
            model: ModelKind::DaGcl,
            lr_t: Some(0.5),
            p_add: 0.1,
            split_mode: SplitMode::Global,
            degree_mode: DegreeMode::Binary,
            reg_scope: RegScope::Full,
            ..TrainConfig::default()
        };
        let mut back = TrainConfig::from_text(&c.to_text()).unwrap();
        // hidden width is written resolved
        back.operator_hidden = c.operator_hidden;
        assert_eq!(back, c);
    }

    #[test]
    fn validation() {
        for c in [
            TrainConfig { patience: 0, ..TrainConfig::default() },
            TrainConfig { p_drop: 1.0, ..TrainConfig::default() },
            TrainConfig { tau: 0.0, ..TrainConfig::default() },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
