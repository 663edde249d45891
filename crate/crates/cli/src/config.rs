//! Flat `key = value` experiment configuration.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Every key is optional and defaults to the baseline source-localization
//! protocol; unknown or repeated keys are errors. See `configs/` for the
//! shipped files and README.md for the key reference.

use std::fmt;
use std::path::Path;

use mimo_gcnn::{GsoKind, Structure};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// How each signal is rescaled before it reaches the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputNormalization {
    None,
    /// Divide by the largest absolute entry.
    MaxAbs,
}

impl InputNormalization {
    pub fn tag(self) -> &'static str {
        match self {
            InputNormalization::None => "none",
            InputNormalization::MaxAbs => "max-abs",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(InputNormalization::None),
            "max-abs" => Some(InputNormalization::MaxAbs),
            _ => None,
        }
    }
}

/// Parameters a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParam {
    TestNoise,
    KeepProb,
    NTrain,
}

impl SweepParam {
    pub fn key(self) -> &'static str {
        match self {
            SweepParam::TestNoise => "test_noise",
            SweepParam::KeepProb => "keep_prob",
            SweepParam::NTrain => "n_train",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "test_noise" => Some(SweepParam::TestNoise),
            "keep_prob" => Some(SweepParam::KeepProb),
            "n_train" => Some(SweepParam::NTrain),
            _ => None,
        }
    }

    /// Test-noise sweeps only change the evaluation data, so one trained
    /// network serves every value.
    pub fn affects_training(self) -> bool {
        !matches!(self, SweepParam::TestNoise)
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub master_seed: u64,
    pub realizations: usize,
    pub nodes: usize,
    pub communities: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub max_graph_attempts: usize,
    pub architectures: Vec<Structure>,
    /// Output width of each graph-convolution layer.
    pub features: Vec<usize>,
    pub taps: usize,
    pub gso: GsoKind,
    pub diffusion: GsoKind,
    pub input_normalization: InputNormalization,
    pub t_max: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub test_noise: f64,
    pub keep_prob: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub sweep: Option<Sweep>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            master_seed: 2018,
            realizations: 10,
            nodes: 16,
            communities: 4,
            p_intra: 0.8,
            p_inter: 0.2,
            max_graph_attempts: 100,
            architectures: Structure::ALL.to_vec(),
            features: vec![32, 64],
            taps: 5,
            gso: GsoKind::ScaledAdjacency,
            diffusion: GsoKind::Adjacency,
            input_normalization: InputNormalization::MaxAbs,
            t_max: 15,
            n_train: 10_000,
            n_test: 200,
            test_noise: 0.1,
            keep_prob: 0.75,
            epochs: 20,
            batch_size: 100,
            learning_rate: 0.005,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sweep: None,
        }
    }
}

fn line_err(line: usize, msg: impl Into<String>) -> ConfigError {
    ConfigError::Line {
        line,
        msg: msg.into(),
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T, ConfigError> {
    v.parse()
        .map_err(|_| line_err(line, format!("`{key}`: cannot parse `{v}`")))
}

fn parse_gso(line: usize, key: &str, v: &str) -> Result<GsoKind, ConfigError> {
    match GsoKind::from_tag(v) {
        Some(GsoKind::Custom) | None => Err(line_err(
            line,
            format!("`{key}`: expected adjacency, scaled-adjacency, normalized-laplacian or cycle-shift, got `{v}`"),
        )),
        Some(k) => Ok(k),
    }
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut seen: Vec<String> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| line_err(line, format!("expected `key = value`, got `{content}`")))?;
            let (key, v) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(line_err(line, format!("`{key}` set twice")));
            }
            seen.push(key.to_string());
            match key {
                "master_seed" => cfg.master_seed = parse_num(line, key, v)?,
                "realizations" => cfg.realizations = parse_num(line, key, v)?,
                "nodes" => cfg.nodes = parse_num(line, key, v)?,
                "communities" => cfg.communities = parse_num(line, key, v)?,
                "p_intra" => cfg.p_intra = parse_num(line, key, v)?,
                "p_inter" => cfg.p_inter = parse_num(line, key, v)?,
                "max_graph_attempts" => cfg.max_graph_attempts = parse_num(line, key, v)?,
                "architectures" => {
                    cfg.architectures = split_list(v)
                        .map(|s| {
                            Structure::parse(s)
                                .ok_or_else(|| line_err(line, format!("unknown architecture `{s}`")))
                        })
                        .collect::<Result<_, _>>()?;
                }
                "features" => {
                    cfg.features = split_list(v)
                        .map(|s| parse_num(line, key, s))
                        .collect::<Result<_, _>>()?;
                }
                "taps" => cfg.taps = parse_num(line, key, v)?,
                "gso" => cfg.gso = parse_gso(line, key, v)?,
                "diffusion" => cfg.diffusion = parse_gso(line, key, v)?,
                "input_normalization" => {
                    cfg.input_normalization = InputNormalization::parse(v).ok_or_else(|| {
                        line_err(line, format!("`{key}`: expected none or max-abs, got `{v}`"))
                    })?;
                }
                "t_max" => cfg.t_max = parse_num(line, key, v)?,
                "n_train" => cfg.n_train = parse_num(line, key, v)?,
                "n_test" => cfg.n_test = parse_num(line, key, v)?,
                "test_noise" => cfg.test_noise = parse_num(line, key, v)?,
                "keep_prob" => cfg.keep_prob = parse_num(line, key, v)?,
                "epochs" => cfg.epochs = parse_num(line, key, v)?,
                "batch_size" => cfg.batch_size = parse_num(line, key, v)?,
                "learning_rate" => cfg.learning_rate = parse_num(line, key, v)?,
                "beta1" => cfg.beta1 = parse_num(line, key, v)?,
                "beta2" => cfg.beta2 = parse_num(line, key, v)?,
                "epsilon" => cfg.epsilon = parse_num(line, key, v)?,
                "sweep" => {
                    let (param, values) = v.split_once(':').ok_or_else(|| {
                        line_err(line, "`sweep`: expected `parameter: v1, v2, ...`")
                    })?;
                    let param = param.trim();
                    let param = SweepParam::parse(param).ok_or_else(|| {
                        line_err(line, format!("cannot sweep `{param}`; use test_noise, keep_prob or n_train"))
                    })?;
                    let values = split_list(values)
                        .map(|s| parse_num(line, key, s))
                        .collect::<Result<_, _>>()?;
                    cfg.sweep = Some(Sweep { param, values });
                }
                other => return Err(line_err(line, format!("unknown key `{other}`"))),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError::Invalid(msg));
        if self.realizations == 0 {
            return bad("realizations must be at least 1".into());
        }
        if self.architectures.is_empty() {
            return bad("at least one architecture is required".into());
        }
        for (i, a) in self.architectures.iter().enumerate() {
            if self.architectures[..i].contains(a) {
                return bad(format!("architecture {} listed twice", a.tag()));
            }
        }
        if self.features.is_empty() || self.features.contains(&0) {
            return bad("features must list positive layer widths".into());
        }
        if self.taps == 0 {
            return bad("taps must be positive".into());
        }
        if self.nodes < 2 {
            return bad("need at least 2 nodes".into());
        }
        if self.t_max >= self.nodes {
            return bad(format!("t_max {} must be below nodes {}", self.t_max, self.nodes));
        }
        if !matches!(self.diffusion, GsoKind::Adjacency | GsoKind::ScaledAdjacency) {
            return bad(format!("diffusion must be an adjacency, got {}", self.diffusion.tag()));
        }
        if self.n_train == 0 || self.n_test == 0 {
            return bad("n_train and n_test must be positive".into());
        }
        check_noise(self.test_noise)?;
        check_keep(self.keep_prob)?;
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return bad(format!("sweep over {} has no values", sweep.param));
            }
            for (i, &v) in sweep.values.iter().enumerate() {
                if sweep.values[..i].contains(&v) {
                    return bad(format!("sweep value {v} listed twice"));
                }
                match sweep.param {
                    SweepParam::TestNoise => check_noise(v)?,
                    SweepParam::KeepProb => check_keep(v)?,
                    SweepParam::NTrain => {
                        if !(v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64) {
                            return bad(format!("n_train sweep value {v} is not a positive integer"));
                        }
                    }
                }
            }
        }
        self.graph_spec(0).validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.network_spec(self.architectures[0], self.keep_prob)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.train_config(0)
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(())
    }

    pub fn graph_spec(&self, seed: u64) -> mimo_gcnn::SbmSpec {
        let mut spec = mimo_gcnn::SbmSpec::new(self.nodes, self.communities, self.p_intra, self.p_inter, seed);
        spec.max_attempts = self.max_graph_attempts;
        spec
    }

    pub fn network_spec(&self, structure: Structure, keep_prob: f64) -> mimo_gcnn::nn::NetworkSpec {
        mimo_gcnn::nn::NetworkSpec::uniform(
            structure,
            self.nodes,
            1,
            &self.features,
            self.taps,
            self.nodes,
            keep_prob,
        )
    }

    pub fn train_config(&self, seed: u64) -> mimo_gcnn::optim::TrainConfig {
        mimo_gcnn::optim::TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            seed,
        }
    }

    /// Values of the swept parameter, or `[None]` without a sweep.
    pub fn sweep_points(&self) -> Vec<Option<f64>> {
        match &self.sweep {
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        }
    }
}

fn check_noise(v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("noise variance {v} must be finite and >= 0")))
    }
}

fn check_keep(v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!("keep probability {v} must lie in (0, 1]")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_is_baseline_default() {
        let c = ExperimentConfig::parse("# nothing\n\n").unwrap();
        assert_eq!(c, ExperimentConfig::default());
    }

    #[test]
    fn keys_and_lists() {
        let c = ExperimentConfig::parse(
            "realizations = 3\narchitectures = pk, full # trailing\nfeatures = 4,8\nsweep = test_noise: 0, 0.01\n",
        )
        .unwrap();
        assert_eq!(c.realizations, 3);
        assert_eq!(c.architectures, vec![Structure::AggregateInputs, Structure::Full]);
        assert_eq!(c.features, vec![4, 8]);
        let s = c.sweep.unwrap();
        assert_eq!(s.param, SweepParam::TestNoise);
        assert_eq!(s.values, vec![0.0, 0.01]);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = ExperimentConfig::parse("epochs = 3\nepoch = 4\n").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(err.to_string().contains("epoch"), "{err}");
    }

    #[test]
    fn rejections() {
        for text in [
            "epochs = 3\nepochs = 4",
            "architectures =",
            "sweep = test_noise:",
            "sweep = taps: 1, 2",
            "sweep = n_train: 10.5",
            "keep_prob = 0",
            "t_max = 16",
            "diffusion = normalized-laplacian",
            "gso = custom",
            "nodes",
            "realizations = -1",
        ] {
            assert!(ExperimentConfig::parse(text).is_err(), "{text}");
        }
    }
}
