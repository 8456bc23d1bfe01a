//! Experiment configuration: a flat `key = value` text format, one setting
//! per line, `#` starts a comment. Command-line flags are applied on top of
//! the file as further `key = value` pairs.
//!
//! Keys: `dataset`, `scenario`, `response`, `n`, `alpha`, `K`, `tau_min`,
//! `tau_max`, `methods`, `model`, `boundary`, `reps`, `seed`, `out`,
//! `fallback_shortest`, `bins`, `forest.n_trees`, `forest.max_depth`,
//! `forest.min_leaf`, `forest.max_features`, `forest.bootstrap`,
//! `nn.hidden`, `nn.learning_rate`, `nn.epochs`, `nn.batch_size`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use cti::interval::BoundaryPolicy;
use cti::oracle::Scenario;
use cti::quantile::{ForestConfig, PinballConfig, QuantileLevels};

/// A configuration field that is malformed or out of range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub field: String,
    pub message: String,
}

impl Problem {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    CtiForest,
    CtiPinball,
    CtiHarmonic,
    Split,
    Cqr,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::CtiForest,
        Method::CtiPinball,
        Method::CtiHarmonic,
        Method::Split,
        Method::Cqr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CtiForest => "cti-forest",
            Method::CtiPinball => "cti-pinball",
            Method::CtiHarmonic => "cti-harmonic",
            Method::Split => "split",
            Method::Cqr => "cqr",
        }
    }

    pub fn is_cti(self) -> bool {
        matches!(
            self,
            Method::CtiForest | Method::CtiPinball | Method::CtiHarmonic
        )
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                format!("unknown method {s:?}, expected one of {}", names.join(", "))
            })
    }
}

/// Model behind the split and CQR baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineModel {
    Forest,
    Pinball,
}

impl fmt::Display for BaselineModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BaselineModel::Forest => "forest",
            BaselineModel::Pinball => "pinball",
        })
    }
}

impl FromStr for BaselineModel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "forest" => Ok(BaselineModel::Forest),
            "pinball" => Ok(BaselineModel::Pinball),
            _ => Err(format!("unknown model {s:?}, expected forest or pinball")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    File(PathBuf),
    Scenario(Scenario),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub source: Option<Source>,
    pub response: String,
    /// Sample size drawn from a scenario.
    pub n: usize,
    pub alpha: f64,
    pub k: usize,
    pub tau_min: f64,
    pub tau_max: f64,
    pub methods: Vec<Method>,
    pub model: BaselineModel,
    pub forest: ForestConfig,
    pub nn: PinballConfig,
    pub boundary: BoundaryPolicy,
    pub reps: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub fallback_shortest: bool,
    pub bins: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: None,
            response: "y".into(),
            n: 5000,
            alpha: 0.1,
            k: 40,
            tau_min: 0.001,
            tau_max: 0.999,
            methods: Method::ALL.to_vec(),
            model: BaselineModel::Forest,
            forest: ForestConfig::default(),
            nn: PinballConfig::default(),
            boundary: BoundaryPolicy::Clamp,
            reps: 10,
            seed: 0,
            out: PathBuf::from("results"),
            fallback_shortest: false,
            bins: cti::evaluation::DEFAULT_HISTOGRAM_BINS,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, Problem>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| Problem::new(key, format!("cannot parse {value:?}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, Problem> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Problem::new(
            key,
            format!("expected true or false, got {value:?}"),
        )),
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>, Problem>
where
    T::Err: fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse(key, s))
        .collect()
}

/// `none` or a number.
fn parse_optional(key: &str, value: &str) -> Result<Option<usize>, Problem> {
    if value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

/// Splits config text into `(key, value)` pairs.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, Vec<Problem>> {
    let mut pairs = Vec::new();
    let mut problems = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) if !k.trim().is_empty() => {
                pairs.push((k.trim().to_owned(), v.trim().to_owned()));
            }
            _ => problems.push(Problem::new(
                format!("line {}", i + 1),
                format!("expected `key = value`, got {line:?}"),
            )),
        }
    }
    if problems.is_empty() {
        Ok(pairs)
    } else {
        Err(problems)
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self, Vec<Problem>> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| vec![Problem::new("config", format!("{}: {e}", path.display()))])?;
        let mut cfg = Self::default();
        cfg.apply(&parse_pairs(&text)?)?;
        Ok(cfg)
    }

    /// Applies every pair, collecting all problems rather than stopping at
    /// the first.
    pub fn apply(&mut self, pairs: &[(String, String)]) -> Result<(), Vec<Problem>> {
        let problems: Vec<Problem> = pairs
            .iter()
            .filter_map(|(k, v)| self.set(k, v).err())
            .collect();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(problems)
        }
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), Problem> {
        match key {
            "dataset" => self.source = Some(Source::File(PathBuf::from(value))),
            "scenario" => self.source = Some(Source::Scenario(parse(key, value)?)),
            "response" => self.response = value.to_owned(),
            "n" => self.n = parse(key, value)?,
            "alpha" => self.alpha = parse(key, value)?,
            "K" => self.k = parse(key, value)?,
            "tau_min" => self.tau_min = parse(key, value)?,
            "tau_max" => self.tau_max = parse(key, value)?,
            "methods" => self.methods = parse_list(key, value)?,
            "model" => self.model = parse(key, value)?,
            "boundary" => self.boundary = parse(key, value)?,
            "reps" => self.reps = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "fallback_shortest" => self.fallback_shortest = parse_bool(key, value)?,
            "bins" => self.bins = parse(key, value)?,
            "forest.n_trees" => self.forest.n_trees = parse(key, value)?,
            "forest.max_depth" => self.forest.max_depth = parse_optional(key, value)?,
            "forest.min_leaf" => self.forest.min_leaf = parse(key, value)?,
            "forest.max_features" => self.forest.max_features = parse(key, value)?,
            "forest.bootstrap" => self.forest.bootstrap = parse_bool(key, value)?,
            "nn.hidden" => self.nn.hidden = parse_list(key, value)?,
            "nn.learning_rate" => self.nn.learning_rate = parse(key, value)?,
            "nn.epochs" => self.nn.epochs = parse(key, value)?,
            "nn.batch_size" => self.nn.batch_size = parse_optional(key, value)?,
            _ => return Err(Problem::new(key, "unknown setting")),
        }
        Ok(())
    }

    /// Settings as `(key, value)` pairs in a fixed order; parsing them back
    /// reproduces the config. Model seeds are derived per repetition.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let opt = |v: Option<usize>| v.map_or("none".to_owned(), |v| v.to_string());
        let mut out = Vec::new();
        match &self.source {
            Some(Source::File(p)) => out.push(("dataset", p.display().to_string())),
            Some(Source::Scenario(s)) => out.push(("scenario", s.to_string())),
            None => {}
        }
        let methods: Vec<_> = self.methods.iter().map(|m| m.name()).collect();
        let hidden: Vec<_> = self.nn.hidden.iter().map(|h| h.to_string()).collect();
        out.extend([
            ("response", self.response.clone()),
            ("n", self.n.to_string()),
            ("alpha", self.alpha.to_string()),
            ("K", self.k.to_string()),
            ("tau_min", self.tau_min.to_string()),
            ("tau_max", self.tau_max.to_string()),
            ("methods", methods.join(",")),
            ("model", self.model.to_string()),
            ("boundary", self.boundary.to_string()),
            ("reps", self.reps.to_string()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("fallback_shortest", self.fallback_shortest.to_string()),
            ("bins", self.bins.to_string()),
            ("forest.n_trees", self.forest.n_trees.to_string()),
            ("forest.max_depth", opt(self.forest.max_depth)),
            ("forest.min_leaf", self.forest.min_leaf.to_string()),
            ("forest.max_features", self.forest.max_features.to_string()),
            ("forest.bootstrap", self.forest.bootstrap.to_string()),
            ("nn.hidden", hidden.join(",")),
            ("nn.learning_rate", self.nn.learning_rate.to_string()),
            ("nn.epochs", self.nn.epochs.to_string()),
            ("nn.batch_size", opt(self.nn.batch_size)),
        ]);
        out.into_iter().map(|(k, v)| (k.to_owned(), v)).collect()
    }

    pub fn uses_forest(&self) -> bool {
        self.methods.iter().any(|m| match m {
            Method::CtiForest | Method::CtiHarmonic => true,
            Method::Split | Method::Cqr => self.model == BaselineModel::Forest,
            Method::CtiPinball => false,
        })
    }

    pub fn uses_pinball(&self) -> bool {
        self.methods.iter().any(|m| match m {
            Method::CtiPinball | Method::CtiHarmonic => true,
            Method::Split | Method::Cqr => self.model == BaselineModel::Pinball,
            Method::CtiForest => false,
        })
    }

    pub fn levels(&self) -> cti::Result<QuantileLevels<f64>> {
        QuantileLevels::new(self.k, self.tau_min, self.tau_max)
    }

    /// Name used in output files: the file stem or the scenario name.
    pub fn dataset_name(&self) -> String {
        match &self.source {
            Some(Source::File(p)) => p.file_stem().map_or_else(
                || "dataset".to_owned(),
                |s| s.to_string_lossy().into_owned(),
            ),
            Some(Source::Scenario(s)) => s.name().to_owned(),
            None => "dataset".to_owned(),
        }
    }
}

/// Every reason the run could not start; empty when it can.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Problem> {
    let mut p = Vec::new();
    match &cfg.source {
        None => p.push(Problem::new("dataset", "set either dataset or scenario")),
        Some(Source::File(path)) if !path.is_file() => p.push(Problem::new(
            "dataset",
            format!("{} is not a readable file", path.display()),
        )),
        Some(Source::Scenario(s)) => {
            if let Err(e) = s.validate() {
                p.push(Problem::new("scenario", e.to_string()));
            }
            if cfg.n < 10 {
                p.push(Problem::new(
                    "n",
                    format!("must be at least 10, got {}", cfg.n),
                ));
            }
        }
        Some(Source::File(_)) => {}
    }
    if cfg.response.is_empty() {
        p.push(Problem::new("response", "must name a column"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) {
        p.push(Problem::new(
            "alpha",
            format!("must lie in (0, 1), got {}", cfg.alpha),
        ));
    }
    if cfg.k < 2 {
        p.push(Problem::new(
            "K",
            format!("must be at least 2, got {}", cfg.k),
        ));
    }
    if !(cfg.tau_min > 0.0 && cfg.tau_min < cfg.tau_max && cfg.tau_max < 1.0) {
        p.push(Problem::new(
            "tau_min",
            format!(
                "need 0 < tau_min < tau_max < 1, got {} and {}",
                cfg.tau_min, cfg.tau_max
            ),
        ));
    }
    if cfg.reps < 1 {
        p.push(Problem::new("reps", "must be at least 1"));
    }
    if cfg.bins < 2 {
        p.push(Problem::new(
            "bins",
            format!("must be at least 2, got {}", cfg.bins),
        ));
    }
    if cfg.methods.is_empty() {
        p.push(Problem::new("methods", "list at least one method"));
    }
    let mut seen = cfg.methods.clone();
    seen.sort();
    seen.dedup();
    if seen.len() != cfg.methods.len() {
        p.push(Problem::new("methods", "methods are listed more than once"));
    }
    if cfg.uses_forest() {
        if let Err(e) = cfg.forest.validate() {
            p.push(Problem::new("forest", e.to_string()));
        }
    }
    if cfg.uses_pinball() {
        if let Err(e) = cfg.nn.validate() {
            p.push(Problem::new("nn", e.to_string()));
        }
    }
    if cfg.methods.contains(&Method::Cqr) && cfg.k >= 2 && cfg.alpha > 0.0 && cfg.alpha < 1.0 {
        if let Ok(levels) = cfg.levels() {
            if levels.nearest(cfg.alpha / 2.0).0 >= levels.nearest(1.0 - cfg.alpha / 2.0).0 {
                p.push(Problem::new("K", "too coarse for CQR at this alpha"));
            }
        }
    }
    p
}
