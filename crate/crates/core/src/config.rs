//! Flat JSON experiment configuration and the named CrossWalk presets.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::crosswalk::{DEFAULT_CLOSENESS_LENGTH, DEFAULT_CLOSENESS_WALKS};
use crate::embed::{EmbedConfig, TrainMode};
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::propagation::{self, Bandwidth};
use crate::rng::stage_seed;
use crate::sbm::{ControlSpec, SbmSpec};
use crate::walk::{WalkConfig, DEFAULT_WALKS_PER_NODE, DEFAULT_WALK_LENGTH};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Intervention {
    Baseline,
    Crosswalk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    LowAwareness,
    HighAwareness,
}

impl Preset {
    pub const ALL: [Preset; 2] = [Preset::LowAwareness, Preset::HighAwareness];

    /// `(alpha, beta)` of the preset.
    pub fn parameters(self) -> (f64, f64) {
        match self {
            Preset::LowAwareness => (0.99, 15.0),
            Preset::HighAwareness => (0.01, 1.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Preset::LowAwareness => "low_awareness",
            Preset::HighAwareness => "high_awareness",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low_awareness" => Ok(Preset::LowAwareness),
            "high_awareness" => Ok(Preset::HighAwareness),
            other => Err(Error::InvalidParameter(format!("unknown preset `{other}`"))),
        }
    }
}

/// Every knob of one pipeline run. Serialized as a single flat JSON object;
/// absent keys take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Dataset label carried into sweep rows.
    pub dataset: String,

    pub edges: Option<PathBuf>,
    pub attrs: Option<PathBuf>,
    pub age_column: Option<String>,
    pub select_attribute: Option<String>,
    pub select_values: Option<Vec<String>>,

    pub sbm_blocks: Option<Vec<usize>>,
    pub sbm_p_intra: f64,
    pub sbm_p_inter: f64,
    pub sbm_seed: u64,
    pub sbm_control_probs: Option<Vec<f64>>,
    pub sbm_control_bonus: f64,

    pub sensitive: String,
    pub control: Option<String>,

    pub intervention: Intervention,
    pub preset: Option<Preset>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub closeness_walks: usize,
    pub closeness_length: usize,

    pub p: f64,
    pub q: f64,
    pub walks_per_node: usize,
    pub walk_length: usize,

    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub train_mode: TrainMode,

    pub folds: usize,
    pub labeled_fraction: f64,
    pub knn_k: usize,
    /// Fixed kernel bandwidth; `None` selects the automatic bandwidth.
    pub sigma: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,

    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let embed = EmbedConfig::default();
        Self {
            dataset: "default".into(),
            edges: None,
            attrs: None,
            age_column: None,
            select_attribute: None,
            select_values: None,
            sbm_blocks: None,
            sbm_p_intra: 0.1,
            sbm_p_inter: 0.02,
            sbm_seed: 0,
            sbm_control_probs: None,
            sbm_control_bonus: 0.0,
            sensitive: "location".into(),
            control: None,
            intervention: Intervention::Baseline,
            preset: None,
            alpha: None,
            beta: None,
            closeness_walks: DEFAULT_CLOSENESS_WALKS,
            closeness_length: DEFAULT_CLOSENESS_LENGTH,
            p: 1.0,
            q: 1.0,
            walks_per_node: DEFAULT_WALKS_PER_NODE,
            walk_length: DEFAULT_WALK_LENGTH,
            dim: embed.dim,
            window: embed.window,
            negatives: embed.negatives,
            epochs: embed.epochs,
            lr: embed.lr,
            train_mode: TrainMode::Exact,
            folds: 25,
            labeled_fraction: 0.5,
            knn_k: propagation::DEFAULT_K,
            sigma: None,
            max_iters: propagation::DEFAULT_MAX_ITERS,
            tol: propagation::DEFAULT_TOL,
            seed: 0,
            cache_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Applies a `key=value` override; the value is read as JSON and falls
    /// back to a plain string.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let doc = serde_json::to_value(&*self)?;
        if !doc.as_object().is_some_and(|m| m.contains_key(key)) {
            return Err(Error::InvalidParameter(format!("unknown config key `{key}`")));
        }
        let with = |v: serde_json::Value| {
            let mut d = doc.clone();
            d.as_object_mut().expect("object").insert(key.to_string(), v);
            serde_json::from_value::<Self>(d)
        };
        let updated = match serde_json::from_str(value).map(with) {
            Ok(Ok(cfg)) => cfg,
            _ => with(serde_json::Value::String(value.to_string()))?,
        };
        *self = updated;
        Ok(())
    }

    pub fn with_preset(mut self, preset: Preset) -> Self {
        let (alpha, beta) = preset.parameters();
        self.preset = Some(preset);
        self.intervention = Intervention::Crosswalk;
        self.alpha = Some(alpha);
        self.beta = Some(beta);
        self
    }

    pub fn baseline(mut self) -> Self {
        self.preset = None;
        self.intervention = Intervention::Baseline;
        self.alpha = None;
        self.beta = None;
        self
    }

    /// Expands a preset into its parameters and checks invariants.
    pub fn resolved(&self) -> Result<Self> {
        let cfg = match self.preset {
            Some(p) => self.clone().with_preset(p),
            None => self.clone(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.control.as_deref() == Some(self.sensitive.as_str()) {
            return bad("sensitive and control attribute must differ".into());
        }
        match (self.sbm_blocks.is_some(), self.edges.is_some() && self.attrs.is_some()) {
            (true, true) => return bad("config names both an SBM and input files".into()),
            (false, false) => return bad("config needs either sbm_blocks or edges + attrs".into()),
            _ => {}
        }
        if self.intervention == Intervention::Crosswalk {
            match (self.alpha, self.beta) {
                (Some(a), Some(b)) if a > 0.0 && a < 1.0 && b >= 0.0 => {}
                _ => return bad("crosswalk needs 0 < alpha < 1 and beta >= 0".into()),
            }
        }
        let positive = [self.p, self.q, self.lr, self.labeled_fraction, self.tol];
        if positive.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return bad("p, q, lr, labeled_fraction and tol must be positive".into());
        }
        let counts = [
            self.walks_per_node,
            self.walk_length,
            self.dim,
            self.window,
            self.folds,
            self.knn_k,
            self.closeness_walks,
            self.closeness_length,
        ];
        if counts.contains(&0) {
            return bad("walk, embedding and evaluation sizes must be positive".into());
        }
        Ok(())
    }

    pub fn sbm_spec(&self) -> Option<SbmSpec> {
        let blocks = self.sbm_blocks.clone()?;
        let mut spec = SbmSpec::new(blocks, self.sbm_p_intra, self.sbm_p_inter, self.sbm_seed);
        spec.block_attribute = self.sensitive.clone();
        if let Some(probs) = &self.sbm_control_probs {
            spec = spec.with_control(ControlSpec {
                name: self.control.clone().unwrap_or_else(|| "control".into()),
                class_probs: probs.clone(),
                intra_bonus: self.sbm_control_bonus,
            });
        }
        Some(spec)
    }

    pub fn closeness_seed(&self) -> u64 {
        stage_seed(self.seed, "closeness")
    }

    pub fn walk_config(&self) -> WalkConfig {
        WalkConfig {
            p: self.p,
            q: self.q,
            walks_per_node: self.walks_per_node,
            walk_length: self.walk_length,
            seed: stage_seed(self.seed, "walks"),
        }
    }

    pub fn embed_config(&self) -> EmbedConfig {
        EmbedConfig {
            dim: self.dim,
            window: self.window,
            negatives: self.negatives,
            epochs: self.epochs,
            lr: self.lr,
            seed: stage_seed(self.seed, "embed"),
            mode: self.train_mode,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            folds: self.folds,
            labeled_fraction: self.labeled_fraction,
            k: self.knn_k,
            bandwidth: self.sigma.map_or(Bandwidth::Auto, Bandwidth::Fixed),
            max_iters: self.max_iters,
            tol: self.tol,
            seed: stage_seed(self.seed, "eval"),
        }
    }
}
