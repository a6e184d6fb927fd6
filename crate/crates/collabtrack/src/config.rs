//! Flat `key = value` run configuration.
//!
//! Values come from built-in defaults, then an optional file, then the
//! `COLLABTRACK_SEED` environment variable (seed only), then `--set`
//! overrides; later sources win.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use collabtrack_core::filter::MotionModel;
use collabtrack_core::network::{LossWeights, PretrainConfig, RbmStepConfig, SgdConfig, TrainConfig};
use collabtrack_core::{Rect, TrackerConfig};

use crate::error::{AppError, AppResult};
use crate::synth::SynthParams;

pub const SEED_ENV: &str = "COLLABTRACK_SEED";

/// Every recognised key with its default and a one-line description.
pub const KEYS: &[(&str, &str, &str)] = &[
    ("seed", "0", "seed for every random choice"),
    ("sequence", "", "frame directory (read by track and eval, written by synth)"),
    ("ground_truth", "", "ground-truth file; empty means <sequence>/groundtruth.txt"),
    ("init_box", "", "x,y,w,h of the target in frame 0; empty means the first ground-truth row"),
    ("model", "model.bin", "network file"),
    ("trajectory", "trajectory.csv", "tracker output"),
    ("report", "report.csv", "evaluation output"),
    ("out_dir", "filters", "directory for dump-filters"),
    ("train_sequences", "", "comma-separated sequence directories for pretrain"),
    ("harvest_positives", "5", "positives per training frame"),
    ("harvest_negatives", "5", "negatives per training frame"),
    ("rbm_epochs", "10", "CD-1 epochs per pretrained layer"),
    ("rbm_batch_size", "100", "CD-1 mini-batch size"),
    ("rbm_learning_rate", "0.002", "CD-1 learning rate"),
    ("train_epochs", "100", "supervised epochs after pretraining"),
    ("train_batch_size", "100", "supervised mini-batch size"),
    ("mask_delta", "0.018", "block similarity threshold for the occlusion mask"),
    ("tau", "0.8", "fine-tune when the best network score falls below this"),
    ("chi", "0.8", "minimum occlusion rate for a subspace update"),
    ("update_interval", "5", "frames between subspace updates"),
    ("eigenvectors", "16", "basis vectors kept per block"),
    ("forgetting", "0.95", "forgetting factor of the subspace update"),
    ("particles", "600", "candidates per frame"),
    ("variances", "6,6,0.01,0,0,0", "motion variances of x, y, scale, rotation, aspect, skew"),
    ("learning_rate", "0.002", "SGD learning rate"),
    ("momentum", "0.9", "SGD and CD-1 momentum"),
    ("weight_decay", "0.002", "SGD and CD-1 weight decay"),
    ("gamma", "0", "weight penalty of the supervised loss"),
    ("eta", "0.001", "sparsity penalty of the supervised loss"),
    ("rho", "0.05", "target mean activation of hidden units"),
    ("online_epochs", "20", "epochs per online fine-tune"),
    ("online_batch_size", "50", "mini-batch size of online fine-tuning"),
    ("positives_per_frame", "5", "positives added to the reservoir per frame"),
    ("negatives_per_finetune", "100", "negatives drawn for each fine-tune"),
    ("generative", "true", "use the block subspace score; false tracks with the network alone"),
    ("synth_frames", "100", "frames in a synthetic sequence"),
    ("synth_width", "160", "synthetic frame width"),
    ("synth_height", "120", "synthetic frame height"),
    ("synth_target_size", "32", "side of the synthetic square target"),
    ("synth_occluder_fraction", "0", "occluder width as a fraction of the target (0 disables it)"),
    ("synth_occluder_start", "40", "first occluded frame"),
    ("synth_occluder_end", "60", "last occluded frame"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<&'static str, String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            values: KEYS.iter().map(|(k, v, _)| (*k, v.to_string())).collect(),
        }
    }
}

fn usage(msg: impl Into<String>) -> AppError {
    AppError::Usage(msg.into())
}

impl RunConfig {
    /// Resolves the configuration from all sources.
    pub fn load(file: Option<&Path>, env_seed: Option<&str>, overrides: &[String]) -> AppResult<Self> {
        let mut cfg = Self::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
            cfg.apply_text(&path.display().to_string(), &text)?;
        }
        if let Some(seed) = env_seed {
            let seed = seed.trim();
            seed.parse::<u64>()
                .map_err(|_| usage(format!("{SEED_ENV}: expected an unsigned integer, got {seed:?}")))?;
            cfg.set("seed", seed)?;
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| usage(format!("--set expects key=value, got {o:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }

    /// Applies `key = value` lines; blank lines and `#` comments are ignored.
    pub fn apply_text(&mut self, origin: &str, text: &str) -> AppResult<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split_once('#').map_or(line, |(a, _)| a).trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| usage(format!("{origin}: line {}: expected key = value", i + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| usage(format!("{origin}: line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> AppResult<()> {
        let (name, _, _) = KEYS
            .iter()
            .find(|(k, _, _)| *k == key)
            .ok_or_else(|| usage(format!("unknown config key {key:?}")))?;
        self.values.insert(name, value.to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> &str {
        self.values
            .get(key)
            .map(String::as_str)
            .unwrap_or_else(|| panic!("config key {key} is not declared"))
    }

    fn parse<T: std::str::FromStr>(&self, key: &str) -> AppResult<T> {
        let raw = self.get(key);
        raw.parse()
            .map_err(|_| usage(format!("config key {key}: cannot parse {raw:?}")))
    }

    pub fn f64(&self, key: &str) -> AppResult<f64> {
        let v: f64 = self.parse(key)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(usage(format!("config key {key}: value must be finite")))
        }
    }

    pub fn usize(&self, key: &str) -> AppResult<usize> {
        self.parse(key)
    }

    pub fn u64(&self, key: &str) -> AppResult<u64> {
        self.parse(key)
    }

    pub fn bool(&self, key: &str) -> AppResult<bool> {
        self.parse(key)
    }

    pub fn f64_list(&self, key: &str) -> AppResult<Vec<f64>> {
        let raw = self.get(key);
        if raw.trim().is_empty() {
            return Ok(Vec::new());
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| usage(format!("config key {key}: bad number {s:?}")))
            })
            .collect()
    }

    /// A non-empty path value.
    pub fn path(&self, key: &str) -> AppResult<PathBuf> {
        let raw = self.get(key);
        if raw.is_empty() {
            Err(usage(format!("config key {key} must be set")))
        } else {
            Ok(PathBuf::from(raw))
        }
    }

    pub fn paths(&self, key: &str) -> Vec<PathBuf> {
        self.get(key)
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(PathBuf::from)
            .collect()
    }

    pub fn ground_truth_path(&self) -> AppResult<PathBuf> {
        match self.get("ground_truth") {
            "" => Ok(self.path("sequence")?.join(crate::GROUND_TRUTH_FILE)),
            p => Ok(PathBuf::from(p)),
        }
    }

    pub fn init_box(&self) -> AppResult<Option<Rect>> {
        let v = self.f64_list("init_box")?;
        match v.as_slice() {
            [] => Ok(None),
            [x, y, w, h] => Ok(Some(Rect::new(*x, *y, *w, *h))),
            _ => Err(usage("config key init_box: expected x,y,w,h")),
        }
    }

    pub fn tracker_config(&self) -> AppResult<TrackerConfig> {
        let v = self.f64_list("variances")?;
        let variances: [f64; 6] = v
            .try_into()
            .map_err(|_| usage("config key variances: expected six values"))?;
        let cfg = TrackerConfig {
            mask_delta: self.f64("mask_delta")?,
            tau: self.f64("tau")?,
            chi: self.f64("chi")?,
            update_interval: self.usize("update_interval")?,
            eigenvectors: self.usize("eigenvectors")?,
            forgetting: self.f64("forgetting")?,
            motion: MotionModel {
                variances,
                particle_count: self.usize("particles")?,
            },
            learning_rate: self.f64("learning_rate")?,
            momentum: self.f64("momentum")?,
            weight_decay: self.f64("weight_decay")?,
            loss: self.loss_weights()?,
            online_epochs: self.usize("online_epochs")?,
            online_batch_size: self.usize("online_batch_size")?,
            positives_per_frame: self.usize("positives_per_frame")?,
            negatives_per_finetune: self.usize("negatives_per_finetune")?,
            generative_enabled: self.bool("generative")?,
            seed: self.u64("seed")?,
        };
        cfg.validate().map_err(|e| usage(e.to_string()))?;
        Ok(cfg)
    }

    fn loss_weights(&self) -> AppResult<LossWeights> {
        Ok(LossWeights {
            gamma: self.f64("gamma")?,
            eta: self.f64("eta")?,
            rho: self.f64("rho")?,
        })
    }

    pub fn pretrain_config(&self) -> AppResult<PretrainConfig> {
        Ok(PretrainConfig {
            epochs_per_layer: self.usize("rbm_epochs")?,
            batch_size: self.usize("rbm_batch_size")?,
            step: RbmStepConfig {
                learning_rate: self.f64("rbm_learning_rate")?,
                momentum: self.f64("momentum")?,
                weight_decay: self.f64("weight_decay")?,
            },
        })
    }

    pub fn train_config(&self) -> AppResult<TrainConfig> {
        Ok(TrainConfig {
            epochs: self.usize("train_epochs")?,
            batch_size: self.usize("train_batch_size")?,
            learning_rate: self.f64("learning_rate")?,
            sgd: SgdConfig {
                momentum: self.f64("momentum")?,
                weight_decay: self.f64("weight_decay")?,
            },
            loss: self.loss_weights()?,
        })
    }

    pub fn synth_params(&self) -> AppResult<SynthParams> {
        let p = SynthParams {
            frames: self.usize("synth_frames")?,
            width: self.usize("synth_width")?,
            height: self.usize("synth_height")?,
            target: self.usize("synth_target_size")?,
            occluder_fraction: self.f64("synth_occluder_fraction")?,
            occluder_start: self.usize("synth_occluder_start")?,
            occluder_end: self.usize("synth_occluder_end")?,
        };
        p.validate().map_err(usage)?;
        Ok(p)
    }
}
