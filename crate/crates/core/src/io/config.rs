//! Run configuration, stored as TOML.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{EvalSetting, GroundTruthSet, DEFAULT_IOU_MIN};
use crate::grouping::GroupingConfig;
use crate::heatmap::{dynamic_thresholds, DEFAULT_SIGMA, DEFAULT_TOP_K};
use crate::io::records::{IngestConfig, RecordSchema};
use crate::losses::{FocalParams, DEFAULT_LAMBDA_V};

/// Per-class decode floors from training counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicThresholds {
    pub t_low: f64,
    pub t_high: f64,
    /// Actions with fewer training samples than this get `t_low`.
    pub cutoff: u64,
}

impl Default for DynamicThresholds {
    fn default() -> Self {
        Self { t_low: 0.01, t_high: 0.05, cutoff: 10 }
    }
}

/// Dataset metadata used by evaluation and dynamic thresholds.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetMeta {
    pub train_counts: Vec<u64>,
    pub rare_cutoff: u64,
    /// Object category of every action, for Known-Object evaluation.
    pub class_object_category: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Image pixels per grid cell.
    pub stride: u32,
    pub image_width: u32,
    pub image_height: u32,
    /// Gaussian standard deviation in grid cells.
    pub sigma: f64,
    pub topk: usize,
    pub lambda_v: f64,
    pub iou_min: f64,
    pub setting: EvalSetting,
    pub person_category: usize,
    /// Seed for anything randomized (synthetic scenes, benchmarks).
    pub seed: u64,
    pub actions: Vec<String>,
    pub object_categories: Vec<String>,
    pub dynamic: Option<DynamicThresholds>,
    pub grouping: GroupingConfig,
    pub focal: FocalParams,
    pub dataset: DatasetMeta,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            stride: 4,
            image_width: 512,
            image_height: 512,
            sigma: DEFAULT_SIGMA,
            topk: DEFAULT_TOP_K,
            lambda_v: DEFAULT_LAMBDA_V,
            iou_min: DEFAULT_IOU_MIN,
            setting: EvalSetting::Default,
            person_category: 0,
            seed: 0,
            actions: Vec::new(),
            object_categories: Vec::new(),
            dynamic: None,
            grouping: GroupingConfig::default(),
            focal: FocalParams::default(),
            dataset: DatasetMeta::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.stride < 1 {
            return fail("stride must be >= 1".into());
        }
        if self.image_width == 0 || self.image_height == 0 {
            return fail("image size must be positive".into());
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma must be positive, got {}", self.sigma));
        }
        if !(self.lambda_v >= 0.0 && self.lambda_v.is_finite()) {
            return fail(format!("lambda_v must be >= 0, got {}", self.lambda_v));
        }
        if !(0.0..1.0).contains(&self.iou_min) {
            return fail(format!("iou_min must lie in [0, 1), got {}", self.iou_min));
        }
        let f = &self.focal;
        if !(f.eps > 0.0 && f.eps < 0.5 && f.alpha >= 0.0 && f.beta >= 0.0) {
            return fail("focal: need 0 < eps < 0.5 and alpha, beta >= 0".into());
        }
        self.grouping.validate()?;
        if let Some(d) = &self.dynamic {
            if !(0.0 <= d.t_low && d.t_low <= d.t_high && d.t_high <= 1.0) {
                return fail("dynamic: need 0 <= t_low <= t_high <= 1".into());
            }
            if self.dataset.train_counts.len() != self.actions.len() {
                return fail("dynamic thresholds need one training count per action".into());
            }
        }
        let n_actions = self.actions.len();
        if n_actions > 0 {
            if let Some(&c) = self.grouping.no_object_classes.iter().find(|&&c| c >= n_actions) {
                return fail(format!("no-object class {c} outside the {n_actions} actions"));
            }
            for (name, len) in [
                ("dataset.train_counts", self.dataset.train_counts.len()),
                ("dataset.class_object_category", self.dataset.class_object_category.len()),
            ] {
                if len != 0 && len != n_actions {
                    return fail(format!("{name} has {len} entries for {n_actions} actions"));
                }
            }
        }
        if !self.object_categories.is_empty() && self.person_category >= self.object_categories.len() {
            return fail(format!("person_category {} outside the category list", self.person_category));
        }
        Ok(())
    }

    /// Grid size `(height, width)`: image size divided by the stride, rounded up.
    pub fn grid(&self) -> (usize, usize) {
        (self.image_height.div_ceil(self.stride) as usize, self.image_width.div_ceil(self.stride) as usize)
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Decode floor per action: dynamic when configured, else `a_tau`.
    pub fn action_floors(&self) -> Vec<f64> {
        match &self.dynamic {
            Some(d) => dynamic_thresholds(&self.dataset.train_counts, d.t_low, d.t_high, d.cutoff),
            None => vec![self.grouping.a_tau; self.num_actions()],
        }
    }

    pub fn ingest(&self) -> IngestConfig {
        IngestConfig {
            stride: self.stride as f64,
            person_category: self.person_category,
            num_categories: (!self.object_categories.is_empty()).then_some(self.object_categories.len()),
        }
    }

    pub fn record_schema(&self, require_score: bool) -> RecordSchema {
        RecordSchema {
            no_object_classes: self.grouping.no_object_classes.clone(),
            num_actions: (!self.actions.is_empty()).then_some(self.actions.len()),
            require_score,
        }
    }

    /// Attaches the dataset metadata to ground-truth records.
    pub fn ground_truth(&self, records: Vec<crate::hoi::HoiRecord>) -> GroundTruthSet {
        GroundTruthSet {
            train_counts: self.dataset.train_counts.clone(),
            rare_cutoff: self.dataset.rare_cutoff,
            no_object_classes: self.grouping.no_object_classes.clone(),
            class_object_category: self.dataset.class_object_category.clone(),
            ..GroundTruthSet::from_records(records)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grouping::GroupingMode;

    #[test]
    fn defaults_and_round_trip() {
        let cfg = RunConfig::default();
        assert_eq!(cfg.stride, 4);
        assert_eq!(cfg.grouping.h_tau, 0.4);
        assert_eq!(cfg.grouping.o_tau, 0.1);
        assert_eq!(cfg.lambda_v, 0.1);
        assert_eq!(cfg.grid(), (128, 128));
        cfg.validate().unwrap();
        assert_eq!(RunConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_toml_fills_defaults() {
        let cfg = RunConfig::from_toml("stride = 8\nactions = [\"ride\", \"walk\"]\n[grouping]\nmode = \"box_only\"\nno_object_classes = [1]\n").unwrap();
        assert_eq!(cfg.stride, 8);
        assert_eq!(cfg.grouping.mode, GroupingMode::BoxOnly);
        assert_eq!(cfg.grouping.d_tau, 2.0);
        cfg.validate().unwrap();
        assert_eq!(cfg.record_schema(true).num_actions, Some(2));
        assert!(RunConfig::from_toml("strid = 8").is_err());
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            RunConfig { stride: 0, ..Default::default() },
            RunConfig { sigma: 0.0, ..Default::default() },
            RunConfig { iou_min: 1.0, ..Default::default() },
            RunConfig {
                actions: vec!["a".into()],
                grouping: GroupingConfig { no_object_classes: vec![3], ..Default::default() },
                ..Default::default()
            },
            RunConfig { dynamic: Some(DynamicThresholds { t_low: 0.2, t_high: 0.1, cutoff: 3 }), ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn floors_follow_dynamic_setting() {
        let mut cfg = RunConfig { actions: vec!["a".into(), "b".into()], ..Default::default() };
        assert_eq!(cfg.action_floors(), vec![cfg.grouping.a_tau; 2]);
        cfg.dynamic = Some(DynamicThresholds::default());
        cfg.dataset.train_counts = vec![3, 500];
        cfg.validate().unwrap();
        assert_eq!(cfg.action_floors(), vec![0.01, 0.05]);
    }
}
