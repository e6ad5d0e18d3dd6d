//! Role mean average precision over predicted and ground-truth triplets.
//!
//! A prediction is a true positive when its action matches an unconsumed
//! ground-truth triplet and both its human and object boxes overlap the
//! ground-truth boxes with IoU strictly above the threshold (human only for
//! actions without an object). Matching is greedy in score order. AP is the
//! area under the precision envelope.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::iou;
use crate::hoi::HoiRecord;

pub const DEFAULT_IOU_MIN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalSetting {
    #[default]
    Default,
    KnownObject,
}

impl fmt::Display for EvalSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Default => "default",
            Self::KnownObject => "known_object",
        })
    }
}

impl FromStr for EvalSetting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "default" => Ok(Self::Default),
            "known_object" => Ok(Self::KnownObject),
            other => Err(Error::Config(format!("unknown evaluation setting `{other}`"))),
        }
    }
}

/// Ground truth plus the dataset metadata the evaluator needs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GroundTruthSet {
    /// Triplets per image; the score field is ignored.
    pub images: BTreeMap<String, Vec<HoiRecord>>,
    /// Training samples per action, for the rare / non-rare split.
    pub train_counts: Vec<u64>,
    /// Actions with fewer training samples than this are rare.
    pub rare_cutoff: u64,
    pub no_object_classes: Vec<usize>,
    /// Object category of each action; required for Known-Object.
    pub class_object_category: Vec<usize>,
    /// Images known to contain each object category; required for Known-Object.
    pub known_object_images: Option<BTreeMap<usize, BTreeSet<String>>>,
}

impl GroundTruthSet {
    /// Groups flat records by image. Images without annotations can be
    /// registered by inserting an empty list afterwards.
    pub fn from_records(records: impl IntoIterator<Item = HoiRecord>) -> Self {
        let mut images: BTreeMap<String, Vec<HoiRecord>> = BTreeMap::new();
        for r in records {
            images.entry(r.image_id.clone()).or_default().push(r);
        }
        Self { images, ..Default::default() }
    }

    pub fn is_rare(&self, action: usize) -> Option<bool> {
        self.train_counts.get(action).map(|&c| c < self.rare_cutoff)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub setting: EvalSetting,
    /// AP of every action with at least one ground-truth instance.
    pub per_class_ap: BTreeMap<usize, f64>,
    pub per_class_gt: BTreeMap<usize, usize>,
    pub map_role: f64,
    pub map_rare: Option<f64>,
    pub map_non_rare: Option<f64>,
    pub rare_classes: Vec<usize>,
    pub non_rare_classes: Vec<usize>,
}

/// Deterministic ranking: score descending, then image, action and boxes.
pub fn prediction_order(a: &HoiRecord, b: &HoiRecord) -> Ordering {
    let boxes = |r: &HoiRecord| {
        let o = r.object_box.map(|b| b.to_array()).unwrap_or([f64::NEG_INFINITY; 4]);
        let h = r.human_box.to_array();
        [h[0], h[1], h[2], h[3], o[0], o[1], o[2], o[3]]
    };
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.image_id.cmp(&b.image_id))
        .then(a.action_id.cmp(&b.action_id))
        .then_with(|| {
            boxes(a).iter().zip(boxes(b)).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
        })
}

/// Overlap of a prediction with a ground-truth triplet of the same action:
/// the smaller of the two box IoUs, or the human IoU alone for no-object
/// actions. `None` when an object box is missing on either side of an
/// object-bearing action.
fn role_overlap(pred: &HoiRecord, gt: &HoiRecord, no_object: bool) -> Option<f64> {
    let h = iou(&pred.human_box, &gt.human_box);
    if no_object {
        return Some(h);
    }
    match (pred.object_box, gt.object_box) {
        (Some(p), Some(g)) => Some(h.min(iou(&p, &g))),
        _ => None,
    }
}

/// Greedy one-to-one matching of `preds` (already in ranking order) against
/// the ground truth of one image. Each prediction takes the unconsumed
/// ground truth with the highest overlap above `iou_min`, lowest index on
/// ties. Returns one TP flag per prediction.
pub fn match_triplets(preds: &[HoiRecord], gts: &[HoiRecord], iou_min: f64, no_object_classes: &[usize]) -> Vec<bool> {
    let mut consumed = vec![false; gts.len()];
    preds
        .iter()
        .map(|p| {
            let no_object = no_object_classes.contains(&p.action_id);
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                if consumed[j] || g.action_id != p.action_id {
                    continue;
                }
                if let Some(ov) = role_overlap(p, g, no_object) {
                    if ov > iou_min && best.is_none_or(|(_, b)| ov > b) {
                        best = Some((j, ov));
                    }
                }
            }
            if let Some((j, _)) = best {
                consumed[j] = true;
                true
            } else {
                false
            }
        })
        .collect()
}

/// Area under the precision envelope for TP/FP labels in ranking order.
pub fn average_precision(labels: &[bool], n_gt: usize) -> f64 {
    if n_gt == 0 {
        return 0.0;
    }
    let mut tp = 0usize;
    let mut envelope: Vec<f64> = labels
        .iter()
        .enumerate()
        .map(|(k, &is_tp)| {
            tp += usize::from(is_tp);
            tp as f64 / (k + 1) as f64
        })
        .collect();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let mut sum = 0.0;
    for (k, &is_tp) in labels.iter().enumerate() {
        if is_tp {
            sum += envelope[k];
        }
    }
    sum / n_gt as f64
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

/// Which images may contribute to each action.
enum ImageFilter<'a> {
    All,
    Known { categories: &'a [usize], images: &'a BTreeMap<usize, BTreeSet<String>> },
}

impl ImageFilter<'_> {
    fn allows(&self, action: usize, image: &str) -> bool {
        match self {
            Self::All => true,
            Self::Known { categories, images } => categories
                .get(action)
                .and_then(|cat| images.get(cat))
                .is_some_and(|set| set.contains(image)),
        }
    }
}

/// Role mAP of `preds` against `gt` under the given setting.
pub fn evaluate(preds: &[HoiRecord], gt: &GroundTruthSet, setting: EvalSetting, iou_min: f64) -> Result<EvalReport> {
    let filter = match setting {
        EvalSetting::Default => ImageFilter::All,
        EvalSetting::KnownObject => {
            let images = gt
                .known_object_images
                .as_ref()
                .ok_or_else(|| Error::MissingKnownObject("per-object-category image lists".into()))?;
            let needed = gt.images.values().flatten().map(|r| r.action_id).chain(preds.iter().map(|p| p.action_id));
            for action in needed {
                if action >= gt.class_object_category.len() {
                    return Err(Error::MissingKnownObject(format!("an object category for action {action}")));
                }
            }
            ImageFilter::Known { categories: &gt.class_object_category, images }
        }
    };

    let mut n_gt: BTreeMap<usize, usize> = BTreeMap::new();
    for (image, records) in &gt.images {
        for r in records.iter().filter(|r| filter.allows(r.action_id, image)) {
            *n_gt.entry(r.action_id).or_default() += 1;
        }
    }

    let mut by_image: BTreeMap<&str, Vec<&HoiRecord>> = BTreeMap::new();
    for p in preds.iter().filter(|p| n_gt.contains_key(&p.action_id) && filter.allows(p.action_id, &p.image_id)) {
        by_image.entry(p.image_id.as_str()).or_default().push(p);
    }

    let empty = Vec::new();
    let mut ranked: BTreeMap<usize, Vec<(&HoiRecord, bool)>> = BTreeMap::new();
    for (image, mut image_preds) in by_image {
        image_preds.sort_by(|a, b| prediction_order(a, b));
        let owned: Vec<HoiRecord> = image_preds.iter().map(|&p| p.clone()).collect();
        let gts: Vec<HoiRecord> = gt
            .images
            .get(image)
            .unwrap_or(&empty)
            .iter()
            .filter(|r| filter.allows(r.action_id, image))
            .cloned()
            .collect();
        let labels = match_triplets(&owned, &gts, iou_min, &gt.no_object_classes);
        for (p, label) in image_preds.into_iter().zip(labels) {
            ranked.entry(p.action_id).or_default().push((p, label));
        }
    }

    let mut per_class_ap = BTreeMap::new();
    for (&action, &count) in &n_gt {
        let mut entries = ranked.remove(&action).unwrap_or_default();
        entries.sort_by(|a, b| prediction_order(a.0, b.0));
        let labels: Vec<bool> = entries.iter().map(|e| e.1).collect();
        per_class_ap.insert(action, average_precision(&labels, count));
    }

    let (rare_classes, non_rare_classes): (Vec<usize>, Vec<usize>) = {
        let classified: Vec<(usize, bool)> =
            per_class_ap.keys().filter_map(|&c| gt.is_rare(c).map(|r| (c, r))).collect();
        (
            classified.iter().filter(|c| c.1).map(|c| c.0).collect(),
            classified.iter().filter(|c| !c.1).map(|c| c.0).collect(),
        )
    };

    Ok(EvalReport {
        setting,
        map_role: mean(per_class_ap.values().copied()).unwrap_or(0.0),
        map_rare: mean(rare_classes.iter().map(|c| per_class_ap[c])),
        map_non_rare: mean(non_rare_classes.iter().map(|c| per_class_ap[c])),
        per_class_gt: n_gt,
        per_class_ap,
        rare_classes,
        non_rare_classes,
    })
}
