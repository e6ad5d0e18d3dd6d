//! Pairs decoded interaction candidates with detected humans and objects.
//!
//! A candidate at `p` with unsigned vector `v` spans the interaction box
//! `p ± v`. A human/object pair is accepted when the interaction box
//! overlaps both detection boxes and every corner of the box spanned by the
//! two detection centers lies closer than `d_tau` to the matching corner of
//! the interaction box. The angle and distance-ratio filters are ablation
//! baselines that only look at the three centers.

use std::cmp::Ordering;
use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{corner_distances, interaction_box, iou, reference_box, BBox, CornerSet, Point2};
use crate::heatmap::InteractionCandidate;
use crate::hoi::{InteractionTriplet, ScoredDetection};

/// Half a cell: the interaction box covers the grid cells of its corners
/// when tested for overlap, so a zero-height box along a row still overlaps
/// the boxes it runs through.
pub const CELL_MARGIN: f64 = 0.5;

pub const DEFAULT_H_TAU: f64 = 0.4;
pub const DEFAULT_O_TAU: f64 = 0.1;
pub const DEFAULT_A_TAU: f64 = 0.01;
pub const DEFAULT_D_TAU: f64 = 2.0;
pub const DEFAULT_ANGLE_MIN: f64 = 5.0 * PI / 6.0;
pub const DEFAULT_RATIO_MAX: f64 = 1.5;

/// Which pair-acceptance rule to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingMode {
    /// Both overlap tests and the corner-distance test.
    #[default]
    Full,
    AngleOnly,
    AnglePlusRatio,
    /// Overlap tests only.
    BoxOnly,
    /// Same acceptance rule as `Full`.
    BoxPlusCorner,
}

impl GroupingMode {
    pub const ALL: [GroupingMode; 5] =
        [Self::Full, Self::AngleOnly, Self::AnglePlusRatio, Self::BoxOnly, Self::BoxPlusCorner];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::AngleOnly => "angle_only",
            Self::AnglePlusRatio => "angle_plus_ratio",
            Self::BoxOnly => "box_only",
            Self::BoxPlusCorner => "box_plus_corner",
        }
    }
}

impl fmt::Display for GroupingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GroupingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown grouping mode `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GroupingConfig {
    pub h_tau: f64,
    pub o_tau: f64,
    pub a_tau: f64,
    /// Corner-distance ceiling in grid units.
    pub d_tau: f64,
    /// Radians; angle-filter modes only.
    pub angle_min: f64,
    /// Distance-ratio modes only.
    pub ratio_max: f64,
    pub mode: GroupingMode,
    /// Actions annotated without an interaction object.
    pub no_object_classes: Vec<usize>,
}

impl Default for GroupingConfig {
    fn default() -> Self {
        Self {
            h_tau: DEFAULT_H_TAU,
            o_tau: DEFAULT_O_TAU,
            a_tau: DEFAULT_A_TAU,
            d_tau: DEFAULT_D_TAU,
            angle_min: DEFAULT_ANGLE_MIN,
            ratio_max: DEFAULT_RATIO_MAX,
            mode: GroupingMode::Full,
            no_object_classes: Vec::new(),
        }
    }
}

impl GroupingConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h_tau", self.h_tau), ("o_tau", self.o_tau), ("a_tau", self.a_tau), ("d_tau", self.d_tau)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a finite value >= 0, got {v}")));
            }
        }
        if !(self.angle_min > 0.0 && self.angle_min <= PI) {
            return Err(Error::Config(format!("angle_min must lie in (0, pi], got {}", self.angle_min)));
        }
        if !(self.ratio_max >= 1.0) {
            return Err(Error::Config(format!("ratio_max must be >= 1, got {}", self.ratio_max)));
        }
        Ok(())
    }

    pub fn is_no_object(&self, action: usize) -> bool {
        self.no_object_classes.contains(&action)
    }
}

/// Outcome of the three acceptance conditions for one pair and candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    pub human_overlap: bool,
    pub object_overlap: bool,
    /// `(tl, tr, bl, br)` distances between interaction and reference box.
    pub corner_distances: [f64; 4],
    pub corners_within: bool,
}

impl ConditionReport {
    pub fn passed(&self) -> bool {
        self.human_overlap && self.object_overlap && self.corners_within
    }

    /// Names of the failed conditions, in evaluation order.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !self.human_overlap {
            out.push("human_overlap");
        }
        if !self.object_overlap {
            out.push("object_overlap");
        }
        if !self.corners_within {
            out.push("corner_distance");
        }
        out
    }
}

/// Region used for the overlap tests.
fn overlap_region(ibox: &CornerSet) -> BBox {
    ibox.bbox().expand(CELL_MARGIN)
}

fn overlaps(det: &BBox, region: &BBox) -> bool {
    iou(det, region) > 0.0
}

fn corners_within(d: &[f64; 4], d_tau: f64) -> bool {
    d.iter().all(|&x| x < d_tau)
}

/// Evaluates the overlap and corner-distance conditions for one candidate
/// against one human/object pair.
pub fn check_conditions(
    h: &ScoredDetection,
    o: &ScoredDetection,
    cand: &InteractionCandidate,
    cfg: &GroupingConfig,
) -> ConditionReport {
    let ibox = interaction_box(cand.pos, cand.vector);
    let region = overlap_region(&ibox);
    let d = corner_distances(&ibox, &reference_box(h.center(), o.center()));
    ConditionReport {
        human_overlap: overlaps(&h.bbox, &region),
        object_overlap: overlaps(&o.bbox, &region),
        corner_distances: d,
        corners_within: corners_within(&d, cfg.d_tau),
    }
}

/// Angle between `PH` and `PO` in radians, or `None` when `p` coincides
/// with either center.
pub fn pair_angle(h_center: Point2, o_center: Point2, p: Point2) -> Option<f64> {
    let (ax, ay) = (h_center.x - p.x, h_center.y - p.y);
    let (bx, by) = (o_center.x - p.x, o_center.y - p.y);
    let na = (ax * ax + ay * ay).sqrt();
    let nb = (bx * bx + by * by).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some(((ax * bx + ay * by) / (na * nb)).clamp(-1.0, 1.0).acos())
}

/// Passes when the angle at `p` between the two centers is at least
/// `angle_min`. A point sitting on either center passes.
pub fn angle_filter(h_center: Point2, o_center: Point2, p: Point2, angle_min: f64) -> bool {
    pair_angle(h_center, o_center, p).is_none_or(|a| a >= angle_min)
}

/// Passes when `max(|PH|, |PO|) / min(|PH|, |PO|) <= ratio_max`. Two zero
/// lengths count as ratio 1; a single zero length fails.
pub fn dist_ratio_filter(h_center: Point2, o_center: Point2, p: Point2, ratio_max: f64) -> bool {
    let a = p.distance(&h_center);
    let b = p.distance(&o_center);
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    if hi == 0.0 {
        return true;
    }
    if lo == 0.0 {
        return false;
    }
    hi / lo <= ratio_max
}

/// Grouping output with the indices of the inputs that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupedTriplet {
    pub triplet: InteractionTriplet,
    pub human_index: usize,
    pub object_index: Option<usize>,
    pub candidate_index: usize,
}

/// Output order: score descending, then action, human, object, candidate.
pub fn output_order(a: &GroupedTriplet, b: &GroupedTriplet) -> Ordering {
    b.triplet
        .score
        .total_cmp(&a.triplet.score)
        .then(a.triplet.action_id.cmp(&b.triplet.action_id))
        .then(a.human_index.cmp(&b.human_index))
        .then(a.object_index.cmp(&b.object_index))
        .then(a.candidate_index.cmp(&b.candidate_index))
}

struct PreparedCandidate {
    index: usize,
    cand: InteractionCandidate,
    ibox: CornerSet,
    region: BBox,
}

/// Triple loop over humans, objects and candidates after the score
/// pre-filters. Every accepted combination emits one triplet scored
/// `h.score * o.score * cand.score`; no-object actions pair with a human
/// alone when the candidate lies inside the human box and score
/// `h.score * cand.score`.
pub fn group(
    humans: &[ScoredDetection],
    objects: &[ScoredDetection],
    candidates: &[InteractionCandidate],
    cfg: &GroupingConfig,
) -> Vec<GroupedTriplet> {
    let hs: Vec<usize> = (0..humans.len()).filter(|&i| humans[i].score > cfg.h_tau).collect();
    let os: Vec<usize> = (0..objects.len()).filter(|&i| objects[i].score > cfg.o_tau).collect();
    let h_centers: Vec<Point2> = humans.iter().map(|h| h.center()).collect();
    let o_centers: Vec<Point2> = objects.iter().map(|o| o.center()).collect();

    let prepared: Vec<PreparedCandidate> = candidates
        .iter()
        .enumerate()
        .filter(|(_, c)| c.score > cfg.a_tau)
        .map(|(index, c)| {
            let ibox = interaction_box(c.pos, c.vector);
            PreparedCandidate { index, cand: *c, region: overlap_region(&ibox), ibox }
        })
        .collect();

    // reference boxes per (human, object), row-major over the filtered lists
    let box_modes = matches!(cfg.mode, GroupingMode::Full | GroupingMode::BoxOnly | GroupingMode::BoxPlusCorner);
    let use_corners = matches!(cfg.mode, GroupingMode::Full | GroupingMode::BoxPlusCorner);
    let references: Vec<CornerSet> = if use_corners {
        hs.iter().flat_map(|&h| os.iter().map(move |&o| (h, o))).map(|(h, o)| reference_box(h_centers[h], o_centers[o])).collect()
    } else {
        Vec::new()
    };

    let mut out = Vec::new();
    let mut object_hits = vec![false; os.len()];
    for pc in &prepared {
        let c = &pc.cand;
        let emit = |h: usize, o: Option<usize>, out: &mut Vec<GroupedTriplet>| {
            let human = humans[h];
            let object = o.map(|o| objects[o]);
            let score = match object {
                Some(obj) => human.score * obj.score * c.score,
                None => human.score * c.score,
            };
            out.push(GroupedTriplet {
                triplet: InteractionTriplet { action_id: c.class_id, human, object, score, point: c.pos, vector: c.vector },
                human_index: h,
                object_index: o,
                candidate_index: pc.index,
            });
        };

        if cfg.is_no_object(c.class_id) {
            for &h in &hs {
                if humans[h].bbox.contains(c.pos) {
                    emit(h, None, &mut out);
                }
            }
            continue;
        }

        if box_modes {
            for (slot, &o) in os.iter().enumerate() {
                object_hits[slot] = overlaps(&objects[o].bbox, &pc.region);
            }
            for (hi, &h) in hs.iter().enumerate() {
                if !overlaps(&humans[h].bbox, &pc.region) {
                    continue;
                }
                for (oi, &o) in os.iter().enumerate() {
                    if !object_hits[oi] {
                        continue;
                    }
                    if use_corners {
                        let d = corner_distances(&pc.ibox, &references[hi * os.len() + oi]);
                        if !corners_within(&d, cfg.d_tau) {
                            continue;
                        }
                    }
                    emit(h, Some(o), &mut out);
                }
            }
        } else {
            let with_ratio = cfg.mode == GroupingMode::AnglePlusRatio;
            for &h in &hs {
                for &o in &os {
                    let (hc, oc) = (h_centers[h], o_centers[o]);
                    if !angle_filter(hc, oc, c.pos, cfg.angle_min) {
                        continue;
                    }
                    if with_ratio && !dist_ratio_filter(hc, oc, c.pos, cfg.ratio_max) {
                        continue;
                    }
                    emit(h, Some(o), &mut out);
                }
            }
        }
    }
    out.sort_by(output_order);
    out
}
