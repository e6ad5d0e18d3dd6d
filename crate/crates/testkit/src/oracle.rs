//! Brute-force reference implementations.
//!
//! Everything here is written from scalar arithmetic on plain struct fields.
//! Nothing below may call into the library's geometry, grouping or
//! evaluation code; `tests/oracle_lint.rs` scans this file to keep it that
//! way.

// `.contains(` is on the lint's forbidden list, slices included.
#![allow(clippy::manual_contains)]

use std::collections::BTreeMap;

use hoi_points::{GroupingConfig, GroupingMode, HoiRecord, InteractionCandidate, ScoredDetection};

/// One accepted combination, identified by input indices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleTriplet {
    pub action: usize,
    pub human: usize,
    pub object: Option<usize>,
    pub candidate: usize,
    pub score: f64,
}

fn mid(lo: f64, hi: f64) -> f64 {
    (lo + hi) / 2.0
}

fn det_center(d: &ScoredDetection) -> (f64, f64) {
    (mid(d.bbox.x_min, d.bbox.x_max), mid(d.bbox.y_min, d.bbox.y_max))
}

fn euclid(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = ax - bx;
    let dy = ay - by;
    (dx * dx + dy * dy).sqrt()
}

/// Positive-area intersection of two `[x0, y0, x1, y1]` rectangles.
fn rects_overlap(a: [f64; 4], b: [f64; 4]) -> bool {
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    w > 0.0 && h > 0.0 && w * h > 0.0
}

fn accepts_box(h: &ScoredDetection, o: &ScoredDetection, c: &InteractionCandidate, cfg: &GroupingConfig, corners: bool) -> bool {
    let (px, py, vx, vy) = (c.pos.x, c.pos.y, c.vector.vx_abs, c.vector.vy_abs);
    // interaction rectangle, grown by half a cell for the overlap tests
    let region = [px - vx - 0.5, py - vy - 0.5, px + vx + 0.5, py + vy + 0.5];
    let hb = [h.bbox.x_min, h.bbox.y_min, h.bbox.x_max, h.bbox.y_max];
    let ob = [o.bbox.x_min, o.bbox.y_min, o.bbox.x_max, o.bbox.y_max];
    if !rects_overlap(hb, region) || !rects_overlap(ob, region) {
        return false;
    }
    if !corners {
        return true;
    }
    let (hx, hy) = det_center(h);
    let (ox, oy) = det_center(o);
    let (rx0, rx1) = if hx <= ox { (hx, ox) } else { (ox, hx) };
    let (ry0, ry1) = if hy <= oy { (hy, oy) } else { (oy, hy) };
    let (ix0, iy0, ix1, iy1) = (px - vx, py - vy, px + vx, py + vy);
    let pairs = [
        (ix0, iy0, rx0, ry0),
        (ix1, iy0, rx1, ry0),
        (ix0, iy1, rx0, ry1),
        (ix1, iy1, rx1, ry1),
    ];
    pairs.iter().all(|&(ax, ay, bx, by)| euclid(ax, ay, bx, by) < cfg.d_tau)
}

fn accepts_angle(h: &ScoredDetection, o: &ScoredDetection, c: &InteractionCandidate, cfg: &GroupingConfig, ratio: bool) -> bool {
    let (hx, hy) = det_center(h);
    let (ox, oy) = det_center(o);
    let (px, py) = (c.pos.x, c.pos.y);
    let ph = euclid(hx, hy, px, py);
    let po = euclid(ox, oy, px, py);
    if ph != 0.0 && po != 0.0 {
        let cos = ((hx - px) * (ox - px) + (hy - py) * (oy - py)) / (ph * po);
        if cos.clamp(-1.0, 1.0).acos() < cfg.angle_min {
            return false;
        }
    }
    if !ratio {
        return true;
    }
    let big = ph.max(po);
    let small = ph.min(po);
    if big == 0.0 {
        true
    } else if small == 0.0 {
        false
    } else {
        big / small <= cfg.ratio_max
    }
}

/// Exhaustive enumeration of every (candidate, human, object) combination.
pub fn oracle_group(
    humans: &[ScoredDetection],
    objects: &[ScoredDetection],
    candidates: &[InteractionCandidate],
    cfg: &GroupingConfig,
) -> Vec<OracleTriplet> {
    let mut out = Vec::new();
    for (ci, c) in candidates.iter().enumerate() {
        if !(c.score > cfg.a_tau) {
            continue;
        }
        let no_object = cfg.no_object_classes.iter().any(|&k| k == c.class_id);
        for (hi, h) in humans.iter().enumerate() {
            if !(h.score > cfg.h_tau) {
                continue;
            }
            if no_object {
                let b = &h.bbox;
                if c.pos.x >= b.x_min && c.pos.x <= b.x_max && c.pos.y >= b.y_min && c.pos.y <= b.y_max {
                    out.push(OracleTriplet { action: c.class_id, human: hi, object: None, candidate: ci, score: h.score * c.score });
                }
                continue;
            }
            for (oi, o) in objects.iter().enumerate() {
                if !(o.score > cfg.o_tau) {
                    continue;
                }
                let ok = match cfg.mode {
                    GroupingMode::Full | GroupingMode::BoxPlusCorner => accepts_box(h, o, c, cfg, true),
                    GroupingMode::BoxOnly => accepts_box(h, o, c, cfg, false),
                    GroupingMode::AngleOnly => accepts_angle(h, o, c, cfg, false),
                    GroupingMode::AnglePlusRatio => accepts_angle(h, o, c, cfg, true),
                };
                if ok {
                    out.push(OracleTriplet {
                        action: c.class_id,
                        human: hi,
                        object: Some(oi),
                        candidate: ci,
                        score: h.score * o.score * c.score,
                    });
                }
            }
        }
    }
    // stable insertion sort on (score desc, action, human, object, candidate)
    let key_less = |a: &OracleTriplet, b: &OracleTriplet| {
        if a.score != b.score {
            return a.score > b.score;
        }
        (a.action, a.human, a.object.map_or(0, |o| o + 1), a.candidate)
            < (b.action, b.human, b.object.map_or(0, |o| o + 1), b.candidate)
    };
    for i in 1..out.len() {
        let mut j = i;
        while j > 0 && key_less(&out[j], &out[j - 1]) {
            out.swap(j, j - 1);
            j -= 1;
        }
    }
    out
}

fn rect_iou(a: [f64; 4], b: [f64; 4]) -> f64 {
    let area = |r: [f64; 4]| (r[2] - r[0]) * (r[3] - r[1]);
    let w = a[2].min(b[2]) - a[0].max(b[0]);
    let h = a[3].min(b[3]) - a[1].max(b[1]);
    let inter = if w > 0.0 && h > 0.0 { w * h } else { 0.0 };
    let union = area(a) + area(b) - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

fn arr(b: &hoi_points::BBox) -> [f64; 4] {
    [b.x_min, b.y_min, b.x_max, b.y_max]
}

/// `true` when `a` ranks strictly before `b`: score descending, then image,
/// action, human box, object box (missing object first among equals).
fn ranks_before(a: &HoiRecord, b: &HoiRecord) -> bool {
    if a.score != b.score {
        return a.score > b.score;
    }
    if a.image_id != b.image_id {
        return a.image_id < b.image_id;
    }
    if a.action_id != b.action_id {
        return a.action_id < b.action_id;
    }
    let key = |r: &HoiRecord| {
        let h = arr(&r.human_box);
        let o = r.object_box.as_ref().map(arr).unwrap_or([f64::NEG_INFINITY; 4]);
        [h[0], h[1], h[2], h[3], o[0], o[1], o[2], o[3]]
    };
    let (ka, kb) = (key(a), key(b));
    for i in 0..8 {
        if ka[i] != kb[i] {
            return ka[i] < kb[i];
        }
    }
    false
}

/// Per-class AP for every action with ground truth.
///
/// Predictions are ranked globally; each one takes the best-overlapping
/// unconsumed ground truth of its image and action above `iou_min`
/// (lowest index on ties). AP is the sum, over true-positive ranks, of the
/// best precision reached at that rank or any later one, divided by the
/// ground-truth count.
pub fn oracle_ap(preds: &[HoiRecord], gts: &[HoiRecord], iou_min: f64, no_object_classes: &[usize]) -> BTreeMap<usize, f64> {
    let mut order: Vec<usize> = Vec::new();
    for i in 0..preds.len() {
        let pos = order.iter().position(|&j| ranks_before(&preds[i], &preds[j])).unwrap_or(order.len());
        order.insert(pos, i);
    }

    let mut classes: Vec<usize> = gts.iter().map(|g| g.action_id).collect();
    classes.sort();
    classes.dedup();

    let mut out = BTreeMap::new();
    for &class in &classes {
        let n_gt = gts.iter().filter(|g| g.action_id == class).count();
        let no_object = no_object_classes.iter().any(|&k| k == class);
        let mut used = vec![false; gts.len()];
        let mut labels = Vec::new();
        for &i in &order {
            let p = &preds[i];
            if p.action_id != class {
                continue;
            }
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                if used[j] || g.action_id != class || g.image_id != p.image_id {
                    continue;
                }
                let h = rect_iou(arr(&p.human_box), arr(&g.human_box));
                let ov = if no_object {
                    h
                } else {
                    match (&p.object_box, &g.object_box) {
                        (Some(a), Some(b)) => h.min(rect_iou(arr(a), arr(b))),
                        _ => continue,
                    }
                };
                if ov > iou_min && best.is_none_or(|(_, b)| ov > b) {
                    best = Some((j, ov));
                }
            }
            if let Some((j, _)) = best {
                used[j] = true;
            }
            labels.push(best.is_some());
        }
        let precision: Vec<f64> = (0..labels.len())
            .map(|k| labels[..=k].iter().filter(|&&t| t).count() as f64 / (k + 1) as f64)
            .collect();
        let mut sum = 0.0;
        for k in 0..labels.len() {
            if labels[k] {
                sum += precision[k..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            }
        }
        out.insert(class, sum / n_gt as f64);
    }
    out
}

/// Mean of the per-class values in ascending class order.
pub fn oracle_map(per_class: &BTreeMap<usize, f64>) -> f64 {
    if per_class.is_empty() {
        return 0.0;
    }
    let mut sum = 0.0;
    for v in per_class.values() {
        sum += v;
    }
    sum / per_class.len() as f64
}
