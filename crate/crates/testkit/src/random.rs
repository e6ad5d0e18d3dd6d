//! Random small instances for oracle comparisons.
//!
//! Values are drawn from coarse lattices (half cells, a handful of score
//! levels) so that ties, threshold boundaries and degenerate geometry show
//! up often instead of almost never.

use std::f64::consts::PI;

use hoi_points::{
    BBox, GroupingConfig, GroupingMode, HoiRecord, InteractionCandidate, Point2, ScoredDetection, UnsignedVector,
};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

const SCORES: [f64; 10] = [0.0, 0.05, 0.1, 0.4, 0.5, 0.7, 0.9, 0.9, 1.0, 1.0];

fn half(rng: &mut impl Rng, lo: i32, hi: i32) -> f64 {
    rng.random_range(2 * lo..=2 * hi) as f64 / 2.0
}

fn score(rng: &mut impl Rng) -> f64 {
    *SCORES.choose(rng).unwrap()
}

fn detection(rng: &mut impl Rng) -> ScoredDetection {
    let (cx, cy) = (half(rng, 0, 16), half(rng, 0, 16));
    let (w, h) = (half(rng, 0, 3), half(rng, 0, 3));
    ScoredDetection::new(BBox::new(cx - w, cy - h, cx + w, cy + h), 0, score(rng))
}

fn center(d: &ScoredDetection) -> (f64, f64) {
    ((d.bbox.x_min + d.bbox.x_max) / 2.0, (d.bbox.y_min + d.bbox.y_max) / 2.0)
}

/// Mostly placed near the midpoint of a real human/object pair with a
/// roughly right vector, so acceptances and near misses are common.
fn candidate(rng: &mut impl Rng, humans: &[ScoredDetection], objects: &[ScoredDetection]) -> InteractionCandidate {
    let class_id = rng.random_range(0..3);
    let score = score(rng);
    if humans.is_empty() || objects.is_empty() || rng.random_bool(0.3) {
        return InteractionCandidate {
            class_id,
            pos: Point2::new(half(rng, 0, 16), half(rng, 0, 16)),
            score,
            vector: UnsignedVector::new(half(rng, 0, 6), half(rng, 0, 6)),
        };
    }
    let (hx, hy) = center(humans.choose(rng).unwrap());
    let (ox, oy) = center(objects.choose(rng).unwrap());
    let mut j = || rng.random_range(-2..=2) as f64 / 2.0;
    let (px, py) = ((hx + ox) / 2.0 + j(), (hy + oy) / 2.0 + j());
    let (vx, vy) = (((hx - ox) / 2.0).abs() + j(), ((hy - oy) / 2.0).abs() + j());
    InteractionCandidate { class_id, pos: Point2::new(px, py), score, vector: UnsignedVector::new(vx.abs(), vy.abs()) }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupingInstance {
    pub humans: Vec<ScoredDetection>,
    pub objects: Vec<ScoredDetection>,
    pub candidates: Vec<InteractionCandidate>,
    pub cfg: GroupingConfig,
}

/// Up to 5 humans, 5 objects and 5 candidates on a 16x16 half-cell lattice.
pub fn grouping_instance(rng: &mut impl Rng) -> GroupingInstance {
    let humans: Vec<ScoredDetection> = (0..rng.random_range(0..=5)).map(|_| detection(rng)).collect();
    let objects: Vec<ScoredDetection> = (0..rng.random_range(0..=5)).map(|_| detection(rng)).collect();
    let candidates = (0..rng.random_range(0..=5)).map(|_| candidate(rng, &humans, &objects)).collect();
    let no_object_classes = (0..3).filter(|_| rng.random_bool(0.2)).collect();
    let cfg = GroupingConfig {
        h_tau: *[0.0, 0.4, 0.5].choose(rng).unwrap(),
        o_tau: *[0.0, 0.1, 0.5].choose(rng).unwrap(),
        a_tau: *[0.0, 0.05, 0.1].choose(rng).unwrap(),
        d_tau: *[0.5, 1.0, 1.5, 2.0, 3.0, 5.0].choose(rng).unwrap(),
        angle_min: *[PI / 2.0, 5.0 * PI / 6.0, PI].choose(rng).unwrap(),
        ratio_max: *[1.0, 1.5, 2.0].choose(rng).unwrap(),
        mode: *GroupingMode::ALL.choose(rng).unwrap(),
        no_object_classes,
    };
    GroupingInstance { humans, objects, candidates, cfg }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalInstance {
    pub preds: Vec<HoiRecord>,
    pub gts: Vec<HoiRecord>,
    pub no_object_classes: Vec<usize>,
}

fn gt_box(rng: &mut impl Rng) -> BBox {
    let (x, y) = (rng.random_range(0..4) as f64 * 20.0, rng.random_range(0..4) as f64 * 20.0);
    BBox::new(x, y, x + 10.0, y + 10.0)
}

/// Shifts and stretches by up to 3 units: IoU with the source lands on both
/// sides of 0.5.
fn jitter(rng: &mut impl Rng, b: BBox) -> BBox {
    let mut d = || rng.random_range(-3..=3) as f64;
    let (dx, dy, dw, dh) = (d(), d(), d(), d());
    BBox::new(b.x_min + dx, b.y_min + dy, b.x_max + dx + dw.abs(), b.y_max + dy + dh.abs())
}

/// Up to 3 images, 4 ground-truth triplets and 6 predictions over 3 actions.
pub fn eval_instance(rng: &mut impl Rng) -> EvalInstance {
    let images = ["img-a", "img-b", "img-c"];
    let n_images = rng.random_range(1..=3);
    let no_object_classes: Vec<usize> = if rng.random_bool(0.3) { vec![2] } else { Vec::new() };
    let gts: Vec<HoiRecord> = (0..rng.random_range(1..=4))
        .map(|_| {
            let action = rng.random_range(0..3);
            HoiRecord {
                image_id: images[rng.random_range(0..n_images)].into(),
                action_id: action,
                human_box: gt_box(rng),
                object_box: (!no_object_classes.contains(&action)).then(|| gt_box(rng)),
                score: 1.0,
            }
        })
        .collect();
    let preds = (0..rng.random_range(0..=6))
        .map(|_| {
            let src = gts.choose(rng).unwrap().clone();
            let mut p = if rng.random_bool(0.7) {
                HoiRecord {
                    human_box: jitter(rng, src.human_box),
                    object_box: src.object_box.map(|b| jitter(rng, b)),
                    ..src
                }
            } else {
                HoiRecord { human_box: gt_box(rng), object_box: Some(gt_box(rng)), ..src }
            };
            if rng.random_bool(0.2) {
                p.action_id = rng.random_range(0..3);
            }
            if rng.random_bool(0.2) {
                p.image_id = images[rng.random_range(0..n_images)].into();
            }
            p.score = *[0.2, 0.5, 0.5, 0.8, 0.9].choose(rng).unwrap();
            p
        })
        .collect();
    EvalInstance { preds, gts, no_object_classes }
}

/// Copies `cands` with Gaussian noise of standard deviation `sigma` added to
/// both vector components (absolute value taken afterwards).
pub fn noisy_vectors(rng: &mut impl Rng, cands: &[InteractionCandidate], sigma: f64) -> Vec<InteractionCandidate> {
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    cands
        .iter()
        .map(|c| {
            let vx = (c.vector.vx_abs + normal.sample(rng)).abs();
            let vy = (c.vector.vy_abs + normal.sample(rng)).abs();
            InteractionCandidate { vector: UnsignedVector::new(vx, vy), ..*c }
        })
        .collect()
}

/// Grouping benchmark input: `n_humans` x `n_objects` x `n_candidates` on a
/// 128x128 grid. `dense` stacks every box around the grid center and gives
/// every candidate a wide vector there, so every combination passes both
/// overlap tests and reaches the corner-distance test.
pub fn bench_instance(
    rng: &mut impl Rng,
    n_humans: usize,
    n_objects: usize,
    n_candidates: usize,
    dense: bool,
) -> (Vec<ScoredDetection>, Vec<ScoredDetection>, Vec<InteractionCandidate>) {
    let det = |rng: &mut dyn rand::RngCore| {
        let (x, y) = if dense {
            (rng.random_range(60.0..68.0), rng.random_range(60.0..68.0))
        } else {
            (rng.random_range(4.0..124.0), rng.random_range(4.0..124.0))
        };
        let (w, h) = (rng.random_range(1.0..8.0), rng.random_range(1.0..8.0));
        ScoredDetection::new(BBox::new(x - w, y - h, x + w, y + h), 0, rng.random_range(0.5..1.0))
    };
    let humans = (0..n_humans).map(|_| det(rng)).collect();
    let objects = (0..n_objects).map(|_| det(rng)).collect();
    let candidates = (0..n_candidates)
        .map(|_| {
            let (pos, vector) = if dense {
                (Point2::new(64.0, 64.0), UnsignedVector::new(30.0, 30.0))
            } else {
                (
                    Point2::new(rng.random_range(0.0..128.0), rng.random_range(0.0..128.0)),
                    UnsignedVector::new(rng.random_range(0.0..30.0), rng.random_range(0.0..30.0)),
                )
            };
            InteractionCandidate { class_id: rng.random_range(0..10), pos, score: rng.random_range(0.1..1.0), vector }
        })
        .collect();
    (humans, objects, candidates)
}
