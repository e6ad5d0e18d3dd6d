//! Deterministic synthetic scenes with perfect targets.

use std::collections::BTreeSet;

use hoi_points::heatmap::{encode_points, encode_vectors, EncodedVectors, DEFAULT_SIGMA};
use hoi_points::{
    BBox, ClassHeatmap, GroupingConfig, HoiRecord, InteractionCandidate, InteractionSource, InteractionTriplet,
    ScoredDetection,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::oracle_group;

/// Full scene redraws before giving up.
pub const MAX_ATTEMPTS: usize = 2_000;
/// Placement tries per distractor.
const DISTRACTOR_TRIES: usize = 1_000;
/// Interaction points must be further apart than this, in cells.
pub const MIN_POINT_SEPARATION: f64 = 2.0;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("could not place {triplets} interaction points on a {height}x{width} grid after {attempts} attempts")]
    Packing { triplets: usize, height: usize, width: usize, attempts: usize },
    #[error("could not place distractor {index} clear of every interaction box")]
    Distractor { index: usize },
    #[error("scene needs at least one human, object and action when any triplet is requested")]
    Empty,
    #[error(transparent)]
    Encode(#[from] hoi_points::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    pub n_humans: usize,
    pub n_objects: usize,
    pub n_actions: usize,
    pub distractors: usize,
    pub sigma: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self { height: 64, width: 64, n_humans: 1, n_objects: 1, n_actions: 1, distractors: 0, sigma: DEFAULT_SIGMA }
    }
}

/// Ground-truth pairing by detection index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GtPair {
    pub human: usize,
    pub object: usize,
    pub action: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub num_actions: usize,
    pub triplets: Vec<InteractionTriplet>,
    pub pairs: Vec<GtPair>,
    /// Perfect detections (score 1.0) first, then human distractors.
    pub humans: Vec<ScoredDetection>,
    /// Perfect detections (score 1.0) first, then object distractors.
    pub objects: Vec<ScoredDetection>,
    pub n_perfect_humans: usize,
    pub n_perfect_objects: usize,
    pub heatmap: ClassHeatmap,
    pub vectors: EncodedVectors,
}

impl SceneBundle {
    /// Candidates exactly at every ground-truth point with score 1.
    pub fn perfect_candidates(&self) -> Vec<InteractionCandidate> {
        self.triplets
            .iter()
            .map(|t| InteractionCandidate { class_id: t.action_id, pos: t.point, score: 1.0, vector: t.vector })
            .collect()
    }

    /// Ground truth in image space.
    pub fn gt_records(&self, image_id: &str, stride: f64) -> Vec<HoiRecord> {
        self.triplets.iter().map(|t| HoiRecord::from_triplet(image_id, t).scaled(stride)).collect()
    }

    pub fn distractors(&self) -> impl Iterator<Item = &ScoredDetection> {
        self.humans[self.n_perfect_humans..].iter().chain(&self.objects[self.n_perfect_objects..])
    }
}

/// Uniform even integer in `[lo, hi]`.
fn even_in(rng: &mut ChaCha8Rng, lo: i64, hi: i64) -> Option<i64> {
    let (lo, hi) = ((lo + 1).div_euclid(2), hi.div_euclid(2));
    (lo <= hi).then(|| 2 * rng.random_range(lo..=hi))
}

/// Box with integer half-extents 1..=2 around an even-coordinate center,
/// fully inside `[0, w-1] x [0, h-1]`.
fn random_box(rng: &mut ChaCha8Rng, height: usize, width: usize) -> Option<BBox> {
    let hx = rng.random_range(1..=2) as i64;
    let hy = rng.random_range(1..=2) as i64;
    let cx = even_in(rng, hx, width as i64 - 1 - hx)?;
    let cy = even_in(rng, hy, height as i64 - 1 - hy)?;
    Some(BBox::new((cx - hx) as f64, (cy - hy) as f64, (cx + hx) as f64, (cy + hy) as f64))
}

fn perfect(bbox: BBox) -> ScoredDetection {
    ScoredDetection::new(bbox, 0, 1.0)
}

/// Human `i` pairs with object `i mod n_objects`; objects left over pair
/// with random humans. Every (human, object) pair appears once.
fn draw_pairs(rng: &mut ChaCha8Rng, spec: &SceneSpec) -> Vec<GtPair> {
    let mut pairs: Vec<GtPair> = (0..spec.n_humans)
        .map(|h| GtPair { human: h, object: h % spec.n_objects, action: rng.random_range(0..spec.n_actions) })
        .collect();
    for o in spec.n_humans..spec.n_objects {
        pairs.push(GtPair { human: rng.random_range(0..spec.n_humans), object: o, action: rng.random_range(0..spec.n_actions) });
    }
    pairs
}

fn separated(triplets: &[InteractionTriplet]) -> bool {
    triplets.iter().enumerate().all(|(i, a)| {
        triplets[i + 1..].iter().all(|b| {
            let (dx, dy) = (a.point.x - b.point.x, a.point.y - b.point.y);
            (dx * dx + dy * dy).sqrt() > MIN_POINT_SEPARATION
        })
    })
}

/// Grouping the perfect candidates with zero score floors must give back
/// exactly the ground-truth pairs.
fn groups_exactly(humans: &[ScoredDetection], objects: &[ScoredDetection], triplets: &[InteractionTriplet], pairs: &[GtPair]) -> bool {
    let cfg = GroupingConfig { h_tau: 0.0, o_tau: 0.0, a_tau: 0.0, ..Default::default() };
    let cands: Vec<InteractionCandidate> = triplets
        .iter()
        .map(|t| InteractionCandidate { class_id: t.action_id, pos: t.point, score: 1.0, vector: t.vector })
        .collect();
    let grouped = oracle_group(humans, objects, &cands, &cfg);
    let got: BTreeSet<GtPair> = grouped
        .iter()
        .filter_map(|t| t.object.map(|o| GtPair { human: t.human, object: o, action: t.action }))
        .collect();
    let want: BTreeSet<GtPair> = pairs.iter().copied().collect();
    got.len() == grouped.len() && got == want
}

fn clear_of(b: &BBox, triplets: &[InteractionTriplet]) -> bool {
    triplets.iter().all(|t| {
        let (p, v) = (t.point(), t.vector());
        let r = BBox::new(p.x - v.vx_abs - 0.5, p.y - v.vy_abs - 0.5, p.x + v.vx_abs + 0.5, p.y + v.vy_abs + 0.5);
        b.intersection_area(&r) == 0.0
    })
}

/// Draws a scene from `seed`. Box centers sit on even cells so every
/// interaction point and vector is integral and survives the grid round trip
/// unchanged.
pub fn synth_scene(seed: u64, spec: &SceneSpec) -> Result<SceneBundle, SynthError> {
    let wants_triplets = spec.n_humans > 0 || spec.n_objects > 0;
    if wants_triplets && (spec.n_humans == 0 || spec.n_objects == 0 || spec.n_actions == 0) {
        return Err(SynthError::Empty);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (h, w) = (spec.height, spec.width);
    let mut accepted = None;
    for _ in 0..MAX_ATTEMPTS {
        let boxes: Option<Vec<BBox>> = (0..spec.n_humans + spec.n_objects).map(|_| random_box(&mut rng, h, w)).collect();
        let Some(boxes) = boxes else { break };
        let humans: Vec<ScoredDetection> = boxes[..spec.n_humans].iter().copied().map(perfect).collect();
        let objects: Vec<ScoredDetection> = boxes[spec.n_humans..].iter().copied().map(perfect).collect();
        let pairs = if wants_triplets { draw_pairs(&mut rng, spec) } else { Vec::new() };
        let triplets: Vec<InteractionTriplet> = pairs
            .iter()
            .map(|p| InteractionTriplet::from_pair(p.action, humans[p.human], Some(objects[p.object]), 1.0))
            .collect();
        if separated(&triplets) && groups_exactly(&humans, &objects, &triplets, &pairs) {
            accepted = Some((humans, objects, pairs, triplets));
            break;
        }
    }
    let Some((mut humans, mut objects, pairs, triplets)) = accepted else {
        return Err(SynthError::Packing { triplets: spec.n_humans.max(spec.n_objects), height: h, width: w, attempts: MAX_ATTEMPTS });
    };

    let (n_perfect_humans, n_perfect_objects) = (humans.len(), objects.len());
    for index in 0..spec.distractors {
        let placed = (0..DISTRACTOR_TRIES)
            .filter_map(|_| random_box(&mut rng, h, w))
            .find(|b| clear_of(b, &triplets))
            .ok_or(SynthError::Distractor { index })?;
        let det = ScoredDetection::new(placed, 0, rng.random_range(0.5..=1.0));
        if index % 2 == 0 {
            objects.push(det);
        } else {
            humans.push(det);
        }
    }

    let heatmap = encode_points(&triplets, spec.n_actions, h, w, spec.sigma)?;
    let vectors = encode_vectors(&triplets, h, w)?;
    Ok(SceneBundle {
        seed,
        height: h,
        width: w,
        num_actions: spec.n_actions,
        triplets,
        pairs,
        humans,
        objects,
        n_perfect_humans,
        n_perfect_objects,
        heatmap,
        vectors,
    })
}
