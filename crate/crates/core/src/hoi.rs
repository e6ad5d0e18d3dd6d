//! Detections and interaction triplets shared by codec, grouping and
//! evaluation.

use crate::geometry::{midpoint, BBox, Point2, UnsignedVector};

/// A human or object box from an upstream detector, in grid units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredDetection {
    pub bbox: BBox,
    pub class_id: usize,
    pub score: f64,
}

impl ScoredDetection {
    pub fn new(bbox: BBox, class_id: usize, score: f64) -> Self {
        Self { bbox, class_id, score }
    }

    pub fn center(&self) -> Point2 {
        self.bbox.center()
    }
}

/// One `<human, action, object>` instance. `object` is `None` for actions
/// without an interaction object.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionTriplet {
    pub action_id: usize,
    pub human: ScoredDetection,
    pub object: Option<ScoredDetection>,
    pub score: f64,
    pub point: Point2,
    pub vector: UnsignedVector,
}

impl InteractionTriplet {
    /// Builds a triplet whose point and vector follow from the box centers.
    pub fn from_pair(action_id: usize, human: ScoredDetection, object: Option<ScoredDetection>, score: f64) -> Self {
        let h = human.center();
        let point = interaction_point(h, object.map(|o| o.center()));
        Self { action_id, human, object, score, point, vector: UnsignedVector::between(point, h) }
    }
}

/// Midpoint of the two centers, or the human center when there is no object.
pub fn interaction_point(human_center: Point2, object_center: Option<Point2>) -> Point2 {
    match object_center {
        Some(o) => midpoint(human_center, o),
        None => human_center,
    }
}

/// Anything that can be encoded into interaction-point targets.
pub trait InteractionSource {
    fn action_id(&self) -> usize;
    fn human_box(&self) -> BBox;
    fn object_box(&self) -> Option<BBox>;

    fn point(&self) -> Point2 {
        interaction_point(self.human_box().center(), self.object_box().map(|b| b.center()))
    }

    fn vector(&self) -> UnsignedVector {
        UnsignedVector::between(self.point(), self.human_box().center())
    }
}

impl InteractionSource for InteractionTriplet {
    fn action_id(&self) -> usize {
        self.action_id
    }

    fn human_box(&self) -> BBox {
        self.human.bbox
    }

    fn object_box(&self) -> Option<BBox> {
        self.object.map(|o| o.bbox)
    }
}

/// Flat, image-keyed triplet as stored in triplet and ground-truth files.
#[derive(Debug, Clone, PartialEq)]
pub struct HoiRecord {
    pub image_id: String,
    pub action_id: usize,
    pub human_box: BBox,
    pub object_box: Option<BBox>,
    pub score: f64,
}

impl HoiRecord {
    pub fn from_triplet(image_id: impl Into<String>, t: &InteractionTriplet) -> Self {
        Self {
            image_id: image_id.into(),
            action_id: t.action_id,
            human_box: t.human.bbox,
            object_box: t.object.map(|o| o.bbox),
            score: t.score,
        }
    }

    /// Same record with boxes multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            human_box: self.human_box.scale(factor),
            object_box: self.object_box.map(|b| b.scale(factor)),
            ..self.clone()
        }
    }
}

impl InteractionSource for HoiRecord {
    fn action_id(&self) -> usize {
        self.action_id
    }

    fn human_box(&self) -> BBox {
        self.human_box
    }

    fn object_box(&self) -> Option<BBox> {
        self.object_box
    }
}
