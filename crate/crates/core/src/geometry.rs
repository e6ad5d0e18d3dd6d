//! Grid-space geometry: points, boxes, IoU and the interaction / reference
//! box constructions used by grouping.
//!
//! Every coordinate here is in heatmap-grid units (image pixels divided by the
//! stride). Conversion from image space happens once, at ingestion.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn distance(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Component-wise mean of two points; the interaction point of a
/// human/object pair is the midpoint of their box centers.
pub fn midpoint(h: Point2, o: Point2) -> Point2 {
    Point2::new((h.x + o.x) / 2.0, (h.y + o.y) / 2.0)
}

/// Interaction vector stored without sign: `(|v_x|, |v_y|)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnsignedVector {
    pub vx_abs: f64,
    pub vy_abs: f64,
}

impl UnsignedVector {
    pub fn new(vx_abs: f64, vy_abs: f64) -> Self {
        Self { vx_abs, vy_abs }
    }

    /// Unsigned displacement from `p` to `h`.
    pub fn between(p: Point2, h: Point2) -> Self {
        Self::new((h.x - p.x).abs(), (h.y - p.y).abs())
    }

    pub fn is_valid(&self) -> bool {
        self.vx_abs.is_finite() && self.vy_abs.is_finite() && self.vx_abs >= 0.0 && self.vy_abs >= 0.0
    }
}

/// Axis-aligned box `[x_min, y_min, x_max, y_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl BBox {
    pub const fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Self {
        Self { x_min, y_min, x_max, y_max }
    }

    /// Returns `None` unless all coordinates are finite and ordered.
    pub fn try_new(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Option<Self> {
        let b = Self::new(x_min, y_min, x_max, y_max);
        b.is_valid().then_some(b)
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x_min, self.y_min, self.x_max, self.y_max]
    }

    pub fn is_valid(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite()) && self.x_min <= self.x_max && self.y_min <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> Point2 {
        Point2::new((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)
    }

    /// Closed containment test.
    pub fn contains(&self, p: Point2) -> bool {
        p.x >= self.x_min && p.x <= self.x_max && p.y >= self.y_min && p.y <= self.y_max
    }

    pub fn scale(&self, factor: f64) -> Self {
        Self::new(self.x_min * factor, self.y_min * factor, self.x_max * factor, self.y_max * factor)
    }

    /// Grows the box by `margin` on every side.
    pub fn expand(&self, margin: f64) -> Self {
        Self::new(self.x_min - margin, self.y_min - margin, self.x_max + margin, self.y_max + margin)
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x_max.min(other.x_max) - self.x_min.max(other.x_min);
        let h = self.y_max.min(other.y_max) - self.y_min.max(other.y_min);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    pub fn corners(&self) -> CornerSet {
        CornerSet {
            tl: Point2::new(self.x_min, self.y_min),
            tr: Point2::new(self.x_max, self.y_min),
            bl: Point2::new(self.x_min, self.y_max),
            br: Point2::new(self.x_max, self.y_max),
        }
    }
}

/// Intersection over union.
///
/// Two identical zero-area boxes have IoU 1; any other pair whose union has
/// zero area has IoU 0.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return if a == b { 1.0 } else { 0.0 };
    }
    (inter / union).clamp(0.0, 1.0)
}

/// Corners of an axis-aligned rectangle in canonical order: `tl` is the
/// min-x/min-y corner and `br` the max-x/max-y corner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerSet {
    pub tl: Point2,
    pub tr: Point2,
    pub bl: Point2,
    pub br: Point2,
}

impl CornerSet {
    pub fn bbox(&self) -> BBox {
        BBox::new(self.tl.x, self.tl.y, self.br.x, self.br.y)
    }

    pub fn as_array(&self) -> [Point2; 4] {
        [self.tl, self.tr, self.bl, self.br]
    }

    pub fn translate(&self, dx: f64, dy: f64) -> Self {
        let t = |p: Point2| Point2::new(p.x + dx, p.y + dy);
        Self { tl: t(self.tl), tr: t(self.tr), bl: t(self.bl), br: t(self.br) }
    }
}

/// The four candidate human locations `p ± v` as a rectangle.
pub fn interaction_box(p: Point2, v: UnsignedVector) -> CornerSet {
    BBox::new(p.x - v.vx_abs, p.y - v.vy_abs, p.x + v.vx_abs, p.y + v.vy_abs).corners()
}

/// Rectangle whose opposite corners are the human and object centers.
pub fn reference_box(h_center: Point2, o_center: Point2) -> CornerSet {
    BBox::new(
        h_center.x.min(o_center.x),
        h_center.y.min(o_center.y),
        h_center.x.max(o_center.x),
        h_center.y.max(o_center.y),
    )
    .corners()
}

/// Euclidean distances between corresponding corners, ordered
/// `(tl, tr, bl, br)`.
pub fn corner_distances(a: &CornerSet, b: &CornerSet) -> [f64; 4] {
    [a.tl.distance(&b.tl), a.tr.distance(&b.tr), a.bl.distance(&b.bl), a.br.distance(&b.br)]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(c: &CornerSet) -> [(f64, f64); 4] {
        c.as_array().map(|p| (p.x, p.y))
    }

    #[test]
    fn midpoint_examples() {
        assert_eq!(midpoint(Point2::new(10.0, 6.0), Point2::new(2.0, 2.0)), Point2::new(6.0, 4.0));
        assert_eq!(midpoint(Point2::new(5.0, 5.0), Point2::new(5.0, 5.0)), Point2::new(5.0, 5.0));
        assert_eq!(midpoint(Point2::new(0.0, 0.0), Point2::new(7.0, 3.0)), Point2::new(3.5, 1.5));
    }

    #[test]
    fn interaction_box_examples() {
        let c = interaction_box(Point2::new(6.0, 4.0), UnsignedVector::new(4.0, 2.0));
        assert_eq!(pts(&c), [(2.0, 2.0), (10.0, 2.0), (2.0, 6.0), (10.0, 6.0)]);

        let c = interaction_box(Point2::new(3.0, 3.0), UnsignedVector::new(0.0, 0.0));
        assert_eq!(pts(&c), [(3.0, 3.0); 4]);

        let c = interaction_box(Point2::new(4.0, 2.0), UnsignedVector::new(4.0, 0.0));
        assert_eq!(pts(&c), [(0.0, 2.0), (8.0, 2.0), (0.0, 2.0), (8.0, 2.0)]);
    }

    #[test]
    fn reference_box_examples() {
        let expected = [(2.0, 2.0), (10.0, 2.0), (2.0, 6.0), (10.0, 6.0)];
        assert_eq!(pts(&reference_box(Point2::new(10.0, 6.0), Point2::new(2.0, 2.0))), expected);
        assert_eq!(pts(&reference_box(Point2::new(2.0, 2.0), Point2::new(10.0, 6.0))), expected);
        assert_eq!(
            pts(&reference_box(Point2::new(5.0, 1.0), Point2::new(5.0, 9.0))),
            [(5.0, 1.0), (5.0, 1.0), (5.0, 9.0), (5.0, 9.0)]
        );
    }

    #[test]
    fn iou_examples() {
        let a = BBox::new(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&a, &a), 1.0);
        // inter = 1, union = 4 + 4 - 1
        assert!((iou(&a, &BBox::new(1.0, 1.0, 3.0, 3.0)) - 1.0 / 7.0).abs() < 1e-15);
        assert_eq!(iou(&BBox::new(0.0, 0.0, 1.0, 1.0), &BBox::new(5.0, 5.0, 6.0, 6.0)), 0.0);
    }

    #[test]
    fn iou_degenerate_boxes() {
        let line = BBox::new(0.0, 2.0, 8.0, 2.0);
        assert_eq!(iou(&line, &line), 1.0);
        assert_eq!(iou(&line, &BBox::new(0.0, 3.0, 8.0, 3.0)), 0.0);
        assert_eq!(iou(&line, &BBox::new(0.0, 0.0, 8.0, 4.0)), 0.0);
        // edge-touching boxes do not overlap
        assert_eq!(iou(&BBox::new(0.0, 0.0, 1.0, 1.0), &BBox::new(1.0, 0.0, 2.0, 1.0)), 0.0);
    }

    #[test]
    fn corner_distance_examples() {
        let a = BBox::new(2.0, 2.0, 10.0, 6.0).corners();
        assert_eq!(corner_distances(&a, &a), [0.0; 4]);

        let mut b = a;
        b.tl = Point2::new(5.0, 6.0);
        assert_eq!(corner_distances(&a, &b), [5.0, 0.0, 0.0, 0.0]);

        assert_eq!(corner_distances(&a.translate(1.0, 0.0), &a), [1.0; 4]);
    }

    #[test]
    fn try_new_rejects_bad_boxes() {
        assert!(BBox::try_new(0.0, 0.0, 1.0, 1.0).is_some());
        assert!(BBox::try_new(2.0, 0.0, 1.0, 1.0).is_none());
        assert!(BBox::try_new(0.0, f64::NAN, 1.0, 1.0).is_none());
    }

    fn coord() -> impl Strategy<Value = f64> {
        -100.0..100.0f64
    }

    fn bbox() -> impl Strategy<Value = BBox> {
        (coord(), coord(), 0.0..50.0f64, 0.0..50.0f64).prop_map(|(x, y, w, h)| BBox::new(x, y, x + w, y + h))
    }

    proptest! {
        #[test]
        fn interaction_box_is_centered(px in coord(), py in coord(), vx in 0.0..40.0f64, vy in 0.0..40.0f64) {
            let p = Point2::new(px, py);
            let c = interaction_box(p, UnsignedVector::new(vx, vy));
            let mx = c.as_array().iter().map(|q| q.x).sum::<f64>() / 4.0;
            let my = c.as_array().iter().map(|q| q.y).sum::<f64>() / 4.0;
            prop_assert!((mx - px).abs() < 1e-9 && (my - py).abs() < 1e-9);
        }

        #[test]
        fn perfect_prediction_boxes_coincide(hx in coord(), hy in coord(), ox in coord(), oy in coord()) {
            let h = Point2::new(hx, hy);
            let o = Point2::new(ox, oy);
            let p = midpoint(h, o);
            let v = UnsignedVector::between(p, h);
            let d = corner_distances(&interaction_box(p, v), &reference_box(h, o));
            for di in d {
                prop_assert!(di < 1e-9);
            }
        }

        #[test]
        fn iou_symmetric_and_bounded(a in bbox(), b in bbox()) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
        }

        #[test]
        fn reference_box_swap_invariant(hx in coord(), hy in coord(), ox in coord(), oy in coord()) {
            let h = Point2::new(hx, hy);
            let o = Point2::new(ox, oy);
            prop_assert_eq!(reference_box(h, o), reference_box(o, h));
        }

        #[test]
        fn corner_distances_translation_invariant(a in bbox(), b in bbox(), dx in -8i32..8, dy in -8i32..8) {
            let (ca, cb) = (a.corners(), b.corners());
            let before = corner_distances(&ca, &cb);
            let after = corner_distances(&ca.translate(dx as f64, dy as f64), &cb.translate(dx as f64, dy as f64));
            for (x, y) in before.iter().zip(after) {
                prop_assert!(*x >= 0.0);
                prop_assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
