//! Ground-truth encoding into Gaussian interaction-point heatmaps and unsigned
//! vector fields, and decoding of heatmap peaks back into candidates.
//!
//! Layouts are row-major with the slowest dimension first: heatmaps are
//! `C x H x W`, vector fields `2 x H x W` (channel 0 = `|v_x|`, 1 = `|v_y|`).

use crate::error::{Error, Result};
use crate::geometry::{Point2, UnsignedVector};
use crate::hoi::InteractionSource;

pub const DEFAULT_SIGMA: f64 = 2.0;
pub const DEFAULT_TOP_K: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassHeatmap {
    classes: usize,
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl ClassHeatmap {
    pub fn zeros(classes: usize, height: usize, width: usize) -> Self {
        Self { classes, height, width, values: vec![0.0; classes * height * width] }
    }

    pub fn from_vec(classes: usize, height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != classes * height * width {
            return Err(Error::ShapeMismatch { expected: vec![classes * height * width], found: vec![values.len()] });
        }
        Ok(Self { classes, height, width, values })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.classes, self.height, self.width]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn index(&self, class: usize, y: usize, x: usize) -> usize {
        (class * self.height + y) * self.width + x
    }

    pub fn get(&self, class: usize, y: usize, x: usize) -> f64 {
        self.values[self.index(class, y, x)]
    }

    pub fn set(&mut self, class: usize, y: usize, x: usize, v: f64) {
        let i = self.index(class, y, x);
        self.values[i] = v;
    }

    pub fn channel(&self, class: usize) -> &[f64] {
        let n = self.height * self.width;
        &self.values[class * n..(class + 1) * n]
    }

    /// Applies [`center_pool`] to every class channel.
    pub fn center_pooled(&self) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for c in 0..self.classes {
            values.extend(center_pool(self.channel(c), self.height, self.width));
        }
        Self { values, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    height: usize,
    width: usize,
    values: Vec<f64>,
}

impl VectorField {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self { height, width, values: vec![0.0; 2 * height * width] }
    }

    pub fn from_vec(height: usize, width: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != 2 * height * width {
            return Err(Error::ShapeMismatch { expected: vec![2 * height * width], found: vec![values.len()] });
        }
        Ok(Self { height, width, values })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Flat indices of the `|v_x|` and `|v_y|` entries of a cell.
    #[inline]
    pub fn indices(&self, y: usize, x: usize) -> (usize, usize) {
        let cell = y * self.width + x;
        (cell, self.height * self.width + cell)
    }

    pub fn get(&self, y: usize, x: usize) -> UnsignedVector {
        let (ix, iy) = self.indices(y, x);
        UnsignedVector::new(self.values[ix], self.values[iy])
    }

    pub fn set(&mut self, y: usize, x: usize, v: UnsignedVector) {
        let (ix, iy) = self.indices(y, x);
        self.values[ix] = v.vx_abs;
        self.values[iy] = v.vy_abs;
    }
}

/// Vector targets with the set of cells that carry supervision.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedVectors {
    pub field: VectorField,
    /// `H x W`, true where a target was written.
    pub mask: Vec<bool>,
}

impl EncodedVectors {
    /// Supervised cells `(y, x)` with their targets, in row-major order.
    pub fn targets(&self) -> Vec<((usize, usize), UnsignedVector)> {
        let w = self.field.width;
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| {
                let (y, x) = (i / w, i % w);
                ((y, x), self.field.get(y, x))
            })
            .collect()
    }
}

/// Decoded heatmap peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionCandidate {
    pub class_id: usize,
    pub pos: Point2,
    pub score: f64,
    pub vector: UnsignedVector,
}

/// Nearest grid cell of a point, or an out-of-bounds error naming `index`.
fn grid_cell(p: Point2, index: usize, height: usize, width: usize) -> Result<(usize, usize)> {
    let (x, y) = (p.x.round(), p.y.round());
    if !p.is_finite() || x < 0.0 || y < 0.0 || x >= width as f64 || y >= height as f64 {
        let clamp = |v: f64| if v.is_finite() { v as i64 } else { i64::MIN };
        return Err(Error::OutOfBounds { index, x: clamp(x), y: clamp(y), width, height });
    }
    Ok((y as usize, x as usize))
}

/// Splats an unnormalized Gaussian at every triplet's rounded interaction
/// point on its action channel. Overlaps combine by element-wise max, so the
/// map stays in `[0, 1]` with exactly 1.0 at each peak cell.
pub fn encode_points<T: InteractionSource>(
    triplets: &[T],
    classes: usize,
    height: usize,
    width: usize,
    sigma: f64,
) -> Result<ClassHeatmap> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be positive, got {sigma}")));
    }
    let mut hm = ClassHeatmap::zeros(classes, height, width);
    let denom = 2.0 * sigma * sigma;
    for (i, t) in triplets.iter().enumerate() {
        let class = t.action_id();
        if class >= classes {
            return Err(Error::ClassOutOfRange { class_id: class, num_classes: classes });
        }
        let (cy, cx) = grid_cell(t.point(), i, height, width)?;
        let base = class * height * width;
        for y in 0..height {
            let dy = y as f64 - cy as f64;
            let row = &mut hm.values[base + y * width..base + (y + 1) * width];
            for (x, cell) in row.iter_mut().enumerate() {
                let dx = x as f64 - cx as f64;
                let g = (-(dx * dx + dy * dy) / denom).exp();
                if g > *cell {
                    *cell = g;
                }
            }
        }
    }
    Ok(hm)
}

/// Writes `(|h_x - p_x|, |h_y - p_y|)` at each triplet's rounded interaction
/// point. Two triplets landing on the same cell is an error.
pub fn encode_vectors<T: InteractionSource>(triplets: &[T], height: usize, width: usize) -> Result<EncodedVectors> {
    let mut field = VectorField::zeros(height, width);
    let mut owner: Vec<Option<usize>> = vec![None; height * width];
    for (i, t) in triplets.iter().enumerate() {
        let (y, x) = grid_cell(t.point(), i, height, width)?;
        let slot = &mut owner[y * width + x];
        if let Some(first) = *slot {
            return Err(Error::VectorCollision { first, second: i, x, y });
        }
        *slot = Some(i);
        field.set(y, x, t.vector());
    }
    let mask = owner.into_iter().map(|o| o.is_some()).collect();
    Ok(EncodedVectors { field, mask })
}

/// `out(x, y) = max(row y) + max(column x)` over a single `H x W` channel.
pub fn center_pool(map: &[f64], height: usize, width: usize) -> Vec<f64> {
    assert_eq!(map.len(), height * width, "center_pool: map is not {height}x{width}");
    let row_max: Vec<f64> =
        map.chunks_exact(width.max(1)).map(|r| r.iter().copied().fold(f64::NEG_INFINITY, f64::max)).collect();
    let mut col_max = vec![f64::NEG_INFINITY; width];
    for row in map.chunks_exact(width.max(1)) {
        for (m, &v) in col_max.iter_mut().zip(row) {
            *m = m.max(v);
        }
    }
    let mut out = Vec::with_capacity(map.len());
    for rm in &row_max {
        out.extend(col_max.iter().map(|cm| rm + cm));
    }
    out
}

fn is_local_max(channel: &[f64], height: usize, width: usize, y: usize, x: usize) -> bool {
    let v = channel[y * width + x];
    let (y0, y1) = (y.saturating_sub(1), (y + 1).min(height - 1));
    let (x0, x1) = (x.saturating_sub(1), (x + 1).min(width - 1));
    for ny in y0..=y1 {
        for nx in x0..=x1 {
            if channel[ny * width + nx] > v {
                return false;
            }
        }
    }
    true
}

/// Extracts up to `k` peaks.
///
/// A cell is a peak when it is `>=` all 8 neighbours in its class channel and
/// carries a positive response. Peaks below their class floor are dropped; the
/// rest are ordered by (score desc, class, y, x) and truncated to `k`.
pub fn decode_peaks(
    hm: &ClassHeatmap,
    k: usize,
    thresholds: &[f64],
    vf: &VectorField,
) -> Result<Vec<InteractionCandidate>> {
    if thresholds.len() != hm.classes {
        return Err(Error::ShapeMismatch { expected: vec![hm.classes], found: vec![thresholds.len()] });
    }
    if vf.height != hm.height || vf.width != hm.width {
        return Err(Error::ShapeMismatch { expected: vec![2, hm.height, hm.width], found: vec![2, vf.height, vf.width] });
    }
    if k == 0 {
        return Ok(Vec::new());
    }
    let (h, w) = (hm.height, hm.width);
    let mut peaks = Vec::new();
    for (class, &floor) in thresholds.iter().enumerate() {
        let channel = hm.channel(class);
        for y in 0..h {
            for x in 0..w {
                let score = channel[y * w + x];
                if score > 0.0 && score >= floor && is_local_max(channel, h, w, y, x) {
                    peaks.push((score, class, y, x));
                }
            }
        }
    }
    peaks.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)).then(a.3.cmp(&b.3)));
    peaks.truncate(k);
    Ok(peaks
        .into_iter()
        .map(|(score, class_id, y, x)| InteractionCandidate {
            class_id,
            pos: Point2::new(x as f64, y as f64),
            score,
            vector: vf.get(y, x),
        })
        .collect())
}

/// Per-class score floors: classes with fewer than `cutoff` training samples
/// get `t_low`, the rest `t_high`. Monotone in the count when
/// `t_low <= t_high`.
pub fn dynamic_thresholds(train_counts: &[u64], t_low: f64, t_high: f64, cutoff: u64) -> Vec<f64> {
    debug_assert!(t_low <= t_high);
    train_counts.iter().map(|&c| if c < cutoff { t_low } else { t_high }).collect()
}
