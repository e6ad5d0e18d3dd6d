//! Line-delimited JSON records.
//!
//! Triplet and ground-truth files hold one object per line, fields in this
//! order:
//!
//! ```text
//! {"image_id":"0001","action_id":3,"human_box":[8.0,8.0,40.0,96.0],"object_box":[44.0,60.0,80.0,90.0],"score":0.912345678}
//! ```
//!
//! `object_box` is omitted for actions without an object. `score` is rounded
//! to 9 significant digits on write and optional in ground-truth files.
//! Boxes are image-space `[x1, y1, x2, y2]`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Point2, UnsignedVector};
use crate::heatmap::InteractionCandidate;
use crate::hoi::{HoiRecord, ScoredDetection};

/// Rounds to 9 significant digits. Idempotent, so re-serializing a parsed
/// score reproduces the same text.
pub fn round_score(score: f64) -> f64 {
    if score == 0.0 || !score.is_finite() {
        return score;
    }
    format!("{score:.8e}").parse().unwrap_or(score)
}

fn schema(line: usize, field: &str, message: impl Into<String>) -> Error {
    Error::Schema { line, field: field.into(), message: message.into() }
}

fn parse_object(line_no: usize, line: &str) -> Result<Map<String, Value>> {
    match serde_json::from_str::<Value>(line) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => Err(schema(line_no, "<record>", "expected a JSON object")),
        Err(e) => Err(schema(line_no, "<record>", e.to_string())),
    }
}

fn reject_unknown(line: usize, obj: &Map<String, Value>, known: &[&str]) -> Result<()> {
    match obj.keys().find(|k| !known.contains(&k.as_str())) {
        Some(k) => Err(schema(line, k, "unknown field")),
        None => Ok(()),
    }
}

fn get_str(line: usize, obj: &Map<String, Value>, field: &str) -> Result<String> {
    match obj.get(field) {
        Some(Value::String(s)) => Ok(s.clone()),
        Some(_) => Err(schema(line, field, "expected a string")),
        None => Err(schema(line, field, "missing")),
    }
}

fn get_index(line: usize, obj: &Map<String, Value>, field: &str) -> Result<usize> {
    match obj.get(field) {
        Some(v) => v.as_u64().map(|n| n as usize).ok_or_else(|| schema(line, field, "expected a non-negative integer")),
        None => Err(schema(line, field, "missing")),
    }
}

fn get_f64(line: usize, obj: &Map<String, Value>, field: &str) -> Result<Option<f64>> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(v) => v.as_f64().map(Some).ok_or_else(|| schema(line, field, "expected a number")),
    }
}

fn get_box(line: usize, obj: &Map<String, Value>, field: &str) -> Result<Option<BBox>> {
    let arr = match obj.get(field) {
        None | Some(Value::Null) => return Ok(None),
        Some(Value::Array(a)) if a.len() == 4 => a,
        Some(_) => return Err(schema(line, field, "expected [x1, y1, x2, y2]")),
    };
    let mut c = [0.0; 4];
    for (slot, v) in c.iter_mut().zip(arr) {
        *slot = v.as_f64().ok_or_else(|| schema(line, field, "expected numeric coordinates"))?;
    }
    BBox::try_new(c[0], c[1], c[2], c[3])
        .map(Some)
        .ok_or_else(|| schema(line, field, "coordinates must be finite with x1 <= x2 and y1 <= y2"))
}

fn check_score(line: usize, score: f64) -> Result<f64> {
    if (0.0..=1.0).contains(&score) {
        Ok(score)
    } else {
        Err(schema(line, "score", format!("{score} outside [0, 1]")))
    }
}

fn lines<R: BufRead>(reader: R) -> impl Iterator<Item = (usize, std::io::Result<String>)> {
    reader.lines().enumerate().map(|(i, l)| (i + 1, l))
}

fn read_error(e: std::io::Error) -> Error {
    Error::io("<reader>", e)
}

/// Validation rules for triplet records.
#[derive(Debug, Clone, Default)]
pub struct RecordSchema {
    pub no_object_classes: Vec<usize>,
    /// When set, action ids must be below this.
    pub num_actions: Option<usize>,
    /// Ground-truth files may omit scores; prediction files may not.
    pub require_score: bool,
}

#[derive(Serialize)]
struct RecordOut<'a> {
    image_id: &'a str,
    action_id: usize,
    human_box: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    object_box: Option<[f64; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

/// Serializes one record (without trailing newline).
pub fn record_to_line(r: &HoiRecord, with_score: bool) -> String {
    let out = RecordOut {
        image_id: &r.image_id,
        action_id: r.action_id,
        human_box: r.human_box.to_array(),
        object_box: r.object_box.map(|b| b.to_array()),
        score: with_score.then(|| round_score(r.score)),
    };
    serde_json::to_string(&out).expect("records serialize")
}

pub fn write_records<W: Write>(mut w: W, records: &[HoiRecord], with_score: bool) -> std::io::Result<()> {
    for r in records {
        writeln!(w, "{}", record_to_line(r, with_score))?;
    }
    Ok(())
}

pub fn records_to_string(records: &[HoiRecord], with_score: bool) -> String {
    let mut buf = Vec::new();
    write_records(&mut buf, records, with_score).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8 output")
}

/// Parses one record. `line` is 1-based, for error messages.
pub fn parse_record(line: usize, text: &str, schema_: &RecordSchema) -> Result<HoiRecord> {
    let obj = parse_object(line, text)?;
    reject_unknown(line, &obj, &["image_id", "action_id", "human_box", "object_box", "score"])?;
    let image_id = get_str(line, &obj, "image_id")?;
    let action_id = get_index(line, &obj, "action_id")?;
    if let Some(n) = schema_.num_actions {
        if action_id >= n {
            return Err(schema(line, "action_id", format!("{action_id} not below {n} actions")));
        }
    }
    let human_box = get_box(line, &obj, "human_box")?.ok_or_else(|| schema(line, "human_box", "missing"))?;
    let object_box = get_box(line, &obj, "object_box")?;
    if object_box.is_none() && !schema_.no_object_classes.contains(&action_id) {
        return Err(schema(line, "object_box", format!("missing; action {action_id} requires an object")));
    }
    let score = match get_f64(line, &obj, "score")? {
        Some(s) => check_score(line, s)?,
        None if schema_.require_score => return Err(schema(line, "score", "missing")),
        None => 1.0,
    };
    Ok(HoiRecord { image_id, action_id, human_box, object_box, score })
}

/// Reads every non-blank line; the first invalid record aborts the read.
pub fn read_records<R: BufRead>(reader: R, schema_: &RecordSchema) -> Result<Vec<HoiRecord>> {
    let mut out = Vec::new();
    for (line, text) in lines(reader) {
        let text = text.map_err(read_error)?;
        if text.trim().is_empty() {
            continue;
        }
        out.push(parse_record(line, &text, schema_)?);
    }
    Ok(out)
}

/// Decoded candidate tagged with its image. Positions are grid cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub image_id: String,
    pub candidate: InteractionCandidate,
}

#[derive(Serialize)]
struct CandidateOut<'a> {
    image_id: &'a str,
    class_id: usize,
    x: f64,
    y: f64,
    score: f64,
    vx: f64,
    vy: f64,
}

pub fn candidates_to_string(records: &[CandidateRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let c = &r.candidate;
        let out = CandidateOut {
            image_id: &r.image_id,
            class_id: c.class_id,
            x: c.pos.x,
            y: c.pos.y,
            score: c.score,
            vx: c.vector.vx_abs,
            vy: c.vector.vy_abs,
        };
        s.push_str(&serde_json::to_string(&out).expect("candidates serialize"));
        s.push('\n');
    }
    s
}

pub fn read_candidates<R: BufRead>(reader: R) -> Result<Vec<CandidateRecord>> {
    let mut out = Vec::new();
    for (line, text) in lines(reader) {
        let text = text.map_err(read_error)?;
        if text.trim().is_empty() {
            continue;
        }
        let obj = parse_object(line, &text)?;
        reject_unknown(line, &obj, &["image_id", "class_id", "x", "y", "score", "vx", "vy"])?;
        let num = |f: &str| get_f64(line, &obj, f)?.ok_or_else(|| schema(line, f, "missing"));
        let (vx, vy) = (num("vx")?, num("vy")?);
        let vector = UnsignedVector::new(vx, vy);
        if !vector.is_valid() {
            return Err(schema(line, "vx", "vector components must be finite and >= 0"));
        }
        out.push(CandidateRecord {
            image_id: get_str(line, &obj, "image_id")?,
            candidate: InteractionCandidate {
                class_id: get_index(line, &obj, "class_id")?,
                pos: Point2::new(num("x")?, num("y")?),
                score: check_score(line, num("score")?)?,
                vector,
            },
        });
    }
    Ok(out)
}

/// Settings for detection ingestion.
#[derive(Debug, Clone)]
pub struct IngestConfig {
    /// Image pixels per grid cell.
    pub stride: f64,
    pub person_category: usize,
    /// When set, category ids must be below this.
    pub num_categories: Option<usize>,
}

/// Detections of one image in grid units, split by category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ImageDetections {
    pub humans: Vec<ScoredDetection>,
    pub objects: Vec<ScoredDetection>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct DetectionSet {
    pub images: BTreeMap<String, ImageDetections>,
    /// Malformed records that were skipped.
    pub rejected: usize,
}

/// One detection as written to a detections file (image space).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DetectionRecord {
    pub image_id: String,
    pub bbox: [f64; 4],
    pub category_id: usize,
    pub score: f64,
}

pub fn detections_to_string(records: &[DetectionRecord]) -> String {
    let mut s = String::new();
    for r in records {
        let r = DetectionRecord { score: round_score(r.score), ..r.clone() };
        s.push_str(&serde_json::to_string(&r).expect("detections serialize"));
        s.push('\n');
    }
    s
}

/// Reads image-space detections, converts them to grid units and splits
/// people from objects. Malformed records are counted and skipped; an
/// unknown category id is an error.
pub fn ingest_detections<R: BufRead>(reader: R, cfg: &IngestConfig) -> Result<DetectionSet> {
    let mut set = DetectionSet::default();
    for (line, text) in lines(reader) {
        let text = text.map_err(read_error)?;
        if text.trim().is_empty() {
            continue;
        }
        let Ok(obj) = parse_object(line, &text) else {
            set.rejected += 1;
            continue;
        };
        if let (Ok(category), Some(n)) = (get_index(line, &obj, "category_id"), cfg.num_categories) {
            if category >= n {
                return Err(Error::UnknownCategory { line, category });
            }
        }
        let parsed = (|| -> Result<(String, ScoredDetection)> {
            reject_unknown(line, &obj, &["image_id", "bbox", "category_id", "score"])?;
            let image = get_str(line, &obj, "image_id")?;
            let bbox = get_box(line, &obj, "bbox")?.ok_or_else(|| schema(line, "bbox", "missing"))?;
            let category = get_index(line, &obj, "category_id")?;
            let score = check_score(line, get_f64(line, &obj, "score")?.ok_or_else(|| schema(line, "score", "missing"))?)?;
            Ok((image, ScoredDetection::new(bbox.scale(1.0 / cfg.stride), category, score)))
        })();
        match parsed {
            Ok((image, det)) => {
                let entry = set.images.entry(image).or_default();
                if det.class_id == cfg.person_category {
                    entry.humans.push(det);
                } else {
                    entry.objects.push(det);
                }
            }
            Err(_) => set.rejected += 1,
        }
    }
    Ok(set)
}
