use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::BufReader;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hoi_points::heatmap::{decode_peaks, encode_points, encode_vectors};
use hoi_points::io::tensor::{mask_from_tensor, mask_to_tensor};
use hoi_points::io::{
    candidates_to_string, detections_to_string, ingest_detections, read_candidates, read_records, read_tensor,
    records_to_string, CandidateRecord, DetectionRecord, RunConfig, Tensor,
};
use hoi_points::losses::loss_report;
use hoi_points::{evaluate, group, ClassHeatmap, EvalSetting, HoiRecord, InteractionCandidate, UnsignedVector, VectorField};
use hoi_points_testkit::random::bench_instance;
use hoi_points_testkit::{synth_scene, SceneSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{Cli, Command, Overrides};
use crate::output::{write_file, write_or_print, StagedDir};
use crate::{ConfigError, Invalid};

const POINTS_SUFFIX: &str = ".points.ipnt";
const VECTORS_SUFFIX: &str = ".vectors.ipnt";
const MASK_SUFFIX: &str = ".mask.ipnt";

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve(&cli.overrides)?;
    if let Some(n) = cli.overrides.threads {
        if n == 0 {
            bail!(ConfigError("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring worker threads")?;
    }
    eprintln!("# resolved config\n{}", cfg.to_toml().trim_end());
    match cli.command {
        Command::Encode { gt, out } => encode(&cfg, &gt, &out),
        Command::Decode { tensors, out } => decode(&cfg, &tensors, &out),
        Command::Group { candidates, detections, out } => group_cmd(&cfg, &candidates, &detections, &out),
        Command::Loss { pred_points, target_points, pred_vectors, target_vectors, mask, out } => {
            loss(&cfg, [&pred_points, &target_points, &pred_vectors, &target_vectors, &mask], out.as_deref())
        }
        Command::Eval { pred, gt, out } => eval(&cfg, &pred, &gt, out.as_deref()),
        Command::Synth { out, scenes, humans, objects, actions, distractors } => {
            synth(cfg, &out, scenes, SceneSpec { n_humans: humans, n_objects: objects, n_actions: actions.unwrap_or(0), distractors, ..Default::default() })
        }
        Command::Bench { humans, objects, candidates, runs, out } => bench(&cfg, [humans, objects, candidates], runs, out.as_deref()),
    }
}

fn resolve(o: &Overrides) -> Result<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $($field:ident).+),* $(,)?) => {
            $(if let Some(v) = o.$flag.clone() { cfg.$($field).+ = v; })*
        };
    }
    set! {
        stride => stride,
        sigma => sigma,
        topk => topk,
        h_tau => grouping.h_tau,
        o_tau => grouping.o_tau,
        a_tau => grouping.a_tau,
        d_tau => grouping.d_tau,
        mode => grouping.mode,
        setting => setting,
        seed => seed,
    }
    cfg.validate()?;
    Ok(cfg)
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).with_context(|| format!("opening {}", path.display()))
}

/// Image ids become file names in tensor directories.
fn check_image_id(id: &str) -> Result<()> {
    if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\', '\0']) {
        bail!(Invalid(format!("image id {id:?} cannot be used as a file name")));
    }
    Ok(())
}

fn by_image<T>(items: impl IntoIterator<Item = (String, T)>) -> BTreeMap<String, Vec<T>> {
    let mut out: BTreeMap<String, Vec<T>> = BTreeMap::new();
    for (k, v) in items {
        out.entry(k).or_default().push(v);
    }
    out
}

fn encode(cfg: &RunConfig, gt: &Path, out: &Path) -> Result<()> {
    let records = read_records(open(gt)?, &cfg.record_schema(false)).with_context(|| format!("reading {}", gt.display()))?;
    let classes = match cfg.num_actions() {
        0 => records.iter().map(|r| r.action_id + 1).max().unwrap_or(0),
        n => n,
    };
    let (height, width) = cfg.grid();
    let stride = cfg.stride as f64;
    let images = by_image(records.into_iter().map(|r| (r.image_id.clone(), r)));
    for id in images.keys() {
        check_image_id(id)?;
    }
    let encoded: Vec<(String, [Vec<u8>; 3])> = images
        .into_par_iter()
        .map(|(id, recs)| {
            let grid: Vec<HoiRecord> = recs.iter().map(|r| r.scaled(1.0 / stride)).collect();
            let hm = encode_points(&grid, classes, height, width, cfg.sigma).with_context(|| format!("image {id}"))?;
            let ev = encode_vectors(&grid, height, width).with_context(|| format!("image {id}"))?;
            let mask = mask_to_tensor(&ev.mask, height, width)?;
            Ok((id, [Tensor::from(&hm).to_bytes(), Tensor::from(&ev.field).to_bytes(), mask.to_bytes()]))
        })
        .collect::<Result<_>>()?;
    let staged = StagedDir::new(out)?;
    for (id, [points, vectors, mask]) in &encoded {
        staged.write(format!("{id}{POINTS_SUFFIX}"), points)?;
        staged.write(format!("{id}{VECTORS_SUFFIX}"), vectors)?;
        staged.write(format!("{id}{MASK_SUFFIX}"), mask)?;
    }
    staged.commit()?;
    eprintln!("encoded {} images, {classes} action channels, grid {height}x{width}", encoded.len());
    Ok(())
}

fn decode(cfg: &RunConfig, dir: &Path, out: &Path) -> Result<()> {
    let mut ids: Vec<String> = std::fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .map(|e| Ok(e?.file_name().to_string_lossy().into_owned()))
        .collect::<Result<Vec<String>>>()?
        .into_iter()
        .filter_map(|name| name.strip_suffix(POINTS_SUFFIX).map(str::to_owned))
        .collect();
    ids.sort();
    let decoded: Vec<Vec<CandidateRecord>> = ids
        .par_iter()
        .map(|id| {
            let hm = ClassHeatmap::try_from(&read_tensor(dir.join(format!("{id}{POINTS_SUFFIX}")))?)?;
            let vf = VectorField::try_from(&read_tensor(dir.join(format!("{id}{VECTORS_SUFFIX}")))?)?;
            let floors = match (&cfg.dynamic, cfg.num_actions()) {
                (Some(_), n) if n != hm.classes() => {
                    bail!(Invalid(format!("{id}: {} heatmap channels but {n} configured actions", hm.classes())))
                }
                (Some(_), _) => cfg.action_floors(),
                (None, _) => vec![cfg.grouping.a_tau; hm.classes()],
            };
            let peaks = decode_peaks(&hm, cfg.topk, &floors, &vf).with_context(|| format!("image {id}"))?;
            Ok(peaks.into_iter().map(|candidate| CandidateRecord { image_id: id.clone(), candidate }).collect())
        })
        .collect::<Result<_>>()?;
    let records: Vec<CandidateRecord> = decoded.into_iter().flatten().collect();
    write_file(out, candidates_to_string(&records).as_bytes())?;
    eprintln!("decoded {} candidates from {} images", records.len(), ids.len());
    Ok(())
}

fn group_cmd(cfg: &RunConfig, candidates: &Path, detections: &Path, out: &Path) -> Result<()> {
    let cands = read_candidates(open(candidates)?).with_context(|| format!("reading {}", candidates.display()))?;
    let dets = ingest_detections(open(detections)?, &cfg.ingest()).with_context(|| format!("reading {}", detections.display()))?;
    if dets.rejected > 0 {
        eprintln!("warning: skipped {} malformed detection records", dets.rejected);
    }
    if let Some(c) = cands.iter().find(|c| cfg.num_actions() > 0 && c.candidate.class_id >= cfg.num_actions()) {
        bail!(Invalid(format!("candidate class {} outside the {} configured actions", c.candidate.class_id, cfg.num_actions())));
    }
    let stride = cfg.stride as f64;
    let images: Vec<(String, Vec<InteractionCandidate>)> =
        by_image(cands.into_iter().map(|c| (c.image_id, c.candidate))).into_iter().collect();
    let empty = Default::default();
    let grouped: Vec<Vec<HoiRecord>> = images
        .par_iter()
        .map(|(id, cands)| {
            let d = dets.images.get(id).unwrap_or(&empty);
            group(&d.humans, &d.objects, cands, &cfg.grouping)
                .iter()
                .map(|g| HoiRecord::from_triplet(id.as_str(), &g.triplet).scaled(stride))
                .collect()
        })
        .collect();
    let records: Vec<HoiRecord> = grouped.into_iter().flatten().collect();
    write_file(out, records_to_string(&records, true).as_bytes())?;
    eprintln!("grouped {} triplets over {} images", records.len(), images.len());
    Ok(())
}

fn loss(cfg: &RunConfig, paths: [&Path; 5], out: Option<&Path>) -> Result<()> {
    let [pp, tp, pv, tv, m] = paths.map(|p| read_tensor(p).with_context(|| format!("reading {}", p.display())));
    let pred = ClassHeatmap::try_from(&pp?)?;
    let target = ClassHeatmap::try_from(&tp?)?;
    let pred_v = VectorField::try_from(&pv?)?;
    let target_v = VectorField::try_from(&tv?)?;
    let (mask, h, w) = mask_from_tensor(&m?)?;
    if (h, w) != (target_v.height(), target_v.width()) {
        bail!(Invalid(format!("mask is {h}x{w} but target vectors are {}x{}", target_v.height(), target_v.width())));
    }
    let targets: Vec<((usize, usize), UnsignedVector)> = (0..h * w)
        .filter(|&i| mask[i])
        .map(|i| ((i / w, i % w), target_v.get(i / w, i % w)))
        .collect();
    let report = loss_report(&pred, &target, &pred_v, &targets, &cfg.focal, cfg.lambda_v)?;
    eprintln!("l_point={} l_vector={} l_total={}", report.l_point, report.l_vector, report.l_total);
    write_or_print(out, &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn eval(cfg: &RunConfig, pred: &Path, gt: &Path, out: Option<&Path>) -> Result<()> {
    let preds = read_records(open(pred)?, &cfg.record_schema(true)).with_context(|| format!("reading {}", pred.display()))?;
    let gts = read_records(open(gt)?, &cfg.record_schema(false)).with_context(|| format!("reading {}", gt.display()))?;
    let mut set = cfg.ground_truth(gts);
    if cfg.setting == EvalSetting::KnownObject && !set.class_object_category.is_empty() {
        // an image is known to contain a category when any of its
        // annotations involves that category
        let mut known: BTreeMap<usize, BTreeSet<String>> = BTreeMap::new();
        for (image, records) in &set.images {
            for r in records {
                if let Some(&cat) = set.class_object_category.get(r.action_id) {
                    known.entry(cat).or_default().insert(image.clone());
                }
            }
        }
        set.known_object_images = Some(known);
    }
    let report = evaluate(&preds, &set, cfg.setting, cfg.iou_min)?;
    eprintln!("setting={} map_role={} over {} classes", report.setting, report.map_role, report.per_class_ap.len());
    write_or_print(out, &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn synth(mut cfg: RunConfig, out: &Path, scenes: usize, mut spec: SceneSpec) -> Result<()> {
    if spec.n_actions == 0 {
        spec.n_actions = if cfg.num_actions() > 0 { cfg.num_actions() } else { 2 };
    }
    if cfg.num_actions() == 0 {
        cfg.actions = (0..spec.n_actions).map(|i| format!("action_{i}")).collect();
    } else if cfg.num_actions() != spec.n_actions {
        bail!(ConfigError(format!("--actions {} disagrees with the {} configured actions", spec.n_actions, cfg.num_actions())));
    }
    if cfg.object_categories.is_empty() {
        cfg.object_categories = vec!["person".into(), "object".into()];
        cfg.person_category = 0;
    }
    let object_category = (0..cfg.object_categories.len())
        .find(|&c| c != cfg.person_category)
        .ok_or_else(|| ConfigError("synthetic objects need a category other than the person category".into()))?;
    if cfg.dataset.class_object_category.is_empty() {
        cfg.dataset.class_object_category = vec![object_category; spec.n_actions];
    }
    cfg.validate()?;
    (spec.height, spec.width) = cfg.grid();
    spec.sigma = cfg.sigma;
    let stride = cfg.stride as f64;

    let staged = StagedDir::new(out)?;
    let (mut gt, mut dets) = (Vec::new(), Vec::new());
    for i in 0..scenes as u64 {
        let seed = cfg.seed.wrapping_add(i);
        let scene = synth_scene(seed, &spec).map_err(|e| Invalid(format!("scene {i} (seed {seed}): {e}")))?;
        let id = format!("scene-{seed:06}");
        gt.extend(scene.gt_records(&id, stride));
        let as_record = |d: &hoi_points::ScoredDetection, category_id| DetectionRecord {
            image_id: id.clone(),
            bbox: d.bbox.scale(stride).to_array(),
            category_id,
            score: d.score,
        };
        dets.extend(scene.humans.iter().map(|d| as_record(d, cfg.person_category)));
        dets.extend(scene.objects.iter().map(|d| as_record(d, object_category)));
        staged.write(format!("tensors/{id}{POINTS_SUFFIX}"), &Tensor::from(&scene.heatmap).to_bytes())?;
        staged.write(format!("tensors/{id}{VECTORS_SUFFIX}"), &Tensor::from(&scene.vectors.field).to_bytes())?;
        staged.write(format!("tensors/{id}{MASK_SUFFIX}"), &mask_to_tensor(&scene.vectors.mask, spec.height, spec.width)?.to_bytes())?;
    }
    staged.write("gt.jsonl", records_to_string(&gt, false).as_bytes())?;
    staged.write("detections.jsonl", detections_to_string(&dets).as_bytes())?;
    staged.write("config.toml", cfg.to_toml().as_bytes())?;
    staged.commit()?;
    eprintln!("wrote {scenes} scenes, {} triplets, {} detections", gt.len(), dets.len());
    Ok(())
}

#[derive(Serialize)]
struct BenchReport {
    humans: usize,
    objects: usize,
    candidates: usize,
    pair_tests: usize,
    triplets: usize,
    runs: usize,
    median_ms: f64,
    min_ms: f64,
    max_ms: f64,
}

fn bench(cfg: &RunConfig, [n_h, n_o, n_c]: [usize; 3], runs: usize, out: Option<&Path>) -> Result<()> {
    if runs == 0 {
        bail!(ConfigError("--runs must be at least 1".into()));
    }
    let (humans, objects, cands) = bench_instance(&mut ChaCha8Rng::seed_from_u64(cfg.seed), n_h, n_o, n_c, false);
    let triplets = group(&humans, &objects, &cands, &cfg.grouping).len();
    let mut times: Vec<f64> = (0..runs)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(group(std::hint::black_box(&humans), &objects, &cands, &cfg.grouping));
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect();
    times.sort_by(f64::total_cmp);
    let report = BenchReport {
        humans: n_h,
        objects: n_o,
        candidates: n_c,
        pair_tests: n_h * n_o * n_c,
        triplets,
        runs,
        median_ms: times[runs / 2],
        min_ms: times[0],
        max_ms: times[runs - 1],
    };
    eprintln!("{} pair tests, median {:.4} ms over {runs} runs", report.pair_tests, report.median_ms);
    write_or_print(out, &(serde_json::to_string_pretty(&report)? + "\n"))
}
