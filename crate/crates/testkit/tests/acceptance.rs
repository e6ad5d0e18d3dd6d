//! Acceptance run: one PASS/FAIL line per criterion, machine specs up front.
//! Exits non-zero when any criterion fails.

use std::collections::BTreeSet;
use std::io::Cursor;
use std::time::{Duration, Instant};

use hoi_points::evaluator::match_triplets;
use hoi_points::heatmap::{decode_peaks, dynamic_thresholds, encode_points, encode_vectors};
use hoi_points::io::{
    detections_to_string, ingest_detections, read_records, records_to_string, DetectionRecord, IngestConfig,
    RecordSchema, Tensor,
};
use hoi_points::losses::{focal_loss, focal_loss_with_grad, total_loss, vector_l1_loss, vector_l1_loss_with_grad};
use hoi_points::{
    evaluate, group, BBox, ClassHeatmap, EvalSetting, FocalParams, GroundTruthSet, GroupingConfig, GroupingMode,
    HoiRecord, InteractionCandidate, ScoredDetection, UnsignedVector, VectorField,
};
use hoi_points_testkit::random::{bench_instance, eval_instance, grouping_instance, noisy_vectors};
use hoi_points_testkit::{oracle_ap, oracle_group, oracle_map, synth_scene, GtPair, OracleTriplet, SceneSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STRIDE: f64 = 4.0;
const GRID: usize = 128;

// criterion tolerances and budgets
const PIPELINE_SCENES: u64 = 100;
const PIPELINE_BUDGET: Duration = Duration::from_secs(10);
const GROUPING_INSTANCES: u64 = 1_000;
const ABLATION_SCENES: u64 = 60;
const ABLATION_NOISE_SIGMA: f64 = 1.0;
const LOSS_FIXTURE_TOL: f64 = 1e-9;
const GRAD_MAPS: u64 = 50;
const GRAD_STEP: f64 = 1e-5;
const GRAD_REL_TOL: f64 = 1e-4;
const EVAL_INSTANCES: u64 = 200;
const BENCH_RUNS: usize = 100;
const BENCH_BUDGET: Duration = Duration::from_millis(5);
const FORMAT_INSTANCES: u64 = 1_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn machine_specs() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|s| s.lines().find(|l| l.starts_with("model name")).map(|l| l.split(':').nth(1).unwrap_or("").trim().to_string()))
        .unwrap_or_else(|| "unknown cpu".into());
    let cores = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let mem = std::fs::read_to_string("/proc/meminfo")
        .ok()
        .and_then(|s| s.lines().next().map(|l| l.split_whitespace().nth(1).unwrap_or("0").to_string()))
        .and_then(|kb| kb.parse::<u64>().ok())
        .map(|kb| format!("{:.1} GiB", kb as f64 / 1024.0 / 1024.0))
        .unwrap_or_else(|| "unknown".into());
    let profile = if cfg!(debug_assertions) { "debug assertions on" } else { "debug assertions off" };
    format!("{cpu}; {cores} logical cores; {mem} RAM; {}-{}; {profile}", std::env::consts::OS, std::env::consts::ARCH)
}

fn zero_cfg(d_tau: f64) -> GroupingConfig {
    GroupingConfig { h_tau: 0.0, o_tau: 0.0, a_tau: 0.0, d_tau, ..Default::default() }
}

fn pipeline_spec(seed: u64) -> SceneSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    SceneSpec {
        height: GRID,
        width: GRID,
        n_humans: rng.random_range(1..=4),
        n_objects: rng.random_range(1..=4),
        n_actions: rng.random_range(1..=3),
        ..Default::default()
    }
}

/// Encode, serialize, decode, group and evaluate one scene through the same
/// file formats the command-line tool uses.
fn pipeline_map(seed: u64) -> Result<f64, String> {
    let spec = pipeline_spec(seed);
    let scene = synth_scene(seed, &spec).map_err(|e| e.to_string())?;
    let image = format!("scene-{seed:03}");
    let gt = scene.gt_records(&image, STRIDE);

    let grid_gt: Vec<HoiRecord> = gt.iter().map(|r| r.scaled(1.0 / STRIDE)).collect();
    let hm = encode_points(&grid_gt, spec.n_actions, GRID, GRID, spec.sigma).map_err(|e| e.to_string())?;
    let vf = encode_vectors(&grid_gt, GRID, GRID).map_err(|e| e.to_string())?.field;
    let hm = ClassHeatmap::try_from(&Tensor::from_bytes(&Tensor::from(&hm).to_bytes()).unwrap()).unwrap();
    let vf = VectorField::try_from(&Tensor::from_bytes(&Tensor::from(&vf).to_bytes()).unwrap()).unwrap();
    let cands = decode_peaks(&hm, 100, &vec![0.0; spec.n_actions], &vf).map_err(|e| e.to_string())?;

    let dets: Vec<DetectionRecord> = scene
        .humans
        .iter()
        .map(|d| (d, 0))
        .chain(scene.objects.iter().map(|d| (d, 1)))
        .map(|(d, category_id)| DetectionRecord { image_id: image.clone(), bbox: d.bbox.scale(STRIDE).to_array(), category_id, score: d.score })
        .collect();
    let ingest = IngestConfig { stride: STRIDE, person_category: 0, num_categories: Some(2) };
    let set = ingest_detections(Cursor::new(detections_to_string(&dets)), &ingest).map_err(|e| e.to_string())?;
    let found = &set.images[&image];

    let triplets: Vec<HoiRecord> = group(&found.humans, &found.objects, &cands, &zero_cfg(1.0))
        .iter()
        .map(|g| HoiRecord::from_triplet(image.as_str(), &g.triplet).scaled(STRIDE))
        .collect();
    let schema = RecordSchema { require_score: true, ..Default::default() };
    let triplets = read_records(Cursor::new(records_to_string(&triplets, true)), &schema).map_err(|e| e.to_string())?;
    let report = evaluate(&triplets, &GroundTruthSet::from_records(gt), EvalSetting::Default, 0.5).map_err(|e| e.to_string())?;
    Ok(report.map_role)
}

fn criterion_pipeline() -> Outcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    for seed in 0..PIPELINE_SCENES {
        match pipeline_map(seed) {
            Ok(m) if m == 1.0 => {}
            Ok(m) => failures.push(format!("seed {seed}: map_role {m}")),
            Err(e) => failures.push(format!("seed {seed}: {e}")),
        }
    }
    let elapsed = start.elapsed();
    let pass = failures.is_empty() && elapsed < PIPELINE_BUDGET;
    outcome(
        pass,
        format!(
            "{}/{PIPELINE_SCENES} scenes at map_role 1.000 in {:.2} s (budget {} s){}",
            PIPELINE_SCENES as usize - failures.len(),
            elapsed.as_secs_f64(),
            PIPELINE_BUDGET.as_secs(),
            failures.first().map(|f| format!("; first failure {f}")).unwrap_or_default()
        ),
    )
}

fn criterion_grouping_oracle() -> Outcome {
    let mut mismatches = 0;
    let mut emitted = 0;
    for seed in 0..GROUPING_INSTANCES {
        let inst = grouping_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let got: Vec<OracleTriplet> = group(&inst.humans, &inst.objects, &inst.candidates, &inst.cfg)
            .iter()
            .map(|g| OracleTriplet {
                action: g.triplet.action_id,
                human: g.human_index,
                object: g.object_index,
                candidate: g.candidate_index,
                score: g.triplet.score,
            })
            .collect();
        let want = oracle_group(&inst.humans, &inst.objects, &inst.candidates, &inst.cfg);
        emitted += want.len();
        if got != want {
            mismatches += 1;
        }
    }
    outcome(mismatches == 0, format!("{mismatches} discrepancies over {GROUPING_INSTANCES} instances ({emitted} triplets)"))
}

/// False pairs per mode over a fixed suite: crowded scenes with distractors,
/// candidates at the true points with noisy vectors.
fn ablation_counts() -> Vec<(GroupingMode, usize)> {
    let modes = [GroupingMode::AngleOnly, GroupingMode::AnglePlusRatio, GroupingMode::BoxOnly, GroupingMode::BoxPlusCorner];
    let mut counts = vec![0usize; modes.len()];
    for seed in 0..ABLATION_SCENES {
        let spec = SceneSpec { height: 40, width: 40, n_humans: 4, n_objects: 4, n_actions: 2, distractors: 6, ..Default::default() };
        let scene = synth_scene(1_000 + seed, &spec).expect("ablation scene");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cands = noisy_vectors(&mut rng, &scene.perfect_candidates(), ABLATION_NOISE_SIGMA);
        let truth: BTreeSet<GtPair> = scene.pairs.iter().copied().collect();
        for (slot, &mode) in modes.iter().enumerate() {
            let cfg = GroupingConfig { mode, ..zero_cfg(hoi_points::grouping::DEFAULT_D_TAU) };
            counts[slot] += group(&scene.humans, &scene.objects, &cands, &cfg)
                .iter()
                .filter(|g| {
                    let pair = g.object_index.map(|o| GtPair { human: g.human_index, object: o, action: g.triplet.action_id });
                    !pair.is_some_and(|p| truth.contains(&p))
                })
                .count();
        }
    }
    modes.into_iter().zip(counts).collect()
}

fn criterion_ablation() -> Outcome {
    let counts = ablation_counts();
    let strictly_decreasing = counts.windows(2).all(|w| w[1].1 < w[0].1);
    let listing: Vec<String> = counts.iter().map(|(m, c)| format!("{m}={c}")).collect();
    outcome(strictly_decreasing, format!("false pairs {} over {ABLATION_SCENES} scenes", listing.join(" > ")))
}

/// Uniform predictions away from the clamp, Gaussian-splat targets with one
/// to three peaks. Targets close to 1 next to predictions close to 0 give
/// gradients near 1e-8, below what a 1e-5 central difference resolves in
/// f64, so predictions stay inside [0.05, 0.95].
fn random_maps(rng: &mut ChaCha8Rng) -> (ClassHeatmap, ClassHeatmap) {
    let (c, h, w) = (2, 4, 4);
    let pred: Vec<f64> = (0..c * h * w).map(|_| rng.random_range(0.05..0.95)).collect();
    let peaks: Vec<HoiRecord> = (0..rng.random_range(1..=3))
        .map(|_| {
            let (x, y) = (rng.random_range(0..w) as f64, rng.random_range(0..h) as f64);
            HoiRecord {
                image_id: String::new(),
                action_id: rng.random_range(0..c),
                human_box: BBox::new(x, y, x, y),
                object_box: None,
                score: 1.0,
            }
        })
        .collect();
    let target = encode_points(&peaks, c, h, w, 2.0).unwrap();
    (ClassHeatmap::from_vec(c, h, w, pred).unwrap(), target)
}

fn rel_err(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn criterion_losses() -> Outcome {
    let params = FocalParams::default();
    let mut fixture_err: f64 = 0.0;

    let pred = ClassHeatmap::from_vec(1, 1, 2, vec![0.5, 0.1]).unwrap();
    let target = ClassHeatmap::from_vec(1, 1, 2, vec![1.0, 0.0]).unwrap();
    let l_p = focal_loss(&pred, &target, &params).unwrap().loss;
    let hand = (0.25 * 2f64.ln() + 0.01 * -(0.9f64.ln())) / 1.0;
    fixture_err = fixture_err.max((l_p - hand).abs());

    let one = |v: f64| ClassHeatmap::from_vec(1, 1, 1, vec![v]).unwrap();
    let penumbra = focal_loss(&one(0.5), &one(0.5), &params).unwrap().loss;
    fixture_err = fixture_err.max((penumbra - 0.5f64.powi(4) * 0.5f64.powi(2) * 2f64.ln()).abs());

    let mut vf = VectorField::zeros(1, 2);
    vf.set(0, 0, UnsignedVector::new(3.0, 2.0));
    vf.set(0, 1, UnsignedVector::new(1.0, 1.0));
    let targets = [((0, 0), UnsignedVector::new(2.5, 2.5)), ((0, 1), UnsignedVector::new(1.0, 1.0))];
    let l_v = vector_l1_loss(&vf, &targets).unwrap();
    fixture_err = fixture_err.max((l_v - 0.5).abs());
    let single = vector_l1_loss(&VectorField::zeros(1, 1), &[((0, 0), UnsignedVector::new(4.0, 0.0))]).unwrap();
    fixture_err = fixture_err.max((single - 4.0).abs());
    fixture_err = fixture_err.max((total_loss(l_p, l_v, 0.1) - (hand + 0.05)).abs());
    fixture_err = fixture_err.max((total_loss(0.174340, 0.5, 0.1) - 0.224340).abs());

    let mut worst: f64 = 0.0;
    for seed in 0..GRAD_MAPS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (pred, target) = random_maps(&mut rng);
        let (_, grad) = focal_loss_with_grad(&pred, &target, &params).unwrap();
        for i in 0..pred.values().len() {
            let eval = |delta: f64| {
                let mut p = pred.clone();
                p.values_mut()[i] += delta;
                focal_loss(&p, &target, &params).unwrap().loss
            };
            let numeric = (eval(GRAD_STEP) - eval(-GRAD_STEP)) / (2.0 * GRAD_STEP);
            worst = worst.max(rel_err(grad[i], numeric));
        }

        let (h, w) = (4, 4);
        let field: Vec<f64> = (0..2 * h * w).map(|_| rng.random_range(0.0..8.0)).collect();
        let field = VectorField::from_vec(h, w, field).unwrap();
        let mut cells: Vec<(usize, usize)> = (0..h).flat_map(|y| (0..w).map(move |x| (y, x))).collect();
        cells.truncate(rng.random_range(1..=h * w));
        let targets: Vec<((usize, usize), UnsignedVector)> = cells
            .into_iter()
            .map(|(y, x)| {
                let v = field.get(y, x);
                // keep every residual well away from the kink at zero
                let off = |r: &mut ChaCha8Rng| if r.random_bool(0.5) { r.random_range(0.1..2.0) } else { -r.random_range(0.1..2.0) };
                ((y, x), UnsignedVector::new((v.vx_abs + off(&mut rng)).abs(), (v.vy_abs + off(&mut rng)).abs()))
            })
            .filter(|((y, x), t)| {
                let v = field.get(*y, *x);
                (v.vx_abs - t.vx_abs).abs() > 1e-3 && (v.vy_abs - t.vy_abs).abs() > 1e-3
            })
            .collect();
        let (_, grad) = vector_l1_loss_with_grad(&field, &targets).unwrap();
        for i in 0..field.values().len() {
            let eval = |delta: f64| {
                let mut f = field.clone();
                f.values_mut()[i] += delta;
                vector_l1_loss(&f, &targets).unwrap()
            };
            let numeric = (eval(GRAD_STEP) - eval(-GRAD_STEP)) / (2.0 * GRAD_STEP);
            worst = worst.max(rel_err(grad[i], numeric));
        }
    }
    outcome(
        fixture_err <= LOSS_FIXTURE_TOL && worst < GRAD_REL_TOL,
        format!(
            "fixture max abs err {fixture_err:.2e} (tol {LOSS_FIXTURE_TOL:.0e}); gradient max rel err {worst:.2e} over {GRAD_MAPS} maps (tol {GRAD_REL_TOL:.0e})"
        ),
    )
}

fn criterion_evaluator() -> Outcome {
    let mut mismatches = 0;
    for seed in 0..EVAL_INSTANCES {
        let inst = eval_instance(&mut ChaCha8Rng::seed_from_u64(seed));
        let gt = GroundTruthSet { no_object_classes: inst.no_object_classes.clone(), ..GroundTruthSet::from_records(inst.gts.clone()) };
        let report = evaluate(&inst.preds, &gt, EvalSetting::Default, 0.5).unwrap();
        let want = oracle_ap(&inst.preds, &inst.gts, 0.5, &inst.no_object_classes);
        if report.per_class_ap != want || report.map_role != oracle_map(&want) {
            mismatches += 1;
        }
    }

    let rec = |action, h: [f64; 4], o: [f64; 4], score| HoiRecord {
        image_id: "img".into(),
        action_id: action,
        human_box: BBox::from_array(h),
        object_box: Some(BBox::from_array(o)),
        score,
    };
    let g = rec(0, [0.0, 0.0, 10.0, 10.0], [0.0, 0.0, 10.0, 10.0], 1.0);
    // human IoU 0.6, object IoU 0.7
    let p = rec(0, [0.0, 0.0, 10.0, 6.0], [0.0, 0.0, 10.0, 7.0], 0.9);
    let fixtures = [
        (vec![p.clone()], vec![true]),
        (vec![HoiRecord { action_id: 1, ..p.clone() }], vec![false]),
        (vec![p.clone(), HoiRecord { score: 0.8, ..p.clone() }], vec![true, false]),
    ];
    let fixture_ok = fixtures.iter().filter(|(preds, want)| match_triplets(preds, std::slice::from_ref(&g), 0.5, &[]) == *want).count();
    outcome(
        mismatches == 0 && fixture_ok == fixtures.len(),
        format!("{mismatches} discrepancies over {EVAL_INSTANCES} instances; matcher fixtures {fixture_ok}/{}", fixtures.len()),
    )
}

fn criterion_dynamic_thresholds() -> Outcome {
    let fixture = dynamic_thresholds(&[3, 500], 0.01, 0.05, 10);
    let counts: Vec<u64> = (0..=20).chain([100, 500, 10_000]).collect();
    let floors = dynamic_thresholds(&counts, 0.01, 0.05, 10);
    let monotone = floors.windows(2).all(|w| w[0] <= w[1]);
    let straddles = floors.first() == Some(&0.01) && floors.last() == Some(&0.05);
    outcome(
        fixture == [0.01, 0.05] && monotone && straddles,
        format!("counts [3, 500] -> {fixture:?}; monotone over {} counts straddling cutoff 10: {monotone}", counts.len()),
    )
}

type BenchInstance = (Vec<ScoredDetection>, Vec<ScoredDetection>, Vec<InteractionCandidate>);

fn bench(dense: bool) -> BenchInstance {
    bench_instance(&mut ChaCha8Rng::seed_from_u64(20_20_50), 20, 20, 50, dense)
}

/// Median wall time of `group` over `BENCH_RUNS` runs, plus min and max.
fn time_group(inst: &BenchInstance, cfg: &GroupingConfig) -> [Duration; 3] {
    let (humans, objects, cands) = inst;
    for _ in 0..10 {
        std::hint::black_box(group(humans, objects, cands, cfg));
    }
    let mut times: Vec<Duration> = (0..BENCH_RUNS)
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(group(std::hint::black_box(humans), objects, cands, cfg));
            t.elapsed()
        })
        .collect();
    times.sort();
    [times[BENCH_RUNS / 2], times[0], times[BENCH_RUNS - 1]]
}

fn criterion_grouping_speed() -> Outcome {
    let cfg = zero_cfg(hoi_points::grouping::DEFAULT_D_TAU);
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, dense) in [("uniform", false), ("dense", true)] {
        let inst = bench(dense);
        let pair_tests = inst.0.len() * inst.1.len() * inst.2.len();
        let [median, min, max] = time_group(&inst, &cfg);
        pass &= median < BENCH_BUDGET && pair_tests == 20_000;
        parts.push(format!("{label}: {pair_tests} pair tests, median {:.3} ms (min {:.3}, max {:.3})", ms(median), ms(min), ms(max)));
    }
    outcome(pass, format!("{} over {BENCH_RUNS} runs each (budget {} ms)", parts.join("; "), BENCH_BUDGET.as_millis()))
}

fn random_record(rng: &mut ChaCha8Rng, i: u64) -> HoiRecord {
    let mut b = || {
        let (x, y) = (rng.random_range(0.0..600.0), rng.random_range(0.0..600.0));
        BBox::new(x, y, x + rng.random_range(0.0..200.0), y + rng.random_range(0.0..200.0))
    };
    let human_box = b();
    let object_box = b();
    // action 0 is the no-object class of the schema below
    let action_id = rng.random_range(0..600);
    HoiRecord {
        image_id: format!("img-{i}"),
        action_id,
        human_box,
        object_box: (action_id != 0 || rng.random_bool(0.5)).then_some(object_box),
        score: rng.random_range(0.0..=1.0),
    }
}

fn criterion_formats() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut broken = 0;
    for i in 0..FORMAT_INSTANCES {
        let dims: Vec<usize> = (0..rng.random_range(1..=4)).map(|_| rng.random_range(1..=5)).collect();
        let n: usize = dims.iter().product();
        let data: Vec<f32> = (0..n).map(|_| f32::from_bits(rng.random::<u32>() & 0x7f7f_ffff)).collect();
        let bytes = Tensor::new(dims, data).unwrap().to_bytes();
        if Tensor::from_bytes(&bytes).ok().map(|t| t.to_bytes()) != Some(bytes) {
            broken += 1;
        }

        let records: Vec<HoiRecord> = (0..rng.random_range(1..=5)).map(|_| random_record(&mut rng, i)).collect();
        let schema = RecordSchema { require_score: true, no_object_classes: vec![0], ..Default::default() };
        let text = records_to_string(&records, true);
        let again = read_records(Cursor::new(text.as_bytes()), &schema).map(|r| records_to_string(&r, true));
        if again.ok() != Some(text) {
            broken += 1;
        }
    }
    let example = Tensor::from(&ClassHeatmap::zeros(2, 3, 3)).to_bytes();
    let header_ok = example.len() == 92 && example[..20] == *b"IPNT\x01\x00\x00\x03\x02\x00\x00\x00\x03\x00\x00\x00\x03\x00\x00\x00";
    outcome(
        broken == 0 && header_ok,
        format!("{broken} non-identical round trips over {FORMAT_INSTANCES} tensor+record instances; 2x3x3 example {} bytes", example.len()),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture` or a filter;
    // this target always runs every criterion.
    println!("machine: {}", machine_specs());
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("round-trip pipeline", criterion_pipeline),
        ("grouping oracle equivalence", criterion_grouping_oracle),
        ("constraint ablation trend", criterion_ablation),
        ("loss fixtures and gradients", criterion_losses),
        ("evaluator oracle equivalence", criterion_evaluator),
        ("dynamic thresholds", criterion_dynamic_thresholds),
        ("grouping performance", criterion_grouping_speed),
        ("format stability", criterion_formats),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
