//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;
use tsreach::campaign::{run_campaign, CampaignSettings};
use tsreach::metrics::ls_slope;
use tsreach::oracle::{
    compose_affine, conv_as_matrix, random_network, random_star, sampled_soundness, vertex_enum_bounds, RandomNetShape,
};
use tsreach::{
    conv1d_reach, load_network, load_series, make_noise_star, percentage_overlap_robustness, percentage_robustness,
    relu_reach_approx, AllowMode, Conv1d, Interval, Layer, NoiseKind, NoiseSpec, SeriesWindow, Star, StepVerdict,
    REACH_TOL, TAU_LP,
};

const PR_TOL: f64 = 1e-9;
const POR_TOL: f64 = 0.01;
const SOUNDNESS_TOL: f64 = REACH_TOL;
const AFFINE_TOL: f64 = 2e-9;
const VERTEX_TOL: f64 = 1e-7;
const CONV_BOUNDS_TOL: f64 = 2e-9;
const CONV_FORWARD_TOL: f64 = 1e-12;
const RELU_TOL: f64 = 2.0 * TAU_LP;
const SLOPE_TOL: f64 = 1e-9;
const SOUNDNESS_SAMPLES: usize = 10_000;
const SOUNDNESS_BUDGET_SECONDS: f64 = 600.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn tsreach(args: &[&str]) -> (bool, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_tsreach")).args(args).output().expect("run tsreach");
    (
        out.status.success(),
        String::from_utf8(out.stdout).expect("utf8"),
        String::from_utf8(out.stderr).expect("utf8"),
    )
}

fn fixture_args<'a>(net: &'a str, data: &'a str) -> Vec<&'a str> {
    vec!["--model", net, "--data", data, "--allow-width", "5"]
}

fn iv(lower: f64, upper: f64) -> Interval {
    Interval::new(lower, upper).expect("ordered")
}

/// Five steps whose overlaps are 2/2, 3/4, 3/5, 4/6 and 4/4, with the
/// estimates at the first and last step inside their allowable bands.
fn worked_example() -> Vec<StepVerdict> {
    let pairs = [
        (iv(0.0, 2.0), iv(-1.0, 3.0)),
        (iv(0.0, 4.0), iv(1.0, 5.0)),
        (iv(0.0, 5.0), iv(2.0, 9.0)),
        (iv(0.0, 6.0), iv(-3.0, 4.0)),
        (iv(0.0, 4.0), iv(-1.0, 5.0)),
    ];
    pairs
        .iter()
        .enumerate()
        .map(|(t, (e, a))| StepVerdict::new(t + 1, *e, *a))
        .collect()
}

fn criterion_1() -> Outcome {
    let v = worked_example();
    let pos: Vec<f64> = v.iter().map(|s| s.po).collect();
    let expected_po = [1.0, 0.75, 0.6, 4.0 / 6.0, 1.0];
    let po_ok = pos.iter().zip(expected_po).all(|(a, b)| (a - b).abs() < 1e-15);
    let pr = percentage_robustness(&v).map_err(|e| e.to_string())?;
    let por = percentage_overlap_robustness(&v).map_err(|e| e.to_string())?;
    let robust: Vec<usize> = v.iter().filter(|s| s.rv == 1).map(|s| s.time_index).collect();
    check(
        po_ok && (pr - 60.0).abs() <= PR_TOL && (por - 80.33).abs() <= POR_TOL,
        format!(
            "PR = {pr:.2}% (expected 60.00%), POR = {por:.4}% (expected 80.33% +/- {POR_TOL}), robust steps {robust:?}, PO {pos:.4?}"
        ),
    )
}

fn random_window(rng: &mut impl Rng, features: usize, time: usize) -> SeriesWindow {
    SeriesWindow::from_values(Array2::from_shape_fn((features, time), |_| rng.gen_range(0.2..2.0))).expect("window")
}

fn criterion_2() -> Outcome {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cases = Vec::new();
    for net_id in 0..52u64 {
        // every fourth network may use up to 32 channels on short windows
        let wide = net_id % 4 == 0;
        let time = if wide || net_id % 2 == 1 { 10 } else { 30 };
        let shape = RandomNetShape::draw(&mut rng, if wide { 32 } else { 6 }, true);
        for kind in NoiseKind::ALL {
            let feature = rng.gen_range(0..shape.input_features);
            let step = rng.gen_range(0..time);
            let eps = rng.gen_range(1.0..10.0);
            let window = random_window(&mut rng, shape.input_features, time);
            cases.push((net_id, shape, time, kind, NoiseSpec::new(kind, Some(feature), Some(step), eps), window));
        }
    }
    let results: Vec<Result<(usize, f64), String>> = cases
        .par_iter()
        .map(|(net_id, shape, time, kind, spec, window)| {
            let net = random_network(1000 + net_id, *shape);
            let input = make_noise_star(window, spec).map_err(|e| e.to_string())?;
            let r = sampled_soundness(&net, &input, *time, SOUNDNESS_SAMPLES, *net_id)
                .map_err(|e| format!("net {net_id} {kind:?}: {e}"))?;
            Ok((r.violations, r.worst_excess))
        })
        .collect();
    let mut violations = 0;
    let mut worst = 0.0f64;
    for r in &results {
        let (v, w) = r.clone()?;
        violations += v;
        worst = worst.max(w);
    }
    let seconds = started.elapsed().as_secs_f64();
    check(
        violations == 0 && seconds < SOUNDNESS_BUDGET_SECONDS,
        format!(
            "{} networks x 4 noise kinds x {SOUNDNESS_SAMPLES} samples: {violations} violations (tol {SOUNDNESS_TOL:e}, worst excess {worst:e}), {seconds:.1}s",
            cases.len() / 4
        ),
    )
}

/// Closed-form image bounds of a box under `x -> Mx + b`.
fn box_image(center: &[f64], radii: &[f64], m: &Array2<f64>, b: &Array1<f64>) -> Vec<Interval> {
    (0..m.nrows())
        .map(|i| {
            let row = m.row(i);
            let mid: f64 = row.iter().zip(center).map(|(a, c)| a * c).sum::<f64>() + b[i];
            let rad: f64 = row.iter().zip(radii).map(|(a, r)| a.abs() * r).sum();
            Interval {
                lower: mid - rad,
                upper: mid + rad,
            }
        })
        .collect()
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut dims = 0;
    let n = 110;
    for seed in 0..n as u64 {
        let shape = RandomNetShape::draw(&mut rng, 6, false);
        let net = random_network(seed, shape);
        let time = if seed % 2 == 0 { 10 } else { 30 };
        let n_in = shape.input_features * time;
        let center: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let radii: Vec<f64> = (0..n_in).map(|_| rng.gen_range(0.0..0.3)).collect();
        let input = Star::from_box(&center, &radii).map_err(|e| e.to_string())?;
        let (out, _) = net.reach(&input, time).map_err(|e| e.to_string())?;
        let got = out.bounds().map_err(|e| e.to_string())?;
        let (m, b) = compose_affine(&net, time).map_err(|e| e.to_string())?;
        let exact = box_image(&center, &radii, &m, &b);
        for (g, e) in got.iter().zip(&exact) {
            worst = worst.max((g.lower - e.lower).abs()).max((g.upper - e.upper).abs());
        }
        dims += got.len();
    }
    check(
        worst <= AFFINE_TOL,
        format!("{n} affine networks, {dims} output dims, max deviation {worst:e} (tol {AFFINE_TOL:e})"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst = 0.0f64;
    let mut outside = 0;
    let n = 120;
    for seed in 0..n as u64 {
        let vars = 1 + (seed % 4) as usize;
        let star = random_star(10_000 + seed, 1 + (seed % 4) as usize, vars, (seed % 6) as usize);
        let exact = vertex_enum_bounds(&star).map_err(|e| e.to_string())?;
        let lp = star.bounds().map_err(|e| e.to_string())?;
        for (l, e) in lp.iter().zip(&exact) {
            worst = worst.max((l.lower - e.lower).abs()).max((l.upper - e.upper).abs());
            if !l.contains_interval(e) {
                outside += 1;
            }
        }
    }
    check(
        worst <= VERTEX_TOL && outside == 0,
        format!("{n} stars with m <= 4: max |lp - vertex| {worst:e} (tol {VERTEX_TOL:e}), {outside} unsound dims"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_bounds = 0.0f64;
    let mut worst_forward = 0.0f64;
    let n = 60;
    for i in 0..n {
        let dilation = 1 + i % 3;
        let stride = 1 + (i / 3) % 2;
        let (pad_left, pad_right) = (i % 4, (i / 2) % 3);
        let channels = rng.gen_range(1..=3);
        let filters = rng.gen_range(1..=3);
        let taps = rng.gen_range(1..=3);
        let weights = Array3::from_shape_fn((filters, channels, taps), |_| rng.gen_range(-1.0..1.0));
        let bias = Array1::from_shape_fn(filters, |_| rng.gen_range(-0.5..0.5));
        let conv = Conv1d::new(weights, bias, stride, pad_left, pad_right, dilation).map_err(|e| e.to_string())?;
        let time = 12;
        let n_in = channels * time;
        let center: Vec<f64> = (0..n_in).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let radii: Vec<f64> = (0..n_in).map(|_| rng.gen_range(0.0..0.3)).collect();
        let input = Star::from_box(&center, &radii).map_err(|e| e.to_string())?;
        let (m, b) = conv_as_matrix(&conv, time).map_err(|e| e.to_string())?;
        let direct = conv1d_reach(&conv, &input, time).and_then(|s| s.bounds()).map_err(|e| e.to_string())?;
        let via = input
            .affine_map(m.view(), b.view())
            .and_then(|s| s.bounds())
            .map_err(|e| e.to_string())?;
        for (d, v) in direct.iter().zip(&via) {
            worst_bounds = worst_bounds.max((d.lower - v.lower).abs()).max((d.upper - v.upper).abs());
        }
        let layer = Layer::Conv1d(conv);
        for _ in 0..100 {
            let x = Array2::from_shape_fn((channels, time), |_| rng.gen_range(-2.0..2.0));
            let y = layer.forward(x.view()).map_err(|e| e.to_string())?;
            let expect = m.dot(&Array1::from_iter(x.iter().copied())) + &b;
            for (a, e) in y.iter().zip(expect.iter()) {
                worst_forward = worst_forward.max((a - e).abs());
            }
        }
    }
    check(
        worst_bounds <= CONV_BOUNDS_TOL && worst_forward <= CONV_FORWARD_TOL,
        format!(
            "{n} conv layers (D 1-3, S 1-2, asymmetric pads): bounds deviation {worst_bounds:e} (tol {CONV_BOUNDS_TOL:e}), forward deviation {worst_forward:e} (tol {CONV_FORWARD_TOL:e})"
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_1d = 0.0f64;
    for _ in 0..50 {
        let c: f64 = rng.gen_range(-1.0..1.0);
        let r = c.abs() + rng.gen_range(0.01..1.0);
        let out = relu_reach_approx(&Star::from_box(&[c], &[r]).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let b = out.lp_bounds(0).map_err(|e| e.to_string())?;
        worst_1d = worst_1d.max(b.lower.abs()).max((b.upper - (c + r)).abs());
    }
    let mut escaped = 0;
    let mut not_member = 0;
    let mut images = 0;
    for seed in 0..5u64 {
        let star = random_star(600 + seed, 5, 4, 3);
        let out = relu_reach_approx(&star).map_err(|e| e.to_string())?;
        let bounds = out.bounds().map_err(|e| e.to_string())?;
        for (k, x) in star.sample_members(10_000, seed).map_err(|e| e.to_string())?.iter().enumerate() {
            let y: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
            images += 1;
            if y.iter().zip(&bounds).any(|(v, b)| !b.widen(RELU_TOL).contains(*v)) {
                escaped += 1;
            }
            if k < 200 && !out.contains(&y, 1e-8).map_err(|e| e.to_string())? {
                not_member += 1;
            }
        }
    }
    check(
        worst_1d <= RELU_TOL && escaped == 0 && not_member == 0,
        format!(
            "1-D [0, u] deviation {worst_1d:e} (tol {RELU_TOL:e}); {images} exact images: {escaped} outside bounds, {not_member} of 1000 outside the relaxed set"
        ),
    )
}

fn criterion_7() -> Outcome {
    let net = fixture("fixture_net.json");
    let data = fixture("synthetic.csv");
    let (net, data) = (net.to_str().unwrap(), data.to_str().unwrap());
    let mut args = vec!["sweep", "--noise-kind", "mfsi", "--epsilon-list", "1,2.5,5,10"];
    args.extend(fixture_args(net, data));
    let (ok, stdout, stderr) = tsreach(&args);
    if !ok {
        return Err(format!("sweep failed: {stderr}"));
    }
    let report: Value = serde_json::from_str(&stdout).map_err(|e| e.to_string())?;
    let points = report["points"].as_array().ok_or("no points")?;
    let por: Vec<f64> = points.iter().map(|p| p["por"].as_f64().unwrap()).collect();
    let widths: Vec<Vec<f64>> = points
        .iter()
        .map(|p| p["estimated_widths"].as_array().unwrap().iter().map(|w| w.as_f64().unwrap()).collect())
        .collect();
    let por_ok = por.windows(2).all(|w| w[1] <= w[0]);
    let width_ok = widths
        .windows(2)
        .all(|w| w[0].iter().zip(&w[1]).all(|(a, b)| *b >= a - REACH_TOL));
    check(
        por_ok && width_ok,
        format!("MFSI eps 1, 2.5, 5, 10%: POR {por:.2?}, per-window widths non-decreasing: {width_ok}"),
    )
}

fn criterion_8() -> Outcome {
    let net = load_network(fixture("fixture_net.json")).map_err(|e| e.to_string())?;
    let ds = load_series(fixture("synthetic.csv"), None, "target").map_err(|e| e.to_string())?;
    let mut avg = std::collections::BTreeMap::new();
    for kind in NoiseKind::ALL {
        let mut s = CampaignSettings::new(NoiseSpec::new(kind, Some(0), None, 1.0), AllowMode::RelativePercent, 5.0);
        s.windows = 100;
        // best of three runs
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let r = run_campaign(&net, &ds, &s).map_err(|e| e.to_string())?;
            best = best.min(r.avg_runtime_seconds);
        }
        avg.insert(format!("{kind:?}").to_uppercase(), best);
    }
    let (sfsi, sfai, mfsi, mfai) = (avg["SFSI"], avg["SFAI"], avg["MFSI"], avg["MFAI"]);
    check(
        sfsi <= sfai && mfsi <= mfai,
        format!("avg seconds per window: SFSI {sfsi:.2e}, SFAI {sfai:.2e}, MFSI {mfsi:.2e}, MFAI {mfai:.2e}"),
    )
}

fn monotonicity_report(net: &str, data: &str) -> Result<Value, String> {
    let mut args = vec!["monotonicity", "--noise-kind", "mfai", "--epsilon", "1", "--mono-k", "5"];
    args.extend(fixture_args(net, data));
    let (ok, stdout, stderr) = tsreach(&args);
    if !ok {
        return Err(format!("monotonicity failed: {stderr}"));
    }
    serde_json::from_str(&stdout).map_err(|e| e.to_string())
}

fn criterion_9() -> Outcome {
    let net = fixture("fixture_net.json");
    let net = net.to_str().unwrap();
    let forward = fixture("synthetic.csv");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let reversed = dir.path().join("reversed.csv");
    let text = std::fs::read_to_string(&forward).map_err(|e| e.to_string())?;
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.reverse();
    std::fs::write(&reversed, format!("{header}\n{}\n", lines.join("\n"))).map_err(|e| e.to_string())?;

    let down = monotonicity_report(net, forward.to_str().unwrap())?;
    let up = monotonicity_report(net, reversed.to_str().unwrap())?;
    let k = down["k"].as_u64().unwrap() as usize;
    let bounds = down["bounds"].as_array().unwrap();
    let lower: Vec<f64> = bounds.iter().map(|b| b["est_lower"].as_f64().unwrap()).collect();
    let upper: Vec<f64> = bounds.iter().map(|b| b["est_upper"].as_f64().unwrap()).collect();
    let mut worst = 0.0f64;
    for (i, v) in down["verdicts"].as_array().unwrap().iter().enumerate() {
        let end = i + k;
        let fit = |ys: &[f64]| {
            let n = ys.len() as f64;
            let xm = (n - 1.0) / 2.0;
            let ym = ys.iter().sum::<f64>() / n;
            let num: f64 = ys.iter().enumerate().map(|(x, y)| (x as f64 - xm) * (y - ym)).sum();
            let den: f64 = (0..ys.len()).map(|x| (x as f64 - xm).powi(2)).sum();
            num / den
        };
        worst = worst
            .max((v["slope_lower"].as_f64().unwrap() - fit(&lower[end - k..end])).abs())
            .max((v["slope_upper"].as_f64().unwrap() - fit(&upper[end - k..end])).abs())
            .max((ls_slope(&lower[end - k..end]) - fit(&lower[end - k..end])).abs());
    }
    let (pass_down, pass_up) = (down["pass_fraction"].as_f64().unwrap(), up["pass_fraction"].as_f64().unwrap());
    check(
        pass_down == 1.0 && pass_up == 0.0 && worst <= SLOPE_TOL,
        format!(
            "decreasing campaign {:.0}% pass, reversed {:.0}% pass, max slope deviation {worst:e} (tol {SLOPE_TOL:e})",
            pass_down * 100.0,
            pass_up * 100.0
        ),
    )
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("runtime_seconds");
            map.remove("avg_runtime_seconds");
            map.values_mut().for_each(strip_timing);
        }
        Value::Array(items) => items.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn criterion_10() -> Outcome {
    let net = fixture("fixture_net.json");
    let data = fixture("synthetic.csv");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = |name: &str, extra: &[&str]| -> Result<Vec<u8>, String> {
        let out = dir.path().join(name);
        let mut args = vec!["verify", "--noise-kind", "mfai", "--epsilon", "2.5", "--seed", "7"];
        args.extend(fixture_args(net.to_str().unwrap(), data.to_str().unwrap()));
        args.extend(extra);
        args.extend(["--out", out.to_str().unwrap()]);
        let (ok, _, stderr) = tsreach(&args);
        if !ok {
            return Err(format!("verify failed: {stderr}"));
        }
        std::fs::read(&out).map_err(|e| e.to_string())
    };
    let strip = |raw: &[u8]| -> Result<Vec<u8>, String> {
        let mut v: Value = serde_json::from_slice(raw).map_err(|e| e.to_string())?;
        strip_timing(&mut v);
        Ok(serde_json::to_vec(&v).unwrap())
    };
    let (a, b) = (run("a.json", &[])?, run("b.json", &[])?);
    let same_stripped = strip(&a)? == strip(&b)?;
    let (c, d) = (run("c.json", &["--omit-timing"])?, run("d.json", &["--omit-timing"])?);
    let same_bytes = c == d;
    check(
        same_stripped && same_bytes,
        format!(
            "two verify runs (seed 7): identical without timing fields: {same_stripped}; byte-identical with --omit-timing: {same_bytes} ({} bytes)",
            c.len()
        ),
    )
}

fn criterion_11() -> Outcome {
    let net = load_network(fixture("fixture_net.json")).map_err(|e| e.to_string())?;
    let ds = load_series(fixture("synthetic.csv"), None, "target").map_err(|e| e.to_string())?;
    let mut campaigns = 0;
    let mut worst_gap = f64::INFINITY;
    for kind in NoiseKind::ALL {
        for eps in [1.0, 2.5, 5.0, 10.0] {
            for width in [1.0, 5.0] {
                let mut s = CampaignSettings::new(NoiseSpec::new(kind, Some(1), None, eps), AllowMode::RelativePercent, width);
                s.windows = 50;
                let r = run_campaign(&net, &ds, &s).map_err(|e| e.to_string())?;
                worst_gap = worst_gap.min(r.por - r.pr);
                campaigns += 1;
            }
        }
    }
    check(
        worst_gap >= 0.0,
        format!("{campaigns} campaigns: min(POR - PR) = {worst_gap:.4}"),
    )
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("worked example PR/POR", criterion_1),
        ("soundness suite", criterion_2),
        ("affine exactness", criterion_3),
        ("LP vs vertex enumeration", criterion_4),
        ("conv as matrix", criterion_5),
        ("ReLU relaxation", criterion_6),
        ("noise-magnitude trend", criterion_7),
        ("noise-scope runtime ordering", criterion_8),
        ("monotonicity checker", criterion_9),
        ("determinism", criterion_10),
        ("PR <= POR", criterion_11),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
