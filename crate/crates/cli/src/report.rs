//! Subcommand drivers and their JSON/CSV outputs.

use crate::config::CampaignConfig;
use anyhow::{bail, Context, Result};
use serde::Serialize;
use std::io::Write;
use std::path::Path;
use tsreach::campaign::{monotonicity_verdicts, pass_fraction, run_campaign, run_sweep, window_star, SweepPoint, WindowRecord};
use tsreach::oracle::{compose_affine, soundness_against, vertex_enum_bounds, MAX_ENUM_ROWS, MAX_ENUM_VARS};
use tsreach::{CampaignResult, Dataset, Layer, MonotonicityVerdict, Network, REACH_TOL};

pub const REPORT_VERSION: u32 = 1;

/// Shift applied to the last bias by `--inject-fault`.
const FAULT_SHIFT: f64 = 1000.0;

#[derive(Serialize)]
struct Header {
    report_version: u32,
    tool_version: &'static str,
    command: &'static str,
    seed: u64,
    /// Resolved configuration; feeding it back through `--config` re-runs
    /// the campaign.
    config: CampaignConfig,
}

impl Header {
    fn new(command: &'static str, cfg: &CampaignConfig) -> Self {
        Header {
            report_version: REPORT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION"),
            command,
            seed: cfg.seed.unwrap_or_default(),
            config: CampaignConfig { out: None, ..cfg.clone() },
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(out.flush()?)
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn campaign(cfg: &CampaignConfig, net: &Network, ds: &Dataset, self_check: usize) -> Result<CampaignResult> {
    let mut settings = cfg.settings(None)?;
    settings.self_check_samples = self_check;
    let mut result = run_campaign(net, ds, &settings)?;
    if cfg.omit_timing() {
        for r in &mut result.records {
            r.runtime_seconds = 0.0;
        }
        result.runtimes.iter_mut().for_each(|t| *t = 0.0);
        result.avg_runtime_seconds = 0.0;
    }
    Ok(result)
}

#[derive(Serialize)]
struct TraceRow {
    time_index: usize,
    actual: f64,
    est_lower: f64,
    est_upper: f64,
    allow_lower: f64,
    allow_upper: f64,
    rv: u8,
    po: f64,
    runtime_seconds: f64,
}

impl From<&WindowRecord> for TraceRow {
    fn from(r: &WindowRecord) -> Self {
        TraceRow {
            time_index: r.time_index,
            actual: r.actual,
            est_lower: r.est_lower,
            est_upper: r.est_upper,
            allow_lower: r.allow_lower,
            allow_upper: r.allow_upper,
            rv: r.rv,
            po: r.po,
            runtime_seconds: r.runtime_seconds,
        }
    }
}

fn trace_csv(records: &[WindowRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(TraceRow::from(r))?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Serialize)]
struct BoundsReport {
    #[serde(flatten)]
    header: Header,
    windows: Vec<TraceRow>,
}

/// CSV trace at `--out` and a JSON copy next to it (`.json` extension).
pub fn bounds(cfg: &CampaignConfig, net: &Network, ds: &Dataset) -> Result<bool> {
    let result = campaign(cfg, net, ds, 0)?;
    let csv_text = trace_csv(&result.records)?;
    emit(cfg.out.as_deref(), &csv_text)?;
    if let Some(out) = &cfg.out {
        let report = BoundsReport {
            header: Header::new("bounds", cfg),
            windows: result.records.iter().map(TraceRow::from).collect(),
        };
        emit(Some(&out.with_extension("json")), &to_json(&report)?)?;
    }
    Ok(true)
}

#[derive(Serialize)]
struct SelfCheck {
    samples_per_window: usize,
    violations: usize,
    passed: bool,
}

#[derive(Serialize)]
struct MonotonicitySection {
    k: usize,
    slope_tol: f64,
    pass_fraction: f64,
    verdicts: Vec<MonotonicityVerdict>,
}

#[derive(Serialize)]
struct VerifyReport {
    #[serde(flatten)]
    header: Header,
    pr: f64,
    por: f64,
    avg_runtime_seconds: f64,
    windows: usize,
    self_check: SelfCheck,
    /// Features (1-based) whose noise radius used the window std.
    std_fallback_features: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    monotonicity: Option<MonotonicitySection>,
    verdicts: Vec<WindowRecord>,
}

fn mono_section(cfg: &CampaignConfig, records: &[WindowRecord]) -> Result<MonotonicitySection> {
    let k = cfg.mono_k.unwrap_or(tsreach::campaign::DEFAULT_MONO_K);
    let slope_tol = cfg.slope_tol.unwrap_or(0.0);
    let verdicts = monotonicity_verdicts(records, k, slope_tol)?;
    Ok(MonotonicitySection {
        k,
        slope_tol,
        pass_fraction: pass_fraction(&verdicts),
        verdicts,
    })
}

/// Fails (exit 2) when any self-check sample escapes its bounds.
pub fn verify(cfg: &CampaignConfig, net: &Network, ds: &Dataset) -> Result<bool> {
    let samples = cfg.self_check_samples.unwrap_or(crate::config::DEFAULT_SELF_CHECK_SAMPLES);
    let result = campaign(cfg, net, ds, samples)?;
    let monotonicity = if cfg.monotonicity.unwrap_or(false) {
        Some(mono_section(cfg, &result.records)?)
    } else {
        None
    };
    let passed = result.self_check_violations == 0;
    let report = VerifyReport {
        header: Header::new("verify", cfg),
        pr: result.pr,
        por: result.por,
        avg_runtime_seconds: result.avg_runtime_seconds,
        windows: result.records.len(),
        self_check: SelfCheck {
            samples_per_window: samples,
            violations: result.self_check_violations,
            passed,
        },
        std_fallback_features: result.std_fallback_features.iter().map(|f| f + 1).collect(),
        monotonicity,
        verdicts: result.records,
    };
    emit(cfg.out.as_deref(), &to_json(&report)?)?;
    if !passed {
        eprintln!("soundness self-check failed: {} sampled outputs outside their bounds", report.self_check.violations);
    }
    Ok(passed)
}

#[derive(Serialize)]
struct SweepReport {
    #[serde(flatten)]
    header: Header,
    points: Vec<SweepPoint>,
}

pub fn sweep(cfg: &CampaignConfig, net: &Network, ds: &Dataset) -> Result<bool> {
    let eps = match &cfg.epsilon_list {
        Some(list) if !list.is_empty() => list.clone(),
        _ => bail!("sweep needs a non-empty --epsilon-list"),
    };
    let settings = cfg.settings(Some(eps[0]))?;
    let mut points = run_sweep(net, ds, &settings, &eps)?;
    if cfg.omit_timing() {
        points.iter_mut().for_each(|p| p.avg_runtime_seconds = 0.0);
    }
    let report = SweepReport {
        header: Header::new("sweep", cfg),
        points,
    };
    emit(cfg.out.as_deref(), &to_json(&report)?)?;
    Ok(true)
}

#[derive(Serialize)]
struct EstimatedBounds {
    time_index: usize,
    est_lower: f64,
    est_upper: f64,
}

#[derive(Serialize)]
struct MonotonicityReport {
    #[serde(flatten)]
    header: Header,
    #[serde(flatten)]
    section: MonotonicitySection,
    bounds: Vec<EstimatedBounds>,
}

pub fn monotonicity(cfg: &CampaignConfig, net: &Network, ds: &Dataset) -> Result<bool> {
    let result = campaign(cfg, net, ds, 0)?;
    let report = MonotonicityReport {
        header: Header::new("monotonicity", cfg),
        section: mono_section(cfg, &result.records)?,
        bounds: result
            .records
            .iter()
            .map(|r| EstimatedBounds {
                time_index: r.time_index,
                est_lower: r.est_lower,
                est_upper: r.est_upper,
            })
            .collect(),
    };
    emit(cfg.out.as_deref(), &to_json(&report)?)?;
    Ok(true)
}

#[derive(Serialize)]
struct OracleCheck {
    time_index: usize,
    check: &'static str,
    passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    violations: Option<usize>,
    /// Largest distance from computed bounds to the oracle's.
    max_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampled_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sampled_max: Option<f64>,
}

#[derive(Serialize)]
struct OracleReport {
    #[serde(flatten)]
    header: Header,
    fault_injected: bool,
    checks_run: usize,
    checks_failed: usize,
    passed: bool,
    checks: Vec<OracleCheck>,
}

fn corrupted(net: &Network) -> Result<Network> {
    let mut layers = net.layers().to_vec();
    let last = layers
        .iter_mut()
        .rev()
        .find(|l| !matches!(l, Layer::Relu))
        .context("network has no linear layer to corrupt")?;
    match last {
        Layer::FullyConnected(fc) => fc.bias += FAULT_SHIFT,
        Layer::Conv1d(conv) => conv.bias += FAULT_SHIFT,
        Layer::Relu => unreachable!(),
    }
    Ok(Network::new(net.input_features(), layers)?)
}

fn max_deviation(a: &[tsreach::Interval], b: &[tsreach::Interval]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x.lower - y.lower).abs().max((x.upper - y.upper).abs()))
        .fold(0.0, f64::max)
}

/// Per window: sampled soundness of all output bounds; exact affine
/// composition when the network has no ReLU; vertex enumeration when the
/// output predicate is small enough.
pub fn oracle_check(cfg: &CampaignConfig, net: &Network, ds: &Dataset, inject_fault: bool) -> Result<bool> {
    let settings = cfg.settings(None)?;
    let samples = cfg.samples.unwrap_or(crate::config::DEFAULT_ORACLE_SAMPLES);
    let forward_net = if inject_fault { corrupted(net)? } else { net.clone() };
    let affine = net.layers().iter().all(|l| !matches!(l, Layer::Relu));
    let time = settings.window_length;
    let dim = net.last_step_index(time, settings.output_channel)?;
    let first = settings.first_end();
    let mut checks = Vec::new();
    for end in first..first + settings.windows {
        let in_window = |e: tsreach::Error| anyhow::Error::from(e).context(format!("window {end}"));
        let input = window_star(ds, &settings, end).map_err(in_window)?;
        let (out, _) = net.reach(&input, time).map_err(in_window)?;
        let bounds = out.bounds().map_err(in_window)?;
        let seed = settings.seed.wrapping_add(end as u64);
        let report = soundness_against(&bounds, &forward_net, &input, time, samples, seed).map_err(in_window)?;
        checks.push(OracleCheck {
            time_index: end,
            check: "sampled-soundness",
            passed: report.passed(),
            samples: Some(report.samples),
            violations: Some(report.violations),
            max_deviation: report.worst_excess,
            sampled_min: Some(report.dims[dim].sampled_min),
            sampled_max: Some(report.dims[dim].sampled_max),
        });
        if affine {
            let (m, b) = compose_affine(net, time).map_err(in_window)?;
            let exact = input.affine_map(m.view(), b.view()).map_err(in_window)?.bounds().map_err(in_window)?;
            let dev = max_deviation(&bounds, &exact);
            checks.push(OracleCheck {
                time_index: end,
                check: "affine-exactness",
                passed: dev <= REACH_TOL,
                samples: None,
                violations: None,
                max_deviation: dev,
                sampled_min: None,
                sampled_max: None,
            });
        }
        let m = out.num_generators();
        if m <= MAX_ENUM_VARS && out.num_constraints() + 2 * m <= MAX_ENUM_ROWS {
            let exact = vertex_enum_bounds(&out).map_err(in_window)?;
            let dev = max_deviation(&bounds, &exact);
            checks.push(OracleCheck {
                time_index: end,
                check: "lp-vs-vertices",
                passed: dev <= 1e-7,
                samples: None,
                violations: None,
                max_deviation: dev,
                sampled_min: None,
                sampled_max: None,
            });
        }
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    let report = OracleReport {
        header: Header::new("oracle-check", cfg),
        fault_injected: inject_fault,
        checks_run: checks.len(),
        checks_failed: failed,
        passed: failed == 0,
        checks,
    };
    emit(cfg.out.as_deref(), &to_json(&report)?)?;
    if failed > 0 {
        eprintln!("oracle-check: {failed} of {} checks failed", report.checks_run);
    }
    Ok(failed == 0)
}
