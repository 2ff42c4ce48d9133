//! Verification campaigns over consecutive sliding windows.

use crate::error::{Error, Result};
use crate::layers::{Network, REACH_TOL};
use crate::metrics::{
    allowable_bounds, monotonicity_check, percentage_overlap_robustness, percentage_robustness, AllowMode,
    MonotonicityVerdict, StepVerdict,
};
use crate::model_io::{Dataset, TargetOffset};
use crate::noise::{make_noise_star, noise_radii, NoiseSpec};
use crate::star::{Interval, Star};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::time::Instant;

pub const DEFAULT_WINDOW_LENGTH: usize = 30;
pub const DEFAULT_WINDOWS: usize = 100;
pub const DEFAULT_MONO_K: usize = 5;
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSettings {
    pub window_length: usize,
    /// Exclusive end of the first window (0-based); defaults to
    /// `window_length`, the first full window.
    pub start: Option<usize>,
    pub windows: usize,
    pub noise: NoiseSpec,
    pub allow_mode: AllowMode,
    pub allow_width: f64,
    pub clamp_zero: bool,
    /// Raise negative estimated lower bounds to 0 as well.
    pub clamp_estimate: bool,
    pub target_offset: TargetOffset,
    /// Output channel whose last time step is the prediction.
    pub output_channel: usize,
    /// Sampled noisy inputs per window checked against the bounds.
    pub self_check_samples: usize,
    pub seed: u64,
}

impl CampaignSettings {
    pub fn new(noise: NoiseSpec, allow_mode: AllowMode, allow_width: f64) -> Self {
        CampaignSettings {
            window_length: DEFAULT_WINDOW_LENGTH,
            start: None,
            windows: DEFAULT_WINDOWS,
            noise,
            allow_mode,
            allow_width,
            clamp_zero: false,
            clamp_estimate: false,
            target_offset: TargetOffset::SameStep,
            output_channel: 0,
            self_check_samples: 0,
            seed: DEFAULT_SEED,
        }
    }

    pub fn first_end(&self) -> usize {
        self.start.unwrap_or(self.window_length)
    }

    fn validate(&self) -> Result<()> {
        if self.window_length == 0 {
            return Err(Error::invalid("window length must be at least 1"));
        }
        if self.windows == 0 {
            return Err(Error::invalid("a campaign needs at least one window"));
        }
        Ok(())
    }
}

/// One verified window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowRecord {
    /// 1-based step of the window's last sample.
    pub time_index: usize,
    pub actual: f64,
    pub predicted: f64,
    pub est_lower: f64,
    pub est_upper: f64,
    pub allow_lower: f64,
    pub allow_upper: f64,
    pub rv: u8,
    pub po: f64,
    pub input_generators: usize,
    pub output_generators: usize,
    pub output_constraints: usize,
    pub self_check_violations: usize,
    pub runtime_seconds: f64,
}

impl WindowRecord {
    pub fn estimated(&self) -> Interval {
        Interval {
            lower: self.est_lower,
            upper: self.est_upper,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub records: Vec<WindowRecord>,
    pub verdicts: Vec<StepVerdict>,
    pub pr: f64,
    pub por: f64,
    pub runtimes: Vec<f64>,
    pub avg_runtime_seconds: f64,
    /// Features whose noise radius fell back to the window std (0-based).
    pub std_fallback_features: Vec<usize>,
    pub self_check_violations: usize,
    pub monotonicity: Option<Vec<MonotonicityVerdict>>,
}

/// Verifies the window ending at `end`. The self-check compares sampled
/// outputs against the bounds before any clamping.
pub fn verify_window(
    net: &Network,
    ds: &Dataset,
    settings: &CampaignSettings,
    end: usize,
    fallback: &mut BTreeSet<usize>,
) -> Result<WindowRecord> {
    let t_s = settings.window_length;
    let (window, actual) = ds.window(end, t_s, settings.target_offset)?;
    let dim = net.last_step_index(t_s, settings.output_channel)?;

    let started = Instant::now();
    let radii = noise_radii(&window, &settings.noise)?;
    fallback.extend(radii.std_fallback_features.iter().copied());
    let input = Star::from_box(&window.flatten(), &radii.radii)?;
    let (out, _) = net.reach(&input, t_s)?;
    let raw = out.lp_bounds(dim)?;
    let runtime = started.elapsed().as_secs_f64();

    let predicted = net.forward(window.values.view())?.iter().nth(dim).copied().unwrap_or(f64::NAN);

    let mut self_check_violations = 0;
    if settings.self_check_samples > 0 {
        let seed = settings.seed.wrapping_add(end as u64);
        for x in input.sample_members(settings.self_check_samples, seed)? {
            let y = net.forward_flat(x.as_slice().expect("contiguous"), t_s)?[dim];
            if y < raw.lower - REACH_TOL || y > raw.upper + REACH_TOL {
                self_check_violations += 1;
            }
        }
    }

    let mut estimated = raw;
    if settings.clamp_estimate {
        estimated.lower = estimated.lower.max(0.0);
        estimated.upper = estimated.upper.max(estimated.lower);
    }
    let allowable = allowable_bounds(actual, settings.allow_mode, settings.allow_width, settings.clamp_zero)?;
    let verdict = StepVerdict::new(end, estimated, allowable);
    Ok(WindowRecord {
        time_index: end,
        actual,
        predicted,
        est_lower: estimated.lower,
        est_upper: estimated.upper,
        allow_lower: allowable.lower,
        allow_upper: allowable.upper,
        rv: verdict.rv,
        po: verdict.po,
        input_generators: input.num_generators(),
        output_generators: out.num_generators(),
        output_constraints: out.num_constraints(),
        self_check_violations,
        runtime_seconds: runtime,
    })
}

/// Runs `settings.windows` consecutive windows. Errors carry the 1-based
/// step index of the failing window.
pub fn run_campaign(net: &Network, ds: &Dataset, settings: &CampaignSettings) -> Result<CampaignResult> {
    settings.validate()?;
    let first = settings.first_end();
    let last = first + settings.windows - 1;
    if first < settings.window_length || last > ds.len() {
        return Err(Error::OutOfRange(format!(
            "windows end at steps {first}..={last} but the series has {} steps and windows are {} long",
            ds.len(),
            settings.window_length
        ))
        .in_window(if first < settings.window_length { first } else { last }));
    }
    let mut fallback = BTreeSet::new();
    let mut records = Vec::with_capacity(settings.windows);
    for end in first..=last {
        let rec = verify_window(net, ds, settings, end, &mut fallback).map_err(|e| e.in_window(end))?;
        records.push(rec);
    }
    summarize(records, fallback.into_iter().collect())
}

fn summarize(records: Vec<WindowRecord>, std_fallback_features: Vec<usize>) -> Result<CampaignResult> {
    let verdicts: Vec<StepVerdict> = records
        .iter()
        .map(|r| StepVerdict {
            time_index: r.time_index,
            estimated: r.estimated(),
            allowable: Interval {
                lower: r.allow_lower,
                upper: r.allow_upper,
            },
            rv: r.rv,
            po: r.po,
        })
        .collect();
    let runtimes: Vec<f64> = records.iter().map(|r| r.runtime_seconds).collect();
    Ok(CampaignResult {
        pr: percentage_robustness(&verdicts)?,
        por: percentage_overlap_robustness(&verdicts)?,
        avg_runtime_seconds: runtimes.iter().sum::<f64>() / runtimes.len() as f64,
        runtimes,
        self_check_violations: records.iter().map(|r| r.self_check_violations).sum(),
        std_fallback_features,
        verdicts,
        records,
        monotonicity: None,
    })
}

/// Local monotonicity for every window with at least `k - 1` predecessors.
pub fn monotonicity_verdicts(records: &[WindowRecord], k: usize, slope_tol: f64) -> Result<Vec<MonotonicityVerdict>> {
    if records.len() < k {
        return Err(Error::invalid(format!(
            "monotonicity window k = {k} needs at least {k} windows, campaign has {}",
            records.len()
        )));
    }
    let history: Vec<Interval> = records.iter().map(WindowRecord::estimated).collect();
    (k.max(2) - 1..records.len())
        .map(|i| {
            monotonicity_check(&history[..=i], k, slope_tol).map(|mut v| {
                v.time_index = records[i].time_index;
                v
            })
        })
        .collect()
}

pub fn pass_fraction(verdicts: &[MonotonicityVerdict]) -> f64 {
    if verdicts.is_empty() {
        return 0.0;
    }
    verdicts.iter().filter(|v| v.pass).count() as f64 / verdicts.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub epsilon_percent: f64,
    pub pr: f64,
    pub por: f64,
    pub avg_runtime_seconds: f64,
    pub mean_estimated_width: f64,
    /// Estimated interval width of every window, in campaign order.
    pub estimated_widths: Vec<f64>,
    pub self_check_violations: usize,
}

/// One campaign per noise magnitude.
pub fn run_sweep(net: &Network, ds: &Dataset, settings: &CampaignSettings, epsilons: &[f64]) -> Result<Vec<SweepPoint>> {
    if epsilons.is_empty() {
        return Err(Error::invalid("epsilon list is empty"));
    }
    epsilons
        .iter()
        .map(|&eps| {
            let s = CampaignSettings {
                noise: settings.noise.with_epsilon(eps),
                ..settings.clone()
            };
            let r = run_campaign(net, ds, &s)?;
            let widths: Vec<f64> = r.records.iter().map(|w| w.est_upper - w.est_lower).collect();
            Ok(SweepPoint {
                epsilon_percent: eps,
                pr: r.pr,
                por: r.por,
                avg_runtime_seconds: r.avg_runtime_seconds,
                mean_estimated_width: widths.iter().sum::<f64>() / widths.len() as f64,
                estimated_widths: widths,
                self_check_violations: r.self_check_violations,
            })
        })
        .collect()
}

/// Noise star for the window ending at `end`; convenience for oracle runs.
pub fn window_star(ds: &Dataset, settings: &CampaignSettings, end: usize) -> Result<Star> {
    let (window, _) = ds.window(end, settings.window_length, settings.target_offset)?;
    make_noise_star(&window, &settings.noise)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layers::{FullyConnected, Layer};
    use crate::noise::NoiseKind;
    use ndarray::{array, Array2};

    /// Output = feature 0 (the network passes the window through).
    fn passthrough() -> Network {
        Network::new(1, vec![Layer::FullyConnected(FullyConnected::new(array![[1.0]], array![0.0]).unwrap())]).unwrap()
    }

    fn ramp(values: Vec<f64>, target: Vec<f64>) -> Dataset {
        let t = values.len();
        Dataset::new(vec!["x".into()], "y".into(), Array2::from_shape_vec((1, t), values).unwrap(), target).unwrap()
    }

    #[test]
    fn zero_noise_collapses_to_prediction() {
        let ds = ramp((0..20).map(|v| v as f64 + 1.0).collect(), (0..20).map(|v| v as f64 + 1.0).collect());
        let mut s = CampaignSettings::new(NoiseSpec::new(NoiseKind::Mfai, None, None, 0.0), AllowMode::AbsoluteOffset, 0.5);
        s.window_length = 5;
        s.windows = 10;
        let r = run_campaign(&passthrough(), &ds, &s).unwrap();
        for rec in &r.records {
            assert!((rec.est_lower - rec.predicted).abs() <= REACH_TOL);
            assert!((rec.est_upper - rec.predicted).abs() <= REACH_TOL);
        }
        assert_eq!(r.pr, 100.0);
    }

    #[test]
    fn out_of_range_names_window() {
        let ds = ramp(vec![1.0; 10], vec![1.0; 10]);
        let mut s = CampaignSettings::new(NoiseSpec::new(NoiseKind::Mfai, None, None, 1.0), AllowMode::AbsoluteOffset, 0.5);
        s.window_length = 5;
        s.windows = 10;
        let err = run_campaign(&passthrough(), &ds, &s).unwrap_err();
        assert!(matches!(err, Error::Window { index: 14, .. }), "{err}");
    }

    #[test]
    fn decreasing_outputs_are_monotone() {
        let vals: Vec<f64> = (0..40).map(|v| 100.0 - v as f64).collect();
        let ds = ramp(vals.clone(), vals.clone());
        let mut s = CampaignSettings::new(NoiseSpec::new(NoiseKind::Sfsi, Some(0), None, 1.0), AllowMode::AbsoluteOffset, 10.0);
        s.window_length = 5;
        s.windows = 30;
        let r = run_campaign(&passthrough(), &ds, &s).unwrap();
        let m = monotonicity_verdicts(&r.records, 5, 0.0).unwrap();
        assert_eq!(m.len(), 26);
        assert_eq!(pass_fraction(&m), 1.0);

        let rev: Vec<f64> = vals.iter().rev().copied().collect();
        let r = run_campaign(&passthrough(), &ramp(rev.clone(), rev), &s).unwrap();
        assert_eq!(pass_fraction(&monotonicity_verdicts(&r.records, 5, 0.0).unwrap()), 0.0);
    }
}
