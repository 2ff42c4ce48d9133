//! Campaign configuration: JSON file and command-line flags share one shape,
//! and flags override the file field by field.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tsreach::campaign::{CampaignSettings, DEFAULT_MONO_K, DEFAULT_SEED, DEFAULT_WINDOWS, DEFAULT_WINDOW_LENGTH};
use tsreach::{AllowMode, NoiseKind, NoiseReference, NoiseSpec, TargetOffset};

pub const DEFAULT_ORACLE_SAMPLES: usize = 10_000;
pub const DEFAULT_SELF_CHECK_SAMPLES: usize = 100;

/// All indices here are 1-based.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CampaignConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zscore: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_length: Option<usize>,
    /// Time index of the first window's last step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub windows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_kind: Option<NoiseKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature: Option<usize>,
    /// Step within the window for single-instance noise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_step: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_reference: Option<NoiseReference>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_mode: Option<AllowMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allow_width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_zero: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clamp_estimate: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_offset: Option<TargetOffset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_channel: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monotonicity: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mono_k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub self_check_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omit_timing: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn parse_kind(s: &str) -> Result<NoiseKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_uppercase()))
        .map_err(|_| format!("unknown noise kind {s:?} (expected sfsi, sfai, mfsi or mfai)"))
}

fn parse_kebab<T: for<'de> Deserialize<'de>>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|e| e.to_string())
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args)]
pub struct CampaignArgs {
    /// JSON file with the same fields as the flags (snake_case); flags win.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Network JSON file.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// CSV series file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Feature columns in network input order (default: every numeric column except the target).
    #[arg(long, value_delimiter = ',')]
    pub features: Option<Vec<String>>,
    /// Target column name [default: target].
    #[arg(long)]
    pub target: Option<String>,
    /// Z-score features with the series' own statistics before windowing.
    #[arg(long)]
    pub zscore: bool,
    /// Steps per window [default: 30].
    #[arg(long)]
    pub window_length: Option<usize>,
    /// Time index (1-based) of the first window's last step [default: window length].
    #[arg(long)]
    pub start: Option<usize>,
    /// Number of consecutive windows [default: 100].
    #[arg(long)]
    pub windows: Option<usize>,
    /// sfsi, sfai, mfsi or mfai.
    #[arg(long, value_parser = parse_kind)]
    pub noise_kind: Option<NoiseKind>,
    /// Perturbed feature (1-based) for single-feature noise.
    #[arg(long)]
    pub feature: Option<usize>,
    /// Perturbed step within the window (1-based) for single-instance noise [default: last].
    #[arg(long)]
    pub time_step: Option<usize>,
    /// Noise magnitude in percent of the reference value.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Comma-separated magnitudes for `sweep`.
    #[arg(long, value_delimiter = ',')]
    pub epsilon_list: Option<Vec<f64>>,
    /// mean-of-feature-window or absolute-value-at-point.
    #[arg(long, value_parser = parse_kebab::<NoiseReference>)]
    pub noise_reference: Option<NoiseReference>,
    /// relative-percent or absolute-offset.
    #[arg(long, value_parser = parse_kebab::<AllowMode>)]
    pub allow_mode: Option<AllowMode>,
    /// Percent (relative mode) or offset (absolute mode).
    #[arg(long)]
    pub allow_width: Option<f64>,
    /// Clamp allowable lower bounds at 0.
    #[arg(long)]
    pub clamp_zero: bool,
    /// Clamp estimated lower bounds at 0.
    #[arg(long)]
    pub clamp_estimate: bool,
    /// same-step or next-step.
    #[arg(long, value_parser = parse_kebab::<TargetOffset>)]
    pub target_offset: Option<TargetOffset>,
    /// Network output channel (1-based) holding the prediction [default: 1].
    #[arg(long)]
    pub output_channel: Option<usize>,
    /// Also report local monotonicity (`verify`).
    #[arg(long)]
    pub monotonicity: bool,
    /// Windows per monotonicity fit [default: 5].
    #[arg(long)]
    pub mono_k: Option<usize>,
    /// Largest slope still counted as decreasing [default: 0].
    #[arg(long)]
    pub slope_tol: Option<f64>,
    /// Sampling seed [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Samples per window for `oracle-check` [default: 10000].
    #[arg(long)]
    pub samples: Option<usize>,
    /// Samples per window for the soundness self-check of `verify` [default: 100].
    #[arg(long)]
    pub self_check_samples: Option<usize>,
    /// Write 0 for every timing field (byte-stable outputs).
    #[arg(long)]
    pub omit_timing: bool,
    /// Output file (stdout when absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn flag(set: bool) -> Option<bool> {
    set.then_some(true)
}

impl CampaignArgs {
    fn as_config(&self) -> CampaignConfig {
        CampaignConfig {
            model: self.model.clone(),
            data: self.data.clone(),
            features: self.features.clone(),
            target: self.target.clone(),
            zscore: flag(self.zscore),
            window_length: self.window_length,
            start: self.start,
            windows: self.windows,
            noise_kind: self.noise_kind,
            feature: self.feature,
            time_step: self.time_step,
            epsilon: self.epsilon,
            epsilon_list: self.epsilon_list.clone(),
            noise_reference: self.noise_reference,
            allow_mode: self.allow_mode,
            allow_width: self.allow_width,
            clamp_zero: flag(self.clamp_zero),
            clamp_estimate: flag(self.clamp_estimate),
            target_offset: self.target_offset,
            output_channel: self.output_channel,
            monotonicity: flag(self.monotonicity),
            mono_k: self.mono_k,
            slope_tol: self.slope_tol,
            seed: self.seed,
            samples: self.samples,
            self_check_samples: self.self_check_samples,
            omit_timing: flag(self.omit_timing),
            out: self.out.clone(),
        }
    }

    /// Reads `--config` (if any), overlays the flags and fills defaults.
    pub fn resolve(&self) -> Result<CampaignConfig> {
        let base = match &self.config {
            Some(path) => CampaignConfig::from_file(path)?,
            None => CampaignConfig::default(),
        };
        Ok(self.as_config().over(base).with_defaults())
    }
}

impl CampaignConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields set in `self` win over `base`.
    fn over(self, base: CampaignConfig) -> CampaignConfig {
        macro_rules! pick {
            ($($f:ident),*) => { CampaignConfig { $($f: self.$f.or(base.$f)),* } };
        }
        pick!(
            model,
            data,
            features,
            target,
            zscore,
            window_length,
            start,
            windows,
            noise_kind,
            feature,
            time_step,
            epsilon,
            epsilon_list,
            noise_reference,
            allow_mode,
            allow_width,
            clamp_zero,
            clamp_estimate,
            target_offset,
            output_channel,
            monotonicity,
            mono_k,
            slope_tol,
            seed,
            samples,
            self_check_samples,
            omit_timing,
            out
        )
    }

    fn with_defaults(mut self) -> CampaignConfig {
        let window_length = *self.window_length.get_or_insert(DEFAULT_WINDOW_LENGTH);
        self.target.get_or_insert_with(|| "target".into());
        self.zscore.get_or_insert(false);
        self.start.get_or_insert(window_length);
        self.windows.get_or_insert(DEFAULT_WINDOWS);
        self.noise_reference.get_or_insert_with(NoiseReference::default);
        self.allow_mode.get_or_insert(AllowMode::RelativePercent);
        self.clamp_zero.get_or_insert(false);
        self.clamp_estimate.get_or_insert(false);
        self.target_offset.get_or_insert(TargetOffset::SameStep);
        self.output_channel.get_or_insert(1);
        self.monotonicity.get_or_insert(false);
        self.mono_k.get_or_insert(DEFAULT_MONO_K);
        self.slope_tol.get_or_insert(0.0);
        self.seed.get_or_insert(DEFAULT_SEED);
        self.samples.get_or_insert(DEFAULT_ORACLE_SAMPLES);
        self.self_check_samples.get_or_insert(DEFAULT_SELF_CHECK_SAMPLES);
        self.omit_timing.get_or_insert(false);
        self
    }

    pub fn model_path(&self) -> Result<&Path> {
        self.model.as_deref().context("missing --model")
    }

    pub fn data_path(&self) -> Result<&Path> {
        self.data.as_deref().context("missing --data")
    }

    pub fn omit_timing(&self) -> bool {
        self.omit_timing.unwrap_or(false)
    }

    /// Converts to core settings (0-based indices). `epsilon` overrides the
    /// configured magnitude, for sweeps.
    pub fn settings(&self, epsilon: Option<f64>) -> Result<CampaignSettings> {
        let kind = self.noise_kind.context("missing --noise-kind")?;
        let epsilon = match epsilon.or(self.epsilon) {
            Some(e) => e,
            None => bail!("missing --epsilon"),
        };
        let feature = match self.feature {
            Some(0) => bail!("--feature is 1-based"),
            Some(f) => Some(f - 1),
            None if kind.single_feature() => bail!("{kind:?} noise needs --feature"),
            None => None,
        };
        let time = match self.time_step {
            Some(0) => bail!("--time-step is 1-based"),
            Some(t) => Some(t - 1),
            None => None,
        };
        let output_channel = match self.output_channel.unwrap_or(1) {
            0 => bail!("--output-channel is 1-based"),
            c => c - 1,
        };
        let allow_width = self.allow_width.context("missing --allow-width")?;
        let mut noise = NoiseSpec::new(kind, feature, time, epsilon);
        noise.reference = self.noise_reference.unwrap_or_default();
        let mut s = CampaignSettings::new(noise, self.allow_mode.unwrap_or(AllowMode::RelativePercent), allow_width);
        s.window_length = self.window_length.unwrap_or(DEFAULT_WINDOW_LENGTH);
        s.start = self.start;
        s.windows = self.windows.unwrap_or(DEFAULT_WINDOWS);
        s.clamp_zero = self.clamp_zero.unwrap_or(false);
        s.clamp_estimate = self.clamp_estimate.unwrap_or(false);
        s.target_offset = self.target_offset.unwrap_or(TargetOffset::SameStep);
        s.output_channel = output_channel;
        s.seed = self.seed.unwrap_or(DEFAULT_SEED);
        Ok(s)
    }
}
