//! Input stars for bounded L∞ sensor noise on a series window.

use crate::error::{Error, Result};
use crate::model_io::{mean_std, SeriesWindow};
use crate::star::Star;
use serde::{Deserialize, Serialize};

/// Where the noise lands on the `features × time` window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum NoiseKind {
    /// One feature, one time step.
    Sfsi,
    /// One feature, every time step.
    Sfai,
    /// Every feature, one time step.
    Mfsi,
    /// Every feature, every time step.
    Mfai,
}

impl NoiseKind {
    pub const ALL: [NoiseKind; 4] = [NoiseKind::Sfsi, NoiseKind::Sfai, NoiseKind::Mfsi, NoiseKind::Mfai];

    pub fn single_feature(self) -> bool {
        matches!(self, NoiseKind::Sfsi | NoiseKind::Sfai)
    }

    pub fn single_instance(self) -> bool {
        matches!(self, NoiseKind::Sfsi | NoiseKind::Mfsi)
    }

    /// Number of perturbed coordinates on an `n_f × t_s` window.
    pub fn coordinate_count(self, n_f: usize, t_s: usize) -> usize {
        let f = if self.single_feature() { 1 } else { n_f };
        let t = if self.single_instance() { 1 } else { t_s };
        f * t
    }
}

/// What `epsilon_percent` is a percentage of.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseReference {
    /// Mean of the feature over the current window.
    #[default]
    MeanOfFeatureWindow,
    /// Magnitude of the perturbed value itself.
    AbsoluteValueAtPoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    /// 0-based; required for single-feature kinds.
    pub feature: Option<usize>,
    /// 0-based; single-instance kinds default to the last step.
    pub time: Option<usize>,
    pub epsilon_percent: f64,
    #[serde(default)]
    pub reference: NoiseReference,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, feature: Option<usize>, time: Option<usize>, epsilon_percent: f64) -> Self {
        NoiseSpec {
            kind,
            feature,
            time,
            epsilon_percent,
            reference: NoiseReference::default(),
        }
    }

    pub fn with_epsilon(&self, epsilon_percent: f64) -> Self {
        NoiseSpec {
            epsilon_percent,
            ..self.clone()
        }
    }

    fn coordinates(&self, n_f: usize, t_s: usize) -> Result<Vec<(usize, usize)>> {
        if !self.epsilon_percent.is_finite() || self.epsilon_percent < 0.0 {
            return Err(Error::invalid(format!(
                "epsilon_percent {} must be finite and non-negative",
                self.epsilon_percent
            )));
        }
        let features: Vec<usize> = if self.kind.single_feature() {
            let f = self
                .feature
                .ok_or_else(|| Error::invalid(format!("{:?} noise needs a feature index", self.kind)))?;
            if f >= n_f {
                return Err(Error::OutOfRange(format!("feature {f} (window has {n_f})")));
            }
            vec![f]
        } else {
            (0..n_f).collect()
        };
        let times: Vec<usize> = if self.kind.single_instance() {
            let t = self.time.unwrap_or(t_s - 1);
            if t >= t_s {
                return Err(Error::OutOfRange(format!("time step {t} (window has {t_s})")));
            }
            vec![t]
        } else {
            (0..t_s).collect()
        };
        Ok(features
            .iter()
            .flat_map(|&f| times.iter().map(move |&t| (f, t)))
            .collect())
    }
}

/// Per-coordinate noise radii on the flattened window.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseRadii {
    pub radii: Vec<f64>,
    /// Features whose window mean was ~0, so the radius was scaled by the
    /// window standard deviation instead.
    pub std_fallback_features: Vec<usize>,
}

const MEAN_FLOOR: f64 = 1e-12;

pub fn noise_radii(window: &SeriesWindow, spec: &NoiseSpec) -> Result<NoiseRadii> {
    let (n_f, t_s) = window.values.dim();
    let coords = spec.coordinates(n_f, t_s)?;
    let scale = spec.epsilon_percent / 100.0;
    let mut radii = vec![0.0; n_f * t_s];
    let mut fallback = Vec::new();
    let mut reference = vec![None; n_f];
    for (f, t) in coords {
        let r = match spec.reference {
            NoiseReference::AbsoluteValueAtPoint => window.values[[f, t]].abs(),
            NoiseReference::MeanOfFeatureWindow => *reference[f].get_or_insert_with(|| {
                let (mu, sd) = mean_std(window.values.row(f).iter().copied());
                if mu.abs() < MEAN_FLOOR {
                    fallback.push(f);
                    sd
                } else {
                    mu.abs()
                }
            }),
        };
        radii[f * t_s + t] = scale * r;
    }
    Ok(NoiseRadii {
        radii,
        std_fallback_features: fallback,
    })
}

/// Box star centered on the window, one generator per perturbed coordinate
/// with a strictly positive radius.
pub fn make_noise_star(window: &SeriesWindow, spec: &NoiseSpec) -> Result<Star> {
    let radii = noise_radii(window, spec)?;
    Star::from_box(&window.flatten(), &radii.radii)
}

/// Largest per-coordinate perturbation.
pub fn linf_radius(window: &SeriesWindow, spec: &NoiseSpec) -> Result<f64> {
    Ok(noise_radii(window, spec)?.radii.into_iter().fold(0.0, f64::max))
}
