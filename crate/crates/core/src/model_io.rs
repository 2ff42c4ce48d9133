//! Network interchange files, CSV series ingestion, windowing and feature
//! preprocessing.
//!
//! Network file (JSON):
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "input_features": 5,
//!   "layers": [
//!     {"kind": "conv1d", "weights": [[[..taps..], ..channels..], ..filters..],
//!      "bias": [..], "stride": 1, "dilation": 1, "pad_left": 2, "pad_right": 0},
//!     {"kind": "relu"},
//!     {"kind": "fc", "weights": [[..inputs..], ..outputs..], "bias": [..]}
//!   ]
//! }
//! ```

use crate::error::{Error, Result};
use crate::layers::{Conv1d, FullyConnected, Layer, Network};
use ndarray::{s, Array1, Array2, Array3, Axis};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::{Read, Write};
use std::path::Path;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// An `n_f × t_s` slice of a multivariate series.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesWindow {
    pub values: Array2<f64>,
    pub feature_names: Vec<String>,
    /// 0-based index of the first column within the source series.
    pub start_time_index: usize,
}

impl SeriesWindow {
    pub fn new(values: Array2<f64>, feature_names: Vec<String>, start_time_index: usize) -> Result<Self> {
        let (nf, ts) = values.dim();
        if nf == 0 || ts == 0 {
            return Err(Error::invalid("window must have at least one feature and one step"));
        }
        if feature_names.len() != nf {
            return Err(Error::invalid(format!(
                "{} feature names for {nf} features",
                feature_names.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("window contains non-finite values"));
        }
        Ok(SeriesWindow {
            values,
            feature_names,
            start_time_index,
        })
    }

    /// Unnamed window, mostly for tests.
    pub fn from_values(values: Array2<f64>) -> Result<Self> {
        let names = (0..values.nrows()).map(|i| format!("f{}", i + 1)).collect();
        Self::new(values, names, 0)
    }

    pub fn num_features(&self) -> usize {
        self.values.nrows()
    }

    pub fn len(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Feature-major flattening: feature `i`, step `j` at `i * len + j`.
    pub fn flatten(&self) -> Vec<f64> {
        self.values.iter().copied().collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub feature_names: Vec<String>,
    pub target_name: String,
    /// `n_f × T`
    pub series: Array2<f64>,
    pub target: Vec<f64>,
    pub normalization: Option<Normalization>,
}

/// Which sample the window's target comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetOffset {
    /// Target at the window's last step.
    SameStep,
    /// Target one step after the window.
    NextStep,
}

impl Dataset {
    pub fn new(feature_names: Vec<String>, target_name: String, series: Array2<f64>, target: Vec<f64>) -> Result<Self> {
        if series.ncols() != target.len() {
            return Err(Error::invalid(format!(
                "series has {} steps, target has {}",
                series.ncols(),
                target.len()
            )));
        }
        if feature_names.len() != series.nrows() {
            return Err(Error::invalid("feature name count does not match series rows"));
        }
        Ok(Dataset {
            feature_names,
            target_name,
            series,
            target,
            normalization: None,
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    pub fn num_features(&self) -> usize {
        self.series.nrows()
    }

    /// Window covering steps `[end - t_s, end)` (0-based, end exclusive) and
    /// its target.
    pub fn window(&self, end: usize, t_s: usize, offset: TargetOffset) -> Result<(SeriesWindow, f64)> {
        if t_s == 0 {
            return Err(Error::invalid("window length must be at least 1"));
        }
        if end < t_s || end > self.len() {
            return Err(Error::OutOfRange(format!(
                "window ending at {end} with length {t_s} (series has {} steps)",
                self.len()
            )));
        }
        let target_idx = match offset {
            TargetOffset::SameStep => end - 1,
            TargetOffset::NextStep => end,
        };
        let actual = *self.target.get(target_idx).ok_or_else(|| {
            Error::OutOfRange(format!(
                "target step {target_idx} for window ending at {end} (series has {} steps)",
                self.len()
            ))
        })?;
        let values = self.series.slice(s![.., end - t_s..end]).to_owned();
        let w = SeriesWindow::new(values, self.feature_names.clone(), end - t_s)?;
        Ok((w, actual))
    }

    /// Per-feature z-score with population standard deviation.
    pub fn zscore(&self) -> Result<Dataset> {
        let mut mean = Vec::with_capacity(self.num_features());
        let mut std = Vec::with_capacity(self.num_features());
        let mut series = self.series.clone();
        for (i, mut row) in series.axis_iter_mut(Axis(0)).enumerate() {
            let (mu, sd) = mean_std(row.iter().copied());
            if sd.is_nan() || sd <= 0.0 {
                return Err(Error::ZeroStd(self.feature_names[i].clone()));
            }
            row.mapv_inplace(|v| (v - mu) / sd);
            mean.push(mu);
            std.push(sd);
        }
        Ok(Dataset {
            series,
            normalization: Some(Normalization { mean, std }),
            ..self.clone()
        })
    }

    /// Inverse of `zscore`.
    pub fn denormalize(&self) -> Result<Dataset> {
        let norm = self
            .normalization
            .as_ref()
            .ok_or_else(|| Error::invalid("dataset is not normalized"))?;
        let mut series = self.series.clone();
        for (i, mut row) in series.axis_iter_mut(Axis(0)).enumerate() {
            let (mu, sd) = (norm.mean[i], norm.std[i]);
            row.mapv_inplace(|v| v * sd + mu);
        }
        Ok(Dataset {
            series,
            normalization: None,
            ..self.clone()
        })
    }

    /// Keeps the listed features (by position) in the given order.
    pub fn select_features(&self, keep: &[usize]) -> Result<Dataset> {
        if let Some(k) = keep.iter().find(|&&k| k >= self.num_features()) {
            return Err(Error::OutOfRange(format!("feature {k}")));
        }
        Ok(Dataset {
            feature_names: keep.iter().map(|&k| self.feature_names[k].clone()).collect(),
            series: self.series.select(Axis(0), keep),
            normalization: self.normalization.as_ref().map(|n| Normalization {
                mean: keep.iter().map(|&k| n.mean[k]).collect(),
                std: keep.iter().map(|&k| n.std[k]).collect(),
            }),
            ..self.clone()
        })
    }
}

/// Population mean and standard deviation.
pub fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    (mean, var.sqrt())
}

/// Reads a series CSV. `features = None` selects every column except the
/// target and columns named `time`/`timestamp` (case-insensitive).
pub fn read_series<R: Read>(reader: R, features: Option<&[String]>, target: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::Parse("series file is empty".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let target_col = find(target)?;
    let feature_cols: Vec<usize> = match features {
        Some(list) => list.iter().map(|f| find(f)).collect::<Result<_>>()?,
        None => (0..headers.len())
            .filter(|&c| {
                let h = headers[c].to_ascii_lowercase();
                c != target_col && h != "time" && h != "timestamp"
            })
            .collect(),
    };
    if feature_cols.is_empty() {
        return Err(Error::invalid("no feature columns selected"));
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); feature_cols.len()];
    let mut target_vals = Vec::new();
    for (row_idx, record) in rdr.records().enumerate() {
        let record = record?;
        let parse = |col: usize| -> Result<f64> {
            let raw = record.get(col).unwrap_or("");
            raw.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row: row_idx + 1,
                    column: headers[col].clone(),
                    value: raw.to_string(),
                })
        };
        for (k, &c) in feature_cols.iter().enumerate() {
            columns[k].push(parse(c)?);
        }
        target_vals.push(parse(target_col)?);
    }
    if target_vals.is_empty() {
        return Err(Error::Parse("series file has a header but no data rows".into()));
    }
    let t = target_vals.len();
    let flat: Vec<f64> = columns.into_iter().flatten().collect();
    let series = Array2::from_shape_vec((feature_cols.len(), t), flat).map_err(|e| Error::Internal(e.to_string()))?;
    Dataset::new(
        feature_cols.iter().map(|&c| headers[c].clone()).collect(),
        headers[target_col].clone(),
        series,
        target_vals,
    )
}

pub fn load_series(path: impl AsRef<Path>, features: Option<&[String]>, target: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_series(file, features, target)
}

/// Writes features then target, one row per step. Values use the shortest
/// round-trip decimal form.
pub fn write_series<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = ds.feature_names.iter().map(String::as_str).collect();
    header.push(&ds.target_name);
    w.write_record(&header)?;
    for t in 0..ds.len() {
        let mut row: Vec<String> = ds.series.column(t).iter().map(|v| v.to_string()).collect();
        row.push(ds.target[t].to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum LayerOut<'a> {
    Fc {
        weights: Vec<Vec<f64>>,
        bias: &'a [f64],
    },
    Conv1d {
        weights: Vec<Vec<Vec<f64>>>,
        bias: &'a [f64],
        stride: usize,
        dilation: usize,
        pad_left: usize,
        pad_right: usize,
    },
    Relu,
}

#[derive(Serialize)]
struct NetworkOut<'a> {
    format_version: u32,
    input_features: usize,
    layers: Vec<LayerOut<'a>>,
}

pub fn network_to_json(net: &Network) -> Result<String> {
    let layers = net
        .layers()
        .iter()
        .map(|l| match l {
            Layer::FullyConnected(fc) => LayerOut::Fc {
                weights: fc.weights.outer_iter().map(|r| r.to_vec()).collect(),
                bias: fc.bias.as_slice().expect("contiguous"),
            },
            Layer::Conv1d(c) => LayerOut::Conv1d {
                weights: c
                    .weights
                    .outer_iter()
                    .map(|f| f.outer_iter().map(|ch| ch.to_vec()).collect())
                    .collect(),
                bias: c.bias.as_slice().expect("contiguous"),
                stride: c.stride,
                dilation: c.dilation,
                pad_left: c.pad_left,
                pad_right: c.pad_right,
            },
            Layer::Relu => LayerOut::Relu,
        })
        .collect();
    let doc = NetworkOut {
        format_version: NETWORK_FORMAT_VERSION,
        input_features: net.input_features(),
        layers,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, network_to_json(net)? + "\n")?;
    Ok(())
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let text = std::fs::read_to_string(path)?;
    network_from_json(&text)
}

pub fn network_from_json(text: &str) -> Result<Network> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let version = doc
        .get("format_version")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("missing format_version".into()))?;
    if version != NETWORK_FORMAT_VERSION as u64 {
        return Err(Error::Parse(format!("unsupported format_version {version}")));
    }
    let input_features = doc
        .get("input_features")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Parse("missing input_features".into()))? as usize;
    let layers = doc
        .get("layers")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Parse("missing layers array".into()))?;
    let parsed = layers
        .iter()
        .enumerate()
        .map(|(idx, v)| parse_layer(idx, v))
        .collect::<Result<Vec<_>>>()?;
    Network::new(input_features, parsed)
}

fn parse_layer(idx: usize, v: &Value) -> Result<Layer> {
    let shape_err = |message: String| Error::Shape { layer: idx, message };
    let kind = v
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::Parse(format!("layer {idx}: missing kind")))?;
    let field = |name: &str| {
        v.get(name)
            .ok_or_else(|| Error::Parse(format!("layer {idx} ({kind}): missing {name}")))
    };
    let numbers = |name: &str, x: &Value| -> Result<Vec<f64>> {
        x.as_array()
            .ok_or_else(|| Error::Parse(format!("layer {idx}: {name} must be an array")))?
            .iter()
            .map(|n| {
                n.as_f64()
                    .ok_or_else(|| Error::Parse(format!("layer {idx}: {name} has a non-numeric entry")))
            })
            .collect()
    };
    let nested = |name: &str, x: &Value| -> Result<Vec<Value>> {
        Ok(x.as_array()
            .ok_or_else(|| Error::Parse(format!("layer {idx}: {name} must be an array")))?
            .clone())
    };
    let uint = |name: &str, default: Option<usize>| -> Result<usize> {
        match v.get(name) {
            None => default.ok_or_else(|| Error::Parse(format!("layer {idx} ({kind}): missing {name}"))),
            Some(x) => x
                .as_u64()
                .map(|n| n as usize)
                .ok_or_else(|| Error::Parse(format!("layer {idx}: {name} must be a non-negative integer"))),
        }
    };

    match kind {
        "relu" => Ok(Layer::Relu),
        "fc" => {
            let rows = nested("weights", field("weights")?)?;
            let rows: Vec<Vec<f64>> = rows.iter().map(|r| numbers("weights", r)).collect::<Result<_>>()?;
            let bias = numbers("bias", field("bias")?)?;
            let ip = rows.first().map_or(0, Vec::len);
            if rows.is_empty() || ip == 0 || rows.iter().any(|r| r.len() != ip) {
                return Err(shape_err("fc weights must be a non-empty rectangular [outputs][inputs] array".into()));
            }
            let w = Array2::from_shape_vec((rows.len(), ip), rows.concat()).map_err(|e| shape_err(e.to_string()))?;
            FullyConnected::new(w, Array1::from(bias))
                .map(Layer::FullyConnected)
                .map_err(|e| shape_err(e.to_string()))
        }
        "conv1d" => {
            let filters = nested("weights", field("weights")?)?;
            let mut flat = Vec::new();
            let mut dims: Option<(usize, usize)> = None;
            for f in &filters {
                let chans = nested("weights", f)?;
                for ch in &chans {
                    let taps = numbers("weights", ch)?;
                    match dims {
                        None => dims = Some((chans.len(), taps.len())),
                        Some((nc, wf)) if nc != chans.len() || wf != taps.len() => {
                            return Err(shape_err("conv1d weights must be a rectangular [filters][channels][taps] array".into()))
                        }
                        _ => {}
                    }
                    flat.extend(taps);
                }
            }
            let (nc, wf) = dims.unwrap_or((0, 0));
            if filters.is_empty() || nc == 0 || wf == 0 {
                return Err(shape_err("conv1d weights must be non-empty".into()));
            }
            let w = Array3::from_shape_vec((filters.len(), nc, wf), flat).map_err(|e| shape_err(e.to_string()))?;
            let bias = numbers("bias", field("bias")?)?;
            Conv1d::new(
                w,
                Array1::from(bias),
                uint("stride", Some(1))?,
                uint("pad_left", Some(0))?,
                uint("pad_right", Some(0))?,
                uint("dilation", Some(1))?,
            )
            .map(Layer::Conv1d)
            .map_err(|e| shape_err(e.to_string()))
        }
        other => Err(Error::UnsupportedLayer {
            layer: idx,
            kind: other.to_string(),
        }),
    }
}

/// Per-feature prognosability over a fleet of run-to-failure units:
/// `exp(std_j(x_j(N_j)) / mean_j |x_j(1) - x_j(N_j)|)`, with `j` ranging over
/// units and population standard deviation. NaN when the denominator is 0.
///
/// Each unit is an `n_f × N_j` matrix.
pub fn prognosability(units: &[Array2<f64>]) -> Result<Vec<f64>> {
    let first = units.first().ok_or_else(|| Error::invalid("no units"))?;
    let nf = first.nrows();
    if nf == 0 {
        return Err(Error::invalid("units have no features"));
    }
    if let Some(u) = units.iter().find(|u| u.nrows() != nf || u.ncols() < 2) {
        return Err(Error::invalid(format!(
            "every unit needs {nf} features and at least 2 steps, got {:?}",
            u.dim()
        )));
    }
    Ok((0..nf)
        .map(|f| {
            let ends = units.iter().map(|u| u[[f, u.ncols() - 1]]);
            let (_, spread) = mean_std(ends);
            let change: f64 =
                units.iter().map(|u| (u[[f, 0]] - u[[f, u.ncols() - 1]]).abs()).sum::<f64>() / units.len() as f64;
            if change == 0.0 {
                f64::NAN
            } else {
                (spread / change).exp()
            }
        })
        .collect())
}

/// Indices of features worth keeping: drops NaN scores and features that are
/// constant across every unit.
pub fn screen_features(units: &[Array2<f64>]) -> Result<Vec<usize>> {
    let scores = prognosability(units)?;
    Ok((0..scores.len())
        .filter(|&f| {
            let constant = units.iter().all(|u| {
                let row = u.row(f);
                row.iter().all(|v| *v == row[0])
            });
            !scores[f].is_nan() && !constant
        })
        .collect())
}

/// Turbofan (C-MAPSS FD001) columns retained after prognosability screening,
/// 1-based positions in the raw 26-column file.
pub const TURBOFAN_RETAINED_COLUMNS: [usize; 17] = [3, 4, 7, 8, 9, 11, 12, 13, 14, 16, 17, 18, 19, 20, 22, 25, 26];

/// Human-readable names for `TURBOFAN_RETAINED_COLUMNS`.
pub fn turbofan_retained_names() -> Vec<String> {
    TURBOFAN_RETAINED_COLUMNS
        .iter()
        .map(|&c| match c {
            3 | 4 => format!("op_setting_{}", c - 2),
            s => format!("sensor_{}", s - 5),
        })
        .collect()
}
