//! Layers of a time-series regression network, concrete inference, and
//! star reachability through each layer.
//!
//! Activations are `channels × time` matrices. Stars over activations use the
//! feature-major flattening `channel * time_len + t`.

use crate::error::{Error, Result};
use crate::star::{Star, TAU_LP};
use ndarray::{s, Array1, Array2, Array3, ArrayView2, ArrayView3, Axis};
use std::time::Instant;

/// Fully connected layer applied independently at every time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FullyConnected {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl FullyConnected {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>) -> Result<Self> {
        if weights.nrows() != bias.len() {
            return Err(Error::invalid(format!(
                "fc bias has {} entries, weights have {} rows",
                bias.len(),
                weights.nrows()
            )));
        }
        Ok(FullyConnected { weights, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }
}

/// 1-D convolution (cross-correlation) over time with zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    /// `filters × channels × taps`
    pub weights: Array3<f64>,
    pub bias: Array1<f64>,
    pub stride: usize,
    pub pad_left: usize,
    pub pad_right: usize,
    pub dilation: usize,
}

impl Conv1d {
    pub fn new(
        weights: Array3<f64>,
        bias: Array1<f64>,
        stride: usize,
        pad_left: usize,
        pad_right: usize,
        dilation: usize,
    ) -> Result<Self> {
        let (fl, _, wf) = weights.dim();
        if bias.len() != fl {
            return Err(Error::invalid(format!("conv1d bias has {} entries, {fl} filters", bias.len())));
        }
        if wf == 0 {
            return Err(Error::invalid("conv1d filter size must be at least 1"));
        }
        if stride == 0 || dilation == 0 {
            return Err(Error::invalid("conv1d stride and dilation must be positive"));
        }
        Ok(Conv1d {
            weights,
            bias,
            stride,
            pad_left,
            pad_right,
            dilation,
        })
    }

    pub fn filters(&self) -> usize {
        self.weights.dim().0
    }

    pub fn channels(&self) -> usize {
        self.weights.dim().1
    }

    pub fn taps(&self) -> usize {
        self.weights.dim().2
    }

    /// `floor((T + P_l + P_r - D(w_f - 1) - 1) / S) + 1`, or `None` when the
    /// input is shorter than the dilated kernel.
    pub fn output_len(&self, t: usize) -> Option<usize> {
        let padded = t + self.pad_left + self.pad_right;
        let span = self.dilation * (self.taps() - 1) + 1;
        (padded >= span).then(|| (padded - span) / self.stride + 1)
    }

    /// Smallest input length producing `t_out` output steps.
    pub fn min_input_len(&self, t_out: usize) -> usize {
        let need = (t_out.max(1) - 1) * self.stride + self.dilation * (self.taps() - 1) + 1;
        need.saturating_sub(self.pad_left + self.pad_right).max(1)
    }

    /// Convolves every trailing "column" of `x` (`channels × time × cols`).
    /// Bias is added only when `with_bias`.
    fn apply(&self, x: ArrayView3<'_, f64>, with_bias: bool) -> Result<Array3<f64>> {
        let (nc, t, cols) = x.dim();
        if nc != self.channels() {
            return Err(Error::invalid(format!(
                "conv1d expects {} channels, got {nc}",
                self.channels()
            )));
        }
        let t_out = self.output_len(t).ok_or_else(|| {
            Error::InputTooShort(format!(
                "conv1d needs at least {} steps, got {t}",
                self.min_input_len(1)
            ))
        })?;
        let mut out = Array3::zeros((self.filters(), t_out, cols));
        for f in 0..self.filters() {
            let mut plane = out.index_axis_mut(Axis(0), f);
            if with_bias {
                plane.fill(self.bias[f]);
            }
            for c in 0..nc {
                let src = x.index_axis(Axis(0), c);
                for k in 0..self.taps() {
                    let w = self.weights[[f, c, k]];
                    if w == 0.0 {
                        continue;
                    }
                    for to in 0..t_out {
                        let pos = to * self.stride + k * self.dilation;
                        if pos < self.pad_left || pos - self.pad_left >= t {
                            continue;
                        }
                        let row = src.row(pos - self.pad_left);
                        plane.row_mut(to).scaled_add(w, &row);
                    }
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    FullyConnected(FullyConnected),
    Conv1d(Conv1d),
    Relu,
}

impl Layer {
    pub fn kind(&self) -> &'static str {
        match self {
            Layer::FullyConnected(_) => "fc",
            Layer::Conv1d(_) => "conv1d",
            Layer::Relu => "relu",
        }
    }

    /// Output `(channels, time)` for an input of the given shape.
    pub fn output_shape(&self, channels: usize, time: usize) -> Result<(usize, usize)> {
        match self {
            Layer::FullyConnected(fc) => {
                if fc.inputs() != channels {
                    return Err(Error::invalid(format!(
                        "fc expects {} features, got {channels}",
                        fc.inputs()
                    )));
                }
                Ok((fc.outputs(), time))
            }
            Layer::Conv1d(conv) => {
                if conv.channels() != channels {
                    return Err(Error::invalid(format!(
                        "conv1d expects {} channels, got {channels}",
                        conv.channels()
                    )));
                }
                let t = conv.output_len(time).ok_or_else(|| {
                    Error::InputTooShort(format!(
                        "conv1d needs at least {} steps, got {time}",
                        conv.min_input_len(1)
                    ))
                })?;
                Ok((conv.filters(), t))
            }
            Layer::Relu => Ok((channels, time)),
        }
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            Layer::FullyConnected(fc) => {
                self.output_shape(x.nrows(), x.ncols())?;
                let mut out = fc.weights.dot(&x);
                out += &fc.bias.view().insert_axis(Axis(1));
                Ok(out)
            }
            Layer::Conv1d(conv) => {
                let (nc, t) = x.dim();
                let x3 = x.into_shape_with_order((nc, t, 1)).map_err(|e| Error::Internal(e.to_string()))?;
                let out = conv.apply(x3, true)?;
                let (fl, t_out, _) = out.dim();
                out.into_shape_with_order((fl, t_out))
                    .map_err(|e| Error::Internal(e.to_string()))
            }
            Layer::Relu => Ok(x.mapv(|v| v.max(0.0))),
        }
    }
}

/// Exact star image of a per-time-step fully connected layer (block-diagonal
/// affine map on the flattened state).
pub fn fc_reach(layer: &FullyConnected, star: &Star, time: usize) -> Result<Star> {
    let ip = layer.inputs();
    if star.dim() != ip * time {
        return Err(Error::invalid(format!(
            "fc expects state dimension {ip}x{time}={}, star has {}",
            ip * time,
            star.dim()
        )));
    }
    let m = star.num_generators();
    let center = star
        .center()
        .into_shape_with_order((ip, time))
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut c_out = layer.weights.dot(&center);
    c_out += &layer.bias.view().insert_axis(Axis(1));
    let basis = star
        .basis()
        .into_shape_with_order((ip, time * m))
        .map_err(|e| Error::Internal(e.to_string()))?;
    let v_out = layer.weights.dot(&basis);
    let op = layer.outputs();
    let c_out = c_out.into_shape_with_order(op * time).map_err(|e| Error::Internal(e.to_string()))?;
    let v_out = v_out
        .into_shape_with_order((op * time, m))
        .map_err(|e| Error::Internal(e.to_string()))?;
    Ok(star.with_state(c_out, v_out))
}

/// Exact star image of a 1-D convolution: the center is convolved with bias,
/// every generator without.
pub fn conv1d_reach(layer: &Conv1d, star: &Star, time: usize) -> Result<Star> {
    let nc = layer.channels();
    if star.dim() != nc * time {
        return Err(Error::invalid(format!(
            "conv1d expects state dimension {nc}x{time}={}, star has {}",
            nc * time,
            star.dim()
        )));
    }
    let m = star.num_generators();
    let center = star
        .center()
        .into_shape_with_order((nc, time, 1))
        .map_err(|e| Error::Internal(e.to_string()))?;
    let c_out = layer.apply(center, true)?;
    let basis = star
        .basis()
        .into_shape_with_order((nc, time, m))
        .map_err(|e| Error::Internal(e.to_string()))?;
    let v_out = layer.apply(basis, false)?;
    let (fl, t_out, _) = v_out.dim();
    let c_out = c_out
        .into_shape_with_order(fl * t_out)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let v_out = v_out
        .into_shape_with_order((fl * t_out, m))
        .map_err(|e| Error::Internal(e.to_string()))?;
    Ok(star.with_state(c_out, v_out))
}

/// Triangle over-approximation of ReLU.
///
/// Per coordinate with bounds `[l, u]`: `l >= 0` keeps it, `u <= 0` zeroes it,
/// otherwise a fresh variable `β ∈ [0, u]` replaces it under
/// `β >= x` and `β <= u(x - l)/(u - l)`.
pub fn relu_reach_approx(star: &Star) -> Result<Star> {
    let n = star.dim();
    let hull = star.interval_hull();
    let candidates: Vec<usize> = (0..n)
        .filter(|&i| hull[i].lower < 0.0 && hull[i].upper > 0.0)
        .collect();
    let lp_bounds = if candidates.is_empty() {
        if star.is_empty()? {
            return Err(Error::EmptySet("relu input star is empty".into()));
        }
        Vec::new()
    } else {
        star.bounds_of(&candidates)?
    };

    let mut bounds = hull;
    for (&i, b) in candidates.iter().zip(&lp_bounds) {
        bounds[i] = bounds[i].intersect(b).unwrap_or(*b);
    }
    let unstable: Vec<usize> = (0..n)
        .filter(|&i| bounds[i].lower < 0.0 && bounds[i].upper > 0.0)
        .collect();

    let m = star.num_generators();
    let q = unstable.len();
    let p = star.num_constraints();

    let mut center = star.center().to_owned();
    let mut basis = Array2::zeros((n, m + q));
    basis.slice_mut(s![.., ..m]).assign(&star.basis());
    for i in 0..n {
        if bounds[i].upper <= 0.0 {
            center[i] = 0.0;
            basis.row_mut(i).fill(0.0);
        }
    }

    let mut constraints = Array2::zeros((p + 2 * q, m + q));
    constraints.slice_mut(s![..p, ..m]).assign(&star.constraints());
    let mut rhs = Array1::zeros(p + 2 * q);
    rhs.slice_mut(s![..p]).assign(&star.rhs());
    let mut lo = star.alpha_lower().to_vec();
    let mut hi = star.alpha_upper().to_vec();

    for (k, &i) in unstable.iter().enumerate() {
        let (l, u) = (bounds[i].lower, bounds[i].upper);
        let ci = star.center()[i];
        let vi = star.basis().row(i).to_owned();
        let beta = m + k;
        // x - β <= 0
        let r = p + 2 * k;
        constraints.slice_mut(s![r, ..m]).assign(&vi);
        constraints[[r, beta]] = -1.0;
        rhs[r] = -ci;
        // β - u/(u-l) x <= -u·l/(u-l)
        let slope = u / (u - l);
        let r = p + 2 * k + 1;
        constraints.slice_mut(s![r, ..m]).assign(&(&vi * -slope));
        constraints[[r, beta]] = 1.0;
        rhs[r] = slope * (ci - l);
        lo.push(0.0);
        hi.push(u);

        center[i] = 0.0;
        basis.row_mut(i).fill(0.0);
        basis[[i, beta]] = 1.0;
    }

    Star::from_parts(center, basis, constraints, rhs, Array1::from(lo), Array1::from(hi))
}

/// Per-layer statistics collected during `Network::reach`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStats {
    pub index: usize,
    pub kind: &'static str,
    pub channels: usize,
    pub time: usize,
    pub generators: usize,
    pub constraints: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_features: usize,
    layers: Vec<Layer>,
}

impl Network {
    /// Checks channel compatibility of consecutive layers. Time lengths are
    /// checked per call since they depend on the window length.
    pub fn new(input_features: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_features == 0 {
            return Err(Error::invalid("network needs at least one input feature"));
        }
        let mut channels = input_features;
        for (idx, layer) in layers.iter().enumerate() {
            let expected = match layer {
                Layer::FullyConnected(fc) => Some(fc.inputs()),
                Layer::Conv1d(conv) => Some(conv.channels()),
                Layer::Relu => None,
            };
            if let Some(e) = expected {
                if e != channels {
                    return Err(Error::Shape {
                        layer: idx,
                        message: format!(
                            "{} expects {e} input channels but previous layer produces {channels}",
                            layer.kind()
                        ),
                    });
                }
            }
            channels = match layer {
                Layer::FullyConnected(fc) => fc.outputs(),
                Layer::Conv1d(conv) => conv.filters(),
                Layer::Relu => channels,
            };
        }
        Ok(Network {
            input_features,
            layers,
        })
    }

    pub fn input_features(&self) -> usize {
        self.input_features
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn output_channels(&self) -> usize {
        self.layers.iter().fold(self.input_features, |c, l| match l {
            Layer::FullyConnected(fc) => fc.outputs(),
            Layer::Conv1d(conv) => conv.filters(),
            Layer::Relu => c,
        })
    }

    /// Receptive field: smallest window length with at least one output step.
    pub fn min_input_len(&self) -> usize {
        self.layers.iter().rev().fold(1, |t_out, l| match l {
            Layer::Conv1d(conv) => conv.min_input_len(t_out),
            _ => t_out,
        })
    }

    /// Output `(channels, time)` for a window of `time` steps.
    pub fn output_shape(&self, time: usize) -> Result<(usize, usize)> {
        let mut shape = (self.input_features, time);
        for (idx, layer) in self.layers.iter().enumerate() {
            shape = layer
                .output_shape(shape.0, shape.1)
                .map_err(|e| at_layer(e, idx))?;
        }
        Ok(shape)
    }

    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if x.nrows() != self.input_features {
            return Err(Error::invalid(format!(
                "network expects {} features, window has {}",
                self.input_features,
                x.nrows()
            )));
        }
        if x.ncols() < self.min_input_len() {
            return Err(Error::InputTooShort(format!(
                "window of {} steps is shorter than the receptive field {}",
                x.ncols(),
                self.min_input_len()
            )));
        }
        let mut act = x.to_owned();
        for (idx, layer) in self.layers.iter().enumerate() {
            act = layer.forward(act.view()).map_err(|e| at_layer(e, idx))?;
        }
        Ok(act)
    }

    /// Forward pass on a flattened (feature-major) input.
    pub fn forward_flat(&self, x: &[f64], time: usize) -> Result<Array1<f64>> {
        let view = ArrayView2::from_shape((self.input_features, time), x)
            .map_err(|e| Error::invalid(e.to_string()))?;
        let out = self.forward(view)?;
        let len = out.len();
        out.into_shape_with_order(len)
            .map_err(|e| Error::Internal(e.to_string()))
    }

    /// Propagates `input` (over `input_features × time`) layer by layer.
    /// The predicate is re-checked for feasibility after every layer that
    /// changes it.
    pub fn reach(&self, input: &Star, time: usize) -> Result<(Star, Vec<LayerStats>)> {
        if input.dim() != self.input_features * time {
            return Err(Error::invalid(format!(
                "input star dimension {} does not match {} features x {time} steps",
                input.dim(),
                self.input_features
            )));
        }
        self.output_shape(time)?;
        let mut star = input.clone();
        let (mut channels, mut t) = (self.input_features, time);
        let mut stats = Vec::with_capacity(self.layers.len());
        for (idx, layer) in self.layers.iter().enumerate() {
            let started = Instant::now();
            let next = match layer {
                Layer::FullyConnected(fc) => fc_reach(fc, &star, t),
                Layer::Conv1d(conv) => conv1d_reach(conv, &star, t),
                Layer::Relu => relu_reach_approx(&star),
            }
            .map_err(|e| at_layer(e, idx))?;
            if next.num_constraints() != star.num_constraints() && next.is_empty()? {
                return Err(Error::Internal(format!(
                    "reachable set became empty after layer {idx} ({})",
                    layer.kind()
                )));
            }
            (channels, t) = layer.output_shape(channels, t)?;
            star = next;
            stats.push(LayerStats {
                index: idx,
                kind: layer.kind(),
                channels,
                time: t,
                generators: star.num_generators(),
                constraints: star.num_constraints(),
                seconds: started.elapsed().as_secs_f64(),
            });
        }
        Ok((star, stats))
    }

    /// Flat index of output channel `channel` at the last output step.
    pub fn last_step_index(&self, time: usize, channel: usize) -> Result<usize> {
        let (ch, t) = self.output_shape(time)?;
        if channel >= ch {
            return Err(Error::OutOfRange(format!(
                "output channel {channel} (network has {ch})"
            )));
        }
        Ok(channel * t + t - 1)
    }
}

fn at_layer(e: Error, layer: usize) -> Error {
    match e {
        Error::InvalidArgument(message) | Error::InputTooShort(message) => Error::Shape { layer, message },
        other => other,
    }
}

/// Tolerance used when comparing reach bounds against concrete outputs.
pub const REACH_TOL: f64 = 2.0 * TAU_LP;

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    fn identity_fc(n: usize) -> FullyConnected {
        FullyConnected::new(Array2::eye(n), Array1::zeros(n)).unwrap()
    }

    #[test]
    fn identity_fc_forward() {
        let net = Network::new(2, vec![Layer::FullyConnected(identity_fc(2))]).unwrap();
        let x = array![[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]];
        assert_eq!(net.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn identity_kernel_forward() {
        let conv = Conv1d::new(Array3::from_elem((1, 1, 1), 1.0), array![0.0], 1, 0, 0, 1).unwrap();
        let net = Network::new(1, vec![Layer::Conv1d(conv)]).unwrap();
        let x = array![[1.0, -2.0, 3.5]];
        assert_eq!(net.forward(x.view()).unwrap(), x);
    }

    #[test]
    fn hand_computed_two_layer() {
        // conv: 1 filter over 3 channels, taps [1, -1] on channel 0, [0.5, 0] on channel 2
        let mut w = Array3::zeros((1, 3, 2));
        w[[0, 0, 0]] = 1.0;
        w[[0, 0, 1]] = -1.0;
        w[[0, 2, 0]] = 0.5;
        let conv = Conv1d::new(w, array![0.25], 1, 0, 0, 1).unwrap();
        let fc = FullyConnected::new(array![[2.0], [-1.0]], array![0.0, 1.0]).unwrap();
        let net = Network::new(3, vec![Layer::Conv1d(conv), Layer::Relu, Layer::FullyConnected(fc)]).unwrap();
        let x = array![
            [1.0, 3.0, 2.0, 2.0, 5.0],
            [9.0, 9.0, 9.0, 9.0, 9.0],
            [2.0, -4.0, 0.0, 6.0, 1.0]
        ];
        // conv out[t] = x0[t] - x0[t+1] + 0.5 x2[t] + 0.25
        //   t0: 1-3+1+0.25 = -0.75 ; t1: 3-2-2+0.25 = -0.75 ; t2: 2-2+0+0.25 = 0.25 ; t3: 2-5+3+0.25 = 0.25
        // relu: [0, 0, 0.25, 0.25]
        let want = array![[0.0, 0.0, 0.5, 0.5], [1.0, 1.0, 0.75, 0.75]];
        let got = net.forward(x.view()).unwrap();
        assert!((&got - &want).iter().all(|d| d.abs() < 1e-15), "{got}");
    }

    #[test]
    fn output_length_arithmetic() {
        let conv = Conv1d::new(Array3::zeros((2, 1, 3)), Array1::zeros(2), 2, 1, 0, 2).unwrap();
        // (10 + 1 - 2*2 - 1)/2 + 1 = 4
        assert_eq!(conv.output_len(10), Some(4));
        assert_eq!(conv.output_len(3), None);
        assert_eq!(conv.min_input_len(1), 4);
        assert_eq!(conv.output_len(4), Some(1));
    }

    #[test]
    fn channel_mismatch_names_layer() {
        let conv = Conv1d::new(Array3::zeros((4, 2, 3)), Array1::zeros(4), 1, 0, 0, 1).unwrap();
        let bad = Conv1d::new(Array3::zeros((1, 3, 1)), Array1::zeros(1), 1, 0, 0, 1).unwrap();
        let err = Network::new(2, vec![Layer::Conv1d(conv), Layer::Relu, Layer::Conv1d(bad)]).unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 2, .. }), "{err}");
    }

    #[test]
    fn short_window_rejected() {
        let conv = Conv1d::new(Array3::zeros((1, 1, 5)), Array1::zeros(1), 1, 0, 0, 1).unwrap();
        let net = Network::new(1, vec![Layer::Conv1d(conv)]).unwrap();
        assert_eq!(net.min_input_len(), 5);
        assert!(net.forward(Array2::zeros((1, 4)).view()).is_err());
        assert!(net.forward(Array2::zeros((1, 5)).view()).is_ok());
    }

    #[test]
    fn relu_positive_region_unchanged() {
        let s = Star::from_box(&[3.0, 5.0], &[1.0, 2.0]).unwrap();
        assert_eq!(relu_reach_approx(&s).unwrap(), s);
    }

    #[test]
    fn relu_dead_region_is_zero() {
        let s = Star::from_box(&[-3.0, 2.0], &[1.0, 0.5]).unwrap();
        let r = relu_reach_approx(&s).unwrap();
        let b = r.lp_bounds(0).unwrap();
        assert!(b.lower.abs() <= TAU_LP && b.upper.abs() <= TAU_LP);
        assert_eq!(r.num_generators(), 2);
    }

    #[test]
    fn relu_unstable_one_dim() {
        let s = Star::from_box(&[0.0], &[1.0]).unwrap();
        let r = relu_reach_approx(&s).unwrap();
        assert_eq!(r.num_generators(), 2);
        assert_eq!(r.num_constraints(), 2);
        let b = r.lp_bounds(0).unwrap();
        assert!(b.lower.abs() <= REACH_TOL, "{b:?}");
        assert!((b.upper - 1.0).abs() <= REACH_TOL, "{b:?}");
    }
}
