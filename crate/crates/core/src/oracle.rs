//! Brute-force reference computations used to cross-check reachability:
//! exhaustive vertex enumeration of small predicate polytopes, convolution
//! as an explicit matrix, and sampling-based soundness checks.

use crate::error::{Error, Result};
use crate::layers::{Conv1d, FullyConnected, Layer, Network, REACH_TOL};
use crate::star::{Interval, Star};
use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub const MAX_ENUM_VARS: usize = 6;
pub const MAX_ENUM_ROWS: usize = 40;
const RANK_TOL: f64 = 1e-10;
const VERTEX_TOL: f64 = 1e-9;

/// All vertices of `{α : Cα <= d, lo <= α <= hi}`.
pub fn polytope_vertices(star: &Star) -> Result<Vec<Vec<f64>>> {
    let m = star.num_generators();
    let p = star.num_constraints();
    if m > MAX_ENUM_VARS || p + 2 * m > MAX_ENUM_ROWS {
        return Err(Error::DimensionCap(format!(
            "{m} variables and {} rows (limits {MAX_ENUM_VARS} and {MAX_ENUM_ROWS})",
            p + 2 * m
        )));
    }
    if m == 0 {
        return Ok(vec![Vec::new()]);
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(p + 2 * m);
    for i in 0..p {
        rows.push((star.constraints().row(i).to_vec(), star.rhs()[i]));
    }
    for j in 0..m {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        rows.push((e.clone(), star.alpha_upper()[j]));
        e[j] = -1.0;
        rows.push((e, -star.alpha_lower()[j]));
    }

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        if let Some(v) = solve_active(&rows, &subset, m) {
            let feasible = rows.iter().all(|(a, b)| {
                let lhs: f64 = a.iter().zip(&v).map(|(x, y)| x * y).sum();
                lhs <= b + VERTEX_TOL * (1.0 + b.abs())
            });
            let fresh = !vertices
                .iter()
                .any(|w| w.iter().zip(&v).all(|(a, b)| (a - b).abs() <= VERTEX_TOL));
            if feasible && fresh {
                vertices.push(v);
            }
        }
        if !next_subset(&mut subset, rows.len()) {
            break;
        }
    }
    Ok(vertices)
}

fn next_subset(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Gaussian elimination with partial pivoting on the active rows.
fn solve_active(rows: &[(Vec<f64>, f64)], subset: &[usize], m: usize) -> Option<Vec<f64>> {
    let mut a: Vec<Vec<f64>> = subset
        .iter()
        .map(|&i| {
            let mut r = rows[i].0.clone();
            r.push(rows[i].1);
            r
        })
        .collect();
    for col in 0..m {
        let piv = (col..m).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs()))?;
        let scale = a[piv][..m].iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if a[piv][col].abs() <= RANK_TOL * scale.max(1.0) {
            return None;
        }
        a.swap(col, piv);
        let pivot_row = a[col].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != col {
                let f = row[col] / pivot_row[col];
                if f != 0.0 {
                    for (x, pv) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                        *x -= f * pv;
                    }
                }
            }
        }
    }
    Some((0..m).map(|i| a[i][m] / a[i][i]).collect())
}

/// Exact per-dimension extrema of a star with a small predicate, from its
/// polytope vertices.
pub fn vertex_enum_bounds(star: &Star) -> Result<Vec<Interval>> {
    let verts = polytope_vertices(star)?;
    if verts.is_empty() {
        return Err(Error::EmptySet("polytope has no vertices".into()));
    }
    let n = star.dim();
    let mut out = vec![
        Interval {
            lower: f64::INFINITY,
            upper: f64::NEG_INFINITY
        };
        n
    ];
    for v in &verts {
        let x = star.state_of(ndarray::ArrayView1::from(&v[..]));
        for (b, xi) in out.iter_mut().zip(x.iter()) {
            b.lower = b.lower.min(*xi);
            b.upper = b.upper.max(*xi);
        }
    }
    Ok(out)
}

/// Explicit `(M, b)` with `flatten(conv(x)) = M · flatten(x) + b` for inputs
/// of length `time`, built straight from the index definition.
pub fn conv_as_matrix(layer: &Conv1d, time: usize) -> Result<(Array2<f64>, Array1<f64>)> {
    let t_out = layer
        .output_len(time)
        .ok_or_else(|| Error::InputTooShort(format!("conv1d needs {} steps, got {time}", layer.min_input_len(1))))?;
    let (fl, nc, wf) = layer.weights.dim();
    let mut m = Array2::zeros((fl * t_out, nc * time));
    let mut b = Array1::zeros(fl * t_out);
    for f in 0..fl {
        for to in 0..t_out {
            let row = f * t_out + to;
            b[row] = layer.bias[f];
            for c in 0..nc {
                for k in 0..wf {
                    let padded = (to * layer.stride + k * layer.dilation) as isize;
                    let src = padded - layer.pad_left as isize;
                    if src >= 0 && (src as usize) < time {
                        m[[row, c * time + src as usize]] += layer.weights[[f, c, k]];
                    }
                }
            }
        }
    }
    Ok((m, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimSlack {
    pub computed: Interval,
    pub sampled_min: f64,
    pub sampled_max: f64,
    /// `sampled_min - computed.lower` (negative means a violation).
    pub slack_lower: f64,
    /// `computed.upper - sampled_max` (negative means a violation).
    pub slack_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub samples: usize,
    pub violations: usize,
    pub worst_excess: f64,
    pub dims: Vec<DimSlack>,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    pub fn max_slack(&self) -> f64 {
        self.dims
            .iter()
            .map(|d| d.slack_lower.max(d.slack_upper))
            .fold(0.0, f64::max)
    }
}

/// Reach `net` on `input`, then check `k` sampled members' outputs against
/// the reachable bounds.
pub fn sampled_soundness(net: &Network, input: &Star, time: usize, k: usize, seed: u64) -> Result<SoundnessReport> {
    let (out, _) = net.reach(input, time)?;
    let bounds = out.bounds()?;
    soundness_against(&bounds, net, input, time, k, seed)
}

/// Checks outputs of `forward_net` on `k` members of `input` against
/// precomputed `bounds` (tolerance `REACH_TOL`).
pub fn soundness_against(
    bounds: &[Interval],
    forward_net: &Network,
    input: &Star,
    time: usize,
    k: usize,
    seed: u64,
) -> Result<SoundnessReport> {
    let samples = input.sample_members(k, seed)?;
    let outputs: Vec<Array1<f64>> = samples
        .par_iter()
        .map(|x| forward_net.forward_flat(x.as_slice().expect("contiguous"), time))
        .collect::<Result<_>>()?;
    let n = bounds.len();
    if let Some(o) = outputs.first() {
        if o.len() != n {
            return Err(Error::invalid(format!(
                "network produces {} outputs, {n} bounds given",
                o.len()
            )));
        }
    }
    let mut mins = vec![f64::INFINITY; n];
    let mut maxs = vec![f64::NEG_INFINITY; n];
    let mut violations = 0;
    let mut worst = 0.0f64;
    for y in &outputs {
        let mut bad = false;
        for d in 0..n {
            mins[d] = mins[d].min(y[d]);
            maxs[d] = maxs[d].max(y[d]);
            let excess = (bounds[d].lower - REACH_TOL - y[d]).max(y[d] - bounds[d].upper - REACH_TOL);
            if excess > 0.0 {
                bad = true;
                worst = worst.max(excess);
            }
        }
        violations += usize::from(bad);
    }
    let dims = (0..n)
        .map(|d| DimSlack {
            computed: bounds[d],
            sampled_min: mins[d],
            sampled_max: maxs[d],
            slack_lower: mins[d] - bounds[d].lower,
            slack_upper: bounds[d].upper - maxs[d],
        })
        .collect();
    Ok(SoundnessReport {
        samples: outputs.len(),
        violations,
        worst_excess: worst,
        dims,
    })
}

/// Shape of randomly generated test networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RandomNetShape {
    pub input_features: usize,
    pub conv_layers: usize,
    pub fc_layers: usize,
    pub max_channels: usize,
    /// ReLU between consecutive linear layers.
    pub relu: bool,
}

impl RandomNetShape {
    /// Draws 1-3 conv layers, 1-2 fc layers and 1-3 input features.
    pub fn draw(rng: &mut impl Rng, max_channels: usize, relu: bool) -> Self {
        RandomNetShape {
            input_features: rng.gen_range(1..=3),
            conv_layers: rng.gen_range(1..=3),
            fc_layers: rng.gen_range(1..=2),
            max_channels,
            relu,
        }
    }
}

fn uniform_array(rng: &mut impl Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..=scale)).collect()
}

/// Random conv layer; `keep_length` pads so the output has as many steps as
/// the input (at stride 1).
pub fn random_conv(rng: &mut impl Rng, channels: usize, filters: usize, keep_length: bool) -> Conv1d {
    let taps = rng.gen_range(1..=3);
    let dilation = rng.gen_range(1..=3);
    let reach = dilation * (taps - 1);
    let (stride, pad_left, pad_right) = if keep_length {
        let left = rng.gen_range(0..=reach);
        (1, left, reach - left)
    } else {
        (rng.gen_range(1..=2), rng.gen_range(0..=2), rng.gen_range(0..=2))
    };
    let scale = 1.0 / ((channels * taps) as f64).sqrt();
    let weights = Array3::from_shape_vec((filters, channels, taps), uniform_array(rng, filters * channels * taps, scale))
        .expect("shape");
    let bias = Array1::from(uniform_array(rng, filters, 0.3));
    Conv1d::new(weights, bias, stride, pad_left, pad_right, dilation).expect("valid conv")
}

pub fn random_fc(rng: &mut impl Rng, inputs: usize, outputs: usize) -> FullyConnected {
    let scale = 1.0 / (inputs as f64).sqrt();
    let weights = Array2::from_shape_vec((outputs, inputs), uniform_array(rng, outputs * inputs, scale)).expect("shape");
    FullyConnected::new(weights, Array1::from(uniform_array(rng, outputs, 0.3))).expect("valid fc")
}

/// Conv stack followed by fc layers ending in one output channel. Convs keep
/// the time length, so any window length works.
pub fn random_network(seed: u64, shape: RandomNetShape) -> Network {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    let mut channels = shape.input_features;
    let linear = shape.conv_layers + shape.fc_layers;
    for i in 0..linear {
        let last = i + 1 == linear;
        let out = if last { 1 } else { rng.gen_range(1..=shape.max_channels.max(1)) };
        if i < shape.conv_layers {
            layers.push(Layer::Conv1d(random_conv(&mut rng, channels, out, true)));
        } else {
            layers.push(Layer::FullyConnected(random_fc(&mut rng, channels, out)));
        }
        channels = out;
        if shape.relu && !last {
            layers.push(Layer::Relu);
        }
    }
    Network::new(shape.input_features, layers).expect("consistent random network")
}

/// Random star with `vars` predicate variables, `rows` extra halfspaces and a
/// guaranteed interior point.
pub fn random_star(seed: u64, dim: usize, vars: usize, rows: usize) -> Star {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center = Array1::from(uniform_array(&mut rng, dim, 2.0));
    let basis = Array2::from_shape_vec((dim, vars), uniform_array(&mut rng, dim * vars, 1.0)).expect("shape");
    let lower: Vec<f64> = (0..vars).map(|_| rng.gen_range(-1.5..-0.1)).collect();
    let upper: Vec<f64> = (0..vars).map(|_| rng.gen_range(0.1..1.5)).collect();
    let inside: Vec<f64> = lower.iter().zip(&upper).map(|(l, u)| l + (u - l) * rng.gen_range(0.2..0.8)).collect();
    let constraints = Array2::from_shape_vec((rows, vars), uniform_array(&mut rng, rows * vars, 1.0)).expect("shape");
    let rhs = Array1::from_iter(
        constraints
            .outer_iter()
            .map(|row| row.iter().zip(&inside).map(|(a, x)| a * x).sum::<f64>() + rng.gen_range(0.01..0.5)),
    );
    Star::new(center, basis, constraints, rhs, Array1::from(lower), Array1::from(upper)).expect("feasible by construction")
}

/// Affine-only network as one explicit `(M, b)` over flattened windows.
pub fn compose_affine(net: &Network, time: usize) -> Result<(Array2<f64>, Array1<f64>)> {
    let n = net.input_features() * time;
    let mut m = Array2::<f64>::eye(n);
    let mut b = Array1::<f64>::zeros(n);
    let (mut ch, mut t) = (net.input_features(), time);
    for (idx, layer) in net.layers().iter().enumerate() {
        let (lm, lb) = match layer {
            Layer::Conv1d(conv) => conv_as_matrix(conv, t)?,
            Layer::FullyConnected(fc) => {
                let (o, i) = fc.weights.dim();
                let mut lm = Array2::zeros((o * t, i * t));
                let mut lb = Array1::zeros(o * t);
                for r in 0..o {
                    for s in 0..t {
                        lb[r * t + s] = fc.bias[r];
                        for c in 0..i {
                            lm[[r * t + s, c * t + s]] = fc.weights[[r, c]];
                        }
                    }
                }
                (lm, lb)
            }
            Layer::Relu => {
                return Err(Error::invalid(format!("layer {idx} is a relu; network is not affine")));
            }
        };
        b = lm.dot(&b) + lb;
        m = lm.dot(&m);
        (ch, t) = layer.output_shape(ch, t)?;
    }
    Ok((m, b))
}
