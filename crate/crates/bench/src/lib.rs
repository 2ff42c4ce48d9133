//! Workloads shared by the benchmarks.

use ndarray::{Array1, Array2, Array3};
use tsreach::{Conv1d, FullyConnected, Layer, Network, SeriesWindow};

/// Conv(`channels` filters, 3 taps, causal padding) -> ReLU -> FC -> ReLU -> FC(1).
pub fn conv_network(features: usize, channels: usize) -> Network {
    let w = Array3::from_shape_fn((channels, features, 3), |(f, c, k)| {
        (((f * 7 + c * 3 + k) % 11) as f64 - 5.0) / (5.0 * (3 * features) as f64)
    });
    let b = Array1::from_shape_fn(channels, |f| 0.05 * (f as f64 - 1.0));
    let conv = Conv1d::new(w, b, 1, 2, 0, 1).expect("valid conv");
    let hidden = Array2::from_shape_fn((channels, channels), |(i, j)| if i == j { 1.0 } else { -0.1 });
    let fc1 = FullyConnected::new(hidden, Array1::zeros(channels)).expect("valid fc");
    let head = FullyConnected::new(Array2::from_elem((1, channels), 1.0 / channels as f64), Array1::zeros(1)).expect("valid fc");
    Network::new(
        features,
        vec![
            Layer::Conv1d(conv),
            Layer::Relu,
            Layer::FullyConnected(fc1),
            Layer::Relu,
            Layer::FullyConnected(head),
        ],
    )
    .expect("consistent network")
}

/// Smooth positive `features × time` window.
pub fn window(features: usize, time: usize) -> SeriesWindow {
    let values = Array2::from_shape_fn((features, time), |(f, t)| 1.0 + 0.3 * f as f64 + 0.1 * ((t + f) as f64 * 0.7).sin());
    SeriesWindow::from_values(values).expect("window")
}
