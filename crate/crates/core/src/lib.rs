//! Star-set reachability for time-series regression networks.
//!
//! Inputs are `features × time` windows. Bounded L∞ sensor noise on a window
//! becomes a [`Star`]; the star is pushed through fully connected, 1-D
//! convolution and ReLU layers, and the reachable bounds of the prediction
//! are scored against an allowable band with the RV, PR and POR metrics.
//!
//! ```
//! use ndarray::array;
//! use tsreach::{FullyConnected, Layer, Network, NoiseKind, NoiseSpec, SeriesWindow};
//!
//! let net = Network::new(2, vec![
//!     Layer::FullyConnected(FullyConnected::new(array![[0.5, 0.5]], array![0.0]).unwrap()),
//! ]).unwrap();
//! let window = SeriesWindow::from_values(array![[1.0, 2.0, 3.0], [3.0, 2.0, 1.0]]).unwrap();
//! let spec = NoiseSpec::new(NoiseKind::Sfsi, Some(0), None, 10.0);
//! let input = tsreach::make_noise_star(&window, &spec).unwrap();
//! let (out, _) = net.reach(&input, 3).unwrap();
//! let last = out.lp_bounds(2).unwrap();
//! assert!(last.contains(2.0));
//! ```

pub mod campaign;
pub mod error;
pub mod layers;
pub mod lp;
pub mod metrics;
pub mod model_io;
pub mod noise;
pub mod oracle;
pub mod star;

pub use campaign::{run_campaign, run_sweep, CampaignResult, CampaignSettings, SweepPoint, WindowRecord};
pub use error::{Error, Result};
pub use layers::{conv1d_reach, fc_reach, relu_reach_approx, Conv1d, FullyConnected, Layer, LayerStats, Network, REACH_TOL};
pub use metrics::{
    allowable_bounds, monotonicity_check, percentage_overlap, percentage_overlap_robustness, percentage_robustness,
    robustness_value, AllowMode, MonotonicityVerdict, StepVerdict,
};
pub use model_io::{load_network, load_series, save_network, Dataset, SeriesWindow, TargetOffset};
pub use noise::{linf_radius, make_noise_star, NoiseKind, NoiseReference, NoiseSpec};
pub use star::{Interval, Star, TAU_LP};
