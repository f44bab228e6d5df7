//! Detection, orientation and tracking of densely packed oriented objects
//! (honeybee-like agents) in grayscale video.
//!
//! The pipeline runs in stages that each read and write plain files:
//!
//! 1. [`synth`] renders synthetic hive sequences with exact ground truth.
//! 2. [`labelgen`] rasterizes point+angle annotations into class, angle and
//!    weight maps.
//! 3. [`net`] trains a compact U-Net style encoder-decoder (optionally with a
//!    recurrent prior) against the [`losses`].
//! 4. [`instancer`] turns per-pixel predictions into [`Detection`]s.
//! 5. [`tracker`] links detections into trajectories.
//! 6. [`evaluator`] matches detections against annotations and reports errors.
//!
//! The numeric core is generic over the floating point type through
//! [`Scalar`]; the aliases below fix the common choices.

pub mod annotation;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod geom;
pub mod grid;
pub mod imageio;
pub mod inference;
pub mod instancer;
pub mod labelgen;
pub mod losses;
pub mod net;
pub mod scalar;
pub mod synth;
pub mod tracker;
pub mod training;

pub use annotation::{Annotation, FrameRecord, Kind};
pub use error::{Error, Result};
pub use geom::{AxisDeg, OrientationDeg};
pub use grid::{Grid, Tensor};
pub use instancer::Detection;
pub use net::{NetConfig, Network};
pub use scalar::Scalar;
pub use tracker::Track;

/// Single precision network, the default for training and inference.
pub type Network32 = net::Network<f32>;
/// Double precision network, used where gradients are checked numerically.
pub type Network64 = net::Network<f64>;
pub type Tensor32 = grid::Tensor<f32>;
pub type Tensor64 = grid::Tensor<f64>;
pub type WeightMap32 = labelgen::WeightMap<f32>;
pub type AngleMap32 = labelgen::AngleMap<f32>;
