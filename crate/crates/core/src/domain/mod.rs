//! Abstract domains for sound output-range computation: interval bounds, the
//! zonotope domain, and the intersection-refined domain together with their
//! affine and non-linear transformers.

pub mod bounds;
pub mod interzono;
pub mod pool;
pub mod relax;
pub mod zonotope;

pub use bounds::IntervalBounds;
pub use interzono::{AbstractDomain, InterZono};
pub use pool::NoisePool;
pub use relax::{chord_relaxation, sigma_tanh_planes, Activation, ChordRelaxation, PlaneRelaxation};
pub use zonotope::{box_transform, hadamard_main, sigma_tanh_main, Zonotope};
