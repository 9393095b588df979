//! Affine, ReLU and dropout layers and the network container.

mod io;
mod layers;
mod network;

pub(crate) use io::Reader;
pub use io::{MODEL_MAGIC, MODEL_VERSION};
pub use layers::{AffineGrads, AffineLayer, DropoutLayer, Mode, ReluLayer};
pub use network::{Gradients, Layer, Network};
