//! Stability analysis toolkit for single-layer hypergraph encoders trained
//! with SGD: incidence operators, encoders, the trainer, closed-form bounds
//! and the experiment harness that checks them.

pub mod bounds;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod features;
pub mod hypergraph;
pub mod model;
pub mod regularity;
pub mod seeds;
pub mod trainer;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use hypergraph::{Hypergraph, IncidenceScale, NormalizedIncidence};
pub use model::{EdgeContext, Theta, VertexContext};
pub use regularity::{Activation, Loss, RegularityConstants};
