//! Atmospheric state estimation on meteorological graphs, with
//! gradient- and relevance-based observation impact analysis.
//!
//! The pipeline, module by module:
//!
//! - [`synthdata`]: synthetic NWP grids and eleven observation types.
//! - [`geograph`]: 50 km proximity graphs and k-hop context subgraphs.
//! - [`neuralcore`]: per-type projection, GCN encoder, reconstruction
//!   pretraining and regression fine-tuning with analytic gradients.
//! - [`explain`]: saliency, Grad-CAM and LRP node sensitivities, aggregated
//!   per node, per observation type and per time step.
//! - [`fidelity`]: Fidelity+ / Fidelity- by occluding ranked nodes.
//! - [`pipeline`]: the end-to-end run used by the CLI and the acceptance suite.

pub mod context;
pub mod error;
pub mod explain;
pub mod fidelity;
pub mod geograph;
pub mod neuralcore;
mod parallel;
pub mod pipeline;
pub mod report;
pub mod synthdata;

pub use error::{Error, Result};
pub use parallel::set_max_threads;
