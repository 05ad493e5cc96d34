//! Sparse black-box adversarial search over an attention-screened,
//! parity-refined subset of pixels.
//!
//! The pipeline is: attention map ([`attention`]) → binary mask and
//! checkerboard refinement ([`masking`]) → per-variable box bounds and a
//! bi-objective problem ([`attack`]) → NSGA-II search ([`moea`]) → the
//! misclassifying candidate with the smallest l2 perturbation.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, transports
//! and the command line live in the `pixattack` crate.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod attack;
pub mod attention;
pub mod image;
pub mod masking;
mod math;
pub mod moea;
pub mod oracle;
pub mod toy;

pub use attack::{
    bounds_for, run_attack, select_final_ae, AdversarialExample, AttackConfig, AttackError,
    AttackProblem, AttackReport, AttentionSource, FrontPoint, Prediction,
};
pub use attention::{compute_cam, AttentionMap, Upsampling};
pub use image::{apply_perturbation, effective_perturbation, l2_norm, Image, ImageError, Shape, SparsePerturbation};
pub use masking::{binarize, build_index, checkerboard, parity_refine, Coord, Parity, PixelMask, VariableIndex};
pub use moea::{run_nsga2, Bounds, HistoryEntry, Individual, MoeaConfig, Objectives};
pub use oracle::{Concurrency, CountingOracle, Oracle, OracleError, OracleResponse, QueryExecutor, SerialExecutor};
pub use toy::{ConvGap, LinearSoftmax, ToyModel};
