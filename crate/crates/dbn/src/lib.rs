//! First-order dynamic Bayesian networks over a daily panel: two time slices,
//! linear-Gaussian nodes, structures learned by PC-Stable, MMHC or
//! SI-HITON-PC and compared by AIC.
//!
//! Node `i < p` is variable `i` at slice 0 (the previous day); node `p + i` is
//! the same variable at slice 1 (the current day). Arcs may only point from
//! slice 0 into slice 1 or within slice 1.

pub mod ci;
pub mod dataset;
pub mod error;
pub mod learn;
pub mod model;
pub mod score;
pub mod structure;

pub use ci::{ci_test_fisher_z, CiResult};
pub use dataset::{make_sliced, SlicedDataset, MIN_ROWS};
pub use error::{DbnError, Result};
pub use learn::{learn, learn_mmhc, learn_pc_stable, learn_si_hiton_pc, LearnSettings};
pub use model::{fit_linear_gaussian, forecast_one_day, DbnModel, NodeModel};
pub use score::{score_aic, select_structure};
pub use structure::{Algorithm, DbnStructure};
