//! SNR-based per-class feature selection on low-rank generative models.
//!
//! Four estimators (PPCA, LFA, ELF, HeteroPCA) fit `x = mu + W gamma + eps`
//! with diagonal noise `psi`. Features are ranked by `||W_i||^2 / psi_i`, and a
//! per-class bank of models restricted to their top features classifies by
//! minimum Mahalanobis distance, computed in `O(m r)` per class.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod classifier;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod linalg;
pub mod scalar;
pub mod simulation;
pub mod snr;

pub use classifier::{ClassModel, ClassifierBank, Prediction};
pub use data::{center, partition_by_class, CenteredData, DataMatrix};
pub use error::{Error, Result};
pub use estimators::{fit, Estimator, FitOptions, LowRankModel};
pub use scalar::Real;
pub use snr::{compute_snr, recovery_accuracy, select_top_m, SnrRanking};

pub type Matrix = DataMatrix<f64>;
pub type Centered = CenteredData<f64>;
pub type Model = LowRankModel<f64>;
pub type Options = FitOptions<f64>;
pub type Ranking = SnrRanking<f64>;
pub type Class = ClassModel<f64>;
pub type Bank = ClassifierBank<f64>;
