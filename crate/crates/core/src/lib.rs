//! Local causal discovery (LCD) and invariant causal prediction (ICP) for
//! pooled observational/interventional data.
//!
//! The crate is organised bottom-up:
//!
//! - [`stats`]: regression, correlation, distribution functions and
//!   two-sample tests.
//! - [`indep`]: the partial-correlation independence test and the
//!   mean-variance invariance test.
//! - [`boosting`]: componentwise L2-boosting, used for variable preselection
//!   and as a non-causal baseline.
//! - [`lcd`], [`icp`]: the causal estimators.
//! - [`stability`]: subsampling-based stabilization of any estimator.
//! - [`sim`]: linear SCM simulator, fixture graphs and a d-separation oracle.
//! - [`data`]: expression tables, the on-disk table format and the k-fold
//!   train/test protocol.
//! - [`eval`]: ground-truth scores from held-out interventions, ROC curves and
//!   the random-guessing band.
//! - [`pipeline`]: run configuration and the prediction file format shared by
//!   the command-line driver.

pub mod boosting;
pub mod data;
pub mod error;
pub mod eval;
pub mod icp;
pub mod indep;
pub mod lcd;
pub mod matrix;
pub mod pipeline;
pub mod sim;
pub mod stability;
pub mod stats;

pub use boosting::{BoostParams, BoostSelection};
pub use data::{ExpressionTable, FoldSplit, JciDataset};
pub use error::{Error, Result};
pub use eval::{GroundTruth, RandomBand, RocCurve};
pub use icp::{IcpConfig, IcpResult};
pub use indep::{ContextVector, TestDecision};
pub use lcd::{LcdConfig, LcdTriple, TestKind};
pub use matrix::Matrix;
pub use pipeline::RunConfig;
pub use sim::{Dmg, LinearScm};
pub use stability::{Estimator, PredictionScores};

/// Ordered pair `(cause, effect)` of system-variable indices.
pub type Pair = (usize, usize);
