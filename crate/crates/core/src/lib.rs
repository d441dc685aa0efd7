//! Matrix-free primal-dual hybrid gradient (PDHG) for linear programming,
//! together with the diagnostics needed to study its two-stage behavior:
//! active-set identification driven by the non-degeneracy metric, and local
//! linear convergence driven by sharpness of homogeneous linear systems.
//!
//! The crate is organized bottom-up:
//!
//! * [`sparse`]: CSR storage and the matvec kernels everything else uses.
//! * [`model`]: standard and general LP forms, partitions, δ and KKT residuals.
//! * [`mps`]: reading and writing free-format MPS files.
//! * [`scaling`]: Ruiz and Pock–Chambolle diagonal preconditioning.
//! * [`pdhg`]: the iteration itself, `P_s` geometry and iterate logging.
//! * [`identification`]: identification moment and theoretical bounds.
//! * [`sharpness`]: projections, Hoffman constants and homogeneous sharpness.
//! * [`instances`]: built-in instance generators.

pub mod error;
pub mod identification;
pub mod instances;
pub mod model;
pub mod mps;
pub mod pdhg;
pub mod scaling;
pub mod sharpness;
pub mod sparse;

mod dense;

pub use error::{Error, Result};
pub use model::{GeneralLp, Partition, PrimalDualPoint, StandardLp};
pub use pdhg::{solve, SolveResult, SolveStatus, SolverConfig};
pub use sparse::SparseMatrix;
