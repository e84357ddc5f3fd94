//! Sampling-driven selected configuration interaction: a simulated
//! symmetry-sector sampler feeds determinants into a cumulative subspace that
//! is screened, diagonalized and expanded classically until the energy settles.

pub mod cli;
pub mod determinants;
pub mod driver;
pub mod eigensolver;
pub mod error;
pub mod integrals;
pub mod optimizer;
pub mod oracle;
pub mod sampler;
pub mod subspace;

pub use determinants::{Determinant, Sector};
pub use driver::{run_hivqe, RunConfig, RunResult, RunStatus};
pub use error::{Error, Result};
pub use integrals::{DipoleIntegrals, IntegralSet};
