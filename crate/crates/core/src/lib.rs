//! Multiple-testing procedures, FDR bounds, adversarial non-null
//! constructions, dependent p-value generators and a seeded Monte Carlo
//! engine for checking them against each other.

pub mod adversaries;
pub mod bounds;
pub mod dependence;
mod error;
pub mod mc;
pub mod numeric;
mod ratio;
pub mod testing;

pub use adversaries::{AdversarySpec, AdversaryTrace, CompletedStudy, MaskStrategy};
pub use bounds::{BoundReport, EmpiricalCdf, Fdr0Curve};
pub use dependence::{Generator, GeneratorSpec, Sidedness, WithinBlock};
pub use mc::{McConfig, McEstimate, Procedure};
pub use error::{FdrError, Result};
pub use nalgebra::DMatrix;
pub use ratio::Ratio;
pub use testing::{PValueStudy, RejectionOutcome};
