//! nemaflow: pseudospectral simulation and invariant auditing for a
//! non-isothermal nematic liquid crystal model.
//!
//! The state is a velocity field `u` (incompressible), a director field `d`
//! (3 components, Ginzburg-Landau penalty relaxation) and a positive
//! temperature `ϑ`, coupled so that total energy `∫ (|u|²/2 + ϑ)` is a
//! constant of motion and entropy production is sign-definite. The solver
//! advances a Faedo-Galerkin truncation of the system (N solenoidal
//! velocity modes, convection projected onto the first M ≤ N of them) and
//! recomputes every conservation/production identity each step.
//!
//! The numeric core is generic over the scalar type via [`scalar::Scalar`];
//! the aliases below pin the `f64` instantiation the CLI uses.

pub mod audit;
pub mod cli;
pub mod config;
pub mod error;
pub mod fields;
pub mod grid;
pub mod initial;
pub mod io;
pub mod material;
pub mod rng;
pub mod scalar;
pub mod solenoidal;
pub mod spectral;
pub mod stepper;
pub mod study;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar type used by the command-line driver and the acceptance suite.
pub type Real = f64;

pub type DomainSpec = grid::DomainSpec<Real>;
pub type Domain = spectral::Domain<Real>;
pub type ScalarFieldR = grid::ScalarField<Real>;
pub type VectorFieldR = grid::VectorField<Real>;
pub type TensorFieldR = grid::TensorField<Real>;
pub type MaterialLaws = material::MaterialLaws<Real>;
pub type FieldState = fields::FieldState<Real>;
pub type SolenoidalBasis = solenoidal::SolenoidalBasis<Real>;
pub type GalerkinConfig = stepper::GalerkinConfig<Real>;
pub type StepReport = stepper::StepReport<Real>;
pub type EnergyLedger = audit::EnergyLedger<Real>;
pub type NormReport = audit::NormReport<Real>;
pub type RunConfig = config::RunConfig<Real>;
