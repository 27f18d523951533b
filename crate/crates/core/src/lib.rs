//! Rotationally symmetric p-harmonic maps between warped-product manifolds.
//!
//! The crate solves the radial p-harmonic equation for a profile `f`,
//! evaluates the geometric operators along it, extracts the large-radius
//! asymptotics of `f′`, and certifies radii where `Δ_p(H∘F) < 0` for a convex
//! radial `H` on the target.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the aliases at the
//! crate root fix the scalar to `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod certify;
pub mod geometry;
pub mod operators;
pub mod profile_ode;
pub mod scalar;

pub use scalar::Real;

pub type ModelParameters = geometry::ModelParameters<f64>;
pub type WarpingFunction = geometry::WarpingFunction<f64>;
pub type ValidationReport = geometry::ValidationReport<f64>;
pub type PointState = operators::PointState<f64>;
pub type ConvexProfile = operators::ConvexProfile<f64>;
pub type Decomposition = operators::Decomposition<f64>;
pub type SolverConfig = profile_ode::SolverConfig<f64>;
pub type ProfileSolution = profile_ode::ProfileSolution<f64>;
pub type SolutionDump = profile_ode::SolutionDump<f64>;
pub type AsymptoticsReport = asymptotics::AsymptoticsReport<f64>;
pub type FitWindow = asymptotics::FitWindow<f64>;
pub type Certificate = certify::Certificate<f64>;
pub type TermDiagnostics = certify::TermDiagnostics<f64>;
