//! Numerical experiments for the 3D periodic complex Ginzburg–Landau
//! equation `∂tΨ = (1+iω)ΔΨ + f(Ψ, Ψ̄)`: lattice-point shells, a
//! pseudospectral ETD2RK solver, backward linear estimates along
//! trajectories, and diagnostics of spectral projectors on sampled
//! attractors.

pub mod cli;
pub mod dynamics;
pub mod error;
mod expint;
pub mod io;
pub mod lattice;
pub mod mane;
pub mod spectral;
pub mod variational;

pub use error::{CglError, Result};
