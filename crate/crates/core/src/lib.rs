//! Moving-mesh finite element solver for the porous medium equation
//! `d/dt rho = Laplace(rho^m)`, `m > 1`.
//!
//! The mesh nodes are advected with the discrete fluid velocity obtained
//! from a constrained minimization of the Rayleighian (dissipation plus
//! energy rate), which keeps the free boundary of the compactly supported
//! solution on the mesh boundary at all times. The crate provides:
//!
//! * [`model`] — the physical model: free energy density, exact
//!   Barenblatt-Pattle solutions and the benchmark initial data,
//! * [`mesh1d`] — 1D moving meshes, P1 basis machinery and quadrature,
//! * [`assembly1d`] — assembly of the 1D algebraic systems,
//! * [`scheme1d`] — explicit, implicit and mass-conserving time steppers,
//! * [`solver2d`] — the 2D scheme on moving triangulations,
//! * [`linalg`] — the structured linear solvers used by the schemes,
//! * [`diagnostics`] — energy/mass/error observables and estimators.

pub mod assembly1d;
pub mod diagnostics;
pub mod linalg;
pub mod mesh1d;
pub mod model;
pub mod scheme1d;
pub mod solver2d;
