//! Numerical laboratory for multilinear functional inequalities.
//!
//! The crate computes Brascamp-Lieb weights by several equivalent routes
//! (Gaussian determinant quotients, minimum-vector infima, alternating
//! minimization), evaluates block-determinant invariant polynomials of
//! tuples of linear maps, constructs nonconcentration certificates on
//! discrete measure spaces, and runs seeded Monte Carlo experiments that
//! probe the Lebesgue-improving exponents of model averaging operators.
//!
//! Modules:
//! - [`linops`]: dense kernels (determinants, symmetric eigensolver, SPD
//!   inverse square root, constructive upper triangularization).
//! - [`bl_core`]: Brascamp-Lieb data and weight solvers.
//! - [`invariant_poly`]: block-determinant invariant polynomials and the
//!   alternating-contraction / polarization identities.
//! - [`nonconc`]: subset constructions and closed-form densities used in
//!   nonconcentration lower bounds.
//! - [`radon_lab`]: discretized model operators and Knapp-box sweeps.
//! - [`ift_newton`]: certified Newton iteration and normalized defining
//!   functions for incidence relations.

// Matrix kernels index with (i, j) loop variables throughout; the
// iterator rewrites clippy suggests hurt readability here.
#![allow(clippy::needless_range_loop)]

pub mod bl_core;
pub mod ift_newton;
pub mod invariant_poly;
pub mod linops;
pub mod nonconc;
pub mod radon_lab;
pub mod rational;
pub mod rng;
pub mod tol;
