//! Semilinear wave equations with time-dependent speed and damping:
//! coefficient families, regime classification, a finite-difference solver,
//! a reduced ODE oracle and lifespan-scaling experiments.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coefficients;
pub mod quadrature;
pub mod pde_solver;
pub mod theory;
pub mod ode_oracle;
pub mod experiments;
pub mod cli_io;
pub mod selftest;
