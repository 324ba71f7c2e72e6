//! Generalized Kähler–Einstein equation on a flat torus.
//!
//! With `χ = λ dx∧dy` and `i∂∂̄ψ = (Δψ/2) dx∧dy`, the equation
//! `χ + i∂∂̄ψ = e^ψ F χ` reads `Δψ = 2λ(e^ψ F − 1)`.

pub mod density;
pub mod linear;
pub mod solver;

pub use density::{build_density, cutoff, Background, Puncture, SingularDensity};
pub use solver::{
    density_ratio_profile, gke_residual, gke_solve, gke_solve_from, manufactured_case,
    solve_semilinear, GkeSolution, ManufacturedSolution, NewtonOptions, NewtonReport, RatioBand,
};
