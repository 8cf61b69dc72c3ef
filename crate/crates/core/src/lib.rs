//! Desk-scale numerical laboratory for the Gross–Pitaevskii limit of Bose gas
//! dynamics.

pub mod feynman_graphs;
pub mod fock_lattice;
pub mod gp_field;
pub mod hierarchy_check;
pub mod krylov;
pub mod marginals;
pub mod potentials;
pub mod quadrature;
pub mod scattering;
