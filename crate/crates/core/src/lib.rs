//! Proximal comixtures and proximal splitting solvers.

pub mod cli;
pub mod comixture;
pub mod experiments;
pub mod linops;
pub mod prox;
pub mod solvers;
pub mod validate;
pub mod vector;
