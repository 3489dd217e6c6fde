//! Configuration parsing and simulation output formats.

pub mod config;
pub mod vtk;
