//! Bochner-Riesz means, spectral measure and resolvent kernels of the planar
//! Aharonov-Bohm operator: closed geometric plus diffractive representation,
//! partial-wave series, dyadic bounds and grid-level operator experiments.

pub mod ab_model;
pub mod dyadic_bounds;
pub mod kernels;
pub mod operator_lab;
pub mod quadrature;
pub mod specfun;
