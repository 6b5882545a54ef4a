//! Inverse rendering with spherical-Gaussian illumination over signed
//! distance fields: refined sphere tracing, explicit indirect-light
//! estimation, silhouette-aware gradients, and a small reverse-mode
//! autodiff engine driving the whole fit.

pub mod autodiff;
pub mod encoding;
pub mod geometry;
pub mod sg;
pub mod math;
