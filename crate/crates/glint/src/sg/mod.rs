//! Closed-form spherical-Gaussian algebra.
//!
//! An SG is `mu * exp(lambda * (dot(w, xi) - 1))` on the unit sphere: `xi`
//! the lobe axis, `lambda > 0` the sharpness, `mu` an RGB amplitude. The
//! family is closed under pointwise products and has a closed-form integral
//! over the full sphere, which is what makes the rendering sums cheap.
//!
//! Everything here is generic over [`Real`] so the same formulas run
//! detached (`f64`) and on the tape ([`crate::autodiff::Var`]).

mod cosine_fit;

pub use cosine_fit::{clamped_cosine_constants, fit_clamped_cosine, render_constants_file};

use crate::math::{
    self, rv_constant, rv_dot, rv_norm, rv_scale, Real, RVec3, Vec3,
};
use thiserror::Error;

/// Sharpness assigned to the degenerate antipodal product fallback.
pub const DEGENERATE_SHARPNESS: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum SgError {
    #[error("direction set needs at least one direction")]
    EmptyDirectionSet,
}

/// One spherical-Gaussian lobe.
#[derive(Clone, Copy, Debug)]
pub struct Sg<S: Real> {
    pub axis: RVec3<S>,
    pub sharpness: S,
    pub amplitude: [S; 3],
}

pub type Sg64 = Sg<f64>;

impl<S: Real> Sg<S> {
    pub fn new(axis: RVec3<S>, sharpness: S, amplitude: [S; 3]) -> Self {
        debug_assert!(
            (rv_norm(axis).value() - 1.0).abs() < 1e-9,
            "SG axis must be unit"
        );
        debug_assert!(sharpness.value() > 0.0, "SG sharpness must be positive");
        Sg { axis, sharpness, amplitude }
    }

    pub fn from_f64(axis: Vec3, sharpness: f64, amplitude: Vec3) -> Self {
        Sg::new(
            rv_constant(axis),
            S::constant(sharpness),
            [
                S::constant(amplitude[0]),
                S::constant(amplitude[1]),
                S::constant(amplitude[2]),
            ],
        )
    }

    /// Uniformly scale the amplitude.
    pub fn scaled(self, s: S) -> Self {
        Sg {
            axis: self.axis,
            sharpness: self.sharpness,
            amplitude: [self.amplitude[0] * s, self.amplitude[1] * s, self.amplitude[2] * s],
        }
    }
}

/// Evaluate the lobe at unit direction `w`.
pub fn sg_eval<S: Real>(g: &Sg<S>, w: RVec3<S>) -> [S; 3] {
    let e = ((rv_dot(w, g.axis) - S::constant(1.0)) * g.sharpness).exp();
    [g.amplitude[0] * e, g.amplitude[1] * e, g.amplitude[2] * e]
}

/// Pointwise product of two lobes, itself an SG:
/// `xi' = (l1 xi1 + l2 xi2)/|.|`, `lambda' = |l1 xi1 + l2 xi2|`,
/// `mu' = mu1 mu2 e^(lambda' - l1 - l2)`.
///
/// Antipodal lobes of equal sharpness have no SG product; the returned flag
/// marks the isotropic fallback (`lambda' = 1e-6`, axis of the first lobe).
pub fn sg_product<S: Real>(g1: &Sg<S>, g2: &Sg<S>) -> (Sg<S>, bool) {
    let combined = [
        g1.axis[0] * g1.sharpness + g2.axis[0] * g2.sharpness,
        g1.axis[1] * g1.sharpness + g2.axis[1] * g2.sharpness,
        g1.axis[2] * g1.sharpness + g2.axis[2] * g2.sharpness,
    ];
    let len = rv_norm(combined);
    let degenerate = len.value() < 1e-9;
    let (axis, sharpness) = if degenerate {
        (g1.axis, S::constant(DEGENERATE_SHARPNESS))
    } else {
        (rv_scale(combined, S::constant(1.0) / len), len)
    };
    // grouped so the product is exactly symmetric in its arguments
    let scale = (sharpness - (g1.sharpness + g2.sharpness)).exp();
    let amplitude = [
        g1.amplitude[0] * g2.amplitude[0] * scale,
        g1.amplitude[1] * g2.amplitude[1] * scale,
        g1.amplitude[2] * g2.amplitude[2] * scale,
    ];
    (Sg { axis, sharpness, amplitude }, degenerate)
}

/// Integral over the full sphere: `2 pi (mu / lambda) (1 - e^(-2 lambda))`.
pub fn sg_integral<S: Real>(g: &Sg<S>) -> [S; 3] {
    let two_pi = 2.0 * std::f64::consts::PI;
    let f = (S::constant(1.0) - (g.sharpness * (-2.0)).exp()) / g.sharpness
        * S::constant(two_pi);
    [g.amplitude[0] * f, g.amplitude[1] * f, g.amplitude[2] * f]
}

/// `integral(g1 * g2)` over the sphere; flag marks product degeneracy.
pub fn sg_inner_product<S: Real>(g1: &Sg<S>, g2: &Sg<S>) -> ([S; 3], bool) {
    let (p, degenerate) = sg_product(g1, g2);
    (sg_integral(&p), degenerate)
}

/// Single-lobe least-squares fit of `max(dot(w, n), 0)` with axis `n`.
/// Constants come from the checked-in fit (see [`render_constants_file`]).
pub fn clamped_cosine_sg<S: Real>(n: RVec3<S>) -> Sg<S> {
    let (lambda, mu) = clamped_cosine_constants();
    Sg {
        axis: n,
        sharpness: S::constant(lambda),
        amplitude: [S::constant(mu), S::constant(mu), S::constant(mu)],
    }
}

/// Fixed set of unit directions for the environment lights.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    dirs: Vec<Vec3>,
}

impl DirectionSet {
    pub fn new(dirs: Vec<Vec3>) -> Result<Self, SgError> {
        if dirs.is_empty() {
            return Err(SgError::EmptyDirectionSet);
        }
        for d in &dirs {
            debug_assert!((math::norm(*d) - 1.0).abs() < 1e-9);
        }
        Ok(DirectionSet { dirs })
    }

    pub fn len(&self) -> usize {
        self.dirs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dirs.is_empty()
    }

    pub fn dir(&self, i: usize) -> Vec3 {
        self.dirs[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Vec3> {
        self.dirs.iter()
    }

    /// Solid angle attributed to each direction: `4 pi / K`.
    pub fn solid_angle_per_dir(&self) -> f64 {
        4.0 * std::f64::consts::PI / self.dirs.len() as f64
    }

    /// Smallest pairwise angle, in radians.
    pub fn min_pairwise_angle(&self) -> f64 {
        let mut best = std::f64::consts::PI;
        for i in 0..self.dirs.len() {
            for j in i + 1..self.dirs.len() {
                best = best.min(math::angle_between(self.dirs[i], self.dirs[j]));
            }
        }
        best
    }
}

/// Deterministic near-uniform direction set from the Fibonacci spiral.
pub fn fibonacci_directions(k: usize) -> Result<DirectionSet, SgError> {
    if k == 0 {
        return Err(SgError::EmptyDirectionSet);
    }
    let golden = std::f64::consts::PI * (3.0 - 5.0f64.sqrt());
    let mut dirs = Vec::with_capacity(k);
    for i in 0..k {
        let z = 1.0 - (2.0 * i as f64 + 1.0) / k as f64;
        let r = (1.0 - z * z).max(0.0).sqrt();
        let theta = golden * i as f64;
        dirs.push([r * theta.cos(), r * theta.sin(), z]);
    }
    DirectionSet::new(dirs)
}
