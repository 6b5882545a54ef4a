//! Plain f64 3-vector math and the [`Real`] scalar abstraction.
//!
//! `Real` lets the spherical-Gaussian algebra, the BRDF, and the SDF
//! evaluators run either on raw `f64` (tracing, oracles, image synthesis)
//! or on [`crate::autodiff::Var`] (taped passes that need gradients),
//! from a single implementation.

use std::ops::{Add, Div, Mul, Neg, Sub};

pub type Vec3 = [f64; 3];

pub fn add(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn scale(a: Vec3, s: f64) -> Vec3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalize(a: Vec3) -> Vec3 {
    let n = norm(a);
    debug_assert!(n > 0.0, "normalize of zero vector");
    scale(a, 1.0 / n)
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

/// Mirror reflection of `v` about the unit normal `n`.
pub fn reflect(v: Vec3, n: Vec3) -> Vec3 {
    sub(scale(n, 2.0 * dot(v, n)), v)
}

/// Angle between two unit vectors, in radians.
pub fn angle_between(a: Vec3, b: Vec3) -> f64 {
    dot(a, b).clamp(-1.0, 1.0).acos()
}

/// Any unit vector orthogonal to the unit vector `a`.
pub fn any_orthogonal(a: Vec3) -> Vec3 {
    let pick = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    normalize(cross(a, pick))
}

/// Rotate unit vector `v` by `angle` radians toward the unit vector `axis_dir`,
/// staying in the plane spanned by the two. `axis_dir` must be orthogonal to `v`.
pub fn rotate_toward(v: Vec3, axis_dir: Vec3, angle: f64) -> Vec3 {
    let (s, c) = angle.sin_cos();
    normalize(add(scale(v, c), scale(axis_dir, s)))
}

/// Scalar type shared by the plain and the taped evaluation paths.
///
/// `f64` is the detached implementation; `Var` records onto the active tape.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Add<f64, Output = Self>
    + Sub<f64, Output = Self>
    + Mul<f64, Output = Self>
    + Div<f64, Output = Self>
{
    fn constant(c: f64) -> Self;
    /// Current forward value (detached).
    fn value(self) -> f64;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn tanh(self) -> Self;
    fn relu(self) -> Self;
    fn softplus(self) -> Self;
    fn powf(self, k: f64) -> Self;
    fn pow(self, other: Self) -> Self;
    fn min(self, other: Self) -> Self;
    fn max(self, other: Self) -> Self;
    fn clamp01(self) -> Self;
}

/// Numerically stable softplus on plain floats: ln(1 + e^x).
pub fn softplus_f64(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Derivative of softplus: the logistic sigmoid.
pub fn sigmoid_f64(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl Real for f64 {
    fn constant(c: f64) -> Self {
        c
    }
    fn value(self) -> f64 {
        self
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn tanh(self) -> Self {
        f64::tanh(self)
    }
    fn relu(self) -> Self {
        f64::max(self, 0.0)
    }
    fn softplus(self) -> Self {
        softplus_f64(self)
    }
    fn powf(self, k: f64) -> Self {
        f64::powf(self, k)
    }
    fn pow(self, other: Self) -> Self {
        f64::powf(self, other)
    }
    fn min(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
    fn max(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
    fn clamp01(self) -> Self {
        self.clamp(0.0, 1.0)
    }
}

/// 3-vector of any `Real` scalar; bridges f64 and taped vectors.
pub type RVec3<S> = [S; 3];

pub fn rv_constant<S: Real>(v: Vec3) -> RVec3<S> {
    [S::constant(v[0]), S::constant(v[1]), S::constant(v[2])]
}

pub fn rv_add<S: Real>(a: RVec3<S>, b: RVec3<S>) -> RVec3<S> {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

pub fn rv_sub<S: Real>(a: RVec3<S>, b: RVec3<S>) -> RVec3<S> {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn rv_scale<S: Real>(a: RVec3<S>, s: S) -> RVec3<S> {
    [a[0] * s, a[1] * s, a[2] * s]
}

pub fn rv_dot<S: Real>(a: RVec3<S>, b: RVec3<S>) -> S {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn rv_norm<S: Real>(a: RVec3<S>) -> S {
    rv_dot(a, a).sqrt()
}

pub fn rv_normalize<S: Real>(a: RVec3<S>) -> RVec3<S> {
    let inv = S::constant(1.0) / rv_norm(a);
    rv_scale(a, inv)
}

pub fn rv_value<S: Real>(a: RVec3<S>) -> Vec3 {
    [a[0].value(), a[1].value(), a[2].value()]
}
