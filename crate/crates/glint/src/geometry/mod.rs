//! Scene geometry as signed distance fields: exact analytic primitives
//! (union-combined, optionally with trainable sphere parameters) and a
//! small trainable MLP SDF. Normals come from SDF gradients.

mod mlp;
mod neural;

pub use mlp::{forward_f64, forward_var, input_gradient_f64, Activation, MlpScratch, MlpSpec};
pub use neural::{fit_to_sdf, sphere_init, NeuralSdf, SdfFitConfig};

use thiserror::Error;

use crate::autodiff::{GroupId, ParameterStore, Var};
use crate::math::{self, Real, RVec3, Vec3};

/// Default scene bounding-sphere radius; rays are clipped to it and SDF
/// queries outside return distance-to-bound + 0.1.
pub const DEFAULT_BOUND_RADIUS: f64 = 3.0;

const BOUND_MARGIN: f64 = 0.1;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("SDF gradient vanishes at ({0}, {1}, {2})", position[0], position[1], position[2])]
    VanishingGradient { position: Vec3 },
    #[error("sphere radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("SDF fit did not converge: mean residual {residual} after {steps} steps")]
    FitDidNotConverge { residual: f64, steps: usize },
}

/// Analytic SDF primitive. Spheres can bind their center and radius into a
/// parameter group (offset of `[cx, cy, cz, r]`) for trainable geometry.
#[derive(Clone, Debug)]
pub enum Primitive {
    Sphere { center: Vec3, radius: f64, param_off: Option<usize> },
    Plane { normal: Vec3, offset: f64 },
    Box { center: Vec3, half_extents: Vec3 },
}

fn sphere_params<S: Real>(
    center: Vec3,
    radius: f64,
    param_off: Option<usize>,
    fetch: &impl Fn(usize) -> S,
) -> (RVec3<S>, S) {
    match param_off {
        Some(off) => (
            [fetch(off), fetch(off + 1), fetch(off + 2)],
            fetch(off + 3),
        ),
        None => (math::rv_constant(center), S::constant(radius)),
    }
}

fn sdf_primitive<S: Real>(prim: &Primitive, p: RVec3<S>, fetch: &impl Fn(usize) -> S) -> S {
    match prim {
        Primitive::Sphere { center, radius, param_off } => {
            let (c, r) = sphere_params(*center, *radius, *param_off, fetch);
            math::rv_norm(math::rv_sub(p, c)) - r
        }
        Primitive::Plane { normal, offset } => {
            math::rv_dot(p, math::rv_constant(*normal)) - S::constant(*offset)
        }
        Primitive::Box { center, half_extents } => {
            // exact box distance: |max(q,0)| + min(max_i q_i, 0)
            let q = [
                (p[0] - S::constant(center[0])).abs() - S::constant(half_extents[0]),
                (p[1] - S::constant(center[1])).abs() - S::constant(half_extents[1]),
                (p[2] - S::constant(center[2])).abs() - S::constant(half_extents[2]),
            ];
            let zero = S::constant(0.0);
            let outside = math::rv_norm([q[0].max(zero), q[1].max(zero), q[2].max(zero)]);
            let inside = q[0].max(q[1]).max(q[2]).min(zero);
            outside + inside
        }
    }
}

fn normal_primitive<S: Real>(
    prim: &Primitive,
    p: RVec3<S>,
    fetch: &impl Fn(usize) -> S,
) -> Option<RVec3<S>> {
    match prim {
        Primitive::Sphere { center, radius, param_off } => {
            let (c, _) = sphere_params(*center, *radius, *param_off, fetch);
            let d = math::rv_sub(p, c);
            if math::rv_norm(d).value() < 1e-9 {
                return None;
            }
            Some(math::rv_normalize(d))
        }
        Primitive::Plane { normal, .. } => Some(math::rv_constant(*normal)),
        Primitive::Box { center, half_extents } => {
            // gradient of the exact box distance, piecewise by region
            let pv = math::rv_value(p);
            let d = math::sub(pv, *center);
            let q = [
                d[0].abs() - half_extents[0],
                d[1].abs() - half_extents[1],
                d[2].abs() - half_extents[2],
            ];
            if q.iter().any(|&x| x > 0.0) {
                let clamped = [q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)];
                let n = math::norm(clamped);
                if n < 1e-9 {
                    return None;
                }
                let g = [
                    clamped[0] / n * d[0].signum(),
                    clamped[1] / n * d[1].signum(),
                    clamped[2] / n * d[2].signum(),
                ];
                Some(math::rv_constant(g))
            } else {
                // inside: face of largest q
                let mut best = 0;
                for i in 1..3 {
                    if q[i] > q[best] {
                        best = i;
                    }
                }
                let mut g = [0.0; 3];
                g[best] = d[best].signum();
                Some(math::rv_constant(g))
            }
        }
    }
}

/// Union of analytic primitives, possibly with a trainable parameter group.
#[derive(Clone, Debug)]
pub struct AnalyticGeometry {
    pub primitives: Vec<Primitive>,
    pub group: Option<GroupId>,
}

impl AnalyticGeometry {
    /// Static geometry (no trainable parameters).
    pub fn fixed(primitives: Vec<Primitive>) -> Self {
        AnalyticGeometry { primitives, group: None }
    }

    fn index_of_closest(&self, fetch_f64: &impl Fn(usize) -> f64, p: Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, prim) in self.primitives.iter().enumerate() {
            let d = sdf_primitive(prim, p, fetch_f64);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }
}

/// SDF scene: analytic primitives or a neural SDF, plus the bounding sphere.
pub enum SceneGeometry {
    Analytic(AnalyticGeometry),
    Neural(NeuralSdf),
}

impl SceneGeometry {
    pub fn bound_radius(&self) -> f64 {
        DEFAULT_BOUND_RADIUS
    }

    /// Signed distance at `p`, detached. Outside the bounding sphere the
    /// result is the distance to the bound plus a fixed margin.
    pub fn sdf(&self, store: &ParameterStore, p: Vec3) -> f64 {
        let r = math::norm(p);
        if r > self.bound_radius() {
            return r - self.bound_radius() + BOUND_MARGIN;
        }
        self.sdf_unbounded(store, p)
    }

    /// Signed distance without the bounding-sphere guard.
    pub fn sdf_unbounded(&self, store: &ParameterStore, p: Vec3) -> f64 {
        match self {
            SceneGeometry::Analytic(a) => {
                let fetch = |i: usize| a.group.map(|g| store.values(g)[i]).unwrap_or(f64::NAN);
                let mut d = f64::INFINITY;
                for prim in &a.primitives {
                    d = d.min(sdf_primitive(prim, p, &fetch));
                }
                d
            }
            SceneGeometry::Neural(n) => n.value(store, p),
        }
    }

    /// Taped signed distance; `p` may itself be a taped expression. No
    /// bounding guard (only used at or near surfaces).
    pub fn sdf_var(&self, store: &ParameterStore, p: RVec3<Var>) -> Var {
        match self {
            SceneGeometry::Analytic(a) => {
                let fetch = |i: usize| store.leaf(a.group.expect("trainable primitive without group"), i);
                let mut d: Option<Var> = None;
                for prim in &a.primitives {
                    let di = sdf_primitive(prim, p, &fetch);
                    d = Some(match d {
                        None => di,
                        Some(prev) => prev.min(di),
                    });
                }
                d.expect("no primitives")
            }
            SceneGeometry::Neural(n) => n.value_var(store, p),
        }
    }

    /// Unit normal (normalized SDF gradient) at `p`, detached.
    pub fn normal(&self, store: &ParameterStore, p: Vec3) -> Result<Vec3, GeometryError> {
        match self {
            SceneGeometry::Analytic(a) => {
                let fetch = |i: usize| a.group.map(|g| store.values(g)[i]).unwrap_or(f64::NAN);
                let idx = a.index_of_closest(&fetch, p);
                normal_primitive(&a.primitives[idx], p, &fetch)
                    .ok_or(GeometryError::VanishingGradient { position: p })
            }
            SceneGeometry::Neural(n) => n.normal(store, p),
        }
    }

    /// Taped unit normal at a (possibly taped) point. Analytic scenes use
    /// their closed forms; the neural SDF uses central differences in `p`
    /// with taped evaluations, keeping everything first-order in the
    /// parameters.
    pub fn normal_var(
        &self,
        store: &ParameterStore,
        p: RVec3<Var>,
    ) -> Result<RVec3<Var>, GeometryError> {
        match self {
            SceneGeometry::Analytic(a) => {
                let fetch_f64 =
                    |i: usize| a.group.map(|g| store.values(g)[i]).unwrap_or(f64::NAN);
                let idx = a.index_of_closest(&fetch_f64, math::rv_value(p));
                let fetch = |i: usize| store.leaf(a.group.expect("trainable primitive without group"), i);
                normal_primitive(&a.primitives[idx], p, &fetch).ok_or(
                    GeometryError::VanishingGradient { position: math::rv_value(p) },
                )
            }
            SceneGeometry::Neural(n) => n.normal_var(store, p),
        }
    }

    /// Whether any geometry parameters are learnable.
    pub fn group(&self) -> Option<GroupId> {
        match self {
            SceneGeometry::Analytic(a) => a.group,
            SceneGeometry::Neural(n) => Some(n.group),
        }
    }
}

#[cfg(test)]
mod tests;
