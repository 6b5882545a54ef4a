use std::cell::RefCell;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mlp::{forward_f64, forward_var, input_gradient_f64, MlpScratch, MlpSpec};
use super::GeometryError;
use crate::autodiff::{self, fresh_tape, GroupId, ParameterStore, Var};
use crate::math::{self, Vec3};

/// Step used for taped central differences of the neural normal.
const NORMAL_FD_STEP: f64 = 1e-4;

thread_local! {
    static SCRATCH: RefCell<MlpScratch> = RefCell::new(MlpScratch::default());
}

/// Trainable MLP signed distance field; parameters live in `group`.
pub struct NeuralSdf {
    pub spec: MlpSpec,
    pub group: GroupId,
}

impl NeuralSdf {
    /// Register a fresh network under `name` in the store.
    pub fn new(store: &mut ParameterStore, name: &str, spec: MlpSpec, seed: u64) -> Self {
        assert_eq!(spec.out_dim, 1, "SDF network must have one output");
        let group = store.add_group(name, spec.init_params(seed, false));
        NeuralSdf { spec, group }
    }

    pub fn value(&self, store: &ParameterStore, p: Vec3) -> f64 {
        SCRATCH.with(|s| {
            let mut s = s.borrow_mut();
            let mut out = Vec::new();
            forward_f64(&self.spec, store.values(self.group), p, &mut s, &mut out);
            out[0]
        })
    }

    pub fn value_var(&self, store: &ParameterStore, p: [Var; 3]) -> Var {
        forward_var(&self.spec, store, self.group, p)[0]
    }

    /// Unit normal from the reverse-mode input gradient.
    pub fn normal(&self, store: &ParameterStore, p: Vec3) -> Result<Vec3, GeometryError> {
        let g = SCRATCH.with(|s| {
            let mut s = s.borrow_mut();
            input_gradient_f64(&self.spec, store.values(self.group), p, &[1.0], &mut s)
        });
        let n = math::norm(g);
        if n < 1e-9 {
            return Err(GeometryError::VanishingGradient { position: p });
        }
        Ok(math::scale(g, 1.0 / n))
    }

    /// Taped unit normal: central differences in `p` of taped SDF values,
    /// so the result stays differentiable in the network parameters without
    /// second-order tape support.
    pub fn normal_var(
        &self,
        store: &ParameterStore,
        p: [Var; 3],
    ) -> Result<[Var; 3], GeometryError> {
        let pv = math::rv_value(p);
        // cheap detached check first
        self.normal(store, pv)?;
        let mut g = [p[0]; 3];
        for i in 0..3 {
            let mut plus = p;
            plus[i] = plus[i] + NORMAL_FD_STEP;
            let mut minus = p;
            minus[i] = minus[i] - NORMAL_FD_STEP;
            let fp = self.value_var(store, plus);
            let fm = self.value_var(store, minus);
            g[i] = (fp - fm) / (2.0 * NORMAL_FD_STEP);
        }
        Ok(autodiff::normalize3(g))
    }
}

/// Configuration of the SDF regression used for initialization.
#[derive(Clone, Debug)]
pub struct SdfFitConfig {
    pub steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub eikonal_weight: f64,
    pub eikonal_batch: usize,
    pub sample_radius: f64,
    pub seed: u64,
    /// Mean absolute residual the fit must reach over fresh samples.
    pub target_residual: f64,
}

impl Default for SdfFitConfig {
    fn default() -> Self {
        SdfFitConfig {
            steps: 1500,
            batch: 128,
            lr: 2e-3,
            eikonal_weight: 0.05,
            eikonal_batch: 8,
            sample_radius: super::DEFAULT_BOUND_RADIUS,
            seed: 17,
            target_residual: 5e-3,
        }
    }
}

fn sample_ball(rng: &mut ChaCha8Rng, radius: f64) -> Vec3 {
    loop {
        let p = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if math::norm(p) <= 1.0 {
            return math::scale(p, radius);
        }
    }
}

/// Regress the network onto an analytic target SDF with an eikonal penalty.
/// All other parameter groups are frozen for the duration.
pub fn fit_to_sdf(
    store: &mut ParameterStore,
    net: &NeuralSdf,
    target: &dyn Fn(Vec3) -> f64,
    cfg: &SdfFitConfig,
) -> Result<f64, GeometryError> {
    let previously_frozen: Vec<bool> = store
        .group_ids()
        .iter()
        .map(|&id| {
            let frozen = store.is_frozen(id);
            if id != net.group {
                store.set_frozen(id, true);
            }
            frozen
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for step in 1..=cfg.steps {
        fresh_tape();
        let mut loss = autodiff::constant(0.0);
        for _ in 0..cfg.batch {
            let p = sample_ball(&mut rng, cfg.sample_radius);
            let pv = [
                autodiff::constant(p[0]),
                autodiff::constant(p[1]),
                autodiff::constant(p[2]),
            ];
            let d = net.value_var(store, pv) - target(p);
            loss = loss + d * d;
        }
        loss = loss / cfg.batch as f64;
        if cfg.eikonal_weight > 0.0 {
            let mut eik = autodiff::constant(0.0);
            for _ in 0..cfg.eikonal_batch {
                // bias samples toward the surface where the eikonal
                // property matters for tracing
                let mut p = sample_ball(&mut rng, cfg.sample_radius);
                for _ in 0..8 {
                    let d = target(p);
                    if d.abs() < 0.3 {
                        break;
                    }
                    p = sample_ball(&mut rng, cfg.sample_radius);
                }
                let pv = [
                    autodiff::constant(p[0]),
                    autodiff::constant(p[1]),
                    autodiff::constant(p[2]),
                ];
                let mut g = [pv[0]; 3];
                for i in 0..3 {
                    let mut plus = pv;
                    plus[i] = plus[i] + 1e-3;
                    let mut minus = pv;
                    minus[i] = minus[i] - 1e-3;
                    g[i] = (net.value_var(store, plus) - net.value_var(store, minus)) / 2e-3;
                }
                let r = autodiff::norm3(g) - 1.0;
                eik = eik + r * r;
            }
            loss = loss + eik * (cfg.eikonal_weight / cfg.eikonal_batch as f64);
        }
        let mut grads = store.grad_buffer();
        autodiff::backward_into(loss, store, &mut grads);
        store.accumulate_grads(&grads);
        store.adam_step(step as u64, cfg.lr, 0.9, 0.999, 1e-8);
    }

    for (&id, &frozen) in store.group_ids().iter().zip(&previously_frozen) {
        store.set_frozen(id, frozen);
    }

    // held-out residual
    let mut residual = 0.0;
    let checks = 10_000;
    for _ in 0..checks {
        let p = sample_ball(&mut rng, cfg.sample_radius);
        residual += (net.value(store, p) - target(p)).abs();
    }
    residual /= checks as f64;
    if residual > cfg.target_residual {
        return Err(GeometryError::FitDidNotConverge { residual, steps: cfg.steps });
    }
    Ok(residual)
}

/// Initialize the network to the SDF of an origin-centered sphere:
/// geometric initialization with scale calibration, then a short regression
/// polish to the analytic target.
pub fn sphere_init(
    store: &mut ParameterStore,
    net: &NeuralSdf,
    radius: f64,
    cfg: &SdfFitConfig,
) -> Result<f64, GeometryError> {
    if radius <= 0.0 {
        return Err(GeometryError::InvalidRadius(radius));
    }
    let init = net.spec.init_params_geometric(cfg.seed, radius);
    store.values_mut(net.group).copy_from_slice(&init);

    // calibrate the final-layer scale so net(p) + radius tracks |p|
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ca1e);
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..512 {
        let p = sample_ball(&mut rng, cfg.sample_radius);
        num += math::norm(p);
        den += net.value(store, p) + radius;
    }
    if den.abs() > 1e-9 {
        let s = num / den;
        let shapes = net.spec.layer_shapes();
        let (rows, cols) = shapes[shapes.len() - 1];
        let total = net.spec.param_len();
        let w_off = total - rows * cols - rows;
        for w in &mut store.values_mut(net.group)[w_off..w_off + rows * cols] {
            *w *= s;
        }
    }

    fit_to_sdf(store, net, &|p| math::norm(p) - radius, cfg)
}
