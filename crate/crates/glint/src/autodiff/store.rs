use super::tape::{GroupIdx, Node, TAPE};
use super::var::Var;

/// Identifier of a named parameter group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GroupId(u32);

impl GroupId {
    pub(crate) fn raw(self) -> u32 {
        self.0
    }
}

struct Group {
    name: String,
    values: Vec<f64>,
    grad: Vec<f64>,
    /// Adam first-moment buffer.
    m: Vec<f64>,
    /// Adam second-moment buffer.
    v: Vec<f64>,
    frozen: bool,
}

/// All learnable scalars, organized into named flat groups, each with a
/// gradient accumulator and Adam moment buffers. Lives outside tapes;
/// tapes reference slots via `Param`/`ParamDot` nodes.
#[derive(Default)]
pub struct ParameterStore {
    groups: Vec<Group>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a new group. Names must be unique.
    pub fn add_group(&mut self, name: &str, init: Vec<f64>) -> GroupId {
        assert!(
            self.group_id(name).is_none(),
            "parameter group '{name}' registered twice"
        );
        let n = init.len();
        self.groups.push(Group {
            name: name.to_string(),
            values: init,
            grad: vec![0.0; n],
            m: vec![0.0; n],
            v: vec![0.0; n],
            frozen: false,
        });
        GroupId(self.groups.len() as u32 - 1)
    }

    pub fn group_id(&self, name: &str) -> Option<GroupId> {
        self.groups
            .iter()
            .position(|g| g.name == name)
            .map(|i| GroupId(i as u32))
    }

    pub fn group_name(&self, id: GroupId) -> &str {
        &self.groups[id.0 as usize].name
    }

    pub fn group_ids(&self) -> Vec<GroupId> {
        (0..self.groups.len() as u32).map(GroupId).collect()
    }

    pub fn len(&self, id: GroupId) -> usize {
        self.groups[id.0 as usize].values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn values(&self, id: GroupId) -> &[f64] {
        &self.groups[id.0 as usize].values
    }

    pub fn values_mut(&mut self, id: GroupId) -> &mut [f64] {
        &mut self.groups[id.0 as usize].values
    }

    pub fn grad(&self, id: GroupId) -> &[f64] {
        &self.groups[id.0 as usize].grad
    }

    pub fn set_frozen(&mut self, id: GroupId, frozen: bool) {
        self.groups[id.0 as usize].frozen = frozen;
    }

    pub fn is_frozen(&self, id: GroupId) -> bool {
        self.groups[id.0 as usize].frozen
    }

    pub fn zero_grad(&mut self) {
        for g in &mut self.groups {
            g.grad.iter_mut().for_each(|x| *x = 0.0);
        }
    }

    /// Record a parameter leaf on the current tape.
    pub fn leaf(&self, id: GroupId, idx: usize) -> Var {
        let value = self.groups[id.0 as usize].values[idx];
        TAPE.with(|t| {
            let mut t = t.borrow_mut();
            let node_id = t.push(Node::Param { group: id.0, idx: idx as u32 }, value);
            Var { id: node_id, epoch: t.epoch, val: value }
        })
    }

    pub fn leaf_range(&self, id: GroupId, start: usize, len: usize) -> Vec<Var> {
        (start..start + len).map(|i| self.leaf(id, i)).collect()
    }

    /// Add `buf` into the store's gradient accumulators.
    pub fn accumulate_grads(&mut self, buf: &GradBuffer) {
        assert_eq!(buf.per_group.len(), self.groups.len());
        for (g, b) in self.groups.iter_mut().zip(&buf.per_group) {
            for (dst, src) in g.grad.iter_mut().zip(b) {
                *dst += *src;
            }
        }
    }

    /// Standard Adam update with bias correction; zeroes gradients after.
    /// Frozen groups and groups with any non-finite gradient are skipped
    /// (the latter counted in the returned value).
    pub fn adam_step(&mut self, step: u64, lr: f64, beta1: f64, beta2: f64, eps: f64) -> u32 {
        let t = step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let mut skipped = 0;
        for g in &mut self.groups {
            if g.frozen {
                g.grad.iter_mut().for_each(|x| *x = 0.0);
                continue;
            }
            if g.grad.iter().any(|x| !x.is_finite()) {
                skipped += 1;
                g.grad.iter_mut().for_each(|x| *x = 0.0);
                continue;
            }
            for i in 0..g.values.len() {
                let grad = g.grad[i];
                g.m[i] = beta1 * g.m[i] + (1.0 - beta1) * grad;
                g.v[i] = beta2 * g.v[i] + (1.0 - beta2) * grad * grad;
                let m_hat = g.m[i] / bc1;
                let v_hat = g.v[i] / bc2;
                g.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
            g.grad.iter_mut().for_each(|x| *x = 0.0);
        }
        skipped
    }

    /// Fresh zero gradient buffer matching this store's layout.
    pub fn grad_buffer(&self) -> GradBuffer {
        GradBuffer {
            per_group: self.groups.iter().map(|g| vec![0.0; g.values.len()]).collect(),
        }
    }

    pub(crate) fn group_values(&self, idx: GroupIdx) -> &[f64] {
        &self.groups[idx.0 as usize].values
    }

    /// Total number of parameters across groups.
    pub fn total_len(&self) -> usize {
        self.groups.iter().map(|g| g.values.len()).sum()
    }
}

/// Gradient accumulator mirroring a store's group layout. Used so backward
/// passes on worker threads can run against a shared immutable store and be
/// sum-merged afterwards in a fixed order.
#[derive(Clone)]
pub struct GradBuffer {
    pub(crate) per_group: Vec<Vec<f64>>,
}

impl GradBuffer {
    #[inline]
    pub(crate) fn accumulate(&mut self, group: usize, idx: usize, g: f64) {
        self.per_group[group][idx] += g;
    }

    pub fn group(&self, id: GroupId) -> &[f64] {
        &self.per_group[id.0 as usize]
    }

    pub fn add_from(&mut self, other: &GradBuffer) {
        for (dst, src) in self.per_group.iter_mut().zip(&other.per_group) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += *s;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in &mut self.per_group {
            for x in g {
                *x *= s;
            }
        }
    }

    pub fn zero(&mut self) {
        for g in &mut self.per_group {
            g.iter_mut().for_each(|x| *x = 0.0);
        }
    }
}
