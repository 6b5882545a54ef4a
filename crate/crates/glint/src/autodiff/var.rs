use std::ops::{Add, Div, Mul, Neg, Sub};

use super::store::{GradBuffer, ParameterStore};
use super::tape::{sanitize_partial, FusedOp, Node, SimpleOp, NONE, TAPE};
use crate::math::{sigmoid_f64, softplus_f64, Real};

/// Handle to a scalar recorded on the current thread's tape.
///
/// Carries the forward value so reads never touch the tape. Valid only for
/// the tape epoch that created it.
#[derive(Clone, Copy, Debug)]
pub struct Var {
    pub(crate) id: u32,
    pub(crate) epoch: u64,
    pub(crate) val: f64,
}

impl Var {
    #[inline]
    pub fn value(self) -> f64 {
        self.val
    }
}

/// New free input on the current tape.
pub fn leaf(value: f64) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let id = t.push(Node::Leaf, value);
        Var { id, epoch: t.epoch, val: value }
    })
}

/// Constant node (no gradient).
pub fn constant(value: f64) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        let id = t.push(Node::Const, value);
        Var { id, epoch: t.epoch, val: value }
    })
}

fn record_simple(op: SimpleOp, a: Var, b: Option<Var>, value: f64, pa: f64, pb: f64, aux: f64) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        assert_eq!(a.epoch, t.epoch, "Var used outside its tape epoch");
        if let Some(b) = b {
            assert_eq!(b.epoch, t.epoch, "Var used outside its tape epoch");
        }
        let pa = sanitize_partial(pa, &mut t.guards);
        let pb = sanitize_partial(pb, &mut t.guards);
        let node = Node::Simple { op, a: a.id, b: b.map_or(NONE, |b| b.id), pa, pb, aux };
        let id = t.push(node, value);
        Var { id, epoch: t.epoch, val: value }
    })
}

macro_rules! unary {
    ($name:ident, $op:expr, $val:expr, $partial:expr) => {
        pub fn $name(self) -> Var {
            let x = self.val;
            #[allow(clippy::redundant_closure_call)]
            record_simple($op, self, None, ($val)(x), ($partial)(x), 0.0, 0.0)
        }
    };
}

impl Var {
    unary!(exp, SimpleOp::Exp, |x: f64| x.exp(), |x: f64| x.exp());
    unary!(ln, SimpleOp::Ln, |x: f64| x.ln(), |x: f64| 1.0 / x);
    unary!(sin, SimpleOp::Sin, |x: f64| x.sin(), |x: f64| x.cos());
    unary!(cos, SimpleOp::Cos, |x: f64| x.cos(), |x: f64| -x.sin());
    unary!(sqrt, SimpleOp::Sqrt, |x: f64| x.sqrt(), |x: f64| 0.5 / x.sqrt());
    unary!(tanh, SimpleOp::Tanh, |x: f64| x.tanh(), |x: f64| {
        let t = x.tanh();
        1.0 - t * t
    });
    unary!(softplus, SimpleOp::Softplus, softplus_f64, sigmoid_f64);

    pub fn abs(self) -> Var {
        let x = self.val;
        // d|x|/dx at 0 := 0
        let p = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        record_simple(SimpleOp::Abs, self, None, x.abs(), p, 0.0, 0.0)
    }

    pub fn relu(self) -> Var {
        let x = self.val;
        let p = if x > 0.0 { 1.0 } else { 0.0 };
        record_simple(SimpleOp::Relu, self, None, x.max(0.0), p, 0.0, 0.0)
    }

    pub fn powf(self, k: f64) -> Var {
        let x = self.val;
        record_simple(SimpleOp::PowC, self, None, x.powf(k), k * x.powf(k - 1.0), 0.0, k)
    }

    pub fn pow(self, other: Var) -> Var {
        let (a, b) = (self.val, other.val);
        let v = a.powf(b);
        record_simple(SimpleOp::Pow, self, Some(other), v, b * a.powf(b - 1.0), v * a.ln(), 0.0)
    }

    /// Ties route the gradient to the first argument.
    pub fn min(self, other: Var) -> Var {
        let take_b = other.val < self.val;
        let v = if take_b { other.val } else { self.val };
        let (pa, pb) = if take_b { (0.0, 1.0) } else { (1.0, 0.0) };
        record_simple(SimpleOp::Min, self, Some(other), v, pa, pb, 0.0)
    }

    /// Ties route the gradient to the first argument.
    pub fn max(self, other: Var) -> Var {
        let take_b = other.val > self.val;
        let v = if take_b { other.val } else { self.val };
        let (pa, pb) = if take_b { (0.0, 1.0) } else { (1.0, 0.0) };
        record_simple(SimpleOp::Max, self, Some(other), v, pa, pb, 0.0)
    }

    pub fn min_c(self, c: f64) -> Var {
        let x = self.val;
        let (v, p) = if c < x { (c, 0.0) } else { (x, 1.0) };
        record_simple(SimpleOp::MinC, self, None, v, p, 0.0, c)
    }

    pub fn max_c(self, c: f64) -> Var {
        let x = self.val;
        let (v, p) = if c > x { (c, 0.0) } else { (x, 1.0) };
        record_simple(SimpleOp::MaxC, self, None, v, p, 0.0, c)
    }

    /// Closed-interval clamp: gradient 1 on `[lo, hi]`, 0 outside.
    pub fn clamp(self, lo: f64, hi: f64) -> Var {
        self.max_c(lo).min_c(hi)
    }

    pub fn recip(self) -> Var {
        let x = self.val;
        record_simple(SimpleOp::CDiv, self, None, 1.0 / x, -1.0 / (x * x), 0.0, 1.0)
    }
}

impl Add for Var {
    type Output = Var;
    fn add(self, rhs: Var) -> Var {
        record_simple(SimpleOp::Add, self, Some(rhs), self.val + rhs.val, 1.0, 1.0, 0.0)
    }
}

impl Sub for Var {
    type Output = Var;
    fn sub(self, rhs: Var) -> Var {
        record_simple(SimpleOp::Sub, self, Some(rhs), self.val - rhs.val, 1.0, -1.0, 0.0)
    }
}

impl Mul for Var {
    type Output = Var;
    fn mul(self, rhs: Var) -> Var {
        record_simple(SimpleOp::Mul, self, Some(rhs), self.val * rhs.val, rhs.val, self.val, 0.0)
    }
}

impl Div for Var {
    type Output = Var;
    fn div(self, rhs: Var) -> Var {
        let (a, b) = (self.val, rhs.val);
        record_simple(SimpleOp::Div, self, Some(rhs), a / b, 1.0 / b, -a / (b * b), 0.0)
    }
}

impl Neg for Var {
    type Output = Var;
    fn neg(self) -> Var {
        record_simple(SimpleOp::Neg, self, None, -self.val, -1.0, 0.0, 0.0)
    }
}

impl Add<f64> for Var {
    type Output = Var;
    fn add(self, c: f64) -> Var {
        record_simple(SimpleOp::AddC, self, None, self.val + c, 1.0, 0.0, c)
    }
}

impl Sub<f64> for Var {
    type Output = Var;
    fn sub(self, c: f64) -> Var {
        record_simple(SimpleOp::AddC, self, None, self.val + (-c), 1.0, 0.0, -c)
    }
}

impl Mul<f64> for Var {
    type Output = Var;
    fn mul(self, c: f64) -> Var {
        record_simple(SimpleOp::MulC, self, None, self.val * c, c, 0.0, c)
    }
}

impl Div<f64> for Var {
    type Output = Var;
    fn div(self, c: f64) -> Var {
        record_simple(SimpleOp::DivC, self, None, self.val / c, 1.0 / c, 0.0, c)
    }
}

impl Mul<Var> for f64 {
    type Output = Var;
    fn mul(self, v: Var) -> Var {
        v * self
    }
}

impl Add<Var> for f64 {
    type Output = Var;
    fn add(self, v: Var) -> Var {
        v + self
    }
}

impl Sub<Var> for f64 {
    type Output = Var;
    fn sub(self, v: Var) -> Var {
        record_simple(SimpleOp::Neg, v, None, -v.val, -1.0, 0.0, 0.0) + self
    }
}

impl Div<Var> for f64 {
    type Output = Var;
    fn div(self, v: Var) -> Var {
        let x = v.val;
        record_simple(SimpleOp::CDiv, v, None, self / x, -self / (x * x), 0.0, self)
    }
}

fn record_fused(op: FusedOp, ids: &[u32], partials: &[f64], value: f64, epoch: u64) -> Var {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        assert_eq!(epoch, t.epoch, "Var used outside its tape epoch");
        let inputs = t.push_ids(ids);
        let ps = t.push_partials(partials);
        let id = t.push(Node::Fused { op, inputs, partials: ps }, value);
        Var { id, epoch: t.epoch, val: value }
    })
}

/// Fused 3-vector dot product (single tape node).
pub fn dot3(a: [Var; 3], b: [Var; 3]) -> Var {
    let value = a[0].val * b[0].val + a[1].val * b[1].val + a[2].val * b[2].val;
    let ids = [a[0].id, a[1].id, a[2].id, b[0].id, b[1].id, b[2].id];
    let partials = [b[0].val, b[1].val, b[2].val, a[0].val, a[1].val, a[2].val];
    record_fused(FusedOp::Dot3, &ids, &partials, value, a[0].epoch)
}

/// Fused Euclidean norm of a 3-vector.
pub fn norm3(a: [Var; 3]) -> Var {
    let n = (a[0].val * a[0].val + a[1].val * a[1].val + a[2].val * a[2].val).sqrt();
    let ids = [a[0].id, a[1].id, a[2].id];
    let partials = [a[0].val / n, a[1].val / n, a[2].val / n];
    record_fused(FusedOp::Norm3, &ids, &partials, n, a[0].epoch)
}

/// Fused normalization; three nodes, one per component, sharing the
/// analytic Jacobian (delta_ij - u_i u_j) / |a|.
pub fn normalize3(a: [Var; 3]) -> [Var; 3] {
    let n = (a[0].val * a[0].val + a[1].val * a[1].val + a[2].val * a[2].val).sqrt();
    let u = [a[0].val / n, a[1].val / n, a[2].val / n];
    let ids = [a[0].id, a[1].id, a[2].id];
    let mut out = [a[0]; 3];
    for i in 0..3 {
        let mut partials = [0.0; 3];
        for (j, p) in partials.iter_mut().enumerate() {
            let kron = if i == j { 1.0 } else { 0.0 };
            *p = (kron - u[i] * u[j]) / n;
        }
        out[i] = record_fused(FusedOp::Normalize(i as u8), &ids, &partials, u[i], a[0].epoch);
    }
    out
}

/// Fused cross product; three nodes of four operands each.
pub fn cross3(a: [Var; 3], b: [Var; 3]) -> [Var; 3] {
    let mut out = [a[0]; 3];
    for i in 0..3 {
        let j = (i + 1) % 3;
        let k = (i + 2) % 3;
        // component i = a_j * b_k - a_k * b_j
        let value = a[j].val * b[k].val - a[k].val * b[j].val;
        let ids = [a[j].id, a[k].id, b[j].id, b[k].id];
        let partials = [b[k].val, -b[j].val, -a[k].val, a[j].val];
        out[i] = record_fused(FusedOp::Cross(i as u8), &ids, &partials, value, a[0].epoch);
    }
    out
}

/// Fused affine map of a parameter matrix over taped inputs: one tape node
/// per output row. `w_off` indexes the row-major `rows x cols` block inside
/// the group; `bias_off`, when given, indexes `rows` bias entries.
pub fn matvec(
    store: &ParameterStore,
    group: super::GroupId,
    w_off: usize,
    rows: usize,
    cols: usize,
    bias_off: Option<usize>,
    x: &[Var],
) -> Vec<Var> {
    assert_eq!(x.len(), cols, "matvec input length mismatch");
    let w = store.values(group);
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        for v in x {
            assert_eq!(v.epoch, t.epoch, "Var used outside its tape epoch");
        }
        let ids: Vec<u32> = x.iter().map(|v| v.id).collect();
        let inputs = t.push_ids(&ids);
        let mut out = Vec::with_capacity(rows);
        for r in 0..rows {
            let off = w_off + r * cols;
            let mut acc = bias_off.map_or(0.0, |b| w[b + r]);
            for (k, v) in x.iter().enumerate() {
                acc += w[off + k] * v.val;
            }
            let id = t.push(
                Node::ParamDot {
                    group: group.raw(),
                    w_off: off as u32,
                    bias: bias_off.map_or(NONE, |b| (b + r) as u32),
                    inputs,
                },
                acc,
            );
            out.push(Var { id, epoch: t.epoch, val: acc });
        }
        out
    })
}

/// Reverse sweep from the scalar `loss`, accumulating parameter gradients
/// additively into `grads`. May be called repeatedly on the same tape
/// (gradients add up).
pub fn backward_into(loss: Var, store: &ParameterStore, grads: &mut GradBuffer) {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        assert_eq!(loss.epoch, t.epoch, "backward on a stale Var");
        let n = t.nodes.len();
        let t = &mut *t;
        t.adjoint.clear();
        t.adjoint.resize(n, 0.0);
        t.adjoint[loss.id as usize] = 1.0;
        for i in (0..n).rev() {
            let g = t.adjoint[i];
            if g == 0.0 {
                continue;
            }
            match t.nodes[i] {
                Node::Leaf | Node::Const => {}
                Node::Param { group, idx } => {
                    grads.accumulate(group as usize, idx as usize, g);
                }
                Node::Simple { a, b, pa, pb, .. } => {
                    t.adjoint[a as usize] += pa * g;
                    if b != NONE {
                        t.adjoint[b as usize] += pb * g;
                    }
                }
                Node::Fused { inputs, partials, .. } => {
                    let (is, il) = (inputs.0 as usize, inputs.1 as usize);
                    let ps = partials.0 as usize;
                    for k in 0..il {
                        let id = t.arena_ids[is + k] as usize;
                        t.adjoint[id] += t.arena_partials[ps + k] * g;
                    }
                }
                Node::ParamDot { group, w_off, bias, inputs } => {
                    let w = store.group_values(super::tape::GroupIdx(group));
                    let (is, il) = (inputs.0 as usize, inputs.1 as usize);
                    for k in 0..il {
                        let id = t.arena_ids[is + k] as usize;
                        let x = t.values[id];
                        t.adjoint[id] += w[w_off as usize + k] * g;
                        grads.accumulate(group as usize, w_off as usize + k, x * g);
                    }
                    if bias != NONE {
                        grads.accumulate(group as usize, bias as usize, g);
                    }
                }
            }
        }
    })
}

impl Real for Var {
    fn constant(c: f64) -> Self {
        constant(c)
    }
    fn value(self) -> f64 {
        self.val
    }
    fn exp(self) -> Self {
        Var::exp(self)
    }
    fn ln(self) -> Self {
        Var::ln(self)
    }
    fn sqrt(self) -> Self {
        Var::sqrt(self)
    }
    fn abs(self) -> Self {
        Var::abs(self)
    }
    fn sin(self) -> Self {
        Var::sin(self)
    }
    fn cos(self) -> Self {
        Var::cos(self)
    }
    fn tanh(self) -> Self {
        Var::tanh(self)
    }
    fn relu(self) -> Self {
        Var::relu(self)
    }
    fn softplus(self) -> Self {
        Var::softplus(self)
    }
    fn powf(self, k: f64) -> Self {
        Var::powf(self, k)
    }
    fn pow(self, other: Self) -> Self {
        Var::pow(self, other)
    }
    fn min(self, other: Self) -> Self {
        Var::min(self, other)
    }
    fn max(self, other: Self) -> Self {
        Var::max(self, other)
    }
    fn clamp01(self) -> Self {
        Var::clamp(self, 0.0, 1.0)
    }
}
