use std::cell::RefCell;

/// Cap applied to infinite local partials (e.g. `sqrt` at 0).
pub const PARTIAL_CAP: f64 = 1e12;

pub(crate) const NONE: u32 = u32::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum SimpleOp {
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sin,
    Cos,
    Tanh,
    Relu,
    Softplus,
    Pow,
    Min,
    Max,
    AddC,
    MulC,
    DivC,
    CDiv,
    PowC,
    MinC,
    MaxC,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum FusedOp {
    Dot3,
    Norm3,
    /// Component `0..3` of normalize(v).
    Normalize(u8),
    /// Component `0..3` of cross(a, b); inputs are the four operands involved.
    Cross(u8),
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum Node {
    /// Free input; gradient is discarded.
    Leaf,
    Const,
    /// Leaf bound to `ParameterStore` slot (group, index).
    Param { group: u32, idx: u32 },
    Simple {
        op: SimpleOp,
        a: u32,
        b: u32,
        pa: f64,
        pb: f64,
        /// Constant operand for the `*C` variants; unused otherwise.
        aux: f64,
    },
    Fused {
        op: FusedOp,
        /// (start, len) into the id arena.
        inputs: (u32, u32),
        /// (start, len) into the partial arena; same length as `inputs`.
        partials: (u32, u32),
    },
    /// value = bias + dot(params[group][w_off..w_off+len(inputs)], inputs).
    /// Weight partials are read back from the store during backward.
    ParamDot {
        group: u32,
        w_off: u32,
        /// Index of the bias parameter in the group, or `NONE`.
        bias: u32,
        inputs: (u32, u32),
    },
}

/// Counters for numerically guarded events during recording.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GuardCounters {
    /// Forward values that came out non-finite.
    pub nonfinite_values: u64,
    /// Local partials that were capped (infinite) or zeroed (NaN).
    pub capped_partials: u64,
}

pub(crate) struct Tape {
    pub(crate) nodes: Vec<Node>,
    pub(crate) values: Vec<f64>,
    pub(crate) arena_ids: Vec<u32>,
    pub(crate) arena_partials: Vec<f64>,
    pub(crate) epoch: u64,
    pub(crate) guards: GuardCounters,
    /// Scratch adjoint buffer reused across backward calls.
    pub(crate) adjoint: Vec<f64>,
}

impl Tape {
    fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            values: Vec::new(),
            arena_ids: Vec::new(),
            arena_partials: Vec::new(),
            epoch: 0,
            guards: GuardCounters::default(),
            adjoint: Vec::new(),
        }
    }

    pub(crate) fn push(&mut self, node: Node, value: f64) -> u32 {
        if !value.is_finite() {
            self.guards.nonfinite_values += 1;
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.values.push(value);
        id
    }

    pub(crate) fn push_ids(&mut self, ids: &[u32]) -> (u32, u32) {
        let start = self.arena_ids.len() as u32;
        self.arena_ids.extend_from_slice(ids);
        (start, ids.len() as u32)
    }

    pub(crate) fn push_partials(&mut self, ps: &[f64]) -> (u32, u32) {
        let start = self.arena_partials.len() as u32;
        for &p in ps {
            let s = sanitize_partial(p, &mut self.guards);
            self.arena_partials.push(s);
        }
        (start, ps.len() as u32)
    }
}

/// Infinite partials are capped, NaN partials zeroed; both bump the guard.
pub(crate) fn sanitize_partial(p: f64, guards: &mut GuardCounters) -> f64 {
    if p.is_nan() {
        guards.capped_partials += 1;
        0.0
    } else if p.is_infinite() {
        guards.capped_partials += 1;
        p.signum() * PARTIAL_CAP
    } else {
        p
    }
}

thread_local! {
    pub(crate) static TAPE: RefCell<Tape> = RefCell::new(Tape::new());
}

/// Clear this thread's tape and start a new epoch. Vars from earlier epochs
/// become invalid (checked on use).
pub fn fresh_tape() -> u64 {
    TAPE.with(|t| {
        let mut t = t.borrow_mut();
        t.nodes.clear();
        t.values.clear();
        t.arena_ids.clear();
        t.arena_partials.clear();
        t.guards = GuardCounters::default();
        t.epoch += 1;
        t.epoch
    })
}

/// Guard counters of the current tape epoch.
pub fn guard_counters() -> GuardCounters {
    TAPE.with(|t| t.borrow().guards)
}

/// Number of nodes recorded on the current tape.
pub fn node_count() -> usize {
    TAPE.with(|t| t.borrow().nodes.len())
}

/// Recompute every node value from its recorded operation and inputs and
/// check bit-for-bit equality with the stored forward values.
pub fn replay_check(store: &super::ParameterStore) -> bool {
    TAPE.with(|t| {
        let t = t.borrow();
        for (i, node) in t.nodes.iter().enumerate() {
            let v = t.values[i];
            let recomputed = match *node {
                Node::Leaf | Node::Const => v,
                Node::Param { group, idx } => store.group_values(GroupIdx(group))[idx as usize],
                Node::Simple { op, a, b, aux, .. } => {
                    let x = t.values[a as usize];
                    let y = if b == NONE { 0.0 } else { t.values[b as usize] };
                    replay_simple(op, x, y, aux)
                }
                Node::Fused { op, inputs, .. } => {
                    let ids = &t.arena_ids[inputs.0 as usize..(inputs.0 + inputs.1) as usize];
                    let val = |k: usize| t.values[ids[k] as usize];
                    match op {
                        FusedOp::Dot3 => val(0) * val(3) + val(1) * val(4) + val(2) * val(5),
                        FusedOp::Norm3 => {
                            (val(0) * val(0) + val(1) * val(1) + val(2) * val(2)).sqrt()
                        }
                        FusedOp::Normalize(row) => {
                            let n =
                                (val(0) * val(0) + val(1) * val(1) + val(2) * val(2)).sqrt();
                            val(row as usize) / n
                        }
                        // inputs ordered [a_j, a_k, b_j, b_k] for component i=(j,k) cyclic
                        FusedOp::Cross(_) => val(0) * val(3) - val(1) * val(2),
                    }
                }
                Node::ParamDot { group, w_off, bias, inputs } => {
                    let w = store.group_values(GroupIdx(group));
                    let ids = &t.arena_ids[inputs.0 as usize..(inputs.0 + inputs.1) as usize];
                    let mut acc = if bias == NONE { 0.0 } else { w[bias as usize] };
                    for (k, &id) in ids.iter().enumerate() {
                        acc += w[w_off as usize + k] * t.values[id as usize];
                    }
                    acc
                }
            };
            if recomputed.to_bits() != v.to_bits() && !(recomputed.is_nan() && v.is_nan()) {
                return false;
            }
        }
        true
    })
}

fn replay_simple(op: SimpleOp, x: f64, y: f64, aux: f64) -> f64 {
    match op {
        SimpleOp::Add => x + y,
        SimpleOp::Sub => x - y,
        SimpleOp::Mul => x * y,
        SimpleOp::Div => x / y,
        SimpleOp::Neg => -x,
        SimpleOp::Exp => x.exp(),
        SimpleOp::Ln => x.ln(),
        SimpleOp::Sqrt => x.sqrt(),
        SimpleOp::Abs => x.abs(),
        SimpleOp::Sin => x.sin(),
        SimpleOp::Cos => x.cos(),
        SimpleOp::Tanh => x.tanh(),
        SimpleOp::Relu => x.max(0.0),
        SimpleOp::Softplus => crate::math::softplus_f64(x),
        SimpleOp::Pow => x.powf(y),
        SimpleOp::Min => {
            if y < x {
                y
            } else {
                x
            }
        }
        SimpleOp::Max => {
            if y > x {
                y
            } else {
                x
            }
        }
        SimpleOp::AddC => x + aux,
        SimpleOp::MulC => x * aux,
        SimpleOp::DivC => x / aux,
        SimpleOp::CDiv => aux / x,
        SimpleOp::PowC => x.powf(aux),
        SimpleOp::MinC => {
            if aux < x {
                aux
            } else {
                x
            }
        }
        SimpleOp::MaxC => {
            if aux > x {
                aux
            } else {
                x
            }
        }
    }
}

/// Internal newtype so replay can index groups without the public `GroupId`.
pub(crate) struct GroupIdx(pub u32);
