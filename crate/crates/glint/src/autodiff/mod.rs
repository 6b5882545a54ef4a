//! Reverse-mode automatic differentiation on a per-thread Wengert tape.
//!
//! Scalars are recorded as [`Var`]s onto a thread-local arena tape; a forward
//! pass builds the tape, [`backward_into`] replays it in reverse and
//! accumulates gradients for every parameter leaf into a [`GradBuffer`].
//! Tapes are reset per forward pass ([`fresh_tape`]); parameters live outside
//! tapes in a [`ParameterStore`].
//!
//! Non-smooth points follow fixed subgradient conventions so runs are
//! deterministic and testable:
//! - `d|x|/dx` at 0 is 0, as is `relu'(0)`
//! - `min`/`max` ties route the gradient to the first argument
//! - `clamp` uses the closed interval (gradient 1 at the edges)
//! - infinite local partials (`sqrt` at 0, division by 0) are capped at
//!   `PARTIAL_CAP` and counted in the tape guard; NaN partials become 0 and
//!   are likewise counted. Values themselves are never silently replaced:
//!   a non-finite forward value bumps `GuardCounters::nonfinite_values`.

mod gradcheck;
mod store;
mod tape;
mod var;

pub use gradcheck::{grad_check, GradCheckError, GradCheckReport};
pub use store::{GradBuffer, GroupId, ParameterStore};
pub use tape::{fresh_tape, guard_counters, node_count, replay_check, GuardCounters, PARTIAL_CAP};
pub use var::{backward_into, constant, cross3, dot3, leaf, matvec, norm3, normalize3, Var};
