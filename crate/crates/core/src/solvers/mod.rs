//! Inversion algorithms.
//!
//! Every solver eliminates the ambient coefficients `c` exactly: for a fixed
//! profile `s` the best `c` is `A⁺(y − Ks)`, so the data term becomes
//! `½‖P⊥(y − Ks)‖²` with `P⊥` the projector onto the orthogonal complement of
//! `range(A)`. The remaining problems in `s` are solved with monotone FISTA.

mod ambient;
pub mod alternating;
mod fista;
pub mod linear;
pub mod prox;

pub use alternating::{
    alternate, alternate_rgb, count_targets, init_far_field, objective, range_objective_and_gradient, update_profile,
    update_ranges, AlternatingConfig, AlternatingContext, AlternatingState, ChannelEstimate, ChannelState,
    RangeUpdate, ReconstructionResult, ThresholdSpec,
};
pub use ambient::AmbientProjector;
pub use fista::{SolveOptions, SolveOutcome};
pub use linear::{default_lambda, fista_l1, sparse_group_lasso, GroupWeights, LinearProblem, LinearSolution};
