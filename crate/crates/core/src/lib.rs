//! Passive non-line-of-sight imaging with a vertical edge occluder.
//!
//! The crate renders synthetic penumbra photographs of a floor next to a wall
//! edge, computes Cramér–Rao bounds for localizing hidden point targets with
//! and without the edge, and reconstructs plan-view (range × angle) estimates
//! of the hidden scene with two inversion algorithms:
//!
//! * a linear polar-pixel model solved with ℓ1-regularized FISTA
//!   ([`solvers::fista_l1`], [`solvers::sparse_group_lasso`]);
//! * an alternating scheme that counts targets from an angular profile and
//!   then alternates range and profile updates ([`solvers::alternate`],
//!   [`solvers::alternate_rgb`]).
//!
//! Geometry conventions: the corner sits at the origin and the wall runs along
//! the positive x axis. A floor point `(r, θ)` lives at `r·(cos θ, sin θ)` with
//! `θ` measured from the wall; a hidden point `(ρ, α)` lives at
//! `−ρ·(cos α, sin α)`, so light from hidden angle `α` reaches floor angles
//! `θ ≥ α` only.
//!
//! Pixel-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default) and fall back to plain iterators otherwise.

pub mod crb;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod montecarlo;
mod par;
pub mod quadrature;
pub mod simulate;
pub mod solvers;
pub mod wavelet;

pub use error::{Error, Result};
pub use forward::{AngularGrid, ForwardOperator, Target, TargetSupport};
pub use geometry::{FloorGrid, FloorPoint, HiddenPoint};
pub use simulate::{HiddenScene, NoiseSpec, PointEmitter, WedgeTarget};
