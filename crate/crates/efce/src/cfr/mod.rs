//! Regret-minimization refinement backend.

pub use self::refine::self_play_refine;

pub mod rm;
pub mod scaled;
pub mod mediator;
pub mod deviator;
pub mod refine;
