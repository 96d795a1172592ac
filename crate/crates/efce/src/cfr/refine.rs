// placeholder implementation replaced once the mediator/deviator land
use crate::error::{Error, Result};
use crate::resolve::{RefinementResult, ResolveContext};

pub fn self_play_refine(
    _ctx: &ResolveContext,
    _j: usize,
    _epsilon: f64,
    _max_iters: usize,
    _check_every: usize,
) -> Result<RefinementResult> {
    Err(Error::Solve("regret backend not built yet".into()))
}
