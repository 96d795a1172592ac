//! Subgame refinement drivers and safety audits.
//!
//! A refinement replaces the blueprint inside one subgame while keeping
//! every pre-subgame entry fixed. The safety audit measures, exactly and
//! independently of any solver state, the largest violated constraint of
//! a candidate: in-subgame exploitability against its blueprint level,
//! head-infoset deviation values against the ledger's upper bounds, and
//! head-infoset follow values against the lower bounds.

use crate::bounds::{BlueprintAudit, BoundsLedger};
use crate::corrplan::{Blueprint, Connectivity, CorrelationPlan, RelevantPairSet};
use crate::deviation::{best_deviation, infoset_deviation_value, FollowValues, PairValue};
use crate::efg::{GameTree, Player};
use crate::error::{Error, Result};
use crate::lp::{self, LpObjective, LpStatus};
use crate::par::{map_items, Parallelism};
use crate::seq::{SequenceIndex, SeqId};
use crate::subgame::{restricted_pairs, SubgameDecomposition};
use std::sync::Arc;
use std::time::{Duration, Instant};

/// Safe mode finds any plan meeting the safety constraints; fully safe
/// mode additionally maximizes the subgame's social welfare.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefineMode {
    Safe,
    FullySafe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RefineBackend {
    Lp {
        mode: RefineMode,
    },
    /// Regret-minimization self-play, stopping at the target violation.
    Cfr {
        epsilon: f64,
        max_iters: usize,
        check_every: usize,
    },
}

pub struct RefinementResult {
    pub subgame: usize,
    /// Plan over the subgame's restricted pair set.
    pub plan: CorrelationPlan,
    pub subgame_social_welfare: f64,
    pub blueprint_subgame_social_welfare: f64,
    /// Exact audited violation of the safety constraint system.
    pub max_violation: f64,
    pub structural_residual: f64,
    pub iterations: usize,
    pub wall_time: Duration,
    pub converged: bool,
}

/// Follow values over one subgame's sequences of `player`, read from a
/// plan on the restricted pair set. Entries outside the subgame are left
/// at zero and must not be read.
pub fn subgame_follow_values(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    decomp: &SubgameDecomposition,
    j: usize,
    player: Player,
) -> FollowValues {
    let n = index.num_seqs(player);
    let mut mu = vec![0.0; n];
    let seqs = decomp.subgame_seqs(player, j);
    for &s in seqs.iter().rev() {
        let mut acc = 0.0;
        for &(leaf, other) in index.leaves_at(player, s) {
            let u = tree.leaf_payoffs(leaf)[player.index()];
            let (s1, s2) = crate::deviation::pair_for(player, s, other);
            acc += u * view.xi(s1, s2);
        }
        for &child in index.child_infosets(player, s) {
            for a in 0..tree.infoset(player, child).num_actions() {
                acc += mu[index.seq_of(player, child, a) as usize];
            }
        }
        mu[s as usize] = acc;
    }
    let v = (0..tree.infosets(player).len())
        .map(|i| {
            (0..tree.infoset(player, i as u32).num_actions())
                .map(|a| mu[index.seq_of(player, i as u32, a) as usize])
                .sum()
        })
        .collect();
    FollowValues { player, mu, v }
}

/// Largest violated safety constraint of a candidate subgame plan,
/// computed by direct evaluation (never through solver internals).
pub fn max_violation(
    plan: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    decomp: &SubgameDecomposition,
    j: usize,
    audit: &BlueprintAudit,
    ledger: &BoundsLedger,
) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    for player in Player::BOTH {
        let follow = subgame_follow_values(plan, tree, index, decomp, j, player);
        // (A) in-subgame triggers.
        for trigger in decomp.subgame_seqs(player, j) {
            let def = index.seq_def(player, trigger).unwrap();
            if tree.infoset(player, def.infoset).num_actions() < 2 {
                continue;
            }
            let rep = best_deviation(plan, tree, index, &follow, trigger)?;
            worst = worst.max(rep.exploitability - audit.delta_star(player, trigger));
        }
        // (B) lower bounds.
        for lb in ledger.lower_for(player, j) {
            worst = worst.max(lb.bound - follow.v[lb.infoset as usize]);
        }
        // (C) upper bounds.
        for ub in ledger.upper_for(player, j) {
            let nu = infoset_deviation_value(plan, tree, index, player, ub.trigger, ub.infoset);
            worst = worst.max(nu - ub.bound);
        }
    }
    if worst == f64::NEG_INFINITY {
        worst = 0.0;
    }
    Ok(worst)
}

/// Everything a refinement backend needs, bundled once per game.
pub struct ResolveContext<'a> {
    pub tree: &'a GameTree,
    pub index: &'a SequenceIndex,
    pub conn: &'a Connectivity,
    pub decomp: &'a SubgameDecomposition,
    pub blueprint: &'a Blueprint,
    pub audit: &'a BlueprintAudit,
    pub ledger: &'a BoundsLedger,
}

impl<'a> ResolveContext<'a> {
    pub fn restricted(&self, j: usize) -> Arc<RelevantPairSet> {
        restricted_pairs(self.tree, self.index, self.conn, self.decomp, j)
    }

    /// The blueprint restricted to one subgame's pair set.
    pub fn blueprint_restriction(&self, j: usize) -> CorrelationPlan {
        self.blueprint.materialize(&self.restricted(j))
    }
}

/// LP-backed refinement of one subgame.
pub fn refine_subgame_lp(
    ctx: &ResolveContext,
    j: usize,
    mode: RefineMode,
) -> Result<RefinementResult> {
    let start = Instant::now();
    let pairs_j = ctx.restricted(j);
    let objective = match mode {
        RefineMode::Safe => LpObjective::Feasibility,
        RefineMode::FullySafe => LpObjective::MaxSocialWelfare,
    };
    let asm = lp::assemble::build_refinement_lp(
        ctx.tree,
        ctx.index,
        &pairs_j,
        ctx.decomp,
        j,
        ctx.blueprint,
        ctx.audit,
        ctx.ledger,
        objective,
    )?;
    let sol = lp::solve(&asm.lp)?;
    match sol.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            // The blueprint restriction always satisfies the constraint
            // system, so infeasibility can only mean a solver defect.
            return Err(Error::Solve(format!(
                "refinement LP for subgame {j} reported infeasible; \
                 the blueprint restriction is a feasible point"
            )));
        }
        other => {
            return Err(Error::Solve(format!(
                "refinement LP for subgame {j} did not reach optimality: {other:?}"
            )));
        }
    }
    let plan = asm.extract_plan(&sol.values);
    finish_result(ctx, j, plan, sol.iterations, true, start)
}

pub(crate) fn finish_result(
    ctx: &ResolveContext,
    j: usize,
    plan: CorrelationPlan,
    iterations: usize,
    converged: bool,
    start: Instant,
) -> Result<RefinementResult> {
    let violation =
        max_violation(&plan, ctx.tree, ctx.index, ctx.decomp, j, ctx.audit, ctx.ledger)?;
    let structural = plan.structural_residual(ctx.tree, ctx.index)?;
    let sw =
        crate::deviation::social_welfare_in_class(&plan, ctx.tree, ctx.index, ctx.decomp, j as u16);
    let bp_sw = crate::deviation::social_welfare_in_class(
        ctx.blueprint,
        ctx.tree,
        ctx.index,
        ctx.decomp,
        j as u16,
    );
    Ok(RefinementResult {
        subgame: j,
        plan,
        subgame_social_welfare: sw,
        blueprint_subgame_social_welfare: bp_sw,
        max_violation: violation,
        structural_residual: structural,
        iterations,
        wall_time: start.elapsed(),
        converged,
    })
}

/// Refines one subgame with the chosen backend.
pub fn refine_subgame(
    ctx: &ResolveContext,
    j: usize,
    backend: RefineBackend,
) -> Result<RefinementResult> {
    match backend {
        RefineBackend::Lp { mode } => refine_subgame_lp(ctx, j, mode),
        RefineBackend::Cfr {
            epsilon,
            max_iters,
            check_every,
        } => crate::cfr::self_play_refine(ctx, j, epsilon, max_iters, check_every),
    }
}

/// Refines every subgame (concurrently under rayon) and returns results
/// ordered by subgame index.
pub fn refine_all(
    ctx: &ResolveContext,
    backend: RefineBackend,
    mode: Parallelism,
) -> Result<Vec<RefinementResult>> {
    let js: Vec<usize> = (1..=ctx.decomp.num_subgames()).collect();
    let results = map_items(mode, js, |j| refine_subgame(ctx, j, backend));
    results.into_iter().collect()
}

/// Stitches per-subgame refinements and the blueprint into a plan over
/// the full pair set.
pub fn assemble_complete_refinement(
    ctx: &ResolveContext,
    full_pairs: &Arc<RelevantPairSet>,
    refinements: &[RefinementResult],
) -> Result<CorrelationPlan> {
    let mut by_subgame: Vec<Option<&RefinementResult>> = vec![None; ctx.decomp.num_subgames() + 1];
    for r in refinements {
        by_subgame[r.subgame] = Some(r);
    }
    let mut values = Vec::with_capacity(full_pairs.len());
    for &(s1, s2) in full_pairs.pairs() {
        let label = ctx.decomp.pair_label(s1, s2)? as usize;
        if label == 0 {
            values.push(ctx.blueprint.eval(s1, s2));
        } else {
            let r = by_subgame[label].ok_or_else(|| {
                Error::InvalidInput(format!(
                    "complete refinement needs subgame {label}, which was not refined"
                ))
            })?;
            values.push(r.plan.value(s1, s2));
        }
    }
    Ok(CorrelationPlan::new(Arc::clone(full_pairs), values))
}

/// Safety audit of a complete refinement against the blueprint.
pub struct SafetyReport {
    /// max over triggers of (refined exploitability - max(0, blueprint's)).
    pub worst_gap: f64,
    pub social_welfare: f64,
    pub blueprint_social_welfare: f64,
    pub safe: bool,
}

pub fn audit_complete_refinement(
    ctx: &ResolveContext,
    complete: &CorrelationPlan,
    tol: f64,
    mode: Parallelism,
) -> Result<SafetyReport> {
    let follow = [
        crate::deviation::follow_values(complete, ctx.tree, ctx.index, Player::P1),
        crate::deviation::follow_values(complete, ctx.tree, ctx.index, Player::P2),
    ];
    let triggers: Vec<(Player, SeqId)> = Player::BOTH
        .into_iter()
        .flat_map(|p| (1..ctx.index.num_seqs(p) as SeqId).map(move |s| (p, s)))
        .collect();
    let gaps = map_items(mode, triggers, |(p, s)| {
        let rep = best_deviation(complete, ctx.tree, ctx.index, &follow[p.index()], s)
            .expect("trigger in range");
        rep.exploitability - ctx.audit.delta_star(p, s).max(0.0)
    });
    let worst_gap = gaps.into_iter().fold(f64::NEG_INFINITY, f64::max);
    let social_welfare = crate::deviation::social_welfare(complete, ctx.tree, ctx.index);
    let blueprint_social_welfare =
        crate::deviation::social_welfare(ctx.blueprint, ctx.tree, ctx.index);
    Ok(SafetyReport {
        worst_gap,
        social_welfare,
        blueprint_social_welfare,
        safe: worst_gap <= tol,
    })
}


#[cfg(test)]
mod tests {
    use super::fixtures::Fixture;
    use super::*;
    use crate::corrplan::BlueprintSpec;

    /// Table row (3, 2): the uniform blueprint is already optimal in the
    /// subgame, at -3.70e-2 for gamma = 2.
    #[test]
    fn battleship_3_2_refinement_matches_blueprint() {
        let fx = Fixture::battleship(3, 2, 2.0, BlueprintSpec::Uniform);
        let ctx = fx.ctx();
        let r = refine_subgame_lp(&ctx, 1, RefineMode::FullySafe).unwrap();
        assert!((r.blueprint_subgame_social_welfare - (-1.0 / 27.0)).abs() < 5e-4);
        assert!(
            (r.subgame_social_welfare - r.blueprint_subgame_social_welfare).abs() < 1e-6,
            "refined {} vs bp {}",
            r.subgame_social_welfare,
            r.blueprint_subgame_social_welfare
        );
        assert!(r.max_violation <= 1e-7, "violation {}", r.max_violation);
        assert!(r.structural_residual <= 1e-7);
    }

    /// The blueprint restriction itself audits as violation-free.
    #[test]
    fn blueprint_restriction_has_no_violation() {
        let fx = Fixture::battleship(3, 2, 5.0, BlueprintSpec::Jittered { width: 0.5, seed: 9 });
        let ctx = fx.ctx();
        for j in 1..=fx.decomp.num_subgames() {
            let bp_plan = ctx.blueprint_restriction(j);
            let v = max_violation(
                &bp_plan, &fx.tree, &fx.index, &fx.decomp, j, &fx.audit, &fx.ledger,
            )
            .unwrap();
            assert!(v <= 1e-9, "subgame {j}: violation {v}");
        }
    }
}

#[cfg(test)]
mod table_probe {
    use super::fixtures::Fixture;
    use super::*;
    use crate::corrplan::BlueprintSpec;

    #[test]
    #[ignore]
    fn probe_4_3() {
        for gamma in [2.0, 5.0] {
            let fx = Fixture::battleship(4, 3, gamma, BlueprintSpec::Uniform);
            let ctx = fx.ctx();
            let t0 = std::time::Instant::now();
            let r = refine_subgame_lp(&ctx, 1, RefineMode::FullySafe).unwrap();
            println!(
                "gamma={gamma}: bp={:.4e} refined={:.4e} viol={:.2e} res={:.2e} iters={} time={:?}",
                r.blueprint_subgame_social_welfare,
                r.subgame_social_welfare,
                r.max_violation,
                r.structural_residual,
                r.iterations,
                t0.elapsed()
            );
        }
    }
}
