//! Safe value bounds derived from a blueprint.
//!
//! For every pre-subgame trigger, the blueprint's follow and deviation
//! values are unrolled down the player's own infoset structure, splitting
//! the available slack equally among child infosets and actions, until
//! head infosets of the subgames are reached. The result is a ledger of
//! lower bounds on head-infoset follow values and upper bounds on
//! head-infoset deviation values; refinements honoring the ledger (plus
//! the in-subgame incentive constraints) keep every pre-subgame trigger
//! at most as exploitable as under the blueprint.

use crate::corrplan::Blueprint;
use crate::deviation::{best_deviation, follow_values, FollowValues, TriggerReport};
use crate::efg::{GameTree, InfosetId, Player};
use crate::error::{invalid, Result};
use crate::par::{map_items, Parallelism};
use crate::seq::{SequenceIndex, SeqId};
use crate::subgame::{SubgameDecomposition, PRE_SUBGAME};
use std::collections::HashMap;
use std::io::Write;

/// Blueprint follow values and one trigger report per non-empty sequence
/// of each player. Everything downstream (margins, ledger, refinement
/// constants) reads from here.
pub struct BlueprintAudit {
    pub follow: [FollowValues; 2],
    /// reports[p][s - 1] is the report for sequence s of player p.
    pub reports: [Vec<TriggerReport>; 2],
}

impl BlueprintAudit {
    pub fn report(&self, player: Player, trigger: SeqId) -> &TriggerReport {
        &self.reports[player.index()][trigger as usize - 1]
    }

    /// Blueprint exploitability of a trigger.
    pub fn delta_star(&self, player: Player, trigger: SeqId) -> f64 {
        self.report(player, trigger).exploitability
    }

    pub fn max_exploitability(&self) -> f64 {
        self.reports
            .iter()
            .flatten()
            .map(|r| r.exploitability)
            .fold(0.0_f64, f64::max)
    }
}

pub fn audit_blueprint(
    blueprint: &Blueprint,
    tree: &GameTree,
    index: &SequenceIndex,
    mode: Parallelism,
) -> BlueprintAudit {
    let follow = [
        follow_values(blueprint, tree, index, Player::P1),
        follow_values(blueprint, tree, index, Player::P2),
    ];
    let mut reports: [Vec<TriggerReport>; 2] = [Vec::new(), Vec::new()];
    for player in Player::BOTH {
        let triggers: Vec<SeqId> = (1..index.num_seqs(player) as SeqId).collect();
        reports[player.index()] = map_items(mode, triggers, |s| {
            best_deviation(blueprint, tree, index, &follow[player.index()], s)
                .expect("trigger in range")
        });
    }
    BlueprintAudit { follow, reports }
}

/// Targets (mu_lower, beta_upper) at a pre-subgame trigger.
///
/// When the blueprint is already unexploitable there (`delta* <= 0`) half
/// of the unused margin is released in each direction; otherwise both
/// targets pin the blueprint values so exploitability cannot grow.
pub fn margin_targets(
    audit: &BlueprintAudit,
    decomp: &SubgameDecomposition,
    player: Player,
    trigger: SeqId,
) -> Result<(f64, f64)> {
    if decomp.seq_label(player, trigger) != PRE_SUBGAME {
        return Err(invalid(format!(
            "trigger {trigger} of {player} lies inside a subgame; in-subgame \
             triggers are handled by their own incentive constraints"
        )));
    }
    let report = audit.report(player, trigger);
    let delta = report.exploitability;
    if delta > 0.0 {
        Ok((report.follow_value, report.best_deviation_value))
    } else {
        Ok((
            report.follow_value + delta / 2.0,
            report.best_deviation_value - delta / 2.0,
        ))
    }
}

/// One lower-bound entry: `v(plan, infoset) >= bound` for a head infoset.
#[derive(Debug, Clone, Copy)]
pub struct LowerBound {
    pub player: Player,
    pub subgame: usize,
    pub infoset: InfosetId,
    pub bound: f64,
}

/// One upper-bound entry: the deviation value of the head infoset, for
/// continuations triggered by `trigger`, must stay at or below `bound`.
#[derive(Debug, Clone, Copy)]
pub struct UpperBound {
    pub player: Player,
    pub subgame: usize,
    pub infoset: InfosetId,
    pub trigger: SeqId,
    pub bound: f64,
}

#[derive(Debug, Default)]
pub struct BoundsLedger {
    pub lower: Vec<LowerBound>,
    pub upper: Vec<UpperBound>,
}

impl BoundsLedger {
    pub fn lower_for(&self, player: Player, subgame: usize) -> impl Iterator<Item = &LowerBound> {
        self.lower
            .iter()
            .filter(move |b| b.player == player && b.subgame == subgame)
    }

    pub fn upper_for(&self, player: Player, subgame: usize) -> impl Iterator<Item = &UpperBound> {
        self.upper
            .iter()
            .filter(move |b| b.player == player && b.subgame == subgame)
    }
}

/// Candidate lower bounds on head-infoset values produced by one trigger.
pub fn propagate_lower(
    audit: &BlueprintAudit,
    tree: &GameTree,
    index: &SequenceIndex,
    decomp: &SubgameDecomposition,
    player: Player,
    trigger: SeqId,
) -> Result<Vec<(InfosetId, f64)>> {
    let (mu_target, _) = margin_targets(audit, decomp, player, trigger)?;
    let follow = &audit.follow[player.index()];
    let mut out = Vec::new();
    // (sequence, target lower bound on mu at that sequence)
    let mut stack: Vec<(SeqId, f64)> = vec![(trigger, mu_target)];
    while let Some((seq, target)) = stack.pop() {
        let children = index.child_infosets(player, seq);
        if children.is_empty() {
            continue;
        }
        let slack = (follow.mu[seq as usize] - target) / children.len() as f64;
        for &child in children {
            let v_bound = follow.v[child as usize] - slack;
            if decomp.infoset_label(player, child) != PRE_SUBGAME {
                // A child of a pre-subgame sequence inside a subgame is a
                // head infoset.
                out.push((child, v_bound));
            } else {
                let per_action = slack / tree.infoset(player, child).num_actions() as f64;
                for a in 0..tree.infoset(player, child).num_actions() {
                    let s = index.seq_of(player, child, a);
                    stack.push((s, follow.mu[s as usize] - per_action));
                }
            }
        }
    }
    Ok(out)
}

/// Upper-bound entries on head-infoset deviation values produced by one
/// trigger, one per head infoset reachable under some deviation from it.
pub fn propagate_upper(
    audit: &BlueprintAudit,
    tree: &GameTree,
    index: &SequenceIndex,
    decomp: &SubgameDecomposition,
    player: Player,
    trigger: SeqId,
) -> Result<Vec<(InfosetId, f64)>> {
    let (_, beta_target) = margin_targets(audit, decomp, player, trigger)?;
    let report = audit.report(player, trigger);
    let def = index.seq_def(player, trigger).unwrap();
    let mut out = Vec::new();
    let mut stack: Vec<(SeqId, f64)> = Vec::new();
    for a in 0..tree.infoset(player, def.infoset).num_actions() {
        if a != def.action {
            stack.push((index.seq_of(player, def.infoset, a), beta_target));
        }
    }
    while let Some((seq, target)) = stack.pop() {
        let children = index.child_infosets(player, seq);
        if children.is_empty() {
            continue;
        }
        let beta0 = report.seq_values[&seq];
        let slack = (target - beta0) / children.len() as f64;
        for &child in children {
            let nu_bound = report.infoset_values[&child] + slack;
            if decomp.infoset_label(player, child) != PRE_SUBGAME {
                out.push((child, nu_bound));
            } else {
                // Child sequences inherit the infoset bound directly.
                for a in 0..tree.infoset(player, child).num_actions() {
                    stack.push((index.seq_of(player, child, a), nu_bound));
                }
            }
        }
    }
    Ok(out)
}

/// Builds the full ledger: lower bounds tightened (max) across triggers,
/// upper bounds kept per (head infoset, trigger).
pub fn build_ledger(
    audit: &BlueprintAudit,
    tree: &GameTree,
    index: &SequenceIndex,
    decomp: &SubgameDecomposition,
) -> Result<BoundsLedger> {
    let mut lower_best: HashMap<(Player, InfosetId), f64> = HashMap::new();
    let mut upper = Vec::new();
    for player in Player::BOTH {
        for trigger in decomp.pre_subgame_seqs(player) {
            for (infoset, bound) in propagate_lower(audit, tree, index, decomp, player, trigger)? {
                lower_best
                    .entry((player, infoset))
                    .and_modify(|b| *b = b.max(bound))
                    .or_insert(bound);
            }
            for (infoset, bound) in propagate_upper(audit, tree, index, decomp, player, trigger)? {
                debug_assert!(
                    !upper.iter().any(|u: &UpperBound| u.player == player
                        && u.infoset == infoset
                        && u.trigger == trigger),
                    "duplicate upper entry"
                );
                upper.push(UpperBound {
                    player,
                    subgame: decomp.infoset_label(player, infoset) as usize,
                    infoset,
                    trigger,
                    bound,
                });
            }
        }
    }
    let mut lower: Vec<LowerBound> = lower_best
        .into_iter()
        .map(|((player, infoset), bound)| LowerBound {
            player,
            subgame: decomp.infoset_label(player, infoset) as usize,
            infoset,
            bound,
        })
        .collect();
    lower.sort_by_key(|b| (b.player.index(), b.subgame, b.infoset));
    upper.sort_by_key(|b| (b.player.index(), b.subgame, b.infoset, b.trigger));

    let ledger = BoundsLedger { lower, upper };
    validate_blueprint_feasibility(audit, &ledger, 1e-9)?;
    Ok(ledger)
}

/// The blueprint must satisfy its own ledger (with zero slack consumed
/// when its exploitability is zero).
pub fn validate_blueprint_feasibility(
    audit: &BlueprintAudit,
    ledger: &BoundsLedger,
    tol: f64,
) -> Result<()> {
    for lb in &ledger.lower {
        let v0 = audit.follow[lb.player.index()].v[lb.infoset as usize];
        if v0 < lb.bound - tol {
            return Err(invalid(format!(
                "blueprint violates its own lower bound at infoset {} of {}: {v0} < {}",
                lb.infoset, lb.player, lb.bound
            )));
        }
    }
    for ub in &ledger.upper {
        let nu0 = audit.report(ub.player, ub.trigger).infoset_values[&ub.infoset];
        if nu0 > ub.bound + tol {
            return Err(invalid(format!(
                "blueprint violates its own upper bound at infoset {} of {} (trigger {}): {nu0} > {}",
                ub.infoset, ub.player, ub.trigger, ub.bound
            )));
        }
    }
    Ok(())
}

/// Debug dump: `player,subgame,infoset,kind,trigger,bound`.
pub fn write_ledger_csv<W: Write>(ledger: &BoundsLedger, mut w: W) -> Result<()> {
    writeln!(w, "player,subgame,infoset,kind,trigger,bound")?;
    for b in &ledger.lower {
        writeln!(
            w,
            "{},{},{},lower,,{:.15e}",
            b.player.one_based(),
            b.subgame,
            b.infoset,
            b.bound
        )?;
    }
    for b in &ledger.upper {
        writeln!(
            w,
            "{},{},{},upper,{},{:.15e}",
            b.player.one_based(),
            b.subgame,
            b.infoset,
            b.trigger,
            b.bound
        )?;
    }
    Ok(())
}
