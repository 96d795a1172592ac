//! Exploitability oracle: follow values, best-deviating responses, and
//! EFCE membership tests for a fixed correlation plan.
//!
//! A trigger is a non-empty sequence (I, a!): the last recommendation a
//! player received before considering deviation. The deviation value of
//! a trigger weighs leaves by the unnormalized posterior `xi[trigger, .]`
//! and maximizes over continuation play; the follow value weighs leaves
//! by the plan mass of actually playing them. Their difference is the
//! exploitability of the trigger.

use crate::corrplan::{Blueprint, CorrelationPlan};
use crate::efg::{GameTree, InfosetId, Player};
use crate::error::{invalid, Result};
use crate::par::{map_items, Parallelism};
use crate::seq::{SequenceIndex, SeqId, EMPTY_SEQ};
use std::collections::HashMap;

/// Read access to correlation-plan entries. Implementations must cover
/// every pair the calling computation touches.
pub trait PairValue: Sync {
    fn xi(&self, s1: SeqId, s2: SeqId) -> f64;
}

impl PairValue for CorrelationPlan {
    fn xi(&self, s1: SeqId, s2: SeqId) -> f64 {
        self.value(s1, s2)
    }
}

impl PairValue for Blueprint {
    fn xi(&self, s1: SeqId, s2: SeqId) -> f64 {
        self.eval(s1, s2)
    }
}

/// Per-sequence follow values and per-infoset values for one player,
/// assuming every recommendation is followed.
#[derive(Debug, Clone)]
pub struct FollowValues {
    pub player: Player,
    /// mu[s]: expected utility accrued from leaves at or below sequence s.
    pub mu: Vec<f64>,
    /// v[i] = sum of mu over the infoset's action sequences.
    pub v: Vec<f64>,
}

/// Bottom-up evaluation of the follow-value recursion.
pub fn follow_values(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    player: Player,
) -> FollowValues {
    let n = index.num_seqs(player);
    let mut mu = vec![0.0; n];
    // Sequence ids are allocated parent-before-child; a reverse sweep is
    // bottom-up.
    for s in (0..n).rev() {
        let mut acc = 0.0;
        for &(leaf, other) in index.leaves_at(player, s as SeqId) {
            let u = tree.leaf_payoffs(leaf)[player.index()];
            let (s1, s2) = pair_for(player, s as SeqId, other);
            acc += u * view.xi(s1, s2);
        }
        for &child in index.child_infosets(player, s as SeqId) {
            for a in 0..tree.infoset(player, child).num_actions() {
                acc += mu[index.seq_of(player, child, a) as usize];
            }
        }
        mu[s] = acc;
    }
    let v = (0..tree.infosets(player).len())
        .map(|i| {
            (0..tree.infoset(player, i as InfosetId).num_actions())
                .map(|a| mu[index.seq_of(player, i as InfosetId, a) as usize])
                .sum()
        })
        .collect();
    FollowValues { player, mu, v }
}

#[inline]
pub(crate) fn pair_for(player: Player, own: SeqId, other: SeqId) -> (SeqId, SeqId) {
    match player {
        Player::P1 => (own, other),
        Player::P2 => (other, own),
    }
}

/// Everything known about one trigger: its follow value, the value and
/// shape of the best-deviating response, and the per-sequence/per-infoset
/// deviation values the recursion produced.
#[derive(Debug, Clone)]
pub struct TriggerReport {
    pub player: Player,
    pub trigger: SeqId,
    /// Follow value mu(trigger).
    pub follow_value: f64,
    /// Best-deviating response value beta*.
    pub best_deviation_value: f64,
    /// beta* - mu.
    pub exploitability: f64,
    /// Action index at the trigger infoset the best deviation starts with.
    pub best_first_action: usize,
    /// Argmax action per infoset reachable below the deviation (lowest
    /// index on ties).
    pub continuation: HashMap<InfosetId, usize>,
    /// beta(s; trigger) for every evaluated sequence.
    pub seq_values: HashMap<SeqId, f64>,
    /// nu(I; trigger) for every evaluated infoset.
    pub infoset_values: HashMap<InfosetId, f64>,
}

/// Computes the best-deviating response to `trigger` under `view`.
///
/// `follow` must be the player's follow values for the same plan.
pub fn best_deviation(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    follow: &FollowValues,
    trigger: SeqId,
) -> Result<TriggerReport> {
    let player = follow.player;
    if trigger == EMPTY_SEQ {
        return Err(invalid(
            "the empty sequence is not a trigger (triggers are recommendations)",
        ));
    }
    let def = index
        .seq_def(player, trigger)
        .ok_or_else(|| invalid(format!("sequence {trigger} out of range")))?;
    let num_actions = tree.infoset(player, def.infoset).num_actions();

    let mut seq_values = HashMap::new();
    let mut infoset_values = HashMap::new();
    let mut continuation = HashMap::new();

    let mut best = f64::NEG_INFINITY;
    let mut best_first = usize::MAX;
    for a in 0..num_actions {
        if a == def.action {
            continue;
        }
        let alt = index.seq_of(player, def.infoset, a);
        let val = deviation_value_rec(
            view,
            tree,
            index,
            player,
            trigger,
            alt,
            &mut seq_values,
            &mut infoset_values,
            &mut continuation,
        );
        if val > best {
            best = val;
            best_first = a;
        }
    }
    if best_first == usize::MAX {
        // Single-action infoset: no alternative exists, nothing to gain.
        best = follow.mu[trigger as usize];
        best_first = def.action;
    }
    Ok(TriggerReport {
        player,
        trigger,
        follow_value: follow.mu[trigger as usize],
        best_deviation_value: best,
        exploitability: best - follow.mu[trigger as usize],
        best_first_action: best_first,
        continuation,
        seq_values,
        infoset_values,
    })
}

#[allow(clippy::too_many_arguments)]
fn deviation_value_rec(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    player: Player,
    trigger: SeqId,
    seq: SeqId,
    seq_values: &mut HashMap<SeqId, f64>,
    infoset_values: &mut HashMap<InfosetId, f64>,
    continuation: &mut HashMap<InfosetId, usize>,
) -> f64 {
    let mut acc = 0.0;
    for &(leaf, other) in index.leaves_at(player, seq) {
        let u = tree.leaf_payoffs(leaf)[player.index()];
        let (s1, s2) = pair_for(player, trigger, other);
        acc += u * view.xi(s1, s2);
    }
    for &child in index.child_infosets(player, seq) {
        let n = tree.infoset(player, child).num_actions();
        let mut best = f64::NEG_INFINITY;
        let mut best_action = 0;
        for a in 0..n {
            let val = deviation_value_rec(
                view,
                tree,
                index,
                player,
                trigger,
                index.seq_of(player, child, a),
                seq_values,
                infoset_values,
                continuation,
            );
            if val > best {
                best = val;
                best_action = a;
            }
        }
        infoset_values.insert(child, best);
        continuation.insert(child, best_action);
        acc += best;
    }
    seq_values.insert(seq, acc);
    acc
}

/// Value of an infoset for a player who deviated at `trigger` and plays
/// a best response from `infoset` downward, under the plan's posterior.
pub fn infoset_deviation_value(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    player: Player,
    trigger: SeqId,
    infoset: InfosetId,
) -> f64 {
    let mut seq_values = HashMap::new();
    let mut infoset_values = HashMap::new();
    let mut continuation = HashMap::new();
    let n = tree.infoset(player, infoset).num_actions();
    (0..n)
        .map(|a| {
            deviation_value_rec(
                view,
                tree,
                index,
                player,
                trigger,
                index.seq_of(player, infoset, a),
                &mut seq_values,
                &mut infoset_values,
                &mut continuation,
            )
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Replays a recorded continuation and returns its deviation value; used
/// to confirm the report is self-consistent.
pub fn evaluate_continuation(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    report: &TriggerReport,
) -> f64 {
    fn rec(
        view: &dyn PairValue,
        tree: &GameTree,
        index: &SequenceIndex,
        player: Player,
        trigger: SeqId,
        seq: SeqId,
        continuation: &HashMap<InfosetId, usize>,
    ) -> f64 {
        let mut acc = 0.0;
        for &(leaf, other) in index.leaves_at(player, seq) {
            let u = tree.leaf_payoffs(leaf)[player.index()];
            let (s1, s2) = pair_for(player, trigger, other);
            acc += u * view.xi(s1, s2);
        }
        for &child in index.child_infosets(player, seq) {
            let a = continuation[&child];
            acc += rec(
                view,
                tree,
                index,
                player,
                trigger,
                index.seq_of(player, child, a),
                continuation,
            );
        }
        acc
    }
    let def = index.seq_def(report.player, report.trigger).unwrap();
    if report.best_first_action == def.action {
        return report.follow_value;
    }
    let first = index.seq_of(report.player, def.infoset, report.best_first_action);
    rec(
        view,
        tree,
        index,
        report.player,
        report.trigger,
        first,
        &report.continuation,
    )
}

/// Expected social welfare `sum_leaves xi * (u1 + u2)`.
pub fn social_welfare(view: &dyn PairValue, tree: &GameTree, index: &SequenceIndex) -> f64 {
    index
        .leaves()
        .iter()
        .map(|&leaf| {
            let (s1, s2) = index.leaf_pair(leaf);
            let u = tree.leaf_payoffs(leaf);
            (u[0] + u[1]) * view.xi(s1, s2)
        })
        .sum()
}

/// Social welfare restricted to leaves whose pair carries the given
/// subgame label.
pub fn social_welfare_in_class(
    view: &dyn PairValue,
    tree: &GameTree,
    index: &SequenceIndex,
    decomp: &crate::subgame::SubgameDecomposition,
    class: u16,
) -> f64 {
    index
        .leaves()
        .iter()
        .filter_map(|&leaf| {
            let (s1, s2) = index.leaf_pair(leaf);
            match decomp.pair_label(s1, s2) {
                Ok(l) if l == class => {
                    let u = tree.leaf_payoffs(leaf);
                    Some((u[0] + u[1]) * view.xi(s1, s2))
                }
                _ => None,
            }
        })
        .sum()
}

/// Full audit of a plan: every trigger of both players.
pub struct ExploitabilityReport {
    pub per_trigger: Vec<TriggerReport>,
    pub max_exploitability: f64,
    pub social_welfare: f64,
    pub structural_residual: f64,
    pub tolerance: f64,
}

impl ExploitabilityReport {
    pub fn is_efce(&self) -> bool {
        self.max_exploitability <= self.tolerance && self.structural_residual <= self.tolerance
    }
}

pub fn exploitability_report(
    plan: &CorrelationPlan,
    tree: &GameTree,
    index: &SequenceIndex,
    tolerance: f64,
    mode: Parallelism,
) -> Result<ExploitabilityReport> {
    let structural_residual = plan.structural_residual(tree, index)?;
    let follow = [
        follow_values(plan, tree, index, Player::P1),
        follow_values(plan, tree, index, Player::P2),
    ];
    let triggers: Vec<(Player, SeqId)> = Player::BOTH
        .into_iter()
        .flat_map(|p| (1..index.num_seqs(p) as SeqId).map(move |s| (p, s)))
        .collect();
    let per_trigger = map_items(mode, triggers, |(p, s)| {
        best_deviation(plan, tree, index, &follow[p.index()], s)
            .expect("non-empty trigger in range")
    });
    let max_exploitability = per_trigger
        .iter()
        .map(|r| r.exploitability)
        .fold(0.0_f64, f64::max);
    Ok(ExploitabilityReport {
        per_trigger,
        max_exploitability,
        social_welfare: social_welfare(plan, tree, index),
        structural_residual,
        tolerance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrplan::{make_blueprint, BlueprintSpec, RelevantPairSet};
    use crate::games::*;
    use crate::seq::build_sequence_index;

    fn uniform_plan_on(
        payoffs: &HashMap<(String, String), (f64, f64)>,
    ) -> (GameTree, SequenceIndex, CorrelationPlan) {
        let t = build_signaling_game(payoffs).unwrap();
        let idx = build_sequence_index(&t).unwrap();
        let pairs = RelevantPairSet::full(&t, &idx);
        let bp = make_blueprint(BlueprintSpec::Uniform, &t, &idx).unwrap();
        let plan = bp.materialize(&pairs);
        (t, idx, plan)
    }

    #[test]
    fn zero_payoffs_zero_everything() {
        let (t, idx, plan) = uniform_plan_on(&signaling_zero_payoffs());
        let rep = exploitability_report(&plan, &t, &idx, 1e-9, Parallelism::Sequential).unwrap();
        assert_eq!(rep.social_welfare, 0.0);
        assert!(rep.is_efce());
        for r in &rep.per_trigger {
            assert_eq!(r.follow_value, 0.0);
            assert_eq!(r.best_deviation_value, 0.0);
            assert_eq!(r.exploitability, 0.0);
        }
    }

    fn single_reward_payoffs() -> HashMap<(String, String), (f64, f64)> {
        let mut p = signaling_zero_payoffs();
        p.insert(("XG".into(), "lx".into()), (1.0, 1.0));
        p
    }

    #[test]
    fn follow_value_single_reward() {
        let (t, idx, plan) = uniform_plan_on(&single_reward_payoffs());
        let fv = follow_values(&plan, &t, &idx, Player::P1);
        // mu1(XG) = xi[XG, lx] * 1 = 0.25 * 0.5.
        let xg = 3; // sequence order: empty, G, B, XG, YG, XB, YB
        assert!((fv.mu[xg] - 0.125).abs() < 1e-15);
        // SW of the plan is 2 * xi[XG, lx].
        assert!((social_welfare(&plan, &t, &idx) - 2.0 * plan.value(3, 1)).abs() < 1e-15);
    }

    #[test]
    fn trigger_on_empty_sequence_rejected() {
        let (t, idx, plan) = uniform_plan_on(&signaling_zero_payoffs());
        let fv = follow_values(&plan, &t, &idx, Player::P1);
        assert!(best_deviation(&plan, &t, &idx, &fv, EMPTY_SEQ).is_err());
    }

    #[test]
    fn continuation_reevaluates_to_reported_value() {
        let (t, idx, plan) = uniform_plan_on(&single_reward_payoffs());
        for p in Player::BOTH {
            let fv = follow_values(&plan, &t, &idx, p);
            for s in 1..idx.num_seqs(p) {
                let rep = best_deviation(&plan, &t, &idx, &fv, s as SeqId).unwrap();
                let replay = evaluate_continuation(&plan, &t, &idx, &rep);
                assert!((replay - rep.best_deviation_value).abs() < 1e-12);
            }
        }
    }

    /// Adding a constant to every leaf payoff of both players leaves the
    /// exploitability and the argmax continuation unchanged.
    #[test]
    fn shift_invariance() {
        let base = single_reward_payoffs();
        let mut shifted = HashMap::new();
        for (k, (u1, u2)) in &base {
            shifted.insert(k.clone(), (u1 + 3.5, u2 + 3.5));
        }
        let (t1, idx1, plan1) = uniform_plan_on(&base);
        let (t2, idx2, plan2) = uniform_plan_on(&shifted);
        for p in Player::BOTH {
            let f1 = follow_values(&plan1, &t1, &idx1, p);
            let f2 = follow_values(&plan2, &t2, &idx2, p);
            for s in 1..idx1.num_seqs(p) {
                let r1 = best_deviation(&plan1, &t1, &idx1, &f1, s as SeqId).unwrap();
                let r2 = best_deviation(&plan2, &t2, &idx2, &f2, s as SeqId).unwrap();
                assert!((r1.exploitability - r2.exploitability).abs() < 1e-9);
                assert_eq!(r1.best_first_action, r2.best_first_action);
                assert_eq!(r1.continuation, r2.continuation);
            }
        }
    }

    /// Brute-force oracle: maximize over every pure continuation policy.
    fn brute_force_delta(
        view: &dyn PairValue,
        tree: &GameTree,
        index: &SequenceIndex,
        follow: &FollowValues,
        trigger: SeqId,
    ) -> f64 {
        let player = follow.player;
        let def = index.seq_def(player, trigger).unwrap();
        let n = tree.infoset(player, def.infoset).num_actions();

        fn reachable_infosets(
            tree: &GameTree,
            index: &SequenceIndex,
            player: Player,
            seq: SeqId,
            out: &mut Vec<InfosetId>,
        ) {
            for &child in index.child_infosets(player, seq) {
                out.push(child);
                for a in 0..tree.infoset(player, child).num_actions() {
                    reachable_infosets(tree, index, player, index.seq_of(player, child, a), out);
                }
            }
        }
        fn value_under(
            view: &dyn PairValue,
            tree: &GameTree,
            index: &SequenceIndex,
            player: Player,
            trigger: SeqId,
            seq: SeqId,
            policy: &HashMap<InfosetId, usize>,
        ) -> f64 {
            let mut acc = 0.0;
            for &(leaf, other) in index.leaves_at(player, seq) {
                let u = tree.leaf_payoffs(leaf)[player.index()];
                let (s1, s2) = pair_for(player, trigger, other);
                acc += u * view.xi(s1, s2);
            }
            for &child in index.child_infosets(player, seq) {
                let a = policy[&child];
                acc += value_under(
                    view,
                    tree,
                    index,
                    player,
                    trigger,
                    index.seq_of(player, child, a),
                    policy,
                );
            }
            acc
        }

        let mut best = f64::NEG_INFINITY;
        let mut any_alt = false;
        for a in 0..n {
            if a == def.action {
                continue;
            }
            any_alt = true;
            let alt = index.seq_of(player, def.infoset, a);
            let mut infosets = Vec::new();
            reachable_infosets(tree, index, player, alt, &mut infosets);
            infosets.sort_unstable();
            infosets.dedup();
            let sizes: Vec<usize> = infosets
                .iter()
                .map(|&i| tree.infoset(player, i).num_actions())
                .collect();
            let combos: usize = sizes.iter().product();
            for c in 0..combos.max(1) {
                let mut rem = c;
                let mut policy = HashMap::new();
                for (k, &i) in infosets.iter().enumerate() {
                    policy.insert(i, rem % sizes[k]);
                    rem /= sizes[k];
                }
                let v = value_under(view, tree, index, player, trigger, alt, &policy);
                best = best.max(v);
            }
        }
        if !any_alt {
            return 0.0;
        }
        best - follow.mu[trigger as usize]
    }

    #[test]
    fn brute_force_agreement_on_signaling() {
        use rand::{Rng, SeedableRng};
        let t = build_signaling_game(&signaling_payoffs(&[
            (("XG", "lx"), (2.0, 1.0)),
            (("XG", "rx"), (0.0, 0.0)),
            (("YG", "ly"), (-1.0, 3.0)),
            (("YG", "ry"), (1.0, 1.0)),
            (("XB", "lx"), (0.5, -0.5)),
            (("XB", "rx"), (1.5, 0.25)),
            (("YB", "ly"), (0.0, 2.0)),
            (("YB", "ry"), (-2.0, 1.0)),
        ]))
        .unwrap();
        let idx = build_sequence_index(&t).unwrap();
        let pairs = RelevantPairSet::full(&t, &idx);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            // Random product plans (always structurally feasible).
            let mut behavioral = |p: Player| crate::seq::BehavioralStrategy {
                player: p,
                probs: t
                    .infosets(p)
                    .iter()
                    .map(|is| {
                        let raw: Vec<f64> = (0..is.num_actions())
                            .map(|_| rand::Rng::gen::<f64>(&mut rng) + 0.01)
                            .collect();
                        let s: f64 = raw.iter().sum();
                        raw.into_iter().map(|x| x / s).collect()
                    })
                    .collect(),
            };
            let b1 = behavioral(Player::P1);
            let b2 = behavioral(Player::P2);
            let x1 = crate::seq::behavioral_to_sequence_form(&t, &idx, &b1).unwrap();
            let x2 = crate::seq::behavioral_to_sequence_form(&t, &idx, &b2).unwrap();
            let plan = Blueprint::Product { x1, x2 }.materialize(&pairs);
            for p in Player::BOTH {
                let fv = follow_values(&plan, &t, &idx, p);
                for s in 1..idx.num_seqs(p) {
                    let fast = best_deviation(&plan, &t, &idx, &fv, s as SeqId)
                        .unwrap()
                        .exploitability;
                    let brute = brute_force_delta(&plan, &t, &idx, &fv, s as SeqId);
                    assert!(
                        (fast - brute).abs() <= 1e-9,
                        "trigger {s} of {p}: {fast} vs {brute}"
                    );
                }
            }
        }
    }
}
