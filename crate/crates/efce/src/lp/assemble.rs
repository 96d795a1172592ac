//! LP assemblies: the full-game equilibrium LP and the per-subgame safe
//! refinement LP.
//!
//! Both share the same incentive machinery: per trigger, deviation-value
//! variables are created lazily for the sequences reachable below each
//! alternative action, tied together by defining equalities and the
//! max-dominance inequalities. The refinement variant works over the
//! restricted pair set of one subgame, substitutes blueprint constants
//! for every pre-subgame pair (making the equality-to-blueprint part of
//! the contract exact by construction), and adds the ledger's head-value
//! pincers.

use super::{LinearProgram, LpObjective, Relation, VarId};
use crate::bounds::{BlueprintAudit, BoundsLedger};
use crate::corrplan::{Blueprint, CorrelationPlan, RelevantPairSet};
use crate::efg::{GameTree, InfosetId, Player};
use crate::error::{invalid, Result};
use crate::seq::{SequenceIndex, SeqId};
use crate::subgame::{SubgameDecomposition, PRE_SUBGAME};
use std::collections::HashMap;
use std::sync::Arc;

/// A correlation-plan entry in an assembled LP: either a decision
/// variable or a blueprint constant.
#[derive(Debug, Clone, Copy)]
pub enum PairRef {
    Var(VarId),
    Const(f64),
}

pub struct AssembledLp {
    pub lp: LinearProgram,
    pub pairs: Arc<RelevantPairSet>,
    /// Aligned with `pairs`.
    pub pair_refs: Vec<PairRef>,
}

impl AssembledLp {
    /// Reads a plan out of a solution vector; constant entries come back
    /// exactly as assembled.
    pub fn extract_plan(&self, values: &[f64]) -> CorrelationPlan {
        let vals = self
            .pair_refs
            .iter()
            .map(|r| match *r {
                PairRef::Var(v) => values[v as usize],
                PairRef::Const(c) => c,
            })
            .collect();
        CorrelationPlan::new(Arc::clone(&self.pairs), vals)
    }
}

/// Shared state for building one player's deviation-value recursion.
struct DeviationCtx<'a> {
    tree: &'a GameTree,
    index: &'a SequenceIndex,
    player: Player,
    trigger: SeqId,
    /// beta variables per sequence, shared across one trigger.
    betas: HashMap<SeqId, VarId>,
}

impl<'a> DeviationCtx<'a> {
    /// Returns the beta variable for `seq`, creating it and everything
    /// below on first use.
    fn beta(
        &mut self,
        lp: &mut LinearProgram,
        seq: SeqId,
        posterior: &dyn Fn(SeqId) -> PairRef,
    ) -> Result<VarId> {
        if let Some(&v) = self.betas.get(&seq) {
            return Ok(v);
        }
        let p = self.player.index() + 1;
        let t = self.trigger;
        let beta = lp.add_free(format!("b{p}_t{t}_s{seq}"), 0.0);
        self.betas.insert(seq, beta);

        let mut terms = vec![(beta, 1.0)];
        let mut rhs = 0.0;
        for &(leaf, other) in self.index.leaves_at(self.player, seq) {
            let u = self.tree.leaf_payoffs(leaf)[self.player.index()];
            if u == 0.0 {
                continue;
            }
            match posterior(other) {
                PairRef::Var(v) => terms.push((v, -u)),
                PairRef::Const(c) => rhs += u * c,
            }
        }
        for &child in self.index.child_infosets(self.player, seq) {
            let nu = lp.add_free(format!("n{p}_t{t}_i{child}"), 0.0);
            for a in 0..self.tree.infoset(self.player, child).num_actions() {
                let sub = self.index.seq_of(self.player, child, a);
                let b = self.beta(lp, sub, posterior)?;
                lp.add_row(
                    format!("nd{p}_t{t}_i{child}_a{a}"),
                    Relation::Ge,
                    0.0,
                    vec![(nu, 1.0), (b, -1.0)],
                )?;
            }
            terms.push((nu, -1.0));
        }
        lp.add_row(format!("bd{p}_t{t}_s{seq}"), Relation::Eq, rhs, terms)?;
        Ok(beta)
    }
}

/// Adds follow-value variables `mu` and their defining rows for the given
/// sequences (which must be closed under sequence children).
fn add_follow_values(
    lp: &mut LinearProgram,
    tree: &GameTree,
    index: &SequenceIndex,
    player: Player,
    seqs: &[SeqId],
    pair_ref: &dyn Fn(SeqId, SeqId) -> PairRef,
) -> Result<HashMap<SeqId, VarId>> {
    let p = player.index() + 1;
    let mut mu: HashMap<SeqId, VarId> = HashMap::new();
    for &s in seqs {
        mu.insert(s, lp.add_free(format!("m{p}_s{s}"), 0.0));
    }
    for &s in seqs {
        let mut terms = vec![(mu[&s], 1.0)];
        let mut rhs = 0.0;
        for &(leaf, other) in index.leaves_at(player, s) {
            let u = tree.leaf_payoffs(leaf)[player.index()];
            if u == 0.0 {
                continue;
            }
            let (s1, s2) = crate::deviation::pair_for(player, s, other);
            match pair_ref(s1, s2) {
                PairRef::Var(v) => terms.push((v, -u)),
                PairRef::Const(c) => rhs += u * c,
            }
        }
        for &child in index.child_infosets(player, s) {
            for a in 0..tree.infoset(player, child).num_actions() {
                let sub = index.seq_of(player, child, a);
                let v = mu.get(&sub).ok_or_else(|| {
                    invalid(format!("follow-value set not closed below sequence {s}"))
                })?;
                terms.push((*v, -1.0));
            }
        }
        lp.add_row(format!("md{p}_s{s}"), Relation::Eq, rhs, terms)?;
    }
    Ok(mu)
}

/// Structural (flow) rows over the pair set, skipping groups made
/// entirely of constants.
fn add_structural_rows(
    lp: &mut LinearProgram,
    tree: &GameTree,
    index: &SequenceIndex,
    pairs: &RelevantPairSet,
    pair_refs: &[PairRef],
) -> Result<()> {
    let mut rows: HashMap<(InfosetId, SeqId), Vec<usize>> = HashMap::new();
    let mut cols: HashMap<(SeqId, InfosetId), Vec<usize>> = HashMap::new();
    for (pid, &(s1, s2)) in pairs.pairs().iter().enumerate() {
        if let Some(d1) = index.seq_def(Player::P1, s1) {
            rows.entry((d1.infoset, s2)).or_default().push(pid);
        }
        if let Some(d2) = index.seq_def(Player::P2, s2) {
            cols.entry((s1, d2.infoset)).or_default().push(pid);
        }
    }
    let mut emit = |lp: &mut LinearProgram,
                    name: String,
                    members: &[usize],
                    parent: (SeqId, SeqId)|
     -> Result<()> {
        let parent_ref = pairs
            .index_of(parent.0, parent.1)
            .map(|pp| pair_refs[pp as usize])
            .ok_or_else(|| {
                invalid(format!(
                    "pair set missing parent entry ({}, {})",
                    parent.0, parent.1
                ))
            })?;
        let mut terms = Vec::with_capacity(members.len() + 1);
        let mut rhs = 0.0;
        let mut any_var = false;
        for &pid in members {
            match pair_refs[pid] {
                PairRef::Var(v) => {
                    terms.push((v, 1.0));
                    any_var = true;
                }
                PairRef::Const(c) => rhs -= c,
            }
        }
        match parent_ref {
            PairRef::Var(v) => {
                terms.push((v, -1.0));
                any_var = true;
            }
            PairRef::Const(c) => rhs += c,
        }
        if any_var {
            lp.add_row(name, Relation::Eq, rhs, terms)?;
        }
        Ok(())
    };
    let mut row_keys: Vec<_> = rows.keys().copied().collect();
    row_keys.sort_unstable();
    for key in row_keys {
        let (i1, s2) = key;
        let members = &rows[&key];
        debug_assert_eq!(members.len(), tree.infoset(Player::P1, i1).num_actions());
        let parent = index.parent_seq(Player::P1, i1);
        emit(lp, format!("r_i{i1}_s{s2}"), members, (parent, s2))?;
    }
    let mut col_keys: Vec<_> = cols.keys().copied().collect();
    col_keys.sort_unstable();
    for key in col_keys {
        let (s1, i2) = key;
        let members = &cols[&key];
        debug_assert_eq!(members.len(), tree.infoset(Player::P2, i2).num_actions());
        let parent = index.parent_seq(Player::P2, i2);
        emit(lp, format!("c_s{s1}_i{i2}"), members, (s1, parent))?;
    }
    Ok(())
}

/// The equilibrium LP over the full pair set: structural rows, follow
/// values, and one incentive block per trigger of each player.
pub fn build_full_game_lp(
    tree: &GameTree,
    index: &SequenceIndex,
    pairs: &Arc<RelevantPairSet>,
    objective: LpObjective,
) -> Result<AssembledLp> {
    let mut lp = LinearProgram::new(true);
    let mut pair_refs = Vec::with_capacity(pairs.len());
    for &(s1, s2) in pairs.pairs() {
        let v = lp.add_nonneg(format!("x_{s1}_{s2}"), 0.0);
        pair_refs.push(PairRef::Var(v));
        if (s1, s2) == (0, 0) {
            lp.set_bounds(v, 1.0, 1.0);
        }
    }
    if matches!(objective, LpObjective::MaxSocialWelfare) {
        for &leaf in index.leaves() {
            let (s1, s2) = index.leaf_pair(leaf);
            let u = tree.leaf_payoffs(leaf);
            if let Some(pid) = pairs.index_of(s1, s2) {
                if let PairRef::Var(v) = pair_refs[pid as usize] {
                    lp.set_objective(v, u[0] + u[1]);
                }
            }
        }
    }
    add_structural_rows(&mut lp, tree, index, pairs, &pair_refs)?;

    for player in Player::BOTH {
        let seqs: Vec<SeqId> = (1..index.num_seqs(player) as SeqId).collect();
        let pr = |s1: SeqId, s2: SeqId| -> PairRef {
            pair_refs[pairs.index_of(s1, s2).expect("relevant pair") as usize]
        };
        let mu = add_follow_values(&mut lp, tree, index, player, &seqs, &pr)?;
        for &trigger in &seqs {
            let def = index.seq_def(player, trigger).unwrap();
            let n_actions = tree.infoset(player, def.infoset).num_actions();
            if n_actions < 2 {
                continue;
            }
            let mut ctx = DeviationCtx {
                tree,
                index,
                player,
                trigger,
                betas: HashMap::new(),
            };
            let posterior = |other: SeqId| -> PairRef {
                let (s1, s2) = crate::deviation::pair_for(player, trigger, other);
                pair_refs[pairs.index_of(s1, s2).expect("posterior pair") as usize]
            };
            for a in 0..n_actions {
                if a == def.action {
                    continue;
                }
                let sib = index.seq_of(player, def.infoset, a);
                let beta = ctx.beta(&mut lp, sib, &posterior)?;
                lp.add_row(
                    format!("ic{}_t{trigger}_a{a}", player.index() + 1),
                    Relation::Ge,
                    0.0,
                    vec![(mu[&trigger], 1.0), (beta, -1.0)],
                )?;
            }
        }
    }
    Ok(AssembledLp {
        lp,
        pairs: Arc::clone(pairs),
        pair_refs,
    })
}

/// The safe-refinement LP for subgame `j` over the restricted pair set
/// (pre-subgame pairs fixed to the blueprint).
#[allow(clippy::too_many_arguments)]
pub fn build_refinement_lp(
    tree: &GameTree,
    index: &SequenceIndex,
    pairs_j: &Arc<RelevantPairSet>,
    decomp: &SubgameDecomposition,
    j: usize,
    blueprint: &Blueprint,
    audit: &BlueprintAudit,
    ledger: &BoundsLedger,
    objective: LpObjective,
) -> Result<AssembledLp> {
    if j < 1 || j > decomp.num_subgames() {
        return Err(invalid(format!("subgame index {j} out of range")));
    }
    let mut lp = LinearProgram::new(true);
    let mut pair_refs = Vec::with_capacity(pairs_j.len());
    for &(s1, s2) in pairs_j.pairs() {
        let label = decomp.pair_label(s1, s2)?;
        if label == PRE_SUBGAME {
            pair_refs.push(PairRef::Const(blueprint.eval(s1, s2)));
        } else {
            debug_assert_eq!(label as usize, j);
            pair_refs.push(PairRef::Var(lp.add_nonneg(format!("x_{s1}_{s2}"), 0.0)));
        }
    }
    if matches!(objective, LpObjective::MaxSocialWelfare) {
        // Social welfare accruing from this subgame's leaf pairs.
        for &leaf in index.leaves() {
            let (s1, s2) = index.leaf_pair(leaf);
            if let Some(pid) = pairs_j.index_of(s1, s2) {
                if let PairRef::Var(v) = pair_refs[pid as usize] {
                    let u = tree.leaf_payoffs(leaf);
                    lp.set_objective(v, u[0] + u[1]);
                }
            }
        }
    }
    add_structural_rows(&mut lp, tree, index, pairs_j, &pair_refs)?;

    for player in Player::BOTH {
        let sub_seqs = decomp.subgame_seqs(player, j);
        if sub_seqs.is_empty() {
            continue;
        }
        let pr = |s1: SeqId, s2: SeqId| -> PairRef {
            pair_refs[pairs_j.index_of(s1, s2).expect("subgame pair") as usize]
        };
        let mu = add_follow_values(&mut lp, tree, index, player, &sub_seqs, &pr)?;

        // (A) in-subgame triggers may not become more exploitable than
        // they were under the blueprint.
        for &trigger in &sub_seqs {
            let def = index.seq_def(player, trigger).unwrap();
            let n_actions = tree.infoset(player, def.infoset).num_actions();
            if n_actions < 2 {
                continue;
            }
            let slack = audit.delta_star(player, trigger);
            let mut ctx = DeviationCtx {
                tree,
                index,
                player,
                trigger,
                betas: HashMap::new(),
            };
            let posterior = |other: SeqId| -> PairRef {
                let (s1, s2) = crate::deviation::pair_for(player, trigger, other);
                pair_refs[pairs_j.index_of(s1, s2).expect("posterior pair") as usize]
            };
            for a in 0..n_actions {
                if a == def.action {
                    continue;
                }
                let sib = index.seq_of(player, def.infoset, a);
                let beta = ctx.beta(&mut lp, sib, &posterior)?;
                lp.add_row(
                    format!("ic{}_t{trigger}_a{a}", player.index() + 1),
                    Relation::Ge,
                    -slack,
                    vec![(mu[&trigger], 1.0), (beta, -1.0)],
                )?;
            }
        }

        // (B) lower bounds on head-infoset follow values.
        for lb in ledger.lower_for(player, j) {
            let v = lp.add_var(
                format!("v{}_i{}", player.index() + 1, lb.infoset),
                lb.bound,
                f64::INFINITY,
                0.0,
            );
            let mut terms = vec![(v, 1.0)];
            for a in 0..tree.infoset(player, lb.infoset).num_actions() {
                let s = index.seq_of(player, lb.infoset, a);
                terms.push((mu[&s], -1.0));
            }
            lp.add_row(
                format!("vd{}_i{}", player.index() + 1, lb.infoset),
                Relation::Eq,
                0.0,
                terms,
            )?;
        }

        // (C) upper bounds on head-infoset deviation values per trigger.
        let mut ctxs: HashMap<SeqId, DeviationCtx> = HashMap::new();
        for ub in ledger.upper_for(player, j) {
            let ctx = ctxs.entry(ub.trigger).or_insert_with(|| DeviationCtx {
                tree,
                index,
                player,
                trigger: ub.trigger,
                betas: HashMap::new(),
            });
            let trigger = ub.trigger;
            let posterior = |other: SeqId| -> PairRef {
                let (s1, s2) = crate::deviation::pair_for(player, trigger, other);
                pair_refs[pairs_j.index_of(s1, s2).expect("posterior pair") as usize]
            };
            let nu = lp.add_var(
                format!("nu{}_t{}_h{}", player.index() + 1, ub.trigger, ub.infoset),
                f64::NEG_INFINITY,
                ub.bound,
                0.0,
            );
            for a in 0..tree.infoset(player, ub.infoset).num_actions() {
                let s = index.seq_of(player, ub.infoset, a);
                let beta = ctx.beta(&mut lp, s, &posterior)?;
                lp.add_row(
                    format!(
                        "nh{}_t{}_h{}_a{a}",
                        player.index() + 1,
                        ub.trigger,
                        ub.infoset
                    ),
                    Relation::Ge,
                    0.0,
                    vec![(nu, 1.0), (beta, -1.0)],
                )?;
            }
        }
    }

    Ok(AssembledLp {
        lp,
        pairs: Arc::clone(pairs_j),
        pair_refs,
    })
}
