//! Sequence-form indexing of a game tree.
//!
//! A sequence is an (infoset, action) pair plus the empty sequence, which
//! always sits at index 0. Ordering is fixed by a depth-first traversal of
//! the tree with actions in declared order; all file formats and plan
//! vectors reference sequences through these ordinals.

use crate::efg::{GameTree, InfosetId, NodeId, NodeKind, Player};
use crate::error::{invalid, structure, Result};
use std::collections::HashMap;

pub type SeqId = u32;

/// Index of the empty sequence for both players.
pub const EMPTY_SEQ: SeqId = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqDef {
    pub infoset: InfosetId,
    pub action: usize,
}

#[derive(Debug, Clone)]
struct PlayerSeqs {
    /// Definition per sequence id; index 0 is the empty sequence (no def).
    defs: Vec<Option<SeqDef>>,
    /// First sequence id of each infoset; actions are contiguous.
    infoset_base: Vec<SeqId>,
    /// Parent sequence of each infoset.
    parent_seq: Vec<SeqId>,
    /// Infosets whose parent sequence is the given sequence, in
    /// first-encounter order.
    child_infosets: Vec<Vec<InfosetId>>,
    /// Leaves grouped by this player's final sequence, with the opponent's
    /// final sequence alongside.
    leaves_by_seq: Vec<Vec<(NodeId, SeqId)>>,
}

#[derive(Debug, Clone)]
pub struct SequenceIndex {
    players: [PlayerSeqs; 2],
    /// Leaf node -> identifying pair (sigma1, sigma2).
    leaf_pairs: HashMap<NodeId, (SeqId, SeqId)>,
    leaves: Vec<NodeId>,
}

impl SequenceIndex {
    pub fn num_seqs(&self, player: Player) -> usize {
        self.players[player.index()].defs.len()
    }

    pub fn seq_def(&self, player: Player, seq: SeqId) -> Option<SeqDef> {
        self.players[player.index()].defs[seq as usize]
    }

    /// Sequence id for (infoset, action).
    pub fn seq_of(&self, player: Player, infoset: InfosetId, action: usize) -> SeqId {
        self.players[player.index()].infoset_base[infoset as usize] + action as SeqId
    }

    /// Parent sequence of an infoset (possibly the empty sequence).
    pub fn parent_seq(&self, player: Player, infoset: InfosetId) -> SeqId {
        self.players[player.index()].parent_seq[infoset as usize]
    }

    /// Infosets whose parent sequence is `seq`.
    pub fn child_infosets(&self, player: Player, seq: SeqId) -> &[InfosetId] {
        &self.players[player.index()].child_infosets[seq as usize]
    }

    /// Leaves whose final `player` sequence is `seq`, paired with the
    /// opponent's final sequence at that leaf.
    pub fn leaves_at(&self, player: Player, seq: SeqId) -> &[(NodeId, SeqId)] {
        &self.players[player.index()].leaves_by_seq[seq as usize]
    }

    pub fn leaf_pair(&self, leaf: NodeId) -> (SeqId, SeqId) {
        self.leaf_pairs[&leaf]
    }

    pub fn leaves(&self) -> &[NodeId] {
        &self.leaves
    }

    /// `anc` precedes or equals `desc` in the player's own partial order.
    pub fn seq_weakly_precedes(&self, player: Player, anc: SeqId, desc: SeqId) -> bool {
        let mut cur = desc;
        loop {
            if cur == anc {
                return true;
            }
            if cur == EMPTY_SEQ {
                return anc == EMPTY_SEQ;
            }
            let def = self.seq_def(player, cur).unwrap();
            cur = self.parent_seq(player, def.infoset);
        }
    }

    /// Human-readable label, e.g. `(I3:a2)` resolved through the tree's
    /// action names.
    pub fn seq_label(&self, tree: &GameTree, player: Player, seq: SeqId) -> String {
        match self.seq_def(player, seq) {
            None => "∅".to_string(),
            Some(d) => {
                let is = tree.infoset(player, d.infoset);
                format!("{}[i{}]{}", player, d.infoset, is.actions[d.action])
            }
        }
    }
}

/// Builds the sequence index by depth-first traversal.
///
/// Requires a structurally valid, perfect-recall tree; infosets whose
/// members disagree on the parent sequence are rejected.
pub fn build_sequence_index(tree: &GameTree) -> Result<SequenceIndex> {
    let mut players: [PlayerSeqs; 2] = [
        PlayerSeqs {
            defs: vec![None],
            infoset_base: vec![SeqId::MAX; tree.infosets(Player::P1).len()],
            parent_seq: vec![SeqId::MAX; tree.infosets(Player::P1).len()],
            child_infosets: vec![Vec::new()],
            leaves_by_seq: vec![Vec::new()],
        },
        PlayerSeqs {
            defs: vec![None],
            infoset_base: vec![SeqId::MAX; tree.infosets(Player::P2).len()],
            parent_seq: vec![SeqId::MAX; tree.infosets(Player::P2).len()],
            child_infosets: vec![Vec::new()],
            leaves_by_seq: vec![Vec::new()],
        },
    ];
    let mut leaf_pairs = HashMap::new();
    let mut leaves = Vec::new();
    let mut pair_seen: HashMap<(SeqId, SeqId), NodeId> = HashMap::new();

    // DFS carrying the last sequence of each player.
    let mut stack: Vec<(NodeId, [SeqId; 2])> = vec![(tree.root(), [EMPTY_SEQ, EMPTY_SEQ])];
    while let Some((id, last)) = stack.pop() {
        match tree.node(id).kind {
            NodeKind::Leaf { .. } => {
                let pair = (last[0], last[1]);
                if let Some(prev) = pair_seen.insert(pair, id) {
                    return Err(structure(format!(
                        "leaves {prev} and {id} share the sequence pair ({}, {})",
                        pair.0, pair.1
                    )));
                }
                leaf_pairs.insert(id, pair);
                leaves.push(id);
                for player in Player::BOTH {
                    let pi = player.index();
                    players[pi].leaves_by_seq[last[pi] as usize]
                        .push((id, last[player.opponent().index()]));
                }
            }
            NodeKind::Decision {
                player,
                infoset,
                ref children,
            } => {
                let pi = player.index();
                let base = if players[pi].infoset_base[infoset as usize] == SeqId::MAX {
                    let base = players[pi].defs.len() as SeqId;
                    players[pi].infoset_base[infoset as usize] = base;
                    players[pi].parent_seq[infoset as usize] = last[pi];
                    players[pi].child_infosets[last[pi] as usize].push(infoset);
                    let n_actions = tree.infoset(player, infoset).num_actions();
                    for a in 0..n_actions {
                        players[pi].defs.push(Some(SeqDef { infoset, action: a }));
                        players[pi].child_infosets.push(Vec::new());
                        players[pi].leaves_by_seq.push(Vec::new());
                    }
                    base
                } else {
                    if players[pi].parent_seq[infoset as usize] != last[pi] {
                        return Err(structure(format!(
                            "infoset {infoset} of {player} reached with two parent sequences \
                             (imperfect recall)"
                        )));
                    }
                    players[pi].infoset_base[infoset as usize]
                };
                // Reverse push to visit children in declared order.
                for (a, &c) in children.iter().enumerate().rev() {
                    let mut next = last;
                    next[pi] = base + a as SeqId;
                    stack.push((c, next));
                }
            }
        }
    }

    for pi in 0..2 {
        if players[pi].infoset_base.iter().any(|&b| b == SeqId::MAX) {
            return Err(structure(format!(
                "player {} has an infoset never reached by the tree",
                pi + 1
            )));
        }
    }

    Ok(SequenceIndex {
        players,
        leaf_pairs,
        leaves,
    })
}

/// Per-infoset action distributions for one player.
#[derive(Debug, Clone)]
pub struct BehavioralStrategy {
    pub player: Player,
    /// Indexed by infoset id, then action.
    pub probs: Vec<Vec<f64>>,
}

impl BehavioralStrategy {
    pub fn uniform(tree: &GameTree, player: Player) -> Self {
        let probs = tree
            .infosets(player)
            .iter()
            .map(|is| vec![1.0 / is.num_actions() as f64; is.num_actions()])
            .collect();
        BehavioralStrategy { player, probs }
    }
}

/// Realization weights over one player's sequences: `x[0] = 1` and every
/// infoset's action weights sum to the weight of its parent sequence.
#[derive(Debug, Clone)]
pub struct SequenceFormStrategy {
    pub player: Player,
    pub weights: Vec<f64>,
}

impl SequenceFormStrategy {
    /// Largest flow-constraint violation (incl. negativity and `x[0] != 1`).
    pub fn flow_residual(&self, tree: &GameTree, index: &SequenceIndex) -> f64 {
        let mut res: f64 = (self.weights[EMPTY_SEQ as usize] - 1.0).abs();
        for &w in &self.weights {
            res = res.max(-w);
        }
        for (iid, is) in tree.infosets(self.player).iter().enumerate() {
            let parent = index.parent_seq(self.player, iid as InfosetId);
            let sum: f64 = (0..is.num_actions())
                .map(|a| self.weights[index.seq_of(self.player, iid as InfosetId, a) as usize])
                .sum();
            res = res.max((sum - self.weights[parent as usize]).abs());
        }
        res
    }
}

/// Converts per-infoset distributions to sequence form by multiplying
/// probabilities down the unique own-action path.
pub fn behavioral_to_sequence_form(
    tree: &GameTree,
    index: &SequenceIndex,
    behavioral: &BehavioralStrategy,
) -> Result<SequenceFormStrategy> {
    let player = behavioral.player;
    let infosets = tree.infosets(player);
    if behavioral.probs.len() != infosets.len() {
        return Err(invalid(format!(
            "behavioral strategy covers {} infosets, game has {}",
            behavioral.probs.len(),
            infosets.len()
        )));
    }
    for (iid, (dist, is)) in behavioral.probs.iter().zip(infosets).enumerate() {
        if dist.len() != is.num_actions() {
            return Err(invalid(format!(
                "infoset {iid}: {} probabilities for {} actions",
                dist.len(),
                is.num_actions()
            )));
        }
        if dist.iter().any(|&p| p < 0.0) {
            return Err(invalid(format!("infoset {iid}: negative probability")));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!(
                "infoset {iid}: probabilities sum to {sum}, not 1"
            )));
        }
    }

    let mut weights = vec![0.0; index.num_seqs(player)];
    weights[EMPTY_SEQ as usize] = 1.0;
    // Sequence ids are allocated parent-before-child, so one forward pass
    // suffices.
    for seq in 1..index.num_seqs(player) {
        let def = index.seq_def(player, seq as SeqId).unwrap();
        let parent = index.parent_seq(player, def.infoset);
        weights[seq] = weights[parent as usize] * behavioral.probs[def.infoset as usize][def.action];
    }
    Ok(SequenceFormStrategy { player, weights })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg::GameTreeBuilder;

    fn root_leaf_game() -> GameTree {
        let mut b = GameTreeBuilder::new();
        let l = b.add_leaf(3.0, -1.0);
        b.finish(l).unwrap()
    }

    #[test]
    fn root_leaf_index() {
        let t = root_leaf_game();
        let idx = build_sequence_index(&t).unwrap();
        assert_eq!(idx.num_seqs(Player::P1), 1);
        assert_eq!(idx.num_seqs(Player::P2), 1);
        assert_eq!(idx.leaf_pair(t.root()), (EMPTY_SEQ, EMPTY_SEQ));
    }

    #[test]
    fn leaf_payoff_reconstruction() {
        let t = root_leaf_game();
        let idx = build_sequence_index(&t).unwrap();
        for &leaf in idx.leaves() {
            let (s1, s2) = idx.leaf_pair(leaf);
            // The leaf map inverts to the same leaf among leaves_at.
            assert!(idx
                .leaves_at(Player::P1, s1)
                .iter()
                .any(|&(l, other)| l == leaf && other == s2));
        }
    }
}
