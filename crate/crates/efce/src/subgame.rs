//! Subgame decompositions and the induced partition of relevant pairs.
//!
//! A subgame is a descendant-closed node set that never splits an
//! infoset; a decomposition is a family of disjoint subgames. Sequences,
//! infosets, and relevant pairs inherit labels from the decomposition:
//! label 0 means pre-subgame, labels 1..=J name the subgame.

use crate::corrplan::RelevantPairSet;
use crate::efg::{GameTree, InfosetId, NodeId, NodeKind, Player};
use crate::error::{invalid, structure, Result};
use crate::seq::{SequenceIndex, SeqId, EMPTY_SEQ};
use std::io::{BufRead, BufReader, Read, Write};

/// Label of the pre-subgame region.
pub const PRE_SUBGAME: u16 = 0;

#[derive(Debug)]
pub struct SubgameDecomposition {
    num_subgames: usize,
    node_label: Vec<u16>,
    infoset_label: [Vec<u16>; 2],
    seq_label: [Vec<u16>; 2],
    /// Head infosets per player, per subgame (index j-1).
    heads: [Vec<Vec<InfosetId>>; 2],
}

impl SubgameDecomposition {
    /// Validates the node sets and computes all induced labels.
    ///
    /// Requirements checked here: sets pairwise disjoint, each closed
    /// under descendants, and no infoset straddling a set boundary.
    pub fn from_node_sets(
        tree: &GameTree,
        index: &SequenceIndex,
        sets: &[Vec<NodeId>],
    ) -> Result<SubgameDecomposition> {
        let num_subgames = sets.len();
        if num_subgames > u16::MAX as usize - 1 {
            return Err(invalid("too many subgames"));
        }
        let mut node_label = vec![PRE_SUBGAME; tree.num_nodes()];
        for (j, set) in sets.iter().enumerate() {
            let label = (j + 1) as u16;
            for &n in set {
                if n as usize >= tree.num_nodes() {
                    return Err(invalid(format!("subgame {}: unknown node {n}", j + 1)));
                }
                if node_label[n as usize] != PRE_SUBGAME {
                    return Err(invalid(format!(
                        "node {n} assigned to subgames {} and {}",
                        node_label[n as usize],
                        j + 1
                    )));
                }
                node_label[n as usize] = label;
            }
        }
        // Descendant closure: every child of a labeled node carries the
        // same label.
        for (id, node) in tree.nodes() {
            if let NodeKind::Decision { ref children, .. } = node.kind {
                let l = node_label[id as usize];
                if l == PRE_SUBGAME {
                    continue;
                }
                for &c in children {
                    if node_label[c as usize] != l {
                        return Err(structure(format!(
                            "subgame {l} not closed under descendants: node {id} is inside, child {c} is not"
                        )));
                    }
                }
            }
        }
        // Infoset wholeness.
        let mut infoset_label: [Vec<u16>; 2] = [Vec::new(), Vec::new()];
        for player in Player::BOTH {
            let mut labels = Vec::with_capacity(tree.infosets(player).len());
            for (iid, infoset) in tree.infosets(player).iter().enumerate() {
                let l = node_label[infoset.nodes[0] as usize];
                for &n in &infoset.nodes {
                    if node_label[n as usize] != l {
                        return Err(structure(format!(
                            "infoset {iid} of {player} straddles a subgame boundary"
                        )));
                    }
                }
                labels.push(l);
            }
            infoset_label[player.index()] = labels;
        }
        // Sequence labels: a sequence lives where its infoset lives.
        let mut seq_label: [Vec<u16>; 2] = [Vec::new(), Vec::new()];
        for player in Player::BOTH {
            let pi = player.index();
            let mut labels = vec![PRE_SUBGAME; index.num_seqs(player)];
            for (seq, label) in labels.iter_mut().enumerate() {
                if let Some(def) = index.seq_def(player, seq as SeqId) {
                    *label = infoset_label[pi][def.infoset as usize];
                }
            }
            seq_label[pi] = labels;
        }
        // Head infosets: inside a subgame with a pre-subgame parent
        // sequence. Subgame membership is absorbing down a path, so this
        // is equivalent to having no in-subgame predecessor infoset.
        let mut heads: [Vec<Vec<InfosetId>>; 2] = [
            vec![Vec::new(); num_subgames],
            vec![Vec::new(); num_subgames],
        ];
        for player in Player::BOTH {
            let pi = player.index();
            for iid in 0..tree.infosets(player).len() {
                let l = infoset_label[pi][iid];
                if l == PRE_SUBGAME {
                    continue;
                }
                let parent = index.parent_seq(player, iid as InfosetId);
                let parent_label = if parent == EMPTY_SEQ {
                    PRE_SUBGAME
                } else {
                    seq_label[pi][parent as usize]
                };
                if parent_label == PRE_SUBGAME {
                    heads[pi][l as usize - 1].push(iid as InfosetId);
                }
            }
        }
        Ok(SubgameDecomposition {
            num_subgames,
            node_label,
            infoset_label,
            seq_label,
            heads,
        })
    }

    /// Decomposition with zero subgames: everything pre-subgame.
    pub fn trivial(tree: &GameTree, index: &SequenceIndex) -> SubgameDecomposition {
        Self::from_node_sets(tree, index, &[]).expect("empty decomposition is valid")
    }

    pub fn num_subgames(&self) -> usize {
        self.num_subgames
    }

    pub fn node_label(&self, n: NodeId) -> u16 {
        self.node_label[n as usize]
    }

    pub fn infoset_label(&self, player: Player, i: InfosetId) -> u16 {
        self.infoset_label[player.index()][i as usize]
    }

    /// 0 for the empty sequence and pre-subgame sequences.
    pub fn seq_label(&self, player: Player, s: SeqId) -> u16 {
        self.seq_label[player.index()][s as usize]
    }

    /// Class of a relevant pair: pre-subgame (0) unless either sequence
    /// lies in a subgame. Returns an error if the sequences lie in two
    /// different subgames, which a valid decomposition rules out.
    pub fn pair_label(&self, s1: SeqId, s2: SeqId) -> Result<u16> {
        let l1 = self.seq_label[0][s1 as usize];
        let l2 = self.seq_label[1][s2 as usize];
        if l1 != PRE_SUBGAME && l2 != PRE_SUBGAME && l1 != l2 {
            return Err(structure(format!(
                "relevant pair ({s1},{s2}) spans subgames {l1} and {l2}"
            )));
        }
        Ok(l1.max(l2))
    }

    pub fn head_infosets(&self, player: Player, j: usize) -> &[InfosetId] {
        &self.heads[player.index()][j - 1]
    }

    /// Sequences of `player` inside subgame `j`, in canonical order.
    pub fn subgame_seqs(&self, player: Player, j: usize) -> Vec<SeqId> {
        self.seq_label[player.index()]
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l as usize == j)
            .map(|(s, _)| s as SeqId)
            .collect()
    }

    /// Pre-subgame sequences of `player`, excluding the empty sequence.
    pub fn pre_subgame_seqs(&self, player: Player) -> Vec<SeqId> {
        self.seq_label[player.index()]
            .iter()
            .enumerate()
            .skip(1)
            .filter(|&(_, &l)| l == PRE_SUBGAME)
            .map(|(s, _)| s as SeqId)
            .collect()
    }
}

/// Per-pair subgame labels for a pair set, plus class sizes.
pub struct PairPartition {
    pub labels: Vec<u16>,
    /// counts[0] is the pre-subgame class, counts[j] subgame j.
    pub counts: Vec<usize>,
}

/// Assigns every relevant pair to exactly one class.
pub fn partition_pairs(
    decomp: &SubgameDecomposition,
    pairs: &RelevantPairSet,
) -> Result<PairPartition> {
    let mut labels = Vec::with_capacity(pairs.len());
    let mut counts = vec![0usize; decomp.num_subgames() + 1];
    for &(s1, s2) in pairs.pairs() {
        let l = decomp.pair_label(s1, s2)?;
        counts[l as usize] += 1;
        labels.push(l);
    }
    Ok(PairPartition { labels, counts })
}

/// Restriction of the relevant pairs to classes {0, j}: the index set a
/// refinement of subgame `j` works over.
pub fn restricted_pairs(
    tree: &GameTree,
    index: &SequenceIndex,
    conn: &crate::corrplan::Connectivity,
    decomp: &SubgameDecomposition,
    j: usize,
) -> std::sync::Arc<RelevantPairSet> {
    RelevantPairSet::filtered(tree, index, conn, |player, seq| {
        let l = decomp.seq_label(player, seq);
        l == PRE_SUBGAME || l as usize == j
    })
}

/// Writes `subgame <j>: <node ids>` lines; omitted nodes are pre-subgame.
pub fn write_decomposition<W: Write>(decomp: &SubgameDecomposition, mut w: W) -> Result<()> {
    for j in 1..=decomp.num_subgames() {
        let ids: Vec<String> = decomp
            .node_label
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l as usize == j)
            .map(|(n, _)| n.to_string())
            .collect();
        writeln!(w, "subgame {j}: {}", ids.join(" "))?;
    }
    Ok(())
}

/// Parses the decomposition text format and validates it against the tree.
pub fn read_decomposition<R: Read>(
    tree: &GameTree,
    index: &SequenceIndex,
    r: R,
) -> Result<SubgameDecomposition> {
    let reader = BufReader::new(r);
    let mut sets: Vec<(usize, Vec<NodeId>)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rest = line.strip_prefix("subgame ").ok_or(crate::Error::Parse {
            line: lineno,
            message: "expected `subgame <j>: <ids>`".to_string(),
        })?;
        let (j, ids) = rest.split_once(':').ok_or(crate::Error::Parse {
            line: lineno,
            message: "missing `:`".to_string(),
        })?;
        let j: usize = j.trim().parse().map_err(|_| crate::Error::Parse {
            line: lineno,
            message: "bad subgame number".to_string(),
        })?;
        let mut nodes = Vec::new();
        for tok in ids.split_whitespace() {
            nodes.push(tok.parse::<NodeId>().map_err(|_| crate::Error::Parse {
                line: lineno,
                message: format!("bad node id `{tok}`"),
            })?);
        }
        sets.push((j, nodes));
    }
    sets.sort_by_key(|&(j, _)| j);
    for (pos, &(j, _)) in sets.iter().enumerate() {
        if j != pos + 1 {
            return Err(invalid("subgame numbers must be 1..=J without gaps"));
        }
    }
    let sets: Vec<Vec<NodeId>> = sets.into_iter().map(|(_, s)| s).collect();
    SubgameDecomposition::from_node_sets(tree, index, &sets)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corrplan::Connectivity;
    use crate::games::{
        build_battleship, build_signaling_game, battleship_subgame_node_sets,
        signaling_subgame_node_sets, signaling_zero_payoffs, BattleshipConfig,
    };
    use crate::seq::build_sequence_index;

    fn signaling() -> (GameTree, SequenceIndex) {
        let t = build_signaling_game(&signaling_zero_payoffs()).unwrap();
        let idx = build_sequence_index(&t).unwrap();
        (t, idx)
    }

    #[test]
    fn signaling_two_subgames() {
        let (t, idx) = signaling();
        let sets = signaling_subgame_node_sets(&t);
        let d = SubgameDecomposition::from_node_sets(&t, &idx, &sets).unwrap();
        assert_eq!(d.num_subgames(), 2);
        // P2's infosets sit in their own subgames; all P1 infosets are
        // pre-subgame.
        assert_eq!(d.infoset_label(Player::P2, 0), 1);
        assert_eq!(d.infoset_label(Player::P2, 1), 2);
        for i in 0..t.infosets(Player::P1).len() {
            assert_eq!(d.infoset_label(Player::P1, i as InfosetId), PRE_SUBGAME);
        }
        assert_eq!(d.head_infosets(Player::P2, 1), &[0]);
        assert!(d.head_infosets(Player::P1, 1).is_empty());
    }

    #[test]
    fn signaling_partition_counts() {
        let (t, idx) = signaling();
        let sets = signaling_subgame_node_sets(&t);
        let d = SubgameDecomposition::from_node_sets(&t, &idx, &sets).unwrap();
        let pairs = RelevantPairSet::full(&t, &idx);
        let part = partition_pairs(&d, &pairs).unwrap();
        assert_eq!(part.counts, vec![7, 14, 14]);
        assert_eq!(part.counts.iter().sum::<usize>(), 35);
    }

    #[test]
    fn whole_tree_minus_root_is_valid() {
        let (t, idx) = signaling();
        let all_but_root: Vec<NodeId> = t
            .nodes()
            .map(|(id, _)| id)
            .filter(|&id| id != t.root())
            .collect();
        let d = SubgameDecomposition::from_node_sets(&t, &idx, &[all_but_root]).unwrap();
        assert_eq!(d.num_subgames(), 1);
        // Heads: each player's topmost infosets inside the subgame.
        assert_eq!(d.head_infosets(Player::P1, 1).len(), 2);
        assert_eq!(d.head_infosets(Player::P2, 1).len(), 2);
    }

    #[test]
    fn straddling_infoset_rejected() {
        let (t, idx) = signaling();
        // The X infoset has two member nodes; take the subtree of only one.
        let member = t.infosets(Player::P2)[0].nodes[0];
        let mut set = vec![member];
        if let NodeKind::Decision { ref children, .. } = t.node(member).kind {
            set.extend(children.iter().copied());
        }
        let err = SubgameDecomposition::from_node_sets(&t, &idx, &[set]).unwrap_err();
        assert!(err.to_string().contains("straddles"), "{err}");
    }

    #[test]
    fn overlapping_sets_rejected() {
        let (t, idx) = signaling();
        let sets = signaling_subgame_node_sets(&t);
        let mut overlapping = sets.to_vec();
        overlapping[1].push(sets[0][0]);
        let err =
            SubgameDecomposition::from_node_sets(&t, &idx, &overlapping).unwrap_err();
        assert!(err.to_string().contains("assigned to subgames"), "{err}");
    }

    #[test]
    fn trivial_decomposition_all_pre() {
        let (t, idx) = signaling();
        let d = SubgameDecomposition::trivial(&t, &idx);
        let pairs = RelevantPairSet::full(&t, &idx);
        let part = partition_pairs(&d, &pairs).unwrap();
        assert_eq!(part.counts, vec![35]);
    }

    #[test]
    fn battleship_partition_totals() {
        let cfg = BattleshipConfig::line(3, 2, 2.0);
        let t = build_battleship(&cfg).unwrap();
        let idx = build_sequence_index(&t).unwrap();
        let sets = battleship_subgame_node_sets(&t, &cfg, 1).unwrap();
        let d = SubgameDecomposition::from_node_sets(&t, &idx, &sets).unwrap();
        assert_eq!(d.num_subgames(), 9);
        let pairs = RelevantPairSet::full(&t, &idx);
        let part = partition_pairs(&d, &pairs).unwrap();
        assert_eq!(part.counts.iter().sum::<usize>(), pairs.len());
        // Every head infoset's parent sequence is pre-subgame.
        for p in Player::BOTH {
            for j in 1..=9 {
                for &h in d.head_infosets(p, j) {
                    let parent = idx.parent_seq(p, h);
                    assert_eq!(d.seq_label(p, parent), PRE_SUBGAME);
                }
            }
        }
    }

    #[test]
    fn battleship_restricted_pair_count_is_382() {
        let cfg = BattleshipConfig::line(3, 2, 2.0);
        let t = build_battleship(&cfg).unwrap();
        let idx = build_sequence_index(&t).unwrap();
        let sets = battleship_subgame_node_sets(&t, &cfg, 1).unwrap();
        let d = SubgameDecomposition::from_node_sets(&t, &idx, &sets).unwrap();
        let conn = Connectivity::new(&t);
        let xi1 = restricted_pairs(&t, &idx, &conn, &d, 1);
        assert_eq!(xi1.len(), 382);
    }

    #[test]
    fn decomposition_file_round_trip() {
        let (t, idx) = signaling();
        let sets = signaling_subgame_node_sets(&t);
        let d = SubgameDecomposition::from_node_sets(&t, &idx, &sets).unwrap();
        let mut buf = Vec::new();
        write_decomposition(&d, &mut buf).unwrap();
        let d2 = read_decomposition(&t, &idx, &buf[..]).unwrap();
        assert_eq!(d2.num_subgames(), 2);
        for (id, _) in t.nodes() {
            assert_eq!(d.node_label(id), d2.node_label(id));
        }
    }
}
