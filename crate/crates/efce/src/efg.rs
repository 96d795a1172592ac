//! Two-player, no-chance extensive-form game trees.
//!
//! The tree is stored flat: nodes in a `Vec`, inner nodes owned by `P1` or
//! `P2` (there are no chance nodes by construction), infosets kept per
//! player with dense integer ids. Everything is immutable once built, so a
//! finished [`GameTree`] can be shared freely across threads.

use crate::error::{structure, Error, Result};
use std::collections::HashMap;
use std::fmt;

pub type NodeId = u32;
pub type InfosetId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    P1,
    P2,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::P1, Player::P2];

    #[inline]
    pub fn index(self) -> usize {
        match self {
            Player::P1 => 0,
            Player::P2 => 1,
        }
    }

    #[inline]
    pub fn opponent(self) -> Player {
        match self {
            Player::P1 => Player::P2,
            Player::P2 => Player::P1,
        }
    }

    pub fn from_one_based(v: u32) -> Option<Player> {
        match v {
            1 => Some(Player::P1),
            2 => Some(Player::P2),
            _ => None,
        }
    }

    pub fn one_based(self) -> u32 {
        self.index() as u32 + 1
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.one_based())
    }
}

#[derive(Debug, Clone)]
pub enum NodeKind {
    Decision {
        player: Player,
        infoset: InfosetId,
        children: Vec<NodeId>,
    },
    Leaf {
        /// Payoff to P1 and P2, in game units.
        payoffs: [f64; 2],
    },
}

#[derive(Debug, Clone)]
pub struct Node {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// A set of states indistinguishable to the acting player. All member
/// nodes share the owner and the ordered action-label list.
#[derive(Debug, Clone)]
pub struct Infoset {
    pub player: Player,
    pub actions: Vec<String>,
    pub nodes: Vec<NodeId>,
}

impl Infoset {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }
}

#[derive(Debug, Clone)]
pub struct GameTree {
    nodes: Vec<Node>,
    root: NodeId,
    infosets: [Vec<Infoset>; 2],
    /// DFS preorder entry/exit stamps; `v` is a strict descendant of `u`
    /// iff `dfs_in[u] < dfs_in[v] && dfs_out[v] <= dfs_out[u]`.
    dfs_in: Vec<u32>,
    dfs_out: Vec<u32>,
    dfs_order: Vec<NodeId>,
}

impl GameTree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id as usize]
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = (NodeId, &Node)> {
        self.nodes.iter().enumerate().map(|(i, n)| (i as NodeId, n))
    }

    pub fn infosets(&self, player: Player) -> &[Infoset] {
        &self.infosets[player.index()]
    }

    pub fn infoset(&self, player: Player, id: InfosetId) -> &Infoset {
        &self.infosets[player.index()][id as usize]
    }

    /// Nodes in depth-first preorder (children in declared action order).
    pub fn dfs_order(&self) -> &[NodeId] {
        &self.dfs_order
    }

    #[inline]
    pub fn is_ancestor(&self, anc: NodeId, desc: NodeId) -> bool {
        self.dfs_in[anc as usize] <= self.dfs_in[desc as usize]
            && self.dfs_out[desc as usize] <= self.dfs_out[anc as usize]
    }

    #[inline]
    pub fn dfs_in(&self, id: NodeId) -> u32 {
        self.dfs_in[id as usize]
    }

    #[inline]
    pub fn dfs_out_of(&self, id: NodeId) -> u32 {
        self.dfs_out[id as usize]
    }

    pub fn leaf_payoffs(&self, id: NodeId) -> [f64; 2] {
        match self.node(id).kind {
            NodeKind::Leaf { payoffs } => payoffs,
            _ => panic!("node {id} is not a leaf"),
        }
    }

    /// The player-`i` (infoset, action) pairs on the root path to `id`,
    /// excluding `id` itself.
    pub fn own_history(&self, player: Player, id: NodeId) -> Vec<(InfosetId, usize)> {
        let mut rev = Vec::new();
        let mut cur = id;
        while let Some(p) = self.node(cur).parent {
            if let NodeKind::Decision {
                player: owner,
                infoset,
                ref children,
            } = self.node(p).kind
            {
                if owner == player {
                    let slot = children.iter().position(|&c| c == cur).expect("child link");
                    rev.push((infoset, slot));
                }
            }
            cur = p;
        }
        rev.reverse();
        rev
    }
}

/// Incrementally builds a [`GameTree`]. Children are created before their
/// parent; `finish` wires parents and validates the structure.
pub struct GameTreeBuilder {
    nodes: Vec<Node>,
    infosets: [Vec<Infoset>; 2],
}

impl GameTreeBuilder {
    pub fn new() -> Self {
        GameTreeBuilder {
            nodes: Vec::new(),
            infosets: [Vec::new(), Vec::new()],
        }
    }

    pub fn add_infoset(&mut self, player: Player, actions: Vec<String>) -> InfosetId {
        let list = &mut self.infosets[player.index()];
        list.push(Infoset {
            player,
            actions,
            nodes: Vec::new(),
        });
        (list.len() - 1) as InfosetId
    }

    pub fn add_leaf(&mut self, u1: f64, u2: f64) -> NodeId {
        self.nodes.push(Node {
            kind: NodeKind::Leaf { payoffs: [u1, u2] },
            parent: None,
        });
        (self.nodes.len() - 1) as NodeId
    }

    pub fn add_decision(
        &mut self,
        player: Player,
        infoset: InfosetId,
        children: Vec<NodeId>,
    ) -> Result<NodeId> {
        let id = self.nodes.len() as NodeId;
        let is = self.infosets[player.index()]
            .get_mut(infoset as usize)
            .ok_or_else(|| structure(format!("node {id}: unknown infoset {infoset}")))?;
        if is.actions.len() != children.len() {
            return Err(structure(format!(
                "node {id}: {} children but infoset {infoset} has {} actions",
                children.len(),
                is.actions.len()
            )));
        }
        is.nodes.push(id);
        self.nodes.push(Node {
            kind: NodeKind::Decision {
                player,
                infoset,
                children,
            },
            parent: None,
        });
        Ok(id)
    }

    pub fn finish(mut self, root: NodeId) -> Result<GameTree> {
        let n = self.nodes.len();
        if root as usize >= n {
            return Err(structure(format!("root {root} out of range")));
        }
        // Wire parents; every node must be claimed exactly once.
        let mut parent: Vec<Option<NodeId>> = vec![None; n];
        for (id, node) in self.nodes.iter().enumerate() {
            if let NodeKind::Decision { ref children, .. } = node.kind {
                for &c in children {
                    if c as usize >= n {
                        return Err(structure(format!("node {id}: unknown child {c}")));
                    }
                    if c == root {
                        return Err(structure(format!("node {id}: root {c} claimed as child")));
                    }
                    if parent[c as usize].is_some() {
                        return Err(structure(format!("node {c}: duplicate child link")));
                    }
                    parent[c as usize] = Some(id as NodeId);
                }
            }
        }
        for (id, p) in parent.iter().enumerate() {
            if id as NodeId != root && p.is_none() {
                return Err(structure(format!("node {id}: orphan (no parent)")));
            }
        }
        for (id, p) in parent.iter().enumerate() {
            self.nodes[id].parent = *p;
        }

        // Iterative DFS for preorder stamps; also detects unreachable nodes
        // (impossible once parents are total, but cheap to confirm).
        let mut dfs_in = vec![u32::MAX; n];
        let mut dfs_out = vec![0u32; n];
        let mut order = Vec::with_capacity(n);
        let mut clock = 0u32;
        let mut stack: Vec<(NodeId, bool)> = vec![(root, false)];
        while let Some((id, exit)) = stack.pop() {
            if exit {
                dfs_out[id as usize] = clock;
                continue;
            }
            if dfs_in[id as usize] != u32::MAX {
                return Err(structure(format!("node {id}: cycle detected")));
            }
            dfs_in[id as usize] = clock;
            clock += 1;
            order.push(id);
            stack.push((id, true));
            if let NodeKind::Decision { ref children, .. } = self.nodes[id as usize].kind {
                for &c in children.iter().rev() {
                    stack.push((c, false));
                }
            }
        }
        if order.len() != n {
            return Err(structure("unreachable nodes present".to_string()));
        }

        Ok(GameTree {
            nodes: self.nodes,
            root,
            infosets: self.infosets,
            dfs_in,
            dfs_out,
            dfs_order: order,
        })
    }
}

impl Default for GameTreeBuilder {
    fn default() -> Self {
        Self::new()
    }
}

/// Which perfect-recall condition a node pair violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallCondition {
    /// Descendants of two distinct same-player infosets share an infoset.
    DistinctInfosetsMerged,
    /// Descendants reached through distinct actions of one infoset share
    /// an infoset.
    DistinctActionsMerged,
}

#[derive(Debug, Clone)]
pub struct RecallViolation {
    pub player: Player,
    pub infoset: InfosetId,
    pub nodes: (NodeId, NodeId),
    pub condition: RecallCondition,
}

/// Checks perfect recall for both players.
///
/// Two nodes of one infoset must be reached by the same sequence of own
/// (infoset, action) pairs. Every offending pair is reported, classified
/// by the first position where their own-histories differ.
pub fn validate_perfect_recall(tree: &GameTree) -> Vec<RecallViolation> {
    let mut out = Vec::new();
    for player in Player::BOTH {
        for (iid, infoset) in tree.infosets(player).iter().enumerate() {
            let hists: Vec<Vec<(InfosetId, usize)>> = infoset
                .nodes
                .iter()
                .map(|&nid| tree.own_history(player, nid))
                .collect();
            for a in 0..hists.len() {
                for b in (a + 1)..hists.len() {
                    if hists[a] == hists[b] {
                        continue;
                    }
                    let condition = classify_divergence(&hists[a], &hists[b]);
                    out.push(RecallViolation {
                        player,
                        infoset: iid as InfosetId,
                        nodes: (infoset.nodes[a], infoset.nodes[b]),
                        condition,
                    });
                }
            }
        }
    }
    out
}

fn classify_divergence(a: &[(InfosetId, usize)], b: &[(InfosetId, usize)]) -> RecallCondition {
    for (x, y) in a.iter().zip(b.iter()) {
        if x.0 != y.0 {
            return RecallCondition::DistinctInfosetsMerged;
        }
        if x.1 != y.1 {
            return RecallCondition::DistinctActionsMerged;
        }
    }
    // One history is a strict prefix of the other: the longer one visited
    // an extra own infoset, which the shorter one cannot distinguish.
    RecallCondition::DistinctInfosetsMerged
}

pub mod format {
    //! Line-oriented text format for game trees.
    //!
    //! ```text
    //! efg 2p-nochance v1
    //! node <id> player=<1|2> infoset=<pid>:<iid> actions=<a1,a2,...> children=<id1,id2,...>
    //! leaf <id> u1=<float> u2=<float>
    //! root <id>
    //! ```
    //!
    //! Only players 1 and 2 are accepted; anything else is rejected with
    //! the offending line number.

    use super::*;
    use std::io::{BufRead, BufReader, Read, Write};

    pub const HEADER: &str = "efg 2p-nochance v1";

    pub fn write_game<W: Write>(tree: &GameTree, mut w: W) -> Result<()> {
        writeln!(w, "{HEADER}")?;
        // Canonical ids: DFS order for nodes, first DFS appearance for
        // infosets, so saving is stable regardless of build order.
        let mut rank = vec![0u32; tree.num_nodes()];
        for (r, &id) in tree.dfs_order().iter().enumerate() {
            rank[id as usize] = r as u32;
        }
        let mut infoset_rank: [HashMap<InfosetId, u32>; 2] = [HashMap::new(), HashMap::new()];
        for &id in tree.dfs_order() {
            if let NodeKind::Decision { player, infoset, .. } = tree.node(id).kind {
                let map = &mut infoset_rank[player.index()];
                let next = map.len() as u32;
                map.entry(infoset).or_insert(next);
            }
        }
        for &id in tree.dfs_order() {
            match tree.node(id).kind {
                NodeKind::Decision {
                    player,
                    infoset,
                    ref children,
                } => {
                    let actions = tree.infoset(player, infoset).actions.join(",");
                    let kids: Vec<String> = children
                        .iter()
                        .map(|&c| rank[c as usize].to_string())
                        .collect();
                    writeln!(
                        w,
                        "node {} player={} infoset={}:{} actions={} children={}",
                        rank[id as usize],
                        player.one_based(),
                        player.one_based(),
                        infoset_rank[player.index()][&infoset],
                        actions,
                        kids.join(",")
                    )?;
                }
                NodeKind::Leaf { payoffs } => {
                    writeln!(
                        w,
                        "leaf {} u1={:?} u2={:?}",
                        rank[id as usize], payoffs[0], payoffs[1]
                    )?;
                }
            }
        }
        writeln!(w, "root {}", rank[tree.root() as usize])?;
        Ok(())
    }

    struct RawNode {
        line: usize,
        player: Player,
        infoset: (u32, u32),
        actions: Vec<String>,
        children: Vec<u32>,
    }

    pub fn read_game<R: Read>(r: R) -> Result<GameTree> {
        let reader = BufReader::new(r);
        let mut decisions: HashMap<u32, RawNode> = HashMap::new();
        let mut leaves: HashMap<u32, (usize, f64, f64)> = HashMap::new();
        let mut root: Option<u32> = None;
        let mut saw_header = false;

        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !saw_header {
                if line != HEADER {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("expected header `{HEADER}`"),
                    });
                }
                saw_header = true;
                continue;
            }
            let mut tokens = line.split_whitespace();
            match tokens.next() {
                Some("node") => {
                    let id = parse_id(tokens.next(), lineno)?;
                    let mut player = None;
                    let mut infoset = None;
                    let mut actions = None;
                    let mut children = None;
                    for tok in tokens {
                        let (key, value) = tok.split_once('=').ok_or_else(|| Error::Parse {
                            line: lineno,
                            message: format!("malformed field `{tok}`"),
                        })?;
                        match key {
                            "player" => {
                                let v: u32 = value.parse().map_err(|_| Error::Parse {
                                    line: lineno,
                                    message: format!("bad player `{value}`"),
                                })?;
                                player =
                                    Some(Player::from_one_based(v).ok_or_else(|| Error::Parse {
                                        line: lineno,
                                        message: format!(
                                            "player {v} not allowed; only players 1 and 2"
                                        ),
                                    })?);
                            }
                            "infoset" => {
                                let (p, i) =
                                    value.split_once(':').ok_or_else(|| Error::Parse {
                                        line: lineno,
                                        message: format!("bad infoset `{value}`"),
                                    })?;
                                let p: u32 = p.parse().map_err(|_| Error::Parse {
                                    line: lineno,
                                    message: format!("bad infoset player `{value}`"),
                                })?;
                                let i: u32 = i.parse().map_err(|_| Error::Parse {
                                    line: lineno,
                                    message: format!("bad infoset id `{value}`"),
                                })?;
                                infoset = Some((p, i));
                            }
                            "actions" => {
                                actions =
                                    Some(value.split(',').map(|s| s.to_string()).collect::<Vec<_>>())
                            }
                            "children" => {
                                let mut ids = Vec::new();
                                for c in value.split(',') {
                                    ids.push(c.parse::<u32>().map_err(|_| Error::Parse {
                                        line: lineno,
                                        message: format!("bad child id `{c}`"),
                                    })?);
                                }
                                children = Some(ids);
                            }
                            _ => {
                                return Err(Error::Parse {
                                    line: lineno,
                                    message: format!("unknown field `{key}`"),
                                })
                            }
                        }
                    }
                    let (player, infoset, actions, children) =
                        match (player, infoset, actions, children) {
                            (Some(p), Some(i), Some(a), Some(c)) => (p, i, a, c),
                            _ => {
                                return Err(Error::Parse {
                                    line: lineno,
                                    message: "node line missing a field".to_string(),
                                })
                            }
                        };
                    if infoset.0 != player.one_based() {
                        return Err(Error::Parse {
                            line: lineno,
                            message: "infoset owner differs from node player".to_string(),
                        });
                    }
                    if actions.len() != children.len() {
                        return Err(Error::Parse {
                            line: lineno,
                            message: "actions/children length mismatch".to_string(),
                        });
                    }
                    if decisions
                        .insert(
                            id,
                            RawNode {
                                line: lineno,
                                player,
                                infoset,
                                actions,
                                children,
                            },
                        )
                        .is_some()
                        || leaves.contains_key(&id)
                    {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("duplicate node id {id}"),
                        });
                    }
                }
                Some("leaf") => {
                    let id = parse_id(tokens.next(), lineno)?;
                    let mut u1 = None;
                    let mut u2 = None;
                    for tok in tokens {
                        let (key, value) = tok.split_once('=').ok_or_else(|| Error::Parse {
                            line: lineno,
                            message: format!("malformed field `{tok}`"),
                        })?;
                        let v: f64 = value.parse().map_err(|_| Error::Parse {
                            line: lineno,
                            message: format!("bad payoff `{value}`"),
                        })?;
                        match key {
                            "u1" => u1 = Some(v),
                            "u2" => u2 = Some(v),
                            _ => {
                                return Err(Error::Parse {
                                    line: lineno,
                                    message: format!("unknown field `{key}`"),
                                })
                            }
                        }
                    }
                    let (u1, u2) = match (u1, u2) {
                        (Some(a), Some(b)) => (a, b),
                        _ => {
                            return Err(Error::Parse {
                                line: lineno,
                                message: "leaf line missing a payoff".to_string(),
                            })
                        }
                    };
                    if leaves.insert(id, (lineno, u1, u2)).is_some() || decisions.contains_key(&id)
                    {
                        return Err(Error::Parse {
                            line: lineno,
                            message: format!("duplicate node id {id}"),
                        });
                    }
                }
                Some("root") => {
                    root = Some(parse_id(tokens.next(), lineno)?);
                }
                Some(other) => {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("unknown record `{other}`"),
                    })
                }
                None => unreachable!(),
            }
        }

        if !saw_header {
            return Err(Error::Parse {
                line: 0,
                message: "empty file".to_string(),
            });
        }
        let root = root.ok_or(Error::Parse {
            line: 0,
            message: "missing root line".to_string(),
        })?;

        // Remap to dense ids; register infosets on first sight and check
        // action consistency across members.
        let mut builder = GameTreeBuilder::new();
        let mut node_map: HashMap<u32, NodeId> = HashMap::new();
        let mut infoset_map: HashMap<(u32, u32), InfosetId> = HashMap::new();

        // Leaves first (no dependencies), then decisions in an order where
        // children are already mapped.
        for (&id, &(_, u1, u2)) in &leaves {
            let nid = builder.add_leaf(u1, u2);
            node_map.insert(id, nid);
        }
        let mut pending: Vec<u32> = decisions.keys().copied().collect();
        pending.sort_unstable();
        let mut progress = true;
        while !pending.is_empty() && progress {
            progress = false;
            pending.retain(|&id| {
                let raw = &decisions[&id];
                if !raw.children.iter().all(|c| node_map.contains_key(c)) {
                    return true;
                }
                let iid = match infoset_map.get(&raw.infoset) {
                    Some(&iid) => {
                        let existing = builder.infosets[raw.player.index()][iid as usize]
                            .actions
                            .clone();
                        if existing != raw.actions {
                            // Error is reported after the loop via a marker.
                            infoset_map.insert((u32::MAX, u32::MAX), iid);
                            return false;
                        }
                        iid
                    }
                    None => {
                        let iid = builder.add_infoset(raw.player, raw.actions.clone());
                        infoset_map.insert(raw.infoset, iid);
                        iid
                    }
                };
                let children: Vec<NodeId> =
                    raw.children.iter().map(|c| node_map[c]).collect();
                match builder.add_decision(raw.player, iid, children) {
                    Ok(nid) => {
                        node_map.insert(id, nid);
                        progress = true;
                        false
                    }
                    Err(_) => true,
                }
            });
            if infoset_map.contains_key(&(u32::MAX, u32::MAX)) {
                return Err(Error::Parse {
                    line: 0,
                    message: "infoset members disagree on action labels".to_string(),
                });
            }
        }
        if !pending.is_empty() {
            let raw = &decisions[&pending[0]];
            return Err(Error::Parse {
                line: raw.line,
                message: format!("node {} has missing or cyclic children", pending[0]),
            });
        }
        let root_id = *node_map.get(&root).ok_or(Error::Parse {
            line: 0,
            message: format!("root references unknown node {root}"),
        })?;
        builder.finish(root_id)
    }

    fn parse_id(tok: Option<&str>, line: usize) -> Result<u32> {
        tok.and_then(|t| t.parse::<u32>().ok())
            .ok_or(Error::Parse {
                line,
                message: "missing or malformed node id".to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_only() -> GameTree {
        let mut b = GameTreeBuilder::new();
        let l = b.add_leaf(0.0, 0.0);
        b.finish(l).unwrap()
    }

    #[test]
    fn single_leaf_game_is_valid() {
        let t = leaf_only();
        assert_eq!(t.num_nodes(), 1);
        assert!(validate_perfect_recall(&t).is_empty());
    }

    #[test]
    fn duplicate_child_rejected() {
        let mut b = GameTreeBuilder::new();
        let l = b.add_leaf(0.0, 0.0);
        let i = b.add_infoset(Player::P1, vec!["a".into(), "b".into()]);
        b.add_decision(Player::P1, i, vec![l, l]).unwrap();
        let err = b.finish(1).unwrap_err();
        assert!(err.to_string().contains("duplicate child"), "{err}");
    }

    #[test]
    fn orphan_rejected() {
        let mut b = GameTreeBuilder::new();
        let _stray = b.add_leaf(0.0, 0.0);
        let l = b.add_leaf(1.0, 1.0);
        let i = b.add_infoset(Player::P1, vec!["a".into()]);
        let root = b.add_decision(Player::P1, i, vec![l]).unwrap();
        let err = b.finish(root).unwrap_err();
        assert!(err.to_string().contains("orphan"), "{err}");
    }

    /// Three-level game where P2's second infoset merges descendants of two
    /// distinct P2 infosets: exactly one condition-(i) violation.
    fn merged_infoset_game() -> GameTree {
        let mut b = GameTreeBuilder::new();
        let i_root = b.add_infoset(Player::P1, vec!["l".into(), "r".into()]);
        let i_left = b.add_infoset(Player::P2, vec!["a".into()]);
        let i_right = b.add_infoset(Player::P2, vec!["a".into()]);
        let i_merged = b.add_infoset(Player::P2, vec!["x".into(), "y".into()]);

        let mk_bottom = |b: &mut GameTreeBuilder| {
            let l1 = b.add_leaf(0.0, 0.0);
            let l2 = b.add_leaf(0.0, 0.0);
            b.add_decision(Player::P2, i_merged, vec![l1, l2]).unwrap()
        };
        let bottom_l = mk_bottom(&mut b);
        let bottom_r = mk_bottom(&mut b);
        let mid_l = b.add_decision(Player::P2, i_left, vec![bottom_l]).unwrap();
        let mid_r = b.add_decision(Player::P2, i_right, vec![bottom_r]).unwrap();
        let root = b.add_decision(Player::P1, i_root, vec![mid_l, mid_r]).unwrap();
        b.finish(root).unwrap()
    }

    #[test]
    fn merged_infosets_flagged_as_condition_i() {
        let t = merged_infoset_game();
        let v = validate_perfect_recall(&t);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].condition, RecallCondition::DistinctInfosetsMerged);
        assert_eq!(v[0].player, Player::P2);
    }

    /// Literal pairwise check of the two recall conditions, restricted to
    /// same-player descendants. Independent of `own_history`; collects
    /// unordered witness pairs.
    fn brute_force_recall_violations(tree: &GameTree) -> usize {
        use std::collections::HashSet;
        let mut witnesses: HashSet<(NodeId, NodeId)> = HashSet::new();
        let same_infoset = |x: NodeId, y: NodeId, player: Player| -> bool {
            match (&tree.node(x).kind, &tree.node(y).kind) {
                (
                    NodeKind::Decision {
                        player: p1,
                        infoset: i1,
                        ..
                    },
                    NodeKind::Decision {
                        player: p2,
                        infoset: i2,
                        ..
                    },
                ) => *p1 == player && *p2 == player && i1 == i2,
                _ => false,
            }
        };
        let mut record = |s: NodeId, s2: NodeId| {
            witnesses.insert((s.min(s2), s.max(s2)));
        };
        for player in Player::BOTH {
            let infosets = tree.infosets(player);
            // Condition (i): nodes of distinct infosets with strict
            // descendants sharing an infoset.
            for ia in 0..infosets.len() {
                for ib in (ia + 1)..infosets.len() {
                    for &h in &infosets[ia].nodes {
                        for &h2 in &infosets[ib].nodes {
                            for (s, _) in tree.nodes() {
                                for (s2, _) in tree.nodes() {
                                    if s != s2
                                        && tree.is_ancestor(h, s)
                                        && h != s
                                        && tree.is_ancestor(h2, s2)
                                        && h2 != s2
                                        && same_infoset(s, s2, player)
                                    {
                                        record(s, s2);
                                    }
                                }
                            }
                        }
                    }
                }
            }
            // Condition (ii): same infoset, distinct actions, descendants
            // (weakly, from the action-children) sharing an infoset.
            for is in infosets {
                for &h in &is.nodes {
                    for &h2 in &is.nodes {
                        let (c1, c2) = match (&tree.node(h).kind, &tree.node(h2).kind) {
                            (
                                NodeKind::Decision { children: c1, .. },
                                NodeKind::Decision { children: c2, .. },
                            ) => (c1.clone(), c2.clone()),
                            _ => continue,
                        };
                        for (a1, &ha) in c1.iter().enumerate() {
                            for (a2, &ha2) in c2.iter().enumerate() {
                                if a1 == a2 {
                                    continue;
                                }
                                for (s, _) in tree.nodes() {
                                    for (s2, _) in tree.nodes() {
                                        if s != s2
                                            && tree.is_ancestor(ha, s)
                                            && tree.is_ancestor(ha2, s2)
                                            && same_infoset(s, s2, player)
                                        {
                                            record(s, s2);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        witnesses.len()
    }

    #[test]
    fn brute_force_agrees_on_merged_game() {
        let t = merged_infoset_game();
        assert_eq!(brute_force_recall_violations(&t), 1);
        assert_eq!(validate_perfect_recall(&t).len(), 1);
    }

    #[test]
    fn format_round_trip() {
        let t = merged_infoset_game();
        let mut buf = Vec::new();
        format::write_game(&t, &mut buf).unwrap();
        let t2 = format::read_game(&buf[..]).unwrap();
        assert_eq!(t.num_nodes(), t2.num_nodes());
        assert_eq!(t.infosets(Player::P2).len(), t2.infosets(Player::P2).len());
        let mut buf2 = Vec::new();
        format::write_game(&t2, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn third_player_rejected_with_line() {
        let text = "efg 2p-nochance v1\nleaf 1 u1=0 u2=0\nnode 0 player=3 infoset=3:0 actions=a children=1\nroot 0\n";
        let err = format::read_game(text.as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 3);
                assert!(message.contains("player 3"));
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
