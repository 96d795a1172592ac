//! Benchmark game generators and game-file I/O.

use crate::efg::{format, GameTree, GameTreeBuilder, InfosetId, NodeId, NodeKind, Player};
use crate::error::{invalid, Error, Result};
use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

/// Leaf keys of the signaling game: P1's terminal sequence label paired
/// with P2's matching response label.
pub const SIGNALING_LEAF_KEYS: [(&str, &str); 8] = [
    ("XG", "lx"),
    ("XG", "rx"),
    ("YG", "ly"),
    ("YG", "ry"),
    ("XB", "lx"),
    ("XB", "rx"),
    ("YB", "ly"),
    ("YB", "ry"),
];

/// Helper for building the signaling payoff map from literals.
pub fn signaling_payoffs(entries: &[((&str, &str), (f64, f64))]) -> HashMap<(String, String), (f64, f64)> {
    entries
        .iter()
        .map(|&((a, b), u)| ((a.to_string(), b.to_string()), u))
        .collect()
}

/// Payoffs that are zero on every leaf.
pub fn signaling_zero_payoffs() -> HashMap<(String, String), (f64, f64)> {
    signaling_payoffs(&SIGNALING_LEAF_KEYS.map(|k| (k, (0.0, 0.0))))
}

/// Two-signal game: P1 picks a signal (G/B) and then a terminal move; P2
/// responds knowing the move kind (X or Y) but not the signal. The two
/// P2 infosets root the game's two natural subgames.
pub fn build_signaling_game(
    payoffs: &HashMap<(String, String), (f64, f64)>,
) -> Result<GameTree> {
    let mut missing = Vec::new();
    for (a, b) in SIGNALING_LEAF_KEYS {
        if !payoffs.contains_key(&(a.to_string(), b.to_string())) {
            missing.push(format!("({a},{b})"));
        }
    }
    let extra: Vec<String> = payoffs
        .keys()
        .filter(|(a, b)| {
            !SIGNALING_LEAF_KEYS
                .iter()
                .any(|&(x, y)| x == a.as_str() && y == b.as_str())
        })
        .map(|(a, b)| format!("({a},{b})"))
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(invalid(format!(
            "signaling payoffs: missing keys [{}], extra keys [{}]",
            missing.join(" "),
            extra.join(" ")
        )));
    }
    let u = |a: &str, b: &str| payoffs[&(a.to_string(), b.to_string())];

    let mut builder = GameTreeBuilder::new();
    let i_root = builder.add_infoset(Player::P1, vec!["G".into(), "B".into()]);
    let i_g = builder.add_infoset(Player::P1, vec!["XG".into(), "YG".into()]);
    let i_b = builder.add_infoset(Player::P1, vec!["XB".into(), "YB".into()]);
    let i_x = builder.add_infoset(Player::P2, vec!["lx".into(), "rx".into()]);
    let i_y = builder.add_infoset(Player::P2, vec!["ly".into(), "ry".into()]);

    let p2_node = |b: &mut GameTreeBuilder, infoset, keys: [(&str, &str); 2]| {
        let l0 = {
            let (u1, u2) = u(keys[0].0, keys[0].1);
            b.add_leaf(u1, u2)
        };
        let l1 = {
            let (u1, u2) = u(keys[1].0, keys[1].1);
            b.add_leaf(u1, u2)
        };
        b.add_decision(Player::P2, infoset, vec![l0, l1]).unwrap()
    };
    let xg = p2_node(&mut builder, i_x, [("XG", "lx"), ("XG", "rx")]);
    let yg = p2_node(&mut builder, i_y, [("YG", "ly"), ("YG", "ry")]);
    let xb = p2_node(&mut builder, i_x, [("XB", "lx"), ("XB", "rx")]);
    let yb = p2_node(&mut builder, i_y, [("YB", "ly"), ("YB", "ry")]);

    let n_g = builder.add_decision(Player::P1, i_g, vec![xg, yg])?;
    let n_b = builder.add_decision(Player::P1, i_b, vec![xb, yb])?;
    let root = builder.add_decision(Player::P1, i_root, vec![n_g, n_b])?;
    builder.finish(root)
}

/// The two shaded regions of the signaling game: everything at or below
/// P2's X infoset, and everything at or below P2's Y infoset.
pub fn signaling_subgame_node_sets(tree: &GameTree) -> [Vec<NodeId>; 2] {
    let mut sets = [Vec::new(), Vec::new()];
    for (j, infoset) in tree.infosets(Player::P2).iter().enumerate() {
        for &n in &infoset.nodes {
            sets[j].push(n);
            if let NodeKind::Decision { ref children, .. } = tree.node(n).kind {
                sets[j].extend(children.iter().copied());
            }
        }
        sets[j].sort_unstable();
    }
    sets
}

/// Battleship on a `width x height` grid with one 1-by-`ship_len` ship per
/// player and `turns` firing rounds (P1 then P2 within each round).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BattleshipConfig {
    pub width: usize,
    pub height: usize,
    pub ship_len: usize,
    /// Firing rounds; each player fires once per round, P1 first.
    pub turns: usize,
    /// Penalty to the owner of a destroyed ship. The destroyer always
    /// scores 1.
    pub gamma: f64,
}

impl BattleshipConfig {
    /// 1-by-n grid, Table-style.
    pub fn line(n: usize, turns: usize, gamma: f64) -> Self {
        BattleshipConfig {
            width: n,
            height: 1,
            ship_len: 1,
            turns,
            gamma,
        }
    }

    pub fn tiles(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.ship_len < 1 || self.tiles() < self.ship_len {
            return Err(invalid("battleship: need grid_tiles >= ship_len >= 1"));
        }
        if self.turns < 1 {
            return Err(invalid("battleship: need turns >= 1"));
        }
        if self.turns > self.tiles() {
            return Err(invalid(
                "battleship: turns exceed grid size (players never refire a tile)",
            ));
        }
        if !(self.gamma >= 0.0) {
            return Err(invalid("battleship: need gamma >= 0"));
        }
        if self.placements().is_empty() {
            return Err(invalid("battleship: ship does not fit on the grid"));
        }
        Ok(())
    }

    /// All axis-aligned placements as tile bitmasks, in label order.
    pub fn placements(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let (w, h, m) = (self.width, self.height, self.ship_len);
        if w >= m {
            for row in 0..h {
                for col in 0..=(w - m) {
                    let mut mask = 0u64;
                    for k in 0..m {
                        mask |= 1 << (row * w + col + k);
                    }
                    out.push(mask);
                }
            }
        }
        if m > 1 && h >= m {
            for col in 0..w {
                for row in 0..=(h - m) {
                    let mut mask = 0u64;
                    for k in 0..m {
                        mask |= 1 << ((row + k) * w + col);
                    }
                    out.push(mask);
                }
            }
        }
        out
    }

    pub fn placement_labels(&self) -> Vec<String> {
        let (w, h, m) = (self.width, self.height, self.ship_len);
        let mut out = Vec::new();
        if w >= m {
            for row in 0..h {
                for col in 0..=(w - m) {
                    out.push(format!("h{}", row * w + col));
                }
            }
        }
        if m > 1 && h >= m {
            for col in 0..w {
                for row in 0..=(h - m) {
                    out.push(format!("v{}", row * w + col));
                }
            }
        }
        out
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct FireKey {
    player: Player,
    placement: usize,
    /// Own shots in order, with hit flags.
    own: Vec<(u8, bool)>,
    /// Opponent shots in order.
    seen: Vec<u8>,
}

struct BattleshipBuilder<'a> {
    cfg: &'a BattleshipConfig,
    placements: Vec<u64>,
    builder: GameTreeBuilder,
    fire_infosets: HashMap<FireKey, InfosetId>,
}

#[derive(Clone)]
struct PlayState {
    p1_placement: usize,
    p2_placement: usize,
    /// Fired tiles in order, alternating P1, P2, P1, ...
    shots: Vec<u8>,
}

impl PlayState {
    fn shots_of(&self, player: Player) -> impl Iterator<Item = u8> + '_ {
        let parity = player.index();
        self.shots
            .iter()
            .enumerate()
            .filter(move |(i, _)| i % 2 == parity)
            .map(|(_, &t)| t)
    }

    fn fired_mask(&self, player: Player) -> u64 {
        self.shots_of(player).fold(0, |m, t| m | (1 << t))
    }
}

impl<'a> BattleshipBuilder<'a> {
    fn ship(&self, player: Player, state: &PlayState) -> u64 {
        match player {
            Player::P1 => self.placements[state.p1_placement],
            Player::P2 => self.placements[state.p2_placement],
        }
    }

    fn destroyed(&self, victim: Player, state: &PlayState) -> bool {
        let shooter = victim.opponent();
        let ship = self.ship(victim, state);
        ship & !state.fired_mask(shooter) == 0
    }

    fn fire_key(&self, player: Player, state: &PlayState) -> FireKey {
        let opp_ship = self.ship(player.opponent(), state);
        FireKey {
            player,
            placement: match player {
                Player::P1 => state.p1_placement,
                Player::P2 => state.p2_placement,
            },
            own: state
                .shots_of(player)
                .map(|t| (t, opp_ship & (1 << t) != 0))
                .collect(),
            seen: state.shots_of(player.opponent()).collect(),
        }
    }

    /// Builds the subtree for the state where `state.shots` shots have been
    /// fired and nobody is destroyed yet. Returns the node id.
    fn build_firing(&mut self, state: &PlayState) -> NodeId {
        let shot_no = state.shots.len();
        if shot_no == 2 * self.cfg.turns {
            return self.builder.add_leaf(0.0, 0.0);
        }
        let shooter = if shot_no % 2 == 0 { Player::P1 } else { Player::P2 };
        let victim = shooter.opponent();
        let own_fired = state.fired_mask(shooter);
        let tiles: Vec<u8> = (0..self.cfg.tiles() as u8)
            .filter(|&t| own_fired & (1 << t) == 0)
            .collect();
        debug_assert!(!tiles.is_empty());

        let mut children = Vec::with_capacity(tiles.len());
        for &t in &tiles {
            let mut next = state.clone();
            next.shots.push(t);
            let child = if self.destroyed(victim, &next) {
                let g = self.cfg.gamma;
                match shooter {
                    Player::P1 => self.builder.add_leaf(1.0, -g),
                    Player::P2 => self.builder.add_leaf(-g, 1.0),
                }
            } else {
                self.build_firing(&next)
            };
            children.push(child);
        }

        let key = self.fire_key(shooter, state);
        let infoset = match self.fire_infosets.get(&key) {
            Some(&i) => i,
            None => {
                let labels = tiles.iter().map(|t| t.to_string()).collect();
                let i = self.builder.add_infoset(shooter, labels);
                self.fire_infosets.insert(key, i);
                i
            }
        };
        self.builder.add_decision(shooter, infoset, children).unwrap()
    }
}

pub fn build_battleship(cfg: &BattleshipConfig) -> Result<GameTree> {
    cfg.validate()?;
    let placements = cfg.placements();
    let labels = cfg.placement_labels();
    let mut bb = BattleshipBuilder {
        cfg,
        placements: placements.clone(),
        builder: GameTreeBuilder::new(),
        fire_infosets: HashMap::new(),
    };

    let i_p2_place = bb.builder.add_infoset(Player::P2, labels.clone());
    let mut p2_nodes = Vec::with_capacity(placements.len());
    for p1 in 0..placements.len() {
        let mut children = Vec::with_capacity(placements.len());
        for p2 in 0..placements.len() {
            let state = PlayState {
                p1_placement: p1,
                p2_placement: p2,
                shots: Vec::new(),
            };
            children.push(bb.build_firing(&state));
        }
        p2_nodes.push(bb.builder.add_decision(Player::P2, i_p2_place, children)?);
    }
    let i_p1_place = bb.builder.add_infoset(Player::P1, labels);
    let root = bb.builder.add_decision(Player::P1, i_p1_place, p2_nodes)?;
    bb.builder.finish(root)
}

/// Subgame node sets for battleship keyed by the public shot history of
/// the first `t_prime` rounds. Each subgame holds one surviving start-of-
/// round decision frontier and everything below it.
pub fn battleship_subgame_node_sets(
    tree: &GameTree,
    cfg: &BattleshipConfig,
    t_prime: usize,
) -> Result<Vec<Vec<NodeId>>> {
    if t_prime < 1 || t_prime >= cfg.turns {
        return Err(invalid("battleship subgames: need 1 <= t_prime < turns"));
    }
    let mut groups: BTreeMap<Vec<u8>, Vec<NodeId>> = BTreeMap::new();
    // DFS tracking the fired-tile path; stops at the round t_prime+1 frontier.
    let mut stack: Vec<(NodeId, Vec<u8>)> = vec![(tree.root(), Vec::new())];
    while let Some((id, shots)) = stack.pop() {
        if let NodeKind::Decision {
            player,
            infoset,
            ref children,
        } = tree.node(id).kind
        {
            let actions = &tree.infoset(player, infoset).actions;
            let is_placement = actions[0].starts_with('h') || actions[0].starts_with('v');
            for (a, &c) in children.iter().enumerate() {
                let mut next = shots.clone();
                if !is_placement {
                    let tile: u8 = actions[a].parse().map_err(|_| {
                        Error::Structure("battleship action label is not a tile".into())
                    })?;
                    next.push(tile);
                }
                if next.len() == 2 * t_prime {
                    // `c` starts round t_prime+1 if the game is still live.
                    if !tree.node(c).is_leaf() {
                        collect_subtree(tree, c, groups.entry(next.clone()).or_default());
                    }
                } else {
                    stack.push((c, next));
                }
            }
        }
    }
    Ok(groups.into_values().collect())
}

fn collect_subtree(tree: &GameTree, root: NodeId, out: &mut Vec<NodeId>) {
    let mut stack = vec![root];
    while let Some(id) = stack.pop() {
        out.push(id);
        if let NodeKind::Decision { ref children, .. } = tree.node(id).kind {
            stack.extend(children.iter().copied());
        }
    }
}

pub fn save_game(tree: &GameTree, path: impl AsRef<Path>) -> Result<()> {
    let f = File::create(path)?;
    format::write_game(tree, BufWriter::new(f))
}

pub fn load_game(path: impl AsRef<Path>) -> Result<GameTree> {
    let f = File::open(path)?;
    format::read_game(BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::efg::validate_perfect_recall;
    use crate::seq::{build_sequence_index, EMPTY_SEQ};
    use std::collections::HashSet;

    #[test]
    fn signaling_structure() {
        let t = build_signaling_game(&signaling_zero_payoffs()).unwrap();
        assert!(validate_perfect_recall(&t).is_empty());
        let idx = build_sequence_index(&t).unwrap();
        assert_eq!(idx.num_seqs(Player::P1), 7);
        assert_eq!(idx.num_seqs(Player::P2), 5);
        assert_eq!(idx.leaves().len(), 8);
        assert_eq!(t.infosets(Player::P2).len(), 2);
    }

    #[test]
    fn signaling_wrong_keys_listed() {
        let mut p = signaling_zero_payoffs();
        p.remove(&("XG".to_string(), "lx".to_string()));
        p.insert(("XG".to_string(), "ly".to_string()), (0.0, 0.0));
        let err = build_signaling_game(&p).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("(XG,lx)") && msg.contains("(XG,ly)"), "{msg}");
    }

    #[test]
    fn whole_board_ship_forced_win() {
        // 1x1 grid: P1's first shot destroys P2 immediately.
        let cfg = BattleshipConfig {
            width: 1,
            height: 1,
            ship_len: 1,
            turns: 1,
            gamma: 2.0,
        };
        let t = build_battleship(&cfg).unwrap();
        let payoffs: HashSet<_> = t
            .nodes()
            .filter(|(_, n)| n.is_leaf())
            .map(|(id, _)| {
                let p = t.leaf_payoffs(id);
                (p[0] as i64, p[1] as i64)
            })
            .collect();
        assert_eq!(payoffs, HashSet::from([(1, -2)]));

        // 1x2 grid with a 2-tile ship: P1 completes the ship on round 2
        // before P2's second shot.
        let cfg = BattleshipConfig {
            width: 2,
            height: 1,
            ship_len: 2,
            turns: 2,
            gamma: 5.0,
        };
        let t = build_battleship(&cfg).unwrap();
        let payoffs: HashSet<_> = t
            .nodes()
            .filter(|(_, n)| n.is_leaf())
            .map(|(id, _)| {
                let p = t.leaf_payoffs(id);
                (p[0] as i64, p[1] as i64)
            })
            .collect();
        assert_eq!(payoffs, HashSet::from([(1, -5)]));
    }

    /// Independent playout enumeration following the written rules, never
    /// touching the tree builder.
    fn enumerate_playouts(cfg: &BattleshipConfig) -> (usize, usize) {
        let placements = cfg.placements();
        let mut leaves = 0usize;
        let _seq_pairs: HashSet<(usize, Vec<(u8, bool)>, Vec<u8>, u8)> = HashSet::new();

        fn rec(
            cfg: &BattleshipConfig,
            placements: &[u64],
            p1: usize,
            p2: usize,
            shots: &mut Vec<u8>,
            leaves: &mut usize,
            seq_pairs: &mut HashSet<(usize, Vec<(u8, bool)>, Vec<u8>, u8)>,
        ) {
            let k = shots.len();
            if k == 2 * cfg.turns {
                *leaves += 1;
                return;
            }
            let shooter_is_p1 = k % 2 == 0;
            let (own, opp_ship, own_place) = if shooter_is_p1 {
                (0usize, placements[p2], p1)
            } else {
                (1usize, placements[p1], p2)
            };
            let own_shots: Vec<u8> = shots
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 == own)
                .map(|(_, &t)| t)
                .collect();
            let seen: Vec<u8> = shots
                .iter()
                .enumerate()
                .filter(|(i, _)| i % 2 != own)
                .map(|(_, &t)| t)
                .collect();
            let own_hits: Vec<(u8, bool)> = own_shots
                .iter()
                .map(|&t| (t, opp_ship & (1 << t) != 0))
                .collect();
            for t in 0..cfg.tiles() as u8 {
                if own_shots.contains(&t) {
                    continue;
                }
                seq_pairs.insert((own_place, own_hits.clone(), seen.clone(), t));
                shots.push(t);
                let fired: u64 = own_shots.iter().fold(1u64 << t, |m, &s| m | (1 << s));
                if opp_ship & !fired == 0 {
                    *leaves += 1;
                } else {
                    rec(cfg, placements, p1, p2, shots, leaves, seq_pairs);
                }
                shots.pop();
            }
        }

        let mut fire_seqs = HashSet::new();
        for p1 in 0..placements.len() {
            for p2 in 0..placements.len() {
                rec(
                    cfg,
                    &placements,
                    p1,
                    p2,
                    &mut Vec::new(),
                    &mut leaves,
                    &mut fire_seqs,
                );
            }
        }
        // Sequences per player: empty + placements + firing sequences.
        // The firing set above mixes both players; split by parity of
        // own+seen shot counts: shooter fired len(own) shots and P1 moves
        // when own == seen.
        let p1_fire = fire_seqs
            .iter()
            .filter(|(_, own, seen, _)| own.len() == seen.len())
            .count();
        let p2_fire = fire_seqs.len() - p1_fire;
        let s1 = 1 + placements.len() + p1_fire;
        let s2 = 1 + placements.len() + p2_fire;
        (leaves, s1 + s2)
    }

    #[test]
    fn battleship_counts_match_independent_enumeration() {
        let cfg = BattleshipConfig::line(3, 2, 2.0);
        let t = build_battleship(&cfg).unwrap();
        assert!(validate_perfect_recall(&t).is_empty());
        let idx = build_sequence_index(&t).unwrap();

        let (leaves, total_seqs) = enumerate_playouts(&cfg);
        assert_eq!(idx.leaves().len(), leaves);
        assert_eq!(
            idx.num_seqs(Player::P1) + idx.num_seqs(Player::P2),
            total_seqs
        );
    }

    #[test]
    fn battleship_payoff_support() {
        let cfg = BattleshipConfig::line(3, 2, 2.0);
        let t = build_battleship(&cfg).unwrap();
        for (id, n) in t.nodes() {
            if n.is_leaf() {
                let p = t.leaf_payoffs(id);
                let ok = p == [1.0, -2.0] || p == [-2.0, 1.0] || p == [0.0, 0.0];
                assert!(ok, "unexpected payoff {p:?}");
            }
        }
    }

    #[test]
    fn battleship_round_trip_preserves_index_sizes() {
        let cfg = BattleshipConfig::line(4, 3, 2.0);
        let t = build_battleship(&cfg).unwrap();
        let dir = std::env::temp_dir().join("efce_test_bs43.efg");
        save_game(&t, &dir).unwrap();
        let t2 = load_game(&dir).unwrap();
        let i1 = build_sequence_index(&t).unwrap();
        let i2 = build_sequence_index(&t2).unwrap();
        for p in Player::BOTH {
            assert_eq!(i1.num_seqs(p), i2.num_seqs(p));
        }
        assert_eq!(i1.leaves().len(), i2.leaves().len());
        std::fs::remove_file(dir).ok();
    }

    /// Tile relabeling yields an isomorphic tree: walk both trees in step,
    /// mapping actions through the permutation, checking payoffs and the
    /// infoset partition.
    #[test]
    fn battleship_location_symmetry() {
        let cfg = BattleshipConfig::line(3, 2, 2.0);
        let t = build_battleship(&cfg).unwrap();
        let perm = [2u8, 0, 1];

        let mut infoset_map: [HashMap<InfosetId, InfosetId>; 2] =
            [HashMap::new(), HashMap::new()];
        let mut stack: Vec<(NodeId, NodeId)> = vec![(t.root(), t.root())];
        while let Some((a, b)) = stack.pop() {
            match (&t.node(a).kind, &t.node(b).kind) {
                (NodeKind::Leaf { payoffs: pa }, NodeKind::Leaf { payoffs: pb }) => {
                    assert_eq!(pa, pb);
                }
                (
                    NodeKind::Decision {
                        player: p_a,
                        infoset: i_a,
                        children: c_a,
                    },
                    NodeKind::Decision {
                        player: p_b,
                        infoset: i_b,
                        children: c_b,
                    },
                ) => {
                    assert_eq!(p_a, p_b);
                    let prev = infoset_map[p_a.index()].insert(*i_a, *i_b);
                    if let Some(prev) = prev {
                        assert_eq!(prev, *i_b, "infoset partition not preserved");
                    }
                    let labels_a = &t.infoset(*p_a, *i_a).actions;
                    let labels_b = &t.infoset(*p_b, *i_b).actions;
                    for (slot, &ca) in c_a.iter().enumerate() {
                        // Map the tile through the permutation; placements
                        // use the h-prefix.
                        let la = &labels_a[slot];
                        let mapped = if let Some(rest) = la.strip_prefix('h') {
                            format!("h{}", perm[rest.parse::<usize>().unwrap()])
                        } else {
                            perm[la.parse::<usize>().unwrap()].to_string()
                        };
                        let slot_b = labels_b
                            .iter()
                            .position(|l| *l == mapped)
                            .expect("permuted action exists");
                        stack.push((ca, c_b[slot_b]));
                    }
                }
                _ => panic!("node kind mismatch"),
            }
        }
    }

    #[test]
    fn battleship_subgame_count() {
        let cfg = BattleshipConfig::line(3, 2, 2.0);
        let t = build_battleship(&cfg).unwrap();
        let sets = battleship_subgame_node_sets(&t, &cfg, 1).unwrap();
        assert_eq!(sets.len(), 9);
    }

    #[test]
    fn root_leaf_sequences() {
        let mut b = GameTreeBuilder::new();
        let l = b.add_leaf(0.0, 0.0);
        let t = b.finish(l).unwrap();
        let idx = build_sequence_index(&t).unwrap();
        assert_eq!(idx.num_seqs(Player::P1), 1);
        assert_eq!(idx.leaf_pair(l), (EMPTY_SEQ, EMPTY_SEQ));
    }
}
