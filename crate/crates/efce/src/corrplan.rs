//! Relevant sequence pairs, correlation plans, and blueprints.
//!
//! A correlation plan is a nonnegative vector indexed by *relevant* pairs
//! of sequences: pairs involving the empty sequence, or pairs whose
//! infosets lie on a common root path. Row and column flow constraints
//! over this checkerboard define the polytope of correlation plans;
//! [`CorrelationPlan::structural_residual`] measures how far a vector is
//! from it.

use crate::efg::{GameTree, InfosetId, Player};
use crate::error::{invalid, Error, Result};
use crate::seq::{
    behavioral_to_sequence_form, BehavioralStrategy, SequenceFormStrategy, SequenceIndex, SeqId,
    EMPTY_SEQ,
};
use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::sync::Arc;

pub type PairId = u32;

/// Answers "do these two infosets lie on a common root path" queries.
pub struct Connectivity {
    /// Per player, per infoset: member (dfs_in, dfs_out) intervals sorted
    /// by entry stamp.
    intervals: [Vec<Vec<(u32, u32)>>; 2],
}

impl Connectivity {
    pub fn new(tree: &GameTree) -> Self {
        let mut intervals: [Vec<Vec<(u32, u32)>>; 2] = [Vec::new(), Vec::new()];
        for player in Player::BOTH {
            let sets = tree
                .infosets(player)
                .iter()
                .map(|is| {
                    let mut v: Vec<(u32, u32)> = is
                        .nodes
                        .iter()
                        .map(|&n| {
                            let lo = tree.dfs_in(n);
                            // Recover the exit stamp through ancestor tests:
                            // store (in, in + subtree) via is_ancestor probes
                            // would be costly; read stamps directly instead.
                            (lo, tree.dfs_out_of(n))
                        })
                        .collect();
                    v.sort_unstable();
                    v
                })
                .collect();
            intervals[player.index()] = sets;
        }
        Connectivity { intervals }
    }

    /// True iff some member of P1's infoset `i1` and some member of P2's
    /// infoset `i2` are on one root path.
    pub fn connected(&self, i1: InfosetId, i2: InfosetId) -> bool {
        let a = &self.intervals[0][i1 as usize];
        let b = &self.intervals[1][i2 as usize];
        Self::one_way(a, b) || Self::one_way(b, a)
    }

    /// Does any interval of `descs` start strictly inside an interval of
    /// `ancs`?
    fn one_way(ancs: &[(u32, u32)], descs: &[(u32, u32)]) -> bool {
        for &(lo, hi) in ancs {
            let at = descs.partition_point(|&(s, _)| s <= lo);
            if let Some(&(s, _)) = descs.get(at) {
                if s < hi {
                    return true;
                }
            }
        }
        false
    }
}

/// Ordered set of relevant sequence pairs with dense ids.
///
/// Pairs are stored row-major: by P1 sequence, then by P2 sequence, both
/// in the canonical ordering of the [`SequenceIndex`].
pub struct RelevantPairSet {
    pairs: Vec<(SeqId, SeqId)>,
    /// CSR rows over P1 sequences; row slices are sorted by P2 sequence.
    row_start: Vec<u32>,
    num_seqs2: usize,
}

impl RelevantPairSet {
    /// Every relevant pair of the full game.
    pub fn full(tree: &GameTree, index: &SequenceIndex) -> Arc<RelevantPairSet> {
        let conn = Connectivity::new(tree);
        Self::build(tree, index, &conn, None)
    }

    /// Pairs restricted to the given per-sequence admission test; used for
    /// per-subgame index sets.
    pub fn filtered(
        tree: &GameTree,
        index: &SequenceIndex,
        conn: &Connectivity,
        keep: impl Fn(Player, SeqId) -> bool,
    ) -> Arc<RelevantPairSet> {
        Self::build(tree, index, conn, Some(&keep))
    }

    #[allow(clippy::type_complexity)]
    fn build(
        tree: &GameTree,
        index: &SequenceIndex,
        conn: &Connectivity,
        keep: Option<&dyn Fn(Player, SeqId) -> bool>,
    ) -> Arc<RelevantPairSet> {
        let _ = tree;
        let n1 = index.num_seqs(Player::P1);
        let n2 = index.num_seqs(Player::P2);
        let mut pairs = Vec::new();
        let mut row_start = Vec::with_capacity(n1 + 1);
        let keep1: Vec<bool> = (0..n1)
            .map(|s| keep.map_or(true, |f| f(Player::P1, s as SeqId)))
            .collect();
        let keep2: Vec<bool> = (0..n2)
            .map(|s| keep.map_or(true, |f| f(Player::P2, s as SeqId)))
            .collect();
        for s1 in 0..n1 {
            row_start.push(pairs.len() as u32);
            if !keep1[s1] {
                continue;
            }
            let inf1 = index.seq_def(Player::P1, s1 as SeqId).map(|d| d.infoset);
            for s2 in 0..n2 {
                if !keep2[s2] {
                    continue;
                }
                let relevant = match (inf1, index.seq_def(Player::P2, s2 as SeqId)) {
                    (None, _) | (_, None) => true,
                    (Some(i1), Some(d2)) => conn.connected(i1, d2.infoset),
                };
                if relevant {
                    pairs.push((s1 as SeqId, s2 as SeqId));
                }
            }
        }
        row_start.push(pairs.len() as u32);
        Arc::new(RelevantPairSet {
            pairs,
            row_start,
            num_seqs2: n2,
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pair(&self, id: PairId) -> (SeqId, SeqId) {
        self.pairs[id as usize]
    }

    pub fn pairs(&self) -> &[(SeqId, SeqId)] {
        &self.pairs
    }

    pub fn index_of(&self, s1: SeqId, s2: SeqId) -> Option<PairId> {
        let lo = self.row_start[s1 as usize] as usize;
        let hi = self.row_start[s1 as usize + 1] as usize;
        let row = &self.pairs[lo..hi];
        row.binary_search_by_key(&s2, |&(_, b)| b)
            .ok()
            .map(|k| (lo + k) as PairId)
    }

    pub fn contains(&self, s1: SeqId, s2: SeqId) -> bool {
        self.index_of(s1, s2).is_some()
    }

    /// Dense id of the (empty, empty) pair; always 0 by construction.
    pub fn root_pair(&self) -> PairId {
        debug_assert_eq!(self.pairs[0], (EMPTY_SEQ, EMPTY_SEQ));
        0
    }

    pub fn num_seqs2(&self) -> usize {
        self.num_seqs2
    }
}

/// A nonnegative vector over a relevant-pair set.
#[derive(Clone)]
pub struct CorrelationPlan {
    pub pairs: Arc<RelevantPairSet>,
    pub values: Vec<f64>,
}

impl CorrelationPlan {
    pub fn new(pairs: Arc<RelevantPairSet>, values: Vec<f64>) -> Self {
        assert_eq!(pairs.len(), values.len());
        CorrelationPlan { pairs, values }
    }

    pub fn value(&self, s1: SeqId, s2: SeqId) -> f64 {
        match self.pairs.index_of(s1, s2) {
            Some(id) => self.values[id as usize],
            None => panic!("pair ({s1},{s2}) not in the plan's index"),
        }
    }

    pub fn get(&self, s1: SeqId, s2: SeqId) -> Option<f64> {
        self.pairs.index_of(s1, s2).map(|id| self.values[id as usize])
    }

    /// Largest violation of the polytope constraints: deviation of the
    /// root entry from 1, row/column flow residuals, and negativity.
    pub fn structural_residual(&self, tree: &GameTree, index: &SequenceIndex) -> Result<f64> {
        let mut res: f64 = 0.0;
        let root = self.values[self.pairs.root_pair() as usize];
        res = res.max((root - 1.0).abs());
        for &v in &self.values {
            res = res.max(-v);
        }

        // Row sums keyed by (P1 infoset, sigma2); column sums by
        // (sigma1, P2 infoset).
        let mut rows: HashMap<(InfosetId, SeqId), (f64, usize)> = HashMap::new();
        let mut cols: HashMap<(SeqId, InfosetId), (f64, usize)> = HashMap::new();
        for (pid, &(s1, s2)) in self.pairs.pairs().iter().enumerate() {
            let v = self.values[pid];
            if let Some(d1) = index.seq_def(Player::P1, s1) {
                let e = rows.entry((d1.infoset, s2)).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
            if let Some(d2) = index.seq_def(Player::P2, s2) {
                let e = cols.entry((s1, d2.infoset)).or_insert((0.0, 0));
                e.0 += v;
                e.1 += 1;
            }
        }
        for ((i1, s2), (sum, count)) in rows {
            let expected = tree.infoset(Player::P1, i1).num_actions();
            if count != expected {
                return Err(invalid(format!(
                    "plan index covers {count}/{expected} actions of P1 infoset {i1} against seq {s2}"
                )));
            }
            let parent = index.parent_seq(Player::P1, i1);
            let pv = self.get(parent, s2).ok_or_else(|| {
                invalid(format!(
                    "plan index missing parent pair ({parent},{s2}) for P1 infoset {i1}"
                ))
            })?;
            res = res.max((sum - pv).abs());
        }
        for ((s1, i2), (sum, count)) in cols {
            let expected = tree.infoset(Player::P2, i2).num_actions();
            if count != expected {
                return Err(invalid(format!(
                    "plan index covers {count}/{expected} actions of P2 infoset {i2} against seq {s1}"
                )));
            }
            let parent = index.parent_seq(Player::P2, i2);
            let pv = self.get(s1, parent).ok_or_else(|| {
                invalid(format!(
                    "plan index missing parent pair ({s1},{parent}) for P2 infoset {i2}"
                ))
            })?;
            res = res.max((sum - pv).abs());
        }
        Ok(res)
    }
}

/// Constant-time-accessible correlation plan used before any subgame is
/// entered.
#[derive(Clone)]
pub enum Blueprint {
    /// Players act independently with the given sequence-form strategies.
    Product {
        x1: SequenceFormStrategy,
        x2: SequenceFormStrategy,
    },
    /// Backed by an explicit plan (must cover every queried pair).
    Explicit(CorrelationPlan),
}

impl Blueprint {
    #[inline]
    pub fn eval(&self, s1: SeqId, s2: SeqId) -> f64 {
        match self {
            Blueprint::Product { x1, x2 } => {
                x1.weights[s1 as usize] * x2.weights[s2 as usize]
            }
            Blueprint::Explicit(plan) => plan.value(s1, s2),
        }
    }

    /// Materializes the oracle over an explicit pair set.
    pub fn materialize(&self, pairs: &Arc<RelevantPairSet>) -> CorrelationPlan {
        let values = pairs.pairs().iter().map(|&(a, b)| self.eval(a, b)).collect();
        CorrelationPlan::new(Arc::clone(pairs), values)
    }

    /// Conditional distribution used when expanding `infoset` of `player`
    /// below the pair (s1, s2): entry `a` is
    /// `xi0[(I,a), other] / xi0[parent, other]`, uniform when the parent
    /// entry is zero.
    pub fn expansion_conditional(
        &self,
        index: &SequenceIndex,
        player: Player,
        infoset: InfosetId,
        source: (SeqId, SeqId),
        out: &mut Vec<f64>,
    ) {
        let denom = self.eval(source.0, source.1);
        let n = out.len();
        if denom <= 0.0 {
            out.fill(1.0 / n as f64);
            return;
        }
        let mut sum = 0.0;
        for (a, slot) in out.iter_mut().enumerate() {
            let seq = index.seq_of(player, infoset, a);
            let v = match player {
                Player::P1 => self.eval(seq, source.1),
                Player::P2 => self.eval(source.0, seq),
            };
            *slot = v / denom;
            sum += *slot;
        }
        // Guard tiny drift so pinned simplex choices stay stochastic.
        if sum > 0.0 {
            for slot in out.iter_mut() {
                *slot /= sum;
            }
        } else {
            out.fill(1.0 / n as f64);
        }
    }
}

/// Blueprint families selectable from the CLI and experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlueprintSpec {
    Uniform,
    Jittered { width: f64, seed: u64 },
}

pub fn make_blueprint(
    spec: BlueprintSpec,
    tree: &GameTree,
    index: &SequenceIndex,
) -> Result<Blueprint> {
    let behavioral = |player: Player| -> Result<BehavioralStrategy> {
        match spec {
            BlueprintSpec::Uniform => Ok(BehavioralStrategy::uniform(tree, player)),
            BlueprintSpec::Jittered { width, seed } => {
                if !(0.0..=1.0).contains(&width) {
                    return Err(invalid(format!("jitter width {width} outside [0, 1]")));
                }
                Ok(jittered_behavioral(tree, player, width, seed))
            }
        }
    };
    let x1 = behavioral_to_sequence_form(tree, index, &behavioral(Player::P1)?)?;
    let x2 = behavioral_to_sequence_form(tree, index, &behavioral(Player::P2)?)?;
    Ok(Blueprint::Product { x1, x2 })
}

/// SplitMix64 finalizer.
#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic jitter draw in [-1, 1) for (seed, player, infoset,
/// action). The mixing chain and its constants are fixed: chained
/// SplitMix64 finalizers over the seed and the three coordinates, each
/// multiplied by an odd 64-bit constant, then the top 53 bits mapped to
/// the unit interval. Reproducible bit-for-bit on any platform.
pub fn jitter_epsilon(seed: u64, player: Player, infoset: InfosetId, action: usize) -> f64 {
    let mut h = mix64(seed ^ 0x5851_F42D_4C95_7F2D);
    h = mix64(h ^ (player.one_based() as u64).wrapping_mul(0xA24B_AED4_963E_E407));
    h = mix64(h ^ (infoset as u64 + 1).wrapping_mul(0x9FB2_1C65_1E98_DF25));
    h = mix64(h ^ (action as u64 + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93));
    let unit = (h >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

/// Behavioral strategy with per-action weights `1 + width * eps`,
/// normalized per infoset.
pub fn jittered_behavioral(
    tree: &GameTree,
    player: Player,
    width: f64,
    seed: u64,
) -> BehavioralStrategy {
    let probs = tree
        .infosets(player)
        .iter()
        .enumerate()
        .map(|(iid, is)| {
            let kappas: Vec<f64> = (0..is.num_actions())
                .map(|a| 1.0 + width * jitter_epsilon(seed, player, iid as InfosetId, a))
                .collect();
            let total: f64 = kappas.iter().sum();
            kappas.into_iter().map(|k| k / total).collect()
        })
        .collect();
    BehavioralStrategy { player, probs }
}

/// Writes a plan as `seq1,seq2,value` CSV with a header row.
pub fn write_plan_csv<W: Write>(plan: &CorrelationPlan, mut w: W) -> Result<()> {
    writeln!(w, "seq1,seq2,value")?;
    for (pid, &(s1, s2)) in plan.pairs.pairs().iter().enumerate() {
        writeln!(w, "{s1},{s2},{:.15e}", plan.values[pid])?;
    }
    Ok(())
}

/// Reads a plan CSV against a known pair set; every pair must appear
/// exactly once.
pub fn read_plan_csv<R: Read>(pairs: &Arc<RelevantPairSet>, r: R) -> Result<CorrelationPlan> {
    let reader = BufReader::new(r);
    let mut values = vec![f64::NAN; pairs.len()];
    let mut filled = 0usize;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || (lineno == 1 && line.starts_with("seq1")) {
            continue;
        }
        let mut parts = line.split(',');
        let bad = |msg: &str| Error::Parse {
            line: lineno,
            message: msg.to_string(),
        };
        let s1: SeqId = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| bad("bad seq1"))?;
        let s2: SeqId = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| bad("bad seq2"))?;
        let v: f64 = parts
            .next()
            .and_then(|t| t.trim().parse().ok())
            .ok_or_else(|| bad("bad value"))?;
        let pid = pairs.index_of(s1, s2).ok_or_else(|| Error::Parse {
            line: lineno,
            message: format!("pair ({s1},{s2}) is not relevant for this game"),
        })?;
        if !values[pid as usize].is_nan() {
            return Err(bad("duplicate pair"));
        }
        values[pid as usize] = v;
        filled += 1;
    }
    if filled != pairs.len() {
        return Err(invalid(format!(
            "plan file covers {filled} of {} relevant pairs",
            pairs.len()
        )));
    }
    Ok(CorrelationPlan::new(Arc::clone(pairs), values))
}
