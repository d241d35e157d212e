//! Fusion of neural and logical candidate scores.
//!
//! Two modes, chosen per relation:
//!
//! * [`FusionMode::Veto`]: neural candidates keep their neural score when a
//!   rule also derives them and drop to `-1` otherwise, so the neural order
//!   survives among rule-backed answers.
//! * [`FusionMode::Sum`]: scores are added where both sides have the entity,
//!   and entities only one side knows keep that side's score.
//!
//! Entries go through an ordered set keyed by `(score desc, entity asc)`,
//! which gives `O(n log n)` and deterministic tie-breaking.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apply::{Query, ScoredCandidates};
use crate::eval::{aggregate, filtered_rank};
use crate::interchange::RankingRecord;
use crate::kg::{Direction, EntityId, IndexedKg, RelationId};

/// Score given to vetoed entities.
pub const VETO_SCORE: f64 = -1.0;

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("score for entity {entity} is not finite")]
    NotFinite { entity: EntityId },
    #[error("{path}:{line}: {message}")]
    FlagTable {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FusionMode {
    /// Flag 0.
    Veto,
    /// Flag 1.
    Sum,
}

impl FusionMode {
    pub fn flag(self) -> u8 {
        match self {
            FusionMode::Veto => 0,
            FusionMode::Sum => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            0 => Some(FusionMode::Veto),
            1 => Some(FusionMode::Sum),
            _ => None,
        }
    }
}

/// Ranked `(entity, score)` pairs, best first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RankedAnswers {
    pub entries: Vec<(EntityId, f64)>,
}

impl RankedAnswers {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entries.iter().map(|&(e, _)| e)
    }

    pub fn position(&self, entity: EntityId) -> Option<usize> {
        self.entities().position(|e| e == entity)
    }

    pub fn to_record(&self, query: &Query) -> RankingRecord {
        RankingRecord {
            h: query.bound,
            r: query.relation,
            ranking: self.entries.clone(),
        }
    }

    pub fn from_record(record: &RankingRecord) -> Self {
        RankedAnswers {
            entries: record.ranking.clone(),
        }
    }
}

type RankKey = (Reverse<OrderedFloat<f64>>, EntityId);

fn key(entity: EntityId, score: f64) -> Result<RankKey, FusionError> {
    if !score.is_finite() {
        return Err(FusionError::NotFinite { entity });
    }
    Ok((Reverse(OrderedFloat(score)), entity))
}

/// Merges neural scores `neural` with logical scores `logical`.
pub fn combine(
    neural: &ScoredCandidates,
    logical: &ScoredCandidates,
    mode: FusionMode,
) -> Result<RankedAnswers, FusionError> {
    let mut tree: BTreeSet<RankKey> = BTreeSet::new();
    for (entity, a) in neural.iter() {
        let score = match (mode, logical.get(entity)) {
            (FusionMode::Veto, Some(_)) => a,
            (FusionMode::Veto, None) => VETO_SCORE,
            (FusionMode::Sum, Some(b)) => a + b,
            (FusionMode::Sum, None) => a,
        };
        // checking `a` too: a NaN neural score must not hide behind the veto
        key(entity, a)?;
        tree.insert(key(entity, score)?);
    }
    if mode == FusionMode::Sum {
        for (entity, b) in logical.iter() {
            if !neural.contains(entity) {
                tree.insert(key(entity, b)?);
            }
        }
    } else {
        for (entity, b) in logical.iter() {
            key(entity, b)?;
        }
    }
    Ok(RankedAnswers {
        entries: tree.into_iter().map(|(Reverse(s), e)| (e, s.0)).collect(),
    })
}

/// Fusion mode per forward relation; relations without an entry use
/// [`FusionMode::Sum`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlagTable {
    modes: BTreeMap<RelationId, FusionMode>,
}

impl FlagTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, relation: RelationId, mode: FusionMode) {
        self.modes.insert(relation.base(), mode);
    }

    /// Mode for a query relation (reciprocals share their base's mode).
    pub fn mode(&self, relation: RelationId) -> FusionMode {
        self.modes.get(&relation.base()).copied().unwrap_or(FusionMode::Sum)
    }

    pub fn iter(&self) -> impl Iterator<Item = (RelationId, FusionMode)> + '_ {
        self.modes.iter().map(|(&r, &m)| (r, m))
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// `relation_id<TAB>flag` lines.
    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (r, m) in self.iter() {
            writeln!(out, "{r}\t{}", m.flag())?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FusionError> {
        let text = fs::read_to_string(path).map_err(|e| FusionError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut table = FlagTable::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed = line.split_once('\t').and_then(|(r, f)| {
                let r = r.trim().parse::<u32>().ok()?;
                let m = FusionMode::from_flag(f.trim().parse::<u8>().ok()?)?;
                Some((RelationId(r), m))
            });
            let (r, m) = parsed.ok_or_else(|| FusionError::FlagTable {
                path: path.to_path_buf(),
                line: i + 1,
                message: "expected `relation_id<TAB>0|1`".into(),
            })?;
            table.set(r, m);
        }
        Ok(table)
    }
}

/// Filtered MRR of fused rankings over `queries` for one mode.
fn mode_mrr<N, L>(
    queries: &[&Query],
    mode: FusionMode,
    neural: &N,
    logical: &L,
    kg: &IndexedKg,
) -> Result<f64, FusionError>
where
    N: Fn(&Query) -> ScoredCandidates,
    L: Fn(&Query) -> ScoredCandidates,
{
    let mut ranks = Vec::with_capacity(queries.len());
    for q in queries {
        let Some(gold) = q.gold else { continue };
        let ranking = combine(&neural(q), &logical(q), mode)?;
        let known = kg.known_answers(q.bound, q.relation, Direction::Forward);
        ranks.push(filtered_rank(&ranking, gold, known).rank);
    }
    Ok(aggregate(&ranks).map(|m| m.mrr).unwrap_or(0.0))
}

/// Per-relation choice between the two modes by filtered MRR on
/// validation queries. Ties keep [`FusionMode::Sum`].
pub fn tune_flags<N, L>(
    valid_queries: &[Query],
    neural: N,
    logical: L,
    kg: &IndexedKg,
) -> Result<FlagTable, FusionError>
where
    N: Fn(&Query) -> ScoredCandidates,
    L: Fn(&Query) -> ScoredCandidates,
{
    let mut by_relation: BTreeMap<RelationId, Vec<&Query>> = BTreeMap::new();
    for q in valid_queries {
        by_relation.entry(q.relation.base()).or_default().push(q);
    }
    let mut table = FlagTable::new();
    for (relation, queries) in by_relation {
        let veto = mode_mrr(&queries, FusionMode::Veto, &neural, &logical, kg)?;
        let sum = mode_mrr(&queries, FusionMode::Sum, &neural, &logical, kg)?;
        let mode = if veto > sum { FusionMode::Veto } else { FusionMode::Sum };
        log::debug!("relation {relation}: mrr veto {veto:.4} sum {sum:.4} -> {mode:?}");
        table.set(relation, mode);
    }
    Ok(table)
}
