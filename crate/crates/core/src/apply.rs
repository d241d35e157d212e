//! Rule grounding over the train split and logical entity scoring.
//!
//! An entity derived by rules with sorted confidences `s_1 >= s_2 >= ...`
//! scores `sum_{i=1..7} s_i / 100^(i-1)`: the best rule dominates, later
//! rules break near-ties.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::interchange::CandidateRecord;
use crate::kg::{EntityId, IndexedKg, RelationId, Triple};
use crate::rules::{Rule, RuleId, RuleSet};

/// Number of rule confidences that contribute to an entity score.
pub const MAX_SCORED_RULES: usize = 7;

/// Score decay between consecutive rule confidences.
pub const SCORE_DECAY: f64 = 100.0;

/// A completion query `(bound, relation, ?)`. Head queries `(?, r, t)` are
/// expressed with the reciprocal relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Query {
    pub bound: EntityId,
    pub relation: RelationId,
    pub gold: Option<EntityId>,
}

impl Query {
    pub fn new(bound: EntityId, relation: RelationId) -> Self {
        Query {
            bound,
            relation,
            gold: None,
        }
    }

    /// `(h, r, ?)` with gold `t`.
    pub fn tail_query(t: Triple) -> Self {
        Query {
            bound: t.head,
            relation: t.relation,
            gold: Some(t.tail),
        }
    }

    /// `(?, r, t)` rewritten as `(t, r_reverse, ?)` with gold `h`.
    pub fn head_query(t: Triple) -> Self {
        Query::tail_query(t.reversed())
    }

    /// Both evaluation queries for every triple, tail query first.
    pub fn both_directions(triples: &[Triple]) -> Vec<Query> {
        triples
            .iter()
            .flat_map(|&t| [Query::tail_query(t), Query::head_query(t)])
            .collect()
    }

    /// Key used to match records across files.
    pub fn key(&self) -> (EntityId, RelationId) {
        (self.bound, self.relation)
    }
}

/// Entities reachable from `bound` (substituted for the head subject) by
/// walking the rule body through train facts.
pub fn ground_rule(rule: &Rule, bound: EntityId, kg: &IndexedKg) -> BTreeSet<EntityId> {
    ground(rule, bound, false, kg)
}

/// Like [`ground_rule`] but `bound` substitutes the head object, answering
/// `(?, head, bound)`.
pub fn ground_rule_inverse(rule: &Rule, bound: EntityId, kg: &IndexedKg) -> BTreeSet<EntityId> {
    ground(rule, bound, true, kg)
}

/// Grounds `rule` for a query on `relation`, which is either the rule's
/// head relation or its reciprocal.
pub fn ground_for_query(rule: &Rule, bound: EntityId, relation: RelationId, kg: &IndexedKg) -> BTreeSet<EntityId> {
    debug_assert_eq!(relation.base(), rule.head.relation);
    ground(rule, bound, relation.is_reciprocal(), kg)
}

fn ground(rule: &Rule, bound: EntityId, from_object: bool, kg: &IndexedKg) -> BTreeSet<EntityId> {
    let (Some(chain), Some(path)) = (rule.chain(), rule.path(from_object)) else {
        return BTreeSet::new();
    };
    if chain.has_distinct_vars() {
        // every binding depends only on its predecessor: walk layer by layer
        let mut frontier = BTreeSet::from([bound]);
        for relation in path {
            let mut next = BTreeSet::new();
            for &e in &frontier {
                next.extend(kg.successors(e, relation).iter().copied());
            }
            if next.is_empty() {
                return next;
            }
            frontier = next;
        }
        frontier
    } else {
        let mut vars: Vec<&str> = chain.vars.iter().map(String::as_str).collect();
        if from_object {
            vars.reverse();
        }
        let mut bindings = HashMap::from([(vars[0], bound)]);
        let mut out = BTreeSet::new();
        bind_walk(kg, &path, &vars, 0, bound, &mut bindings, &mut out);
        out
    }
}

fn bind_walk<'v>(
    kg: &IndexedKg,
    path: &[RelationId],
    vars: &[&'v str],
    step: usize,
    current: EntityId,
    bindings: &mut HashMap<&'v str, EntityId>,
    out: &mut BTreeSet<EntityId>,
) {
    if step == path.len() {
        out.insert(current);
        return;
    }
    let var = vars[step + 1];
    match bindings.get(var).copied() {
        Some(fixed) => {
            if kg.successors(current, path[step]).contains(&fixed) {
                bind_walk(kg, path, vars, step + 1, fixed, bindings, out);
            }
        }
        None => {
            for &next in kg.successors(current, path[step]) {
                bindings.insert(var, next);
                bind_walk(kg, path, vars, step + 1, next, bindings, out);
            }
            bindings.remove(var);
        }
    }
}

/// Per-entity confidences of the distinct rules that derived it, highest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateConfidences {
    entries: BTreeMap<EntityId, Vec<(f64, RuleId)>>,
}

impl CandidateConfidences {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn entities(&self) -> impl Iterator<Item = EntityId> + '_ {
        self.entries.keys().copied()
    }

    pub fn confidences(&self, entity: EntityId) -> Vec<f64> {
        self.entries
            .get(&entity)
            .map(|v| v.iter().map(|&(c, _)| c).collect())
            .unwrap_or_default()
    }

    /// Rules that derived `entity`, in confidence order.
    pub fn rules(&self, entity: EntityId) -> Vec<RuleId> {
        self.entries
            .get(&entity)
            .map(|v| v.iter().map(|&(_, r)| r).collect())
            .unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EntityId, &[(f64, RuleId)])> + '_ {
        self.entries.iter().map(|(&e, v)| (e, v.as_slice()))
    }
}

/// Grounds every rule of the query relation and records, per derived
/// entity, the confidence of each rule that reached it.
pub fn collect_candidates(query: &Query, ruleset: &RuleSet, kg: &IndexedKg) -> CandidateConfidences {
    let mut entries: BTreeMap<EntityId, Vec<(f64, RuleId)>> = BTreeMap::new();
    for rule in ruleset.rules_for(query.relation) {
        if rule.confidence <= 0.0 {
            continue;
        }
        for e in ground_for_query(rule, query.bound, query.relation, kg) {
            entries.entry(e).or_default().push((rule.confidence, rule.id));
        }
    }
    for list in entries.values_mut() {
        list.sort_by(|a, b| b.0.total_cmp(&a.0));
    }
    CandidateConfidences { entries }
}

/// Score of an entity from its confidences, which must be sorted
/// non-increasing. Only the first [`MAX_SCORED_RULES`] count.
pub fn entity_score(confidences: &[f64]) -> f64 {
    debug_assert!(confidences.windows(2).all(|w| w[0] >= w[1]));
    let mut divisor = 1.0;
    let mut score = 0.0;
    for &c in confidences.iter().take(MAX_SCORED_RULES) {
        score += c / divisor;
        divisor *= SCORE_DECAY;
    }
    score
}

/// Upper bound (exclusive) of [`entity_score`] for confidences in `[0, 1]`.
pub fn max_entity_score() -> f64 {
    entity_score(&[1.0; MAX_SCORED_RULES])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Logical,
    Neural,
    Fused,
}

/// Entity scores for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredCandidates {
    pub provenance: Provenance,
    scores: BTreeMap<EntityId, f64>,
}

impl ScoredCandidates {
    pub fn new(provenance: Provenance) -> Self {
        ScoredCandidates {
            provenance,
            scores: BTreeMap::new(),
        }
    }

    pub fn from_pairs(provenance: Provenance, pairs: impl IntoIterator<Item = (EntityId, f64)>) -> Self {
        ScoredCandidates {
            provenance,
            scores: pairs.into_iter().collect(),
        }
    }

    pub fn insert(&mut self, entity: EntityId, score: f64) {
        self.scores.insert(entity, score);
    }

    pub fn get(&self, entity: EntityId) -> Option<f64> {
        self.scores.get(&entity).copied()
    }

    pub fn contains(&self, entity: EntityId) -> bool {
        self.scores.contains_key(&entity)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Entries in entity-id order.
    pub fn iter(&self) -> impl Iterator<Item = (EntityId, f64)> + '_ {
        self.scores.iter().map(|(&e, &s)| (e, s))
    }

    /// Entries by score descending, ties by entity id ascending.
    pub fn sorted(&self) -> Vec<(EntityId, f64)> {
        let mut v: Vec<(EntityId, f64)> = self.iter().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Keeps the `n` best entries.
    pub fn truncated(&self, n: usize) -> ScoredCandidates {
        ScoredCandidates::from_pairs(self.provenance, self.sorted().into_iter().take(n))
    }

    pub fn to_record(&self, query: &Query) -> CandidateRecord {
        CandidateRecord {
            h: query.bound,
            r: query.relation,
            candidates: self.sorted(),
        }
    }

    pub fn from_record(record: &CandidateRecord, provenance: Provenance) -> Self {
        ScoredCandidates::from_pairs(provenance, record.candidates.iter().copied())
    }
}

/// Logical scores for every entity the query relation's rules derive.
pub fn logical_answers(query: &Query, ruleset: &RuleSet, kg: &IndexedKg) -> ScoredCandidates {
    let candidates = collect_candidates(query, ruleset, kg);
    ScoredCandidates::from_pairs(
        Provenance::Logical,
        candidates
            .entities()
            .map(|e| (e, entity_score(&candidates.confidences(e)))),
    )
}
