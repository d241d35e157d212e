//! Filtered ranking metrics.
//!
//! For a query with gold answer `g`, every other entity known to complete
//! the query (in train, valid or test) is removed from the ranking before
//! the position of `g` is read off.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apply::Query;
use crate::fusion::RankedAnswers;
use crate::kg::{EntityId, RelationId, Vocabulary};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("cannot aggregate an empty rank list")]
    Empty,
    #[error("runs cover different query sets ({0} vs {1} queries, or different queries)")]
    MismatchedRuns(usize, usize),
    #[error("query ({0}, {1}) has no gold answer")]
    NoGold(EntityId, RelationId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankOutcome {
    /// 1-based filtered rank.
    pub rank: usize,
    /// Gold was absent from the ranking and placed after its last entry.
    pub missing: bool,
}

pub fn filtered_rank(ranking: &RankedAnswers, gold: EntityId, known: &BTreeSet<EntityId>) -> RankOutcome {
    let mut rank = 1;
    for e in ranking.entities() {
        if e == gold {
            return RankOutcome { rank, missing: false };
        }
        if !known.contains(&e) {
            rank += 1;
        }
    }
    RankOutcome { rank, missing: true }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    #[serde(rename = "hits@1")]
    pub hits1: f64,
    #[serde(rename = "hits@5")]
    pub hits5: f64,
    #[serde(rename = "hits@10")]
    pub hits10: f64,
    pub mrr: f64,
    pub queries: usize,
}

pub fn aggregate(ranks: &[usize]) -> Result<Metrics, EvalError> {
    if ranks.is_empty() {
        return Err(EvalError::Empty);
    }
    let n = ranks.len() as f64;
    let hits = |k: usize| ranks.iter().filter(|&&r| r <= k).count() as f64 / n;
    Ok(Metrics {
        hits1: hits(1),
        hits5: hits(5),
        hits10: hits(10),
        mrr: ranks.iter().map(|&r| 1.0 / r as f64).sum::<f64>() / n,
        queries: ranks.len(),
    })
}

/// Filtered rank of one evaluated query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRank {
    pub query: Query,
    pub rank: usize,
}

fn sort_key(q: &Query) -> (RelationId, EntityId, Option<EntityId>) {
    (q.relation, q.bound, q.gold)
}

/// Hits@10 per forward relation, pooling both query directions.
pub fn hits10_by_relation(run: &[QueryRank]) -> BTreeMap<RelationId, f64> {
    let mut groups: BTreeMap<RelationId, Vec<usize>> = BTreeMap::new();
    for qr in run {
        groups.entry(qr.query.relation.base()).or_default().push(qr.rank);
    }
    groups
        .into_iter()
        .map(|(r, ranks)| (r, aggregate(&ranks).expect("non-empty group").hits10))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationDelta {
    pub relation: RelationId,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub deltas: Vec<RelationDelta>,
    pub positive: usize,
    pub zero: usize,
    pub negative: usize,
}

/// `hits@10(a) - hits@10(b)` per relation, with sign counts.
pub fn per_relation_delta(run_a: &[QueryRank], run_b: &[QueryRank]) -> Result<DeltaReport, EvalError> {
    let mut qa: Vec<_> = run_a.iter().map(|r| sort_key(&r.query)).collect();
    let mut qb: Vec<_> = run_b.iter().map(|r| sort_key(&r.query)).collect();
    qa.sort();
    qb.sort();
    if qa != qb {
        return Err(EvalError::MismatchedRuns(run_a.len(), run_b.len()));
    }
    let (ha, hb) = (hits10_by_relation(run_a), hits10_by_relation(run_b));
    let mut report = DeltaReport {
        deltas: Vec::with_capacity(ha.len()),
        positive: 0,
        zero: 0,
        negative: 0,
    };
    for (relation, a) in ha {
        let delta = a - hb[&relation];
        if delta > 0.0 {
            report.positive += 1;
        } else if delta < 0.0 {
            report.negative += 1;
        } else {
            report.zero += 1;
        }
        report.deltas.push(RelationDelta { relation, delta });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub relation: RelationId,
    pub name: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Warnings {
    /// Queries whose gold answer was not in the (truncated) ranking.
    pub gold_missing: usize,
    /// Evaluation queries without a ranking record.
    pub queries_without_ranking: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub overall: Metrics,
    pub per_relation: Vec<RelationMetrics>,
    pub warnings: Warnings,
}

impl Report {
    pub fn build(run: &[QueryRank], warnings: Warnings, vocab: &Vocabulary) -> Result<Self, EvalError> {
        let ranks: Vec<usize> = run.iter().map(|r| r.rank).collect();
        let overall = aggregate(&ranks)?;
        let mut groups: BTreeMap<RelationId, Vec<usize>> = BTreeMap::new();
        for qr in run {
            groups.entry(qr.query.relation.base()).or_default().push(qr.rank);
        }
        let per_relation = groups
            .into_iter()
            .map(|(relation, ranks)| RelationMetrics {
                relation,
                name: vocab.relation_name(relation).to_owned(),
                metrics: aggregate(&ranks).expect("non-empty group"),
            })
            .collect();
        Ok(Report {
            overall,
            per_relation,
            warnings,
        })
    }

    /// Plain-text table, metrics in percent.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let row = |out: &mut String, name: &str, m: &Metrics| {
            let _ = writeln!(
                out,
                "{:<60} {:>8} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                name,
                m.queries,
                100.0 * m.hits1,
                100.0 * m.hits5,
                100.0 * m.hits10,
                100.0 * m.mrr
            );
        };
        let _ = writeln!(
            out,
            "{:<60} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "relation", "queries", "hits@1", "hits@5", "hits@10", "mrr"
        );
        row(&mut out, "overall", &self.overall);
        for r in &self.per_relation {
            row(&mut out, &r.name, &r.metrics);
        }
        if self.warnings != Warnings::default() {
            let _ = writeln!(
                out,
                "warnings: gold missing from ranking {}, queries without ranking {}",
                self.warnings.gold_missing, self.warnings.queries_without_ranking
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ranking(ids: &[u32]) -> RankedAnswers {
        RankedAnswers {
            entries: ids.iter().map(|&e| (EntityId(e), 0.0)).collect(),
        }
    }

    fn set(ids: &[u32]) -> BTreeSet<EntityId> {
        ids.iter().map(|&e| EntityId(e)).collect()
    }

    #[test]
    fn filtered_rank_cases() {
        // [a, b, gold, c] with a known
        let r = ranking(&[1, 2, 9, 3]);
        assert_eq!(filtered_rank(&r, EntityId(9), &set(&[1])).rank, 2);
        assert_eq!(filtered_rank(&r, EntityId(9), &set(&[1, 9])).rank, 2);
        assert_eq!(filtered_rank(&ranking(&[9, 1]), EntityId(9), &set(&[1, 2])).rank, 1);
        let miss = filtered_rank(&r, EntityId(7), &set(&[1]));
        assert_eq!(miss, RankOutcome { rank: 4, missing: true });
    }

    #[test]
    fn aggregate_cases() {
        let m = aggregate(&[1, 2, 4]).unwrap();
        assert!((m.mrr - 1.75 / 3.0).abs() < 1e-12);
        assert!((m.hits1 - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(m.hits5, 1.0);
        let m = aggregate(&[1, 1, 1]).unwrap();
        assert_eq!((m.hits1, m.hits5, m.hits10, m.mrr), (1.0, 1.0, 1.0, 1.0));
        let m = aggregate(&[11, 11]).unwrap();
        assert_eq!(m.hits10, 0.0);
        assert!((m.mrr - 1.0 / 11.0).abs() < 1e-15);
        assert_eq!(aggregate(&[]), Err(EvalError::Empty));
    }

    fn qr(rel: u32, bound: u32, gold: u32, rank: usize) -> QueryRank {
        QueryRank {
            query: Query {
                bound: EntityId(bound),
                relation: RelationId(rel),
                gold: Some(EntityId(gold)),
            },
            rank,
        }
    }

    #[test]
    fn identical_runs_have_zero_delta() {
        let run = vec![qr(0, 1, 2, 3), qr(2, 1, 2, 30)];
        let d = per_relation_delta(&run, &run).unwrap();
        assert!(d.deltas.iter().all(|x| x.delta == 0.0));
        assert_eq!((d.positive, d.zero, d.negative), (0, 2, 0));
    }

    #[test]
    fn delta_sign_counts() {
        // a wins on relations 0, 2, 4; loses on 6; ties on 8
        let a = vec![
            qr(0, 0, 1, 1),
            qr(2, 0, 1, 5),
            qr(5, 0, 1, 2),
            qr(6, 0, 1, 50),
            qr(8, 0, 1, 3),
        ];
        let b = vec![
            qr(0, 0, 1, 11),
            qr(2, 0, 1, 12),
            qr(5, 0, 1, 99),
            qr(6, 0, 1, 4),
            qr(8, 0, 1, 7),
        ];
        let d = per_relation_delta(&a, &b).unwrap();
        assert_eq!((d.positive, d.zero, d.negative), (3, 1, 1));
        // relation 5 is the reciprocal of 4: reported under 4
        assert!(d.deltas.iter().any(|x| x.relation == RelationId(4) && x.delta == 1.0));
        assert!(per_relation_delta(&a, &b[..4]).is_err());
    }

    #[test]
    fn report_json_shape() {
        let mut v = Vocabulary::new();
        v.intern_relation("r");
        let run = vec![qr(0, 0, 1, 1), qr(1, 1, 0, 4)];
        let report = Report::build(&run, Warnings::default(), &v).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(json["overall"]["hits@1"], 0.5);
        assert_eq!(json["per_relation"][0]["name"], "r");
        assert_eq!(json["warnings"]["gold_missing"], 0);
        assert!(report.to_table().contains("overall"));
    }
}
