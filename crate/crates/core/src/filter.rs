//! Plausibility filtering of rules from NLI probabilities.
//!
//! A rule's final score is `entailment + gamma * confidence * neutral`.
//! Rules whose head relation is enabled keep their confidence only when the
//! final score is strictly above the threshold; otherwise their effective
//! confidence drops to 0 and they take no further part in answering or
//! explaining.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::RelationId;
use crate::rules::{group_rules, Rule, RuleId, RuleSet};
use crate::sentence::SentencePair;

pub const DEFAULT_GAMMA: f64 = 1.0;
pub const DEFAULT_THRESHOLD: f64 = 0.5;
const PROBABILITY_SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("invalid NLI probabilities for rule {rule}: {message}")]
    BadProbabilities { rule: RuleId, message: String },
    #[error("{path}:{line}: {message}")]
    Table {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("missing NLI scores for rules {0:?}")]
    MissingNli(Vec<RuleId>),
    #[error("invalid filter config: {0}")]
    Config(String),
    #[error("NLI scorer: {0}")]
    Scorer(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NliScores {
    pub entailment: f64,
    pub neutral: f64,
    pub contradiction: f64,
}

impl NliScores {
    pub fn new(entailment: f64, neutral: f64, contradiction: f64) -> Self {
        NliScores {
            entailment,
            neutral,
            contradiction,
        }
    }

    pub fn validate(&self, rule: RuleId) -> Result<(), FilterError> {
        let p = [self.entailment, self.neutral, self.contradiction];
        let bad = |message: String| FilterError::BadProbabilities { rule, message };
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(bad(format!("{p:?} outside [0, 1]")));
        }
        let sum: f64 = p.iter().sum();
        if (sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
            return Err(bad(format!("probabilities sum to {sum}")));
        }
        Ok(())
    }
}

/// NLI probabilities keyed by rule id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NliTable {
    scores: BTreeMap<RuleId, NliScores>,
}

impl NliTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, rule: RuleId, scores: NliScores) -> Result<(), FilterError> {
        scores.validate(rule)?;
        self.scores.insert(rule, scores);
        Ok(())
    }

    pub fn get(&self, rule: RuleId) -> Option<&NliScores> {
        self.scores.get(&rule)
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Parses `rule_id<TAB>entailment<TAB>neutral<TAB>contradiction` lines.
    pub fn parse(text: &str, origin: &Path) -> Result<Self, FilterError> {
        let mut table = NliTable::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let err = |message: String| FilterError::Table {
                path: origin.to_path_buf(),
                line: i + 1,
                message,
            };
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(err(format!("expected 4 columns, found {}", cols.len())));
            }
            let id = cols[0]
                .trim()
                .parse::<usize>()
                .map_err(|_| err(format!("bad rule id {:?}", cols[0])))?;
            let mut p = [0.0; 3];
            for (slot, col) in p.iter_mut().zip(&cols[1..]) {
                *slot = col
                    .trim()
                    .parse()
                    .map_err(|_| err(format!("bad probability {col:?}")))?;
            }
            table.insert(RuleId(id), NliScores::new(p[0], p[1], p[2]))?;
        }
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self, FilterError> {
        let text = fs::read_to_string(path).map_err(|e| FilterError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text, path)
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (id, s) in &self.scores {
            writeln!(out, "{id}\t{}\t{}\t{}", s.entailment, s.neutral, s.contradiction)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub gamma: f64,
    pub threshold: f64,
    /// Head relations the filter applies to; rules of other relations pass through.
    pub enabled_relations: BTreeSet<RelationId>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            gamma: DEFAULT_GAMMA,
            threshold: DEFAULT_THRESHOLD,
            enabled_relations: BTreeSet::new(),
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), FilterError> {
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(FilterError::Config(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0 + self.gamma).contains(&self.threshold) {
            return Err(FilterError::Config(format!(
                "threshold {} outside [0, {}]",
                self.threshold,
                1.0 + self.gamma
            )));
        }
        Ok(())
    }
}

pub fn final_score(nli: &NliScores, confidence: f64, gamma: f64) -> f64 {
    nli.entailment + gamma * confidence * nli.neutral
}

pub fn effective_confidence(final_score: f64, threshold: f64, confidence: f64) -> f64 {
    if final_score > threshold {
        confidence
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleAudit {
    pub rule: RuleId,
    pub confidence: f64,
    /// `None` for rules of disabled relations.
    pub final_score: Option<f64>,
    pub effective_confidence: f64,
}

/// Rules with their effective confidences; groups are ordered by effective
/// confidence.
#[derive(Debug, Clone)]
pub struct FilteredRuleSet {
    rules: RuleSet,
    audit: Vec<RuleAudit>,
}

impl FilteredRuleSet {
    /// All input rules, each carrying its effective confidence.
    pub fn ruleset(&self) -> &RuleSet {
        &self.rules
    }

    pub fn audit(&self) -> &[RuleAudit] {
        &self.audit
    }

    pub fn is_kept(&self, rule: RuleId) -> bool {
        self.audit
            .iter()
            .any(|a| a.rule == rule && a.effective_confidence > 0.0)
    }

    pub fn kept_ids(&self) -> BTreeSet<RuleId> {
        self.audit
            .iter()
            .filter(|a| a.effective_confidence > 0.0)
            .map(|a| a.rule)
            .collect()
    }

    /// Only rules with a positive effective confidence.
    pub fn kept(&self) -> RuleSet {
        group_rules(
            self.rules
                .rules()
                .iter()
                .filter(|r| r.confidence > 0.0)
                .cloned()
                .collect(),
        )
    }

    pub fn write_audit<W: Write>(&self, mut out: W) -> io::Result<()> {
        for a in &self.audit {
            let fs = a.final_score.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
            writeln!(out, "{}\t{}\t{}\t{}", a.rule, a.confidence, fs, a.effective_confidence)?;
        }
        Ok(())
    }
}

pub fn filter_rules(ruleset: &RuleSet, nli: &NliTable, config: &FilterConfig) -> Result<FilteredRuleSet, FilterError> {
    config.validate()?;
    let missing: Vec<RuleId> = ruleset
        .rules()
        .iter()
        .filter(|r| config.enabled_relations.contains(&r.head.relation))
        .filter(|r| nli.get(r.id).is_none())
        .map(|r| r.id)
        .collect();
    if !missing.is_empty() {
        return Err(FilterError::MissingNli(missing));
    }
    let mut audit = Vec::with_capacity(ruleset.len());
    let mut rules: Vec<Rule> = Vec::with_capacity(ruleset.len());
    for rule in ruleset.rules() {
        let (final_score, effective) = if config.enabled_relations.contains(&rule.head.relation) {
            let scores = nli.get(rule.id).expect("checked above");
            let f = final_score(scores, rule.confidence, config.gamma);
            (Some(f), effective_confidence(f, config.threshold, rule.confidence))
        } else {
            (None, rule.confidence)
        };
        audit.push(RuleAudit {
            rule: rule.id,
            confidence: rule.confidence,
            final_score,
            effective_confidence: effective,
        });
        rules.push(if effective == rule.confidence {
            rule.clone()
        } else {
            rule.with_confidence(effective)
        });
    }
    Ok(FilteredRuleSet {
        rules: group_rules(rules),
        audit,
    })
}

/// One NLI request: `{"rule_id", "premise", "hypothesis"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliRequest {
    pub rule_id: RuleId,
    pub premise: String,
    pub hypothesis: String,
}

impl NliRequest {
    pub fn new(rule_id: RuleId, pair: &SentencePair) -> Self {
        NliRequest {
            rule_id,
            premise: pair.premise.clone(),
            hypothesis: pair.hypothesis.clone(),
        }
    }
}

/// Anything that turns premise/hypothesis pairs into NLI probabilities.
pub trait NliScorer {
    /// Returns one score triple per request, in request order.
    fn score_batch(&self, batch: &[NliRequest]) -> Result<Vec<NliScores>, FilterError>;
}

/// Scores all `requests` in batches of `batch_size` and collects a table.
pub fn score_rules<S: NliScorer + ?Sized>(
    scorer: &S,
    requests: &[NliRequest],
    batch_size: usize,
) -> Result<NliTable, FilterError> {
    let mut table = NliTable::new();
    for batch in requests.chunks(batch_size.max(1)) {
        let scores = scorer.score_batch(batch)?;
        if scores.len() != batch.len() {
            return Err(FilterError::Scorer(format!(
                "expected {} results, got {}",
                batch.len(),
                scores.len()
            )));
        }
        for (req, s) in batch.iter().zip(scores) {
            table.insert(req.rule_id, s)?;
        }
    }
    Ok(table)
}

/// Client for a scorer service accepting a JSON array of [`NliRequest`]
/// and answering with a JSON array of [`NliScores`].
#[cfg(feature = "http")]
#[derive(Debug, Clone)]
pub struct HttpNliScorer {
    pub endpoint: String,
}

#[cfg(feature = "http")]
impl HttpNliScorer {
    pub fn new(endpoint: impl Into<String>) -> Self {
        HttpNliScorer {
            endpoint: endpoint.into(),
        }
    }
}

#[cfg(feature = "http")]
impl NliScorer for HttpNliScorer {
    fn score_batch(&self, batch: &[NliRequest]) -> Result<Vec<NliScores>, FilterError> {
        let mut response = ureq::post(&self.endpoint)
            .send_json(batch)
            .map_err(|e| FilterError::Scorer(e.to_string()))?;
        response
            .body_mut()
            .read_json::<Vec<NliScores>>()
            .map_err(|e| FilterError::Scorer(e.to_string()))
    }
}
