//! Rendering rules as natural-language sentences.
//!
//! Each relation carries a sentence template with a head slot `[H]` and a
//! tail slot `[T]`, plus the entity types expected in each slot. A rule is
//! rendered by giving every variable a placeholder name of its resolved
//! type (same variable, same name; different variables, different names)
//! and filling the templates of its atoms. The body becomes the premise and
//! the head becomes the hypothesis.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::apply::Query;
use crate::kg::{EntityId, Vocabulary};
use crate::rules::{Atom, Rule, RuleId, Term};

pub const HEAD_SLOT: &str = "[H]";
pub const TAIL_SLOT: &str = "[T]";
/// Root of the type hierarchy; unifies with every type.
pub const ANY_TYPE: &str = "Thing";

const BUILTIN_LEXICON: &str = include_str!("../data/lexicon.json");
const BUILTIN_META: &str = include_str!("../data/relation_meta.json");

#[derive(Debug, Error)]
pub enum SentenceError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("invalid metadata: {0}")]
    Format(String),
    #[error("duplicate metadata entry for relation {0:?}")]
    DuplicateRelation(String),
    #[error("template for {relation:?} must contain exactly one [H] and one [T]: {template:?}")]
    BadTemplate { relation: String, template: String },
    #[error("no metadata for relation {0:?}")]
    MissingMeta(String),
    #[error("variable {variable} is typed {first_type} by {first_relation} but {second_type} by {second_relation}")]
    TypeConflict {
        variable: String,
        first_relation: String,
        first_type: String,
        second_relation: String,
        second_type: String,
    },
    #[error("lexicon type {0:?} needs at least 4 distinct names")]
    SmallPool(String),
    #[error("ran out of distinct names of type {0:?}")]
    PoolExhausted(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlotForm {
    #[default]
    Name,
    /// Nationality adjective, e.g. America -> American.
    Demonym,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotConstraints {
    #[serde(default)]
    pub head: SlotForm,
    #[serde(default)]
    pub tail: SlotForm,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub relation: String,
    pub head_type: String,
    pub tail_type: String,
    pub template: String,
    #[serde(default)]
    pub constraints: SlotConstraints,
}

impl RelationMeta {
    /// Generic entry built from the last path segment of a relation name,
    /// e.g. `/people/person/nationality` -> `[H]'s nationality is [T].`
    pub fn fallback(relation: &str) -> Self {
        let segment = relation.rsplit(['/', '.']).find(|s| !s.is_empty()).unwrap_or(relation);
        RelationMeta {
            relation: relation.to_owned(),
            head_type: ANY_TYPE.into(),
            tail_type: ANY_TYPE.into(),
            template: format!("{HEAD_SLOT}'s {} is {TAIL_SLOT}.", segment.replace('_', " ")),
            constraints: SlotConstraints::default(),
        }
    }

    fn validate(&self) -> Result<(), SentenceError> {
        if self.template.matches(HEAD_SLOT).count() != 1 || self.template.matches(TAIL_SLOT).count() != 1 {
            return Err(SentenceError::BadTemplate {
                relation: self.relation.clone(),
                template: self.template.clone(),
            });
        }
        Ok(())
    }
}

/// Relation metadata keyed by relation name.
#[derive(Debug, Clone, Default)]
pub struct RelationMetaTable {
    entries: BTreeMap<String, RelationMeta>,
    /// Use [`RelationMeta::fallback`] for relations without an entry.
    pub fallback: bool,
}

impl RelationMetaTable {
    pub fn from_entries(entries: Vec<RelationMeta>) -> Result<Self, SentenceError> {
        let mut table = BTreeMap::new();
        for entry in entries {
            entry.validate()?;
            if table.contains_key(&entry.relation) {
                return Err(SentenceError::DuplicateRelation(entry.relation));
            }
            table.insert(entry.relation.clone(), entry);
        }
        Ok(RelationMetaTable {
            entries: table,
            fallback: false,
        })
    }

    pub fn parse(text: &str) -> Result<Self, SentenceError> {
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let entries: Vec<RelationMeta> =
            serde_json::from_str(text).map_err(|e| SentenceError::Format(e.to_string()))?;
        Self::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self, SentenceError> {
        let text = fs::read_to_string(path).map_err(|e| SentenceError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Curated entries for common FB15k-237 relations, with fallback on.
    pub fn builtin() -> Self {
        let mut table = Self::parse(BUILTIN_META).expect("shipped metadata is valid");
        table.fallback = true;
        table
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, relation: &str) -> Option<&RelationMeta> {
        self.entries.get(relation)
    }

    pub fn resolve(&self, relation: &str) -> Result<RelationMeta, SentenceError> {
        match self.entries.get(relation) {
            Some(m) => Ok(m.clone()),
            None if self.fallback => Ok(RelationMeta::fallback(relation)),
            None => Err(SentenceError::MissingMeta(relation.to_owned())),
        }
    }

    /// Forward relations of `vocab` without an entry.
    pub fn missing(&self, vocab: &Vocabulary) -> Vec<String> {
        vocab
            .relations()
            .filter(|(id, _)| !id.is_reciprocal())
            .filter(|(_, name)| !self.entries.contains_key(*name))
            .map(|(_, name)| name.to_owned())
            .collect()
    }
}

/// Placeholder names per entity type, the type hierarchy and demonyms.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct EntityLexicon {
    pub names: BTreeMap<String, Vec<String>>,
    /// Child type -> parent type. Unlisted types sit directly under [`ANY_TYPE`].
    #[serde(default)]
    pub parents: BTreeMap<String, String>,
    #[serde(default)]
    pub demonyms: BTreeMap<String, String>,
}

impl EntityLexicon {
    pub fn parse(text: &str) -> Result<Self, SentenceError> {
        let lexicon: EntityLexicon = serde_json::from_str(text).map_err(|e| SentenceError::Format(e.to_string()))?;
        for (ty, pool) in &lexicon.names {
            let mut distinct = pool.clone();
            distinct.sort();
            distinct.dedup();
            if distinct.len() < 4 || distinct.len() != pool.len() {
                return Err(SentenceError::SmallPool(ty.clone()));
            }
        }
        Ok(lexicon)
    }

    pub fn load(path: &Path) -> Result<Self, SentenceError> {
        let text = fs::read_to_string(path).map_err(|e| SentenceError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        Self::parse(&text)
    }

    pub fn builtin() -> Self {
        Self::parse(BUILTIN_LEXICON).expect("shipped lexicon is valid")
    }

    /// Placeholder names for `ty`. Types without a pool get generated names.
    pub fn pool(&self, ty: &str) -> Vec<String> {
        match self.names.get(ty) {
            Some(pool) => pool.clone(),
            None => ["A", "B", "C", "D", "E", "F"]
                .iter()
                .map(|s| format!("{ty} {s}"))
                .collect(),
        }
    }

    pub fn demonym<'a>(&'a self, name: &'a str) -> &'a str {
        self.demonyms.get(name).map(String::as_str).unwrap_or(name)
    }

    /// Name a demonym was derived from, if any.
    pub fn undemonym<'a>(&'a self, form: &'a str) -> &'a str {
        self.demonyms
            .iter()
            .find(|(_, d)| d.as_str() == form)
            .map(|(n, _)| n.as_str())
            .unwrap_or(form)
    }

    fn is_ancestor(&self, ancestor: &str, ty: &str) -> bool {
        if ancestor == ANY_TYPE || ancestor == ty {
            return true;
        }
        let mut current = ty;
        // bounded walk in case the parent map has a cycle
        for _ in 0..=self.parents.len() {
            match self.parents.get(current) {
                Some(p) if p == ancestor => return true,
                Some(p) => current = p,
                None => return false,
            }
        }
        false
    }

    /// The more specific of two types when one is an ancestor of the other.
    pub fn unify<'a>(&self, a: &'a str, b: &'a str) -> Option<&'a str> {
        if self.is_ancestor(a, b) {
            Some(b)
        } else if self.is_ancestor(b, a) {
            Some(a)
        } else {
            None
        }
    }
}

/// Readable entity names, used to put real entities into explanations.
#[derive(Debug, Clone, Default)]
pub struct EntityLabels {
    labels: HashMap<EntityId, String>,
}

impl EntityLabels {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity: EntityId, label: impl Into<String>) {
        self.labels.insert(entity, label.into());
    }

    /// Reads `name<TAB>label` lines; names unknown to `vocab` are ignored.
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self, SentenceError> {
        let text = fs::read_to_string(path).map_err(|e| SentenceError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let mut labels = EntityLabels::new();
        for line in text.lines() {
            if let Some((name, label)) = line.split_once('\t') {
                if let Some(id) = vocab.entity_id(name) {
                    labels.insert(id, label.trim());
                }
            }
        }
        Ok(labels)
    }

    /// Explicit label, else the vocabulary name unless it is an opaque
    /// Freebase machine id.
    pub fn readable<'a>(&'a self, entity: EntityId, vocab: &'a Vocabulary) -> Option<&'a str> {
        if let Some(l) = self.labels.get(&entity) {
            return Some(l);
        }
        let name = vocab.entity_name(entity);
        let opaque = name.starts_with("/m/") || name.starts_with("/g/");
        (!opaque).then_some(name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub premise: String,
    pub hypothesis: String,
}

impl SentencePair {
    /// `premise Therefore, hypothesis`
    pub fn explanation(&self) -> String {
        format!("{} Therefore, {}", self.premise, self.hypothesis)
    }
}

/// Variable -> placeholder name, in order of first appearance.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Placeholders {
    entries: Vec<(String, String, String)>,
}

impl Placeholders {
    pub fn name(&self, var: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(v, _, _)| v == var)
            .map(|(_, _, n)| n.as_str())
    }

    pub fn type_of(&self, var: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(v, _, _)| v == var)
            .map(|(_, t, _)| t.as_str())
    }

    /// `(variable, type, name)` triples.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &str)> {
        self.entries
            .iter()
            .map(|(v, t, n)| (v.as_str(), t.as_str(), n.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Stateless converter over shared metadata.
#[derive(Debug, Clone, Copy)]
pub struct SentenceConverter<'a> {
    pub meta: &'a RelationMetaTable,
    pub lexicon: &'a EntityLexicon,
    pub vocab: &'a Vocabulary,
}

impl<'a> SentenceConverter<'a> {
    pub fn new(meta: &'a RelationMetaTable, lexicon: &'a EntityLexicon, vocab: &'a Vocabulary) -> Self {
        SentenceConverter { meta, lexicon, vocab }
    }

    fn atoms(rule: &Rule) -> impl Iterator<Item = &Atom> {
        std::iter::once(&rule.head).chain(rule.body.iter())
    }

    /// Gives every variable of `rule` a name of its resolved type.
    pub fn assign_placeholders(&self, rule: &Rule) -> Result<Placeholders, SentenceError> {
        self.assign_with(rule, &[])
    }

    /// Like [`assign_placeholders`](Self::assign_placeholders), with some
    /// variables pinned to given names.
    pub fn assign_with(&self, rule: &Rule, pinned: &[(&str, &str)]) -> Result<Placeholders, SentenceError> {
        // (variable, type, relation that fixed the type)
        let mut typed: Vec<(String, String, String)> = Vec::new();
        for atom in Self::atoms(rule) {
            let relation = self.vocab.relation_name(atom.relation);
            let meta = self.meta.resolve(relation)?;
            for (term, ty) in [(&atom.subject, &meta.head_type), (&atom.object, &meta.tail_type)] {
                let Term::Variable(var) = term else { continue };
                match typed.iter_mut().find(|(v, _, _)| v == var) {
                    None => typed.push((var.clone(), ty.clone(), relation.to_owned())),
                    Some((_, current, source)) => match self.lexicon.unify(current, ty) {
                        Some(t) => {
                            if t != current.as_str() {
                                *current = t.to_owned();
                                *source = relation.to_owned();
                            }
                        }
                        None => {
                            return Err(SentenceError::TypeConflict {
                                variable: var.clone(),
                                first_relation: source.clone(),
                                first_type: current.clone(),
                                second_relation: relation.to_owned(),
                                second_type: ty.clone(),
                            })
                        }
                    },
                }
            }
        }
        let mut used: Vec<String> = pinned.iter().map(|(_, n)| (*n).to_owned()).collect();
        let mut entries = Vec::with_capacity(typed.len());
        for (var, ty, _) in typed {
            let name = match pinned.iter().find(|(v, _)| *v == var) {
                Some((_, n)) => (*n).to_owned(),
                None => {
                    let name = self
                        .lexicon
                        .pool(&ty)
                        .into_iter()
                        .find(|n| !used.contains(n))
                        .ok_or_else(|| SentenceError::PoolExhausted(ty.clone()))?;
                    used.push(name.clone());
                    name
                }
            };
            entries.push((var, ty, name));
        }
        Ok(Placeholders { entries })
    }

    fn term_text(&self, term: &Term, names: &Placeholders, labels: Option<&EntityLabels>) -> String {
        match term {
            Term::Variable(v) => names.name(v).unwrap_or(v).to_owned(),
            Term::Constant(e) => labels
                .and_then(|l| l.readable(*e, self.vocab))
                .unwrap_or_else(|| self.vocab.entity_name(*e))
                .to_owned(),
        }
    }

    fn render_atom(
        &self,
        atom: &Atom,
        names: &Placeholders,
        labels: Option<&EntityLabels>,
    ) -> Result<String, SentenceError> {
        let meta = self.meta.resolve(self.vocab.relation_name(atom.relation))?;
        let form = |text: String, f: SlotForm| match f {
            SlotForm::Name => text,
            SlotForm::Demonym => self.lexicon.demonym(&text).to_owned(),
        };
        let head = form(self.term_text(&atom.subject, names, labels), meta.constraints.head);
        let tail = form(self.term_text(&atom.object, names, labels), meta.constraints.tail);
        let sentence = meta
            .template
            .replace(HEAD_SLOT, "\u{0}H")
            .replace(TAIL_SLOT, "\u{0}T")
            .replace("\u{0}H", &head)
            .replace("\u{0}T", &tail);
        Ok(sentence.trim().trim_end_matches('.').to_owned())
    }

    fn render(
        &self,
        rule: &Rule,
        names: &Placeholders,
        labels: Option<&EntityLabels>,
    ) -> Result<SentencePair, SentenceError> {
        let body = rule
            .body
            .iter()
            .map(|a| self.render_atom(a, names, labels))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SentencePair {
            premise: format!("{}.", body.join(". ")),
            hypothesis: format!("{}.", self.render_atom(&rule.head, names, labels)?),
        })
    }

    /// Body sentences as premise, head sentence as hypothesis.
    pub fn rule_to_sentence_pair(&self, rule: &Rule) -> Result<SentencePair, SentenceError> {
        let names = self.assign_placeholders(rule)?;
        self.render(rule, &names, None)
    }

    /// One explanation per fired rule, highest confidence first. The query
    /// entity and the answer entity replace their placeholders when a
    /// readable name exists.
    pub fn explain(
        &self,
        entity: EntityId,
        query: &Query,
        fired_rules: &[&Rule],
        labels: &EntityLabels,
    ) -> Result<Vec<String>, SentenceError> {
        let mut rules: Vec<&Rule> = fired_rules.to_vec();
        rules.sort_by(|a, b| b.confidence.total_cmp(&a.confidence));
        let mut out = Vec::with_capacity(rules.len());
        for rule in rules {
            let (bound_term, answer_term) = if query.relation.is_reciprocal() {
                (&rule.head.object, &rule.head.subject)
            } else {
                (&rule.head.subject, &rule.head.object)
            };
            let mut pinned: Vec<(&str, &str)> = Vec::new();
            for (term, e) in [(bound_term, query.bound), (answer_term, entity)] {
                if let (Some(var), Some(label)) = (term.as_variable(), labels.readable(e, self.vocab)) {
                    if !pinned.iter().any(|(v, _)| *v == var) {
                        pinned.push((var, label));
                    }
                }
            }
            let names = self.assign_with(rule, &pinned)?;
            out.push(self.render(rule, &names, Some(labels))?.explanation());
        }
        Ok(out)
    }
}

/// Writes `rule_id<TAB>premise<TAB>hypothesis` lines.
pub fn write_sentence_pairs<W: Write>(mut out: W, pairs: &[(RuleId, SentencePair)]) -> io::Result<()> {
    for (id, pair) in pairs {
        let clean = |s: &str| s.replace(['\t', '\n'], " ");
        writeln!(out, "{id}\t{}\t{}", clean(&pair.premise), clean(&pair.hypothesis))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rules::parse_rule_line;

    const META: &str = r#"[
      {"relation": "/people/person/nationality", "head_type": "Person", "tail_type": "Country",
       "template": "[H]'s nationality is [T].", "constraints": {"tail": "demonym"}},
      {"relation": "/people/person/place_of_birth", "head_type": "Person", "tail_type": "Location",
       "template": "[H]'s place of birth is [T]."},
      {"relation": "exported_to", "head_type": "Country", "tail_type": "Country",
       "template": "[H] exported to [T]."},
      {"relation": "lives", "head_type": "Person", "tail_type": "Country",
       "template": "[H] lives in [T]."},
      {"relation": "language", "head_type": "Country", "tail_type": "Language",
       "template": "The language of [H] is [T]."},
      {"relation": "speak", "head_type": "Person", "tail_type": "Language",
       "template": "[H] speaks [T]."},
      {"relation": "capital", "head_type": "Country", "tail_type": "City",
       "template": "The capital of [H] is [T]."}
    ]"#;

    struct Fixture {
        meta: RelationMetaTable,
        lexicon: EntityLexicon,
        vocab: Vocabulary,
    }

    impl Fixture {
        fn new() -> Self {
            let meta = RelationMetaTable::parse(META).unwrap();
            let mut vocab = Vocabulary::new();
            for m in [
                "/people/person/nationality",
                "/people/person/place_of_birth",
                "exported_to",
                "lives",
                "language",
                "speak",
                "capital",
            ] {
                vocab.intern_relation(m);
            }
            for e in ["jack_smith", "/m/02jx1", "usa"] {
                vocab.intern_entity(e);
            }
            Fixture {
                meta,
                lexicon: EntityLexicon::builtin(),
                vocab,
            }
        }

        fn conv(&self) -> SentenceConverter<'_> {
            SentenceConverter::new(&self.meta, &self.lexicon, &self.vocab)
        }

        fn rule(&self, text: &str) -> Rule {
            parse_rule_line(&format!("10\t5\t0.5\t{text}"), RuleId(0), &self.vocab).unwrap()
        }
    }

    #[test]
    fn metadata_entry_fields() {
        let f = Fixture::new();
        let m = f.meta.get("/people/person/nationality").unwrap();
        assert_eq!((m.head_type.as_str(), m.tail_type.as_str()), ("Person", "Country"));
        assert_eq!(m.template, "[H]'s nationality is [T].");
        assert!(RelationMetaTable::parse("").unwrap().is_empty());
        assert!(RelationMetaTable::parse("[]").unwrap().is_empty());
    }

    #[test]
    fn metadata_errors() {
        let dup = r#"[{"relation":"a","head_type":"Thing","tail_type":"Thing","template":"[H] a [T]"},
                     {"relation":"a","head_type":"Thing","tail_type":"Thing","template":"[H] b [T]"}]"#;
        assert!(matches!(
            RelationMetaTable::parse(dup),
            Err(SentenceError::DuplicateRelation(_))
        ));
        let slot = r#"[{"relation":"a","head_type":"Thing","tail_type":"Thing","template":"[H] a"}]"#;
        assert!(matches!(
            RelationMetaTable::parse(slot),
            Err(SentenceError::BadTemplate { .. })
        ));
    }

    #[test]
    fn missing_relations_reported() {
        let f = Fixture::new();
        let mut vocab = f.vocab.clone();
        vocab.intern_relation("unlisted");
        assert_eq!(f.meta.missing(&vocab), ["unlisted"]);
    }

    #[test]
    fn nationality_example() {
        let f = Fixture::new();
        let rule = f.rule("/people/person/nationality(X,Y) <= /people/person/place_of_birth(X,Y)");
        let names = f.conv().assign_placeholders(&rule).unwrap();
        assert_eq!(names.name("X"), Some("Jack"));
        assert_eq!(names.type_of("X"), Some("Person"));
        assert_eq!(names.name("Y"), Some("America"));
        assert_eq!(names.type_of("Y"), Some("Country"));
        let pair = f.conv().rule_to_sentence_pair(&rule).unwrap();
        assert_eq!(pair.premise, "Jack's place of birth is America.");
        assert_eq!(pair.hypothesis, "Jack's nationality is American.");
        assert_eq!(
            pair.explanation(),
            "Jack's place of birth is America. Therefore, Jack's nationality is American."
        );
    }

    #[test]
    fn distinct_variables_get_distinct_names() {
        let f = Fixture::new();
        let rule = f.rule("exported_to(X,Y) <= exported_to(X,A), exported_to(A,Y)");
        let names = f.conv().assign_placeholders(&rule).unwrap();
        let all: Vec<&str> = names.iter().map(|(_, _, n)| n).collect();
        assert_eq!(all, ["America", "England", "France"]);
        let pair = f.conv().rule_to_sentence_pair(&rule).unwrap();
        assert_eq!(pair.premise, "America exported to France. France exported to England.");
    }

    #[test]
    fn two_atom_premise_shares_intermediate() {
        let f = Fixture::new();
        let rule = f.rule("speak(X,Y) <= lives(X,A), language(A,Y)");
        let pair = f.conv().rule_to_sentence_pair(&rule).unwrap();
        assert_eq!(pair.premise, "Jack lives in America. The language of America is Latin.");
        assert_eq!(pair.hypothesis, "Jack speaks Latin.");
    }

    #[test]
    fn identical_head_and_body_render_identically() {
        let f = Fixture::new();
        let rule = f.rule("lives(X,Y) <= lives(X,Y)");
        let pair = f.conv().rule_to_sentence_pair(&rule).unwrap();
        assert_eq!(pair.premise, pair.hypothesis);
        assert_eq!(pair.premise, "Jack lives in America.");
    }

    #[test]
    fn type_conflict_names_variable_and_relations() {
        let f = Fixture::new();
        // A is a Language via `language` and a Country via `capital`
        let rule = f.rule("speak(X,Y) <= language(Y,A), capital(A,X)");
        let err = f.conv().assign_placeholders(&rule);
        assert!(err.is_err());
        let rule = f.rule("lives(X,Y) <= language(X,Y)");
        match f.conv().assign_placeholders(&rule).unwrap_err() {
            SentenceError::TypeConflict {
                variable,
                first_relation,
                second_relation,
                ..
            } => {
                assert_eq!(variable, "X");
                assert_eq!(
                    (first_relation.as_str(), second_relation.as_str()),
                    ("lives", "language")
                );
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn explanation_substitutes_readable_entities() {
        let f = Fixture::new();
        let rule = f.rule("/people/person/nationality(X,Y) <= /people/person/place_of_birth(X,Y)");
        let v = &f.vocab;
        let jack = v.entity_id("jack_smith").unwrap();
        let mid = v.entity_id("/m/02jx1").unwrap();
        let nat = v.relation_id("/people/person/nationality").unwrap();
        let q = Query::new(jack, nat);
        let labels = EntityLabels::new();
        // answer is an opaque id: its placeholder stays
        let out = f.conv().explain(mid, &q, &[&rule], &labels).unwrap();
        assert_eq!(
            out,
            ["jack_smith's place of birth is America. Therefore, jack_smith's nationality is American."]
        );
        let mut labels = EntityLabels::new();
        labels.insert(mid, "England");
        let out = f.conv().explain(mid, &q, &[&rule], &labels).unwrap();
        assert_eq!(
            out,
            ["jack_smith's place of birth is England. Therefore, jack_smith's nationality is English."]
        );
        assert!(f.conv().explain(mid, &q, &[], &labels).unwrap().is_empty());
    }

    #[test]
    fn fallback_template_from_relation_path() {
        let m = RelationMeta::fallback("/film/film/edited_by");
        assert_eq!(m.template, "[H]'s edited by is [T].");
        assert!(m.validate().is_ok());
        let f = Fixture::new();
        let mut vocab = f.vocab.clone();
        let r = vocab.intern_relation("/film/film/edited_by").unwrap();
        let rule = parse_rule_line("1\t1\t1\t/film/film/edited_by(X,Y) <= lives(X,Y)", RuleId(0), &vocab).unwrap();
        let conv = SentenceConverter::new(&f.meta, &f.lexicon, &vocab);
        assert!(matches!(
            conv.rule_to_sentence_pair(&rule),
            Err(SentenceError::MissingMeta(_))
        ));
        let mut meta = f.meta.clone();
        meta.fallback = true;
        let conv = SentenceConverter::new(&meta, &f.lexicon, &vocab);
        let pair = conv.rule_to_sentence_pair(&rule).unwrap();
        assert_eq!(pair.hypothesis, "Jack's edited by is America.");
        let _ = r;
    }

    #[test]
    fn sentence_pair_tsv() {
        let mut buf = Vec::new();
        let pair = SentencePair {
            premise: "a\tb.".into(),
            hypothesis: "c.".into(),
        };
        write_sentence_pairs(&mut buf, &[(RuleId(4), pair)]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "4\ta b.\tc.\n");
    }

    #[test]
    fn builtin_tables_load() {
        let lex = EntityLexicon::builtin();
        assert!(lex.names.values().all(|p| p.len() >= 4));
        assert_eq!(lex.unify("Location", "Country"), Some("Country"));
        assert_eq!(lex.unify("City", "Country"), None);
        assert_eq!(lex.unify(ANY_TYPE, "Film"), Some("Film"));
        let meta = RelationMetaTable::builtin();
        assert!(meta.get("/people/person/nationality").is_some());
    }
}
