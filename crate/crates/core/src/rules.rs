//! Horn rules in the AnyBURL output layout.
//!
//! A rule line is `predicted<TAB>correct<TAB>confidence<TAB>head <= body`,
//! for example
//!
//! ```text
//! 10    7    0.7    speak(X,Y) <= lives(X,A), language(A,Y)
//! ```
//!
//! Single-letter arguments are variables, anything else names an entity.
//! Variable-pure rules are normalised into a chain from the head subject to
//! the head object; each step records whether its atom is traversed
//! subject-to-object or in the inverted direction.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kg::{EntityId, RelationId, Vocabulary};

pub const MAX_BODY_LEN: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum RuleError {
    #[error("expected 4 tab-separated columns, found {0}")]
    Columns(usize),
    #[error("invalid count or confidence column: {0:?}")]
    Number(String),
    #[error("malformed rule text: {0}")]
    Syntax(String),
    #[error("unknown relation {0:?}")]
    UnknownRelation(String),
    #[error("unknown entity {0:?}")]
    UnknownEntity(String),
    #[error("rule body has {0} atoms, at most {MAX_BODY_LEN} are supported")]
    BodyTooLong(usize),
    #[error("rule body is empty")]
    EmptyBody,
    #[error("rule body does not form a chain from the head subject to the head object")]
    NotAChain,
    #[error("confidence undefined for a rule with zero predictions")]
    ZeroPredicted,
    #[error("{path}:{line}: {source}")]
    AtLine {
        path: PathBuf,
        line: usize,
        #[source]
        source: Box<RuleError>,
    },
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RuleId(pub usize);

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Term {
    Variable(String),
    Constant(EntityId),
}

impl Term {
    pub fn as_variable(&self) -> Option<&str> {
        match self {
            Term::Variable(v) => Some(v),
            Term::Constant(_) => None,
        }
    }

    pub fn is_variable(&self) -> bool {
        matches!(self, Term::Variable(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub relation: RelationId,
    pub subject: Term,
    pub object: Term,
}

impl Atom {
    pub fn new(relation: RelationId, subject: Term, object: Term) -> Self {
        Atom {
            relation,
            subject,
            object,
        }
    }

    pub fn is_variable_pure(&self) -> bool {
        self.subject.is_variable() && self.object.is_variable()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChainStep {
    /// Index into the rule body.
    pub atom: usize,
    /// The atom is walked object-to-subject.
    pub inverted: bool,
}

/// Body of a variable-pure rule, normalised into a walk from the head
/// subject to the head object.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chain {
    pub steps: Vec<ChainStep>,
    /// Variables visited by the walk, `steps.len() + 1` entries.
    pub vars: Vec<String>,
}

impl Chain {
    /// True when no variable occurs at two positions of the walk, in which
    /// case every binding is determined by its predecessor alone.
    pub fn has_distinct_vars(&self) -> bool {
        let mut seen: Vec<&str> = Vec::with_capacity(self.vars.len());
        for v in &self.vars {
            if seen.contains(&v.as_str()) {
                return false;
            }
            seen.push(v);
        }
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub id: RuleId,
    pub head: Atom,
    pub body: Vec<Atom>,
    pub predicted: u64,
    pub correctly_predicted: u64,
    pub confidence: f64,
    chain: Option<Chain>,
}

impl Rule {
    /// Builds a rule, checking the body length and normalising the chain.
    pub fn new(
        id: RuleId,
        head: Atom,
        body: Vec<Atom>,
        predicted: u64,
        correctly_predicted: u64,
        confidence: f64,
    ) -> Result<Self, RuleError> {
        if body.is_empty() {
            return Err(RuleError::EmptyBody);
        }
        if body.len() > MAX_BODY_LEN {
            return Err(RuleError::BodyTooLong(body.len()));
        }
        let chain = if head.is_variable_pure() && body.iter().all(Atom::is_variable_pure) {
            Some(normalise_chain(&head, &body).ok_or(RuleError::NotAChain)?)
        } else {
            None
        };
        Ok(Rule {
            id,
            head,
            body,
            predicted,
            correctly_predicted,
            confidence,
            chain,
        })
    }

    pub fn is_variable_pure(&self) -> bool {
        self.chain.is_some()
    }

    pub fn chain(&self) -> Option<&Chain> {
        self.chain.as_ref()
    }

    /// Directed relations of the chain walk. With `from_object` the walk
    /// starts at the head object and every step uses the reciprocal relation.
    pub fn path(&self, from_object: bool) -> Option<Vec<RelationId>> {
        let chain = self.chain.as_ref()?;
        let forward = chain.steps.iter().map(|s| {
            let r = self.body[s.atom].relation;
            if s.inverted {
                r.inverse()
            } else {
                r
            }
        });
        Some(if from_object {
            let mut p: Vec<RelationId> = forward.map(RelationId::inverse).collect();
            p.reverse();
            p
        } else {
            forward.collect()
        })
    }

    pub fn display<'a>(&'a self, vocab: &'a Vocabulary) -> RuleDisplay<'a> {
        RuleDisplay { rule: self, vocab }
    }

    /// Same rule with a different confidence.
    pub fn with_confidence(&self, confidence: f64) -> Rule {
        Rule {
            confidence,
            ..self.clone()
        }
    }
}

fn normalise_chain(head: &Atom, body: &[Atom]) -> Option<Chain> {
    let start = head.subject.as_variable()?;
    let end = head.object.as_variable()?;
    let walk = |order: &[usize]| -> Option<Chain> {
        let mut current = start;
        let mut steps = Vec::with_capacity(order.len());
        let mut vars = vec![start.to_owned()];
        for &i in order {
            let atom = &body[i];
            let (s, o) = (atom.subject.as_variable()?, atom.object.as_variable()?);
            let (inverted, next) = if s == current {
                (false, o)
            } else if o == current {
                (true, s)
            } else {
                return None;
            };
            steps.push(ChainStep { atom: i, inverted });
            vars.push(next.to_owned());
            current = next;
        }
        (current == end).then_some(Chain { steps, vars })
    };
    let in_order: Vec<usize> = (0..body.len()).collect();
    let reversed: Vec<usize> = (0..body.len()).rev().collect();
    // bodies are written either from the head subject or from the head object
    walk(&in_order).or_else(|| walk(&reversed))
}

/// Ratio of correct to total predictions.
pub fn confidence(correctly_predicted: u64, predicted: u64) -> Result<f64, RuleError> {
    if predicted == 0 {
        return Err(RuleError::ZeroPredicted);
    }
    Ok(correctly_predicted as f64 / predicted as f64)
}

fn is_variable_token(token: &str) -> bool {
    let mut chars = token.chars();
    matches!((chars.next(), chars.next()), (Some(c), None) if c.is_ascii_alphabetic())
}

fn parse_term(token: &str, vocab: &Vocabulary) -> Result<Term, RuleError> {
    let token = token.trim();
    if token.is_empty() {
        return Err(RuleError::Syntax("empty argument".into()));
    }
    if is_variable_token(token) {
        return Ok(Term::Variable(token.to_owned()));
    }
    vocab
        .entity_id(token)
        .map(Term::Constant)
        .ok_or_else(|| RuleError::UnknownEntity(token.to_owned()))
}

/// Parses `rel(a,b), rel(a,b), ...` from `text`.
fn parse_atoms(text: &str, vocab: &Vocabulary) -> Result<Vec<Atom>, RuleError> {
    let mut atoms = Vec::new();
    let mut rest = text.trim();
    while !rest.is_empty() {
        let open = rest
            .find('(')
            .ok_or_else(|| RuleError::Syntax(format!("missing '(' in {rest:?}")))?;
        let close = rest[open..]
            .find(')')
            .map(|i| i + open)
            .ok_or_else(|| RuleError::Syntax(format!("unbalanced parentheses in {rest:?}")))?;
        let name = rest[..open].trim();
        let args = &rest[open + 1..close];
        if name.is_empty() || args.contains('(') {
            return Err(RuleError::Syntax(format!("malformed atom in {rest:?}")));
        }
        let relation = vocab
            .relation_id(name)
            .filter(|r| !r.is_reciprocal())
            .ok_or_else(|| RuleError::UnknownRelation(name.to_owned()))?;
        let (s, o) = args
            .split_once(',')
            .ok_or_else(|| RuleError::Syntax(format!("atom {name} needs two arguments")))?;
        if o.contains(',') {
            return Err(RuleError::Syntax(format!("atom {name} has more than two arguments")));
        }
        atoms.push(Atom::new(relation, parse_term(s, vocab)?, parse_term(o, vocab)?));
        rest = rest[close + 1..].trim_start();
        if let Some(after) = rest.strip_prefix(',') {
            rest = after.trim_start();
            if rest.is_empty() {
                return Err(RuleError::Syntax("trailing ','".into()));
            }
        } else if !rest.is_empty() {
            return Err(RuleError::Syntax(format!("unexpected text {rest:?}")));
        }
    }
    Ok(atoms)
}

/// Parses one rule line; the confidence column is taken as given.
pub fn parse_rule_line(line: &str, id: RuleId, vocab: &Vocabulary) -> Result<Rule, RuleError> {
    let columns: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
    if columns.len() != 4 {
        return Err(RuleError::Columns(columns.len()));
    }
    let number = |s: &str| s.trim().parse::<u64>().map_err(|_| RuleError::Number(s.into()));
    let predicted = number(columns[0])?;
    let correct = number(columns[1])?;
    let confidence: f64 = columns[2]
        .trim()
        .parse()
        .ok()
        .filter(|c: &f64| (0.0..=1.0).contains(c))
        .ok_or_else(|| RuleError::Number(columns[2].into()))?;
    let (head_text, body_text) = columns[3]
        .split_once("<=")
        .ok_or_else(|| RuleError::Syntax("missing '<='".into()))?;
    let mut head = parse_atoms(head_text, vocab)?;
    if head.len() != 1 {
        return Err(RuleError::Syntax(format!(
            "rule head must be one atom, found {}",
            head.len()
        )));
    }
    let body = parse_atoms(body_text, vocab)?;
    Rule::new(id, head.remove(0), body, predicted, correct, confidence)
}

/// Parsed rule file, keeping each rule's source line.
#[derive(Debug, Clone, Default)]
pub struct RuleFile {
    pub rules: Vec<Rule>,
    /// `lines[i]` is the text `rules[i]` was parsed from.
    pub lines: Vec<String>,
}

impl RuleFile {
    pub fn load(path: &Path, vocab: &Vocabulary) -> Result<Self, RuleError> {
        let io_err = |e: io::Error| RuleError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = File::open(path).map_err(io_err)?;
        Self::read(BufReader::new(file), path, vocab)
    }

    /// Blank lines are skipped; rule ids count the remaining lines from 0.
    pub fn read<R: BufRead>(reader: R, origin: &Path, vocab: &Vocabulary) -> Result<Self, RuleError> {
        let mut out = RuleFile::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| RuleError::Io {
                path: origin.to_path_buf(),
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let id = RuleId(out.rules.len());
            let rule = parse_rule_line(&line, id, vocab).map_err(|e| RuleError::AtLine {
                path: origin.to_path_buf(),
                line: i + 1,
                source: Box::new(e),
            })?;
            out.rules.push(rule);
            out.lines.push(line);
        }
        Ok(out)
    }

    /// Writes the source lines of the rules selected by `keep`.
    pub fn write_selected<W: Write>(&self, mut out: W, mut keep: impl FnMut(&Rule) -> bool) -> io::Result<()> {
        for (rule, line) in self.rules.iter().zip(&self.lines) {
            if keep(rule) {
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }
}

/// Keeps rules whose atoms mention only variables, in input order.
pub fn drop_constant_rules(rules: Vec<Rule>) -> Vec<Rule> {
    rules.into_iter().filter(Rule::is_variable_pure).collect()
}

/// Rules partitioned by head relation, each group ordered by confidence
/// descending with ties left in input order.
#[derive(Debug, Clone, Default)]
pub struct RuleSet {
    rules: Vec<Rule>,
    groups: BTreeMap<RelationId, Vec<usize>>,
}

pub fn group_rules(rules: Vec<Rule>) -> RuleSet {
    let mut groups: BTreeMap<RelationId, Vec<usize>> = BTreeMap::new();
    for (i, rule) in rules.iter().enumerate() {
        groups.entry(rule.head.relation).or_default().push(i);
    }
    for members in groups.values_mut() {
        // sort_by is stable
        members.sort_by(|&a, &b| rules[b].confidence.total_cmp(&rules[a].confidence));
    }
    RuleSet { rules, groups }
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn into_rules(self) -> Vec<Rule> {
        self.rules
    }

    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.groups.keys().copied()
    }

    /// Rules concluding `head`, in group order.
    pub fn group(&self, head: RelationId) -> impl Iterator<Item = &Rule> + '_ {
        self.groups.get(&head).into_iter().flatten().map(|&i| &self.rules[i])
    }

    /// Rules answering queries on `query_relation`. For a reciprocal
    /// relation these are the rules of its base relation, to be walked from
    /// the head object.
    pub fn rules_for(&self, query_relation: RelationId) -> impl Iterator<Item = &Rule> + '_ {
        self.group(query_relation.base())
    }

    pub fn get(&self, id: RuleId) -> Option<&Rule> {
        self.rules.iter().find(|r| r.id == id)
    }
}

pub struct RuleDisplay<'a> {
    rule: &'a Rule,
    vocab: &'a Vocabulary,
}

impl RuleDisplay<'_> {
    fn term(&self, t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match t {
            Term::Variable(v) => f.write_str(v),
            Term::Constant(e) => f.write_str(self.vocab.entity_name(*e)),
        }
    }

    fn atom(&self, a: &Atom, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.vocab.relation_name(a.relation))?;
        self.term(&a.subject, f)?;
        f.write_str(",")?;
        self.term(&a.object, f)?;
        f.write_str(")")
    }

    /// Only the `head <= body` part.
    pub fn text(&self) -> String {
        struct Text<'b, 'a>(&'b RuleDisplay<'a>);
        impl fmt::Display for Text<'_, '_> {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.atom(&self.0.rule.head, f)?;
                f.write_str(" <= ")?;
                for (i, a) in self.0.rule.body.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    self.0.atom(a, f)?;
                }
                Ok(())
            }
        }
        Text(self).to_string()
    }
}

impl fmt::Display for RuleDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = self.rule;
        write!(
            f,
            "{}\t{}\t{}\t{}",
            r.predicted,
            r.correctly_predicted,
            r.confidence,
            self.text()
        )
    }
}
