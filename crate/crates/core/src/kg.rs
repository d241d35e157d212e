//! Triple storage: name interning, split bookkeeping and the adjacency
//! indexes used by rule grounding and filtered evaluation.
//!
//! Every relation `r` is registered together with a reciprocal relation
//! `r_reverse`, interleaved so that `inverse(2k) == 2k + 1`. A stored
//! triple `(h, r, t)` is indexed both as `(h, r) -> t` and as
//! `(t, r_reverse) -> h`, which lets head queries `(?, r, t)` be answered
//! as tail queries `(t, r_reverse, ?)` everywhere downstream.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Suffix appended to a relation name to form its reciprocal.
pub const REVERSE_SUFFIX: &str = "_reverse";

static EMPTY: BTreeSet<EntityId> = BTreeSet::new();

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

impl RelationId {
    /// The reciprocal relation. `r.inverse().inverse() == r`.
    pub fn inverse(self) -> RelationId {
        RelationId(self.0 ^ 1)
    }

    pub fn is_reciprocal(self) -> bool {
        self.0 & 1 == 1
    }

    /// The forward relation this id belongs to.
    pub fn base(self) -> RelationId {
        RelationId(self.0 & !1)
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum KgError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: expected 3 tab-separated fields, found {found}")]
    FieldCount { path: PathBuf, line: usize, found: usize },
    #[error("{path}:{line}: {message}")]
    Dump {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

impl KgError {
    fn io(path: &Path, source: io::Error) -> Self {
        KgError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

/// Bidirectional name <-> dense id maps for entities and relations.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    entities: Vec<String>,
    entity_index: HashMap<String, EntityId>,
    relations: Vec<String>,
    relation_index: HashMap<String, RelationId>,
    frozen: bool,
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    /// After freezing, interning unknown names fails instead of growing the maps.
    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    /// Number of relation ids, reciprocals included.
    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    /// Number of relations as they appear in the data files.
    pub fn base_relation_count(&self) -> usize {
        self.relations.len() / 2
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_index.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_index.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entities[id.0 as usize]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relations[id.0 as usize]
    }

    /// Returns `None` when the vocabulary is frozen and `name` is unknown.
    pub fn intern_entity(&mut self, name: &str) -> Option<EntityId> {
        if let Some(id) = self.entity_id(name) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = EntityId(self.entities.len() as u32);
        self.entities.push(name.to_owned());
        self.entity_index.insert(name.to_owned(), id);
        Some(id)
    }

    /// Interns `name` and its reciprocal; returns the forward id.
    pub fn intern_relation(&mut self, name: &str) -> Option<RelationId> {
        if let Some(id) = self.relation_id(name) {
            return Some(id);
        }
        if self.frozen {
            return None;
        }
        let id = RelationId(self.relations.len() as u32);
        let reverse = format!("{name}{REVERSE_SUFFIX}");
        self.relations.push(name.to_owned());
        self.relation_index.insert(name.to_owned(), id);
        self.relations.push(reverse.clone());
        self.relation_index.insert(reverse, id.inverse());
        Some(id)
    }

    pub fn entities(&self) -> impl Iterator<Item = (EntityId, &str)> {
        self.entities
            .iter()
            .enumerate()
            .map(|(i, n)| (EntityId(i as u32), n.as_str()))
    }

    pub fn relations(&self) -> impl Iterator<Item = (RelationId, &str)> {
        self.relations
            .iter()
            .enumerate()
            .map(|(i, n)| (RelationId(i as u32), n.as_str()))
    }

    /// Writes `name<TAB>id` lines for entities.
    pub fn write_entities<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (id, name) in self.entities() {
            writeln!(out, "{name}\t{id}")?;
        }
        Ok(())
    }

    /// Writes `name<TAB>id` lines for relations, reciprocals included.
    pub fn write_relations<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (id, name) in self.relations() {
            writeln!(out, "{name}\t{id}")?;
        }
        Ok(())
    }

    /// Rebuilds a frozen vocabulary from the two dumps written by
    /// [`write_entities`](Self::write_entities) and
    /// [`write_relations`](Self::write_relations).
    pub fn load_dumps(entities: &Path, relations: &Path) -> Result<Self, KgError> {
        let mut vocab = Vocabulary::new();
        for (line, name, id) in read_dump(entities)? {
            if id as usize != vocab.entities.len() {
                return Err(KgError::Dump {
                    path: entities.to_path_buf(),
                    line,
                    message: format!("expected id {}, found {id}", vocab.entities.len()),
                });
            }
            vocab.intern_entity(&name);
        }
        let rows = read_dump(relations)?;
        for pair in rows.chunks(2) {
            let (line, name, id) = &pair[0];
            let ok = pair.len() == 2
                && *id as usize == vocab.relations.len()
                && pair[1].2 == id + 1
                && pair[1].1 == format!("{name}{REVERSE_SUFFIX}");
            if !ok {
                return Err(KgError::Dump {
                    path: relations.to_path_buf(),
                    line: *line,
                    message: "relation dump must list each relation followed by its reciprocal".into(),
                });
            }
            vocab.intern_relation(name);
        }
        vocab.freeze();
        Ok(vocab)
    }
}

fn read_dump(path: &Path) -> Result<Vec<(usize, String, u32)>, KgError> {
    let file = File::open(path).map_err(|e| KgError::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| KgError::io(path, e))?;
        if line.is_empty() {
            continue;
        }
        let parsed = line
            .rsplit_once('\t')
            .and_then(|(name, id)| id.parse::<u32>().ok().map(|id| (name.to_owned(), id)));
        match parsed {
            Some((name, id)) => rows.push((i + 1, name, id)),
            None => {
                return Err(KgError::Dump {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: "expected `name<TAB>id`".into(),
                })
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

impl Triple {
    pub fn new(head: EntityId, relation: RelationId, tail: EntityId) -> Self {
        Triple { head, relation, tail }
    }

    /// The same fact read through the reciprocal relation.
    pub fn reversed(self) -> Triple {
        Triple::new(self.tail, self.relation.inverse(), self.head)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    fn index(self) -> usize {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `{t : (bound, r, t)}`
    Forward,
    /// `{h : (h, r, bound)}`
    Inverse,
}

/// Outcome of loading one triple file.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub stored: usize,
    /// Lines skipped because a name was unknown to a frozen vocabulary.
    pub skipped_unknown: usize,
}

type AdjacencyIndex = HashMap<(EntityId, RelationId), BTreeSet<EntityId>>;

/// In-memory knowledge graph with train/valid/test splits.
#[derive(Debug, Clone, Default)]
pub struct IndexedKg {
    vocab: Vocabulary,
    splits: [Vec<Triple>; 3],
    train_index: AdjacencyIndex,
    known_index: AdjacencyIndex,
    by_relation: HashMap<RelationId, Vec<Triple>>,
}

impl IndexedKg {
    pub fn new() -> Self {
        Self::default()
    }

    /// Starts from an existing vocabulary (typically a frozen dump).
    pub fn with_vocabulary(vocab: Vocabulary) -> Self {
        IndexedKg {
            vocab,
            ..Self::default()
        }
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn freeze_vocab(&mut self) {
        self.vocab.freeze();
    }

    pub fn entity_count(&self) -> usize {
        self.vocab.entity_count()
    }

    pub fn triples(&self, split: Split) -> &[Triple] {
        &self.splits[split.index()]
    }

    /// Train triples whose forward relation is `relation`.
    pub fn relation_triples(&self, relation: RelationId) -> &[Triple] {
        self.by_relation.get(&relation).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn load_triples(&mut self, path: &Path, split: Split) -> Result<LoadStats, KgError> {
        let file = File::open(path).map_err(|e| KgError::io(path, e))?;
        self.load_triples_from(BufReader::new(file), path, split)
    }

    /// Reads `head<TAB>relation<TAB>tail` lines. `origin` is only used for
    /// error messages.
    pub fn load_triples_from<R: BufRead>(
        &mut self,
        reader: R,
        origin: &Path,
        split: Split,
    ) -> Result<LoadStats, KgError> {
        let mut stats = LoadStats::default();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| KgError::io(origin, e))?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(KgError::FieldCount {
                    path: origin.to_path_buf(),
                    line: i + 1,
                    found: fields.len(),
                });
            }
            let head = self.vocab.intern_entity(fields[0]);
            let relation = self.vocab.intern_relation(fields[1]);
            let tail = self.vocab.intern_entity(fields[2]);
            match (head, relation, tail) {
                (Some(h), Some(r), Some(t)) => {
                    self.insert(Triple::new(h, r, t), split);
                    stats.stored += 1;
                }
                _ => {
                    log::debug!("{}:{}: unknown name, triple skipped", origin.display(), i + 1);
                    stats.skipped_unknown += 1;
                }
            }
        }
        if stats.skipped_unknown > 0 {
            log::warn!(
                "{}: skipped {} triples with names outside the vocabulary",
                origin.display(),
                stats.skipped_unknown
            );
        }
        Ok(stats)
    }

    /// Adds a triple whose ids are already valid for this vocabulary.
    pub fn insert(&mut self, triple: Triple, split: Split) {
        debug_assert!(!triple.relation.is_reciprocal());
        self.splits[split.index()].push(triple);
        let reversed = triple.reversed();
        for t in [triple, reversed] {
            self.known_index.entry((t.head, t.relation)).or_default().insert(t.tail);
        }
        if split == Split::Train {
            let mut fresh = false;
            for t in [triple, reversed] {
                fresh |= self.train_index.entry((t.head, t.relation)).or_default().insert(t.tail);
            }
            if fresh {
                self.by_relation.entry(triple.relation).or_default().push(triple);
            }
        }
    }

    /// Train-split neighbours of `bound` through `relation`.
    pub fn neighbors(&self, bound: EntityId, relation: RelationId, direction: Direction) -> &BTreeSet<EntityId> {
        let relation = match direction {
            Direction::Forward => relation,
            Direction::Inverse => relation.inverse(),
        };
        self.train_index.get(&(bound, relation)).unwrap_or(&EMPTY)
    }

    /// Train-split tails of `(bound, relation, ?)`; `relation` may be reciprocal.
    pub fn successors(&self, bound: EntityId, relation: RelationId) -> &BTreeSet<EntityId> {
        self.neighbors(bound, relation, Direction::Forward)
    }

    /// Completions of the query over train, valid and test combined.
    pub fn known_answers(&self, bound: EntityId, relation: RelationId, direction: Direction) -> &BTreeSet<EntityId> {
        let relation = match direction {
            Direction::Forward => relation,
            Direction::Inverse => relation.inverse(),
        };
        self.known_index.get(&(bound, relation)).unwrap_or(&EMPTY)
    }

    /// Total entries of the train adjacency index (both directions).
    pub fn train_index_size(&self) -> usize {
        self.train_index.values().map(BTreeSet::len).sum()
    }

    pub fn known_index_size(&self) -> usize {
        self.known_index.values().map(BTreeSet::len).sum()
    }
}
