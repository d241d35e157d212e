//! File-based pipeline: ingest, filter, answer, fuse, evaluate, explain.
//!
//! Every stage reads its inputs from files and writes its outputs into the
//! output directory, so any stage can be swapped for an external tool that
//! produces the same interchange file.
//!
//! | stage | reads | writes |
//! | --- | --- | --- |
//! | ingest | triple files | `entities.tsv`, `relations.tsv` |
//! | filter | rule file, NLI table or scorer, relation metadata | `rules.filtered.tsv`, `filter_audit.tsv`, `sentence_pairs.tsv` |
//! | answer | filtered rules | `logical_valid.jsonl`, `logical_test.jsonl` |
//! | fuse | neural scores, logical answers, flags | `flags.tsv`, `fused_test.jsonl` |
//! | evaluate | a ranking file | `report.json`, `report.txt`, `delta_vs_neural.json` |
//! | explain | fused ranking, filtered rules, metadata | `explanations.jsonl` |
//!
//! `manifest.json` records, per stage, the config hash and the hashes of
//! the files the stage read.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::apply::{collect_candidates, logical_answers, Provenance, Query, ScoredCandidates};
use crate::eval::{filtered_rank, per_relation_delta, EvalError, QueryRank, Report, Warnings};
use crate::filter::{
    filter_rules, score_rules, FilterConfig, FilterError, NliRequest, NliTable, DEFAULT_GAMMA, DEFAULT_THRESHOLD,
};
use crate::fusion::{combine, tune_flags, FlagTable, FusionError, RankedAnswers};
use crate::interchange::{
    read_jsonl, write_jsonl, CandidateRecord, ExplanationRecord, InterchangeError, RankingRecord,
};
use crate::kg::{Direction, EntityId, IndexedKg, KgError, RelationId, Split, Vocabulary};
use crate::rules::{drop_constant_rules, group_rules, RuleError, RuleFile, RuleSet};
use crate::sentence::{
    write_sentence_pairs, EntityLabels, EntityLexicon, RelationMetaTable, SentenceConverter, SentenceError,
};

pub const ENTITIES_FILE: &str = "entities.tsv";
pub const RELATIONS_FILE: &str = "relations.tsv";
pub const FILTERED_RULES_FILE: &str = "rules.filtered.tsv";
pub const FILTER_AUDIT_FILE: &str = "filter_audit.tsv";
pub const SENTENCE_PAIRS_FILE: &str = "sentence_pairs.tsv";
pub const LOGICAL_VALID_FILE: &str = "logical_valid.jsonl";
pub const LOGICAL_TEST_FILE: &str = "logical_test.jsonl";
pub const FLAGS_FILE: &str = "flags.tsv";
pub const FUSED_FILE: &str = "fused_test.jsonl";
pub const REPORT_JSON_FILE: &str = "report.json";
pub const REPORT_TEXT_FILE: &str = "report.txt";
pub const DELTA_FILE: &str = "delta_vs_neural.json";
pub const EXPLANATIONS_FILE: &str = "explanations.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";

const DEFAULT_TOP_K: usize = 10;
const NLI_BATCH: usize = 64;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("{path} not found; run the `{stage}` stage first")]
    MissingArtifact { stage: &'static str, path: PathBuf },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Rules(#[from] RuleError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Sentence(#[from] SentenceError),
    #[error(transparent)]
    Fusion(#[from] FusionError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Interchange(#[from] InterchangeError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Ingest,
    Filter,
    Answer,
    Fuse,
    Evaluate,
    Explain,
    All,
}

impl Stage {
    pub const SEQUENCE: [Stage; 6] = [
        Stage::Ingest,
        Stage::Filter,
        Stage::Answer,
        Stage::Fuse,
        Stage::Evaluate,
        Stage::Explain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Filter => "filter",
            Stage::Answer => "answer",
            Stage::Fuse => "fuse",
            Stage::Evaluate => "evaluate",
            Stage::Explain => "explain",
            Stage::All => "all",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RulesConfig {
    /// Rule file as mined, input of the filter stage.
    pub path: Option<PathBuf>,
    /// Rules the answer and explain stages use instead of the filter output.
    pub filtered: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSection {
    pub nli: Option<PathBuf>,
    pub nli_endpoint: Option<String>,
    pub gamma: f64,
    pub threshold: f64,
    /// Relation names the filter applies to.
    pub relations: Vec<String>,
}

impl Default for FilterSection {
    fn default() -> Self {
        FilterSection {
            nli: None,
            nli_endpoint: None,
            gamma: DEFAULT_GAMMA,
            threshold: DEFAULT_THRESHOLD,
            relations: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SentenceSection {
    /// Relation metadata JSON; the shipped table is used when unset.
    pub meta: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    /// `name<TAB>label` readable entity names.
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NeuralConfig {
    pub test: Option<PathBuf>,
    pub valid: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub flags: Option<PathBuf>,
    pub tune: bool,
    /// Keep only the best n logical candidates per query.
    pub logical_top: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Answers per query that get explanations.
    pub explain_top_k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageInputs {
    /// Triple file whose triples become the evaluation queries instead of the test split.
    pub queries: Option<PathBuf>,
    /// Ranking file the evaluate and explain stages read instead of the fused output.
    pub ranking: Option<PathBuf>,
    /// Logical answers the fuse stage reads instead of the answer output.
    pub logical: Option<PathBuf>,
}

/// Everything a run needs. Loaded from TOML; command-line flags override
/// individual fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataConfig,
    pub rules: RulesConfig,
    pub filter: FilterSection,
    pub sentences: SentenceSection,
    pub neural: NeuralConfig,
    pub fusion: FusionSection,
    pub output: OutputConfig,
    pub inputs: StageInputs,
}

impl RunConfig {
    /// Parses TOML; relative paths are resolved against `base`.
    pub fn from_toml(text: &str, base: &Path) -> Result<Self, PipelineError> {
        let mut config: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        config.resolve_paths(base);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    fn paths_mut(&mut self) -> Vec<&mut Option<PathBuf>> {
        vec![
            &mut self.data.train,
            &mut self.data.valid,
            &mut self.data.test,
            &mut self.rules.path,
            &mut self.rules.filtered,
            &mut self.filter.nli,
            &mut self.sentences.meta,
            &mut self.sentences.lexicon,
            &mut self.sentences.labels,
            &mut self.neural.test,
            &mut self.neural.valid,
            &mut self.fusion.flags,
            &mut self.inputs.queries,
            &mut self.inputs.ranking,
            &mut self.inputs.logical,
        ]
    }

    fn resolve_paths(&mut self, base: &Path) {
        for p in self.paths_mut().into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(dir) = &mut self.output.dir {
            if dir.is_relative() {
                *dir = base.join(&*dir);
            }
        }
    }

    /// Checks referenced input files exist and the filter settings are sane.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut copy = self.clone();
        for p in copy.paths_mut().into_iter().flatten() {
            if !p.exists() {
                return Err(PipelineError::Config(format!("{} does not exist", p.display())));
            }
        }
        if self.output.dir.is_none() {
            return Err(PipelineError::Config("output.dir is not set".into()));
        }
        let probe = FilterConfig {
            gamma: self.filter.gamma,
            threshold: self.filter.threshold,
            enabled_relations: BTreeSet::new(),
        };
        probe.validate()?;
        if self.fusion.tune && self.fusion.flags.is_some() {
            return Err(PipelineError::Config(
                "set either fusion.flags or fusion.tune, not both".into(),
            ));
        }
        Ok(())
    }

    fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serialises");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub version: String,
    pub config_sha256: String,
    /// Input path -> sha256 of its content.
    pub inputs: BTreeMap<String, String>,
}

/// What one stage produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageSummary {
    pub stage: &'static str,
    pub outputs: Vec<PathBuf>,
    pub notes: Vec<String>,
}

/// Runs stages of one configuration.
pub struct Pipeline {
    config: RunConfig,
    out: PathBuf,
}

fn hash_file(path: &Path) -> Result<String, PipelineError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

fn create(path: &Path) -> Result<BufWriter<File>, PipelineError> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn required<'a>(value: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, PipelineError> {
    value
        .as_deref()
        .ok_or_else(|| PipelineError::Config(format!("{what} is not set")))
}

/// Collapses queries to one entry per `(bound, relation)`, sorted.
fn query_keys(queries: &[Query]) -> Vec<Query> {
    let keys: BTreeSet<(EntityId, RelationId)> = queries.iter().map(Query::key).collect();
    keys.into_iter().map(|(b, r)| Query::new(b, r)).collect()
}

fn candidates_by_key(
    records: Vec<CandidateRecord>,
    provenance: Provenance,
) -> HashMap<(EntityId, RelationId), ScoredCandidates> {
    records
        .into_iter()
        .map(|r| ((r.h, r.r), ScoredCandidates::from_record(&r, provenance)))
        .collect()
}

impl Pipeline {
    pub fn new(config: RunConfig) -> Result<Self, PipelineError> {
        config.validate()?;
        let out = config.output.dir.clone().expect("validated");
        fs::create_dir_all(&out).map_err(io_err(&out))?;
        Ok(Pipeline { config, out })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    pub fn out_path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn artifact(&self, name: &str, stage: &'static str) -> Result<PathBuf, PipelineError> {
        let path = self.out_path(name);
        if path.exists() {
            Ok(path)
        } else {
            Err(PipelineError::MissingArtifact { stage, path })
        }
    }

    pub fn run(&self, stage: Stage) -> Result<Vec<StageSummary>, PipelineError> {
        match stage {
            Stage::All => Stage::SEQUENCE.iter().map(|&s| self.run_one(s)).collect(),
            s => Ok(vec![self.run_one(s)?]),
        }
    }

    fn run_one(&self, stage: Stage) -> Result<StageSummary, PipelineError> {
        let (summary, inputs) = match stage {
            Stage::Ingest => self.ingest()?,
            Stage::Filter => self.filter()?,
            Stage::Answer => self.answer()?,
            Stage::Fuse => self.fuse()?,
            Stage::Evaluate => self.evaluate()?,
            Stage::Explain => self.explain()?,
            Stage::All => unreachable!("expanded by run"),
        };
        self.record_manifest(stage, &inputs)?;
        Ok(summary)
    }

    fn record_manifest(&self, stage: Stage, inputs: &[PathBuf]) -> Result<(), PipelineError> {
        let path = self.out_path(MANIFEST_FILE);
        let mut manifest: BTreeMap<String, ManifestEntry> = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_default(),
            Err(_) => BTreeMap::new(),
        };
        let mut hashes = BTreeMap::new();
        for p in inputs {
            hashes.insert(p.display().to_string(), hash_file(p)?);
        }
        manifest.insert(
            stage.name().to_owned(),
            ManifestEntry {
                version: env!("CARGO_PKG_VERSION").to_owned(),
                config_sha256: self.config.hash(),
                inputs: hashes,
            },
        );
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
        fs::write(&path, text + "\n").map_err(io_err(&path))
    }

    fn ingest(&self) -> Result<(StageSummary, Vec<PathBuf>), PipelineError> {
        let d = &self.config.data;
        let train = required(&d.train, "data.train")?;
        let mut kg = IndexedKg::new();
        let mut notes = Vec::new();
        let stats = kg.load_triples(train, Split::Train)?;
        notes.push(format!("train: {} triples", stats.stored));
        kg.freeze_vocab();
        let mut inputs = vec![train.to_path_buf()];
        for (split, path) in [(Split::Valid, &d.valid), (Split::Test, &d.test)] {
            if let Some(p) = path {
                let stats = kg.load_triples(p, split)?;
                notes.push(format!(
                    "{split}: {} triples, {} skipped (unknown names)",
                    stats.stored, stats.skipped_unknown
                ));
                inputs.push(p.clone());
            }
        }
        notes.push(format!(
            "{} entities, {} relations",
            kg.entity_count(),
            kg.vocab().base_relation_count()
        ));
        let (ent, rel) = (self.out_path(ENTITIES_FILE), self.out_path(RELATIONS_FILE));
        let mut w = create(&ent)?;
        kg.vocab().write_entities(&mut w).map_err(io_err(&ent))?;
        w.flush().map_err(io_err(&ent))?;
        let mut w = create(&rel)?;
        kg.vocab().write_relations(&mut w).map_err(io_err(&rel))?;
        w.flush().map_err(io_err(&rel))?;
        Ok((
            StageSummary {
                stage: "ingest",
                outputs: vec![ent, rel],
                notes,
            },
            inputs,
        ))
    }

    /// Vocabulary from the ingest dumps plus all configured splits.
    pub fn load_kg(&self) -> Result<(IndexedKg, Vec<PathBuf>), PipelineError> {
        let ent = self.artifact(ENTITIES_FILE, "ingest")?;
        let rel = self.artifact(RELATIONS_FILE, "ingest")?;
        let vocab = Vocabulary::load_dumps(&ent, &rel)?;
        let mut kg = IndexedKg::with_vocabulary(vocab);
        let mut inputs = vec![ent, rel];
        let d = &self.config.data;
        for (split, path) in [
            (Split::Train, &d.train),
            (Split::Valid, &d.valid),
            (Split::Test, &d.test),
        ] {
            if let Some(p) = path {
                kg.load_triples(p, split)?;
                inputs.push(p.clone());
            }
        }
        Ok((kg, inputs))
    }

    fn sentence_tables(&self) -> Result<(RelationMetaTable, EntityLexicon, Vec<PathBuf>), PipelineError> {
        let s = &self.config.sentences;
        let mut inputs = Vec::new();
        let meta = match &s.meta {
            Some(p) => {
                inputs.push(p.clone());
                let mut m = RelationMetaTable::load(p)?;
                m.fallback = true;
                m
            }
            None => RelationMetaTable::builtin(),
        };
        let lexicon = match &s.lexicon {
            Some(p) => {
                inputs.push(p.clone());
                EntityLexicon::load(p)?
            }
            None => EntityLexicon::builtin(),
        };
        Ok((meta, lexicon, inputs))
    }

    fn enabled_relations(&self, vocab: &Vocabulary) -> Result<BTreeSet<RelationId>, PipelineError> {
        self.config
            .filter
            .relations
            .iter()
            .map(|name| {
                vocab
                    .relation_id(name)
                    .filter(|r| !r.is_reciprocal())
                    .ok_or_else(|| PipelineError::Config(format!("unknown filter relation {name:?}")))
            })
            .collect()
    }

    fn filter(&self) -> Result<(StageSummary, Vec<PathBuf>), PipelineError> {
        let (kg, mut inputs) = self.load_kg()?;
        let vocab = kg.vocab();
        let rules_path = required(&self.config.rules.path, "rules.path")?;
        inputs.push(rules_path.to_path_buf());
        let file = RuleFile::load(rules_path, vocab)?;
        let total = file.rules.len();
        let ruleset = group_rules(drop_constant_rules(file.rules.clone()));
        let mut notes = vec![format!("{total} rules read, {} without constants", ruleset.len())];
        let config = FilterConfig {
            gamma: self.config.filter.gamma,
            threshold: self.config.filter.threshold,
            enabled_relations: self.enabled_relations(vocab)?,
        };

        let (meta, lexicon, sentence_inputs) = self.sentence_tables()?;
        inputs.extend(sentence_inputs);
        let converter = SentenceConverter::new(&meta, &lexicon, vocab);
        let mut pairs = Vec::new();
        let mut unconvertible = 0;
        for rule in ruleset.rules() {
            match converter.rule_to_sentence_pair(rule) {
                Ok(p) => pairs.push((rule.id, p)),
                Err(e) => {
                    log::debug!("rule {}: {e}", rule.id);
                    unconvertible += 1;
                }
            }
        }
        if unconvertible > 0 {
            notes.push(format!("{unconvertible} rules could not be rendered as sentences"));
        }
        let pairs_path = self.out_path(SENTENCE_PAIRS_FILE);
        let mut w = create(&pairs_path)?;
        write_sentence_pairs(&mut w, &pairs).map_err(io_err(&pairs_path))?;
        w.flush().map_err(io_err(&pairs_path))?;

        let nli = if config.enabled_relations.is_empty() {
            NliTable::new()
        } else if let Some(p) = &self.config.filter.nli {
            inputs.push(p.clone());
            NliTable::load(p)?
        } else if let Some(endpoint) = &self.config.filter.nli_endpoint {
            self.remote_nli(endpoint, &pairs, &ruleset, &config)?
        } else {
            return Err(PipelineError::Config(
                "filter.relations is set but neither filter.nli nor filter.nli_endpoint is".into(),
            ));
        };
        let filtered = filter_rules(&ruleset, &nli, &config)?;
        let kept = filtered.kept_ids();
        notes.push(format!("{} rules kept", kept.len()));

        let out_rules = self.out_path(FILTERED_RULES_FILE);
        let mut w = create(&out_rules)?;
        file.write_selected(&mut w, |r| kept.contains(&r.id))
            .map_err(io_err(&out_rules))?;
        w.flush().map_err(io_err(&out_rules))?;
        let audit = self.out_path(FILTER_AUDIT_FILE);
        let mut w = create(&audit)?;
        filtered.write_audit(&mut w).map_err(io_err(&audit))?;
        w.flush().map_err(io_err(&audit))?;
        Ok((
            StageSummary {
                stage: "filter",
                outputs: vec![out_rules, audit, pairs_path],
                notes,
            },
            inputs,
        ))
    }

    #[cfg(feature = "http")]
    fn remote_nli(
        &self,
        endpoint: &str,
        pairs: &[(crate::rules::RuleId, crate::sentence::SentencePair)],
        ruleset: &RuleSet,
        config: &FilterConfig,
    ) -> Result<NliTable, PipelineError> {
        let requests: Vec<NliRequest> = pairs
            .iter()
            .filter(|(id, _)| {
                ruleset
                    .get(*id)
                    .is_some_and(|r| config.enabled_relations.contains(&r.head.relation))
            })
            .map(|(id, p)| NliRequest::new(*id, p))
            .collect();
        let scorer = crate::filter::HttpNliScorer::new(endpoint);
        Ok(score_rules(&scorer, &requests, NLI_BATCH)?)
    }

    #[cfg(not(feature = "http"))]
    fn remote_nli(
        &self,
        _endpoint: &str,
        _pairs: &[(crate::rules::RuleId, crate::sentence::SentencePair)],
        _ruleset: &RuleSet,
        _config: &FilterConfig,
    ) -> Result<NliTable, PipelineError> {
        let _ = (score_rules::<dyn crate::filter::NliScorer>, NLI_BATCH, NliRequest::new);
        Err(PipelineError::Config("built without the `http` feature".into()))
    }

    fn answer_rules(&self, vocab: &Vocabulary) -> Result<(RuleSet, PathBuf), PipelineError> {
        let path = match &self.config.rules.filtered {
            Some(p) => p.clone(),
            None => self.artifact(FILTERED_RULES_FILE, "filter")?,
        };
        let file = RuleFile::load(&path, vocab)?;
        Ok((group_rules(drop_constant_rules(file.rules)), path))
    }

    /// Evaluation queries: both directions of every test triple (or of the
    /// `inputs.queries` file).
    pub fn test_queries(&self, kg: &IndexedKg) -> Result<(Vec<Query>, Option<PathBuf>), PipelineError> {
        match &self.config.inputs.queries {
            Some(p) => {
                let mut scratch = IndexedKg::with_vocabulary(kg.vocab().clone());
                scratch.load_triples(p, Split::Test)?;
                Ok((Query::both_directions(scratch.triples(Split::Test)), Some(p.clone())))
            }
            None => Ok((Query::both_directions(kg.triples(Split::Test)), None)),
        }
    }

    fn answer(&self) -> Result<(StageSummary, Vec<PathBuf>), PipelineError> {
        let (kg, mut inputs) = self.load_kg()?;
        let (ruleset, rules_path) = self.answer_rules(kg.vocab())?;
        inputs.push(rules_path);
        let (test, qpath) = self.test_queries(&kg)?;
        inputs.extend(qpath);
        let valid = Query::both_directions(kg.triples(Split::Valid));
        let mut outputs = Vec::new();
        let mut notes = Vec::new();
        for (queries, name) in [(valid, LOGICAL_VALID_FILE), (test, LOGICAL_TEST_FILE)] {
            let keys = query_keys(&queries);
            let records: Vec<CandidateRecord> = keys
                .par_iter()
                .map(|q| logical_answers(q, &ruleset, &kg).to_record(q))
                .collect();
            let answered = records.iter().filter(|r| !r.candidates.is_empty()).count();
            notes.push(format!(
                "{name}: {} queries, {answered} with rule answers",
                records.len()
            ));
            let path = self.out_path(name);
            write_jsonl(&path, &records)?;
            outputs.push(path);
        }
        Ok((
            StageSummary {
                stage: "answer",
                outputs,
                notes,
            },
            inputs,
        ))
    }

    fn fuse(&self) -> Result<(StageSummary, Vec<PathBuf>), PipelineError> {
        let (kg, mut inputs) = self.load_kg()?;
        let neural_path = required(&self.config.neural.test, "neural.test")?.to_path_buf();
        let logical_path = match &self.config.inputs.logical {
            Some(p) => p.clone(),
            None => self.artifact(LOGICAL_TEST_FILE, "answer")?,
        };
        inputs.extend([neural_path.clone(), logical_path.clone()]);
        let neural = candidates_by_key(read_jsonl(&neural_path)?, Provenance::Neural);
        let logical = candidates_by_key(read_jsonl(&logical_path)?, Provenance::Logical);
        let top = self.config.fusion.logical_top;
        let mut notes = Vec::new();

        let flags = if self.config.fusion.tune {
            let neural_valid_path = required(&self.config.neural.valid, "neural.valid")?.to_path_buf();
            let logical_valid_path = self.artifact(LOGICAL_VALID_FILE, "answer")?;
            inputs.extend([neural_valid_path.clone(), logical_valid_path.clone()]);
            let nv = candidates_by_key(read_jsonl(&neural_valid_path)?, Provenance::Neural);
            let lv = candidates_by_key(read_jsonl(&logical_valid_path)?, Provenance::Logical);
            let valid = Query::both_directions(kg.triples(Split::Valid));
            let empty = |p| ScoredCandidates::new(p);
            tune_flags(
                &valid,
                |q| nv.get(&q.key()).cloned().unwrap_or_else(|| empty(Provenance::Neural)),
                |q| {
                    let l = lv.get(&q.key()).cloned().unwrap_or_else(|| empty(Provenance::Logical));
                    top.map(|n| l.truncated(n)).unwrap_or(l)
                },
                &kg,
            )?
        } else if let Some(p) = &self.config.fusion.flags {
            inputs.push(p.clone());
            FlagTable::load(p)?
        } else {
            FlagTable::new()
        };
        let flags_path = self.out_path(FLAGS_FILE);
        let mut w = create(&flags_path)?;
        flags.write(&mut w).map_err(io_err(&flags_path))?;
        w.flush().map_err(io_err(&flags_path))?;

        let (test, qpath) = self.test_queries(&kg)?;
        inputs.extend(qpath);
        let keys = query_keys(&test);
        let missing_neural = keys.iter().filter(|q| !neural.contains_key(&q.key())).count();
        if missing_neural > 0 {
            notes.push(format!("{missing_neural} queries without neural scores"));
        }
        let records = keys
            .par_iter()
            .map(|q| {
                let a = neural
                    .get(&q.key())
                    .cloned()
                    .unwrap_or_else(|| ScoredCandidates::new(Provenance::Neural));
                let b = logical
                    .get(&q.key())
                    .cloned()
                    .unwrap_or_else(|| ScoredCandidates::new(Provenance::Logical));
                let b = top.map(|n| b.truncated(n)).unwrap_or(b);
                combine(&a, &b, flags.mode(q.relation)).map(|r| r.to_record(q))
            })
            .collect::<Result<Vec<RankingRecord>, FusionError>>()?;
        let fused = self.out_path(FUSED_FILE);
        write_jsonl(&fused, &records)?;
        notes.push(format!("{} fused rankings", records.len()));
        Ok((
            StageSummary {
                stage: "fuse",
                outputs: vec![flags_path, fused],
                notes,
            },
            inputs,
        ))
    }

    fn ranking_path(&self) -> Result<PathBuf, PipelineError> {
        match &self.config.inputs.ranking {
            Some(p) => Ok(p.clone()),
            None => self.artifact(FUSED_FILE, "fuse"),
        }
    }

    /// Filtered ranks of `queries` under `rankings`.
    pub fn rank_queries(
        kg: &IndexedKg,
        queries: &[Query],
        rankings: &HashMap<(EntityId, RelationId), RankedAnswers>,
    ) -> (Vec<QueryRank>, Warnings) {
        let mut warnings = Warnings::default();
        let empty = RankedAnswers::default();
        let mut run = Vec::with_capacity(queries.len());
        for q in queries {
            let Some(gold) = q.gold else { continue };
            let ranking = rankings.get(&q.key()).unwrap_or_else(|| {
                warnings.queries_without_ranking += 1;
                &empty
            });
            let known = kg.known_answers(q.bound, q.relation, Direction::Forward);
            let outcome = filtered_rank(ranking, gold, known);
            if outcome.missing {
                warnings.gold_missing += 1;
            }
            run.push(QueryRank {
                query: *q,
                rank: outcome.rank,
            });
        }
        (run, warnings)
    }

    fn evaluate(&self) -> Result<(StageSummary, Vec<PathBuf>), PipelineError> {
        let (kg, mut inputs) = self.load_kg()?;
        let ranking_path = self.ranking_path()?;
        inputs.push(ranking_path.clone());
        let rankings: HashMap<_, _> = read_jsonl::<RankingRecord>(&ranking_path)?
            .iter()
            .map(|r| ((r.h, r.r), RankedAnswers::from_record(r)))
            .collect();
        let (test, qpath) = self.test_queries(&kg)?;
        inputs.extend(qpath);
        let (run, warnings) = Self::rank_queries(&kg, &test, &rankings);
        let report = Report::build(&run, warnings, kg.vocab())?;
        let json = self.out_path(REPORT_JSON_FILE);
        let text = serde_json::to_string_pretty(&report).expect("report serialises");
        fs::write(&json, text + "\n").map_err(io_err(&json))?;
        let table = self.out_path(REPORT_TEXT_FILE);
        fs::write(&table, report.to_table()).map_err(io_err(&table))?;
        let mut outputs = vec![json, table];
        let o = &report.overall;
        let mut notes = vec![format!(
            "hits@1 {:.4} hits@5 {:.4} hits@10 {:.4} mrr {:.4} over {} queries",
            o.hits1, o.hits5, o.hits10, o.mrr, o.queries
        )];

        if let Some(neural_path) = &self.config.neural.test {
            inputs.push(neural_path.clone());
            let baseline: HashMap<_, _> = read_jsonl::<CandidateRecord>(neural_path)?
                .into_iter()
                .map(|r| {
                    let ranked = RankedAnswers {
                        entries: ScoredCandidates::from_record(&r, Provenance::Neural).sorted(),
                    };
                    ((r.h, r.r), ranked)
                })
                .collect();
            let (base_run, _) = Self::rank_queries(&kg, &test, &baseline);
            let delta = per_relation_delta(&run, &base_run)?;
            notes.push(format!(
                "vs neural: {} relations better, {} equal, {} worse",
                delta.positive, delta.zero, delta.negative
            ));
            let path = self.out_path(DELTA_FILE);
            let text = serde_json::to_string_pretty(&delta).expect("delta serialises");
            fs::write(&path, text + "\n").map_err(io_err(&path))?;
            outputs.push(path);
        }
        Ok((
            StageSummary {
                stage: "evaluate",
                outputs,
                notes,
            },
            inputs,
        ))
    }

    fn explain(&self) -> Result<(StageSummary, Vec<PathBuf>), PipelineError> {
        let (kg, mut inputs) = self.load_kg()?;
        let (ruleset, rules_path) = self.answer_rules(kg.vocab())?;
        inputs.push(rules_path);
        let ranking_path = self.ranking_path()?;
        inputs.push(ranking_path.clone());
        let (meta, lexicon, sentence_inputs) = self.sentence_tables()?;
        inputs.extend(sentence_inputs);
        let labels = match &self.config.sentences.labels {
            Some(p) => {
                inputs.push(p.clone());
                EntityLabels::load(p, kg.vocab())?
            }
            None => EntityLabels::new(),
        };
        let top_k = self.config.output.explain_top_k.unwrap_or(DEFAULT_TOP_K);
        let converter = SentenceConverter::new(&meta, &lexicon, kg.vocab());
        let rankings: Vec<RankingRecord> = read_jsonl(&ranking_path)?;
        let per_query = rankings
            .par_iter()
            .map(|rec| {
                let q = Query::new(rec.h, rec.r);
                let fired = collect_candidates(&q, &ruleset, &kg);
                let mut out = Vec::new();
                for (i, &(entity, _)) in rec.ranking.iter().take(top_k).enumerate() {
                    let rules: Vec<_> = fired
                        .rules(entity)
                        .into_iter()
                        .filter_map(|id| ruleset.get(id))
                        .collect();
                    let explanations = converter.explain(entity, &q, &rules, &labels)?;
                    out.push(ExplanationRecord {
                        h: rec.h,
                        r: rec.r,
                        entity,
                        rank: i + 1,
                        explanations,
                    });
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>, SentenceError>>()?;
        let records: Vec<ExplanationRecord> = per_query.into_iter().flatten().collect();
        let explained = records.iter().filter(|r| !r.explanations.is_empty()).count();
        let path = self.out_path(EXPLANATIONS_FILE);
        write_jsonl(&path, &records)?;
        Ok((
            StageSummary {
                stage: "explain",
                outputs: vec![path],
                notes: vec![format!(
                    "{} answers, {explained} explained, {} unexplained",
                    records.len(),
                    records.len() - explained
                )],
            },
            inputs,
        ))
    }
}
