//! Converts rules to premise/hypothesis pairs and writes the sentence-pair
//! TSV consumed by an NLI scorer.

use std::io;
use std::path::PathBuf;

use kgfuse::rules::RuleFile;
use kgfuse::sentence::{write_sentence_pairs, EntityLexicon, RelationMetaTable, SentenceConverter};
use kgfuse::{IndexedKg, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut kg = IndexedKg::new();
    kg.load_triples(&dir.join("train.tsv"), Split::Train)?;
    kg.freeze_vocab();
    let v = kg.vocab();

    let meta = RelationMetaTable::load(&dir.join("relation_meta.json"))?;
    let lexicon = EntityLexicon::builtin();
    let conv = SentenceConverter::new(&meta, &lexicon, v);

    let mut pairs = Vec::new();
    for rule in RuleFile::load(&dir.join("rules.tsv"), v)?.rules {
        if !rule.is_variable_pure() {
            continue;
        }
        let names = conv.assign_placeholders(&rule)?;
        let bound: Vec<String> = names
            .iter()
            .map(|(var, ty, name)| format!("{var}:{ty}={name}"))
            .collect();
        eprintln!("rule {}: {}", rule.id, bound.join(" "));
        pairs.push((rule.id, conv.rule_to_sentence_pair(&rule)?));
    }
    write_sentence_pairs(io::stdout().lock(), &pairs)?;
    Ok(())
}
