//! Filters rules with a precomputed NLI table at several thresholds.

use std::collections::BTreeSet;
use std::path::PathBuf;

use kgfuse::filter::{filter_rules, FilterConfig, NliTable};
use kgfuse::rules::{drop_constant_rules, group_rules, RuleFile};
use kgfuse::{IndexedKg, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut kg = IndexedKg::new();
    kg.load_triples(&dir.join("train.tsv"), Split::Train)?;
    kg.freeze_vocab();
    let v = kg.vocab();
    let rules = group_rules(drop_constant_rules(RuleFile::load(&dir.join("rules.tsv"), v)?.rules));
    let nli = NliTable::load(&dir.join("nli.tsv"))?;
    let speaks = v.relation_id("/people/person/speaks").ok_or("missing relation")?;

    for threshold in [0.0, 0.2, 0.5, 1.0] {
        let config = FilterConfig {
            gamma: 1.0,
            threshold,
            enabled_relations: BTreeSet::from([speaks]),
        };
        let filtered = filter_rules(&rules, &nli, &config)?;
        let kept: Vec<String> = filtered.kept_ids().iter().map(ToString::to_string).collect();
        println!("threshold {threshold:.1}: kept [{}]", kept.join(", "));
        if threshold == 0.2 {
            filtered.write_audit(std::io::stdout().lock())?;
        }
    }
    Ok(())
}
