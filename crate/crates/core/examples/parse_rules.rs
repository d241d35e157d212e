//! Parses a rule file, shows chain paths and removes constant rules.

use std::path::PathBuf;

use kgfuse::rules::{drop_constant_rules, group_rules, RuleFile};
use kgfuse::{IndexedKg, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut kg = IndexedKg::new();
    kg.load_triples(&dir.join("train.tsv"), Split::Train)?;
    kg.freeze_vocab();
    let v = kg.vocab();

    let file = RuleFile::load(&dir.join("rules.tsv"), v)?;
    for rule in &file.rules {
        let kind = if rule.is_variable_pure() { "chain" } else { "constant" };
        println!("[{}] {kind:<8} {:.2}  {}", rule.id, rule.confidence, rule.display(v));
        if let Some(path) = rule.path(false) {
            let names: Vec<&str> = path.iter().map(|&r| v.relation_name(r)).collect();
            println!("           subject-to-object path: {}", names.join(" / "));
        }
    }

    let set = group_rules(drop_constant_rules(file.rules));
    println!("\n{} rules after constant elimination", set.len());
    for r in set.relations() {
        let ids: Vec<String> = set.group(r).map(|rule| rule.id.to_string()).collect();
        println!("  {} <- rules {}", v.relation_name(r), ids.join(", "));
    }
    Ok(())
}
