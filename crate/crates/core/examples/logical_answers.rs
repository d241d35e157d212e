//! Grounds the fixture rules for a tail and a head query and prints the
//! logical entity scores with the rules that fired.

use std::path::PathBuf;

use kgfuse::apply::collect_candidates;
use kgfuse::rules::{drop_constant_rules, group_rules, RuleFile};
use kgfuse::{logical_answers, IndexedKg, Query, RuleSet, Split};

fn show(title: &str, query: &Query, rules: &RuleSet, kg: &IndexedKg) {
    let v = kg.vocab();
    println!("{title}");
    let fired = collect_candidates(query, rules, kg);
    for (entity, score) in logical_answers(query, rules, kg).sorted() {
        let ids: Vec<String> = fired.rules(entity).iter().map(ToString::to_string).collect();
        println!("  {:<16} {score:.6}  rules [{}]", v.entity_name(entity), ids.join(", "));
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut kg = IndexedKg::new();
    kg.load_triples(&dir.join("train.tsv"), Split::Train)?;
    kg.freeze_vocab();
    let v = kg.vocab();
    let rules = group_rules(drop_constant_rules(RuleFile::load(&dir.join("rules.tsv"), v)?.rules));

    let greta = v.entity_id("/m/p_greta").ok_or("missing greta")?;
    let america = v.entity_id("/m/c_america").ok_or("missing america")?;
    let nationality = v.relation_id("/people/person/nationality").ok_or("missing relation")?;
    let speaks = v.relation_id("/people/person/speaks").ok_or("missing relation")?;

    show("(greta, nationality, ?)", &Query::new(greta, nationality), &rules, &kg);
    show("(greta, speaks, ?)", &Query::new(greta, speaks), &rules, &kg);
    // head queries run through the reciprocal relation
    show(
        "(?, nationality, america)",
        &Query::new(america, nationality.inverse()),
        &rules,
        &kg,
    );
    Ok(())
}
