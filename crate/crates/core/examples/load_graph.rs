//! Loads the fixture splits and prints vocabulary and index statistics.

use std::path::PathBuf;

use kgfuse::kg::Direction;
use kgfuse::{IndexedKg, Split};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures");
    let mut kg = IndexedKg::new();
    let train = kg.load_triples(&dir.join("train.tsv"), Split::Train)?;
    kg.freeze_vocab();
    let valid = kg.load_triples(&dir.join("valid.tsv"), Split::Valid)?;
    let test = kg.load_triples(&dir.join("test.tsv"), Split::Test)?;
    println!("train {train:?}\nvalid {valid:?}\ntest  {test:?}");

    let v = kg.vocab();
    println!(
        "{} entities, {} relations ({} with reciprocals)",
        v.entity_count(),
        v.base_relation_count(),
        v.relation_count()
    );
    for (r, name) in v.relations() {
        println!("  {:>2} {name} ({} train triples)", r.0, kg.relation_triples(r).len());
    }

    let dara = v.entity_id("/m/p_dara").ok_or("fixture lacks /m/p_dara")?;
    let speaks = v.relation_id("/people/person/speaks").ok_or("fixture lacks speaks")?;
    let names =
        |set: &std::collections::BTreeSet<_>| set.iter().map(|&e| v.entity_name(e).to_owned()).collect::<Vec<_>>();
    println!("train: dara speaks {:?}", names(kg.successors(dara, speaks)));
    println!(
        "known: dara speaks {:?}",
        names(kg.known_answers(dara, speaks, Direction::Forward))
    );
    Ok(())
}
