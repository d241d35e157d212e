//! Helpers shared by the integration tests: fixture paths, random graphs and
//! rules, and brute-force reference implementations.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::PathBuf;

use kgfuse::kg::{IndexedKg, Split, Triple, Vocabulary};
use kgfuse::rules::{parse_rule_line, Rule, RuleId, Term};
use kgfuse::{EntityId, RelationId};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Random graph whose entity `i` is named `e{i}` and whose relation `j` is
/// `r{j}` with id `2j`.
pub struct RandomKg {
    pub kg: IndexedKg,
    pub triples: Vec<(u32, u32, u32)>,
    pub entities: u32,
    pub relations: u32,
}

pub fn random_kg(rng: &mut impl Rng, entities: u32, relations: u32, triples: usize) -> RandomKg {
    let mut vocab = Vocabulary::new();
    for e in 0..entities {
        vocab.intern_entity(&format!("e{e}"));
    }
    for r in 0..relations {
        vocab.intern_relation(&format!("r{r}"));
    }
    vocab.freeze();
    let mut kg = IndexedKg::with_vocabulary(vocab);
    let mut list = Vec::with_capacity(triples);
    for _ in 0..triples {
        let t = (
            rng.gen_range(0..entities),
            rng.gen_range(0..relations),
            rng.gen_range(0..entities),
        );
        kg.insert(
            Triple::new(EntityId(t.0), RelationId(2 * t.1), EntityId(t.2)),
            Split::Train,
        );
        list.push(t);
    }
    RandomKg {
        kg,
        triples: list,
        entities,
        relations,
    }
}

/// Text of a random variable-pure chain rule of body length 1..=3 over
/// relations `r0..r{relations}`. Atoms are randomly inverted, the body is
/// sometimes listed from the head object side and interior variables are
/// sometimes reused.
pub fn random_chain_rule_text(rng: &mut impl Rng, relations: u32) -> String {
    let len = rng.gen_range(1..=3);
    let mut vars = vec!["X"];
    let interior = ["A", "B"];
    for i in 1..len {
        let v = if rng.gen_bool(0.25) {
            *["X", "Y"].choose(rng).unwrap()
        } else {
            interior[i - 1]
        };
        vars.push(v);
    }
    vars.push("Y");
    let mut atoms: Vec<String> = (0..len)
        .map(|i| {
            let r = rng.gen_range(0..relations);
            let (s, o) = if rng.gen_bool(0.5) {
                (vars[i], vars[i + 1])
            } else {
                (vars[i + 1], vars[i])
            };
            format!("r{r}({s},{o})")
        })
        .collect();
    if rng.gen_bool(0.3) {
        atoms.reverse();
    }
    let head = rng.gen_range(0..relations);
    let predicted = rng.gen_range(1..100u64);
    let correct = rng.gen_range(0..=predicted);
    format!(
        "{predicted}\t{correct}\t{}\tr{head}(X,Y) <= {}",
        correct as f64 / predicted as f64,
        atoms.join(", ")
    )
}

pub fn random_chain_rule(rng: &mut impl Rng, relations: u32, vocab: &Vocabulary, id: usize) -> Rule {
    let line = random_chain_rule_text(rng, relations);
    parse_rule_line(&line, RuleId(id), vocab).unwrap_or_else(|e| panic!("{line}: {e}"))
}

/// Every `(head subject, head object)` pair the rule body supports, found by
/// joining the body atoms against the triple list with explicit bindings.
pub fn brute_force_pairs(rule: &Rule, triples: &[(u32, u32, u32)]) -> BTreeSet<(u32, u32)> {
    let mut by_relation: HashMap<u32, Vec<(u32, u32)>> = HashMap::new();
    for &(h, r, t) in triples {
        by_relation.entry(2 * r).or_default().push((h, t));
    }
    let mut out = BTreeSet::new();
    let mut bindings: BTreeMap<String, u32> = BTreeMap::new();
    join(rule, 0, &by_relation, &mut bindings, &mut out);
    out
}

fn bind(term: &Term, value: u32, bindings: &mut BTreeMap<String, u32>, added: &mut Vec<String>) -> bool {
    match term {
        Term::Constant(e) => e.0 == value,
        Term::Variable(v) => match bindings.get(v) {
            Some(&b) => b == value,
            None => {
                bindings.insert(v.clone(), value);
                added.push(v.clone());
                true
            }
        },
    }
}

fn join(
    rule: &Rule,
    atom: usize,
    by_relation: &HashMap<u32, Vec<(u32, u32)>>,
    bindings: &mut BTreeMap<String, u32>,
    out: &mut BTreeSet<(u32, u32)>,
) {
    if atom == rule.body.len() {
        let var = |t: &Term| bindings[t.as_variable().expect("variable head")];
        out.insert((var(&rule.head.subject), var(&rule.head.object)));
        return;
    }
    let a = &rule.body[atom];
    for &(s, o) in by_relation.get(&a.relation.0).map(Vec::as_slice).unwrap_or(&[]) {
        let mut added = Vec::new();
        if bind(&a.subject, s, bindings, &mut added) && bind(&a.object, o, bindings, &mut added) {
            join(rule, atom + 1, by_relation, bindings, out);
        }
        for v in added {
            bindings.remove(&v);
        }
    }
}

/// Reference fusion: merge into a map, then sort by score descending and
/// entity id ascending.
pub fn naive_combine(a: &[(u32, f64)], b: &[(u32, f64)], flag: u8) -> Vec<(u32, f64)> {
    let bmap: HashMap<u32, f64> = b.iter().copied().collect();
    let mut merged: HashMap<u32, f64> = HashMap::new();
    for &(e, s) in a {
        let v = match (flag, bmap.get(&e)) {
            (0, Some(_)) => s,
            (0, None) => -1.0,
            (_, Some(x)) => s + x,
            (_, None) => s,
        };
        merged.insert(e, v);
    }
    if flag == 1 {
        for &(e, s) in b {
            merged.entry(e).or_insert(s);
        }
    }
    let mut v: Vec<(u32, f64)> = merged.into_iter().collect();
    v.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap().then(x.0.cmp(&y.0)));
    v
}

/// Random candidate list with distinct entities and scores rounded to a
/// coarse grid so ties are common.
pub fn random_candidates(rng: &mut impl Rng, max_len: usize, universe: u32) -> Vec<(u32, f64)> {
    let len = rng.gen_range(0..=max_len);
    let mut ids: Vec<u32> = (0..universe).collect();
    ids.shuffle(rng);
    ids.truncate(len);
    ids.into_iter()
        .map(|e| (e, (rng.gen_range(0..1000) as f64) / 1000.0))
        .collect()
}
