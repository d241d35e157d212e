mod common;

use std::collections::HashMap;

use kgfuse::apply::{Provenance, Query, ScoredCandidates};
use kgfuse::fusion::{combine, tune_flags, FlagTable, FusionMode, VETO_SCORE};
use kgfuse::kg::{IndexedKg, Split, Triple, Vocabulary};
use kgfuse::{EntityId, RelationId};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::SeedableRng;

fn scored(pairs: &[(u32, f64)], p: Provenance) -> ScoredCandidates {
    ScoredCandidates::from_pairs(p, pairs.iter().map(|&(e, s)| (EntityId(e), s)))
}

fn run(a: &[(u32, f64)], b: &[(u32, f64)], mode: FusionMode) -> Vec<(u32, f64)> {
    combine(&scored(a, Provenance::Neural), &scored(b, Provenance::Logical), mode)
        .unwrap()
        .entries
        .into_iter()
        .map(|(e, s)| (e.0, s))
        .collect()
}

proptest! {
    #[test]
    fn combine_matches_reference(seed in any::<u64>(), flag in 0u8..=1) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = common::random_candidates(&mut rng, 60, 100);
        let b = common::random_candidates(&mut rng, 60, 100);
        prop_assert_eq!(run(&a, &b, FusionMode::from_flag(flag).unwrap()), common::naive_combine(&a, &b, flag));
    }

    #[test]
    fn raising_a_logical_score_never_lowers_rank(seed in any::<u64>(), bump in 0.0f64..2.0) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = common::random_candidates(&mut rng, 40, 60);
        let mut b = common::random_candidates(&mut rng, 40, 60);
        prop_assume!(!b.is_empty());
        let target = b[0].0;
        let rank = |b: &[(u32, f64)]| run(&a, b, FusionMode::Sum).iter().position(|x| x.0 == target).unwrap();
        let before = rank(&b);
        b[0].1 += bump;
        prop_assert!(rank(&b) <= before);
    }

    #[test]
    fn veto_keeps_neural_order_among_confirmed(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let a = common::random_candidates(&mut rng, 50, 70);
        let b = common::random_candidates(&mut rng, 50, 70);
        let out = run(&a, &b, FusionMode::Veto);
        prop_assert_eq!(out.len(), a.len());
        let in_b: std::collections::HashSet<u32> = b.iter().map(|x| x.0).collect();
        let confirmed: Vec<u32> = out.iter().filter(|x| x.1 != VETO_SCORE).map(|x| x.0).collect();
        let mut expected: Vec<(u32, f64)> = a.iter().copied().filter(|x| in_b.contains(&x.0)).collect();
        expected.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
        prop_assert_eq!(confirmed, expected.iter().map(|x| x.0).collect::<Vec<_>>());
        // scores are non-negative, so vetoed entities form the tail
        if let Some(first_veto) = out.iter().position(|x| x.1 == VETO_SCORE) {
            prop_assert!(out[first_veto..].iter().all(|x| x.1 == VETO_SCORE));
        }
    }
}

/// Graph with entities 0..6 and two relations; validation queries chosen so
/// that veto helps relation 0 and hurts relation 2.
fn tuning_kg() -> IndexedKg {
    let mut v = Vocabulary::new();
    for e in 0..6 {
        v.intern_entity(&format!("e{e}"));
    }
    v.intern_relation("helped");
    v.intern_relation("hurt");
    v.intern_relation("unseen");
    v.freeze();
    let mut kg = IndexedKg::with_vocabulary(v);
    kg.insert(Triple::new(EntityId(0), RelationId(0), EntityId(3)), Split::Valid);
    kg.insert(Triple::new(EntityId(0), RelationId(2), EntityId(1)), Split::Valid);
    kg
}

#[test]
fn tuning_picks_mode_per_relation() {
    let kg = tuning_kg();
    let valid = Query::both_directions(kg.triples(Split::Valid));
    let neural: HashMap<(u32, u32), Vec<(u32, f64)>> = HashMap::from([
        // gold 3 is fourth by neural score; the logical side confirms only it
        ((0, 0), vec![(1, 0.9), (2, 0.8), (4, 0.7), (3, 0.6)]),
        // gold 1 is first by neural score; veto would promote 5 above it
        ((0, 2), vec![(1, 0.9), (2, 0.1), (5, 0.05)]),
    ]);
    let logical: HashMap<(u32, u32), Vec<(u32, f64)>> =
        HashMap::from([((0, 0), vec![(3, 0.01)]), ((0, 2), vec![(5, 0.01)])]);
    let get = |m: &HashMap<(u32, u32), Vec<(u32, f64)>>, q: &Query, p| {
        scored(m.get(&(q.bound.0, q.relation.0)).map(Vec::as_slice).unwrap_or(&[]), p)
    };
    let flags = tune_flags(
        &valid,
        |q| get(&neural, q, Provenance::Neural),
        |q| get(&logical, q, Provenance::Logical),
        &kg,
    )
    .unwrap();
    assert_eq!(flags.mode(RelationId(0)), FusionMode::Veto);
    assert_eq!(flags.mode(RelationId(1)), FusionMode::Veto);
    assert_eq!(flags.mode(RelationId(2)), FusionMode::Sum);
    // no validation queries: default
    assert_eq!(flags.mode(RelationId(4)), FusionMode::Sum);
    assert_eq!(flags.iter().count(), 2);
}

#[test]
fn tuning_ties_keep_sum() {
    let kg = tuning_kg();
    let valid = Query::both_directions(kg.triples(Split::Valid));
    // logical side empty: veto sends everything to -1, order by id; sum
    // keeps neural order; gold is first either way
    let flags = tune_flags(
        &valid,
        |q| scored(&[(q.gold.unwrap().0, 0.9), (5, 0.1)], Provenance::Neural),
        |_| ScoredCandidates::new(Provenance::Logical),
        &kg,
    )
    .unwrap();
    assert!(flags.iter().all(|(_, m)| m == FusionMode::Sum), "{flags:?}");
}

#[test]
fn flag_file_round_trip() {
    let mut t = FlagTable::new();
    t.set(RelationId(4), FusionMode::Veto);
    t.set(RelationId(0), FusionMode::Sum);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("flags.tsv");
    let mut buf = Vec::new();
    t.write(&mut buf).unwrap();
    assert_eq!(String::from_utf8(buf.clone()).unwrap(), "0\t1\n4\t0\n");
    std::fs::write(&path, buf).unwrap();
    assert_eq!(FlagTable::load(&path).unwrap(), t);
    std::fs::write(&path, "0\t2\n").unwrap();
    assert!(FlagTable::load(&path).is_err());
}
