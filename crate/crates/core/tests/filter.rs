mod common;

use std::collections::BTreeSet;

use kgfuse::filter::{filter_rules, final_score, FilterConfig, FilterError, NliScores, NliTable};
use kgfuse::kg::Vocabulary;
use kgfuse::rules::group_rules;
use kgfuse::{RelationId, RuleSet};
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn random_setup(seed: u64) -> (RuleSet, NliTable) {
    let mut v = Vocabulary::new();
    for r in 0..3 {
        v.intern_relation(&format!("r{r}"));
    }
    v.freeze();
    let mut rng = StdRng::seed_from_u64(seed);
    let rules: Vec<_> = (0..40).map(|i| common::random_chain_rule(&mut rng, 3, &v, i)).collect();
    let mut table = NliTable::new();
    for r in &rules {
        let (x, y): (f64, f64) = (rng.gen(), rng.gen());
        let (lo, hi) = (x.min(y), x.max(y));
        table.insert(r.id, NliScores::new(lo, hi - lo, 1.0 - hi)).unwrap();
    }
    (group_rules(rules), table)
}

fn config(gamma: f64, threshold: f64, enabled: &[u32]) -> FilterConfig {
    FilterConfig {
        gamma,
        threshold,
        enabled_relations: enabled.iter().map(|&r| RelationId(r)).collect(),
    }
}

proptest! {
    #[test]
    fn kept_sets_shrink_with_threshold(seed in any::<u64>(), t1 in 0.0f64..2.0, t2 in 0.0f64..2.0) {
        let (set, nli) = random_setup(seed);
        let (lo, hi) = (t1.min(t2), t1.max(t2));
        let a = filter_rules(&set, &nli, &config(1.0, lo, &[0, 2, 4])).unwrap().kept_ids();
        let b = filter_rules(&set, &nli, &config(1.0, hi, &[0, 2, 4])).unwrap().kept_ids();
        prop_assert!(b.is_subset(&a));
    }

    #[test]
    fn rules_outside_enabled_relations_untouched(seed in any::<u64>(), th in 0.0f64..2.0) {
        let (set, nli) = random_setup(seed);
        let filtered = filter_rules(&set, &nli, &config(1.0, th, &[0])).unwrap();
        for rule in filtered.ruleset().rules() {
            let original = set.get(rule.id).unwrap();
            if rule.head.relation != RelationId(0) {
                prop_assert_eq!(rule.confidence, original.confidence);
            } else {
                let f = final_score(nli.get(rule.id).unwrap(), original.confidence, 1.0);
                let expected = if f > th { original.confidence } else { 0.0 };
                prop_assert_eq!(rule.confidence, expected);
            }
        }
    }

    #[test]
    fn larger_gamma_never_removes_more(seed in any::<u64>(), g in 0.0f64..1.0) {
        let (set, nli) = random_setup(seed);
        let a = filter_rules(&set, &nli, &config(g, 0.5, &[0, 2, 4])).unwrap().kept_ids();
        let b = filter_rules(&set, &nli, &config(g + 0.5, 0.5, &[0, 2, 4])).unwrap().kept_ids();
        prop_assert!(a.is_subset(&b));
    }
}

#[test]
fn fixture_nli_table_round_trips() {
    let table = NliTable::load(&common::fixture("nli.tsv")).unwrap();
    assert_eq!(table.len(), 2);
    let mut out = Vec::new();
    table.write(&mut out).unwrap();
    let back = NliTable::parse(std::str::from_utf8(&out).unwrap(), std::path::Path::new("mem")).unwrap();
    assert_eq!(back, table);
}

#[test]
fn unnormalised_rows_are_rejected() {
    let err = NliTable::parse("0\t0.5\t0.5\t0.5\n", std::path::Path::new("mem")).unwrap_err();
    assert!(matches!(err, FilterError::BadProbabilities { .. }));
    let err = NliTable::parse("0\t0.5\t0.5\n", std::path::Path::new("mem")).unwrap_err();
    assert!(matches!(err, FilterError::Table { line: 1, .. }));
}

#[test]
fn disabled_filter_keeps_everything() {
    let (set, _) = random_setup(3);
    let all: BTreeSet<_> = set.rules().iter().map(|r| r.id).collect();
    let kept = filter_rules(&set, &NliTable::new(), &FilterConfig::default())
        .unwrap()
        .kept_ids();
    // zero-confidence rules are not kept even without filtering
    let nonzero: BTreeSet<_> = set
        .rules()
        .iter()
        .filter(|r| r.confidence > 0.0)
        .map(|r| r.id)
        .collect();
    assert!(kept == nonzero && nonzero.is_subset(&all));
}
