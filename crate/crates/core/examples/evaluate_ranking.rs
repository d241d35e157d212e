//! Filtered ranks and aggregate metrics for hand-made rankings.

use std::collections::BTreeSet;

use kgfuse::apply::Provenance;
use kgfuse::{aggregate, combine, filtered_rank, EntityId, FusionMode, ScoredCandidates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ranking = |pairs: &[(u32, f64)]| {
        let c = ScoredCandidates::from_pairs(Provenance::Neural, pairs.iter().map(|&(e, s)| (EntityId(e), s)));
        combine(&c, &ScoredCandidates::new(Provenance::Logical), FusionMode::Sum)
    };
    // (ranking, gold, other known answers)
    let cases = [
        (ranking(&[(1, 0.9), (2, 0.8), (3, 0.7)])?, 3, vec![1]),
        (ranking(&[(5, 0.9), (6, 0.4)])?, 5, vec![]),
        (ranking(&[(1, 0.9), (2, 0.5)])?, 9, vec![2]),
    ];
    let mut ranks = Vec::new();
    for (r, gold, known) in &cases {
        let known: BTreeSet<EntityId> = known.iter().copied().map(EntityId).collect();
        let outcome = filtered_rank(r, EntityId(*gold), &known);
        println!("gold e{gold}: rank {} (missing: {})", outcome.rank, outcome.missing);
        ranks.push(outcome.rank);
    }
    let m = aggregate(&ranks)?;
    println!(
        "hits@1 {:.3}  hits@5 {:.3}  hits@10 {:.3}  mrr {:.4}  over {} queries",
        m.hits1, m.hits5, m.hits10, m.mrr, m.queries
    );
    Ok(())
}
