//! Fuses neural and logical candidate scores in both modes.

use kgfuse::apply::Provenance;
use kgfuse::{combine, EntityId, FusionMode, ScoredCandidates};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let neural = ScoredCandidates::from_pairs(
        Provenance::Neural,
        [(1, 0.92), (2, 0.80), (3, 0.55), (4, 0.10)].map(|(e, s)| (EntityId(e), s)),
    );
    let logical = ScoredCandidates::from_pairs(
        Provenance::Logical,
        [(3, 0.9), (4, 0.85), (7, 0.6)].map(|(e, s)| (EntityId(e), s)),
    );
    for mode in [FusionMode::Veto, FusionMode::Sum] {
        let ranked = combine(&neural, &logical, mode)?;
        println!("{mode:?} (flag {})", mode.flag());
        for (entity, score) in &ranked.entries {
            println!("  e{:<3} {score:+.3}", entity.0);
        }
    }
    Ok(())
}
