//! Prints rank-1 accuracy and the verification panel of every classifier on a
//! synthetic union-of-subspaces dataset.
//!
//! `cargo run --example synthetic_panel -- [classes per-class dim subspace sigma seed]`

use sparserec::evaluation::{
    build_scoreset, generate_synthetic, rank1_identification, verification_metrics, Protocol, SyntheticParams,
    DEFAULT_FAR_TARGETS,
};
use sparserec::{build_dictionary, Classifier, Recognizer, SacrcConfig, ScoreRule};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let num = |i: usize, default: f64| args.get(i).and_then(|a| a.parse().ok()).unwrap_or(default);
    let params = SyntheticParams::new(
        num(0, 20.0) as usize,
        num(1, 10.0) as usize,
        num(2, 100.0) as usize,
        num(3, 5.0) as usize,
        num(4, 0.15),
        num(5, 42.0) as u64,
    );
    let (enrolment, probes) = generate_synthetic(&params)?;
    let dict = build_dictionary(&enrolment)?;
    let cfg = SacrcConfig::for_atoms(dict.num_atoms());
    let rec = Recognizer::new(dict, cfg)?;
    println!(
        "{:<8} {:>10} {:>10} {:>10} {:>10} {:>10}",
        "method", "rank1", "eer", "gmr@0.1", "gmr@0.01", "gmr@0.001"
    );
    for classifier in Classifier::ALL {
        let acc = rank1_identification(&probes, &rec, classifier)?;
        let scores = build_scoreset(&probes, &rec, classifier, ScoreRule::ClassEvidence, &Protocol::AllVsAll)?;
        let m = verification_metrics(&scores, &DEFAULT_FAR_TARGETS)?;
        println!(
            "{:<8} {:>10.6} {:>10.6} {:>10.6} {:>10.6} {:>10.6}",
            classifier.name(),
            acc,
            m.eer,
            m.gmr_at_far[0].gmr,
            m.gmr_at_far[1].gmr,
            m.gmr_at_far[2].gmr
        );
    }
    Ok(())
}
