//! Fixed workloads shared by the benchmarks.

use linstate::gen::{FgSample, GenConfig, TermGen};
use linstate::typecheck::Signature;

/// A seeded corpus of FGCBV judgements over the generator signature.
pub fn corpus(seed: u64, n: usize) -> (Signature, Vec<FgSample>) {
    let mut g = TermGen::new(seed, GenConfig::default());
    let terms = (0..n).map(|_| g.fg_judgement()).collect();
    (g.sig, terms)
}
