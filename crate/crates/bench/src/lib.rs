//! Fixtures shared by the benchmarks in `benches/`.

use tumorseg_core::synth::{make_case, SynthSpec};
use tumorseg_core::{LabelVolume, ProbVolume};

/// A 64³ synthetic case with `members` noisy ensemble members.
pub fn case_64(members: usize) -> (LabelVolume, Vec<ProbVolume>) {
    make_case(&SynthSpec::brats_like("bench", 7, 64, 0.35, members))
        .expect("built-in case is valid")
}
