//! Seeded inputs shared by the benchmarks.

use chatmine::corpus::ChatLog;
use chatmine::pairmodel::{build_labeled_dialogs, LabeledDialog};
use chatmine::synth::{balanced_fixture, normalize, random_chat};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// An interleaving of `dialogs` synthetic dialogs, preprocessed, with its
/// true reply links.
pub fn chat(dialogs: usize, seed: u64) -> (ChatLog, Vec<Option<usize>>) {
    let (inter, _) = random_chat(&mut ChaCha8Rng::seed_from_u64(seed), dialogs, "bench");
    (normalize(&inter.log).expect("synthetic chats preprocess"), inter.parents)
}

/// `n` labeled dialogs across two projects.
pub fn labeled(n: usize, seed: u64) -> Vec<LabeledDialog> {
    let records = balanced_fixture(n, 2, seed);
    build_labeled_dialogs(&records, &Default::default(), &Default::default()).expect("fixture dialogs are valid")
}
