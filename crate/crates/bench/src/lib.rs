//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tweetsent_core::dataset::ImageTensor;
use tweetsent_core::subword::EncodedText;
use tweetsent_core::text::{clean, StopwordList, TokenSequence};

const WORDS: &[&str] = &[
    "women", "rights", "equality", "justice", "hate", "speech", "support", "oppose", "march", "protest",
    "voice", "power", "survivors", "believe", "change", "world", "MeToo", "TimesUp", "respect", "courage",
];

/// `n` cleaned tweet-like token sequences.
pub fn corpus(n: usize, seed: u64) -> Vec<TokenSequence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let stop = StopwordList::english();
    (0..n)
        .map(|_| {
            let len = rng.gen_range(3..16);
            let text: Vec<String> = (0..len)
                .map(|_| {
                    let w = WORDS[rng.gen_range(0..WORDS.len())];
                    if rng.gen_bool(0.2) {
                        format!("#{w}{}", rng.gen_range(0..100))
                    } else {
                        w.to_string()
                    }
                })
                .collect();
            clean(&text.join(" "), &stop)
        })
        .collect()
}

pub fn scores_and_labels(n: usize, seed: u64) -> (Vec<f32>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = (0..n).map(|_| u8::from(rng.gen_bool(0.3))).collect();
    let scores = (0..n).map(|_| (rng.gen_range(0..1000) as f32) / 1000.0).collect();
    (scores, labels)
}

pub fn batch(n: usize, vocab: usize, max_len: usize, side: usize, seed: u64) -> (Vec<EncodedText>, Vec<ImageTensor>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let texts = (0..n)
        .map(|_| {
            let len = rng.gen_range(1..=max_len);
            let mut ids: Vec<u32> = (0..len).map(|_| rng.gen_range(1..vocab as u32)).collect();
            ids.resize(max_len, 0);
            EncodedText { ids, actual_len: len }
        })
        .collect();
    let images = (0..n)
        .map(|_| ImageTensor::new(side, (0..side * side * 3).map(|_| rng.gen()).collect()).unwrap())
        .collect();
    (texts, images)
}
