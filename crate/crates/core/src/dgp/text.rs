//! Synthetic German-like documents. Words are three consonant–vowel
//! syllables ending in a, i, o or u, so the default suffix stemmer leaves
//! them intact and every generated content word survives preprocessing.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, Poisson, Zipf};

use super::TextModel;

const CONSONANTS: [char; 12] = ['b', 'd', 'f', 'g', 'k', 'l', 'm', 'p', 'r', 't', 'v', 'z'];
const VOWELS: [char; 4] = ['a', 'i', 'o', 'u'];
const FILLERS: [&str; 12] = ["und", "der", "die", "das", "ist", "mit", "nicht", "auf", "für", "sich", "eine", "wird"];

/// Offsets keeping the general, diagnosis and author word families disjoint.
const DIAGNOSIS_BASE: usize = 60_000;
const AUTHOR_BASE: usize = 90_000;

/// The `k`-th synthetic word (`k < 48^3`).
pub fn word(k: usize) -> String {
    let mut out = String::with_capacity(6);
    for pos in [2u32, 1, 0] {
        let s = (k / 48usize.pow(pos)) % 48;
        out.push(CONSONANTS[s / 4]);
        out.push(VOWELS[s % 4]);
    }
    out
}

pub fn diagnosis_word(diagnosis: usize, j: usize) -> String {
    word(DIAGNOSIS_BASE + diagnosis * 200 + j)
}

pub fn author_word(author: usize, j: usize) -> String {
    word(AUTHOR_BASE + author * 50 + j)
}

/// One raw document: content words mixed from the diagnosis family (share
/// `signal`), the author's signature words and a Zipf-distributed general
/// vocabulary, interleaved with stopwords, punctuation and the odd number.
pub fn document(rng: &mut dyn RngCore, diagnosis: usize, author: usize, model: &TextModel, signal: f64) -> String {
    let zipf = Zipf::new(model.vocab_size as f64, model.zipf_exponent).expect("valid Zipf parameters");
    let len = Poisson::new(model.doc_length).expect("positive doc length").sample(rng).max(1.0) as usize;
    let mut out = String::with_capacity(len * 9);
    let mut sentence_left = 0usize;
    for _ in 0..len {
        if sentence_left == 0 {
            if !out.is_empty() {
                out.push_str(". ");
            }
            sentence_left = rng.random_range(8..16);
        }
        let u: f64 = rng.random();
        let w = if u < signal {
            diagnosis_word(diagnosis, rng.random_range(0..model.diagnosis_words))
        } else if u < signal + model.author_signal {
            author_word(author, rng.random_range(0..10))
        } else {
            word(zipf.sample(rng) as usize - 1)
        };
        if out.ends_with(". ") || out.is_empty() {
            let mut c = w.chars();
            if let Some(f) = c.next() {
                out.extend(f.to_uppercase());
                out.push_str(c.as_str());
            }
        } else {
            out.push_str(&w);
        }
        out.push(' ');
        if rng.random::<f64>() < model.stopword_rate {
            out.push_str(FILLERS[rng.random_range(0..FILLERS.len())]);
            out.push(' ');
        }
        if rng.random::<f64>() < 0.01 {
            out.push_str(&rng.random_range(1..2025).to_string());
            out.push_str(", ");
        }
        sentence_left -= 1;
    }
    out.push('.');
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::{default_stopwords, Stemmer, SuffixStemmer};
    use std::collections::HashSet;

    #[test]
    fn words_are_distinct_and_stable_under_stemming() {
        let stem = SuffixStemmer::default();
        let sw = default_stopwords();
        let mut seen = HashSet::new();
        for k in (0..110_000).step_by(7) {
            let w = word(k);
            assert_eq!(stem.stem(&w), w);
            assert!(!sw.contains(&w));
            assert!(seen.insert(w));
        }
        assert_ne!(diagnosis_word(0, 0), author_word(0, 0));
    }
}
