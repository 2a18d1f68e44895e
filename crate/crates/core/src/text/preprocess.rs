use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Token normalizer applied after stopword removal.
pub trait Stemmer: Sync {
    fn stem(&self, token: &str) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityStemmer;

impl Stemmer for IdentityStemmer {
    fn stem(&self, token: &str) -> String {
        token.to_string()
    }
}

/// Strips the longest matching suffix while the remaining stem keeps at
/// least `min_stem` characters, repeating until nothing matches. Running it
/// to a fixpoint makes `stem(stem(t)) == stem(t)`.
#[derive(Debug, Clone)]
pub struct SuffixStemmer {
    suffixes: Vec<String>,
    min_stem: usize,
}

impl SuffixStemmer {
    pub fn new(suffixes: &[&str], min_stem: usize) -> Self {
        let mut suffixes: Vec<String> = suffixes.iter().map(|s| s.to_lowercase()).collect();
        suffixes.sort_by(|a, b| b.chars().count().cmp(&a.chars().count()).then_with(|| a.cmp(b)));
        suffixes.dedup();
        Self { suffixes, min_stem }
    }
}

impl Default for SuffixStemmer {
    /// German and English inflectional endings.
    fn default() -> Self {
        Self::new(
            &[
                "ungen", "heiten", "keiten", "ung", "heit", "keit", "lich", "isch", "ern", "en", "er", "es", "em",
                "e", "n", "s", "ing", "ed", "ly",
            ],
            3,
        )
    }
}

impl Stemmer for SuffixStemmer {
    fn stem(&self, token: &str) -> String {
        let mut t = token.to_string();
        'outer: loop {
            let len = t.chars().count();
            for s in &self.suffixes {
                let sl = s.chars().count();
                if len >= sl + self.min_stem && t.ends_with(s.as_str()) {
                    t.truncate(t.len() - s.len());
                    continue 'outer;
                }
            }
            return t;
        }
    }
}

/// A small German + English function-word list.
pub fn default_stopwords() -> HashSet<String> {
    const WORDS: &str = "aber alle allem allen aller alles als also am an ander andere anderen auch auf aus bei \
        bin bis bist da damit dann das dass dein dem den denn der des dessen die dies diese diesem diesen dieser \
        dieses doch dort du durch ein eine einem einen einer eines er es etwas euch euer für gegen hab habe haben \
        hat hatte hier hin hinter ich ihm ihn ihnen ihr ihre im in indem ins ist jede jedem jeden jeder jedes \
        jetzt kann kein keine können man manche mein mit muss nach nicht nichts noch nun nur ob oder ohne sehr \
        sein seine sich sie sind so solche soll sondern sonst über um und uns unter viel vom von vor war waren \
        was weil welche wenn werden wie wieder will wir wird wo zu zum zur zwar zwischen \
        a an and are as at be but by for from had has have he her his i in is it its of on or she so that the \
        their them they this to was were which will with you";
    WORDS.split_whitespace().map(str::to_string).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessOptions {
    /// Add adjacent-token bigram types next to the onegrams.
    pub bigrams: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        Self { bigrams: true }
    }
}

/// Bigram types join their two tokens with this separator, which cannot
/// occur inside a token.
pub const BIGRAM_SEP: char = '_';

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenizedCorpus {
    pub doc_ids: Vec<String>,
    /// Surviving onegram tokens per document, in order.
    pub docs: Vec<Vec<String>>,
    pub bigrams: bool,
    /// Documents with no surviving token.
    pub empty_docs: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub mean_tokens: f64,
    /// Mean number of distinct onegram types per document.
    pub mean_types: f64,
}

impl TokenizedCorpus {
    pub fn n_docs(&self) -> usize {
        self.docs.len()
    }

    /// Onegram and (if enabled) bigram occurrences of one document.
    pub fn types_of(&self, doc: usize) -> Vec<String> {
        let d = &self.docs[doc];
        let mut out = d.clone();
        if self.bigrams {
            out.extend(d.windows(2).map(|w| format!("{}{BIGRAM_SEP}{}", w[0], w[1])));
        }
        out
    }

    /// Sorted unique type list over the corpus.
    pub fn vocab(&self) -> Vec<String> {
        let mut set = BTreeSet::new();
        for i in 0..self.n_docs() {
            set.extend(self.types_of(i));
        }
        set.into_iter().collect()
    }

    pub fn stats(&self) -> CorpusStats {
        let n = self.n_docs().max(1) as f64;
        let tokens: usize = self.docs.iter().map(Vec::len).sum();
        let types: usize = self.docs.iter().map(|d| d.iter().collect::<HashSet<_>>().len()).sum();
        CorpusStats { n_docs: self.n_docs(), mean_tokens: tokens as f64 / n, mean_types: types as f64 / n }
    }

    /// Documents joined back to text, one space between tokens.
    pub fn texts(&self) -> Vec<String> {
        self.docs.iter().map(|d| d.join(" ")).collect()
    }
}

fn tokenize(text: &str, stopwords: &HashSet<String>, stemmer: &dyn Stemmer) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty() && !t.chars().any(char::is_numeric) && !stopwords.contains(*t))
        .map(|t| stemmer.stem(t))
        .filter(|t| !t.is_empty() && !stopwords.contains(t))
        .collect()
}

/// Lowercases, splits on non-alphanumeric characters, drops tokens that
/// contain digits, removes stopwords, stems, and removes stopwords again (a
/// stem may coincide with one).
pub fn preprocess(
    doc_ids: Vec<String>,
    texts: &[String],
    stopwords: &HashSet<String>,
    stemmer: &dyn Stemmer,
    options: PreprocessOptions,
) -> Result<TokenizedCorpus> {
    if texts.is_empty() {
        return Err(Error::Parameter("cannot preprocess an empty corpus".into()));
    }
    if stopwords.is_empty() {
        return Err(Error::Parameter("stopword list must not be empty".into()));
    }
    if doc_ids.len() != texts.len() {
        return Err(Error::Parameter("document ids and texts differ in length".into()));
    }
    let docs: Vec<Vec<String>> = texts.iter().map(|t| tokenize(t, stopwords, stemmer)).collect();
    let empty_docs = docs.iter().enumerate().filter(|(_, d)| d.is_empty()).map(|(i, _)| i).collect();
    Ok(TokenizedCorpus { doc_ids, docs, bigrams: options.bigrams, empty_docs })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stop(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn run(texts: &[&str], sw: &HashSet<String>, stemmer: &dyn Stemmer) -> TokenizedCorpus {
        let texts: Vec<String> = texts.iter().map(|s| s.to_string()).collect();
        let ids = (0..texts.len()).map(|i| i.to_string()).collect();
        preprocess(ids, &texts, sw, stemmer, PreprocessOptions::default()).unwrap()
    }

    #[test]
    fn apple_example() {
        let before = run(&["I ate an apple apple"], &stop(&["zzz"]), &IdentityStemmer);
        assert_eq!(before.docs[0].len(), 5);
        assert_eq!(before.docs[0].iter().collect::<HashSet<_>>().len(), 4);
        let c = run(&["I ate an apple apple"], &stop(&["i", "an"]), &IdentityStemmer);
        assert_eq!(c.docs[0], vec!["ate", "apple", "apple"]);
        assert_eq!(c.vocab(), vec!["apple", "apple_apple", "ate", "ate_apple"]);
    }

    #[test]
    fn punctuation_and_digits_removed() {
        let c = run(&["?!,. --", "Haus 2024 a1 Baum."], &stop(&["der"]), &IdentityStemmer);
        assert!(c.docs[0].is_empty());
        assert_eq!(c.empty_docs, vec![0]);
        assert_eq!(c.docs[1], vec!["haus", "baum"]);
    }

    #[test]
    fn suffix_stemmer_is_idempotent() {
        let s = SuffixStemmer::default();
        for w in ["förderungen", "schulische", "lernens", "kinder", "abc", "es", "häuser"] {
            let once = s.stem(w);
            assert_eq!(s.stem(&once), once);
            assert!(once.chars().count() >= 3.min(w.chars().count()));
        }
        assert_eq!(s.stem("förderungen"), "förd");
    }

    #[test]
    fn preprocess_is_idempotent() {
        let sw = default_stopwords();
        let stemmer = SuffixStemmer::default();
        let c = run(&["Die Kinder lernen in der Schule, und das Lernen fällt schwer!", "Sprachliche Förderungen 3x"], &sw, &stemmer);
        let again = run(&c.texts().iter().map(String::as_str).collect::<Vec<_>>(), &sw, &stemmer);
        assert_eq!(c.docs, again.docs);
    }

    #[test]
    fn empty_inputs_rejected() {
        assert!(preprocess(vec![], &[], &stop(&["a"]), &IdentityStemmer, PreprocessOptions::default()).is_err());
        assert!(preprocess(vec!["1".into()], &["x".into()], &HashSet::new(), &IdentityStemmer, PreprocessOptions::default()).is_err());
    }
}
