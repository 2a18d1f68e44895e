//! Text records → confounder features.
//!
//! Raw documents are tokenized into a [`TokenizedCorpus`], counted into a
//! sparse [`DocumentTermMatrix`], optionally bounded by term/document
//! frequency or tf-idf, and summarized per diagnosis through a keyness
//! [`KeynessLexicon`] into [`DiagnosisShares`]. Nothing here is random.

mod dtm;
mod io;
mod keyness;
mod lexicon;
mod preprocess;

pub use dtm::{bound_tf, build_dtm, tfidf_scores, weight_tfidf, DocumentTermMatrix, DtmBounds, SparseMatrix, Weighting};
pub use io::{read_corpus, read_corpus_csv, read_corpus_dir, write_corpus_csv, write_corpus_dir, RawCorpus};
pub use keyness::{keyness, score, strip_author_keyness, ClassKeyness, Contingency, Measure};
pub use lexicon::{build_lexicon, diagnosis_shares, DiagnosisShares, KeynessLexicon, LexiconOptions};
pub use preprocess::{
    default_stopwords, preprocess, CorpusStats, IdentityStemmer, PreprocessOptions, Stemmer, SuffixStemmer,
    TokenizedCorpus,
};
