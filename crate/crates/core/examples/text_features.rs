//! Text pipeline on synthetic psychologist reports: preprocessing, bounded
//! and tf-idf document-term matrices, a keyness lexicon from a labeled
//! reference corpus, and per-report diagnosis shares.

use mtdml::dgp::{generate, DgpSpec, TextModel};
use mtdml::text::{
    bound_tf, build_dtm, build_lexicon, default_stopwords, diagnosis_shares, preprocess, weight_tfidf, LexiconOptions,
    PreprocessOptions, SuffixStemmer,
};

fn main() -> mtdml::Result<()> {
    let spec = DgpSpec { n: 1000, text: Some(TextModel::default()), ..DgpSpec::default() };
    let sim = generate(&spec)?;
    let corpus = sim.corpus.expect("text mode");
    let stop = default_stopwords();
    let stem = SuffixStemmer::default();
    let tok = preprocess(corpus.ids.clone(), &corpus.texts, &stop, &stem, PreprocessOptions::default())?;
    let stats = tok.stats();
    println!("{} reports, {:.1} tokens and {:.1} types on average", stats.n_docs, stats.mean_tokens, stats.mean_types);

    let counts = build_dtm(&tok)?;
    let bounded = bound_tf(&counts, 20, 10)?;
    let tfidf = weight_tfidf(&bounded, 0.999)?;
    println!("vocabulary {} -> bounded {} -> tf-idf {}", counts.n_terms(), bounded.n_terms(), tfidf.n_terms());

    let side = sim.lexicon_corpus.expect("text mode");
    let side_tok = preprocess(side.corpus.ids.clone(), &side.corpus.texts, &stop, &stem, PreprocessOptions::default())?;
    let lex = build_lexicon(&build_dtm(&side_tok)?, &side.labels, &side.diagnoses, &LexiconOptions::default())?;
    for (k, (dx, terms)) in lex.diagnoses.iter().zip(&lex.tokens_of).enumerate() {
        let own: Vec<&str> = terms
            .iter()
            .filter(|t| !t.contains('_') && lex.tokens_of.iter().enumerate().all(|(o, s)| o == k || !s.contains(*t)))
            .take(5)
            .map(String::as_str)
            .collect();
        println!("{dx}: {} terms, own onegrams include {}", terms.len(), own.join(" "));
    }

    let shares = diagnosis_shares(&tok, &lex)?;
    let latent = sim.latent.expect("text mode");
    let hits = (0..shares.doc_ids.len())
        .filter(|&i| {
            let row = shares.shares.row(i);
            (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])) == Some(latent[i])
        })
        .count();
    println!("largest share names the latent diagnosis in {hits} of {} reports", shares.doc_ids.len());
    Ok(())
}
