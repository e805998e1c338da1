use planminer::corpus::{generate_synthetic, SynthConfig};
use planminer::embeddings::{train_sgns, SgnsConfig};
use planminer::textproc::{segment_sentences, TextProcessor};

#[test]
fn loss_decreases_every_epoch_on_the_synthetic_corpus() {
    let corpus = generate_synthetic(&SynthConfig::default()).unwrap();
    let tp = TextProcessor::default();
    let sentences: Vec<Vec<String>> = corpus
        .notes
        .iter()
        .flat_map(|n| {
            segment_sentences(&n.text)
                .into_iter()
                .map(|s| {
                    tp.tokenize_lemmatize(s.text(&n.text))
                        .into_iter()
                        .filter(|t| !t.is_punct())
                        .map(|t| t.lemma)
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let model = train_sgns(&sentences, &SgnsConfig::default()).unwrap();
    println!("vocab {} losses {:?}", model.matrix.len(), model.epoch_losses);
    for w in model.epoch_losses.windows(2) {
        assert!(w[1] < w[0], "{:?}", model.epoch_losses);
    }
}
