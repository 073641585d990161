//! Scratch: copy-task learning-rate calibration.
use alirector_core::alignment::*;
use alirector_core::corpus;
use alirector_core::model::{Arch, ModelConfig, TemplateId};
use alirector_core::train::TrainConfig;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(3e-3);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(30);
    let hidden: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16);
    let count: usize = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(260);

    let config = corpus::CorpusConfig { count, vocab_size: 15, min_len: 3, max_len: 6, seed: 77 };
    let sentences = corpus::generate_clean_corpus(&config).unwrap();
    let vocab = corpus::Vocab::new(15).unwrap();
    let rules: Vec<corpus::CorruptionRule> = corpus::ErrorKind::ALL
        .iter()
        .map(|&kind| corpus::CorruptionRule { kind, rate: 0.55 / 4.0, span_len: 2 })
        .collect();
    // Prediction slot always holds the gold target: the aligner's optimal
    // policy is to copy its second input field.
    let make = |(i, s): (usize, &corpus::CleanSentence)| {
        let ex = corpus::corrupt(s, &rules, &vocab, 1000 + i as u64).unwrap();
        AlignmentExample { source: ex.source, prediction: ex.target.clone(), target: ex.target }
    };
    let n_train = count - 20;
    let triples: Vec<AlignmentExample> = sentences[..n_train].iter().enumerate().map(make).collect();
    let dev: Vec<AlignmentExample> = sentences[n_train..].iter().enumerate().map(make).collect();
    let model_config = ModelConfig {
        arch: Arch::EncoderDecoder, layers: 1, heads: 2, hidden_dim: hidden, ffn_dim: hidden * 2,
        vocab_size: 24, max_positions: 48, dropout: 0.0, dropout_src: 0.0,
    };
    let train_config = TrainConfig {
        batch_size: 16, max_epochs: epochs, learning_rate: lr, warmup_steps: 20, seed: 5,
        patience: epochs, adam_beta1: 0.9, adam_beta2: 0.999, adam_eps: 1e-8,
    };
    let t0 = std::time::Instant::now();
    let outcome = train_alignment(&triples, &dev, Direction::Forward, &model_config, &train_config, TemplateId::DEFAULT, 10, None).unwrap();
    for e in &outcome.epochs {
        println!("epoch {} train_loss {:.4} dev_f05 {:.2} probe {:.4}", e.epoch, e.train_loss, e.dev_f05, e.probe.total);
    }
    let exact = dev.iter().filter(|ex| {
        align_decode(&outcome.model, &ex.source, &ex.prediction, Direction::Forward, AblationMode::None, TemplateId::DEFAULT, 1, 10).unwrap() == ex.target
    }).count();
    println!("exact match {}/{} in {:.1}s", exact, dev.len(), t0.elapsed().as_secs_f64());
}
