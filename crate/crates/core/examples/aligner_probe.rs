//! Scratch: aligner optimization probe at desk scale.
use alirector_core::alignment::{self, Direction};
use alirector_core::corpus::{self, Vocab};
use alirector_core::correction;
use alirector_core::pipeline::RunSettings;
use alirector_core::seed;
use alirector_core::train::TrainConfig;
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let lr: f64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(3e-3);
    let epochs: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(25);
    let batch: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(16);
    let ratio: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.8);

    let s = RunSettings::default();
    let vocab = Vocab::new(s.vocab_size).unwrap();
    let rules = s.corruption_rules().unwrap();
    let gen = |tag: &str, count: usize| -> Vec<corpus::ParallelExample> {
        let part_seed = seed::derive(s.seed, tag, 0);
        corpus::generate_clean_corpus(&corpus::CorpusConfig {
            count, vocab_size: s.vocab_size, min_len: s.min_len, max_len: s.max_len, seed: part_seed,
        }).unwrap().iter().enumerate()
          .map(|(i, x)| corpus::corrupt(x, &rules, &vocab, seed::derive(part_seed, "noise", i as u64)).unwrap())
          .collect()
    };
    let pool = gen("train-pool", 4000);
    let dev = gen("dev-pool", 120);
    let split = corpus::split_dataset(pool, ratio, seed::derive(s.seed, "split", 0)).unwrap();

    let mdl = s.model_config();
    let corrector = correction::train_correction(&split.correction_train, &dev, &mdl,
        &s.train_config(seed::derive(s.seed, "train-correct", 0)), s.template(), s.max_decode_len()).unwrap();
    eprintln!("corrector dev P={:.2} R={:.2} F={:.2} (corr_train={})", corrector.best_dev.precision, corrector.best_dev.recall, corrector.best_dev.f05, split.correction_train.len());

    let triples = alignment::build_alignment_triples(&corrector.model, &split.alignment_train, s.beam_size, s.max_decode_len(), s.template()).unwrap();
    let dev_triples = alignment::build_alignment_triples(&corrector.model, &dev, s.beam_size, s.max_decode_len(), s.template()).unwrap();

    let tc = TrainConfig { batch_size: batch, max_epochs: epochs, learning_rate: lr,
        warmup_steps: 20, seed: 7, patience: 10, adam_beta1: 0.9, adam_beta2: 0.999, adam_eps: 1e-8 };
    let t = Instant::now();
    let fwd = alignment::train_alignment(&triples, &dev_triples, Direction::Forward, &s.aligner_model_config(), &tc, s.template(), s.max_decode_len(), Some(&corrector.model)).unwrap();
    for e in &fwd.epochs { eprintln!("  ep {} loss {:.3} dev P={:.2} R={:.2} F={:.2}", e.epoch, e.train_loss, e.dev_p, e.dev_r, e.dev_f05); }
    eprintln!("fwd aligner: best ep {} dev P={:.2} R={:.2} F={:.2} ({:.0}s, lr={} epochs={} batch={} ratio={})", fwd.best_epoch, fwd.best_dev.precision, fwd.best_dev.recall, fwd.best_dev.f05, t.elapsed().as_secs_f64(), lr, epochs, batch, ratio);
}
