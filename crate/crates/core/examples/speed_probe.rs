//! Scratch: per-example training/decoding cost at desk scale.
use alirector_core::corpus::{self, Vocab};
use alirector_core::correction::{self, CorrectionTask};
use alirector_core::model::{Mode, ModelParams, Role, TemplateId};
use alirector_core::pipeline::RunSettings;
use alirector_core::seed;
use alirector_core::train::TrainTask;
use std::time::Instant;

fn main() {
    let s = RunSettings::default();
    let vocab = Vocab::new(s.vocab_size).unwrap();
    let rules = s.corruption_rules().unwrap();
    let sentences = corpus::generate_clean_corpus(&corpus::CorpusConfig {
        count: 400, vocab_size: s.vocab_size, min_len: s.min_len, max_len: s.max_len, seed: 3,
    }).unwrap();
    let examples: Vec<corpus::ParallelExample> = sentences.iter().enumerate()
        .map(|(i, sent)| corpus::corrupt(sent, &rules, &vocab, i as u64).unwrap()).collect();

    let model = ModelParams::init(s.model_config(), Role::Corrector, 1).unwrap();
    println!("params: {}", model.store.param_count());
    let task = CorrectionTask { examples: &examples, dev: &examples[..50], template: TemplateId::DEFAULT, max_decode_len: s.max_decode_len() };

    // forward+backward cost
    let mut grads = alirector_core::model::grad_buffer(&model.store);
    let t0 = Instant::now();
    for i in 0..200 {
        let mut rng = seed::rng(1, "d", i as u64);
        let (tape, loss, _) = task.example_loss(&model, i % examples.len(), &mut Mode::Train { rng: &mut rng }).unwrap();
        tape.backward(loss, &model.store, &mut grads);
    }
    let fwd_bwd = t0.elapsed().as_secs_f64() / 200.0;
    println!("fwd+bwd: {:.2} ms/example", fwd_bwd * 1e3);

    // greedy decode cost
    let srcs: Vec<Vec<u32>> = examples[..50].iter().map(|e| e.source.clone()).collect();
    let t0 = Instant::now();
    correction::predict_corpus(&model, &srcs, 1, s.max_decode_len(), TemplateId::DEFAULT).unwrap();
    println!("greedy decode: {:.2} ms/example", t0.elapsed().as_secs_f64() / 50.0 * 1e3);

    let t0 = Instant::now();
    correction::predict_corpus(&model, &srcs, s.beam_size, s.max_decode_len(), TemplateId::DEFAULT).unwrap();
    println!("beam-{} decode: {:.2} ms/example", s.beam_size, t0.elapsed().as_secs_f64() / 50.0 * 1e3);

    // one epoch estimate for the desk preset
    let per_epoch_train = fwd_bwd * s.train_count as f64 * 0.8;
    println!("corrector epoch (~{} ex): {:.0} s", (s.train_count as f64 * 0.8) as usize, per_epoch_train);
}
