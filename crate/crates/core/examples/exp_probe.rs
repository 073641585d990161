//! Scratch: end-to-end desk-preset probe for the directional experiments.
use alirector_core::alignment::{self, AblationMode, Direction};
use alirector_core::corpus::{self, ParallelExample, Vocab};
use alirector_core::correction;
use alirector_core::distill::{self, TeacherBundle};
use alirector_core::eval::{self, EvalTriple};
use alirector_core::pipeline::RunSettings;
use alirector_core::seed;
use std::time::Instant;

fn gen(settings: &RunSettings, tag: &str, count: usize) -> Vec<ParallelExample> {
    let vocab = Vocab::new(settings.vocab_size).unwrap();
    let rules = settings.corruption_rules().unwrap();
    let part_seed = seed::derive(settings.seed, tag, 0);
    let sentences = corpus::generate_clean_corpus(&corpus::CorpusConfig {
        count, vocab_size: settings.vocab_size, min_len: settings.min_len, max_len: settings.max_len, seed: part_seed,
    }).unwrap();
    sentences.iter().enumerate()
        .map(|(i, s)| corpus::corrupt(s, &rules, &vocab, seed::derive(part_seed, "noise", i as u64)).unwrap())
        .collect()
}

fn score(test: &[ParallelExample], hyps: &[Vec<u32>]) -> (f64, f64, f64, usize) {
    let triples: Vec<EvalTriple> = test.iter().zip(hyps).map(|(e, h)| EvalTriple {
        source: e.source.clone(), target: e.target.clone(), hypothesis: h.clone(),
    }).collect();
    let r = eval::score_corpus(&triples);
    (r.precision, r.recall, r.f05, r.overcorrections)
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mut s = RunSettings::default();
    if let Some(v) = args.get(1) { s.seed = v.parse().unwrap(); }
    if let Some(v) = args.get(2) { s.train_count = v.parse().unwrap(); }
    if let Some(v) = args.get(3) { s.hidden_dim = v.parse().unwrap(); s.ffn_dim = 2 * s.hidden_dim; }
    if let Some(v) = args.get(4) { s.max_epochs = v.parse().unwrap(); }
    eprintln!("seed={} train={} hidden={} epochs={}", s.seed, s.train_count, s.hidden_dim, s.max_epochs);
    let template = s.template();
    let t_all = Instant::now();

    let pool = gen(&s, "train-pool", s.train_count);
    let dev = gen(&s, "dev-pool", s.dev_count);
    let test = gen(&s, "test-pool", s.test_count);
    let split = corpus::split_dataset(pool.clone(), s.split_ratio, seed::derive(s.seed, "split", 0)).unwrap();
    eprintln!("data: {:.0}s (corr {} align {})", t_all.elapsed().as_secs_f64(), split.correction_train.len(), split.alignment_train.len());

    let sources: Vec<Vec<u32>> = test.iter().map(|e| e.source.clone()).collect();
    let mdl = s.model_config();

    // vanilla baseline on the full pool
    let t = Instant::now();
    let vanilla = correction::train_correction(&pool, &dev, &mdl, &s.train_config(seed::derive(s.seed, "train-correct-full", 0)), template, s.max_decode_len()).unwrap();
    eprintln!("vanilla: {:.0}s best_epoch={} dev={:.2}", t.elapsed().as_secs_f64(), vanilla.best_epoch, vanilla.best_dev.f05);
    let t = Instant::now();
    let hyp_vanilla = correction::predict_corpus(&vanilla.model, &sources, s.beam_size, s.max_decode_len(), template).unwrap();
    eprintln!("vanilla test decode: {:.0}s", t.elapsed().as_secs_f64());

    // corrector on 80%
    let t = Instant::now();
    let corrector = correction::train_correction(&split.correction_train, &dev, &mdl, &s.train_config(seed::derive(s.seed, "train-correct", 0)), template, s.max_decode_len()).unwrap();
    eprintln!("corrector: {:.0}s best_epoch={} dev={:.2}", t.elapsed().as_secs_f64(), corrector.best_epoch, corrector.best_dev.f05);

    // triples
    let t = Instant::now();
    let triples = alignment::build_alignment_triples(&corrector.model, &split.alignment_train, s.beam_size, s.max_decode_len(), template).unwrap();
    let dev_triples = alignment::build_alignment_triples(&corrector.model, &dev, s.beam_size, s.max_decode_len(), template).unwrap();
    eprintln!("triples: {:.0}s", t.elapsed().as_secs_f64());
    let changed = triples.iter().filter(|t| t.prediction != t.source).count();
    let correct = triples.iter().filter(|t| t.prediction == t.target).count();
    eprintln!("  corrector changed {}/{} sources; exactly right on {}", changed, triples.len(), correct);

    // teachers
    let amdl = s.aligner_model_config();
    let t = Instant::now();
    let init = s.aligner_init_from_corrector.then(|| corrector.model.clone());
    let fwd = alignment::train_alignment(&triples, &dev_triples, Direction::Forward, &amdl, &s.aligner_train_config(seed::derive(s.seed, "train-align-forward", 0), triples.len()), template, s.max_decode_len(), init.as_ref()).unwrap();
    let rev = alignment::train_alignment(&triples, &dev_triples, Direction::Reverse, &amdl, &s.aligner_train_config(seed::derive(s.seed, "train-align-reverse", 0), triples.len()), template, s.max_decode_len(), init.as_ref()).unwrap();
    eprintln!("teachers: {:.0}s fwd dev={:.2} rev dev={:.2}", t.elapsed().as_secs_f64(), fwd.best_dev.f05, rev.best_dev.f05);
    let teachers = TeacherBundle::new(fwd.model, rev.model).unwrap();

    // alirector student
    let t = Instant::now();
    let student = distill::train_alirector(corrector.model.clone(), &teachers, &triples, &dev, &s.distill_config(), &s.continue_train_config(seed::derive(s.seed, "distill", 0), triples.len()), AblationMode::None, template, s.max_decode_len()).unwrap();
    eprintln!("student: {:.0}s best_epoch={} dev={:.2}", t.elapsed().as_secs_f64(), student.best_epoch, student.best_dev.f05);
    let hyp_student = correction::predict_corpus(&student.model, &sources, s.beam_size, s.max_decode_len(), template).unwrap();

    // beta=0 control
    let mut cfg0 = s.distill_config(); cfg0.beta = 0.0;
    let control = distill::train_alirector(corrector.model.clone(), &teachers, &triples, &dev, &cfg0, &s.continue_train_config(seed::derive(s.seed, "distill", 0), triples.len()), AblationMode::None, template, s.max_decode_len()).unwrap();
    let hyp_control = correction::predict_corpus(&control.model, &sources, s.beam_size, s.max_decode_len(), template).unwrap();

    // disc variants
    let disc_src = distill::train_alirector(corrector.model.clone(), &teachers, &triples, &dev, &s.distill_config(), &s.continue_train_config(seed::derive(s.seed, "distill", 0), triples.len()), AblationMode::DiscSource, template, s.max_decode_len()).unwrap();
    let hyp_disc_src = correction::predict_corpus(&disc_src.model, &sources, s.beam_size, s.max_decode_len(), template).unwrap();
    let disc_pred = distill::train_alirector(corrector.model.clone(), &teachers, &triples, &dev, &s.distill_config(), &s.continue_train_config(seed::derive(s.seed, "distill", 0), triples.len()), AblationMode::DiscPredict, template, s.max_decode_len()).unwrap();
    let hyp_disc_pred = correction::predict_corpus(&disc_pred.model, &sources, s.beam_size, s.max_decode_len(), template).unwrap();

    // predict-and-align (forward aligner)
    let t = Instant::now();
    let hyp_paa: Vec<Vec<u32>> = sources.iter().map(|src| alignment::predict_and_align(&corrector.model, &teachers.forward, src, s.beam_size, s.max_decode_len(), template, AblationMode::None).unwrap()).collect();
    eprintln!("paa decode: {:.0}s", t.elapsed().as_secs_f64());

    // corrector-only on test (for reference)
    let hyp_corr = correction::predict_corpus(&corrector.model, &sources, s.beam_size, s.max_decode_len(), template).unwrap();

    for (name, hyps) in [("vanilla", &hyp_vanilla), ("corrector80", &hyp_corr), ("alirector", &hyp_student), ("beta0", &hyp_control), ("disc_source", &hyp_disc_src), ("disc_predict", &hyp_disc_pred), ("paa", &hyp_paa)] {
        let (p, r, f, fp) = score(&test, hyps);
        println!("{:<12} P={:.2} R={:.2} F0.5={:.2} FP={}", name, p, r, f, fp);
    }
    println!("total: {:.0}s", t_all.elapsed().as_secs_f64());
}
