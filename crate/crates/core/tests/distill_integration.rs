//! Integration checks for the distillation loop: objective decomposition,
//! the beta = 0 equivalence with plain continued fine-tuning, teacher
//! freezing, and the step-0 teacher/student divergence sanity check.

use alirector_core::alignment::{build_alignment_triples, AblationMode, Direction};
use alirector_core::corpus::{self, ParallelExample, Vocab};
use alirector_core::correction;
use alirector_core::distill::{self, DistillConfig, TeacherBundle};
use alirector_core::model::{Arch, ModelConfig, ModelParams, Role, TemplateId};
use alirector_core::seed;
use alirector_core::train::TrainConfig;

fn micro_config() -> ModelConfig {
    ModelConfig {
        arch: Arch::EncoderDecoder,
        layers: 1,
        heads: 2,
        hidden_dim: 24,
        ffn_dim: 48,
        vocab_size: 24,
        max_positions: 40,
        dropout: 0.1,
        dropout_src: 0.1,
    }
}

fn train_config(epochs: usize, seed: u64) -> TrainConfig {
    TrainConfig {
        batch_size: 8,
        max_epochs: epochs,
        learning_rate: 2e-3,
        warmup_steps: 4,
        seed,
        patience: epochs,
        adam_beta1: 0.9,
        adam_beta2: 0.999,
        adam_eps: 1e-8,
    }
}

/// Tiny corrupted corpus plus a quickly trained corrector and teachers.
fn fixture() -> (
    Vec<ParallelExample>,
    Vec<ParallelExample>,
    ModelParams,
    TeacherBundle,
    Vec<alirector_core::alignment::AlignmentExample>,
) {
    let vocab = Vocab::new(15).unwrap();
    let rules: Vec<corpus::CorruptionRule> = corpus::ErrorKind::ALL
        .iter()
        .map(|&kind| corpus::CorruptionRule { kind, rate: 0.55 / 4.0, span_len: 2 })
        .collect();
    let sentences = corpus::generate_clean_corpus(&corpus::CorpusConfig {
        count: 120,
        vocab_size: 15,
        min_len: 4,
        max_len: 8,
        seed: 9,
    })
    .unwrap();
    let pool: Vec<ParallelExample> = sentences
        .iter()
        .enumerate()
        .map(|(i, s)| corpus::corrupt(s, &rules, &vocab, seed::derive(9, "n", i as u64)).unwrap())
        .collect();
    let (train, dev) = pool.split_at(100);

    let corrector = correction::train_correction(
        train,
        dev,
        &micro_config(),
        &train_config(2, 3),
        TemplateId::DEFAULT,
        12,
    )
    .unwrap();
    let triples =
        build_alignment_triples(&corrector.model, train, 1, 12, TemplateId::DEFAULT).unwrap();
    let dev_triples =
        build_alignment_triples(&corrector.model, dev, 1, 12, TemplateId::DEFAULT).unwrap();
    let fwd = alirector_core::alignment::train_alignment(
        &triples,
        &dev_triples,
        Direction::Forward,
        &micro_config(),
        &train_config(2, 4),
        TemplateId::DEFAULT,
        12,
        Some(&corrector.model),
    )
    .unwrap();
    let rev = alirector_core::alignment::train_alignment(
        &triples,
        &dev_triples,
        Direction::Reverse,
        &micro_config(),
        &train_config(2, 5),
        TemplateId::DEFAULT,
        12,
        Some(&corrector.model),
    )
    .unwrap();
    let teachers = TeacherBundle::new(fwd.model, rev.model).unwrap();
    (train.to_vec(), dev.to_vec(), corrector.model, teachers, triples)
}

#[test]
fn beta_zero_equals_continued_fine_tuning_step_for_step() {
    let (_, dev, corrector, teachers, triples) = fixture();
    let config = DistillConfig { alpha: 0.9, beta: 0.0, tau: 1.0 };
    let tc = train_config(2, 11);

    let distilled = distill::train_alirector(
        corrector.clone(),
        &teachers,
        &triples,
        &dev,
        &config,
        &tc,
        AblationMode::None,
        TemplateId::DEFAULT,
        12,
    )
    .unwrap();

    // The control run drops the distillation machinery entirely but keeps
    // the same data (the triples' source/target pairs), seed, and init.
    let control_examples: Vec<ParallelExample> = triples
        .iter()
        .map(|t| ParallelExample {
            source: t.source.clone(),
            target: t.target.clone(),
            applied_edits: vec![],
            example_seed: 0,
        })
        .collect();
    let control = correction::continue_correction(
        &control_examples,
        &dev,
        corrector,
        &tc,
        TemplateId::DEFAULT,
        12,
    )
    .unwrap();

    assert_eq!(distilled.steps.len(), control.steps.len());
    for (a, b) in distilled.steps.iter().zip(&control.steps) {
        assert_eq!(a.total, b.total, "per-step losses must match bitwise");
        assert_eq!(a.kd, 0.0);
    }
    assert_eq!(
        distilled.epochs.last().unwrap().dev_f05,
        control.epochs.last().unwrap().dev_f05
    );
}

#[test]
fn objective_decomposition_holds_every_step() {
    let (_, dev, corrector, teachers, triples) = fixture();
    let config = DistillConfig { alpha: 0.7, beta: 1.5, tau: 2.0 };
    let outcome = distill::train_alirector(
        corrector,
        &teachers,
        &triples,
        &dev,
        &config,
        &train_config(2, 13),
        AblationMode::None,
        TemplateId::DEFAULT,
        12,
    )
    .unwrap();
    assert!(!outcome.steps.is_empty());
    for step in &outcome.steps {
        let recomposed = step.gec
            + config.beta * (config.alpha * step.kd_forward + (1.0 - config.alpha) * step.kd_reverse);
        assert!(
            (step.total - recomposed).abs() < 1e-6,
            "total {} != decomposition {recomposed}",
            step.total
        );
        let kd = config.alpha * step.kd_forward + (1.0 - config.alpha) * step.kd_reverse;
        assert!((step.kd - kd).abs() < 1e-9);
    }
}

#[test]
fn teachers_stay_frozen_and_models_diverge_at_step_zero() {
    let (_, dev, corrector, teachers, triples) = fixture();
    let hashes_before = teachers.hashes();

    // Teachers initialized from the student's own weights still see
    // different inputs (alignment context), so kd > 0 at step 0.
    let cloned_teachers = TeacherBundle::new(
        corrector.clone().with_role(Role::ForwardAligner),
        corrector.clone().with_role(Role::ReverseAligner),
    )
    .unwrap();
    let config = DistillConfig { alpha: 0.5, beta: 1.0, tau: 1.0 };
    let kd0 = distill::probe_kd(&corrector, &cloned_teachers, &triples[..16], &config, TemplateId::DEFAULT)
        .unwrap();
    assert!(kd0.kd > 0.0, "alignment context must change teacher distributions, kd0 = {:?}", kd0);

    // A short distillation run must leave the real teachers untouched.
    let outcome = distill::train_alirector(
        corrector.clone(),
        &teachers,
        &triples,
        &dev,
        &config,
        &train_config(1, 17),
        AblationMode::None,
        TemplateId::DEFAULT,
        12,
    )
    .unwrap();
    assert_eq!(teachers.hashes(), hashes_before);
    assert_eq!(outcome.model.role, Role::AlirectorStudent);
    assert_ne!(outcome.model.content_hash(), corrector.content_hash());

    // Gradient isolation, FD-style: nudging a teacher weight changes the
    // kd value even though training never writes to teacher parameters.
    let mut nudged = teachers.clone();
    let last = nudged.forward.store.param_count() - 1; // output-head bias
    nudged.forward.store.data_mut()[last] += 1e-2;
    let kd_before = distill::probe_kd(&corrector, &teachers, &triples[..8], &config, TemplateId::DEFAULT)
        .unwrap();
    let kd_after = distill::probe_kd(&corrector, &nudged, &triples[..8], &config, TemplateId::DEFAULT)
        .unwrap();
    assert_ne!(kd_before.kd, kd_after.kd);
}

