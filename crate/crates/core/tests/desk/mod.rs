//! Shared three-seed experiment battery on the desk preset.
//!
//! Builds, once per test process: the vanilla baseline (full training
//! pool), the 80%-split corrector, both alignment teachers, the distilled
//! student, the beta = 0 control, both teacher-input ablations, and
//! two-stage predict-and-align - all evaluated on the held-out test set -
//! plus the beta sweep series on the dev set.

use std::collections::BTreeMap;
use std::time::Instant;

use alirector_core::alignment::{self, AblationMode, Direction};
use alirector_core::corpus::{self, ParallelExample, Vocab};
use alirector_core::correction;
use alirector_core::distill::{self, TeacherBundle};
use alirector_core::eval::{self, EvalTriple};
use alirector_core::model::ModelParams;
use alirector_core::pipeline::RunSettings;
use alirector_core::seed;
use alirector_core::train::LossBreakdown;
use alirector_core::TokenId;

pub const SEEDS: [u64; 3] = [1, 2, 3];
pub const SWEEP_BETAS: [f64; 4] = [0.5, 1.0, 1.5, 2.0];
pub const SWEEP_SEEDS: [u64; 2] = [1, 2];

#[derive(Debug, Clone, Copy)]
pub struct SystemScore {
    pub precision: f64,
    pub recall: f64,
    pub f05: f64,
    pub fp: f64,
}

pub struct Battery {
    /// system name -> one score per seed
    pub systems: BTreeMap<String, Vec<SystemScore>>,
    /// per seed: (probe kd at step 0, probe kd at the dev-best epoch)
    pub kd_probe: Vec<(f64, f64)>,
    /// recorded optimizer steps of one distillation run
    pub sample_steps: Vec<LossBreakdown>,
    /// (beta, seed-mean dev precision, seed-mean dev recall)
    pub beta_sweep: Vec<(f64, f64, f64)>,
    pub alpha: f64,
    pub beta: f64,
    pub build_secs: f64,
}

impl Battery {
    pub fn mean(&self, system: &str) -> SystemScore {
        let scores = &self.systems[system];
        let n = scores.len() as f64;
        SystemScore {
            precision: scores.iter().map(|s| s.precision).sum::<f64>() / n,
            recall: scores.iter().map(|s| s.recall).sum::<f64>() / n,
            f05: scores.iter().map(|s| s.f05).sum::<f64>() / n,
            fp: scores.iter().map(|s| s.fp).sum::<f64>() / n,
        }
    }

    /// Number of seeds where `metric(system) > metric(baseline)`.
    pub fn wins<F: Fn(&SystemScore) -> f64>(&self, system: &str, baseline: &str, metric: F) -> usize {
        self.systems[system]
            .iter()
            .zip(&self.systems[baseline])
            .filter(|(s, b)| metric(s) > metric(b))
            .count()
    }

    pub fn build() -> Battery {
        let started = Instant::now();
        let mut systems: BTreeMap<String, Vec<SystemScore>> = BTreeMap::new();
        let mut kd_probe = Vec::new();
        let mut sample_steps = Vec::new();
        let base = RunSettings::default();

        let mut sweep_ctx = None;
        for &run_seed in &SEEDS {
            let mut s = base.clone();
            s.seed = run_seed;
            let seed_run = SeedRun::build(&s);
            for (name, score) in seed_run.scores {
                systems.entry(name).or_default().push(score);
            }
            kd_probe.push(seed_run.kd_probe);
            if sample_steps.is_empty() {
                sample_steps = seed_run.steps;
            }
            if run_seed == SEEDS[0] {
                sweep_ctx = Some(seed_run.context);
            }
        }

        // Beta sweep reuses the first seed's frozen teachers and triples.
        let mut s = base.clone();
        s.seed = SEEDS[0];
        let sweep_ctx = sweep_ctx.expect("first seed ran");
        let mut beta_sweep = Vec::new();
        for &beta in &SWEEP_BETAS {
            let mut p_sum = 0.0;
            let mut r_sum = 0.0;
            for &cell_seed in &SWEEP_SEEDS {
                let mut config = s.distill_config();
                config.beta = beta;
                let outcome = distill::train_alirector(
                    sweep_ctx.corrector.clone(),
                    &sweep_ctx.teachers,
                    &sweep_ctx.triples,
                    &sweep_ctx.selection_dev,
                    &config,
                    &s.continue_train_config(
                        seed::derive(cell_seed, "sweep-cell", 0),
                        sweep_ctx.triples.len(),
                    ),
                    AblationMode::None,
                    s.template(),
                    s.max_decode_len(),
                )
                .expect("sweep cell trains");
                p_sum += outcome.best_dev.precision;
                r_sum += outcome.best_dev.recall;
            }
            let n = SWEEP_SEEDS.len() as f64;
            beta_sweep.push((beta, p_sum / n, r_sum / n));
            eprintln!(
                "[desk] sweep beta={beta}: mean dev P={:.2} R={:.2}",
                p_sum / n,
                r_sum / n
            );
        }

        Battery {
            systems,
            kd_probe,
            sample_steps,
            beta_sweep,
            alpha: base.alpha,
            beta: base.beta,
            build_secs: started.elapsed().as_secs_f64(),
        }
    }
}

struct SeedRun {
    scores: Vec<(String, SystemScore)>,
    kd_probe: (f64, f64),
    steps: Vec<LossBreakdown>,
    context: SweepContext,
}

struct SweepContext {
    corrector: ModelParams,
    teachers: TeacherBundle,
    triples: Vec<alignment::AlignmentExample>,
    selection_dev: Vec<ParallelExample>,
}

fn generate_part(s: &RunSettings, tag: &str, count: usize) -> Vec<ParallelExample> {
    let vocab = Vocab::new(s.vocab_size).unwrap();
    let rules = s.corruption_rules().unwrap();
    let part_seed = seed::derive(s.seed, tag, 0);
    let sentences = corpus::generate_clean_corpus(&corpus::CorpusConfig {
        count,
        vocab_size: s.vocab_size,
        min_len: s.min_len,
        max_len: s.max_len,
        seed: part_seed,
    })
    .unwrap();
    sentences
        .iter()
        .enumerate()
        .map(|(i, sent)| {
            corpus::corrupt(sent, &rules, &vocab, seed::derive(part_seed, "noise", i as u64))
                .unwrap()
        })
        .collect()
}

fn score_system(test: &[ParallelExample], hyps: &[Vec<TokenId>]) -> SystemScore {
    let triples: Vec<EvalTriple> = test
        .iter()
        .zip(hyps)
        .map(|(e, h)| EvalTriple {
            source: e.source.clone(),
            target: e.target.clone(),
            hypothesis: h.clone(),
        })
        .collect();
    let report = eval::score_corpus(&triples);
    SystemScore {
        precision: report.precision,
        recall: report.recall,
        f05: report.f05,
        fp: report.overcorrections as f64,
    }
}

impl SeedRun {
    fn build(s: &RunSettings) -> SeedRun {
        let started = Instant::now();
        let template = s.template();
        let max_decode = s.max_decode_len();
        let pool = generate_part(s, "train-pool", s.train_count);
        let dev = generate_part(s, "dev-pool", s.dev_count);
        let test = generate_part(s, "test-pool", s.test_count);
        let split =
            corpus::split_dataset(pool.clone(), s.split_ratio, seed::derive(s.seed, "split", 0))
                .unwrap();
        // Training-time checkpoint selection runs on a dev prefix to keep
        // per-epoch decoding affordable; final scores use the full test set.
        let selection_dev: Vec<ParallelExample> =
            dev.iter().take(s.selection_dev_count()).cloned().collect();
        let sources: Vec<Vec<TokenId>> = test.iter().map(|e| e.source.clone()).collect();
        let mut scores = Vec::new();

        let decode_all = |params: &ModelParams| -> Vec<Vec<TokenId>> {
            correction::predict_corpus(params, &sources, s.beam_size, max_decode, template)
                .expect("test decoding succeeds")
        };

        // Vanilla fine-tuning on the full pool.
        let vanilla = correction::train_correction(
            &pool,
            &selection_dev,
            &s.model_config(),
            &s.train_config(seed::derive(s.seed, "train-correct-full", 0)),
            template,
            max_decode,
        )
        .unwrap();
        scores.push(("vanilla".to_string(), score_system(&test, &decode_all(&vanilla.model))));
        drop(vanilla);

        // Corrector on the 80% split; teachers on its triples.
        let corrector = correction::train_correction(
            &split.correction_train,
            &selection_dev,
            &s.model_config(),
            &s.train_config(seed::derive(s.seed, "train-correct", 0)),
            template,
            max_decode,
        )
        .unwrap();
        scores.push((
            "corrector".to_string(),
            score_system(&test, &decode_all(&corrector.model)),
        ));
        let triples = alignment::build_alignment_triples(
            &corrector.model,
            &split.alignment_train,
            s.beam_size,
            max_decode,
            template,
        )
        .unwrap();
        let dev_triples = alignment::build_alignment_triples(
            &corrector.model,
            &selection_dev,
            s.beam_size,
            max_decode,
            template,
        )
        .unwrap();
        let init = s.aligner_init_from_corrector.then(|| corrector.model.clone());
        let fwd = alignment::train_alignment(
            &triples,
            &dev_triples,
            Direction::Forward,
            &s.aligner_model_config(),
            &s.aligner_train_config(seed::derive(s.seed, "train-align-forward", 0), triples.len()),
            template,
            max_decode,
            init.as_ref(),
        )
        .unwrap();
        let rev = alignment::train_alignment(
            &triples,
            &dev_triples,
            Direction::Reverse,
            &s.aligner_model_config(),
            &s.aligner_train_config(seed::derive(s.seed, "train-align-reverse", 0), triples.len()),
            template,
            max_decode,
            init.as_ref(),
        )
        .unwrap();
        eprintln!(
            "[desk seed {}] corrector dev {:.2}; teachers dev {:.2}/{:.2} ({:.0}s)",
            s.seed,
            corrector.best_dev.f05,
            fwd.best_dev.f05,
            rev.best_dev.f05,
            started.elapsed().as_secs_f64()
        );
        let teachers = TeacherBundle::new(fwd.model, rev.model).unwrap();

        // Predict-and-align with the forward aligner.
        let paa: Vec<Vec<TokenId>> = sources
            .iter()
            .map(|src| {
                alignment::predict_and_align(
                    &corrector.model,
                    &teachers.forward,
                    src,
                    s.beam_size,
                    max_decode,
                    template,
                    AblationMode::None,
                )
                .expect("predict-and-align succeeds")
            })
            .collect();
        scores.push(("predict_and_align".to_string(), score_system(&test, &paa)));

        // Distilled student plus its ablation variants.
        let mut run_variant = |name: &str, alpha: f64, beta: f64, ablation: AblationMode| {
            let mut config = s.distill_config();
            config.alpha = alpha;
            config.beta = beta;
            let outcome = distill::train_alirector(
                corrector.model.clone(),
                &teachers,
                &triples,
                &selection_dev,
                &config,
                &s.continue_train_config(seed::derive(s.seed, "distill", 0), triples.len()),
                ablation,
                template,
                max_decode,
            )
            .expect("distillation trains");
            scores.push((name.to_string(), score_system(&test, &decode_all(&outcome.model))));
            outcome
        };

        let full = run_variant("alirector", s.alpha, s.beta, AblationMode::None);
        let kd_probe = (full.probe_start.kd, full.epochs[full.best_epoch - 1].probe.kd);
        let steps = full.steps.clone();
        drop(full);
        run_variant("beta0", s.alpha, 0.0, AblationMode::None);
        run_variant("disc_source", s.alpha, s.beta, AblationMode::DiscSource);
        run_variant("disc_predict", s.alpha, s.beta, AblationMode::DiscPredict);

        eprintln!(
            "[desk seed {}] done in {:.0}s: {:?}",
            s.seed,
            started.elapsed().as_secs_f64(),
            scores
                .iter()
                .map(|(n, sc)| format!("{n} P={:.1} F={:.1}", sc.precision, sc.f05))
                .collect::<Vec<_>>()
        );
        SeedRun {
            scores,
            kd_probe,
            steps,
            context: SweepContext {
                corrector: corrector.model,
                teachers,
                triples,
                selection_dev,
            },
        }
    }

    #[allow(dead_code)]
    fn sweep_context(s: &RunSettings) -> SweepContext {
        let template = s.template();
        let max_decode = s.max_decode_len();
        let pool = generate_part(s, "train-pool", s.train_count);
        let dev = generate_part(s, "dev-pool", s.dev_count);
        let split =
            corpus::split_dataset(pool, s.split_ratio, seed::derive(s.seed, "split", 0)).unwrap();
        let selection_dev: Vec<ParallelExample> =
            dev.into_iter().take(s.selection_dev_count()).collect();

        let corrector = correction::train_correction(
            &split.correction_train,
            &selection_dev,
            &s.model_config(),
            &s.train_config(seed::derive(s.seed, "train-correct", 0)),
            template,
            max_decode,
        )
        .unwrap();
        let triples = alignment::build_alignment_triples(
            &corrector.model,
            &split.alignment_train,
            s.beam_size,
            max_decode,
            template,
        )
        .unwrap();
        let dev_triples = alignment::build_alignment_triples(
            &corrector.model,
            &selection_dev,
            s.beam_size,
            max_decode,
            template,
        )
        .unwrap();
        let init = s.aligner_init_from_corrector.then(|| corrector.model.clone());
        let fwd = alignment::train_alignment(
            &triples,
            &dev_triples,
            Direction::Forward,
            &s.aligner_model_config(),
            &s.aligner_train_config(seed::derive(s.seed, "train-align-forward", 0), triples.len()),
            template,
            max_decode,
            init.as_ref(),
        )
        .unwrap();
        let rev = alignment::train_alignment(
            &triples,
            &dev_triples,
            Direction::Reverse,
            &s.aligner_model_config(),
            &s.aligner_train_config(seed::derive(s.seed, "train-align-reverse", 0), triples.len()),
            template,
            max_decode,
            init.as_ref(),
        )
        .unwrap();
        SweepContext {
            corrector: corrector.model,
            teachers: TeacherBundle::new(fwd.model, rev.model).unwrap(),
            triples,
            selection_dev,
        }
    }
}
