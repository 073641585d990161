//! Bidirectional alignment distillation.
//!
//! The student (initialized from the trained corrector) sees the plain
//! correction input X -> Y while the two frozen alignment teachers see the
//! forward and reverse alignment inputs, all teacher-forced on the same
//! gold target. Per position t the student's tempered distribution is
//! pulled toward each teacher's via KL(teacher || student), combined as
//! `kd = alpha*kd_forward + (1-alpha)*kd_reverse` and added to the NLL
//! objective as `total = gec + beta*kd`. Only student parameters receive
//! gradients; teacher hashes are verified unchanged at the end of the run.

use serde::{Deserialize, Serialize};

use crate::alignment::{self, AblationMode, AlignmentExample, Direction};
use crate::corpus::ParallelExample;
use crate::error::{Error, Result};
use crate::model::{
    self, LogitsTensor, Mode, ModelParams, NodeId, Role, Tape, TemplateId,
};
use crate::train::{self, DevMetrics, LossBreakdown, TrainConfig, TrainOutcome, TrainTask};
use crate::correction;

/// Distillation hyperparameters.
///
/// `alpha` mixes the forward/reverse teachers (the sweep range is the
/// open interval; 0 and 1 are reached only by the ablation modes that
/// drop one teacher), `beta` weights the distillation term, `tau` is the
/// softmax temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
}

impl DistillConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha must be in [0,1], got {}", self.alpha)));
        }
        if self.beta < 0.0 || !self.beta.is_finite() {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.tau <= 0.0 || !self.tau.is_finite() {
            return Err(Error::Config(format!("tau must be > 0, got {}", self.tau)));
        }
        Ok(())
    }
}

impl Default for DistillConfig {
    /// Encoder-decoder defaults on native-style data: alpha 0.9, beta 0.5,
    /// tau 1.
    fn default() -> Self {
        DistillConfig { alpha: 0.9, beta: 0.5, tau: 1.0 }
    }
}

/// The two frozen alignment teachers.
#[derive(Debug, Clone)]
pub struct TeacherBundle {
    pub forward: ModelParams,
    pub reverse: ModelParams,
}

impl TeacherBundle {
    pub fn new(forward: ModelParams, reverse: ModelParams) -> Result<Self> {
        if forward.role != Role::ForwardAligner {
            return Err(Error::Contract(format!(
                "forward teacher has role {}, expected forward_aligner",
                forward.role
            )));
        }
        if reverse.role != Role::ReverseAligner {
            return Err(Error::Contract(format!(
                "reverse teacher has role {}, expected reverse_aligner",
                reverse.role
            )));
        }
        Ok(TeacherBundle { forward, reverse })
    }

    pub fn hashes(&self) -> (String, String) {
        (self.forward.content_hash(), self.reverse.content_hash())
    }
}

/// Softmax of `logits_row / tau`, numerically stabilized; sums to one.
pub fn tempered_distribution(logits_row: &[f64], tau: f64) -> Vec<f64> {
    let max = logits_row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b / tau));
    let exps: Vec<f64> = logits_row.iter().map(|&v| (v / tau - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|v| v / sum).collect()
}

/// KL(p_teacher || p_student) with `0 ln 0 = 0`; student probabilities are
/// clamped at 1e-12 so a hard-zero student never produces infinities.
pub fn kl_div(p_teacher: &[f64], p_student: &[f64]) -> f64 {
    debug_assert_eq!(p_teacher.len(), p_student.len());
    let mut kl = 0.0;
    for (&t, &s) in p_teacher.iter().zip(p_student) {
        if t > 0.0 {
            kl += t * (t.ln() - s.max(1e-12).ln());
        }
    }
    kl
}

/// Per-position tempered KL of the student against both teachers, summed
/// over positions: returns `(kd_forward, kd_reverse, kd)`.
pub fn kd_loss(
    z_f: &LogitsTensor,
    z_r: &LogitsTensor,
    z_c: &LogitsTensor,
    config: &DistillConfig,
) -> Result<(f64, f64, f64)> {
    config.validate()?;
    let n = z_c.values.nrows();
    if z_f.values.dim() != z_c.values.dim() || z_r.values.dim() != z_c.values.dim() {
        return Err(Error::Contract(format!(
            "logit tensors disagree on positions/vocab: {:?} / {:?} / {:?}",
            z_f.values.dim(),
            z_r.values.dim(),
            z_c.values.dim()
        )));
    }
    let mut kd_f = 0.0;
    let mut kd_r = 0.0;
    for t in 0..n {
        let student = tempered_distribution(z_c.values.row(t).as_slice().unwrap(), config.tau);
        let fwd = tempered_distribution(z_f.values.row(t).as_slice().unwrap(), config.tau);
        let rev = tempered_distribution(z_r.values.row(t).as_slice().unwrap(), config.tau);
        kd_f += kl_div(&fwd, &student);
        kd_r += kl_div(&rev, &student);
    }
    Ok((kd_f, kd_r, config.alpha * kd_f + (1.0 - config.alpha) * kd_r))
}

/// Overall objective: `gec + beta * kd`.
pub fn total_loss(gec: f64, kd: f64, beta: f64) -> f64 {
    gec + beta * kd
}

/// Distillation training task over alignment triples.
struct DistillTask<'a> {
    triples: &'a [AlignmentExample],
    dev: &'a [ParallelExample],
    teachers: &'a TeacherBundle,
    config: DistillConfig,
    teacher_ablation: AblationMode,
    template: TemplateId,
    max_decode_len: usize,
}

impl DistillTask<'_> {
    /// Inference-mode teacher logits over the shared gold target.
    fn teacher_logits(
        &self,
        teacher: &ModelParams,
        direction: Direction,
        ex: &AlignmentExample,
    ) -> Result<LogitsTensor> {
        let input = alignment::build_alignment_input(
            &ex.source,
            &ex.prediction,
            direction,
            self.teacher_ablation,
            &teacher.config,
            self.template,
            Some(&ex.target),
        )?;
        match &input.tokens {
            alignment::AlignmentTokens::Encoder(enc) => {
                model::logits_for(teacher, Some(enc), None, &ex.target)
            }
            alignment::AlignmentTokens::Prompt(prompt) => {
                model::logits_for(teacher, None, Some(prompt), &ex.target)
            }
        }
    }
}

impl TrainTask for DistillTask<'_> {
    fn num_examples(&self) -> usize {
        self.triples.len()
    }

    fn example_loss(
        &self,
        model: &ModelParams,
        index: usize,
        mode: &mut Mode,
    ) -> Result<(Tape, NodeId, LossBreakdown)> {
        let ex = &self.triples[index];
        // Student sees the corrector-style input X -> Y.
        let (mut tape, student_logits, gec_node) =
            correction::correction_graph(model, &ex.source, &ex.target, self.template, mode)?;
        let gec = tape.scalar(gec_node);

        if self.config.beta == 0.0 {
            // Plain continued fine-tuning; teachers are not consulted, and
            // the step trajectory is bitwise-identical to a correction run.
            return Ok((tape, gec_node, LossBreakdown::plain(gec)));
        }

        let z_f = self.teacher_logits(&self.teachers.forward, Direction::Forward, ex)?;
        let z_r = self.teacher_logits(&self.teachers.reverse, Direction::Reverse, ex)?;
        debug_assert_eq!(z_f.values.nrows(), tape.value(student_logits).nrows());

        let p_f = crate::model::tempered_probs(&z_f.values, self.config.tau);
        let p_r = crate::model::tempered_probs(&z_r.values, self.config.tau);
        let kd_f_node = tape.kl_tempered(student_logits, p_f, self.config.tau);
        let kd_r_node = tape.kl_tempered(student_logits, p_r, self.config.tau);
        let kd_f_scaled = tape.scale(kd_f_node, self.config.alpha);
        let kd_node = tape.add_scaled(kd_f_scaled, kd_r_node, 1.0 - self.config.alpha);
        let total_node = tape.add_scaled(gec_node, kd_node, self.config.beta);

        let kd_forward = tape.scalar(kd_f_node);
        let kd_reverse = tape.scalar(kd_r_node);
        let kd = tape.scalar(kd_node);
        let total = tape.scalar(total_node);
        Ok((
            tape,
            total_node,
            LossBreakdown { gec, kd_forward, kd_reverse, kd, total },
        ))
    }

    fn dev_metrics(&self, model: &ModelParams) -> Result<DevMetrics> {
        correction::dev_scores(model, self.dev, self.template, self.max_decode_len)
    }
}

/// Trains the Alirector student from a corrector checkpoint against the
/// frozen teacher bundle.
#[allow(clippy::too_many_arguments)]
pub fn train_alirector(
    student_init: ModelParams,
    teachers: &TeacherBundle,
    triples: &[AlignmentExample],
    dev: &[ParallelExample],
    config: &DistillConfig,
    train_config: &TrainConfig,
    teacher_ablation: AblationMode,
    template: TemplateId,
    max_decode_len: usize,
) -> Result<TrainOutcome> {
    config.validate()?;
    if !matches!(student_init.role, Role::Corrector | Role::AlirectorStudent) {
        return Err(Error::Contract(format!(
            "student must initialize from a corrector checkpoint, got {}",
            student_init.role
        )));
    }
    if teachers.forward.config.arch != student_init.config.arch
        || teachers.reverse.config.arch != student_init.config.arch
    {
        return Err(Error::Contract(
            "teachers and student must share the same architecture".into(),
        ));
    }
    let hashes_before = teachers.hashes();
    let task = DistillTask {
        triples,
        dev,
        teachers,
        config: *config,
        teacher_ablation,
        template,
        max_decode_len,
    };
    let mut outcome = train::train(&task, student_init.with_role(Role::AlirectorStudent), train_config)?;
    if teachers.hashes() != hashes_before {
        return Err(Error::Contract(
            "teacher parameters changed during distillation; aborting".into(),
        ));
    }
    outcome.model.role = Role::AlirectorStudent;
    Ok(outcome)
}

/// Measures the kd components of one fixed batch without training; used
/// for sanity checks on teacher/student divergence at step 0.
pub fn probe_kd(
    student: &ModelParams,
    teachers: &TeacherBundle,
    triples: &[AlignmentExample],
    config: &DistillConfig,
    template: TemplateId,
) -> Result<LossBreakdown> {
    let task = DistillTask {
        triples,
        dev: &[],
        teachers,
        config: *config,
        teacher_ablation: AblationMode::None,
        template,
        max_decode_len: 1,
    };
    let mut sum = LossBreakdown::default();
    for i in 0..triples.len() {
        let (_, _, bd) = task.example_loss(student, i, &mut Mode::Inference)?;
        sum.gec += bd.gec;
        sum.kd_forward += bd.kd_forward;
        sum.kd_reverse += bd.kd_reverse;
        sum.kd += bd.kd;
        sum.total += bd.total;
    }
    let n = triples.len().max(1) as f64;
    sum.gec /= n;
    sum.kd_forward /= n;
    sum.kd_reverse /= n;
    sum.kd /= n;
    sum.total /= n;
    Ok(sum)
}
