//! Randomized verification suites: oracle equivalence, gradient checks, and
//! lattice invariants. Shared by the CLI `verify` command and the acceptance
//! tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::arith::log_sum_exp;
use crate::lattice::{extend_labels, frame_total_log_prob, LabelSeq, LatticeTables, LogitGrid};
use crate::loss::{ctc_loss, grouped_posteriors, sactc_loss, softmax_log, SactcOptions};
use crate::oracle::{brute_force_ctc, brute_force_sactc, finite_diff_grad};
use crate::serialize::{serialize_sot, RiskSpec, SerializedLabel, SpeakerTranscripts};
use crate::{Result, TokenId};

/// Size bounds for randomized instances.
#[derive(Debug, Clone, Copy)]
pub struct InstanceLimits {
    pub max_frames: usize,
    /// Serialized token count including `<sc>`.
    pub max_tokens: usize,
    /// Vocabulary size including blank and `<sc>`.
    pub max_vocab: usize,
}

impl InstanceLimits {
    /// Bounds used by the loss-oracle equivalence checks.
    pub fn losses() -> Self {
        Self {
            max_frames: 6,
            max_tokens: 3,
            max_vocab: 5,
        }
    }

    /// Bounds used by the finite-difference gradient checks.
    pub fn gradients() -> Self {
        Self {
            max_frames: 8,
            max_tokens: 4,
            max_vocab: 5,
        }
    }

    /// Bounds used by the lattice-invariant checks.
    pub fn invariants() -> Self {
        Self {
            max_frames: 10,
            max_tokens: 5,
            max_vocab: 6,
        }
    }
}

/// One random two-speaker instance: logits plus a serialized label that is
/// feasible for the frame count. Blank id is 0, `<sc>` is the last id.
#[derive(Debug, Clone)]
pub struct RandomInstance {
    pub logits: LogitGrid,
    pub label: SerializedLabel,
    pub blank_id: TokenId,
}

/// Draw a feasible random instance within the limits.
pub fn random_instance(rng: &mut ChaCha8Rng, limits: &InstanceLimits) -> RandomInstance {
    loop {
        let vocab = rng.gen_range(3..=limits.max_vocab);
        let content = vocab - 2;
        let sc = vocab - 1;
        let pair_budget = limits.max_tokens - 1;
        let m = rng.gen_range(1..=pair_budget - 1);
        let n = rng.gen_range(1..=pair_budget - m);
        let draw = |rng: &mut ChaCha8Rng, count: usize| -> LabelSeq {
            LabelSeq::new((0..count).map(|_| rng.gen_range(1..=content)).collect())
                .expect("count >= 1")
        };
        let a = draw(rng, m);
        let b = draw(rng, n);
        let tr = SpeakerTranscripts::new(vec![a, b], None).expect("two speakers");
        let label = serialize_sot(&tr, sc).expect("sc id is reserved");
        let ext = extend_labels(&label.label_seq(), 0).expect("no blank in labels");
        if ext.min_frames() > limits.max_frames {
            continue;
        }
        let frames = rng.gen_range(ext.min_frames()..=limits.max_frames);
        let logits = LogitGrid::new(
            frames,
            vocab,
            (0..frames * vocab).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        )
        .expect("finite logits");
        return RandomInstance {
            logits,
            label,
            blank_id: 0,
        };
    }
}

/// Scaled error: absolute difference over `max(1, |a|, |b|)`.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

/// Worst observed error of one named check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckStat {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckStat {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.to_owned(),
            max_error: 0.0,
            tolerance,
            passed: true,
        }
    }

    fn record(&mut self, error: f64) {
        if error > self.max_error {
            self.max_error = error;
        }
        if !(error <= self.tolerance) {
            self.passed = false;
        }
    }
}

/// Result of one randomized suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: String,
    pub trials: usize,
    pub checks: Vec<CheckStat>,
    pub passed: bool,
}

impl SuiteReport {
    fn finish(name: &str, trials: usize, checks: Vec<CheckStat>) -> Self {
        let passed = checks.iter().all(|c| c.passed);
        Self {
            name: name.to_owned(),
            trials,
            checks,
            passed,
        }
    }
}

/// DP losses against brute-force path enumeration, plus the `lambda = 0`
/// degeneration identity.
pub fn oracle_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = InstanceLimits::losses();
    let mut ctc_check = CheckStat::new("ctc_vs_enumeration", 1e-9);
    let mut sactc_check = CheckStat::new("sactc_vs_enumeration", 1e-9);
    let mut degen_check = CheckStat::new("lambda0_is_ctc_plus_log2", 1e-9);
    for _ in 0..trials {
        let inst = random_instance(&mut rng, &limits);
        let post = softmax_log(&inst.logits);
        let labels = inst.label.label_seq();

        let dp = ctc_loss(&inst.logits, &labels, inst.blank_id)?;
        let bf = -brute_force_ctc(&post, &labels, inst.blank_id)?.ln();
        ctc_check.record((dp.loss - bf).abs());

        for lambda in [0.0, 5.0, 15.0] {
            let spec = RiskSpec::for_label(&inst.label, lambda)?;
            let fast = sactc_loss(&inst.logits, &inst.label, &spec, inst.blank_id)?;
            let slow = brute_force_sactc(
                &post,
                &inst.label,
                &spec,
                inst.blank_id,
                &SactcOptions::default(),
            )?;
            sactc_check.record((fast.loss - slow).abs());
            if lambda == 0.0 {
                degen_check.record((fast.loss - dp.loss - 2.0_f64.ln()).abs());
            }
        }
    }
    Ok(SuiteReport::finish(
        "oracle",
        trials,
        vec![ctc_check, sactc_check, degen_check],
    ))
}

/// Analytic gradients against central finite differences, plus the
/// per-frame row-sum property.
pub fn grad_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = InstanceLimits::gradients();
    let h = 1e-5;
    let mut ctc_check = CheckStat::new("ctc_grad_vs_finite_diff", 1e-4);
    let mut sactc_check = CheckStat::new("sactc_grad_vs_finite_diff", 1e-4);
    let mut rowsum_check = CheckStat::new("grad_row_sums", 1e-8);
    for _ in 0..trials {
        let inst = random_instance(&mut rng, &limits);
        let labels = inst.label.label_seq();

        let analytic = ctc_loss(&inst.logits, &labels, inst.blank_id)?;
        let fd = finite_diff_grad(
            |g| ctc_loss(g, &labels, inst.blank_id).map_or(f64::NAN, |r| r.loss),
            &inst.logits,
            h,
        )?;
        record_grad_errors(&analytic.grad, &fd, &mut ctc_check, &mut rowsum_check);

        let spec = RiskSpec::for_label(&inst.label, 15.0)?;
        let analytic = sactc_loss(&inst.logits, &inst.label, &spec, inst.blank_id)?;
        let fd = finite_diff_grad(
            |g| {
                sactc_loss(g, &inst.label, &spec, inst.blank_id).map_or(f64::NAN, |r| r.loss)
            },
            &inst.logits,
            h,
        )?;
        record_grad_errors(&analytic.grad, &fd, &mut sactc_check, &mut rowsum_check);
    }
    Ok(SuiteReport::finish(
        "grad",
        trials,
        vec![ctc_check, sactc_check, rowsum_check],
    ))
}

fn record_grad_errors(
    analytic: &LogitGrid,
    fd: &LogitGrid,
    grad_check: &mut CheckStat,
    rowsum_check: &mut CheckStat,
) {
    for t in 0..analytic.frames() {
        let mut row_sum = 0.0;
        for k in 0..analytic.vocab() {
            grad_check.record(rel_err(analytic.get(t, k), fd.get(t, k)));
            row_sum += analytic.get(t, k);
        }
        rowsum_check.record(row_sum.abs());
    }
}

/// Lattice invariants: the per-frame total posterior is time-invariant, and
/// the end-frame masses of every token partition it.
pub fn invariants_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = InstanceLimits::invariants();
    let mut time_check = CheckStat::new("frame_total_time_invariance", 1e-10);
    let mut partition_check = CheckStat::new("end_frame_partition", 1e-10);
    for _ in 0..trials {
        let inst = random_instance(&mut rng, &limits);
        let post = softmax_log(&inst.logits);
        let ext = extend_labels(&inst.label.label_seq(), inst.blank_id)?;
        let tables = LatticeTables::compute(&post, &ext)?;
        let reference = tables.total_log_prob();
        for t in 0..post.frames() {
            let total = frame_total_log_prob(&tables.alpha, &tables.beta, &post, &ext, t);
            time_check.record((total - reference).abs());
        }
        let grouped = grouped_posteriors(&post, &inst.label, inst.blank_id)?;
        for u in 0..grouped.token_count() {
            let mass = log_sum_exp(grouped.log_mass(u));
            partition_check.record((mass - grouped.total_log_prob()).abs());
        }
    }
    Ok(SuiteReport::finish(
        "invariants",
        trials,
        vec![time_check, partition_check],
    ))
}

/// Full verification report.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub seed: u64,
    pub suites: Vec<SuiteReport>,
    pub passed: bool,
}

/// Run all three suites. `trials` scales the oracle and invariant suites;
/// the gradient suite runs `trials / 4` instances (minimum 1) because every
/// instance costs a full finite-difference sweep.
pub fn run_all(trials: usize, seed: u64) -> Result<VerifyReport> {
    let grad_trials = if trials == 0 { 0 } else { (trials / 4).max(1) };
    let suites = vec![
        oracle_suite(trials, seed)?,
        grad_suite(grad_trials, seed.wrapping_add(1))?,
        invariants_suite(trials, seed.wrapping_add(2))?,
    ];
    let passed = suites.iter().all(|s| s.passed);
    Ok(VerifyReport {
        seed,
        suites,
        passed,
    })
}
