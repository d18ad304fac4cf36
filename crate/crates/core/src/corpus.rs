//! Built-in problems with known answers.

use std::collections::BTreeMap;

use num_rational::BigRational;
use serde::Serialize;

use crate::constants::solve_q;
use crate::discrete::{residual_of_sequence, ArithmeticMode, EstimateStatus, Precision};
use crate::error::{Error, Result};
use crate::model::{
    ContinuousProblem, DecayFunction, DecaySequence, DiscreteProblem, KernelTable, PerturbationKernelContinuous,
    PerturbationKernelDiscrete, SignConstraint, Tail, ValidationReport, WeightForm,
};
use crate::pipeline::{
    continuous_pipeline, discrete_pipeline, ContinuousPipeline, ContinuousSettings, DiscretePipeline,
    DiscreteSettings,
};
use crate::volterra::VolterraOptions;

/// Where an expected value comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Closed-form algebra on the problem data.
    ClosedForm,
    /// An independent computation (exact arithmetic, a second pipeline).
    Oracle,
    /// Stated in the literature for this construction.
    Published,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Expectation {
    Equals { value: f64, tolerance: f64 },
    AtMost { value: f64 },
    Flag { value: bool },
    Label { value: &'static str },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExpectedFact {
    pub name: &'static str,
    /// Operation whose output is checked.
    pub operation: &'static str,
    pub expected: Expectation,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Observed {
    Number(f64),
    Flag(bool),
    Label(String),
}

impl Expectation {
    pub fn holds(&self, observed: Option<&Observed>) -> bool {
        match (self, observed) {
            (Self::Equals { value, tolerance }, Some(Observed::Number(x))) => (x - value).abs() <= *tolerance,
            (Self::AtMost { value }, Some(Observed::Number(x))) => x <= value,
            (Self::Flag { value }, Some(Observed::Flag(x))) => x == value,
            (Self::Label { value }, Some(Observed::Label(x))) => x == value,
            _ => false,
        }
    }
}

/// Sequence-level example: a fixed `y` and the coefficients it is tested against.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceProblem {
    pub a: DecaySequence<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum CorpusProblem {
    Discrete {
        problem: DiscreteProblem<BigRational>,
        settings: DiscreteSettings,
        /// Reference values for the tilted solution `x̃_n`.
        target: Option<fn(usize) -> f64>,
    },
    Continuous {
        problem: ContinuousProblem,
        settings: ContinuousSettings,
        /// Reference values for `g(t)`.
        target: Option<fn(f64) -> f64>,
    },
    Sequence(SequenceProblem),
}

#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub name: &'static str,
    pub description: &'static str,
    pub problem: CorpusProblem,
    pub expected: Vec<ExpectedFact>,
}

pub const NAMES: [&str; 12] = [
    "geom-renewal",
    "tilted",
    "two-atom",
    "cex1",
    "cex2",
    "cex3",
    "poisson",
    "cts-beta",
    "cts-beta-neg1",
    "cts-growth",
    "cts-undamped",
    "gcd-two",
];

pub fn list() -> Vec<CorpusEntry> {
    NAMES.iter().map(|n| builtin(n).expect("catalog names resolve")).collect()
}

pub fn builtin(name: &str) -> Result<CorpusEntry> {
    match name {
        "geom-renewal" => Ok(geom_renewal()),
        "tilted" => Ok(tilted()),
        "two-atom" => Ok(two_atom()),
        "cex1" => Ok(cex1()),
        "cex2" => Ok(cex2()),
        "cex3" => Ok(cex3()),
        "poisson" => Ok(poisson()),
        "cts-beta" => Ok(cts_beta(-0.5)),
        "cts-beta-neg1" => Ok(cts_beta(-1.0)),
        "cts-growth" => Ok(cts_growth()),
        "cts-undamped" => Ok(cts_undamped()),
        "gcd-two" => Ok(gcd_two()),
        other => Err(Error::UnknownEntry(other.to_string())),
    }
}

fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(p.into(), q.into())
}

fn fact(name: &'static str, operation: &'static str, expected: Expectation, provenance: Provenance) -> ExpectedFact {
    ExpectedFact {
        name,
        operation,
        expected,
        provenance,
    }
}

fn equals(value: f64, tolerance: f64) -> Expectation {
    Expectation::Equals { value, tolerance }
}

fn half_powers() -> DecaySequence<BigRational> {
    DecaySequence::geometric(ratio(1, 1), ratio(1, 2), SignConstraint::Nonnegative).expect("valid tail")
}

fn discrete(problem: DiscreteProblem<BigRational>, n_max: usize, precision: Precision) -> CorpusProblem {
    let mut settings = DiscreteSettings::default();
    settings.options.n_max = n_max;
    settings.options.precision = precision;
    CorpusProblem::Discrete {
        problem,
        settings,
        target: None,
    }
}

fn geom_renewal() -> CorpusEntry {
    let p = DiscreteProblem::renewal(half_powers(), DecaySequence::delta(1)).expect("valid problem");
    CorpusEntry {
        name: "geom-renewal",
        description: "a_j = 2^-j, r = delta_1; x_n = 1/2 for n >= 2",
        problem: discrete(p, 2000, Precision::Fixed(ArithmeticMode::ExactRational)),
        expected: vec![
            fact("q", "solve_q", equals(1.0, 1e-12), Provenance::ClosedForm),
            fact("gamma", "gamma", equals(0.0, 0.0), Provenance::ClosedForm),
            fact("x_spread_after_first", "solve", equals(0.0, 0.0), Provenance::Oracle),
            fact("c_hat", "estimate_c", equals(0.5, 1e-12), Provenance::Oracle),
            fact("r3", "validate_discrete", Expectation::Label { value: "pass" }, Provenance::ClosedForm),
        ],
    }
}

fn tilted() -> CorpusEntry {
    let a = DecaySequence::geometric(ratio(1, 2), ratio(2, 3), SignConstraint::Nonnegative).expect("valid tail");
    let b = DecaySequence::geometric(ratio(-3, 5), ratio(1, 2), SignConstraint::Any).expect("valid tail");
    let p = DiscreteProblem::new(a, b, PerturbationKernelDiscrete::Zero, DecaySequence::delta(1), WeightForm::BOverN)
        .expect("valid problem");
    CorpusEntry {
        name: "tilted",
        description: "a_j = (1/3)(2/3)^(j-1), b_j = -0.6 * 2^-j; gamma = -0.2",
        problem: discrete(p, 10_000, Precision::Auto),
        expected: vec![
            fact("q", "solve_q", equals(1.0, 1e-12), Provenance::ClosedForm),
            fact("gamma", "gamma", equals(-0.2, 1e-12), Provenance::ClosedForm),
            fact("estimate_status", "estimate_c", Expectation::Label { value: "converged" }, Provenance::Oracle),
            fact("dispersion_ratio", "estimate_c", Expectation::AtMost { value: 0.02 }, Provenance::Oracle),
            fact("abs_loglog_slope", "estimate_c", Expectation::AtMost { value: 0.02 }, Provenance::Oracle),
        ],
    }
}

fn two_atom() -> CorpusEntry {
    let a = DecaySequence::finite(vec![ratio(1, 4), ratio(1, 4)], SignConstraint::Nonnegative).expect("valid prefix");
    let p = DiscreteProblem::renewal(a, DecaySequence::delta(1)).expect("valid problem");
    CorpusEntry {
        name: "two-atom",
        description: "a = (1/4, 1/4); q = (sqrt(17) - 1) / 2",
        problem: discrete(p, 2000, Precision::Auto),
        expected: vec![
            fact("q", "solve_q", equals((17f64.sqrt() - 1.0) / 2.0, 1e-12), Provenance::ClosedForm),
            fact("normalized_q", "solve_q", equals(1.0, 1e-12), Provenance::ClosedForm),
        ],
    }
}

fn cex1() -> CorpusEntry {
    let b = DecaySequence::geometric(ratio(-1, 1), ratio(1, 2), SignConstraint::Any).expect("valid tail");
    let p = DiscreteProblem::new(
        half_powers(),
        b,
        PerturbationKernelDiscrete::Zero,
        DecaySequence::delta(1),
        WeightForm::BOverNMinusJ,
    )
    .expect("valid problem");
    CorpusEntry {
        name: "cex1",
        description: "w[n,j] = a_j (1 - 1/(n-j)), r = delta_1; x_n = 0 for n >= 2",
        problem: discrete(p, 200, Precision::Fixed(ArithmeticMode::ExactRational)),
        expected: vec![
            fact("positivity_horizon", "positivity_horizon", Expectation::Flag { value: false }, Provenance::Published),
            fact("x_max_abs_after_first", "solve", equals(0.0, 0.0), Provenance::Published),
        ],
    }
}

/// `2 + sin(log(k + 1))`.
pub fn oscillating(k: usize) -> f64 {
    2.0 + ((k + 1) as f64).ln().sin()
}

/// Weights `w[k,i] = a_i + (x_k - Σ_{j<k} x_{k-j} a_j) / Σ_{j<k} x_j` for
/// `i = 1..k-1`, with `x_k = 2 + sin(log(k+1))`.
pub fn cex2_weights(a: &DecaySequence<f64>, k: usize, x_history: &[f64]) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be at least 2".into()));
    }
    if x_history.len() < k - 1 {
        return Err(Error::InvalidArgument(format!(
            "history holds {} values, need {}",
            x_history.len(),
            k - 1
        )));
    }
    let a_vals = a.values(k - 1);
    let corr = cex2_correction(&a_vals, k, x_history)?;
    Ok((1..k).map(|i| a_vals[i] + corr).collect())
}

fn cex2_correction(a_vals: &[f64], k: usize, x: &[f64]) -> Result<f64> {
    let total: f64 = x[..k - 1].iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidArgument("history must have a positive sum".into()));
    }
    let conv: f64 = (1..k).map(|j| a_vals[j] * x[k - j - 1]).sum();
    Ok((oscillating(k) - conv) / total)
}

pub const CEX2_ROWS: usize = 10_000;

fn cex2() -> CorpusEntry {
    let a = half_powers();
    let a_f = a.map(crate::numeric::rational_to_f64);
    let a_vals = a_f.values(CEX2_ROWS);
    let x: Vec<f64> = (1..=CEX2_ROWS).map(oscillating).collect();
    let mut table = KernelTable::new(None).expect("no envelope");
    for k in 2..=CEX2_ROWS {
        let corr = cex2_correction(&a_vals, k, &x).expect("positive history");
        table
            .insert_row(k, BigRational::from_float(corr).expect("finite"))
            .expect("row index >= 2");
    }
    let r1 = BigRational::from_float(oscillating(1)).expect("finite");
    let r = DecaySequence::finite(vec![r1], SignConstraint::Nonnegative).expect("valid prefix");
    let mut p = DiscreteProblem::new(
        a,
        DecaySequence::zero(SignConstraint::Any),
        PerturbationKernelDiscrete::Table(table),
        r,
        WeightForm::BOverN,
    )
    .expect("valid problem");
    p.allow_negative_weights = true;
    CorpusEntry {
        name: "cex2",
        description: "weights a_i + o(1) reproducing x_k = 2 + sin(log(k+1)); x_n does not converge",
        problem: CorpusProblem::Discrete {
            problem: p,
            settings: DiscreteSettings {
                options: crate::discrete::DiscreteOptions {
                    n_max: CEX2_ROWS,
                    ..Default::default()
                },
                ..Default::default()
            },
            target: Some(oscillating),
        },
        expected: vec![
            fact("estimate_status", "estimate_c", Expectation::Label { value: "not_converged" }, Provenance::Published),
            fact("target_error", "solve", Expectation::AtMost { value: 1e-10 }, Provenance::Published),
        ],
    }
}

/// Upper bound for `|y_n - Σ_{j<n} a_j y_{n-j}|` when `y_n = 2 + sin(log(1+n))`,
/// with the split point `M = n/2`.
pub fn cex3_bound(a: &DecaySequence<f64>, n: usize) -> f64 {
    let m = (n / 2).max(1);
    let first = a.series(&1.0, 1).unwrap_or(f64::INFINITY);
    let tail = a.tail_sum(n).unwrap_or(f64::INFINITY);
    3.0 * tail + 3.0 / (n - m) as f64 * first + 3.0 * first_moment_tail(a, m)
}

/// `Σ_{j >= from} j a_j` without cancellation.
fn first_moment_tail(a: &DecaySequence<f64>, from: usize) -> f64 {
    let explicit = a.explicit_len();
    let mut acc: f64 = (from..=explicit).map(|j| j as f64 * a.value(j).abs()).sum();
    if let Tail::Geometric { coeff, ratio, start } = a.tail() {
        let s = from.max(*start) as f64;
        let rho = *ratio;
        acc += coeff.abs() * rho.powf(s) * (s / (1.0 - rho) + rho / ((1.0 - rho) * (1.0 - rho)));
    }
    acc
}

pub const CEX3_LEN: usize = 10_000;

fn cex3() -> CorpusEntry {
    let a = DecaySequence::geometric(1.0, 0.5, SignConstraint::Nonnegative).expect("valid tail");
    CorpusEntry {
        name: "cex3",
        description: "y_n = 2 + sin(log(1+n)): residual tends to 0 while y_n does not converge",
        problem: CorpusProblem::Sequence(SequenceProblem {
            a,
            y: (1..=CEX3_LEN).map(oscillating).collect(),
        }),
        expected: vec![
            fact("residual_bound_ratio", "residual", Expectation::AtMost { value: 10.0 }, Provenance::Published),
            fact("cauchy_gap_exceeds", "residual", Expectation::Flag { value: true }, Provenance::Published),
        ],
    }
}

fn exp(alpha: f64, lambda: f64) -> DecayFunction {
    DecayFunction::exponential(alpha, lambda).expect("valid term")
}

fn continuous(
    b: DecayFunction,
    c: PerturbationKernelContinuous,
    h: f64,
    horizon: f64,
    tauberian: Option<(f64, f64)>,
) -> (ContinuousProblem, ContinuousSettings) {
    let p = ContinuousProblem::new(exp(1.0, 1.0), b, c, exp(1.0, 1.0), 1.0).expect("valid problem");
    let settings = ContinuousSettings {
        volterra: VolterraOptions {
            h,
            horizon,
            ..Default::default()
        },
        tauberian,
        ..Default::default()
    };
    (p, settings)
}

fn poisson() -> CorpusEntry {
    let (problem, settings) = continuous(
        DecayFunction::zero(),
        PerturbationKernelContinuous::Zero,
        0.01,
        50.0,
        Some((0.02, 200.0)),
    );
    CorpusEntry {
        name: "poisson",
        description: "a(s) = e^-s, r(t) = e^-t, d = 1; g = 1",
        problem: CorpusProblem::Continuous {
            problem,
            settings,
            target: Some(|_| 1.0),
        },
        expected: vec![
            fact("gamma", "gamma", equals(0.0, 0.0), Provenance::ClosedForm),
            // Trapezoid defect h^2 T / 12 at h = 0.01, T = 50.
            fact("target_error", "solve_volterra", Expectation::AtMost { value: 4.3e-4 }, Provenance::ClosedForm),
            fact("transform_max_gap", "compute_g", Expectation::AtMost { value: 1e-3 }, Provenance::ClosedForm),
            fact("u_ratio_last", "tauberian_check", equals(0.5, 0.0025), Provenance::ClosedForm),
            fact("k_ratio_last", "tauberian_check", equals(1.0, 0.01), Provenance::ClosedForm),
            fact("slow_osc_pass", "tauberian_check", Expectation::Flag { value: true }, Provenance::ClosedForm),
            fact("small_s_defect", "compute_l", Expectation::AtMost { value: 0.01 }, Provenance::ClosedForm),
        ],
    }
}

fn cts_beta(beta: f64) -> CorpusEntry {
    let (problem, settings) = continuous(
        exp(beta, 1.0),
        PerturbationKernelContinuous::Zero,
        0.02,
        500.0,
        Some((0.02, 500.0)),
    );
    let neg1 = beta == -1.0;
    let mut expected = vec![
        fact("gamma", "gamma", equals(beta, 1e-12), Provenance::ClosedForm),
        fact("monotone", "monotonicity", Expectation::Flag { value: true }, Provenance::Oracle),
        fact("transform_max_gap", "compute_g", Expectation::AtMost { value: 0.01 }, Provenance::Oracle),
        fact("small_s_defect", "compute_l", Expectation::AtMost { value: 0.01 }, Provenance::ClosedForm),
        fact("tauberian_k", "tauberian_check", equals(1.0, 0.0), Provenance::ClosedForm),
    ];
    if !neg1 {
        expected.extend([
            fact("gamma_hat", "fit_exponent", equals(beta, 0.025), Provenance::Oracle),
            fact("band_ratio", "check_bounds", Expectation::AtMost { value: 1.1 }, Provenance::Oracle),
            fact("tauberian_verdict", "tauberian_check", Expectation::Label { value: "consistent" }, Provenance::Oracle),
        ]);
    }
    CorpusEntry {
        name: if neg1 { "cts-beta-neg1" } else { "cts-beta" },
        description: if neg1 {
            "a(s) = e^-s, b(s) = -e^-s, r(t) = e^-t, d = 1; gamma = -1"
        } else {
            "a(s) = e^-s, b(s) = -e^-s / 2, r(t) = e^-t, d = 1; gamma = -1/2"
        },
        problem: CorpusProblem::Continuous {
            problem,
            settings,
            target: None,
        },
        expected,
    }
}

fn cts_growth() -> CorpusEntry {
    let p = ContinuousProblem::new(
        exp(2.0, 2.0),
        exp(1.0, 1.0),
        PerturbationKernelContinuous::Zero,
        exp(1.0, 1.0),
        1.0,
    )
    .expect("valid problem");
    let settings = ContinuousSettings {
        volterra: VolterraOptions {
            h: 0.02,
            horizon: 200.0,
            ..Default::default()
        },
        ..Default::default()
    };
    CorpusEntry {
        name: "cts-growth",
        description: "a(s) = 2e^-2s, b(s) = e^-s, r(t) = e^-t, d = 1; gamma = 2",
        problem: CorpusProblem::Continuous {
            problem: p,
            settings,
            target: None,
        },
        expected: vec![
            fact("gamma", "gamma", equals(2.0, 1e-12), Provenance::ClosedForm),
            fact("gamma_hat", "fit_exponent", equals(2.0, 0.05), Provenance::Oracle),
            fact("band_ratio", "check_bounds", Expectation::AtMost { value: 1.1 }, Provenance::Oracle),
        ],
    }
}

fn cts_undamped() -> CorpusEntry {
    let c = PerturbationKernelContinuous::Separable {
        phi: DecayFunction::exp_mixture(&[(0.1, 0.0)]).expect("valid term"),
        psi: exp(1.0, 1.0),
    };
    let (problem, mut settings) = continuous(DecayFunction::zero(), c, 0.02, 50.0, None);
    settings.s_values.clear();
    CorpusEntry {
        name: "cts-undamped",
        description: "c(t,s) = 0.1 e^-s with no decay in t; violates (i4) and (i6)",
        problem: CorpusProblem::Continuous {
            problem,
            settings,
            target: None,
        },
        expected: vec![
            fact("i4", "validate_continuous", Expectation::Label { value: "fail" }, Provenance::ClosedForm),
            fact("i6", "validate_continuous", Expectation::Label { value: "fail" }, Provenance::ClosedForm),
        ],
    }
}

fn gcd_two() -> CorpusEntry {
    let a = DecaySequence::finite(
        vec![ratio(0, 1), ratio(1, 2), ratio(0, 1), ratio(1, 2)],
        SignConstraint::Nonnegative,
    )
    .expect("valid prefix");
    let p = DiscreteProblem::renewal(a, DecaySequence::delta(1)).expect("valid problem");
    CorpusEntry {
        name: "gcd-two",
        description: "a = (0, 1/2, 0, 1/2): periodic support, (r1) fails",
        problem: discrete(p, 200, Precision::Auto),
        expected: vec![fact("r1", "validate_discrete", Expectation::Label { value: "fail" }, Provenance::ClosedForm)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FactOutcome {
    pub name: &'static str,
    pub operation: &'static str,
    pub expected: Expectation,
    pub observed: Option<Observed>,
    pub provenance: Provenance,
    pub pass: bool,
}

pub enum Artifacts {
    Discrete(Box<DiscretePipeline>),
    Continuous(Box<ContinuousPipeline>),
    Sequence { y: Vec<f64>, residual: Vec<f64>, bound: Vec<f64> },
}

pub struct CorpusRun {
    pub name: &'static str,
    pub observations: BTreeMap<String, Observed>,
    pub facts: Vec<FactOutcome>,
    pub artifacts: Artifacts,
}

impl CorpusRun {
    pub fn all_pass(&self) -> bool {
        self.facts.iter().all(|f| f.pass)
    }
}

pub const CAUCHY_GAP_MIN: f64 = 0.05;

fn record_validation(obs: &mut BTreeMap<String, Observed>, report: &Result<ValidationReport>) {
    if let Ok(rep) = report {
        for check in &rep.checks {
            let label = status_label(check.status);
            obs.insert(check.condition.to_string(), Observed::Label(label.into()));
        }
    }
}

fn status_label(s: crate::model::Status) -> &'static str {
    match s {
        crate::model::Status::Pass => "pass",
        crate::model::Status::Fail => "fail",
        crate::model::Status::Unknown => "unknown",
    }
}

pub fn estimate_label(s: EstimateStatus) -> &'static str {
    match s {
        EstimateStatus::Converged => "converged",
        EstimateStatus::NotConverged => "not_converged",
        EstimateStatus::Inconclusive => "inconclusive",
    }
}

fn observe_discrete(
    p: &DiscreteProblem<BigRational>,
    pipe: &DiscretePipeline,
    target: Option<fn(usize) -> f64>,
) -> BTreeMap<String, Observed> {
    use Observed::*;
    let mut obs = BTreeMap::new();
    record_validation(&mut obs, &pipe.validation);
    let run = &pipe.run;
    obs.insert("q".into(), Number(run.constants.q));
    obs.insert("gamma".into(), Number(run.constants.gamma));
    let tilted = p.to_scalar::<f64>().a.tilt(&run.constants.q);
    if let Ok(q1) = tilted.and_then(|a| solve_q(&a, 1e-13)) {
        obs.insert("normalized_q".into(), Number(q1));
    }
    obs.insert("positivity_horizon".into(), Flag(run.positivity_horizon.is_some()));
    let after_first = &run.trace.x_tilde[1.min(run.trace.x_tilde.len())..];
    let (lo, hi) = after_first
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), v| (l.min(*v), h.max(*v)));
    if !after_first.is_empty() {
        obs.insert("x_spread_after_first".into(), Number(hi - lo));
        obs.insert("x_max_abs_after_first".into(), Number(hi.abs().max(lo.abs())));
    }
    if let Some(t) = target {
        let err = run
            .trace
            .x_tilde
            .iter()
            .enumerate()
            .map(|(i, v)| (v - t(i + 1)).abs())
            .fold(0.0, f64::max);
        obs.insert("target_error".into(), Number(err));
    }
    obs.insert("residual_tail_max".into(), Number(run.residual_tail_max));
    if let Ok(est) = &run.estimate {
        obs.insert("c_hat".into(), Number(est.c_hat));
        obs.insert("estimate_status".into(), Label(estimate_label(est.status).into()));
        obs.insert("dispersion_ratio".into(), Number(est.dispersion / est.c_hat.abs()));
        if let Some(s) = est.loglog_slope {
            obs.insert("abs_loglog_slope".into(), Number(s.abs()));
        }
    }
    obs
}

fn observe_continuous(
    pipe: &ContinuousPipeline,
    target: Option<fn(f64) -> f64>,
) -> BTreeMap<String, Observed> {
    use Observed::*;
    let mut obs = BTreeMap::new();
    record_validation(&mut obs, &pipe.validation);
    let gamma = pipe.constants.gamma;
    obs.insert("gamma".into(), Number(gamma));
    let run = &pipe.run;
    obs.insert("monotone".into(), Flag(run.monotone));
    obs.insert("band_ratio".into(), Number(run.band.ratio()));
    if let Ok(fit) = &run.fit {
        obs.insert("gamma_hat".into(), Number(fit.gamma_hat));
        obs.insert("r_squared".into(), Number(fit.r_squared));
    }
    if let Some(t) = target {
        let tr = &run.trace;
        let err = tr
            .g
            .iter()
            .enumerate()
            .map(|(i, v)| (v - t(tr.grid.node(i))).abs())
            .fold(0.0, f64::max);
        obs.insert("target_error".into(), Number(err));
    }
    if let Ok(rows) = &pipe.transforms {
        if !rows.is_empty() {
            let gap = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
            obs.insert("transform_max_gap".into(), Number(gap));
        }
    }
    if let Ok(sl) = pipe.small_s_l {
        obs.insert("small_s_defect".into(), Number((sl + gamma + 1.0).abs()));
    }
    if let Some(Ok(rep)) = &pipe.tauberian {
        obs.insert("tauberian_k".into(), Number(rep.k as f64));
        obs.insert("tauberian_verdict".into(), Label(tauberian_label(rep.verdict).into()));
        obs.insert("slow_osc_pass".into(), Flag(rep.slow_osc_pass));
        if let (Some(u), Some(k)) = (rep.u_ratio_ladder.last(), rep.k_ladder.last()) {
            obs.insert("u_ratio_last".into(), Number(*u));
            obs.insert("k_ratio_last".into(), Number(*k));
        }
    }
    obs
}

pub fn tauberian_label(v: crate::laplace::TauberianVerdict) -> &'static str {
    match v {
        crate::laplace::TauberianVerdict::Consistent => "consistent",
        crate::laplace::TauberianVerdict::Inconsistent => "inconsistent",
        crate::laplace::TauberianVerdict::Inconclusive => "inconclusive",
    }
}

/// Residual and bound of a sequence example over `n = 1..=len`.
pub fn sequence_residual(sp: &SequenceProblem) -> (Vec<f64>, Vec<f64>) {
    let residual = residual_of_sequence(&sp.y, &sp.a);
    let bound = (1..=sp.y.len())
        .map(|n| if n >= 2 { cex3_bound(&sp.a, n) } else { f64::INFINITY })
        .collect();
    (residual, bound)
}

pub fn run(entry: &CorpusEntry) -> Result<CorpusRun> {
    let (observations, artifacts) = match &entry.problem {
        CorpusProblem::Discrete {
            problem,
            settings,
            target,
        } => {
            let pipe = discrete_pipeline(problem, settings)?;
            (observe_discrete(problem, &pipe, *target), Artifacts::Discrete(Box::new(pipe)))
        }
        CorpusProblem::Continuous {
            problem,
            settings,
            target,
        } => {
            let pipe = continuous_pipeline(problem, settings)?;
            (observe_continuous(&pipe, *target), Artifacts::Continuous(Box::new(pipe)))
        }
        CorpusProblem::Sequence(sp) => {
            let (residual, bound) = sequence_residual(sp);
            let n = sp.y.len();
            let ratio = (n / 2..=n)
                .map(|k| residual[k - 1].abs() / bound[k - 1])
                .fold(0.0, f64::max);
            let gap = (sp.y[n - 1] - sp.y[n / 2 - 1]).abs();
            let mut obs = BTreeMap::new();
            obs.insert("residual_bound_ratio".into(), Observed::Number(ratio));
            obs.insert("cauchy_gap".into(), Observed::Number(gap));
            obs.insert("cauchy_gap_exceeds".into(), Observed::Flag(gap > CAUCHY_GAP_MIN));
            (
                obs,
                Artifacts::Sequence {
                    y: sp.y.clone(),
                    residual,
                    bound,
                },
            )
        }
    };
    let facts = entry
        .expected
        .iter()
        .map(|f| {
            let observed = observations.get(f.name).cloned();
            FactOutcome {
                name: f.name,
                operation: f.operation,
                pass: f.expected.holds(observed.as_ref()),
                expected: f.expected.clone(),
                observed,
                provenance: f.provenance,
            }
        })
        .collect();
    Ok(CorpusRun {
        name: entry.name,
        observations,
        facts,
        artifacts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_name_is_an_error() {
        assert!(matches!(builtin("nope"), Err(Error::UnknownEntry(_))));
        assert_eq!(list().len(), NAMES.len());
    }

    #[test]
    fn cex2_weights_reproduce_the_sequence() {
        let a = DecaySequence::geometric(1.0, 0.5, SignConstraint::Nonnegative).unwrap();
        let x: Vec<f64> = (1..=1000).map(oscillating).collect();
        for k in 2..=1000 {
            let w = cex2_weights(&a, k, &x[..k - 1]).unwrap();
            let rebuilt: f64 = (1..k).map(|i| x[k - i - 1] * w[i - 1]).sum();
            assert!((rebuilt - x[k - 1]).abs() < 1e-12, "{k}");
        }
        let corr = |k: usize| cex2_weights(&a, k, &x).unwrap()[0] - 0.5;
        assert!(corr(1000).abs() < corr(10).abs());
        let w = cex2_weights(&a, 50, &x).unwrap();
        let d0 = w[0] - 0.5;
        assert!(w.iter().enumerate().all(|(i, v)| (v - a.value(i + 1) - d0).abs() < 1e-15));
        assert!(cex2_weights(&a, 1, &[]).is_err());
    }

    #[test]
    fn cex3_bound_dominates_the_residual() {
        let sp = match builtin("cex3").unwrap().problem {
            CorpusProblem::Sequence(sp) => sp,
            _ => unreachable!(),
        };
        let (res, bound) = sequence_residual(&sp);
        assert!((100..sp.y.len()).all(|n| res[n - 1].abs() <= bound[n - 1]));
    }

    #[test]
    fn cex1_weight_vanishes_on_the_diagonal() {
        let entry = builtin("cex1").unwrap();
        let CorpusProblem::Discrete { problem, .. } = entry.problem else { unreachable!() };
        let p = problem.to_scalar::<f64>();
        assert_eq!(crate::model::weight_discrete(&p, 2, 1).unwrap(), 0.0);
    }
}
