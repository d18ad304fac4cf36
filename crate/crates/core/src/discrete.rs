use num_rational::BigRational;
use serde::{Serialize, Serializer};
use twofloat::TwoFloat;

use crate::constants::{exact_q, normalize, polish_q, spectral_constants_discrete, SpectralConstants};
use crate::error::{Error, Result};
use crate::model::discrete::weight_is_negative;
use crate::model::{DecaySequence, DiscreteProblem, PerturbationKernelDiscrete};
use crate::numeric::{aitken, fit_line, Accumulator, NeumaierSum, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithmeticMode {
    ExactRational,
    Float { bits: u32 },
}

impl ArithmeticMode {
    pub const DOUBLE: Self = Self::Float { bits: 53 };
    pub const DOUBLE_DOUBLE: Self = Self::Float { bits: 106 };
}

impl std::fmt::Display for ArithmeticMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ExactRational => f.write_str("exact_rational"),
            Self::Float { bits } => write!(f, "float{bits}"),
        }
    }
}

impl Serialize for ArithmeticMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// Solution of the tilted recursion; index `i` holds `n = i + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionTrace {
    pub n_max: usize,
    pub x_tilde: Vec<f64>,
    pub y: Vec<f64>,
    /// Exact `x̃` when solved in rational arithmetic.
    pub x_exact: Option<Vec<BigRational>>,
    pub mode: ArithmeticMode,
    pub gamma: f64,
    pub q: f64,
}

impl SolutionTrace {
    pub fn x(&self, n: usize) -> f64 {
        self.x_tilde[n - 1]
    }

    pub fn y(&self, n: usize) -> f64 {
        self.y[n - 1]
    }

    fn is_positive(&self, i: usize) -> bool {
        match &self.x_exact {
            Some(x) => Scalar::is_positive(&x[i]),
            None => self.x_tilde[i] > 0.0,
        }
    }
}

/// Row-by-row weight evaluation with the coefficient values cached.
struct WeightRows<'a, S: Scalar> {
    p: &'a DiscreteProblem<S>,
    a: Vec<S>,
    b: Option<Vec<S>>,
    rho_pows: Vec<S>,
    check: bool,
}

impl<'a, S: Scalar> WeightRows<'a, S> {
    fn new(p: &'a DiscreteProblem<S>, n_max: usize, check: bool) -> Self {
        let rho_pows = match &p.c {
            PerturbationKernelDiscrete::Separable { rho, .. } => {
                let mut v = Vec::with_capacity(n_max + 1);
                let mut acc = S::one();
                for _ in 0..=n_max {
                    v.push(acc.clone());
                    acc = acc.mul(rho);
                }
                v
            }
            _ => Vec::new(),
        };
        Self {
            p,
            a: p.a.values(n_max),
            b: (!p.b.is_zero()).then(|| p.b.values(n_max)),
            rho_pows,
            check: check && !p.allow_negative_weights,
        }
    }

    /// Fills `row[j]` with `w[n,j]` for `1 <= j < n`.
    fn fill(&self, n: usize, row: &mut Vec<S>) -> Result<()> {
        row.clear();
        row.push(S::zero());
        row.extend(self.a[1..n].iter().cloned());
        if let Some(b) = &self.b {
            for j in 1..n {
                if b[j] != S::zero() {
                    let d = match self.p.weight_form {
                        crate::model::WeightForm::BOverN => n,
                        crate::model::WeightForm::BOverNMinusJ => n - j,
                    };
                    row[j] = row[j].add(&b[j].div(&S::from_index(d)));
                }
            }
        }
        match &self.p.c {
            PerturbationKernelDiscrete::Zero => {}
            PerturbationKernelDiscrete::Separable { kappa, sigma, .. } => {
                if n >= 2 {
                    let kn = kappa.mul(&sigma.powi(n as u32));
                    for j in 1..n {
                        row[j] = row[j].add(&kn.mul(&self.rho_pows[j]));
                    }
                }
            }
            PerturbationKernelDiscrete::Table(t) => {
                if let Some(v) = t.uniform_row(n) {
                    for w in row.iter_mut().take(n).skip(1) {
                        *w = w.add(v);
                    }
                }
                for (j, v) in t.row_entries(n) {
                    row[j] = row[j].add(v);
                }
            }
        }
        if self.check {
            for (j, w) in row.iter().enumerate().skip(1) {
                if weight_is_negative(w, || weight_scale(self.p, n, j)) {
                    return Err(Error::NegativeWeight {
                        n,
                        j,
                        value: w.to_f64(),
                    });
                }
            }
        }
        Ok(())
    }
}

fn weight_scale<S: Scalar>(p: &DiscreteProblem<S>, n: usize, j: usize) -> f64 {
    p.a.value(j).to_f64().abs() + p.b.value(j).to_f64().abs() / (n - j).max(1) as f64 + p.c.value(n, j).to_f64().abs()
}

/// Forward iteration of `x_n = Σ_{j<n} w[n,j] x_{n-j} + r_n` for the problem
/// as given (no tilting). Index `i` holds `n = i + 1`.
pub fn solve_recursion<S: Scalar>(p: &DiscreteProblem<S>, n_max: usize) -> Result<Vec<S>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("horizon N must be at least 1".into()));
    }
    let rows = WeightRows::new(p, n_max, true);
    let r = p.r.values(n_max);
    let mut x: Vec<S> = Vec::with_capacity(n_max);
    let mut row = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        rows.fill(n, &mut row)?;
        let mut acc = S::Acc::default();
        for j in 1..n {
            acc.push_product(&row[j], &x[n - j - 1]);
        }
        acc.push(r[n].clone());
        let xn = acc.total();
        if !xn.is_finite() {
            return Err(Error::Overflow { n });
        }
        x.push(xn);
    }
    Ok(x)
}

fn y_from(x: &[f64], gamma: f64) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, v)| if gamma == 0.0 { *v } else { v * ((i + 1) as f64).powf(-gamma) })
        .collect()
}

/// Solves the tilted problem up to `n_max` and forms `y_n = x̃_n n^{-γ}`.
pub fn solve(
    p: &DiscreteProblem<BigRational>,
    sc: &SpectralConstants,
    n_max: usize,
    mode: ArithmeticMode,
) -> Result<SolutionTrace> {
    let (x_tilde, x_exact) = match mode {
        ArithmeticMode::ExactRational => {
            let q = exact_q(&p.a, sc.q).ok_or_else(|| {
                Error::ExactModeUnavailable(format!("spectral point {} is not a certified rational", sc.q))
            })?;
            let x = solve_recursion(&normalize(p, &q)?, n_max)?;
            (x.iter().map(Scalar::to_f64).collect(), Some(x))
        }
        ArithmeticMode::Float { bits } if bits <= 53 => {
            let ps = p.to_scalar::<f64>();
            let q = polish_q(&ps.a, sc.q);
            (solve_recursion(&normalize(&ps, &q)?, n_max)?, None)
        }
        ArithmeticMode::Float { bits } if bits <= 106 => {
            let ps = p.to_scalar::<TwoFloat>();
            let q = polish_q(&ps.a, sc.q);
            let x = solve_recursion(&normalize(&ps, &q)?, n_max)?;
            (x.iter().map(Scalar::to_f64).collect(), None)
        }
        ArithmeticMode::Float { bits } => {
            return Err(Error::InvalidArgument(format!("unsupported precision {bits} bits (use 53 or 106)")))
        }
    };
    let y = y_from(&x_tilde, sc.gamma);
    Ok(SolutionTrace {
        n_max,
        x_tilde,
        y,
        x_exact,
        mode,
        gamma: sc.gamma,
        q: sc.q,
    })
}

/// Smallest `N0` with `x̃_n > 0` for all `N0 <= n <= N`; `None` if `x̃_N` itself is not positive.
pub fn positivity_horizon(tr: &SolutionTrace) -> Option<usize> {
    let n = tr.x_tilde.len();
    if n == 0 || !tr.is_positive(n - 1) {
        return None;
    }
    let mut i = n - 1;
    while i > 0 && tr.is_positive(i - 1) {
        i -= 1;
    }
    Some(i + 1)
}

/// `ρ_n = y_n - Σ_{j<n} a_j y_{n-j}` for a sequence with `y[i] = y_{i+1}`.
pub fn residual_of_sequence(y: &[f64], a: &DecaySequence<f64>) -> Vec<f64> {
    let a_vals = a.values(y.len());
    (1..=y.len())
        .map(|n| {
            let mut acc = NeumaierSum::new();
            acc.add(y[n - 1]);
            for j in 1..n {
                acc.add(-a_vals[j] * y[n - j - 1]);
            }
            acc.value()
        })
        .collect()
}

/// Residuals of a trace against the tilted `a`.
pub fn residual(tr: &SolutionTrace, a: &DecaySequence<f64>) -> Vec<f64> {
    residual_of_sequence(&tr.y, a)
}

/// `max |ρ_n|` over `from <= n <= to`.
pub fn residual_max(res: &[f64], from: usize, to: usize) -> f64 {
    let from = from.max(1);
    let to = to.min(res.len());
    res.get(from - 1..to).map_or(0.0, |s| s.iter().fold(0.0, |m, v| m.max(v.abs())))
}

/// Residual summary over the last decade of indices, `[N/10, N]`.
pub fn residual_tail_max(res: &[f64]) -> f64 {
    residual_max(res, (res.len() / 10).max(1), res.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateStatus {
    /// Partial sums of `s_n` visibly saturate.
    Saturating,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundCertificate {
    /// `s_n` of the upper bound, index `i` holds `n = i + 1`.
    pub s_upper: Vec<f64>,
    /// `s_n` of the lower bound; `NaN` for `n <= n_threshold`.
    pub s_lower: Vec<f64>,
    pub product_upper: f64,
    pub product_lower: Option<f64>,
    pub n_threshold: Option<usize>,
    /// First index from which every lower factor is below 1.
    pub lower_start: Option<usize>,
    /// Certified lower bound on `min y_n` over `[n_threshold, N]`.
    pub lower_bound: Option<f64>,
    /// `Σ s` over `(N/2, N]` divided by `Σ s` over `(N/4, N/2]`.
    pub block_ratio: Option<f64>,
    pub status: CertificateStatus,
}

const BLOCK_RATIO_LIMIT: f64 = 0.75;

/// Product bounds on `y_n` for a tilted problem (`q = 1`, `Σ a = 1`).
pub fn bound_certificate(p: &DiscreteProblem<f64>, tr: &SolutionTrace, gamma: f64) -> BoundCertificate {
    let n_max = tr.y.len();
    let rows = WeightRows::new(p, n_max, false);
    let r = p.r.values(n_max);
    let thr = positivity_horizon(tr);
    let mut s_upper = Vec::with_capacity(n_max);
    let mut s_lower = vec![f64::NAN; n_max];
    let mut row = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        rows.fill(n, &mut row).expect("unchecked rows do not fail");
        let nf = n as f64;
        let cut = thr.filter(|&t| n > t).map(|t| n - t);
        let mut acc = NeumaierSum::new();
        let mut lower_part = 0.0;
        for j in 1..n {
            let factor = if gamma == 0.0 { 1.0 } else { (1.0 - j as f64 / nf).powf(gamma) };
            acc.add(row[j] * factor - rows.a[j]);
            if cut == Some(j) {
                lower_part = acc.value();
            }
        }
        let forcing = if gamma == 0.0 { r[n] } else { r[n] * nf.powf(-gamma) };
        s_upper.push(acc.value().abs() + forcing);
        if let Some(c) = cut {
            let tail = p.a.tail_sum(c + 1).unwrap_or(f64::INFINITY);
            s_lower[n - 1] = tail + lower_part.abs();
        }
    }
    let product_upper = s_upper.iter().fold(1.0, |p, s| p * (1.0 + s));

    let (mut product_lower, mut lower_start, mut lower_bound) = (None, None, None);
    if let Some(t) = thr {
        if t < n_max {
            let mut start = n_max + 1;
            while start > t + 1 && s_lower[start - 2] < 1.0 {
                start -= 1;
            }
            if start <= n_max {
                let prod = s_lower[start - 1..].iter().fold(1.0, |p, s| p * (1.0 - s));
                let head = tr.y[t - 1..start - 1].iter().fold(f64::INFINITY, |m, v| m.min(*v));
                product_lower = Some(prod);
                lower_start = Some(start);
                lower_bound = Some(head * prod);
            }
        }
    }

    let block = |lo: usize, hi: usize| -> f64 { NeumaierSum::sum_iter(s_upper[lo..hi].iter().copied()) };
    let block_ratio = (n_max >= 8).then(|| {
        let recent = block(n_max / 2, n_max);
        let earlier = block(n_max / 4, n_max / 2);
        if earlier == 0.0 {
            if recent == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            recent / earlier
        }
    });
    let status = match block_ratio {
        Some(r) if r < BLOCK_RATIO_LIMIT => CertificateStatus::Saturating,
        _ => CertificateStatus::Inconclusive,
    };
    BoundCertificate {
        s_upper,
        s_lower,
        product_upper,
        product_lower,
        n_threshold: thr,
        lower_start,
        lower_bound,
        block_ratio,
        status,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Converged,
    NotConverged,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMethod {
    TailMean,
    Aitken,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticEstimate {
    pub c_hat: f64,
    pub window: (usize, usize),
    pub method: EstimateMethod,
    pub dispersion: f64,
    /// Aitken extrapolation of `y` along powers of two.
    pub c_aitken: Option<f64>,
    /// Slope of `log y_n` against `log n` over the window.
    pub loglog_slope: Option<f64>,
    pub status: EstimateStatus,
}

/// Limit of `y_n`: mean over `[⌈N/2⌉, N]` cross-checked by Aitken's Δ².
pub fn estimate_c(tr: &SolutionTrace, tol: f64) -> Result<AsymptoticEstimate> {
    let n = tr.y.len();
    if n == 0 {
        return Err(Error::WindowEmpty);
    }
    if positivity_horizon(tr).is_none() {
        return Err(Error::Precondition("the trace has no positivity horizon".into()));
    }
    let lo = n.div_ceil(2).max(1);
    let window = &tr.y[lo - 1..n];
    if window.is_empty() {
        return Err(Error::WindowEmpty);
    }
    let c_hat = NeumaierSum::sum_iter(window.iter().copied()) / window.len() as f64;
    let (min, max) = window.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let dispersion = max - min;

    let c_aitken = (n >= 4).then(|| {
        let k = usize::BITS - 1 - n.leading_zeros();
        let at = |e: u32| tr.y[(1usize << e) - 1];
        let (y0, y1, y2) = (at(k - 2), at(k - 1), at(k));
        aitken(y0, y1, y2).unwrap_or(y2)
    });

    let (xs, ys): (Vec<f64>, Vec<f64>) = (lo..=n)
        .filter(|&i| tr.y[i - 1] > 0.0)
        .map(|i| ((i as f64).ln(), tr.y[i - 1].ln()))
        .unzip();
    let loglog_slope = fit_line(&xs, &ys).map(|f| f.slope);

    let scale = c_hat.abs().max(f64::MIN_POSITIVE);
    let status = if dispersion / scale > tol {
        EstimateStatus::NotConverged
    } else if c_aitken.is_some_and(|a| (a - c_hat).abs() / scale > tol) {
        EstimateStatus::Inconclusive
    } else {
        EstimateStatus::Converged
    };
    Ok(AsymptoticEstimate {
        c_hat,
        window: (lo, n),
        method: EstimateMethod::TailMean,
        dispersion,
        c_aitken,
        loglog_slope,
        status,
    })
}

/// Requested arithmetic; `Auto` starts in double precision and escalates to
/// double-double when the upper product exceeds [`ESCALATION_PRODUCT`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Auto,
    Fixed(ArithmeticMode),
}

pub const ESCALATION_PRODUCT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteOptions {
    pub n_max: usize,
    pub tol: f64,
    pub q_tol: f64,
    pub precision: Precision,
}

impl Default for DiscreteOptions {
    fn default() -> Self {
        Self {
            n_max: 2000,
            tol: 0.02,
            q_tol: 1e-13,
            precision: Precision::Auto,
        }
    }
}

/// Everything computed for one discrete problem.
#[derive(Debug, Clone)]
pub struct DiscreteRun {
    pub constants: SpectralConstants,
    pub trace: SolutionTrace,
    pub residual: Vec<f64>,
    pub residual_tail_max: f64,
    pub certificate: BoundCertificate,
    pub positivity_horizon: Option<usize>,
    pub estimate: std::result::Result<AsymptoticEstimate, Error>,
    pub escalated: bool,
}

pub fn run_discrete(p: &DiscreteProblem<BigRational>, opts: &DiscreteOptions) -> Result<DiscreteRun> {
    let constants = spectral_constants_discrete(p, opts.q_tol)?;
    let tilted = normalize(&p.to_scalar::<f64>(), &constants.q)?;
    let analyse = |trace: &SolutionTrace| {
        let residual = residual(trace, &tilted.a);
        let certificate = bound_certificate(&tilted, trace, constants.gamma);
        (residual, certificate)
    };
    let mode = match opts.precision {
        Precision::Auto => ArithmeticMode::DOUBLE,
        Precision::Fixed(m) => m,
    };
    let mut trace = solve(p, &constants, opts.n_max, mode)?;
    let (mut residual, mut certificate) = analyse(&trace);
    let mut escalated = false;
    if opts.precision == Precision::Auto && !(certificate.product_upper <= ESCALATION_PRODUCT) {
        trace = solve(p, &constants, opts.n_max, ArithmeticMode::DOUBLE_DOUBLE)?;
        (residual, certificate) = analyse(&trace);
        escalated = true;
    }
    let positivity_horizon = positivity_horizon(&trace);
    let estimate = estimate_c(&trace, opts.tol);
    Ok(DiscreteRun {
        constants,
        residual_tail_max: residual_tail_max(&residual),
        residual,
        certificate,
        positivity_horizon,
        estimate,
        escalated,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SignConstraint, WeightForm};

    fn q(p: i64, d: i64) -> BigRational {
        BigRational::new(p.into(), d.into())
    }

    fn geom_renewal() -> DiscreteProblem<BigRational> {
        let a = DecaySequence::geometric(q(1, 1), q(1, 2), SignConstraint::Nonnegative).unwrap();
        DiscreteProblem::renewal(a, DecaySequence::delta(1)).unwrap()
    }

    fn constants(p: &DiscreteProblem<BigRational>) -> SpectralConstants {
        spectral_constants_discrete(p, 1e-13).unwrap()
    }

    #[test]
    fn geometric_renewal_is_half_exactly() {
        let p = geom_renewal();
        let tr = solve(&p, &constants(&p), 50, ArithmeticMode::ExactRational).unwrap();
        let x = tr.x_exact.as_ref().unwrap();
        assert_eq!(x[0], q(1, 1));
        assert!(x[1..].iter().all(|v| *v == q(1, 2)));
        assert_eq!(positivity_horizon(&tr), Some(1));
    }

    #[test]
    fn unit_atom_gives_constant_one() {
        let a = DecaySequence::finite(vec![q(1, 1)], SignConstraint::Nonnegative).unwrap();
        let p = DiscreteProblem::renewal(a, DecaySequence::delta(1)).unwrap();
        let tr = solve(&p, &constants(&p), 30, ArithmeticMode::DOUBLE).unwrap();
        assert!(tr.x_tilde.iter().all(|v| *v == 1.0));
        let est = estimate_c(&tr, 1e-9).unwrap();
        assert_eq!(est.c_hat, 1.0);
        assert_eq!(est.status, EstimateStatus::Converged);
        assert_eq!(positivity_horizon(&tr), Some(1));
    }

    #[test]
    fn vanishing_kernel_has_no_positivity_horizon() {
        let a = DecaySequence::geometric(q(1, 1), q(1, 2), SignConstraint::Nonnegative).unwrap();
        let b = DecaySequence::geometric(-q(1, 1), q(1, 2), SignConstraint::Any).unwrap();
        let p = DiscreteProblem::new(a, b, PerturbationKernelDiscrete::Zero, DecaySequence::delta(1), WeightForm::BOverNMinusJ).unwrap();
        assert_eq!(p.weight(2, 1).unwrap(), BigRational::from_integer(0.into()));
        let mut sc = constants(&p);
        sc.gamma = 0.0;
        let tr = solve(&p, &sc, 40, ArithmeticMode::ExactRational).unwrap();
        assert_eq!(tr.x(1), 1.0);
        assert!(tr.x_tilde[1..].iter().all(|v| *v == 0.0));
        assert_eq!(positivity_horizon(&tr), None);
        assert!(estimate_c(&tr, 0.01).is_err());
    }

    #[test]
    fn pure_renewal_certificate_is_trivial_after_first_step() {
        let p = geom_renewal();
        let sc = constants(&p);
        let tr = solve(&p, &sc, 64, ArithmeticMode::DOUBLE).unwrap();
        let cert = bound_certificate(&p.to_scalar(), &tr, 0.0);
        assert_eq!(cert.s_upper[0], 1.0);
        assert!(cert.s_upper[1..].iter().all(|s| *s == 0.0));
        assert_eq!(cert.product_upper, 2.0);
        let max_y = tr.y.iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(max_y / tr.y[0].max(1.0) <= cert.product_upper);
        assert_eq!(cert.status, CertificateStatus::Saturating);
    }

    #[test]
    fn constant_sequence_residual_is_the_tail() {
        let a = DecaySequence::geometric(1.0, 0.5, SignConstraint::Nonnegative).unwrap();
        let y = vec![1.0; 30];
        let res = residual_of_sequence(&y, &a);
        for (i, r) in res.iter().enumerate() {
            let n = i + 1;
            assert!((r - 0.5f64.powi(n as i32 - 1)).abs() < 1e-15);
        }
    }

    #[test]
    fn geometric_renewal_estimate_is_half() {
        let p = geom_renewal();
        let tr = solve(&p, &constants(&p), 400, ArithmeticMode::DOUBLE).unwrap();
        let est = estimate_c(&tr, 1e-6).unwrap();
        assert!((est.c_hat - 0.5).abs() < 1e-12);
        assert_eq!(est.status, EstimateStatus::Converged);
        let res = residual(&tr, &p.to_scalar::<f64>().a);
        assert!(residual_tail_max(&res) < 1e-12);
    }

    #[test]
    fn double_double_matches_exact() {
        let a = DecaySequence::finite(vec![q(1, 3), q(1, 6), q(1, 2)], SignConstraint::Nonnegative).unwrap();
        let b = DecaySequence::finite(vec![q(-1, 10), q(1, 7)], SignConstraint::Any).unwrap();
        let p = DiscreteProblem::new(a, b, PerturbationKernelDiscrete::Zero, DecaySequence::delta(1), WeightForm::BOverN).unwrap();
        let sc = constants(&p);
        let exact = solve(&p, &sc, 120, ArithmeticMode::ExactRational).unwrap();
        let dd = solve(&p, &sc, 120, ArithmeticMode::DOUBLE_DOUBLE).unwrap();
        let d = solve(&p, &sc, 120, ArithmeticMode::DOUBLE).unwrap();
        for i in 0..120 {
            let e = exact.x_tilde[i];
            assert!((dd.x_tilde[i] - e).abs() <= 1e-15 * e.abs());
            assert!((d.x_tilde[i] - e).abs() <= 1e-12 * e.abs());
        }
    }

    #[test]
    fn run_pipeline_on_geometric_renewal() {
        let run = run_discrete(&geom_renewal(), &DiscreteOptions { n_max: 200, ..Default::default() }).unwrap();
        assert!(!run.escalated);
        assert_eq!(run.positivity_horizon, Some(1));
        assert_eq!(run.estimate.unwrap().status, EstimateStatus::Converged);
    }
}
