use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpTerm {
    pub alpha: f64,
    pub lambda: f64,
}

/// Samples on a uniform grid `0, step, …, (len-1) step`, linearly
/// interpolated and zero beyond the last node.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    step: f64,
    samples: Vec<f64>,
    /// Asserted bound `|f(s)| <= k e^{-lambda s}` on the function the samples came from.
    envelope: Option<(f64, f64)>,
}

impl SampledFunction {
    pub fn new(step: f64, samples: Vec<f64>, envelope: Option<(f64, f64)>) -> Result<Self> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidArgument(format!("table step {step} must be positive")));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidArgument("table needs at least two samples".into()));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite table sample".into()));
        }
        if let Some((k, lambda)) = envelope {
            if !(k.is_finite() && k >= 0.0 && lambda.is_finite() && lambda > 0.0) {
                return Err(Error::MalformedEnvelope(format!(
                    "table envelope k = {k}, lambda = {lambda} needs k >= 0, lambda > 0"
                )));
            }
        }
        Ok(Self {
            step,
            samples,
            envelope,
        })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn envelope(&self) -> Option<(f64, f64)> {
        self.envelope
    }

    /// Last sampled abscissa.
    pub fn cutoff(&self) -> f64 {
        self.step * (self.samples.len() - 1) as f64
    }

    fn eval(&self, s: f64) -> f64 {
        if !(s >= 0.0) || s > self.cutoff() {
            return 0.0;
        }
        let pos = s / self.step;
        let i = (pos.floor() as usize).min(self.samples.len() - 2);
        let frac = pos - i as f64;
        self.samples[i] * (1.0 - frac) + self.samples[i + 1] * frac
    }
}

/// Exponentially dominated function on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DecayFunction {
    /// `Σ alpha_i e^{-lambda_i s}`.
    ExpMixture(Vec<ExpTerm>),
    Table(SampledFunction),
}

impl DecayFunction {
    pub fn zero() -> Self {
        Self::ExpMixture(Vec::new())
    }

    /// `lambda = 0` is accepted so that non-decaying factors (e.g. a constant
    /// time factor of a perturbation kernel) can be expressed and rejected by
    /// validation instead of by construction.
    pub fn exp_mixture(terms: &[(f64, f64)]) -> Result<Self> {
        let mut out = Vec::with_capacity(terms.len());
        for &(alpha, lambda) in terms {
            if !alpha.is_finite() || !lambda.is_finite() || lambda < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "exponential term ({alpha}, {lambda}) needs finite alpha and lambda >= 0"
                )));
            }
            if alpha != 0.0 {
                out.push(ExpTerm { alpha, lambda });
            }
        }
        Ok(Self::ExpMixture(out))
    }

    pub fn exponential(alpha: f64, lambda: f64) -> Result<Self> {
        Self::exp_mixture(&[(alpha, lambda)])
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::ExpMixture(t) => t.is_empty(),
            Self::Table(t) => t.samples.iter().all(|v| *v == 0.0),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        match self {
            Self::ExpMixture(terms) => terms.iter().map(|t| t.alpha * (-t.lambda * s).exp()).sum(),
            Self::Table(t) => t.eval(s),
        }
    }

    /// `∫_0^∞ f`, `None` if not integrable.
    pub fn integral(&self) -> Option<f64> {
        match self {
            Self::ExpMixture(terms) => {
                let mut acc = crate::numeric::NeumaierSum::new();
                for t in terms {
                    if t.lambda == 0.0 {
                        return None;
                    }
                    acc.add(t.alpha / t.lambda);
                }
                Some(acc.value())
            }
            Self::Table(t) => {
                let h = t.step;
                let n = t.samples.len();
                let inner: f64 = t.samples[1..n - 1].iter().sum();
                Some(h * (0.5 * (t.samples[0] + t.samples[n - 1]) + inner))
            }
        }
    }

    /// `∫_0^∞ s f(s) ds`.
    pub fn first_moment(&self) -> Option<f64> {
        match self {
            Self::ExpMixture(terms) => {
                let mut acc = crate::numeric::NeumaierSum::new();
                for t in terms {
                    if t.lambda == 0.0 {
                        return None;
                    }
                    acc.add(t.alpha / (t.lambda * t.lambda));
                }
                Some(acc.value())
            }
            Self::Table(t) => {
                let h = t.step;
                let mut acc = crate::numeric::NeumaierSum::new();
                for (i, w) in t.samples.windows(2).enumerate() {
                    let s0 = i as f64 * h;
                    let s1 = s0 + h;
                    acc.add(h * (w[0] * (2.0 * s0 + s1) + w[1] * (s0 + 2.0 * s1)) / 6.0);
                }
                Some(acc.value())
            }
        }
    }

    /// Smallest exponential rate; `∫ |f| z^s ds < ∞` whenever `ln z` is below it.
    pub fn decay_rate(&self) -> f64 {
        match self {
            Self::ExpMixture(terms) => terms.iter().map(|t| t.lambda).fold(f64::INFINITY, f64::min),
            Self::Table(t) => t.envelope.map_or(f64::INFINITY, |(_, l)| l),
        }
    }

    /// Non-increasing bound on `sup_{u >= t} |f(u)|`.
    pub fn abs_envelope(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            Self::ExpMixture(terms) => terms.iter().map(|e| e.alpha.abs() * (-e.lambda * t).exp()).sum(),
            Self::Table(tab) => {
                if t > tab.cutoff() {
                    return 0.0;
                }
                let i = ((t / tab.step).floor() as usize).min(tab.samples.len() - 1);
                let rest = tab.samples[i..].iter().fold(0.0f64, |m, v| m.max(v.abs()));
                rest.max(tab.eval(t).abs())
            }
        }
    }

    /// Non-decreasing bound on `∫_0^t |f|`.
    pub fn abs_cumulative(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            Self::ExpMixture(terms) => terms
                .iter()
                .map(|e| {
                    if e.lambda == 0.0 {
                        e.alpha.abs() * t
                    } else {
                        e.alpha.abs() * (-(-e.lambda * t).exp_m1()) / e.lambda
                    }
                })
                .sum(),
            Self::Table(tab) => {
                let h = tab.step;
                let mut acc = 0.0;
                for (i, w) in tab.samples.windows(2).enumerate() {
                    let s0 = i as f64 * h;
                    if s0 >= t {
                        break;
                    }
                    let frac = ((t - s0) / h).min(1.0);
                    acc += frac * h * 0.5 * (w[0].abs() + w[1].abs());
                }
                acc
            }
        }
    }

    /// `sup_t ∫_0^t |f|`, infinite for non-integrable factors.
    pub fn abs_total(&self) -> f64 {
        match self {
            Self::ExpMixture(terms) if terms.iter().any(|e| e.lambda == 0.0) => f64::INFINITY,
            Self::ExpMixture(_) => self.abs_cumulative(f64::INFINITY),
            Self::Table(tab) => self.abs_cumulative(tab.cutoff()),
        }
    }

    /// Minimum over `[0, horizon]` on a grid of the given spacing.
    pub fn sampled_min(&self, horizon: f64, spacing: f64) -> f64 {
        let n = (horizon / spacing).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| self.eval((i as f64 * spacing).min(horizon)))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_table(&self) -> bool {
        matches!(self, Self::Table(_))
    }

    pub fn has_asserted_envelope(&self) -> bool {
        matches!(self, Self::Table(t) if t.envelope.is_some())
    }
}

/// The `c(t,s)` part of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKernelContinuous {
    Zero,
    /// `c(t,s) = phi(t) psi(s)`.
    Separable { phi: DecayFunction, psi: DecayFunction },
}

impl PerturbationKernelContinuous {
    pub fn value(&self, t: f64, s: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Separable { phi, psi } => phi.eval(t) * psi.eval(s),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Self::Zero => true,
            Self::Separable { phi, psi } => phi.is_zero() || psi.is_zero(),
        }
    }
}

/// Equation `g(t) = ∫_0^t w(t,s) g(t-s) ds + r(t)`, `g(0) = 1`, with
/// `w(t,s) = a(s) + b(s)/(t+d) + c(t,s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousProblem {
    pub a: DecayFunction,
    pub b: DecayFunction,
    pub c: PerturbationKernelContinuous,
    pub r: DecayFunction,
    pub d: f64,
}

impl ContinuousProblem {
    pub fn new(
        a: DecayFunction,
        b: DecayFunction,
        c: PerturbationKernelContinuous,
        r: DecayFunction,
        d: f64,
    ) -> Result<Self> {
        if !(d.is_finite() && d > 0.0) {
            return Err(Error::InvalidArgument(format!("d = {d} must be positive")));
        }
        Ok(Self { a, b, c, r, d })
    }

    pub fn raw_weight(&self, t: f64, s: f64) -> f64 {
        self.a.eval(s) + self.b.eval(s) / (t + self.d) + self.c.value(t, s)
    }

    /// Kernel value for `0 <= s <= t`; negativity beyond rounding is an error.
    pub fn weight(&self, t: f64, s: f64) -> Result<f64> {
        if !(s >= 0.0) || s > t * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidArgument(format!("need 0 <= s <= t, got s = {s}, t = {t}")));
        }
        let a = self.a.eval(s);
        let b = self.b.eval(s) / (t + self.d);
        let c = self.c.value(t, s);
        let w = a + b + c;
        check_kernel_sign(w, a.abs() + b.abs() + c.abs(), t, s)?;
        Ok(w)
    }
}

pub(crate) fn check_kernel_sign(w: f64, scale: f64, t: f64, s: f64) -> Result<()> {
    if w < -1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::NegativeKernel { t, s, value: w });
    }
    Ok(())
}

/// `w(t,s)`; see [`ContinuousProblem::weight`].
pub fn weight_continuous(p: &ContinuousProblem, t: f64, s: f64) -> Result<f64> {
    p.weight(t, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp(alpha: f64, lambda: f64) -> DecayFunction {
        DecayFunction::exponential(alpha, lambda).unwrap()
    }

    #[test]
    fn kernel_values() {
        let p = ContinuousProblem::new(exp(1.0, 1.0), DecayFunction::zero(), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap();
        assert!((p.weight(3.0, 1.5).unwrap() - (-1.5f64).exp()).abs() < 1e-16);
        assert!((p.weight(2.0, 2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        assert!(p.weight(1.0, 1.5).is_err());

        let q = ContinuousProblem::new(exp(1.0, 1.0), exp(-0.5, 1.0), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap();
        assert!((q.weight(1.0, 0.0).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn negative_kernel_is_rejected() {
        let p = ContinuousProblem::new(exp(1.0, 1.0), exp(-3.0, 1.0), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap();
        assert!(matches!(p.weight(0.5, 0.0), Err(Error::NegativeKernel { .. })));
        assert!(p.weight(5.0, 0.0).is_ok());
    }

    #[test]
    fn closed_form_integrals() {
        let a = exp(2.0, 2.0);
        assert!((a.integral().unwrap() - 1.0).abs() < 1e-15);
        assert!((a.first_moment().unwrap() - 0.5).abs() < 1e-15);
        assert!(DecayFunction::exponential(0.1, 0.0).unwrap().integral().is_none());
    }

    #[test]
    fn table_interpolation_and_moments() {
        // f(s) = 1 - s/2 on [0, 2]
        let t = DecayFunction::Table(SampledFunction::new(0.5, vec![1.0, 0.75, 0.5, 0.25, 0.0], None).unwrap());
        assert!((t.eval(0.25) - 0.875).abs() < 1e-15);
        assert_eq!(t.eval(3.0), 0.0);
        assert!((t.integral().unwrap() - 1.0).abs() < 1e-15);
        // ∫ s (1 - s/2) ds over [0,2] = 2 - 4/3
        assert!((t.first_moment().unwrap() - 2.0 / 3.0).abs() < 1e-14);
        assert!((t.abs_envelope(1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn envelope_bounds_are_monotone() {
        let f = DecayFunction::exp_mixture(&[(1.0, 1.0), (-0.5, 3.0)]).unwrap();
        let mut prev = f64::INFINITY;
        let mut prev_cum = 0.0;
        for i in 0..100 {
            let t = i as f64 * 0.1;
            let e = f.abs_envelope(t);
            assert!(e <= prev && e >= f.eval(t).abs());
            prev = e;
            let c = f.abs_cumulative(t);
            assert!(c >= prev_cum);
            prev_cum = c;
        }
    }
}
