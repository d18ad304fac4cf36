use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ContinuousProblem, DecayFunction, PerturbationKernelContinuous};
use crate::numeric::{upper_gamma_tail, GaussLegendre, NeumaierSum};
use crate::volterra::ContinuousTrace;

/// A transform value with a bound on the part not captured by the computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transform {
    pub value: f64,
    pub tail_bound: f64,
}

fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

/// `F^{(k)}(s) = (-1)^k ∫_0^∞ e^{-sx} x^k f(x) dx`.
pub fn transform(f: &DecayFunction, s: f64, k: u32) -> Result<Transform> {
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    match f {
        DecayFunction::ExpMixture(terms) => {
            let mut acc = NeumaierSum::new();
            for t in terms {
                let z = s + t.lambda;
                if !(z > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "s = {s} is at or left of the pole -{} of the transform",
                        t.lambda
                    )));
                }
                acc.add(t.alpha * factorial(k) / z.powi(k as i32 + 1));
            }
            Ok(Transform {
                value: sign * acc.value(),
                tail_bound: 0.0,
            })
        }
        DecayFunction::Table(tab) => {
            let gl = GaussLegendre::new(8);
            let h = tab.step();
            let mut acc = NeumaierSum::new();
            for i in 0..tab.samples().len() - 1 {
                let lo = i as f64 * h;
                acc.add(gl.integrate(lo, lo + h, |x| (-s * x).exp() * x.powi(k as i32) * f.eval(x)));
            }
            let tail_bound = match tab.envelope() {
                Some((kk, lambda)) if s + lambda > 0.0 => kk * upper_gamma_tail(k, s + lambda, tab.cutoff()),
                Some(_) => f64::INFINITY,
                None => 0.0,
            };
            Ok(Transform {
                value: sign * acc.value(),
                tail_bound,
            })
        }
    }
}

/// `1 - A(s)` without cancellation for small `s`.
pub fn one_minus_a(a: &DecayFunction, s: f64) -> Result<f64> {
    match a {
        DecayFunction::ExpMixture(terms) if terms.iter().all(|t| t.lambda > 0.0) => {
            // (1 - Σ α/λ) + s Σ α / (λ (s + λ))
            let mut mass = NeumaierSum::new();
            mass.add(1.0);
            let mut shift = NeumaierSum::new();
            for t in terms {
                mass.add(-t.alpha / t.lambda);
                shift.add(t.alpha / (t.lambda * (s + t.lambda)));
            }
            Ok(mass.value() + s * shift.value())
        }
        DecayFunction::ExpMixture(_) => Ok(1.0 - transform(a, s, 0)?.value),
        DecayFunction::Table(tab) => {
            let gl = GaussLegendre::new(8);
            let h = tab.step();
            let mut acc = NeumaierSum::new();
            acc.add(1.0 - a.integral().unwrap_or(0.0));
            for i in 0..tab.samples().len() - 1 {
                let lo = i as f64 * h;
                acc.add(gl.integrate(lo, lo + h, |x| -(-s * x).exp_m1() * a.eval(x)));
            }
            Ok(acc.value())
        }
    }
}

const SINGULAR_FLOOR: f64 = 1e-14;

fn checked_one_minus_a(p: &ContinuousProblem, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::InvalidArgument(format!("s = {s} must be positive")));
    }
    let v = one_minus_a(&p.a, s)?;
    if v.abs() < SINGULAR_FLOOR {
        return Err(Error::NearSingular(v));
    }
    Ok(v)
}

/// `L(s) = d - (B(s) - A'(s)) / (1 - A(s))`.
pub fn compute_l(p: &ContinuousProblem, s: f64) -> Result<f64> {
    let den = checked_one_minus_a(p, s)?;
    let b = transform(&p.b, s, 0)?.value;
    let da = transform(&p.a, s, 1)?.value;
    Ok(p.d - (b - da) / den)
}

/// Precomputed `x ↦ ∫_0^x g(x-u) c(x,u) du` on a trace grid.
#[derive(Debug, Clone)]
pub struct PerturbationTransform {
    h: f64,
    d: f64,
    inner: Vec<f64>,
}

impl PerturbationTransform {
    pub fn new(p: &ContinuousProblem, tr: &ContinuousTrace) -> Self {
        let m = tr.grid.m;
        let h = tr.grid.h;
        let inner = match &p.c {
            PerturbationKernelContinuous::Zero => vec![0.0; m + 1],
            PerturbationKernelContinuous::Separable { phi, psi } => {
                let psi_v: Vec<f64> = (0..=m).map(|k| psi.eval(tr.grid.node(k))).collect();
                (0..=m)
                    .map(|i| {
                        if i == 0 {
                            return 0.0;
                        }
                        let mut acc = 0.5 * (psi_v[0] * tr.g[i] + psi_v[i] * tr.g[0]);
                        for k in 1..i {
                            acc += psi_v[k] * tr.g[i - k];
                        }
                        phi.eval(tr.grid.node(i)) * h * acc
                    })
                    .collect()
            }
        };
        Self { h, d: p.d, inner }
    }

    /// `C(s) = ∫_0^T e^{-sx} (x+d) ∫_0^x g(x-u) c(x,u) du dx` by the trapezoid rule.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.inner.len();
        let mut acc = NeumaierSum::new();
        for (i, v) in self.inner.iter().enumerate() {
            let x = i as f64 * self.h;
            let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
            acc.add(w * (-s * x).exp() * (x + self.d) * v);
        }
        self.h * acc.value()
    }
}

/// `R*(s) = -(R'(s) - d R(s) - C(s)) / (1 - A(s))`.
pub fn compute_rstar(p: &ContinuousProblem, s: f64, c_part: Option<&PerturbationTransform>) -> Result<f64> {
    let c = match (&p.c, c_part) {
        (c, _) if c.is_zero() => 0.0,
        (_, Some(ct)) => ct.eval(s),
        (_, None) => return Err(Error::MissingTrace),
    };
    let den = checked_one_minus_a(p, s)?;
    let dr = transform(&p.r, s, 1)?.value;
    let r = transform(&p.r, s, 0)?.value;
    Ok(-(dr - p.d * r - c) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GValue {
    pub value: f64,
    pub truncation_bound: f64,
}

const G_PANELS: usize = 160;
const G_ORDER: usize = 12;
const G_SPAN: f64 = 40.0;

/// `G(s) = ∫_s^∞ R*(t) exp(-∫_s^t L) dt`, truncated at `t = s + 40/d`.
pub fn compute_g(p: &ContinuousProblem, s: f64, c_part: Option<&PerturbationTransform>) -> Result<GValue> {
    if !p.c.is_zero() && c_part.is_none() {
        return Err(Error::MissingTrace);
    }
    let width = G_SPAN / p.d;
    let gl = GaussLegendre::new(G_ORDER);
    // Panels are graded towards s where L and R* vary fastest.
    let edge = |k: usize| s + width * (k as f64 / G_PANELS as f64).powi(2);
    let mut log_decay = 0.0;
    let mut acc = NeumaierSum::new();
    let mut last = (0.0, 0.0);
    for k in 0..G_PANELS {
        let (lo, hi) = (edge(k), edge(k + 1));
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (x, w) in gl.nodes().iter().zip(gl.weights()) {
            let t = mid + half * x;
            let partial = {
                let sub_half = 0.5 * (t - lo);
                let sub_mid = 0.5 * (t + lo);
                let mut inner = 0.0;
                for (y, v) in gl.nodes().iter().zip(gl.weights()) {
                    inner += v * compute_l(p, sub_mid + sub_half * y)?;
                }
                inner * sub_half
            };
            let rstar = compute_rstar(p, t, c_part)?;
            acc.add(w * half * rstar * (-(log_decay + partial)).exp());
        }
        let mut panel = 0.0;
        for (y, v) in gl.nodes().iter().zip(gl.weights()) {
            panel += v * compute_l(p, mid + half * y)?;
        }
        log_decay += panel * half;
        last = (hi, compute_rstar(p, hi, c_part)?);
    }
    let l_end = compute_l(p, last.0)?;
    let truncation_bound = if l_end > 0.0 {
        last.1.abs() * (-log_decay).exp() / l_end
    } else {
        f64::INFINITY
    };
    Ok(GValue {
        value: acc.value(),
        truncation_bound,
    })
}

/// `∫_0^T e^{-sx} x^k g(x) dx` from the trace, with a bound on the
/// quadrature error plus the part beyond the horizon.
pub fn trace_transform(tr: &ContinuousTrace, s: f64, k: u32) -> Transform {
    let f = |i: usize| {
        let x = tr.grid.node(i);
        (-s * x).exp() * x.powi(k as i32) * tr.g[i]
    };
    let m = tr.grid.m;
    let h = tr.grid.h;
    let trap = |stride: usize| {
        let mut acc = NeumaierSum::new();
        let last = m - m % stride;
        for i in (0..=last).step_by(stride) {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            acc.add(w * f(i));
        }
        (acc.value() * h * stride as f64, last)
    };
    let (fine, _) = trap(1);
    let (coarse, last) = trap(2);
    let (fine_same, _) = {
        let mut acc = NeumaierSum::new();
        for i in 0..=last {
            let w = if i == 0 || i == last { 0.5 } else { 1.0 };
            acc.add(w * f(i));
        }
        (acc.value() * h, ())
    };
    let quad = (fine_same - coarse).abs() / 3.0;
    let g_end = tr.g[m].abs();
    let tail = g_end * upper_gamma_tail(k, s, tr.grid.horizon);
    Transform {
        value: fine,
        tail_bound: quad + tail,
    }
}

/// Ladder rows for the transform table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformRow {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub l: f64,
    pub rstar: f64,
    pub g: f64,
    pub c: f64,
    pub g_truncation: f64,
}

/// `A, B, R, L, R*, G` at each `s`.
pub fn transform_table(
    p: &ContinuousProblem,
    s_values: &[f64],
    c_part: Option<&PerturbationTransform>,
) -> Result<Vec<TransformRow>> {
    s_values
        .iter()
        .map(|&s| {
            let g = compute_g(p, s, c_part)?;
            Ok(TransformRow {
                s,
                a: transform(&p.a, s, 0)?.value,
                b: transform(&p.b, s, 0)?.value,
                r: transform(&p.r, s, 0)?.value,
                l: compute_l(p, s)?,
                rstar: compute_rstar(p, s, c_part)?,
                g: g.value,
                c: c_part.map_or(0.0, |c| c.eval(s)),
                g_truncation: g.truncation_bound,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TauberianVerdict {
    Consistent,
    Inconsistent,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TauberianReport {
    pub k: u32,
    pub gamma: f64,
    /// `γ + k + 1`.
    pub rho: f64,
    pub s_ladder: Vec<f64>,
    /// `s^{γ+k+1} |G^{(k)}(s)|` along `s_ladder`.
    pub k_ladder: Vec<f64>,
    pub x_ladder: Vec<f64>,
    /// `U(x) / x^{γ+k+1}` along `x_ladder`.
    pub u_ratio_ladder: Vec<f64>,
    /// Richardson limits of the two ladders.
    pub k_limit: f64,
    pub a_limit: f64,
    /// `|K - Γ(ρ+1) A_k| / K`.
    pub karamata_gap: f64,
    pub slow_osc_pass: bool,
    pub verdict: TauberianVerdict,
}

pub const SLOW_OSC_EPS: f64 = 0.05;
const LADDER_TOL: f64 = 0.1;
const KARAMATA_TOL: f64 = 0.03;
const S_LADDER: [f64; 4] = [0.4, 0.2, 0.1, 0.05];

fn interpolate(tr: &ContinuousTrace, x: f64) -> f64 {
    let pos = x / tr.grid.h;
    let i = (pos.floor() as usize).min(tr.grid.m.saturating_sub(1));
    let frac = pos - i as f64;
    tr.g[i] * (1.0 - frac) + tr.g[i + 1] * frac
}

/// `U(x) = ∫_0^x g(u) u^k du` by the trapezoid rule on the trace.
pub fn cumulative_moment(tr: &ContinuousTrace, x: f64, k: u32) -> f64 {
    let h = tr.grid.h;
    let end = ((x / h).floor() as usize).min(tr.grid.m);
    let f = |i: usize| tr.g[i] * (i as f64 * h).powi(k as i32);
    let mut acc = NeumaierSum::new();
    for i in 0..=end {
        let w = if i == 0 || i == end { 0.5 } else { 1.0 };
        acc.add(w * f(i));
    }
    let mut total = acc.value() * h;
    let rest = x - end as f64 * h;
    if rest > 0.0 {
        let gx = interpolate(tr, x) * x.powi(k as i32);
        total += 0.5 * rest * (f(end) + gx);
    }
    total
}

/// `g(u) u^k <= g(x) x^k (1+ε)` for `x < u < x(1+δ)`, `δ = (1+ε)^{1/k} - 1`,
/// on a logarithmic grid of `x`.
pub fn slow_oscillation(tr: &ContinuousTrace, k: u32, eps: f64) -> bool {
    let delta = (1.0 + eps).powf(1.0 / k as f64) - 1.0;
    let lo = tr.grid.h;
    let hi = tr.grid.horizon / (1.0 + delta);
    if hi <= lo {
        return true;
    }
    let steps = 200;
    let ratio = (hi / lo).powf(1.0 / steps as f64);
    let pk = |x: f64| interpolate(tr, x) * x.powi(k as i32);
    (0..=steps).all(|i| {
        let x = lo * ratio.powi(i);
        let base = pk(x) * (1.0 + eps);
        (1..=8).all(|j| {
            let u = x * (1.0 + delta * j as f64 / 8.0);
            pk(u) <= base + 1e-15
        })
    })
}

/// Small-`s` and large-`x` behaviour of a monotone trace against the
/// predicted exponent `γ + k + 1`.
pub fn tauberian_check(tr: &ContinuousTrace, gamma: f64) -> Result<TauberianReport> {
    if gamma > 0.0 {
        return Err(Error::Precondition(format!("gamma = {gamma} must not be positive")));
    }
    if !tr.monotone_decreasing {
        return Err(Error::Precondition("g is not monotone decreasing on the grid".into()));
    }
    let horizon = tr.grid.horizon;
    let s_min = S_LADDER[S_LADDER.len() - 1];
    let bottom = (1e-3f64).max(5.0 / horizon);
    if s_min < bottom {
        return Err(Error::HorizonTooShort { horizon, s: s_min });
    }
    let mut k = 1u32;
    while gamma + k as f64 + 1.0 <= 0.0 {
        k += 1;
    }
    let rho = gamma + k as f64 + 1.0;

    let s_ladder = S_LADDER.to_vec();
    let k_ladder: Vec<f64> = s_ladder
        .iter()
        .map(|&s| s.powf(rho) * trace_transform(tr, s, k).value)
        .collect();
    let x_ladder: Vec<f64> = [8.0, 4.0, 2.0, 1.0].iter().map(|d| horizon / d).collect();
    let u_ratio_ladder: Vec<f64> = x_ladder
        .iter()
        .map(|&x| cumulative_moment(tr, x, k) / x.powf(rho))
        .collect();

    let n = s_ladder.len();
    let k_limit = 2.0 * k_ladder[n - 1] - k_ladder[n - 2];
    let a_limit = 2.0 * u_ratio_ladder[n - 1] - u_ratio_ladder[n - 2];
    let karamata_gap = (k_limit - libm::tgamma(rho + 1.0) * a_limit).abs() / k_limit.abs();
    let settled = |v: &[f64]| (v[n - 1] - v[n - 2]).abs() <= LADDER_TOL * v[n - 1].abs();
    let slow_osc_pass = slow_oscillation(tr, k, SLOW_OSC_EPS);

    let verdict = if !slow_osc_pass || karamata_gap > 4.0 * KARAMATA_TOL {
        TauberianVerdict::Inconsistent
    } else if settled(&k_ladder) && settled(&u_ratio_ladder) && karamata_gap <= KARAMATA_TOL {
        TauberianVerdict::Consistent
    } else {
        TauberianVerdict::Inconclusive
    };
    Ok(TauberianReport {
        k,
        gamma,
        rho,
        s_ladder,
        k_ladder,
        x_ladder,
        u_ratio_ladder,
        k_limit,
        a_limit,
        karamata_gap,
        slow_osc_pass,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volterra::{solve_volterra, QuadratureGrid};

    fn exp(alpha: f64, lambda: f64) -> DecayFunction {
        DecayFunction::exponential(alpha, lambda).unwrap()
    }

    fn poisson() -> ContinuousProblem {
        ContinuousProblem::new(exp(1.0, 1.0), DecayFunction::zero(), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap()
    }

    #[test]
    fn closed_form_transforms() {
        assert!((transform(&exp(1.0, 1.0), 1.0, 0).unwrap().value - 0.5).abs() < 1e-16);
        assert!((transform(&exp(1.0, 1.0), 1e-12, 0).unwrap().value - 1.0).abs() < 1e-11);
        assert!((transform(&exp(2.0, 2.0), 2.0, 0).unwrap().value - 0.5).abs() < 1e-16);
        assert!((transform(&exp(1.0, 1.0), 1.0, 1).unwrap().value + 0.25).abs() < 1e-16);
        assert!(transform(&exp(1.0, 1.0), -1.0, 0).is_err());
    }

    #[test]
    fn table_transform_matches_closed_form() {
        let step = 0.01;
        let samples: Vec<f64> = (0..=4000).map(|i| (-(i as f64) * step).exp()).collect();
        let tab = DecayFunction::Table(crate::model::SampledFunction::new(step, samples, Some((1.0, 1.0))).unwrap());
        let t = transform(&tab, 1.0, 0).unwrap();
        assert!((t.value - 0.5).abs() < 1e-5);
        assert!(t.tail_bound < 1e-30);
    }

    #[test]
    fn l_and_rstar_for_poisson() {
        let p = poisson();
        assert!((compute_l(&p, 1.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((compute_rstar(&p, 1.0, None).unwrap() - 1.5).abs() < 1e-15);
        assert!((1e-3 * compute_l(&p, 1e-3).unwrap() + 1.0).abs() < 2e-3);
        assert!((compute_l(&p, 1e4).unwrap() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn g_of_poisson_is_reciprocal() {
        let p = poisson();
        for s in [1.0, 2.0, 0.5] {
            let g = compute_g(&p, s, None).unwrap();
            assert!((g.value - 1.0 / s).abs() < 1e-9 + g.truncation_bound, "{s} {g:?}");
        }
    }

    #[test]
    fn perturbation_needs_a_trace() {
        let c = PerturbationKernelContinuous::Separable { phi: exp(0.1, 1.0), psi: exp(1.0, 1.0) };
        let p = ContinuousProblem::new(exp(1.0, 1.0), DecayFunction::zero(), c, exp(1.0, 1.0), 1.0).unwrap();
        assert!(matches!(compute_rstar(&p, 1.0, None), Err(Error::MissingTrace)));
    }

    #[test]
    fn constant_trace_moments() {
        let grid = QuadratureGrid::new(0.05, 200.0).unwrap();
        let tr = ContinuousTrace {
            g: vec![1.0; grid.m + 1],
            big_h: vec![1.0; grid.m + 1],
            grid,
            gamma: 0.0,
            d: 1.0,
            monotone_decreasing: true,
        };
        assert!((cumulative_moment(&tr, 200.0, 1) / 200f64.powi(2) - 0.5).abs() < 1e-12);
        let t = trace_transform(&tr, 0.05, 1);
        assert!((0.05f64.powi(2) * t.value - 1.0).abs() < 0.01);
        assert!(slow_oscillation(&tr, 1, SLOW_OSC_EPS));
        let rep = tauberian_check(&tr, 0.0).unwrap();
        assert_eq!(rep.k, 1);
        assert_eq!(rep.verdict, TauberianVerdict::Consistent);
    }

    #[test]
    fn g_matches_trace_transform_for_poisson() {
        let p = poisson();
        let tr = solve_volterra(&p, &QuadratureGrid::new(0.02, 60.0).unwrap()).unwrap();
        for s in [0.5, 1.0, 2.0] {
            let g = compute_g(&p, s, None).unwrap().value;
            let t = trace_transform(&tr, s, 0);
            assert!((g - t.value).abs() < 1e-3 * g + t.tail_bound, "{s} {g} {t:?}");
        }
    }
}
