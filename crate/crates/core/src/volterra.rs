use serde::Serialize;

use crate::constants::gamma_continuous;
use crate::error::{Error, Result};
use crate::model::continuous::check_kernel_sign;
use crate::model::{ContinuousProblem, PerturbationKernelContinuous};
use crate::numeric::fit_line;

/// Uniform nodes `t_i = i h`, `i = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureGrid {
    pub h: f64,
    pub horizon: f64,
    pub m: usize,
}

impl QuadratureGrid {
    pub fn new(h: f64, horizon: f64) -> Result<Self> {
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::InvalidArgument(format!("step h = {h} must be positive")));
        }
        if !(horizon.is_finite() && horizon >= h) {
            return Err(Error::InvalidArgument(format!("horizon T = {horizon} must be at least h")));
        }
        let m = (horizon / h).round();
        if (m * h - horizon).abs() > 1e-9 * horizon {
            return Err(Error::InvalidArgument(format!("T = {horizon} is not a multiple of h = {h}")));
        }
        if m > 1e7 {
            return Err(Error::InvalidArgument(format!("{m} nodes is too many")));
        }
        Ok(Self {
            h,
            horizon,
            m: m as usize,
        })
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(|i| self.node(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousTrace {
    pub grid: QuadratureGrid,
    pub g: Vec<f64>,
    /// `H(t_i) = g(t_i) (t_i + d)^{-γ}`.
    pub big_h: Vec<f64>,
    pub gamma: f64,
    pub d: f64,
    pub monotone_decreasing: bool,
}

pub const MONOTONE_TOL: f64 = 1e-9;

/// Trapezoidal product integration with the `s = 0` term taken implicitly.
pub fn solve_volterra(p: &ContinuousProblem, grid: &QuadratureGrid) -> Result<ContinuousTrace> {
    let (gamma, _) = gamma_continuous(&p.a, &p.b)?;
    let m = grid.m;
    let h = grid.h;
    let a: Vec<f64> = (0..=m).map(|k| p.a.eval(grid.node(k))).collect();
    let b: Vec<f64> = (0..=m).map(|k| p.b.eval(grid.node(k))).collect();
    let (phi, psi): (Vec<f64>, Vec<f64>) = match &p.c {
        PerturbationKernelContinuous::Zero => (Vec::new(), Vec::new()),
        PerturbationKernelContinuous::Separable { phi, psi } => (
            (0..=m).map(|k| phi.eval(grid.node(k))).collect(),
            (0..=m).map(|k| psi.eval(grid.node(k))).collect(),
        ),
    };
    let has_c = !phi.is_empty();
    let mut g = Vec::with_capacity(m + 1);
    g.push(1.0);
    for i in 1..=m {
        let t = grid.node(i);
        let inv = 1.0 / (t + p.d);
        let ph = if has_c { phi[i] } else { 0.0 };
        let weight = |k: usize| -> Result<f64> {
            let c = if has_c { ph * psi[k] } else { 0.0 };
            let w = a[k] + b[k] * inv + c;
            if w < 0.0 {
                check_kernel_sign(w, a[k].abs() + (b[k] * inv).abs() + c.abs(), t, grid.node(k))?;
            }
            Ok(w)
        };
        let mut acc = [0.0f64; 4];
        for k in 1..i {
            acc[k & 3] += weight(k)? * g[i - k];
        }
        let interior = (acc[0] + acc[1]) + (acc[2] + acc[3]);
        let rhs = h * interior + 0.5 * h * weight(i)? * g[0] + p.r.eval(t);
        let denom = 1.0 - 0.5 * h * weight(0)?;
        if !(denom > 0.0) {
            return Err(Error::DiagonalBreakdown { t, denominator: denom });
        }
        g.push(rhs / denom);
    }
    let big_h = big_h(&g, grid, p.d, gamma);
    let monotone_decreasing = is_monotone(&g, h, MONOTONE_TOL);
    Ok(ContinuousTrace {
        grid: *grid,
        g,
        big_h,
        gamma,
        d: p.d,
        monotone_decreasing,
    })
}

/// Solves on `grid` and on the grid with half the step, and combines the two
/// as `(4 g_{h/2} - g_h) / 3` at the nodes of `grid`.
pub fn solve_volterra_extrapolated(p: &ContinuousProblem, grid: &QuadratureGrid) -> Result<ContinuousTrace> {
    let coarse = solve_volterra(p, grid)?;
    let fine = solve_volterra(p, &QuadratureGrid::new(0.5 * grid.h, grid.horizon)?)?;
    let g: Vec<f64> = coarse
        .g
        .iter()
        .enumerate()
        .map(|(i, v)| (4.0 * fine.g[2 * i] - v) / 3.0)
        .collect();
    Ok(ContinuousTrace {
        big_h: big_h(&g, grid, p.d, coarse.gamma),
        monotone_decreasing: is_monotone(&g, grid.h, MONOTONE_TOL),
        grid: *grid,
        g,
        gamma: coarse.gamma,
        d: p.d,
    })
}

fn big_h(g: &[f64], grid: &QuadratureGrid, d: f64, gamma: f64) -> Vec<f64> {
    g.iter()
        .enumerate()
        .map(|(i, v)| v * (grid.node(i) + d).powf(-gamma))
        .collect()
}

fn is_monotone(g: &[f64], h: f64, tol: f64) -> bool {
    g.windows(2).all(|w| w[1] <= w[0] + tol * h)
}

/// Whether `g(t_{i+1}) <= g(t_i) + tol h` at every node.
pub fn monotonicity(tr: &ContinuousTrace, tol: f64) -> bool {
    is_monotone(&tr.g, tr.grid.h, tol)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExponentFit {
    pub gamma_hat: f64,
    pub c_hat: f64,
    pub r_squared: f64,
    pub nodes: usize,
}

pub const MIN_FIT_NODES: usize = 10;

/// Least squares `log g ≈ log C + γ̂ log t` over the nodes in `[t1, t2]`.
pub fn fit_exponent(tr: &ContinuousTrace, t1: f64, t2: f64) -> Result<ExponentFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, g) in tr.g.iter().enumerate() {
        let t = tr.grid.node(i);
        if t < t1 || t > t2 || t <= 0.0 {
            continue;
        }
        if !(*g > 0.0) {
            return Err(Error::NonPositiveSample { t, value: *g });
        }
        xs.push(t.ln());
        ys.push(g.ln());
    }
    if xs.len() < MIN_FIT_NODES {
        return Err(Error::InsufficientNodes {
            found: xs.len(),
            needed: MIN_FIT_NODES,
        });
    }
    let fit = fit_line(&xs, &ys).ok_or(Error::InsufficientNodes {
        found: xs.len(),
        needed: MIN_FIT_NODES,
    })?;
    Ok(ExponentFit {
        gamma_hat: fit.slope,
        c_hat: fit.intercept.exp(),
        r_squared: fit.r_squared,
        nodes: xs.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Band {
    pub inf_h: f64,
    pub sup_h: f64,
    /// `sup H` over the whole grid.
    pub sup_all: f64,
}

impl Band {
    pub fn ratio(&self) -> f64 {
        self.sup_h / self.inf_h
    }
}

/// Infimum and supremum of `g (t+d)^{-γ}` over the last `tail_fraction` of the grid.
pub fn check_bounds(tr: &ContinuousTrace, gamma: f64, tail_fraction: f64) -> Band {
    let h = big_h(&tr.g, &tr.grid, tr.d, gamma);
    let frac = tail_fraction.clamp(0.0, 1.0);
    let start = ((1.0 - frac) * tr.grid.m as f64).floor() as usize;
    let tail = &h[start.min(tr.grid.m)..];
    let inf_h = tail.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    let sup_h = tail.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    let sup_all = h.iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v));
    Band { inf_h, sup_h, sup_all }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BandVerdict {
    Pass,
    Fail,
    Inconclusive,
}

/// Operational form of the two-sided bound: the tail band stays above
/// `floor` and its supremum moves by at most `rel_tol` when the horizon doubles.
pub fn band_verdict(short: &Band, long: &Band, floor: f64, rel_tol: f64) -> BandVerdict {
    if !(long.inf_h > floor) {
        return BandVerdict::Fail;
    }
    let drift = (long.sup_h - short.sup_h).abs() / short.sup_h.abs().max(f64::MIN_POSITIVE);
    let ratio_growth = long.ratio() / short.ratio();
    if drift <= rel_tol && ratio_growth <= 1.0 + rel_tol {
        BandVerdict::Pass
    } else if ratio_growth > 1.0 + 4.0 * rel_tol {
        BandVerdict::Fail
    } else {
        BandVerdict::Inconclusive
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VolterraOptions {
    pub h: f64,
    pub horizon: f64,
    pub tail_fraction: f64,
    pub monotone_tol: f64,
}

impl Default for VolterraOptions {
    fn default() -> Self {
        Self {
            h: 0.02,
            horizon: 100.0,
            tail_fraction: 0.5,
            monotone_tol: MONOTONE_TOL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VolterraRun {
    pub trace: ContinuousTrace,
    pub fit: std::result::Result<ExponentFit, Error>,
    pub band: Band,
    pub monotone: bool,
}

/// Solve, fit the exponent over `[T/2, T]` and measure the tail band.
pub fn run_volterra(p: &ContinuousProblem, opts: &VolterraOptions) -> Result<VolterraRun> {
    let grid = QuadratureGrid::new(opts.h, opts.horizon)?;
    let trace = solve_volterra(p, &grid)?;
    let fit = fit_exponent(&trace, 0.5 * opts.horizon, opts.horizon);
    let band = check_bounds(&trace, trace.gamma, opts.tail_fraction);
    let monotone = monotonicity(&trace, opts.monotone_tol);
    Ok(VolterraRun {
        trace,
        fit,
        band,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DecayFunction;

    fn exp(alpha: f64, lambda: f64) -> DecayFunction {
        DecayFunction::exponential(alpha, lambda).unwrap()
    }

    fn poisson() -> ContinuousProblem {
        ContinuousProblem::new(exp(1.0, 1.0), DecayFunction::zero(), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap()
    }

    fn synthetic(f: impl Fn(f64) -> f64, h: f64, horizon: f64) -> ContinuousTrace {
        let grid = QuadratureGrid::new(h, horizon).unwrap();
        let g: Vec<f64> = grid.nodes().map(f).collect();
        ContinuousTrace {
            big_h: big_h(&g, &grid, 1.0, 0.0),
            monotone_decreasing: is_monotone(&g, h, MONOTONE_TOL),
            grid,
            g,
            gamma: 0.0,
            d: 1.0,
        }
    }

    #[test]
    fn grid_rejects_bad_steps() {
        assert!(QuadratureGrid::new(0.0, 1.0).is_err());
        assert!(QuadratureGrid::new(0.3, 1.0).is_err());
        assert_eq!(QuadratureGrid::new(0.01, 50.0).unwrap().m, 5000);
    }

    #[test]
    fn poisson_solution_is_close_to_one() {
        let tr = solve_volterra(&poisson(), &QuadratureGrid::new(0.05, 20.0).unwrap()).unwrap();
        assert_eq!(tr.g[0], 1.0);
        // the trapezoid defect h²/12 accumulates linearly in t
        for (i, v) in tr.g.iter().enumerate() {
            let t = tr.grid.node(i);
            assert!((v - 1.0).abs() <= 0.05f64.powi(2) * t / 12.0 * 1.01 + 1e-12);
        }
    }

    #[test]
    fn constant_trace_diagnostics() {
        let tr = synthetic(|_| 1.0, 0.5, 100.0);
        let fit = fit_exponent(&tr, 10.0, 100.0).unwrap();
        assert!(fit.gamma_hat.abs() < 1e-12);
        assert!((fit.c_hat - 1.0).abs() < 1e-12);
        assert!(monotonicity(&tr, 0.0));
        let band = check_bounds(&tr, 0.0, 0.5);
        assert_eq!((band.inf_h, band.sup_h), (1.0, 1.0));
    }

    #[test]
    fn synthetic_power_law_fit() {
        let tr = synthetic(|t| 1.0 / (1.0 + t), 0.5, 200.0);
        let fit = fit_exponent(&tr, 100.0, 200.0).unwrap();
        assert!((fit.gamma_hat + 1.0).abs() < 0.01);
        assert!(fit.r_squared > 0.999);
    }

    #[test]
    fn fit_errors() {
        let tr = synthetic(|_| 1.0, 1.0, 20.0);
        assert!(matches!(fit_exponent(&tr, 15.0, 18.0), Err(Error::InsufficientNodes { .. })));
        let tr = synthetic(|t| 5.0 - t, 0.1, 10.0);
        assert!(matches!(fit_exponent(&tr, 1.0, 10.0), Err(Error::NonPositiveSample { .. })));
    }

    #[test]
    fn large_step_breaks_the_diagonal() {
        let p = ContinuousProblem::new(exp(4.0, 4.0), DecayFunction::zero(), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap();
        let grid = QuadratureGrid::new(0.5, 5.0).unwrap();
        assert!(matches!(solve_volterra(&p, &grid), Err(Error::DiagonalBreakdown { .. })));
    }

    #[test]
    fn negative_beta_family_decreases() {
        let p = ContinuousProblem::new(exp(1.0, 1.0), exp(-0.5, 1.0), PerturbationKernelContinuous::Zero, exp(1.0, 1.0), 1.0).unwrap();
        let tr = solve_volterra(&p, &QuadratureGrid::new(0.05, 200.0).unwrap()).unwrap();
        assert!(tr.g.iter().all(|v| *v > 0.0));
        assert!(tr.monotone_decreasing);
        let coarse = solve_volterra(&p, &QuadratureGrid::new(0.1, 200.0).unwrap()).unwrap();
        let fine = solve_volterra(&p, &QuadratureGrid::new(0.025, 200.0).unwrap()).unwrap();
        let (g1, g2, g3) = (*coarse.g.last().unwrap(), *tr.g.last().unwrap(), *fine.g.last().unwrap());
        let ratio = (g1 - g2) / (g2 - g3);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }
}
