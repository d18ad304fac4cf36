//! End-to-end runs shared by the command line and the corpus.

use num_rational::BigRational;
use serde::Serialize;

use crate::constants::{spectral_constants_continuous, SpectralConstants};
use crate::discrete::{run_discrete, DiscreteOptions, DiscreteRun};
use crate::error::Result;
use crate::laplace::{
    compute_g, compute_l, tauberian_check, trace_transform, transform, GValue, PerturbationTransform,
    TauberianReport, Transform,
};
use crate::model::{validate_continuous, validate_discrete, ContinuousProblem, DiscreteProblem, ValidationReport};
use crate::volterra::{run_volterra, solve_volterra_extrapolated, QuadratureGrid, VolterraOptions, VolterraRun};

pub const DEFAULT_Z_GRID: [f64; 12] = [0.5, 0.75, 0.9, 1.05, 1.1, 1.25, 1.4, 1.5, 1.75, 2.0, 3.0, 4.0];

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSettings {
    pub options: DiscreteOptions,
    pub z_grid: Vec<f64>,
}

impl Default for DiscreteSettings {
    fn default() -> Self {
        Self {
            options: DiscreteOptions::default(),
            z_grid: DEFAULT_Z_GRID.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousSettings {
    pub volterra: VolterraOptions,
    /// Witness `z > 1` for (i5)/(i6).
    pub z: f64,
    pub tau: f64,
    pub validation_horizon: f64,
    /// Points where `G(s)` is compared against the transform of the trace.
    pub s_values: Vec<f64>,
    pub small_s: f64,
    /// Step and horizon of the extrapolated trace used for the Tauberian check.
    pub tauberian: Option<(f64, f64)>,
}

impl Default for ContinuousSettings {
    fn default() -> Self {
        Self {
            volterra: VolterraOptions::default(),
            z: 0.5f64.exp(),
            tau: 0.5,
            validation_horizon: 50.0,
            s_values: vec![0.5, 1.0, 2.0],
            small_s: 1e-3,
            tauberian: None,
        }
    }
}

pub struct DiscretePipeline {
    pub validation: Result<ValidationReport>,
    pub run: DiscreteRun,
}

pub fn discrete_pipeline(p: &DiscreteProblem<BigRational>, settings: &DiscreteSettings) -> Result<DiscretePipeline> {
    let validation = validate_discrete(&p.to_scalar::<f64>(), &settings.z_grid);
    let run = run_discrete(p, &settings.options)?;
    Ok(DiscretePipeline { validation, run })
}

/// `compute_G` against the transform of the solved trace at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformCheck {
    pub s: f64,
    pub a: f64,
    pub b: f64,
    pub r: f64,
    pub l: f64,
    pub rstar: f64,
    pub g: GValue,
    pub trace: Transform,
    pub relative_gap: f64,
    pub within_bounds: bool,
}

pub const TRANSFORM_GAP_TOL: f64 = 0.01;

pub fn transform_check(
    p: &ContinuousProblem,
    run: &VolterraRun,
    c_part: Option<&PerturbationTransform>,
    s: f64,
) -> Result<TransformCheck> {
    let g = compute_g(p, s, c_part)?;
    let trace = trace_transform(&run.trace, s, 0);
    let relative_gap = (g.value - trace.value).abs() / g.value.abs();
    let slack = (g.truncation_bound + trace.tail_bound) / g.value.abs();
    Ok(TransformCheck {
        s,
        a: transform(&p.a, s, 0)?.value,
        b: transform(&p.b, s, 0)?.value,
        r: transform(&p.r, s, 0)?.value,
        l: compute_l(p, s)?,
        rstar: crate::laplace::compute_rstar(p, s, c_part)?,
        g,
        trace,
        relative_gap,
        within_bounds: relative_gap <= TRANSFORM_GAP_TOL + slack,
    })
}

pub struct ContinuousPipeline {
    pub validation: Result<ValidationReport>,
    pub constants: SpectralConstants,
    pub run: VolterraRun,
    pub transforms: Result<Vec<TransformCheck>>,
    /// `s L(s)` at `settings.small_s`, to be compared with `-(γ+1)`.
    pub small_s_l: Result<f64>,
    pub tauberian: Option<Result<TauberianReport>>,
}

pub fn continuous_pipeline(p: &ContinuousProblem, settings: &ContinuousSettings) -> Result<ContinuousPipeline> {
    let validation = validate_continuous(p, settings.z, settings.tau, settings.validation_horizon);
    let constants = spectral_constants_continuous(p)?;
    let run = run_volterra(p, &settings.volterra)?;
    let c_part = (!p.c.is_zero()).then(|| PerturbationTransform::new(p, &run.trace));
    let transforms = settings
        .s_values
        .iter()
        .map(|&s| transform_check(p, &run, c_part.as_ref(), s))
        .collect();
    let small_s_l = compute_l(p, settings.small_s).map(|l| settings.small_s * l);
    let tauberian = settings.tauberian.map(|(h, horizon)| tauberian_run(p, h, horizon));
    Ok(ContinuousPipeline {
        validation,
        constants,
        run,
        transforms,
        small_s_l,
        tauberian,
    })
}

/// Tauberian check on the `h`/`h/2` extrapolated trace.
pub fn tauberian_run(p: &ContinuousProblem, h: f64, horizon: f64) -> Result<TauberianReport> {
    let grid = QuadratureGrid::new(h, horizon)?;
    let trace = solve_volterra_extrapolated(p, &grid)?;
    tauberian_check(&trace, trace.gamma)
}
