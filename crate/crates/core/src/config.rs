//! TOML problem files.
//!
//! ```toml
//! kind = "discrete"          # or "continuous"
//! name = "tilted"            # optional
//!
//! [a]                        # discrete sequences: a, b, r
//! kind = "geometric"         # zero | finite | geometric
//! prefix = []                # explicit values from index 1
//! alpha = "1/2"              # tail: alpha * rho^n for n >= start
//! rho = "2/3"
//! start = 1                  # default: prefix length + 1
//!
//! [c]                        # zero | separable | table
//! kind = "separable"
//! kappa = "1/10"
//! sigma = "1/2"
//! rho = "1/2"
//!
//! [kernel]
//! weight_form = "b_over_n"   # or "b_over_n_minus_j"
//!
//! [run]
//! n = 2000
//! precision = "auto"         # auto | exact | float53 | float106
//! ```
//!
//! Continuous files use `kind = "zero" | "exp_mixture" | "table"` for `a`,
//! `b`, `r` (mixtures list `terms = [[alpha, lambda], ...]`), a separable
//! `c` with `[c.phi]` and `[c.psi]`, and `d` under `[kernel]`. Rationals
//! may be written as integers, floats, or strings such as `"-3/5"` and
//! `"0.25"`.

use std::path::Path;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Deserialize;

use crate::discrete::{ArithmeticMode, DiscreteOptions, Precision};
use crate::error::{Error, Result};
use crate::model::{
    ContinuousProblem, DecayFunction, DecaySequence, DiscreteProblem, Envelope, KernelTable,
    PerturbationKernelContinuous, PerturbationKernelDiscrete, SampledFunction, SignConstraint, Tail, WeightForm,
};
use crate::pipeline::{ContinuousSettings, DiscreteSettings, DEFAULT_Z_GRID};
use crate::volterra::VolterraOptions;

/// Parses `"p/q"`, integers, and decimals with an optional exponent, exactly.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let bad = || Error::ParseRational(text.to_string());
    let s = text.trim();
    if s.is_empty() || s.len() > 4096 {
        return Err(bad());
    }
    if let Some((num, den)) = s.split_once('/') {
        let num = parse_decimal(num.trim()).ok_or_else(bad)?;
        let den = parse_decimal(den.trim()).ok_or_else(bad)?;
        if den.is_zero() {
            return Err(bad());
        }
        return Ok(num / den);
    }
    parse_decimal(s).ok_or_else(bad)
}

const MAX_EXPONENT: i64 = 4096;

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], i64::from_str(&s[i + 1..]).ok()?),
        None => (s, 0),
    };
    if exponent.abs() > MAX_EXPONENT {
        return None;
    }
    let (negative, digits) = match mantissa.as_bytes().first()? {
        b'-' => (true, &mantissa[1..]),
        b'+' => (false, &mantissa[1..]),
        _ => (false, mantissa),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return None;
    }
    let all = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&all).ok()?);
    let shift = exponent - frac_part.len() as i64;
    let ten = BigRational::from_integer(10.into());
    let scale = num_traits::pow(ten, shift.unsigned_abs() as usize);
    if shift >= 0 {
        value *= scale;
    } else {
        value /= scale;
    }
    Some(if negative { -value } else { value })
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Num {
    fn rational(&self) -> Result<BigRational> {
        match self {
            Num::Int(i) => Ok(BigRational::from_integer((*i).into())),
            Num::Float(f) => BigRational::from_float(*f).ok_or_else(|| Error::Config(format!("non-finite number {f}"))),
            Num::Text(s) => parse_rational(s),
        }
    }

    fn real(&self) -> Result<f64> {
        match self {
            Num::Int(i) => Ok(*i as f64),
            Num::Float(f) => Ok(*f),
            Num::Text(s) => parse_rational(s).map(|r| ToPrimitive::to_f64(&r).unwrap_or(f64::NAN)),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SequenceSpec {
    kind: String,
    #[serde(default)]
    prefix: Vec<Num>,
    alpha: Option<Num>,
    rho: Option<Num>,
    start: Option<usize>,
}

impl SequenceSpec {
    fn build(&self, section: &str, sign: SignConstraint) -> Result<DecaySequence<BigRational>> {
        let ctx = |e: Error| Error::Config(format!("[{section}]: {e}"));
        let prefix = self.prefix.iter().map(Num::rational).collect::<Result<Vec<_>>>().map_err(ctx)?;
        let tail = match self.kind.as_str() {
            "zero" | "finite" => {
                if self.alpha.is_some() || self.rho.is_some() || self.start.is_some() {
                    return Err(Error::Config(format!("[{section}]: alpha/rho/start need kind = \"geometric\"")));
                }
                if self.kind == "zero" && !prefix.is_empty() {
                    return Err(Error::Config(format!("[{section}]: kind = \"zero\" takes no prefix")));
                }
                Tail::Zero
            }
            "geometric" => {
                let need = |v: &Option<Num>, key: &str| {
                    v.as_ref()
                        .ok_or_else(|| Error::Config(format!("[{section}]: missing {key}")))
                        .and_then(|n| n.rational().map_err(ctx))
                };
                Tail::Geometric {
                    coeff: need(&self.alpha, "alpha")?,
                    ratio: need(&self.rho, "rho")?,
                    start: self.start.unwrap_or(prefix.len() + 1),
                }
            }
            other => return Err(Error::Config(format!("[{section}]: unknown kind {other:?}"))),
        };
        DecaySequence::new(prefix, tail, sign).map_err(ctx)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowSpec {
    n: usize,
    value: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrySpec {
    n: usize,
    j: usize,
    value: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteEnvelopeSpec {
    k: Num,
    sigma: Num,
    rho: Num,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteKernelSpec {
    kind: String,
    kappa: Option<Num>,
    sigma: Option<Num>,
    rho: Option<Num>,
    #[serde(default)]
    rows: Vec<RowSpec>,
    #[serde(default)]
    entries: Vec<EntrySpec>,
    envelope: Option<DiscreteEnvelopeSpec>,
}

impl DiscreteKernelSpec {
    fn build(&self) -> Result<PerturbationKernelDiscrete<BigRational>> {
        let ctx = |e: Error| Error::Config(format!("[c]: {e}"));
        let table_keys = !self.rows.is_empty() || !self.entries.is_empty() || self.envelope.is_some();
        let separable_keys = self.kappa.is_some() || self.sigma.is_some() || self.rho.is_some();
        match self.kind.as_str() {
            "zero" if !table_keys && !separable_keys => Ok(PerturbationKernelDiscrete::Zero),
            "separable" if !table_keys => {
                let need = |v: &Option<Num>, key: &str| {
                    v.as_ref()
                        .ok_or_else(|| Error::Config(format!("[c]: missing {key}")))
                        .and_then(|n| n.rational().map_err(ctx))
                };
                PerturbationKernelDiscrete::separable(need(&self.kappa, "kappa")?, need(&self.sigma, "sigma")?, need(&self.rho, "rho")?)
                    .map_err(ctx)
            }
            "table" if !separable_keys => {
                let envelope = match &self.envelope {
                    Some(e) => Some(Envelope {
                        k: e.k.rational().map_err(ctx)?,
                        sigma: e.sigma.rational().map_err(ctx)?,
                        rho: e.rho.rational().map_err(ctx)?,
                    }),
                    None => None,
                };
                let mut table = KernelTable::new(envelope).map_err(ctx)?;
                for row in &self.rows {
                    table.insert_row(row.n, row.value.rational().map_err(ctx)?).map_err(ctx)?;
                }
                for e in &self.entries {
                    table.insert(e.n, e.j, e.value.rational().map_err(ctx)?).map_err(ctx)?;
                }
                Ok(PerturbationKernelDiscrete::Table(table))
            }
            "zero" | "separable" | "table" => Err(Error::Config(format!(
                "[c]: keys do not match kind = {:?}",
                self.kind
            ))),
            other => Err(Error::Config(format!("[c]: unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DiscreteKernelForm {
    weight_form: Option<String>,
    #[serde(default)]
    allow_negative_weights: bool,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct DiscreteRunSpec {
    n: Option<usize>,
    tol: Option<f64>,
    q_tol: Option<f64>,
    precision: Option<String>,
    z_grid: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DiscreteFile {
    #[allow(dead_code)]
    kind: String,
    name: Option<String>,
    a: SequenceSpec,
    b: Option<SequenceSpec>,
    c: Option<DiscreteKernelSpec>,
    r: SequenceSpec,
    #[serde(default)]
    kernel: DiscreteKernelForm,
    #[serde(default)]
    run: DiscreteRunSpec,
}

pub fn parse_precision(text: &str) -> Result<Precision> {
    match text.trim().to_ascii_lowercase().as_str() {
        "auto" => Ok(Precision::Auto),
        "exact" | "exact_rational" | "rational" => Ok(Precision::Fixed(ArithmeticMode::ExactRational)),
        "53" | "float53" | "double" | "f64" => Ok(Precision::Fixed(ArithmeticMode::DOUBLE)),
        "106" | "float106" | "double-double" | "double_double" => Ok(Precision::Fixed(ArithmeticMode::DOUBLE_DOUBLE)),
        other => Err(Error::Config(format!("unknown precision {other:?}"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuousEnvelopeSpec {
    k: f64,
    lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FunctionSpec {
    kind: String,
    #[serde(default)]
    terms: Vec<(Num, Num)>,
    step: Option<f64>,
    samples: Option<Vec<f64>>,
    envelope: Option<ContinuousEnvelopeSpec>,
}

impl FunctionSpec {
    fn build(&self, section: &str) -> Result<DecayFunction> {
        let ctx = |e: Error| Error::Config(format!("[{section}]: {e}"));
        let table_keys = self.step.is_some() || self.samples.is_some() || self.envelope.is_some();
        match (self.kind.as_str(), table_keys) {
            ("zero", false) if self.terms.is_empty() => Ok(DecayFunction::zero()),
            ("exp_mixture", false) => {
                let terms = self
                    .terms
                    .iter()
                    .map(|(a, l)| Ok((a.real()?, l.real()?)))
                    .collect::<Result<Vec<_>>>()
                    .map_err(ctx)?;
                DecayFunction::exp_mixture(&terms).map_err(ctx)
            }
            ("table", true) if self.terms.is_empty() => {
                let (Some(step), Some(samples)) = (self.step, &self.samples) else {
                    return Err(Error::Config(format!("[{section}]: a table needs step and samples")));
                };
                let envelope = self.envelope.as_ref().map(|e| (e.k, e.lambda));
                SampledFunction::new(step, samples.clone(), envelope)
                    .map(DecayFunction::Table)
                    .map_err(ctx)
            }
            ("zero" | "exp_mixture" | "table", _) => {
                Err(Error::Config(format!("[{section}]: keys do not match kind = {:?}", self.kind)))
            }
            (other, _) => Err(Error::Config(format!("[{section}]: unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuousKernelSpec {
    kind: String,
    phi: Option<FunctionSpec>,
    psi: Option<FunctionSpec>,
}

impl ContinuousKernelSpec {
    fn build(&self) -> Result<PerturbationKernelContinuous> {
        match (self.kind.as_str(), &self.phi, &self.psi) {
            ("zero", None, None) => Ok(PerturbationKernelContinuous::Zero),
            ("separable", Some(phi), Some(psi)) => Ok(PerturbationKernelContinuous::Separable {
                phi: phi.build("c.phi")?,
                psi: psi.build("c.psi")?,
            }),
            ("separable", _, _) => Err(Error::Config("[c]: separable needs [c.phi] and [c.psi]".into())),
            ("zero", _, _) => Err(Error::Config("[c]: kind = \"zero\" takes no phi/psi".into())),
            (other, _, _) => Err(Error::Config(format!("[c]: unknown kind {other:?}"))),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuousKernelForm {
    d: Num,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ContinuousRunSpec {
    h: Option<f64>,
    t: Option<f64>,
    tail_fraction: Option<f64>,
    monotone_tol: Option<f64>,
    z: Option<f64>,
    tau: Option<f64>,
    validation_horizon: Option<f64>,
    s_values: Option<Vec<f64>>,
    small_s: Option<f64>,
    tauberian_h: Option<f64>,
    tauberian_t: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContinuousFile {
    #[allow(dead_code)]
    kind: String,
    name: Option<String>,
    a: FunctionSpec,
    b: Option<FunctionSpec>,
    c: Option<ContinuousKernelSpec>,
    r: FunctionSpec,
    kernel: ContinuousKernelForm,
    #[serde(default)]
    run: ContinuousRunSpec,
}

#[derive(Debug, Clone)]
pub enum ProblemConfig {
    Discrete {
        name: Option<String>,
        problem: DiscreteProblem<BigRational>,
        settings: DiscreteSettings,
    },
    Continuous {
        name: Option<String>,
        problem: ContinuousProblem,
        settings: ContinuousSettings,
    },
}

impl ProblemConfig {
    pub fn name(&self) -> Option<&str> {
        match self {
            Self::Discrete { name, .. } | Self::Continuous { name, .. } => name.as_deref(),
        }
    }
}

#[derive(Deserialize)]
struct KindOnly {
    kind: Option<String>,
}

pub fn parse_problem(text: &str) -> Result<ProblemConfig> {
    let de = |e: toml::de::Error| Error::Config(e.message().to_string());
    let probe: KindOnly = toml::from_str(text).map_err(de)?;
    match probe.kind.as_deref() {
        Some("discrete") => discrete_from(toml::from_str(text).map_err(de)?),
        Some("continuous") => continuous_from(toml::from_str(text).map_err(de)?),
        Some(other) => Err(Error::Config(format!("unknown problem kind {other:?}"))),
        None => Err(Error::Config("missing top-level `kind`".into())),
    }
}

pub fn load(path: &Path) -> Result<ProblemConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    parse_problem(&text)
}

fn discrete_from(f: DiscreteFile) -> Result<ProblemConfig> {
    let a = f.a.build("a", SignConstraint::Nonnegative)?;
    let b = match &f.b {
        Some(b) => b.build("b", SignConstraint::Any)?,
        None => DecaySequence::zero(SignConstraint::Any),
    };
    let r = f.r.build("r", SignConstraint::Nonnegative)?;
    let c = match &f.c {
        Some(c) => c.build()?,
        None => PerturbationKernelDiscrete::Zero,
    };
    let weight_form = match f.kernel.weight_form.as_deref() {
        None | Some("b_over_n") => WeightForm::BOverN,
        Some("b_over_n_minus_j") => WeightForm::BOverNMinusJ,
        Some(other) => return Err(Error::Config(format!("[kernel]: unknown weight_form {other:?}"))),
    };
    let mut problem = DiscreteProblem::new(a, b, c, r, weight_form)?;
    problem.allow_negative_weights = f.kernel.allow_negative_weights;

    let defaults = DiscreteOptions::default();
    let run = f.run;
    let options = DiscreteOptions {
        n_max: run.n.unwrap_or(defaults.n_max),
        tol: run.tol.unwrap_or(defaults.tol),
        q_tol: run.q_tol.unwrap_or(defaults.q_tol),
        precision: run.precision.as_deref().map(parse_precision).transpose()?.unwrap_or(defaults.precision),
    };
    if options.n_max == 0 {
        return Err(Error::Config("[run]: n must be positive".into()));
    }
    Ok(ProblemConfig::Discrete {
        name: f.name,
        problem,
        settings: DiscreteSettings {
            options,
            z_grid: run.z_grid.unwrap_or_else(|| DEFAULT_Z_GRID.to_vec()),
        },
    })
}

fn continuous_from(f: ContinuousFile) -> Result<ProblemConfig> {
    let a = f.a.build("a")?;
    let b = match &f.b {
        Some(b) => b.build("b")?,
        None => DecayFunction::zero(),
    };
    let r = f.r.build("r")?;
    let c = match &f.c {
        Some(c) => c.build()?,
        None => PerturbationKernelContinuous::Zero,
    };
    let d = f.kernel.d.real()?;
    let problem = ContinuousProblem::new(a, b, c, r, d)?;

    let defaults = ContinuousSettings::default();
    let run = f.run;
    let tauberian = match (run.tauberian_h, run.tauberian_t) {
        (Some(h), Some(t)) => Some((h, t)),
        (None, None) => None,
        _ => return Err(Error::Config("[run]: tauberian_h and tauberian_t go together".into())),
    };
    let settings = ContinuousSettings {
        volterra: VolterraOptions {
            h: run.h.unwrap_or(defaults.volterra.h),
            horizon: run.t.unwrap_or(defaults.volterra.horizon),
            tail_fraction: run.tail_fraction.unwrap_or(defaults.volterra.tail_fraction),
            monotone_tol: run.monotone_tol.unwrap_or(defaults.volterra.monotone_tol),
        },
        z: run.z.unwrap_or(defaults.z),
        tau: run.tau.unwrap_or(defaults.tau),
        validation_horizon: run.validation_horizon.unwrap_or(defaults.validation_horizon),
        s_values: run.s_values.unwrap_or(defaults.s_values),
        small_s: run.small_s.unwrap_or(defaults.small_s),
        tauberian,
    };
    Ok(ProblemConfig::Continuous {
        name: f.name,
        problem,
        settings,
    })
}
