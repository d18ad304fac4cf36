use std::collections::BTreeMap;

use serde::Serialize;

use super::sequence::{pow_index, DecaySequence, SignConstraint};
use crate::error::{Error, Result};
use crate::numeric::{Accumulator, Scalar};

/// Declared bound `|c[n,j]| <= k sigma^n rho^j` for table kernels.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<S> {
    pub k: S,
    pub sigma: S,
    pub rho: S,
}

/// Explicit perturbation values. Unlisted entries are zero; the optional
/// envelope is an assertion about the kernel the table was sampled from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct KernelTable<S> {
    entries: BTreeMap<(usize, usize), S>,
    uniform_rows: BTreeMap<usize, S>,
    envelope: Option<Envelope<S>>,
}

impl<S: Scalar> KernelTable<S> {
    pub fn new(envelope: Option<Envelope<S>>) -> Result<Self> {
        if let Some(env) = &envelope {
            check_unit_ratio(&env.sigma, "envelope sigma")?;
            check_unit_ratio(&env.rho, "envelope rho")?;
        }
        Ok(Self {
            entries: BTreeMap::new(),
            uniform_rows: BTreeMap::new(),
            envelope,
        })
    }

    /// Sets `c[n,j]` for a single `1 <= j < n`.
    pub fn insert(&mut self, n: usize, j: usize, value: S) -> Result<()> {
        if j == 0 || j >= n {
            return Err(Error::IndexOutOfRange { n, j });
        }
        if !value.is_finite() {
            return Err(Error::InvalidArgument("non-finite table entry".into()));
        }
        self.entries.insert((n, j), value);
        Ok(())
    }

    /// Sets `c[n,j] = value` for every `1 <= j < n`.
    pub fn insert_row(&mut self, n: usize, value: S) -> Result<()> {
        if n < 2 {
            return Err(Error::IndexOutOfRange { n, j: 1 });
        }
        self.uniform_rows.insert(n, value);
        Ok(())
    }

    pub fn envelope(&self) -> Option<&Envelope<S>> {
        self.envelope.as_ref()
    }

    pub fn value(&self, n: usize, j: usize) -> S {
        let mut v = self.uniform_rows.get(&n).cloned().unwrap_or_else(S::zero);
        if let Some(e) = self.entries.get(&(n, j)) {
            v = v.add(e);
        }
        v
    }

    pub(crate) fn uniform_row(&self, n: usize) -> Option<&S> {
        self.uniform_rows.get(&n)
    }

    pub(crate) fn row_entries(&self, n: usize) -> impl Iterator<Item = (usize, &S)> {
        self.entries.range((n, 0)..(n + 1, 0)).map(|((_, j), v)| (*j, v))
    }

    pub fn max_row(&self) -> usize {
        let a = self.entries.keys().next_back().map_or(0, |(n, _)| *n);
        let b = self.uniform_rows.keys().next_back().copied().unwrap_or(0);
        a.max(b)
    }

    fn abs_double_series(&self, z: &S) -> Option<S> {
        let mut acc = S::Acc::default();
        for ((_, j), v) in &self.entries {
            acc.push(v.abs().mul(&pow_index(z, *j)));
        }
        // Rows come in increasing n, so Σ_{j=1}^{n-1} z^j is extended in place.
        let mut row_sum = S::zero();
        let mut zj = S::one();
        let mut j = 1;
        for (n, v) in &self.uniform_rows {
            while j < *n {
                zj = zj.mul(z);
                row_sum = row_sum.add(&zj);
                j += 1;
            }
            if !row_sum.is_finite() {
                return None;
            }
            acc.push(v.abs().mul(&row_sum));
        }
        let total = acc.total();
        total.is_finite().then_some(total)
    }

    fn tilt(&self, q: &S) -> Result<Self> {
        let mut out = Self::new(None)?;
        for (&(n, j), v) in &self.entries {
            out.entries.insert((n, j), v.mul(&pow_index(q, j)));
        }
        for (&n, v) in &self.uniform_rows {
            for j in 1..n {
                let e = out.entries.entry((n, j)).or_insert_with(S::zero);
                *e = e.add(&v.mul(&pow_index(q, j)));
            }
        }
        out.envelope = match &self.envelope {
            Some(env) => {
                let rho = env.rho.mul(q);
                check_unit_ratio(&rho, "tilted envelope rho")?;
                Some(Envelope {
                    k: env.k.clone(),
                    sigma: env.sigma.clone(),
                    rho,
                })
            }
            None => None,
        };
        Ok(out)
    }

    fn map<T: Scalar>(&self, f: &impl Fn(&S) -> T) -> KernelTable<T> {
        KernelTable {
            entries: self.entries.iter().map(|(k, v)| (*k, f(v))).collect(),
            uniform_rows: self.uniform_rows.iter().map(|(k, v)| (*k, f(v))).collect(),
            envelope: self.envelope.as_ref().map(|e| Envelope {
                k: f(&e.k),
                sigma: f(&e.sigma),
                rho: f(&e.rho),
            }),
        }
    }
}

/// The `c[n,j]` part of the weights, defined for `1 <= j <= n-1`.
#[derive(Debug, Clone, PartialEq)]
pub enum PerturbationKernelDiscrete<S> {
    Zero,
    /// `c[n,j] = kappa sigma^n rho^j`.
    Separable { kappa: S, sigma: S, rho: S },
    Table(KernelTable<S>),
}

impl<S: Scalar> PerturbationKernelDiscrete<S> {
    pub fn separable(kappa: S, sigma: S, rho: S) -> Result<Self> {
        check_unit_ratio(&sigma, "separable sigma")?;
        check_unit_ratio(&rho, "separable rho")?;
        if !kappa.is_finite() {
            return Err(Error::InvalidArgument("non-finite kappa".into()));
        }
        Ok(Self::Separable { kappa, sigma, rho })
    }

    pub fn value(&self, n: usize, j: usize) -> S {
        if j == 0 || j >= n {
            return S::zero();
        }
        match self {
            Self::Zero => S::zero(),
            Self::Separable { kappa, sigma, rho } => {
                kappa.mul(&pow_index(sigma, n)).mul(&pow_index(rho, j))
            }
            Self::Table(t) => t.value(n, j),
        }
    }

    /// `Σ_n Σ_{j<n} |c[n,j]| z^j`, `None` when divergent.
    pub fn abs_double_series(&self, z: &S) -> Option<S> {
        match self {
            Self::Zero => Some(S::zero()),
            Self::Separable { kappa, sigma, rho } => {
                // Σ_{n>=2} σ^n Σ_{j=1}^{n-1} x^j = σ² x / ((1-σ)(1-σx)), x = ρz
                let one = S::one();
                let x = rho.mul(z);
                let sx = sigma.mul(&x);
                if sx >= one {
                    return None;
                }
                let num = kappa.abs().mul(sigma).mul(sigma).mul(&x);
                Some(num.div(&one.sub(sigma).mul(&one.sub(&sx))))
            }
            Self::Table(t) => t.abs_double_series(z),
        }
    }

    /// Whether validity of (r3) for this kernel rests on a user-asserted envelope.
    pub fn is_asserted(&self) -> bool {
        matches!(self, Self::Table(t) if t.envelope().is_some())
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Self::Zero)
    }

    pub fn tilt(&self, q: &S) -> Result<Self> {
        Ok(match self {
            Self::Zero => Self::Zero,
            Self::Separable { kappa, sigma, rho } => {
                let rho = rho.mul(q);
                check_unit_ratio(&rho, "tilted separable rho")?;
                Self::Separable {
                    kappa: kappa.clone(),
                    sigma: sigma.clone(),
                    rho,
                }
            }
            Self::Table(t) => Self::Table(t.tilt(q)?),
        })
    }

    pub fn map<T: Scalar>(&self, f: &impl Fn(&S) -> T) -> PerturbationKernelDiscrete<T> {
        match self {
            Self::Zero => PerturbationKernelDiscrete::Zero,
            Self::Separable { kappa, sigma, rho } => PerturbationKernelDiscrete::Separable {
                kappa: f(kappa),
                sigma: f(sigma),
                rho: f(rho),
            },
            Self::Table(t) => PerturbationKernelDiscrete::Table(t.map(f)),
        }
    }
}

fn check_unit_ratio<S: Scalar>(v: &S, what: &str) -> Result<()> {
    if !v.is_positive() || *v >= S::one() || !v.is_finite() {
        return Err(Error::MalformedEnvelope(format!(
            "{what} = {} must lie in (0, 1)",
            v.to_f64()
        )));
    }
    Ok(())
}

/// How the `b` coefficients enter the weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightForm {
    /// `w[n,j] = a_j + b_j / n + c[n,j]`
    #[default]
    BOverN,
    /// `w[n,j] = a_j + b_j / (n - j) + c[n,j]`
    BOverNMinusJ,
}

/// Recursion `x_n = Σ_{j=1}^{n-1} w[n,j] x_{n-j} + r_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteProblem<S> {
    pub a: DecaySequence<S>,
    pub b: DecaySequence<S>,
    pub c: PerturbationKernelDiscrete<S>,
    pub r: DecaySequence<S>,
    pub weight_form: WeightForm,
    /// Skip the lazy `w >= 0` check. Only meant for constructed counterexamples.
    pub allow_negative_weights: bool,
}

impl<S: Scalar> DiscreteProblem<S> {
    pub fn new(
        a: DecaySequence<S>,
        b: DecaySequence<S>,
        c: PerturbationKernelDiscrete<S>,
        r: DecaySequence<S>,
        weight_form: WeightForm,
    ) -> Result<Self> {
        if a.sign() != SignConstraint::Nonnegative {
            return Err(Error::InvalidArgument("a must be declared nonnegative".into()));
        }
        if r.sign() != SignConstraint::Nonnegative {
            return Err(Error::InvalidArgument("r must be declared nonnegative".into()));
        }
        Ok(Self {
            a,
            b,
            c,
            r,
            weight_form,
            allow_negative_weights: false,
        })
    }

    /// Pure renewal: `b = c = 0`.
    pub fn renewal(a: DecaySequence<S>, r: DecaySequence<S>) -> Result<Self> {
        Self::new(
            a,
            DecaySequence::zero(SignConstraint::Any),
            PerturbationKernelDiscrete::Zero,
            r,
            WeightForm::BOverN,
        )
    }

    /// Weight `w[n,j]` without the nonnegativity check.
    pub fn raw_weight(&self, n: usize, j: usize) -> Result<S> {
        if j == 0 || j >= n {
            return Err(Error::IndexOutOfRange { n, j });
        }
        let denom = match self.weight_form {
            WeightForm::BOverN => n,
            WeightForm::BOverNMinusJ => n - j,
        };
        let b_part = self.b.value(j).div(&S::from_index(denom));
        Ok(self.a.value(j).add(&b_part).add(&self.c.value(n, j)))
    }

    /// Weight `w[n,j]`; negative values beyond rounding are an error.
    pub fn weight(&self, n: usize, j: usize) -> Result<S> {
        let w = self.raw_weight(n, j)?;
        if !self.allow_negative_weights && weight_is_negative(&w, || self.weight_scale(n, j)) {
            return Err(Error::NegativeWeight {
                n,
                j,
                value: w.to_f64(),
            });
        }
        Ok(w)
    }

    fn weight_scale(&self, n: usize, j: usize) -> f64 {
        self.a.value(j).to_f64().abs()
            + self.b.value(j).to_f64().abs() / (n - j).max(1) as f64
            + self.c.value(n, j).to_f64().abs()
    }

    /// The tilted problem with `ã_j = q^j a_j`, `b̃_j = q^j b_j`,
    /// `c̃[n,j] = q^j c[n,j]`, `r̃_n = q^n r_n`.
    pub fn tilt(&self, q: &S) -> Result<Self> {
        if q == &S::one() {
            return Ok(self.clone());
        }
        Ok(Self {
            a: self.a.tilt(q)?,
            b: self.b.tilt(q)?,
            c: self.c.tilt(q)?,
            r: self.r.tilt(q)?,
            weight_form: self.weight_form,
            allow_negative_weights: self.allow_negative_weights,
        })
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> DiscreteProblem<T> {
        DiscreteProblem {
            a: self.a.map(&f),
            b: self.b.map(&f),
            c: self.c.map(&f),
            r: self.r.map(&f),
            weight_form: self.weight_form,
            allow_negative_weights: self.allow_negative_weights,
        }
    }
}

impl DiscreteProblem<num_rational::BigRational> {
    pub fn to_scalar<T: Scalar>(&self) -> DiscreteProblem<T> {
        self.map(T::from_rational)
    }
}

/// Negativity beyond rounding: exact arithmetic uses the sign, floats allow
/// a few ulps of the magnitudes involved.
pub(crate) fn weight_is_negative<S: Scalar>(w: &S, scale: impl FnOnce() -> f64) -> bool {
    if !w.is_negative() {
        return false;
    }
    if S::EXACT {
        return true;
    }
    let ulp = 2f64.powi(-(S::PRECISION_BITS.min(1000) as i32));
    w.to_f64() < -64.0 * ulp * scale()
}

/// `w[n,j]` as a real number; see [`DiscreteProblem::weight`].
pub fn weight_discrete<S: Scalar>(p: &DiscreteProblem<S>, n: usize, j: usize) -> Result<f64> {
    p.weight(n, j).map(|w| w.to_f64())
}
