use num_integer::Integer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{Accumulator, Scalar};

/// Tail of a coefficient sequence beyond its explicit prefix.
#[derive(Debug, Clone, PartialEq)]
pub enum Tail<S> {
    Zero,
    /// `value(n) = coeff * ratio^n` for `n >= start`.
    Geometric { coeff: S, ratio: S, start: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SignConstraint {
    Nonnegative,
    Any,
}

/// Coefficient sequence indexed from 1: explicit prefix followed by a zero
/// or geometric tail.
#[derive(Debug, Clone, PartialEq)]
pub struct DecaySequence<S> {
    prefix: Vec<S>,
    tail: Tail<S>,
    sign: SignConstraint,
}

impl<S: Scalar> DecaySequence<S> {
    pub fn new(prefix: Vec<S>, tail: Tail<S>, sign: SignConstraint) -> Result<Self> {
        if let Tail::Geometric { coeff, ratio, start } = &tail {
            if !ratio.is_positive() || *ratio >= S::one() {
                return Err(Error::MalformedEnvelope(format!(
                    "geometric tail ratio {} must lie in (0, 1)",
                    ratio.to_f64()
                )));
            }
            if !coeff.is_finite() || !ratio.is_finite() {
                return Err(Error::MalformedEnvelope("non-finite tail parameter".into()));
            }
            if *start == 0 || *start <= prefix.len() {
                return Err(Error::MalformedEnvelope(format!(
                    "tail start {start} must exceed the prefix length {}",
                    prefix.len()
                )));
            }
        }
        if prefix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite prefix value".into()));
        }
        let seq = Self { prefix, tail, sign };
        if sign == SignConstraint::Nonnegative && seq.has_negative_term() {
            return Err(Error::InvalidArgument(
                "sequence is declared nonnegative but has a negative term".into(),
            ));
        }
        Ok(seq)
    }

    pub fn zero(sign: SignConstraint) -> Self {
        Self {
            prefix: Vec::new(),
            tail: Tail::Zero,
            sign,
        }
    }

    pub fn finite(prefix: Vec<S>, sign: SignConstraint) -> Result<Self> {
        Self::new(prefix, Tail::Zero, sign)
    }

    /// `coeff * ratio^n` for every `n >= 1`.
    pub fn geometric(coeff: S, ratio: S, sign: SignConstraint) -> Result<Self> {
        Self::new(
            Vec::new(),
            Tail::Geometric {
                coeff,
                ratio,
                start: 1,
            },
            sign,
        )
    }

    /// Unit mass at index `n`.
    pub fn delta(n: usize) -> Self {
        assert!(n >= 1);
        let mut prefix = vec![S::zero(); n];
        prefix[n - 1] = S::one();
        Self {
            prefix,
            tail: Tail::Zero,
            sign: SignConstraint::Nonnegative,
        }
    }

    pub fn prefix(&self) -> &[S] {
        &self.prefix
    }

    pub fn tail(&self) -> &Tail<S> {
        &self.tail
    }

    pub fn sign(&self) -> SignConstraint {
        self.sign
    }

    fn has_negative_term(&self) -> bool {
        self.prefix.iter().any(Scalar::is_negative)
            || matches!(&self.tail, Tail::Geometric { coeff, .. } if coeff.is_negative())
    }

    pub fn is_zero(&self) -> bool {
        let zero = S::zero();
        self.prefix.iter().all(|v| *v == zero)
            && match &self.tail {
                Tail::Zero => true,
                Tail::Geometric { coeff, .. } => *coeff == zero,
            }
    }

    pub fn has_positive_term(&self) -> bool {
        self.prefix.iter().any(Scalar::is_positive)
            || matches!(&self.tail, Tail::Geometric { coeff, .. } if coeff.is_positive())
    }

    pub fn value(&self, n: usize) -> S {
        if n == 0 {
            return S::zero();
        }
        if n <= self.prefix.len() {
            return self.prefix[n - 1].clone();
        }
        match &self.tail {
            Tail::Geometric {
                coeff,
                ratio,
                start,
            } if n >= *start => coeff.mul(&pow_index(ratio, n)),
            _ => S::zero(),
        }
    }

    /// Values at indices `0..=n_max` (index 0 is always zero).
    pub fn values(&self, n_max: usize) -> Vec<S> {
        let mut out = Vec::with_capacity(n_max + 1);
        out.push(S::zero());
        let listed = self.prefix.len().min(n_max);
        out.extend(self.prefix[..listed].iter().cloned());
        match &self.tail {
            Tail::Geometric {
                coeff,
                ratio,
                start,
            } if *start <= n_max => {
                out.resize(*start, S::zero());
                if S::EXACT {
                    let mut term = coeff.mul(&pow_index(ratio, *start));
                    for _ in *start..=n_max {
                        out.push(term.clone());
                        term = term.mul(ratio);
                    }
                } else {
                    for n in *start..=n_max {
                        out.push(coeff.mul(&pow_index(ratio, n)));
                    }
                }
            }
            _ => out.resize(n_max + 1, S::zero()),
        }
        out
    }

    /// Indices `n` with `value(n) > 0` reduced to their gcd. A positive
    /// geometric tail contributes two consecutive indices, forcing gcd 1.
    pub fn positive_support_gcd(&self) -> Option<usize> {
        let mut g: Option<usize> = None;
        let mut push = |n: usize| {
            g = Some(match g {
                Some(v) => v.gcd(&n),
                None => n,
            })
        };
        for (i, v) in self.prefix.iter().enumerate() {
            if v.is_positive() {
                push(i + 1);
            }
        }
        if let Tail::Geometric { coeff, start, .. } = &self.tail {
            if coeff.is_positive() {
                push(*start);
                push(*start + 1);
            }
        }
        g
    }

    /// `Σ_n value(n) n^moment z^n` with the geometric tail in closed form;
    /// `None` when the series diverges. `moment` ≤ 2.
    pub fn series(&self, z: &S, moment: u32) -> Option<S> {
        self.series_impl(z, moment, false)
    }

    /// `Σ_n |value(n)| n^moment z^n`.
    pub fn abs_series(&self, z: &S, moment: u32) -> Option<S> {
        self.series_impl(z, moment, true)
    }

    fn series_impl(&self, z: &S, moment: u32, absolute: bool) -> Option<S> {
        assert!(moment <= 2, "closed-form tails exist for moments 0..=2");
        let mut acc = S::Acc::default();
        let mut zn = S::one();
        for (i, v) in self.prefix.iter().enumerate() {
            zn = zn.mul(z);
            let n = S::from_index(i + 1);
            let v = if absolute { v.abs() } else { v.clone() };
            acc.push(v.mul(&n.powi(moment)).mul(&zn));
        }
        if let Tail::Geometric {
            coeff,
            ratio,
            start,
        } = &self.tail
        {
            let coeff = if absolute { coeff.abs() } else { coeff.clone() };
            if coeff != S::zero() {
                acc.push(coeff.mul(&geometric_moment_tail(&ratio.mul(z), *start, moment)?));
            }
        }
        let total = acc.total();
        total.is_finite().then_some(total)
    }

    /// `Σ_{n >= from} value(n)`.
    pub fn tail_sum(&self, from: usize) -> Option<S> {
        let from = from.max(1);
        let mut acc = S::Acc::default();
        for v in self.prefix.iter().skip(from - 1) {
            acc.push(v.clone());
        }
        if let Tail::Geometric {
            coeff,
            ratio,
            start,
        } = &self.tail
        {
            acc.push(coeff.mul(&geometric_moment_tail(ratio, (*start).max(from), 0)?));
        }
        Some(acc.total())
    }

    /// Term-wise tilt `value(n) * q^n`; the geometric ratio becomes `q * ratio`.
    pub fn tilt(&self, q: &S) -> Result<Self> {
        let prefix = self
            .prefix
            .iter()
            .enumerate()
            .map(|(i, v)| v.mul(&pow_index(q, i + 1)))
            .collect();
        let tail = match &self.tail {
            Tail::Zero => Tail::Zero,
            Tail::Geometric {
                coeff,
                ratio,
                start,
            } => {
                let tilted = ratio.mul(q);
                if tilted >= S::one() {
                    return Err(Error::MalformedEnvelope(format!(
                        "tilted tail ratio q*rho = {} is not below 1",
                        tilted.to_f64()
                    )));
                }
                Tail::Geometric {
                    coeff: coeff.clone(),
                    ratio: tilted,
                    start: *start,
                }
            }
        };
        Self::new(prefix, tail, self.sign)
    }

    pub fn map<T: Scalar>(&self, f: impl Fn(&S) -> T) -> DecaySequence<T> {
        DecaySequence {
            prefix: self.prefix.iter().map(&f).collect(),
            tail: match &self.tail {
                Tail::Zero => Tail::Zero,
                Tail::Geometric {
                    coeff,
                    ratio,
                    start,
                } => Tail::Geometric {
                    coeff: f(coeff),
                    ratio: f(ratio),
                    start: *start,
                },
            },
            sign: self.sign,
        }
    }

    /// Largest index at which the prefix is defined, or the tail start.
    pub fn explicit_len(&self) -> usize {
        match &self.tail {
            Tail::Zero => self.prefix.len(),
            Tail::Geometric { start, .. } => *start,
        }
    }

    /// Geometric ratio of the tail, if any.
    pub fn tail_ratio(&self) -> Option<&S> {
        match &self.tail {
            Tail::Geometric { ratio, .. } => Some(ratio),
            Tail::Zero => None,
        }
    }
}

impl DecaySequence<f64> {
    /// Bracket `[partial, partial + tail]` for `Σ |value(n)| z^n`, truncating
    /// the explicit sum before index `truncate_at`. `None` if the tail bound
    /// is infinite.
    pub fn abs_bracket(&self, z: f64, truncate_at: usize) -> Option<(f64, f64)> {
        let mut partial = crate::numeric::NeumaierSum::new();
        let mut rest = crate::numeric::NeumaierSum::new();
        let limit = truncate_at.max(1);
        for (i, v) in self.prefix.iter().enumerate() {
            let term = v.abs() * z.powi(i as i32 + 1);
            if i + 1 < limit {
                partial.add(term);
            } else {
                rest.add(term);
            }
        }
        if let Tail::Geometric {
            coeff,
            ratio,
            start,
        } = &self.tail
        {
            let x = ratio * z;
            let split = limit.max(*start);
            for n in *start..split {
                partial.add(coeff.abs() * x.powi(n as i32));
            }
            if *coeff != 0.0 {
                rest.add(coeff.abs() * geometric_moment_tail(&x, split, 0)?);
            }
        }
        let lo = partial.value();
        Some((lo, lo + rest.value()))
    }
}

pub(crate) fn pow_index<S: Scalar>(base: &S, n: usize) -> S {
    match u32::try_from(n) {
        Ok(e) => base.powi(e),
        Err(_) => {
            if S::EXACT {
                panic!("exponent {n} too large for exact arithmetic")
            } else {
                S::from_f64(base.to_f64().powf(n as f64)).unwrap_or_else(S::zero)
            }
        }
    }
}

/// `Σ_{n >= m} n^k x^n` for `|x| < 1`, `k <= 2`.
pub(crate) fn geometric_moment_tail<S: Scalar>(x: &S, m: usize, k: u32) -> Option<S> {
    let one = S::one();
    if x.abs() >= one {
        return None;
    }
    let xm = pow_index(x, m);
    let om = one.sub(x);
    let mm = S::from_index(m);
    let value = match k {
        0 => xm.div(&om),
        1 => {
            // x^m (m - (m-1) x) / (1-x)^2
            let m1 = S::from_index(m.saturating_sub(1));
            xm.mul(&mm.sub(&m1.mul(x))).div(&om.mul(&om))
        }
        2 => {
            // x^m (m^2 - (2m^2 - 2m - 1) x + (m-1)^2 x^2) / (1-x)^3
            let m1 = S::from_index(m.saturating_sub(1));
            let two = S::from_index(2);
            let c1 = two.mul(&mm).mul(&mm).sub(&two.mul(&mm)).sub(&one);
            let poly = mm.mul(&mm).sub(&c1.mul(x)).add(&m1.mul(&m1).mul(&x.mul(x)));
            xm.mul(&poly).div(&om.mul(&om).mul(&om))
        }
        _ => return None,
    };
    Some(value)
}
