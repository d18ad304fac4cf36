//! Arithmetic backends and small numerical kernels shared by the engines.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use twofloat::TwoFloat;

/// Neumaier's variant of Kahan summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn sum_iter<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
        let mut acc = Self::new();
        for v in iter {
            acc.add(v);
        }
        acc.value()
    }
}

/// Running sum in the arithmetic of a [`Scalar`].
pub trait Accumulator<S>: Default {
    fn push(&mut self, value: S);
    fn total(&self) -> S;

    fn push_product(&mut self, a: &S, b: &S)
    where
        S: Scalar,
    {
        self.push(a.mul(b));
    }
}

impl Accumulator<f64> for NeumaierSum {
    #[inline]
    fn push(&mut self, value: f64) {
        self.add(value);
    }
    #[inline]
    fn total(&self) -> f64 {
        self.value()
    }
}

#[derive(Debug, Clone)]
pub struct PlainSum<S>(Option<S>);

impl<S> Default for PlainSum<S> {
    fn default() -> Self {
        Self(None)
    }
}

impl<S: Scalar> Accumulator<S> for PlainSum<S> {
    #[inline]
    fn push(&mut self, value: S) {
        self.0 = Some(match self.0.take() {
            Some(acc) => acc.add(&value),
            None => value,
        });
    }
    fn total(&self) -> S {
        self.0.clone().unwrap_or_else(S::zero)
    }
}

/// Exact sum over a running common denominator. Products are added without
/// reducing them, so a long dot product costs one gcd instead of one per term.
#[derive(Debug, Clone)]
pub struct LcmSum {
    num: BigInt,
    den: BigInt,
}

impl Default for LcmSum {
    fn default() -> Self {
        Self {
            num: BigInt::zero(),
            den: BigInt::one(),
        }
    }
}

impl LcmSum {
    fn add_fraction(&mut self, num: BigInt, den: BigInt) {
        if num.is_zero() {
            return;
        }
        if den == self.den {
            self.num += num;
        } else if den.bits() <= self.den.bits() && (&self.den % &den).is_zero() {
            self.num += num * (&self.den / &den);
        } else if (&den % &self.den).is_zero() {
            self.num = &self.num * (&den / &self.den) + num;
            self.den = den;
        } else {
            let g = num_integer::Integer::gcd(&self.den, &den);
            let l = &self.den / &g * &den;
            self.num = &self.num * (&l / &self.den) + num * (&l / &den);
            self.den = l;
        }
    }
}

impl Accumulator<BigRational> for LcmSum {
    fn push(&mut self, value: BigRational) {
        let (n, d) = value.into();
        self.add_fraction(n, d);
    }

    fn total(&self) -> BigRational {
        BigRational::new(self.num.clone(), self.den.clone())
    }

    fn push_product(&mut self, a: &BigRational, b: &BigRational) {
        if Zero::is_zero(a) || Zero::is_zero(b) {
            return;
        }
        self.add_fraction(a.numer() * b.numer(), a.denom() * b.denom());
    }
}

/// Number system the recursions are evaluated in.
///
/// Implemented for `f64`, double-double (`TwoFloat`, ~106 bits) and exact
/// `BigRational`. Everything generic in the discrete engine goes through
/// this trait so the exact solve is the same algorithm as the float one.
pub trait Scalar: Clone + fmt::Debug + PartialOrd + Send + Sync + 'static {
    type Acc: Accumulator<Self>;
    /// True for exact arithmetic.
    const EXACT: bool;
    /// Significand bits, `u32::MAX` for exact.
    const PRECISION_BITS: u32;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(r: &BigRational) -> Self;
    /// Exact conversion for rationals, rounding for floats. `None` if not finite.
    fn from_f64(x: f64) -> Option<Self>;
    fn from_index(n: usize) -> Self;
    fn to_f64(&self) -> f64;

    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Self;
    fn abs(&self) -> Self;

    fn is_finite(&self) -> bool {
        true
    }

    fn is_negative(&self) -> bool {
        *self < Self::zero()
    }

    fn is_positive(&self) -> bool {
        *self > Self::zero()
    }

    fn powi(&self, mut exp: u32) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc.mul(&base);
            }
            exp >>= 1;
            if exp > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }
}

impl Scalar for f64 {
    type Acc = NeumaierSum;
    const EXACT: bool = false;
    const PRECISION_BITS: u32 = 53;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn from_rational(r: &BigRational) -> Self {
        rational_to_f64(r)
    }
    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }
    fn from_index(n: usize) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    #[inline]
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    #[inline]
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    #[inline]
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    #[inline]
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
    fn powi(&self, exp: u32) -> Self {
        match i32::try_from(exp) {
            Ok(e) => f64::powi(*self, e),
            Err(_) => f64::powf(*self, exp as f64),
        }
    }
}

impl Scalar for TwoFloat {
    type Acc = PlainSum<TwoFloat>;
    const EXACT: bool = false;
    const PRECISION_BITS: u32 = 106;

    fn zero() -> Self {
        TwoFloat::from(0.0)
    }
    fn one() -> Self {
        TwoFloat::from(1.0)
    }
    fn from_rational(r: &BigRational) -> Self {
        let hi = rational_to_f64(r);
        if !hi.is_finite() {
            return TwoFloat::from(hi);
        }
        let rest = r - BigRational::from_float(hi).unwrap_or_else(Zero::zero);
        TwoFloat::new_add(hi, rational_to_f64(&rest))
    }
    fn from_f64(x: f64) -> Option<Self> {
        x.is_finite().then(|| TwoFloat::from(x))
    }
    fn from_index(n: usize) -> Self {
        TwoFloat::from(n as f64)
    }
    fn to_f64(&self) -> f64 {
        self.hi() + self.lo()
    }
    #[inline]
    fn add(&self, other: &Self) -> Self {
        *self + *other
    }
    #[inline]
    fn sub(&self, other: &Self) -> Self {
        *self - *other
    }
    #[inline]
    fn mul(&self, other: &Self) -> Self {
        *self * *other
    }
    /// Long division on top of the exact products; the crate's own quotient
    /// is only good to about one double.
    fn div(&self, other: &Self) -> Self {
        let d = other.hi();
        let q1 = self.hi() / d;
        if !q1.is_finite() || q1 == 0.0 {
            return TwoFloat::from(q1);
        }
        let r = *self - *other * q1;
        let q2 = r.hi() / d;
        let r = r - *other * q2;
        let q3 = r.hi() / d;
        TwoFloat::new_add(q1, q2) + q3
    }
    fn abs(&self) -> Self {
        TwoFloat::abs(self)
    }
    fn is_finite(&self) -> bool {
        self.hi().is_finite() && self.lo().is_finite()
    }
}

impl Scalar for BigRational {
    type Acc = LcmSum;
    const EXACT: bool = true;
    const PRECISION_BITS: u32 = u32::MAX;

    fn zero() -> Self {
        Zero::zero()
    }
    fn one() -> Self {
        One::one()
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_f64(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }
    fn from_index(n: usize) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
    fn to_f64(&self) -> f64 {
        rational_to_f64(self)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn div(&self, other: &Self) -> Self {
        self / other
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn is_positive(&self) -> bool {
        Signed::is_positive(self)
    }
}

/// Correctly scaled conversion (numerator and denominator may individually overflow f64).
pub fn rational_to_f64(r: &BigRational) -> f64 {
    if let Some(v) = ToPrimitive::to_f64(r) {
        if v.is_finite() && (v != 0.0 || Zero::is_zero(r)) {
            return v;
        }
    }
    // Fall back to shifting both sides into range.
    let num_bits = r.numer().bits() as i64;
    let den_bits = r.denom().bits() as i64;
    let shift = num_bits - den_bits;
    let scaled = if shift > 0 {
        BigRational::new(r.numer().clone(), r.denom() << (shift as usize))
    } else {
        BigRational::new(r.numer() << ((-shift) as usize), r.denom().clone())
    };
    let mantissa = ToPrimitive::to_f64(&scaled).unwrap_or(0.0);
    mantissa * 2f64.powi(shift.clamp(i32::MIN as i64, i32::MAX as i64) as i32)
}

/// Parses `"p/q"`, `"p"` or a plain decimal such as `"-0.6"` into an exact rational.
pub fn parse_rational(text: &str) -> crate::Result<BigRational> {
    let err = || crate::Error::ParseRational(text.to_string());
    let s = text.trim();
    if s.is_empty() || s.len() > 4096 {
        return Err(err());
    }
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| err())?;
        let q: BigInt = q.trim().parse().map_err(|_| err())?;
        if q.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Ok(p) = s.parse::<BigInt>() {
        return Ok(BigRational::from_integer(p));
    }
    // decimal with optional exponent
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => {
            let e: i32 = s[pos + 1..].parse().map_err(|_| err())?;
            (&s[..pos], e)
        }
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.bytes().chain(frac_part.bytes()).all(|b| b.is_ascii_digit()) {
        return Err(err());
    }
    let scale = exponent as i64 - frac_part.len() as i64;
    if scale.abs() > 4096 {
        return Err(err());
    }
    let all: BigInt = format!("{int_part}{frac_part}")
        .trim_start_matches('0')
        .parse()
        .unwrap_or_else(|_| BigInt::zero());
    let ten = BigInt::from(10u8);
    let value = if scale >= 0 {
        BigRational::from_integer(all * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(all, num_traits::pow(ten, (-scale) as usize))
    };
    Ok(if negative { -value } else { value })
}

/// Fixed-order Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes by Newton iteration on P_n from the Chebyshev-like initial guess.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let n = order;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = NeumaierSum::new();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc.add(w * f(mid + half * x));
        }
        half * acc.value()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { 1.0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Ordinary least squares line `y ≈ intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let mean_x = NeumaierSum::sum_iter(xs.iter().copied()) / n as f64;
    let mean_y = NeumaierSum::sum_iter(ys.iter().copied()) / n as f64;
    let mut sxx = NeumaierSum::new();
    let mut sxy = NeumaierSum::new();
    let mut syy = NeumaierSum::new();
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mean_x;
        let dy = y - mean_y;
        sxx.add(dx * dx);
        sxy.add(dx * dy);
        syy.add(dy * dy);
    }
    let (sxx, sxy, syy) = (sxx.value(), sxy.value(), syy.value());
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let r_squared = if syy <= f64::EPSILON * f64::EPSILON * n as f64 {
        1.0
    } else {
        (sxy * sxy / (sxx * syy)).clamp(0.0, 1.0)
    };
    Some(LineFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Aitken's Δ² extrapolation of three consecutive terms; `None` when the
/// second difference vanishes.
pub fn aitken(x0: f64, x1: f64, x2: f64) -> Option<f64> {
    let d1 = x1 - x0;
    let d2 = x2 - x1;
    let denom = d2 - d1;
    let scale = x0.abs().max(x1.abs()).max(x2.abs()).max(f64::MIN_POSITIVE);
    if denom.abs() <= 1e-14 * scale {
        return None;
    }
    Some(x2 - d2 * d2 / denom)
}

/// `∫_a^∞ x^k e^{-c x} dx` for `c > 0`, `a >= 0`.
pub fn upper_gamma_tail(k: u32, c: f64, a: f64) -> f64 {
    // e^{-ca} Σ_{i=0}^k k!/i! a^i / c^{k-i+1}
    let mut term = 1.0 / c.powi(k as i32 + 1);
    let mut factorial_ratio = (1..=k).map(|v| v as f64).product::<f64>();
    let mut total = factorial_ratio * term;
    for i in 1..=k {
        factorial_ratio /= i as f64;
        term *= a * c;
        total += factorial_ratio * term;
    }
    (-c * a).exp() * total
}
