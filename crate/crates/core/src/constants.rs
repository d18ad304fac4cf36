use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ContinuousProblem, DecayFunction, DecaySequence, DiscreteProblem};
use crate::numeric::Scalar;

/// Spectral point, exponent and mean of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpectralConstants {
    pub q: f64,
    pub gamma: f64,
    pub mu: f64,
    /// Bound on `|Σ a_n q^n - 1|` (or `|∫ a - 1|`).
    pub series_error_bound: f64,
}

const BISECTION_WIDTH: f64 = 1e-14;
const MEAN_FLOOR: f64 = 1e-12;

fn generating(a: &DecaySequence<f64>, q: f64) -> Option<f64> {
    a.series(&q, 0)
}

/// Positive root of `Σ a_n q^n = 1`: bisection to width 1e-14, then Newton.
pub fn solve_q(a: &DecaySequence<f64>, tol: f64) -> Result<f64> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    if !a.has_positive_term() {
        return Err(Error::NoSpectralPoint("a has no positive term".into()));
    }
    let mut hi = match a.tail_ratio() {
        Some(&rho) => {
            let hi = (1.0 - 1e-12) / rho;
            let f = generating(a, hi).unwrap_or(f64::INFINITY);
            if f <= 1.0 {
                return Err(Error::NoSpectralPoint(format!(
                    "Σ a_n q^n stays at or below 1 up to the convergence radius 1/rho = {}",
                    1.0 / rho
                )));
            }
            hi
        }
        None => {
            let mut hi = 1.0f64;
            while generating(a, hi).is_some_and(|f| f <= 1.0) {
                hi *= 2.0;
                if hi > 1e300 {
                    return Err(Error::NoSpectralPoint("Σ a_n q^n never reaches 1".into()));
                }
            }
            hi
        }
    };
    let mut lo = 0.0f64;
    while hi - lo > BISECTION_WIDTH * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        match generating(a, mid) {
            Some(f) if f <= 1.0 => lo = mid,
            _ => hi = mid,
        }
    }
    let mut q = 0.5 * (lo + hi);
    for _ in 0..8 {
        let f = generating(a, q).ok_or_else(|| Error::NoSpectralPoint("series diverged during polish".into()))?;
        let df = a.series(&q, 1).map(|m| m / q).unwrap_or(0.0);
        if !(df > 0.0) {
            break;
        }
        let step = (f - 1.0) / df;
        let next = q - step;
        if !(next > 0.0) || generating(a, next).is_none() {
            break;
        }
        q = next;
        if step.abs() <= f64::EPSILON * q {
            break;
        }
    }
    let residual = (generating(a, q).unwrap_or(f64::INFINITY) - 1.0).abs();
    if residual > tol {
        return Err(Error::NoSpectralPoint(format!(
            "root polish stalled at |Σ a_n q^n - 1| = {residual:e} > {tol:e}"
        )));
    }
    Ok(q)
}

/// Newton refinement of a double-precision root in the arithmetic `S`.
pub fn polish_q<S: Scalar>(a: &DecaySequence<S>, q: f64) -> S {
    let mut q_s = S::from_f64(q).unwrap_or_else(S::one);
    if S::EXACT {
        return q_s;
    }
    for _ in 0..3 {
        let (Some(f), Some(m)) = (a.series(&q_s, 0), a.series(&q_s, 1)) else {
            break;
        };
        if !m.is_positive() {
            break;
        }
        // q - (F(q) - 1) q / M(q)
        let step = f.sub(&S::one()).mul(&q_s).div(&m);
        q_s = q_s.sub(&step);
    }
    q_s
}

/// A rational spectral point, if one close to `q` satisfies the equation exactly.
pub fn exact_q(a: &DecaySequence<BigRational>, q: f64) -> Option<BigRational> {
    for cand in convergents(q, 1 << 20) {
        if !Signed::is_positive(&cand) {
            continue;
        }
        if a.series(&cand, 0).is_some_and(|f| f.is_one()) {
            return Some(cand);
        }
    }
    None
}

/// Continued-fraction convergents of `x` with denominators up to `max_den`.
fn convergents(x: f64, max_den: i64) -> Vec<BigRational> {
    let mut out = Vec::new();
    if !x.is_finite() || x <= 0.0 {
        return out;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let mut rest = x;
    for _ in 0..40 {
        let a = rest.floor();
        if a > 1e12 {
            break;
        }
        let ai = a as i64;
        let (Some(p2), Some(q2)) = (ai.checked_mul(p1).and_then(|v| v.checked_add(p0)), ai.checked_mul(q1).and_then(|v| v.checked_add(q0))) else {
            break;
        };
        if q2 > max_den {
            break;
        }
        out.push(BigRational::new(p2.into(), q2.into()));
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        let frac = rest - a;
        if frac < 1e-15 {
            break;
        }
        rest = 1.0 / frac;
    }
    out
}

/// `γ = Σ b_n q^n / Σ n a_n q^n`; returns `(γ, μ)`.
pub fn gamma_discrete(a: &DecaySequence<f64>, b: &DecaySequence<f64>, q: f64) -> Result<(f64, f64)> {
    let mu = a
        .series(&q, 1)
        .ok_or_else(|| Error::NoSpectralPoint(format!("Σ n a_n q^n diverges at q = {q}")))?;
    if !(mu > MEAN_FLOOR) {
        return Err(Error::DegenerateMean(mu));
    }
    let num = b
        .series(&q, 0)
        .ok_or_else(|| Error::InvalidArgument(format!("Σ b_n q^n diverges at q = {q}")))?;
    Ok((num / mu, mu))
}

/// `γ = ∫ b / ∫ s a(s) ds`; returns `(γ, μ)`.
pub fn gamma_continuous(a: &DecayFunction, b: &DecayFunction) -> Result<(f64, f64)> {
    let mu = a
        .first_moment()
        .ok_or_else(|| Error::InvalidArgument("a has no finite first moment".into()))?;
    if !(mu > MEAN_FLOOR) {
        return Err(Error::DegenerateMean(mu));
    }
    let num = b
        .integral()
        .ok_or_else(|| Error::InvalidArgument("b is not integrable".into()))?;
    Ok((num / mu, mu))
}

/// The tilted problem whose spectral point is 1.
pub fn normalize<S: Scalar>(p: &DiscreteProblem<S>, q: &S) -> Result<DiscreteProblem<S>> {
    p.tilt(q)
}

pub fn spectral_constants_discrete<S: Scalar>(p: &DiscreteProblem<S>, tol: f64) -> Result<SpectralConstants> {
    let a = p.a.map(S::to_f64);
    let b = p.b.map(S::to_f64);
    let q = solve_q(&a, tol)?;
    let (gamma, mu) = gamma_discrete(&a, &b, q)?;
    let f = generating(&a, q).unwrap_or(f64::INFINITY);
    let scale = a.abs_series(&q, 0).unwrap_or(f);
    let series_error_bound = (f - 1.0).abs() + 16.0 * f64::EPSILON * scale;
    Ok(SpectralConstants {
        q,
        gamma,
        mu,
        series_error_bound,
    })
}

pub fn spectral_constants_continuous(p: &ContinuousProblem) -> Result<SpectralConstants> {
    let (gamma, mu) = gamma_continuous(&p.a, &p.b)?;
    let mass = p
        .a
        .integral()
        .ok_or_else(|| Error::InvalidArgument("a is not integrable".into()))?;
    Ok(SpectralConstants {
        q: 1.0,
        gamma,
        mu,
        series_error_bound: (mass - 1.0).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SignConstraint;

    fn nonneg(prefix: &[f64]) -> DecaySequence<f64> {
        DecaySequence::finite(prefix.to_vec(), SignConstraint::Nonnegative).unwrap()
    }

    #[test]
    fn single_atom_root_is_one() {
        assert!((solve_q(&nonneg(&[1.0]), 1e-14).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn unit_mass_geometric_root_is_one() {
        let a = DecaySequence::geometric(1.0, 0.5, SignConstraint::Nonnegative).unwrap();
        assert!((solve_q(&a, 1e-14).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_atom_root_matches_quadratic() {
        let q = solve_q(&nonneg(&[0.25, 0.25]), 1e-14).unwrap();
        let expected = (-1.0 + 17f64.sqrt()) / 2.0;
        assert!((q - expected).abs() < 1e-13);
    }

    #[test]
    fn missing_root_is_reported() {
        // declared radius 2 but Σ a_n z^n <= 0.2 there
        let a = DecaySequence::new(vec![0.1], crate::model::Tail::Geometric { coeff: 0.0, ratio: 0.5, start: 2 }, SignConstraint::Nonnegative).unwrap();
        assert!(matches!(solve_q(&a, 1e-12), Err(Error::NoSpectralPoint(_))));
    }

    #[test]
    fn gamma_of_tilted_family() {
        let a = DecaySequence::geometric(0.5, 2.0 / 3.0, SignConstraint::Nonnegative).unwrap();
        let b = DecaySequence::geometric(-0.6, 0.5, SignConstraint::Any).unwrap();
        let q = solve_q(&a, 1e-14).unwrap();
        let (g, mu) = gamma_discrete(&a, &b, q).unwrap();
        assert!((q - 1.0).abs() < 1e-13);
        assert!((mu - 3.0).abs() < 1e-12);
        assert!((g + 0.2).abs() < 1e-12);
    }

    #[test]
    fn gamma_single_terms() {
        let a = nonneg(&[1.0]);
        let b = DecaySequence::finite(vec![-0.7], SignConstraint::Any).unwrap();
        assert_eq!(gamma_discrete(&a, &b, 1.0).unwrap().0, -0.7);
        let zero = DecaySequence::zero(SignConstraint::Any);
        assert_eq!(gamma_discrete(&a, &zero, 1.0).unwrap().0, 0.0);
    }

    #[test]
    fn continuous_gamma_closed_forms() {
        let e = |a, l| DecayFunction::exponential(a, l).unwrap();
        assert!((gamma_continuous(&e(1.0, 1.0), &e(-0.5, 1.0)).unwrap().0 + 0.5).abs() < 1e-15);
        assert!((gamma_continuous(&e(2.0, 2.0), &e(1.0, 1.0)).unwrap().0 - 2.0).abs() < 1e-15);
        assert_eq!(gamma_continuous(&e(1.0, 1.0), &DecayFunction::zero()).unwrap().0, 0.0);
    }

    #[test]
    fn exact_root_found_by_convergents() {
        let half = BigRational::new(1.into(), 2.into());
        let a = DecaySequence::geometric(<BigRational as One>::one(), half, SignConstraint::Nonnegative).unwrap();
        assert_eq!(exact_q(&a, 1.0 - 1e-15), Some(<BigRational as One>::one()));
        // a = {1/4, 1/4}: the root is irrational
        let a = DecaySequence::finite(vec![BigRational::new(1.into(), 4.into()); 2], SignConstraint::Nonnegative).unwrap();
        assert_eq!(exact_q(&a, (-1.0 + 17f64.sqrt()) / 2.0), None);
        let a = DecaySequence::finite(vec![BigRational::new(1.into(), 3.into()), BigRational::new(2.into(), 9.into())], SignConstraint::Nonnegative).unwrap();
        // q/3 + 2q²/9 = 1 → q = 3/2
        assert_eq!(exact_q(&a, 1.5), Some(BigRational::new(3.into(), 2.into())));
    }

    #[test]
    fn normalization_of_two_atoms() {
        let p = DiscreteProblem::renewal(nonneg(&[0.25, 0.25]), DecaySequence::delta(1)).unwrap();
        let q = solve_q(&p.a, 1e-14).unwrap();
        let t = normalize(&p, &q).unwrap();
        assert!((t.a.value(1) + t.a.value(2) - 1.0).abs() < 1e-14);
        assert!((solve_q(&t.a, 1e-14).unwrap() - 1.0).abs() < 2e-14);
        let r = DecaySequence::<f64>::delta(1).tilt(&2.0).unwrap();
        assert_eq!(r.values(3), vec![0.0, 2.0, 0.0, 0.0]);
    }
}
