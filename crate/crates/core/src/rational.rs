//! Helpers for exact rational scalars.

use num_bigint::BigInt;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::Rational;

/// Rational from machine integers.
pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Rational zero.
pub fn zero() -> Rational {
    Rational::zero()
}

/// Nearest `f64`; `NaN` when the components overflow the double range.
pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `sqrt` of a nonnegative rational, through `f64`.
pub fn sqrt_f64(r: &Rational) -> f64 {
    to_f64(r).sqrt()
}

/// Exact rational equal to the given double. Errors on NaN/infinity.
pub fn from_f64_exact(x: f64) -> Result<Rational> {
    Rational::from_f64(x).ok_or_else(|| Error::Parse(format!("{x} is not finite")))
}

/// Exact `|z|^2 = re^2 + im^2` of a complex double, as a rational.
pub fn abs_sq_exact(z: &crate::C64) -> Result<Rational> {
    let re = from_f64_exact(z.re)?;
    let im = from_f64_exact(z.im)?;
    Ok(&re * &re + &im * &im)
}

/// Exact `conj(a) b` of complex doubles, as a rational (re, im) pair.
pub fn conj_mul_exact(a: &crate::C64, b: &crate::C64) -> Result<(Rational, Rational)> {
    let ar = from_f64_exact(a.re)?;
    let ai = from_f64_exact(a.im)?;
    let br = from_f64_exact(b.re)?;
    let bi = from_f64_exact(b.im)?;
    Ok((&ar * &br + &ai * &bi, ar * bi - ai * br))
}

/// Parses `"3"`, `"-3"`, `"3/4"`, with an arbitrary-precision result.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let bad = || Error::Parse(format!("expected a rational like 2 or -1/3, got {s:?}"));
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| bad())?;
    let den: BigInt = den.parse().map_err(|_| bad())?;
    if den.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(num, den))
}

/// Renders in the same `num/den` form `parse_rational` accepts.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Checks a weight vector: strictly positive entries summing to 1.
pub fn check_weights(weights: &[Rational]) -> Result<()> {
    if weights.iter().any(|w| !w.is_positive()) {
        return Err(Error::InvalidWeights(
            "weights must be positive and sum to 1".into(),
        ));
    }
    let total: Rational = weights.iter().sum();
    if total != Rational::from_integer(1.into()) {
        return Err(Error::InvalidWeights(
            "weights must be positive and sum to 1".into(),
        ));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_integers_and_fractions() {
        assert_eq!(parse_rational("3").unwrap(), rat(3, 1));
        assert_eq!(parse_rational("-1/3").unwrap(), rat(-1, 3));
        assert_eq!(parse_rational(" 2 / 6 ").unwrap(), rat(1, 3));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn float_roundtrip_is_exact() {
        let r = from_f64_exact(0.1).unwrap();
        assert_eq!(to_f64(&r), 0.1);
        let half = from_f64_exact(0.5).unwrap();
        assert_eq!(half, rat(1, 2));
    }

    #[test]
    fn exact_complex_products() {
        let a = crate::C64::new(1.5, -2.0);
        let b = crate::C64::new(0.25, 3.0);
        assert_eq!(abs_sq_exact(&a).unwrap(), rat(25, 4));
        // conj(a) b = (1.5 + 2i)(0.25 + 3i) = (0.375 - 6) + (4.5 + 0.5)i.
        let (re, im) = conj_mul_exact(&a, &b).unwrap();
        assert_eq!(re, rat(3, 8) - rat(6, 1));
        assert_eq!(im, rat(5, 1));
    }

    #[test]
    fn weight_check_rejects_bad_vectors() {
        assert!(check_weights(&[rat(1, 2), rat(1, 2)]).is_ok());
        assert!(check_weights(&[rat(2, 1), rat(-1, 1)]).is_err());
        assert!(check_weights(&[rat(1, 2), rat(1, 3)]).is_err());
    }
}
