//! Scalar abstraction shared by every algebraic type in the crate.
//!
//! All rings are built over complex numbers `Complex<R>` where `R` is one of
//! `f32`, `f64` (floating mode) or [`BigRational`] (exact Gaussian-rational
//! mode). Exact mode compares with `==`; floating modes compare against an
//! explicit tolerance.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

/// Complex scalar over a real field `R`.
pub type C<R> = Complex<R>;

/// Real field used for coefficients, exponents and angles.
pub trait Real:
    Clone
    + Debug
    + Display
    + PartialEq
    + PartialOrd
    + Num
    + Signed
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// `true` when arithmetic is exact and equality is structural.
    const EXACT: bool;
    /// Name used in serialized records.
    const MODE: &'static str;

    /// Converts a double. Exact for rationals (every finite double is a rational).
    fn from_f64_lossy(v: f64) -> Self;

    fn to_f64_lossy(&self) -> f64;

    /// Equality to within `tol`; ignores `tol` in exact mode.
    fn near(&self, other: &Self, tol: f64) -> bool {
        if Self::EXACT {
            self == other
        } else {
            (self.clone() - other.clone()).abs().to_f64_lossy() <= tol
        }
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from_i64(num).expect("integer conversion") / Self::from_i64(den).expect("integer conversion")
    }

    fn min_of(a: Self, b: Self) -> Self {
        if b < a {
            b
        } else {
            a
        }
    }

    fn max_of(a: Self, b: Self) -> Self {
        if b > a {
            b
        } else {
            a
        }
    }
}

impl Real for f64 {
    const EXACT: bool = false;
    const MODE: &'static str = "f64";

    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Real for f32 {
    const EXACT: bool = false;
    const MODE: &'static str = "f32";

    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
}

impl Real for BigRational {
    const EXACT: bool = true;
    const MODE: &'static str = "exact";

    fn from_f64_lossy(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(BigRational::zero)
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or_else(|| {
            // Ratio::to_f64 can fail on huge operands; fall back to a scaled division.
            let n = self.numer().to_f64().unwrap_or(f64::NAN);
            let d = self.denom().to_f64().unwrap_or(f64::NAN);
            n / d
        })
    }
}

/// Exact rational from a decimal literal such as `"-1.25"` or `"3/8"`.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((n, d)) = s.split_once('/') {
        let n = parse_rational(n)?;
        let d = parse_rational(d)?;
        if d.is_zero() {
            return None;
        }
        return Some(n / d);
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], body[pos + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit()) || !frac_part.chars().all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
    let scale = exp - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut r = BigRational::from_integer(numer);
    if scale >= 0 {
        r *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        r /= BigRational::from_integer(num_traits::pow(ten, (-scale) as usize));
    }
    Some(if neg { -r } else { r })
}

/// Real scalar from a decimal literal, exact in rational mode.
pub fn parse_real<R: Real>(s: &str) -> Option<R> {
    if R::EXACT {
        Some(rational_to_real::<R>(&parse_rational(s)?))
    } else {
        let v = parse_rational(s)?.to_f64_lossy();
        Some(R::from_f64_lossy(v))
    }
}

/// Converts an exact rational into `R` (exact when `R` is rational).
pub fn rational_to_real<R: Real>(q: &BigRational) -> R {
    if R::EXACT {
        // Build numerator and denominator through repeated i64 limbs.
        let n = bigint_to_real::<R>(q.numer());
        let d = bigint_to_real::<R>(q.denom());
        n / d
    } else {
        R::from_f64_lossy(q.to_f64_lossy())
    }
}

fn bigint_to_real<R: Real>(b: &BigInt) -> R {
    if let Some(v) = b.to_i64() {
        return R::from_i64(v).expect("i64 conversion");
    }
    let base_r = R::from_u64(1u64 << 32).expect("u64 conversion");
    let (sign, digits) = b.to_u32_digits();
    let mut acc = R::zero();
    for d in digits.iter().rev() {
        acc = acc * base_r.clone() + R::from_u32(*d).expect("u32 conversion");
    }
    if sign == num_bigint::Sign::Minus {
        -acc
    } else {
        acc
    }
}

/// Complex helpers that need only field operations.
pub fn cplx<R: Real>(re: R, im: R) -> C<R> {
    Complex::new(re, im)
}

pub fn c_from_f64<R: Real>(z: Complex<f64>) -> C<R> {
    Complex::new(R::from_f64_lossy(z.re), R::from_f64_lossy(z.im))
}

pub fn c_to_f64<R: Real>(z: &C<R>) -> Complex<f64> {
    Complex::new(z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

pub fn c_real<R: Real>(v: R) -> C<R> {
    Complex::new(v, R::zero())
}

pub fn c_int<R: Real>(v: i64) -> C<R> {
    Complex::new(R::from_i64(v).expect("integer conversion"), R::zero())
}

pub fn c_is_zero<R: Real>(z: &C<R>) -> bool {
    z.re.is_zero() && z.im.is_zero()
}

/// Near-equality of complex scalars (exact in rational mode).
pub fn c_near<R: Real>(a: &C<R>, b: &C<R>, tol: f64) -> bool {
    a.re.near(&b.re, tol) && a.im.near(&b.im, tol)
}

/// `|z|²` in `R`.
pub fn c_norm_sqr<R: Real>(z: &C<R>) -> R {
    z.re.clone() * z.re.clone() + z.im.clone() * z.im.clone()
}

/// Multiplicative inverse; `None` for zero.
pub fn c_inv<R: Real>(z: &C<R>) -> Option<C<R>> {
    let n = c_norm_sqr(z);
    if n.is_zero() {
        None
    } else {
        Some(Complex::new(z.re.clone() / n.clone(), -z.im.clone() / n))
    }
}

pub fn c_one<R: Real>() -> C<R> {
    Complex::new(R::one(), R::zero())
}

pub fn c_zero<R: Real>() -> C<R> {
    Complex::new(R::zero(), R::zero())
}

/// Real part of `a * conj(b)`.
pub fn re_mul_conj<R: Real>(a: &C<R>, b: &C<R>) -> R {
    a.re.clone() * b.re.clone() + a.im.clone() * b.im.clone()
}

/// Imaginary part of `a * conj(b)`.
pub fn im_mul_conj<R: Real>(a: &C<R>, b: &C<R>) -> R {
    a.im.clone() * b.re.clone() - a.re.clone() * b.im.clone()
}

/// `1/n!` as a complex scalar.
pub fn inv_factorial<R: Real>(n: usize) -> C<R> {
    let mut f = R::one();
    for k in 2..=n {
        f = f * R::from_usize(k).expect("usize conversion");
    }
    c_real(R::one() / f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse_rational("0.5").unwrap(), BigRational::new(1.into(), 2.into()));
        assert_eq!(parse_rational("-1.25e1").unwrap(), BigRational::new((-25).into(), 2.into()));
        assert_eq!(parse_rational("3/8").unwrap(), BigRational::new(3.into(), 8.into()));
        assert!(parse_rational("1/0").is_none());
        assert!(parse_rational("abc").is_none());
        assert!(parse_rational(".").is_none());
    }

    #[test]
    fn big_integers_convert() {
        let q = parse_rational("123456789012345678901234567890").unwrap();
        let r: BigRational = rational_to_real(&q);
        assert_eq!(r, q);
        let f: f64 = rational_to_real(&q);
        assert!((f - 1.2345678901234568e29).abs() < 1e15);
    }

    #[test]
    fn near_respects_mode() {
        assert!(1.0f64.near(&(1.0 + 1e-14), 1e-12));
        let a = BigRational::from_f64_lossy(0.1);
        let b = BigRational::from_f64_lossy(0.1 + 1e-15);
        assert!(!a.near(&b, 1.0));
    }

    #[test]
    fn complex_inverse() {
        let z: C<BigRational> = cplx(BigRational::from_i64(3).unwrap(), BigRational::from_i64(4).unwrap());
        let w = c_inv(&z).unwrap();
        assert_eq!(z * w, c_one());
        assert!(c_inv::<f64>(&c_zero()).is_none());
    }
}
