//! Double-double arithmetic: an unevaluated sum `hi + lo` of two `f64` with
//! `|lo| <= ulp(hi)/2`, giving roughly 106 bits of significand.
//!
//! The error-free transformations use Dekker splitting rather than fused
//! multiply-add so the results do not depend on the target CPU features.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use crate::real::Real;

#[derive(Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

const SPLITTER: f64 = 134_217_729.0; // 2^27 + 1

const DD_PI: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::PI, 1.2246467991473532e-16);
const DD_2PI: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::TAU, 2.4492935982947064e-16);
const DD_PI_2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::FRAC_PI_2, 6.123233995736766e-17);
const DD_LN2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::LN_2, 2.3190468138462996e-17);
const DD_EPS: f64 = 4.93038065763132e-32; // 2^-104

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn split(a: f64) -> (f64, f64) {
    let t = SPLITTER * a;
    let hi = t - (t - a);
    (hi, a - hi)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let (ah, al) = split(a);
    let (bh, bl) = split(b);
    (p, ((ah * bh - p) + ah * bl + al * bh) + al * bl)
}

impl DoubleDouble {
    pub const fn from_parts(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    fn mul_f64(self, b: f64) -> Self {
        let (p1, mut p2) = two_prod(self.hi, b);
        p2 += self.lo * b;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }

    fn mul_pow2(self, b: f64) -> Self {
        Self { hi: self.hi * b, lo: self.lo * b }
    }

    fn sqr(self) -> Self {
        self * self
    }

    fn is_zero(self) -> bool {
        self.hi == 0.0
    }

    fn nearest_int(self) -> Self {
        let hi = self.hi.round();
        if hi == self.hi {
            let lo = self.lo.round();
            let (h, l) = quick_two_sum(hi, lo);
            Self { hi: h, lo: l }
        } else {
            // hi is not an integer, so lo cannot change the rounding unless
            // hi sits exactly on a half-integer.
            let mut h = hi;
            if (h - self.hi).abs() == 0.5 && self.lo < 0.0 {
                h -= 1.0;
            }
            Self { hi: h, lo: 0.0 }
        }
    }

    fn sin_taylor(x: Self) -> Self {
        let thresh = 0.5 * x.hi.abs() * DD_EPS;
        if x.is_zero() {
            return x;
        }
        let x2 = -x.sqr();
        let mut s = x;
        let mut t = x;
        let mut i = 1.0;
        loop {
            i += 2.0;
            t = t * x2 / Self::from_f64(i * (i - 1.0));
            s += t;
            if t.hi.abs() <= thresh {
                break;
            }
        }
        s
    }

    fn cos_taylor(x: Self) -> Self {
        let thresh = 0.5 * DD_EPS;
        if x.is_zero() {
            return Self::one();
        }
        let x2 = -x.sqr();
        let mut s = Self::one();
        let mut t = Self::one();
        let mut i = 0.0;
        loop {
            i += 2.0;
            t = t * x2 / Self::from_f64(i * (i - 1.0));
            s += t;
            if t.hi.abs() <= thresh {
                break;
            }
        }
        s
    }

    /// Reduces `self` to `t + q*pi/2` with `|t| <= pi/4`, returning `(t, q mod 4)`.
    fn reduce_quadrant(self) -> (Self, i64) {
        let z = (self / DD_2PI).nearest_int();
        let r = self - DD_2PI * z;
        let q = (r.hi / DD_PI_2.hi + 0.5).floor();
        let t = r - DD_PI_2 * Self::from_f64(q);
        (t, (q as i64).rem_euclid(4))
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sci_string())
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_sci_string())
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Self { hi, lo }
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        Self { hi: -self.hi, lo: -self.lo }
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, mut p2) = two_prod(self.hi, b.hi);
        p2 += self.hi * b.lo + self.lo * b.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Self { hi, lo }
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 } + Self::from_f64(q3)
    }
}

impl AddAssign for DoubleDouble {
    fn add_assign(&mut self, b: Self) {
        *self = *self + b;
    }
}

impl SubAssign for DoubleDouble {
    fn sub_assign(&mut self, b: Self) {
        *self = *self - b;
    }
}

impl MulAssign for DoubleDouble {
    fn mul_assign(&mut self, b: Self) {
        *self = *self * b;
    }
}

impl DivAssign for DoubleDouble {
    fn div_assign(&mut self, b: Self) {
        *self = *self / b;
    }
}

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl Real for DoubleDouble {
    const NAME: &'static str = "double-double";
    const DIGITS: usize = 32;

    fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    fn epsilon() -> Self {
        Self::from_f64(DD_EPS)
    }

    fn pi() -> Self {
        DD_PI
    }

    fn sqrt(self) -> Self {
        if self.hi <= 0.0 {
            return if self.hi == 0.0 { Self::zero() } else { Self::from_f64(f64::NAN) };
        }
        let y = Self::from_f64(self.hi.sqrt());
        y + (self - y.sqr()) / y.mul_pow2(2.0)
    }

    fn exp(self) -> Self {
        if self.hi > 709.0 {
            return Self::from_f64(f64::INFINITY);
        }
        if self.hi < -745.0 {
            return Self::zero();
        }
        if self.is_zero() {
            return Self::one();
        }
        let k = (self.hi / DD_LN2.hi + 0.5).floor();
        let r = (self - DD_LN2 * Self::from_f64(k)).mul_pow2(1.0 / 512.0);
        // exp(r) - 1 by Taylor series, then undo the 2^9 scaling by squaring.
        let thresh = r.hi.abs() * DD_EPS * 1e-2;
        let mut p = r.sqr();
        let mut s = r + p.mul_pow2(0.5);
        let mut i = 2.0;
        loop {
            i += 1.0;
            p *= r;
            let t = p / Self::from_f64(factorial(i));
            s += t;
            if t.hi.abs() <= thresh || i > 30.0 {
                break;
            }
        }
        for _ in 0..9 {
            s = s.mul_pow2(2.0) + s.sqr();
        }
        let res = s + Self::one();
        res.mul_pow2(2f64.powi(k as i32))
    }

    fn ln(self) -> Self {
        if self.hi <= 0.0 {
            return Self::from_f64(f64::NAN);
        }
        if self.hi == 1.0 && self.lo == 0.0 {
            return Self::zero();
        }
        // One Newton step on exp(x) = a doubles the f64 accuracy.
        let x = Self::from_f64(self.hi.ln());
        x + self * (-x).exp() - Self::one()
    }

    fn sin(self) -> Self {
        if self.is_zero() {
            return self;
        }
        let (t, q) = self.reduce_quadrant();
        match q {
            0 => Self::sin_taylor(t),
            1 => Self::cos_taylor(t),
            2 => -Self::sin_taylor(t),
            _ => -Self::cos_taylor(t),
        }
    }

    fn cos(self) -> Self {
        if self.is_zero() {
            return Self::one();
        }
        let (t, q) = self.reduce_quadrant();
        match q {
            0 => Self::cos_taylor(t),
            1 => -Self::sin_taylor(t),
            2 => -Self::cos_taylor(t),
            _ => Self::sin_taylor(t),
        }
    }

    fn abs(self) -> Self {
        if self.hi < 0.0 {
            -self
        } else {
            self
        }
    }

    fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            let (h, l) = quick_two_sum(hi, self.lo.floor());
            Self { hi: h, lo: l }
        } else {
            Self { hi, lo: 0.0 }
        }
    }

    fn is_finite(self) -> bool {
        self.hi.is_finite() && self.lo.is_finite()
    }

    fn powi(self, n: i32) -> Self {
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base.sqr();
            e >>= 1;
        }
        if n < 0 {
            Self::one() / acc
        } else {
            acc
        }
    }

    fn to_sci_string(self) -> String {
        let digits = Self::DIGITS;
        if !self.is_finite() {
            return format!("{}", self.hi);
        }
        if self.is_zero() {
            return format!("{:.*}e0", digits - 1, 0.0);
        }
        let neg = self.hi < 0.0;
        let mut r = self.abs();
        let mut e = r.hi.log10().floor() as i32;
        r = if e >= 0 { r / Self::from_f64(10.0).powi(e) } else { r * Self::from_f64(10.0).powi(-e) };
        if r.hi >= 10.0 {
            r /= Self::from_f64(10.0);
            e += 1;
        } else if r.hi < 1.0 {
            r = r.mul_f64(10.0);
            e -= 1;
        }
        // One guard digit for rounding; digits may leave [0, 9] and are fixed
        // by the carry pass below.
        let mut d: Vec<i32> = Vec::with_capacity(digits + 1);
        for _ in 0..=digits {
            let q = r.hi.floor();
            d.push(q as i32);
            r = (r - Self::from_f64(q)).mul_f64(10.0);
        }
        for i in (1..d.len()).rev() {
            while d[i] < 0 {
                d[i] += 10;
                d[i - 1] -= 1;
            }
            while d[i] > 9 {
                d[i] -= 10;
                d[i - 1] += 1;
            }
        }
        if d[digits] >= 5 {
            d[digits - 1] += 1;
        }
        d.truncate(digits);
        for i in (1..d.len()).rev() {
            if d[i] > 9 {
                d[i] -= 10;
                d[i - 1] += 1;
            }
        }
        if d[0] > 9 {
            d[0] = 1;
            for x in d.iter_mut().skip(1) {
                *x = 0;
            }
            e += 1;
        }
        let mut out = String::with_capacity(digits + 8);
        if neg {
            out.push('-');
        }
        out.push(char::from(b'0' + d[0] as u8));
        out.push('.');
        for &x in &d[1..] {
            out.push(char::from(b'0' + x as u8));
        }
        out.push('e');
        out.push_str(&e.to_string());
        out
    }

    fn parse_decimal(s: &str) -> Option<Self> {
        let s = s.trim();
        let (neg, body) = match s.as_bytes().first()? {
            b'-' => (true, &s[1..]),
            b'+' => (false, &s[1..]),
            _ => (false, s),
        };
        let (mant, exp) = match body.find(['e', 'E']) {
            Some(p) => (&body[..p], body[p + 1..].parse::<i32>().ok()?),
            None => (body, 0),
        };
        let mut acc = Self::zero();
        let mut frac_digits = 0i32;
        let mut seen_point = false;
        let mut any = false;
        for c in mant.chars() {
            match c {
                '0'..='9' => {
                    acc = acc.mul_f64(10.0) + Self::from_f64(f64::from(c as u8 - b'0'));
                    if seen_point {
                        frac_digits += 1;
                    }
                    any = true;
                }
                '.' if !seen_point => seen_point = true,
                '_' => {}
                _ => return None,
            }
        }
        if !any {
            return None;
        }
        let e = exp - frac_digits;
        let ten = Self::from_f64(10.0);
        let v = match e.cmp(&0) {
            Ordering::Greater => acc * ten.powi(e),
            Ordering::Less => acc / ten.powi(-e),
            Ordering::Equal => acc,
        };
        Some(if neg { -v } else { v })
    }
}

fn factorial(n: f64) -> f64 {
    let mut f = 1.0;
    let mut k = 2.0;
    while k <= n {
        f *= k;
        k += 1.0;
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;

    type D = DoubleDouble;

    fn close(a: D, b: D, rel: f64) -> bool {
        ((a - b).abs() / b.abs()).to_f64() <= rel
    }

    fn lit(s: &str) -> D {
        D::parse_decimal(s).unwrap()
    }

    #[test]
    fn arithmetic_carries_extra_precision() {
        let third = D::one() / D::from_f64(3.0);
        let back = third * D::from_f64(3.0);
        assert!(close(back, D::one(), 1e-31));
        // 1 + 2^-80 survives in double-double but not in f64.
        let tiny = D::from_f64(2f64.powi(-80));
        assert!((D::one() + tiny) - D::one() == tiny);
    }

    #[test]
    fn transcendental_reference_values() {
        // Reference digits from a 40-digit mpmath evaluation.
        assert!(close((D::one() / D::from_f64(3.0)).exp(), lit("1.395612425086089528628125319602586838"), 2e-31));
        assert!(close(D::from_f64(7.0).ln(), lit("1.945910149055313305105352743443179730"), 2e-31));
        assert!(close(D::from_f64(2.0).sqrt(), lit("1.414213562373095048801688724209698079"), 2e-31));
        let x = D::from_f64(3.0) * D::pi() / D::from_f64(8.0);
        assert!(close(x.cos(), lit("0.3826834323650897717284599840303988667"), 4e-31));
        assert!(close(x.sin(), lit("0.9238795325112867561281831893967882868"), 4e-31));
        assert!(close(lit("13.93").powf(lit("-1.036")), lit("0.06529300299325148080409158698887918413"), 1e-30));
        assert!(close(D::from_f64(-20.5).exp(), lit("1.250152866386742628937553119231222182e-9"), 2e-31));
    }

    #[test]
    fn tan_pi_over_eight() {
        let t = (D::pi() / D::from_f64(8.0)).tan();
        let want = D::from_f64(2.0).sqrt() - D::one();
        assert!(close(t, want, 1e-30));
    }

    #[test]
    fn decimal_round_trip() {
        for s in ["1.250152866386742628937553119231222e-9", "-3.5", "0.531280506277205141624468647368471785"] {
            let v = lit(s);
            let printed = v.to_sci_string();
            let again = lit(&printed);
            assert!(close(again, v, 1e-31), "{s} -> {printed}");
            assert_eq!(again.to_sci_string(), printed);
        }
        assert_eq!(D::from_f64(0.0).to_sci_string().chars().next(), Some('0'));
        assert!(D::parse_decimal("1.2.3").is_none());
        assert!(D::parse_decimal("").is_none());
    }

    #[test]
    fn floor_and_nearest() {
        assert_eq!(D::from_f64(2.5).floor(), D::from_f64(2.0));
        let just_below_three = D::from_f64(3.0) - D::from_f64(1e-25);
        assert_eq!(just_below_three.floor(), D::from_f64(2.0));
        assert_eq!(D::from_f64(-0.5).floor(), D::from_f64(-1.0));
    }
}
