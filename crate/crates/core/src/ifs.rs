//! Continued-fraction iterated function systems and their composed maps.
//!
//! A digit set `B` defines the contractions `theta_b(x) = 1/(x + b)`. A word
//! `(b_1, ..., b_nu)` composes them as `theta_{b_1} o ... o theta_{b_nu}`,
//! which is the Mobius map `(A_{nu-1} x + A_nu) / (B_{nu-1} x + B_nu)` built
//! from the continuant recurrences.

use num_bigint::BigInt;

use crate::error::{Error, Result};
use crate::real::Real;

/// The digit set of the system, sorted strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussIfs {
    digits: Vec<f64>,
    integral: bool,
}

impl GaussIfs {
    pub fn new(mut digits: Vec<f64>) -> Result<Self> {
        if digits.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidArgument("digits must be finite".into()));
        }
        digits.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if digits.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("digits must be distinct".into()));
        }
        if digits.len() < 2 {
            return Err(Error::InvalidArgument("at least two distinct digits are required".into()));
        }
        if digits[0] < 1.0 {
            return Err(Error::InvalidArgument(format!("digit {} is below 1", digits[0])));
        }
        let integral = digits.iter().all(|d| d.fract() == 0.0 && *d < 9.0e15);
        Ok(Self { digits, integral })
    }

    pub fn from_integers(digits: &[u64]) -> Result<Self> {
        Self::new(digits.iter().map(|&d| d as f64).collect())
    }

    pub fn digits(&self) -> &[f64] {
        &self.digits
    }

    pub fn len(&self) -> usize {
        self.digits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.digits.is_empty()
    }

    /// Smallest digit.
    pub fn gamma(&self) -> f64 {
        self.digits[0]
    }

    /// Largest digit.
    pub fn big_gamma(&self) -> f64 {
        self.digits[self.digits.len() - 1]
    }

    pub fn is_integral(&self) -> bool {
        self.integral
    }

    /// Human-readable label such as `E[1,4,7]`.
    pub fn label(&self) -> String {
        let parts: Vec<String> = self.digits.iter().map(|d| format!("{d}")).collect();
        format!("E[{}]", parts.join(","))
    }

    /// `theta_b(x) = 1/(x + b)` for a single digit.
    pub fn theta<T: Real>(beta: f64, x: T) -> T {
        T::one() / (x + T::from_f64(beta))
    }

    /// All words of length `nu`, lexicographic in `(b_1, ..., b_nu)`.
    pub fn words(&self, nu: usize) -> Result<Vec<Word>> {
        if nu == 0 {
            return Err(Error::InvalidArgument("word length must be at least 1".into()));
        }
        let n = self.digits.len();
        let total = n
            .checked_pow(nu as u32)
            .filter(|&t| t <= 50_000_000)
            .ok_or_else(|| Error::InvalidArgument(format!("{n}^{nu} words is too many")))?;
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; nu];
        loop {
            out.push(Word { indices: idx.clone(), betas: idx.iter().map(|&i| self.digits[i]).collect() });
            // odometer increment, last position fastest
            let mut p = nu;
            loop {
                if p == 0 {
                    return Ok(out);
                }
                p -= 1;
                idx[p] += 1;
                if idx[p] < n {
                    break;
                }
                idx[p] = 0;
            }
        }
    }
}

/// A word `(b_1, ..., b_nu)` over the digit set.
#[derive(Debug, Clone, PartialEq)]
pub struct Word {
    indices: Vec<usize>,
    betas: Vec<f64>,
}

impl Word {
    pub fn new(ifs: &GaussIfs, betas: &[f64]) -> Result<Self> {
        if betas.is_empty() {
            return Err(Error::InvalidArgument("empty word".into()));
        }
        let indices = betas
            .iter()
            .map(|b| {
                ifs.digits
                    .iter()
                    .position(|d| d == b)
                    .ok_or_else(|| Error::InvalidArgument(format!("{b} is not a digit of {}", ifs.label())))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { indices, betas: betas.to_vec() })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn nu(&self) -> usize {
        self.betas.len()
    }

    /// Literal composition `theta_{b_1}(theta_{b_2}(... theta_{b_nu}(x)))`.
    pub fn compose<T: Real>(&self, x: T) -> T {
        self.betas.iter().rev().fold(x, |acc, &b| GaussIfs::theta(b, acc))
    }
}

/// Mobius coefficients `(A_{nu-1}, A_nu, B_{nu-1}, B_nu)` of a word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Continuants<T> {
    pub a_prev: T,
    pub a: T,
    pub b_prev: T,
    pub b: T,
}

/// Exact integer continuants; available when every digit is an integer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactContinuants {
    pub a_prev: BigInt,
    pub a: BigInt,
    pub b_prev: BigInt,
    pub b: BigInt,
}

impl ExactContinuants {
    /// `A_nu B_{nu-1} - A_{nu-1} B_nu`, which is `(-1)^(nu+1)`.
    pub fn determinant(&self) -> BigInt {
        &self.a * &self.b_prev - &self.a_prev * &self.b
    }

    pub fn to_real<T: Real>(&self) -> Continuants<T> {
        Continuants {
            a_prev: T::from_bigint(&self.a_prev),
            a: T::from_bigint(&self.a),
            b_prev: T::from_bigint(&self.b_prev),
            b: T::from_bigint(&self.b),
        }
    }
}

/// Integer continuant recurrence; `None` when some digit is not an integer.
pub fn exact_word_coeffs(ifs: &GaussIfs, word: &Word) -> Option<ExactContinuants> {
    if !ifs.is_integral() || word.nu() == 0 {
        return None;
    }
    let mut a_prev = BigInt::from(0);
    let mut a = BigInt::from(1);
    let mut b_prev = BigInt::from(1);
    let mut b = BigInt::from(word.betas[0] as u64);
    for &beta in &word.betas[1..] {
        let beta = BigInt::from(beta as u64);
        let a_next = &a_prev + &beta * &a;
        let b_next = &b_prev + &beta * &b;
        a_prev = std::mem::replace(&mut a, a_next);
        b_prev = std::mem::replace(&mut b, b_next);
    }
    Some(ExactContinuants { a_prev, a, b_prev, b })
}

/// Continuants of `word`, exact for integer digits and rounded once at the end.
pub fn word_coeffs<T: Real>(ifs: &GaussIfs, word: &Word) -> Result<Continuants<T>> {
    if word.nu() == 0 {
        return Err(Error::InvalidArgument("empty word".into()));
    }
    if let Some(exact) = exact_word_coeffs(ifs, word) {
        return Ok(exact.to_real());
    }
    let mut a_prev = T::zero();
    let mut a = T::one();
    let mut b_prev = T::one();
    let mut b = T::from_f64(word.betas[0]);
    for &beta in &word.betas[1..] {
        let beta = T::from_f64(beta);
        let a_next = a_prev + beta * a;
        let b_next = b_prev + beta * b;
        a_prev = a;
        a = a_next;
        b_prev = b;
        b = b_next;
    }
    Ok(Continuants { a_prev, a, b_prev, b })
}

/// `theta_omega(x) = (A_{nu-1} x + A_nu) / (B_{nu-1} x + B_nu)`.
pub fn theta_omega<T: Real>(c: &Continuants<T>, x: T) -> T {
    (c.a_prev * x + c.a) / (c.b_prev * x + c.b)
}

/// `|theta_omega'(x)|^s = (B_{nu-1} x + B_nu)^(-2s)`.
pub fn weight<T: Real>(c: &Continuants<T>, x: T, s: T) -> T {
    if s == T::zero() {
        return T::one();
    }
    (-(s + s) * (c.b_prev * x + c.b).ln()).exp()
}

/// Continuants of the all-`gamma` word: `B~_0 = 1`, `B~_1 = gamma`,
/// `B~_{j+1} = B~_{j-1} + gamma B~_j`.
pub fn tilde_b<T: Real>(gamma: T, j: i64) -> Result<T> {
    if j < 0 {
        return Err(Error::InvalidArgument(format!("negative index {j}")));
    }
    let (mut prev, mut cur) = (T::one(), gamma);
    if j == 0 {
        return Ok(prev);
    }
    for _ in 1..j {
        let next = prev + gamma * cur;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Closed form `c1 l+^j + c2 l-^j` of [`tilde_b`], with
/// `l+- = gamma/2 +- sqrt(gamma^2 + 4)/2`.
pub fn tilde_b_closed_form<T: Real>(gamma: T, j: i64) -> Result<T> {
    if j < 0 {
        return Err(Error::InvalidArgument(format!("negative index {j}")));
    }
    let two = T::from_f64(2.0);
    let root = (gamma * gamma + T::from_f64(4.0)).sqrt();
    let lp = (gamma + root) / two;
    let lm = (gamma - root) / two;
    let c1 = (gamma - lm) / (lp - lm);
    let c2 = (lp - gamma) / (lp - lm);
    Ok(c1 * lp.powi(j as i32) + c2 * lm.powi(j as i32))
}

/// Uniform Lipschitz bound `c(nu) = (B~_{nu-1} a + B~_nu)^(-2)` for every
/// `theta_omega` with `|omega| = nu` on an interval with left end `a_left`.
pub fn contraction_bound<T: Real>(ifs: &GaussIfs, nu: usize, a_left: T) -> Result<T> {
    if nu == 0 {
        return Err(Error::InvalidArgument("nu must be at least 1".into()));
    }
    let g = T::from_f64(ifs.gamma());
    let d = tilde_b(g, nu as i64 - 1)? * a_left + tilde_b(g, nu as i64)?;
    Ok(T::one() / (d * d))
}

/// `M_0(nu) = 2/(a_left + 1/b_nu)`, the log-Lipschitz bound of the weights.
pub fn log_lipschitz_bound<T: Real>(a_left: T, b_seq_nu: T) -> T {
    T::from_f64(2.0) / (a_left + T::one() / b_seq_nu)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ifs(d: &[u64]) -> GaussIfs {
        GaussIfs::from_integers(d).unwrap()
    }

    #[test]
    fn rejects_degenerate_digit_sets() {
        assert!(GaussIfs::new(vec![1.0]).is_err());
        assert!(GaussIfs::new(vec![2.0, 2.0]).is_err());
        assert!(GaussIfs::new(vec![0.5, 2.0]).is_err());
        let e = GaussIfs::new(vec![7.0, 1.0, 4.0]).unwrap();
        assert_eq!(e.digits(), &[1.0, 4.0, 7.0]);
        assert_eq!((e.gamma(), e.big_gamma()), (1.0, 7.0));
        assert!(e.is_integral());
        assert!(!GaussIfs::new(vec![1.0, 2.5]).unwrap().is_integral());
    }

    #[test]
    fn continuants_of_short_words() {
        let e = ifs(&[1, 2]);
        let w = Word::new(&e, &[1.0]).unwrap();
        let c: Continuants<f64> = word_coeffs(&e, &w).unwrap();
        assert_eq!((c.a_prev, c.a, c.b_prev, c.b), (0.0, 1.0, 1.0, 1.0));

        let w = Word::new(&e, &[1.0, 2.0]).unwrap();
        let c: Continuants<f64> = word_coeffs(&e, &w).unwrap();
        assert_eq!((c.a_prev, c.a, c.b_prev, c.b), (1.0, 2.0, 1.0, 3.0));
        // direct composition oracle
        for x in [0.0, 0.25, 1.0] {
            let direct = 1.0 / (1.0 / (x + 2.0) + 1.0);
            assert!((theta_omega(&c, x) - direct).abs() < 1e-15);
        }
        assert_eq!(theta_omega(&c, 0.0), 2.0 / 3.0);
        assert_eq!(theta_omega(&c, 1.0), 0.75);

        let fib = Word::new(&e, &[1.0; 6]).unwrap();
        let x = exact_word_coeffs(&e, &fib).unwrap();
        assert_eq!((x.b_prev, x.b), (BigInt::from(8), BigInt::from(13)));
    }

    #[test]
    fn empty_word_is_rejected() {
        let e = ifs(&[1, 2]);
        assert!(Word::new(&e, &[]).is_err());
        assert!(Word::new(&e, &[3.0]).is_err());
        assert!(e.words(0).is_err());
    }

    #[test]
    fn weights() {
        let e = ifs(&[1, 2]);
        let c: Continuants<f64> = word_coeffs(&e, &Word::new(&e, &[1.0, 2.0]).unwrap()).unwrap();
        assert!((weight(&c, 0.0, 1.0) - 1.0 / 9.0).abs() < 1e-16);
        assert_eq!(weight(&c, 0.3, 0.0), 1.0);
        let one: Continuants<f64> = word_coeffs(&e, &Word::new(&e, &[1.0]).unwrap()).unwrap();
        assert_eq!(weight(&one, 0.0, 0.5), 1.0);
    }

    #[test]
    fn tilde_b_values() {
        let fib: Vec<f64> = (0..=6).map(|j| tilde_b(1.0, j).unwrap()).collect();
        assert_eq!(fib, vec![1.0, 1.0, 2.0, 3.0, 5.0, 8.0, 13.0]);
        assert_eq!(tilde_b(2.0, 3).unwrap(), 12.0);
        assert!((tilde_b_closed_form(1.0, 6).unwrap() - 13.0).abs() < 1e-12);
        assert!(tilde_b(1.0f64, -1).is_err());
    }

    #[test]
    fn contraction_and_log_lipschitz_bounds() {
        let e = ifs(&[1, 2]);
        assert_eq!(contraction_bound(&e, 1, 0.0).unwrap(), 1.0);
        assert_eq!(contraction_bound(&e, 2, 0.0).unwrap(), 0.25);
        let mut prev = f64::INFINITY;
        for nu in 1..=11 {
            let c = contraction_bound(&e, nu, 0.366).unwrap();
            assert!(c < prev);
            prev = c;
        }
        assert_eq!(log_lipschitz_bound(0.0, 0.5), 1.0);
        assert_eq!(log_lipschitz_bound(0.0, 1.0), 2.0);
    }

    #[test]
    fn lexicographic_word_order() {
        let e = ifs(&[1, 4, 7]);
        let w = e.words(2).unwrap();
        let got: Vec<Vec<f64>> = w.iter().map(|w| w.betas().to_vec()).collect();
        assert_eq!(got[0], vec![1.0, 1.0]);
        assert_eq!(got[1], vec![1.0, 4.0]);
        assert_eq!(got[3], vec![4.0, 1.0]);
        assert_eq!(got[8], vec![7.0, 7.0]);
        assert_eq!(w.len(), 9);
    }
}
