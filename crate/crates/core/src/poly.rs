//! Exact polynomial arithmetic over the rationals.
//!
//! Three shapes are enough for the cluster-sum machinery:
//! [`Poly`] (univariate, used for polynomials in the dimension `d` or in the
//! fugacity), [`Laurent`] (integer exponents, used for the variable
//! `u = 1 + λ`) and [`BiPoly`] (polynomials in `d` whose coefficients are
//! Laurent polynomials in `u`).

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Integer power with a possibly negative exponent.
pub fn qpow(base: &Q, exp: i64) -> Q {
    if exp >= 0 {
        num_traits::pow::pow(base.clone(), exp as usize)
    } else {
        num_traits::pow::pow(base.recip(), (-exp) as usize)
    }
}

/// Natural logarithm of a positive rational, accurate to f64 precision even
/// when numerator and denominator are far outside the f64 range.
pub fn ln_q(x: &Q) -> f64 {
    assert!(x.is_positive(), "logarithm of a non-positive rational");
    ln_bigint(x.numer()) - ln_bigint(x.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits < 1000 {
        return n.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    let top: BigInt = n >> (shift as usize);
    top.to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

pub fn q_to_f64(x: &Q) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    if x.numer().bits() < 1000 && x.denom().bits() < 1000 {
        return x.numer().to_f64().unwrap() / x.denom().to_f64().unwrap();
    }
    let sign = if x.is_negative() { -1.0 } else { 1.0 };
    sign * ln_q(&x.abs()).exp()
}

/// Univariate polynomial with rational coefficients, lowest degree first.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Poly {
    coeffs: Vec<Q>,
}

impl Poly {
    pub fn zero() -> Self {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Q) -> Self {
        Poly::from_coeffs(vec![c])
    }

    /// The polynomial `x`.
    pub fn x() -> Self {
        Poly::from_coeffs(vec![Q::zero(), Q::one()])
    }

    pub fn from_coeffs(coeffs: Vec<Q>) -> Self {
        let mut p = Poly { coeffs };
        p.trim();
        p
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Poly::from_coeffs(coeffs.iter().map(|&c| qi(c)).collect())
    }

    fn trim(&mut self) {
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree, with `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn coeff(&self, i: usize) -> Q {
        self.coeffs.get(i).cloned().unwrap_or_else(Q::zero)
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn scale(&self, c: &Q) -> Poly {
        Poly::from_coeffs(self.coeffs.iter().map(|x| x * c).collect())
    }

    pub fn pow(&self, n: u32) -> Poly {
        let mut out = Poly::constant(Q::one());
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    /// `binomial(x, a) = x (x-1) ... (x-a+1) / a!`
    pub fn binomial(a: u32) -> Poly {
        let mut p = Poly::constant(Q::one());
        for i in 0..a {
            p = &p * &Poly::from_coeffs(vec![qi(-(i as i64)), Q::one()]);
        }
        let mut fact = BigInt::one();
        for i in 2..=a {
            fact *= i;
        }
        p.scale(&Q::from_integer(fact).recip())
    }

    pub fn eval(&self, x: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * x + q_to_f64(c);
        }
        acc
    }

    /// Composition `self(other(x))`.
    pub fn compose(&self, other: &Poly) -> Poly {
        let mut acc = Poly::zero();
        for c in self.coeffs.iter().rev() {
            acc = &(&acc * other) + &Poly::constant(c.clone());
        }
        acc
    }

    /// Least common denominator of the coefficients together with the
    /// integer polynomial `lcd * self`.
    pub fn integer_form(&self) -> (BigInt, Vec<BigInt>) {
        let lcd = self
            .coeffs
            .iter()
            .fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints = self
            .coeffs
            .iter()
            .map(|c| (c * Q::from_integer(lcd.clone())).to_integer())
            .collect();
        (lcd, ints)
    }

    /// Human-readable form with a single common denominator, for example
    /// `(3d^2 - 3d - 2)/8`.
    pub fn pretty(&self, var: &str) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let (lcd, ints) = self.integer_form();
        let body = format_int_poly(&ints, var);
        let nterms = ints.iter().filter(|c| !c.is_zero()).count();
        if lcd.is_one() {
            body
        } else if nterms == 1 {
            format!("{body}/{lcd}")
        } else {
            format!("({body})/{lcd}")
        }
    }
}

fn format_int_poly(ints: &[BigInt], var: &str) -> String {
    let mut out = String::new();
    for (i, c) in ints.iter().enumerate().rev() {
        if c.is_zero() {
            continue;
        }
        let neg = c.is_negative();
        let mag = c.abs();
        if out.is_empty() {
            if neg {
                out.push('-');
            }
        } else {
            out.push_str(if neg { " - " } else { " + " });
        }
        let show_coeff = i == 0 || !mag.is_one();
        if show_coeff {
            out.push_str(&mag.to_string());
        }
        match i {
            0 => {}
            1 => out.push_str(var),
            _ => {
                out.push_str(var);
                out.push('^');
                out.push_str(&i.to_string());
            }
        }
    }
    out
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty("x"))
    }
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::from_coeffs((0..n).map(|i| self.coeff(i) + rhs.coeff(i)).collect())
    }
}

impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        let n = self.coeffs.len().max(rhs.coeffs.len());
        Poly::from_coeffs((0..n).map(|i| self.coeff(i) - rhs.coeff(i)).collect())
    }
}

impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut out = vec![Q::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Poly::from_coeffs(out)
    }
}

impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(&qi(-1))
    }
}

/// Laurent polynomial in a single variable (the engine uses `u = 1 + λ`).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Laurent {
    terms: BTreeMap<i64, Q>,
}

impl Laurent {
    pub fn zero() -> Self {
        Laurent::default()
    }

    pub fn monomial(exp: i64, c: Q) -> Self {
        let mut l = Laurent::zero();
        l.add_term(exp, c);
        l
    }

    pub fn add_term(&mut self, exp: i64, c: Q) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(exp).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&exp);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Q)> {
        self.terms.iter().map(|(&e, c)| (e, c))
    }

    pub fn coeff(&self, exp: i64) -> Q {
        self.terms.get(&exp).cloned().unwrap_or_else(Q::zero)
    }

    pub fn scale(&self, c: &Q) -> Laurent {
        let mut out = Laurent::zero();
        for (&e, x) in &self.terms {
            out.add_term(e, x * c);
        }
        out
    }

    pub fn eval(&self, u: &Q) -> Q {
        self.terms
            .iter()
            .map(|(&e, c)| c * qpow(u, e))
            .fold(Q::zero(), |a, b| a + b)
    }

    pub fn eval_f64(&self, u: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&e, c)| q_to_f64(c) * u.powi(e as i32))
            .sum()
    }

    /// Rewrite in terms of `λ` through `u = 1 + λ`. Only defined when every
    /// exponent is non-negative.
    pub fn in_lambda(&self) -> Option<Poly> {
        let shift = Poly::from_ints(&[1, 1]);
        let mut acc = Poly::zero();
        for (&e, c) in &self.terms {
            if e < 0 {
                return None;
            }
            acc = &acc + &shift.pow(e as u32).scale(c);
        }
        Some(acc)
    }
}

impl Add for &Laurent {
    type Output = Laurent;
    fn add(self, rhs: &Laurent) -> Laurent {
        let mut out = self.clone();
        for (&e, c) in &rhs.terms {
            out.add_term(e, c.clone());
        }
        out
    }
}

impl Mul for &Laurent {
    type Output = Laurent;
    fn mul(self, rhs: &Laurent) -> Laurent {
        let mut out = Laurent::zero();
        for (&e1, c1) in &self.terms {
            for (&e2, c2) in &rhs.terms {
                out.add_term(e1 + e2, c1 * c2);
            }
        }
        out
    }
}

/// Polynomial in `d` whose coefficients are Laurent polynomials in `u`,
/// stored as a sparse map `(deg_d, deg_u) -> coefficient`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BiPoly {
    terms: BTreeMap<(u32, i64), Q>,
}

impl BiPoly {
    pub fn zero() -> Self {
        BiPoly::default()
    }

    pub fn add_term(&mut self, deg_d: u32, deg_u: i64, c: Q) {
        if c.is_zero() {
            return;
        }
        let key = (deg_d, deg_u);
        let entry = self.terms.entry(key).or_insert_with(Q::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&key);
        }
    }

    /// `p(d) * l(u)`
    pub fn from_product(p: &Poly, l: &Laurent) -> Self {
        let mut out = BiPoly::zero();
        for (i, c) in p.coeffs().iter().enumerate() {
            for (e, lc) in l.terms() {
                out.add_term(i as u32, e, c * lc);
            }
        }
        out
    }

    /// Build from a polynomial in `d` and `λ` (given as `(deg_d, deg_λ, c)`
    /// triples), converting `λ = u - 1`.
    pub fn from_d_lambda(terms: &[(u32, u32, Q)]) -> Self {
        let lam = Laurent::monomial(1, Q::one()) + Laurent::monomial(0, qi(-1));
        let mut out = BiPoly::zero();
        for (dd, dl, c) in terms {
            let mut pw = Laurent::monomial(0, Q::one());
            for _ in 0..*dl {
                pw = &pw * &lam;
            }
            for (e, lc) in pw.terms() {
                out.add_term(*dd, e, c * lc);
            }
        }
        out
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, i64), &Q)> {
        self.terms.iter().map(|(&k, c)| (k, c))
    }

    pub fn scale(&self, c: &Q) -> BiPoly {
        let mut out = BiPoly::zero();
        for (&(i, e), x) in &self.terms {
            out.add_term(i, e, x * c);
        }
        out
    }

    /// Substitute a value for `u`, leaving a polynomial in `d`.
    pub fn at_u(&self, u: &Q) -> Poly {
        let max = self.terms.keys().map(|k| k.0).max().unwrap_or(0) as usize;
        let mut coeffs = vec![Q::zero(); max + 1];
        for (&(i, e), c) in &self.terms {
            coeffs[i as usize] += c * qpow(u, e);
        }
        Poly::from_coeffs(coeffs)
    }

    pub fn eval(&self, d: &Q, u: &Q) -> Q {
        self.at_u(u).eval(d)
    }

    /// Coefficient of `d^i`, as a Laurent polynomial in `u`.
    pub fn d_coeff(&self, i: u32) -> Laurent {
        let mut out = Laurent::zero();
        for (&(dd, e), c) in &self.terms {
            if dd == i {
                out.add_term(e, c.clone());
            }
        }
        out
    }

    pub fn d_degree(&self) -> Option<u32> {
        self.terms.keys().map(|k| k.0).max()
    }
}

impl Add for Laurent {
    type Output = Laurent;
    fn add(self, rhs: Laurent) -> Laurent {
        &self + &rhs
    }
}

impl Add for &BiPoly {
    type Output = BiPoly;
    fn add(self, rhs: &BiPoly) -> BiPoly {
        let mut out = self.clone();
        for (&(i, e), c) in &rhs.terms {
            out.add_term(i, e, c.clone());
        }
        out
    }
}

impl Sub for &BiPoly {
    type Output = BiPoly;
    fn sub(self, rhs: &BiPoly) -> BiPoly {
        self + &rhs.scale(&qi(-1))
    }
}

impl Mul for &BiPoly {
    type Output = BiPoly;
    fn mul(self, rhs: &BiPoly) -> BiPoly {
        let mut out = BiPoly::zero();
        for (&(i1, e1), c1) in &self.terms {
            for (&(i2, e2), c2) in &rhs.terms {
                out.add_term(i1 + i2, e1 + e2, c1 * c2);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binomial_polynomial_matches_integers() {
        for a in 0..6u32 {
            let p = Poly::binomial(a);
            for n in 0..12i64 {
                let mut expect = BigInt::one();
                for i in 0..a as i64 {
                    expect *= n - i;
                }
                let mut f = BigInt::one();
                for i in 2..=a {
                    f *= i;
                }
                assert_eq!(p.eval(&qi(n)), Q::new(expect, f));
            }
        }
    }

    #[test]
    fn pretty_printing() {
        let p = Poly::from_ints(&[-2, -3, 3]).scale(&q(1, 8));
        assert_eq!(p.pretty("d"), "(3d^2 - 3d - 2)/8");
        assert_eq!(Poly::constant(q(1, 2)).pretty("d"), "1/2");
        assert_eq!(Poly::x().pretty("d"), "d");
    }

    #[test]
    fn laurent_in_lambda() {
        // u^2 - 1 = 2λ + λ^2
        let mut l = Laurent::monomial(2, qi(1));
        l.add_term(0, qi(-1));
        assert_eq!(l.in_lambda().unwrap(), Poly::from_ints(&[0, 2, 1]));
        assert!(Laurent::monomial(-1, qi(1)).in_lambda().is_none());
    }

    #[test]
    fn ln_of_huge_rationals() {
        let big = qpow(&qi(2), 5000) * q(3, 1);
        let expect = 5000.0 * std::f64::consts::LN_2 + 3f64.ln();
        assert!((ln_q(&big) - expect).abs() < 1e-9);
        assert!((ln_q(&q(3, 7)) - (3.0f64 / 7.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn bipoly_from_lambda_roundtrip() {
        // (2λ + λ^2) d(d-1) - 2
        let b = BiPoly::from_d_lambda(&[
            (2, 1, qi(2)),
            (2, 2, qi(1)),
            (1, 1, qi(-2)),
            (1, 2, qi(-1)),
            (0, 0, qi(-2)),
        ]);
        let lam = q(3, 5);
        let u = &lam + qi(1);
        let d = qi(7);
        let direct = (qi(2) * &lam + &lam * &lam) * qi(42) - qi(2);
        assert_eq!(b.eval(&d, &u), direct);
    }
}
