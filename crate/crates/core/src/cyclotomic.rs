//! Exact arithmetic in cyclotomic fields.
//!
//! An element of `Q(zeta_N)` is stored as a polynomial in `zeta_N = e^(2*pi*i/N)`
//! with rational coefficients, kept reduced modulo the N-th cyclotomic polynomial.
//! The reduced representation is unique, so equality is coefficient equality and
//! zero tests are exact. Numerical evaluation to `Complex64` happens only at the
//! boundary to the floating-point modules.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::{Arc, Mutex, OnceLock};

/// Shared data for one cyclotomic order: the minimal polynomial of `zeta_N`.
struct RingTable {
    order: u32,
    /// Monic cyclotomic polynomial, ascending coefficients, length `degree + 1`.
    modulus: Vec<i64>,
    degree: usize,
}

static TABLES: OnceLock<Mutex<HashMap<u32, Arc<RingTable>>>> = OnceLock::new();

fn table(order: u32) -> Arc<RingTable> {
    assert!(order >= 1, "cyclotomic order must be positive");
    let cache = TABLES.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().expect("cyclotomic table lock poisoned");
    if let Some(t) = map.get(&order) {
        return Arc::clone(t);
    }
    let modulus = cyclotomic_polynomial(order);
    let degree = modulus.len() - 1;
    let t = Arc::new(RingTable {
        order,
        modulus,
        degree,
    });
    map.insert(order, Arc::clone(&t));
    t
}

/// Coefficients of the n-th cyclotomic polynomial, ascending degree.
///
/// Computed by exact division: `Phi_n = (x^n - 1) / prod_{d | n, d < n} Phi_d`.
/// Coefficients fit in `i64` for every order used here (they are in {-1, 0, 1}
/// for all n < 105).
fn cyclotomic_polynomial(n: u32) -> Vec<i64> {
    let mut memo: HashMap<u32, Vec<i64>> = HashMap::new();
    for d in 1..=n {
        if !n.is_multiple_of(d) {
            continue;
        }
        let mut num = vec![0i64; d as usize + 1];
        num[0] = -1;
        num[d as usize] = 1;
        for e in 1..d {
            if d % e == 0 {
                num = poly_div_exact(&num, &memo[&e]);
            }
        }
        memo.insert(d, num);
    }
    memo.remove(&n).expect("cyclotomic polynomial computed")
}

/// Exact division of integer polynomials; `den` must be monic and divide `num`.
fn poly_div_exact(num: &[i64], den: &[i64]) -> Vec<i64> {
    assert_eq!(*den.last().unwrap(), 1, "divisor must be monic");
    let mut rem: Vec<i64> = num.to_vec();
    let dd = den.len() - 1;
    let nd = num.len() - 1;
    assert!(nd >= dd);
    let mut quot = vec![0i64; nd - dd + 1];
    for k in (dd..=nd).rev() {
        let c = rem[k];
        if c == 0 {
            continue;
        }
        quot[k - dd] = c;
        for (i, &m) in den.iter().enumerate() {
            rem[k - dd + i] -= c * m;
        }
    }
    assert!(rem.iter().all(|&c| c == 0), "inexact polynomial division");
    quot
}

fn rat_zero() -> BigRational {
    BigRational::zero()
}

fn rat_int(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// An exact element of the cyclotomic field `Q(zeta_order)`.
#[derive(Clone, PartialEq, Eq)]
pub struct Cyc {
    order: u32,
    /// Reduced polynomial coefficients in `zeta_order`, length `deg(Phi_order)`.
    coeffs: Vec<BigRational>,
}

impl Cyc {
    pub fn zero(order: u32) -> Self {
        let t = table(order);
        Cyc {
            order,
            coeffs: vec![rat_zero(); t.degree],
        }
    }

    pub fn one(order: u32) -> Self {
        Cyc::integer(order, 1)
    }

    pub fn integer(order: u32, value: i64) -> Self {
        let mut c = Cyc::zero(order);
        if !c.coeffs.is_empty() {
            c.coeffs[0] = rat_int(value);
        } else {
            // order 1: Phi_1 = x - 1 has degree 1, so this branch is unreachable,
            // kept for clarity of the invariant coeffs.len() == degree >= 1.
            unreachable!("cyclotomic degree is at least 1");
        }
        c
    }

    pub fn rational(order: u32, value: BigRational) -> Self {
        let mut c = Cyc::zero(order);
        c.coeffs[0] = value;
        c
    }

    /// `zeta_order^exponent`, exponent taken modulo the order.
    pub fn root(order: u32, exponent: i64) -> Self {
        let t = table(order);
        let e = exponent.rem_euclid(order as i64) as usize;
        let mut raw = vec![rat_zero(); e + 1];
        raw[e] = BigRational::one();
        Cyc {
            order,
            coeffs: reduce(&t, raw),
        }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// True when the element is a rational number (degree-zero part only).
    pub fn as_rational(&self) -> Option<BigRational> {
        if self.coeffs[1..].iter().all(|c| c.is_zero()) {
            Some(self.coeffs[0].clone())
        } else {
            None
        }
    }

    pub fn as_integer(&self) -> Option<i64> {
        let r = self.as_rational()?;
        if r.is_integer() {
            r.to_integer().to_i64()
        } else {
            None
        }
    }

    pub fn scaled(&self, factor: &BigRational) -> Cyc {
        Cyc {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// Complex conjugate, i.e. the substitution `zeta -> zeta^(order-1)`.
    pub fn conj(&self) -> Cyc {
        let t = table(self.order);
        let n = self.order as usize;
        let mut raw = vec![rat_zero(); n];
        for (k, c) in self.coeffs.iter().enumerate() {
            if !c.is_zero() {
                raw[(n - k) % n] += c;
            }
        }
        Cyc {
            order: self.order,
            coeffs: reduce(&t, raw),
        }
    }

    /// Multiplicative inverse; `None` for zero.
    ///
    /// Extended Euclidean algorithm in `Q[x]` against the cyclotomic modulus,
    /// which is irreducible, so every nonzero element is invertible.
    pub fn inv(&self) -> Option<Cyc> {
        if self.is_zero() {
            return None;
        }
        let t = table(self.order);
        let modulus: Vec<BigRational> = t.modulus.iter().map(|&c| rat_int(c)).collect();
        let a = trim(self.coeffs.clone());
        let (mut r0, mut r1) = (modulus, a);
        let (mut t0, mut t1) = (vec![], vec![BigRational::one()]);
        while !r1.is_empty() {
            let (q, r) = poly_divmod(&r0, &r1);
            let tn = poly_sub(&t0, &poly_mul(&q, &t1));
            r0 = r1;
            t0 = t1;
            r1 = r;
            t1 = tn;
        }
        // r0 is a nonzero constant: the gcd with an irreducible modulus.
        assert_eq!(r0.len(), 1, "cyclotomic modulus must be irreducible");
        let scale = r0[0].recip();
        let raw: Vec<BigRational> = t0.iter().map(|c| c * &scale).collect();
        Some(Cyc {
            order: self.order,
            coeffs: reduce(&t, raw),
        })
    }

    /// Numerical value via `zeta_N = exp(2*pi*i/N)`.
    pub fn eval(&self) -> Complex64 {
        let n = self.order as f64;
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let angle = TAU * (k as f64) / n;
            let v = c.to_f64().expect("rational representable as f64");
            acc += Complex64::new(angle.cos(), angle.sin()) * v;
        }
        acc
    }
}

/// Reduce raw polynomial coefficients to the canonical representative:
/// exponents folded modulo the order, then remainder modulo `Phi_order`.
fn reduce(t: &RingTable, mut raw: Vec<BigRational>) -> Vec<BigRational> {
    let n = t.order as usize;
    if raw.len() > n {
        for k in n..raw.len() {
            if !raw[k].is_zero() {
                let v = raw[k].clone();
                raw[k % n] += v;
            }
        }
        raw.truncate(n);
    }
    for k in (t.degree..raw.len()).rev() {
        if raw[k].is_zero() {
            continue;
        }
        let q = raw[k].clone();
        for (i, &m) in t.modulus.iter().enumerate() {
            if m != 0 {
                let delta = &q * rat_int(m);
                raw[k - t.degree + i] -= delta;
            }
        }
    }
    raw.truncate(t.degree);
    raw.resize(t.degree, rat_zero());
    raw
}

fn trim(mut p: Vec<BigRational>) -> Vec<BigRational> {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn poly_sub(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    let mut out = vec![rat_zero(); a.len().max(b.len())];
    for (i, c) in a.iter().enumerate() {
        out[i] += c;
    }
    for (i, c) in b.iter().enumerate() {
        out[i] -= c;
    }
    trim(out)
}

fn poly_mul(a: &[BigRational], b: &[BigRational]) -> Vec<BigRational> {
    if a.is_empty() || b.is_empty() {
        return vec![];
    }
    let mut out = vec![rat_zero(); a.len() + b.len() - 1];
    for (i, ca) in a.iter().enumerate() {
        if ca.is_zero() {
            continue;
        }
        for (j, cb) in b.iter().enumerate() {
            if !cb.is_zero() {
                out[i + j] += ca * cb;
            }
        }
    }
    trim(out)
}

fn poly_divmod(num: &[BigRational], den: &[BigRational]) -> (Vec<BigRational>, Vec<BigRational>) {
    assert!(!den.is_empty(), "division by zero polynomial");
    let mut rem = num.to_vec();
    let dd = den.len() - 1;
    if rem.len() <= dd {
        return (vec![], trim(rem));
    }
    let lead = den[dd].recip();
    let mut quot = vec![rat_zero(); rem.len() - dd];
    for k in (dd..rem.len()).rev() {
        if rem[k].is_zero() {
            continue;
        }
        let q = &rem[k] * &lead;
        quot[k - dd] = q.clone();
        for (i, c) in den.iter().enumerate() {
            if !c.is_zero() {
                let delta = &q * c;
                rem[k - dd + i] -= delta;
            }
        }
    }
    (trim(quot), trim(rem))
}

impl fmt::Debug for Cyc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = vec![];
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if k == 0 {
                terms.push(format!("{c}"));
            } else if c.is_one() {
                terms.push(format!("z{}^{k}", self.order));
            } else {
                terms.push(format!("{c}*z{}^{k}", self.order));
            }
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

macro_rules! check_orders {
    ($a:expr, $b:expr) => {
        assert_eq!(
            $a.order, $b.order,
            "mixed cyclotomic orders in arithmetic"
        );
    };
}

impl Add for &Cyc {
    type Output = Cyc;
    fn add(self, rhs: &Cyc) -> Cyc {
        check_orders!(self, rhs);
        Cyc {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &Cyc {
    type Output = Cyc;
    fn sub(self, rhs: &Cyc) -> Cyc {
        check_orders!(self, rhs);
        Cyc {
            order: self.order,
            coeffs: self
                .coeffs
                .iter()
                .zip(&rhs.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &Cyc {
    type Output = Cyc;
    fn mul(self, rhs: &Cyc) -> Cyc {
        check_orders!(self, rhs);
        let t = table(self.order);
        let mut raw = vec![rat_zero(); 2 * t.degree.max(1)];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    raw[i + j] += a * b;
                }
            }
        }
        Cyc {
            order: self.order,
            coeffs: reduce(&t, raw),
        }
    }
}

impl Neg for &Cyc {
    type Output = Cyc;
    fn neg(self) -> Cyc {
        Cyc {
            order: self.order,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

impl Add for Cyc {
    type Output = Cyc;
    fn add(self, rhs: Cyc) -> Cyc {
        &self + &rhs
    }
}

impl Sub for Cyc {
    type Output = Cyc;
    fn sub(self, rhs: Cyc) -> Cyc {
        &self - &rhs
    }
}

impl Mul for Cyc {
    type Output = Cyc;
    fn mul(self, rhs: Cyc) -> Cyc {
        &self * &rhs
    }
}

impl Neg for Cyc {
    type Output = Cyc;
    fn neg(self) -> Cyc {
        -&self
    }
}

impl AddAssign<&Cyc> for Cyc {
    fn add_assign(&mut self, rhs: &Cyc) {
        check_orders!(self, rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
    }
}

impl SubAssign<&Cyc> for Cyc {
    fn sub_assign(&mut self, rhs: &Cyc) {
        check_orders!(self, rhs);
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cyclotomic_polynomials_match_known_values() {
        assert_eq!(cyclotomic_polynomial(1), vec![-1, 1]);
        assert_eq!(cyclotomic_polynomial(2), vec![1, 1]);
        assert_eq!(cyclotomic_polynomial(3), vec![1, 1, 1]);
        assert_eq!(cyclotomic_polynomial(4), vec![1, 0, 1]);
        assert_eq!(cyclotomic_polynomial(6), vec![1, -1, 1]);
        assert_eq!(cyclotomic_polynomial(12), vec![1, 0, -1, 0, 1]);
        // degree equals Euler's totient
        assert_eq!(cyclotomic_polynomial(20).len() - 1, 8);
        assert_eq!(cyclotomic_polynomial(60).len() - 1, 16);
    }

    #[test]
    fn primitive_root_sums_vanish() {
        // 1 + z + z^2 + ... + z^(p-1) = 0 for prime p
        for p in [3u32, 5, 7, 13] {
            let mut acc = Cyc::zero(p);
            for e in 0..p {
                acc += &Cyc::root(p, e as i64);
            }
            assert!(acc.is_zero(), "root sum nonzero for order {p}");
        }
    }

    #[test]
    fn root_exponent_arithmetic() {
        let z = Cyc::root(12, 1);
        let mut p = Cyc::one(12);
        for k in 0..12 {
            assert_eq!(p, Cyc::root(12, k));
            p = &p * &z;
        }
        assert_eq!(p, Cyc::one(12));
        assert_eq!(Cyc::root(12, -1), Cyc::root(12, 11));
    }

    #[test]
    fn inverse_and_conjugate() {
        let a = &Cyc::root(20, 3) + &Cyc::integer(20, 2);
        let inv = a.inv().expect("nonzero");
        assert_eq!(&a * &inv, Cyc::one(20));
        assert!(Cyc::zero(20).inv().is_none());

        // a * conj(a) is a nonnegative rational times nothing imaginary:
        // check numerically that it is real.
        let m = (&a * &a.conj()).eval();
        assert!(m.im.abs() < 1e-12);
        assert!(m.re > 0.0);
    }

    #[test]
    fn eval_matches_complex_exponentials() {
        for (order, e) in [(4u32, 1i64), (6, 1), (8, 3), (12, 7)] {
            let v = Cyc::root(order, e).eval();
            let angle = TAU * (e as f64) / (order as f64);
            assert!((v - Complex64::new(angle.cos(), angle.sin())).norm() < 1e-14);
        }
        // i as a fourth root inside order 12
        let i = Cyc::root(12, 3).eval();
        assert!((i - Complex64::new(0.0, 1.0)).norm() < 1e-14);
    }

    fn arb_cyc(order: u32) -> impl Strategy<Value = Cyc> {
        prop::collection::vec(-4i64..=4, 0..6).prop_map(move |exps| {
            let mut acc = Cyc::zero(order);
            for (k, c) in exps.into_iter().enumerate() {
                acc += &Cyc::root(order, k as i64).scaled(&rat_int(c));
            }
            acc
        })
    }

    proptest! {
        #[test]
        fn ring_laws_order_12(a in arb_cyc(12), b in arb_cyc(12), c in arb_cyc(12)) {
            prop_assert_eq!(&(&a + &b) * &c, &(&a * &c) + &(&b * &c));
            prop_assert_eq!(&a * &b, &b * &a);
            prop_assert_eq!(&(&a * &b) * &c, &a * &(&b * &c));
        }

        #[test]
        fn inverse_round_trip(a in arb_cyc(20)) {
            if let Some(inv) = a.inv() {
                prop_assert_eq!(&a * &inv, Cyc::one(20));
            } else {
                prop_assert!(a.is_zero());
            }
        }

        #[test]
        fn eval_is_a_homomorphism(a in arb_cyc(24), b in arb_cyc(24)) {
            let lhs = (&a * &b).eval();
            let rhs = a.eval() * b.eval();
            prop_assert!((lhs - rhs).norm() < 1e-9 * (1.0 + lhs.norm()));
        }
    }
}
