//! Exact arithmetic over prime fields `F_q`.
//!
//! A [`FieldElement`] carries its modulus so that values from two different
//! fields can never be silently combined. The operator impls (`+`, `-`, `*`,
//! unary `-`) panic on a modulus mismatch; the `checked_*` methods and
//! [`arith`] report it as [`FieldError::ModulusMismatch`] instead.

mod matrix;

pub use matrix::{build_cauchy, FpMatrix, MinorViolation};

use std::fmt;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use rand::Rng;
use thiserror::Error;

/// Largest modulus accepted. Keeps every product of two residues inside `u64`.
pub const MAX_MODULUS: u64 = (1 << 31) - 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not prime")]
    NotPrime(u64),
    #[error("modulus {0} is outside the supported range [2, 2^31)")]
    ModulusOutOfRange(u64),
    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u32, right: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("matrix is singular (no pivot in column {pivot_col})")]
    Singular { pivot_col: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("cauchy matrix of size {rows}x{cols} needs q >= {needed}, got {q}")]
    CauchyTooSmall {
        rows: usize,
        cols: usize,
        q: u64,
        needed: u64,
    },
}

/// Deterministic trial division; moduli stay below 2^31.
pub fn is_prime(q: u64) -> bool {
    if q < 2 {
        return false;
    }
    if q < 4 {
        return true;
    }
    if q.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= q {
        if q.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// Smallest prime `>= from`.
pub fn next_prime(from: u64) -> u64 {
    let mut q = from.max(2);
    while !is_prime(q) {
        q += 1;
    }
    q
}

/// A prime field `F_q`. Cheap to copy; acts as the factory for its elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PrimeField {
    q: u32,
}

impl PrimeField {
    pub fn new(q: u64) -> Result<Self, FieldError> {
        if !(2..=MAX_MODULUS).contains(&q) {
            return Err(FieldError::ModulusOutOfRange(q));
        }
        if !is_prime(q) {
            return Err(FieldError::NotPrime(q));
        }
        Ok(Self { q: q as u32 })
    }

    pub fn modulus(&self) -> u32 {
        self.q
    }

    /// The element `value mod q`.
    pub fn element(&self, value: u64) -> FieldElement {
        FieldElement {
            value: (value % self.q as u64) as u32,
            modulus: self.q,
        }
    }

    /// Maps a signed integer to its residue, so `-1` becomes `q - 1`.
    pub fn from_i64(&self, value: i64) -> FieldElement {
        let q = self.q as i64;
        self.element(value.rem_euclid(q) as u64)
    }

    pub fn zero(&self) -> FieldElement {
        self.element(0)
    }

    pub fn one(&self) -> FieldElement {
        self.element(1)
    }

    pub fn elements(&self) -> impl Iterator<Item = FieldElement> + '_ {
        (0..self.q as u64).map(move |v| self.element(v))
    }

    pub fn vector(&self, values: &[u64]) -> Vec<FieldElement> {
        values.iter().map(|&v| self.element(v)).collect()
    }

    pub fn zeros(&self, len: usize) -> Vec<FieldElement> {
        vec![self.zero(); len]
    }

    /// Uniform draw from all of `F_q`.
    pub fn random<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldElement {
        self.element(rng.gen_range(0..self.q) as u64)
    }

    pub fn random_vector<R: Rng + ?Sized>(&self, rng: &mut R, len: usize) -> Vec<FieldElement> {
        (0..len).map(|_| self.random(rng)).collect()
    }

    /// Bits carried by one symbol, `log2 q`.
    pub fn symbol_bits(&self) -> f64 {
        (self.q as f64).log2()
    }
}

impl fmt::Display for PrimeField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "F_{}", self.q)
    }
}

/// A residue in `[0, q)` tagged with its modulus `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u32,
    modulus: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
}

/// Checked binary arithmetic on two elements of the same field.
pub fn arith(a: FieldElement, b: FieldElement, op: ArithOp) -> Result<FieldElement, FieldError> {
    match op {
        ArithOp::Add => a.checked_add(b),
        ArithOp::Sub => a.checked_sub(b),
        ArithOp::Mul => a.checked_mul(b),
    }
}

impl FieldElement {
    pub fn value(self) -> u32 {
        self.value
    }

    pub fn modulus(self) -> u32 {
        self.modulus
    }

    pub fn field(self) -> PrimeField {
        PrimeField { q: self.modulus }
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    fn same_field(self, other: Self) -> Result<(), FieldError> {
        if self.modulus == other.modulus {
            Ok(())
        } else {
            Err(FieldError::ModulusMismatch {
                left: self.modulus,
                right: other.modulus,
            })
        }
    }

    fn with_value(self, value: u64) -> Self {
        Self {
            value: value as u32,
            modulus: self.modulus,
        }
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        let q = self.modulus as u64;
        Ok(self.with_value((self.value as u64 + rhs.value as u64) % q))
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        let q = self.modulus as u64;
        Ok(self.with_value((self.value as u64 + q - rhs.value as u64) % q))
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, FieldError> {
        self.same_field(rhs)?;
        let q = self.modulus as u64;
        Ok(self.with_value(self.value as u64 * rhs.value as u64 % q))
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let q = self.modulus as i64;
        let (mut r0, mut r1) = (q, self.value as i64);
        let (mut t0, mut t1) = (0i64, 1i64);
        while r1 != 0 {
            let quot = r0 / r1;
            (r0, r1) = (r1, r0 - quot * r1);
            (t0, t1) = (t1, t0 - quot * t1);
        }
        debug_assert_eq!(r0, 1, "modulus is prime");
        Ok(self.with_value(t0.rem_euclid(q) as u64))
    }

    pub fn pow(self, mut exp: u64) -> Self {
        let q = self.modulus as u64;
        let mut base = self.value as u64;
        let mut acc = 1 % q;
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base % q;
            }
            base = base * base % q;
            exp >>= 1;
        }
        self.with_value(acc)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $checked:ident, $assign_trait:ident, $assign:ident) => {
        impl $trait for FieldElement {
            type Output = FieldElement;

            fn $method(self, rhs: FieldElement) -> FieldElement {
                match self.$checked(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("{e}"),
                }
            }
        }

        impl $assign_trait for FieldElement {
            fn $assign(&mut self, rhs: FieldElement) {
                *self = $trait::$method(*self, rhs);
            }
        }
    };
}

binop!(Add, add, checked_add, AddAssign, add_assign);
binop!(Sub, sub, checked_sub, SubAssign, sub_assign);
binop!(Mul, mul, checked_mul, MulAssign, mul_assign);

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        let q = self.modulus as u64;
        self.with_value((q - self.value as u64) % q)
    }
}

/// Inner product of two equal-length vectors over the same field.
pub fn dot(a: &[FieldElement], b: &[FieldElement]) -> Result<FieldElement, FieldError> {
    if a.len() != b.len() {
        return Err(FieldError::Dimension(format!(
            "dot product of lengths {} and {}",
            a.len(),
            b.len()
        )));
    }
    let first = a
        .first()
        .ok_or_else(|| FieldError::Dimension("dot product of empty vectors".into()))?;
    let mut acc = first.field().zero();
    for (&x, &y) in a.iter().zip(b) {
        acc = acc.checked_add(x.checked_mul(y)?)?;
    }
    Ok(acc)
}

pub fn hamming_distance(a: &[FieldElement], b: &[FieldElement]) -> usize {
    assert_eq!(a.len(), b.len(), "hamming distance needs equal lengths");
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

pub fn add_vectors(a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

pub fn sub_vectors(a: &[FieldElement], b: &[FieldElement]) -> Vec<FieldElement> {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Raw residues, for serialization and hashing.
pub fn values(v: &[FieldElement]) -> Vec<u32> {
    v.iter().map(|x| x.value()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_xoshiro::SplitMix64;

    fn f11() -> PrimeField {
        PrimeField::new(11).unwrap()
    }

    #[test]
    fn arith_examples() {
        let f = f11();
        assert_eq!(arith(f.element(7), f.element(8), ArithOp::Add).unwrap(), f.element(4));
        assert_eq!(arith(f.element(3), f.element(4), ArithOp::Mul).unwrap(), f.element(1));
        for a in f.elements() {
            assert!(arith(a, f.zero(), ArithOp::Mul).unwrap().is_zero());
        }
        assert_eq!(arith(f.element(2), f.element(5), ArithOp::Sub).unwrap(), f.element(8));
    }

    #[test]
    fn modulus_mismatch_is_an_error() {
        let a = f11().element(3);
        let b = PrimeField::new(13).unwrap().element(3);
        assert_eq!(
            arith(a, b, ArithOp::Add),
            Err(FieldError::ModulusMismatch { left: 11, right: 13 })
        );
    }

    #[test]
    #[should_panic(expected = "modulus mismatch")]
    fn operator_panics_on_mismatch() {
        let _ = f11().element(1) + PrimeField::new(13).unwrap().element(1);
    }

    #[test]
    fn inverse_examples() {
        assert_eq!(f11().element(3).inv().unwrap(), f11().element(4));
        let f13 = PrimeField::new(13).unwrap();
        assert_eq!(f13.element(5).inv().unwrap(), f13.element(8));
        for q in [2, 3, 5, 7, 11, 13, 65537] {
            let f = PrimeField::new(q).unwrap();
            assert_eq!(f.one().inv().unwrap(), f.one());
        }
        assert_eq!(f11().zero().inv(), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn primality() {
        let primes: Vec<u64> = (0..50).filter(|&q| is_prime(q)).collect();
        assert_eq!(primes, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
        assert_eq!(PrimeField::new(12), Err(FieldError::NotPrime(12)));
        assert_eq!(PrimeField::new(1), Err(FieldError::ModulusOutOfRange(1)));
        assert!(PrimeField::new(MAX_MODULUS).is_ok());
        assert_eq!(next_prime(12), 13);
        assert_eq!(next_prime(13), 13);
    }

    #[test]
    fn negative_residues() {
        let f = PrimeField::new(13).unwrap();
        assert_eq!(f.from_i64(-1), f.element(12));
        assert_eq!(-f.element(1), f.element(12));
        assert_eq!(-f.zero(), f.zero());
    }

    #[test]
    fn fermat_spot_check() {
        let mut rng = SplitMix64::seed_from_u64(7);
        for q in [2u64, 3, 11, 13, 101, 65537, 2_147_483_647] {
            let f = PrimeField::new(q).unwrap();
            for _ in 0..50 {
                let a = f.random(&mut rng);
                assert_eq!(a.pow(q), a);
            }
        }
    }

    fn triple() -> impl Strategy<Value = (u64, u64, u64, u64)> {
        prop::sample::select(vec![2u64, 3, 11, 13, 257, 65537, 2_147_483_647])
            .prop_flat_map(|q| (Just(q), 0..q, 0..q, 0..q))
    }

    proptest! {
        #[test]
        fn field_axioms((q, a, b, c) in triple()) {
            let f = PrimeField::new(q).unwrap();
            let (a, b, c) = (f.element(a), f.element(b), f.element(c));
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert_eq!(a - b + b, a);
            if !a.is_zero() {
                prop_assert_eq!(a * a.inv().unwrap(), f.one());
            }
        }
    }
}
