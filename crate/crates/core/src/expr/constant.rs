use std::fmt;

use num_rational::Ratio;

/// A numeric leaf of an expression tree.
///
/// Rationals are kept exact for as long as the arithmetic stays inside `i64`;
/// any overflow (or an operation on a real) promotes the result to `f64`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Constant {
    Rational(Ratio<i64>),
    Real(f64),
}

impl Constant {
    pub const ZERO: Constant = Constant::Rational(Ratio::new_raw(0, 1));
    pub const ONE: Constant = Constant::Rational(Ratio::new_raw(1, 1));

    pub fn integer(n: i64) -> Self {
        Constant::Rational(Ratio::from_integer(n))
    }

    /// Panics if `den == 0`.
    pub fn rational(num: i64, den: i64) -> Self {
        Constant::Rational(Ratio::new(num, den))
    }

    /// Stores `x` as an exact rational when it is integral and fits in `i64`.
    pub fn real(x: f64) -> Self {
        if x.fract() == 0.0 && x.abs() < 9.0e15 {
            Constant::integer(x as i64)
        } else {
            Constant::Real(x)
        }
    }

    pub fn value(&self) -> f64 {
        match *self {
            Constant::Rational(r) => *r.numer() as f64 / *r.denom() as f64,
            Constant::Real(x) => x,
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Constant::Rational(r) => *r.numer() == 0,
            Constant::Real(x) => *x == 0.0,
        }
    }

    pub fn is_one(&self) -> bool {
        match self {
            Constant::Rational(r) => *r.numer() == 1 && *r.denom() == 1,
            Constant::Real(x) => *x == 1.0,
        }
    }

    pub fn is_negative(&self) -> bool {
        match self {
            Constant::Rational(r) => *r.numer() < 0,
            Constant::Real(x) => *x < 0.0,
        }
    }

    pub fn neg(self) -> Self {
        match self {
            Constant::Rational(r) => match r.numer().checked_neg() {
                Some(n) => Constant::Rational(Ratio::new_raw(n, *r.denom())),
                None => Constant::Real(-self.value()),
            },
            Constant::Real(x) => Constant::Real(-x),
        }
    }

    pub fn add(self, other: Self) -> Self {
        match (self, other) {
            (Constant::Rational(a), Constant::Rational(b)) => checked_add(a, b)
                .map(Constant::Rational)
                .unwrap_or_else(|| Constant::Real(self.value() + other.value())),
            _ => Constant::Real(self.value() + other.value()),
        }
    }

    pub fn mul(self, other: Self) -> Self {
        match (self, other) {
            (Constant::Rational(a), Constant::Rational(b)) => checked_mul(a, b)
                .map(Constant::Rational)
                .unwrap_or_else(|| Constant::Real(self.value() * other.value())),
            _ => Constant::Real(self.value() * other.value()),
        }
    }

    /// `None` when dividing by an exact zero.
    pub fn div(self, other: Self) -> Option<Self> {
        if other.is_zero() {
            return None;
        }
        match (self, other) {
            (Constant::Rational(a), Constant::Rational(b)) => {
                let inv = Ratio::new(*b.denom(), *b.numer());
                Some(
                    checked_mul(a, inv)
                        .map(Constant::Rational)
                        .unwrap_or_else(|| Constant::Real(self.value() / other.value())),
                )
            }
            _ => Some(Constant::Real(self.value() / other.value())),
        }
    }

    /// `None` for a negative power of zero.
    pub fn powi(self, exp: i32) -> Option<Self> {
        if exp < 0 && self.is_zero() {
            return None;
        }
        let mut acc = Constant::ONE;
        for _ in 0..exp.unsigned_abs() {
            acc = acc.mul(self);
        }
        if exp < 0 {
            Constant::ONE.div(acc)
        } else {
            Some(acc)
        }
    }
}

fn checked_add(a: Ratio<i64>, b: Ratio<i64>) -> Option<Ratio<i64>> {
    let num = a.numer().checked_mul(*b.denom())?.checked_add(b.numer().checked_mul(*a.denom())?)?;
    let den = a.denom().checked_mul(*b.denom())?;
    Some(Ratio::new(num, den))
}

fn checked_mul(a: Ratio<i64>, b: Ratio<i64>) -> Option<Ratio<i64>> {
    let num = a.numer().checked_mul(*b.numer())?;
    let den = a.denom().checked_mul(*b.denom())?;
    Some(Ratio::new(num, den))
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Rational(r) if *r.denom() == 1 => write!(f, "{}", r.numer()),
            Constant::Rational(r) => write!(f, "{}/{}", r.numer(), r.denom()),
            Constant::Real(x) => write!(f, "{x}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rational_arithmetic_is_exact() {
        let third = Constant::rational(1, 3);
        let sum = third.add(third).add(third);
        assert_eq!(sum, Constant::ONE);
        assert_eq!(Constant::integer(2).powi(-2), Some(Constant::rational(1, 4)));
    }

    #[test]
    fn overflow_promotes_to_real() {
        let big = Constant::integer(i64::MAX / 2);
        let prod = big.mul(Constant::integer(4));
        assert!(matches!(prod, Constant::Real(_)));
        assert!((prod.value() - 2.0 * i64::MAX as f64).abs() / prod.value() < 1e-12);
    }

    #[test]
    fn division_by_zero_is_rejected() {
        assert_eq!(Constant::ONE.div(Constant::ZERO), None);
        assert_eq!(Constant::ZERO.powi(-1), None);
    }
}
