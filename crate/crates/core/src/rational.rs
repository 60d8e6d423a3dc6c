//! Exact rational exponents.
//!
//! Brascamp-Lieb exponents are stored as reduced integer fractions so that
//! the scaling condition can be checked exactly; they are converted to
//! floating point only inside objective evaluations.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// A reduced fraction `num/den` with `den > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ratio {
    num: i64,
    den: i64,
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Ratio {
    pub fn new(num: i64, den: i64) -> Self {
        assert!(den != 0, "zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num, den).max(1);
        Ratio {
            num: sign * num / g,
            den: sign * den / g,
        }
    }

    pub fn num(&self) -> i64 {
        self.num
    }

    pub fn den(&self) -> i64 {
        self.den
    }

    pub fn to_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    /// True when the fraction lies in the half-open interval (0, 1].
    pub fn in_unit_interval(&self) -> bool {
        self.num > 0 && self.num <= self.den
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

/// Checks Σ q_j · w_j == target exactly, with i128 cross-multiplication.
pub fn weighted_sum_equals(terms: &[(Ratio, i64)], target: i64) -> bool {
    // Accumulate Σ num_j * w_j / den_j as a single fraction.
    let mut num: i128 = 0;
    let mut den: i128 = 1;
    for (q, w) in terms {
        num = num * q.den as i128 + den * (q.num as i128) * (*w as i128);
        den *= q.den as i128;
    }
    num == den * target as i128
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        // Strings keep the exponents exact in JSON artifacts.
        [self.num.to_string(), self.den.to_string()].serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let parts: [String; 2] = Deserialize::deserialize(de)?;
        let num: i64 = parts[0].parse().map_err(DeError::custom)?;
        let den: i64 = parts[1].parse().map_err(DeError::custom)?;
        if den == 0 {
            return Err(DeError::custom("zero denominator"));
        }
        Ok(Ratio::new(num, den))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reduction_and_sign() {
        let r = Ratio::new(2, -4);
        assert_eq!((r.num(), r.den()), (-1, 2));
        assert_eq!(Ratio::new(3, 6), Ratio::new(1, 2));
    }

    #[test]
    fn exact_scaling_sum() {
        // 1/2 * 2 + 1/2 * 2 + 1/2 * 2 == 3
        let p = Ratio::new(1, 2);
        assert!(weighted_sum_equals(&[(p, 2), (p, 2), (p, 2)], 3));
        assert!(!weighted_sum_equals(&[(p, 2), (p, 2)], 3));
    }

    #[test]
    fn json_round_trip_is_exact() {
        let r = Ratio::new(1, 3);
        let s = serde_json::to_string(&r).unwrap();
        assert_eq!(s, r#"["1","3"]"#);
        let back: Ratio = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }
}
