//! Serde helpers that write doubles with 17 significant digits.
//!
//! Seventeen digits is enough for any binary64 value to read back bit-exact.

use serde::ser::{SerializeSeq, Serializer};
use serde_json::Number;

fn number(x: f64) -> Number {
    // `{:e}` with 16 fractional digits yields 17 significant digits.
    format!("{x:.16e}").parse().expect("finite double formats as a json number")
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    if !x.is_finite() {
        return Err(serde::ser::Error::custom("non-finite double"));
    }
    serde::Serialize::serialize(&number(*x), s)
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            if !x.is_finite() {
                return Err(serde::ser::Error::custom("non-finite double"));
            }
            seq.serialize_element(&number(*x))?;
        }
        seq.end()
    }
}

pub mod pairs {
    use super::*;

    pub fn serialize<S: Serializer>(xs: &[[f64; 2]], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for [re, im] in xs {
            if !re.is_finite() || !im.is_finite() {
                return Err(serde::ser::Error::custom("non-finite double"));
            }
            seq.serialize_element(&[number(*re), number(*im)])?;
        }
        seq.end()
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Wrap {
        #[serde(serialize_with = "super::serialize")]
        x: f64,
    }

    #[test]
    fn writes_seventeen_digits() {
        let s = serde_json::to_string(&Wrap { x: 0.5 }).unwrap();
        assert_eq!(s, r#"{"x":5.0000000000000000e-1}"#);
    }

    proptest! {
        #[test]
        fn round_trips_bit_exact(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let s = serde_json::to_string(&Wrap { x }).unwrap();
            let back: Wrap = serde_json::from_str(&s).unwrap();
            prop_assert_eq!(back.x.to_bits(), x.to_bits());
        }
    }
}
