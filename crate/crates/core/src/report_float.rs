//! JSON has no infinity; report values that can be unbounded are written as
//! numbers when finite and as the strings `"inf"`, `"-inf"` or `"nan"` otherwise.

use serde::Serializer;

use crate::Scalar;

pub(crate) fn serialize<T: Scalar, S: Serializer>(value: &T, s: S) -> Result<S::Ok, S::Error> {
    let v = value.as_f64();
    if v.is_finite() {
        s.serialize_f64(v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

pub(crate) mod vec {
    use serde::ser::{SerializeSeq, Serializer};

    use crate::Scalar;

    struct Wrapped<T>(T);

    impl<T: Scalar> serde::Serialize for Wrapped<T> {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            super::serialize(&self.0, s)
        }
    }

    pub(crate) fn serialize<T: Scalar, S: Serializer>(
        values: &[T],
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for &v in values {
            seq.serialize_element(&Wrapped(v))?;
        }
        seq.end()
    }
}
