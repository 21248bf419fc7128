//! Serde adapters that write NaN as `null` and read `null` back as NaN.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn wrap(v: f64) -> Option<f64> {
    (!v.is_nan()).then_some(v)
}

pub mod scalar {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        wrap(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

pub mod vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|&x| wrap(x)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
    }
}

pub mod map {
    use std::collections::BTreeMap;

    use super::*;

    pub fn serialize<K: Serialize + Ord, S: Serializer>(v: &BTreeMap<K, f64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|(k, &x)| (k, wrap(x))).collect::<BTreeMap<_, _>>().serialize(s)
    }

    pub fn deserialize<'de, K, D>(d: D) -> Result<BTreeMap<K, f64>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        D: Deserializer<'de>,
    {
        Ok(BTreeMap::<K, Option<f64>>::deserialize(d)?.into_iter().map(|(k, x)| (k, x.unwrap_or(f64::NAN))).collect())
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize)]
    struct Probe {
        #[serde(with = "super::scalar")]
        a: f64,
        #[serde(with = "super::vec")]
        b: Vec<f64>,
    }

    #[test]
    fn nan_round_trips_through_null() {
        let json = serde_json::to_string(&Probe { a: f64::NAN, b: vec![1.5, f64::NAN] }).unwrap();
        assert_eq!(json, r#"{"a":null,"b":[1.5,null]}"#);
        let back: Probe = serde_json::from_str(&json).unwrap();
        assert!(back.a.is_nan() && back.b[0] == 1.5 && back.b[1].is_nan());
    }
}
