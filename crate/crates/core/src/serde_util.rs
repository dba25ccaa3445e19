//! `f64` vectors that may hold `inf`, written as the string `"inf"` so they
//! survive JSON.

pub(crate) mod vec_f64_inf {
    use serde::de::{self, Deserializer};
    use serde::ser::{SerializeSeq, Serializer};
    use serde::Deserialize;

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(values: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(values.len()))?;
        for v in values {
            if v.is_infinite() && *v > 0.0 {
                seq.serialize_element("inf")?;
            } else {
                seq.serialize_element(v)?;
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let entries = Vec::<Entry>::deserialize(d)?;
        entries
            .into_iter()
            .map(|e| match e {
                Entry::Num(v) => Ok(v),
                Entry::Text(t) => parse_inf(&t).ok_or_else(|| de::Error::custom(format!("bad number {t:?}"))),
            })
            .collect()
    }

    pub(crate) fn parse_inf(t: &str) -> Option<f64> {
        match t.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Some(f64::INFINITY),
            other => other.parse().ok(),
        }
    }
}

pub(crate) mod f64_inf {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Entry {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Entry::deserialize(d)? {
            Entry::Num(v) => Ok(v),
            Entry::Text(t) => super::vec_f64_inf::parse_inf(&t)
                .ok_or_else(|| serde::de::Error::custom(format!("bad number {t:?}"))),
        }
    }
}

/// Lowercase hex SHA-256 of the JSON encoding of `value`.
pub(crate) fn json_sha256<T: serde::Serialize>(value: &T) -> String {
    use sha2::{Digest, Sha256};
    let bytes = serde_json::to_vec(value).expect("in-memory JSON encoding");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}
