//! Compact serde forms for bit and symbol vectors: bits as strings of `0`/`1`,
//! channel output symbols as lowercase hex with two digits per symbol.

use serde::{de::Error, Deserialize, Deserializer, Serializer};

pub fn encode_bits(v: &[u8]) -> String {
    v.iter().map(|&b| if b == 0 { '0' } else { '1' }).collect()
}

pub fn decode_bits(s: &str) -> Result<Vec<u8>, String> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            _ => Err(format!("invalid bit character {c:?}")),
        })
        .collect()
}

pub mod bits {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&encode_bits(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        decode_bits(&String::deserialize(d)?).map_err(D::Error::custom)
    }
}

pub mod bits_list {
    use super::*;
    use serde::Serialize;

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|b| encode_bits(b)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| decode_bits(s).map_err(D::Error::custom)).collect()
    }
}

pub mod symbols {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[u8], s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&hex::encode(v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<u8>, D::Error> {
        hex::decode(String::deserialize(d)?).map_err(D::Error::custom)
    }
}

pub mod symbols_list {
    use super::*;
    use serde::Serialize;

    pub fn serialize<S: Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(hex::encode).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<u8>>, D::Error> {
        Vec::<String>::deserialize(d)?.iter().map(|s| hex::decode(s).map_err(D::Error::custom)).collect()
    }
}

#[cfg(test)]
mod tests {
    use serde::{Deserialize, Serialize};

    #[derive(Serialize, Deserialize, PartialEq, Debug)]
    struct Sample {
        #[serde(with = "super::bits")]
        a: Vec<u8>,
        #[serde(with = "super::bits_list")]
        b: Vec<Vec<u8>>,
        #[serde(with = "super::symbols")]
        y: Vec<u8>,
    }

    #[test]
    fn round_trip() {
        let s = Sample { a: vec![1, 0, 1], b: vec![vec![], vec![0, 1]], y: vec![0, 2, 255] };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(text, r#"{"a":"101","b":["","01"],"y":"0002ff"}"#);
        assert_eq!(serde_json::from_str::<Sample>(&text).unwrap(), s);
        assert!(serde_json::from_str::<Sample>(r#"{"a":"12","b":[],"y":""}"#).is_err());
    }
}
