//! Wire format for private reports: a length-prefixed binary frame and a
//! JSON form for debugging.
//!
//! Binary frame: `u32` little-endian body length, then the body
//! `mechanism_id: u8`, then per mechanism
//! - randomized response: `u32` bit count followed by bits packed LSB first,
//! - Collision: `hash_seed: u64`, `message: u64`,
//! - GSE: `u32` element count followed by `u32` indices.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MechanismId {
    RandomizedResponse = 1,
    Collision = 2,
    Gse = 3,
}

impl TryFrom<u8> for MechanismId {
    type Error = Error;

    fn try_from(value: u8) -> Result<Self> {
        match value {
            1 => Ok(Self::RandomizedResponse),
            2 => Ok(Self::Collision),
            3 => Ok(Self::Gse),
            other => Err(Error::Wire(format!("unknown mechanism id {other}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum PrivateReport {
    RandomizedResponse { bits: Vec<bool> },
    Collision { hash_seed: u64, message: u64 },
    Gse { subset: Vec<u32> },
}

#[derive(Serialize, Deserialize)]
struct JsonReport {
    mechanism_id: u8,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    hash_seed: Option<u64>,
    payload: Value,
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Wire(format!("truncated frame: need {n} bytes, have {}", self.bytes.len())));
        }
        let (head, tail) = self.bytes.split_at(n);
        self.bytes = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

impl PrivateReport {
    pub fn mechanism_id(&self) -> MechanismId {
        match self {
            Self::RandomizedResponse { .. } => MechanismId::RandomizedResponse,
            Self::Collision { .. } => MechanismId::Collision,
            Self::Gse { .. } => MechanismId::Gse,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut body = vec![self.mechanism_id() as u8];
        match self {
            Self::RandomizedResponse { bits } => {
                body.extend((bits.len() as u32).to_le_bytes());
                for chunk in bits.chunks(8) {
                    body.push(chunk.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b as u8) << i)));
                }
            }
            Self::Collision { hash_seed, message } => {
                body.extend(hash_seed.to_le_bytes());
                body.extend(message.to_le_bytes());
            }
            Self::Gse { subset } => {
                body.extend((subset.len() as u32).to_le_bytes());
                for z in subset {
                    body.extend(z.to_le_bytes());
                }
            }
        }
        let mut frame = (body.len() as u32).to_le_bytes().to_vec();
        frame.extend(body);
        frame
    }

    /// Decodes one frame, returning the report and the number of bytes consumed.
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, usize)> {
        let mut outer = Reader { bytes };
        let len = outer.u32()? as usize;
        let mut r = Reader { bytes: outer.take(len)? };
        let report = match MechanismId::try_from(r.take(1)?[0])? {
            MechanismId::RandomizedResponse => {
                let n = r.u32()? as usize;
                let packed = r.take(n.div_ceil(8))?;
                let bits = (0..n).map(|i| packed[i / 8] >> (i % 8) & 1 == 1).collect();
                Self::RandomizedResponse { bits }
            }
            MechanismId::Collision => Self::Collision { hash_seed: r.u64()?, message: r.u64()? },
            MechanismId::Gse => {
                let n = r.u32()? as usize;
                let subset = (0..n).map(|_| r.u32()).collect::<Result<_>>()?;
                Self::Gse { subset }
            }
        };
        if !r.bytes.is_empty() {
            return Err(Error::Wire(format!("{} trailing bytes in frame", r.bytes.len())));
        }
        Ok((report, 4 + len))
    }

    /// Decodes a concatenation of frames.
    pub fn decode_stream(mut bytes: &[u8]) -> Result<Vec<Self>> {
        let mut out = Vec::new();
        while !bytes.is_empty() {
            let (report, used) = Self::from_bytes(bytes)?;
            out.push(report);
            bytes = &bytes[used..];
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let (hash_seed, payload) = match self {
            Self::RandomizedResponse { bits } => (None, Value::from(bits.iter().map(|&b| b as u8).collect::<Vec<_>>())),
            Self::Collision { hash_seed, message } => (Some(*hash_seed), Value::from(*message)),
            Self::Gse { subset } => (None, Value::from(subset.clone())),
        };
        Ok(serde_json::to_string(&JsonReport { mechanism_id: self.mechanism_id() as u8, hash_seed, payload })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let json: JsonReport = serde_json::from_str(text)?;
        let bad = |what: &str| Error::Wire(format!("malformed {what} payload"));
        let id = MechanismId::try_from(json.mechanism_id)?;
        if (id == MechanismId::Collision) != json.hash_seed.is_some() {
            return Err(Error::Wire("hash_seed is present exactly for Collision reports".into()));
        }
        Ok(match id {
            MechanismId::RandomizedResponse => {
                let bits = serde_json::from_value::<Vec<u8>>(json.payload).map_err(|_| bad("bitset"))?;
                if bits.iter().any(|&b| b > 1) {
                    return Err(bad("bitset"));
                }
                Self::RandomizedResponse { bits: bits.into_iter().map(|b| b == 1).collect() }
            }
            MechanismId::Collision => Self::Collision {
                hash_seed: json.hash_seed.expect("checked above"),
                message: json.payload.as_u64().ok_or_else(|| bad("message"))?,
            },
            MechanismId::Gse => Self::Gse {
                subset: serde_json::from_value(json.payload).map_err(|_| bad("subset"))?,
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn samples() -> Vec<PrivateReport> {
        vec![
            PrivateReport::RandomizedResponse { bits: vec![true, false, false, true, true, false, true, false, true] },
            PrivateReport::RandomizedResponse { bits: vec![] },
            PrivateReport::Collision { hash_seed: u64::MAX - 3, message: 17 },
            PrivateReport::Gse { subset: vec![0, 4, 9] },
        ]
    }

    #[test]
    fn binary_round_trip() {
        let mut stream = Vec::new();
        for report in samples() {
            let bytes = report.to_bytes();
            assert_eq!(PrivateReport::from_bytes(&bytes).unwrap(), (report.clone(), bytes.len()));
            stream.extend(bytes);
        }
        assert_eq!(PrivateReport::decode_stream(&stream).unwrap(), samples());
    }

    #[test]
    fn collision_frame_layout() {
        let bytes = PrivateReport::Collision { hash_seed: 1, message: 2 }.to_bytes();
        assert_eq!(bytes.len(), 4 + 1 + 16);
        assert_eq!(&bytes[..5], &[17, 0, 0, 0, 2]);
    }

    #[test]
    fn json_round_trip() {
        for report in samples() {
            assert_eq!(PrivateReport::from_json(&report.to_json().unwrap()).unwrap(), report);
        }
        let text = PrivateReport::Collision { hash_seed: 5, message: 3 }.to_json().unwrap();
        assert_eq!(text, r#"{"mechanism_id":2,"hash_seed":5,"payload":3}"#);
    }

    #[test]
    fn rejects_malformed() {
        assert!(PrivateReport::from_bytes(&[1, 0, 0, 0, 9]).is_err());
        assert!(PrivateReport::from_bytes(&[5, 0, 0, 0, 2, 0]).is_err());
        assert!(PrivateReport::from_json(r#"{"mechanism_id":2,"payload":3}"#).is_err());
        assert!(PrivateReport::from_json(r#"{"mechanism_id":1,"payload":[0,2]}"#).is_err());
        let mut bytes = PrivateReport::Gse { subset: vec![1] }.to_bytes();
        bytes[0] += 1;
        bytes.push(0);
        assert!(PrivateReport::from_bytes(&bytes).is_err());
    }

    proptest! {
        #[test]
        fn arbitrary_bitsets_round_trip(bits in proptest::collection::vec(any::<bool>(), 0..70)) {
            let report = PrivateReport::RandomizedResponse { bits };
            prop_assert_eq!(PrivateReport::from_bytes(&report.to_bytes()).unwrap().0, report.clone());
            prop_assert_eq!(PrivateReport::from_json(&report.to_json().unwrap()).unwrap(), report);
        }
    }
}
