//! Persistence of a shuffled batch: one JSON header line followed by one
//! `index,increment` line per message.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::multi::ShuffleMessage;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatchHeader {
    pub d: usize,
    #[serde(rename = "M")]
    pub modulus: u64,
    pub n: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub mechanism: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShuffledBatch {
    pub header: BatchHeader,
    pub messages: Vec<ShuffleMessage>,
}

impl ShuffledBatch {
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer(&mut out, &self.header)?;
        writeln!(out)?;
        for m in &self.messages {
            writeln!(out, "{},{}", m.index, m.increment)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_from<B: BufRead>(input: B) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines.next().ok_or_else(|| Error::Wire("empty batch".into()))??;
        let header: BatchHeader = serde_json::from_str(&first)?;
        let mut messages = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let bad = || Error::Wire(format!("line {}: expected `index,increment`, got {line:?}", i + 2));
            let (index, increment) = line.split_once(',').ok_or_else(bad)?;
            let message = ShuffleMessage {
                index: index.trim().parse().map_err(|_| bad())?,
                increment: increment.trim().parse().map_err(|_| bad())?,
            };
            if message.index as usize >= header.d || message.increment >= header.modulus {
                return Err(bad());
            }
            messages.push(message);
        }
        Ok(Self { header, messages })
    }
}
