//! Append-only event log, one JSON object per line.
//!
//! Every record carries `time_ms node face dir pkt_type name`. Packet
//! records also carry a short wire digest and size so byte-level equality
//! of retransmissions can be checked from the log alone. Application
//! records put their specifics under `detail`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::crypto::sha256;
use crate::packet::PacketKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dir {
    Tx,
    Rx,
    Drop,
    Adv,
    App,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub time_ms: u64,
    pub node: String,
    pub face: Option<u32>,
    pub dir: Dir,
    pub pkt_type: Option<PacketKind>,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Map::is_empty")]
    pub detail: Map<String, Value>,
}

impl LogRecord {
    pub fn event(&self) -> Option<&str> {
        self.detail.get("event").and_then(Value::as_str)
    }

    pub fn detail_str(&self, key: &str) -> Option<&str> {
        self.detail.get(key).and_then(Value::as_str)
    }

    pub fn detail_u64(&self, key: &str) -> Option<u64> {
        self.detail.get(key).and_then(Value::as_u64)
    }
}

/// First 8 bytes of SHA-256 over the wire encoding, hex.
pub fn wire_digest(wire: &[u8]) -> String {
    sha256(wire)[..8].iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Removes and returns everything logged so far.
    pub fn drain(&mut self) -> Vec<LogRecord> {
        std::mem::take(&mut self.records)
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_ndjson(&self) -> String {
        let mut out = Vec::new();
        self.write_ndjson(&mut out).expect("writing to a Vec");
        String::from_utf8(out).expect("JSON is UTF-8")
    }

    pub fn parse_ndjson(text: &str) -> Result<Vec<LogRecord>, serde_json::Error> {
        text.lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ndjson_round_trip() {
        let mut log = EventLog::new();
        let mut detail = Map::new();
        detail.insert("event".into(), "exec".into());
        log.push(LogRecord {
            time_ms: 5,
            node: "fix1".into(),
            face: Some(1),
            dir: Dir::Tx,
            pkt_type: Some(PacketKind::Interest),
            name: "/a".into(),
            digest: Some(wire_digest(b"x")),
            size: Some(1),
            detail,
        });
        let text = log.to_ndjson();
        assert!(text.starts_with(r#"{"time_ms":5,"node":"fix1","face":1,"dir":"tx","pkt_type":"I","name":"/a""#));
        let back = EventLog::parse_ndjson(&text).unwrap();
        assert_eq!(back, log.records());
        assert_eq!(back[0].event(), Some("exec"));
    }
}
