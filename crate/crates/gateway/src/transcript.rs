//! Anonymous JSON-lines transcript of every handled turn.
//!
//! A record holds the opaque session id, a timestamp, the client action and
//! the engine's reply. Connection details (addresses, headers) never reach
//! this module.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::Path;
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use avatarqa_core::dialog::{AgentResponse, Step};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub timestamp: u64,
    pub session_id: String,
    pub request: Step,
    pub response: AgentResponse,
}

pub struct TranscriptLog {
    file: Mutex<File>,
}

impl TranscriptLog {
    pub fn open(path: &Path) -> io::Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { file: Mutex::new(file) })
    }

    pub fn record(&self, session_id: &str, request: &Step, response: &AgentResponse) {
        let timestamp = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let record = Record {
            timestamp,
            session_id: session_id.to_string(),
            request: request.clone(),
            response: response.clone(),
        };
        let mut line = serde_json::to_string(&record).expect("records serialize");
        line.push('\n');
        let Ok(mut file) = self.file.lock() else { return };
        if let Err(e) = file.write_all(line.as_bytes()) {
            tracing::warn!(error = %e, "transcript write failed");
        }
    }
}
