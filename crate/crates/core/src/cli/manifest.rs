//! Run manifests: flat `key = value` text.

use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use super::config::RunConfig;
use crate::model::ModelParams;

/// First 16 hex digits of the SHA-256 of the canonical parameter string.
pub fn params_hash(p: &ModelParams) -> String {
    Sha256::digest(p.canonical_string().as_bytes())
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Seconds since the Unix epoch, millisecond resolution.
pub fn timestamp() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

#[derive(Debug, Clone, Default)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut m = Manifest::default();
        m.set("command", command);
        m.set("code_version", env!("CARGO_PKG_VERSION"));
        m.set("started_at", &timestamp());
        m.set("seed", &cfg.experiment.seed.to_string());
        m.set("params_hash", &params_hash(cfg.params()));
        for (k, v) in cfg.echo() {
            m.set(&k, &v);
        }
        m
    }

    /// Sets `key`, replacing an earlier value.
    pub fn set(&mut self, key: &str, value: &str) {
        let value = value.replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value,
            None => self.entries.push((key.to_string(), value)),
        }
    }

    pub fn with(mut self, key: &str, value: &str) -> Self {
        self.set(key, value);
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once(" = "))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Manifest { entries }
    }
}
