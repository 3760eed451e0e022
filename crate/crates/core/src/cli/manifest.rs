use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};

/// Ordered `key = value` record of everything needed to reproduce a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    entries: Vec<(String, String)>,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.set("toolkit", format!("rnn-orbits {}", crate::VERSION));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        let key = key.into();
        let value = value.to_string().replace('\n', " ");
        match self.entries.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.entries.push((key, value)),
        }
    }

    pub fn timing(&mut self, stage: &str, elapsed: Duration) {
        self.set(format!("timing.{stage}_ms"), elapsed.as_millis());
    }

    /// Copies every `key = value` line of a block under `prefix.`.
    pub fn extend_block(&mut self, prefix: &str, block: &str) {
        for line in block.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.set(format!("{prefix}.{}", k.trim()), v.trim());
            }
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut m = Self::default();
        for (n, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format("manifest", format!("line {}: expected key = value", n + 1)))?;
            m.set(k.trim(), v.trim());
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render()).map_err(|e| Error::io(path, e))
    }

    /// Choices that the toolkit makes on the user's behalf.
    pub fn log_assumptions(&mut self) {
        self.set("assumption.tokenization", "lowercase; . , ! ? ; : \" ' and em dash split into separate tokens");
        self.set("assumption.unknown_token", "<unk> replaces words below min_count; takes the last id");
        self.set("assumption.split", "first 4/5 of the token stream trains, remainder validates");
        self.set("assumption.clipping", "global gradient norm clipped per update");
        self.set("assumption.bptt", "hidden state carried across windows, reset each epoch");
        self.set("assumption.lstm_c0", "without-input LSTM memory drawn from the same Gaussian as h0");
        self.set("assumption.burn_in", "first half of the detect budget discarded");
        self.set("assumption.argmax_ties", "lowest token id");
    }
}
