use std::collections::HashSet;
use std::fs;
use std::io;
use std::thread;
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_POLL_INTERVAL_MS: u64 = 500;

/// One row of a process scan.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProcessEntry {
    pub pid: u32,
    pub name: String,
    pub cmdline: String,
}

impl ProcessEntry {
    /// Text a pattern is matched against: the process name, then the full
    /// command line.
    fn haystack(&self) -> String {
        if self.cmdline.is_empty() {
            self.name.clone()
        } else {
            format!("{} {}", self.name, self.cmdline)
        }
    }
}

pub trait ProcessSource {
    fn scan(&mut self) -> io::Result<Vec<ProcessEntry>>;
}

/// Scans `/proc`.
#[derive(Debug, Default, Clone, Copy)]
pub struct ProcFs;

impl ProcessSource for ProcFs {
    fn scan(&mut self) -> io::Result<Vec<ProcessEntry>> {
        let mut out = Vec::new();
        for entry in fs::read_dir("/proc")? {
            let entry = entry?;
            let Some(pid) = entry.file_name().to_str().and_then(|s| s.parse::<u32>().ok()) else {
                continue;
            };
            // Processes may exit between readdir and the reads below.
            let Ok(name) = fs::read_to_string(entry.path().join("comm")) else {
                continue;
            };
            let cmdline = fs::read(entry.path().join("cmdline"))
                .map(|raw| {
                    raw.split(|b| *b == 0)
                        .filter(|s| !s.is_empty())
                        .map(|s| String::from_utf8_lossy(s).into_owned())
                        .collect::<Vec<_>>()
                        .join(" ")
                })
                .unwrap_or_default();
            out.push(ProcessEntry {
                pid,
                name: name.trim_end().to_string(),
                cmdline,
            });
        }
        out.sort_by_key(|p| p.pid);
        Ok(out)
    }
}

/// Waits for a process matching `pattern` that was not running when the
/// call started, polling `/proc` every `poll_interval`.
pub fn await_target_process(pattern: &str, poll_interval: Duration, timeout: Duration) -> Result<u32> {
    await_target_process_with(&mut ProcFs, pattern, poll_interval, timeout)
}

pub fn await_target_process_with(
    source: &mut dyn ProcessSource,
    pattern: &str,
    poll_interval: Duration,
    timeout: Duration,
) -> Result<u32> {
    if pattern.is_empty() {
        return Err(Error::config("process pattern is empty"));
    }
    let matcher =
        Regex::new(pattern).map_err(|e| Error::config(format!("invalid process pattern `{pattern}`: {e}")))?;
    let start = Instant::now();
    let baseline: HashSet<u32> = source.scan()?.into_iter().map(|p| p.pid).collect();
    loop {
        let remaining = timeout.saturating_sub(start.elapsed());
        thread::sleep(poll_interval.min(remaining));
        let snapshot = source.scan()?;
        if let Some(hit) = snapshot
            .iter()
            .find(|p| !baseline.contains(&p.pid) && matcher.is_match(&p.haystack()))
        {
            log::info!("target process {} ({}) appeared", hit.pid, hit.name);
            return Ok(hit.pid);
        }
        if start.elapsed() >= timeout {
            return Err(Error::Timeout {
                pattern: pattern.to_string(),
                waited: start.elapsed(),
                snapshot,
            });
        }
    }
}
