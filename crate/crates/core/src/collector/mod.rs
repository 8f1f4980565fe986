//! Event-count acquisition through the Linux perf interface.
//!
//! This is the only platform-gated module. Other platforms get the same API,
//! and every collection call returns [`Error::Unavailable`].

mod access;
#[cfg(target_os = "linux")]
mod perf;
mod process;

use serde::{Deserialize, Serialize};

pub use access::{detect_access_level, detect_access_level_from, is_privileged, AccessLevel, PARANOID_PATH};
pub use process::{
    await_target_process, await_target_process_with, ProcFs, ProcessEntry, ProcessSource,
    DEFAULT_POLL_INTERVAL_MS,
};

use crate::error::{Error, Result};
use crate::event::{CollectorConfig, EventName};

/// Per-interval count deltas for every configured event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawTraceSet {
    pub config: CollectorConfig,
    /// One series per event, in `config.events` order.
    pub series: Vec<Vec<u64>>,
    /// Read times in nanoseconds since counting was enabled.
    pub timestamps_ns: Vec<u64>,
}

impl RawTraceSet {
    pub fn events(&self) -> Vec<EventName> {
        self.config.event_names()
    }

    pub fn len(&self) -> usize {
        self.timestamps_ns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ns.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.series.len() != self.config.events.len() {
            return Err(Error::data(format!(
                "trace set has {} series for {} events",
                self.series.len(),
                self.config.events.len()
            )));
        }
        let n = self.timestamps_ns.len();
        if n == 0 {
            return Err(Error::data("trace set is empty"));
        }
        for (event, s) in self.config.events.iter().zip(&self.series) {
            if s.len() != n {
                return Err(Error::data(format!(
                    "series for `{}` has {} samples, expected {n}",
                    event.event_name(),
                    s.len()
                )));
            }
        }
        Ok(())
    }
}

/// Counts every configured event, reading all counters once per interval
/// until the configured duration has elapsed.
///
/// Each event gets its own counter (no group leader), kernel activity is
/// excluded, and counters are enabled back to back before the first read.
pub fn collect(config: &CollectorConfig) -> Result<RawTraceSet> {
    config.validate()?;
    if config.scope.syscall_pid().is_none() {
        return Err(Error::config(
            "process-specific scope needs a pid; wait for the target process first",
        ));
    }
    if !is_privileged() {
        detect_access_level()?.check(&config.scope)?;
    }
    collect_impl(config)
}

#[cfg(target_os = "linux")]
fn collect_impl(config: &CollectorConfig) -> Result<RawTraceSet> {
    use std::thread;
    use std::time::{Duration, Instant};

    let mut counters = config
        .events
        .iter()
        .map(|spec| perf::Counter::open(spec, &config.scope))
        .collect::<Result<Vec<_>>>()?;
    for c in &counters {
        c.enable()?;
    }
    let start = Instant::now();
    let mut previous = counters
        .iter_mut()
        .map(|c| c.read().map(|r| r.value))
        .collect::<Result<Vec<_>>>()?;

    let n = config.expected_samples();
    let interval = Duration::from_micros(config.read_interval_us);
    let mut series: Vec<Vec<u64>> = vec![Vec::with_capacity(n); counters.len()];
    let mut timestamps_ns = Vec::with_capacity(n);
    let mut last = Vec::with_capacity(counters.len());
    for i in 1..=n {
        let deadline = start + interval * i as u32;
        let now = Instant::now();
        if deadline > now {
            thread::sleep(deadline - now);
        }
        last.clear();
        for c in counters.iter_mut() {
            last.push(c.read()?);
        }
        timestamps_ns.push(start.elapsed().as_nanos() as u64);
        for ((s, prev), r) in series.iter_mut().zip(previous.iter_mut()).zip(&last) {
            s.push(r.value.saturating_sub(*prev));
            *prev = r.value;
        }
    }
    for c in &counters {
        c.disable()?;
    }
    for (c, r) in counters.iter().zip(&last) {
        // Counters time-share a PMU slot only when there are more events
        // than hardware counters.
        if r.time_enabled > 0 && (r.time_running as f64) < 0.99 * r.time_enabled as f64 {
            return Err(Error::CountersExhausted(c.event().to_string()));
        }
    }
    let trace = RawTraceSet {
        config: config.clone(),
        series,
        timestamps_ns,
    };
    trace.validate()?;
    Ok(trace)
}

#[cfg(not(target_os = "linux"))]
fn collect_impl(_config: &CollectorConfig) -> Result<RawTraceSet> {
    Err(Error::Unavailable("hardware event counting is only implemented for Linux".into()))
}
