//! What to measure: hardware events, profiling scope and the named browser
//! profiling scenarios.
//!
//! Event names are platform-independent symbols. The mapping onto perf
//! type/config encodings lives in [`crate::collector`], so recorded datasets
//! load on any machine.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The closed set of hardware events the toolkit can record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventName {
    Instructions,
    BranchInstructions,
    CacheReferences,
    L1dLoads,
    L1iLoads,
    BusCycles,
    LlcLoads,
}

impl EventName {
    pub const ALL: [EventName; 7] = [
        EventName::Instructions,
        EventName::BranchInstructions,
        EventName::CacheReferences,
        EventName::L1dLoads,
        EventName::L1iLoads,
        EventName::BusCycles,
        EventName::LlcLoads,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventName::Instructions => "instructions",
            EventName::BranchInstructions => "branch-instructions",
            EventName::CacheReferences => "cache-references",
            EventName::L1dLoads => "l1d-loads",
            EventName::L1iLoads => "l1i-loads",
            EventName::BusCycles => "bus-cycles",
            EventName::LlcLoads => "llc-loads",
        }
    }

    /// Cache-load events are `HardwareCache`, everything else is generic.
    pub fn kind(self) -> EventKind {
        match self {
            EventName::L1dLoads | EventName::L1iLoads | EventName::LlcLoads => {
                EventKind::HardwareCache
            }
            _ => EventKind::GenericHardware,
        }
    }
}

impl fmt::Display for EventName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EventName::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::data(format!("unknown event name `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    GenericHardware,
    HardwareCache,
}

/// One counter to open. `kind` always agrees with `event_name`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawEventSpec")]
pub struct EventSpec {
    kind: EventKind,
    event_name: EventName,
    exclude_kernel: bool,
}

#[derive(Deserialize)]
struct RawEventSpec {
    kind: Option<EventKind>,
    event_name: EventName,
    #[serde(default = "default_true")]
    exclude_kernel: bool,
}

fn default_true() -> bool {
    true
}

impl TryFrom<RawEventSpec> for EventSpec {
    type Error = Error;

    fn try_from(raw: RawEventSpec) -> Result<Self> {
        let spec = EventSpec {
            kind: raw.event_name.kind(),
            event_name: raw.event_name,
            exclude_kernel: raw.exclude_kernel,
        };
        match raw.kind {
            Some(kind) if kind != spec.kind => Err(Error::config(format!(
                "event `{}` is {:?}, not {:?}",
                spec.event_name, spec.kind, kind
            ))),
            _ => Ok(spec),
        }
    }
}

impl EventSpec {
    /// Kernel activity is excluded.
    pub fn new(event_name: EventName) -> Self {
        EventSpec {
            kind: event_name.kind(),
            event_name,
            exclude_kernel: true,
        }
    }

    pub fn kind(&self) -> EventKind {
        self.kind
    }

    pub fn event_name(&self) -> EventName {
        self.event_name
    }

    pub fn exclude_kernel(&self) -> bool {
        self.exclude_kernel
    }
}

/// Which activity a counter observes.
///
/// A process-specific counter follows one process across all cores (cpu = -1
/// at the syscall). A core-wide counter sees every process on one core
/// (pid = -1). A process-specific scope without a pid is resolved at
/// collection time, typically by waiting for the target process to appear.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfilingScope {
    ProcessSpecific { pid: Option<u32> },
    CoreWide { cpu: u32 },
}

impl ProfilingScope {
    /// The `pid` argument for `perf_event_open`.
    pub fn syscall_pid(&self) -> Option<i32> {
        match self {
            ProfilingScope::ProcessSpecific { pid } => pid.map(|p| p as i32),
            ProfilingScope::CoreWide { .. } => Some(-1),
        }
    }

    /// The `cpu` argument for `perf_event_open`.
    pub fn syscall_cpu(&self) -> i32 {
        match self {
            ProfilingScope::ProcessSpecific { .. } => -1,
            ProfilingScope::CoreWide { cpu } => *cpu as i32,
        }
    }

    pub fn with_pid(self, pid: u32) -> Self {
        match self {
            ProfilingScope::ProcessSpecific { .. } => ProfilingScope::ProcessSpecific { pid: Some(pid) },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollectorConfig {
    pub events: Vec<EventSpec>,
    pub scope: ProfilingScope,
    pub duration_s: f64,
    #[serde(default = "default_read_interval")]
    pub read_interval_us: u64,
}

pub const DEFAULT_READ_INTERVAL_US: u64 = 200;
pub const INTEL_READ_INTERVAL_US: u64 = 100;

fn default_read_interval() -> u64 {
    DEFAULT_READ_INTERVAL_US
}

impl CollectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.events.is_empty() {
            return Err(Error::config("collector config lists no events"));
        }
        for (i, e) in self.events.iter().enumerate() {
            if self.events[..i].iter().any(|o| o.event_name == e.event_name) {
                return Err(Error::config(format!("event `{}` listed twice", e.event_name)));
            }
        }
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(Error::config(format!(
                "duration must be positive, got {} s",
                self.duration_s
            )));
        }
        if self.read_interval_us == 0 {
            return Err(Error::config("read interval must be positive"));
        }
        if self.expected_samples() == 0 {
            return Err(Error::config(format!(
                "duration {} s is shorter than one read interval of {} us",
                self.duration_s, self.read_interval_us
            )));
        }
        Ok(())
    }

    /// floor(duration / read interval).
    pub fn expected_samples(&self) -> usize {
        let us = self.duration_s * 1e6;
        // 0.001 s * 1e6 must count as 1000 us, not 999.999...
        let us = if (us - us.round()).abs() < 1e-6 {
            us.round()
        } else {
            us.floor()
        };
        if us <= 0.0 {
            return 0;
        }
        (us as u64 / self.read_interval_us) as usize
    }

    pub fn event_names(&self) -> Vec<EventName> {
        self.events.iter().map(|e| e.event_name).collect()
    }

    /// Length of one concatenated measurement.
    pub fn concatenated_len(&self) -> usize {
        self.events.len() * self.expected_samples()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    ChromeArm,
    ChromeIncognitoIntel,
    TorIntel,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 3] = [
        ScenarioName::ChromeArm,
        ScenarioName::ChromeIncognitoIntel,
        ScenarioName::TorIntel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::ChromeArm => "chrome-arm",
            ScenarioName::ChromeIncognitoIntel => "chrome-incognito-intel",
            ScenarioName::TorIntel => "tor-intel",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    /// Accepts the kebab-case name or the CamelCase variant name.
    fn from_str(s: &str) -> Result<Self> {
        let folded: String = s
            .chars()
            .filter(|c| *c != '-' && *c != '_')
            .collect::<String>()
            .to_ascii_lowercase();
        ScenarioName::ALL
            .into_iter()
            .find(|n| n.as_str().replace('-', "") == folded)
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown scenario `{s}` (expected one of chrome-arm, chrome-incognito-intel, tor-intel)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioPreset {
    pub name: ScenarioName,
    pub config: CollectorConfig,
    pub target_process_pattern: String,
}

/// The fully populated preset for a named scenario.
pub fn preset(name: &str) -> Result<ScenarioPreset> {
    Ok(preset_for(name.parse()?))
}

pub fn preset_for(name: ScenarioName) -> ScenarioPreset {
    use EventName::*;
    // Intel presets read every 100 us: 10,000 samples/s on that platform.
    let (events, scope, duration_s, interval_us, pattern): (&[EventName], _, _, _, _) = match name {
        ScenarioName::ChromeArm => (
            &[
                Instructions,
                BranchInstructions,
                CacheReferences,
                L1dLoads,
                L1iLoads,
                BusCycles,
            ],
            ProfilingScope::CoreWide { cpu: 0 },
            5.0,
            DEFAULT_READ_INTERVAL_US,
            "chrome",
        ),
        ScenarioName::ChromeIncognitoIntel => (
            &[BranchInstructions, CacheReferences, LlcLoads],
            ProfilingScope::ProcessSpecific { pid: None },
            1.0,
            INTEL_READ_INTERVAL_US,
            r"chrome.*--type=renderer",
        ),
        ScenarioName::TorIntel => (
            &[BranchInstructions, CacheReferences, LlcLoads],
            ProfilingScope::ProcessSpecific { pid: None },
            5.0,
            INTEL_READ_INTERVAL_US,
            r"firefox|tor-browser",
        ),
    };
    ScenarioPreset {
        name,
        config: CollectorConfig {
            events: events.iter().copied().map(EventSpec::new).collect(),
            scope,
            duration_s,
            read_interval_us: interval_us,
        },
        target_process_pattern: pattern.to_string(),
    }
}
