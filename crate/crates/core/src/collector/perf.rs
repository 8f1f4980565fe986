//! Thin wrapper over `perf_event_open(2)` in counting mode.

use std::fs::File;
use std::io::{self, Read};
use std::os::fd::{AsRawFd, FromRawFd};

use crate::error::{Error, Result};
use crate::event::{EventName, EventSpec, ProfilingScope};

const PERF_TYPE_HARDWARE: u32 = 0;
const PERF_TYPE_HW_CACHE: u32 = 3;

const PERF_COUNT_HW_INSTRUCTIONS: u64 = 1;
const PERF_COUNT_HW_CACHE_REFERENCES: u64 = 2;
const PERF_COUNT_HW_BRANCH_INSTRUCTIONS: u64 = 4;
const PERF_COUNT_HW_BUS_CYCLES: u64 = 6;

const PERF_COUNT_HW_CACHE_L1D: u64 = 0;
const PERF_COUNT_HW_CACHE_L1I: u64 = 1;
const PERF_COUNT_HW_CACHE_LL: u64 = 2;
const PERF_COUNT_HW_CACHE_OP_READ: u64 = 0;
const PERF_COUNT_HW_CACHE_RESULT_ACCESS: u64 = 0;

const PERF_FORMAT_TOTAL_TIME_ENABLED: u64 = 1 << 0;
const PERF_FORMAT_TOTAL_TIME_RUNNING: u64 = 1 << 1;

const ATTR_FLAG_DISABLED: u64 = 1 << 0;
const ATTR_FLAG_EXCLUDE_KERNEL: u64 = 1 << 5;
const ATTR_FLAG_EXCLUDE_HV: u64 = 1 << 6;

// _IO('$', 0) and _IO('$', 1)
const PERF_EVENT_IOC_ENABLE: libc::c_ulong = 0x2400;
const PERF_EVENT_IOC_DISABLE: libc::c_ulong = 0x2401;

/// `struct perf_event_attr` up to `PERF_ATTR_SIZE_VER1`. The flag bitfield is
/// a single u64; every field not set here stays zero.
#[repr(C)]
#[derive(Default)]
struct PerfEventAttr {
    type_: u32,
    size: u32,
    config: u64,
    sample_period: u64,
    sample_type: u64,
    read_format: u64,
    flags: u64,
    wakeup_events: u32,
    bp_type: u32,
    config1: u64,
    config2: u64,
}

fn encoding(event: EventName) -> (u32, u64) {
    let cache = |id: u64| {
        (
            PERF_TYPE_HW_CACHE,
            id | (PERF_COUNT_HW_CACHE_OP_READ << 8) | (PERF_COUNT_HW_CACHE_RESULT_ACCESS << 16),
        )
    };
    match event {
        EventName::Instructions => (PERF_TYPE_HARDWARE, PERF_COUNT_HW_INSTRUCTIONS),
        EventName::BranchInstructions => (PERF_TYPE_HARDWARE, PERF_COUNT_HW_BRANCH_INSTRUCTIONS),
        EventName::CacheReferences => (PERF_TYPE_HARDWARE, PERF_COUNT_HW_CACHE_REFERENCES),
        EventName::BusCycles => (PERF_TYPE_HARDWARE, PERF_COUNT_HW_BUS_CYCLES),
        EventName::L1dLoads => cache(PERF_COUNT_HW_CACHE_L1D),
        EventName::L1iLoads => cache(PERF_COUNT_HW_CACHE_L1I),
        EventName::LlcLoads => cache(PERF_COUNT_HW_CACHE_LL),
    }
}

/// One independently opened counter (no group leader).
pub(super) struct Counter {
    file: File,
    event: EventName,
}

#[derive(Debug, Clone, Copy)]
pub(super) struct Reading {
    pub value: u64,
    pub time_enabled: u64,
    pub time_running: u64,
}

impl Counter {
    pub fn open(spec: &EventSpec, scope: &ProfilingScope) -> Result<Counter> {
        let pid = scope
            .syscall_pid()
            .ok_or_else(|| Error::config("process-specific scope has no target pid"))?;
        let (type_, config) = encoding(spec.event_name());
        let mut flags = ATTR_FLAG_DISABLED;
        if spec.exclude_kernel() {
            flags |= ATTR_FLAG_EXCLUDE_KERNEL | ATTR_FLAG_EXCLUDE_HV;
        }
        let attr = PerfEventAttr {
            type_,
            size: std::mem::size_of::<PerfEventAttr>() as u32,
            config,
            read_format: PERF_FORMAT_TOTAL_TIME_ENABLED | PERF_FORMAT_TOTAL_TIME_RUNNING,
            flags,
            ..Default::default()
        };
        // SAFETY: attr is a properly sized, initialized perf_event_attr; the
        // remaining arguments are plain integers.
        let fd = unsafe {
            libc::syscall(
                libc::SYS_perf_event_open,
                &attr as *const PerfEventAttr,
                pid as libc::pid_t,
                scope.syscall_cpu() as libc::c_int,
                -1 as libc::c_int,
                0 as libc::c_ulong,
            )
        };
        if fd < 0 {
            return Err(open_error(io::Error::last_os_error(), spec.event_name()));
        }
        // SAFETY: fd was just returned by the kernel and is owned by nobody else.
        let file = unsafe { File::from_raw_fd(fd as i32) };
        Ok(Counter {
            file,
            event: spec.event_name(),
        })
    }

    pub fn event(&self) -> EventName {
        self.event
    }

    fn ioctl(&self, request: libc::c_ulong) -> Result<()> {
        // SAFETY: the fd is a live perf event descriptor; these requests take
        // no argument.
        let rc = unsafe { libc::ioctl(self.file.as_raw_fd(), request as _, 0) };
        if rc < 0 {
            return Err(Error::Io(io::Error::last_os_error()));
        }
        Ok(())
    }

    pub fn enable(&self) -> Result<()> {
        self.ioctl(PERF_EVENT_IOC_ENABLE)
    }

    pub fn disable(&self) -> Result<()> {
        self.ioctl(PERF_EVENT_IOC_DISABLE)
    }

    pub fn read(&mut self) -> Result<Reading> {
        let mut buf = [0u8; 24];
        let n = self.file.read(&mut buf)?;
        if n != buf.len() {
            // A counter that can never be scheduled reads as end-of-file.
            return Err(Error::CountersExhausted(self.event.to_string()));
        }
        let word = |i: usize| u64::from_ne_bytes(buf[i * 8..i * 8 + 8].try_into().expect("8 bytes"));
        Ok(Reading {
            value: word(0),
            time_enabled: word(1),
            time_running: word(2),
        })
    }
}

fn open_error(err: io::Error, event: EventName) -> Error {
    match err.raw_os_error() {
        Some(libc::EACCES) | Some(libc::EPERM) => Error::Permission(format!(
            "perf_event_open refused `{event}` ({err}); check {} and the profiling scope",
            super::PARANOID_PATH
        )),
        Some(libc::ENOENT) | Some(libc::EOPNOTSUPP) | Some(libc::EINVAL) => {
            Error::UnsupportedEvent(event.to_string())
        }
        Some(libc::ENOSYS) | Some(libc::ENODEV) => {
            Error::Unavailable(format!("perf_event_open is not available: {err}"))
        }
        Some(libc::EBUSY) | Some(libc::ENOSPC) => Error::CountersExhausted(event.to_string()),
        Some(libc::ESRCH) => Error::Config(format!("target process does not exist ({err})")),
        _ => Error::Io(err),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attr_has_ver1_size() {
        assert_eq!(std::mem::size_of::<PerfEventAttr>(), 72);
    }

    #[test]
    fn cache_event_encodings() {
        assert_eq!(encoding(EventName::L1dLoads), (PERF_TYPE_HW_CACHE, 0));
        assert_eq!(encoding(EventName::L1iLoads), (PERF_TYPE_HW_CACHE, 1));
        assert_eq!(encoding(EventName::LlcLoads), (PERF_TYPE_HW_CACHE, 2));
        assert_eq!(encoding(EventName::BusCycles), (PERF_TYPE_HARDWARE, 6));
    }

    #[test]
    fn errno_mapping() {
        let e = open_error(io::Error::from_raw_os_error(libc::ENOENT), EventName::BusCycles);
        assert!(matches!(e, Error::UnsupportedEvent(ref n) if n == "bus-cycles"));
        let e = open_error(io::Error::from_raw_os_error(libc::EACCES), EventName::Instructions);
        assert!(matches!(e, Error::Permission(_)));
    }
}
