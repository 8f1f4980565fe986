use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::ProfilingScope;

pub const PARANOID_PATH: &str = "/proc/sys/kernel/perf_event_paranoid";

/// User-space access to perf, as configured by `perf_event_paranoid`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AccessLevel {
    /// Negative values: full access, kernel profiling included.
    FullIncludingKernel,
    /// 0: no detailed kernel profiling.
    NoKernelDetail,
    /// 1: no core-wide counting for unprivileged callers.
    NoCoreWide,
    /// 2: process-specific user-space counting only.
    ProcessUserOnly,
    /// 3 and above: counting disabled for user space.
    Disabled,
}

impl AccessLevel {
    pub fn from_value(value: i64) -> Self {
        match value {
            v if v < 0 => AccessLevel::FullIncludingKernel,
            0 => AccessLevel::NoKernelDetail,
            1 => AccessLevel::NoCoreWide,
            2 => AccessLevel::ProcessUserOnly,
            _ => AccessLevel::Disabled,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim();
        trimmed
            .parse::<i64>()
            .map(AccessLevel::from_value)
            .map_err(|_| Error::Unavailable(format!("unparseable perf_event_paranoid value `{trimmed}`")))
    }

    /// Whether an unprivileged process may count events in `scope`.
    pub fn permits(self, scope: &ProfilingScope) -> bool {
        match (self, scope) {
            (AccessLevel::Disabled, _) => false,
            (AccessLevel::NoCoreWide | AccessLevel::ProcessUserOnly, ProfilingScope::CoreWide { .. }) => false,
            _ => true,
        }
    }

    /// Rejects `scope` with an error naming the paranoid level it needs.
    pub fn check(self, scope: &ProfilingScope) -> Result<()> {
        if self.permits(scope) {
            return Ok(());
        }
        Err(match (self, scope) {
            (AccessLevel::Disabled, _) => Error::Permission(format!(
                "{PARANOID_PATH} is 3 or above, which disables event counting from user space; \
                 set it to 2 or below (or run with CAP_SYS_ADMIN)"
            )),
            _ => Error::Permission(format!(
                "core-wide counting requires {PARANOID_PATH} to be 0 or below (currently {self:?}); \
                 use a process-specific scope or run with CAP_SYS_ADMIN"
            )),
        })
    }
}

pub fn detect_access_level() -> Result<AccessLevel> {
    detect_access_level_from(Path::new(PARANOID_PATH))
}

pub fn detect_access_level_from(path: &Path) -> Result<AccessLevel> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Unavailable(format!("cannot read {}: {e}", path.display())))?;
    AccessLevel::parse(&text)
}

/// Processes with CAP_SYS_ADMIN bypass the paranoid setting; root is the
/// common case and the only one checked.
pub fn is_privileged() -> bool {
    #[cfg(unix)]
    {
        // SAFETY: geteuid has no preconditions.
        unsafe { libc::geteuid() == 0 }
    }
    #[cfg(not(unix))]
    {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn threshold_mapping() {
        assert_eq!(AccessLevel::from_value(-1), AccessLevel::FullIncludingKernel);
        assert_eq!(AccessLevel::from_value(-7), AccessLevel::FullIncludingKernel);
        assert_eq!(AccessLevel::from_value(0), AccessLevel::NoKernelDetail);
        assert_eq!(AccessLevel::from_value(1), AccessLevel::NoCoreWide);
        assert_eq!(AccessLevel::from_value(2), AccessLevel::ProcessUserOnly);
        assert_eq!(AccessLevel::from_value(3), AccessLevel::Disabled);
        assert_eq!(AccessLevel::from_value(4), AccessLevel::Disabled);
    }

    #[test]
    fn reads_file_contents() {
        for (text, level) in [
            ("-1\n", AccessLevel::FullIncludingKernel),
            ("2\n", AccessLevel::ProcessUserOnly),
            ("3", AccessLevel::Disabled),
        ] {
            let mut f = tempfile::NamedTempFile::new().unwrap();
            f.write_all(text.as_bytes()).unwrap();
            assert_eq!(detect_access_level_from(f.path()).unwrap(), level);
        }
    }

    #[test]
    fn missing_file_is_unavailable() {
        let err = detect_access_level_from(Path::new("/nonexistent/perf_event_paranoid")).unwrap_err();
        assert!(matches!(err, Error::Unavailable(_)));
    }

    #[test]
    fn scope_gating() {
        let core = ProfilingScope::CoreWide { cpu: 0 };
        let proc_ = ProfilingScope::ProcessSpecific { pid: Some(1) };
        assert!(AccessLevel::NoKernelDetail.permits(&core));
        assert!(!AccessLevel::NoCoreWide.permits(&core));
        assert!(AccessLevel::NoCoreWide.permits(&proc_));
        assert!(AccessLevel::ProcessUserOnly.permits(&proc_));
        assert!(!AccessLevel::Disabled.permits(&proc_));
        let msg = AccessLevel::Disabled.check(&proc_).unwrap_err().to_string();
        assert!(msg.contains("3 or above"), "{msg}");
    }
}
