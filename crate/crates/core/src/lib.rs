//! Hardware performance event fingerprinting.
//!
//! Records per-process or per-core event traces through the Linux perf
//! interface, turns them into labeled feature vectors, and trains and
//! evaluates classifiers that identify which website or application produced
//! a trace. Countermeasure transforms measure how much each defense degrades
//! that inference.
//!
//! Everything downstream of [`collector`] works on recorded traces, so the
//! full pipeline runs on any platform with datasets from [`synth`] or from
//! files written by [`dataset::save`].

pub mod classifiers;
pub mod collector;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod event;
pub mod labels;
pub mod mitigation;
pub mod synth;

mod encoding;

pub use error::{Error, ErrorCategory, Result};
