//! Dataset file format: one JSON header line, then one CSV row per
//! measurement (`label,feature_0,...,feature_{L-1}`). Floats carry 9
//! significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, FeatureLayout, Measurement, MeasurementMeta, Normalization};
use crate::encoding::format_sig9;
use crate::error::{Error, Result};
use crate::event::EventName;

const FORMAT: &str = "hpefp-dataset";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    scenario: String,
    events: Vec<String>,
    samples_per_event: Vec<usize>,
    downsample: usize,
    feature_len: usize,
    classes: Vec<String>,
    count: usize,
    captured_at_ms: Vec<u64>,
    normalization: Option<Normalization>,
}

pub fn save(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_to(d, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Dataset> {
    let f = File::open(path)?;
    read_from(BufReader::new(f), &path.display().to_string())
}

fn write_label(w: &mut impl Write, label: &str) -> Result<()> {
    if label.contains(['\n', '\r']) {
        return Err(Error::data(format!("label {label:?} contains a line break")));
    }
    if label.contains([',', '"']) {
        write!(w, "\"{}\"", label.replace('"', "\"\""))?;
    } else {
        w.write_all(label.as_bytes())?;
    }
    Ok(())
}

pub fn write_to(d: &Dataset, w: &mut impl Write) -> Result<()> {
    d.validate()?;
    for m in d.measurements() {
        if m.meta.scenario != d.scenario {
            return Err(Error::data(format!(
                "measurement from scenario `{}` in a `{}` dataset",
                m.meta.scenario, d.scenario
            )));
        }
    }
    let header = Header {
        format: FORMAT.into(),
        version: VERSION,
        scenario: d.scenario.clone(),
        events: d.layout.events.iter().map(|e| e.to_string()).collect(),
        samples_per_event: d.layout.samples_per_event.clone(),
        downsample: d.layout.downsample,
        feature_len: d.feature_len(),
        classes: d.classes().to_vec(),
        count: d.len(),
        captured_at_ms: d.measurements().iter().map(|m| m.meta.captured_at_ms).collect(),
        normalization: d.normalization.clone(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for m in d.measurements() {
        write_label(w, &m.label)?;
        for &x in &m.features {
            if !x.is_finite() {
                return Err(Error::data(format!("non-finite feature in `{}`", m.label)));
            }
            w.write_all(b",")?;
            w.write_all(format_sig9(x).as_bytes())?;
        }
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: source.to_string(),
        line,
        message: message.into(),
    }
}

/// Splits the label off a row, undoing CSV quoting.
fn split_label(row: &str) -> Option<(String, &str)> {
    if let Some(rest) = row.strip_prefix('"') {
        let mut label = String::new();
        let mut chars = rest.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if c == '"' {
                if matches!(chars.peek(), Some((_, '"'))) {
                    label.push('"');
                    chars.next();
                } else {
                    let after = &rest[i + 1..];
                    return match after.strip_prefix(',') {
                        Some(tail) => Some((label, tail)),
                        None if after.is_empty() => Some((label, "")),
                        None => None,
                    };
                }
            } else {
                label.push(c);
            }
        }
        None
    } else {
        match row.split_once(',') {
            Some((l, tail)) => Some((l.to_string(), tail)),
            None => Some((row.to_string(), "")),
        }
    }
}

pub fn read_from(r: impl BufRead, source: &str) -> Result<Dataset> {
    let mut lines = r.lines();
    let first = lines
        .next()
        .ok_or_else(|| parse_err(source, 1, "empty file"))??;
    let header: Header =
        serde_json::from_str(&first).map_err(|e| parse_err(source, 1, format!("bad header: {e}")))?;
    if header.format != FORMAT {
        return Err(parse_err(source, 1, format!("not a dataset file (format `{}`)", header.format)));
    }
    if header.version != VERSION {
        return Err(parse_err(source, 1, format!("unsupported version {}", header.version)));
    }
    let events = header
        .events
        .iter()
        .map(|e| {
            e.parse::<EventName>()
                .map_err(|_| parse_err(source, 1, format!("unknown event name `{e}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    if header.downsample == 0 {
        return Err(parse_err(source, 1, "downsample factor 0"));
    }
    let layout = FeatureLayout {
        events: events.clone(),
        samples_per_event: header.samples_per_event,
        downsample: header.downsample,
    };
    if layout.feature_len() != header.feature_len {
        return Err(parse_err(
            source,
            1,
            format!(
                "feature_len {} disagrees with the event layout ({})",
                header.feature_len,
                layout.feature_len()
            ),
        ));
    }
    if header.captured_at_ms.len() != header.count {
        return Err(parse_err(source, 1, "captured_at_ms length differs from count"));
    }

    let mut measurements = Vec::with_capacity(header.count);
    for (i, line) in lines.enumerate() {
        let lineno = i + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        if measurements.len() == header.count {
            return Err(parse_err(source, lineno, format!("more rows than the declared {}", header.count)));
        }
        let (label, rest) = split_label(&line).ok_or_else(|| parse_err(source, lineno, "malformed quoted label"))?;
        let features = if rest.is_empty() {
            Vec::new()
        } else {
            rest.split(',')
                .enumerate()
                .map(|(j, field)| match field.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(parse_err(source, lineno, format!("feature {j}: bad number `{field}`"))),
                })
                .collect::<Result<Vec<_>>>()?
        };
        if features.len() != header.feature_len {
            return Err(parse_err(
                source,
                lineno,
                format!("row has {} features, header declares {}", features.len(), header.feature_len),
            ));
        }
        if !header.classes.contains(&label) {
            return Err(parse_err(source, lineno, format!("label `{label}` is not a declared class")));
        }
        measurements.push(Measurement {
            label,
            features,
            meta: MeasurementMeta {
                scenario: header.scenario.clone(),
                captured_at_ms: header.captured_at_ms[measurements.len()],
                events: events.clone(),
            },
        });
    }
    if measurements.len() != header.count {
        return Err(parse_err(
            source,
            measurements.len() + 2,
            format!("{} rows, header declares {}", measurements.len(), header.count),
        ));
    }
    if let Some(n) = &header.normalization {
        if n.feature_len().is_some_and(|len| len != header.feature_len || n.max.len() != len) {
            return Err(parse_err(source, 1, "normalization parameters do not match feature_len"));
        }
    }
    let mut d = Dataset::with_classes(header.scenario, layout, header.classes, measurements)?;
    d.normalization = header.normalization;
    Ok(d)
}
