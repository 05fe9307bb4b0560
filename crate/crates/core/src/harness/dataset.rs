//! Line-oriented dataset files.
//!
//! ```text
//! # uwbnov-dataset v1
//! # layout: {"anchors":[...],"tag_height":0.3}
//! # provenance: {...}
//! t,r0,r1,r2,r3,r4,r5,truth_x,truth_y
//! 0,1.234,...
//! ```
//!
//! Header lines are `# key: <json>`; `layout` is required. Range columns are
//! named `r<anchor id>` in layout order and the truth columns are optional.
//! An empty or `nan` range field is a missing reading.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{AnchorLayout, Pose2D, RangeSample};

pub const DATASET_MAGIC: &str = "# uwbnov-dataset v1";

/// One parsed line; `None` marks a missing reading.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub t: f64,
    pub ranges: Vec<Option<f64>>,
    pub truth: Option<Pose2D>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFile {
    pub layout: AnchorLayout,
    /// Every header except `layout`, in key order.
    pub headers: BTreeMap<String, Value>,
    pub records: Vec<Record>,
}

/// Replay-ready samples plus per-sample anchor masks when any reading had to
/// be imputed beyond the staleness limit.
#[derive(Debug, Clone, PartialEq)]
pub struct Replay {
    pub samples: Vec<RangeSample>,
    pub masks: Option<Vec<Vec<bool>>>,
    pub imputed: usize,
}

impl DatasetFile {
    pub fn from_samples(
        layout: &AnchorLayout,
        headers: BTreeMap<String, Value>,
        samples: &[RangeSample],
    ) -> Self {
        Self {
            layout: layout.clone(),
            headers,
            records: samples
                .iter()
                .map(|s| Record {
                    t: s.t,
                    ranges: s.ranges.iter().map(|r| Some(*r)).collect(),
                    truth: s.truth,
                })
                .collect(),
        }
    }

    pub fn has_truth(&self) -> bool {
        !self.records.is_empty() && self.records.iter().all(|r| r.truth.is_some())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(DATASET_MAGIC);
        out.push('\n');
        let layout = serde_json::to_string(&self.layout).expect("layout serializes");
        let _ = writeln!(out, "# layout: {layout}");
        for (k, v) in &self.headers {
            let _ = writeln!(out, "# {k}: {v}");
        }
        let with_truth = self.records.iter().any(|r| r.truth.is_some());
        out.push('t');
        for a in &self.layout.anchors {
            let _ = write!(out, ",r{}", a.id);
        }
        if with_truth {
            out.push_str(",truth_x,truth_y");
        }
        out.push('\n');
        for r in &self.records {
            let _ = write!(out, "{}", r.t);
            for v in &r.ranges {
                match v {
                    Some(x) => {
                        let _ = write!(out, ",{x}");
                    }
                    None => out.push(','),
                }
            }
            if with_truth {
                match r.truth {
                    Some(p) => {
                        let _ = write!(out, ",{},{}", p.x, p.y);
                    }
                    None => out.push_str(",,"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l.trim_end() == DATASET_MAGIC => {}
            Some((_, l)) if l.starts_with("# uwbnov-dataset") => {
                return Err(Error::Format(format!("unsupported dataset version: {l}")));
            }
            _ => return Err(Error::Format("missing dataset header line".into())),
        }

        let mut headers = BTreeMap::new();
        let mut layout = None;
        let mut columns = None;
        for (n, line) in lines.by_ref() {
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Format(format!("line {}: malformed header", n + 1)))?;
                let key = key.trim();
                let value: Value = serde_json::from_str(value.trim())
                    .map_err(|e| Error::Format(format!("line {}: header {key}: {e}", n + 1)))?;
                if key == "layout" {
                    let l: AnchorLayout = serde_json::from_value(value)?;
                    l.validate()?;
                    layout = Some(l);
                } else {
                    headers.insert(key.to_string(), value);
                }
            } else {
                columns = Some((n, line));
                break;
            }
        }
        let layout = layout.ok_or_else(|| Error::Format("dataset has no layout header".into()))?;
        let (col_line, columns) =
            columns.ok_or_else(|| Error::Format("dataset has no column header".into()))?;

        let mut expected: Vec<String> = vec!["t".into()];
        expected.extend(layout.anchors.iter().map(|a| format!("r{}", a.id)));
        let names: Vec<&str> = columns.split(',').map(str::trim).collect();
        let with_truth = match names.len().checked_sub(expected.len()) {
            Some(0) => false,
            Some(2) if names[names.len() - 2..] == ["truth_x", "truth_y"] => true,
            _ => {
                return Err(Error::Format(format!(
                    "line {}: columns {columns:?} do not match the layout",
                    col_line + 1
                )))
            }
        };
        if names[..expected.len()] != expected.iter().map(String::as_str).collect::<Vec<_>>()[..] {
            return Err(Error::Format(format!(
                "line {}: expected columns {}",
                col_line + 1,
                expected.join(",")
            )));
        }

        let mut records = Vec::new();
        let mut last_t = f64::NEG_INFINITY;
        for (n, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != names.len() {
                return Err(Error::Format(format!(
                    "line {}: {} fields, expected {}",
                    n + 1,
                    fields.len(),
                    names.len()
                )));
            }
            let parse = |s: &str| -> Result<Option<f64>> {
                if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                    return Ok(None);
                }
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::Format(format!("line {}: bad number {s:?}", n + 1)))?;
                if v.is_finite() {
                    Ok(Some(v))
                } else {
                    Err(Error::Format(format!("line {}: non-finite value", n + 1)))
                }
            };
            let t = parse(fields[0])?
                .ok_or_else(|| Error::Format(format!("line {}: missing timestamp", n + 1)))?;
            if t < last_t {
                return Err(Error::Format(format!(
                    "line {}: timestamps decrease",
                    n + 1
                )));
            }
            last_t = t;
            let ranges = fields[1..=layout.len()]
                .iter()
                .map(|f| parse(f))
                .collect::<Result<Vec<_>>>()?;
            if ranges.iter().flatten().any(|r| *r < 0.0) {
                return Err(Error::Format(format!("line {}: negative range", n + 1)));
            }
            let truth = if with_truth {
                match (
                    parse(fields[names.len() - 2])?,
                    parse(fields[names.len() - 1])?,
                ) {
                    (Some(x), Some(y)) => Some(Pose2D::new(x, y)),
                    _ => None,
                }
            } else {
                None
            };
            records.push(Record { t, ranges, truth });
        }
        Ok(Self {
            layout,
            headers,
            records,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    /// Fills gaps by holding each anchor's last reading. A held value older
    /// than `staleness` seconds, or a leading gap back-filled from the first
    /// reading, is masked out of the filter update.
    pub fn replay(&self, staleness: f64) -> Result<Replay> {
        if self.records.is_empty() {
            return Err(Error::Empty("dataset has no records"));
        }
        let n = self.layout.len();
        let mut first = vec![None; n];
        for r in &self.records {
            for (k, v) in r.ranges.iter().enumerate() {
                if first[k].is_none() {
                    first[k] = *v;
                }
            }
        }
        if let Some(k) = first.iter().position(Option::is_none) {
            return Err(Error::Format(format!(
                "anchor {} has no readings",
                self.layout.anchors[k].id
            )));
        }

        let mut held: Vec<Option<(f64, f64)>> = vec![None; n];
        let mut samples = Vec::with_capacity(self.records.len());
        let mut masks = Vec::with_capacity(self.records.len());
        let mut imputed = 0;
        let mut any_masked = false;
        for r in &self.records {
            let mut ranges = Vec::with_capacity(n);
            let mut mask = Vec::with_capacity(n);
            for (k, v) in r.ranges.iter().enumerate() {
                match v {
                    Some(x) => {
                        held[k] = Some((*x, r.t));
                        ranges.push(*x);
                        mask.push(true);
                    }
                    None => {
                        imputed += 1;
                        match held[k] {
                            Some((x, t0)) => {
                                ranges.push(x);
                                mask.push(r.t - t0 <= staleness);
                            }
                            None => {
                                ranges.push(first[k].expect("checked above"));
                                mask.push(false);
                            }
                        }
                    }
                }
            }
            any_masked |= mask.iter().any(|m| !m);
            samples.push(RangeSample {
                t: r.t,
                ranges,
                truth: r.truth,
            });
            masks.push(mask);
        }
        Ok(Replay {
            samples,
            masks: any_masked.then_some(masks),
            imputed,
        })
    }
}
