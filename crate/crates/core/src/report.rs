//! Per-surface threshold tables.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::decomposition::{ThresholdMethod, ThresholdReport};
use crate::error::{invalid_arg, Result};

/// What is known about the sample a report came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SampleInfo {
    pub id: String,
    pub hurst: Option<f64>,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdRow {
    pub id: String,
    pub hurst: Option<f64>,
    pub label: Option<String>,
    pub method: ThresholdMethod,
    pub threshold: f64,
    pub modes_computed: Option<usize>,
    pub degenerate: bool,
    pub capped: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ThresholdTable {
    pub rows: Vec<ThresholdRow>,
}

pub fn report_thresholds(entries: &[(SampleInfo, ThresholdReport)]) -> Result<ThresholdTable> {
    if entries.is_empty() {
        return Err(invalid_arg("no threshold reports given"));
    }
    Ok(ThresholdTable {
        rows: entries
            .iter()
            .map(|(info, r)| ThresholdRow {
                id: info.id.clone(),
                hurst: info.hurst,
                label: info.label.clone(),
                method: r.method,
                threshold: r.selected_threshold.as_f64(),
                modes_computed: r.modes_computed,
                degenerate: r.flags.degenerate,
                capped: r.flags.capped || r.flags.length_limited,
            })
            .collect(),
    })
}

fn opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(T::to_string).unwrap_or_default()
}

impl ThresholdTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "id", "hurst", "label", "method", "threshold", "modes_computed", "degenerate", "capped",
        ])?;
        for r in &self.rows {
            w.write_record([
                r.id.clone(),
                opt(&r.hurst),
                opt(&r.label),
                r.method.to_string(),
                r.threshold.to_string(),
                opt(&r.modes_computed),
                u8::from(r.degenerate).to_string(),
                u8::from(r.capped).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Mean selected threshold per method, in first-seen order.
    pub fn mean_by_method(&self) -> Vec<(ThresholdMethod, f64)> {
        let mut acc: Vec<(ThresholdMethod, f64, usize)> = Vec::new();
        for r in &self.rows {
            match acc.iter_mut().find(|(m, _, _)| *m == r.method) {
                Some(e) => {
                    e.1 += r.threshold;
                    e.2 += 1;
                }
                None => acc.push((r.method, r.threshold, 1)),
            }
        }
        acc.into_iter().map(|(m, s, n)| (m, s / n as f64)).collect()
    }
}
