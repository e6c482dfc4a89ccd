use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::TaSample;
use crate::scalar::Scalar;

/// Number of 0.1 s bins covering [0, 2.5) s.
pub const BIN_COUNT: usize = 25;
pub const BIN_WIDTH: f64 = 0.1;
pub const RANGE_END: f64 = 2.5;

/// Frequency distribution of timing appropriateness values.
///
/// Bin `k` is `[k/10, (k+1)/10)` with edges taken as the doubles nearest the
/// decimal values, so `0.1` lands in bin 1 and `0.3` in bin 3.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub range_end: f64,
    pub counts: Vec<u64>,
    pub overflow: u64,
    pub total: u64,
    /// Cumulative percentage at the end of each bin; `None` for no samples.
    pub cumulative_percent: Option<Vec<f64>>,
}

fn edge(k: usize) -> f64 {
    k as f64 / 10.0
}

/// Bin of a value, or `None` for overflow.
pub fn bin_of(v: f64) -> Option<usize> {
    if v >= RANGE_END {
        return None;
    }
    // Number of interior edges at or below v.
    Some((1..BIN_COUNT).take_while(|&k| edge(k) <= v).count())
}

pub fn ta_histogram<T: Scalar>(samples: &[TaSample<T>]) -> Histogram {
    histogram_of(samples.iter().map(|s| s.ta.to_f64().unwrap_or(f64::INFINITY)))
}

pub fn histogram_of(values: impl IntoIterator<Item = f64>) -> Histogram {
    let mut counts = vec![0u64; BIN_COUNT];
    let mut overflow = 0;
    let mut total = 0;
    for v in values {
        total += 1;
        match bin_of(v) {
            Some(k) => counts[k] += 1,
            None => overflow += 1,
        }
    }
    let cumulative_percent = (total > 0).then(|| {
        let mut acc = 0u64;
        counts
            .iter()
            .map(|c| {
                acc += c;
                100.0 * acc as f64 / total as f64
            })
            .collect()
    });
    Histogram {
        bin_width: BIN_WIDTH,
        range_end: RANGE_END,
        counts,
        overflow,
        total,
        cumulative_percent,
    }
}

impl Histogram {
    pub fn overflow_percent(&self) -> Option<f64> {
        (self.total > 0).then(|| 100.0 * self.overflow as f64 / self.total as f64)
    }

    /// gnuplot-readable columns: bin start, bin end, count, cumulative %.
    pub fn to_gnuplot(&self, title: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {title}");
        let _ = writeln!(out, "# samples: {}", self.total);
        let _ = writeln!(out, "# bin_start bin_end count cumulative_percent");
        for (k, c) in self.counts.iter().enumerate() {
            let cum = match &self.cumulative_percent {
                Some(v) => format!("{:.4}", v[k]),
                None => "nan".to_string(),
            };
            let _ = writeln!(out, "{:.1} {:.1} {} {}", edge(k), edge(k + 1), c, cum);
        }
        let over = match self.overflow_percent() {
            Some(v) => format!("{v:.4}"),
            None => "nan".to_string(),
        };
        let _ = writeln!(out, "# overflow >= {:.1}: {} ({}%)", self.range_end, self.overflow, over);
        out
    }

    /// Horizontal bar chart for terminals.
    pub fn to_text_plot(&self, title: &str) -> String {
        const WIDTH: u64 = 40;
        let max = self.counts.iter().copied().chain([self.overflow]).max().unwrap_or(0);
        let bar = |c: u64| {
            let n = if max == 0 { 0 } else { (c * WIDTH).div_ceil(max) };
            "#".repeat(n as usize)
        };
        let mut out = String::new();
        let _ = writeln!(out, "{title} (n = {})", self.total);
        for (k, &c) in self.counts.iter().enumerate() {
            let cum = self
                .cumulative_percent
                .as_ref()
                .map(|v| format!("{:6.2}%", v[k]))
                .unwrap_or_else(|| "     -".to_string());
            let _ = writeln!(
                out,
                "[{:.1},{:.1}) {:>5} {} |{}",
                edge(k),
                edge(k + 1),
                c,
                cum,
                bar(c)
            );
        }
        let _ = writeln!(out, ">= {:.1}    {:>5}         |{}", self.range_end, self.overflow, bar(self.overflow));
        out
    }
}
