//! Plot-ready data: log and folded histograms, decade markers, digit tables
//! and scatter rows, plus the number formatting shared by every emitter.
//!
//! Human-facing numbers carry 6 significant digits; p-values are always in
//! scientific notation.

use serde::Serialize;

use crate::benford::{digit_histogram, expected_counts, fold_log, BenfordModel, DigitHistogram, DigitPosition};
use crate::vote_data::VoteTable;
use crate::{Error, Result};

pub const DEFAULT_BIN_WIDTH_DEX: f64 = 0.1;

/// `x` at 6 significant digits, fixed notation for moderate magnitudes.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..6).contains(&mag) {
        let decimals = (5 - mag).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{x:.5e}")
    }
}

/// p-values: scientific notation, 6 significant digits.
pub fn fmt_p(p: f64) -> String {
    if !p.is_finite() {
        return p.to_string();
    }
    format!("{p:.5e}")
}

/// Rounds to 6 significant digits.
pub fn round_sig(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    format!("{x:.5e}").parse().unwrap_or(x)
}

/// Rounds every float in a JSON document to 6 significant digits.
pub fn round_json_floats(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) if n.is_f64() => {
            if let Some(x) = n.as_f64() {
                if let Some(r) = serde_json::Number::from_f64(round_sig(x)) {
                    *n = r;
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_json_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_json_floats),
        _ => {}
    }
}

pub fn to_rounded_json<T: Serialize>(value: &T) -> Result<String> {
    let mut v = serde_json::to_value(value).map_err(|e| Error::Serialize(e.to_string()))?;
    round_json_floats(&mut v);
    serde_json::to_string_pretty(&v).map_err(|e| Error::Serialize(e.to_string()))
}

pub fn write_csv(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let ser = |e: csv::Error| Error::Serialize(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(ser)?;
    for row in rows {
        w.write_record(row).map_err(ser)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialize(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BinnedHistogram {
    /// What the axis is: `log10` or `folded`.
    pub axis: String,
    pub bin_width: f64,
    pub n: u64,
    pub bins: Vec<HistogramBin>,
}

impl BinnedHistogram {
    pub fn to_csv(&self) -> Result<String> {
        let rows: Vec<Vec<String>> = self
            .bins
            .iter()
            .map(|b| vec![fmt_sig(b.lo), fmt_sig(b.hi), b.count.to_string()])
            .collect();
        write_csv(&["lo", "hi", "count"], &rows)
    }

    /// Indices of bins strictly above both neighbours.
    pub fn local_maxima(&self) -> Vec<usize> {
        let c: Vec<u64> = self.bins.iter().map(|b| b.count).collect();
        (1..c.len().saturating_sub(1))
            .filter(|&i| c[i] > c[i - 1] && c[i] > c[i + 1])
            .collect()
    }
}

fn check_width(width: f64, max: f64) -> Result<()> {
    if !(width > 0.0) || width > max || !width.is_finite() {
        return Err(Error::invalid(format!("bin width {width} must be in (0, {max}]")));
    }
    Ok(())
}

/// Bin index of `x`, nudged so values on a bin edge don't fall one bin low.
fn bin_index(x: f64, width: f64) -> i64 {
    (x / width + 1e-9).floor() as i64
}

/// Histogram of `log₁₀ v` on bins aligned to multiples of `width`; non-positive values are skipped.
pub fn log_histogram(values: &[f64], width: f64) -> Result<BinnedHistogram> {
    check_width(width, 10.0)?;
    let idx: Vec<i64> = values
        .iter()
        .filter(|v| **v > 0.0 && v.is_finite())
        .map(|v| bin_index(v.log10(), width))
        .collect();
    let bins = match (idx.iter().min(), idx.iter().max()) {
        (Some(&lo), Some(&hi)) => (lo..=hi)
            .map(|k| HistogramBin {
                lo: k as f64 * width,
                hi: (k + 1) as f64 * width,
                count: idx.iter().filter(|&&i| i == k).count() as u64,
            })
            .collect(),
        _ => Vec::new(),
    };
    Ok(BinnedHistogram {
        axis: "log10".into(),
        bin_width: width,
        n: idx.len() as u64,
        bins,
    })
}

/// Histogram of the folded values on `[0, 1)`.
pub fn folded_histogram(values: &[f64], width: f64) -> Result<BinnedHistogram> {
    check_width(width, 1.0)?;
    let nbins = (1.0 / width).round().max(1.0) as usize;
    let mut counts = vec![0u64; nbins];
    let mut n = 0;
    for &v in values.iter().filter(|v| **v > 0.0 && v.is_finite()) {
        let f = fold_log(v)?;
        let k = ((f * nbins as f64) as usize).min(nbins - 1);
        counts[k] += 1;
        n += 1;
    }
    let step = 1.0 / nbins as f64;
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            lo: k as f64 * step,
            hi: (k + 1) as f64 * step,
            count,
        })
        .collect();
    Ok(BinnedHistogram {
        axis: "folded".into(),
        bin_width: step,
        n,
        bins,
    })
}

/// Where on the folded total-vote axis a candidate's leading digit `d` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecadeMarker {
    pub digit: u8,
    pub lo: f64,
    pub hi: f64,
    /// `log₁₀((d + 1) / d)`.
    pub width_dex: f64,
}

pub fn decade_marker(digit: u8, alpha: f64) -> Result<DecadeMarker> {
    if !(1..=9).contains(&digit) {
        return Err(Error::invalid(format!("{digit} is not a leading digit")));
    }
    if !(alpha > 0.0) {
        return Err(Error::invalid("decade markers need a positive fraction"));
    }
    let wrap = |x: f64| x - x.floor();
    let d = digit as f64;
    Ok(DecadeMarker {
        digit,
        lo: wrap(d.log10() - alpha.log10()),
        hi: wrap((d + 1.0).log10() - alpha.log10()),
        width_dex: ((d + 1.0) / d).log10(),
    })
}

/// One digit row of a first-digit figure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DigitRow {
    pub digit: u8,
    pub observed: u64,
    pub expected_standard: f64,
    pub stderr_standard: f64,
    pub expected_empirical: Option<f64>,
    pub stderr_empirical: Option<f64>,
}

pub fn digit_rows(
    observed: &DigitHistogram,
    standard: &BenfordModel,
    empirical: Option<&BenfordModel>,
) -> Vec<DigitRow> {
    let std_rows = expected_counts(standard, observed.n);
    let emp_rows = empirical.map(|m| expected_counts(m, observed.n));
    std_rows
        .iter()
        .enumerate()
        .map(|(i, s)| DigitRow {
            digit: s.digit,
            observed: observed.count(s.digit),
            expected_standard: s.expected,
            stderr_standard: s.stderr,
            expected_empirical: emp_rows.as_ref().map(|r| r[i].expected),
            stderr_empirical: emp_rows.as_ref().map(|r| r[i].stderr),
        })
        .collect()
}

pub fn digit_rows_csv(rows: &[DigitRow]) -> Result<String> {
    let opt = |x: Option<f64>| x.map(fmt_sig).unwrap_or_default();
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.digit.to_string(),
                r.observed.to_string(),
                fmt_sig(r.expected_standard),
                fmt_sig(r.stderr_standard),
                opt(r.expected_empirical),
                opt(r.stderr_empirical),
            ]
        })
        .collect();
    write_csv(
        &[
            "digit",
            "observed",
            "expected_standard",
            "stderr_standard",
            "expected_empirical",
            "stderr_empirical",
        ],
        &body,
    )
}

/// Nonzero counts of one candidate, the order they appear in the table.
pub fn nonzero_counts(table: &VoteTable, label: &str) -> Result<Vec<u64>> {
    Ok(table.column(label)?.into_iter().filter(|&v| v > 0).collect())
}

pub fn candidate_first_digits(table: &VoteTable, label: &str) -> Result<DigitHistogram> {
    digit_histogram(&nonzero_counts(table, label)?, DigitPosition::First)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterRow {
    pub name: String,
    pub total: u64,
    pub proportion: f64,
    /// Marker candidate's count starts with the marker digit.
    pub marked: bool,
}

/// `(v_j, v_X_j / v_j)` per area with the marker flag.
pub fn scatter_rows(table: &VoteTable, label: &str, marker_label: &str, marker_digit: u8) -> Result<Vec<ScatterRow>> {
    let idx = table.label_index(label)?;
    let midx = table.label_index(marker_label)?;
    Ok(table
        .areas()
        .iter()
        .filter(|a| a.total > 0)
        .map(|a| {
            let m = a.per_candidate[midx];
            ScatterRow {
                name: a.name.clone(),
                total: a.total,
                proportion: a.per_candidate[idx] as f64 / a.total as f64,
                marked: m > 0 && crate::benford::first_digit(m).ok() == Some(marker_digit),
            }
        })
        .collect())
}

pub fn scatter_rows_csv(rows: &[ScatterRow]) -> Result<String> {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.name.clone(),
                r.total.to_string(),
                fmt_sig(r.proportion),
                r.marked.to_string(),
            ]
        })
        .collect();
    write_csv(&["name", "total", "proportion", "marked"], &body)
}
