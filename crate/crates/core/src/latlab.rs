//! Latency analysis over merged session logs.
//!
//! Per-frame latency is `t_recv - t_send` on two unsynchronized clocks, so
//! its absolute level carries the clock offset. Subtracting the series
//! median removes any constant offset; spread statistics are offset-free
//! as they stand. Outliers are removed with one 3-sigma pass before the
//! summary table is computed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::session::{Counters, SessionLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LatError {
    #[error("EmptyLog: no received frames to analyze")]
    EmptyLog,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("NoHapticEvents: no haptic round trips in log")]
    NoHapticEvents,
    #[error("non-finite latency at seq {seq}")]
    NonFinite { seq: u32 },
}

/// Latencies in ms aligned with the sequence numbers they came from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LatencySeries {
    pub seqs: Vec<u32>,
    pub values_ms: Vec<f64>,
    /// Sent frames with no receive time.
    pub excluded: u64,
}

impl LatencySeries {
    pub fn from_values(values_ms: Vec<f64>) -> Self {
        Self {
            seqs: (0..values_ms.len() as u32).collect(),
            values_ms,
            excluded: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.values_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values_ms.is_empty()
    }

    fn check_finite(&self) -> Result<(), LatError> {
        match self.values_ms.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(LatError::NonFinite { seq: self.seqs[i] }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Removed {
    pub seq: u32,
    pub value_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
    pub min_ms: f64,
    /// Sample standard deviation; 0 with `std_defined = false` when n = 1.
    pub std_ms: f64,
    pub std_defined: bool,
    pub n_raw: usize,
    pub n_kept: usize,
    pub n_removed: usize,
}

/// Offset-free spread of a series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadStats {
    pub std_ms: f64,
    pub p95_minus_median_ms: f64,
    pub range_ms: f64,
}

/// `L_i = t_recv - t_send` for every received record.
pub fn raw_latencies(log: &SessionLog) -> Result<LatencySeries, LatError> {
    let mut s = LatencySeries::default();
    for r in &log.records {
        match (r.t_send_us, r.t_recv_us) {
            (Some(tx), Some(rx)) => {
                s.seqs.push(r.seq);
                s.values_ms.push((rx - tx) as f64 / 1000.0);
            }
            _ => s.excluded += 1,
        }
    }
    if s.is_empty() {
        return Err(LatError::EmptyLog);
    }
    Ok(s)
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(sorted(values)[(values.len() - 1) / 2])
}

/// Nearest-rank percentile over sorted values: 1-based rank `ceil(p n / 100)`.
fn nearest_rank(sorted: &[f64], percent: usize) -> f64 {
    let n = sorted.len();
    let rank = (percent * n).div_ceil(100).max(1);
    sorted[rank - 1]
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Subtracts the lower median from every value.
pub fn normalize_offset(series: &LatencySeries) -> Result<LatencySeries, LatError> {
    let m = lower_median(&series.values_ms).ok_or(LatError::EmptyLog)?;
    Ok(LatencySeries {
        seqs: series.seqs.clone(),
        values_ms: series.values_ms.iter().map(|v| v - m).collect(),
        excluded: series.excluded,
    })
}

/// One pass: drop every value farther than three sample standard deviations
/// from the mean. With zero spread nothing is removed, since every
/// deviation is zero too.
pub fn filter_3sigma(series: &LatencySeries) -> Result<(LatencySeries, Vec<Removed>), LatError> {
    let n = series.len();
    if n < 2 {
        return Err(LatError::TooFewSamples { need: 2, got: n });
    }
    series.check_finite()?;
    let mu = mean(&series.values_ms);
    let limit = 3.0 * sample_std(&series.values_ms, mu);
    let mut kept = LatencySeries {
        excluded: series.excluded,
        ..Default::default()
    };
    let mut removed = Vec::new();
    for (&seq, &v) in series.seqs.iter().zip(&series.values_ms) {
        if (v - mu).abs() > limit {
            removed.push(Removed { seq, value_ms: v });
        } else {
            kept.seqs.push(seq);
            kept.values_ms.push(v);
        }
    }
    Ok((kept, removed))
}

pub fn summarize(series: &LatencySeries) -> Result<LatencySummary, LatError> {
    let n = series.len();
    if n == 0 {
        return Err(LatError::EmptyLog);
    }
    series.check_finite()?;
    let s = sorted(&series.values_ms);
    let m = mean(&series.values_ms);
    let (std_ms, std_defined) = if n > 1 {
        (sample_std(&series.values_ms, m), true)
    } else {
        (0.0, false)
    };
    Ok(LatencySummary {
        mean_ms: m,
        p95_ms: nearest_rank(&s, 95),
        max_ms: s[n - 1],
        min_ms: s[0],
        std_ms,
        std_defined,
        n_raw: n,
        n_kept: n,
        n_removed: 0,
    })
}

/// 3-sigma filter followed by [`summarize`], with the counts filled in.
pub fn filtered_summary(series: &LatencySeries) -> Result<(LatencySummary, Vec<Removed>), LatError> {
    if series.len() < 2 {
        return summarize(series).map(|s| (s, Vec::new()));
    }
    let (kept, removed) = filter_3sigma(series)?;
    let mut s = summarize(&kept)?;
    s.n_raw = series.len();
    s.n_removed = removed.len();
    Ok((s, removed))
}

pub fn spread(series: &LatencySeries) -> Result<SpreadStats, LatError> {
    let n = series.len();
    if n == 0 {
        return Err(LatError::EmptyLog);
    }
    series.check_finite()?;
    let s = sorted(&series.values_ms);
    let std_ms = if n > 1 {
        sample_std(&series.values_ms, mean(&series.values_ms))
    } else {
        0.0
    };
    Ok(SpreadStats {
        std_ms,
        p95_minus_median_ms: nearest_rank(&s, 95) - s[(n - 1) / 2],
        range_ms: s[n - 1] - s[0],
    })
}

/// Gesture-to-haptic round trip: `haptic_recv - t_send`, both read on the
/// controller clock.
pub fn haptic_rtt_series(log: &SessionLog) -> Result<LatencySeries, LatError> {
    let mut s = LatencySeries::default();
    for r in &log.records {
        if let (Some(tx), Some(hx)) = (r.t_send_us, r.haptic_recv_us) {
            s.seqs.push(r.seq);
            s.values_ms.push((hx - tx) as f64 / 1000.0);
        }
    }
    if s.is_empty() {
        return Err(LatError::NoHapticEvents);
    }
    Ok(s)
}

pub fn haptic_rtt(log: &SessionLog) -> Result<LatencySummary, LatError> {
    summarize(&haptic_rtt_series(log)?)
}

/// Everything `analyze` reports for one merged log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub counters: Counters,
    /// Raw-clock latency after outlier removal. Absolute values are only
    /// meaningful when both clocks share a timebase.
    pub raw: LatencySummary,
    /// Median-subtracted latency after outlier removal.
    pub normalized: LatencySummary,
    /// Spread of the unfiltered series.
    pub spread: SpreadStats,
    pub haptic_rtt: Option<LatencySummary>,
    pub removed: Vec<Removed>,
}

pub fn analyze(log: &SessionLog) -> Result<Analysis, LatError> {
    let raw = raw_latencies(log)?;
    let (raw_summary, removed) = filtered_summary(&raw)?;
    let (normalized, _) = filtered_summary(&normalize_offset(&raw)?)?;
    let haptic_rtt = match haptic_rtt(log) {
        Ok(s) => Some(s),
        Err(LatError::NoHapticEvents) => None,
        Err(e) => return Err(e),
    };
    Ok(Analysis {
        counters: log.counters,
        raw: raw_summary,
        normalized,
        spread: spread(&raw)?,
        haptic_rtt,
        removed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReportFormat {
    #[default]
    Text,
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "text-table" => Ok(ReportFormat::Text),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(format!("unknown report format {s:?} (text | json | csv)")),
        }
    }
}

const ROWS: [&str; 5] = ["Mean", "95th Percentile", "Maximum", "Minimum", "Standard Deviation"];

fn row_values(s: &LatencySummary) -> [f64; 5] {
    [s.mean_ms, s.p95_ms, s.max_ms, s.min_ms, s.std_ms]
}

fn table(out: &mut String, s: &LatencySummary) {
    use std::fmt::Write;
    let _ = writeln!(out, "{:<22}{:>12}", "Latency Metric", "Value (ms)");
    for (name, v) in ROWS.iter().zip(row_values(s)) {
        let _ = writeln!(out, "{name:<22}{v:>12.3}");
    }
    let std_note = if s.std_defined {
        ""
    } else {
        " (std undefined for n = 1)"
    };
    let _ = writeln!(
        out,
        "samples: {} raw, {} kept, {} removed{std_note}",
        s.n_raw, s.n_kept, s.n_removed
    );
}

const CSV_HEADER: &str = "mean_ms,p95_ms,max_ms,min_ms,std_ms,n_raw,n_kept,n_removed";

fn csv_row(s: &LatencySummary) -> String {
    let v = row_values(s);
    format!(
        "{},{},{},{},{},{},{},{}",
        v[0], v[1], v[2], v[3], v[4], s.n_raw, s.n_kept, s.n_removed
    )
}

/// One summary in the given format.
pub fn report(summary: &LatencySummary, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Text => {
            let mut s = String::new();
            table(&mut s, summary);
            s.into_bytes()
        }
        ReportFormat::Json => {
            let mut v = serde_json::to_vec(summary).expect("summary serializes");
            v.push(b'\n');
            v
        }
        ReportFormat::Csv => format!("{CSV_HEADER}\n{}\n", csv_row(summary)).into_bytes(),
    }
}

/// The full `analyze` report.
pub fn render_analysis(a: &Analysis, format: ReportFormat) -> String {
    use std::fmt::Write;
    match format {
        ReportFormat::Text => {
            let mut out = String::new();
            let _ = writeln!(
                out,
                "End-to-end latency, raw clocks (t_recv - t_send), after 3-sigma removal"
            );
            table(&mut out, &a.raw);
            let _ = writeln!(out);
            let _ = writeln!(
                out,
                "Offset-normalized latency (median subtracted), after 3-sigma removal"
            );
            table(&mut out, &a.normalized);
            let _ = writeln!(out);
            let _ = writeln!(out, "Offset-free spread (unfiltered)");
            let _ = writeln!(out, "{:<22}{:>12.3}", "Standard Deviation", a.spread.std_ms);
            let _ = writeln!(out, "{:<22}{:>12.3}", "p95 - Median", a.spread.p95_minus_median_ms);
            let _ = writeln!(out, "{:<22}{:>12.3}", "Max - Min", a.spread.range_ms);
            let _ = writeln!(out);
            match &a.haptic_rtt {
                Some(h) => {
                    let _ = writeln!(out, "Haptic round trip, controller clock (haptic_recv - t_send)");
                    table(&mut out, h);
                }
                None => {
                    let _ = writeln!(out, "Haptic round trip: no haptic events");
                }
            }
            let _ = writeln!(out);
            let c = &a.counters;
            let _ = writeln!(
                out,
                "packets: sent {}, received {}, lost {}, auth failures {}, checksum failures {}",
                c.sent, c.received, c.lost, c.auth_failures, c.checksum_failures
            );
            out
        }
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(a).expect("analysis serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut out = format!("series,{CSV_HEADER}\n");
            let _ = writeln!(out, "raw,{}", csv_row(&a.raw));
            let _ = writeln!(out, "normalized,{}", csv_row(&a.normalized));
            if let Some(h) = &a.haptic_rtt {
                let _ = writeln!(out, "haptic_rtt,{}", csv_row(h));
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::session::{LogRecord, Side};

    fn series(v: &[f64]) -> LatencySeries {
        LatencySeries::from_values(v.to_vec())
    }

    #[test]
    fn direct_subtraction() {
        let mut log = SessionLog::new(1, Side::Merged);
        log.records.push(LogRecord {
            seq: 0,
            t_send_us: Some(100_000),
            t_recv_us: Some(170_000),
            ..Default::default()
        });
        log.records.push(LogRecord {
            seq: 1,
            t_send_us: Some(200_000),
            ..Default::default()
        });
        let s = raw_latencies(&log).unwrap();
        assert_eq!(s.values_ms, vec![70.0]);
        assert_eq!(s.excluded, 1);
    }

    #[test]
    fn all_lost_is_empty() {
        let mut log = SessionLog::new(1, Side::Merged);
        log.records.push(LogRecord {
            seq: 0,
            t_send_us: Some(1),
            ..Default::default()
        });
        assert_eq!(raw_latencies(&log), Err(LatError::EmptyLog));
    }

    #[test]
    fn median_normalization() {
        assert_eq!(
            normalize_offset(&series(&[68.0, 70.0, 75.0])).unwrap().values_ms,
            vec![-2.0, 0.0, 5.0]
        );
        assert_eq!(normalize_offset(&series(&[42.0])).unwrap().values_ms, vec![0.0]);
        // lower median for even n
        assert_eq!(lower_median(&[4.0, 1.0, 3.0, 2.0]), Some(2.0));
    }

    #[test]
    fn filter_keeps_constant_series() {
        let (kept, removed) = filter_3sigma(&series(&[5.0; 10])).unwrap();
        assert_eq!(kept.len(), 10);
        assert!(removed.is_empty());
    }

    #[test]
    fn filter_small_case() {
        // mean 0.25, s = 0.5, 3s = 1.5: |1 - 0.25| is inside
        let (kept, removed) = filter_3sigma(&series(&[0.0, 0.0, 0.0, 1.0])).unwrap();
        assert_eq!(kept.len(), 4);
        assert!(removed.is_empty());
        assert!(matches!(
            filter_3sigma(&series(&[1.0])),
            Err(LatError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn filter_records_removed_with_seq() {
        let mut v = vec![10.0; 20];
        v[7] = 1000.0;
        let (kept, removed) = filter_3sigma(&series(&v)).unwrap();
        assert_eq!(
            removed,
            vec![Removed {
                seq: 7,
                value_ms: 1000.0
            }]
        );
        assert!(!kept.seqs.contains(&7));
    }

    #[test]
    fn summary_hand_computed() {
        let s = summarize(&series(&[60.0, 70.0, 80.0])).unwrap();
        assert_eq!(
            (s.mean_ms, s.std_ms, s.p95_ms, s.min_ms, s.max_ms),
            (70.0, 10.0, 80.0, 60.0, 80.0)
        );
        let s = summarize(&series(&[52.2, 70.4, 82.2])).unwrap();
        assert_eq!((s.min_ms, s.max_ms), (52.2, 82.2));
    }

    #[test]
    fn summary_single_value() {
        let s = summarize(&series(&[7.5])).unwrap();
        assert_eq!(
            (s.mean_ms, s.min_ms, s.max_ms, s.p95_ms, s.std_ms),
            (7.5, 7.5, 7.5, 7.5, 0.0)
        );
        assert!(!s.std_defined);
        assert_eq!(summarize(&series(&[])), Err(LatError::EmptyLog));
    }

    #[test]
    fn p95_rank_at_1000() {
        let v: Vec<f64> = (1..=1000).map(f64::from).collect();
        assert_eq!(summarize(&series(&v)).unwrap().p95_ms, 950.0);
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(summarize(&series(&v)).unwrap().p95_ms, 19.0);
    }

    #[test]
    fn non_finite_rejected() {
        assert_eq!(
            summarize(&series(&[1.0, f64::NAN])),
            Err(LatError::NonFinite { seq: 1 })
        );
    }

    #[test]
    fn haptic_rtt_needs_events() {
        let mut log = SessionLog::new(1, Side::Merged);
        log.records.push(LogRecord {
            seq: 0,
            t_send_us: Some(0),
            t_recv_us: Some(5),
            ..Default::default()
        });
        assert_eq!(haptic_rtt(&log), Err(LatError::NoHapticEvents));
        log.records[0].haptic_recv_us = Some(4_800);
        assert_eq!(haptic_rtt(&log).unwrap().mean_ms, 4.8);
    }

    #[test]
    fn format_parse() {
        assert_eq!("text-table".parse::<ReportFormat>().unwrap(), ReportFormat::Text);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
