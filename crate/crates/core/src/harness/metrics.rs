use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::log::LogRow;

/// Length of an accuracy window in simulation seconds.
pub const WINDOW_SECONDS: f64 = 1800.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMetrics {
    /// 1-based.
    pub period: usize,
    pub start_s: f64,
    pub total: usize,
    pub normal: usize,
    pub correct: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventDetection {
    pub onset_tick: u64,
    pub end_tick: u64,
    pub onset_s: f64,
    pub detected: bool,
    pub latency_ticks: Option<u64>,
    pub latency_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub total_ticks: usize,
    pub normal_ticks: usize,
    pub correct_ticks: usize,
    pub accuracy: f64,
    pub false_positive_rate: f64,
    /// Ground-truth-normal ticks with the temporal bit low.
    pub temporal_failures: usize,
    pub code_counts: BTreeMap<u8, usize>,
    pub windows: Vec<WindowMetrics>,
    pub events: Vec<EventDetection>,
    pub missed_events: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores a run against the `fault_active` ground truth carried in each row.
///
/// An event is a maximal run of fault-active ticks; it counts as detected
/// when the temporal bit is low on some tick inside it.
pub fn compute_metrics(rows: &[LogRow]) -> RunMetrics {
    let mut code_counts = BTreeMap::new();
    let mut windows: Vec<WindowMetrics> = Vec::new();
    let (mut normal, mut correct, mut temporal_failures) = (0, 0, 0);
    for r in rows {
        *code_counts.entry(r.code).or_insert(0) += 1;
        // windows are (start, start + W], so a half-hour run fills exactly one
        let idx = ((r.time_s / WINDOW_SECONDS).ceil() as usize).saturating_sub(1);
        while windows.len() <= idx {
            let period = windows.len() + 1;
            windows.push(WindowMetrics {
                period,
                start_s: (period - 1) as f64 * WINDOW_SECONDS,
                total: 0,
                normal: 0,
                correct: 0,
                accuracy: 1.0,
            });
        }
        let w = &mut windows[idx];
        w.total += 1;
        if !r.fault_active {
            normal += 1;
            w.normal += 1;
            if r.authenticated() {
                correct += 1;
                w.correct += 1;
            }
            if !r.temporal_ok() {
                temporal_failures += 1;
            }
        }
    }
    for w in &mut windows {
        w.accuracy = ratio(w.correct, w.normal);
    }

    let mut events = Vec::new();
    let mut i = 0;
    while i < rows.len() {
        if !rows[i].fault_active {
            i += 1;
            continue;
        }
        let start = i;
        while i < rows.len() && rows[i].fault_active {
            i += 1;
        }
        let onset = &rows[start];
        let alert = rows[start..i].iter().find(|r| !r.temporal_ok());
        events.push(EventDetection {
            onset_tick: onset.tick,
            end_tick: rows[i - 1].tick,
            onset_s: onset.time_s,
            detected: alert.is_some(),
            latency_ticks: alert.map(|a| a.tick - onset.tick),
            latency_s: alert.map(|a| a.time_s - onset.time_s),
        });
    }
    let missed_events = events.iter().filter(|e| !e.detected).count();
    let accuracy = ratio(correct, normal);
    RunMetrics {
        total_ticks: rows.len(),
        normal_ticks: normal,
        correct_ticks: correct,
        accuracy,
        false_positive_rate: 1.0 - accuracy,
        temporal_failures,
        code_counts,
        windows,
        events,
        missed_events,
    }
}

/// Window table laid out as period, start time, samples, correct, accuracy.
pub fn format_window_table(m: &RunMetrics) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:>14} {:>23} {:>9}",
        "Period", "Time", "Total Samples", "Correct Classification", "Accuracy"
    );
    for w in &m.windows {
        let minutes = (w.start_s / 60.0).round() as u64;
        let _ = writeln!(
            s,
            "{:<10} {:>6} {:>14} {:>23} {:>8.2}%",
            format!("Period {}", w.period),
            format!("{}:{:02}", minutes / 60, minutes % 60),
            w.normal,
            w.correct,
            100.0 * w.accuracy
        );
    }
    let _ = writeln!(
        s,
        "{:<10} {:>6} {:>14} {:>23} {:>8.2}%",
        "Total",
        "",
        m.normal_ticks,
        m.correct_ticks,
        100.0 * m.accuracy
    );
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tick: u64, code: u8, fault: bool) -> LogRow {
        LogRow {
            tick,
            time_s: tick as f64 / 15.0,
            true_level: 100.0,
            reported_level: 100.0,
            fill: false,
            drain: false,
            low_sp: 50.0,
            high_sp: 250.0,
            mode: 1,
            code,
            temporal_diff: 0.0,
            fault_active: fault,
        }
    }

    #[test]
    fn all_normal_is_perfect() {
        let rows: Vec<LogRow> = (1..=60_000).map(|t| row(t, 3, false)).collect();
        let m = compute_metrics(&rows);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.false_positive_rate, 0.0);
        assert_eq!(m.windows.len(), 3);
        assert!(m.windows.iter().all(|w| w.accuracy == 1.0));
        assert_eq!(m.windows.iter().map(|w| w.total).sum::<usize>(), rows.len());
        assert_eq!(m.windows[0].total, 27_000);
        assert_eq!(m.windows[2].total, 6_000);
    }

    #[test]
    fn false_positive_accounting() {
        // 72 code-2 ticks in 286,281
        let rows: Vec<LogRow> = (1..=286_281)
            .map(|t| row(t, if t <= 72 { 2 } else { 3 }, false))
            .collect();
        let m = compute_metrics(&rows);
        assert_eq!(format!("{:.2}", 100.0 * m.accuracy), "99.97");
        assert_eq!(format!("{:.3}", 100.0 * m.false_positive_rate), "0.025");
        assert_eq!(m.code_counts[&2], 72);
        assert_eq!(m.temporal_failures, 0);
    }

    #[test]
    fn latency_one_tick() {
        let mut rows: Vec<LogRow> = (1..=100).map(|t| row(t, 3, false)).collect();
        for r in &mut rows[40..50] {
            r.fault_active = true;
        }
        for r in &mut rows[41..] {
            r.code = 1;
        }
        let m = compute_metrics(&rows);
        assert_eq!(m.events.len(), 1);
        let e = &m.events[0];
        assert_eq!((e.onset_tick, e.end_tick), (41, 50));
        assert_eq!(e.latency_ticks, Some(1));
        assert!((e.latency_s.unwrap() - 1.0 / 15.0).abs() < 1e-12);
        assert_eq!(m.missed_events, 0);
        // fault ticks excluded from accuracy
        assert_eq!(m.normal_ticks, 90);
        assert_eq!(m.correct_ticks, 40);
    }

    #[test]
    fn undetected_event_is_missed() {
        let mut rows: Vec<LogRow> = (1..=30).map(|t| row(t, 3, false)).collect();
        rows[10].fault_active = true;
        rows[20].fault_active = true;
        rows[20].code = 1;
        let m = compute_metrics(&rows);
        assert_eq!(m.events.len(), 2);
        assert_eq!(m.missed_events, 1);
        assert!(!m.events[0].detected && m.events[0].latency_s.is_none());
        assert_eq!(m.events[1].latency_ticks, Some(0));
    }

    #[test]
    fn table_layout() {
        let rows: Vec<LogRow> = (1..=30_000).map(|t| row(t, 3, false)).collect();
        let text = format_window_table(&compute_metrics(&rows));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("Period 1"));
        assert!(
            lines[1].contains("0:00")
                && lines[1].contains("27000")
                && lines[1].ends_with("100.00%")
        );
        assert!(lines[2].contains("0:30"));
    }
}
