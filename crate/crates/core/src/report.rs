//! Output tables, the per-model summary and histogram rendering.
//!
//! CSV files start with a `# schema=<name>/<version>` line followed by a
//! header whose column names carry their unit suffix (`_s`, `_m`). Floats are
//! written with six decimals so reruns are byte-identical.

use crate::engine::SimulationResult;
use crate::metrics::EventMetrics;
use crate::stats::{histogram, median, wilcoxon_signed_rank, Histogram, WilcoxonMethod};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use thiserror::Error;

pub const RESULTS_SCHEMA: &str = "refdriver-results/1";
pub const EXCLUDED_SCHEMA: &str = "refdriver-excluded/1";
pub const METRICS_SCHEMA: &str = "refdriver-metrics/1";
pub const HISTOGRAM_SCHEMA: &str = "refdriver-histogram/1";
pub const SUMMARY_SCHEMA: &str = "refdriver-summary/1";

const RESULTS_HEADER: [&str; 9] = [
    "scenario_id",
    "model",
    "human_onset_s",
    "brake_onset_s",
    "detection_s",
    "armed_s",
    "collided",
    "collision_s",
    "min_gap_m",
];
const EXCLUDED_HEADER: [&str; 3] = ["scenario_id", "model", "reason"];
const METRICS_HEADER: [&str; 10] = [
    "scenario_id",
    "model",
    "human_onset_s",
    "model_onset_s",
    "t_diff_s",
    "crashed",
    "worst_case_crashed",
    "ldbo_human_m",
    "ldbo_model_m",
    "ldbo_diff_m",
];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

/// Reason an event (or an event/model pair) is left out of some statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    NoOnset,
    AlreadyDecelerating,
    /// The model never braked: kept for crash counts, dropped from timing.
    NeverBraked,
}

impl ExclusionReason {
    pub fn as_str(self) -> &'static str {
        match self {
            ExclusionReason::NoOnset => "NoOnset",
            ExclusionReason::AlreadyDecelerating => "AlreadyDecelerating",
            ExclusionReason::NeverBraked => "NeverBraked",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "NoOnset" => Some(ExclusionReason::NoOnset),
            "AlreadyDecelerating" => Some(ExclusionReason::AlreadyDecelerating),
            "NeverBraked" => Some(ExclusionReason::NeverBraked),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ExcludedRow {
    pub scenario_id: String,
    /// `all` for scenario-level exclusions.
    pub model: String,
    pub reason: ExclusionReason,
}

fn fmt_f(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write_table(path: &Path, schema: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), ReportError> {
    let mut file = File::create(path).map_err(io_err(path))?;
    writeln!(file, "# schema={schema}").map_err(io_err(path))?;
    let csv_err = |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Reads a table written by [`write_table`], checking schema and header.
fn read_table(path: &Path, schema: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, ReportError> {
    let format = |message: String| ReportError::Format {
        path: path.display().to_string(),
        message,
    };
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = BufReader::new(file);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(io_err(path))?;
    let expected = format!("# schema={schema}");
    if first.trim_end() != expected {
        return Err(format(format!("expected '{expected}' on line 1, found '{}'", first.trim_end())));
    }
    let csv_err = |source| ReportError::Csv {
        path: path.display().to_string(),
        source,
    };
    let mut r = csv::Reader::from_reader(reader);
    let found: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    if found != header {
        return Err(format(format!("unexpected header {found:?}")));
    }
    r.records().map(|rec| rec.map_err(csv_err)).collect()
}

fn parse_f(path: &Path, field: &str, s: &str) -> Result<f64, ReportError> {
    s.parse().map_err(|_| ReportError::Format {
        path: path.display().to_string(),
        message: format!("field {field}: '{s}' is not a number"),
    })
}

fn parse_opt(path: &Path, field: &str, s: &str) -> Result<Option<f64>, ReportError> {
    if s.is_empty() {
        Ok(None)
    } else {
        parse_f(path, field, s).map(Some)
    }
}

fn parse_bool(path: &Path, field: &str, s: &str) -> Result<bool, ReportError> {
    s.parse().map_err(|_| ReportError::Format {
        path: path.display().to_string(),
        message: format!("field {field}: '{s}' is not true/false"),
    })
}

pub fn write_results_csv(path: &Path, results: &[SimulationResult]) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = results
        .iter()
        .map(|r| {
            vec![
                r.scenario_id.clone(),
                r.model_name.clone(),
                fmt_f(r.human_onset_time),
                fmt_opt(r.brake_onset_time),
                fmt_opt(r.detection_time),
                fmt_opt(r.armed_time),
                r.collided.to_string(),
                fmt_opt(r.collision_time),
                fmt_f(r.min_gap),
            ]
        })
        .collect();
    write_table(path, RESULTS_SCHEMA, &RESULTS_HEADER, &rows)
}

/// Reads results back; traces are not stored and come back empty.
pub fn read_results_csv(path: &Path) -> Result<Vec<SimulationResult>, ReportError> {
    read_table(path, RESULTS_SCHEMA, &RESULTS_HEADER)?
        .iter()
        .map(|rec| {
            Ok(SimulationResult {
                scenario_id: rec[0].to_string(),
                model_name: rec[1].to_string(),
                human_onset_time: parse_f(path, RESULTS_HEADER[2], &rec[2])?,
                brake_onset_time: parse_opt(path, RESULTS_HEADER[3], &rec[3])?,
                detection_time: parse_opt(path, RESULTS_HEADER[4], &rec[4])?,
                armed_time: parse_opt(path, RESULTS_HEADER[5], &rec[5])?,
                collided: parse_bool(path, RESULTS_HEADER[6], &rec[6])?,
                collision_time: parse_opt(path, RESULTS_HEADER[7], &rec[7])?,
                min_gap: parse_f(path, RESULTS_HEADER[8], &rec[8])?,
                ego_trace: Vec::new(),
            })
        })
        .collect()
}

pub fn write_excluded_csv(path: &Path, rows: &[ExcludedRow]) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| vec![r.scenario_id.clone(), r.model.clone(), r.reason.as_str().to_string()])
        .collect();
    write_table(path, EXCLUDED_SCHEMA, &EXCLUDED_HEADER, &rows)
}

pub fn read_excluded_csv(path: &Path) -> Result<Vec<ExcludedRow>, ReportError> {
    read_table(path, EXCLUDED_SCHEMA, &EXCLUDED_HEADER)?
        .iter()
        .map(|rec| {
            let reason = ExclusionReason::parse(&rec[2]).ok_or_else(|| ReportError::Format {
                path: path.display().to_string(),
                message: format!("field reason: unknown '{}'", &rec[2]),
            })?;
            Ok(ExcludedRow {
                scenario_id: rec[0].to_string(),
                model: rec[1].to_string(),
                reason,
            })
        })
        .collect()
}

pub fn write_metrics_csv(path: &Path, metrics: &[EventMetrics]) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = metrics
        .iter()
        .map(|m| {
            vec![
                m.scenario_id.clone(),
                m.model_name.clone(),
                fmt_f(m.human_onset),
                fmt_opt(m.model_onset),
                fmt_opt(m.t_diff),
                m.crashed.to_string(),
                m.worst_case_crashed.to_string(),
                fmt_f(m.ldbo_human),
                fmt_opt(m.ldbo_model),
                fmt_opt(m.ldbo_diff),
            ]
        })
        .collect();
    write_table(path, METRICS_SCHEMA, &METRICS_HEADER, &rows)
}

pub fn read_metrics_csv(path: &Path) -> Result<Vec<EventMetrics>, ReportError> {
    read_table(path, METRICS_SCHEMA, &METRICS_HEADER)?
        .iter()
        .map(|rec| {
            Ok(EventMetrics {
                scenario_id: rec[0].to_string(),
                model_name: rec[1].to_string(),
                human_onset: parse_f(path, METRICS_HEADER[2], &rec[2])?,
                model_onset: parse_opt(path, METRICS_HEADER[3], &rec[3])?,
                t_diff: parse_opt(path, METRICS_HEADER[4], &rec[4])?,
                crashed: parse_bool(path, METRICS_HEADER[5], &rec[5])?,
                worst_case_crashed: parse_bool(path, METRICS_HEADER[6], &rec[6])?,
                ldbo_human: parse_f(path, METRICS_HEADER[7], &rec[7])?,
                ldbo_model: parse_opt(path, METRICS_HEADER[8], &rec[8])?,
                ldbo_diff: parse_opt(path, METRICS_HEADER[9], &rec[9])?,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSummary {
    pub w_statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub model: String,
    pub n_events: usize,
    /// Events in which the model braked at all.
    pub n_reacted: usize,
    pub n_crashes: usize,
    pub n_no_crash: usize,
    pub worst_case_crashes: usize,
    /// Model crashes in events the no-reaction run survives.
    pub crashes_without_worst_case_crash: usize,
    pub median_t_diff: Option<f64>,
    pub median_ldbo: Option<f64>,
    pub median_ldbo_human: Option<f64>,
    pub fraction_earlier_than_human: Option<f64>,
    /// Signed-rank test of the onset differences against zero.
    pub wilcoxon_t_diff: Option<TestSummary>,
    /// Signed-rank test of model LDBO minus human LDBO against zero.
    pub wilcoxon_ldbo: Option<TestSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub schema: String,
    pub alpha: f64,
    pub n_scenarios: usize,
    pub n_excluded_scenarios: usize,
    pub models: Vec<ModelSummary>,
}

fn test_summary(diffs: &[f64], alpha: f64) -> Option<TestSummary> {
    wilcoxon_signed_rank(diffs).ok().map(|r| TestSummary {
        w_statistic: r.w_statistic,
        p_value: r.p_value,
        n_effective: r.n_effective,
        method: r.method,
        significant: r.p_value < alpha,
    })
}

/// Summarizes the metrics of one model.
pub fn summarize_model(model: &str, metrics: &[EventMetrics], alpha: f64) -> ModelSummary {
    let rows: Vec<&EventMetrics> = metrics.iter().filter(|m| m.model_name == model).collect();
    let t_diffs: Vec<f64> = rows.iter().filter_map(|m| m.t_diff).collect();
    let ldbo_model: Vec<f64> = rows.iter().filter_map(|m| m.ldbo_model).collect();
    let ldbo_diffs: Vec<f64> = rows.iter().filter_map(|m| m.ldbo_diff).collect();
    let ldbo_human: Vec<f64> = rows
        .iter()
        .filter(|m| m.ldbo_model.is_some())
        .map(|m| m.ldbo_human)
        .collect();
    let n_crashes = rows.iter().filter(|m| m.crashed).count();
    let n_reacted = t_diffs.len();
    ModelSummary {
        model: model.to_string(),
        n_events: rows.len(),
        n_reacted,
        n_crashes,
        n_no_crash: rows.len() - n_crashes,
        worst_case_crashes: rows.iter().filter(|m| m.worst_case_crashed).count(),
        crashes_without_worst_case_crash: rows.iter().filter(|m| m.crashed && !m.worst_case_crashed).count(),
        median_t_diff: median(&t_diffs).ok(),
        median_ldbo: median(&ldbo_model).ok(),
        median_ldbo_human: median(&ldbo_human).ok(),
        fraction_earlier_than_human: (n_reacted > 0)
            .then(|| t_diffs.iter().filter(|d| **d < 0.0).count() as f64 / n_reacted as f64),
        wilcoxon_t_diff: test_summary(&t_diffs, alpha),
        wilcoxon_ldbo: test_summary(&ldbo_diffs, alpha),
    }
}

pub fn write_summary_json(path: &Path, summary: &SummaryReport) -> Result<(), ReportError> {
    let mut text = serde_json::to_string_pretty(summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(io_err(path))
}

pub fn write_histogram_csv(path: &Path, hist: &Histogram) -> Result<(), ReportError> {
    let rows: Vec<Vec<String>> = hist
        .counts
        .iter()
        .enumerate()
        .map(|(i, c)| vec![fmt_f(hist.bin_edges[i]), fmt_f(hist.bin_edges[i + 1]), c.to_string()])
        .collect();
    write_table(path, HISTOGRAM_SCHEMA, &["bin_start", "bin_end", "count"], &rows)
}

/// Minimal self-contained SVG bar chart of a histogram.
pub fn histogram_svg(hist: &Histogram, title: &str, unit: &str) -> String {
    const W: f64 = 480.0;
    const H: f64 = 300.0;
    const LEFT: f64 = 50.0;
    const BOTTOM: f64 = 40.0;
    const TOP: f64 = 30.0;
    let plot_w = W - LEFT - 20.0;
    let plot_h = H - TOP - BOTTOM;
    let max = hist.counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let bar_w = if hist.counts.is_empty() {
        0.0
    } else {
        plot_w / hist.counts.len() as f64
    };

    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    )
    .unwrap();
    writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="18" font-family="sans-serif" font-size="14" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    )
    .unwrap();
    for (i, &c) in hist.counts.iter().enumerate() {
        let h = plot_h * c as f64 / max;
        writeln!(
            svg,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4a7ab5" stroke="white"/>"##,
            LEFT + i as f64 * bar_w,
            TOP + plot_h - h,
            bar_w,
            h
        )
        .unwrap();
    }
    let axis_y = TOP + plot_h;
    writeln!(
        svg,
        r#"<line x1="{LEFT}" y1="{axis_y}" x2="{}" y2="{axis_y}" stroke="black"/>"#,
        LEFT + plot_w
    )
    .unwrap();
    writeln!(svg, r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{axis_y}" stroke="black"/>"#).unwrap();
    if let (Some(first), Some(last)) = (hist.bin_edges.first(), hist.bin_edges.last()) {
        for (x, v) in [(LEFT, first), (LEFT + plot_w, last)] {
            writeln!(
                svg,
                r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="11" text-anchor="middle">{v:.2}</text>"#,
                axis_y + 14.0
            )
            .unwrap();
        }
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#,
        LEFT + plot_w / 2.0,
        H - 8.0,
        escape(unit)
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
        LEFT - 4.0,
        TOP + 4.0,
        max as u64
    )
    .unwrap();
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One histogram panel: file stem, title, axis label and values.
pub struct Panel {
    pub stem: String,
    pub title: String,
    pub unit: &'static str,
    pub values: Vec<f64>,
    pub bin_width: f64,
}

/// Panels mirroring the figures: onset differences per model, and LDBO for
/// the human and each model.
pub fn histogram_panels(metrics: &[EventMetrics], models: &[String], bin_time: f64, bin_dist: f64) -> Vec<Panel> {
    let mut panels = Vec::new();
    for model in models {
        let rows = metrics.iter().filter(|m| &m.model_name == model);
        panels.push(Panel {
            stem: format!("hist_t_diff_{model}"),
            title: format!("{model}: brake onset minus human onset"),
            unit: "t_diff [s]",
            values: rows.clone().filter_map(|m| m.t_diff).collect(),
            bin_width: bin_time,
        });
        panels.push(Panel {
            stem: format!("hist_ldbo_{model}"),
            title: format!("{model}: lateral distance at brake onset"),
            unit: "LDBO [m]",
            values: rows.filter_map(|m| m.ldbo_model).collect(),
            bin_width: bin_dist,
        });
    }
    if let Some(first) = models.first() {
        panels.push(Panel {
            stem: "hist_ldbo_human".into(),
            title: "human: lateral distance at brake onset".into(),
            unit: "LDBO [m]",
            values: metrics
                .iter()
                .filter(|m| &m.model_name == first)
                .map(|m| m.ldbo_human)
                .collect(),
            bin_width: bin_dist,
        });
    }
    panels
}

pub fn write_panels(dir: &Path, panels: &[Panel], svg: bool) -> Result<(), ReportError> {
    for p in panels {
        let hist = histogram(&p.values, p.bin_width);
        write_histogram_csv(&dir.join(format!("{}.csv", p.stem)), &hist)?;
        if svg {
            let path = dir.join(format!("{}.svg", p.stem));
            std::fs::write(&path, histogram_svg(&hist, &p.title, p.unit)).map_err(io_err(&path))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(id: &str, model: &str, onset: Option<f64>) -> SimulationResult {
        SimulationResult {
            scenario_id: id.into(),
            model_name: model.into(),
            human_onset_time: 3.1,
            brake_onset_time: onset,
            detection_time: onset.map(|t| t - 1.15),
            armed_time: None,
            collided: onset.is_none(),
            collision_time: onset.is_none().then_some(4.25),
            min_gap: 0.5,
            ego_trace: Vec::new(),
        }
    }

    fn metric(model: &str, t_diff: Option<f64>, crashed: bool, worst: bool) -> EventMetrics {
        EventMetrics {
            scenario_id: "e".into(),
            model_name: model.into(),
            human_onset: 3.0,
            model_onset: t_diff.map(|d| 3.0 + d),
            t_diff,
            crashed,
            worst_case_crashed: worst,
            ldbo_human: -0.2,
            ldbo_model: t_diff.map(|d| -0.2 + d),
            ldbo_diff: t_diff,
        }
    }

    #[test]
    fn results_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("results.csv");
        let rows = vec![result("a", "ccdm", Some(2.5)), result("a", "none", None)];
        write_results_csv(&path, &rows).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# schema=refdriver-results/1\nscenario_id,model,human_onset_s"));
        assert_eq!(read_results_csv(&path).unwrap(), rows);
    }

    #[test]
    fn excluded_and_metrics_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("excluded.csv");
        let rows = vec![
            ExcludedRow {
                scenario_id: "a".into(),
                model: "all".into(),
                reason: ExclusionReason::NoOnset,
            },
            ExcludedRow {
                scenario_id: "b".into(),
                model: "fsm".into(),
                reason: ExclusionReason::NeverBraked,
            },
        ];
        write_excluded_csv(&path, &rows).unwrap();
        assert_eq!(read_excluded_csv(&path).unwrap(), rows);

        let path = dir.path().join("metrics.csv");
        let rows = vec![metric("ccdm", Some(0.5), false, true), metric("ccdm", None, true, true)];
        write_metrics_csv(&path, &rows).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), rows);
    }

    #[test]
    fn wrong_schema_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        write_excluded_csv(&path, &[]).unwrap();
        assert!(matches!(read_results_csv(&path), Err(ReportError::Format { .. })));
    }

    #[test]
    fn summary_counts_reconcile() {
        let rows = vec![
            metric("fsm", Some(-0.5), false, true),
            metric("fsm", Some(-1.0), false, true),
            metric("fsm", Some(0.25), true, true),
            metric("fsm", None, false, false),
            metric("ccdm", Some(1.0), false, true),
        ];
        let s = summarize_model("fsm", &rows, 0.01);
        assert_eq!((s.n_events, s.n_reacted, s.n_crashes, s.n_no_crash), (4, 3, 1, 3));
        assert_eq!(s.n_crashes + s.n_no_crash, s.n_events);
        assert_eq!(s.worst_case_crashes, 3);
        assert_eq!(s.median_t_diff, Some(-0.5));
        assert!((s.fraction_earlier_than_human.unwrap() - 2.0 / 3.0).abs() < 1e-12);
        let w = s.wilcoxon_t_diff.unwrap();
        assert_eq!((w.w_statistic, w.n_effective), (1.0, 3));
        assert!(!w.significant);

        let none = summarize_model("none", &rows, 0.01);
        assert_eq!(none.n_events, 0);
        assert_eq!(none.median_t_diff, None);
        assert_eq!(none.fraction_earlier_than_human, None);
    }

    #[test]
    fn svg_is_well_formed() {
        let svg = histogram_svg(&histogram(&[0.1, 0.2, 0.6], 0.25), "a < b", "t [s]");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("fill=\"#4a7ab5\"").count(), 3);
        assert!(svg.contains("a &lt; b"));
    }
}
