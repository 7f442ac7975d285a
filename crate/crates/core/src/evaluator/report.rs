use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use super::buckets::Axis;
use super::jga::EvalReport;
use crate::corpus::io::{parse_json, read_to_string};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Markdown,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "markdown" | "md" => Ok(Self::Markdown),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Validation(format!("unknown report format `{other}`"))),
        }
    }
}

const UNDEFINED: &str = "n/a";

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

fn axis_title(axis: Axis) -> (&'static str, &'static str) {
    match axis {
        Axis::Step => ("Reasoning step", "step="),
        Axis::Turn => ("Dialogue turns", "# turn="),
        Axis::Len => ("Average utterance length", "len="),
    }
}

fn render_markdown(report: &EvalReport) -> String {
    let mut out = String::new();
    writeln!(out, "# Evaluation report\n").unwrap();
    writeln!(out, "| metric | value |\n|---|---:|").unwrap();
    writeln!(out, "| dialogues | {} |", report.n_dialogues).unwrap();
    writeln!(out, "| turns | {} |", report.n_turns).unwrap();
    writeln!(out, "| correct turns | {} |", report.n_correct).unwrap();
    writeln!(out, "| joint goal accuracy (%) | {} |", pct(report.overall_jga)).unwrap();
    writeln!(out, "| missing predictions | {} |", report.n_missing_predictions).unwrap();
    for axis in report.axes() {
        let (title, prefix) = axis_title(axis);
        let buckets: Vec<_> = report.buckets(axis).collect();
        writeln!(out, "\n## {title}\n").unwrap();
        let header: Vec<String> = buckets.iter().map(|b| format!("{prefix}{}", b.label)).collect();
        writeln!(out, "| | {} |", header.join(" | ")).unwrap();
        writeln!(out, "|---|{}", "---:|".repeat(buckets.len())).unwrap();
        let jga: Vec<String> = buckets
            .iter()
            .map(|b| b.jga.map_or_else(|| UNDEFINED.to_string(), pct))
            .collect();
        writeln!(out, "| JGA (%) | {} |", jga.join(" | ")).unwrap();
        let turns: Vec<String> = buckets.iter().map(|b| b.n_turns.to_string()).collect();
        writeln!(out, "| turns | {} |", turns.join(" | ")).unwrap();
    }
    out
}

fn render_csv(report: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["axis", "bucket", "n_turns", "n_correct", "jga"])
        .unwrap();
    w.write_record([
        "overall".to_string(),
        "all".to_string(),
        report.n_turns.to_string(),
        report.n_correct.to_string(),
        report.overall_jga.to_string(),
    ])
    .unwrap();
    for b in &report.per_bucket {
        w.write_record([
            b.axis.to_string(),
            b.label.clone(),
            b.n_turns.to_string(),
            b.n_correct.to_string(),
            b.jga.map_or_else(|| UNDEFINED.to_string(), |j| j.to_string()),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
}

pub fn render_report(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).expect("serializable");
            s.push('\n');
            s
        }
        ReportFormat::Markdown => render_markdown(report),
        ReportFormat::Csv => render_csv(report),
    }
}

pub fn emit_report(report: &EvalReport, format: ReportFormat, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, render_report(report, format)).map_err(|e| Error::io(path, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport> {
    let path = path.as_ref();
    parse_json(&read_to_string(path)?, &path.display().to_string())
}
