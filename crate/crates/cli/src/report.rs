//! Dashboard of overall effects and event-study plot data, read back from
//! the did and event-study outputs of a finished run.

use std::path::Path;

use markup_did::stats::{normal_two_sided_p, stars};
use markup_did::table::{fmt_f64, write_text, Manifest, TableReader, TableWriter};
use markup_did::{Error, Result};

use crate::config::DashOutcome;

/// One dashboard column.
#[derive(Debug, Clone, PartialEq)]
pub struct DashEntry {
    pub outcome: DashOutcome,
    pub estimate: f64,
    pub se: f64,
    pub p_value: f64,
    pub observations: Option<usize>,
}

impl DashEntry {
    pub fn stars(&self) -> &'static str {
        stars(self.p_value)
    }
}

/// Reads the overall effect of one outcome; `None` when the run has no
/// results for it.
pub fn read_entry(out: &Path, outcome: DashOutcome) -> Result<Option<DashEntry>> {
    let dir = out.join("did").join(outcome.label());
    let path = dir.join("aggregates.csv");
    if !path.exists() {
        return Ok(None);
    }
    let mut reader = TableReader::open(&path)?;
    reader.require(&["kind", "estimate", "se"])?;
    let mut found = None;
    reader.for_each(|row| {
        if found.is_none() && row.raw("kind") == "overall" {
            found = Some((row.f64("estimate")?, row.f64("se")?));
        }
        Ok(())
    })?;
    let (estimate, se) = found.ok_or_else(|| Error::Schema(format!("{}: no overall row", path.display())))?;
    let sample = dir.join("sample.csv");
    let mut observations = None;
    if sample.exists() {
        let mut reader = TableReader::open(&sample)?;
        reader.require(&["observations"])?;
        reader.for_each(|row| {
            observations = row.opt_i64("observations")?.map(|n| n as usize);
            Ok(())
        })?;
    }
    Ok(Some(DashEntry {
        outcome,
        estimate,
        se,
        p_value: normal_two_sided_p(estimate / se),
        observations,
    }))
}

fn thousands(n: usize) -> String {
    let digits = n.to_string();
    let mut out = String::new();
    for (i, c) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(c);
    }
    out
}

/// Text table in blocks of five columns: estimate with stars, standard error
/// in parentheses, then the observation count.
pub fn render_dashboard(entries: &[DashEntry]) -> String {
    let mut out = String::from("Average treatment effect on the treated, firm-level outcomes\n");
    for (b, block) in entries.chunks(5).enumerate() {
        let width = 22;
        let mut lines = vec![
            format!("{:<14}", ""),
            format!("{:<14}", "VARIABLES"),
            format!("{:<14}", "ATET"),
            format!("{:<14}", ""),
            format!("{:<14}", "Observations"),
        ];
        for (i, e) in block.iter().enumerate() {
            lines[0].push_str(&format!("{:>width$}", format!("({})", b * 5 + i + 1)));
            lines[1].push_str(&format!("{:>width$}", e.outcome.heading()));
            lines[2].push_str(&format!("{:>width$}", format!("{:.3}{}", e.estimate, e.stars())));
            lines[3].push_str(&format!("{:>width$}", format!("({:.3})", e.se)));
            let n = e.observations.map(thousands).unwrap_or_default();
            lines[4].push_str(&format!("{n:>width$}"));
        }
        for l in lines {
            out.push_str(l.trim_end());
            out.push('\n');
        }
        out.push('\n');
    }
    out.push_str("Standard errors clustered at the firm level in parentheses.\n*** p<0.01, ** p<0.05, * p<0.1\n");
    out
}

/// Writes `report/dashboard.{csv,txt}` and `report/event_plot.csv`.
/// Outcomes without results are left out; their names come back as warnings.
pub fn write_report(out: &Path, outcomes: &[DashOutcome], manifest: &Manifest) -> Result<Vec<String>> {
    let mut warnings = Vec::new();
    let mut entries = Vec::new();
    for &o in outcomes {
        match read_entry(out, o)? {
            Some(e) => entries.push(e),
            None => warnings.push(format!("no did results for outcome {}, omitted from the dashboard", o.label())),
        }
    }
    let dir = out.join("report");
    let mut w = TableWriter::create(
        &dir.join("dashboard.csv"),
        Some(manifest),
        &["outcome", "heading", "estimate", "se", "p_value", "stars", "observations"],
    )?;
    for e in &entries {
        w.row([
            e.outcome.label().to_string(),
            e.outcome.heading().to_string(),
            fmt_f64(e.estimate),
            fmt_f64(e.se),
            fmt_f64(e.p_value),
            e.stars().to_string(),
            e.observations.map(|n| n.to_string()).unwrap_or_default(),
        ])?;
    }
    w.finish()?;
    write_text(
        &dir.join("dashboard.txt"),
        &format!("{}\n{}", manifest.line(), render_dashboard(&entries)),
    )?;

    let mut w = TableWriter::create(
        &dir.join("event_plot.csv"),
        Some(manifest),
        &["outcome", "e", "estimate", "ci_low", "ci_high"],
    )?;
    for &o in outcomes {
        let path = out.join("did").join(o.label()).join("event_study.csv");
        if !path.exists() {
            if entries.iter().any(|e| e.outcome == o) {
                warnings.push(format!("no event study for outcome {}", o.label()));
            }
            continue;
        }
        let mut reader = TableReader::open(&path)?;
        reader.require(&["e", "estimate", "ci_low", "ci_high"])?;
        let mut rows = Vec::new();
        reader.for_each(|row| {
            rows.push([
                o.label().to_string(),
                row.raw("e").to_string(),
                row.raw("estimate").to_string(),
                row.raw("ci_low").to_string(),
                row.raw("ci_high").to_string(),
            ]);
            Ok(())
        })?;
        for r in rows {
            w.row(r)?;
        }
    }
    w.finish()?;
    Ok(warnings)
}
