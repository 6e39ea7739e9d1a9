//! Post-hoc evaluation of a workspace into report files.

use std::fs;

use anyhow::{bail, Result};
use evalbench_core::evaluation::{Report, TestOutcome};
use evalbench_core::kernels::stats::ALPHA;
use evalbench_core::model::{ExpectedBehaviorTable, MeasureRegistry};

use crate::cache::publish;
use crate::store::Workspace;

/// Builds the report from the stored records; never modifies them.
pub fn build_report(ws: &Workspace) -> Result<Report> {
    let records = ws.records()?;
    let terminal: Vec<TestOutcome> = records
        .iter()
        .filter(|r| r.status.is_terminal())
        .map(|r| r.outcome())
        .collect();
    if terminal.is_empty() {
        bail!("workspace {} has no finished tests", ws.dir.display());
    }
    let alpha = ws.load_config().map(|c| c.alpha).unwrap_or(ALPHA);
    Ok(Report::build(
        &terminal,
        &MeasureRegistry::builtin(),
        &ExpectedBehaviorTable::standard(),
        alpha,
    ))
}

/// Writes every report file plus the measure catalog into `reports/`; returns the file names.
pub fn write_reports(ws: &Workspace, report: &Report) -> Result<Vec<String>> {
    let dir = ws.reports_dir();
    fs::create_dir_all(&dir)?;
    let mut files = report.files()?;
    files.push(("measures.json".to_string(), MeasureRegistry::builtin().catalog_json()?));
    let mut names = Vec::with_capacity(files.len());
    for (name, contents) in files {
        publish(&dir.join(&name), contents.as_bytes())?;
        names.push(name);
    }
    Ok(names)
}
