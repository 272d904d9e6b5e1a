// SPDX-License-Identifier: Apache-2.0

//! Result tables: a CSV per run, a Markdown table across runs, a
//! full-precision JSON sidecar and per-category means for plotting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, EvalCell};
use crate::perturb::{Category, OpId};

pub const REPORT_CSV_HEADER: [&str; 7] = [
    "detector",
    "trainset",
    "op_id",
    "category",
    "auc_percent",
    "n_real",
    "n_fake",
];
const AVERAGE_ROW: &str = "average";

/// Keys every run manifest must carry.
pub const RUN_MANIFEST_KEYS: [&str; 12] = [
    "auc_level",
    "codec_decode_template",
    "codec_encode_template",
    "codec_timeout",
    "dataset",
    "finished_at",
    "frame_sample_k",
    "global_seed",
    "operations",
    "scorer",
    "started_at",
    "tool_versions",
];

pub type RunManifest = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AucLevel {
    #[default]
    Video,
    Frame,
}

impl AucLevel {
    pub fn as_str(self) -> &'static str {
        match self {
            AucLevel::Video => "video",
            AucLevel::Frame => "frame",
        }
    }
}

/// Two decimals, half away from zero.
pub fn fmt2(v: f64) -> String {
    format!("{:.2}", (v * 100.0).round() / 100.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detector_name: String,
    pub trainset_tag: String,
    pub auc_level: AucLevel,
    /// Present cells in canonical op order.
    pub cells: Vec<EvalCell>,
    /// Configured ops without a cell (only with partial evaluation).
    #[serde(default)]
    pub missing: Vec<OpId>,
    pub average: f64,
    /// AUC on the unaltered test set, when it was scored.
    #[serde(default)]
    pub reference_auc_percent: Option<f64>,
    pub run_manifest: RunManifest,
}

impl EvalReport {
    pub fn new(
        detector_name: impl Into<String>,
        trainset_tag: impl Into<String>,
        auc_level: AucLevel,
        mut cells: Vec<EvalCell>,
        mut missing: Vec<OpId>,
        run_manifest: RunManifest,
    ) -> Result<Self> {
        metrics::check_unique(&cells)?;
        cells.sort_by_key(|c| c.op_id.rank());
        missing.sort_by_key(|o| o.rank());
        missing.dedup();
        if let Some(op) = missing.iter().find(|o| cells.iter().any(|c| c.op_id == **o)) {
            return Err(Error::Report(format!("op {op} is both present and missing")));
        }
        let average = metrics::row_average(&cells)?;
        let report = Self {
            detector_name: detector_name.into(),
            trainset_tag: trainset_tag.into(),
            auc_level,
            cells,
            missing,
            average,
            reference_auc_percent: None,
            run_manifest,
        };
        report.validate()?;
        Ok(report)
    }

    pub fn validate(&self) -> Result<()> {
        let avg = metrics::row_average(&self.cells)?;
        if (avg - self.average).abs() > 1e-9 {
            return Err(Error::Report(format!(
                "average {} disagrees with cells ({avg})",
                self.average
            )));
        }
        if let Some(c) = self.cells.iter().find(|c| !(0.0..=100.0).contains(&c.auc_percent)) {
            return Err(Error::Report(format!("{}: auc {} outside [0, 100]", c.op_id, c.auc_percent)));
        }
        let missing: Vec<&str> = RUN_MANIFEST_KEYS
            .iter()
            .copied()
            .filter(|k| !self.run_manifest.contains_key(*k))
            .collect();
        if !missing.is_empty() {
            return Err(Error::Report(format!("run manifest lacks {}", missing.join(", "))));
        }
        Ok(())
    }

    /// Every configured op, present or missing.
    pub fn op_coverage(&self) -> BTreeSet<OpId> {
        self.cells.iter().map(|c| c.op_id).chain(self.missing.iter().copied()).collect()
    }

    fn cell(&self, op: OpId) -> Option<&EvalCell> {
        self.cells.iter().find(|c| c.op_id == op)
    }

    pub fn to_rows(&self) -> ReportRows {
        let mut ops: Vec<OpId> = self.op_coverage().into_iter().collect();
        ops.sort_by_key(|o| o.rank());
        ReportRows {
            detector: self.detector_name.clone(),
            trainset: self.trainset_tag.clone(),
            cells: ops
                .into_iter()
                .map(|op| {
                    let c = self.cell(op);
                    CsvCell {
                        op_id: op,
                        auc_percent: c.map(|c| fmt2(c.auc_percent)),
                        n_real: c.map(|c| c.n_real),
                        n_fake: c.map(|c| c.n_fake),
                    }
                })
                .collect(),
            average: fmt2(self.average),
        }
    }
}

/// One report as printed in CSV: values already formatted.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRows {
    pub detector: String,
    pub trainset: String,
    pub cells: Vec<CsvCell>,
    pub average: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvCell {
    pub op_id: OpId,
    /// `None` marks a gap in a partial report.
    pub auc_percent: Option<String>,
    pub n_real: Option<usize>,
    pub n_fake: Option<usize>,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn render_csv(reports: &[ReportRows]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(REPORT_CSV_HEADER).map_err(err)?;
    for r in reports {
        for c in &r.cells {
            w.write_record([
                r.detector.as_str(),
                r.trainset.as_str(),
                c.op_id.as_str(),
                c.op_id.category().id(),
                &opt(c.auc_percent.as_deref()),
                &opt(c.n_real),
                &opt(c.n_fake),
            ])
            .map_err(err)?;
        }
        w.write_record([r.detector.as_str(), r.trainset.as_str(), AVERAGE_ROW, "", &r.average, "", ""])
            .map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Report(e.to_string()))
}

pub fn emit_csv(report: &EvalReport, path: &Path) -> Result<()> {
    report.validate()?;
    write_bytes(path, &render_csv(&[report.to_rows()])?)
}

/// Parses a report CSV back into its printed rows.
pub fn parse_csv(path: &Path) -> Result<Vec<ReportRows>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(bytes.as_slice());
    let bad = |line: u64, m: String| Error::Report(format!("{}, line {line}: {m}", path.display()));
    let header = rdr.headers().map_err(|e| bad(1, e.to_string()))?.clone();
    if header.iter().collect::<Vec<_>>() != REPORT_CSV_HEADER {
        return Err(bad(1, format!("header must be `{}`", REPORT_CSV_HEADER.join(","))));
    }
    let mut out: Vec<ReportRows> = Vec::new();
    let mut open: Option<ReportRows> = None;
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| bad(line, e.to_string()))?;
        let f = |k: usize| rec.get(k).unwrap_or("").to_string();
        let (detector, trainset, op) = (f(0), f(1), f(2));
        let row = open.get_or_insert_with(|| ReportRows {
            detector: detector.clone(),
            trainset: trainset.clone(),
            cells: Vec::new(),
            average: String::new(),
        });
        if row.detector != detector || row.trainset != trainset {
            return Err(bad(line, "rows of a report must end with its average row".into()));
        }
        if op == AVERAGE_ROW {
            row.average = f(4);
            out.push(open.take().expect("open report"));
            continue;
        }
        let op_id = OpId::from_str(&op).map_err(|e| bad(line, e.to_string()))?;
        if f(3) != op_id.category().id() {
            return Err(bad(line, format!("category {:?} does not match op {op_id}", f(3))));
        }
        let num = |k: usize| -> Result<Option<usize>> {
            let s = f(k);
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(line, format!("bad count {s:?}")))
            }
        };
        let auc = f(4);
        row.cells.push(CsvCell {
            op_id,
            auc_percent: (!auc.is_empty()).then_some(auc),
            n_real: num(5)?,
            n_fake: num(6)?,
        });
    }
    if open.is_some() {
        return Err(bad(0, "report without average row".into()));
    }
    Ok(out)
}

/// Markdown table with one row per report. All reports must cover the same
/// operations.
pub fn render_markdown(reports: &[EvalReport]) -> Result<String> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Report("no reports to render".into()))?;
    let coverage = first.op_coverage();
    for r in &reports[1..] {
        if r.op_coverage() != coverage {
            return Err(Error::Report(format!(
                "inconsistent operations: {}/{} vs {}/{}",
                first.detector_name, first.trainset_tag, r.detector_name, r.trainset_tag
            )));
        }
    }
    let mut ops: Vec<OpId> = coverage.into_iter().collect();
    ops.sort_by_key(|o| o.rank());

    let per_category = |cat: Category| ops.iter().filter(|o| o.category() == cat).count();
    let title = |op: OpId| {
        if per_category(op.category()) > 1 {
            format!("{}: {}", op.category().title(), op.column_title())
        } else {
            op.category().title().to_string()
        }
    };

    let mut md = String::new();
    md.push_str("| Method | TrainSet |");
    for &op in &ops {
        let _ = write!(md, " {} |", title(op));
    }
    md.push_str(" Average |\n|---|---|");
    for _ in &ops {
        md.push_str("---:|");
    }
    md.push_str("---:|\n");
    for r in reports {
        let rows = r.to_rows();
        let _ = write!(md, "| {} | {} |", escape_md(&rows.detector), escape_md(&rows.trainset));
        for c in &rows.cells {
            let _ = write!(md, " {} |", c.auc_percent.as_deref().unwrap_or("–"));
        }
        let _ = writeln!(md, " {} |", rows.average);
    }
    let _ = writeln!(
        md,
        "\nAUC (%) at {} level.",
        first.auc_level.as_str()
    );
    Ok(md)
}

fn escape_md(s: &str) -> String {
    s.replace('|', "\\|")
}

pub fn emit_markdown(reports: &[EvalReport], path: &Path) -> Result<()> {
    let md = render_markdown(reports)?;
    write_bytes(path, md.as_bytes())
}

/// Full-precision sidecar.
pub fn emit_json(report: &EvalReport, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report).map_err(|e| Error::Report(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json(path: &Path) -> Result<EvalReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Report(format!("{}: {e}", path.display())))
}

/// `category,mean_auc_percent` rows for bar charts.
pub fn emit_category_means(report: &EvalReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Report(e.to_string());
    w.write_record(["category", "mean_auc_percent"]).map_err(err)?;
    for (cat, mean) in metrics::category_means(&report.cells)? {
        w.write_record([cat.id(), &fmt2(mean)]).map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Report(e.to_string()))?;
    write_bytes(path, &bytes)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
