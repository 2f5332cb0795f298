//! Suite reports and their json, csv and svg renderings.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// Not evaluated; the note says why.
    Skipped,
    /// Recorded without an assertion.
    Logged,
}

/// Radial samples at uniformly spaced angles, for polar plots.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarCurve {
    pub label: String,
    pub radial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    /// Everything needed to rerun the case.
    pub inputs: BTreeMap<String, serde_json::Value>,
    pub quantities: BTreeMap<String, f64>,
    pub verdict: Verdict,
    /// Signed slack of the asserted inequality; negative means violated.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub note: Option<String>,
    #[serde(skip)]
    pub curves: Vec<PolarCurve>,
}

impl CaseRecord {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            inputs: BTreeMap::new(),
            quantities: BTreeMap::new(),
            verdict: Verdict::Logged,
            margin: None,
            note: None,
            curves: Vec::new(),
        }
    }

    pub fn input<T: Serialize>(mut self, key: &str, value: T) -> Self {
        self.inputs.insert(key.into(), serde_json::to_value(value).expect("inputs serialize"));
        self
    }

    pub fn quantity(&mut self, key: &str, value: f64) -> &mut Self {
        if value.is_finite() {
            self.quantities.insert(key.into(), value);
        }
        self
    }

    /// Pass iff `margin` is nonnegative.
    pub fn assert_margin(&mut self, margin: f64) -> &mut Self {
        self.margin = Some(margin);
        self.verdict = if margin >= 0.0 { Verdict::Pass } else { Verdict::Fail };
        self
    }

    pub fn skip(&mut self, why: impl Into<String>) -> &mut Self {
        self.verdict = Verdict::Skipped;
        self.note = Some(why.into());
        self
    }

    pub fn log(&mut self, note: impl Into<String>) -> &mut Self {
        self.verdict = Verdict::Logged;
        self.note = Some(note.into());
        self
    }

    pub fn curve(&mut self, label: &str, radial: Vec<f64>) -> &mut Self {
        self.curves.push(PolarCurve { label: label.into(), radial });
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub os: String,
    pub arch: String,
    pub dim: usize,
    pub resolution: usize,
    pub quadrature_count: usize,
    pub seed: u64,
    /// FNV-1a of the canonical config json.
    pub config_fingerprint: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub cases: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub logged: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub worst_margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub schema: String,
    pub suite: String,
    pub environment: Environment,
    pub summary: Summary,
    pub cases: Vec<CaseRecord>,
}

impl SuiteReport {
    pub fn new(suite: &str, environment: Environment) -> Self {
        Self { schema: SCHEMA.into(), suite: suite.into(), environment, summary: Summary::default(), cases: Vec::new() }
    }

    pub fn push(&mut self, case: CaseRecord) {
        self.cases.push(case);
        self.summarize();
    }

    fn summarize(&mut self) {
        let mut s = Summary { cases: self.cases.len(), ..Summary::default() };
        for c in &self.cases {
            match c.verdict {
                Verdict::Pass => s.passed += 1,
                Verdict::Fail => s.failed += 1,
                Verdict::Skipped => s.skipped += 1,
                Verdict::Logged => s.logged += 1,
            }
            if matches!(c.verdict, Verdict::Pass | Verdict::Fail) {
                if let Some(m) = c.margin {
                    s.worst_margin = Some(s.worst_margin.map_or(m, |w: f64| w.min(m)));
                }
            }
        }
        self.summary = s;
    }

    pub fn passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn failures(&self) -> impl Iterator<Item = &CaseRecord> {
        self.cases.iter().filter(|c| c.verdict == Verdict::Fail)
    }

    pub fn case(&self, id: &str) -> Option<&CaseRecord> {
        self.cases.iter().find(|c| c.id == id)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.schema != SCHEMA {
            return Err(Error::Format(format!("unsupported report schema {}", r.schema)));
        }
        Ok(r)
    }

    /// One row per case; quantity columns are the union over cases.
    pub fn to_csv(&self) -> String {
        let keys: BTreeSet<&str> = self.cases.iter().flat_map(|c| c.quantities.keys().map(String::as_str)).collect();
        let mut out = String::from("id,verdict,margin");
        for k in &keys {
            let _ = write!(out, ",{k}");
        }
        out.push_str(",note\n");
        for c in &self.cases {
            let verdict = serde_json::to_value(c.verdict).expect("verdict serializes");
            let _ = write!(out, "{},{},", csv_escape(&c.id), verdict.as_str().unwrap_or_default());
            if let Some(m) = c.margin {
                let _ = write!(out, "{m}");
            }
            for k in &keys {
                out.push(',');
                if let Some(v) = c.quantities.get(*k) {
                    let _ = write!(out, "{v}");
                }
            }
            let _ = writeln!(out, ",{}", csv_escape(c.note.as_deref().unwrap_or("")));
        }
        out
    }

    /// One polar plot per case that carries curves.
    pub fn to_svgs(&self) -> Vec<(String, String)> {
        self.cases
            .iter()
            .filter(|c| !c.curves.is_empty())
            .map(|c| (file_stem(&c.id), polar_svg(&c.id, &c.curves)))
            .collect()
    }
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' }).collect()
}

const PALETTE: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

pub fn polar_svg(title: &str, curves: &[PolarCurve]) -> String {
    let size = 400.0;
    let c = size / 2.0;
    let rmax = curves.iter().flat_map(|k| k.radial.iter()).fold(0.0f64, |a, r| a.max(*r)).max(1e-300);
    let scale = 0.42 * size / rmax;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r##"<line x1="0" y1="{c}" x2="{size}" y2="{c}" stroke="#ccc"/><line x1="{c}" y1="0" x2="{c}" y2="{size}" stroke="#ccc"/>"##
    );
    for (k, curve) in curves.iter().enumerate() {
        let m = curve.radial.len();
        let mut pts = String::new();
        for (i, r) in curve.radial.iter().enumerate() {
            let t = 2.0 * std::f64::consts::PI * i as f64 / m as f64;
            let _ = write!(pts, "{:.3},{:.3} ", c + scale * r * t.cos(), c - scale * r * t.sin());
        }
        let color = PALETTE[k % PALETTE.len()];
        let _ =
            writeln!(out, r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.trim_end());
        let _ = writeln!(
            out,
            r#"<text x="8" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{}</text>"#,
            36 + 16 * k,
            xml_escape(&curve.label)
        );
    }
    let _ = writeln!(out, r#"<text x="8" y="18" font-family="sans-serif" font-size="13">{}</text>"#, xml_escape(title));
    out.push_str("</svg>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    SvgBundle,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "svg-bundle" => Ok(Self::SvgBundle),
            other => Err(Error::InvalidParameter(format!("unknown report format {other}"))),
        }
    }
}

/// Writes `report` under `dir`; returns the files written.
pub fn emit_report(report: &SuiteReport, format: ReportFormat, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let stem = file_stem(&report.suite);
    match format {
        ReportFormat::Json => {
            let path = dir.join(format!("{stem}.json"));
            std::fs::write(&path, report.to_json()?)?;
            Ok(vec![path])
        }
        ReportFormat::Csv => {
            let path = dir.join(format!("{stem}.csv"));
            std::fs::write(&path, report.to_csv())?;
            Ok(vec![path])
        }
        ReportFormat::SvgBundle => {
            let sub = dir.join(format!("{stem}_svg"));
            std::fs::create_dir_all(&sub)?;
            let mut written = Vec::new();
            for (name, svg) in report.to_svgs() {
                let path = sub.join(format!("{name}.svg"));
                std::fs::write(&path, svg)?;
                written.push(path);
            }
            Ok(written)
        }
    }
}

/// 64-bit FNV-1a, as lowercase hex.
pub fn fingerprint(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SuiteReport {
        let env = Environment {
            package_version: "0".into(),
            os: "linux".into(),
            arch: "x86_64".into(),
            dim: 2,
            resolution: 64,
            quadrature_count: 32,
            seed: 1,
            config_fingerprint: fingerprint(b"{}"),
        };
        let mut r = SuiteReport::new("demo", env);
        let mut a = CaseRecord::new("a/one").input("phi", "power(2)");
        a.quantity("ratio", 0.99).assert_margin(0.01).curve("k", vec![1.0; 16]);
        r.push(a);
        let mut b = CaseRecord::new("b,two");
        b.quantity("ratio", 1.2).quantity("other", f64::INFINITY).assert_margin(-0.2);
        r.push(b);
        let mut c = CaseRecord::new("c");
        c.skip("unbounded norm");
        r.push(c);
        r
    }

    #[test]
    fn summary_counts_verdicts() {
        let r = sample();
        assert_eq!(r.summary.cases, 3);
        assert_eq!((r.summary.passed, r.summary.failed, r.summary.skipped), (1, 1, 1));
        assert_eq!(r.summary.worst_margin, Some(-0.2));
        assert!(!r.passed());
        assert!(!r.cases[1].quantities.contains_key("other"));
    }

    #[test]
    fn json_round_trips() {
        let r = sample();
        let text = r.to_json().unwrap();
        let back = SuiteReport::from_json(&text).unwrap();
        assert_eq!(back.to_json().unwrap(), text);
        assert!(SuiteReport::from_json(&text.replace("\"v1\"", "\"v0\"")).is_err());
    }

    #[test]
    fn csv_has_one_row_per_case() {
        let r = sample();
        let csv = r.to_csv();
        assert_eq!(csv.lines().count(), 1 + r.cases.len());
        assert!(csv.starts_with("id,verdict,margin,ratio,note\n"));
        assert!(csv.contains("\"b,two\",fail,"));
    }

    #[test]
    fn svg_bundle_has_one_plot_per_body_case() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&sample(), ReportFormat::SvgBundle, dir.path()).unwrap();
        assert_eq!(files.len(), 1);
        let svg = std::fs::read_to_string(&files[0]).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("<polygon"));
        assert_eq!("svg-bundle".parse::<ReportFormat>().unwrap(), ReportFormat::SvgBundle);
    }
}
