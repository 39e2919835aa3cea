//! Human-readable artifacts: run manifests, metric tables and confusion plots.
//!
//! Display numbers round half-to-even on the exact binary value (Rust's `{:.N}`
//! formatting). JSON artifacts keep full precision.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusError};
use crate::eval::{ConfusionMatrix, EvaluationReport, MetricBlock};
use crate::hashing::sha256_hex;
use crate::label::Label;

/// F1 of the organizers' baseline. Shown in tables for reference only.
pub const BASELINE_F1: f64 = 0.807;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Io(#[from] CorpusError),
    #[error("image encoding failed for {path}: {message}")]
    Image { path: String, message: String },
    #[error("unsupported plot extension {0:?} (expected .png or .svg)")]
    Extension(String),
}

/// Provenance for one CLI invocation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_fingerprint: String,
    pub input_fingerprints: BTreeMap<String, String>,
    pub tool_version: String,
    pub timestamp: String,
    pub artifacts: Vec<String>,
}

impl RunManifest {
    /// `config` is hashed through its JSON form. The timestamp honors
    /// `SOURCE_DATE_EPOCH` so repeated runs can be byte-identical.
    pub fn new<C: Serialize>(command: &str, config: &C) -> Self {
        let config_json = serde_json::to_string(config).expect("config serializes");
        RunManifest {
            command: command.to_string(),
            config_fingerprint: sha256_hex(config_json.as_bytes()),
            input_fingerprints: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: timestamp_now(),
            artifacts: Vec::new(),
        }
    }

    pub fn add_input(&mut self, name: &str, path: &Path) -> Result<(), ReportError> {
        let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.input_fingerprints.insert(name.to_string(), sha256_hex(&bytes));
        Ok(())
    }

    pub fn add_artifact(&mut self, name: impl Into<String>) {
        self.artifacts.push(name.into());
    }

    /// `run_manifest.<command>.json`, so commands sharing a directory keep
    /// their own manifests.
    pub fn file_name(&self) -> String {
        format!("run_manifest.{}.json", self.command)
    }

    /// Writes the manifest into `dir` and returns its path.
    pub fn write(&self, dir: &Path) -> Result<std::path::PathBuf, ReportError> {
        let path = dir.join(self.file_name());
        write_json(&path, self)?;
        Ok(path)
    }
}

fn timestamp_now() -> String {
    let at = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0))
        .unwrap_or_else(chrono::Utc::now);
    at.to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

#[derive(Serialize)]
struct WithManifest<'a, T: Serialize> {
    run_manifest: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), ReportError> {
    let mut s = serde_json::to_string_pretty(value).expect("artifact serializes");
    s.push('\n');
    Ok(corpus::write_file(path, s.as_bytes())?)
}

/// Writes a JSON artifact with a top-level `run_manifest` reference.
pub fn write_json_artifact<T: Serialize>(path: &Path, manifest: &str, value: &T) -> Result<(), ReportError> {
    write_json(
        path,
        &WithManifest {
            run_manifest: manifest,
            body: value,
        },
    )
}

fn fmt2(x: f64) -> String {
    format!("{x:.2}")
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableFormat {
    Markdown,
    Latex,
}

fn domain_rows(report: &EvaluationReport) -> Vec<(String, &MetricBlock)> {
    let mut rows: Vec<(String, &MetricBlock)> = report
        .domain_slices
        .iter()
        .map(|(name, slice)| (name.clone(), &slice.metrics))
        .collect();
    rows.push(("Overall".into(), &report.overall));
    rows
}

/// Domain-wise table: Domain, support, A, P, R, F1 and an Overall row, all
/// metrics to two decimals.
pub fn domain_table(report: &EvaluationReport, format: TableFormat, manifest: &str) -> String {
    let rows = domain_rows(report);
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str("| Domain | support | A | P | R | F1 |\n");
            out.push_str("|---|---:|---:|---:|---:|---:|\n");
            for (name, m) in rows {
                out.push_str(&format!(
                    "| {name} | {} | {} | {} | {} | {} |\n",
                    m.support,
                    fmt2(m.accuracy),
                    fmt2(m.macro_avg.precision),
                    fmt2(m.macro_avg.recall),
                    fmt2(m.macro_avg.f1)
                ));
            }
            out.push_str(&format!("\n<!-- run_manifest: {manifest} -->\n"));
        }
        TableFormat::Latex => {
            out.push_str(&format!("% run_manifest: {manifest}\n"));
            out.push_str("\\begin{tabular}{|c|c|c|c|c|c|}\n\\hline\n");
            out.push_str("\\textbf{Domain} & \\textbf{support} & \\textbf{A} & \\textbf{P} & \\textbf{R} & \\textbf{F1} \\\\\n\\hline\n");
            for (name, m) in rows {
                if name == "Overall" {
                    out.push_str("\\hline\n");
                }
                out.push_str(&format!(
                    "{} & {} & {} & {} & {} & {} \\\\\n",
                    latex_escape(&name),
                    m.support,
                    fmt2(m.accuracy),
                    fmt2(m.macro_avg.precision),
                    fmt2(m.macro_avg.recall),
                    fmt2(m.macro_avg.f1)
                ));
            }
            out.push_str("\\hline\n\\end{tabular}\n");
        }
    }
    out
}

pub fn emit_domain_table(
    report: &EvaluationReport,
    path: &Path,
    format: TableFormat,
    manifest: &str,
) -> Result<(), ReportError> {
    Ok(corpus::write_file(path, domain_table(report, format, manifest).as_bytes())?)
}

/// Row labels for the leaderboard-style metrics table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunLabel {
    pub model: String,
    pub trained_on: String,
    pub alignment: String,
}

impl Default for RunLabel {
    fn default() -> Self {
        RunLabel {
            model: "reference-tiny".into(),
            trained_on: "-".into(),
            alignment: "None".into(),
        }
    }
}

/// Leaderboard-style table: model, training data, alignment, then A, P, R,
/// F1 with macro P/R/F1, plus the baseline row. A second table gives the
/// support-weighted P/R/F1.
pub fn metrics_table(report: &EvaluationReport, run: &RunLabel, format: TableFormat, manifest: &str) -> String {
    let m = &report.overall;
    let mut out = String::new();
    match format {
        TableFormat::Markdown => {
            out.push_str("| LLM Used | Trained on | Alignment approach | A | P | R | F1 |\n");
            out.push_str("|---|---|---|---:|---:|---:|---:|\n");
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} |\n",
                run.model,
                run.trained_on,
                run.alignment,
                fmt3(m.accuracy),
                fmt3(m.macro_avg.precision),
                fmt3(m.macro_avg.recall),
                fmt3(m.macro_avg.f1)
            ));
            out.push_str(&format!("| baseline | - | - | - | - | - | {} |\n", fmt3(BASELINE_F1)));
            out.push_str("\nSupport-weighted variants:\n\n| P (weighted) | R (weighted) | F1 (weighted) |\n|---:|---:|---:|\n");
            out.push_str(&format!(
                "| {} | {} | {} |\n",
                fmt3(m.weighted.precision),
                fmt3(m.weighted.recall),
                fmt3(m.weighted.f1)
            ));
            out.push_str(&format!(
                "\nType-1 errors: {} | Type-2 errors: {} | correct: {} | unparsed generations: {}\n",
                report.error_counts.type1, report.error_counts.type2, report.error_counts.correct, report.nomatch_count
            ));
            out.push_str(&format!("\n<!-- run_manifest: {manifest} -->\n"));
        }
        TableFormat::Latex => {
            out.push_str(&format!("% run_manifest: {manifest}\n"));
            out.push_str("\\begin{tabular}{|c|c|c|c|c|c|c|}\n\\hline\n");
            out.push_str("\\textbf{LLM Used} & \\textbf{Trained on} & \\textbf{Alignment approach} & \\textbf{A} & \\textbf{P} & \\textbf{R} & \\textbf{F1} \\\\\n\\hline\n");
            out.push_str(&format!(
                "{} & {} & {} & {} & {} & {} & {} \\\\\n\\hline\n",
                latex_escape(&run.model),
                latex_escape(&run.trained_on),
                latex_escape(&run.alignment),
                fmt3(m.accuracy),
                fmt3(m.macro_avg.precision),
                fmt3(m.macro_avg.recall),
                fmt3(m.macro_avg.f1)
            ));
            out.push_str(&format!("baseline & - & - & - & - & - & {} \\\\\n\\hline\n", fmt3(BASELINE_F1)));
            out.push_str("\\end{tabular}\n");
        }
    }
    out
}

fn latex_escape(s: &str) -> String {
    s.chars()
        .flat_map(|c| match c {
            '&' | '%' | '$' | '#' | '_' | '{' | '}' => vec!['\\', c],
            _ => vec![c],
        })
        .collect()
}

/// JSON written next to every plot; its counts are the plotted cell values.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotSidecar {
    pub run_manifest: String,
    pub labels: Vec<Label>,
    pub rows: String,
    pub columns: String,
    pub counts: [[u64; 3]; 3],
}

impl PlotSidecar {
    pub fn for_matrix(m: &ConfusionMatrix, manifest: &str) -> Self {
        PlotSidecar {
            run_manifest: manifest.into(),
            labels: Label::ALL.to_vec(),
            rows: "gold".into(),
            columns: "predicted".into(),
            counts: m.counts,
        }
    }
}

pub fn sidecar_path(plot: &Path) -> std::path::PathBuf {
    let mut name = plot.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".json");
    plot.with_file_name(name)
}

/// Writes a 3×3 heatmap (gold on rows, predictions on columns) as PNG or SVG,
/// chosen by extension, plus a `<plot>.json` sidecar.
pub fn emit_confusion_plot(m: &ConfusionMatrix, path: &Path, manifest: &str) -> Result<(), ReportError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    match ext.as_str() {
        "svg" => corpus::write_file(path, confusion_svg(m, manifest).as_bytes())?,
        "png" => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                std::fs::create_dir_all(parent).map_err(|source| CorpusError::Io {
                    path: parent.to_path_buf(),
                    source,
                })?;
            }
            confusion_png(m).save(path).map_err(|e| ReportError::Image {
                path: path.display().to_string(),
                message: e.to_string(),
            })?
        }
        other => return Err(ReportError::Extension(other.to_string())),
    }
    write_json(&sidecar_path(path), &PlotSidecar::for_matrix(m, manifest))
}

/// White-to-blue ramp.
fn cell_color(count: u64, max: u64) -> [u8; 3] {
    let t = if max == 0 { 0.0 } else { count as f64 / max as f64 };
    let lerp = |from: f64, to: f64| (from + (to - from) * t).round() as u8;
    [lerp(247.0, 8.0), lerp(251.0, 48.0), lerp(255.0, 107.0)]
}

fn ink(count: u64, max: u64) -> [u8; 3] {
    if max > 0 && count * 2 > max {
        [255, 255, 255]
    } else {
        [0, 0, 0]
    }
}

const CELL: u32 = 130;
const LEFT: u32 = 120;
const TOP: u32 = 60;

pub fn confusion_svg(m: &ConfusionMatrix, manifest: &str) -> String {
    let max = m.counts.iter().flatten().copied().max().unwrap_or(0);
    let size = (LEFT + 3 * CELL + 20, TOP + 3 * CELL + 40);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\">\n<!-- run_manifest: {manifest} -->\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        size.0, size.1
    );
    s.push_str(&format!(
        "<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"16\">Predicted</text>\n",
        LEFT + 3 * CELL / 2
    ));
    s.push_str(&format!(
        "<text x=\"20\" y=\"{y}\" text-anchor=\"middle\" font-size=\"16\" transform=\"rotate(-90 20 {y})\">Gold</text>\n",
        y = TOP + 3 * CELL / 2
    ));
    for (i, label) in Label::ALL.iter().enumerate() {
        let i = i as u32;
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{label}</text>\n",
            LEFT + i * CELL + CELL / 2,
            TOP - 10
        ));
        s.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"14\">{label}</text>\n",
            LEFT - 8,
            TOP + i * CELL + CELL / 2 + 5
        ));
    }
    for gold in Label::ALL {
        for pred in Label::ALL {
            let count = m.get(gold, pred);
            let [r, g, b] = cell_color(count, max);
            let [tr, tg, tb] = ink(count, max);
            let x = LEFT + pred.index() as u32 * CELL;
            let y = TOP + gold.index() as u32 * CELL;
            s.push_str(&format!(
                "<rect x=\"{x}\" y=\"{y}\" width=\"{CELL}\" height=\"{CELL}\" fill=\"rgb({r},{g},{b})\" stroke=\"#444\"/>\n"
            ));
            s.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"28\" fill=\"rgb({tr},{tg},{tb})\">{count}</text>\n",
                x + CELL / 2,
                y + CELL / 2 + 10
            ));
        }
    }
    s.push_str("</svg>\n");
    s
}

/// 5×7 bitmap glyphs for the characters the plot needs.
fn glyph(c: char) -> Option<[&'static str; 7]> {
    Some(match c {
        '0' => ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
        '1' => ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
        '2' => ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
        '3' => ["11110", "00001", "00001", "01110", "00001", "00001", "11110"],
        '4' => ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
        '5' => ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
        '6' => ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
        '7' => ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
        '8' => ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
        '9' => ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
        'A' => ["01110", "10001", "10001", "11111", "10001", "10001", "10001"],
        'C' => ["01110", "10001", "10000", "10000", "10000", "10001", "01110"],
        'D' => ["11110", "10001", "10001", "10001", "10001", "10001", "11110"],
        'E' => ["11111", "10000", "10000", "11110", "10000", "10000", "11111"],
        'G' => ["01110", "10001", "10000", "10111", "10001", "10001", "01111"],
        'I' => ["01110", "00100", "00100", "00100", "00100", "00100", "01110"],
        'L' => ["10000", "10000", "10000", "10000", "10000", "10000", "11111"],
        'N' => ["10001", "11001", "10101", "10011", "10001", "10001", "10001"],
        'O' => ["01110", "10001", "10001", "10001", "10001", "10001", "01110"],
        'P' => ["11110", "10001", "10001", "11110", "10000", "10000", "10000"],
        'R' => ["11110", "10001", "10001", "11110", "10100", "10010", "10001"],
        'T' => ["11111", "00100", "00100", "00100", "00100", "00100", "00100"],
        'U' => ["10001", "10001", "10001", "10001", "10001", "10001", "01110"],
        _ => return None,
    })
}

fn text_width(text: &str, scale: u32) -> u32 {
    text.chars().count() as u32 * 6 * scale
}

fn draw_text(img: &mut image::RgbImage, text: &str, x: u32, y: u32, scale: u32, color: [u8; 3]) {
    for (i, c) in text.chars().enumerate() {
        let Some(rows) = glyph(c.to_ascii_uppercase()) else {
            continue;
        };
        let ox = x + i as u32 * 6 * scale;
        for (ry, row) in rows.iter().enumerate() {
            for (rx, bit) in row.bytes().enumerate() {
                if bit != b'1' {
                    continue;
                }
                for dy in 0..scale {
                    for dx in 0..scale {
                        let (px, py) = (ox + rx as u32 * scale + dx, y + ry as u32 * scale + dy);
                        if px < img.width() && py < img.height() {
                            img.put_pixel(px, py, image::Rgb(color));
                        }
                    }
                }
            }
        }
    }
}

pub fn confusion_png(m: &ConfusionMatrix) -> image::RgbImage {
    let max = m.counts.iter().flatten().copied().max().unwrap_or(0);
    let mut img = image::RgbImage::from_pixel(LEFT + 3 * CELL + 20, TOP + 3 * CELL + 20, image::Rgb([255, 255, 255]));
    draw_text(&mut img, "GOLD", 8, TOP - 36, 2, [0, 0, 0]);
    let pred_w = text_width("PREDICTED", 2);
    draw_text(&mut img, "PREDICTED", LEFT + (3 * CELL - pred_w) / 2, 6, 2, [0, 0, 0]);
    for (i, label) in Label::ALL.iter().enumerate() {
        let name = label.as_str();
        let w = text_width(name, 2);
        draw_text(&mut img, name, LEFT + i as u32 * CELL + (CELL.saturating_sub(w)) / 2, TOP - 20, 2, [0, 0, 0]);
        draw_text(&mut img, name, LEFT.saturating_sub(w + 6), TOP + i as u32 * CELL + CELL / 2 - 7, 2, [0, 0, 0]);
    }
    for gold in Label::ALL {
        for pred in Label::ALL {
            let count = m.get(gold, pred);
            let x0 = LEFT + pred.index() as u32 * CELL;
            let y0 = TOP + gold.index() as u32 * CELL;
            let fill = cell_color(count, max);
            for y in y0..y0 + CELL {
                for x in x0..x0 + CELL {
                    let edge = x == x0 || y == y0 || x == x0 + CELL - 1 || y == y0 + CELL - 1;
                    img.put_pixel(x, y, image::Rgb(if edge { [68, 68, 68] } else { fill }));
                }
            }
            let text = count.to_string();
            let w = text_width(&text, 4);
            draw_text(&mut img, &text, x0 + (CELL.saturating_sub(w)) / 2, y0 + CELL / 2 - 14, 4, ink(count, max));
        }
    }
    img
}
