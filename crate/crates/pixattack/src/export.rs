//! CSV and JSON artifacts of an attack run.
//!
//! Numbers use Rust's shortest round-trip formatting, so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;
use std::time::Duration;

use pixattack_core::moea::dominates;
use pixattack_core::{AttackReport, HistoryEntry, Image, Parity, SparsePerturbation, Upsampling, VariableIndex};
use pixattack_core::attack::Prediction;
use serde::{Deserialize, Serialize};

use crate::FormatError;

pub const FRONT_HEADER: &str = "f1,f2,predicted_class,success,eval_index";
pub const PERTURBATION_HEADER: &str = "l,w,c,value";
pub const HISTORY_HEADER: &str = "eval_index,f1,f2,predicted_class,confidence,success";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontRow {
    pub f1: f64,
    pub f2: f64,
    pub predicted_class: usize,
    pub success: bool,
    pub eval_index: usize,
}

impl FrontRow {
    fn objectives(&self) -> [f64; 2] {
        [self.f1, self.f2]
    }
}

pub fn front_rows(report: &AttackReport) -> Vec<FrontRow> {
    let mut rows: Vec<FrontRow> = report
        .front
        .iter()
        .map(|p| FrontRow {
            f1: p.objectives[0],
            f2: p.objectives[1],
            predicted_class: p.prediction.class,
            success: p.prediction.class != report.original_class,
            eval_index: p.eval_index,
        })
        .collect();
    sort_front(&mut rows);
    rows
}

/// Ascending `f2`, then `f1`, then evaluation order.
pub fn sort_front(rows: &mut [FrontRow]) {
    rows.sort_by(|a, b| {
        a.f2.total_cmp(&b.f2)
            .then(a.f1.total_cmp(&b.f1))
            .then(a.eval_index.cmp(&b.eval_index))
    });
}

/// Drops rows dominated by another row.
pub fn nondominated(rows: &[FrontRow]) -> Vec<FrontRow> {
    rows.iter()
        .filter(|r| !rows.iter().any(|o| dominates(&o.objectives(), &r.objectives())))
        .copied()
        .collect()
}

pub fn format_front_csv(rows: &[FrontRow]) -> String {
    let mut s = format!("{FRONT_HEADER}\n");
    for r in rows {
        writeln!(s, "{},{},{},{},{}", r.f1, r.f2, r.predicted_class, r.success, r.eval_index).expect("String write");
    }
    s
}

fn csv_body<'a>(text: &'a str, header: &str) -> Result<impl Iterator<Item = (usize, Vec<&'a str>)>, FormatError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == header => {}
        _ => {
            return Err(FormatError::Csv {
                line: 1,
                message: format!("expected header `{header}`"),
            })
        }
    }
    let width = header.split(',').count();
    Ok(lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(move |(i, l)| (i + 1, l.split(',').map(str::trim).collect::<Vec<_>>()))
        .map(move |(i, f)| (i, if f.len() == width { f } else { Vec::new() })))
}

fn field<T: std::str::FromStr>(fields: &[&str], k: usize, line: usize) -> Result<T, FormatError> {
    let raw = fields.get(k).ok_or_else(|| FormatError::Csv {
        line,
        message: "wrong number of fields".into(),
    })?;
    raw.parse().map_err(|_| FormatError::Csv {
        line,
        message: format!("cannot parse field {} ({raw:?})", k + 1),
    })
}

pub fn parse_front_csv(text: &str) -> Result<Vec<FrontRow>, FormatError> {
    csv_body(text, FRONT_HEADER)?
        .map(|(line, f)| {
            Ok(FrontRow {
                f1: field(&f, 0, line)?,
                f2: field(&f, 1, line)?,
                predicted_class: field(&f, 2, line)?,
                success: field(&f, 3, line)?,
                eval_index: field(&f, 4, line)?,
            })
        })
        .collect()
}

/// One changed channel value at image position `(l, w)`, channel `c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelDelta {
    pub row: usize,
    pub col: usize,
    pub channel: usize,
    pub value: f64,
}

/// The nonzero entries of a perturbation, in variable order.
pub fn perturbation_rows(perturbation: &SparsePerturbation, index: &VariableIndex) -> Vec<PixelDelta> {
    perturbation
        .entries()
        .iter()
        .filter(|(_, v)| *v != 0.0)
        .map(|&(slot, value)| {
            let c = index.coord(slot);
            PixelDelta {
                row: c.row,
                col: c.col,
                channel: c.channel,
                value,
            }
        })
        .collect()
}

pub fn format_perturbation_csv(rows: &[PixelDelta]) -> String {
    let mut s = format!("{PERTURBATION_HEADER}\n");
    for r in rows {
        writeln!(s, "{},{},{},{}", r.row, r.col, r.channel, r.value).expect("String write");
    }
    s
}

pub fn parse_perturbation_csv(text: &str) -> Result<Vec<PixelDelta>, FormatError> {
    csv_body(text, PERTURBATION_HEADER)?
        .map(|(line, f)| {
            let value: f64 = field(&f, 3, line)?;
            if !value.is_finite() {
                return Err(FormatError::Csv {
                    line,
                    message: "non-finite value".into(),
                });
            }
            Ok(PixelDelta {
                row: field(&f, 0, line)?,
                col: field(&f, 1, line)?,
                channel: field(&f, 2, line)?,
                value,
            })
        })
        .collect()
}

/// Applies deltas the same way candidates are built during the attack:
/// round half away from zero, then clamp to `[0, 255]`.
pub fn apply_deltas(image: &Image, rows: &[PixelDelta]) -> Result<Image, FormatError> {
    let mut out = image.clone();
    for r in rows {
        if r.row >= image.height() || r.col >= image.width() || r.channel >= image.channels() {
            return Err(FormatError::OutOfImage {
                row: r.row,
                col: r.col,
                channel: r.channel,
            });
        }
        let v = (f64::from(image.get(r.row, r.col, r.channel)) + r.value).round().clamp(0.0, 255.0);
        out.set(r.row, r.col, r.channel, v as u8);
    }
    Ok(out)
}

/// The `success` column is left empty when the original class is unknown.
pub fn format_history_csv(history: &[HistoryEntry<Prediction>], original_class: Option<usize>) -> String {
    let mut s = format!("{HISTORY_HEADER}\n");
    for e in history {
        writeln!(
            s,
            "{},{},{},{},{},{}",
            e.eval_index,
            e.objectives[0],
            e.objectives[1],
            e.meta.class,
            e.meta.confidence,
            original_class.map_or(String::new(), |c0| (e.meta.class != c0).to_string())
        )
        .expect("String write");
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSettings {
    pub seed: u64,
    pub population_size: usize,
    pub max_evaluations: usize,
    pub crossover_eta: f64,
    pub mutation_eta: f64,
    pub crossover_probability: f64,
    /// Resolved per-variable rate (defaults to 1/d).
    pub mutation_probability: f64,
    pub use_attention: bool,
    pub use_parity: bool,
    pub parity: String,
    pub delta_max: Option<f64>,
    pub final_from_front_only: bool,
    pub upsampling: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalExample {
    pub eval_index: usize,
    pub predicted_class: usize,
    pub confidence: f64,
    pub original_probability: f64,
    pub l2: f64,
    pub changed_values: usize,
    pub changed_pixels: usize,
}

/// Machine-readable run summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub image: String,
    pub oracle: String,
    pub attention: String,
    pub success: bool,
    pub original_class: usize,
    pub clean_confidence: f64,
    pub queries: usize,
    pub evaluations: usize,
    pub generations: usize,
    pub dimension: usize,
    pub mask_pixels: usize,
    pub used_fallback: bool,
    pub wall_time_seconds: Option<f64>,
    pub settings: SearchSettings,
    pub final_example: Option<FinalExample>,
    pub front: Vec<FrontRow>,
    pub warnings: Vec<String>,
}

/// Where the run's inputs came from, for the report header.
#[derive(Debug, Clone, Default)]
pub struct RunLabels {
    pub image: String,
    pub oracle: String,
    pub attention: String,
}

impl ReportFile {
    pub fn from_report(report: &AttackReport, labels: &RunLabels, wall_time: Option<Duration>) -> Self {
        let cfg = &report.config;
        let d = report.dimension();
        let final_example = report.final_ae.as_ref().map(|ae| {
            let rows = perturbation_rows(&ae.perturbation, &report.index);
            let mut pixels: Vec<(usize, usize)> = rows.iter().map(|r| (r.row, r.col)).collect();
            pixels.dedup();
            FinalExample {
                eval_index: ae.eval_index,
                predicted_class: ae.class,
                confidence: ae.confidence,
                original_probability: ae.original_probability,
                l2: ae.l2,
                changed_values: rows.len(),
                changed_pixels: pixels.len(),
            }
        });
        ReportFile {
            version: 1,
            image: labels.image.clone(),
            oracle: labels.oracle.clone(),
            attention: labels.attention.clone(),
            success: report.succeeded(),
            original_class: report.original_class,
            clean_confidence: report.clean_confidence,
            queries: report.queries,
            evaluations: report.history.len(),
            generations: report.generations,
            dimension: d,
            mask_pixels: report.mask.count(),
            used_fallback: report.used_fallback,
            wall_time_seconds: wall_time.or(report.wall_time).map(|t| t.as_secs_f64()),
            settings: SearchSettings {
                seed: cfg.moea.seed,
                population_size: cfg.moea.population_size,
                max_evaluations: cfg.moea.max_evaluations,
                crossover_eta: cfg.moea.crossover_eta,
                mutation_eta: cfg.moea.mutation_eta,
                crossover_probability: cfg.moea.crossover_probability,
                mutation_probability: cfg.moea.mutation_probability_for(d),
                use_attention: cfg.use_attention,
                use_parity: cfg.use_parity,
                parity: match cfg.parity {
                    Parity::Even => "even".into(),
                    Parity::Odd => "odd".into(),
                },
                delta_max: cfg.delta_max,
                final_from_front_only: cfg.final_from_front_only,
                upsampling: match cfg.upsampling {
                    Upsampling::Bilinear => "bilinear".into(),
                    Upsampling::Nearest => "nearest".into(),
                },
            },
            final_example,
            front: front_rows(report),
            warnings: report.warnings.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization cannot fail");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// `f2 f1` pairs, one per line, for plotting tools.
pub fn format_plot_data(rows: &[FrontRow]) -> String {
    let mut s = String::from("# f2 f1\n");
    for r in rows {
        writeln!(s, "{} {}", r.f2, r.f1).expect("String write");
    }
    s
}
