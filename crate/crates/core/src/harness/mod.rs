//! Experiment orchestration: configuration, end-to-end runs, waist scans and
//! report artifacts.

mod config;
mod heatmap;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

pub use config::{Classifier, ExperimentConfig, IndexPixelSource, Weighting, SCHEMA_VERSION};
pub use heatmap::{emit_heatmap, parse_pgm, parse_svg, render_pgm, render_svg};

use crate::cc::{self, CoordConvention, IndexPixelSet};
use crate::confusion::{self, ConfusionMatrix};
use crate::dataset::{Dataset, NUM_LABELS};
use crate::error::{Error, Result};
use crate::optics::FieldGrid;
use crate::qc::{self, ModeBank, ModeSet, SearchOptions};

/// Summary of a finished run; the echoed config reproduces it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub classifier: Classifier,
    pub confusion_csv: PathBuf,
    pub confusion_json: PathBuf,
    pub heatmap: PathBuf,
    pub report: PathBuf,
    pub fidelity: f64,
    pub fidelity_sigma: f64,
    pub per_label_accuracy: [f64; NUM_LABELS],
    pub no_detection: [u64; NUM_LABELS],
    pub no_detection_total: u64,
    pub total_events: u64,
    pub excluded: Vec<usize>,
    pub details: serde_json::Value,
    pub config: ExperimentConfig,
    pub tool_version: String,
    pub wall_clock_seconds: f64,
}

/// Output of [`analyze`]: the matrix plus run-specific facts.
#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub matrix: ConfusionMatrix,
    pub details: serde_json::Value,
}

/// Index pixels selected by the configured source.
pub fn index_pixels(config: &ExperimentConfig, dataset: &Dataset) -> Result<IndexPixelSet> {
    match config.index_pixels {
        IndexPixelSource::Reference => IndexPixelSet::reference(config.coord_convention),
        IndexPixelSource::File => {
            let path = config.index_pixel_file.as_ref().expect("checked by validate");
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
        }
        IndexPixelSource::Select => {
            let counts = match config.cc_weighting {
                Weighting::Uniform => cc::pixel_label_counts(dataset),
                Weighting::Beam => cc::weighted_pixel_label_counts(dataset, &cc_beam(config)?)?,
            };
            cc::select_index_pixels(&counts)
        }
    }
}

fn cc_beam(config: &ExperimentConfig) -> Result<FieldGrid> {
    let g = config.geometry_for(&[])?;
    match config.cc_weighting {
        Weighting::Uniform => FieldGrid::uniform(g),
        Weighting::Beam => config.beam(&g),
    }
}

/// The configured mode set, searching for one when `modeset` is `search`.
pub fn resolve_modeset(config: &ExperimentConfig, dataset: &Dataset) -> Result<(ModeSet, serde_json::Value)> {
    if config.modeset != "search" {
        return Ok((config.fixed_modeset()?, json!({ "modeset": config.modeset })));
    }
    let family = config.search_family_specs();
    let geometry = config.geometry_for(&family)?;
    let beam = config.beam(&geometry)?;
    let mut options = SearchOptions::new(config.mode_waist, config.mode_center);
    options.family = Some(family.iter().map(|s| (s.m, s.n)).collect());
    options.starts = vec![config.fixed_modeset()?];
    let r = qc::greedy_mode_search(dataset, &beam, &options)?;
    let details = json!({
        "modeset": "search",
        "family_size": r.family_size,
        "greedy_fidelity": r.greedy_fidelity,
        "search_fidelity": r.fidelity,
        "moves": r.moves,
    });
    Ok((r.modeset, details))
}

/// Runs the configured classifier on `dataset` without touching the disk.
pub fn analyze(config: &ExperimentConfig, dataset: &Dataset) -> Result<Analysis> {
    config.validate()?;
    match config.classifier {
        Classifier::QcAnalytic | Classifier::QcMontecarlo => {
            let (modeset, mut details) = resolve_modeset(config, dataset)?;
            let geometry = config.geometry_for(modeset.entries())?;
            let beam = config.beam(&geometry)?;
            let bank = ModeBank::new(&modeset, &beam)?;
            let matrix = if config.classifier == Classifier::QcAnalytic {
                qc::confusion_from_bank(dataset, &bank)?
            } else {
                qc::mc_confusion_from_bank(dataset, &bank, &config.schedule(), config.events_per_pattern, config.seed)?
            };
            details["orders"] = json!(modeset.orders());
            details["geometry"] = json!(geometry);
            details["calibration_signal"] = json!(bank.reference());
            Ok(Analysis { matrix, details })
        }
        Classifier::CcIndex => {
            let pixels = index_pixels(config, dataset)?;
            let matrix = cc::cc_confusion(dataset, &pixels)?;
            let selected = cc::select_index_pixels(&cc::pixel_label_counts(dataset))?;
            let conventions: Vec<_> = CoordConvention::ALL
                .iter()
                .map(|&c| {
                    let reference = IndexPixelSet::reference(c)?;
                    Ok(json!({
                        "convention": c.name(),
                        "agreement_with_selected": reference.agreement(&selected),
                        "fidelity": cc::cc_confusion(dataset, &reference)?.fidelity(),
                    }))
                })
                .collect::<Result<_>>()?;
            let details = json!({
                "index_pixels": pixels,
                "selected_index_pixels": selected,
                "reference_conventions": conventions,
            });
            Ok(Analysis { matrix, details })
        }
        Classifier::CcMap => {
            let beam = cc_beam(config)?;
            let matrix = cc::map_confusion(dataset, &beam)?;
            let details = json!({ "weighting": config.cc_weighting });
            Ok(Analysis { matrix, details })
        }
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Loads the data, runs the configured pipeline and writes the CSV, JSON,
/// SVG and report artifacts into `output_dir`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ReportBundle> {
    let started = Instant::now();
    config.validate()?;
    let dataset = config.load_dataset()?;
    let analysis = analyze(config, &dataset)?;
    let m = &analysis.matrix;

    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv = dir.join("confusion.csv");
    let json_path = dir.join("confusion.json");
    let svg = dir.join("heatmap.svg");
    let report = dir.join("report.json");

    write(&csv, confusion::to_csv(m))?;
    let metadata = json!({
        "classifier": config.classifier,
        "config": config,
        "details": analysis.details,
        "tool_version": crate::VERSION,
    });
    write(&json_path, confusion::to_json(m, metadata)?)?;
    emit_heatmap(m, &svg, config.classifier.name())?;
    if let Some(orders) = analysis.details.get("orders") {
        if config.modeset == "search" {
            let orders: [(u32, u32); NUM_LABELS] = serde_json::from_value(orders.clone())?;
            let set = ModeSet::from_orders(&orders, config.mode_waist, config.mode_center)?;
            write(&dir.join("modeset.json"), serde_json::to_string_pretty(&set)?)?;
        }
    }

    let bundle = ReportBundle {
        classifier: config.classifier,
        confusion_csv: csv,
        confusion_json: json_path,
        heatmap: svg,
        report: report.clone(),
        fidelity: m.fidelity(),
        fidelity_sigma: m.fidelity_sigma(),
        per_label_accuracy: m.diagonal(),
        no_detection: m.no_detection,
        no_detection_total: m.total_no_detection(),
        total_events: m.total_events(),
        excluded: m.excluded.clone(),
        details: analysis.details,
        config: config.clone(),
        tool_version: crate::VERSION.to_string(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write(&report, serde_json::to_string_pretty(&bundle)?)?;
    Ok(bundle)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub waist: f64,
    pub fidelity: f64,
}

/// Analytic QC fidelity with beam and mode waist both set to each entry.
pub fn waist_scan(config: &ExperimentConfig, dataset: &Dataset, waists: &[f64]) -> Result<Vec<ScanRow>> {
    if waists.is_empty() {
        return Err(Error::EmptyScan);
    }
    waists
        .iter()
        .map(|&w| {
            let c = ExperimentConfig {
                classifier: Classifier::QcAnalytic,
                ..config.with_waist(w)
            };
            Ok(ScanRow {
                waist: w,
                fidelity: analyze(&c, dataset)?.matrix.fidelity(),
            })
        })
        .collect()
}

pub fn scan_to_csv(rows: &[ScanRow]) -> String {
    let mut s = String::from("waist,fidelity\n");
    for r in rows {
        s.push_str(&format!("{},{:?}\n", r.waist, r.fidelity));
    }
    s
}

pub fn scan_from_csv(text: &str) -> Result<Vec<ScanRow>> {
    let bad = |detail: String| Error::Parse {
        what: "waist scan CSV",
        detail,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("waist,fidelity") {
        return Err(bad("missing header".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let (w, f) = l.split_once(',').ok_or_else(|| bad(l.to_string()))?;
            Ok(ScanRow {
                waist: w.trim().parse().map_err(|_| bad(l.to_string()))?,
                fidelity: f.trim().parse().map_err(|_| bad(l.to_string()))?,
            })
        })
        .collect()
}

/// Row with the highest fidelity; the first one on ties.
pub fn best_waist(rows: &[ScanRow]) -> Option<ScanRow> {
    rows.iter().copied().fold(None, |best, r| match best {
        Some(b) if b.fidelity >= r.fidelity => Some(b),
        _ => Some(r),
    })
}
