use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cc::CoordConvention;
use crate::dataset::{self, Dataset, NUM_LABELS};
use crate::error::{Error, Result};
use crate::optics::{fit_geometry, gaussian_beam, FieldGrid, GridGeometry, ModeSpec};
use crate::qc::{ModeSet, PhotonScheduleConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classifier {
    QcAnalytic,
    QcMontecarlo,
    CcIndex,
    CcMap,
}

impl Classifier {
    pub fn name(self) -> &'static str {
        match self {
            Self::QcAnalytic => "qc-analytic",
            Self::QcMontecarlo => "qc-montecarlo",
            Self::CcIndex => "cc-index",
            Self::CcMap => "cc-map",
        }
    }
}

impl fmt::Display for Classifier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Classifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Self::QcAnalytic, Self::QcMontecarlo, Self::CcIndex, Self::CcMap]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown classifier {s:?}")))
    }
}

/// Where the CC index pixels come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndexPixelSource {
    /// Chosen from the dataset.
    Select,
    /// The reference list, read under `coord_convention`.
    Reference,
    /// Read from `index_pixel_file`.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Uniform,
    Beam,
}

/// One flat, versioned document describing a run end to end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,

    /// IDX image and label files (gzip detected automatically).
    pub images: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    /// A manifest written by `ingest`; takes precedence over IDX files.
    pub dataset: Option<PathBuf>,
    pub gunzip: bool,
    pub threshold: u8,
    pub per_label_count: usize,

    /// `None` pads the window just enough for every mode to fit.
    pub pixels_per_side: Option<usize>,
    pub supersample: usize,
    pub pixel_pitch: f64,
    pub beam_waist: f64,
    pub beam_center: [f64; 2],
    pub mode_waist: f64,
    pub mode_center: [f64; 2],

    /// `reference`, `reference-alt-a`, `reference-alt-b`, `search` or `file`.
    pub modeset: String,
    pub modeset_file: Option<PathBuf>,
    pub search_max_order: u32,

    pub classifier: Classifier,
    pub index_pixels: IndexPixelSource,
    pub index_pixel_file: Option<PathBuf>,
    pub coord_convention: CoordConvention,
    pub cc_weighting: Weighting,

    pub mean_detected_per_pulse: f64,
    pub pulses_per_mask: u64,
    pub mask_order: [usize; NUM_LABELS],
    pub max_cycles: u64,
    pub dark_counts_per_pulse: f64,
    pub events_per_pattern: u64,
    pub seed: u64,

    pub waists: Vec<f64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let schedule = PhotonScheduleConfig::default();
        Self {
            schema_version: SCHEMA_VERSION,
            images: None,
            labels: None,
            dataset: None,
            gunzip: false,
            threshold: dataset::DEFAULT_THRESHOLD,
            per_label_count: 100,
            pixels_per_side: None,
            supersample: 4,
            pixel_pitch: 1.0,
            beam_waist: 7.0,
            beam_center: [0.0, 0.0],
            mode_waist: 7.0,
            mode_center: [0.0, 0.0],
            modeset: "reference".into(),
            modeset_file: None,
            search_max_order: crate::qc::DEFAULT_MAX_ORDER,
            classifier: Classifier::QcAnalytic,
            index_pixels: IndexPixelSource::Reference,
            index_pixel_file: None,
            coord_convention: CoordConvention::RowCol0,
            cc_weighting: Weighting::Uniform,
            mean_detected_per_pulse: schedule.mean_detected_per_pulse,
            pulses_per_mask: schedule.pulses_per_mask,
            mask_order: schedule.mask_order,
            max_cycles: schedule.max_cycles,
            dark_counts_per_pulse: schedule.dark_counts_per_pulse,
            events_per_pattern: 1000,
            seed: 0,
            waists: vec![5.0, 6.0, 7.0, 8.0, 9.0],
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!("schema_version {} unsupported", self.schema_version));
        }
        if self.supersample == 0 {
            return bad("supersample must be at least 1".into());
        }
        for (name, w) in [("beam_waist", self.beam_waist), ("mode_waist", self.mode_waist)] {
            if !(w > 0.0 && w.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.pixel_pitch > 0.0) {
            return bad("pixel_pitch must be positive".into());
        }
        if self.modeset == "file" && self.modeset_file.is_none() {
            return bad("modeset \"file\" needs modeset_file".into());
        }
        if self.index_pixels == IndexPixelSource::File && self.index_pixel_file.is_none() {
            return bad("index_pixels \"file\" needs index_pixel_file".into());
        }
        if self.classifier == Classifier::QcMontecarlo {
            self.schedule().validate().map_err(|e| Error::Config(e.to_string()))?;
            if self.events_per_pattern == 0 {
                return bad("events_per_pattern must be at least 1".into());
            }
        }
        Ok(())
    }

    pub fn schedule(&self) -> PhotonScheduleConfig {
        PhotonScheduleConfig {
            mean_detected_per_pulse: self.mean_detected_per_pulse,
            pulses_per_mask: self.pulses_per_mask,
            mask_order: self.mask_order,
            max_cycles: self.max_cycles,
            dark_counts_per_pulse: self.dark_counts_per_pulse,
        }
    }

    /// Sets both the beam and the mode waist.
    pub fn with_waist(&self, waist: f64) -> Self {
        Self {
            beam_waist: waist,
            mode_waist: waist,
            ..self.clone()
        }
    }

    pub fn load_dataset(&self) -> Result<Dataset> {
        if let Some(path) = &self.dataset {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            return dataset::dataset_from_json(&text);
        }
        let (Some(images), Some(labels)) = (&self.images, &self.labels) else {
            return Err(Error::Config("give either dataset or both images and labels".into()));
        };
        let raw = dataset::load_idx(images, labels, self.gunzip)?;
        dataset::select_subset(&raw, self.per_label_count, self.threshold)
    }

    /// Mode set named by `modeset`; `search` resolves to the reference set as
    /// the climb's seed and is handled by the caller.
    pub fn fixed_modeset(&self) -> Result<ModeSet> {
        match self.modeset.as_str() {
            "file" => {
                let path = self.modeset_file.as_ref().expect("checked by validate");
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                let set: ModeSet = serde_json::from_str(&text).map_err(|e| Error::Config(e.to_string()))?;
                Ok(set)
            }
            "search" => ModeSet::named("reference", self.mode_waist, self.mode_center),
            name => ModeSet::named(name, self.mode_waist, self.mode_center),
        }
        .map_err(|e| match e {
            Error::InvalidModeSet(m) => Error::Config(m),
            other => other,
        })
    }

    fn base_geometry(&self) -> Result<GridGeometry> {
        let mut g = GridGeometry::new(self.pixels_per_side.unwrap_or(dataset::SIDE), self.supersample)?;
        g.pixel_pitch = self.pixel_pitch;
        Ok(g)
    }

    /// Grid geometry for `modes`: the configured size, or the smallest
    /// padded window that holds them all.
    pub fn geometry_for(&self, modes: &[ModeSpec]) -> Result<GridGeometry> {
        let base = self.base_geometry()?;
        if self.pixels_per_side.is_some() || modes.is_empty() {
            base.validate()?;
            return Ok(base);
        }
        fit_geometry(modes, &base)
    }

    pub fn beam(&self, geometry: &GridGeometry) -> Result<FieldGrid> {
        gaussian_beam(self.beam_waist, self.beam_center, geometry)
    }

    /// Every candidate mode of the search family, for sizing the grid.
    pub fn search_family_specs(&self) -> Vec<ModeSpec> {
        let k = self.search_max_order;
        (0..=k)
            .flat_map(|m| (0..=k).map(move |n| (m, n)))
            .map(|(m, n)| ModeSpec {
                m,
                n,
                waist: self.mode_waist,
                center: self.mode_center,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> ExperimentConfig {
        ExperimentConfig {
            dataset: Some("d.json".into()),
            ..Default::default()
        }
    }

    #[test]
    fn json_round_trip() {
        let c = minimal();
        let back = ExperimentConfig::from_json(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_documents_take_defaults() {
        let c = ExperimentConfig::from_json(r#"{"dataset": "x.json", "classifier": "cc-index", "seed": 9}"#).unwrap();
        assert_eq!(c.classifier, Classifier::CcIndex);
        assert_eq!(c.seed, 9);
        assert_eq!(c.beam_waist, 7.0);
        assert_eq!(c.supersample, 4);
    }

    #[test]
    fn rejects_bad_documents() {
        for text in [
            r#"{"dataset": "x", "bogus": 1}"#,
            r#"{"dataset": "x", "schema_version": 2}"#,
            r#"{"dataset": "x", "beam_waist": -1}"#,
            r#"{"dataset": "x", "classifier": "qc-montecarlo", "mean_detected_per_pulse": 0.5}"#,
            r#"{"dataset": "x", "modeset": "file"}"#,
        ] {
            let e = ExperimentConfig::from_json(text).unwrap_err();
            assert!(e.is_config_error(), "{text}: {e}");
        }
        let half = ExperimentConfig::from_json(r#"{"images": "x"}"#).unwrap();
        assert!(half.load_dataset().unwrap_err().is_config_error());
    }

    #[test]
    fn auto_geometry_fits_reference_set() {
        let c = minimal();
        let set = c.fixed_modeset().unwrap();
        let g = c.geometry_for(set.entries()).unwrap();
        assert!(g.pixels_per_side >= 28);
        for spec in set.entries() {
            crate::optics::hg_mode(spec, &g).unwrap();
        }
        let fixed = ExperimentConfig {
            pixels_per_side: Some(30),
            ..minimal()
        };
        assert_eq!(fixed.geometry_for(set.entries()).unwrap().pixels_per_side, 30);
    }
}
