use rayon::prelude::*;

use super::modeset::ModeSet;
use crate::confusion::{ConfusionMatrix, LabelDistribution};
use crate::dataset::{BinaryPattern, Dataset, Mask, NUM_LABELS};
use crate::error::{Error, Result};
use crate::optics::{hg_mode, pixel_overlaps, FieldGrid, ModeSpec, PixelTable, DARK_THRESHOLD};

/// Below this total the pattern is treated as orthogonal to every mode.
pub const ALL_DARK_THRESHOLD: f64 = 1e-15;

/// Per-pixel beam·mode overlaps for a fixed beam and mode set, so that a
/// pattern's coherent amplitude on mode `k` is a masked sum.
#[derive(Debug, Clone)]
pub struct ModeBank {
    overlaps: Vec<PixelTable>,
    intensity: PixelTable,
    beam_norm: f64,
    reference: f64,
}

impl ModeBank {
    pub fn new(modeset: &ModeSet, beam: &FieldGrid) -> Result<Self> {
        Self::from_specs(modeset.entries(), beam)
    }

    pub fn from_specs(specs: &[ModeSpec], beam: &FieldGrid) -> Result<Self> {
        let geometry = beam.geometry();
        let overlaps = specs
            .par_iter()
            .map(|spec| pixel_overlaps(beam, &hg_mode(spec, geometry)?))
            .collect::<Result<Vec<_>>>()?;
        let intensity = pixel_overlaps(beam, beam)?;

        // flat-phase calibration: all-on pattern coupled into the fundamental mode
        let reference_spec = specs.first().map_or(
            ModeSpec::new(0, 0, 1.0),
            |s| ModeSpec { m: 0, n: 0, ..*s },
        );
        let fundamental = pixel_overlaps(beam, &hg_mode(&reference_spec, geometry)?)?;
        let reference = fundamental.masked_sum(&Mask::full()).powi(2);
        Ok(Self {
            overlaps,
            intensity,
            beam_norm: beam.norm_squared(),
            reference,
        })
    }

    pub fn len(&self) -> usize {
        self.overlaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.overlaps.is_empty()
    }

    pub fn overlaps(&self) -> &[PixelTable] {
        &self.overlaps
    }

    /// Detection probability of the all-on pattern through a flat phase mask.
    pub fn reference(&self) -> f64 {
        self.reference
    }

    /// Transmitted fraction `T` relative to the beam norm.
    pub fn transmission(&self, mask: &Mask) -> f64 {
        self.intensity.masked_sum(mask) / self.beam_norm
    }

    fn check_lit(&self, mask: &Mask) -> Result<()> {
        let t = self.intensity.masked_sum(mask);
        if mask.count_on() == 0 || t < DARK_THRESHOLD * self.beam_norm {
            return Err(Error::DarkPattern);
        }
        Ok(())
    }

    /// Unconditional coherent detection probabilities `q_k = |⟨mode_k|Ψ⟩|²`.
    pub fn pure_probabilities(&self, mask: &Mask) -> Result<Vec<f64>> {
        self.check_lit(mask)?;
        Ok(self
            .overlaps
            .iter()
            .map(|t| t.masked_sum(mask).powi(2))
            .collect())
    }

    /// Incoherent per-pixel detection probabilities.
    pub fn mixed_probabilities(&self, mask: &Mask) -> Result<Vec<f64>> {
        self.check_lit(mask)?;
        Ok(self.overlaps.iter().map(|t| t.masked_sum_sq(mask)).collect())
    }

    pub fn label_distribution(&self, mask: &Mask) -> Result<LabelDistribution> {
        let q = self.pure_probabilities(mask)?;
        normalized_labels(&q)
    }
}

pub(crate) fn normalized_labels(q: &[f64]) -> Result<LabelDistribution> {
    let total: f64 = q.iter().sum();
    if total < ALL_DARK_THRESHOLD {
        return Err(Error::AllModesDark);
    }
    let mut w = [0.0; NUM_LABELS];
    w.copy_from_slice(&q[..NUM_LABELS]);
    LabelDistribution::from_weights(w).ok_or(Error::AllModesDark)
}

/// Low-rate first-photon label distribution `q_k / Σ_j q_j`.
pub fn qc_label_distribution(
    pattern: &BinaryPattern,
    modeset: &ModeSet,
    beam: &FieldGrid,
) -> Result<LabelDistribution> {
    ModeBank::new(modeset, beam)?.label_distribution(&pattern.mask)
}

/// Averages per-pattern label distributions within each true label.
pub fn qc_confusion(dataset: &Dataset, modeset: &ModeSet, beam: &FieldGrid) -> Result<ConfusionMatrix> {
    let bank = ModeBank::new(modeset, beam)?;
    confusion_from_bank(dataset, &bank)
}

pub fn confusion_from_bank(dataset: &Dataset, bank: &ModeBank) -> Result<ConfusionMatrix> {
    average_rows(dataset, |p| bank.label_distribution(&p.mask))
}

/// Mean distribution per true label; patterns that are dark or orthogonal to
/// every mode are excluded and listed.
pub(crate) fn average_rows(
    dataset: &Dataset,
    classify: impl Fn(&BinaryPattern) -> Result<LabelDistribution> + Sync,
) -> Result<ConfusionMatrix> {
    let results: Vec<_> = dataset
        .patterns()
        .par_iter()
        .map(|p| (p.label, p.source_index, classify(p)))
        .collect();

    let mut sums = [[0.0; NUM_LABELS]; NUM_LABELS];
    let mut used = [0usize; NUM_LABELS];
    let mut excluded = Vec::new();
    for (label, source, dist) in results {
        match dist {
            Ok(d) => {
                let row = &mut sums[label as usize];
                for (s, v) in row.iter_mut().zip(d.0.iter()) {
                    *s += v;
                }
                used[label as usize] += 1;
            }
            Err(Error::AllModesDark | Error::DarkPattern) => excluded.push(source),
            Err(e) => return Err(e),
        }
    }
    let mut rows = [[0.0; NUM_LABELS]; NUM_LABELS];
    for j in 0..NUM_LABELS {
        if used[j] == 0 {
            return Err(Error::EmptyLabel(j as u8));
        }
        for k in 0..NUM_LABELS {
            rows[j][k] = sums[j][k] / used[j] as f64;
        }
    }
    let mut m = ConfusionMatrix::analytic(rows);
    m.excluded = excluded;
    Ok(m)
}
