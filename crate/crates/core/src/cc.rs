//! Classical single-photon classifier: one index pixel per label, read out
//! directly, and the per-pixel MAP ceiling.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::confusion::{ConfusionMatrix, LabelDistribution};
use crate::dataset::{BinaryPattern, Dataset, NUM_LABELS, PIXELS, SIDE};
use crate::error::{Error, Result};
use crate::optics::{distribution_from_intensity, pixel_overlaps, FieldGrid};
use crate::qc::average_rows;

/// Reference index pixels for labels 0 to 9.
pub const REFERENCE_INDEX_PIXELS: [(usize, usize); NUM_LABELS] = [
    (12, 18),
    (14, 13),
    (15, 14),
    (14, 14),
    (19, 12),
    (12, 11),
    (13, 15),
    (8, 16),
    (15, 10),
    (15, 15),
];

/// Per-pixel evidence for each label.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelLabelCounts {
    /// `counts[r * 28 + c][j]`: label-`j` patterns with pixel `(r, c)` on.
    pub counts: Vec<[u64; NUM_LABELS]>,
    pub per_label_totals: [u64; NUM_LABELS],
    /// Click-weighted evidence, `Σ w(pixel)/T(pattern)` over label-`j`
    /// patterns with the pixel on. Equal to `counts` when unweighted.
    pub weights: Vec<[f64; NUM_LABELS]>,
}

impl PixelLabelCounts {
    pub fn get(&self, row: usize, col: usize) -> &[u64; NUM_LABELS] {
        &self.counts[row * SIDE + col]
    }

    /// `P(label | click at pixel)` with per-label averaging.
    pub fn posterior(&self, pixel: usize) -> [f64; NUM_LABELS] {
        let mut like = [0.0; NUM_LABELS];
        for j in 0..NUM_LABELS {
            if self.per_label_totals[j] > 0 {
                like[j] = self.weights[pixel][j] / self.per_label_totals[j] as f64;
            }
        }
        let total: f64 = like.iter().sum();
        if total > 0.0 {
            like.map(|v| v / total)
        } else {
            like
        }
    }

    /// Labels whose evidence at `pixel` is maximal.
    pub fn map_labels(&self, pixel: usize) -> Vec<usize> {
        let post = self.posterior(pixel);
        let best = post.iter().copied().fold(0.0, f64::max);
        if best <= 0.0 {
            return Vec::new();
        }
        (0..NUM_LABELS).filter(|&j| post[j] == best).collect()
    }
}

/// Tallies, for every pixel, how many patterns of each label have it on.
pub fn pixel_label_counts(dataset: &Dataset) -> PixelLabelCounts {
    let mut counts = vec![[0u64; NUM_LABELS]; PIXELS];
    let mut totals = [0u64; NUM_LABELS];
    for p in dataset.patterns() {
        let j = p.label as usize;
        totals[j] += 1;
        for i in p.mask.on_pixels() {
            counts[i][j] += 1;
        }
    }
    let weights = counts.iter().map(|c| c.map(|v| v as f64)).collect();
    PixelLabelCounts {
        counts,
        per_label_totals: totals,
        weights,
    }
}

/// Counts with each pattern's pixels weighted by the probability that a
/// transmitted photon lands there.
pub fn weighted_pixel_label_counts(dataset: &Dataset, beam: &FieldGrid) -> Result<PixelLabelCounts> {
    let mut out = pixel_label_counts(dataset);
    let intensity = pixel_overlaps(beam, beam)?;
    let mut weights = vec![[0.0; NUM_LABELS]; PIXELS];
    for p in dataset.patterns() {
        let d = distribution_from_intensity(&p.mask, &intensity, beam.norm_squared())?;
        for i in p.mask.on_pixels() {
            weights[i][p.label as usize] += d.probabilities[i];
        }
    }
    out.weights = weights;
    Ok(out)
}

/// One distinct `(row, col)` pixel per label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<IndexPixelEntry>", into = "Vec<IndexPixelEntry>")]
pub struct IndexPixelSet {
    pixels: [(usize, usize); NUM_LABELS],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexPixelEntry {
    pub label: usize,
    pub row: usize,
    pub col: usize,
}

impl IndexPixelSet {
    pub fn new(pixels: [(usize, usize); NUM_LABELS]) -> Result<Self> {
        for (j, &(r, c)) in pixels.iter().enumerate() {
            if r >= SIDE || c >= SIDE {
                return Err(Error::Config(format!("index pixel ({r},{c}) for label {j} is off the grid")));
            }
            if pixels[..j].contains(&(r, c)) {
                return Err(Error::Config(format!("index pixel ({r},{c}) used by more than one label")));
            }
        }
        Ok(Self { pixels })
    }

    pub fn pixels(&self) -> &[(usize, usize); NUM_LABELS] {
        &self.pixels
    }

    pub fn get(&self, label: usize) -> (usize, usize) {
        self.pixels[label]
    }

    /// Reference pixels interpreted under `convention`.
    pub fn reference(convention: CoordConvention) -> Result<Self> {
        let mut px = [(0, 0); NUM_LABELS];
        for (j, &(a, b)) in REFERENCE_INDEX_PIXELS.iter().enumerate() {
            px[j] = convention
                .to_row_col(a, b)
                .ok_or_else(|| Error::Config(format!("({a},{b}) invalid under {convention}")))?;
        }
        Self::new(px)
    }

    /// Labels `k` whose pixel also appears at position `k` of `other`.
    pub fn agreement(&self, other: &IndexPixelSet) -> usize {
        (0..NUM_LABELS).filter(|&k| self.pixels[k] == other.pixels[k]).count()
    }

    /// Index pixel set after relabeling `label -> perm[label]`.
    pub fn relabeled(&self, perm: &[u8; NUM_LABELS]) -> Result<Self> {
        let mut px = [(0, 0); NUM_LABELS];
        for j in 0..NUM_LABELS {
            px[perm[j] as usize] = self.pixels[j];
        }
        Self::new(px)
    }
}

impl TryFrom<Vec<IndexPixelEntry>> for IndexPixelSet {
    type Error = Error;

    fn try_from(entries: Vec<IndexPixelEntry>) -> Result<Self> {
        let mut px: [Option<(usize, usize)>; NUM_LABELS] = [None; NUM_LABELS];
        for e in &entries {
            let slot = px
                .get_mut(e.label)
                .ok_or_else(|| Error::Config(format!("index pixel label {} out of range", e.label)))?;
            if slot.replace((e.row, e.col)).is_some() {
                return Err(Error::Config(format!("label {} given twice", e.label)));
            }
        }
        let mut out = [(0, 0); NUM_LABELS];
        for (j, p) in px.iter().enumerate() {
            out[j] = p.ok_or_else(|| Error::Config(format!("no index pixel for label {j}")))?;
        }
        Self::new(out)
    }
}

impl From<IndexPixelSet> for Vec<IndexPixelEntry> {
    fn from(s: IndexPixelSet) -> Self {
        s.pixels
            .iter()
            .enumerate()
            .map(|(label, &(row, col))| IndexPixelEntry { label, row, col })
            .collect()
    }
}

/// How a printed pixel pair `(a, b)` maps onto `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoordConvention {
    /// `(row, col)`, zero-based.
    RowCol0,
    /// `(col, row)`, zero-based.
    ColRow0,
    /// `(row, col)`, one-based.
    RowCol1,
    /// `(col, row)`, one-based.
    ColRow1,
}

impl CoordConvention {
    pub const ALL: [CoordConvention; 4] = [Self::RowCol0, Self::ColRow0, Self::RowCol1, Self::ColRow1];

    pub fn to_row_col(self, a: usize, b: usize) -> Option<(usize, usize)> {
        let (r, c) = match self {
            Self::RowCol0 | Self::RowCol1 => (a, b),
            Self::ColRow0 | Self::ColRow1 => (b, a),
        };
        let (r, c) = match self {
            Self::RowCol1 | Self::ColRow1 => (r.checked_sub(1)?, c.checked_sub(1)?),
            _ => (r, c),
        };
        (r < SIDE && c < SIDE).then_some((r, c))
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::RowCol0 => "row-col0",
            Self::ColRow0 => "col-row0",
            Self::RowCol1 => "row-col1",
            Self::ColRow1 => "col-row1",
        }
    }
}

impl fmt::Display for CoordConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CoordConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown coordinate convention {s:?}")))
    }
}

/// Selects one distinct index pixel per label.
///
/// A label prefers pixels where it is the most likely label, and among those
/// the pixel with the most evidence. Pairs are claimed greedily over all
/// unassigned labels and unclaimed pixels, so a label that loses a contested
/// pixel falls back to its next best. Remaining ties go to the higher
/// posterior, then the smaller label, then the smaller `(row, col)`.
pub fn select_index_pixels(counts: &PixelLabelCounts) -> Result<IndexPixelSet> {
    for j in 0..NUM_LABELS {
        if counts.counts.iter().all(|c| c[j] == 0) {
            return Err(Error::Degenerate(j as u8));
        }
    }
    let posteriors: Vec<[f64; NUM_LABELS]> = (0..PIXELS).map(|i| counts.posterior(i)).collect();
    let is_map = |i: usize, j: usize| {
        let p = &posteriors[i];
        p[j] > 0.0 && p.iter().all(|&q| q <= p[j])
    };
    let evidence = |i: usize, j: usize| {
        if counts.per_label_totals[j] == 0 {
            0.0
        } else {
            counts.weights[i][j] / counts.per_label_totals[j] as f64
        }
    };
    let mut pixels: [Option<(usize, usize)>; NUM_LABELS] = [None; NUM_LABELS];
    let mut claimed = [false; PIXELS];
    for _ in 0..NUM_LABELS {
        let mut best: Option<(bool, f64, f64, usize, usize)> = None;
        for (j, _) in pixels.iter().enumerate().filter(|(_, p)| p.is_none()) {
            for i in (0..PIXELS).filter(|&i| !claimed[i]) {
                let key = (is_map(i, j), evidence(i, j), posteriors[i][j], j, i);
                let better = match best {
                    None => true,
                    Some(b) => key
                        .0
                        .cmp(&b.0)
                        .then(key.1.total_cmp(&b.1))
                        .then(key.2.total_cmp(&b.2))
                        .then(b.3.cmp(&key.3))
                        .then(b.4.cmp(&key.4))
                        .is_gt(),
                };
                if better {
                    best = Some(key);
                }
            }
        }
        let (_, _, _, j, i) = best.expect("784 pixels exceed ten labels");
        pixels[j] = Some((i / SIDE, i % SIDE));
        claimed[i] = true;
    }
    IndexPixelSet::new(pixels.map(|p| p.expect("every label assigned")))
}

/// Equal split over the labels whose index pixel is on; uniform if none is.
pub fn cc_classify(pattern: &BinaryPattern, pixels: &IndexPixelSet) -> LabelDistribution {
    let hits: Vec<usize> = (0..NUM_LABELS)
        .filter(|&k| {
            let (r, c) = pixels.get(k);
            pattern.mask.get(r, c)
        })
        .collect();
    if hits.is_empty() {
        return LabelDistribution::uniform();
    }
    let share = 1.0 / hits.len() as f64;
    let mut p = [0.0; NUM_LABELS];
    for k in hits {
        p[k] = share;
    }
    LabelDistribution(p)
}

pub fn cc_confusion(dataset: &Dataset, pixels: &IndexPixelSet) -> Result<ConfusionMatrix> {
    average_rows(dataset, |p| Ok(cc_classify(p, pixels)))
}

/// Fidelity of the per-pixel MAP classifier: the photon's pixel is detected
/// and answered with that pixel's most frequent label, ties sharing credit.
pub fn map_threshold(dataset: &Dataset, beam: &FieldGrid) -> Result<f64> {
    let counts = pixel_label_counts(dataset);
    let credit: Vec<[f64; NUM_LABELS]> = (0..PIXELS)
        .map(|i| {
            let winners = counts.map_labels(i);
            let mut c = [0.0; NUM_LABELS];
            for &j in &winners {
                c[j] = 1.0 / winners.len() as f64;
            }
            c
        })
        .collect();
    let intensity = pixel_overlaps(beam, beam)?;
    let norm = beam.norm_squared();
    let per_pattern = dataset
        .patterns()
        .par_iter()
        .map(|p| {
            let d = distribution_from_intensity(&p.mask, &intensity, norm)?;
            let j = p.label as usize;
            Ok((j, p.mask.on_pixels().map(|i| d.probabilities[i] * credit[i][j]).sum::<f64>()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sums = [0.0; NUM_LABELS];
    let mut seen = [0usize; NUM_LABELS];
    for (j, v) in per_pattern {
        sums[j] += v;
        seen[j] += 1;
    }
    let present: Vec<usize> = (0..NUM_LABELS).filter(|&j| seen[j] > 0).collect();
    if present.is_empty() {
        return Err(Error::EmptyLabel(0));
    }
    Ok(present.iter().map(|&j| sums[j] / seen[j] as f64).sum::<f64>() / present.len() as f64)
}

/// Per-pattern label distribution of the MAP classifier, averaged per label.
/// Its fidelity equals [`map_threshold`] when every label is present.
pub fn map_confusion(dataset: &Dataset, beam: &FieldGrid) -> Result<ConfusionMatrix> {
    let counts = pixel_label_counts(dataset);
    let winners: Vec<Vec<usize>> = (0..PIXELS).map(|i| counts.map_labels(i)).collect();
    let intensity = pixel_overlaps(beam, beam)?;
    let norm = beam.norm_squared();
    let m = average_rows(dataset, |p| {
        let d = distribution_from_intensity(&p.mask, &intensity, norm)?;
        let mut out = [0.0; NUM_LABELS];
        for i in p.mask.on_pixels() {
            let w = &winners[i];
            for &j in w {
                out[j] += d.probabilities[i] / w.len() as f64;
            }
        }
        Ok(LabelDistribution(out))
    })?;
    if !m.excluded.is_empty() {
        return Err(Error::DarkPattern);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Mask;

    fn pat(mask: Mask, label: u8, source_index: usize) -> BinaryPattern {
        BinaryPattern {
            mask,
            label,
            source_index,
        }
    }

    fn block_dataset() -> Dataset {
        // label j owns rows 2j..2j+2, varying column extents
        let mut v = Vec::new();
        for j in 0..10u8 {
            for copy in 0..3 {
                let m = Mask::from_fn(|r, c| r / 2 == j as usize && c >= copy && c < 10 + copy * 3);
                v.push(pat(m, j, j as usize * 3 + copy));
            }
        }
        Dataset::from_patterns(v)
    }

    fn index_set(first: usize) -> IndexPixelSet {
        IndexPixelSet::new(std::array::from_fn(|k| (first, k))).unwrap()
    }

    #[test]
    fn single_all_on_pattern() {
        let ds = Dataset::from_patterns(vec![pat(Mask::full(), 5, 0)]);
        let c = pixel_label_counts(&ds);
        assert!(c.counts.iter().all(|v| v[5] == 1 && v.iter().sum::<u64>() == 1));
        assert_eq!(c.per_label_totals[5], 1);
    }

    #[test]
    fn equal_split_rule() {
        let px = index_set(3);
        let on = |labels: &[usize]| Mask::from_fn(|r, c| r == 3 && labels.contains(&c));
        let d = cc_classify(&pat(on(&[1, 4, 7]), 0, 0), &px);
        for k in 0..10 {
            let want = if [1, 4, 7].contains(&k) { 1.0 / 3.0 } else { 0.0 };
            assert_eq!(d.0[k], want);
        }
        assert_eq!(cc_classify(&pat(on(&[]), 0, 0), &px), LabelDistribution::uniform());
        assert_eq!(cc_classify(&pat(on(&[6]), 0, 0), &px), LabelDistribution::one_hot(6));
    }

    #[test]
    fn own_pixel_only_gives_identity() {
        let px = index_set(0);
        let ds = Dataset::from_patterns(
            (0..10u8)
                .map(|j| pat(Mask::from_fn(|r, c| (r == 0 && c == j as usize) || r > 5), j, j as usize))
                .collect(),
        );
        let m = cc_confusion(&ds, &px).unwrap();
        assert_eq!(m.fidelity(), 1.0);
    }

    #[test]
    fn disjoint_blocks() {
        let ds = block_dataset();
        let px = select_index_pixels(&pixel_label_counts(&ds)).unwrap();
        for j in 0..10 {
            assert_eq!(px.get(j).0 / 2, j, "label {j} -> {:?}", px.get(j));
        }
        let g = crate::optics::GridGeometry::new(28, 1).unwrap();
        let beam = FieldGrid::uniform(g).unwrap();
        assert!((map_threshold(&ds, &beam).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_labels_still_distinct() {
        let m = Mask::from_fn(|r, c| (10..14).contains(&r) && (10..13).contains(&c));
        let ds = Dataset::from_patterns((0..10u8).map(|j| pat(m, j, j as usize)).collect());
        let px = select_index_pixels(&pixel_label_counts(&ds)).unwrap();
        let mut all: Vec<_> = px.pixels().to_vec();
        all.sort();
        all.dedup();
        assert_eq!(all.len(), 10);
    }

    #[test]
    fn degenerate_label() {
        let ds = Dataset::from_patterns((0..9u8).map(|j| pat(Mask::full(), j, j as usize)).collect());
        assert!(matches!(
            select_index_pixels(&pixel_label_counts(&ds)),
            Err(Error::Degenerate(9))
        ));
    }

    #[test]
    fn conventions() {
        assert_eq!(CoordConvention::RowCol0.to_row_col(12, 18), Some((12, 18)));
        assert_eq!(CoordConvention::ColRow0.to_row_col(12, 18), Some((18, 12)));
        assert_eq!(CoordConvention::RowCol1.to_row_col(12, 18), Some((11, 17)));
        assert_eq!(CoordConvention::ColRow1.to_row_col(12, 18), Some((17, 11)));
        assert_eq!(CoordConvention::RowCol1.to_row_col(0, 3), None);
        for c in CoordConvention::ALL {
            assert_eq!(c.name().parse::<CoordConvention>().unwrap(), c);
            IndexPixelSet::reference(c).unwrap();
        }
    }

    #[test]
    fn index_pixel_json() {
        let px = IndexPixelSet::reference(CoordConvention::RowCol0).unwrap();
        let text = serde_json::to_string(&px).unwrap();
        assert!(text.contains("\"label\":0,\"row\":12,\"col\":18"));
        assert_eq!(serde_json::from_str::<IndexPixelSet>(&text).unwrap(), px);
        let dup = r#"[{"label":0,"row":1,"col":1},{"label":0,"row":2,"col":2}]"#;
        assert!(serde_json::from_str::<IndexPixelSet>(dup).is_err());
    }

    #[test]
    fn beam_weighting_prefers_bright_pixels() {
        // two labels share identical counts on two pixels; weighting by
        // click probability separates them by pattern size
        let g = crate::optics::GridGeometry::new(28, 2).unwrap();
        let beam = crate::optics::gaussian_beam(6.0, [0.0, 0.0], &g).unwrap();
        let ds = block_dataset();
        let w = weighted_pixel_label_counts(&ds, &beam).unwrap();
        let px = select_index_pixels(&w).unwrap();
        for j in 0..10 {
            assert_eq!(px.get(j).0 / 2, j);
        }
    }
}
