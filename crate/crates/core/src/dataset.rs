//! MNIST IDX ingestion, binarization and the first-N-per-digit subset.
//!
//! Pixel coordinates are `(row, col)` with row 0 at the top, matching the
//! row-major order of the IDX container.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SIDE: usize = 28;
pub const PIXELS: usize = SIDE * SIDE;
pub const NUM_LABELS: usize = 10;

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

pub const DEFAULT_THRESHOLD: u8 = 127;

/// Grayscale images and labels as stored in an IDX pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImageSet {
    images: Vec<[u8; PIXELS]>,
    labels: Vec<u8>,
}

impl RawImageSet {
    pub fn new(images: Vec<[u8; PIXELS]>, labels: Vec<u8>) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::CountMismatch {
                images: images.len(),
                labels: labels.len(),
            });
        }
        if let Some((index, &label)) = labels
            .iter()
            .enumerate()
            .find(|(_, &l)| l as usize >= NUM_LABELS)
        {
            return Err(Error::BadLabel { index, label });
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, index: usize) -> &[u8; PIXELS] {
        &self.images[index]
    }

    pub fn label(&self, index: usize) -> u8 {
        self.labels[index]
    }

    pub fn images(&self) -> &[[u8; PIXELS]] {
        &self.images
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// A 28×28 on/off mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Mask([bool; PIXELS]);

impl Mask {
    pub fn empty() -> Self {
        Mask([false; PIXELS])
    }

    pub fn full() -> Self {
        Mask([true; PIXELS])
    }

    pub fn from_fn(mut on: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = [false; PIXELS];
        for (i, b) in bits.iter_mut().enumerate() {
            *b = on(i / SIDE, i % SIDE);
        }
        Mask(bits)
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.0[row * SIDE + col]
    }

    pub fn set(&mut self, row: usize, col: usize, on: bool) {
        self.0[row * SIDE + col] = on;
    }

    pub fn as_slice(&self) -> &[bool; PIXELS] {
        &self.0
    }

    pub fn count_on(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    /// Flat row-major indices of the on-pixels.
    pub fn on_pixels(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    /// Alternating run lengths over the row-major raster, starting with an
    /// off-run (possibly zero).
    pub fn to_rle(&self) -> Vec<u16> {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u16;
        for &b in &self.0 {
            if b == current {
                len += 1;
            } else {
                runs.push(len);
                current = b;
                len = 1;
            }
        }
        runs.push(len);
        runs
    }

    pub fn from_rle(runs: &[u16]) -> Result<Self> {
        let mut bits = [false; PIXELS];
        let mut pos = 0usize;
        for (i, &run) in runs.iter().enumerate() {
            let end = pos + run as usize;
            if end > PIXELS {
                return Err(Error::Parse {
                    what: "mask run-length encoding",
                    detail: format!("runs exceed {PIXELS} pixels"),
                });
            }
            if i % 2 == 1 {
                bits[pos..end].iter_mut().for_each(|b| *b = true);
            }
            pos = end;
        }
        if pos != PIXELS {
            return Err(Error::Parse {
                what: "mask run-length encoding",
                detail: format!("runs cover {pos} of {PIXELS} pixels"),
            });
        }
        Ok(Mask(bits))
    }
}

impl std::fmt::Debug for Mask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "Mask [")?;
        for r in 0..SIDE {
            let line: String = (0..SIDE)
                .map(|c| if self.get(r, c) { '#' } else { '.' })
                .collect();
            writeln!(f, "  {line}")?;
        }
        write!(f, "]")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryPattern {
    pub mask: Mask,
    pub label: u8,
    /// Position of the source image in the original IDX file.
    pub source_index: usize,
}

/// Patterns grouped by label (ascending), source order preserved within a label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    patterns: Vec<BinaryPattern>,
    per_label_count: usize,
}

impl Dataset {
    /// Builds a dataset from arbitrary patterns. Patterns are stably grouped
    /// by label; `per_label_count` is the largest label population.
    pub fn from_patterns(mut patterns: Vec<BinaryPattern>) -> Self {
        patterns.sort_by_key(|p| p.label);
        let mut counts = [0usize; NUM_LABELS];
        for p in &patterns {
            counts[p.label as usize] += 1;
        }
        let per_label_count = counts.iter().copied().max().unwrap_or(0);
        Self {
            patterns,
            per_label_count,
        }
    }

    pub fn patterns(&self) -> &[BinaryPattern] {
        &self.patterns
    }

    pub fn per_label_count(&self) -> usize {
        self.per_label_count
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn of_label(&self, label: u8) -> impl Iterator<Item = &BinaryPattern> + '_ {
        self.patterns.iter().filter(move |p| p.label == label)
    }

    pub fn label_counts(&self) -> [usize; NUM_LABELS] {
        let mut counts = [0usize; NUM_LABELS];
        for p in &self.patterns {
            counts[p.label as usize] += 1;
        }
        counts
    }

    /// Applies a digit relabeling `label -> perm[label]`.
    pub fn relabeled(&self, perm: &[u8; NUM_LABELS]) -> Self {
        Self::from_patterns(
            self.patterns
                .iter()
                .map(|p| BinaryPattern {
                    label: perm[p.label as usize],
                    ..p.clone()
                })
                .collect(),
        )
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(Error::Truncated {
            expected: offset + 4,
            found: bytes.len(),
        })
}

/// Parses an IDX image stream and its companion label stream.
pub fn parse_idx(image_bytes: &[u8], label_bytes: &[u8]) -> Result<RawImageSet> {
    let magic = read_u32(image_bytes, 0)?;
    if magic != IMAGE_MAGIC {
        return Err(Error::BadMagic {
            expected: IMAGE_MAGIC,
            found: magic,
        });
    }
    let magic = read_u32(label_bytes, 0)?;
    if magic != LABEL_MAGIC {
        return Err(Error::BadMagic {
            expected: LABEL_MAGIC,
            found: magic,
        });
    }
    let n_images = read_u32(image_bytes, 4)? as usize;
    let rows = read_u32(image_bytes, 8)? as usize;
    let cols = read_u32(image_bytes, 12)? as usize;
    let n_labels = read_u32(label_bytes, 4)? as usize;
    if rows != SIDE || cols != SIDE {
        return Err(Error::BadShape { rows, cols });
    }
    if n_images != n_labels {
        return Err(Error::CountMismatch {
            images: n_images,
            labels: n_labels,
        });
    }

    let image_end = 16 + n_images * PIXELS;
    if image_bytes.len() < image_end {
        return Err(Error::Truncated {
            expected: image_end,
            found: image_bytes.len(),
        });
    }
    let label_end = 8 + n_labels;
    if label_bytes.len() < label_end {
        return Err(Error::Truncated {
            expected: label_end,
            found: label_bytes.len(),
        });
    }

    let images = image_bytes[16..image_end]
        .chunks_exact(PIXELS)
        .map(|chunk| {
            let mut img = [0u8; PIXELS];
            img.copy_from_slice(chunk);
            img
        })
        .collect();
    let labels = label_bytes[8..label_end].to_vec();
    RawImageSet::new(images, labels)
}

/// Serializes an image set back into an IDX (images, labels) byte pair.
pub fn encode_idx(raw: &RawImageSet) -> (Vec<u8>, Vec<u8>) {
    let n = raw.len() as u32;
    let mut images = Vec::with_capacity(16 + raw.len() * PIXELS);
    for word in [IMAGE_MAGIC, n, SIDE as u32, SIDE as u32] {
        images.extend_from_slice(&word.to_be_bytes());
    }
    for img in &raw.images {
        images.extend_from_slice(img);
    }
    let mut labels = Vec::with_capacity(8 + raw.len());
    labels.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    labels.extend_from_slice(&n.to_be_bytes());
    labels.extend_from_slice(&raw.labels);
    (images, labels)
}

/// Reads a file, decompressing it when `gunzip` is set or the gzip magic is present.
pub fn read_maybe_gz(path: &Path, gunzip: bool) -> Result<Vec<u8>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if gunzip || bytes.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(bytes)
    }
}

pub fn load_idx(images: &Path, labels: &Path, gunzip: bool) -> Result<RawImageSet> {
    parse_idx(&read_maybe_gz(images, gunzip)?, &read_maybe_gz(labels, gunzip)?)
}

/// Pixel is on iff its byte value is strictly above `threshold`.
pub fn binarize(image: &[u8; PIXELS], threshold: u8) -> Mask {
    let mut bits = [false; PIXELS];
    for (b, &v) in bits.iter_mut().zip(image.iter()) {
        *b = v > threshold;
    }
    Mask(bits)
}

/// Takes the first `per_label_count` images of every digit, in file order.
pub fn select_subset(raw: &RawImageSet, per_label_count: usize, threshold: u8) -> Result<Dataset> {
    let mut patterns = Vec::with_capacity(per_label_count * NUM_LABELS);
    for label in 0..NUM_LABELS as u8 {
        let chosen: Vec<_> = raw
            .labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == label)
            .take(per_label_count)
            .map(|(i, _)| BinaryPattern {
                mask: binarize(&raw.images[i], threshold),
                label,
                source_index: i,
            })
            .collect();
        if chosen.len() < per_label_count {
            return Err(Error::InsufficientPatterns(label));
        }
        patterns.extend(chosen);
    }
    Ok(Dataset {
        patterns,
        per_label_count,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    label: u8,
    source_index: usize,
    mask_rle: Vec<u16>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    per_label_count: usize,
    threshold: u8,
    patterns: Vec<ManifestEntry>,
}

/// Dataset manifest: per-pattern label, source index and run-length mask.
pub fn dataset_to_json(dataset: &Dataset, threshold: u8) -> Result<String> {
    let manifest = Manifest {
        schema_version: 1,
        per_label_count: dataset.per_label_count,
        threshold,
        patterns: dataset
            .patterns
            .iter()
            .map(|p| ManifestEntry {
                label: p.label,
                source_index: p.source_index,
                mask_rle: p.mask.to_rle(),
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&manifest)?)
}

pub fn dataset_from_json(text: &str) -> Result<Dataset> {
    let manifest: Manifest = serde_json::from_str(text)?;
    let mut patterns = Vec::with_capacity(manifest.patterns.len());
    for e in manifest.patterns {
        if e.label as usize >= NUM_LABELS {
            return Err(Error::BadLabel {
                index: e.source_index,
                label: e.label,
            });
        }
        patterns.push(BinaryPattern {
            mask: Mask::from_rle(&e.mask_rle)?,
            label: e.label,
            source_index: e.source_index,
        });
    }
    let mut ds = Dataset::from_patterns(patterns);
    ds.per_label_count = manifest.per_label_count;
    Ok(ds)
}
