//! Pattern encoding and detection probabilities.
//!
//! A transmitted photon is either in the pure state `Ψ = G·M` (coherent over
//! all on-pixels) or, once which-pixel information exists, in the incoherent
//! mixture of the per-pixel pieces `G·1_p`. Both are expressed through
//! per-pixel overlap integrals over the 28×28 pattern window.

use super::grid::{inner_product, FieldGrid, GridGeometry};
use crate::dataset::{BinaryPattern, Mask, PIXELS, SIDE};
use crate::error::{Error, Result};

/// Below this fraction of the beam energy a masked field counts as dark.
pub const DARK_THRESHOLD: f64 = 1e-15;

/// One value per pattern pixel, row-major.
#[derive(Clone, PartialEq)]
pub struct PixelTable(pub Box<[f64; PIXELS]>);

impl PixelTable {
    pub fn zeros() -> Self {
        PixelTable(Box::new([0.0; PIXELS]))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[row * SIDE + col]
    }

    /// Sum over the mask's on-pixels.
    pub fn masked_sum(&self, mask: &Mask) -> f64 {
        mask.on_pixels().map(|i| self.0[i]).sum()
    }

    /// Sum of squares over the mask's on-pixels.
    pub fn masked_sum_sq(&self, mask: &Mask) -> f64 {
        mask.on_pixels().map(|i| self.0[i] * self.0[i]).sum()
    }
}

impl std::fmt::Debug for PixelTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_tuple("PixelTable").field(&&self.0[..8]).finish()
    }
}

/// `∫_pixel a·b dA` for every pattern pixel.
pub fn pixel_overlaps(a: &FieldGrid, b: &FieldGrid) -> Result<PixelTable> {
    let geom = *a.geometry();
    if geom != *b.geometry() {
        return Err(Error::GeometryMismatch);
    }
    let s = geom.supersample;
    let off = geom.pattern_offset() * s;
    let h = geom.sample_spacing();
    let mut table = PixelTable::zeros();

    if let (Some((ax, ay)), Some((bx, by))) = (a.factors(), b.factors()) {
        let per_pixel = |u: &[f64], v: &[f64]| -> [f64; SIDE] {
            let mut out = [0.0; SIDE];
            for (k, o) in out.iter_mut().enumerate() {
                let start = off + k * s;
                *o = (start..start + s).map(|i| u[i] * v[i]).sum::<f64>() * h;
            }
            out
        };
        let cols = per_pixel(ax, bx);
        let rows = per_pixel(ay, by);
        for r in 0..SIDE {
            for c in 0..SIDE {
                table.0[r * SIDE + c] = rows[r] * cols[c];
            }
        }
        return Ok(table);
    }

    let area = geom.cell_area();
    for r in 0..SIDE {
        for c in 0..SIDE {
            let mut acc = 0.0;
            for i in off + r * s..off + (r + 1) * s {
                for j in off + c * s..off + (c + 1) * s {
                    acc += a.at(i, j) * b.at(i, j);
                }
            }
            table.0[r * SIDE + c] = acc * area;
        }
    }
    Ok(table)
}

fn pattern_pixel(geom: &GridGeometry, i: usize, j: usize) -> Option<(usize, usize)> {
    let s = geom.supersample;
    let off = geom.pattern_offset();
    let (r, c) = (i / s, j / s);
    (r >= off && r < off + SIDE && c >= off && c < off + SIDE).then(|| (r - off, c - off))
}

/// `Ψ = G·M`: the beam masked by the pattern, not renormalized, so its
/// norm is the transmitted fraction `T`.
pub fn encode_pure(pattern: &BinaryPattern, beam: &FieldGrid) -> Result<FieldGrid> {
    encode_mask(&pattern.mask, beam)
}

pub fn encode_mask(mask: &Mask, beam: &FieldGrid) -> Result<FieldGrid> {
    let geom = *beam.geometry();
    let n = geom.samples_per_side();
    let mut amps = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if let Some((r, c)) = pattern_pixel(&geom, i, j) {
                if mask.get(r, c) {
                    amps[i * n + j] = beam.at(i, j);
                }
            }
        }
    }
    let psi = FieldGrid::dense(geom, amps)?;
    if psi.norm_squared() < DARK_THRESHOLD * beam.norm_squared() || psi.norm_squared() == 0.0 {
        return Err(Error::DarkPattern);
    }
    Ok(psi)
}

/// `|⟨mode|Ψ⟩|²`, the detection probability per incident photon.
pub fn project_pure(psi: &FieldGrid, mode: &FieldGrid) -> Result<f64> {
    let amp = inner_product(mode, psi)?;
    Ok(amp * amp)
}

/// Detection probability when every on-pixel radiates incoherently:
/// `Σ_p |⟨mode|G·1_p⟩|²`.
pub fn project_mixed(pattern: &BinaryPattern, beam: &FieldGrid, mode: &FieldGrid) -> Result<f64> {
    let overlaps = pixel_overlaps(beam, mode)?;
    let intensity = pixel_overlaps(beam, beam)?;
    if intensity.masked_sum(&pattern.mask) < DARK_THRESHOLD * beam.norm_squared()
        || pattern.mask.count_on() == 0
    {
        return Err(Error::DarkPattern);
    }
    Ok(overlaps.masked_sum_sq(&pattern.mask))
}

/// Where a transmitted photon lands when the pixels are read out directly.
#[derive(Debug, Clone, PartialEq)]
pub struct PixelDistribution {
    pub probabilities: Vec<f64>,
    pub normalized: bool,
}

impl PixelDistribution {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.probabilities[row * SIDE + col]
    }
}

/// Mixed-state route: per-pixel beam intensity on the on-pixels over `T`.
pub fn pixel_detection_distribution(
    pattern: &BinaryPattern,
    beam: &FieldGrid,
) -> Result<PixelDistribution> {
    let intensity = pixel_overlaps(beam, beam)?;
    distribution_from_intensity(&pattern.mask, &intensity, beam.norm_squared())
}

pub(crate) fn distribution_from_intensity(
    mask: &Mask,
    intensity: &PixelTable,
    reference: f64,
) -> Result<PixelDistribution> {
    let t = intensity.masked_sum(mask);
    if t < DARK_THRESHOLD * reference || t <= 0.0 {
        return Err(Error::DarkPattern);
    }
    let probabilities = (0..PIXELS)
        .map(|i| if mask.as_slice()[i] { intensity.0[i] / t } else { 0.0 })
        .collect();
    Ok(PixelDistribution {
        probabilities,
        normalized: true,
    })
}

/// Pure-state route: `|Ψ|²` integrated per pixel, over `‖Ψ‖²`.
pub fn pixel_distribution_from_field(psi: &FieldGrid) -> Result<PixelDistribution> {
    let table = pixel_overlaps(psi, psi)?;
    let total: f64 = table.0.iter().sum();
    if total <= 0.0 {
        return Err(Error::DarkPattern);
    }
    Ok(PixelDistribution {
        probabilities: table.0.iter().map(|v| v / total).collect(),
        normalized: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::modes::{gaussian_beam, hg_mode, ModeSpec};

    fn pattern(mask: Mask) -> BinaryPattern {
        BinaryPattern {
            mask,
            label: 0,
            source_index: 0,
        }
    }

    fn setup(s: usize) -> (GridGeometry, FieldGrid) {
        let g = GridGeometry::new(28, s).unwrap();
        let beam = gaussian_beam(5.0, [0.0, 0.0], &g).unwrap();
        (g, beam)
    }

    #[test]
    fn all_on_mask_is_identity() {
        let (_, beam) = setup(2);
        let psi = encode_pure(&pattern(Mask::full()), &beam).unwrap();
        assert_eq!(psi.amplitudes(), beam.amplitudes());
        assert!((psi.norm_squared() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dark_and_half_masks() {
        let (_, beam) = setup(2);
        assert!(matches!(
            encode_pure(&pattern(Mask::empty()), &beam),
            Err(Error::DarkPattern)
        ));
        let half = pattern(Mask::from_fn(|_, c| c >= 14));
        let psi = encode_pure(&half, &beam).unwrap();
        assert!((psi.norm_squared() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn pure_projection_examples() {
        let (g, beam) = setup(4);
        let m00 = hg_mode(&ModeSpec::new(0, 0, 5.0), &g).unwrap();
        let m10 = hg_mode(&ModeSpec::new(1, 0, 5.0), &g).unwrap();
        let psi = encode_pure(&pattern(Mask::full()), &beam).unwrap();
        assert!((project_pure(&psi, &m00).unwrap() - 1.0).abs() < 1e-6);
        assert!(project_pure(&psi, &m10).unwrap().abs() < 1e-9);

        let half = encode_pure(&pattern(Mask::from_fn(|_, c| c >= 14)), &beam).unwrap();
        let q = project_pure(&half, &m00).unwrap();
        assert!((q - 0.25).abs() < 1e-6);
        assert!((q / half.norm_squared() - 0.5).abs() < 1e-6);
    }

    #[test]
    fn mixed_projection_examples() {
        let (g, beam) = setup(4);
        let m00 = hg_mode(&ModeSpec::new(0, 0, 5.0), &g).unwrap();
        let m21 = hg_mode(&ModeSpec::new(2, 1, 3.5), &g).unwrap();
        let mut single = Mask::empty();
        single.set(12, 15, true);
        let p = pattern(single);
        for mode in [&m00, &m21] {
            let pure = project_pure(&encode_pure(&p, &beam).unwrap(), mode).unwrap();
            let mixed = project_mixed(&p, &beam, mode).unwrap();
            assert!((pure - mixed).abs() <= 1e-12);
        }

        let full = pattern(Mask::full());
        let mixed = project_mixed(&full, &beam, &m00).unwrap();
        let pure = project_pure(&encode_pure(&full, &beam).unwrap(), &m00).unwrap();
        assert!(mixed < 1.0 && mixed < pure);
        assert!(matches!(
            project_mixed(&pattern(Mask::empty()), &beam, &m00),
            Err(Error::DarkPattern)
        ));
    }

    #[test]
    fn mixed_half_plane_converges() {
        let half = pattern(Mask::from_fn(|_, c| c >= 14));
        let q = |s: usize| {
            let (g, beam) = setup(s);
            let m = hg_mode(&ModeSpec::new(0, 0, 5.0), &g).unwrap();
            project_mixed(&half, &beam, &m).unwrap()
        };
        // brute-force per-pixel sum on a dense s=16 raster
        let g16 = GridGeometry::new(28, 16).unwrap();
        let beam16 = gaussian_beam(5.0, [0.0, 0.0], &g16).unwrap();
        let dense = FieldGrid::dense(g16, beam16.amplitudes()).unwrap();
        let mut oracle = 0.0;
        for r in 0..SIDE {
            for c in 14..SIDE {
                let mut acc = 0.0;
                for i in r * 16..(r + 1) * 16 {
                    for j in c * 16..(c + 1) * 16 {
                        let a = dense.at(i, j);
                        acc += a * a;
                    }
                }
                let v = acc * g16.cell_area();
                oracle += v * v;
            }
        }
        assert!((q(4) - oracle).abs() < 1e-4, "{} vs {}", q(4), oracle);
    }

    #[test]
    fn pixel_distributions() {
        let (_, beam) = setup(3);
        let d = pixel_detection_distribution(&pattern(Mask::full()), &beam).unwrap();
        let sum: f64 = d.probabilities.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let c = [d.get(13, 13), d.get(13, 14), d.get(14, 13), d.get(14, 14)];
        for v in c {
            assert!((v - c[0]).abs() < 1e-12);
        }

        let mut one = Mask::empty();
        one.set(3, 20, true);
        let d = pixel_detection_distribution(&pattern(one), &beam).unwrap();
        assert_eq!(d.get(3, 20), 1.0);

        let mut two = Mask::empty();
        two.set(10, 5, true);
        two.set(10, 22, true);
        let d = pixel_detection_distribution(&pattern(two), &beam).unwrap();
        assert!((d.get(10, 5) - 0.5).abs() < 1e-12);
        assert!((d.get(10, 22) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn separable_and_dense_overlaps_agree() {
        let g = GridGeometry::new(32, 3).unwrap();
        let beam = gaussian_beam(6.0, [0.3, -0.2], &g).unwrap();
        let mode = hg_mode(&ModeSpec::new(3, 2, 4.0), &g).unwrap();
        let fast = pixel_overlaps(&beam, &mode).unwrap();
        let dense_mode = FieldGrid::dense(g, mode.amplitudes()).unwrap();
        let slow = pixel_overlaps(&beam, &dense_mode).unwrap();
        for i in 0..PIXELS {
            assert!((fast.0[i] - slow.0[i]).abs() < 1e-14);
        }
    }
}
