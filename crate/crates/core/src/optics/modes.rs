use serde::{Deserialize, Serialize};

use super::grid::{FieldGrid, GridGeometry};
use super::hermite::{hg_profile, MAX_ORDER};
use crate::error::{Error, Result};

/// Largest tail energy an HG raster may leave outside its window.
pub const MAX_MODE_TAIL: f64 = 1e-6;

const MAX_PIXELS_PER_SIDE: usize = 4096;

/// Hermite-Gaussian mode `HG_{m,n}`; `m` runs along x (columns), `n` along y (rows).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeSpec {
    pub m: u32,
    pub n: u32,
    pub waist: f64,
    pub center: [f64; 2],
}

impl ModeSpec {
    pub fn new(m: u32, n: u32, waist: f64) -> Self {
        Self {
            m,
            n,
            waist,
            center: [0.0, 0.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.waist > 0.0 && self.waist.is_finite()) {
            return Err(Error::InvalidModeSet(format!(
                "HG({},{}) has non-positive waist {}",
                self.m, self.n, self.waist
            )));
        }
        for order in [self.m, self.n] {
            if order > MAX_ORDER {
                return Err(Error::OrderTooLarge(order));
            }
        }
        Ok(())
    }
}

fn check_waist(waist: f64) -> Result<()> {
    if waist > 0.0 && waist.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidGeometry(format!("waist must be positive, got {waist}")))
    }
}

/// Normalized Gaussian `exp(−r²/w²)` on the grid.
pub fn gaussian_beam(waist: f64, center: [f64; 2], geometry: &GridGeometry) -> Result<FieldGrid> {
    check_waist(waist)?;
    geometry.validate()?;
    let x = hg_profile(0, waist, center[0], &geometry.x_coords());
    let y = hg_profile(0, waist, center[1], &geometry.y_coords());
    Ok(FieldGrid::separable(*geometry, x, y).normalize())
}

/// Fraction of one axis profile's energy outside `[lo, hi)`, by extending the
/// sample lattice outward until the profile has decayed.
fn axis_tail(order: u32, waist: f64, center: f64, inside: &[f64], window: [f64; 2], h: f64) -> f64 {
    let e_in: f64 = hg_profile(order, waist, center, inside)
        .iter()
        .map(|a| a * a)
        .sum();
    // turning point of the Hermite function plus a wide Gaussian margin
    let reach = waist / std::f64::consts::SQRT_2 * ((2.0 * order as f64 + 1.0).sqrt() + 12.0);
    let far_left = (center - reach).min(window[0]);
    let far_right = (center + reach).max(window[1]);
    let n_left = ((window[0] - far_left) / h).ceil() as usize + 1;
    let n_right = ((far_right - window[1]) / h).ceil() as usize + 1;
    let outside: Vec<f64> = (0..n_left)
        .map(|k| window[0] - h * (k as f64 + 0.5))
        .chain((0..n_right).map(|k| window[1] + h * (k as f64 + 0.5)))
        .collect();
    let e_out: f64 = hg_profile(order, waist, center, &outside)
        .iter()
        .map(|a| a * a)
        .sum();
    let total = e_in + e_out;
    if total > 0.0 {
        e_out / total
    } else {
        1.0
    }
}

/// Estimated fraction of the mode's energy falling outside the grid window.
pub fn mode_tail(spec: &ModeSpec, geometry: &GridGeometry) -> Result<f64> {
    spec.validate()?;
    geometry.validate()?;
    let h = geometry.sample_spacing();
    let (wx, wy) = geometry.window();
    let tx = axis_tail(spec.m, spec.waist, spec.center[0], &geometry.x_coords(), wx, h);
    let ty = axis_tail(spec.n, spec.waist, spec.center[1], &geometry.y_coords(), wy, h);
    Ok(1.0 - (1.0 - tx) * (1.0 - ty))
}

/// Normalized `HG_{m,n}` raster; fails if the mode does not fit the window.
pub fn hg_mode(spec: &ModeSpec, geometry: &GridGeometry) -> Result<FieldGrid> {
    let tail = mode_tail(spec, geometry)?;
    if tail > MAX_MODE_TAIL {
        return Err(Error::ModeTruncated {
            m: spec.m,
            n: spec.n,
            tail,
        });
    }
    let x = hg_profile(spec.m, spec.waist, spec.center[0], &geometry.x_coords());
    let y = hg_profile(spec.n, spec.waist, spec.center[1], &geometry.y_coords());
    Ok(FieldGrid::separable(*geometry, x, y).normalize())
}

/// Smallest padded window (same sampling) on which every mode fits.
pub fn fit_geometry(modes: &[ModeSpec], base: &GridGeometry) -> Result<GridGeometry> {
    base.validate()?;
    let fits = |spec: &ModeSpec, pixels: usize| -> Result<bool> {
        let g = base.with_pixels_per_side(pixels)?;
        Ok(mode_tail(spec, &g)? <= MAX_MODE_TAIL)
    };
    let mut needed = base.pixels_per_side;
    for spec in modes {
        if fits(spec, needed)? {
            continue;
        }
        // window sizes are 28 + 2k; tail shrinks monotonically in k
        let to_pixels = |k: usize| base.pixels_per_side + 2 * k;
        let (mut lo, mut hi) = ((needed - base.pixels_per_side) / 2, (MAX_PIXELS_PER_SIDE - base.pixels_per_side) / 2);
        if !fits(spec, to_pixels(hi))? {
            return Err(Error::ModeTruncated {
                m: spec.m,
                n: spec.n,
                tail: mode_tail(spec, &base.with_pixels_per_side(to_pixels(hi))?)?,
            });
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if fits(spec, to_pixels(mid))? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        needed = to_pixels(hi);
    }
    base.with_pixels_per_side(needed)
}
