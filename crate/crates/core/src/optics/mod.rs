//! Continuous-field optics on a supersampled midpoint grid: Gaussian beams,
//! Hermite-Gaussian modes, pattern encoding and projection probabilities.

mod grid;
mod hermite;
mod modes;
mod projection;

pub use grid::{inner_product, FieldGrid, GridGeometry};
pub use hermite::{hermite, MAX_ORDER};
pub use modes::{fit_geometry, gaussian_beam, hg_mode, mode_tail, ModeSpec, MAX_MODE_TAIL};
pub use projection::{
    encode_mask, encode_pure, pixel_detection_distribution, pixel_distribution_from_field,
    pixel_overlaps, project_mixed, project_pure, PixelDistribution, PixelTable, DARK_THRESHOLD,
};
pub(crate) use projection::distribution_from_intensity;
