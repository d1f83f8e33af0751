use serde::{Deserialize, Serialize};

use crate::dataset::SIDE;
use crate::error::{Error, Result};

/// Supersampled raster geometry.
///
/// The 28×28 pattern window sits at the centre of a `pixels_per_side` square
/// field window; extra pixels are padding that is always dark on the
/// modulator but lets wide modes live on the grid untruncated. Sample `(i, j)`
/// of pixel `(r, c)` sits at
///
/// ```text
/// x = (c − (N−1)/2 + (j+½)/s − ½)·pitch + origin.x
/// y = ((N−1)/2 − r + (i+½)/s − ½)·pitch + origin.y
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub pixels_per_side: usize,
    pub supersample: usize,
    pub pixel_pitch: f64,
    pub origin: [f64; 2],
}

impl Default for GridGeometry {
    fn default() -> Self {
        Self {
            pixels_per_side: SIDE,
            supersample: 4,
            pixel_pitch: 1.0,
            origin: [0.0, 0.0],
        }
    }
}

impl GridGeometry {
    pub fn new(pixels_per_side: usize, supersample: usize) -> Result<Self> {
        let g = Self {
            pixels_per_side,
            supersample,
            ..Self::default()
        };
        g.validate()?;
        Ok(g)
    }

    /// The bare 28×28 pattern window.
    pub fn pattern_window(supersample: usize) -> Result<Self> {
        Self::new(SIDE, supersample)
    }

    pub fn validate(&self) -> Result<()> {
        if self.supersample == 0 {
            return Err(Error::InvalidGeometry("supersample must be at least 1".into()));
        }
        if self.pixels_per_side < SIDE || !(self.pixels_per_side - SIDE).is_multiple_of(2) {
            return Err(Error::InvalidGeometry(format!(
                "pixels_per_side {} must be 28 plus an even padding",
                self.pixels_per_side
            )));
        }
        if !(self.pixel_pitch > 0.0 && self.pixel_pitch.is_finite()) {
            return Err(Error::InvalidGeometry("pixel pitch must be positive".into()));
        }
        Ok(())
    }

    pub fn with_pixels_per_side(self, pixels_per_side: usize) -> Result<Self> {
        let g = Self {
            pixels_per_side,
            ..self
        };
        g.validate()?;
        Ok(g)
    }

    pub fn samples_per_side(&self) -> usize {
        self.pixels_per_side * self.supersample
    }

    pub fn sample_spacing(&self) -> f64 {
        self.pixel_pitch / self.supersample as f64
    }

    pub fn cell_area(&self) -> f64 {
        let h = self.sample_spacing();
        h * h
    }

    /// Grid pixel index of pattern pixel 0 along either axis.
    pub fn pattern_offset(&self) -> usize {
        (self.pixels_per_side - SIDE) / 2
    }

    fn axis_offset(&self, sample: usize) -> f64 {
        let s = self.supersample;
        let pixel = (sample / s) as f64;
        let sub = (sample % s) as f64;
        let half = (self.pixels_per_side as f64 - 1.0) / 2.0;
        pixel - half + (sub + 0.5) / s as f64 - 0.5
    }

    /// x coordinate of every column sample.
    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.samples_per_side())
            .map(|j| self.axis_offset(j) * self.pixel_pitch + self.origin[0])
            .collect()
    }

    /// y coordinate of every row sample (row 0 at the top).
    pub fn y_coords(&self) -> Vec<f64> {
        let s = self.supersample;
        let half = (self.pixels_per_side as f64 - 1.0) / 2.0;
        (0..self.samples_per_side())
            .map(|i| {
                let r = (i / s) as f64;
                let sub = (i % s) as f64;
                (half - r + (sub + 0.5) / s as f64 - 0.5) * self.pixel_pitch + self.origin[1]
            })
            .collect()
    }

    /// Half-open coordinate extent `[lo, hi)` of the field window along x and y.
    pub fn window(&self) -> ([f64; 2], [f64; 2]) {
        let half = self.pixels_per_side as f64 * self.pixel_pitch / 2.0;
        (
            [self.origin[0] - half, self.origin[0] + half],
            [self.origin[1] - half, self.origin[1] + half],
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    /// `a(row, col) = y[row] · x[col]`
    Separable { x: Vec<f64>, y: Vec<f64> },
}

/// Real amplitude raster over a [`GridGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    geometry: GridGeometry,
    storage: Storage,
    norm_squared: f64,
    normalized: bool,
}

impl FieldGrid {
    pub fn dense(geometry: GridGeometry, amplitudes: Vec<f64>) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.samples_per_side();
        if amplitudes.len() != n * n {
            return Err(Error::GeometryMismatch);
        }
        let norm_squared = amplitudes.iter().map(|a| a * a).sum::<f64>() * geometry.cell_area();
        Ok(Self {
            geometry,
            storage: Storage::Dense(amplitudes),
            norm_squared,
            normalized: false,
        })
    }

    pub(crate) fn separable(geometry: GridGeometry, x: Vec<f64>, y: Vec<f64>) -> Self {
        debug_assert_eq!(x.len(), geometry.samples_per_side());
        debug_assert_eq!(y.len(), geometry.samples_per_side());
        let norm_squared = x.iter().map(|a| a * a).sum::<f64>()
            * y.iter().map(|a| a * a).sum::<f64>()
            * geometry.cell_area();
        Self {
            geometry,
            storage: Storage::Separable { x, y },
            norm_squared,
            normalized: false,
        }
    }

    /// Flat-top field covering the whole window, normalized.
    pub fn uniform(geometry: GridGeometry) -> Result<Self> {
        geometry.validate()?;
        let n = geometry.samples_per_side();
        Ok(Self::separable(geometry, vec![1.0; n], vec![1.0; n]).normalize())
    }

    /// Rescales to unit norm on the grid. Zero fields are returned unchanged.
    pub fn normalize(self) -> Self {
        if self.norm_squared <= 0.0 {
            return self;
        }
        let k = self.norm_squared.sqrt().recip();
        let mut out = self.scaled(k);
        out.norm_squared = 1.0;
        out.normalized = true;
        out
    }

    pub fn scaled(&self, k: f64) -> Self {
        let storage = match &self.storage {
            Storage::Dense(a) => Storage::Dense(a.iter().map(|v| v * k).collect()),
            Storage::Separable { x, y } => Storage::Separable {
                x: x.iter().map(|v| v * k).collect(),
                y: y.clone(),
            },
        };
        let norm_squared = match &storage {
            Storage::Dense(a) => a.iter().map(|v| v * v).sum::<f64>() * self.geometry.cell_area(),
            Storage::Separable { x, y } => {
                x.iter().map(|a| a * a).sum::<f64>()
                    * y.iter().map(|a| a * a).sum::<f64>()
                    * self.geometry.cell_area()
            }
        };
        Self {
            geometry: self.geometry,
            storage,
            norm_squared,
            normalized: false,
        }
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn norm_squared(&self) -> f64 {
        self.norm_squared
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn is_separable(&self) -> bool {
        matches!(self.storage, Storage::Separable { .. })
    }

    pub(crate) fn factors(&self) -> Option<(&[f64], &[f64])> {
        match &self.storage {
            Storage::Separable { x, y } => Some((x, y)),
            Storage::Dense(_) => None,
        }
    }

    /// Amplitude at row sample `i`, column sample `j`.
    pub fn at(&self, i: usize, j: usize) -> f64 {
        match &self.storage {
            Storage::Dense(a) => a[i * self.geometry.samples_per_side() + j],
            Storage::Separable { x, y } => y[i] * x[j],
        }
    }

    /// Row-major amplitude raster.
    pub fn amplitudes(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(a) => a.clone(),
            Storage::Separable { x, y } => y
                .iter()
                .flat_map(|yv| x.iter().map(move |xv| yv * xv))
                .collect(),
        }
    }

    /// Quadrature sum `Σ a²·Δ` recomputed from the raster.
    pub fn quadrature_norm_squared(&self) -> f64 {
        self.amplitudes().iter().map(|a| a * a).sum::<f64>() * self.geometry.cell_area()
    }

    /// Amplitude at the sample nearest to a continuous point.
    pub fn sample_near(&self, x: f64, y: f64) -> f64 {
        let xs = self.geometry.x_coords();
        let ys = self.geometry.y_coords();
        let nearest = |cs: &[f64], v: f64| {
            cs.iter()
                .enumerate()
                .min_by(|a, b| (a.1 - v).abs().total_cmp(&(b.1 - v).abs()))
                .map(|(i, _)| i)
                .unwrap_or(0)
        };
        self.at(nearest(&ys, y), nearest(&xs, x))
    }
}

/// Quadrature overlap `⟨a|b⟩ = Σ a·b·Δ`.
pub fn inner_product(a: &FieldGrid, b: &FieldGrid) -> Result<f64> {
    if a.geometry != b.geometry {
        return Err(Error::GeometryMismatch);
    }
    let area = a.geometry.cell_area();
    if let (Some((ax, ay)), Some((bx, by))) = (a.factors(), b.factors()) {
        let sx: f64 = ax.iter().zip(bx).map(|(p, q)| p * q).sum();
        let sy: f64 = ay.iter().zip(by).map(|(p, q)| p * q).sum();
        return Ok(sx * sy * area);
    }
    let n = a.geometry.samples_per_side();
    let mut total = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a.at(i, j) * b.at(i, j);
        }
        total += row;
    }
    Ok(total * area)
}
