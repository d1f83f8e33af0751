//! Label distributions, confusion matrices and their shot-noise uncertainty.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::NUM_LABELS;
use crate::error::{Error, Result};

pub type Square = [[f64; NUM_LABELS]; NUM_LABELS];
pub type CountSquare = [[u64; NUM_LABELS]; NUM_LABELS];

/// Probabilities over the ten labels, summing to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDistribution(pub [f64; NUM_LABELS]);

impl LabelDistribution {
    /// Normalizes non-negative weights. Returns `None` if they sum to zero.
    pub fn from_weights(weights: [f64; NUM_LABELS]) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return None;
        }
        Some(Self(weights.map(|w| w / total)))
    }

    pub fn uniform() -> Self {
        Self([1.0 / NUM_LABELS as f64; NUM_LABELS])
    }

    pub fn one_hot(label: usize) -> Self {
        let mut p = [0.0; NUM_LABELS];
        p[label] = 1.0;
        Self(p)
    }

    pub fn probabilities(&self) -> &[f64; NUM_LABELS] {
        &self.0
    }

    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for k in 1..NUM_LABELS {
            if self.0[k] > self.0[best] {
                best = k;
            }
        }
        best
    }

    pub fn total_variation(&self, other: &Self) -> f64 {
        0.5 * self
            .0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

/// Row `j` holds `P(inferred k | true j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Square,
    /// Raw detection events; all zero for analytic matrices.
    pub counts: CountSquare,
    /// Per-cell shot-noise standard error; all zero for analytic matrices.
    pub sigma: Square,
    /// Events per true label that ended without any detection.
    pub no_detection: [u64; NUM_LABELS],
    /// Source indices of patterns left out of their row's average.
    pub excluded: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn analytic(rows: Square) -> Self {
        Self {
            rows,
            counts: [[0; NUM_LABELS]; NUM_LABELS],
            sigma: [[0.0; NUM_LABELS]; NUM_LABELS],
            no_detection: [0; NUM_LABELS],
            excluded: Vec::new(),
        }
    }

    /// Row-normalizes event counts and attaches binomial standard errors.
    pub fn from_counts(counts: CountSquare, no_detection: [u64; NUM_LABELS]) -> Result<Self> {
        let (sigma, _) = shot_noise_sigma(&counts)?;
        let mut rows = [[0.0; NUM_LABELS]; NUM_LABELS];
        for (row, c) in rows.iter_mut().zip(counts.iter()) {
            let n: u64 = c.iter().sum();
            for (p, &k) in row.iter_mut().zip(c.iter()) {
                *p = k as f64 / n as f64;
            }
        }
        Ok(Self {
            rows,
            counts,
            sigma,
            no_detection,
            excluded: Vec::new(),
        })
    }

    pub fn diagonal(&self) -> [f64; NUM_LABELS] {
        std::array::from_fn(|j| self.rows[j][j])
    }

    /// Equal-weight mean of the diagonal.
    pub fn fidelity(&self) -> f64 {
        self.diagonal().iter().sum::<f64>() / NUM_LABELS as f64
    }

    pub fn fidelity_sigma(&self) -> f64 {
        fidelity_sigma(&self.sigma)
    }

    pub fn total_events(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn total_no_detection(&self) -> u64 {
        self.no_detection.iter().sum()
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

/// Per-cell `sqrt(p̂(1−p̂)/N_row)` and the fidelity uncertainty
/// `sqrt(Σ_j σ_jj²)/10`.
pub fn shot_noise_sigma(counts: &CountSquare) -> Result<(Square, f64)> {
    let mut sigma = [[0.0; NUM_LABELS]; NUM_LABELS];
    for (j, row) in counts.iter().enumerate() {
        let n: u64 = row.iter().sum();
        if n == 0 {
            return Err(Error::EmptyRow(j));
        }
        for (s, &k) in sigma[j].iter_mut().zip(row.iter()) {
            let p = k as f64 / n as f64;
            *s = (p * (1.0 - p) / n as f64).sqrt();
        }
    }
    let f = fidelity_sigma(&sigma);
    Ok((sigma, f))
}

fn fidelity_sigma(sigma: &Square) -> f64 {
    (0..NUM_LABELS).map(|j| sigma[j][j].powi(2)).sum::<f64>().sqrt() / NUM_LABELS as f64
}

fn header() -> String {
    let mut s = String::from("true\\pred");
    for k in 0..NUM_LABELS {
        let _ = write!(s, ",{k}");
    }
    s
}

/// Human-readable CSV: probability, count and sigma blocks, each headed by a
/// `# name` line.
pub fn to_csv(m: &ConfusionMatrix) -> String {
    let mut out = String::new();
    let mut block = |name: &str, cell: &dyn Fn(usize, usize) -> String| {
        let _ = writeln!(out, "# {name}");
        let _ = writeln!(out, "{}", header());
        for j in 0..NUM_LABELS {
            let _ = write!(out, "{j}");
            for k in 0..NUM_LABELS {
                let _ = write!(out, ",{}", cell(j, k));
            }
            out.push('\n');
        }
    };
    block("probabilities", &|j, k| format!("{:.4}", m.rows[j][k]));
    block("counts", &|j, k| m.counts[j][k].to_string());
    block("sigma", &|j, k| format!("{:.4}", m.sigma[j][k]));
    out
}

/// The three blocks of a confusion CSV as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionTables {
    pub probabilities: Square,
    pub counts: CountSquare,
    pub sigma: Square,
}

pub fn from_csv(text: &str) -> Result<ConfusionTables> {
    let bad = |detail: String| Error::Parse {
        what: "confusion CSV",
        detail,
    };
    let mut blocks: Vec<(String, Vec<Vec<String>>)> = Vec::new();
    for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
        if let Some(name) = line.strip_prefix("# ") {
            blocks.push((name.to_string(), Vec::new()));
        } else if line.starts_with("true\\pred") {
            continue;
        } else {
            let (_, rows) = blocks
                .last_mut()
                .ok_or_else(|| bad("data before first block header".into()))?;
            rows.push(line.split(',').skip(1).map(str::to_string).collect());
        }
    }
    fn square<T: Copy + Default + std::str::FromStr>(
        rows: &[Vec<String>],
        bad: &dyn Fn(String) -> Error,
    ) -> Result<[[T; NUM_LABELS]; NUM_LABELS]> {
        if rows.len() != NUM_LABELS {
            return Err(bad(format!("expected 10 rows, found {}", rows.len())));
        }
        let mut out = [[T::default(); NUM_LABELS]; NUM_LABELS];
        for (j, row) in rows.iter().enumerate() {
            if row.len() != NUM_LABELS {
                return Err(bad(format!("row {j} has {} cells", row.len())));
            }
            for (k, cell) in row.iter().enumerate() {
                out[j][k] = cell
                    .parse()
                    .map_err(|_| bad(format!("cell ({j},{k}) = {cell:?}")))?;
            }
        }
        Ok(out)
    }
    let find = |name: &str| {
        blocks
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, rows)| rows.as_slice())
            .ok_or_else(|| bad(format!("missing block {name}")))
    };
    Ok(ConfusionTables {
        probabilities: square(find("probabilities")?, &bad)?,
        counts: square(find("counts")?, &bad)?,
        sigma: square(find("sigma")?, &bad)?,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfusionJson {
    schema_version: u32,
    fidelity: f64,
    fidelity_sigma: f64,
    per_label_accuracy: [f64; NUM_LABELS],
    matrix: ConfusionMatrix,
    metadata: serde_json::Value,
}

/// Machine-readable form with full-precision floats and run metadata.
pub fn to_json(m: &ConfusionMatrix, metadata: serde_json::Value) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ConfusionJson {
        schema_version: 1,
        fidelity: m.fidelity(),
        fidelity_sigma: m.fidelity_sigma(),
        per_label_accuracy: m.diagonal(),
        matrix: m.clone(),
        metadata,
    })?)
}

pub fn from_json(text: &str) -> Result<(ConfusionMatrix, serde_json::Value)> {
    let parsed: ConfusionJson = serde_json::from_str(text)?;
    Ok((parsed.matrix, parsed.metadata))
}
