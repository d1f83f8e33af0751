use crate::error::{Error, Result};

pub const MAX_ORDER: u32 = 64;

/// Physicists' Hermite polynomial `H_n(x)`.
pub fn hermite(n: u32, x: f64) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(Error::OrderTooLarge(n));
    }
    Ok(hermite_unchecked(n, x))
}

pub(crate) fn hermite_unchecked(n: u32, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 2.0 * x;
    for k in 1..n {
        let next = 2.0 * x * cur - 2.0 * k as f64 * prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// One axis of an HG amplitude: `H_order(√2 (x−c)/w) · exp(−(x−c)²/w²)`.
pub(crate) fn hg_profile(order: u32, waist: f64, center: f64, coords: &[f64]) -> Vec<f64> {
    coords
        .iter()
        .map(|&x| {
            let u = (x - center) / waist;
            hermite_unchecked(order, std::f64::consts::SQRT_2 * u) * (-u * u).exp()
        })
        .collect()
}
