//! First-photon statistics under sequential mask display.
//!
//! Masks are shown one after another in `mask_order`, each for
//! `pulses_per_mask` pulses, cycling until the first click. Mask `k` clicks on
//! a pulse with probability `p_k = rate·q_k/q_ref + dark`, where `q_ref` is the
//! all-on, flat-phase calibration signal.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::analytic::ModeBank;
use super::modeset::ModeSet;
use crate::confusion::{ConfusionMatrix, LabelDistribution};
use crate::dataset::{BinaryPattern, Dataset, NUM_LABELS};
use crate::error::{Error, Result};
use crate::optics::FieldGrid;
use crate::rng::{event_rng, open_unit};

/// Highest allowed calibrated detection rate per pulse.
pub const MAX_RATE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhotonScheduleConfig {
    pub mean_detected_per_pulse: f64,
    pub pulses_per_mask: u64,
    pub mask_order: [usize; NUM_LABELS],
    pub max_cycles: u64,
    #[serde(default)]
    pub dark_counts_per_pulse: f64,
}

impl Default for PhotonScheduleConfig {
    fn default() -> Self {
        Self {
            mean_detected_per_pulse: 0.01,
            pulses_per_mask: 1,
            mask_order: std::array::from_fn(|k| k),
            max_cycles: 1_000_000,
            dark_counts_per_pulse: 0.0,
        }
    }
}

impl PhotonScheduleConfig {
    pub fn with_rate(rate: f64) -> Self {
        Self {
            mean_detected_per_pulse: rate,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSchedule(m));
        let rate = self.mean_detected_per_pulse;
        if !(rate > 0.0 && rate <= MAX_RATE) {
            return bad(format!("mean_detected_per_pulse {rate} outside (0, {MAX_RATE}]"));
        }
        if self.pulses_per_mask == 0 {
            return bad("pulses_per_mask must be positive".into());
        }
        if self.max_cycles == 0 {
            return bad("max_cycles must be positive".into());
        }
        if !(self.dark_counts_per_pulse >= 0.0 && self.dark_counts_per_pulse < 1.0) {
            return bad(format!("dark count rate {} outside [0, 1)", self.dark_counts_per_pulse));
        }
        let mut seen = [false; NUM_LABELS];
        for &k in &self.mask_order {
            if k >= NUM_LABELS || seen[k] {
                return bad(format!("mask_order {:?} is not a permutation", self.mask_order));
            }
            seen[k] = true;
        }
        Ok(())
    }

    /// Per-pulse click probability of every mask.
    pub fn pulse_probabilities(&self, q: &[f64], reference: f64) -> Result<[f64; NUM_LABELS]> {
        self.validate()?;
        if !(reference > 0.0) {
            return Err(Error::InvalidSchedule("calibration signal is zero".into()));
        }
        let mut p = [0.0; NUM_LABELS];
        for (k, pk) in p.iter_mut().enumerate() {
            *pk = self.mean_detected_per_pulse * q[k] / reference + self.dark_counts_per_pulse;
            if *pk > 1.0 {
                return Err(Error::InvalidSchedule(format!(
                    "mask {k} click probability {pk} exceeds one"
                )));
            }
        }
        Ok(p)
    }

    /// Per-display detection probabilities `d_k = 1 − (1 − p_k)^pulses`.
    pub fn display_probabilities(&self, pulse: &[f64; NUM_LABELS]) -> [f64; NUM_LABELS] {
        let pulses = self.pulses_per_mask as f64;
        pulse.map(|p| {
            if p >= 1.0 {
                1.0
            } else {
                -(pulses * (-p).ln_1p()).exp_m1()
            }
        })
    }
}

/// Exact first-detection label distribution for cyclic display.
pub fn first_photon_distribution(
    detect_probs: &[f64; NUM_LABELS],
    schedule: &PhotonScheduleConfig,
) -> Result<LabelDistribution> {
    schedule.validate()?;
    if detect_probs.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::InvalidSchedule(format!(
            "detection probabilities {detect_probs:?} outside [0, 1]"
        )));
    }
    if detect_probs.iter().all(|&d| d == 0.0) {
        return Err(Error::NoDetection);
    }
    // P(k) ∝ d_k · Π_{j before k} (1 − d_j); the normalizer is 1 − Π_all (1 − d_j)
    let mut weights = [0.0; NUM_LABELS];
    let mut survive = 1.0;
    for &k in &schedule.mask_order {
        weights[k] = detect_probs[k] * survive;
        survive *= 1.0 - detect_probs[k];
    }
    LabelDistribution::from_weights(weights).ok_or(Error::NoDetection)
}

/// Result of one simulated event.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Detected { label: usize, cycle: u64 },
    NoDetection,
}

/// One event from per-pulse click probabilities.
///
/// Each mask's pulses form an independent Bernoulli sequence, so the index of
/// its first clicking pulse is geometric. Sampling those ten clocks and taking
/// the earliest display reproduces the pulse-by-pulse process exactly without
/// iterating over empty displays.
pub fn simulate_event(
    pulse: &[f64; NUM_LABELS],
    schedule: &PhotonScheduleConfig,
    rng: &mut impl Rng,
) -> Outcome {
    let pulses = schedule.pulses_per_mask as f64;
    let mut best: Option<(f64, usize, usize)> = None;
    for k in 0..NUM_LABELS {
        // one draw per mask, always, so the stream layout is fixed
        let u = open_unit(rng);
        let p = pulse[k];
        if p <= 0.0 {
            continue;
        }
        let failures = if p >= 1.0 { 0.0 } else { (u.ln() / (-p).ln_1p()).floor() };
        let cycle = (failures / pulses).floor();
        let position = schedule.mask_order.iter().position(|&m| m == k).unwrap_or(k);
        let earlier = match best {
            None => true,
            Some((c, pos, _)) => cycle < c || (cycle == c && position < pos),
        };
        if earlier {
            best = Some((cycle, position, k));
        }
    }
    match best {
        Some((cycle, _, label)) if cycle < schedule.max_cycles as f64 => Outcome::Detected {
            label,
            cycle: cycle as u64,
        },
        _ => Outcome::NoDetection,
    }
}

/// Literal reference simulator: walks displays and pulses one by one.
/// Only practical when clicks are frequent; used to cross-check
/// [`simulate_event`].
pub fn simulate_event_stepwise(
    pulse: &[f64; NUM_LABELS],
    schedule: &PhotonScheduleConfig,
    rng: &mut impl Rng,
) -> Outcome {
    for cycle in 0..schedule.max_cycles {
        for &k in &schedule.mask_order {
            for _ in 0..schedule.pulses_per_mask {
                if rng.gen::<f64>() < pulse[k] {
                    return Outcome::Detected { label: k, cycle };
                }
            }
        }
    }
    Outcome::NoDetection
}

/// Monte Carlo first-photon label for one pattern. `event` selects the
/// random substream together with `seed` and the pattern's source index.
pub fn simulate_first_photon(
    pattern: &BinaryPattern,
    modeset: &ModeSet,
    beam: &FieldGrid,
    schedule: &PhotonScheduleConfig,
    seed: u64,
    event: u64,
) -> Result<usize> {
    let bank = ModeBank::new(modeset, beam)?;
    let q = bank.pure_probabilities(&pattern.mask)?;
    let pulse = schedule.pulse_probabilities(&q, bank.reference())?;
    let mut rng = event_rng(seed, pattern.source_index, event);
    match simulate_event(&pulse, schedule, &mut rng) {
        Outcome::Detected { label, .. } => Ok(label),
        Outcome::NoDetection => Err(Error::NoDetection),
    }
}

/// Per-pattern event tallies: `(label counts, no-detection count)`.
pub fn tally_pattern(
    pulse: &[f64; NUM_LABELS],
    schedule: &PhotonScheduleConfig,
    seed: u64,
    source_index: usize,
    events: u64,
) -> ([u64; NUM_LABELS], u64) {
    let mut counts = [0u64; NUM_LABELS];
    let mut missed = 0;
    for e in 0..events {
        let mut rng = event_rng(seed, source_index, e);
        match simulate_event(pulse, schedule, &mut rng) {
            Outcome::Detected { label, .. } => counts[label] += 1,
            Outcome::NoDetection => missed += 1,
        }
    }
    (counts, missed)
}

/// Aggregates simulated first-photon events into a confusion matrix.
pub fn mc_confusion(
    dataset: &Dataset,
    modeset: &ModeSet,
    beam: &FieldGrid,
    schedule: &PhotonScheduleConfig,
    events_per_pattern: u64,
    seed: u64,
) -> Result<ConfusionMatrix> {
    let bank = ModeBank::new(modeset, beam)?;
    mc_confusion_from_bank(dataset, &bank, schedule, events_per_pattern, seed)
}

pub fn mc_confusion_from_bank(
    dataset: &Dataset,
    bank: &ModeBank,
    schedule: &PhotonScheduleConfig,
    events_per_pattern: u64,
    seed: u64,
) -> Result<ConfusionMatrix> {
    schedule.validate()?;
    if events_per_pattern == 0 {
        return Err(Error::Config("events_per_pattern must be at least 1".into()));
    }
    let per_pattern = dataset
        .patterns()
        .par_iter()
        .map(|p| {
            // a dark pattern still runs: only dark counts can click
            let q = match bank.pure_probabilities(&p.mask) {
                Ok(q) => q,
                Err(Error::DarkPattern) => vec![0.0; bank.len()],
                Err(e) => return Err(e),
            };
            let pulse = schedule.pulse_probabilities(&q, bank.reference())?;
            let (counts, missed) = tally_pattern(&pulse, schedule, seed, p.source_index, events_per_pattern);
            Ok((p.label as usize, counts, missed))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut counts = [[0u64; NUM_LABELS]; NUM_LABELS];
    let mut missed = [0u64; NUM_LABELS];
    for (label, c, m) in per_pattern {
        for k in 0..NUM_LABELS {
            counts[label][k] += c[k];
        }
        missed[label] += m;
    }
    ConfusionMatrix::from_counts(counts, missed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(rate: f64, pulses: u64) -> PhotonScheduleConfig {
        PhotonScheduleConfig {
            pulses_per_mask: pulses,
            ..PhotonScheduleConfig::with_rate(rate)
        }
    }

    #[test]
    fn single_detectable_mask() {
        let mut d = [0.0; NUM_LABELS];
        d[0] = 0.3;
        let p = first_photon_distribution(&d, &sched(0.01, 1)).unwrap();
        assert_eq!(p, LabelDistribution::one_hot(0));
        assert!(matches!(
            first_photon_distribution(&[0.0; NUM_LABELS], &sched(0.01, 1)),
            Err(Error::NoDetection)
        ));
    }

    #[test]
    fn equal_rates_decay_in_display_order() {
        let d = 0.2;
        let p = first_photon_distribution(&[d; NUM_LABELS], &sched(0.01, 1)).unwrap();
        let norm = 1.0 - (1.0f64 - d).powi(10);
        for k in 0..NUM_LABELS {
            let expected = d * (1.0f64 - d).powi(k as i32) / norm;
            assert!((p.0[k] - expected).abs() < 1e-14);
        }
        assert!(p.0.windows(2).all(|w| w[0] > w[1]));

        // a permuted display order permutes the bias
        let mut s = sched(0.01, 1);
        s.mask_order = [9, 8, 7, 6, 5, 4, 3, 2, 1, 0];
        let p = first_photon_distribution(&[d; NUM_LABELS], &s).unwrap();
        assert!(p.0.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn low_rate_limit_is_linear() {
        let q = [0.3, 0.1, 0.05, 0.2, 0.02, 0.08, 0.1, 0.05, 0.06, 0.04];
        let total: f64 = q.iter().sum();
        let limit = LabelDistribution(q.map(|v| v / total));
        let dist = |eps: f64| {
            let d = q.map(|v| eps * v);
            first_photon_distribution(&d, &sched(0.01, 1))
                .unwrap()
                .total_variation(&limit)
        };
        let (a, b) = (dist(1e-3), dist(1e-4));
        assert!(a < 1e-3 && b < 1e-4);
        // halving per decade would be sub-linear; expect ~10x shrink
        assert!((a / b - 10.0).abs() < 0.5, "{a} {b}");
    }

    #[test]
    fn schedule_validation() {
        assert!(sched(0.0, 1).validate().is_err());
        assert!(sched(0.2, 1).validate().is_err());
        assert!(sched(0.1, 1).validate().is_ok());
        assert!(sched(0.05, 0).validate().is_err());
        let mut s = sched(0.05, 1);
        s.mask_order[3] = 0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn one_hot_always_wins() {
        let mut pulse = [0.0; NUM_LABELS];
        pulse[6] = 0.05;
        let s = sched(0.05, 1);
        for seed in 0..50 {
            let mut rng = event_rng(seed, 0, 0);
            assert!(matches!(
                simulate_event(&pulse, &s, &mut rng),
                Outcome::Detected { label: 6, .. }
            ));
        }
    }

    #[test]
    fn max_cycles_gives_no_detection() {
        let mut pulse = [0.0; NUM_LABELS];
        pulse[2] = 1e-9;
        let s = PhotonScheduleConfig {
            max_cycles: 3,
            ..sched(0.01, 1)
        };
        let mut rng = event_rng(0, 0, 0);
        assert_eq!(simulate_event(&pulse, &s, &mut rng), Outcome::NoDetection);
        assert_eq!(
            simulate_event(&[0.0; NUM_LABELS], &s, &mut rng),
            Outcome::NoDetection
        );
    }

    #[test]
    fn clock_sampler_matches_stepwise_walk() {
        // moderate rates so the literal walk stays cheap
        let pulse = [0.02, 0.05, 0.01, 0.03, 0.0, 0.04, 0.02, 0.06, 0.01, 0.03];
        let s = sched(0.1, 3);
        let n = 40_000u64;
        let mut a = [0u64; NUM_LABELS];
        let mut b = [0u64; NUM_LABELS];
        for e in 0..n {
            if let Outcome::Detected { label, .. } = simulate_event(&pulse, &s, &mut event_rng(1, 0, e)) {
                a[label] += 1;
            }
            if let Outcome::Detected { label, .. } =
                simulate_event_stepwise(&pulse, &s, &mut event_rng(2, 0, e))
            {
                b[label] += 1;
            }
        }
        let exact = first_photon_distribution(&s.display_probabilities(&pulse), &s).unwrap();
        for k in 0..NUM_LABELS {
            let p = exact.0[k];
            let sd = (p * (1.0 - p) / n as f64).sqrt().max(1e-12);
            for counts in [&a, &b] {
                let f = counts[k] as f64 / n as f64;
                assert!((f - p).abs() <= 5.0 * sd + 1e-12, "label {k}: {f} vs {p}");
            }
        }
    }
}
