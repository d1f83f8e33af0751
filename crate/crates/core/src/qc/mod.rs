//! Hermite-Gaussian mode classifier: analytic label statistics, first-photon
//! Monte Carlo and mode-set search.

mod analytic;
mod modeset;
mod photon;
mod search;

pub use analytic::{confusion_from_bank, qc_confusion, qc_label_distribution, ModeBank, ALL_DARK_THRESHOLD};
pub(crate) use analytic::average_rows;
pub use modeset::{ModeSet, REFERENCE_SET, REFERENCE_SET_ALT_A, REFERENCE_SET_ALT_B};
pub use photon::{
    first_photon_distribution, mc_confusion, mc_confusion_from_bank, simulate_event, simulate_event_stepwise,
    simulate_first_photon, tally_pattern, Outcome, PhotonScheduleConfig, MAX_RATE,
};
pub use search::{default_family, greedy_mode_search, SearchOptions, SearchResult, DEFAULT_MAX_ORDER};
