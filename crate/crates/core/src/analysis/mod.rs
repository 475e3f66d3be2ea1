//! Checks of the standing assumptions and diagnostics on simulated paths.

mod cutoff;
mod gaps;
mod stationarity;
mod tails;

pub use cutoff::{
    cutoff_chi, cutoff_lipschitz_bound, h_p, localization_membership, phi_q, Growth, LocalizationSpec,
};
pub use gaps::{exit_tail_bound, c_d, gaussian_tail, min_gap, ExitTailRow, MinGap};
pub use stationarity::{stationarity_test, HistogramDistance, StationarityOptions, StationarityReport};
pub use tails::{tail_condition_integral, Intensity, TailConditionReport, TailKind, TailParams, Verdict};
