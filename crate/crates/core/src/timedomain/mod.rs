//! Time-domain simulation of the mechanical envelope, PSD estimation and
//! phase tracking. Traces are demodulated envelopes, not the RF carrier.

mod phase;
mod ringdown;
mod trajectory;
mod welch;

pub use phase::instantaneous_frequency;
pub use ringdown::{apply_frequency_drift, decay_phase, simulate_ringdown, RingdownProtocol};
pub use trajectory::{simulate_thermal_trajectory, TrajectoryRates};
pub use welch::{welch_psd, Window};
