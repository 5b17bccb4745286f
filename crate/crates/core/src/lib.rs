//! Thermodynamic state transitions for block-diagonal (energy-incoherent)
//! states: thermo-majorization curves, Rényi divergences, explicit ε-ball
//! smoothing constructions, transition checks and finite-copy asymptotics.
//!
//! All logarithms are natural; divergences are in nats and free energies in
//! energy units (`β⁻¹` times nats).

pub mod asymptotics;
pub mod batch;
pub mod curves;
pub mod divergences;
pub mod error;
pub mod io;
pub mod sampling;
pub mod smoothing;
pub mod state;
pub mod transitions;

pub use asymptotics::{
    aep_bounds, corollary1_delta, find_n_star, smoothed_divergence_tensor, tensor_power, typical_mass, AepBounds,
    EpsilonSchedule, FiniteNReport, TensorPowerSpectrum,
};
pub use curves::{build_curve, curve_dominates, curve_of, epsilon_band_check, ThermoMajorizationCurve};
pub use divergences::{
    free_energy, renyi_divergence, smoothed_divergence_conventional, smoothed_divergence_new, Alpha, AlphaGrid,
};
pub use error::{Error, Result};
pub use io::{SmoothingReport, StateDocument};
pub use smoothing::{
    flattest_state, steep_state, steepest_state_small_eps, trivial_flattest, trivial_steepest, SmoothingResult,
};
pub use state::{beta_order, make_state, trace_distance, BetaOrderedState, BlockDiagonalState, EnergySpectrum, ThermalContext};
pub use transitions::{
    approximate_output_bound, check_exact_second_laws, check_theorem1, check_to_exact, TransitionReport, Verdict,
};
