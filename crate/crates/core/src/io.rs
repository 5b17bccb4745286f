//! JSON documents: one state per file and smoothing reports.
//!
//! Floats are written in shortest round-trip form, so load → save is
//! bitwise stable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::smoothing::{SmoothingIndices, SmoothingKind, SmoothingResult};
use crate::state::{make_state, BlockDiagonalState, EnergySpectrum, ThermalContext};

/// `{"beta": …, "energies": […], "probabilities": […]}`. Probabilities may
/// be omitted for a spectrum-only file (the thermal state is then implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateDocument {
    pub beta: f64,
    pub energies: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probabilities: Option<Vec<f64>>,
}

impl StateDocument {
    pub fn from_parts(context: &ThermalContext, state: &BlockDiagonalState) -> Self {
        Self {
            beta: context.beta(),
            energies: context.spectrum().energies().to_vec(),
            probabilities: Some(state.probabilities().to_vec()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn context(&self) -> Result<ThermalContext> {
        ThermalContext::new(EnergySpectrum::new(self.energies.clone())?, self.beta)
    }

    pub fn state(&self) -> Result<BlockDiagonalState> {
        let p = self.probabilities.clone().ok_or(Error::MissingProbabilities)?;
        make_state(p, &EnergySpectrum::new(self.energies.clone())?)
    }

    /// The stored state, or the thermal state when `thermal` is set.
    pub fn load(&self, thermal: bool) -> Result<(ThermalContext, BlockDiagonalState)> {
        let context = self.context()?;
        let state = if thermal { context.thermal_state() } else { self.state()? };
        Ok((context, state))
    }
}

/// Input echo plus the smoothed probabilities and construction indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub input: StateDocument,
    pub kind: SmoothingKind,
    pub epsilon: f64,
    pub probabilities: Vec<f64>,
    pub indices: SmoothingIndices,
    pub permutation: Vec<usize>,
    pub trace_distance: f64,
}

impl SmoothingReport {
    pub fn new(context: &ThermalContext, input: &BlockDiagonalState, result: &SmoothingResult) -> Self {
        Self {
            input: StateDocument::from_parts(context, input),
            kind: result.kind,
            epsilon: result.epsilon_used,
            probabilities: result.result_state.probabilities().to_vec(),
            indices: result.indices,
            permutation: result.permutation.clone(),
            trace_distance: result.trace_distance,
        }
    }
}
