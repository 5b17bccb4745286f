//! Energy spectra, thermal contexts and block-diagonal states.
//!
//! A block-diagonal state is stored as its eigenvalue vector, aligned index by
//! index with an [`EnergySpectrum`]. All values are immutable after
//! construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances shared by the validating constructors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Allowed deviation of `sum(p)` from 1.
    pub norm: f64,
    /// Relative slack for ordering comparisons.
    pub order: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            norm: 1e-9,
            order: 1e-12,
        }
    }
}

/// Energy levels `E_1..E_d`, arbitrary zero, no ordering requirement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySpectrum {
    energies: Vec<f64>,
}

impl EnergySpectrum {
    pub fn new(energies: Vec<f64>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        if let Some((index, &value)) = energies.iter().enumerate().find(|(_, e)| !e.is_finite()) {
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self { energies })
    }

    /// Fully degenerate spectrum with `d` levels at energy zero.
    pub fn trivial(d: usize) -> Result<Self> {
        Self::new(vec![0.0; d])
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.energies.iter().all(|&e| e == self.energies[0])
    }
}

/// A spectrum at inverse temperature `beta` together with its Gibbs weights.
///
/// Boltzmann factors are computed relative to the lowest level so that large
/// `beta * E` does not overflow; `ln_partition_function` is exact in the
/// original energy zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermalContext {
    spectrum: EnergySpectrum,
    beta: f64,
    ln_partition_function: f64,
    thermal_weights: Vec<f64>,
}

impl ThermalContext {
    pub fn new(spectrum: EnergySpectrum, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::InvalidBeta(beta));
        }
        let e_min = spectrum
            .energies()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        let shifted: Vec<f64> = spectrum
            .energies()
            .iter()
            .map(|&e| (-beta * (e - e_min)).exp())
            .collect();
        let z_shifted: f64 = shifted.iter().sum();
        let thermal_weights: Vec<f64> = shifted.iter().map(|&b| b / z_shifted).collect();
        if let Some((index, &value)) = thermal_weights
            .iter()
            .enumerate()
            .find(|(_, &t)| !(t > 0.0 && t.is_finite()))
        {
            // Gibbs weight underflowed: the thermal state would not have full rank.
            return Err(Error::NonFinite { index, value });
        }
        Ok(Self {
            ln_partition_function: z_shifted.ln() - beta * e_min,
            spectrum,
            beta,
            thermal_weights,
        })
    }

    pub fn spectrum(&self) -> &EnergySpectrum {
        &self.spectrum
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.spectrum.len()
    }

    /// `Z = sum_i exp(-beta E_i)`. May overflow for extreme spectra; prefer
    /// [`ThermalContext::ln_partition_function`].
    pub fn partition_function(&self) -> f64 {
        self.ln_partition_function.exp()
    }

    pub fn ln_partition_function(&self) -> f64 {
        self.ln_partition_function
    }

    /// `tau_i = exp(-beta E_i) / Z`.
    pub fn thermal_weights(&self) -> &[f64] {
        &self.thermal_weights
    }

    pub fn thermal_state(&self) -> BlockDiagonalState {
        BlockDiagonalState {
            probabilities: self.thermal_weights.clone(),
        }
    }

    /// Two contexts describe the same thermal state (spectrum and temperature).
    pub fn same_as(&self, other: &ThermalContext) -> bool {
        self.beta == other.beta && self.spectrum == other.spectrum
    }

    pub(crate) fn check_state(&self, state: &BlockDiagonalState) -> Result<()> {
        if state.len() != self.dim() {
            return Err(Error::LengthMismatch {
                expected: self.dim(),
                actual: state.len(),
            });
        }
        Ok(())
    }
}

/// Eigenvalues `p_i` of a state diagonal in the energy eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagonalState {
    probabilities: Vec<f64>,
}

/// Validates `probabilities` against `spectrum` with default tolerances.
pub fn make_state(probabilities: Vec<f64>, spectrum: &EnergySpectrum) -> Result<BlockDiagonalState> {
    BlockDiagonalState::new(probabilities, spectrum, Tolerances::default())
}

impl BlockDiagonalState {
    pub fn new(
        probabilities: Vec<f64>,
        spectrum: &EnergySpectrum,
        tol: Tolerances,
    ) -> Result<Self> {
        if probabilities.len() != spectrum.len() {
            return Err(Error::LengthMismatch {
                expected: spectrum.len(),
                actual: probabilities.len(),
            });
        }
        Self::from_probabilities(probabilities, tol)
    }

    /// Validates a probability vector without reference to a spectrum.
    pub fn from_probabilities(probabilities: Vec<f64>, tol: Tolerances) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::EmptySpectrum);
        }
        for (index, &value) in probabilities.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite { index, value });
            }
            if value < 0.0 {
                return Err(Error::NegativeProbability { index, value });
            }
        }
        let deviation = probabilities.iter().sum::<f64>() - 1.0;
        if deviation.abs() > tol.norm {
            return Err(Error::NotNormalized { deviation });
        }
        Ok(Self { probabilities })
    }

    /// Internal constructor for vectors produced by the smoothing routines,
    /// which are normalized by construction up to rounding.
    pub(crate) fn from_raw(probabilities: Vec<f64>) -> Self {
        debug_assert!(probabilities.iter().all(|&p| p >= 0.0));
        Self { probabilities }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn into_probabilities(self) -> Vec<f64> {
        self.probabilities
    }
}

/// A state together with the permutation that puts it in beta-order,
/// i.e. `p_i exp(beta E_i)` (equivalently `p_i / tau_i`) non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BetaOrderedState {
    state: BlockDiagonalState,
    /// `permutation[k]` is the original index placed at ordered position `k`.
    permutation: Vec<usize>,
    ordered_probabilities: Vec<f64>,
    ordered_energies: Vec<f64>,
    ordered_thermal_weights: Vec<f64>,
}

/// Sorts by non-increasing `p_i / tau_i`; ties keep their original order.
pub fn beta_order(state: &BlockDiagonalState, context: &ThermalContext) -> Result<BetaOrderedState> {
    context.check_state(state)?;
    let p = state.probabilities();
    let tau = context.thermal_weights();
    let mut permutation: Vec<usize> = (0..p.len()).collect();
    permutation.sort_by(|&a, &b| (p[b] / tau[b]).total_cmp(&(p[a] / tau[a])));
    Ok(BetaOrderedState::with_permutation(state, context, permutation))
}

impl BetaOrderedState {
    fn with_permutation(
        state: &BlockDiagonalState,
        context: &ThermalContext,
        permutation: Vec<usize>,
    ) -> Self {
        let p = state.probabilities();
        let e = context.spectrum().energies();
        let tau = context.thermal_weights();
        Self {
            ordered_probabilities: permutation.iter().map(|&i| p[i]).collect(),
            ordered_energies: permutation.iter().map(|&i| e[i]).collect(),
            ordered_thermal_weights: permutation.iter().map(|&i| tau[i]).collect(),
            state: state.clone(),
            permutation,
        }
    }

    pub fn state(&self) -> &BlockDiagonalState {
        &self.state
    }

    pub fn permutation(&self) -> &[usize] {
        &self.permutation
    }

    pub fn ordered_probabilities(&self) -> &[f64] {
        &self.ordered_probabilities
    }

    pub fn ordered_energies(&self) -> &[f64] {
        &self.ordered_energies
    }

    pub fn ordered_thermal_weights(&self) -> &[f64] {
        &self.ordered_thermal_weights
    }

    pub fn len(&self) -> usize {
        self.permutation.len()
    }

    pub fn is_empty(&self) -> bool {
        self.permutation.is_empty()
    }

    /// `p̂_k / τ̂_k`, proportional to `p̂_k exp(beta Ê_k)`.
    pub fn slopes(&self) -> Vec<f64> {
        self.ordered_probabilities
            .iter()
            .zip(&self.ordered_thermal_weights)
            .map(|(p, t)| p / t)
            .collect()
    }

    /// Checks the ordering invariant with relative slack `tol`.
    pub fn is_beta_ordered(&self, tol: f64) -> bool {
        self.slopes()
            .windows(2)
            .all(|w| w[1] <= w[0] + tol * w[0].abs().max(1.0))
    }

    /// Maps a vector given in beta-ordered positions back to original indices.
    pub fn unpermute(&self, ordered: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; ordered.len()];
        for (k, &i) in self.permutation.iter().enumerate() {
            out[i] = ordered[k];
        }
        out
    }
}

/// `½ Σ |p_i − q_i|`.
pub fn trace_distance(a: &BlockDiagonalState, b: &BlockDiagonalState) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(half_l1(a.probabilities(), b.probabilities()))
}

pub(crate) fn half_l1(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_level() -> ThermalContext {
        // beta factors exp(beta E) = {1, 2, 8} at beta = 1
        let spectrum = EnergySpectrum::new(vec![0.0, 2f64.ln(), 8f64.ln()]).unwrap();
        ThermalContext::new(spectrum, 1.0).unwrap()
    }

    #[test]
    fn six_level_state_is_valid() {
        let spectrum = EnergySpectrum::trivial(6).unwrap();
        let s = make_state(vec![0.3, 0.25, 0.22, 0.1, 0.07, 0.06], &spectrum).unwrap();
        assert_eq!(s.len(), 6);
    }

    #[test]
    fn single_level_pure_state() {
        let spectrum = EnergySpectrum::trivial(1).unwrap();
        assert!(make_state(vec![1.0], &spectrum).is_ok());
    }

    #[test]
    fn rejects_bad_inputs() {
        let spectrum = EnergySpectrum::trivial(2).unwrap();
        assert!(matches!(
            make_state(vec![0.5, 0.6], &spectrum),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            make_state(vec![1.1, -0.1], &spectrum),
            Err(Error::NegativeProbability { index: 1, .. })
        ));
        assert!(matches!(
            make_state(vec![1.0], &spectrum),
            Err(Error::LengthMismatch { expected: 2, actual: 1 })
        ));
        assert!(EnergySpectrum::new(vec![]).is_err());
        assert!(ThermalContext::new(spectrum, 0.0).is_err());
    }

    #[test]
    fn partition_function_of_three_level() {
        let ctx = three_level();
        assert!((ctx.partition_function() - 13.0 / 8.0).abs() < 1e-12);
        let tau = ctx.thermal_weights();
        assert!((tau[0] - 8.0 / 13.0).abs() < 1e-12);
        assert!((tau[2] - 1.0 / 13.0).abs() < 1e-12);
    }

    #[test]
    fn large_energies_do_not_overflow() {
        let spectrum = EnergySpectrum::new(vec![1000.0, 1001.0]).unwrap();
        let ctx = ThermalContext::new(spectrum, 1.0).unwrap();
        assert!((ctx.ln_partition_function() - (-1000.0 + (1.0 + (-1f64).exp()).ln())).abs() < 1e-9);
        assert!((ctx.thermal_weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn beta_order_of_three_level_state() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let o = beta_order(&s, &ctx).unwrap();
        assert_eq!(o.permutation(), &[2, 1, 0]);
        assert_eq!(o.ordered_probabilities(), &[0.1, 0.35, 0.55]);
        let factors: Vec<f64> = o.ordered_energies().iter().map(|e| e.exp()).collect();
        assert!((factors[0] - 8.0).abs() < 1e-12 && (factors[2] - 1.0).abs() < 1e-12);
        assert!(o.is_beta_ordered(1e-12));
    }

    #[test]
    fn thermal_state_orders_to_identity() {
        let ctx = three_level();
        let o = beta_order(&ctx.thermal_state(), &ctx).unwrap();
        assert_eq!(o.permutation(), &[0, 1, 2]);
    }

    #[test]
    fn ordering_is_idempotent() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let o = beta_order(&s, &ctx).unwrap();
        // Re-express the ordered state on the permuted spectrum and order again.
        let spectrum = EnergySpectrum::new(o.ordered_energies().to_vec()).unwrap();
        let ctx2 = ThermalContext::new(spectrum, 1.0).unwrap();
        let s2 = make_state(o.ordered_probabilities().to_vec(), ctx2.spectrum()).unwrap();
        assert_eq!(beta_order(&s2, &ctx2).unwrap().permutation(), &[0, 1, 2]);
        assert_eq!(o.unpermute(o.ordered_probabilities()), s.probabilities());
    }

    #[test]
    fn trace_distance_examples() {
        let spectrum = EnergySpectrum::trivial(2).unwrap();
        let a = make_state(vec![1.0, 0.0], &spectrum).unwrap();
        let b = make_state(vec![0.0, 1.0], &spectrum).unwrap();
        assert_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(trace_distance(&a, &b).unwrap(), 1.0);
        let six = EnergySpectrum::trivial(6).unwrap();
        let rho = make_state(vec![0.3, 0.25, 0.22, 0.1, 0.07, 0.06], &six).unwrap();
        let flat = make_state(vec![0.225, 0.225, 0.22, 0.11, 0.11, 0.11], &six).unwrap();
        assert!((trace_distance(&rho, &flat).unwrap() - 0.1).abs() < 1e-12);
        let c = make_state(vec![0.25; 4], &EnergySpectrum::trivial(4).unwrap()).unwrap();
        assert!(trace_distance(&a, &c).is_err());
    }
}
