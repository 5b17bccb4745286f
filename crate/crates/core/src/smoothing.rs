//! Explicit constructions inside the ε-ball of a block-diagonal state.
//!
//! * [`flattest_state`]: thermo-majorized by every state of the ball. Cuts ε
//!   from the first `M` beta-ordered levels and adds ε to levels `N..d`, each
//!   block equalized in `p_i exp(beta E_i)`.
//! * [`steep_state`]: adds ε to the leading level and removes ε from the tail
//!   (index `R`); it thermo-majorizes the original state.
//! * [`steepest_state_small_eps`]: thermo-majorizes the whole ball, valid only
//!   below the bounds reported by [`steepest_bounds`].
//! * [`trivial_flattest`] / [`trivial_steepest`]: the fully degenerate
//!   Hamiltonian special cases, written independently of the general ones.
//!
//! Index records are 1-based positions in the beta-ordered frame; result
//! states are always returned in the caller's original index order.

use serde::{Deserialize, Serialize};

use crate::divergences::{renyi_divergence, Alpha};
use crate::error::{Error, Result};
use crate::state::{
    beta_order, half_l1, make_state, BetaOrderedState, BlockDiagonalState, EnergySpectrum, ThermalContext,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingKind {
    Flattest,
    Steep,
    Steepest,
    TrivialFlattest,
    TrivialSteepest,
}

/// Construction indices (1-based, beta-ordered frame).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SmoothingIndices {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n1: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n2: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// The whole requested ε could not be used (result is the thermal /
    /// maximally mixed state, or a pure state for the steep construction).
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingResult {
    pub kind: SmoothingKind,
    pub result_state: BlockDiagonalState,
    pub epsilon_used: f64,
    /// Achieved trace distance to the input.
    pub trace_distance: f64,
    pub indices: SmoothingIndices,
    /// Beta-ordering of the input (`permutation[k]` = original index).
    pub permutation: Vec<usize>,
}

fn check_epsilon(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(())
}

fn finish(
    kind: SmoothingKind,
    input: &BlockDiagonalState,
    probabilities: Vec<f64>,
    eps: f64,
    indices: SmoothingIndices,
    permutation: Vec<usize>,
) -> SmoothingResult {
    let probabilities: Vec<f64> = probabilities.into_iter().map(|p| p.max(0.0)).collect();
    SmoothingResult {
        kind,
        trace_distance: half_l1(input.probabilities(), &probabilities),
        result_state: BlockDiagonalState::from_raw(probabilities),
        epsilon_used: eps,
        indices,
        permutation,
    }
}

/// `F(m) = Σ_{i≤m} p̂_i − p̂_{m+1} e^{βÊ_{m+1}} Σ_{i≤m} e^{−βÊ_i}` for `1 ≤ m ≤ d−1`.
pub fn f_index_function(ordered: &BetaOrderedState, m: usize) -> Result<f64> {
    let d = ordered.len();
    if m < 1 || m + 1 > d {
        return Err(Error::IndexOutOfRange {
            index: m,
            min: 1,
            max: d.saturating_sub(1),
        });
    }
    let p = ordered.ordered_probabilities();
    let t = ordered.ordered_thermal_weights();
    let head_p: f64 = p[..m].iter().sum();
    let head_t: f64 = t[..m].iter().sum();
    Ok(head_p - p[m] / t[m] * head_t)
}

/// `G(m) = p̂_{m−1} e^{βÊ_{m−1}} Σ_{i≥m} e^{−βÊ_i} − Σ_{i≥m} p̂_i` for `2 ≤ m ≤ d`.
pub fn g_index_function(ordered: &BetaOrderedState, m: usize) -> Result<f64> {
    let d = ordered.len();
    if m < 2 || m > d {
        return Err(Error::IndexOutOfRange {
            index: m,
            min: 2,
            max: d,
        });
    }
    let p = ordered.ordered_probabilities();
    let t = ordered.ordered_thermal_weights();
    let tail_p: f64 = p[m - 1..].iter().sum();
    let tail_t: f64 = t[m - 1..].iter().sum();
    Ok(p[m - 2] / t[m - 2] * tail_t - tail_p)
}

/// The flattest state of the ε-ball.
///
/// Returns the thermal state once `eps ≥ δ(ρ, τ)`. Otherwise `M` is the
/// smallest index with `eps ≤ F(M)` and `N` the largest with `eps ≤ G(N)`;
/// `M < N` always holds there and a violation is reported as
/// [`Error::IndexInversion`].
pub fn flattest_state(state: &BlockDiagonalState, context: &ThermalContext, eps: f64) -> Result<SmoothingResult> {
    check_epsilon(eps)?;
    let ordered = beta_order(state, context)?;
    let tau = context.thermal_weights();
    let delta = half_l1(state.probabilities(), tau);
    let permutation = ordered.permutation().to_vec();
    if eps >= delta {
        let indices = SmoothingIndices {
            saturated: true,
            ..Default::default()
        };
        return Ok(finish(SmoothingKind::Flattest, state, tau.to_vec(), eps, indices, permutation));
    }

    let d = ordered.len();
    let m = (1..d)
        .find(|&m| eps <= f_index_function(&ordered, m).expect("m in range"))
        .unwrap_or(d - 1);
    let n = (2..=d)
        .rev()
        .find(|&n| eps <= g_index_function(&ordered, n).expect("n in range"))
        .unwrap_or(2);
    if m >= n {
        return Err(Error::IndexInversion { m, n });
    }

    let p = ordered.ordered_probabilities();
    let t = ordered.ordered_thermal_weights();
    let head_level = (p[..m].iter().sum::<f64>() - eps) / t[..m].iter().sum::<f64>();
    let tail_level = (p[n - 1..].iter().sum::<f64>() + eps) / t[n - 1..].iter().sum::<f64>();
    let smoothed: Vec<f64> = (0..d)
        .map(|i| {
            if i < m {
                t[i] * head_level
            } else if i >= n - 1 {
                t[i] * tail_level
            } else {
                p[i]
            }
        })
        .collect();
    let indices = SmoothingIndices {
        m: Some(m),
        n: Some(n),
        ..Default::default()
    };
    Ok(finish(
        SmoothingKind::Flattest,
        state,
        ordered.unpermute(&smoothed),
        eps,
        indices,
        permutation,
    ))
}

/// The steep state: `p̂_1 + ε`, tail cut at index `R` with
/// `Σ_{i≥R} p̂_i ≥ ε > Σ_{i>R} p̂_i`; a pure state when `ε > 1 − p̂_1`.
pub fn steep_state(state: &BlockDiagonalState, context: &ThermalContext, eps: f64) -> Result<SmoothingResult> {
    check_epsilon(eps)?;
    let ordered = beta_order(state, context)?;
    let permutation = ordered.permutation().to_vec();
    let p = ordered.ordered_probabilities();
    let d = p.len();

    if eps == 0.0 {
        return Ok(finish(
            SmoothingKind::Steep,
            state,
            state.probabilities().to_vec(),
            eps,
            SmoothingIndices::default(),
            permutation,
        ));
    }

    let mut tails = vec![0.0; d + 1];
    for i in (0..d).rev() {
        tails[i] = tails[i + 1] + p[i];
    }
    let mut smoothed = vec![0.0; d];
    let mut indices = SmoothingIndices::default();
    if eps > tails[1] {
        smoothed[0] = 1.0;
        indices.r = Some(1);
        indices.saturated = true;
    } else {
        // largest 0-based r with tails[r] >= eps; r >= 1 here
        let r = (0..d).rev().find(|&r| tails[r] >= eps).unwrap_or(0);
        smoothed[..r].copy_from_slice(&p[..r]);
        smoothed[r] = p[r] + tails[r + 1] - eps;
        smoothed[0] += eps;
        indices.r = Some(r + 1);
    }
    Ok(finish(
        SmoothingKind::Steep,
        state,
        ordered.unpermute(&smoothed),
        eps,
        indices,
        permutation,
    ))
}

/// Which of the small-ε conditions limits the steepest construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteepestBound {
    /// `min_{p_i>0} p_i`
    A,
    /// leading level against every higher-energy level
    B,
    /// last occupied level `k` against occupied higher-energy levels
    C,
    /// pure beta-ordered state (`k = 1`): `min_{i>1} τ̂_i/τ̂_1`
    PureState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteepestBounds {
    pub eps_a: f64,
    pub eps_b: f64,
    pub eps_c: f64,
    /// Only finite for pure beta-ordered states.
    pub eps_pure: f64,
    /// Largest occupied beta-ordered index (1-based).
    pub k: usize,
}

impl SteepestBounds {
    pub fn min(&self) -> (SteepestBound, f64) {
        [
            (SteepestBound::A, self.eps_a),
            (SteepestBound::B, self.eps_b),
            (SteepestBound::C, self.eps_c),
            (SteepestBound::PureState, self.eps_pure),
        ]
        .into_iter()
        .fold((SteepestBound::A, f64::INFINITY), |acc, b| if b.1 < acc.1 { b } else { acc })
    }
}

/// `ε_A`, `ε_B`, `ε_C` of the small-ε steepest construction.
///
/// For a pure beta-ordered state the `±ε` rule collapses to the identity,
/// and `ε_B` alone does not protect the leading slope; the extra bound
/// `min_{i>1} τ̂_i/τ̂_1` is reported instead.
pub fn steepest_bounds(state: &BlockDiagonalState, context: &ThermalContext) -> Result<SteepestBounds> {
    let ordered = beta_order(state, context)?;
    Ok(bounds_of(&ordered, context.beta()))
}

fn bounds_of(ordered: &BetaOrderedState, beta: f64) -> SteepestBounds {
    let p = ordered.ordered_probabilities();
    let e = ordered.ordered_energies();
    let t = ordered.ordered_thermal_weights();
    let d = p.len();
    let k = (0..d).rev().find(|&i| p[i] > 0.0).unwrap_or(0);

    let eps_a = p.iter().copied().filter(|&x| x > 0.0).fold(f64::INFINITY, f64::min);
    // (p_1 w_1 − p_i w_i) / (w_i − w_1) with w = e^{βE}, divided through by w_1
    let eps_b = (0..d)
        .filter(|&i| e[i] > e[0])
        .map(|i| {
            let r = (beta * (e[i] - e[0])).exp();
            (p[0] - p[i] * r) / (r - 1.0)
        })
        .fold(f64::INFINITY, f64::min);
    let eps_c = (0..d)
        .filter(|&i| p[i] > 0.0 && e[i] > e[k])
        .map(|i| {
            let r = (beta * (e[i] - e[k])).exp();
            (p[i] * r - p[k]) / (r - 1.0)
        })
        .fold(f64::INFINITY, f64::min);
    let eps_pure = if k == 0 {
        (1..d).map(|i| t[i] / t[0]).fold(1.0, f64::min)
    } else {
        f64::INFINITY
    };
    SteepestBounds {
        eps_a,
        eps_b,
        eps_c,
        eps_pure,
        k: k + 1,
    }
}

/// Steepest state for small ε: `p̂_1 + ε`, `p̂_k − ε`, everything else kept.
pub fn steepest_state_small_eps(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    eps: f64,
) -> Result<SmoothingResult> {
    check_epsilon(eps)?;
    let ordered = beta_order(state, context)?;
    let bounds = bounds_of(&ordered, context.beta());
    let (bound, limit) = bounds.min();
    if eps > limit {
        return Err(Error::EpsilonTooLarge {
            epsilon: eps,
            bound,
            limit,
        });
    }
    let mut smoothed = ordered.ordered_probabilities().to_vec();
    let k = bounds.k - 1;
    if k > 0 {
        smoothed[0] += eps;
        smoothed[k] -= eps;
    }
    let indices = SmoothingIndices {
        k: Some(bounds.k),
        ..Default::default()
    };
    Ok(finish(
        SmoothingKind::Steepest,
        state,
        ordered.unpermute(&smoothed),
        eps,
        indices,
        ordered.permutation().to_vec(),
    ))
}

fn descending_order(p: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..p.len()).collect();
    idx.sort_by(|&a, &b| p[b].total_cmp(&p[a]));
    idx
}

fn scatter(order: &[usize], sorted_values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; order.len()];
    for (k, &i) in order.iter().enumerate() {
        out[i] = sorted_values[k];
    }
    out
}

/// Flattest state for a fully degenerate Hamiltonian (head cut over `N₁`
/// levels, tail fill from `N₂`); maximally mixed once `ε ≥ δ(ρ, 𝟙/d)`.
pub fn trivial_flattest(state: &BlockDiagonalState, spectrum: &EnergySpectrum, eps: f64) -> Result<SmoothingResult> {
    check_epsilon(eps)?;
    if !spectrum.is_trivial() {
        return Err(Error::NonTrivialSpectrum);
    }
    if spectrum.len() != state.len() {
        return Err(Error::LengthMismatch {
            expected: spectrum.len(),
            actual: state.len(),
        });
    }
    let d = state.len();
    let order = descending_order(state.probabilities());
    let p: Vec<f64> = order.iter().map(|&i| state.probabilities()[i]).collect();
    let uniform = 1.0 / d as f64;
    let to_mixed: f64 = 0.5 * p.iter().map(|x| (x - uniform).abs()).sum::<f64>();
    if eps >= to_mixed {
        let indices = SmoothingIndices {
            saturated: true,
            ..Default::default()
        };
        return Ok(finish(
            SmoothingKind::TrivialFlattest,
            state,
            vec![uniform; d],
            eps,
            indices,
            order,
        ));
    }
    // smallest N1 with eps <= Σ_{i≤N1} (p_i − p_{N1+1})
    let n1 = (1..d)
        .find(|&n1| eps <= p[..n1].iter().map(|x| x - p[n1]).sum::<f64>())
        .unwrap_or(d - 1);
    // largest N2 with eps <= Σ_{i≥N2} (p_{N2−1} − p_i)
    let n2 = (2..=d)
        .rev()
        .find(|&n2| eps <= p[n2 - 1..].iter().map(|x| p[n2 - 2] - x).sum::<f64>())
        .unwrap_or(2);
    if n1 >= n2 {
        return Err(Error::IndexInversion { m: n1, n: n2 });
    }
    let head = (p[..n1].iter().sum::<f64>() - eps) / n1 as f64;
    let tail = (p[n2 - 1..].iter().sum::<f64>() + eps) / (d + 1 - n2) as f64;
    let smoothed: Vec<f64> = (0..d)
        .map(|i| {
            if i < n1 {
                head
            } else if i >= n2 - 1 {
                tail
            } else {
                p[i]
            }
        })
        .collect();
    let indices = SmoothingIndices {
        n1: Some(n1),
        n2: Some(n2),
        ..Default::default()
    };
    Ok(finish(
        SmoothingKind::TrivialFlattest,
        state,
        scatter(&order, &smoothed),
        eps,
        indices,
        order,
    ))
}

/// Steepest state for a fully degenerate Hamiltonian: the tail is cut by ε
/// and the mass added to the largest eigenvalue.
pub fn trivial_steepest(state: &BlockDiagonalState, spectrum: &EnergySpectrum, eps: f64) -> Result<SmoothingResult> {
    check_epsilon(eps)?;
    if !spectrum.is_trivial() {
        return Err(Error::NonTrivialSpectrum);
    }
    if spectrum.len() != state.len() {
        return Err(Error::LengthMismatch {
            expected: spectrum.len(),
            actual: state.len(),
        });
    }
    let d = state.len();
    let order = descending_order(state.probabilities());
    let p: Vec<f64> = order.iter().map(|&i| state.probabilities()[i]).collect();
    if eps == 0.0 {
        return Ok(finish(
            SmoothingKind::TrivialSteepest,
            state,
            state.probabilities().to_vec(),
            eps,
            SmoothingIndices::default(),
            order,
        ));
    }
    // smallest M (1-based) with Σ_{i>M} p_i < eps
    let m = (1..=d)
        .find(|&m| p[m..].iter().sum::<f64>() < eps)
        .unwrap_or(d);
    let mut smoothed = vec![0.0; d];
    let mut indices = SmoothingIndices {
        m: Some(m),
        ..Default::default()
    };
    if m == 1 {
        smoothed[0] = 1.0;
        indices.saturated = true;
    } else {
        smoothed[..m].copy_from_slice(&p[..m]);
        smoothed[0] += eps;
        smoothed[m - 1] = p[m - 1] - eps + p[m..].iter().sum::<f64>();
    }
    Ok(finish(
        SmoothingKind::TrivialSteepest,
        state,
        scatter(&order, &smoothed),
        eps,
        indices,
        order,
    ))
}

/// Evidence that no single ball state maximizes `D_α` for all `α ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonexistenceReport {
    pub state: Vec<f64>,
    pub beta_factors: Vec<f64>,
    pub epsilon: f64,
    pub partition_function: f64,
    /// The ball member with minimal support thermal weight.
    pub d0_maximizer: Vec<f64>,
    pub d0_support_weight: f64,
    /// Number of sampled ball members attaining the minimal support weight.
    pub d0_maximizer_count: usize,
    pub d0_unique: bool,
    pub samples: usize,
    pub competitor: Vec<f64>,
    pub d1_competitor: f64,
    pub d1_d0_maximizer: f64,
    pub d1_margin: f64,
    /// `ln(11/8)`, the value obtained with beta factors `{1, 4, 8}`.
    pub printed_d1_value: f64,
}

/// Fixed scenario: `p = {0.55, 0.35, 0.1}`, `e^{βE} = {1, 2, 8}`, ε = 0.45.
///
/// Scans the ball on a 0.005 lattice of the simplex for the minimal-support
/// state (the unique `D_0` maximizer) and compares `D_1` of that state with
/// the competitor `{0.45, 0, 0.55}`.
pub fn steepest_nonexistence_demo() -> Result<NonexistenceReport> {
    let factors = vec![1.0, 2.0, 8.0];
    let spectrum = EnergySpectrum::new(factors.iter().map(|f: &f64| f.ln()).collect())?;
    let context = ThermalContext::new(spectrum, 1.0)?;
    let p = [0.55, 0.35, 0.1];
    let eps = 0.45;
    let tau = context.thermal_weights();

    let steps = 200usize;
    let mut best_weight = f64::INFINITY;
    let mut best = Vec::new();
    let mut count = 0usize;
    let mut samples = 0usize;
    for a in 0..=steps {
        for b in 0..=(steps - a) {
            let q = [
                a as f64 / steps as f64,
                b as f64 / steps as f64,
                (steps - a - b) as f64 / steps as f64,
            ];
            if half_l1(&p, &q) > eps + 1e-12 {
                continue;
            }
            samples += 1;
            let w: f64 = (0..3).filter(|&i| q[i] > 0.0).map(|i| tau[i]).sum();
            if w < best_weight - 1e-12 {
                best_weight = w;
                best = q.to_vec();
                count = 1;
            } else if (w - best_weight).abs() <= 1e-12 {
                count += 1;
            }
        }
    }

    let maximizer = make_state(best.clone(), context.spectrum())?;
    let competitor = make_state(vec![0.45, 0.0, 0.55], context.spectrum())?;
    let d1_max = renyi_divergence(&maximizer, &context, Alpha::ONE)?;
    let d1_comp = renyi_divergence(&competitor, &context, Alpha::ONE)?;
    Ok(NonexistenceReport {
        state: p.to_vec(),
        beta_factors: factors,
        epsilon: eps,
        partition_function: context.partition_function(),
        d0_maximizer: best,
        d0_support_weight: best_weight,
        d0_maximizer_count: count,
        d0_unique: count == 1,
        samples,
        competitor: competitor.probabilities().to_vec(),
        d1_competitor: d1_comp,
        d1_d0_maximizer: d1_max,
        d1_margin: d1_comp - d1_max,
        printed_d1_value: (11.0f64 / 8.0).ln(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::trace_distance;

    fn six_level() -> (ThermalContext, BlockDiagonalState) {
        let ctx = ThermalContext::new(EnergySpectrum::trivial(6).unwrap(), 1.0).unwrap();
        let s = make_state(vec![0.3, 0.25, 0.22, 0.1, 0.07, 0.06], ctx.spectrum()).unwrap();
        (ctx, s)
    }

    fn three_level() -> (ThermalContext, BlockDiagonalState) {
        let spectrum = EnergySpectrum::new(vec![0.0, 2f64.ln(), 8f64.ln()]).unwrap();
        let ctx = ThermalContext::new(spectrum, 1.0).unwrap();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        (ctx, s)
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn index_functions_by_hand() {
        let (ctx, s) = three_level();
        let o = beta_order(&s, &ctx).unwrap();
        assert!((f_index_function(&o, 1).unwrap() - 0.0125).abs() < 1e-14);
        assert!((f_index_function(&o, 2).unwrap() - 0.10625).abs() < 1e-14);
        assert!((g_index_function(&o, 3).unwrap() - 0.15).abs() < 1e-14);
        assert!(matches!(f_index_function(&o, 3), Err(Error::IndexOutOfRange { .. })));
        assert!(g_index_function(&o, 1).is_err());
        let t = beta_order(&ctx.thermal_state(), &ctx).unwrap();
        for m in 1..3 {
            assert!(f_index_function(&t, m).unwrap().abs() < 1e-15);
            assert!(g_index_function(&t, m + 1).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn six_level_flattest() {
        let (ctx, s) = six_level();
        let r = flattest_state(&s, &ctx, 0.1).unwrap();
        assert_close(r.result_state.probabilities(), &[0.225, 0.225, 0.22, 0.11, 0.11, 0.11], 1e-12);
        assert_eq!((r.indices.m, r.indices.n), (Some(2), Some(4)));
        assert!((r.trace_distance - 0.1).abs() < 1e-12);
        let t = trivial_flattest(&s, ctx.spectrum(), 0.1).unwrap();
        assert_close(t.result_state.probabilities(), r.result_state.probabilities(), 1e-14);
        assert_eq!((t.indices.n1, t.indices.n2), (Some(2), Some(4)));
    }

    #[test]
    fn flattest_three_level_by_hand() {
        let (ctx, s) = three_level();
        let r = flattest_state(&s, &ctx, 0.05).unwrap();
        assert_eq!((r.indices.m, r.indices.n), (Some(2), Some(3)));
        // original order {0.55, 0.35, 0.1} maps to beta-ordered {0.1, 0.35, 0.55}
        assert_close(r.result_state.probabilities(), &[0.60, 0.32, 0.08], 1e-14);
        let o = beta_order(&r.result_state, &ctx).unwrap();
        let w: Vec<f64> = o
            .ordered_probabilities()
            .iter()
            .zip(o.ordered_energies())
            .map(|(p, e)| p * e.exp())
            .collect();
        assert_close(&w, &[0.64, 0.64, 0.60], 1e-14);
    }

    #[test]
    fn flattest_edge_cases() {
        let (ctx, s) = three_level();
        let r = flattest_state(&s, &ctx, 0.0).unwrap();
        assert_close(r.result_state.probabilities(), s.probabilities(), 1e-15);
        let big = flattest_state(&s, &ctx, 0.5).unwrap();
        assert!(big.indices.saturated);
        assert_eq!(big.result_state.probabilities(), ctx.thermal_weights());
        let delta = trace_distance(&s, &ctx.thermal_state()).unwrap();
        let eq = flattest_state(&s, &ctx, delta).unwrap();
        assert!(eq.indices.saturated);
        assert!(matches!(flattest_state(&s, &ctx, 1.5), Err(Error::InvalidEpsilon(_))));
        let one = ThermalContext::new(EnergySpectrum::trivial(1).unwrap(), 1.0).unwrap();
        let pure = make_state(vec![1.0], one.spectrum()).unwrap();
        assert_eq!(flattest_state(&pure, &one, 0.3).unwrap().result_state.probabilities(), &[1.0]);
    }

    #[test]
    fn six_level_steep() {
        let (ctx, s) = six_level();
        let r = steep_state(&s, &ctx, 0.1).unwrap();
        assert_close(r.result_state.probabilities(), &[0.4, 0.25, 0.22, 0.1, 0.03, 0.0], 1e-12);
        assert_eq!(r.indices.r, Some(5));
        assert!((r.trace_distance - 0.1).abs() < 1e-12);
        let zero = steep_state(&s, &ctx, 0.0).unwrap();
        assert_eq!(zero.result_state, s);
        let full = steep_state(&s, &ctx, 1.0).unwrap();
        assert_eq!(full.result_state.probabilities(), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(full.indices.saturated);
        // trivial Hamiltonian: steep coincides with the degenerate steepest construction
        for eps in [0.01, 0.05, 0.1, 0.3, 0.69, 0.71] {
            let a = steep_state(&s, &ctx, eps).unwrap();
            let b = trivial_steepest(&s, ctx.spectrum(), eps).unwrap();
            assert_close(a.result_state.probabilities(), b.result_state.probabilities(), 1e-14);
        }
    }

    #[test]
    fn steep_three_level_by_hand() {
        let (ctx, s) = three_level();
        let r = steep_state(&s, &ctx, 0.05).unwrap();
        assert_eq!(r.indices.r, Some(3));
        assert_close(r.result_state.probabilities(), &[0.50, 0.35, 0.15], 1e-14);
    }

    #[test]
    fn steepest_three_level_by_hand() {
        let (ctx, s) = three_level();
        let b = steepest_bounds(&s, &ctx).unwrap();
        assert!((b.eps_a - 0.1).abs() < 1e-15);
        assert_eq!(b.eps_b, f64::INFINITY);
        assert!((b.eps_c - 0.25 / 7.0).abs() < 1e-14);
        let r = steepest_state_small_eps(&s, &ctx, 0.03).unwrap();
        assert_close(r.result_state.probabilities(), &[0.52, 0.35, 0.13], 1e-14);
        assert_eq!(r.indices.k, Some(3));
        let err = steepest_state_small_eps(&s, &ctx, 0.04).unwrap_err();
        assert!(matches!(err, Error::EpsilonTooLarge { bound: SteepestBound::C, .. }));
        let zero = steepest_state_small_eps(&s, &ctx, 0.0).unwrap();
        assert_eq!(zero.result_state, s);
    }

    #[test]
    fn steepest_trivial_matches_tail_cut() {
        let (ctx, s) = six_level();
        let b = steepest_bounds(&s, &ctx).unwrap();
        assert_eq!((b.eps_b, b.eps_c), (f64::INFINITY, f64::INFINITY));
        assert!((b.eps_a - 0.06).abs() < 1e-15);
        let a = steepest_state_small_eps(&s, &ctx, 0.05).unwrap();
        let t = trivial_steepest(&s, ctx.spectrum(), 0.05).unwrap();
        assert_close(a.result_state.probabilities(), t.result_state.probabilities(), 1e-15);
    }

    #[test]
    fn pure_state_bound() {
        let spectrum = EnergySpectrum::new(vec![0.0, 9f64.ln()]).unwrap();
        let ctx = ThermalContext::new(spectrum, 1.0).unwrap();
        let pure = make_state(vec![1.0, 0.0], ctx.spectrum()).unwrap();
        let b = steepest_bounds(&pure, &ctx).unwrap();
        assert_eq!(b.k, 1);
        assert!((b.eps_pure - 1.0 / 9.0).abs() < 1e-14);
        assert!(matches!(
            steepest_state_small_eps(&pure, &ctx, 0.12),
            Err(Error::EpsilonTooLarge { bound: SteepestBound::PureState, .. })
        ));
    }

    #[test]
    fn trivial_constructions_reject_nontrivial_spectrum() {
        let (ctx, s) = three_level();
        assert!(matches!(trivial_flattest(&s, ctx.spectrum(), 0.1), Err(Error::NonTrivialSpectrum)));
        assert!(trivial_steepest(&s, ctx.spectrum(), 0.1).is_err());
        let (ctx6, s6) = six_level();
        let u = trivial_flattest(&s6, ctx6.spectrum(), 0.5).unwrap();
        assert_close(u.result_state.probabilities(), &[1.0 / 6.0; 6], 1e-15);
    }

    #[test]
    fn nonexistence_scenario() {
        let r = steepest_nonexistence_demo().unwrap();
        assert_eq!(r.d0_maximizer, vec![1.0, 0.0, 0.0]);
        assert!(r.d0_unique);
        assert!((r.d0_support_weight - 8.0 / 13.0).abs() < 1e-14);
        assert!((r.partition_function - 13.0 / 8.0).abs() < 1e-14);
        assert!(r.d1_competitor > r.d1_d0_maximizer);
    }
}
