//! Tensor powers `ρ^⊗n` and finite-copy bounds.
//!
//! The `d^n` eigenvalues of a tensor power are compressed into composition
//! classes: for counts `(k_1, …, k_d)` summing to `n`, every element has
//! `p = Π p_i^{k_i}`, `q = Π τ_i^{k_i}` and the class holds the multinomial
//! number of elements. All elements of a class share the slope `p/q`, so
//! beta-ordered constructions act on whole classes, splitting one only where
//! a cut lands inside it.
//!
//! Bounds use natural logarithms throughout.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::curves::{curve_dominates, Dominance, ThermoMajorizationCurve, DEFAULT_DOMINATION_TOL};
use crate::divergences::{free_energy, renyi_divergence, renyi_from_terms, Alpha, AlphaGrid, LogTerm};
use crate::error::{Error, Result};
use crate::state::{beta_order, BlockDiagonalState, ThermalContext};

pub const DEFAULT_CLASS_CAP: u128 = 2_000_000;

/// `C(n+d−1, d−1)`, saturating at `u128::MAX`.
pub fn class_count(d: usize, n: u32) -> u128 {
    if d == 0 {
        return 0;
    }
    let mut c: u128 = 1;
    for i in 1..d as u128 {
        // c = C(n+i, i) from C(n+i−1, i−1); exact at every step
        c = match c.checked_mul(n as u128 + i) {
            Some(v) => v / i,
            None => return u128::MAX,
        };
    }
    c
}

/// `multiplicity` elements with eigenvalue `e^ln_p` and thermal weight `e^ln_q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TensorClass {
    pub ln_p: f64,
    pub ln_q: f64,
    pub multiplicity: f64,
    pub ln_multiplicity: f64,
}

impl TensorClass {
    fn with_count(ln_p: f64, ln_q: f64, count: f64) -> Self {
        Self {
            ln_p,
            ln_q,
            multiplicity: count,
            ln_multiplicity: count.ln(),
        }
    }

    fn with_value(self, p: f64, count: f64) -> Self {
        Self::with_count(p.ln(), self.ln_q, count)
    }

    pub fn mass(&self) -> f64 {
        (self.ln_multiplicity + self.ln_p).exp()
    }

    pub fn thermal_mass(&self) -> f64 {
        (self.ln_multiplicity + self.ln_q).exp()
    }

    pub fn log_ratio(&self) -> f64 {
        self.ln_p - self.ln_q
    }

    fn term(&self) -> LogTerm {
        LogTerm {
            ln_mult: self.ln_multiplicity,
            ln_p: self.ln_p,
            ln_q: self.ln_q,
        }
    }
}

/// A diagonal state given by weighted levels (classes), in any order.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSpectrum {
    levels: Vec<TensorClass>,
}

impl WeightedSpectrum {
    pub fn levels(&self) -> &[TensorClass] {
        &self.levels
    }

    pub fn total_probability(&self) -> f64 {
        self.levels.iter().map(TensorClass::mass).sum()
    }

    pub fn divergence(&self, alpha: Alpha) -> Result<f64> {
        let alpha = alpha.validate()?;
        let terms: Vec<LogTerm> = self.levels.iter().map(TensorClass::term).collect();
        Ok(renyi_from_terms(&terms, alpha))
    }

    /// Levels sorted by non-increasing slope (stable).
    fn beta_ordered(&self) -> Vec<TensorClass> {
        let mut levels = self.levels.clone();
        levels.sort_by(|a, b| b.log_ratio().total_cmp(&a.log_ratio()));
        levels
    }

    pub fn curve(&self) -> ThermoMajorizationCurve {
        ThermoMajorizationCurve::from_segments(
            self.beta_ordered()
                .iter()
                .map(|c| (c.thermal_mass(), if c.ln_p == f64::NEG_INFINITY { 0.0 } else { c.mass() })),
        )
    }

    /// Steep state: `+ε` on the leading element, `ε` removed from the tail.
    pub fn steep(&self, eps: f64) -> Result<WeightedSpectrum> {
        check_eps(eps)?;
        let ordered = self.beta_ordered();
        if eps == 0.0 || ordered.is_empty() {
            return Ok(WeightedSpectrum { levels: ordered });
        }
        let top = ordered[0].ln_p.exp();
        let mut out = Vec::with_capacity(ordered.len() + 3);
        if eps > 1.0 - top {
            out.push(ordered[0].with_value(1.0, 1.0));
            if ordered[0].multiplicity > 1.0 {
                out.push(ordered[0].with_value(0.0, ordered[0].multiplicity - 1.0));
            }
            out.extend(ordered[1..].iter().map(|c| c.with_value(0.0, c.multiplicity)));
            return Ok(WeightedSpectrum { levels: out });
        }

        let c_len = ordered.len();
        let mut tails = vec![0.0; c_len + 1];
        for c in (0..c_len).rev() {
            tails[c] = tails[c + 1] + ordered[c].mass();
        }
        // class holding R: the last class whose tail still carries ε
        let rc = (0..c_len).rev().find(|&c| tails[c] >= eps).unwrap_or(0);
        let p = ordered[rc].ln_p.exp();
        let m = ordered[rc].multiplicity;
        let t = ((eps - tails[rc + 1]) / p).ceil().clamp(1.0, m);
        let partial = (t * p + tails[rc + 1] - eps).max(0.0);

        for (c, class) in ordered.iter().enumerate() {
            if c < rc {
                out.push(*class);
            } else if c == rc {
                if m - t > 0.0 {
                    out.push(class.with_value(p, m - t));
                }
                out.push(class.with_value(partial, 1.0));
                if t > 1.0 {
                    out.push(class.with_value(0.0, t - 1.0));
                }
            } else {
                out.push(class.with_value(0.0, class.multiplicity));
            }
        }
        // split one element off the leading class and raise it by ε
        let lead = out[0];
        let lead_p = lead.ln_p.exp();
        out[0] = lead.with_value(lead_p + eps, 1.0);
        if lead.multiplicity > 1.0 {
            out.insert(1, lead.with_value(lead_p, lead.multiplicity - 1.0));
        }
        Ok(WeightedSpectrum { levels: out })
    }

    /// Flattest state of the ε-ball; cuts always fall on class boundaries.
    pub fn flattest(&self, eps: f64) -> Result<WeightedSpectrum> {
        check_eps(eps)?;
        let ordered = self.beta_ordered();
        let distance: f64 = 0.5 * ordered.iter().map(|c| (c.mass() - c.thermal_mass()).abs()).sum::<f64>();
        if eps >= distance {
            return Ok(WeightedSpectrum {
                levels: ordered
                    .iter()
                    .map(|c| TensorClass { ln_p: c.ln_q, ..*c })
                    .collect(),
            });
        }
        if eps == 0.0 {
            return Ok(WeightedSpectrum { levels: ordered });
        }
        let c_len = ordered.len();
        let mass: Vec<f64> = ordered.iter().map(TensorClass::mass).collect();
        let thermal: Vec<f64> = ordered.iter().map(TensorClass::thermal_mass).collect();
        let slope: Vec<f64> = ordered.iter().map(|c| c.log_ratio().exp()).collect();
        let mut head_p = vec![0.0; c_len + 1];
        let mut head_t = vec![0.0; c_len + 1];
        for c in 0..c_len {
            head_p[c + 1] = head_p[c] + mass[c];
            head_t[c + 1] = head_t[c] + thermal[c];
        }
        let mut tail_p = vec![0.0; c_len + 1];
        let mut tail_t = vec![0.0; c_len + 1];
        for c in (0..c_len).rev() {
            tail_p[c] = tail_p[c + 1] + mass[c];
            tail_t[c] = tail_t[c + 1] + thermal[c];
        }
        // head = classes [0, cm), tail = classes [cn, len)
        let cm = (1..c_len)
            .find(|&c| eps <= head_p[c] - slope[c] * head_t[c])
            .unwrap_or(c_len - 1);
        let cn = (1..c_len)
            .rev()
            .find(|&c| eps <= slope[c - 1] * tail_t[c] - tail_p[c])
            .unwrap_or(1);
        if cm > cn {
            return Err(Error::IndexInversion { m: cm, n: cn });
        }
        let head_level = ((head_p[cm] - eps) / head_t[cm]).ln();
        let tail_level = ((tail_p[cn] + eps) / tail_t[cn]).ln();
        let levels = ordered
            .iter()
            .enumerate()
            .map(|(c, class)| {
                if c < cm {
                    TensorClass {
                        ln_p: class.ln_q + head_level,
                        ..*class
                    }
                } else if c >= cn {
                    TensorClass {
                        ln_p: class.ln_q + tail_level,
                        ..*class
                    }
                } else {
                    *class
                }
            })
            .collect();
        Ok(WeightedSpectrum { levels })
    }

    /// Smoothed divergence: steep for `α ≤ 1`, flattest above.
    pub fn smoothed_divergence(&self, alpha: Alpha, eps: f64) -> Result<f64> {
        let alpha = alpha.validate()?;
        let smoothed = if alpha.uses_steep_branch() {
            self.steep(eps)?
        } else {
            self.flattest(eps)?
        };
        smoothed.divergence(alpha)
    }

    /// Expands every level into single elements `(p, q)`; for small sizes.
    pub fn decompress(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for c in &self.levels {
            let (p, q) = (c.ln_p.exp(), c.ln_q.exp());
            for _ in 0..c.multiplicity.round() as u64 {
                out.push((p, q));
            }
        }
        out
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(())
}

/// Compressed `ρ^⊗n` together with `τ^⊗n`.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorPowerSpectrum {
    n: u32,
    dim: usize,
    /// Row-major compositions, `dim` counts per class.
    counts: Vec<u32>,
    spectrum: WeightedSpectrum,
}

impl TensorPowerSpectrum {
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn classes(&self) -> &[TensorClass] {
        self.spectrum.levels()
    }

    /// Composition (count per base level) of class `i`.
    pub fn composition(&self, i: usize) -> &[u32] {
        &self.counts[i * self.dim..(i + 1) * self.dim]
    }

    pub fn spectrum(&self) -> &WeightedSpectrum {
        &self.spectrum
    }

    pub fn len(&self) -> usize {
        self.spectrum.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.levels.is_empty()
    }

    /// `Pr_p{ e^{n(D−δ)} ≤ p/q ≤ e^{n(D+δ)} }` by summing classes.
    pub fn typical_mass(&self, delta: f64) -> f64 {
        let n = self.n as f64;
        let d = self.spectrum.divergence(Alpha::ONE).expect("valid order") / n;
        let slack = 1e-12 * (1.0 + (n * d).abs());
        let (lo, hi) = (n * (d - delta) - slack, n * (d + delta) + slack);
        self.classes()
            .iter()
            .filter(|c| c.ln_p > f64::NEG_INFINITY && (lo..=hi).contains(&c.log_ratio()))
            .map(TensorClass::mass)
            .sum()
    }
}

fn compositions(n: u32, d: usize) -> Vec<u32> {
    fn rec(left: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<u32>) {
        if parts == 1 {
            out.extend_from_slice(prefix);
            out.push(left);
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            rec(left - k, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    if d == 1 {
        return vec![n];
    }
    // first count fixed per task, the rest enumerated sequentially
    let chunks = batch::map_indices(n as usize + 1, |i| {
        let k0 = n - i as u32;
        let mut out = Vec::new();
        let mut prefix = vec![k0];
        rec(n - k0, d - 1, &mut prefix, &mut out);
        out
    });
    chunks.concat()
}

/// [`tensor_power_capped`] with [`DEFAULT_CLASS_CAP`].
pub fn tensor_power(state: &BlockDiagonalState, context: &ThermalContext, n: u32) -> Result<TensorPowerSpectrum> {
    tensor_power_capped(state, context, n, DEFAULT_CLASS_CAP)
}

pub fn tensor_power_capped(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    n: u32,
    cap: u128,
) -> Result<TensorPowerSpectrum> {
    context.check_state(state)?;
    if n == 0 {
        return Err(Error::IndexOutOfRange {
            index: 0,
            min: 1,
            max: u32::MAX as usize,
        });
    }
    let d = state.len();
    let required = class_count(d, n);
    if required > cap {
        return Err(Error::TooLarge { required, cap });
    }
    let ln_p: Vec<f64> = state.probabilities().iter().map(|p| p.ln()).collect();
    let ln_q: Vec<f64> = context.thermal_weights().iter().map(|q| q.ln()).collect();
    let mut ln_fact = vec![0.0f64; n as usize + 1];
    for k in 1..=n as usize {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }

    let counts = compositions(n, d);
    let rows: Vec<&[u32]> = counts.chunks_exact(d).collect();
    let classes = batch::map(&rows, |ks| {
        let mut lp = 0.0;
        let mut lq = 0.0;
        let mut lm = ln_fact[n as usize];
        for (i, &k) in ks.iter().enumerate() {
            if k > 0 {
                lp += k as f64 * ln_p[i];
                lq += k as f64 * ln_q[i];
                lm -= ln_fact[k as usize];
            }
        }
        TensorClass {
            ln_p: lp,
            ln_q: lq,
            multiplicity: lm.exp().round(),
            ln_multiplicity: lm,
        }
    });
    Ok(TensorPowerSpectrum {
        n,
        dim: d,
        counts,
        spectrum: WeightedSpectrum { levels: classes },
    })
}

/// Typical mass of `ρ^⊗n` for window `δ` (default class cap).
pub fn typical_mass(state: &BlockDiagonalState, context: &ThermalContext, n: u32, delta: f64) -> Result<f64> {
    Ok(tensor_power(state, context, n)?.typical_mass(delta))
}

/// `1 − 2 e^{−2nδ²}`.
pub fn hoeffding_lower_bound(n: u32, delta: f64) -> f64 {
    1.0 - 2.0 * (-2.0 * n as f64 * delta * delta).exp()
}

/// `1 − 2 e^{−2nδ²/r²}` for a log-ratio range `r` (Hoeffding for bounded
/// summands). Agrees with [`hoeffding_lower_bound`] at `r = 1`.
pub fn hoeffding_lower_bound_with_range(n: u32, delta: f64, range: f64) -> f64 {
    if range <= 0.0 {
        return 1.0;
    }
    1.0 - 2.0 * (-2.0 * n as f64 * delta * delta / (range * range)).exp()
}

/// Spread `max − min` of `ln(p_i/τ_i)` over the support.
pub fn log_ratio_range(state: &BlockDiagonalState, context: &ThermalContext) -> Result<f64> {
    context.check_state(state)?;
    let r: Vec<f64> = state
        .probabilities()
        .iter()
        .zip(context.thermal_weights())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, q)| (p / q).ln())
        .collect();
    let max = r.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = r.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(max - min)
}

/// `sqrt(ln(2/ε) / (2n))`.
pub fn typicality_delta(n: u64, epsilon: f64) -> f64 {
    ((2.0 / epsilon).ln() / (2.0 * n as f64)).sqrt()
}

/// Offsets of the finite-`n` sandwich around `D = D(ρ‖τ)`:
/// `D − δ ≤ (1/n) D̂_α^ε ≤ D + g₁` for `α ≤ 1` and
/// `D − g₂ ≤ (1/n) D̂_α^ε ≤ D + δ` for `α > 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AepBounds {
    pub n: u64,
    pub epsilon: f64,
    pub relative_entropy: f64,
    pub delta: f64,
    pub lower_steep: f64,
    pub upper_steep: f64,
    pub lower_flat: f64,
    pub upper_flat: f64,
}

impl AepBounds {
    pub fn g1(&self) -> f64 {
        self.upper_steep
    }

    pub fn g2(&self) -> f64 {
        self.lower_flat
    }

    /// `D − max(δ, g₂)`.
    pub fn lower(&self) -> f64 {
        self.relative_entropy - self.lower_steep.max(self.lower_flat)
    }

    /// `D + max(g₁, δ)`.
    pub fn upper(&self) -> f64 {
        self.relative_entropy + self.upper_steep.max(self.upper_flat)
    }

    pub fn contains(&self, normalized: f64, tol: f64) -> bool {
        normalized >= self.lower() - tol && normalized <= self.upper() + tol
    }
}

struct BaseQuantities {
    relative_entropy: f64,
    ln_p1: f64,
    ln_q1: f64,
}

fn base_quantities(state: &BlockDiagonalState, context: &ThermalContext) -> Result<BaseQuantities> {
    let ordered = beta_order(state, context)?;
    Ok(BaseQuantities {
        relative_entropy: renyi_divergence(state, context, Alpha::ONE)?,
        ln_p1: ordered.ordered_probabilities()[0].ln(),
        ln_q1: ordered.ordered_thermal_weights()[0].ln(),
    })
}

fn g1_of(b: &BaseQuantities, n: u64, eps: f64, delta: f64) -> f64 {
    let nf = n as f64;
    let lead = (nf * b.ln_p1).exp() + eps;
    (1.0 - eps) * delta - eps * b.relative_entropy
        + lead * (lead.ln() - nf * b.ln_q1) / nf
        + (2.0 * eps).sqrt() * (b.ln_p1 - b.ln_q1)
}

fn g2_of(b: &BaseQuantities, n: u64, eps: f64, delta: f64) -> f64 {
    delta + ((2.0 * eps).sqrt() + eps) * (b.relative_entropy - delta) - eps.ln() / n as f64
}

fn check_open_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidEpsilon(eps));
    }
    Ok(())
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::IndexOutOfRange {
            index: 0,
            min: 1,
            max: usize::MAX,
        });
    }
    Ok(())
}

/// The finite-`n` sandwich offsets for `ε ∈ (0, 1)`.
pub fn aep_bounds(state: &BlockDiagonalState, context: &ThermalContext, n: u64, epsilon: f64) -> Result<AepBounds> {
    check_open_eps(epsilon)?;
    check_n(n)?;
    let base = base_quantities(state, context)?;
    let delta = typicality_delta(n, epsilon);
    Ok(AepBounds {
        n,
        epsilon,
        relative_entropy: base.relative_entropy,
        delta,
        lower_steep: delta,
        upper_steep: g1_of(&base, n, epsilon, delta),
        lower_flat: g2_of(&base, n, epsilon, delta),
        upper_flat: delta,
    })
}

/// Finite-`n` sufficient condition `F(ρ) ≥ F(σ) + β⁻¹Δ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteNReport {
    pub n: u64,
    pub epsilon: f64,
    pub delta: f64,
    /// `g₁` of the target `σ`.
    pub g1: f64,
    /// `g₂` of the source `ρ`.
    pub g2: f64,
    /// `Δ = δ + max(g₁, g₂)` in nats.
    #[serde(rename = "Delta")]
    pub big_delta: f64,
    pub free_energy_rho: f64,
    pub free_energy_sigma: f64,
    /// `F(ρ) − F(σ) − β⁻¹Δ`.
    pub margin: f64,
    pub condition_holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_star: Option<u64>,
}

pub fn corollary1_delta(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    n: u64,
    epsilon: f64,
) -> Result<FiniteNReport> {
    check_open_eps(epsilon)?;
    check_n(n)?;
    let r = base_quantities(rho, context)?;
    let s = base_quantities(sigma, context)?;
    let delta = typicality_delta(n, epsilon);
    let g1 = g1_of(&s, n, epsilon, delta);
    let g2 = g2_of(&r, n, epsilon, delta);
    let big_delta = delta + g1.max(g2);
    let f_rho = free_energy(rho, context, Alpha::ONE)?;
    let f_sigma = free_energy(sigma, context, Alpha::ONE)?;
    let margin = f_rho - f_sigma - big_delta / context.beta();
    Ok(FiniteNReport {
        n,
        epsilon,
        delta,
        g1,
        g2,
        big_delta,
        free_energy_rho: f_rho,
        free_energy_sigma: f_sigma,
        margin,
        condition_holds: margin >= 0.0,
        n_star: None,
    })
}

/// How ε shrinks with the number of copies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EpsilonSchedule {
    /// `ε = n^{−1/3}`
    #[default]
    CubeRootInverse,
    /// `ε = 1/n`
    Inverse,
    Fixed(f64),
}

impl EpsilonSchedule {
    pub fn epsilon(self, n: u64) -> f64 {
        match self {
            EpsilonSchedule::CubeRootInverse => (n as f64).powf(-1.0 / 3.0),
            EpsilonSchedule::Inverse => 1.0 / n as f64,
            EpsilonSchedule::Fixed(e) => e,
        }
    }
}

impl std::str::FromStr for EpsilonSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cbrt" | "cube-root-inverse" | "n^-1/3" => Ok(EpsilonSchedule::CubeRootInverse),
            "inverse" | "1/n" => Ok(EpsilonSchedule::Inverse),
            other => other
                .parse::<f64>()
                .map(EpsilonSchedule::Fixed)
                .map_err(|_| Error::InvalidEpsilon(f64::NAN)),
        }
    }
}

pub const DEFAULT_N_CAP: u64 = 1 << 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NStarReport {
    pub n_star: Option<u64>,
    pub schedule: EpsilonSchedule,
    pub evaluations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// [`find_n_star_capped`] with [`DEFAULT_N_CAP`].
pub fn find_n_star(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    schedule: EpsilonSchedule,
) -> Result<NStarReport> {
    find_n_star_capped(rho, sigma, context, schedule, DEFAULT_N_CAP)
}

/// Doubling then bisection on the finite-`n` condition under `schedule`.
///
/// The returned `n*` satisfies the condition and `n* − 1` does not; an
/// ε outside `(0, 1)` counts as not satisfied. When the condition is not
/// monotone in `n` this is a crossing point, not necessarily the first.
pub fn find_n_star_capped(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    schedule: EpsilonSchedule,
    cap: u64,
) -> Result<NStarReport> {
    let f_rho = free_energy(rho, context, Alpha::ONE)?;
    let f_sigma = free_energy(sigma, context, Alpha::ONE)?;
    context.check_state(sigma)?;
    let evaluations = Cell::new(0usize);
    let report = |n_star, note: Option<String>| NStarReport {
        n_star,
        schedule,
        evaluations: evaluations.get(),
        note,
    };
    if f_rho <= f_sigma {
        return Ok(report(
            None,
            Some(format!(
                "F(rho) = {f_rho} does not exceed F(sigma) = {f_sigma}; the penalty is positive for every n"
            )),
        ));
    }
    let holds = |n: u64| -> Result<bool> {
        evaluations.set(evaluations.get() + 1);
        let eps = schedule.epsilon(n);
        if !(eps > 0.0 && eps < 1.0) {
            return Ok(false);
        }
        Ok(corollary1_delta(rho, sigma, context, n, eps)?.condition_holds)
    };
    if holds(1)? {
        return Ok(report(Some(1), None));
    }
    let (mut lo, mut hi) = (1u64, 2u64);
    loop {
        if hi > cap {
            return Ok(report(None, Some(format!("condition not reached up to n = {cap}"))));
        }
        if holds(hi)? {
            break;
        }
        lo = hi;
        hi *= 2;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(report(Some(hi), None))
}

/// `D̂_α^ε(ρ^⊗n‖τ^⊗n)` (unnormalized), default class cap.
pub fn smoothed_divergence_tensor(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    n: u32,
    alpha: Alpha,
    epsilon: f64,
) -> Result<f64> {
    tensor_power(state, context, n)?.spectrum().smoothed_divergence(alpha, epsilon)
}

/// Curve check of `steep^ε(ρ^⊗n)` against `flattest^ε(σ^⊗n)`.
pub fn tensor_steep_vs_flat_check(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    n: u32,
    epsilon: f64,
) -> Result<Dominance> {
    let steep = tensor_power(rho, context, n)?.spectrum().steep(epsilon)?;
    let flat = tensor_power(sigma, context, n)?.spectrum().flattest(epsilon)?;
    Ok(curve_dominates(&steep.curve(), &flat.curve(), DEFAULT_DOMINATION_TOL))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: u32,
    pub alpha: Alpha,
    pub epsilon: f64,
    pub normalized_d: f64,
    pub lower_bound: f64,
    pub upper_bound: f64,
}

/// `(1/n) D̂_α^ε` and the sandwich envelope for each `n` and grid order.
pub fn convergence_table(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    ns: &[u32],
    grid: &AlphaGrid,
    schedule: EpsilonSchedule,
    cap: u128,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::new();
    for &n in ns {
        let eps = schedule.epsilon(n as u64);
        let bounds = aep_bounds(state, context, n as u64, eps)?;
        let tensor = tensor_power_capped(state, context, n, cap)?;
        let values = batch::map(grid.values(), |&a| tensor.spectrum().smoothed_divergence(a, eps));
        for (&alpha, value) in grid.values().iter().zip(values) {
            rows.push(ConvergenceRow {
                n,
                alpha,
                epsilon: eps,
                normalized_d: value? / n as f64,
                lower_bound: bounds.lower(),
                upper_bound: bounds.upper(),
            });
        }
    }
    Ok(rows)
}

pub fn convergence_csv(rows: &[ConvergenceRow]) -> String {
    let mut out = String::from("n,alpha,epsilon,normalized_D,lower_bound,upper_bound\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            r.n, r.alpha, r.epsilon, r.normalized_d, r.lower_bound, r.upper_bound
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smoothing::{flattest_state, steep_state};
    use crate::state::{make_state, EnergySpectrum};

    fn qubit() -> (ThermalContext, BlockDiagonalState) {
        let ctx = ThermalContext::new(EnergySpectrum::trivial(2).unwrap(), 1.0).unwrap();
        let s = make_state(vec![0.8, 0.2], ctx.spectrum()).unwrap();
        (ctx, s)
    }

    fn three_level() -> (ThermalContext, BlockDiagonalState) {
        let spectrum = EnergySpectrum::new(vec![0.0, 2f64.ln(), 8f64.ln()]).unwrap();
        let ctx = ThermalContext::new(spectrum, 1.0).unwrap();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        (ctx, s)
    }

    #[test]
    fn class_counts() {
        assert_eq!(class_count(2, 3), 4);
        assert_eq!(class_count(3, 5), 21);
        assert_eq!(class_count(1, 100), 1);
        assert_eq!(class_count(6, 12), 6188);
        assert_eq!(class_count(200, 1_000_000), u128::MAX);
    }

    #[test]
    fn binomial_multiplicities() {
        let (ctx, s) = qubit();
        let t = tensor_power(&s, &ctx, 3).unwrap();
        let mut m: Vec<f64> = t.classes().iter().map(|c| c.multiplicity).collect();
        m.sort_by(f64::total_cmp);
        assert_eq!(m, vec![1.0, 1.0, 3.0, 3.0]);
        let one = tensor_power(&s, &ctx, 1).unwrap();
        assert_eq!(one.len(), 2);
        let total: f64 = tensor_power(&s, &ctx, 40).unwrap().spectrum().total_probability();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_is_reported() {
        let (ctx, s) = three_level();
        let err = tensor_power_capped(&s, &ctx, 10, 50).unwrap_err();
        assert_eq!(err, Error::TooLarge { required: 66, cap: 50 });
    }

    #[test]
    fn single_copy_matches_base_constructions() {
        let (ctx, s) = three_level();
        let t = tensor_power(&s, &ctx, 1).unwrap();
        for eps in [0.0, 0.01, 0.05, 0.1, 0.3, 0.6, 0.95] {
            for alpha in [Alpha::ZERO, Alpha::Finite(0.5), Alpha::ONE, Alpha::Finite(2.0), Alpha::Infinity] {
                let a = t.spectrum().smoothed_divergence(alpha, eps).unwrap();
                let w = if alpha.uses_steep_branch() {
                    steep_state(&s, &ctx, eps).unwrap()
                } else {
                    flattest_state(&s, &ctx, eps).unwrap()
                };
                let b = renyi_divergence(&w.result_state, &ctx, alpha).unwrap();
                assert!((a - b).abs() < 1e-12, "eps {eps} alpha {alpha}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn typical_mass_cases() {
        let (ctx, s) = three_level();
        assert!((typical_mass(&s, &ctx, 7, 10.0).unwrap() - 1.0).abs() < 1e-12);
        let th = ctx.thermal_state();
        assert!((typical_mass(&th, &ctx, 9, 1e-3).unwrap() - 1.0).abs() < 1e-12);
        assert!((hoeffding_lower_bound(50, 0.1) - 0.264_241_117_657_115_4).abs() < 1e-12);
    }

    #[test]
    fn delta_closed_form() {
        assert!((typicality_delta(100, 0.02) - 0.151_743).abs() < 1e-6);
        let (ctx, s) = qubit();
        let b = aep_bounds(&s, &ctx, 100, 0.02).unwrap();
        assert_eq!(b.delta, typicality_delta(100, 0.02));
        assert!(aep_bounds(&s, &ctx, 100, 1.0).is_err());
    }

    #[test]
    fn schedules() {
        assert_eq!(EpsilonSchedule::Inverse.epsilon(4), 0.25);
        assert!((EpsilonSchedule::CubeRootInverse.epsilon(8) - 0.5).abs() < 1e-15);
        assert_eq!("0.1".parse::<EpsilonSchedule>().unwrap(), EpsilonSchedule::Fixed(0.1));
        assert_eq!("1/n".parse::<EpsilonSchedule>().unwrap(), EpsilonSchedule::Inverse);
    }

    #[test]
    fn n_star_requires_free_energy_gap() {
        let (ctx, s) = three_level();
        let r = find_n_star(&ctx.thermal_state(), &s, &ctx, EpsilonSchedule::default()).unwrap();
        assert_eq!(r.n_star, None);
        assert!(r.note.is_some());
    }

    #[test]
    fn convergence_csv_header() {
        let (ctx, s) = qubit();
        let grid = AlphaGrid::parse("2").unwrap();
        let rows = convergence_table(&s, &ctx, &[2, 4], &grid, EpsilonSchedule::Fixed(0.05), DEFAULT_CLASS_CAP).unwrap();
        assert_eq!(rows.len(), 2 * grid.len());
        let csv = convergence_csv(&rows);
        assert!(csv.starts_with("n,alpha,epsilon,normalized_D,lower_bound,upper_bound\n"));
        assert_eq!(csv.lines().count(), rows.len() + 1);
    }
}
