//! Rényi divergences of commuting (block-diagonal) states from the thermal
//! state, generalized free energies and their smoothed variants.
//!
//! All logarithms are natural; divergences are in nats, free energies in
//! energy units (`1/beta`).

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::batch;
use crate::error::{Error, Result};
use crate::sampling;
use crate::smoothing::{flattest_state, steep_state};
use crate::state::{BlockDiagonalState, ThermalContext};

/// Below this distance from 1 the relative-entropy formula is used directly.
const KL_WINDOW: f64 = 1e-6;

/// Order of a Rényi divergence: a nonnegative real or the `∞` limit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    Finite(f64),
    Infinity,
}

impl Alpha {
    pub const ZERO: Alpha = Alpha::Finite(0.0);
    pub const ONE: Alpha = Alpha::Finite(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value < 0.0 {
            return Err(Error::NegativeAlpha(value));
        }
        Ok(if value.is_infinite() {
            Alpha::Infinity
        } else {
            Alpha::Finite(value)
        })
    }

    pub fn value(self) -> f64 {
        match self {
            Alpha::Finite(a) => a,
            Alpha::Infinity => f64::INFINITY,
        }
    }

    /// The lower branch `0 ≤ α ≤ 1` of the smoothed divergences.
    pub fn uses_steep_branch(self) -> bool {
        self.value() <= 1.0
    }

    pub(crate) fn validate(self) -> Result<Self> {
        match self {
            Alpha::Finite(a) if a.is_nan() || a < 0.0 => Err(Error::NegativeAlpha(a)),
            other => Ok(other),
        }
    }
}

impl PartialOrd for Alpha {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        self.value().partial_cmp(&other.value())
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Finite(a) => write!(f, "{a}"),
            Alpha::Infinity => write!(f, "inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Alpha::Infinity),
            t => {
                let v: f64 = t
                    .parse()
                    .map_err(|_| Error::InvalidGrid(format!("cannot parse alpha {s:?}")))?;
                Alpha::new(v)
            }
        }
    }
}

impl Serialize for Alpha {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Alpha::Finite(a) => serializer.serialize_f64(*a),
            Alpha::Infinity => serializer.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Alpha {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Num(v) => Alpha::new(v).map_err(serde::de::Error::custom),
            Raw::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Sorted set of orders, always containing 0, 1 and ∞.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGrid {
    values: Vec<Alpha>,
}

impl Default for AlphaGrid {
    fn default() -> Self {
        let mut values: Vec<f64> = (0..=10).map(|k| k as f64 / 10.0).collect();
        values.extend([1.25, 1.5, 2.0, 3.0, 5.0, 10.0]);
        Self::from_finite(values)
    }
}

impl AlphaGrid {
    fn from_finite(values: Vec<f64>) -> Self {
        let mut v: Vec<Alpha> = values.into_iter().map(Alpha::Finite).collect();
        v.push(Alpha::Infinity);
        Self { values: v }
    }

    /// Builds a grid from arbitrary orders, adding 0, 1 and ∞.
    pub fn new(values: impl IntoIterator<Item = Alpha>) -> Result<Self> {
        let mut finite = vec![0.0, 1.0];
        for a in values {
            match a.validate()? {
                Alpha::Finite(v) => finite.push(v),
                Alpha::Infinity => {}
            }
        }
        finite.sort_by(f64::total_cmp);
        finite.dedup();
        Ok(Self::from_finite(finite))
    }

    /// Default grid plus `density` evenly spaced orders on each unit interval
    /// of `[0, 10]`.
    pub fn with_density(density: usize) -> Self {
        let mut extra: Vec<Alpha> = Self::default().values;
        if density > 0 {
            let step = 1.0 / density as f64;
            extra.extend((0..=10 * density).map(|k| Alpha::Finite(k as f64 * step)));
        }
        Self::new(extra).expect("generated orders are nonnegative")
    }

    /// Default grid extended by `extra`.
    pub fn with_additions(extra: impl IntoIterator<Item = Alpha>) -> Result<Self> {
        Self::new(Self::default().values.into_iter().chain(extra))
    }

    /// Parses `"default"` or a comma separated list such as `"0.5,2,inf"`.
    pub fn parse(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec.is_empty() || spec.eq_ignore_ascii_case("default") {
            return Ok(Self::default());
        }
        let parsed = spec
            .split(',')
            .map(str::parse::<Alpha>)
            .collect::<Result<Vec<_>>>()?;
        Self::new(parsed)
    }

    pub fn values(&self) -> &[Alpha] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// One level of a (possibly compressed) pair of commuting spectra in log
/// space: `multiplicity` copies of eigenvalue pair `(p, q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogTerm {
    pub ln_mult: f64,
    pub ln_p: f64,
    pub ln_q: f64,
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `D_α(p‖q)` over log-space terms. Terms with `p = 0` never contribute.
pub(crate) fn renyi_from_terms(terms: &[LogTerm], alpha: Alpha) -> f64 {
    let support = || terms.iter().filter(|t| t.ln_p > f64::NEG_INFINITY);
    match alpha {
        Alpha::Infinity => support()
            .map(|t| t.ln_p - t.ln_q)
            .fold(f64::NEG_INFINITY, f64::max),
        Alpha::Finite(0.0) => -log_sum_exp(support().map(|t| t.ln_mult + t.ln_q)),
        Alpha::Finite(a) if (a - 1.0).abs() < KL_WINDOW => support()
            .map(|t| (t.ln_mult + t.ln_p).exp() * (t.ln_p - t.ln_q))
            .sum(),
        Alpha::Finite(a) => {
            log_sum_exp(support().map(|t| t.ln_mult + a * t.ln_p + (1.0 - a) * t.ln_q)) / (a - 1.0)
        }
    }
}

pub(crate) fn terms_of(p: &[f64], q: &[f64]) -> Vec<LogTerm> {
    p.iter()
        .zip(q)
        .map(|(&p, &q)| LogTerm {
            ln_mult: 0.0,
            ln_p: p.ln(),
            ln_q: q.ln(),
        })
        .collect()
}

/// `D_α(ρ‖τ_β)` for a block-diagonal state.
///
/// `α = 1` is the relative entropy, `α = 0` is `−ln Σ_{p_i>0} τ_i` and
/// `α = ∞` is `ln max_i p_i/τ_i`.
pub fn renyi_divergence(state: &BlockDiagonalState, context: &ThermalContext, alpha: Alpha) -> Result<f64> {
    let alpha = alpha.validate()?;
    context.check_state(state)?;
    Ok(renyi_from_terms(
        &terms_of(state.probabilities(), context.thermal_weights()),
        alpha,
    ))
}

/// `β⁻¹ [−ln Z + d]`.
pub fn free_energy_from_divergence(context: &ThermalContext, divergence: f64) -> f64 {
    (divergence - context.ln_partition_function()) / context.beta()
}

/// Generalized free energy `F_α(ρ, τ_β)`.
pub fn free_energy(state: &BlockDiagonalState, context: &ThermalContext, alpha: Alpha) -> Result<f64> {
    Ok(free_energy_from_divergence(
        context,
        renyi_divergence(state, context, alpha)?,
    ))
}

/// The smoothed state used by the smoothed divergences at order `alpha`:
/// the steep state for `α ≤ 1`, the flattest state above.
pub fn smoothing_witness(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    alpha: Alpha,
    epsilon: f64,
) -> Result<BlockDiagonalState> {
    let alpha = alpha.validate()?;
    let smoothed = if alpha.uses_steep_branch() {
        steep_state(state, context, epsilon)?
    } else {
        flattest_state(state, context, epsilon)?
    };
    Ok(smoothed.result_state)
}

/// `D̂_α^ε(ρ‖τ)`: Rényi divergence of the steep (α ≤ 1) or flattest (α > 1) state.
pub fn smoothed_divergence_new(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    alpha: Alpha,
    epsilon: f64,
) -> Result<f64> {
    let witness = smoothing_witness(state, context, alpha, epsilon)?;
    renyi_divergence(&witness, context, alpha)
}

/// `F̂_α^ε(ρ, τ_β) = β⁻¹ [−ln Z + D̂_α^ε]`.
pub fn smoothed_free_energy(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    alpha: Alpha,
    epsilon: f64,
) -> Result<f64> {
    Ok(free_energy_from_divergence(
        context,
        smoothed_divergence_new(state, context, alpha, epsilon)?,
    ))
}

/// Value of the conventional smoothed divergence and whether it is exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConventionalEstimate {
    pub value: f64,
    /// `true` for `α > 1` (attained by the flattest state). For `α ≤ 1` the
    /// value is a lower bound on the maximum over the ball.
    pub exact: bool,
    pub candidates_evaluated: usize,
}

/// Conventional smoothed divergence: minimum over the ε-ball for `α > 1`
/// (exact, via the flattest state) and maximum over the ball for `α ≤ 1`.
///
/// The maximum has no closed form, so it is bounded from below by the steep
/// state, then up to `budget` candidates: greedy extreme points of the ball
/// first, then seeded random ball members.
pub fn smoothed_divergence_conventional(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    alpha: Alpha,
    epsilon: f64,
    budget: usize,
    seed: u64,
) -> Result<ConventionalEstimate> {
    let alpha = alpha.validate()?;
    if !alpha.uses_steep_branch() {
        return Ok(ConventionalEstimate {
            value: smoothed_divergence_new(state, context, alpha, epsilon)?,
            exact: true,
            candidates_evaluated: 1,
        });
    }
    let mut best = smoothed_divergence_new(state, context, alpha, epsilon)?;
    let mut candidates: Vec<Vec<f64>> = sampling::ball_vertices(state.probabilities(), epsilon);
    candidates.truncate(budget);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while candidates.len() < budget {
        candidates.push(sampling::sample_ball(state.probabilities(), epsilon, &mut rng));
    }
    let tau = context.thermal_weights();
    let values = batch::map(&candidates, |q| renyi_from_terms(&terms_of(q, tau), alpha));
    for v in values {
        if v > best {
            best = v;
        }
    }
    Ok(ConventionalEstimate {
        value: best,
        exact: false,
        candidates_evaluated: candidates.len() + 1,
    })
}

/// Divergences and free energies over an α-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DivergenceProfile {
    pub grid: AlphaGrid,
    pub epsilon: Option<f64>,
    pub d_values: Vec<f64>,
    pub f_values: Vec<f64>,
}

impl DivergenceProfile {
    /// CSV with header `alpha,D_nats,F`; `inf` marks the ∞ order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,D_nats,F\n");
        for ((a, d), f) in self.grid.values().iter().zip(&self.d_values).zip(&self.f_values) {
            out.push_str(&format!("{a},{d:.16e},{f:.16e}\n"));
        }
        out
    }
}

/// Exact (`epsilon = None`) or smoothed divergence profile over `grid`.
pub fn divergence_profile(
    state: &BlockDiagonalState,
    context: &ThermalContext,
    grid: &AlphaGrid,
    epsilon: Option<f64>,
) -> Result<DivergenceProfile> {
    context.check_state(state)?;
    let d_values = match epsilon {
        None => batch::map(grid.values(), |&a| renyi_divergence(state, context, a)),
        Some(eps) => {
            // two smoothed states cover the whole grid
            let steep = steep_state(state, context, eps)?.result_state;
            let flat = flattest_state(state, context, eps)?.result_state;
            batch::map(grid.values(), |&a| {
                let s = if a.uses_steep_branch() { &steep } else { &flat };
                renyi_divergence(s, context, a)
            })
        }
    }
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    let f_values = d_values
        .iter()
        .map(|&d| free_energy_from_divergence(context, d))
        .collect();
    Ok(DivergenceProfile {
        grid: grid.clone(),
        epsilon,
        d_values,
        f_values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_state, EnergySpectrum};

    fn three_level() -> ThermalContext {
        let spectrum = EnergySpectrum::new(vec![0.0, 2f64.ln(), 8f64.ln()]).unwrap();
        ThermalContext::new(spectrum, 1.0).unwrap()
    }

    fn six_level() -> (ThermalContext, BlockDiagonalState) {
        let ctx = ThermalContext::new(EnergySpectrum::trivial(6).unwrap(), 1.0).unwrap();
        let s = make_state(vec![0.3, 0.25, 0.22, 0.1, 0.07, 0.06], ctx.spectrum()).unwrap();
        (ctx, s)
    }

    #[test]
    fn thermal_state_has_zero_divergence() {
        let ctx = three_level();
        for a in AlphaGrid::default().values() {
            let d = renyi_divergence(&ctx.thermal_state(), &ctx, *a).unwrap();
            assert!(d.abs() < 1e-12, "alpha {a}: {d}");
        }
    }

    #[test]
    fn zero_order_of_point_mass() {
        // point mass on the level with exp(beta E) = 8, tau = 1/13
        let ctx = three_level();
        let s = make_state(vec![0.0, 0.0, 1.0], ctx.spectrum()).unwrap();
        let d = renyi_divergence(&s, &ctx, Alpha::ZERO).unwrap();
        assert!((d - 13f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn relative_entropy_and_free_energy() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let d = renyi_divergence(&s, &ctx, Alpha::ONE).unwrap();
        // term-by-term sum
        let tau: [f64; 3] = [8.0 / 13.0, 4.0 / 13.0, 1.0 / 13.0];
        let oracle: f64 = [0.55f64, 0.35, 0.1]
            .iter()
            .zip(tau)
            .map(|(p, t)| p * (p / t).ln())
            .sum();
        assert!((d - oracle).abs() < 1e-14);
        assert!((d - 0.009_546_879_856).abs() < 1e-11);
        let f = free_energy(&s, &ctx, Alpha::ONE).unwrap();
        assert!((f - (-0.475_960_935_925_568_6)).abs() < 1e-12);
        let ft = free_energy(&ctx.thermal_state(), &ctx, Alpha::Finite(2.0)).unwrap();
        assert!((ft + (13f64 / 8.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn negative_alpha_rejected() {
        let ctx = three_level();
        assert!(matches!(
            renyi_divergence(&ctx.thermal_state(), &ctx, Alpha::Finite(-0.5)),
            Err(Error::NegativeAlpha(_))
        ));
        assert!(Alpha::new(-1.0).is_err());
    }

    #[test]
    fn kl_window_is_continuous() {
        let (ctx, s) = six_level();
        let kl = renyi_divergence(&s, &ctx, Alpha::ONE).unwrap();
        for a in [1.0 - 1e-6, 1.0 + 1e-6, 1.0 - 1e-7, 1.0 + 1e-7] {
            let d = renyi_divergence(&s, &ctx, Alpha::Finite(a)).unwrap();
            assert!((d - kl).abs() < 1e-4);
        }
    }

    #[test]
    fn infinity_is_max_log_ratio() {
        let (ctx, s) = six_level();
        let d = renyi_divergence(&s, &ctx, Alpha::Infinity).unwrap();
        assert!((d - (0.3f64 * 6.0).ln()).abs() < 1e-14);
        let d100 = renyi_divergence(&s, &ctx, Alpha::Finite(200.0)).unwrap();
        assert!(d100 <= d + 1e-12 && d - d100 < 0.02);
    }

    #[test]
    fn smoothed_new_examples() {
        let (ctx, s) = six_level();
        let exact = renyi_divergence(&s, &ctx, Alpha::Finite(2.0)).unwrap();
        assert!((smoothed_divergence_new(&s, &ctx, Alpha::Finite(2.0), 0.0).unwrap() - exact).abs() < 1e-14);
        // D2 of the flattest state {0.225,0.225,0.22,0.11,0.11,0.11} against uniform
        let flat: [f64; 6] = [0.225, 0.225, 0.22, 0.11, 0.11, 0.11];
        let oracle = (flat.iter().map(|p| p * p * 6.0).sum::<f64>()).ln();
        let d2 = smoothed_divergence_new(&s, &ctx, Alpha::Finite(2.0), 0.1).unwrap();
        assert!((d2 - oracle).abs() < 1e-12);
        let d0 = smoothed_divergence_new(&s, &ctx, Alpha::ZERO, 0.1).unwrap();
        assert!((d0 + (5f64 / 6.0).ln()).abs() < 1e-12);
    }

    #[test]
    fn smoothed_free_energy_examples() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let f = free_energy(&s, &ctx, Alpha::ONE).unwrap();
        assert_eq!(smoothed_free_energy(&s, &ctx, Alpha::ONE, 0.0).unwrap(), f);
        // alpha = 1 belongs to the steep branch
        let steep = steep_state(&s, &ctx, 0.05).unwrap().result_state;
        let expect = free_energy(&steep, &ctx, Alpha::ONE).unwrap();
        assert_eq!(smoothed_free_energy(&s, &ctx, Alpha::ONE, 0.05).unwrap(), expect);
        let t = smoothed_free_energy(&ctx.thermal_state(), &ctx, Alpha::Finite(3.0), 0.2).unwrap();
        assert!((t + ctx.ln_partition_function()).abs() < 1e-12);
    }

    #[test]
    fn conventional_matches_new_above_one() {
        let (ctx, s) = six_level();
        let c = smoothed_divergence_conventional(&s, &ctx, Alpha::Finite(2.0), 0.1, 10, 1).unwrap();
        assert!(c.exact);
        assert_eq!(c.value, smoothed_divergence_new(&s, &ctx, Alpha::Finite(2.0), 0.1).unwrap());
        let z = smoothed_divergence_conventional(&s, &ctx, Alpha::Finite(0.5), 0.1, 0, 1).unwrap();
        assert!(!z.exact);
        assert_eq!(z.value, smoothed_divergence_new(&s, &ctx, Alpha::Finite(0.5), 0.1).unwrap());
    }

    #[test]
    fn conventional_exceeds_steep_on_counterexample() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let c = smoothed_divergence_conventional(&s, &ctx, Alpha::ONE, 0.45, 200, 7).unwrap();
        let tilde = make_state(vec![0.45, 0.0, 0.55], ctx.spectrum()).unwrap();
        let d_tilde = renyi_divergence(&tilde, &ctx, Alpha::ONE).unwrap();
        let steep = smoothed_divergence_new(&s, &ctx, Alpha::ONE, 0.45).unwrap();
        assert!(c.value >= d_tilde - 1e-12);
        assert!(c.value >= steep);
    }

    #[test]
    fn grid_contains_limits() {
        let g = AlphaGrid::parse("0.5, 2").unwrap();
        assert_eq!(g.values().first(), Some(&Alpha::ZERO));
        assert!(g.values().contains(&Alpha::ONE));
        assert_eq!(g.values().last(), Some(&Alpha::Infinity));
        assert_eq!(g.len(), 5);
        assert_eq!(AlphaGrid::default().len(), 18);
        assert!(AlphaGrid::parse("-1").is_err());
        assert!(AlphaGrid::with_density(4).len() > 18);
    }

    #[test]
    fn profile_is_monotone_and_csv() {
        let (ctx, s) = six_level();
        let prof = divergence_profile(&s, &ctx, &AlphaGrid::default(), None).unwrap();
        assert!(prof.d_values.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let t = divergence_profile(&ctx.thermal_state(), &ctx, &AlphaGrid::default(), None).unwrap();
        assert!(t.d_values.iter().all(|d| d.abs() < 1e-12));
        let csv = prof.to_csv();
        assert!(csv.starts_with("alpha,D_nats,F\n"));
        assert!(csv.lines().last().unwrap().starts_with("inf,"));
    }

    #[test]
    fn alpha_serde_round_trip() {
        let v = serde_json::to_string(&vec![Alpha::Finite(0.5), Alpha::Infinity]).unwrap();
        assert_eq!(v, "[0.5,\"inf\"]");
        let back: Vec<Alpha> = serde_json::from_str(&v).unwrap();
        assert_eq!(back, vec![Alpha::Finite(0.5), Alpha::Infinity]);
    }
}
