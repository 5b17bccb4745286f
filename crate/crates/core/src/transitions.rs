//! Feasibility verdicts for transitions between block-diagonal states.
//!
//! Grid checks compare free energies `F_α(ρ) − F_α(σ)` over an α-grid and
//! can only certify catalytic feasibility on that grid. The curve check
//! ([`check_to_exact`]) is exact for thermal operations.
//!
//! Margin rule used everywhere: smallest margin `< −tol` is infeasible,
//! `[−tol, 0)` is inconclusive, `≥ 0` is feasible.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::batch;
use crate::curves::{curve_dominates, curve_of, DEFAULT_DOMINATION_TOL};
use crate::divergences::{free_energy, smoothed_free_energy, Alpha, AlphaGrid};
use crate::error::{Error, Result};
use crate::smoothing::{flattest_state, steep_state};
use crate::state::{BlockDiagonalState, ThermalContext};

pub const DEFAULT_MARGIN_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Thermo-majorization verified on curves.
    FeasibleTo,
    /// Every grid margin is nonnegative.
    FeasibleCtoGrid,
    InfeasibleWitness,
    Inconclusive,
}

impl Verdict {
    pub fn is_feasible(self) -> bool {
        matches!(self, Verdict::FeasibleTo | Verdict::FeasibleCtoGrid)
    }

    /// Process exit code: 0 feasible, 2 infeasible, 3 inconclusive.
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::FeasibleTo | Verdict::FeasibleCtoGrid => 0,
            Verdict::InfeasibleWitness => 2,
            Verdict::Inconclusive => 3,
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::FeasibleTo => "feasible-to",
            Verdict::FeasibleCtoGrid => "feasible-cto-grid",
            Verdict::InfeasibleWitness => "infeasible-witness",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaMargin {
    pub alpha: Alpha,
    /// Free-energy margin `F(ρ) − F(σ)`.
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionReport {
    pub verdict: Verdict,
    pub per_alpha_margins: Vec<AlphaMargin>,
    pub binding_alpha: Option<Alpha>,
    /// Abscissa of the worst curve-domination failure.
    pub curve_witness: Option<f64>,
    /// Smallest `c_upper − c_lower` on the union kinks, when a curve check ran.
    pub curve_min_gap: Option<f64>,
    pub epsilons: Option<(f64, f64)>,
    /// Verdict of the grid comparison alone (smoothed or exact).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid_verdict: Option<Verdict>,
    /// Orders where the exact condition fails but the smoothed one holds.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rescued_alphas: Vec<Alpha>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl TransitionReport {
    pub fn min_margin(&self) -> Option<f64> {
        self.per_alpha_margins.iter().map(|m| m.margin).reduce(f64::min)
    }
}

fn same_dimension(rho: &BlockDiagonalState, sigma: &BlockDiagonalState, context: &ThermalContext) -> Result<()> {
    if rho.len() != sigma.len() {
        return Err(Error::LengthMismatch {
            expected: rho.len(),
            actual: sigma.len(),
        });
    }
    context.check_state(rho)?;
    context.check_state(sigma)
}

fn margin_verdict(margins: &[AlphaMargin], tol: f64) -> (Verdict, Option<Alpha>) {
    let binding = margins
        .iter()
        .copied()
        .reduce(|a, b| if b.margin < a.margin { b } else { a });
    let verdict = match binding {
        None => Verdict::Inconclusive,
        Some(b) if b.margin < -tol => Verdict::InfeasibleWitness,
        Some(b) if b.margin < 0.0 => Verdict::Inconclusive,
        Some(_) => Verdict::FeasibleCtoGrid,
    };
    (verdict, binding.map(|b| b.alpha))
}

fn margins_with<F>(grid: &AlphaGrid, f: F) -> Result<Vec<AlphaMargin>>
where
    F: Fn(Alpha) -> Result<f64> + Sync + Send,
{
    batch::map(grid.values(), |&alpha| f(alpha).map(|margin| AlphaMargin { alpha, margin }))
        .into_iter()
        .collect()
}

/// Exact second laws `F_α(ρ) ≥ F_α(σ)` on `grid`, with the default tolerance.
pub fn check_exact_second_laws(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    grid: &AlphaGrid,
) -> Result<TransitionReport> {
    check_exact_second_laws_tol(rho, sigma, context, grid, DEFAULT_MARGIN_TOL)
}

pub fn check_exact_second_laws_tol(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    grid: &AlphaGrid,
    tol: f64,
) -> Result<TransitionReport> {
    same_dimension(rho, sigma, context)?;
    let margins = margins_with(grid, |a| Ok(free_energy(rho, context, a)? - free_energy(sigma, context, a)?))?;
    let (verdict, binding_alpha) = margin_verdict(&margins, tol);
    Ok(TransitionReport {
        verdict,
        per_alpha_margins: margins,
        binding_alpha,
        curve_witness: None,
        curve_min_gap: None,
        epsilons: None,
        grid_verdict: Some(verdict),
        rescued_alphas: Vec::new(),
        notes: Vec::new(),
    })
}

/// Thermo-majorization of `sigma` by `rho` on the curves (no α-grid).
///
/// An infeasible verdict carries the curve witness instead of margins.
pub fn check_to_exact(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
) -> Result<TransitionReport> {
    check_to_exact_tol(rho, sigma, context, DEFAULT_DOMINATION_TOL)
}

pub fn check_to_exact_tol(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    tol: f64,
) -> Result<TransitionReport> {
    same_dimension(rho, sigma, context)?;
    let dom = curve_dominates(&curve_of(rho, context)?, &curve_of(sigma, context)?, tol);
    Ok(TransitionReport {
        verdict: if dom.holds {
            Verdict::FeasibleTo
        } else {
            Verdict::InfeasibleWitness
        },
        per_alpha_margins: Vec::new(),
        binding_alpha: None,
        curve_witness: dom.witness,
        curve_min_gap: Some(dom.min_gap),
        epsilons: None,
        grid_verdict: None,
        rescued_alphas: Vec::new(),
        notes: Vec::new(),
    })
}

/// Smoothed condition `F̂_α^{ε₁}(ρ) ≥ F̂_α^{ε₂}(σ)` on `grid`, together
/// with the direct curve check of `steep^{ε₁}(ρ)` against `flattest^{ε₂}(σ)`.
///
/// A passing direct check gives [`Verdict::FeasibleTo`]. A grid pass whose
/// direct check fails is reported as inconclusive (note
/// `inconclusive-cto`); a failing grid gives [`Verdict::InfeasibleWitness`],
/// meaning the sufficient condition does not hold.
pub fn check_theorem1(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    eps1: f64,
    eps2: f64,
    grid: &AlphaGrid,
) -> Result<TransitionReport> {
    check_theorem1_tol(rho, sigma, context, eps1, eps2, grid, DEFAULT_MARGIN_TOL)
}

pub fn check_theorem1_tol(
    rho: &BlockDiagonalState,
    sigma: &BlockDiagonalState,
    context: &ThermalContext,
    eps1: f64,
    eps2: f64,
    grid: &AlphaGrid,
    tol: f64,
) -> Result<TransitionReport> {
    same_dimension(rho, sigma, context)?;
    for e in [eps1, eps2] {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::InvalidEpsilon(e));
        }
    }
    let margins = margins_with(grid, |a| {
        Ok(smoothed_free_energy(rho, context, a, eps1)? - smoothed_free_energy(sigma, context, a, eps2)?)
    })?;
    let (grid_verdict, binding_alpha) = margin_verdict(&margins, tol);

    let exact = margins_with(grid, |a| Ok(free_energy(rho, context, a)? - free_energy(sigma, context, a)?))?;
    let rescued_alphas: Vec<Alpha> = exact
        .iter()
        .zip(&margins)
        .filter(|(e, s)| e.margin < -tol && s.margin >= -tol)
        .map(|(e, _)| e.alpha)
        .collect();

    let steep = steep_state(rho, context, eps1)?.result_state;
    let flat = flattest_state(sigma, context, eps2)?.result_state;
    let direct = check_to_exact_tol(&steep, &flat, context, tol)?;

    let mut notes = Vec::new();
    let verdict = match (direct.verdict, grid_verdict) {
        (Verdict::FeasibleTo, _) => Verdict::FeasibleTo,
        (_, Verdict::InfeasibleWitness) => Verdict::InfeasibleWitness,
        (_, Verdict::FeasibleCtoGrid) => {
            notes.push("inconclusive-cto: grid condition holds but steep does not thermo-majorize flattest".into());
            Verdict::Inconclusive
        }
        _ => Verdict::Inconclusive,
    };
    Ok(TransitionReport {
        verdict,
        per_alpha_margins: margins,
        binding_alpha,
        curve_witness: direct.curve_witness,
        curve_min_gap: direct.curve_min_gap,
        epsilons: Some((eps1, eps2)),
        grid_verdict: Some(grid_verdict),
        rescued_alphas,
        notes,
    })
}

/// Trace-distance bound `ε₁ + ε₂` between the channel output on the
/// unsmoothed input and the target. May exceed 1; see [`output_bound_report`].
pub fn approximate_output_bound(eps1: f64, eps2: f64) -> f64 {
    eps1 + eps2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputBound {
    pub raw: f64,
    /// `min(raw, 1)`: trace distances never exceed 1.
    pub reported: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

pub fn output_bound_report(eps1: f64, eps2: f64) -> OutputBound {
    let raw = approximate_output_bound(eps1, eps2);
    OutputBound {
        raw,
        reported: raw.min(1.0),
        note: (raw > 1.0).then(|| format!("bound {raw} clamped to 1 (trace distance is at most 1)")),
    }
}
