//! Thermo-majorization curves.
//!
//! The curve of a beta-ordered state connects the points
//! `(Σ_{i≤k} τ̂_i, Σ_{i≤k} p̂_i)` for `k = 0..d`, with the x-axis normalized
//! to `[0, 1]`. Comparing two such curves decides reachability by thermal
//! operations for block-diagonal states on the same Hamiltonian.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{beta_order, trace_distance, BetaOrderedState, BlockDiagonalState, ThermalContext, Tolerances};

/// Slack allowed when a query point sits a rounding error outside `[0, 1]`.
const DOMAIN_SLACK: f64 = 1e-12;

/// Default absolute tolerance on y for curve comparisons.
pub const DEFAULT_DOMINATION_TOL: f64 = 1e-9;

/// Piecewise-linear curve stored as its kink points, x strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThermoMajorizationCurve {
    kinks: Vec<(f64, f64)>,
}

impl ThermoMajorizationCurve {
    /// Builds a polyline from consecutive `(Δx, Δy)` segments starting at the origin.
    pub(crate) fn from_segments<I: IntoIterator<Item = (f64, f64)>>(segments: I) -> Self {
        let mut kinks = vec![(0.0, 0.0)];
        let (mut x, mut y) = (0.0, 0.0);
        for (dx, dy) in segments {
            x += dx;
            y += dy;
            kinks.push((x, y));
        }
        Self { kinks }
    }

    pub fn kinks(&self) -> &[(f64, f64)] {
        &self.kinks
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.kinks.iter().map(|k| k.0)
    }

    /// Linear interpolation between the bracketing kinks.
    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(-DOMAIN_SLACK..=1.0 + DOMAIN_SLACK).contains(&x) {
            return Err(Error::OutOfDomain(x));
        }
        Ok(self.value_at(x))
    }

    fn value_at(&self, x: f64) -> f64 {
        let k = &self.kinks;
        let idx = k.partition_point(|&(kx, _)| kx < x);
        if idx == 0 {
            return k[0].1;
        }
        if idx == k.len() {
            return k[k.len() - 1].1;
        }
        let (x1, y1) = k[idx];
        if x1 == x {
            return y1;
        }
        let (x0, y0) = k[idx - 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Segment slopes `Δy / Δx`.
    pub fn slopes(&self) -> Vec<f64> {
        self.kinks
            .windows(2)
            .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
            .collect()
    }

    /// Successive slopes non-increasing up to relative slack `tol`.
    pub fn is_concave(&self, tol: f64) -> bool {
        self.slopes()
            .windows(2)
            .all(|w| w[1] <= w[0] + tol * w[0].abs().max(1.0))
    }

    /// The same curve shifted vertically by `offset` (not clipped).
    pub fn shifted(&self, offset: f64) -> Self {
        Self {
            kinks: self.kinks.iter().map(|&(x, y)| (x, y + offset)).collect(),
        }
    }

    /// Kink CSV with header `x,y`, 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for &(x, y) in &self.kinks {
            out.push_str(&format!("{x:.16e},{y:.16e}\n"));
        }
        out
    }

    /// Kink CSV with the `c ± eps` band columns.
    pub fn to_band_csv(&self, eps: f64) -> String {
        let mut out = String::from("x,y,y_lo,y_hi\n");
        for &(x, y) in &self.kinks {
            out.push_str(&format!(
                "{x:.16e},{y:.16e},{:.16e},{:.16e}\n",
                y - eps,
                y + eps
            ));
        }
        out
    }
}

/// Curve of a beta-ordered state.
pub fn build_curve(ordered: &BetaOrderedState) -> ThermoMajorizationCurve {
    ThermoMajorizationCurve::from_segments(
        ordered
            .ordered_thermal_weights()
            .iter()
            .copied()
            .zip(ordered.ordered_probabilities().iter().copied()),
    )
}

/// Beta-orders `state` and builds its curve.
pub fn curve_of(state: &BlockDiagonalState, context: &ThermalContext) -> Result<ThermoMajorizationCurve> {
    Ok(build_curve(&beta_order(state, context)?))
}

/// The polyline obtained from an arbitrary ordering of the levels.
///
/// `permutation[k]` is the original index placed at position `k`. Without the
/// beta-ordering the result need not be concave.
pub fn build_curve_unordered(
    state: &BlockDiagonalState,
    permutation: &[usize],
    context: &ThermalContext,
) -> Result<ThermoMajorizationCurve> {
    context.check_state(state)?;
    let d = state.len();
    if permutation.len() != d {
        return Err(Error::LengthMismatch {
            expected: d,
            actual: permutation.len(),
        });
    }
    let mut seen = vec![false; d];
    for &i in permutation {
        if i >= d || seen[i] {
            return Err(Error::IndexOutOfRange {
                index: i,
                min: 0,
                max: d - 1,
            });
        }
        seen[i] = true;
    }
    let p = state.probabilities();
    let tau = context.thermal_weights();
    Ok(ThermoMajorizationCurve::from_segments(
        permutation.iter().map(|&i| (tau[i], p[i])),
    ))
}

/// Outcome of a pointwise curve comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dominance {
    pub holds: bool,
    /// Smallest `upper(x) − lower(x)` over the union of kink abscissae.
    pub min_gap: f64,
    /// Abscissa of the worst violation when `holds` is false.
    pub witness: Option<f64>,
}

fn union_xs(a: &ThermoMajorizationCurve, b: &ThermoMajorizationCurve) -> Vec<f64> {
    let mut xs: Vec<f64> = a.xs().chain(b.xs()).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Does `upper` lie above `lower` everywhere (up to `tol`)?
///
/// Checking the union of both kink sets is exact: the difference of two
/// piecewise-linear functions is linear between consecutive union points.
pub fn curve_dominates(
    upper: &ThermoMajorizationCurve,
    lower: &ThermoMajorizationCurve,
    tol: f64,
) -> Dominance {
    let (mut min_gap, mut arg) = (f64::INFINITY, 0.0);
    for x in union_xs(upper, lower) {
        let gap = upper.value_at(x) - lower.value_at(x);
        if gap < min_gap {
            min_gap = gap;
            arg = x;
        }
    }
    let holds = min_gap >= -tol;
    Dominance {
        holds,
        min_gap,
        witness: (!holds).then_some(arg),
    }
}

/// Largest vertical distance between two curves and where it occurs.
pub fn max_deviation(a: &ThermoMajorizationCurve, b: &ThermoMajorizationCurve) -> (f64, f64) {
    union_xs(a, b)
        .into_iter()
        .map(|x| ((a.value_at(x) - b.value_at(x)).abs(), x))
        .fold((0.0, 0.0), |acc, v| if v.0 > acc.0 { v } else { acc })
}

/// Result of checking that a probe curve stays within `c_center ± eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandCheck {
    pub within_band: bool,
    pub max_deviation: f64,
    pub argmax_x: f64,
    pub trace_distance: f64,
}

/// Verifies `c_center − eps ≤ c_probe ≤ c_center + eps` at every union kink.
pub fn epsilon_band_check(
    center: &BlockDiagonalState,
    probe: &BlockDiagonalState,
    eps: f64,
    context: &ThermalContext,
    tol: Tolerances,
) -> Result<BandCheck> {
    context.check_state(center)?;
    context.check_state(probe)?;
    let distance = trace_distance(center, probe)?;
    if distance > eps + tol.norm {
        return Err(Error::NotInBall {
            distance,
            epsilon: eps,
        });
    }
    let c_center = curve_of(center, context)?;
    let c_probe = curve_of(probe, context)?;
    let (max_deviation, argmax_x) = max_deviation(&c_center, &c_probe);
    Ok(BandCheck {
        within_band: max_deviation <= eps + tol.norm,
        max_deviation,
        argmax_x,
        trace_distance: distance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_state, EnergySpectrum};

    fn six_level() -> (ThermalContext, BlockDiagonalState) {
        let ctx = ThermalContext::new(EnergySpectrum::trivial(6).unwrap(), 1.0).unwrap();
        let s = make_state(vec![0.3, 0.25, 0.22, 0.1, 0.07, 0.06], ctx.spectrum()).unwrap();
        (ctx, s)
    }

    fn three_level() -> ThermalContext {
        let spectrum = EnergySpectrum::new(vec![0.0, 2f64.ln(), 8f64.ln()]).unwrap();
        ThermalContext::new(spectrum, 1.0).unwrap()
    }

    #[test]
    fn thermal_curve_is_diagonal() {
        let ctx = three_level();
        let c = curve_of(&ctx.thermal_state(), &ctx).unwrap();
        for &(x, y) in c.kinks() {
            assert!((x - y).abs() < 1e-15);
        }
        assert!((c.evaluate(0.37).unwrap() - 0.37).abs() < 1e-15);
    }

    #[test]
    fn six_level_kinks() {
        let (ctx, s) = six_level();
        let c = curve_of(&s, &ctx).unwrap();
        let ys = [0.0, 0.3, 0.55, 0.77, 0.87, 0.94, 1.0];
        assert_eq!(c.kinks().len(), 7);
        for (k, (&(x, y), ey)) in c.kinks().iter().zip(ys).enumerate() {
            assert!((x - k as f64 / 6.0).abs() < 1e-15);
            assert!((y - ey).abs() < 1e-15);
        }
        assert!((c.evaluate(1.0 / 12.0).unwrap() - 0.15).abs() < 1e-15);
        assert!((c.evaluate(2.0 / 6.0).unwrap() - 0.55).abs() < 1e-15);
        assert!(c.is_concave(1e-12));
    }

    #[test]
    fn three_level_kinks() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let c = curve_of(&s, &ctx).unwrap();
        let xs = [0.0, 1.0 / 13.0, 5.0 / 13.0, 1.0];
        let ys = [0.0, 0.1, 0.45, 1.0];
        for ((&(x, y), ex), ey) in c.kinks().iter().zip(xs).zip(ys) {
            assert!((x - ex).abs() < 1e-15 && (y - ey).abs() < 1e-15);
        }
    }

    #[test]
    fn evaluate_rejects_outside_domain() {
        let (ctx, s) = six_level();
        let c = curve_of(&s, &ctx).unwrap();
        assert!(matches!(c.evaluate(1.5), Err(Error::OutOfDomain(_))));
        assert!(c.evaluate(-0.1).is_err());
        assert_eq!(c.evaluate(0.0).unwrap(), 0.0);
    }

    #[test]
    fn unordered_with_beta_permutation_matches() {
        let ctx = three_level();
        let s = make_state(vec![0.55, 0.35, 0.1], ctx.spectrum()).unwrap();
        let o = beta_order(&s, &ctx).unwrap();
        let a = build_curve(&o);
        let b = build_curve_unordered(&s, o.permutation(), &ctx).unwrap();
        assert_eq!(a, b);
        // reversed ordering lies below and is convex
        let rev: Vec<usize> = o.permutation().iter().rev().copied().collect();
        let r = build_curve_unordered(&s, &rev, &ctx).unwrap();
        assert!(curve_dominates(&a, &r, 1e-12).holds);
        assert!(r.slopes().windows(2).all(|w| w[1] >= w[0]));
        assert!(build_curve_unordered(&s, &[0, 0, 1], &ctx).is_err());
    }

    #[test]
    fn any_permutation_of_thermal_is_diagonal() {
        let ctx = three_level();
        let c = build_curve_unordered(&ctx.thermal_state(), &[2, 0, 1], &ctx).unwrap();
        for &(x, y) in c.kinks() {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn domination_basics() {
        let (ctx, s) = six_level();
        let c = curve_of(&s, &ctx).unwrap();
        let t = curve_of(&ctx.thermal_state(), &ctx).unwrap();
        assert!(curve_dominates(&c, &c, 0.0).holds);
        assert!(curve_dominates(&c, &t, 1e-9).holds);
        let d = curve_dominates(&t, &c, 1e-9);
        assert!(!d.holds);
        assert!(d.witness.is_some());
    }

    #[test]
    fn flattest_does_not_dominate_original() {
        let (ctx, s) = six_level();
        let flat = make_state(vec![0.225, 0.225, 0.22, 0.11, 0.11, 0.11], ctx.spectrum()).unwrap();
        let cf = curve_of(&flat, &ctx).unwrap();
        let c = curve_of(&s, &ctx).unwrap();
        let d = curve_dominates(&cf, &c, 1e-9);
        assert!(!d.holds);
        let w = d.witness.unwrap();
        // worst violation at the end of the cut block, x = 2/6
        assert!(w > 0.0 && w <= 2.0 / 6.0 + 1e-12);
        assert!((d.min_gap + 0.1).abs() < 1e-12);
    }

    #[test]
    fn band_check_examples() {
        let (ctx, s) = six_level();
        let tol = Tolerances::default();
        let same = epsilon_band_check(&s, &s, 0.1, &ctx, tol).unwrap();
        assert_eq!(same.max_deviation, 0.0);
        let flat = make_state(vec![0.225, 0.225, 0.22, 0.11, 0.11, 0.11], ctx.spectrum()).unwrap();
        let b = epsilon_band_check(&s, &flat, 0.1, &ctx, tol).unwrap();
        assert!(b.within_band);
        assert!((b.max_deviation - 0.1).abs() < 1e-12);
        assert!(matches!(
            epsilon_band_check(&s, &flat, 0.05, &ctx, tol),
            Err(Error::NotInBall { .. })
        ));
    }

    #[test]
    fn csv_formats() {
        let ctx = ThermalContext::new(EnergySpectrum::trivial(1).unwrap(), 1.0).unwrap();
        let c = curve_of(&ctx.thermal_state(), &ctx).unwrap();
        let csv = c.to_csv();
        assert_eq!(csv.lines().next(), Some("x,y"));
        assert_eq!(csv.lines().count(), 3);
        assert!(c.to_band_csv(0.1).starts_with("x,y,y_lo,y_hi\n"));
    }
}
