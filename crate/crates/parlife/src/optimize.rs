//! Optimal participation and guarantee rates, the implicit derivatives of
//! the barrier, and the tax threshold below which participation does not
//! pay.
//!
//! The optimizers maximize the firm value directly (grid plus golden-section
//! search) and report the first-order condition at the optimum as a check.

use rayon::prelude::*;

use crate::barrier::{delta_time_integrals, pasting_coefficients, residual_slope_with, solve_vb_value, SolveMethod};
use crate::error::{Error, Result};
use crate::integrals::{cdo_dvb_integrals, cdo_integrals};
use crate::math::lambdas;
use crate::params::Scenario;
use crate::quad::TOL_DEFAULT;
use crate::valuation::firm_value_tol;

/// Points of the coarse grid preceding the golden-section refinement.
pub const GRID_POINTS: usize = 64;
/// Width at which golden-section search stops.
pub const ARG_TOL: f64 = 1e-5;
/// Margin kept below `alpha_bar` and `alpha_tilde`.
pub const ALPHA_BAR_MARGIN: f64 = 1e-6;
/// Optima above this value count as positive.
pub const POSITIVE_THRESHOLD: f64 = 1e-4;

/// Maximizer of the firm value over one rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimumResult {
    /// Optimal rate: `alpha`, or the per-cohort guarantee rate `g`.
    pub arg: f64,
    /// Firm value at the optimum.
    pub objective: f64,
    /// Barrier at the optimum.
    pub vb: f64,
    /// Derivative of the firm value at an interior optimum.
    pub foc_residual: Option<f64>,
    /// True when the optimum sits at an end of the bracket.
    pub boundary_flag: bool,
    /// Search interval.
    pub bracket: (f64, f64),
}

impl OptimumResult {
    pub fn is_positive(&self) -> bool {
        self.arg > POSITIVE_THRESHOLD
    }
}

/// Result of the alternating optimization over both rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointOptimum {
    pub alpha: OptimumResult,
    pub g: OptimumResult,
    /// The scenario with both optimal rates applied.
    pub scenario: Scenario,
    pub objective: f64,
    pub vb: f64,
    pub rounds: usize,
    pub converged: bool,
}

/// Each rate optimized with the other one held at its scenario value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparateOptima {
    pub alpha: OptimumResult,
    pub g: OptimumResult,
    /// The scenario with both optimal rates applied.
    pub scenario: Scenario,
    /// Barrier at the combined rates.
    pub vb: f64,
}

/// Tax threshold on participation payments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TauBar {
    /// Smallest `tau2` at which `dv/dalpha` at `alpha = 0` is positive, or
    /// `None` when it stays nonpositive up to 1.
    pub tau: Option<f64>,
    pub derivative_at_zero: f64,
    pub derivative_at_one: f64,
}

/// Firm value with the barrier solved for the scenario's rates.
pub fn objective(s: &Scenario, tol: f64) -> Result<(f64, f64)> {
    let (vb, _) = solve_vb_value(s)?;
    Ok((firm_value_tol(s, vb, tol)?.firm_value, vb))
}

fn degenerate(slope: f64, what: &str) -> Result<()> {
    if slope == 0.0 || !slope.is_finite() {
        return Err(Error::Degenerate(format!("residual slope {slope} in {what}")));
    }
    Ok(())
}

/// `V_B'(alpha) = (int_0^T D - tau2 int_0^inf D) / (dh2/dvb)`.
pub fn vb_prime_alpha(s: &Scenario, vb: f64) -> Result<f64> {
    let pc = pasting_coefficients(s);
    let j = delta_time_integrals(s, vb, &pc.a, TOL_DEFAULT)?;
    let slope = residual_slope_with(s, &pc, vb, TOL_DEFAULT)?;
    degenerate(slope, "V_B'(alpha)")?;
    Ok((j.finite - s.frictions.tau2 * j.perpetual) / slope)
}

/// `V_B'(g) = (T/(vb r))(-2 A1/(rT) + 2 A2 - tau1 (lambda2 + lambda3)) / (dh2/dvb)`.
pub fn vb_prime_g(s: &Scenario, vb: f64) -> Result<f64> {
    let pc = pasting_coefficients(s);
    let slope = residual_slope_with(s, &pc, vb, TOL_DEFAULT)?;
    degenerate(slope, "V_B'(g)")?;
    let (r, t) = (s.market.r, s.contract.t_mat);
    let e = lambdas(&s.market).exponent();
    let num = t / (vb * r) * (-2.0 * pc.a.a1 / (r * t) + 2.0 * pc.a.a2 - s.frictions.tau1 * e);
    Ok(num / slope)
}

/// Total derivative of the firm value in `alpha`, with the barrier moving
/// along `V_B(alpha)`. Zero once the firm is bankrupt at once.
pub fn dv_dalpha(s: &Scenario, vb: f64) -> Result<f64> {
    if vb >= s.v0 {
        return Ok(0.0);
    }
    let vbp = vb_prime_alpha(s, vb)?;
    let m = &s.market;
    let (v, k, t) = (s.v0, s.contract.k, s.contract.t_mat);
    let e = lambdas(m).exponent();
    let x_e = (vb / v).powf(e);
    let gr = s.contract.g_total / m.r;
    let fr = &s.frictions;
    let cdo = cdo_integrals(m, v, k, vb, t, TOL_DEFAULT)?;
    let cdo_vb = cdo_dvb_integrals(m, v, k, vb, t, TOL_DEFAULT)?;
    Ok(-vbp * x_e * (fr.tau1 * gr * e / vb + fr.rho * (e + 1.0))
        + fr.tau2 * cdo.perpetual
        + s.contract.alpha * fr.tau2 * cdo_vb.perpetual * vbp)
}

/// Total derivative of the firm value in the per-cohort guarantee rate `g`.
pub fn dv_dg(s: &Scenario, vb: f64) -> Result<f64> {
    if vb >= s.v0 {
        return Ok(0.0);
    }
    let vbp = vb_prime_g(s, vb)?;
    let m = &s.market;
    let (v, k, t) = (s.v0, s.contract.k, s.contract.t_mat);
    let e = lambdas(m).exponent();
    let x = vb / v;
    let fr = &s.frictions;
    let g = s.contract.g_rate();
    let alpha = s.contract.alpha;
    let participation = if alpha == 0.0 {
        0.0
    } else {
        alpha * fr.tau2 * cdo_dvb_integrals(m, v, k, vb, t, TOL_DEFAULT)?.perpetual * vbp
    };
    Ok(fr.tau1 * t / m.r * (1.0 - x.powf(e)) - fr.tau1 * g * t * e / (v * m.r) * x.powf(e - 1.0) * vbp
        - fr.rho * (e + 1.0) * x.powf(e) * vbp
        + participation)
}

/// Maximizes `f` over `[lo, hi]`: the best of a uniform grid, refined by
/// golden-section search between its neighbors, compared with both ends.
fn maximize<F>(f: F, lo: f64, hi: f64) -> Result<(f64, f64, f64)>
where
    F: Fn(f64) -> Result<(f64, f64)> + Sync,
{
    if hi <= lo {
        let (v, vb) = f(lo)?;
        return Ok((lo, v, vb));
    }
    let n = GRID_POINTS;
    let xs: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    let vals: Vec<(f64, f64)> = xs.par_iter().map(|&x| f(x)).collect::<Result<_>>()?;
    let best = (0..n).fold(0, |b, i| if vals[i].0 > vals[b].0 { i } else { b });
    let mut a = xs[best.saturating_sub(1)];
    let mut b = xs[(best + 1).min(n - 1)];
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while b - a > ARG_TOL {
        if fc.0 >= fd.0 {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    let mut cands = vec![(xs[best], vals[best]), (c, fc), (d, fd), (lo, vals[0]), (hi, vals[n - 1])];
    cands.sort_by(|p, q| q.1 .0.total_cmp(&p.1 .0));
    let (x, (v, vb)) = cands[0];
    Ok((x, v, vb))
}

/// The participation bracket `[0, min(1, alpha_bar - delta, alpha_tilde - delta)]`.
///
/// Below `alpha_bar` equity stays nonnegative; below `alpha_tilde` the
/// smooth-pasting equation has a single root, so the barrier is the one
/// admissible solution.
pub fn alpha_bracket(s: &Scenario) -> (f64, f64) {
    let a = pasting_coefficients(s).a;
    let cap = a.alpha_bar.value().min(a.alpha_tilde.value()) - ALPHA_BAR_MARGIN;
    (0.0, cap.min(1.0).max(0.0))
}

/// Optimal participation rate with the guarantee fixed.
pub fn optimize_alpha(s: &Scenario) -> Result<OptimumResult> {
    optimize_alpha_tol(s, crate::quad::TOL_LOOP)
}

fn optimize_alpha_tol(s: &Scenario, tol: f64) -> Result<OptimumResult> {
    s.validate()?;
    let (lo, hi) = alpha_bracket(s);
    let (arg, objective, vb) = maximize(|a| self::objective(&s.with_alpha(a), tol), lo, hi)?;
    let boundary_flag = arg - lo < ARG_TOL || hi - arg < ARG_TOL;
    let foc_residual = if boundary_flag { None } else { Some(dv_dalpha(&s.with_alpha(arg), vb)?) };
    Ok(OptimumResult { arg, objective, vb, foc_residual, boundary_flag, bracket: (lo, hi) })
}

/// The smallest per-cohort guarantee rate at which the firm is bankrupt at
/// once, found by bisection.
pub fn g_max(s: &Scenario) -> Result<f64> {
    let t = s.contract.t_mat;
    let bankrupt = |g: f64| -> Result<bool> {
        Ok(solve_vb_value(&s.with_g_total(g * t))?.1 == SolveMethod::ImmediateBankruptcy)
    };
    if bankrupt(0.0)? {
        return Ok(0.0);
    }
    let mut hi = 0.05 * s.contract.p_lump / t;
    let mut lo = 0.0;
    while !bankrupt(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 * s.v0 {
            return Err(Error::Solver("no guarantee rate forces immediate bankruptcy".into()));
        }
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if bankrupt(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Optimal per-cohort guarantee rate with the participation rate fixed.
pub fn optimize_g(s: &Scenario) -> Result<OptimumResult> {
    optimize_g_tol(s, crate::quad::TOL_LOOP)
}

fn optimize_g_tol(s: &Scenario, tol: f64) -> Result<OptimumResult> {
    s.validate()?;
    let t = s.contract.t_mat;
    let hi = g_max(s)?;
    // The golden-section width is in units of G/P to match the alpha scale.
    let scale = s.contract.p_lump / t;
    let (x, objective, vb) = maximize(|x| self::objective(&s.with_g_total(x * scale * t), tol), 0.0, hi / scale)?;
    let arg = x * scale;
    let boundary_flag = x < ARG_TOL || hi / scale - x < ARG_TOL;
    let foc_residual = if boundary_flag { None } else { Some(dv_dg(&s.with_g_total(arg * t), vb)?) };
    Ok(OptimumResult { arg, objective, vb, foc_residual, boundary_flag, bracket: (0.0, hi) })
}

/// Alternates `alpha` and `g` optimizations, `alpha` first, until the firm
/// value changes by less than `1e-8 V0` or 50 rounds have run.
pub fn optimize_joint(s: &Scenario) -> Result<JointOptimum> {
    s.validate()?;
    let mut cur = *s;
    let mut last = f64::NEG_INFINITY;
    let mut rounds = 0;
    let mut converged = false;
    let mut pair = None;
    while rounds < 50 {
        rounds += 1;
        let a = optimize_alpha(&cur)?;
        cur = cur.with_alpha(a.arg);
        let g = optimize_g(&cur)?;
        cur = cur.with_g_total(g.arg * cur.contract.t_mat);
        pair = Some((a, g));
        if (g.objective - last).abs() < 1e-8 * s.v0 {
            converged = true;
            break;
        }
        last = g.objective;
    }
    let (alpha, g) = pair.expect("at least one round");
    let (objective, vb) = objective(&cur, TOL_DEFAULT)?;
    let alpha = OptimumResult { foc_residual: refresh_foc(&alpha, || dv_dalpha(&cur, vb))?, ..alpha };
    let g = OptimumResult { foc_residual: refresh_foc(&g, || dv_dg(&cur, vb))?, ..g };
    Ok(JointOptimum { alpha, g, scenario: cur, objective, vb, rounds, converged })
}

/// Optimizes `alpha` at the scenario's guarantee and `g` at the scenario's
/// participation rate, then solves the barrier at the combined rates.
pub fn optimize_separately(s: &Scenario) -> Result<SeparateOptima> {
    let alpha = optimize_alpha(s)?;
    let g = optimize_g(s)?;
    let scenario = s.with_alpha(alpha.arg).with_g_total(g.arg * s.contract.t_mat);
    let (vb, _) = solve_vb_value(&scenario)?;
    Ok(SeparateOptima { alpha, g, scenario, vb })
}

fn refresh_foc(o: &OptimumResult, f: impl Fn() -> Result<f64>) -> Result<Option<f64>> {
    if o.boundary_flag {
        Ok(None)
    } else {
        f().map(Some)
    }
}

/// Bisection on `tau2` for the sign change of `dv/dalpha` at `alpha = 0`,
/// which is affine in `tau2`, to width `1e-4`.
pub fn find_tau_bar(s: &Scenario) -> Result<TauBar> {
    let s0 = s.with_alpha(0.0);
    let (vb, _) = solve_vb_value(&s0)?;
    let d = |tau: f64| dv_dalpha(&s0.with_tau2(tau), vb);
    let derivative_at_zero = d(0.0)?;
    let derivative_at_one = d(1.0)?;
    if derivative_at_one <= 0.0 {
        return Ok(TauBar { tau: None, derivative_at_zero, derivative_at_one });
    }
    if derivative_at_zero > 0.0 {
        return Ok(TauBar { tau: Some(0.0), derivative_at_zero, derivative_at_one });
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if d(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(TauBar { tau: Some(hi), derivative_at_zero, derivative_at_one })
}
