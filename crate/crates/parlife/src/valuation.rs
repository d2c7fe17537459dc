//! Liability, tax benefits, bankruptcy cost, firm value and equity of the
//! insurer for a given bankruptcy barrier.

use crate::closed::{
    discounted_passage, down_and_out_call, first_passage_cdf, passage_functions, BarrierCallInputs,
};
use crate::error::{domain, Result};
use crate::integrals::{cdo_integrals, TimeIntegrals};
use crate::math::lambdas;
use crate::params::Scenario;
use crate::quad::TOL_DEFAULT;

/// Value decomposition of the insurer at asset level `v0` and barrier `vb`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValuationBreakdown {
    pub v0: f64,
    pub vb: f64,
    /// Firm value `v = V + TB1 + TB2 - BC`.
    pub firm_value: f64,
    /// Equity `E = v - L`, defined as 0 at and below the barrier.
    pub equity: f64,
    /// `v - L` from the formulas, present only above the barrier.
    pub equity_raw: Option<f64>,
    /// Total liability value `L`.
    pub l_total: f64,
    /// Tax benefit on guaranteed payments.
    pub tb1: f64,
    /// Tax benefit on participation payments.
    pub tb2: f64,
    /// Bankruptcy cost.
    pub bc: f64,
    /// True when `v0 <= vb`, so the firm is liquidated at once.
    pub bankrupt: bool,
}

/// The four terms of the total liability together with the first-passage
/// averages and call integrals they are built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiabilityParts {
    /// `G/r`, the perpetual guarantee annuity.
    pub guarantee_annuity: f64,
    /// `(P - G/r)((1 - e^{-rT})/(rT) - I1)`.
    pub lump_sum: f64,
    /// `((1 - rho) vb - G/r) I2`.
    pub recovery: f64,
    /// `alpha int_0^T c_do dt`.
    pub participation: f64,
    pub i1: f64,
    pub i2: f64,
    /// Time integrals of `c_do(v0, k, vb, t)`.
    pub cdo: TimeIntegrals,
}

impl LiabilityParts {
    pub fn total(&self) -> f64 {
        self.guarantee_annuity + self.lump_sum + self.recovery + self.participation
    }
}

fn check_barrier(s: &Scenario, vb: f64) -> Result<()> {
    if !(vb >= 0.0 && vb.is_finite()) {
        return Err(domain(format!("barrier must be finite and >= 0, got {vb}")));
    }
    if vb > s.v0 {
        return Err(domain(format!("asset value {} below barrier {vb}", s.v0)));
    }
    Ok(())
}

/// Value at time 0 of the payouts of the cohort maturing at `t`:
/// `g/r + e^{-rt}(p - g/r)(1 - F(t)) + ((1 - rho) vb - g/r) G(t) + alpha c_do(v0, k, vb, t)`.
///
/// The cohort is credited the full recovery value `(1 - rho) vb`, while the
/// total liability credits each cohort the share `1/T` of it. Integrating
/// this function over `(0, T]` therefore exceeds [`total_liability`] by
/// `(1 - rho) vb (T - 1) I2`.
pub fn cohort_liability(s: &Scenario, vb: f64, t: f64) -> Result<f64> {
    check_barrier(s, vb)?;
    if !(t > 0.0 && t <= s.contract.t_mat) {
        return Err(domain(format!("cohort maturity must lie in (0, T], got {t}")));
    }
    let r = s.market.r;
    let g = s.contract.g_rate();
    let p = s.contract.p_rate();
    let (f, gv) = if vb == 0.0 {
        (0.0, 0.0)
    } else {
        (first_passage_cdf(s.v0, vb, t, &s.market)?, discounted_passage(s.v0, vb, t, &s.market)?)
    };
    let cdo = down_and_out_call(&BarrierCallInputs { v: s.v0, k: s.contract.k, vb, t }, &s.market)?;
    let rho = s.frictions.rho;
    Ok(g / r + (-r * t).exp() * (p - g / r) * (1.0 - f) + ((1.0 - rho) * vb - g / r) * gv + s.contract.alpha * cdo)
}

/// Liability terms at `v0 >= vb`, with call integrals to tolerance `tol`.
pub fn liability_parts(s: &Scenario, vb: f64, tol: f64) -> Result<LiabilityParts> {
    check_barrier(s, vb)?;
    let r = s.market.r;
    let t_mat = s.contract.t_mat;
    let gr = s.contract.g_total / r;
    let (i1, i2) = if vb == 0.0 {
        (0.0, 0.0)
    } else {
        let pf = passage_functions(s.v0, vb, t_mat, &s.market)?;
        (pf.i1, pf.i2)
    };
    let cdo = if s.contract.alpha == 0.0 {
        TimeIntegrals { finite: 0.0, perpetual: 0.0 }
    } else {
        cdo_integrals(&s.market, s.v0, s.contract.k, vb, t_mat, tol)?
    };
    let annuity_factor = (1.0 - (-r * t_mat).exp()) / (r * t_mat);
    Ok(LiabilityParts {
        guarantee_annuity: gr,
        lump_sum: (s.contract.p_lump - gr) * (annuity_factor - i1),
        recovery: ((1.0 - s.frictions.rho) * vb - gr) * i2,
        participation: s.contract.alpha * cdo.finite,
        i1,
        i2,
        cdo,
    })
}

/// Total liability value `L` at `v0 >= vb`.
pub fn total_liability(s: &Scenario, vb: f64) -> Result<f64> {
    Ok(liability_parts(s, vb, TOL_DEFAULT)?.total())
}

/// Firm value, equity and their components at the default tolerance.
pub fn firm_value(s: &Scenario, vb: f64) -> Result<ValuationBreakdown> {
    firm_value_tol(s, vb, TOL_DEFAULT)
}

/// Firm value, equity and their components with call integrals to `tol`.
///
/// For `v0 <= vb` the firm is liquidated immediately: `v = L = (1 - rho) v0`
/// and `E = 0`.
pub fn firm_value_tol(s: &Scenario, vb: f64, tol: f64) -> Result<ValuationBreakdown> {
    if !(vb >= 0.0 && vb.is_finite()) {
        return Err(domain(format!("barrier must be finite and >= 0, got {vb}")));
    }
    let v0 = s.v0;
    let rho = s.frictions.rho;
    if v0 <= vb {
        let v = (1.0 - rho) * v0;
        return Ok(ValuationBreakdown {
            v0,
            vb,
            firm_value: v,
            equity: 0.0,
            equity_raw: None,
            l_total: v,
            tb1: 0.0,
            tb2: 0.0,
            bc: rho * v0,
            bankrupt: true,
        });
    }
    formula_breakdown(s, vb, tol)
}

/// Equity `v - L` from the valuation formulas at `v0 >= vb`, including
/// `v0 = vb` where [`firm_value`] reports liquidation instead.
pub fn equity_formula(s: &Scenario, vb: f64, tol: f64) -> Result<f64> {
    check_barrier(s, vb)?;
    Ok(formula_breakdown(s, vb, tol)?.equity)
}

fn formula_breakdown(s: &Scenario, vb: f64, tol: f64) -> Result<ValuationBreakdown> {
    let (v0, rho) = (s.v0, s.frictions.rho);
    let parts = liability_parts(s, vb, tol)?;
    let e = lambdas(&s.market).exponent();
    let hit = if vb == 0.0 { 0.0 } else { (vb / v0).powf(e) };
    let tb1 = s.frictions.tau1 * s.contract.g_total / s.market.r * (1.0 - hit);
    let tb2 = s.frictions.tau2 * s.contract.alpha * parts.cdo.perpetual;
    let bc = rho * vb * hit;
    let firm = v0 + tb1 + tb2 - bc;
    let l_total = parts.total();
    let raw = firm - l_total;
    Ok(ValuationBreakdown {
        v0,
        vb,
        firm_value: firm,
        equity: raw,
        equity_raw: Some(raw),
        l_total,
        tb1,
        tb2,
        bc,
        bankrupt: false,
    })
}

/// Equity `E(V)` for each `V` of the grid, holding the barrier fixed.
pub fn equity_curve(s: &Scenario, vb: f64, v_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    v_grid
        .iter()
        .map(|&v| Ok((v, firm_value(&s.with_v0(v), vb)?.equity)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::integrate_finite;

    fn base() -> Scenario {
        Scenario::base()
    }

    #[test]
    fn cohort_lump_sum_only() {
        let s = base().with_alpha(0.0).with_g_total(0.0);
        let s = Scenario { frictions: crate::params::FrictionParams { rho: 1.0, ..s.frictions }, ..s };
        let (vb, t) = (40.0, 12.0);
        let f = first_passage_cdf(s.v0, vb, t, &s.market).unwrap();
        let expect = (-s.market.r * t).exp() * s.contract.p_rate() * (1.0 - f);
        assert!((cohort_liability(&s, vb, t).unwrap() - expect).abs() < 1e-13);
    }

    #[test]
    fn cohort_without_default_risk() {
        let s = base().with_alpha(0.0);
        let (g, p, r, t) = (s.contract.g_rate(), s.contract.p_rate(), s.market.r, 7.0);
        let expect = g / r + (-r * t).exp() * (p - g / r);
        assert!((cohort_liability(&s, 0.0, t).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn total_liability_integrates_cohorts() {
        for s in [base(), base().with_k(80.0).with_alpha(0.3)] {
            let vb = 45.36;
            let parts = liability_parts(&s, vb, 1e-11).unwrap();
            let l = parts.total();
            let t_mat = s.contract.t_mat;
            let q = integrate_finite(|t| cohort_liability(&s, vb, t).unwrap(), 0.0, t_mat, 1e-10)
                .unwrap()
                .value;
            let recovery_excess = (1.0 - s.frictions.rho) * vb * (t_mat - 1.0) * parts.i2;
            assert!((l - (q - recovery_excess)).abs() < 1e-6 * l.abs(), "{l} vs {q}");
        }
    }

    #[test]
    fn riskless_lump_sums() {
        let s = base().with_alpha(0.0).with_g_total(0.0);
        let (r, t) = (s.market.r, s.contract.t_mat);
        let expect = s.contract.p_lump * (1.0 - (-r * t).exp()) / (r * t);
        assert!((total_liability(&s, 0.0).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn breakdown_identities_and_limits() {
        let s = base();
        let b = firm_value(&s, 45.0).unwrap();
        assert_eq!(b.firm_value, s.v0 + b.tb1 + b.tb2 - b.bc);
        assert_eq!(b.equity, b.firm_value - b.l_total);
        assert!(b.tb1 >= 0.0 && b.tb2 >= 0.0 && b.bc >= 0.0);

        let z = firm_value(&s, 0.0).unwrap();
        assert_eq!(z.bc, 0.0);
        assert!((z.tb1 - s.frictions.tau1 * s.contract.g_total / s.market.r).abs() < 1e-12);
        assert_eq!(firm_value(&s.with_alpha(0.0), 45.0).unwrap().tb2, 0.0);
    }

    #[test]
    fn equity_vanishes_at_the_barrier() {
        let s = base();
        for vb in [30.0, 45.36, 99.0] {
            let at = firm_value(&s.with_v0(vb), vb).unwrap();
            assert!(at.bankrupt && at.equity == 0.0);
            // Approaching from above, the formula value tends to zero.
            let near = firm_value(&s.with_v0(vb * (1.0 + 1e-10)), vb).unwrap();
            assert!(near.equity.abs() < 1e-7 * s.v0, "{}", near.equity);
            assert!((near.l_total - (1.0 - s.frictions.rho) * vb).abs() < 1e-6);
        }
    }

    #[test]
    fn below_barrier_is_liquidation() {
        let s = base().with_v0(40.0);
        let b = firm_value(&s, 45.0).unwrap();
        assert_eq!(b.equity, 0.0);
        assert!(b.equity_raw.is_none());
        assert!((b.firm_value - 20.0).abs() < 1e-12 && (b.l_total - 20.0).abs() < 1e-12);
    }

    #[test]
    fn equity_increasing_without_participation() {
        let s = base().with_alpha(0.0);
        let grid: Vec<f64> = (0..40).map(|i| 46.0 + 4.0 * i as f64).collect();
        let curve = equity_curve(&s, 45.0, &grid).unwrap();
        assert!(curve.windows(2).all(|w| w[1].1 >= w[0].1));
    }
}
