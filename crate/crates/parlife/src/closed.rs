//! Closed-form valuation primitives: first-passage laws of the asset value,
//! the vanilla and down-and-out calls, and their derivatives.
//!
//! Power factors such as `(vb/v)^{2 lambda1}` are always combined with the
//! normal CDF or density they multiply and evaluated in log space.

use crate::error::{domain, Result};
use crate::math::{lambdas, norm_cdf, norm_pdf, pow_cdf, pow_pdf, AConstants, LambdaSet};
use crate::params::MarketParams;

/// Inputs of a down-and-out call on the asset value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierCallInputs {
    /// Current asset value.
    pub v: f64,
    /// Strike, the participation threshold.
    pub k: f64,
    /// Knock-out barrier.
    pub vb: f64,
    /// Maturity.
    pub t: f64,
}

impl BarrierCallInputs {
    fn validate(&self) -> Result<()> {
        if !(self.v > 0.0 && self.v.is_finite()) {
            return Err(domain(format!("asset value must be > 0, got {}", self.v)));
        }
        if !(self.k >= 0.0 && self.vb >= 0.0) {
            return Err(domain(format!("k and vb must be >= 0, got k={} vb={}", self.k, self.vb)));
        }
        if self.vb > self.v {
            return Err(domain(format!("option already knocked out: vb={} > v={}", self.vb, self.v)));
        }
        if !(self.t > 0.0) {
            return Err(domain(format!("maturity must be > 0, got {}", self.t)));
        }
        Ok(())
    }
}

/// First-passage quantities of the asset value at a horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PassageFunctions {
    /// Probability that the barrier is hit before the horizon.
    pub f_cdf: f64,
    /// Discounted first-passage mass `E[e^{-r tau} 1{tau <= t}]`.
    pub g_disc: f64,
    /// `(1/T) int_0^T e^{-rt} F(t) dt`.
    pub i1: f64,
    /// `(1/T) int_0^T G(t) dt`.
    pub i2: f64,
}

fn check_passage(v: f64, vb: f64, t: f64) -> Result<()> {
    if !(vb > 0.0) {
        return Err(domain(format!("barrier must be > 0, got {vb}")));
    }
    if !(v >= vb) {
        return Err(domain(format!("asset value {v} below barrier {vb}")));
    }
    if !(t > 0.0) {
        return Err(domain(format!("horizon must be > 0, got {t}")));
    }
    Ok(())
}

/// Precomputed pieces shared by the formulas of one market.
struct Ctx {
    m: MarketParams,
    lam: LambdaSet,
}

impl Ctx {
    fn new(m: &MarketParams) -> Self {
        Self { m: *m, lam: lambdas(m) }
    }

    fn sig_sqrt(&self, t: f64) -> f64 {
        self.m.sigma * t.sqrt()
    }

    /// `d1(x, t)` and `d2(x, t)` from `ln x`.
    fn d12(&self, ln_x: f64, t: f64) -> (f64, f64) {
        let s2 = self.m.sigma * self.m.sigma;
        let st = self.sig_sqrt(t);
        let d1 = (ln_x + self.lam.lambda1 * s2 * t) / st;
        (d1, d1 - st)
    }

    fn f_cdf(&self, ln_ratio: f64, t: f64) -> f64 {
        // ln_ratio = ln(v/vb) >= 0
        let s2 = self.m.sigma * self.m.sigma;
        let st = self.sig_sqrt(t);
        let l2 = self.lam.lambda2;
        let d3 = (ln_ratio + l2 * s2 * t) / st;
        let d4 = (ln_ratio - l2 * s2 * t) / st;
        (norm_cdf(-d3) + pow_cdf(-ln_ratio, 2.0 * l2, -d4)).min(1.0)
    }

    /// `(vb/v)^{l2-l3} Phi(-d5)` and `(vb/v)^{l2+l3} Phi(-d6)` with `d5, d6`.
    fn g_parts(&self, ln_ratio: f64, t: f64) -> (f64, f64, f64, f64) {
        let s2 = self.m.sigma * self.m.sigma;
        let st = self.sig_sqrt(t);
        let LambdaSet { lambda2: l2, lambda3: l3, .. } = self.lam;
        let d5 = (ln_ratio + l3 * s2 * t) / st;
        let d6 = (ln_ratio - l3 * s2 * t) / st;
        let p5 = pow_cdf(-ln_ratio, l2 - l3, -d5);
        let p6 = pow_cdf(-ln_ratio, l2 + l3, -d6);
        (p5, p6, d5, d6)
    }

    fn vanilla(&self, v: f64, k: f64, t: f64) -> f64 {
        let MarketParams { r, nu, .. } = self.m;
        if k == 0.0 {
            return v * (-nu * t).exp();
        }
        let (d1, d2) = self.d12((v / k).ln(), t);
        (v * (-nu * t).exp() * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)).max(0.0)
    }

    fn down_and_out(&self, p: &BarrierCallInputs) -> f64 {
        let BarrierCallInputs { v, k, vb, t } = *p;
        if vb == 0.0 {
            return self.vanilla(v, k, t);
        }
        let MarketParams { r, nu, .. } = self.m;
        let l1 = self.lam.lambda1;
        let ev = v * (-nu * t).exp();
        let ek = k * (-r * t).exp();
        let ln_ratio = (vb / v).ln();
        let value = if vb <= k {
            let ln_x = 2.0 * vb.ln() - v.ln() - k.ln();
            let (e1, e2) = self.d12(ln_x, t);
            self.vanilla(v, k, t) - ev * pow_cdf(ln_ratio, 2.0 * l1, e1)
                + ek * pow_cdf(ln_ratio, 2.0 * l1 - 2.0, e2)
        } else {
            let (d1, d2) = self.d12(-ln_ratio, t);
            let (e1, e2) = self.d12(ln_ratio, t);
            ev * norm_cdf(d1) - ek * norm_cdf(d2) - ev * pow_cdf(ln_ratio, 2.0 * l1, e1)
                + ek * pow_cdf(ln_ratio, 2.0 * l1 - 2.0, e2)
        };
        value.max(0.0)
    }

    fn dcdo_dv(&self, p: &BarrierCallInputs) -> f64 {
        let BarrierCallInputs { v, k, vb, t } = *p;
        let MarketParams { r, nu, .. } = self.m;
        let l1 = self.lam.lambda1;
        let st = self.sig_sqrt(t);
        let env = (-nu * t).exp();
        let ekr = k * (-r * t).exp();
        // Unreflected part: argument V/k below the threshold, V/vb above it.
        let ln_first = if vb <= k {
            if k == 0.0 {
                f64::INFINITY
            } else {
                (v / k).ln()
            }
        } else {
            (v / vb).ln()
        };
        let (d1, d2) = self.d12(ln_first, t);
        let mut out = env * norm_cdf(d1);
        if ln_first.is_finite() {
            out += env * norm_pdf(d1) / st - ekr * norm_pdf(d2) / (st * v);
        }
        if vb == 0.0 {
            return out;
        }
        let ln_ratio = (vb / v).ln();
        let ln_refl = if vb <= k { 2.0 * vb.ln() - v.ln() - k.ln() } else { ln_ratio };
        let (e1, e2) = self.d12(ln_refl, t);
        out += -(1.0 - 2.0 * l1) * env * pow_cdf(ln_ratio, 2.0 * l1, e1)
            + env * pow_pdf(ln_ratio, 2.0 * l1, e1) / st
            + (2.0 - 2.0 * l1) * (ekr / v) * pow_cdf(ln_ratio, 2.0 * l1 - 2.0, e2)
            - ekr * pow_pdf(ln_ratio, 2.0 * l1 - 2.0, e2) / (st * v);
        out
    }

    fn dcdo_dvb(&self, p: &BarrierCallInputs) -> f64 {
        let BarrierCallInputs { v, k, vb, t } = *p;
        if vb == 0.0 {
            return 0.0;
        }
        let MarketParams { r, nu, .. } = self.m;
        let l1 = self.lam.lambda1;
        let st = self.sig_sqrt(t);
        let env = (-nu * t).exp();
        let ekr = k * (-r * t).exp();
        let ln_ratio = (vb / v).ln();
        if vb <= k {
            let ln_x = 2.0 * vb.ln() - v.ln() - k.ln();
            let (e1, e2) = self.d12(ln_x, t);
            -env * 2.0 * l1 * pow_cdf(ln_ratio, 2.0 * l1 - 1.0, e1)
                - v * env * pow_pdf(ln_ratio, 2.0 * l1, e1) * 2.0 / (st * vb)
                + (k / v) * (-r * t).exp() * (2.0 * l1 - 2.0) * pow_cdf(ln_ratio, 2.0 * l1 - 3.0, e2)
                + ekr * pow_pdf(ln_ratio, 2.0 * l1 - 2.0, e2) * 2.0 / (st * vb)
        } else {
            let (d1, d2) = self.d12(-ln_ratio, t);
            let (e1, e2) = self.d12(ln_ratio, t);
            -v * env * norm_pdf(d1) / (st * vb) + ekr * norm_pdf(d2) / (st * vb)
                - env * 2.0 * l1 * pow_cdf(ln_ratio, 2.0 * l1 - 1.0, e1)
                - v * env * pow_pdf(ln_ratio, 2.0 * l1, e1) / (st * vb)
                + (k / v) * (-r * t).exp() * (2.0 * l1 - 2.0) * pow_cdf(ln_ratio, 2.0 * l1 - 3.0, e2)
                + ekr * pow_pdf(ln_ratio, 2.0 * l1 - 2.0, e2) / (st * vb)
        }
    }

    /// `ln min(vb/k, 1)`, with `k = 0` mapped to the upper branch.
    fn ln_m(vb: f64, k: f64) -> f64 {
        if k == 0.0 {
            0.0
        } else {
            (vb / k).ln().min(0.0)
        }
    }

    fn barrier_delta(&self, vb: f64, k: f64, t: f64) -> f64 {
        let MarketParams { r, nu, .. } = self.m;
        let LambdaSet { lambda1: l1, lambda2: l2, .. } = self.lam;
        if t < 1e-12 && vb < k {
            return 0.0;
        }
        let st = self.sig_sqrt(t);
        let (d1, d2) = self.d12(Self::ln_m(vb, k), t);
        let first = 2.0 * (-nu * t).exp() * (l1 * norm_cdf(d1) + norm_pdf(d1) / st);
        if k == 0.0 {
            return first;
        }
        first - 2.0 * k * (-r * t).exp() / vb * (l2 * norm_cdf(d2) + norm_pdf(d2) / st)
    }

    fn barrier_delta_dvb(&self, vb: f64, k: f64, t: f64) -> f64 {
        if k == 0.0 || (t < 1e-12 && vb < k) {
            return 0.0;
        }
        let r = self.m.r;
        let l2 = self.lam.lambda2;
        let st = self.sig_sqrt(t);
        let (_, d2) = self.d12(Self::ln_m(vb, k), t);
        (2.0 * k * (-r * t).exp() / (vb * vb) * (l2 * norm_cdf(d2) + norm_pdf(d2) / st)).max(0.0)
    }
}

/// `F^V(t)`: probability that the asset value started at `v` hits `vb` by `t`.
pub fn first_passage_cdf(v: f64, vb: f64, t: f64, m: &MarketParams) -> Result<f64> {
    check_passage(v, vb, t)?;
    Ok(Ctx::new(m).f_cdf((v / vb).ln(), t))
}

/// `G^V(t) = E[e^{-r tau} 1{tau <= t}]` for the first-passage time `tau`.
pub fn discounted_passage(v: f64, vb: f64, t: f64, m: &MarketParams) -> Result<f64> {
    check_passage(v, vb, t)?;
    let (p5, p6, _, _) = Ctx::new(m).g_parts((v / vb).ln(), t);
    Ok(p5 + p6)
}

/// All first-passage quantities at horizon `t_mat`, including `I1` and `I2`.
pub fn passage_functions(v: f64, vb: f64, t_mat: f64, m: &MarketParams) -> Result<PassageFunctions> {
    check_passage(v, vb, t_mat)?;
    let ctx = Ctx::new(m);
    let ln_ratio = (v / vb).ln();
    let f_cdf = ctx.f_cdf(ln_ratio, t_mat);
    let (p5, p6, d5, d6) = ctx.g_parts(ln_ratio, t_mat);
    let g_disc = p5 + p6;
    let i1 = (g_disc - (-m.r * t_mat).exp() * f_cdf) / (m.r * t_mat);
    let i2 = (p5 * d5 - p6 * d6) / (ctx.lam.lambda3 * ctx.sig_sqrt(t_mat));
    Ok(PassageFunctions { f_cdf, g_disc, i1, i2 })
}

/// `(I1, I2)` at horizon `t_mat`.
pub fn i1_i2(v: f64, vb: f64, t_mat: f64, m: &MarketParams) -> Result<(f64, f64)> {
    let p = passage_functions(v, vb, t_mat, m)?;
    Ok((p.i1, p.i2))
}

/// `dI1/dV` and `dI2/dV` at `V = vb`: `-2 A1/(r T vb)` and `-2 A2/vb`.
pub fn i1_i2_dv_at_barrier(vb: f64, t_mat: f64, m: &MarketParams, a: &AConstants) -> Result<(f64, f64)> {
    if !(vb > 0.0) {
        return Err(domain(format!("barrier must be > 0, got {vb}")));
    }
    Ok((-2.0 * a.a1 / (m.r * t_mat * vb), -2.0 * a.a2 / vb))
}

/// Black-Scholes call on the asset value with payout rate `nu`; `k = 0`
/// gives the prepaid forward `v e^{-nu t}`.
pub fn vanilla_call(v: f64, k: f64, t: f64, m: &MarketParams) -> Result<f64> {
    if !(v > 0.0 && t > 0.0 && k >= 0.0) {
        return Err(domain(format!("vanilla call needs v > 0, t > 0, k >= 0 (v={v}, t={t}, k={k})")));
    }
    Ok(Ctx::new(m).vanilla(v, k, t))
}

/// Down-and-out call, selecting the `vb <= k` or `vb > k` formula.
pub fn down_and_out_call(p: &BarrierCallInputs, m: &MarketParams) -> Result<f64> {
    p.validate()?;
    Ok(Ctx::new(m).down_and_out(p))
}

/// `dc_do/dV` from the two displayed branch formulas.
pub fn dcdo_dv(p: &BarrierCallInputs, m: &MarketParams) -> Result<f64> {
    p.validate()?;
    Ok(Ctx::new(m).dcdo_dv(p))
}

/// `dc_do/dvb` at fixed `V`. Multiplying by `V_B'(alpha)` or `V_B'(g)` gives
/// the sensitivity of the call to the participation or guarantee rate.
pub fn dcdo_dvb(p: &BarrierCallInputs, m: &MarketParams) -> Result<f64> {
    p.validate()?;
    Ok(Ctx::new(m).dcdo_dvb(p))
}

/// `D(t)`: the delta of the down-and-out call at `V = vb`,
/// `2e^{-nu t}[l1 Phi(d1) + phi(d1)/(s sqrt t)] - (2k e^{-rt}/vb)[l2 Phi(d2) + phi(d2)/(s sqrt t)]`
/// with `d1, d2` taken at `min(vb/k, 1)`.
pub fn dcdo_dv_at_barrier(vb: f64, k: f64, t: f64, m: &MarketParams) -> Result<f64> {
    if !(vb > 0.0 && t > 0.0 && k >= 0.0) {
        return Err(domain(format!("D(t) needs vb > 0, t > 0, k >= 0 (vb={vb}, t={t}, k={k})")));
    }
    Ok(Ctx::new(m).barrier_delta(vb, k, t))
}

/// `dD(t)/dvb = (2k e^{-rt}/vb^2)[l2 Phi(d2) + phi(d2)/(s sqrt t)]`, which is
/// nonnegative.
pub fn d2cdo_dvb_dv_at_barrier(vb: f64, k: f64, t: f64, m: &MarketParams) -> Result<f64> {
    if !(vb > 0.0 && t > 0.0 && k >= 0.0) {
        return Err(domain(format!("dD/dvb needs vb > 0, t > 0, k >= 0 (vb={vb}, t={t}, k={k})")));
    }
    Ok(Ctx::new(m).barrier_delta_dvb(vb, k, t))
}

/// `(int_0^T D, int_0^inf D) = (A4 - (k/vb) A6, A3 - (k/vb) A5)` for `vb >= k`.
pub fn barrier_deriv_integrals_closed(vb: f64, k: f64, a: &AConstants) -> Result<(f64, f64)> {
    if !(vb > 0.0 && vb >= k) {
        return Err(domain(format!("closed D integrals need vb >= k and vb > 0 (vb={vb}, k={k})")));
    }
    let q = k / vb;
    Ok((a.a4 - q * a.a6, a.a3 - q * a.a5))
}

/// Pointwise evaluators without validation, for quadrature inner loops.
pub(crate) struct Kernel(Ctx);

impl Kernel {
    pub(crate) fn new(m: &MarketParams) -> Self {
        Self(Ctx::new(m))
    }

    pub(crate) fn cdo(&self, v: f64, k: f64, vb: f64, t: f64) -> f64 {
        self.0.down_and_out(&BarrierCallInputs { v, k, vb, t })
    }

    pub(crate) fn cdo_dvb(&self, v: f64, k: f64, vb: f64, t: f64) -> f64 {
        self.0.dcdo_dvb(&BarrierCallInputs { v, k, vb, t })
    }

    pub(crate) fn delta(&self, vb: f64, k: f64, t: f64) -> f64 {
        self.0.barrier_delta(vb, k, t)
    }

    pub(crate) fn delta_dvb(&self, vb: f64, k: f64, t: f64) -> f64 {
        self.0.barrier_delta_dvb(vb, k, t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::a_constants;
    use crate::params::Scenario;
    use crate::quad::{integrate_finite, integrate_semi_infinite};

    fn m() -> MarketParams {
        Scenario::base().market
    }

    fn bc(v: f64, k: f64, vb: f64, t: f64) -> BarrierCallInputs {
        BarrierCallInputs { v, k, vb, t }
    }

    #[test]
    fn passage_at_barrier_is_certain() {
        assert!((first_passage_cdf(45.0, 45.0, 10.0, &m()).unwrap() - 1.0).abs() < 1e-15);
        assert!((discounted_passage(45.0, 45.0, 10.0, &m()).unwrap() - 1.0).abs() < 1e-15);
        assert!(first_passage_cdf(100.0, 45.0, 1e-6, &m()).unwrap() < 1e-300);
    }

    #[test]
    fn passage_ordering_and_domain() {
        let mk = m();
        for t in [0.5, 5.0, 30.0, 200.0] {
            let f = first_passage_cdf(100.0, 45.0, t, &mk).unwrap();
            let g = discounted_passage(100.0, 45.0, t, &mk).unwrap();
            assert!((0.0..=1.0).contains(&f) && g >= 0.0 && g <= f);
        }
        assert!(first_passage_cdf(40.0, 45.0, 1.0, &mk).is_err());
        assert!(first_passage_cdf(40.0, 0.0, 1.0, &mk).is_err());
    }

    #[test]
    fn i1_i2_match_time_averages() {
        let mk = m();
        let (v, vb, t) = (100.0, 45.0, 30.0);
        let (i1, i2) = i1_i2(v, vb, t, &mk).unwrap();
        let q1 = integrate_finite(|s| (-mk.r * s).exp() * first_passage_cdf(v, vb, s, &mk).unwrap(), 0.0, t, 1e-11)
            .unwrap()
            .value
            / t;
        let q2 = integrate_finite(|s| discounted_passage(v, vb, s, &mk).unwrap(), 0.0, t, 1e-11).unwrap().value / t;
        assert!((i1 - q1).abs() < 1e-7 * q1.abs(), "{i1} vs {q1}");
        assert!((i2 - q2).abs() < 1e-7 * q2.abs(), "{i2} vs {q2}");
        let (_, i2_at) = i1_i2(vb, vb, t, &mk).unwrap();
        assert!((i2_at - 1.0).abs() < 1e-14);
    }

    #[test]
    fn i1_i2_barrier_derivative_matches_finite_difference() {
        let mk = m();
        let fr = Scenario::base().frictions;
        for (vb, t) in [(45.0, 30.0), (20.0, 5.0), (80.0, 60.0)] {
            let a = a_constants(&mk, t, &fr);
            let (di1, di2) = i1_i2_dv_at_barrier(vb, t, &mk, &a).unwrap();
            let h = 1e-6 * vb;
            let v0 = vb * (1.0 + 1e-5);
            let (p1, p2) = i1_i2(v0 + h, vb, t, &mk).unwrap();
            let (m1, m2) = i1_i2(v0 - h, vb, t, &mk).unwrap();
            let fd1 = (p1 - m1) / (2.0 * h);
            let fd2 = (p2 - m2) / (2.0 * h);
            assert!((fd1 - di1).abs() < 1e-4 * di1.abs(), "{fd1} vs {di1}");
            assert!((fd2 - di2).abs() < 1e-4 * di2.abs(), "{fd2} vs {di2}");
            let (d1x2, _) = i1_i2_dv_at_barrier(2.0 * vb, t, &mk, &a).unwrap();
            assert!((d1x2 - di1 / 2.0).abs() < 1e-15 * di1.abs().max(1.0));
            assert!(di1 < 0.0 && di2 < 0.0);
        }
    }

    #[test]
    fn vanilla_limits() {
        let mk = m();
        assert!((vanilla_call(100.0, 0.0, 3.0, &mk).unwrap() - 100.0 * (-0.15f64).exp()).abs() < 1e-12);
        let low_vol = MarketParams { sigma: 1e-4, ..mk };
        assert!(vanilla_call(100.0, 150.0, 1.0, &low_vol).unwrap() < 1e-300);
    }

    #[test]
    fn barrier_call_reduces_to_vanilla_without_barrier() {
        let mk = m();
        let c = vanilla_call(100.0, 150.0, 30.0, &mk).unwrap();
        let cdo = down_and_out_call(&bc(100.0, 150.0, 0.0, 30.0), &mk).unwrap();
        assert_eq!(c, cdo);
    }

    #[test]
    fn branches_agree_at_vb_equal_k() {
        let ctx = Ctx::new(&m());
        for (v, k, t) in [(100.0_f64, 80.0_f64, 30.0_f64), (120.0, 40.0, 2.0), (60.0, 59.0, 10.0)] {
            let MarketParams { r, nu, .. } = ctx.m;
            let l1 = ctx.lam.lambda1;
            let ln_ratio = (k / v).ln();
            // Lower-branch formula evaluated at vb = k.
            let ln_x = k.ln() - v.ln();
            let (e1, e2) = ctx.d12(ln_x, t);
            let lower = ctx.vanilla(v, k, t) - v * (-nu * t).exp() * pow_cdf(ln_ratio, 2.0 * l1, e1)
                + k * (-r * t).exp() * pow_cdf(ln_ratio, 2.0 * l1 - 2.0, e2);
            // Upper-branch formula evaluated at vb = k.
            let (d1, d2) = ctx.d12(-ln_ratio, t);
            let upper = v * (-nu * t).exp() * norm_cdf(d1) - k * (-r * t).exp() * norm_cdf(d2)
                - v * (-nu * t).exp() * pow_cdf(ln_ratio, 2.0 * l1, e1)
                + k * (-r * t).exp() * pow_cdf(ln_ratio, 2.0 * l1 - 2.0, e2);
            assert!((lower - upper).abs() < 1e-12 * lower.abs().max(1.0));
            // Derivative branches at vb = k, approached from both sides.
            let below = ctx.dcdo_dv(&bc(v, k, k * (1.0 - 1e-12), t));
            let above = ctx.dcdo_dv(&bc(v, k, k * (1.0 + 1e-12), t));
            assert!((below - above).abs() < 1e-9);
        }
    }

    #[test]
    fn dcdo_dv_matches_finite_difference() {
        let mk = m();
        for p in [bc(100.0, 150.0, 45.36, 30.0), bc(100.0, 60.0, 70.0, 5.0), bc(80.0, 0.0, 30.0, 12.0)] {
            let h = 1e-6 * p.v;
            let up = down_and_out_call(&BarrierCallInputs { v: p.v + h, ..p }, &mk).unwrap();
            let dn = down_and_out_call(&BarrierCallInputs { v: p.v - h, ..p }, &mk).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let an = dcdo_dv(&p, &mk).unwrap();
            assert!((fd - an).abs() < 1e-5 * an.abs().max(1e-3), "{fd} vs {an}");
        }
        let fwd = dcdo_dv(&bc(100.0, 0.0, 0.0, 7.0), &mk).unwrap();
        assert!((fwd - (-mk.nu * 7.0).exp()).abs() < 1e-15);
    }

    #[test]
    fn dcdo_dvb_matches_finite_difference() {
        let mk = m();
        for p in [bc(100.0, 150.0, 45.36, 30.0), bc(100.0, 60.0, 70.0, 5.0), bc(80.0, 10.0, 30.0, 12.0)] {
            let h = 1e-6 * p.vb;
            let up = down_and_out_call(&BarrierCallInputs { vb: p.vb + h, ..p }, &mk).unwrap();
            let dn = down_and_out_call(&BarrierCallInputs { vb: p.vb - h, ..p }, &mk).unwrap();
            let fd = (up - dn) / (2.0 * h);
            let an = dcdo_dvb(&p, &mk).unwrap();
            assert!((fd - an).abs() < 1e-5 * an.abs().max(1e-6), "{fd} vs {an}");
        }
    }

    #[test]
    fn barrier_delta_limits() {
        let mk = m();
        let lam = lambdas(&mk);
        let t: f64 = 10.0;
        let st = mk.sigma * t.sqrt();
        let d1 = lam.lambda1 * st;
        let expect = (-mk.nu * t).exp() * (2.0 * lam.lambda1 * norm_cdf(d1) + 2.0 / st * norm_pdf(d1));
        assert!((dcdo_dv_at_barrier(45.0, 0.0, t, &mk).unwrap() - expect).abs() < 1e-15);
        assert!(dcdo_dv_at_barrier(1e-8, 150.0, t, &mk).unwrap().abs() < 1e-12);
    }

    #[test]
    fn barrier_delta_is_the_limit_of_the_call_delta() {
        let mk = m();
        for (vb, k, t) in [(45.36, 150.0, 10.0), (45.36, 150.0, 30.0), (80.0, 40.0, 3.0), (60.0, 0.0, 8.0)] {
            let d = dcdo_dv_at_barrier(vb, k, t, &mk).unwrap();
            let near = dcdo_dv(&bc(vb * (1.0 + 1e-9), k, vb, t), &mk).unwrap();
            assert!((d - near).abs() < 1e-6 * d.abs().max(1e-3), "{d} vs {near}");
            // One-sided difference of the call price from the barrier.
            let h = 1e-6 * vb;
            let up = down_and_out_call(&bc(vb + h, k, vb, t), &mk).unwrap();
            let up2 = down_and_out_call(&bc(vb + 2.0 * h, k, vb, t), &mk).unwrap();
            let fd = (4.0 * up - up2) / (2.0 * h);
            assert!((fd - d).abs() < 1e-4 * d.abs().max(1e-3), "{fd} vs {d}");
        }
    }

    #[test]
    fn barrier_delta_dvb_properties() {
        let mk = m();
        assert_eq!(d2cdo_dvb_dv_at_barrier(45.0, 0.0, 3.0, &mk).unwrap(), 0.0);
        let (k, t): (f64, f64) = (90.0, 7.0);
        let lam = lambdas(&mk);
        let st = mk.sigma * t.sqrt();
        let d2 = lam.lambda2 * st;
        let expect = 2.0 * (-mk.r * t).exp() / k * (lam.lambda2 * norm_cdf(d2) + norm_pdf(d2) / st);
        assert!((d2cdo_dvb_dv_at_barrier(k, k, t, &mk).unwrap() - expect).abs() < 1e-14);
        for (vb, k, t) in [(45.0, 150.0, 10.0), (100.0, 50.0, 2.0), (10.0, 12.0, 0.3)] {
            let an = d2cdo_dvb_dv_at_barrier(vb, k, t, &mk).unwrap();
            assert!(an >= 0.0);
            let h = 1e-6 * vb;
            let fd = (dcdo_dv_at_barrier(vb + h, k, t, &mk).unwrap() - dcdo_dv_at_barrier(vb - h, k, t, &mk).unwrap())
                / (2.0 * h);
            assert!((fd - an).abs() < 1e-4 * an.abs().max(1e-8), "{fd} vs {an}");
        }
    }

    #[test]
    fn closed_delta_integrals_match_quadrature() {
        let mk = m();
        let fr = Scenario::base().frictions;
        let t = 30.0;
        let a = a_constants(&mk, t, &fr);
        let lam = lambdas(&mk);
        for (vb, k) in [(150.0, 150.0), (80.0, 20.0), (50.0, 0.0)] {
            let (ct, ci) = barrier_deriv_integrals_closed(vb, k, &a).unwrap();
            let f = |s: f64| dcdo_dv_at_barrier(vb, k, s, &mk).unwrap();
            let qt = integrate_finite(f, 0.0, t, 1e-11).unwrap().value;
            let tail = |tm: f64| {
                let c = 1.0 / (mk.sigma * (2.0 * std::f64::consts::PI * tm).sqrt());
                2.0 * (lam.lambda1.abs() + c) * (-mk.nu * tm).exp() / mk.nu
                    + 2.0 * k / vb * (lam.lambda2.abs() + c) * (-mk.r * tm).exp() / mk.r
            };
            let qi = integrate_semi_infinite(f, 1e-11, tail).unwrap().value;
            assert!((ct - qt).abs() < 1e-7 * ct.abs(), "{ct} vs {qt}");
            assert!((ci - qi).abs() < 1e-7 * ci.abs(), "{ci} vs {qi}");
        }
        let (t0, i0) = barrier_deriv_integrals_closed(50.0, 0.0, &a).unwrap();
        assert_eq!((t0, i0), (a.a4, a.a3));
        assert!(barrier_deriv_integrals_closed(40.0, 50.0, &a).is_err());
    }
}
