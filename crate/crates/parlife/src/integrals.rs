//! Time integrals over cohort maturities of the down-and-out call, of its
//! barrier sensitivity, and of the barrier delta `D(t)`.
//!
//! Each integral comes in a finite (`[0, T]`) and a perpetual (`[0, inf)`)
//! version. The perpetual one reuses the finite part and adds the tail
//! `[T, inf)`, truncated by an explicit bound on the integrand.

use std::f64::consts::PI;

use crate::closed::{barrier_deriv_integrals_closed, Kernel};
use crate::error::Result;
use crate::math::{lambdas, AConstants};
use crate::params::MarketParams;
use crate::quad::{integrate_finite, integrate_from};

/// `int_0^T f dt` and `int_0^inf f dt` for one integrand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeIntegrals {
    pub finite: f64,
    pub perpetual: f64,
}

fn finite_and_perpetual<F, B>(f: F, t_mat: f64, tol: f64, tail_bound: B) -> Result<TimeIntegrals>
where
    F: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let finite = integrate_finite(&f, 0.0, t_mat, tol)?.value;
    let tail = integrate_from(&f, t_mat, tol, tail_bound)?.value;
    Ok(TimeIntegrals { finite, perpetual: finite + tail })
}

fn inv_sqrt_2pi_t(sigma: f64, t: f64) -> f64 {
    1.0 / (sigma * (2.0 * PI * t).sqrt())
}

/// Integrals of `c_do(v, k, vb, t)` over `t`. Requires `v >= vb >= 0`.
pub fn cdo_integrals(m: &MarketParams, v: f64, k: f64, vb: f64, t_mat: f64, tol: f64) -> Result<TimeIntegrals> {
    if vb >= v {
        return Ok(TimeIntegrals { finite: 0.0, perpetual: 0.0 });
    }
    let kern = Kernel::new(m);
    let nu = m.nu;
    // c_do(t) <= v e^{-nu t}
    finite_and_perpetual(|t| kern.cdo(v, k, vb, t), t_mat, tol, |tm| v / nu * (-nu * tm).exp())
}

/// Integrals of `dc_do/dvb (v, k, vb, t)` over `t`. Requires `v >= vb > 0`.
pub fn cdo_dvb_integrals(m: &MarketParams, v: f64, k: f64, vb: f64, t_mat: f64, tol: f64) -> Result<TimeIntegrals> {
    if vb <= 0.0 {
        return Ok(TimeIntegrals { finite: 0.0, perpetual: 0.0 });
    }
    let kern = Kernel::new(m);
    let l1 = lambdas(m).lambda1;
    let x = (vb / v).min(1.0);
    let tail = |tm: f64| {
        let c = inv_sqrt_2pi_t(m.sigma, tm);
        let c1 = 2.0 * l1.abs() * x.powf(2.0 * l1 - 1.0) + 3.0 * (v / vb) * x.powf(2.0 * l1) * c;
        let c2 = (k / v) * (2.0 * l1 - 2.0).abs() * x.powf(2.0 * l1 - 3.0)
            + 3.0 * (k / vb) * (x.powf(2.0 * l1 - 2.0) + 1.0) * c;
        c1 * (-m.nu * tm).exp() / m.nu + c2 * (-m.r * tm).exp() / m.r
    };
    finite_and_perpetual(|t| kern.cdo_dvb(v, k, vb, t), t_mat, tol, tail)
}

/// Integrals of the barrier delta `D(t)`; closed form when `vb >= k`.
pub fn delta_integrals(m: &MarketParams, vb: f64, k: f64, a: &AConstants, t_mat: f64, tol: f64) -> Result<TimeIntegrals> {
    if vb >= k {
        let (finite, perpetual) = barrier_deriv_integrals_closed(vb, k, a)?;
        return Ok(TimeIntegrals { finite, perpetual });
    }
    let kern = Kernel::new(m);
    let lam = lambdas(m);
    let tail = |tm: f64| {
        let c = inv_sqrt_2pi_t(m.sigma, tm);
        2.0 * (lam.lambda1.abs() + c) * (-m.nu * tm).exp() / m.nu
            + 2.0 * k / vb * (lam.lambda2.abs() + c) * (-m.r * tm).exp() / m.r
    };
    finite_and_perpetual(|t| kern.delta(vb, k, t), t_mat, tol, tail)
}

/// Integrals of `dD(t)/dvb`; closed form when `vb >= k`.
pub fn delta_dvb_integrals(m: &MarketParams, vb: f64, k: f64, a: &AConstants, t_mat: f64, tol: f64) -> Result<TimeIntegrals> {
    if vb >= k {
        let q = k / (vb * vb);
        return Ok(TimeIntegrals { finite: q * a.a6, perpetual: q * a.a5 });
    }
    let kern = Kernel::new(m);
    let l2 = lambdas(m).lambda2;
    let tail = |tm: f64| {
        2.0 * k / (vb * vb) * (l2.abs() + inv_sqrt_2pi_t(m.sigma, tm)) * (-m.r * tm).exp() / m.r
    };
    finite_and_perpetual(|t| kern.delta_dvb(vb, k, t), t_mat, tol, tail)
}
