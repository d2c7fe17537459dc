//! Special functions and the model constants shared by all other modules:
//! the normal distribution, the exponents `lambda1..lambda3`, the `d`
//! functions, the constants `A1..A6` and the participation-rate bounds.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;

use crate::error::{domain, Result};
use crate::params::{FrictionParams, MarketParams};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal cumulative distribution function.
///
/// Evaluated through `erfc`, which keeps full relative precision in the
/// lower tail. Saturates to exactly 0 or 1 far in the tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Natural logarithm of the normal CDF, finite for every finite `x`.
///
/// Below `x = -30` the asymptotic Mills-ratio series is used because `erfc`
/// underflows near `x = -38`.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > 5.0 {
        (-norm_cdf(-x)).ln_1p()
    } else if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        let z = 1.0 / (x * x);
        let series = 1.0 - z + 3.0 * z * z - 15.0 * z * z * z + 105.0 * z * z * z * z;
        -0.5 * x * x - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}

/// `x^p * Phi(d)` evaluated as `exp(p ln x + ln Phi(d))` given `ln x`.
///
/// Products of this form appear wherever a reflected barrier term is priced;
/// the power factor alone can overflow for extreme barrier ratios even
/// though the product stays bounded.
pub fn pow_cdf(ln_x: f64, p: f64, d: f64) -> f64 {
    let e = p * ln_x + ln_norm_cdf(d);
    if e < -745.0 {
        0.0
    } else {
        e.exp()
    }
}

/// `x^p * phi(d)` evaluated in log space given `ln x`.
pub fn pow_pdf(ln_x: f64, p: f64, d: f64) -> f64 {
    let e = p * ln_x - 0.5 * d * d;
    if e < -745.0 {
        0.0
    } else {
        INV_SQRT_2PI * e.exp()
    }
}

/// The three exponents governing barrier prices and first-passage laws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSet {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl LambdaSet {
    /// `lambda2 + lambda3`, the exponent of the perpetual default claim.
    pub fn exponent(&self) -> f64 {
        self.lambda2 + self.lambda3
    }
}

/// `lambda1 = (r - nu + sigma^2/2)/sigma^2`, `lambda2 = lambda1 - 1` and
/// `lambda3 = sqrt((lambda2 sigma^2)^2 + 2 r sigma^2)/sigma^2`.
pub fn lambdas(m: &MarketParams) -> LambdaSet {
    let s2 = m.sigma * m.sigma;
    let lambda1 = (m.r - m.nu + 0.5 * s2) / s2;
    let lambda2 = (m.r - m.nu - 0.5 * s2) / s2;
    let lambda3 = ((lambda2 * s2).powi(2) + 2.0 * m.r * s2).sqrt() / s2;
    LambdaSet { lambda1, lambda2, lambda3 }
}

/// `d_i(x, t)` for `i` in `1..=6` as a function of `ln x`. Callers that
/// already hold logarithms use this form to avoid a round trip through `exp`.
pub fn d_ln(index: u8, ln_x: f64, t: f64, m: &MarketParams, lam: &LambdaSet) -> f64 {
    let s2 = m.sigma * m.sigma;
    let drift = match index {
        1 => lam.lambda1 * s2,
        2 | 3 => lam.lambda2 * s2,
        4 => -lam.lambda2 * s2,
        5 => lam.lambda3 * s2,
        6 => -lam.lambda3 * s2,
        _ => unreachable!("d-function index must lie in 1..=6"),
    };
    (ln_x + drift * t) / (m.sigma * t.sqrt())
}

/// `d_i(x, t)` for `i` in `1..=6`:
/// `d1/2 = (ln x + (r - nu +- sigma^2/2) t)/(sigma sqrt t)`,
/// `d3/4 = (ln x +- lambda2 sigma^2 t)/(sigma sqrt t)`,
/// `d5/6 = (ln x +- lambda3 sigma^2 t)/(sigma sqrt t)`.
pub fn d_factor(index: u8, x: f64, t: f64, m: &MarketParams) -> Result<f64> {
    if !(1..=6).contains(&index) {
        return Err(domain(format!("d-function index {index} outside 1..=6")));
    }
    if !(x > 0.0) {
        return Err(domain(format!("d-function argument must be > 0, got {x}")));
    }
    if !(t > 0.0) {
        return Err(domain(format!("d-function time must be > 0, got {t}")));
    }
    Ok(d_ln(index, x.ln(), t, m, &lambdas(m)))
}

/// A nonnegative bound that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    /// `x < bound`.
    pub fn exceeds(&self, x: f64) -> bool {
        match *self {
            Bound::Finite(b) => x < b,
            Bound::Unbounded => true,
        }
    }

    /// The bound as a float, `+inf` when unbounded.
    pub fn value(&self) -> f64 {
        match *self {
            Bound::Finite(b) => b,
            Bound::Unbounded => f64::INFINITY,
        }
    }
}

/// Maturity-dependent constants of the smooth-pasting equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AConstants {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub a4: f64,
    pub a5: f64,
    pub a6: f64,
    /// Participation rate below which equity stays nonnegative.
    pub alpha_bar: Bound,
    /// Participation rate below which the barrier equation has one root.
    pub alpha_tilde: Bound,
}

/// Evaluates `A1..A6`, `alpha_bar` and `alpha_tilde` for maturity `t_mat`.
pub fn a_constants(m: &MarketParams, t_mat: f64, fr: &FrictionParams) -> AConstants {
    let lam = lambdas(m);
    let (l1, l2, l3) = (lam.lambda1, lam.lambda2, lam.lambda3);
    let (r, nu, s) = (m.r, m.nu, m.sigma);
    let st = s * t_mat.sqrt();
    let s2t = s * s * t_mat;

    let a1 = 0.5 * (l2 - l3) + l3 * norm_cdf(l3 * st) - l2 * (-r * t_mat).exp() * norm_cdf(l2 * st);
    let a2 = 0.5 * (l2 - l3) - 1.0 / (2.0 * l3 * s2t)
        + (l3 + 1.0 / (l3 * s2t)) * norm_cdf(l3 * st)
        + norm_pdf(l3 * st) / st;

    // A4 and A6 are A3 and A5 less their integrals over [T, inf), which
    // keeps the order A3 >= A4 exact in floating point.
    let q1 = (l1 * l1 * s * s + 2.0 * nu).sqrt();
    let a3 = l1 / nu + q1 / (s * nu);
    let tail34 = 2.0 * (l1 / nu) * (-nu * t_mat).exp() * norm_cdf(l1 * st)
        + 2.0 * (q1 / (s * nu)) * norm_cdf(-q1 * t_mat.sqrt());
    let a4 = a3 - tail34;

    let q2 = (l2 * l2 * s * s + 2.0 * r).sqrt();
    let a5 = l2 / r + q2 / (s * r);
    let tail56 = 2.0 * (l2 / r) * (-r * t_mat).exp() * norm_cdf(l2 * st)
        + 2.0 * (q2 / (s * r)) * norm_cdf(-q2 * t_mat.sqrt());
    let a6 = a5 - tail56;

    let den_bar = 1.0 - fr.tau2 - (-nu * t_mat).exp();
    let alpha_bar = if den_bar > 0.0 { Bound::Finite(nu / den_bar) } else { Bound::Unbounded };

    let den_tilde = a4 - fr.tau2 * a3;
    let alpha_tilde = if den_tilde > 0.0 {
        Bound::Finite(long_run_constant(&lam, a2, fr.rho) / den_tilde)
    } else {
        Bound::Unbounded
    };

    AConstants { a1, a2, a3, a4, a5, a6, alpha_bar, alpha_tilde }
}

/// `1 + rho (lambda2 + lambda3) + 2 (1 - rho) A2`, the limit of the
/// smooth-pasting residual without participation as the barrier grows.
pub fn long_run_constant(lam: &LambdaSet, a2: f64, rho: f64) -> f64 {
    1.0 + rho * lam.exponent() + 2.0 * (1.0 - rho) * a2
}

/// Integration horizon for the closed-form Gaussian integrals below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    Infinite,
}

/// `int_0^H e^{-nu t} phi(lambda1 sigma sqrt t)/sqrt t dt`, equal to
/// `(2 Phi(q sqrt T) - 1)/q` on `[0, T]` and `1/q` on `[0, inf)` with
/// `q = sqrt(lambda1^2 sigma^2 + 2 nu)`.
pub fn int_exp_pdf_over_sqrt(lambda1: f64, sigma: f64, nu: f64, h: Horizon) -> f64 {
    let q = (lambda1 * lambda1 * sigma * sigma + 2.0 * nu).sqrt();
    match h {
        Horizon::Finite(t) => (2.0 * norm_cdf(q * t.sqrt()) - 1.0) / q,
        Horizon::Infinite => 1.0 / q,
    }
}

/// `int_0^H e^{-nu t} Phi(lambda1 sigma sqrt t) dt` in closed form.
pub fn int_exp_cdf(lambda1: f64, sigma: f64, nu: f64, h: Horizon) -> f64 {
    let tail = match h {
        Horizon::Finite(t) => (-nu * t).exp() * norm_cdf(lambda1 * sigma * t.sqrt()) / nu,
        Horizon::Infinite => 0.0,
    };
    0.5 / nu - tail + lambda1 * sigma / (2.0 * nu) * int_exp_pdf_over_sqrt(lambda1, sigma, nu, h)
}
