//! Parameter types for the market, the contract portfolio and the frictions.

use crate::error::{invalid, Result};

/// Risk-neutral market: the asset value follows a geometric Brownian motion
/// with drift `r - nu` and volatility `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketParams {
    /// Risk-free rate per year.
    pub r: f64,
    /// Fraction of the asset value paid out per year.
    pub nu: f64,
    /// Asset volatility per square-root year.
    pub sigma: f64,
}

impl MarketParams {
    /// Builds a validated market. All three rates must be finite and positive.
    pub fn new(r: f64, nu: f64, sigma: f64) -> Result<Self> {
        let m = Self { r, nu, sigma };
        m.validate()?;
        Ok(m)
    }

    /// Checks strict positivity of `r`, `nu` and `sigma`.
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("r", self.r), ("nu", self.nu), ("sigma", self.sigma)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(invalid(format!("{name} must be finite and > 0, got {x}")));
            }
        }
        Ok(())
    }
}

/// Tax rates on the two payout streams and the proportional bankruptcy loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrictionParams {
    /// Tax rate on guaranteed payments.
    pub tau1: f64,
    /// Tax rate on surplus participation payments.
    pub tau2: f64,
    /// Fraction of the asset value lost at bankruptcy.
    pub rho: f64,
}

impl FrictionParams {
    /// Checks that every rate lies in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("tau1", self.tau1), ("tau2", self.tau2), ("rho", self.rho)] {
            if !(0.0..=1.0).contains(&x) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {x}")));
            }
        }
        Ok(())
    }
}

/// A stationary portfolio of participating contracts.
///
/// `g_total` is the aggregate guaranteed payment per year of the whole
/// portfolio and `p_lump` the aggregate lump sum; each of the continuously
/// issued cohorts receives the rates `g = G/T` and `p = P/T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractParams {
    /// Contract maturity in years.
    pub t_mat: f64,
    /// Aggregate lump sum `P`.
    pub p_lump: f64,
    /// Aggregate guaranteed payment `G`.
    pub g_total: f64,
    /// Asset level above which surplus participation starts.
    pub k: f64,
    /// Participation rate on the surplus above `k`.
    pub alpha: f64,
}

impl ContractParams {
    /// Per-cohort guarantee rate `g = G/T`.
    pub fn g_rate(&self) -> f64 {
        self.g_total / self.t_mat
    }

    /// Per-cohort lump sum rate `p = P/T`.
    pub fn p_rate(&self) -> f64 {
        self.p_lump / self.t_mat
    }

    /// Checks the sign and range constraints of the contract.
    pub fn validate(&self) -> Result<()> {
        if !(self.t_mat.is_finite() && self.t_mat > 0.0) {
            return Err(invalid(format!("t_mat must be > 0, got {}", self.t_mat)));
        }
        if !(self.p_lump.is_finite() && self.p_lump > 0.0) {
            return Err(invalid(format!("p_lump must be > 0, got {}", self.p_lump)));
        }
        if !(self.g_total.is_finite() && self.g_total >= 0.0) {
            return Err(invalid(format!("g_total must be >= 0, got {}", self.g_total)));
        }
        if !(self.k.is_finite() && self.k >= 0.0) {
            return Err(invalid(format!("k must be >= 0, got {}", self.k)));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(invalid(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Everything needed to value the insurer at the current asset level `v0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    /// Current asset value.
    pub v0: f64,
    pub market: MarketParams,
    pub contract: ContractParams,
    pub frictions: FrictionParams,
}

impl Scenario {
    /// The reference parametrization: r = 1%, nu = 5%, sigma = 20%, T = 30,
    /// P = 95, G/P = 2%, V0 = 100, k = 150, alpha = 5%, tau1 = tau2 = 35%,
    /// rho = 50%.
    pub fn base() -> Self {
        Self {
            v0: 100.0,
            market: MarketParams { r: 0.01, nu: 0.05, sigma: 0.20 },
            contract: ContractParams {
                t_mat: 30.0,
                p_lump: 95.0,
                g_total: 0.02 * 95.0,
                k: 150.0,
                alpha: 0.05,
            },
            frictions: FrictionParams { tau1: 0.35, tau2: 0.35, rho: 0.5 },
        }
    }

    /// Validates every component.
    pub fn validate(&self) -> Result<()> {
        if !(self.v0.is_finite() && self.v0 > 0.0) {
            return Err(invalid(format!("v0 must be > 0, got {}", self.v0)));
        }
        self.market.validate()?;
        self.contract.validate()?;
        self.frictions.validate()
    }

    /// True when the threshold sits below the current asset value, which the
    /// model's standing assumptions exclude. Such inputs are still valued.
    pub fn k_below_v0_warning(&self) -> bool {
        self.contract.k < self.v0
    }

    /// Guarantee expressed as a fraction of the lump sum.
    pub fn g_over_p(&self) -> f64 {
        self.contract.g_total / self.contract.p_lump
    }

    pub fn with_v0(mut self, v0: f64) -> Self {
        self.v0 = v0;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.contract.alpha = alpha;
        self
    }

    pub fn with_g_total(mut self, g_total: f64) -> Self {
        self.contract.g_total = g_total;
        self
    }

    /// Sets `G` from a ratio to the lump sum.
    pub fn with_g_over_p(mut self, ratio: f64) -> Self {
        self.contract.g_total = ratio * self.contract.p_lump;
        self
    }

    /// Sets the lump sum, keeping `G/P` fixed.
    pub fn with_p_lump_keep_ratio(mut self, p: f64) -> Self {
        let ratio = self.g_over_p();
        self.contract.p_lump = p;
        self.contract.g_total = ratio * p;
        self
    }

    pub fn with_t_mat(mut self, t: f64) -> Self {
        self.contract.t_mat = t;
        self
    }

    /// Sets the maturity, keeping the per-cohort rates `g = G/T` and
    /// `p = P/T` fixed, so `G` and `P` grow with `T`.
    pub fn with_t_mat_keep_rates(mut self, t: f64) -> Self {
        let (g, p) = (self.contract.g_rate(), self.contract.p_rate());
        self.contract.t_mat = t;
        self.contract.g_total = g * t;
        self.contract.p_lump = p * t;
        self
    }

    pub fn with_k(mut self, k: f64) -> Self {
        self.contract.k = k;
        self
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.market.sigma = sigma;
        self
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.market.nu = nu;
        self
    }

    pub fn with_tau1(mut self, tau1: f64) -> Self {
        self.frictions.tau1 = tau1;
        self
    }

    pub fn with_tau2(mut self, tau2: f64) -> Self {
        self.frictions.tau2 = tau2;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_is_valid_and_rates_divide_by_maturity() {
        let s = Scenario::base();
        s.validate().unwrap();
        assert!((s.contract.g_rate() - 1.9 / 30.0).abs() < 1e-15);
        assert!((s.contract.p_rate() - 95.0 / 30.0).abs() < 1e-15);
        assert!(!s.k_below_v0_warning());
    }

    #[test]
    fn rejects_nonpositive_market() {
        assert!(MarketParams::new(0.01, 0.05, 0.0).is_err());
        assert!(MarketParams::new(-0.01, 0.05, 0.2).is_err());
    }

    #[test]
    fn keep_ratio_rescales_guarantee() {
        let s = Scenario::base().with_p_lump_keep_ratio(150.0);
        assert!((s.g_over_p() - 0.02).abs() < 1e-15);
        assert!((s.contract.g_total - 3.0).abs() < 1e-12);
    }
}
