//! Browser bindings: a barrier option price, the bankruptcy barrier with
//! the firm's balance sheet, and the equity curve above the barrier.

use parlife::analysis::curves_vs_asset;
use parlife::barrier::solve_vb_value;
use parlife::closed::{down_and_out_call, vanilla_call, BarrierCallInputs};
use parlife::valuation::firm_value;
use parlife::{ContractParams, FrictionParams, MarketParams, Scenario};
use wasm_bindgen::prelude::*;

/// Scenario fields as edited on the page. The guarantee is given as `G/P`.
#[wasm_bindgen]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inputs {
    pub v0: f64,
    pub r: f64,
    pub nu: f64,
    pub sigma: f64,
    pub t_mat: f64,
    pub p_lump: f64,
    pub g_over_p: f64,
    pub k: f64,
    pub alpha: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub rho: f64,
}

#[wasm_bindgen]
impl Inputs {
    /// The reference case.
    #[wasm_bindgen(constructor)]
    pub fn new() -> Inputs {
        let s = Scenario::base();
        Inputs {
            v0: s.v0,
            r: s.market.r,
            nu: s.market.nu,
            sigma: s.market.sigma,
            t_mat: s.contract.t_mat,
            p_lump: s.contract.p_lump,
            g_over_p: s.g_over_p(),
            k: s.contract.k,
            alpha: s.contract.alpha,
            tau1: s.frictions.tau1,
            tau2: s.frictions.tau2,
            rho: s.frictions.rho,
        }
    }
}

impl Default for Inputs {
    fn default() -> Self {
        Inputs::new()
    }
}

impl Inputs {
    pub fn scenario(&self) -> parlife::Result<Scenario> {
        let s = Scenario {
            v0: self.v0,
            market: MarketParams { r: self.r, nu: self.nu, sigma: self.sigma },
            contract: ContractParams {
                t_mat: self.t_mat,
                p_lump: self.p_lump,
                g_total: self.g_over_p * self.p_lump,
                k: self.k,
                alpha: self.alpha,
            },
            frictions: FrictionParams { tau1: self.tau1, tau2: self.tau2, rho: self.rho },
        };
        s.validate()?;
        Ok(s)
    }
}

/// Barrier and balance sheet at `V0`.
#[wasm_bindgen]
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierReport {
    pub vb: f64,
    pub firm_value: f64,
    pub equity: f64,
    pub liability: f64,
    pub tax_benefit_guarantee: f64,
    pub tax_benefit_participation: f64,
    pub bankruptcy_cost: f64,
    method: String,
}

#[wasm_bindgen]
impl BarrierReport {
    #[wasm_bindgen(getter)]
    pub fn method(&self) -> String {
        self.method.clone()
    }
}

/// `[down-and-out call, vanilla call]` at `V0` with strike `k`, barrier `vb`
/// and maturity `t`.
pub fn barrier_call_pair(inputs: &Inputs, vb: f64, t: f64) -> parlife::Result<Vec<f64>> {
    let s = inputs.scenario()?;
    let p = BarrierCallInputs { v: s.v0, k: s.contract.k, vb, t };
    Ok(vec![down_and_out_call(&p, &s.market)?, vanilla_call(s.v0, s.contract.k, t, &s.market)?])
}

pub fn barrier_report(inputs: &Inputs) -> parlife::Result<BarrierReport> {
    let s = inputs.scenario()?;
    let (vb, method) = solve_vb_value(&s)?;
    let b = firm_value(&s, vb)?;
    Ok(BarrierReport {
        vb,
        firm_value: b.firm_value,
        equity: b.equity,
        liability: b.l_total,
        tax_benefit_guarantee: b.tb1,
        tax_benefit_participation: b.tb2,
        bankruptcy_cost: b.bc,
        method: method.as_str().to_string(),
    })
}

/// Equity, liability and firm value at `points` asset values spread evenly
/// over `[vb, 3 V0]`, with the barrier solved at `V0`. Laid out as four
/// consecutive blocks: asset values, equity, liability, firm value.
pub fn curve_blocks(inputs: &Inputs, points: usize) -> parlife::Result<Vec<f64>> {
    let s = inputs.scenario()?;
    let (vb, _) = solve_vb_value(&s)?;
    let n = points.max(2);
    let hi = 3.0 * s.v0;
    let grid: Vec<f64> = (0..n).map(|i| vb + (hi - vb) * i as f64 / (n - 1) as f64).collect();
    let table = curves_vs_asset(&s, &grid)?;
    let mut out = grid.clone();
    for name in ["equity", "liability", "v"] {
        let col = table.column(name).unwrap_or_default();
        out.extend(col.into_iter().map(|x| x.unwrap_or(f64::NAN)));
    }
    Ok(out)
}

fn js(e: parlife::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = barrierCall)]
pub fn barrier_call(inputs: &Inputs, vb: f64, t: f64) -> Result<Vec<f64>, JsError> {
    barrier_call_pair(inputs, vb, t).map_err(js)
}

#[wasm_bindgen(js_name = solveBarrier)]
pub fn solve_barrier(inputs: &Inputs) -> Result<BarrierReport, JsError> {
    barrier_report(inputs).map_err(js)
}

#[wasm_bindgen(js_name = equityCurve)]
pub fn equity_curve(inputs: &Inputs, points: usize) -> Result<Vec<f64>, JsError> {
    curve_blocks(inputs, points).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_inputs_are_the_reference_case() {
        assert_eq!(Inputs::new().scenario().unwrap(), Scenario::base());
    }

    #[test]
    fn barrier_call_lies_below_vanilla() {
        let v = barrier_call_pair(&Inputs::new(), 45.0, 30.0).unwrap();
        assert!(v[0] > 0.0 && v[0] < v[1]);
        assert_eq!(barrier_call_pair(&Inputs::new(), 0.0, 30.0).unwrap()[0], v[1]);
    }

    #[test]
    fn report_balances() {
        let r = barrier_report(&Inputs::new()).unwrap();
        assert!(r.vb > 0.0 && r.vb < 100.0);
        assert!((r.equity - (r.firm_value - r.liability)).abs() < 1e-9);
        // k = 150 lies above the base barrier.
        assert_eq!(r.method(), "numeric-smallest-root");
    }

    #[test]
    fn curve_starts_at_zero_equity() {
        let n = 50;
        let c = curve_blocks(&Inputs::new(), n).unwrap();
        assert_eq!(c.len(), 4 * n);
        assert_eq!(c[n], 0.0);
        assert!(c[n..2 * n].windows(2).all(|w| w[1] >= w[0] - 1e-9));
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        let bad = Inputs { sigma: 0.0, ..Inputs::new() };
        assert!(barrier_report(&bad).is_err());
        assert!(curve_blocks(&bad, 10).is_err());
    }
}
