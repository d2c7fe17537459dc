//! The endogenous bankruptcy barrier: the smooth-pasting residual, its
//! closed-form roots, the numeric smallest-root search, and the checks of
//! the model's standing assumptions.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{domain, Error, Result};
use crate::integrals::{cdo_integrals, delta_dvb_integrals, delta_integrals, TimeIntegrals};
use crate::math::{a_constants, lambdas, long_run_constant, AConstants};
use crate::params::Scenario;
use crate::quad::TOL_DEFAULT;
use crate::valuation::{firm_value, liability_parts};

/// Number of log-spaced points of the root scan.
pub const SCAN_POINTS: usize = 2048;
/// Lower end of the scan as a fraction of `V0`.
pub const SCAN_FLOOR: f64 = 1e-6;
/// Relative width at which bisection stops.
pub const ROOT_REL_TOL: f64 = 1e-10;
/// Residuals within this multiple of the constant term count as zero.
pub const PLATEAU_TOL: f64 = 1e-10;

/// How a barrier was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolveMethod {
    ClosedFormAlphaZero,
    ClosedFormAboveK,
    NumericSmallestRoot,
    ImmediateBankruptcy,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveMethod::ClosedFormAlphaZero => "closed-form-alpha-zero",
            SolveMethod::ClosedFormAboveK => "closed-form-above-k",
            SolveMethod::NumericSmallestRoot => "numeric-smallest-root",
            SolveMethod::ImmediateBankruptcy => "immediate-bankruptcy",
        }
    }
}

/// Each standing assumption of the model, evaluated for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionReport {
    /// `alpha < alpha_bar`: equity stays nonnegative above the barrier.
    pub alpha_below_bar: bool,
    /// `alpha < alpha_tilde`: the smooth-pasting equation has one root.
    pub alpha_below_tilde: bool,
    /// The guarantee part of the liability is worth at least `TB1`.
    pub guarantee_value_exceeds_tb: bool,
    /// `int_0^T c_do >= tau2 int_0^inf c_do`.
    pub surplus_value_exceeds_tb: bool,
    /// Sufficient condition for the barrier to be continuous in the rates.
    pub continuity_sufficient: bool,
    /// Condition under which the optimal guarantee rate is positive.
    pub g_star_positive_condition: bool,
}

impl AssumptionReport {
    pub fn all(&self) -> bool {
        self.alpha_below_bar
            && self.alpha_below_tilde
            && self.guarantee_value_exceeds_tb
            && self.surplus_value_exceeds_tb
            && self.continuity_sufficient
            && self.g_star_positive_condition
    }
}

/// A solved barrier with the residual at the root and the diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierSolution {
    pub vb: f64,
    pub residual: f64,
    pub method: SolveMethod,
    pub diagnostics: AssumptionReport,
}

/// The coefficients of `h2(vb) = C - K/vb + alpha (tau2 J_inf(vb) - J_T(vb))`,
/// where `J_T` and `J_inf` integrate the barrier delta `D(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PastingCoefficients {
    /// `C = 1 + rho (lambda2 + lambda3) + 2 (1 - rho) A2`.
    pub c: f64,
    /// `K = 2(P - G/r) A1/(rT) + 2 (G/r) A2 - tau1 (G/r)(lambda2 + lambda3)`.
    pub k_num: f64,
    pub a: AConstants,
}

/// Evaluates `C`, `K` and the `A` constants of a scenario.
pub fn pasting_coefficients(s: &Scenario) -> PastingCoefficients {
    let m = &s.market;
    let a = a_constants(m, s.contract.t_mat, &s.frictions);
    let lam = lambdas(m);
    let gr = s.contract.g_total / m.r;
    let t = s.contract.t_mat;
    let c = long_run_constant(&lam, a.a2, s.frictions.rho);
    let k_num = 2.0 * (s.contract.p_lump - gr) * a.a1 / (m.r * t) + 2.0 * gr * a.a2
        - s.frictions.tau1 * gr * lam.exponent();
    PastingCoefficients { c, k_num, a }
}

/// Integrals of `D(t)` at `vb` for the scenario's market, threshold and
/// maturity, to tolerance `tol`.
pub fn delta_time_integrals(s: &Scenario, vb: f64, a: &AConstants, tol: f64) -> Result<TimeIntegrals> {
    delta_integrals(&s.market, vb, s.contract.k, a, s.contract.t_mat, tol)
}

/// The smooth-pasting residual `h2(vb)`; its smallest root is the barrier.
pub fn smooth_pasting_residual(s: &Scenario, vb: f64) -> Result<f64> {
    if !(vb > 0.0 && vb.is_finite()) {
        return Err(domain(format!("residual needs vb > 0, got {vb}")));
    }
    let pc = pasting_coefficients(s);
    let j = if s.contract.alpha == 0.0 {
        TimeIntegrals { finite: 0.0, perpetual: 0.0 }
    } else {
        delta_time_integrals(s, vb, &pc.a, TOL_DEFAULT)?
    };
    Ok(residual_from(&pc, s, vb, &j))
}

fn residual_from(pc: &PastingCoefficients, s: &Scenario, vb: f64, j: &TimeIntegrals) -> f64 {
    let alpha = s.contract.alpha;
    pc.c - pc.k_num / vb + alpha * (s.frictions.tau2 * j.perpetual - j.finite)
}

/// The barrier without participation, `K / C`.
pub fn vb_closed_form_alpha0(s: &Scenario) -> Result<f64> {
    if s.contract.alpha != 0.0 {
        return Err(domain(format!("closed form needs alpha = 0, got {}", s.contract.alpha)));
    }
    let pc = pasting_coefficients(s);
    if !(pc.k_num > 0.0 && pc.c > 0.0) {
        return Err(Error::Solver(format!(
            "no positive barrier without participation: K = {}, C = {}",
            pc.k_num, pc.c
        )));
    }
    Ok(pc.k_num / pc.c)
}

/// The root of the residual on `[k, inf)`, where the delta integrals are
/// `A4 - (k/vb) A6` and `A3 - (k/vb) A5`:
/// `(K + alpha k (tau2 A5 - A6)) / (C + alpha (tau2 A3 - A4))`.
/// Returned only when it lies at or above `k` and `alpha < alpha_tilde`.
pub fn vb_closed_form_above_k(s: &Scenario) -> Option<f64> {
    let pc = pasting_coefficients(s);
    let alpha = s.contract.alpha;
    let tau2 = s.frictions.tau2;
    let k = s.contract.k;
    let a = &pc.a;
    let num = pc.k_num + alpha * k * (tau2 * a.a5 - a.a6);
    let den = pc.c + alpha * (tau2 * a.a3 - a.a4);
    let vb = num / den;
    (den > 0.0 && vb > 0.0 && vb >= k && a.alpha_tilde.exceeds(alpha)).then_some(vb)
}

type TableKey = [u64; 6];

/// Lazily filled delta integrals on the scan grid of one
/// (market, threshold, maturity, `V0`) combination. The integrals do not
/// depend on the rates, taxes, bankruptcy loss or lump sum, so every solve
/// in an optimization reuses them.
struct ScanTable {
    grid: Vec<f64>,
    cells: Vec<OnceLock<Result<TimeIntegrals>>>,
}

fn scan_grid(v0: f64) -> Vec<f64> {
    let lo = (SCAN_FLOOR * v0).ln();
    let hi = v0.ln();
    (0..SCAN_POINTS)
        .map(|i| {
            if i + 1 == SCAN_POINTS {
                v0
            } else {
                (lo + (hi - lo) * i as f64 / (SCAN_POINTS - 1) as f64).exp()
            }
        })
        .collect()
}

fn table_for(s: &Scenario) -> Arc<ScanTable> {
    static TABLES: OnceLock<Mutex<HashMap<TableKey, Arc<ScanTable>>>> = OnceLock::new();
    let key = [
        s.market.r.to_bits(),
        s.market.nu.to_bits(),
        s.market.sigma.to_bits(),
        s.contract.k.to_bits(),
        s.contract.t_mat.to_bits(),
        s.v0.to_bits(),
    ];
    let mut map = TABLES.get_or_init(Default::default).lock().unwrap_or_else(|p| p.into_inner());
    if map.len() > 256 {
        map.clear();
    }
    map.entry(key)
        .or_insert_with(|| {
            let grid = scan_grid(s.v0);
            let cells = (0..grid.len()).map(|_| OnceLock::new()).collect();
            Arc::new(ScanTable { grid, cells })
        })
        .clone()
}

/// Evaluates the residual with cached delta integrals.
struct Pasting<'a> {
    s: &'a Scenario,
    pc: PastingCoefficients,
    table: Arc<ScanTable>,
    /// Upper bound of `tau2 J_inf - J_T`, used to certify negative residuals
    /// without quadrature.
    j_bound: f64,
}

impl<'a> Pasting<'a> {
    fn new(s: &'a Scenario) -> Self {
        let m = &s.market;
        let l1 = lambdas(m).lambda1;
        // D(t) <= 2 e^{-nu t}(max(l1, 0) + 1/(sigma sqrt(2 pi t))) and D >= 0.
        let j_inf = 2.0 * (l1.max(0.0) / m.nu + 1.0 / (m.sigma * (2.0 * m.nu).sqrt()));
        Self { s, pc: pasting_coefficients(s), table: table_for(s), j_bound: s.frictions.tau2 * j_inf }
    }

    fn at(&self, vb: f64) -> Result<f64> {
        let j = delta_time_integrals(self.s, vb, &self.pc.a, TOL_DEFAULT)?;
        Ok(residual_from(&self.pc, self.s, vb, &j))
    }

    fn at_grid(&self, i: usize) -> Result<f64> {
        let vb = self.table.grid[i];
        let alpha = self.s.contract.alpha;
        let sure = self.pc.c - self.pc.k_num / vb;
        if alpha == 0.0 {
            return Ok(sure);
        }
        if sure + alpha * self.j_bound < 0.0 {
            return Ok(sure + alpha * self.j_bound);
        }
        let j = self.table.cells[i]
            .get_or_init(|| delta_time_integrals(self.s, vb, &self.pc.a, TOL_DEFAULT))
            .clone()?;
        Ok(residual_from(&self.pc, self.s, vb, &j))
    }

    /// Whether a nonnegative residual at `vb` marks a root crossing rather
    /// than a zero plateau above the threshold.
    fn is_crossing(&self, vb: f64, res: f64) -> bool {
        res > PLATEAU_TOL * self.pc.c.abs() || (res >= 0.0 && vb < self.s.contract.k)
    }

    /// Smallest root on the scan grid, or `None` when the residual stays
    /// negative up to `V0`.
    fn smallest_root(&self) -> Result<Option<(f64, f64)>> {
        let grid = &self.table.grid;
        let first = self.at_grid(0)?;
        if first >= 0.0 {
            return Err(Error::Solver(format!(
                "residual {first} is nonnegative at vb = {}, contradicting its limit at 0",
                grid[0]
            )));
        }
        for i in 1..grid.len() {
            let res = self.at_grid(i)?;
            if self.is_crossing(grid[i], res) {
                return self.refine(grid[i - 1], grid[i]).map(Some);
            }
        }
        Ok(None)
    }

    /// Locates the crossing in `(lo, hi)` at 4x density, then bisects.
    fn refine(&self, lo: f64, hi: f64) -> Result<(f64, f64)> {
        let (mut lo, mut hi) = (lo, hi);
        let step = (hi / lo).ln() / 4.0;
        let base = lo;
        for j in 1..4 {
            let x = base * (step * j as f64).exp();
            let res = self.at(x)?;
            if self.is_crossing(x, res) {
                hi = x;
                break;
            }
            lo = x;
        }
        while hi - lo > ROOT_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            let res = self.at(mid)?;
            if self.is_crossing(mid, res) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok((hi, self.at(hi)?))
    }
}

/// Barrier and method without the assumption diagnostics.
pub fn solve_vb_value(s: &Scenario) -> Result<(f64, SolveMethod)> {
    s.validate()?;
    if s.contract.alpha == 0.0 {
        let vb = vb_closed_form_alpha0(s)?;
        return Ok(cap(s, vb, SolveMethod::ClosedFormAlphaZero));
    }
    if let Some(vb) = vb_closed_form_above_k(s) {
        return Ok(cap(s, vb, SolveMethod::ClosedFormAboveK));
    }
    solve_vb_numeric(s)
}

fn cap(s: &Scenario, vb: f64, method: SolveMethod) -> (f64, SolveMethod) {
    if vb >= s.v0 {
        (s.v0, SolveMethod::ImmediateBankruptcy)
    } else {
        (vb, method)
    }
}

/// The smallest root found by scan and bisection, skipping the closed forms.
pub fn solve_vb_numeric(s: &Scenario) -> Result<(f64, SolveMethod)> {
    s.validate()?;
    match Pasting::new(s).smallest_root()? {
        Some((vb, _)) if vb < s.v0 => Ok((vb, SolveMethod::NumericSmallestRoot)),
        _ => Ok((s.v0, SolveMethod::ImmediateBankruptcy)),
    }
}

/// The residual on the full scan grid, for diagnostics.
pub fn residual_scan(s: &Scenario) -> Result<Vec<(f64, f64)>> {
    let p = Pasting::new(s);
    let pc = &p.pc;
    p.table
        .grid
        .iter()
        .enumerate()
        .map(|(i, &vb)| {
            if s.contract.alpha == 0.0 {
                return Ok((vb, pc.c - pc.k_num / vb));
            }
            let j = p.table.cells[i]
                .get_or_init(|| delta_time_integrals(s, vb, &pc.a, TOL_DEFAULT))
                .clone()?;
            Ok((vb, residual_from(pc, s, vb, &j)))
        })
        .collect()
}

/// Solves for the barrier: the minimum of `V0` and the smallest root of the
/// smooth-pasting residual, with the assumption diagnostics.
pub fn solve_vb(s: &Scenario) -> Result<BarrierSolution> {
    let (vb, method) = solve_vb_value(s)?;
    let residual = smooth_pasting_residual(s, vb)?;
    let diagnostics = check_assumptions(s, vb)?;
    Ok(BarrierSolution { vb, residual, method, diagnostics })
}

/// `dh2/dvb = K/vb^2 + alpha (tau2 int_0^inf dD/dvb - int_0^T dD/dvb)`.
pub fn residual_slope(s: &Scenario, vb: f64, tol: f64) -> Result<f64> {
    let pc = pasting_coefficients(s);
    residual_slope_with(s, &pc, vb, tol)
}

pub(crate) fn residual_slope_with(s: &Scenario, pc: &PastingCoefficients, vb: f64, tol: f64) -> Result<f64> {
    let alpha = s.contract.alpha;
    let dj = if alpha == 0.0 {
        TimeIntegrals { finite: 0.0, perpetual: 0.0 }
    } else {
        delta_dvb_integrals(&s.market, vb, s.contract.k, &pc.a, s.contract.t_mat, tol)?
    };
    Ok(pc.k_num / (vb * vb) + alpha * (s.frictions.tau2 * dj.perpetual - dj.finite))
}

/// Evaluates every standing assumption at barrier `vb`.
pub fn check_assumptions(s: &Scenario, vb: f64) -> Result<AssumptionReport> {
    let pc = pasting_coefficients(s);
    let alpha = s.contract.alpha;
    let (gr, r, t_mat) = (s.contract.g_total / s.market.r, s.market.r, s.contract.t_mat);

    // Both inequalities are assumed at every asset value above the barrier.
    // Each side vanishes at the barrier, so their slopes there must be
    // ordered too; the check covers V0 and the slope at the barrier.
    let (guarantee_value_exceeds_tb, surplus_value_exceeds_tb) = if vb < s.v0 {
        let parts = liability_parts(s, vb, TOL_DEFAULT)?;
        let tb1 = firm_value(s, vb)?.tb1;
        let annuity = (1.0 - (-r * t_mat).exp()) / (r * t_mat);
        let guarantee = gr * (1.0 - (annuity - parts.i1) - parts.i2);
        let cdo = cdo_integrals(&s.market, s.v0, s.contract.k, vb, t_mat, TOL_DEFAULT)?;
        let e = lambdas(&s.market).exponent();
        let guarantee_slope = gr * (-2.0 * pc.a.a1 / (r * t_mat) + 2.0 * pc.a.a2) >= s.frictions.tau1 * gr * e;
        let j = delta_time_integrals(s, vb, &pc.a, TOL_DEFAULT)?;
        let surplus_slope = j.finite >= s.frictions.tau2 * j.perpetual;
        (
            guarantee >= tb1 && guarantee_slope,
            cdo.finite >= s.frictions.tau2 * cdo.perpetual && surplus_slope,
        )
    } else {
        (true, true)
    };

    let continuity_sufficient = if vb >= s.contract.k {
        true
    } else {
        // vb^2 dh2/dvb is affine in alpha, so its sign on [0, min(alpha_bar, 1)]
        // is settled at the two ends.
        let top = pc.a.alpha_bar.value().min(1.0);
        let at = |a: f64| residual_slope(&s.with_alpha(a), vb, TOL_DEFAULT).map(|x| x * vb * vb);
        at(0.0)? > 0.0 && at(top)? > 0.0
    };

    let g_star_positive_condition = g_star_positive(s)?;

    Ok(AssumptionReport {
        alpha_below_bar: pc.a.alpha_bar.exceeds(alpha),
        alpha_below_tilde: pc.a.alpha_tilde.exceeds(alpha),
        guarantee_value_exceeds_tb,
        surplus_value_exceeds_tb,
        continuity_sufficient,
        g_star_positive_condition,
    })
}

/// At `G = 0`: the residual slope at the barrier is nonzero and the firm
/// value increases in the guarantee rate.
fn g_star_positive(s: &Scenario) -> Result<bool> {
    let s0 = s.with_g_total(0.0);
    let (vb0, method) = solve_vb_value(&s0)?;
    if method == SolveMethod::ImmediateBankruptcy {
        return Ok(false);
    }
    if residual_slope(&s0, vb0, TOL_DEFAULT)? == 0.0 {
        return Ok(false);
    }
    Ok(crate::optimize::dv_dg(&s0, vb0)? > 0.0)
}
