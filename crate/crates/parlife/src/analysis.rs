//! Parameter sweeps, positivity regions of the optimal rates, sensitivity of
//! the optimal participation rate, and detection of the asset-substitution
//! effect.
//!
//! Every sweep evaluates its grid points in parallel and keeps them in grid
//! order. A point that fails is kept as a row carrying its error message.

use rayon::prelude::*;

use crate::barrier::{pasting_coefficients, solve_vb_value, SolveMethod};
use crate::error::{invalid, Result};
use crate::optimize::{alpha_bracket, dv_dalpha, dv_dg, g_max, optimize_alpha, optimize_g, POSITIVE_THRESHOLD};
use crate::params::Scenario;
use crate::valuation::firm_value_tol;

/// Central-difference step in `sigma` for the substitution report.
pub const SIGMA_STEP: f64 = 1e-4;
/// Quadrature tolerance for values that are differenced in `sigma`.
pub const SUBSTITUTION_TOL: f64 = 1e-11;

/// Scenario parameter varied along a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Alpha,
    /// `G/P`, with `P` fixed.
    GOverP,
    /// `P/V0`, with `V0` and `G/P` fixed.
    POverV0,
    /// Asset value `V0`.
    V0,
    Nu,
    Sigma,
    TMat,
    Tau1,
    Tau2,
}

impl Axis {
    pub const ALL: [Axis; 9] = [
        Axis::Alpha,
        Axis::GOverP,
        Axis::POverV0,
        Axis::V0,
        Axis::Nu,
        Axis::Sigma,
        Axis::TMat,
        Axis::Tau1,
        Axis::Tau2,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::GOverP => "g_over_p",
            Axis::POverV0 => "p_over_v0",
            Axis::V0 => "v0",
            Axis::Nu => "nu",
            Axis::Sigma => "sigma",
            Axis::TMat => "t_mat",
            Axis::Tau1 => "tau1",
            Axis::Tau2 => "tau2",
        }
    }

    pub fn from_name(name: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.name() == name)
    }

    /// The scenario with this parameter set to `x`.
    pub fn apply(&self, s: &Scenario, x: f64) -> Scenario {
        match self {
            Axis::Alpha => s.with_alpha(x),
            Axis::GOverP => s.with_g_over_p(x),
            Axis::POverV0 => s.with_p_lump_keep_ratio(x * s.v0),
            Axis::V0 => s.with_v0(x),
            Axis::Nu => s.with_nu(x),
            Axis::Sigma => s.with_sigma(x),
            Axis::TMat => s.with_t_mat(x),
            Axis::Tau1 => s.with_tau1(x),
            Axis::Tau2 => s.with_tau2(x),
        }
    }

    /// Current value of this parameter in `s`.
    pub fn value(&self, s: &Scenario) -> f64 {
        match self {
            Axis::Alpha => s.contract.alpha,
            Axis::GOverP => s.g_over_p(),
            Axis::POverV0 => s.contract.p_lump / s.v0,
            Axis::V0 => s.v0,
            Axis::Nu => s.market.nu,
            Axis::Sigma => s.market.sigma,
            Axis::TMat => s.contract.t_mat,
            Axis::Tau1 => s.frictions.tau1,
            Axis::Tau2 => s.frictions.tau2,
        }
    }
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x: f64,
    /// One value per column, empty when `error` is set.
    pub values: Vec<f64>,
    pub error: Option<String>,
}

/// Outputs of a one-dimensional sweep, one row per grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub axis: Axis,
    pub columns: Vec<&'static str>,
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    /// Values of one column, `None` on failed rows.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let j = self.columns.iter().position(|c| *c == name)?;
        Some(self.rows.iter().map(|r| r.values.get(j).copied()).collect())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| r.error.is_some()).count()
    }

    /// Grid value at the largest entry of a column, skipping failed rows.
    pub fn argmax(&self, name: &str) -> Option<f64> {
        let col = self.column(name)?;
        self.rows
            .iter()
            .zip(col)
            .filter_map(|(r, v)| v.map(|v| (r.x, v)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(x, _)| x)
    }
}

fn tabulate<F>(axis: Axis, columns: Vec<&'static str>, grid: &[f64], f: F) -> SweepTable
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let rows = grid
        .par_iter()
        .map(|&x| match f(x) {
            Ok(values) => SweepRow { x, values, error: None },
            Err(e) => SweepRow { x, values: Vec::new(), error: Some(e.to_string()) },
        })
        .collect();
    SweepTable { axis, columns, rows }
}

fn flag(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Barrier along the `alpha` or `G/P` axis. Columns: `vb`, `vb_over_v0`,
/// `immediate` (1 when the firm is bankrupt at once).
///
/// Points with `alpha >= alpha_bar` fail, as equity can turn negative there.
pub fn sweep_vb(s: &Scenario, axis: Axis, grid: &[f64]) -> Result<SweepTable> {
    if !matches!(axis, Axis::Alpha | Axis::GOverP) {
        return Err(invalid(format!("barrier sweep runs over alpha or g_over_p, not {}", axis.name())));
    }
    let alpha_bar = pasting_coefficients(s).a.alpha_bar;
    Ok(tabulate(axis, vec!["vb", "vb_over_v0", "immediate"], grid, |x| {
        if axis == Axis::Alpha && !alpha_bar.exceeds(x) {
            return Err(invalid(format!("alpha {x} is not below alpha_bar {}", alpha_bar.value())));
        }
        let sx = axis.apply(s, x);
        sx.validate()?;
        let (vb, method) = solve_vb_value(&sx)?;
        Ok(vec![vb, vb / sx.v0, flag(method == SolveMethod::ImmediateBankruptcy)])
    }))
}

/// The ratio `G/P` at which the barrier reaches `V0`.
pub fn immediate_bankruptcy_ratio(s: &Scenario) -> Result<f64> {
    Ok(g_max(s)? * s.contract.t_mat / s.contract.p_lump)
}

const VALUE_COLUMNS: [&str; 7] = ["vb", "v", "equity", "liability", "tb1", "tb2", "bc"];

fn value_row(s: &Scenario, vb: f64) -> Result<Vec<f64>> {
    let b = firm_value_tol(s, vb, crate::quad::TOL_DEFAULT)?;
    Ok(vec![vb, b.firm_value, b.equity, b.l_total, b.tb1, b.tb2, b.bc])
}

/// Firm value, equity and liability along a `G/P` grid, with the barrier
/// solved at every point.
pub fn curves_vs_guarantee(s: &Scenario, grid: &[f64]) -> Result<SweepTable> {
    s.validate()?;
    Ok(tabulate(Axis::GOverP, VALUE_COLUMNS.to_vec(), grid, |x| {
        let sx = s.with_g_over_p(x);
        sx.validate()?;
        value_row(&sx, solve_vb_value(&sx)?.0)
    }))
}

/// Firm value, equity and liability along a grid of asset values, with the
/// barrier solved once at the scenario's own asset value.
pub fn curves_vs_asset(s: &Scenario, grid: &[f64]) -> Result<SweepTable> {
    s.validate()?;
    let (vb, _) = solve_vb_value(s)?;
    Ok(tabulate(Axis::V0, VALUE_COLUMNS.to_vec(), grid, |v| {
        if !(v > 0.0 && v.is_finite()) {
            return Err(invalid(format!("asset value must be > 0, got {v}")));
        }
        value_row(&s.with_v0(v), vb)
    }))
}

/// Optimal participation rate along a `nu`, `T` or `tau2` grid. Columns:
/// `alpha_star`, `alpha_cap` (upper end of the bracket), `boundary`, `vb`, `v`.
pub fn sensitivity_alpha_star(s: &Scenario, axis: Axis, grid: &[f64]) -> Result<SweepTable> {
    if !matches!(axis, Axis::Nu | Axis::TMat | Axis::Tau2) {
        return Err(invalid(format!("sensitivity runs over nu, t_mat or tau2, not {}", axis.name())));
    }
    let columns = vec!["alpha_star", "alpha_cap", "boundary", "vb", "v"];
    // Each optimization is parallel inside, so the grid runs in order.
    let rows = grid
        .iter()
        .map(|&x| {
            let sx = axis.apply(s, x);
            match sx.validate().and_then(|_| optimize_alpha(&sx)) {
                Ok(o) => SweepRow {
                    x,
                    values: vec![o.arg, alpha_bracket(&sx).1, flag(o.boundary_flag), o.vb, o.objective],
                    error: None,
                },
                Err(e) => SweepRow { x, values: Vec::new(), error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SweepTable { axis, columns, rows })
}

/// The rate whose optimum is examined for positivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rate {
    Participation,
    Guarantee,
}

impl Rate {
    pub fn name(&self) -> &'static str {
        match self {
            Rate::Participation => "alpha_star",
            Rate::Guarantee => "g_star",
        }
    }
}

/// Optimal `alpha` or per-cohort `g` of the scenario.
pub fn optimal_rate(s: &Scenario, rate: Rate) -> Result<f64> {
    Ok(match rate {
        Rate::Participation => optimize_alpha(s)?.arg,
        Rate::Guarantee => optimize_g(s)?.arg,
    })
}

/// Derivative of the firm value in the rate, taken at a zero rate.
pub fn marginal_value_at_zero(s: &Scenario, rate: Rate) -> Result<f64> {
    let s0 = match rate {
        Rate::Participation => s.with_alpha(0.0),
        Rate::Guarantee => s.with_g_total(0.0),
    };
    let (vb, _) = solve_vb_value(&s0)?;
    match rate {
        Rate::Participation => dv_dalpha(&s0, vb),
        Rate::Guarantee => dv_dg(&s0, vb),
    }
}

/// One cell of a positivity region.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub x: f64,
    pub y: f64,
    /// Optimal `alpha`, or the optimal guarantee as a ratio `G/P`.
    pub optimum: Option<f64>,
    pub error: Option<String>,
}

impl RegionCell {
    pub fn positive(&self) -> Option<bool> {
        self.optimum.map(|o| o > POSITIVE_THRESHOLD)
    }
}

/// Positivity of an optimal rate over a two-dimensional grid, stored row by
/// row (`y` outer, `x` inner).
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub rate: Rate,
    pub x_axis: Axis,
    pub y_axis: Axis,
    pub cells: Vec<RegionCell>,
}

/// Optimizes the rate at every `(x, y)` cell.
pub fn region_scan(s: &Scenario, rate: Rate, x_axis: Axis, xs: &[f64], y_axis: Axis, ys: &[f64]) -> Result<RegionGrid> {
    s.validate()?;
    let cells = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| (x, y)))
        .map(|(x, y)| {
            let sc = y_axis.apply(&x_axis.apply(s, x), y);
            let opt = sc.validate().and_then(|_| optimal_rate(&sc, rate)).map(|o| match rate {
                Rate::Participation => o,
                Rate::Guarantee => o * sc.contract.t_mat / sc.contract.p_lump,
            });
            match opt {
                Ok(o) => RegionCell { x, y, optimum: Some(o), error: None },
                Err(e) => RegionCell { x, y, optimum: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(RegionGrid { rate, x_axis, y_axis, cells })
}

/// Parameter value at which the marginal value of a rate at zero changes
/// sign along an axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Threshold {
    pub rate: Rate,
    pub axis: Axis,
    /// `None` when the sign is the same at both ends of the bracket.
    pub value: Option<f64>,
    /// True when the rate pays below the threshold and not above it.
    pub positive_below: bool,
    pub bracket: (f64, f64),
}

/// Bisects the sign of [`marginal_value_at_zero`] on `[lo, hi]` to width `tol`.
pub fn positivity_threshold(s: &Scenario, rate: Rate, axis: Axis, lo: f64, hi: f64, tol: f64) -> Result<Threshold> {
    let pays = |x: f64| -> Result<bool> { Ok(marginal_value_at_zero(&axis.apply(s, x), rate)? > 0.0) };
    let (at_lo, at_hi) = (pays(lo)?, pays(hi)?);
    let mut t = Threshold { rate, axis, value: None, positive_below: at_lo, bracket: (lo, hi) };
    if at_lo == at_hi {
        return Ok(t);
    }
    let (mut a, mut b) = (lo, hi);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if pays(mid)? == at_lo {
            a = mid;
        } else {
            b = mid;
        }
    }
    t.value = Some(0.5 * (a + b));
    Ok(t)
}

/// Volatility sensitivities of equity and liability at one asset value.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionEntry {
    pub v: f64,
    pub alpha: f64,
    pub t_mat: f64,
    pub de_dsigma: f64,
    pub dl_dsigma: f64,
    pub error: Option<String>,
}

impl SubstitutionEntry {
    /// Equity gains and liabilities lose from a volatility increase.
    pub fn substitution(&self) -> bool {
        self.error.is_none() && self.de_dsigma > 0.0 && self.dl_dsigma < 0.0
    }
}

/// Central differences in `sigma` with step `sigma_step`. The barrier is
/// solved again at each bumped volatility.
#[derive(Debug, Clone, PartialEq)]
pub struct SubstitutionReport {
    pub sigma_step: f64,
    pub entries: Vec<SubstitutionEntry>,
}

impl SubstitutionReport {
    fn select(&self, alpha: f64, t_mat: f64) -> impl Iterator<Item = &SubstitutionEntry> {
        self.entries.iter().filter(move |e| e.alpha == alpha && e.t_mat == t_mat)
    }

    /// Asset values flagged for one `(alpha, T)` pair.
    pub fn region(&self, alpha: f64, t_mat: f64) -> Vec<f64> {
        self.select(alpha, t_mat).filter(|e| e.substitution()).map(|e| e.v).collect()
    }

    /// Smallest flagged asset value for one `(alpha, T)` pair.
    pub fn onset(&self, alpha: f64, t_mat: f64) -> Option<f64> {
        self.region(alpha, t_mat).into_iter().reduce(f64::min)
    }
}

/// `[0.5 V0, 2 V0]` in steps of `0.01 V0`.
pub fn default_asset_grid(v0: f64) -> Vec<f64> {
    (50..=200).map(|i| v0 * i as f64 / 100.0).collect()
}

/// `dE/dsigma` and `dL/dsigma` at every asset value for each pair of
/// participation rate and maturity. Barriers are solved at the scenario's
/// own asset value.
pub fn asset_substitution(s: &Scenario, v_grid: &[f64], alphas: &[f64], t_values: &[f64]) -> Result<SubstitutionReport> {
    s.validate()?;
    let h = SIGMA_STEP;
    let mut entries = Vec::with_capacity(v_grid.len() * alphas.len() * t_values.len());
    for &t_mat in t_values {
        for &alpha in alphas {
            let sc = s.with_alpha(alpha).with_t_mat(t_mat);
            let sigma = sc.market.sigma;
            let up = sc.with_sigma(sigma + h);
            let dn = sc.with_sigma(sigma - h);
            let barriers = up.validate().and_then(|_| dn.validate()).and_then(|_| {
                Ok((solve_vb_value(&up)?.0, solve_vb_value(&dn)?.0))
            });
            let rows: Vec<SubstitutionEntry> = v_grid
                .par_iter()
                .map(|&v| {
                    let diff = barriers.clone().and_then(|(vb_up, vb_dn)| {
                        let bu = firm_value_tol(&up.with_v0(v), vb_up, SUBSTITUTION_TOL)?;
                        let bd = firm_value_tol(&dn.with_v0(v), vb_dn, SUBSTITUTION_TOL)?;
                        Ok(((bu.equity - bd.equity) / (2.0 * h), (bu.l_total - bd.l_total) / (2.0 * h)))
                    });
                    match diff {
                        Ok((de, dl)) => SubstitutionEntry { v, alpha, t_mat, de_dsigma: de, dl_dsigma: dl, error: None },
                        Err(e) => SubstitutionEntry {
                            v,
                            alpha,
                            t_mat,
                            de_dsigma: f64::NAN,
                            dl_dsigma: f64::NAN,
                            error: Some(e.to_string()),
                        },
                    }
                })
                .collect();
            entries.extend(rows);
        }
    }
    Ok(SubstitutionReport { sigma_step: h, entries })
}
