//! One function per subcommand, each producing a table and a status.

use parlife::analysis::{
    asset_substitution, curves_vs_asset, curves_vs_guarantee, default_asset_grid, region_scan, sensitivity_alpha_star,
    sweep_vb, Axis, Rate, SubstitutionEntry, SweepTable,
};
use parlife::barrier::{solve_vb, solve_vb_value};
use parlife::optimize::{optimize_alpha, optimize_g, optimize_joint, optimize_separately, OptimumResult};
use parlife::valuation::firm_value;

use crate::config::{parse_grid, RunConfig};
use crate::error::CliError;
use crate::table::{Cell, Table};

/// How a command ended when it produced output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// A check or acceptance row failed.
    Failed,
    /// Fewer than 90% of the rows could be computed.
    TooManyFailures,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Failed => 1,
            Status::TooManyFailures => 3,
        }
    }
}

pub struct Report {
    pub table: Table,
    pub status: Status,
}

impl Report {
    fn ok(table: Table) -> Self {
        Report { table, status: Status::Success }
    }

    /// Success when at least 90% of `total` rows were computed.
    fn rows(table: Table, total: usize, failed: usize) -> Self {
        let status = if 10 * (total - failed) >= 9 * total { Status::Success } else { Status::TooManyFailures };
        Report { table, status }
    }
}

fn range(a: f64, b: f64, h: f64) -> Vec<f64> {
    parse_grid(&format!("{a}:{b}:{h}")).unwrap_or_default()
}

pub fn price(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let (vb, method) = match cfg.number("vb")? {
        Some(vb) => (vb, "supplied"),
        None => {
            let (vb, m) = solve_vb_value(s)?;
            (vb, m.as_str())
        }
    };
    let b = firm_value(s, vb)?;
    let mut t = Table::new([
        "v0",
        "vb",
        "vb_over_v0",
        "method",
        "firm_value",
        "equity",
        "liability",
        "tb1",
        "tb2",
        "bc",
        "bankrupt",
    ]);
    t.push(vec![
        s.v0.into(),
        vb.into(),
        (vb / s.v0).into(),
        method.into(),
        b.firm_value.into(),
        b.equity.into(),
        b.l_total.into(),
        b.tb1.into(),
        b.tb2.into(),
        b.bc.into(),
        b.bankrupt.into(),
    ]);
    Ok(Report::ok(t))
}

pub fn solve_barrier(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let sol = solve_vb(s)?;
    let d = sol.diagnostics;
    let mut t = Table::new([
        "vb",
        "vb_over_v0",
        "method",
        "residual",
        "alpha_below_bar",
        "alpha_below_tilde",
        "guarantee_value_exceeds_tb",
        "surplus_value_exceeds_tb",
        "continuity_sufficient",
        "g_star_positive_condition",
    ]);
    t.push(vec![
        sol.vb.into(),
        (sol.vb / s.v0).into(),
        sol.method.as_str().into(),
        sol.residual.into(),
        d.alpha_below_bar.into(),
        d.alpha_below_tilde.into(),
        d.guarantee_value_exceeds_tb.into(),
        d.surplus_value_exceeds_tb.into(),
        d.continuity_sufficient.into(),
        d.g_star_positive_condition.into(),
    ]);
    Ok(Report::ok(t))
}

pub fn optimize(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let mode = cfg.text("mode").unwrap_or("separate").trim();
    // (alpha, g, vb, firm value, alpha at bound, g at bound)
    let row: (f64, f64, f64, f64, Option<bool>, Option<bool>) = match mode {
        "separate" => {
            let o = optimize_separately(s)?;
            let v = firm_value(&o.scenario, o.vb)?.firm_value;
            (o.alpha.arg, o.g.arg, o.vb, v, Some(o.alpha.boundary_flag), Some(o.g.boundary_flag))
        }
        "joint" => {
            let o = optimize_joint(s)?;
            if !o.converged {
                return Err(CliError::Numeric(format!("coordinate ascent did not converge in {} rounds", o.rounds)));
            }
            (o.alpha.arg, o.g.arg, o.vb, o.objective, Some(o.alpha.boundary_flag), Some(o.g.boundary_flag))
        }
        "alpha" => {
            let o: OptimumResult = optimize_alpha(s)?;
            (o.arg, s.contract.g_rate(), o.vb, o.objective, Some(o.boundary_flag), None)
        }
        "g" => {
            let o = optimize_g(s)?;
            (s.contract.alpha, o.arg, o.vb, o.objective, None, Some(o.boundary_flag))
        }
        other => return Err(CliError::Config(format!("mode: expected separate, joint, alpha or g, got {other:?}"))),
    };
    let (alpha, g, vb, v, ab, gb) = row;
    let flag = |b: Option<bool>| b.map_or(Cell::Empty, Cell::from);
    let mut t = Table::new([
        "mode",
        "alpha_star",
        "g_star",
        "g_over_p_star",
        "vb",
        "vb_over_v0",
        "firm_value",
        "alpha_at_bound",
        "g_at_bound",
    ]);
    t.push(vec![
        mode.into(),
        alpha.into(),
        g.into(),
        (g * s.contract.t_mat / s.contract.p_lump).into(),
        vb.into(),
        (vb / s.v0).into(),
        v.into(),
        flag(ab),
        flag(gb),
    ]);
    Ok(Report::ok(t))
}

fn sweep_report(table: SweepTable) -> Report {
    let mut header = vec![table.axis.name().to_string()];
    header.extend(table.columns.iter().map(|c| c.to_string()));
    header.push("error".to_string());
    let mut t = Table::new(header);
    let width = table.columns.len();
    let mut failed = 0;
    for row in &table.rows {
        let mut cells: Vec<Cell> = vec![row.x.into()];
        match &row.error {
            None => {
                cells.extend(row.values.iter().map(|&v| Cell::Num(v)));
                cells.push(Cell::Empty);
            }
            Some(e) => {
                failed += 1;
                cells.extend(std::iter::repeat_n(Cell::Empty, width));
                cells.push(e.clone().into());
            }
        }
        t.push(cells);
    }
    Report::rows(t, table.rows.len(), failed)
}

/// Runs the sweep named by `sweep`: `vb` (barrier along `alpha` or
/// `g_over_p`), `guarantee` (values along `G/P`), `asset` (values along the
/// asset value) or `sensitivity` (optimal `alpha` along `nu`, `t_mat` or
/// `tau2`).
pub fn sweep(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let table = match cfg.text("sweep").unwrap_or("vb").trim() {
        "vb" => {
            let axis = cfg.axis("axis", Axis::Alpha)?;
            let grid = cfg.grid("grid", || match axis {
                Axis::GOverP => range(0.0, 0.14, 0.005),
                _ => range(0.0, 0.1, 0.005),
            })?;
            sweep_vb(s, axis, &grid)?
        }
        "guarantee" => curves_vs_guarantee(s, &cfg.grid("grid", || range(0.0, 0.04, 0.001))?)?,
        "asset" => curves_vs_asset(s, &cfg.grid("grid", || default_asset_grid(s.v0))?)?,
        "sensitivity" => {
            let axis = cfg.axis("axis", Axis::Tau2)?;
            let grid = cfg.grid("grid", || match axis {
                Axis::Nu => range(0.02, 0.1, 0.01),
                Axis::TMat => range(10.0, 50.0, 5.0),
                _ => range(0.1, 0.5, 0.05),
            })?;
            sensitivity_alpha_star(s, axis, &grid)?
        }
        other => {
            return Err(CliError::Config(format!(
                "sweep: expected vb, guarantee, asset or sensitivity, got {other:?}"
            )))
        }
    };
    Ok(sweep_report(table))
}

pub fn regions(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let rate = cfg.rate()?;
    let x_axis = cfg.axis("x_axis", Axis::POverV0)?;
    let y_axis = cfg.axis("y_axis", Axis::GOverP)?;
    let xs = cfg.grid("x_grid", || range(0.5, 3.0, 0.25))?;
    let ys = cfg.grid("y_grid", || range(0.0, 0.1, 0.01))?;
    let grid = region_scan(s, rate, x_axis, &xs, y_axis, &ys)?;
    let optimum = match rate {
        Rate::Participation => "alpha_star",
        Rate::Guarantee => "g_over_p_star",
    };
    let mut t = Table::new([x_axis.name(), y_axis.name(), optimum, "positive", "error"]);
    let mut failed = 0;
    for c in &grid.cells {
        if c.error.is_some() {
            failed += 1;
        }
        t.push(vec![
            c.x.into(),
            c.y.into(),
            c.optimum.into(),
            c.positive().map_or(Cell::Empty, Cell::from),
            c.error.clone().map_or(Cell::Empty, Cell::from),
        ]);
    }
    Ok(Report::rows(t, grid.cells.len(), failed))
}

/// Volatility sensitivities over an asset grid. `alphas = optimal` uses the
/// optimal participation rate of each maturity.
pub fn asset_sub(cfg: &RunConfig) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let v_grid = cfg.grid("v_grid", || default_asset_grid(s.v0))?;
    let t_values = cfg.grid("t_values", || vec![s.contract.t_mat])?;
    let mut entries: Vec<SubstitutionEntry> = Vec::new();
    if cfg.text("alphas").map(str::trim) == Some("optimal") {
        for &t_mat in &t_values {
            let a = optimize_alpha(&s.with_t_mat(t_mat))?.arg;
            entries.extend(asset_substitution(s, &v_grid, &[a], &[t_mat])?.entries);
        }
    } else {
        let alphas = cfg.grid("alphas", || vec![0.0])?;
        entries = asset_substitution(s, &v_grid, &alphas, &t_values)?.entries;
    }
    let mut t = Table::new(["v", "v_over_v0", "alpha", "t_mat", "de_dsigma", "dl_dsigma", "substitution", "error"]);
    let mut failed = 0;
    for e in &entries {
        if e.error.is_some() {
            failed += 1;
        }
        let ok = e.error.is_none();
        t.push(vec![
            e.v.into(),
            (e.v / s.v0).into(),
            e.alpha.into(),
            e.t_mat.into(),
            if ok { e.de_dsigma.into() } else { Cell::Empty },
            if ok { e.dl_dsigma.into() } else { Cell::Empty },
            e.substitution().into(),
            e.error.clone().map_or(Cell::Empty, Cell::from),
        ]);
    }
    Ok(Report::rows(t, entries.len(), failed))
}
