//! The `validate` diagnostics and the `reproduce-paper` reference table.

use parlife::analysis::{
    asset_substitution, default_asset_grid, immediate_bankruptcy_ratio, positivity_threshold, Axis, Rate,
};
use parlife::barrier::{solve_vb, solve_vb_numeric, vb_closed_form_alpha0, SolveMethod};
use parlife::closed::{discounted_passage, down_and_out_call, first_passage_cdf, BarrierCallInputs};
use parlife::math::{a_constants, int_exp_cdf, int_exp_pdf_over_sqrt, lambdas, norm_cdf, norm_pdf, Horizon};
use parlife::mc::{mc_cohort, Estimate, McConfig};
use parlife::optimize::{optimize_alpha, optimize_separately};
use parlife::quad::{integrate_finite, integrate_semi_infinite};
use parlife::valuation::equity_formula;
use parlife::Scenario;

use crate::commands::{Report, Status};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::table::Table;

struct Checks {
    table: Table,
    failed: usize,
}

impl Checks {
    fn new() -> Self {
        Checks { table: Table::new(["check", "status", "value", "limit"]), failed: 0 }
    }

    /// Records `value <= limit`.
    fn at_most(&mut self, name: &str, value: f64, limit: f64) {
        self.record(name, value <= limit, value, limit);
    }

    fn flag(&mut self, name: &str, ok: bool) {
        self.record(name, ok, if ok { 1.0 } else { 0.0 }, 1.0);
    }

    fn record(&mut self, name: &str, ok: bool, value: f64, limit: f64) {
        if !ok {
            self.failed += 1;
        }
        self.table.push(vec![name.into(), if ok { "pass" } else { "fail" }.into(), value.into(), limit.into()]);
    }

    fn report(self) -> Report {
        let status = if self.failed == 0 { Status::Success } else { Status::Failed };
        Report { table: self.table, status }
    }
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Standing assumptions, closed forms against quadrature and the numeric
/// root, smooth pasting, and closed forms against Monte Carlo.
///
/// Monte Carlo uses `paths` (default 10^6, or 10^4 with `fast`) and
/// `steps_per_year` (default 252); the gate is 3 standard errors, or 10
/// with `fast`.
pub fn validate(cfg: &RunConfig, fast: bool) -> Result<Report, CliError> {
    let s = &cfg.scenario;
    let mut c = Checks::new();

    let sol = solve_vb(s)?;
    let d = sol.diagnostics;
    c.flag("assumption_alpha_below_bar", d.alpha_below_bar);
    c.flag("assumption_alpha_below_tilde", d.alpha_below_tilde);
    c.flag("assumption_guarantee_value_exceeds_tb", d.guarantee_value_exceeds_tb);
    c.flag("assumption_surplus_value_exceeds_tb", d.surplus_value_exceeds_tb);
    c.flag("assumption_continuity_sufficient", d.continuity_sufficient);

    let m = &s.market;
    let l1 = lambdas(m).lambda1;
    let (nu, sigma, t_mat) = (m.nu, m.sigma, s.contract.t_mat);
    let pdf = |u: f64| (-nu * u).exp() * norm_pdf(l1 * sigma * u.sqrt()) / u.sqrt();
    let cdf = |u: f64| (-nu * u).exp() * norm_cdf(l1 * sigma * u.sqrt());
    let tol = 1e-12;
    let pairs = [
        ("integral_pdf_finite", integrate_finite(pdf, 0.0, t_mat, tol)?.value, Horizon::Finite(t_mat), true),
        (
            "integral_pdf_infinite",
            integrate_semi_infinite(pdf, tol, |b| (-nu * b).exp() / (nu * (2.0 * std::f64::consts::PI * b).sqrt()))?
                .value,
            Horizon::Infinite,
            true,
        ),
        ("integral_cdf_finite", integrate_finite(cdf, 0.0, t_mat, tol)?.value, Horizon::Finite(t_mat), false),
        (
            "integral_cdf_infinite",
            integrate_semi_infinite(cdf, tol, |b| (-nu * b).exp() / nu)?.value,
            Horizon::Infinite,
            false,
        ),
    ];
    for (name, quad, h, is_pdf) in pairs {
        let closed = if is_pdf { int_exp_pdf_over_sqrt(l1, sigma, nu, h) } else { int_exp_cdf(l1, sigma, nu, h) };
        c.at_most(name, relative(closed, quad), 1e-8);
    }

    let s0 = s.with_alpha(0.0);
    let closed = vb_closed_form_alpha0(&s0)?;
    let (numeric, _) = solve_vb_numeric(&s0)?;
    if closed < s.v0 {
        c.at_most("barrier_closed_form_alpha0", relative(closed, numeric), 1e-8);
    }

    let vb = sol.vb;
    if sol.method != SolveMethod::ImmediateBankruptcy {
        let e = |v: f64| equity_formula(&s.with_v0(v), vb, 1e-11);
        let h = 1e-4 * vb;
        let (e0, e1, e2) = (e(vb)?, e(vb + h)?, e(vb + 2.0 * h)?);
        c.at_most("equity_at_barrier_over_v0", e0.abs() / s.v0, 1e-8);
        c.at_most("equity_slope_at_barrier", ((-3.0 * e0 + 4.0 * e1 - e2) / (2.0 * h)).abs(), 1e-4);

        let paths = cfg.count("paths")?.unwrap_or(if fast { 10_000 } else { 1_000_000 });
        let steps = cfg.count("steps_per_year")?.unwrap_or(252);
        let steps = u32::try_from(steps).map_err(|_| CliError::Config(format!("steps_per_year too large: {steps}")))?;
        let gate = if fast { 10.0 } else { 3.0 };
        let mc = McConfig::new(paths, steps, cfg.seed, t_mat);
        mc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let est = mc_cohort(s, vb, t_mat, &mc)?;
        let f = first_passage_cdf(s.v0, vb, t_mat, m)?;
        let gd = discounted_passage(s.v0, vb, t_mat, m)?;
        let cdo = down_and_out_call(&BarrierCallInputs { v: s.v0, k: s.contract.k, vb, t: t_mat }, m)?;
        let (r, g, p) = (m.r, s.contract.g_rate(), s.contract.p_rate());
        let disc = (-r * t_mat).exp();
        let l = &est.liability;
        let mc_pairs: [(&str, Estimate, f64); 7] = [
            ("mc_barrier_call_z", est.barrier_call, cdo),
            ("mc_passage_cdf_z", est.passage_cdf, f),
            ("mc_discounted_passage_z", est.discounted_passage, gd),
            ("mc_guarantee_annuity_z", l.guarantee_annuity, g / r * (1.0 - disc * (1.0 - f) - gd)),
            ("mc_lump_sum_z", l.lump_sum, disc * p * (1.0 - f)),
            ("mc_recovery_z", l.recovery, (1.0 - s.frictions.rho) * vb * gd),
            ("mc_participation_z", l.participation, s.contract.alpha * cdo),
        ];
        for (name, e, exact) in mc_pairs {
            c.at_most(name, e.z_score(exact, 1e-12 * exact.abs().max(1.0)), gate);
        }
    }
    Ok(c.report())
}

/// Reference values of the reference case with their tolerances.
struct Row {
    quantity: &'static str,
    computed: Option<f64>,
    reference: f64,
    tolerance: f64,
}

/// The optimal rates, barrier, bounds and thresholds of the reference case
/// next to their published values. `fast` bisects thresholds and scans
/// asset values more coarsely and widens the tolerances by those widths.
pub fn reproduce(fast: bool) -> Result<Report, CliError> {
    let s = Scenario::base();
    let (bisect, v_step) = if fast { (2e-3, 0.02) } else { (1e-4, 0.01) };
    let mut rows = Vec::new();

    let sep = optimize_separately(&s)?;
    rows.push(Row { quantity: "alpha_star", computed: Some(sep.alpha.arg), reference: 0.099, tolerance: 0.005 });
    rows.push(Row {
        quantity: "g_over_p_star",
        computed: Some(sep.g.arg * s.contract.t_mat / s.contract.p_lump),
        reference: 0.0191,
        tolerance: 0.0005,
    });
    rows.push(Row { quantity: "vb_over_v0", computed: Some(sep.vb / s.v0), reference: 0.4536, tolerance: 0.005 });
    let bar = a_constants(&s.market, s.contract.t_mat, &s.frictions).alpha_bar.value();
    rows.push(Row { quantity: "alpha_bar", computed: Some(bar), reference: 0.1171, tolerance: 5e-5 });
    rows.push(Row {
        quantity: "immediate_bankruptcy_g_over_p",
        computed: Some(immediate_bankruptcy_ratio(&s)?),
        reference: 0.111,
        tolerance: 0.003,
    });

    let thresholds = [
        ("alpha_zero_tau2_below", Rate::Participation, Axis::Tau2, (0.0, 0.35), 0.08, 0.01),
        ("alpha_zero_p_over_v0_above", Rate::Participation, Axis::POverV0, (0.5, 3.0), 1.5, 0.05),
        ("alpha_zero_g_over_p_above", Rate::Participation, Axis::GOverP, (0.0, 0.11), 0.07, 0.005),
        ("g_zero_p_over_v0_above", Rate::Guarantee, Axis::POverV0, (0.5, 4.0), 2.6, 0.1),
        ("g_zero_tau1_below", Rate::Guarantee, Axis::Tau1, (0.0, 0.35), 0.001, 0.001),
    ];
    for (quantity, rate, axis, (lo, hi), reference, tol) in thresholds {
        let t = positivity_threshold(&s, rate, axis, lo, hi, bisect)?;
        let widen = if fast { bisect * (hi - lo).max(1.0) } else { 0.0 };
        rows.push(Row { quantity, computed: t.value, reference, tolerance: tol + widen });
    }

    let grid: Vec<f64> = if fast {
        (25..=100).map(|i| s.v0 * i as f64 * v_step).collect()
    } else {
        default_asset_grid(s.v0)
    };
    let widen = if fast { v_step } else { 0.0 };
    let onset = asset_substitution(&s, &grid, &[0.0], &[s.contract.t_mat])?
        .onset(0.0, s.contract.t_mat)
        .map(|v| v / s.v0);
    rows.push(Row { quantity: "substitution_onset_alpha0", computed: onset, reference: 0.75, tolerance: 0.05 + widen });
    for (quantity, t_mat) in [
        ("substitution_points_alpha_star_t10", 10.0),
        ("substitution_points_alpha_star_t30", 30.0),
        ("substitution_points_alpha_star_t50", 50.0),
    ] {
        let a = optimize_alpha(&s.with_t_mat(t_mat))?.arg;
        let rep = asset_substitution(&s, &grid, &[a], &[t_mat])?;
        let bad = rep.entries.iter().filter(|e| e.error.is_some() || e.substitution()).count();
        rows.push(Row { quantity, computed: Some(bad as f64), reference: 0.0, tolerance: 0.0 });
    }

    let mut table = Table::new(["quantity", "computed", "reference", "tolerance", "status"]);
    let mut failed = 0;
    for r in rows {
        let ok = r.computed.is_some_and(|x| (x - r.reference).abs() <= r.tolerance + 1e-12);
        if !ok {
            failed += 1;
        }
        table.push(vec![
            r.quantity.into(),
            r.computed.into(),
            r.reference.into(),
            r.tolerance.into(),
            if ok { "pass" } else { "fail" }.into(),
        ]);
    }
    let status = if failed == 0 { Status::Success } else { Status::Failed };
    Ok(Report { table, status })
}
