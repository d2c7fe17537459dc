//! Property checks over randomly drawn parameters.

use parlife::barrier::solve_vb_value;
use parlife::closed::{
    discounted_passage, down_and_out_call, first_passage_cdf, vanilla_call, BarrierCallInputs,
};
use parlife::barrier::check_assumptions;
use parlife::math::{a_constants, lambdas, long_run_constant, norm_cdf};
use parlife::valuation::firm_value;
use parlife::{ContractParams, FrictionParams, MarketParams, Scenario};
use proptest::prelude::*;

fn market() -> impl Strategy<Value = MarketParams> {
    (0.001f64..0.1, 0.001f64..0.15, 0.05f64..0.6).prop_map(|(r, nu, sigma)| MarketParams { r, nu, sigma })
}

fn frictions() -> impl Strategy<Value = FrictionParams> {
    (0.0f64..=1.0, 0.0f64..1.0, 0.0f64..=1.0).prop_map(|(tau1, tau2, rho)| FrictionParams { tau1, tau2, rho })
}

/// Scenarios around the reference case, with `alpha` below both bounds.
fn scenario() -> impl Strategy<Value = Scenario> {
    (
        (0.005f64..0.03, 0.03f64..0.07, 0.12f64..0.3),
        (10.0f64..40.0, 60.0f64..120.0, 0.0f64..0.04, 110.0f64..200.0, 0.0f64..0.9),
        (0.2f64..0.4, 0.2f64..0.4, 0.3f64..0.7),
    )
        .prop_map(|((r, nu, sigma), (t_mat, p, gp, k, a_frac), (tau1, tau2, rho))| {
            let market = MarketParams { r, nu, sigma };
            let frictions = FrictionParams { tau1, tau2, rho };
            let c = a_constants(&market, t_mat, &frictions);
            let cap = c.alpha_bar.value().min(c.alpha_tilde.value()).min(1.0);
            Scenario {
                v0: 100.0,
                market,
                contract: ContractParams { t_mat, p_lump: p, g_total: gp * p, k, alpha: a_frac * cap },
                frictions,
            }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn smooth_pasting_constants_are_positive(m in market(), t_mat in 0.5f64..100.0, fr in frictions()) {
        let a = a_constants(&m, t_mat, &fr);
        prop_assert!(a.a1 > 0.0 && a.a2 > 0.0, "{a:?}");
        prop_assert!(a.a4 > 0.0 && a.a3 >= a.a4, "{a:?}");
        // A3 - A4 is the integral over [T, inf); strict order is only
        // representable while that tail exceeds the rounding of A3.
        let l1 = lambdas(&m).lambda1;
        let q1 = (l1 * l1 * m.sigma * m.sigma + 2.0 * m.nu).sqrt();
        let tail = 2.0 * (l1 / m.nu) * (-m.nu * t_mat).exp() * norm_cdf(l1 * m.sigma * t_mat.sqrt())
            + 2.0 * q1 / (m.sigma * m.nu) * norm_cdf(-q1 * t_mat.sqrt());
        prop_assert!(tail > 0.0);
        if tail > 1e-14 * a.a3 {
            prop_assert!(a.a3 > a.a4, "{a:?}");
        }
    }

    #[test]
    fn exponents_are_ordered(m in market(), rho in 0.0f64..=1.0, t_mat in 0.5f64..100.0) {
        let lam = lambdas(&m);
        prop_assert!(lam.lambda3 > lam.lambda2.abs());
        prop_assert!(lam.exponent() > 0.0);
        let a2 = a_constants(&m, t_mat, &FrictionParams { tau1: 0.0, tau2: 0.0, rho }).a2;
        prop_assert!(long_run_constant(&lam, a2, rho) > 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn barrier_call_bounds(m in market(), v in 1.0f64..300.0, k in 0.0f64..300.0, frac in 0.0f64..1.0, t in 0.01f64..60.0) {
        let vb = frac * v;
        let cdo = down_and_out_call(&BarrierCallInputs { v, k, vb, t }, &m).unwrap();
        let call = vanilla_call(v, k, t, &m).unwrap();
        prop_assert!(cdo >= -1e-12 * v && cdo <= call + 1e-10 * v, "{cdo} vs {call}");
    }

    #[test]
    fn passage_probabilities(m in market(), v in 1.0f64..300.0, frac in 0.01f64..1.0, t in 0.01f64..60.0) {
        let vb = frac * v;
        let f = first_passage_cdf(v, vb, t, &m).unwrap();
        let g = discounted_passage(v, vb, t, &m).unwrap();
        prop_assert!((0.0..=1.0 + 1e-12).contains(&f));
        prop_assert!(g >= -1e-15 && g <= f + 1e-12, "{g} vs {f}");
        let later = first_passage_cdf(v, vb, t * 1.5, &m).unwrap();
        prop_assert!(later >= f - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn valuation_identities(s in scenario()) {
        let (vb, _) = solve_vb_value(&s).unwrap();
        let b = firm_value(&s, vb).unwrap();
        prop_assert!(b.tb1 >= 0.0 && b.tb2 >= 0.0 && b.bc >= 0.0);
        prop_assert_eq!(b.firm_value, s.v0 + b.tb1 + b.tb2 - b.bc);
        prop_assert_eq!(b.equity, if b.bankrupt { 0.0 } else { b.firm_value - b.l_total });
        prop_assert!(b.equity >= -1e-6 * s.v0, "{b:?}");
    }

    /// Holds where participation is worth more than its tax benefit.
    #[test]
    fn barrier_rises_with_participation(s in scenario(), step in 0.0f64..0.5) {
        let lo = s.with_alpha(s.contract.alpha * step);
        let vb_lo = solve_vb_value(&lo).unwrap().0;
        let vb_hi = solve_vb_value(&s).unwrap().0;
        prop_assume!(check_assumptions(&lo, vb_lo).unwrap().surplus_value_exceeds_tb);
        prop_assume!(check_assumptions(&s, vb_hi).unwrap().surplus_value_exceeds_tb);
        prop_assert!(vb_hi >= vb_lo * (1.0 - 1e-9), "{vb_lo} vs {vb_hi}");
    }

    #[test]
    fn barrier_rises_with_maturity_at_fixed_rates(s in scenario(), stretch in 1.0f64..1.5) {
        prop_assume!(s.g_over_p() >= s.market.r);
        let longer = s.with_t_mat_keep_rates(s.contract.t_mat * stretch);
        let a = a_constants(&s.market, longer.contract.t_mat, &s.frictions);
        prop_assume!(a.alpha_tilde.exceeds(s.contract.alpha));
        let vb = solve_vb_value(&s).unwrap().0;
        prop_assert!(solve_vb_value(&longer).unwrap().0 >= vb * (1.0 - 1e-9));
    }
}
