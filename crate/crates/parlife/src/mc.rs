//! Monte Carlo estimates of the barrier call, the first-passage quantities
//! and the cohort liability, used as an independent check of the closed
//! forms.
//!
//! Log-asset paths are stepped exactly under the pricing measure (drift
//! `r - nu - sigma^2/2`). Between grid dates a Brownian bridge decides
//! whether the barrier was crossed, and a crossing is timed at the middle
//! of its step. Paths run in batches of [`BATCH_PATHS`]; batch `i` draws
//! from stream `i` of a ChaCha8 generator seeded with the configured seed,
//! and batch moments are merged in batch order, so results do not depend on
//! the number of threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, invalid, Result};
use crate::params::{MarketParams, Scenario};

/// Paths per independent random stream.
pub const BATCH_PATHS: u64 = 4096;

/// Bridge exponents above this give crossing probabilities below `e^-40`.
const BRIDGE_CUTOFF: f64 = 40.0;

/// Simulation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub paths: u64,
    pub steps_per_year: u32,
    pub seed: u64,
    /// Longest maturity that may be simulated, in years.
    pub horizon: f64,
}

impl McConfig {
    pub fn new(paths: u64, steps_per_year: u32, seed: u64, horizon: f64) -> Self {
        Self { paths, steps_per_year, seed, horizon }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths == 0 {
            return Err(invalid("paths must be >= 1"));
        }
        if self.steps_per_year == 0 {
            return Err(invalid("steps_per_year must be >= 1"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        Ok(())
    }
}

/// Sample mean with its standard error `sample std / sqrt(paths)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    /// Distance to `value` in standard errors, with `floor` as the smallest
    /// error used so that zero-variance estimates compare exactly.
    pub fn z_score(&self, value: f64, floor: f64) -> f64 {
        (self.mean - value).abs() / self.std_error.max(floor)
    }
}

/// Running mean and sum of squared deviations.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let d = x - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (x - self.mean);
    }

    fn merge(self, o: Moments) -> Moments {
        if o.n == 0.0 {
            return self;
        }
        if self.n == 0.0 {
            return o;
        }
        let n = self.n + o.n;
        let d = o.mean - self.mean;
        Moments { n, mean: self.mean + d * o.n / n, m2: self.m2 + o.m2 + d * d * self.n * o.n / n }
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1.0 { self.m2 / (self.n - 1.0) } else { 0.0 };
        Estimate { mean: self.mean, std_error: (var / self.n).sqrt() }
    }
}

/// Outcome of one path up to maturity.
#[derive(Debug, Clone, Copy)]
struct PathOutcome {
    /// Crossing time, or `None` when the path survives.
    tau: Option<f64>,
    terminal: f64,
}

/// Exact log-normal stepping with bridge-corrected barrier monitoring.
struct PathEngine {
    ln_v: f64,
    /// Log barrier, `-inf` when there is no barrier.
    ln_b: f64,
    drift: f64,
    vol: f64,
    dt: f64,
    steps: usize,
    bridge_scale: f64,
}

impl PathEngine {
    fn new(m: &MarketParams, v: f64, vb: f64, t: f64, cfg: &McConfig) -> Result<Self> {
        cfg.validate()?;
        m.validate()?;
        if !(v > 0.0 && v.is_finite()) {
            return Err(domain(format!("asset value must be > 0, got {v}")));
        }
        if !(vb >= 0.0 && vb.is_finite()) {
            return Err(domain(format!("barrier must be >= 0, got {vb}")));
        }
        if !(t > 0.0 && t <= cfg.horizon) {
            return Err(domain(format!("maturity {t} outside (0, {}]", cfg.horizon)));
        }
        let steps = ((t * cfg.steps_per_year as f64).ceil() as usize).max(1);
        let dt = t / steps as f64;
        let s2 = m.sigma * m.sigma;
        Ok(Self {
            ln_v: v.ln(),
            ln_b: if vb > 0.0 { vb.ln() } else { f64::NEG_INFINITY },
            drift: (m.r - m.nu - 0.5 * s2) * dt,
            vol: m.sigma * dt.sqrt(),
            dt,
            steps,
            bridge_scale: 2.0 / (s2 * dt),
        })
    }

    fn run(&self, rng: &mut ChaCha8Rng) -> PathOutcome {
        if self.ln_v <= self.ln_b {
            return PathOutcome { tau: Some(0.0), terminal: self.ln_v.exp() };
        }
        let mut x = self.ln_v;
        for i in 0..self.steps {
            let z: f64 = rng.sample(StandardNormal);
            let next = x + self.drift + self.vol * z;
            let hit = if next <= self.ln_b {
                true
            } else if self.ln_b.is_finite() {
                let expo = self.bridge_scale * (x - self.ln_b) * (next - self.ln_b);
                expo < BRIDGE_CUTOFF && rng.random::<f64>() < (-expo).exp()
            } else {
                false
            };
            if hit {
                return PathOutcome { tau: Some((i as f64 + 0.5) * self.dt), terminal: next.exp() };
            }
            x = next;
        }
        PathOutcome { tau: None, terminal: x.exp() }
    }

    /// Moments of `N` path functionals over `cfg.paths` paths.
    fn simulate<const N: usize, F>(&self, cfg: &McConfig, f: F) -> [Estimate; N]
    where
        F: Fn(&PathOutcome) -> [f64; N] + Sync,
    {
        let batches = cfg.paths.div_ceil(BATCH_PATHS);
        let parts: Vec<[Moments; N]> = (0..batches)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                rng.set_stream(b);
                let n = BATCH_PATHS.min(cfg.paths - b * BATCH_PATHS);
                let mut acc = [Moments::default(); N];
                for _ in 0..n {
                    let out = f(&self.run(&mut rng));
                    for (a, x) in acc.iter_mut().zip(out) {
                        a.push(x);
                    }
                }
                acc
            })
            .collect();
        let total = parts.into_iter().fold([Moments::default(); N], |mut acc, p| {
            for (a, x) in acc.iter_mut().zip(p) {
                *a = a.merge(x);
            }
            acc
        });
        total.map(|m| m.estimate())
    }
}

/// Down-and-out call `e^{-rt} E[(V_t - k)^+ 1{no crossing}]`.
pub fn mc_barrier_call(m: &MarketParams, v: f64, vb: f64, k: f64, t: f64, cfg: &McConfig) -> Result<Estimate> {
    let eng = PathEngine::new(m, v, vb, t, cfg)?;
    let disc = (-m.r * t).exp();
    let [est] = eng.simulate(cfg, |p| [if p.tau.is_none() { disc * (p.terminal - k).max(0.0) } else { 0.0 }]);
    Ok(est)
}

/// First-passage probability `F(t)` and discounted passage `E[e^{-r tau} 1{tau <= t}]`.
pub fn mc_first_passage(m: &MarketParams, v: f64, vb: f64, t: f64, cfg: &McConfig) -> Result<(Estimate, Estimate)> {
    let eng = PathEngine::new(m, v, vb, t, cfg)?;
    let r = m.r;
    let [f, g] = eng.simulate(cfg, |p| match p.tau {
        Some(tau) => [1.0, (-r * tau).exp()],
        None => [0.0, 0.0],
    });
    Ok((f, g))
}

/// Path-wise parts of the liability of the cohort maturing at `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiabilityEstimates {
    /// Guaranteed payments `int_0^{tau ^ t} g e^{-rs} ds`.
    pub guarantee_annuity: Estimate,
    /// `e^{-rt} p 1{tau > t}`.
    pub lump_sum: Estimate,
    /// `e^{-r tau} (1 - rho) vb 1{tau <= t}`.
    pub recovery: Estimate,
    /// `alpha e^{-rt} (V_t - k)^+ 1{tau > t}`.
    pub participation: Estimate,
    /// Sum of the four parts, path by path.
    pub total: Estimate,
}

/// Every quantity of the cohort maturing at `t`, estimated on one set of
/// paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortEstimates {
    /// Down-and-out call with strike `k`, without the factor `alpha`.
    pub barrier_call: Estimate,
    pub passage_cdf: Estimate,
    pub discounted_passage: Estimate,
    pub liability: LiabilityEstimates,
}

/// Barrier call, first-passage quantities and liability parts of the
/// cohort maturing at `t`.
pub fn mc_cohort(s: &Scenario, vb: f64, t: f64, cfg: &McConfig) -> Result<CohortEstimates> {
    s.validate()?;
    let m = &s.market;
    let eng = PathEngine::new(m, s.v0, vb, t, cfg)?;
    let (r, g, p) = (m.r, s.contract.g_rate(), s.contract.p_rate());
    let (k, alpha, rho) = (s.contract.k, s.contract.alpha, s.frictions.rho);
    let disc = (-r * t).exp();
    let [call, f, gd, ga, ls, rec, par, tot] = eng.simulate(cfg, |o| {
        let stop = o.tau.unwrap_or(t);
        let annuity = g / r * (1.0 - (-r * stop).exp());
        let (call, hit, hit_disc, lump, recovery) = match o.tau {
            Some(tau) => {
                let d = (-r * tau).exp();
                (0.0, 1.0, d, 0.0, d * (1.0 - rho) * vb)
            }
            None => (disc * (o.terminal - k).max(0.0), 0.0, 0.0, disc * p, 0.0),
        };
        let part = alpha * call;
        [call, hit, hit_disc, annuity, lump, recovery, part, annuity + lump + recovery + part]
    });
    Ok(CohortEstimates {
        barrier_call: call,
        passage_cdf: f,
        discounted_passage: gd,
        liability: LiabilityEstimates {
            guarantee_annuity: ga,
            lump_sum: ls,
            recovery: rec,
            participation: par,
            total: tot,
        },
    })
}

/// Liability of the cohort maturing at `t`, estimated on one set of paths.
pub fn mc_liability_components(s: &Scenario, vb: f64, t: f64, cfg: &McConfig) -> Result<LiabilityEstimates> {
    Ok(mc_cohort(s, vb, t, cfg)?.liability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closed::{
        discounted_passage, down_and_out_call, first_passage_cdf, vanilla_call, BarrierCallInputs,
    };
    use crate::valuation::cohort_liability;

    fn cfg(paths: u64) -> McConfig {
        McConfig::new(paths, 252, 7, 30.0)
    }

    fn market() -> MarketParams {
        Scenario::base().market
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.3).collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|&x| whole.push(x));
        let (mut a, mut b) = (Moments::default(), Moments::default());
        xs[..40].iter().for_each(|&x| a.push(x));
        xs[40..].iter().for_each(|&x| b.push(x));
        let m = a.merge(b);
        assert!((m.mean - whole.mean).abs() < 1e-13 && (m.m2 - whole.m2).abs() < 1e-10);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let m = market();
        assert!(mc_barrier_call(&m, 100.0, 50.0, 150.0, 1.0, &McConfig::new(0, 252, 1, 30.0)).is_err());
        assert!(mc_barrier_call(&m, 100.0, 50.0, 150.0, 1.0, &McConfig::new(10, 0, 1, 30.0)).is_err());
        assert!(mc_barrier_call(&m, 100.0, 50.0, 150.0, 31.0, &cfg(10)).is_err());
    }

    #[test]
    fn no_barrier_prices_the_vanilla_call() {
        let m = market();
        let est = mc_barrier_call(&m, 100.0, 0.0, 110.0, 2.0, &McConfig::new(40_000, 4, 11, 30.0)).unwrap();
        let exact = vanilla_call(100.0, 110.0, 2.0, &m).unwrap();
        assert!(est.z_score(exact, 1e-12) < 3.0, "{est:?} vs {exact}");
    }

    #[test]
    fn unreachable_strike_is_worthless() {
        let est = mc_barrier_call(&market(), 100.0, 50.0, 1e4, 0.5, &cfg(2_000)).unwrap();
        assert_eq!((est.mean, est.std_error), (0.0, 0.0));
    }

    #[test]
    fn start_at_barrier_is_certain_default() {
        let (f, g) = mc_first_passage(&market(), 45.0, 45.0, 10.0, &cfg(500)).unwrap();
        assert_eq!((f.mean, f.std_error), (1.0, 0.0));
        assert_eq!(g.mean, 1.0);
    }

    #[test]
    fn one_short_step_far_from_barrier() {
        let c = McConfig::new(5_000, 1, 3, 1.0);
        let (f, _) = mc_first_passage(&market(), 100.0, 10.0, 0.01, &c).unwrap();
        assert_eq!(f.mean, 0.0);
    }

    #[test]
    fn passage_and_call_match_closed_forms() {
        let m = market();
        let c = McConfig::new(20_000, 52, 5, 30.0);
        let (v, vb, t) = (100.0, 60.0, 5.0);
        let (f, g) = mc_first_passage(&m, v, vb, t, &c).unwrap();
        assert!(f.z_score(first_passage_cdf(v, vb, t, &m).unwrap(), 1e-12) < 4.0);
        assert!(g.z_score(discounted_passage(v, vb, t, &m).unwrap(), 1e-12) < 4.0);
        let call = mc_barrier_call(&m, v, vb, 90.0, t, &c).unwrap();
        let exact = down_and_out_call(&BarrierCallInputs { v, k: 90.0, vb, t }, &m).unwrap();
        assert!(call.z_score(exact, 1e-12) < 4.0, "{call:?} vs {exact}");
    }

    #[test]
    fn liability_parts_sum_to_cohort_value() {
        let s = Scenario::base().with_alpha(0.3).with_k(110.0);
        let (vb, t) = (60.0, 8.0);
        let est = mc_liability_components(&s, vb, t, &McConfig::new(20_000, 52, 9, 30.0)).unwrap();
        let exact = cohort_liability(&s, vb, t).unwrap();
        assert!(est.total.z_score(exact, 1e-12) < 4.0, "{:?} vs {exact}", est.total);
        let sum = est.guarantee_annuity.mean + est.lump_sum.mean + est.recovery.mean + est.participation.mean;
        assert!((sum - est.total.mean).abs() < 1e-9 * exact);
    }

    #[test]
    fn cohort_run_agrees_with_separate_runs() {
        let s = Scenario::base().with_k(120.0);
        let c = McConfig::new(5_000, 12, 4, 30.0);
        let all = mc_cohort(&s, 60.0, 6.0, &c).unwrap();
        let call = mc_barrier_call(&s.market, s.v0, 60.0, 120.0, 6.0, &c).unwrap();
        let (f, g) = mc_first_passage(&s.market, s.v0, 60.0, 6.0, &c).unwrap();
        assert_eq!((all.barrier_call, all.passage_cdf, all.discounted_passage), (call, f, g));
    }

    #[test]
    fn degenerate_parts_vanish() {
        let s = Scenario::base().with_alpha(0.0);
        let s = Scenario { frictions: crate::params::FrictionParams { rho: 1.0, ..s.frictions }, ..s };
        let est = mc_liability_components(&s, 60.0, 5.0, &McConfig::new(2_000, 12, 1, 30.0)).unwrap();
        assert_eq!(est.recovery.mean, 0.0);
        assert_eq!(est.participation.mean, 0.0);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let m = market();
        let c = McConfig::new(3 * BATCH_PATHS + 17, 12, 42, 30.0);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| mc_first_passage(&m, 100.0, 70.0, 3.0, &c).unwrap())
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn halving_the_step_changes_little() {
        let m = market();
        let (v, vb, k, t) = (100.0, 70.0, 100.0, 3.0);
        let coarse = mc_barrier_call(&m, v, vb, k, t, &McConfig::new(40_000, 26, 1, 30.0)).unwrap();
        let fine = mc_barrier_call(&m, v, vb, k, t, &McConfig::new(40_000, 52, 2, 30.0)).unwrap();
        let se = coarse.std_error.hypot(fine.std_error);
        assert!((coarse.mean - fine.mean).abs() < 3.0 * se);
    }
}
