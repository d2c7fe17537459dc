//! Adaptive Gauss-Kronrod quadrature over finite intervals and over
//! `[0, inf)`.
//!
//! Every integrand in the model may carry an integrable `1/sqrt(t - a)`
//! singularity at the left endpoint, so the finite rule always integrates
//! in `u` with `t = a + u^2`, which turns such a term into a bounded one.
//! Panels are refined by global bisection of the panel with the largest
//! error estimate; node placement is fixed, so results are bit-reproducible.

use crate::error::{Error, Result};

/// Default relative tolerance for standalone integrals.
pub const TOL_DEFAULT: f64 = 1e-9;
/// Looser tolerance used inside optimization loops.
pub const TOL_LOOP: f64 = 1e-7;

const MAX_PANELS: usize = 4000;
const INITIAL_PANELS: usize = 4;

/// Value of an integral with its error estimate and cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

// 21-point Kronrod abscissae on [0, 1] (symmetric half) and weights, with
// the embedded 10-point Gauss weights for the odd-indexed abscissae.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_208_814_568,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

#[derive(Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

/// One Gauss-Kronrod 10/21 panel with the QUADPACK error rescaling.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[10] * fc;
    let mut gauss = 0.0;
    let mut res_abs = kron.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        fv1[j] = f1;
        fv2[j] = f2;
        kron += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kron;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kron * h;
    let res_abs = res_abs * h.abs();
    let res_asc = res_asc * h.abs();
    let mut err = ((kron - gauss) * h).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * (200.0 * err / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Panel { a, b, value, error: err }
}

/// Adaptive integration of a smooth `g` over `[a, b]`, stopping once the
/// summed error estimate is below `tol * max(1, |value|)`.
fn adaptive<F: Fn(f64) -> f64>(g: F, a: f64, b: f64, tol: f64) -> Result<IntegralResult> {
    let width = (b - a) / INITIAL_PANELS as f64;
    let mut panels: Vec<Panel> = (0..INITIAL_PANELS)
        .map(|i| {
            let lo = a + width * i as f64;
            let hi = if i + 1 == INITIAL_PANELS { b } else { lo + width };
            gk21(&g, lo, hi)
        })
        .collect();
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        let evaluations = panels.len() * 21 + (panels.len() - INITIAL_PANELS) * 21;
        if !value.is_finite() {
            return Err(Error::Quadrature { estimate: value, abs_error: error });
        }
        if error <= tol * value.abs().max(1.0) {
            return Ok(IntegralResult { value, abs_error_estimate: error, evaluations });
        }
        if panels.len() >= MAX_PANELS {
            return Err(Error::Quadrature { estimate: value, abs_error: error });
        }
        let worst = panels
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if p.error > panels[best].error { i } else { best });
        let Panel { a: lo, b: hi, .. } = panels[worst];
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // The panel cannot be split further in floating point.
            return Err(Error::Quadrature { estimate: value, abs_error: error });
        }
        panels[worst] = gk21(&g, lo, mid);
        panels.push(gk21(&g, mid, hi));
    }
}

/// Integrates `f` over `[a, b]`; `f` may have a `1/sqrt(t - a)` singularity
/// at `a` and is never evaluated at the endpoints.
///
/// Succeeds once `|error| <= tol * max(1, |value|)`; on budget exhaustion the
/// error carries the best estimate.
pub fn integrate_finite<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<IntegralResult> {
    if !(b > a) {
        return Err(crate::error::domain(format!("integrate_finite needs a < b, got [{a}, {b}]")));
    }
    let umax = (b - a).sqrt();
    adaptive(|u| 2.0 * u * f(a + u * u), 0.0, umax, tol)
}

/// Integrates `f` over `[0, inf)`.
///
/// `tail_bound(T)` must bound `int_T^inf |f(t)| dt`. The truncation point is
/// the first power of two at which that bound falls below `tol/2`; the
/// finite part is then integrated to `tol/2`.
pub fn integrate_semi_infinite<F, B>(f: F, tol: f64, tail_bound: B) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    integrate_from(f, 0.0, tol, tail_bound)
}

/// Integrates `f` over `[a, inf)` with the truncation rule of
/// [`integrate_semi_infinite`]; candidate truncation points are
/// `a + 2^j` for `j = 0, 1, ...`.
pub fn integrate_from<F, B>(f: F, a: f64, tol: f64, tail_bound: B) -> Result<IntegralResult>
where
    F: Fn(f64) -> f64,
    B: Fn(f64) -> f64,
{
    let mut width = 1.0;
    while !(tail_bound(a + width) <= 0.5 * tol) {
        width *= 2.0;
        if width > 1e8 {
            return Err(crate::error::domain("tail bound never falls below the tolerance"));
        }
    }
    integrate_finite(f, a, a + width, 0.5 * tol)
}
