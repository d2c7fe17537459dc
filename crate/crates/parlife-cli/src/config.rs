//! Run configuration: a flat `key = value` file plus `--set` overrides.
//!
//! Lines are `key = value`; `#` starts a comment. Numbers are decimals, and
//! a trailing `%` divides by 100, so `g_over_p = 2%` and `g_over_p = 0.02`
//! are the same input. Grids are comma lists (`0.01, 0.02`) or inclusive
//! ranges `start:stop:step`; an empty value is an empty grid.
//!
//! Three scenario fields accept an absolute or a ratio form, never both in
//! one layer: `p_lump` or `p_over_v0`, `g_total` or `g_over_p`,
//! `k_threshold` or `k_over_v0`. An override replaces either form from the
//! file.

use std::collections::BTreeMap;
use std::path::Path;

use parlife::analysis::{Axis, Rate};
use parlife::Scenario;

use crate::error::CliError;

const SCENARIO_KEYS: [&str; 15] = [
    "v0",
    "r",
    "nu",
    "sigma",
    "t_mat",
    "p_lump",
    "p_over_v0",
    "g_total",
    "g_over_p",
    "k_threshold",
    "k_over_v0",
    "alpha",
    "tau1",
    "tau2",
    "rho",
];

const COMMAND_KEYS: [&str; 16] = [
    "vb",
    "mode",
    "sweep",
    "axis",
    "grid",
    "rate",
    "x_axis",
    "x_grid",
    "y_axis",
    "y_grid",
    "v_grid",
    "alphas",
    "t_values",
    "paths",
    "steps_per_year",
    "seed",
];

/// Pairs of keys that set the same scenario field.
const EXCLUSIVE: [(&str, &str); 3] = [("p_lump", "p_over_v0"), ("g_total", "g_over_p"), ("k_threshold", "k_over_v0")];

fn sibling(key: &str) -> Option<&'static str> {
    EXCLUSIVE.iter().find_map(|&(a, b)| {
        if key == a {
            Some(b)
        } else if key == b {
            Some(a)
        } else {
            None
        }
    })
}

/// Parses a decimal with an optional `%` suffix.
pub fn parse_number(raw: &str) -> Result<f64, String> {
    let t = raw.trim();
    let (body, divisor) = match t.strip_suffix('%') {
        Some(b) => (b.trim_end(), 100.0),
        None => (t, 1.0),
    };
    let x: f64 = body.parse().map_err(|_| format!("not a number: {raw:?}"))?;
    if !x.is_finite() {
        return Err(format!("not a finite number: {raw:?}"));
    }
    Ok(x / divisor)
}

/// Parses a comma list or an inclusive `start:stop:step` range.
pub fn parse_grid(raw: &str) -> Result<Vec<f64>, String> {
    let t = raw.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    if t.contains(':') {
        let parts: Vec<&str> = t.split(':').collect();
        let [a, b, h] = parts[..] else {
            return Err(format!("range must be start:stop:step, got {raw:?}"));
        };
        let (a, b, h) = (parse_number(a)?, parse_number(b)?, parse_number(h)?);
        if !(h > 0.0) || b < a {
            return Err(format!("range needs step > 0 and stop >= start, got {raw:?}"));
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        return Ok((0..=n).map(|i| a + h * i as f64).collect());
    }
    t.split(',').map(parse_number).collect()
}

/// One layer of `key = value` entries.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Layer {
    entries: BTreeMap<String, String>,
}

impl Layer {
    /// Parses the text of a configuration file.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut layer = Layer::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Config(format!("line {}: expected key = value", i + 1)));
            };
            layer.insert(k.trim(), v.trim()).map_err(|e| CliError::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(layer)
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Layer::parse(&text)
    }

    /// Parses `key=value` override strings.
    pub fn from_overrides<S: AsRef<str>>(items: &[S]) -> Result<Self, CliError> {
        let mut layer = Layer::default();
        for item in items {
            let item = item.as_ref();
            let Some((k, v)) = item.split_once('=') else {
                return Err(CliError::Config(format!("override must be key=value, got {item:?}")));
            };
            layer.insert(k.trim(), v.trim()).map_err(CliError::Config)?;
        }
        Ok(layer)
    }

    fn insert(&mut self, key: &str, value: &str) -> Result<(), String> {
        if !SCENARIO_KEYS.contains(&key) && !COMMAND_KEYS.contains(&key) {
            return Err(format!("unknown key {key:?}"));
        }
        if let Some(other) = sibling(key) {
            if self.entries.contains_key(other) {
                return Err(format!("{key} and {other} are mutually exclusive"));
            }
        }
        if self.entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(format!("duplicate key {key:?}"));
        }
        Ok(())
    }

    /// `self` with every entry of `top` applied over it.
    pub fn overlay(mut self, top: &Layer) -> Layer {
        for (k, v) in &top.entries {
            if let Some(other) = sibling(k) {
                self.entries.remove(other);
            }
            self.entries.insert(k.clone(), v.clone());
        }
        self
    }
}

/// A validated scenario with the remaining command settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub seed: u64,
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    /// Builds the scenario from the reference case and `layer`.
    pub fn from_layer(layer: Layer) -> Result<Self, CliError> {
        let entries = layer.entries;
        let num = |k: &str| -> Result<Option<f64>, CliError> {
            entries
                .get(k)
                .map(|v| parse_number(v).map_err(|e| CliError::Config(format!("{k}: {e}"))))
                .transpose()
        };
        let mut s = Scenario::base();
        if let Some(x) = num("v0")? {
            s.v0 = x;
        }
        for (key, field) in [
            ("r", &mut s.market.r),
            ("nu", &mut s.market.nu),
            ("sigma", &mut s.market.sigma),
            ("t_mat", &mut s.contract.t_mat),
            ("alpha", &mut s.contract.alpha),
            ("tau1", &mut s.frictions.tau1),
            ("tau2", &mut s.frictions.tau2),
            ("rho", &mut s.frictions.rho),
        ] {
            if let Some(x) = num(key)? {
                *field = x;
            }
        }
        let base = Scenario::base();
        s.contract.p_lump = match (num("p_lump")?, num("p_over_v0")?) {
            (Some(p), _) => p,
            (None, Some(ratio)) => ratio * s.v0,
            (None, None) => base.contract.p_lump,
        };
        s.contract.g_total = match (num("g_total")?, num("g_over_p")?) {
            (Some(g), _) => g,
            (None, Some(ratio)) => ratio * s.contract.p_lump,
            (None, None) => base.g_over_p() * s.contract.p_lump,
        };
        s.contract.k = match (num("k_threshold")?, num("k_over_v0")?) {
            (Some(k), _) => k,
            (None, Some(ratio)) => ratio * s.v0,
            (None, None) => base.contract.k,
        };
        s.validate().map_err(|e| CliError::Config(e.to_string()))?;
        let seed = match entries.get("seed") {
            Some(v) => v.trim().parse().map_err(|_| CliError::Config(format!("seed: not an integer: {v:?}")))?,
            None => 0,
        };
        Ok(RunConfig { scenario: s, seed, entries })
    }

    /// Reads the optional file, applies the overrides, and validates.
    pub fn load<S: AsRef<str>>(path: Option<&Path>, overrides: &[S]) -> Result<Self, CliError> {
        let file = match path {
            Some(p) => Layer::read(p)?,
            None => Layer::default(),
        };
        RunConfig::from_layer(file.overlay(&Layer::from_overrides(overrides)?))
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.text(key)
            .map(|v| parse_number(v).map_err(|e| CliError::Config(format!("{key}: {e}"))))
            .transpose()
    }

    pub fn count(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.text(key)
            .map(|v| v.trim().parse().map_err(|_| CliError::Config(format!("{key}: not a count: {v:?}"))))
            .transpose()
    }

    /// The grid under `key`, or `default` when it is absent.
    pub fn grid(&self, key: &str, default: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>, CliError> {
        match self.text(key) {
            Some(v) => parse_grid(v).map_err(|e| CliError::Config(format!("{key}: {e}"))),
            None => Ok(default()),
        }
    }

    pub fn axis(&self, key: &str, default: Axis) -> Result<Axis, CliError> {
        match self.text(key) {
            Some(v) => Axis::from_name(v.trim()).ok_or_else(|| CliError::Config(format!("{key}: unknown axis {v:?}"))),
            None => Ok(default),
        }
    }

    pub fn rate(&self) -> Result<Rate, CliError> {
        match self.text("rate").map(str::trim) {
            None | Some("alpha") => Ok(Rate::Participation),
            Some("g") => Ok(Rate::Guarantee),
            Some(v) => Err(CliError::Config(format!("rate: expected alpha or g, got {v:?}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, overrides: &[&str]) -> Result<RunConfig, CliError> {
        RunConfig::from_layer(Layer::parse(text)?.overlay(&Layer::from_overrides(overrides)?))
    }

    #[test]
    fn empty_config_is_the_reference_case() {
        assert_eq!(load("", &[]).unwrap().scenario, Scenario::base());
    }

    #[test]
    fn percent_suffix_divides_by_hundred() {
        assert_eq!(parse_number("2%"), Ok(0.02));
        assert_eq!(parse_number(" 35 % "), Ok(0.35));
        assert_eq!(parse_number("0.02"), Ok(0.02));
        assert!(parse_number("2%%").is_err());
        assert!(parse_number("nan").is_err());
    }

    #[test]
    fn ratio_and_absolute_forms_agree() {
        let ratio = load("v0 = 120\np_over_v0 = 80%\ng_over_p = 3%\nk_over_v0 = 1.5", &[]).unwrap();
        let p = 0.8 * 120.0;
        let abs = load(
            &format!("v0 = 120\np_lump = {p}\ng_total = {}\nk_threshold = {}", 0.03 * p, 1.5 * 120.0),
            &[],
        )
        .unwrap();
        assert_eq!(ratio.scenario, abs.scenario);
    }

    #[test]
    fn both_forms_in_one_layer_are_rejected() {
        assert!(matches!(load("g_total = 1\ng_over_p = 2%", &[]), Err(CliError::Config(_))));
        assert!(matches!(load("", &["k_threshold=1", "k_over_v0=1"]), Err(CliError::Config(_))));
    }

    #[test]
    fn overrides_win_and_replace_the_other_form() {
        let c = load("g_total = 1.0\nalpha = 0.02", &["g_over_p=3%", "alpha=0.04"]).unwrap();
        assert_eq!(c.scenario.contract.g_total, 0.03 * 95.0);
        assert_eq!(c.scenario.contract.alpha, 0.04);
    }

    #[test]
    fn bad_inputs_are_config_errors() {
        for text in ["sigma = 0", "colour = red", "alpha", "alpha = 1\nalpha = 2", "seed = -1"] {
            assert!(matches!(load(text, &[]), Err(CliError::Config(_))), "{text}");
        }
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_grid("1, 2%").unwrap(), vec![1.0, 0.02]);
        let g = parse_grid("0:0.1:0.025").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 0.1).abs() < 1e-15);
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("0:1").is_err());
    }
}
