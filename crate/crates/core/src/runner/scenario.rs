//! Scenario documents: builtin catalog, TOML (canonical) and JSON
//! (interchange) loading, and validation with field paths.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::energy::{eps_for, gamma, s_star, MIN_SCALING_DECADES, MIN_SCALING_SAMPLES};
use crate::symbol::japanese;
use crate::symbol::{Side, SystemDoc, SystemError, SystemSpec};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error("cannot parse {path}: {msg}")]
    Parse { path: String, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
    #[error("unknown scenario {0:?} (not a builtin name and not an existing file)")]
    Unknown(String),
}

fn invalid(path: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub time_points: usize,
    pub k_min: i32,
    pub k_max: i32,
    /// Number of unit directions for `n >= 2` (ignored for `n = 1`).
    pub directions: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { time_points: 4097, k_min: 0, k_max: 12, directions: 8 }
    }
}

fn dyadic_eps(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 2f64.powi(-k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EpsConfig {
    /// Widths at which the regularized-root constants are measured.
    pub prop: Vec<f64>,
    /// Widths for the scaling fits (at least two decades).
    pub scaling: Vec<f64>,
    /// `<xi>` of the frequency used for the scaling fits.
    pub scan_japanese: f64,
    /// Keep every k-th time sample in the energy-scan table.
    pub scan_stride: usize,
}

impl Default for EpsConfig {
    fn default() -> Self {
        EpsConfig { prop: dyadic_eps(3, 9), scaling: dyadic_eps(2, 9), scan_japanese: 256.0, scan_stride: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub s0: f64,
    pub delta0: f64,
    /// Seed for random phases; zero phases when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Components of `g0` that carry data; all when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    pub hyperbolicity_tol: f64,
    pub uniformity_cap: f64,
    pub energy_tol: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Use right derivatives at `abs(t)^p` kinks instead of rejecting them.
    pub one_sided_kinks: bool,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            hyperbolicity_tol: 1e-8,
            uniformity_cap: 10.0,
            energy_tol: 1e-8,
            rtol: 1e-9,
            atol: 1e-12,
            one_sided_kinks: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub system: SystemDoc,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub eps: EpsConfig,
    pub s_values: Vec<f64>,
    pub data: DataConfig,
    #[serde(default)]
    pub checks: CheckConfig,
}

pub const BUILTIN_NAMES: [&str; 5] =
    ["constant_strict", "wave_t2", "wave_t2_lower", "holder_abs(alpha)", "triple_degenerate"];

fn sys(alpha: f64, a: Vec<Vec<Vec<&str>>>, b: Vec<Vec<&str>>) -> SystemDoc {
    let m = a.len();
    let n = a[0][0].len();
    let own = |v: Vec<&str>| v.into_iter().map(String::from).collect::<Vec<_>>();
    SystemDoc {
        m,
        n,
        horizon: 1.0,
        alpha,
        a: a.into_iter().map(|r| r.into_iter().map(own).collect()).collect(),
        b: b.into_iter().map(own).collect(),
    }
}

fn scenario(name: String, system: SystemDoc) -> Scenario {
    let st = s_star(system.alpha, system.m);
    // a regularity index strictly inside the admissible range, and data a bit smoother
    let s = 1.0 + 0.8 * (st - 1.0);
    let s0 = 1.0 + 0.5 * (st - 1.0);
    Scenario {
        name,
        system,
        grid: GridConfig::default(),
        eps: EpsConfig::default(),
        s_values: vec![round6(s)],
        data: DataConfig { s0: round6(s0), delta0: 1.0, seed: None, mask: None },
        checks: CheckConfig::default(),
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl Scenario {
    /// Builtin catalog; `holder_abs(a)` takes the Hölder exponent in `(0, 1]`.
    pub fn builtin(name: &str) -> Option<Scenario> {
        let name = name.trim();
        let zero2 = || vec![vec!["0", "0"], vec!["0", "0"]];
        match name {
            "constant_strict" => {
                let mut sc = scenario(
                    name.into(),
                    sys(1.0, vec![vec![vec!["1"], vec!["0"]], vec![vec!["0"], vec!["2"]]], zero2()),
                );
                // the separation shift alone gives kappa T near 1.6, so radius-1 data cannot afford it
                sc.data.delta0 = 2.0;
                Some(sc)
            }
            "wave_t2" => Some(scenario(
                name.into(),
                sys(1.0, vec![vec![vec!["0"], vec!["1"]], vec![vec!["t^2"], vec!["0"]]], zero2()),
            )),
            "wave_t2_lower" => Some(scenario(
                name.into(),
                sys(
                    1.0,
                    vec![vec![vec!["0"], vec!["1"]], vec![vec!["t^2"], vec!["0"]]],
                    vec![vec!["0", "1"], vec!["1", "0"]],
                ),
            )),
            "triple_degenerate" => Some(scenario(
                name.into(),
                sys(
                    1.0,
                    vec![
                        vec![vec!["0"], vec!["1"], vec!["0"]],
                        vec![vec!["t^2"], vec!["0"], vec!["1"]],
                        vec![vec!["0"], vec!["2*t^2"], vec!["0"]],
                    ],
                    vec![vec!["0", "0", "0"], vec!["0", "0", "0"], vec!["0", "0", "0"]],
                ),
            )),
            _ => {
                let arg = name.strip_prefix("holder_abs(")?.strip_suffix(')')?;
                let alpha: f64 = arg.trim().parse().ok()?;
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return None;
                }
                let entry = format!("abs(t)^{}", 2.0 * alpha);
                let doc = SystemDoc {
                    m: 2,
                    n: 1,
                    horizon: 1.0,
                    alpha,
                    a: vec![
                        vec![vec!["0".to_string()], vec!["1".to_string()]],
                        vec![vec![entry], vec!["0".to_string()]],
                    ],
                    b: vec![vec!["0".into(), "0".into()], vec!["0".into(), "0".into()]],
                };
                Some(scenario(format!("holder_abs({alpha})"), doc))
            }
        }
    }

    /// Builtin name, or a path to a `.toml` (canonical) or `.json` file.
    pub fn load(name_or_path: &str) -> Result<Scenario, ConfigError> {
        if let Some(s) = Scenario::builtin(name_or_path) {
            return Ok(s);
        }
        let path = Path::new(name_or_path);
        if !path.exists() {
            return Err(ConfigError::Unknown(name_or_path.to_string()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: name_or_path.to_string(), msg: e.to_string() })?;
        let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        if is_json {
            Scenario::from_json(&text).map_err(|msg| ConfigError::Parse { path: name_or_path.to_string(), msg })
        } else {
            Scenario::from_toml(&text).map_err(|msg| ConfigError::Parse { path: name_or_path.to_string(), msg })
        }
    }

    pub fn from_toml(text: &str) -> Result<Scenario, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_json(text: &str) -> Result<Scenario, String> {
        serde_json::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Filesystem-friendly name.
    pub fn slug(&self) -> String {
        self.name
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.' { c } else { '_' })
            .collect::<String>()
            .trim_end_matches('_')
            .to_string()
    }

    /// sha256 of the canonical TOML form.
    pub fn config_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn side(&self) -> Side {
        if self.checks.one_sided_kinks {
            Side::Right
        } else {
            Side::Both
        }
    }

    /// Check every field; returns the parsed system.
    pub fn validate(&self) -> Result<SystemSpec, ConfigError> {
        if self.name.trim().is_empty() {
            return Err(invalid("name", "must not be empty"));
        }
        let spec = self.system.to_spec().map_err(|e| match e {
            SystemError::Expr { field, source } => invalid(&format!("system.{field}"), source.to_string()),
            other => invalid("system", other.to_string()),
        })?;
        let g = &self.grid;
        if g.time_points < 5 {
            return Err(invalid("grid.time_points", "need at least 5 time points"));
        }
        if g.k_min > g.k_max {
            return Err(invalid("grid.k_max", "must be at least grid.k_min"));
        }
        if !(-30..=30).contains(&g.k_min) || !(-30..=30).contains(&g.k_max) {
            return Err(invalid("grid.k_max", "radius exponents must lie in [-30, 30]"));
        }
        if spec.n >= 2 && g.directions == 0 {
            return Err(invalid("grid.directions", "need at least one direction"));
        }
        for (field, list) in [("eps.prop", &self.eps.prop), ("eps.scaling", &self.eps.scaling)] {
            if list.is_empty() {
                return Err(invalid(field, "must not be empty"));
            }
            if let Some((k, e)) = list.iter().enumerate().find(|(_, e)| !(**e > 0.0 && e.is_finite())) {
                return Err(invalid(&format!("{field}[{k}]"), format!("{e} is not a positive width")));
            }
        }
        let sc = &self.eps.scaling;
        let (lo, hi) = sc.iter().fold((f64::INFINITY, 0.0f64), |(a, b), e| (a.min(*e), b.max(*e)));
        if sc.len() < MIN_SCALING_SAMPLES || (hi / lo).log10() < MIN_SCALING_DECADES - 1e-9 {
            return Err(invalid(
                "eps.scaling",
                format!("need at least {MIN_SCALING_SAMPLES} widths spanning {MIN_SCALING_DECADES} decades"),
            ));
        }
        // every mollifier width in use must cover at least 4 time steps
        let h = spec.horizon / (g.time_points - 1) as f64;
        let r_max = 2f64.powi(g.k_max);
        let planned = eps_for(japanese(&[r_max]), gamma(spec.alpha, spec.m));
        let narrowest = self.eps.prop.iter().chain(sc).fold(planned, |a, b| a.min(*b));
        if narrowest < 4.0 * h * (1.0 - 1e-9) {
            let need = (4.0 * spec.horizon / narrowest).ceil() as usize + 1;
            return Err(invalid(
                "grid.time_points",
                format!("mollifier width {narrowest} is under 4 time steps; use at least {need} points"),
            ));
        }
        if self.eps.scan_japanese.is_nan() || self.eps.scan_japanese < 1.0 {
            return Err(invalid("eps.scan_japanese", "must be at least 1"));
        }
        if self.eps.scan_stride == 0 {
            return Err(invalid("eps.scan_stride", "must be at least 1"));
        }
        if self.s_values.is_empty() {
            return Err(invalid("s_values", "need at least one value"));
        }
        if let Some((k, s)) = self.s_values.iter().enumerate().find(|(_, s)| !(**s >= 1.0 && s.is_finite())) {
            return Err(invalid(&format!("s_values[{k}]"), format!("{s} is not a Gevrey index >= 1")));
        }
        if !(self.data.s0 > 1.0 && self.data.s0.is_finite()) {
            return Err(invalid("data.s0", "must be finite and > 1"));
        }
        if !(self.data.delta0 > 0.0 && self.data.delta0.is_finite()) {
            return Err(invalid("data.delta0", "must be positive"));
        }
        if let Some(mask) = &self.data.mask {
            if mask.len() != spec.m {
                return Err(invalid("data.mask", format!("needs {} entries", spec.m)));
            }
            if !mask.iter().any(|b| *b) {
                return Err(invalid("data.mask", "at least one component must be active"));
            }
        }
        let c = &self.checks;
        for (field, v) in [
            ("checks.hyperbolicity_tol", c.hyperbolicity_tol),
            ("checks.uniformity_cap", c.uniformity_cap),
            ("checks.energy_tol", c.energy_tol),
            ("checks.rtol", c.rtol),
            ("checks.atol", c.atol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(field, "must be positive"));
            }
        }
        Ok(spec)
    }

    pub fn mask(&self, m: usize) -> Vec<bool> {
        self.data.mask.clone().unwrap_or_else(|| vec![true; m])
    }
}
