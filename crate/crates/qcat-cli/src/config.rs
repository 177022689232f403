//! Key=value run configuration with defaults, file loading, and flag
//! overrides. Every key is validated with an explicit accepted range so
//! mistakes surface as usage errors before any computation starts.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundKind {
    Polar,
    Equator,
}

impl BoundKind {
    pub fn to_cat_bound(self) -> qcat::CatBound {
        match self {
            BoundKind::Polar => qcat::CatBound::Polar,
            BoundKind::Equator => qcat::CatBound::Equator,
        }
    }
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundKind::Polar => write!(f, "polar"),
            BoundKind::Equator => write!(f, "equator"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WignerState {
    Css,
    CatPolar,
    CatEquator,
    CatX,
    N4,
}

/// Fully defaulted, validated run configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub twice_i: u32,
    pub eta: f64,
    pub bound: BoundKind,
    pub gamma: f64,
    pub gamma_list: Vec<f64>,
    /// Pulse overrides; when absent the optimizer supplies them.
    pub t_r: Option<f64>,
    pub theta_r: Option<f64>,
    pub varphi: Option<f64>,
    pub t_r_max: f64,
    pub t_r_points: usize,
    pub theta_points: usize,
    pub window_samples: usize,
    pub n2_samples: usize,
    pub eta_grid: Vec<f64>,
    pub i_list: Vec<u32>,
    pub wigner_state: WignerState,
    pub wigner_theta: f64,
    pub wigner_phi: f64,
    pub rotor_phase: f64,
    pub wigner_n_theta: usize,
    pub wigner_n_phi: usize,
    pub map_n_theta: usize,
    pub map_n_phi: usize,
    pub map_periods: usize,
    pub portrait_seeds_phi: usize,
    pub portrait_seeds_p: usize,
    pub portrait_t_end: f64,
    pub portrait_dt: f64,
    #[serde(skip)]
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            twice_i: 5,
            eta: 1.0,
            bound: BoundKind::Polar,
            gamma: 0.0,
            gamma_list: vec![1e-4, 1e-3, 1e-2],
            t_r: None,
            theta_r: None,
            varphi: None,
            t_r_max: 2.0,
            t_r_points: 400,
            theta_points: 91,
            window_samples: 600,
            n2_samples: 1201,
            eta_grid: (1..=10).map(|k| k as f64 / 10.0).collect(),
            i_list: (2..=9).collect(),
            wigner_state: WignerState::CatPolar,
            wigner_theta: std::f64::consts::FRAC_PI_2,
            wigner_phi: 0.0,
            rotor_phase: std::f64::consts::PI,
            wigner_n_theta: 61,
            wigner_n_phi: 121,
            map_n_theta: 31,
            map_n_phi: 61,
            map_periods: 8,
            portrait_seeds_phi: 8,
            portrait_seeds_p: 5,
            portrait_t_end: 6.0,
            portrait_dt: 2e-3,
            out: PathBuf::from("qcat-out"),
        }
    }
}

fn usage(key: &str, value: &str, accepted: &str) -> CliError {
    CliError::Usage(format!(
        "invalid value '{value}' for key '{key}' (accepted: {accepted})"
    ))
}

fn parse_f64(key: &str, value: &str, accepted: &str) -> Result<f64, CliError> {
    value
        .parse::<f64>()
        .map_err(|_| usage(key, value, accepted))
}

fn parse_usize(key: &str, value: &str, accepted: &str) -> Result<usize, CliError> {
    value
        .parse::<usize>()
        .map_err(|_| usage(key, value, accepted))
}

fn parse_list<T: std::str::FromStr>(key: &str, value: &str, accepted: &str) -> Result<Vec<T>, CliError> {
    value
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|_| usage(key, value, accepted)))
        .collect()
}

impl RunConfig {
    /// Applies one key=value setting with validation.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "twice_i" => {
                let v: u32 = value
                    .parse()
                    .map_err(|_| usage(key, value, "integer 2..=9"))?;
                if !(2..=9).contains(&v) {
                    return Err(CliError::Usage(format!(
                        "twice_i = {v} out of range (accepted: 2..=9; spin 1/2 carries no \
                         quadrupole moment and larger spins are unsupported)"
                    )));
                }
                self.twice_i = v;
            }
            "eta" => {
                let v = parse_f64(key, value, "real in [0, 1]")?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(usage(key, value, "real in [0, 1]"));
                }
                self.eta = v;
            }
            "bound" => {
                self.bound = match value {
                    "polar" => BoundKind::Polar,
                    "equator" => BoundKind::Equator,
                    _ => return Err(usage(key, value, "polar | equator")),
                };
            }
            "gamma" => {
                let v = parse_f64(key, value, "real >= 0")?;
                if v < 0.0 || !v.is_finite() {
                    return Err(usage(key, value, "real >= 0"));
                }
                self.gamma = v;
            }
            "gamma_list" => {
                let v: Vec<f64> = parse_list(key, value, "comma-separated reals >= 0")?;
                if v.iter().any(|g| *g < 0.0 || !g.is_finite()) {
                    return Err(usage(key, value, "comma-separated reals >= 0"));
                }
                self.gamma_list = v;
            }
            "t_r" => {
                let v = parse_f64(key, value, "real > 0")?;
                if v <= 0.0 {
                    return Err(usage(key, value, "real > 0"));
                }
                self.t_r = Some(v);
            }
            "theta_r" => self.theta_r = Some(parse_f64(key, value, "real (radians)")?),
            "varphi" => self.varphi = Some(parse_f64(key, value, "real (radians)")?),
            "t_r_max" => {
                let v = parse_f64(key, value, "real > 0")?;
                if v <= 0.0 {
                    return Err(usage(key, value, "real > 0"));
                }
                self.t_r_max = v;
            }
            "t_r_points" => {
                let v = parse_usize(key, value, "integer >= 10")?;
                if v < 10 {
                    return Err(usage(key, value, "integer >= 10"));
                }
                self.t_r_points = v;
            }
            "theta_points" => {
                let v = parse_usize(key, value, "integer >= 5")?;
                if v < 5 {
                    return Err(usage(key, value, "integer >= 5"));
                }
                self.theta_points = v;
            }
            "window_samples" => {
                let v = parse_usize(key, value, "integer >= 500")?;
                if v < 500 {
                    return Err(usage(key, value, "integer >= 500"));
                }
                self.window_samples = v;
            }
            "n2_samples" => {
                let v = parse_usize(key, value, "integer >= 2")?;
                if v < 2 {
                    return Err(usage(key, value, "integer >= 2"));
                }
                self.n2_samples = v;
            }
            "eta_grid" => {
                let v: Vec<f64> = parse_list(key, value, "comma-separated reals in (0, 1]")?;
                if v.is_empty() || v.iter().any(|e| *e <= 0.0 || *e > 1.0) {
                    return Err(usage(key, value, "comma-separated reals in (0, 1]"));
                }
                self.eta_grid = v;
            }
            "i_list" => {
                let v: Vec<u32> = parse_list(key, value, "comma-separated integers 2..=9")?;
                if v.len() < 4 || v.iter().any(|t| !(2..=9).contains(t)) {
                    return Err(usage(
                        key,
                        value,
                        "at least 4 comma-separated integers in 2..=9",
                    ));
                }
                self.i_list = v;
            }
            "wigner_state" => {
                self.wigner_state = match value {
                    "css" => WignerState::Css,
                    "cat-polar" => WignerState::CatPolar,
                    "cat-equator" => WignerState::CatEquator,
                    "cat-x" => WignerState::CatX,
                    "n4" => WignerState::N4,
                    _ => {
                        return Err(usage(
                            key,
                            value,
                            "css | cat-polar | cat-equator | cat-x | n4",
                        ))
                    }
                };
            }
            "wigner_theta" => self.wigner_theta = parse_f64(key, value, "real (radians)")?,
            "wigner_phi" => self.wigner_phi = parse_f64(key, value, "real (radians)")?,
            "rotor_phase" => self.rotor_phase = parse_f64(key, value, "real (radians)")?,
            "wigner_n_theta" | "wigner_n_phi" | "map_n_theta" | "map_n_phi" => {
                let v = parse_usize(key, value, "integer >= 2")?;
                if v < 2 {
                    return Err(usage(key, value, "integer >= 2"));
                }
                match key {
                    "wigner_n_theta" => self.wigner_n_theta = v,
                    "wigner_n_phi" => self.wigner_n_phi = v,
                    "map_n_theta" => self.map_n_theta = v,
                    _ => self.map_n_phi = v,
                }
            }
            "map_periods" => {
                let v = parse_usize(key, value, "integer >= 8")?;
                if v < 8 {
                    return Err(usage(key, value, "integer >= 8"));
                }
                self.map_periods = v;
            }
            "portrait_seeds_phi" | "portrait_seeds_p" => {
                let v = parse_usize(key, value, "integer >= 1")?;
                if v < 1 {
                    return Err(usage(key, value, "integer >= 1"));
                }
                if key == "portrait_seeds_phi" {
                    self.portrait_seeds_phi = v;
                } else {
                    self.portrait_seeds_p = v;
                }
            }
            "portrait_t_end" => {
                let v = parse_f64(key, value, "real > 0")?;
                if v <= 0.0 {
                    return Err(usage(key, value, "real > 0"));
                }
                self.portrait_t_end = v;
            }
            "portrait_dt" => {
                let v = parse_f64(key, value, "real > 0")?;
                if v <= 0.0 {
                    return Err(usage(key, value, "real > 0"));
                }
                self.portrait_dt = v;
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown configuration key '{key}'"
                )))
            }
        }
        Ok(())
    }

    /// Loads `key = value` lines ('#' starts a comment, blank lines ignored).
    pub fn load_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Usage(format!("cannot read config file {}: {e}", path.display()))
        })?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Usage(format!(
                    "{}:{}: expected 'key = value', got '{raw}'",
                    path.display(),
                    lineno + 1
                )));
            };
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn spin(&self) -> qcat::Spin {
        qcat::Spin::from_twice(self.twice_i).expect("validated on entry")
    }

    pub fn optimizer_config(&self) -> qcat::optimize::OptimizerConfig {
        qcat::optimize::OptimizerConfig {
            t_r_max: self.t_r_max,
            t_r_points: self.t_r_points,
            theta_points: self.theta_points,
            window_samples: self.window_samples,
            ..Default::default()
        }
    }
}
