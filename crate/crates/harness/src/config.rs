//! Flat key-value experiment configuration with dotted namespaces.
//!
//! Unknown keys are hard errors, listed all at once. Every default matches
//! the shipped benchmark parameterization.

use std::collections::BTreeMap;
use std::path::PathBuf;

use aquaplan_core::environment::ScenarioPreset;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("unknown config keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),
    #[error("invalid value for '{key}': {message}")]
    InvalidValue { key: String, message: String },
    #[error("malformed line {line}: expected 'key = value'")]
    Malformed { line: usize },
    #[error("config validation failed: {0}")]
    Validation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which planner drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PlannerKind {
    Pid,
    IfdsOnly,
    IfdsMpc,
}

impl PlannerKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Pid => "pid",
            Self::IfdsOnly => "ifds",
            Self::IfdsMpc => "ifds_mpc",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "pid" => Ok(Self::Pid),
            "ifds" => Ok(Self::IfdsOnly),
            "ifds_mpc" => Ok(Self::IfdsMpc),
            other => Err(ConfigError::InvalidValue {
                key: "planner".into(),
                message: format!("unknown planner '{other}' (expected pid|ifds|ifds_mpc)"),
            }),
        }
    }
}

/// Complete experiment parameterization.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub scenario: ScenarioPreset,
    pub planner: PlannerKind,
    pub runs: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub out_dir: PathBuf,
    /// Record wall-clock step timings in CSV output (off by default so
    /// artifacts stay byte-reproducible).
    pub timing: bool,

    // control cadence and vehicle envelope
    pub dt: f64,
    pub v0: f64,
    pub omega_max: f64,
    pub theta_min: f64,
    pub theta_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub budget_factor: f64,

    // guidance parameters
    pub rho: f64,
    pub sigma_n: f64,
    pub eta: f64,
    pub tau: f64,

    // receding-horizon settings
    pub horizon: usize,
    pub gamma_safe: f64,
    pub lambda: [f64; 3],
    pub mu1: f64,
    pub mu2: f64,
    pub grid_rho: Vec<f64>,
    pub grid_sigma: Vec<f64>,
    pub grid_eta: Vec<f64>,

    // perception
    pub perception_every: usize,
    pub inflation: f64,
    pub fit_max_count: usize,
    pub fit_cell: f64,
    pub fit_k_sigma: f64,

    // camera
    pub camera_fov_deg: f64,
    pub camera_gsd_slope: f64,

    // pid baseline
    pub pid_kp: f64,
    pub pid_ki: f64,
    pub pid_kd: f64,
    pub pid_kp_alt: f64,
    pub pid_kd_alt: f64,
    pub pid_integral_clamp: f64,
    pub pid_warning_gamma: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioPreset::Dense,
            planner: PlannerKind::IfdsMpc,
            runs: 50,
            seed: 1,
            noise_sigma: 0.0,
            out_dir: PathBuf::from("runs"),
            timing: false,
            dt: 0.1,
            v0: 10.0,
            omega_max: 0.5,
            theta_min: -0.35,
            theta_max: 0.35,
            h_min: 55.0,
            h_max: 120.0,
            budget_factor: 3.0,
            rho: 1.5,
            sigma_n: 2.0,
            eta: 0.3,
            tau: 30.0,
            horizon: 20,
            gamma_safe: 1.2,
            lambda: [0.4, 0.4, 0.2],
            mu1: 1.0,
            mu2: 1.0,
            grid_rho: vec![1.0, 1.5, 2.5],
            grid_sigma: vec![1.0, 1.5, 2.5],
            grid_eta: vec![0.0, 0.3, 0.6],
            perception_every: 5,
            inflation: 1.27,
            fit_max_count: 8,
            fit_cell: 2.0,
            fit_k_sigma: 2.0,
            camera_fov_deg: 60.0,
            camera_gsd_slope: 0.0015,
            pid_kp: 0.035,
            pid_ki: 1e-3,
            pid_kd: 0.02,
            pid_kp_alt: 0.02,
            pid_kd_alt: 0.05,
            pid_integral_clamp: 200.0,
            pid_warning_gamma: 1.3,
        }
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    v.split(',')
        .map(|x| {
            x.trim().parse::<f64>().map_err(|e| ConfigError::InvalidValue {
                key: key.into(),
                message: e.to_string(),
            })
        })
        .collect()
}

impl ExperimentConfig {
    /// Parse the flat `key = value` format over the defaults.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        let mut pairs: BTreeMap<String, (String, usize)> = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Malformed { line: idx + 1 });
            };
            pairs.insert(k.trim().to_string(), (v.trim().to_string(), idx + 1));
        }

        let mut unknown = Vec::new();
        for (key, (value, _line)) in &pairs {
            let bad = |message: String| ConfigError::InvalidValue {
                key: key.clone(),
                message,
            };
            macro_rules! num {
                ($field:expr) => {
                    $field = value.parse().map_err(|e: std::num::ParseFloatError| bad(e.to_string()))?
                };
            }
            match key.as_str() {
                "scenario.preset" => cfg.scenario = value.parse().map_err(|e| bad(format!("{e}")))?,
                "planner" => cfg.planner = PlannerKind::parse(value)?,
                "runs" => {
                    cfg.runs = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "seed" => {
                    cfg.seed = value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "noise.sigma" => num!(cfg.noise_sigma),
                "out.dir" => cfg.out_dir = PathBuf::from(value),
                "timing.record" => {
                    cfg.timing = value.parse().map_err(|e: std::str::ParseBoolError| bad(e.to_string()))?
                }
                "sim.dt" => num!(cfg.dt),
                "sim.budget_factor" => num!(cfg.budget_factor),
                "uav.v0" => num!(cfg.v0),
                "limits.omega_max" => num!(cfg.omega_max),
                "limits.theta_min" => num!(cfg.theta_min),
                "limits.theta_max" => num!(cfg.theta_max),
                "limits.h_min" => num!(cfg.h_min),
                "limits.h_max" => num!(cfg.h_max),
                "ifds.rho" => num!(cfg.rho),
                "ifds.sigma_n" => num!(cfg.sigma_n),
                "ifds.eta" => num!(cfg.eta),
                "ifds.tau" => num!(cfg.tau),
                "mpc.n" => {
                    cfg.horizon =
                        value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "mpc.gamma_safe" => num!(cfg.gamma_safe),
                "mpc.lambda1" => num!(cfg.lambda[0]),
                "mpc.lambda2" => num!(cfg.lambda[1]),
                "mpc.lambda3" => num!(cfg.lambda[2]),
                "mpc.mu1" => num!(cfg.mu1),
                "mpc.mu2" => num!(cfg.mu2),
                "mpc.grid_rho" => cfg.grid_rho = parse_list(key, value)?,
                "mpc.grid_sigma" => cfg.grid_sigma = parse_list(key, value)?,
                "mpc.grid_eta" => cfg.grid_eta = parse_list(key, value)?,
                "perception.every" => {
                    cfg.perception_every =
                        value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "perception.inflation" => num!(cfg.inflation),
                "fit.max_count" => {
                    cfg.fit_max_count =
                        value.parse().map_err(|e: std::num::ParseIntError| bad(e.to_string()))?
                }
                "fit.cell" => num!(cfg.fit_cell),
                "fit.k_sigma" => num!(cfg.fit_k_sigma),
                "camera.fov_deg" => num!(cfg.camera_fov_deg),
                "camera.gsd_slope" => num!(cfg.camera_gsd_slope),
                "pid.kp" => num!(cfg.pid_kp),
                "pid.ki" => num!(cfg.pid_ki),
                "pid.kd" => num!(cfg.pid_kd),
                "pid.kp_alt" => num!(cfg.pid_kp_alt),
                "pid.kd_alt" => num!(cfg.pid_kd_alt),
                "pid.integral_clamp" => num!(cfg.pid_integral_clamp),
                "pid.warning_gamma" => num!(cfg.pid_warning_gamma),
                _ => unknown.push(key.clone()),
            }
        }
        if !unknown.is_empty() {
            return Err(ConfigError::UnknownKeys(unknown));
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: &str| Err(ConfigError::Validation(m.into()));
        if self.runs == 0 {
            return fail("runs must be >= 1");
        }
        if self.noise_sigma < 0.0 {
            return fail("noise.sigma must be >= 0");
        }
        if self.dt <= 0.0 || self.v0 <= 0.0 || self.omega_max <= 0.0 {
            return fail("sim.dt, uav.v0 and limits.omega_max must be positive");
        }
        if self.theta_min >= self.theta_max || self.h_min >= self.h_max {
            return fail("limits bands must be non-empty");
        }
        if self.horizon == 0 {
            return fail("mpc.n must be >= 1");
        }
        let s = self.lambda.iter().sum::<f64>();
        if (s - 1.0).abs() > 1e-9 {
            return fail("mpc.lambda1 + lambda2 + lambda3 must equal 1");
        }
        if self.gamma_safe <= 1.0 {
            return fail("mpc.gamma_safe must exceed 1");
        }
        if self.grid_rho.is_empty() || self.grid_sigma.is_empty() || self.grid_eta.is_empty() {
            return fail("candidate grid lists must be non-empty");
        }
        if self.perception_every == 0 {
            return fail("perception.every must be >= 1");
        }
        if self.inflation < 1.0 {
            return fail("perception.inflation must be >= 1");
        }
        if !(0.0..180.0).contains(&self.camera_fov_deg) || self.camera_fov_deg == 0.0 {
            return fail("camera.fov_deg must lie in (0, 180)");
        }
        Ok(())
    }

    /// The candidate grid as the Cartesian product of the configured lists.
    pub fn candidate_grid(&self) -> Vec<aquaplan_core::IfdsParamsF64> {
        let mut grid = Vec::new();
        for &rho in &self.grid_rho {
            for &sigma_n in &self.grid_sigma {
                for &eta in &self.grid_eta {
                    grid.push(aquaplan_core::ifds::IfdsParams {
                        rho,
                        sigma_n,
                        eta,
                        tau: self.tau,
                    });
                }
            }
        }
        grid
    }

    /// Render the effective configuration back to the flat text format.
    pub fn render(&self) -> String {
        let list = |v: &[f64]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        format!(
            "scenario.preset = {}\nplanner = {}\nruns = {}\nseed = {}\nnoise.sigma = {}\n\
             out.dir = {}\ntiming.record = {}\nsim.dt = {}\nsim.budget_factor = {}\nuav.v0 = {}\n\
             limits.omega_max = {}\nlimits.theta_min = {}\nlimits.theta_max = {}\n\
             limits.h_min = {}\nlimits.h_max = {}\nifds.rho = {}\nifds.sigma_n = {}\n\
             ifds.eta = {}\nifds.tau = {}\nmpc.n = {}\nmpc.gamma_safe = {}\nmpc.lambda1 = {}\n\
             mpc.lambda2 = {}\nmpc.lambda3 = {}\nmpc.mu1 = {}\nmpc.mu2 = {}\n\
             mpc.grid_rho = {}\nmpc.grid_sigma = {}\nmpc.grid_eta = {}\nperception.every = {}\n\
             perception.inflation = {}\nfit.max_count = {}\nfit.cell = {}\nfit.k_sigma = {}\n\
             camera.fov_deg = {}\ncamera.gsd_slope = {}\npid.kp = {}\npid.ki = {}\npid.kd = {}\n\
             pid.kp_alt = {}\npid.kd_alt = {}\npid.integral_clamp = {}\npid.warning_gamma = {}\n",
            self.scenario.name(),
            self.planner.name(),
            self.runs,
            self.seed,
            self.noise_sigma,
            self.out_dir.display(),
            self.timing,
            self.dt,
            self.budget_factor,
            self.v0,
            self.omega_max,
            self.theta_min,
            self.theta_max,
            self.h_min,
            self.h_max,
            self.rho,
            self.sigma_n,
            self.eta,
            self.tau,
            self.horizon,
            self.gamma_safe,
            self.lambda[0],
            self.lambda[1],
            self.lambda[2],
            self.mu1,
            self.mu2,
            list(&self.grid_rho),
            list(&self.grid_sigma),
            list(&self.grid_eta),
            self.perception_every,
            self.inflation,
            self.fit_max_count,
            self.fit_cell,
            self.fit_k_sigma,
            self.camera_fov_deg,
            self.camera_gsd_slope,
            self.pid_kp,
            self.pid_ki,
            self.pid_kd,
            self.pid_kp_alt,
            self.pid_kd_alt,
            self.pid_integral_clamp,
            self.pid_warning_gamma,
        )
    }
}
