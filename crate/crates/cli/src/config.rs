//! Run configuration: one TOML (or JSON) file describing the model, solver,
//! convex profile, scan, asymptotics window and sweep grid.

use std::path::{Path, PathBuf};

use pharmonic::geometry::{make_domain_warp, make_euclidean_warp, make_target_warp, GeometryError};
use pharmonic::{ConvexProfile, FitWindow, ModelParameters, SolverConfig, WarpingFunction};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WarpChoice {
    /// The shifted power family (`δ` for the domain, `σ` for the target).
    #[default]
    Power,
    Flat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Warps {
    pub domain: WarpChoice,
    pub target: WarpChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ProfileChoice {
    #[default]
    Linear,
    Quadratic,
    Linquad,
    /// `h(t) = Σ cₖ tᵏ`.
    Polynomial { coefficients: Vec<f64> },
}

impl ProfileChoice {
    pub fn build(&self) -> ConvexProfile {
        match self {
            ProfileChoice::Linear => ConvexProfile::linear(),
            ProfileChoice::Quadratic => ConvexProfile::quadratic(),
            ProfileChoice::Linquad => ConvexProfile::linquad(),
            ProfileChoice::Polynomial { coefficients } => ConvexProfile::polynomial("polynomial", coefficients.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScanConfig {
    pub s_lo: f64,
    /// Defaults to the solution's final radius.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s_hi: Option<f64>,
    pub samples_per_decade: usize,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self { s_lo: 1.0, s_hi: None, samples_per_decade: 64 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct AsymptoticsConfig {
    /// `[lo, hi]`; defaults to the last two decades of the run.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    /// Growth constant of the domain warp; defaults to the warp's own.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c1: Option<f64>,
}

/// Parameter lists whose Cartesian product is swept. Empty lists fall back
/// to the `[model]` value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SweepConfig {
    pub n: Vec<u32>,
    pub p: Vec<f64>,
    pub delta: Vec<f64>,
    pub sigma: Vec<f64>,
    pub alpha: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("out"), format: Format::Csv }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub model: ModelParameters,
    pub warps: Warps,
    pub solver: SolverConfig,
    pub profile: ProfileChoice,
    pub scan: ScanConfig,
    pub asymptotics: AsymptoticsConfig,
    pub sweep: SweepConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelParameters::new(2, 2.5, 3.0, 0.5, 1.0),
            warps: Warps::default(),
            solver: SolverConfig::default(),
            profile: ProfileChoice::default(),
            scan: ScanConfig::default(),
            asymptotics: AsymptoticsConfig::default(),
            sweep: SweepConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        if is_json(path) {
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        } else {
            Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn warps_for(&self, params: &ModelParameters) -> Result<(WarpingFunction, WarpingFunction), GeometryError> {
        let g = match self.warps.domain {
            WarpChoice::Power => make_domain_warp(params.delta)?,
            WarpChoice::Flat => make_euclidean_warp(),
        };
        let j = match self.warps.target {
            WarpChoice::Power => make_target_warp(params.sigma)?,
            WarpChoice::Flat => make_euclidean_warp(),
        };
        Ok((g, j))
    }

    pub fn fit_window(&self, s_max: f64) -> FitWindow {
        match self.asymptotics.window {
            Some([lo, hi]) => FitWindow::new(lo, hi),
            None => FitWindow::new(s_max / 100.0, s_max),
        }
    }

    /// Sweep points in lexicographic `(n, p, δ, σ, α)` order.
    pub fn sweep_points(&self) -> Vec<ModelParameters> {
        fn or<T: Copy>(list: &[T], fallback: T) -> Vec<T> {
            if list.is_empty() {
                vec![fallback]
            } else {
                list.to_vec()
            }
        }
        let m = &self.model;
        let mut out = Vec::new();
        for &n in &or(&self.sweep.n, m.n) {
            for &p in &or(&self.sweep.p, m.p) {
                for &delta in &or(&self.sweep.delta, m.delta) {
                    for &sigma in &or(&self.sweep.sigma, m.sigma) {
                        for &alpha in &or(&self.sweep.alpha, m.alpha) {
                            out.push(ModelParameters::new(n, p, delta, sigma, alpha));
                        }
                    }
                }
            }
        }
        out
    }
}

pub fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}
