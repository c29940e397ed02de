//! Run configuration: one TOML file per experiment.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::GAUGE_MAX_RADIUS;
use crate::error::{Error, Result};
use crate::geometry::DomainSpec;
use crate::integrand::{AngularProfile, Integrand};
use crate::linalg::Mat2;
use crate::solver::SolveOptions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum IntegrandConfig {
    /// f(η) = |η|^p.
    Power { p: f64 },
    /// f(η) = ηᵀAη.
    QuadraticForm { matrix: [[f64; 2]; 2] },
    /// |η|^p times a sampled angular profile; the path is relative to the
    /// config file.
    SampledProfile { p: f64, profile: PathBuf },
}

impl IntegrandConfig {
    pub fn p(&self) -> f64 {
        match self {
            IntegrandConfig::Power { p } | IntegrandConfig::SampledProfile { p, .. } => *p,
            IntegrandConfig::QuadraticForm { .. } => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub h_max: f64,
    #[serde(default = "default_grading")]
    pub grading: f64,
}

fn default_grading() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Levels of the moment table, inside (0, 1/2).
    pub moment_levels: Vec<f64>,
    pub m_max: u32,
    /// Levels at which I₀ is tabulated.
    pub flux_levels: Vec<f64>,
    pub winding_levels: Vec<f64>,
    /// Levels of the exceptional flux, inside (0, e⁻²).
    pub exceptional_levels: Vec<f64>,
    /// Gauge exponents A swept by the gauge comparison.
    pub gauge_a: Vec<f64>,
    /// Overrides c_* of 𝔇; by default it comes from the moment fit.
    pub c_star: Option<f64>,
    /// Overrides the truncation shift c′ of g.
    pub c_prime: Option<f64>,
    /// Overrides the geometric radius grid.
    pub radii: Option<Vec<f64>>,
    pub centers: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            moment_levels: vec![0.4, 0.2, 0.1, 0.05, 0.02, 0.01],
            m_max: 5,
            flux_levels: (1..=9).map(|k| k as f64 / 10.0).collect(),
            winding_levels: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            exceptional_levels: vec![0.01, 0.02, 0.05, 0.1],
            gauge_a: vec![0.0, 1.0, 2.0],
            c_star: None,
            c_prime: None,
            radii: None,
            centers: crate::analysis::DEFAULT_CENTERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    pub integrand: IntegrandConfig,
    pub domain: DomainSpec,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub solve: SolveOptions,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    /// Directory of the config file; relative paths resolve against it.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<RunConfig> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map(|s| locate_key(text, s.start)).unwrap_or_default();
            Error::config(field, e.message().to_string())
        })?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Output directory, resolved against the config directory.
    pub fn output_dir(&self) -> PathBuf {
        self.base_dir.join(&self.output)
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.integrand.p();
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::config("integrand.p", format!("must lie in (1, ∞), got {p}")));
        }
        if let IntegrandConfig::SampledProfile { profile, .. } = &self.integrand {
            let path = self.base_dir.join(profile);
            if !path.is_file() {
                return Err(Error::config("integrand.profile", format!("file {} does not exist", path.display())));
            }
        }
        if !(self.mesh.h_max.is_finite() && self.mesh.h_max > 0.0 && self.mesh.h_max <= 0.2) {
            return Err(Error::config("mesh.h_max", format!("must lie in (0, 0.2], got {}", self.mesh.h_max)));
        }
        if !(self.mesh.grading > 0.0 && self.mesh.grading <= 1.0) {
            return Err(Error::config("mesh.grading", format!("must lie in (0, 1], got {}", self.mesh.grading)));
        }
        self.solve.validate()?;
        let a = &self.analysis;
        let within = |name: &str, ts: &[f64], hi: f64| -> Result<()> {
            match ts.iter().find(|t| !(**t > 0.0 && **t < hi)) {
                Some(t) => Err(Error::config(format!("analysis.{name}"), format!("level {t} is outside (0, {hi})"))),
                None => Ok(()),
            }
        };
        within("moment_levels", &a.moment_levels, 0.5)?;
        within("flux_levels", &a.flux_levels, 1.0)?;
        within("winding_levels", &a.winding_levels, 1.0)?;
        within("exceptional_levels", &a.exceptional_levels, GAUGE_MAX_RADIUS)?;
        if a.m_max > 50 {
            return Err(Error::config("analysis.m_max", format!("must be at most 50, got {}", a.m_max)));
        }
        if let Some(g) = a.gauge_a.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
            return Err(Error::config("analysis.gauge_a", format!("exponents must be finite and ≥ 0, got {g}")));
        }
        if let Some(c) = a.c_star {
            if !(c.is_finite() && c >= 1.0) {
                return Err(Error::config("analysis.c_star", format!("must be ≥ 1, got {c}")));
            }
        }
        if let Some(c) = a.c_prime {
            if !(c.is_finite() && c >= 0.0) {
                return Err(Error::config("analysis.c_prime", format!("must be ≥ 0, got {c}")));
            }
        }
        if let Some(r) = &a.radii {
            if r.len() < crate::analysis::MIN_RADII || r.iter().any(|x| !(*x > 0.0)) || r.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("analysis.radii", "need at least 4 positive, strictly increasing radii"));
            }
        }
        if a.centers == 0 {
            return Err(Error::config("analysis.centers", "must be at least 1"));
        }
        Ok(())
    }

    pub fn build_integrand(&self) -> Result<Integrand> {
        let wrap = |e: Error, field: &str| match e {
            Error::InvalidInput(m) | Error::Parse(m) => Error::config(field, m),
            Error::Io(e) => Error::config(field, e.to_string()),
            other => other,
        };
        match &self.integrand {
            IntegrandConfig::Power { p } => Integrand::power(*p).map_err(|e| wrap(e, "integrand.p")),
            IntegrandConfig::QuadraticForm { matrix } => {
                Integrand::quadratic_form(Mat2::new(matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]))
                    .map_err(|e| wrap(e, "integrand.matrix"))
            }
            IntegrandConfig::SampledProfile { p, profile } => {
                let prof = AngularProfile::from_file(self.base_dir.join(profile)).map_err(|e| wrap(e, "integrand.profile"))?;
                Integrand::new(*p, prof).map_err(|e| wrap(e, "integrand.profile"))
            }
        }
    }
}

/// Dotted key path of the table entry containing byte `offset`.
fn locate_key(text: &str, offset: usize) -> String {
    let mut section = String::new();
    let mut key = String::new();
    let mut pos = 0;
    for line in text.split_inclusive('\n') {
        let t = line.trim();
        if t.starts_with('[') && t.ends_with(']') {
            section = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            key.clear();
        } else if let Some((k, _)) = t.split_once('=') {
            key = k.trim().to_string();
        }
        pos += line.len();
        if pos > offset {
            break;
        }
    }
    match (section.is_empty(), key.is_empty()) {
        (true, _) => key,
        (false, true) => section,
        (false, false) => format!("{section}.{key}"),
    }
}
