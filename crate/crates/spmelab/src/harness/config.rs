//! Experiment configuration: a versioned, schema-validated TOML file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Simulate,
    HoleFill,
    Propagation,
    Entropy,
    BoundsOnly,
    Validate,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::HoleFill => "hole-fill",
            ExperimentKind::Propagation => "propagation",
            ExperimentKind::Entropy => "entropy",
            ExperimentKind::BoundsOnly => "bounds-only",
            ExperimentKind::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub dimension: usize,
    /// Ball center (hole-fill style domains).
    #[serde(default)]
    pub center: Vec<f64>,
    /// Ball radius R (hole-fill style domains).
    #[serde(default)]
    pub radius: Option<f64>,
    /// Box corners (other domains).
    #[serde(default)]
    pub lo: Vec<f64>,
    #[serde(default)]
    pub hi: Vec<f64>,
    /// Cells across the domain (per axis).
    pub cells: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub m: f64,
    #[serde(default)]
    pub lambda: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Zero,
    Brownian,
    Fbm,
    LinearDrift,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Coefficient expressions, one per channel (grammar: constants,
    /// coordinates x/y, pi, + - *, integer ^, sin, cos, exp).
    #[serde(default)]
    pub coefficients: Vec<String>,
    pub kind: NoiseKind,
    #[serde(default)]
    pub hurst: Option<f64>,
    #[serde(default)]
    pub drift_rate: Option<f64>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    /// Sample spacing of the driving signal.
    pub dt: f64,
    /// History length for runs that need the signal on `[-t_past, 0]`.
    #[serde(default)]
    pub t_past: Option<f64>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    #[serde(default = "default_newton_max")]
    pub newton_max: usize,
    #[serde(default)]
    pub delta_reg: Option<f64>,
    #[serde(default)]
    pub support_threshold: Option<f64>,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_newton_tol() -> f64 {
    1e-10
}
fn default_newton_max() -> usize {
    50
}
fn default_stride() -> usize {
    1
}

impl SolverConfig {
    pub fn to_params(&self, m: f64) -> crate::solver::SolverParams {
        crate::solver::SolverParams {
            m,
            delta_reg: self.delta_reg,
            dt: self.dt,
            newton_tol: self.newton_tol,
            newton_max: self.newton_max,
            support_threshold: self.support_threshold,
            snapshot_stride: self.snapshot_stride,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryKind {
    Zero,
    Constant,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// Self-similar profile with free constant `c_b` placed at `t0`.
    Barenblatt { c_b: f64, t0: f64 },
    /// `height · 1_{B(radius, center of domain)}`.
    Bump { height: f64, radius: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    /// Final time of the run (experiment clock starts at 0).
    #[serde(default)]
    pub t_end: Option<f64>,
    /// Dirichlet level H for hole-fill runs.
    #[serde(default)]
    pub boundary_value: Option<f64>,
    #[serde(default)]
    pub initial: Option<InitialData>,
    /// Propagation: restart times s and dilation radii h.
    #[serde(default)]
    pub s_times: Vec<f64>,
    #[serde(default)]
    pub h_ladder: Vec<f64>,
    /// Entropy: ε ladder, rescaling δ, bump height factor κ.
    #[serde(default)]
    pub eps_ladder: Vec<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_shrinks")]
    pub max_shrinks: usize,
    /// Norm lattice refinement factor.
    #[serde(default = "default_refine")]
    pub refine: usize,
    /// Worker threads (0 = library default).
    #[serde(default)]
    pub workers: usize,
}

fn default_kappa() -> f64 {
    0.2
}
fn default_shrinks() -> usize {
    6
}
fn default_refine() -> usize {
    4
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            t_end: None,
            boundary_value: None,
            initial: None,
            s_times: Vec::new(),
            h_ladder: Vec::new(),
            eps_ladder: Vec::new(),
            delta: None,
            kappa: default_kappa(),
            max_shrinks: default_shrinks(),
            refine: default_refine(),
            workers: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    #[serde(default)]
    pub plots: bool,
    #[serde(default = "default_true")]
    pub csv: bool,
}

fn default_true() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: "out".into(),
            plots: false,
            csv: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub kind: ExperimentKind,
    pub domain: DomainConfig,
    pub model: ModelConfig,
    pub noise: NoiseConfig,
    pub solver: SolverConfig,
    #[serde(default)]
    pub experiment: ExperimentSection,
    #[serde(default)]
    pub output: OutputConfig,
}

impl ExperimentConfig {
    /// Schema validation beyond what serde enforces.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!(
                "config version {} unsupported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        let d = self.domain.dimension;
        if !(d == 1 || d == 2) {
            return Err(Error::Config("domain dimension must be 1 or 2".into()));
        }
        if !(self.model.m > 1.0) {
            return Err(Error::Config("model m must exceed 1".into()));
        }
        if self.model.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if !(self.noise.dt > 0.0) {
            return Err(Error::Config("noise dt must be positive".into()));
        }
        if self.noise.kind == NoiseKind::Fbm {
            match self.noise.hurst {
                Some(h) if h > 0.0 && h < 1.0 => {}
                _ => {
                    return Err(Error::Config(
                        "fbm noise needs a hurst parameter in (0,1)".into(),
                    ))
                }
            }
        }
        if self.noise.kind != NoiseKind::Zero && self.noise.coefficients.is_empty() {
            return Err(Error::Config(
                "non-zero noise needs coefficient expressions".into(),
            ));
        }
        for src in &self.noise.coefficients {
            crate::noise_field::parse_expr(src)
                .map_err(|e| Error::Config(format!("coefficient '{src}': {e}")))?;
        }
        if !(self.solver.dt > 0.0) {
            return Err(Error::Config("solver dt must be positive".into()));
        }
        if self.noise.seeds.is_empty() {
            return Err(Error::Config("need at least one seed".into()));
        }
        match self.kind {
            ExperimentKind::HoleFill => {
                if self.domain.radius.is_none() {
                    return Err(Error::Config("hole-fill needs domain.radius".into()));
                }
                if self.experiment.boundary_value.unwrap_or(0.0) <= 0.0 {
                    return Err(Error::Config(
                        "hole-fill needs a positive experiment.boundary_value".into(),
                    ));
                }
                if self.experiment.t_end.unwrap_or(0.0) <= 0.0 {
                    return Err(Error::Config("hole-fill needs experiment.t_end".into()));
                }
            }
            ExperimentKind::Propagation => {
                if self.domain.lo.len() != d || self.domain.hi.len() != d {
                    return Err(Error::Config("propagation needs domain.lo/hi".into()));
                }
                if self.experiment.h_ladder.is_empty() {
                    return Err(Error::Config("propagation needs experiment.h_ladder".into()));
                }
                if self.experiment.t_end.unwrap_or(0.0) <= 0.0 {
                    return Err(Error::Config("propagation needs experiment.t_end".into()));
                }
            }
            ExperimentKind::Entropy => {
                if self.experiment.eps_ladder.is_empty() {
                    return Err(Error::Config("entropy needs experiment.eps_ladder".into()));
                }
                let delta = self.experiment.delta.unwrap_or(0.0);
                if delta <= 0.0 {
                    return Err(Error::Config("entropy needs experiment.delta > 0".into()));
                }
                if (self.model.m - 1.0) * self.model.lambda <= delta {
                    return Err(Error::Config(
                        "entropy needs (m-1)·lambda > delta".into(),
                    ));
                }
            }
            ExperimentKind::Simulate => {
                if self.experiment.t_end.unwrap_or(0.0) <= 0.0 {
                    return Err(Error::Config("simulate needs experiment.t_end".into()));
                }
            }
            ExperimentKind::BoundsOnly | ExperimentKind::Validate => {}
        }
        Ok(())
    }
}

/// Load and validate a TOML config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let cfg: ExperimentConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{e}")))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Built-in default configuration per experiment kind; all defaults run
/// at desk scale in minutes or less.
pub fn default_config(kind: ExperimentKind) -> ExperimentConfig {
    let cfg = match kind {
        ExperimentKind::HoleFill => ExperimentConfig {
            version: CONFIG_VERSION,
            kind,
            domain: DomainConfig {
                dimension: 1,
                center: vec![0.0],
                radius: Some(1.0),
                lo: vec![],
                hi: vec![],
                cells: 256,
            },
            model: ModelConfig { m: 2.0, lambda: 0.0 },
            noise: NoiseConfig {
                coefficients: vec!["sin(pi*x)".into()],
                kind: NoiseKind::Brownian,
                hurst: None,
                drift_rate: None,
                seeds: vec![1, 2, 3],
                dt: 5e-4,
                t_past: None,
            },
            solver: SolverConfig {
                dt: 2.5e-4,
                newton_tol: default_newton_tol(),
                newton_max: default_newton_max(),
                delta_reg: None,
                support_threshold: None,
                snapshot_stride: 4,
            },
            experiment: ExperimentSection {
                t_end: Some(0.25),
                boundary_value: Some(1.0),
                ..Default::default()
            },
            output: OutputConfig::default(),
        },
        ExperimentKind::Propagation => ExperimentConfig {
            version: CONFIG_VERSION,
            kind,
            domain: DomainConfig {
                dimension: 1,
                center: vec![],
                radius: None,
                lo: vec![-1.0],
                hi: vec![1.0],
                cells: 256,
            },
            model: ModelConfig { m: 2.0, lambda: 0.0 },
            noise: NoiseConfig {
                coefficients: vec!["sin(pi*x)".into()],
                kind: NoiseKind::Brownian,
                hurst: None,
                drift_rate: None,
                seeds: vec![1, 2],
                dt: 5e-4,
                t_past: None,
            },
            solver: SolverConfig {
                dt: 2.5e-4,
                newton_tol: default_newton_tol(),
                newton_max: default_newton_max(),
                delta_reg: None,
                support_threshold: None,
                snapshot_stride: 4,
            },
            experiment: ExperimentSection {
                t_end: Some(0.2),
                initial: Some(InitialData::Barenblatt { c_b: 0.005, t0: 1.0 }),
                s_times: vec![0.0, 0.05],
                h_ladder: vec![0.1, 0.2],
                ..Default::default()
            },
            output: OutputConfig::default(),
        },
        ExperimentKind::Entropy => ExperimentConfig {
            version: CONFIG_VERSION,
            kind,
            domain: DomainConfig {
                dimension: 1,
                center: vec![],
                radius: None,
                lo: vec![0.0],
                hi: vec![1.0],
                cells: 0, // resolved per epsilon
            },
            model: ModelConfig { m: 2.0, lambda: 1.0 },
            noise: NoiseConfig {
                coefficients: vec!["sin(pi*x)".into()],
                kind: NoiseKind::Brownian,
                hurst: None,
                drift_rate: None,
                seeds: vec![1],
                dt: 2e-2,
                t_past: None,
            },
            solver: SolverConfig {
                dt: 2e-3,
                newton_tol: default_newton_tol(),
                newton_max: default_newton_max(),
                delta_reg: None,
                support_threshold: None,
                snapshot_stride: 20,
            },
            experiment: ExperimentSection {
                eps_ladder: vec![1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0, 1.0 / 64.0],
                delta: Some(0.5),
                ..Default::default()
            },
            output: OutputConfig::default(),
        },
        ExperimentKind::Simulate => ExperimentConfig {
            version: CONFIG_VERSION,
            kind,
            domain: DomainConfig {
                dimension: 1,
                center: vec![],
                radius: None,
                lo: vec![-1.0],
                hi: vec![1.0],
                cells: 256,
            },
            model: ModelConfig { m: 2.0, lambda: 0.0 },
            noise: NoiseConfig {
                coefficients: vec!["sin(pi*x)".into()],
                kind: NoiseKind::Brownian,
                hurst: None,
                drift_rate: None,
                seeds: vec![1],
                dt: 5e-4,
                t_past: None,
            },
            solver: SolverConfig {
                dt: 2.5e-4,
                newton_tol: default_newton_tol(),
                newton_max: default_newton_max(),
                delta_reg: None,
                support_threshold: None,
                snapshot_stride: 8,
            },
            experiment: ExperimentSection {
                t_end: Some(0.2),
                initial: Some(InitialData::Barenblatt { c_b: 0.005, t0: 1.0 }),
                ..Default::default()
            },
            output: OutputConfig::default(),
        },
        ExperimentKind::BoundsOnly => {
            let mut cfg = default_config(ExperimentKind::HoleFill);
            cfg.kind = ExperimentKind::BoundsOnly;
            cfg
        }
        ExperimentKind::Validate => {
            let mut cfg = default_config(ExperimentKind::HoleFill);
            cfg.kind = ExperimentKind::Validate;
            cfg
        }
    };
    cfg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        for kind in [
            ExperimentKind::Simulate,
            ExperimentKind::HoleFill,
            ExperimentKind::Propagation,
            ExperimentKind::Entropy,
            ExperimentKind::BoundsOnly,
            ExperimentKind::Validate,
        ] {
            default_config(kind).validate().unwrap_or_else(|e| {
                panic!("default {} config invalid: {e}", kind.name())
            });
        }
    }

    #[test]
    fn toml_round_trip() {
        let cfg = default_config(ExperimentKind::HoleFill);
        let text = toml::to_string(&cfg).unwrap();
        let back: ExperimentConfig = toml::from_str(&text).unwrap();
        back.validate().unwrap();
        assert_eq!(back.kind, ExperimentKind::HoleFill);
        assert_eq!(back.noise.seeds, cfg.noise.seeds);
    }

    #[test]
    fn schema_violations_are_rejected() {
        let mut cfg = default_config(ExperimentKind::HoleFill);
        cfg.version = 99;
        assert!(cfg.validate().is_err());

        let mut cfg = default_config(ExperimentKind::HoleFill);
        cfg.model.m = 0.9;
        assert!(cfg.validate().is_err());

        let mut cfg = default_config(ExperimentKind::HoleFill);
        cfg.noise.coefficients = vec!["sin(".into()];
        assert!(cfg.validate().is_err());

        let mut cfg = default_config(ExperimentKind::Entropy);
        cfg.experiment.delta = Some(5.0); // (m-1)λ = 1 < δ
        assert!(cfg.validate().is_err());

        // unknown fields rejected at parse level
        let bad = "version = 1\nkind = \"simulate\"\nbogus = 3\n";
        assert!(toml::from_str::<ExperimentConfig>(bad).is_err());
    }
}
