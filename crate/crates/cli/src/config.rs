//! Experiment configuration: one human-editable TOML file per run.

use anyhow::{bail, Context};
use serde::Deserialize;

/// Supported experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    S3xs3Linking,
    Cp2Flux,
    HodgeSelftest,
    GvFamily,
    IdentitySuite,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::S3xs3Linking => "s3xs3-linking",
            Experiment::Cp2Flux => "cp2-flux",
            Experiment::HodgeSelftest => "hodge-selftest",
            Experiment::GvFamily => "gv-family",
            Experiment::IdentitySuite => "identity-suite",
        }
    }

    pub fn all() -> [(Experiment, &'static str); 5] {
        [
            (
                Experiment::S3xs3Linking,
                "Monte Carlo asymptotic linking of the two-speed rotation flow with the pairing zero set, against 2(a-b)π³",
            ),
            (
                Experiment::Cp2Flux,
                "crossing estimate of the projective rotation through the real-segment wall, against the quadrature flux",
            ),
            (
                Experiment::HodgeSelftest,
                "Fourier-torus Green's operator and linking-form identities",
            ),
            (
                Experiment::GvFamily,
                "Godbillon-Vey residual suite for a foliation family from the config",
            ),
            (
                Experiment::IdentitySuite,
                "pointwise symplectic/contact/moment-map identity residuals",
            ),
        ]
    }
}

/// Numeric parameters. Unset fields take the documented defaults.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub speed: Option<f64>,
    pub t_end: Option<f64>,
    pub n_samples: Option<usize>,
    pub tol: Option<f64>,
    pub short_paths: Option<String>,
    pub ball_radius: Option<f64>,
    pub band_limit: Option<i16>,
    pub n_forms: Option<usize>,
    pub rel_tolerance: Option<f64>,
    pub grid: Option<usize>,
    pub family_time: Option<f64>,
    pub probe_count: Option<usize>,
    pub n_points: Option<usize>,
}

/// Foliation family definition (gv-family): coefficient expressions per
/// chart coordinate, in the variables x1..x4 and t.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub name: Option<String>,
    pub alpha: Vec<String>,
    pub transversal: Vec<String>,
    pub probe_lo: Option<Vec<f64>>,
    pub probe_hi: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    pub experiment: Experiment,
    pub seed: u64,
    pub out_dir: std::path::PathBuf,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub params: Params,
    pub family: Option<FamilySpec>,
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> anyhow::Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let cfg: ExperimentConfig = toml::from_str(&text).context("parsing config TOML")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.version != 1 {
            bail!("unsupported config version {} (expected 1)", self.version);
        }
        for (name, v) in [
            ("t_end", self.params.t_end),
            ("tol", self.params.tol),
            ("ball_radius", self.params.ball_radius),
            ("rel_tolerance", self.params.rel_tolerance),
        ] {
            if let Some(v) = v {
                if !(v > 0.0) {
                    bail!("parameter {name} must be positive, got {v}");
                }
            }
        }
        if let Some(sp) = &self.params.short_paths {
            if sp != "geodesic" && sp != "covering" {
                bail!("short_paths must be \"geodesic\" or \"covering\", got {sp:?}");
            }
        }
        if self.experiment == Experiment::GvFamily {
            if let Some(f) = &self.family {
                if f.alpha.len() != 4 || f.transversal.len() != 4 {
                    bail!("family alpha/transversal need 4 coefficient expressions each");
                }
            }
        } else if self.family.is_some() {
            bail!("[family] section only applies to the gv-family experiment");
        }
        Ok(())
    }
}
