//! Run configuration: JSON file with flat keys, overridden by flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ifem_core::benchmark::{self, NormVariant};
use ifem_core::{Method, Point, RadialProblem, SolverConfig};

use crate::CliError;

pub const DEFAULT_N_LIST: [usize; 5] = [10, 20, 40, 80, 160];
pub const DEFAULT_BETAS: [f64; 2] = [10.0, 100.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Md,
}

/// Every field is optional so that a file, the flags and the per-command
/// defaults can be layered.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_list: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cg_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outer_tol: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jacobi: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<OutputFormat>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub norm_variant: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub patch_test: Option<bool>,
}

macro_rules! overlay {
    ($base:expr, $top:expr, $($field:ident),*) => {
        $( if $top.$field.is_some() { $base.$field = $top.$field.clone(); } )*
    };
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("config: {}: {e}", path.display())))
    }

    pub fn save(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("config serializes");
        std::fs::write(path, text + "\n")
            .map_err(|e| CliError::Config(format!("dump-config: cannot write {}: {e}", path.display())))
    }

    /// Fields set in `top` replace those of `self`.
    pub fn merged(mut self, top: &RunConfig) -> RunConfig {
        overlay!(
            self, top, method, n, n_list, alpha, beta, r1, cx, cy, cg_tol, outer_tol, jacobi, out, format,
            norm_variant, patch_test
        );
        self
    }

    pub fn method(&self) -> Result<Option<Method>, CliError> {
        self.method.as_deref().map(str::parse).transpose().map_err(CliError::from_invalid)
    }

    pub fn norm_variant(&self) -> Result<NormVariant, CliError> {
        Ok(self
            .norm_variant
            .as_deref()
            .map(str::parse)
            .transpose()
            .map_err(CliError::from_invalid)?
            .unwrap_or_default())
    }

    pub fn n(&self, default: usize) -> Result<usize, CliError> {
        match self.n.unwrap_or(default) {
            0 => Err(CliError::Config("n: N must be at least 1".into())),
            n => Ok(n),
        }
    }

    pub fn n_list(&self, default: &[usize]) -> Result<Vec<usize>, CliError> {
        let ns = self.n_list.clone().unwrap_or_else(|| default.to_vec());
        benchmark::validate_refinements(&ns).map_err(CliError::from_invalid)?;
        Ok(ns)
    }

    /// Radial benchmark with the given outside coefficient.
    pub fn problem(&self, beta: f64) -> Result<RadialProblem, CliError> {
        let rp = RadialProblem::new(self.alpha.unwrap_or(1.0), beta)
            .with_radius(self.r1.unwrap_or(0.5))
            .with_center(Point::new(self.cx.unwrap_or(0.0), self.cy.unwrap_or(0.0)));
        rp.validate().map_err(CliError::from_invalid)?;
        Ok(rp)
    }

    /// Outside coefficients to run: the configured one or the default pair.
    pub fn betas(&self) -> Vec<f64> {
        self.beta.map_or_else(|| DEFAULT_BETAS.to_vec(), |b| vec![b])
    }

    pub fn solver(&self) -> Result<SolverConfig, CliError> {
        let defaults = SolverConfig::default();
        let tol = |name: &str, v: Option<f64>, d: f64| match v {
            None => Ok(d),
            Some(t) if t > 0.0 && t < 1.0 => Ok(t),
            Some(t) => Err(CliError::Config(format!("{name}: tolerance must lie in (0, 1), got {t}"))),
        };
        Ok(SolverConfig {
            cg_tolerance: tol("cg-tol", self.cg_tol, defaults.cg_tolerance)?,
            outer_tolerance: tol("outer-tol", self.outer_tol, defaults.outer_tolerance)?,
            jacobi: self.jacobi.unwrap_or(false),
            ..defaults
        })
    }

    /// Checks every field a command might read, so that errors surface
    /// before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.method()?;
        self.norm_variant()?;
        if self.n == Some(0) {
            return Err(CliError::Config("n: N must be at least 1".into()));
        }
        if let Some(ns) = &self.n_list {
            benchmark::validate_refinements(ns).map_err(CliError::from_invalid)?;
        }
        for beta in self.betas() {
            self.problem(beta)?;
        }
        self.solver()?;
        Ok(())
    }
}
