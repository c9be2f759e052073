//! Experiment configuration: a single TOML file, schema-validated before
//! any computation. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corr::{CorrFamily, Kernel, TailModel};
use crate::ensemble::{NeelParity, RampSchedule, ThermalKind};
use crate::error::{Error, Result};
use crate::fit::FitConfig;
use crate::fock::Spin;
use crate::model::ModelParams;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// eigenvalues per sector
    Spectrum,
    /// local density of states from pole broadening
    Ldos,
    /// greens lesser/greater pair: time series, spectra, FDT fit
    Greens,
    /// density-density pair and canonical β fit
    DensityCorr,
    /// incremental MEGA loop over ramp-prepared states
    Mega,
    /// eigenstate expectation scatter table
    EthScatter,
    /// trace-distance sweep against the energy-matched Gibbs state
    TraceDistance,
    /// Gibbs self-consistency: construct at (β, μ), fit them back
    GibbsFit,
}

/// How the source state(s) are prepared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceSpec {
    Gibbs {
        beta: f64,
        #[serde(default)]
        mu: f64,
        kind: ThermalKind,
    },
    Window {
        e_min: f64,
        e_max: f64,
        /// total particle number of the included sectors
        total_n: usize,
    },
    Ramp {
        #[serde(default = "RampSchedule::default_quench")]
        schedule: RampSchedule,
        #[serde(default = "default_tau")]
        tau: f64,
        #[serde(default = "default_ramp_tol")]
        tol: f64,
        /// one prepared state per listed Néel parity
        #[serde(default = "default_parities")]
        parities: Vec<NeelParity>,
    },
    Eigenstate {
        sector: (usize, usize),
        index: usize,
    },
}

fn default_tau() -> f64 {
    50.0
}

fn default_ramp_tol() -> f64 {
    1e-8
}

fn default_parities() -> Vec<NeelParity> {
    vec![NeelParity::UpFirst, NeelParity::DownFirst]
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrelatorConfig {
    pub family: CorrFamily,
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
    pub dt: f64,
    pub t_max: f64,
    pub eta: f64,
    pub kernel: Kernel,
    pub tail_model: TailModel,
    pub fit_window: f64,
}

impl Default for CorrelatorConfig {
    fn default() -> Self {
        CorrelatorConfig {
            family: CorrFamily::Greens,
            i: 0,
            j: 0,
            spin: Spin::Up,
            dt: 0.05,
            t_max: 20.0,
            eta: 0.1,
            kernel: Kernel::Gaussian,
            tail_model: TailModel::Exponential,
            fit_window: 0.25,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ComputeConfig {
    pub dense_cap: usize,
    pub translation_blocking: bool,
    /// explicit sector list; empty means "derived from the source"
    pub sectors: Vec<(usize, usize)>,
    /// drop source components at or below this weight
    pub weight_cutoff: f64,
    pub pole_merge_tol: f64,
}

impl Default for ComputeConfig {
    fn default() -> Self {
        ComputeConfig {
            dense_cap: 20_000,
            translation_blocking: false,
            sectors: Vec::new(),
            weight_cutoff: 0.0,
            pole_merge_tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelParams,
    pub experiment: ExperimentKind,
    pub source: SourceSpec,
    #[serde(default)]
    pub correlator: CorrelatorConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub compute: ComputeConfig,
    /// output directory; overridable from the command line
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_str(&text)
    }

    pub fn from_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::config(format!("schema violation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Domain validation beyond the serde schema. Cheap: runs before any
    /// diagonalization.
    pub fn validate(&self) -> Result<()> {
        self.model.validate().map_err(reclass)?;
        self.fit.validate().map_err(reclass)?;
        let c = &self.correlator;
        if c.i >= self.model.sites || c.j >= self.model.sites {
            return Err(Error::config("correlator site index out of range"));
        }
        if !(c.dt > 0.0 && c.t_max > c.dt) {
            return Err(Error::config("correlator grid needs 0 < dt < t_max"));
        }
        if !(c.eta > 0.0) {
            return Err(Error::config("broadening eta must be positive"));
        }
        if !(c.fit_window > 0.0 && c.fit_window < 1.0) {
            return Err(Error::config("tail fit_window must lie in (0, 1)"));
        }
        match &self.source {
            SourceSpec::Gibbs { beta, kind, .. } => {
                if !(*beta >= 0.0) {
                    return Err(Error::config("beta must be nonnegative"));
                }
                if let ThermalKind::Canonical { n } = kind {
                    if *n > 2 * self.model.sites {
                        return Err(Error::config("canonical N exceeds 2L"));
                    }
                }
                if matches!(kind, ThermalKind::Microcanonical { .. }) {
                    return Err(Error::config(
                        "use source type \"window\" for microcanonical states",
                    ));
                }
            }
            SourceSpec::Window {
                e_min,
                e_max,
                total_n,
            } => {
                if !(e_min < e_max) {
                    return Err(Error::config("window needs e_min < e_max"));
                }
                if *total_n > 2 * self.model.sites {
                    return Err(Error::config("window total_n exceeds 2L"));
                }
            }
            SourceSpec::Ramp {
                schedule,
                tau,
                tol,
                parities,
            } => {
                schedule.validate().map_err(reclass)?;
                if !(*tau >= 0.0) {
                    return Err(Error::config("ramp tau must be nonnegative"));
                }
                if !(*tol > 0.0) {
                    return Err(Error::config("ramp tol must be positive"));
                }
                if parities.is_empty() {
                    return Err(Error::config("ramp needs at least one parity"));
                }
                if self.model.sites % 2 != 0 {
                    return Err(Error::config("Néel ramp requires even L"));
                }
            }
            SourceSpec::Eigenstate { sector, .. } => {
                if sector.0 > self.model.sites || sector.1 > self.model.sites {
                    return Err(Error::config("eigenstate sector out of range"));
                }
            }
        }
        match (self.experiment, &self.source) {
            (ExperimentKind::Mega, SourceSpec::Ramp { .. }) => {}
            (ExperimentKind::Mega, _) => {
                return Err(Error::config("the mega experiment requires a ramp source"));
            }
            (ExperimentKind::GibbsFit, SourceSpec::Gibbs { .. })
            | (ExperimentKind::GibbsFit, SourceSpec::Window { .. }) => {}
            (ExperimentKind::GibbsFit, _) => {
                return Err(Error::config("gibbs_fit requires a gibbs or window source"));
            }
            (
                ExperimentKind::TraceDistance,
                SourceSpec::Gibbs {
                    kind: ThermalKind::GrandCanonical,
                    ..
                },
            ) => {
                return Err(Error::config(
                    "trace_distance needs a fixed particle number; \
                     use a canonical gibbs, window, ramp, or eigenstate source",
                ));
            }
            _ => {}
        }
        if self.experiment == ExperimentKind::Ldos && c.i != c.j {
            return Err(Error::config("ldos requires correlator i == j"));
        }
        for &(nu, nd) in &self.compute.sectors {
            if nu > self.model.sites || nd > self.model.sites {
                return Err(Error::config(format!(
                    "sector ({nu}, {nd}) out of range for L={}",
                    self.model.sites
                )));
            }
        }
        Ok(())
    }
}

/// Pre-compute validation failures are configuration errors (exit code 2).
fn reclass(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Config(m),
        other => other,
    }
}
