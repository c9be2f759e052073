//! Effective-temperature extraction from lesser/greater ratios, Gibbs
//! energy matching, and the MEGA convergence loop.

use serde::{Deserialize, Serialize};

use crate::corr::{
    auto_omega_grid, broaden, correlator_pole_pair, Broadening, CorrFamily, CorrSource, PoleList,
    PoleOptions, SpectralSeries,
};
use crate::eig::{sectors_with_n, FullSpectrum};
use crate::ensemble::{PureState, StationaryTag, WeightedEnsemble};
use crate::error::{Error, Result};
use crate::fock::Spin;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    MinMagnitude,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    /// inclusion threshold as a fraction of each branch's max magnitude
    pub epsilon: f64,
    pub weighting: Weighting,
    /// residual cutoff for the MEGA loop
    pub convergence_threshold: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            epsilon: 1e-6,
            weighting: Weighting::MinMagnitude,
            convergence_threshold: 1e-2,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::domain("epsilon must lie in (0, 1)"));
        }
        if !(self.convergence_threshold > 0.0) {
            return Err(Error::domain("convergence threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitMethod {
    GreensGrand,
    DensityCanonical,
}

/// Result of one ratio fit.
#[derive(Clone, Debug, Serialize)]
pub struct ThermalFit {
    pub beta: f64,
    /// None when |beta| < 1e-8 leaves the intercept/beta quotient undefined
    pub mu: Option<f64>,
    /// weighted RMS of the log-ratio fit
    pub residual: f64,
    /// frequencies that passed the magnitude mask
    pub mask: Vec<f64>,
    pub method: FitMethod,
}

/// Lesser/greater pair, either as exact poles or broadened series.
pub enum FitInput<'a> {
    Poles {
        lesser: &'a PoleList,
        greater: &'a PoleList,
    },
    Series {
        lesser: &'a SpectralSeries,
        greater: &'a SpectralSeries,
    },
}

struct RatioPoint {
    omega: f64,
    ratio: f64,
    mag_lesser: f64,
    mag_greater: f64,
}

/// Matched (ω, ratio) points with the sign convention already applied:
/// the returned ratio is e^{−β(ω−μ)} (greens) or e^{−βω} (density) for
/// exact thermal input, i.e. positive.
fn ratio_points(input: &FitInput) -> Result<Vec<RatioPoint>> {
    match input {
        FitInput::Poles { lesser, greater } => {
            if lesser.id.family != greater.id.family {
                return Err(Error::domain("lesser/greater families differ"));
            }
            // bare weights: the ±i prefactors cancel in both conventions
            let mut points = Vec::new();
            let mut g_iter = greater.poles.iter().peekable();
            for &(w, wl) in &lesser.poles {
                while let Some(&&(wg_omega, _)) = g_iter.peek() {
                    if wg_omega < w - 1e-7 {
                        g_iter.next();
                    } else {
                        break;
                    }
                }
                if let Some(&&(wg_omega, wg)) = g_iter.peek() {
                    if (wg_omega - w).abs() <= 1e-7 {
                        points.push(RatioPoint {
                            omega: 0.5 * (w + wg_omega),
                            ratio: wl.re / wg.re,
                            mag_lesser: wl.norm(),
                            mag_greater: wg.norm(),
                        });
                    }
                }
            }
            Ok(points)
        }
        FitInput::Series { lesser, greater } => {
            if lesser.omegas.len() != greater.omegas.len()
                || lesser
                    .omegas
                    .iter()
                    .zip(greater.omegas.iter())
                    .any(|(a, b)| (a - b).abs() > 1e-9)
            {
                return Err(Error::domain("lesser/greater grids differ"));
            }
            // full series values carry the prefactors: −G^</G^> and C^</C^>
            // both reduce to a real positive ratio for thermal input
            let sign = match lesser.id.family {
                CorrFamily::Greens => -1.0,
                CorrFamily::Density => 1.0,
            };
            Ok(lesser
                .omegas
                .iter()
                .zip(lesser.values.iter().zip(greater.values.iter()))
                .map(|(&w, (lv, gv))| RatioPoint {
                    omega: w,
                    ratio: sign * (lv / gv).re,
                    mag_lesser: lv.norm(),
                    mag_greater: gv.norm(),
                })
                .collect())
        }
    }
}

fn masked_points(points: Vec<RatioPoint>, cfg: &FitConfig) -> Result<Vec<RatioPoint>> {
    let max_l = points.iter().map(|p| p.mag_lesser).fold(0.0, f64::max);
    let max_g = points.iter().map(|p| p.mag_greater).fold(0.0, f64::max);
    let kept: Vec<RatioPoint> = points
        .into_iter()
        .filter(|p| p.mag_lesser > cfg.epsilon * max_l && p.mag_greater > cfg.epsilon * max_g)
        .collect();
    if kept.is_empty() {
        return Err(Error::fit("magnitude mask excluded every frequency"));
    }
    if let Some(bad) = kept.iter().find(|p| p.ratio <= 0.0) {
        return Err(Error::fit(format!(
            "nonpositive lesser/greater ratio {:.3e} at ω={:.6}; sign convention \
             violated upstream",
            bad.ratio, bad.omega
        )));
    }
    Ok(kept)
}

fn point_weight(p: &RatioPoint, cfg: &FitConfig) -> f64 {
    match cfg.weighting {
        Weighting::Uniform => 1.0,
        Weighting::MinMagnitude => p.mag_lesser.min(p.mag_greater),
    }
}

/// Weighted linear LS of `ln r(ω) = −β(ω − μ)`; β from the slope, μ from
/// the intercept.
pub fn fit_beta_mu(input: &FitInput, cfg: &FitConfig) -> Result<ThermalFit> {
    cfg.validate()?;
    let points = masked_points(ratio_points(input)?, cfg)?;
    let n = points.len();
    let mut sw = 0.0;
    let (mut sx, mut sy) = (0.0, 0.0);
    for p in &points {
        let w = point_weight(p, cfg);
        sw += w;
        sx += w * p.omega;
        sy += w * p.ratio.ln();
    }
    let (mx, my) = (sx / sw, sy / sw);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for p in &points {
        let w = point_weight(p, cfg);
        sxx += w * (p.omega - mx) * (p.omega - mx);
        sxy += w * (p.omega - mx) * (p.ratio.ln() - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let beta = -slope;
    let mu = if beta.abs() < 1e-8 {
        None
    } else {
        Some(intercept / beta)
    };
    let mut res = 0.0;
    for p in &points {
        let w = point_weight(p, cfg);
        let e = p.ratio.ln() - (intercept + slope * p.omega);
        res += w * e * e;
    }
    let _ = n;
    Ok(ThermalFit {
        beta,
        mu,
        residual: (res / sw).sqrt(),
        mask: points.iter().map(|p| p.omega).collect(),
        method: FitMethod::GreensGrand,
    })
}

/// Weighted LS of `ln r(ω) = −βω` through the origin (canonical, no μ).
pub fn fit_beta_density(input: &FitInput, cfg: &FitConfig) -> Result<ThermalFit> {
    cfg.validate()?;
    let points = masked_points(ratio_points(input)?, cfg)?;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut sw = 0.0;
    for p in &points {
        let w = point_weight(p, cfg);
        sw += w;
        sxx += w * p.omega * p.omega;
        sxy += w * p.omega * p.ratio.ln();
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let beta = -slope;
    let mut res = 0.0;
    for p in &points {
        let w = point_weight(p, cfg);
        let e = p.ratio.ln() - slope * p.omega;
        res += w * e * e;
    }
    Ok(ThermalFit {
        beta,
        mu: None,
        residual: (res / sw).sqrt(),
        mask: points.iter().map(|p| p.omega).collect(),
        method: FitMethod::DensityCanonical,
    })
}

// ---------------------------------------------------------------------------
// energy matching
// ---------------------------------------------------------------------------

pub const BETA_CAP: f64 = 1e6;

#[derive(Copy, Clone, Debug, Serialize)]
pub struct MatchedBeta {
    pub beta: f64,
    /// true when the target energy sits at the ground state and the β cap
    /// was returned
    pub saturated: bool,
}

/// Canonical energy at inverse temperature β over the given eigenvalues.
fn canonical_energy(energies: &[f64], beta: f64) -> f64 {
    let e0 = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut z = 0.0;
    let mut ez = 0.0;
    for &e in energies {
        let w = (-beta * (e - e0)).exp();
        z += w;
        ez += w * e;
    }
    ez / z
}

/// Bisect `Tr(ρ_G(β) H) = e` over the canonical N-particle spectrum.
pub fn energy_matched_beta(
    spectra: &FullSpectrum,
    ensemble_energy: f64,
    n_particles: usize,
) -> Result<MatchedBeta> {
    let labels = sectors_with_n(spectra.params.sites, n_particles);
    let mut energies: Vec<f64> = Vec::new();
    for label in labels {
        energies.extend_from_slice(&spectra.get(label)?.energies);
    }
    if energies.is_empty() {
        return Err(Error::domain("no eigenvalues in the canonical sectors"));
    }
    let e_ground = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let e_uniform = energies.iter().sum::<f64>() / energies.len() as f64;
    let tol = 1e-8;
    if ensemble_energy > e_uniform + tol {
        return Err(Error::domain(format!(
            "target energy {ensemble_energy} exceeds the β=0 mean {e_uniform}"
        )));
    }
    if (ensemble_energy - e_uniform).abs() <= tol {
        return Ok(MatchedBeta {
            beta: 0.0,
            saturated: false,
        });
    }
    if ensemble_energy < e_ground - tol {
        return Err(Error::domain(format!(
            "target energy {ensemble_energy} lies below the ground energy {e_ground}"
        )));
    }
    if canonical_energy(&energies, BETA_CAP) >= ensemble_energy - tol {
        // even the cap cannot reach this far down: saturate
        if (ensemble_energy - e_ground).abs() <= tol
            || canonical_energy(&energies, BETA_CAP) > ensemble_energy
        {
            return Ok(MatchedBeta {
                beta: BETA_CAP,
                saturated: true,
            });
        }
    }
    let (mut lo, mut hi) = (0.0f64, BETA_CAP);
    let mut mid = 0.0;
    for _ in 0..200 {
        mid = 0.5 * (lo + hi);
        let e = canonical_energy(&energies, mid);
        if (e - ensemble_energy).abs() < tol {
            return Ok(MatchedBeta {
                beta: mid,
                saturated: false,
            });
        }
        // E(β) decreases with β
        if e > ensemble_energy {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MatchedBeta {
        beta: mid,
        saturated: false,
    })
}

// ---------------------------------------------------------------------------
// the MEGA loop
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize)]
pub struct MegaIteration {
    pub ensemble_size: usize,
    pub beta: Option<f64>,
    pub mu: Option<f64>,
    pub residual: Option<f64>,
    pub mask_size: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct MegaOutcome {
    pub history: Vec<MegaIteration>,
    pub converged: bool,
    /// uniform ensemble over the states actually used
    pub ensemble: WeightedEnsemble,
}

/// Correlator used inside the loop. The fit runs on broadened series: the
/// dephased MEGA components rarely produce exactly matched lesser/greater
/// pole frequencies, so the pole-path ratio is reserved for Gibbs input.
#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MegaCorrelator {
    pub family: CorrFamily,
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
    #[serde(default)]
    pub broadening: Broadening,
}

/// Steps 1–4 of the procedure: grow the ensemble state by state, dephase,
/// recompute the lesser/greater pair, refit, stop at the residual threshold.
/// Per-iteration fit failures are recorded, not fatal; exhaustion without
/// convergence is a valid (non-converged) outcome.
pub fn mega_run(
    states: &[PureState],
    spectra: &FullSpectrum,
    cfg: &FitConfig,
    corr: &MegaCorrelator,
) -> Result<MegaOutcome> {
    cfg.validate()?;
    if states.is_empty() {
        return Err(Error::domain("MEGA loop needs at least one state"));
    }
    let opts = PoleOptions::default();
    let mut history = Vec::new();
    let mut converged = false;
    let mut used = 0;
    for k in 1..=states.len() {
        used = k;
        let members: Vec<(f64, PureState)> = states[..k]
            .iter()
            .map(|s| (1.0 / k as f64, s.clone()))
            .collect();
        let raw = WeightedEnsemble {
            entries: members,
            stationary: StationaryTag::Raw,
        };
        let diag = crate::ensemble::dephase_ensemble(&raw, spectra)?;
        let source = CorrSource::Diagonal(&diag);
        let record = correlator_pole_pair(
            &source,
            spectra,
            corr.family,
            corr.i,
            corr.j,
            corr.spin,
            &opts,
        )
        .and_then(|(lesser, greater)| {
            let br = corr.broadening;
            let grid = auto_omega_grid(&[&lesser, &greater], br.eta, br.eta / 10.0);
            let ls = broaden(&lesser, &br, &grid)?;
            let gs = broaden(&greater, &br, &grid)?;
            let input = FitInput::Series {
                lesser: &ls,
                greater: &gs,
            };
            match corr.family {
                CorrFamily::Greens => fit_beta_mu(&input, cfg),
                CorrFamily::Density => fit_beta_density(&input, cfg),
            }
        });
        match record {
            Ok(fit) => {
                let done = fit.residual < cfg.convergence_threshold;
                history.push(MegaIteration {
                    ensemble_size: k,
                    beta: Some(fit.beta),
                    mu: fit.mu,
                    residual: Some(fit.residual),
                    mask_size: fit.mask.len(),
                    error: None,
                });
                if done {
                    converged = true;
                    break;
                }
            }
            Err(e) => history.push(MegaIteration {
                ensemble_size: k,
                beta: None,
                mu: None,
                residual: None,
                mask_size: 0,
                error: Some(e.to_string()),
            }),
        }
    }
    let final_members: Vec<(f64, PureState)> = states[..used]
        .iter()
        .map(|s| (1.0 / used as f64, s.clone()))
        .collect();
    Ok(MegaOutcome {
        history,
        converged,
        ensemble: WeightedEnsemble::new(final_members, StationaryTag::Raw)?,
    })
}
