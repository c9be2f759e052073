//! Lesser/greater correlators for fermion operators and site densities:
//! exact pole (Lehmann) representation for stationary sources, time-domain
//! evaluation, kernel broadening, LDOS, and the time→frequency pipeline with
//! tail fitting.
//!
//! Conventions. Pole weights are stored bare (no 2π, no ±i prefactor), so
//! the diagonal greens anticommutator sum rule reads Σ(lesser) + Σ(greater)
//! = 1. Lesser poles sit at ω = E_source − E_intermediate, greater poles at
//! ω = E_intermediate − E_source, for both correlator families. Time
//! reconstruction carries e^{−iωt} for greens and e^{+iωt} for density
//! poles, and the matching frequency transform is (1/2π)∫dt e^{+iωt}f(t)
//! (greens) and (1/2π)∫dt e^{−iωt}f(t) (density).

use ndarray::Array1;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eig::{FullSpectrum, SectorSpectrum};
use crate::ensemble::{
    dephase, dephase_ensemble, DiagonalSource, GibbsState, PureState, StationaryTag,
    WeightedEnsemble,
};
use crate::error::{Error, Result};
use crate::evolve::evolve_eigenbasis;
use crate::fock::{LadderKind, OrbitalIndex, Spin};
use crate::model::{build_observable, ladder_matrix, ObservableKind, SparseOperator};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrFamily {
    /// single-particle ladder correlators G
    Greens,
    /// density-density correlators C
    Density,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Lesser,
    Greater,
    /// assembled by [`retarded_from_parts`] only
    Retarded,
}

/// Which correlator: family × branch × site pair × spin.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelatorId {
    pub family: CorrFamily,
    pub branch: Branch,
    pub i: usize,
    pub j: usize,
    pub spin: Spin,
}

impl CorrelatorId {
    pub fn diagonal(&self) -> bool {
        self.i == self.j
    }

    /// ±i prefactor restored at reconstruction/broadening time.
    pub fn prefactor(&self) -> Complex64 {
        match (self.family, self.branch) {
            (CorrFamily::Greens, Branch::Lesser) => Complex64::new(0.0, 1.0),
            (CorrFamily::Greens, Branch::Greater) => Complex64::new(0.0, -1.0),
            (CorrFamily::Density, _) => Complex64::new(0.0, -1.0),
            (_, Branch::Retarded) => Complex64::new(1.0, 0.0),
        }
    }

    /// Sign s in the time phase e^{s·iωt} of a pole at ω.
    pub fn time_sign(&self) -> f64 {
        match self.family {
            CorrFamily::Greens => -1.0,
            CorrFamily::Density => 1.0,
        }
    }
}

/// Lehmann poles: frequencies and bare weights.
#[derive(Clone, Debug)]
pub struct PoleList {
    pub id: CorrelatorId,
    /// sorted by frequency after merging
    pub poles: Vec<(f64, Complex64)>,
}

impl PoleList {
    pub fn total_weight(&self) -> Complex64 {
        self.poles.iter().map(|(_, w)| w).sum()
    }

    /// Reconstruct the time signal prefactor·Σ w e^{s·iωt}.
    pub fn evaluate_time(&self, t: f64) -> Complex64 {
        let s = self.id.time_sign();
        let sum: Complex64 = self
            .poles
            .iter()
            .map(|&(omega, w)| w * Complex64::from_polar(1.0, s * omega * t))
            .sum();
        self.id.prefactor() * sum
    }
}

/// Time samples on a uniform grid.
#[derive(Clone, Debug)]
pub struct CorrelatorSeries {
    pub id: CorrelatorId,
    pub times: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl CorrelatorSeries {
    fn check_uniform(times: &[f64]) -> Result<f64> {
        if times.len() < 2 {
            return Err(Error::domain("time grid needs at least 2 points"));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::domain("time grid must be strictly increasing"));
        }
        for w in times.windows(2) {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt {
                return Err(Error::domain("time grid must be uniform"));
            }
        }
        Ok(dt)
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }
}

/// Uniform grid 0, dt, …, ≤ t_max.
pub fn time_grid(dt: f64, t_max: f64) -> Vec<f64> {
    let n = (t_max / dt).round() as usize;
    (0..=n).map(|k| k as f64 * dt).collect()
}

/// Uniform frequency grid covering [lo, hi].
pub fn omega_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).ceil() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

/// Grid spanning all poles padded by 5η.
pub fn auto_omega_grid(pole_lists: &[&PoleList], eta: f64, step: f64) -> Vec<f64> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for pl in pole_lists {
        for &(omega, _) in &pl.poles {
            lo = lo.min(omega);
            hi = hi.max(omega);
        }
    }
    if lo > hi {
        lo = 0.0;
        hi = 0.0;
    }
    omega_grid(lo - 5.0 * eta, hi + 5.0 * eta, step)
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Gaussian,
    Lorentzian,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Broadening {
    pub eta: f64,
    pub kernel: Kernel,
}

impl Default for Broadening {
    fn default() -> Self {
        Broadening {
            eta: 0.1,
            kernel: Kernel::Gaussian,
        }
    }
}

impl Broadening {
    fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) {
            return Err(Error::domain("broadening width must be positive"));
        }
        Ok(())
    }

    /// Unit-normalized kernel value at displacement `x`.
    pub fn kernel_at(&self, x: f64) -> f64 {
        match self.kernel {
            Kernel::Gaussian => {
                let s = self.eta;
                (-(x * x) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt())
            }
            Kernel::Lorentzian => self.eta / (std::f64::consts::PI * (x * x + self.eta * self.eta)),
        }
    }
}

/// Frequency samples with the broadening that produced them.
#[derive(Clone, Debug)]
pub struct SpectralSeries {
    pub id: CorrelatorId,
    pub omegas: Vec<f64>,
    pub values: Vec<Complex64>,
    pub broadening: Broadening,
}

impl SpectralSeries {
    /// Trapezoid quadrature of the (complex) values over ω.
    pub fn integral(&self) -> Complex64 {
        trapezoid(&self.omegas, &self.values)
    }
}

fn trapezoid(x: &[f64], y: &[Complex64]) -> Complex64 {
    let mut acc = Complex64::default();
    for k in 1..x.len() {
        acc += (y[k] + y[k - 1]) * (0.5 * (x[k] - x[k - 1]));
    }
    acc
}

// ---------------------------------------------------------------------------
// sources
// ---------------------------------------------------------------------------

/// Source state for correlator evaluation.
#[derive(Clone, Debug)]
pub enum CorrSource<'a> {
    Pure(&'a PureState),
    Ensemble(&'a WeightedEnsemble),
    Gibbs(&'a GibbsState),
    Diagonal(&'a DiagonalSource),
}

#[derive(Copy, Clone, Debug)]
pub struct PoleOptions {
    /// poles closer than this in ω are merged
    pub merge_tol: f64,
    /// source components with weight ≤ cutoff are dropped
    pub weight_cutoff: f64,
    /// accept non-stationary (raw) sources by dephasing them on the fly
    pub allow_raw: bool,
}

impl Default for PoleOptions {
    fn default() -> Self {
        PoleOptions {
            merge_tol: 1e-9,
            weight_cutoff: 0.0,
            allow_raw: false,
        }
    }
}

/// Reduce any accepted source to stationary diagonal components.
fn stationarize(
    source: &CorrSource,
    spectra: &FullSpectrum,
    opts: &PoleOptions,
) -> Result<DiagonalSource> {
    match source {
        CorrSource::Gibbs(g) => DiagonalSource::from_gibbs(g, spectra, opts.weight_cutoff),
        CorrSource::Diagonal(d) => Ok((*d).clone()),
        CorrSource::Ensemble(e) => {
            if e.stationary == StationaryTag::Raw && !opts.allow_raw {
                return Err(Error::domain(
                    "raw ensemble is not stationary; dephase it first or set allow_raw",
                ));
            }
            dephase_ensemble(e, spectra)
        }
        CorrSource::Pure(p) => {
            if !opts.allow_raw {
                return Err(Error::domain(
                    "raw pure state is not stationary; dephase it first or set allow_raw",
                ));
            }
            dephase(p, spectra.get(p.sector)?)
        }
    }
}

/// Sector reached by applying the branch operator to `sector`, or None when
/// the action annihilates every state (band edge).
fn greens_target(
    sector: (usize, usize),
    sites: usize,
    spin: Spin,
    branch: Branch,
) -> Option<(usize, usize)> {
    let (nu, nd) = sector;
    match (branch, spin) {
        (Branch::Lesser, Spin::Up) => nu.checked_sub(1).map(|n| (n, nd)),
        (Branch::Lesser, Spin::Down) => nd.checked_sub(1).map(|n| (nu, n)),
        (Branch::Greater, Spin::Up) => (nu < sites).then_some((nu + 1, nd)),
        (Branch::Greater, Spin::Down) => (nd < sites).then_some((nu, nd + 1)),
        (Branch::Retarded, _) => None,
    }
}

/// `⟨E_m| O |φ⟩` for every eigenstate m of the target spectrum.
fn op_in_eigenbasis(
    op: &SparseOperator,
    target: &SectorSpectrum,
    amps: &Array1<Complex64>,
) -> Array1<Complex64> {
    let applied = op.matvec(amps.view());
    target.project(applied.view())
}

/// Exact Lehmann poles of a stationary source.
pub fn correlator_poles(
    source: &CorrSource,
    spectra: &FullSpectrum,
    id: &CorrelatorId,
    opts: &PoleOptions,
) -> Result<PoleList> {
    if id.branch == Branch::Retarded {
        return Err(Error::domain(
            "retarded correlators are assembled from lesser and greater parts",
        ));
    }
    let sites = spectra.params.sites;
    if id.i >= sites || id.j >= sites {
        return Err(Error::domain("site index out of range"));
    }
    let diag = stationarize(source, spectra, opts)?;
    let mut raw: Vec<(f64, Complex64)> = Vec::new();
    // group components per sector so operators are built once
    let mut sectors: Vec<(usize, usize)> = diag.components.iter().map(|c| c.sector).collect();
    sectors.sort_unstable();
    sectors.dedup();
    for sector in sectors {
        let spec = spectra.get(sector)?;
        let basis = &spec.basis;
        let components: Vec<_> = diag
            .components
            .iter()
            .filter(|c| c.sector == sector && c.weight > opts.weight_cutoff)
            .collect();
        if components.is_empty() {
            continue;
        }
        match id.family {
            CorrFamily::Greens => {
                let Some(target_label) = greens_target(sector, sites, id.spin, id.branch) else {
                    continue; // operator annihilates the whole sector
                };
                let target = spectra.get(target_label).map_err(|_| {
                    Error::domain(format!(
                        "greens correlator from sector ({}, {}) needs sector ({}, {}) \
                         in the spectrum",
                        sector.0, sector.1, target_label.0, target_label.1
                    ))
                })?;
                let kind = match id.branch {
                    Branch::Lesser => LadderKind::Annihilate,
                    _ => LadderKind::Create,
                };
                let op_i =
                    ladder_matrix(basis, &target.basis, OrbitalIndex::new(id.i, id.spin), kind)?;
                let op_j = if id.i == id.j {
                    None
                } else {
                    Some(ladder_matrix(
                        basis,
                        &target.basis,
                        OrbitalIndex::new(id.j, id.spin),
                        kind,
                    )?)
                };
                let contributions: Vec<Vec<(f64, Complex64)>> = components
                    .par_iter()
                    .map(|c| {
                        let amps = c.amplitudes(spec);
                        let u_i = op_in_eigenbasis(&op_i, target, &amps);
                        let u_j = match &op_j {
                            Some(op) => op_in_eigenbasis(op, target, &amps),
                            None => u_i.clone(),
                        };
                        let mut local = Vec::new();
                        for m in 0..target.dim() {
                            // lesser: w ⟨φ|c†_j|m⟩⟨m|c_i|φ⟩ at ω = E_φ − E_m
                            // greater: w ⟨φ|c_i|m⟩⟨m|c†_j|φ⟩ at ω = E_m − E_φ
                            let weight = match id.branch {
                                Branch::Lesser => u_j[m].conj() * u_i[m],
                                _ => u_i[m].conj() * u_j[m],
                            } * c.weight;
                            if weight.norm() <= 1e-16 {
                                continue;
                            }
                            let omega = match id.branch {
                                Branch::Lesser => c.energy - target.energies[m],
                                _ => target.energies[m] - c.energy,
                            };
                            local.push((omega, weight));
                        }
                        local
                    })
                    .collect();
                raw.extend(contributions.into_iter().flatten());
            }
            CorrFamily::Density => {
                let n_i = build_observable(
                    &ObservableKind::LocalDensity {
                        site: id.i,
                        spin: id.spin,
                    },
                    basis,
                )?;
                let n_j = if id.i == id.j {
                    None
                } else {
                    Some(build_observable(
                        &ObservableKind::LocalDensity {
                            site: id.j,
                            spin: id.spin,
                        },
                        basis,
                    )?)
                };
                let contributions: Vec<Vec<(f64, Complex64)>> = components
                    .par_iter()
                    .map(|c| {
                        let amps = c.amplitudes(spec);
                        let v_i = op_in_eigenbasis(&n_i, spec, &amps);
                        let v_j = match &n_j {
                            Some(op) => op_in_eigenbasis(op, spec, &amps),
                            None => v_i.clone(),
                        };
                        let mut local = Vec::new();
                        for m in 0..spec.dim() {
                            // lesser: w ⟨φ|n_i|m⟩⟨m|n_j|φ⟩ at ω = E_φ − E_m
                            // greater: w ⟨φ|n_j|m⟩⟨m|n_i|φ⟩ at ω = E_m − E_φ
                            let weight = match id.branch {
                                Branch::Lesser => v_i[m].conj() * v_j[m],
                                _ => v_j[m].conj() * v_i[m],
                            } * c.weight;
                            if weight.norm() <= 1e-16 {
                                continue;
                            }
                            let omega = match id.branch {
                                Branch::Lesser => c.energy - spec.energies[m],
                                _ => spec.energies[m] - c.energy,
                            };
                            local.push((omega, weight));
                        }
                        local
                    })
                    .collect();
                raw.extend(contributions.into_iter().flatten());
            }
        }
    }
    let poles = merge_poles(raw, opts.merge_tol);
    Ok(PoleList { id: *id, poles })
}

/// Sort by frequency and combine clusters closer than `tol`.
fn merge_poles(mut raw: Vec<(f64, Complex64)>, tol: f64) -> Vec<(f64, Complex64)> {
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut out: Vec<(f64, Complex64)> = Vec::new();
    let mut cluster_start = f64::NEG_INFINITY;
    for (omega, w) in raw {
        match out.last_mut() {
            Some(last) if omega - cluster_start <= tol => {
                // weight-magnitude-weighted mean frequency
                let wa = last.1.norm();
                let wb = w.norm();
                if wa + wb > 0.0 {
                    last.0 = (last.0 * wa + omega * wb) / (wa + wb);
                }
                last.1 += w;
            }
            _ => {
                cluster_start = omega;
                out.push((omega, w));
            }
        }
    }
    out.retain(|(_, w)| w.norm() > 1e-16);
    out
}

// ---------------------------------------------------------------------------
// time domain
// ---------------------------------------------------------------------------

/// Evaluate the correlator on a time grid.
///
/// Stationary sources go through their Lehmann components; raw pure states
/// and raw ensembles are evolved two-time (cross terms included).
pub fn correlator_time(
    source: &CorrSource,
    spectra: &FullSpectrum,
    id: &CorrelatorId,
    times: &[f64],
) -> Result<CorrelatorSeries> {
    CorrelatorSeries::check_uniform(times)?;
    if id.branch == Branch::Retarded {
        return Err(Error::domain(
            "retarded correlators are assembled from lesser and greater parts",
        ));
    }
    let values = match source {
        CorrSource::Pure(p) => two_time_values(p, spectra, id, times)?,
        CorrSource::Ensemble(e) => {
            let mut acc = vec![Complex64::default(); times.len()];
            for (w, p) in &e.entries {
                if *w == 0.0 {
                    continue;
                }
                let v = two_time_values(p, spectra, id, times)?;
                for (a, b) in acc.iter_mut().zip(v.iter()) {
                    *a += b * *w;
                }
            }
            acc
        }
        _ => {
            let opts = PoleOptions {
                merge_tol: 0.0,
                ..Default::default()
            };
            let poles = correlator_poles(source, spectra, id, &opts)?;
            times.par_iter().map(|&t| poles.evaluate_time(t)).collect()
        }
    };
    Ok(CorrelatorSeries {
        id: *id,
        times: times.to_vec(),
        values,
    })
}

/// Two-time evaluation of one pure state via eigenbasis phase evolution.
fn two_time_values(
    psi: &PureState,
    spectra: &FullSpectrum,
    id: &CorrelatorId,
    times: &[f64],
) -> Result<Vec<Complex64>> {
    let sites = spectra.params.sites;
    let spec = spectra.get(psi.sector)?;
    let pref = id.prefactor();
    match id.family {
        CorrFamily::Greens => {
            let Some(target_label) = greens_target(psi.sector, sites, id.spin, id.branch) else {
                return Ok(vec![Complex64::default(); times.len()]);
            };
            let target = spectra.get(target_label)?;
            let kind = match id.branch {
                Branch::Lesser => LadderKind::Annihilate,
                _ => LadderKind::Create,
            };
            let op_i = ladder_matrix(
                &spec.basis,
                &target.basis,
                OrbitalIndex::new(id.i, id.spin),
                kind,
            )?;
            let op_j = ladder_matrix(
                &spec.basis,
                &target.basis,
                OrbitalIndex::new(id.j, id.spin),
                kind,
            )?;
            match id.branch {
                // G^< = i ⟨evolve(c_j ψ, t) | c_i evolve(ψ, t)⟩
                Branch::Lesser => {
                    let w0 = op_j.matvec(psi.amplitudes.view());
                    Ok(times
                        .par_iter()
                        .map(|&t| {
                            let x = evolve_eigenbasis(spec, psi.amplitudes.view(), t);
                            let ox = op_i.matvec(x.view());
                            let wt = evolve_eigenbasis(target, w0.view(), t);
                            pref * inner(&wt, &ox)
                        })
                        .collect())
                }
                // G^> = −i ⟨evolve(ψ, t) | c_i evolve(c†_j ψ, t)⟩ with c_i = op_i†
                _ => {
                    let w0 = op_j.matvec(psi.amplitudes.view());
                    Ok(times
                        .par_iter()
                        .map(|&t| {
                            let x = evolve_eigenbasis(spec, psi.amplitudes.view(), t);
                            let wt = evolve_eigenbasis(target, w0.view(), t);
                            // ⟨x| c_i |wt⟩ = ⟨op_i x | wt⟩
                            let ox = op_i.matvec(x.view());
                            pref * inner(&ox, &wt)
                        })
                        .collect())
                }
            }
        }
        CorrFamily::Density => {
            let n_i = build_observable(
                &ObservableKind::LocalDensity {
                    site: id.i,
                    spin: id.spin,
                },
                &spec.basis,
            )?;
            let n_j = build_observable(
                &ObservableKind::LocalDensity {
                    site: id.j,
                    spin: id.spin,
                },
                &spec.basis,
            )?;
            let w0 = n_j.matvec(psi.amplitudes.view());
            Ok(times
                .par_iter()
                .map(|&t| {
                    let x = evolve_eigenbasis(spec, psi.amplitudes.view(), t);
                    let nx = n_i.matvec(x.view());
                    let wt = evolve_eigenbasis(spec, w0.view(), t);
                    match id.branch {
                        // C^< = −i ⟨evolve(ψ,t) | n_i evolve(n_j ψ, t)⟩
                        Branch::Lesser => pref * inner(&x, &n_i.matvec(wt.view())),
                        // C^> = −i ⟨evolve(n_j ψ, t) | n_i evolve(ψ, t)⟩
                        _ => pref * inner(&wt, &nx),
                    }
                })
                .collect())
        }
    }
}

fn inner(a: &Array1<Complex64>, b: &Array1<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// `G^R(t) = Θ(t)[G^>(t) − G^<(t)]`, with Θ(0) = 1.
pub fn retarded_from_parts(
    greater: &CorrelatorSeries,
    lesser: &CorrelatorSeries,
) -> Result<CorrelatorSeries> {
    if greater.times.len() != lesser.times.len()
        || greater
            .times
            .iter()
            .zip(lesser.times.iter())
            .any(|(a, b)| (a - b).abs() > 1e-12)
    {
        return Err(Error::domain("greater/lesser grids differ"));
    }
    if greater.times[0] < 0.0 {
        return Err(Error::domain("retarded assembly expects t ≥ 0"));
    }
    let values = greater
        .values
        .iter()
        .zip(lesser.values.iter())
        .map(|(g, l)| g - l)
        .collect();
    Ok(CorrelatorSeries {
        id: CorrelatorId {
            branch: Branch::Retarded,
            ..greater.id
        },
        times: greater.times.clone(),
        values,
    })
}

// ---------------------------------------------------------------------------
// frequency domain
// ---------------------------------------------------------------------------

/// Replace each pole δ by a unit-normalized kernel, restoring the ±i
/// prefactor so the result matches the time-path Fourier transform.
pub fn broaden(
    poles: &PoleList,
    broadening: &Broadening,
    omegas: &[f64],
) -> Result<SpectralSeries> {
    broadening.validate()?;
    let pref = poles.id.prefactor();
    let values: Vec<Complex64> = omegas
        .par_iter()
        .map(|&w| {
            let s: Complex64 = poles
                .poles
                .iter()
                .map(|&(wp, weight)| weight * broadening.kernel_at(w - wp))
                .sum();
            pref * s
        })
        .collect();
    Ok(SpectralSeries {
        id: poles.id,
        omegas: omegas.to_vec(),
        values,
        broadening: *broadening,
    })
}

/// `A_σ(ω) = −(1/π) Im G^R`: the broadened sum of bare greater and lesser
/// spectral weights. Diagonal (i = j) only.
pub fn ldos(
    greater: &PoleList,
    lesser: &PoleList,
    broadening: &Broadening,
    omegas: &[f64],
) -> Result<SpectralSeries> {
    broadening.validate()?;
    for pl in [greater, lesser] {
        if pl.id.family != CorrFamily::Greens || !pl.id.diagonal() {
            return Err(Error::domain("LDOS needs diagonal greens pole lists"));
        }
    }
    if greater.id.branch != Branch::Greater || lesser.id.branch != Branch::Lesser {
        return Err(Error::domain(
            "LDOS expects (greater, lesser) in that order",
        ));
    }
    let values: Vec<Complex64> = omegas
        .par_iter()
        .map(|&w| {
            let mut a = 0.0;
            for pl in [greater, lesser] {
                for &(wp, weight) in &pl.poles {
                    a += weight.re * broadening.kernel_at(w - wp);
                }
            }
            Complex64::new(a, 0.0)
        })
        .collect();
    Ok(SpectralSeries {
        id: CorrelatorId {
            branch: Branch::Retarded,
            ..greater.id
        },
        omegas: omegas.to_vec(),
        values,
        broadening: *broadening,
    })
}

/// Mirror a diagonal series to negative times: Im even, Re odd.
pub fn extend_negative_times(series: &CorrelatorSeries) -> Result<CorrelatorSeries> {
    if !series.id.diagonal() {
        return Err(Error::domain(
            "negative-time extension by symmetry needs i = j",
        ));
    }
    if series.times[0] != 0.0 {
        if series.times[0] < 0.0 {
            // mirror of mirror: restrict to t ≥ 0 and re-extend below
            let start = series
                .times
                .iter()
                .position(|&t| t >= 0.0)
                .ok_or_else(|| Error::domain("series has no t ≥ 0 samples"))?;
            let half = CorrelatorSeries {
                id: series.id,
                times: series.times[start..].to_vec(),
                values: series.values[start..].to_vec(),
            };
            return extend_negative_times(&half);
        }
        return Err(Error::domain("series must start at t = 0"));
    }
    if series.values[0].re.abs() > 1e-8 {
        return Err(Error::domain(format!(
            "Re at t=0 is {:.3e}; symmetry extension invalid",
            series.values[0].re
        )));
    }
    let n = series.times.len();
    let mut times = Vec::with_capacity(2 * n - 1);
    let mut values = Vec::with_capacity(2 * n - 1);
    for k in (1..n).rev() {
        times.push(-series.times[k]);
        values.push(Complex64::new(-series.values[k].re, series.values[k].im));
    }
    times.push(0.0);
    values.push(Complex64::new(0.0, series.values[0].im));
    for k in 1..n {
        times.push(series.times[k]);
        values.push(series.values[k]);
    }
    Ok(CorrelatorSeries {
        id: series.id,
        times,
        values,
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailModel {
    Exponential,
    PowerLaw,
}

#[derive(Copy, Clone, Debug)]
pub struct TailFitOptions {
    pub model: TailModel,
    /// trailing fraction of the positive-time samples used for the fit
    pub fit_window: f64,
    /// optional Gaussian damping e^{−η²t²/2}, matching Gaussian broadening
    pub damping: Option<f64>,
}

impl Default for TailFitOptions {
    fn default() -> Self {
        TailFitOptions {
            model: TailModel::Exponential,
            fit_window: 0.25,
            damping: None,
        }
    }
}

/// Discrete Fourier transform of a symmetric series with an analytic tail
/// continuation fitted to the trailing envelope.
pub fn fourier_tail_fit(
    series: &CorrelatorSeries,
    opts: &TailFitOptions,
    omegas: &[f64],
) -> Result<SpectralSeries> {
    let dt = CorrelatorSeries::check_uniform(&series.times)?;
    let t_max = *series.times.last().unwrap();
    if (series.times[0] + t_max).abs() > 1e-9 {
        return Err(Error::domain(
            "tail-fit transform expects a series extended to negative times",
        ));
    }
    if !(opts.fit_window > 0.0 && opts.fit_window < 1.0) {
        return Err(Error::domain("fit_window must lie in (0, 1)"));
    }
    // apply damping up front; tails are fit on what is actually transformed
    let damped: Vec<Complex64> = series
        .values
        .iter()
        .zip(series.times.iter())
        .map(|(v, &t)| match opts.damping {
            Some(eta) => v * (-0.5 * eta * eta * t * t).exp(),
            None => *v,
        })
        .collect();
    let peak = damped.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let s = -series.id.time_sign(); // transform kernel e^{−s·iωt} → e^{s_ft iωt}
    if peak < 1e-14 {
        return Ok(SpectralSeries {
            id: series.id,
            omegas: omegas.to_vec(),
            values: vec![Complex64::default(); omegas.len()],
            broadening: effective_resolution(opts, f64::INFINITY),
        });
    }

    // envelope fit on the trailing window of positive times
    let pos_start = series.times.iter().position(|&t| t >= 0.0).unwrap();
    let n_pos = series.times.len() - pos_start;
    let n_fit = ((n_pos as f64) * opts.fit_window).ceil() as usize;
    let fit_start = series.times.len() - n_fit.max(3).min(n_pos - 1);
    let tail = Tail::fit(
        &series.times[fit_start..],
        &damped[fit_start..],
        opts.model,
        peak,
    )?;

    // trapezoid over the sampled range, then the two analytic tails
    let t_end = t_max;
    let f_end = damped[series.times.len() - 1];
    let values: Vec<Complex64> = omegas
        .par_iter()
        .map(|&w| {
            let mut kernel_sum = Complex64::default();
            for (k, (&t, v)) in series.times.iter().zip(damped.iter()).enumerate() {
                let weight = if k == 0 || k == series.times.len() - 1 {
                    0.5
                } else {
                    1.0
                };
                kernel_sum += v * Complex64::from_polar(weight, s * w * t);
            }
            let mut total = kernel_sum * dt;
            let tail_pos = tail.integral(f_end, t_end, s * w, dt);
            // f(−t) = −conj(f(t)) ⇒ the negative tail is −conj of the
            // positive one at the same real ω
            total += tail_pos - tail_pos.conj();
            total / (2.0 * std::f64::consts::PI)
        })
        .collect();
    Ok(SpectralSeries {
        id: series.id,
        omegas: omegas.to_vec(),
        values,
        broadening: effective_resolution(opts, tail.decay_time()),
    })
}

fn effective_resolution(opts: &TailFitOptions, tau: f64) -> Broadening {
    match opts.damping {
        Some(eta) => Broadening {
            eta,
            kernel: Kernel::Gaussian,
        },
        None => Broadening {
            eta: if tau.is_finite() && tau > 0.0 {
                1.0 / tau
            } else {
                0.0
            },
            kernel: Kernel::Lorentzian,
        },
    }
}

/// Fitted tail continuation `f(t>T) ≈ f(T)·env(t)/env(T)·e^{iω₀(t−T)}`.
struct Tail {
    model: TailModel,
    /// exponential decay time, or the power-law exponent
    param: f64,
    /// reference time of the fit window end
    t_ref: f64,
    /// dominant phase velocity over the window
    omega0: f64,
}

impl Tail {
    fn fit(times: &[f64], values: &[Complex64], model: TailModel, peak: f64) -> Result<Tail> {
        let pts: Vec<(f64, f64, f64)> = times
            .iter()
            .zip(values.iter())
            .filter(|(_, v)| v.norm() > 1e-13 * peak)
            .map(|(&t, v)| (t, v.norm().ln(), v.arg()))
            .collect();
        if pts.len() < 3 {
            // tail is numerically zero; nothing to continue
            return Ok(Tail {
                model,
                param: match model {
                    TailModel::Exponential => f64::INFINITY,
                    TailModel::PowerLaw => f64::INFINITY,
                },
                t_ref: *times.last().unwrap(),
                omega0: 0.0,
            });
        }
        // linear LS of ln|v| against t (exponential) or ln t (power law)
        let xs: Vec<f64> = pts
            .iter()
            .map(|&(t, _, _)| match model {
                TailModel::Exponential => t,
                TailModel::PowerLaw => t.max(1e-12).ln(),
            })
            .collect();
        let ys: Vec<f64> = pts.iter().map(|&(_, y, _)| y).collect();
        let slope = linear_slope(&xs, &ys);
        let param = match model {
            TailModel::Exponential => {
                let tau = -1.0 / slope;
                if !(tau > 0.0) {
                    return Err(Error::fit(format!(
                        "tail envelope is not decaying (fitted τ = {tau:.3e}); \
                         finite-size revival — shorten the horizon"
                    )));
                }
                tau
            }
            TailModel::PowerLaw => {
                let p = -slope;
                if !(p > 0.0) {
                    return Err(Error::fit(format!(
                        "tail envelope is not decaying (fitted p = {p:.3e}); \
                         finite-size revival — shorten the horizon"
                    )));
                }
                p
            }
        };
        // dominant phase rate from the unwrapped phase
        let mut phases: Vec<f64> = pts.iter().map(|&(_, _, p)| p).collect();
        for k in 1..phases.len() {
            while phases[k] - phases[k - 1] > std::f64::consts::PI {
                phases[k] -= 2.0 * std::f64::consts::PI;
            }
            while phases[k] - phases[k - 1] < -std::f64::consts::PI {
                phases[k] += 2.0 * std::f64::consts::PI;
            }
        }
        let ts: Vec<f64> = pts.iter().map(|&(t, _, _)| t).collect();
        let omega0 = linear_slope(&ts, &phases);
        Ok(Tail {
            model,
            param,
            t_ref: *times.last().unwrap(),
            omega0,
        })
    }

    fn decay_time(&self) -> f64 {
        match self.model {
            TailModel::Exponential => self.param,
            TailModel::PowerLaw => f64::INFINITY,
        }
    }

    /// `∫_T^∞ f(t) e^{iat} dt` under the fitted continuation, minus the
    /// half-sample the trapezoid already credited at T.
    fn integral(&self, f_end: Complex64, t_end: f64, a: f64, dt: f64) -> Complex64 {
        if f_end.norm() == 0.0 || !self.param.is_finite() && self.model == TailModel::Exponential {
            return Complex64::default();
        }
        let phase_end = Complex64::from_polar(1.0, a * t_end);
        match self.model {
            TailModel::Exponential => {
                if !self.param.is_finite() {
                    return Complex64::default();
                }
                // ∫_0^∞ e^{−u/τ} e^{i(ω₀+a)u} du = 1/(1/τ − i(ω₀+a))
                let denom = Complex64::new(1.0 / self.param, -(self.omega0 + a));
                let full = f_end * phase_end / denom;
                // correct the trapezoid boundary: it counted f(T)·dt/2,
                // while the true contribution of [T, T+dt] sits in the tail
                full - f_end * phase_end * (0.5 * dt)
            }
            TailModel::PowerLaw => {
                // numeric continuation until the envelope is negligible
                let p = self.param;
                let mut acc = Complex64::default();
                let mut t = t_end;
                let rel = |t: f64| (t / self.t_ref).powf(-p);
                let mut steps = 0usize;
                while rel(t) > 1e-12 && steps < 2_000_000 {
                    let t2 = t + dt;
                    let g = |tt: f64| {
                        f_end
                            * rel(tt)
                            * Complex64::from_polar(1.0, self.omega0 * (tt - t_end) + a * tt)
                    };
                    acc += (g(t) + g(t2)) * (0.5 * dt);
                    t = t2;
                    steps += 1;
                }
                acc - f_end * phase_end * (0.5 * dt)
            }
        }
    }
}

fn linear_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|&v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x
        .iter()
        .zip(y.iter())
        .map(|(&a, &b)| (a - mx) * (b - my))
        .sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Lesser + greater poles for one correlator in one call.
pub fn correlator_pole_pair(
    source: &CorrSource,
    spectra: &FullSpectrum,
    family: CorrFamily,
    i: usize,
    j: usize,
    spin: Spin,
    opts: &PoleOptions,
) -> Result<(PoleList, PoleList)> {
    let lesser = correlator_poles(
        source,
        spectra,
        &CorrelatorId {
            family,
            branch: Branch::Lesser,
            i,
            j,
            spin,
        },
        opts,
    )?;
    let greater = correlator_poles(
        source,
        spectra,
        &CorrelatorId {
            family,
            branch: Branch::Greater,
            i,
            j,
            spin,
        },
        opts,
    )?;
    Ok((lesser, greater))
}
