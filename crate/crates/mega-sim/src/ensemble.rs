//! Ensemble construction: Néel product states, interaction-ramp preparation,
//! Gibbs and microcanonical weights, and stationarization by dephasing or
//! time averaging.

use std::collections::BTreeMap;
use std::ops::Range;

use ndarray::Array1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::eig::{sectors_all, sectors_with_n, FullSpectrum, SectorSpectrum};
use crate::error::{Error, Result};
use crate::evolve::{evolve_eigenbasis, expm_apply, KrylovOptions};
use crate::fock::{BasisState, SectorBasis};
use crate::model::{build_hamiltonian, ModelParams};

/// Normalized state vector confined to one particle-number sector.
#[derive(Clone, Debug)]
pub struct PureState {
    pub sector: (usize, usize),
    pub amplitudes: Array1<Complex64>,
}

impl PureState {
    pub fn new(sector: (usize, usize), amplitudes: Array1<Complex64>) -> Result<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "pure state norm {norm} deviates from 1 beyond 1e-10"
            )));
        }
        Ok(PureState { sector, amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StationaryTag {
    Raw,
    Dephased,
    TimeAveraged,
}

/// Convex mixture of pure states with a stationarity provenance flag.
#[derive(Clone, Debug)]
pub struct WeightedEnsemble {
    pub entries: Vec<(f64, PureState)>,
    pub stationary: StationaryTag,
}

impl WeightedEnsemble {
    pub fn new(entries: Vec<(f64, PureState)>, stationary: StationaryTag) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("ensemble must contain at least one state"));
        }
        if entries.iter().any(|(w, _)| *w < 0.0) {
            return Err(Error::domain("ensemble weights must be nonnegative"));
        }
        let sum: f64 = entries.iter().map(|(w, _)| w).sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::domain(format!(
                "ensemble weights sum to {sum}, expected 1"
            )));
        }
        Ok(WeightedEnsemble {
            entries,
            stationary,
        })
    }

    pub fn uniform(states: Vec<PureState>) -> Result<Self> {
        let w = 1.0 / states.len() as f64;
        WeightedEnsemble::new(
            states.into_iter().map(|s| (w, s)).collect(),
            StationaryTag::Raw,
        )
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ThermalKind {
    Canonical { n: usize },
    GrandCanonical,
    Microcanonical { e_min: f64, e_max: f64 },
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalParams {
    pub beta: f64,
    #[serde(default)]
    pub mu: f64,
    pub kind: ThermalKind,
}

impl ThermalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta >= 0.0) {
            return Err(Error::domain("beta must be nonnegative"));
        }
        if let ThermalKind::Microcanonical { e_min, e_max } = self.kind {
            if !(e_min < e_max) {
                return Err(Error::domain(
                    "microcanonical window requires e_min < e_max",
                ));
            }
        }
        Ok(())
    }
}

/// Energy-diagonal weights over eigenstates, sector by sector.
#[derive(Clone, Debug)]
pub struct GibbsState {
    pub weights: BTreeMap<(usize, usize), Vec<f64>>,
    pub params: ThermalParams,
}

impl GibbsState {
    pub fn weight_sum(&self) -> f64 {
        self.weights.values().flatten().sum()
    }

    /// `Tr(rho H)` from the stored eigenvalues.
    pub fn energy(&self, spectra: &FullSpectrum) -> Result<f64> {
        let mut e = 0.0;
        for (label, w) in &self.weights {
            let spec = spectra.get(*label)?;
            e += w
                .iter()
                .zip(spec.energies.iter())
                .map(|(wi, ei)| wi * ei)
                .sum::<f64>();
        }
        Ok(e)
    }

    pub fn mean_particle_number(&self) -> f64 {
        self.weights
            .iter()
            .map(|((nu, nd), w)| (nu + nd) as f64 * w.iter().sum::<f64>())
            .sum()
    }
}

/// Boltzmann weights over the listed spectra with a max-shift for stability.
pub fn gibbs(spectra: &FullSpectrum, tp: &ThermalParams) -> Result<GibbsState> {
    tp.validate()?;
    let sites = spectra.params.sites;
    let labels: Vec<(usize, usize)> = match tp.kind {
        ThermalKind::Canonical { n } => sectors_with_n(sites, n),
        ThermalKind::GrandCanonical => sectors_all(sites),
        ThermalKind::Microcanonical { .. } => {
            return Err(Error::domain(
                "use microcanonical_window for microcanonical weights",
            ));
        }
    };
    // exponent x_n = -beta (E_n - mu N); canonical ignores mu (fixed N)
    let mu = match tp.kind {
        ThermalKind::GrandCanonical => tp.mu,
        _ => 0.0,
    };
    let mut x_max = f64::NEG_INFINITY;
    for &label in &labels {
        let spec = spectra.get(label)?;
        let n = (label.0 + label.1) as f64;
        for &e in &spec.energies {
            x_max = x_max.max(-tp.beta * (e - mu * n));
        }
    }
    let mut weights = BTreeMap::new();
    let mut z = 0.0;
    for &label in &labels {
        let spec = spectra.get(label)?;
        let n = (label.0 + label.1) as f64;
        let w: Vec<f64> = spec
            .energies
            .iter()
            .map(|&e| (-tp.beta * (e - mu * n) - x_max).exp())
            .collect();
        z += w.iter().sum::<f64>();
        weights.insert(label, w);
    }
    for w in weights.values_mut() {
        for wi in w.iter_mut() {
            *wi /= z;
        }
    }
    Ok(GibbsState {
        weights,
        params: *tp,
    })
}

/// Uniform weights over all eigenstates with `e_min <= E <= e_max` in the
/// selected sectors.
pub fn microcanonical_window(
    spectra: &FullSpectrum,
    e_min: f64,
    e_max: f64,
    sectors: &[(usize, usize)],
) -> Result<GibbsState> {
    if !(e_min < e_max) {
        return Err(Error::domain(
            "microcanonical window requires e_min < e_max",
        ));
    }
    let mut count = 0usize;
    let mut nearest_below = f64::NEG_INFINITY;
    let mut nearest_above = f64::INFINITY;
    for &label in sectors {
        let spec = spectra.get(label)?;
        for &e in &spec.energies {
            if e >= e_min && e <= e_max {
                count += 1;
            } else if e < e_min {
                nearest_below = nearest_below.max(e);
            } else {
                nearest_above = nearest_above.min(e);
            }
        }
    }
    if count == 0 {
        return Err(Error::domain(format!(
            "window [{e_min}, {e_max}] contains no eigenvalues; \
             nearest below: {nearest_below}, nearest above: {nearest_above}"
        )));
    }
    let w = 1.0 / count as f64;
    let mut weights = BTreeMap::new();
    for &label in sectors {
        let spec = spectra.get(label)?;
        let v: Vec<f64> = spec
            .energies
            .iter()
            .map(|&e| if e >= e_min && e <= e_max { w } else { 0.0 })
            .collect();
        weights.insert(label, v);
    }
    Ok(GibbsState {
        weights,
        params: ThermalParams {
            beta: 0.0,
            mu: 0.0,
            kind: ThermalKind::Microcanonical { e_min, e_max },
        },
    })
}

// ---------------------------------------------------------------------------
// stationary sources
// ---------------------------------------------------------------------------

/// One stationary pure component: a unit vector supported on a single
/// (near-)degenerate eigenvalue block, carried with its mixture weight.
#[derive(Clone, Debug)]
pub struct SourceComponent {
    pub sector: (usize, usize),
    pub energy: f64,
    pub weight: f64,
    pub block: Range<usize>,
    /// coefficients over the eigenstates in `block`, unit norm
    pub coeffs: Vec<Complex64>,
}

impl SourceComponent {
    /// Materialize the component in the occupation basis of its sector.
    pub fn amplitudes(&self, spectrum: &SectorSpectrum) -> Array1<Complex64> {
        let mut coeffs = Array1::<Complex64>::zeros(spectrum.dim());
        for (i, c) in self.block.clone().zip(self.coeffs.iter()) {
            coeffs[i] = *c;
        }
        spectrum.synthesize(coeffs.view())
    }
}

/// A stationary mixture written as weighted pure components, the common
/// currency for correlator generation. Gibbs states, dephased pure states,
/// and dephased ensembles all reduce to this form.
#[derive(Clone, Debug)]
pub struct DiagonalSource {
    pub components: Vec<SourceComponent>,
}

impl DiagonalSource {
    pub fn weight_sum(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Elementary eigenstate components of a Gibbs/microcanonical state.
    /// Weights at or below `cutoff` are dropped (pass 0.0 to keep all
    /// nonzero weights).
    pub fn from_gibbs(g: &GibbsState, spectra: &FullSpectrum, cutoff: f64) -> Result<Self> {
        let mut components = Vec::new();
        for (label, w) in &g.weights {
            let spec = spectra.get(*label)?;
            for (n, &wn) in w.iter().enumerate() {
                if wn > cutoff && wn > 0.0 {
                    components.push(SourceComponent {
                        sector: *label,
                        energy: spec.energies[n],
                        weight: wn,
                        block: n..n + 1,
                        coeffs: vec![Complex64::new(1.0, 0.0)],
                    });
                }
            }
        }
        Ok(DiagonalSource { components })
    }
}

/// Project a pure state onto its energy-diagonal part. Within a degenerate
/// block the full projection is kept as one stationary component.
pub fn dephase(psi: &PureState, spectrum: &SectorSpectrum) -> Result<DiagonalSource> {
    if psi.sector != spectrum.label() {
        return Err(Error::domain("state and spectrum sectors differ"));
    }
    if psi.dim() != spectrum.dim() {
        return Err(Error::domain("state and spectrum dimensions differ"));
    }
    let coeffs = spectrum.project(psi.amplitudes.view());
    let mut components = Vec::new();
    for block in spectrum.degenerate_blocks() {
        let w: f64 = block.clone().map(|i| coeffs[i].norm_sqr()).sum();
        if w <= 1e-14 {
            continue;
        }
        let norm = w.sqrt();
        let c: Vec<Complex64> = block.clone().map(|i| coeffs[i] / norm).collect();
        let energy = spectrum.energies[block.start];
        components.push(SourceComponent {
            sector: psi.sector,
            energy,
            weight: w,
            block,
            coeffs: c,
        });
    }
    Ok(DiagonalSource { components })
}

/// Dephase every member of an ensemble and pool the weighted components.
pub fn dephase_ensemble(ens: &WeightedEnsemble, spectra: &FullSpectrum) -> Result<DiagonalSource> {
    let mut components = Vec::new();
    for (w, psi) in &ens.entries {
        if *w == 0.0 {
            continue;
        }
        let spec = spectra.get(psi.sector)?;
        let mut d = dephase(psi, spec)?;
        for c in &mut d.components {
            c.weight *= w;
        }
        components.extend(d.components);
    }
    Ok(DiagonalSource { components })
}

/// Uniform finite-time average `{e^{-iH kT/n}|psi>}` plus the worst residual
/// off-diagonal magnitude left by the averaging comb.
pub fn time_average(
    psi: &PureState,
    spectrum: &SectorSpectrum,
    window: f64,
    samples: usize,
) -> Result<(WeightedEnsemble, f64)> {
    if !(window > 0.0) {
        return Err(Error::domain("time-average window must be positive"));
    }
    if samples < 2 {
        return Err(Error::domain("time averaging needs at least 2 samples"));
    }
    if psi.sector != spectrum.label() {
        return Err(Error::domain("state and spectrum sectors differ"));
    }
    let mut states = Vec::with_capacity(samples);
    for k in 0..samples {
        let t = window * k as f64 / samples as f64;
        let amps = evolve_eigenbasis(spectrum, psi.amplitudes.view(), t);
        states.push(PureState::new(psi.sector, amps)?);
    }
    // residual: max_{n != m} |a_n a_m| |(1/n) sum_k e^{-i(E_n - E_m) k T/n}|
    let coeffs = spectrum.project(psi.amplitudes.view());
    let support: Vec<(usize, f64)> = coeffs
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > 1e-12)
        .map(|(i, c)| (i, c.norm()))
        .collect();
    let dt = window / samples as f64;
    let mut residual = 0.0f64;
    for (a, &(n, an)) in support.iter().enumerate() {
        for &(m, am) in support.iter().skip(a + 1) {
            let de = spectrum.energies[n] - spectrum.energies[m];
            let comb = comb_magnitude(de * dt, samples);
            residual = residual.max(an * am * comb);
        }
    }
    let ens = WeightedEnsemble::new(
        states
            .into_iter()
            .map(|s| (1.0 / samples as f64, s))
            .collect(),
        StationaryTag::TimeAveraged,
    )?;
    Ok((ens, residual))
}

/// `|(1/n) sum_{k<n} e^{-i phi k}|` via the closed-form geometric sum.
fn comb_magnitude(phi: f64, n: usize) -> f64 {
    let half = 0.5 * phi;
    let denom = half.sin();
    if denom.abs() < 1e-12 {
        return 1.0;
    }
    ((half * n as f64).sin() / (n as f64 * denom)).abs()
}

// ---------------------------------------------------------------------------
// Néel state and ramp preparation
// ---------------------------------------------------------------------------

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeelParity {
    UpFirst,
    DownFirst,
}

/// Antiferromagnetic product state at half filling.
pub fn neel_state(sites: usize, parity: NeelParity) -> Result<PureState> {
    if sites == 0 || sites % 2 != 0 {
        return Err(Error::domain("Néel state requires even, nonzero L"));
    }
    let mut up = 0u32;
    let mut dn = 0u32;
    for i in 0..sites {
        let up_site = match parity {
            NeelParity::UpFirst => i % 2 == 0,
            NeelParity::DownFirst => i % 2 == 1,
        };
        if up_site {
            up |= 1 << i;
        } else {
            dn |= 1 << i;
        }
    }
    let basis = SectorBasis::build(sites, sites / 2, sites / 2)?;
    let pos = basis
        .position(BasisState::new(up, dn))
        .expect("Néel state lies in the half-filled sector");
    let mut amps = Array1::<Complex64>::zeros(basis.dim());
    amps[pos] = Complex64::new(1.0, 0.0);
    PureState::new(basis.label(), amps)
}

/// Exponential interaction schedule `U(t) = amplitude e^{-t/decay} + offset`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RampSchedule {
    pub amplitude: f64,
    pub decay: f64,
    pub offset: f64,
}

impl RampSchedule {
    /// The schedule used throughout: `U(t) = 490 e^{-t/5} + 10`.
    pub fn default_quench() -> Self {
        RampSchedule {
            amplitude: 490.0,
            decay: 5.0,
            offset: 10.0,
        }
    }

    pub fn constant(u: f64) -> Self {
        RampSchedule {
            amplitude: 0.0,
            decay: 1.0,
            offset: u,
        }
    }

    pub fn u_at(&self, t: f64) -> f64 {
        self.amplitude * (-t / self.decay).exp() + self.offset
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.decay > 0.0) {
            return Err(Error::domain("ramp decay time must be positive"));
        }
        Ok(())
    }
}

/// Midpoint-frozen exponential stepping of the time-ordered evolution, with
/// global step halving until the final state stops moving.
pub fn ramp_prepare(
    initial: &PureState,
    base: &ModelParams,
    schedule: &RampSchedule,
    tau: f64,
    tol: f64,
) -> Result<PureState> {
    if !(tau >= 0.0) {
        return Err(Error::domain("ramp duration must be nonnegative"));
    }
    schedule.validate()?;
    if tau == 0.0 {
        return Ok(initial.clone());
    }
    let basis = SectorBasis::build(base.sites, initial.sector.0, initial.sector.1)?;
    if basis.dim() != initial.dim() {
        return Err(Error::domain(
            "initial state does not match the sector basis",
        ));
    }
    let kry = KrylovOptions::default();
    let evolve_n = |n: usize| -> Result<Array1<Complex64>> {
        let dt = tau / n as f64;
        let mut psi = initial.amplitudes.clone();
        for k in 0..n {
            let u_mid = schedule.u_at((k as f64 + 0.5) * dt);
            let h = build_hamiltonian(&base.with_u(u_mid), &basis)?;
            psi = expm_apply(&h, psi.view(), dt, &kry)?;
            let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::numeric(format!(
                    "ramp step lost unitarity: norm {norm}"
                )));
            }
            psi.mapv_inplace(|z| z / Complex64::from(norm));
        }
        Ok(psi)
    };
    let mut n = (4.0 * tau).ceil().max(4.0) as usize;
    let mut prev = evolve_n(n)?;
    let mut last_dist = f64::INFINITY;
    for _ in 0..20 {
        n *= 2;
        let cur = evolve_n(n)?;
        let dist: f64 = cur
            .iter()
            .zip(prev.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        if dist < tol {
            return PureState::new(initial.sector, cur);
        }
        last_dist = dist;
        prev = cur;
    }
    Err(Error::numeric(format!(
        "ramp stepping did not converge after 20 halvings; last change {last_dist:.3e}"
    )))
}

/// Combine prepared states into a MEGA ensemble.
pub enum MegaWeighting {
    Uniform,
    /// `w_i ∝ e^{-beta_hat <psi_i|H|psi_i>}`
    Boltzmann {
        beta_hat: f64,
    },
}

pub fn mega_ensemble(
    states: Vec<PureState>,
    weighting: MegaWeighting,
    spectra: &FullSpectrum,
) -> Result<WeightedEnsemble> {
    if states.is_empty() {
        return Err(Error::domain("MEGA ensemble needs at least one state"));
    }
    let raw: Vec<f64> = match weighting {
        MegaWeighting::Uniform => vec![1.0; states.len()],
        MegaWeighting::Boltzmann { beta_hat } => {
            let mut energies = Vec::with_capacity(states.len());
            for s in &states {
                let spec = spectra.get(s.sector)?;
                let coeffs = spec.project(s.amplitudes.view());
                let e: f64 = coeffs
                    .iter()
                    .zip(spec.energies.iter())
                    .map(|(c, &en)| c.norm_sqr() * en)
                    .sum();
                energies.push(e);
            }
            let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
            energies
                .iter()
                .map(|&e| (-beta_hat * (e - e_min)).exp())
                .collect()
        }
    };
    let z: f64 = raw.iter().sum();
    WeightedEnsemble::new(
        states
            .into_iter()
            .zip(raw.iter())
            .map(|(s, &w)| (w / z, s))
            .collect(),
        StationaryTag::Raw,
    )
}
