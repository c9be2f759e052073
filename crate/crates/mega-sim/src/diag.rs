//! Density-matrix diagnostics: partial trace over sites, trace distance,
//! ETH scatter tables, and mixed-source expectation values.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corr::CorrSource;
use crate::eig::FullSpectrum;
use crate::ensemble::DiagonalSource;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{build_observable, ObservableKind, SparseOperator};

/// Contiguous site range `[start, start + len)`, both spins per site.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemSpec {
    pub start: usize,
    pub len: usize,
}

impl SubsystemSpec {
    pub fn validate(&self, sites: usize) -> Result<()> {
        if self.len == 0 || self.start + self.len > sites {
            return Err(Error::domain(format!(
                "subsystem [{}, {}) does not fit {sites} sites",
                self.start,
                self.start + self.len
            )));
        }
        if self.len > 6 {
            return Err(Error::resource(format!(
                "subsystem of {} sites needs a {}-dimensional density matrix; \
                 the cap is 6 sites",
                self.len,
                4usize.pow(self.len as u32)
            )));
        }
        Ok(())
    }
}

/// Dense Hermitian density matrix over the occupation basis of a site
/// range. Basis index: `sub_up | (sub_dn << len)`.
#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub sub: SubsystemSpec,
    pub matrix: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|k| self.matrix[[k, k]].re).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        let mut asym = 0.0f64;
        for r in 0..n {
            for c in 0..=r {
                asym = asym.max((self.matrix[[r, c]] - self.matrix[[c, r]].conj()).norm());
            }
        }
        if asym > 1e-10 {
            return Err(Error::numeric(format!(
                "density matrix not Hermitian: asymmetry {asym:.3e}"
            )));
        }
        if (self.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::numeric(format!(
                "density matrix trace {} deviates from 1",
                self.trace()
            )));
        }
        let (vals, _) = linalg::eigh(self.matrix.view());
        if vals[0] < -1e-10 {
            return Err(Error::numeric(format!(
                "density matrix has negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(())
    }

    pub fn purity(&self) -> f64 {
        let n = self.dim();
        let mut p = 0.0;
        for r in 0..n {
            for c in 0..n {
                p += (self.matrix[[r, c]] * self.matrix[[c, r]]).re;
            }
        }
        p
    }
}

/// Parity of the permutation that moves the occupied subsystem orbitals in
/// front of the occupied environment orbitals, in the global ordering
/// (all up orbitals by site, then all down orbitals by site).
fn reorder_sign(up: u32, dn: u32, sub: SubsystemSpec) -> i8 {
    let window = ((1u32 << sub.len) - 1) << sub.start;
    let env_up = up & !window;
    let env_dn = dn & !window;
    let mut parity = 0u32;
    // up-spin subsystem orbitals: only env up orbitals at lower sites precede
    let mut rest = up & window;
    while rest != 0 {
        let s = rest.trailing_zeros();
        parity += (env_up & ((1u32 << s) - 1)).count_ones();
        rest &= rest - 1;
    }
    // down-spin subsystem orbitals: all env up orbitals precede, plus env
    // down orbitals at lower sites
    let mut rest = dn & window;
    while rest != 0 {
        let s = rest.trailing_zeros();
        parity += env_up.count_ones() + (env_dn & ((1u32 << s) - 1)).count_ones();
        rest &= rest - 1;
    }
    if parity % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Partial trace of one sector-confined pure state, accumulated into `rho`
/// with mixture weight `w`.
fn accumulate_ptrace(
    rho: &mut Array2<Complex64>,
    amps: &Array1<Complex64>,
    basis: &crate::fock::SectorBasis,
    sub: SubsystemSpec,
    w: f64,
) {
    use std::collections::HashMap;
    let window = ((1u32 << sub.len) - 1) << sub.start;
    // group signed amplitudes by environment configuration
    let mut groups: HashMap<(u32, u32), Vec<(usize, Complex64)>> = HashMap::new();
    for (pos, amp) in amps.iter().enumerate() {
        if amp.norm_sqr() < 1e-30 {
            continue;
        }
        let state = basis.state(pos);
        let sub_up = (state.up & window) >> sub.start;
        let sub_dn = (state.dn & window) >> sub.start;
        let idx = (sub_up | (sub_dn << sub.len)) as usize;
        let sign = f64::from(reorder_sign(state.up, state.dn, sub));
        groups
            .entry((state.up & !window, state.dn & !window))
            .or_default()
            .push((idx, amp * sign));
    }
    for members in groups.values() {
        for &(p, a) in members {
            for &(q, b) in members {
                rho[[p, q]] += a * b.conj() * w;
            }
        }
    }
}

/// Partial trace of a mixed source over the complement of `sub`.
pub fn reduced_density_matrix(
    source: &CorrSource,
    spectra: &FullSpectrum,
    sub: SubsystemSpec,
) -> Result<DensityMatrix> {
    sub.validate(spectra.params.sites)?;
    let dim = 4usize.pow(sub.len as u32);
    let mut rho = Array2::<Complex64>::zeros((dim, dim));
    match source {
        CorrSource::Pure(p) => {
            let spec = spectra.get(p.sector)?;
            accumulate_ptrace(&mut rho, &p.amplitudes, &spec.basis, sub, 1.0);
        }
        CorrSource::Ensemble(e) => {
            for (w, p) in &e.entries {
                if *w == 0.0 {
                    continue;
                }
                let spec = spectra.get(p.sector)?;
                accumulate_ptrace(&mut rho, &p.amplitudes, &spec.basis, sub, *w);
            }
        }
        CorrSource::Gibbs(g) => {
            let d = DiagonalSource::from_gibbs(g, spectra, 0.0)?;
            return reduced_from_diagonal(&d, spectra, sub);
        }
        CorrSource::Diagonal(d) => {
            return reduced_from_diagonal(d, spectra, sub);
        }
    }
    finish_density(rho, sub)
}

fn reduced_from_diagonal(
    d: &DiagonalSource,
    spectra: &FullSpectrum,
    sub: SubsystemSpec,
) -> Result<DensityMatrix> {
    let dim = 4usize.pow(sub.len as u32);
    let partials: Vec<Array2<Complex64>> = d
        .components
        .par_iter()
        .map(|c| {
            let spec = spectra.get(c.sector).expect("sector checked upstream");
            let amps = c.amplitudes(spec);
            let mut rho = Array2::<Complex64>::zeros((dim, dim));
            accumulate_ptrace(&mut rho, &amps, &spec.basis, sub, c.weight);
            rho
        })
        .collect();
    let mut rho = Array2::<Complex64>::zeros((dim, dim));
    for p in partials {
        rho += &p;
    }
    finish_density(rho, sub)
}

/// Assert particle-number block diagonality, clean it up, and validate.
fn finish_density(mut rho: Array2<Complex64>, sub: SubsystemSpec) -> Result<DensityMatrix> {
    let dim = rho.nrows();
    let k = sub.len;
    let number = |idx: usize| -> u32 {
        let up = (idx as u32) & ((1 << k) - 1);
        let dn = (idx as u32) >> k;
        up.count_ones() + dn.count_ones()
    };
    let mut worst = 0.0f64;
    for r in 0..dim {
        for c in 0..dim {
            if number(r) != number(c) {
                worst = worst.max(rho[[r, c]].norm());
                rho[[r, c]] = Complex64::default();
            }
        }
    }
    if worst > 1e-10 {
        return Err(Error::numeric(format!(
            "reduced state not block-diagonal in subsystem particle number \
             (off-block element {worst:.3e}); source does not conserve N"
        )));
    }
    let dm = DensityMatrix { sub, matrix: rho };
    dm.validate()?;
    Ok(dm)
}

/// `D(ρ, ρ′) = ½ tr |ρ − ρ′|`.
pub fn trace_distance(a: &DensityMatrix, b: &DensityMatrix) -> Result<f64> {
    if a.sub != b.sub {
        return Err(Error::domain(
            "density matrices live on different subsystems",
        ));
    }
    let diff = &a.matrix - &b.matrix;
    let (vals, _) = linalg::eigh(diff.view());
    Ok(0.5 * vals.iter().map(|v| v.abs()).sum::<f64>())
}

/// One eigenstate row of the ETH scatter table.
#[derive(Clone, Debug, Serialize)]
pub struct EthRow {
    pub sector: (usize, usize),
    pub index: usize,
    pub energy: f64,
    pub values: Vec<f64>,
}

/// Diagonal matrix elements of the observables over all eigenstates of the
/// selected sectors. Within a degenerate block every row reports the
/// block-averaged (basis-independent) diagonal.
pub fn eth_scatter(
    spectra: &FullSpectrum,
    sectors: &[(usize, usize)],
    observables: &[ObservableKind],
) -> Result<Vec<EthRow>> {
    let mut rows = Vec::new();
    for &label in sectors {
        let spec = spectra.get(label)?;
        let ops: Vec<SparseOperator> = observables
            .iter()
            .map(|k| build_observable(k, &spec.basis))
            .collect::<Result<_>>()?;
        let blocks = spec.degenerate_blocks();
        let diagonals: Vec<Vec<f64>> = blocks
            .par_iter()
            .map(|block| {
                // block-averaged diagonal per observable
                ops.iter()
                    .map(|op| {
                        block
                            .clone()
                            .map(|n| op.expectation(spec.eigvec(n).view()).re)
                            .sum::<f64>()
                            / block.len() as f64
                    })
                    .collect()
            })
            .collect();
        for (block, vals) in blocks.iter().zip(diagonals.iter()) {
            for n in block.clone() {
                rows.push(EthRow {
                    sector: label,
                    index: n,
                    energy: spec.energies[n],
                    values: vals.clone(),
                });
            }
        }
    }
    Ok(rows)
}

/// Mixture expectation value of a Hermitian observable.
pub fn expectation(
    source: &CorrSource,
    spectra: &FullSpectrum,
    kind: &ObservableKind,
) -> Result<f64> {
    let mut acc = Complex64::default();
    match source {
        CorrSource::Pure(p) => {
            let spec = spectra.get(p.sector)?;
            let op = build_observable(kind, &spec.basis)?;
            acc = op.expectation(p.amplitudes.view());
        }
        CorrSource::Ensemble(e) => {
            for (w, p) in &e.entries {
                let spec = spectra.get(p.sector)?;
                let op = build_observable(kind, &spec.basis)?;
                acc += op.expectation(p.amplitudes.view()) * *w;
            }
        }
        CorrSource::Gibbs(g) => {
            let d = DiagonalSource::from_gibbs(g, spectra, 0.0)?;
            return expectation(&CorrSource::Diagonal(&d), spectra, kind);
        }
        CorrSource::Diagonal(d) => {
            let mut sectors: Vec<(usize, usize)> = d.components.iter().map(|c| c.sector).collect();
            sectors.sort_unstable();
            sectors.dedup();
            for sector in sectors {
                let spec = spectra.get(sector)?;
                let op = build_observable(kind, &spec.basis)?;
                // collect in order, reduce sequentially: keeps runs bit-exact
                let partials: Vec<Complex64> = d
                    .components
                    .par_iter()
                    .filter(|c| c.sector == sector)
                    .map(|c| op.expectation(c.amplitudes(spec).view()) * c.weight)
                    .collect();
                acc += partials.iter().sum::<Complex64>();
            }
        }
    }
    if acc.im.abs() > 1e-10 {
        return Err(Error::numeric(format!(
            "expectation of a Hermitian observable came out complex: {acc}"
        )));
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::{full_spectrum, sectors_all, SpectrumOptions};
    use crate::ensemble::{
        dephase, gibbs, neel_state, NeelParity, PureState, ThermalKind, ThermalParams,
    };
    use crate::model::{Boundary, ModelParams};

    fn hubbard(sites: usize, u: f64, boundary: Boundary) -> ModelParams {
        ModelParams {
            sites,
            t: 1.0,
            u,
            t_prime: 0.0,
            u_prime: 0.0,
            boundary,
        }
    }

    #[test]
    fn full_system_pure_state_is_projector() {
        let p = hubbard(4, 3.0, Boundary::Periodic);
        let spectra = full_spectrum(&p, &[(2, 2)], &SpectrumOptions::default()).unwrap();
        let psi = neel_state(4, NeelParity::UpFirst).unwrap();
        let rho = reduced_density_matrix(
            &CorrSource::Pure(&psi),
            &spectra,
            SubsystemSpec { start: 0, len: 4 },
        )
        .unwrap();
        assert!((rho.purity() - 1.0).abs() < 1e-10);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_reduction_is_pure() {
        let p = hubbard(6, 3.0, Boundary::Periodic);
        let spectra = full_spectrum(&p, &[(3, 3)], &SpectrumOptions::default()).unwrap();
        let psi = neel_state(6, NeelParity::UpFirst).unwrap();
        for (start, len) in [(0, 2), (1, 3), (2, 2)] {
            let rho = reduced_density_matrix(
                &CorrSource::Pure(&psi),
                &spectra,
                SubsystemSpec { start, len },
            )
            .unwrap();
            assert!((rho.purity() - 1.0).abs() < 1e-10, "[{start}, +{len})");
        }
    }

    #[test]
    fn strong_coupling_two_site_one_site_reduction() {
        // L=2 open, U/t=100: one-site reduced state ≈ diag(0, ½, ½, 0)
        let p = hubbard(2, 100.0, Boundary::Open);
        let spectra = full_spectrum(&p, &[(1, 1)], &SpectrumOptions::default()).unwrap();
        let spec = spectra.get((1, 1)).unwrap();
        let ground = PureState::new((1, 1), spec.eigvec(0)).unwrap();
        let rho = reduced_density_matrix(
            &CorrSource::Pure(&ground),
            &spectra,
            SubsystemSpec { start: 0, len: 1 },
        )
        .unwrap();
        // basis order: empty, ↑, ↓, ↑↓
        assert!(rho.matrix[[0, 0]].re < 1e-3);
        assert!((rho.matrix[[1, 1]].re - 0.5).abs() < 1e-3);
        assert!((rho.matrix[[2, 2]].re - 0.5).abs() < 1e-3);
        assert!(rho.matrix[[3, 3]].re < 1e-3);
    }

    #[test]
    fn trace_distance_basics() {
        let p = hubbard(4, 3.0, Boundary::Periodic);
        let spectra = full_spectrum(&p, &[(2, 2)], &SpectrumOptions::default()).unwrap();
        let a = neel_state(4, NeelParity::UpFirst).unwrap();
        let b = neel_state(4, NeelParity::DownFirst).unwrap();
        let sub = SubsystemSpec { start: 0, len: 4 };
        let ra = reduced_density_matrix(&CorrSource::Pure(&a), &spectra, sub).unwrap();
        let rb = reduced_density_matrix(&CorrSource::Pure(&b), &spectra, sub).unwrap();
        assert!(trace_distance(&ra, &ra).unwrap() < 1e-12);
        assert!((trace_distance(&ra, &rb).unwrap() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn trace_distance_classical_diagonals() {
        // commuting diagonal states: D = ½ Σ|p − q|
        let sub = SubsystemSpec { start: 0, len: 1 };
        let mk = |probs: [f64; 4]| {
            let mut m = Array2::<Complex64>::zeros((4, 4));
            for (k, &p) in probs.iter().enumerate() {
                m[[k, k]] = Complex64::from(p);
            }
            DensityMatrix { sub, matrix: m }
        };
        let a = mk([0.4, 0.3, 0.2, 0.1]);
        let b = mk([0.1, 0.2, 0.3, 0.4]);
        let expect = 0.5 * (0.3f64 + 0.1 + 0.1 + 0.3);
        assert!((trace_distance(&a, &b).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn contractivity_spot_check() {
        let p = hubbard(4, 3.0, Boundary::Periodic);
        let spectra = full_spectrum(&p, &sectors_all(4), &SpectrumOptions::default()).unwrap();
        let psi = neel_state(4, NeelParity::UpFirst).unwrap();
        let spec = spectra.get((2, 2)).unwrap();
        let d = dephase(&psi, spec).unwrap();
        let g = gibbs(
            &spectra,
            &ThermalParams {
                beta: 1.0,
                mu: 1.5,
                kind: ThermalKind::GrandCanonical,
            },
        )
        .unwrap();
        let full = SubsystemSpec { start: 0, len: 4 };
        let half = SubsystemSpec { start: 0, len: 2 };
        let da = reduced_density_matrix(&CorrSource::Diagonal(&d), &spectra, full).unwrap();
        let db = reduced_density_matrix(&CorrSource::Gibbs(&g), &spectra, full).unwrap();
        let ha = reduced_density_matrix(&CorrSource::Diagonal(&d), &spectra, half).unwrap();
        let hb = reduced_density_matrix(&CorrSource::Gibbs(&g), &spectra, half).unwrap();
        let d_full = trace_distance(&da, &db).unwrap();
        let d_half = trace_distance(&ha, &hb).unwrap();
        assert!(d_half <= d_full + 1e-12, "{d_half} vs {d_full}");
    }

    #[test]
    fn eth_energy_column_is_exact() {
        let p = hubbard(4, 3.0, Boundary::Periodic);
        let spectra = full_spectrum(&p, &[(2, 2)], &SpectrumOptions::default()).unwrap();
        let rows = eth_scatter(&spectra, &[(2, 2)], &[ObservableKind::TotalNumber]).unwrap();
        let spec = spectra.get((2, 2)).unwrap();
        assert_eq!(rows.len(), spec.dim());
        for row in &rows {
            assert!((row.values[0] - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn atomic_limit_double_occupancy_is_quantized() {
        let p = ModelParams {
            sites: 4,
            t: 0.0,
            u: 5.0,
            t_prime: 0.0,
            u_prime: 0.0,
            boundary: Boundary::Periodic,
        };
        let spectra = full_spectrum(&p, &[(2, 2)], &SpectrumOptions::default()).unwrap();
        let rows = eth_scatter(&spectra, &[(2, 2)], &[ObservableKind::DoubleOccupancyAvg]).unwrap();
        for row in &rows {
            let v = row.values[0] * 4.0; // counts of doubly occupied sites
            assert!((v - v.round()).abs() < 1e-9, "{v}");
        }
    }

    #[test]
    fn expectation_mixed_sources_agree() {
        let p = hubbard(4, 3.0, Boundary::Periodic);
        let spectra = full_spectrum(&p, &[(2, 2)], &SpectrumOptions::default()).unwrap();
        let psi = neel_state(4, NeelParity::UpFirst).unwrap();
        let spec = spectra.get((2, 2)).unwrap();
        let d = dephase(&psi, spec).unwrap();
        // dephasing cannot change the energy (H is diagonal)
        let raw = expectation(
            &CorrSource::Pure(&psi),
            &spectra,
            &ObservableKind::TotalNumber,
        )
        .unwrap();
        let deph = expectation(
            &CorrSource::Diagonal(&d),
            &spectra,
            &ObservableKind::TotalNumber,
        )
        .unwrap();
        assert!((raw - 4.0).abs() < 1e-10);
        assert!((deph - 4.0).abs() < 1e-10);
    }
}
