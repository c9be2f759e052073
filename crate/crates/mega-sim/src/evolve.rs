//! Real-time propagation `e^{-iHt}|psi>`.
//!
//! Small sectors go through the eigenbasis; large sectors use a Lanczos
//! (Krylov) approximation of the matrix exponential with adaptive
//! substepping, so the ramp preparation never needs eigenvectors of the
//! intermediate Hamiltonians.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;

use crate::eig::SectorSpectrum;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::SparseOperator;

#[derive(Clone, Copy, Debug)]
pub struct KrylovOptions {
    /// Target 2-norm error per unit time.
    pub tol: f64,
    /// Largest Krylov dimension per substep.
    pub max_dim: usize,
    /// Substep-halving budget before giving up.
    pub max_halvings: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        KrylovOptions {
            tol: 1e-10,
            max_dim: 48,
            max_halvings: 30,
        }
    }
}

/// Evolve through a precomputed eigenbasis: exact up to the decomposition.
pub fn evolve_eigenbasis(
    spectrum: &SectorSpectrum,
    psi: ArrayView1<Complex64>,
    time: f64,
) -> Array1<Complex64> {
    let mut coeffs = spectrum.project(psi);
    for (c, &e) in coeffs.iter_mut().zip(spectrum.energies.iter()) {
        *c *= Complex64::from_polar(1.0, -e * time);
    }
    spectrum.synthesize(coeffs.view())
}

/// `e^{-iHt}|psi>` by Lanczos projection onto a Krylov subspace.
///
/// `h` must be Hermitian; this is not re-checked here.
pub fn expm_apply(
    h: &SparseOperator,
    psi: ArrayView1<Complex64>,
    time: f64,
    opts: &KrylovOptions,
) -> Result<Array1<Complex64>> {
    if psi.len() != h.dim_in {
        return Err(Error::domain("state dimension does not match operator"));
    }
    if time == 0.0 {
        return Ok(psi.to_owned());
    }
    let mut state = psi.to_owned();
    let mut remaining = time;
    let mut dt = time;
    let mut halvings = 0usize;
    while remaining.abs() > 1e-15 * time.abs() {
        if dt.abs() > remaining.abs() {
            dt = remaining;
        }
        match krylov_step(h, state.view(), dt, opts) {
            Ok(next) => {
                state = next;
                remaining -= dt;
            }
            Err(StepError::NotConverged) => {
                dt *= 0.5;
                halvings += 1;
                if halvings > opts.max_halvings {
                    return Err(Error::numeric(
                        "Krylov propagator failed to converge after substep halving",
                    ));
                }
            }
        }
    }
    Ok(state)
}

enum StepError {
    NotConverged,
}

/// One Lanczos substep with full reorthogonalization.
fn krylov_step(
    h: &SparseOperator,
    psi: ArrayView1<Complex64>,
    dt: f64,
    opts: &KrylovOptions,
) -> std::result::Result<Array1<Complex64>, StepError> {
    let norm0 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if norm0 == 0.0 {
        return Ok(psi.to_owned());
    }
    let dim = psi.len();
    let m_max = opts.max_dim.min(dim);
    let mut basis: Vec<Array1<Complex64>> = Vec::with_capacity(m_max);
    basis.push(psi.to_owned() / Complex64::from(norm0));
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();

    for j in 0..m_max {
        let mut w = h.matvec(basis[j].view());
        let alpha = basis[j]
            .iter()
            .zip(w.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            .re;
        alphas.push(alpha);
        // full reorthogonalization keeps the tridiagonal honest for long dt
        for v in &basis {
            let overlap: Complex64 = v.iter().zip(w.iter()).map(|(a, b)| a.conj() * b).sum();
            w.zip_mut_with(v, |wi, vi| *wi -= overlap * vi);
        }
        let beta = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let exp_small = expm_tridiag(&alphas, &betas, dt);
        // Saad-style a-posteriori estimate from the last Krylov component
        let est = beta * exp_small[exp_small.len() - 1].norm() * dt.abs().max(1.0);
        if beta < 1e-14 || est < opts.tol * dt.abs().max(1e-3) {
            let mut out = Array1::<Complex64>::zeros(dim);
            for (c, v) in exp_small.iter().zip(basis.iter()) {
                out.zip_mut_with(v, |oi, vi| *oi += c * vi * norm0);
            }
            return Ok(out);
        }
        if j + 1 < m_max {
            betas.push(beta);
            basis.push(w / Complex64::from(beta));
        }
    }
    Err(StepError::NotConverged)
}

/// `exp(-i dt T) e_1` for the real symmetric tridiagonal built from
/// `alphas`/`betas`.
fn expm_tridiag(alphas: &[f64], betas: &[f64], dt: f64) -> Vec<Complex64> {
    let m = alphas.len();
    let mut t = Array2::<Complex64>::zeros((m, m));
    for (i, &a) in alphas.iter().enumerate() {
        t[[i, i]] = Complex64::from(a);
    }
    for (i, &b) in betas.iter().enumerate() {
        t[[i, i + 1]] = Complex64::from(b);
        t[[i + 1, i]] = Complex64::from(b);
    }
    let (vals, vecs) = linalg::eigh(t.view());
    let mut out = vec![Complex64::default(); m];
    for k in 0..m {
        let phase = Complex64::from_polar(1.0, -vals[k] * dt);
        let amp = vecs[[0, k]].conj() * phase;
        for i in 0..m {
            out[i] += vecs[[i, k]] * amp;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eig::diagonalize_sector;
    use crate::fock::SectorBasis;
    use crate::model::{build_hamiltonian, Boundary, ModelParams};

    fn setup(l: usize, u: f64, n_up: usize, n_dn: usize) -> (SparseOperator, SectorBasis) {
        let p = ModelParams {
            sites: l,
            t: 1.0,
            u,
            t_prime: 0.0,
            u_prime: 0.0,
            boundary: Boundary::Periodic,
        };
        let basis = SectorBasis::build(l, n_up, n_dn).unwrap();
        let h = build_hamiltonian(&p, &basis).unwrap();
        (h, basis)
    }

    fn random_state(dim: usize) -> Array1<Complex64> {
        let mut v = Array1::<Complex64>::zeros(dim);
        for i in 0..dim {
            v[i] = Complex64::new((1.3 * i as f64 + 0.4).sin(), (0.7 * i as f64).cos());
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        v / Complex64::from(n)
    }

    #[test]
    fn krylov_matches_eigenbasis() {
        let (h, basis) = setup(4, 6.0, 2, 2);
        let spec = diagonalize_sector(&h, &basis).unwrap();
        let psi = random_state(basis.dim());
        for time in [0.1, 1.0, 7.5] {
            let exact = evolve_eigenbasis(&spec, psi.view(), time);
            let kry = expm_apply(&h, psi.view(), time, &KrylovOptions::default()).unwrap();
            let err: f64 = exact
                .iter()
                .zip(kry.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(err < 1e-8, "t={time}: err {err}");
        }
    }

    #[test]
    fn norm_preserved() {
        let (h, basis) = setup(5, 3.0, 2, 1);
        let psi = random_state(basis.dim());
        let out = expm_apply(&h, psi.view(), 12.0, &KrylovOptions::default()).unwrap();
        let n = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((n - 1.0).abs() < 1e-9, "norm {n}");
    }

    #[test]
    fn energy_conserved() {
        let (h, basis) = setup(4, 8.0, 2, 2);
        let psi = random_state(basis.dim());
        let e0 = h.expectation(psi.view()).re;
        let out = expm_apply(&h, psi.view(), 5.0, &KrylovOptions::default()).unwrap();
        let e1 = h.expectation(out.view()).re;
        assert!((e0 - e1).abs() < 1e-8, "{e0} vs {e1}");
    }

    #[test]
    fn zero_time_is_identity() {
        let (h, basis) = setup(3, 2.0, 1, 1);
        let psi = random_state(basis.dim());
        let out = expm_apply(&h, psi.view(), 0.0, &KrylovOptions::default()).unwrap();
        let err: f64 = psi
            .iter()
            .zip(out.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert_eq!(err, 0.0);
    }
}
