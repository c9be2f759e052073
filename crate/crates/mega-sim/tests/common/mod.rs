//! Shared test fixtures: a dense Kronecker-product construction of the
//! fermion algebra on the full 4^L Hilbert space, built independently of the
//! library's bitmask ladder operators.
//!
//! Mode ordering matches the library's Jordan-Wigner convention: mode
//! `p = site + L·spin` (all up modes first), with mode 0 the least
//! significant bit of the full-space index. A full-space basis index is
//! therefore `up | (dn << L)`.

#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;

use mega_sim::fock::{LadderKind, OrbitalIndex, SectorBasis, Spin};
use mega_sim::model::{bonds, ModelParams, ObservableKind};

pub fn kron(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::<Complex64>::zeros((ar * br, ac * bc));
    for i in 0..ar {
        for j in 0..ac {
            for k in 0..br {
                for l in 0..bc {
                    out[[i * br + k, j * bc + l]] = a[[i, j]] * b[[k, l]];
                }
            }
        }
    }
    out
}

fn identity2() -> Array2<Complex64> {
    Array2::eye(2)
}

fn pauli_z() -> Array2<Complex64> {
    let mut z = Array2::zeros((2, 2));
    z[[0, 0]] = Complex64::new(1.0, 0.0);
    z[[1, 1]] = Complex64::new(-1.0, 0.0);
    z
}

/// Annihilator on one mode: |1> -> |0>.
fn lower2() -> Array2<Complex64> {
    let mut a = Array2::zeros((2, 2));
    a[[0, 1]] = Complex64::new(1.0, 0.0);
    a
}

/// Mode index of an orbital under the global Jordan-Wigner order.
pub fn mode(l: usize, orb: OrbitalIndex) -> usize {
    orb.site
        + match orb.spin {
            Spin::Up => 0,
            Spin::Down => l,
        }
}

/// Full-space annihilation operator for one mode, as a Kronecker chain with
/// the Jordan-Wigner string on the lower (earlier) modes.
pub fn annihilator(l: usize, orb: OrbitalIndex) -> Array2<Complex64> {
    let p = mode(l, orb);
    let n_modes = 2 * l;
    // kron(A, B) indexes B fastest, so build from the most significant mode
    // (n_modes-1) down to mode 0.
    let mut out = Array2::<Complex64>::eye(1);
    for q in (0..n_modes).rev() {
        let factor = if q == p {
            lower2()
        } else if q < p {
            pauli_z()
        } else {
            identity2()
        };
        out = kron(&out, &factor);
    }
    out
}

pub fn creator(l: usize, orb: OrbitalIndex) -> Array2<Complex64> {
    adjoint(&annihilator(l, orb))
}

pub fn ladder_full(l: usize, orb: OrbitalIndex, kind: LadderKind) -> Array2<Complex64> {
    match kind {
        LadderKind::Annihilate => annihilator(l, orb),
        LadderKind::Create => creator(l, orb),
    }
}

pub fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Full-space index of a sector basis state.
pub fn full_index(l: usize, up: u32, dn: u32) -> usize {
    (up as usize) | ((dn as usize) << l)
}

/// Restrict a full-space operator to `basis_out` rows and `basis_in`
/// columns using the occupation-number embedding.
pub fn restrict(
    m: &Array2<Complex64>,
    basis_out: &SectorBasis,
    basis_in: &SectorBasis,
) -> Array2<Complex64> {
    let l = basis_in.sites;
    let mut out = Array2::<Complex64>::zeros((basis_out.dim(), basis_in.dim()));
    for (col, s_in) in basis_in.states().iter().enumerate() {
        let fc = full_index(l, s_in.up, s_in.dn);
        for (row, s_out) in basis_out.states().iter().enumerate() {
            let fr = full_index(l, s_out.up, s_out.dn);
            out[[row, col]] = m[[fr, fc]];
        }
    }
    out
}

/// Full-space Hubbard Hamiltonian assembled from the Kronecker ladder
/// operators and the same bond lists the library uses.
pub fn oracle_hamiltonian(params: &ModelParams) -> Array2<Complex64> {
    let l = params.sites;
    let dim = 1usize << (2 * l);
    let mut h = Array2::<Complex64>::zeros((dim, dim));
    let num = |orb: OrbitalIndex| {
        let c = annihilator(l, orb);
        adjoint(&c).dot(&c)
    };
    for spin in [Spin::Up, Spin::Down] {
        for &(i, j) in &bonds(l, params.boundary, 1) {
            let cdag_i = creator(l, OrbitalIndex::new(i, spin));
            let c_j = annihilator(l, OrbitalIndex::new(j, spin));
            let hop = cdag_i.dot(&c_j);
            h = h + (hop.clone() + adjoint(&hop)).mapv(|z| z * -params.t);
        }
    }
    for i in 0..l {
        let d = num(OrbitalIndex::new(i, Spin::Up)).dot(&num(OrbitalIndex::new(i, Spin::Down)));
        h = h + d.mapv(|z| z * params.u);
    }
    if params.t_prime != 0.0 {
        for spin in [Spin::Up, Spin::Down] {
            for &(i, j) in &bonds(l, params.boundary, 2) {
                let cdag_i = creator(l, OrbitalIndex::new(i, spin));
                let c_j = annihilator(l, OrbitalIndex::new(j, spin));
                let hop = cdag_i.dot(&c_j);
                h = h + (hop.clone() + adjoint(&hop)).mapv(|z| z * -params.t_prime);
            }
        }
    }
    if params.u_prime != 0.0 {
        for &(i, j) in &bonds(l, params.boundary, 1) {
            let ni = num(OrbitalIndex::new(i, Spin::Up)) + num(OrbitalIndex::new(i, Spin::Down));
            let nj = num(OrbitalIndex::new(j, Spin::Up)) + num(OrbitalIndex::new(j, Spin::Down));
            h = h + ni.dot(&nj).mapv(|z| z * params.u_prime);
        }
    }
    h
}

/// Full-space observable from the Kronecker ladder operators.
pub fn oracle_observable(kind: &ObservableKind, l: usize) -> Array2<Complex64> {
    let dim = 1usize << (2 * l);
    let num = |orb: OrbitalIndex| {
        let c = annihilator(l, orb);
        adjoint(&c).dot(&c)
    };
    match *kind {
        ObservableKind::DoubleOccupancyAvg => {
            let w = 1.0 / l as f64;
            let mut m = Array2::<Complex64>::zeros((dim, dim));
            for i in 0..l {
                let d =
                    num(OrbitalIndex::new(i, Spin::Up)).dot(&num(OrbitalIndex::new(i, Spin::Down)));
                m = m + d.mapv(|z| z * w);
            }
            m
        }
        ObservableKind::LocalDensity { site, spin } => num(OrbitalIndex::new(site, spin)),
        ObservableKind::TotalNumber => {
            let mut m = Array2::<Complex64>::zeros((dim, dim));
            for i in 0..l {
                for spin in [Spin::Up, Spin::Down] {
                    m = m + num(OrbitalIndex::new(i, spin));
                }
            }
            m
        }
        ObservableKind::MomentumOccupation { k, spin } => {
            let w = 1.0 / l as f64;
            let mut m = Array2::<Complex64>::zeros((dim, dim));
            for j in 0..l {
                let cdag_j = creator(l, OrbitalIndex::new(j, spin));
                for mm in 0..l {
                    let c_m = annihilator(l, OrbitalIndex::new(mm, spin));
                    let phase =
                        2.0 * std::f64::consts::PI * k as f64 * (j as f64 - mm as f64) / l as f64;
                    let scale = Complex64::from_polar(1.0, phase);
                    m = m + cdag_j.dot(&c_m).mapv(|z| scale * (w * z.re));
                }
            }
            m
        }
        ObservableKind::DensityN { site } => {
            num(OrbitalIndex::new(site, Spin::Up)) + num(OrbitalIndex::new(site, Spin::Down))
        }
    }
}
