//! Sparse sector-restricted matrices for the Hubbard chain, its
//! integrability-breaking extension, observables, and ladder operators.
//!
//! Assembly walks the Hamiltonian terms in a fixed order (nearest hopping,
//! on-site repulsion, next-nearest hopping, nearest-neighbor repulsion) so
//! that repeated runs and the dense test oracle accumulate floating-point
//! sums in the identical order.

use ndarray::{Array1, Array2, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::{apply_ladder, LadderKind, OrbitalIndex, SectorBasis, Spin};

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    Open,
}

/// Couplings of `H = -t Σ(c†_i c_{i+1} + h.c.) + U Σ n_↑n_↓
/// - t' Σ(c†_i c_{i+2} + h.c.) + U' Σ N_i N_{i+1}`, in units of `t`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub sites: usize,
    #[serde(default = "default_t")]
    pub t: f64,
    pub u: f64,
    #[serde(default)]
    pub t_prime: f64,
    #[serde(default)]
    pub u_prime: f64,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
}

fn default_t() -> f64 {
    1.0
}

fn default_boundary() -> Boundary {
    Boundary::Periodic
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::domain("model requires at least 1 site"));
        }
        if !(self.t >= 0.0) {
            return Err(Error::domain("hopping t must be nonnegative"));
        }
        for (name, v) in [
            ("t", self.t),
            ("u", self.u),
            ("t_prime", self.t_prime),
            ("u_prime", self.u_prime),
        ] {
            if !v.is_finite() {
                return Err(Error::domain(format!("coupling {name} must be finite")));
            }
        }
        Ok(())
    }

    pub fn with_u(&self, u: f64) -> ModelParams {
        ModelParams { u, ..*self }
    }
}

/// Bond list `(i, i+range)` honoring the boundary condition. For a periodic
/// ring the literal formula is kept even when small `L` makes bonds coincide
/// (L=2 counts the single bond twice); self-loops (L=1) are dropped.
pub fn bonds(sites: usize, boundary: Boundary, range: usize) -> Vec<(usize, usize)> {
    match boundary {
        Boundary::Periodic => (0..sites)
            .map(|i| (i, (i + range) % sites))
            .filter(|(i, j)| i != j)
            .collect(),
        Boundary::Open => (0..sites.saturating_sub(range))
            .map(|i| (i, i + range))
            .collect(),
    }
}

/// Triplet-form sparse operator mapping `sector_in` to `sector_out`.
/// Duplicate positions are combined at assembly time; entries are stored
/// sorted by `(col, row)`.
#[derive(Clone, Debug)]
pub struct SparseOperator {
    pub sector_in: (usize, usize),
    pub sector_out: (usize, usize),
    pub dim_in: usize,
    pub dim_out: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl SparseOperator {
    pub fn matvec(&self, v: ArrayView1<Complex64>) -> Array1<Complex64> {
        assert_eq!(v.len(), self.dim_in);
        let mut out = Array1::<Complex64>::zeros(self.dim_out);
        for &(r, c, val) in &self.entries {
            out[r] += val * v[c];
        }
        out
    }

    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut dense = Array2::<Complex64>::zeros((self.dim_out, self.dim_in));
        for &(r, c, val) in &self.entries {
            dense[[r, c]] += val;
        }
        dense
    }

    /// Largest deviation from Hermiticity, `max |A - A†|`.
    pub fn max_asymmetry(&self) -> f64 {
        assert_eq!(self.dim_in, self.dim_out);
        let dense = self.to_dense();
        let mut worst = 0.0f64;
        for r in 0..self.dim_out {
            for c in 0..=r {
                let d = (dense[[r, c]] - dense[[c, r]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// `<v|A|v>` for a sector-diagonal operator.
    pub fn expectation(&self, v: ArrayView1<Complex64>) -> Complex64 {
        let av = self.matvec(v);
        v.iter().zip(av.iter()).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries
            .iter()
            .filter(|(r, c, _)| r == c)
            .map(|&(_, _, v)| v)
            .sum()
    }
}

/// Accumulates triplets, merging duplicates in first-encounter order per
/// column so that floating-point sums are reproducible.
struct TripletBuilder {
    cols: Vec<Vec<(usize, Complex64)>>,
}

impl TripletBuilder {
    fn new(dim_in: usize) -> Self {
        TripletBuilder {
            cols: vec![Vec::new(); dim_in],
        }
    }

    fn push(&mut self, row: usize, col: usize, val: Complex64) {
        let entries = &mut self.cols[col];
        if let Some(e) = entries.iter_mut().find(|(r, _)| *r == row) {
            e.1 += val;
        } else {
            entries.push((row, val));
        }
    }

    fn finish(
        self,
        sector_in: (usize, usize),
        sector_out: (usize, usize),
        dim_out: usize,
    ) -> SparseOperator {
        let dim_in = self.cols.len();
        let mut entries = Vec::new();
        for (col, mut rows) in self.cols.into_iter().enumerate() {
            rows.sort_by_key(|&(r, _)| r);
            for (row, val) in rows {
                if val != Complex64::default() {
                    entries.push((row, col, val));
                }
            }
        }
        SparseOperator {
            sector_in,
            sector_out,
            dim_in,
            dim_out,
            entries,
        }
    }
}

/// Action of the Hamiltonian on a single basis state, as a list of
/// `(target state position, amplitude)` contributions in fixed term order.
pub fn hamiltonian_action(
    params: &ModelParams,
    basis: &SectorBasis,
    pos: usize,
    mut emit: impl FnMut(usize, f64),
) {
    let state = basis.state(pos);
    let l = basis.sites;
    // nearest-neighbor hopping
    for spin in [Spin::Up, Spin::Down] {
        for &(i, j) in &bonds(l, params.boundary, 1) {
            for (from, to) in [(j, i), (i, j)] {
                if let Some((s1, mid)) = apply_ladder(
                    state,
                    l,
                    OrbitalIndex::new(from, spin),
                    LadderKind::Annihilate,
                ) {
                    if let Some((s2, out)) =
                        apply_ladder(mid, l, OrbitalIndex::new(to, spin), LadderKind::Create)
                    {
                        let q = basis.position(out).expect("hopping left the sector");
                        emit(q, -params.t * f64::from(s1 * s2));
                    }
                }
            }
        }
    }
    // on-site repulsion
    if params.u != 0.0 {
        for i in 0..l {
            if state.up >> i & 1 == 1 && state.dn >> i & 1 == 1 {
                emit(pos, params.u);
            }
        }
    }
    // next-nearest hopping
    if params.t_prime != 0.0 {
        for spin in [Spin::Up, Spin::Down] {
            for &(i, j) in &bonds(l, params.boundary, 2) {
                for (from, to) in [(j, i), (i, j)] {
                    if let Some((s1, mid)) = apply_ladder(
                        state,
                        l,
                        OrbitalIndex::new(from, spin),
                        LadderKind::Annihilate,
                    ) {
                        if let Some((s2, out)) =
                            apply_ladder(mid, l, OrbitalIndex::new(to, spin), LadderKind::Create)
                        {
                            let q = basis.position(out).expect("hopping left the sector");
                            emit(q, -params.t_prime * f64::from(s1 * s2));
                        }
                    }
                }
            }
        }
    }
    // nearest-neighbor charge repulsion U' N_i N_j with N_i = n_i↑ + n_i↓
    if params.u_prime != 0.0 {
        for &(i, j) in &bonds(l, params.boundary, 1) {
            let ni = (state.up >> i & 1) + (state.dn >> i & 1);
            let nj = (state.up >> j & 1) + (state.dn >> j & 1);
            let prod = ni * nj;
            // accumulate U' once per occupied pair to mirror the ladder-product oracle
            for _ in 0..prod {
                emit(pos, params.u_prime);
            }
        }
    }
}

/// Assemble the sector-restricted Hamiltonian.
pub fn build_hamiltonian(params: &ModelParams, basis: &SectorBasis) -> Result<SparseOperator> {
    params.validate()?;
    if basis.sites != params.sites {
        return Err(Error::domain(format!(
            "sector built for {} sites but model has {}",
            basis.sites, params.sites
        )));
    }
    let dim = basis.dim();
    let mut builder = TripletBuilder::new(dim);
    for pos in 0..dim {
        hamiltonian_action(params, basis, pos, |row, val| {
            builder.push(row, pos, Complex64::new(val, 0.0));
        });
    }
    Ok(builder.finish(basis.label(), basis.label(), dim))
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObservableKind {
    /// `(1/L) Σ_i n_{i↑} n_{i↓}`
    DoubleOccupancyAvg,
    LocalDensity {
        site: usize,
        spin: Spin,
    },
    TotalNumber,
    MomentumOccupation {
        k: usize,
        spin: Spin,
    },
    /// Spin-summed site density `N_i = n_{i↑} + n_{i↓}`
    DensityN {
        site: usize,
    },
}

/// Assemble a Hermitian sector-diagonal observable.
pub fn build_observable(kind: &ObservableKind, basis: &SectorBasis) -> Result<SparseOperator> {
    let l = basis.sites;
    let dim = basis.dim();
    let mut builder = TripletBuilder::new(dim);
    match *kind {
        ObservableKind::DoubleOccupancyAvg => {
            let w = 1.0 / l as f64;
            for pos in 0..dim {
                let s = basis.state(pos);
                for i in 0..l {
                    if s.up >> i & 1 == 1 && s.dn >> i & 1 == 1 {
                        builder.push(pos, pos, Complex64::new(w, 0.0));
                    }
                }
            }
        }
        ObservableKind::LocalDensity { site, spin } => {
            if site >= l {
                return Err(Error::domain(format!("site {site} outside 0..{l}")));
            }
            for pos in 0..dim {
                if basis.state(pos).occupied(OrbitalIndex::new(site, spin)) {
                    builder.push(pos, pos, Complex64::new(1.0, 0.0));
                }
            }
        }
        ObservableKind::TotalNumber => {
            for pos in 0..dim {
                let s = basis.state(pos);
                let n = s.up.count_ones() + s.dn.count_ones();
                builder.push(pos, pos, Complex64::new(f64::from(n), 0.0));
            }
        }
        ObservableKind::MomentumOccupation { k, spin } => {
            if k >= l {
                return Err(Error::domain(format!(
                    "reciprocal index {k} outside 0..{l}"
                )));
            }
            let w = 1.0 / l as f64;
            for pos in 0..dim {
                let state = basis.state(pos);
                for m in 0..l {
                    let Some((s1, mid)) =
                        apply_ladder(state, l, OrbitalIndex::new(m, spin), LadderKind::Annihilate)
                    else {
                        continue;
                    };
                    for j in 0..l {
                        let Some((s2, out)) =
                            apply_ladder(mid, l, OrbitalIndex::new(j, spin), LadderKind::Create)
                        else {
                            continue;
                        };
                        let q = basis.position(out).expect("density operator left sector");
                        let phase = 2.0 * std::f64::consts::PI * k as f64 * (j as f64 - m as f64)
                            / l as f64;
                        let val = Complex64::from_polar(1.0, phase) * (w * f64::from(s1 * s2));
                        builder.push(q, pos, val);
                    }
                }
            }
        }
        ObservableKind::DensityN { site } => {
            if site >= l {
                return Err(Error::domain(format!("site {site} outside 0..{l}")));
            }
            for pos in 0..dim {
                let s = basis.state(pos);
                let n = (s.up >> site & 1) + (s.dn >> site & 1);
                if n > 0 {
                    builder.push(pos, pos, Complex64::new(f64::from(n), 0.0));
                }
            }
        }
    }
    Ok(builder.finish(basis.label(), basis.label(), dim))
}

/// Matrix of a single ladder operator between adjacent sectors.
pub fn ladder_matrix(
    basis_in: &SectorBasis,
    basis_out: &SectorBasis,
    orb: OrbitalIndex,
    kind: LadderKind,
) -> Result<SparseOperator> {
    let (n_up, n_dn) = basis_in.label();
    let expected = match (kind, orb.spin) {
        (LadderKind::Create, Spin::Up) => (n_up + 1, n_dn),
        (LadderKind::Create, Spin::Down) => (n_up, n_dn + 1),
        (LadderKind::Annihilate, Spin::Up) => (n_up.wrapping_sub(1), n_dn),
        (LadderKind::Annihilate, Spin::Down) => (n_up, n_dn.wrapping_sub(1)),
    };
    if basis_out.label() != expected || basis_out.sites != basis_in.sites {
        return Err(Error::domain(format!(
            "target sector {:?} does not match ladder image {:?}",
            basis_out.label(),
            expected
        )));
    }
    let mut builder = TripletBuilder::new(basis_in.dim());
    for pos in 0..basis_in.dim() {
        if let Some((sign, out)) = apply_ladder(basis_in.state(pos), basis_in.sites, orb, kind) {
            let q = basis_out
                .position(out)
                .expect("ladder image missing from target sector");
            builder.push(q, pos, Complex64::new(f64::from(sign), 0.0));
        }
    }
    Ok(builder.finish(basis_in.label(), basis_out.label(), basis_out.dim()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(sites: usize, u: f64, boundary: Boundary) -> ModelParams {
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
    fn atomic_limit_is_diagonal() {
        // t=0 not allowed (t > 0); emulate by checking diagonal part directly:
        // the U term contributes U per doubly occupied site.
        let basis = SectorBasis::build(3, 1, 1).unwrap();
        let p = params(3, 7.0, Boundary::Open);
        let h = build_hamiltonian(&p, &basis).unwrap();
        let dense = h.to_dense();
        for pos in 0..basis.dim() {
            let s = basis.state(pos);
            let docc = (s.up & s.dn).count_ones() as f64;
            assert!((dense[[pos, pos]].re - 7.0 * docc).abs() < 1e-14);
        }
    }

    #[test]
    fn hermiticity_is_exact() {
        let basis = SectorBasis::build(4, 2, 2).unwrap();
        let p = ModelParams {
            sites: 4,
            t: 1.0,
            u: 3.0,
            t_prime: 0.75,
            u_prime: 1.5,
            boundary: Boundary::Periodic,
        };
        let h = build_hamiltonian(&p, &basis).unwrap();
        assert_eq!(h.max_asymmetry(), 0.0);
    }

    #[test]
    fn total_number_is_constant() {
        let basis = SectorBasis::build(4, 2, 1).unwrap();
        let op = build_observable(&ObservableKind::TotalNumber, &basis).unwrap();
        let dense = op.to_dense();
        for pos in 0..basis.dim() {
            assert_eq!(dense[[pos, pos]], Complex64::new(3.0, 0.0));
        }
    }

    #[test]
    fn sector_mismatch_rejected() {
        let basis = SectorBasis::build(4, 2, 2).unwrap();
        let p = params(6, 1.0, Boundary::Periodic);
        assert!(build_hamiltonian(&p, &basis).is_err());
    }

    #[test]
    fn invalid_observable_index_rejected() {
        let basis = SectorBasis::build(3, 1, 1).unwrap();
        assert!(build_observable(
            &ObservableKind::LocalDensity {
                site: 3,
                spin: Spin::Up
            },
            &basis
        )
        .is_err());
        assert!(build_observable(
            &ObservableKind::MomentumOccupation {
                k: 5,
                spin: Spin::Up
            },
            &basis
        )
        .is_err());
    }

    #[test]
    fn ladder_matrix_maps_sectors() {
        let a = SectorBasis::build(3, 1, 1).unwrap();
        let b = SectorBasis::build(3, 0, 1).unwrap();
        let op = ladder_matrix(
            &a,
            &b,
            OrbitalIndex::new(0, Spin::Up),
            LadderKind::Annihilate,
        )
        .unwrap();
        assert_eq!(op.dim_in, a.dim());
        assert_eq!(op.dim_out, b.dim());
        assert_eq!(op.sector_out, (0, 1));
        // wrong target sector is refused
        assert!(ladder_matrix(
            &a,
            &a,
            OrbitalIndex::new(0, Spin::Up),
            LadderKind::Annihilate
        )
        .is_err());
    }
}
