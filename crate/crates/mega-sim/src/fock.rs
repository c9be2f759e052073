//! Fermionic Fock-space bookkeeping for a chain of `L` sites with spin-1/2
//! electrons.
//!
//! Occupation states are stored as a pair of bit masks, one per spin species.
//! Orbitals are linearized as `site + L * spin`, i.e. all up orbitals (sites
//! `0..L`) precede all down orbitals. Ladder operators pick up the fermionic
//! parity sign `(-1)^(number of occupied orbitals with smaller linear index)`;
//! the dense Kronecker-product oracle used in the tests follows the identical
//! ordering.

use std::collections::HashMap;

use ndarray::{Array2, ArrayView1};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported chain length; each spin mask fits in 16 bits.
pub const MAX_SITES: usize = 16;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spin {
    Up,
    Down,
}

impl Spin {
    pub fn other(self) -> Spin {
        match self {
            Spin::Up => Spin::Down,
            Spin::Down => Spin::Up,
        }
    }
}

/// A single orbital `(site, spin)`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct OrbitalIndex {
    pub site: usize,
    pub spin: Spin,
}

impl OrbitalIndex {
    pub fn new(site: usize, spin: Spin) -> Self {
        OrbitalIndex { site, spin }
    }

    /// Linearized orbital index in `[0, 2L)`.
    pub fn linear(&self, sites: usize) -> usize {
        match self.spin {
            Spin::Up => self.site,
            Spin::Down => self.site + sites,
        }
    }
}

/// Occupation masks for both spin species. Ordering is lexicographic in
/// `(up, dn)`, which fixes the basis ordering inside a sector.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisState {
    pub up: u32,
    pub dn: u32,
}

impl BasisState {
    pub fn new(up: u32, dn: u32) -> Self {
        BasisState { up, dn }
    }

    pub fn mask(&self, spin: Spin) -> u32 {
        match spin {
            Spin::Up => self.up,
            Spin::Down => self.dn,
        }
    }

    pub fn occupied(&self, orb: OrbitalIndex) -> bool {
        self.mask(orb.spin) >> orb.site & 1 == 1
    }

    fn with_mask(&self, spin: Spin, mask: u32) -> BasisState {
        match spin {
            Spin::Up => BasisState::new(mask, self.dn),
            Spin::Down => BasisState::new(self.up, mask),
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum LadderKind {
    Create,
    Annihilate,
}

/// Apply `c`/`c†` for the given orbital. Returns `None` when the action is
/// Pauli-forbidden, otherwise the parity sign and the resulting state.
pub fn apply_ladder(
    state: BasisState,
    sites: usize,
    orb: OrbitalIndex,
    kind: LadderKind,
) -> Option<(i8, BasisState)> {
    debug_assert!(orb.site < sites);
    let occupied = state.occupied(orb);
    match kind {
        LadderKind::Create if occupied => return None,
        LadderKind::Annihilate if !occupied => return None,
        _ => {}
    }
    let below = occupied_below(state, orb);
    let sign = if below % 2 == 0 { 1 } else { -1 };
    let mask = state.mask(orb.spin) ^ (1 << orb.site);
    Some((sign, state.with_mask(orb.spin, mask)))
}

/// Number of occupied orbitals with linear index strictly below `orb`.
fn occupied_below(state: BasisState, orb: OrbitalIndex) -> u32 {
    let lower = (1u32 << orb.site) - 1;
    match orb.spin {
        Spin::Up => (state.up & lower).count_ones(),
        Spin::Down => state.up.count_ones() + (state.dn & lower).count_ones(),
    }
}

/// Complete, sorted enumeration of the fixed `(n_up, n_dn)` particle sector.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    pub sites: usize,
    pub n_up: usize,
    pub n_dn: usize,
    states: Vec<BasisState>,
    index: HashMap<BasisState, usize>,
}

impl SectorBasis {
    pub fn build(sites: usize, n_up: usize, n_dn: usize) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return Err(Error::domain(format!(
                "site count {sites} outside supported range 1..={MAX_SITES}"
            )));
        }
        if n_up > sites || n_dn > sites {
            return Err(Error::domain(format!(
                "particle counts ({n_up}, {n_dn}) exceed {sites} sites"
            )));
        }
        let up_masks = masks_with_popcount(sites, n_up);
        let dn_masks = masks_with_popcount(sites, n_dn);
        let mut states = Vec::with_capacity(up_masks.len() * dn_masks.len());
        for &up in &up_masks {
            for &dn in &dn_masks {
                states.push(BasisState::new(up, dn));
            }
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(p, &s)| (s, p))
            .collect::<HashMap<_, _>>();
        Ok(SectorBasis {
            sites,
            n_up,
            n_dn,
            states,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn state(&self, pos: usize) -> BasisState {
        self.states[pos]
    }

    pub fn states(&self) -> &[BasisState] {
        &self.states
    }

    pub fn position(&self, state: BasisState) -> Option<usize> {
        self.index.get(&state).copied()
    }

    pub fn label(&self) -> (usize, usize) {
        (self.n_up, self.n_dn)
    }
}

/// All `sites`-bit masks with `count` set bits, in ascending numeric order.
fn masks_with_popcount(sites: usize, count: usize) -> Vec<u32> {
    (0u32..1 << sites)
        .filter(|m| m.count_ones() as usize == count)
        .collect()
}

/// One-body density matrix `D[j][l] = <c†_{j,σ} c_{l,σ}>` for a normalized
/// state vector over `basis`.
pub fn one_body_density(
    basis: &SectorBasis,
    amplitudes: ArrayView1<Complex64>,
    spin: Spin,
) -> Result<Array2<Complex64>> {
    check_normalized(amplitudes)?;
    let l = basis.sites;
    let mut density = Array2::<Complex64>::zeros((l, l));
    for (p, &state) in basis.states().iter().enumerate() {
        let a_p = amplitudes[p];
        if a_p == Complex64::default() {
            continue;
        }
        for site_l in 0..l {
            let Some((s1, mid)) = apply_ladder(
                state,
                l,
                OrbitalIndex::new(site_l, spin),
                LadderKind::Annihilate,
            ) else {
                continue;
            };
            for site_j in 0..l {
                let Some((s2, out)) =
                    apply_ladder(mid, l, OrbitalIndex::new(site_j, spin), LadderKind::Create)
                else {
                    continue;
                };
                let q = basis
                    .position(out)
                    .expect("number-conserving operator left the sector");
                density[[site_j, site_l]] +=
                    amplitudes[q].conj() * (f64::from(s1) * f64::from(s2)) * a_p;
            }
        }
    }
    Ok(density)
}

/// Momentum occupation `<n̂_{k,σ}> = (1/L) Σ_{j,l} e^{ik(R_j - R_l)}
/// <c†_{j,σ} c_{l,σ}>` for reciprocal index `k` (momentum `2πk/L`).
pub fn momentum_occupation(
    basis: &SectorBasis,
    amplitudes: ArrayView1<Complex64>,
    k: usize,
    spin: Spin,
) -> Result<f64> {
    if k >= basis.sites {
        return Err(Error::domain(format!(
            "reciprocal index {k} outside 0..{}",
            basis.sites
        )));
    }
    let density = one_body_density(basis, amplitudes, spin)?;
    let l = basis.sites as f64;
    let mut total = Complex64::default();
    for j in 0..basis.sites {
        for m in 0..basis.sites {
            let phase = 2.0 * std::f64::consts::PI * k as f64 * (j as f64 - m as f64) / l;
            total += Complex64::from_polar(1.0, phase) * density[[j, m]];
        }
    }
    total /= l;
    if total.im.abs() > 1e-10 {
        return Err(Error::numeric(format!(
            "momentum occupation has imaginary residue {:.3e}",
            total.im
        )));
    }
    Ok(total.re)
}

pub(crate) fn check_normalized(amplitudes: ArrayView1<Complex64>) -> Result<()> {
    let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::domain(format!(
            "state vector not normalized: |v| = {norm:.12}"
        )));
    }
    Ok(())
}
