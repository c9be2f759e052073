//! Property-based invariants over randomized inputs.

mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use mega_sim::corr::{Branch, CorrFamily, CorrelatorId, PoleList};
use mega_sim::fit::{fit_beta_mu, FitConfig, FitInput, Weighting};
use mega_sim::fock::{BasisState, SectorBasis, Spin};

fn gf_id(branch: Branch) -> CorrelatorId {
    CorrelatorId {
        family: CorrFamily::Greens,
        branch,
        i: 0,
        j: 0,
        spin: Spin::Up,
    }
}

/// Synthetic exactly-thermal pole pair at inverse temperature `beta` and
/// chemical potential `mu`.
fn thermal_pair(omegas: &[f64], beta: f64, mu: f64) -> (PoleList, PoleList) {
    let mut lesser = Vec::new();
    let mut greater = Vec::new();
    for (k, &w) in omegas.iter().enumerate() {
        let g = 0.1 + 0.05 * (k as f64 + 1.0);
        greater.push((w, Complex64::new(g, 0.0)));
        lesser.push((w, Complex64::new(g * (-beta * (w - mu)).exp(), 0.0)));
    }
    (
        PoleList {
            id: gf_id(Branch::Lesser),
            poles: lesser,
        },
        PoleList {
            id: gf_id(Branch::Greater),
            poles: greater,
        },
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Sector bases index their own states consistently and exhaust the
    /// binomial count.
    #[test]
    fn basis_position_roundtrip(l in 1usize..=8, nu in 0usize..=8, nd in 0usize..=8) {
        prop_assume!(nu <= l && nd <= l);
        let basis = SectorBasis::build(l, nu, nd).unwrap();
        let choose = |n: usize, k: usize| -> usize {
            (0..k).fold(1usize, |acc, i| acc * (n - i) / (i + 1))
        };
        prop_assert_eq!(basis.dim(), choose(l, nu) * choose(l, nd));
        for pos in 0..basis.dim() {
            let s = basis.state(pos);
            prop_assert_eq!(s.up.count_ones() as usize, nu);
            prop_assert_eq!(s.dn.count_ones() as usize, nd);
            prop_assert_eq!(basis.position(s), Some(pos));
        }
        // a state outside the sector is never indexed
        if nu < l {
            let stray = BasisState::new((1u32 << (nu + 1)) - 1, basis.state(0).dn);
            prop_assert_eq!(stray.up.count_ones() as usize, nu + 1);
            prop_assert_eq!(basis.position(stray), None);
        }
    }

    /// The pole-path FDT fit is exact on synthetic thermal input, and a
    /// global frequency shift moves mu by the same amount without touching
    /// beta.
    #[test]
    fn fit_shift_invariance(
        beta in 0.2f64..4.0,
        mu in -2.0f64..2.0,
        shift in -3.0f64..3.0,
        seed in 0u64..1000,
    ) {
        let omegas: Vec<f64> = (0..8)
            .map(|k| -3.0 + k as f64 * 0.9 + (seed % 7) as f64 * 0.01)
            .collect();
        let cfg = FitConfig::default();
        let (lesser, greater) = thermal_pair(&omegas, beta, mu);
        let fit = fit_beta_mu(&FitInput::Poles { lesser: &lesser, greater: &greater }, &cfg)
            .unwrap();
        prop_assert!((fit.beta - beta).abs() < 1e-8);
        prop_assert!((fit.mu.unwrap() - mu).abs() < 1e-7);

        let shifted: Vec<f64> = omegas.iter().map(|w| w + shift).collect();
        let (ls, gs) = thermal_pair(&shifted, beta, mu + shift);
        let fit2 = fit_beta_mu(&FitInput::Poles { lesser: &ls, greater: &gs }, &cfg).unwrap();
        prop_assert!((fit2.beta - beta).abs() < 1e-8);
        prop_assert!((fit2.mu.unwrap() - (mu + shift)).abs() < 1e-6);
    }

    /// Raising the magnitude-mask threshold never grows the fitted point set.
    #[test]
    fn mask_monotone_in_epsilon(
        beta in 0.5f64..3.0,
        eps_lo in 1e-6f64..1e-3,
        factor in 2.0f64..100.0,
    ) {
        let omegas: Vec<f64> = (0..12).map(|k| -4.0 + k as f64 * 0.7).collect();
        let (lesser, greater) = thermal_pair(&omegas, beta, 0.0);
        let fit_with = |eps: f64| {
            let cfg = FitConfig {
                epsilon: eps,
                weighting: Weighting::MinMagnitude,
                convergence_threshold: 1e-2,
            };
            fit_beta_mu(&FitInput::Poles { lesser: &lesser, greater: &greater }, &cfg)
                .map(|f| f.mask.len())
        };
        let lo = fit_with(eps_lo);
        let hi = fit_with(eps_lo * factor);
        match (lo, hi) {
            (Ok(a), Ok(b)) => prop_assert!(b <= a, "mask grew: {a} -> {b}"),
            (Ok(_), Err(_)) => {} // tighter mask emptied out: allowed
            (Err(_), Ok(_)) => prop_assert!(false, "mask appeared at higher epsilon"),
            (Err(_), Err(_)) => {}
        }
    }
}
