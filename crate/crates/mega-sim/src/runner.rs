//! Experiment drivers: turn a validated [`ExperimentConfig`] into CSV files
//! plus a JSON run manifest.
//!
//! Output is deterministic: sector maps are ordered, parallel reductions are
//! collected in order, and every float is printed with `{:.17e}` so a rerun
//! of the same config produces byte-identical CSVs. The manifest additionally
//! records wall time, so only the CSVs carry the byte-identical guarantee.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::cache::{cached_full_spectrum, SpectrumCache};
use crate::config::{ExperimentConfig, ExperimentKind, SourceSpec};
use crate::corr::{
    auto_omega_grid, broaden, correlator_pole_pair, correlator_time, ldos, time_grid, Branch,
    Broadening, CorrFamily, CorrSource, CorrelatorId, CorrelatorSeries, PoleOptions,
    SpectralSeries,
};
use crate::diag::{eth_scatter, reduced_density_matrix, trace_distance, SubsystemSpec};
use crate::eig::{sectors_all, sectors_with_n, FullSpectrum, SpectrumOptions};
use crate::ensemble::{
    dephase, dephase_ensemble, gibbs, microcanonical_window, neel_state, ramp_prepare,
    DiagonalSource, GibbsState, PureState, StationaryTag, ThermalKind, ThermalParams,
    WeightedEnsemble,
};
use crate::error::{Error, Result};
use crate::fit::{fit_beta_density, fit_beta_mu, mega_run, FitInput, MegaCorrelator, ThermalFit};
use crate::fock::Spin;
use crate::model::ObservableKind;

/// What a completed run produced.
#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub output_dir: PathBuf,
    pub manifest_path: PathBuf,
    pub files: Vec<String>,
    /// `Some(false)` marks a valid but non-converged MEGA loop (exit 0).
    pub converged: Option<bool>,
}

/// Execute one experiment end to end.
pub fn run(
    cfg: &ExperimentConfig,
    cache: Option<&SpectrumCache>,
    output_override: Option<&Path>,
) -> Result<RunSummary> {
    cfg.validate()?;
    let started = Instant::now();
    let dir = match output_override.or(cfg.output.as_deref()) {
        Some(d) => d.to_path_buf(),
        None => {
            return Err(Error::config(
                "no output directory: set `output` in the config or pass --output",
            ))
        }
    };
    std::fs::create_dir_all(&dir)
        .map_err(|e| Error::resource(format!("cannot create output dir {}: {e}", dir.display())))?;

    let sectors = required_sectors(cfg);
    let options = SpectrumOptions {
        dense_cap: cfg.compute.dense_cap,
        translation_blocking: cfg.compute.translation_blocking,
        keep_vectors: cfg.experiment != ExperimentKind::Spectrum,
    };
    let spectra = cached_full_spectrum(cache, &cfg.model, &sectors, &options)?;

    let mut files = Vec::new();
    let mut converged = None;
    let results = match cfg.experiment {
        ExperimentKind::Spectrum => run_spectrum(&spectra, &dir, &mut files)?,
        ExperimentKind::Ldos => run_ldos(cfg, &spectra, &dir, &mut files)?,
        ExperimentKind::Greens => {
            run_corr_pair(cfg, &spectra, CorrFamily::Greens, &dir, &mut files)?
        }
        ExperimentKind::DensityCorr => {
            run_corr_pair(cfg, &spectra, CorrFamily::Density, &dir, &mut files)?
        }
        ExperimentKind::Mega => run_mega(cfg, &spectra, &dir, &mut files, &mut converged)?,
        ExperimentKind::EthScatter => run_eth(cfg, &spectra, &dir, &mut files)?,
        ExperimentKind::TraceDistance => run_trace_distance(cfg, &spectra, &dir, &mut files)?,
        ExperimentKind::GibbsFit => run_gibbs_fit(cfg, &spectra, &dir, &mut files)?,
    };

    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "config": serde_json::to_value(cfg).map_err(|e| Error::config(e.to_string()))?,
        "sectors": sectors,
        "spectra_digest": SpectrumCache::run_digest(&cfg.model, &sectors),
        "wall_seconds": started.elapsed().as_secs_f64(),
        "files": files,
        "results": results,
    });
    let manifest_path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::config(e.to_string()))?;
    std::fs::write(&manifest_path, text + "\n")
        .map_err(|e| Error::resource(format!("cannot write {}: {e}", manifest_path.display())))?;

    Ok(RunSummary {
        output_dir: dir,
        manifest_path,
        files,
        converged,
    })
}

// ---------------------------------------------------------------------------
// sector selection and source preparation
// ---------------------------------------------------------------------------

/// Total particle number pinned by the source, when there is one.
fn source_total_n(cfg: &ExperimentConfig) -> Option<usize> {
    match &cfg.source {
        SourceSpec::Gibbs {
            kind: ThermalKind::Canonical { n },
            ..
        } => Some(*n),
        SourceSpec::Gibbs { .. } => None,
        SourceSpec::Window { total_n, .. } => Some(*total_n),
        SourceSpec::Ramp { .. } => Some(cfg.model.sites),
        SourceSpec::Eigenstate { sector, .. } => Some(sector.0 + sector.1),
    }
}

/// Sectors whose spectra the run needs: the source's own sectors, plus the
/// adjacent sectors reached by the greens ladder operators, plus the
/// canonical comparison sectors for trace-distance runs. An explicit
/// `compute.sectors` list overrides the source-derived base (adjacency is
/// still added on top).
fn required_sectors(cfg: &ExperimentConfig) -> Vec<(usize, usize)> {
    let l = cfg.model.sites;
    let mut base: Vec<(usize, usize)> = if !cfg.compute.sectors.is_empty() {
        cfg.compute.sectors.clone()
    } else {
        match &cfg.source {
            SourceSpec::Gibbs {
                kind: ThermalKind::GrandCanonical,
                ..
            } => sectors_all(l),
            SourceSpec::Gibbs {
                kind: ThermalKind::Canonical { n },
                ..
            } => sectors_with_n(l, *n),
            SourceSpec::Gibbs {
                kind: ThermalKind::Microcanonical { .. },
                ..
            } => sectors_all(l),
            SourceSpec::Window { total_n, .. } => sectors_with_n(l, *total_n),
            SourceSpec::Ramp { .. } => vec![(l / 2, l / 2)],
            SourceSpec::Eigenstate { sector, .. } => vec![*sector],
        }
    };
    let greens = match cfg.experiment {
        ExperimentKind::Ldos | ExperimentKind::Greens | ExperimentKind::GibbsFit => true,
        ExperimentKind::Mega => cfg.correlator.family == CorrFamily::Greens,
        _ => false,
    };
    if greens {
        let mut adjacent = Vec::new();
        for &(nu, nd) in &base {
            let (a, b) = match cfg.correlator.spin {
                Spin::Up => ((nu + 1, nd), (nu.wrapping_sub(1), nd)),
                Spin::Down => ((nu, nd + 1), (nu, nd.wrapping_sub(1))),
            };
            for s in [a, b] {
                if s.0 <= l && s.1 <= l {
                    adjacent.push(s);
                }
            }
        }
        base.extend(adjacent);
    }
    if cfg.experiment == ExperimentKind::TraceDistance {
        if let Some(n) = source_total_n(cfg) {
            base.extend(sectors_with_n(l, n));
        }
    }
    base.sort_unstable();
    base.dedup();
    base
}

/// A prepared source; stationary experiments reduce it to a diagonal mixture.
enum Prepared {
    Gibbs(GibbsState),
    Diagonal(DiagonalSource),
    States(Vec<PureState>),
}

impl Prepared {
    fn stationary(&self, cfg: &ExperimentConfig, spectra: &FullSpectrum) -> Result<DiagonalSource> {
        match self {
            Prepared::Gibbs(g) => DiagonalSource::from_gibbs(g, spectra, cfg.compute.weight_cutoff),
            Prepared::Diagonal(d) => Ok(d.clone()),
            Prepared::States(states) => {
                let w = 1.0 / states.len() as f64;
                let ens = WeightedEnsemble::new(
                    states.iter().map(|s| (w, s.clone())).collect(),
                    StationaryTag::Raw,
                )?;
                dephase_ensemble(&ens, spectra)
            }
        }
    }
}

fn prepare_source(cfg: &ExperimentConfig, spectra: &FullSpectrum) -> Result<Prepared> {
    match &cfg.source {
        SourceSpec::Gibbs { beta, mu, kind } => {
            let tp = ThermalParams {
                beta: *beta,
                mu: *mu,
                kind: *kind,
            };
            gibbs(spectra, &tp).map(Prepared::Gibbs)
        }
        SourceSpec::Window {
            e_min,
            e_max,
            total_n,
        } => {
            let labels = sectors_with_n(cfg.model.sites, *total_n);
            microcanonical_window(spectra, *e_min, *e_max, &labels).map(Prepared::Gibbs)
        }
        SourceSpec::Ramp {
            schedule,
            tau,
            tol,
            parities,
        } => {
            let mut states = Vec::new();
            for &p in parities {
                let neel = neel_state(cfg.model.sites, p)?;
                states.push(ramp_prepare(&neel, &cfg.model, schedule, *tau, *tol)?);
            }
            Ok(Prepared::States(states))
        }
        SourceSpec::Eigenstate { sector, index } => {
            let spec = spectra.get(*sector)?;
            if *index >= spec.dim() {
                return Err(Error::config(format!(
                    "eigenstate index {index} out of range for sector dimension {}",
                    spec.dim()
                )));
            }
            let psi = PureState::new(*sector, spec.eigvec(*index))?;
            dephase(&psi, spec).map(Prepared::Diagonal)
        }
    }
}

fn pole_options(cfg: &ExperimentConfig) -> PoleOptions {
    PoleOptions {
        merge_tol: cfg.compute.pole_merge_tol,
        weight_cutoff: cfg.compute.weight_cutoff,
        allow_raw: false,
    }
}

// ---------------------------------------------------------------------------
// the eight drivers
// ---------------------------------------------------------------------------

fn run_spectrum(
    spectra: &FullSpectrum,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<serde_json::Value> {
    let rows = spectra.sectors.iter().flat_map(|(label, spec)| {
        spec.energies
            .iter()
            .enumerate()
            .map(move |(n, &e)| format!("{},{},{},{}", label.0, label.1, n, fmt(e)))
    });
    write_csv(dir, "energies.csv", "n_up,n_dn,index,energy", rows, files)?;
    Ok(json!({
        "total_dim": spectra.total_dim(),
        "ground_energy": spectra
            .sectors
            .values()
            .flat_map(|s| s.energies.iter().copied())
            .fold(f64::INFINITY, f64::min),
    }))
}

fn run_ldos(
    cfg: &ExperimentConfig,
    spectra: &FullSpectrum,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<serde_json::Value> {
    let c = &cfg.correlator;
    let source = prepare_source(cfg, spectra)?.stationary(cfg, spectra)?;
    let (lesser, greater) = correlator_pole_pair(
        &CorrSource::Diagonal(&source),
        spectra,
        CorrFamily::Greens,
        c.i,
        c.i,
        c.spin,
        &pole_options(cfg),
    )?;
    let broadening = Broadening {
        eta: c.eta,
        kernel: c.kernel,
    };
    let omegas = auto_omega_grid(&[&lesser, &greater], c.eta, c.eta / 10.0);
    let a = ldos(&greater, &lesser, &broadening, &omegas)?;
    let rows = a
        .omegas
        .iter()
        .zip(a.values.iter())
        .map(|(w, v)| format!("{},{}", fmt(*w), fmt(v.re)));
    write_csv(dir, "ldos.csv", "omega,ldos", rows, files)?;
    Ok(json!({
        "integral": a.integral().re,
        "pole_count": { "lesser": lesser.poles.len(), "greater": greater.poles.len() },
    }))
}

fn run_corr_pair(
    cfg: &ExperimentConfig,
    spectra: &FullSpectrum,
    family: CorrFamily,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<serde_json::Value> {
    let c = &cfg.correlator;
    let source = prepare_source(cfg, spectra)?.stationary(cfg, spectra)?;
    let corr_source = CorrSource::Diagonal(&source);
    let (lesser, greater) = correlator_pole_pair(
        &corr_source,
        spectra,
        family,
        c.i,
        c.j,
        c.spin,
        &pole_options(cfg),
    )?;

    let times = time_grid(c.dt, c.t_max);
    let series = |branch: Branch| -> Result<CorrelatorSeries> {
        let id = CorrelatorId {
            family,
            branch,
            i: c.i,
            j: c.j,
            spin: c.spin,
        };
        correlator_time(&corr_source, spectra, &id, &times)
    };
    let lesser_t = series(Branch::Lesser)?;
    let greater_t = series(Branch::Greater)?;
    let stem = match family {
        CorrFamily::Greens => "greens",
        CorrFamily::Density => "density",
    };
    let rows = times.iter().enumerate().map(|(k, &t)| {
        format!(
            "{},{},{},{},{}",
            fmt(t),
            fmt(lesser_t.values[k].re),
            fmt(lesser_t.values[k].im),
            fmt(greater_t.values[k].re),
            fmt(greater_t.values[k].im),
        )
    });
    write_csv(
        dir,
        &format!("{stem}_time.csv"),
        "t,re_lesser,im_lesser,re_greater,im_greater",
        rows,
        files,
    )?;

    let broadening = Broadening {
        eta: c.eta,
        kernel: c.kernel,
    };
    let omegas = auto_omega_grid(&[&lesser, &greater], c.eta, c.eta / 10.0);
    let lesser_w = broaden(&lesser, &broadening, &omegas)?;
    let greater_w = broaden(&greater, &broadening, &omegas)?;
    let rows = omegas.iter().enumerate().map(|(k, &w)| {
        format!(
            "{},{},{},{},{}",
            fmt(w),
            fmt(lesser_w.values[k].re),
            fmt(lesser_w.values[k].im),
            fmt(greater_w.values[k].re),
            fmt(greater_w.values[k].im),
        )
    });
    write_csv(
        dir,
        &format!("{stem}_omega.csv"),
        "omega,re_lesser,im_lesser,re_greater,im_greater",
        rows,
        files,
    )?;

    let fit = fit_pair(cfg, family, &lesser, &greater, &lesser_w, &greater_w)?;
    Ok(json!({
        "fit": fit,
        "pole_count": { "lesser": lesser.poles.len(), "greater": greater.poles.len() },
        "sum_rule": lesser.total_weight().re + greater.total_weight().re,
    }))
}

/// Exact thermal sources admit the pole-ratio fit; everything else uses the
/// broadened series (dephased pure components rarely produce matched
/// lesser/greater pole frequencies).
fn fit_pair(
    cfg: &ExperimentConfig,
    family: CorrFamily,
    lesser: &crate::corr::PoleList,
    greater: &crate::corr::PoleList,
    lesser_w: &SpectralSeries,
    greater_w: &SpectralSeries,
) -> Result<ThermalFit> {
    let exact = matches!(
        cfg.source,
        SourceSpec::Gibbs { .. } | SourceSpec::Window { .. }
    );
    let input = if exact {
        FitInput::Poles { lesser, greater }
    } else {
        FitInput::Series {
            lesser: lesser_w,
            greater: greater_w,
        }
    };
    match family {
        CorrFamily::Greens => fit_beta_mu(&input, &cfg.fit),
        CorrFamily::Density => fit_beta_density(&input, &cfg.fit),
    }
}

fn run_mega(
    cfg: &ExperimentConfig,
    spectra: &FullSpectrum,
    dir: &Path,
    files: &mut Vec<String>,
    converged: &mut Option<bool>,
) -> Result<serde_json::Value> {
    let Prepared::States(states) = prepare_source(cfg, spectra)? else {
        unreachable!("config validation pins mega to a ramp source");
    };
    let c = &cfg.correlator;
    let corr = MegaCorrelator {
        family: c.family,
        i: c.i,
        j: c.j,
        spin: c.spin,
        broadening: Broadening {
            eta: c.eta,
            kernel: c.kernel,
        },
    };
    let outcome = mega_run(&states, spectra, &cfg.fit, &corr)?;
    let rows = outcome.history.iter().map(|it| {
        format!(
            "{},{},{},{},{},{}",
            it.ensemble_size,
            opt_fmt(it.beta),
            opt_fmt(it.mu),
            opt_fmt(it.residual),
            it.mask_size,
            it.error.as_deref().unwrap_or(""),
        )
    });
    write_csv(
        dir,
        "mega_history.csv",
        "ensemble_size,beta,mu,residual,mask_size,error",
        rows,
        files,
    )?;
    *converged = Some(outcome.converged);
    Ok(json!({
        "converged": outcome.converged,
        "iterations": outcome.history,
        "ensemble_size": outcome.ensemble.entries.len(),
    }))
}

fn run_eth(
    _cfg: &ExperimentConfig,
    spectra: &FullSpectrum,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<serde_json::Value> {
    let observables = [
        ObservableKind::DoubleOccupancyAvg,
        ObservableKind::DensityN { site: 0 },
        ObservableKind::MomentumOccupation {
            k: 0,
            spin: Spin::Up,
        },
    ];
    let labels: Vec<(usize, usize)> = spectra.labels().collect();
    let rows_data = eth_scatter(spectra, &labels, &observables)?;
    let rows = rows_data.iter().map(|r| {
        format!(
            "{},{},{},{},{},{},{}",
            r.sector.0,
            r.sector.1,
            r.index,
            fmt(r.energy),
            fmt(r.values[0]),
            fmt(r.values[1]),
            fmt(r.values[2]),
        )
    });
    write_csv(
        dir,
        "eth_scatter.csv",
        "n_up,n_dn,index,energy,double_occ_avg,density_n0,n_k0_up",
        rows,
        files,
    )?;
    Ok(json!({ "rows": rows_data.len() }))
}

fn run_trace_distance(
    cfg: &ExperimentConfig,
    spectra: &FullSpectrum,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<serde_json::Value> {
    let source = prepare_source(cfg, spectra)?.stationary(cfg, spectra)?;
    let energy: f64 = source.components.iter().map(|c| c.weight * c.energy).sum();
    let n = source_total_n(cfg).expect("validation excludes grand-canonical sources");
    let matched = crate::fit::energy_matched_beta(spectra, energy, n)?;
    let reference = gibbs(
        spectra,
        &ThermalParams {
            beta: matched.beta,
            mu: 0.0,
            kind: ThermalKind::Canonical { n },
        },
    )?;
    let max_len = (cfg.model.sites / 2).clamp(1, 3);
    let mut rows = Vec::new();
    for len in 1..=max_len {
        let sub = SubsystemSpec { start: 0, len };
        let a = reduced_density_matrix(&CorrSource::Diagonal(&source), spectra, sub)?;
        let b = reduced_density_matrix(&CorrSource::Gibbs(&reference), spectra, sub)?;
        let d = trace_distance(&a, &b)?;
        rows.push(format!("{len},{}", fmt(d)));
    }
    write_csv(
        dir,
        "trace_distance.csv",
        "subsystem_len,trace_distance",
        rows.into_iter(),
        files,
    )?;
    Ok(json!({
        "source_energy": energy,
        "total_n": n,
        "beta_star": matched.beta,
        "beta_saturated": matched.saturated,
    }))
}

fn run_gibbs_fit(
    cfg: &ExperimentConfig,
    spectra: &FullSpectrum,
    dir: &Path,
    files: &mut Vec<String>,
) -> Result<serde_json::Value> {
    let c = &cfg.correlator;
    let source = prepare_source(cfg, spectra)?.stationary(cfg, spectra)?;
    let corr_source = CorrSource::Diagonal(&source);
    let opts = pole_options(cfg);
    let (gl, gg) = correlator_pole_pair(
        &corr_source,
        spectra,
        CorrFamily::Greens,
        c.i,
        c.j,
        c.spin,
        &opts,
    )?;
    let greens_fit = fit_beta_mu(
        &FitInput::Poles {
            lesser: &gl,
            greater: &gg,
        },
        &cfg.fit,
    )?;
    let (dl, dg) = correlator_pole_pair(
        &corr_source,
        spectra,
        CorrFamily::Density,
        c.i,
        c.j,
        c.spin,
        &opts,
    )?;
    let density_fit = fit_beta_density(
        &FitInput::Poles {
            lesser: &dl,
            greater: &dg,
        },
        &cfg.fit,
    )?;
    let rows = [
        format!(
            "greens_grand,{},{},{}",
            fmt(greens_fit.beta),
            opt_fmt(greens_fit.mu),
            fmt(greens_fit.residual)
        ),
        format!(
            "density_canonical,{},{},{}",
            fmt(density_fit.beta),
            opt_fmt(density_fit.mu),
            fmt(density_fit.residual)
        ),
    ];
    write_csv(
        dir,
        "fits.csv",
        "method,beta,mu,residual",
        rows.into_iter(),
        files,
    )?;
    Ok(json!({ "greens": greens_fit, "density": density_fit }))
}

// ---------------------------------------------------------------------------
// CSV helpers
// ---------------------------------------------------------------------------

/// Full round-trip precision, fixed format.
fn fmt(x: f64) -> String {
    format!("{x:.17e}")
}

fn opt_fmt(x: Option<f64>) -> String {
    x.map(fmt).unwrap_or_default()
}

fn write_csv(
    dir: &Path,
    name: &str,
    header: &str,
    rows: impl Iterator<Item = String>,
    files: &mut Vec<String>,
) -> Result<()> {
    let path = dir.join(name);
    let io_err =
        |e: std::io::Error| Error::resource(format!("cannot write {}: {e}", path.display()));
    let mut w = std::io::BufWriter::new(std::fs::File::create(&path).map_err(io_err)?);
    writeln!(w, "{header}").map_err(io_err)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    files.push(name.to_string());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base_config(experiment: &str, source: &str) -> ExperimentConfig {
        let text = format!(
            r#"
            experiment = "{experiment}"

            [model]
            sites = 4
            u = 4.0

            {source}
        "#
        );
        ExperimentConfig::from_str(&text).unwrap()
    }

    const GIBBS: &str = r#"
        [source]
        type = "gibbs"
        beta = 1.0
        mu = 2.0
        kind = "grand_canonical"
    "#;

    #[test]
    fn spectrum_run_writes_energies_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config("spectrum", GIBBS);
        let summary = run(&cfg, None, Some(dir.path())).unwrap();
        assert_eq!(summary.files, vec!["energies.csv"]);
        let text = std::fs::read_to_string(dir.path().join("energies.csv")).unwrap();
        // header + one row per eigenstate of the 4^L space
        assert_eq!(text.lines().count(), 1 + 256);
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(summary.manifest_path).unwrap()).unwrap();
        assert_eq!(manifest["results"]["total_dim"], 256);
    }

    #[test]
    fn gibbs_fit_recovers_construction_parameters() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config("gibbs_fit", GIBBS);
        let summary = run(&cfg, None, Some(dir.path())).unwrap();
        let manifest: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(summary.manifest_path).unwrap()).unwrap();
        let beta = manifest["results"]["greens"]["beta"].as_f64().unwrap();
        let mu = manifest["results"]["greens"]["mu"].as_f64().unwrap();
        assert!((beta - 1.0).abs() < 1e-8, "beta {beta}");
        assert!((mu - 2.0).abs() < 1e-8, "mu {mu}");
    }

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = base_config("ldos", GIBBS);
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        run(&cfg, None, Some(d1.path())).unwrap();
        run(&cfg, None, Some(d2.path())).unwrap();
        let a = std::fs::read(d1.path().join("ldos.csv")).unwrap();
        let b = std::fs::read(d2.path().join("ldos.csv")).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn missing_output_dir_is_a_config_error() {
        let cfg = base_config("spectrum", GIBBS);
        let err = run(&cfg, None, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn eigenstate_trace_distance_runs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = base_config(
            "trace_distance",
            r#"
            [source]
            type = "eigenstate"
            sector = [2, 2]
            index = 10
        "#,
        );
        let summary = run(&cfg, None, Some(dir.path())).unwrap();
        assert_eq!(summary.files, vec!["trace_distance.csv"]);
        let text = std::fs::read_to_string(dir.path().join("trace_distance.csv")).unwrap();
        assert_eq!(text.lines().count(), 3); // header + len 1, 2
    }
}
