//! Disk cache for sector spectra.
//!
//! Each cached entry is one `(model, sector)` pair, keyed by a SHA-256 digest
//! of the exact model parameters (f64 bit patterns, so keys are insensitive
//! to formatting) plus the on-disk format version. Entries store eigenvalues
//! and, for dense diagonalizations up to [`MAX_CACHED_DIM`], eigenvectors.
//! Momentum-blocked spectra are not cached; they are recomputed on demand.

use std::collections::BTreeMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::eig::{full_spectrum, FullSpectrum, SectorSpectrum, SpectrumOptions};
use crate::error::{Error, Result};
use crate::fock::SectorBasis;
use crate::model::{Boundary, ModelParams};

/// Dense sectors larger than this are recomputed rather than stored
/// (a 4096² complex matrix is already a 256 MiB file).
pub const MAX_CACHED_DIM: usize = 4096;

const MAGIC: &[u8; 8] = b"MEGASPC1";

#[derive(Clone, Debug)]
pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    /// Open (creating if needed) a cache rooted at `dir`.
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| {
            Error::resource(format!("cannot create cache dir {}: {e}", dir.display()))
        })?;
        Ok(SpectrumCache {
            dir: dir.to_path_buf(),
        })
    }

    /// Stable digest identifying one `(model, sector)` entry.
    pub fn key(params: &ModelParams, sector: (usize, usize)) -> String {
        let mut h = Sha256::new();
        h.update(MAGIC);
        h.update((params.sites as u64).to_le_bytes());
        h.update(params.t.to_bits().to_le_bytes());
        h.update(params.u.to_bits().to_le_bytes());
        h.update(params.t_prime.to_bits().to_le_bytes());
        h.update(params.u_prime.to_bits().to_le_bytes());
        h.update([match params.boundary {
            Boundary::Periodic => 0u8,
            Boundary::Open => 1u8,
        }]);
        h.update((sector.0 as u64).to_le_bytes());
        h.update((sector.1 as u64).to_le_bytes());
        hex(&h.finalize())
    }

    /// Digest summarizing a whole run's spectra, for the run manifest.
    pub fn run_digest(params: &ModelParams, sectors: &[(usize, usize)]) -> String {
        let mut h = Sha256::new();
        let mut labels: Vec<(usize, usize)> = sectors.to_vec();
        labels.sort_unstable();
        labels.dedup();
        for label in labels {
            h.update(Self::key(params, label).as_bytes());
        }
        hex(&h.finalize())
    }

    fn entry_path(&self, params: &ModelParams, sector: (usize, usize)) -> PathBuf {
        self.dir.join(format!("{}.spec", Self::key(params, sector)))
    }

    /// Load one sector if present and usable. A stored entry without
    /// eigenvectors is a miss when `need_vectors` is set.
    pub fn load(
        &self,
        params: &ModelParams,
        sector: (usize, usize),
        need_vectors: bool,
    ) -> Result<Option<SectorSpectrum>> {
        let path = self.entry_path(params, sector);
        let file = match std::fs::File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(Error::resource(format!(
                    "cannot read cache entry {}: {e}",
                    path.display()
                )))
            }
        };
        let mut r = BufReader::new(file);
        let corrupt = |what: &str| {
            Error::resource(format!(
                "corrupt cache entry {} ({what}); delete it and rerun",
                path.display()
            ))
        };
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| corrupt("truncated"))?;
        if &magic != MAGIC {
            return Err(corrupt("bad magic"));
        }
        let sites = r
            .read_u64::<LittleEndian>()
            .map_err(|_| corrupt("truncated"))? as usize;
        let n_up = r
            .read_u64::<LittleEndian>()
            .map_err(|_| corrupt("truncated"))? as usize;
        let n_dn = r
            .read_u64::<LittleEndian>()
            .map_err(|_| corrupt("truncated"))? as usize;
        let dim = r
            .read_u64::<LittleEndian>()
            .map_err(|_| corrupt("truncated"))? as usize;
        if sites != params.sites || (n_up, n_dn) != sector {
            return Err(corrupt("label mismatch"));
        }
        let basis = SectorBasis::build(sites, n_up, n_dn)?;
        if basis.dim() != dim {
            return Err(corrupt("dimension mismatch"));
        }
        let mut energies = vec![0.0f64; dim];
        r.read_f64_into::<LittleEndian>(&mut energies)
            .map_err(|_| corrupt("truncated energies"))?;
        let has_vectors = r.read_u8().map_err(|_| corrupt("truncated"))? != 0;
        if need_vectors && !has_vectors {
            return Ok(None);
        }
        let vectors = if has_vectors {
            let mut raw = vec![0.0f64; 2 * dim * dim];
            r.read_f64_into::<LittleEndian>(&mut raw)
                .map_err(|_| corrupt("truncated vectors"))?;
            let data: Vec<Complex64> = raw
                .chunks_exact(2)
                .map(|c| Complex64::new(c[0], c[1]))
                .collect();
            let matrix =
                Array2::from_shape_vec((dim, dim), data).map_err(|_| corrupt("vector shape"))?;
            if need_vectors {
                Some(matrix)
            } else {
                None
            }
        } else {
            None
        };
        SectorSpectrum::from_parts(basis, energies, vectors).map(Some)
    }

    /// Store a sector spectrum. Silently skips entries this cache does not
    /// persist (momentum-blocked vectors, oversized dense sectors).
    pub fn store(&self, params: &ModelParams, spectrum: &SectorSpectrum) -> Result<()> {
        let dim = spectrum.dim();
        let dense = spectrum.dense_vectors();
        if spectrum.has_vectors() && dense.is_none() {
            return Ok(()); // blocked representation: recompute instead
        }
        if dense.is_some() && dim > MAX_CACHED_DIM {
            return Ok(());
        }
        let path = self.entry_path(params, spectrum.label());
        let tmp = path.with_extension("spec.tmp");
        let write = || -> std::io::Result<()> {
            let mut w = BufWriter::new(std::fs::File::create(&tmp)?);
            w.write_all(MAGIC)?;
            w.write_u64::<LittleEndian>(params.sites as u64)?;
            w.write_u64::<LittleEndian>(spectrum.label().0 as u64)?;
            w.write_u64::<LittleEndian>(spectrum.label().1 as u64)?;
            w.write_u64::<LittleEndian>(dim as u64)?;
            for &e in &spectrum.energies {
                w.write_f64::<LittleEndian>(e)?;
            }
            w.write_u8(dense.is_some() as u8)?;
            if let Some(m) = dense {
                // standard (row-major) iteration order on both sides
                for z in m.iter() {
                    w.write_f64::<LittleEndian>(z.re)?;
                    w.write_f64::<LittleEndian>(z.im)?;
                }
            }
            w.flush()?;
            std::fs::rename(&tmp, &path)
        };
        write().map_err(|e| {
            let _ = std::fs::remove_file(&tmp);
            Error::resource(format!("cannot write cache entry {}: {e}", path.display()))
        })
    }
}

/// `full_spectrum` with a read-through/write-back cache. `cache = None`
/// degrades to a plain computation.
pub fn cached_full_spectrum(
    cache: Option<&SpectrumCache>,
    params: &ModelParams,
    sectors: &[(usize, usize)],
    options: &SpectrumOptions,
) -> Result<FullSpectrum> {
    let Some(cache) = cache else {
        return full_spectrum(params, sectors, options);
    };
    params.validate()?;
    let mut labels: Vec<(usize, usize)> = sectors.to_vec();
    labels.sort_unstable();
    labels.dedup();
    let mut hits = BTreeMap::new();
    let mut missing = Vec::new();
    for &label in &labels {
        match cache.load(params, label, options.keep_vectors)? {
            Some(s) => {
                hits.insert(label, s);
            }
            None => missing.push(label),
        }
    }
    let mut result = full_spectrum(params, &missing, options)?;
    for spectrum in result.sectors.values() {
        cache.store(params, spectrum)?;
    }
    result.sectors.append(&mut hits);
    Ok(result)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams {
            sites: 3,
            t: 1.0,
            u: 4.0,
            t_prime: 0.0,
            u_prime: 0.0,
            boundary: Boundary::Periodic,
        }
    }

    #[test]
    fn keys_distinguish_params_and_sectors() {
        let p = params();
        let a = SpectrumCache::key(&p, (1, 1));
        assert_ne!(a, SpectrumCache::key(&p, (1, 2)));
        assert_ne!(a, SpectrumCache::key(&p.with_u(4.0 + 1e-12), (1, 1)));
        assert_eq!(a, SpectrumCache::key(&p, (1, 1)));
    }

    #[test]
    fn round_trip_matches_cold_computation() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::open(dir.path()).unwrap();
        let p = params();
        let sectors = [(1, 1), (2, 1)];
        let opts = SpectrumOptions::default();
        let cold = full_spectrum(&p, &sectors, &opts).unwrap();
        let warm_fill = cached_full_spectrum(Some(&cache), &p, &sectors, &opts).unwrap();
        let warm = cached_full_spectrum(Some(&cache), &p, &sectors, &opts).unwrap();
        for &label in &sectors {
            let a = cold.get(label).unwrap();
            let b = warm.get(label).unwrap();
            let c = warm_fill.get(label).unwrap();
            assert_eq!(a.energies, b.energies, "cache altered eigenvalues");
            assert_eq!(a.energies, c.energies);
            let (va, vb) = (a.dense_vectors().unwrap(), b.dense_vectors().unwrap());
            assert_eq!(va, vb, "cache altered eigenvectors");
        }
    }

    #[test]
    fn energy_only_entry_misses_when_vectors_needed() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::open(dir.path()).unwrap();
        let p = params();
        let opts = SpectrumOptions {
            keep_vectors: false,
            ..Default::default()
        };
        cached_full_spectrum(Some(&cache), &p, &[(1, 0)], &opts).unwrap();
        assert!(cache.load(&p, (1, 0), true).unwrap().is_none());
        assert!(cache.load(&p, (1, 0), false).unwrap().is_some());
    }

    #[test]
    fn corrupt_entry_reported_as_resource_error() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::open(dir.path()).unwrap();
        let p = params();
        let key = SpectrumCache::key(&p, (1, 1));
        std::fs::write(dir.path().join(format!("{key}.spec")), b"garbage").unwrap();
        let err = cache.load(&p, (1, 1), true).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
