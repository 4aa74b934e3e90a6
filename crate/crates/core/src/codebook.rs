//! Shared beamforming-matrix codebook and the quantized-BFM selection rule.
//!
//! A finite codebook holds 2^B seeded random unitary matrices. Books are
//! nested by construction: the entries of the B-bit book are a prefix of the
//! (B+1)-bit book generated from the same seed, so the selection metric is
//! non-increasing in B. The infinite book models perfect BFM feedback.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::matdecomp::{qr_economy, ComplexMatrix};

/// Largest supported codebook exponent (2^16 entries).
pub const MAX_CODEBOOK_BITS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodebookError {
    #[error("codebook of 2^{0} entries exceeds the configured bound of 2^{MAX_CODEBOOK_BITS}")]
    CapacityExceeded(u32),
    #[error("codebook has no entries")]
    EmptyCodebook,
}

/// Common BFM codebook shared by the base station and all terminals.
#[derive(Debug, Clone)]
pub struct BfmCodebook {
    /// Exponent B (the book holds 2^B entries); `None` models B = infinity.
    bits: Option<u32>,
    entries: Vec<ComplexMatrix>,
    seed: u64,
}

/// Result of quantizing a BFM against the codebook.
#[derive(Debug, Clone)]
pub struct BfmSelection {
    /// Chosen entry index; `None` for the infinite book.
    pub index: Option<usize>,
    /// Value of the selection objective at the chosen entry.
    pub metric: f64,
    /// The BFM the base station will actually apply.
    pub matrix: ComplexMatrix,
}

impl BfmCodebook {
    /// Generate the 2^B-entry book of seeded random unitary matrices. Each
    /// entry is the orthonormal factor of an M x M complex Gaussian draw,
    /// column-phase-normalized so the largest-magnitude entry of each column
    /// is real positive.
    pub fn generate(bits: u32, m: usize, seed: u64) -> Result<Self, CodebookError> {
        if bits > MAX_CODEBOOK_BITS {
            return Err(CodebookError::CapacityExceeded(bits));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let count = 1usize << bits;
        let mut entries = Vec::with_capacity(count);
        for _ in 0..count {
            let a = ComplexMatrix::from_fn(m, m, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) / 2f64.sqrt()
            });
            // A Gaussian draw is full rank with probability one; redraw on
            // the degenerate branch rather than failing.
            let mut q = match qr_economy(&a) {
                Ok(f) => f.q,
                Err(_) => continue,
            };
            phase_normalize_columns(&mut q);
            entries.push(q);
        }
        while entries.len() < count {
            // Only reachable after a degenerate draw; refill deterministically.
            let a = ComplexMatrix::from_fn(m, m, |_, _| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(re, im) / 2f64.sqrt()
            });
            if let Ok(f) = qr_economy(&a) {
                let mut q = f.q;
                phase_normalize_columns(&mut q);
                entries.push(q);
            }
        }
        Ok(Self { bits: Some(bits), entries, seed })
    }

    /// The infinite book: selection returns the ideal BFM unchanged.
    pub fn infinite() -> Self {
        Self { bits: None, entries: Vec::new(), seed: 0 }
    }

    pub fn is_infinite(&self) -> bool {
        self.bits.is_none()
    }

    pub fn bits(&self) -> Option<u32> {
        self.bits
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn entries(&self) -> &[ComplexMatrix] {
        &self.entries
    }
}

fn phase_normalize_columns(m: &mut ComplexMatrix) {
    for j in 0..m.cols() {
        let mut best = 0usize;
        let mut best_mag = 0.0;
        for i in 0..m.rows() {
            let mag = m[(i, j)].norm();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let ph = (m[(best, j)] / best_mag).conj();
            for i in 0..m.rows() {
                m[(i, j)] *= ph;
            }
        }
    }
}

/// Select the codebook entry minimizing || p^H P_d - I ||_F^2, ties broken
/// by lowest index. The infinite book returns p itself with metric zero.
pub fn select_bfm(p: &ComplexMatrix, cb: &BfmCodebook) -> Result<BfmSelection, CodebookError> {
    if cb.is_infinite() {
        return Ok(BfmSelection { index: None, metric: 0.0, matrix: p.clone() });
    }
    if cb.entries.is_empty() {
        return Err(CodebookError::EmptyCodebook);
    }
    let ph = p.hermitian();
    let eye = ComplexMatrix::identity(p.cols());
    let mut best = 0usize;
    let mut best_metric = f64::INFINITY;
    for (d, entry) in cb.entries.iter().enumerate() {
        let metric = ph.mul(entry).sub(&eye).frob_norm().powi(2);
        if metric < best_metric {
            best_metric = metric;
            best = d;
        }
    }
    Ok(BfmSelection { index: Some(best), metric: best_metric, matrix: cb.entries[best].clone() })
}
