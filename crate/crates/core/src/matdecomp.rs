//! Deterministic complex-matrix factorizations: SVD, economy QR and the
//! geometric mean decomposition (GMD).
//!
//! All routines are pure functions of their input bytes: repeated calls on
//! the same matrix return bit-identical factors. Sign conventions are fixed
//! (QR diagonals real nonnegative, SVD right singular vectors phase-rotated
//! so their largest-magnitude entry is real positive) so downstream code can
//! rely on reproducible factors.

use num_complex::Complex64;
use thiserror::Error;

/// Relative reconstruction tolerance guaranteed by the factorizations.
pub const TOL_RECON: f64 = 1e-10;
/// Relative unitarity tolerance guaranteed by the factorizations.
pub const TOL_UNITARY: f64 = 1e-10;
/// Relative tolerance on the equal-diagonal property of the GMD.
pub const TOL_GMD: f64 = 1e-9;
/// Relative pivot threshold below which a matrix is treated as rank deficient.
pub const RANK_TOL: f64 = 1e-12;
/// Maximum number of one-sided Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 60;
/// Relative off-Gramian threshold at which a Jacobi rotation is skipped.
const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecompError {
    /// The Jacobi iteration failed to converge within [`MAX_SWEEPS`] sweeps.
    #[error("SVD iteration did not converge within {0} sweeps")]
    NonConvergence(usize),
    /// A zero pivot (relative to the matrix scale) was met; the input is
    /// numerically rank deficient and should be rejected by the caller.
    #[error("matrix is numerically rank deficient")]
    RankDeficient,
}

/// Dense complex matrix in row-major order. The substrate for every channel
/// matrix, beamforming matrix and factorization in this crate.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert!(rows >= 1 && cols >= 1, "matrix dimensions must be positive");
        assert_eq!(data.len(), rows * cols, "data length mismatch");
        Self { rows, cols, data }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::new(rows, cols, vec![Complex64::new(0.0, 0.0); rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
    }

    /// Convenience constructor for a square diagonal matrix with real entries.
    pub fn diag(entries: &[f64]) -> Self {
        let n = entries.len();
        Self::from_fn(n, n, |i, j| {
            if i == j {
                Complex64::new(entries[i], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Matrix product, inner index iterated in ascending order so that the
    /// accumulation order is reproducible.
    pub fn mul(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch in mul");
        let mut out = ComplexMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for u in 0..self.cols {
                    acc += self[(i, u)] * other[(u, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len(), "dimension mismatch in mul_vec");
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = Complex64::new(0.0, 0.0);
            for u in 0..self.cols {
                acc += self[(i, u)] * x[u];
            }
            out.push(acc);
        }
        out
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn sub(&self, other: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, c: Complex64) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)] * c)
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    /// Keep the first `k` columns.
    pub fn take_columns(&self, k: usize) -> ComplexMatrix {
        assert!(k >= 1 && k <= self.cols);
        ComplexMatrix::from_fn(self.rows, k, |i, j| self[(i, j)])
    }

    /// Largest entry magnitude of `self^H self - I`; the unitarity residual
    /// used in tests and invariant checks.
    pub fn unitarity_residual(&self) -> f64 {
        let gram = self.hermitian().mul(self);
        gram.sub(&ComplexMatrix::identity(self.cols)).frob_norm()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl std::ops::Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Singular value decomposition `a = u * diag(s) * v^H` with `u` square
/// unitary, `s` sorted descending and `v` square unitary.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub u: ComplexMatrix,
    pub s: Vec<f64>,
    pub v: ComplexMatrix,
}

/// Economy QR factors: `q` with orthonormal columns, `r` upper triangular
/// with real nonnegative diagonal.
#[derive(Debug, Clone)]
pub struct QrFactors {
    pub q: ComplexMatrix,
    pub r: ComplexMatrix,
}

/// Geometric mean decomposition factors `a = b * e * p^H`: `b` with
/// orthonormal columns, `e` real upper triangular with equal diagonal
/// entries, `p` unitary.
#[derive(Debug, Clone)]
pub struct GmdFactors {
    pub b: ComplexMatrix,
    pub e: ComplexMatrix,
    pub p: ComplexMatrix,
}

impl SvdFactors {
    /// Reconstruct `u * diag(s) * v^H`.
    pub fn reconstruct(&self) -> ComplexMatrix {
        let n = self.u.rows();
        let m = self.v.rows();
        let mut sigma = ComplexMatrix::zeros(n, m);
        for (i, &s) in self.s.iter().enumerate() {
            sigma[(i, i)] = Complex64::new(s, 0.0);
        }
        self.u.mul(&sigma).mul(&self.v.hermitian())
    }
}

impl GmdFactors {
    pub fn reconstruct(&self) -> ComplexMatrix {
        self.b.mul(&self.e).mul(&self.p.hermitian())
    }
}

/// One-sided Jacobi SVD of a tall matrix (`rows >= cols`).
///
/// The sweep order over column pairs is fixed, so the result is a pure
/// function of the input bytes. Right singular vectors are phase-normalized
/// so the largest-magnitude entry of each column of `v` is real positive,
/// with the matching phase folded into the columns of `u`.
pub fn svd(a: &ComplexMatrix) -> Result<SvdFactors, DecompError> {
    let n = a.rows();
    let m = a.cols();
    assert!(n >= m, "svd requires rows >= cols; transpose the input");
    assert!(a.is_finite(), "svd input must be finite");

    // Columns of `w` converge to u_i * s_i; `v` accumulates the rotations.
    let mut w = a.clone();
    let mut v = ComplexMatrix::identity(m);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    app += wp.norm_sqr();
                    aqq += wq.norm_sqr();
                    apq += wp.conj() * wq;
                }
                let off = apq.norm();
                if off <= JACOBI_TOL * (app * aqq).sqrt() || off == 0.0 {
                    continue;
                }
                rotated = true;
                // Phase-rotate column q so the Gramian cross term is real,
                // then apply a real Jacobi rotation to the pair.
                let phase = apq / off;
                let zeta = (aqq - app) / (2.0 * off);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let ph = phase.conj();
                for i in 0..n {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)] * ph;
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..m {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)] * ph;
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(DecompError::NonConvergence(MAX_SWEEPS));
    }

    // Column norms are the singular values; sort descending (stable).
    let norms: Vec<f64> = (0..m)
        .map(|j| (0..n).map(|i| w[(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&x, &y| norms[y].partial_cmp(&norms[x]).unwrap().then(x.cmp(&y)));

    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let s_max = s.first().copied().unwrap_or(0.0);

    let mut v_sorted = ComplexMatrix::from_fn(m, m, |i, j| v[(i, order[j])]);
    let mut u_cols: Vec<Option<Vec<Complex64>>> = Vec::with_capacity(m);
    for (j, &src) in order.iter().enumerate() {
        if s[j] > RANK_TOL * s_max && s[j] > 0.0 {
            let col: Vec<Complex64> = (0..n).map(|i| w[(i, src)] / s[j]).collect();
            u_cols.push(Some(col));
        } else {
            // Numerically null direction; filled in during basis completion.
            u_cols.push(None);
        }
    }

    // Phase convention: largest-magnitude entry of each right singular
    // vector real positive; the conjugate phase multiplies both u_j and v_j
    // so the product u * diag(s) * v^H is unchanged.
    for j in 0..m {
        let mut best = 0usize;
        let mut best_mag = 0.0;
        for i in 0..m {
            let mag = v_sorted[(i, j)].norm();
            if mag > best_mag {
                best_mag = mag;
                best = i;
            }
        }
        if best_mag > 0.0 {
            let ph = (v_sorted[(best, j)] / best_mag).conj();
            for i in 0..m {
                v_sorted[(i, j)] *= ph;
            }
            if let Some(col) = &mut u_cols[j] {
                for z in col.iter_mut() {
                    *z *= ph;
                }
            }
        }
    }

    let u = complete_unitary(n, &u_cols);
    Ok(SvdFactors { u, s, v: v_sorted })
}

/// Build an n x n unitary matrix whose leading columns are the supplied
/// orthonormal vectors; missing columns are filled from the standard basis
/// by (repeated) Gram-Schmidt. Deterministic.
fn complete_unitary(n: usize, known: &[Option<Vec<Complex64>>]) -> ComplexMatrix {
    let mut cols: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut slots: Vec<usize> = Vec::new(); // destination column index per entry of `cols`
    for (j, c) in known.iter().enumerate() {
        if let Some(c) = c {
            cols.push(c.clone());
            slots.push(j);
        }
    }
    let mut missing: Vec<usize> = known
        .iter()
        .enumerate()
        .filter(|(_, c)| c.is_none())
        .map(|(j, _)| j)
        .collect();
    missing.extend(known.len()..n);

    let mut cand = 0usize;
    for slot in missing {
        loop {
            assert!(cand < n, "basis completion exhausted candidates");
            let mut v: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(if i == cand { 1.0 } else { 0.0 }, 0.0))
                .collect();
            cand += 1;
            for _ in 0..2 {
                for c in &cols {
                    let mut dot = Complex64::new(0.0, 0.0);
                    for i in 0..n {
                        dot += c[i].conj() * v[i];
                    }
                    for i in 0..n {
                        v[i] -= dot * c[i];
                    }
                }
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if norm > 0.5 {
                for z in v.iter_mut() {
                    *z /= norm;
                }
                cols.push(v);
                slots.push(slot);
                break;
            }
        }
    }
    let mut u = ComplexMatrix::zeros(n, n);
    for (c, &slot) in cols.iter().zip(slots.iter()) {
        for i in 0..n {
            u[(i, slot)] = c[i];
        }
    }
    u
}

/// Economy QR via modified Gram-Schmidt with one reorthogonalization pass.
/// The diagonal of `r` is real nonnegative by construction; entries below
/// the diagonal are exactly zero.
pub fn qr_economy(a: &ComplexMatrix) -> Result<QrFactors, DecompError> {
    let n = a.rows();
    let m = a.cols();
    assert!(n >= m, "qr_economy requires rows >= cols");
    assert!(a.is_finite(), "qr_economy input must be finite");

    let scale = a.frob_norm();
    if scale == 0.0 {
        return Err(DecompError::RankDeficient);
    }
    let mut q = ComplexMatrix::zeros(n, m);
    let mut r = ComplexMatrix::zeros(m, m);
    for k in 0..m {
        let mut v = a.column(k);
        for _pass in 0..2 {
            for j in 0..k {
                let mut dot = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    dot += q[(i, j)].conj() * v[i];
                }
                r[(j, k)] += dot;
                for i in 0..n {
                    v[i] -= dot * q[(i, j)];
                }
            }
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm <= RANK_TOL * scale {
            return Err(DecompError::RankDeficient);
        }
        r[(k, k)] = Complex64::new(norm, 0.0);
        for i in 0..n {
            q[(i, k)] = v[i] / norm;
        }
    }
    Ok(QrFactors { q, r })
}

/// Geometric mean decomposition `a = b * e * p^H`.
///
/// Starts from the SVD and equalizes the diagonal with a deterministic
/// sequence of symmetric permutations and real Givens rotation pairs: at
/// step k the diagonal pair is permuted to bracket the geometric mean of
/// the singular values, then one left and one right rotation produce
/// exactly that value at position k.
pub fn gmd(a: &ComplexMatrix) -> Result<GmdFactors, DecompError> {
    let m = a.cols();
    let SvdFactors { u, s, v } = svd(a)?;
    let s_max = s[0];
    if s_max == 0.0 || s[m - 1] <= RANK_TOL * s_max {
        return Err(DecompError::RankDeficient);
    }
    let sbar = (s.iter().map(|x| x.ln()).sum::<f64>() / m as f64).exp();

    let mut b = u.take_columns(m);
    let mut p = v;
    // E stays real throughout; kept as a real buffer.
    let mut e = vec![0.0f64; m * m];
    for i in 0..m {
        e[i * m + i] = s[i];
    }

    for k in 0..m.saturating_sub(1) {
        let dk = e[k * m + k];
        // Pick a partner on the other side of the geometric mean and move
        // it next to position k. The product of the remaining diagonal is
        // sbar^(m-k), so a bracketing partner always exists.
        let j = if dk >= sbar {
            ((k + 1)..m).min_by(|&x, &y| e[x * m + x].partial_cmp(&e[y * m + y]).unwrap()).unwrap()
        } else {
            ((k + 1)..m).max_by(|&x, &y| e[x * m + x].partial_cmp(&e[y * m + y]).unwrap()).unwrap()
        };
        if j != k + 1 {
            for col in 0..m {
                e.swap((k + 1) * m + col, j * m + col);
            }
            for row in 0..m {
                e.swap(row * m + (k + 1), row * m + j);
            }
            swap_columns(&mut b, k + 1, j);
            swap_columns(&mut p, k + 1, j);
        }

        let d1 = e[k * m + k];
        let d2 = e[(k + 1) * m + (k + 1)];
        let (c, sn, c1, s1) = if (d1 - d2).abs() <= 1e-14 * sbar {
            (1.0, 0.0, 1.0, 0.0)
        } else {
            let c2 = ((sbar * sbar - d2 * d2) / (d1 * d1 - d2 * d2)).clamp(0.0, 1.0);
            let c = c2.sqrt();
            let sn = (1.0 - c2).sqrt();
            (c, sn, c * d1 / sbar, sn * d2 / sbar)
        };

        // Right rotation on columns (k, k+1) of E, mirrored on P.
        for row in 0..m {
            let a0 = e[row * m + k];
            let a1 = e[row * m + (k + 1)];
            e[row * m + k] = c * a0 + sn * a1;
            e[row * m + (k + 1)] = -sn * a0 + c * a1;
        }
        rotate_columns(&mut p, k, k + 1, c, sn);
        // Left rotation on rows (k, k+1) of E, mirrored on B.
        for col in 0..m {
            let a0 = e[k * m + col];
            let a1 = e[(k + 1) * m + col];
            e[k * m + col] = c1 * a0 + s1 * a1;
            e[(k + 1) * m + col] = -s1 * a0 + c1 * a1;
        }
        rotate_columns(&mut b, k, k + 1, c1, s1);
        // Zero by construction; enforce exactly.
        e[(k + 1) * m + k] = 0.0;
    }

    let e_mat = ComplexMatrix::from_fn(m, m, |i, j| {
        if i > j {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(e[i * m + j], 0.0)
        }
    });
    Ok(GmdFactors { b, e: e_mat, p })
}

fn swap_columns(m: &mut ComplexMatrix, a: usize, b: usize) {
    for i in 0..m.rows() {
        let t = m[(i, a)];
        m[(i, a)] = m[(i, b)];
        m[(i, b)] = t;
    }
}

/// Post-multiply by the real Givens rotation [[c, -s], [s, c]] acting on
/// columns (a, b): col_a <- c*col_a + s*col_b, col_b <- -s*col_a + c*col_b.
fn rotate_columns(m: &mut ComplexMatrix, a: usize, b: usize, c: f64, s: f64) {
    for i in 0..m.rows() {
        let x = m[(i, a)];
        let y = m[(i, b)];
        m[(i, a)] = c * x + s * y;
        m[(i, b)] = -s * x + c * y;
    }
}
