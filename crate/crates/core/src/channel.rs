//! Frequency-selective MIMO channel generation and the per-subcarrier
//! frequency-domain view.
//!
//! A realization is a set of i.i.d. Rayleigh taps with an exponential
//! power-delay profile, normalized to unit energy per antenna pair. The
//! frequency-domain matrices `g[q]`, the stacked time-domain matrix `H` and
//! the subcarrier selection matrices `W_q` are all derived views of the same
//! tap tensor and satisfy `g[q] = W_q * H` exactly.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::matdecomp::ComplexMatrix;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChannelError {
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
}

/// Static parameters of the fading model.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelConfig {
    /// Transmit antennas M at the base station.
    pub tx_antennas: usize,
    /// Receive antennas N at the mobile terminal, N >= M.
    pub rx_antennas: usize,
    /// Channel length L in taps.
    pub taps: usize,
    /// Subcarrier count Q, with L <= Q.
    pub subcarriers: usize,
    /// Exponential power-delay-profile decay rate (nepers per tap).
    pub pdp_decay: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.tx_antennas < 1 || self.rx_antennas < 1 {
            return Err("antenna counts must be positive".into());
        }
        if self.tx_antennas > self.rx_antennas {
            return Err("tx_antennas must not exceed rx_antennas".into());
        }
        if self.taps < 1 || self.taps > self.subcarriers {
            return Err("taps must satisfy 1 <= L <= Q".into());
        }
        if !(self.pdp_decay >= 0.0) {
            return Err("pdp_decay must be nonnegative".into());
        }
        Ok(())
    }
}

/// One user's tap tensor for one block, indexed `[m][n][l]`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub cfg: ChannelConfig,
    taps: Vec<Complex64>,
}

impl ChannelRealization {
    #[inline]
    pub fn tap(&self, m: usize, n: usize, l: usize) -> Complex64 {
        self.taps[(m * self.cfg.rx_antennas + n) * self.cfg.taps + l]
    }

    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|z| z.norm_sqr()).sum()
    }
}

/// Per-subcarrier frequency-domain channel: Q matrices of shape N x M.
#[derive(Debug, Clone)]
pub struct FreqChannel {
    pub g: Vec<ComplexMatrix>,
}

/// Per-tap variances of the exponential power-delay profile, normalized so
/// they sum to one.
pub fn tap_variances(taps: usize, pdp_decay: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..taps).map(|l| (-pdp_decay * l as f64).exp()).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|p| p / total).collect()
}

/// Draw one block-static realization: taps i.i.d. circularly-symmetric
/// complex Gaussian across antenna pairs, tap l with variance p_l.
pub fn draw_channel(rng: &mut impl Rng, cfg: &ChannelConfig) -> ChannelRealization {
    let pdp = tap_variances(cfg.taps, cfg.pdp_decay);
    let mut taps = Vec::with_capacity(cfg.tx_antennas * cfg.rx_antennas * cfg.taps);
    for _m in 0..cfg.tx_antennas {
        for _n in 0..cfg.rx_antennas {
            for &p in &pdp {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                taps.push(Complex64::new(re, im) * (p / 2.0).sqrt());
            }
        }
    }
    ChannelRealization { cfg: cfg.clone(), taps }
}

/// First L elements of the i-th column of the Q-point DFT matrix,
/// element l = exp(-j 2 pi l i / Q). Unnormalized.
pub fn dft_column(i: usize, q: usize, l: usize) -> Result<Vec<Complex64>, ChannelError> {
    if i >= q {
        return Err(ChannelError::IndexOutOfRange { index: i, limit: q });
    }
    if l < 1 || l > q {
        return Err(ChannelError::IndexOutOfRange { index: l, limit: q });
    }
    Ok((0..l)
        .map(|ell| {
            let angle = -2.0 * std::f64::consts::PI * ((ell * i) % q) as f64 / q as f64;
            Complex64::new(angle.cos(), angle.sin())
        })
        .collect())
}

/// All Q frequency-domain matrices; entry (n, m) of g[q] is the inner
/// product of the DFT column with the (m, n) tap vector, accumulated in tap
/// order so it reproduces `selection_matrix(q) * stack_channel(ch)` bitwise.
pub fn freq_channel(ch: &ChannelRealization, q: usize) -> FreqChannel {
    let cfg = &ch.cfg;
    let g = (0..q)
        .map(|qi| {
            let e = dft_column(qi, q, cfg.taps).expect("valid subcarrier index");
            ComplexMatrix::from_fn(cfg.rx_antennas, cfg.tx_antennas, |n, m| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (l, &el) in e.iter().enumerate() {
                    acc += el * ch.tap(m, n, l);
                }
                acc
            })
        })
        .collect();
    FreqChannel { g }
}

/// Stacked time-domain matrix H of shape NL x M: rows (n*L)..(n*L + L) of
/// column m hold the tap vector h^{m,n}.
pub fn stack_channel(ch: &ChannelRealization) -> ComplexMatrix {
    let cfg = &ch.cfg;
    ComplexMatrix::from_fn(cfg.rx_antennas * cfg.taps, cfg.tx_antennas, |row, m| {
        let n = row / cfg.taps;
        let l = row % cfg.taps;
        ch.tap(m, n, l)
    })
}

/// Subcarrier selection matrix W_q = I_N (x) e_q^T, shape N x NL.
pub fn selection_matrix(
    q_idx: usize,
    q: usize,
    n: usize,
    l: usize,
) -> Result<ComplexMatrix, ChannelError> {
    let e = dft_column(q_idx, q, l)?;
    let mut w = ComplexMatrix::zeros(n, n * l);
    for b in 0..n {
        for (ell, &el) in e.iter().enumerate() {
            w[(b, b * l + ell)] = el;
        }
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize, l: usize, q: usize, decay: f64) -> ChannelConfig {
        ChannelConfig {
            tx_antennas: m,
            rx_antennas: n,
            taps: l,
            subcarriers: q,
            pdp_decay: decay,
        }
    }

    #[test]
    fn pdp_uniform_when_no_decay() {
        let p = tap_variances(4, 0.0);
        for v in p {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn pdp_exponential_profile() {
        // Closed-form geometric normalization: p_l = e^-l / sum(e^-i).
        let p = tap_variances(4, 1.0);
        let norm: f64 = (0..4).map(|l| (-(l as f64)).exp()).sum();
        for (l, v) in p.iter().enumerate() {
            assert!((v - (-(l as f64)).exp() / norm).abs() < 1e-15);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_tap_energy_normalized() {
        let c = cfg(1, 1, 1, 8, 0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mean: f64 =
            (0..10_000).map(|_| draw_channel(&mut rng, &c).energy()).sum::<f64>() / 10_000.0;
        assert!(mean > 0.97 && mean < 1.03);
    }

    #[test]
    fn dft_column_values() {
        let e = dft_column(0, 8, 4).unwrap();
        for z in &e {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
        let e = dft_column(1, 4, 2).unwrap();
        assert!((e[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((e[1] - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        for z in dft_column(3, 16, 16).unwrap() {
            assert!((z.norm() - 1.0).abs() < 1e-14);
        }
        assert!(dft_column(4, 4, 2).is_err());
    }

    #[test]
    fn flat_channel_constant_over_subcarriers() {
        let c = cfg(2, 2, 1, 8, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ch = draw_channel(&mut rng, &c);
        let fc = freq_channel(&ch, 8);
        for q in 1..8 {
            assert_eq!(fc.g[q], fc.g[0]);
        }
    }

    #[test]
    fn two_point_dft_by_hand() {
        // Taps (1, 1), Q = 2: g[0] = 2, g[1] = 0.
        let c = cfg(1, 1, 2, 2, 0.0);
        let ch = ChannelRealization {
            cfg: c,
            taps: vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)],
        };
        let fc = freq_channel(&ch, 2);
        assert!((fc.g[0][(0, 0)] - Complex64::new(2.0, 0.0)).norm() < 1e-12);
        assert!(fc.g[1][(0, 0)].norm() < 1e-12);
    }

    #[test]
    fn parseval_identity() {
        let c = cfg(2, 2, 4, 16, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = draw_channel(&mut rng, &c);
        let fc = freq_channel(&ch, 16);
        let lhs: f64 = fc.g.iter().map(|g| g.frob_norm().powi(2)).sum();
        let rhs = 16.0 * ch.energy();
        assert!((lhs - rhs).abs() <= 1e-9 * rhs);
    }

    #[test]
    fn kronecker_consistency_bitwise() {
        let c = cfg(2, 2, 4, 8, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let ch = draw_channel(&mut rng, &c);
            let fc = freq_channel(&ch, 8);
            let h = stack_channel(&ch);
            for q in 0..8 {
                let w = selection_matrix(q, 8, 2, 4).unwrap();
                assert_eq!(w.mul(&h), fc.g[q]);
            }
        }
    }

    #[test]
    fn selection_matrix_row_energy() {
        let w = selection_matrix(3, 16, 2, 4).unwrap();
        let gram = w.mul(&w.hermitian());
        for i in 0..2 {
            for j in 0..2 {
                let want = if i == j { 4.0 } else { 0.0 };
                assert!((gram[(i, j)] - Complex64::new(want, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn stacked_norm_matches_tap_energy() {
        let c = cfg(2, 2, 4, 8, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let ch = draw_channel(&mut rng, &c);
        let h = stack_channel(&ch);
        assert!((h.frob_norm().powi(2) - ch.energy()).abs() < 1e-12);
    }

    #[test]
    fn unit_energy_statistics() {
        let c = cfg(2, 2, 4, 8, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut acc = 0.0;
        let draws = 10_000;
        for _ in 0..draws {
            let ch = draw_channel(&mut rng, &c);
            let fc = freq_channel(&ch, 8);
            acc += fc.g[3].frob_norm().powi(2) / 4.0;
        }
        let mean = acc / draws as f64;
        assert!(mean > 0.95 && mean < 1.05, "mean {mean}");
    }
}
