//! Terminal-side computation for the five scheduling and beamforming
//! schemes: channel decomposition, feedback payload, and the realized
//! per-subcarrier triangular link given the BFM the base station will
//! actually apply.
//!
//! All reported rates are computed on the realized link with the quantized
//! BFM, so the scheduler always sees truthful rates and quantization loss is
//! reflected in the feedback.

use thiserror::Error;

use crate::channel::FreqChannel;
use crate::codebook::{select_bfm, BfmCodebook, CodebookError};
use crate::matdecomp::{gmd, qr_economy, svd, ComplexMatrix, DecompError};
use crate::scheduler::{feedback_cost, DEFAULT_BITS_PER_SCALAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SchemeId {
    PsEb,
    PcEb,
    PsQrd,
    PsGmd,
    PcGmd,
}

impl SchemeId {
    pub fn is_per_cluster(self) -> bool {
        matches!(self, SchemeId::PcEb | SchemeId::PcGmd)
    }

    pub fn name(self) -> &'static str {
        match self {
            SchemeId::PsEb => "ps-eb",
            SchemeId::PcEb => "pc-eb",
            SchemeId::PsQrd => "ps-qrd",
            SchemeId::PsGmd => "ps-gmd",
            SchemeId::PcGmd => "pc-gmd",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ps-eb" => Some(SchemeId::PsEb),
            "pc-eb" => Some(SchemeId::PcEb),
            "ps-qrd" => Some(SchemeId::PsQrd),
            "ps-gmd" => Some(SchemeId::PsGmd),
            "pc-gmd" => Some(SchemeId::PcGmd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Codebook(#[from] CodebookError),
    #[error("cluster plan inconsistent with subcarrier count")]
    InvalidPlan,
}

/// One terminal's per-scheme feedback payload.
#[derive(Debug, Clone)]
pub struct FeedbackReport {
    pub scheme: SchemeId,
    /// Codebook indices: Q entries for PS-EB, G for PC-EB, one for the
    /// stacked-channel schemes. `None` marks the infinite codebook.
    pub bfm_indices: Vec<Option<usize>>,
    /// Realized rates in bits/s/Hz: per subcarrier or per cluster.
    pub rate_scalars: Vec<f64>,
    /// Uplink cost of this report at the default scalar width.
    pub bit_cost: u64,
}

/// The realized link on one subcarrier: receive combiner, equivalent upper
/// triangular channel, and the operating SNR.
#[derive(Debug, Clone)]
pub struct EffectiveLink {
    /// N x M with orthonormal columns; pre-multiplying by its Hermitian
    /// preserves white noise statistics.
    pub combiner: ComplexMatrix,
    /// M x M upper triangular with real nonnegative diagonal.
    pub triangular: ComplexMatrix,
    /// Average SNR (linear).
    pub snr: f64,
}

/// Partition of the Q subcarriers into G contiguous clusters of U each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterPlan {
    pub clusters: usize,
    pub cluster_size: usize,
}

impl ClusterPlan {
    pub fn new(subcarriers: usize, clusters: usize) -> Result<Self, SchemeError> {
        if clusters == 0 || subcarriers % clusters != 0 {
            return Err(SchemeError::InvalidPlan);
        }
        Ok(Self { clusters, cluster_size: subcarriers / clusters })
    }

    pub fn subcarriers(&self) -> usize {
        self.clusters * self.cluster_size
    }

    /// Subcarrier indices of cluster g.
    pub fn indices(&self, g: usize) -> std::ops::Range<usize> {
        g * self.cluster_size..(g + 1) * self.cluster_size
    }

    /// Center subcarrier of cluster g (position ceil(U/2) within it).
    pub fn center(&self, g: usize) -> usize {
        g * self.cluster_size + self.cluster_size.div_ceil(2) - 1
    }
}

/// Full per-scheme output: the feedback payload plus the realized link on
/// every subcarrier, for use by the link-level simulation.
#[derive(Debug, Clone)]
pub struct SchemeOutput {
    pub report: FeedbackReport,
    pub links: Vec<EffectiveLink>,
}

/// Equivalent triangular link for a subcarrier channel under a given BFM:
/// the economy QR of g_q * bfm.
pub fn realized_link(
    g_q: &ComplexMatrix,
    applied_bfm: &ComplexMatrix,
    rho: f64,
) -> Result<EffectiveLink, SchemeError> {
    let f = qr_economy(&g_q.mul(applied_bfm))?;
    Ok(EffectiveLink { combiner: f.q, triangular: f.r, snr: rho })
}

/// Supportable throughput of a triangular link:
/// sum over streams of log2(1 + rho |r_mm|^2).
pub fn throughput_from_r(triangular: &ComplexMatrix, rho: f64) -> f64 {
    (0..triangular.rows())
        .map(|i| (1.0 + rho * triangular[(i, i)].norm_sqr()).log2())
        .sum()
}

fn cb_bits(cb: &BfmCodebook) -> u32 {
    cb.bits().unwrap_or(0)
}

/// PS-EB: per-subcarrier SVD, per-subcarrier quantized BFM.
pub fn ps_eb_report(
    fc: &FreqChannel,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    let q = fc.g.len();
    let m = fc.g[0].cols();
    let mut indices = Vec::with_capacity(q);
    let mut rates = Vec::with_capacity(q);
    let mut links = Vec::with_capacity(q);
    for g_q in &fc.g {
        let f = svd(g_q)?;
        let sel = select_bfm(&f.v, cb)?;
        let link = realized_link(g_q, &sel.matrix, rho)?;
        indices.push(sel.index);
        rates.push(throughput_from_r(&link.triangular, rho));
        links.push(link);
    }
    let cost = feedback_cost(SchemeId::PsEb, q, q, cb_bits(cb), DEFAULT_BITS_PER_SCALAR, m)
        .expect("valid plan")
        .total_bits;
    Ok(SchemeOutput {
        report: FeedbackReport {
            scheme: SchemeId::PsEb,
            bfm_indices: indices,
            rate_scalars: rates,
            bit_cost: cost,
        },
        links,
    })
}

/// PC-EB: one quantized BFM per cluster, taken from the SVD of the
/// cluster's center subcarrier and applied across the whole cluster.
pub fn pc_eb_report(
    fc: &FreqChannel,
    plan: &ClusterPlan,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    let q = fc.g.len();
    if plan.subcarriers() != q {
        return Err(SchemeError::InvalidPlan);
    }
    let m = fc.g[0].cols();
    let mut indices = Vec::with_capacity(plan.clusters);
    let mut rates = Vec::with_capacity(plan.clusters);
    let mut links = Vec::with_capacity(q);
    for g in 0..plan.clusters {
        let f = svd(&fc.g[plan.center(g)])?;
        let sel = select_bfm(&f.v, cb)?;
        let mut acc = 0.0;
        for qi in plan.indices(g) {
            let link = realized_link(&fc.g[qi], &sel.matrix, rho)?;
            acc += throughput_from_r(&link.triangular, rho);
            links.push(link);
        }
        indices.push(sel.index);
        rates.push(acc / plan.cluster_size as f64);
    }
    let cost =
        feedback_cost(SchemeId::PcEb, q, plan.clusters, cb_bits(cb), DEFAULT_BITS_PER_SCALAR, m)
            .expect("valid plan")
            .total_bits;
    Ok(SchemeOutput {
        report: FeedbackReport {
            scheme: SchemeId::PcEb,
            bfm_indices: indices,
            rate_scalars: rates,
            bit_cost: cost,
        },
        links,
    })
}

/// PS-GMD: one GMD of the stacked channel, a single quantized BFM for all
/// subcarriers, per-subcarrier triangular links by QR.
pub fn ps_gmd_report(
    h: &ComplexMatrix,
    fc: &FreqChannel,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    let f = gmd(h)?;
    stacked_bfm_report(SchemeId::PsGmd, &f.p, fc, rho, cb)
}

/// PS-QRD: SVD of the stacked channel, its right singular matrix as the
/// single BFM, per-subcarrier triangular links by QR.
pub fn ps_qrd_report(
    h: &ComplexMatrix,
    fc: &FreqChannel,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    let f = svd(h)?;
    stacked_bfm_report(SchemeId::PsQrd, &f.v, fc, rho, cb)
}

fn stacked_bfm_report(
    scheme: SchemeId,
    bfm: &ComplexMatrix,
    fc: &FreqChannel,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    let q = fc.g.len();
    let m = fc.g[0].cols();
    let sel = select_bfm(bfm, cb)?;
    let mut rates = Vec::with_capacity(q);
    let mut links = Vec::with_capacity(q);
    for g_q in &fc.g {
        let link = realized_link(g_q, &sel.matrix, rho)?;
        rates.push(throughput_from_r(&link.triangular, rho));
        links.push(link);
    }
    let cost = feedback_cost(scheme, q, q, cb_bits(cb), DEFAULT_BITS_PER_SCALAR, m)
        .expect("valid plan")
        .total_bits;
    Ok(SchemeOutput {
        report: FeedbackReport {
            scheme,
            bfm_indices: vec![sel.index],
            rate_scalars: rates,
            bit_cost: cost,
        },
        links,
    })
}

/// PC-GMD: same single BFM as PS-GMD, rates averaged over clusters.
pub fn pc_gmd_report(
    h: &ComplexMatrix,
    fc: &FreqChannel,
    plan: &ClusterPlan,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    if plan.subcarriers() != fc.g.len() {
        return Err(SchemeError::InvalidPlan);
    }
    let ps = ps_gmd_report(h, fc, rho, cb)?;
    let m = fc.g[0].cols();
    let rates: Vec<f64> = (0..plan.clusters)
        .map(|g| {
            plan.indices(g).map(|qi| ps.report.rate_scalars[qi]).sum::<f64>()
                / plan.cluster_size as f64
        })
        .collect();
    let cost = feedback_cost(
        SchemeId::PcGmd,
        fc.g.len(),
        plan.clusters,
        cb_bits(cb),
        DEFAULT_BITS_PER_SCALAR,
        m,
    )
    .expect("valid plan")
    .total_bits;
    Ok(SchemeOutput {
        report: FeedbackReport {
            scheme: SchemeId::PcGmd,
            bfm_indices: ps.report.bfm_indices,
            rate_scalars: rates,
            bit_cost: cost,
        },
        links: ps.links,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_channel, freq_channel, stack_channel, ChannelConfig};
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize, l: usize, q: usize) -> ChannelConfig {
        ChannelConfig {
            tx_antennas: m,
            rx_antennas: n,
            taps: l,
            subcarriers: q,
            pdp_decay: 0.5,
        }
    }

    fn draw(seed: u64, c: &ChannelConfig) -> (crate::channel::FreqChannel, ComplexMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel(&mut rng, c);
        let fc = freq_channel(&ch, c.subcarriers);
        let h = stack_channel(&ch);
        (fc, h)
    }

    #[test]
    fn throughput_values() {
        let t = ComplexMatrix::diag(&[1.0, 1.0]);
        assert!((throughput_from_r(&t, 1.0) - 2.0).abs() < 1e-12);
        let t = ComplexMatrix::diag(&[2.0, 2.0]);
        assert!((throughput_from_r(&t, 3.0) - 2.0 * 13f64.log2()).abs() < 1e-12);
        assert!(throughput_from_r(&t, 1e-15) < 1e-12);
    }

    #[test]
    fn realized_link_identity() {
        let eye = ComplexMatrix::identity(2);
        let link = realized_link(&eye, &eye, 1.0).unwrap();
        assert!(link.triangular.sub(&eye).frob_norm() < 1e-12);
    }

    #[test]
    fn realized_link_is_definitional_qr() {
        let c = cfg(2, 2, 4, 8);
        let (fc, _) = draw(31, &c);
        let bfm = BfmCodebook::generate(2, 2, 9).unwrap().entries()[1].clone();
        let link = realized_link(&fc.g[3], &bfm, 10.0).unwrap();
        let lhs = link.combiner.hermitian().mul(&fc.g[3].mul(&bfm));
        assert!(lhs.sub(&link.triangular).frob_norm() <= 1e-10);
    }

    #[test]
    fn ps_eb_single_stream_rate() {
        let c = cfg(1, 2, 2, 4);
        let (fc, _) = draw(5, &c);
        let out = ps_eb_report(&fc, 7.0, &BfmCodebook::infinite()).unwrap();
        for (q, rate) in out.report.rate_scalars.iter().enumerate() {
            let want = (1.0 + 7.0 * fc.g[q].frob_norm().powi(2)).log2();
            assert!((rate - want).abs() < 1e-10);
        }
    }

    #[test]
    fn ps_eb_infinite_matches_eigenrates() {
        let c = cfg(2, 2, 4, 8);
        let (fc, _) = draw(17, &c);
        let rho = 5.0;
        let out = ps_eb_report(&fc, rho, &BfmCodebook::infinite()).unwrap();
        for (q, rate) in out.report.rate_scalars.iter().enumerate() {
            let sv = svd(&fc.g[q]).unwrap().s;
            let want: f64 = sv.iter().map(|l| (1.0 + rho * l * l).log2()).sum();
            assert!((rate - want).abs() < 1e-9);
        }
    }

    #[test]
    fn quantized_rate_bounded_by_ideal() {
        let c = cfg(2, 2, 4, 4);
        let (fc, _) = draw(23, &c);
        let rho = 5.0;
        let ideal = ps_eb_report(&fc, rho, &BfmCodebook::infinite()).unwrap();
        let cb = BfmCodebook::generate(3, 2, 77).unwrap();
        let quant = ps_eb_report(&fc, rho, &cb).unwrap();
        for q in 0..4 {
            assert!(quant.report.rate_scalars[q] <= ideal.report.rate_scalars[q] + 1e-12);
        }
    }

    #[test]
    fn pc_eb_degenerate_cluster_matches_ps_eb() {
        let c = cfg(2, 2, 4, 8);
        let (fc, _) = draw(41, &c);
        let plan = ClusterPlan::new(8, 8).unwrap();
        let cb = BfmCodebook::generate(2, 2, 3).unwrap();
        let pc = pc_eb_report(&fc, &plan, 5.0, &cb).unwrap();
        let ps = ps_eb_report(&fc, 5.0, &cb).unwrap();
        for q in 0..8 {
            assert!((pc.report.rate_scalars[q] - ps.report.rate_scalars[q]).abs() < 1e-12);
            assert_eq!(pc.report.bfm_indices[q], ps.report.bfm_indices[q]);
        }
    }

    #[test]
    fn pc_eb_flat_channel_matches_ps_eb() {
        let c = cfg(2, 2, 1, 8);
        let (fc, _) = draw(43, &c);
        let plan = ClusterPlan::new(8, 2).unwrap();
        let cb = BfmCodebook::infinite();
        let pc = pc_eb_report(&fc, &plan, 5.0, &cb).unwrap();
        let ps = ps_eb_report(&fc, 5.0, &cb).unwrap();
        let ps_mean: f64 = ps.report.rate_scalars.iter().sum::<f64>() / 8.0;
        for rate in &pc.report.rate_scalars {
            assert!((rate - ps_mean).abs() < 1e-9);
        }
    }

    #[test]
    fn pc_eb_clustering_loses_rate() {
        let c = cfg(2, 2, 4, 32);
        let rho = 5.0;
        let plan = ClusterPlan::new(32, 1).unwrap();
        let cb = BfmCodebook::infinite();
        for seed in 0..10 {
            let (fc, _) = draw(100 + seed, &c);
            let pc = pc_eb_report(&fc, &plan, rho, &cb).unwrap();
            let ps = ps_eb_report(&fc, rho, &cb).unwrap();
            let ps_mean: f64 = ps.report.rate_scalars.iter().sum::<f64>() / 32.0;
            assert!(pc.report.rate_scalars[0] <= ps_mean + 1e-12);
        }
    }

    #[test]
    fn gmd_determinant_identity_per_subcarrier() {
        let c = cfg(2, 2, 4, 8);
        let (fc, h) = draw(53, &c);
        let out = ps_gmd_report(&h, &fc, 5.0, &BfmCodebook::infinite()).unwrap();
        for q in 0..8 {
            let prod_r: f64 = (0..2).map(|i| out.links[q].triangular[(i, i)].norm()).product();
            let prod_s: f64 = svd(&fc.g[q]).unwrap().s.iter().product();
            assert!((prod_r - prod_s).abs() <= 1e-9 * prod_s);
        }
    }

    #[test]
    fn gmd_rate_dominated_by_eb_and_asymptotically_tight() {
        let c = cfg(2, 2, 4, 8);
        let (fc, h) = draw(59, &c);
        for &rho in &[10.0, 1e3] {
            let gmd_out = ps_gmd_report(&h, &fc, rho, &BfmCodebook::infinite()).unwrap();
            let eb_out = ps_eb_report(&fc, rho, &BfmCodebook::infinite()).unwrap();
            for q in 0..8 {
                assert!(
                    gmd_out.report.rate_scalars[q] <= eb_out.report.rate_scalars[q] + 1e-12
                );
            }
        }
        let gmd_out = ps_gmd_report(&h, &fc, 1e6, &BfmCodebook::infinite()).unwrap();
        let eb_out = ps_eb_report(&fc, 1e6, &BfmCodebook::infinite()).unwrap();
        for q in 0..8 {
            let ratio = gmd_out.report.rate_scalars[q] / eb_out.report.rate_scalars[q];
            assert!(ratio > 0.99 && ratio <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn qrd_determinant_identity_matches_gmd() {
        let c = cfg(2, 2, 4, 8);
        let (fc, h) = draw(61, &c);
        let cb = BfmCodebook::infinite();
        let gmd_out = ps_gmd_report(&h, &fc, 5.0, &cb).unwrap();
        let qrd_out = ps_qrd_report(&h, &fc, 5.0, &cb).unwrap();
        for q in 0..8 {
            let pg: f64 = (0..2).map(|i| gmd_out.links[q].triangular[(i, i)].norm()).product();
            let pq: f64 = (0..2).map(|i| qrd_out.links[q].triangular[(i, i)].norm()).product();
            assert!((pg - pq).abs() <= 1e-9 * pg);
        }
    }

    #[test]
    fn qrd_flat_channel_matches_eb() {
        let c = cfg(2, 2, 1, 4);
        let (fc, h) = draw(67, &c);
        let cb = BfmCodebook::infinite();
        let qrd_out = ps_qrd_report(&h, &fc, 5.0, &cb).unwrap();
        let eb_out = ps_eb_report(&fc, 5.0, &cb).unwrap();
        for q in 0..4 {
            assert!((qrd_out.report.rate_scalars[q] - eb_out.report.rate_scalars[q]).abs() < 1e-9);
        }
    }

    #[test]
    fn gmd_diagonals_more_even_than_qrd() {
        // The GMD link's diagonal spread should be smaller on average.
        let c = cfg(2, 2, 4, 4);
        let cb = BfmCodebook::infinite();
        let mut var_gmd = 0.0;
        let mut var_qrd = 0.0;
        for seed in 0..500 {
            let (fc, h) = draw(1000 + seed, &c);
            let g = ps_gmd_report(&h, &fc, 5.0, &cb).unwrap();
            let s = ps_qrd_report(&h, &fc, 5.0, &cb).unwrap();
            for q in 0..4 {
                var_gmd += diag_variance(&g.links[q].triangular);
                var_qrd += diag_variance(&s.links[q].triangular);
            }
        }
        assert!(var_gmd < var_qrd, "gmd {var_gmd} vs qrd {var_qrd}");
    }

    fn diag_variance(t: &ComplexMatrix) -> f64 {
        let m = t.rows();
        let d: Vec<f64> = (0..m).map(|i| t[(i, i)].norm()).collect();
        let mean = d.iter().sum::<f64>() / m as f64;
        d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m as f64
    }

    #[test]
    fn pc_gmd_averaging_identity() {
        let c = cfg(2, 2, 4, 8);
        let (fc, h) = draw(71, &c);
        let plan = ClusterPlan::new(8, 2).unwrap();
        let cb = BfmCodebook::infinite();
        let ps = ps_gmd_report(&h, &fc, 5.0, &cb).unwrap();
        let pc = pc_gmd_report(&h, &fc, &plan, 5.0, &cb).unwrap();
        let total_pc: f64 = pc.report.rate_scalars.iter().map(|r| r * 4.0).sum();
        let total_ps: f64 = ps.report.rate_scalars.iter().sum();
        assert!((total_pc - total_ps).abs() < 1e-12 * total_ps.max(1.0));
        // Degenerate clustering reproduces the per-subcarrier report.
        let plan1 = ClusterPlan::new(8, 8).unwrap();
        let pc1 = pc_gmd_report(&h, &fc, &plan1, 5.0, &cb).unwrap();
        for q in 0..8 {
            assert!((pc1.report.rate_scalars[q] - ps.report.rate_scalars[q]).abs() < 1e-12);
        }
    }

    #[test]
    fn noise_whiteness_after_combining() {
        use rand::Rng;
        use rand_distr::StandardNormal;
        let c = cfg(2, 2, 4, 4);
        let (fc, _) = draw(73, &c);
        let link = realized_link(&fc.g[0], &ComplexMatrix::identity(2), 1.0).unwrap();
        let wh = link.combiner.hermitian();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut cov = [[Complex64::new(0.0, 0.0); 2]; 2];
        let draws = 100_000;
        for _ in 0..draws {
            let w: Vec<Complex64> = (0..2)
                .map(|_| {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    Complex64::new(re, im) / 2f64.sqrt()
                })
                .collect();
            let z = wh.mul_vec(&w);
            for i in 0..2 {
                for j in 0..2 {
                    cov[i][j] += z[i] * z[j].conj();
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let c = cov[i][j] / draws as f64;
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((c - Complex64::new(want, 0.0)).norm() < 0.02);
            }
        }
    }

    #[test]
    fn cluster_plan_shapes() {
        let plan = ClusterPlan::new(64, 8).unwrap();
        assert_eq!(plan.cluster_size, 8);
        assert_eq!(plan.indices(2), 16..24);
        assert_eq!(plan.center(0), 3);
        assert!(ClusterPlan::new(64, 5).is_err());
        let p1 = ClusterPlan::new(4, 4).unwrap();
        assert_eq!(p1.center(1), 1);
    }
}
