//! Base-station side opportunistic allocation and feedback bit accounting.
//!
//! Scheduling is max-rate per subcarrier (or per cluster); with homogeneous
//! terminals this is also fair in the long run. The bit ledger makes the
//! feedback claims of the five schemes concrete: a configurable number of
//! bits per real-valued scalar plus B bits per BFM index.

use thiserror::Error;

use crate::schemes::{ClusterPlan, FeedbackReport, SchemeId};

/// Default width of one real-valued feedback scalar in bits. The rate
/// scalars themselves are fed back unquantized; this constant only makes
/// budget comparisons concrete.
pub const DEFAULT_BITS_PER_SCALAR: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("no feedback reports supplied")]
    EmptyReports,
    #[error("reports mix schemes or granularities")]
    MixedSchemes,
    #[error("invalid cluster plan for feedback accounting")]
    InvalidPlan,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    PerSubcarrier,
    PerCluster,
}

/// Outcome of one scheduling round.
#[derive(Debug, Clone)]
pub struct ScheduleDecision {
    pub granularity: Granularity,
    /// Winning terminal per subcarrier (or per cluster).
    pub winners: Vec<usize>,
    /// The winner's reported rate per unit.
    pub rates: Vec<f64>,
}

/// Feedback budget of one report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackBudget {
    pub bfm_bits: u64,
    pub scalar_count: u64,
    pub total_bits: u64,
}

/// Allocate every unit to the terminal with the highest reported rate,
/// ties broken by lowest terminal index.
pub fn schedule(reports: &[FeedbackReport]) -> Result<ScheduleDecision, ScheduleError> {
    let first = reports.first().ok_or(ScheduleError::EmptyReports)?;
    let units = first.rate_scalars.len();
    for r in reports {
        if r.scheme != first.scheme || r.rate_scalars.len() != units {
            return Err(ScheduleError::MixedSchemes);
        }
    }
    let mut winners = Vec::with_capacity(units);
    let mut rates = Vec::with_capacity(units);
    for u in 0..units {
        let mut best = 0usize;
        let mut best_rate = reports[0].rate_scalars[u];
        for (k, r) in reports.iter().enumerate().skip(1) {
            if r.rate_scalars[u] > best_rate {
                best_rate = r.rate_scalars[u];
                best = k;
            }
        }
        winners.push(best);
        rates.push(best_rate);
    }
    let granularity = if first.scheme.is_per_cluster() {
        Granularity::PerCluster
    } else {
        Granularity::PerSubcarrier
    };
    Ok(ScheduleDecision { granularity, winners, rates })
}

/// Per-subcarrier average of the winning rates; cluster rates are weighted
/// by the cluster size.
pub fn system_throughput(decision: &ScheduleDecision, plan: Option<&ClusterPlan>) -> f64 {
    match (decision.granularity, plan) {
        (Granularity::PerCluster, Some(plan)) => {
            let total: f64 =
                decision.rates.iter().map(|r| r * plan.cluster_size as f64).sum();
            total / plan.subcarriers() as f64
        }
        _ => decision.rates.iter().sum::<f64>() / decision.rates.len() as f64,
    }
}

/// Uplink cost of one report for the given scheme.
///
/// PS-EB: Q BFM indices and Q*M rate scalars. PC-EB: G of each. The
/// stacked-channel schemes return one BFM index with Q (per-subcarrier) or
/// G (per-cluster) scalars.
pub fn feedback_cost(
    scheme: SchemeId,
    subcarriers: usize,
    clusters: usize,
    bfm_bits_per_index: u32,
    bits_per_scalar: u32,
    streams: usize,
) -> Result<FeedbackBudget, ScheduleError> {
    if clusters == 0 || subcarriers == 0 || subcarriers % clusters != 0 {
        return Err(ScheduleError::InvalidPlan);
    }
    let q = subcarriers as u64;
    let g = clusters as u64;
    let b = bfm_bits_per_index as u64;
    let (bfm_bits, scalar_count) = match scheme {
        SchemeId::PsEb => (q * b, q * streams as u64),
        SchemeId::PcEb => (g * b, g),
        SchemeId::PsGmd | SchemeId::PsQrd => (b, q),
        SchemeId::PcGmd => (b, g),
    };
    Ok(FeedbackBudget {
        bfm_bits,
        scalar_count,
        total_bits: bfm_bits + scalar_count * bits_per_scalar as u64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(scheme: SchemeId, rates: Vec<f64>) -> FeedbackReport {
        FeedbackReport { scheme, bfm_indices: vec![None], rate_scalars: rates, bit_cost: 0 }
    }

    #[test]
    fn single_user_wins_everything() {
        let d = schedule(&[report(SchemeId::PsGmd, vec![1.0, 2.0, 3.0])]).unwrap();
        assert_eq!(d.winners, vec![0, 0, 0]);
        assert_eq!(d.rates, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn per_unit_argmax() {
        let d = schedule(&[
            report(SchemeId::PsGmd, vec![3.0, 1.0]),
            report(SchemeId::PsGmd, vec![1.0, 3.0]),
        ])
        .unwrap();
        assert_eq!(d.winners, vec![0, 1]);
        assert_eq!(d.rates.iter().sum::<f64>(), 6.0);
    }

    #[test]
    fn tie_breaks_to_lowest_index() {
        let d = schedule(&[
            report(SchemeId::PsGmd, vec![2.0]),
            report(SchemeId::PsGmd, vec![2.0]),
        ])
        .unwrap();
        assert_eq!(d.winners, vec![0]);
    }

    #[test]
    fn more_users_never_hurt() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let reports: Vec<FeedbackReport> = (0..10)
            .map(|_| {
                report(SchemeId::PsGmd, (0..16).map(|_| rng.random::<f64>() * 5.0).collect())
            })
            .collect();
        let small = schedule(&reports[..5]).unwrap();
        let large = schedule(&reports).unwrap();
        for u in 0..16 {
            assert!(large.rates[u] >= small.rates[u]);
            let max_u =
                reports.iter().map(|r| r.rate_scalars[u]).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(large.rates[u], max_u);
        }
        assert!(
            system_throughput(&large, None) >= system_throughput(&small, None)
        );
    }

    #[test]
    fn error_paths() {
        assert!(matches!(schedule(&[]), Err(ScheduleError::EmptyReports)));
        let mixed = [report(SchemeId::PsGmd, vec![1.0]), report(SchemeId::PsEb, vec![1.0])];
        assert!(matches!(schedule(&mixed), Err(ScheduleError::MixedSchemes)));
    }

    #[test]
    fn throughput_weighting() {
        let d = ScheduleDecision {
            granularity: Granularity::PerSubcarrier,
            winners: vec![0, 0],
            rates: vec![2.0, 4.0],
        };
        assert_eq!(system_throughput(&d, None), 3.0);
        let plan = ClusterPlan::new(4, 2).unwrap();
        let d = ScheduleDecision {
            granularity: Granularity::PerCluster,
            winners: vec![0, 0],
            rates: vec![2.0, 4.0],
        };
        assert_eq!(system_throughput(&d, Some(&plan)), 3.0);
        let d = ScheduleDecision {
            granularity: Granularity::PerCluster,
            winners: vec![0],
            rates: vec![5.0],
        };
        let plan = ClusterPlan::new(4, 1).unwrap();
        assert_eq!(system_throughput(&d, Some(&plan)), 5.0);
    }

    #[test]
    fn budget_arithmetic() {
        let b = feedback_cost(SchemeId::PsGmd, 64, 64, 8, 16, 2).unwrap();
        assert_eq!(b.bfm_bits, 8);
        assert_eq!(b.scalar_count, 64);
        assert_eq!(b.total_bits, 8 + 64 * 16);

        let ps_eb = feedback_cost(SchemeId::PsEb, 64, 64, 8, 16, 2).unwrap();
        assert_eq!(ps_eb.bfm_bits, 64 * 8);

        let pc_gmd = feedback_cost(SchemeId::PcGmd, 64, 8, 8, 16, 2).unwrap();
        assert!(pc_gmd.total_bits < b.total_bits);
    }

    #[test]
    fn budget_ordering_over_grid() {
        for &q in &[16usize, 64, 128] {
            for &g in &[2usize, 4, 8] {
                for &b in &[0u32, 1, 4, 8] {
                    for &m in &[1usize, 2, 4] {
                        let pc_gmd = feedback_cost(SchemeId::PcGmd, q, g, b, 16, m).unwrap();
                        let ps_gmd = feedback_cost(SchemeId::PsGmd, q, g, b, 16, m).unwrap();
                        let ps_eb = feedback_cost(SchemeId::PsEb, q, g, b, 16, m).unwrap();
                        assert!(pc_gmd.total_bits <= ps_gmd.total_bits);
                        assert!(ps_gmd.total_bits <= ps_eb.total_bits);
                    }
                }
            }
        }
    }

    #[test]
    fn invalid_plan_rejected() {
        assert!(matches!(
            feedback_cost(SchemeId::PcGmd, 64, 5, 8, 16, 2),
            Err(ScheduleError::InvalidPlan)
        ));
    }
}
