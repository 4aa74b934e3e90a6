//! The three experiment cases: BER versus SNR, impact of codebook size and
//! user count, and throughput versus cluster count.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{draw_channel, freq_channel, stack_channel, ChannelConfig, FreqChannel};
use crate::codebook::BfmCodebook;
use crate::link::{complex_awgn, detect_triangular, qpsk_demap, qpsk_modulate, DetectorConfig};
use crate::matdecomp::ComplexMatrix;
use crate::scheduler::{schedule, system_throughput};
use crate::schemes::{
    pc_eb_report, pc_gmd_report, ps_eb_report, ps_gmd_report, ps_qrd_report, ClusterPlan,
    SchemeError, SchemeId, SchemeOutput,
};
use crate::sim::{derive_seed, mean_ci95, BVal, ResultRow, SimConfig, SimError};

const CASE1: u64 = 1;
const CASE2: u64 = 2;
const CASE3: u64 = 3;
const TAG_CHANNEL: u64 = 0xc4a1;
const TAG_NOISE: u64 = 0x0153;
const TAG_CODEBOOK: u64 = 0xc0de;

/// Eb/N0 in dB to linear average SNR for QPSK (2 bits/symbol, unit noise
/// variance): rho = 2 Eb/N0.
pub fn ebn0_db_to_rho(db: f64) -> f64 {
    2.0 * 10f64.powf(db / 10.0)
}

pub fn snr_db_to_rho(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

fn channel_cfg(cfg: &SimConfig) -> ChannelConfig {
    ChannelConfig {
        tx_antennas: cfg.m,
        rx_antennas: cfg.n,
        taps: cfg.l,
        subcarriers: cfg.q,
        pdp_decay: cfg.pdp_decay,
    }
}

fn make_codebook(b: BVal, m: usize, master_seed: u64) -> Result<BfmCodebook, SimError> {
    match b {
        BVal::Inf => Ok(BfmCodebook::infinite()),
        BVal::Bits(bits) => {
            BfmCodebook::generate(bits, m, derive_seed(master_seed, &[TAG_CODEBOOK]))
                .map_err(|e| SimError::ConfigInvalid(e.to_string()))
        }
    }
}

struct UserDraw {
    fc: FreqChannel,
    h: ComplexMatrix,
}

/// Draw one user's block channel from its counter-derived substream and run
/// the terminal-side computation; rank-deficient draws (a probability-zero
/// event under continuous fading) are rejected and redrawn.
fn with_redraw<T>(
    cfg: &SimConfig,
    case: u64,
    trial: u64,
    user: u64,
    f: impl Fn(&UserDraw) -> Result<T, SchemeError>,
) -> T {
    let ccfg = channel_cfg(cfg);
    for attempt in 0..64u64 {
        let seed = derive_seed(cfg.seed, &[case, TAG_CHANNEL, trial, user, attempt]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ch = draw_channel(&mut rng, &ccfg);
        let draw = UserDraw { fc: freq_channel(&ch, cfg.q), h: stack_channel(&ch) };
        match f(&draw) {
            Ok(t) => return t,
            Err(SchemeError::Decomp(_)) => continue,
            Err(e) => panic!("scheme computation failed: {e}"),
        }
    }
    unreachable!("persistent rank deficiency across redraws");
}

fn per_subcarrier_output(
    scheme: SchemeId,
    d: &UserDraw,
    rho: f64,
    cb: &BfmCodebook,
) -> Result<SchemeOutput, SchemeError> {
    match scheme {
        SchemeId::PsEb => ps_eb_report(&d.fc, rho, cb),
        SchemeId::PsQrd => ps_qrd_report(&d.h, &d.fc, rho, cb),
        SchemeId::PsGmd => ps_gmd_report(&d.h, &d.fc, rho, cb),
        _ => unreachable!("per-cluster scheme in per-subcarrier case"),
    }
}

/// One Monte-Carlo trial of the BER cases: draw K user channels, schedule
/// each scheme, transmit `frames` QPSK frames on every subcarrier to the
/// winning terminal, detect, and return one BER per scheme.
#[allow(clippy::too_many_arguments)]
fn trial_ber(
    cfg: &SimConfig,
    case: u64,
    trial: u64,
    snr_idx: u64,
    rho: f64,
    users_count: usize,
    schemes: &[SchemeId],
    cb: &BfmCodebook,
    det: &DetectorConfig,
) -> Vec<f64> {
    let users: Vec<Vec<SchemeOutput>> = (0..users_count)
        .map(|u| {
            with_redraw(cfg, case, trial, u as u64, |d| {
                schemes.iter().map(|&s| per_subcarrier_output(s, d, rho, cb)).collect()
            })
        })
        .collect();

    schemes
        .iter()
        .enumerate()
        .map(|(j, _)| {
            let reports: Vec<_> = users.iter().map(|outs| outs[j].report.clone()).collect();
            let decision = schedule(&reports).expect("homogeneous reports");
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
                cfg.seed,
                &[case, TAG_NOISE, snr_idx, trial, j as u64],
            ));
            let sqrt_rho = rho.sqrt();
            let mut errors = 0usize;
            let mut total = 0usize;
            for _ in 0..cfg.frames {
                for q in 0..cfg.q {
                    let link = &users[decision.winners[q]][j].links[q];
                    let bits: Vec<u8> =
                        (0..2 * cfg.m).map(|_| rng.random::<bool>() as u8).collect();
                    let s = qpsk_modulate(&bits).expect("even bit count");
                    let mut r = link.triangular.mul_vec(&s);
                    for z in r.iter_mut() {
                        *z = *z * sqrt_rho + complex_awgn(&mut rng);
                    }
                    let detected = detect_triangular(&link.triangular, &r, rho, det)
                        .expect("consistent link dimensions");
                    errors += bits
                        .iter()
                        .zip(qpsk_demap(&detected).iter())
                        .filter(|(a, b)| a != b)
                        .count();
                    total += 2 * cfg.m;
                }
            }
            errors as f64 / total as f64
        })
        .collect()
}

fn ber_rows(
    cfg: &SimConfig,
    case: u64,
    case_name: &str,
    snr_db: f64,
    snr_idx: u64,
    rho: f64,
    users_count: usize,
    schemes: &[SchemeId],
    b: BVal,
    cb: &BfmCodebook,
) -> Vec<(SchemeId, ResultRow)> {
    let det = DetectorConfig { m_keep: cfg.m_keep };
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| trial_ber(cfg, case, t, snr_idx, rho, users_count, schemes, cb, &det))
        .collect();
    schemes
        .iter()
        .enumerate()
        .map(|(j, &scheme)| {
            let vals: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            let (mean, ci) = mean_ci95(&vals);
            (
                scheme,
                ResultRow {
                    case: case_name.into(),
                    scheme: scheme.name().into(),
                    snr_db,
                    k: users_count,
                    b: Some(b),
                    g: None,
                    metric: "ber".into(),
                    value: mean,
                    ci95: ci,
                    trials: cfg.trials,
                },
            )
        })
        .collect()
}

/// Case 1: uncoded BER versus Eb/N0 for the per-subcarrier schemes with
/// max-rate scheduling over K terminals.
pub fn run_case1(cfg: &SimConfig) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    let schemes: Vec<SchemeId> = [SchemeId::PsEb, SchemeId::PsQrd, SchemeId::PsGmd]
        .into_iter()
        .filter(|s| cfg.schemes.contains(s))
        .collect();
    if schemes.is_empty() {
        return Err(SimError::ConfigInvalid(
            "case1 needs at least one per-subcarrier scheme".into(),
        ));
    }
    let cb = make_codebook(cfg.b, cfg.m, cfg.seed)?;
    let mut by_scheme: Vec<Vec<ResultRow>> = vec![Vec::new(); schemes.len()];
    for (si, &ebn0) in cfg.snr_grid.iter().enumerate() {
        let rho = ebn0_db_to_rho(ebn0);
        for (scheme, row) in
            ber_rows(cfg, CASE1, "case1", ebn0, si as u64, rho, cfg.k, &schemes, cfg.b, &cb)
        {
            let j = schemes.iter().position(|&s| s == scheme).unwrap();
            by_scheme[j].push(row);
        }
    }
    Ok(by_scheme.into_iter().flatten().collect())
}

/// Case 2: PS-GMD BER versus codebook size B (nested books, plus the
/// perfect-feedback reference) and versus user count K at fixed B.
pub fn run_case2(cfg: &SimConfig) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    if !cfg.schemes.contains(&SchemeId::PsGmd) {
        return Err(SimError::ConfigInvalid("case2 requires the ps-gmd scheme".into()));
    }
    if cfg.b_grid.is_empty() {
        return Err(SimError::ConfigInvalid("case2 requires a nonempty b_grid".into()));
    }
    let snr_db = cfg.snr_grid[0];
    let rho = ebn0_db_to_rho(snr_db);
    let schemes = [SchemeId::PsGmd];
    let mut rows = Vec::new();

    // Codebook-size sweep at K terminals. Books share one seed, so they are
    // nested and the sweep isolates the quantization loss.
    let sweep: Vec<BVal> =
        cfg.b_grid.iter().map(|&b| BVal::Bits(b)).chain([BVal::Inf]).collect();
    for b in sweep {
        let cb = make_codebook(b, cfg.m, cfg.seed)?;
        for (_, row) in ber_rows(cfg, CASE2, "case2", snr_db, 0, rho, cfg.k, &schemes, b, &cb) {
            rows.push(row);
        }
    }

    // User-count sweep at a fixed finite codebook.
    let b_fixed = match cfg.b {
        BVal::Bits(b) => b,
        BVal::Inf => cfg.b_grid[0],
    };
    let cb = make_codebook(BVal::Bits(b_fixed), cfg.m, cfg.seed)?;
    for &k in &cfg.k_grid {
        for (_, row) in
            ber_rows(cfg, CASE2, "case2", snr_db, 0, rho, k, &schemes, BVal::Bits(b_fixed), &cb)
        {
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Case 3: average system throughput of the per-cluster schemes versus the
/// number of clusters G at fixed SNR.
pub fn run_case3(cfg: &SimConfig) -> Result<Vec<ResultRow>, SimError> {
    cfg.validate()?;
    let schemes: Vec<SchemeId> = [SchemeId::PcEb, SchemeId::PcGmd]
        .into_iter()
        .filter(|s| cfg.schemes.contains(s))
        .collect();
    if schemes.is_empty() {
        return Err(SimError::ConfigInvalid("case3 needs a per-cluster scheme".into()));
    }
    if cfg.g_grid.is_empty() {
        return Err(SimError::ConfigInvalid("case3 requires a nonempty g_grid".into()));
    }
    let snr_db = cfg.snr_grid[0];
    let rho = snr_db_to_rho(snr_db);
    let cb = make_codebook(cfg.b, cfg.m, cfg.seed)?;

    let mut by_scheme: Vec<Vec<ResultRow>> = vec![Vec::new(); schemes.len()];
    for &g in &cfg.g_grid {
        let plan = ClusterPlan::new(cfg.q, g)
            .map_err(|_| SimError::ConfigInvalid(format!("G = {g} does not divide Q")))?;
        let per_trial: Vec<Vec<f64>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| {
                let users: Vec<Vec<SchemeOutput>> = (0..cfg.k)
                    .map(|u| {
                        with_redraw(cfg, CASE3, t, u as u64, |d| {
                            schemes
                                .iter()
                                .map(|&s| match s {
                                    SchemeId::PcEb => pc_eb_report(&d.fc, &plan, rho, &cb),
                                    SchemeId::PcGmd => {
                                        pc_gmd_report(&d.h, &d.fc, &plan, rho, &cb)
                                    }
                                    _ => unreachable!(),
                                })
                                .collect()
                        })
                    })
                    .collect();
                schemes
                    .iter()
                    .enumerate()
                    .map(|(j, _)| {
                        let reports: Vec<_> =
                            users.iter().map(|outs| outs[j].report.clone()).collect();
                        let decision = schedule(&reports).expect("homogeneous reports");
                        system_throughput(&decision, Some(&plan))
                    })
                    .collect()
            })
            .collect();
        for (j, &scheme) in schemes.iter().enumerate() {
            let vals: Vec<f64> = per_trial.iter().map(|v| v[j]).collect();
            let (mean, ci) = mean_ci95(&vals);
            by_scheme[j].push(ResultRow {
                case: "case3".into(),
                scheme: scheme.name().into(),
                snr_db,
                k: cfg.k,
                b: Some(cfg.b),
                g: Some(g),
                metric: "throughput".into(),
                value: mean,
                ci95: ci,
                trials: cfg.trials,
            });
        }
    }
    Ok(by_scheme.into_iter().flatten().collect())
}
