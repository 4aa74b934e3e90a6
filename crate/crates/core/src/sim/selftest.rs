//! Built-in verification pass: exercises every layer against independent
//! identities and prints one PASS/FAIL line per check.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channel::{
    draw_channel, dft_column, freq_channel, selection_matrix, stack_channel, ChannelConfig,
};
use crate::codebook::{select_bfm, BfmCodebook};
use crate::link::{detect_triangular, qpsk_demap, qpsk_modulate, DetectorConfig};
use crate::matdecomp::{gmd, qr_economy, svd, ComplexMatrix};
use crate::scheduler::{feedback_cost, schedule};
use crate::schemes::{FeedbackReport, SchemeId};
use crate::sim::{derive_seed, BVal, ResultRow, SimConfig, SimError};

const PASS_TOL: f64 = 1e-9;

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

struct Check {
    name: &'static str,
    /// Worst residual observed (0.0 for boolean checks that hold).
    residual: f64,
    passed: bool,
    instances: usize,
}

fn residual_check(name: &'static str, residual: f64, tol: f64, instances: usize) -> Check {
    Check { name, residual, passed: residual.is_finite() && residual <= tol, instances }
}

fn bool_check(name: &'static str, ok: bool, instances: usize) -> Check {
    Check { name, residual: if ok { 0.0 } else { 1.0 }, passed: ok, instances }
}

fn factorization_checks(seed: u64, checks: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xfac]));
    let shapes = [(2usize, 2usize), (4, 2), (8, 2), (8, 4), (6, 3)];
    let reps = 8usize;
    let (mut r_svd, mut r_qr, mut r_gmd, mut r_geo, mut r_det) = (0f64, 0f64, 0f64, 0f64, 0f64);
    for &(rows, cols) in &shapes {
        for _ in 0..reps {
            let a = random_matrix(&mut rng, rows, cols);
            let f = svd(&a).unwrap();
            r_svd = r_svd
                .max(f.reconstruct().sub(&a).frob_norm() / a.frob_norm())
                .max(f.u.unitarity_residual())
                .max(f.v.unitarity_residual());
            let q = qr_economy(&a).unwrap();
            r_qr = r_qr
                .max(q.q.mul(&q.r).sub(&a).frob_norm() / a.frob_norm())
                .max(q.q.unitarity_residual());
            let g = gmd(&a).unwrap();
            r_gmd = r_gmd.max(g.reconstruct().sub(&a).frob_norm() / a.frob_norm());
            let geo: f64 =
                f.s.iter().map(|s| s.ln()).sum::<f64>() / cols as f64;
            let geo = geo.exp();
            for i in 0..cols {
                r_geo = r_geo.max((g.e[(i, i)].re - geo).abs() / geo);
            }
            // det(AᴴA) equals the product of the squared singular values,
            // which the equal-diagonal factorization preserves.
            let prod_e: f64 = (0..cols).map(|i| g.e[(i, i)].re * g.e[(i, i)].re).product();
            let prod_s: f64 = f.s.iter().map(|s| s * s).product();
            r_det = r_det.max((prod_e - prod_s).abs() / prod_s);
        }
    }
    let n = shapes.len() * reps;
    checks.push(residual_check("svd_reconstruction", r_svd, PASS_TOL, n));
    checks.push(residual_check("qr_reconstruction", r_qr, PASS_TOL, n));
    checks.push(residual_check("gmd_reconstruction", r_gmd, PASS_TOL, n));
    checks.push(residual_check("gmd_geomean_diagonal", r_geo, PASS_TOL, n));
    checks.push(residual_check("determinant_identity", r_det, 1e-8, n));
}

fn channel_checks(cfg: &SimConfig, seed: u64, checks: &mut Vec<Check>) {
    let ccfg = ChannelConfig {
        tx_antennas: cfg.m,
        rx_antennas: cfg.n,
        taps: cfg.l,
        subcarriers: cfg.q,
        pdp_decay: cfg.pdp_decay,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xc8a]));
    let reps = 5usize;
    let mut kron_ok = true;
    let mut r_parseval = 0f64;
    for _ in 0..reps {
        let ch = draw_channel(&mut rng, &ccfg);
        let fc = freq_channel(&ch, cfg.q);
        let h = stack_channel(&ch);
        for q in 0..cfg.q {
            let w = selection_matrix(q, cfg.q, cfg.n, cfg.l).unwrap();
            kron_ok &= w.mul(&h) == fc.g[q];
        }
        let freq_energy: f64 = fc.g.iter().map(|g| g.frob_norm().powi(2)).sum();
        let tap_energy = h.frob_norm().powi(2);
        r_parseval = r_parseval
            .max((freq_energy - cfg.q as f64 * tap_energy).abs() / (cfg.q as f64 * tap_energy));
    }
    // Spot anchor: subcarrier 0 sums the taps with all-ones weights.
    let col = dft_column(0, cfg.q, cfg.l).unwrap();
    let anchor_ok = col.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    checks.push(bool_check("subcarrier_extraction_bitwise", kron_ok, reps * cfg.q));
    checks.push(residual_check("dft_energy_conservation", r_parseval, 1e-9, reps));
    checks.push(bool_check("dft_dc_anchor", anchor_ok, 1));
}

fn codebook_check(cfg: &SimConfig, seed: u64, checks: &mut Vec<Check>) {
    let cb_seed = derive_seed(seed, &[0xcb]);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0xcb, 1]));
    let mut ok = true;
    for _ in 0..10 {
        let target = qr_economy(&random_matrix(&mut rng, cfg.m, cfg.m)).unwrap().q;
        let mut last = f64::INFINITY;
        for bits in 0..=6u32 {
            let cb = BfmCodebook::generate(bits, cfg.m, cb_seed).unwrap();
            let sel = select_bfm(&target, &cb).unwrap();
            ok &= sel.metric <= last + 1e-12;
            last = sel.metric;
        }
    }
    checks.push(bool_check("codebook_metric_monotone", ok, 10 * 7));
}

fn link_check(cfg: &SimConfig, seed: u64, checks: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x117]));
    let det = DetectorConfig { m_keep: 4usize.pow(cfg.m as u32) };
    let rho: f64 = 1e6;
    let mut ok = true;
    for _ in 0..50 {
        let r = qr_economy(&random_matrix(&mut rng, cfg.m, cfg.m)).unwrap().r;
        let bits: Vec<u8> = (0..2 * cfg.m).map(|_| rng.random::<bool>() as u8).collect();
        let s = qpsk_modulate(&bits).unwrap();
        let mut y = r.mul_vec(&s);
        for z in y.iter_mut() {
            *z *= rho.sqrt();
        }
        let detected = detect_triangular(&r, &y, rho, &det).unwrap();
        ok &= qpsk_demap(&detected) == bits;
    }
    checks.push(bool_check("noiseless_detection_exact", ok, 50));
}

fn scheduler_checks(cfg: &SimConfig, seed: u64, checks: &mut Vec<Check>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[0x5c4]));
    let reports: Vec<FeedbackReport> = (0..6)
        .map(|_| FeedbackReport {
            scheme: SchemeId::PsGmd,
            bfm_indices: vec![None],
            rate_scalars: (0..cfg.q).map(|_| rng.random::<f64>() * 8.0).collect(),
            bit_cost: 0,
        })
        .collect();
    let d = schedule(&reports).unwrap();
    let mut max_ok = true;
    for u in 0..cfg.q {
        let max_u = reports.iter().map(|r| r.rate_scalars[u]).fold(f64::NEG_INFINITY, f64::max);
        max_ok &= d.rates[u] == max_u;
    }
    checks.push(bool_check("schedule_pointwise_max", max_ok, cfg.q));

    let mut order_ok = true;
    for &b in &[0u32, 2, 6] {
        let g = cfg.g_grid.first().copied().unwrap_or(4).min(cfg.q);
        let pc = feedback_cost(SchemeId::PcGmd, cfg.q, g, b, cfg.bits_per_scalar, cfg.m).unwrap();
        let ps = feedback_cost(SchemeId::PsGmd, cfg.q, g, b, cfg.bits_per_scalar, cfg.m).unwrap();
        let eb = feedback_cost(SchemeId::PsEb, cfg.q, g, b, cfg.bits_per_scalar, cfg.m).unwrap();
        order_ok &= pc.total_bits <= ps.total_bits && ps.total_bits <= eb.total_bits;
    }
    checks.push(bool_check("feedback_budget_ordering", order_ok, 3));
}

/// Run every check, print one line each, and return the result rows plus an
/// overall verdict.
pub fn run_selftest(cfg: &SimConfig) -> Result<(Vec<ResultRow>, bool), SimError> {
    cfg.validate()?;
    let mut checks = Vec::new();
    factorization_checks(cfg.seed, &mut checks);
    channel_checks(cfg, cfg.seed, &mut checks);
    codebook_check(cfg, cfg.seed, &mut checks);
    link_check(cfg, cfg.seed, &mut checks);
    scheduler_checks(cfg, cfg.seed, &mut checks);

    let mut all_ok = true;
    let rows = checks
        .iter()
        .map(|c| {
            all_ok &= c.passed;
            println!("selftest {}: {}", c.name, if c.passed { "PASS" } else { "FAIL" });
            ResultRow {
                case: "selftest".into(),
                scheme: "all".into(),
                snr_db: 0.0,
                k: cfg.k,
                b: Some(BVal::Inf),
                g: None,
                metric: c.name.into(),
                value: c.residual,
                ci95: 0.0,
                trials: c.instances,
            }
        })
        .collect();
    Ok((rows, all_ok))
}
