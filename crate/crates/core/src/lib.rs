//! Link-level Monte-Carlo simulator for reduced-feedback opportunistic
//! scheduling and beamforming in MIMO-OFDMA downlinks.
//!
//! The crate layers a small deterministic complex-matrix factorization
//! library (SVD, economy QR, geometric mean decomposition) under five
//! scheduling and beamforming schemes (PS-EB, PC-EB, PS-QRD, PS-GMD,
//! PC-GMD), a QPSK link with QRD-M detection, a max-rate scheduler with
//! feedback bit accounting, and a seeded simulation harness with a CLI
//! (`simcli`) that emits CSV.

pub mod channel;
pub mod codebook;
pub mod link;
pub mod matdecomp;
pub mod scheduler;
pub mod schemes;
pub mod sim;

pub use matdecomp::ComplexMatrix;
