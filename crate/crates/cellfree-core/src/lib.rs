//! Uplink simulator for user-centric cell-free massive MIMO networks.
//!
//! The crate models a square coverage area (with wrap-around) in which `L`
//! access points, each with `N` antennas, jointly serve `K` single-antenna
//! user equipments over spatially correlated Rayleigh fading. On top of the
//! physical layer it implements pilot-based MMSE channel estimation,
//! user-centric cluster formation, and several uplink receive strategies:
//!
//! * fully centralized MMSE combining (all serving clusters processed at a
//!   central unit), in global (`c_mmse`) and partial (`p_mmse`) form,
//! * fully distributed per-AP combining (`l_mmse`, `lp_mmse`) fused with
//!   large-scale fading decoding,
//! * master-assisted distributed operation (`maduo`), where each user's
//!   strongest AP fuses one-scalar-per-symbol reports from the other serving
//!   APs and solves a small generalized Rayleigh-quotient problem.
//!
//! The [`evaluation`] module runs deterministic Monte Carlo campaigns over
//! random network setups and fading realizations, producing per-user
//! spectral-efficiency samples. The [`accounting`] module reports fronthaul
//! load and arithmetic cost for the same schemes.
//!
//! All randomness is derived from a single seed through counter-addressed
//! substreams, so campaigns are reproducible bit-for-bit regardless of how
//! many worker threads are used.

pub mod accounting;
pub mod assignment;
pub mod channel;
pub mod combining;
pub mod config;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod maduo;
pub mod rng;
pub mod topology;

pub use assignment::ServingAssignment;
pub use channel::{ChannelRealization, EstimateView, EstimationModel, EstimationScope};
pub use config::NetworkConfig;
pub use error::{Result, SimError};
pub use evaluation::{run_campaign, CampaignOutput, Scheme, SeSample};

pub use topology::{ChannelStatistics, Geometry};

/// Complex scalar used throughout: double-precision complex baseband samples.
pub type C64 = num_complex::Complex64;

/// Dynamically sized complex column vector.
pub type CVector = nalgebra::DVector<C64>;

/// Dynamically sized complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
