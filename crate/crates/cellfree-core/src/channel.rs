//! Fading realizations, pilot transmission, and linear MMSE channel
//! estimation.
//!
//! Per coherence block every UE sends its assigned pilot; AP `j` despreads
//! pilot `t` into
//!
//! ```text
//! y[j,t] = sqrt(p * tau_p) * sum_{i on pilot t} h[j,i] + n[j,t]
//! ```
//!
//! and forms the MMSE estimate of each user's channel from the observation of
//! that user's pilot:
//!
//! ```text
//! hhat[j,k] = sqrt(p * tau_p) * R[j,k] * Psi[j,t_k]^-1 * y[j,t_k]
//! Psi[j,t]  = p * tau_p * sum_{i on pilot t} R[j,i] + noise * I
//! ```
//!
//! The estimation-error covariance `C[j,k] = R - p tau_p R Psi^-1 R` depends
//! only on the setup statistics, so it is computed once per setup in
//! [`EstimationModel`]. Estimates and errors are uncorrelated, which the
//! consistency tests verify empirically.
//!
//! Schemes never touch estimates directly; they go through an
//! [`EstimateView`] that enforces which AP knows which estimate under the
//! chosen [`EstimationScope`]. A scalable AP only tracks the users it serves.

use crate::assignment::ServingAssignment;
use crate::config::NetworkConfig;
use crate::error::{Result, SimError};
use crate::linalg::HermitianSolver;
use crate::rng::{standard_complex, standard_complex_vector, substream, StreamPurpose};
use crate::topology::ChannelStatistics;
use crate::{C64, CMatrix, CVector};

/// Who is allowed to know which channel estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationScope {
    /// Every AP tracks estimates for all `K` users (non-scalable operation).
    AllUes,
    /// Every AP tracks estimates only for the users it serves.
    ServedOnly,
}

/// Per-setup estimation statistics: despreading covariances and error
/// covariances, with the pilot-covariance solvers factored once and reused by
/// every realization.
pub struct EstimationModel {
    antennas: usize,
    ue_count: usize,
    pilot_count: usize,
    sqrt_pilot_energy: f64,
    /// Solver for `Psi[j,t]`, present for occupied pilots; `[j * tau_p + t]`.
    psi_solver: Vec<Option<HermitianSolver>>,
    /// Error covariance `C[j,k]`, row-major by AP.
    error_cov: Vec<CMatrix>,
    /// Per-AP sum of the error covariances over every user.
    total_error_cov: Vec<CMatrix>,
}

impl EstimationModel {
    pub fn new(
        stats: &ChannelStatistics,
        assignment: &ServingAssignment,
        cfg: &NetworkConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        let l = cfg.ap_count;
        let k_total = cfg.ue_count;
        let n = cfg.antennas_per_ap;
        let tau_p = cfg.pilot_samples;
        let pilot_energy = cfg.ue_power_w * tau_p as f64;

        let mut psi_solver = Vec::with_capacity(l * tau_p);
        for ap in 0..l {
            for pilot in 0..tau_p {
                let holders = assignment.copilot_ues(pilot);
                if holders.is_empty() {
                    psi_solver.push(None);
                    continue;
                }
                let mut psi = CMatrix::identity(n, n) * C64::new(cfg.noise_power_w, 0.0);
                for &ue in holders {
                    psi += stats.covariance(ap, ue) * C64::new(pilot_energy, 0.0);
                }
                psi_solver.push(Some(HermitianSolver::new(psi)?));
            }
        }

        let mut error_cov = Vec::with_capacity(l * k_total);
        for ap in 0..l {
            for ue in 0..k_total {
                let r = stats.covariance(ap, ue);
                let solver = psi_solver[ap * tau_p + assignment.pilot_of(ue)]
                    .as_ref()
                    .expect("a user's own pilot is always occupied");
                let psi_inv_r = solver.solve_matrix(r)?;
                let mut c = r - (r * &psi_inv_r) * C64::new(pilot_energy, 0.0);
                // Exactly Hermitian in exact arithmetic; enforce it so later
                // quadratic forms and sums stay real on the diagonal.
                let c_adj = c.adjoint();
                c = (c + c_adj) * C64::new(0.5, 0.0);
                error_cov.push(c);
            }
        }

        let mut total_error_cov = Vec::with_capacity(l);
        for ap in 0..l {
            let mut sum = CMatrix::zeros(n, n);
            for ue in 0..k_total {
                sum += &error_cov[ap * k_total + ue];
            }
            total_error_cov.push(sum);
        }

        Ok(Self {
            antennas: n,
            ue_count: k_total,
            pilot_count: tau_p,
            sqrt_pilot_energy: pilot_energy.sqrt(),
            psi_solver,
            error_cov,
            total_error_cov,
        })
    }

    /// Despreading covariance for `(ap, pilot)`, if the pilot is in use.
    pub fn psi(&self, ap: usize, pilot: usize) -> Option<&CMatrix> {
        self.psi_solver[ap * self.pilot_count + pilot].as_ref().map(|s| s.matrix())
    }

    /// Estimation-error covariance `C[ap, ue]`.
    pub fn error_cov(&self, ap: usize, ue: usize) -> &CMatrix {
        &self.error_cov[ap * self.ue_count + ue]
    }

    /// Sum of error covariances at one AP over every user in the network.
    pub fn error_cov_total(&self, ap: usize) -> &CMatrix {
        &self.total_error_cov[ap]
    }

    /// Sum of error covariances at one AP over a set of users.
    pub fn error_cov_sum(&self, ap: usize, ues: impl IntoIterator<Item = usize>) -> CMatrix {
        let mut sum = CMatrix::zeros(self.antennas, self.antennas);
        for ue in ues {
            sum += self.error_cov(ap, ue);
        }
        sum
    }
}

/// Everything one fading realization produces: true channels, pilot-phase
/// observations, channel estimates, and one data-phase snapshot.
pub struct ChannelRealization {
    ue_count: usize,
    pilot_count: usize,
    /// True channels `h[j,k]`, row-major by AP.
    h: Vec<CVector>,
    /// Pilot-phase noise per `(ap, pilot)`.
    pilot_noise: Vec<CVector>,
    /// Despread pilot observations per `(ap, pilot)`.
    y_pilot: Vec<CVector>,
    /// MMSE estimates per `(ap, ue)`.
    h_hat: Vec<CVector>,
    /// One data-phase symbol per UE, variance `p`.
    data_symbols: Vec<C64>,
    /// Data-phase received vector per AP for those symbols.
    y_data: Vec<CVector>,
}

/// Square-root factors of the per-pair covariances, computed once per setup
/// so each realization is a cheap matrix-vector product.
pub struct ChannelFactors {
    ue_count: usize,
    factor: Vec<CMatrix>,
}

impl ChannelFactors {
    pub fn new(stats: &ChannelStatistics) -> Result<Self> {
        let mut factor = Vec::with_capacity(stats.ap_count() * stats.ue_count());
        for ap in 0..stats.ap_count() {
            for ue in 0..stats.ue_count() {
                factor.push(crate::linalg::psd_factor(stats.covariance(ap, ue))?);
            }
        }
        Ok(Self { ue_count: stats.ue_count(), factor })
    }

    fn get(&self, ap: usize, ue: usize) -> &CMatrix {
        &self.factor[ap * self.ue_count + ue]
    }
}

/// Draws the true channels of one realization: `h[j,k] = F[j,k] w` with `w`
/// standard complex Gaussian, so `cov(h) = F F^H = R`. Draw order is fixed
/// (APs outer, UEs inner) and keyed only by `(seed, setup, realization)`.
pub fn draw_channels(
    factors: &ChannelFactors,
    cfg: &NetworkConfig,
    setup: u64,
    realization: u64,
) -> Vec<CVector> {
    let mut rng = substream(cfg.seed, StreamPurpose::Channel, setup, realization);
    let n = cfg.antennas_per_ap;
    let mut h = Vec::with_capacity(cfg.ap_count * cfg.ue_count);
    for ap in 0..cfg.ap_count {
        for ue in 0..cfg.ue_count {
            let w = standard_complex_vector(&mut rng, n);
            h.push(factors.get(ap, ue) * w);
        }
    }
    h
}

/// Pilot-phase despreading: returns `(noise, observations)` per `(ap, pilot)`.
/// Unoccupied pilots still carry (and return) pure noise.
pub fn despread_pilots(
    h: &[CVector],
    assignment: &ServingAssignment,
    cfg: &NetworkConfig,
    setup: u64,
    realization: u64,
) -> (Vec<CVector>, Vec<CVector>) {
    let mut rng = substream(cfg.seed, StreamPurpose::PilotNoise, setup, realization);
    let n = cfg.antennas_per_ap;
    let amplitude = (cfg.ue_power_w * cfg.pilot_samples as f64).sqrt();
    let noise_scale = cfg.noise_power_w.sqrt();
    let mut noise = Vec::with_capacity(cfg.ap_count * cfg.pilot_samples);
    let mut observations = Vec::with_capacity(cfg.ap_count * cfg.pilot_samples);
    for ap in 0..cfg.ap_count {
        for pilot in 0..cfg.pilot_samples {
            let w = standard_complex_vector(&mut rng, n) * C64::new(noise_scale, 0.0);
            let mut y = w.clone();
            for &ue in assignment.copilot_ues(pilot) {
                y += &h[ap * cfg.ue_count + ue] * C64::new(amplitude, 0.0);
            }
            noise.push(w);
            observations.push(y);
        }
    }
    (noise, observations)
}

/// MMSE channel estimates for every `(ap, ue)` pair from the despread pilots.
pub fn mmse_estimate(
    y_pilot: &[CVector],
    stats: &ChannelStatistics,
    model: &EstimationModel,
    assignment: &ServingAssignment,
    cfg: &NetworkConfig,
) -> Result<Vec<CVector>> {
    let tau_p = cfg.pilot_samples;
    let mut whitened: Vec<Option<CVector>> = vec![None; cfg.ap_count * tau_p];
    for ap in 0..cfg.ap_count {
        for pilot in 0..tau_p {
            if let Some(solver) = model.psi_solver[ap * tau_p + pilot].as_ref() {
                whitened[ap * tau_p + pilot] = Some(solver.solve(&y_pilot[ap * tau_p + pilot])?);
            }
        }
    }
    let mut h_hat = Vec::with_capacity(cfg.ap_count * cfg.ue_count);
    for ap in 0..cfg.ap_count {
        for ue in 0..cfg.ue_count {
            let x = whitened[ap * tau_p + assignment.pilot_of(ue)]
                .as_ref()
                .expect("a user's own pilot is always occupied");
            h_hat.push(stats.covariance(ap, ue) * x * C64::new(model.sqrt_pilot_energy, 0.0));
        }
    }
    Ok(h_hat)
}

impl ChannelRealization {
    /// Draws one complete realization: channels, pilot phase, estimates, and
    /// a one-symbol data-phase snapshot.
    pub fn generate(
        factors: &ChannelFactors,
        stats: &ChannelStatistics,
        model: &EstimationModel,
        assignment: &ServingAssignment,
        cfg: &NetworkConfig,
        setup: u64,
        realization: u64,
    ) -> Result<Self> {
        let h = draw_channels(factors, cfg, setup, realization);
        let (pilot_noise, y_pilot) = despread_pilots(&h, assignment, cfg, setup, realization);
        let h_hat = mmse_estimate(&y_pilot, stats, model, assignment, cfg)?;

        let mut rng = substream(cfg.seed, StreamPurpose::Data, setup, realization);
        let symbol_scale = cfg.ue_power_w.sqrt();
        let data_symbols: Vec<C64> =
            (0..cfg.ue_count).map(|_| standard_complex(&mut rng) * symbol_scale).collect();
        let noise_scale = cfg.noise_power_w.sqrt();
        let mut y_data = Vec::with_capacity(cfg.ap_count);
        for ap in 0..cfg.ap_count {
            let mut y = standard_complex_vector(&mut rng, cfg.antennas_per_ap)
                * C64::new(noise_scale, 0.0);
            for (ue, s) in data_symbols.iter().enumerate() {
                y += &h[ap * cfg.ue_count + ue] * *s;
            }
            y_data.push(y);
        }

        Ok(Self {
            ue_count: cfg.ue_count,
            pilot_count: cfg.pilot_samples,
            h,
            pilot_noise,
            y_pilot,
            h_hat,
            data_symbols,
            y_data,
        })
    }

    pub fn true_channel(&self, ap: usize, ue: usize) -> &CVector {
        &self.h[ap * self.ue_count + ue]
    }

    pub fn pilot_noise(&self, ap: usize, pilot: usize) -> &CVector {
        &self.pilot_noise[ap * self.pilot_count + pilot]
    }

    pub fn received_pilot(&self, ap: usize, pilot: usize) -> &CVector {
        &self.y_pilot[ap * self.pilot_count + pilot]
    }

    /// The transmitted data symbol of `ue` in this realization's snapshot.
    pub fn data_symbol(&self, ue: usize) -> C64 {
        self.data_symbols[ue]
    }

    /// Data-phase received vector at `ap` for the snapshot symbols.
    pub fn received_data(&self, ap: usize) -> &CVector {
        &self.y_data[ap]
    }

    /// Scoped access for a processing scheme.
    pub fn view<'a>(
        &'a self,
        model: &'a EstimationModel,
        assignment: &'a ServingAssignment,
        scope: EstimationScope,
    ) -> EstimateView<'a> {
        EstimateView { realization: self, model, assignment, scope }
    }
}

/// Scope-checked access to channel estimates and error statistics.
///
/// Under [`EstimationScope::ServedOnly`] an AP only knows the estimates (and
/// error covariances) of the users it serves; asking for anything else is a
/// wiring bug and returns a lookup error.
pub struct EstimateView<'a> {
    realization: &'a ChannelRealization,
    model: &'a EstimationModel,
    assignment: &'a ServingAssignment,
    scope: EstimationScope,
}

impl<'a> EstimateView<'a> {
    pub fn scope(&self) -> EstimationScope {
        self.scope
    }

    pub fn assignment(&self) -> &ServingAssignment {
        self.assignment
    }

    pub fn realization(&self) -> &ChannelRealization {
        self.realization
    }

    /// Does `ap` track the channel of `ue` under this scope?
    pub fn knows(&self, ap: usize, ue: usize) -> bool {
        match self.scope {
            EstimationScope::AllUes => true,
            EstimationScope::ServedOnly => self.assignment.serves(ap, ue),
        }
    }

    /// The users `ap` tracks, ascending.
    pub fn known_ues(&self, ap: usize) -> Vec<usize> {
        match self.scope {
            EstimationScope::AllUes => (0..self.realization.ue_count).collect(),
            EstimationScope::ServedOnly => self.assignment.served_ues(ap).to_vec(),
        }
    }

    pub fn estimate(&self, ap: usize, ue: usize) -> Result<&'a CVector> {
        if !self.knows(ap, ue) {
            return Err(SimError::Lookup(format!(
                "ap {ap} does not track ue {ue} under the served-only scope"
            )));
        }
        Ok(&self.realization.h_hat[ap * self.realization.ue_count + ue])
    }

    pub fn error_cov(&self, ap: usize, ue: usize) -> Result<&'a CMatrix> {
        if !self.knows(ap, ue) {
            return Err(SimError::Lookup(format!(
                "ap {ap} does not track the error statistics of ue {ue} under the served-only scope"
            )));
        }
        Ok(self.model.error_cov(ap, ue))
    }

    pub fn model(&self) -> &'a EstimationModel {
        self.model
    }
}
