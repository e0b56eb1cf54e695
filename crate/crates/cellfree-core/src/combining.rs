//! Receive combining: centralized MMSE over a user's serving cluster,
//! per-AP local MMSE, and the large-scale fading decoder that fuses per-AP
//! soft estimates using channel statistics only.
//!
//! All combiners regularize an estimate Gram matrix with the estimation-error
//! covariances and the noise floor:
//!
//! ```text
//! v_k = p * (sum_{i in S} p * (hhat_i hhat_i^H + C_i) + noise * I)^-1 hhat_k
//! ```
//!
//! For the centralized receivers the vectors are stacked over the serving
//! cluster `A_k` and the error covariances enter block-diagonally; the design
//! set `S` is either every user (`c_mmse`) or the user's partner set
//! (`p_mmse`). For the per-AP receivers the same expression is evaluated on
//! one AP's block, and the set of users an AP regularizes against is exactly
//! the set it tracks — so the estimate view's scope selects between the
//! classic local receiver (full-network knowledge) and its scalable variant
//! (served users only).

use crate::channel::EstimateView;
use crate::config::NetworkConfig;
use crate::error::{Result, SimError};
use crate::linalg::HermitianSolver;
use crate::{C64, CMatrix, CVector};
use nalgebra::DVector;

/// Concatenates one user's channel estimates over a cluster of APs.
pub(crate) fn stack_estimates(
    view: &EstimateView,
    cluster: &[usize],
    ue: usize,
    n: usize,
) -> Result<CVector> {
    let mut out = CVector::zeros(n * cluster.len());
    for (slot, &ap) in cluster.iter().enumerate() {
        out.rows_mut(slot * n, n).copy_from(view.estimate(ap, ue)?);
    }
    Ok(out)
}

/// Regularized Gram matrix over `cluster` for the design set `ues`:
/// `sum_{i in ues} p (hhat_i hhat_i^H + blkdiag C_i) + noise I`.
fn cluster_design_matrix(
    view: &EstimateView,
    cluster: &[usize],
    ues: &[usize],
    cfg: &NetworkConfig,
) -> Result<CMatrix> {
    let n = cfg.antennas_per_ap;
    let m = n * cluster.len();
    let p = C64::new(cfg.ue_power_w, 0.0);
    let mut b = CMatrix::identity(m, m) * C64::new(cfg.noise_power_w, 0.0);
    for &ue in ues {
        let h = stack_estimates(view, cluster, ue, n)?;
        b.gerc(p, &h, &h, C64::new(1.0, 0.0));
        for (slot, &ap) in cluster.iter().enumerate() {
            let c = view.error_cov(ap, ue)?;
            for row in 0..n {
                for col in 0..n {
                    b[(slot * n + row, slot * n + col)] += p * c[(row, col)];
                }
            }
        }
    }
    Ok(b)
}

/// Centralized MMSE combiner for `ue` over its serving cluster, designed
/// against an explicit set of users. The returned vector is stacked in
/// cluster order (ascending AP index).
pub fn partial_mmse(
    view: &EstimateView,
    ue: usize,
    design_set: &[usize],
    cfg: &NetworkConfig,
) -> Result<CVector> {
    let cluster = view.assignment().serving_aps(ue);
    let b = cluster_design_matrix(view, cluster, design_set, cfg)?;
    let h = stack_estimates(view, cluster, ue, cfg.antennas_per_ap)?;
    Ok(HermitianSolver::new(b)?.solve(&h)? * C64::new(cfg.ue_power_w, 0.0))
}

/// Fully centralized MMSE: designed against every user in the network.
pub fn c_mmse(view: &EstimateView, ue: usize, cfg: &NetworkConfig) -> Result<CVector> {
    let all: Vec<usize> = (0..view.assignment().ue_count()).collect();
    partial_mmse(view, ue, &all, cfg)
}

/// Partial centralized MMSE: designed against the user's partner set only.
pub fn p_mmse(view: &EstimateView, ue: usize, cfg: &NetworkConfig) -> Result<CVector> {
    partial_mmse(view, ue, view.assignment().partners(ue), cfg)
}

/// Per-AP MMSE combiners for the users each AP serves.
///
/// Each AP factors one design matrix over the users it tracks and reuses the
/// factorization for all of its served users. `out[ap][s]` is the combiner
/// for `served_ues(ap)[s]`.
pub fn local_combiners(view: &EstimateView, cfg: &NetworkConfig) -> Result<Vec<Vec<CVector>>> {
    let assignment = view.assignment();
    let p = C64::new(cfg.ue_power_w, 0.0);
    let n = cfg.antennas_per_ap;
    let mut out = Vec::with_capacity(assignment.ap_count());
    for ap in 0..assignment.ap_count() {
        let mut a = CMatrix::identity(n, n) * C64::new(cfg.noise_power_w, 0.0);
        for ue in view.known_ues(ap) {
            let h = view.estimate(ap, ue)?;
            a.gerc(p, h, h, C64::new(1.0, 0.0));
            a += view.error_cov(ap, ue)? * p;
        }
        let solver = HermitianSolver::new(a)?;
        let mut per_ue = Vec::with_capacity(assignment.served_ues(ap).len());
        for &ue in assignment.served_ues(ap) {
            per_ue.push(solver.solve(view.estimate(ap, ue)?)? * p);
        }
        out.push(per_ue);
    }
    Ok(out)
}

/// One AP's soft symbol estimate: the combiner applied to its received data.
pub fn soft_local_estimate(combiner: &CVector, received: &CVector) -> C64 {
    combiner.dotc(received)
}

/// Which users contribute interference moments to the fading-decoder weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightMode {
    /// Moments of every user in the network.
    Optimal,
    /// Moments of the user's partner set only.
    NearlyOptimal,
}

/// Running statistical moments of one user's per-AP effective channels,
/// accumulated over fading realizations and consumed by the fading decoder.
///
/// For user `k` with cluster `A_k`, realization `r` contributes the vector
/// `g_i[j] = v[j,k]^H h[j,i]` for every user `i` (true channels, not
/// estimates) plus the squared norms of the combiners, which scale the noise
/// seen after combining.
pub struct LsfdMoments {
    samples: usize,
    sum_gain: CVector,
    sum_cross: Vec<CMatrix>,
    sum_sq_norms: DVector<f64>,
}

impl LsfdMoments {
    pub fn new(cluster_size: usize, ue_count: usize) -> Self {
        Self {
            samples: 0,
            sum_gain: CVector::zeros(cluster_size),
            sum_cross: vec![CMatrix::zeros(cluster_size, cluster_size); ue_count],
            sum_sq_norms: DVector::zeros(cluster_size),
        }
    }

    /// Records one realization. `gains` has one column per user `i` holding
    /// `v[j,k]^H h[j,i]` over the cluster; column `own` is the user's own
    /// effective channel.
    pub fn record(&mut self, own: usize, gains: &CMatrix, combiner_sq_norms: &[f64]) {
        debug_assert_eq!(gains.nrows(), self.sum_gain.len());
        debug_assert_eq!(gains.ncols(), self.sum_cross.len());
        self.samples += 1;
        self.sum_gain += gains.column(own);
        for (i, cross) in self.sum_cross.iter_mut().enumerate() {
            let g = gains.column(i);
            cross.gerc(C64::new(1.0, 0.0), &g, &g, C64::new(1.0, 0.0));
        }
        for (slot, &sq) in combiner_sq_norms.iter().enumerate() {
            self.sum_sq_norms[slot] += sq;
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Fading-decoder weights and the deterministic effective SINR they
    /// achieve:
    ///
    /// ```text
    /// a = Xi^-1 m,   sinr = p * m^H Xi^-1 m
    /// Xi = sum_{i in set} p E{g_i g_i^H} - p E{g} E{g}^H + noise diag(E{|v|^2})
    /// ```
    ///
    /// where the interference set is every user or the partner set, depending
    /// on `mode`.
    pub fn weights(
        &self,
        own: usize,
        partners: &[usize],
        mode: WeightMode,
        cfg: &NetworkConfig,
    ) -> Result<(CVector, f64)> {
        if self.samples < 2 {
            return Err(SimError::Statistics(format!(
                "fading-decoder moments need at least 2 realizations, got {}",
                self.samples
            )));
        }
        let inv = 1.0 / self.samples as f64;
        let dim = self.sum_gain.len();
        let m = &self.sum_gain * C64::new(inv, 0.0);
        let p = cfg.ue_power_w;
        let mut xi = CMatrix::zeros(dim, dim);
        let contributors: Vec<usize> = match mode {
            WeightMode::Optimal => (0..self.sum_cross.len()).collect(),
            WeightMode::NearlyOptimal => partners.to_vec(),
        };
        debug_assert!(contributors.contains(&own));
        for i in contributors {
            xi += &self.sum_cross[i] * C64::new(p * inv, 0.0);
        }
        xi.gerc(C64::new(-p, 0.0), &m, &m, C64::new(1.0, 0.0));
        for slot in 0..dim {
            xi[(slot, slot)] += C64::new(cfg.noise_power_w * self.sum_sq_norms[slot] * inv, 0.0);
        }
        let a = HermitianSolver::new(xi)?.solve(&m)?;
        let sinr = p * m.dotc(&a).re;
        Ok((a, sinr))
    }
}

/// Spectral efficiency of a deterministic effective SINR, in bit/s/Hz.
pub fn se_from_sinr(sinr: f64, cfg: &NetworkConfig) -> f64 {
    cfg.prelog() * (1.0 + sinr).log2()
}
