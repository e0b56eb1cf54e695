//! Fronthaul signaling and arithmetic-cost accounting.
//!
//! Counts are per coherence block. Fronthaul is measured in complex scalars
//! crossing the fronthaul between APs (or AP and central unit); arithmetic is
//! measured in complex multiplications (divisions counted as multiplications)
//! spent on combiner design, combining, and report formation. Statistics-only
//! quantities (error covariances, decoder weights) refresh on the much slower
//! setup timescale and are not charged to the block.
//!
//! Conventions used by every formula:
//!
//! * accumulating a Hermitian design matrix of dimension `M` from `S` rank-one
//!   terms touches only one triangle: `S * (M^2 + M) / 2`;
//! * solving one Hermitian system of dimension `M` by elimination plus two
//!   triangular substitutions: `(M^3 - M) / 3 + M^2`;
//! * applying a combiner of dimension `M` to the block's data samples:
//!   `M * tau_u`;
//! * forming one assisting-AP report with `Omega` tracked users: `Omega * N`
//!   fused-channel inner products plus `N^2 + N` for the residual quadratic
//!   form (the soft estimates are the data combining already counted).

use crate::assignment::ServingAssignment;
use crate::config::NetworkConfig;
use crate::evaluation::Scheme;

/// Cost model of an operating mode. Several spectral-efficiency schemes share
/// one cost model (both centralized designs ship the same samples; both
/// decoder-fused per-AP schemes ship the same soft estimates).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CostScheme {
    /// Every AP forwards all antenna samples of the whole block.
    Centralized,
    /// Every AP forwards one soft estimate per data sample per served user.
    Distributed,
    /// Assisting APs report soft estimates, fused channel state for all
    /// users, and one residual scalar to each master.
    Maduo,
    /// As [`CostScheme::Maduo`], but the channel state covers only the
    /// assisting AP's served users.
    MaduoScl,
}

impl CostScheme {
    pub const ALL: [CostScheme; 4] = [
        CostScheme::Centralized,
        CostScheme::Distributed,
        CostScheme::Maduo,
        CostScheme::MaduoScl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CostScheme::Centralized => "centralized",
            CostScheme::Distributed => "distributed",
            CostScheme::Maduo => "maduo",
            CostScheme::MaduoScl => "maduo-scl",
        }
    }

    /// The cost model a spectral-efficiency scheme operates under.
    pub fn of(scheme: Scheme) -> CostScheme {
        match scheme {
            Scheme::CMmse | Scheme::PMmse => CostScheme::Centralized,
            Scheme::LMmse | Scheme::LpMmse => CostScheme::Distributed,
            Scheme::Maduo => CostScheme::Maduo,
            Scheme::MaduoScl => CostScheme::MaduoScl,
        }
    }
}

impl std::fmt::Display for CostScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Multiplications to accumulate a Hermitian design matrix of dimension `m`
/// from `terms` rank-one terms (one triangle).
pub fn gram_mults(terms: usize, m: usize) -> usize {
    terms * (m * m + m) / 2
}

/// Multiplications (and divisions) to solve one Hermitian system of
/// dimension `m`: triangular elimination plus forward and back substitution.
pub fn solve_mults(m: usize) -> usize {
    (m * m * m - m) / 3 + m * m
}

/// Number of users an AP assists: served users mastered elsewhere.
fn assists(assignment: &ServingAssignment, ap: usize) -> usize {
    assignment.served_ues(ap).len() - assignment.master_ues(ap).len()
}

/// Total fronthaul load of one coherence block, in complex scalars.
pub fn fronthaul_scalars(
    scheme: CostScheme,
    assignment: &ServingAssignment,
    cfg: &NetworkConfig,
) -> usize {
    let tau_u = cfg.data_samples();
    match scheme {
        CostScheme::Centralized => {
            cfg.coherence_samples * cfg.antennas_per_ap * cfg.ap_count
        }
        CostScheme::Distributed => {
            (0..cfg.ap_count).map(|ap| tau_u * assignment.served_ues(ap).len()).sum()
        }
        CostScheme::Maduo => (0..cfg.ap_count)
            .map(|ap| (tau_u + cfg.ue_count + 1) * assists(assignment, ap))
            .sum(),
        CostScheme::MaduoScl => (0..cfg.ap_count)
            .map(|ap| {
                (tau_u + assignment.served_ues(ap).len() + 1) * assists(assignment, ap)
            })
            .sum(),
    }
}

/// Complex multiplications charged to one user over one coherence block.
///
/// The master-assisted master works in dimension `N + |A_k| - 1`; its design
/// matrix collects one rank-one term per interfering user it has any channel
/// state for.
pub fn mults_for_ue(
    scheme: CostScheme,
    ue: usize,
    assignment: &ServingAssignment,
    cfg: &NetworkConfig,
) -> usize {
    let n = cfg.antennas_per_ap;
    let tau_u = cfg.data_samples();
    let k = cfg.ue_count;
    let cluster = assignment.serving_aps(ue);
    match scheme {
        CostScheme::Centralized => {
            let m = n * cluster.len();
            gram_mults(k, m) + solve_mults(m) + m * tau_u
        }
        CostScheme::Distributed => cluster
            .iter()
            .map(|&ap| {
                gram_mults(assignment.served_ues(ap).len(), n) + solve_mults(n) + n * tau_u
            })
            .sum(),
        CostScheme::Maduo | CostScheme::MaduoScl => {
            let mut total = 0;
            let mut known = std::collections::BTreeSet::new();
            for &ap in cluster {
                if ap == assignment.master_of(ue) {
                    known.extend(assignment.served_ues(ap).iter().copied());
                    continue;
                }
                let (design_terms, omega) = match scheme {
                    CostScheme::Maduo => (k, k),
                    _ => {
                        let served = assignment.served_ues(ap).len();
                        (served, served)
                    }
                };
                // Local combiner design and solve, data combining, report
                // formation (fused channel state plus residual).
                total += gram_mults(design_terms, n)
                    + solve_mults(n)
                    + n * tau_u
                    + omega * n
                    + n * n
                    + n;
                known.extend(assignment.served_ues(ap).iter().copied());
            }
            let m = n + cluster.len() - 1;
            let interferers = match scheme {
                CostScheme::Maduo => k - 1,
                _ => known.len() - 1,
            };
            total + gram_mults(interferers, m) + solve_mults(m) + m * tau_u
        }
    }
}

/// Per-user multiplication counts for one setup's assignment.
pub fn mult_report(
    scheme: CostScheme,
    assignment: &ServingAssignment,
    cfg: &NetworkConfig,
) -> Vec<usize> {
    (0..cfg.ue_count).map(|ue| mults_for_ue(scheme, ue, assignment, cfg)).collect()
}
