//! Master-assisted distributed uplink operation.
//!
//! Each user `k` has a master AP (its strongest serving AP) and assisting
//! serving APs. During the data phase an assisting AP `j` does not forward
//! raw antenna samples; it locally combines with its own per-AP MMSE vector
//! `v[j,k]` and reports three things to the master:
//!
//! 1. one soft symbol estimate `v^H y_j` per data sample,
//! 2. fused channel state `v^H hhat[j,i]` for every user `i` the AP tracks,
//! 3. a residual scalar `mu = v^H (p * sum_i C[j,i] + noise I) v` describing
//!    the AP's own estimation error plus combined noise.
//!
//! The master stacks its raw antenna samples with the reported soft
//! estimates, giving an augmented receive vector of dimension
//! `N + |A_k| - 1`, and solves one small MMSE problem in that space: with
//! `z_i` the augmented effective channel estimate of user `i`,
//!
//! ```text
//! B = p * sum_{i != k} z_i z_i^H
//!     + blockdiag(p * sum_i C[master,i] + noise I_N, diag(mu_j))
//! w = B^-1 z_k,    sinr = p * z_k^H B^-1 z_k
//! ```
//!
//! The design matrix is exactly the centralized one compressed onto the
//! subspace spanned by the master's antennas and the assisting combiners, so
//! the resulting SINR always sits between master-only processing and fully
//! centralized combining.
//!
//! Whether an AP reports all users or only the ones it serves is decided by
//! the scope of the [`EstimateView`] it works from, which is also what
//! separates the scalable variant from the plain one.

use std::collections::BTreeSet;

use crate::channel::EstimateView;
use crate::combining::soft_local_estimate;
use crate::config::NetworkConfig;
use crate::error::{Result, SimError};
use crate::linalg::{quadratic_form, HermitianSolver};
use crate::{C64, CMatrix, CVector};

/// One assisting AP's per-coherence-block report to a user's master AP.
#[derive(Debug, Clone, PartialEq)]
pub struct AsapMessage {
    pub from_ap: usize,
    pub about_ue: usize,
    /// Locally combined data snapshot `v^H y` (one data sample).
    pub soft_estimate: C64,
    /// Fused channel state `(i, v^H hhat[_,i])`, ascending in `i`, one entry
    /// per user the AP tracks.
    pub fused_csi: Vec<(usize, C64)>,
    /// Residual power `v^H (p * sum_i C_i + noise I) v` over the same users.
    pub mu: f64,
}

impl AsapMessage {
    /// Fronthaul cost of this report over one coherence block: one soft
    /// estimate per data sample, the fused channel state, and the residual.
    pub fn scalars_per_block(&self, data_samples: usize) -> usize {
        data_samples + self.fused_csi.len() + 1
    }

    /// Value reported for user `i`, zero when the AP does not track it.
    pub fn csi_for(&self, ue: usize) -> C64 {
        match self.fused_csi.binary_search_by_key(&ue, |&(i, _)| i) {
            Ok(pos) => self.fused_csi[pos].1,
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    /// Flat little-endian wire encoding:
    /// `[about_ue u32][from_ap u32][soft 2xf64][count u32][(ue u32, 2xf64)..][mu f64]`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 16 + 4 + self.fused_csi.len() * 20 + 8);
        out.extend_from_slice(&(self.about_ue as u32).to_le_bytes());
        out.extend_from_slice(&(self.from_ap as u32).to_le_bytes());
        out.extend_from_slice(&self.soft_estimate.re.to_le_bytes());
        out.extend_from_slice(&self.soft_estimate.im.to_le_bytes());
        out.extend_from_slice(&(self.fused_csi.len() as u32).to_le_bytes());
        for &(ue, c) in &self.fused_csi {
            out.extend_from_slice(&(ue as u32).to_le_bytes());
            out.extend_from_slice(&c.re.to_le_bytes());
            out.extend_from_slice(&c.im.to_le_bytes());
        }
        out.extend_from_slice(&self.mu.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        struct Cursor<'a> {
            bytes: &'a [u8],
            pos: usize,
        }
        impl<'a> Cursor<'a> {
            fn take(&mut self, n: usize) -> Result<&'a [u8]> {
                let slice = self
                    .bytes
                    .get(self.pos..self.pos + n)
                    .ok_or_else(|| SimError::Protocol("truncated assisting-AP report".into()))?;
                self.pos += n;
                Ok(slice)
            }
            fn u32(&mut self) -> Result<usize> {
                Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
            }
            fn f64(&mut self) -> Result<f64> {
                Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
            }
            fn c64(&mut self) -> Result<C64> {
                Ok(C64::new(self.f64()?, self.f64()?))
            }
        }
        let mut cur = Cursor { bytes, pos: 0 };
        let about_ue = cur.u32()?;
        let from_ap = cur.u32()?;
        let soft_estimate = cur.c64()?;
        let count = cur.u32()?;
        let mut fused_csi = Vec::with_capacity(count);
        for _ in 0..count {
            let ue = cur.u32()?;
            let c = cur.c64()?;
            fused_csi.push((ue, c));
        }
        let mu = cur.f64()?;
        if cur.pos != bytes.len() {
            return Err(SimError::Protocol("trailing bytes in assisting-AP report".into()));
        }
        Ok(Self { from_ap, about_ue, soft_estimate, fused_csi, mu })
    }
}

/// Builds the report AP `ap` sends to the master of `ue`, given the AP's
/// local combining vector for that user. The view's scope decides which
/// users appear in the fused channel state.
pub fn asap_message(
    view: &EstimateView,
    ap: usize,
    ue: usize,
    combiner: &CVector,
    cfg: &NetworkConfig,
) -> Result<AsapMessage> {
    let assignment = view.assignment();
    if !assignment.serves(ap, ue) {
        return Err(SimError::Protocol(format!(
            "ap {ap} does not serve ue {ue} and cannot assist its master"
        )));
    }
    let tracked = view.known_ues(ap);
    let mut fused_csi = Vec::with_capacity(tracked.len());
    let mut residual = CMatrix::identity(combiner.len(), combiner.len())
        * C64::new(cfg.noise_power_w, 0.0);
    for i in tracked {
        fused_csi.push((i, combiner.dotc(view.estimate(ap, i)?)));
        residual += view.error_cov(ap, i)? * C64::new(cfg.ue_power_w, 0.0);
    }
    Ok(AsapMessage {
        from_ap: ap,
        about_ue: ue,
        soft_estimate: soft_local_estimate(combiner, view.realization().received_data(ap)),
        fused_csi,
        mu: quadratic_form(combiner, &residual),
    })
}

/// The master AP's fused combining problem for one user: the augmented design
/// matrix, the user's augmented effective channel, and the cluster layout.
pub struct MapProblem {
    pub ue: usize,
    pub master: usize,
    /// Assisting APs, ascending; slot `a` of the augmented space beyond the
    /// master's `N` antennas belongs to `asaps[a]`.
    pub asaps: Vec<usize>,
    pub b: CMatrix,
    pub z: CVector,
}

/// Assembles the master's problem from its own estimates plus one report per
/// assisting AP (any order). Reports are validated against the serving
/// cluster before use.
pub fn build_map_problem(
    view: &EstimateView,
    ue: usize,
    messages: &[AsapMessage],
    cfg: &NetworkConfig,
) -> Result<MapProblem> {
    let assignment = view.assignment();
    let master = assignment.master_of(ue);
    let asaps = assignment.assisting_aps(ue);
    if messages.len() != asaps.len() {
        return Err(SimError::Protocol(format!(
            "ue {ue}: expected {} assisting reports, got {}",
            asaps.len(),
            messages.len()
        )));
    }
    let mut slots: Vec<Option<&AsapMessage>> = vec![None; asaps.len()];
    for msg in messages {
        if msg.about_ue != ue {
            return Err(SimError::Protocol(format!(
                "report about ue {} routed to the master of ue {ue}",
                msg.about_ue
            )));
        }
        let slot = asaps
            .binary_search(&msg.from_ap)
            .map_err(|_| {
                SimError::Protocol(format!(
                    "ap {} is not an assisting AP of ue {ue}",
                    msg.from_ap
                ))
            })?;
        if slots[slot].is_some() {
            return Err(SimError::Protocol(format!(
                "duplicate report from ap {} for ue {ue}",
                msg.from_ap
            )));
        }
        if msg.fused_csi.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(SimError::Protocol(format!(
                "fused channel state from ap {} is not strictly ascending",
                msg.from_ap
            )));
        }
        slots[slot] = Some(msg);
    }
    let ordered: Vec<&AsapMessage> = slots.into_iter().map(|s| s.unwrap()).collect();

    let n = cfg.antennas_per_ap;
    let m = n + asaps.len();
    let master_tracked = view.known_ues(master);

    // Users with any augmented channel state: everything the master tracks
    // plus everything any assisting AP reported.
    let mut contributors: BTreeSet<usize> = master_tracked.iter().copied().collect();
    for msg in &ordered {
        contributors.extend(msg.fused_csi.iter().map(|&(i, _)| i));
    }

    let augmented = |i: usize| -> Result<CVector> {
        let mut z = CVector::zeros(m);
        if view.knows(master, i) {
            z.rows_mut(0, n).copy_from(view.estimate(master, i)?);
        }
        for (a, msg) in ordered.iter().enumerate() {
            z[n + a] = msg.csi_for(i);
        }
        Ok(z)
    };

    let p = C64::new(cfg.ue_power_w, 0.0);
    let mut b = CMatrix::zeros(m, m);
    for &i in &contributors {
        if i == ue {
            continue;
        }
        let z_i = augmented(i)?;
        b.gerc(p, &z_i, &z_i, C64::new(1.0, 0.0));
    }
    for row in 0..n {
        for col in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for &i in &master_tracked {
                acc += view.error_cov(master, i)?[(row, col)];
            }
            b[(row, col)] += p * acc;
        }
        b[(row, row)] += C64::new(cfg.noise_power_w, 0.0);
    }
    for (a, msg) in ordered.iter().enumerate() {
        b[(n + a, n + a)] += C64::new(msg.mu, 0.0);
    }

    let z = augmented(ue)?;
    Ok(MapProblem { ue, master, asaps: asaps.to_vec(), b, z })
}

/// The degenerate problem in which the master works alone, ignoring the
/// assisting APs entirely. Lower anchor of the fused scheme's performance.
pub fn master_only_problem(
    view: &EstimateView,
    ue: usize,
    cfg: &NetworkConfig,
) -> Result<MapProblem> {
    let assignment = view.assignment();
    let master = assignment.master_of(ue);
    let n = cfg.antennas_per_ap;
    let p = C64::new(cfg.ue_power_w, 0.0);
    let mut b = CMatrix::identity(n, n) * C64::new(cfg.noise_power_w, 0.0);
    for i in view.known_ues(master) {
        if i != ue {
            let h = view.estimate(master, i)?;
            b.gerc(p, h, h, C64::new(1.0, 0.0));
        }
        b += view.error_cov(master, i)? * p;
    }
    Ok(MapProblem {
        ue,
        master,
        asaps: Vec::new(),
        b,
        z: view.estimate(master, ue)?.clone(),
    })
}

/// The master's combining vector over the augmented receive space.
pub fn map_combiner(problem: &MapProblem) -> Result<CVector> {
    HermitianSolver::new(problem.b.clone())?.solve(&problem.z)
}

/// Effective instantaneous SINR of the fused scheme: `p z^H B^-1 z`.
pub fn maduo_sinr(problem: &MapProblem, cfg: &NetworkConfig) -> Result<f64> {
    let x = HermitianSolver::new(problem.b.clone())?.solve(&problem.z)?;
    Ok(cfg.ue_power_w * problem.z.dotc(&x).re)
}

/// The master's final soft symbol estimate: the combiner applied to the
/// augmented receive vector (its own antennas, then the reported soft
/// estimates in slot order).
pub fn final_estimate(
    problem: &MapProblem,
    combiner: &CVector,
    master_received: &CVector,
    messages: &[AsapMessage],
) -> Result<C64> {
    let n = master_received.len();
    if combiner.len() != n + problem.asaps.len() {
        return Err(SimError::Protocol(format!(
            "combiner dimension {} does not match augmented space {}",
            combiner.len(),
            n + problem.asaps.len()
        )));
    }
    let mut augmented = CVector::zeros(combiner.len());
    augmented.rows_mut(0, n).copy_from(master_received);
    for (a, &ap) in problem.asaps.iter().enumerate() {
        let msg = messages
            .iter()
            .find(|m| m.from_ap == ap && m.about_ue == problem.ue)
            .ok_or_else(|| {
                SimError::Protocol(format!("missing report from ap {ap} for ue {}", problem.ue))
            })?;
        augmented[n + a] = msg.soft_estimate;
    }
    Ok(combiner.dotc(&augmented))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::{assign, ServingAssignment};
    use crate::channel::{
        ChannelFactors, ChannelRealization, EstimationModel, EstimationScope,
    };
    use crate::topology::{generate_setup, ChannelStatistics};
    use nalgebra::DMatrix;

    struct Fixture {
        cfg: NetworkConfig,
        stats: ChannelStatistics,
        assignment: ServingAssignment,
        model: EstimationModel,
        factors: ChannelFactors,
    }

    impl Fixture {
        fn generated(cfg: NetworkConfig, setup: u64) -> Self {
            let (_, stats) = generate_setup(&cfg, setup).unwrap();
            let assignment = assign(&stats, &cfg).unwrap();
            Self::from_parts(cfg, stats, assignment)
        }

        fn from_parts(
            cfg: NetworkConfig,
            stats: ChannelStatistics,
            assignment: ServingAssignment,
        ) -> Self {
            let model = EstimationModel::new(&stats, &assignment, &cfg).unwrap();
            let factors = ChannelFactors::new(&stats).unwrap();
            Self { cfg, stats, assignment, model, factors }
        }

        fn realization(&self, r: u64) -> ChannelRealization {
            ChannelRealization::generate(
                &self.factors,
                &self.stats,
                &self.model,
                &self.assignment,
                &self.cfg,
                0,
                r,
            )
            .unwrap()
        }
    }

    fn default_fixture() -> Fixture {
        Fixture::generated(
            NetworkConfig {
                ap_count: 5,
                antennas_per_ap: 2,
                ue_count: 6,
                pilot_samples: 3,
                coherence_samples: 23,
                side_length_m: 600.0,
                seed: 31,
                ..Default::default()
            },
            0,
        )
    }

    /// Reports + problem for one user under one scope, reusing the local
    /// combiners exactly as the campaign would.
    fn problem_for(
        fx: &Fixture,
        real: &ChannelRealization,
        ue: usize,
        scope: EstimationScope,
    ) -> (MapProblem, Vec<AsapMessage>) {
        let view = real.view(&fx.model, &fx.assignment, scope);
        let combiners = crate::combining::local_combiners(&view, &fx.cfg).unwrap();
        let messages: Vec<AsapMessage> = fx
            .assignment
            .assisting_aps(ue)
            .iter()
            .map(|&ap| {
                let slot =
                    fx.assignment.served_ues(ap).iter().position(|&u| u == ue).unwrap();
                asap_message(&view, ap, ue, &combiners[ap][slot], &fx.cfg).unwrap()
            })
            .collect();
        let problem = build_map_problem(&view, ue, &messages, &fx.cfg).unwrap();
        (problem, messages)
    }

    #[test]
    fn message_roundtrips_through_bytes() {
        let msg = AsapMessage {
            from_ap: 7,
            about_ue: 3,
            soft_estimate: C64::new(0.25, -1.5),
            fused_csi: vec![(0, C64::new(1.0, 2.0)), (3, C64::new(-0.5, 0.0))],
            mu: 0.125,
        };
        let decoded = AsapMessage::from_bytes(&msg.to_bytes()).unwrap();
        assert_eq!(msg, decoded);
        assert_eq!(msg.scalars_per_block(10), 10 + 2 + 1);
        assert!(AsapMessage::from_bytes(&msg.to_bytes()[..11]).is_err());
    }

    #[test]
    fn design_matrix_is_hermitian_positive_definite() {
        let fx = default_fixture();
        let real = fx.realization(0);
        for ue in 0..fx.cfg.ue_count {
            for scope in [EstimationScope::AllUes, EstimationScope::ServedOnly] {
                let (problem, _) = problem_for(&fx, &real, ue, scope);
                assert!(
                    crate::linalg::hermitian_defect(&problem.b)
                        <= 1e-12 * (1.0 + problem.b.norm())
                );
                assert!(HermitianSolver::new(problem.b.clone()).is_ok());
                let sinr = maduo_sinr(&problem, &fx.cfg).unwrap();
                assert!(sinr.is_finite() && sinr > 0.0);
            }
        }
    }

    #[test]
    fn solve_matches_explicit_inverse() {
        let fx = default_fixture();
        let real = fx.realization(1);
        for ue in 0..fx.cfg.ue_count {
            let (problem, _) = problem_for(&fx, &real, ue, EstimationScope::AllUes);
            let b_inv = problem.b.clone().try_inverse().unwrap();
            let expected_w = &b_inv * &problem.z;
            let w = map_combiner(&problem).unwrap();
            assert!((&w - &expected_w).norm() < 1e-9 * expected_w.norm());
            let expected_sinr =
                fx.cfg.ue_power_w * (problem.z.adjoint() * &b_inv * &problem.z)[(0, 0)].re;
            let sinr = maduo_sinr(&problem, &fx.cfg).unwrap();
            assert!((sinr - expected_sinr).abs() < 1e-9 * expected_sinr);
        }
    }

    #[test]
    fn identity_design_returns_the_effective_channel() {
        let z = CVector::from_vec(vec![C64::new(1.0, 1.0), C64::new(0.0, -2.0)]);
        let problem = MapProblem {
            ue: 0,
            master: 0,
            asaps: vec![1],
            b: CMatrix::identity(2, 2),
            z: z.clone(),
        };
        let w = map_combiner(&problem).unwrap();
        assert!((&w - &z).norm() < 1e-12);
        let cfg = NetworkConfig { ue_power_w: 0.5, ..Default::default() };
        let sinr = maduo_sinr(&problem, &cfg).unwrap();
        assert!((sinr - 0.5 * z.norm_squared()).abs() < 1e-12);
    }

    #[test]
    fn assisting_scale_does_not_move_the_sinr() {
        // Scaling an assisting AP's combiner rescales its whole report; the
        // master's quotient is invariant to that.
        let fx = default_fixture();
        let real = fx.realization(2);
        let ue = (0..fx.cfg.ue_count)
            .find(|&u| !fx.assignment.assisting_aps(u).is_empty())
            .expect("some user has an assisting AP");
        let view = real.view(&fx.model, &fx.assignment, EstimationScope::AllUes);
        let combiners = crate::combining::local_combiners(&view, &fx.cfg).unwrap();
        let scale = C64::new(3.0, -4.0);
        let build = |scaled: bool| {
            let messages: Vec<AsapMessage> = fx
                .assignment
                .assisting_aps(ue)
                .iter()
                .map(|&ap| {
                    let slot =
                        fx.assignment.served_ues(ap).iter().position(|&u| u == ue).unwrap();
                    let mut v = combiners[ap][slot].clone();
                    if scaled {
                        v *= scale;
                    }
                    asap_message(&view, ap, ue, &v, &fx.cfg).unwrap()
                })
                .collect();
            let problem = build_map_problem(&view, ue, &messages, &fx.cfg).unwrap();
            maduo_sinr(&problem, &fx.cfg).unwrap()
        };
        let plain = build(false);
        let scaled = build(true);
        assert!((plain - scaled).abs() < 1e-9 * plain);
    }

    #[test]
    fn master_alone_never_beats_the_assisted_master() {
        let fx = default_fixture();
        for r in 0..5 {
            let real = fx.realization(r);
            let view = real.view(&fx.model, &fx.assignment, EstimationScope::AllUes);
            for ue in 0..fx.cfg.ue_count {
                let (problem, _) = problem_for(&fx, &real, ue, EstimationScope::AllUes);
                let assisted = maduo_sinr(&problem, &fx.cfg).unwrap();
                let alone = master_only_problem(&view, ue, &fx.cfg).unwrap();
                let alone_sinr = maduo_sinr(&alone, &fx.cfg).unwrap();
                assert!(
                    alone_sinr <= assisted * (1.0 + 1e-9),
                    "ue {ue} r {r}: alone {alone_sinr} > assisted {assisted}"
                );
            }
        }
    }

    #[test]
    fn two_single_antenna_aps_hit_the_closed_form() {
        // One user, two single-antenna APs: the assisted master's SINR is the
        // sum of the per-AP estimate SNRs, however the assisting AP scales
        // its combiner.
        let cfg = NetworkConfig {
            ap_count: 2,
            antennas_per_ap: 1,
            ue_count: 1,
            pilot_samples: 1,
            coherence_samples: 11,
            ue_power_w: 0.7,
            noise_power_w: 0.3,
            shadow_std_db: 0.0,
            seed: 5,
            ..Default::default()
        };
        let beta = DMatrix::from_row_slice(2, 1, &[2.0, 0.5]);
        let covariance = vec![
            CMatrix::from_element(1, 1, C64::new(2.0, 0.0)),
            CMatrix::from_element(1, 1, C64::new(0.5, 0.0)),
        ];
        let stats = ChannelStatistics::from_parts(beta, covariance).unwrap();
        let assignment =
            ServingAssignment::from_decisions(1, 2, vec![0], vec![0], vec![vec![0], vec![0]])
                .unwrap();
        let fx = Fixture::from_parts(cfg, stats, assignment);
        let real = fx.realization(4);
        let (problem, _) = problem_for(&fx, &real, 0, EstimationScope::AllUes);
        let sinr = maduo_sinr(&problem, &fx.cfg).unwrap();
        let p = fx.cfg.ue_power_w;
        let noise = fx.cfg.noise_power_w;
        let mut expected = 0.0;
        for ap in 0..2 {
            let h_hat = real
                .view(&fx.model, &fx.assignment, EstimationScope::AllUes)
                .estimate(ap, 0)
                .unwrap()[0];
            let c = fx.model.error_cov(ap, 0)[(0, 0)].re;
            expected += p * h_hat.norm_sqr() / (p * c + noise);
        }
        assert!((sinr - expected).abs() < 1e-9 * expected, "sinr {sinr} vs {expected}");
    }

    #[test]
    fn full_serving_sets_collapse_the_scalable_gap() {
        // When every AP serves every user, the served-only scope tracks the
        // same users as the full scope, so both flavors build the same
        // problem.
        let cfg = NetworkConfig {
            ap_count: 3,
            antennas_per_ap: 2,
            ue_count: 2,
            pilot_samples: 2,
            coherence_samples: 12,
            side_length_m: 300.0,
            seed: 13,
            ..Default::default()
        };
        let (_, stats) = generate_setup(&cfg, 0).unwrap();
        let masters: Vec<usize> = (0..2)
            .map(|ue| {
                (0..3).max_by(|&a, &b| stats.beta[(a, ue)].partial_cmp(&stats.beta[(b, ue)]).unwrap()).unwrap()
            })
            .collect();
        let assignment = ServingAssignment::from_decisions(
            2,
            3,
            vec![0, 1],
            masters,
            vec![vec![0, 1], vec![0, 1], vec![0, 1]],
        )
        .unwrap();
        let fx = Fixture::from_parts(cfg, stats, assignment);
        let real = fx.realization(0);
        for ue in 0..2 {
            let (full, _) = problem_for(&fx, &real, ue, EstimationScope::AllUes);
            let (scoped, _) = problem_for(&fx, &real, ue, EstimationScope::ServedOnly);
            assert!((&full.b - &scoped.b).norm() <= 1e-14 * full.b.norm());
            assert!((&full.z - &scoped.z).norm() <= 1e-14 * full.z.norm());
        }
    }

    #[test]
    fn malformed_report_sets_are_rejected() {
        let fx = default_fixture();
        let real = fx.realization(3);
        let ue = (0..fx.cfg.ue_count)
            .find(|&u| fx.assignment.assisting_aps(u).len() >= 2)
            .expect("some user has two assisting APs");
        let view = real.view(&fx.model, &fx.assignment, EstimationScope::AllUes);
        let (_, messages) = problem_for(&fx, &real, ue, EstimationScope::AllUes);

        let missing = &messages[1..];
        assert!(matches!(
            build_map_problem(&view, ue, missing, &fx.cfg),
            Err(SimError::Protocol(_))
        ));

        let mut duplicated = messages.clone();
        duplicated[1] = duplicated[0].clone();
        assert!(matches!(
            build_map_problem(&view, ue, &duplicated, &fx.cfg),
            Err(SimError::Protocol(_))
        ));

        let mut misrouted = messages.clone();
        misrouted[0].about_ue = (ue + 1) % fx.cfg.ue_count;
        assert!(matches!(
            build_map_problem(&view, ue, &misrouted, &fx.cfg),
            Err(SimError::Protocol(_))
        ));

        let mut foreign = messages.clone();
        foreign[0].from_ap = fx.assignment.master_of(ue);
        assert!(matches!(
            build_map_problem(&view, ue, &foreign, &fx.cfg),
            Err(SimError::Protocol(_))
        ));

        let mut unsorted = messages.clone();
        if unsorted[0].fused_csi.len() >= 2 {
            unsorted[0].fused_csi.swap(0, 1);
            assert!(matches!(
                build_map_problem(&view, ue, &unsorted, &fx.cfg),
                Err(SimError::Protocol(_))
            ));
        }
    }

    #[test]
    fn final_estimate_combines_master_and_reports() {
        let fx = default_fixture();
        let real = fx.realization(4);
        let ue = (0..fx.cfg.ue_count)
            .find(|&u| !fx.assignment.assisting_aps(u).is_empty())
            .unwrap();
        let (problem, messages) = problem_for(&fx, &real, ue, EstimationScope::AllUes);
        let w = map_combiner(&problem).unwrap();
        let est = final_estimate(&problem, &w, real.received_data(problem.master), &messages)
            .unwrap();
        // Rebuild the augmented vector by hand.
        let n = fx.cfg.antennas_per_ap;
        let mut augmented = CVector::zeros(n + problem.asaps.len());
        augmented.rows_mut(0, n).copy_from(real.received_data(problem.master));
        for (a, msg) in messages.iter().enumerate() {
            assert_eq!(msg.from_ap, problem.asaps[a]);
            augmented[n + a] = msg.soft_estimate;
        }
        let expected = w.dotc(&augmented);
        assert!((est - expected).norm() < 1e-12 * expected.norm().max(1e-30));
    }
}
