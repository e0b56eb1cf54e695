//! Monte Carlo spectral-efficiency campaigns.
//!
//! A campaign sweeps `num_setups` random network geometries; within each
//! setup it sweeps `num_realizations` fading realizations and evaluates every
//! requested scheme on the identical realizations. Centralized and
//! master-assisted schemes average `log2(1 + sinr)` over realizations
//! (instantaneous effective SINR); the per-AP schemes accumulate the
//! statistical moments their fading decoder needs and convert them to one
//! deterministic SINR per user at the end.
//!
//! Realizations are processed in parallel but folded in realization order, so
//! campaign output is bitwise identical for any number of worker threads.

use rayon::prelude::*;

use crate::assignment::{assign, ServingAssignment};
use crate::channel::{
    ChannelFactors, ChannelRealization, EstimateView, EstimationModel, EstimationScope,
};
use crate::combining::{
    c_mmse, local_combiners, p_mmse, se_from_sinr, stack_estimates, LsfdMoments, WeightMode,
};
use crate::config::NetworkConfig;
use crate::error::{Result, SimError};
use crate::maduo::{asap_message, build_map_problem, maduo_sinr, AsapMessage};
use crate::topology::generate_setup;
use crate::{CMatrix, CVector};

/// Uplink receive strategies the campaign can evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    /// Centralized MMSE designed against every user.
    CMmse,
    /// Centralized MMSE designed against the partner set.
    PMmse,
    /// Per-AP MMSE against all users, fused by the statistical decoder.
    LMmse,
    /// Per-AP MMSE against served users only, fused by the statistical
    /// decoder restricted to partner moments.
    LpMmse,
    /// Master-assisted operation, assisting APs reporting all users.
    Maduo,
    /// Master-assisted operation, assisting APs reporting served users only.
    MaduoScl,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::CMmse,
        Scheme::PMmse,
        Scheme::LMmse,
        Scheme::LpMmse,
        Scheme::Maduo,
        Scheme::MaduoScl,
    ];

    fn idx(self) -> usize {
        match self {
            Scheme::CMmse => 0,
            Scheme::PMmse => 1,
            Scheme::LMmse => 2,
            Scheme::LpMmse => 3,
            Scheme::Maduo => 4,
            Scheme::MaduoScl => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scheme::CMmse => "c-mmse",
            Scheme::PMmse => "p-mmse",
            Scheme::LMmse => "l-mmse",
            Scheme::LpMmse => "lp-mmse",
            Scheme::Maduo => "maduo",
            Scheme::MaduoScl => "maduo-scl",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|scheme| scheme.name() == s)
            .ok_or_else(|| {
                SimError::Config(format!(
                    "unknown scheme '{s}' (expected one of: c-mmse, p-mmse, l-mmse, lp-mmse, maduo, maduo-scl)"
                ))
            })
    }
}

/// One spectral-efficiency sample: one scheme, one setup, one user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeSample {
    pub scheme: Scheme,
    pub setup: u64,
    pub ue: usize,
    pub se: f64,
}

/// All samples of a campaign, ordered scheme-major, then setup, then user.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignOutput {
    pub schemes: Vec<Scheme>,
    pub samples: Vec<SeSample>,
}

impl CampaignOutput {
    pub fn samples_for(&self, scheme: Scheme) -> impl Iterator<Item = &SeSample> {
        self.samples.iter().filter(move |s| s.scheme == scheme)
    }

    /// Empirical distribution of a scheme's per-user spectral efficiency:
    /// `(value, fraction of samples <= value)`, strictly ascending in value,
    /// ending at fraction exactly 1.
    pub fn cdf(&self, scheme: Scheme) -> Vec<(f64, f64)> {
        let mut values: Vec<f64> = self.samples_for(scheme).map(|s| s.se).collect();
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let total = values.len();
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (rank, v) in values.into_iter().enumerate() {
            let fraction = (rank + 1) as f64 / total as f64;
            match out.last_mut() {
                Some(last) if last.0 == v => last.1 = fraction,
                _ => out.push((v, fraction)),
            }
        }
        out
    }
}

/// Instantaneous effective SINR of an arbitrary combining vector `v` stacked
/// over a user's serving cluster, evaluated against every user's channel
/// estimate and the full estimation-error statistics:
///
/// ```text
/// sinr = p |v^H hhat_k|^2 /
///        (sum_{i != k} p |v^H hhat_i|^2 + v^H (p sum_i C_i + noise I) v)
/// ```
///
/// The fully centralized combiner maximizes this quantity over all `v`.
pub fn sinr_centralized(
    view: &EstimateView,
    ue: usize,
    v: &CVector,
    cfg: &NetworkConfig,
) -> Result<f64> {
    let assignment = view.assignment();
    let cluster = assignment.serving_aps(ue);
    let n = cfg.antennas_per_ap;
    let p = cfg.ue_power_w;
    let mut signal = 0.0;
    let mut interference = 0.0;
    for i in 0..assignment.ue_count() {
        let h = stack_estimates(view, cluster, i, n)?;
        let power = p * v.dotc(&h).norm_sqr();
        if i == ue {
            signal = power;
        } else {
            interference += power;
        }
    }
    let mut residual = cfg.noise_power_w * v.norm_squared();
    for (slot, &ap) in cluster.iter().enumerate() {
        let seg = v.rows(slot * n, n);
        let c_total = view.model().error_cov_total(ap);
        residual += p * (seg.adjoint() * c_total * seg)[(0, 0)].re;
    }
    Ok(signal / (interference + residual))
}

/// What one realization contributes to the campaign accumulators.
struct Contribution {
    /// `log2(1 + sinr)` per user, for schemes averaged over realizations.
    logs: [Option<Vec<f64>>; 6],
    /// Decoder inputs per user for the all-user per-AP scheme.
    lsfd_all: Option<Vec<(CMatrix, Vec<f64>)>>,
    /// Decoder inputs per user for the served-only per-AP scheme.
    lsfd_served: Option<Vec<(CMatrix, Vec<f64>)>>,
}

/// Per-setup precomputed context shared by all realizations.
struct SetupContext<'a> {
    cfg: &'a NetworkConfig,
    setup: u64,
    stats: crate::topology::ChannelStatistics,
    assignment: ServingAssignment,
    model: EstimationModel,
    factors: ChannelFactors,
    /// `slot_of[ue][c]`: position of `ue` in `served_ues(cluster[c])`.
    slot_of: Vec<Vec<usize>>,
}

impl<'a> SetupContext<'a> {
    fn new(cfg: &'a NetworkConfig, setup: u64) -> Result<Self> {
        let (_, stats) = generate_setup(cfg, setup)?;
        let assignment = assign(&stats, cfg)?;
        let model = EstimationModel::new(&stats, &assignment, cfg)?;
        let factors = ChannelFactors::new(&stats)?;
        let slot_of = (0..cfg.ue_count)
            .map(|ue| {
                assignment
                    .serving_aps(ue)
                    .iter()
                    .map(|&ap| {
                        assignment
                            .served_ues(ap)
                            .binary_search(&ue)
                            .expect("serving sets and clusters are duals")
                    })
                    .collect()
            })
            .collect();
        Ok(Self { cfg, setup, stats, assignment, model, factors, slot_of })
    }

    fn combiner<'c>(
        &self,
        combiners: &'c [Vec<CVector>],
        ue: usize,
        cluster_idx: usize,
    ) -> &'c CVector {
        let ap = self.assignment.serving_aps(ue)[cluster_idx];
        &combiners[ap][self.slot_of[ue][cluster_idx]]
    }

    /// Decoder inputs for one user: the matrix of combined effective channels
    /// `g[c, i] = v[ap_c,ue]^H h[ap_c, i]` over true channels, plus the
    /// squared combiner norms that scale the post-combining noise.
    fn decoder_inputs(
        &self,
        real: &ChannelRealization,
        combiners: &[Vec<CVector>],
        ue: usize,
    ) -> (CMatrix, Vec<f64>) {
        let cluster = self.assignment.serving_aps(ue);
        let k = self.cfg.ue_count;
        let mut gains = CMatrix::zeros(cluster.len(), k);
        let mut norms = Vec::with_capacity(cluster.len());
        for (c, &ap) in cluster.iter().enumerate() {
            let v = self.combiner(combiners, ue, c);
            for i in 0..k {
                gains[(c, i)] = v.dotc(real.true_channel(ap, i));
            }
            norms.push(v.norm_squared());
        }
        (gains, norms)
    }

    /// Master-assisted SINR for every user under the given scope, reusing
    /// this realization's per-AP combiners.
    fn maduo_sinrs(
        &self,
        view: &EstimateView,
        combiners: &[Vec<CVector>],
    ) -> Result<Vec<f64>> {
        let k = self.cfg.ue_count;
        let mut out = Vec::with_capacity(k);
        for ue in 0..k {
            let messages: Vec<AsapMessage> = self
                .assignment
                .assisting_aps(ue)
                .iter()
                .map(|&ap| {
                    let slot = self
                        .assignment
                        .served_ues(ap)
                        .binary_search(&ue)
                        .expect("assisting APs serve the user");
                    asap_message(view, ap, ue, &combiners[ap][slot], self.cfg)
                })
                .collect::<Result<_>>()?;
            let problem = build_map_problem(view, ue, &messages, self.cfg)?;
            out.push(maduo_sinr(&problem, self.cfg)?);
        }
        Ok(out)
    }

    fn realization_contribution(
        &self,
        realization: u64,
        wants: &[bool; 6],
    ) -> Result<Contribution> {
        let cfg = self.cfg;
        let k = cfg.ue_count;
        let real = ChannelRealization::generate(
            &self.factors,
            &self.stats,
            &self.model,
            &self.assignment,
            cfg,
            self.setup,
            realization,
        )?;
        let mut contribution = Contribution {
            logs: Default::default(),
            lsfd_all: None,
            lsfd_served: None,
        };

        let need_all =
            wants[Scheme::CMmse.idx()] || wants[Scheme::PMmse.idx()] || wants[Scheme::LMmse.idx()] || wants[Scheme::Maduo.idx()];
        let need_served = wants[Scheme::LpMmse.idx()] || wants[Scheme::MaduoScl.idx()];

        if need_all {
            let view = real.view(&self.model, &self.assignment, EstimationScope::AllUes);
            if wants[Scheme::CMmse.idx()] {
                let mut logs = Vec::with_capacity(k);
                for ue in 0..k {
                    let v = c_mmse(&view, ue, cfg)?;
                    logs.push((1.0 + sinr_centralized(&view, ue, &v, cfg)?).log2());
                }
                contribution.logs[Scheme::CMmse.idx()] = Some(logs);
            }
            if wants[Scheme::PMmse.idx()] {
                let mut logs = Vec::with_capacity(k);
                for ue in 0..k {
                    let v = p_mmse(&view, ue, cfg)?;
                    logs.push((1.0 + sinr_centralized(&view, ue, &v, cfg)?).log2());
                }
                contribution.logs[Scheme::PMmse.idx()] = Some(logs);
            }
            if wants[Scheme::LMmse.idx()] || wants[Scheme::Maduo.idx()] {
                let combiners = local_combiners(&view, cfg)?;
                if wants[Scheme::LMmse.idx()] {
                    let inputs = (0..k)
                        .map(|ue| self.decoder_inputs(&real, &combiners, ue))
                        .collect();
                    contribution.lsfd_all = Some(inputs);
                }
                if wants[Scheme::Maduo.idx()] {
                    let sinrs = self.maduo_sinrs(&view, &combiners)?;
                    contribution.logs[Scheme::Maduo.idx()] =
                        Some(sinrs.into_iter().map(|s| (1.0 + s).log2()).collect());
                }
            }
        }

        if need_served {
            let view = real.view(&self.model, &self.assignment, EstimationScope::ServedOnly);
            let combiners = local_combiners(&view, cfg)?;
            if wants[Scheme::LpMmse.idx()] {
                let inputs = (0..k)
                    .map(|ue| self.decoder_inputs(&real, &combiners, ue))
                    .collect();
                contribution.lsfd_served = Some(inputs);
            }
            if wants[Scheme::MaduoScl.idx()] {
                let sinrs = self.maduo_sinrs(&view, &combiners)?;
                contribution.logs[Scheme::MaduoScl.idx()] =
                    Some(sinrs.into_iter().map(|s| (1.0 + s).log2()).collect());
            }
        }

        Ok(contribution)
    }
}

/// How many realizations each parallel batch spans. Batches are processed in
/// order and folded sequentially, so this only bounds peak memory, not the
/// result.
const BATCH: u64 = 64;

/// Runs a full campaign and returns every per-user spectral-efficiency
/// sample, ordered scheme-major in the order given (duplicates ignored).
///
/// The result is a pure function of the configuration and scheme set:
/// realizations are distributed over worker threads but combined in a fixed
/// order, so outputs match bitwise across thread counts, and every scheme is
/// evaluated on the same realizations whether or not others are requested.
pub fn run_campaign(cfg: &NetworkConfig, schemes: &[Scheme]) -> Result<CampaignOutput> {
    cfg.validate()?;
    let mut wants = [false; 6];
    let mut ordered: Vec<Scheme> = Vec::new();
    for &scheme in schemes {
        if !wants[scheme.idx()] {
            wants[scheme.idx()] = true;
            ordered.push(scheme);
        }
    }
    if ordered.is_empty() {
        return Err(SimError::Config("no schemes requested".into()));
    }

    let k = cfg.ue_count;
    let r_total = cfg.num_realizations as u64;
    let mut samples: Vec<Vec<SeSample>> = vec![Vec::new(); ordered.len()];

    for setup in 0..cfg.num_setups as u64 {
        let ctx = SetupContext::new(cfg, setup)?;

        let mut log_sums: [Option<Vec<f64>>; 6] = Default::default();
        for scheme in [Scheme::CMmse, Scheme::PMmse, Scheme::Maduo, Scheme::MaduoScl] {
            if wants[scheme.idx()] {
                log_sums[scheme.idx()] = Some(vec![0.0; k]);
            }
        }
        let new_moments = || -> Vec<LsfdMoments> {
            (0..k)
                .map(|ue| LsfdMoments::new(ctx.assignment.serving_aps(ue).len(), k))
                .collect()
        };
        let mut moments_all = wants[Scheme::LMmse.idx()].then(new_moments);
        let mut moments_served = wants[Scheme::LpMmse.idx()].then(new_moments);

        let mut start = 0u64;
        while start < r_total {
            let end = (start + BATCH).min(r_total);
            let batch: Vec<Contribution> = (start..end)
                .into_par_iter()
                .map(|r| ctx.realization_contribution(r, &wants))
                .collect::<Result<_>>()?;
            for contribution in batch {
                for (sums, logs) in log_sums.iter_mut().zip(&contribution.logs) {
                    if let (Some(sums), Some(logs)) = (sums.as_mut(), logs.as_ref()) {
                        for ue in 0..k {
                            sums[ue] += logs[ue];
                        }
                    }
                }
                if let (Some(moments), Some(inputs)) =
                    (moments_all.as_mut(), contribution.lsfd_all)
                {
                    for (ue, (gains, norms)) in inputs.into_iter().enumerate() {
                        moments[ue].record(ue, &gains, &norms);
                    }
                }
                if let (Some(moments), Some(inputs)) =
                    (moments_served.as_mut(), contribution.lsfd_served)
                {
                    for (ue, (gains, norms)) in inputs.into_iter().enumerate() {
                        moments[ue].record(ue, &gains, &norms);
                    }
                }
            }
            start = end;
        }

        for (pos, &scheme) in ordered.iter().enumerate() {
            for ue in 0..k {
                let se = match scheme {
                    Scheme::CMmse | Scheme::PMmse | Scheme::Maduo | Scheme::MaduoScl => {
                        let sums = log_sums[scheme.idx()].as_ref().unwrap();
                        cfg.prelog() * sums[ue] / r_total as f64
                    }
                    Scheme::LMmse | Scheme::LpMmse => {
                        let (moments, mode) = match scheme {
                            Scheme::LMmse => (moments_all.as_ref().unwrap(), WeightMode::Optimal),
                            _ => (moments_served.as_ref().unwrap(), WeightMode::NearlyOptimal),
                        };
                        let (_, sinr) = moments[ue].weights(
                            ue,
                            ctx.assignment.partners(ue),
                            mode,
                            cfg,
                        )?;
                        se_from_sinr(sinr, cfg)
                    }
                };
                samples[pos].push(SeSample { scheme, setup, ue, se });
            }
        }
    }

    Ok(CampaignOutput { schemes: ordered, samples: samples.into_iter().flatten().collect() })
}
