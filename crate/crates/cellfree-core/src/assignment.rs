//! User-centric cluster formation: master APs, pilot allocation, and
//! per-AP serving sets.
//!
//! Users are admitted one by one in index order:
//!
//! 1. UE `k` appoints as master the AP with the largest channel gain among
//!    APs that still have a pilot free for their own mastered users. (An AP
//!    can master at most one UE per pilot; without this cap, a crowded AP
//!    would be forced to serve two of its users on the same pilot.)
//! 2. The master assigns `k` the pilot on which it currently measures the
//!    least contamination, `sum p * pilot_len * beta(master, i)` over earlier
//!    UEs `i` holding that pilot. Pilots already given to another UE mastered
//!    by the same AP are excluded, so a master can always separate its own
//!    users. Ties go to the lowest pilot index.
//! 3. Once all users hold pilots, every AP serves exactly one UE per occupied
//!    pilot: the UE it masters on that pilot if there is one, otherwise the
//!    candidate with the largest gain. Masters therefore always serve their
//!    own users, and serving clusters are never empty.
//!
//! The resulting structure also records, per UE, the partner set: every UE
//! whose serving cluster intersects its own. Partial combining schemes
//! restrict their interference sums to this set.

use nalgebra::DMatrix;

use crate::config::NetworkConfig;
use crate::error::{Result, SimError};
use crate::topology::ChannelStatistics;

/// Output of cluster formation for one setup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServingAssignment {
    pilot_count: usize,
    /// Pilot index per UE, in `0..pilot_count`.
    pilot_of: Vec<usize>,
    /// Master AP per UE.
    master_of: Vec<usize>,
    /// Serving cluster per UE (ascending AP indices), never empty.
    serving_aps: Vec<Vec<usize>>,
    /// Served UEs per AP (ascending UE indices).
    served_ues: Vec<Vec<usize>>,
    /// UEs mastered by each AP (ascending).
    master_ues: Vec<Vec<usize>>,
    /// UEs sharing each pilot (ascending).
    copilot_ues: Vec<Vec<usize>>,
    /// Partner set per UE: all UEs with overlapping serving clusters,
    /// including the UE itself (ascending).
    partners: Vec<Vec<usize>>,
}

impl ServingAssignment {
    pub fn ue_count(&self) -> usize {
        self.pilot_of.len()
    }

    pub fn ap_count(&self) -> usize {
        self.served_ues.len()
    }

    pub fn pilot_count(&self) -> usize {
        self.pilot_count
    }

    pub fn pilot_of(&self, ue: usize) -> usize {
        self.pilot_of[ue]
    }

    pub fn master_of(&self, ue: usize) -> usize {
        self.master_of[ue]
    }

    /// Serving cluster of `ue`, ascending.
    pub fn serving_aps(&self, ue: usize) -> &[usize] {
        &self.serving_aps[ue]
    }

    /// UEs served by `ap`, ascending.
    pub fn served_ues(&self, ap: usize) -> &[usize] {
        &self.served_ues[ap]
    }

    /// UEs mastered by `ap`, ascending.
    pub fn master_ues(&self, ap: usize) -> &[usize] {
        &self.master_ues[ap]
    }

    /// UEs holding pilot `t`, ascending.
    pub fn copilot_ues(&self, pilot: usize) -> &[usize] {
        &self.copilot_ues[pilot]
    }

    /// The association indicator: does `ap` serve `ue`?
    pub fn serves(&self, ap: usize, ue: usize) -> bool {
        self.served_ues[ap].binary_search(&ue).is_ok()
    }

    /// Serving APs of `ue` other than its master, ascending. This is the
    /// canonical report order used by the master-assisted fusion stage.
    pub fn assisting_aps(&self, ue: usize) -> Vec<usize> {
        let master = self.master_of[ue];
        self.serving_aps[ue].iter().copied().filter(|&j| j != master).collect()
    }

    /// Partner set of `ue` (UEs with overlapping clusters, self included).
    pub fn partners(&self, ue: usize) -> &[usize] {
        &self.partners[ue]
    }

    /// Asserts every structural invariant; used by tests and available to
    /// callers that construct assignments by hand.
    pub fn validate(&self) -> Result<()> {
        let k_total = self.ue_count();
        let fail = |msg: String| Err(SimError::Config(msg));
        for ue in 0..k_total {
            if self.pilot_of[ue] >= self.pilot_count {
                return fail(format!("ue {ue} pilot out of range"));
            }
            if self.serving_aps[ue].is_empty() {
                return fail(format!("ue {ue} has an empty serving cluster"));
            }
            if !self.serving_aps[ue].contains(&self.master_of[ue]) {
                return fail(format!("ue {ue}: master not in serving cluster"));
            }
            if !self.partners[ue].contains(&ue) {
                return fail(format!("ue {ue}: partner set misses the UE itself"));
            }
            for pair in self.serving_aps[ue].windows(2) {
                if pair[0] >= pair[1] {
                    return fail(format!("ue {ue}: serving cluster not strictly ascending"));
                }
            }
        }
        for ap in 0..self.ap_count() {
            let mut seen_pilot = vec![false; self.pilot_count];
            for &ue in &self.served_ues[ap] {
                if !self.serving_aps[ue].contains(&ap) {
                    return fail(format!("ap {ap} / ue {ue}: serving sets disagree"));
                }
                let t = self.pilot_of[ue];
                if seen_pilot[t] {
                    return fail(format!("ap {ap} serves two UEs on pilot {t}"));
                }
                seen_pilot[t] = true;
            }
        }
        for ue in 0..k_total {
            for &p in &self.partners[ue] {
                if !self.partners[p].contains(&ue) {
                    return fail(format!("partner sets not symmetric for ({ue}, {p})"));
                }
            }
        }
        Ok(())
    }

    /// CSV dump (`ue,pilot,master,serving_aps`) with the cluster as a
    /// space-separated list; handy for eyeballing a setup.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ue,pilot,master,serving_aps\n");
        for ue in 0..self.ue_count() {
            let aps: Vec<String> = self.serving_aps[ue].iter().map(|j| j.to_string()).collect();
            out.push_str(&format!(
                "{},{},{},{}\n",
                ue,
                self.pilot_of[ue],
                self.master_of[ue],
                aps.join(" ")
            ));
        }
        out
    }

    /// Builds the structure from the per-UE decisions. Exposed so tests and
    /// experiments can wire hand-crafted topologies.
    pub fn from_decisions(
        pilot_count: usize,
        ap_count: usize,
        pilot_of: Vec<usize>,
        master_of: Vec<usize>,
        served_ues: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let k_total = pilot_of.len();
        if master_of.len() != k_total || served_ues.len() != ap_count {
            return Err(SimError::Config("inconsistent assignment dimensions".into()));
        }
        let mut serving_aps = vec![Vec::new(); k_total];
        for (ap, ues) in served_ues.iter().enumerate() {
            for &ue in ues {
                if ue >= k_total {
                    return Err(SimError::Config(format!("ap {ap} serves unknown ue {ue}")));
                }
                serving_aps[ue].push(ap);
            }
        }
        for list in &mut serving_aps {
            list.sort_unstable();
        }
        let mut master_ues = vec![Vec::new(); ap_count];
        for (ue, &ap) in master_of.iter().enumerate() {
            if ap >= ap_count {
                return Err(SimError::Config(format!("ue {ue} has unknown master {ap}")));
            }
            master_ues[ap].push(ue);
        }
        let mut copilot_ues = vec![Vec::new(); pilot_count];
        for (ue, &t) in pilot_of.iter().enumerate() {
            if t >= pilot_count {
                return Err(SimError::Config(format!("ue {ue} has pilot {t} out of range")));
            }
            copilot_ues[t].push(ue);
        }
        let partners = partner_sets(&serving_aps, &served_ues);
        let assignment = Self {
            pilot_count,
            pilot_of,
            master_of,
            serving_aps,
            served_ues,
            master_ues,
            copilot_ues,
            partners,
        };
        assignment.validate()?;
        Ok(assignment)
    }
}

fn partner_sets(serving_aps: &[Vec<usize>], served_ues: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let k_total = serving_aps.len();
    let mut partner_flags = vec![vec![false; k_total]; k_total];
    for ues in served_ues {
        for &a in ues {
            for &b in ues {
                partner_flags[a][b] = true;
            }
        }
    }
    // A UE with no co-served partner still partners with itself.
    (0..k_total)
        .map(|k| {
            let mut list: Vec<usize> =
                (0..k_total).filter(|&i| partner_flags[k][i] || i == k).collect();
            list.sort_unstable();
            list
        })
        .collect()
}

/// Runs cluster formation on the large-scale statistics of one setup.
pub fn assign(stats: &ChannelStatistics, cfg: &NetworkConfig) -> Result<ServingAssignment> {
    cfg.validate()?;
    let l = cfg.ap_count;
    let k_total = cfg.ue_count;
    if stats.ap_count() != l || stats.ue_count() != k_total {
        return Err(SimError::Config(format!(
            "statistics are {}x{} but the configuration says {}x{}",
            stats.ap_count(),
            stats.ue_count(),
            l,
            k_total
        )));
    }
    let tau_p = cfg.pilot_samples;
    if k_total > l * tau_p {
        return Err(SimError::Config(format!(
            "{k_total} UEs exceed the {l} x {tau_p} master-pilot capacity of the network"
        )));
    }
    let pilot_energy = cfg.ue_power_w * tau_p as f64;

    let mut pilot_of = vec![0usize; k_total];
    let mut master_of = vec![0usize; k_total];
    let mut mastered_count = vec![0usize; l];
    for ue in 0..k_total {
        let master = argmax_ap(&stats.beta, ue, |ap| mastered_count[ap] < tau_p)
            .expect("capacity check guarantees an AP with a free pilot");
        master_of[ue] = master;
        mastered_count[master] += 1;

        // Pilots already handed out by this master to its own users are off
        // limits; the capacity cap guarantees one is still free.
        let mut blocked = vec![false; tau_p];
        for prior in 0..ue {
            if master_of[prior] == master {
                blocked[pilot_of[prior]] = true;
            }
        }

        let mut interference = vec![0.0f64; tau_p];
        for prior in 0..ue {
            interference[pilot_of[prior]] += pilot_energy * stats.beta[(master, prior)];
        }
        let mut best_pilot = usize::MAX;
        let mut best_level = f64::INFINITY;
        for (t, &level) in interference.iter().enumerate() {
            if !blocked[t] && level < best_level {
                best_level = level;
                best_pilot = t;
            }
        }
        pilot_of[ue] = best_pilot;
    }

    // Serving decision per (AP, pilot): the mastered UE if any, otherwise the
    // strongest candidate on that pilot.
    let mut copilot_ues = vec![Vec::new(); tau_p];
    for (ue, &t) in pilot_of.iter().enumerate() {
        copilot_ues[t].push(ue);
    }
    let mut served_ues = vec![Vec::new(); l];
    for (ap, served) in served_ues.iter_mut().enumerate() {
        for candidates in copilot_ues.iter() {
            if candidates.is_empty() {
                continue;
            }
            let mastered: Vec<usize> =
                candidates.iter().copied().filter(|&ue| master_of[ue] == ap).collect();
            debug_assert!(mastered.len() <= 1, "pilot blocking keeps mastered pilots distinct");
            if !mastered.is_empty() {
                served.extend(mastered);
            } else {
                let winner = candidates
                    .iter()
                    .copied()
                    .max_by(|&a, &b| {
                        stats.beta[(ap, a)]
                            .partial_cmp(&stats.beta[(ap, b)])
                            .unwrap()
                            // Lowest UE index wins ties.
                            .then(b.cmp(&a))
                    })
                    .unwrap();
                served.push(winner);
            }
        }
        served.sort_unstable();
    }

    ServingAssignment::from_decisions(tau_p, l, pilot_of, master_of, served_ues)
}

fn argmax_ap(
    beta: &DMatrix<f64>,
    ue: usize,
    eligible: impl Fn(usize) -> bool,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    let mut best_gain = f64::NEG_INFINITY;
    for ap in 0..beta.nrows() {
        let g = beta[(ap, ue)];
        if eligible(ap) && g > best_gain {
            best_gain = g;
            best = Some(ap);
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::generate_setup;
    use crate::{C64, CMatrix};
    use proptest::prelude::*;

    /// Wraps a bare gain table into statistics with scalar covariances.
    fn stats_from_beta(beta: DMatrix<f64>) -> ChannelStatistics {
        let (l, k) = (beta.nrows(), beta.ncols());
        let mut covariance = Vec::with_capacity(l * k);
        for ap in 0..l {
            for ue in 0..k {
                covariance.push(CMatrix::from_element(1, 1, C64::new(beta[(ap, ue)], 0.0)));
            }
        }
        ChannelStatistics::from_parts(beta, covariance).unwrap()
    }

    fn cfg_for(l: usize, k: usize, tau_p: usize) -> NetworkConfig {
        NetworkConfig {
            ap_count: l,
            ue_count: k,
            antennas_per_ap: 1,
            pilot_samples: tau_p,
            coherence_samples: tau_p + 10,
            ..Default::default()
        }
    }

    #[test]
    fn hand_worked_three_ap_four_ue_instance() {
        // Gains chosen so every decision is strict:
        //        UE0   UE1   UE2   UE3
        // AP0   1.00  0.20  0.10  0.30
        // AP1   0.30  0.90  0.05  0.35
        // AP2   0.12  0.08  0.80  0.40
        let beta = DMatrix::from_row_slice(
            3,
            4,
            &[1.00, 0.20, 0.10, 0.30, 0.30, 0.90, 0.05, 0.35, 0.12, 0.08, 0.80, 0.40],
        );
        let stats = stats_from_beta(beta);
        let cfg = cfg_for(3, 4, 2);
        let a = assign(&stats, &cfg).unwrap();

        // Masters: column-wise argmax.
        assert_eq!((0..4).map(|k| a.master_of(k)).collect::<Vec<_>>(), vec![0, 1, 2, 2]);
        // Pilots: UE0 opens pilot 0; UE1 sees 0.30 on pilot 0 at AP1, takes 1;
        // UE2 sees 0.12 vs 0.08 at AP2, takes 1; UE3's master already used
        // pilot 1 for UE2, so pilot 0 remains.
        assert_eq!((0..4).map(|k| a.pilot_of(k)).collect::<Vec<_>>(), vec![0, 1, 1, 0]);
        // Serving: per AP and pilot, mastered UE or strongest candidate.
        assert_eq!(a.served_ues(0), &[0, 1]);
        assert_eq!(a.served_ues(1), &[1, 3]);
        assert_eq!(a.served_ues(2), &[2, 3]);
        assert_eq!(a.serving_aps(0), &[0]);
        assert_eq!(a.serving_aps(1), &[0, 1]);
        assert_eq!(a.serving_aps(2), &[2]);
        assert_eq!(a.serving_aps(3), &[1, 2]);
        // Partners via pairwise cluster overlap.
        assert_eq!(a.partners(0), &[0, 1]);
        assert_eq!(a.partners(1), &[0, 1, 3]);
        assert_eq!(a.partners(2), &[2, 3]);
        assert_eq!(a.partners(3), &[1, 2, 3]);
        a.validate().unwrap();
    }

    #[test]
    fn single_ue_is_served_by_every_ap() {
        let cfg = cfg_for(5, 1, 3);
        let (_, stats) = generate_setup(&cfg, 0).unwrap();
        let a = assign(&stats, &cfg).unwrap();
        assert_eq!(a.pilot_of(0), 0);
        assert_eq!(a.serving_aps(0), &[0, 1, 2, 3, 4]);
        assert_eq!(a.partners(0), &[0]);
    }

    /// Straight-line re-derivation of the documented rules, kept deliberately
    /// separate from the production implementation.
    fn reference_assign(beta: &DMatrix<f64>, tau_p: usize, pilot_energy: f64) -> (Vec<usize>, Vec<usize>, Vec<Vec<usize>>) {
        let (l, k_total) = (beta.nrows(), beta.ncols());
        let mut pilots: Vec<usize> = Vec::new();
        let mut masters: Vec<usize> = Vec::new();
        for ue in 0..k_total {
            let mut master = None;
            for ap in 0..l {
                let full = (0..ue).filter(|&i| masters[i] == ap).count() == tau_p;
                if full {
                    continue;
                }
                if master.is_none() || beta[(ap, ue)] > beta[(master.unwrap(), ue)] {
                    master = Some(ap);
                }
            }
            let master = master.unwrap();
            let used_by_master: Vec<usize> = (0..ue)
                .filter(|&i| masters[i] == master)
                .map(|i| pilots[i])
                .collect();
            let mut chosen = None;
            let mut level_of_chosen = f64::INFINITY;
            for t in 0..tau_p {
                if used_by_master.contains(&t) {
                    continue;
                }
                let mut level = 0.0;
                for i in 0..ue {
                    if pilots[i] == t {
                        level += pilot_energy * beta[(master, i)];
                    }
                }
                if level < level_of_chosen {
                    level_of_chosen = level;
                    chosen = Some(t);
                }
            }
            masters.push(master);
            pilots.push(chosen.unwrap());
        }
        let mut served = vec![Vec::new(); l];
        for ap in 0..l {
            for t in 0..tau_p {
                let on_pilot: Vec<usize> = (0..k_total).filter(|&u| pilots[u] == t).collect();
                if on_pilot.is_empty() {
                    continue;
                }
                let mastered_here: Vec<usize> =
                    on_pilot.iter().copied().filter(|&u| masters[u] == ap).collect();
                if !mastered_here.is_empty() {
                    served[ap].extend(mastered_here);
                } else {
                    let mut winner = on_pilot[0];
                    for &u in &on_pilot[1..] {
                        if beta[(ap, u)] > beta[(ap, winner)] {
                            winner = u;
                        }
                    }
                    served[ap].push(winner);
                }
            }
            served[ap].sort_unstable();
        }
        (pilots, masters, served)
    }

    proptest! {
        #[test]
        fn matches_reference_on_random_gains(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let l = rng.random_range(2usize..6);
            let tau_p = rng.random_range(1usize..4);
            let k = rng.random_range(1usize..=(l * tau_p).min(8));
            let beta = DMatrix::from_fn(l, k, |_, _| 10f64.powf(rng.random_range(-12.0..-6.0)));
            let cfg = cfg_for(l, k, tau_p);
            let a = assign(&stats_from_beta(beta.clone()), &cfg).unwrap();
            let (pilots, masters, served) =
                reference_assign(&beta, tau_p, cfg.ue_power_w * tau_p as f64);
            prop_assert_eq!((0..k).map(|u| a.pilot_of(u)).collect::<Vec<_>>(), pilots);
            prop_assert_eq!((0..k).map(|u| a.master_of(u)).collect::<Vec<_>>(), masters);
            for (ap, expected) in served.iter().enumerate() {
                prop_assert_eq!(a.served_ues(ap), &expected[..]);
            }
        }

        #[test]
        fn invariants_hold_on_generated_setups(setup in 0u64..20) {
            let cfg = NetworkConfig {
                ap_count: 12,
                ue_count: 9,
                antennas_per_ap: 2,
                pilot_samples: 3,
                side_length_m: 800.0,
                ..Default::default()
            };
            let (_, stats) = generate_setup(&cfg, setup).unwrap();
            let a = assign(&stats, &cfg).unwrap();
            a.validate().unwrap();
            // A UE beaten by a co-pilot UE at some AP is not served there
            // unless that AP is its master.
            for ue in 0..cfg.ue_count {
                for &ap in a.serving_aps(ue) {
                    if ap == a.master_of(ue) {
                        continue;
                    }
                    for &rival in a.copilot_ues(a.pilot_of(ue)) {
                        if rival != ue {
                            prop_assert!(
                                stats.beta[(ap, ue)] >= stats.beta[(ap, rival)],
                                "dominated ue {} kept at ap {}", ue, ap
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mean_cluster_size_shrinks_as_users_join() {
        let mut means = Vec::new();
        for k in [10, 20, 30, 40, 50, 60, 70, 80] {
            let cfg = NetworkConfig {
                ap_count: 50,
                ue_count: k,
                antennas_per_ap: 2,
                pilot_samples: 5,
                side_length_m: 1000.0,
                ..Default::default()
            };
            let mut total = 0.0;
            let setups = 20;
            for s in 0..setups {
                let (_, stats) = generate_setup(&cfg, s).unwrap();
                let a = assign(&stats, &cfg).unwrap();
                let sum: usize = (0..k).map(|u| a.serving_aps(u).len()).sum();
                total += sum as f64 / k as f64;
            }
            means.push(total / setups as f64);
        }
        for pair in means.windows(2) {
            assert!(
                pair[1] <= pair[0] * (1.0 + 1e-9),
                "mean cluster size grew: {:?}",
                means
            );
        }
    }

    #[test]
    fn rejects_more_ues_than_master_slots() {
        // 2 APs x 2 pilots can master at most 4 UEs.
        let cfg = cfg_for(2, 5, 2);
        let beta = DMatrix::from_element(2, 5, 1e-9);
        let result = assign(&stats_from_beta(beta), &cfg);
        assert!(matches!(result, Err(SimError::Config(_))));
    }

    #[test]
    fn crowded_master_spills_to_next_best_ap() {
        // All three UEs prefer AP0, but with a single pilot each AP can
        // master only one UE, so later arrivals fall through to the
        // runner-up APs in gain order.
        let beta = DMatrix::from_row_slice(
            3,
            3,
            &[0.9, 0.8, 0.7, 0.5, 0.4, 0.3, 0.2, 0.1, 0.05],
        );
        let cfg = cfg_for(3, 3, 1);
        let a = assign(&stats_from_beta(beta), &cfg).unwrap();
        assert_eq!((0..3).map(|u| a.master_of(u)).collect::<Vec<_>>(), vec![0, 1, 2]);
        a.validate().unwrap();
    }

    #[test]
    fn csv_dump_has_header_and_one_row_per_ue() {
        let cfg = cfg_for(4, 3, 2);
        let (_, stats) = generate_setup(&cfg, 1).unwrap();
        let a = assign(&stats, &cfg).unwrap();
        let csv = a.to_csv();
        let lines: Vec<&str> = csv.trim_end().lines().collect();
        assert_eq!(lines[0], "ue,pilot,master,serving_aps");
        assert_eq!(lines.len(), 1 + 3);
    }
}
