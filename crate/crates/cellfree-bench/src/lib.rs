//! Shared fixtures for the benchmark suite: one fully prepared network
//! setup plus a drawn fading realization, at whatever dimensions a bench
//! asks for.

use cellfree_core::assignment::{assign, ServingAssignment};
use cellfree_core::channel::ChannelFactors;
use cellfree_core::topology::{generate_setup, ChannelStatistics};
use cellfree_core::{
    ChannelRealization, EstimateView, EstimationModel, EstimationScope, NetworkConfig,
};

pub struct Fixture {
    pub cfg: NetworkConfig,
    pub stats: ChannelStatistics,
    pub assignment: ServingAssignment,
    pub model: EstimationModel,
    pub factors: ChannelFactors,
    pub realization: ChannelRealization,
}

impl Fixture {
    pub fn new(ap_count: usize, antennas: usize, ue_count: usize, pilots: usize) -> Self {
        let cfg = NetworkConfig {
            ap_count,
            antennas_per_ap: antennas,
            ue_count,
            side_length_m: 1000.0,
            pilot_samples: pilots,
            ..NetworkConfig::default()
        };
        let (_, stats) = generate_setup(&cfg, 0).unwrap();
        let assignment = assign(&stats, &cfg).unwrap();
        let model = EstimationModel::new(&stats, &assignment, &cfg).unwrap();
        let factors = ChannelFactors::new(&stats).unwrap();
        let realization =
            ChannelRealization::generate(&factors, &stats, &model, &assignment, &cfg, 0, 0)
                .unwrap();
        Fixture { cfg, stats, assignment, model, factors, realization }
    }

    pub fn view(&self, scope: EstimationScope) -> EstimateView<'_> {
        self.realization.view(&self.model, &self.assignment, scope)
    }
}
