//! Campaign configuration: network dimensions, propagation constants, and
//! Monte Carlo controls.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Everything a simulation campaign needs, in one flat struct.
///
/// The defaults reproduce the usual urban macro benchmark: a 2 km x 2 km
/// wrapped-around square with 100 four-antenna APs serving 40 users, 200-sample
/// coherence blocks with 10 pilots, 100 mW uplink power and -94 dBm noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkConfig {
    /// Number of access points, `L`.
    pub ap_count: usize,
    /// Antennas per access point, `N`.
    pub antennas_per_ap: usize,
    /// Number of single-antenna users, `K`.
    pub ue_count: usize,
    /// Side of the square coverage area in meters. Distances wrap around the
    /// edges (torus), so there are no cell-edge artifacts.
    pub side_length_m: f64,
    /// Samples per coherence block.
    pub coherence_samples: usize,
    /// Pilot samples per coherence block; also the number of orthogonal
    /// pilot sequences.
    pub pilot_samples: usize,
    /// Uplink transmit power per user in watts (pilots and data alike).
    pub ue_power_w: f64,
    /// Receiver noise power per antenna in watts.
    pub noise_power_w: f64,
    /// Median channel gain at 1 m, in dB.
    pub pathloss_const_db: f64,
    /// Pathloss exponent (gain slope is `10 * pathloss_exp` dB per decade).
    pub pathloss_exp: f64,
    /// Shadow fading standard deviation in dB. Zero disables shadowing.
    pub shadow_std_db: f64,
    /// Distance at which shadow fading correlation halves, in meters.
    /// Correlation is modeled on the AP side only.
    pub shadow_decorr_m: f64,
    /// Angular standard deviation of the local scattering ring, in degrees.
    pub asd_deg: f64,
    /// AP antenna spacing in wavelengths (uniform linear arrays).
    pub antenna_spacing_wavelengths: f64,
    /// Number of independent network setups (AP/UE drops) per campaign.
    pub num_setups: usize,
    /// Number of fading realizations per setup.
    pub num_realizations: usize,
    /// Root seed. Every random draw in a campaign is a pure function of this
    /// seed plus structural indices, never of execution order.
    pub seed: u64,
}

/// Height difference between AP and UE antennas in meters, included in every
/// propagation distance.
pub const VERTICAL_OFFSET_M: f64 = 10.0;

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            ap_count: 100,
            antennas_per_ap: 4,
            ue_count: 40,
            side_length_m: 2000.0,
            coherence_samples: 200,
            pilot_samples: 10,
            ue_power_w: 0.1,
            // -94 dBm
            noise_power_w: 10f64.powf((-94.0 - 30.0) / 10.0),
            pathloss_const_db: -30.5,
            pathloss_exp: 3.67,
            shadow_std_db: 4.0,
            shadow_decorr_m: 9.0,
            asd_deg: 15.0,
            antenna_spacing_wavelengths: 0.5,
            num_setups: 50,
            num_realizations: 100,
            seed: 1,
        }
    }
}

impl NetworkConfig {
    /// Data samples per coherence block (what is left after the pilots).
    pub fn data_samples(&self) -> usize {
        self.coherence_samples - self.pilot_samples
    }

    /// Pre-log factor of every spectral-efficiency expression: the fraction
    /// of the coherence block carrying uplink data.
    pub fn prelog(&self) -> f64 {
        self.data_samples() as f64 / self.coherence_samples as f64
    }

    /// Checks every field against its documented domain. Float checks demand
    /// finiteness, so NaN and infinities are rejected alongside bad signs.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SimError::Config(msg));
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.ap_count == 0 {
            return fail("ap_count must be at least 1".into());
        }
        if self.antennas_per_ap == 0 {
            return fail("antennas_per_ap must be at least 1".into());
        }
        if self.ue_count == 0 {
            return fail("ue_count must be at least 1".into());
        }
        if !positive(self.side_length_m) {
            return fail(format!("side_length_m must be positive, got {}", self.side_length_m));
        }
        if self.pilot_samples == 0 {
            return fail("pilot_samples must be at least 1".into());
        }
        if self.pilot_samples >= self.coherence_samples {
            return fail(format!(
                "coherence_samples ({}) must exceed pilot_samples ({}) so data samples remain",
                self.coherence_samples, self.pilot_samples
            ));
        }
        if !positive(self.ue_power_w) {
            return fail(format!("ue_power_w must be positive, got {}", self.ue_power_w));
        }
        if !positive(self.noise_power_w) {
            return fail(format!("noise_power_w must be positive, got {}", self.noise_power_w));
        }
        if !self.pathloss_const_db.is_finite() || !self.pathloss_exp.is_finite() {
            return fail("pathloss constants must be finite".into());
        }
        if !(self.shadow_std_db.is_finite() && self.shadow_std_db >= 0.0) {
            return fail(format!("shadow_std_db must be non-negative, got {}", self.shadow_std_db));
        }
        if !positive(self.shadow_decorr_m) {
            return fail(format!("shadow_decorr_m must be positive, got {}", self.shadow_decorr_m));
        }
        if !positive(self.asd_deg) {
            return fail(format!("asd_deg must be positive, got {}", self.asd_deg));
        }
        if !positive(self.antenna_spacing_wavelengths) {
            return fail(format!(
                "antenna_spacing_wavelengths must be positive, got {}",
                self.antenna_spacing_wavelengths
            ));
        }
        if self.num_setups == 0 {
            return fail("num_setups must be at least 1".into());
        }
        if self.num_realizations == 0 {
            return fail("num_realizations must be at least 1".into());
        }
        Ok(())
    }
}
