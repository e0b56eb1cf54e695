//! Network geometry and large-scale channel statistics.
//!
//! APs and UEs are dropped uniformly in a square that wraps around at the
//! edges (a torus), the standard trick for studying a network segment without
//! boundary effects: every distance and angle is measured to the nearest of
//! the nine shifted copies of the other node.
//!
//! Large-scale statistics per AP-UE pair consist of a channel gain `beta`
//! (log-distance pathloss plus log-normal shadow fading, correlated across
//! nearby APs) and an `N x N` spatial correlation matrix from a Gaussian
//! local scattering model around the nominal arrival angle.

use nalgebra::{DMatrix, Point2, Vector2};
use rand::Rng;

use crate::config::{NetworkConfig, VERTICAL_OFFSET_M};
use crate::error::{Result, SimError};
use crate::rng::{substream, StreamPurpose};
use crate::{C64, CMatrix};

/// Node positions of one network setup.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub ap_positions: Vec<Point2<f64>>,
    pub ue_positions: Vec<Point2<f64>>,
    pub side_m: f64,
}

/// The nine translations that map the fundamental square onto itself and its
/// neighbors; minimizing over them implements the wrap-around metric.
pub fn wrap_offsets(side: f64) -> [Vector2<f64>; 9] {
    let mut offsets = [Vector2::zeros(); 9];
    let mut idx = 0;
    for dx in [-1.0, 0.0, 1.0] {
        for dy in [-1.0, 0.0, 1.0] {
            offsets[idx] = Vector2::new(dx * side, dy * side);
            idx += 1;
        }
    }
    offsets
}

/// Displacement from `from` to the nearest wrapped copy of `to`.
///
/// Ties between copies (measure-zero for random drops) resolve to the first
/// offset in the fixed iteration order, keeping results deterministic.
pub fn wrap_displacement(from: &Point2<f64>, to: &Point2<f64>, side: f64) -> Vector2<f64> {
    let mut best = Vector2::new(f64::INFINITY, 0.0);
    let mut best_norm = f64::INFINITY;
    for offset in wrap_offsets(side) {
        let d = (to + offset) - from;
        let n = d.norm();
        if n < best_norm {
            best_norm = n;
            best = d;
        }
    }
    best
}

/// Horizontal distance between `a` and `b` under wrap-around.
pub fn wrap_distance(a: &Point2<f64>, b: &Point2<f64>, side: f64) -> f64 {
    wrap_displacement(a, b, side).norm()
}

/// Spatial correlation of a half-wavelength-spaced uniform linear array under
/// Gaussian local scattering: entry `(m, n)` is
///
/// ```text
/// exp(j 2 pi spacing (m - n) sin(angle)) * exp(-(asd^2 / 2) (2 pi spacing (m - n) cos(angle))^2)
/// ```
///
/// with the angular standard deviation in radians. This is the characteristic
/// function of the linearized arrival-angle distribution, so the matrix is
/// Hermitian Toeplitz positive semidefinite with unit diagonal. Growing `asd`
/// kills every off-diagonal entry, approaching the uncorrelated (identity)
/// limit.
pub fn local_scattering_correlation(
    nominal_angle_rad: f64,
    asd_deg: f64,
    antennas: usize,
    spacing_wavelengths: f64,
) -> CMatrix {
    let asd_rad = asd_deg.to_radians();
    let phase_step = 2.0 * std::f64::consts::PI * spacing_wavelengths;
    let mut first_column = vec![C64::new(1.0, 0.0); antennas];
    for (lag, entry) in first_column.iter_mut().enumerate().skip(1) {
        let xi = phase_step * lag as f64;
        let damping = (-0.5 * (asd_rad * xi * nominal_angle_rad.cos()).powi(2)).exp();
        let phase = xi * nominal_angle_rad.sin();
        *entry = C64::from_polar(damping, phase);
    }
    CMatrix::from_fn(antennas, antennas, |m, n| {
        if m >= n {
            first_column[m - n]
        } else {
            first_column[n - m].conj()
        }
    })
}

/// Large-scale statistics of one setup: channel gains and full spatial
/// covariance per AP-UE pair.
#[derive(Debug, Clone)]
pub struct ChannelStatistics {
    /// Channel gain (linear) per (AP, UE) pair; `beta[(j, k)]`.
    pub beta: DMatrix<f64>,
    /// Spatial covariance per pair, `gain * correlation`, row-major by AP.
    covariance: Vec<CMatrix>,
    ue_count: usize,
}

impl ChannelStatistics {
    /// Assembles statistics from a gain table and per-pair covariances
    /// (row-major by AP). Lets callers inject hand-crafted or externally
    /// computed statistics instead of generated ones.
    pub fn from_parts(beta: DMatrix<f64>, covariance: Vec<CMatrix>) -> Result<Self> {
        let (l, k) = (beta.nrows(), beta.ncols());
        if covariance.len() != l * k {
            return Err(SimError::Config(format!(
                "expected {} covariance matrices for a {}x{} gain table, got {}",
                l * k,
                l,
                k,
                covariance.len()
            )));
        }
        Ok(Self { beta, covariance, ue_count: k })
    }

    /// Spatial covariance matrix of the channel from UE `k` to AP `j`.
    pub fn covariance(&self, ap: usize, ue: usize) -> &CMatrix {
        &self.covariance[ap * self.ue_count + ue]
    }

    pub fn ap_count(&self) -> usize {
        self.beta.nrows()
    }

    pub fn ue_count(&self) -> usize {
        self.ue_count
    }
}

/// Shadow fading field: `std_db * F`, where rows of `F` (APs) are correlated
/// with coefficient `2^(-distance / decorr)` and columns (UEs) are independent.
fn shadow_field(
    cfg: &NetworkConfig,
    ap_positions: &[Point2<f64>],
    setup_index: u64,
) -> Result<DMatrix<f64>> {
    let l = cfg.ap_count;
    let k = cfg.ue_count;
    if cfg.shadow_std_db == 0.0 {
        return Ok(DMatrix::zeros(l, k));
    }
    let var = cfg.shadow_std_db * cfg.shadow_std_db;
    let base = DMatrix::from_fn(l, l, |a, b| {
        let d = wrap_distance(&ap_positions[a], &ap_positions[b], cfg.side_length_m);
        var * 2f64.powf(-d / cfg.shadow_decorr_m)
    });
    // The exponential kernel is positive definite on the plane; under the
    // wrapped metric tiny eigenvalue undershoot can still occur, so retry with
    // an escalating ridge before giving up.
    let mut jitter = 0.0;
    let factor = loop {
        let mut m = base.clone();
        for i in 0..l {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            break chol.l();
        }
        jitter = if jitter == 0.0 { 1e-12 * var } else { jitter * 10.0 };
        if jitter > 1e-6 * var {
            return Err(SimError::Numerical(
                "shadow fading covariance is not positive semidefinite".into(),
            ));
        }
    };
    let mut rng = substream(cfg.seed, StreamPurpose::Shadowing, setup_index, 0);
    let mut field = DMatrix::zeros(l, k);
    for ue in 0..k {
        let z = nalgebra::DVector::from_fn(l, |_, _| rng.sample::<f64, _>(rand_distr::StandardNormal));
        field.column_mut(ue).copy_from(&(&factor * z));
    }
    Ok(field)
}

/// Draws the node positions and large-scale statistics of setup `setup_index`.
///
/// Deterministic in `(cfg.seed, setup_index)`; the Monte Carlo realization
/// index never enters here, so all realizations of a setup share one geometry.
pub fn generate_setup(cfg: &NetworkConfig, setup_index: u64) -> Result<(Geometry, ChannelStatistics)> {
    cfg.validate()?;
    let mut rng = substream(cfg.seed, StreamPurpose::Geometry, setup_index, 0);
    let draw_points = |count: usize, rng: &mut rand_chacha::ChaCha8Rng| {
        (0..count)
            .map(|_| {
                let x: f64 = rng.random::<f64>() * cfg.side_length_m;
                let y: f64 = rng.random::<f64>() * cfg.side_length_m;
                Point2::new(x, y)
            })
            .collect::<Vec<_>>()
    };
    let ap_positions = draw_points(cfg.ap_count, &mut rng);
    let ue_positions = draw_points(cfg.ue_count, &mut rng);

    let shadow_db = shadow_field(cfg, &ap_positions, setup_index)?;

    let l = cfg.ap_count;
    let k = cfg.ue_count;
    let mut beta = DMatrix::zeros(l, k);
    let mut covariance = Vec::with_capacity(l * k);
    for ap in 0..l {
        for ue in 0..k {
            let disp = wrap_displacement(&ap_positions[ap], &ue_positions[ue], cfg.side_length_m);
            let d3 = (disp.norm_squared() + VERTICAL_OFFSET_M * VERTICAL_OFFSET_M).sqrt();
            let gain_db =
                cfg.pathloss_const_db - cfg.pathloss_exp * 10.0 * d3.log10() + shadow_db[(ap, ue)];
            let gain = 10f64.powf(gain_db / 10.0);
            beta[(ap, ue)] = gain;
            let angle = disp.y.atan2(disp.x);
            let mut r = local_scattering_correlation(
                angle,
                cfg.asd_deg,
                cfg.antennas_per_ap,
                cfg.antenna_spacing_wavelengths,
            );
            r.scale_mut(gain);
            covariance.push(r);
        }
    }

    let geometry = Geometry { ap_positions, ue_positions, side_m: cfg.side_length_m };
    let stats = ChannelStatistics { beta, covariance, ue_count: k };
    Ok((geometry, stats))
}
