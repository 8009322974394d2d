//! Receiver noise, SINRs of the one- and two-branch schemes, the
//! average-eavesdropper surrogate and secrecy rates.
//!
//! All SINRs are expressed in "normalized" units: signal terms are in
//! amperes of drive current scaled by channel gain and chip count, and the
//! receiver noise is divided by `(responsivity * conversion)^2`.

use nalgebra::{DMatrix, DVector};

use crate::clipping::{clipping_stats, ClipLevels, ClippingStats};
use crate::error::{check_len, Error, Result};
use crate::geometry::{ChannelVector, ReceiverOptics};

/// Elementary charge, coulombs.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Receiver noise model parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    /// Modulation bandwidth, Hz.
    pub bandwidth_hz: f64,
    /// Ambient light photocurrent, A/(m^2 sr).
    pub ambient_photocurrent: f64,
    /// Pre-amplifier noise current density, A/sqrt(Hz).
    pub preamp_density: f64,
    /// Elementary charge, C.
    pub elementary_charge: f64,
    /// Field of view entering the ambient term, degrees.
    pub ambient_fov_deg: f64,
}

impl NoiseParams {
    pub fn reference() -> Self {
        Self {
            bandwidth_hz: 20e6,
            ambient_photocurrent: 10.93,
            preamp_density: 5e-12,
            elementary_charge: ELEMENTARY_CHARGE,
            ambient_fov_deg: 60.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("bandwidth_hz", self.bandwidth_hz),
            ("ambient_photocurrent", self.ambient_photocurrent),
            ("preamp_density", self.preamp_density),
            ("elementary_charge", self.elementary_charge),
            ("ambient_fov_deg", self.ambient_fov_deg),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        Ok(())
    }
}

/// Chip counts and LED conversion efficiency of every luminaire.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuminaireConfig {
    /// Total chips per luminaire; all of them carry the combined signal in
    /// the one-branch scheme.
    pub chips: u32,
    /// Chips driven by the information signal in the two-branch scheme.
    pub data_chips: u32,
    /// Chips driven by the artificial noise in the two-branch scheme.
    pub an_chips: u32,
    /// Electrical-to-optical conversion factor, W/A.
    pub conversion: f64,
}

impl LuminaireConfig {
    /// Splits `chips` into `chips - an_chips` data chips and `an_chips` AN
    /// chips. An empty AN group is accepted here; design requires
    /// [`LuminaireConfig::validate_for_design`].
    pub fn new(chips: u32, an_chips: u32, conversion: f64) -> Result<Self> {
        if chips == 0 {
            return Err(Error::InvalidParameter {
                field: "chips",
                reason: "need at least one chip".into(),
            });
        }
        if an_chips >= chips {
            return Err(Error::InvalidParameter {
                field: "an_chips",
                reason: format!("AN group ({an_chips}) must leave data chips out of {chips}"),
            });
        }
        if !(conversion > 0.0) {
            return Err(Error::InvalidParameter {
                field: "conversion",
                reason: format!("must be positive, got {conversion}"),
            });
        }
        Ok(Self {
            chips,
            data_chips: chips - an_chips,
            an_chips,
            conversion,
        })
    }

    /// 24 chips split evenly, 0.44 W/A.
    pub fn reference() -> Self {
        Self::new(24, 12, 0.44).expect("reference config is valid")
    }

    pub fn validate_for_design(&self) -> Result<()> {
        if self.data_chips == 0 || self.an_chips == 0 {
            return Err(Error::InvalidParameter {
                field: "an_chips",
                reason: format!(
                    "two-branch design needs both groups nonempty, got {}/{}",
                    self.data_chips, self.an_chips
                ),
            });
        }
        Ok(())
    }
}

/// Receiver noise variance (A^2) for a given average received optical power.
pub fn receiver_noise_variance(
    avg_received_power: f64,
    noise: &NoiseParams,
    optics: &ReceiverOptics,
) -> f64 {
    let e = noise.elementary_charge;
    let shot = 2.0 * e * optics.responsivity * avg_received_power;
    let ambient = 4.0
        * std::f64::consts::PI
        * e
        * optics.responsivity
        * optics.area
        * noise.ambient_photocurrent
        * (1.0 - noise.ambient_fov_deg.to_radians().cos());
    let thermal = noise.preamp_density * noise.preamp_density;
    noise.bandwidth_hz * (shot + ambient + thermal)
}

/// Receiver noise variance divided by `(responsivity * conversion)^2`.
pub fn normalized_noise_variance(
    avg_received_power: f64,
    noise: &NoiseParams,
    optics: &ReceiverOptics,
    conversion: f64,
) -> f64 {
    let g = optics.responsivity * conversion;
    receiver_noise_variance(avg_received_power, noise, optics) / (g * g)
}

/// Average emitted optical power of every luminaire in the one-branch scheme.
pub fn emitted_power_one_branch(stats: &[ClippingStats], cfg: &LuminaireConfig) -> DVector<f64> {
    DVector::from_iterator(
        stats.len(),
        stats
            .iter()
            .map(|s| cfg.chips as f64 * cfg.conversion * s.mean_current),
    )
}

/// `n_c * eta * sum_n h_n E[x_n]`.
pub fn avg_received_power_one_branch(
    channel: &ChannelVector,
    stats: &[ClippingStats],
    cfg: &LuminaireConfig,
) -> Result<f64> {
    check_len("clipping stats", channel.len(), stats.len())?;
    Ok(channel.gains().dot(&emitted_power_one_branch(stats, cfg)))
}

/// Average emitted optical power of one two-branch luminaire whose data and
/// AN groups are driven with standard deviations `|v_n|` and `|w_n|`.
pub fn avg_emitted_power_two_branch(
    v_n: f64,
    w_n: f64,
    levels: &ClipLevels,
    cfg: &LuminaireConfig,
) -> Result<f64> {
    let d = clipping_stats(v_n.abs(), levels)?;
    let z = clipping_stats(w_n.abs(), levels)?;
    Ok(emitted_power_from_groups(&d, &z, cfg))
}

pub(crate) fn emitted_power_from_groups(
    data: &ClippingStats,
    an: &ClippingStats,
    cfg: &LuminaireConfig,
) -> f64 {
    cfg.conversion
        * (cfg.data_chips as f64 * data.mean_current + cfg.an_chips as f64 * an.mean_current)
}

fn attenuation(stats: &[ClippingStats]) -> DVector<f64> {
    DVector::from_iterator(stats.len(), stats.iter().map(|s| s.attenuation))
}

fn sigma_clip(stats: &[ClippingStats]) -> DVector<f64> {
    DVector::from_iterator(stats.len(), stats.iter().map(|s| s.sigma_clip))
}

fn check_sinr_inputs(
    channel: &ChannelVector,
    v: &DVector<f64>,
    w: &DVector<f64>,
    sigma2_norm: f64,
) -> Result<()> {
    check_len("information precoder", channel.len(), v.len())?;
    check_len("AN precoder", channel.len(), w.len())?;
    if !(sigma2_norm > 0.0) {
        return Err(Error::Domain(format!(
            "normalized noise variance must be positive, got {sigma2_norm}"
        )));
    }
    Ok(())
}

/// SINR of a receiver under the one-branch scheme.
pub fn sinr_one_branch(
    channel: &ChannelVector,
    v: &DVector<f64>,
    w: &DVector<f64>,
    stats: &[ClippingStats],
    chips: u32,
    sigma2_norm: f64,
) -> Result<f64> {
    check_sinr_inputs(channel, v, w, sigma2_norm)?;
    check_len("clipping stats", channel.len(), stats.len())?;
    let nc = chips as f64;
    let eff = channel.gains().component_mul(&attenuation(stats));
    let signal = (nc * eff.dot(v)).powi(2);
    let an = (nc * eff.dot(w)).powi(2);
    let clip = (nc * channel.gains().dot(&sigma_clip(stats))).powi(2);
    Ok(signal / (an + clip + sigma2_norm))
}

/// SINR of a receiver under the two-branch scheme.
///
/// An empty AN group (`an_chips == 0`) is accepted and contributes nothing.
pub fn sinr_two_branch(
    channel: &ChannelVector,
    v: &DVector<f64>,
    w: &DVector<f64>,
    stats_data: &[ClippingStats],
    stats_an: &[ClippingStats],
    cfg: &LuminaireConfig,
    sigma2_norm: f64,
) -> Result<f64> {
    check_sinr_inputs(channel, v, w, sigma2_norm)?;
    check_len("data clipping stats", channel.len(), stats_data.len())?;
    check_len("AN clipping stats", channel.len(), stats_an.len())?;
    let nd = cfg.data_chips as f64;
    let nz = cfg.an_chips as f64;
    let h = channel.gains();
    let signal = (nd * h.component_mul(&attenuation(stats_data)).dot(v)).powi(2);
    let clip_d = (nd * h.dot(&sigma_clip(stats_data))).powi(2);
    let an = nz * nz * h.component_mul(&attenuation(stats_an)).dot(w).powi(2);
    let clip_z = nz * nz * h.dot(&sigma_clip(stats_an)).powi(2);
    Ok(signal / (clip_d + an + clip_z + sigma2_norm))
}

/// Clipping statistics of a precoder pair under either scheme.
#[derive(Debug, Clone, PartialEq)]
pub enum BranchStats {
    /// One set of statistics per luminaire, all chips driven by `v d + w z`.
    One {
        stats: Vec<ClippingStats>,
        chips: u32,
    },
    /// Separate data and AN groups.
    Two {
        data: Vec<ClippingStats>,
        an: Vec<ClippingStats>,
        cfg: LuminaireConfig,
    },
}

impl BranchStats {
    pub fn len(&self) -> usize {
        match self {
            BranchStats::One { stats, .. } => stats.len(),
            BranchStats::Two { data, .. } => data.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Chips carrying the information signal and its attenuation factors.
    pub fn info_path(&self) -> (f64, DVector<f64>) {
        match self {
            BranchStats::One { stats, chips } => (*chips as f64, attenuation(stats)),
            BranchStats::Two { data, cfg, .. } => (cfg.data_chips as f64, attenuation(data)),
        }
    }

    /// Chips carrying the artificial noise and its attenuation factors.
    pub fn an_path(&self) -> (f64, DVector<f64>) {
        match self {
            BranchStats::One { stats, chips } => (*chips as f64, attenuation(stats)),
            BranchStats::Two { an, cfg, .. } => (cfg.an_chips as f64, attenuation(an)),
        }
    }

    /// Independent clipping-noise sources as (chips, per-luminaire std).
    pub fn clip_groups(&self) -> Vec<(f64, DVector<f64>)> {
        match self {
            BranchStats::One { stats, chips } => vec![(*chips as f64, sigma_clip(stats))],
            BranchStats::Two { data, an, cfg } => vec![
                (cfg.data_chips as f64, sigma_clip(data)),
                (cfg.an_chips as f64, sigma_clip(an)),
            ],
        }
    }

    /// Average emitted optical power of every luminaire, W.
    pub fn emitted_power(&self, conversion: f64) -> DVector<f64> {
        match self {
            BranchStats::One { stats, chips } => DVector::from_iterator(
                stats.len(),
                stats
                    .iter()
                    .map(|s| *chips as f64 * conversion * s.mean_current),
            ),
            BranchStats::Two { data, an, cfg } => DVector::from_iterator(
                data.len(),
                data.iter().zip(an).map(|(d, z)| emitted_power_from_groups(d, z, cfg)),
            ),
        }
    }

    /// Instantaneous SINR at a receiver with channel `channel`.
    pub fn sinr(
        &self,
        channel: &ChannelVector,
        v: &DVector<f64>,
        w: &DVector<f64>,
        sigma2_norm: f64,
    ) -> Result<f64> {
        match self {
            BranchStats::One { stats, chips } => {
                sinr_one_branch(channel, v, w, stats, *chips, sigma2_norm)
            }
            BranchStats::Two { data, an, cfg } => {
                sinr_two_branch(channel, v, w, data, an, cfg, sigma2_norm)
            }
        }
    }
}

/// Ratio-of-expectations surrogate for the average eavesdropper SINR.
///
/// `h_bar` is `E[h_E h_E^T]` and `avg_sigma2_norm` the position-averaged
/// normalized noise variance.
pub fn lambda_e(
    h_bar: &DMatrix<f64>,
    v: &DVector<f64>,
    w: &DVector<f64>,
    stats: &BranchStats,
    avg_sigma2_norm: f64,
) -> Result<f64> {
    let n = stats.len();
    check_len("average Eve matrix rows", n, h_bar.nrows())?;
    check_len("average Eve matrix cols", n, h_bar.ncols())?;
    check_len("information precoder", n, v.len())?;
    check_len("AN precoder", n, w.len())?;
    check_psd(h_bar)?;
    if !(avg_sigma2_norm > 0.0) {
        return Err(Error::Domain(format!(
            "average noise variance must be positive, got {avg_sigma2_norm}"
        )));
    }
    let (n_info, r_info) = stats.info_path();
    let (n_an, r_an) = stats.an_path();
    let weighted = |r: &DVector<f64>| (r * r.transpose()).component_mul(h_bar);
    let num = n_info * n_info * v.dot(&(weighted(&r_info) * v));
    let an = n_an * n_an * w.dot(&(weighted(&r_an) * w));
    let clip: f64 = stats
        .clip_groups()
        .iter()
        .map(|(chips, s)| chips * chips * s.dot(&(h_bar * s)))
        .sum();
    Ok(num / (an + clip + avg_sigma2_norm))
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    if (m - m.transpose()).amax() > 1e-12 * m.amax().max(f64::MIN_POSITIVE) {
        return Err(Error::Domain("matrix is not symmetric".into()));
    }
    let tr = m.trace();
    let min_eig = m.clone().symmetric_eigenvalues().min();
    if min_eig < -1e-12 * tr.abs() {
        return Err(Error::Domain(format!(
            "matrix is not positive semidefinite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

/// Position-averaged normalized noise variance of an eavesdropper, given the
/// grid-averaged gains `mean_gain` and the emitted optical power of every
/// luminaire.
pub fn avg_eve_noise_variance(
    mean_gain: &DVector<f64>,
    emitted_power: &DVector<f64>,
    noise: &NoiseParams,
    optics: &ReceiverOptics,
    conversion: f64,
) -> Result<f64> {
    check_len("emitted powers", mean_gain.len(), emitted_power.len())?;
    Ok(normalized_noise_variance(
        mean_gain.dot(emitted_power),
        noise,
        optics,
        conversion,
    ))
}

/// Secrecy rate in bits/s/Hz, both clamped at zero and raw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecrecyRate {
    pub clamped: f64,
    pub raw: f64,
}

pub fn secrecy_rate(sinr_b: f64, eve_metric: f64) -> SecrecyRate {
    let raw = (1.0 + sinr_b).log2() - (1.0 + eve_metric).log2();
    SecrecyRate {
        clamped: raw.max(0.0),
        raw,
    }
}

/// Which eavesdropper quantity a report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveMetricKind {
    /// SINR at a known eavesdropper position.
    Instantaneous,
    /// Ratio-of-expectations surrogate over the receiver plane.
    Surrogate,
    /// Monte Carlo mean of the SINR over random eavesdropper positions.
    Averaged,
}

impl EveMetricKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EveMetricKind::Instantaneous => "instantaneous",
            EveMetricKind::Surrogate => "surrogate",
            EveMetricKind::Averaged => "averaged",
        }
    }
}

/// Design-time ("tilde") and actual link metrics of one precoder pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrReport {
    /// Actual Bob SINR at the achieved clipping operating point.
    pub sinr_b: f64,
    /// Actual eavesdropper metric, of kind `eve_kind`.
    pub eve_metric: f64,
    pub eve_kind: EveMetricKind,
    /// Actual surrogate `lambda_E`, when the eavesdropper is unknown.
    pub lambda_e: Option<f64>,
    pub secrecy: SecrecyRate,
    /// Bob SINR under the fixed design operating point.
    pub tilde_sinr_b: f64,
    /// Design-time eavesdropper metric (instantaneous SINR or surrogate).
    pub tilde_eve_metric: f64,
    /// Secrecy rate from the design-time Bob SINR. For an unknown
    /// eavesdropper the actual averaged metric is used on Eve's side.
    pub tilde_secrecy: SecrecyRate,
}
