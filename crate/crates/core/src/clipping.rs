//! Bussgang statistics of a clipped zero-mean Gaussian LED drive current.
//!
//! A drive current `x ~ N(0, sigma^2)` is clipped to
//! `[I_min - I_dc, I_max - I_dc]` and the bias `I_dc` is added back. The
//! clipped output decomposes as `R x + I_dc + zeta` with `zeta` uncorrelated
//! with `x`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use libm::erfc;

use crate::error::{Error, Result};
use crate::summation::KahanSum;

/// Upper-tail probability of the standard normal distribution.
///
/// Evaluated through `erfc` so both tails keep full relative precision.
pub fn q_function(t: f64) -> f64 {
    0.5 * erfc(t / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn std_normal_pdf(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Linear range of the LED and the DC bias, amperes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipLevels {
    pub i_min: f64,
    pub i_max: f64,
    pub i_dc: f64,
}

impl ClipLevels {
    pub fn new(i_min: f64, i_max: f64, i_dc: f64) -> Result<Self> {
        if !(i_min < i_max) {
            return Err(Error::InvalidParameter {
                field: "clip levels",
                reason: format!("need i_min < i_max, got [{i_min}, {i_max}]"),
            });
        }
        if !i_dc.is_finite() {
            return Err(Error::InvalidParameter {
                field: "i_dc",
                reason: format!("must be finite, got {i_dc}"),
            });
        }
        Ok(Self { i_min, i_max, i_dc })
    }

    /// The `[0 A, 1 A]` linear range with the given bias.
    pub fn unit_range(i_dc: f64) -> Self {
        Self {
            i_min: 0.0,
            i_max: 1.0,
            i_dc,
        }
    }

    /// No clipping at all.
    pub fn unclipped(i_dc: f64) -> Self {
        Self {
            i_min: f64::NEG_INFINITY,
            i_max: f64::INFINITY,
            i_dc,
        }
    }

    fn clip(&self, x: f64) -> f64 {
        x.clamp(self.i_min - self.i_dc, self.i_max - self.i_dc)
    }
}

/// Bussgang decomposition of one clipped drive current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClippingStats {
    /// Attenuation factor `R`, in `[0, 1]`.
    pub attenuation: f64,
    /// Standard deviation of the clipping noise, amperes.
    pub sigma_clip: f64,
    /// Mean of the clipped, biased current, amperes.
    pub mean_current: f64,
    /// Normalized lower clip level.
    pub alpha: f64,
    /// Normalized upper clip level.
    pub beta: f64,
}

impl ClippingStats {
    /// Statistics of a signal that is never clipped.
    pub fn transparent(i_dc: f64) -> Self {
        Self {
            attenuation: 1.0,
            sigma_clip: 0.0,
            mean_current: i_dc,
            alpha: f64::NEG_INFINITY,
            beta: f64::INFINITY,
        }
    }
}

// t * g(t) with the limit 0 at infinite t (g decays faster than 1/t).
fn weighted(t: f64, g: f64) -> f64 {
    if t.is_infinite() {
        0.0
    } else {
        t * g
    }
}

/// Analytic clipping statistics of `N(0, sigma^2)` under `levels`.
///
/// A zero `sigma` is a constant signal: nothing is clipped, `R = 1` by
/// convention and the mean is the bias clamped into the linear range.
pub fn clipping_stats(sigma: f64, levels: &ClipLevels) -> Result<ClippingStats> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!(
            "drive standard deviation must be finite and nonnegative, got {sigma}"
        )));
    }
    if sigma == 0.0 {
        return Ok(ClippingStats {
            mean_current: levels.i_dc.clamp(levels.i_min, levels.i_max),
            ..ClippingStats::transparent(levels.i_dc)
        });
    }
    let alpha = (levels.i_min - levels.i_dc) / sigma;
    let beta = (levels.i_max - levels.i_dc) / sigma;

    let q_beta = q_function(beta);
    // lower-tail mass, computed as Q(-alpha) so that symmetric levels give
    // bit-identical tails
    let p_alpha = q_function(-alpha);
    let r = q_function(alpha) - q_beta;
    let phi_a = std_normal_pdf(alpha);
    let phi_b = std_normal_pdf(beta);

    // Work with the tail excesses u = (z - beta)+ and l = (alpha - z)+ of a
    // standard normal z, so that clip(z) = z - u + l. The distortion
    // variance is then a sum of tail-sized terms, free of the cancellation
    // in E[clip^2] - E[clip]^2 - R^2 when clipping is rare.
    let e_u = phi_b - weighted(beta, q_beta);
    let e_l = phi_a + weighted(alpha, p_alpha);
    let e_u2 = q_beta + weighted(beta, weighted(beta, q_beta)) - weighted(beta, phi_b);
    let e_l2 = p_alpha + weighted(alpha, weighted(alpha, p_alpha)) + weighted(alpha, phi_a);
    let tails = q_beta + p_alpha;
    // E[clip(x)] / sigma
    let m1 = e_l - e_u;
    let var_factor = (e_u2 + e_l2 - tails * tails - m1 * m1).max(0.0);

    let mean_current = (levels.i_dc + m1 * sigma).clamp(levels.i_min, levels.i_max);
    Ok(ClippingStats {
        attenuation: r.clamp(0.0, 1.0),
        sigma_clip: var_factor.sqrt() * sigma,
        mean_current,
        alpha,
        beta,
    })
}

/// Standard deviation of `v d + w z` for independent unit-variance `d`, `z`.
pub fn combined_sigma(v: f64, w: f64) -> f64 {
    v.hypot(w)
}

/// Sample-based clipping statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmpiricalClipping {
    pub stats: ClippingStats,
    /// Sample correlation coefficient between the distortion and the input.
    pub distortion_correlation: f64,
    pub n_samples: usize,
}

/// Monte Carlo estimate of the clipping statistics, deterministic in `seed`.
pub fn empirical_clipping_stats(
    sigma: f64,
    levels: &ClipLevels,
    n_samples: usize,
    seed: u64,
) -> Result<EmpiricalClipping> {
    if n_samples < 10_000 {
        return Err(Error::InvalidParameter {
            field: "n_samples",
            reason: format!("need at least 10^4 samples, got {n_samples}"),
        });
    }
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!(
            "empirical statistics need a positive standard deviation, got {sigma}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n_samples)
        .map(|_| { let z: f64 = StandardNormal.sample(&mut rng); sigma * z })
        .collect();
    let n = n_samples as f64;
    let mean = |f: &dyn Fn(f64) -> f64| xs.iter().map(|&x| f(x)).collect::<KahanSum>().value() / n;

    let ex2 = mean(&|x| x * x);
    let r = mean(&|x| levels.clip(x) * x) / ex2;
    let clipped_mean = mean(&|x| levels.clip(x));
    let zeta = |x: f64| levels.clip(x) - r * x;
    let zeta_mean = mean(&|x| zeta(x));
    let zeta_var = mean(&|x| (zeta(x) - zeta_mean).powi(2));
    let x_mean = mean(&|x| x);
    let x_var = mean(&|x| (x - x_mean).powi(2));
    let cov = mean(&|x| (zeta(x) - zeta_mean) * (x - x_mean));
    let corr = if zeta_var > 0.0 {
        cov / (zeta_var * x_var).sqrt()
    } else {
        0.0
    };

    Ok(EmpiricalClipping {
        stats: ClippingStats {
            attenuation: r,
            sigma_clip: zeta_var.sqrt(),
            mean_current: levels.i_dc + clipped_mean,
            alpha: (levels.i_min - levels.i_dc) / sigma,
            beta: (levels.i_max - levels.i_dc) / sigma,
        },
        distortion_correlation: corr,
        n_samples,
    })
}
