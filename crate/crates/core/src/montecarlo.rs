//! Random placements, the Monte Carlo average of the eavesdropper SINR and
//! parameter sweeps.
//!
//! Every placement index owns a deterministic random stream, so the same
//! Bob/Eve positions are reused for every scheme and every grid value
//! (paired comparisons), and results do not depend on thread scheduling.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::clipping::ClipLevels;
use crate::designer::{
    ccp_solve, evaluate_design, no_an_design, Branch, CcpSettings, Channels, DesignSpec, EveAveraging, EveCsi,
    PrecoderPair,
};
use crate::designer::db_to_linear;
use crate::error::{Error, Result};
use crate::geometry::RoomLayout;
use crate::link::{normalized_noise_variance, BranchStats, LuminaireConfig, SinrReport};
use crate::params::SystemModel;
use crate::summation::MeanStderr;
use crate::Point;

/// Uniform point on the receiver plane inside the room footprint.
pub fn sample_position<R: Rng + ?Sized>(layout: &RoomLayout, rng: &mut R) -> Point {
    let x = (rng.random::<f64>() - 0.5) * layout.length();
    let y = (rng.random::<f64>() - 0.5) * layout.width();
    Point::new(x, y, layout.receiver_height())
}

/// SplitMix64 finalizer: decorrelated substream seeds from `(seed, index)`.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mean (and standard error) of the instantaneous eavesdropper SINR over
/// uniformly drawn positions, each with its own receiver noise.
pub fn estimate_avg_eve_sinr(
    system: &SystemModel,
    pair: &PrecoderPair,
    stats: &BranchStats,
    conversion: f64,
    realizations: usize,
    seed: u64,
) -> Result<MeanStderr> {
    if realizations == 0 {
        return Err(Error::InvalidParameter {
            field: "eve_realizations",
            reason: "need at least one realization".into(),
        });
    }
    let emitted = stats.emitted_power(conversion);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vals = Vec::with_capacity(realizations);
    for _ in 0..realizations {
        let p = sample_position(&system.layout, &mut rng);
        let h = system.channel(&p)?;
        let sigma2 = normalized_noise_variance(h.gains().dot(&emitted), &system.noise, &system.optics, conversion);
        vals.push(stats.sinr(&h, &pair.v, &pair.w, sigma2)?);
    }
    Ok(MeanStderr::from_slice(&vals))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVariable {
    /// Square root of the per-luminaire power cap, A.
    SigmaP,
    /// Eavesdropper cap, dB.
    LambdaDb,
    /// Two-branch power split.
    R,
    /// Chips in the AN group.
    AnChips,
}

impl SweepVariable {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepVariable::SigmaP => "sigma_p",
            SweepVariable::LambdaDb => "lambda_db",
            SweepVariable::R => "r",
            SweepVariable::AnChips => "an_chips",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sigma_p" => Some(Self::SigmaP),
            "lambda_db" => Some(Self::LambdaDb),
            "r" => Some(Self::R),
            "an_chips" => Some(Self::AnChips),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    OneBranchAn,
    OneBranchNoAn,
    TwoBranchAn,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::OneBranchAn, Scheme::OneBranchNoAn, Scheme::TwoBranchAn];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::OneBranchAn => "one_branch_an",
            Scheme::OneBranchNoAn => "one_branch_no_an",
            Scheme::TwoBranchAn => "two_branch_an",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.as_str() == s)
    }

    pub fn branch(&self) -> Branch {
        match self {
            Scheme::OneBranchAn | Scheme::OneBranchNoAn => Branch::One,
            Scheme::TwoBranchAn => Branch::Two,
        }
    }

    pub fn with_an(&self) -> bool {
        !matches!(self, Scheme::OneBranchNoAn)
    }
}

/// Fixed design parameters of a sweep; the swept variable overrides one of
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDesign {
    pub csi: EveCsi,
    pub sigma_p: f64,
    pub lambda_db: f64,
    pub r: f64,
    pub chips: u32,
    pub an_chips: u32,
    pub conversion: f64,
    pub i_min: f64,
    pub i_max: f64,
    /// Bias; `None` means `2 sigma_p`.
    pub i_dc: Option<f64>,
}

impl Default for BaseDesign {
    fn default() -> Self {
        Self {
            csi: EveCsi::Known,
            sigma_p: 0.25,
            lambda_db: 0.0,
            r: 0.5,
            chips: 24,
            an_chips: 12,
            conversion: 0.44,
            i_min: 0.0,
            i_max: 1.0,
            i_dc: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub grid: Vec<f64>,
    pub base: BaseDesign,
    pub schemes: Vec<Scheme>,
    pub placements: usize,
    pub eve_realizations: usize,
    pub seed: u64,
    pub fixed_bob: Option<Point>,
    pub fixed_eve: Option<Point>,
    pub ccp: CcpSettings,
}

impl SweepConfig {
    pub fn new(variable: SweepVariable, grid: Vec<f64>) -> Self {
        Self {
            variable,
            grid,
            base: BaseDesign::default(),
            schemes: Scheme::ALL.to_vec(),
            placements: 200,
            eve_realizations: 1000,
            seed: 0,
            fixed_bob: None,
            fixed_eve: None,
            ccp: CcpSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "grid",
                reason: "need a nonempty grid of finite values".into(),
            });
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidParameter {
                field: "schemes",
                reason: "need at least one scheme".into(),
            });
        }
        if self.placements == 0 {
            return Err(Error::InvalidParameter {
                field: "placements",
                reason: "need at least one placement".into(),
            });
        }
        if self.eve_realizations == 0 {
            return Err(Error::InvalidParameter {
                field: "eve_realizations",
                reason: "need at least one realization".into(),
            });
        }
        self.ccp.validate()?;
        for &g in &self.grid {
            for &s in &self.schemes {
                self.design_spec(g, s, 1)?;
            }
        }
        Ok(())
    }

    /// Design specification at grid value `value` for `scheme`.
    pub fn design_spec(&self, value: f64, scheme: Scheme, luminaires: usize) -> Result<DesignSpec> {
        let mut b = self.base.clone();
        match self.variable {
            SweepVariable::SigmaP => b.sigma_p = value,
            SweepVariable::LambdaDb => b.lambda_db = value,
            SweepVariable::R => b.r = value,
            SweepVariable::AnChips => {
                if value.fract() != 0.0 || value < 0.0 {
                    return Err(Error::InvalidParameter {
                        field: "an_chips",
                        reason: format!("must be a nonnegative integer, got {value}"),
                    });
                }
                b.an_chips = value as u32;
            }
        }
        if !(b.sigma_p > 0.0) {
            return Err(Error::InvalidParameter {
                field: "sigma_p",
                reason: format!("must be positive, got {}", b.sigma_p),
            });
        }
        let levels = ClipLevels::new(b.i_min, b.i_max, b.i_dc.unwrap_or(2.0 * b.sigma_p))?;
        let cfg = LuminaireConfig::new(b.chips, b.an_chips, b.conversion)?;
        let spec = DesignSpec::new(
            scheme.branch(),
            b.csi,
            db_to_linear(b.lambda_db),
            DVector::from_element(luminaires, b.sigma_p * b.sigma_p),
            levels,
            cfg,
        )?;
        spec.with_split(b.r)
    }
}

/// One solved and evaluated placement.
#[derive(Debug, Clone, PartialEq)]
pub struct PlacementOutcome {
    pub index: usize,
    pub bob: Point,
    pub eve: Point,
    pub pair: PrecoderPair,
    pub report: SinrReport,
    pub iterations: usize,
    pub converged: bool,
    /// `max_n (v_n^2 + w_n^2) / P_n`.
    pub max_power_ratio: f64,
    /// Tilde eavesdropper metric over the cap.
    pub eve_cap_ratio: f64,
}

/// Positions of placement `index`.
pub fn placement_positions(system: &SystemModel, cfg: &SweepConfig, index: usize) -> (Point, Point) {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, index as u64));
    let bob = sample_position(&system.layout, &mut rng);
    let eve = sample_position(&system.layout, &mut rng);
    (cfg.fixed_bob.unwrap_or(bob), cfg.fixed_eve.unwrap_or(eve))
}

/// Designs and evaluates one placement.
pub fn run_placement(
    system: &SystemModel,
    cfg: &SweepConfig,
    value: f64,
    scheme: Scheme,
    index: usize,
) -> Result<PlacementOutcome> {
    let spec = cfg.design_spec(value, scheme, system.num_luminaires())?;
    let (bob, eve) = placement_positions(system, cfg, index);
    let channels = Channels {
        bob: system.channel(&bob)?,
        eve: Some(system.channel(&eve)?),
    };
    let settings = CcpSettings {
        init_seed: mix_seed(cfg.ccp.init_seed, index as u64),
        ..cfg.ccp
    };
    let design = if scheme.with_an() {
        ccp_solve(system, &spec, &channels, &settings)?
    } else {
        no_an_design(system, &spec, &channels, &settings)?
    };
    let averaging = EveAveraging {
        realizations: cfg.eve_realizations,
        seed: mix_seed(cfg.seed ^ 0x5EED_E7E0, index as u64),
    };
    let report = evaluate_design(system, &spec, &channels, &design, &averaging)?;
    let max_power_ratio = design
        .pair
        .powers()
        .iter()
        .zip(spec.power_caps.iter())
        .map(|(p, c)| p / c)
        .fold(0.0, f64::max);
    Ok(PlacementOutcome {
        index,
        bob,
        eve,
        iterations: design.trace.iterations(),
        converged: design.trace.converged,
        max_power_ratio,
        eve_cap_ratio: design.tilde_eve_metric / spec.lambda,
        pair: design.pair,
        report,
    })
}

/// All placements of one scheme at one grid value, in index order.
pub fn run_placements(
    system: &SystemModel,
    cfg: &SweepConfig,
    value: f64,
    scheme: Scheme,
) -> Vec<Result<PlacementOutcome>> {
    (0..cfg.placements)
        .into_par_iter()
        .map(|i| run_placement(system, cfg, value, scheme, i))
        .collect()
}

/// Aggregate over the successful placements of one (grid value, scheme).
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub variable: SweepVariable,
    pub value: f64,
    pub scheme: Scheme,
    pub csi: EveCsi,
    pub succeeded: usize,
    pub failed: usize,
    pub sinr_b: MeanStderr,
    pub eve_metric: MeanStderr,
    /// Actual surrogate; only for unknown CSI (otherwise `count == 0`).
    pub lambda_e: MeanStderr,
    pub secrecy: MeanStderr,
    pub secrecy_raw: MeanStderr,
    pub tilde_sinr_b: MeanStderr,
    pub tilde_eve_metric: MeanStderr,
    pub tilde_secrecy: MeanStderr,
    pub tilde_secrecy_raw: MeanStderr,
    pub iterations: MeanStderr,
    pub converged_fraction: f64,
}

impl SweepRecord {
    pub fn aggregate(
        variable: SweepVariable,
        value: f64,
        scheme: Scheme,
        csi: EveCsi,
        outcomes: &[Result<PlacementOutcome>],
    ) -> Self {
        let ok: Vec<&PlacementOutcome> = outcomes.iter().filter_map(|o| o.as_ref().ok()).collect();
        let stat = |f: &dyn Fn(&PlacementOutcome) -> f64| {
            MeanStderr::from_slice(&ok.iter().map(|o| f(o)).collect::<Vec<_>>())
        };
        let lam: Vec<f64> = ok.iter().filter_map(|o| o.report.lambda_e).collect();
        let converged = ok.iter().filter(|o| o.converged).count();
        Self {
            variable,
            value,
            scheme,
            csi,
            succeeded: ok.len(),
            failed: outcomes.len() - ok.len(),
            sinr_b: stat(&|o| o.report.sinr_b),
            eve_metric: stat(&|o| o.report.eve_metric),
            lambda_e: MeanStderr::from_slice(&lam),
            secrecy: stat(&|o| o.report.secrecy.clamped),
            secrecy_raw: stat(&|o| o.report.secrecy.raw),
            tilde_sinr_b: stat(&|o| o.report.tilde_sinr_b),
            tilde_eve_metric: stat(&|o| o.report.tilde_eve_metric),
            tilde_secrecy: stat(&|o| o.report.tilde_secrecy.clamped),
            tilde_secrecy_raw: stat(&|o| o.report.tilde_secrecy.raw),
            iterations: stat(&|o| o.iterations as f64),
            converged_fraction: if ok.is_empty() {
                0.0
            } else {
                converged as f64 / ok.len() as f64
            },
        }
    }
}

/// Runs every scheme at every grid value. Individual solve failures are
/// counted in the records, not propagated.
pub fn run_sweep(system: &SystemModel, cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    if cfg.base.csi == EveCsi::Unknown {
        // fill the lazily computed statistics before fanning out
        system.eve_stats()?;
    }
    let mut out = Vec::with_capacity(cfg.grid.len() * cfg.schemes.len());
    for &value in &cfg.grid {
        for &scheme in &cfg.schemes {
            let outcomes = run_placements(system, cfg, value, scheme);
            out.push(SweepRecord::aggregate(cfg.variable, value, scheme, cfg.base.csi, &outcomes));
        }
    }
    Ok(out)
}
