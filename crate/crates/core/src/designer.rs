//! AN precoder design.
//!
//! Clipping statistics and noise variances are frozen at a fixed operating
//! point (the "tilde" model), which turns both SINRs into ratios of
//! quadratics in `(v, w)`. A Charnes-Cooper substitution removes Bob's
//! denominator, and the remaining difference-of-convex problem is solved by
//! the convex-concave procedure: each iteration linearizes the convex
//! objective and the convex AN term on Eve's side and solves the resulting
//! convex QCQP.
//!
//! Internally the variables are `x = [v~; w~]` with `v~ = t sqrt(D_B) v`,
//! where `t` is the Charnes-Cooper scale and `D_B` Bob's fixed
//! interference-plus-noise power. In these units the subproblem objective
//! equals the tilde Bob SINR and `v = v~ / sqrt(1 - (b^ w~)^2)`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::clipping::{clipping_stats, ClipLevels, ClippingStats};
use crate::error::{check_len, Error, Result};
use crate::geometry::ChannelVector;
use crate::link::{
    avg_eve_noise_variance, lambda_e, normalized_noise_variance, secrecy_rate, BranchStats,
    EveMetricKind, LuminaireConfig, SinrReport,
};
use crate::montecarlo::estimate_avg_eve_sinr;
use crate::params::SystemModel;
use crate::qcqp::{self, QcqpProblem, QuadConstraint, SolveStatus, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    One,
    Two,
}

impl Branch {
    pub fn as_str(&self) -> &'static str {
        match self {
            Branch::One => "one",
            Branch::Two => "two",
        }
    }
}

/// What the transmitter knows about the eavesdropper.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveCsi {
    /// Eve's channel vector is known.
    Known,
    /// Only the position-averaged statistics are known.
    Unknown,
}

impl EveCsi {
    pub fn as_str(&self) -> &'static str {
        match self {
            EveCsi::Known => "known",
            EveCsi::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignSpec {
    pub branch: Branch,
    pub csi: EveCsi,
    /// Cap on the eavesdropper metric, linear.
    pub lambda: f64,
    /// Per-luminaire caps on `v_n^2 + w_n^2`, A^2.
    pub power_caps: DVector<f64>,
    /// Share of the power cap assumed for the data group when freezing the
    /// two-branch operating point.
    pub r: f64,
    pub levels: ClipLevels,
    pub cfg: LuminaireConfig,
}

impl DesignSpec {
    pub fn new(
        branch: Branch,
        csi: EveCsi,
        lambda: f64,
        power_caps: DVector<f64>,
        levels: ClipLevels,
        cfg: LuminaireConfig,
    ) -> Result<Self> {
        let spec = Self {
            branch,
            csi,
            lambda,
            power_caps,
            r: 0.5,
            levels,
            cfg,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Equal caps `sigma_p^2`, bias `2 sigma_p`, `[0, 1]` A linear range and
    /// the reference luminaire.
    pub fn reference(branch: Branch, csi: EveCsi, sigma_p: f64, lambda_db: f64, luminaires: usize) -> Result<Self> {
        Self::new(
            branch,
            csi,
            db_to_linear(lambda_db),
            DVector::from_element(luminaires, sigma_p * sigma_p),
            ClipLevels::unit_range(2.0 * sigma_p),
            LuminaireConfig::reference(),
        )
    }

    pub fn with_split(mut self, r: f64) -> Result<Self> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter {
                field: "lambda",
                reason: format!("must be positive and finite, got {}", self.lambda),
            });
        }
        if self.power_caps.is_empty() || self.power_caps.iter().any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter {
                field: "power_caps",
                reason: "every cap must be positive and finite".into(),
            });
        }
        if !(self.r > 0.0 && self.r < 1.0) {
            return Err(Error::InvalidParameter {
                field: "r",
                reason: format!("must lie in (0, 1), got {}", self.r),
            });
        }
        if self.branch == Branch::Two {
            self.cfg.validate_for_design()?;
        }
        Ok(())
    }

    pub fn num_luminaires(&self) -> usize {
        self.power_caps.len()
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcpSettings {
    /// Relative-change tolerance on both precoders.
    pub epsilon: f64,
    pub max_iterations: usize,
    pub init_seed: u64,
    pub tolerances: Tolerances,
}

impl Default for CcpSettings {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            max_iterations: 10,
            init_seed: 0,
            tolerances: Tolerances::default(),
        }
    }
}

impl CcpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter {
                field: "epsilon",
                reason: format!("must be positive, got {}", self.epsilon),
            });
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter {
                field: "max_iterations",
                reason: "need at least one iteration".into(),
            });
        }
        Ok(())
    }
}

/// Information and AN precoders, amperes.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderPair {
    pub v: DVector<f64>,
    pub w: DVector<f64>,
}

impl PrecoderPair {
    pub fn zeros(n: usize) -> Self {
        Self {
            v: DVector::zeros(n),
            w: DVector::zeros(n),
        }
    }

    /// `v_n^2 + w_n^2`.
    pub fn powers(&self) -> DVector<f64> {
        self.v.component_mul(&self.v) + self.w.component_mul(&self.w)
    }

    pub fn check_caps(&self, caps: &DVector<f64>) -> Result<()> {
        check_len("power caps", self.v.len(), caps.len())?;
        check_len("AN precoder", self.v.len(), self.w.len())?;
        for (index, (p, cap)) in self.powers().iter().zip(caps.iter()).enumerate() {
            if !p.is_finite() || *p > cap * (1.0 + 1e-6) {
                return Err(Error::PowerCap {
                    index,
                    power: *p,
                    cap: *cap,
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CcpTrace {
    /// Tilde Bob SINR at the initial point and after every iteration.
    pub objectives: Vec<f64>,
    /// Relative changes of `(v, w)` per iteration.
    pub relative_changes: Vec<(f64, f64)>,
    pub statuses: Vec<SolveStatus>,
    pub converged: bool,
}

impl CcpTrace {
    pub fn iterations(&self) -> usize {
        self.statuses.len()
    }
}

/// Channels of one placement. The eavesdropper channel is required for
/// known CSI and unused otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Channels {
    pub bob: ChannelVector,
    pub eve: Option<ChannelVector>,
}

/// Frozen statistics and the resulting quadratic forms.
///
/// Tilde Bob SINR is `(a_B' v)^2 / ((b_B' w)^2 + d_B)`; the tilde Eve metric
/// is `v' A_E v / (w' B_E w + d_E)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TildeModel {
    pub stats: BranchStats,
    pub with_an: bool,
    pub a_b: DVector<f64>,
    pub b_b: DVector<f64>,
    pub d_b: f64,
    pub sigma2_b: f64,
    pub a_e: DMatrix<f64>,
    pub b_e: DMatrix<f64>,
    pub d_e: f64,
    pub sigma2_e: f64,
}

impl TildeModel {
    pub fn sinr_b(&self, pair: &PrecoderPair) -> f64 {
        let s = self.a_b.dot(&pair.v).powi(2);
        let i = if self.with_an { self.b_b.dot(&pair.w).powi(2) } else { 0.0 };
        s / (i + self.d_b)
    }

    pub fn eve_metric(&self, pair: &PrecoderPair) -> f64 {
        let s = pair.v.dot(&(&self.a_e * &pair.v));
        let i = if self.with_an {
            pair.w.dot(&(&self.b_e * &pair.w))
        } else {
            0.0
        };
        s / (i + self.d_e)
    }

    fn dim(&self) -> usize {
        self.a_b.len()
    }

    fn nvars(&self) -> usize {
        if self.with_an {
            2 * self.dim()
        } else {
            self.dim()
        }
    }

    fn a_hat(&self) -> DVector<f64> {
        &self.a_b / self.d_b.sqrt()
    }

    fn b_hat(&self) -> DVector<f64> {
        &self.b_b / self.d_b.sqrt()
    }

    fn split(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let n = self.dim();
        let v = x.rows(0, n).into_owned();
        let w = if self.with_an {
            x.rows(n, n).into_owned()
        } else {
            DVector::zeros(n)
        };
        (v, w)
    }

    /// Undoes the Charnes-Cooper substitution.
    pub fn recover(&self, x: &DVector<f64>) -> Result<PrecoderPair> {
        let (v, w) = self.split(x);
        let s2 = 1.0 - self.b_hat().dot(&w).powi(2);
        if !(s2 > 0.0) {
            return Err(Error::Numerical(format!("Charnes-Cooper scale t^2 = {s2:e} is not positive")));
        }
        let s = s2.sqrt();
        Ok(PrecoderPair { v: v / s, w: w / s })
    }
}

fn stats_vec(sigmas: impl Iterator<Item = f64>, levels: &ClipLevels) -> Result<Vec<ClippingStats>> {
    sigmas.map(|s| clipping_stats(s, levels)).collect()
}

/// Clipping statistics at the design operating point: `v_n^2 + w_n^2 = P_n`
/// for one branch, `|v_n| = sqrt(r P_n)` and `|w_n| = sqrt((1 - r) P_n)` for
/// two. Without AN the whole cap goes to the information signal.
pub fn tilde_branch_stats(spec: &DesignSpec, with_an: bool) -> Result<BranchStats> {
    let caps = spec.power_caps.iter();
    Ok(match spec.branch {
        Branch::One => BranchStats::One {
            stats: stats_vec(caps.map(|p| p.sqrt()), &spec.levels)?,
            chips: spec.cfg.chips,
        },
        Branch::Two => {
            let (rd, rz) = if with_an { (spec.r, 1.0 - spec.r) } else { (1.0, 0.0) };
            BranchStats::Two {
                data: stats_vec(spec.power_caps.iter().map(|p| (rd * p).sqrt()), &spec.levels)?,
                an: stats_vec(spec.power_caps.iter().map(|p| (rz * p).sqrt()), &spec.levels)?,
                cfg: spec.cfg,
            }
        }
    })
}

/// Builds the frozen model for one placement.
pub fn tilde_model(system: &SystemModel, spec: &DesignSpec, channels: &Channels, with_an: bool) -> Result<TildeModel> {
    spec.validate()?;
    let n = system.num_luminaires();
    check_len("power caps", n, spec.num_luminaires())?;
    check_len("Bob channel", n, channels.bob.len())?;
    let stats = tilde_branch_stats(spec, with_an)?;
    let conv = spec.cfg.conversion;
    let emitted = stats.emitted_power(conv);
    let (n_info, r_info) = stats.info_path();
    let (n_an, r_an) = stats.an_path();
    let groups = stats.clip_groups();

    let h_b = channels.bob.gains();
    let sigma2_b = normalized_noise_variance(h_b.dot(&emitted), &system.noise, &system.optics, conv);
    let clip_b: f64 = groups.iter().map(|(c, s)| (c * h_b.dot(s)).powi(2)).sum();
    let a_b = h_b.component_mul(&r_info) * n_info;
    let b_b = h_b.component_mul(&r_an) * n_an;
    let d_b = clip_b + sigma2_b;

    let (a_e, b_e, d_e, sigma2_e) = match spec.csi {
        EveCsi::Known => {
            let eve = channels.eve.as_ref().ok_or_else(|| {
                Error::InvalidParameter {
                    field: "eve channel",
                    reason: "known-CSI design needs the eavesdropper channel".into(),
                }
            })?;
            check_len("Eve channel", n, eve.len())?;
            let h_e = eve.gains();
            let sigma2_e = normalized_noise_variance(h_e.dot(&emitted), &system.noise, &system.optics, conv);
            let clip_e: f64 = groups.iter().map(|(c, s)| (c * h_e.dot(s)).powi(2)).sum();
            let a = h_e.component_mul(&r_info) * n_info;
            let b = h_e.component_mul(&r_an) * n_an;
            (&a * a.transpose(), &b * b.transpose(), clip_e + sigma2_e, sigma2_e)
        }
        EveCsi::Unknown => {
            let es = system.eve_stats()?;
            let h_bar = &es.correlation;
            let sigma2_e = avg_eve_noise_variance(&es.mean_gain, &emitted, &system.noise, &system.optics, conv)?;
            let clip_e: f64 = groups.iter().map(|(c, s)| c * c * s.dot(&(h_bar * s))).sum();
            let weighted = |r: &DVector<f64>, c: f64| (r * r.transpose()).component_mul(h_bar) * (c * c);
            (weighted(&r_info, n_info), weighted(&r_an, n_an), clip_e + sigma2_e, sigma2_e)
        }
    };
    let sym = |m: DMatrix<f64>| (&m + m.transpose()) * 0.5;
    Ok(TildeModel {
        stats,
        with_an,
        a_b,
        b_b,
        d_b,
        sigma2_b,
        a_e: sym(a_e),
        b_e: sym(b_e),
        d_e,
        sigma2_e,
    })
}

fn embed_block(dst: &mut DMatrix<f64>, src: &DMatrix<f64>, offset: usize, scale: f64) {
    let n = src.nrows();
    let mut view = dst.view_mut((offset, offset), (n, n));
    view += src * scale;
}

/// Convex subproblem linearized at the scaled iterate `x0`.
pub fn build_ccp_subproblem(model: &TildeModel, spec: &DesignSpec, lambda: f64, x0: &DVector<f64>) -> Result<QcqpProblem> {
    let n = model.dim();
    let m = model.nvars();
    check_len("iterate", m, x0.len())?;
    let a_hat = model.a_hat();
    let b_hat = model.b_hat();
    let (v0, w0) = model.split(x0);

    let g = a_hat.dot(&v0);
    if g == 0.0 || a_hat.amax() == 0.0 {
        return Err(Error::DegenerateLinearization);
    }
    // (a^' v)^2 >= 2 g a^' v - g^2
    let mut c = DVector::zeros(m);
    c.rows_mut(0, n).copy_from(&(&a_hat * (2.0 * g)));

    let a_e = &model.a_e / model.d_b;
    let rho = model.d_e / model.d_b;
    let bb = &b_hat * b_hat.transpose();

    let mut eve_a = DMatrix::zeros(m, m);
    embed_block(&mut eve_a, &a_e, 0, 1.0 / lambda);
    let mut eve_b = DVector::zeros(m);
    let mut eve_d = rho;
    if model.with_an {
        let b_e = &model.b_e / model.d_b;
        embed_block(&mut eve_a, &bb, n, rho);
        let bw = &b_e * &w0;
        eve_b.rows_mut(n, n).copy_from(&(&bw * -2.0));
        eve_d -= w0.dot(&bw);
    }
    let mut cons = vec![QuadConstraint::new(eve_a, eve_b, eve_d)];

    for k in 0..n {
        let p = spec.power_caps[k];
        let mut a = DMatrix::zeros(m, m);
        a[(k, k)] = 1.0;
        if model.with_an {
            a[(n + k, n + k)] = 1.0;
            embed_block(&mut a, &bb, n, p);
        }
        cons.push(QuadConstraint::new(a, DVector::zeros(m), p));
    }
    Ok(QcqpProblem::new(c, cons)?.with_constant(-g * g))
}

/// Seeded strictly feasible starting point, in scaled variables.
pub fn initial_point(model: &TildeModel, spec: &DesignSpec, lambda: f64, seed: u64) -> Result<DVector<f64>> {
    let n = model.dim();
    let a_hat = model.a_hat();
    let b_hat = model.b_hat();
    let na = a_hat.norm();
    if !(na > 0.0) {
        return Err(Error::DegenerateLinearization);
    }
    let u_v = &a_hat / na;
    let a_e = &model.a_e / model.d_b;
    let b_e = &model.b_e / model.d_b;
    let rho = model.d_e / model.d_b;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    for attempt in 0..100 {
        let shrink = 0.5f64.powi(attempt / 10);
        let w = if model.with_an {
            let u: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
            let u: DVector<f64> = &u / u.norm().max(f64::MIN_POSITIVE);
            let mut scale = f64::INFINITY;
            let proj = b_hat.dot(&u).abs();
            if proj > 0.0 {
                scale = scale.min(0.5 / proj);
            }
            for k in 0..n {
                if u[k] != 0.0 {
                    scale = scale.min((0.375 * spec.power_caps[k]).sqrt() / u[k].abs());
                }
            }
            u * (0.5 * shrink * scale)
        } else {
            DVector::zeros(n)
        };
        let s2 = 1.0 - b_hat.dot(&w).powi(2);
        let mut cv = f64::INFINITY;
        for k in 0..n {
            if u_v[k] != 0.0 {
                let budget = spec.power_caps[k] * s2 - w[k] * w[k];
                cv = cv.min((0.45 * budget).sqrt() / u_v[k].abs());
            }
        }
        let eve_rhs = w.dot(&(&b_e * &w)) + rho * s2;
        let q = u_v.dot(&(&a_e * &u_v));
        if q > 0.0 {
            cv = cv.min((0.5 * lambda * eve_rhs / q).sqrt());
        }
        let v = &u_v * (shrink * cv);
        let mut x = DVector::zeros(model.nvars());
        x.rows_mut(0, n).copy_from(&v);
        if model.with_an {
            x.rows_mut(n, n).copy_from(&w);
        }
        if !x.iter().all(|e| e.is_finite()) {
            continue;
        }
        let prob = build_ccp_subproblem(model, spec, lambda, &x)?;
        if qcqp::check_feasible(&prob, &x)? < 0.0 {
            return Ok(x);
        }
    }
    Err(Error::Infeasible { slack: f64::NAN })
}

fn relative_change(new: &DVector<f64>, old: &DVector<f64>) -> f64 {
    let d = (new - old).norm();
    let base = old.norm();
    if d == 0.0 {
        0.0
    } else if base == 0.0 {
        f64::INFINITY
    } else {
        d / base
    }
}

/// Result of one design solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Design {
    pub pair: PrecoderPair,
    pub trace: CcpTrace,
    pub model: TildeModel,
    /// Subproblem objective at the final iterate, equal to the tilde Bob SINR.
    pub objective: f64,
    pub tilde_sinr_b: f64,
    pub tilde_eve_metric: f64,
}

fn run_ccp(system: &SystemModel, spec: &DesignSpec, channels: &Channels, settings: &CcpSettings, with_an: bool) -> Result<Design> {
    settings.validate()?;
    let model = tilde_model(system, spec, channels, with_an)?;
    let n = model.dim();
    if model.a_b.amax() == 0.0 {
        // Bob sees no luminaire: nothing to design
        return Ok(Design {
            pair: PrecoderPair::zeros(n),
            trace: CcpTrace {
                converged: true,
                ..CcpTrace::default()
            },
            model,
            objective: 0.0,
            tilde_sinr_b: 0.0,
            tilde_eve_metric: 0.0,
        });
    }
    let lambda = spec.lambda;
    let a_hat = model.a_hat();
    let mut x = initial_point(&model, spec, lambda, settings.init_seed)?;
    let mut trace = CcpTrace {
        objectives: vec![a_hat.dot(&x.rows(0, n)).powi(2)],
        ..CcpTrace::default()
    };
    for iteration in 1..=settings.max_iterations {
        let prob = build_ccp_subproblem(&model, spec, lambda, &x)?;
        let sol = qcqp::solve_from(&prob, Some(&x), &settings.tolerances).map_err(|e| Error::Subproblem {
            iteration,
            reason: e.to_string(),
        })?;
        match sol.status {
            SolveStatus::Optimal | SolveStatus::MaxIter => {}
            other => {
                return Err(Error::Subproblem {
                    iteration,
                    reason: format!("solver status {}", other.as_str()),
                })
            }
        }
        let worst = qcqp::check_feasible(&prob, &sol.x_star)?;
        if worst > settings.tolerances.feasibility {
            return Err(Error::Subproblem {
                iteration,
                reason: format!("returned point violates constraints by {worst:e}"),
            });
        }
        let (v_old, w_old) = model.split(&x);
        let (v_new, w_new) = model.split(&sol.x_star);
        let dv = relative_change(&v_new, &v_old);
        let dw = if with_an { relative_change(&w_new, &w_old) } else { 0.0 };
        x = sol.x_star;
        trace.objectives.push(a_hat.dot(&v_new).powi(2));
        trace.relative_changes.push((dv, dw));
        trace.statuses.push(sol.status);
        if dv <= settings.epsilon && dw <= settings.epsilon {
            trace.converged = true;
            break;
        }
    }
    let objective = a_hat.dot(&x.rows(0, n)).powi(2);
    let pair = model.recover(&x)?;
    Ok(Design {
        tilde_sinr_b: model.sinr_b(&pair),
        tilde_eve_metric: model.eve_metric(&pair),
        pair,
        trace,
        model,
        objective,
    })
}

/// Joint design of the information and AN precoders.
pub fn ccp_solve(system: &SystemModel, spec: &DesignSpec, channels: &Channels, settings: &CcpSettings) -> Result<Design> {
    run_ccp(system, spec, channels, settings, true)
}

/// The same pipeline with the AN precoder fixed at zero.
pub fn no_an_design(system: &SystemModel, spec: &DesignSpec, channels: &Channels, settings: &CcpSettings) -> Result<Design> {
    run_ccp(system, spec, channels, settings, false)
}

/// Monte Carlo settings for the averaged eavesdropper SINR.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveAveraging {
    pub realizations: usize,
    pub seed: u64,
}

impl Default for EveAveraging {
    fn default() -> Self {
        Self {
            realizations: 1000,
            seed: 0,
        }
    }
}

/// Clipping statistics at the operating point `pair` actually reaches.
pub fn actual_branch_stats(spec: &DesignSpec, pair: &PrecoderPair) -> Result<BranchStats> {
    Ok(match spec.branch {
        Branch::One => BranchStats::One {
            stats: stats_vec(pair.v.iter().zip(pair.w.iter()).map(|(v, w)| v.hypot(*w)), &spec.levels)?,
            chips: spec.cfg.chips,
        },
        Branch::Two => BranchStats::Two {
            data: stats_vec(pair.v.iter().map(|v| v.abs()), &spec.levels)?,
            an: stats_vec(pair.w.iter().map(|w| w.abs()), &spec.levels)?,
            cfg: spec.cfg,
        },
    })
}

/// Actual and tilde metrics of a designed pair.
pub fn evaluate_design(
    system: &SystemModel,
    spec: &DesignSpec,
    channels: &Channels,
    design: &Design,
    averaging: &EveAveraging,
) -> Result<SinrReport> {
    let pair = &design.pair;
    pair.check_caps(&spec.power_caps)?;
    check_len("Bob channel", pair.v.len(), channels.bob.len())?;
    let stats = actual_branch_stats(spec, pair)?;
    let conv = spec.cfg.conversion;
    let emitted = stats.emitted_power(conv);
    let sigma2_b = normalized_noise_variance(channels.bob.gains().dot(&emitted), &system.noise, &system.optics, conv);
    let sinr_b = stats.sinr(&channels.bob, &pair.v, &pair.w, sigma2_b)?;
    let tilde_sinr_b = design.model.sinr_b(pair);
    let tilde_eve = design.model.eve_metric(pair);

    let (eve_metric, eve_kind, lam, tilde_secrecy) = match spec.csi {
        EveCsi::Known => {
            let eve = channels.eve.as_ref().ok_or_else(|| Error::InvalidParameter {
                field: "eve channel",
                reason: "known-CSI evaluation needs the eavesdropper channel".into(),
            })?;
            let sigma2_e = normalized_noise_variance(eve.gains().dot(&emitted), &system.noise, &system.optics, conv);
            let s = stats.sinr(eve, &pair.v, &pair.w, sigma2_e)?;
            (s, EveMetricKind::Instantaneous, None, secrecy_rate(tilde_sinr_b, tilde_eve))
        }
        EveCsi::Unknown => {
            let es = system.eve_stats()?;
            let avg_sigma2 = avg_eve_noise_variance(&es.mean_gain, &emitted, &system.noise, &system.optics, conv)?;
            let lam = lambda_e(&es.correlation, &pair.v, &pair.w, &stats, avg_sigma2)?;
            let avg = estimate_avg_eve_sinr(system, pair, &stats, conv, averaging.realizations, averaging.seed)?;
            (avg.mean, EveMetricKind::Averaged, Some(lam), secrecy_rate(tilde_sinr_b, avg.mean))
        }
    };
    Ok(SinrReport {
        sinr_b,
        eve_metric,
        eve_kind,
        lambda_e: lam,
        secrecy: secrecy_rate(sinr_b, eve_metric),
        tilde_sinr_b,
        tilde_eve_metric: tilde_eve,
        tilde_secrecy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Point;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn channels(system: &SystemModel, bob: Point, eve: Point) -> Channels {
        Channels {
            bob: system.channel(&bob).unwrap(),
            eve: Some(system.channel(&eve).unwrap()),
        }
    }

    fn placement(seed: u64) -> (Point, Point) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = || Point::new(rng.random_range(-2.5..2.5), rng.random_range(-2.5..2.5), 0.5);
        (p(), p())
    }

    fn spec(branch: Branch, csi: EveCsi, lambda_db: f64) -> DesignSpec {
        DesignSpec::reference(branch, csi, 0.25, lambda_db, 4).unwrap()
    }

    #[test]
    fn tilde_stats_one_branch_reference() {
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        match tilde_branch_stats(&s, true).unwrap() {
            BranchStats::One { stats, chips } => {
                assert_eq!(chips, 24);
                for st in stats {
                    assert_relative_eq!(st.attenuation, 0.9544997361036416, max_relative = 1e-9);
                    assert_relative_eq!(st.sigma_clip, 0.02432485793175569, max_relative = 1e-9);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn tilde_stats_two_branch_split() {
        let s = spec(Branch::Two, EveCsi::Known, 0.0);
        let want = clipping_stats(0.25 / 2f64.sqrt(), &s.levels).unwrap();
        match tilde_branch_stats(&s, true).unwrap() {
            BranchStats::Two { data, an, .. } => {
                for st in [data[0], an[0]] {
                    assert_relative_eq!(st.attenuation, want.attenuation, max_relative = 1e-14);
                    assert_relative_eq!(st.sigma_clip, want.sigma_clip, max_relative = 1e-14);
                }
            }
            _ => unreachable!(),
        }
        // more power to data lowers its attenuation and raises the AN group's
        let r = |r: f64| match tilde_branch_stats(&s.clone().with_split(r).unwrap(), true).unwrap() {
            BranchStats::Two { data, an, .. } => (data[0].attenuation, an[0].attenuation),
            _ => unreachable!(),
        };
        let (d3, z3) = r(0.3);
        let (d7, z7) = r(0.7);
        assert!(d7 < d3 && z7 > z3);
    }

    #[test]
    fn spec_validation() {
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        assert!(s.clone().with_split(1.0).is_err());
        let mut bad = s.clone();
        bad.lambda = 0.0;
        assert!(bad.validate().is_err());
        let mut bad = s;
        bad.power_caps[2] = -1.0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn zero_iterate_is_degenerate() {
        let system = SystemModel::reference();
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        let (b, e) = placement(1);
        let m = tilde_model(&system, &s, &channels(&system, b, e), true).unwrap();
        let r = build_ccp_subproblem(&m, &s, s.lambda, &DVector::zeros(8));
        assert!(matches!(r, Err(Error::DegenerateLinearization)));
    }

    #[test]
    fn initial_point_feasible_deterministic_nondegenerate() {
        let system = SystemModel::reference();
        for csi in [EveCsi::Known, EveCsi::Unknown] {
            for branch in [Branch::One, Branch::Two] {
                let s = spec(branch, csi, -5.0);
                let (b, e) = placement(3);
                let m = tilde_model(&system, &s, &channels(&system, b, e), true).unwrap();
                let x = initial_point(&m, &s, s.lambda, 7).unwrap();
                let p = build_ccp_subproblem(&m, &s, s.lambda, &x).unwrap();
                assert!(qcqp::check_feasible(&p, &x).unwrap() < 0.0);
                assert_eq!(x, initial_point(&m, &s, s.lambda, 7).unwrap());
                assert!(m.a_hat().dot(&x.rows(0, 4)).abs() > 0.0);
            }
        }
    }

    #[test]
    fn eve_constraint_tangent_at_linearization_point() {
        let system = SystemModel::reference();
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        let (b, e) = placement(5);
        let m = tilde_model(&system, &s, &channels(&system, b, e), true).unwrap();
        let x = initial_point(&m, &s, s.lambda, 1).unwrap();
        let p = build_ccp_subproblem(&m, &s, s.lambda, &x).unwrap();
        // nonlinear constraint: v'Av/lambda - w'Bw - rho (1 - (b'w)^2) <= 0
        let (v, w) = m.split(&x);
        let a = &m.a_e / m.d_b;
        let bm = &m.b_e / m.d_b;
        let rho = m.d_e / m.d_b;
        let nonlinear = v.dot(&(&a * &v)) / s.lambda - w.dot(&(&bm * &w)) - rho * (1.0 - m.b_hat().dot(&w).powi(2));
        assert_relative_eq!(p.constraints[0].value(&x), nonlinear, max_relative = 1e-10, epsilon = 1e-14);
    }

    #[test]
    fn subproblem_matrices_are_psd() {
        let system = SystemModel::reference();
        for seed in 0..10 {
            let s = spec(Branch::Two, EveCsi::Unknown, 0.0);
            let (b, e) = placement(seed);
            let m = tilde_model(&system, &s, &channels(&system, b, e), true).unwrap();
            let x = initial_point(&m, &s, s.lambda, seed).unwrap();
            let p = build_ccp_subproblem(&m, &s, s.lambda, &x).unwrap();
            for c in &p.constraints {
                let eig = c.a.clone().symmetric_eigenvalues().min();
                assert!(eig >= -1e-10 * c.a.trace().abs().max(1.0));
            }
        }
    }

    fn check_design(d: &Design, s: &DesignSpec) {
        d.pair.check_caps(&s.power_caps).unwrap();
        assert!(d.tilde_eve_metric <= s.lambda * (1.0 + 1e-6), "{} > {}", d.tilde_eve_metric, s.lambda);
        assert_relative_eq!(d.tilde_sinr_b, d.objective, max_relative = 1e-6);
        for w in d.trace.objectives.windows(2) {
            assert!(w[1] >= w[0] * (1.0 - 1e-8), "{:?} {:?}", d.trace.objectives, d.trace.statuses);
        }
    }

    #[test]
    fn ccp_designs_satisfy_constraints() {
        let system = SystemModel::reference();
        let settings = CcpSettings::default();
        for seed in 0..6 {
            for csi in [EveCsi::Known, EveCsi::Unknown] {
                for branch in [Branch::One, Branch::Two] {
                    let s = spec(branch, csi, 0.0);
                    let (b, e) = placement(seed);
                    let ch = channels(&system, b, e);
                    let d = ccp_solve(&system, &s, &ch, &settings).unwrap();
                    check_design(&d, &s);
                    let d0 = no_an_design(&system, &s, &ch, &settings).unwrap();
                    check_design(&d0, &s);
                    assert!(d0.pair.w.iter().all(|x| *x == 0.0));
                    assert_eq!(d, ccp_solve(&system, &s, &ch, &settings).unwrap());
                }
            }
        }
    }

    #[test]
    fn large_lambda_matches_an_free_optimum() {
        let system = SystemModel::reference();
        let mut s = spec(Branch::One, EveCsi::Known, 0.0);
        s.lambda = 1e12;
        let (b, e) = placement(11);
        let ch = channels(&system, b, e);
        let d = ccp_solve(&system, &s, &ch, &CcpSettings::default()).unwrap();
        assert!(d.pair.w.norm() < 1e-3 * d.pair.v.norm());

        // with w = 0 the cap-limited optimum puts full power on every luminaire
        // with the sign of its effective gain
        let m = &d.model;
        let best = m.a_b.iter().map(|a| a.abs() * 0.25).sum::<f64>().powi(2) / m.d_b;
        assert_relative_eq!(d.tilde_sinr_b, best, max_relative = 1e-2);

        // random feasible search never beats it
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20_000 {
            let v = DVector::from_fn(4, |_, _| rng.random_range(-0.25..0.25));
            let val = m.a_b.dot(&v).powi(2) / m.d_b;
            assert!(val <= best * (1.0 + 1e-12));
        }
    }

    #[test]
    fn binding_cap_is_met_with_equality() {
        let system = SystemModel::reference();
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        let mut free = s.clone();
        free.lambda = 1e12;
        let mut binding = 0;
        for seed in 0..8 {
            let (b, e) = placement(seed);
            let ch = channels(&system, b, e);
            let unconstrained = ccp_solve(&system, &free, &ch, &CcpSettings::default()).unwrap();
            if unconstrained.tilde_eve_metric <= s.lambda {
                continue;
            }
            binding += 1;
            let d = ccp_solve(&system, &s, &ch, &CcpSettings::default()).unwrap();
            assert_relative_eq!(d.tilde_eve_metric, s.lambda, max_relative = 1e-4);
        }
        assert!(binding >= 4);
    }

    #[test]
    fn two_branch_without_an_group_power_matches_one_branch() {
        let system = SystemModel::reference();
        let one = spec(Branch::One, EveCsi::Known, 0.0);
        // every one-branch chip becomes a data chip; the idle AN chip only adds
        // bias shot noise
        let mut two = spec(Branch::Two, EveCsi::Known, 0.0);
        two.cfg = LuminaireConfig::new(25, 1, 0.44).unwrap();
        for seed in 0..4 {
            let (b, e) = placement(seed);
            let ch = channels(&system, b, e);
            let d1 = no_an_design(&system, &one, &ch, &CcpSettings::default()).unwrap();
            let d2 = no_an_design(&system, &two, &ch, &CcpSettings::default()).unwrap();
            assert_relative_eq!(d2.tilde_sinr_b, d1.tilde_sinr_b, max_relative = 1e-4);
        }
    }

    #[test]
    fn unclipped_no_an_actual_equals_tilde() {
        let system = SystemModel::reference();
        let mut s = spec(Branch::One, EveCsi::Known, 0.0);
        s.levels = ClipLevels::unclipped(0.5);
        let (b, e) = placement(4);
        let ch = channels(&system, b, e);
        let d = no_an_design(&system, &s, &ch, &CcpSettings::default()).unwrap();
        let r = evaluate_design(&system, &s, &ch, &d, &EveAveraging::default()).unwrap();
        assert_relative_eq!(r.sinr_b, r.tilde_sinr_b, max_relative = 1e-12);
    }

    #[test]
    fn evaluation_rejects_cap_violation() {
        let system = SystemModel::reference();
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        let (b, e) = placement(4);
        let ch = channels(&system, b, e);
        let mut d = ccp_solve(&system, &s, &ch, &CcpSettings::default()).unwrap();
        d.pair.v[0] = 1.0;
        assert!(matches!(
            evaluate_design(&system, &s, &ch, &d, &EveAveraging::default()),
            Err(Error::PowerCap { index: 0, .. })
        ));
    }

    #[test]
    fn bob_outside_every_cone_gives_zero_design() {
        let mut system = SystemModel::reference();
        system.optics.fov_deg = 20.0;
        let s = spec(Branch::One, EveCsi::Known, 0.0);
        let ch = channels(&system, Point::new(2.5, 2.5, 0.5), Point::new(0.0, 0.0, 0.5));
        let d = ccp_solve(&system, &s, &ch, &CcpSettings::default()).unwrap();
        assert_eq!(d.pair, PrecoderPair::zeros(4));
        let r = evaluate_design(&system, &s, &ch, &d, &EveAveraging::default()).unwrap();
        assert_eq!(r.secrecy.clamped, 0.0);
    }
}
