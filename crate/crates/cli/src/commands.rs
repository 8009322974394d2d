//! Subcommand bodies. Each one fills tables, hands them to [`Outputs`] and
//! returns a [`Summary`].

use anyhow::{bail, Context};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vlc_an_core::clipping::{clipping_stats, empirical_clipping_stats};
use vlc_an_core::designer::{ccp_solve, evaluate_design};
use vlc_an_core::link::{avg_eve_noise_variance, lambda_e, normalized_noise_variance, BranchStats};
use vlc_an_core::montecarlo::{mix_seed, placement_positions, run_sweep, sample_position};
use vlc_an_core::qcqp::{solve, QuadConstraint, SolveStatus, Tolerances};
use vlc_an_core::summation::MeanStderr;
use vlc_an_core::{
    Branch, Channels, ClipLevels, EveAveraging, EveCsi, Point, PrecoderPair, QcqpProblem, SweepConfig,
    SweepVariable,
};

use crate::config::Config;
use crate::output::{Cell, Outputs, Table};
use crate::{BranchArg, CsiArg, Summary};

pub fn channel(cfg: &Config, points: &[Point], out: &mut Outputs) -> anyhow::Result<Summary> {
    let system = cfg.system()?;
    let stats = system.eve_stats()?;
    let n = system.num_luminaires();

    let mut corr = Table::new(["row", "col", "correlation"]);
    for i in 0..n {
        for j in 0..n {
            corr.push(vec![i.into(), j.into(), stats.correlation[(i, j)].into()]);
        }
    }
    let mut mean = Table::new(["luminaire", "x", "y", "z", "mean_gain"]);
    for (i, p) in system.layout.luminaires().iter().enumerate() {
        mean.push(vec![i.into(), p.x.into(), p.y.into(), p.z.into(), stats.mean_gain[i].into()]);
    }

    let centre = [Point::new(0.0, 0.0, system.layout.receiver_height())];
    let points = if points.is_empty() { &centre[..] } else { points };
    let mut gains = Table::new(["point", "x", "y", "z", "luminaire", "gain"]);
    for (k, p) in points.iter().enumerate() {
        let h = system.channel(p).with_context(|| format!("point {k} at {p}"))?;
        for (i, g) in h.gains().iter().enumerate() {
            gains.push(vec![k.into(), p.x.into(), p.y.into(), p.z.into(), i.into(), (*g).into()]);
        }
    }
    out.csv("eve_correlation.csv", &corr)?;
    out.csv("eve_mean_gain.csv", &mean)?;
    out.csv("gains.csv", &gains)?;
    Ok(Summary {
        failed: false,
        lines: vec![format!("{n} luminaires, {} points", points.len())],
    })
}

pub fn clipping(cfg: &Config, sigma_min: f64, sigma_max: f64, step: f64, out: &mut Outputs) -> anyhow::Result<Summary> {
    if !(sigma_min > 0.0 && sigma_max >= sigma_min && step > 0.0) {
        bail!("need 0 < sigma_min <= sigma_max and step > 0");
    }
    let count = ((sigma_max - sigma_min) / step + 1e-9).floor() as usize + 1;
    let mut t = Table::new(["sigma", "i_dc", "attenuation", "sigma_clip", "clip_variance", "mean_current"]);
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for k in 0..count {
        let sigma = sigma_min + k as f64 * step;
        let levels = ClipLevels::new(cfg.led.i_min, cfg.led.i_max, 2.0 * sigma)?;
        let s = clipping_stats(sigma, &levels)?;
        let var = s.sigma_clip * s.sigma_clip;
        if var > best.1 {
            best = (sigma, var);
        }
        t.push(vec![
            sigma.into(),
            levels.i_dc.into(),
            s.attenuation.into(),
            s.sigma_clip.into(),
            var.into(),
            s.mean_current.into(),
        ]);
    }
    out.csv("clipping.csv", &t)?;
    Ok(Summary {
        failed: false,
        lines: vec![format!("clipping variance peaks at sigma = {:.2} A", best.0)],
    })
}

const DESIGN_HEADER: [&str; 20] = [
    "branch",
    "csi",
    "bob_x",
    "bob_y",
    "bob_z",
    "eve_x",
    "eve_y",
    "eve_z",
    "sinr_b",
    "eve_metric",
    "eve_metric_kind",
    "lambda_e",
    "secrecy",
    "secrecy_raw",
    "tilde_sinr_b",
    "tilde_eve_metric",
    "tilde_secrecy",
    "tilde_secrecy_raw",
    "iterations",
    "converged",
];

pub fn design(
    cfg: &Config,
    fixed_bob: Option<Point>,
    fixed_eve: Option<Point>,
    branch: Option<BranchArg>,
    csi: Option<CsiArg>,
    out: &mut Outputs,
) -> anyhow::Result<Summary> {
    let system = cfg.system()?;
    let n = system.num_luminaires();
    let seed = cfg.simulation.seed;
    let mut pos = SweepConfig::new(SweepVariable::SigmaP, vec![cfg.design.sigma_p]);
    pos.seed = seed;
    pos.fixed_bob = fixed_bob;
    pos.fixed_eve = fixed_eve;
    let (bob, eve) = placement_positions(&system, &pos, 0);
    let channels = Channels {
        bob: system.channel(&bob).context("Bob position")?,
        eve: Some(system.channel(&eve).context("Eve position")?),
    };
    let settings = vlc_an_core::CcpSettings {
        init_seed: mix_seed(cfg.ccp().init_seed, 0),
        ..cfg.ccp()
    };
    let averaging = EveAveraging {
        realizations: cfg.simulation.eve_realizations,
        seed: mix_seed(seed ^ 0x5EED_E7E0, 0),
    };

    let branches: Vec<Branch> = match branch {
        Some(b) => vec![b.branch()],
        None => vec![Branch::One, Branch::Two],
    };
    let csis: Vec<EveCsi> = match csi {
        Some(c) => vec![c.csi()],
        None => vec![EveCsi::Known, EveCsi::Unknown],
    };
    let mut header: Vec<String> = DESIGN_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..n).map(|k| format!("v_{k}")));
    header.extend((0..n).map(|k| format!("w_{k}")));
    header.push("status".into());
    let mut t = Table::new(header);
    let mut failures = 0;
    let mut lines = Vec::new();
    for &b in &branches {
        for &c in &csis {
            let spec = cfg.design_spec(b, c)?;
            let mut row: Vec<Cell> = vec![
                b.as_str().into(),
                c.as_str().into(),
                bob.x.into(),
                bob.y.into(),
                bob.z.into(),
                eve.x.into(),
                eve.y.into(),
                eve.z.into(),
            ];
            let result = ccp_solve(&system, &spec, &channels, &settings)
                .and_then(|d| evaluate_design(&system, &spec, &channels, &d, &averaging).map(|r| (d, r)));
            match result {
                Ok((d, r)) => {
                    row.extend([
                        r.sinr_b.into(),
                        r.eve_metric.into(),
                        r.eve_kind.as_str().into(),
                        r.lambda_e.unwrap_or(f64::NAN).into(),
                        r.secrecy.clamped.into(),
                        r.secrecy.raw.into(),
                        r.tilde_sinr_b.into(),
                        r.tilde_eve_metric.into(),
                        r.tilde_secrecy.clamped.into(),
                        r.tilde_secrecy.raw.into(),
                        d.trace.iterations().into(),
                        d.trace.converged.into(),
                    ]);
                    row.extend(d.pair.v.iter().map(|x| Cell::from(*x)));
                    row.extend(d.pair.w.iter().map(|x| Cell::from(*x)));
                    row.push("ok".into());
                    lines.push(format!(
                        "{}-branch, {} CSI: secrecy {:.3} bits/s/Hz",
                        b.as_str(),
                        c.as_str(),
                        r.secrecy.clamped
                    ));
                }
                Err(e) => {
                    failures += 1;
                    row.extend((0..2).map(|_| Cell::from(f64::NAN)));
                    row.push("".into());
                    row.extend((0..7).map(|_| Cell::from(f64::NAN)));
                    row.extend([Cell::from(0usize), Cell::from(false)]);
                    row.extend((0..2 * n).map(|_| Cell::from(f64::NAN)));
                    row.push(e.to_string().into());
                    lines.push(format!("{}-branch, {} CSI: failed: {e}", b.as_str(), c.as_str()));
                }
            }
            t.push(row);
        }
    }
    let total = t.rows.len();
    out.csv("design.csv", &t)?;
    Ok(Summary {
        failed: failures as f64 > cfg.simulation.max_failure_fraction * total as f64,
        lines,
    })
}

const SWEEP_STATS: [&str; 10] = [
    "sinr_b",
    "eve_metric",
    "lambda_e",
    "secrecy",
    "secrecy_raw",
    "tilde_sinr_b",
    "tilde_eve_metric",
    "tilde_secrecy",
    "tilde_secrecy_raw",
    "iterations",
];

pub fn sweep(cfg: &Config, out: &mut Outputs) -> anyhow::Result<Summary> {
    let system = cfg.system()?;
    let sc = cfg.sweep_config()?;
    let records = run_sweep(&system, &sc)?;
    let mut header: Vec<String> = ["variable", "value", "scheme", "csi", "succeeded", "failed", "converged_fraction"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for s in SWEEP_STATS {
        header.push(format!("{s}_mean"));
        header.push(format!("{s}_stderr"));
    }
    let mut t = Table::new(header);
    let mut failed = false;
    let mut lines = Vec::new();
    for r in &records {
        let mut row: Vec<Cell> = vec![
            r.variable.as_str().into(),
            r.value.into(),
            r.scheme.as_str().into(),
            r.csi.as_str().into(),
            r.succeeded.into(),
            r.failed.into(),
            r.converged_fraction.into(),
        ];
        let stats: [&MeanStderr; 10] = [
            &r.sinr_b,
            &r.eve_metric,
            &r.lambda_e,
            &r.secrecy,
            &r.secrecy_raw,
            &r.tilde_sinr_b,
            &r.tilde_eve_metric,
            &r.tilde_secrecy,
            &r.tilde_secrecy_raw,
            &r.iterations,
        ];
        for s in stats {
            row.push(s.mean.into());
            row.push(s.stderr.into());
        }
        t.push(row);
        let total = r.succeeded + r.failed;
        if r.failed as f64 > cfg.simulation.max_failure_fraction * total as f64 {
            failed = true;
            lines.push(format!(
                "{} = {} {}: {} of {} placements failed",
                r.variable.as_str(),
                r.value,
                r.scheme.as_str(),
                r.failed,
                total
            ));
        }
    }
    out.csv("sweep.csv", &t)?;
    lines.push(format!("{} records", records.len()));
    Ok(Summary { failed, lines })
}

struct Check {
    suite: &'static str,
    case: String,
    quantity: &'static str,
    analytic: f64,
    empirical: f64,
    deviation: f64,
    tolerance: f64,
}

impl Check {
    fn pass(&self) -> bool {
        self.deviation <= self.tolerance
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn bussgang_checks(cfg: &Config, checks: &mut Vec<Check>) -> anyhow::Result<()> {
    let half = 0.5 * (cfg.led.i_max - cfg.led.i_min);
    let levels = ClipLevels::new(cfg.led.i_min, cfg.led.i_max, cfg.led.i_min + half)?;
    for (k, f) in [0.5, 0.7, 1.0].into_iter().enumerate() {
        let sigma = f * half;
        let a = clipping_stats(sigma, &levels)?;
        let e = empirical_clipping_stats(sigma, &levels, 1_000_000, mix_seed(cfg.simulation.seed, k as u64))?.stats;
        let case = format!("sigma={sigma}");
        checks.push(Check {
            suite: "bussgang",
            case: case.clone(),
            quantity: "attenuation",
            analytic: a.attenuation,
            empirical: e.attenuation,
            deviation: rel(e.attenuation, a.attenuation),
            tolerance: 0.02,
        });
        checks.push(Check {
            suite: "bussgang",
            case: case.clone(),
            quantity: "sigma_clip",
            analytic: a.sigma_clip,
            empirical: e.sigma_clip,
            deviation: rel(e.sigma_clip, a.sigma_clip),
            tolerance: 0.02,
        });
        checks.push(Check {
            suite: "bussgang",
            case,
            quantity: "mean_current",
            analytic: a.mean_current,
            empirical: e.mean_current,
            deviation: (e.mean_current - a.mean_current).abs(),
            tolerance: 1e-3 * (cfg.led.i_max - cfg.led.i_min),
        });
    }
    Ok(())
}

// ratio of sample means with a delta-method standard error; tolerance is
// four standard errors
fn lambda_e_checks(cfg: &Config, checks: &mut Vec<Check>) -> anyhow::Result<()> {
    let system = cfg.system()?;
    let es = system.eve_stats()?;
    let n = system.num_luminaires();
    let levels = cfg.levels()?;
    let conv = cfg.led.conversion;
    let cap = cfg.design.sigma_p;
    let draws = 20_000;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.simulation.seed, 101));
    for k in 0..5u64 {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-0.7..0.7) * cap);
        let w = DVector::from_fn(n, |_, _| rng.random_range(-0.7..0.7) * cap);
        let pair = PrecoderPair { v, w };
        let stats = BranchStats::One {
            stats: (0..n)
                .map(|i| clipping_stats(pair.v[i].hypot(pair.w[i]), &levels))
                .collect::<Result<_, _>>()?,
            chips: cfg.led.chips,
        };
        let emitted = stats.emitted_power(conv);
        let s2 = avg_eve_noise_variance(&es.mean_gain, &emitted, &system.noise, &system.optics, conv)?;
        let analytic = lambda_e(&es.correlation, &pair.v, &pair.w, &stats, s2)?;

        let (n_i, r_i) = stats.info_path();
        let (n_a, r_a) = stats.an_path();
        let groups = stats.clip_groups();
        let mut draw = ChaCha8Rng::seed_from_u64(mix_seed(cfg.simulation.seed, 200 + k));
        let mut num = Vec::with_capacity(draws);
        let mut den = Vec::with_capacity(draws);
        for _ in 0..draws {
            let p = sample_position(&system.layout, &mut draw);
            let g = system.channel(&p)?.gains().clone();
            num.push((n_i * g.component_mul(&r_i).dot(&pair.v)).powi(2));
            let clip: f64 = groups.iter().map(|(c, s)| (c * g.dot(s)).powi(2)).sum();
            let noise = normalized_noise_variance(g.dot(&emitted), &system.noise, &system.optics, conv);
            den.push((n_a * g.component_mul(&r_a).dot(&pair.w)).powi(2) + clip + noise);
        }
        let mn = MeanStderr::from_slice(&num).mean;
        let md = MeanStderr::from_slice(&den).mean;
        let ratio = mn / md;
        let resid: Vec<f64> = num.iter().zip(&den).map(|(a, b)| a - ratio * b).collect();
        let se = MeanStderr::from_slice(&resid).stderr / md;
        checks.push(Check {
            suite: "lambda_e",
            case: format!("pair {k}"),
            quantity: "lambda_e",
            analytic,
            empirical: ratio,
            deviation: rel(ratio, analytic),
            tolerance: 4.0 * se / analytic,
        });
    }
    Ok(())
}

// maximize c'x on (x - x0)' A (x - x0) <= 1: optimum c'x0 + sqrt(c' A^-1 c)
fn qcqp_checks(cfg: &Config, checks: &mut Vec<Check>) -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.simulation.seed, 303));
    for k in 0..20 {
        let n = rng.random_range(2..=8);
        let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        let ax0 = &a * &x0;
        let con = QuadConstraint::new(a.clone(), &ax0 * -2.0, 1.0 - x0.dot(&ax0));
        let p = QcqpProblem::new(c.clone(), vec![con])?;
        let chol = a.clone().cholesky().context("random SPD matrix")?;
        let exact = c.dot(&x0) + c.dot(&chol.solve(&c)).sqrt();
        let s = solve(&p, &x0, &Tolerances::default())?;
        let deviation = if s.status == SolveStatus::Optimal {
            (s.objective_value - exact).abs() / exact.abs().max(1.0)
        } else {
            f64::INFINITY
        };
        checks.push(Check {
            suite: "qcqp",
            case: format!("problem {k} (n={n})"),
            quantity: "objective",
            analytic: exact,
            empirical: s.objective_value,
            deviation,
            tolerance: 1e-6,
        });
    }
    Ok(())
}

pub fn validate(cfg: &Config, out: &mut Outputs) -> anyhow::Result<Summary> {
    let mut checks = Vec::new();
    bussgang_checks(cfg, &mut checks)?;
    lambda_e_checks(cfg, &mut checks)?;
    qcqp_checks(cfg, &mut checks)?;
    let mut t = Table::new([
        "suite",
        "case",
        "quantity",
        "analytic",
        "empirical",
        "deviation",
        "tolerance",
        "pass",
    ]);
    let mut lines = Vec::new();
    for c in &checks {
        t.push(vec![
            c.suite.into(),
            c.case.clone().into(),
            c.quantity.into(),
            c.analytic.into(),
            c.empirical.into(),
            c.deviation.into(),
            c.tolerance.into(),
            c.pass().into(),
        ]);
    }
    for suite in ["bussgang", "lambda_e", "qcqp"] {
        let of: Vec<&Check> = checks.iter().filter(|c| c.suite == suite).collect();
        let ok = of.iter().filter(|c| c.pass()).count();
        lines.push(format!("{suite}: {ok}/{} within tolerance", of.len()));
    }
    out.csv("validate.csv", &t)?;
    Ok(Summary {
        failed: checks.iter().any(|c| !c.pass()),
        lines,
    })
}
