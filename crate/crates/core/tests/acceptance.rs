//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status if
//! any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use vlc_an_core::clipping::{clipping_stats, empirical_clipping_stats, ClipLevels};
use vlc_an_core::designer::{ccp_solve, Branch, CcpSettings, Channels, DesignSpec, EveCsi, PrecoderPair};
use vlc_an_core::link::{avg_eve_noise_variance, lambda_e, normalized_noise_variance, BranchStats};
use vlc_an_core::montecarlo::{
    mix_seed, placement_positions, run_placements, sample_position, Scheme, SweepConfig, SweepRecord, SweepVariable,
};
use vlc_an_core::qcqp::{solve, QuadConstraint, SolveStatus, Tolerances};
use vlc_an_core::summation::KahanSum;
use vlc_an_core::{Point, QcqpProblem, SystemModel};

struct Outcome {
    pass: bool,
    detail: String,
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let t = Instant::now();
    let mut o = f();
    let el = t.elapsed();
    o.detail = format!("{} [{:.1} s]", o.detail, el.as_secs_f64());
    if let Some(limit) = limit {
        if el > limit {
            o.pass = false;
            o.detail = format!("{} exceeds {:.0} s budget", o.detail, limit.as_secs_f64());
        }
    }
    o
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn bussgang() -> Outcome {
    let levels = ClipLevels::unit_range(0.5);
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, sigma) in [0.05, 0.1, 0.25, 0.5].into_iter().enumerate() {
        let a = clipping_stats(sigma, &levels).unwrap();
        let e = empirical_clipping_stats(sigma, &levels, 1_000_000, 100 + i as u64).unwrap().stats;
        let er = rel(e.attenuation, a.attenuation);
        let es = rel(e.sigma_clip, a.sigma_clip);
        let em = (e.mean_current - a.mean_current).abs();
        let ok = er <= 0.01 && es <= 0.01 && em <= 1e-3;
        pass &= ok;
        parts.push(format!(
            "sigma={sigma}: dR={er:.1e} dsclip={es:.1e} (analytic {:.3e}, empirical {:.3e}) dmean={em:.1e}{}",
            a.sigma_clip,
            e.sigma_clip,
            if ok { "" } else { " FAIL" }
        ));
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn fig4_shape() -> Outcome {
    let sig: Vec<f64> = (0..=115).map(|k| 0.05 + 0.01 * k as f64).collect();
    let stats: Vec<_> = sig
        .iter()
        .map(|s| clipping_stats(*s, &ClipLevels::unit_range(2.0 * s)).unwrap())
        .collect();
    let monotone = stats.windows(2).all(|w| w[1].attenuation <= w[0].attenuation);
    let var: Vec<f64> = stats.iter().map(|s| s.sigma_clip * s.sigma_clip).collect();
    let (imax, _) = var
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |acc, (i, v)| if *v > acc.1 { (i, *v) } else { acc });
    let unimodal = var[..=imax].windows(2).all(|w| w[1] >= w[0]) && var[imax..].windows(2).all(|w| w[1] <= w[0]);
    let arg = sig[imax];
    Outcome {
        pass: monotone && unimodal && (0.8..=1.0).contains(&arg),
        detail: format!("R monotone={monotone}, clip variance unimodal={unimodal}, argmax sigma={arg:.2} A"),
    }
}

fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &l * l.transpose() + DMatrix::identity(n, n) * 0.1
}

fn qcqp_random() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst_err: f64 = 0.0;
    let mut worst_kkt: f64 = 0.0;
    let mut bad = 0;
    for _ in 0..100 {
        let n = rng.random_range(2..=10);
        let a = random_spd(n, &mut rng);
        let x0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let c = DVector::from_fn(n, |_, _| rng.random_range(-2.0..2.0));
        // (x - x0)' A (x - x0) <= 1
        let ax0 = &a * &x0;
        let ell = QuadConstraint::new(a.clone(), &ax0 * -2.0, 1.0 - x0.dot(&ax0));
        // a ball containing the ellipsoid, inactive at the optimum
        let lmin = a.clone().symmetric_eigenvalues().min();
        let r2 = 4.0 / lmin;
        let ball = QuadConstraint::new(DMatrix::identity(n, n), &x0 * -2.0, r2 - x0.dot(&x0));
        let p = QcqpProblem::new(c.clone(), vec![ell, ball]).unwrap();
        let exact = c.dot(&x0) + c.dot(&a.clone().cholesky().unwrap().solve(&c)).sqrt();
        let s = solve(&p, &x0, &Tolerances::default()).unwrap();
        let err = (s.objective_value - exact).abs() / exact.abs().max(1.0);
        worst_err = worst_err.max(err);
        worst_kkt = worst_kkt.max(s.kkt_residual);
        if err > 1e-6 || s.kkt_residual > 1e-6 || s.status != SolveStatus::Optimal {
            bad += 1;
        }
    }
    Outcome {
        pass: bad == 0,
        detail: format!("100 problems, worst relative error {worst_err:.1e}, worst KKT {worst_kkt:.1e}, failures {bad}"),
    }
}

struct CcpRun {
    converged: bool,
    iterations: usize,
    eve_ratio: f64,
    power_ratio: f64,
}

fn ccp_runs(system: &SystemModel) -> Vec<Result<CcpRun, String>> {
    let mut cfg = SweepConfig::new(SweepVariable::SigmaP, vec![0.25]);
    cfg.seed = 4;
    let mut jobs = Vec::new();
    for csi in [EveCsi::Known, EveCsi::Unknown] {
        for lambda_db in [0.0, -5.0] {
            for i in 0..100 {
                jobs.push((csi, lambda_db, i));
            }
        }
    }
    system.eve_stats().unwrap();
    jobs.into_par_iter()
        .map(|(csi, lambda_db, i)| {
            let spec = DesignSpec::reference(Branch::One, csi, 0.25, lambda_db, 4).map_err(|e| e.to_string())?;
            let (b, e) = placement_positions(system, &cfg, i);
            let ch = Channels {
                bob: system.channel(&b).unwrap(),
                eve: Some(system.channel(&e).unwrap()),
            };
            let settings = CcpSettings {
                init_seed: mix_seed(1, i as u64),
                ..CcpSettings::default()
            };
            let d = ccp_solve(system, &spec, &ch, &settings).map_err(|e| e.to_string())?;
            let power_ratio = d
                .pair
                .powers()
                .iter()
                .zip(spec.power_caps.iter())
                .map(|(p, c)| p / c)
                .fold(0.0, f64::max);
            Ok(CcpRun {
                converged: d.trace.converged,
                iterations: d.trace.iterations(),
                eve_ratio: d.tilde_eve_metric / spec.lambda,
                power_ratio,
            })
        })
        .collect()
}

fn ccp_convergence(runs: &[Result<CcpRun, String>]) -> Outcome {
    let ok: Vec<&CcpRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let conv = ok.iter().filter(|r| r.converged).count();
    let mut its: Vec<usize> = ok.iter().map(|r| r.iterations).collect();
    its.sort_unstable();
    let median = if its.is_empty() { usize::MAX } else { its[its.len() / 2] };
    let frac = conv as f64 / runs.len() as f64;
    Outcome {
        pass: frac >= 0.95 && median <= 4,
        detail: format!(
            "{} runs (one branch, known/unknown CSI, lambda 0/-5 dB): converged {:.1}%, median iterations {median}, solver errors {}",
            runs.len(),
            100.0 * frac,
            runs.len() - ok.len()
        ),
    }
}

fn constraint_satisfaction(runs: &[Result<CcpRun, String>]) -> Outcome {
    let ok: Vec<&CcpRun> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let eve_viol = ok.iter().filter(|r| r.eve_ratio > 1.0 + 1e-6).count();
    let pow_viol = ok.iter().filter(|r| r.power_ratio > 1.0 + 1e-6).count();
    let worst_eve = ok.iter().map(|r| r.eve_ratio).fold(0.0, f64::max);
    let worst_pow = ok.iter().map(|r| r.power_ratio).fold(0.0, f64::max);
    Outcome {
        pass: eve_viol == 0 && pow_viol == 0 && ok.len() == runs.len(),
        detail: format!(
            "Eve-cap violations {eve_viol} (max ratio {worst_eve:.8}), power violations {pow_viol} (max ratio {worst_pow:.8}), unsolved {}",
            runs.len() - ok.len()
        ),
    }
}

fn records(system: &SystemModel, cfg: &SweepConfig, value: f64) -> Vec<SweepRecord> {
    cfg.schemes
        .iter()
        .map(|&s| {
            let outs = run_placements(system, cfg, value, s);
            SweepRecord::aggregate(cfg.variable, value, s, cfg.base.csi, &outs)
        })
        .collect()
}

fn paired_cfg(csi: EveCsi, placements: usize) -> SweepConfig {
    let mut cfg = SweepConfig::new(SweepVariable::SigmaP, vec![0.25]);
    cfg.base.csi = csi;
    cfg.placements = placements;
    cfg.eve_realizations = 1000;
    cfg.seed = 8;
    cfg
}

fn an_benefit(system: &SystemModel) -> Outcome {
    let mut cfg = paired_cfg(EveCsi::Known, 200);
    cfg.schemes = vec![Scheme::OneBranchAn, Scheme::OneBranchNoAn];
    let r = records(system, &cfg, 0.25);
    let gain = r[0].secrecy.mean - r[1].secrecy.mean;
    Outcome {
        pass: (0.6..=1.8).contains(&gain),
        detail: format!(
            "secrecy AN {:.3} vs no-AN {:.3} bits/s/Hz, gain {gain:.3} (target 1.2 +/- 0.6); failed solves {}/{}",
            r[0].secrecy.mean,
            r[1].secrecy.mean,
            r[0].failed,
            r[1].failed
        ),
    }
}

fn two_branch_benefit(system: &SystemModel) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for csi in [EveCsi::Known, EveCsi::Unknown] {
        let mut cfg = paired_cfg(csi, 200);
        cfg.schemes = vec![Scheme::OneBranchAn, Scheme::TwoBranchAn];
        let r = records(system, &cfg, 0.25);
        let gain = r[1].secrecy.mean - r[0].secrecy.mean;
        let ok = (0.5..=1.5).contains(&gain);
        pass &= ok;
        parts.push(format!(
            "{} CSI secrecy two {:.3} vs one {:.3}, gain {gain:.3} (target 1.0 +/- 0.5)",
            csi.as_str(),
            r[1].secrecy.mean,
            r[0].secrecy.mean
        ));
        if csi == EveCsi::Known {
            let db = 10.0 * (r[1].sinr_b.mean / r[0].sinr_b.mean).log10();
            let ok = (1.5..=4.5).contains(&db);
            pass &= ok;
            parts.push(format!("Bob SINR advantage {db:.2} dB (target 3 +/- 1.5)"));
        }
    }
    Outcome {
        pass,
        detail: parts.join("; "),
    }
}

fn plateau(system: &SystemModel) -> Outcome {
    let grid = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35];
    let mut cfg = paired_cfg(EveCsi::Known, 200);
    cfg.schemes = vec![Scheme::OneBranchAn];
    let means: Vec<f64> = grid.iter().map(|&s| records(system, &cfg, s)[0].secrecy.mean).collect();
    let low = &means[..4];
    let hi = low.iter().cloned().fold(f64::MIN, f64::max);
    let lo = low.iter().cloned().fold(f64::MAX, f64::min);
    let spread = (hi - lo) / hi;
    let drop = means[6] < means[3];
    Outcome {
        pass: spread < 0.15 && drop,
        detail: format!(
            "secrecy by sigma_P {:?}; spread below 0.2 A {:.1}%, value at 0.35 below 0.2: {drop}",
            means.iter().map(|m| format!("{m:.3}")).collect::<Vec<_>>(),
            100.0 * spread
        ),
    }
}

fn chip_split(system: &SystemModel) -> Outcome {
    let mut cfg = SweepConfig::new(SweepVariable::AnChips, (4..=20).map(f64::from).collect());
    cfg.base.i_dc = Some(0.5);
    cfg.placements = 1;
    cfg.fixed_bob = Some(Point::new(-0.85, -0.25, 0.5));
    cfg.fixed_eve = Some(Point::new(2.25, 1.85, 0.5));
    cfg.schemes = vec![Scheme::TwoBranchAn];
    let vals: Vec<(f64, f64)> = cfg
        .grid
        .iter()
        .map(|&g| (g, records(system, &cfg, g)[0].secrecy.mean))
        .collect();
    let best = vals.iter().cloned().fold((0.0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    Outcome {
        pass: (12.0..=18.0).contains(&best.0),
        detail: format!(
            "argmax n_cz = {} (secrecy {:.3}); curve {:?}",
            best.0,
            best.1,
            vals.iter().map(|(g, s)| format!("{g}:{s:.2}")).collect::<Vec<_>>()
        ),
    }
}

fn r_insensitivity(system: &SystemModel) -> Outcome {
    let grid = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
    let mut cfg = paired_cfg(EveCsi::Known, 100);
    cfg.variable = SweepVariable::R;
    cfg.schemes = vec![Scheme::TwoBranchAn];
    let recs: Vec<SweepRecord> = grid.iter().map(|&r| records(system, &cfg, r).remove(0)).collect();
    let actual: Vec<f64> = recs.iter().map(|r| r.sinr_b.mean).collect();
    let tilde: Vec<f64> = recs.iter().map(|r| r.tilde_sinr_b.mean).collect();
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let spread = (actual.iter().cloned().fold(f64::MIN, f64::max) - actual.iter().cloned().fold(f64::MAX, f64::min)) / mean;
    let arg = grid[tilde
        .iter()
        .enumerate()
        .fold((0, f64::MIN), |a, (i, v)| if *v > a.1 { (i, *v) } else { a })
        .0];
    Outcome {
        pass: spread < 0.10 && arg == 0.5,
        detail: format!(
            "actual Bob SINR spread {:.1}% of mean; tilde Bob SINR argmax r={arg}; actual {:?}; tilde {:?}",
            100.0 * spread,
            actual.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>(),
            tilde.iter().map(|x| format!("{x:.1}")).collect::<Vec<_>>()
        ),
    }
}

fn lambda_e_oracle(system: &SystemModel) -> Outcome {
    let es = system.eve_stats().unwrap();
    let levels = ClipLevels::unit_range(0.5);
    let conv = 0.44;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let v = DVector::from_fn(4, |_, _| rng.random_range(-0.2..0.2));
        let w = DVector::from_fn(4, |_, _| rng.random_range(-0.15..0.15));
        let pair = PrecoderPair { v, w };
        let stats = BranchStats::One {
            stats: (0..4)
                .map(|n| clipping_stats(pair.v[n].hypot(pair.w[n]), &levels).unwrap())
                .collect(),
            chips: 24,
        };
        let emitted = stats.emitted_power(conv);
        let s2 = avg_eve_noise_variance(&es.mean_gain, &emitted, &system.noise, &system.optics, conv).unwrap();
        let analytic = lambda_e(&es.correlation, &pair.v, &pair.w, &stats, s2).unwrap();

        let (n_i, r_i) = stats.info_path();
        let (n_a, r_a) = stats.an_path();
        let groups = stats.clip_groups();
        let mut draw = ChaCha8Rng::seed_from_u64(1000 + k);
        let mut num = KahanSum::new();
        let mut den = KahanSum::new();
        for _ in 0..5000 {
            let p = sample_position(&system.layout, &mut draw);
            let h = system.channel(&p).unwrap();
            let g = h.gains();
            num.add((n_i * g.component_mul(&r_i).dot(&pair.v)).powi(2));
            let clip: f64 = groups.iter().map(|(c, s)| (c * g.dot(s)).powi(2)).sum();
            let noise = normalized_noise_variance(g.dot(&emitted), &system.noise, &system.optics, conv);
            den.add((n_a * g.component_mul(&r_a).dot(&pair.w)).powi(2) + clip + noise);
        }
        worst = worst.max(rel(analytic, num.value() / den.value()));
    }
    Outcome {
        pass: worst <= 0.02,
        detail: format!("20 pairs, worst relative deviation {:.2}%", 100.0 * worst),
    }
}

fn main() -> ExitCode {
    let system = SystemModel::reference();
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let mut report = |n: usize, o: Outcome| {
        println!("criterion {n:>2}: {} | {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, o));
    };

    report(1, timed(Some(Duration::from_secs(10)), bussgang));
    report(2, timed(Some(Duration::from_secs(5)), fig4_shape));
    report(3, timed(Some(Duration::from_secs(30)), qcqp_random));
    let t = Instant::now();
    let runs = ccp_runs(&system);
    let solve_time = t.elapsed();
    let mut c4 = ccp_convergence(&runs);
    c4.detail = format!("{} [{:.1} s]", c4.detail, solve_time.as_secs_f64());
    if solve_time > Duration::from_secs(300) {
        c4.pass = false;
    }
    report(4, c4);
    report(5, constraint_satisfaction(&runs));
    report(6, timed(None, || an_benefit(&system)));
    report(7, timed(None, || two_branch_benefit(&system)));
    report(8, timed(None, || plateau(&system)));
    report(9, timed(None, || chip_split(&system)));
    report(10, timed(None, || r_insensitivity(&system)));
    report(11, timed(None, || lambda_e_oracle(&system)));

    let failed: Vec<usize> = results.iter().filter(|(_, o)| !o.pass).map(|(n, _)| *n).collect();
    println!(
        "acceptance: {} of {} criteria passed{}",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {failed:?}")
        }
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
