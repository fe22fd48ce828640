//! One function per subcommand. Each writes its CSV tables and returns the
//! command-specific part of the summary.

use serde::Serialize;
use serde_json::{json, Value};
use walklab_core::birkhoff::{dyadic_checkpoints, geometric_checkpoints, ocean_event_check, ocean_event_scan};
use walklab_core::chains::{chain_sweep, exact_occupation_moments, lemma_bound_check, monte_carlo_moments, SweepSpec, ThreeStateChain};
use walklab_core::lattice_walk::{kernel_derivatives, llt_report, LawPreset, StepLaw};
use walklab_core::moments::{
    exact_mean_t, exact_second_moment, variance_exponent_scan, MomentPlan, PairMoments, DEFAULT_BUDGET,
};
use walklab_core::observables::{beta_fit, make_ocean, make_ocean_multidim, settle_index, BetaFitPlan, Observable};
use walklab_core::rng::keyed_hash;
use walklab_core::statlab::{affine_reduce, growth_exponent, ks_arcsine, run_ensemble, weak_lln_check, Statistic};

use crate::config::{CheckpointSpec, RunConfig, StatName};
use crate::error::CliError;
use crate::output::{join_site, Output};

fn section<'a, T>(s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
    s.as_ref().ok_or_else(|| CliError::Config(format!("missing [{name}] section")))
}

fn checkpoints(spec: &CheckpointSpec) -> Result<Vec<u64>, CliError> {
    Ok(match spec {
        CheckpointSpec::List(v) => v.clone(),
        CheckpointSpec::Geometric { first, last, theta } => geometric_checkpoints(*first, *last, *theta)?,
        CheckpointSpec::Dyadic { k0, k1 } => dyadic_checkpoints(*k0, *k1),
    })
}

#[derive(Serialize)]
struct EnsembleRow {
    trial: u64,
    n: u64,
    t: f64,
    position: String,
}

#[derive(Serialize)]
struct GrowthCsvRow {
    n: u64,
    value: f64,
    stderr: f64,
    residual: f64,
}

#[derive(Serialize)]
struct ReducedRow {
    trial: u64,
    n: u64,
    reduced: f64,
}

pub fn simulate(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sec = section(&cfg.simulate, "simulate")?;
    if sec.trials == 0 {
        return Err(CliError::Config("simulate.trials must be positive".into()));
    }
    let law = cfg.law()?.build()?;
    let f = cfg.observable()?.build()?;
    let cps = checkpoints(&sec.checkpoints)?;
    let ens = run_ensemble(&law, &f, cfg.seed, 0..sec.trials, &cps)?;

    let rows: Vec<EnsembleRow> = ens
        .trials()
        .flat_map(|(trial, recs)| {
            recs.iter().map(move |r| EnsembleRow {
                trial,
                n: r.n,
                t: r.t,
                position: join_site(&r.position),
            })
        })
        .collect();
    out.csv("ensemble.csv", &rows)?;

    let cols = ens.columns();
    let stat = match sec.statistic {
        StatName::Rms => Statistic::Rms,
        StatName::MeanAbs => Statistic::MeanAbs,
        StatName::Quantile => Statistic::Quantile(sec.quantile),
    };
    let mut summary = json!({
        "law": law.name(),
        "observable": f.info(),
        "trials": sec.trials,
        "checkpoints": cps,
    });
    let mut warnings: Vec<String> = f.warnings().to_vec();
    match growth_exponent(&cols, stat) {
        Ok(fit) => {
            let rows: Vec<GrowthCsvRow> = fit
                .rows
                .iter()
                .zip(&fit.residuals)
                .map(|(r, &residual)| GrowthCsvRow {
                    n: r.n,
                    value: r.value,
                    stderr: r.stderr,
                    residual,
                })
                .collect();
            out.csv("growth.csv", &rows)?;
            warnings.extend(fit.warnings.iter().cloned());
            summary["statistic"] = json!(stat);
            summary["slope"] = json!(fit.slope);
            summary["slope_stderr"] = json!(fit.slope_stderr);
            summary["intercept"] = json!(fit.intercept);
            summary["weighted"] = json!(fit.weighted);
            if let Some([lo, hi]) = sec.band {
                summary["band"] = json!([lo, hi]);
                summary["in_band"] = json!(lo <= fit.slope && fit.slope <= hi);
            }
        }
        Err(e) => warnings.push(format!("no growth fit: {e}")),
    }

    if sec.arcsine {
        if f.dim() != 1 {
            return Err(CliError::Config("arcsine comparison needs a one-dimensional observable".into()));
        }
        let n = *cps.last().ok_or_else(|| CliError::Config("no checkpoints".into()))?;
        let reduced = affine_reduce(&f, n, &ens.values_at(n)?)?;
        let ks = ks_arcsine(&reduced)?;
        let rows: Vec<ReducedRow> = ens
            .trials()
            .zip(&reduced)
            .map(|((trial, _), &r)| ReducedRow { trial, n, reduced: r })
            .collect();
        out.csv("arcsine.csv", &rows)?;
        summary["arcsine_n"] = json!(n);
        summary["ks_distance"] = json!(ks);
        summary["ks_max"] = json!(cfg.tolerances.ks_max);
        summary["ks_pass"] = json!(ks < cfg.tolerances.ks_max);
    }

    if let Some(delta) = sec.lln_delta {
        let mean = sec
            .lln_mean
            .or_else(|| f.nominal_mean())
            .ok_or_else(|| CliError::Config("lln_mean required: the observable has no nominal mean".into()))?;
        let rows = weak_lln_check(&cols, mean, delta)?;
        out.csv("lln.csv", &rows)?;
        summary["lln"] = json!({ "mean": mean, "delta": delta, "rows": rows });
    }
    summary["warnings"] = json!(warnings);
    Ok(summary)
}

#[derive(Serialize)]
struct MomentCsvRow {
    n: u64,
    mean: f64,
    second: f64,
    var: f64,
    kernel_mean: f64,
}

/// Every path of `n` steps: its probability and `F(S_1..S_n)`.
fn enumerate_paths(law: &StepLaw, f: &Observable, x0: &[i64], n: u64) -> Vec<(f64, Vec<f64>)> {
    let steps: Vec<(Vec<i64>, f64)> = law.iter().map(|(s, p)| (s.to_vec(), p)).collect();
    let mut out = Vec::new();
    let mut stack = vec![(x0.to_vec(), 1.0, Vec::new())];
    while let Some((x, p, vals)) = stack.pop() {
        if vals.len() as u64 == n {
            out.push((p, vals));
            continue;
        }
        for (s, q) in &steps {
            let y: Vec<i64> = x.iter().zip(s).map(|(a, b)| a + b).collect();
            let mut v = vals.clone();
            v.push(f.eval(&y));
            stack.push((y, p * q, v));
        }
    }
    out
}

const ENUMERATION_LIMIT: f64 = 2e6;

pub fn exact(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sec = section(&cfg.exact, "exact")?;
    let law = cfg.law()?.build()?;
    let f = cfg.observable()?.build()?;
    let x0 = sec.x0.clone().unwrap_or_else(|| vec![0; law.dim()]);
    let budget = sec.budget.map(u128::from).unwrap_or(DEFAULT_BUDGET);
    let plan = MomentPlan {
        x0: x0.clone(),
        horizon: sec.horizon,
        policy: cfg.tolerances.policy(),
        budget,
    };
    let rows = exact_second_moment(&law, &f, &plan)?;
    let mean = exact_mean_t(&law, &f, &plan)?;
    let csv_rows: Vec<MomentCsvRow> = rows
        .iter()
        .map(|r| MomentCsvRow {
            n: r.n,
            mean: r.mean,
            second: r.second,
            var: r.var,
            kernel_mean: mean.cumulative[r.n as usize],
        })
        .collect();
    out.csv("moments.csv", &csv_rows)?;
    let last = rows.last().expect("rows include n = 0");
    let mut summary = json!({
        "law": law.name(),
        "observable": f.info(),
        "x0": x0,
        "horizon": sec.horizon,
        "mean": last.mean,
        "second": last.second,
        "var": last.var,
        "truncated_mass": mean.truncated_mass,
    });

    let pm = if sec.pairs || sec.oracle {
        Some(PairMoments::new(&law, &f, &plan)?)
    } else {
        None
    };
    if sec.pairs {
        let cells = pm.as_ref().expect("built above").table()?;
        out.csv("pairs.csv", &cells)?;
    }

    let paths = (law.len() as f64).powf(sec.horizon as f64);
    if sec.oracle && paths <= ENUMERATION_LIMIT {
        let pm = pm.as_ref().expect("built above");
        let enumerated = enumerate_paths(&law, &f, &x0, sec.horizon);
        let mut worst = 0.0f64;
        let n = sec.horizon as usize;
        for j in 1..=n {
            let (m1, m2) = enumerated.iter().fold((0.0, 0.0), |(a, b), (p, v)| {
                let t: f64 = v[..j].iter().sum();
                (a + p * t, b + p * t * t)
            });
            worst = worst
                .max((rows[j].mean - m1).abs())
                .max((mean.cumulative[j] - m1).abs())
                .max((rows[j].second - m2).abs());
            for i in 1..=j {
                let e: f64 = enumerated.iter().map(|(p, v)| p * v[i - 1] * v[j - 1]).sum();
                worst = worst.max((pm.pair(i as u64, j as u64)?.value - e).abs());
            }
        }
        summary["oracle_paths"] = json!(enumerated.len());
        summary["oracle_max_diff"] = json!(worst);
        summary["oracle_match"] = json!(worst <= 1e-12 * (1.0 + last.second.abs()));
    } else if sec.oracle {
        summary["oracle_match"] = Value::Null;
        summary["oracle_note"] = json!(format!("enumeration skipped: {paths:.3e} paths"));
    }

    if let Some(ns) = &sec.variance_scan {
        let scan = variance_exponent_scan(&law, &f, &x0, ns, budget)?;
        out.csv("variance.csv", &scan.rows)?;
        summary["variance_slope"] = json!(scan.slope);
        summary["variance_degenerate"] = json!(scan.degenerate);
    }
    Ok(summary)
}

#[derive(Serialize)]
struct ScheduleRow {
    n: u64,
    a_n: u64,
    b_n: u128,
    b_next: u128,
    c_n: String,
    t_n: Option<u64>,
    i_lo: Option<i64>,
    i_hi: Option<i64>,
    a_le_n: bool,
    n_lt_b: bool,
    b_increasing: bool,
    b_next_lt_pow2: bool,
}

#[derive(Serialize)]
struct EventRow {
    n: u64,
    t_n: u64,
    path: &'static str,
    event: bool,
    t_sum: f64,
    implication: Option<bool>,
}

/// Longest synthetic or sampled path, in steps.
const MAX_EVENT_STEPS: u64 = 3_000_000;

pub fn ocean_demo(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sec = cfg.ocean.clone().unwrap_or_default();
    let base = make_ocean(sec.alpha, sec.b1, sec.a_rule)?;
    let d = sec.d.unwrap_or(1);
    let f = if d == 1 { base.clone() } else { make_ocean_multidim(d, &base)? };
    let s = base.ocean_schedule().expect("ocean observable");
    let n_max = sec.schedule_n.unwrap_or(s.len() as u64 - 2);

    let checks = s.check_bounds(n_max)?;
    let rows: Vec<ScheduleRow> = checks
        .iter()
        .map(|c| -> Result<ScheduleRow, CliError> {
            let two_c = s.two_c(c.n)?;
            let interval = s.interval(c.n).ok();
            Ok(ScheduleRow {
                n: c.n,
                a_n: c.a_n,
                b_n: c.b_n,
                b_next: c.b_next,
                c_n: format!("{}{}", two_c / 2, if two_c % 2 == 1 { ".5" } else { "" }),
                t_n: s.t(c.n).ok(),
                i_lo: interval.map(|i| i.0),
                i_hi: interval.map(|i| i.1),
                a_le_n: c.a_le_n,
                n_lt_b: c.n_lt_b,
                b_increasing: c.b_increasing,
                b_next_lt_pow2: c.b_next_lt_pow2,
            })
        })
        .collect::<Result<_, _>>()?;
    out.csv("schedule.csv", &rows)?;
    let structural = checks.iter().all(|c| c.a_le_n && c.n_lt_b && c.b_increasing);
    let pow2_fail: Vec<u64> = checks.iter().filter(|c| !c.b_next_lt_pow2).map(|c| c.n).collect();

    let trace = s.trace(sec.trace_n)?;
    out.csv("trace.csv", &trace)?;
    let settle = settle_index(&trace, cfg.tolerances.settle);
    let tail_dev = trace
        .iter()
        .filter(|r| 4 * r.n > 3 * sec.trace_n)
        .map(|r| (r.average - 0.5).abs())
        .fold(0.0, f64::max);

    let mut events = Vec::new();
    let mut feasible = Vec::new();
    for &n in &sec.event_n {
        let t = s.t(n)?;
        if 3 * t > MAX_EVENT_STEPS {
            continue;
        }
        feasible.push(n);
        let c = (s.two_c(n)? / 2) as i64;
        for (name, park) in [("parked", c), ("origin", 0)] {
            let mut path = Vec::with_capacity((3 * t as usize + 1) * d);
            for k in 0..=3 * t {
                path.push(if k < t { 0 } else { park });
                path.extend(std::iter::repeat_n(0, d - 1));
            }
            let e = ocean_event_check(&f, n, &path)?;
            events.push(EventRow {
                n,
                t_n: t,
                path: name,
                event: e.event,
                t_sum: e.t_sum,
                implication: e.implication,
            });
        }
    }
    out.csv("events.csv", &events)?;
    let law = match &cfg.law {
        Some(p) => p.build()?,
        None => LawPreset::LazySrw { d, hold: 0.5 }.build()?,
    };
    let scan = ocean_event_scan(&law, &f, &feasible, sec.event_trials, cfg.seed)?;
    out.csv("events_sampled.csv", &scan)?;
    let violations = events.iter().filter(|e| e.implication == Some(false)).count() as u64
        + scan.iter().map(|r| r.violations).sum::<u64>();

    Ok(json!({
        "alpha": sec.alpha,
        "b1": sec.b1,
        "a_rule": sec.a_rule,
        "d": d,
        "schedule_rows": rows.len(),
        "structural_bounds_hold": structural,
        "pow2_bound_failures": pow2_fail,
        "settle_index": settle,
        "tail_max_deviation": tail_dev,
        "trace_pass": tail_dev < cfg.tolerances.settle,
        "event_n": feasible,
        "synthetic_events": events.iter().filter(|e| e.event).count(),
        "sampled_events": scan.iter().map(|r| r.events).sum::<u64>(),
        "implication_violations": violations,
    }))
}

#[derive(Serialize)]
struct McRow {
    cell: usize,
    trials: u64,
    mean1: f64,
    mc_mean1: f64,
    mean2: f64,
    mc_mean2: f64,
    mean12: f64,
    mc_mean12: f64,
    cov: f64,
    mc_cov: f64,
    max_z: f64,
}

#[derive(Serialize)]
struct ChainCsvRow {
    p1: f64,
    q1: f64,
    eta1: f64,
    q2: f64,
    p2: f64,
    eta2: f64,
    pi1: f64,
    pi2: f64,
    mean1: f64,
    mean2: f64,
    cov: f64,
    bracket: f64,
    ell: bool,
    ratio: Option<f64>,
    flagged: bool,
}

pub fn chain_sweep_cmd(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sec = cfg.chain_sweep.clone().unwrap_or_default();
    let explicit: Vec<ThreeStateChain> = sec
        .chains
        .iter()
        .map(|c| ThreeStateChain::new(c.row1, c.row2, c.pi))
        .collect::<Result<_, _>>()?;
    let spec = SweepSpec {
        delta: sec.delta,
        points: sec.points,
        pi: sec.pi,
    };
    let report = chain_sweep(&spec)?;
    out.csv("sweep.csv", &report.rows)?;

    let mut mc_rows = Vec::new();
    if sec.mc_every > 0 {
        for (cell, r) in report.rows.iter().enumerate().step_by(sec.mc_every) {
            let chain = ThreeStateChain::new([r.p1, r.q1, r.eta1], [r.q2, r.p2, r.eta2], spec.pi)?;
            let ex = exact_occupation_moments(&chain)?;
            let mc = monte_carlo_moments(&chain, sec.mc_trials, keyed_hash(cfg.seed, [cell as u64]))?;
            mc_rows.push(McRow {
                cell,
                trials: mc.trials,
                mean1: ex.mean1,
                mc_mean1: mc.moments.mean1,
                mean2: ex.mean2,
                mc_mean2: mc.moments.mean2,
                mean12: ex.mean12,
                mc_mean12: mc.moments.mean12,
                cov: ex.cov,
                mc_cov: mc.moments.cov,
                max_z: mc.max_z(&ex),
            });
        }
        out.csv("sweep_mc.csv", &mc_rows)?;
    }
    let mc_max_z = mc_rows.iter().map(|r| r.max_z).fold(0.0, f64::max);

    let chain_rows: Vec<ChainCsvRow> = explicit
        .iter()
        .map(|c| -> Result<ChainCsvRow, CliError> {
            let m = exact_occupation_moments(c)?;
            let ell = c.satisfies_ell(sec.delta);
            let (ratio, flagged) = if ell {
                let b = lemma_bound_check(c, 1.0, sec.delta)?;
                (b.ratio, b.flagged)
            } else {
                (None, false)
            };
            Ok(ChainCsvRow {
                p1: c.p1(),
                q1: c.q1(),
                eta1: c.eta1(),
                q2: c.q2(),
                p2: c.p2(),
                eta2: c.eta2(),
                pi1: c.pi[0],
                pi2: c.pi[1],
                mean1: m.mean1,
                mean2: m.mean2,
                cov: m.cov,
                bracket: c.bracket(),
                ell,
                ratio,
                flagged,
            })
        })
        .collect::<Result<_, _>>()?;
    if !chain_rows.is_empty() {
        out.csv("chains.csv", &chain_rows)?;
    }

    Ok(json!({
        "delta": spec.delta,
        "cells": report.rows.len(),
        "max_ratio": report.max_ratio,
        "flagged": report.flagged,
        "mc_cells": mc_rows.len(),
        "mc_max_z": mc_max_z,
        "mc_pass": mc_max_z < cfg.tolerances.mc_z,
        "explicit_chains": chain_rows.len(),
    }))
}

#[derive(Serialize)]
struct DerivativeCsvRow {
    n: u64,
    sup0: f64,
    sup1: f64,
    sup2: f64,
}

pub fn llt(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sec = cfg.llt.clone().unwrap_or_default();
    let law = cfg.law()?.build()?;
    let policy = cfg.tolerances.policy();
    let rows = llt_report(&law, &sec.n, &policy)?;
    out.csv("llt.csv", &rows)?;
    if sec.derivatives {
        let d = kernel_derivatives(&law, &sec.n, &policy)?;
        let d: Vec<DerivativeCsvRow> = d
            .iter()
            .map(|r| DerivativeCsvRow {
                n: r.n,
                sup0: r.sup[0],
                sup1: r.sup[1],
                sup2: r.sup[2],
            })
            .collect();
        out.csv("derivatives.csv", &d)?;
    }
    let decreasing = rows.windows(2).all(|w| w[1].sup_error < w[0].sup_error);
    Ok(json!({
        "law": law.name(),
        "rows": rows,
        "strictly_decreasing": decreasing,
    }))
}

#[derive(Serialize)]
struct BetaCsvRow {
    scale: i64,
    max_error: f64,
    worst_offset: String,
}

pub fn beta_fit_cmd(cfg: &RunConfig, out: &mut Output) -> Result<Value, CliError> {
    let sec = section(&cfg.beta_fit, "beta_fit")?;
    let f = cfg.observable()?.build()?;
    let plan = BetaFitPlan {
        mean: sec.mean,
        gamma: sec.gamma,
        scales: sec.scales.clone(),
        samples: sec.samples,
        corners: sec.corners.clone().unwrap_or_else(|| vec![(0, 1); f.dim()]),
        seed: cfg.seed,
        budget: u128::from(sec.budget),
    };
    let fit = beta_fit(&f, &plan)?;
    let rows: Vec<BetaCsvRow> = fit
        .rows
        .iter()
        .map(|r| BetaCsvRow {
            scale: r.scale,
            max_error: r.max_error,
            worst_offset: join_site(&r.worst_offset),
        })
        .collect();
    out.csv("beta.csv", &rows)?;
    Ok(json!({
        "observable": f.info(),
        "beta_hat": fit.beta_hat,
        "c_hat": fit.c_hat,
        "degenerate": fit.degenerate,
    }))
}
