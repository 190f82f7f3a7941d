//! Experiment runner: parses a configuration, dispatches to the estimator
//! pipeline and collects the output rows.

mod config;
mod record;

pub use config::{parse_config, ExperimentConfig, ExperimentKind, ObservableRun, SchemeRun};
pub use record::{emit_csv, read_csv, Row, RunRecord, CSV_HEADER};

use std::time::Instant;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, HarnessError};
use crate::estimators::{
    ensemble_series, fit_order, linear_trend, step_count, Ensemble, Observable, SeriesMode,
    WeakErrorPlan,
};
use crate::geometry::{
    hormander_frame, hormander_rank, multisymplectic_residual, wedge_sum, TangentMap,
    TangentPairStep, TangentState, VectorFieldFrame,
};
use crate::lattice::{initial_state, InitialCondition, LatticeConfig, NoiseOperators, State};
use crate::noise::{derive_stream, BrownianPath, PathSpec};
use crate::parallel::Execution;
use crate::schemes::{Scheme, Stepper};

/// Step used for the finite-difference bracket check.
pub const BRACKET_FD_STEP: f64 = 1e-6;

/// `2^-7` for powers of two, the shortest decimal otherwise.
pub fn tau_label(tau: f64) -> String {
    let e = tau.log2();
    if e.fract() == 0.0 {
        format!("2^{}", e as i64)
    } else {
        tau.to_string()
    }
}

/// Runs one experiment. Numerical failures are recorded in
/// [`RunRecord::failure`] with the rows produced so far.
pub fn run(cfg: &ExperimentConfig, exec: Execution) -> Result<RunRecord, HarnessError> {
    let start = Instant::now();
    let mut record = RunRecord {
        config: cfg.echo(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        ..Default::default()
    };
    let outcome = match cfg.experiment {
        ExperimentKind::Charge => run_charge(cfg, exec, &mut record),
        ExperimentKind::Ergodic => run_ergodic(cfg, exec, &mut record),
        ExperimentKind::WeakOrder => run_weak_order(cfg, exec, &mut record),
        ExperimentKind::LongtimeWeak => run_longtime(cfg, exec, &mut record),
        ExperimentKind::Hormander => run_hormander(cfg, &mut record),
        ExperimentKind::Symplectic => run_symplectic(cfg, exec, &mut record),
    };
    match outcome {
        Ok(()) => {}
        Err(e) if e.is_numerical() => record.failure = Some(e.to_string()),
        Err(e) => return Err(e.into()),
    }
    record.wall_clock = start.elapsed();
    Ok(record)
}

fn lattice(cfg: &ExperimentConfig, m: usize) -> crate::Result<(LatticeConfig, NoiseOperators)> {
    let lat = LatticeConfig::with_decay(m, cfg.k, cfg.lambda, cfg.eta_decay)?;
    let ops = NoiseOperators::new(&lat);
    Ok((lat, ops))
}

fn ensemble<'a>(
    cfg: &ExperimentConfig,
    exec: Execution,
    lat: &'a LatticeConfig,
    ops: &'a NoiseOperators,
    u0: State,
) -> Ensemble<'a> {
    Ensemble {
        cfg: lat,
        ops,
        u0,
        n_paths: cfg.n_paths,
        seed: cfg.seed,
        fp_tol: cfg.fp_tol,
        fp_max_iters: cfg.fp_max_iters,
        exec,
        blowup_norm: Some(cfg.blowup_norm),
    }
}

fn start(lat: &LatticeConfig, id: u32) -> crate::Result<State> {
    initial_state(lat, &InitialCondition::from_id(id)?)
}

fn run_charge(cfg: &ExperimentConfig, exec: Execution, rec: &mut RunRecord) -> crate::Result<()> {
    let (lat, ops) = lattice(cfg, cfg.m)?;
    for run in &cfg.schemes {
        for &id in &cfg.initial {
            let ens = ensemble(cfg, exec, &lat, &ops, start(&lat, id)?);
            for &tau in &run.taus {
                let mut name = format!("{}:tau={}", run.scheme, tau_label(tau));
                if cfg.initial.len() > 1 {
                    name.push_str(&format!(":u0={id}"));
                }
                let s = ensemble_series(
                    &ens,
                    run.scheme,
                    tau,
                    run.t_end,
                    &Observable::Charge,
                    SeriesMode::Instant,
                    cfg.stride,
                )?;
                let mut max_dev = 0.0f64;
                for i in 0..s.steps.len() {
                    let dev = s.mean[i] - 1.0;
                    if dev.is_finite() {
                        max_dev = max_dev.max(dev.abs());
                    }
                    rec.rows
                        .push(Row::new(&name, s.steps[i] as f64 * tau, dev, s.stderr[i]));
                }
                let aborted = *s.aborted.last().unwrap_or(&0);
                rec.notes.push(format!(
                    "{name}: max |E||U^n||^2 - 1| = {max_dev:.3e} over {} steps, {aborted} of {} paths aborted",
                    step_count(run.t_end, tau)?,
                    cfg.n_paths
                ));
            }
        }
    }
    Ok(())
}

fn run_ergodic(cfg: &ExperimentConfig, exec: Execution, rec: &mut RunRecord) -> crate::Result<()> {
    let (lat, ops) = lattice(cfg, cfg.m)?;
    for run in &cfg.schemes {
        for obs in &cfg.observables {
            for &tau in &run.taus {
                let prefix = if cfg.schemes.len() > 1 || run.taus.len() > 1 {
                    format!("{}:tau={}:", run.scheme, tau_label(tau))
                } else {
                    String::new()
                };
                let mut finals = Vec::with_capacity(cfg.initial.len());
                let mut worst_se = 0.0f64;
                for &id in &cfg.initial {
                    let ens = ensemble(cfg, exec, &lat, &ops, start(&lat, id)?);
                    let s = ensemble_series(
                        &ens,
                        run.scheme,
                        tau,
                        obs.t_end,
                        &obs.observable,
                        SeriesMode::RunningAverage,
                        cfg.stride,
                    )?;
                    let name = format!("{prefix}{}:u0={id}", obs.observable.name());
                    for i in 0..s.steps.len() {
                        rec.rows.push(Row::new(
                            &name,
                            s.steps[i] as f64 * tau,
                            s.mean[i],
                            s.stderr[i],
                        ));
                    }
                    finals.push(*s.mean.last().unwrap());
                    worst_se = worst_se.max(*s.stderr.last().unwrap());
                }
                let hi = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let lo = finals.iter().cloned().fold(f64::INFINITY, f64::min);
                let name = format!("{prefix}{}:spread", obs.observable.name());
                rec.rows.push(Row::new(&name, obs.t_end, hi - lo, worst_se));
                rec.notes.push(format!(
                    "{name}: time averages at T = {} span {:.6} over {} initial conditions",
                    obs.t_end,
                    hi - lo,
                    finals.len()
                ));
            }
        }
    }
    Ok(())
}

fn run_weak_order(
    cfg: &ExperimentConfig,
    exec: Execution,
    rec: &mut RunRecord,
) -> crate::Result<()> {
    let (lat, ops) = lattice(cfg, cfg.m)?;
    let ens = ensemble(cfg, exec, &lat, &ops, start(&lat, cfg.initial[0])?);
    let observables: Vec<Observable> = cfg
        .observables
        .iter()
        .map(|o| o.observable.clone())
        .collect();
    for run in &cfg.schemes {
        let plan = WeakErrorPlan {
            scheme: run.scheme,
            taus: run.taus.clone(),
            refinement: cfg.refinement,
            checkpoints: vec![run.t_end],
        };
        let table = plan.run(&ens, &observables)?;
        for obs in &observables {
            let name = format!("{}:{}", run.scheme, obs.name());
            let mut entries = table.select(obs.name(), run.t_end);
            entries.sort_by(|a, b| b.tau.partial_cmp(&a.tau).unwrap());
            for e in &entries {
                rec.rows.push(Row::new(&name, e.tau, e.error, e.stderr));
            }
            let points = table.points(obs.name(), run.t_end);
            match fit_order(&points) {
                Ok(fit) => {
                    let (lx, ly): (Vec<f64>, Vec<f64>) =
                        points.iter().map(|(t, e)| (t.log2(), e.log2())).unzip();
                    let (_, slope_se) = linear_trend(&lx, &ly)?;
                    rec.rows.push(Row::new(
                        format!("{name}:order"),
                        run.t_end,
                        fit.slope,
                        slope_se,
                    ));
                    rec.notes.push(format!(
                        "{name}: fitted order {:.4} (intercept {:.4}, reference step {})",
                        fit.slope,
                        fit.intercept,
                        tau_label(table.reference_tau)
                    ));
                }
                Err(e) => rec.notes.push(format!("{name}: no order fit ({e})")),
            }
        }
    }
    Ok(())
}

fn run_longtime(cfg: &ExperimentConfig, exec: Execution, rec: &mut RunRecord) -> crate::Result<()> {
    let (lat, ops) = lattice(cfg, cfg.m)?;
    let ens = ensemble(cfg, exec, &lat, &ops, start(&lat, cfg.initial[0])?);
    let observables: Vec<Observable> = cfg
        .observables
        .iter()
        .map(|o| o.observable.clone())
        .collect();
    for run in &cfg.schemes {
        let checkpoints = run.checkpoints.clone();
        let plan = WeakErrorPlan {
            scheme: run.scheme,
            taus: run.taus.clone(),
            refinement: cfg.refinement,
            checkpoints: checkpoints.clone(),
        };
        let table = plan.run(&ens, &observables)?;
        for &tau in &run.taus {
            for obs in &observables {
                let name = format!("{}:{}:tau={}", run.scheme, obs.name(), tau_label(tau));
                let entries: Vec<_> = table
                    .entries
                    .iter()
                    .filter(|e| e.tau == tau && e.observable == obs.name())
                    .collect();
                for e in &entries {
                    rec.rows.push(Row::new(&name, e.t, e.error, e.stderr));
                }
                for e in &entries {
                    rec.rows.push(Row::new(
                        format!("{name}:aborted"),
                        e.t,
                        e.aborted as f64,
                        0.0,
                    ));
                }
                let (ts, errs): (Vec<f64>, Vec<f64>) = entries
                    .iter()
                    .filter(|e| e.error.is_finite())
                    .map(|e| (e.t, e.error))
                    .unzip();
                if let Ok((slope, se)) = linear_trend(&ts, &errs) {
                    rec.rows
                        .push(Row::new(format!("{name}:trend"), run.t_end, slope, se));
                }
                let aborted = entries.last().map_or(0, |e| e.aborted);
                rec.notes.push(format!(
                    "{name}: {} finite checkpoints, {aborted} of {} paths aborted by T = {}",
                    ts.len(),
                    cfg.n_paths,
                    run.t_end
                ));
            }
        }
    }
    Ok(())
}

fn run_hormander(cfg: &ExperimentConfig, rec: &mut RunRecord) -> crate::Result<()> {
    for &m in &cfg.m_values {
        let (lat, ops) = lattice(cfg, m)?;
        let frame = hormander_frame(&lat, &ops)?;
        let rank = hormander_rank(&frame.columns());
        let mut without_drift = frame.noise.clone();
        without_drift.extend(frame.brackets.iter().cloned());
        let rank_nd = hormander_rank(&without_drift);
        let fields = VectorFieldFrame::new(&lat, &ops);
        let gap = (1..=m)
            .map(|k| fields.bracket_fd_gap(k, &frame.point, BRACKET_FD_STEP))
            .fold(0.0f64, f64::max);
        let x = m as f64;
        rec.rows.push(Row::new("rank", x, rank as f64, 0.0));
        rec.rows
            .push(Row::new("rank_without_drift", x, rank_nd as f64, 0.0));
        rec.rows.push(Row::new("bracket_fd_gap", x, gap, 0.0));
        let verdict = if rank == 2 * m { "PASS" } else { "FAIL" };
        rec.notes.push(format!(
            "M={m}: rank {rank} = 2M: {verdict} (max bracket fd gap {gap:.2e})"
        ));
    }
    Ok(())
}

/// Per-step extremes over all paths of one symplectic sweep.
#[derive(Debug, Clone, Default)]
struct SymplecticTrace {
    step_change: Vec<f64>,
    drift: Vec<f64>,
    residual: Vec<f64>,
}

fn unit_tangent(rng: &mut impl rand::Rng, m: usize) -> TangentState {
    let mut t = TangentState::zeros(m);
    for v in t.dp.iter_mut().chain(t.dq.iter_mut()) {
        *v = StandardNormal.sample(rng);
    }
    let n = t.norm();
    t.scaled(1.0 / n)
}

fn run_symplectic(
    cfg: &ExperimentConfig,
    exec: Execution,
    rec: &mut RunRecord,
) -> crate::Result<()> {
    let (lat, ops) = lattice(cfg, cfg.m)?;
    let u0 = start(&lat, cfg.initial[0])?;
    let run = &cfg.schemes[0];
    for &tau in &run.taus {
        let n_steps = step_count(run.t_end, tau)?;
        let sc = crate::StepperConfig::new(tau)?.with_tolerance(cfg.fp_tol, cfg.fp_max_iters);
        let traces = exec.map_paths(
            cfg.n_paths,
            |path_index| -> crate::Result<SymplecticTrace> {
                let spec = PathSpec {
                    seed: cfg.seed,
                    path_index,
                    k: lat.k(),
                    tau,
                    refinement: 0,
                    n_steps,
                };
                let mut path = BrownianPath::new(&spec)?;
                // tangent directions come from a stream disjoint from the noise
                let mut rng = derive_stream(!cfg.seed, path_index);
                let mut xi = unit_tangent(&mut rng, lat.m());
                let mut eta = unit_tangent(&mut rng, lat.m());
                let omega0 = wedge_sum(&xi, &eta);
                let mut stepper = Stepper::new(Scheme::Midpoint, &lat, &ops, sc);
                let mut u = u0.clone();
                let mut db = vec![0.0; lat.k()];
                let mut trace = SymplecticTrace::default();
                let mut prev = omega0;
                for n in 1..=n_steps {
                    path.next_coarse(&mut db);
                    let base = u.clone();
                    stepper.step(&mut u, &db).map_err(|e| Error::AtStep {
                        step: n,
                        source: Box::new(e),
                    })?;
                    let map = TangentMap::new(&lat, &ops, &sc, &base, &u, &db)?;
                    let (xi1, eta1) = (map.apply(&xi)?, map.apply(&eta)?);
                    let res = multisymplectic_residual(
                        &TangentPairStep {
                            xi: &xi,
                            xi_next: &xi1,
                            eta: &eta,
                            eta_next: &eta1,
                        },
                        tau,
                        lat.h(),
                    );
                    let omega = wedge_sum(&xi1, &eta1);
                    trace.step_change.push((omega - prev).abs());
                    trace.drift.push((omega - omega0).abs());
                    trace
                        .residual
                        .push(res.iter().fold(0.0f64, |a, r| a.max(r.abs())));
                    prev = omega;
                    xi = xi1;
                    eta = eta1;
                }
                Ok(trace)
            },
        );
        let traces: Vec<SymplecticTrace> = traces.into_iter().collect::<crate::Result<_>>()?;
        let label = tau_label(tau);
        let worst = |f: fn(&SymplecticTrace) -> &Vec<f64>, n: usize| {
            traces.iter().map(|t| f(t)[n]).fold(0.0f64, f64::max)
        };
        let mut maxima = [0.0f64; 3];
        for n in 0..n_steps {
            let vals = [
                worst(|t| &t.step_change, n),
                worst(|t| &t.drift, n),
                worst(|t| &t.residual, n),
            ];
            for (m, v) in maxima.iter_mut().zip(vals) {
                *m = m.max(v);
            }
            if (n + 1) % cfg.stride == 0 || n + 1 == n_steps {
                let t = (n + 1) as f64 * tau;
                rec.rows.push(Row::new(
                    format!("tau={label}:wedge_step_change"),
                    t,
                    vals[0],
                    0.0,
                ));
                rec.rows.push(Row::new(
                    format!("tau={label}:wedge_drift"),
                    t,
                    vals[1],
                    0.0,
                ));
                rec.rows
                    .push(Row::new(format!("tau={label}:residual"), t, vals[2], 0.0));
            }
        }
        rec.notes.push(format!(
            "tau={label}: max per-step wedge change {:.3e}, max wedge drift {:.3e}, max cell residual {:.3e} over {n_steps} steps and {} paths",
            maxima[0], maxima[1], maxima[2], cfg.n_paths
        ));
    }
    Ok(())
}

/// Names and one-line descriptions of the available experiments.
pub fn list_experiments() -> Vec<(&'static str, &'static str)> {
    ExperimentKind::ALL
        .iter()
        .map(|k| (k.name(), k.summary()))
        .collect()
}
