//! Observables, ensemble statistics, ergodic time averages, coupled weak
//! errors and convergence-order regression.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::lattice::{initial_state, InitialCondition, LatticeConfig, NoiseOperators, State};
use crate::noise::{IncrementStream, Level, PathSpec};
use crate::parallel::{pairwise_sum, Execution};
use crate::schemes::{integrate, IntegrateOptions, Scheme, Stepper, StepperConfig};

/// `||U||_g^g = sum_m |p_m|^g + |q_m|^g`.
pub fn gamma_norm(u: &State, gamma: i32) -> f64 {
    u.p.iter().chain(&u.q).map(|v| v.abs().powi(gamma)).sum()
}

/// Bounded test functions on the unit sphere.
#[derive(Clone)]
pub enum Observable {
    Charge,
    /// `||U||_3^3`
    PNorm3,
    /// `sin(||U||_4^4)`
    SinPNorm4,
    /// `exp(-||U||_4^4)`
    ExpNegPNorm4,
    Custom {
        name: String,
        f: Arc<dyn Fn(&State) -> f64 + Send + Sync>,
    },
}

impl Observable {
    pub const BUILTIN: [&'static str; 4] = ["charge", "pnorm3", "sin_pnorm4", "exp_neg_pnorm4"];

    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(&State) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Observable::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            Observable::Charge => "charge",
            Observable::PNorm3 => "pnorm3",
            Observable::SinPNorm4 => "sin_pnorm4",
            Observable::ExpNegPNorm4 => "exp_neg_pnorm4",
            Observable::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.name())
    }
}

impl PartialEq for Observable {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Observable::Custom { f: a, .. }, Observable::Custom { f: b, .. }) => Arc::ptr_eq(a, b),
            (a, b) => std::mem::discriminant(a) == std::mem::discriminant(b),
        }
    }
}

impl FromStr for Observable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "charge" => Ok(Observable::Charge),
            "pnorm3" => Ok(Observable::PNorm3),
            "sin_pnorm4" => Ok(Observable::SinPNorm4),
            "exp_neg_pnorm4" => Ok(Observable::ExpNegPNorm4),
            other => Err(Error::Input(format!("unknown observable `{other}`"))),
        }
    }
}

pub fn evaluate(obs: &Observable, u: &State) -> f64 {
    match obs {
        Observable::Charge => u.charge(),
        Observable::PNorm3 => gamma_norm(u, 3),
        Observable::SinPNorm4 => gamma_norm(u, 4).sin(),
        Observable::ExpNegPNorm4 => (-gamma_norm(u, 4)).exp(),
        Observable::Custom { f, .. } => f(u),
    }
}

/// `(1/N) sum_{n=1}^N f(U^n)`; `series[0]` is `f(U^1)`.
pub fn time_average(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Input("time average of an empty series".into()));
    }
    Ok(pairwise_sum(series) / series.len() as f64)
}

/// Running averages `A_N`, `N = 1..=len`.
pub fn running_averages(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(i, v)| {
            acc += v;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Sample mean and standard error `s / sqrt(n)`.
pub fn ensemble_mean(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Input(format!("need at least 2 paths, got {n}")));
    }
    let mean = pairwise_sum(values) / n as f64;
    let dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Least-squares fit of `log2 error = intercept + slope * log2 tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in `log2` units.
    pub residual: f64,
    pub points: Vec<(f64, f64)>,
}

pub fn fit_order(points: &[(f64, f64)]) -> Result<OrderFit> {
    if points.len() < 3 {
        return Err(Error::Input("order fit needs at least 3 points".into()));
    }
    if let Some((t, e)) = points.iter().find(|(t, e)| !(*t > 0.0 && *e > 0.0)) {
        return Err(Error::Input(format!(
            "order fit needs positive steps and errors, got ({t}, {e})"
        )));
    }
    let xs: Vec<f64> = points.iter().map(|(t, _)| t.log2()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, e)| e.log2()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("order fit needs distinct step sizes".into()));
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - slope * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(OrderFit {
        slope,
        intercept,
        residual,
        points: points.to_vec(),
    })
}

/// Ordinary least-squares slope of `y` on `x` with its standard error.
pub fn linear_trend(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    let n = x.len();
    if n < 3 || y.len() != n {
        return Err(Error::Input("trend needs at least 3 paired points".into()));
    }
    let nf = n as f64;
    let (mx, my) = (x.iter().sum::<f64>() / nf, y.iter().sum::<f64>() / nf);
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let rss: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - my - slope * (a - mx)).powi(2))
        .sum();
    Ok((slope, (rss / (nf - 2.0) / sxx).sqrt()))
}

/// Shared description of an ensemble of paths.
#[derive(Debug, Clone)]
pub struct Ensemble<'a> {
    pub cfg: &'a LatticeConfig,
    pub ops: &'a NoiseOperators,
    pub u0: State,
    pub n_paths: usize,
    pub seed: u64,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub exec: Execution,
    /// Paths whose norm exceeds this are aborted and reported.
    pub blowup_norm: Option<f64>,
}

impl<'a> Ensemble<'a> {
    pub fn new(cfg: &'a LatticeConfig, ops: &'a NoiseOperators, u0: State) -> Self {
        Self {
            cfg,
            ops,
            u0,
            n_paths: 500,
            seed: 0,
            fp_tol: StepperConfig::DEFAULT_FP_TOL,
            fp_max_iters: StepperConfig::DEFAULT_FP_MAX_ITERS,
            exec: Execution::default(),
            blowup_norm: None,
        }
    }

    pub fn stepper_config(&self, tau: f64) -> Result<StepperConfig> {
        Ok(StepperConfig::new(tau)?.with_tolerance(self.fp_tol, self.fp_max_iters))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SeriesMode {
    /// `E f(U^n)`
    Instant,
    /// `(1/n) sum_{i=1}^n E f(U^i)`; `n = 0` reports `f(U^0)`.
    RunningAverage,
}

/// Ensemble time series sampled every `stride` steps (plus the final step).
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub steps: Vec<usize>,
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Number of paths aborted before each sample.
    pub aborted: Vec<usize>,
}

/// Number of steps `T / tau`, rejecting non-integral ratios.
pub fn step_count(t_end: f64, tau: f64) -> Result<usize> {
    let n = t_end / tau;
    let r = n.round();
    if !(r >= 0.0 && (n - r).abs() <= 1e-9 * r.max(1.0)) {
        return Err(Error::Input(format!(
            "T/tau = {t_end}/{tau} is not an integer"
        )));
    }
    Ok(r as usize)
}

fn sample_steps(n_steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut steps: Vec<usize> = (0..=n_steps).step_by(stride).collect();
    if *steps.last().unwrap() != n_steps {
        steps.push(n_steps);
    }
    steps
}

pub fn ensemble_series(
    ens: &Ensemble<'_>,
    scheme: Scheme,
    tau: f64,
    t_end: f64,
    obs: &Observable,
    mode: SeriesMode,
    stride: usize,
) -> Result<Series> {
    let sc = ens.stepper_config(tau)?;
    let n_steps = step_count(t_end, tau)?;
    let steps = sample_steps(n_steps, stride);
    let per_path = ens.exec.map_paths(ens.n_paths, |path_index| {
        let spec = PathSpec {
            seed: ens.seed,
            path_index,
            k: ens.cfg.k(),
            tau,
            refinement: 0,
            n_steps,
        };
        let mut values = vec![f64::NAN; steps.len()];
        let mut next = 0;
        let mut acc = 0.0;
        let mut record = |n: usize, u: &State| {
            let f = evaluate(obs, u);
            let v = match mode {
                SeriesMode::Instant => f,
                SeriesMode::RunningAverage if n == 0 => f,
                SeriesMode::RunningAverage => {
                    acc += f;
                    acc / n as f64
                }
            };
            if next < steps.len() && steps[next] == n {
                values[next] = v;
                next += 1;
            }
        };
        let opts = IntegrateOptions {
            blowup_norm: ens.blowup_norm,
            keep_trajectory: false,
        };
        match integrate(
            scheme,
            ens.cfg,
            ens.ops,
            &sc,
            &ens.u0,
            &spec,
            Level::Coarse,
            &mut [&mut record],
            opts,
        ) {
            Ok(_) => Ok(values),
            // a blown-up path keeps the samples it reached; the rest stay NaN
            Err(Error::Blowup { .. }) => Ok(values),
            Err(e) => Err(e),
        }
    });
    let per_path: Vec<Vec<f64>> = per_path.into_iter().collect::<Result<_>>()?;

    let mut series = Series {
        steps: steps.clone(),
        mean: Vec::with_capacity(steps.len()),
        stderr: Vec::with_capacity(steps.len()),
        aborted: Vec::with_capacity(steps.len()),
    };
    for i in 0..steps.len() {
        let alive: Vec<f64> = per_path
            .iter()
            .map(|v| v[i])
            .filter(|v| !v.is_nan())
            .collect();
        let aborted = per_path.len() - alive.len();
        let (m, se) = match alive.len() {
            0 => (f64::NAN, f64::NAN),
            1 => (alive[0], f64::NAN),
            _ => ensemble_mean(&alive)?,
        };
        series.mean.push(m);
        series.stderr.push(se);
        series.aborted.push(aborted);
    }
    Ok(series)
}

/// Coupled weak-error experiment: the `scheme` run at each coarse step is
/// compared with a midpoint reference at `min(taus) / 2^refinement`, all
/// driven by one Brownian path per sample.
#[derive(Debug, Clone)]
pub struct WeakErrorPlan {
    pub scheme: Scheme,
    pub taus: Vec<f64>,
    pub refinement: u32,
    /// Times at which errors are measured; each must be a multiple of every tau.
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorEntry {
    pub t: f64,
    pub tau: f64,
    pub observable: String,
    /// `|E f(U_coarse) - E f(U_ref)|`
    pub error: f64,
    /// Signed mean difference.
    pub bias: f64,
    pub stderr: f64,
    /// NaN when every path stopped before `t`.
    pub reference_mean: f64,
    pub aborted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakErrorTable {
    pub reference_tau: f64,
    pub entries: Vec<WeakErrorEntry>,
}

impl WeakErrorTable {
    pub fn select(&self, observable: &str, t: f64) -> Vec<&WeakErrorEntry> {
        self.entries
            .iter()
            .filter(|e| e.observable == observable && e.t == t)
            .collect()
    }

    /// `(tau, error)` pairs for one observable at one time, sorted by tau.
    pub fn points(&self, observable: &str, t: f64) -> Vec<(f64, f64)> {
        let mut pts: Vec<(f64, f64)> = self
            .select(observable, t)
            .into_iter()
            .map(|e| (e.tau, e.error))
            .collect();
        pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        pts
    }
}

struct PathOutcome {
    /// `[checkpoint][obs]`, NaN past an early exit.
    reference: Vec<Vec<f64>>,
    /// `[tau][checkpoint][obs]`, NaN once the path is aborted.
    coarse: Vec<Vec<Vec<f64>>>,
}

impl WeakErrorPlan {
    fn validate(&self) -> Result<(f64, Vec<usize>, Vec<usize>)> {
        if self.taus.is_empty() || self.checkpoints.is_empty() {
            return Err(Error::Input(
                "weak-error plan needs taus and checkpoints".into(),
            ));
        }
        let tau_min = self.taus.iter().cloned().fold(f64::INFINITY, f64::min);
        let ref_tau = tau_min / (1u64 << self.refinement) as f64;
        let ratios = self
            .taus
            .iter()
            .map(|&t| {
                let r = step_count(t, ref_tau)?;
                if !r.is_power_of_two() {
                    return Err(Error::Input(format!(
                        "tau {t} is not tau_min times a power of two"
                    )));
                }
                Ok(r)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut checkpoint_steps = Vec::with_capacity(self.checkpoints.len());
        for &t in &self.checkpoints {
            for &tau in &self.taus {
                step_count(t, tau)?;
            }
            checkpoint_steps.push(step_count(t, ref_tau)?);
        }
        if checkpoint_steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Input(
                "checkpoints must be strictly increasing".into(),
            ));
        }
        Ok((ref_tau, ratios, checkpoint_steps))
    }

    pub fn run(&self, ens: &Ensemble<'_>, observables: &[Observable]) -> Result<WeakErrorTable> {
        let (ref_tau, ratios, checkpoint_steps) = self.validate()?;
        let ref_sc = ens.stepper_config(ref_tau)?;
        let coarse_sc = self
            .taus
            .iter()
            .map(|&t| ens.stepper_config(t))
            .collect::<Result<Vec<_>>>()?;
        let k = ens.cfg.k();
        let total = *checkpoint_steps.last().unwrap();
        let n_obs = observables.len();
        let n_cp = checkpoint_steps.len();

        let outcomes = ens
            .exec
            .map_paths(ens.n_paths, |path_index| -> Result<PathOutcome> {
                let mut noise = IncrementStream::new(ens.seed, path_index, k, ref_tau);
                let mut reference = ens.u0.clone();
                let mut ref_stepper = Stepper::new(Scheme::Midpoint, ens.cfg, ens.ops, ref_sc);
                let mut levels: Vec<(Stepper<'_>, State, Vec<f64>, bool)> = coarse_sc
                    .iter()
                    .map(|sc| {
                        (
                            Stepper::new(self.scheme, ens.cfg, ens.ops, *sc),
                            ens.u0.clone(),
                            vec![0.0; k],
                            false,
                        )
                    })
                    .collect();
                let mut out = PathOutcome {
                    reference: vec![vec![f64::NAN; n_obs]; n_cp],
                    coarse: vec![vec![vec![f64::NAN; n_obs]; n_cp]; self.taus.len()],
                };
                let mut db = vec![0.0; k];
                let mut cp = 0;
                for n in 1..=total {
                    noise.fill(&mut db);
                    ref_stepper
                        .step(&mut reference, &db)
                        .map_err(|e| e.at_step(n))?;
                    for (li, (stepper, state, acc, dead)) in levels.iter_mut().enumerate() {
                        acc.iter_mut().zip(&db).for_each(|(a, d)| *a += d);
                        if n % ratios[li] != 0 {
                            continue;
                        }
                        if !*dead {
                            match stepper.step(state, acc) {
                                Ok(_) => {
                                    if let Some(limit) = ens.blowup_norm {
                                        if state.norm().is_nan() || state.norm() > limit {
                                            *dead = true;
                                        }
                                    }
                                }
                                Err(e)
                                    if self.scheme == Scheme::EulerMaruyama && e.is_numerical() =>
                                {
                                    *dead = true
                                }
                                Err(e) => return Err(e.at_step(n / ratios[li])),
                            }
                        }
                        acc.iter_mut().for_each(|a| *a = 0.0);
                    }
                    if n == checkpoint_steps[cp] {
                        for (oi, obs) in observables.iter().enumerate() {
                            out.reference[cp][oi] = evaluate(obs, &reference);
                            for (li, (_, state, _, dead)) in levels.iter().enumerate() {
                                if !*dead {
                                    out.coarse[li][cp][oi] = evaluate(obs, state);
                                }
                            }
                        }
                        cp += 1;
                    }
                    // once every coarse run has aborted no further error is measurable
                    if levels.iter().all(|l| l.3) {
                        break;
                    }
                }
                Ok(out)
            });
        let outcomes: Vec<PathOutcome> = outcomes.into_iter().collect::<Result<_>>()?;

        let mut entries = Vec::new();
        for (cp, &t) in self.checkpoints.iter().enumerate() {
            for (li, &tau) in self.taus.iter().enumerate() {
                for (oi, obs) in observables.iter().enumerate() {
                    let mut diffs = Vec::with_capacity(outcomes.len());
                    let mut refs = Vec::with_capacity(outcomes.len());
                    for o in &outcomes {
                        if !o.reference[cp][oi].is_nan() {
                            refs.push(o.reference[cp][oi]);
                        }
                        let c = o.coarse[li][cp][oi];
                        if !c.is_nan() {
                            diffs.push(c - o.reference[cp][oi]);
                        }
                    }
                    let aborted = outcomes.len() - diffs.len();
                    let (bias, stderr) = match diffs.len() {
                        0 => (f64::NAN, f64::NAN),
                        1 => (diffs[0], f64::NAN),
                        _ => ensemble_mean(&diffs)?,
                    };
                    let reference_mean = if refs.is_empty() {
                        f64::NAN
                    } else {
                        pairwise_sum(&refs) / refs.len() as f64
                    };
                    entries.push(WeakErrorEntry {
                        t,
                        tau,
                        observable: obs.name().to_string(),
                        error: bias.abs(),
                        bias,
                        stderr,
                        reference_mean,
                        aborted,
                    });
                }
            }
        }
        Ok(WeakErrorTable {
            reference_tau: ref_tau,
            entries,
        })
    }
}

/// `|E f(U_scheme(T)) - E f(U_ref(T))|` for a single coarse step.
#[allow(clippy::too_many_arguments)]
pub fn weak_error(
    ens: &Ensemble<'_>,
    scheme: Scheme,
    tau: f64,
    refinement: u32,
    t_end: f64,
    obs: &Observable,
) -> Result<f64> {
    let plan = WeakErrorPlan {
        scheme,
        taus: vec![tau],
        refinement,
        checkpoints: vec![t_end],
    };
    let table = plan.run(ens, std::slice::from_ref(obs))?;
    Ok(table.entries[0].error)
}

/// Monte-Carlo estimate of `E ||U^1 - U^0||^{2 gamma}` after one step of size
/// `tau`. With `substeps = 2^r > 1` the step is covered by `2^r` midpoint
/// substeps, a proxy for the exact semi-discrete flow.
pub fn increment_moment(
    ens: &Ensemble<'_>,
    scheme: Scheme,
    tau: f64,
    gamma: u32,
    refinement: u32,
) -> Result<f64> {
    if !(gamma == 1 || gamma == 2) {
        return Err(Error::Input(format!("gamma must be 1 or 2, got {gamma}")));
    }
    let spec_for = |path_index| PathSpec {
        seed: ens.seed,
        path_index,
        k: ens.cfg.k(),
        tau,
        refinement,
        n_steps: 1,
    };
    let level = if refinement == 0 {
        Level::Coarse
    } else {
        Level::Fine
    };
    let sc = ens.stepper_config(tau / (1u64 << refinement) as f64)?;
    let values = ens.exec.map_paths(ens.n_paths, |i| -> Result<f64> {
        let t = integrate(
            scheme,
            ens.cfg,
            ens.ops,
            &sc,
            &ens.u0,
            &spec_for(i),
            level,
            &mut [],
            IntegrateOptions::default(),
        )?;
        Ok(t.final_state.distance(&ens.u0).powi(2 * gamma as i32))
    });
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    Ok(pairwise_sum(&values) / values.len() as f64)
}

/// Normalized uniform initial state, the default starting point.
pub fn uniform_start(cfg: &LatticeConfig) -> State {
    initial_state(cfg, &InitialCondition::Uniform).expect("uniform data is never degenerate")
}
