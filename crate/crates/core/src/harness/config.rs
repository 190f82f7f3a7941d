//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Lists are comma separated,
//! reals accept `2^-7`, integer lists accept `a..b` (inclusive). Scheme and
//! observable names prefix override keys: `implicit_euler.T = 3`,
//! `euler_maruyama.tau = 2^-10, 2^-11`, `euler_maruyama.checkpoints = 2^-6`,
//! `exp_neg_pnorm4.T = 140`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::HarnessError;
use crate::estimators::{step_count, Observable};
use crate::lattice::InitialCondition;
use crate::schemes::{Scheme, StepperConfig};

type Result<T> = std::result::Result<T, HarnessError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Charge,
    Ergodic,
    WeakOrder,
    LongtimeWeak,
    Hormander,
    Symplectic,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Charge,
        ExperimentKind::Ergodic,
        ExperimentKind::WeakOrder,
        ExperimentKind::LongtimeWeak,
        ExperimentKind::Hormander,
        ExperimentKind::Symplectic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Charge => "charge",
            ExperimentKind::Ergodic => "ergodic",
            ExperimentKind::WeakOrder => "weak_order",
            ExperimentKind::LongtimeWeak => "longtime_weak",
            ExperimentKind::Hormander => "hormander",
            ExperimentKind::Symplectic => "symplectic",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            ExperimentKind::Charge => "E||U^n||^2 - 1 time series per scheme and step",
            ExperimentKind::Ergodic => "running time averages per initial condition",
            ExperimentKind::WeakOrder => {
                "weak error against a coupled fine reference, with order fit"
            }
            ExperimentKind::LongtimeWeak => {
                "weak error at increasing horizons, with blow-up tracking"
            }
            ExperimentKind::Hormander => "rank of noise fields, brackets and drift at z*",
            ExperimentKind::Symplectic => {
                "wedge-sum drift and multisymplectic residual along paths"
            }
        }
    }

    fn needs_time_grid(self) -> bool {
        !matches!(self, ExperimentKind::Hormander)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// One scheme with its resolved step list and horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeRun {
    pub scheme: Scheme,
    pub taus: Vec<f64>,
    pub t_end: f64,
    /// Long-time weak-error horizons, all `<= t_end`.
    pub checkpoints: Vec<f64>,
}

/// One observable with its resolved horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservableRun {
    pub observable: Observable,
    pub t_end: f64,
}

/// A validated experiment with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub m: usize,
    pub k: usize,
    pub lambda: f64,
    pub eta_decay: f64,
    pub taus: Vec<f64>,
    pub t_end: f64,
    pub schemes: Vec<SchemeRun>,
    pub observables: Vec<ObservableRun>,
    pub initial: Vec<u32>,
    pub n_paths: usize,
    pub seed: u64,
    pub refinement: u32,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    /// Output every `stride`-th step of time series.
    pub stride: usize,
    /// Default long-time weak-error horizons.
    pub checkpoints: Vec<f64>,
    pub blowup_norm: f64,
    /// Grid sizes scanned by the Hörmander experiment.
    pub m_values: Vec<usize>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn h(&self) -> f64 {
        1.0 / (self.m + 1) as f64
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Canonical `key = value` lines; parsing them reproduces `self`.
    pub fn echo(&self) -> Vec<(String, String)> {
        let reals = |v: &[f64]| v.iter().map(|&x| real(x)).collect::<Vec<_>>().join(", ");
        let ints = |v: &[usize]| {
            v.iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        let mut out = vec![
            ("experiment".to_string(), self.experiment.to_string()),
            ("M".into(), self.m.to_string()),
            ("K".into(), self.k.to_string()),
            ("lambda".into(), real(self.lambda)),
            ("eta_decay".into(), real(self.eta_decay)),
        ];
        if self.experiment.needs_time_grid() {
            out.push(("tau".into(), reals(&self.taus)));
            out.push(("T".into(), real(self.t_end)));
        }
        let schemes: Vec<&str> = self.schemes.iter().map(|s| s.scheme.name()).collect();
        out.push(("schemes".into(), schemes.join(", ")));
        for s in &self.schemes {
            if s.taus != self.taus {
                out.push((format!("{}.tau", s.scheme.name()), reals(&s.taus)));
            }
            if s.t_end != self.t_end {
                out.push((format!("{}.T", s.scheme.name()), real(s.t_end)));
            }
            if s.checkpoints != self.checkpoints {
                out.push((
                    format!("{}.checkpoints", s.scheme.name()),
                    reals(&s.checkpoints),
                ));
            }
        }
        let obs: Vec<&str> = self
            .observables
            .iter()
            .map(|o| o.observable.name())
            .collect();
        out.push(("observables".into(), obs.join(", ")));
        for o in &self.observables {
            if o.t_end != self.t_end {
                out.push((format!("{}.T", o.observable.name()), real(o.t_end)));
            }
        }
        let initial: Vec<usize> = self.initial.iter().map(|&i| i as usize).collect();
        out.extend([
            ("initial".into(), ints(&initial)),
            ("n_paths".into(), self.n_paths.to_string()),
            ("seed".into(), self.seed.to_string()),
            ("refinement".into(), self.refinement.to_string()),
            ("fp_tol".into(), real(self.fp_tol)),
            ("fp_max_iters".into(), self.fp_max_iters.to_string()),
            ("stride".into(), self.stride.to_string()),
            ("checkpoints".into(), reals(&self.checkpoints)),
            ("blowup_norm".into(), real(self.blowup_norm)),
            ("M_values".into(), ints(&self.m_values)),
        ]);
        if let Some(p) = &self.output {
            out.push(("output".into(), p.display().to_string()));
        }
        out
    }

    pub fn to_text(&self) -> String {
        self.echo()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}

impl FromStr for ExperimentConfig {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        parse_config(s)
    }
}

/// Shortest round-tripping decimal, in exponent form for very small or large magnitudes.
fn real(x: f64) -> String {
    if x != 0.0 && (x.abs() < 1e-3 || x.abs() >= 1e6) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

const KEYS: [&str; 20] = [
    "experiment",
    "M",
    "h",
    "K",
    "lambda",
    "eta_decay",
    "tau",
    "T",
    "schemes",
    "observables",
    "initial",
    "n_paths",
    "seed",
    "refinement",
    "fp_tol",
    "fp_max_iters",
    "stride",
    "checkpoints",
    "blowup_norm",
    "M_values",
];

fn err(key: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::config(key, msg)
}

fn parse_real(key: &str, s: &str) -> Result<f64> {
    let s = s.trim();
    let v = match s.split_once('^') {
        Some((base, exp)) => {
            let b: f64 = base
                .trim()
                .parse()
                .map_err(|_| err(key, format!("`{s}` is not a number")))?;
            let e: f64 = exp
                .trim()
                .parse()
                .map_err(|_| err(key, format!("`{s}` is not a number")))?;
            if e.fract() == 0.0 && e.abs() < 1024.0 {
                b.powi(e as i32)
            } else {
                b.powf(e)
            }
        }
        None => s
            .parse()
            .map_err(|_| err(key, format!("`{s}` is not a number")))?,
    };
    if !v.is_finite() {
        return Err(err(key, format!("`{s}` is not finite")));
    }
    Ok(v)
}

fn parse_int<T: FromStr>(key: &str, s: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| err(key, format!("`{}` is not a nonnegative integer", s.trim())))
}

fn items(s: &str) -> impl Iterator<Item = &str> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty())
}

fn parse_reals(key: &str, s: &str) -> Result<Vec<f64>> {
    let v = items(s)
        .map(|t| parse_real(key, t))
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(err(key, "empty list"));
    }
    Ok(v)
}

fn parse_ints(key: &str, s: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for t in items(s) {
        match t.split_once("..") {
            Some((a, b)) => {
                let (a, b): (usize, usize) = (parse_int(key, a)?, parse_int(key, b)?);
                if a > b {
                    return Err(err(key, format!("empty range `{t}`")));
                }
                out.extend(a..=b);
            }
            None => out.push(parse_int(key, t)?),
        }
    }
    if out.is_empty() {
        return Err(err(key, "empty list"));
    }
    Ok(out)
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(err(key, format!("must be positive, got {v}")))
    }
}

/// Parses and validates a configuration, filling defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut kv: BTreeMap<String, String> = BTreeMap::new();
    let mut scheme_over: BTreeMap<String, [Option<String>; 3]> = BTreeMap::new();
    let mut obs_over: BTreeMap<String, String> = BTreeMap::new();
    let mut output = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            err(
                &format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        let (key, value) = (key.trim(), value.trim().to_string());
        if key == "output" {
            output = Some(PathBuf::from(value));
            continue;
        }
        if let Some((prefix, field)) = key.split_once('.') {
            if prefix.parse::<Scheme>().is_ok() {
                let entry = scheme_over.entry(prefix.to_string()).or_default();
                let slot = match field {
                    "tau" => &mut entry[0],
                    "T" => &mut entry[1],
                    "checkpoints" => &mut entry[2],
                    _ => return Err(err(key, "unknown key")),
                };
                if slot.replace(value).is_some() {
                    return Err(err(key, "duplicate key"));
                }
                continue;
            }
            if prefix.parse::<Observable>().is_ok() && field == "T" {
                if obs_over.insert(prefix.to_string(), value).is_some() {
                    return Err(err(key, "duplicate key"));
                }
                continue;
            }
            return Err(err(key, "unknown key"));
        }
        let key = if key == "scheme" { "schemes" } else { key };
        let key = if key == "observable" {
            "observables"
        } else {
            key
        };
        if !KEYS.contains(&key) {
            return Err(err(key, "unknown key"));
        }
        if kv.insert(key.to_string(), value).is_some() {
            return Err(err(key, "duplicate key"));
        }
    }

    let get = |k: &str| kv.get(k).map(String::as_str);
    let experiment: ExperimentKind = get("experiment")
        .ok_or_else(|| err("experiment", "missing"))?
        .parse()
        .map_err(|m: String| err("experiment", m))?;

    let m = match (get("M"), get("h")) {
        (Some(ms), Some(hs)) => {
            let m: usize = parse_int("M", ms)?;
            let h = parse_real("h", hs)?;
            if (h - 1.0 / (m + 1) as f64).abs() > 1e-12 {
                return Err(err(
                    "h",
                    format!("h = {h} is inconsistent with M = {m} (h must be 1/(M+1))"),
                ));
            }
            m
        }
        (Some(ms), None) => parse_int("M", ms)?,
        (None, Some(hs)) => {
            let h = positive("h", parse_real("h", hs)?)?;
            let m = (1.0 / h).round() - 1.0;
            if m < 1.0 || (1.0 / (m + 1.0) - h).abs() > 1e-12 {
                return Err(err(
                    "h",
                    format!("1/h - 1 must be a positive integer, got h = {h}"),
                ));
            }
            m as usize
        }
        (None, None) => 19,
    };
    if m == 0 {
        return Err(err("M", "must be at least 1"));
    }
    let k: usize = get("K")
        .map(|s| parse_int("K", s))
        .transpose()?
        .unwrap_or(30);
    let m_values = match get("M_values") {
        Some(s) => parse_ints("M_values", s)?,
        None => vec![m],
    };
    for &mv in m_values.iter().chain([&m]) {
        if mv == 0 || mv > k {
            let key = if mv == m { "M" } else { "M_values" };
            return Err(err(key, format!("need 1 <= M <= K = {k}, got {mv}")));
        }
    }
    let lambda = get("lambda")
        .map(|s| parse_real("lambda", s))
        .transpose()?
        .unwrap_or(1.0);
    if lambda != 1.0 && lambda != -1.0 {
        return Err(err("lambda", format!("must be 1 or -1, got {lambda}")));
    }
    let eta_decay = get("eta_decay")
        .map(|s| parse_real("eta_decay", s))
        .transpose()?
        .unwrap_or(4.0);

    let needs_grid = experiment.needs_time_grid();
    let taus = match get("tau") {
        Some(s) => parse_reals("tau", s)?,
        None if needs_grid => return Err(err("tau", "missing")),
        None => vec![],
    };
    for &t in &taus {
        if !(t > 0.0 && t < 1.0) {
            return Err(err("tau", format!("steps must lie in (0, 1), got {t}")));
        }
    }
    let t_end = match get("T") {
        Some(s) => positive("T", parse_real("T", s)?)?,
        None if needs_grid => return Err(err("T", "missing")),
        None => 0.0,
    };

    let default_schemes: &[Scheme] = match experiment {
        ExperimentKind::LongtimeWeak => &[Scheme::Midpoint, Scheme::EulerMaruyama],
        _ => &[Scheme::Midpoint],
    };
    let scheme_list: Vec<Scheme> = match get("schemes") {
        Some(s) => items(s)
            .map(|t| {
                t.parse::<Scheme>()
                    .map_err(|e| err("schemes", e.to_string()))
            })
            .collect::<Result<_>>()?,
        None => default_schemes.to_vec(),
    };
    if scheme_list.is_empty() {
        return Err(err("schemes", "empty list"));
    }
    for name in scheme_over.keys() {
        let s: Scheme = name.parse().expect("checked while reading");
        if !scheme_list.contains(&s) {
            return Err(err(
                &format!("{name}.*"),
                "override for a scheme that is not run",
            ));
        }
    }
    if experiment == ExperimentKind::Symplectic
        && scheme_list.iter().any(|s| *s != Scheme::Midpoint)
    {
        return Err(err(
            "schemes",
            "the tangent map is defined for the midpoint scheme only",
        ));
    }
    let mut schemes = Vec::with_capacity(scheme_list.len());
    for scheme in scheme_list {
        let [tau_s, t_s, cp_s] = scheme_over.get(scheme.name()).cloned().unwrap_or_default();
        let key_tau = format!("{}.tau", scheme.name());
        let key_t = format!("{}.T", scheme.name());
        let s_taus = match tau_s {
            Some(s) => parse_reals(&key_tau, &s)?,
            None => taus.clone(),
        };
        let s_t = match t_s {
            Some(s) => positive(&key_t, parse_real(&key_t, &s)?)?,
            None => t_end,
        };
        if needs_grid {
            for &tau in &s_taus {
                step_count(s_t, tau).map_err(|_| {
                    let key = if scheme_over.contains_key(scheme.name()) {
                        key_t.clone()
                    } else {
                        "tau".to_string()
                    };
                    err(&key, format!("T/tau = {s_t}/{tau} is not an integer"))
                })?;
            }
        }
        let key_cp = format!("{}.checkpoints", scheme.name());
        let s_cp = match cp_s {
            Some(s) => parse_reals(&key_cp, &s)?,
            None => vec![],
        };
        schemes.push((
            SchemeRun {
                scheme,
                taus: s_taus,
                t_end: s_t,
                checkpoints: s_cp,
            },
            key_cp,
        ));
    }

    let default_obs: &[&str] = match experiment {
        ExperimentKind::Ergodic => &["pnorm3"],
        ExperimentKind::WeakOrder | ExperimentKind::LongtimeWeak => {
            &["pnorm3", "sin_pnorm4", "exp_neg_pnorm4"]
        }
        _ => &["charge"],
    };
    let obs_names: Vec<String> = match get("observables") {
        Some(s) => items(s).map(str::to_string).collect(),
        None => default_obs.iter().map(|s| s.to_string()).collect(),
    };
    let mut observables = Vec::with_capacity(obs_names.len());
    for name in &obs_names {
        let observable: Observable = name
            .parse()
            .map_err(|e: crate::Error| err("observables", e.to_string()))?;
        let key_t = format!("{name}.T");
        let t = match obs_over.get(name) {
            Some(s) => positive(&key_t, parse_real(&key_t, s)?)?,
            None => t_end,
        };
        if needs_grid {
            for &tau in &taus {
                step_count(t, tau)
                    .map_err(|_| err(&key_t, format!("T/tau = {t}/{tau} is not an integer")))?;
            }
        }
        observables.push(ObservableRun {
            observable,
            t_end: t,
        });
    }
    for name in obs_over.keys() {
        if !obs_names.contains(name) {
            return Err(err(
                &format!("{name}.T"),
                "override for an observable that is not evaluated",
            ));
        }
    }

    let initial: Vec<u32> = match get("initial") {
        Some(s) => parse_ints("initial", s)?
            .into_iter()
            .map(|i| i as u32)
            .collect(),
        None if experiment == ExperimentKind::Ergodic => (1..=5).collect(),
        None => vec![2],
    };
    for &id in &initial {
        InitialCondition::from_id(id).map_err(|e| err("initial", e.to_string()))?;
    }

    let n_paths: usize = get("n_paths")
        .map(|s| parse_int("n_paths", s))
        .transpose()?
        .unwrap_or(500);
    if n_paths < 2 {
        return Err(err("n_paths", "need at least 2 paths"));
    }
    let seed: u64 = get("seed")
        .map(|s| parse_int("seed", s))
        .transpose()?
        .unwrap_or(0);
    let refinement: u32 = get("refinement")
        .map(|s| parse_int("refinement", s))
        .transpose()?
        .unwrap_or(4);
    if refinement > 20 {
        return Err(err("refinement", "at most 20"));
    }
    let fp_tol = match get("fp_tol") {
        Some(s) => positive("fp_tol", parse_real("fp_tol", s)?)?,
        None => StepperConfig::DEFAULT_FP_TOL,
    };
    let fp_max_iters: usize = get("fp_max_iters")
        .map(|s| parse_int("fp_max_iters", s))
        .transpose()?
        .unwrap_or(StepperConfig::DEFAULT_FP_MAX_ITERS);
    if fp_max_iters == 0 {
        return Err(err("fp_max_iters", "must be positive"));
    }
    let stride: usize = get("stride")
        .map(|s| parse_int("stride", s))
        .transpose()?
        .unwrap_or(1);
    if stride == 0 {
        return Err(err("stride", "must be positive"));
    }
    let blowup_norm = match get("blowup_norm") {
        Some(s) => positive("blowup_norm", parse_real("blowup_norm", s)?)?,
        None => 1e3,
    };

    let explicit_checkpoints =
        get("checkpoints").is_some() || experiment != ExperimentKind::LongtimeWeak;
    let checkpoints = match get("checkpoints") {
        Some(s) => parse_reals("checkpoints", s)?,
        None if experiment == ExperimentKind::LongtimeWeak => {
            (1..=10).map(|i| t_end * i as f64 / 10.0).collect()
        }
        None => vec![t_end],
    };
    let schemes: Vec<SchemeRun> = schemes
        .into_iter()
        .map(|(mut s, key)| -> Result<SchemeRun> {
            let (key, own) = if s.checkpoints.is_empty() {
                ("checkpoints".to_string(), false)
            } else {
                (key, true)
            };
            if !own && explicit_checkpoints {
                s.checkpoints = checkpoints
                    .iter()
                    .cloned()
                    .filter(|&c| c <= s.t_end)
                    .collect();
            } else if !own {
                // default: the tenths of this scheme's horizon that every step divides
                s.checkpoints = (1..=10)
                    .map(|i| {
                        if i == 10 {
                            s.t_end
                        } else {
                            s.t_end * i as f64 / 10.0
                        }
                    })
                    .filter(|&c| s.taus.iter().all(|&tau| step_count(c, tau).is_ok()))
                    .collect();
            }
            if experiment == ExperimentKind::LongtimeWeak {
                if s.checkpoints.is_empty() {
                    return Err(err(&key, format!("no checkpoint within T = {}", s.t_end)));
                }
                if s.checkpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(err(&key, "must be strictly increasing"));
                }
                for &c in &s.checkpoints {
                    if !(c > 0.0 && c <= s.t_end) {
                        return Err(err(&key, format!("{c} lies outside (0, T]")));
                    }
                    for &tau in &s.taus {
                        step_count(c, tau).map_err(|_| {
                            err(
                                &key,
                                format!("checkpoint {c} is not a multiple of tau = {tau}"),
                            )
                        })?;
                    }
                }
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;

    if experiment == ExperimentKind::WeakOrder {
        for s in &schemes {
            if s.taus.len() < 3 {
                return Err(err("tau", "an order fit needs at least 3 steps"));
            }
        }
    }
    if matches!(
        experiment,
        ExperimentKind::WeakOrder | ExperimentKind::LongtimeWeak
    ) {
        for s in &schemes {
            let tau_min = s.taus.iter().cloned().fold(f64::INFINITY, f64::min);
            for &tau in &s.taus {
                let ratio = tau / tau_min;
                if ratio.fract() != 0.0 || !(ratio as u64).is_power_of_two() {
                    return Err(err(
                        "tau",
                        format!("{tau} is not the smallest step times a power of two"),
                    ));
                }
            }
        }
    }

    Ok(ExperimentConfig {
        experiment,
        m,
        k,
        lambda,
        eta_decay,
        taus,
        t_end,
        schemes,
        observables,
        initial,
        n_paths,
        seed,
        refinement,
        fp_tol,
        fp_max_iters,
        stride,
        checkpoints,
        blowup_norm,
        m_values,
        output,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key_of(e: HarnessError) -> String {
        match e {
            HarnessError::Config { key, .. } => key,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config("experiment = charge\ntau = 2^-7\nT = 1\n").unwrap();
        assert_eq!(c.m, 19);
        assert_eq!(c.k, 30);
        assert_eq!(c.n_paths, 500);
        assert_eq!(c.refinement, 4);
        assert_eq!(c.fp_tol, 1e-12);
        assert_eq!(c.eta_decay, 4.0);
        assert_eq!(c.taus, vec![2f64.powi(-7)]);
        assert_eq!(c.schemes[0].scheme, Scheme::Midpoint);
        assert_eq!(c.initial, vec![2]);
    }

    #[test]
    fn h_and_m_must_agree() {
        let ok = parse_config("experiment = charge\nM = 19\nh = 0.05\ntau = 0.5\nT = 1").unwrap();
        assert_eq!(ok.m, 19);
        let bad =
            parse_config("experiment = charge\nM = 18\nh = 0.05\ntau = 0.5\nT = 1").unwrap_err();
        assert_eq!(key_of(bad), "h");
        assert_eq!(
            parse_config("experiment = charge\nh = 0.2\ntau = 0.5\nT = 1")
                .unwrap()
                .m,
            4
        );
    }

    #[test]
    fn fractional_step_count_is_rejected() {
        let e = parse_config("experiment = charge\ntau = 0.3\nT = 1").unwrap_err();
        assert_eq!(key_of(e), "tau");
    }

    #[test]
    fn errors_name_the_key() {
        assert_eq!(
            key_of(parse_config("experiment = charge\ntau = 0.5\nT = 1\nbogus = 3").unwrap_err()),
            "bogus"
        );
        assert_eq!(
            key_of(parse_config("experiment = charge\ntau = x\nT = 1").unwrap_err()),
            "tau"
        );
        assert_eq!(
            key_of(parse_config("experiment = nope").unwrap_err()),
            "experiment"
        );
        assert_eq!(key_of(parse_config("tau = 0.5").unwrap_err()), "experiment");
        assert_eq!(
            key_of(parse_config("experiment = charge\nT = 1").unwrap_err()),
            "tau"
        );
        assert_eq!(
            key_of(parse_config("experiment = charge\ntau = 0.5\nT = 1\nn_paths = 1").unwrap_err()),
            "n_paths"
        );
        assert_eq!(
            key_of(parse_config("experiment = charge\ntau = 0.5\nT = 1\nT = 2").unwrap_err()),
            "T"
        );
    }

    #[test]
    fn per_scheme_and_observable_overrides() {
        let text = "experiment = charge\nschemes = midpoint, implicit_euler, euler_maruyama\n\
                    tau = 2^-4, 2^-5\nT = 100\nimplicit_euler.T = 3\n\
                    euler_maruyama.tau = 2^-10, 2^-11\neuler_maruyama.T = 2^-5\n";
        let c = parse_config(text).unwrap();
        assert_eq!(c.schemes[0].t_end, 100.0);
        assert_eq!(c.schemes[1].t_end, 3.0);
        assert_eq!(c.schemes[2].taus, vec![2f64.powi(-10), 2f64.powi(-11)]);
        let e = parse_config("experiment = ergodic\ntau = 2^-6\nT = 20\nobservables = pnorm3, exp_neg_pnorm4\nexp_neg_pnorm4.T = 140").unwrap();
        assert_eq!(e.observables[1].t_end, 140.0);
        assert_eq!(e.initial, vec![1, 2, 3, 4, 5]);
        let bad = parse_config("experiment = charge\ntau = 0.5\nT = 1\nimplicit_euler.T = 3")
            .unwrap_err();
        assert_eq!(key_of(bad), "implicit_euler.*");
    }

    #[test]
    fn echo_roundtrips() {
        let text = "experiment = longtime_weak\ntau = 2^-8\nT = 10\nrefinement = 2\nn_paths = 4\ncheckpoints = 1, 5, 10\noutput = out.csv";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        let h = parse_config("experiment = hormander\nM_values = 2..19").unwrap();
        assert_eq!(h.m_values.len(), 18);
        assert_eq!(parse_config(&h.to_text()).unwrap(), h);
    }
}
