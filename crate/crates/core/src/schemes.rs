//! Time steppers.
//!
//! The implicit midpoint scheme is the conservative one. Its linear part
//! (stencil plus the noise diagonal) goes into a complex tridiagonal solve and
//! only the cubic term is fixed-point iterated; plain functional iteration on
//! the whole relation contracts with factor about `tau/h^2` and diverges at
//! the step sizes of interest. Euler–Maruyama and implicit Euler act on the
//! Itô form and serve as non-conservative baselines.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};
use crate::lattice::{ito_drift_into, laplacian_into, LatticeConfig, NoiseOperators, State};
use crate::noise::{BrownianPath, Level, PathSpec};

const STAGNATION_LIMIT: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub tau: f64,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
}

impl StepperConfig {
    pub const DEFAULT_FP_TOL: f64 = 1e-12;
    pub const DEFAULT_FP_MAX_ITERS: usize = 100;

    pub fn new(tau: f64) -> Result<Self> {
        if !(tau.is_finite() && tau > 0.0 && tau < 1.0) {
            return Err(Error::Input(format!(
                "time step must lie in (0, 1), got {tau}"
            )));
        }
        Ok(Self {
            tau,
            fp_tol: Self::DEFAULT_FP_TOL,
            fp_max_iters: Self::DEFAULT_FP_MAX_ITERS,
        })
    }

    pub fn with_tolerance(mut self, fp_tol: f64, fp_max_iters: usize) -> Self {
        self.fp_tol = fp_tol;
        self.fp_max_iters = fp_max_iters;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub state: State,
    pub fp_iters: usize,
    pub fp_residual: f64,
}

/// Iteration statistics for one in-place step.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepInfo {
    pub fp_iters: usize,
    pub fp_residual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Scheme {
    Midpoint,
    EulerMaruyama,
    ImplicitEuler,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [
        Scheme::Midpoint,
        Scheme::EulerMaruyama,
        Scheme::ImplicitEuler,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Midpoint => "midpoint",
            Scheme::EulerMaruyama => "euler_maruyama",
            Scheme::ImplicitEuler => "implicit_euler",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "midpoint" | "mp" => Ok(Scheme::Midpoint),
            "euler_maruyama" | "em" => Ok(Scheme::EulerMaruyama),
            "implicit_euler" | "ie" => Ok(Scheme::ImplicitEuler),
            other => Err(Error::Input(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Thomas factorization of a tridiagonal matrix with diagonal `diag` and a
/// constant value `off` on both off-diagonals.
#[derive(Debug, Clone, Default)]
pub struct TridiagFactor {
    off: Complex64,
    /// Modified super-diagonal `c'_j`.
    upper: Vec<Complex64>,
    /// Reciprocal of the modified pivots.
    inv_pivot: Vec<Complex64>,
}

impl TridiagFactor {
    pub fn new(diag: &[Complex64], off: Complex64) -> Result<Self> {
        let mut f = Self::default();
        f.refactor(diag, off)?;
        Ok(f)
    }

    pub fn refactor(&mut self, diag: &[Complex64], off: Complex64) -> Result<()> {
        let n = diag.len();
        self.off = off;
        self.upper.resize(n, Complex64::new(0.0, 0.0));
        self.inv_pivot.resize(n, Complex64::new(0.0, 0.0));
        let mut prev_upper = Complex64::new(0.0, 0.0);
        for j in 0..n {
            let pivot = if j == 0 {
                diag[0]
            } else {
                diag[j] - off * prev_upper
            };
            if pivot.norm() == 0.0 || !pivot.is_finite() {
                return Err(Error::Numerical(format!(
                    "zero pivot in tridiagonal solve at row {j}"
                )));
            }
            let inv = pivot.inv();
            self.inv_pivot[j] = inv;
            prev_upper = off * inv;
            self.upper[j] = prev_upper;
        }
        Ok(())
    }

    pub fn solve_into(&self, rhs: &[Complex64], x: &mut [Complex64]) {
        let n = rhs.len();
        if n == 0 {
            return;
        }
        x[0] = rhs[0] * self.inv_pivot[0];
        for j in 1..n {
            x[j] = (rhs[j] - self.off * x[j - 1]) * self.inv_pivot[j];
        }
        for j in (0..n - 1).rev() {
            let next = x[j + 1];
            x[j] -= self.upper[j] * next;
        }
    }
}

/// Solves `T x = rhs` for the tridiagonal `T` with diagonal `diag` and constant
/// off-diagonal `off`, by Thomas elimination.
pub fn solve_tridiag_plus_diag(
    diag: &[Complex64],
    off: Complex64,
    rhs: &[Complex64],
) -> Result<Vec<Complex64>> {
    check_len(diag.len(), rhs.len())?;
    let f = TridiagFactor::new(diag, off)?;
    let mut x = vec![Complex64::new(0.0, 0.0); rhs.len()];
    f.solve_into(rhs, &mut x);
    Ok(x)
}

/// Reusable stepper with preallocated work buffers.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    scheme: Scheme,
    cfg: &'a LatticeConfig,
    ops: &'a NoiseOperators,
    sc: StepperConfig,
    zeta: Vec<f64>,
    u: Vec<Complex64>,
    x: Vec<Complex64>,
    x_next: Vec<Complex64>,
    rhs0: Vec<Complex64>,
    rhs: Vec<Complex64>,
    diag: Vec<Complex64>,
    tmp: Vec<Complex64>,
    factor: TridiagFactor,
}

impl<'a> Stepper<'a> {
    pub fn new(
        scheme: Scheme,
        cfg: &'a LatticeConfig,
        ops: &'a NoiseOperators,
        sc: StepperConfig,
    ) -> Self {
        let m = cfg.m();
        let zero = vec![Complex64::new(0.0, 0.0); m];
        Self {
            scheme,
            cfg,
            ops,
            sc,
            zeta: vec![0.0; m],
            u: zero.clone(),
            x: zero.clone(),
            x_next: zero.clone(),
            rhs0: zero.clone(),
            rhs: zero.clone(),
            diag: zero.clone(),
            tmp: zero,
            factor: TridiagFactor::default(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn config(&self) -> &StepperConfig {
        &self.sc
    }

    /// Advances `state` by one step driven by `dbeta`.
    pub fn step(&mut self, state: &mut State, dbeta: &[f64]) -> Result<StepInfo> {
        self.step_with_guess(state, dbeta, None)
    }

    /// As [`Stepper::step`], starting the fixed-point iteration from `guess`
    /// instead of the current state (implicit schemes only).
    pub fn step_with_guess(
        &mut self,
        state: &mut State,
        dbeta: &[f64],
        guess: Option<&State>,
    ) -> Result<StepInfo> {
        check_len(self.cfg.m(), state.len())?;
        check_len(self.ops.k(), dbeta.len())?;
        self.ops.zeta_into(dbeta, &mut self.zeta);
        state.write_complex(&mut self.u);
        let info = match self.scheme {
            Scheme::Midpoint => self.midpoint(guess)?,
            Scheme::ImplicitEuler => self.implicit_euler(guess)?,
            Scheme::EulerMaruyama => self.euler_maruyama()?,
        };
        state.assign_complex(&self.x);
        Ok(info)
    }

    fn midpoint(&mut self, guess: Option<&State>) -> Result<StepInfo> {
        let a = self.sc.tau / (self.cfg.h() * self.cfg.h());
        let half_i = Complex64::new(0.0, 0.5);
        for (d, z) in self.diag.iter_mut().zip(&self.zeta) {
            *d = Complex64::new(1.0, 0.0) - half_i * (-2.0 * a + z);
        }
        self.factor.refactor(&self.diag, -half_i * a)?;
        laplacian_into(&self.u, &mut self.tmp);
        for j in 0..self.u.len() {
            let lin = self.tmp[j] * a + self.u[j] * self.zeta[j];
            self.rhs0[j] = self.u[j] + half_i * lin;
        }
        let lt = self.cfg.lambda() * self.sc.tau;
        self.fixed_point(guess, |u, x, j| {
            let m = (u[j] + x[j]) * 0.5;
            Complex64::i() * m * (lt * m.norm_sqr())
        })
    }

    fn implicit_euler(&mut self, guess: Option<&State>) -> Result<StepInfo> {
        let a = self.sc.tau / (self.cfg.h() * self.cfg.h());
        let tau = self.sc.tau;
        for ((d, z), e) in self.diag.iter_mut().zip(&self.zeta).zip(self.ops.ehat()) {
            *d = Complex64::new(1.0 + tau * e, 2.0 * a - z);
        }
        self.factor.refactor(&self.diag, Complex64::new(0.0, -a))?;
        self.rhs0.copy_from_slice(&self.u);
        let lt = self.cfg.lambda() * tau;
        self.fixed_point(guess, |_, x, j| {
            Complex64::i() * x[j] * (lt * x[j].norm_sqr())
        })
    }

    /// Iterates `x <- T^{-1} (rhs0 + g(x))` until successive iterates agree to `fp_tol`.
    fn fixed_point<G>(&mut self, guess: Option<&State>, g: G) -> Result<StepInfo>
    where
        G: Fn(&[Complex64], &[Complex64], usize) -> Complex64,
    {
        match guess {
            Some(s) => s.write_complex(&mut self.x),
            None => self.x.copy_from_slice(&self.u),
        }
        let mut best = f64::INFINITY;
        let mut stalled = 0;
        let mut residual = f64::INFINITY;
        for iter in 1..=self.sc.fp_max_iters {
            for j in 0..self.x.len() {
                self.rhs[j] = self.rhs0[j] + g(&self.u, &self.x, j);
            }
            self.factor.solve_into(&self.rhs, &mut self.x_next);
            residual = self
                .x_next
                .iter()
                .zip(&self.x)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            std::mem::swap(&mut self.x, &mut self.x_next);
            if !residual.is_finite() {
                return Err(Error::Numerical("non-finite fixed-point iterate".into()));
            }
            if residual <= self.sc.fp_tol {
                return Ok(StepInfo {
                    fp_iters: iter,
                    fp_residual: residual,
                });
            }
            if residual < best {
                best = residual;
                stalled = 0;
            } else {
                stalled += 1;
                if stalled >= STAGNATION_LIMIT {
                    return Err(Error::NoConvergence {
                        iters: iter,
                        residual,
                    });
                }
            }
        }
        Err(Error::NoConvergence {
            iters: self.sc.fp_max_iters,
            residual,
        })
    }

    fn euler_maruyama(&mut self) -> Result<StepInfo> {
        ito_drift_into(self.cfg, self.ops, &self.u, &mut self.tmp);
        for j in 0..self.u.len() {
            self.x[j] =
                self.u[j] + self.tmp[j] * self.sc.tau + Complex64::i() * self.u[j] * self.zeta[j];
        }
        if self.x.iter().any(|z| !z.is_finite()) {
            return Err(Error::Numerical("Euler-Maruyama iterate overflowed".into()));
        }
        Ok(StepInfo::default())
    }
}

fn one_step(
    scheme: Scheme,
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    sc: &StepperConfig,
    u: &State,
    dbeta: &[f64],
) -> Result<StepRecord> {
    let mut stepper = Stepper::new(scheme, cfg, ops, *sc);
    let mut state = u.clone();
    let info = stepper.step(&mut state, dbeta)?;
    Ok(StepRecord {
        state,
        fp_iters: info.fp_iters,
        fp_residual: info.fp_residual,
    })
}

/// One step of the implicit midpoint scheme.
pub fn step_midpoint(
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    sc: &StepperConfig,
    u: &State,
    dbeta: &[f64],
) -> Result<StepRecord> {
    one_step(Scheme::Midpoint, cfg, ops, sc, u, dbeta)
}

pub fn step_euler_maruyama(
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    sc: &StepperConfig,
    u: &State,
    dbeta: &[f64],
) -> Result<State> {
    one_step(Scheme::EulerMaruyama, cfg, ops, sc, u, dbeta).map(|r| r.state)
}

pub fn step_implicit_euler(
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    sc: &StepperConfig,
    u: &State,
    dbeta: &[f64],
) -> Result<StepRecord> {
    one_step(Scheme::ImplicitEuler, cfg, ops, sc, u, dbeta)
}

/// Per-step callback. `n = 0` is the initial state.
pub trait Observer {
    fn observe(&mut self, n: usize, u: &State);
}

impl<F: FnMut(usize, &State)> Observer for F {
    fn observe(&mut self, n: usize, u: &State) {
        self(n, u)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct IntegrateOptions {
    /// Abort with [`Error::Blowup`] once `||U||` exceeds this value.
    pub blowup_norm: Option<f64>,
    pub keep_trajectory: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub final_state: State,
    pub steps: usize,
    pub fp_iters: usize,
    pub max_fp_residual: f64,
    /// All states `U^0..U^N` when requested.
    pub states: Option<Vec<State>>,
}

/// Advances `u0` through every increment of `path` at `level`; `sc.tau` must
/// match the step of that level.
#[allow(clippy::too_many_arguments)]
pub fn integrate(
    scheme: Scheme,
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    sc: &StepperConfig,
    u0: &State,
    path: &PathSpec,
    level: Level,
    observers: &mut [&mut dyn Observer],
    opts: IntegrateOptions,
) -> Result<Trajectory> {
    check_len(cfg.m(), u0.len())?;
    check_len(cfg.k(), path.k)?;
    let (dt, n_steps) = match level {
        Level::Coarse => (path.tau, path.n_steps),
        Level::Fine => (path.fine_tau(), path.n_steps * path.fine_per_coarse()),
    };
    if (dt - sc.tau).abs() > 1e-15 * dt {
        return Err(Error::Input(format!(
            "stepper tau {} does not match path step {dt}",
            sc.tau
        )));
    }
    let mut noise = BrownianPath::new(path)?;
    let mut stepper = Stepper::new(scheme, cfg, ops, *sc);
    let mut u = u0.clone();
    let mut db = vec![0.0; cfg.k()];
    let mut states = opts.keep_trajectory.then(|| vec![u.clone()]);
    let (mut fp_iters, mut max_res) = (0usize, 0.0f64);
    for obs in observers.iter_mut() {
        obs.observe(0, &u);
    }
    for n in 1..=n_steps {
        match level {
            Level::Coarse => noise.next_coarse(&mut db),
            Level::Fine => noise.next_fine(&mut db),
        }
        let info = stepper.step(&mut u, &db).map_err(|e| e.at_step(n))?;
        fp_iters += info.fp_iters;
        max_res = max_res.max(info.fp_residual);
        if let Some(limit) = opts.blowup_norm {
            let norm = u.norm();
            if norm.is_nan() || norm > limit {
                return Err(Error::Blowup { step: n, norm });
            }
        }
        for obs in observers.iter_mut() {
            obs.observe(n, &u);
        }
        if let Some(s) = states.as_mut() {
            s.push(u.clone());
        }
    }
    Ok(Trajectory {
        final_state: u,
        steps: n_steps,
        fp_iters,
        max_fp_residual: max_res,
        states,
    })
}
