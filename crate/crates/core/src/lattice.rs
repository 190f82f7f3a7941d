//! Spatial discretization of the stochastic NLS on `[0, 1]` with Dirichlet
//! boundary: grid, second-difference stencil, Karhunen–Loève noise
//! eigenstructure, initial data, and the drift/diffusion pieces every
//! stepper shares.
//!
//! The state is kept as paired real vectors `(P, Q)`; the complex view is
//! only a convenience for the steppers.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;

use crate::error::{check_len, Error, Result};

/// Grid and noise parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    m: usize,
    k: usize,
    h: f64,
    lambda: f64,
    eta: Vec<f64>,
}

impl LatticeConfig {
    /// Builds a configuration with explicit noise amplitudes `eta` (length `k`).
    pub fn new(m: usize, k: usize, lambda: f64, eta: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Input("grid size M must be positive".into()));
        }
        if k == 0 {
            return Err(Error::Input("noise truncation K must be positive".into()));
        }
        if m > k {
            return Err(Error::Input(format!("need M <= K, got M={m}, K={k}")));
        }
        if lambda != 1.0 && lambda != -1.0 {
            return Err(Error::Input(format!(
                "lambda must be +1 or -1, got {lambda}"
            )));
        }
        check_len(k, eta.len())?;
        if let Some(bad) = eta.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(Error::Input(format!(
                "noise amplitudes must be positive, got {bad}"
            )));
        }
        Ok(Self {
            m,
            k,
            h: 1.0 / (m as f64 + 1.0),
            lambda,
            eta,
        })
    }

    /// `eta_k = k^-decay`; `decay = 4` is the usual choice.
    pub fn with_decay(m: usize, k: usize, lambda: f64, decay: f64) -> Result<Self> {
        let eta = (1..=k).map(|i| (i as f64).powf(-decay)).collect();
        Self::new(m, k, lambda, eta)
    }

    /// Focusing lattice with `eta_k = k^-4`.
    pub fn focusing(m: usize, k: usize) -> Result<Self> {
        Self::with_decay(m, k, 1.0, 4.0)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    /// Interior node `x_j = j h`, `j = 1..=M`.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 * self.h
    }
}

/// Lattice state `U = P + iQ`.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl State {
    pub fn zeros(m: usize) -> Self {
        Self {
            p: vec![0.0; m],
            q: vec![0.0; m],
        }
    }

    pub fn new(p: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        check_len(p.len(), q.len())?;
        Ok(Self { p, q })
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// `||U||^2 = sum p_m^2 + q_m^2`.
    pub fn charge(&self) -> f64 {
        self.p.iter().zip(&self.q).map(|(p, q)| p * p + q * q).sum()
    }

    pub fn norm(&self) -> f64 {
        self.charge().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.p.iter().chain(&self.q).all(|v| v.is_finite())
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.p
            .iter()
            .zip(&self.q)
            .map(|(&re, &im)| Complex64::new(re, im))
            .collect()
    }

    pub fn from_complex(u: &[Complex64]) -> Self {
        Self {
            p: u.iter().map(|z| z.re).collect(),
            q: u.iter().map(|z| z.im).collect(),
        }
    }

    pub(crate) fn write_complex(&self, out: &mut [Complex64]) {
        for ((o, &re), &im) in out.iter_mut().zip(&self.p).zip(&self.q) {
            *o = Complex64::new(re, im);
        }
    }

    pub(crate) fn assign_complex(&mut self, u: &[Complex64]) {
        for ((p, q), z) in self.p.iter_mut().zip(self.q.iter_mut()).zip(u) {
            *p = z.re;
            *q = z.im;
        }
    }

    /// Euclidean distance in `C^M`.
    pub fn distance(&self, other: &State) -> f64 {
        self.p
            .iter()
            .zip(&self.q)
            .zip(other.p.iter().zip(&other.q))
            .map(|((p, q), (op, oq))| (p - op).powi(2) + (q - oq).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Real coordinates `(P; Q)` stacked into a `2M` vector.
    pub fn to_real(&self) -> Vec<f64> {
        let mut z = self.p.clone();
        z.extend_from_slice(&self.q);
        z
    }

    pub fn from_real(z: &[f64]) -> Result<Self> {
        if !z.len().is_multiple_of(2) {
            return Err(Error::Input(
                "real coordinate vector must have even length".into(),
            ));
        }
        let m = z.len() / 2;
        Ok(Self {
            p: z[..m].to_vec(),
            q: z[m..].to_vec(),
        })
    }
}

/// Noise eigenstructure sampled on the grid.
#[derive(Debug, Clone)]
pub struct NoiseOperators {
    m: usize,
    k: usize,
    /// `e_k(x_j)`, row-major `M x K`.
    emk: Vec<f64>,
    /// `sqrt(eta_k)`.
    lambda: Vec<f64>,
    /// Diagonal of `E-hat = 1/2 sum_k eta_k E_k^2`.
    ehat: Vec<f64>,
    /// `e_k(x_j) sqrt(eta_k)`, row-major, used to form `zeta`.
    weights: Vec<f64>,
}

impl NoiseOperators {
    pub fn new(cfg: &LatticeConfig) -> Self {
        let (m, k) = (cfg.m(), cfg.k());
        let mut emk = Vec::with_capacity(m * k);
        for j in 1..=m {
            let x = cfg.node(j);
            for kk in 1..=k {
                emk.push(SQRT_2 * (kk as f64 * PI * x).sin());
            }
        }
        let lambda: Vec<f64> = cfg.eta().iter().map(|e| e.sqrt()).collect();
        let ehat = (0..m)
            .map(|j| {
                0.5 * (0..k)
                    .map(|kk| cfg.eta()[kk] * emk[j * k + kk].powi(2))
                    .sum::<f64>()
            })
            .collect();
        let weights = (0..m * k).map(|i| emk[i] * lambda[i % k]).collect();
        Self {
            m,
            k,
            emk,
            lambda,
            ehat,
            weights,
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// `e_k(x_j)` with one-based `j` and `k`.
    pub fn emk(&self, j: usize, k: usize) -> f64 {
        self.emk[(j - 1) * self.k + (k - 1)]
    }

    pub fn sqrt_eta(&self) -> &[f64] {
        &self.lambda
    }

    pub fn ehat(&self) -> &[f64] {
        &self.ehat
    }

    /// Column `k` (one-based) of `E_MK`: the samples `(e_k(x_1), ..., e_k(x_M))`.
    pub fn mode(&self, k: usize) -> Vec<f64> {
        (1..=self.m).map(|j| self.emk(j, k)).collect()
    }

    pub(crate) fn zeta_into(&self, dbeta: &[f64], out: &mut [f64]) {
        for (row, z) in self.weights.chunks_exact(self.k).zip(out.iter_mut()) {
            *z = row.iter().zip(dbeta).map(|(w, b)| w * b).sum();
        }
    }
}

/// `e_k(x) = sqrt(2) sin(k pi x)`.
pub fn eigenfunction(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::Input("mode index must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Input(format!("x = {x} outside [0, 1]")));
    }
    Ok(SQRT_2 * (k as f64 * PI * x).sin())
}

/// Applies the `(1, -2, 1)` stencil with zero Dirichlet padding. No `1/h^2`.
pub fn apply_laplacian(cfg: &LatticeConfig, v: &[Complex64]) -> Result<Vec<Complex64>> {
    check_len(cfg.m(), v.len())?;
    let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
    laplacian_into(v, &mut out);
    Ok(out)
}

pub(crate) fn laplacian_into<T>(v: &[T], out: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Neg<Output = T>,
{
    let n = v.len();
    for j in 0..n {
        let mut s = -(v[j] + v[j]);
        if j > 0 {
            s = s + v[j - 1];
        }
        if j + 1 < n {
            s = s + v[j + 1];
        }
        out[j] = s;
    }
}

/// Real-valued stencil application.
pub fn laplacian_real(v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    laplacian_into(v, &mut out);
    out
}

/// Itô drift `b(U) = i/h^2 A U + i lambda F(U) U - E-hat U`.
pub fn ito_drift(cfg: &LatticeConfig, ops: &NoiseOperators, u: &State) -> Result<State> {
    check_len(cfg.m(), u.len())?;
    let uc = u.to_complex();
    let mut b = vec![Complex64::new(0.0, 0.0); uc.len()];
    ito_drift_into(cfg, ops, &uc, &mut b);
    Ok(State::from_complex(&b))
}

pub(crate) fn ito_drift_into(
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    u: &[Complex64],
    out: &mut [Complex64],
) {
    let inv_h2 = 1.0 / (cfg.h() * cfg.h());
    laplacian_into(u, out);
    for ((o, z), e) in out.iter_mut().zip(u).zip(ops.ehat()) {
        let lap = *o * inv_h2;
        let cubic = *z * (cfg.lambda() * z.norm_sqr());
        *o = Complex64::i() * (lap + cubic) - *z * *e;
    }
}

/// `zeta_j = sum_k sqrt(eta_k) e_k(x_j) dbeta_k`, so that `Z(U) dbeta = diag(zeta) U`.
pub fn diffusion_vector(ops: &NoiseOperators, dbeta: &[f64]) -> Result<Vec<f64>> {
    check_len(ops.k(), dbeta.len())?;
    let mut zeta = vec![0.0; ops.m()];
    ops.zeta_into(dbeta, &mut zeta);
    Ok(zeta)
}

/// Initial data. Identifiers 1..=5 are the standard test family; every
/// choice is sampled at the interior nodes and rescaled to unit charge.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition {
    /// `(1 + i)/sqrt(2)`
    Diagonal,
    /// `1`
    Uniform,
    /// `2x`
    Linear,
    /// `c (1 - exp(x(1 - x)))`, vanishing at both ends
    Bump,
    /// `sech(x/sqrt 2) exp(i x/2)`
    Soliton,
    /// Arbitrary samples at `x_1..x_M`.
    Samples(Vec<Complex64>),
}

impl InitialCondition {
    pub fn from_id(id: u32) -> Result<Self> {
        Ok(match id {
            1 => Self::Diagonal,
            2 => Self::Uniform,
            3 => Self::Linear,
            4 => Self::Bump,
            5 => Self::Soliton,
            other => {
                return Err(Error::Input(format!(
                    "unknown initial condition id {other}"
                )))
            }
        })
    }

    pub fn id(&self) -> Option<u32> {
        match self {
            Self::Diagonal => Some(1),
            Self::Uniform => Some(2),
            Self::Linear => Some(3),
            Self::Bump => Some(4),
            Self::Soliton => Some(5),
            Self::Samples(_) => None,
        }
    }

    fn sample(&self, x: f64) -> Complex64 {
        match self {
            Self::Diagonal => Complex64::new(1.0, 1.0) / SQRT_2,
            Self::Uniform => Complex64::new(1.0, 0.0),
            Self::Linear => Complex64::new(2.0 * x, 0.0),
            Self::Bump => {
                let c = 1.0 - (PI / 2.0 * (0.25f64.exp() - 1.0)).sqrt();
                Complex64::new(c * (1.0 - (x * (1.0 - x)).exp()), 0.0)
            }
            Self::Soliton => {
                let amp = 1.0 / (x / SQRT_2).cosh();
                Complex64::from_polar(amp, x / 2.0)
            }
            Self::Samples(_) => unreachable!("samples are not evaluated pointwise"),
        }
    }
}

/// Samples the initial condition and normalizes the discrete vector to `||U|| = 1`.
pub fn initial_state(cfg: &LatticeConfig, ic: &InitialCondition) -> Result<State> {
    let raw: Vec<Complex64> = match ic {
        InitialCondition::Samples(v) => {
            check_len(cfg.m(), v.len())?;
            v.clone()
        }
        other => (1..=cfg.m()).map(|j| other.sample(cfg.node(j))).collect(),
    };
    let norm = raw.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(Error::Input(
            "initial data has zero or non-finite norm".into(),
        ));
    }
    let scaled: Vec<Complex64> = raw.iter().map(|z| z / norm).collect();
    Ok(State::from_complex(&scaled))
}
