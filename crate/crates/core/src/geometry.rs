//! Geometric diagnostics: the variational (tangent) midpoint map with its
//! wedge-form conservation laws, and the Hörmander bracket rank of the real
//! drift and noise vector fields.

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, Error, Result};
use crate::lattice::{laplacian_real, LatticeConfig, NoiseOperators, State};
use crate::schemes::StepperConfig;

/// Tangent vector `(dP, dQ)` along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentState {
    pub dp: Vec<f64>,
    pub dq: Vec<f64>,
}

impl TangentState {
    pub fn zeros(m: usize) -> Self {
        Self {
            dp: vec![0.0; m],
            dq: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.dp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dp.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dp: self.dp.iter().map(|v| c * v).collect(),
            dq: self.dq.iter().map(|v| c * v).collect(),
        }
    }

    pub fn norm(&self) -> f64 {
        self.dp
            .iter()
            .chain(&self.dq)
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn to_vector(&self) -> DVector<f64> {
        DVector::from_iterator(2 * self.len(), self.dp.iter().chain(&self.dq).copied())
    }

    fn from_vector(v: &DVector<f64>) -> Self {
        let m = v.len() / 2;
        Self {
            dp: v.rows(0, m).iter().copied().collect(),
            dq: v.rows(m, m).iter().copied().collect(),
        }
    }
}

/// Linearization of one midpoint step around its midpoint, factored once and
/// applicable to any number of tangent vectors.
#[derive(Debug, Clone)]
pub struct TangentMap {
    lhs: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rhs: DMatrix<f64>,
}

impl TangentMap {
    /// `base_next` must be the midpoint step from `base` under `dbeta`.
    pub fn new(
        cfg: &LatticeConfig,
        ops: &NoiseOperators,
        sc: &StepperConfig,
        base: &State,
        base_next: &State,
        dbeta: &[f64],
    ) -> Result<Self> {
        let m = cfg.m();
        check_len(m, base.len())?;
        check_len(m, base_next.len())?;
        let zeta = crate::lattice::diffusion_vector(ops, dbeta)?;
        let a = sc.tau / (cfg.h() * cfg.h());
        let lt = cfg.lambda() * sc.tau;

        // J = [[diag(-lt b), -B - diag(lt (2s - al))], [B + diag(lt (2s + al)), diag(lt b)]]
        // with B = a A + diag(zeta), s = |m|^2, al = Re m^2, b = Im m^2.
        let mut jac = DMatrix::<f64>::zeros(2 * m, 2 * m);
        for j in 0..m {
            let mp = 0.5 * (base.p[j] + base_next.p[j]);
            let mq = 0.5 * (base.q[j] + base_next.q[j]);
            let s = mp * mp + mq * mq;
            let al = mp * mp - mq * mq;
            let be = 2.0 * mp * mq;
            let bjj = -2.0 * a + zeta[j];
            jac[(j, j)] = -lt * be;
            jac[(m + j, m + j)] = lt * be;
            jac[(j, m + j)] = -bjj - lt * (2.0 * s - al);
            jac[(m + j, j)] = bjj + lt * (2.0 * s + al);
            for i in [j.wrapping_sub(1), j + 1] {
                if i < m {
                    jac[(j, m + i)] = -a;
                    jac[(m + j, i)] = a;
                }
            }
        }
        let eye = DMatrix::<f64>::identity(2 * m, 2 * m);
        let lhs = (&eye - &jac * 0.5).lu();
        if !lhs.is_invertible() {
            return Err(Error::Numerical("singular tangent linearization".into()));
        }
        Ok(Self {
            lhs,
            rhs: eye + jac * 0.5,
        })
    }

    pub fn apply(&self, xi: &TangentState) -> Result<TangentState> {
        check_len(self.rhs.nrows() / 2, xi.len())?;
        let b = &self.rhs * xi.to_vector();
        let x = self
            .lhs
            .solve(&b)
            .ok_or_else(|| Error::Numerical("singular tangent linearization".into()))?;
        Ok(TangentState::from_vector(&x))
    }
}

/// Advances a tangent vector through the linearized midpoint step.
#[allow(clippy::too_many_arguments)]
pub fn tangent_step_midpoint(
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    sc: &StepperConfig,
    base: &State,
    base_next: &State,
    dbeta: &[f64],
    xi: &TangentState,
) -> Result<TangentState> {
    TangentMap::new(cfg, ops, sc, base, base_next, dbeta)?.apply(xi)
}

/// `omega(xi, eta) = sum_j xi_p eta_q - xi_q eta_p`.
pub fn wedge_sum(xi: &TangentState, eta: &TangentState) -> f64 {
    assert_eq!(xi.len(), eta.len(), "tangent vectors differ in length");
    cell_wedges(xi, eta).iter().sum()
}

/// Per-cell `dp_j ^ dq_j` evaluated on `(xi, eta)`.
pub fn cell_wedges(xi: &TangentState, eta: &TangentState) -> Vec<f64> {
    (0..xi.len())
        .map(|j| xi.dp[j] * eta.dq[j] - xi.dq[j] * eta.dp[j])
        .collect()
}

/// A pair of tangent vectors at two consecutive time levels.
#[derive(Debug, Clone)]
pub struct TangentPairStep<'a> {
    pub xi: &'a TangentState,
    pub xi_next: &'a TangentState,
    pub eta: &'a TangentState,
    pub eta_next: &'a TangentState,
}

/// Residual of the discrete multi-symplectic conservation law in every cell:
///
/// `(w_j^{n+1} - w_j^n)/tau - (dp_j ^ dv_{j+1} - dp_{j-1} ^ dv_j)/h - (dq_j ^ dw_{j+1} - dq_{j-1} ^ dw_j)/h`
///
/// with the spatial terms at the midpoint level, `v_j = (p_j - p_{j-1})/h`,
/// `w_j = (q_j - q_{j-1})/h` and zero Dirichlet padding.
pub fn multisymplectic_residual(step: &TangentPairStep<'_>, tau: f64, h: f64) -> Vec<f64> {
    let m = step.xi.len();
    let w0 = cell_wedges(step.xi, step.eta);
    let w1 = cell_wedges(step.xi_next, step.eta_next);
    let mid = |a: &TangentState, b: &TangentState| TangentState {
        dp: a.dp.iter().zip(&b.dp).map(|(x, y)| 0.5 * (x + y)).collect(),
        dq: a.dq.iter().zip(&b.dq).map(|(x, y)| 0.5 * (x + y)).collect(),
    };
    let xm = mid(step.xi, step.xi_next);
    let em = mid(step.eta, step.eta_next);

    // padded value at index 0..=m+1
    let at = |v: &[f64], j: usize| if j == 0 || j > m { 0.0 } else { v[j - 1] };
    let diff = |v: &[f64], j: usize| (at(v, j) - at(v, j - 1)) / h;
    // a_i ^ b_k on (xi, eta), where a is a padded value and b a first difference
    let flux = |xa: &[f64], ea: &[f64], i: usize, k: usize| {
        at(xa, i) * diff(ea, k) - at(ea, i) * diff(xa, k)
    };

    (1..=m)
        .map(|j| {
            let time = (w1[j - 1] - w0[j - 1]) / tau;
            let fp = flux(&xm.dp, &em.dp, j, j + 1) - flux(&xm.dp, &em.dp, j - 1, j);
            let fq = flux(&xm.dq, &em.dq, j, j + 1) - flux(&xm.dq, &em.dq, j - 1, j);
            time - fp / h - fq / h
        })
        .collect()
}

/// Real drift and noise vector fields of the Itô system in `(P; Q)`
/// coordinates.
#[derive(Debug, Clone)]
pub struct VectorFieldFrame<'a> {
    cfg: &'a LatticeConfig,
    ops: &'a NoiseOperators,
}

impl<'a> VectorFieldFrame<'a> {
    pub fn new(cfg: &'a LatticeConfig, ops: &'a NoiseOperators) -> Self {
        Self { cfg, ops }
    }

    fn split<'z>(&self, z: &'z [f64]) -> (&'z [f64], &'z [f64]) {
        z.split_at(self.cfg.m())
    }

    /// `X0(P, Q) = [[-E, -A/h^2 - lambda F], [A/h^2 + lambda F, -E]] (P; Q)`.
    pub fn drift(&self, z: &[f64]) -> Vec<f64> {
        let (p, q) = self.split(z);
        let inv_h2 = 1.0 / self.cfg.h().powi(2);
        let lam = self.cfg.lambda();
        let (ap, aq) = (laplacian_real(p), laplacian_real(q));
        let e = self.ops.ehat();
        let mut out = vec![0.0; z.len()];
        let m = p.len();
        for j in 0..m {
            let f = p[j] * p[j] + q[j] * q[j];
            out[j] = -e[j] * p[j] - aq[j] * inv_h2 - lam * f * q[j];
            out[m + j] = ap[j] * inv_h2 + lam * f * p[j] - e[j] * q[j];
        }
        out
    }

    /// `X_k(P, Q) = sqrt(eta_k) (-E_k Q; E_k P)`, `k` one-based.
    pub fn noise(&self, k: usize, z: &[f64]) -> Vec<f64> {
        let (p, q) = self.split(z);
        let m = p.len();
        let s = self.ops.sqrt_eta()[k - 1];
        let mut out = vec![0.0; z.len()];
        for j in 0..m {
            let e = s * self.ops.emk(j + 1, k);
            out[j] = -e * q[j];
            out[m + j] = e * p[j];
        }
        out
    }

    /// Directional derivative `DX0(z) v`, analytic.
    pub fn drift_jacobian_apply(&self, z: &[f64], v: &[f64]) -> Vec<f64> {
        let (p, q) = self.split(z);
        let (vp, vq) = self.split(v);
        let inv_h2 = 1.0 / self.cfg.h().powi(2);
        let lam = self.cfg.lambda();
        let (avp, avq) = (laplacian_real(vp), laplacian_real(vq));
        let e = self.ops.ehat();
        let m = p.len();
        let mut out = vec![0.0; z.len()];
        for j in 0..m {
            let f = p[j] * p[j] + q[j] * q[j];
            let df = 2.0 * (p[j] * vp[j] + q[j] * vq[j]);
            out[j] = -e[j] * vp[j] - avq[j] * inv_h2 - lam * (df * q[j] + f * vq[j]);
            out[m + j] = avp[j] * inv_h2 + lam * (df * p[j] + f * vp[j]) - e[j] * vq[j];
        }
        out
    }

    /// `[X0, X_k](z) = DX_k X0(z) - DX0(z) X_k(z)`; `X_k` is linear so `DX_k = X_k`.
    pub fn bracket(&self, k: usize, z: &[f64]) -> Vec<f64> {
        let x0 = self.drift(z);
        let xk = self.noise(k, z);
        let a = self.noise(k, &x0);
        let b = self.drift_jacobian_apply(z, &xk);
        a.iter().zip(&b).map(|(x, y)| x - y).collect()
    }

    /// Gap between [`Self::bracket`] and its central-difference counterpart,
    /// relative to the largest of the bracket and its two Jacobian terms.
    pub fn bracket_fd_gap(&self, k: usize, z: &[f64], eps: f64) -> f64 {
        let central = |f: &dyn Fn(&[f64]) -> Vec<f64>, dir: &[f64]| -> Vec<f64> {
            let shift =
                |s: f64| -> Vec<f64> { z.iter().zip(dir).map(|(a, d)| a + s * d).collect() };
            let (fp, fm) = (f(&shift(eps)), f(&shift(-eps)));
            fp.iter()
                .zip(&fm)
                .map(|(a, b)| (a - b) / (2.0 * eps))
                .collect()
        };
        let x0 = self.drift(z);
        let xk = self.noise(k, z);
        let a = central(&|w| self.noise(k, w), &x0);
        let b = central(&|w| self.drift(w), &xk);
        let analytic = self.bracket(k, z);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let gap: Vec<f64> = analytic
            .iter()
            .zip(a.iter().zip(&b))
            .map(|(an, (x, y))| an - (x - y))
            .collect();
        let scale = norm(&analytic).max(norm(&a)).max(norm(&b));
        if scale == 0.0 {
            0.0
        } else {
            norm(&gap) / scale
        }
    }
}

/// The vectors entering the Hörmander check at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct HormanderFrame {
    pub point: Vec<f64>,
    /// `X_k(z)`, `k = 1..=M`.
    pub noise: Vec<Vec<f64>>,
    /// `[X0, X_k](z)`, `k = 1..=M`.
    pub brackets: Vec<Vec<f64>>,
    /// `X0(z)`.
    pub drift: Vec<f64>,
}

impl HormanderFrame {
    /// All frame vectors: noise fields, brackets, then the drift.
    pub fn columns(&self) -> Vec<Vec<f64>> {
        self.noise
            .iter()
            .chain(&self.brackets)
            .chain(std::iter::once(&self.drift))
            .cloned()
            .collect()
    }
}

/// `z* = (0, -(1, ..., 1)/sqrt(M))`.
pub fn hormander_point(m: usize) -> Vec<f64> {
    let mut z = vec![0.0; 2 * m];
    z[m..]
        .iter_mut()
        .for_each(|v| *v = -1.0 / (m as f64).sqrt());
    z
}

pub fn hormander_frame(cfg: &LatticeConfig, ops: &NoiseOperators) -> Result<HormanderFrame> {
    hormander_frame_at(cfg, ops, &hormander_point(cfg.m()))
}

/// Frame at an arbitrary point `z = (P; Q)`.
pub fn hormander_frame_at(
    cfg: &LatticeConfig,
    ops: &NoiseOperators,
    z: &[f64],
) -> Result<HormanderFrame> {
    let m = cfg.m();
    check_len(2 * m, z.len())?;
    if m > cfg.k() {
        return Err(Error::Input("Hörmander frame needs M <= K".into()));
    }
    let fields = VectorFieldFrame::new(cfg, ops);
    Ok(HormanderFrame {
        point: z.to_vec(),
        noise: (1..=m).map(|k| fields.noise(k, z)).collect(),
        brackets: (1..=m).map(|k| fields.bracket(k, z)).collect(),
        drift: fields.drift(z),
    })
}

/// Relative threshold on `|R_ii|` against the largest column norm.
pub const RANK_THRESHOLD: f64 = 1e-10;

/// Numerical rank of a set of column vectors via column-pivoted QR.
pub fn hormander_rank(columns: &[Vec<f64>]) -> usize {
    if columns.is_empty() {
        return 0;
    }
    let rows = columns[0].len();
    let mat = DMatrix::from_fn(rows, columns.len(), |i, j| columns[j][i]);
    let max_col = mat.column_iter().map(|c| c.norm()).fold(0.0f64, f64::max);
    if max_col == 0.0 {
        return 0;
    }
    let r = mat.col_piv_qr().r();
    (0..r.nrows().min(r.ncols()))
        .filter(|&i| r[(i, i)].abs() > RANK_THRESHOLD * max_col)
        .count()
}
