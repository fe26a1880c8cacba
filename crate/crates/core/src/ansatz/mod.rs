//! Parametrized ansatz manifolds.
//!
//! Three families are supported:
//!
//! * `ConservativeMoment(N)`: `f(xi) = exp(-(xi - u)^2 / 2 theta) * sum_k alpha_k xi^k`,
//!   chart ordered as `(alpha_0, .., alpha_N, u, theta)`.
//! * `HermitePerturbation(N)`: `f = rho theta^{-1/2} phi(w) (1 + sum_{k>=3} alpha_k He_k(w))`
//!   with `w = (xi - u) / sqrt(theta)`, chart `(rho, u, theta, alpha_3, .., alpha_N)`.
//!   The constrained coefficients `alpha_0 = 1`, `alpha_1 = alpha_2 = 0` are eliminated.
//! * `EntropyClosure(n)`: `f = exp(sum_p alpha_p xi^{p-1})`, chart `(alpha_1, .., alpha_n)`.
//!
//! Every tangent vector is returned together with its product with the metric
//! weight, computed analytically so the (possibly huge) weight is never formed.

mod inversion;
mod sampling;

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

pub(crate) use inversion::raw_moments;
pub use inversion::{moments_of, params_from_moments, params_from_moments_near, project_initial};
pub use sampling::{random_point, SAMPLE_RHO, SAMPLE_THETA, SAMPLE_U};

/// Largest polynomial order accepted by the moment and Hermite families.
pub const MAX_ORDER: usize = 10;
/// Largest number of monomial constraints of the entropy closure.
pub const MAX_ENTROPY_CONSTRAINTS: usize = 7;
/// Weight values above this are treated as overflow.
pub const WEIGHT_LIMIT: f64 = 1e300;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Manifold {
    ConservativeMoment { order: usize },
    HermitePerturbation { order: usize },
    EntropyClosure { order: usize },
}

impl Manifold {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Manifold::ConservativeMoment { order } if order > MAX_ORDER => {
                Err(Error::Parameter(format!("conservative moment order {order} exceeds {MAX_ORDER}")))
            }
            Manifold::HermitePerturbation { order } if !(2..=MAX_ORDER).contains(&order) => {
                Err(Error::Parameter(format!("Hermite perturbation order must be in 2..={MAX_ORDER}, got {order}")))
            }
            Manifold::EntropyClosure { order } if !(1..=MAX_ENTROPY_CONSTRAINTS).contains(&order) => {
                Err(Error::Parameter(format!(
                    "entropy closure needs 1..={MAX_ENTROPY_CONSTRAINTS} constraints, got {order}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Number of chart coordinates.
    pub fn dim(&self) -> usize {
        match *self {
            Manifold::ConservativeMoment { order } => order + 3,
            Manifold::HermitePerturbation { order } => order + 1,
            Manifold::EntropyClosure { order } => order,
        }
    }

    pub fn order(&self) -> usize {
        match *self {
            Manifold::ConservativeMoment { order }
            | Manifold::HermitePerturbation { order }
            | Manifold::EntropyClosure { order } => order,
        }
    }

    pub fn name(&self) -> String {
        match *self {
            Manifold::ConservativeMoment { order } => format!("conservative_moment({order})"),
            Manifold::HermitePerturbation { order } => format!("hermite_perturbation({order})"),
            Manifold::EntropyClosure { order } => format!("entropy_closure({order})"),
        }
    }

    /// Index of `u` and `theta` in the chart, where present.
    pub fn gaussian_indices(&self) -> Option<(usize, usize)> {
        match *self {
            Manifold::ConservativeMoment { order } => Some((order + 1, order + 2)),
            Manifold::HermitePerturbation { .. } => Some((1, 2)),
            Manifold::EntropyClosure { .. } => None,
        }
    }
}

/// A point `omega` on an ansatz manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzPoint {
    manifold: Manifold,
    omega: Vec<f64>,
}

impl AnsatzPoint {
    pub fn new(manifold: Manifold, omega: Vec<f64>) -> Result<Self> {
        manifold.validate()?;
        if omega.len() != manifold.dim() {
            return Err(Error::Parameter(format!(
                "{} needs {} coordinates, got {}",
                manifold.name(),
                manifold.dim(),
                omega.len()
            )));
        }
        if let Some(i) = omega.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parameter(format!("coordinate {i} is not finite")));
        }
        if let Some((_, t)) = manifold.gaussian_indices() {
            if omega[t] <= 0.0 {
                return Err(Error::Realizability(format!("temperature {} is not positive", omega[t])));
            }
        }
        if matches!(manifold, Manifold::HermitePerturbation { .. }) && omega[0] <= 0.0 {
            return Err(Error::Realizability(format!("density {} is not positive", omega[0])));
        }
        Ok(Self { manifold, omega })
    }

    /// The Maxwellian `(rho, u, theta)` expressed in the chart of `manifold`.
    pub fn maxwellian(manifold: Manifold, rho: f64, u: f64, theta: f64) -> Result<Self> {
        if !(rho > 0.0) || !(theta > 0.0) {
            return Err(Error::Realizability(format!("Maxwellian needs rho > 0 and theta > 0, got ({rho}, {theta})")));
        }
        let mut omega = vec![0.0; manifold.dim()];
        match manifold {
            Manifold::ConservativeMoment { order } => {
                omega[0] = rho / (2.0 * PI * theta).sqrt();
                omega[order + 1] = u;
                omega[order + 2] = theta;
            }
            Manifold::HermitePerturbation { .. } => {
                omega[0] = rho;
                omega[1] = u;
                omega[2] = theta;
            }
            Manifold::EntropyClosure { order } => {
                if order < 3 {
                    return Err(Error::Parameter(format!(
                        "entropy closure with {order} constraints has no Maxwellians"
                    )));
                }
                omega[0] = (rho / (2.0 * PI * theta).sqrt()).ln() - u * u / (2.0 * theta);
                omega[1] = u / theta;
                omega[2] = -0.5 / theta;
            }
        }
        Self::new(manifold, omega)
    }

    pub fn manifold(&self) -> Manifold {
        self.manifold
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn into_omega(self) -> Vec<f64> {
        self.omega
    }

    pub fn dim(&self) -> usize {
        self.omega.len()
    }

    pub fn with_omega(&self, omega: Vec<f64>) -> Result<Self> {
        Self::new(self.manifold, omega)
    }

    /// `(u, theta)` of the Gaussian factor, when the family has one.
    pub fn gaussian(&self) -> Option<(f64, f64)> {
        self.manifold.gaussian_indices().map(|(u, t)| (self.omega[u], self.omega[t]))
    }

    /// `f(xi; omega)` at every node. Negative values are a realizability error.
    pub fn evaluate(&self, grid: &QuadratureRule) -> Result<Vec<f64>> {
        let f = self.evaluate_unchecked(grid);
        if let Some(i) = f.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Realizability(format!(
                "ansatz value {} at xi = {} is negative or not finite",
                f[i],
                grid.nodes()[i]
            )));
        }
        Ok(f)
    }

    pub(crate) fn evaluate_unchecked(&self, grid: &QuadratureRule) -> Vec<f64> {
        let om = &self.omega;
        match self.manifold {
            Manifold::ConservativeMoment { order } => {
                let (u, th) = (om[order + 1], om[order + 2]);
                grid.nodes().iter().map(|&x| gauss(x, u, th) * horner(&om[..=order], x)).collect()
            }
            Manifold::HermitePerturbation { order } => {
                let (rho, u, th) = (om[0], om[1], om[2]);
                let amp = rho / th.sqrt();
                let mut he = vec![0.0; order + 1];
                grid.nodes()
                    .iter()
                    .map(|&x| {
                        let z = (x - u) / th.sqrt();
                        hermite_values(z, &mut he);
                        amp * INV_SQRT_2PI * (-0.5 * z * z).exp() * hermite_poly(om, &he).0
                    })
                    .collect()
            }
            Manifold::EntropyClosure { .. } => grid.nodes().iter().map(|&x| horner(om, x).exp()).collect(),
        }
    }

    /// Chart tangent vectors `df/domega_k` and their weighted counterparts.
    pub fn tangent_basis(&self, grid: &QuadratureRule) -> Result<TangentBasis> {
        let om = &self.omega;
        let n = grid.len();
        let dim = self.dim();
        let mut cols = vec![vec![0.0; n]; dim];
        let mut wcols = vec![vec![0.0; n]; dim];
        match self.manifold {
            Manifold::ConservativeMoment { order } => {
                let (u, th) = (om[order + 1], om[order + 2]);
                for (i, &x) in grid.nodes().iter().enumerate() {
                    let g = gauss(x, u, th);
                    let p = horner(&om[..=order], x);
                    let mut xk = 1.0;
                    for k in 0..=order {
                        cols[k][i] = g * xk;
                        wcols[k][i] = xk;
                        xk *= x;
                    }
                    let du = (x - u) / th * p;
                    let dt = (x - u) * (x - u) / (2.0 * th * th) * p;
                    cols[order + 1][i] = g * du;
                    wcols[order + 1][i] = du;
                    cols[order + 2][i] = g * dt;
                    wcols[order + 2][i] = dt;
                }
            }
            Manifold::HermitePerturbation { order } => {
                let (rho, u, th) = (om[0], om[1], om[2]);
                let sq = th.sqrt();
                let mut he = vec![0.0; order + 1];
                for (i, &x) in grid.nodes().iter().enumerate() {
                    let z = (x - u) / sq;
                    hermite_values(z, &mut he);
                    let (p, dp) = hermite_poly(om, &he);
                    let aw = rho / sq * INV_SQRT_2PI;
                    let a = aw * (-0.5 * z * z).exp();
                    let shapes = [p / rho, (z * p - dp) / sq, (z * z * p - p - z * dp) / (2.0 * th)];
                    for (k, s) in shapes.iter().enumerate() {
                        cols[k][i] = a * s;
                        wcols[k][i] = aw * s;
                    }
                    for k in 3..=order {
                        cols[k][i] = a * he[k];
                        wcols[k][i] = aw * he[k];
                    }
                }
            }
            Manifold::EntropyClosure { .. } => {
                let f = self.evaluate(grid)?;
                for (i, &x) in grid.nodes().iter().enumerate() {
                    let mut xk = 1.0;
                    for k in 0..dim {
                        cols[k][i] = xk * f[i];
                        wcols[k][i] = xk;
                        xk *= x;
                    }
                }
            }
        }
        Ok(TangentBasis { columns: cols, weighted: wcols })
    }

    /// A frame of the tangent space that stays well defined where the chart
    /// degenerates. For the conservative moment family the tangent space is
    /// `exp(-(xi - u)^2 / 2 theta) * span{1, xi, .., xi^{N+2}}`; the frame uses
    /// Hermite polynomials of `(xi - u) / sqrt(theta)` for conditioning. Other
    /// families return the chart basis.
    pub fn tangent_frame(&self, grid: &QuadratureRule) -> Result<TangentBasis> {
        match self.manifold {
            Manifold::ConservativeMoment { order } => {
                let (u, th) = self.gaussian().expect("moment family has a Gaussian factor");
                Ok(hermite_frame(grid, u, th, order + 3))
            }
            _ => self.tangent_basis(grid),
        }
    }

    /// The metric weight `w(xi)` with `g(h1, h2) = int h1 h2 w dxi`.
    pub fn metric_weight(&self, grid: &QuadratureRule) -> Result<Vec<f64>> {
        let log_limit = WEIGHT_LIMIT.ln();
        let w: Vec<f64> = match self.manifold {
            Manifold::ConservativeMoment { .. } | Manifold::HermitePerturbation { .. } => {
                let (u, th) = self.gaussian().expect("family has a Gaussian factor");
                let mut out = Vec::with_capacity(grid.len());
                for &x in grid.nodes() {
                    let e = (x - u) * (x - u) / (2.0 * th);
                    if e > log_limit {
                        return Err(Error::Configuration(format!(
                            "metric weight overflows at xi = {x}: velocity half-width too large \
                             for temperature {th}"
                        )));
                    }
                    out.push(e.exp());
                }
                out
            }
            Manifold::EntropyClosure { .. } => {
                let f = self.evaluate(grid)?;
                let mut out = Vec::with_capacity(f.len());
                for (v, &x) in f.iter().zip(grid.nodes()) {
                    if !(*v > 1.0 / WEIGHT_LIMIT) {
                        return Err(Error::Configuration(format!("metric weight 1/f overflows at xi = {x}")));
                    }
                    out.push(1.0 / v);
                }
                out
            }
        };
        Ok(w)
    }
}

/// Tangent vectors `b_k` on the velocity grid, with `d_k = b_k * w`.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentBasis {
    columns: Vec<Vec<f64>>,
    weighted: Vec<Vec<f64>>,
}

impl TangentBasis {
    pub fn new(columns: Vec<Vec<f64>>, weighted: Vec<Vec<f64>>) -> Result<Self> {
        if columns.len() != weighted.len() || columns.iter().zip(&weighted).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::Parameter("basis and weighted basis shapes differ".into()));
        }
        Ok(Self { columns, weighted })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.columns[k]
    }

    /// `b_k * w`.
    pub fn weighted(&self, k: usize) -> &[f64] {
        &self.weighted[k]
    }

    pub fn weighted_columns(&self) -> &[Vec<f64>] {
        &self.weighted
    }

    /// `int b_k d_l dxi`, not symmetrized.
    pub fn raw_gram(&self, grid: &QuadratureRule) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |k, l| grid.inner(&self.columns[k], &self.weighted[l]))
    }

    /// `int xi b_k d_l dxi`, not symmetrized.
    pub fn raw_flux(&self, grid: &QuadratureRule) -> DMatrix<f64> {
        let n = self.len();
        let xb: Vec<Vec<f64>> =
            self.columns.iter().map(|c| c.iter().zip(grid.nodes()).map(|(v, x)| v * x).collect()).collect();
        DMatrix::from_fn(n, n, |k, l| grid.inner(&xb[k], &self.weighted[l]))
    }

    /// `int h d_k dxi` for every `k`.
    pub fn pair(&self, grid: &QuadratureRule, h: &[f64]) -> Vec<f64> {
        self.weighted.iter().map(|d| grid.inner(h, d)).collect()
    }
}

/// `exp(-(xi - u)^2 / 2 theta) xi^k` for `k < count`, weighted by the inverse Gaussian.
pub fn moment_frame(grid: &QuadratureRule, u: f64, theta: f64, count: usize) -> TangentBasis {
    let n = grid.len();
    let mut cols = vec![vec![0.0; n]; count];
    let mut wcols = vec![vec![0.0; n]; count];
    for (i, &x) in grid.nodes().iter().enumerate() {
        let g = gauss(x, u, theta);
        let mut xk = 1.0;
        for k in 0..count {
            cols[k][i] = g * xk;
            wcols[k][i] = xk;
            xk *= x;
        }
    }
    TangentBasis { columns: cols, weighted: wcols }
}

/// `exp(-(xi - u)^2 / 2 theta) He_k((xi - u) / sqrt(theta))` for `k < count`,
/// weighted by the inverse Gaussian.
pub fn hermite_frame(grid: &QuadratureRule, u: f64, theta: f64, count: usize) -> TangentBasis {
    let n = grid.len();
    let mut cols = vec![vec![0.0; n]; count];
    let mut wcols = vec![vec![0.0; n]; count];
    let mut he = vec![0.0; count];
    let sq = theta.sqrt();
    for (i, &x) in grid.nodes().iter().enumerate() {
        let z = (x - u) / sq;
        let g = (-0.5 * z * z).exp();
        hermite_values(z, &mut he);
        for k in 0..count {
            cols[k][i] = g * he[k];
            wcols[k][i] = he[k];
        }
    }
    TangentBasis { columns: cols, weighted: wcols }
}

#[inline]
pub(crate) fn gauss(x: f64, u: f64, theta: f64) -> f64 {
    (-(x - u) * (x - u) / (2.0 * theta)).exp()
}

/// `sum_k c_k x^k`.
#[inline]
pub(crate) fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Probabilists' Hermite polynomials `He_0..He_{n-1}` at `z`, with `n = out.len()`.
pub(crate) fn hermite_values(z: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = z;
    }
    for k in 2..out.len() {
        out[k] = z * out[k - 1] - (k - 1) as f64 * out[k - 2];
    }
}

/// `p(z) = 1 + sum_{k>=3} alpha_k He_k(z)` and `p'(z)`, from a Hermite chart.
fn hermite_poly(omega: &[f64], he: &[f64]) -> (f64, f64) {
    let mut p = 1.0;
    let mut dp = 0.0;
    for k in 3..he.len() {
        let a = omega[k];
        p += a * he[k];
        dp += a * k as f64 * he[k - 1];
    }
    (p, dp)
}

/// Expands `sum_j beta_j ((xi - shift) / scale)^j` into monomials of `xi`.
pub(crate) fn shifted_to_monomial(beta: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    let n = beta.len();
    let mut alpha = vec![0.0; n];
    for (j, &b) in beta.iter().enumerate() {
        if b == 0.0 {
            continue;
        }
        let bj = b / scale.powi(j as i32);
        let mut binom = 1.0;
        for k in 0..=j {
            // binom = C(j, k)
            alpha[k] += bj * binom * (-shift).powi((j - k) as i32);
            binom = binom * (j - k) as f64 / (k + 1) as f64;
        }
    }
    alpha
}
