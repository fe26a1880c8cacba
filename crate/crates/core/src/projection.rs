//! Reduced-system coefficients `A0`, `A1`, `Q` and the metric-orthogonal
//! tangent projector.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::ansatz::{moment_frame, AnsatzPoint, Manifold, TangentBasis};
use crate::error::{Error, Result};
use crate::kinetic::{CollisionModel, MomentState};
use crate::quadrature::QuadratureRule;

/// Relative norm below which a Gram–Schmidt vector counts as dependent.
const RANK_TOL: f64 = 1e-10;

/// Coefficients of `A0 dt omega + A1 dx omega = Q` at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCoefficients {
    pub a0: DMatrix<f64>,
    pub a1: DMatrix<f64>,
    pub q: DVector<f64>,
    /// `max |A1 - A1^T| / max |A1|` before symmetrization.
    pub a1_asymmetry: f64,
}

/// Assembles all reduced coefficients at `p`.
pub fn assemble(p: &AnsatzPoint, model: &CollisionModel, grid: &QuadratureRule) -> Result<ReducedCoefficients> {
    let basis = p.tangent_basis(grid)?;
    let a0 = checked_gram(&basis, grid)?;
    let raw = basis.raw_flux(grid);
    let a1_asymmetry = asymmetry(&raw);
    let a1 = symmetrize(&raw);
    let q = source_from_basis(p, &basis, model, grid)?;
    Ok(ReducedCoefficients { a0, a1, q, a1_asymmetry })
}

/// `A0_kl = g(b_k, b_l)`, symmetrized; a failed Cholesky factorization is a
/// degenerate-chart error.
pub fn gram_matrix(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<DMatrix<f64>> {
    checked_gram(&p.tangent_basis(grid)?, grid)
}

/// `A1_kl = g(b_k, xi b_l)`, symmetrized.
pub fn flux_matrix(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<DMatrix<f64>> {
    Ok(symmetrize(&p.tangent_basis(grid)?.raw_flux(grid)))
}

/// Relative asymmetry of `A1` before symmetrization.
pub fn flux_asymmetry(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<f64> {
    Ok(asymmetry(&p.tangent_basis(grid)?.raw_flux(grid)))
}

/// `Q_k = g(b_k, Q[f])`.
pub fn reduced_source(p: &AnsatzPoint, model: &CollisionModel, grid: &QuadratureRule) -> Result<DVector<f64>> {
    let basis = p.tangent_basis(grid)?;
    source_from_basis(p, &basis, model, grid)
}

fn source_from_basis(
    p: &AnsatzPoint,
    basis: &TangentBasis,
    model: &CollisionModel,
    grid: &QuadratureRule,
) -> Result<DVector<f64>> {
    let f = p.evaluate(grid)?;
    let q = model.apply(grid, &f)?;
    Ok(DVector::from_vec(basis.pair(grid, &q)))
}

fn checked_gram(basis: &TangentBasis, grid: &QuadratureRule) -> Result<DMatrix<f64>> {
    let a0 = symmetrize(&basis.raw_gram(grid));
    if Cholesky::new(a0.clone()).is_none() {
        return Err(Error::DegenerateChart(format!(
            "Gram matrix of the {}-dimensional tangent basis is not positive definite",
            basis.len()
        )));
    }
    Ok(a0)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (m + m.transpose())
}

pub(crate) fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        0.0
    } else {
        (m - m.transpose()).amax() / scale
    }
}

/// Eigenvalues of the symmetric-definite pencil `a1 x = lambda a0 x`, ascending.
pub fn generalized_eigenvalues(a0: &DMatrix<f64>, a1: &DMatrix<f64>) -> Result<Vec<f64>> {
    let chol = Cholesky::new(symmetrize(a0))
        .ok_or_else(|| Error::DegenerateChart("pencil matrix A0 is not positive definite".into()))?;
    let l = chol.l();
    let linv = l.clone().try_inverse().ok_or_else(|| Error::DegenerateChart("Cholesky factor is singular".into()))?;
    let m = &linv * symmetrize(a1) * linv.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(&m)).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Metric-orthogonal projector onto the span of a tangent frame, held as a
/// `g`-orthonormal basis built by twice-iterated modified Gram–Schmidt.
#[derive(Debug, Clone)]
pub struct TangentProjector {
    ortho: Vec<Vec<f64>>,
    ortho_weighted: Vec<Vec<f64>>,
}

impl TangentProjector {
    pub fn new(frame: &TangentBasis, grid: &QuadratureRule) -> Result<Self> {
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(frame.len());
        let mut ortho_weighted: Vec<Vec<f64>> = Vec::with_capacity(frame.len());
        for k in 0..frame.len() {
            let mut v = frame.column(k).to_vec();
            let mut vw = frame.weighted(k).to_vec();
            let start = grid.inner(&v, &vw).max(0.0).sqrt();
            for _ in 0..2 {
                for (q, qw) in ortho.iter().zip(&ortho_weighted) {
                    let c = grid.inner(&v, qw);
                    for i in 0..v.len() {
                        v[i] -= c * q[i];
                        vw[i] -= c * qw[i];
                    }
                }
            }
            let norm = grid.inner(&v, &vw).max(0.0).sqrt();
            if !(norm > RANK_TOL * start) || !norm.is_finite() {
                return Err(Error::DegenerateChart(format!("tangent vector {k} is dependent on the previous ones")));
            }
            v.iter_mut().for_each(|x| *x /= norm);
            vw.iter_mut().for_each(|x| *x /= norm);
            ortho.push(v);
            ortho_weighted.push(vw);
        }
        Ok(Self { ortho, ortho_weighted })
    }

    /// The projector onto the tangent space at `p`.
    pub fn at(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<Self> {
        Self::new(&p.tangent_frame(grid)?, grid)
    }

    pub fn rank(&self) -> usize {
        self.ortho.len()
    }

    pub fn apply(&self, grid: &QuadratureRule, h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; h.len()];
        for (q, qw) in self.ortho.iter().zip(&self.ortho_weighted) {
            let c = grid.inner(h, qw);
            for (o, v) in out.iter_mut().zip(q) {
                *o += c * v;
            }
        }
        out
    }

    /// `(I - P) h`.
    pub fn complement(&self, grid: &QuadratureRule, h: &[f64]) -> Vec<f64> {
        let ph = self.apply(grid, h);
        h.iter().zip(&ph).map(|(a, b)| a - b).collect()
    }
}

/// Result of projecting a profile onto a tangent space.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    /// Coordinates in the chart basis `df/domega_k`.
    pub coefficients: DVector<f64>,
    pub projected: Vec<f64>,
}

/// Solves `A0 c = r` with `r_k = g(b_k, h)` and returns `c` with `P h = sum_k c_k b_k`.
pub fn tangent_projection(p: &AnsatzPoint, h: &[f64], grid: &QuadratureRule) -> Result<Projection> {
    if h.len() != grid.len() {
        return Err(Error::Parameter("profile length does not match the grid".into()));
    }
    let basis = p.tangent_basis(grid)?;
    let a0 = checked_gram(&basis, grid)?;
    let r = DVector::from_vec(basis.pair(grid, h));
    let coefficients = Cholesky::new(a0).expect("checked above").solve(&r);
    let projected = TangentProjector::new(&basis, grid)?.apply(grid, h);
    Ok(Projection { coefficients, projected })
}

/// The model-reduction residual `(I - P)(xi dx f - Q[f])` for a given
/// parameter gradient `d omega / dx`.
pub fn residual(p: &AnsatzPoint, domega_dx: &[f64], model: &CollisionModel, grid: &QuadratureRule) -> Result<Vec<f64>> {
    if domega_dx.len() != p.dim() {
        return Err(Error::Parameter(format!("gradient has {} entries, chart has {}", domega_dx.len(), p.dim())));
    }
    let basis = p.tangent_basis(grid)?;
    let mut dfdx = vec![0.0; grid.len()];
    for (k, d) in domega_dx.iter().enumerate() {
        for (o, b) in dfdx.iter_mut().zip(basis.column(k)) {
            *o += d * b;
        }
    }
    residual_from_gradient(p, &dfdx, model, grid)
}

/// The residual for a given spatial derivative `dx f` of the ansatz profile.
pub fn residual_from_gradient(
    p: &AnsatzPoint,
    dfdx: &[f64],
    model: &CollisionModel,
    grid: &QuadratureRule,
) -> Result<Vec<f64>> {
    let f = p.evaluate(grid)?;
    let q = model.apply(grid, &f)?;
    let h: Vec<f64> = grid.nodes().iter().zip(dfdx).zip(&q).map(|((x, d), qi)| x * d - qi).collect();
    Ok(TangentProjector::at(p, grid)?.complement(grid, &h))
}

/// `g(a, b)` at `p`.
pub fn metric_inner(p: &AnsatzPoint, grid: &QuadratureRule, a: &[f64], b: &[f64]) -> Result<f64> {
    let w = p.metric_weight(grid)?;
    Ok(grid.integrate_fn_indexed(|i, _| a[i] * b[i] * w[i]))
}

/// The conservative moment system `dt c + dx F(c) = S(c)` written in the
/// moments `c_k = int xi^k f`, `k = 0..N+2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSystem {
    /// `H^{-1}` with `H_kl = int G xi^{k+l}`; the metric in moment coordinates.
    pub symmetrizer: DMatrix<f64>,
    /// `dF/dc = A1_H H^{-1}` with `A1_H,kl = int G xi^{k+l+1}`.
    pub jacobian: DMatrix<f64>,
    pub moments: Vec<f64>,
}

impl MomentSystem {
    pub fn at(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<Self> {
        let Manifold::ConservativeMoment { order } = p.manifold() else {
            return Err(Error::Parameter("moment system needs the conservative moment family".into()));
        };
        let (u, th) = p.gaussian().expect("moment family has a Gaussian factor");
        let frame = moment_frame(grid, u, th, order + 3);
        let h = symmetrize(&frame.raw_gram(grid));
        let a1 = symmetrize(&frame.raw_flux(grid));
        let hinv = Cholesky::new(h)
            .ok_or_else(|| Error::DegenerateChart("moment Hankel matrix is not positive definite".into()))?
            .inverse();
        let jacobian = &a1 * &hinv;
        let moments = crate::ansatz::moments_of(p, grid, order + 3)?;
        Ok(Self { symmetrizer: symmetrize(&hinv), jacobian, moments })
    }
}

/// `S_k(c) = int xi^k Q[f] dxi` for any `f` with moments `c_0..c_{N+2}`.
///
/// The BGK-family targets depend only on `(rho, u, theta, P, q)`, so the
/// source is a function of the moments alone.
pub fn moment_source(c: &[f64], model: &CollisionModel, grid: &QuadratureRule) -> Result<Vec<f64>> {
    let state = moment_state(c, model)?;
    let target = model.target(&state, grid)?;
    let t = crate::ansatz::raw_moments(grid, &target, c.len());
    let rate = model.rate();
    Ok(t.iter().zip(c).map(|(a, b)| rate * (a - b)).collect())
}

/// `(rho, u, theta, P, q)` from raw moments `c_0..c_3`.
pub fn moment_state(c: &[f64], model: &CollisionModel) -> Result<MomentState> {
    if c.len() < 3 {
        return Err(Error::Parameter("need at least the moments c_0, c_1, c_2".into()));
    }
    let rho = c[0];
    if !(rho > 0.0) {
        return Err(Error::Realizability(format!("density {rho} is not positive")));
    }
    let u = c[1] / rho;
    let theta = c[2] / rho - u * u;
    let heat_flux = if c.len() > 3 {
        (c[3] - 3.0 * u * c[2] + 3.0 * u * u * c[1] - u * u * u * c[0]) / rho
    } else if model.kind == crate::kinetic::CollisionKind::Shakhov && model.prandtl != 1.0 {
        return Err(Error::Parameter("the Shakhov target needs the third moment (order >= 1)".into()));
    } else {
        0.0
    };
    let m = MomentState { rho, u, theta, pressure: theta, heat_flux };
    m.validate()?;
    Ok(m)
}

/// `d c_eq / d (rho, u, theta)` at a Maxwellian, as `count` x 3 matrix.
pub fn equilibrium_moment_basis(m: &MomentState, grid: &QuadratureRule, count: usize) -> DMatrix<f64> {
    let f = crate::kinetic::maxwellian(m, grid);
    let shapes: [Box<dyn Fn(f64) -> f64>; 3] = [
        Box::new(|_| 1.0 / m.rho),
        Box::new(|x| (x - m.u) / m.theta),
        Box::new(|x| ((x - m.u).powi(2) / m.theta - 1.0) / (2.0 * m.theta)),
    ];
    let mut out = DMatrix::zeros(count, 3);
    for (j, s) in shapes.iter().enumerate() {
        let col: Vec<f64> = grid.nodes().iter().zip(&f).map(|(&x, v)| v * s(x)).collect();
        let mom = crate::ansatz::raw_moments(grid, &col, count);
        for k in 0..count {
            out[(k, j)] = mom[k];
        }
    }
    out
}
