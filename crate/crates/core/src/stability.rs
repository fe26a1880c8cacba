//! Linearized collision operators at Maxwellians, stability-condition checks
//! and audits of the reduced systems.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{random_point, AnsatzPoint, Manifold};
use crate::error::{Error, Result};
use crate::kinetic::{CollisionKind, CollisionModel, MomentState};
use crate::projection::{
    asymmetry, equilibrium_moment_basis, generalized_eigenvalues, moment_source, symmetrize, MomentSystem,
};
use crate::quadrature::QuadratureRule;
use crate::reduced::spectral_radius;

/// Largest supported velocity dimension.
pub const MAX_DIMENSION: usize = 3;
/// Default Hermite truncation degree.
pub const DEFAULT_DEGREE: usize = 6;
/// Largest tolerated deviation of the basis Gram matrix from the identity.
pub const ORTHONORMALITY_TOL: f64 = 1e-8;
/// Relative norm below which a Gram–Schmidt vector counts as dependent.
const RANK_TOL: f64 = 1e-12;
/// Slack on the uniform coercivity inequality.
const GUSC_SLACK: f64 = 1e-8;
/// Slack on the weak inequality.
const GWSC_SLACK: f64 = 1e-10;
/// Admissible off-block entries of the transformed source Jacobian.
const BLOCK_TOL: f64 = 1e-8;
/// Admissible relative symmetrizability defect.
const SYMMETRY_TOL: f64 = 1e-10;

/// Orthonormal Hermite functions `f H_k(w) / sqrt(rho k!)`, `|k| <= K`, with
/// `w = (xi - u) / sqrt(theta)`, under `g(h1, h2) = int h1 h2 / f dxi`.
///
/// Elements are represented by their coefficient vectors in this basis; the
/// space itself is the same at every Maxwellian.
#[derive(Debug, Clone)]
pub struct HermiteSpace {
    dim: usize,
    degree: usize,
    indices: Vec<Vec<usize>>,
    /// Tensor Gauss–Hermite nodes in `w` and probability weights.
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
    /// `psi_i(w_q)` for every index and node.
    values: Vec<Vec<f64>>,
}

impl HermiteSpace {
    /// Uses `K + 2` Gauss–Hermite points per axis.
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        Self::with_points(dim, degree, degree + 2)
    }

    /// As [`HermiteSpace::new`] with `points` nodes per axis; rules too coarse
    /// to keep the basis orthonormal are a configuration error.
    pub fn with_points(dim: usize, degree: usize, points: usize) -> Result<Self> {
        if dim == 0 || dim > MAX_DIMENSION {
            return Err(Error::Parameter(format!("velocity dimension must be 1..=3, got {dim}")));
        }
        let rule = QuadratureRule::gauss_hermite(points)?;
        let indices = multi_indices(dim, degree);
        let scale = std::f64::consts::PI.powf(-0.5);
        let mut nodes = vec![Vec::new()];
        let mut weights = vec![1.0];
        for _ in 0..dim {
            let mut n2 = Vec::new();
            let mut w2 = Vec::new();
            for (n, w) in nodes.iter().zip(&weights) {
                for (&x, &v) in rule.nodes().iter().zip(rule.weights()) {
                    let mut m = n.clone();
                    m.push(std::f64::consts::SQRT_2 * x);
                    n2.push(m);
                    w2.push(w * v * scale);
                }
            }
            nodes = n2;
            weights = w2;
        }
        let norms: Vec<f64> = (0..=degree).map(|k| factorial(k).sqrt()).collect();
        let values = indices
            .iter()
            .map(|k| {
                nodes.iter().map(|w| k.iter().zip(w).map(|(&kj, &wj)| hermite(kj, wj) / norms[kj]).product()).collect()
            })
            .collect();
        let space = Self { dim, degree, indices, nodes, weights, values };
        let defect = space.orthonormality_defect();
        if !(defect <= ORTHONORMALITY_TOL) {
            return Err(Error::Configuration(format!(
                "{points} quadrature points per axis leave an orthonormality defect of {defect:e} \
                 at degree {degree}"
            )));
        }
        Ok(space)
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Number of basis functions.
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Multi-indices, ordered by total degree.
    pub fn indices(&self) -> &[Vec<usize>] {
        &self.indices
    }

    /// Gram matrix of the basis computed by quadrature.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| {
            self.weights.iter().enumerate().map(|(q, w)| w * self.values[i][q] * self.values[j][q]).sum()
        })
    }

    pub fn orthonormality_defect(&self) -> f64 {
        (self.gram() - DMatrix::identity(self.len(), self.len())).amax()
    }

    /// Coefficients of `f * p(xi)` at the Maxwellian `m`, where the bulk
    /// velocity `m.u` points along the first axis.
    pub fn coefficients(&self, m: &MomentState, p: impl Fn(&[f64]) -> f64) -> DVector<f64> {
        let sq = m.theta.sqrt();
        let scale = m.rho.sqrt();
        let mut xi = vec![0.0; self.dim];
        let pv: Vec<f64> = self
            .nodes
            .iter()
            .map(|w| {
                for (j, x) in xi.iter_mut().enumerate() {
                    *x = if j == 0 { m.u } else { 0.0 } + sq * w[j];
                }
                p(&xi)
            })
            .collect();
        DVector::from_fn(self.len(), |i, _| {
            scale * self.weights.iter().enumerate().map(|(q, w)| w * self.values[i][q] * pv[q]).sum::<f64>()
        })
    }
}

fn multi_indices(dim: usize, degree: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for total in 0..=degree {
        let mut cur = vec![0; dim];
        fill(&mut out, &mut cur, 0, total);
    }
    out
}

fn fill(out: &mut Vec<Vec<usize>>, cur: &mut Vec<usize>, axis: usize, left: usize) {
    if axis + 1 == cur.len() {
        cur[axis] = left;
        out.push(cur.clone());
        return;
    }
    for k in (0..=left).rev() {
        cur[axis] = k;
        fill(out, cur, axis + 1, left - k);
    }
}

fn hermite(k: usize, x: f64) -> f64 {
    let (mut a, mut b) = (1.0, x);
    if k == 0 {
        return a;
    }
    for n in 1..k {
        let c = x * b - n as f64 * a;
        a = b;
        b = c;
    }
    b
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Orthogonal projectors onto the equilibrium subspaces `W0`, `W1`, `W2`.
#[derive(Debug, Clone)]
pub struct EquilibriumSubspaces {
    pub w0: DMatrix<f64>,
    pub w1: DMatrix<f64>,
    pub w2: DMatrix<f64>,
    pub ranks: [usize; 3],
}

impl EquilibriumSubspaces {
    pub fn new(space: &HermiteSpace, m: &MomentState) -> Self {
        let d = space.dimension();
        let u = |xi: &[f64], j: usize| xi[j] - if j == 0 { m.u } else { 0.0 };
        let speed2 = move |xi: &[f64]| (0..xi.len()).map(|j| u(xi, j).powi(2)).sum::<f64>();

        let mut b0 = vec![space.coefficients(m, |_| 1.0)];
        for j in 0..d {
            b0.push(space.coefficients(m, |xi| xi[j]));
        }
        b0.push(space.coefficients(m, |xi| xi.iter().map(|x| x * x).sum()));

        let b1: Vec<DVector<f64>> =
            (0..d).map(|j| space.coefficients(m, |xi| u(xi, j) * (speed2(xi) - (d as f64 + 2.0) * m.theta))).collect();

        let mut b2: Vec<DVector<f64>> =
            (0..d).map(|j| space.coefficients(m, |xi| d as f64 * u(xi, j).powi(2) - speed2(xi))).collect();
        for j1 in 0..d {
            for j2 in j1 + 1..d {
                b2.push(space.coefficients(m, |xi| u(xi, j1) * u(xi, j2)));
            }
        }
        let (w0, r0) = projector(&b0, space.len());
        let (w1, r1) = projector(&b1, space.len());
        let (w2, r2) = projector(&b2, space.len());
        Self { w0, w1, w2, ranks: [r0, r1, r2] }
    }
}

/// Orthogonal projector onto the span of `vectors`, by twice-iterated modified
/// Gram–Schmidt; dependent vectors are dropped.
fn projector(vectors: &[DVector<f64>], n: usize) -> (DMatrix<f64>, usize) {
    let mut q: Vec<DVector<f64>> = Vec::new();
    let scale = vectors.iter().map(|v| v.norm()).fold(0.0, f64::max);
    for v in vectors {
        let mut w = v.clone();
        for _ in 0..2 {
            for e in &q {
                let c = e.dot(&w);
                w -= c * e;
            }
        }
        let norm = w.norm();
        if norm > RANK_TOL * scale.max(f64::MIN_POSITIVE) {
            q.push(w / norm);
        }
    }
    let mut p = DMatrix::zeros(n, n);
    for e in &q {
        p += e * e.transpose();
    }
    (symmetrize(&p), q.len())
}

/// The matrix of the linearized collision operator at `m` in the orthonormal
/// Hermite basis:
/// BGK `(P0 - I) / tau`, Shakhov `(P0 + (1 - Pr) P1 - I) / tau`,
/// ES-BGK `Pr (P0 + (1 - 1/Pr) P2 - I) / tau`.
pub fn linearized_collision_matrix(
    model: &CollisionModel,
    m: &MomentState,
    space: &HermiteSpace,
) -> Result<DMatrix<f64>> {
    m.validate()?;
    model.check_dimension(space.dimension())?;
    let defect = space.orthonormality_defect();
    if !(defect <= ORTHONORMALITY_TOL) {
        return Err(Error::Configuration(format!("Hermite basis orthonormality defect {defect:e}")));
    }
    let w = EquilibriumSubspaces::new(space, m);
    let id = DMatrix::<f64>::identity(space.len(), space.len());
    let d = match model.kind {
        CollisionKind::Bgk => (&w.w0 - &id) / model.tau,
        CollisionKind::Shakhov => (&w.w0 + (1.0 - model.prandtl) * &w.w1 - &id) / model.tau,
        CollisionKind::EsBgk => (&w.w0 + (1.0 - 1.0 / model.prandtl) * &w.w2 - &id) * (model.prandtl / model.tau),
    };
    Ok(symmetrize(&d))
}

/// Outcome of the coercivity check of a linearized collision operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuscReport {
    /// `max x^T G D x / |(I - P0) x|_G^2` over `x` orthogonal to `W0`.
    pub worst_quotient: f64,
    pub lambda_claim: f64,
    /// Uniform condition: `worst_quotient <= -lambda_claim`.
    pub pass: bool,
    /// Weak condition: `worst_quotient <= 0`.
    pub weak_pass: bool,
    /// `max(|D P0|, |P0 D|)`: the kernel and range structure at equilibrium.
    pub kernel_defect: f64,
}

/// Checks `g(D x, x) <= -lambda |x - P0 x|^2` with the Euclidean metric of an
/// orthonormal basis.
pub fn gusc_check(d: &DMatrix<f64>, w0: &DMatrix<f64>, lambda_claim: f64) -> Result<GuscReport> {
    let n = d.nrows();
    gusc_check_with_metric(d, w0, lambda_claim, &DMatrix::identity(n, n))
}

/// [`gusc_check`] in the metric `x^T G y`; `P0` must be `G`-orthogonal.
pub fn gusc_check_with_metric(
    d: &DMatrix<f64>,
    w0: &DMatrix<f64>,
    lambda_claim: f64,
    metric: &DMatrix<f64>,
) -> Result<GuscReport> {
    let n = d.nrows();
    if d.ncols() != n || w0.shape() != (n, n) || metric.shape() != (n, n) {
        return Err(Error::Parameter("matrix dimensions do not match".into()));
    }
    let kernel_defect = (d * w0).amax().max((w0 * d).amax());
    let comp = DMatrix::<f64>::identity(n, n) - w0;
    let basis = range_basis(&comp);
    let worst_quotient = if basis.ncols() == 0 {
        f64::NEG_INFINITY
    } else {
        let a = basis.transpose() * metric * d * &basis;
        let b = basis.transpose() * metric * &basis;
        *generalized_eigenvalues(&b, &a)?.last().expect("nonempty complement")
    };
    Ok(GuscReport {
        worst_quotient,
        lambda_claim,
        pass: worst_quotient <= -lambda_claim + GUSC_SLACK,
        weak_pass: worst_quotient <= GWSC_SLACK,
        kernel_defect,
    })
}

/// Orthonormal basis of the range of a symmetric projector.
fn range_basis(p: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(p));
    let cols: Vec<DVector<f64>> =
        (0..p.nrows()).filter(|&i| eig.eigenvalues[i] > 0.5).map(|i| eig.eigenvectors.column(i).into_owned()).collect();
    if cols.is_empty() {
        DMatrix::zeros(p.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Outcome of the structural stability conditions for
/// `U_t + J U_x = Q(U)` with symmetrizer `A0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YongReport {
    /// Largest off-block entry of `P Q_U P^{-1}` relative to `max(1, |Q_U|)`.
    pub block_defect: f64,
    pub block_pass: bool,
    /// `|A0 J - J^T A0| / |A0 J|`.
    pub symmetry_defect: f64,
    pub symmetry_pass: bool,
    /// Largest `c` with `-(A0 Q_U + Q_U^T A0) / 2 >= c A0` on the complement.
    pub dissipation_constant: f64,
    pub dissipation_pass: bool,
    /// The weak form `A0 Q_U + Q_U^T A0 <= 0` on the complement.
    pub weak_dissipation_pass: bool,
}

impl YongReport {
    pub fn pass(&self) -> bool {
        self.block_pass && self.symmetry_pass && self.dissipation_pass
    }
}

/// Checks the three structural conditions at an equilibrium whose tangent
/// directions are the columns of `equilibrium_basis`.
///
/// The complement is the `A0`-orthogonal complement of the equilibrium
/// directions, and the dissipation constant is measured against `A0` there.
pub fn yong_conditions_check(
    a0: &DMatrix<f64>,
    jacobian: &DMatrix<f64>,
    qu: &DMatrix<f64>,
    equilibrium_basis: &DMatrix<f64>,
) -> Result<YongReport> {
    let n = a0.nrows();
    if a0.ncols() != n || jacobian.shape() != (n, n) || qu.shape() != (n, n) || equilibrium_basis.nrows() != n {
        return Err(Error::Parameter(format!(
            "dimension mismatch: A0 {:?}, J {:?}, Q_U {:?}, basis {:?}",
            a0.shape(),
            jacobian.shape(),
            qu.shape(),
            equilibrium_basis.shape()
        )));
    }
    let a0 = symmetrize(a0);
    let v0 = equilibrium_basis.clone();
    let m = v0.ncols();
    // A0-orthogonal complement: the null space of V0^T A0.
    let c = (v0.transpose() * &a0).transpose();
    let (pc, _) = projector(&c.column_iter().map(|x| x.into_owned()).collect::<Vec<_>>(), n);
    let v1 = range_basis(&(DMatrix::<f64>::identity(n, n) - pc));
    if v1.ncols() + m != n {
        return Err(Error::Parameter("equilibrium basis is rank deficient".into()));
    }
    let mut pinv = DMatrix::zeros(n, n);
    pinv.columns_mut(0, m).copy_from(&v0);
    pinv.columns_mut(m, n - m).copy_from(&v1);
    let p = pinv
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Parameter("equilibrium basis and complement are dependent".into()))?;
    let s = &p * qu * &pinv;
    let mut off = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            if i < m || j < m {
                off = off.max(s[(i, j)].abs());
            }
        }
    }
    let block_defect = off / qu.amax().max(1.0);

    let aj = &a0 * jacobian;
    let symmetry_defect = (&aj - aj.transpose()).norm() / aj.norm().max(f64::MIN_POSITIVE);

    let dissipation_constant = if v1.ncols() == 0 {
        f64::INFINITY
    } else {
        let sym = -0.5 * (&a0 * qu + qu.transpose() * &a0);
        let lhs = v1.transpose() * sym * &v1;
        let rhs = v1.transpose() * &a0 * &v1;
        generalized_eigenvalues(&rhs, &lhs)?[0]
    };
    Ok(YongReport {
        block_defect,
        block_pass: block_defect <= BLOCK_TOL,
        symmetry_defect,
        symmetry_pass: symmetry_defect <= SYMMETRY_TOL,
        dissipation_constant,
        dissipation_pass: dissipation_constant > GWSC_SLACK,
        weak_dissipation_pass: dissipation_constant >= -GWSC_SLACK,
    })
}

/// The reduced moment system of the conservative family at the Maxwellian
/// `m`, in the moment coordinates `c_0..c_{N+2}`.
#[derive(Debug, Clone)]
pub struct EquilibriumSystem {
    pub symmetrizer: DMatrix<f64>,
    pub jacobian: DMatrix<f64>,
    /// `dS/dc` by central finite differences of the moment source.
    pub source_jacobian: DMatrix<f64>,
    /// `d c_eq / d(rho, u, theta)`.
    pub equilibrium_basis: DMatrix<f64>,
}

/// Assembles [`EquilibriumSystem`] for the conservative family of order `order`.
pub fn moment_system_at_equilibrium(
    order: usize,
    m: &MomentState,
    model: &CollisionModel,
    grid: &QuadratureRule,
) -> Result<EquilibriumSystem> {
    let p = AnsatzPoint::maxwellian(Manifold::ConservativeMoment { order }, m.rho, m.u, m.theta)?;
    let sys = MomentSystem::at(&p, grid)?;
    let c = sys.moments.clone();
    let n = c.len();
    let mut qu = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = 1e-6 * c[j].abs().max(1.0);
        let mut cp = c.clone();
        let mut cm = c.clone();
        cp[j] += h;
        cm[j] -= h;
        let sp = moment_source(&cp, model, grid)?;
        let sm = moment_source(&cm, model, grid)?;
        for i in 0..n {
            qu[(i, j)] = (sp[i] - sm[i]) / (2.0 * h);
        }
    }
    Ok(EquilibriumSystem {
        symmetrizer: sys.symmetrizer,
        jacobian: sys.jacobian,
        source_jacobian: qu,
        equilibrium_basis: equilibrium_moment_basis(m, grid, n),
    })
}

/// Outcome of the hyperbolicity audit of one manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperbolicityReport {
    pub manifold: String,
    pub samples: usize,
    /// Largest `max |A1 - A1^T| / max |A1|` before symmetrization.
    pub max_asymmetry: f64,
    /// Samples whose Gram matrix failed Cholesky.
    pub indefinite: usize,
    pub pass: bool,
}

/// Samples random points and checks that `A0` is positive definite and `A1`
/// symmetric to `1e-10`.
pub fn hyperbolicity_audit<R: Rng + ?Sized>(
    manifold: Manifold,
    samples: usize,
    grid: &QuadratureRule,
    rng: &mut R,
) -> Result<HyperbolicityReport> {
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let mut max_asymmetry = 0.0f64;
    let mut indefinite = 0;
    for _ in 0..samples {
        let p = random_point(manifold, grid, rng)?;
        let basis = p.tangent_basis(grid)?;
        if nalgebra::Cholesky::new(symmetrize(&basis.raw_gram(grid))).is_none() {
            indefinite += 1;
        }
        max_asymmetry = max_asymmetry.max(asymmetry(&basis.raw_flux(grid)));
    }
    Ok(HyperbolicityReport {
        manifold: manifold.name(),
        samples,
        max_asymmetry,
        indefinite,
        pass: indefinite == 0 && max_asymmetry <= 1e-10,
    })
}

/// Outcome of the propagation-speed audit of one manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub manifold: String,
    pub samples: usize,
    pub max_radius: f64,
    #[serde(rename = "L")]
    pub bound: f64,
    /// `bound - max_radius`; negative on violation.
    pub margin: f64,
    pub pass: bool,
}

/// Samples random points and checks `spectral_radius <= bound + 1e-9`.
pub fn propagation_speed_audit<R: Rng + ?Sized>(
    manifold: Manifold,
    samples: usize,
    bound: f64,
    grid: &QuadratureRule,
    rng: &mut R,
) -> Result<SpeedReport> {
    if samples == 0 {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    let mut max_radius = 0.0f64;
    for _ in 0..samples {
        let p = random_point(manifold, grid, rng)?;
        max_radius = max_radius.max(spectral_radius(&p, grid)?);
    }
    Ok(SpeedReport {
        manifold: manifold.name(),
        samples,
        max_radius,
        bound,
        margin: bound - max_radius,
        pass: max_radius <= bound + 1e-9,
    })
}
