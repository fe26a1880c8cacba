//! Distribution fields, macroscopic moments, BGK-family collision operators
//! and the Boltzmann entropy, all on a 1D velocity grid.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::quadrature::QuadratureRule;

/// Values below this are floored before taking logarithms.
pub const POSITIVITY_FLOOR: f64 = 1e-300;

/// Uniform 1D spatial mesh.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialMesh {
    cells: usize,
    length: f64,
    periodic: bool,
}

impl SpatialMesh {
    pub fn new(cells: usize, length: f64, periodic: bool) -> Result<Self> {
        if cells == 0 {
            return Err(Error::Parameter("mesh needs at least one cell".into()));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::Parameter(format!("mesh length must be positive, got {length}")));
        }
        Ok(Self { cells, length, periodic })
    }

    /// Periodic mesh on `[0, length)`.
    pub fn periodic(cells: usize, length: f64) -> Result<Self> {
        Self::new(cells, length, true)
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    pub fn dx(&self) -> f64 {
        self.length / self.cells as f64
    }

    pub fn center(&self, cell: usize) -> f64 {
        (cell as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn left(&self, cell: usize) -> usize {
        if cell == 0 {
            self.cells - 1
        } else {
            cell - 1
        }
    }

    #[inline]
    pub fn right(&self, cell: usize) -> usize {
        if cell + 1 == self.cells {
            0
        } else {
            cell + 1
        }
    }
}

/// `f(x_cell, xi_node)` stored row-major by cell.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    values: Vec<f64>,
    grid: Arc<QuadratureRule>,
    mesh: SpatialMesh,
}

impl DistributionField {
    pub fn new(grid: Arc<QuadratureRule>, mesh: SpatialMesh, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() * mesh.cells() {
            return Err(Error::Parameter(format!(
                "field needs {} x {} values, got {}",
                mesh.cells(),
                grid.len(),
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Realizability(format!(
                "distribution value {} at flat index {bad} is negative or not finite",
                values[bad]
            )));
        }
        Ok(Self { values, grid, mesh })
    }

    /// Samples `f(x, xi)` at cell centers and velocity nodes.
    pub fn from_fn(grid: Arc<QuadratureRule>, mesh: SpatialMesh, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(grid.len() * mesh.cells());
        for c in 0..mesh.cells() {
            let x = mesh.center(c);
            values.extend(grid.nodes().iter().map(|&xi| f(x, xi)));
        }
        Self::new(grid, mesh, values)
    }

    /// Builds a field cell by cell from velocity profiles.
    pub fn from_profiles(grid: Arc<QuadratureRule>, mesh: SpatialMesh, profiles: &[Vec<f64>]) -> Result<Self> {
        if profiles.len() != mesh.cells() {
            return Err(Error::Parameter(format!("expected {} profiles, got {}", mesh.cells(), profiles.len())));
        }
        let values = profiles.concat();
        Self::new(grid, mesh, values)
    }

    pub fn grid(&self) -> &QuadratureRule {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<QuadratureRule> {
        Arc::clone(&self.grid)
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cells(&self) -> usize {
        self.mesh.cells()
    }

    pub fn nodes(&self) -> usize {
        self.grid.len()
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = self.grid.len();
        &self.values[cell * n..(cell + 1) * n]
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn moments(&self, cell: usize) -> Result<MomentState> {
        compute_moments(&self.grid, self.cell(cell))
    }

    /// `int int xi^k f dxi dx` for `k = 0, 1, 2`.
    pub fn conserved_totals(&self) -> [f64; 3] {
        let dx = self.mesh.dx();
        let mut totals = [0.0; 3];
        for c in 0..self.cells() {
            let f = self.cell(c);
            for (k, t) in totals.iter_mut().enumerate() {
                *t += dx * self.grid.integrate_fn_indexed(|i, xi| xi.powi(k as i32) * f[i]);
            }
        }
        totals
    }
}

/// Macroscopic state of a 1D distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentState {
    pub rho: f64,
    pub u: f64,
    pub theta: f64,
    /// Scalar pressure tensor `P` (per unit density) for d = 1.
    pub pressure: f64,
    pub heat_flux: f64,
}

impl MomentState {
    /// Moments of the Maxwellian with the given density, velocity and temperature.
    pub fn equilibrium(rho: f64, u: f64, theta: f64) -> Self {
        Self { rho, u, theta, pressure: theta, heat_flux: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.rho, self.u, self.theta, self.pressure, self.heat_flux];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Realizability(format!("non-finite moments {self:?}")));
        }
        if self.rho <= 0.0 {
            return Err(Error::Realizability(format!("density {} is not positive", self.rho)));
        }
        if self.theta <= 0.0 {
            return Err(Error::Realizability(format!("temperature {} is not positive", self.theta)));
        }
        Ok(())
    }
}

/// Density, velocity, temperature, pressure and heat flux of a velocity profile.
pub fn compute_moments(grid: &QuadratureRule, f: &[f64]) -> Result<MomentState> {
    if f.len() != grid.len() {
        return Err(Error::Parameter(format!("profile has {} values, grid has {} nodes", f.len(), grid.len())));
    }
    let rho = grid.sum(f);
    if !(rho > 0.0) {
        return Err(Error::Realizability(format!("density {rho} is not positive")));
    }
    let u = grid.integrate_fn_indexed(|i, xi| xi * f[i]) / rho;
    let (mut m2, mut m3) = (0.0, 0.0);
    for (i, (&xi, &w)) in grid.nodes().iter().zip(grid.weights()).enumerate() {
        let c = xi - u;
        m2 += w * c * c * f[i];
        m3 += w * c * c * c * f[i];
    }
    let theta = m2 / rho;
    let m = MomentState { rho, u, theta, pressure: theta, heat_flux: m3 / rho };
    m.validate()?;
    Ok(m)
}

/// `rho (2 pi theta)^{-1/2} exp(-(xi - u)^2 / (2 theta))` at every node.
pub fn maxwellian(m: &MomentState, grid: &QuadratureRule) -> Vec<f64> {
    gaussian(m.rho, m.u, m.theta, grid)
}

fn gaussian(rho: f64, u: f64, var: f64, grid: &QuadratureRule) -> Vec<f64> {
    let norm = rho / (2.0 * PI * var).sqrt();
    grid.nodes().iter().map(|&xi| norm * (-(xi - u) * (xi - u) / (2.0 * var)).exp()).collect()
}

/// Relaxation-type collision operator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CollisionKind {
    Bgk,
    Shakhov,
    #[serde(rename = "esbgk")]
    EsBgk,
}

impl CollisionKind {
    pub fn name(&self) -> &'static str {
        match self {
            CollisionKind::Bgk => "bgk",
            CollisionKind::Shakhov => "shakhov",
            CollisionKind::EsBgk => "esbgk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionModel {
    pub kind: CollisionKind,
    pub tau: f64,
    /// Prandtl number; ignored by BGK.
    pub prandtl: f64,
}

impl CollisionModel {
    pub fn new(kind: CollisionKind, tau: f64, prandtl: f64) -> Result<Self> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::Parameter(format!("relaxation time tau must be positive, got {tau}")));
        }
        if kind != CollisionKind::Bgk && (!(prandtl > 0.0) || !prandtl.is_finite()) {
            return Err(Error::Parameter(format!("Prandtl number must be positive, got {prandtl}")));
        }
        Ok(Self { kind, tau, prandtl })
    }

    pub fn bgk(tau: f64) -> Result<Self> {
        Self::new(CollisionKind::Bgk, tau, 1.0)
    }

    pub fn shakhov(tau: f64, prandtl: f64) -> Result<Self> {
        Self::new(CollisionKind::Shakhov, tau, prandtl)
    }

    pub fn es_bgk(tau: f64, prandtl: f64) -> Result<Self> {
        Self::new(CollisionKind::EsBgk, tau, prandtl)
    }

    /// Checks the ES-BGK admissibility bound `Pr >= (d - 1) / d` in dimension `d`.
    pub fn check_dimension(&self, dim: usize) -> Result<()> {
        if self.kind == CollisionKind::EsBgk && dim > 0 {
            let min = (dim as f64 - 1.0) / dim as f64;
            if self.prandtl < min {
                return Err(Error::Parameter(format!(
                    "ES-BGK in dimension {dim} needs Pr >= {min}, got {}",
                    self.prandtl
                )));
            }
        }
        Ok(())
    }

    /// Relaxation frequency multiplying `(target - f)`.
    pub fn rate(&self) -> f64 {
        match self.kind {
            CollisionKind::EsBgk => self.prandtl / self.tau,
            _ => 1.0 / self.tau,
        }
    }

    /// The distribution the operator relaxes towards, built from `m`.
    pub fn target(&self, m: &MomentState, grid: &QuadratureRule) -> Result<Vec<f64>> {
        m.validate()?;
        match self.kind {
            CollisionKind::Bgk => Ok(maxwellian(m, grid)),
            CollisionKind::Shakhov => {
                let mut f = maxwellian(m, grid);
                let th = m.theta;
                let coef = (1.0 - self.prandtl) * m.heat_flux / (3.0 * th * th);
                for (v, &xi) in f.iter_mut().zip(grid.nodes()) {
                    let c = xi - m.u;
                    *v *= 1.0 + coef * c * (c * c / (2.0 * th) - 1.5);
                }
                Ok(f)
            }
            CollisionKind::EsBgk => {
                let lambda = m.theta / self.prandtl + (1.0 - 1.0 / self.prandtl) * m.pressure;
                if !(lambda > 0.0) {
                    return Err(Error::Realizability(format!("ES-BGK covariance {lambda} is not positive")));
                }
                Ok(gaussian(m.rho, m.u, lambda, grid))
            }
        }
    }

    /// `Q[f]` on one velocity profile.
    pub fn apply(&self, grid: &QuadratureRule, f: &[f64]) -> Result<Vec<f64>> {
        let m = compute_moments(grid, f)?;
        let target = self.target(&m, grid)?;
        let rate = self.rate();
        Ok(target.iter().zip(f).map(|(t, v)| rate * (t - v)).collect())
    }

    /// `Q[f]` at one cell of a field.
    pub fn apply_cell(&self, field: &DistributionField, cell: usize) -> Result<Vec<f64>> {
        self.apply(field.grid(), field.cell(cell)).map_err(|e| e.in_cell(cell))
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.kind, tau, self.prandtl)
    }
}

/// The Boltzmann entropy density `eta(f) = f log f - f` and its derivatives.
#[derive(Debug, Clone, Copy, Default)]
pub struct EntropyFunctional;

impl EntropyFunctional {
    pub fn eta(f: f64) -> f64 {
        if f <= 0.0 {
            0.0
        } else {
            f * f.ln() - f
        }
    }

    pub fn eta_prime(f: f64) -> f64 {
        f.max(POSITIVITY_FLOOR).ln()
    }

    pub fn eta_second(f: f64) -> f64 {
        1.0 / f.max(POSITIVITY_FLOOR)
    }
}

/// `int eta(f) dxi` for one profile.
pub fn profile_entropy(grid: &QuadratureRule, f: &[f64]) -> f64 {
    grid.integrate_fn_indexed(|i, _| EntropyFunctional::eta(f[i]))
}

/// Total entropy `sum_cells dx int eta(f) dxi`.
pub fn entropy(field: &DistributionField) -> f64 {
    let dx = field.mesh().dx();
    (0..field.cells()).map(|c| dx * profile_entropy(field.grid(), field.cell(c))).sum()
}

/// `int log(f) Q[f] dxi` for one profile.
pub fn entropy_production(model: &CollisionModel, grid: &QuadratureRule, f: &[f64]) -> Result<f64> {
    let q = model.apply(grid, f)?;
    Ok(grid.integrate_fn_indexed(|i, _| EntropyFunctional::eta_prime(f[i]) * q[i]))
}

/// The collision invariants `{1, xi, xi^2}` sampled on a grid.
#[derive(Debug, Clone)]
pub struct CollisionInvariants {
    basis: [Vec<f64>; 3],
}

impl CollisionInvariants {
    pub fn new(grid: &QuadratureRule) -> Self {
        let pow = |k: i32| grid.nodes().iter().map(|x| x.powi(k)).collect::<Vec<_>>();
        Self { basis: [pow(0), pow(1), pow(2)] }
    }

    pub fn basis(&self) -> &[Vec<f64>; 3] {
        &self.basis
    }

    /// `<c_k, q>` for each invariant.
    pub fn pairings(&self, grid: &QuadratureRule, q: &[f64]) -> [f64; 3] {
        [grid.inner(&self.basis[0], q), grid.inner(&self.basis[1], q), grid.inner(&self.basis[2], q)]
    }
}

/// Outcome of the diagonal-Hessian flux test.
#[derive(Debug, Clone)]
pub enum FluxVerdict {
    /// Every sampled disjoint pair had a negligible mixed second derivative.
    Passes { worst_ratio: f64 },
    /// A pair of disjoint-support perturbations with a non-zero mixed derivative.
    Fails { h1: Vec<f64>, h2: Vec<f64>, cross: f64, diagonal: f64 },
}

impl FluxVerdict {
    pub fn passes(&self) -> bool {
        matches!(self, FluxVerdict::Passes { .. })
    }
}

/// Checks whether the second derivative of `c` at `f` is diagonal, i.e.
/// `d2c(f; h1, h2)` vanishes whenever `h1` and `h2` have disjoint supports.
/// Such functionals admit a flux for the transport operator.
pub fn flux_existence_check<R: Rng + ?Sized>(
    c: &dyn Fn(&[f64]) -> f64,
    f: &[f64],
    grid: &QuadratureRule,
    trials: usize,
    rng: &mut R,
) -> Result<FluxVerdict> {
    const TOL: f64 = 1e-6;
    let n = grid.len();
    if f.len() != n {
        return Err(Error::Parameter("profile length does not match the grid".into()));
    }
    if n < 4 {
        return Err(Error::Parameter("flux check needs at least 4 velocity nodes".into()));
    }
    let sup = f.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let eps = 1e-4 * if sup > 0.0 { sup } else { 1.0 };

    let shifted = |dirs: &[(&[f64], f64)]| -> Vec<f64> {
        let mut g = f.to_vec();
        for (h, s) in dirs {
            for (gi, hi) in g.iter_mut().zip(h.iter()) {
                *gi += s * hi;
            }
        }
        g
    };

    let mut worst_ratio = 0.0f64;
    for _ in 0..trials.max(1) {
        let (h1, h2) = disjoint_bumps(n, rng);
        let cross = (c(&shifted(&[(h1.as_slice(), eps), (h2.as_slice(), eps)]))
            - c(&shifted(&[(h1.as_slice(), eps), (h2.as_slice(), -eps)]))
            - c(&shifted(&[(h1.as_slice(), -eps), (h2.as_slice(), eps)]))
            + c(&shifted(&[(h1.as_slice(), -eps), (h2.as_slice(), -eps)])))
            / (4.0 * eps * eps);
        // Same 4-point stencil along the diagonal direction (step 2 eps).
        let diagonal = (c(&shifted(&[(h1.as_slice(), 2.0 * eps)])) - 2.0 * c(f)
            + c(&shifted(&[(h1.as_slice(), -2.0 * eps)])))
            / (4.0 * eps * eps);
        let ratio = cross.abs() / (1.0 + diagonal.abs());
        worst_ratio = worst_ratio.max(ratio);
        if ratio > TOL {
            return Ok(FluxVerdict::Fails { h1, h2, cross, diagonal });
        }
    }
    Ok(FluxVerdict::Passes { worst_ratio })
}

/// Two unit-height `sin^2` bumps on non-overlapping node ranges.
fn disjoint_bumps<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
    let split = rng.gen_range(2..=n - 2);
    let (l1, r1) = sub_range(0, split, rng);
    let (l2, r2) = sub_range(split, n, rng);
    (bump(n, l1, r1), bump(n, l2, r2))
}

/// Bump supported on node indices `lo..hi`.
fn bump(n: usize, lo: usize, hi: usize) -> Vec<f64> {
    let len = (hi - lo) as f64 + 1.0;
    let mut h = vec![0.0; n];
    for (i, v) in h.iter_mut().enumerate().take(hi).skip(lo) {
        *v = (PI * ((i - lo) as f64 + 1.0) / len).sin().powi(2);
    }
    h
}

fn sub_range<R: Rng + ?Sized>(lo: usize, hi: usize, rng: &mut R) -> (usize, usize) {
    let a = rng.gen_range(lo..hi);
    let b = rng.gen_range(a + 1..=hi);
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid(l: f64, cells: usize) -> QuadratureRule {
        QuadratureRule::truncated(l, cells).unwrap()
    }

    #[test]
    fn moments_of_sampled_maxwellians() {
        let g = grid(8.0, 64);
        let m = compute_moments(&g, &maxwellian(&MomentState::equilibrium(1.0, 0.0, 1.0), &g)).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-10 && m.u.abs() < 1e-10 && (m.theta - 1.0).abs() < 1e-10);
        assert!((m.pressure - m.theta).abs() < 1e-14);

        let f: Vec<f64> = g.nodes().iter().map(|x| (-x * x).exp()).collect();
        let m = compute_moments(&g, &f).unwrap();
        assert!((m.rho - PI.sqrt()).abs() < 1e-10);
        assert!(m.u.abs() < 1e-10);
        assert!((m.theta - 0.5).abs() < 1e-10);

        let g = grid(10.0, 64);
        let m = compute_moments(&g, &maxwellian(&MomentState::equilibrium(2.0, 0.5, 0.8), &g)).unwrap();
        assert!((m.rho - 2.0).abs() < 1e-10 && (m.u - 0.5).abs() < 1e-10 && (m.theta - 0.8).abs() < 1e-10);
        assert!(m.heat_flux.abs() < 1e-10);
    }

    #[test]
    fn moments_reject_unrealizable() {
        let g = grid(4.0, 8);
        assert!(matches!(compute_moments(&g, &vec![0.0; g.len()]), Err(Error::Realizability(_))));
        // A single spike has zero temperature only if exactly one node is hit.
        let mut f = vec![0.0; g.len()];
        f[3] = 1.0;
        assert!(matches!(compute_moments(&g, &f), Err(Error::Realizability(_))));
    }

    #[test]
    fn maxwellian_values() {
        let g = QuadratureRule::new(vec![0.0], vec![1.0], crate::quadrature::Domain::Discrete).unwrap();
        let v = maxwellian(&MomentState::equilibrium(1.0, 0.0, 1.0), &g);
        assert!((v[0] - 0.398_942_280_4).abs() < 1e-10);

        let g = grid(8.0, 32);
        let a = maxwellian(&MomentState::equilibrium(1.3, 0.2, 0.7), &g);
        let b = maxwellian(&MomentState::equilibrium(2.6, 0.2, 0.7), &g);
        for (x, y) in a.iter().zip(&b) {
            assert!((2.0 * x - y).abs() <= 1e-15 * y.abs().max(1e-300));
        }
    }

    #[test]
    fn shakhov_and_esbgk_targets() {
        let g = grid(10.0, 96);
        let eq = MomentState::equilibrium(1.0, 0.3, 1.2);
        let feq = maxwellian(&eq, &g);
        let shakhov = CollisionModel::shakhov(1.0, 2.0 / 3.0).unwrap();
        assert_eq!(shakhov.target(&eq, &g).unwrap(), feq);
        let es = CollisionModel::es_bgk(1.0, 2.0 / 3.0).unwrap();
        let fg = es.target(&eq, &g).unwrap();
        for (a, b) in fg.iter().zip(&feq) {
            assert!((a - b).abs() < 1e-15);
        }

        let m = MomentState { rho: 1.5, u: 0.2, theta: 0.9, pressure: 0.9, heat_flux: 0.3 };
        let fs = shakhov.target(&m, &g).unwrap();
        let got = compute_moments(&g, &fs).unwrap();
        assert!((got.rho - 1.5).abs() < 1e-9);
        assert!((got.u - 0.2).abs() < 1e-9);
        assert!((got.theta - 0.9).abs() < 1e-9);
        assert!((got.heat_flux - (1.0 / 3.0) * 0.3).abs() < 1e-9);
    }

    #[test]
    fn esbgk_rejects_nonpositive_covariance() {
        let g = grid(6.0, 16);
        let es = CollisionModel::es_bgk(1.0, 0.5).unwrap();
        // Lambda = theta / Pr + (1 - 1/Pr) P = 2 - 3 = -1.
        let m = MomentState { rho: 1.0, u: 0.0, theta: 1.0, pressure: 3.0, heat_flux: 0.0 };
        assert!(matches!(es.target(&m, &g), Err(Error::Realizability(_))));
    }

    #[test]
    fn model_validation() {
        assert!(CollisionModel::bgk(0.0).is_err());
        assert!(CollisionModel::shakhov(1.0, -1.0).is_err());
        let es = CollisionModel::es_bgk(1.0, 0.6).unwrap();
        assert!(es.check_dimension(3).is_err());
        assert!(es.check_dimension(2).is_ok());
        assert!(es.check_dimension(1).is_ok());
    }

    #[test]
    fn bgk_apply_examples() {
        let g = grid(8.0, 64);
        let feq = maxwellian(&MomentState::equilibrium(1.0, 0.0, 1.0), &g);
        let bgk = CollisionModel::bgk(1.0).unwrap();
        let q = bgk.apply(&g, &feq).unwrap();
        assert!(q.iter().all(|v| v.abs() < 1e-11));

        let f: Vec<f64> =
            g.nodes().iter().map(|x| (-(x - 0.4) * (x - 0.4) / 1.4).exp() * (1.0 + 0.1 * x.sin())).collect();
        let m = compute_moments(&g, &f).unwrap();
        let target = maxwellian(&m, &g);
        let q = bgk.apply(&g, &f).unwrap();
        for i in 0..g.len() {
            assert!((q[i] - (target[i] - f[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn entropy_examples() {
        let g = grid(4.0, 8);
        let mesh = SpatialMesh::periodic(1, 1.0).unwrap();
        let shared = Arc::new(g.clone());
        let zero = DistributionField::new(shared.clone(), mesh, vec![0.0; g.len()]).unwrap();
        assert_eq!(entropy(&zero), 0.0);
        let e = DistributionField::new(shared, mesh, vec![std::f64::consts::E; g.len()]).unwrap();
        assert!(entropy(&e).abs() < 1e-13);

        let g = grid(10.0, 80);
        let f = maxwellian(&MomentState::equilibrium(1.0, 0.0, 1.0), &g);
        // int f log f = -(1 + log 2 pi) / 2 and int f = 1.
        let want = -(1.5 + 0.5 * (2.0 * PI).ln());
        assert!((profile_entropy(&g, &f) - want).abs() < 1e-10);
        assert!((want + 2.418_938).abs() < 1e-6);
    }

    #[test]
    fn entropy_production_examples() {
        let g = grid(10.0, 80);
        let feq = maxwellian(&MomentState::equilibrium(1.0, 0.0, 1.0), &g);
        let bgk = CollisionModel::bgk(1.0).unwrap();
        assert!(entropy_production(&bgk, &g, &feq).unwrap().abs() < 1e-11);

        let f: Vec<f64> = feq
            .iter()
            .zip(g.nodes())
            .map(|(v, x)| v * (1.0 + 0.1 * (x * x * x - 3.0 * x) * (-x * x / 4.0).exp()))
            .collect();
        let s1 = entropy_production(&bgk, &g, &f).unwrap();
        assert!(s1 < 0.0);
        let s2 = entropy_production(&CollisionModel::bgk(2.0).unwrap(), &g, &f).unwrap();
        assert!((s2 - 0.5 * s1).abs() <= 1e-15 * s1.abs());
    }

    #[test]
    fn flux_check_examples() {
        let g = grid(6.0, 24);
        let f = maxwellian(&MomentState::equilibrium(1.0, 0.0, 1.0), &g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);

        let quad = |h: &[f64]| g.integrate_fn_indexed(|i, _| h[i] * h[i]);
        assert!(flux_existence_check(&quad, &f, &g, 50, &mut rng).unwrap().passes());

        let xi: Vec<f64> = g.nodes().iter().map(|x| x * x * x).collect();
        let linear = |h: &[f64]| g.inner(&xi, h);
        assert!(flux_existence_check(&linear, &f, &g, 50, &mut rng).unwrap().passes());

        let square_mass = |h: &[f64]| g.sum(h).powi(2);
        match flux_existence_check(&square_mass, &f, &g, 50, &mut rng).unwrap() {
            FluxVerdict::Fails { h1, h2, cross, .. } => {
                assert!(h1.iter().zip(&h2).all(|(a, b)| a * b == 0.0));
                let want = 2.0 * g.sum(&h1) * g.sum(&h2);
                assert!((cross - want).abs() < 1e-4 * want.abs());
            }
            other => panic!("expected a witness, got {other:?}"),
        }
    }
}
