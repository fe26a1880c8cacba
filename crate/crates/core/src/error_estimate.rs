//! A posteriori error bound for the reduced model:
//! `|df|_p(T) <= |df|_p(0) + int_0^T exp(L_Q (T - s)) |R(s)|_p ds`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::AnsatzPoint;
use crate::error::{Error, Result};
use crate::kinetic::{CollisionModel, DistributionField, SpatialMesh};
use crate::projection::{residual, residual_from_gradient};
use crate::quadrature::QuadratureRule;

/// Default norm exponent.
pub const DEFAULT_P: f64 = 2.0;
/// Default relative size of the perturbations used to estimate `L_Q`.
pub const DEFAULT_PERTURBATION: f64 = 0.1;
/// Factor applied to the largest sampled Lipschitz quotient.
pub const LIPSCHITZ_SAFETY: f64 = 1.5;
/// Perturbations drawn per sampled profile.
const DRAWS_PER_SAMPLE: usize = 32;

fn check_exponent(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Parameter(format!("norm exponent must lie in (1, inf), got {p}")));
    }
    Ok(())
}

/// `(sum_cells dx int |h|^p dxi)^{1/p}`.
pub fn field_norm(grid: &QuadratureRule, dx: f64, profiles: &[Vec<f64>], p: f64) -> Result<f64> {
    check_exponent(p)?;
    let s: f64 = profiles.iter().map(|h| dx * grid.integrate_fn_indexed(|i, _| h[i].abs().powf(p))).sum();
    Ok(s.powf(1.0 / p))
}

/// Residual profiles `(I - P)(xi dx f - Q[f])` per cell for given parameter
/// gradients.
pub fn residual_norm(
    points: &[AnsatzPoint],
    domega_dx: &[Vec<f64>],
    model: &CollisionModel,
    grid: &QuadratureRule,
    mesh: &SpatialMesh,
    p: f64,
) -> Result<f64> {
    if points.len() != domega_dx.len() || points.len() != mesh.cells() {
        return Err(Error::Parameter("points, gradients and mesh are not aligned".into()));
    }
    let profiles = points
        .par_iter()
        .zip(domega_dx)
        .enumerate()
        .map(|(cell, (pt, d))| residual(pt, d, model, grid).map_err(|e| e.in_cell(cell)))
        .collect::<Result<Vec<_>>>()?;
    field_norm(grid, mesh.dx(), &profiles, p)
}

/// Residual profiles of a reduced field on a periodic mesh, with `dx f`
/// taken as the central difference of the evaluated ansatz. Differencing the
/// profile avoids the parameter chart, which degenerates for the moment
/// family at its Gaussian points.
pub fn residual_field(
    points: &[AnsatzPoint],
    model: &CollisionModel,
    grid: &QuadratureRule,
    mesh: &SpatialMesh,
) -> Result<Vec<Vec<f64>>> {
    if points.len() != mesh.cells() {
        return Err(Error::Parameter("points and mesh are not aligned".into()));
    }
    let f = points
        .par_iter()
        .enumerate()
        .map(|(cell, p)| p.evaluate(grid).map_err(|e| e.in_cell(cell)))
        .collect::<Result<Vec<_>>>()?;
    let dx = mesh.dx();
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let (l, r) = (&f[mesh.left(i)], &f[mesh.right(i)]);
            let dfdx: Vec<f64> = l.iter().zip(r).map(|(a, b)| (b - a) / (2.0 * dx)).collect();
            residual_from_gradient(&points[i], &dfdx, model, grid).map_err(|e| e.in_cell(i))
        })
        .collect()
}

/// `int |f1 - f2|^{p-1} |Q[f1] - Q[f2]| / int |f1 - f2|^p`.
pub fn lipschitz_quotient(
    model: &CollisionModel,
    grid: &QuadratureRule,
    f1: &[f64],
    f2: &[f64],
    p: f64,
) -> Result<f64> {
    check_exponent(p)?;
    let q1 = model.apply(grid, f1)?;
    let q2 = model.apply(grid, f2)?;
    let num = grid.integrate_fn_indexed(|i, _| (f1[i] - f2[i]).abs().powf(p - 1.0) * (q1[i] - q2[i]).abs());
    let den = grid.integrate_fn_indexed(|i, _| (f1[i] - f2[i]).abs().powf(p));
    if !(den > 0.0) {
        return Err(Error::Parameter("the two profiles coincide".into()));
    }
    Ok(num / den)
}

/// Empirical `L_Q`: the largest quotient over pairs `(f (1 + eps r), f)` with
/// `f` drawn from `samples` and `r` a random smooth function bounded by one,
/// times [`LIPSCHITZ_SAFETY`].
pub fn lipschitz_estimate<R: Rng + ?Sized>(
    model: &CollisionModel,
    grid: &QuadratureRule,
    samples: &[Vec<f64>],
    perturbation_scale: f64,
    p: f64,
    rng: &mut R,
) -> Result<f64> {
    check_exponent(p)?;
    if !(perturbation_scale > 0.0 && perturbation_scale < 1.0) {
        return Err(Error::Parameter(format!("perturbation scale must lie in (0, 1), got {perturbation_scale}")));
    }
    if samples.is_empty() {
        return Err(Error::Parameter("need at least one sample profile".into()));
    }
    let mut worst = 0.0f64;
    for f in samples {
        for _ in 0..DRAWS_PER_SAMPLE {
            let a: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..=1.0));
            let k: [f64; 2] = std::array::from_fn(|_| rng.gen_range(0.5..=3.0));
            let phase: [f64; 2] = std::array::from_fn(|_| rng.gen_range(0.0..std::f64::consts::TAU));
            let shift: f64 = rng.gen_range(-2.0..=2.0);
            let pert: Vec<f64> = grid
                .nodes()
                .iter()
                .zip(f)
                .map(|(&x, v)| {
                    let r = 0.25
                        * (a[0]
                            + a[1] * (k[0] * x + phase[0]).sin()
                            + a[2] * (k[1] * x + phase[1]).cos()
                            + a[3] * (x - shift).tanh());
                    v * (1.0 + perturbation_scale * r)
                })
                .collect();
            if pert.iter().zip(f).all(|(a, b)| a == b) {
                continue;
            }
            worst = worst.max(lipschitz_quotient(model, grid, &pert, f, p)?);
        }
    }
    Ok(LIPSCHITZ_SAFETY * worst)
}

/// `delta0 + int_0^{t_n} exp(L (t_n - s)) r(s) ds` at every sample time, with
/// the trapezoidal rule on the sample times.
pub fn gronwall_bound(delta0: f64, times: &[f64], residuals: &[f64], lipschitz: f64) -> Result<Vec<f64>> {
    if !(lipschitz >= 0.0) || !lipschitz.is_finite() {
        return Err(Error::Parameter(format!("Lipschitz constant must be nonnegative, got {lipschitz}")));
    }
    if !(delta0 >= 0.0) {
        return Err(Error::Parameter(format!("initial error must be nonnegative, got {delta0}")));
    }
    if times.len() != residuals.len() {
        return Err(Error::Parameter("times and residuals differ in length".into()));
    }
    if times.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::Parameter("times must be nondecreasing".into()));
    }
    Ok((0..times.len())
        .map(|n| {
            let t = times[n];
            let integral: f64 = (1..=n)
                .map(|k| {
                    let (a, b) = (times[k - 1], times[k]);
                    let ga = (lipschitz * (t - a)).exp() * residuals[k - 1];
                    let gb = (lipschitz * (t - b)).exp() * residuals[k];
                    0.5 * (b - a) * (ga + gb)
                })
                .sum();
            delta0 + integral
        })
        .collect())
}

/// `|f(omega) - f_ref|_p` at every output time.
pub fn actual_error(reduced: &[Vec<AnsatzPoint>], reference: &[DistributionField], p: f64) -> Result<Vec<f64>> {
    check_exponent(p)?;
    if reduced.len() != reference.len() {
        return Err(Error::Parameter(format!("{} reduced and {} reference snapshots", reduced.len(), reference.len())));
    }
    reduced
        .iter()
        .zip(reference)
        .map(|(points, f)| {
            if points.len() != f.cells() {
                return Err(Error::Parameter(format!(
                    "reduced field has {} cells, reference {}",
                    points.len(),
                    f.cells()
                )));
            }
            let grid = f.grid();
            let diff = points
                .iter()
                .enumerate()
                .map(|(cell, pt)| {
                    let fh = pt.evaluate(grid).map_err(|e| e.in_cell(cell))?;
                    Ok(fh.iter().zip(f.cell(cell)).map(|(a, b)| a - b).collect())
                })
                .collect::<Result<Vec<Vec<f64>>>>()?;
            field_norm(grid, f.mesh().dx(), &diff, p)
        })
        .collect()
}

/// Measured error against the a posteriori bound over a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub times: Vec<f64>,
    pub residual_norms: Vec<f64>,
    /// Empirical Lipschitz constant of the collision operator.
    pub lipschitz: f64,
    pub bound: Vec<f64>,
    pub actual: Vec<f64>,
    pub p: f64,
}

impl ErrorReport {
    /// `bound / actual` per time; infinite where the actual error vanishes.
    pub fn ratio(&self) -> Vec<f64> {
        self.bound.iter().zip(&self.actual).map(|(b, a)| if *a > 0.0 { b / a } else { f64::INFINITY }).collect()
    }

    /// Whether the measured error exceeds the bound at some time.
    pub fn violated(&self) -> bool {
        self.actual.iter().zip(&self.bound).any(|(a, b)| a > b)
    }
}

/// Evaluates residuals, the Lipschitz constant, the bound and the measured
/// error for a reduced run against a reference run on matched grids.
pub fn estimate<R: Rng + ?Sized>(
    times: &[f64],
    reduced: &[Vec<AnsatzPoint>],
    reference: &[DistributionField],
    model: &CollisionModel,
    p: f64,
    rng: &mut R,
) -> Result<ErrorReport> {
    check_exponent(p)?;
    if times.len() != reduced.len() || times.is_empty() {
        return Err(Error::Parameter("times and snapshots are not aligned".into()));
    }
    let first = &reference[0];
    if reference.iter().any(|f| f.grid() != first.grid() || f.mesh() != first.mesh()) {
        return Err(Error::Parameter("reference snapshots do not share one grid".into()));
    }
    let grid = first.grid();
    let mesh = first.mesh();
    let actual = actual_error(reduced, reference, p)?;
    let residual_norms = reduced
        .iter()
        .map(|points| field_norm(grid, mesh.dx(), &residual_field(points, model, grid, mesh)?, p))
        .collect::<Result<Vec<f64>>>()?;
    // Sample the trajectory tube: a spread of cells at every output time.
    let stride = (mesh.cells() / 8).max(1);
    let samples: Vec<Vec<f64>> = reduced
        .iter()
        .flat_map(|points| points.iter().step_by(stride))
        .map(|pt| pt.evaluate(grid))
        .collect::<Result<_>>()?;
    let lipschitz = lipschitz_estimate(model, grid, &samples, DEFAULT_PERTURBATION, p, rng)?;
    let bound = gronwall_bound(actual[0], times, &residual_norms, lipschitz)?;
    Ok(ErrorReport { times: times.to_vec(), residual_norms, lipschitz, bound, actual, p })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ansatz::Manifold;
    use crate::kinetic::{maxwellian, MomentState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn grid() -> QuadratureRule {
        QuadratureRule::truncated(10.0, 40).unwrap()
    }

    #[test]
    fn equilibrium_residual_vanishes() {
        let g = grid();
        let mesh = SpatialMesh::periodic(4, 1.0).unwrap();
        let m = Manifold::ConservativeMoment { order: 2 };
        let pts = vec![AnsatzPoint::maxwellian(m, 1.0, 0.2, 1.1).unwrap(); 4];
        let bgk = CollisionModel::bgk(0.5).unwrap();
        let n = residual_norm(&pts, &vec![vec![0.0; 5]; 4], &bgk, &g, &mesh, 2.0).unwrap();
        assert!(n < 1e-12);
        let r = residual_field(&pts, &bgk, &g, &mesh).unwrap();
        assert!(field_norm(&g, mesh.dx(), &r, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn norm_examples() {
        let g = QuadratureRule::truncated(4.0, 400).unwrap();
        let (h, a, dx) = (0.7, 1.5, 0.25);
        // A smoothed box of height h and width a.
        let bump: Vec<f64> = g.nodes().iter().map(|&x| h * 0.5 * (1.0 - ((x.abs() - a / 2.0) / 1e-3).tanh())).collect();
        let n = field_norm(&g, dx, std::slice::from_ref(&bump), 2.0).unwrap();
        assert!((n - h * (a * dx).sqrt()).abs() < 1e-3 * n);
        let twice: Vec<f64> = bump.iter().map(|v| 2.0 * v).collect();
        let n2 = field_norm(&g, dx, &[twice], 3.0).unwrap();
        assert!((n2 - 2.0 * field_norm(&g, dx, &[bump], 3.0).unwrap()).abs() < 1e-12 * n2);
        assert!(field_norm(&g, dx, &[], 1.0).is_err());
    }

    #[test]
    fn matched_moment_pairs_give_inverse_tau() {
        let g = grid();
        let m = MomentState::equilibrium(1.0, 0.3, 0.9);
        let f2 = maxwellian(&m, &g);
        // Same (rho, u, theta) as f2: a Hermite-4 perturbation.
        let f1: Vec<f64> = g
            .nodes()
            .iter()
            .zip(&f2)
            .map(|(x, v)| {
                let z = (x - m.u) / m.theta.sqrt();
                v * (1.0 + 0.05 * (z.powi(4) - 6.0 * z * z + 3.0))
            })
            .collect();
        for tau in [0.5, 1.0] {
            let q = lipschitz_quotient(&CollisionModel::bgk(tau).unwrap(), &g, &f1, &f2, 2.0).unwrap();
            assert!((q - 1.0 / tau).abs() < 1e-10 / tau, "{q}");
        }
    }

    #[test]
    fn lipschitz_estimate_is_stable() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<Vec<f64>> = (0..8)
            .map(|k| maxwellian(&MomentState::equilibrium(1.0 + 0.05 * k as f64, 0.1 * k as f64, 1.0), &g))
            .collect();
        let bgk = CollisionModel::bgk(1.0).unwrap();
        let a = lipschitz_estimate(&bgk, &g, &samples[..4], 0.1, 2.0, &mut rng).unwrap();
        let b = lipschitz_estimate(&bgk, &g, &samples, 0.1, 2.0, &mut rng).unwrap();
        assert!(a.is_finite() && a > 0.0 && (b / a - 1.0).abs() < 0.1, "{a} {b}");
        let half = lipschitz_estimate(
            &CollisionModel::bgk(2.0).unwrap(),
            &g,
            &samples,
            0.1,
            2.0,
            &mut ChaCha8Rng::seed_from_u64(1),
        )
        .unwrap();
        let full = lipschitz_estimate(&bgk, &g, &samples, 0.1, 2.0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!((full / half - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gronwall_examples() {
        let times: Vec<f64> = (0..=200).map(|k| k as f64 * 0.01).collect();
        assert!(gronwall_bound(0.0, &times, &vec![0.0; 201], 3.0).unwrap().iter().all(|b| *b == 0.0));
        let r = 0.3;
        let flat = gronwall_bound(0.0, &times, &vec![r; 201], 0.0).unwrap();
        assert!((flat[200] - r * 2.0).abs() < 1e-12);
        let l = 1.5;
        let b = gronwall_bound(0.0, &times, &vec![r; 201], l).unwrap();
        let exact = r * ((l * 2.0f64).exp() - 1.0) / l;
        assert!((b[200] - exact).abs() < 1e-3 * exact);
        let bigger = gronwall_bound(0.0, &times, &vec![r; 201], 2.0 * l).unwrap();
        assert!(b.iter().zip(&bigger).all(|(x, y)| y >= x));
        assert!(b.windows(2).all(|w| w[1] >= w[0]));
        assert!(gronwall_bound(0.0, &times, &vec![r; 201], -1.0).is_err());
    }

    #[test]
    fn self_comparison_is_exact() {
        let g = Arc::new(grid());
        let mesh = SpatialMesh::periodic(3, 1.0).unwrap();
        let m = Manifold::HermitePerturbation { order: 4 };
        let pts: Vec<AnsatzPoint> =
            (0..3).map(|k| AnsatzPoint::new(m, vec![1.0 + 0.1 * k as f64, 0.0, 1.0, 0.0, 0.02]).unwrap()).collect();
        let profiles: Vec<Vec<f64>> = pts.iter().map(|p| p.evaluate(&g).unwrap()).collect();
        let f = DistributionField::from_profiles(g, mesh, &profiles).unwrap();
        let e = actual_error(&[pts.clone(), pts.clone()], &[f.clone(), f.clone()], 2.0).unwrap();
        assert_eq!(e, vec![0.0, 0.0]);
        assert!(actual_error(&[pts[..2].to_vec()], &[f], 2.0).is_err());
    }
}
