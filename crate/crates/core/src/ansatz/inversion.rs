//! Moment inversion and initial-value projection.
//!
//! For the conservative moment family the map from `(alpha, u, theta)` to the
//! moments `c_0..c_{N+2}` is inverted by variable projection: for a fixed
//! Gaussian `(u, theta)` the coefficients `alpha` solve the Hankel system
//! matching `c_0..c_N`, which leaves a two-dimensional nonlinear problem for
//! the two remaining moments. Near Gaussians the inverse folds, so several
//! starting points are tried and the solution closest to a reference is kept.

use nalgebra::{Cholesky, DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;

use super::{hermite_values, shifted_to_monomial, AnsatzPoint, Manifold};
use crate::error::{Error, Result};
use crate::kinetic::{compute_moments, DistributionField};
use crate::quadrature::QuadratureRule;

const MAX_ITER: usize = 50;
const MAX_HALVINGS: usize = 12;
/// Scaled residual at which the inner Newton iteration stops.
const NEWTON_TOL: f64 = 1e-13;
/// Scaled residual accepted when the iteration stalls at round-off.
const ACCEPT_TOL: f64 = 1e-12;
/// Acceptance tolerance on `|c_k - c_k(omega)| / (1 + |c_k|)`.
const MOMENT_TOL: f64 = 1e-11;
const RING_RADII: [f64; 6] = [0.25, 1.0, 4.0, 16.0, 64.0, 256.0];
const RING_ANGLES: usize = 16;
const RING_MAX_OFFSET: f64 = 4.0;

/// `int xi^k f(xi; omega) dxi` for `k < count`.
pub fn moments_of(p: &AnsatzPoint, grid: &QuadratureRule, count: usize) -> Result<Vec<f64>> {
    let f = p.evaluate(grid)?;
    Ok(raw_moments(grid, &f, count))
}

pub(crate) fn raw_moments(grid: &QuadratureRule, f: &[f64], count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    for ((&x, &w), &v) in grid.nodes().iter().zip(grid.weights()).zip(f) {
        let mut t = w * v;
        for o in out.iter_mut() {
            *o += t;
            t *= x;
        }
    }
    out
}

/// Conservative moment parameters reproducing `c_0..c_{N+2}`, preferring the
/// branch closest to the Gaussian fit of `c`.
pub fn params_from_moments(order: usize, c: &[f64], grid: &QuadratureRule) -> Result<AnsatzPoint> {
    params_from_moments_near(order, c, grid, None)
}

/// As [`params_from_moments`], preferring the branch closest to `guess`.
pub fn params_from_moments_near(
    order: usize,
    c: &[f64],
    grid: &QuadratureRule,
    guess: Option<&AnsatzPoint>,
) -> Result<AnsatzPoint> {
    let manifold = Manifold::ConservativeMoment { order };
    manifold.validate()?;
    if c.len() != order + 3 {
        return Err(Error::Parameter(format!("order {order} needs {} moments, got {}", order + 3, c.len())));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Realizability("moments are not finite".into()));
    }
    if !(c[0] > 0.0) {
        return Err(Error::Realizability(format!("density moment {} is not positive", c[0])));
    }
    let u0 = c[1] / c[0];
    let theta0 = c[2] / c[0] - u0 * u0;
    if !(theta0 > 0.0) {
        return Err(Error::Realizability(format!("second central moment {theta0} is not positive")));
    }
    let fit = MomentFit::new(order, c, grid, u0, theta0.sqrt());

    let guess_start = guess.and_then(|g| g.gaussian()).filter(|(_, th)| *th > 0.0).map(|(u, th)| fit.coords(u, th));

    let mut starts: Vec<[f64; 2]> = Vec::new();
    if let Some(s) = guess_start {
        starts.push(s);
    }
    starts.push([0.0, 0.0]);

    let mut negative = false;
    let reference = guess_start.unwrap_or([0.0, 0.0]);
    for s in &starts {
        match fit.solve_from(*s) {
            Some(sol) if sol.realizable => return fit.finish(sol),
            Some(_) => negative = true,
            None => {}
        }
    }

    let r0 = fit.residual(&[0.0, 0.0]).map(|(r, _)| r.norm()).unwrap_or(1e-6);
    let base = r0.sqrt().max(1e-8);
    for kappa in RING_RADII {
        let radius = kappa * base;
        if radius > RING_MAX_OFFSET {
            break;
        }
        let mut found: Vec<Solution> = Vec::new();
        for j in 0..RING_ANGLES {
            let phi = j as f64 * std::f64::consts::TAU / RING_ANGLES as f64;
            let s = [radius * phi.cos(), radius * phi.sin()];
            match fit.solve_from(s) {
                Some(sol) if sol.realizable => found.push(sol),
                Some(_) => negative = true,
                None => {}
            }
        }
        if let Some(best) = found.into_iter().min_by(|a, b| dist2(&a.s, &reference).total_cmp(&dist2(&b.s, &reference)))
        {
            return fit.finish(best);
        }
    }
    if negative {
        Err(Error::Realizability(format!(
            "moments {c:?} are only matched by ansatz profiles that are negative on the grid"
        )))
    } else {
        Err(Error::Inversion(format!("no convergence for moments {c:?} within {MAX_ITER} damped iterations")))
    }
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

struct Solution {
    s: [f64; 2],
    beta: Vec<f64>,
    realizable: bool,
}

/// The reduced problem in the normalized variable `z = (xi - shift) / scale`,
/// with unknowns `s = ((u - shift) / scale, ln(theta / scale^2))`. The
/// polynomial factor is expanded in Hermite polynomials of `z`, which keeps the
/// linear subproblem well conditioned near the Gaussian fit.
struct MomentFit<'a> {
    order: usize,
    grid: &'a QuadratureRule,
    raw: &'a [f64],
    shift: f64,
    scale: f64,
    /// `He_k(z_i)` for `k = 0..=N+2`, row-major by node.
    hez: Vec<f64>,
    target: Vec<f64>,
    tscale: Vec<f64>,
}

impl<'a> MomentFit<'a> {
    fn new(order: usize, c: &'a [f64], grid: &'a QuadratureRule, shift: f64, scale: f64) -> Self {
        let m = order + 3;
        let mut hez = vec![0.0; m * grid.len()];
        for (i, &x) in grid.nodes().iter().enumerate() {
            hermite_values((x - shift) / scale, &mut hez[i * m..(i + 1) * m]);
        }
        let zmom = normalize_moments(c, shift, scale);
        let coeffs = hermite_coefficients(m);
        let target: Vec<f64> = coeffs.iter().map(|row| row.iter().zip(&zmom).map(|(a, b)| a * b).sum()).collect();
        let tscale = target.iter().map(|v: &f64| 1.0 + v.abs()).collect();
        Self { order, grid, raw: c, shift, scale, hez, target, tscale }
    }

    fn coords(&self, u: f64, theta: f64) -> [f64; 2] {
        [(u - self.shift) / self.scale, (theta / (self.scale * self.scale)).ln()]
    }

    fn residual(&self, s: &[f64; 2]) -> Option<(Vector2<f64>, Vec<f64>)> {
        let n = self.order;
        let m = n + 3;
        let var = s[1].exp();
        if !var.is_finite() || var <= 0.0 {
            return None;
        }
        // mixed[k][l] = int G He_k He_l for k <= N+2, l <= N.
        let mut mixed = DMatrix::<f64>::zeros(m, n + 1);
        let (nodes, weights) = (self.grid.nodes(), self.grid.weights());
        for i in 0..nodes.len() {
            let he = &self.hez[i * m..(i + 1) * m];
            let z = (nodes[i] - self.shift) / self.scale;
            let d = z - s[0];
            let g = weights[i] * (-d * d / (2.0 * var)).exp();
            if g == 0.0 {
                continue;
            }
            for l in 0..=n {
                let gl = g * he[l];
                for k in 0..m {
                    mixed[(k, l)] += gl * he[k];
                }
            }
        }
        let gram = mixed.rows(0, n + 1).into_owned();
        let chol = Cholesky::new(0.5 * (&gram + gram.transpose()))?;
        let beta = chol.solve(&DVector::from_column_slice(&self.target[..=n]));
        if beta.iter().any(|b| !b.is_finite()) {
            return None;
        }
        let mut r = Vector2::zeros();
        for j in 0..2 {
            let k = n + 1 + j;
            let pred = mixed.row(k).dot(&beta.transpose());
            r[j] = (pred - self.target[k]) / self.tscale[k];
        }
        if r.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((r, beta.as_slice().to_vec()))
    }

    fn solve_from(&self, start: [f64; 2]) -> Option<Solution> {
        let (mut r, mut beta) = self.residual(&start)?;
        let mut s = start;
        let mut norm = r.norm();
        // An acceptable start is kept: along the fold, polishing the last
        // digits can move (u, theta) far for a negligible moment change.
        let iterations = if r.amax() <= ACCEPT_TOL { 0 } else { MAX_ITER };
        for _ in 0..iterations {
            if r.amax() <= NEWTON_TOL {
                break;
            }
            let jac = self.jacobian(&s)?;
            let step = jac
                .try_inverse()
                .map(|inv| -(inv * r))
                .filter(|d| d.iter().all(|v| v.is_finite()))
                .unwrap_or_else(|| -(jac.transpose() * r));
            let mut accepted = None;
            let mut t = 1.0;
            for _ in 0..=MAX_HALVINGS {
                let cand = [s[0] + t * step[0], s[1] + t * step[1]];
                if let Some((rc, bc)) = self.residual(&cand) {
                    if rc.norm() < norm {
                        accepted = Some((cand, rc, bc));
                        break;
                    }
                }
                t *= 0.5;
            }
            let Some((cand, rc, bc)) = accepted else { break };
            s = cand;
            r = rc;
            beta = bc;
            norm = r.norm();
        }
        if r.amax() > ACCEPT_TOL {
            return None;
        }
        let realizable = self.hez.chunks(self.order + 3).all(|he| {
            let p: f64 = beta.iter().zip(he).map(|(b, h)| b * h).sum();
            p >= 0.0
        });
        Some(Solution { s, beta, realizable })
    }

    fn jacobian(&self, s: &[f64; 2]) -> Option<Matrix2<f64>> {
        const H: f64 = 1e-7;
        let mut jac = Matrix2::zeros();
        for k in 0..2 {
            let mut p = *s;
            let mut m = *s;
            p[k] += H;
            m[k] -= H;
            let rp = self.residual(&p)?.0;
            let rm = self.residual(&m)?.0;
            jac.set_column(k, &((rp - rm) / (2.0 * H)));
        }
        Some(jac)
    }

    fn finish(&self, sol: Solution) -> Result<AnsatzPoint> {
        let u = self.shift + self.scale * sol.s[0];
        let theta = self.scale * self.scale * sol.s[1].exp();
        let coeffs = hermite_coefficients(self.order + 1);
        let zpoly: Vec<f64> =
            (0..=self.order).map(|j| (j..=self.order).map(|l| sol.beta[l] * coeffs[l][j]).sum()).collect();
        let mut omega = shifted_to_monomial(&zpoly, self.shift, self.scale);
        omega.push(u);
        omega.push(theta);
        let p = AnsatzPoint::new(Manifold::ConservativeMoment { order: self.order }, omega)?;
        let got = moments_of(&p, self.grid, self.order + 3)?;
        for (k, (g, c)) in got.iter().zip(self.raw).enumerate() {
            if (g - c).abs() > MOMENT_TOL * (1.0 + c.abs()) {
                return Err(Error::Inversion(format!("moment {k} reproduced as {g}, expected {c}")));
            }
        }
        Ok(p)
    }
}

/// Monomial coefficients of `He_0..He_{count-1}`: `He_k(z) = sum_j row_k[j] z^j`.
fn hermite_coefficients(count: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(count);
    for k in 0..count {
        let mut row = vec![0.0; count];
        match k {
            0 => row[0] = 1.0,
            1 => row[1] = 1.0,
            _ => {
                for j in 0..k {
                    row[j + 1] += rows[k - 1][j];
                    row[j] -= (k - 1) as f64 * rows[k - 2][j];
                }
            }
        }
        rows.push(row);
    }
    rows
}

/// Moments of `((xi - shift) / scale)^k` from moments of `xi^k`.
fn normalize_moments(c: &[f64], shift: f64, scale: f64) -> Vec<f64> {
    (0..c.len())
        .map(|k| {
            let mut acc = 0.0;
            let mut binom = 1.0;
            for j in 0..=k {
                // binom = C(k, j)
                acc += binom * (-shift).powi((k - j) as i32) * c[j];
                binom = binom * (k - j) as f64 / (j + 1) as f64;
            }
            acc / scale.powi(k as i32)
        })
        .collect()
}

/// Projects an initial field onto the manifold, cell by cell.
///
/// The conservative moment family matches the moments `c_0..c_{N+2}`. The
/// other families solve the metric-orthogonality conditions
/// `g(f0 - f(omega), df/domega_k) = 0` by damped Newton.
pub fn project_initial(manifold: Manifold, f0: &DistributionField) -> Result<Vec<AnsatzPoint>> {
    manifold.validate()?;
    let grid = f0.grid();
    let cells = f0.cells();
    let first: Vec<Result<AnsatzPoint>> = (0..cells)
        .into_par_iter()
        .map(|cell| project_profile(manifold, grid, f0.cell(cell), None).map_err(|e| e.in_cell(cell)))
        .collect();
    let mut out: Vec<Option<AnsatzPoint>> = Vec::with_capacity(cells);
    let mut pending = Vec::new();
    for (cell, r) in first.into_iter().enumerate() {
        match r {
            Ok(p) => out.push(Some(p)),
            Err(e) => {
                pending.push((cell, e));
                out.push(None);
            }
        }
    }
    // Retry failed cells from the nearest solved neighbour.
    for (cell, err) in pending {
        let guess = (1..cells).find_map(|d| {
            let left = (cell + cells - d % cells) % cells;
            out[left].clone().or_else(|| out[(cell + d) % cells].clone())
        });
        let Some(guess) = guess else { return Err(err) };
        match project_profile(manifold, grid, f0.cell(cell), Some(&guess)) {
            Ok(p) => out[cell] = Some(p),
            Err(_) => return Err(err),
        }
    }
    Ok(out.into_iter().map(|p| p.expect("every cell solved")).collect())
}

/// Projects a single velocity profile.
pub(crate) fn project_profile(
    manifold: Manifold,
    grid: &QuadratureRule,
    f: &[f64],
    guess: Option<&AnsatzPoint>,
) -> Result<AnsatzPoint> {
    match manifold {
        Manifold::ConservativeMoment { order } => {
            let c = raw_moments(grid, f, order + 3);
            params_from_moments_near(order, &c, grid, guess)
        }
        _ => {
            let start = match guess {
                Some(g) => g.clone(),
                None => default_start(manifold, grid, f)?,
            };
            orthogonal_projection(start, grid, f)
        }
    }
}

fn default_start(manifold: Manifold, grid: &QuadratureRule, f: &[f64]) -> Result<AnsatzPoint> {
    match manifold {
        Manifold::EntropyClosure { order } if order < 3 => {
            let mass = grid.sum(f);
            if !(mass > 0.0) {
                return Err(Error::Realizability(format!("density {mass} is not positive")));
            }
            let width: f64 = grid.weights().iter().sum();
            let mut omega = vec![(mass / width).ln()];
            omega.resize(order, 0.0);
            AnsatzPoint::new(manifold, omega)
        }
        _ => {
            let m = compute_moments(grid, f)?;
            AnsatzPoint::maxwellian(manifold, m.rho, m.u, m.theta)
        }
    }
}

fn orthogonal_projection(start: AnsatzPoint, grid: &QuadratureRule, f: &[f64]) -> Result<AnsatzPoint> {
    let conditions = |p: &AnsatzPoint| -> Option<DVector<f64>> {
        let fh = p.evaluate_unchecked(grid);
        let diff: Vec<f64> = f.iter().zip(&fh).map(|(a, b)| a - b).collect();
        let basis = p.tangent_basis(grid).ok()?;
        let v = DVector::from_vec(basis.pair(grid, &diff));
        v.iter().all(|x| x.is_finite()).then_some(v)
    };
    let scale_of = |p: &AnsatzPoint| -> f64 {
        p.tangent_basis(grid)
            .map(|b| {
                b.weighted_columns()
                    .iter()
                    .map(|d| grid.integrate_fn_indexed(|i, _| (f[i] * d[i]).abs()))
                    .fold(0.0, f64::max)
            })
            .unwrap_or(1.0)
            .max(f64::MIN_POSITIVE)
    };

    let mut p = start;
    let mut r =
        conditions(&p).ok_or_else(|| Error::Inversion("orthogonality conditions not finite at start".into()))?;
    let dim = p.dim();
    for _ in 0..MAX_ITER {
        let tol = 1e-12 * scale_of(&p);
        if r.amax() <= tol {
            break;
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for k in 0..dim {
            let h = 1e-7 * p.omega()[k].abs().max(1e-2);
            let mut plus = p.omega().to_vec();
            let mut minus = p.omega().to_vec();
            plus[k] += h;
            minus[k] -= h;
            let rp = p.with_omega(plus).ok().and_then(|q| conditions(&q));
            let rm = p.with_omega(minus).ok().and_then(|q| conditions(&q));
            match (rp, rm) {
                (Some(a), Some(b)) => jac.set_column(k, &((a - b) / (2.0 * h))),
                _ => return Err(Error::Inversion("Jacobian evaluation left the chart".into())),
            }
        }
        let step = jac
            .clone()
            .lu()
            .solve(&(-&r))
            .filter(|d| d.iter().all(|v| v.is_finite()))
            .unwrap_or_else(|| -(jac.transpose() * &r));
        let norm = r.norm();
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let omega: Vec<f64> = p.omega().iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Ok(q) = p.with_omega(omega) {
                if let Some(rq) = conditions(&q) {
                    if rq.norm() < norm {
                        accepted = Some((q, rq));
                        break;
                    }
                }
            }
            t *= 0.5;
        }
        let (q, rq) =
            accepted.ok_or_else(|| Error::Inversion("damped Newton stalled on the orthogonality conditions".into()))?;
        p = q;
        r = rq;
    }
    if r.amax() > 1e-10 * scale_of(&p) {
        return Err(Error::Inversion(format!("orthogonality residual {} after {MAX_ITER} iterations", r.amax())));
    }
    p.evaluate(grid)?;
    Ok(p)
}
