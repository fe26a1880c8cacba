//! Time integration of the reduced system `A0 dt omega + A1 dx omega = Q`.
//!
//! The conservative moment family is advanced in balanced-law form on the
//! moments `c_k = int xi^k f`, `k = 0..N+2`, with a local Lax–Friedrichs flux;
//! parameters are recovered from the moments after every stage. Other families
//! are advanced in quasi-linear form with Rusanov-type dissipation.

use std::sync::Arc;

use nalgebra::{Cholesky, DVector};
use rayon::prelude::*;

use crate::ansatz::{params_from_moments_near, project_initial, raw_moments, AnsatzPoint, Manifold};
use crate::error::{Error, Result};
use crate::kinetic::{profile_entropy, CollisionModel, DistributionField, SpatialMesh};
use crate::projection::{generalized_eigenvalues, symmetrize};
use crate::quadrature::QuadratureRule;

/// Default CFL number.
pub const DEFAULT_CFL: f64 = 0.45;
/// Time steps never exceed this fraction of the relaxation time `1 / rate`.
pub const SOURCE_STEP_FRACTION: f64 = 0.2;
/// Spectral radius beyond which the time step is considered collapsed.
pub const BLOW_UP_RADIUS: f64 = 1e6;

/// Largest `|lambda|` of the pencil `A1 x = lambda A0 x` on the tangent space.
///
/// The pencil is assembled on [`AnsatzPoint::tangent_frame`], which spans the
/// same space as the chart basis but stays regular where the chart degenerates.
pub fn spectral_radius(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<f64> {
    let ev = tangent_speeds(p, grid)?;
    Ok(ev.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// All characteristic speeds at `p`, ascending.
pub fn tangent_speeds(p: &AnsatzPoint, grid: &QuadratureRule) -> Result<Vec<f64>> {
    let frame = p.tangent_frame(grid)?;
    generalized_eigenvalues(&symmetrize(&frame.raw_gram(grid)), &symmetrize(&frame.raw_flux(grid)))
}

/// Parameters `omega(t, x)` on a periodic mesh.
#[derive(Debug, Clone)]
pub struct ReducedState {
    grid: Arc<QuadratureRule>,
    mesh: SpatialMesh,
    points: Vec<AnsatzPoint>,
    /// Conserved moments per cell; authoritative for the moment family.
    moments: Option<Vec<Vec<f64>>>,
    time: f64,
}

impl ReducedState {
    pub fn new(grid: Arc<QuadratureRule>, mesh: SpatialMesh, points: Vec<AnsatzPoint>) -> Result<Self> {
        if !mesh.is_periodic() {
            return Err(Error::Parameter("the reduced solver needs a periodic mesh".into()));
        }
        if points.len() != mesh.cells() {
            return Err(Error::Parameter(format!("{} points for {} cells", points.len(), mesh.cells())));
        }
        let manifold = points[0].manifold();
        if points.iter().any(|p| p.manifold() != manifold) {
            return Err(Error::Parameter("all cells must share one manifold".into()));
        }
        for (cell, p) in points.iter().enumerate() {
            p.evaluate(&grid).map_err(|e| e.in_cell(cell))?;
        }
        let moments = match manifold {
            Manifold::ConservativeMoment { order } => {
                Some(points.iter().map(|p| raw_moments(&grid, &p.evaluate_unchecked(&grid), order + 3)).collect())
            }
            _ => None,
        };
        Ok(Self { grid, mesh, points, moments, time: 0.0 })
    }

    /// Projects a kinetic field onto `manifold`, cell by cell.
    pub fn from_field(manifold: Manifold, f0: &DistributionField) -> Result<Self> {
        let points = project_initial(manifold, f0)?;
        let mut state = Self::new(f0.shared_grid(), *f0.mesh(), points)?;
        if let Some(m) = state.moments.as_mut() {
            // The initial moments are those of the data, not of the fitted points.
            for (cell, c) in m.iter_mut().enumerate() {
                *c = raw_moments(f0.grid(), f0.cell(cell), c.len());
            }
        }
        Ok(state)
    }

    pub fn grid(&self) -> &QuadratureRule {
        &self.grid
    }

    pub fn shared_grid(&self) -> Arc<QuadratureRule> {
        self.grid.clone()
    }

    pub fn mesh(&self) -> &SpatialMesh {
        &self.mesh
    }

    pub fn points(&self) -> &[AnsatzPoint] {
        &self.points
    }

    pub fn manifold(&self) -> Manifold {
        self.points[0].manifold()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// The conserved moments `c_0..c_{N+2}` per cell, for the moment family.
    pub fn moments(&self) -> Option<&[Vec<f64>]> {
        self.moments.as_deref()
    }

    /// `f(xi; omega)` in every cell.
    pub fn evaluate(&self) -> Result<DistributionField> {
        let profiles = self
            .points
            .iter()
            .enumerate()
            .map(|(cell, p)| p.evaluate(&self.grid).map_err(|e| e.in_cell(cell)))
            .collect::<Result<Vec<_>>>()?;
        DistributionField::from_profiles(self.grid.clone(), self.mesh, &profiles)
    }

    /// `sum_cells dx c_k` for the tracked moments: `k = 0..N+2` for the moment
    /// family, mass, momentum and energy otherwise.
    pub fn totals(&self) -> Vec<f64> {
        let dx = self.mesh.dx();
        let per_cell: Vec<Vec<f64>> = match &self.moments {
            Some(m) => m.clone(),
            None => self.points.iter().map(|p| raw_moments(&self.grid, &p.evaluate_unchecked(&self.grid), 3)).collect(),
        };
        let mut out = vec![0.0; per_cell[0].len()];
        for c in &per_cell {
            for (o, v) in out.iter_mut().zip(c) {
                *o += dx * v;
            }
        }
        out
    }

    /// `sum_cells dx int (f log f - f) dxi`.
    pub fn entropy(&self) -> f64 {
        let dx = self.mesh.dx();
        self.points.iter().map(|p| dx * profile_entropy(&self.grid, &p.evaluate_unchecked(&self.grid))).sum()
    }

    /// Largest spectral radius over the cells.
    pub fn max_speed(&self) -> Result<f64> {
        let radii = self
            .points
            .par_iter()
            .enumerate()
            .map(|(cell, p)| spectral_radius(p, &self.grid).map_err(|e| e.in_cell(cell)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(radii.into_iter().fold(0.0, f64::max))
    }

    /// `cfl dx / max radius`, capped by [`SOURCE_STEP_FRACTION`]` / rate`.
    pub fn stable_dt(&self, model: &CollisionModel, cfl: f64) -> Result<f64> {
        if !(cfl > 0.0 && cfl < 1.0) {
            return Err(Error::Parameter(format!("cfl must lie in (0, 1), got {cfl}")));
        }
        let speed = self.max_speed()?;
        if !(speed <= BLOW_UP_RADIUS) {
            return Err(Error::BlowUp(speed));
        }
        let transport = if speed > 0.0 { cfl * self.mesh.dx() / speed } else { f64::INFINITY };
        Ok(transport.min(SOURCE_STEP_FRACTION / model.rate()))
    }
}

/// One SSP-RK2 step with the stable time step.
pub fn step(state: &ReducedState, model: &CollisionModel, cfl: f64) -> Result<ReducedState> {
    let dt = state.stable_dt(model, cfl)?;
    advance(state, model, dt)
}

/// One SSP-RK2 step of size `dt`.
pub fn advance(state: &ReducedState, model: &CollisionModel, dt: f64) -> Result<ReducedState> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let mut next = match state.manifold() {
        Manifold::ConservativeMoment { order } => advance_conservative(state, model, dt, order)?,
        _ => advance_quasilinear(state, model, dt)?,
    };
    next.time = state.time + dt;
    Ok(next)
}

fn advance_conservative(state: &ReducedState, model: &CollisionModel, dt: f64, order: usize) -> Result<ReducedState> {
    let c0 = state.moments.as_ref().expect("moment family tracks moments");
    let l0 = conservative_rhs(state, &state.points, c0, model)?;
    let c1: Vec<Vec<f64>> = c0.iter().zip(&l0).map(|(c, l)| axpy(c, dt, l)).collect();
    let p1 = recover(state, &c1, &state.points, order)?;
    let l1 = conservative_rhs(state, &p1, &c1, model)?;
    let c2: Vec<Vec<f64>> = c0
        .iter()
        .zip(&c1)
        .zip(&l1)
        .map(|((a, b), l)| a.iter().zip(b).zip(l).map(|((a, b), l)| 0.5 * a + 0.5 * (b + dt * l)).collect())
        .collect();
    let p2 = recover(state, &c2, &p1, order)?;
    Ok(ReducedState { points: p2, moments: Some(c2), ..state.clone() })
}

/// `-(F_{i+1/2} - F_{i-1/2}) / dx + S_i` for every cell.
fn conservative_rhs(
    state: &ReducedState,
    points: &[AnsatzPoint],
    moments: &[Vec<f64>],
    model: &CollisionModel,
) -> Result<Vec<Vec<f64>>> {
    let grid = &*state.grid;
    let per_cell: Vec<(f64, Vec<f64>, Vec<f64>)> = points
        .par_iter()
        .zip(moments)
        .enumerate()
        .map(|(cell, (p, c))| {
            let local = || -> Result<(f64, Vec<f64>, Vec<f64>)> {
                let f = p.evaluate(grid)?;
                let n = c.len();
                let radius = spectral_radius(p, grid)?;
                let mut flux = c[1..].to_vec();
                flux.push(raw_moments(grid, &f, n + 1)[n]);
                let q = model.apply(grid, &f)?;
                Ok((radius, flux, raw_moments(grid, &q, n)))
            };
            local().map_err(|e| e.in_cell(cell))
        })
        .collect::<Result<_>>()?;
    if let Some(r) = per_cell.iter().map(|x| x.0).find(|r| !(*r <= BLOW_UP_RADIUS)) {
        return Err(Error::BlowUp(r));
    }
    let mesh = &state.mesh;
    let dx = mesh.dx();
    let cells = mesh.cells();
    // Flux through the right face of each cell.
    let faces: Vec<Vec<f64>> = (0..cells)
        .map(|i| {
            let j = mesh.right(i);
            let a = per_cell[i].0.max(per_cell[j].0);
            (0..moments[i].len())
                .map(|k| 0.5 * (per_cell[i].1[k] + per_cell[j].1[k]) - 0.5 * a * (moments[j][k] - moments[i][k]))
                .collect()
        })
        .collect();
    Ok((0..cells)
        .map(|i| {
            let left = &faces[mesh.left(i)];
            (0..moments[i].len()).map(|k| -(faces[i][k] - left[k]) / dx + per_cell[i].2[k]).collect()
        })
        .collect())
}

/// Inverts the moments of every cell, starting from `near`; a failed cell is
/// retried once from each neighbour.
fn recover(state: &ReducedState, moments: &[Vec<f64>], near: &[AnsatzPoint], order: usize) -> Result<Vec<AnsatzPoint>> {
    let grid = &*state.grid;
    let mesh = &state.mesh;
    moments
        .par_iter()
        .enumerate()
        .map(|(cell, c)| {
            params_from_moments_near(order, c, grid, Some(&near[cell])).or_else(|err| {
                [mesh.left(cell), mesh.right(cell)]
                    .iter()
                    .find_map(|&j| params_from_moments_near(order, c, grid, Some(&near[j])).ok())
                    .ok_or_else(|| err.in_cell(cell))
            })
        })
        .collect()
}

fn advance_quasilinear(state: &ReducedState, model: &CollisionModel, dt: f64) -> Result<ReducedState> {
    let w0: Vec<Vec<f64>> = state.points.iter().map(|p| p.omega().to_vec()).collect();
    let l0 = quasilinear_rhs(state, &state.points, model)?;
    let w1: Vec<Vec<f64>> = w0.iter().zip(&l0).map(|(w, l)| axpy(w, dt, l)).collect();
    let p1 = to_points(state, w1.clone())?;
    let l1 = quasilinear_rhs(state, &p1, model)?;
    let w2: Vec<Vec<f64>> = w0
        .iter()
        .zip(&w1)
        .zip(&l1)
        .map(|((a, b), l)| a.iter().zip(b).zip(l).map(|((a, b), l)| 0.5 * a + 0.5 * (b + dt * l)).collect())
        .collect();
    let p2 = to_points(state, w2)?;
    Ok(ReducedState { points: p2, ..state.clone() })
}

/// `A0^{-1} (Q - A1 D omega) + (a / 2 dx) (omega_{i+1} - 2 omega_i + omega_{i-1})`.
fn quasilinear_rhs(state: &ReducedState, points: &[AnsatzPoint], model: &CollisionModel) -> Result<Vec<Vec<f64>>> {
    let grid = &*state.grid;
    let mesh = &state.mesh;
    let dx = mesh.dx();
    let radii: Vec<f64> = points
        .par_iter()
        .enumerate()
        .map(|(cell, p)| spectral_radius(p, grid).map_err(|e| e.in_cell(cell)))
        .collect::<Result<_>>()?;
    if let Some(r) = radii.iter().copied().find(|r| !(*r <= BLOW_UP_RADIUS)) {
        return Err(Error::BlowUp(r));
    }
    (0..points.len())
        .into_par_iter()
        .map(|i| {
            let (l, r) = (mesh.left(i), mesh.right(i));
            let local = || -> Result<Vec<f64>> {
                let co = crate::projection::assemble(&points[i], model, grid)?;
                let (wl, wi, wr) = (points[l].omega(), points[i].omega(), points[r].omega());
                let grad = DVector::from_fn(wi.len(), |k, _| (wr[k] - wl[k]) / (2.0 * dx));
                let rhs = &co.q - &co.a1 * grad;
                let chol = Cholesky::new(co.a0).ok_or_else(|| Error::DegenerateChart("A0 lost definiteness".into()))?;
                let drift = chol.solve(&rhs);
                let a = radii[l].max(radii[i]).max(radii[r]);
                Ok((0..wi.len()).map(|k| drift[k] + a / (2.0 * dx) * (wr[k] - 2.0 * wi[k] + wl[k])).collect())
            };
            local().map_err(|e| e.in_cell(i))
        })
        .collect()
}

fn to_points(state: &ReducedState, omegas: Vec<Vec<f64>>) -> Result<Vec<AnsatzPoint>> {
    let manifold = state.manifold();
    omegas
        .into_iter()
        .enumerate()
        .map(|(cell, w)| {
            let p = AnsatzPoint::new(manifold, w).map_err(|e| e.in_cell(cell))?;
            p.evaluate(&state.grid).map_err(|e| e.in_cell(cell))?;
            Ok(p)
        })
        .collect()
}

fn axpy(x: &[f64], a: f64, y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(x, y)| x + a * y).collect()
}

/// Recorded output of a reduced run.
#[derive(Debug, Clone)]
pub struct ReducedTrajectory {
    pub times: Vec<f64>,
    pub fields: Vec<Vec<AnsatzPoint>>,
    /// [`ReducedState::totals`] at each output time.
    pub totals: Vec<Vec<f64>>,
    pub entropy: Vec<f64>,
    pub steps: usize,
}

/// Output times `T k / outputs`, `k = 0..=outputs`.
pub fn output_times(final_time: f64, outputs: usize) -> Result<Vec<f64>> {
    if !(final_time >= 0.0) || !final_time.is_finite() {
        return Err(Error::Parameter(format!("final time must be nonnegative, got {final_time}")));
    }
    if outputs == 0 {
        return Err(Error::Parameter("need at least one output interval".into()));
    }
    Ok((0..=outputs).map(|k| final_time * k as f64 / outputs as f64).collect())
}

/// Integrates to the last of `times`, recording the state at each of them.
pub fn run(initial: ReducedState, model: &CollisionModel, cfl: f64, times: &[f64]) -> Result<ReducedTrajectory> {
    let mut traj =
        ReducedTrajectory { times: Vec::new(), fields: Vec::new(), totals: Vec::new(), entropy: Vec::new(), steps: 0 };
    let mut state = initial;
    for &target in times {
        while state.time < target {
            let dt = state.stable_dt(model, cfl).map_err(|e| e.at_time(state.time))?;
            let remaining = target - state.time;
            // Land on the output time instead of leaving a sliver.
            let last = remaining <= dt * (1.0 + 1e-9);
            let dt = if last {
                remaining
            } else if remaining < 2.0 * dt {
                0.5 * remaining
            } else {
                dt
            };
            let mut next = advance(&state, model, dt).map_err(|e| e.at_time(state.time))?;
            if last {
                next.time = target;
            }
            state = next;
            traj.steps += 1;
        }
        traj.times.push(state.time);
        traj.fields.push(state.points.clone());
        traj.totals.push(state.totals());
        traj.entropy.push(state.entropy());
    }
    Ok(traj)
}

/// Moment totals of a field, `sum_cells dx int xi^k f`, `k < count`.
pub fn field_totals(field: &DistributionField, count: usize) -> Vec<f64> {
    let dx = field.mesh().dx();
    let mut out = vec![0.0; count];
    for cell in 0..field.cells() {
        for (o, v) in out.iter_mut().zip(raw_moments(field.grid(), field.cell(cell), count)) {
            *o += dx * v;
        }
    }
    out
}
