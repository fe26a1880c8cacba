//! Discrete-velocity reference solver for `dt f + xi dx f = Q[f]`.
//!
//! Transport is first-order upwind per velocity node; relaxation is exact for
//! BGK (the target is frozen because `(rho, u, theta)` are invariant) and a
//! two-stage SSP Runge–Kutta step otherwise. The two are combined by Strang
//! splitting.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kinetic::{compute_moments, entropy, maxwellian, CollisionKind, CollisionModel, DistributionField};
use crate::reduced::SOURCE_STEP_FRACTION;

/// Negative values below this fraction of the cell maximum count as round-off
/// of a sign-indefinite relaxation target and are clipped to zero.
pub const CLIP_TOLERANCE: f64 = 1e-8;

/// A kinetic field at a time.
#[derive(Debug, Clone)]
pub struct KineticState {
    pub field: DistributionField,
    pub time: f64,
}

impl KineticState {
    pub fn new(field: DistributionField) -> Result<Self> {
        if !field.mesh().is_periodic() {
            return Err(Error::Parameter("the reference solver needs a periodic mesh".into()));
        }
        Ok(Self { field, time: 0.0 })
    }

    /// Largest stable transport step `dx / max |xi|`.
    pub fn max_transport_dt(&self) -> f64 {
        let speed = self.field.grid().max_speed();
        if speed > 0.0 {
            self.field.mesh().dx() / speed
        } else {
            f64::INFINITY
        }
    }
}

/// One upwind step: each velocity node is advected with its own speed.
pub fn transport_step(state: &KineticState, dt: f64) -> Result<KineticState> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("time step must be nonnegative, got {dt}")));
    }
    let limit = state.max_transport_dt();
    if dt > limit * (1.0 + 1e-12) {
        return Err(Error::Parameter(format!("time step {dt} violates the transport CFL limit {limit}")));
    }
    let field = &state.field;
    let mesh = field.mesh();
    let nodes = field.grid().nodes();
    let n = nodes.len();
    let ratio = dt / mesh.dx();
    let old = field.values();
    let mut out = field.clone();
    out.values_mut().par_chunks_mut(n).enumerate().for_each(|(i, cell)| {
        let (l, r) = (mesh.left(i), mesh.right(i));
        for (j, v) in cell.iter_mut().enumerate() {
            let xi = nodes[j];
            let here = old[i * n + j];
            *v = if xi > 0.0 {
                here - xi * ratio * (here - old[l * n + j])
            } else {
                here - xi * ratio * (old[r * n + j] - here)
            };
        }
    });
    Ok(KineticState { field: out, time: state.time + dt })
}

/// Relaxes every cell over `dt`.
pub fn relaxation_step(state: &KineticState, model: &CollisionModel, dt: f64) -> Result<KineticState> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::Parameter(format!("time step must be nonnegative, got {dt}")));
    }
    let grid = state.field.grid();
    let n = grid.len();
    let mut out = state.field.clone();
    out.values_mut()
        .par_chunks_mut(n)
        .enumerate()
        .try_for_each(|(cell, f)| relax_profile(model, grid, f, dt).map_err(|e| e.in_cell(cell)))?;
    Ok(KineticState { field: out, time: state.time + dt })
}

fn relax_profile(
    model: &CollisionModel,
    grid: &crate::quadrature::QuadratureRule,
    f: &mut [f64],
    dt: f64,
) -> Result<()> {
    match model.kind {
        CollisionKind::Bgk => {
            let feq = conservative_maxwellian(grid, f)?;
            let decay = (-dt / model.tau).exp();
            for (v, e) in f.iter_mut().zip(&feq) {
                *v = e + (*v - e) * decay;
            }
        }
        _ => {
            let q0 = model.apply(grid, f)?;
            let f1: Vec<f64> = f.iter().zip(&q0).map(|(v, q)| v + dt * q).collect();
            let q1 = model.apply(grid, &f1)?;
            for ((v, a), q) in f.iter_mut().zip(&f1).zip(&q1) {
                *v = 0.5 * *v + 0.5 * (a + dt * q);
            }
        }
    }
    let top = f.iter().fold(0.0f64, |m, v| m.max(*v));
    for (j, v) in f.iter_mut().enumerate() {
        if !v.is_finite() || *v < -CLIP_TOLERANCE * top {
            return Err(Error::Realizability(format!("relaxation produced {v} at xi = {}", grid.nodes()[j])));
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    Ok(())
}

/// The Maxwellian of `f` times `1 + a + b xi + c xi^2`, with the correction
/// chosen so that its discrete mass, momentum and energy equal those of `f`.
fn conservative_maxwellian(grid: &crate::quadrature::QuadratureRule, f: &[f64]) -> Result<Vec<f64>> {
    let mut feq = maxwellian(&compute_moments(grid, f)?, grid);
    let (nodes, weights) = (grid.nodes(), grid.weights());
    let mut gram = Matrix3::zeros();
    let mut defect = Vector3::zeros();
    for ((&x, &w), (&v, &e)) in nodes.iter().zip(weights).zip(f.iter().zip(&feq)) {
        let p = Vector3::new(1.0, x, x * x);
        gram += w * e * p * p.transpose();
        defect += w * (v - e) * p;
    }
    if let Some(a) = gram.cholesky().map(|c| c.solve(&defect)) {
        for (e, &x) in feq.iter_mut().zip(nodes) {
            *e *= 1.0 + a[0] + a[1] * x + a[2] * x * x;
        }
    }
    Ok(feq)
}

/// Recorded output of a reference run.
#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<DistributionField>,
    /// Mass, momentum and energy totals at each output time.
    pub totals: Vec<[f64; 3]>,
    pub entropy: Vec<f64>,
    pub steps: usize,
}

/// Strang-split step: half relaxation, transport, half relaxation.
/// Without a model this is free transport.
pub fn strang_step(state: &KineticState, model: Option<&CollisionModel>, dt: f64) -> Result<KineticState> {
    match model {
        None => transport_step(state, dt),
        Some(m) => {
            let a = relaxation_step(state, m, 0.5 * dt)?;
            let b = transport_step(&a, dt)?;
            let c = relaxation_step(&b, m, 0.5 * dt)?;
            Ok(KineticState { field: c.field, time: state.time + dt })
        }
    }
}

/// The step used by [`run`]: `cfl dx / max |xi|`, capped for explicit relaxation.
pub fn stable_dt(state: &KineticState, model: Option<&CollisionModel>, cfl: f64) -> Result<f64> {
    if !(cfl > 0.0 && cfl <= 1.0) {
        return Err(Error::Parameter(format!("cfl must lie in (0, 1], got {cfl}")));
    }
    let mut dt = cfl * state.max_transport_dt();
    if let Some(m) = model {
        if m.kind != CollisionKind::Bgk {
            dt = dt.min(SOURCE_STEP_FRACTION / m.rate());
        }
    }
    Ok(dt)
}

/// Integrates to the last of `times`, recording the field at each of them.
pub fn run(
    initial: KineticState,
    model: Option<&CollisionModel>,
    cfl: f64,
    times: &[f64],
) -> Result<KineticTrajectory> {
    let mut traj = KineticTrajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        totals: Vec::new(),
        entropy: Vec::new(),
        steps: 0,
    };
    let mut state = initial;
    for &target in times {
        while state.time < target {
            let dt = stable_dt(&state, model, cfl)?;
            let remaining = target - state.time;
            let last = remaining <= dt * (1.0 + 1e-9);
            let dt = if last {
                remaining
            } else if remaining < 2.0 * dt {
                0.5 * remaining
            } else {
                dt
            };
            let mut next = strang_step(&state, model, dt).map_err(|e| e.at_time(state.time))?;
            if last {
                next.time = target;
            }
            state = next;
            traj.steps += 1;
        }
        traj.times.push(state.time);
        traj.totals.push(state.field.conserved_totals());
        traj.entropy.push(entropy(&state.field));
        traj.snapshots.push(state.field.clone());
    }
    Ok(traj)
}
