//! Scenario configuration: everything a run needs, with strict validation.
//!
//! All quantities are nondimensional.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ansatz::{AnsatzPoint, Manifold};
use crate::error::{Error, Result};
use crate::kinetic::{CollisionKind, CollisionModel, DistributionField, MomentState, SpatialMesh};
use crate::projection::{assemble, reduced_source};
use crate::quadrature::QuadratureRule;
use crate::reduced::{self, ReducedState, ReducedTrajectory, DEFAULT_CFL};
use crate::reference::{self, KineticState, KineticTrajectory};
use crate::stability::{
    gusc_check, hyperbolicity_audit, linearized_collision_matrix, moment_system_at_equilibrium,
    propagation_speed_audit, yong_conditions_check, EquilibriumSubspaces, GuscReport, HermiteSpace,
    HyperbolicityReport, SpeedReport, YongReport, DEFAULT_DEGREE,
};

/// Largest accepted number of velocity or spatial cells.
pub const MAX_CELLS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollisionConfig {
    pub kind: CollisionKind,
    pub tau: f64,
    /// Prandtl number; ignored by BGK.
    #[serde(default = "one")]
    pub prandtl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityConfig {
    /// Truncation `L` of the velocity interval `[-L, L]`.
    pub half_width: f64,
    /// Composite Gauss–Legendre cells; four nodes each.
    pub cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshConfig {
    pub cells: usize,
    pub length: f64,
    #[serde(default = "yes")]
    pub periodic: bool,
}

/// Named initial conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// A uniform Maxwellian.
    Maxwellian { rho: f64, u: f64, theta: f64 },
    /// `rho (1 + amplitude sin(2 pi k x / length))` times a Maxwellian.
    SineDensity {
        rho: f64,
        amplitude: f64,
        u: f64,
        theta: f64,
        #[serde(default = "one_usize")]
        wavenumber: usize,
    },
    /// A uniform mixture `rho (w M(u1, theta1) + (1 - w) M(u2, theta2))`.
    TwoMaxwellianMix { rho: f64, weight: f64, u1: f64, theta1: f64, u2: f64, theta2: f64 },
    /// A uniform `M (1 + amplitude He_k(z))` with `z = (xi - u) / sqrt(theta)`, `k >= 3`.
    PerturbedMaxwellian {
        rho: f64,
        u: f64,
        theta: f64,
        amplitude: f64,
        #[serde(default = "four")]
        mode: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeConfig {
    pub final_time: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Number of equal output intervals.
    #[serde(default = "ten")]
    pub outputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    /// Random points per manifold audit.
    #[serde(default = "hundred")]
    pub samples: usize,
    /// Hermite truncation degree of the linearized spectra.
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Overrides the claimed coercivity constant of every model.
    #[serde(default)]
    pub lambda_claim: Option<f64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self { samples: 100, degree: DEFAULT_DEGREE, lambda_claim: None }
    }
}

/// A complete run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub manifold: Manifold,
    pub collision: CollisionConfig,
    pub velocity: VelocityConfig,
    pub mesh: MeshConfig,
    pub initial: InitialCondition,
    pub time: TimeConfig,
    /// Norm exponent of the error estimate.
    #[serde(default = "two")]
    pub norm_p: f64,
    /// Seed of every random choice made by audits and estimates.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub audit: AuditConfig,
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn one_usize() -> usize {
    1
}
fn four() -> usize {
    4
}
fn ten() -> usize {
    10
}
fn hundred() -> usize {
    100
}
fn yes() -> bool {
    true
}
fn default_cfl() -> f64 {
    DEFAULT_CFL
}
fn default_degree() -> usize {
    DEFAULT_DEGREE
}

fn positive(name: &str, v: f64) -> Result<()> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::Parameter(format!("{name} must be positive and finite, got {v}")));
    }
    Ok(())
}

fn finite(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::Parameter(format!("{name} must be finite, got {v}")));
    }
    Ok(())
}

fn count(name: &str, v: usize) -> Result<()> {
    if v == 0 || v > MAX_CELLS {
        return Err(Error::Parameter(format!("{name} must lie in 1..={MAX_CELLS}, got {v}")));
    }
    Ok(())
}

impl ScenarioConfig {
    /// The shipped smooth scenario: second-order moment closure against the
    /// kinetic reference on a sine-perturbed density with BGK collisions.
    pub fn demo() -> Self {
        Self {
            manifold: Manifold::ConservativeMoment { order: 2 },
            collision: CollisionConfig { kind: CollisionKind::Bgk, tau: 0.1, prandtl: 1.0 },
            velocity: VelocityConfig { half_width: 10.0, cells: 80 },
            mesh: MeshConfig { cells: 200, length: 1.0, periodic: true },
            initial: InitialCondition::SineDensity { rho: 1.0, amplitude: 0.2, u: 0.0, theta: 1.0, wavenumber: 1 },
            time: TimeConfig { final_time: 0.2, cfl: DEFAULT_CFL, outputs: 10 },
            norm_p: 2.0,
            seed: 0,
            audit: AuditConfig::default(),
        }
    }

    /// Checks every field; the message names the offending one.
    pub fn validate(&self) -> Result<()> {
        self.manifold.validate().map_err(|e| Error::Parameter(format!("manifold: {e}")))?;
        let c = &self.collision;
        positive("collision.tau", c.tau)?;
        if c.kind != CollisionKind::Bgk {
            positive("collision.prandtl", c.prandtl)?;
        }
        CollisionModel::new(c.kind, c.tau, c.prandtl)?
            .check_dimension(1)
            .map_err(|e| Error::Parameter(format!("collision.prandtl: {e}")))?;
        positive("velocity.half_width", self.velocity.half_width)?;
        count("velocity.cells", self.velocity.cells)?;
        count("mesh.cells", self.mesh.cells)?;
        positive("mesh.length", self.mesh.length)?;
        if !self.mesh.periodic {
            return Err(Error::Parameter("mesh.periodic must be true: only periodic meshes are supported".into()));
        }
        match &self.initial {
            InitialCondition::Maxwellian { rho, u, theta } => {
                positive("initial.rho", *rho)?;
                finite("initial.u", *u)?;
                positive("initial.theta", *theta)?;
            }
            InitialCondition::SineDensity { rho, amplitude, u, theta, wavenumber } => {
                positive("initial.rho", *rho)?;
                if !(amplitude.abs() < 1.0) {
                    return Err(Error::Parameter(format!("initial.amplitude must lie in (-1, 1), got {amplitude}")));
                }
                finite("initial.u", *u)?;
                positive("initial.theta", *theta)?;
                if *wavenumber == 0 {
                    return Err(Error::Parameter("initial.wavenumber must be at least 1".into()));
                }
            }
            InitialCondition::TwoMaxwellianMix { rho, weight, u1, theta1, u2, theta2 } => {
                positive("initial.rho", *rho)?;
                if !(0.0..=1.0).contains(weight) {
                    return Err(Error::Parameter(format!("initial.weight must lie in [0, 1], got {weight}")));
                }
                finite("initial.u1", *u1)?;
                positive("initial.theta1", *theta1)?;
                finite("initial.u2", *u2)?;
                positive("initial.theta2", *theta2)?;
            }
            InitialCondition::PerturbedMaxwellian { rho, u, theta, amplitude, mode } => {
                positive("initial.rho", *rho)?;
                finite("initial.u", *u)?;
                positive("initial.theta", *theta)?;
                finite("initial.amplitude", *amplitude)?;
                if *mode < 3 || *mode > 12 {
                    return Err(Error::Parameter(format!("initial.mode must lie in 3..=12, got {mode}")));
                }
            }
        }
        let t = &self.time;
        if !(t.final_time >= 0.0) || !t.final_time.is_finite() {
            return Err(Error::Parameter(format!("time.final_time must be nonnegative, got {}", t.final_time)));
        }
        if !(t.cfl > 0.0 && t.cfl < 1.0) {
            return Err(Error::Parameter(format!("time.cfl must lie in (0, 1), got {}", t.cfl)));
        }
        count("time.outputs", t.outputs)?;
        if !(self.norm_p > 1.0) || !self.norm_p.is_finite() {
            return Err(Error::Parameter(format!("norm_p must lie in (1, inf), got {}", self.norm_p)));
        }
        count("audit.samples", self.audit.samples)?;
        if self.audit.degree < 3 || self.audit.degree > 10 {
            return Err(Error::Parameter(format!("audit.degree must lie in 3..=10, got {}", self.audit.degree)));
        }
        if let Some(l) = self.audit.lambda_claim {
            finite("audit.lambda_claim", l)?;
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Arc<QuadratureRule>> {
        Ok(Arc::new(QuadratureRule::truncated(self.velocity.half_width, self.velocity.cells)?))
    }

    pub fn mesh(&self) -> Result<SpatialMesh> {
        SpatialMesh::new(self.mesh.cells, self.mesh.length, self.mesh.periodic)
    }

    pub fn model(&self) -> Result<CollisionModel> {
        CollisionModel::new(self.collision.kind, self.collision.tau, self.collision.prandtl)
    }

    pub fn output_times(&self) -> Result<Vec<f64>> {
        reduced::output_times(self.time.final_time, self.time.outputs)
    }

    /// The kinetic initial field on the configured grids.
    pub fn initial_field(&self) -> Result<DistributionField> {
        self.validate()?;
        let grid = self.grid()?;
        let mesh = self.mesh()?;
        let length = self.mesh.length;
        let gauss =
            |rho: f64, u: f64, th: f64, xi: f64| rho / (2.0 * PI * th).sqrt() * (-(xi - u).powi(2) / (2.0 * th)).exp();
        let field = match self.initial.clone() {
            InitialCondition::Maxwellian { rho, u, theta } => {
                DistributionField::from_fn(grid, mesh, |_, xi| gauss(rho, u, theta, xi))?
            }
            InitialCondition::SineDensity { rho, amplitude, u, theta, wavenumber } => {
                DistributionField::from_fn(grid, mesh, |x, xi| {
                    let r = rho * (1.0 + amplitude * (2.0 * PI * wavenumber as f64 * x / length).sin());
                    gauss(r, u, theta, xi)
                })?
            }
            InitialCondition::TwoMaxwellianMix { rho, weight, u1, theta1, u2, theta2 } => {
                DistributionField::from_fn(grid, mesh, |_, xi| {
                    rho * (weight * gauss(1.0, u1, theta1, xi) + (1.0 - weight) * gauss(1.0, u2, theta2, xi))
                })?
            }
            InitialCondition::PerturbedMaxwellian { rho, u, theta, amplitude, mode } => {
                let mut he = vec![0.0; mode + 1];
                let profile: Vec<f64> = grid
                    .nodes()
                    .iter()
                    .map(|&xi| {
                        let z = (xi - u) / theta.sqrt();
                        crate::ansatz::hermite_values(z, &mut he);
                        gauss(rho, u, theta, xi) * (1.0 + amplitude * he[mode])
                    })
                    .collect();
                if let Some(v) = profile.iter().find(|v| **v < 0.0) {
                    return Err(Error::Parameter(format!(
                        "initial.amplitude makes the perturbed Maxwellian negative ({v})"
                    )));
                }
                DistributionField::from_profiles(grid, mesh, &vec![profile; mesh.cells()])?
            }
        };
        Ok(field)
    }

    /// The projected initial state of the reduced model.
    pub fn reduced_initial(&self) -> Result<ReducedState> {
        ReducedState::from_field(self.manifold, &self.initial_field()?)
    }

    pub fn run_reduced(&self) -> Result<ReducedTrajectory> {
        let state = self.reduced_initial()?;
        reduced::run(state, &self.model()?, self.time.cfl, &self.output_times()?)
    }

    pub fn run_reference(&self) -> Result<KineticTrajectory> {
        let state = KineticState::new(self.initial_field()?)?;
        reference::run(state, Some(&self.model()?), self.time.cfl, &self.output_times()?)
    }

    /// Runs the stability audits for this configuration.
    pub fn audit(&self) -> Result<AuditReport> {
        self.validate()?;
        let grid = self.grid()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let hyperbolicity = hyperbolicity_audit(self.manifold, self.audit.samples, &grid, &mut rng)?;
        let bound = grid.half_width().expect("truncated grid");
        let speed = propagation_speed_audit(self.manifold, self.audit.samples, bound, &grid, &mut rng)?;

        let m = MomentState::equilibrium(1.0, 0.0, 1.0);
        let space = HermiteSpace::new(1, self.audit.degree)?;
        let w = EquilibriumSubspaces::new(&space, &m);
        let (tau, pr) = (self.collision.tau, self.collision.prandtl);
        let mut gusc = Vec::new();
        for model in [CollisionModel::bgk(tau)?, CollisionModel::shakhov(tau, pr)?, CollisionModel::es_bgk(tau, pr)?] {
            let claim = self.audit.lambda_claim.unwrap_or(match model.kind {
                CollisionKind::Bgk => 1.0 / tau,
                _ => pr.min(1.0) / tau,
            });
            let d = linearized_collision_matrix(&model, &m, &space)?;
            gusc.push(ModelGusc { model: model.kind, report: gusc_check(&d, &w.w0, claim)? });
        }
        let yong = equilibrium_yong(self.manifold, &m, &self.model()?, &grid)?;
        Ok(AuditReport { hyperbolicity, speed, gusc, yong })
    }
}

/// [`GuscReport`] tagged with its collision model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelGusc {
    pub model: CollisionKind,
    #[serde(flatten)]
    pub report: GuscReport,
}

/// Combined stability audit of a scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub hyperbolicity: HyperbolicityReport,
    pub speed: SpeedReport,
    pub gusc: Vec<ModelGusc>,
    pub yong: YongReport,
}

/// The structural conditions of the reduced system at the Maxwellian `m`.
///
/// The moment family with `N >= 1` is checked in the moment coordinates,
/// where its chart is regular at equilibrium; other families in their chart,
/// with `J = A0^{-1} A1`, `Q_U = A0^{-1} dQ/domega` and equilibrium
/// directions `d omega_eq / d(rho, u, theta)`.
pub fn equilibrium_yong(
    manifold: Manifold,
    m: &MomentState,
    model: &CollisionModel,
    grid: &QuadratureRule,
) -> Result<YongReport> {
    if let Manifold::ConservativeMoment { order } = manifold {
        if order >= 1 {
            let sys = moment_system_at_equilibrium(order, m, model, grid)?;
            return yong_conditions_check(
                &sys.symmetrizer,
                &sys.jacobian,
                &sys.source_jacobian,
                &sys.equilibrium_basis,
            );
        }
    }
    let p = AnsatzPoint::maxwellian(manifold, m.rho, m.u, m.theta)?;
    let co = assemble(&p, model, grid)?;
    let a0inv =
        co.a0.clone().try_inverse().ok_or_else(|| Error::DegenerateChart("A0 is singular at equilibrium".into()))?;
    let n = p.dim();
    let mut dq = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = 1e-6 * p.omega()[j].abs().max(1.0);
        let mut wp = p.omega().to_vec();
        let mut wm = wp.clone();
        wp[j] += h;
        wm[j] -= h;
        let qp = reduced_source(&p.with_omega(wp)?, model, grid)?;
        let qm = reduced_source(&p.with_omega(wm)?, model, grid)?;
        dq.set_column(j, &((qp - qm) / (2.0 * h)));
    }
    let mut basis = DMatrix::zeros(n, 3);
    let base = [m.rho, m.u, m.theta];
    for j in 0..3 {
        let h = 1e-6 * base[j].abs().max(1.0);
        let mut bp = base;
        let mut bm = base;
        bp[j] += h;
        bm[j] -= h;
        let wp = AnsatzPoint::maxwellian(manifold, bp[0], bp[1], bp[2])?.into_omega();
        let wm = AnsatzPoint::maxwellian(manifold, bm[0], bm[1], bm[2])?.into_omega();
        for i in 0..n {
            basis[(i, j)] = (wp[i] - wm[i]) / (2.0 * h);
        }
    }
    yong_conditions_check(&co.a0, &(&a0inv * &co.a1), &(&a0inv * dq), &basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn demo_validates_and_builds() {
        let c = ScenarioConfig::demo();
        c.validate().unwrap();
        let f = c.initial_field().unwrap();
        assert_eq!(f.cells(), 200);
        assert_eq!(f.nodes(), 320);
        assert_eq!(c.output_times().unwrap().len(), 11);
    }

    #[test]
    fn validation_names_the_field() {
        let mut c = ScenarioConfig::demo();
        c.collision.tau = -1.0;
        assert!(c.validate().unwrap_err().to_string().contains("collision.tau"));
        let mut c = ScenarioConfig::demo();
        c.mesh.periodic = false;
        assert!(c.validate().unwrap_err().to_string().contains("mesh.periodic"));
        let mut c = ScenarioConfig::demo();
        c.initial = InitialCondition::SineDensity { rho: 1.0, amplitude: 1.5, u: 0.0, theta: 1.0, wavenumber: 1 };
        assert!(c.validate().unwrap_err().to_string().contains("initial.amplitude"));
        let mut c = ScenarioConfig::demo();
        c.time.cfl = 1.0;
        assert!(c.validate().unwrap_err().to_string().contains("time.cfl"));
        let mut c = ScenarioConfig::demo();
        c.manifold = Manifold::EntropyClosure { order: 9 };
        assert!(c.validate().unwrap_err().to_string().contains("manifold"));
        let mut c = ScenarioConfig::demo();
        c.collision = CollisionConfig { kind: CollisionKind::Shakhov, tau: 1.0, prandtl: 0.0 };
        assert!(c.validate().unwrap_err().to_string().contains("collision.prandtl"));
    }

    #[test]
    fn presets_build_nonnegative_fields() {
        let mut c = ScenarioConfig::demo();
        c.mesh.cells = 4;
        for init in [
            InitialCondition::Maxwellian { rho: 1.0, u: 0.2, theta: 0.8 },
            InitialCondition::TwoMaxwellianMix { rho: 1.0, weight: 0.3, u1: -0.5, theta1: 0.7, u2: 0.5, theta2: 1.1 },
            InitialCondition::PerturbedMaxwellian { rho: 1.0, u: 0.0, theta: 1.0, amplitude: 0.05, mode: 4 },
        ] {
            c.initial = init;
            let f = c.initial_field().unwrap();
            let [mass, _, _] = f.conserved_totals();
            assert!((mass - 1.0).abs() < 1e-10);
        }
        c.initial = InitialCondition::PerturbedMaxwellian { rho: 1.0, u: 0.0, theta: 1.0, amplitude: 0.5, mode: 3 };
        assert!(c.initial_field().is_err());
    }

    #[test]
    fn default_audit_passes() {
        let mut c = ScenarioConfig::demo();
        c.audit.samples = 10;
        let r = c.audit().unwrap();
        assert!(r.hyperbolicity.pass && r.speed.pass && r.yong.pass(), "{r:?}");
        assert!(r.gusc.iter().all(|g| g.report.pass));

        c.collision = CollisionConfig { kind: CollisionKind::Shakhov, tau: 1.0, prandtl: 0.7 };
        c.audit.lambda_claim = Some(0.71);
        let r = c.audit().unwrap();
        let sh = r.gusc.iter().find(|g| g.model == CollisionKind::Shakhov).unwrap();
        assert!(!sh.report.pass && (sh.report.worst_quotient + 0.7).abs() < 1e-8);
    }

    #[test]
    fn chart_yong_check_for_other_families() {
        let grid = QuadratureRule::truncated(12.0, 96).unwrap();
        let m = MomentState::equilibrium(1.0, 0.0, 1.0);
        let tau = 0.5;
        for man in [
            Manifold::ConservativeMoment { order: 0 },
            Manifold::HermitePerturbation { order: 4 },
            Manifold::EntropyClosure { order: 5 },
        ] {
            let r = equilibrium_yong(man, &m, &CollisionModel::bgk(tau).unwrap(), &grid).unwrap();
            assert!(r.block_pass && r.symmetry_pass, "{man:?} {r:?}");
            if man.dim() > 3 {
                assert!((r.dissipation_constant * tau - 1.0).abs() < 0.1, "{man:?} {r:?}");
            }
        }
    }

    #[test]
    fn json_schema_is_strict() {
        let c = ScenarioConfig::demo();
        let text = serde_json::to_string(&c).unwrap();
        let back: ScenarioConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["mesh"]["extra"] = serde_json::json!(1);
        assert!(serde_json::from_value::<ScenarioConfig>(v).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
        v["manifold"]["kind"] = serde_json::json!("grad_thirteen");
        assert!(serde_json::from_value::<ScenarioConfig>(v).is_err());
    }
}
