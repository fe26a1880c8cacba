//! Fixtures shared by the benchmarks in `benches/`.

use kinred::ansatz::moments_of;
use kinred::reference::KineticState;
use kinred::{AnsatzPoint, Manifold, QuadratureRule, ReducedState, ScenarioConfig};

/// The shipped demo scenario.
pub fn demo() -> ScenarioConfig {
    ScenarioConfig::demo()
}

/// Initial reduced state of the demo.
pub fn demo_reduced() -> ReducedState {
    demo().reduced_initial().expect("demo projects onto its manifold")
}

/// Initial kinetic state of the demo.
pub fn demo_kinetic() -> KineticState {
    KineticState::new(demo().initial_field().expect("demo field")).expect("demo state")
}

/// Non-Maxwellian second-order moment points and their moment vectors.
pub fn inversion_cases(grid: &QuadratureRule) -> Vec<(AnsatzPoint, Vec<f64>)> {
    let m = Manifold::ConservativeMoment { order: 2 };
    [(1.0, 0.0, 1.0, 0.05), (0.8, 0.4, 1.5, 0.1), (1.5, -0.6, 0.7, 0.02)]
        .iter()
        .map(|&(rho, u, th, b)| {
            let mut om = AnsatzPoint::maxwellian(m, rho, u, th).expect("valid Maxwellian").into_omega();
            om[2] = b * om[0];
            let p = AnsatzPoint::new(m, om).expect("valid point");
            let c = moments_of(&p, grid, 5).expect("realizable point");
            (p, c)
        })
        .collect()
}
