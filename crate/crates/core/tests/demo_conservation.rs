//! Conservation on the shipped demo, over the interval where the second-order
//! moment closure stays realizable.

use kinred::ScenarioConfig;

#[test]
fn demo_conserves_mass_momentum_energy() {
    let config = ScenarioConfig::demo();
    let f0 = config.initial_field().unwrap();
    let dx = f0.mesh().dx();
    let scales: Vec<f64> = (0..3)
        .map(|k| {
            (0..f0.cells()).map(|c| dx * f0.grid().integrate_fn_indexed(|i, x| x.abs().powi(k) * f0.cell(c)[i])).sum()
        })
        .collect();
    let traj = config.run_reduced().unwrap();
    assert_eq!(traj.times.last().copied(), Some(config.time.final_time));
    let c0 = &traj.totals[0];
    for (t, c) in traj.times.iter().zip(&traj.totals) {
        for k in 0..3 {
            let drift = (c[k] - c0[k]).abs() / scales[k];
            assert!(drift <= 1e-8, "t = {t}: total {k} drifted by {drift:e}");
        }
    }
}
