//! Property tests for the structural invariants of the reduction.

#![allow(clippy::needless_range_loop)]

use kinred::ansatz::{moments_of, params_from_moments_near};
use kinred::error_estimate::gronwall_bound;
use kinred::kinetic::{compute_moments, entropy_production, maxwellian};
use kinred::projection::metric_inner;
use kinred::quadrature::default_half_width;
use kinred::{AnsatzPoint, CollisionModel, Manifold, MomentState, QuadratureRule, TangentProjector};
use proptest::prelude::*;

fn grid() -> QuadratureRule {
    QuadratureRule::truncated(default_half_width(1.0, 2.0), 96).unwrap()
}

/// A two-Maxwellian mixture: nonnegative, smooth and generally not an equilibrium.
fn mixture(grid: &QuadratureRule, w: f64, a: (f64, f64, f64), b: (f64, f64, f64)) -> Vec<f64> {
    let f1 = maxwellian(&MomentState::equilibrium(a.0, a.1, a.2), grid);
    let f2 = maxwellian(&MomentState::equilibrium(b.0, b.1, b.2), grid);
    f1.iter().zip(&f2).map(|(x, y)| w * x + (1.0 - w) * y).collect()
}

fn gaussian_params() -> impl Strategy<Value = (f64, f64, f64)> {
    (0.5f64..2.0, -1.0f64..1.0, 0.5f64..2.0)
}

fn hermite_point() -> impl Strategy<Value = AnsatzPoint> {
    (gaussian_params(), -0.05f64..0.05, 0.0f64..0.05).prop_filter_map(
        "profile must be nonnegative",
        |((rho, u, th), a3, a4)| {
            let p = AnsatzPoint::new(Manifold::HermitePerturbation { order: 4 }, vec![rho, u, th, a3, a4]).unwrap();
            p.evaluate(&grid()).ok().map(|_| p)
        },
    )
}

fn entropy_point() -> impl Strategy<Value = AnsatzPoint> {
    (gaussian_params(), -0.05f64..0.05, -0.02f64..0.0).prop_map(|((rho, u, th), l3, l4)| {
        let base = AnsatzPoint::maxwellian(Manifold::EntropyClosure { order: 5 }, rho, u, th).unwrap();
        let mut om = base.into_omega();
        om[3] = l3;
        om[4] = l4;
        AnsatzPoint::new(Manifold::EntropyClosure { order: 5 }, om).unwrap()
    })
}

fn moment_point() -> impl Strategy<Value = AnsatzPoint> {
    (gaussian_params(), -0.2f64..0.2, 0.0f64..0.2).prop_map(|((rho, u, th), b1, b2)| {
        let m = Manifold::ConservativeMoment { order: 2 };
        let mut om = AnsatzPoint::maxwellian(m, rho, u, th).unwrap().into_omega();
        // The constant term dominates b1^2 / 4 b2, so the quadratic has no real root
        // on the grid.
        let a0 = om[0];
        om[1] = a0 * b1;
        om[2] = a0 * b2;
        om[0] = a0 * (1.0 + b1 * b1 / (4.0 * b2.max(1e-3)));
        AnsatzPoint::new(m, om).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 48, ..ProptestConfig::default() })]

    #[test]
    fn moment_inversion_reproduces_moments(p in moment_point()) {
        let grid = grid();
        let c = moments_of(&p, &grid, 5).unwrap();
        let q = params_from_moments_near(2, &c, &grid, Some(&p)).unwrap();
        let back = moments_of(&q, &grid, 5).unwrap();
        for k in 0..5 {
            let scale = c[k].abs().max(c[0]);
            prop_assert!((back[k] - c[k]).abs() <= 1e-9 * scale, "moment {k}: {} vs {}", back[k], c[k]);
        }
    }

    #[test]
    fn collisions_conserve_mass_momentum_energy(
        w in 0.1f64..0.9, a in gaussian_params(), b in gaussian_params(),
        kind in 0usize..3, pr in 0.5f64..1.0,
    ) {
        let grid = grid();
        let f = mixture(&grid, w, a, b);
        let model = match kind {
            0 => CollisionModel::bgk(0.3).unwrap(),
            1 => CollisionModel::shakhov(0.3, pr).unwrap(),
            _ => CollisionModel::es_bgk(0.3, pr).unwrap(),
        };
        let q = model.apply(&grid, &f).unwrap();
        let scale: Vec<f64> = (0..3).map(|k| grid.integrate_fn_indexed(|i, x| x.abs().powi(k) * f[i].abs())).collect();
        for k in 0..3 {
            let moment = grid.integrate_fn_indexed(|i, x| x.powi(k as i32) * q[i]);
            prop_assert!(moment.abs() <= 1e-10 * scale[k] / 0.3, "moment {k} of Q(f) is {moment}");
        }
    }

    #[test]
    fn bgk_never_produces_entropy(w in 0.1f64..0.9, a in gaussian_params(), b in gaussian_params()) {
        let grid = grid();
        let f = mixture(&grid, w, a, b);
        let sigma = entropy_production(&CollisionModel::bgk(1.0).unwrap(), &grid, &f).unwrap();
        prop_assert!(sigma <= 1e-12, "entropy production {sigma}");
    }

    #[test]
    fn projection_is_idempotent_and_orthogonal(p in hermite_point(), coef in prop::array::uniform4(-1.0f64..1.0)) {
        let grid = grid();
        let f = p.evaluate(&grid).unwrap();
        let h: Vec<f64> = grid.nodes().iter().zip(&f)
            .map(|(&x, &v)| v * (coef[0] + coef[1] * x + coef[2] * (x * 0.7).cos() + coef[3] * x.powi(5) / 50.0))
            .collect();
        let proj = TangentProjector::at(&p, &grid).unwrap();
        let ph = proj.apply(&grid, &h);
        let pph = proj.apply(&grid, &ph);
        let norm = metric_inner(&p, &grid, &h, &h).unwrap().sqrt();
        let d: Vec<f64> = pph.iter().zip(&ph).map(|(a, b)| a - b).collect();
        prop_assert!(metric_inner(&p, &grid, &d, &d).unwrap().sqrt() <= 1e-10 * norm);
        let rest: Vec<f64> = h.iter().zip(&ph).map(|(a, b)| a - b).collect();
        for b in p.tangent_basis(&grid).unwrap().columns() {
            let nb = metric_inner(&p, &grid, b, b).unwrap().sqrt();
            prop_assert!(metric_inner(&p, &grid, &rest, b).unwrap().abs() <= 1e-10 * norm * nb);
        }
    }

    #[test]
    fn gronwall_bound_is_monotone(
        delta0 in 0.0f64..1.0,
        residuals in prop::collection::vec(0.0f64..2.0, 2..20),
        l in 0.0f64..20.0,
        extra in 0.0f64..1.0,
    ) {
        let times: Vec<f64> = (0..residuals.len()).map(|k| 0.05 * k as f64).collect();
        let b = gronwall_bound(delta0, &times, &residuals, l).unwrap();
        prop_assert!((b[0] - delta0).abs() <= 1e-15);
        for w in b.windows(2) {
            prop_assert!(w[1] >= w[0]);
        }
        let larger_l = gronwall_bound(delta0, &times, &residuals, l + extra).unwrap();
        let larger_d = gronwall_bound(delta0 + extra, &times, &residuals, l).unwrap();
        for k in 0..b.len() {
            prop_assert!(larger_l[k] >= b[k] && larger_d[k] >= b[k]);
        }
    }

    #[test]
    fn tangent_basis_matches_finite_differences(
        which in 0usize..3, hp in hermite_point(), ec in entropy_point(), cm in moment_point(),
    ) {
        let grid = grid();
        let p = [hp, ec, cm][which].clone();
        let basis = p.tangent_basis(&grid).unwrap();
        let f = p.evaluate(&grid).unwrap();
        let fmax = f.iter().copied().fold(0.0, f64::max);
        for k in 0..p.dim() {
            let h = 1e-6 * p.omega()[k].abs().max(1e-2);
            let shifted = |s: f64| {
                let mut om = p.omega().to_vec();
                om[k] += s;
                p.with_omega(om).unwrap().evaluate(&grid).unwrap()
            };
            let (fp, fm) = (shifted(h), shifted(-h));
            let col = basis.column(k);
            let cmax = col.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(fmax);
            for i in 0..grid.len() {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                prop_assert!((fd - col[i]).abs() <= 1e-5 * cmax, "k={k} i={i}: {fd} vs {}", col[i]);
            }
        }
    }

    #[test]
    fn moments_of_a_maxwellian_are_its_parameters(params in gaussian_params()) {
        let (rho, u, th) = params;
        let grid = grid();
        let m = compute_moments(&grid, &maxwellian(&MomentState::equilibrium(rho, u, th), &grid)).unwrap();
        prop_assert!((m.rho - rho).abs() <= 1e-12 * rho);
        prop_assert!((m.u - u).abs() <= 1e-12);
        prop_assert!((m.theta - th).abs() <= 1e-11 * th);
    }
}
