use std::sync::Arc;

use hicf_core::barrier::{barrier_theta, BarrierSolution};
use hicf_core::config::{parse_config, InitialSpec, RunConfig};
use hicf_core::curvature::CurvatureKind;
use hicf_core::diagnostics::{barrier_envelope_check, pi_derivative_norms, DiagnosticsSeries};
use hicf_core::flow::{run_from, FlowParams, FlowState, InitialCondition};
use hicf_core::hypersurface::{eigenvalues_2x2, shape_operator, tilt_factor};
use hicf_core::sphere::{covariant_gradient, covariant_hessian, GridMode, ScalarField, SphericalGrid};
use proptest::prelude::*;

fn full2d(res: usize) -> Arc<SphericalGrid> {
    Arc::new(SphericalGrid::build(2, GridMode::Full2d, res).unwrap())
}

/// Smooth positive field built from low spherical harmonics.
fn field(grid: &Arc<SphericalGrid>, c0: f64, a: [f64; 4]) -> ScalarField {
    ScalarField::from_fn(grid.clone(), |t, p| {
        let s = t.sin();
        c0 + a[0] * t.cos() + a[1] * s * p.cos() + a[2] * s * p.sin() + a[3] * s * s * (2.0 * p).cos()
    })
    .unwrap()
}

fn coeffs() -> impl Strategy<Value = [f64; 4]> {
    prop::array::uniform4(-0.3f64..0.3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn derivatives_are_linear(c0 in 0.5f64..3.0, a in coeffs(), b in coeffs(), s in -2.0f64..2.0) {
        let g = full2d(16);
        let (f, h) = (field(&g, c0, a), field(&g, c0, b));
        let sum = ScalarField::new(g.clone(), f.values().iter().zip(h.values()).map(|(x, y)| x + s * y).collect()).unwrap();
        let (df, dh, ds) = (covariant_gradient(&f), covariant_gradient(&h), covariant_gradient(&sum));
        let (hf, hh, hs) = (covariant_hessian(&f), covariant_hessian(&h), covariant_hessian(&sum));
        for i in 0..sum.len() {
            for k in 0..2 {
                prop_assert!((ds.at(i)[k] - df.at(i)[k] - s * dh.at(i)[k]).abs() < 1e-10);
            }
            for k in 0..3 {
                prop_assert!((hs.at(i)[k] - hf.at(i)[k] - s * hh.at(i)[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn lowered_second_fundamental_form_is_symmetric(c0 in 0.5f64..3.0, a in coeffs()) {
        let g = full2d(16);
        let u = field(&g, c0, a);
        let shape = shape_operator(&u, &covariant_gradient(&u), &covariant_hessian(&u)).unwrap();
        for s in shape.nodes() {
            let gm = [[s.g[0], s.g[1]], [s.g[1], s.g[2]]];
            let low01 = gm[0][0] * s.h[0][1] + gm[0][1] * s.h[1][1];
            let low10 = gm[1][0] * s.h[0][0] + gm[1][1] * s.h[1][0];
            let size = s.h.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs())) * s.g[0].max(s.g[2]);
            prop_assert!((low01 - low10).abs() < 1e-12 * size);
            prop_assert!(eigenvalues_2x2(&s.h, &s.g).is_ok());
        }
    }

    #[test]
    fn trace_matches_sum_of_curvatures(c0 in 0.5f64..3.0, a in coeffs()) {
        let g = full2d(16);
        let u = field(&g, c0, a);
        let shape = shape_operator(&u, &covariant_gradient(&u), &covariant_hessian(&u)).unwrap();
        for i in 0..shape.len() {
            let sum: f64 = shape.kappa(i).iter().sum();
            prop_assert!((sum - shape.trace(i)).abs() < 1e-11 * sum.abs().max(1.0));
        }
    }

    #[test]
    fn spheres_are_umbilic_with_coth_curvature(r0 in 0.1f64..6.0, n in 2usize..6) {
        let g = Arc::new(SphericalGrid::build(n, GridMode::Axisymmetric, 16).unwrap());
        let u = ScalarField::constant(g, r0).unwrap();
        let shape = shape_operator(&u, &covariant_gradient(&u), &covariant_hessian(&u)).unwrap();
        let coth = 1.0 / r0.tanh();
        prop_assert!(shape.kappa_rows().flatten().all(|k| (k - coth).abs() < 1e-14 * coth));
    }

    #[test]
    fn pi_gradient_identity(c0 in 0.5f64..3.0, a in coeffs()) {
        let g = full2d(16);
        let u = field(&g, c0, a);
        let du = covariant_gradient(&u);
        let norms = pi_derivative_norms(&u, &du, &covariant_hessian(&u)).unwrap();
        let v = tilt_factor(&u, &du).unwrap();
        for (dpi, v) in norms.grad.iter().zip(v.values()) {
            prop_assert!((1.0 + dpi * dpi - v * v).abs() < 1e-12);
        }
    }

    #[test]
    fn barriers_are_ordered(r1 in 0.1f64..3.0, gap in 1e-3f64..1.0, t in 0.0f64..20.0, p in 0.25f64..3.0) {
        prop_assert!(barrier_theta(t, r1, 2, p) < barrier_theta(t, r1 + gap, 2, p));
    }

    #[test]
    fn config_round_trips(
        n in 2usize..5,
        p in 0.1f64..3.0,
        kind in prop::sample::select(CurvatureKind::ALL.to_vec()),
        res in 8usize..200,
        t_end in 0.5f64..50.0,
        amplitude in 0.0f64..0.2,
        seed in any::<u64>(),
    ) {
        let mut flow = FlowParams::new(n, p, kind);
        flow.resolution = res;
        flow.t_end = t_end;
        flow.snapshot_times = vec![0.0, t_end];
        let c = RunConfig {
            flow,
            initial: InitialSpec::Legendre { r0: 1.25, l: 3, amplitude },
            osc_sweep: Vec::new(),
            out_dir: "runs/x".into(),
            seed: seed >> 1,
        };
        prop_assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }
}

#[test]
fn perturbed_start_is_admissible_for_every_function() {
    for kind in CurvatureKind::ALL {
        let params = FlowParams::new(2, 1.0, kind);
        let u0 = InitialCondition::Legendre { r0: 1.0, l: 2, amplitude: 0.1 }
            .sample(params.build_grid().unwrap())
            .unwrap();
        let state = FlowState::initial(u0, &params).unwrap();
        let (kmin, _) = state.eval.shape.kappa_range();
        assert!(kmin > 0.0, "{kind}: {kmin}");
    }
}

#[test]
fn envelope_check_flags_a_corrupted_series() {
    let mut params = FlowParams::new(2, 1.0, CurvatureKind::Mean);
    params.resolution = 16;
    params.t_end = 1.0;
    params.cadence = 0.1;
    let out = run_from(&params, &InitialCondition::Constant { r0: 1.0 }).unwrap();
    let times = out.series.times();
    let barrier = BarrierSolution::solve(1.0, 2, 1.0, &times);
    let clean = barrier_envelope_check(&out.series, &barrier, &barrier, 1e-6);
    assert!(clean.pass, "{clean:?}");

    let mut rows = out.series.rows.clone();
    rows[5].sup_u += 0.01;
    rows[7].inf_u -= 0.02;
    let bad = barrier_envelope_check(&DiagnosticsSeries { rows }, &barrier, &barrier, 1e-6);
    assert!(!bad.pass);
    assert!((bad.max_upper_violation - 0.01).abs() < 1e-6);
    assert!((bad.max_lower_violation - 0.02).abs() < 1e-6);
}
