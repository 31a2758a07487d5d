use std::f64::consts::PI;

use g2cones::aks_flow::{self, frame_path_with, FrameOptions, FramePath};
use g2cones::curve_builder::{
    almost_complex_residual, build_from_seed, build_grid, cone_associativity, exp_as, metric_residual,
    point_cloud_normal, quadric_lift, quadric_lift_from_points, second_form_residual, torus_element,
    uniform_samples, CurveError, CurveGrid, CurveSeed,
};
use g2cones::g2_algebra::matrix_to_coords;
use g2cones::primitive_frame::{classify, isotropy_invariant, CurveType, PrimitiveCoeffs};
use g2cones::toda_lattice::{type3_initial_state, RealCoeffs, TodaState};
use g2cones::{Mat7, Vec7};
use num_complex::Complex64;

const GENERIC: RealCoeffs = RealCoeffs { a1: 0.2, b1: -0.4, c1: 0.9, d1: 0.5, e1: 0.7 };

/// A `n x n` grid with spacing `stride * step` in both directions.
fn grid(c: &RealCoeffs, step: f64, stride: usize, n: usize) -> (CurveGrid, Vec<PrimitiveCoeffs>) {
    let run = aks_flow::run(c, step * (stride * n) as f64, step).unwrap();
    let sub = run.frames.subsample(stride);
    let fp = FramePath { times: sub.times[..n].to_vec(), frames: sub.frames[..n].to_vec(), a: sub.a };
    let g = build_grid(&run.seed.a, &fp, &uniform_samples(0.0, step * stride as f64, n)).unwrap();
    let coeffs = run.flow.subsample(stride).coeff_path()[..n].iter().map(|k| k.to_primitive()).collect();
    (g, coeffs)
}

fn type_of(c: &RealCoeffs) -> CurveType {
    let run = aks_flow::run(c, 1.0, 1e-2).unwrap();
    let coeffs: Vec<_> = run.flow.coeff_path().iter().map(|k| k.to_primitive()).collect();
    classify(&coeffs, 1e-7).unwrap()
}

#[test]
fn classification_of_flows() {
    assert_eq!(type_of(&GENERIC), CurveType::II);
    assert_eq!(type_of(&type3_initial_state(0.1, 1.0).unwrap().coeffs()), CurveType::III);
    assert_eq!(type_of(&RealCoeffs { e1: 0.0, ..GENERIC }), CurveType::I);
    assert_eq!(type_of(&RealCoeffs { d1: 0.0, ..GENERIC }), CurveType::IV);
}

#[test]
fn metric_is_conformal_with_factor_four_c_squared() {
    let (g, coeffs) = grid(&GENERIC, 5e-4, 4, 60);
    let c: Vec<f64> = coeffs.iter().map(|p| p.c.re).collect();
    let coarse = metric_residual(&g, &c).unwrap();
    let (g2, coeffs2) = grid(&GENERIC, 5e-4, 8, 60);
    let c2: Vec<f64> = coeffs2.iter().map(|p| p.c.re).collect();
    let coarser = metric_residual(&g2, &c2).unwrap();
    assert!(coarse < 1e-4, "{coarse:e}");
    let ratio = coarser / coarse;
    assert!((3.0..5.0).contains(&ratio), "metric residual ratio {ratio}");
}

#[test]
fn second_fundamental_form_converges() {
    let (g1, c1) = grid(&GENERIC, 5e-4, 4, 60);
    let (g2, c2) = grid(&GENERIC, 5e-4, 8, 60);
    let (r1, r2) = (second_form_residual(&g1, &c1).unwrap(), second_form_residual(&g2, &c2).unwrap());
    assert!(r1 < 1e-3, "{r1:e}");
    assert!((3.0..5.0).contains(&(r2 / r1)), "ratio {}", r2 / r1);
}

#[test]
fn lift_is_holomorphic_exactly_when_e_vanishes() {
    let (g, _) = grid(&RealCoeffs { e1: 0.0, ..GENERIC }, 5e-4, 4, 40);
    let iso = quadric_lift(&g).unwrap();
    assert!(iso.isotropy < 1e-12);
    assert!(iso.max_holomorphicity < 1e-4, "{:e}", iso.max_holomorphicity);

    let (g, _) = grid(&GENERIC, 5e-4, 4, 40);
    let generic = quadric_lift(&g).unwrap();
    assert!(generic.isotropy < 1e-12);
    assert!(generic.max_holomorphicity > 0.1, "{:e}", generic.max_holomorphicity);
}

#[test]
fn totally_geodesic_sphere_is_still_associative() {
    let (g, _) = grid(&RealCoeffs { d1: 0.0, e1: 0.0, ..GENERIC }, 5e-4, 4, 40);
    assert!(almost_complex_residual(&g).unwrap() < 1e-4);
    assert!(cone_associativity(&g).unwrap().residual < 1e-4);
}

#[test]
fn checks_from_points_alone() {
    let (g, _) = grid(&GENERIC, 5e-4, 4, 40);
    let points = CurveGrid::from_table(&g.to_table(&[])).unwrap();
    assert!(points.frames.is_none());
    assert_eq!(almost_complex_residual(&points).unwrap(), almost_complex_residual(&g).unwrap());
    let lift = quadric_lift_from_points(&points).unwrap();
    assert!(lift.isotropy < 1e-12);
    assert!(lift.skipped < 40 * 40 / 4, "skipped {}", lift.skipped);
    // A generic curve is full, so no hyperplane contains a large patch.
    let (wide, _) = grid(&GENERIC, 1e-2, 5, 40);
    assert!(point_cloud_normal(&wide).1 > 1e-3, "{:e}", point_cloud_normal(&wide).1);

    let s0 = type3_initial_state(0.1, 1.0).unwrap();
    let (g, _) = grid(&s0.coeffs(), 1e-3, 5, 40);
    let (_, worst) = point_cloud_normal(&g);
    assert!(worst < 1e-6, "{worst:e}");
}

#[test]
fn reprojection_keeps_frames_in_g2() {
    let run = aks_flow::run(&GENERIC, 2.0, 0.05).unwrap();
    let loose = frame_path_with(&run.flow, &run.seed.a, FrameOptions { reproject: false }).unwrap();
    let defect = |fp: &FramePath| {
        fp.frames.iter().map(|k| (k.transpose() * k - Mat7::identity()).amax()).fold(0.0, f64::max)
    };
    let (tight, drift) = (defect(&run.frames), defect(&loose));
    assert!(tight < 1e-13, "{tight:e}");
    assert!(drift > tight, "without reprojection {drift:e}, with {tight:e}");
}

#[test]
fn torus_element_with_spectrum_one_two_closes() {
    let a = torus_element(1.0, 2.0);
    let mut mu = g2cones::toda_lattice::rotation_angles(&a);
    mu.sort_by(f64::total_cmp);
    assert!((mu[0] - 1.0).abs() < 1e-12 && (mu[1] - 2.0).abs() < 1e-12 && (mu[2] - 3.0).abs() < 1e-12);
    assert!((exp_as(&a, 2.0 * PI).unwrap() - Mat7::identity()).amax() < 1e-12);
    assert!((exp_as(&a, PI).unwrap() - Mat7::identity()).amax() > 1.0);
}

fn type3_seed() -> CurveSeed {
    let mut seed = CurveSeed::from_state(&type3_initial_state(0.1, 1.0).unwrap());
    seed.t_end = 0.2;
    seed.s_samples = 20;
    seed.t_samples = 21;
    seed
}

#[test]
fn seed_builds_a_grid_of_requested_shape() {
    let seed = type3_seed();
    let curve = build_from_seed(&seed).unwrap();
    assert_eq!((curve.grid.ns(), curve.grid.nt()), (20, 21));
    assert_eq!(curve.coeffs.len(), 21);
    assert_eq!(curve.stride, 10);
    assert!((curve.grid.t[1] - 0.01).abs() < 1e-15);
    assert!(curve.grid.frame_defect() < 1e-13);
}

#[test]
fn seed_spectrum_fields_are_consistency_checks() {
    let mut seed = type3_seed();
    let a = seed.state().coeffs().p_matrix();
    let mu = g2cones::toda_lattice::rotation_angles(&a);
    seed.lambda_spec = Some([mu[1], mu[0]]);
    seed.a_coords = Some(matrix_to_coords(&a).unwrap().0);
    assert!(build_from_seed(&seed).is_ok());

    seed.lambda_spec = Some([1.0, 2.0]);
    assert!(matches!(build_from_seed(&seed), Err(CurveError::SeedMismatch { field: "lambda_spec", .. })));

    let mut seed = type3_seed();
    let mut coords = matrix_to_coords(&a).unwrap().0;
    coords[0] += 1e-3;
    seed.a_coords = Some(coords);
    assert!(matches!(build_from_seed(&seed), Err(CurveError::SeedMismatch { field: "a_coords", .. })));
}

#[test]
fn seed_json_accepts_both_spellings() {
    let text = r#"{"a1": 0, "b1": 0, "v1": 0, "v2": 0, "v3": 0, "lambda-spec": [1, 2], "t_end": 1, "step": 0.1, "s_samples": 5}"#;
    let seed: CurveSeed = serde_json::from_str(text).unwrap();
    assert_eq!(seed.lambda_spec, Some([1.0, 2.0]));
    assert_eq!(seed.t_samples, 100);
    assert_eq!(seed.state(), TodaState::default());
    let bad = r#"{"a1": 0, "b1": 0, "v1": 0, "v2": 0, "v3": 0, "lambda": [1, 2]}"#;
    assert!(serde_json::from_str::<CurveSeed>(bad).is_err());
}

/// `((nabla_z)^2 f_z, (nabla_z)^2 f_z)` at the centre of a 13 x 13 patch with
/// spacing `h`, from fourth order differences of the points alone. Only the
/// component of `f_zzz` orthogonal to `f1`, the tangent plane and the first
/// normal plane contributes to the pairing.
fn isotropy_from_points(c: &RealCoeffs, h: f64) -> (Complex64, PrimitiveCoeffs) {
    let n = 13;
    let stride = 4;
    let (g, coeffs) = grid(c, h / stride as f64, stride, n);
    let m = n / 2;
    let at = |i: usize, j: usize| Vec7::from_column_slice(&g.point(i, j).0);
    let d1 = [1.0, -8.0, 0.0, 8.0, -1.0].map(|w| w / (12.0 * h));
    let d2 = [-1.0, 16.0, -30.0, 16.0, -1.0].map(|w| w / (12.0 * h * h));
    let d3 = [1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0].map(|w| w / (8.0 * h * h * h));
    let d0 = [1.0];
    let partial = |ws: &[f64], wt: &[f64]| {
        let (rs, rt) = (ws.len() / 2, wt.len() / 2);
        let mut out = Vec7::zeros();
        for (a, x) in ws.iter().enumerate() {
            for (b, y) in wt.iter().enumerate() {
                out += at(m + a - rs, m + b - rt) * (x * y);
            }
        }
        out
    };
    let span = nalgebra::SMatrix::<f64, 7, 6>::from_columns(&[
        at(m, m),
        partial(&d1, &d0),
        partial(&d0, &d1),
        partial(&d2, &d0),
        partial(&d1, &d1),
        partial(&d0, &d2),
    ]);
    let svd = span.svd(true, false);
    let u = svd.u.unwrap();
    let mut proj = Mat7::identity();
    for k in 0..6 {
        if svd.singular_values[k] > 1e-6 * svd.singular_values.max() {
            let col = u.column(k);
            proj -= col * col.transpose();
        }
    }
    let (sss, sst) = (partial(&d3, &d0), partial(&d2, &d1));
    let (stt, ttt) = (partial(&d1, &d2), partial(&d0, &d3));
    // f_zzz = (f_sss - 3i f_sst - 3 f_stt + i f_ttt) / 8
    let re = proj * (sss - stt * 3.0) / 8.0;
    let im = proj * (ttt - sst * 3.0) / 8.0;
    let pairing = Complex64::new(re.dot(&re) - im.dot(&im), 2.0 * re.dot(&im));
    (pairing, coeffs[m])
}

#[test]
fn isotropy_invariant_matches_finite_differences() {
    let (measured, p) = isotropy_from_points(&GENERIC, 1e-2);
    let expected = isotropy_invariant(&p);
    let rel = (measured - expected).norm() / expected.norm();
    assert!(rel < 1e-6, "measured {measured}, expected {expected}, relative {rel:e}");

    let (measured, _) = isotropy_from_points(&RealCoeffs { e1: 0.0, ..GENERIC }, 1e-2);
    assert!(measured.norm() < 1e-4, "{measured}");
}
