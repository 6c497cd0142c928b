use std::f64::consts::FRAC_PI_2;

use wedgecmc::geom::{Support, Vec3};
use wedgecmc::mesh::{read_obj, write_obj};
use wedgecmc::reflect::reflect_surface;
use wedgecmc::rings::{delaunay_bridge_with, profile_period, BridgeRoot};
use wedgecmc::spanner::{construct_spanner, mesh_spanner, SpannerIndex, SpannerParams};
use wedgecmc::sweep::{run_sweep, SweepConfig};
use wedgecmc::verify::{verify, Verdict, VerifyTolerances};

#[test]
fn spanner_through_obj_verifies_and_sweeps() {
    let p = SpannerParams { gamma1: 2.7, gamma2: 2.3, alpha: 0.9, index: SpannerIndex::Volume(2.0) };
    let s = construct_spanner(&p).unwrap();
    let m = read_obj(&write_obj(&mesh_spanner(&s, 48).unwrap()).unwrap()).unwrap();

    let v = verify(&m, &s.wedge().support(), &VerifyTolerances::default()).unwrap();
    assert!(v.all_checks_pass, "{:?}", v.errors);
    assert_eq!(v.verdict.verdict, Verdict::ConsistentWithExistence);
    assert!((v.sphere.unwrap().wedge_volume.unwrap() - 2.0).abs() < 1e-8);
    for (got, want) in v.gamma.iter().zip([2.7, 2.3]) {
        assert!((got.unwrap() - want).abs() < 1e-3);
    }

    let rep = run_sweep(&m, &SweepConfig::default()).unwrap();
    assert!((rep.rho1 - s.tangent_length()).abs() < 1e-2 * s.tangent_length());
    assert!(rep.symmetric);
}

#[test]
fn reflection_at_tangent_length_maps_spanner_to_itself() {
    let p = SpannerParams { gamma1: 2.6, gamma2: 2.6, alpha: 1.1, index: SpannerIndex::MeanCurvature(1.0) };
    let s = construct_spanner(&p).unwrap();
    let m = mesh_spanner(&s, 32).unwrap();
    let r = reflect_surface(&m, 1.0, s.tangent_length()).unwrap();
    for x in &r.mesh.vertices {
        assert!(((x - s.sphere.center).norm() - 1.0).abs() < 1e-10);
    }
    assert!(r.mean_curvature.iter().all(|h| (h - 1.0).abs() < 1e-10));
}

#[test]
fn unduloid_bridge_is_symmetric_about_its_midplane() {
    let (h, neck) = (1.0, 0.3);
    let sep = profile_period(h, neck).unwrap();
    let b = delaunay_bridge_with(FRAC_PI_2, FRAC_PI_2, sep, h, 48, 48, BridgeRoot::NearestRadius(neck)).unwrap();
    let m = b.chart.to_mesh();
    let v = verify(&m, &Support::Slab { separation: sep }, &VerifyTolerances::default()).unwrap();
    assert!(v.all_checks_pass, "{:?}", v.errors);
    assert_eq!(v.verdict.verdict, Verdict::ParallelPlanes);
    let rep = run_sweep(&m, &SweepConfig::planar(Vec3::z())).unwrap();
    assert!((rep.rho1 - sep / 2.0).abs() < 1e-2 * sep);
}
