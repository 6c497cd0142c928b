//! Acceptance suite: one pass/fail line per criterion, each with its runtime budget.

use std::f64::consts::{FRAC_PI_2, PI};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wedgecmc::geom::{invert_plane, invert_sphere, Sphere, Support, Vec3};
use wedgecmc::mesh::fixtures::uv_sphere;
use wedgecmc::mesh::TriMesh;
use wedgecmc::reflect::{
    discrete_mean_curvature, first_failure_radius, reflect_surface, reflected_mean_curvature, subharmonicity_check,
};
use wedgecmc::rings::{
    cylinder_chart, delaunay_bridge_with, identity_report, profile_period, spanner_chart,
    sphere_band_chart, BridgeRoot, CurvatureChart, ProfileKind,
};
use wedgecmc::spanner::{existence_gate, mesh_spanner, monte_carlo_volume, solve_sphere, SphericalSpanner};
use wedgecmc::sweep::{centrality_audit, planar_sweep_and_trace, run_sweep, SweepConfig, SweepReport};
use wedgecmc::verify::{verify, Verdict, VerifyTolerances};

/// Spanners spread over the existence region, `(gamma1, gamma2, alpha, R)`.
const SPANNERS: [(f64, f64, f64, f64); 10] = [
    (2.6, 2.4, 1.0, 1.0),
    (2.5, 2.5, 1.2, 1.0),
    (2.9, 2.2, 0.7, 0.8),
    (3.0, 3.0, 2.0, 1.5),
    (2.2, 2.8, 0.9, 1.0),
    (2.7, 2.7, 0.4, 0.6),
    (2.4, 3.1, 1.6, 1.2),
    (2.0, 2.0, 0.5, 1.0),
    (3.1, 2.6, 2.4, 2.0),
    (2.8, 2.5, 1.5, 0.9),
];

const SPANNER_RES: usize = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion(n: usize, name: &str, budget: Duration, f: impl FnOnce() -> Outcome, failures: &mut Vec<usize>) {
    let t = Instant::now();
    let out = std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Outcome { pass: false, detail: format!("panicked: {msg}") }
    });
    let elapsed = t.elapsed();
    let in_time = elapsed < budget;
    let pass = out.pass && in_time;
    if !pass {
        failures.push(n);
    }
    println!(
        "[{}] criterion {n:>2} {name}: {} ({:.2}s / {}s budget)",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
}

fn spanners() -> Vec<(SphericalSpanner, TriMesh)> {
    SPANNERS
        .iter()
        .map(|&(g1, g2, a, r)| {
            let s = solve_sphere(g1, g2, a, r).expect("spanner");
            let m = mesh_spanner(&s, SPANNER_RES).expect("mesh");
            (s, m)
        })
        .collect()
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n < 1.0 {
            return v / n;
        }
    }
}

/// Image curvature of a reflected mesh against the discrete estimate on the image.
fn reflected_discrete_error(s: &SphericalSpanner, res: usize, rho: f64) -> f64 {
    let m = mesh_spanner(s, res).unwrap();
    let r = reflect_surface(&m, s.mean_curvature, rho).unwrap();
    let d = discrete_mean_curvature(&r.mesh).unwrap();
    d.values
        .iter()
        .zip(&r.mean_curvature)
        .zip(&d.unreliable)
        .filter(|(_, &bad)| !bad)
        .map(|((a, b), _)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max)
}

fn c1_reflected_curvature() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    // Plane x3 = h with normal toward the origin: image sphere of radius rho^2 / 2h.
    let (h, rho) = (0.8, 1.3);
    let img = invert_plane(&Vec3::z(), h, rho).unwrap();
    let oracle = -2.0 * h / (rho * rho);
    assert!((img.radius - rho * rho / (2.0 * h)).abs() < 1e-12);
    for _ in 0..128 {
        let x = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), h);
        let hh = reflected_mean_curvature(&x, &-Vec3::z(), 0.0, rho).unwrap();
        worst = worst.max((hh - oracle).abs()).max((hh.abs() - 1.0 / img.radius).abs());
    }
    // Spheres with inward normals: the image curvature is power / (r rho^2).
    let mut spheres = 0;
    while spheres < 20 {
        let c = Vec3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
        let r = rng.random_range(0.2..2.5);
        let power = c.norm_squared() - r * r;
        if power.abs() < 0.05 {
            continue;
        }
        spheres += 1;
        let rho = rng.random_range(0.5..3.0);
        let oracle = power / (r * rho * rho);
        let img = invert_sphere(&Sphere::new(c, r).unwrap(), rho).unwrap();
        for _ in 0..128 {
            let d = random_unit(&mut rng);
            let x = c + r * d;
            let hh = reflected_mean_curvature(&x, &-d, 1.0 / r, rho).unwrap();
            let scale = oracle.abs().max(1.0);
            worst = worst.max((hh - oracle).abs() / scale).max((hh.abs() - 1.0 / img.radius).abs() / scale);
        }
    }
    let pointwise = worst < 1e-10;

    let s = solve_sphere(2.6, 2.4, 1.0, 1.0).unwrap();
    let rho = s.tangent_length() * 0.9;
    let e64 = reflected_discrete_error(&s, 64, rho);
    let e128 = reflected_discrete_error(&s, 128, rho);
    Outcome {
        pass: pointwise && e64 < 0.02 && e128 < 0.01,
        detail: format!("pointwise {worst:.1e}, discrete H error {:.2}% @64, {:.2}% @128", 100.0 * e64, 100.0 * e128),
    }
}

fn c2_gate_vs_construction() -> Outcome {
    let mut disagreements = 0;
    let mut cells = 0;
    for i in 0..100 {
        let g1 = (PI * i as f64 / 99.0).min(PI);
        for j in 0..100 {
            let g2 = (PI * j as f64 / 99.0).min(PI);
            for k in 0..20 {
                let alpha = PI * (k as f64 + 0.5) / 20.0;
                let margin = existence_gate(g1, g2, alpha).unwrap().margin;
                let ok = solve_sphere(g1, g2, alpha, 1.0).is_ok();
                if ok != (margin > 1e-9) {
                    disagreements += 1;
                }
                cells += 1;
            }
        }
    }
    Outcome { pass: disagreements == 0, detail: format!("{disagreements} disagreements over {cells} cells") }
}

fn c3_volume() -> Outcome {
    let mut worst: f64 = 0.0;
    for (k, &(g1, g2, a, r)) in SPANNERS.iter().take(5).enumerate() {
        let s = solve_sphere(g1, g2, a, r).unwrap();
        let mc = monte_carlo_volume(&s.sphere, &s.wedge(), 1_000_000, 100 + k as u64);
        worst = worst.max((mc - s.volume).abs() / s.volume);
    }
    Outcome { pass: worst < 5e-3, detail: format!("max relative difference {:.3}%", 100.0 * worst) }
}

fn c4_identities() -> Outcome {
    let a = 0.7;
    let cyl = identity_report(&cylinder_chart(a, 1.5, 256, 256).unwrap()).unwrap();
    let (e, c, h) = (cyl.median_e, cyl.gap.c, cyl.mean_curvature);
    let k1 = h + c / (2.0 * e);
    let k2 = h - c / (2.0 * e);
    let cyl_ok = (e - a * a).abs() < 1e-6
        && cyl.conformal_eg < 1e-6
        && cyl.conformal_f < 1e-6
        && cyl.second_f < 1e-6
        && (c + a).abs() < 1e-6
        && k1.abs() < 1e-6
        && (k2 - 1.0 / a).abs() < 1e-6
        && cyl.k1_error < 1e-6
        && cyl.k2_error < 1e-6;

    let sph = identity_report(&sphere_band_chart(1.3, -1.2, 256, 256).unwrap()).unwrap();
    let sph_ok = sph.gap.c.abs() < 1e-8 * sph.median_e;

    let (hm, neck) = (1.0, 0.35);
    let sep = profile_period(hm, neck).unwrap();
    let b = delaunay_bridge_with(FRAC_PI_2, FRAC_PI_2, sep, hm, 256, 256, BridgeRoot::NearestRadius(neck)).unwrap();
    let und = identity_report(&b.chart).unwrap();
    let und_ok = b.kind == ProfileKind::Unduloid
        && und.gap.max_deviation < 1e-4 * und.gap.c.abs()
        && und.mean_curvature_deviation < 1e-3;
    Outcome {
        pass: cyl_ok && sph_ok && und_ok,
        detail: format!(
            "cylinder c = {c:.9} k1 = {k1:.1e} k2 a = {:.9}; sphere |c|/E = {:.1e}; unduloid gap dev {:.1e}|c|, H dev {:.1e}",
            k2 * a,
            sph.gap.c.abs() / sph.median_e,
            und.gap.max_deviation / und.gap.c.abs(),
            und.mean_curvature_deviation
        ),
    }
}

fn c5_sweep(data: &[(SphericalSpanner, TriMesh)], reports: &mut Vec<SweepReport>) -> Outcome {
    let mut worst: f64 = 0.0;
    let mut worst_shift: f64 = 0.0;
    let mut all_sym = true;
    let mut max_residual_ratio: f64 = 0.0;
    let shift = 0.3;
    for (s, m) in data {
        let rep = run_sweep(m, &SweepConfig::default()).unwrap();
        let want = s.tangent_length();
        worst = worst.max((rep.rho1 - want).abs() / want);
        max_residual_ratio = max_residual_ratio.max(rep.coincidence_residual / (3.0 * rep.eps_touch));
        all_sym &= rep.symmetric;

        let shifted = run_sweep(m, &SweepConfig { origin_shift: shift, ..Default::default() }).unwrap();
        let d2 = s.sphere.center.norm_squared() + shift * shift;
        let want2 = (d2 - s.radius() * s.radius()).sqrt();
        worst_shift = worst_shift.max((shifted.rho1 - want2).abs() / want2);
        all_sym &= shifted.symmetric == rep.symmetric;
        max_residual_ratio = max_residual_ratio.max(shifted.coincidence_residual / (3.0 * shifted.eps_touch));
        reports.push(rep);
    }
    Outcome {
        pass: worst < 0.01 && worst_shift < 0.01 && all_sym && max_residual_ratio < 1.0,
        detail: format!(
            "rho1 error {:.3}% (shifted {:.3}%), residual / 3 eps_touch <= {max_residual_ratio:.3}, all symmetric {all_sym}",
            100.0 * worst,
            100.0 * worst_shift
        ),
    }
}

fn c6_audits(data: &[(SphericalSpanner, TriMesh)], reports: &[SweepReport]) -> Outcome {
    let mut pass = reports.len() == data.len();
    let mut max_xn = f64::NEG_INFINITY;
    let mut min_nn = f64::INFINITY;
    let mut violations = 0;
    for ((_, m), rep) in data.iter().zip(reports) {
        let scale = m.bounding_diagonal();
        let a = centrality_audit(m, &Vec3::zeros(), rep.rho1, 1e-6 * scale).unwrap();
        pass &= a.passes();
        max_xn = max_xn.max(a.max_x_dot_normal / scale);
        min_nn = min_nn.min(a.min_normal_dot_conormal);
        violations += a.conormal_violations + a.equality_violations + a.conormal_equality_violations;
    }
    Outcome {
        pass: pass && violations == 0,
        detail: format!("max X.N / scale {max_xn:.2e}, min N.n {min_nn:.3e}, violations {violations}"),
    }
}

fn subharmonic_series(make: &dyn Fn(usize) -> CurvatureChart) -> (bool, f64, String) {
    let charts: Vec<CurvatureChart> = [128, 256, 512].into_iter().map(make).collect();
    let norms: Vec<f64> = charts[0].points.iter().map(|p| p.norm()).collect();
    let lo = norms.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = norms.iter().cloned().fold(0.0, f64::max);
    let mut ok = true;
    let mut worst: f64 = f64::INFINITY;
    for k in 0..8 {
        let rho = lo + (hi - lo) * (0.05 + 0.85 * k as f64 / 7.0);
        let reps: Vec<_> = charts.iter().map(|c| subharmonicity_check(c, rho).unwrap()).collect();
        let eps = reps[0].epsilon;
        ok &= reps.iter().all(|r| r.passes());
        // Refinement must not drive the minimum negative.
        ok &= reps[2].min_laplacian >= reps[0].min_laplacian.min(0.0) - eps;
        worst = worst.min(reps.iter().map(|r| r.min_laplacian / r.epsilon).fold(f64::INFINITY, f64::min));
    }
    (ok, worst, String::new())
}

fn c7_subharmonicity() -> Outcome {
    let s = solve_sphere(2.6, 2.4, 1.0, 1.0).unwrap();
    let (sphere_ok, sphere_worst, _) = subharmonic_series(&|n| spanner_chart(&s, n, n).unwrap());
    let (hm, neck) = (1.0, 0.35);
    let sep = profile_period(hm, neck).unwrap();
    let (und_ok, und_worst, _) = subharmonic_series(&|n| {
        delaunay_bridge_with(FRAC_PI_2, FRAC_PI_2, sep, hm, n, n, BridgeRoot::NearestRadius(neck)).unwrap().chart
    });
    Outcome {
        pass: sphere_ok && und_ok,
        detail: format!("min Laplacian / eps: spanner {sphere_worst:.3e}, unduloid {und_worst:.3e}"),
    }
}

fn c8_failure_radius() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst: f64 = 0.0;
    let mut monotone_failures = 0;
    let mut n = 0;
    while n < 10_000 {
        let x = Vec3::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
        let nn = random_unit(&mut rng);
        let h = rng.random_range(0.05..5.0);
        let Ok(rho) = first_failure_radius(&x, &nn, h) else { continue };
        n += 1;
        let back = reflected_mean_curvature(&x, &nn, h, rho).unwrap();
        worst = worst.max((back - h).abs() / h);
        let below = reflected_mean_curvature(&x, &nn, h, 0.9 * rho).unwrap();
        let above = reflected_mean_curvature(&x, &nn, h, 1.1 * rho).unwrap();
        if !(below > back && back > above) {
            monotone_failures += 1;
        }
    }
    Outcome {
        pass: worst <= 1e-12 && monotone_failures == 0,
        detail: format!("max relative round-trip error {worst:.1e}, monotonicity failures {monotone_failures}"),
    }
}

fn c9_trace() -> Outcome {
    let mut pass = true;
    let mut worst_angle: f64 = 0.0;
    let mut worst_curv: f64 = 0.0;
    let mut worst_margin: f64 = 0.0;
    for &(g1, g2, a) in &[(2.5, 2.5, 1.0), (2.7, 2.7, 0.6), (2.6, 2.3, 1.0), (2.9, 2.4, 1.4)] {
        let s = solve_sphere(g1, g2, a, 1.0).unwrap();
        let m = mesh_spanner(&s, SPANNER_RES).unwrap();
        let t = planar_sweep_and_trace(&m, &s.wedge(), &SweepConfig::default()).unwrap();
        if g1 == g2 {
            worst_angle = worst_angle.max(t.bisector_angle);
        }
        for c in &t.curves {
            worst_curv = worst_curv.max((c.curvature - s.mean_curvature).abs() / s.mean_curvature);
        }
        pass &= t.angle_inequality_residual > 0.0;
        worst_margin = worst_margin.max((t.angle_inequality_residual - s.margin).abs());
    }
    Outcome {
        pass: pass && worst_angle < 1e-3 && worst_curv < 0.02 && worst_margin < 1e-2,
        detail: format!(
            "bisector angle {worst_angle:.1e} rad, curvature error {:.2}%, residual - margin {worst_margin:.1e} rad",
            100.0 * worst_curv
        ),
    }
}

fn c10_verification(data: &[(SphericalSpanner, TriMesh)]) -> Outcome {
    let tol = VerifyTolerances::default();
    let mut honest_ok = 0;
    for (s, m) in data {
        let r = verify(m, &s.wedge().support(), &tol).unwrap();
        if r.ring.ring_type && r.all_checks_pass && r.verdict.verdict == Verdict::ConsistentWithExistence {
            honest_ok += 1;
        }
    }
    let mut bridges_ok = 0;
    let (hm, neck) = (1.0, 0.35);
    let period = profile_period(hm, neck).unwrap();
    let bridges = [
        (1.3, 1.9, 1.0, 0.8, BridgeRoot::MinArclength),
        (FRAC_PI_2, FRAC_PI_2, 1.0, 0.5, BridgeRoot::MinArclength),
        (FRAC_PI_2, FRAC_PI_2, period, hm, BridgeRoot::NearestRadius(neck)),
    ];
    for &(g1, g2, sep, h, select) in &bridges {
        let b = delaunay_bridge_with(g1, g2, sep, h, 64, 64, select).unwrap();
        let r = verify(&b.chart.to_mesh(), &Support::Slab { separation: sep }, &tol).unwrap();
        if r.all_checks_pass && r.verdict.verdict == Verdict::ParallelPlanes {
            bridges_ok += 1;
        }
    }

    // Inputs placed in the nonexistence region: each spanner checked against a
    // wedge opened far enough that gamma1 + gamma2 <= pi + alpha, plus a
    // closed sphere.
    let mut adversarial = 0;
    let mut passing = 0;
    let mut red_flags = 0;
    for (s, m) in data {
        let alpha = (s.gamma1 + s.gamma2 - PI + 0.05).min(PI - 1e-3);
        if s.gamma1 + s.gamma2 > PI + alpha {
            continue;
        }
        adversarial += 1;
        let w = wedgecmc::geom::Wedge::new(alpha).unwrap();
        if let Ok(r) = verify(m, &w.support(), &tol) {
            passing += r.all_checks_pass as usize;
            red_flags += r.verdict.red_flag as usize;
        }
    }
    let closed = uv_sphere(1.0, 32, 64).translated(&Vec3::new(3.0, 0.0, 0.0));
    adversarial += 1;
    if let Ok(r) = verify(&closed, &wedgecmc::geom::Wedge::new(1.0).unwrap().support(), &tol) {
        passing += (r.all_checks_pass && r.verdict.verdict != Verdict::OutOfScopeTopology) as usize;
        red_flags += r.verdict.red_flag as usize;
    }
    Outcome {
        pass: honest_ok == data.len() && bridges_ok == bridges.len() && passing == 0 && red_flags == 0,
        detail: format!(
            "spanners {honest_ok}/{}, bridges {bridges_ok}/{}, nonexistence-region inputs passing {passing}/{adversarial}, red flags {red_flags}",
            data.len(),
            bridges.len()
        ),
    }
}

fn main() {
    let s = |x| Duration::from_secs(x);
    // Panics are reported on the criterion line.
    std::panic::set_hook(Box::new(|_| {}));
    let mut failures = Vec::new();
    let data = spanners();
    let mut reports = Vec::new();
    criterion(1, "reflected mean curvature", s(10), c1_reflected_curvature, &mut failures);
    criterion(2, "existence gate vs construction", s(10), c2_gate_vs_construction, &mut failures);
    criterion(3, "spanner volume", s(20), c3_volume, &mut failures);
    criterion(4, "curvature-coordinate identities", s(20), c4_identities, &mut failures);
    criterion(5, "sweep symmetry detection", s(60), || c5_sweep(&data, &mut reports), &mut failures);
    criterion(6, "centrality audits", s(10), || c6_audits(&data, &reports), &mut failures);
    criterion(7, "subharmonicity", s(30), c7_subharmonicity, &mut failures);
    criterion(8, "failure radius round-trip", s(5), c8_failure_radius, &mut failures);
    criterion(9, "trace geometry", s(20), c9_trace, &mut failures);
    criterion(10, "verification loop", s(20), || c10_verification(&data), &mut failures);
    if failures.is_empty() {
        println!("acceptance: all 10 criteria pass");
    } else {
        println!("acceptance: failing criteria {failures:?}");
        std::process::exit(1);
    }
}
