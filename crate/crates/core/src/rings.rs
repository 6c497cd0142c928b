//! Ring-type CMC surfaces sampled in conformal curvature coordinates.
//!
//! Charts live on `[u0, 0] x [0, 2 pi)`, periodic in `v`. In such coordinates
//! `E = G`, `F = f = 0`, and the gap `c = e - g` is constant; the principal
//! curvatures are `k1 = H + c / 2E` along `u` and `k2 = H - c / 2E` along `v`.
//! Second fundamental form coefficients are taken against the inward normal.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::fd::Grid;
use crate::geom::{check_finite_positive, contact_angle, Vec3};
use crate::mesh::{PlanarLoop, TriMesh};
use crate::ode::{integrate, OdeOptions};
use crate::spanner::{SpannerAnnulus, SphericalSpanner};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub conformal: f64,
    /// Relative to `max(|c|, H E_median)`.
    pub gap: f64,
    /// Relative to `H`.
    pub curvature: f64,
    pub mean_curvature: f64,
    pub contact_angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { conformal: 1e-6, gap: 1e-4, curvature: 1e-4, mean_curvature: 1e-3, contact_angle: 1e-3 }
    }
}

#[derive(Debug, Clone)]
pub struct CurvatureChart {
    pub grid: Grid,
    pub points: Vec<Vec3>,
    /// Unit inward normals.
    pub normals: Vec<Vec3>,
    /// Mean curvature the generator was built for.
    pub mean_curvature: f64,
}

/// Which `u`-edge of a chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ChartEdge {
    /// `u = u0`.
    Start,
    /// `u = 0`.
    End,
}

impl CurvatureChart {
    fn sample(grid: Grid, mean_curvature: f64, f: impl Fn(f64, f64) -> (Vec3, Vec3) + Sync) -> Self {
        let (points, normals) = (0..grid.len())
            .into_par_iter()
            .map(|k| f(grid.u(k / grid.nv), grid.v(k % grid.nv)))
            .unzip();
        Self { grid, points, normals, mean_curvature }
    }

    pub fn row(&self, edge: ChartEdge) -> usize {
        match edge {
            ChartEdge::Start => 0,
            ChartEdge::End => self.grid.nu - 1,
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Vec3 {
        self.points[self.grid.index(i, j)]
    }

    /// Quad-split triangulation with winding following the normals.
    pub fn to_mesh(&self) -> TriMesh {
        let (nu, nv) = (self.grid.nu, self.grid.nv);
        let id = |i: usize, j: usize| i * nv + j % nv;
        let mut faces = Vec::with_capacity(2 * (nu - 1) * nv);
        for i in 0..nu - 1 {
            for j in 0..nv {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut mesh = TriMesh { vertices: self.points.clone(), faces, normals: self.normals.clone() };
        let mid = id(nu / 2, 0);
        let k = mesh.faces.iter().position(|f| f[0] == mid).unwrap_or(0);
        if mesh.face_normal(k).dot(&mesh.normals[mesh.faces[k][0]]) < 0.0 {
            mesh.flip_winding();
        }
        mesh
    }
}

/// `X = (a cos v, a sin v, a u + height)` on `u in [-height / a, 0]`.
pub fn cylinder_chart(a: f64, height: f64, nu: usize, nv: usize) -> Result<CurvatureChart> {
    check_finite_positive(a, "cylinder radius")?;
    check_finite_positive(height, "cylinder height")?;
    let grid = Grid::new(nu, nv, -height / a, 0.0)?;
    Ok(CurvatureChart::sample(grid, 1.0 / (2.0 * a), |u, v| {
        let (s, c) = v.sin_cos();
        (Vec3::new(a * c, a * s, a * u + height), Vec3::new(-c, -s, 0.0))
    }))
}

/// Mercator chart `X = R (sech u cos v, sech u sin v, tanh u)` on `[u0, 0]`.
pub fn sphere_band_chart(radius: f64, u0: f64, nu: usize, nv: usize) -> Result<CurvatureChart> {
    check_finite_positive(radius, "sphere radius")?;
    if !(u0 < 0.0 && u0.is_finite()) {
        return Err(contract(format!("band start must be finite and < 0, got {u0}")));
    }
    let grid = Grid::new(nu, nv, u0, 0.0)?;
    Ok(CurvatureChart::sample(grid, 1.0 / radius, |u, v| {
        let (s, c) = v.sin_cos();
        let sech = 1.0 / u.cosh();
        let x = Vec3::new(sech * c, sech * s, u.tanh());
        (radius * x, -x)
    }))
}

/// The spanner sphere between its contact circles; `u0` is the face-1 circle.
pub fn spanner_chart(s: &SphericalSpanner, nu: usize, nv: usize) -> Result<CurvatureChart> {
    let ann = SpannerAnnulus::new(s)?;
    let grid = Grid::new(nu, nv, ann.u0, 0.0)?;
    Ok(CurvatureChart::sample(grid, s.mean_curvature, |u, v| {
        let x = ann.point(u, v);
        (x, ann.normal(&x))
    }))
}

#[derive(Debug, Clone)]
pub struct FundamentalForms {
    /// `(E, F, G)` per node.
    pub first: Vec<[f64; 3]>,
    /// `(e, f, g)` per node, against the inward normal.
    pub second: Vec<[f64; 3]>,
    pub x_u: Vec<Vec3>,
    pub x_v: Vec<Vec3>,
}

pub fn fundamental_forms(chart: &CurvatureChart) -> Result<FundamentalForms> {
    let g = &chart.grid;
    let x = &chart.points;
    for i in 0..g.nu {
        for j in 0..g.nv {
            let k = g.index(i, j);
            let dup_u = i + 1 < g.nu && x[k] == x[g.index(i + 1, j)];
            let dup_v = x[k] == x[g.index(i, j + 1)];
            if dup_u || dup_v {
                return Err(Error::DegenerateGrid(format!("duplicate nodes at ({i}, {j})")));
            }
        }
    }
    type Node = ([f64; 3], [f64; 3], Vec3, Vec3);
    let nodes: Vec<Node> = (0..g.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / g.nv, k % g.nv);
            let n = chart.normals[k];
            let xu = g.d_u(x, i, j, 1);
            let xv = g.d_v(x, i, j, 1);
            let xuu = g.d_u(x, i, j, 2);
            let xuv = g.d_uv(x, i, j);
            let xvv = g.d_v(x, i, j, 2);
            ([xu.dot(&xu), xu.dot(&xv), xv.dot(&xv)], [xuu.dot(&n), xuv.dot(&n), xvv.dot(&n)], xu, xv)
        })
        .collect();
    let mut out = FundamentalForms {
        first: Vec::with_capacity(nodes.len()),
        second: Vec::with_capacity(nodes.len()),
        x_u: Vec::with_capacity(nodes.len()),
        x_v: Vec::with_capacity(nodes.len()),
    };
    for (a, b, xu, xv) in nodes {
        out.first.push(a);
        out.second.push(b);
        out.x_u.push(xu);
        out.x_v.push(xv);
    }
    Ok(out)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureGap {
    pub c: f64,
    pub max_deviation: f64,
}

pub fn curvature_gap(forms: &FundamentalForms) -> CurvatureGap {
    let gaps: Vec<f64> = forms.second.iter().map(|s| s[0] - s[2]).collect();
    let c = median(gaps.clone());
    let max_deviation = gaps.iter().map(|x| (x - c).abs()).fold(0.0, f64::max);
    CurvatureGap { c, max_deviation }
}

/// Measured departures from each conformal-curvature-coordinate identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityReport {
    pub mean_curvature: f64,
    /// max |E - G| / E.
    pub conformal_eg: f64,
    /// max |F| / E.
    pub conformal_f: f64,
    /// max |f| / sqrt(E).
    pub second_f: f64,
    pub gap: CurvatureGap,
    pub median_e: f64,
    /// max |e / E - (H + c / 2E)| and the same for `k2`.
    pub k1_error: f64,
    pub k2_error: f64,
    /// max relative deviation of `(e + g) / 2E` from `H`.
    pub mean_curvature_deviation: f64,
    /// max |N_u + k1 X_u| / sqrt(E) and |N_v + k2 X_v| / sqrt(E) over interior rows.
    pub normal_derivative: f64,
    /// max relative difference between `(eg - f^2)/(EG - F^2)` and `k1 k2`.
    pub gauss_consistency: f64,
}

impl IdentityReport {
    /// Named pass/fail results against `tol`.
    pub fn checks(&self, tol: &Tolerances) -> Vec<(&'static str, bool)> {
        let h = self.mean_curvature.abs();
        let gap_scale = self.gap.c.abs().max(h * self.median_e);
        vec![
            ("conformal", self.conformal_eg < tol.conformal && self.conformal_f < tol.conformal),
            ("curvature-coordinates", self.second_f < tol.conformal),
            ("constant-gap", self.gap.max_deviation <= tol.gap * gap_scale),
            ("principal-curvatures", self.k1_error <= tol.curvature * h && self.k2_error <= tol.curvature * h),
            ("mean-curvature", self.mean_curvature_deviation <= tol.mean_curvature),
            ("normal-derivatives", self.normal_derivative <= tol.curvature * h),
        ]
    }

    pub fn passes(&self, tol: &Tolerances) -> bool {
        self.checks(tol).iter().all(|(_, ok)| *ok)
    }
}

pub fn identity_report(chart: &CurvatureChart) -> Result<IdentityReport> {
    let forms = fundamental_forms(chart)?;
    let gap = curvature_gap(&forms);
    let g = &chart.grid;
    let h = chart.mean_curvature;
    let c = gap.c;
    let median_e = median(forms.first.iter().map(|f| f[0]).collect());
    let mut r = IdentityReport {
        mean_curvature: h,
        conformal_eg: 0.0,
        conformal_f: 0.0,
        second_f: 0.0,
        gap,
        median_e,
        k1_error: 0.0,
        k2_error: 0.0,
        mean_curvature_deviation: 0.0,
        normal_derivative: 0.0,
        gauss_consistency: 0.0,
    };
    for i in 0..g.nu {
        for j in 0..g.nv {
            let k = g.index(i, j);
            let [ee, ff, gg] = forms.first[k];
            let [e, f, gs] = forms.second[k];
            let k1 = h + c / (2.0 * ee);
            let k2 = h - c / (2.0 * ee);
            r.conformal_eg = r.conformal_eg.max((ee - gg).abs() / ee);
            r.conformal_f = r.conformal_f.max(ff.abs() / ee);
            r.second_f = r.second_f.max(f.abs() / ee.sqrt());
            r.k1_error = r.k1_error.max((e / ee - k1).abs());
            r.k2_error = r.k2_error.max((gs / ee - k2).abs());
            if h != 0.0 {
                r.mean_curvature_deviation = r.mean_curvature_deviation.max(((e + gs) / (2.0 * ee) - h).abs() / h.abs());
            }
            let gauss = (e * gs - f * f) / (ee * gg - ff * ff);
            let scale = (k1 * k2).abs().max(h * h * 1e-6);
            r.gauss_consistency = r.gauss_consistency.max((gauss - k1 * k2).abs() / scale);
            if i > 0 && i + 1 < g.nu {
                let nu = g.d_u(&chart.normals, i, j, 1);
                let nv = g.d_v(&chart.normals, i, j, 1);
                let res = (nu + k1 * forms.x_u[k]).norm().max((nv + k2 * forms.x_v[k]).norm());
                r.normal_derivative = r.normal_derivative.max(res / ee.sqrt());
            }
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileKind {
    Cylinder,
    Sphere,
    Unduloid,
    Nodoid,
    Catenoid,
}

/// A rotationally symmetric CMC surface between the planes `x3 = 0` and
/// `x3 = separation`, meeting them at `gamma1` and `gamma2`.
#[derive(Debug, Clone)]
pub struct DelaunayBridge {
    pub chart: CurvatureChart,
    pub gamma1: f64,
    pub gamma2: f64,
    pub separation: f64,
    /// Radius of the contact circle on `x3 = 0`.
    pub r0: f64,
    /// First integral `r sin(theta) - H r^2` of the profile.
    pub flux: f64,
    pub kind: ProfileKind,
    pub arclength: f64,
    /// Largest departure of measured contact angles from the request, per plane.
    pub contact_angle_errors: [f64; 2],
}

/// Profile state `(r, z, theta, s)` in the conformal parameter `u`, with
/// `ds/du = r`.
fn profile_rhs(h: f64) -> impl Fn(f64, &[f64; 4]) -> [f64; 4] {
    move |_u, y| {
        let (r, th) = (y[0], y[2]);
        [r * th.cos(), r * th.sin(), 2.0 * h * r - th.sin(), r]
    }
}

struct Shot {
    u_end: f64,
    theta_top: f64,
    arclength: f64,
}

fn wrap_angle(a: f64) -> f64 {
    let t = a.rem_euclid(2.0 * PI);
    if t > PI {
        t - 2.0 * PI
    } else {
        t
    }
}

fn shoot(h: f64, theta0: f64, r0: f64, separation: f64, scale: f64) -> Option<Shot> {
    let s_max = 20.0 * (separation + scale);
    let top = move |_u: f64, y: &[f64; 4]| y[1] - separation;
    let axis = move |_u: f64, y: &[f64; 4]| y[0] - 1e-9 * scale;
    let below = move |_u: f64, y: &[f64; 4]| y[1] + 1e-12 * scale;
    let long = move |_u: f64, y: &[f64; 4]| s_max - y[3];
    let opts = OdeOptions { rtol: 1e-11, atol: 1e-13 * scale, ..Default::default() };
    let res = integrate(profile_rhs(h), 0.0, [r0, 0.0, theta0, 0.0], 1e6, &opts, &[&top, &axis, &below, &long]).ok()?;
    (res.event == Some(0)).then(|| Shot { u_end: res.t, theta_top: wrap_angle(res.y[2]), arclength: res.y[3] })
}

/// Which profile to return when several meet the boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeRoot {
    /// Shortest generating curve, ties broken by the smaller contact radius.
    MinArclength,
    /// Lower contact radius closest to the given value.
    NearestRadius(f64),
}

/// Bridge with the shortest generating curve; see [`delaunay_bridge_with`].
pub fn delaunay_bridge(
    gamma1: f64,
    gamma2: f64,
    separation: f64,
    mean_curvature: f64,
    nu: usize,
    nv: usize,
) -> Result<DelaunayBridge> {
    delaunay_bridge_with(gamma1, gamma2, separation, mean_curvature, nu, nv, BridgeRoot::MinArclength)
}

pub fn delaunay_bridge_with(
    gamma1: f64,
    gamma2: f64,
    separation: f64,
    mean_curvature: f64,
    nu: usize,
    nv: usize,
    select: BridgeRoot,
) -> Result<DelaunayBridge> {
    for (g, name) in [(gamma1, "gamma1"), (gamma2, "gamma2")] {
        if !(g > 0.0 && g <= PI) {
            return Err(contract(format!("{name} must lie in (0, pi], got {g}")));
        }
    }
    check_finite_positive(separation, "separation")?;
    let h = mean_curvature;
    if !(h.is_finite() && h >= 0.0) {
        return Err(contract(format!("mean curvature must be finite and >= 0, got {h}")));
    }
    let scale = if h > 0.0 { separation.max(1.0 / h) } else { separation };
    // A sphere resting tangentially on the lower plane touches it in a point.
    if gamma1 == PI && h > 0.0 && ((1.0 - gamma2.cos()) / h - separation).abs() <= 1e-9 * separation {
        return Err(Error::DegenerateBoundary("sphere tangent to plane: contact is a single point".into()));
    }
    let theta0 = PI - gamma1;
    let r_max = 3.0 * scale;
    const SAMPLES: usize = 400;
    let mismatch = |r0: f64| shoot(h, theta0, r0, separation, scale).map(|s| (s.theta_top - gamma2, s));
    let samples: Vec<(f64, Option<f64>)> = (1..=SAMPLES)
        .into_par_iter()
        .map(|k| {
            let r0 = r_max * k as f64 / SAMPLES as f64;
            (r0, mismatch(r0).map(|m| m.0))
        })
        .collect();
    let mut roots: Vec<(f64, Shot)> = Vec::new();
    for w in samples.windows(2) {
        let ((a, fa), (b, fb)) = (w[0], w[1]);
        let (Some(fa), Some(fb)) = (fa, fb) else { continue };
        if fa == 0.0 || fa.signum() != fb.signum() {
            let (mut lo, mut hi, mut flo) = (a, b, fa);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let Some((fm, _)) = mismatch(mid) else { break };
                if fm.signum() == flo.signum() && fm != 0.0 {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
                if hi - lo <= 1e-15 * hi {
                    break;
                }
            }
            let r = 0.5 * (lo + hi);
            if let Some((fr, shot)) = mismatch(r) {
                // Sign changes across a discontinuity are not roots.
                if fr.abs() < 1e-8 {
                    roots.push((r, shot));
                }
            }
        }
    }
    let (r0, shot) = roots
        .into_iter()
        .min_by(|a, b| match select {
            BridgeRoot::MinArclength => {
                let ds = a.1.arclength - b.1.arclength;
                if ds.abs() <= 1e-9 * scale {
                    a.0.total_cmp(&b.0)
                } else {
                    ds.total_cmp(&0.0)
                }
            }
            BridgeRoot::NearestRadius(r) => (a.0 - r).abs().total_cmp(&(b.0 - r).abs()),
        })
        .ok_or_else(|| {
            Error::NoBridge(format!(
                "gamma1 = {gamma1}, gamma2 = {gamma2}, separation = {separation}, H = {h}"
            ))
        })?;
    if r0 < 1e-6 * scale {
        return Err(Error::DegenerateBoundary("contact circle collapses to a point".into()));
    }

    // Resample on the uniform conformal grid, integrating node to node.
    let grid = Grid::new(nu, nv, -shot.u_end, 0.0)?;
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15 * scale, ..Default::default() };
    let f = profile_rhs(h);
    let mut rows = Vec::with_capacity(nu);
    let mut y = [r0, 0.0, theta0, 0.0];
    rows.push(y);
    for i in 1..nu {
        let (ua, ub) = (grid.u(i - 1) + shot.u_end, grid.u(i) + shot.u_end);
        y = integrate(&f, ua, y, ub, &opts, &[])?.y;
        rows.push(y);
    }
    rows[0][1] = 0.0;
    let top_gap = (rows[nu - 1][1] - separation).abs();
    if top_gap > 1e-8 * scale {
        return Err(Error::Integration(format!("profile misses the upper plane by {top_gap:e}")));
    }
    rows[nu - 1][1] = separation;
    let flux = r0 * theta0.sin() - h * r0 * r0;
    let mut points = Vec::with_capacity(nu * nv);
    let mut normals = Vec::with_capacity(nu * nv);
    for row in &rows {
        let [r, z, th, _] = *row;
        for j in 0..nv {
            let (s, c) = grid.v(j).sin_cos();
            points.push(Vec3::new(r * c, r * s, z));
            normals.push(Vec3::new(-th.sin() * c, -th.sin() * s, th.cos()));
        }
    }
    let chart = CurvatureChart { grid, points, normals, mean_curvature: h };
    let mut errs = [0.0f64; 2];
    for (k, (row, np, want)) in [(0, Vec3::z(), gamma1), (nu - 1, -Vec3::z(), gamma2)].into_iter().enumerate() {
        for j in 0..nv {
            let n = chart.normals[chart.grid.index(row, j)];
            errs[k] = errs[k].max((contact_angle(&n, &np)? - want).abs());
        }
    }
    let kind = classify(h, flux, r0, theta0, scale);
    Ok(DelaunayBridge {
        chart,
        gamma1,
        gamma2,
        separation,
        r0,
        flux,
        kind,
        arclength: shot.arclength,
        contact_angle_errors: errs,
    })
}

/// Height gained by the profile through the contact radius `r0` (where it is
/// vertical) until it is next vertical at the same radius: one full Delaunay period.
pub fn profile_period(mean_curvature: f64, r0: f64) -> Result<f64> {
    let h = mean_curvature;
    check_finite_positive(h, "mean curvature")?;
    check_finite_positive(r0, "radius")?;
    if (2.0 * h * r0 - 1.0).abs() < 1e-12 {
        return Err(Error::Domain("the cylinder has no period".into()));
    }
    let scale = r0.max(1.0 / h);
    let opts = OdeOptions { rtol: 1e-13, atol: 1e-15 * scale, ..Default::default() };
    let f = profile_rhs(h);
    // theta - pi/2 changes sign at every vertical tangent; stop at the second one.
    let vertical = |_u: f64, y: &[f64; 4]| y[2] - PI / 2.0;
    let mut y = [r0, 0.0, PI / 2.0, 0.0];
    let mut u = 0.0;
    // Step off the starting vertical tangent.
    y = integrate(&f, u, y, u + 1e-6, &opts, &[])?.y;
    u += 1e-6;
    for _ in 0..2 {
        let r = integrate(&f, u, y, u + 1e4, &opts, &[&vertical])?;
        if r.event.is_none() {
            return Err(Error::Integration("profile never returns to vertical".into()));
        }
        u = r.t;
        y = r.y;
        let nudge = integrate(&f, u, y, u + 1e-9, &opts, &[])?;
        u = nudge.t;
        y = nudge.y;
    }
    Ok(y[1])
}

fn classify(h: f64, flux: f64, r0: f64, theta0: f64, scale: f64) -> ProfileKind {
    if h == 0.0 {
        return ProfileKind::Catenoid;
    }
    let tol = 1e-9 * scale;
    if (theta0 - PI / 2.0).abs() < 1e-12 && (r0 - 1.0 / (2.0 * h)).abs() < tol {
        ProfileKind::Cylinder
    } else if flux.abs() <= 1e-9 * scale / h {
        ProfileKind::Sphere
    } else if flux > 0.0 {
        ProfileKind::Unduloid
    } else {
        ProfileKind::Nodoid
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryCurvature {
    /// Mean normal curvature of the boundary curve, `H - c / 2E`.
    pub k2_normal: f64,
    /// Mean curvature of the boundary as a plane curve, positive toward the enclosed disk.
    pub k_planar: f64,
    /// `H / sin(gamma)`, the boundary curvature of the spherical solution.
    pub k_tilde: f64,
    /// max over boundary nodes of `|k2 - k sin(gamma)|`.
    pub residual: f64,
}

pub fn boundary_curvature_relation(chart: &CurvatureChart, edge: ChartEdge, gamma: f64) -> Result<BoundaryCurvature> {
    if !(gamma > 0.0 && gamma < PI) {
        return Err(contract(format!("contact angle must lie in (0, pi), got {gamma}")));
    }
    let forms = fundamental_forms(chart)?;
    let c = curvature_gap(&forms).c;
    let g = &chart.grid;
    let i = chart.row(edge);
    let idx: Vec<usize> = (0..g.nv).map(|j| g.index(i, j)).collect();
    let scale = TriMesh { vertices: chart.points.clone(), faces: vec![], normals: vec![] }.bounding_diagonal();
    let lp = PlanarLoop::fit(&chart.points, &idx, scale).map_err(|e| Error::NotPlanar(e.to_string()))?;
    let h = chart.mean_curvature;
    let (mut k2_sum, mut k_sum, mut residual) = (0.0, 0.0, 0.0f64);
    for j in 0..g.nv {
        let k = idx[j];
        let e = forms.first[k][0];
        let k2 = h - c / (2.0 * e);
        let yv = g.d_v(&chart.points, i, j, 1);
        let yvv = g.d_v(&chart.points, i, j, 2);
        let t = yv.normalize();
        let kappa = (yvv - yvv.dot(&t) * t) / yv.norm_squared();
        let mut n = lp.normal.cross(&t);
        if n.dot(&(lp.centroid - chart.points[k])) < 0.0 {
            n = -n;
        }
        let kp = kappa.dot(&n);
        k2_sum += k2;
        k_sum += kp;
        residual = residual.max((k2 - kp * gamma.sin()).abs());
    }
    let m = g.nv as f64;
    Ok(BoundaryCurvature { k2_normal: k2_sum / m, k_planar: k_sum / m, k_tilde: h / gamma.sin(), residual })
}

/// At a tangential boundary the normal curvature `H - (e - g) / 2E` of the
/// boundary curve vanishes; returns its largest magnitude over the edge.
pub fn tangential_boundary_check(chart: &CurvatureChart, edge: ChartEdge, gamma: f64) -> Result<f64> {
    if !(gamma.abs() < 1e-12 || (gamma - PI).abs() < 1e-12) {
        return Err(contract(format!("boundary is not tangential (gamma = {gamma})")));
    }
    let g = &chart.grid;
    let i = chart.row(edge);
    let ring = (0..g.nv).map(|j| (chart.at(i, j) - chart.at(i, 0)).norm()).fold(0.0, f64::max);
    let scale = chart.points.iter().map(|p| (p - chart.points[0]).norm()).fold(0.0, f64::max);
    if ring <= 1e-9 * scale {
        return Err(Error::DegenerateBoundary("boundary curve is a single point".into()));
    }
    let forms = fundamental_forms(chart)?;
    let h = chart.mean_curvature;
    Ok((0..g.nv)
        .map(|j| {
            let k = g.index(i, j);
            let [e, _, gs] = forms.second[k];
            (h - (e - gs) / (2.0 * forms.first[k][0])).abs()
        })
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanner::solve_sphere;

    #[test]
    fn cylinder_identities_hold() {
        let ch = cylinder_chart(1.0, 2.0, 64, 64).unwrap();
        let r = identity_report(&ch).unwrap();
        assert!(r.passes(&Tolerances::default()), "{r:?}");
        assert!((r.gap.c + 1.0).abs() < 1e-6);
    }

    #[test]
    fn cylinder_scaling() {
        let r1 = identity_report(&cylinder_chart(1.0, 1.0, 32, 32).unwrap()).unwrap();
        let r2 = identity_report(&cylinder_chart(2.0, 2.0, 32, 32).unwrap()).unwrap();
        assert!((r2.mean_curvature - r1.mean_curvature / 2.0).abs() < 1e-15);
        assert!((r2.gap.c - 2.0 * r1.gap.c).abs() < 1e-6);
    }

    #[test]
    fn sphere_band_is_umbilic() {
        let ch = sphere_band_chart(1.0, -1.5, 64, 64).unwrap();
        let r = identity_report(&ch).unwrap();
        assert!(r.passes(&Tolerances::default()), "{r:?}");
        assert!(r.gap.c.abs() < 1e-8);
    }

    #[test]
    fn spanner_chart_is_umbilic() {
        let s = solve_sphere(2.6, 2.3, 0.8, 1.0).unwrap();
        let r = identity_report(&spanner_chart(&s, 192, 192).unwrap()).unwrap();
        assert!(r.passes(&Tolerances::default()), "{r:?}");
    }

    #[test]
    fn cylinder_bridge_matches_cylinder_chart() {
        let a = 0.8;
        let b = delaunay_bridge(PI / 2.0, PI / 2.0, 1.3, 1.0 / (2.0 * a), 32, 32).unwrap();
        assert_eq!(b.kind, ProfileKind::Cylinder);
        let cyl = cylinder_chart(a, 1.3, 32, 32).unwrap();
        for (p, q) in b.chart.points.iter().zip(&cyl.points) {
            assert!((p - q).norm() < 1e-6);
        }
    }

    #[test]
    fn sphere_bridge_has_zero_gap() {
        let (g1, g2, h) = (2.2f64, 2.0f64, 1.0);
        let sep = -(g1.cos() + g2.cos()) / h;
        let b = delaunay_bridge(g1, g2, sep, h, 64, 64).unwrap();
        assert_eq!(b.kind, ProfileKind::Sphere);
        assert!((b.r0 - g1.sin() / h).abs() < 1e-8);
        let r = identity_report(&b.chart).unwrap();
        assert!(r.gap.c.abs() < 1e-6, "{r:?}");
    }

    #[test]
    fn first_integral_is_conserved() {
        let h = 0.7;
        let b = delaunay_bridge(PI / 2.0, PI / 2.0, 1.0, h, 64, 16).unwrap();
        for i in 0..64 {
            let k = b.chart.grid.index(i, 0);
            let p = b.chart.points[k];
            let n = b.chart.normals[k];
            // At v = 0 the normal is (-sin theta, 0, cos theta).
            let r = p.x.hypot(p.y);
            let sin_t = -n.x;
            assert!((r * sin_t - h * r * r - b.flux).abs() < 1e-9);
        }
        assert!(b.contact_angle_errors.iter().all(|&e| e < 1e-6));
    }

    #[test]
    fn boundary_curvature_on_cylinder_and_spanner() {
        let cyl = cylinder_chart(1.0, 1.0, 64, 64).unwrap();
        let bc = boundary_curvature_relation(&cyl, ChartEdge::Start, PI / 2.0).unwrap();
        assert!(bc.residual < 1e-6 && (bc.k_planar - 1.0).abs() < 1e-6);
        // c < 0 makes the boundary bend more than the spherical comparison.
        assert!(bc.k_planar > bc.k_tilde);
        let s = solve_sphere(2.4, 2.5, 0.6, 1.0).unwrap();
        let ch = spanner_chart(&s, 96, 128).unwrap();
        let bc = boundary_curvature_relation(&ch, ChartEdge::Start, 2.4).unwrap();
        assert!(bc.residual < 1e-6, "{bc:?}");
        assert!((bc.k_planar - bc.k_tilde).abs() < 1e-6);
    }

    #[test]
    fn tangential_check_requires_tangential_contact() {
        let cyl = cylinder_chart(1.0, 1.0, 16, 16).unwrap();
        assert!(matches!(tangential_boundary_check(&cyl, ChartEdge::Start, PI / 2.0), Err(Error::Contract(_))));
        assert!(matches!(delaunay_bridge(PI, 2.0, 1.0 - 2f64.cos(), 1.0, 32, 32), Err(Error::DegenerateBoundary(_))));
    }
}
