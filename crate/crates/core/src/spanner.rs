//! Spherical spanners: portions of a sphere meeting both wedge faces at
//! prescribed contact angles.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitBall};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::geom::{check_finite_positive, invert_point, orthonormal_pair, Circle, Sphere, Vec3, Wedge, WedgeFace};
use crate::mesh::TriMesh;

/// Existence verdict for a wedge of angle `alpha` and contact angles `gamma1`, `gamma2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub exists: bool,
    /// `gamma1 + gamma2 - pi - alpha`.
    pub margin: f64,
}

fn check_gamma(g: f64, name: &str) -> Result<()> {
    if !(0.0..=PI).contains(&g) {
        return Err(contract(format!("{name} must lie in [0, pi], got {g}")));
    }
    Ok(())
}

/// `alpha = 0` is accepted and means the parallel-plane limit.
pub fn existence_gate(gamma1: f64, gamma2: f64, alpha: f64) -> Result<Gate> {
    check_gamma(gamma1, "gamma1")?;
    check_gamma(gamma2, "gamma2")?;
    if !(0.0..PI).contains(&alpha) {
        return Err(contract(format!("alpha must lie in [0, pi), got {alpha}")));
    }
    let margin = gamma1 + gamma2 - PI - alpha;
    Ok(Gate { exists: margin > 0.0, margin })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VolumeMethod {
    Analytic,
    McFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphericalSpanner {
    pub sphere: Sphere,
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    /// Mean curvature with respect to the inward normal, `1 / R`.
    pub mean_curvature: f64,
    pub volume: f64,
    pub volume_method: VolumeMethod,
    pub margin: f64,
    /// Distance of the center from the vertex and its azimuth.
    pub center_distance: f64,
    pub center_azimuth: f64,
    /// Contact circles on face 1 and face 2; radius zero at tangential contact.
    pub contact_circles: [Circle; 2],
}

impl SphericalSpanner {
    pub fn wedge(&self) -> Wedge {
        Wedge::new(self.alpha).expect("validated at construction")
    }

    pub fn radius(&self) -> f64 {
        self.sphere.radius
    }

    pub fn gamma(&self, face: WedgeFace) -> f64 {
        match face {
            WedgeFace::First => self.gamma1,
            WedgeFace::Second => self.gamma2,
        }
    }

    /// Inward unit normal of the sphere at `x`.
    pub fn normal_at(&self, x: &Vec3) -> Vec3 {
        (self.sphere.center - x) / self.sphere.radius
    }

    /// Radius of the symmetry sphere about the vertex origin.
    pub fn tangent_length(&self) -> f64 {
        (self.center_distance.powi(2) - self.sphere.radius.powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpannerIndex {
    Volume(f64),
    MeanCurvature(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpannerParams {
    pub gamma1: f64,
    pub gamma2: f64,
    pub alpha: f64,
    pub index: SpannerIndex,
}

/// Samples used for the Monte-Carlo volume when the cap formula does not apply.
pub const MC_FALLBACK_SAMPLES: usize = 1_000_000;
pub const MC_FALLBACK_SEED: u64 = 0x5eed;

/// Sphere of radius `r` meeting face i at contact angle `gamma_i`.
///
/// The contact condition places the center at signed distance `-r cos(gamma_i)`
/// from face i; with both faces through the vertex this is a linear system in
/// the center's planar coordinates.
pub fn solve_sphere(gamma1: f64, gamma2: f64, alpha: f64, r: f64) -> Result<SphericalSpanner> {
    check_finite_positive(r, "sphere radius")?;
    let gate = existence_gate(gamma1, gamma2, alpha)?;
    let wedge = Wedge::new(alpha)?;
    let (s, c) = (alpha / 2.0).sin_cos();
    let h = [-r * gamma1.cos(), -r * gamma2.cos()];
    let center = Vec3::new((h[0] + h[1]) / (2.0 * s), (h[1] - h[0]) / (2.0 * c), 0.0);
    let d = center.xy().norm();
    let feet_on_faces = [WedgeFace::First, WedgeFace::Second]
        .iter()
        .all(|&f| wedge.radial_direction(f).dot(&center) > 1e-12 * r);
    if !(d - r > 1e-12 * r && feet_on_faces) {
        return Err(Error::NonExistent { margin: gate.margin });
    }
    let sphere = Sphere::new(center, r)?;
    let contact_circles = [WedgeFace::First, WedgeFace::Second].map(|f| {
        let n = wedge.inward_normal(f);
        let hi = h[f.index()];
        Circle { center: center - hi * n, normal: n, radius: (r * r - hi * hi).max(0.0).sqrt() }
    });
    let (volume, volume_method) = spanner_volume_parts(&sphere, &wedge, [gamma1, gamma2]);
    let out = SphericalSpanner {
        sphere,
        gamma1,
        gamma2,
        alpha,
        mean_curvature: 1.0 / r,
        volume,
        volume_method,
        margin: gate.margin,
        center_distance: d,
        center_azimuth: center.y.atan2(center.x),
        contact_circles,
    };
    for f in [WedgeFace::First, WedgeFace::Second] {
        let residual = (wedge.inward_normal(f).dot(&center) - h[f.index()]).abs();
        let angle_err = contact_angle_error(&out, f, 16);
        if residual > 1e-10 * r || angle_err > 1e-8 {
            return Err(Error::Domain(format!(
                "sphere solve postcondition failed on {f:?}: residual {residual:e}, angle error {angle_err:e}"
            )));
        }
    }
    Ok(out)
}

/// Largest deviation of the remeasured contact angle from the requested one over
/// `samples` points of the contact circle.
pub fn contact_angle_error(s: &SphericalSpanner, face: WedgeFace, samples: usize) -> f64 {
    let circle = &s.contact_circles[face.index()];
    let np = circle.normal;
    (0..samples)
        .map(|k| {
            let x = circle.point(2.0 * PI * k as f64 / samples as f64);
            let n = s.normal_at(&x);
            let g = n.cross(&np).norm().atan2(-n.dot(&np));
            (g - s.gamma(face)).abs()
        })
        .fold(0.0, f64::max)
}

fn cap_volume(r: f64, gamma: f64) -> f64 {
    let h = r * (1.0 + gamma.cos());
    PI * h * h * (3.0 * r - h) / 3.0
}

/// Whether the ball meets the region behind both faces, where the removed caps
/// would overlap.
fn caps_overlap(sphere: &Sphere, wedge: &Wedge) -> bool {
    let c = sphere.center;
    let n1 = wedge.inward_normal(WedgeFace::First);
    let n2 = wedge.inward_normal(WedgeFace::Second);
    if n1.dot(&c) <= 0.0 && n2.dot(&c) <= 0.0 {
        return true;
    }
    // Distance in the cross-section to the two rays bounding the opposite wedge.
    let p = Vec3::new(c.x, c.y, 0.0);
    let dist = [WedgeFace::First, WedgeFace::Second]
        .iter()
        .map(|&f| {
            let dir = -wedge.radial_direction(f);
            let t = p.dot(&dir).max(0.0);
            (p - t * dir).norm()
        })
        .fold(f64::INFINITY, f64::min);
    dist < sphere.radius
}

fn spanner_volume_parts(sphere: &Sphere, wedge: &Wedge, gammas: [f64; 2]) -> (f64, VolumeMethod) {
    if caps_overlap(sphere, wedge) {
        let v = monte_carlo_volume(sphere, wedge, MC_FALLBACK_SAMPLES, MC_FALLBACK_SEED);
        return (v, VolumeMethod::McFallback);
    }
    let r = sphere.radius;
    (4.0 / 3.0 * PI * r.powi(3) - cap_volume(r, gammas[0]) - cap_volume(r, gammas[1]), VolumeMethod::Analytic)
}

/// Volume of a ball cut by both faces of a wedge, the contact angles being read
/// off the ball's position.
pub fn ball_wedge_volume(sphere: &Sphere, wedge: &Wedge) -> (f64, VolumeMethod) {
    let g = [WedgeFace::First, WedgeFace::Second]
        .map(|f| (-wedge.inward_normal(f).dot(&sphere.center) / sphere.radius).clamp(-1.0, 1.0).acos());
    spanner_volume_parts(sphere, wedge, g)
}

/// Enclosed volume of the drop bounded by the spanner and the two faces.
pub fn spanner_volume(s: &SphericalSpanner) -> (f64, VolumeMethod) {
    spanner_volume_parts(&s.sphere, &s.wedge(), [s.gamma1, s.gamma2])
}

/// Fixed-seed Monte-Carlo estimate of vol(ball ∩ wedge). Samples are split into
/// chunks with independent streams, so the result does not depend on thread count.
pub fn monte_carlo_volume(sphere: &Sphere, wedge: &Wedge, samples: usize, seed: u64) -> f64 {
    const CHUNK: usize = 1 << 16;
    let n1 = wedge.inward_normal(WedgeFace::First);
    let n2 = wedge.inward_normal(WedgeFace::Second);
    let chunks = samples.div_ceil(CHUNK);
    let hits: usize = (0..chunks)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let n = CHUNK.min(samples - k * CHUNK);
            (0..n)
                .filter(|_| {
                    let [x, y, z]: [f64; 3] = UnitBall.sample(&mut rng);
                    let p = sphere.center + sphere.radius * Vec3::new(x, y, z);
                    n1.dot(&p) >= 0.0 && n2.dot(&p) >= 0.0
                })
                .count()
        })
        .sum();
    4.0 / 3.0 * PI * sphere.radius.powi(3) * hits as f64 / samples as f64
}

pub fn construct_spanner(p: &SpannerParams) -> Result<SphericalSpanner> {
    let gate = existence_gate(p.gamma1, p.gamma2, p.alpha)?;
    if !gate.exists {
        return Err(Error::NonExistent { margin: gate.margin });
    }
    match p.index {
        SpannerIndex::MeanCurvature(h) => {
            check_finite_positive(h, "mean curvature")?;
            solve_sphere(p.gamma1, p.gamma2, p.alpha, 1.0 / h)
        }
        SpannerIndex::Volume(a) => {
            check_finite_positive(a, "volume")?;
            let unit = solve_sphere(p.gamma1, p.gamma2, p.alpha, 1.0)?;
            let r = (a / unit.volume).cbrt();
            let s = solve_sphere(p.gamma1, p.gamma2, p.alpha, r)?;
            if s.volume_method == VolumeMethod::Analytic && ((s.volume - a) / a).abs() > 1e-8 {
                return Err(Error::Domain(format!("volume re-measured as {} instead of {a}", s.volume)));
            }
            Ok(s)
        }
    }
}

/// Conformal coordinates on the spherical annulus between the two contact circles.
///
/// Inverting about one limit point of the circle pair sends the sphere to a plane
/// and the circles to concentric circles about the image of the other limit
/// point. With `u = ln(r / r2)` and `v` the polar angle there, `u = 0` is the
/// face-2 circle and `u = u0 < 0` the face-1 circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpannerAnnulus {
    pub sphere: Sphere,
    pole: Vec3,
    k: f64,
    center: Vec3,
    axes: (Vec3, Vec3),
    r2: f64,
    pub u0: f64,
}

impl SpannerAnnulus {
    pub fn new(s: &SphericalSpanner) -> Result<Self> {
        for (g, name) in [(s.gamma1, "gamma1"), (s.gamma2, "gamma2")] {
            if g >= PI - 1e-3 {
                return Err(Error::DegenerateBoundary(format!("tangential contact ({name} = {g})")));
            }
        }
        let c = s.sphere.center;
        let r = s.sphere.radius;
        let d = s.center_distance;
        let rho = s.tangent_length();
        let beta = (rho / d).clamp(-1.0, 1.0).acos();
        let phi = s.center_azimuth;
        let tp = rho * Vec3::new((phi + beta).cos(), (phi + beta).sin(), 0.0);
        let tm = rho * Vec3::new((phi - beta).cos(), (phi - beta).sin(), 0.0);
        // tp lies behind face 1 and tm behind face 2.
        let w = s.wedge();
        let (limit1, pole) = if w.inward_normal(WedgeFace::First).dot(&tp) < 0.0 { (tp, tm) } else { (tm, tp) };
        let k = 2.0 * r;
        let center = invert_point(&limit1, k, &pole)?;
        let axes = orthonormal_pair(&(c - pole).normalize());
        let image_radius = |circle: &Circle| -> Result<f64> {
            Ok((invert_point(&circle.point(0.0), k, &pole)? - center).norm())
        };
        let r1 = image_radius(&s.contact_circles[0])?;
        let r2 = image_radius(&s.contact_circles[1])?;
        if !(r1 > 0.0 && r1 < r2) {
            return Err(Error::Domain(format!("annulus map degenerate (r1 = {r1}, r2 = {r2})")));
        }
        Ok(Self { sphere: s.sphere, pole, k, center, axes, r2, u0: (r1 / r2).ln() })
    }

    pub fn point(&self, u: f64, v: f64) -> Vec3 {
        let y = self.center + self.r2 * u.exp() * (v.cos() * self.axes.0 + v.sin() * self.axes.1);
        let x = invert_point(&y, self.k, &self.pole).expect("image plane avoids the pole");
        // Project to remove round-off.
        self.sphere.center + self.sphere.radius * (x - self.sphere.center).normalize()
    }

    pub fn normal(&self, x: &Vec3) -> Vec3 {
        (self.sphere.center - x) / self.sphere.radius
    }
}

/// Triangulated spanner surface on the conformal annulus chart, with at least
/// `resolution` vertices around each contact circle.
pub fn mesh_spanner(s: &SphericalSpanner, resolution: usize) -> Result<TriMesh> {
    if resolution < 8 {
        return Err(contract(format!("resolution must be >= 8, got {resolution}")));
    }
    let ann = SpannerAnnulus::new(s)?;
    // Columns are added where the chart stretches a contact circle, so the
    // longest step along either circle stays within twice the mean step.
    let stretch = [ann.u0, 0.0]
        .iter()
        .map(|&u| {
            let m = 64 * resolution;
            let pts: Vec<Vec3> = (0..=m).map(|k| ann.point(u, 2.0 * PI * k as f64 / m as f64)).collect();
            let steps: Vec<f64> = pts.windows(2).map(|w| (w[1] - w[0]).norm()).collect();
            let mean = steps.iter().sum::<f64>() / m as f64;
            steps.iter().cloned().fold(0.0, f64::max) / mean
        })
        .fold(1.0, f64::max);
    let nv = ((resolution as f64 * (stretch / 2.0).max(1.0)).ceil() as usize).min(8 * resolution);
    let nu = ((nv as f64 * ann.u0.abs() / (2.0 * PI)).ceil() as usize).max(4);
    let mut vertices = Vec::with_capacity((nu + 1) * nv);
    for i in 0..=nu {
        let u = ann.u0 * (1.0 - i as f64 / nu as f64);
        for j in 0..nv {
            vertices.push(ann.point(u, 2.0 * PI * j as f64 / nv as f64));
        }
    }
    // Boundary rows snapped onto their contact planes.
    let w = s.wedge();
    for (row, face) in [(0, WedgeFace::First), (nu, WedgeFace::Second)] {
        let n = w.inward_normal(face);
        for j in 0..nv {
            let x = &mut vertices[row * nv + j];
            *x -= n.dot(x) * n;
        }
    }
    let normals: Vec<Vec3> = vertices.iter().map(|x| ann.normal(x)).collect();
    let id = |i: usize, j: usize| i * nv + j % nv;
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let mut mesh = TriMesh { vertices, faces, normals };
    if mesh.face_normal(0).dot(&mesh.normals[0]) < 0.0 {
        mesh.flip_winding();
    }
    Ok(mesh)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionRow {
    pub alpha: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub exists: bool,
    pub margin: f64,
}

pub fn existence_region_samples(alpha_grid: &[f64], gamma_grid: &[f64]) -> Result<Vec<RegionRow>> {
    let mut rows = Vec::with_capacity(alpha_grid.len() * gamma_grid.len().pow(2));
    for &alpha in alpha_grid {
        for &gamma1 in gamma_grid {
            for &gamma2 in gamma_grid {
                let g = existence_gate(gamma1, gamma2, alpha)?;
                rows.push(RegionRow { alpha, gamma1, gamma2, exists: g.exists, margin: g.margin });
            }
        }
    }
    Ok(rows)
}
