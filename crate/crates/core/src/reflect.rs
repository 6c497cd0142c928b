//! Spherical reflection of surfaces about the vertex origin and the induced
//! mean curvature.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};
use crate::geom::{check_finite_positive, check_unit, invert_normal, Vec3, EPS_GEOM_REL};
use crate::mesh::TriMesh;
use crate::rings::CurvatureChart;

/// Mean curvature at the image of `x` under inversion of radius `rho`,
/// `(|X|^2 H + 2 X.N) / rho^2`, with respect to the image normal.
pub fn reflected_mean_curvature(x: &Vec3, n: &Vec3, h: f64, rho: f64) -> Result<f64> {
    check_unit(n, "normal")?;
    check_finite_positive(rho, "inversion radius")?;
    if x.norm_squared() == 0.0 {
        return Err(contract("point coincides with the inversion center"));
    }
    Ok((x.norm_squared() * h + 2.0 * x.dot(n)) / (rho * rho))
}

/// The radius at which the reflected mean curvature at `x` first reaches `H`.
pub fn first_failure_radius(x: &Vec3, n: &Vec3, h: f64) -> Result<f64> {
    check_unit(n, "normal")?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(contract(format!("mean curvature must be > 0, got {h}")));
    }
    let radicand = x.norm_squared() * h + 2.0 * x.dot(n);
    if radicand <= 0.0 {
        return Err(Error::NoFailureRadius { radicand });
    }
    Ok((radicand / h).sqrt())
}

#[derive(Debug, Clone)]
pub struct ReflectedSurface {
    /// Image mesh; winding is reversed so faces still follow the image normals.
    pub mesh: TriMesh,
    pub rho: f64,
    /// Reflected mean curvature per vertex.
    pub mean_curvature: Vec<f64>,
}

/// Inverts every vertex about the origin with radius `rho`. Normals are carried by
/// the differential of the inversion; `h` is the mean curvature of the input.
pub fn reflect_surface(mesh: &TriMesh, h: f64, rho: f64) -> Result<ReflectedSurface> {
    check_finite_positive(rho, "inversion radius")?;
    let eps = EPS_GEOM_REL * mesh.bounding_diagonal();
    if let Some(k) = mesh.vertices.iter().position(|v| v.norm() <= eps) {
        return Err(Error::Domain(format!("vertex {k} lies at the inversion center")));
    }
    let normals = mesh.vertex_normals();
    let (vertices, rest): (Vec<Vec3>, Vec<(Vec3, f64)>) = mesh
        .vertices
        .par_iter()
        .zip(normals.par_iter())
        .map(|(x, n)| {
            let image = x * (rho * rho / x.norm_squared());
            let n_hat = invert_normal(x, n, &Vec3::zeros());
            let hh = (x.norm_squared() * h + 2.0 * x.dot(n)) / (rho * rho);
            (image, (n_hat, hh))
        })
        .unzip();
    let (normals, mean_curvature) = rest.into_iter().unzip();
    let mut out = TriMesh { vertices, faces: mesh.faces.clone(), normals };
    out.flip_winding();
    Ok(ReflectedSurface { mesh: out, rho, mean_curvature })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurvature {
    pub values: Vec<f64>,
    /// True at boundary vertices, whose one-ring is incomplete.
    pub unreliable: Vec<bool>,
}

fn cot(a: &Vec3, b: &Vec3) -> f64 {
    a.dot(b) / a.cross(b).norm()
}

/// Cotangent-Laplacian mean curvature with mixed Voronoi areas, `H = (Delta X . N) / 2`
/// for the vertex normals `N`.
pub fn discrete_mean_curvature(mesh: &TriMesh) -> Result<DiscreteCurvature> {
    let unreliable = mesh.boundary_flags()?;
    let nv = mesh.vertices.len();
    let mut lap = vec![Vec3::zeros(); nv];
    let mut area = vec![0.0; nv];
    let x = &mesh.vertices;
    for f in &mesh.faces {
        let p = [x[f[0]], x[f[1]], x[f[2]]];
        let tri_area = 0.5 * (p[1] - p[0]).cross(&(p[2] - p[0])).norm();
        if tri_area == 0.0 {
            continue;
        }
        let cots: [f64; 3] = std::array::from_fn(|k| {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            cot(&(b - a), &(c - a))
        });
        let obtuse = (0..3).find(|&k| {
            let (a, b, c) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
            (b - a).dot(&(c - a)) < 0.0
        });
        for k in 0..3 {
            let (i, j, l) = (k, (k + 1) % 3, (k + 2) % 3);
            // Edge i-j is opposite corner l, edge i-l opposite corner j.
            lap[f[i]] += 0.5 * cots[l] * (p[j] - p[i]) + 0.5 * cots[j] * (p[l] - p[i]);
            area[f[i]] += match obtuse {
                None => (cots[l] * (p[j] - p[i]).norm_squared() + cots[j] * (p[l] - p[i]).norm_squared()) / 8.0,
                Some(o) if o == i => tri_area / 2.0,
                Some(_) => tri_area / 4.0,
            };
        }
    }
    let normals = mesh.vertex_normals();
    let values = (0..nv)
        .map(|i| if area[i] > 0.0 { lap[i].dot(&normals[i]) / (2.0 * area[i]) } else { f64::NAN })
        .collect();
    Ok(DiscreteCurvature { values, unreliable })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubharmonicityReport {
    pub rho: f64,
    /// Minimum of the intrinsic Laplacian of the reflected mean curvature over
    /// interior nodes with `|X| >= rho`.
    pub min_laplacian: f64,
    pub argmin: (usize, usize),
    pub nodes: usize,
    /// `1e-4 |H| / rho^2`.
    pub epsilon: f64,
    pub max_reflected: f64,
    /// Largest reflected mean curvature over nodes on the boundary of the subdomain.
    pub max_reflected_on_boundary: f64,
    pub maximizer_on_boundary: bool,
}

impl SubharmonicityReport {
    pub fn passes(&self) -> bool {
        self.min_laplacian > -self.epsilon && self.maximizer_on_boundary
    }
}

/// Reflected mean curvature on the chart and its Laplacian `(f_uu + f_vv) / E`
/// in the conformal metric, restricted to the part of the chart outside the sphere
/// of radius `rho`.
pub fn subharmonicity_check(chart: &CurvatureChart, rho: f64) -> Result<SubharmonicityReport> {
    check_finite_positive(rho, "inversion radius")?;
    let h = chart.mean_curvature;
    if !(h > 0.0) {
        return Err(Error::Precondition(format!("H > 0 unmet (H = {h})")));
    }
    let g = &chart.grid;
    let max_radius = chart.points.iter().map(|p| p.norm()).fold(0.0, f64::max);
    if rho > max_radius {
        return Err(Error::EmptySubdomain { rho, max_radius });
    }
    let hat: Vec<f64> = chart
        .points
        .iter()
        .zip(&chart.normals)
        .map(|(x, n)| (x.norm_squared() * h + 2.0 * x.dot(n)) / (rho * rho))
        .collect();
    let inside = |i: usize, j: usize| chart.points[g.index(i, j)].norm() >= rho;
    let mut min_laplacian = f64::INFINITY;
    let mut argmin = (0, 0);
    let mut nodes = 0;
    let (mut max_all, mut max_bdy) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for i in 0..g.nu {
        for j in 0..g.nv {
            if !inside(i, j) {
                continue;
            }
            let k = g.index(i, j);
            max_all = max_all.max(hat[k]);
            let on_edge = i == 0 || i + 1 == g.nu;
            let on_boundary = on_edge
                || !inside(i - 1, j)
                || !inside(i + 1, j)
                || !inside(i, (j + g.nv - 1) % g.nv)
                || !inside(i, (j + 1) % g.nv);
            if on_boundary {
                max_bdy = max_bdy.max(hat[k]);
            }
            if on_edge {
                continue;
            }
            let xu = g.d_u(&chart.points, i, j, 1);
            let lap = (g.d_u(&hat, i, j, 2) + g.d_v(&hat, i, j, 2)) / xu.norm_squared();
            nodes += 1;
            if lap < min_laplacian {
                min_laplacian = lap;
                argmin = (i, j);
            }
        }
    }
    if nodes == 0 {
        return Err(Error::EmptySubdomain { rho, max_radius });
    }
    let epsilon = 1e-4 * h.abs() / (rho * rho);
    let tol = 1e-9 * max_all.abs().max(h);
    Ok(SubharmonicityReport {
        rho,
        min_laplacian,
        argmin,
        nodes,
        epsilon,
        max_reflected: max_all,
        max_reflected_on_boundary: max_bdy,
        maximizer_on_boundary: max_bdy >= max_all - tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{invert_plane, invert_sphere, Sphere};
    use crate::mesh::fixtures::{cylinder, square, uv_sphere};
    use crate::rings::cylinder_chart;

    #[test]
    fn on_the_inversion_sphere() {
        let x = Vec3::new(0.6, 0.8, 0.0);
        let n = Vec3::new(0.0, 0.6, 0.8);
        let hh = reflected_mean_curvature(&x, &n, 0.3, 1.0).unwrap();
        assert!((hh - (0.3 + 2.0 * x.dot(&n))).abs() < 1e-15);
    }

    #[test]
    fn plane_image_curvature() {
        let (h, rho) = (0.7, 1.9);
        let img = invert_plane(&Vec3::z(), h, rho).unwrap();
        let x = Vec3::new(0.4, -1.1, h);
        let hh = reflected_mean_curvature(&x, &-Vec3::z(), 0.0, rho).unwrap();
        assert!((hh.abs() - 1.0 / img.radius).abs() < 1e-12);
    }

    #[test]
    fn sphere_image_curvature() {
        let s = Sphere::new(Vec3::new(3.0, 0.5, -1.0), 1.2).unwrap();
        let rho = 1.7;
        let img = invert_sphere(&s, rho).unwrap();
        for k in 0..20 {
            let t = k as f64 * 0.7;
            let dir = Vec3::new(t.cos() * (2.0 * t).sin(), t.sin() * (2.0 * t).sin(), (2.0 * t).cos());
            let x = s.center + s.radius * dir;
            let hh = reflected_mean_curvature(&x, &-dir, 1.0 / s.radius, rho).unwrap();
            assert!((hh.abs() - 1.0 / img.radius).abs() < 1e-10);
        }
    }

    #[test]
    fn failure_radius_examples() {
        let x = Vec3::new(1.0, 2.0, 0.0);
        let n = Vec3::new(0.0, 0.0, 1.0);
        assert!((first_failure_radius(&x, &n, 0.5).unwrap() - x.norm()).abs() < 1e-15);
        // X.N = -|X|^2 H / 2 exactly.
        let n = -x.normalize();
        let h = 2.0 * x.norm() / x.norm_squared();
        assert!(matches!(first_failure_radius(&x, &n, h), Err(Error::NoFailureRadius { .. })));
    }

    #[test]
    fn discrete_curvature_of_standard_shapes() {
        let s = discrete_mean_curvature(&uv_sphere(1.0, 64, 128)).unwrap();
        assert!(s.values.iter().all(|h| (h - 1.0).abs() < 0.02));
        let sq = discrete_mean_curvature(&square(8, 2.0)).unwrap();
        assert!(sq.values.iter().zip(&sq.unreliable).all(|(h, &b)| b || h.abs() < 1e-8));
        let c = discrete_mean_curvature(&cylinder(1.0, 2.0, 64, 32)).unwrap();
        assert!(c.values.iter().zip(&c.unreliable).all(|(h, &b)| b || (h - 0.5).abs() < 0.01));
    }

    #[test]
    fn reflection_is_an_involution() {
        let m = uv_sphere(1.0, 8, 12).translated(&Vec3::new(3.0, 0.0, 0.5));
        let once = reflect_surface(&m, 1.0, 2.0).unwrap();
        let twice = reflect_surface(&once.mesh, once.mean_curvature[0], 2.0).unwrap();
        for (a, b) in twice.mesh.vertices.iter().zip(&m.vertices) {
            assert!((a - b).norm() < 1e-10);
        }
        for (a, b) in twice.mesh.normals.iter().zip(&m.normals) {
            assert!((a - b).norm() < 1e-10);
        }
        assert_eq!(twice.mesh.faces, m.faces);
    }

    #[test]
    fn cylinder_laplacian_matches_closed_form() {
        // On a cylinder of radius a the reflected curvature is (z^2 / 2a - a) / rho^2 + const.
        let a = 1.0;
        let ch = cylinder_chart(a, 2.0, 64, 64).unwrap();
        let rho = 1.5;
        let r = subharmonicity_check(&ch, rho).unwrap();
        assert!((r.min_laplacian - 1.0 / (a * rho * rho)).abs() < 1e-6);
        assert!(r.passes());
    }

    #[test]
    fn subharmonicity_preconditions() {
        let mut ch = cylinder_chart(1.0, 1.0, 16, 16).unwrap();
        assert!(matches!(subharmonicity_check(&ch, 10.0), Err(Error::EmptySubdomain { .. })));
        ch.mean_curvature = -0.5;
        assert!(matches!(subharmonicity_check(&ch, 1.0), Err(Error::Precondition(_))));
    }
}
