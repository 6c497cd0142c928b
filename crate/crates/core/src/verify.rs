//! Hypothesis checks for a drop surface: annular topology, adherence to the
//! supporting planes, constant mean curvature and constant contact angles.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::{triangles_intersect, Bvh};
use crate::error::{Error, Result};
use crate::geom::{Sphere, Support, Vec3};
use crate::mesh::{PlanarLoop, TriMesh};
use crate::reflect::discrete_mean_curvature;
use crate::spanner::{ball_wedge_volume, existence_gate};
use crate::sweep::{Disk, Region};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyTolerances {
    /// Plane fit of a boundary loop, relative to the bounding-box diagonal.
    pub plane: f64,
    /// Spread of `N' . N` along a loop.
    pub gamma: f64,
    /// Relative spread of discrete mean curvature.
    pub mean_curvature: f64,
    /// Collar width for the one-side test, relative to the bounding-box diagonal.
    pub collar: f64,
    /// Largest turning angle between consecutive boundary edges.
    pub turning: f64,
}

impl Default for VerifyTolerances {
    fn default() -> Self {
        Self { plane: 1e-6, gamma: 1e-3, mean_curvature: 2e-2, collar: 2e-2, turning: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingTypeReport {
    pub ring_type: bool,
    pub euler_characteristic: i64,
    pub boundary_loops: usize,
    pub components: usize,
    pub orientable: bool,
    pub consistently_wound: bool,
}

pub fn ring_type_check(mesh: &TriMesh) -> Result<RingTypeReport> {
    let t = mesh.topology()?;
    Ok(RingTypeReport {
        ring_type: t.euler_characteristic == 0 && t.boundary_loops.len() == 2 && t.components == 1 && t.orientable,
        euler_characteristic: t.euler_characteristic,
        boundary_loops: t.boundary_loops.len(),
        components: t.components,
        orientable: t.orientable,
        consistently_wound: t.consistently_wound,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopContact {
    /// Index into `Support::planes`.
    pub plane: usize,
    pub vertices: usize,
    pub plane_residual: f64,
    /// `arccos(-median(N' . N))`.
    pub gamma: f64,
    /// Max `|N' . N - median|`.
    pub max_deviation: f64,
    pub max_turning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdherenceReport {
    pub watertight: bool,
    pub self_intersections: usize,
    pub a1: bool,
    /// Most negative signed distance to a supporting plane among vertices in its collar.
    pub a2_worst: f64,
    pub a2: bool,
    pub a3: bool,
    pub boundary_smooth: bool,
    pub loops: Vec<LoopContact>,
}

impl AdherenceReport {
    pub fn passes(&self) -> bool {
        self.a1 && self.a2 && self.a3
    }

    /// Measured contact angle on each supporting plane, if that plane carries a loop.
    pub fn gammas(&self) -> [Option<f64>; 2] {
        let mut g = [None, None];
        for l in &self.loops {
            g[l.plane] = Some(l.gamma);
        }
        g
    }
}

/// Conditions A1-A3 against the supporting planes.
pub fn adherence_check(mesh: &TriMesh, support: &Support, tol: &VerifyTolerances) -> Result<AdherenceReport> {
    let topo = mesh.topology()?;
    let scale = mesh.bounding_diagonal();
    let planes = support.planes();
    let normals = mesh.vertex_normals();
    let tol_plane = tol.plane * scale;

    let mut loops = Vec::new();
    let mut fitted = Vec::new();
    for lp in &topo.boundary_loops {
        let resid = |k: usize| lp.iter().map(|&i| planes[k].signed_distance(&mesh.vertices[i]).abs()).fold(0.0, f64::max);
        let (plane, residual) = (0..2).map(|k| (k, resid(k))).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let on_half = planes[plane]
            .radial
            .map(|r| lp.iter().all(|&i| r.dot(&mesh.vertices[i]) >= -tol_plane))
            .unwrap_or(true);
        if residual > tol_plane || !on_half {
            return Err(Error::NotInWedgeFace(format!(
                "loop of {} vertices is {residual:e} from the nearest supporting plane",
                lp.len()
            )));
        }
        let fit = PlanarLoop::fit(&mesh.vertices, lp, scale)?;
        let np = planes[plane].normal;
        let mut dots: Vec<f64> = lp.iter().map(|&i| np.dot(&normals[i])).collect();
        let spread = dots.clone();
        dots.sort_by(f64::total_cmp);
        let median = dots[dots.len() / 2];
        let max_deviation = spread.iter().map(|d| (d - median).abs()).fold(0.0, f64::max);
        let n = fit.coords.len();
        let max_turning = (0..n)
            .map(|k| {
                let (a, b, c) = (fit.coords[(k + n - 1) % n], fit.coords[k], fit.coords[(k + 1) % n]);
                let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - b[0], c[1] - b[1]]);
                (u[0] * v[1] - u[1] * v[0]).abs().atan2(u[0] * v[0] + u[1] * v[1])
            })
            .fold(0.0, f64::max);
        loops.push(LoopContact {
            plane,
            vertices: lp.len(),
            plane_residual: residual,
            gamma: (-median).clamp(-1.0, 1.0).acos(),
            max_deviation,
            max_turning,
        });
        fitted.push((plane, fit));
    }

    // A1: the capped surface is closed and embedded.
    let closure = mesh.closure()?;
    let watertight = closure.mesh.is_watertight();
    let cm = &closure.mesh;
    let bvh = Bvh::build(&cm.vertices, &cm.faces);
    let self_intersections = bvh
        .candidate_pairs(1e-12 * scale)
        .into_par_iter()
        .filter(|&(f, g)| {
            let (a, b) = (cm.faces[f], cm.faces[g]);
            if a.iter().any(|v| b.contains(v)) {
                return false;
            }
            let t = a.map(|i| &cm.vertices[i]);
            let s = b.map(|i| &cm.vertices[i]);
            triangles_intersect(t, s)
        })
        .count();
    let a1 = watertight && self_intersections == 0;

    // A2: no vertex near a wetted disk lies beyond its plane.
    let collar = tol.collar * scale;
    let mut a2_worst = f64::INFINITY;
    for (plane, fit) in &fitted {
        let disk = Disk { lp: fit };
        for x in &mesh.vertices {
            let sd = planes[*plane].signed_distance(x);
            let proj = x - fit.normal * (x - fit.centroid).dot(&fit.normal);
            let lateral = if disk.contains(&proj) { 0.0 } else { disk.distance(&proj) };
            if lateral <= collar && sd.abs() <= collar {
                a2_worst = a2_worst.min(sd);
            }
        }
    }
    let a2 = a2_worst >= -tol_plane;
    let a3 = loops.iter().all(|l| l.max_deviation < tol.gamma);
    let boundary_smooth = loops.iter().all(|l| l.max_turning <= tol.turning);
    Ok(AdherenceReport { watertight, self_intersections, a1, a2_worst, a2, a3, boundary_smooth, loops })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CmcReport {
    pub mean: f64,
    pub max_rel_deviation: f64,
    pub samples: usize,
}

/// Discrete mean curvature over interior vertices.
pub fn cmc_check(mesh: &TriMesh) -> Result<CmcReport> {
    let dc = discrete_mean_curvature(mesh)?;
    let vals: Vec<f64> =
        dc.values.iter().zip(&dc.unreliable).filter(|(h, bad)| !**bad && h.is_finite()).map(|(h, _)| *h).collect();
    if vals.is_empty() {
        return Err(Error::NoInteriorSample);
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let max_rel_deviation = vals.iter().map(|h| (h - mean).abs()).fold(0.0, f64::max) / mean.abs();
    Ok(CmcReport { mean, max_rel_deviation, samples: vals.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    /// Annular surface with `gamma1 + gamma2 > pi + alpha`: the spherical spanner exists.
    ConsistentWithExistence,
    /// Annular surface with `gamma1 + gamma2 <= pi + alpha`.
    NonexistenceRegion,
    /// Not an annulus; the wedge results do not apply.
    OutOfScopeTopology,
    /// Parallel supporting planes: bridges are outside the wedge results.
    ParallelPlanes,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictReport {
    pub verdict: Verdict,
    pub margin: Option<f64>,
    /// A surface passing every check inside the nonexistence region.
    pub red_flag: bool,
    pub note: String,
}

/// Pure function of topology, check outcome and the contact parameters.
pub fn existence_verdict(ring_type: bool, all_checks_pass: bool, gamma1: f64, gamma2: f64, support: &Support) -> Result<VerdictReport> {
    if let Support::Slab { .. } = support {
        return Ok(VerdictReport {
            verdict: Verdict::ParallelPlanes,
            margin: None,
            red_flag: false,
            note: "parallel planes admit Delaunay bridges; the wedge classification does not apply".into(),
        });
    }
    if !ring_type {
        return Ok(VerdictReport {
            verdict: Verdict::OutOfScopeTopology,
            margin: None,
            red_flag: false,
            note: "not ring type; for gamma1, gamma2 <= pi/2 no embedded CMC spanner of any topology exists".into(),
        });
    }
    let gate = existence_gate(gamma1.clamp(0.0, PI), gamma2.clamp(0.0, PI), support.alpha())?;
    if gate.exists {
        Ok(VerdictReport {
            verdict: Verdict::ConsistentWithExistence,
            margin: Some(gate.margin),
            red_flag: false,
            note: "a spherical spanner exists for these parameters".into(),
        })
    } else {
        Ok(VerdictReport {
            verdict: Verdict::NonexistenceRegion,
            margin: Some(gate.margin),
            red_flag: all_checks_pass,
            note: if all_checks_pass {
                "inconsistent: no embedded ring-type CMC surface exists here, yet every check passed".into()
            } else {
                "no embedded ring-type CMC surface exists here; at least one check fails as expected".into()
            },
        })
    }
}

/// Least-squares sphere through the vertices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereFit {
    pub center: Vec3,
    pub radius: f64,
    pub rms: f64,
    /// Volume of the ball cut by the wedge faces, when the support is a wedge.
    pub wedge_volume: Option<f64>,
}

pub fn fit_sphere(points: &[Vec3]) -> Option<(Vec3, f64, f64)> {
    if points.len() < 4 {
        return None;
    }
    let m = DMatrix::from_fn(points.len(), 4, |i, j| if j < 3 { points[i][j] } else { 1.0 });
    let rhs = DVector::from_fn(points.len(), |i, _| -points[i].norm_squared());
    let sol = m.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let c = Vec3::new(-sol[0] / 2.0, -sol[1] / 2.0, -sol[2] / 2.0);
    let r2 = c.norm_squared() - sol[3];
    if !(r2 > 0.0) {
        return None;
    }
    let r = r2.sqrt();
    let rms = (points.iter().map(|p| ((p - c).norm() - r).powi(2)).sum::<f64>() / points.len() as f64).sqrt();
    Some((c, r, rms))
}

/// Volume enclosed by a closed, consistently wound mesh whose faces point inward.
pub fn enclosed_volume(closed: &TriMesh) -> f64 {
    -closed
        .faces
        .iter()
        .map(|f| closed.vertices[f[0]].dot(&closed.vertices[f[1]].cross(&closed.vertices[f[2]])))
        .sum::<f64>()
        / 6.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub ring: RingTypeReport,
    pub adherence: Option<AdherenceReport>,
    pub cmc: Option<CmcReport>,
    /// Contact angles on the two supporting planes.
    pub gamma: [Option<f64>; 2],
    pub all_checks_pass: bool,
    /// Volume of the capped surface.
    pub enclosed_volume: Option<f64>,
    /// Present when the vertices lie on a sphere to `1e-9` of the diagonal.
    pub sphere: Option<SphereFit>,
    pub verdict: VerdictReport,
    /// Why a check could not run.
    pub errors: Vec<String>,
}

/// Runs every check and the verdict. Check failures are recorded, not returned as errors.
pub fn verify(mesh: &TriMesh, support: &Support, tol: &VerifyTolerances) -> Result<VerificationReport> {
    let ring = ring_type_check(mesh)?;
    let mut errors = Vec::new();
    let adherence = if ring.ring_type || matches!(support, Support::Slab { .. }) {
        match adherence_check(mesh, support, tol) {
            Ok(a) => Some(a),
            Err(e) => {
                errors.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    let cmc = match cmc_check(mesh) {
        Ok(c) => Some(c),
        Err(e) => {
            errors.push(e.to_string());
            None
        }
    };
    let gamma = adherence.as_ref().map(|a| a.gammas()).unwrap_or([None, None]);
    let cmc_ok = cmc.map(|c| c.max_rel_deviation < tol.mean_curvature).unwrap_or(false);
    let all_checks_pass = ring.ring_type && adherence.as_ref().map(|a| a.passes()).unwrap_or(false) && cmc_ok;
    let verdict = match gamma {
        [Some(g1), Some(g2)] if ring.ring_type => existence_verdict(true, all_checks_pass, g1, g2, support)?,
        _ => existence_verdict(false, all_checks_pass, 0.0, 0.0, support)?,
    };
    let enclosed_volume = mesh.closure().ok().filter(|c| c.mesh.is_watertight()).map(|c| enclosed_volume(&c.mesh));
    let scale = mesh.bounding_diagonal();
    let sphere = fit_sphere(&mesh.vertices).filter(|f| f.2 <= 1e-9 * scale).map(|(center, radius, rms)| {
        let wedge_volume = match support {
            Support::Wedge(w) => Sphere::new(center, radius).ok().map(|s| ball_wedge_volume(&s, w).0),
            Support::Slab { .. } => None,
        };
        SphereFit { center, radius, rms, wedge_volume }
    });
    Ok(VerificationReport { ring, adherence, cmc, gamma, all_checks_pass, enclosed_volume, sphere, verdict, errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Wedge;
    use crate::mesh::fixtures::{square, uv_sphere};
    use crate::spanner::{mesh_spanner, solve_sphere};

    fn spanner(g1: f64, g2: f64, alpha: f64, res: usize) -> (Support, TriMesh) {
        let s = solve_sphere(g1, g2, alpha, 1.0).unwrap();
        (Support::Wedge(Wedge::new(alpha).unwrap()), mesh_spanner(&s, res).unwrap())
    }

    #[test]
    fn ring_type_of_basic_shapes() {
        let (_, m) = spanner(2.6, 2.4, 1.0, 32);
        assert!(ring_type_check(&m).unwrap().ring_type);
        let s = ring_type_check(&uv_sphere(1.0, 12, 16)).unwrap();
        assert!(!s.ring_type);
        assert_eq!((s.euler_characteristic, s.boundary_loops), (2, 0));
        let d = ring_type_check(&square(4, 1.0)).unwrap();
        assert_eq!((d.euler_characteristic, d.boundary_loops), (1, 1));
    }

    #[test]
    fn spanner_passes_all_checks() {
        let (sup, m) = spanner(2.6, 2.4, 1.0, 64);
        let r = verify(&m, &sup, &VerifyTolerances::default()).unwrap();
        assert!(r.all_checks_pass, "{r:?}");
        assert_eq!(r.verdict.verdict, Verdict::ConsistentWithExistence);
        assert!((r.gamma[0].unwrap() - 2.6).abs() < 1e-3);
        assert!((r.gamma[1].unwrap() - 2.4).abs() < 1e-3);
        assert!(r.cmc.unwrap().max_rel_deviation < 2e-2);
        let s = solve_sphere(2.6, 2.4, 1.0, 1.0).unwrap();
        let fit = r.sphere.unwrap();
        assert!((fit.wedge_volume.unwrap() - s.volume).abs() < 1e-8 * s.volume);
        // The polyhedron is inscribed, so it encloses slightly less.
        let v = r.enclosed_volume.unwrap();
        assert!(v < s.volume && v > 0.98 * s.volume, "{v} vs {}", s.volume);
    }

    #[test]
    fn protrusion_through_plane_violates_a2() {
        let (sup, mut m) = spanner(2.6, 2.4, 1.0, 48);
        let planes = sup.planes();
        let b = m.boundary_flags().unwrap();
        // Push the interior ring next to the first loop through its plane.
        let near: Vec<usize> = (0..m.vertices.len())
            .filter(|&i| !b[i] && planes[0].signed_distance(&m.vertices[i]) < 0.05)
            .collect();
        assert!(!near.is_empty());
        for i in near {
            m.vertices[i] -= planes[0].normal * 0.1;
        }
        let a = adherence_check(&m, &sup, &VerifyTolerances::default()).unwrap();
        assert!(!a.a2);
    }

    #[test]
    fn self_intersection_violates_a1() {
        let (sup, mut m) = spanner(2.6, 2.4, 1.0, 48);
        let b = m.boundary_flags().unwrap();
        let c = m.vertices.iter().sum::<Vec3>() / m.vertices.len() as f64;
        // Fold a patch of the surface through the opposite side of the drop.
        let far = (0..m.vertices.len()).filter(|&i| !b[i]).max_by(|&i, &j| {
            let (di, dj) = ((m.vertices[i] - c).norm(), (m.vertices[j] - c).norm());
            di.total_cmp(&dj)
        });
        let i0 = far.unwrap();
        let target = c - (m.vertices[i0] - c) * 1.5;
        m.vertices[i0] = target;
        let a = adherence_check(&m, &sup, &VerifyTolerances::default()).unwrap();
        assert!(a.self_intersections > 0);
        assert!(!a.a1);
    }

    #[test]
    fn noisy_sphere_fails_cmc() {
        let (_, mut m) = spanner(2.6, 2.4, 1.0, 48);
        let b = m.boundary_flags().unwrap();
        for (k, (v, &on)) in m.vertices.iter_mut().zip(&b).enumerate() {
            if !on {
                *v *= 1.0 + 0.01 * ((k as f64) * 12.9898).sin();
            }
        }
        m.normals.clear();
        assert!(cmc_check(&m).unwrap().max_rel_deviation > 0.1);
    }

    #[test]
    fn verdicts() {
        let w = Support::Wedge(Wedge::new(1.0).unwrap());
        assert_eq!(existence_verdict(true, true, 2.6, 2.4, &w).unwrap().verdict, Verdict::ConsistentWithExistence);
        let v = existence_verdict(true, true, 2.0, 2.0, &w).unwrap();
        assert_eq!(v.verdict, Verdict::NonexistenceRegion);
        assert!(v.red_flag);
        assert!(!existence_verdict(true, false, 2.0, 2.0, &w).unwrap().red_flag);
        assert_eq!(existence_verdict(false, true, 2.6, 2.4, &w).unwrap().verdict, Verdict::OutOfScopeTopology);
        let slab = Support::Slab { separation: 1.0 };
        assert_eq!(existence_verdict(true, true, 2.0, 2.0, &slab).unwrap().verdict, Verdict::ParallelPlanes);
    }

    #[test]
    fn loop_off_wedge_face_is_rejected() {
        let (_, m) = spanner(2.6, 2.4, 1.0, 32);
        let wider = Support::Wedge(Wedge::new(1.4).unwrap());
        assert!(matches!(adherence_check(&m, &wider, &VerifyTolerances::default()), Err(Error::NotInWedgeFace(_))));
    }
}
