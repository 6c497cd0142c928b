//! Points, spheres, circles, the canonical wedge frame, and inversive geometry.
//!
//! The wedge vertex is the x3-axis. Face 1 is the half-plane at azimuth
//! `+alpha/2`, face 2 the half-plane at azimuth `-alpha/2`; the drop region
//! is the dihedral interior `|azimuth| < alpha/2`. Inversions are taken
//! about a point on the vertex, by default the coordinate origin.

use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::error::{contract, Error, Result};
use crate::mesh::TriMesh;

pub type Vec3 = nalgebra::Vector3<f64>;

/// Relative tolerance on `|v| - 1` for inputs documented as unit vectors.
pub const UNIT_TOL: f64 = 1e-9;

/// Relative scale for point-membership ambiguity (times the bounding-box diagonal).
pub const EPS_GEOM_REL: f64 = 1e-9;

pub(crate) fn check_unit(v: &Vec3, what: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_TOL {
        return Err(contract(format!("{what} is not a unit vector (|v| = {})", v.norm())));
    }
    Ok(())
}

pub(crate) fn check_finite_positive(x: f64, what: &str) -> Result<()> {
    if !(x.is_finite() && x > 0.0) {
        return Err(contract(format!("{what} must be finite and > 0, got {x}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WedgeFace {
    First,
    Second,
}

impl WedgeFace {
    pub fn index(self) -> usize {
        match self {
            WedgeFace::First => 0,
            WedgeFace::Second => 1,
        }
    }

    pub fn other(self) -> WedgeFace {
        match self {
            WedgeFace::First => WedgeFace::Second,
            WedgeFace::Second => WedgeFace::First,
        }
    }
}

/// Two half-planes bounded by the x3-axis with opening angle `alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wedge {
    alpha: f64,
}

impl Wedge {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < std::f64::consts::PI) {
            return Err(contract(format!("wedge angle must lie in (0, pi), got {alpha}")));
        }
        Ok(Self { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Unit normal of the given face pointing into the wedge interior.
    pub fn inward_normal(&self, face: WedgeFace) -> Vec3 {
        let (s, c) = (self.alpha / 2.0).sin_cos();
        match face {
            WedgeFace::First => Vec3::new(s, -c, 0.0),
            WedgeFace::Second => Vec3::new(s, c, 0.0),
        }
    }

    /// Unit direction within the face, perpendicular to the vertex, pointing away from it.
    pub fn radial_direction(&self, face: WedgeFace) -> Vec3 {
        let (s, c) = (self.alpha / 2.0).sin_cos();
        match face {
            WedgeFace::First => Vec3::new(c, s, 0.0),
            WedgeFace::Second => Vec3::new(c, -s, 0.0),
        }
    }

    /// Strict interior membership.
    pub fn contains(&self, p: &Vec3) -> bool {
        self.inward_normal(WedgeFace::First).dot(p) > 0.0
            && self.inward_normal(WedgeFace::Second).dot(p) > 0.0
    }

    pub fn support(&self) -> Support {
        Support::Wedge(*self)
    }
}

/// One supporting plane `normal . x = offset`, with `normal` pointing into the drop.
/// For wedge faces the plane is restricted to the half-plane `radial . x > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportPlane {
    pub normal: Vec3,
    pub offset: f64,
    pub radial: Option<Vec3>,
}

impl SupportPlane {
    pub fn signed_distance(&self, p: &Vec3) -> f64 {
        self.normal.dot(p) - self.offset
    }
}

/// The pair of planes a drop adheres to: a wedge, or the parallel-plane limit
/// `x3 = 0` and `x3 = separation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Support {
    Wedge(Wedge),
    Slab { separation: f64 },
}

impl Support {
    pub fn planes(&self) -> [SupportPlane; 2] {
        match self {
            Support::Wedge(w) => [WedgeFace::First, WedgeFace::Second].map(|f| SupportPlane {
                normal: w.inward_normal(f),
                offset: 0.0,
                radial: Some(w.radial_direction(f)),
            }),
            Support::Slab { separation } => [
                SupportPlane { normal: Vec3::z(), offset: 0.0, radial: None },
                SupportPlane { normal: -Vec3::z(), offset: -separation, radial: None },
            ],
        }
    }

    /// Opening angle; zero for parallel planes.
    pub fn alpha(&self) -> f64 {
        match self {
            Support::Wedge(w) => w.alpha(),
            Support::Slab { .. } => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sphere {
    pub center: Vec3,
    pub radius: f64,
}

impl Sphere {
    pub fn new(center: Vec3, radius: f64) -> Result<Self> {
        check_finite_positive(radius, "sphere radius")?;
        Ok(Self { center, radius })
    }

    pub fn tangent_length(&self, origin: &Vec3) -> Result<f64> {
        inversion_invariant_radius(&self.center, self.radius, origin)
    }
}

/// A circle lying in the plane through `center` with unit normal `normal`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec3,
    pub normal: Vec3,
    pub radius: f64,
}

impl Circle {
    /// Point at angle `t`, measured from an arbitrary but fixed in-plane axis.
    pub fn point(&self, t: f64) -> Vec3 {
        let (a, b) = orthonormal_pair(&self.normal);
        self.center + self.radius * (t.cos() * a + t.sin() * b)
    }

    /// Radius of the inversion about `origin` that fixes the circle; the circle
    /// is invariant as a set when `origin` lies in its plane.
    pub fn tangent_length(&self, origin: &Vec3) -> Result<f64> {
        inversion_invariant_radius(&self.center, self.radius, origin)
    }
}

/// Two unit vectors completing `n` to a right-handed orthonormal frame.
pub fn orthonormal_pair(n: &Vec3) -> (Vec3, Vec3) {
    let n = n.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = (helper - helper.dot(&n) * n).normalize();
    let b = n.cross(&a);
    (a, b)
}

/// Spherical inversion `X -> origin + rho^2 (X - origin) / |X - origin|^2`.
pub fn invert_point(x: &Vec3, rho: f64, origin: &Vec3) -> Result<Vec3> {
    check_finite_positive(rho, "inversion radius")?;
    let d = x - origin;
    let r2 = d.norm_squared();
    if r2 == 0.0 || !r2.is_finite() {
        return Err(Error::Domain("inversion is singular at its center".into()));
    }
    Ok(origin + d * (rho * rho / r2))
}

/// Image of a unit normal under the differential of the inversion centered at
/// `origin`: the mirror reflection across the plane orthogonal to `x - origin`.
pub fn invert_normal(x: &Vec3, normal: &Vec3, origin: &Vec3) -> Vec3 {
    let d = (x - origin).normalize();
    (normal - 2.0 * d.dot(normal) * d).normalize()
}

/// Closed-form image of a sphere under inversion about the coordinate origin.
///
/// A sphere through the origin maps to a plane; that case is reported as
/// [`Error::PlaneImage`] carrying the plane `normal . Y = distance`.
pub fn invert_sphere(s: &Sphere, rho: f64) -> Result<Sphere> {
    check_finite_positive(rho, "inversion radius")?;
    let power = s.center.norm_squared() - s.radius * s.radius;
    let scale = s.center.norm().max(s.radius);
    if power.abs() <= 1e-14 * scale * scale {
        // Through the origin: the farthest point 2c maps to the foot of the image plane.
        let normal = s.center.normalize();
        let distance = rho * rho / (2.0 * s.center.norm());
        return Err(Error::PlaneImage { normal, distance });
    }
    let center = s.center * (rho * rho / power);
    let radius = rho * rho * s.radius / power.abs();
    Sphere::new(center, radius)
}

/// Image of the plane `normal . X = h` (h > 0, unit normal) under inversion about
/// the origin: the sphere through the origin of radius `rho^2 / (2h)`.
pub fn invert_plane(normal: &Vec3, h: f64, rho: f64) -> Result<Sphere> {
    check_unit(normal, "plane normal")?;
    check_finite_positive(h, "plane distance")?;
    check_finite_positive(rho, "inversion radius")?;
    let r = rho * rho / (2.0 * h);
    Sphere::new(normal * r, r)
}

/// Power of `point` with respect to a circle or sphere.
pub fn power_of_point(center: &Vec3, radius: f64, point: &Vec3) -> f64 {
    (center - point).norm_squared() - radius * radius
}

/// Tangent length from `origin` to a circle or sphere; inversion about `origin`
/// with this radius leaves the circle or sphere invariant as a set.
pub fn inversion_invariant_radius(center: &Vec3, radius: f64, origin: &Vec3) -> Result<f64> {
    check_finite_positive(radius, "radius")?;
    let power = power_of_point(center, radius, origin);
    if power <= 0.0 {
        return Err(Error::Domain(format!(
            "origin is not strictly outside (power of point {power})"
        )));
    }
    Ok(power.sqrt())
}

/// Contact angle from the surface normal `n` and the plane normal `n_plane`,
/// both pointing into the drop: `gamma = arccos(-n . n_plane)`.
pub fn contact_angle(n: &Vec3, n_plane: &Vec3) -> Result<f64> {
    check_unit(n, "surface normal")?;
    check_unit(n_plane, "plane normal")?;
    Ok(n.cross(n_plane).norm().atan2(-n.dot(n_plane)))
}

/// Ray-parity membership in the region bounded by a closed triangulated surface.
pub fn point_in_drop_region(closed: &TriMesh, p: &Vec3) -> Result<bool> {
    if !closed.is_watertight() {
        return Err(Error::OpenSurface("every edge must be shared by exactly two faces".into()));
    }
    let bvh = Bvh::build(&closed.vertices, &closed.faces);
    let eps = EPS_GEOM_REL * closed.bounding_diagonal();
    if bvh.closest_point(p).map(|c| c.distance <= eps).unwrap_or(false) {
        return Err(Error::BoundaryAmbiguous { tolerance: eps });
    }
    Ok(bvh.contains(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    #[test]
    fn inversion_fixes_the_reflecting_sphere() {
        let x = Vec3::new(1.2, -0.4, 0.9).normalize() * 2.5;
        let y = invert_point(&x, 2.5, &Vec3::zeros()).unwrap();
        assert!((x - y).norm() < 1e-14);
    }

    #[test]
    fn inversion_scales_radially() {
        let y = invert_point(&Vec3::new(4.0, 0.0, 0.0), 2.0, &Vec3::zeros()).unwrap();
        assert!((y - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inversion_is_singular_at_center() {
        let o = Vec3::new(0.0, 0.0, 1.0);
        assert!(matches!(invert_point(&o, 1.0, &o), Err(Error::Domain(_))));
    }

    #[test]
    fn sphere_image_closed_form() {
        let s = Sphere::new(Vec3::new(3.0, 0.0, 0.0), 1.0).unwrap();
        let img = invert_sphere(&s, 2.0).unwrap();
        assert!((img.radius - 0.5).abs() < 1e-15);
        assert!((img.center - Vec3::new(1.5, 0.0, 0.0)).norm() < 1e-15);

        let c = Sphere::new(Vec3::zeros(), 3.0).unwrap();
        let img = invert_sphere(&c, 2.0).unwrap();
        assert!((img.radius - 4.0 / 3.0).abs() < 1e-15);
        assert!(img.center.norm() < 1e-15);
    }

    #[test]
    fn sphere_through_origin_maps_to_plane() {
        let s = Sphere::new(Vec3::new(0.0, 2.0, 0.0), 2.0).unwrap();
        match invert_sphere(&s, 2.0) {
            Err(Error::PlaneImage { normal, distance }) => {
                assert!((normal - Vec3::y()).norm() < 1e-15);
                assert!((distance - 1.0).abs() < 1e-15);
            }
            other => panic!("expected plane image, got {other:?}"),
        }
    }

    #[test]
    fn tangent_length_three_four_five() {
        let r = inversion_invariant_radius(&Vec3::new(0.0, 5.0, 0.0), 3.0, &Vec3::zeros()).unwrap();
        assert!((r - 4.0).abs() < 1e-15);
        assert!(inversion_invariant_radius(&Vec3::new(0.0, 1.0, 0.0), 3.0, &Vec3::zeros()).is_err());
        assert!(inversion_invariant_radius(&Vec3::new(0.0, 3.0, 0.0), 3.0, &Vec3::zeros()).is_err());
    }

    #[test]
    fn circle_is_invariant_under_tangent_length_inversion() {
        let circle = Circle {
            center: Vec3::new(2.0, 1.0, -0.5),
            normal: Vec3::new(2.0, 1.0, -0.5).cross(&Vec3::new(0.3, -0.2, 1.0)).normalize(),
            radius: 1.1,
        };
        let rho = circle.tangent_length(&Vec3::zeros()).unwrap();
        // Power identity: rho^2 equals the power of the origin.
        let power = power_of_point(&circle.center, circle.radius, &Vec3::zeros());
        assert!((rho * rho - power).abs() < 1e-12 * power);
        for k in 0..64 {
            let p = circle.point(2.0 * PI * k as f64 / 64.0);
            let q = invert_point(&p, rho, &Vec3::zeros()).unwrap();
            let in_plane = (q - circle.center).dot(&circle.normal);
            let radial = ((q - circle.center) - in_plane * circle.normal).norm();
            assert!(in_plane.abs() < 1e-10 && (radial - circle.radius).abs() < 1e-10);
        }
    }

    #[test]
    fn contact_angle_extremes() {
        let np = Vec3::new(0.0, 0.0, 1.0);
        assert!(contact_angle(&-np, &np).unwrap().abs() < 1e-15);
        assert!((contact_angle(&np, &np).unwrap() - PI).abs() < 1e-15);
        assert!((contact_angle(&Vec3::x(), &np).unwrap() - FRAC_PI_2).abs() < 1e-15);
        assert!(contact_angle(&Vec3::new(0.0, 0.0, 2.0), &np).is_err());
    }

    #[test]
    fn wedge_normals_make_supplementary_angle() {
        for &alpha in &[0.1, 1.0, 2.0, 3.0] {
            let w = Wedge::new(alpha).unwrap();
            let n1 = w.inward_normal(WedgeFace::First);
            let n2 = w.inward_normal(WedgeFace::Second);
            assert!((n1.norm() - 1.0).abs() < 1e-15 && (n2.norm() - 1.0).abs() < 1e-15);
            assert!((n1.dot(&n2).clamp(-1.0, 1.0).acos() - (PI - alpha)).abs() < 1e-12);
            // Faces contain the vertex line and the radial direction.
            for f in [WedgeFace::First, WedgeFace::Second] {
                assert!(w.inward_normal(f).dot(&w.radial_direction(f)).abs() < 1e-15);
                assert!(w.inward_normal(f).z == 0.0);
            }
            assert!(w.contains(&Vec3::new(1.0, 0.0, 5.0)));
            assert!(!w.contains(&Vec3::new(-1.0, 0.0, 0.0)));
        }
        assert!(Wedge::new(0.0).is_err());
        assert!(Wedge::new(PI).is_err());
    }

    #[test]
    fn inversion_is_conformal() {
        // Finite-difference images of two tangent directions keep their angle.
        let x = Vec3::new(1.3, 0.7, -0.4);
        let (a, b) = (Vec3::new(1.0, 0.2, 0.0).normalize(), Vec3::new(-0.3, 1.0, 0.5).normalize());
        let h = 1e-6;
        let o = Vec3::zeros();
        let f = |p: Vec3| invert_point(&p, 1.7, &o).unwrap();
        let da = (f(x + h * a) - f(x - h * a)) / (2.0 * h);
        let db = (f(x + h * b) - f(x - h * b)) / (2.0 * h);
        let before = a.dot(&b).acos();
        let after = (da.dot(&db) / (da.norm() * db.norm())).acos();
        assert!((before - after).abs() < 1e-8);
    }

    #[test]
    fn inverted_normal_stays_normal_to_image_of_plane() {
        let n = Vec3::new(0.0, 0.0, -1.0);
        let rho = 1.5;
        let img = invert_plane(&-n, 0.8, rho).unwrap();
        for &(x, y) in &[(0.3, 0.1), (-1.0, 2.0), (0.0, 0.0)] {
            let p = Vec3::new(x, y, 0.8);
            let q = invert_point(&p, rho, &Vec3::zeros()).unwrap();
            let nh = invert_normal(&p, &n, &Vec3::zeros());
            let radial = (q - img.center).normalize();
            assert!(nh.cross(&radial).norm() < 1e-12);
            assert!(((q - img.center).norm() - img.radius).abs() < 1e-12);
        }
    }
}
