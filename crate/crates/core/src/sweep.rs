//! Alexandrov reflection sweeps: inversion in spheres centered on the wedge
//! vertex, and mirror reflection in planes moving along a fixed direction.
//!
//! Every sample point `X` of the surface is tested once for how far it can move
//! toward the reflection center while staying in the closed drop region
//! thickened by `eps_touch`. After that, the NT conditions at any radius reduce
//! to comparisons, so the sweep schedule and bisection cost almost nothing.

use std::collections::{HashMap, HashSet};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::error::{contract, Error, Result};
use crate::geom::{invert_normal, invert_point, Vec3, Wedge, WedgeFace};
use crate::mesh::{Closure, PlanarLoop, TriMesh};
use crate::reflect::{discrete_mean_curvature, reflected_mean_curvature};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Inversion in spheres `|X - origin| = rho`.
    Spherical,
    /// Mirror reflection in planes `X . direction = lambda`.
    Planar { direction: Vec3 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub kind: SweepKind,
    /// Position of the origin along the vertex (x3 axis).
    pub origin_shift: f64,
    /// Number of coarse schedule steps before bisection.
    pub steps: usize,
    /// Smallest scheduled radius as a fraction of `rho0` (spherical sweeps).
    pub rho_min_ratio: f64,
    /// Final bracket width as a fraction of the swept range.
    pub bracket_ratio: f64,
    /// Tangency distance; `None` means `1e-3` times the bounding-box diagonal.
    pub eps_touch: Option<f64>,
    /// Normal alignment threshold in radians.
    pub eps_angle: f64,
    /// Mean curvature for the boundedness audit; estimated from the mesh when absent.
    pub mean_curvature: Option<f64>,
    /// Number of radii in the boundedness audit.
    pub audit_samples: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            kind: SweepKind::Spherical,
            origin_shift: 0.0,
            steps: 256,
            rho_min_ratio: 1e-3,
            bracket_ratio: 1e-4,
            eps_touch: None,
            eps_angle: 1e-2,
            mean_curvature: None,
            audit_samples: 32,
        }
    }
}

impl SweepConfig {
    pub fn planar(direction: Vec3) -> Self {
        Self { kind: SweepKind::Planar { direction }, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if let Some(e) = self.eps_touch {
            if !(e.is_finite() && e > 0.0) {
                return Err(contract(format!("eps_touch must be positive, got {e}")));
            }
        }
        if !(self.eps_angle.is_finite() && self.eps_angle > 0.0) {
            return Err(contract(format!("eps_angle must be positive, got {}", self.eps_angle)));
        }
        if self.steps < 2 {
            return Err(contract("at least two schedule steps are required"));
        }
        if !(self.rho_min_ratio > 0.0 && self.rho_min_ratio < 1.0) {
            return Err(contract("rho_min_ratio must lie in (0, 1)"));
        }
        if !(self.bracket_ratio > 0.0 && self.bracket_ratio < 1.0) {
            return Err(contract("bracket_ratio must lie in (0, 1)"));
        }
        if let SweepKind::Planar { direction } = self.kind {
            if !((direction.norm() - 1.0).abs() < 1e-9) {
                return Err(contract("planar sweep direction must be a unit vector"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    NT1,
    NT2,
    NT3,
    NT4,
    T1,
    T2,
    T3,
    T4,
}

impl Tag {
    pub fn is_touching(self) -> bool {
        matches!(self, Tag::T1 | Tag::T2 | Tag::T3 | Tag::T4)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SampleSource {
    Vertex(usize),
    /// Point on edge `(a, b)` at parameter `t` from `a`.
    Edge(usize, usize, f64),
}

/// A point of the surface tested by the sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub source: SampleSource,
    pub position: Vec3,
    pub normal: Vec3,
    pub boundary: bool,
    /// `|X - origin|` or `X . direction`.
    pub key: f64,
    /// Dot product of the outward sweep direction with the vector whose sign
    /// decides centrality (`N`, or the conormal `n` on the boundary); `None`
    /// when no band condition applies.
    pub central: Option<f64>,
    /// Distance the point can travel toward the reflection center inside the drop region.
    pub t_exit: f64,
    /// The same inside the region thickened by `eps_touch`.
    pub t_out: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClass {
    pub sample: usize,
    pub tag: Tag,
    /// Segment verdict within the thickening but outside the exact region.
    pub ambiguous: bool,
    /// Tangency confirmed for a touching tag.
    pub confirmed: bool,
    /// Segment length needed to reach the reflected point (segment tests only).
    pub required: Option<f64>,
    pub available: f64,
    pub central: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCounts {
    pub counts: std::collections::BTreeMap<String, usize>,
    pub ambiguous: usize,
}

impl TagCounts {
    fn from_classes(classes: &[PointClass]) -> Self {
        let mut out = Self::default();
        for c in classes {
            *out.counts.entry(format!("{:?}", c.tag)).or_default() += 1;
            if c.ambiguous {
                out.ambiguous += 1;
            }
        }
        out
    }

    pub fn touching(&self) -> usize {
        self.counts.iter().filter(|(k, _)| k.starts_with('T')).map(|(_, v)| v).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TouchingEvent {
    pub tag: Tag,
    pub position: Vec3,
    pub reflected: Vec3,
    /// Distance from the reflected point to the unreflected part, or `|central|` for T3/T4.
    pub distance: f64,
    pub confirmed: bool,
}

/// Maximum over sampled `(X, rho)` of `H_hat - H`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundednessAudit {
    pub mean_curvature: f64,
    pub max_excess: f64,
    pub argmax_vertex: usize,
    pub argmax_rho: f64,
    pub rho_samples: Vec<f64>,
    pub per_rho_maximizer_on_boundary: Vec<bool>,
    pub maximizer_on_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentralityAudit {
    pub tolerance: f64,
    /// Max `X . N` over vertices with `|X| >= rho1`.
    pub max_x_dot_normal: f64,
    /// Max `X . n` over boundary vertices with `|X| >= rho1`.
    pub max_x_dot_conormal: f64,
    /// Boundary vertices with `X . N = 0` and `0 < gamma < pi` where `X . n != 0`.
    pub conormal_violations: usize,
    /// Interior vertices with `X . N = 0` away from `|X| = rho1`.
    pub equality_violations: usize,
    /// Min `N . n` over the boundary.
    pub min_normal_dot_conormal: f64,
    /// Boundary vertices with `N . n = 0` whose contact angle is not 0 or pi.
    pub conormal_equality_violations: usize,
}

impl CentralityAudit {
    pub fn passes(&self) -> bool {
        self.max_x_dot_normal <= self.tolerance
            && self.max_x_dot_conormal <= self.tolerance
            && self.conormal_violations == 0
            && self.equality_violations == 0
            && self.min_normal_dot_conormal >= -self.tolerance
            && self.conormal_equality_violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub kind: SweepKind,
    pub origin: Vec3,
    pub rho0: f64,
    /// Last scheduled value at which every point passes.
    pub rho1: f64,
    /// `[fail, pass]` values enclosing the first failure.
    pub bracket: [f64; 2],
    pub eps_touch: f64,
    pub eps_angle: f64,
    pub samples: usize,
    pub counts_at_rho1: TagCounts,
    pub counts_at_failure: TagCounts,
    pub touching_types: Vec<Tag>,
    pub touching: Vec<TouchingEvent>,
    /// Scheduled values above the first failure at which a failure occurs after a pass.
    pub monotone_violations: usize,
    pub coincidence_residual: f64,
    pub coincidence_threshold: f64,
    pub symmetric: bool,
    pub boundedness: Option<BoundednessAudit>,
    pub centrality: Option<CentralityAudit>,
}

/// Farthest vertex distance from `origin`.
pub fn find_rho0(mesh: &TriMesh, origin: &Vec3) -> Result<f64> {
    if mesh.vertices.is_empty() {
        return Err(contract("empty mesh"));
    }
    Ok(mesh.vertices.iter().map(|x| (x - origin).norm()).fold(0.0, f64::max))
}

/// Membership region used by the segment tests.
pub(crate) trait Region: Sync {
    fn distance(&self, p: &Vec3) -> f64;
    fn contains(&self, p: &Vec3) -> bool;
    /// Parameter of the next boundary crossing along `d`, skipping listed elements.
    fn next_hit(&self, p: &Vec3, d: &Vec3, skip: &[usize]) -> Option<f64>;
}

struct Solid<'a> {
    bvh: &'a Bvh,
}

impl Region for Solid<'_> {
    fn distance(&self, p: &Vec3) -> f64 {
        self.bvh.closest_point(p).map(|c| c.distance).unwrap_or(f64::INFINITY)
    }

    fn contains(&self, p: &Vec3) -> bool {
        self.bvh.contains(p)
    }

    fn next_hit(&self, p: &Vec3, d: &Vec3, skip: &[usize]) -> Option<f64> {
        self.bvh.first_hit(p, d, 0.0, f64::INFINITY, |f| !skip.contains(&f)).map(|h| h.t)
    }
}

/// The planar disk enclosed by a boundary loop.
pub(crate) struct Disk<'a> {
    pub(crate) lp: &'a PlanarLoop,
}

impl Disk<'_> {
    fn edge(&self, i: usize) -> ([f64; 2], [f64; 2]) {
        let n = self.lp.coords.len();
        (self.lp.coords[i], self.lp.coords[(i + 1) % n])
    }
}

impl Region for Disk<'_> {
    fn distance(&self, p: &Vec3) -> f64 {
        let q = self.lp.to_2d(p);
        let off = (p - self.lp.centroid).dot(&self.lp.normal).abs();
        let mut best = f64::INFINITY;
        for i in 0..self.lp.coords.len() {
            let (a, b) = self.edge(i);
            let (ab, aq) = ([b[0] - a[0], b[1] - a[1]], [q[0] - a[0], q[1] - a[1]]);
            let l2 = ab[0] * ab[0] + ab[1] * ab[1];
            let t = if l2 > 0.0 { ((aq[0] * ab[0] + aq[1] * ab[1]) / l2).clamp(0.0, 1.0) } else { 0.0 };
            let d = (aq[0] - t * ab[0]).hypot(aq[1] - t * ab[1]);
            best = best.min(d);
        }
        best.hypot(off)
    }

    fn contains(&self, p: &Vec3) -> bool {
        let q = self.lp.to_2d(p);
        let mut inside = false;
        for i in 0..self.lp.coords.len() {
            let (a, b) = self.edge(i);
            if (a[1] > q[1]) != (b[1] > q[1]) {
                let x = a[0] + (q[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                if q[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn next_hit(&self, p: &Vec3, d: &Vec3, skip: &[usize]) -> Option<f64> {
        let q = self.lp.to_2d(p);
        let dd = [d.dot(&self.lp.axes.0), d.dot(&self.lp.axes.1)];
        let mut best: Option<f64> = None;
        for i in 0..self.lp.coords.len() {
            if skip.contains(&i) {
                continue;
            }
            let (a, b) = self.edge(i);
            let e = [b[0] - a[0], b[1] - a[1]];
            let den = dd[0] * e[1] - dd[1] * e[0];
            if den.abs() < 1e-300 {
                continue;
            }
            let w = [a[0] - q[0], a[1] - q[1]];
            let t = (w[0] * e[1] - w[1] * e[0]) / den;
            let s = (w[0] * dd[1] - w[1] * dd[0]) / den;
            if t > 0.0 && (0.0..=1.0).contains(&s) && best.map(|b| t < b).unwrap_or(true) {
                best = Some(t);
            }
        }
        best
    }
}

/// Exact and thickened travel distances from `x` along unit `d`, capped at `lmax`.
fn travel(region: &dyn Region, x: &Vec3, d: &Vec3, skip: &[usize], eps: f64, lmax: f64) -> (f64, f64) {
    let t_exit = match region.next_hit(x, d, skip) {
        Some(t) if region.contains(&(x + d * (0.5 * t.min(lmax)))) => t.min(lmax),
        None if region.contains(&(x + d * (0.5 * lmax.min(eps)))) => lmax,
        _ => 0.0,
    };
    let ok = |t: f64| {
        let p = x + d * t;
        region.distance(&p) <= eps || region.contains(&p)
    };
    let mut t = t_exit;
    let mut last_ok = t_exit;
    let min_step = 0.02 * eps;
    for _ in 0..100_000 {
        if t >= lmax {
            return (t_exit, lmax);
        }
        let p = x + d * t;
        let dist = region.distance(&p);
        if dist <= eps {
            last_ok = t;
            t += (eps - dist).max(min_step);
            continue;
        }
        if region.contains(&p) {
            last_ok = t;
            match region.next_hit(&p, d, &[]) {
                Some(h) => t += h.max(min_step),
                None => return (t_exit, lmax),
            }
            continue;
        }
        let (mut lo, mut hi) = (last_ok, t);
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return (t_exit, lo.min(lmax));
    }
    (t_exit, last_ok.min(lmax))
}

/// Everything the sweep needs that does not depend on the sweep parameter.
pub struct SweepContext {
    pub kind: SweepKind,
    pub origin: Vec3,
    pub mesh: TriMesh,
    pub normals: Vec<Vec3>,
    pub closure: Closure,
    pub samples: Vec<Sample>,
    pub eps_touch: f64,
    pub eps_angle: f64,
    pub scale: f64,
    pub key_min: f64,
    pub key_max: f64,
    closure_bvh: Bvh,
    surface_bvh: Bvh,
    vertex_keys: Vec<f64>,
}

/// How the band condition applies on a boundary loop.
#[derive(Clone, Copy, PartialEq)]
enum LoopMode {
    /// Motion lies in the loop plane: conormal condition, planar disk region.
    InPlane,
    /// Motion is normal to the loop plane: no band condition.
    Transverse,
    /// Otherwise the surface normal decides.
    Oblique,
}

impl SweepContext {
    pub fn new(mesh: &TriMesh, config: &SweepConfig) -> Result<Self> {
        config.validate()?;
        if mesh.vertices.is_empty() || mesh.faces.is_empty() {
            return Err(contract("empty mesh"));
        }
        let origin = Vec3::new(0.0, 0.0, config.origin_shift);
        let scale = mesh.bounding_diagonal();
        let eps_touch = config.eps_touch.unwrap_or(1e-3 * scale);
        let normals = mesh.vertex_normals();
        let closure = mesh.closure()?;
        if !closure.mesh.is_watertight() {
            return Err(Error::OpenSurface("capped surface is not watertight".into()));
        }
        let closure_bvh = Bvh::build(&closure.mesh.vertices, &closure.mesh.faces);
        let surface_bvh = Bvh::build(&mesh.vertices, &mesh.faces);

        let kind = config.kind;
        let key = |x: &Vec3| match kind {
            SweepKind::Spherical => (x - origin).norm(),
            SweepKind::Planar { direction } => x.dot(&direction),
        };
        let outward = |x: &Vec3| match kind {
            SweepKind::Spherical => (x - origin).normalize(),
            SweepKind::Planar { direction } => direction,
        };
        let vertex_keys: Vec<f64> = mesh.vertices.iter().map(key).collect();
        if matches!(kind, SweepKind::Spherical) && vertex_keys.iter().any(|&k| k <= 1e-12 * scale) {
            return Err(Error::Domain("the surface passes through the reflection center".into()));
        }
        let key_min = vertex_keys.iter().copied().fold(f64::INFINITY, f64::min);
        let key_max = vertex_keys.iter().copied().fold(f64::NEG_INFINITY, f64::max);

        // Boundary bookkeeping: loop index and position for every boundary vertex.
        let mut on_loop: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut modes = Vec::new();
        for (li, (lp, _)) in closure.loops.iter().enumerate() {
            for (k, &i) in lp.indices.iter().enumerate() {
                on_loop.insert(i, (li, k));
            }
            // The sweep direction at the loop centroid decides the mode; for
            // spherical sweeps the loop planes pass through the origin.
            let d = outward(&lp.centroid);
            let c = d.dot(&lp.normal).abs();
            let through_origin = matches!(kind, SweepKind::Spherical)
                && (origin - lp.centroid).dot(&lp.normal).abs() <= 1e-9 * scale;
            modes.push(if through_origin || c < 1e-9 {
                LoopMode::InPlane
            } else if c > 1.0 - 1e-9 {
                LoopMode::Transverse
            } else {
                LoopMode::Oblique
            });
        }
        let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); mesh.vertices.len()];
        for (f, tri) in closure.mesh.faces.iter().enumerate() {
            for &i in tri {
                vertex_faces[i].push(f);
            }
        }

        // Central vector: the quantity whose dot with the outward direction decides NT3/NT4.
        let central_vec = |i: usize, boundary_side: bool| -> Option<Vec3> {
            match on_loop.get(&i) {
                Some(&(li, k)) if boundary_side => match modes[li] {
                    LoopMode::InPlane => Some(closure.loops[li].0.inward_normal(k)),
                    LoopMode::Transverse => None,
                    LoopMode::Oblique => Some(normals[i]),
                },
                _ => Some(normals[i]),
            }
        };

        struct Proto {
            source: SampleSource,
            position: Vec3,
            normal: Vec3,
            cvec: Option<Vec3>,
            lp: Option<(usize, Vec<usize>)>,
            skip: Vec<usize>,
        }
        let mut protos = Vec::new();
        for (i, x) in mesh.vertices.iter().enumerate() {
            let lp = on_loop.get(&i).map(|&(li, k)| {
                let n = closure.loops[li].0.indices.len();
                (li, vec![(k + n - 1) % n, k])
            });
            protos.push(Proto {
                source: SampleSource::Vertex(i),
                position: *x,
                normal: normals[i],
                cvec: central_vec(i, true),
                lp,
                skip: vertex_faces[i].clone(),
            });
        }
        // Zero crossings of the centrality function along mesh edges.
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &mesh.faces {
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                *edge_count.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        let mut edges: Vec<_> = edge_count.into_iter().collect();
        edges.sort_unstable();
        let eps_nt = 1e-12;
        for ((a, b), count) in edges {
            let boundary_edge = count == 1;
            let (Some(ca), Some(cb)) = (central_vec(a, boundary_edge), central_vec(b, boundary_edge)) else {
                continue;
            };
            let (xa, xb) = (mesh.vertices[a], mesh.vertices[b]);
            let (va, vb) = (outward(&xa).dot(&ca), outward(&xb).dot(&cb));
            let crosses = (va < -eps_nt && vb > eps_nt) || (va > eps_nt && vb < -eps_nt);
            if !crosses {
                continue;
            }
            let t = va / (va - vb);
            let position = xa + (xb - xa) * t;
            let normal = (normals[a] * (1.0 - t) + normals[b] * t).normalize();
            let cvec = (ca * (1.0 - t) + cb * t).normalize();
            let lp = if boundary_edge {
                match (on_loop.get(&a), on_loop.get(&b)) {
                    (Some(&(la, ka)), Some(&(lb, kb))) if la == lb => {
                        let n = closure.loops[la].0.indices.len();
                        let e = if (ka + 1) % n == kb { ka } else { kb };
                        Some((la, vec![e]))
                    }
                    _ => None,
                }
            } else {
                None
            };
            let skip: Vec<usize> = vertex_faces[a].iter().filter(|f| vertex_faces[b].contains(f)).copied().collect();
            protos.push(Proto { source: SampleSource::Edge(a, b, t), position, normal, cvec: Some(cvec), lp, skip });
        }

        let lmax_for = |k: f64| match kind {
            SweepKind::Spherical => k,
            SweepKind::Planar { .. } => 2.0 * (k - key_min) + 2.0 * eps_touch,
        };
        let solid = Solid { bvh: &closure_bvh };
        let samples: Vec<Sample> = protos
            .into_par_iter()
            .map(|p| {
                let k = key(&p.position);
                let dir = outward(&p.position);
                let d = -dir;
                let lmax = lmax_for(k);
                let in_plane = p.lp.as_ref().map(|(li, _)| modes[*li] == LoopMode::InPlane).unwrap_or(false);
                let (t_exit, t_out) = match (&p.lp, in_plane) {
                    (Some((li, skip)), true) => {
                        let disk = Disk { lp: &closure.loops[*li].0 };
                        travel(&disk, &p.position, &d, skip, eps_touch, lmax)
                    }
                    _ => travel(&solid, &p.position, &d, &p.skip, eps_touch, lmax),
                };
                Sample {
                    source: p.source,
                    position: p.position,
                    normal: p.normal,
                    boundary: p.lp.is_some(),
                    key: k,
                    central: p.cvec.map(|c| dir.dot(&c)),
                    t_exit,
                    t_out,
                }
            })
            .collect();

        Ok(Self {
            kind,
            origin,
            mesh: mesh.clone(),
            normals,
            closure,
            samples,
            eps_touch,
            eps_angle: config.eps_angle,
            scale,
            key_min,
            key_max,
            closure_bvh,
            surface_bvh,
            vertex_keys,
        })
    }

    /// Length of the segment from `X` to its reflection at parameter `p`.
    fn required(&self, key: f64, p: f64) -> f64 {
        match self.kind {
            SweepKind::Spherical => key - p * p / key,
            SweepKind::Planar { .. } => 2.0 * (key - p),
        }
    }

    fn in_band(&self, key: f64, p: f64) -> bool {
        key >= p && key <= p + self.eps_touch
    }

    fn fails(&self, s: &Sample, p: f64) -> bool {
        if s.key < p {
            return false;
        }
        if self.in_band(s.key, p) {
            return s.central.map(|c| c >= -1e-12).unwrap_or(false);
        }
        self.required(s.key, p) > s.t_out
    }

    pub fn all_pass(&self, p: f64) -> bool {
        !self.samples.par_iter().any(|s| self.fails(s, p))
    }

    pub fn reflect_point(&self, x: &Vec3, p: f64) -> Result<Vec3> {
        match self.kind {
            SweepKind::Spherical => invert_point(x, p, &self.origin),
            SweepKind::Planar { direction } => Ok(x - direction * (2.0 * (x.dot(&direction) - p))),
        }
    }

    pub fn reflect_normal(&self, x: &Vec3, n: &Vec3) -> Vec3 {
        match self.kind {
            SweepKind::Spherical => invert_normal(x, n, &self.origin),
            SweepKind::Planar { direction } => n - direction * (2.0 * n.dot(&direction)),
        }
    }

    /// Tag every sample with key at least `p`.
    pub fn classify_points(&self, p: f64) -> Result<Vec<PointClass>> {
        self.samples
            .par_iter()
            .enumerate()
            .filter(|(_, s)| s.key >= p)
            .map(|(i, s)| self.classify(i, s, p))
            .collect()
    }

    fn classify(&self, i: usize, s: &Sample, p: f64) -> Result<PointClass> {
        let base = PointClass {
            sample: i,
            tag: Tag::NT1,
            ambiguous: false,
            confirmed: false,
            required: None,
            available: s.t_out,
            central: s.central,
        };
        if self.in_band(s.key, p) {
            let pass = s.central.map(|c| c < -1e-12).unwrap_or(true);
            let tag = match (s.boundary, pass) {
                (false, true) => Tag::NT3,
                (true, true) => Tag::NT4,
                (false, false) => Tag::T3,
                (true, false) => Tag::T4,
            };
            let confirmed = !pass && s.central.map(|c| c.abs() <= self.eps_angle.sin()).unwrap_or(false);
            return Ok(PointClass { tag, confirmed, ..base });
        }
        let need = self.required(s.key, p);
        let pass = need <= s.t_out;
        let tag = match (s.boundary, pass) {
            (false, true) => Tag::NT1,
            (true, true) => Tag::NT2,
            (false, false) => Tag::T1,
            (true, false) => Tag::T2,
        };
        let confirmed = !pass && self.touch(s, p)?.1;
        Ok(PointClass { tag, ambiguous: pass && need > s.t_exit, confirmed, required: Some(need), ..base })
    }

    /// Distance from the reflected sample to the unreflected part, and whether
    /// the reflected normal is aligned with the surface there.
    fn touch(&self, s: &Sample, p: f64) -> Result<(f64, bool)> {
        let xr = self.reflect_point(&s.position, p)?;
        let nr = self.reflect_normal(&s.position, &s.normal);
        let keys = &self.vertex_keys;
        let faces = &self.mesh.faces;
        let Some(c) = self.surface_bvh.closest_point_filtered(&xr, |f| faces[f].iter().any(|&v| keys[v] < p)) else {
            return Ok((f64::INFINITY, false));
        };
        let [a, b, cc] = faces[c.face];
        let n = (self.normals[a] * c.weights[0] + self.normals[b] * c.weights[1] + self.normals[cc] * c.weights[2])
            .normalize();
        let aligned = nr.cross(&n).norm() <= self.eps_angle.sin();
        Ok((c.distance, c.distance < self.eps_touch && aligned))
    }

    /// Symmetric max distance between the reflected part beyond `p` and the part before it.
    pub fn coincidence_residual(&self, p: f64) -> Result<f64> {
        let keys = &self.vertex_keys;
        let faces = &self.mesh.faces;
        let minus: Vec<[usize; 3]> = faces.iter().filter(|f| f.iter().any(|&v| keys[v] >= p)).copied().collect();
        let plus: Vec<[usize; 3]> = faces.iter().filter(|f| f.iter().any(|&v| keys[v] <= p)).copied().collect();
        if minus.is_empty() || plus.is_empty() {
            return Ok(f64::INFINITY);
        }
        let reflected: Vec<Vec3> = self
            .mesh
            .vertices
            .iter()
            .zip(keys)
            .map(|(x, &k)| if k >= p || matches!(self.kind, SweepKind::Planar { .. }) { self.reflect_point(x, p) } else { Ok(*x) })
            .collect::<Result<_>>()?;
        let plus_bvh = Bvh::build(&self.mesh.vertices, &plus);
        let minus_bvh = Bvh::build(&reflected, &minus);
        let d1 = (0..keys.len())
            .into_par_iter()
            .filter(|&i| keys[i] > p)
            .map(|i| plus_bvh.closest_point(&reflected[i]).map(|c| c.distance).unwrap_or(f64::INFINITY))
            .reduce(|| 0.0, f64::max);
        let d2 = (0..keys.len())
            .into_par_iter()
            .filter(|&i| keys[i] < p)
            .map(|i| minus_bvh.closest_point(&self.mesh.vertices[i]).map(|c| c.distance).unwrap_or(f64::INFINITY))
            .reduce(|| 0.0, f64::max);
        Ok(d1.max(d2))
    }

    /// Oracle for the segment test: membership of `delta_samples` evenly spaced
    /// points of the segment from sample `i` to its reflection (endpoint included)
    /// in the drop region thickened by `eps_touch`.
    pub fn sampled_segment_membership(&self, i: usize, p: f64, delta_samples: usize) -> Result<bool> {
        let s = &self.samples[i];
        let xr = self.reflect_point(&s.position, p)?;
        let ok = |q: Vec3| {
            self.closure_bvh.closest_point(&q).map(|c| c.distance <= self.eps_touch).unwrap_or(false)
                || self.closure_bvh.contains(&q)
        };
        Ok((1..=delta_samples).all(|k| ok(s.position + (xr - s.position) * (k as f64 / delta_samples as f64))))
    }

    /// Scheduled sweep values, decreasing from `key_max`.
    fn schedule(&self, config: &SweepConfig) -> Vec<f64> {
        let n = config.steps;
        match self.kind {
            SweepKind::Spherical => {
                (0..=n).map(|k| self.key_max * config.rho_min_ratio.powf(k as f64 / n as f64)).collect()
            }
            SweepKind::Planar { .. } => {
                let span = self.key_max - self.key_min;
                (0..=n).map(|k| self.key_max - span * k as f64 / n as f64).collect()
            }
        }
    }
}

/// Decrease the sweep parameter from `rho0` until some point fails its NT
/// condition, then bisect the failure and test for symmetry.
pub fn run_sweep(mesh: &TriMesh, config: &SweepConfig) -> Result<SweepReport> {
    let ctx = SweepContext::new(mesh, config)?;
    sweep_with(&ctx, config)
}

pub fn sweep_with(ctx: &SweepContext, config: &SweepConfig) -> Result<SweepReport> {
    let schedule = ctx.schedule(config);
    let verdicts: Vec<bool> = schedule.iter().map(|&p| ctx.all_pass(p)).collect();
    let first_fail = verdicts
        .iter()
        .position(|&ok| !ok)
        .ok_or(Error::NoTouching { rho_min: *schedule.last().unwrap() })?;
    let monotone_violations = verdicts[first_fail..].iter().filter(|&&ok| ok).count();
    let span = match ctx.kind {
        SweepKind::Spherical => ctx.key_max,
        SweepKind::Planar { .. } => ctx.key_max - ctx.key_min,
    };
    let (mut lo, mut hi) = if first_fail == 0 {
        (schedule[0], schedule[0])
    } else {
        (schedule[first_fail], schedule[first_fail - 1])
    };
    while hi - lo > config.bracket_ratio * span {
        let mid = 0.5 * (lo + hi);
        if ctx.all_pass(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let at_pass = ctx.classify_points(hi)?;
    let at_fail = ctx.classify_points(lo)?;
    let mut touching = Vec::new();
    let mut types = HashSet::new();
    for c in at_fail.iter().filter(|c| c.tag.is_touching()) {
        types.insert(c.tag);
        let s = &ctx.samples[c.sample];
        let (distance, reflected) = match c.tag {
            Tag::T3 | Tag::T4 => (s.central.unwrap_or(0.0).abs(), s.position),
            _ => (ctx.touch(s, lo)?.0, ctx.reflect_point(&s.position, lo)?),
        };
        touching.push(TouchingEvent { tag: c.tag, position: s.position, reflected, distance, confirmed: c.confirmed });
    }
    let mut touching_types: Vec<Tag> = types.into_iter().collect();
    touching_types.sort();
    touching.sort_by(|a, b| b.confirmed.cmp(&a.confirmed).then(a.distance.total_cmp(&b.distance)));
    touching.truncate(64);

    let coincidence_residual = ctx.coincidence_residual(hi)?;
    let coincidence_threshold = 3.0 * ctx.eps_touch;
    let (boundedness, centrality) = match ctx.kind {
        SweepKind::Spherical => {
            let h = match config.mean_curvature {
                Some(h) => h,
                None => estimate_mean_curvature(&ctx.mesh)?,
            };
            let b = boundedness_audit(&ctx.mesh, &ctx.origin, (hi, ctx.key_max), h, config.audit_samples)?;
            let c = centrality_audit(&ctx.mesh, &ctx.origin, hi, 1e-6 * ctx.scale)?;
            (Some(b), Some(c))
        }
        SweepKind::Planar { .. } => (None, None),
    };
    Ok(SweepReport {
        kind: ctx.kind,
        origin: ctx.origin,
        rho0: ctx.key_max,
        rho1: hi,
        bracket: [lo, hi],
        eps_touch: ctx.eps_touch,
        eps_angle: ctx.eps_angle,
        samples: ctx.samples.len(),
        counts_at_rho1: TagCounts::from_classes(&at_pass),
        counts_at_failure: TagCounts::from_classes(&at_fail),
        touching_types,
        touching,
        monotone_violations,
        coincidence_residual,
        coincidence_threshold,
        symmetric: coincidence_residual < coincidence_threshold,
        boundedness,
        centrality,
    })
}

/// Median discrete mean curvature over reliable interior vertices.
pub fn estimate_mean_curvature(mesh: &TriMesh) -> Result<f64> {
    let dc = discrete_mean_curvature(mesh)?;
    let boundary = mesh.boundary_flags()?;
    let mut v: Vec<f64> = dc
        .values
        .iter()
        .zip(&dc.unreliable)
        .zip(&boundary)
        .filter(|((h, bad), b)| !**bad && !**b && h.is_finite())
        .map(|((h, _), _)| *h)
        .collect();
    if v.is_empty() {
        return Err(Error::NoInteriorSample);
    }
    v.sort_by(f64::total_cmp);
    Ok(v[v.len() / 2])
}

fn boundary_loops(mesh: &TriMesh) -> Result<Vec<PlanarLoop>> {
    let topo = mesh.topology()?;
    let scale = mesh.bounding_diagonal();
    topo.boundary_loops.iter().map(|lp| PlanarLoop::fit(&mesh.vertices, lp, scale)).collect()
}

/// Evaluates `H_hat(X, rho) - H` for `samples` radii evenly spaced in
/// `rho_range` over all vertices with `|X - origin| >= rho`.
pub fn boundedness_audit(
    mesh: &TriMesh,
    origin: &Vec3,
    rho_range: (f64, f64),
    h: f64,
    samples: usize,
) -> Result<BoundednessAudit> {
    let (a, b) = rho_range;
    if !(a > 0.0 && b >= a && samples >= 1) {
        return Err(contract(format!("invalid radius range [{a}, {b}]")));
    }
    let normals = mesh.vertex_normals();
    let boundary = mesh.boundary_flags()?;
    let rel: Vec<Vec3> = mesh.vertices.iter().map(|x| x - origin).collect();
    let radii: Vec<f64> = rel.iter().map(|x| x.norm()).collect();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); rel.len()];
    for f in &mesh.faces {
        for e in 0..3 {
            nbrs[f[e]].push(f[(e + 1) % 3]);
            nbrs[f[(e + 1) % 3]].push(f[e]);
        }
    }
    let rho_samples: Vec<f64> = if samples == 1 {
        vec![a]
    } else {
        (0..samples).map(|k| a + (b - a) * k as f64 / (samples - 1) as f64).collect()
    };
    let mut out = BoundednessAudit {
        mean_curvature: h,
        max_excess: f64::NEG_INFINITY,
        argmax_vertex: 0,
        argmax_rho: a,
        rho_samples: rho_samples.clone(),
        per_rho_maximizer_on_boundary: Vec::new(),
        maximizer_on_boundary: true,
    };
    for &rho in &rho_samples {
        let mut best = (f64::NEG_INFINITY, 0usize);
        let mut best_edge = f64::NEG_INFINITY;
        for i in 0..rel.len() {
            if radii[i] < rho {
                continue;
            }
            let hh = reflected_mean_curvature(&rel[i], &normals[i], h, rho)?;
            if hh > best.0 {
                best = (hh, i);
            }
            let on_edge = boundary[i] || nbrs[i].iter().any(|&j| radii[j] < rho);
            if on_edge {
                best_edge = best_edge.max(hh);
            }
        }
        if best.0 == f64::NEG_INFINITY {
            continue;
        }
        let tol = 1e-9 * (h.abs() + 1.0 / rho);
        let on = best_edge >= best.0 - tol;
        out.per_rho_maximizer_on_boundary.push(on);
        out.maximizer_on_boundary &= on;
        if best.0 - h > out.max_excess {
            out.max_excess = best.0 - h;
            out.argmax_vertex = best.1;
            out.argmax_rho = rho;
        }
    }
    Ok(out)
}

/// Sign checks on `X . N` and `X . n` beyond `rho1`, and on `N . n` along the boundary.
pub fn centrality_audit(mesh: &TriMesh, origin: &Vec3, rho1: f64, tol: f64) -> Result<CentralityAudit> {
    let normals = mesh.vertex_normals();
    let loops = boundary_loops(mesh)?;
    let centroid = mesh.vertices.iter().sum::<Vec3>() / mesh.vertices.len() as f64;
    let mut conormal: HashMap<usize, (Vec3, Vec3)> = HashMap::new();
    for lp in &loops {
        let n_plane = if (centroid - lp.centroid).dot(&lp.normal) >= 0.0 { lp.normal } else { -lp.normal };
        for (k, &i) in lp.indices.iter().enumerate() {
            conormal.insert(i, (lp.inward_normal(k), n_plane));
        }
    }
    let mut out = CentralityAudit {
        tolerance: tol,
        max_x_dot_normal: f64::NEG_INFINITY,
        max_x_dot_conormal: f64::NEG_INFINITY,
        conormal_violations: 0,
        equality_violations: 0,
        min_normal_dot_conormal: f64::INFINITY,
        conormal_equality_violations: 0,
    };
    let angle_tol = 1e-3;
    for (i, x) in mesh.vertices.iter().enumerate() {
        let xr = x - origin;
        let r = xr.norm();
        let n = normals[i];
        let xn = xr.dot(&n);
        if let Some(&(cn, n_plane)) = conormal.get(&i) {
            let gamma = (-n.dot(&n_plane)).clamp(-1.0, 1.0).acos();
            let proper = gamma > angle_tol && gamma < std::f64::consts::PI - angle_tol;
            let ndn = n.dot(&cn);
            out.min_normal_dot_conormal = out.min_normal_dot_conormal.min(ndn);
            if ndn.abs() < 1e-6 && proper {
                out.conormal_equality_violations += 1;
            }
            if r >= rho1 {
                let xc = xr.dot(&cn);
                out.max_x_dot_conormal = out.max_x_dot_conormal.max(xc);
                out.max_x_dot_normal = out.max_x_dot_normal.max(xn);
                if xn.abs() < tol && proper && xc.abs() >= tol {
                    out.conormal_violations += 1;
                }
            }
        } else if r >= rho1 {
            out.max_x_dot_normal = out.max_x_dot_normal.max(xn);
            if xn.abs() < tol && (r - rho1).abs() >= tol {
                out.equality_violations += 1;
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCurve {
    pub points: Vec<Vec3>,
    /// Wedge faces at the first and last point.
    pub faces: [WedgeFace; 2],
    /// Curvature of the least-squares circle through the points.
    pub curvature: f64,
    /// RMS distance of the points from that circle.
    pub fit_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    /// `Sigma = { x3 = sigma_offset }`.
    pub sigma_offset: f64,
    pub sigma_residual: f64,
    pub sigma_symmetric: bool,
    /// Offset of the symmetry plane found by sweeping across the bisector plane.
    pub bisector_offset: f64,
    /// Angle seen from the vertex between that plane and the bisector plane.
    pub bisector_angle: f64,
    pub bisector_residual: f64,
    pub bisector_symmetric: bool,
    pub curves: Vec<TraceCurve>,
    /// Index of the curve farther from the vertex.
    pub outer: usize,
    /// Endpoints of the outer curve on the first and second face.
    pub endpoints: [Vec3; 2],
    /// Contact angles measured in `Sigma` at those endpoints.
    pub measured_gamma: [f64; 2],
    /// Angle of the chord triangle (vertex, a, a') at a'.
    pub chord_angle: f64,
    /// `gamma1 - (alpha + phi)` and `gamma2 - (pi - phi)`.
    pub chord_residuals: [f64; 2],
    /// `gamma1 + gamma2 - pi - alpha` from the measured angles.
    pub angle_inequality_residual: f64,
    /// Endpoints on one face coincide.
    pub degenerate: bool,
}

/// Kasa least-squares circle: center, radius, RMS residual.
fn fit_circle(pts: &[[f64; 2]]) -> Option<([f64; 2], f64, f64)> {
    if pts.len() < 3 {
        return None;
    }
    let m = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => pts[i][0],
        1 => pts[i][1],
        _ => 1.0,
    });
    let rhs = DVector::from_fn(pts.len(), |i, _| -(pts[i][0] * pts[i][0] + pts[i][1] * pts[i][1]));
    let sol = m.svd(true, true).solve(&rhs, 1e-14).ok()?;
    let c = [-sol[0] / 2.0, -sol[1] / 2.0];
    let r2 = c[0] * c[0] + c[1] * c[1] - sol[2];
    if !(r2 > 0.0) {
        return None;
    }
    let r = r2.sqrt();
    let rms = (pts.iter().map(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    Some((c, r, rms))
}

fn angle_between(a: [f64; 2], b: [f64; 2]) -> f64 {
    let cross = a[0] * b[1] - a[1] * b[0];
    let dot = a[0] * b[0] + a[1] * b[1];
    cross.abs().atan2(dot)
}

/// Contact angle at the first point of `pts` against the line toward the vertex
/// at the 2D origin, from a circle fitted near that end.
fn end_angle(pts: &[[f64; 2]]) -> Result<f64> {
    let m = pts.len().min((pts.len() / 4).max(5));
    let (c, _, _) = fit_circle(&pts[..m]).ok_or_else(|| Error::TraceExtraction("degenerate end of trace".into()))?;
    let a = pts[0];
    let radial = [a[0] - c[0], a[1] - c[1]];
    let mut t = [-radial[1], radial[0]];
    let next = [pts[1][0] - a[0], pts[1][1] - a[1]];
    if t[0] * next[0] + t[1] * next[1] < 0.0 {
        t = [-t[0], -t[1]];
    }
    Ok(angle_between([-a[0], -a[1]], t))
}

/// Cross-section of the surface by the plane `x3 = offset`, chained into open polylines.
fn slice(mesh: &TriMesh, offset: f64, scale: f64) -> Result<Vec<Vec<Vec3>>> {
    let s: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|x| {
            let v = x.z - offset;
            if v.abs() < 1e-12 * scale {
                1e-12 * scale
            } else {
                v
            }
        })
        .collect();
    let key = |a: usize, b: usize| (a.min(b), a.max(b));
    let mut adj: HashMap<(usize, usize), Vec<(usize, usize)>> = HashMap::new();
    for f in &mesh.faces {
        let mut hits = Vec::new();
        for e in 0..3 {
            let (a, b) = (f[e], f[(e + 1) % 3]);
            if (s[a] > 0.0) != (s[b] > 0.0) {
                hits.push(key(a, b));
            }
        }
        if hits.len() == 2 {
            adj.entry(hits[0]).or_default().push(hits[1]);
            adj.entry(hits[1]).or_default().push(hits[0]);
        }
    }
    let point = |(a, b): (usize, usize)| {
        let t = s[a] / (s[a] - s[b]);
        mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * t
    };
    let mut ends: Vec<(usize, usize)> = adj.iter().filter(|(_, v)| v.len() == 1).map(|(k, _)| *k).collect();
    ends.sort_unstable();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut curves = Vec::new();
    for start in ends {
        if seen.contains(&start) {
            continue;
        }
        let mut chain = vec![start];
        seen.insert(start);
        let mut cur = start;
        while let Some(&next) = adj[&cur].iter().find(|e| !seen.contains(e)) {
            seen.insert(next);
            chain.push(next);
            cur = next;
        }
        curves.push(chain.into_iter().map(point).collect());
    }
    if seen.len() != adj.len() {
        return Err(Error::TraceExtraction("the cross-section contains a closed curve".into()));
    }
    Ok(curves)
}

/// Finds the symmetry plane normal to the vertex by a planar sweep, slices the
/// surface with it, and measures the two traces joining the wedge faces.
pub fn planar_sweep_and_trace(mesh: &TriMesh, wedge: &Wedge, config: &SweepConfig) -> Result<TraceReport> {
    let sigma = run_sweep(mesh, &SweepConfig { kind: SweepKind::Planar { direction: Vec3::z() }, ..*config })?;
    let bis = run_sweep(mesh, &SweepConfig { kind: SweepKind::Planar { direction: Vec3::y() }, ..*config })?;
    let scale = mesh.bounding_diagonal();
    let offset = sigma.rho1;
    let raw = slice(mesh, offset, scale)?;
    if raw.len() != 2 {
        return Err(Error::TraceExtraction(format!("expected two traces, found {}", raw.len())));
    }
    let face_of = |p: &Vec3| -> Result<WedgeFace> {
        let d1 = wedge.inward_normal(WedgeFace::First).dot(p).abs();
        let d2 = wedge.inward_normal(WedgeFace::Second).dot(p).abs();
        let tol = 1e-6 * scale;
        match (d1 <= tol, d2 <= tol) {
            (true, false) => Ok(WedgeFace::First),
            (false, true) => Ok(WedgeFace::Second),
            _ => Err(Error::TraceExtraction("trace endpoint is not on exactly one wedge face".into())),
        }
    };
    let mut curves = Vec::new();
    for mut pts in raw {
        let (mut f0, mut f1) = (face_of(&pts[0])?, face_of(pts.last().unwrap())?);
        if f0 == f1 {
            return Err(Error::TraceExtraction("a trace returns to the face it started on".into()));
        }
        if f0 == WedgeFace::Second {
            pts.reverse();
            std::mem::swap(&mut f0, &mut f1);
        }
        let flat: Vec<[f64; 2]> = pts.iter().map(|p| [p.x, p.y]).collect();
        let (_, r, rms) = fit_circle(&flat).ok_or_else(|| Error::TraceExtraction("trace is straight".into()))?;
        curves.push(TraceCurve { points: pts, faces: [f0, f1], curvature: 1.0 / r, fit_residual: rms });
    }
    let mid_dist = |c: &TraceCurve| {
        let p = c.points[c.points.len() / 2];
        p.x.hypot(p.y)
    };
    let outer = if mid_dist(&curves[0]) >= mid_dist(&curves[1]) { 0 } else { 1 };
    let oc = &curves[outer];
    let flat: Vec<[f64; 2]> = oc.points.iter().map(|p| [p.x, p.y]).collect();
    let rev: Vec<[f64; 2]> = flat.iter().rev().copied().collect();
    let g1 = end_angle(&flat)?;
    let g2 = end_angle(&rev)?;
    let (a, b) = (flat[0], *flat.last().unwrap());
    let phi = angle_between([-b[0], -b[1]], [a[0] - b[0], a[1] - b[1]]);
    let alpha = wedge.alpha();
    let pi = std::f64::consts::PI;
    let inner = &curves[1 - outer];
    let degenerate = (inner.points[0] - oc.points[0]).norm() < sigma.eps_touch
        || (inner.points.last().unwrap() - oc.points.last().unwrap()).norm() < sigma.eps_touch;
    let center_dist = mesh.vertices.iter().map(|x| x.x.hypot(x.y)).sum::<f64>() / mesh.vertices.len() as f64;
    Ok(TraceReport {
        sigma_offset: offset,
        sigma_residual: sigma.coincidence_residual,
        sigma_symmetric: sigma.symmetric,
        bisector_offset: bis.rho1,
        bisector_angle: bis.rho1.abs().atan2(center_dist),
        bisector_residual: bis.coincidence_residual,
        bisector_symmetric: bis.symmetric,
        endpoints: [oc.points[0], *oc.points.last().unwrap()],
        measured_gamma: [g1, g2],
        chord_angle: phi,
        chord_residuals: [g1 - (alpha + phi), g2 - (pi - phi)],
        angle_inequality_residual: g1 + g2 - pi - alpha,
        degenerate,
        outer,
        curves,
    })
}
