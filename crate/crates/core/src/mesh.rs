//! Indexed triangle meshes with per-vertex normals and boundary loops.
//!
//! Face winding convention: for a face `[a, b, c]` the right-handed normal
//! `(b - a) x (c - a)` points the same way as the vertex normals, i.e. into
//! the drop region.

use std::collections::HashMap;
use std::fmt::Write as _;

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    /// Unit normals into the drop; empty when unknown.
    pub normals: Vec<Vec3>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler_characteristic: i64,
    pub boundary_loops: Vec<Vec<usize>>,
    pub components: usize,
    pub orientable: bool,
    pub consistently_wound: bool,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, normals: Vec<Vec3>) -> Result<Self> {
        let mesh = Self { vertices, faces, normals };
        mesh.validate()?;
        Ok(mesh)
    }

    fn validate(&self) -> Result<()> {
        if !self.normals.is_empty() && self.normals.len() != self.vertices.len() {
            return Err(Error::Parse(format!(
                "{} normals for {} vertices",
                self.normals.len(),
                self.vertices.len()
            )));
        }
        for (k, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i >= self.vertices.len()) {
                return Err(Error::Parse(format!("face {k} references a missing vertex")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::Parse(format!("face {k} is degenerate")));
            }
        }
        Ok(())
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn bounding_diagonal(&self) -> f64 {
        if self.vertices.is_empty() {
            return 0.0;
        }
        let (lo, hi) = self.bounding_box();
        (hi - lo).norm()
    }

    pub fn translated(&self, offset: &Vec3) -> TriMesh {
        TriMesh {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            faces: self.faces.clone(),
            normals: self.normals.clone(),
        }
    }

    pub fn face_normal(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.faces[f];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        (b - a).cross(&(c - a))
    }

    /// Stored normals, or area-weighted face normals when none are stored.
    pub fn vertex_normals(&self) -> Vec<Vec3> {
        if !self.normals.is_empty() {
            return self.normals.clone();
        }
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for (k, f) in self.faces.iter().enumerate() {
            let n = self.face_normal(k);
            for &i in f {
                acc[i] += n;
            }
        }
        acc.into_iter()
            .map(|n| if n.norm() > 0.0 { n.normalize() } else { n })
            .collect()
    }

    /// Reverse every face's winding.
    pub fn flip_winding(&mut self) {
        for f in &mut self.faces {
            f.swap(1, 2);
        }
    }

    /// Directed edge -> face incidence; errors on an edge used by more than two faces.
    fn edge_faces(&self) -> Result<HashMap<(usize, usize), Vec<(usize, bool)>>> {
        let mut map: HashMap<(usize, usize), Vec<(usize, bool)>> = HashMap::new();
        for (k, f) in self.faces.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (f[e], f[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                map.entry(key).or_default().push((k, a < b));
            }
        }
        if let Some((e, _)) = map.iter().find(|(_, v)| v.len() > 2) {
            return Err(Error::NonManifold(format!("edge {e:?} is shared by more than two faces")));
        }
        Ok(map)
    }

    pub fn is_watertight(&self) -> bool {
        match self.edge_faces() {
            Ok(map) => !map.is_empty() && map.values().all(|v| v.len() == 2),
            Err(_) => false,
        }
    }

    pub fn topology(&self) -> Result<Topology> {
        let edges = self.edge_faces()?;
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                used[i] = true;
            }
        }
        let nv = used.iter().filter(|&&u| u).count();

        // Boundary edges, directed as they appear in their single face.
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (&(a, b), inc) in &edges {
            if inc.len() == 1 {
                let (from, to) = if inc[0].1 { (a, b) } else { (b, a) };
                if next.insert(from, to).is_some() {
                    return Err(Error::NonManifold(format!("vertex {from} has two outgoing boundary edges")));
                }
            }
        }
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut seen: HashMap<usize, ()> = HashMap::new();
        let mut loops = Vec::new();
        for s in starts {
            if seen.contains_key(&s) {
                continue;
            }
            let mut lp = vec![s];
            seen.insert(s, ());
            let mut cur = s;
            loop {
                let nx = *next
                    .get(&cur)
                    .ok_or_else(|| Error::NonManifold(format!("boundary chain breaks at vertex {cur}")))?;
                if nx == s {
                    break;
                }
                if seen.insert(nx, ()).is_some() {
                    return Err(Error::NonManifold(format!("boundary loops touch at vertex {nx}")));
                }
                lp.push(nx);
                cur = nx;
            }
            loops.push(lp);
        }

        // Face adjacency for components and orientability (propagate flips by BFS).
        let mut adj: Vec<Vec<(usize, bool)>> = vec![Vec::new(); self.faces.len()];
        let mut consistently_wound = true;
        for inc in edges.values() {
            if inc.len() == 2 {
                let ((f0, d0), (f1, d1)) = (inc[0], inc[1]);
                // Same traversal direction means the two faces disagree in winding.
                let same = d0 == d1;
                consistently_wound &= !same;
                adj[f0].push((f1, same));
                adj[f1].push((f0, same));
            }
        }
        let mut flip: Vec<Option<bool>> = vec![None; self.faces.len()];
        let mut components = 0;
        let mut orientable = true;
        for s in 0..self.faces.len() {
            if flip[s].is_some() {
                continue;
            }
            components += 1;
            flip[s] = Some(false);
            let mut stack = vec![s];
            while let Some(f) = stack.pop() {
                let ff = flip[f].unwrap();
                for &(g, same) in &adj[f] {
                    let want = ff ^ same;
                    match flip[g] {
                        None => {
                            flip[g] = Some(want);
                            stack.push(g);
                        }
                        Some(x) if x != want => orientable = false,
                        _ => {}
                    }
                }
            }
        }

        let ne = edges.len();
        Ok(Topology {
            vertices: nv,
            edges: ne,
            faces: self.faces.len(),
            euler_characteristic: nv as i64 - ne as i64 + self.faces.len() as i64,
            boundary_loops: loops,
            components,
            orientable,
            consistently_wound,
        })
    }

    pub fn boundary_flags(&self) -> Result<Vec<bool>> {
        let topo = self.topology()?;
        let mut flags = vec![false; self.vertices.len()];
        for lp in &topo.boundary_loops {
            for &i in lp {
                flags[i] = true;
            }
        }
        Ok(flags)
    }

    /// The surface together with a planar triangulated cap over every boundary loop.
    pub fn closure(&self) -> Result<Closure> {
        let topo = self.topology()?;
        let mut faces = self.faces.clone();
        let mut loops = Vec::with_capacity(topo.boundary_loops.len());
        let scale = self.bounding_diagonal().max(f64::MIN_POSITIVE);
        for lp in &topo.boundary_loops {
            let planar = PlanarLoop::fit(&self.vertices, lp, scale)?;
            let cap = planar.triangulate()?;
            let first_cap = faces.len();
            // Reversed so each boundary edge is traversed once in each direction.
            faces.extend(cap.iter().map(|t| [lp[t[0]], lp[t[2]], lp[t[1]]]));
            loops.push((planar, first_cap..faces.len()));
        }
        let surface_faces = self.faces.len();
        Ok(Closure {
            mesh: TriMesh { vertices: self.vertices.clone(), faces, normals: Vec::new() },
            surface_faces,
            loops,
        })
    }
}

/// A surface mesh closed by planar caps over its boundary loops.
#[derive(Debug, Clone)]
pub struct Closure {
    pub mesh: TriMesh,
    /// Faces `0..surface_faces` belong to the surface, the rest to caps.
    pub surface_faces: usize,
    pub loops: Vec<(PlanarLoop, std::ops::Range<usize>)>,
}

/// A boundary loop together with its best-fit plane and 2D coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarLoop {
    pub indices: Vec<usize>,
    pub centroid: Vec3,
    pub normal: Vec3,
    pub axes: (Vec3, Vec3),
    pub coords: Vec<[f64; 2]>,
    pub max_deviation: f64,
    /// Positive when the loop runs counter-clockwise in the `axes` frame.
    pub signed_area: f64,
}

impl PlanarLoop {
    pub fn fit(vertices: &[Vec3], indices: &[usize], scale: f64) -> Result<Self> {
        if indices.len() < 3 {
            return Err(Error::NotPlanar(format!("loop with {} vertices", indices.len())));
        }
        let pts: Vec<Vec3> = indices.iter().map(|&i| vertices[i]).collect();
        let centroid = pts.iter().sum::<Vec3>() / pts.len() as f64;
        let mut cov = Matrix3::zeros();
        for p in &pts {
            let d = p - centroid;
            cov += d * d.transpose();
        }
        let eig = SymmetricEigen::new(cov);
        let (imin, _) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let normal: Vec3 = eig.eigenvectors.column(imin).into_owned().normalize();
        let axes = crate::geom::orthonormal_pair(&normal);
        let max_deviation = pts.iter().map(|p| (p - centroid).dot(&normal).abs()).fold(0.0, f64::max);
        if max_deviation > 1e-6 * scale {
            return Err(Error::NotPlanar(format!(
                "loop deviates {max_deviation:e} from its best-fit plane"
            )));
        }
        let coords: Vec<[f64; 2]> =
            pts.iter().map(|p| [(p - centroid).dot(&axes.0), (p - centroid).dot(&axes.1)]).collect();
        let n = coords.len();
        let signed_area = (0..n)
            .map(|i| {
                let (a, b) = (coords[i], coords[(i + 1) % n]);
                a[0] * b[1] - a[1] * b[0]
            })
            .sum::<f64>()
            / 2.0;
        Ok(Self { indices: indices.to_vec(), centroid, normal, axes, coords, max_deviation, signed_area })
    }

    pub fn to_2d(&self, p: &Vec3) -> [f64; 2] {
        let d = p - self.centroid;
        [d.dot(&self.axes.0), d.dot(&self.axes.1)]
    }

    pub fn to_3d(&self, q: [f64; 2]) -> Vec3 {
        self.centroid + q[0] * self.axes.0 + q[1] * self.axes.1
    }

    /// Unit in-plane normal at loop vertex `k` pointing into the enclosed region.
    pub fn inward_normal(&self, k: usize) -> Vec3 {
        let n = self.coords.len();
        let (p, c, q) = (self.coords[(k + n - 1) % n], self.coords[k], self.coords[(k + 1) % n]);
        let sign = self.signed_area.signum();
        let edge_n = |a: [f64; 2], b: [f64; 2]| {
            let t = [b[0] - a[0], b[1] - a[1]];
            let l = t[0].hypot(t[1]);
            // Left normal of a counter-clockwise polygon points inside.
            [-t[1] / l * sign, t[0] / l * sign]
        };
        let (a, b) = (edge_n(p, c), edge_n(c, q));
        let m = [a[0] + b[0], a[1] + b[1]];
        let l = m[0].hypot(m[1]);
        (m[0] / l) * self.axes.0 + (m[1] / l) * self.axes.1
    }

    /// Ear-clipping triangulation; indices refer to positions within the loop.
    pub fn triangulate(&self) -> Result<Vec<[usize; 3]>> {
        let n = self.coords.len();
        let ccw = self.signed_area > 0.0;
        let pt = |i: usize| self.coords[i];
        let cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
            (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        };
        let mut idx: Vec<usize> = (0..n).collect();
        let mut tris = Vec::with_capacity(n - 2);
        let mut guard = 0;
        while idx.len() > 3 {
            let m = idx.len();
            let mut clipped = false;
            for k in 0..m {
                let (i0, i1, i2) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
                let c = cross(pt(i0), pt(i1), pt(i2));
                let convex = if ccw { c > 0.0 } else { c < 0.0 };
                if !convex {
                    continue;
                }
                let contains_other = idx.iter().any(|&j| {
                    if j == i0 || j == i1 || j == i2 {
                        return false;
                    }
                    let p = pt(j);
                    let s0 = cross(pt(i0), pt(i1), p);
                    let s1 = cross(pt(i1), pt(i2), p);
                    let s2 = cross(pt(i2), pt(i0), p);
                    if ccw {
                        s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0
                    } else {
                        s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0
                    }
                });
                if contains_other {
                    continue;
                }
                tris.push([i0, i1, i2]);
                idx.remove(k);
                clipped = true;
                break;
            }
            guard += 1;
            if !clipped || guard > 4 * n {
                return Err(Error::NonManifold("boundary loop is not a simple polygon".into()));
            }
        }
        tris.push([idx[0], idx[1], idx[2]]);
        Ok(tris)
    }
}

/// ASCII OBJ with 17 significant digits; boundary loops are listed in comments.
pub fn write_obj(mesh: &TriMesh) -> Result<String> {
    let mut s = String::new();
    let topo = mesh.topology()?;
    writeln!(s, "# wedgecmc mesh").unwrap();
    writeln!(s, "# vertices {} faces {}", mesh.vertices.len(), mesh.faces.len()).unwrap();
    for v in &mesh.vertices {
        writeln!(s, "v {:.16e} {:.16e} {:.16e}", v.x, v.y, v.z).unwrap();
    }
    for n in &mesh.normals {
        writeln!(s, "vn {:.16e} {:.16e} {:.16e}", n.x, n.y, n.z).unwrap();
    }
    let with_normals = !mesh.normals.is_empty();
    for f in &mesh.faces {
        if with_normals {
            writeln!(s, "f {0}//{0} {1}//{1} {2}//{2}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
        } else {
            writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
        }
    }
    for (k, lp) in topo.boundary_loops.iter().enumerate() {
        writeln!(s, "# boundary-loop {k} length {}", lp.len()).unwrap();
        for chunk in lp.chunks(16) {
            let line: Vec<String> = chunk.iter().map(|i| (i + 1).to_string()).collect();
            writeln!(s, "#   {}", line.join(" ")).unwrap();
        }
    }
    Ok(s)
}

pub fn read_obj(text: &str) -> Result<TriMesh> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    let parse3 = |it: &mut std::str::SplitWhitespace, line: usize| -> Result<Vec3> {
        let mut xs = [0.0; 3];
        for x in &mut xs {
            *x = it
                .next()
                .ok_or_else(|| Error::Parse(format!("line {line}: expected three coordinates")))?
                .parse()
                .map_err(|e| Error::Parse(format!("line {line}: {e}")))?;
        }
        Ok(Vec3::new(xs[0], xs[1], xs[2]))
    };
    for (ln, raw) in text.lines().enumerate() {
        let line = raw.trim();
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => vertices.push(parse3(&mut it, ln + 1)?),
            Some("vn") => normals.push(parse3(&mut it, ln + 1)?),
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|tok| {
                        tok.split('/')
                            .next()
                            .unwrap_or("")
                            .parse::<usize>()
                            .map_err(|e| Error::Parse(format!("line {}: {e}", ln + 1)))
                            .map(|i| i - 1)
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(Error::Parse(format!("line {}: only triangles are supported", ln + 1)));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces, normals)
}

/// Reference meshes.
pub mod fixtures {
    use super::*;

    /// Latitude-longitude sphere with inward normals and consistent winding.
    pub fn uv_sphere(radius: f64, n_lat: usize, n_lon: usize) -> TriMesh {
        let mut vertices = vec![Vec3::new(0.0, 0.0, -radius)];
        for i in 1..n_lat {
            let t = std::f64::consts::PI * i as f64 / n_lat as f64;
            for j in 0..n_lon {
                let p = 2.0 * std::f64::consts::PI * j as f64 / n_lon as f64;
                vertices.push(radius * Vec3::new(t.sin() * p.cos(), t.sin() * p.sin(), -t.cos()));
            }
        }
        vertices.push(Vec3::new(0.0, 0.0, radius));
        let ring = |i: usize, j: usize| 1 + (i - 1) * n_lon + (j % n_lon);
        let top = vertices.len() - 1;
        let mut faces = Vec::new();
        for j in 0..n_lon {
            faces.push([0, ring(1, j), ring(1, j + 1)]);
            faces.push([top, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
        }
        for i in 1..n_lat - 1 {
            for j in 0..n_lon {
                let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j), ring(i + 1, j + 1));
                faces.push([a, c, b]);
                faces.push([b, c, d]);
            }
        }
        let normals = vertices.iter().map(|v| -v.normalize()).collect();
        TriMesh { vertices, faces, normals }
    }

    /// Flat square grid in the plane z = 0, normal +z.
    pub fn square(n: usize, size: f64) -> TriMesh {
        let mut vertices = Vec::new();
        for i in 0..=n {
            for j in 0..=n {
                vertices.push(Vec3::new(size * i as f64 / n as f64, size * j as f64 / n as f64, 0.0));
            }
        }
        let id = |i: usize, j: usize| i * (n + 1) + j;
        let mut faces = Vec::new();
        for i in 0..n {
            for j in 0..n {
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let normals = vec![Vec3::z(); vertices.len()];
        TriMesh { vertices, faces, normals }
    }

    /// Open cylinder of the given radius along x3, inward normals.
    pub fn cylinder(radius: f64, height: f64, n_around: usize, n_up: usize) -> TriMesh {
        let mut vertices = Vec::new();
        let mut normals = Vec::new();
        for i in 0..=n_up {
            for j in 0..n_around {
                let p = 2.0 * std::f64::consts::PI * j as f64 / n_around as f64;
                vertices.push(Vec3::new(radius * p.cos(), radius * p.sin(), height * i as f64 / n_up as f64));
                normals.push(Vec3::new(-p.cos(), -p.sin(), 0.0));
            }
        }
        let id = |i: usize, j: usize| i * n_around + j % n_around;
        let mut faces = Vec::new();
        for i in 0..n_up {
            for j in 0..n_around {
                faces.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                faces.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            }
        }
        TriMesh { vertices, faces, normals }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn sphere_topology() {
        let m = uv_sphere(1.0, 12, 16);
        let t = m.topology().unwrap();
        assert_eq!(t.euler_characteristic, 2);
        assert!(t.boundary_loops.is_empty());
        assert!(t.orientable && t.consistently_wound);
        assert_eq!(t.components, 1);
        assert!(m.is_watertight());
        // Winding agrees with the inward normals.
        let f = m.face_normal(40);
        let [a, _, _] = m.faces[40];
        assert!(f.dot(&m.normals[a]) > 0.0);
    }

    #[test]
    fn disk_and_cylinder_topology() {
        let d = square(4, 1.0).topology().unwrap();
        assert_eq!((d.euler_characteristic, d.boundary_loops.len()), (1, 1));
        let c = cylinder(1.0, 1.0, 12, 3).topology().unwrap();
        assert_eq!((c.euler_characteristic, c.boundary_loops.len()), (0, 2));
    }

    #[test]
    fn cylinder_winding_matches_inward_normals() {
        let m = cylinder(1.0, 2.0, 16, 4);
        for k in 0..m.faces.len() {
            let n = m.face_normal(k);
            assert!(n.dot(&m.normals[m.faces[k][0]]) > 0.0);
        }
    }

    #[test]
    fn non_manifold_edge_is_rejected() {
        let vertices = vec![
            Vec3::zeros(),
            Vec3::x(),
            Vec3::y(),
            Vec3::z(),
            -Vec3::z(),
        ];
        let m = TriMesh::new(vertices, vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]], vec![]).unwrap();
        assert!(matches!(m.topology(), Err(Error::NonManifold(_))));
    }

    #[test]
    fn closure_of_cylinder_is_watertight() {
        let m = cylinder(1.0, 1.0, 24, 4);
        let c = m.closure().unwrap();
        assert!(c.mesh.is_watertight());
        let t = c.mesh.topology().unwrap();
        assert_eq!(t.euler_characteristic, 2);
        assert!(t.consistently_wound);
        assert_eq!(c.loops.len(), 2);
    }

    #[test]
    fn ear_clipping_handles_nonconvex_loops() {
        // An L-shaped hexagon.
        let pts = [(0.0, 0.0), (2.0, 0.0), (2.0, 1.0), (1.0, 1.0), (1.0, 2.0), (0.0, 2.0)];
        let vertices: Vec<Vec3> = pts.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
        let lp = PlanarLoop::fit(&vertices, &[0, 1, 2, 3, 4, 5], 3.0).unwrap();
        let tris = lp.triangulate().unwrap();
        assert_eq!(tris.len(), 4);
        let area: f64 = tris
            .iter()
            .map(|t| {
                let (a, b, c) = (lp.coords[t[0]], lp.coords[t[1]], lp.coords[t[2]]);
                ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() / 2.0
            })
            .sum();
        assert!((area - 3.0).abs() < 1e-12);
    }

    #[test]
    fn loop_inward_normal_points_inside() {
        let m = cylinder(2.0, 1.0, 32, 2);
        let topo = m.topology().unwrap();
        for lp in &topo.boundary_loops {
            let pl = PlanarLoop::fit(&m.vertices, lp, 4.0).unwrap();
            for k in 0..lp.len() {
                let v = m.vertices[lp[k]];
                let toward_axis = Vec3::new(-v.x, -v.y, 0.0).normalize();
                assert!(pl.inward_normal(k).dot(&toward_axis) > 0.999);
            }
        }
    }

    #[test]
    fn obj_round_trip_is_lossless() {
        let m = cylinder(1.0 / 3.0, std::f64::consts::PI, 10, 3);
        let text = write_obj(&m).unwrap();
        assert!(text.contains("# boundary-loop 1"));
        let back = read_obj(&text).unwrap();
        assert_eq!(back.faces, m.faces);
        for (a, b) in back.vertices.iter().zip(&m.vertices) {
            assert_eq!(a, b);
        }
        for (a, b) in back.normals.iter().zip(&m.normals) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn obj_rejects_bad_faces() {
        assert!(read_obj("v 0 0 0\nv 1 0 0\nf 1 2 3\n").is_err());
        assert!(read_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nf 1 2 3 4\n").is_err());
    }
}
