//! Axis-aligned bounding-volume hierarchy over triangles.

use crate::geom::Vec3;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    lo: Vec3,
    hi: Vec3,
}

impl Aabb {
    fn empty() -> Self {
        Self { lo: Vec3::repeat(f64::INFINITY), hi: Vec3::repeat(f64::NEG_INFINITY) }
    }

    fn grow(&mut self, p: &Vec3) {
        self.lo = self.lo.inf(p);
        self.hi = self.hi.sup(p);
    }

    fn merge(&self, o: &Aabb) -> Aabb {
        Aabb { lo: self.lo.inf(&o.lo), hi: self.hi.sup(&o.hi) }
    }

    fn distance_squared(&self, p: &Vec3) -> f64 {
        let d = (self.lo - p).sup(&(p - self.hi)).sup(&Vec3::zeros());
        d.norm_squared()
    }

    fn overlaps(&self, o: &Aabb, pad: f64) -> bool {
        (0..3).all(|k| self.lo[k] <= o.hi[k] + pad && o.lo[k] <= self.hi[k] + pad)
    }

    /// Slab test; returns the entry parameter when the ray meets the box within `[tmin, tmax]`.
    fn ray_entry(&self, o: &Vec3, inv_d: &Vec3, tmin: f64, tmax: f64) -> Option<f64> {
        let (mut t0, mut t1) = (tmin, tmax);
        for k in 0..3 {
            let a = (self.lo[k] - o[k]) * inv_d[k];
            let b = (self.hi[k] - o[k]) * inv_d[k];
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            // NaN from 0 * inf leaves the bound unchanged.
            if a > t0 {
                t0 = a;
            }
            if b < t1 {
                t1 = b;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, len: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub t: f64,
    pub face: usize,
    /// Barycentric coordinates of the hit with respect to vertices 1 and 2.
    pub u: f64,
    pub v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestPoint {
    pub distance: f64,
    pub face: usize,
    pub point: Vec3,
    /// Barycentric weights of `point` in the face.
    pub weights: [f64; 3],
}

#[derive(Debug, Clone)]
pub struct Bvh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

const LEAF_SIZE: usize = 4;

impl Bvh {
    pub fn build(vertices: &[Vec3], faces: &[[usize; 3]]) -> Self {
        let mut bvh = Bvh {
            vertices: vertices.to_vec(),
            faces: faces.to_vec(),
            order: (0..faces.len()).collect(),
            nodes: Vec::new(),
        };
        if !faces.is_empty() {
            let centroids: Vec<Vec3> = faces
                .iter()
                .map(|f| (vertices[f[0]] + vertices[f[1]] + vertices[f[2]]) / 3.0)
                .collect();
            bvh.build_node(&centroids, 0, faces.len());
        }
        bvh
    }

    fn face_bounds(&self, f: usize) -> Aabb {
        let mut b = Aabb::empty();
        for &i in &self.faces[f] {
            b.grow(&self.vertices[i]);
        }
        b
    }

    fn build_node(&mut self, centroids: &[Vec3], start: usize, len: usize) -> usize {
        let mut bounds = Aabb::empty();
        let mut cb = Aabb::empty();
        for &f in &self.order[start..start + len] {
            bounds = bounds.merge(&self.face_bounds(f));
            cb.grow(&centroids[f]);
        }
        let id = self.nodes.len();
        if len <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { bounds, start, len });
            return id;
        }
        let ext = cb.hi - cb.lo;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = len / 2;
        self.order[start..start + len]
            .select_nth_unstable_by(mid, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]));
        self.nodes.push(Node::Leaf { bounds, start, len });
        let left = self.build_node(centroids, start, mid);
        let right = self.build_node(centroids, start + mid, len - mid);
        self.nodes[id] = Node::Inner { bounds, left, right };
        id
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    /// Every ray hit with parameter in `(tmin, tmax)`, unsorted.
    pub fn ray_hits(&self, origin: &Vec3, dir: &Vec3, tmin: f64, tmax: f64) -> Vec<RayHit> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let inv = dir.map(|x| 1.0 / x);
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds().ray_entry(origin, &inv, tmin, tmax).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &f in &self.order[start..start + len] {
                        if let Some(h) = self.intersect(f, origin, dir) {
                            if h.t > tmin && h.t < tmax {
                                out.push(h);
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        out
    }

    /// Nearest hit in `(tmin, tmax)` among faces accepted by `keep`.
    pub fn first_hit(
        &self,
        origin: &Vec3,
        dir: &Vec3,
        tmin: f64,
        tmax: f64,
        keep: impl Fn(usize) -> bool,
    ) -> Option<RayHit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|x| 1.0 / x);
        let mut best: Option<RayHit> = None;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let limit = best.map(|b| b.t).unwrap_or(tmax);
            let node = &self.nodes[n];
            if node.bounds().ray_entry(origin, &inv, tmin, limit).is_none() {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &f in &self.order[start..start + len] {
                        if !keep(f) {
                            continue;
                        }
                        if let Some(h) = self.intersect(f, origin, dir) {
                            if h.t > tmin && h.t < limit && best.map(|b| h.t < b.t).unwrap_or(true) {
                                best = Some(h);
                            }
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    stack.push(left);
                    stack.push(right);
                }
            }
        }
        best
    }

    /// Moller-Trumbore intersection with face `f`, two-sided.
    fn intersect(&self, f: usize, o: &Vec3, d: &Vec3) -> Option<RayHit> {
        let [a, b, c] = self.faces[f];
        let (a, b, c) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        let e1 = b - a;
        let e2 = c - a;
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        let scale = e1.norm() * e2.norm() * d.norm();
        if det.abs() <= 1e-14 * scale {
            return None;
        }
        let inv = 1.0 / det;
        let s = o - a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            return None;
        }
        let q = s.cross(&e1);
        let v = d.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            return None;
        }
        Some(RayHit { t: e2.dot(&q) * inv, face: f, u, v })
    }

    /// Parity membership for a closed mesh. Rays that graze an edge are retried
    /// along other fixed directions.
    pub fn contains(&self, p: &Vec3) -> bool {
        const DIRS: [[f64; 3]; 4] = [
            [0.5773502691896258, 0.6173502691896258, 0.5345224838248488],
            [-0.3141592653589793, 0.8271828182845905, -0.4663234123],
            [0.7071067811865123, -0.1234567890123457, 0.6961524227066319],
            [-0.6180339887498949, -0.3819660112501051, 0.6871842709362768],
        ];
        let mut parity = false;
        for d in DIRS {
            let dir = Vec3::new(d[0], d[1], d[2]).normalize();
            let hits = self.ray_hits(p, &dir, 0.0, f64::INFINITY);
            let grazing = hits.iter().any(|h| {
                let w = 1.0 - h.u - h.v;
                h.u < 1e-9 || h.v < 1e-9 || w < 1e-9
            });
            parity = hits.len() % 2 == 1;
            if !grazing {
                break;
            }
        }
        parity
    }

    pub fn closest_point(&self, p: &Vec3) -> Option<ClosestPoint> {
        self.closest_point_filtered(p, |_| true)
    }

    pub fn closest_point_filtered(&self, p: &Vec3, keep: impl Fn(usize) -> bool) -> Option<ClosestPoint> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestPoint> = None;
        let mut best_d2 = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if node.bounds().distance_squared(p) >= best_d2 {
                continue;
            }
            match *node {
                Node::Leaf { start, len, .. } => {
                    for &f in &self.order[start..start + len] {
                        if !keep(f) {
                            continue;
                        }
                        let [a, b, c] = self.faces[f];
                        let (q, w) = closest_on_triangle(p, &self.vertices[a], &self.vertices[b], &self.vertices[c]);
                        let d2 = (q - p).norm_squared();
                        if d2 < best_d2 {
                            best_d2 = d2;
                            best = Some(ClosestPoint { distance: d2.sqrt(), face: f, point: q, weights: w });
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    // Visit the nearer child first.
                    let dl = self.nodes[left].bounds().distance_squared(p);
                    let dr = self.nodes[right].bounds().distance_squared(p);
                    if dl < dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }

    /// Face pairs whose padded bounding boxes overlap, each pair once with `a < b`.
    pub fn candidate_pairs(&self, pad: f64) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for f in 0..self.faces.len() {
            let fb = self.face_bounds(f);
            let mut stack = vec![0usize];
            while let Some(n) = stack.pop() {
                let node = &self.nodes[n];
                if !node.bounds().overlaps(&fb, pad) {
                    continue;
                }
                match *node {
                    Node::Leaf { start, len, .. } => {
                        for &g in &self.order[start..start + len] {
                            if g > f && self.face_bounds(g).overlaps(&fb, pad) {
                                out.push((f, g));
                            }
                        }
                    }
                    Node::Inner { left, right, .. } => {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        out
    }
}

/// Closest point on triangle `abc` to `p`, with barycentric weights.
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, [f64; 3]) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, [1.0, 0.0, 0.0]);
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, [0.0, 1.0, 0.0]);
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + v * ab, [1.0 - v, v, 0.0]);
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, [0.0, 0.0, 1.0]);
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + w * ac, [1.0 - w, 0.0, w]);
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + w * (c - b), [0.0, 1.0 - w, w]);
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, [1.0 - v - w, v, w])
}

/// Whether two triangles intersect (coplanar overlaps excluded), via edge-triangle crossings.
pub fn triangles_intersect(t: [&Vec3; 3], s: [&Vec3; 3]) -> bool {
    let edge_hits = |tri: [&Vec3; 3], other: [&Vec3; 3]| {
        (0..3).any(|k| {
            let (p, q) = (other[k], other[(k + 1) % 3]);
            segment_hits_triangle(p, q, tri)
        })
    };
    edge_hits(t, s) || edge_hits(s, t)
}

fn segment_hits_triangle(p: &Vec3, q: &Vec3, tri: [&Vec3; 3]) -> bool {
    let d = q - p;
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = d.cross(&e2);
    let det = e1.dot(&h);
    let scale = e1.norm() * e2.norm() * d.norm();
    if det.abs() <= 1e-12 * scale {
        return false;
    }
    let inv = 1.0 / det;
    let s = p - tri[0];
    let u = s.dot(&h) * inv;
    if !(0.0..=1.0).contains(&u) {
        return false;
    }
    let qv = s.cross(&e1);
    let v = d.dot(&qv) * inv;
    if v < 0.0 || u + v > 1.0 {
        return false;
    }
    let t = e2.dot(&qv) * inv;
    (0.0..=1.0).contains(&t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::fixtures::uv_sphere;

    #[test]
    fn sphere_membership_and_distance() {
        let m = uv_sphere(1.0, 24, 32);
        let bvh = Bvh::build(&m.vertices, &m.faces);
        assert!(bvh.contains(&Vec3::zeros()));
        assert!(bvh.contains(&Vec3::new(0.3, -0.2, 0.5)));
        assert!(!bvh.contains(&Vec3::new(2.0, 0.0, 0.0)));
        let c = bvh.closest_point(&Vec3::new(3.0, 0.0, 0.0)).unwrap();
        assert!((c.distance - 2.0).abs() < 1e-2);
        let w = c.weights;
        assert!((w[0] + w[1] + w[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closest_point_matches_brute_force() {
        let m = uv_sphere(1.3, 10, 14);
        let bvh = Bvh::build(&m.vertices, &m.faces);
        for k in 0..50 {
            let t = k as f64 * 0.37;
            let p = Vec3::new(t.sin() * 2.0, (1.3 * t).cos(), (0.7 * t).sin() * 0.5);
            let brute = m
                .faces
                .iter()
                .map(|f| {
                    let (q, _) = closest_on_triangle(&p, &m.vertices[f[0]], &m.vertices[f[1]], &m.vertices[f[2]]);
                    (q - p).norm()
                })
                .fold(f64::INFINITY, f64::min);
            assert!((bvh.closest_point(&p).unwrap().distance - brute).abs() < 1e-12);
        }
    }

    #[test]
    fn first_hit_is_nearest() {
        let m = uv_sphere(1.0, 16, 16);
        let bvh = Bvh::build(&m.vertices, &m.faces);
        let h = bvh.first_hit(&Vec3::new(-5.0, 0.01, 0.02), &Vec3::x(), 0.0, f64::INFINITY, |_| true).unwrap();
        assert!((h.t - 4.0).abs() < 0.05);
        assert_eq!(bvh.ray_hits(&Vec3::new(-5.0, 0.01, 0.02), &Vec3::x(), 0.0, f64::INFINITY).len(), 2);
    }

    #[test]
    fn triangle_pairs() {
        let a = [Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)];
        let crossing = [Vec3::new(0.2, 0.2, -1.0), Vec3::new(0.2, 0.2, 1.0), Vec3::new(0.3, 0.5, 0.5)];
        let apart = [Vec3::new(0.2, 0.2, 0.5), Vec3::new(0.4, 0.2, 1.0), Vec3::new(0.3, 0.5, 0.5)];
        fn r(t: &[Vec3; 3]) -> [&Vec3; 3] {
            [&t[0], &t[1], &t[2]]
        }
        assert!(triangles_intersect(r(&a), r(&crossing)));
        assert!(!triangles_intersect(r(&a), r(&apart)));
    }
}
