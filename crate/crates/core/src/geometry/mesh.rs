use std::collections::{HashMap, HashSet};
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use spade::{AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation};

use super::{edges, Domain, OuterBoundary};
use crate::error::{Error, Result};
use crate::linalg::Vec2;

const MIN_ANGLE_DEG: f64 = 20.0;
// Refinement runs slightly above the guaranteed bound so that projecting
// split vertices back onto circles cannot push an angle below it.
const REFINE_ANGLE_DEG: f64 = 21.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    Outer,
    Inner,
}

impl BoundaryTag {
    fn as_str(self) -> &'static str {
        match self {
            BoundaryTag::Outer => "outer",
            BoundaryTag::Inner => "inner",
        }
    }
}

/// Boundary edge oriented so that the domain lies on its left: the outer
/// boundary runs counterclockwise and the inner one clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub tag: BoundaryTag,
}

/// Conforming P1 triangulation of a ring domain. Triangles are
/// counterclockwise; areas and hat-function gradients are cached.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec2>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    h_max: f64,
    grading: f64,
    areas: Vec<f64>,
    basis: Vec<[Vec2; 3]>,
    vertex_tags: Vec<Option<BoundaryTag>>,
}

impl Mesh {
    /// Assembles a mesh from raw parts, reorienting clockwise triangles and
    /// checking conformity and boundary tagging.
    pub fn from_parts(
        vertices: Vec<Vec2>,
        mut triangles: Vec<[usize; 3]>,
        boundary_edges: Vec<BoundaryEdge>,
        h_max: f64,
        grading: f64,
    ) -> Result<Mesh> {
        let n = vertices.len();
        if vertices.iter().any(|v| !v.is_finite()) {
            return Err(Error::Mesh("non-finite vertex coordinates".into()));
        }
        for (k, t) in triangles.iter_mut().enumerate() {
            if t.iter().any(|&i| i >= n) || t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::Mesh(format!("triangle {k} has invalid vertex indices")));
            }
            let a = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
            if a == 0.0 {
                return Err(Error::Mesh(format!("triangle {k} is degenerate")));
            }
            if a < 0.0 {
                t.swap(1, 2);
            }
        }
        // Directed edge -> owning triangle; a conforming mesh uses each
        // directed edge at most once.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (k, t) in triangles.iter().enumerate() {
            for e in 0..3 {
                if directed.insert((t[e], t[(e + 1) % 3]), k).is_some() {
                    return Err(Error::Mesh(format!("edge ({}, {}) used twice with the same orientation", t[e], t[(e + 1) % 3])));
                }
            }
        }
        let mut open: HashSet<(usize, usize)> =
            directed.keys().filter(|(a, b)| !directed.contains_key(&(*b, *a))).copied().collect();
        let mut fixed = Vec::with_capacity(boundary_edges.len());
        for e in &boundary_edges {
            let (a, b) = if open.remove(&(e.a, e.b)) {
                (e.a, e.b)
            } else if open.remove(&(e.b, e.a)) {
                (e.b, e.a)
            } else {
                return Err(Error::Mesh(format!("tagged edge ({}, {}) is not a boundary edge", e.a, e.b)));
            };
            fixed.push(BoundaryEdge { a, b, tag: e.tag });
        }
        if let Some((a, b)) = open.iter().min() {
            return Err(Error::Mesh(format!("boundary edge ({a}, {b}) is untagged")));
        }
        let mut vertex_tags = vec![None; n];
        for e in &fixed {
            for v in [e.a, e.b] {
                match vertex_tags[v] {
                    Some(t) if t != e.tag => {
                        return Err(Error::Mesh(format!("vertex {v} lies on both boundary components")));
                    }
                    _ => vertex_tags[v] = Some(e.tag),
                }
            }
        }
        let mut mesh = Mesh {
            vertices,
            triangles,
            boundary_edges: fixed,
            h_max,
            grading,
            areas: Vec::new(),
            basis: Vec::new(),
            vertex_tags,
        };
        mesh.compute_geometry();
        Ok(mesh)
    }

    fn compute_geometry(&mut self) {
        self.areas.clear();
        self.basis.clear();
        for t in &self.triangles {
            let [a, b, c] = t.map(|i| self.vertices[i]);
            let twice = (b - a).cross(c - a);
            // ∇φ_i = perp(opposite edge)/(2·area), pointing into the triangle.
            let s = 1.0 / twice;
            self.basis.push([(c - b).perp() * s, (a - c).perp() * s, (b - a).perp() * s]);
            self.areas.push(0.5 * twice);
        }
    }

    pub fn vertices(&self) -> &[Vec2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn grading(&self) -> f64 {
        self.grading
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// Gradients of the three hat functions on triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> &[Vec2; 3] {
        &self.basis[t]
    }

    pub fn vertex_tag(&self, v: usize) -> Option<BoundaryTag> {
        self.vertex_tags[v]
    }

    pub fn centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        (a + b + c) * (1.0 / 3.0)
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Outer boundary vertices in counterclockwise order, without repeating
    /// the first.
    pub fn outer_loop(&self) -> Vec<usize> {
        self.boundary_loop(BoundaryTag::Outer)
    }

    pub fn inner_loop(&self) -> Vec<usize> {
        self.boundary_loop(BoundaryTag::Inner)
    }

    fn boundary_loop(&self, tag: BoundaryTag) -> Vec<usize> {
        let next: HashMap<usize, usize> =
            self.boundary_edges.iter().filter(|e| e.tag == tag).map(|e| (e.a, e.b)).collect();
        let Some(&start) = next.keys().min() else {
            return Vec::new();
        };
        let mut out = vec![start];
        let mut v = next[&start];
        while v != start && out.len() <= next.len() {
            out.push(v);
            v = next[&v];
        }
        out
    }

    /// Segments of the boundary component with the given tag.
    pub fn boundary_segments(&self, tag: BoundaryTag) -> Vec<(Vec2, Vec2)> {
        self.boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .map(|e| (self.vertices[e.a], self.vertices[e.b]))
            .collect()
    }

    /// Nearest-distance index over the outer boundary.
    pub fn outer_index(&self) -> super::SegmentIndex {
        super::SegmentIndex::new(self.boundary_segments(BoundaryTag::Outer))
    }

    /// Smallest interior angle over all triangles, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut best = 180.0_f64;
        for t in &self.triangles {
            let p = t.map(|i| self.vertices[i]);
            for k in 0..3 {
                let u = p[(k + 1) % 3] - p[k];
                let v = p[(k + 2) % 3] - p[k];
                best = best.min(u.cross(v).abs().atan2(u.dot(v)).to_degrees());
            }
        }
        best
    }

    /// Longest edge of the mesh.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |k| (t[k], t[(k + 1) % 3])))
            .map(|(a, b)| self.vertices[a].dist(self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Same connectivity with every vertex mapped by `f`; `f` must preserve
    /// orientation. Lengths `h_max` scale by `length_scale`.
    pub fn transformed(&self, f: impl Fn(Vec2) -> Vec2, length_scale: f64) -> Result<Mesh> {
        Mesh::from_parts(
            self.vertices.iter().map(|&v| f(v)).collect(),
            self.triangles.clone(),
            self.boundary_edges.clone(),
            self.h_max * length_scale,
            self.grading,
        )
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(64 * (self.vertices.len() + self.triangles.len()));
        let _ = writeln!(s, "nodes {} / triangles {}", self.vertices.len(), self.triangles.len());
        let _ = writeln!(s, "# h_max {:.16e}", self.h_max);
        let _ = writeln!(s, "# grading {:.16e}", self.grading);
        for v in &self.vertices {
            let _ = writeln!(s, "{:.16e} {:.16e}", v.x, v.y);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(s, "boundary_edges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(s, "{} {} {}", e.a, e.b, e.tag.as_str());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let perr = |m: &str| Error::Parse(format!("mesh file: {m}"));
        let header = lines.next().ok_or_else(|| perr("empty file"))?;
        let words: Vec<&str> = header.split_whitespace().collect();
        let (n, m) = match words.as_slice() {
            ["nodes", n, "/", "triangles", m] => (
                n.parse::<usize>().map_err(|_| perr("bad node count"))?,
                m.parse::<usize>().map_err(|_| perr("bad triangle count"))?,
            ),
            _ => return Err(perr("expected header 'nodes N / triangles M'")),
        };
        let (mut h_max, mut grading) = (f64::NAN, f64::NAN);
        let mut body = Vec::new();
        for l in lines {
            if let Some(c) = l.strip_prefix('#') {
                let kv: Vec<&str> = c.split_whitespace().collect();
                match kv.as_slice() {
                    ["h_max", v] => h_max = v.parse().map_err(|_| perr("bad h_max"))?,
                    ["grading", v] => grading = v.parse().map_err(|_| perr("bad grading"))?,
                    _ => {}
                }
            } else {
                body.push(l);
            }
        }
        if body.len() < n + m + 1 {
            return Err(perr("truncated"));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| perr(&format!("bad number '{s}'")));
        let idx = |s: &str| s.parse::<usize>().map_err(|_| perr(&format!("bad index '{s}'")));
        let mut vertices = Vec::with_capacity(n);
        for l in &body[..n] {
            let w: Vec<&str> = l.split_whitespace().collect();
            if w.len() != 2 {
                return Err(perr("vertex line needs two coordinates"));
            }
            vertices.push(Vec2::new(num(w[0])?, num(w[1])?));
        }
        let mut triangles = Vec::with_capacity(m);
        for l in &body[n..n + m] {
            let w: Vec<&str> = l.split_whitespace().collect();
            if w.len() != 3 {
                return Err(perr("triangle line needs three indices"));
            }
            triangles.push([idx(w[0])?, idx(w[1])?, idx(w[2])?]);
        }
        let b = match body[n + m].split_whitespace().collect::<Vec<_>>().as_slice() {
            ["boundary_edges", b] => idx(b)?,
            _ => return Err(perr("expected 'boundary_edges B'")),
        };
        if body.len() != n + m + 1 + b {
            return Err(perr("boundary edge count does not match"));
        }
        let mut boundary = Vec::with_capacity(b);
        for l in &body[n + m + 1..] {
            let w: Vec<&str> = l.split_whitespace().collect();
            let tag = match w.get(2) {
                Some(&"outer") => BoundaryTag::Outer,
                Some(&"inner") => BoundaryTag::Inner,
                _ => return Err(perr("boundary edge needs tag outer|inner")),
            };
            boundary.push(BoundaryEdge { a: idx(w[0])?, b: idx(w[1])?, tag });
        }
        Mesh::from_parts(vertices, triangles, boundary, h_max, grading)
    }

    /// SHA-256 of the text serialization, hex encoded.
    pub fn checksum(&self) -> String {
        hex_digest(self.to_text().as_bytes())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Mesh> {
        Mesh::from_text(&std::fs::read_to_string(path)?)
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Constrained Delaunay mesh of the ring between `domain.outer` and
/// `domain.inner`. Boundary spacing is `grading·h_max` on the outer boundary
/// and `h_max` on the hole; the interior is refined to triangles of area at
/// most that of an equilateral triangle of side `h_max`, with minimum angle
/// 20°.
pub fn mesh(domain: &Domain, h_max: f64, grading: f64) -> Result<Mesh> {
    let inner = domain.inner;
    if !(h_max.is_finite() && h_max > 0.0 && h_max <= 0.2 * inner.radius) {
        return Err(Error::input(format!("h_max must lie in (0, {}], got {h_max}", 0.2 * inner.radius)));
    }
    if !(grading.is_finite() && grading > 0.0 && grading <= 1.0) {
        return Err(Error::input(format!("grading must lie in (0, 1], got {grading}")));
    }
    let h_out = grading * h_max;
    let outer_pts: Vec<Vec2> = match &domain.outer {
        OuterBoundary::Circle(c) => circle_points(c.center, c.radius, h_out),
        OuterBoundary::Polygon(pts) => {
            let mut out = Vec::new();
            for (a, b) in edges(pts) {
                let k = (a.dist(b) / h_out).ceil().max(1.0) as usize;
                out.extend((0..k).map(|j| a + (b - a) * (j as f64 / k as f64)));
            }
            out
        }
    };
    let inner_pts = circle_points(inner.center, inner.radius, h_max);

    let mut points = Vec::with_capacity(outer_pts.len() + inner_pts.len());
    let mut constraints = Vec::with_capacity(points.capacity());
    for loop_pts in [&outer_pts, &inner_pts] {
        let base = points.len();
        let k = loop_pts.len();
        points.extend(loop_pts.iter().map(|v| Point2::new(v.x, v.y)));
        constraints.extend((0..k).map(|j| [base + j, base + (j + 1) % k]));
    }
    let mut cdt = ConstrainedDelaunayTriangulation::<Point2<f64>>::bulk_load_cdt(points, constraints)
        .map_err(|e| Error::Mesh(format!("constrained triangulation failed: {e:?}")))?;

    let (lo, hi) = bounding_box(&outer_pts);
    let target_area = 3f64.sqrt() / 4.0 * h_max * h_max;
    let budget = ((hi.x - lo.x) * (hi.y - lo.y) / target_area * 8.0) as usize + 10 * cdt.num_vertices();
    let result = cdt.refine(
        RefinementParameters::new()
            .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
            .with_max_allowed_area(target_area)
            .with_max_additional_vertices(budget)
            .exclude_outer_faces(true),
    );
    if !result.refinement_complete {
        return Err(Error::Mesh(format!("refinement exhausted its budget of {budget} vertices")));
    }
    let excluded: HashSet<_> = result.excluded_faces.into_iter().collect();

    let mut index = vec![usize::MAX; cdt.num_vertices()];
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for face in cdt.inner_faces() {
        if excluded.contains(&face.fix()) {
            continue;
        }
        let mut tri = [0usize; 3];
        for (slot, v) in tri.iter_mut().zip(face.vertices()) {
            let i = v.fix().index();
            if index[i] == usize::MAX {
                index[i] = vertices.len();
                let p = v.position();
                vertices.push(Vec2::new(p.x, p.y));
            }
            *slot = index[i];
        }
        triangles.push(tri);
    }
    if triangles.is_empty() {
        return Err(Error::Mesh("no interior triangles".into()));
    }

    // Boundary = undirected edges used by exactly one kept triangle.
    let mut count: HashMap<(usize, usize), (usize, usize, u8)> = HashMap::new();
    for t in &triangles {
        for k in 0..3 {
            let (a, b) = (t[k], t[(k + 1) % 3]);
            count.entry((a.min(b), a.max(b))).or_insert((a, b, 0)).2 += 1;
        }
    }
    let mut boundary: Vec<BoundaryEdge> = count
        .values()
        .filter(|(_, _, c)| *c == 1)
        .map(|&(a, b, _)| {
            let mid = (vertices[a] + vertices[b]) * 0.5;
            let tag = if mid.dist(inner.center) < 2.5 * inner.radius { BoundaryTag::Inner } else { BoundaryTag::Outer };
            BoundaryEdge { a, b, tag }
        })
        .collect();
    boundary.sort_by_key(|e| (e.a, e.b));

    // Steiner points inserted on circular constraints sit on chords.
    for e in &boundary {
        for v in [e.a, e.b] {
            match (e.tag, &domain.outer) {
                (BoundaryTag::Inner, _) => vertices[v] = project(vertices[v], inner.center, inner.radius),
                (BoundaryTag::Outer, OuterBoundary::Circle(c)) => vertices[v] = project(vertices[v], c.center, c.radius),
                _ => {}
            }
        }
    }
    let m = Mesh::from_parts(vertices, triangles, boundary, h_max, grading)?;
    let angle = m.min_angle_deg();
    if angle < MIN_ANGLE_DEG {
        return Err(Error::Mesh(format!("minimum angle {angle:.3}° is below {MIN_ANGLE_DEG}°")));
    }
    Ok(m)
}

fn circle_points(center: Vec2, radius: f64, h: f64) -> Vec<Vec2> {
    let k = ((TAU * radius / h).ceil() as usize).max(8);
    (0..k).map(|j| center + Vec2::polar(radius, TAU * j as f64 / k as f64)).collect()
}

fn project(v: Vec2, center: Vec2, radius: f64) -> Vec2 {
    let d = v - center;
    center + d * (radius / d.norm())
}

fn bounding_box(pts: &[Vec2]) -> (Vec2, Vec2) {
    pts.iter().fold(
        (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY)),
        |(lo, hi), p| (Vec2::new(lo.x.min(p.x), lo.y.min(p.y)), Vec2::new(hi.x.max(p.x), hi.y.max(p.y))),
    )
}
