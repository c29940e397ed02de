use std::collections::HashMap;

use super::signed_area;
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::solver::ScalarField;

const TIE_TOLERANCE: f64 = 1e-13;
const TIE_STEP: f64 = 1e-12;

/// One closed polyline of a level set. Segment `i` joins `points[i]` to
/// `points[(i+1) % n]` and lies in mesh triangle `triangles[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelComponent {
    pub points: Vec<Vec2>,
    /// ∇u at each point, averaged over the two triangles meeting there.
    pub gradients: Vec<Vec2>,
    pub triangles: Vec<usize>,
}

impl LevelComponent {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// (start, end, triangle) for each segment.
    pub fn segments(&self) -> impl Iterator<Item = (Vec2, Vec2, usize)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n], self.triangles[i]))
    }

    pub fn length(&self) -> f64 {
        self.segments().map(|(a, b, _)| a.dist(b)).sum()
    }

    pub fn signed_area(&self) -> f64 {
        signed_area(&self.points)
    }

    /// Splits every segment at its midpoint.
    pub fn refined(&self) -> LevelComponent {
        let n = self.points.len();
        let mut out = LevelComponent {
            points: Vec::with_capacity(2 * n),
            gradients: Vec::with_capacity(2 * n),
            triangles: Vec::with_capacity(2 * n),
        };
        for i in 0..n {
            let j = (i + 1) % n;
            out.points.extend([self.points[i], (self.points[i] + self.points[j]) * 0.5]);
            out.gradients.extend([self.gradients[i], (self.gradients[i] + self.gradients[j]) * 0.5]);
            out.triangles.extend([self.triangles[i], self.triangles[i]]);
        }
        out
    }

    fn reversed(mut self) -> LevelComponent {
        // Segment i of the reversed loop runs from old points[n-1-i] to
        // old points[n-2-i], which is old segment n-2-i.
        let n = self.points.len();
        self.points.reverse();
        self.gradients.reverse();
        let tri = self.triangles.clone();
        for i in 0..n {
            self.triangles[i] = tri[(2 * n - 2 - i) % n];
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelCurve {
    /// Level actually contoured, after any tie-breaking perturbation.
    pub level: f64,
    pub components: Vec<LevelComponent>,
}

impl LevelCurve {
    pub fn length(&self) -> f64 {
        self.components.iter().map(LevelComponent::length).sum()
    }

    pub fn num_segments(&self) -> usize {
        self.components.iter().map(LevelComponent::len).sum()
    }

    pub fn refined(&self) -> LevelCurve {
        LevelCurve { level: self.level, components: self.components.iter().map(LevelComponent::refined).collect() }
    }

    /// Whether z lies in the region enclosed by an odd number of components.
    pub fn encloses(&self, z: Vec2) -> bool {
        self.components.iter().filter(|c| super::point_in_polygon(z, &c.points)).count() % 2 == 1
    }
}

/// Marching-triangles contour of the piecewise-linear field at level t.
/// Components are closed and counterclockwise.
pub fn extract_level_curve(u: &ScalarField, t: f64) -> Result<LevelCurve> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::input(format!("level must lie in (0, 1), got {t}")));
    }
    let mesh = u.mesh();
    let vals = u.values();
    let mut level = t;
    while vals.iter().any(|&v| (v - level).abs() <= TIE_TOLERANCE) {
        level += TIE_STEP;
    }

    // Crossing points keyed by mesh edge; each directed segment keeps the
    // region {u > t} on its left.
    let mut ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut points: Vec<Vec2> = Vec::new();
    let mut next: Vec<(usize, usize)> = Vec::new(); // (target id, triangle)
    let mut crossing = |a: usize, b: usize, points: &mut Vec<Vec2>, next: &mut Vec<(usize, usize)>| {
        let key = (a.min(b), a.max(b));
        *ids.entry(key).or_insert_with(|| {
            let (i, j) = key;
            let s = (level - vals[i]) / (vals[j] - vals[i]);
            let p = mesh.vertices()[i] + (mesh.vertices()[j] - mesh.vertices()[i]) * s;
            points.push(p);
            next.push((usize::MAX, usize::MAX));
            points.len() - 1
        })
    };
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let above = tri.map(|i| vals[i] > level);
        let n_above = above.iter().filter(|&&a| a).count();
        if n_above == 0 || n_above == 3 {
            continue;
        }
        // The odd vertex out is the one whose two edges are crossed.
        let lone = (0..3).find(|&i| above[i] == (n_above == 1)).unwrap_or(0);
        let (i, j, l) = (tri[lone], tri[(lone + 1) % 3], tri[(lone + 2) % 3]);
        let p = crossing(i, j, &mut points, &mut next);
        let q = crossing(i, l, &mut points, &mut next);
        // Triangles are ccw, so vertex i lies to the left of p -> q.
        let (from, to) = if n_above == 1 { (p, q) } else { (q, p) };
        if next[from].0 != usize::MAX {
            return Err(Error::Mesh(format!("level set branches at crossing {from}")));
        }
        next[from] = (to, k);
    }
    if next.iter().any(|(to, _)| *to == usize::MAX) {
        return Err(Error::Mesh("open level curve".into()));
    }

    let grads = u.gradients();
    let mut seen = vec![false; points.len()];
    let mut components = Vec::new();
    for start in 0..points.len() {
        if seen[start] {
            continue;
        }
        let mut c = LevelComponent { points: Vec::new(), gradients: Vec::new(), triangles: Vec::new() };
        let mut prev_tri = usize::MAX;
        let mut id = start;
        loop {
            seen[id] = true;
            let (to, tri) = next[id];
            c.points.push(points[id]);
            c.triangles.push(tri);
            c.gradients.push(if prev_tri == usize::MAX { grads[tri] } else { (grads[tri] + grads[prev_tri]) * 0.5 });
            prev_tri = tri;
            id = to;
            if id == start {
                break;
            }
        }
        c.gradients[0] = (c.gradients[0] + grads[prev_tri]) * 0.5;
        if c.signed_area() < 0.0 {
            c = c.reversed();
        }
        components.push(c);
    }
    if components.is_empty() {
        return Err(Error::Mesh(format!("no level curve at t = {level}")));
    }
    Ok(LevelCurve { level, components })
}
