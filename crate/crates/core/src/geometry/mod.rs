//! Test domains, the normalized ring D = Ω∖B̄(0,1), meshes and level curves.

mod index;
mod level;
mod mesh;

pub use index::SegmentIndex;
pub use level::{extract_level_curve, LevelComponent, LevelCurve};
pub(crate) use mesh::hex_digest;
pub use mesh::{mesh, BoundaryEdge, BoundaryTag, Mesh};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vec2;

pub const MAX_KOCH_LEVEL: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Circle {
    pub center: Vec2,
    pub radius: f64,
}

impl Circle {
    pub fn new(center: Vec2, radius: f64) -> Self {
        Circle { center, radius }
    }

    pub fn unit() -> Self {
        Circle { center: Vec2::ZERO, radius: 1.0 }
    }
}

/// Closed outer boundary of Ω. Polygons are simple and counterclockwise, with
/// the closing edge implied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum OuterBoundary {
    Circle(Circle),
    Polygon(Vec<Vec2>),
}

impl OuterBoundary {
    pub fn distance_to(&self, z: Vec2) -> f64 {
        match self {
            OuterBoundary::Circle(c) => (z.dist(c.center) - c.radius).abs(),
            OuterBoundary::Polygon(pts) => edges(pts).map(|(a, b)| segment_distance(z, a, b)).fold(f64::INFINITY, f64::min),
        }
    }

    pub fn contains(&self, z: Vec2) -> bool {
        match self {
            OuterBoundary::Circle(c) => z.dist(c.center) < c.radius,
            OuterBoundary::Polygon(pts) => point_in_polygon(z, pts),
        }
    }

    /// Total length; for circles the exact circumference.
    pub fn length(&self) -> f64 {
        match self {
            OuterBoundary::Circle(c) => std::f64::consts::TAU * c.radius,
            OuterBoundary::Polygon(pts) => edges(pts).map(|(a, b)| a.dist(b)).sum(),
        }
    }

    fn map(&self, t: impl Fn(Vec2) -> Vec2, scale: f64) -> OuterBoundary {
        match self {
            OuterBoundary::Circle(c) => OuterBoundary::Circle(Circle::new(t(c.center), c.radius * scale)),
            OuterBoundary::Polygon(pts) => OuterBoundary::Polygon(pts.iter().map(|&z| t(z)).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainKind {
    Disk,
    Square,
    Koch { level: u32 },
    Custom,
}

/// Records the map z ↦ scale·(z − shift) from raw to normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub shift: Vec2,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization { shift: Vec2::ZERO, scale: 1.0 };

    pub fn apply(&self, z: Vec2) -> Vec2 {
        (z - self.shift) * self.scale
    }

    pub fn invert(&self, z: Vec2) -> Vec2 {
        z * (1.0 / self.scale) + self.shift
    }

    /// Normalization that first applies `self`, then `next`.
    pub fn then(&self, next: &Normalization) -> Normalization {
        Normalization { shift: self.shift + next.shift * (1.0 / self.scale), scale: self.scale * next.scale }
    }

    /// Factor ŝ^{p−2} relating raw measures to normalized ones.
    pub fn measure_factor(&self, p: f64) -> f64 {
        self.scale.powf(p - 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub outer: OuterBoundary,
    pub inner: Circle,
    pub kind: DomainKind,
    pub normalization: Normalization,
}

/// Parameters for `make_domain`, one variant per domain kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DomainSpec {
    /// Ring between concentric circles of raw radii `radius/ratio` and
    /// `radius`; normalized to 1 < |z| < ratio.
    Disk {
        radius: f64,
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    /// Axis-aligned square of the given half-side centered at the origin.
    Square { half_side: f64 },
    /// Koch prefractal on an equilateral triangle with the given side,
    /// centered at its centroid.
    Koch { level: u32, side: f64 },
    /// Arbitrary simple polygon, normalized about `center`.
    Custom { vertices: Vec<Vec2>, center: Vec2 },
}

fn default_ratio() -> f64 {
    5.0
}

impl DomainSpec {
    pub fn kind(&self) -> DomainKind {
        match self {
            DomainSpec::Disk { .. } => DomainKind::Disk,
            DomainSpec::Square { .. } => DomainKind::Square,
            DomainSpec::Koch { level, .. } => DomainKind::Koch { level: *level },
            DomainSpec::Custom { .. } => DomainKind::Custom,
        }
    }
}

pub fn make_domain(spec: &DomainSpec) -> Result<Domain> {
    match spec {
        DomainSpec::Disk { radius, ratio } => {
            if !(radius.is_finite() && *radius > 0.0) {
                return Err(Error::input(format!("disk radius must be positive, got {radius}")));
            }
            if !(ratio.is_finite() && *ratio > 1.0) {
                return Err(Error::input(format!("disk ratio R must exceed 1, got {ratio}")));
            }
            Ok(Domain {
                outer: OuterBoundary::Circle(Circle::new(Vec2::ZERO, *ratio)),
                inner: Circle::unit(),
                kind: DomainKind::Disk,
                normalization: Normalization { shift: Vec2::ZERO, scale: ratio / radius },
            })
        }
        DomainSpec::Square { half_side: a } => {
            if !(a.is_finite() && *a > 0.0) {
                return Err(Error::input(format!("square half-side must be positive, got {a}")));
            }
            let pts = vec![Vec2::new(-a, -a), Vec2::new(*a, -a), Vec2::new(*a, *a), Vec2::new(-a, *a)];
            normalize_domain(&raw_domain(pts, DomainKind::Square), Vec2::ZERO)
        }
        DomainSpec::Koch { level, side } => {
            if *level > MAX_KOCH_LEVEL {
                return Err(Error::input(format!("koch level must be at most {MAX_KOCH_LEVEL}, got {level}")));
            }
            if !(side.is_finite() && *side > 0.0) {
                return Err(Error::input(format!("koch side must be positive, got {side}")));
            }
            let pts = koch_polygon(*level, *side);
            normalize_domain(&raw_domain(pts, DomainKind::Koch { level: *level }), Vec2::ZERO)
        }
        DomainSpec::Custom { vertices, center } => {
            let mut pts = vertices.clone();
            if pts.len() > 1 && pts.first() == pts.last() {
                pts.pop();
            }
            if pts.len() < 3 {
                return Err(Error::input("custom polygon needs at least 3 vertices"));
            }
            if pts.iter().any(|z| !z.is_finite()) {
                return Err(Error::input("custom polygon has non-finite vertices"));
            }
            if let Some((i, j)) = self_intersection(&pts) {
                return Err(Error::input(format!("custom polygon is not simple: edges {i} and {j} intersect")));
            }
            if signed_area(&pts) < 0.0 {
                pts.reverse();
            }
            normalize_domain(&raw_domain(pts, DomainKind::Custom), *center)
        }
    }
}

fn raw_domain(pts: Vec<Vec2>, kind: DomainKind) -> Domain {
    Domain {
        outer: OuterBoundary::Polygon(pts),
        inner: Circle::unit(),
        kind,
        normalization: Normalization::IDENTITY,
    }
}

/// Translates `z0` to the origin and dilates by 4/d with d = dist(z0, ∂Ω),
/// so that the outer boundary is at distance 4 and the hole is B(0,1).
pub fn normalize_domain(raw: &Domain, z0: Vec2) -> Result<Domain> {
    if !z0.is_finite() || !raw.outer.contains(z0) {
        return Err(Error::input(format!("center ({}, {}) is not interior to the outer boundary", z0.x, z0.y)));
    }
    let d = raw.outer.distance_to(z0);
    if d <= 0.0 {
        return Err(Error::input("center lies on the outer boundary"));
    }
    let step = Normalization { shift: z0, scale: 4.0 / d };
    Ok(Domain {
        outer: raw.outer.map(|z| step.apply(z), step.scale),
        inner: Circle::unit(),
        kind: raw.kind,
        normalization: raw.normalization.then(&step),
    })
}

/// Boundary of the level-n Koch prefractal with outward bumps, counterclockwise,
/// centroid at the origin. It has 3·4ⁿ vertices.
pub fn koch_polygon(level: u32, side: f64) -> Vec<Vec2> {
    let r = side / 3f64.sqrt();
    let mut pts: Vec<Vec2> = (0..3)
        .map(|k| Vec2::polar(r, std::f64::consts::FRAC_PI_2 + k as f64 * std::f64::consts::TAU / 3.0))
        .collect();
    for _ in 0..level {
        let mut next = Vec::with_capacity(pts.len() * 4);
        for (a, b) in edges(&pts) {
            let d = (b - a) * (1.0 / 3.0);
            let p1 = a + d;
            let p2 = a + d * 2.0;
            // For a ccw loop the exterior is on the right, so the apex is d
            // rotated by −60°.
            let apex = p1 + d.rotate(-std::f64::consts::FRAC_PI_3);
            next.extend([a, p1, apex, p2]);
        }
        pts = next;
    }
    pts
}

pub(crate) fn edges(pts: &[Vec2]) -> impl Iterator<Item = (Vec2, Vec2)> + '_ {
    (0..pts.len()).map(move |i| (pts[i], pts[(i + 1) % pts.len()]))
}

pub fn signed_area(pts: &[Vec2]) -> f64 {
    0.5 * edges(pts).map(|(a, b)| a.cross(b)).sum::<f64>()
}

pub fn segment_distance(z: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sq();
    let t = if len2 > 0.0 { ((z - a).dot(ab) / len2).clamp(0.0, 1.0) } else { 0.0 };
    z.dist(a + ab * t)
}

/// Crossing-number test; points on the boundary may go either way.
pub fn point_in_polygon(z: Vec2, pts: &[Vec2]) -> bool {
    let mut inside = false;
    for (a, b) in edges(pts) {
        if (a.y > z.y) != (b.y > z.y) {
            let x = a.x + (z.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if z.x < x {
                inside = !inside;
            }
        }
    }
    inside
}

/// First pair of non-adjacent edges that touch, if any.
fn self_intersection(pts: &[Vec2]) -> Option<(usize, usize)> {
    let n = pts.len();
    for i in 0..n {
        let (a, b) = (pts[i], pts[(i + 1) % n]);
        if a == b {
            return Some((i, i));
        }
        for j in i + 1..n {
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            let (c, d) = (pts[j], pts[(j + 1) % n]);
            if adjacent {
                // Adjacent edges may only share their common vertex.
                let (shared, u, v) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                let (e1, e2) = (u - shared, v - shared);
                if e1.cross(e2) == 0.0 && e1.dot(e2) > 0.0 {
                    return Some((i, j));
                }
            } else if segments_intersect(a, b, c, d) {
                return Some((i, j));
            }
        }
    }
    None
}

fn segments_intersect(a: Vec2, b: Vec2, c: Vec2, d: Vec2) -> bool {
    let o = |p: Vec2, q: Vec2, r: Vec2| (q - p).cross(r - p);
    let on = |p: Vec2, q: Vec2, r: Vec2| {
        r.x >= p.x.min(q.x) && r.x <= p.x.max(q.x) && r.y >= p.y.min(q.y) && r.y <= p.y.max(q.y)
    };
    let (d1, d2, d3, d4) = (o(c, d, a), o(c, d, b), o(a, b, c), o(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && on(c, d, a)) || (d2 == 0.0 && on(c, d, b)) || (d3 == 0.0 && on(a, b, c)) || (d4 == 0.0 && on(a, b, d))
}
