use super::segment_distance;
use crate::linalg::Vec2;

/// Uniform bucket grid over line segments for nearest-distance queries.
#[derive(Debug, Clone)]
pub struct SegmentIndex {
    segments: Vec<(Vec2, Vec2)>,
    origin: Vec2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SegmentIndex {
    pub fn new(segments: Vec<(Vec2, Vec2)>) -> SegmentIndex {
        let (mut lo, mut hi) = (Vec2::new(f64::INFINITY, f64::INFINITY), Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
        for (a, b) in &segments {
            for p in [a, b] {
                lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
            }
        }
        let span = (hi.x - lo.x).max(hi.y - lo.y).max(1e-12);
        let side = (segments.len() as f64).sqrt().ceil().max(1.0);
        let cell = span / side;
        let nx = ((hi.x - lo.x) / cell).floor() as usize + 1;
        let ny = ((hi.y - lo.y) / cell).floor() as usize + 1;
        let mut buckets = vec![Vec::new(); nx * ny];
        let mut index = SegmentIndex { segments, origin: lo, cell, nx, ny, buckets: Vec::new() };
        for (k, (a, b)) in index.segments.iter().enumerate() {
            let (i0, j0) = index.cell_of(Vec2::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = index.cell_of(Vec2::new(a.x.max(b.x), a.y.max(b.y)));
            for i in i0..=i1 {
                for j in j0..=j1 {
                    buckets[j * nx + i].push(k as u32);
                }
            }
        }
        index.buckets = buckets;
        index
    }

    fn cell_of(&self, z: Vec2) -> (usize, usize) {
        let i = ((z.x - self.origin.x) / self.cell).floor().clamp(0.0, (self.nx - 1) as f64) as usize;
        let j = ((z.y - self.origin.y) / self.cell).floor().clamp(0.0, (self.ny - 1) as f64) as usize;
        (i, j)
    }

    /// Distance from z to the nearest segment.
    pub fn distance(&self, z: Vec2) -> f64 {
        if self.segments.is_empty() {
            return f64::INFINITY;
        }
        let (ci, cj) = self.cell_of(z);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            let r = ring as isize;
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    let (i, j) = (ci as isize + di, cj as isize + dj);
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    for &k in &self.buckets[j as usize * self.nx + i as usize] {
                        let (a, b) = self.segments[k as usize];
                        best = best.min(segment_distance(z, a, b));
                    }
                }
            }
            // Cells beyond this ring are at least ring·cell from z, also when
            // z lies outside the grid and was clamped into it.
            if best <= ring as f64 * self.cell {
                break;
            }
        }
        best
    }
}
