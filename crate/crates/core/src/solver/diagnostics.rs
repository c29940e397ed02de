use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{geometric_schedule, solve_capacitary, ScalarField, SolveOptions};
use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Mesh, SegmentIndex};
use crate::integrand::Integrand;
use crate::linalg::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallRatio {
    pub center: Vec2,
    pub radius: f64,
    /// max u / min u over nodes in the ball; `None` when skipped.
    pub ratio: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarnackReport {
    pub balls: Vec<BallRatio>,
    pub max_ratio: f64,
}

/// Ratio sup u / inf u over mesh nodes in each ball B(c, r) whose double
/// B(c, 2r) stays inside the ring.
pub fn harnack_diagnostic(u: &ScalarField, balls: &[(Vec2, f64)]) -> HarnackReport {
    let mesh = u.mesh();
    let outer = mesh.outer_index();
    let inner = SegmentIndex::new(mesh.boundary_segments(BoundaryTag::Inner));
    let inner_pts: Vec<Vec2> = mesh.inner_loop().iter().map(|&v| mesh.vertices()[v]).collect();
    let mut out = Vec::with_capacity(balls.len());
    let mut max_ratio: f64 = 1.0;
    for &(center, radius) in balls {
        let mut entry = BallRatio { center, radius, ratio: None, note: None };
        let in_hole = crate::geometry::point_in_polygon(center, &inner_pts);
        let in_domain = mesh.triangles().iter().enumerate().any(|(k, _)| contains(mesh, k, center));
        if !(radius > 0.0) || in_hole || !in_domain {
            entry.note = Some("center outside the ring".into());
        } else if outer.distance(center) < 2.0 * radius || inner.distance(center) < 2.0 * radius {
            entry.note = Some("doubled ball touches the boundary".into());
        } else {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for (z, &v) in mesh.vertices().iter().zip(u.values()) {
                if z.dist(center) <= radius {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            if !lo.is_finite() {
                entry.note = Some("no mesh nodes in ball".into());
            } else if lo <= 0.0 {
                entry.note = Some("nonpositive minimum".into());
            } else {
                let r = hi / lo;
                max_ratio = max_ratio.max(r);
                entry.ratio = Some(r);
            }
        }
        out.push(entry);
    }
    HarnackReport { balls: out, max_ratio }
}

fn contains(mesh: &Mesh, k: usize, z: Vec2) -> bool {
    let [a, b, c] = mesh.triangles()[k].map(|i| mesh.vertices()[i]);
    (b - a).cross(z - a) >= 0.0 && (c - b).cross(z - b) >= 0.0 && (a - c).cross(z - c) >= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalInequality {
    pub d_min: f64,
    pub samples: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    /// Smallest c with all ratios in [1/c, c].
    pub c: f64,
}

/// Range of |∇u|·d(z,∂Ω)/u(z) over centroids at distance ≥ d_min from the
/// outer boundary.
pub fn fundamental_inequality(u: &ScalarField, d_min: f64) -> Result<FundamentalInequality> {
    let mesh = u.mesh();
    let outer = mesh.outer_index();
    let (mut lo, mut hi, mut n) = (f64::INFINITY, 0.0_f64, 0usize);
    for k in 0..mesh.num_triangles() {
        let z = mesh.centroid(k);
        let d = outer.distance(z);
        if d < d_min {
            continue;
        }
        let uz = u.centroid_value(k);
        if uz <= 0.0 {
            continue;
        }
        let q = u.gradients()[k].norm() * d / uz;
        lo = lo.min(q);
        hi = hi.max(q);
        n += 1;
    }
    if n == 0 {
        return Err(Error::input(format!("no centroids at distance ≥ {d_min} from the outer boundary")));
    }
    Ok(FundamentalInequality { d_min, samples: n, ratio_min: lo, ratio_max: hi, c: hi.max(1.0 / lo) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegularizationGap {
    pub epsilon: f64,
    /// ‖u_ε − u_{ε/2}‖_∞ on the mesh.
    pub linf: f64,
    /// linf / ε^{min(1, p−1)}.
    pub constant: f64,
}

/// Solves with final regularization ε and ε/2 on the same mesh.
pub fn regularization_gap(mesh: Arc<Mesh>, f: &Integrand, opts: &SolveOptions, epsilon: f64) -> Result<RegularizationGap> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::input(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let solve = |eps: f64| {
        let o = SolveOptions { epsilon_schedule: Some(geometric_schedule(eps)), ..opts.clone() };
        solve_capacitary(mesh.clone(), f, &o)
    };
    let a = solve(epsilon)?;
    let b = solve(epsilon / 2.0)?;
    let linf = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let rate = (f.p() - 1.0).min(1.0);
    Ok(RegularizationGap { epsilon, linf, constant: linf / epsilon.powf(rate) })
}
