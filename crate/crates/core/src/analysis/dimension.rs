//! Local, information and box dimensions of boundary measures, the
//! finite-scale gauge comparison, and synthetic calibration measures.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::regression::{fit_line, t_quantile, LineFit};
use super::{gauge_value, GaugeFunction};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::measure::{BoundaryArc, BoundaryMeasure, ExtractionMethod};

/// Smallest usable radius grid.
pub const MIN_RADII: usize = 4;
/// Number of centers drawn by `DimensionReport::sample_centers` by default.
pub const DEFAULT_CENTERS: usize = 64;
/// |slope of log ratio vs log r| below this counts as flat.
pub const FLAT_SLOPE: f64 = 0.05;

/// Uniform-grid index over arc midpoints for ball-mass queries.
struct BallIndex<'a> {
    arcs: &'a [BoundaryArc],
    cell: f64,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl<'a> BallIndex<'a> {
    fn new(arcs: &'a [BoundaryArc], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, a) in arcs.iter().enumerate() {
            buckets.entry(key(a.midpoint, cell)).or_default().push(i);
        }
        BallIndex { arcs, cell, buckets }
    }

    /// Same convention as `measure_ball`: midpoints strictly inside.
    fn mass(&self, z: Vec2, r: f64) -> f64 {
        let (lo, hi) = (key(z - Vec2::new(r, r), self.cell), key(z + Vec2::new(r, r), self.cell));
        let r2 = r * r;
        let mut m = 0.0;
        for i in lo.0..=hi.0 {
            for j in lo.1..=hi.1 {
                if let Some(ids) = self.buckets.get(&(i, j)) {
                    m += ids
                        .iter()
                        .map(|&k| &self.arcs[k])
                        .filter(|a| a.midpoint.dist(z).powi(2) < r2)
                        .map(|a| a.weight)
                        .sum::<f64>();
                }
            }
        }
        m
    }
}

fn key(z: Vec2, cell: f64) -> (i64, i64) {
    ((z.x / cell).floor() as i64, (z.y / cell).floor() as i64)
}

fn diameter(points: &[Vec2]) -> f64 {
    let hull = convex_hull(points);
    let mut d: f64 = 0.0;
    for (i, a) in hull.iter().enumerate() {
        for b in &hull[i + 1..] {
            d = d.max(a.dist(*b));
        }
    }
    d
}

fn convex_hull(points: &[Vec2]) -> Vec<Vec2> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Vec2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Vec2>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && (hull[hull.len() - 1] - hull[hull.len() - 2]).cross(p - hull[hull.len() - 2]) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Diameter of the arc-midpoint set.
pub fn measure_diameter(mu: &BoundaryMeasure) -> f64 {
    diameter(&mu.arcs.iter().map(|a| a.midpoint).collect::<Vec<_>>())
}

/// Geometric grid with ratio 2 from 10× the longest arc up to diameter/10.
pub fn default_radius_grid(mu: &BoundaryMeasure) -> Result<Vec<f64>> {
    let r_min = 10.0 * mu.arcs.iter().map(|a| a.length).fold(0.0, f64::max);
    let r_max = measure_diameter(mu) / 10.0;
    let mut radii = Vec::new();
    let mut r = r_min;
    while r <= r_max * (1.0 + 1e-12) {
        radii.push(r);
        r *= 2.0;
    }
    if radii.len() < MIN_RADII {
        return Err(Error::input(format!(
            "only {} radii fit between 10× arc length {r_min:.3e} and diameter/10 {r_max:.3e}; need {MIN_RADII} (refine the outer boundary)",
            radii.len()
        )));
    }
    Ok(radii)
}

fn check_radii(radii: &[f64]) -> Result<()> {
    if radii.len() < MIN_RADII {
        return Err(Error::input(format!("need at least {MIN_RADII} radii, got {}", radii.len())));
    }
    if radii.iter().any(|r| !(r.is_finite() && *r > 0.0)) || radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("radii must be positive, finite and strictly increasing"));
    }
    Ok(())
}

/// `n` arc midpoints at μ-quantiles drawn from the golden-ratio sequence
/// frac(½ + k/φ), so that a plain average over them is a μ-average. Evenly
/// spaced quantiles would share their low-order position in self-similar
/// boundary orderings and make the average oscillate with scale.
pub fn mass_quantile_centers(mu: &BoundaryMeasure, n: usize) -> Vec<Vec2> {
    mass_quantile_centers_from(mu, n, 0.5)
}

/// As `mass_quantile_centers` with the sequence started at `start` ∈ [0, 1).
pub fn mass_quantile_centers_from(mu: &BoundaryMeasure, n: usize, start: f64) -> Vec<Vec2> {
    if mu.total_mass <= 0.0 || n == 0 {
        return Vec::new();
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut cum = Vec::with_capacity(mu.arcs.len());
    let mut acc = 0.0;
    for a in &mu.arcs {
        acc += a.weight;
        cum.push(acc);
    }
    (0..n)
        .map(|k| {
            let q = (start + k as f64 * inv_phi).fract() * mu.total_mass;
            let i = cum.partition_point(|&c| c < q).min(mu.arcs.len() - 1);
            mu.arcs[i].midpoint
        })
        .collect()
}

/// Regression of log μ(B(z, r)) on log r at one center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterDimension {
    pub center: Vec2,
    pub fit: LineFit,
    /// Radii with μ(B(z, r)) > 0 that entered the fit.
    pub used_radii: usize,
}

/// Mass fraction counts of the finite-scale gauge comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeCounts {
    pub increasing: f64,
    pub decreasing: f64,
    pub flat: f64,
    /// Fraction of centers where μ(B(z, r)) ≤ λ(r) at the finest radius.
    pub below_gauge_at_finest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionReport {
    pub radii: Vec<f64>,
    pub centers: Vec<CenterDimension>,
    /// Centers with μ(B(z, r_max)) = 0.
    pub skipped: usize,
    /// Average of the per-center slopes.
    pub local_dimension: f64,
    pub local_ci: (f64, f64),
    /// Slope of Σ μᵢ log μᵢ against log r over grid boxes of side r.
    pub information: LineFit,
    /// Box-counting dimension of the support of the arcs (every arc counts).
    pub boundary_box: LineFit,
    pub gauge: Option<GaugeCounts>,
}

/// Per-center local slopes, information dimension and the boundary's box
/// dimension over a common radius grid. Centers with no mass at the largest
/// radius are skipped; radii where a center's ball is empty are dropped
/// from that center's fit.
pub fn local_dimension(mu: &BoundaryMeasure, centers: &[Vec2], radii: &[f64]) -> Result<DimensionReport> {
    check_radii(radii)?;
    if mu.total_mass <= 0.0 {
        return Err(Error::input("measure has no mass"));
    }
    let index = BallIndex::new(&mu.arcs, *radii.last().unwrap());
    let logr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut out = Vec::new();
    let mut skipped = 0;
    for &z in centers {
        let masses: Vec<f64> = radii.iter().map(|&r| index.mass(z, r)).collect();
        if !(masses.last().copied().unwrap_or(0.0) > 0.0) {
            skipped += 1;
            continue;
        }
        let (x, y): (Vec<f64>, Vec<f64>) =
            logr.iter().zip(&masses).filter(|(_, m)| **m > 0.0).map(|(l, m)| (*l, m.ln())).unzip();
        if x.len() < 2 {
            skipped += 1;
            continue;
        }
        out.push(CenterDimension { center: z, fit: fit_line(&x, &y, None), used_radii: x.len() });
    }
    if out.is_empty() {
        return Err(Error::input("every center has an empty ball at the largest radius"));
    }
    let slopes: Vec<f64> = out.iter().map(|c| c.fit.slope).collect();
    let n = slopes.len() as f64;
    let mean = slopes.iter().sum::<f64>() / n;
    let half = if slopes.len() > 1 {
        let var = slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        t_quantile(n - 1.0) * (var / n).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(DimensionReport {
        radii: radii.to_vec(),
        centers: out,
        skipped,
        local_dimension: mean,
        local_ci: (mean - half, mean + half),
        information: information_dimension(mu, radii)?,
        boundary_box: box_dimension(mu, radii)?,
        gauge: None,
    })
}

/// Grid offsets averaged over to damp the dependence on box alignment.
const GRID_SHIFTS: [(f64, f64); 4] = [(0.0, 0.0), (0.5, 0.0), (0.0, 0.5), (0.5, 0.5)];

/// Ordered so that sums over boxes are reproducible.
fn box_masses(mu: &BoundaryMeasure, side: f64, shift: (f64, f64)) -> BTreeMap<(i64, i64), f64> {
    let origin = Vec2::new(side * shift.0, side * shift.1);
    let mut boxes: BTreeMap<(i64, i64), f64> = BTreeMap::new();
    for a in &mu.arcs {
        *boxes.entry(key(a.midpoint - origin, side)).or_default() += a.weight;
    }
    boxes
}

/// Slope of Σ μᵢ log μᵢ (μ normalized) against log r for boxes of side r,
/// averaging the entropy over four half-box grid shifts.
pub fn information_dimension(mu: &BoundaryMeasure, radii: &[f64]) -> Result<LineFit> {
    check_radii(radii)?;
    let total = mu.total_mass;
    if total <= 0.0 {
        return Err(Error::input("measure has no mass"));
    }
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = radii
        .iter()
        .map(|&r| {
            GRID_SHIFTS
                .iter()
                .map(|&s| {
                    box_masses(mu, r, s)
                        .values()
                        .filter(|m| **m > 0.0)
                        .map(|m| m / total * (m / total).ln())
                        .sum::<f64>()
                })
                .sum::<f64>()
                / GRID_SHIFTS.len() as f64
        })
        .collect();
    Ok(fit_line(&x, &y, None))
}

/// Box-counting slope −d log N(r)/d log r of the arc midpoints.
pub fn box_dimension(mu: &BoundaryMeasure, radii: &[f64]) -> Result<LineFit> {
    check_radii(radii)?;
    let x: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let y: Vec<f64> = radii
        .iter()
        .map(|&r| {
            let n: f64 = GRID_SHIFTS.iter().map(|&s| box_masses(mu, r, s).len() as f64).sum();
            -(n / GRID_SHIFTS.len() as f64).ln()
        })
        .collect();
    Ok(fit_line(&x, &y, None))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Trend {
    /// μ(B(z, r))/λ(r) grows as r decreases.
    Increasing,
    Decreasing,
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterGauge {
    pub center: Vec2,
    pub weight: f64,
    /// μ(B(z, r))/λ(r / length_scale) per radius.
    pub ratios: Vec<f64>,
    /// Slope of log ratio against log r; negative means growth as r → 0.
    pub slope: f64,
    pub trend: Trend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaugeComparison {
    pub gauge: GaugeFunction,
    pub radii: Vec<f64>,
    pub length_scale: f64,
    pub centers: Vec<CenterGauge>,
    pub counts: GaugeCounts,
}

/// μ(B(z, r))/λ(r/L) at every arc midpoint with positive weight, with L the
/// length that maps the radius grid into the gauge's domain (0, e⁻²).
/// Trends are classified by the slope in log–log coordinates and summarized
/// as mass fractions.
pub fn gauge_comparison(mu: &BoundaryMeasure, gauge: &GaugeFunction, radii: &[f64], length_scale: f64) -> Result<GaugeComparison> {
    check_radii(radii)?;
    if !(length_scale.is_finite() && length_scale > 0.0) {
        return Err(Error::input(format!("length scale must be positive, got {length_scale}")));
    }
    let lambdas: Vec<f64> = radii.iter().map(|&r| gauge_value(gauge, r / length_scale)).collect::<Result<_>>()?;
    let index = BallIndex::new(&mu.arcs, *radii.last().unwrap());
    let logr: Vec<f64> = radii.iter().map(|r| r.ln()).collect();
    let mut centers = Vec::new();
    let (mut inc, mut dec, mut flat, mut below, mut total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for a in mu.arcs.iter().filter(|a| a.weight > 0.0) {
        let ratios: Vec<f64> = radii.iter().zip(&lambdas).map(|(&r, l)| index.mass(a.midpoint, r) / l).collect();
        let (x, y): (Vec<f64>, Vec<f64>) =
            logr.iter().zip(&ratios).filter(|(_, q)| **q > 0.0).map(|(l, q)| (*l, q.ln())).unzip();
        let slope = if x.len() >= 2 { fit_line(&x, &y, None).slope } else { 0.0 };
        let trend = if slope < -FLAT_SLOPE {
            Trend::Increasing
        } else if slope > FLAT_SLOPE {
            Trend::Decreasing
        } else {
            Trend::Flat
        };
        match trend {
            Trend::Increasing => inc += a.weight,
            Trend::Decreasing => dec += a.weight,
            Trend::Flat => flat += a.weight,
        }
        if ratios[0] <= 1.0 {
            below += a.weight;
        }
        total += a.weight;
        centers.push(CenterGauge { center: a.midpoint, weight: a.weight, ratios, slope, trend });
    }
    if total <= 0.0 {
        return Err(Error::input("measure has no mass"));
    }
    let counts = GaugeCounts {
        increasing: inc / total,
        decreasing: dec / total,
        flat: flat / total,
        below_gauge_at_finest: below / total,
    };
    Ok(GaugeComparison { gauge: *gauge, radii: radii.to_vec(), length_scale, centers, counts })
}

impl DimensionReport {
    /// μ-distributed centers, see `mass_quantile_centers`.
    pub fn sample_centers(mu: &BoundaryMeasure, n: usize) -> Vec<Vec2> {
        mass_quantile_centers(mu, n)
    }

    pub fn with_gauge(mut self, cmp: &GaugeComparison) -> Self {
        self.gauge = Some(cmp.counts);
        self
    }

    /// `key: value` blocks separated by blank lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let fit = |s: &mut String, name: &str, f: &LineFit| {
            let _ = writeln!(s, "[{name}]");
            let _ = writeln!(s, "slope: {:.17e}", f.slope);
            let _ = writeln!(s, "intercept: {:.17e}", f.intercept);
            let _ = writeln!(s, "ci95_low: {:.17e}", f.ci_low);
            let _ = writeln!(s, "ci95_high: {:.17e}", f.ci_high);
            let _ = writeln!(s, "residual_rms: {:.17e}", f.residual_rms);
            let _ = writeln!(s, "points: {}", f.n);
            s.push('\n');
        };
        let _ = writeln!(s, "[radii]");
        let _ = writeln!(s, "r_min: {:.17e}", self.radii[0]);
        let _ = writeln!(s, "r_max: {:.17e}", self.radii[self.radii.len() - 1]);
        let _ = writeln!(s, "count: {}", self.radii.len());
        s.push('\n');
        let _ = writeln!(s, "[local_dimension]");
        let _ = writeln!(s, "mean: {:.17e}", self.local_dimension);
        let _ = writeln!(s, "ci95_low: {:.17e}", self.local_ci.0);
        let _ = writeln!(s, "ci95_high: {:.17e}", self.local_ci.1);
        let _ = writeln!(s, "centers: {}", self.centers.len());
        let _ = writeln!(s, "skipped: {}", self.skipped);
        s.push('\n');
        fit(&mut s, "information_dimension", &self.information);
        fit(&mut s, "boundary_box_dimension", &self.boundary_box);
        if let Some(g) = &self.gauge {
            let _ = writeln!(s, "[gauge_comparison]");
            let _ = writeln!(s, "increasing: {:.17e}", g.increasing);
            let _ = writeln!(s, "decreasing: {:.17e}", g.decreasing);
            let _ = writeln!(s, "flat: {:.17e}", g.flat);
            let _ = writeln!(s, "below_gauge_at_finest: {:.17e}", g.below_gauge_at_finest);
            s.push('\n');
        }
        s
    }

    pub fn centers_csv(&self) -> String {
        let mut s = String::from("x,y,slope,intercept,ci95_low,ci95_high,residual_rms,used_radii\n");
        for c in &self.centers {
            let _ = writeln!(
                s,
                "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                c.center.x, c.center.y, c.fit.slope, c.fit.intercept, c.fit.ci_low, c.fit.ci_high, c.fit.residual_rms, c.used_radii
            );
        }
        s
    }
}

/// Self-similar four-corner dust in the unit square: each level keeps the
/// corner squares of relative size s = 4^(−1/α), each carrying a quarter of
/// the mass, so every point has local dimension α. Needs α < 2.
pub fn cantor_dust_measure(alpha: f64, levels: u32) -> Result<BoundaryMeasure> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(Error::input(format!("dust dimension must lie in (0, 2), got {alpha}")));
    }
    if !(1..=10).contains(&levels) {
        return Err(Error::input(format!("dust levels must lie in 1..=10, got {levels}")));
    }
    let s = 4f64.powf(-1.0 / alpha);
    let mut corners = vec![Vec2::ZERO];
    let mut side = 1.0;
    for _ in 0..levels {
        let step = side * (1.0 - s);
        corners = corners
            .iter()
            .flat_map(|&c| [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)].map(|(i, j)| c + Vec2::new(i * step, j * step)))
            .collect();
        side *= s;
    }
    let w = 1.0 / corners.len() as f64;
    let arcs = corners
        .into_iter()
        .map(|c| BoundaryArc { midpoint: c + Vec2::new(side / 2.0, side / 2.0), length: side, weight: w })
        .collect();
    BoundaryMeasure::from_arcs(arcs, 2.0, ExtractionMethod::WeakIdentity)
}

/// Unit mass on one arc of an `n`-arc unit circle.
pub fn point_mass_measure(n: usize) -> Result<BoundaryMeasure> {
    if n < 2 {
        return Err(Error::input("point-mass measure needs at least two arcs"));
    }
    let len = std::f64::consts::TAU / n as f64;
    let arcs = (0..n)
        .map(|k| BoundaryArc {
            midpoint: Vec2::polar(1.0, (k as f64 + 0.5) * len),
            length: len,
            weight: if k == 0 { 1.0 } else { 0.0 },
        })
        .collect();
    BoundaryMeasure::from_arcs(arcs, 2.0, ExtractionMethod::WeakIdentity)
}
