//! Log-density of the gradient, level-set moment integrals and their bound
//! fit, the exceptional-set flux, the gauge λ(r), winding numbers of u_z
//! along level curves, and dimension estimators for boundary measures.

mod dimension;
mod regression;

pub use dimension::{
    box_dimension, cantor_dust_measure, default_radius_grid, gauge_comparison, information_dimension,
    local_dimension, mass_quantile_centers, mass_quantile_centers_from, measure_diameter, point_mass_measure, CenterDimension, CenterGauge,
    DimensionReport, GaugeComparison, GaugeCounts, Trend, DEFAULT_CENTERS, FLAT_SLOPE, MIN_RADII,
};
pub use regression::{fit_line, LineFit};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{extract_level_curve, LevelCurve};
use crate::integrand::Integrand;
use crate::measure::DEGENERATE_GRADIENT;
use crate::solver::ScalarField;

/// Which truncation of v feeds w.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// w = max(v, 0), the 1 < p ≤ 2 branch.
    Positive,
    /// w = max(−v, 0), the 2 ≤ p < ∞ branch.
    Negative,
}

impl Branch {
    /// Branches defined for exponent p; both at p = 2.
    pub fn for_p(p: f64) -> Vec<Branch> {
        if p < 2.0 {
            vec![Branch::Positive]
        } else if p > 2.0 {
            vec![Branch::Negative]
        } else {
            vec![Branch::Positive, Branch::Negative]
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Positive => "positive",
            Branch::Negative => "negative",
        }
    }
}

/// Per-triangle v = log f(∇u), w and g = max(w − c′, 0).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogDensityField {
    pub branch: Branch,
    /// −∞ on triangles with degenerate gradient.
    pub v: Vec<f64>,
    pub w: Vec<f64>,
    pub g: Vec<f64>,
    pub c_prime: f64,
    /// Area of triangles with |∇u| below the degeneracy threshold.
    pub excluded_area: f64,
}

impl LogDensityField {
    pub fn valid(&self, k: usize) -> bool {
        self.v[k] > f64::NEG_INFINITY
    }
}

/// v, w and g on every triangle. Without `c_prime`, c′ is the largest w on
/// triangles meeting B(0, 2) so that g vanishes there.
pub fn log_density(u: &ScalarField, f: &Integrand, branch: Branch, c_prime: Option<f64>) -> Result<LogDensityField> {
    let p = f.p();
    if (branch == Branch::Positive && p > 2.0) || (branch == Branch::Negative && p < 2.0) {
        return Err(Error::input(format!("branch {} is not defined for p = {p}", branch.as_str())));
    }
    if let Some(c) = c_prime {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::input(format!("c′ must be finite and ≥ 0, got {c}")));
        }
    }
    let mesh = u.mesh();
    let base = f.unmollified();
    let mut excluded_area = 0.0;
    let v: Vec<f64> = u
        .gradients()
        .iter()
        .enumerate()
        .map(|(k, g)| {
            if g.norm() < DEGENERATE_GRADIENT {
                excluded_area += mesh.area(k);
                f64::NEG_INFINITY
            } else {
                base.value(*g).ln()
            }
        })
        .collect();
    let w: Vec<f64> = v
        .iter()
        .map(|&x| {
            if x == f64::NEG_INFINITY {
                0.0
            } else {
                match branch {
                    Branch::Positive => x.max(0.0),
                    Branch::Negative => (-x).max(0.0),
                }
            }
        })
        .collect();
    let c_prime = c_prime.unwrap_or_else(|| {
        mesh.triangles()
            .iter()
            .enumerate()
            .filter(|(_, t)| t.iter().any(|&i| mesh.vertices()[i].norm() < 2.0))
            .map(|(k, _)| w[k])
            .fold(0.0, f64::max)
    });
    let g = w.iter().map(|x| (x - c_prime).max(0.0)).collect();
    Ok(LogDensityField { branch, v, w, g, c_prime, excluded_area })
}

/// Which weight enters the moment integrand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weight {
    W,
    G,
}

/// log of I_m(t) = ∫_{u=t} f(∇u)/|∇u| · w^{2m} dH¹; −∞ when the integral
/// vanishes. Terms are combined by log-sum-exp for m ≥ 3.
pub fn moment_log(u: &ScalarField, f: &Integrand, ld: &LogDensityField, t: f64, m: u32, weight: Weight) -> Result<f64> {
    let curve = extract_level_curve(u, t)?;
    Ok(moment_log_on(&curve, u, f, ld, m, weight))
}

pub fn moment_integral(u: &ScalarField, f: &Integrand, ld: &LogDensityField, t: f64, m: u32) -> Result<f64> {
    moment_log(u, f, ld, t, m, Weight::W).map(f64::exp)
}

fn moment_log_on(curve: &LevelCurve, u: &ScalarField, f: &Integrand, ld: &LogDensityField, m: u32, weight: Weight) -> f64 {
    let base = f.unmollified();
    let vals = match weight {
        Weight::W => &ld.w,
        Weight::G => &ld.g,
    };
    // (log of density·length, weight) per valid segment.
    let terms = curve.components.iter().flat_map(|c| c.segments()).filter_map(|(a, b, k)| {
        let grad = u.gradients()[k];
        let n = grad.norm();
        (ld.valid(k) && n >= DEGENERATE_GRADIENT).then(|| ((base.value(grad) / n * a.dist(b)).ln(), vals[k]))
    });
    if m < 3 {
        let s: f64 = terms.map(|(ld, x)| ld.exp() * x.powi(2 * m as i32)).sum();
        return s.ln();
    }
    let logs: Vec<f64> = terms.filter(|(_, x)| *x > 0.0).map(|(l, x)| l + 2.0 * m as f64 * x.ln()).collect();
    log_sum_exp(&logs)
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return top;
    }
    top + xs.iter().map(|x| (x - top).exp()).sum::<f64>().ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub t: f64,
    pub m: u32,
    pub log_i: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub rows: Vec<MomentRow>,
}

impl MomentTable {
    /// I_m(t) for every t in `ts` and m in 0..=m_max, one level curve per t.
    pub fn compute(u: &ScalarField, f: &Integrand, ld: &LogDensityField, ts: &[f64], m_max: u32) -> Result<MomentTable> {
        let mut rows = Vec::with_capacity(ts.len() * (m_max as usize + 1));
        for &t in ts {
            let curve = extract_level_curve(u, t)?;
            for m in 0..=m_max {
                rows.push(MomentRow { t, m, log_i: moment_log_on(&curve, u, f, ld, m, Weight::W) });
            }
        }
        Ok(MomentTable { rows })
    }

    pub fn get(&self, t: f64, m: u32) -> Option<f64> {
        self.rows.iter().find(|r| r.t == t && r.m == m).map(|r| r.log_i)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,m,log_I_m\n");
        for r in &self.rows {
            let _ = writeln!(s, "{:.16e},{},{:.16e}", r.t, r.m, r.log_i);
        }
        s
    }
}

/// Bracketed quantity [log I_m − log m! − m·log log(1/t)]/(m + 1).
pub fn moment_bracket(row: &MomentRow) -> f64 {
    (row.log_i - ln_factorial(row.m) - row.m as f64 * (1.0 / row.t).ln().ln()) / (row.m as f64 + 1.0)
}

fn ln_factorial(m: u32) -> f64 {
    (2..=m).map(|k| (k as f64).ln()).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentFit {
    pub c_star_hat: f64,
    /// Largest excess, in log units, of any row (m = 0 included) over
    /// c^{m+1} m! (log 1/t)^m with c = c_star_hat.
    pub max_violation: f64,
    /// Least-squares slope of the bracket against m (m ≥ 1), per t.
    pub slopes: Vec<(f64, f64)>,
    pub max_abs_slope: f64,
    /// Bracket value per row with I_m > 0.
    pub brackets: Vec<(f64, u32, f64)>,
}

/// c_star_hat = exp(max bracket over rows with m ≥ 1 and I_m > 0), falling
/// back to the m = 0 rows when every higher moment vanishes.
pub fn moment_bound_fit(table: &MomentTable) -> Result<MomentFit> {
    let usable: Vec<&MomentRow> = table.rows.iter().filter(|r| r.log_i.is_finite()).collect();
    if usable.iter().any(|r| !(r.t > 0.0 && r.t < 1.0)) {
        return Err(Error::input("moment fit needs every t in (0, 1) so that log log(1/t) is defined"));
    }
    let brackets: Vec<(f64, u32, f64)> = usable.iter().map(|r| (r.t, r.m, moment_bracket(r))).collect();
    let higher = brackets.iter().filter(|b| b.1 >= 1).map(|b| b.2).fold(f64::NEG_INFINITY, f64::max);
    let lead = if higher.is_finite() {
        higher
    } else {
        brackets.iter().map(|b| b.2).fold(f64::NEG_INFINITY, f64::max)
    };
    if !lead.is_finite() {
        return Err(Error::input("moment table has no positive rows"));
    }
    let max_violation = brackets.iter().map(|b| ((b.2 - lead) * (b.1 as f64 + 1.0)).max(0.0)).fold(0.0, f64::max);
    let mut ts: Vec<f64> = brackets.iter().map(|b| b.0).collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut slopes = Vec::new();
    for t in ts {
        let pts: Vec<(f64, f64)> = brackets.iter().filter(|b| b.0 == t && b.1 >= 1).map(|b| (b.1 as f64, b.2)).collect();
        if pts.len() >= 2 {
            let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
            let y: Vec<f64> = pts.iter().map(|p| p.1).collect();
            slopes.push((t, fit_line(&x, &y, None).slope));
        }
    }
    let max_abs_slope = slopes.iter().map(|s| s.1.abs()).fold(0.0, f64::max);
    Ok(MomentFit { c_star_hat: lead.exp(), max_violation, slopes, max_abs_slope, brackets })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaugeSign {
    /// λ(r) = r·exp(+A𝔇(r)), 1 < p ≤ 2.
    Plus,
    /// λ(r) = r·exp(−A𝔇(r)), 2 ≤ p < ∞.
    Minus,
}

impl GaugeSign {
    pub fn for_p(p: f64) -> Vec<GaugeSign> {
        if p < 2.0 {
            vec![GaugeSign::Plus]
        } else if p > 2.0 {
            vec![GaugeSign::Minus]
        } else {
            vec![GaugeSign::Plus, GaugeSign::Minus]
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GaugeSign::Plus => "plus",
            GaugeSign::Minus => "minus",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaugeFunction {
    pub a: f64,
    pub sign: GaugeSign,
    pub c_star: f64,
}

/// Upper end of the range where log log(1/r) ≥ 1 stays well defined.
pub const GAUGE_MAX_RADIUS: f64 = 0.1353352832366127; // e⁻²

impl GaugeFunction {
    pub fn new(a: f64, sign: GaugeSign, c_star: f64) -> Result<GaugeFunction> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(Error::input(format!("gauge A must be finite and ≥ 0 (the sign carries direction), got {a}")));
        }
        if !(c_star.is_finite() && c_star >= 1.0) {
            return Err(Error::input(format!("c_* must be finite and ≥ 1, got {c_star}")));
        }
        Ok(GaugeFunction { a, sign, c_star })
    }

    /// 𝔇(r) = √(4 c_* log(1/r) log log(1/r)).
    pub fn big_d(&self, r: f64) -> Result<f64> {
        check_gauge_radius(r)?;
        Ok(big_d(self.c_star, r))
    }
}

fn check_gauge_radius(r: f64) -> Result<()> {
    if !(r > 0.0 && r < GAUGE_MAX_RADIUS) {
        return Err(Error::input(format!("gauge radius must lie in (0, e⁻²), got {r}")));
    }
    Ok(())
}

fn big_d(c_star: f64, r: f64) -> f64 {
    let l = (1.0 / r).ln();
    (4.0 * c_star * l * l.ln()).sqrt()
}

/// λ(r) = r·exp(±A𝔇(r)) for r in (0, e⁻²).
pub fn gauge_value(gauge: &GaugeFunction, r: f64) -> Result<f64> {
    let d = gauge.big_d(r)?;
    let s = match gauge.sign {
        GaugeSign::Plus => 1.0,
        GaugeSign::Minus => -1.0,
    };
    Ok(r * (s * gauge.a * d).exp())
}

/// ∫ f(∇u)/|∇u| dH¹ over the part of {u = t} where w ≥ 𝔇(t), with c_* from
/// the gauge.
pub fn exceptional_flux(u: &ScalarField, f: &Integrand, ld: &LogDensityField, t: f64, gauge: &GaugeFunction) -> Result<f64> {
    let threshold = gauge.big_d(t)?;
    let curve = extract_level_curve(u, t)?;
    let base = f.unmollified();
    let mut flux = 0.0;
    for (a, b, k) in curve.components.iter().flat_map(|c| c.segments()) {
        let grad = u.gradients()[k];
        let n = grad.norm();
        if ld.valid(k) && n >= DEGENERATE_GRADIENT && ld.w[k] >= threshold {
            flux += base.value(grad) / n * a.dist(b);
        }
    }
    Ok(flux)
}

/// Gradients at or below this magnitude make the phase of u_z undefined.
pub const WINDING_MIN_GRADIENT: f64 = 1e-12;

/// Total change of arg u_z / 2π around each component, u_z = u_x − i·u_y,
/// following the counterclockwise orientation of the level curve.
pub fn winding_number(curve: &LevelCurve) -> Result<Vec<i64>> {
    let mut out = Vec::with_capacity(curve.components.len());
    for (ci, c) in curve.components.iter().enumerate() {
        if c.is_empty() {
            continue;
        }
        for (i, g) in c.gradients.iter().enumerate() {
            if !(g.norm() > WINDING_MIN_GRADIENT) {
                return Err(Error::Uncertifiable { component: ci, vertex: i, magnitude: g.norm() });
            }
        }
        let phase = |i: usize| (-c.gradients[i].y).atan2(c.gradients[i].x);
        let n = c.len();
        let mut total = 0.0;
        for i in 0..n {
            let mut d = phase((i + 1) % n) - phase(i);
            d -= std::f64::consts::TAU * (d / std::f64::consts::TAU).round();
            total += d;
        }
        out.push((total / std::f64::consts::TAU).round() as i64);
    }
    Ok(out)
}

/// Winding numbers of u_z on the level curve at each t.
pub fn winding_sweep(u: &ScalarField, ts: &[f64]) -> Result<Vec<(f64, Vec<i64>)>> {
    ts.iter().map(|&t| Ok((t, winding_number(&extract_level_curve(u, t)?)?))).collect()
}

#[cfg(test)]
mod tests;
