//! The boundary measure μ of a capacitary field, ball masses, level-set flux
//! and the measure–solution comparison.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{extract_level_curve, BoundaryTag};
use crate::integrand::Integrand;
use crate::linalg::Vec2;
use crate::solver::{weak_form_vector, ScalarField};

/// Clamped negative mass above this fraction of the total means the field is
/// under-resolved.
pub const CLAMP_LIMIT: f64 = 0.01;
/// Gradients below this magnitude are dropped from line integrals.
pub const DEGENERATE_GRADIENT: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionMethod {
    WeakIdentity,
    LevelLimit,
}

impl ExtractionMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            ExtractionMethod::WeakIdentity => "weak-identity",
            ExtractionMethod::LevelLimit => "level-limit",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "weak-identity" => Ok(ExtractionMethod::WeakIdentity),
            "level-limit" => Ok(ExtractionMethod::LevelLimit),
            _ => Err(Error::Parse(format!("unknown extraction method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    pub midpoint: Vec2,
    pub length: f64,
    pub weight: f64,
}

/// Weights on the outer boundary edges, in counterclockwise order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMeasure {
    pub arcs: Vec<BoundaryArc>,
    pub total_mass: f64,
    pub p: f64,
    pub field_checksum: String,
    pub method: ExtractionMethod,
    /// Total negative weight removed by clamping.
    pub clamp_total: f64,
    /// Most negative arc weight before clamping.
    pub min_raw_weight: f64,
}

impl BoundaryMeasure {
    /// Measure with the given arcs; weights must be nonnegative.
    pub fn from_arcs(arcs: Vec<BoundaryArc>, p: f64, method: ExtractionMethod) -> Result<BoundaryMeasure> {
        if arcs.iter().any(|a| !(a.weight >= 0.0 && a.weight.is_finite() && a.length > 0.0)) {
            return Err(Error::input("arc weights must be finite and nonnegative, lengths positive"));
        }
        let total_mass = arcs.iter().map(|a| a.weight).sum();
        let min_raw_weight = arcs.iter().map(|a| a.weight).fold(f64::INFINITY, f64::min);
        Ok(BoundaryMeasure {
            arcs,
            total_mass,
            p,
            field_checksum: String::new(),
            method,
            clamp_total: 0.0,
            min_raw_weight,
        })
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    /// Multiplies every weight by `factor`.
    pub fn scaled(&self, factor: f64) -> BoundaryMeasure {
        let mut m = self.clone();
        m.arcs.iter_mut().for_each(|a| a.weight *= factor);
        m.total_mass *= factor;
        m.clamp_total *= factor;
        m.min_raw_weight *= factor;
        m
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(96 * (self.arcs.len() + 8));
        let _ = writeln!(s, "# total_mass {:.16e}", self.total_mass);
        let _ = writeln!(s, "# field_checksum {}", self.field_checksum);
        let _ = writeln!(s, "# method {}", self.method.as_str());
        let _ = writeln!(s, "# clamp_total {:.16e}", self.clamp_total);
        let _ = writeln!(s, "# min_raw_weight {:.16e}", self.min_raw_weight);
        let _ = writeln!(s, "# p {:.16e}", self.p);
        s.push_str("arc_index,midpoint_x,midpoint_y,arc_length,weight\n");
        for (i, a) in self.arcs.iter().enumerate() {
            let _ = writeln!(s, "{i},{:.16e},{:.16e},{:.16e},{:.16e}", a.midpoint.x, a.midpoint.y, a.length, a.weight);
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<BoundaryMeasure> {
        let perr = |m: String| Error::Parse(format!("measure csv: {m}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| perr(format!("bad number '{s}'")));
        let mut m = BoundaryMeasure {
            arcs: Vec::new(),
            total_mass: f64::NAN,
            p: f64::NAN,
            field_checksum: String::new(),
            method: ExtractionMethod::WeakIdentity,
            clamp_total: 0.0,
            min_raw_weight: 0.0,
        };
        let mut header_seen = false;
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(c) = line.strip_prefix('#') {
                let kv: Vec<&str> = c.split_whitespace().collect();
                match kv.as_slice() {
                    ["total_mass", v] => m.total_mass = num(v)?,
                    ["field_checksum", v] => m.field_checksum = v.to_string(),
                    ["method", v] => m.method = ExtractionMethod::parse(v)?,
                    ["clamp_total", v] => m.clamp_total = num(v)?,
                    ["min_raw_weight", v] => m.min_raw_weight = num(v)?,
                    ["p", v] => m.p = num(v)?,
                    _ => {}
                }
            } else if !header_seen {
                if line != "arc_index,midpoint_x,midpoint_y,arc_length,weight" {
                    return Err(perr(format!("unexpected header '{line}'")));
                }
                header_seen = true;
            } else {
                let f: Vec<&str> = line.split(',').collect();
                if f.len() != 5 {
                    return Err(perr(format!("expected 5 columns in '{line}'")));
                }
                m.arcs.push(BoundaryArc {
                    midpoint: Vec2::new(num(f[1])?, num(f[2])?),
                    length: num(f[3])?,
                    weight: num(f[4])?,
                });
            }
        }
        if !m.total_mass.is_finite() || !m.p.is_finite() {
            return Err(perr("missing total_mass or p".into()));
        }
        Ok(m)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<BoundaryMeasure> {
        BoundaryMeasure::from_csv(&std::fs::read_to_string(path)?)
    }
}

/// Outer boundary arcs of the field's mesh with the oriented edge data:
/// (start vertex, end vertex, midpoint, length), counterclockwise.
fn outer_arcs(u: &ScalarField) -> Vec<(usize, usize, Vec2, f64)> {
    let mesh = u.mesh();
    let order = mesh.outer_loop();
    let n = order.len();
    (0..n)
        .map(|i| {
            let (a, b) = (order[i], order[(i + 1) % n]);
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            (a, b, (pa + pb) * 0.5, pa.dist(pb))
        })
        .collect()
}

/// Tests the weak identity with the hat function of each outer vertex:
/// W_v = −Σ area·⟨∇f(∇u), ∇φ_v⟩ / p. The factor 1/p makes the density
/// f(∇u)/|∇u| on smooth boundaries, matching the level-set flux. Vertex
/// weights are shared between the two adjacent arcs in proportion to
/// their lengths.
pub fn boundary_measure(u: &ScalarField, f: &Integrand) -> Result<BoundaryMeasure> {
    let fe = f.unmollified().mollify(u.epsilon())?;
    let r = weak_form_vector(u, &fe);
    let arcs = outer_arcs(u);
    let n = arcs.len();
    if n == 0 {
        return Err(Error::Mesh("mesh has no outer boundary".into()));
    }
    let p = f.p();
    let mut raw = vec![0.0; n];
    for i in 0..n {
        let prev = (i + n - 1) % n;
        let (a, _, _, len) = arcs[i];
        let w = -r[a] / p;
        let (lp, l) = (arcs[prev].3, len);
        raw[prev] += w * lp / (lp + l);
        raw[i] += w * l / (lp + l);
    }
    finish(u, raw, &arcs, p, ExtractionMethod::WeakIdentity)
}

/// Arc weight = (f(∇u)/|∇u|)·length on the triangle owning each outer edge;
/// the t → 0 limit of the level-set density.
pub fn boundary_measure_level_limit(u: &ScalarField, f: &Integrand) -> Result<BoundaryMeasure> {
    let mesh = u.mesh();
    let mut owner = std::collections::HashMap::new();
    for (k, t) in mesh.triangles().iter().enumerate() {
        for e in 0..3 {
            owner.insert((t[e], t[(e + 1) % 3]), k);
        }
    }
    let arcs = outer_arcs(u);
    let base = f.unmollified();
    let raw = arcs
        .iter()
        .map(|&(a, b, _, len)| {
            let g = u.gradients()[owner[&(a, b)]];
            let n = g.norm();
            if n < DEGENERATE_GRADIENT {
                0.0
            } else {
                base.value(g) / n * len
            }
        })
        .collect();
    finish(u, raw, &arcs, f.p(), ExtractionMethod::LevelLimit)
}

fn finish(
    u: &ScalarField,
    raw: Vec<f64>,
    arcs: &[(usize, usize, Vec2, f64)],
    p: f64,
    method: ExtractionMethod,
) -> Result<BoundaryMeasure> {
    let min_raw_weight = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let clamp_total: f64 = raw.iter().filter(|w| **w < 0.0).map(|w| -w).sum::<f64>() + 0.0;
    let arcs: Vec<BoundaryArc> = arcs
        .iter()
        .zip(&raw)
        .map(|(&(_, _, midpoint, length), &w)| BoundaryArc { midpoint, length, weight: w.max(0.0) })
        .collect();
    let total_mass: f64 = arcs.iter().map(|a| a.weight).sum();
    if !(total_mass > 0.0) || clamp_total > CLAMP_LIMIT * total_mass {
        return Err(Error::MeasureExtraction { clamped: clamp_total, limit: CLAMP_LIMIT * total_mass });
    }
    Ok(BoundaryMeasure { arcs, total_mass, p, field_checksum: u.checksum(), method, clamp_total, min_raw_weight })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxReport {
    pub level: f64,
    pub flux: f64,
    /// Length of level-curve segments dropped for degenerate gradients.
    pub dropped_length: f64,
}

/// I₀(t) = ∫_{u=t} f(∇u)/|∇u| dH¹ by per-segment midpoint quadrature.
pub fn level_flux(u: &ScalarField, f: &Integrand, t: f64) -> Result<f64> {
    level_flux_report(u, f, t).map(|r| r.flux)
}

pub fn level_flux_report(u: &ScalarField, f: &Integrand, t: f64) -> Result<FluxReport> {
    let curve = extract_level_curve(u, t)?;
    let base = f.unmollified();
    let (mut flux, mut dropped) = (0.0, 0.0);
    for c in &curve.components {
        for (a, b, tri) in c.segments() {
            let g = u.gradients()[tri];
            let n = g.norm();
            let len = a.dist(b);
            if n < DEGENERATE_GRADIENT {
                dropped += len;
            } else {
                flux += base.value(g) / n * len;
            }
        }
    }
    Ok(FluxReport { level: curve.level, flux, dropped_length: dropped })
}

/// μ(B(w, r)) by arc midpoints.
pub fn measure_ball(mu: &BoundaryMeasure, w: Vec2, r: f64) -> f64 {
    let r2 = r * r;
    mu.arcs.iter().filter(|a| a.midpoint.dist(w).powi(2) < r2).map(|a| a.weight).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparabilityReport {
    pub center: Vec2,
    pub radius: f64,
    /// sup over nodes in B(w, r) of u^{p−1}.
    pub sup_u: f64,
    pub mass_half: f64,
    pub mass_double: f64,
    /// sup u^{p−1} / (r^{p−2} μ(B(w, r/2))).
    pub lower_ratio: f64,
    /// sup u^{p−1} / (r^{p−2} μ(B(w, 2r))).
    pub upper_ratio: f64,
}

/// Both sides of the comparison between sup u^{p−1} on B(w, r) and the mass
/// of the concentric balls of radius r/2 and 2r.
pub fn check_measure_solution_comparability(
    u: &ScalarField,
    mu: &BoundaryMeasure,
    w: Vec2,
    r: f64,
) -> Result<ComparabilityReport> {
    if !(r > 0.0) {
        return Err(Error::input("radius must be positive"));
    }
    let mesh = u.mesh();
    let p = mu.p;
    let sup = mesh
        .vertices()
        .iter()
        .zip(u.values())
        .enumerate()
        .filter(|(v, (z, _))| z.dist(w) <= r && mesh.vertex_tag(*v) != Some(BoundaryTag::Inner))
        .map(|(_, (_, &x))| x)
        .fold(0.0, f64::max)
        .powf(p - 1.0);
    let mass_half = measure_ball(mu, w, r / 2.0);
    let mass_double = measure_ball(mu, w, 2.0 * r);
    if mass_double <= 0.0 || mass_half <= 0.0 {
        return Err(Error::Numerical {
            message: format!("degenerate ball at ({}, {}) radius {r}: no mass", w.x, w.y),
            residual: mass_half,
        });
    }
    let scale = r.powf(p - 2.0);
    Ok(ComparabilityReport {
        center: w,
        radius: r,
        sup_u: sup,
        mass_half,
        mass_double,
        lower_ratio: sup / (scale * mass_half),
        upper_ratio: sup / (scale * mass_double),
    })
}

#[cfg(test)]
mod tests;
