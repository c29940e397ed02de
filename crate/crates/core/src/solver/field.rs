use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{BoundaryTag, Mesh};
use crate::linalg::Vec2;

/// Nodal values of a continuous piecewise-linear function on a mesh, with the
/// exact per-triangle gradient.
#[derive(Debug, Clone)]
pub struct ScalarField {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
    gradients: Vec<Vec2>,
    epsilon: f64,
}

impl ScalarField {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<ScalarField> {
        if values.len() != mesh.num_vertices() {
            return Err(Error::input(format!(
                "field has {} values for a mesh with {} vertices",
                values.len(),
                mesh.num_vertices()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("field has non-finite values"));
        }
        let gradients = triangle_gradients(&mesh, &values);
        Ok(ScalarField { mesh, values, gradients, epsilon: 0.0 })
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Vec2) -> f64) -> Result<ScalarField> {
        let values = mesh.vertices().iter().map(|&z| f(z)).collect();
        ScalarField::new(mesh, values)
    }

    /// Value of the piecewise-linear interpolant at z, or `None` outside the
    /// mesh. Linear scan over triangles.
    pub fn interpolate(&self, z: Vec2) -> Option<f64> {
        const SLOP: f64 = 1e-12;
        let verts = self.mesh.vertices();
        self.mesh.triangles().iter().find_map(|t| {
            let [a, b, c] = t.map(|i| verts[i]);
            let det = (b - a).cross(c - a);
            let l1 = (z - a).cross(c - a) / det;
            let l2 = (b - a).cross(z - a) / det;
            let l0 = 1.0 - l1 - l2;
            (l0 >= -SLOP && l1 >= -SLOP && l2 >= -SLOP)
                .then(|| l0 * self.values[t[0]] + l1 * self.values[t[1]] + l2 * self.values[t[2]])
        })
    }

    /// Capacitary boundary data (1 on the hole, 0 outside) with zero interior.
    pub fn boundary_data(mesh: Arc<Mesh>) -> ScalarField {
        let values = (0..mesh.num_vertices())
            .map(|v| if mesh.vertex_tag(v) == Some(BoundaryTag::Inner) { 1.0 } else { 0.0 })
            .collect();
        ScalarField::new(mesh, values).expect("boundary data is finite")
    }

    pub(crate) fn with_epsilon(mut self, epsilon: f64) -> ScalarField {
        self.epsilon = epsilon;
        self
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// ∇u on each triangle.
    pub fn gradients(&self) -> &[Vec2] {
        &self.gradients
    }

    /// Mollification radius of the final solve stage; 0 when unregularized.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn centroid_value(&self, t: usize) -> f64 {
        self.mesh.triangles()[t].iter().map(|&i| self.values[i]).sum::<f64>() / 3.0
    }

    /// Largest violation of 0 ≤ u ≤ 1 and of the boundary values.
    pub fn boundary_and_range_violation(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, &x) in self.values.iter().enumerate() {
            worst = worst.max(-x).max(x - 1.0);
            match self.mesh.vertex_tag(v) {
                Some(BoundaryTag::Outer) => worst = worst.max(x.abs()),
                Some(BoundaryTag::Inner) => worst = worst.max((x - 1.0).abs()),
                None => {}
            }
        }
        worst
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(26 * self.values.len() + 128);
        let _ = writeln!(s, "# mesh_checksum {}", self.mesh.checksum());
        let _ = writeln!(s, "# epsilon {:.16e}", self.epsilon);
        for v in &self.values {
            let _ = writeln!(s, "{v:.16e}");
        }
        s
    }

    /// Parses a field file, refusing it unless its mesh checksum matches.
    pub fn from_text(text: &str, mesh: Arc<Mesh>) -> Result<ScalarField> {
        let mut checksum = None;
        let mut epsilon = 0.0;
        let mut values = Vec::with_capacity(mesh.num_vertices());
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            if let Some(c) = line.strip_prefix('#') {
                let kv: Vec<&str> = c.split_whitespace().collect();
                match kv.as_slice() {
                    ["mesh_checksum", h] => checksum = Some(h.to_string()),
                    ["epsilon", e] => epsilon = e.parse().map_err(|_| Error::Parse(format!("bad epsilon '{e}'")))?,
                    _ => {}
                }
            } else {
                values.push(line.parse::<f64>().map_err(|_| Error::Parse(format!("bad field value '{line}'")))?);
            }
        }
        let expected = mesh.checksum();
        match checksum {
            Some(h) if h == expected => {}
            Some(h) => {
                return Err(Error::Consistency(format!("field was computed on mesh {h}, not {expected}")));
            }
            None => return Err(Error::Consistency("field file has no mesh checksum".into())),
        }
        Ok(ScalarField::new(mesh, values)?.with_epsilon(epsilon))
    }

    pub fn checksum(&self) -> String {
        crate::geometry::hex_digest(self.to_text().as_bytes())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn read(path: &Path, mesh: Arc<Mesh>) -> Result<ScalarField> {
        ScalarField::from_text(&std::fs::read_to_string(path)?, mesh)
    }
}

pub(crate) fn triangle_gradients(mesh: &Mesh, values: &[f64]) -> Vec<Vec2> {
    mesh.triangles()
        .iter()
        .enumerate()
        .map(|(k, t)| {
            let g = mesh.basis_gradients(k);
            g[0] * values[t[0]] + g[1] * values[t[1]] + g[2] * values[t[2]]
        })
        .collect()
}
