//! Capacitary solutions: u = 1 on the hole, u = 0 on the outer boundary,
//! minimizing Σ area·f_ε(∇u) over P1 fields by damped Newton.

mod amg;
mod diagnostics;
mod field;
mod sparse;

pub use diagnostics::{
    fundamental_inequality, harnack_diagnostic, regularization_gap, BallRatio, FundamentalInequality, HarnackReport,
    RegularizationGap,
};
pub use field::ScalarField;
pub use amg::Amg;
pub use sparse::{pcg, reverse_cuthill_mckee, Csr, Ic0, PcgOutcome, Preconditioner};

use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::integrand::{Integrand, Jet};
use crate::linalg::Vec2;

/// Below this |∇u| a triangle counts as degenerate for p > 2, where
/// D²f(0) = 0.
const DEGENERATE_GRADIENT: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Explicit ε stages; `None` selects 2^{-k} down to 1e-6 (p < 2) or
    /// 1e-8 (p > 2 with degenerate gradients), and ε = 0 otherwise.
    pub epsilon_schedule: Option<Vec<f64>>,
    pub max_newton: usize,
    /// Residual tolerance of the final stage.
    pub residual_tol: f64,
    /// Residual tolerance of intermediate stages.
    pub stage_tol: f64,
    /// Relative Newton decrement at which an intermediate stage stops early.
    pub energy_tol: f64,
    pub armijo: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub linear_tol: f64,
    pub max_linear_iterations: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            epsilon_schedule: None,
            max_newton: 100,
            residual_tol: 1e-9,
            stage_tol: 1e-5,
            energy_tol: 1e-12,
            armijo: 1e-4,
            backtrack: 0.5,
            max_backtracks: 50,
            linear_tol: 1e-10,
            max_linear_iterations: 20_000,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.epsilon_schedule {
            if s.is_empty() {
                return Err(Error::config("solve.epsilon_schedule", "must not be empty"));
            }
            if s.iter().any(|e| !(e.is_finite() && *e >= 0.0)) {
                return Err(Error::config("solve.epsilon_schedule", "entries must be finite and nonnegative"));
            }
            if s.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::config("solve.epsilon_schedule", "must be strictly decreasing"));
            }
        }
        let positive = [
            ("solve.residual_tol", self.residual_tol),
            ("solve.stage_tol", self.stage_tol),
            ("solve.linear_tol", self.linear_tol),
            ("solve.armijo", self.armijo),
            ("solve.backtrack", self.backtrack),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(name, format!("must be positive, got {v}")));
            }
        }
        if self.armijo >= 0.5 || self.backtrack >= 1.0 {
            return Err(Error::config("solve.armijo", "need armijo < 0.5 and backtrack < 1"));
        }
        if self.max_newton == 0 {
            return Err(Error::config("solve.max_newton", "must be at least 1"));
        }
        Ok(())
    }

    pub fn schedule_for(&self, f: &Integrand, start: &ScalarField) -> Vec<f64> {
        if let Some(s) = &self.epsilon_schedule {
            return s.clone();
        }
        let p = f.p();
        let degenerate = p > 2.0 && start.gradients().iter().any(|g| g.norm() < DEGENERATE_GRADIENT);
        if p >= 2.0 && !degenerate {
            return vec![0.0];
        }
        geometric_schedule(if p < 2.0 { 1e-6 } else { 1e-8 })
    }
}

/// 1, 1/2, 1/4, … while above `eps_final`, then `eps_final`.
pub fn geometric_schedule(eps_final: f64) -> Vec<f64> {
    let mut s = Vec::new();
    let mut e = 1.0;
    while e > eps_final {
        s.push(e);
        e *= 0.5;
    }
    s.push(eps_final);
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRecord {
    pub iteration: usize,
    pub epsilon: f64,
    pub energy: f64,
    pub residual: f64,
    pub step_length: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub field: ScalarField,
    pub log: Vec<ConvergenceRecord>,
    pub schedule: Vec<f64>,
}

impl SolveReport {
    pub fn log_csv(&self) -> String {
        let mut s = String::from("iteration,epsilon,energy,residual,step_length\n");
        for r in &self.log {
            let _ = writeln!(
                s,
                "{},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.iteration, r.epsilon, r.energy, r.residual, r.step_length
            );
        }
        s
    }
}

/// Σ area·f(∇w), compensated.
pub fn energy(w: &ScalarField, f: &Integrand) -> f64 {
    compensated_sum(w.gradients().iter().zip(w.mesh().areas()).map(|(g, a)| a * f.value(*g)))
}

/// Weak-form vector R_v = Σ area·⟨∇f(∇u), ∇φ_v⟩ over all vertices.
pub fn weak_form_vector(u: &ScalarField, f: &Integrand) -> Vec<f64> {
    let mesh = u.mesh();
    let mut r = vec![0.0; mesh.num_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let (_, v) = f.value_grad(u.gradients()[k]);
        let a = mesh.area(k);
        for (i, g) in tri.iter().zip(mesh.basis_gradients(k)) {
            r[*i] += a * v.dot(*g);
        }
    }
    r
}

/// Euclidean norm of the weak-form vector restricted to interior vertices.
pub fn residual(u: &ScalarField, f: &Integrand) -> f64 {
    let r = weak_form_vector(u, f);
    let mesh = u.mesh();
    r.iter().enumerate().filter(|(v, _)| mesh.vertex_tag(*v).is_none()).map(|(_, x)| x * x).sum::<f64>().sqrt()
}

pub fn gradient_field(u: &ScalarField) -> Vec<Vec2> {
    u.gradients().to_vec()
}

fn compensated_sum(it: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0_f64, 0.0_f64);
    for x in it {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

/// Free-vertex numbering (Cuthill–McKee order) and the Hessian pattern.
struct System {
    free_of: Vec<usize>,
    free_vertices: Vec<usize>,
    hessian: Csr,
    slots: Vec<[u32; 9]>,
}

const NO_SLOT: u32 = u32::MAX;

impl System {
    fn new(mesh: &Mesh) -> System {
        let n = mesh.num_vertices();
        let interior: Vec<bool> = (0..n).map(|v| mesh.vertex_tag(v).is_none()).collect();
        let mut adj = vec![Vec::new(); n];
        for t in mesh.triangles() {
            for a in 0..3 {
                for b in 0..3 {
                    if a != b && interior[t[a]] && interior[t[b]] {
                        adj[t[a]].push(t[b]);
                    }
                }
            }
        }
        for l in adj.iter_mut() {
            l.sort_unstable();
            l.dedup();
        }
        let interior_ids: Vec<usize> = (0..n).filter(|&v| interior[v]).collect();
        let mut local = vec![usize::MAX; n];
        for (k, &v) in interior_ids.iter().enumerate() {
            local[v] = k;
        }
        let sub: Vec<Vec<usize>> = interior_ids.iter().map(|&v| adj[v].iter().map(|&w| local[w]).collect()).collect();
        let order = reverse_cuthill_mckee(&sub);
        let free_vertices: Vec<usize> = order.iter().map(|&k| interior_ids[k]).collect();
        let mut free_of = vec![usize::MAX; n];
        for (k, &v) in free_vertices.iter().enumerate() {
            free_of[v] = k;
        }
        let rows: Vec<Vec<usize>> = free_vertices.iter().map(|&v| adj[v].iter().map(|&w| free_of[w]).collect()).collect();
        let hessian = Csr::from_pattern(rows);
        let slots = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut s = [NO_SLOT; 9];
                for a in 0..3 {
                    for b in 0..3 {
                        let (i, j) = (free_of[t[a]], free_of[t[b]]);
                        if i != usize::MAX && j != usize::MAX {
                            s[3 * a + b] = hessian.find(i, j).expect("pattern covers mesh edges") as u32;
                        }
                    }
                }
                s
            })
            .collect();
        System { free_of, free_vertices, hessian, slots }
    }

    fn num_free(&self) -> usize {
        self.free_vertices.len()
    }

    /// Free gradient of the energy at `state`; refills the Hessian.
    fn assemble(&mut self, mesh: &Mesh, state: &State) -> Vec<f64> {
        let mut g = vec![0.0; self.num_free()];
        self.hessian.clear();
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let a = mesh.area(k);
            let b = mesh.basis_gradients(k);
            let j = &state.jets[k];
            let hb = [j.hess.mul_vec(b[0]), j.hess.mul_vec(b[1]), j.hess.mul_vec(b[2])];
            for x in 0..3 {
                let i = self.free_of[tri[x]];
                if i == usize::MAX {
                    continue;
                }
                g[i] += a * j.grad.dot(b[x]);
                for y in 0..3 {
                    let s = self.slots[k][3 * x + y];
                    if s != NO_SLOT {
                        self.hessian.vals[s as usize] += a * b[x].dot(hb[y]);
                    }
                }
            }
        }
        g
    }
}

/// An iterate with its per-triangle derivatives of f_ε, evaluated once and
/// shared by the energy, the gradient and the Hessian.
struct State {
    values: Vec<f64>,
    jets: Vec<Jet>,
    energy: f64,
}

impl State {
    fn new(mesh: &Mesh, values: Vec<f64>, f: &Integrand) -> State {
        let jets: Vec<Jet> = field::triangle_gradients(mesh, &values).into_iter().map(|g| f.jet(g)).collect();
        let energy = compensated_sum(jets.iter().zip(mesh.areas()).map(|(j, a)| a * j.value));
        State { values, jets, energy }
    }
}

pub fn solve_capacitary(mesh: Arc<Mesh>, f: &Integrand, opts: &SolveOptions) -> Result<ScalarField> {
    solve_capacitary_with_log(mesh, f, opts).map(|r| r.field)
}

/// Harmonic initialization followed by damped Newton over the ε schedule.
pub fn solve_capacitary_with_log(mesh: Arc<Mesh>, f: &Integrand, opts: &SolveOptions) -> Result<SolveReport> {
    opts.validate()?;
    let mut sys = System::new(&mesh);
    let mut log = Vec::new();
    let start = ScalarField::boundary_data(mesh.clone());
    let dirichlet = Integrand::power(2.0)?;
    let mut values = newton_stage(&mut sys, &mesh, start.values().to_vec(), &dirichlet, 0.0, opts, opts.residual_tol, &mut Vec::new())?;
    let harmonic = ScalarField::new(mesh.clone(), values.clone())?;
    let schedule = opts.schedule_for(f, &harmonic);
    let base = f.unmollified();
    for (s, &eps) in schedule.iter().enumerate() {
        let fe = base.mollify(eps)?;
        let last = s + 1 == schedule.len();
        let tol = if last { opts.residual_tol } else { opts.stage_tol.max(opts.residual_tol) };
        values = newton_stage(&mut sys, &mesh, values, &fe, eps, opts, tol, &mut log)?;
    }
    clamp_to_unit_interval(&mut values)?;
    let field = ScalarField::new(mesh, values)?.with_epsilon(*schedule.last().unwrap_or(&0.0));
    Ok(SolveReport { field, log, schedule })
}

/// Rounding in the linear solves can leave values a hair outside [0, 1];
/// anything larger is a genuine maximum-principle failure.
fn clamp_to_unit_interval(values: &mut [f64]) -> Result<()> {
    const ROUNDING: f64 = 1e-8;
    let worst = values.iter().map(|&v| (-v).max(v - 1.0)).fold(0.0, f64::max);
    if worst > ROUNDING {
        return Err(Error::Numerical { message: "solution violates the maximum principle".into(), residual: worst });
    }
    values.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(())
}

/// PCG with an AMG V-cycle, falling back to IC(0) when the hierarchy cannot
/// be built or the iteration stalls.
fn linear_solve(a: &Csr, b: &[f64], x: &mut [f64], opts: &SolveOptions) -> PcgOutcome {
    if let Some(amg) = amg::Amg::new(a) {
        let out = pcg(a, &amg, b, x, opts.linear_tol, opts.max_linear_iterations.min(500));
        if out.converged {
            return out;
        }
    }
    let (pre, _) = Ic0::new(a);
    pcg(a, &pre, b, x, opts.linear_tol, opts.max_linear_iterations)
}

#[allow(clippy::too_many_arguments)]
fn newton_stage(
    sys: &mut System,
    mesh: &Mesh,
    values: Vec<f64>,
    f: &Integrand,
    eps: f64,
    opts: &SolveOptions,
    tol: f64,
    log: &mut Vec<ConvergenceRecord>,
) -> Result<Vec<f64>> {
    let final_stage = tol <= opts.residual_tol;
    let mut state = State::new(mesh, values, f);
    let mut history = Vec::new();
    let mut step = 0.0;
    let n = sys.num_free();
    let mut d = vec![0.0; n];
    for it in 0..=opts.max_newton {
        let g = sys.assemble(mesh, &state);
        let res = sparse::norm(&g);
        history.push(res);
        log.push(ConvergenceRecord { iteration: log.len(), epsilon: eps, energy: state.energy, residual: res, step_length: step });
        if res <= tol {
            return Ok(state.values);
        }
        if it == opts.max_newton {
            break;
        }
        let rhs: Vec<f64> = g.iter().map(|x| -x).collect();
        let mut accepted = false;
        let mut mu = 0.0;
        for _attempt in 0..8 {
            if mu > 0.0 {
                // Levenberg damping on a freshly assembled Hessian.
                sys.assemble(mesh, &state);
                let diag = sys.hessian.diagonal();
                sys.hessian.add_to_diagonal(&diag.iter().map(|x| mu * x).collect::<Vec<_>>());
            }
            let out = linear_solve(&sys.hessian, &rhs, &mut d, opts);
            let slope = sparse::dot(&g, &d);
            if out.converged && slope < 0.0 {
                let decrement = -slope;
                if !final_stage && 0.5 * decrement <= opts.energy_tol * state.energy.abs().max(1e-300) {
                    return Ok(state.values);
                }
                if let Some((alpha, next)) = line_search(sys, mesh, &state, &d, f, slope, opts) {
                    step = alpha;
                    state = next;
                    accepted = true;
                    break;
                }
            }
            mu = if mu == 0.0 { 1e-6 } else { mu * 100.0 };
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NewtonDivergence {
        epsilon: eps,
        iterations: history.len(),
        last_residual: *history.last().unwrap_or(&f64::NAN),
        residual_history: history,
        iterate: state.values,
    })
}

/// Armijo backtracking from α = 1.
fn line_search(
    sys: &System,
    mesh: &Mesh,
    state: &State,
    d: &[f64],
    f: &Integrand,
    slope: f64,
    opts: &SolveOptions,
) -> Option<(f64, State)> {
    // Tolerated rounding in energy comparisons.
    const SLACK: f64 = 1e-12;
    let mut alpha = 1.0;
    for _ in 0..opts.max_backtracks {
        let mut nv = state.values.clone();
        for (k, &v) in sys.free_vertices.iter().enumerate() {
            nv[v] += alpha * d[k];
        }
        let next = State::new(mesh, nv, f);
        if next.energy.is_finite() && next.energy <= state.energy + opts.armijo * alpha * slope + SLACK {
            return Some((alpha, next));
        }
        alpha *= opts.backtrack;
    }
    None
}
