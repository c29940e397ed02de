//! C ABI over `fharm-core`.
//!
//! Objects are opaque heap handles created by `fharm_*_new`/constructor
//! functions and released with the matching `fharm_*_free`. Every fallible
//! call returns a [`FharmStatus`]; on failure the message is available from
//! [`fharm_last_error_message`] on the same thread until the next failing
//! call. Outputs are written through caller-provided pointers only on
//! success.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use fharm_core::analysis::{self, GaugeFunction, GaugeSign};
use fharm_core::geometry::{self, DomainSpec, Mesh};
use fharm_core::measure::{self, BoundaryMeasure};
use fharm_core::solver::{self, ScalarField, SolveOptions};
use fharm_core::{Error, Integrand, Mat2, Vec2};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FharmStatus {
    Ok = 0,
    InvalidInput = 1,
    Config = 2,
    Numerical = 3,
    Consistency = 4,
    NullPointer = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

impl From<&Error> for FharmStatus {
    fn from(e: &Error) -> Self {
        match fharm_core::cli::exit_code(e) {
            2 if matches!(e, Error::InvalidInput(_)) => FharmStatus::InvalidInput,
            2 => FharmStatus::Config,
            3 => FharmStatus::Numerical,
            _ => FharmStatus::Consistency,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

/// Runs `f`, mapping errors and panics to a status and the last-error slot.
fn guard(f: impl FnOnce() -> Result<(), FharmStatus>) -> FharmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FharmStatus::Ok,
        Ok(Err(s)) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            FharmStatus::Panic
        }
    }
}

fn fail(e: Error) -> FharmStatus {
    let s = FharmStatus::from(&e);
    set_error(e.to_string());
    s
}

fn null(name: &str) -> FharmStatus {
    set_error(format!("`{name}` is null"));
    FharmStatus::NullPointer
}

/// Borrows a handle, failing on null.
///
/// # Safety
/// `p` must be null or a live handle of type `T` created by this library.
unsafe fn handle<'a, T>(p: *const T, name: &str) -> Result<&'a T, FharmStatus> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, FharmStatus> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], FharmStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn fharm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fharm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Opaque integrand f.
pub struct FharmIntegrand(Integrand);
/// Opaque triangulated ring domain.
pub struct FharmMesh(Arc<Mesh>);
/// Opaque P1 field on a mesh.
pub struct FharmField(ScalarField);
/// Opaque boundary measure.
pub struct FharmMeasure(BoundaryMeasure);

/// f(η) = |η|^p.
///
/// # Safety
/// `out_handle` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_power(p: f64, out_handle: *mut *mut FharmIntegrand) -> FharmStatus {
    guard(|| {
        let o = out(out_handle, "out_handle")?;
        *o = boxed(FharmIntegrand(Integrand::power(p).map_err(fail)?));
        Ok(())
    })
}

/// f(η) = ηᵀAη with A = [[a11, a12], [a21, a22]] symmetric positive definite.
///
/// # Safety
/// As [`fharm_integrand_power`].
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_quadratic(
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
    out_handle: *mut *mut FharmIntegrand,
) -> FharmStatus {
    guard(|| {
        let o = out(out_handle, "out_handle")?;
        *o = boxed(FharmIntegrand(Integrand::quadratic_form(Mat2::new(a11, a12, a21, a22)).map_err(fail)?));
        Ok(())
    })
}

/// |η|^p times the periodic cubic spline through `n` uniform samples of the
/// angular profile on [0, 2π).
///
/// # Safety
/// `samples` must point to `n` readable doubles; `out_handle` as above.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_sampled(
    p: f64,
    samples: *const f64,
    n: usize,
    out_handle: *mut *mut FharmIntegrand,
) -> FharmStatus {
    guard(|| {
        let s = slice(samples, n, "samples")?;
        let o = out(out_handle, "out_handle")?;
        *o = boxed(FharmIntegrand(Integrand::sampled(p, s.to_vec()).map_err(fail)?));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_free(h: *mut FharmIntegrand) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Degree p of the integrand.
///
/// # Safety
/// `h` must be a live integrand handle; `out_p` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_degree(h: *const FharmIntegrand, out_p: *mut f64) -> FharmStatus {
    guard(|| {
        let f = handle(h, "integrand")?;
        *out(out_p, "out_p")? = f.0.p();
        Ok(())
    })
}

/// f(x, y).
///
/// # Safety
/// `h` must be a live integrand handle; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_eval(h: *const FharmIntegrand, x: f64, y: f64, out_value: *mut f64) -> FharmStatus {
    guard(|| {
        let f = handle(h, "integrand")?;
        let o = out(out_value, "out_value")?;
        *o = f.0.eval_f(Vec2::new(x, y)).map_err(fail)?;
        Ok(())
    })
}

/// ∇f(x, y) into `out_grad[0..2]`.
///
/// # Safety
/// `out_grad` must point to 2 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_grad(h: *const FharmIntegrand, x: f64, y: f64, out_grad: *mut f64) -> FharmStatus {
    guard(|| {
        let f = handle(h, "integrand")?;
        if out_grad.is_null() {
            return Err(null("out_grad"));
        }
        let g = f.0.grad_f(Vec2::new(x, y)).map_err(fail)?;
        std::slice::from_raw_parts_mut(out_grad, 2).copy_from_slice(&[g.x, g.y]);
        Ok(())
    })
}

/// D²f(x, y) row-major into `out_hess[0..4]`.
///
/// # Safety
/// `out_hess` must point to 4 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fharm_integrand_hessian(h: *const FharmIntegrand, x: f64, y: f64, out_hess: *mut f64) -> FharmStatus {
    guard(|| {
        let f = handle(h, "integrand")?;
        if out_hess.is_null() {
            return Err(null("out_hess"));
        }
        let m = f.0.hessian_f(Vec2::new(x, y)).map_err(fail)?;
        std::slice::from_raw_parts_mut(out_hess, 4).copy_from_slice(&[m.m[0][0], m.m[0][1], m.m[1][0], m.m[1][1]]);
        Ok(())
    })
}

/// Domain kinds accepted by [`fharm_mesh_new`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FharmDomainKind {
    /// a = raw outer radius, b = normalized outer radius (ratio R > 1).
    Disk = 0,
    /// a = half-side; b unused.
    Square = 1,
    /// a = side of the base triangle, b = prefractal level (0..=5).
    Koch = 2,
}

/// Builds the normalized domain and meshes it with maximum edge `h_max`
/// and outer-boundary spacing `grading·h_max`.
///
/// # Safety
/// `out_handle` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_mesh_new(
    kind: FharmDomainKind,
    a: f64,
    b: f64,
    h_max: f64,
    grading: f64,
    out_handle: *mut *mut FharmMesh,
) -> FharmStatus {
    guard(|| {
        let o = out(out_handle, "out_handle")?;
        let spec = match kind {
            FharmDomainKind::Disk => DomainSpec::Disk { radius: a, ratio: b },
            FharmDomainKind::Square => DomainSpec::Square { half_side: a },
            FharmDomainKind::Koch => {
                if !(b >= 0.0 && b.fract() == 0.0 && b <= u32::MAX as f64) {
                    return Err(fail(Error::input(format!("koch level must be a nonnegative integer, got {b}"))));
                }
                DomainSpec::Koch { level: b as u32, side: a }
            }
        };
        let d = geometry::make_domain(&spec).map_err(fail)?;
        *o = boxed(FharmMesh(Arc::new(geometry::mesh(&d, h_max, grading).map_err(fail)?)));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live mesh handle.
#[no_mangle]
pub unsafe extern "C" fn fharm_mesh_free(h: *mut FharmMesh) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// # Safety
/// `h` must be a live mesh handle; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_mesh_size(h: *const FharmMesh, out_vertices: *mut usize, out_triangles: *mut usize) -> FharmStatus {
    guard(|| {
        let m = handle(h, "mesh")?;
        *out(out_vertices, "out_vertices")? = m.0.num_vertices();
        *out(out_triangles, "out_triangles")? = m.0.num_triangles();
        Ok(())
    })
}

/// Copies vertex coordinates as x0, y0, x1, y1, … into `buf` of `len`
/// doubles; needs `len ≥ 2·vertices`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fharm_mesh_vertices(h: *const FharmMesh, buf: *mut f64, len: usize) -> FharmStatus {
    guard(|| {
        let m = handle(h, "mesh")?;
        let n = 2 * m.0.num_vertices();
        if len < n {
            set_error(format!("buffer holds {len} doubles, need {n}"));
            return Err(FharmStatus::BufferTooSmall);
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        for (i, v) in m.0.vertices().iter().enumerate() {
            dst[2 * i] = v.x;
            dst[2 * i + 1] = v.y;
        }
        Ok(())
    })
}

/// Solver settings; [`fharm_solve_options_default`] fills the defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FharmSolveOptions {
    pub max_newton: usize,
    pub residual_tol: f64,
    pub stage_tol: f64,
    pub linear_tol: f64,
}

#[no_mangle]
pub extern "C" fn fharm_solve_options_default() -> FharmSolveOptions {
    let d = SolveOptions::default();
    FharmSolveOptions { max_newton: d.max_newton, residual_tol: d.residual_tol, stage_tol: d.stage_tol, linear_tol: d.linear_tol }
}

/// Capacitary function of the ring: u = 0 on the outer boundary, 1 on the
/// unit circle. `opts` may be null for defaults.
///
/// # Safety
/// `mesh` and `integrand` must be live handles; `opts` null or readable;
/// `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_solve(
    mesh: *const FharmMesh,
    integrand: *const FharmIntegrand,
    opts: *const FharmSolveOptions,
    out_handle: *mut *mut FharmField,
) -> FharmStatus {
    guard(|| {
        let m = handle(mesh, "mesh")?;
        let f = handle(integrand, "integrand")?;
        let o = out(out_handle, "out_handle")?;
        let mut so = SolveOptions::default();
        if let Some(c) = opts.as_ref() {
            so.max_newton = c.max_newton;
            so.residual_tol = c.residual_tol;
            so.stage_tol = c.stage_tol;
            so.linear_tol = c.linear_tol;
        }
        *o = boxed(FharmField(solver::solve_capacitary(m.0.clone(), &f.0, &so).map_err(fail)?));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live field handle.
#[no_mangle]
pub unsafe extern "C" fn fharm_field_free(h: *mut FharmField) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Copies the nodal values (one per mesh vertex) into `buf`.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn fharm_field_values(h: *const FharmField, buf: *mut f64, len: usize) -> FharmStatus {
    guard(|| {
        let u = handle(h, "field")?;
        let v = u.0.values();
        if len < v.len() {
            set_error(format!("buffer holds {len} doubles, need {}", v.len()));
            return Err(FharmStatus::BufferTooSmall);
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, v.len()).copy_from_slice(v);
        Ok(())
    })
}

/// Linear interpolation of the field at (x, y); InvalidInput outside the mesh.
///
/// # Safety
/// `h` must be a live field handle; `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_field_eval(h: *const FharmField, x: f64, y: f64, out_value: *mut f64) -> FharmStatus {
    guard(|| {
        let u = handle(h, "field")?;
        let o = out(out_value, "out_value")?;
        *o = u
            .0
            .interpolate(Vec2::new(x, y))
            .ok_or_else(|| fail(Error::input(format!("({x}, {y}) lies outside the mesh"))))?;
        Ok(())
    })
}

/// Boundary measure of a solved field.
///
/// # Safety
/// `field`, `integrand` live handles; `out_handle` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_measure_extract(
    field: *const FharmField,
    integrand: *const FharmIntegrand,
    out_handle: *mut *mut FharmMeasure,
) -> FharmStatus {
    guard(|| {
        let u = handle(field, "field")?;
        let f = handle(integrand, "integrand")?;
        let o = out(out_handle, "out_handle")?;
        *o = boxed(FharmMeasure(measure::boundary_measure(&u.0, &f.0).map_err(fail)?));
        Ok(())
    })
}

/// # Safety
/// `h` must be null or a live measure handle.
#[no_mangle]
pub unsafe extern "C" fn fharm_measure_free(h: *mut FharmMeasure) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// One boundary arc.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FharmArc {
    pub x: f64,
    pub y: f64,
    pub length: f64,
    pub weight: f64,
}

/// Number of arcs and total mass.
///
/// # Safety
/// `h` live; outputs writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_measure_summary(h: *const FharmMeasure, out_arcs: *mut usize, out_total_mass: *mut f64) -> FharmStatus {
    guard(|| {
        let m = handle(h, "measure")?;
        *out(out_arcs, "out_arcs")? = m.0.len();
        *out(out_total_mass, "out_total_mass")? = m.0.total_mass;
        Ok(())
    })
}

/// Copies the arcs into `buf` of capacity `len`.
///
/// # Safety
/// `buf` must point to `len` writable `FharmArc`.
#[no_mangle]
pub unsafe extern "C" fn fharm_measure_arcs(h: *const FharmMeasure, buf: *mut FharmArc, len: usize) -> FharmStatus {
    guard(|| {
        let m = handle(h, "measure")?;
        let n = m.0.len();
        if len < n {
            set_error(format!("buffer holds {len} arcs, need {n}"));
            return Err(FharmStatus::BufferTooSmall);
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        let dst = std::slice::from_raw_parts_mut(buf, n);
        for (d, a) in dst.iter_mut().zip(&m.0.arcs) {
            *d = FharmArc { x: a.midpoint.x, y: a.midpoint.y, length: a.length, weight: a.weight };
        }
        Ok(())
    })
}

/// μ(B((x, y), r)).
///
/// # Safety
/// `h` live; `out_mass` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_measure_ball(h: *const FharmMeasure, x: f64, y: f64, r: f64, out_mass: *mut f64) -> FharmStatus {
    guard(|| {
        let m = handle(h, "measure")?;
        *out(out_mass, "out_mass")? = measure::measure_ball(&m.0, Vec2::new(x, y), r);
        Ok(())
    })
}

/// I₀(t) = ∫_{u=t} f(∇u)/|∇u| dH¹.
///
/// # Safety
/// Handles live; `out_flux` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_level_flux(
    field: *const FharmField,
    integrand: *const FharmIntegrand,
    t: f64,
    out_flux: *mut f64,
) -> FharmStatus {
    guard(|| {
        let u = handle(field, "field")?;
        let f = handle(integrand, "integrand")?;
        *out(out_flux, "out_flux")? = measure::level_flux(&u.0, &f.0, t).map_err(fail)?;
        Ok(())
    })
}

/// Winding numbers of u_z around each component of {u = t}. Writes at most
/// `cap` values into `buf` and the component count into `out_count`;
/// BufferTooSmall if `cap` is short (the count is still written).
///
/// # Safety
/// `buf` must point to `cap` writable int64 values; `out_count` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_winding_numbers(
    field: *const FharmField,
    t: f64,
    buf: *mut i64,
    cap: usize,
    out_count: *mut usize,
) -> FharmStatus {
    guard(|| {
        let u = handle(field, "field")?;
        let count = out(out_count, "out_count")?;
        let curve = geometry::extract_level_curve(&u.0, t).map_err(fail)?;
        let w = analysis::winding_number(&curve).map_err(fail)?;
        *count = w.len();
        if cap < w.len() {
            set_error(format!("buffer holds {cap} values, need {}", w.len()));
            return Err(FharmStatus::BufferTooSmall);
        }
        if !w.is_empty() {
            if buf.is_null() {
                return Err(null("buf"));
            }
            std::slice::from_raw_parts_mut(buf, w.len()).copy_from_slice(&w);
        }
        Ok(())
    })
}

/// λ(r) = r·exp(sign·A·𝔇(r)); `sign` is +1 or −1.
///
/// # Safety
/// `out_value` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_gauge_value(a: f64, sign: i32, c_star: f64, r: f64, out_value: *mut f64) -> FharmStatus {
    guard(|| {
        let o = out(out_value, "out_value")?;
        let sign = match sign {
            1 => GaugeSign::Plus,
            -1 => GaugeSign::Minus,
            s => return Err(fail(Error::input(format!("gauge sign must be +1 or -1, got {s}")))),
        };
        let g = GaugeFunction::new(a, sign, c_star).map_err(fail)?;
        *o = analysis::gauge_value(&g, r).map_err(fail)?;
        Ok(())
    })
}

/// Dimension estimates over the radius grid `radii[0..n]` (null with n = 0
/// selects the default grid) and `centers` μ-distributed centers.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FharmDimension {
    pub local_dimension: f64,
    pub local_ci_low: f64,
    pub local_ci_high: f64,
    pub information_dimension: f64,
    pub information_ci_low: f64,
    pub information_ci_high: f64,
    pub boundary_box_dimension: f64,
}

/// # Safety
/// `h` live; `radii` readable for `n` doubles; `out_dim` writable.
#[no_mangle]
pub unsafe extern "C" fn fharm_dimension(
    h: *const FharmMeasure,
    radii: *const f64,
    n: usize,
    centers: usize,
    out_dim: *mut FharmDimension,
) -> FharmStatus {
    guard(|| {
        let m = handle(h, "measure")?;
        let o = out(out_dim, "out_dim")?;
        let r = slice(radii, n, "radii")?;
        let grid = if r.is_empty() { analysis::default_radius_grid(&m.0).map_err(fail)? } else { r.to_vec() };
        let c = analysis::mass_quantile_centers(&m.0, centers);
        let rep = analysis::local_dimension(&m.0, &c, &grid).map_err(fail)?;
        *o = FharmDimension {
            local_dimension: rep.local_dimension,
            local_ci_low: rep.local_ci.0,
            local_ci_high: rep.local_ci.1,
            information_dimension: rep.information.slope,
            information_ci_low: rep.information.ci_low,
            information_ci_high: rep.information.ci_high,
            boundary_box_dimension: rep.boundary_box.slope,
        };
        Ok(())
    })
}
