//! Acceptance suite: one pass/fail line per criterion, nonzero exit if any
//! criterion fails. Runs without the libtest harness so the lines are always
//! printed.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use fharm_core::analysis::{
    cantor_dust_measure, default_radius_grid, exceptional_flux, fit_line, information_dimension, local_dimension,
    log_density, mass_quantile_centers, moment_bound_fit, winding_number, Branch, GaugeFunction, GaugeSign, MomentTable,
    DEFAULT_CENTERS,
};
use fharm_core::geometry::{extract_level_curve, make_domain, mesh, Circle, Domain, DomainSpec, Mesh, OuterBoundary};
use fharm_core::integrand::{verify_delta_monotone, ProfileFn};
use fharm_core::measure::{boundary_measure, level_flux, BoundaryMeasure};
use fharm_core::solver::{fundamental_inequality, solve_capacitary, ScalarField, SolveOptions};
use fharm_core::{Integrand, Mat2, Vec2};

const R: f64 = 5.0;
const PS: [f64; 3] = [1.5, 2.0, 3.0];
const DISK_HS: [f64; 3] = [0.08, 0.04, 0.02];
const POLY_HS: [f64; 2] = [0.1, 0.05];
const GRADING: f64 = 0.25;

#[derive(Clone, Copy, PartialEq, Debug)]
enum Shape {
    Disk,
    Square,
    Koch3,
}

impl Shape {
    fn name(self) -> &'static str {
        match self {
            Shape::Disk => "disk",
            Shape::Square => "square",
            Shape::Koch3 => "koch-3",
        }
    }

    fn domain(self) -> Domain {
        let spec = match self {
            Shape::Disk => DomainSpec::Disk { radius: R, ratio: R },
            Shape::Square => DomainSpec::Square { half_side: 1.0 },
            Shape::Koch3 => DomainSpec::Koch { level: 3, side: 1.0 },
        };
        make_domain(&spec).unwrap()
    }

    /// Disks are meshed uniformly for the convergence study.
    fn grading(self) -> f64 {
        if self == Shape::Disk {
            1.0
        } else {
            GRADING
        }
    }

    fn fine_h(self) -> f64 {
        if self == Shape::Disk {
            0.02
        } else {
            0.05
        }
    }

    fn coarse_h(self) -> f64 {
        2.0 * self.fine_h()
    }
}

struct Run {
    shape: Shape,
    p: f64,
    h: f64,
    f: Integrand,
    u: ScalarField,
    mu: BoundaryMeasure,
    seconds: f64,
}

impl Run {
    fn label(&self) -> String {
        format!("{} p={} h={}", self.shape.name(), self.p, self.h)
    }
}

fn solve_on(m: Arc<Mesh>, shape: Shape, p: f64, h: f64, start: Instant) -> Run {
    let f = Integrand::power(p).unwrap();
    let u = solve_capacitary(m, &f, &SolveOptions::default())
        .unwrap_or_else(|e| panic!("{} p={p} h={h}: solve failed: {e}", shape.name()));
    let mu = boundary_measure(&u, &f).unwrap();
    Run { shape, p, h, f, u, mu, seconds: start.elapsed().as_secs_f64() }
}

fn solve(shape: Shape, p: f64, h: f64) -> Run {
    let t = Instant::now();
    let m = Arc::new(mesh(&shape.domain(), h, shape.grading()).unwrap());
    solve_on(m, shape, p, h, t)
}

struct Runs(Vec<Run>);

impl Runs {
    fn get(&self, shape: Shape, p: f64, h: f64) -> &Run {
        self.0.iter().find(|r| r.shape == shape && r.p == p && r.h == h).expect("run was computed")
    }

    fn fine(&self) -> impl Iterator<Item = &Run> {
        self.0.iter().filter(|r| r.h == r.shape.fine_h())
    }
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn harmonic_oracle(r: f64) -> f64 {
    (R / r).ln() / R.ln()
}

/// Radial solution of the degree-p equation on 1 < r < R.
fn p_oracle(r: f64, p: f64) -> f64 {
    if p == 2.0 {
        return harmonic_oracle(r);
    }
    let a = (p - 2.0) / (p - 1.0);
    (R.powf(a) - r.powf(a)) / (R.powf(a) - 1.0)
}

fn nodal_error(u: &ScalarField, p: f64) -> f64 {
    let m = u.mesh();
    m.vertices().iter().zip(u.values()).map(|(z, v)| (v - p_oracle(z.norm(), p)).abs()).fold(0.0, f64::max)
}

const LEVELS: [f64; 9] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9];

fn c1(runs: &Runs) -> Outcome {
    let r = runs.get(Shape::Disk, 2.0, 0.02);
    let err = nodal_error(&r.u, 2.0);
    let cap = TAU / R.ln();
    let mass = (r.mu.total_mass / cap - 1.0).abs();
    outcome(
        err <= 5e-3 && mass <= 0.02 && r.seconds <= 60.0,
        format!("L∞ = {err:.3e} (≤ 5e-3), |mass/(2π/log 5) − 1| = {mass:.3e} (≤ 2e-2), {:.1} s (≤ 60 s)", r.seconds),
    )
}

fn c2(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut d = String::new();
    for p in [1.5, 3.0] {
        let errs: Vec<f64> = DISK_HS.iter().map(|&h| nodal_error(&runs.get(Shape::Disk, p, h).u, p)).collect();
        let x: Vec<f64> = DISK_HS.iter().map(|h| h.ln()).collect();
        let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let order = fit_line(&x, &y, None).slope;
        pass &= errs[2] <= 1e-2 && order >= 1.0;
        let _ = write!(d, "p={p}: L∞ {:.2e}/{:.2e}/{:.2e}, order {order:.2}; ", errs[0], errs[1], errs[2]);
    }
    outcome(pass, format!("{d}need L∞(0.02) ≤ 1e-2 and order ≥ 1"))
}

fn c3(runs: &Runs) -> Outcome {
    let mut worst = (0.0, String::new());
    for r in runs.fine() {
        let fl: Vec<f64> = LEVELS.iter().map(|&t| level_flux(&r.u, &r.f, t).unwrap()).collect();
        let mean = fl.iter().sum::<f64>() / fl.len() as f64;
        let spread = (fl.iter().cloned().fold(f64::MIN, f64::max) - fl.iter().cloned().fold(f64::MAX, f64::min)) / mean;
        if spread >= worst.0 {
            worst = (spread, r.label());
        }
    }
    outcome(worst.0 <= 0.02, format!("worst (max − min)/mean of I₀ over 9 runs = {:.3e} on {} (≤ 2e-2)", worst.0, worst.1))
}

#[derive(Debug)]
struct CosineSquared;

impl ProfileFn for CosineSquared {
    fn jet(&self, t: f64) -> [f64; 3] {
        let a = 0.6;
        [1.0 + a * t.cos().powi(2), -a * (2.0 * t).sin(), -2.0 * a * (2.0 * t).cos()]
    }
}

fn c4() -> Outcome {
    let forms = [
        ("|η|^1.5", Integrand::power(1.5).unwrap()),
        ("|η|²", Integrand::power(2.0).unwrap()),
        ("|η|³", Integrand::power(3.0).unwrap()),
        ("quadratic form", Integrand::quadratic_form(Mat2::new(2.0, 0.4, 0.4, 1.0)).unwrap()),
        ("|η|³(1 + 0.6cos²θ)", Integrand::closed(3.0, Arc::new(CosineSquared)).unwrap()),
    ];
    let (mut first, mut second, mut points) = (0.0_f64, 0.0_f64, 0);
    for (_, f) in &forms {
        let p = f.p();
        for i in 0..100 {
            for j in 0..100 {
                let eta = Vec2::new(-5.0 + 10.0 * (i as f64 + 0.5) / 100.0, -5.0 + 10.0 * (j as f64 + 0.5) / 100.0);
                let j = f.jet(eta);
                first = first.max((eta.dot(j.grad) - p * j.value).abs() / (p * j.value));
                second = second.max((j.hess.mul_vec(eta) - j.grad * (p - 1.0)).norm() / ((p - 1.0) * j.grad.norm()));
                points += 1;
            }
        }
    }
    outcome(
        first <= 1e-10 && second <= 1e-10,
        format!("{} integrands × 10⁴ points ({points}): max relative residual ⟨∇f,η⟩ = pf {first:.2e}, D²f·η = (p−1)∇f {second:.2e} (≤ 1e-10)", forms.len()),
    )
}

/// Dense-grid minimum of the monotonicity ratio for ∇f(η) = 3|η|η: the
/// first point is fixed at (1, 0), the second ranges over radii in
/// [0.1, 10] (log-uniform) and angles in [0, π] (symmetry), 1000 × 1000.
fn cubic_delta_dense() -> f64 {
    let v = |x: f64, y: f64| {
        let r = x.hypot(y);
        (3.0 * r * x, 3.0 * r * y)
    };
    let (v0x, v0y) = v(1.0, 0.0);
    let mut best = f64::INFINITY;
    for i in 0..1000 {
        let rho = (0.1f64.ln() + (100f64.ln()) * i as f64 / 999.0).exp();
        for j in 0..1000 {
            let th = PI * j as f64 / 999.0;
            let (x, y) = (rho * th.cos(), rho * th.sin());
            let (vx, vy) = v(x, y);
            let (dvx, dvy, dx, dy) = (vx - v0x, vy - v0y, x - 1.0, y);
            let den = dvx.hypot(dvy) * dx.hypot(dy);
            if den > 0.0 {
                best = best.min((dvx * dx + dvy * dy) / den);
            }
        }
    }
    best
}

/// Same grid evaluated independently in double precision with numpy.
const CUBIC_DELTA_DENSE: f64 = 0.9428766082074376;

fn c5() -> Outcome {
    let q = verify_delta_monotone(&Integrand::power(2.0).unwrap(), 10_000, (0.1, 10.0), 1).unwrap().delta_hat;
    let c = verify_delta_monotone(&Integrand::power(3.0).unwrap(), 10_000, (0.1, 10.0), 1).unwrap().delta_hat;
    let dense = cubic_delta_dense();
    let rel = (c / dense - 1.0).abs();
    let frozen = (dense - CUBIC_DELTA_DENSE).abs();
    outcome(
        q >= 1.0 - 1e-6 && rel <= 0.02 && frozen <= 1e-9,
        format!("δ̂(|η|²) = {q:.9} (≥ 1 − 1e-6); δ̂(|η|³) = {c:.6} vs 10⁶-pair grid {dense:.6}, rel {rel:.2e} (≤ 2e-2); grid vs frozen {frozen:.1e}"),
    )
}

fn c6(runs: &Runs) -> Outcome {
    let (mut curves, mut bad, mut diff_bad) = (0, Vec::new(), 0);
    for r in &runs.0 {
        let mut prev: Option<i64> = None;
        for &t in &LEVELS {
            let total = extract_level_curve(&r.u, t).map_err(|e| e.to_string()).and_then(|c| {
                curves += c.components.len();
                winding_number(&c).map_err(|e| e.to_string())
            });
            match total {
                Ok(w) if !w.is_empty() && w.iter().all(|x| *x == -1) => {
                    let s: i64 = w.iter().sum();
                    if prev.is_some_and(|q| q != s) {
                        diff_bad += 1;
                    }
                    prev = Some(s);
                }
                Ok(w) => bad.push(format!("{} t={t}: {w:?}", r.label())),
                Err(e) => bad.push(format!("{} t={t}: {e}", r.label())),
            }
        }
    }
    let detail = format!(
        "{curves} level curves on {} runs × 9 levels; {} not −1, {diff_bad} nonzero zero-count differences{}",
        runs.0.len(),
        bad.len(),
        bad.first().map(|b| format!(" (first: {b})")).unwrap_or_default()
    );
    outcome(bad.is_empty() && diff_bad == 0, detail)
}

fn c7(runs: &Runs) -> Outcome {
    let (mut c_max, mut drift_max, mut worst) = (0.0_f64, 0.0_f64, String::new());
    for shape in [Shape::Disk, Shape::Square, Shape::Koch3] {
        for p in PS {
            let fine = fundamental_inequality(&runs.get(shape, p, shape.fine_h()).u, 0.5).unwrap().c;
            let coarse = fundamental_inequality(&runs.get(shape, p, shape.coarse_h()).u, 0.5).unwrap().c;
            let drift = (fine / coarse - 1.0).abs();
            c_max = c_max.max(fine).max(coarse);
            if drift >= drift_max {
                drift_max = drift;
                worst = format!("{} p={p}: c {coarse:.2} → {fine:.2}", shape.name());
            }
        }
    }
    outcome(
        c_max <= 100.0 && drift_max <= 0.25,
        format!("max c = {c_max:.2} (≤ 100), largest change under refinement {drift_max:.3} on {worst} (≤ 0.25)"),
    )
}

const MOMENT_LEVELS: [f64; 6] = [0.4, 0.2, 0.1, 0.05, 0.02, 0.01];

fn c8(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut d = String::new();
    for p in [1.5, 3.0] {
        let r = runs.get(Shape::Koch3, p, Shape::Koch3.fine_h());
        for branch in Branch::for_p(p) {
            let ld = log_density(&r.u, &r.f, branch, None).unwrap();
            let table = MomentTable::compute(&r.u, &r.f, &ld, &MOMENT_LEVELS, 5).unwrap();
            let fit = moment_bound_fit(&table).unwrap();
            let hi = fit.brackets.iter().map(|b| b.2).fold(f64::MIN, f64::max);
            let bounded = fit.brackets.iter().all(|b| b.2.is_finite()) && fit.max_abs_slope.is_finite();
            pass &= bounded && fit.max_abs_slope <= 1.0;
            let _ = write!(d, "p={p} {}: max bracket {hi:.3}, max |slope| {:.3}; ", branch.as_str(), fit.max_abs_slope);
        }
    }
    outcome(pass, format!("{d}need finite brackets and |slope| ≤ 1"))
}

const EXCEPTIONAL_LEVELS: [f64; 4] = [0.01, 0.02, 0.05, 0.1];

/// A blow-up trend is K(t) = E(t)·log²(1/t) rising monotonically as t ↓ 0
/// across the whole grid by more than a factor of 10.
fn c9(runs: &Runs) -> Outcome {
    let mut pass = true;
    let mut d = String::new();
    for p in PS {
        let r = runs.get(Shape::Koch3, p, Shape::Koch3.fine_h());
        for branch in Branch::for_p(p) {
            let ld = log_density(&r.u, &r.f, branch, None).unwrap();
            let table = MomentTable::compute(&r.u, &r.f, &ld, &MOMENT_LEVELS, 5).unwrap();
            let c_star = moment_bound_fit(&table).unwrap().c_star_hat.max(1.0);
            let sign = if branch == Branch::Positive { GaugeSign::Plus } else { GaugeSign::Minus };
            let g = GaugeFunction::new(1.0, sign, c_star).unwrap();
            let k: Vec<f64> = EXCEPTIONAL_LEVELS
                .iter()
                .map(|&t| exceptional_flux(&r.u, &r.f, &ld, t, &g).unwrap() * (1.0 / t).ln().powi(2))
                .collect();
            let finite = k.iter().all(|x| x.is_finite());
            let rising = k.windows(2).all(|w| w[0] > w[1]) && k[0] > 10.0 * k[k.len() - 1];
            pass &= finite && !rising;
            let _ = write!(d, "p={p} {} (c*={c_star:.2}): K = [{}]; ", branch.as_str(), k.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", "));
        }
    }
    outcome(pass, format!("{d}need finite K without a blow-up trend"))
}

fn c10() -> Outcome {
    let mut pass = true;
    let mut d = String::new();
    for alpha in [0.8, 1.0, 1.25] {
        let mu = cantor_dust_measure(alpha, 8).unwrap();
        let radii = default_radius_grid(&mu).unwrap();
        let rep = local_dimension(&mu, &mass_quantile_centers(&mu, DEFAULT_CENTERS), &radii).unwrap();
        let (loc, info) = (rep.local_dimension, rep.information.slope);
        pass &= (loc - alpha).abs() <= 0.05 && (info - alpha).abs() <= 0.05;
        let _ = write!(d, "α={alpha}: local {loc:.4}, information {info:.4}; ");
    }
    outcome(pass, format!("{d}need ±0.05"))
}

fn c11(runs: &Runs) -> Outcome {
    let fits: Vec<_> = PS
        .iter()
        .map(|&p| {
            let mu = &runs.get(Shape::Koch3, p, Shape::Koch3.fine_h()).mu;
            information_dimension(mu, &default_radius_grid(mu).unwrap()).unwrap()
        })
        .collect();
    let est: Vec<f64> = fits.iter().map(|f| f.slope).collect();
    let window = (0.9..=1.1).contains(&est[1]);
    let ordered = est[0] >= est[1] && est[1] >= est[2];
    let overlap = fits.windows(2).any(|w| w[0].ci_low <= w[1].ci_high && w[1].ci_low <= w[0].ci_high);
    let verdict = if ordered {
        "ordered"
    } else if overlap {
        "inconclusive"
    } else {
        "reversed"
    };
    let ci = |i: usize| format!("{:.4} [{:.4}, {:.4}]", est[i], fits[i].ci_low, fits[i].ci_high);
    outcome(
        window && verdict != "reversed",
        format!("est(1.5) = {}, est(2) = {}, est(3) = {}: {verdict}; need est(2) ∈ [0.9, 1.1]", ci(0), ci(1), ci(2)),
    )
}

/// The square ring dilated by 2 about the origin, meshed from scratch.
fn dilated_square() -> Domain {
    let d = Shape::Square.domain();
    let outer = match &d.outer {
        OuterBoundary::Polygon(pts) => OuterBoundary::Polygon(pts.iter().map(|z| *z * 2.0).collect()),
        OuterBoundary::Circle(c) => OuterBoundary::Circle(Circle::new(c.center * 2.0, c.radius * 2.0)),
    };
    Domain { outer, inner: Circle::new(Vec2::ZERO, 2.0), ..d }
}

fn c12() -> Outcome {
    let h = 0.1;
    let mut pass = true;
    let mut d = String::new();
    for p in PS {
        let base = solve(Shape::Square, p, h);
        let t = Instant::now();
        let big = solve_on(Arc::new(mesh(&dilated_square(), 2.0 * h, GRADING).unwrap()), Shape::Square, p, 2.0 * h, t);
        let factor = 2f64.powf(p - 2.0);
        let (a, b) = (&base.mu.arcs, &big.mu.arcs);
        let matched = a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x.midpoint * 2.0).dist(y.midpoint) < 1e-9);
        if !matched {
            pass = false;
            let _ = write!(d, "p={p}: dilated mesh has {} arcs vs {}; ", b.len(), a.len());
            continue;
        }
        let dev = a.iter().zip(b).filter(|(x, _)| x.weight > 0.0).map(|(x, y)| (factor * y.weight / x.weight - 1.0).abs()).fold(0.0, f64::max);
        let total = (factor * big.mu.total_mass / base.mu.total_mass - 1.0).abs();
        pass &= dev <= 0.02;
        let _ = write!(d, "p={p}: max arc deviation {dev:.2e}, total {total:.2e}; ");
    }
    outcome(pass, format!("{d}need ≤ 2e-2"))
}

fn main() {
    let start = Instant::now();
    let mut plan: Vec<(Shape, f64, f64)> = Vec::new();
    for p in PS {
        for h in DISK_HS {
            plan.push((Shape::Disk, p, h));
        }
        for shape in [Shape::Square, Shape::Koch3] {
            for h in POLY_HS {
                plan.push((shape, p, h));
            }
        }
    }
    let runs = Runs(
        plan.into_iter()
            .map(|(s, p, h)| {
                let r = solve(s, p, h);
                eprintln!("solved {} in {:.1} s", r.label(), r.seconds);
                r
            })
            .collect(),
    );

    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("radial exactness, p=2", Box::new(|| c1(&runs))),
        ("radial exactness, p≠2", Box::new(|| c2(&runs))),
        ("conservation of I₀", Box::new(|| c3(&runs))),
        ("Euler identities", Box::new(c4)),
        ("δ-monotonicity", Box::new(c5)),
        ("winding numbers", Box::new(|| c6(&runs))),
        ("fundamental inequality", Box::new(|| c7(&runs))),
        ("moment bounds", Box::new(|| c8(&runs))),
        ("exceptional flux", Box::new(|| c9(&runs))),
        ("dimension calibration", Box::new(c10)),
        ("dimension trend", Box::new(|| c11(&runs))),
        ("scaling covariance", Box::new(c12)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("criterion {:>2} [{}] {name}: {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of {} passed in {:.0} s", criteria.len() - failed, criteria.len(), start.elapsed().as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
