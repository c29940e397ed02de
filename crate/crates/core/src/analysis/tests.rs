use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use super::*;
use crate::geometry::{make_domain, mesh, DomainSpec, LevelComponent, Mesh};
use crate::linalg::Vec2;
use crate::measure::{boundary_measure, level_flux, BoundaryMeasure};
use crate::solver::{solve_capacitary, SolveOptions};

const R: f64 = 5.0;

fn disk_mesh(grading: f64) -> Arc<Mesh> {
    static COARSE: OnceLock<Arc<Mesh>> = OnceLock::new();
    static FINE: OnceLock<Arc<Mesh>> = OnceLock::new();
    let cell = if grading == 0.25 { &COARSE } else { &FINE };
    cell.get_or_init(|| {
        let d = make_domain(&DomainSpec::Disk { radius: R, ratio: R }).unwrap();
        Arc::new(mesh(&d, 0.1, grading).unwrap())
    })
    .clone()
}

/// Nodal interpolant of log(R/r)/log R.
fn radial_field() -> &'static ScalarField {
    static U: OnceLock<ScalarField> = OnceLock::new();
    U.get_or_init(|| ScalarField::from_fn(disk_mesh(0.25), |z| (R / z.norm()).ln() / R.ln()).unwrap())
}

fn square() -> Integrand {
    Integrand::power(2.0).unwrap()
}

/// Level radius and exact w = 2 log(r log R) of the negative branch.
fn radial_level(t: f64) -> (f64, f64) {
    let r = R.powf(1.0 - t);
    (r, 2.0 * (r * R.ln()).ln())
}

/// μ of the p = 2 solution on a disk with outer spacing 0.01.
fn uniform_disk_measure() -> &'static BoundaryMeasure {
    static MU: OnceLock<BoundaryMeasure> = OnceLock::new();
    MU.get_or_init(|| {
        let u = solve_capacitary(disk_mesh(0.1), &square(), &SolveOptions::default()).unwrap();
        boundary_measure(&u, &square()).unwrap()
    })
}

#[test]
fn radial_log_density_matches_closed_form_and_decreases_outward() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, None).unwrap();
    let mesh = u.mesh();
    let mut bins = [(0.0, 0usize); 8];
    for k in 0..mesh.num_triangles() {
        let r = mesh.centroid(k).norm();
        let exact = 2.0 * (1.0 / (r * R.ln())).ln();
        // P1 gradients carry a relative error of order h/r.
        assert!((ld.v[k] - exact).abs() < 0.12, "r = {r}: v = {} vs {exact}", ld.v[k]);
        let b = (((r - 1.0) / (R - 1.0)) * 8.0).floor().min(7.0) as usize;
        bins[b].0 += ld.v[k];
        bins[b].1 += 1;
    }
    let means: Vec<f64> = bins.iter().map(|(s, n)| s / *n as f64).collect();
    assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    assert_eq!(ld.excluded_area, 0.0);
}

#[test]
fn unit_gradient_gives_zero_log_density() {
    let u = ScalarField::from_fn(disk_mesh(0.25), |z| z.x).unwrap();
    let ld = log_density(&u, &square(), Branch::Positive, None).unwrap();
    assert!(ld.v.iter().all(|v| v.abs() < 1e-12));
    assert!(ld.w.iter().all(|w| *w < 1e-12) && ld.g.iter().all(|g| *g < 1e-12));
    assert!(ld.c_prime < 1e-12);
}

#[test]
fn negative_branch_is_minus_v_and_positive_branch_vanishes_when_v_negative() {
    let u = radial_field();
    let neg = log_density(u, &square(), Branch::Negative, Some(0.3)).unwrap();
    let pos = log_density(u, &square(), Branch::Positive, None).unwrap();
    for k in 0..neg.v.len() {
        assert!(neg.v[k] < 0.0);
        assert_eq!(neg.w[k], -neg.v[k]);
        assert_eq!(neg.g[k], (neg.w[k] - 0.3).max(0.0));
        assert_eq!(pos.w[k], 0.0);
    }
}

#[test]
fn default_shift_kills_g_near_the_hole() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, None).unwrap();
    let mesh = u.mesh();
    for (k, t) in mesh.triangles().iter().enumerate() {
        if t.iter().any(|&i| mesh.vertices()[i].norm() < 2.0) {
            assert_eq!(ld.g[k], 0.0);
        }
    }
    assert!(ld.g.iter().any(|g| *g > 0.0), "g should be positive far from the hole");
}

#[test]
fn degenerate_gradients_are_excluded() {
    let u = ScalarField::from_fn(disk_mesh(0.25), |_| 0.5).unwrap();
    let ld = log_density(&u, &square(), Branch::Positive, None).unwrap();
    assert!(ld.v.iter().all(|v| *v == f64::NEG_INFINITY));
    assert!((ld.excluded_area - u.mesh().total_area()).abs() < 1e-9);
}

#[test]
fn branch_must_match_regime() {
    let u = radial_field();
    assert!(log_density(u, &Integrand::power(3.0).unwrap(), Branch::Positive, None).is_err());
    assert!(log_density(u, &Integrand::power(1.5).unwrap(), Branch::Negative, None).is_err());
    assert!(log_density(u, &square(), Branch::Negative, Some(-1.0)).is_err());
    assert_eq!(Branch::for_p(2.0).len(), 2);
}

#[test]
fn zeroth_moment_is_the_level_flux() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, None).unwrap();
    for t in [0.1, 0.3, 0.7] {
        let i0 = moment_integral(u, &square(), &ld, t, 0).unwrap();
        let flux = level_flux(u, &square(), t).unwrap();
        assert!((i0 - flux).abs() <= 1e-12 * flux, "{i0} vs {flux}");
    }
}

#[test]
fn radial_moments_follow_closed_form() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, Some(0.0)).unwrap();
    let i0 = TAU / R.ln();
    let ts = [0.05, 0.1, 0.2, 0.4];
    let table = MomentTable::compute(u, &square(), &ld, &ts, 5).unwrap();
    for r in &table.rows {
        let (_, w) = radial_level(r.t);
        let exact = i0.ln() + 2.0 * r.m as f64 * w.ln();
        assert!((r.log_i - exact).abs() < 0.01 * (1.0 + r.m as f64), "t = {}, m = {}: {} vs {exact}", r.t, r.m, r.log_i);
    }
}

#[test]
fn moments_vanish_when_w_vanishes() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Positive, None).unwrap();
    for m in 1..=4 {
        assert_eq!(moment_integral(u, &square(), &ld, 0.3, m).unwrap(), 0.0);
    }
    assert!(moment_integral(u, &square(), &ld, 0.3, 0).unwrap() > 0.0);
}

#[test]
fn refined_level_curve_preserves_moments() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, Some(0.0)).unwrap();
    for t in [0.05, 0.2, 0.5] {
        let c = extract_level_curve(u, t).unwrap();
        let fine = c.refined();
        assert_eq!(fine.num_segments(), 2 * c.num_segments());
        for m in 0..=3 {
            let a = moment_log_on(&c, u, &square(), &ld, m, Weight::W);
            let b = moment_log_on(&fine, u, &square(), &ld, m, Weight::W);
            assert!((a - b).abs() < 0.01, "t = {t}, m = {m}: {a} vs {b}");
        }
    }
}

#[test]
fn log_domain_agrees_with_direct_sum_where_both_are_finite() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, Some(0.0)).unwrap();
    let c = extract_level_curve(u, 0.3).unwrap();
    let base = square();
    let direct: f64 = c
        .components
        .iter()
        .flat_map(|c| c.segments())
        .map(|(a, b, k)| {
            let g = u.gradients()[k];
            base.value(g) / g.norm() * a.dist(b) * ld.w[k].powi(8)
        })
        .sum();
    let logged = moment_log_on(&c, u, &square(), &ld, 4, Weight::W);
    assert!((logged - direct.ln()).abs() < 1e-12, "{logged} vs {}", direct.ln());
}

fn closed_form_table(ts: &[f64], m_max: u32) -> MomentTable {
    let i0 = TAU / R.ln();
    let rows = ts
        .iter()
        .flat_map(|&t| (0..=m_max).map(move |m| (t, m)))
        .map(|(t, m)| MomentRow { t, m, log_i: i0.ln() + 2.0 * m as f64 * radial_level(t).1.ln() })
        .collect();
    MomentTable { rows }
}

#[test]
fn bound_fit_reproduces_closed_form_arithmetic() {
    let ts = [0.01, 0.02, 0.05, 0.1, 0.2, 0.4];
    let fit = moment_bound_fit(&closed_form_table(&ts, 5)).unwrap();
    let i0 = TAU / R.ln();
    let mut best = f64::NEG_INFINITY;
    for &t in &ts {
        let w = radial_level(t).1;
        let mut fact = 1.0;
        for m in 1..=5u32 {
            fact *= m as f64;
            let i_m = i0 * w.powi(2 * m as i32);
            let bracket = (i_m.ln() - fact.ln() - m as f64 * (1.0 / t).ln().ln()) / (m as f64 + 1.0);
            best = best.max(bracket);
        }
    }
    assert!((fit.c_star_hat - best.exp()).abs() < 1e-9 * best.exp(), "{} vs {}", fit.c_star_hat, best.exp());
    assert_eq!(fit.slopes.len(), ts.len());
}

#[test]
fn bound_fit_falls_back_to_zeroth_moment() {
    let mut table = closed_form_table(&[0.1, 0.2], 3);
    for r in &mut table.rows {
        if r.m > 0 {
            r.log_i = f64::NEG_INFINITY;
        }
    }
    let fit = moment_bound_fit(&table).unwrap();
    let expected = (TAU / R.ln()).ln(); // m = 0 bracket is log I₀
    assert!((fit.c_star_hat.ln() - expected).abs() < 1e-12);
    assert_eq!(fit.max_violation, 0.0);
}

#[test]
fn moment_csv_has_header_and_rows() {
    let t = closed_form_table(&[0.1], 2);
    let csv = t.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "t,m,log_I_m");
    assert_eq!(lines.len(), 4);
    assert_eq!(t.get(0.1, 2), Some(t.rows[2].log_i));
}

// High-precision reference values (50-digit arithmetic), frozen.
const D_1E8_CSTAR1: f64 = 14.651713096973596;
const LAMBDA_1E8_MINUS: f64 = 4.333530440311644e-15;
const LAMBDA_1E8_PLUS: f64 = 0.023075873442533968;
const LAMBDA_1E3_CSTAR2_HALF_PLUS: f64 = 0.175431756004044;

#[test]
fn gauge_matches_high_precision_reference() {
    let minus = GaugeFunction::new(1.0, GaugeSign::Minus, 1.0).unwrap();
    let plus = GaugeFunction::new(1.0, GaugeSign::Plus, 1.0).unwrap();
    assert!((minus.big_d(1e-8).unwrap() - D_1E8_CSTAR1).abs() < 1e-13);
    let lm = gauge_value(&minus, 1e-8).unwrap();
    assert!((lm / LAMBDA_1E8_MINUS - 1.0).abs() < 1e-12, "{lm}");
    let lp = gauge_value(&plus, 1e-8).unwrap();
    assert!((lp / LAMBDA_1E8_PLUS - 1.0).abs() < 1e-12, "{lp}");
    let g = GaugeFunction::new(0.5, GaugeSign::Plus, 2.0).unwrap();
    let l = gauge_value(&g, 1e-3).unwrap();
    assert!((l / LAMBDA_1E3_CSTAR2_HALF_PLUS - 1.0).abs() < 1e-12, "{l}");
}

#[test]
fn gauge_with_zero_a_is_identity() {
    for sign in [GaugeSign::Plus, GaugeSign::Minus] {
        let g = GaugeFunction::new(0.0, sign, 3.0).unwrap();
        for r in [1e-9, 1e-4, 0.1] {
            assert_eq!(gauge_value(&g, r).unwrap(), r);
        }
    }
}

#[test]
fn gauge_rejects_bad_inputs() {
    let g = GaugeFunction::new(1.0, GaugeSign::Plus, 1.0).unwrap();
    for r in [0.0, -1.0, GAUGE_MAX_RADIUS, 0.5, f64::NAN] {
        assert!(matches!(gauge_value(&g, r), Err(Error::InvalidInput(_))), "r = {r}");
    }
    assert!(GaugeFunction::new(1.0, GaugeSign::Plus, 0.5).is_err());
    assert!(GaugeFunction::new(-1.0, GaugeSign::Plus, 1.0).is_err());
}

#[test]
fn plus_gauge_ratio_grows_as_radius_shrinks() {
    let g = GaugeFunction::new(1.0, GaugeSign::Plus, 1.0).unwrap();
    let rs: Vec<f64> = (1..200).map(|k| GAUGE_MAX_RADIUS * 0.999 * 10f64.powf(-0.1 * k as f64)).collect();
    let q: Vec<f64> = rs.iter().map(|&r| gauge_value(&g, r).unwrap() / r).collect();
    assert!(q.windows(2).all(|w| w[1] > w[0]));
}

proptest! {
    #[test]
    fn gauge_sanity(a in 1.0f64..5.0, c in 1.0f64..5.0, e in 2.1f64..60.0) {
        let r = (-e).exp();
        let minus = GaugeFunction::new(a, GaugeSign::Minus, c).unwrap();
        let plus = GaugeFunction::new(a, GaugeSign::Plus, c).unwrap();
        let lm = gauge_value(&minus, r).unwrap();
        let lp = gauge_value(&plus, r).unwrap();
        prop_assert!(lm > 0.0 && lm <= r);
        prop_assert!(lp >= r);
        prop_assert!((lm * lp / (r * r) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn truncation_never_increases_moments(c in 0.0f64..1.0, m in 0u32..5, t in 0.05f64..0.9) {
        let u = radial_field();
        let ld = log_density(u, &square(), Branch::Negative, Some(c)).unwrap();
        let curve = extract_level_curve(u, t).unwrap();
        let w = moment_log_on(&curve, u, &square(), &ld, m, Weight::W);
        let g = moment_log_on(&curve, u, &square(), &ld, m, Weight::G);
        prop_assert!(g <= w + 1e-12);
    }
}

#[test]
fn exceptional_flux_is_bounded_by_level_flux() {
    let u = radial_field();
    let ld = log_density(u, &square(), Branch::Negative, None).unwrap();
    let gauge = GaugeFunction::new(1.0, GaugeSign::Minus, 1.0).unwrap();
    // w = 2 log(r_t log 5) ≈ 4.1 on these level circles, below 𝔇(t), so 𝔅(t) is empty.
    for t in [1e-3, 0.01] {
        assert_eq!(exceptional_flux(u, &square(), &ld, t, &gauge).unwrap(), 0.0, "t = {t}");
    }
    // At t = 0.1, 𝔇 = 2.77 lies below w ≈ 3.85 everywhere on the curve.
    let all = level_flux(u, &square(), 0.1).unwrap();
    let ex = exceptional_flux(u, &square(), &ld, 0.1, &gauge).unwrap();
    assert!((ex - all).abs() <= 1e-12 * all);
    for t in [0.02, 0.05, 0.08] {
        assert!(exceptional_flux(u, &square(), &ld, t, &gauge).unwrap() <= level_flux(u, &square(), t).unwrap());
    }
    assert!(exceptional_flux(u, &square(), &ld, 0.2, &gauge).is_err());
}

#[test]
fn radial_level_curves_wind_once_clockwise() {
    let u = radial_field();
    for (t, w) in winding_sweep(u, &[0.05, 0.2, 0.5, 0.8, 0.95]).unwrap() {
        assert_eq!(w, vec![-1], "t = {t}");
    }
}

#[test]
fn square_domain_windings_are_stable() {
    let d = make_domain(&DomainSpec::Square { half_side: 1.0 }).unwrap();
    let m = Arc::new(mesh(&d, 0.15, 0.5).unwrap());
    let u = solve_capacitary(m, &square(), &SolveOptions::default()).unwrap();
    for t in [0.2, 0.5, 0.8] {
        for dt in [-1e-3, 0.0, 1e-3] {
            let w = winding_number(&extract_level_curve(&u, t + dt).unwrap()).unwrap();
            assert_eq!(w, vec![-1], "t = {}", t + dt);
        }
    }
}

#[test]
fn winding_refuses_vanishing_gradient() {
    let pts: Vec<Vec2> = (0..8).map(|k| Vec2::polar(1.0, k as f64 * TAU / 8.0)).collect();
    let mut grads: Vec<Vec2> = pts.iter().map(|p| *p * -1.0).collect();
    grads[5] = Vec2::new(1e-13, 0.0);
    let comp = LevelComponent { points: pts, gradients: grads, triangles: vec![0; 8] };
    let curve = LevelCurve { level: 0.5, components: vec![comp] };
    match winding_number(&curve) {
        Err(Error::Uncertifiable { component: 0, vertex: 5, .. }) => {}
        other => panic!("expected uncertifiable at vertex 5, got {other:?}"),
    }
}

#[test]
fn dust_calibration_recovers_prescribed_dimension() {
    for alpha in [0.8, 1.0, 1.25] {
        let mu = cantor_dust_measure(alpha, 8).unwrap();
        let radii = default_radius_grid(&mu).unwrap();
        let rep = local_dimension(&mu, &mass_quantile_centers(&mu, DEFAULT_CENTERS), &radii).unwrap();
        assert!((rep.local_dimension - alpha).abs() < 0.05, "α = {alpha}: local {}", rep.local_dimension);
        assert!((rep.information.slope - alpha).abs() < 0.05, "α = {alpha}: info {}", rep.information.slope);
    }
}

#[test]
fn point_mass_has_dimension_zero() {
    let mu = point_mass_measure(2000).unwrap();
    let centers = [mu.arcs[0].midpoint, mu.arcs[1000].midpoint];
    let rep = local_dimension(&mu, &centers, &[0.01, 0.02, 0.04, 0.08]).unwrap();
    assert_eq!(rep.skipped, 1);
    assert!(rep.centers[0].fit.slope.abs() < 1e-12);
    assert!(rep.information.slope.abs() < 1e-12);
}

#[test]
fn uniform_disk_measure_is_one_dimensional() {
    let mu = uniform_disk_measure();
    let radii = default_radius_grid(mu).unwrap();
    assert!(radii.len() >= MIN_RADII);
    let every: Vec<Vec2> = mu.arcs.iter().step_by(25).map(|a| a.midpoint).collect();
    let rep = local_dimension(mu, &every, &radii).unwrap();
    for c in &rep.centers {
        assert!((c.fit.slope - 1.0).abs() < 0.05, "{:?}: {}", c.center, c.fit.slope);
    }
    assert!((rep.information.slope - 1.0).abs() < 0.05, "{}", rep.information.slope);
    assert!((rep.boundary_box.slope - 1.0).abs() < 0.05, "{}", rep.boundary_box.slope);
    assert!(rep.local_ci.0 <= rep.local_dimension && rep.local_dimension <= rep.local_ci.1);
}

#[test]
fn too_few_radii_are_rejected() {
    let mu = point_mass_measure(100).unwrap();
    assert!(local_dimension(&mu, &[Vec2::ZERO], &[0.1, 0.2, 0.4]).is_err());
    assert!(local_dimension(&mu, &[Vec2::ZERO], &[0.1, 0.4, 0.2, 0.8]).is_err());
    assert!(default_radius_grid(&mu).is_err());
}

#[test]
fn gauge_comparison_on_uniform_disk() {
    let mu = uniform_disk_measure();
    let radii = default_radius_grid(mu).unwrap();
    let length = measure_diameter(mu);
    let flat = gauge_comparison(mu, &GaugeFunction::new(0.0, GaugeSign::Plus, 1.0).unwrap(), &radii, length).unwrap();
    assert!(flat.counts.flat > 0.99, "{:?}", flat.counts);
    // μ(B(z, r)) ≈ (2r + h)·total/(2πR) against λ = r/L; the center's own arc adds h.
    let density = mu.total_mass / (TAU * R);
    for c in flat.centers.iter().step_by(50) {
        for (q, r) in c.ratios.iter().zip(&radii) {
            let h = mu.arcs[0].length;
            let expected = (2.0 * r + h) * density * length / r;
            assert!((q / expected - 1.0).abs() < 0.03, "r = {r}: {q} vs {expected}");
        }
    }
    let minus = gauge_comparison(mu, &GaugeFunction::new(3.0, GaugeSign::Minus, 1.0).unwrap(), &radii, length).unwrap();
    assert!(minus.counts.increasing > 0.99, "{:?}", minus.counts);
    let plus = gauge_comparison(mu, &GaugeFunction::new(3.0, GaugeSign::Plus, 1.0).unwrap(), &radii, length).unwrap();
    assert!(plus.counts.decreasing > 0.99, "{:?}", plus.counts);
}

#[test]
fn report_text_and_csv_layout() {
    let mu = cantor_dust_measure(1.0, 5).unwrap();
    let radii = default_radius_grid(&mu).unwrap();
    let g = GaugeFunction::new(0.0, GaugeSign::Plus, 1.0).unwrap();
    let cmp = gauge_comparison(&mu, &g, &radii, 10.0).unwrap();
    let rep = local_dimension(&mu, &mass_quantile_centers(&mu, 8), &radii).unwrap().with_gauge(&cmp);
    let text = rep.to_text();
    for key in ["[radii]", "r_min:", "[local_dimension]", "[information_dimension]", "[boundary_box_dimension]", "[gauge_comparison]"] {
        assert!(text.contains(key), "missing {key}");
    }
    let csv = rep.centers_csv();
    assert!(csv.starts_with("x,y,slope,"));
    assert_eq!(csv.lines().count(), rep.centers.len() + 1);
}

#[test]
fn mass_quantile_centers_follow_the_mass() {
    let mu = point_mass_measure(50).unwrap();
    let c = mass_quantile_centers(&mu, 10);
    assert_eq!(c.len(), 10);
    assert!(c.iter().all(|z| *z == mu.arcs[0].midpoint));
    let dust = cantor_dust_measure(1.0, 4).unwrap();
    let c = mass_quantile_centers(&dust, 64);
    let distinct: std::collections::HashSet<_> = c.iter().map(|z| (z.x.to_bits(), z.y.to_bits())).collect();
    assert_eq!(distinct.len(), 64);
}
