use std::f64::consts::TAU;
use std::sync::{Arc, OnceLock};

use proptest::prelude::*;

use super::*;
use crate::geometry::{make_domain, mesh, DomainSpec, Mesh};
use crate::solver::{solve_capacitary, SolveOptions};

const R: f64 = 5.0;

fn disk_mesh() -> Arc<Mesh> {
    static MESH: OnceLock<Arc<Mesh>> = OnceLock::new();
    MESH.get_or_init(|| {
        let d = make_domain(&DomainSpec::Disk { radius: R, ratio: R }).unwrap();
        Arc::new(mesh(&d, 0.1, 0.25).unwrap())
    })
    .clone()
}

fn disk_solution(p: f64) -> &'static ScalarField {
    static P2: OnceLock<ScalarField> = OnceLock::new();
    static P3: OnceLock<ScalarField> = OnceLock::new();
    let cell = if p == 2.0 { &P2 } else { &P3 };
    assert!(p == 2.0 || p == 3.0);
    cell.get_or_init(|| solve_capacitary(disk_mesh(), &Integrand::power(p).unwrap(), &SolveOptions::default()).unwrap())
}

/// Flux ∫_{|z|=R} |u′|^{p−1} of the radial p-capacitary function.
fn radial_flux(p: f64) -> f64 {
    let slope = if p == 2.0 {
        1.0 / (R * R.ln())
    } else {
        let a = (p - 2.0) / (p - 1.0);
        a.abs() * R.powf(a - 1.0) / (R.powf(a) - 1.0).abs()
    };
    TAU * R * slope.powf(p - 1.0)
}

#[test]
fn disk_measure_is_uniform_for_p2() {
    let u = disk_solution(2.0);
    let mu = boundary_measure(u, &Integrand::power(2.0).unwrap()).unwrap();
    assert_eq!(mu.method, ExtractionMethod::WeakIdentity);
    for a in &mu.arcs {
        let expected = mu.total_mass * a.length / (TAU * R);
        assert!((a.weight / expected - 1.0).abs() < 0.02, "arc at {:?}: {} vs {expected}", a.midpoint, a.weight);
    }
}

#[test]
fn disk_total_mass_matches_flux() {
    let mu = boundary_measure(disk_solution(2.0), &Integrand::power(2.0).unwrap()).unwrap();
    let exact = TAU / R.ln();
    assert!((mu.total_mass / exact - 1.0).abs() < 0.02, "{} vs {exact}", mu.total_mass);
    assert!((radial_flux(2.0) - exact).abs() < 1e-12);
    let sum: f64 = mu.arcs.iter().map(|a| a.weight).sum();
    assert!((sum - mu.total_mass).abs() <= 1e-12 * sum);
}

#[test]
fn p3_total_mass_matches_radial_flux() {
    let mu = boundary_measure(disk_solution(3.0), &Integrand::power(3.0).unwrap()).unwrap();
    let exact = radial_flux(3.0);
    assert!((mu.total_mass / exact - 1.0).abs() < 0.02, "{} vs {exact}", mu.total_mass);
}

#[test]
fn converged_weights_are_not_negative() {
    for p in [2.0, 3.0] {
        let mu = boundary_measure(disk_solution(p), &Integrand::power(p).unwrap()).unwrap();
        assert!(mu.min_raw_weight >= -1e-8 * mu.total_mass, "p={p}: {}", mu.min_raw_weight);
        assert_eq!(mu.clamp_total, 0.0);
    }
}

#[test]
fn arcs_partition_the_outer_polyline() {
    let u = disk_solution(2.0);
    let mu = boundary_measure(u, &Integrand::power(2.0).unwrap()).unwrap();
    let perimeter: f64 = u.mesh().boundary_segments(crate::geometry::BoundaryTag::Outer).iter().map(|(a, b)| a.dist(*b)).sum();
    let total: f64 = mu.arcs.iter().map(|a| a.length).sum();
    assert!((total - perimeter).abs() < 1e-12 * perimeter);
    assert_eq!(mu.len(), u.mesh().outer_loop().len());
}

#[test]
fn level_flux_is_constant_and_matches_mass() {
    let f = Integrand::power(2.0).unwrap();
    let u = disk_solution(2.0);
    let exact = TAU / R.ln();
    let fluxes: Vec<f64> = [0.1, 0.2, 0.5, 0.8, 0.9].iter().map(|&t| level_flux(u, &f, t).unwrap()).collect();
    for q in &fluxes {
        assert!((q / exact - 1.0).abs() < 0.02, "{q} vs {exact}");
    }
    let (lo, hi) = fluxes.iter().fold((f64::INFINITY, 0.0_f64), |(a, b), &q| (a.min(q), b.max(q)));
    assert!(hi - lo <= 0.02 * level_flux(u, &f, 0.5).unwrap());
    let mu = boundary_measure(u, &f).unwrap();
    assert!((level_flux(u, &f, 0.05).unwrap() - mu.total_mass).abs() <= 0.03 * mu.total_mass);
}

#[test]
fn level_flux_p3_is_conserved() {
    let f = Integrand::power(3.0).unwrap();
    let u = disk_solution(3.0);
    let a = level_flux(u, &f, 0.2).unwrap();
    let b = level_flux(u, &f, 0.8).unwrap();
    assert!((a - b).abs() <= 0.02 * a, "{a} vs {b}");
    assert!((a / radial_flux(3.0) - 1.0).abs() < 0.02);
}

#[test]
fn level_flux_rejects_levels_outside_range() {
    let f = Integrand::power(2.0).unwrap();
    assert!(level_flux(disk_solution(2.0), &f, 1.5).is_err());
}

#[test]
fn ball_masses() {
    let mu = boundary_measure(disk_solution(2.0), &Integrand::power(2.0).unwrap()).unwrap();
    assert_eq!(measure_ball(&mu, Vec2::ZERO, 2.0 * R + 1.0), mu.total_mass);
    assert_eq!(measure_ball(&mu, Vec2::new(R, 0.0), 1e-9), 0.0);
    for theta in [0.0, 1.0, 2.5, 4.0] {
        let w = Vec2::polar(R, theta);
        let r = 1.0;
        // The chord subtends the arc 2R·asin(r/2R) on each side.
        let expected = 2.0 * (r / (2.0 * R)).asin() * 2.0 * R / (TAU * R) * mu.total_mass;
        let got = measure_ball(&mu, w, r);
        assert!((got / expected - 1.0).abs() < 0.03, "θ={theta}: {got} vs {expected}");
    }
}

#[test]
fn comparability_ratios_are_stable_on_the_disk() {
    let u = disk_solution(2.0);
    let mu = boundary_measure(u, &Integrand::power(2.0).unwrap()).unwrap();
    let mut ratios = Vec::new();
    for theta in [0.3, 1.9, 3.7, 5.2] {
        for r in [0.1, 0.2, 0.4] {
            let rep = check_measure_solution_comparability(u, &mu, Vec2::polar(R, theta), r).unwrap();
            assert!(rep.lower_ratio.is_finite() && rep.lower_ratio > 0.0);
            assert!(rep.upper_ratio.is_finite() && rep.upper_ratio > 0.0);
            assert!(rep.mass_half <= rep.mass_double);
            ratios.push((rep.lower_ratio, rep.upper_ratio));
        }
    }
    let spread = |v: Vec<f64>| v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread(ratios.iter().map(|r| r.0).collect()) < 3.0);
    assert!(spread(ratios.iter().map(|r| r.1).collect()) < 3.0);
}

#[test]
fn comparability_reports_degenerate_balls() {
    let u = disk_solution(2.0);
    let mu = boundary_measure(u, &Integrand::power(2.0).unwrap()).unwrap();
    // Far from the outer circle no arc midpoint is within 2r.
    assert!(check_measure_solution_comparability(u, &mu, Vec2::new(2.5, 0.0), 0.2).is_err());
    assert!(check_measure_solution_comparability(u, &mu, Vec2::new(R, 0.0), 0.0).is_err());
}

#[test]
fn level_limit_measure_is_comparable_to_weak_identity() {
    let f = Integrand::power(2.0).unwrap();
    let u = disk_solution(2.0);
    let a = boundary_measure(u, &f).unwrap();
    let b = boundary_measure_level_limit(u, &f).unwrap();
    assert_eq!(b.method, ExtractionMethod::LevelLimit);
    assert_eq!(a.len(), b.len());
    for (x, y) in a.arcs.iter().zip(&b.arcs) {
        assert_eq!(x.midpoint, y.midpoint);
        let q = x.weight / y.weight;
        assert!(q > 0.9 && q < 1.1, "ratio {q} at {:?}", x.midpoint);
    }
}

#[test]
fn unresolved_field_is_rejected() {
    // u = 0 on every non-inner node: no flux reaches the outer boundary.
    let u = ScalarField::boundary_data(disk_mesh());
    match boundary_measure(&u, &Integrand::power(2.0).unwrap()) {
        Err(Error::MeasureExtraction { .. }) => {}
        other => panic!("expected extraction error, got {other:?}"),
    }
}

#[test]
fn heavily_negative_weights_are_rejected() {
    // Outer flux alternating in sign along the boundary.
    let m = disk_mesh();
    let u = ScalarField::from_fn(m, |z| (R - z.norm()).max(0.0) / (R - 1.0) * (8.0 * z.arg()).cos()).unwrap();
    assert!(matches!(boundary_measure(&u, &Integrand::power(2.0).unwrap()), Err(Error::MeasureExtraction { .. })));
}

#[test]
fn csv_round_trip() {
    let mu = boundary_measure(disk_solution(2.0), &Integrand::power(2.0).unwrap()).unwrap();
    let text = mu.to_csv();
    assert!(text.starts_with("# total_mass "));
    assert!(text.contains("arc_index,midpoint_x,midpoint_y,arc_length,weight"));
    let back = BoundaryMeasure::from_csv(&text).unwrap();
    assert_eq!(back, mu);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mu.csv");
    mu.write(&path).unwrap();
    assert_eq!(BoundaryMeasure::read(&path).unwrap(), mu);
    assert!(BoundaryMeasure::from_csv("# p 2\narc_index,x\n").is_err());
}

#[test]
fn scaled_measure() {
    let arcs = vec![
        BoundaryArc { midpoint: Vec2::new(1.0, 0.0), length: 0.5, weight: 1.0 },
        BoundaryArc { midpoint: Vec2::new(0.0, 1.0), length: 0.5, weight: 3.0 },
    ];
    let mu = BoundaryMeasure::from_arcs(arcs, 2.0, ExtractionMethod::WeakIdentity).unwrap();
    assert_eq!(mu.total_mass, 4.0);
    let s = mu.scaled(0.5);
    assert_eq!(s.total_mass, 2.0);
    assert_eq!(s.arcs[1].weight, 1.5);
    let bad = vec![BoundaryArc { midpoint: Vec2::ZERO, length: 1.0, weight: -1.0 }];
    assert!(BoundaryMeasure::from_arcs(bad, 2.0, ExtractionMethod::WeakIdentity).is_err());
}

fn uniform_circle_measure(n: usize) -> BoundaryMeasure {
    let arcs = (0..n)
        .map(|i| {
            let t = TAU * (i as f64 + 0.5) / n as f64;
            BoundaryArc { midpoint: Vec2::polar(1.0, t), length: TAU / n as f64, weight: 1.0 / n as f64 }
        })
        .collect();
    BoundaryMeasure::from_arcs(arcs, 2.0, ExtractionMethod::WeakIdentity).unwrap()
}

proptest! {
    #[test]
    fn ball_mass_is_monotone_and_bounded(x in -1.5..1.5f64, y in -1.5..1.5f64, r in 0.0..3.0f64, dr in 0.0..1.0f64) {
        let mu = uniform_circle_measure(200);
        let w = Vec2::new(x, y);
        let a = measure_ball(&mu, w, r);
        let b = measure_ball(&mu, w, r + dr);
        prop_assert!(a <= b);
        prop_assert!(b <= mu.total_mass * (1.0 + 1e-12));
    }
}

#[test]
fn uniform_circle_ball_mass_matches_arc_fraction() {
    let mu = uniform_circle_measure(4000);
    let r = 0.3;
    let expected = 4.0 * (r / 2.0_f64).asin() / TAU;
    assert!((measure_ball(&mu, Vec2::new(1.0, 0.0), r) - expected).abs() < 2.0 / 4000.0);
}
