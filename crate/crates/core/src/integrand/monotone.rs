//! Sampled monotonicity, sandwich and comparability constants.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{quasiconformal_k, Integrand};
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::quadrature::halton;

/// Offset of the near-coincident pairs that probe the Hessian regime.
const LOCAL_OFFSET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonotonicityEstimate {
    /// Minimum of ⟨Δ∇f, Δη⟩ / (|Δ∇f||Δη|) over the sampled pairs.
    pub delta_hat: f64,
    /// `false` when δ̂ ≤ 0.
    pub monotone: bool,
    pub worst_pair: (Vec2, Vec2),
    pub pairs: usize,
}

fn cranley_patterson(seed: u64, dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| rng.gen::<f64>()).collect()
}

/// Estimates δ in ⟨∇f(η)−∇f(η′), η−η′⟩ ≥ δ|∇f(η)−∇f(η′)||η−η′|.
///
/// By homogeneity of ∇f the first point is fixed on the unit circle and the
/// second ranges over radii in [a/b, b/a] for `radius_range = (a, b)`, so the
/// estimate is invariant under scaling of the range. Four fifths of the pairs
/// are quasi-random over the whole range, the rest are near-coincident.
pub fn verify_delta_monotone(
    f: &Integrand,
    n_samples: usize,
    radius_range: (f64, f64),
    seed: u64,
) -> Result<MonotonicityEstimate> {
    if n_samples < 1000 {
        return Err(Error::input(format!("need at least 1000 samples, got {n_samples}")));
    }
    let (a, b) = radius_range;
    if !(a > 0.0 && b >= a && b.is_finite()) {
        return Err(Error::input(format!("invalid radius range [{a}, {b}]")));
    }
    let log_span = (b / a).ln();
    let n_global = n_samples * 4 / 5;
    let global_shift = cranley_patterson(seed, 3);
    let local_shift = cranley_patterson(seed.wrapping_add(0x9e37_79b9), 2);

    let mut best = MonotonicityEstimate {
        delta_hat: f64::INFINITY,
        monotone: true,
        worst_pair: (Vec2::ZERO, Vec2::ZERO),
        pairs: n_samples,
    };
    let mut consider = |eta: Vec2, eta2: Vec2| {
        let dg = f.value_grad(eta).1 - f.value_grad(eta2).1;
        let de = eta - eta2;
        let denom = dg.norm() * de.norm();
        if denom > 0.0 {
            let q = dg.dot(de) / denom;
            if q < best.delta_hat {
                best.delta_hat = q;
                best.worst_pair = (eta, eta2);
            }
        }
    };
    for i in 0..n_global {
        let h = halton(i as u64, &global_shift);
        let eta = Vec2::polar(1.0, TAU * h[0]);
        let rho = (-log_span + 2.0 * log_span * h[1]).exp();
        consider(eta, Vec2::polar(rho, TAU * h[2]));
    }
    for i in 0..n_samples - n_global {
        let h = halton(i as u64, &local_shift);
        let eta = Vec2::polar(1.0, TAU * h[0]);
        consider(eta, eta + Vec2::polar(LOCAL_OFFSET, TAU * h[1]));
    }
    best.monotone = best.delta_hat > 0.0;
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    /// Extremes of ⟨Δ∇f, Δη⟩ / ((|η|+|η′|)^{p−2}|Δη|²) over the samples.
    pub lower: f64,
    pub upper: f64,
    /// Smallest c with the ratio in [1/c, c].
    pub c: f64,
}

/// Samples both magnitudes log-uniformly in `radius_range`.
pub fn sandwich_bounds(f: &Integrand, radius_range: (f64, f64), n_samples: usize, seed: u64) -> SandwichBounds {
    let (a, b) = radius_range;
    let shift = cranley_patterson(seed, 4);
    let (la, lb) = (a.ln(), b.ln());
    let mut lower = f64::INFINITY;
    let mut upper = 0.0_f64;
    let p = f.p();
    for i in 0..n_samples {
        let h = halton(i as u64, &shift);
        let eta = Vec2::polar((la + (lb - la) * h[0]).exp(), TAU * h[1]);
        let eta2 = Vec2::polar((la + (lb - la) * h[2]).exp(), TAU * h[3]);
        let de = eta - eta2;
        let d2 = de.norm_sq();
        if d2 == 0.0 {
            continue;
        }
        let dg = f.value_grad(eta).1 - f.value_grad(eta2).1;
        let q = dg.dot(de) / ((eta.norm() + eta2.norm()).powf(p - 2.0) * d2);
        lower = lower.min(q);
        upper = upper.max(q);
    }
    SandwichBounds { lower, upper, c: upper.max(1.0 / lower).max(1.0) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstants {
    /// Profile bounds: 1/M ≤ f(cos θ, sin θ) ≤ M.
    pub m: f64,
    /// Quasiconformality constant, present when δ is certified.
    pub k: Option<f64>,
    /// 1/M′ ≤ min{f, |η||∇f|} ≤ max{f, |η||∇f|} ≤ M′ on the unit circle.
    pub m_prime: f64,
    /// Sandwich constant over |η|, |η′| ∈ [0.1, 10].
    pub c_star_mono: f64,
}

pub fn structure_constants(f: &Integrand) -> Result<StructureConstants> {
    let base = f.unmollified();
    let n = 4096;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    let (mut lo2, mut hi2) = (f64::INFINITY, 0.0_f64);
    for i in 0..n {
        let eta = Vec2::polar(1.0, TAU * i as f64 / n as f64);
        let (v, g) = base.value_grad(eta);
        lo = lo.min(v);
        hi = hi.max(v);
        let gn = g.norm();
        lo2 = lo2.min(v.min(gn));
        hi2 = hi2.max(v.max(gn));
    }
    let k = f.delta_certified().map(quasiconformal_k).transpose()?;
    let sandwich = sandwich_bounds(&base, (0.1, 10.0), 20_000, 17);
    Ok(StructureConstants {
        m: hi.max(1.0 / lo).max(1.0),
        k,
        m_prime: hi2.max(1.0 / lo2).max(1.0),
        c_star_mono: sandwich.c,
    })
}

/// Comparability constants of f, |∇f| and ‖D²f‖ against |η|^p, |η|^{p−1},
/// |η|^{p−2}. By homogeneity it suffices to sample the unit circle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Comparability {
    pub c_value: f64,
    pub c_grad: f64,
    pub c_hess: f64,
}

pub fn comparability_constants(f: &Integrand, n: usize) -> Comparability {
    let base = f.unmollified();
    let mut bounds = [(f64::INFINITY, 0.0_f64); 3];
    for i in 0..n {
        let eta = Vec2::polar(1.0, TAU * (i as f64 + 0.5) / n as f64);
        let j = base.jet(eta);
        let (e0, e1) = j.hess.sym_eigenvalues();
        let vals = [j.value, j.grad.norm(), e0.abs().max(e1.abs())];
        for (b, v) in bounds.iter_mut().zip(vals) {
            b.0 = b.0.min(v);
            b.1 = b.1.max(v);
        }
    }
    let c = |(lo, hi): (f64, f64)| hi.max(1.0 / lo).max(1.0);
    Comparability { c_value: c(bounds[0]), c_grad: c(bounds[1]), c_hess: c(bounds[2]) }
}
