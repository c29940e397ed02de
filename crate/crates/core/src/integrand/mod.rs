//! Homogeneous degree-p integrands f with δ-monotone gradient, their
//! derivatives, structure constants and mollified regularizations.

mod monotone;
pub mod mollifier;
mod profile;

use std::f64::consts::TAU;
use std::sync::Arc;

pub use monotone::{
    comparability_constants, sandwich_bounds, structure_constants, verify_delta_monotone, Comparability,
    MonotonicityEstimate, SandwichBounds, StructureConstants,
};
pub use profile::{AngularProfile, PeriodicSpline, ProfileFn};

use crate::error::{Error, Result};
use crate::linalg::{Mat2, Vec2};
use mollifier::{rules, DiskRule, DISTANT_FIELD_RATIO, FAR_FIELD_RATIO, FULL_ORDER, MID_FIELD_RATIO, NEGLIGIBLE_RATIO};

/// Value, gradient and Hessian of f at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub grad: Vec2,
    pub hess: Mat2,
}

/// f(η) = |η|^p · profile(arg η), optionally mollified with radius ε.
#[derive(Debug, Clone)]
pub struct Integrand {
    p: f64,
    profile: AngularProfile,
    epsilon: f64,
    delta_certified: Option<f64>,
}

impl Integrand {
    pub fn new(p: f64, profile: AngularProfile) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(Error::input(format!("degree p must lie in (1, ∞), got {p}")));
        }
        if let AngularProfile::QuadraticForm(a) = &profile {
            if p != 2.0 {
                return Err(Error::input("a quadratic-form integrand has degree p = 2"));
            }
            if (a.m[0][1] - a.m[1][0]).abs() > 1e-14 * a.max_abs() {
                return Err(Error::input("quadratic-form matrix must be symmetric"));
            }
            if a.sym_eigenvalues().0 <= 0.0 {
                return Err(Error::input("quadratic-form matrix must be positive definite"));
            }
        }
        let (lo, hi) = profile.bounds(1024);
        if !(lo > 0.0 && hi.is_finite()) {
            return Err(Error::input(format!("angular profile must be positive and finite (min {lo}, max {hi})")));
        }
        Ok(Integrand { p, profile, epsilon: 0.0, delta_certified: None })
    }

    /// f(η) = |η|^p.
    pub fn power(p: f64) -> Result<Self> {
        Integrand::new(p, AngularProfile::Isotropic)
    }

    /// f(η) = ηᵀAη with A symmetric positive definite.
    pub fn quadratic_form(a: Mat2) -> Result<Self> {
        Integrand::new(2.0, AngularProfile::QuadraticForm(a))
    }

    pub fn sampled(p: f64, samples: Vec<f64>) -> Result<Self> {
        Integrand::new(p, AngularProfile::Sampled(Arc::new(PeriodicSpline::new(samples)?)))
    }

    pub fn closed(p: f64, profile: Arc<dyn ProfileFn>) -> Result<Self> {
        Integrand::new(p, AngularProfile::Closed(profile))
    }

    pub fn with_delta_certified(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(Error::input(format!("certified δ must lie in (0, 1], got {delta}")));
        }
        self.delta_certified = Some(delta);
        Ok(self)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn profile(&self) -> &AngularProfile {
        &self.profile
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn delta_certified(&self) -> Option<f64> {
        self.delta_certified
    }

    /// The same integrand without mollification.
    pub fn unmollified(&self) -> Integrand {
        Integrand { epsilon: 0.0, ..self.clone() }
    }

    /// Returns f_ε = f ∗ θ_ε of the unmollified base of `self`. ε = 0
    /// returns the base unchanged.
    pub fn mollify(&self, epsilon: f64) -> Result<Integrand> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::input(format!("mollification radius must be finite and ≥ 0, got {epsilon}")));
        }
        let out = Integrand { epsilon, ..self.clone() };
        if epsilon > 0.0 {
            out.check_mollifier_convergence()?;
        }
        Ok(out)
    }

    /// Compares the order-16 rule against an order-32 rule at |η| = 2ε,
    /// where the integrand is smooth on the mollifier support.
    fn check_mollifier_convergence(&self) -> Result<()> {
        let fine = mollifier::polar_rule(2 * FULL_ORDER, 2 * FULL_ORDER);
        let base = self.unmollified();
        let mut worst: f64 = 0.0;
        for k in 0..8 {
            let eta = Vec2::polar(2.0 * self.epsilon, TAU * k as f64 / 8.0 + 0.1);
            let coarse = self.sum_value(&rules().full, eta);
            let reference: f64 = fine
                .points
                .iter()
                .zip(&fine.weights)
                .map(|(w, om)| om * base.raw_value(eta - *w * self.epsilon))
                .sum();
            worst = worst.max((coarse - reference).abs() / reference.abs());
        }
        if worst > 1e-6 {
            return Err(Error::Numerical {
                message: "mollifier quadrature did not converge".into(),
                residual: worst,
            });
        }
        Ok(())
    }

    // ---- checked public evaluation ------------------------------------

    pub fn eval_f(&self, eta: Vec2) -> Result<f64> {
        check_finite(eta)?;
        Ok(self.value(eta))
    }

    pub fn grad_f(&self, eta: Vec2) -> Result<Vec2> {
        check_finite(eta)?;
        self.check_singular(eta)?;
        Ok(self.value_grad(eta).1)
    }

    pub fn hessian_f(&self, eta: Vec2) -> Result<Mat2> {
        check_finite(eta)?;
        self.check_singular(eta)?;
        Ok(self.jet(eta).hess)
    }

    fn check_singular(&self, eta: Vec2) -> Result<()> {
        if self.epsilon == 0.0 && self.p < 2.0 && eta == Vec2::ZERO {
            return Err(Error::Singularity { p: self.p });
        }
        Ok(())
    }

    // ---- unchecked evaluation used by the solver ----------------------

    #[inline]
    pub fn value(&self, eta: Vec2) -> f64 {
        if self.smoothing_matters(eta) {
            self.sum_value(self.rule_for(eta), eta)
        } else {
            self.raw_value(eta)
        }
    }

    #[inline]
    pub fn value_grad(&self, eta: Vec2) -> (f64, Vec2) {
        if self.smoothing_matters(eta) {
            let rule = self.rule_for(eta);
            let (mut v, mut g) = (0.0, Vec2::ZERO);
            for (w, om) in rule.points.iter().zip(&rule.weights) {
                let (fv, fg) = self.raw_value_grad(eta - *w * self.epsilon);
                v += om * fv;
                g += fg * *om;
            }
            (v, g)
        } else {
            self.raw_value_grad(eta)
        }
    }

    #[inline]
    pub fn jet(&self, eta: Vec2) -> Jet {
        if self.smoothing_matters(eta) {
            let rule = self.rule_for(eta);
            let mut acc = Jet { value: 0.0, grad: Vec2::ZERO, hess: Mat2::ZERO };
            for (w, om) in rule.points.iter().zip(&rule.weights) {
                let j = self.raw_jet(eta - *w * self.epsilon);
                acc.value += om * j.value;
                acc.grad += j.grad * *om;
                acc.hess = acc.hess.add(&j.hess.scale(*om));
            }
            acc
        } else {
            self.raw_jet(eta)
        }
    }

    /// False when ε = 0 or when the mollifier correction, of relative size
    /// (ε/|η|)², is below double precision.
    #[inline]
    fn smoothing_matters(&self, eta: Vec2) -> bool {
        self.epsilon > 0.0 && eta.norm() < NEGLIGIBLE_RATIO * self.epsilon
    }

    #[inline]
    fn rule_for(&self, eta: Vec2) -> &'static DiskRule {
        let r = rules();
        let kappa = eta.norm() / self.epsilon;
        if kappa >= DISTANT_FIELD_RATIO {
            &r.distant
        } else if kappa >= MID_FIELD_RATIO {
            &r.mid
        } else if kappa >= FAR_FIELD_RATIO {
            &r.far
        } else {
            &r.full
        }
    }

    fn sum_value(&self, rule: &DiskRule, eta: Vec2) -> f64 {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(w, om)| om * self.raw_value(eta - *w * self.epsilon))
            .sum()
    }

    #[inline]
    fn raw_value(&self, eta: Vec2) -> f64 {
        match &self.profile {
            AngularProfile::Isotropic => pow_fast(eta.norm_sq(), 0.5 * self.p),
            AngularProfile::QuadraticForm(a) => a.quad(eta),
            prof => {
                let r = eta.norm();
                if r == 0.0 {
                    0.0
                } else {
                    pow_fast(r, self.p) * prof.value(eta.arg())
                }
            }
        }
    }

    #[inline]
    fn raw_value_grad(&self, eta: Vec2) -> (f64, Vec2) {
        let p = self.p;
        match &self.profile {
            AngularProfile::Isotropic => {
                let r2 = eta.norm_sq();
                if r2 == 0.0 {
                    return (0.0, Vec2::ZERO);
                }
                let rp2 = pow_fast(r2, 0.5 * p - 1.0);
                (rp2 * r2, eta * (p * rp2))
            }
            AngularProfile::QuadraticForm(a) => {
                let g = a.mul_vec(eta);
                (g.dot(eta), g * 2.0)
            }
            prof => {
                let r = eta.norm();
                if r == 0.0 {
                    return (0.0, Vec2::ZERO);
                }
                let [g, g1, _] = prof.jet(eta.arg());
                let er = eta * (1.0 / r);
                let et = er.perp();
                let rp1 = pow_fast(r, p - 1.0);
                (rp1 * r * g, (er * (p * g) + et * g1) * rp1)
            }
        }
    }

    #[inline]
    fn raw_jet(&self, eta: Vec2) -> Jet {
        let p = self.p;
        match &self.profile {
            AngularProfile::Isotropic => {
                let r2 = eta.norm_sq();
                if r2 == 0.0 {
                    return Jet { value: 0.0, grad: Vec2::ZERO, hess: self.hessian_at_origin() };
                }
                let rp2 = pow_fast(r2, 0.5 * p - 1.0);
                let c = (p - 2.0) / r2;
                let hess = Mat2::new(
                    p * rp2 * (1.0 + c * eta.x * eta.x),
                    p * rp2 * c * eta.x * eta.y,
                    p * rp2 * c * eta.x * eta.y,
                    p * rp2 * (1.0 + c * eta.y * eta.y),
                );
                Jet { value: rp2 * r2, grad: eta * (p * rp2), hess }
            }
            AngularProfile::QuadraticForm(a) => {
                let g = a.mul_vec(eta);
                Jet { value: g.dot(eta), grad: g * 2.0, hess: a.scale(2.0) }
            }
            prof => {
                let r = eta.norm();
                if r == 0.0 {
                    return Jet { value: 0.0, grad: Vec2::ZERO, hess: self.hessian_at_origin() };
                }
                let [g, g1, g2] = prof.jet(eta.arg());
                let er = eta * (1.0 / r);
                let et = er.perp();
                let rp2 = pow_fast(r, p - 2.0);
                // Hessian in the (e_r, e_θ) frame.
                let hrr = p * (p - 1.0) * g;
                let hrt = (p - 1.0) * g1;
                let htt = p * g + g2;
                let (c, s) = (er.x, er.y);
                let h11 = hrr * c * c - 2.0 * hrt * c * s + htt * s * s;
                let h12 = (hrr - htt) * c * s + hrt * (c * c - s * s);
                let h22 = hrr * s * s + 2.0 * hrt * c * s + htt * c * c;
                Jet {
                    value: rp2 * r * r * g,
                    grad: (er * (p * g) + et * g1) * (rp2 * r),
                    hess: Mat2::new(h11, h12, h12, h22).scale(rp2),
                }
            }
        }
    }

    /// D²f(0): zero for p > 2, infinite for p < 2, and the direction-0
    /// limit for p = 2 (exact for isotropic and quadratic-form integrands).
    fn hessian_at_origin(&self) -> Mat2 {
        if self.p > 2.0 {
            Mat2::ZERO
        } else if self.p < 2.0 {
            Mat2::diag(f64::INFINITY, f64::INFINITY)
        } else {
            match &self.profile {
                AngularProfile::Isotropic => Mat2::diag(2.0, 2.0),
                AngularProfile::QuadraticForm(a) => a.scale(2.0),
                _ => self.raw_jet(Vec2::new(1.0, 0.0)).hess,
            }
        }
    }
}

fn check_finite(eta: Vec2) -> Result<()> {
    if eta.is_finite() {
        Ok(())
    } else {
        Err(Error::input(format!("non-finite argument ({}, {})", eta.x, eta.y)))
    }
}

/// K = (1 + √(1−δ²)) / (1 − √(1−δ²)), the quasiconformality constant of a
/// δ-monotone gradient.
pub fn quasiconformal_k(delta: f64) -> Result<f64> {
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input(format!("δ must lie in (0, 1], got {delta}")));
    }
    if delta == 1.0 {
        return Ok(1.0);
    }
    let s = (1.0 - delta * delta).sqrt();
    Ok((1.0 + s) / (1.0 - s))
}


/// x^e, through square roots and integer powers when 4e is a small integer
/// (p = 1.5, 3, 2.5, ...), which is several times cheaper than `powf`.
#[inline]
fn pow_fast(x: f64, e: f64) -> f64 {
    let m = 4.0 * e;
    if m == m.round() && m.abs() <= 16.0 {
        let m = m as i32;
        if m % 4 == 0 {
            x.powi(m / 4)
        } else if m % 2 == 0 {
            x.sqrt().powi(m / 2)
        } else {
            x.sqrt().sqrt().powi(m)
        }
    } else {
        x.powf(e)
    }
}
