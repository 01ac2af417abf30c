//! Explicit trial states on the strip grid and their Rayleigh quotients.
//!
//! With `B̂ = Bb'`, `σ = B̂^{1/4}(s - s*)` and `τ = B̂^{1/2} t`, the envelope of the
//! non-degenerate quasimode is
//!
//! ```text
//! U = u₀ψ₀ + h·2i v ψ₀' + h²(g₁ + g₂σ²)ψ₀,   h = B̂^{-1/4},  ψ₀ = e^{-cσ²}
//! ```
//!
//! where `v = R₀((τ+ξ₀)u₀)` and `g₁, g₂` solve the second-order equation term by term
//! in the basis `{ψ₀, σ²ψ₀}`. The band momentum `ξ₀B̂^{1/2}` is carried by the strip
//! frame, so no fast phase appears in the sampled envelope unless it is removed on
//! purpose.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::MinimumData;
use crate::halfline::{first_order_weak, multiply_weak, reduced_resolvent_weak, DeGennesConstants};
use crate::strip::OperatorPair;

/// Largest projection onto `u₀` tolerated in a separable right-hand side.
const SOLVABILITY_TOL: f64 = 1e-8;

/// Profiles of the curvature-corrected half-line ground state.
#[derive(Debug, Clone)]
pub struct Profiles {
    pub u0: Vec<f64>,
    /// `u₁ = R₀(λ₁ - H₁)u₀`
    pub u1: Vec<f64>,
    /// Fixed by solvability: `⟨H₁u₀, u₀⟩`.
    pub lambda1: f64,
    /// `⟨(λ₁ - H₁)u₀, u₀⟩` after `λ₁` is set.
    pub solvability: f64,
}

pub fn build_profiles(c: &DeGennesConstants, k0: f64, k1: f64) -> Result<Profiles> {
    let (weak, lambda1) = first_order_weak(c, k0, k1);
    let solvability = projection(&weak, c);
    let u1 = reduced_resolvent_weak(weak, c)?;
    Ok(Profiles { u0: c.u0.clone(), u1, lambda1, solvability })
}

fn projection(weak: &[f64], c: &DeGennesConstants) -> f64 {
    weak.iter().zip(&c.u0).map(|(f, u)| f * u).sum()
}

fn add_scaled(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

/// Normal profiles of the non-degenerate quasimode for `k₀`, `k₁`, `α` in
/// normalized units (`b' = 1`).
#[derive(Debug, Clone)]
pub struct NondegenerateProfiles {
    pub u0: Vec<f64>,
    pub v: Vec<f64>,
    pub g1: Vec<f64>,
    pub g2: Vec<f64>,
    /// Gaussian rate `c` in `ψ₀ = e^{-cσ²}`.
    pub rate: f64,
    /// Coefficient of `B^{1/2}` on this grid.
    pub theta_half: f64,
    /// Projections of the two separable right-hand sides onto `u₀`.
    pub solvability: [f64; 2],
}

pub fn nondegenerate_profiles(c: &DeGennesConstants, k0: f64, k1: f64, alpha: f64) -> Result<NondegenerateProfiles> {
    if !(alpha > 0.0) {
        return Err(Error::Hypothesis(format!("non-degenerate quasimode needs α > 0, got {alpha}")));
    }
    let xi = c.grid_xi0;
    let mass_u0 = multiply_weak(c, |_| 1.0, &c.u0);
    let v = reduced_resolvent_weak(multiply_weak(c, |t| t + xi, &c.u0), c)?;
    // f_b = u₀ - 4(τ+ξ₀)v,  f_c = -2ατ(τ+ξ₀)u₀
    let fb = add_scaled(&mass_u0, -4.0, &multiply_weak(c, |t| t + xi, &v));
    let fc: Vec<f64> = multiply_weak(c, |t| -2.0 * alpha * t * (t + xi), &c.u0);
    let a = projection(&fb, c);
    let b = -projection(&fc, c);
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::Singular(format!("tangential oscillator coefficients {a}, {b}")));
    }
    let rate = 0.5 * (b / a).sqrt();
    let (h1_weak, lambda_h1) = first_order_weak(c, k0, k1);
    let theta_half = lambda_h1 + 2.0 * rate * a;
    // f_a - 2c f_b with f_a = (Θ_{1/2} - H₁)u₀
    let fa = add_scaled(&h1_weak, theta_half - lambda_h1, &mass_u0);
    let rhs1 = add_scaled(&fa, -2.0 * rate, &fb);
    let rhs2 = add_scaled(&fc, 4.0 * rate * rate, &fb);
    let scale = fb.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(1.0);
    let solvability = [projection(&rhs1, c) / scale, projection(&rhs2, c) / scale];
    if solvability.iter().any(|p| p.abs() > SOLVABILITY_TOL) {
        return Err(Error::Singular(format!("separable right-hand sides not orthogonal to u₀: {solvability:?}")));
    }
    Ok(NondegenerateProfiles {
        u0: c.u0.clone(),
        v,
        g1: reduced_resolvent_weak(rhs1, c)?,
        g2: reduced_resolvent_weak(rhs2, c)?,
        rate,
        theta_half,
        solvability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QuasimodeKind {
    /// Gaussian `e^{-s²B^{1/2-2ρ}}` in `s` over the curvature-corrected profile.
    Degenerate { rho: f64 },
    /// Harmonic-oscillator envelope with `order` terms of the expansion.
    Nondegenerate { order: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasimodeSpec {
    pub kind: QuasimodeKind,
    pub b: f64,
    /// Center `s*` on the boundary.
    pub center: f64,
    pub b_prime: f64,
    pub k0: f64,
    /// `k₀ - (1/b')∂β/∂t`
    pub k1: f64,
    /// `½∂²β/∂s²`
    pub alpha: f64,
    /// Keep the band momentum; `false` removes it for comparison.
    pub phase: bool,
}

impl QuasimodeSpec {
    pub fn nondegenerate(b: f64, m: &MinimumData, order: usize) -> Result<Self> {
        let s = Self {
            kind: QuasimodeKind::Nondegenerate { order },
            b,
            center: m.s_star,
            b_prime: m.b_prime,
            k0: m.kappa0,
            k1: m.kappa0 - m.dbeta_dt / m.b_prime,
            alpha: m.alpha,
            phase: true,
        };
        s.validate()?;
        Ok(s)
    }

    /// Degenerate trial state centred at `center` for a field with boundary
    /// value `b_prime`, curvature `k0` and normal derivative `dbeta_dt` there.
    pub fn degenerate(b: f64, center: f64, b_prime: f64, k0: f64, dbeta_dt: f64, rho: f64) -> Result<Self> {
        let s = Self {
            kind: QuasimodeKind::Degenerate { rho },
            b,
            center,
            b_prime,
            k0,
            k1: k0 - dbeta_dt / b_prime,
            alpha: 0.0,
            phase: true,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn without_phase(mut self) -> Self {
        self.phase = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b > 0.0 && self.b_prime > 0.0) {
            return Err(Error::InvalidInput(format!("need B > 0 and b' > 0, got {}, {}", self.b, self.b_prime)));
        }
        match self.kind {
            QuasimodeKind::Degenerate { rho } if !(rho > 0.0 && rho < 0.25) => {
                Err(Error::InvalidInput(format!("ρ must lie in (0, 1/4), got {rho}")))
            }
            QuasimodeKind::Nondegenerate { order } if !(1..=3).contains(&order) => {
                Err(Error::InvalidInput(format!("order must be 1, 2 or 3, got {order}")))
            }
            QuasimodeKind::Nondegenerate { .. } if !(self.alpha > 0.0) => {
                Err(Error::Hypothesis(format!("non-degenerate quasimode needs α > 0, got {}", self.alpha)))
            }
            _ => Ok(()),
        }
    }

    /// Normalized `(α/b', scaled field strength)`.
    fn scaled(&self) -> (f64, f64) {
        (self.alpha / self.b_prime, self.b * self.b_prime)
    }
}

/// `1` on `[0, 0.6 t0]`, `0` beyond `0.9 t0`, quintic smoothstep between.
pub fn cutoff(t: f64, t0: f64) -> f64 {
    let x = ((t - 0.6 * t0) / (0.3 * t0)).clamp(0.0, 1.0);
    1.0 - x * x * x * (10.0 - 15.0 * x + 6.0 * x * x)
}

/// Samples the quasimode described by `spec` onto the unknowns of `op`.
pub fn build(spec: &QuasimodeSpec, c: &DeGennesConstants, op: &OperatorPair) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let grid = c.grid();
    let (alpha_hat, b_hat) = spec.scaled();
    let h = b_hat.powf(-0.25);
    let period = op.period;
    let t0 = op.disc.t0;
    let origin = op.disc.origin;
    let momentum = op.disc.momentum;
    let offset = |s: f64| (s - spec.center + 0.5 * period).rem_euclid(period) - 0.5 * period;
    let unphase = |s: f64| {
        if spec.phase {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::from_polar(1.0, -momentum * (s - origin).rem_euclid(period))
        }
    };

    let out = match spec.kind {
        QuasimodeKind::Nondegenerate { order } => {
            let p = nondegenerate_profiles(c, spec.k0, spec.k1, alpha_hat)?;
            op.sample(|s, t| {
                let sigma = offset(s) / h;
                let tau = t / (h * h);
                let psi = (-p.rate * sigma * sigma).exp();
                let mut val = Complex64::new(grid.interpolate(&p.u0, tau), 0.0);
                if order >= 2 {
                    // 2i v ψ₀'/ψ₀ = -4icσ v
                    val += Complex64::new(0.0, -4.0 * p.rate * sigma * h * grid.interpolate(&p.v, tau));
                }
                if order >= 3 {
                    val += h * h * (grid.interpolate(&p.g1, tau) + sigma * sigma * grid.interpolate(&p.g2, tau));
                }
                val * psi * cutoff(t, t0) * unphase(s)
            })
        }
        QuasimodeKind::Degenerate { rho } => {
            let p = build_profiles(c, spec.k0, spec.k1)?;
            let width = b_hat.powf(0.5 - 2.0 * rho);
            op.sample(|s, t| {
                let d = offset(s);
                let tau = t / (h * h);
                let psi = grid.interpolate(&p.u0, tau) + h * h * grid.interpolate(&p.u1, tau);
                Complex64::new(psi * (-d * d * width).exp() * cutoff(t, t0), 0.0) * unphase(s)
            })
        }
    };
    let norm = op.m.form(&out, &out).re.sqrt();
    if !(norm > 0.0) {
        return Err(Error::InvalidInput("quasimode vanishes on the strip grid".into()));
    }
    Ok(out.into_iter().map(|z| z / norm).collect())
}

pub fn build_nondegenerate(
    b: f64,
    m: &MinimumData,
    c: &DeGennesConstants,
    order: usize,
    op: &OperatorPair,
) -> Result<Vec<Complex64>> {
    build(&QuasimodeSpec::nondegenerate(b, m, order)?, c, op)
}

/// `xᴴKx / xᴴMx`
pub fn rayleigh(u: &[Complex64], op: &OperatorPair) -> Result<f64> {
    if u.len() != op.dim() {
        return Err(Error::InvalidInput(format!("vector of length {} for a {}-dimensional pencil", u.len(), op.dim())));
    }
    let den = op.m.form(u, u).re;
    if !(den > 0.0) {
        return Err(Error::InvalidInput("zero trial vector".into()));
    }
    Ok(op.k.form(u, u).re / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfline::{find_minimum, HalfLineDisc};
    use std::sync::OnceLock;

    fn constants() -> &'static DeGennesConstants {
        static C: OnceLock<DeGennesConstants> = OnceLock::new();
        C.get_or_init(|| find_minimum(&HalfLineDisc::default()).unwrap())
    }

    #[test]
    fn flat_profiles_vanish() {
        let p = build_profiles(constants(), 0.0, 0.0).unwrap();
        assert_eq!(p.lambda1, 0.0);
        assert!(p.u1.iter().all(|x| x.abs() < 1e-14));
    }

    #[test]
    fn curved_profile_solvability() {
        let c = constants();
        let p = build_profiles(c, 1.0, 1.0).unwrap();
        assert!(p.solvability.abs() < 1e-8);
        assert!((p.lambda1 + c.c1).abs() < 1e-6, "{} vs {}", p.lambda1, -c.c1);
        assert!(c.grid().inner(&p.u1, &p.u0).unwrap().abs() < 1e-10);
        let q = build_profiles(c, 0.4, 1.3).unwrap();
        let expected = -0.5 * (0.4 + 1.3) * c.c1 + c.theta0 * c.xi0 * (1.3 - 0.4);
        assert!((q.lambda1 - expected).abs() < 1e-6);
    }

    #[test]
    fn nondegenerate_profiles_match_closed_form() {
        let c = constants();
        for &(k0, k1, alpha) in &[(1.0, 0.0, 0.5), (0.0, 0.0, 1.0), (0.3, 1.1, 2.0)] {
            let p = nondegenerate_profiles(c, k0, k1, alpha).unwrap();
            let closed = -0.5 * (k0 + k1) * c.c1
                + (k1 - k0) * c.theta0 * c.xi0
                + (3.0 * c.c1).sqrt() * c.theta0.powf(0.75) * alpha.sqrt();
            assert!((p.theta_half - closed).abs() < 1e-5, "{} vs {closed}", p.theta_half);
            let rate = c.theta0.powf(0.25) * alpha.sqrt() / (2.0 * (3.0 * c.c1).sqrt());
            assert!((p.rate - rate).abs() < 1e-5);
            assert!(p.solvability.iter().all(|x| x.abs() < 1e-12));
            let g = c.grid();
            for f in [&p.v, &p.g1, &p.g2] {
                assert!(g.inner(f, &p.u0).unwrap().abs() < 1e-10);
            }
        }
        assert!(nondegenerate_profiles(c, 1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn cutoff_shape() {
        assert_eq!(cutoff(0.0, 1.0), 1.0);
        assert_eq!(cutoff(0.6, 1.0), 1.0);
        assert_eq!(cutoff(0.9, 1.0), 0.0);
        assert!((cutoff(0.75, 1.0) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let bad = QuasimodeSpec::degenerate(100.0, 0.0, 1.0, 1.0, 0.0, 0.3);
        assert!(bad.is_err());
        assert!(QuasimodeSpec::degenerate(100.0, 0.0, 1.0, 1.0, 0.0, 1.0 / 12.0).is_ok());
    }
}
