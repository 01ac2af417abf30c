//! Third critical field from the linear criterion `λ₁(κH) = κ²`.

use serde::{Deserialize, Serialize};

use crate::asymptotics::theta_half;
use crate::error::{Error, Result};
use crate::field::MinimumData;
use crate::halfline::DeGennesConstants;
use crate::sweep_fit::StripProblem;

/// Relative half-width of the root bracket around the formula value.
pub const BRACKET: f64 = 0.3;
/// Relative tolerance on `H`.
pub const H_TOL: f64 = 1e-6;
const CERTIFICATE_POINTS: usize = 5;
const MAX_ITER: usize = 60;

/// Two-term expansion `κ/(b'Θ₀) - Θ_{1/2}/(b'Θ₀^{3/2})`, obtained by inverting
/// `λ₁ = Θ₀b'B + Θ_{1/2}(b'B)^{1/2}` at `λ₁ = κ²`.
pub fn hc3_formula(kappa: f64, m: &MinimumData, c: &DeGennesConstants) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidInput(format!("kappa must be positive, got {kappa}")));
    }
    if !m.unique || !m.nondegenerate {
        return Err(Error::Hypothesis("critical-field expansion needs a unique non-degenerate boundary minimum".into()));
    }
    if !m.spectral_assumption_holds(c.theta0) {
        return Err(Error::Hypothesis(format!("need Θ₀b' < b, got Θ₀b' = {}, b = {}", c.theta0 * m.b_prime, m.b)));
    }
    let th = theta_half(m, c)?;
    Ok(kappa / (m.b_prime * c.theta0) - th / (m.b_prime * c.theta0.powf(1.5)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriticalFieldResult {
    pub kappa: f64,
    pub h_formula: f64,
    pub h_root: f64,
    /// `|h_root - h_formula| / h_root`
    pub gap: f64,
    /// `|λ₁(κ h_root) - κ²| / κ²`
    pub residual: f64,
    /// `(H, λ₁(κH))` on evenly spaced bracket points.
    pub certificate: Vec<(f64, f64)>,
    pub monotone: bool,
    pub evaluations: usize,
    /// Only the linear criterion is solved; the upper, lower and local
    /// critical fields coincide with `h_root` when the certificate is monotone.
    pub criterion: String,
}

/// Solves `λ₁(κH) = κ²` for `H` by safeguarded secant steps inside the bracket
/// `h_formula (1 ± 0.3)`. `lambda1(B)` is the lowest eigenvalue at field `B`.
pub fn hc3_root_with(kappa: f64, h_formula: f64, mut lambda1: impl FnMut(f64) -> Result<f64>) -> Result<CriticalFieldResult> {
    let target = kappa * kappa;
    let lo = h_formula * (1.0 - BRACKET);
    let hi = h_formula * (1.0 + BRACKET);
    if !(lo > 0.0) {
        return Err(Error::Bracket(format!("formula value {h_formula} gives no positive bracket")));
    }
    let mut evaluations = 0;
    let mut g = |h: f64| -> Result<f64> {
        evaluations += 1;
        Ok(lambda1(kappa * h)? - target)
    };
    let mut certificate = Vec::with_capacity(CERTIFICATE_POINTS);
    for i in 0..CERTIFICATE_POINTS {
        let h = lo + (hi - lo) * i as f64 / (CERTIFICATE_POINTS - 1) as f64;
        certificate.push((h, g(h)? + target));
    }
    let monotone = certificate.windows(2).all(|w| w[1].1 > w[0].1);
    if !monotone {
        let lambdas: Vec<f64> = certificate.iter().map(|c| c.1).collect();
        return Err(Error::Hypothesis(format!(
            "λ₁(κH) is not increasing on the bracket at κ = {kappa}: samples {lambdas:?}"
        )));
    }
    // narrow to the sampled cell holding the sign change
    let cell = certificate
        .windows(2)
        .position(|w| w[0].1 <= target && w[1].1 >= target)
        .ok_or_else(|| Error::Bracket(format!("κ² = {target} outside [{}, {}]", certificate[0].1, certificate[4].1)))?;
    let (mut a, mut fa) = (certificate[cell].0, certificate[cell].1 - target);
    let (mut b, mut fb) = (certificate[cell + 1].0, certificate[cell + 1].1 - target);
    let mut side = 0i8;
    let mut h = a;
    let mut fh = fa;
    for _ in 0..MAX_ITER {
        if fa == 0.0 {
            h = a;
            fh = 0.0;
            break;
        }
        if fb == 0.0 || (b - a).abs() <= H_TOL * b.abs() {
            (h, fh) = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
            break;
        }
        // Illinois variant of regula falsi
        h = (a * fb - b * fa) / (fb - fa);
        fh = g(h)?;
        if fh.abs() <= 1e-9 * target {
            break;
        }
        if (fh > 0.0) == (fb > 0.0) {
            b = h;
            fb = fh;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = h;
            fa = fh;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
        if (b - a).abs() <= H_TOL * h.abs() {
            break;
        }
    }
    Ok(CriticalFieldResult {
        kappa,
        h_formula,
        h_root: h,
        gap: (h - h_formula).abs() / h,
        residual: fh.abs() / target,
        certificate,
        monotone,
        evaluations,
        criterion: "linear".into(),
    })
}

/// Critical field on the strip. The discretization is frozen at the upper end
/// of the bracket so that `λ₁` is a continuous function of `H`.
pub fn hc3_root(kappa: f64, problem: &StripProblem) -> Result<CriticalFieldResult> {
    let h_formula = hc3_formula(kappa, &problem.minimum, &problem.constants)?;
    let disc = problem.disc(kappa * h_formula * (1.0 + BRACKET))?;
    hc3_root_with(kappa, h_formula, |b| {
        let d = problem.rescaled(b, &disc);
        Ok(problem.solve_on(b, &d, problem.theta(b, &d))?.eig.lambda1())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn root_of_model_law() {
        // λ₁(B) = 0.6 B + 0.8 √B
        let (a, b) = (0.6, 0.8);
        let law = |x: f64| Ok(a * x + b * x.sqrt());
        let kappa = 10.0;
        let guess = kappa / a - b / a.powf(1.5);
        let r = hc3_root_with(kappa, guess, law).unwrap();
        let exact = {
            // a (κH) + b √(κH) = κ², quadratic in √(κH)
            let s = (-b + (b * b + 4.0 * a * kappa * kappa).sqrt()) / (2.0 * a);
            s * s / kappa
        };
        assert!((r.h_root - exact).abs() <= 2e-6 * exact, "{} vs {exact}", r.h_root);
        assert!(r.residual < 1e-5);
        assert!(r.monotone);
    }

    #[test]
    fn non_monotone_sample_aborts() {
        let bumpy = |x: f64| Ok(100.0 + 1e-2 * (x - 1000.0).powi(2));
        assert!(matches!(hc3_root_with(10.0, 100.0, bumpy), Err(Error::Hypothesis(_))));
    }

    #[test]
    fn bracket_miss() {
        let flat = |x: f64| Ok(1e-3 * x);
        assert!(matches!(hc3_root_with(10.0, 50.0, flat), Err(Error::Bracket(_))));
    }
}
