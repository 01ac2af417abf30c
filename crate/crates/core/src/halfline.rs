//! The Neumann harmonic oscillator `-d²/dt² + (t + ξ)²` on the half-line.
//!
//! Everything downstream (strip asymptotics, quasimodes, critical fields) is
//! expressed through the universal constants extracted here: the minimizer
//! `ξ₀` of the ground energy `μ(ξ)`, the minimum `Θ₀ = μ(ξ₀)`, the boundary
//! constant `C₁ = u_{ξ₀}(0)² / 3`, the moments `M_k` and the curvature
//! `μ''(ξ₀)`.
//!
//! The half-line is truncated at `T` with a Dirichlet wall. Both schemes share
//! the piecewise-linear stiffness matrix; they differ in how mass and potential
//! are integrated (trapezoidal lumping vs. exact Gauss quadrature), which is
//! what "second-order finite differences" and "P1 elements" reduce to on a
//! uniform grid with a ghost-point Neumann condition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre nodes/weights on [0, 1], exact through degree 7.
const GL4: [(f64, f64); 4] = [
    (0.069_431_844_202_973_71, 0.173_927_422_568_726_93),
    (0.330_009_478_207_571_87, 0.326_072_577_431_273_07),
    (0.669_990_521_792_428_1, 0.326_072_577_431_273_07),
    (0.930_568_155_797_026_3, 0.173_927_422_568_726_93),
];

/// Search window for the minimizer of `μ`.
const XI_WINDOW: (f64, f64) = (-1.2, -0.4);
/// Coarse scan resolution inside [`XI_WINDOW`].
const XI_SCAN: usize = 17;
/// Base step of the centered second difference for `μ''(ξ₀)`.
const MU2_STEP: f64 = 1e-2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Second-order differences with ghost-point Neumann condition
    /// (lumped mass, nodal potential).
    FiniteDifference,
    /// Piecewise-linear elements with consistent mass and exact potential.
    LinearElement,
}

/// Discretization of `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfLineDisc {
    pub length: f64,
    pub points: usize,
    pub scheme: Scheme,
}

impl Default for HalfLineDisc {
    fn default() -> Self {
        Self { length: 15.0, points: 3000, scheme: Scheme::FiniteDifference }
    }
}

impl HalfLineDisc {
    pub fn new(length: f64, points: usize, scheme: Scheme) -> Result<Self> {
        let disc = Self { length, points, scheme };
        disc.validate()?;
        Ok(disc)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length >= 10.0) {
            return Err(Error::InvalidInput(format!(
                "half-line truncation T = {} must be at least 10",
                self.length
            )));
        }
        if self.points < 200 {
            return Err(Error::InvalidInput(format!(
                "half-line grid needs at least 200 points, got {}",
                self.points
            )));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.points - 1) as f64
    }

    /// Same truncation, spacing halved.
    pub fn refined(&self) -> Self {
        Self { points: 2 * self.points - 1, ..*self }
    }
}

/// Symmetric tridiagonal matrix; `off[i]` couples rows `i` and `i + 1`.
#[derive(Debug, Clone)]
struct Tridiag {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiag {
    fn zeros(n: usize) -> Self {
        Self { diag: vec![0.0; n], off: vec![0.0; n.saturating_sub(1)] }
    }

    fn len(&self) -> usize {
        self.diag.len()
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut acc = self.diag[i] * x[i];
            if i > 0 {
                acc += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                acc += self.off[i] * x[i + 1];
            }
            y[i] = acc;
        }
        y
    }

    fn form(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul(y))
    }

    /// `self - shift * other`
    fn shifted(&self, shift: f64, other: &Tridiag) -> Tridiag {
        Tridiag {
            diag: self.diag.iter().zip(&other.diag).map(|(a, b)| a - shift * b).collect(),
            off: self.off.iter().zip(&other.off).map(|(a, b)| a - shift * b).collect(),
        }
    }

    /// Number of negative pivots of the LDLᵀ factorization.
    fn negative_pivots(&self) -> usize {
        let mut count = 0;
        let mut d = self.diag[0];
        for i in 0..self.len() {
            if i > 0 {
                let prev = if d == 0.0 { f64::MIN_POSITIVE } else { d };
                d = self.diag[i] - self.off[i - 1] * self.off[i - 1] / prev;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Thomas solve without pivoting; the callers only use it on definite
    /// matrices. Returns `None` on a vanishing pivot.
    fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        let scale = self.diag.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut piv = self.diag[0];
        if piv.abs() <= 1e-300 + 1e-15 * scale {
            return None;
        }
        if n > 1 {
            c[0] = self.off[0] / piv;
        }
        d[0] = rhs[0] / piv;
        for i in 1..n {
            piv = self.diag[i] - self.off[i - 1] * c[i - 1];
            if piv.abs() <= 1e-300 + 1e-15 * scale {
                return None;
            }
            if i + 1 < n {
                c[i] = self.off[i] / piv;
            }
            d[i] = (rhs[i] - self.off[i - 1] * d[i - 1]) / piv;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Some(d)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Assembled operators on one half-line grid. Unknowns are the nodes
/// `t_0 .. t_{n-2}`; the last node carries the Dirichlet wall.
#[derive(Debug, Clone)]
pub struct HalfLineGrid {
    disc: HalfLineDisc,
    nodes: Vec<f64>,
    stiffness: Tridiag,
    mass: Tridiag,
    /// Weak derivative form `∫ N_i N_j'`, stored as (sub, diag, super).
    deriv: (Vec<f64>, Vec<f64>, Vec<f64>),
}

impl HalfLineGrid {
    pub fn new(disc: HalfLineDisc) -> Result<Self> {
        disc.validate()?;
        let h = disc.spacing();
        let nodes: Vec<f64> = (0..disc.points).map(|i| i as f64 * h).collect();
        let m = disc.points - 1;

        let mut stiffness = Tridiag::zeros(m);
        for e in 0..m {
            stiffness.diag[e] += 1.0 / h;
            if e + 1 < m {
                stiffness.diag[e + 1] += 1.0 / h;
                stiffness.off[e] -= 1.0 / h;
            }
        }

        let mut grid = Self {
            disc,
            nodes,
            stiffness,
            mass: Tridiag::zeros(m),
            deriv: (vec![0.0; m], vec![0.0; m], vec![0.0; m]),
        };
        grid.mass = grid.weighted_mass(|_| 1.0);

        let (sub, dia, sup) = &mut grid.deriv;
        for e in 0..m {
            // element [t_e, t_{e+1}], local rows a = e, b = e + 1
            dia[e] -= 0.5;
            if e + 1 < m {
                sup[e] += 0.5;
                sub[e + 1] -= 0.5;
                dia[e + 1] += 0.5;
            }
        }
        Ok(grid)
    }

    pub fn disc(&self) -> &HalfLineDisc {
        &self.disc
    }

    /// All grid nodes including the wall.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    fn unknowns(&self) -> usize {
        self.disc.points - 1
    }

    /// Matrix of the form `(u, v) ↦ ∫ f u v`.
    fn weighted_mass(&self, f: impl Fn(f64) -> f64) -> Tridiag {
        let h = self.disc.spacing();
        let m = self.unknowns();
        let mut out = Tridiag::zeros(m);
        match self.disc.scheme {
            Scheme::FiniteDifference => {
                for i in 0..m {
                    let w = if i == 0 { 0.5 * h } else { h };
                    out.diag[i] = w * f(self.nodes[i]);
                }
            }
            Scheme::LinearElement => {
                for e in 0..m {
                    let (mut aa, mut ab, mut bb) = (0.0, 0.0, 0.0);
                    for &(x, w) in &GL4 {
                        let fx = f(self.nodes[e] + x * h) * w * h;
                        aa += fx * (1.0 - x) * (1.0 - x);
                        ab += fx * (1.0 - x) * x;
                        bb += fx * x * x;
                    }
                    out.diag[e] += aa;
                    if e + 1 < m {
                        out.diag[e + 1] += bb;
                        out.off[e] += ab;
                    }
                }
            }
        }
        out
    }

    fn hamiltonian(&self, xi: f64) -> Tridiag {
        let pot = self.weighted_mass(|t| (t + xi) * (t + xi));
        Tridiag {
            diag: self.stiffness.diag.iter().zip(&pot.diag).map(|(a, b)| a + b).collect(),
            off: self.stiffness.off.iter().zip(&pot.off).map(|(a, b)| a + b).collect(),
        }
    }

    fn restrict<'a>(&self, u: &'a [f64]) -> Result<&'a [f64]> {
        if u.len() != self.disc.points {
            return Err(Error::InvalidInput(format!(
                "grid function has {} values, grid has {} nodes",
                u.len(),
                self.disc.points
            )));
        }
        Ok(&u[..self.unknowns()])
    }

    fn extend(&self, mut u: Vec<f64>) -> Vec<f64> {
        u.push(0.0);
        u
    }

    /// `∫ f u v` with the scheme's quadrature.
    pub fn weighted_inner(&self, f: impl Fn(f64) -> f64, u: &[f64], v: &[f64]) -> Result<f64> {
        let u = self.restrict(u)?;
        let v = self.restrict(v)?;
        Ok(self.weighted_mass(f).form(u, v))
    }

    pub fn inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let u = self.restrict(u)?;
        let v = self.restrict(v)?;
        Ok(self.mass.form(u, v))
    }

    /// `∫ u' v` for the piecewise-linear interpolants.
    pub fn derivative_inner(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let u = self.restrict(u)?;
        let v = self.restrict(v)?;
        Ok(dot(v, &self.apply_derivative(u)))
    }

    fn apply_derivative(&self, u: &[f64]) -> Vec<f64> {
        let (sub, dia, sup) = &self.deriv;
        let m = self.unknowns();
        (0..m)
            .map(|i| {
                let mut acc = dia[i] * u[i];
                if i > 0 {
                    acc += sub[i] * u[i - 1];
                }
                if i + 1 < m {
                    acc += sup[i] * u[i + 1];
                }
                acc
            })
            .collect()
    }

    /// Linear interpolation of a grid function; zero beyond the wall.
    pub fn interpolate(&self, u: &[f64], t: f64) -> f64 {
        if t < 0.0 || t >= self.disc.length {
            return 0.0;
        }
        let h = self.disc.spacing();
        let x = t / h;
        let i = (x.floor() as usize).min(self.disc.points - 2);
        let w = x - i as f64;
        (1.0 - w) * u[i] + w * u[i + 1]
    }

    /// Interpolated first derivative (centered slopes blended linearly).
    pub fn interpolate_derivative(&self, u: &[f64], t: f64) -> f64 {
        if t < 0.0 || t >= self.disc.length {
            return 0.0;
        }
        let h = self.disc.spacing();
        let n = self.disc.points;
        let slope = |i: usize| -> f64 {
            if i == 0 {
                neumann_slope(u, h)
            } else if i + 1 >= n {
                (u[n - 1] - u[n - 2]) / h
            } else {
                (u[i + 1] - u[i - 1]) / (2.0 * h)
            }
        };
        let x = t / h;
        let i = (x.floor() as usize).min(n - 2);
        let w = x - i as f64;
        (1.0 - w) * slope(i) + w * slope(i + 1)
    }

    fn lowest_pair(&self, op: &Tridiag) -> Result<(f64, Vec<f64>)> {
        // Sturm bisection for the bottom of the pencil, then inverse iteration.
        let mut lo = 0.0_f64;
        let mut hi = 1.0_f64;
        let mut guard = 0;
        while op.shifted(hi, &self.mass).negative_pivots() == 0 {
            lo = hi;
            hi *= 2.0;
            guard += 1;
            if guard > 60 {
                return Err(Error::NoConvergence {
                    what: "upper bracket for the half-line ground energy".into(),
                    iterations: guard,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi || hi - lo <= 4.0 * f64::EPSILON * hi.abs() {
                break;
            }
            if op.shifted(mid, &self.mass).negative_pivots() == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let shift = lo - 1e-10 * lo.abs().max(1.0);
        let shifted = op.shifted(shift, &self.mass);
        let mut x = vec![1.0; self.unknowns()];
        for _ in 0..4 {
            let rhs = self.mass.mul(&x);
            x = shifted.solve(&rhs).ok_or_else(|| {
                Error::Singular("half-line inverse iteration hit a zero pivot".into())
            })?;
            let norm = self.mass.form(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= norm);
        }
        if x[0] < 0.0 {
            x.iter_mut().for_each(|v| *v = -*v);
        }
        let mu = op.form(&x, &x) / self.mass.form(&x, &x);
        Ok((mu, x))
    }
}

/// Second-order one-sided slope at `t = 0`.
fn neumann_slope(u: &[f64], h: f64) -> f64 {
    (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h)
}

/// Lowest eigenpair of the half-line family at one value of `ξ`.
#[derive(Debug, Clone)]
pub struct HalfLineEig {
    pub xi: f64,
    pub mu: f64,
    /// Values on every grid node, wall included; `∫u² = 1`, `u(0) > 0`.
    pub u: Vec<f64>,
    /// Largest |u| over the last 5% of the grid before the wall.
    pub tail: f64,
}

pub fn solve_mu(xi: f64, disc: &HalfLineDisc) -> Result<HalfLineEig> {
    let grid = HalfLineGrid::new(*disc)?;
    solve_on(&grid, xi)
}

fn solve_on(grid: &HalfLineGrid, xi: f64) -> Result<HalfLineEig> {
    if !xi.is_finite() || xi.abs() > grid.disc.length / 2.0 {
        return Err(Error::InvalidInput(format!(
            "|ξ| = {} exceeds half the truncation length {}",
            xi.abs(),
            grid.disc.length
        )));
    }
    let (mu, x) = grid.lowest_pair(&grid.hamiltonian(xi))?;
    let u = grid.extend(x);
    let start = (u.len() as f64 * 0.95) as usize;
    let tail = u[start..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    if tail > 1e-8 {
        log::warn!("half-line truncation at T = {} leaves |u| = {tail:.2e} near the wall", grid.disc.length);
    }
    Ok(HalfLineEig { xi, mu, u, tail })
}

/// `μ'(ξ) = 2 ∫ (t + ξ) u_ξ²`, exact for the discrete pencil.
fn mu_prime(grid: &HalfLineGrid, eig: &HalfLineEig) -> Result<f64> {
    Ok(2.0 * grid.weighted_inner(|t| t + eig.xi, &eig.u, &eig.u)?)
}

/// Universal constants on one grid (no extrapolation).
#[derive(Debug, Clone)]
struct GridLevel {
    xi0: f64,
    theta0: f64,
    c1: f64,
    moments: [f64; 5],
    mu2: f64,
    mu_prime: f64,
    u0: Vec<f64>,
}

fn grid_level(grid: &HalfLineGrid) -> Result<GridLevel> {
    let (a, b) = XI_WINDOW;
    let samples: Vec<(f64, f64)> = (0..XI_SCAN)
        .map(|i| {
            let xi = a + (b - a) * i as f64 / (XI_SCAN - 1) as f64;
            solve_on(grid, xi).map(|e| (xi, e.mu))
        })
        .collect::<Result<_>>()?;
    let imin = samples
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if imin == 0 || imin + 1 == samples.len() {
        return Err(Error::Bracket(format!(
            "μ attains its scan minimum at the window edge ξ = {}; refine the half-line grid",
            samples[imin].0
        )));
    }
    let deriv = |xi: f64| -> f64 {
        solve_on(grid, xi).and_then(|e| mu_prime(grid, &e)).unwrap_or(f64::NAN)
    };
    let (lo, hi) = (samples[imin - 1].0, samples[imin + 1].0);
    if deriv(lo).signum() == deriv(hi).signum() {
        return Err(Error::Bracket("μ' does not change sign around the scan minimum".into()));
    }
    let mut conv = roots::SimpleConvergency { eps: 1e-15, max_iter: 200 };
    let xi0 = roots::find_root_brent(lo, hi, deriv, &mut conv)
        .map_err(|e| Error::Bracket(format!("Brent iteration on μ': {e:?}")))?;

    let eig = solve_on(grid, xi0)?;
    let mp = mu_prime(grid, &eig)?;
    if mp.abs() > 1e-8 {
        return Err(Error::NoConvergence {
            what: format!("|μ'(ξ₀)| = {mp:.3e} above 1e-8"),
            iterations: conv.max_iter,
        });
    }
    let mut moments = [0.0; 5];
    for (k, m) in moments.iter_mut().enumerate() {
        *m = grid.weighted_inner(|t| (t + xi0).powi(k as i32), &eig.u, &eig.u)?;
    }
    let mu2 = second_derivative(grid, xi0, eig.mu, MU2_STEP)?;
    Ok(GridLevel {
        xi0,
        theta0: eig.mu,
        c1: eig.u[0] * eig.u[0] / 3.0,
        moments,
        mu2,
        mu_prime: mp,
        u0: eig.u,
    })
}

/// Centered second difference of `μ` at `xi`, Richardson-refined in the step.
fn second_derivative(grid: &HalfLineGrid, xi: f64, mu0: f64, step: f64) -> Result<f64> {
    let d = |h: f64| -> Result<f64> {
        let p = solve_on(grid, xi + h)?.mu;
        let m = solve_on(grid, xi - h)?.mu;
        Ok((p - 2.0 * mu0 + m) / (h * h))
    };
    let coarse = d(step)?;
    let fine = d(step / 2.0)?;
    Ok((4.0 * fine - coarse) / 3.0)
}

/// The universal de Gennes constants.
///
/// Scalars are Richardson-extrapolated from spacings `h` and `h/2`; the
/// ground state `u0` and the `grid_*` values are those of the finer grid and
/// are what the reduced resolvent works with.
#[derive(Debug, Clone)]
pub struct DeGennesConstants {
    pub xi0: f64,
    pub theta0: f64,
    pub c1: f64,
    pub moments: [f64; 5],
    pub mu2: f64,
    pub u0: Vec<f64>,
    pub grid_xi0: f64,
    pub grid_theta0: f64,
    pub grid_mu_prime: f64,
    grid: HalfLineGrid,
}

/// Residuals of the five moment identities and of the `μ''` identity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub m0_minus_1: f64,
    pub m1: f64,
    pub m2_minus_half_theta0: f64,
    pub m3_minus_half_c1: f64,
    pub half_mu2_minus_3c1_sqrt_theta0: f64,
    pub xi0_squared_minus_theta0: f64,
}

/// Serializable summary written by the `degennes` subcommand.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConstantsSummary {
    pub xi0: f64,
    pub theta0: f64,
    pub c1: f64,
    #[serde(rename = "M0")]
    pub m0: f64,
    #[serde(rename = "M1")]
    pub m1: f64,
    #[serde(rename = "M2")]
    pub m2: f64,
    #[serde(rename = "M3")]
    pub m3: f64,
    #[serde(rename = "M4")]
    pub m4: f64,
    pub mu2: f64,
    pub residuals: IdentityResiduals,
    pub disc: HalfLineDisc,
}

impl DeGennesConstants {
    pub fn grid(&self) -> &HalfLineGrid {
        &self.grid
    }

    pub fn residuals(&self) -> IdentityResiduals {
        let m = &self.moments;
        IdentityResiduals {
            m0_minus_1: m[0] - 1.0,
            m1: m[1],
            m2_minus_half_theta0: m[2] - self.theta0 / 2.0,
            m3_minus_half_c1: m[3] - self.c1 / 2.0,
            half_mu2_minus_3c1_sqrt_theta0: self.mu2 / 2.0 - 3.0 * self.c1 * self.theta0.sqrt(),
            xi0_squared_minus_theta0: self.xi0 * self.xi0 - self.theta0,
        }
    }

    pub fn summary(&self) -> ConstantsSummary {
        let m = self.moments;
        ConstantsSummary {
            xi0: self.xi0,
            theta0: self.theta0,
            c1: self.c1,
            m0: m[0],
            m1: m[1],
            m2: m[2],
            m3: m[3],
            m4: m[4],
            mu2: self.mu2,
            residuals: self.residuals(),
            disc: *self.grid.disc(),
        }
    }

    /// `1 - 4 I₂` from the reduced resolvent; should equal `μ''(ξ₀)/2`.
    pub fn one_minus_four_i2(&self) -> Result<f64> {
        let xi0 = self.grid_xi0;
        let rhs: Vec<f64> =
            self.grid.nodes().iter().zip(&self.u0).map(|(t, u)| (t + xi0) * u).collect();
        let v = reduced_resolvent(&rhs, self)?;
        let i2 = self.grid.weighted_inner(|t| t + xi0, &v, &self.u0)?;
        Ok(1.0 - 4.0 * i2)
    }
}

pub fn find_minimum(disc: &HalfLineDisc) -> Result<DeGennesConstants> {
    let coarse_grid = HalfLineGrid::new(*disc)?;
    let fine_grid = HalfLineGrid::new(disc.refined())?;
    let (coarse, fine) = rayon::join(|| grid_level(&coarse_grid), || grid_level(&fine_grid));
    let (coarse, fine) = (coarse?, fine?);
    let rich = |c: f64, f: f64| (4.0 * f - c) / 3.0;
    let mut moments = [0.0; 5];
    for k in 0..5 {
        moments[k] = rich(coarse.moments[k], fine.moments[k]);
    }
    Ok(DeGennesConstants {
        xi0: rich(coarse.xi0, fine.xi0),
        theta0: rich(coarse.theta0, fine.theta0),
        c1: rich(coarse.c1, fine.c1),
        moments,
        mu2: rich(coarse.mu2, fine.mu2),
        grid_xi0: fine.xi0,
        grid_theta0: fine.theta0,
        grid_mu_prime: fine.mu_prime,
        u0: fine.u0,
        grid: fine_grid,
    })
}

/// Constants on a single grid, without extrapolation; used for convergence studies.
pub fn constants_on_grid(disc: &HalfLineDisc) -> Result<IdentityResiduals> {
    let grid = HalfLineGrid::new(*disc)?;
    let lvl = grid_level(&grid)?;
    let m = lvl.moments;
    Ok(IdentityResiduals {
        m0_minus_1: m[0] - 1.0,
        m1: m[1],
        m2_minus_half_theta0: m[2] - lvl.theta0 / 2.0,
        m3_minus_half_c1: m[3] - lvl.c1 / 2.0,
        half_mu2_minus_3c1_sqrt_theta0: lvl.mu2 / 2.0 - 3.0 * lvl.c1 * lvl.theta0.sqrt(),
        xi0_squared_minus_theta0: lvl.xi0 * lvl.xi0 - lvl.theta0,
    })
}

/// `M_k = ∫ (t + ξ₀)^k u₀²` by quadrature on the ground-state grid.
pub fn moment(k: usize, c: &DeGennesConstants) -> Result<f64> {
    if k > 4 {
        return Err(Error::InvalidInput(format!("moment order {k} outside 0..=4")));
    }
    let xi0 = c.grid_xi0;
    c.grid.weighted_inner(|t| (t + xi0).powi(k as i32), &c.u0, &c.u0)
}

/// Solves `(H₀ - Θ₀) v = Π⊥ rhs` with `⟨v, u₀⟩ = 0`.
pub fn reduced_resolvent(rhs: &[f64], c: &DeGennesConstants) -> Result<Vec<f64>> {
    let g = c.grid.restrict(rhs)?;
    let weak = c.grid.mass.mul(g);
    reduced_resolvent_weak(weak, c)
}

/// Resolvent applied to a right-hand side already in weak form `F_i = ∫ N_i f`.
pub(crate) fn reduced_resolvent_weak(mut weak: Vec<f64>, c: &DeGennesConstants) -> Result<Vec<f64>> {
    let grid = &c.grid;
    let u0 = &c.u0[..grid.unknowns()];
    // project: F ← F - ⟨F, u₀⟩ M u₀
    let proj = dot(&weak, u0);
    let mu0 = grid.mass.mul(u0);
    weak.iter_mut().zip(&mu0).for_each(|(f, m)| *f -= proj * m);

    // The bordered system is solved by fixing the component at t = 0 (where
    // u₀ is largest) and eliminating on the remaining definite block.
    let op = grid.hamiltonian(c.grid_xi0).shifted(c.grid_theta0, &grid.mass);
    let m = op.len();
    let block = Tridiag { diag: op.diag[1..].to_vec(), off: op.off[1..].to_vec() };
    let tail = block.solve(&weak[1..]).ok_or_else(|| {
        Error::Singular("reduced resolvent block is singular; refine the half-line grid".into())
    })?;
    let mut v = Vec::with_capacity(m);
    v.push(0.0);
    v.extend(tail);
    let consistency = op.diag[0] * v[0] + op.off[0] * v[1] - weak[0];
    let scale = weak.iter().fold(0.0_f64, |a, b| a.max(b.abs())).max(1e-300);
    if consistency.abs() > 1e-6 * scale.max(1.0) {
        return Err(Error::Singular(format!(
            "reduced resolvent consistency residual {consistency:.2e}"
        )));
    }
    let along = grid.mass.form(u0, &v);
    v.iter_mut().zip(u0).for_each(|(x, u)| *x -= along * u);
    Ok(grid.extend(v))
}

/// Weak form of `(λ - H₁) u₀` with
/// `H₁ = k₀∂_t - k₁(t+ξ₀)t² + 2k₀ t(t+ξ₀)²`; used by the quasimode profiles.
pub(crate) fn first_order_weak(c: &DeGennesConstants, k0: f64, k1: f64) -> (Vec<f64>, f64) {
    let grid = &c.grid;
    let xi = c.grid_xi0;
    let u0 = &c.u0[..grid.unknowns()];
    let pot = grid.weighted_mass(|t| -k1 * (t + xi) * t * t + 2.0 * k0 * t * (t + xi) * (t + xi));
    let h1u: Vec<f64> = grid
        .apply_derivative(u0)
        .iter()
        .zip(pot.mul(u0))
        .map(|(d, p)| k0 * d + p)
        .collect();
    // solvability fixes λ on this grid
    let lambda = dot(&h1u, u0);
    let mu0 = grid.mass.mul(u0);
    let weak = mu0.iter().zip(&h1u).map(|(m, h)| lambda * m - h).collect();
    (weak, lambda)
}

/// Weak form of `f(t) u(t)` for a grid function `u`.
pub(crate) fn multiply_weak(c: &DeGennesConstants, f: impl Fn(f64) -> f64, u: &[f64]) -> Vec<f64> {
    let grid = &c.grid;
    grid.weighted_mass(f).mul(&u[..grid.unknowns()])
}

/// One closed-form identity evaluated on computed constants.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityCheck {
    pub fn new(name: &str, lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = lhs - rhs;
        Self { name: name.into(), lhs, rhs, residual, tolerance, pass: residual.abs() <= tolerance }
    }
}

/// Moment identities of the ground state and the reduced-resolvent identity.
pub fn identity_checks(c: &DeGennesConstants) -> Result<Vec<IdentityCheck>> {
    let m = &c.moments;
    let half_mu2 = 0.5 * c.mu2;
    let target = 3.0 * c.c1 * c.theta0.sqrt();
    Ok(vec![
        IdentityCheck::new("M0 = 1", m[0], 1.0, 1e-8),
        IdentityCheck::new("M1 = 0", m[1], 0.0, 1e-6),
        IdentityCheck::new("M2 = Θ0/2", m[2], 0.5 * c.theta0, 1e-6),
        IdentityCheck::new("M3 = C1/2", m[3], 0.5 * c.c1, 1e-6),
        IdentityCheck::new("μ''(ξ0)/2 = 3C1√Θ0", half_mu2, target, 1e-4),
        IdentityCheck::new("1 - 4I2 = 3C1√Θ0", c.one_minus_four_i2()?, target, 1e-4),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn constants() -> &'static DeGennesConstants {
        static C: OnceLock<DeGennesConstants> = OnceLock::new();
        C.get_or_init(|| find_minimum(&HalfLineDisc::default()).unwrap())
    }

    #[test]
    fn gaussian_ground_state_at_zero() {
        let disc = HalfLineDisc::default().refined();
        let e = solve_mu(0.0, &disc).unwrap();
        assert!((e.mu - 1.0).abs() < 1e-6, "μ(0) = {}", e.mu);
        assert!(e.u[0] > 0.0);
        let grid = HalfLineGrid::new(disc).unwrap();
        assert!((grid.inner(&e.u, &e.u).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_negative_xi_approaches_one_from_below() {
        let disc = HalfLineDisc::new(20.0, 4000, Scheme::FiniteDifference).unwrap();
        let e = solve_mu(-5.0, &disc).unwrap();
        assert!(e.mu > 0.999 && e.mu < 1.0, "μ(-5) = {}", e.mu);
        let wide = HalfLineDisc::new(30.0, 6000, Scheme::FiniteDifference).unwrap();
        let f = solve_mu(-5.0, &wide).unwrap();
        assert!((e.mu - f.mu).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_discretizations() {
        assert!(HalfLineDisc::new(9.0, 1000, Scheme::FiniteDifference).is_err());
        assert!(HalfLineDisc::new(15.0, 100, Scheme::FiniteDifference).is_err());
        assert!(solve_mu(8.0, &HalfLineDisc::default()).is_err());
    }

    #[test]
    fn minimum_matches_de_gennes_identity() {
        let c = constants();
        assert!(c.theta0 > 0.5 && c.theta0 < 0.7);
        assert!(c.xi0 < 0.0 && c.c1 > 0.0 && c.mu2 > 0.0);
        assert!(c.theta0 < 1.0);
        assert!((c.xi0 * c.xi0 - c.theta0).abs() < 1e-5);
        assert!((c.theta0 - 0.5901).abs() < 1e-4);
        assert!(c.grid_mu_prime.abs() <= 1e-8);
    }

    #[test]
    fn moments_on_grid() {
        let c = constants();
        assert!((moment(0, c).unwrap() - 1.0).abs() < 1e-8);
        assert!(moment(1, c).unwrap().abs() < 1e-6);
        assert!((moment(3, c).unwrap() - c.c1 / 2.0).abs() < 1e-5);
        assert!(moment(5, c).is_err());
    }

    #[test]
    fn resolvent_annihilates_ground_state() {
        let c = constants();
        let v = reduced_resolvent(&c.u0, c).unwrap();
        assert!(v.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn resolvent_reproduces_xi_derivative() {
        let c = constants();
        let grid = c.grid();
        let xi0 = c.grid_xi0;
        let rhs: Vec<f64> = grid.nodes().iter().zip(&c.u0).map(|(t, u)| (t + xi0) * u).collect();
        let v = reduced_resolvent(&rhs, c).unwrap();
        // finite-difference oracle in ξ on the same grid
        let d = 1e-4;
        let p = solve_on(grid, xi0 + d).unwrap();
        let m = solve_on(grid, xi0 - d).unwrap();
        let worst = (0..v.len())
            .map(|i| (v[i] + 0.5 * (p.u[i] - m.u[i]) / (2.0 * d)).abs())
            .fold(0.0_f64, f64::max);
        assert!(worst < 1e-4, "max deviation {worst}");
        assert!(grid.inner(&v, &c.u0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn mu_second_derivative_step_stable() {
        let c = constants();
        let grid = c.grid();
        let a = second_derivative(grid, c.grid_xi0, c.grid_theta0, 1e-2).unwrap();
        let b = second_derivative(grid, c.grid_xi0, c.grid_theta0, 5e-3).unwrap();
        assert!((a - b).abs() < 1e-4);
    }

    #[test]
    fn linear_elements_agree() {
        let disc = HalfLineDisc::new(15.0, 1500, Scheme::LinearElement).unwrap();
        let e = solve_mu(0.0, &disc).unwrap();
        assert!((e.mu - 1.0).abs() < 1e-4);
        let c = find_minimum(&disc).unwrap();
        assert!((c.theta0 - constants().theta0).abs() < 1e-6);
        assert!(c.residuals().m1.abs() < 1e-8);
    }
}
