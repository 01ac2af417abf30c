//! Finite element discretization of the magnetic quadratic form on the boundary strip
//! `{(s, t) : s ∈ ℝ/Lℤ, 0 ≤ t ≤ t0}`:
//!
//! ```text
//! q(w) = ∫∫ (1 - tk)⁻¹ |(-i∂_s + BÃ₁ + m) w|² + (1 - tk) |∂_t w|²  ds dt
//! ```
//!
//! with bilinear elements on a tensor grid graded toward `t = 0`, natural boundary
//! condition at `t = 0` and a homogeneous Dirichlet wall at `t = t0`.
//!
//! The unknown `w` is the slowly varying envelope `u = e^{imσ} w`, where `σ` is the
//! arclength measured from the seam and `m` is the band-bottom momentum `ξ₀√(Bb')`.
//! Periodicity is closed with the Floquet phase `w(σ + L) = e^{iθ} w(σ)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldModel, StripGauge};
use crate::geometry::gauss_integral;
use crate::sparse::CsrMatrix;

/// Share of the normal nodes placed within three magnetic lengths of the wall.
const LAYER_SHARE: f64 = 0.6;
/// Outer share of the strip whose eigenvector mass is reported.
const OUTER_SHARE: f64 = 0.2;
pub const TRUNCATION_TOLERANCE: f64 = 1e-8;
const MEMORY_BUDGET: usize = 6 << 30;
const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_31, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Coefficients of a strip problem: period, curvature and field in `(s, t)`.
pub trait StripModel: Sync {
    fn period(&self) -> f64;
    fn curvature(&self, s: f64) -> f64;
    fn max_curvature(&self) -> f64;
    /// `β̃(s, t)`
    fn beta(&self, s: f64, t: f64) -> f64;

    /// `Ã₁(s, t_j)` for increasing depths.
    fn a1_column(&self, s: f64, depths: &[f64]) -> Vec<f64> {
        let k = self.curvature(s);
        let f = |x: f64| (1.0 - x * k) * self.beta(s, x);
        let (mut acc, mut prev) = (0.0, 0.0);
        depths
            .iter()
            .map(|&t| {
                acc += gauss_integral(f, prev, t);
                prev = t;
                acc
            })
            .collect()
    }
}

impl StripModel for StripGauge {
    fn period(&self) -> f64 {
        self.map().curve().perimeter()
    }

    fn curvature(&self, s: f64) -> f64 {
        self.map().curve().curvature(s)
    }

    fn max_curvature(&self) -> f64 {
        self.map().curve().max_curvature()
    }

    fn beta(&self, s: f64, t: f64) -> f64 {
        StripGauge::beta(self, s, t)
    }

    fn a1_column(&self, s: f64, depths: &[f64]) -> Vec<f64> {
        StripGauge::a1_column(self, s, depths)
    }
}

/// A straight periodic strip with field `β̃(s, t)` given directly in strip coordinates.
#[derive(Debug, Clone)]
pub struct FlatStrip {
    pub period: f64,
    /// Field as a function of `(s, t)`.
    pub field: FieldModel,
}

impl StripModel for FlatStrip {
    fn period(&self) -> f64 {
        self.period
    }

    fn curvature(&self, _s: f64) -> f64 {
        0.0
    }

    fn max_curvature(&self) -> f64 {
        0.0
    }

    fn beta(&self, s: f64, t: f64) -> f64 {
        self.field.eval([s, t])
    }
}

/// Floquet phase selection across the seam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Floquet {
    /// Envelope phase `θ`; `0` is the band bottom.
    Phase(f64),
    /// Phase reproducing the circulation of a global potential, `-BΦ` with `Φ = ∫_Ω β`.
    Mode(FloquetMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FloquetMode {
    Holonomy,
}

impl Default for Floquet {
    fn default() -> Self {
        Floquet::Phase(0.0)
    }
}

/// Envelope phase equivalent to the physical quasi-periodicity `e^{-iBΦ}`.
pub fn holonomy_phase(b: f64, flux: f64, momentum: f64, period: f64) -> f64 {
    (-b * flux - momentum * period).rem_euclid(2.0 * PI)
}

/// Resolution knobs; unset sizes follow the default policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StripSettings {
    pub ns: Option<usize>,
    pub nt: Option<usize>,
    /// Depth in magnetic lengths `(Bb')^{-1/2}`.
    pub t0_factor: f64,
    pub floquet: Floquet,
    /// Tangential points per unit length per `(Bb')^{1/4}`.
    pub ns_density: f64,
    /// Normal points per magnetic length of depth.
    pub nt_density: f64,
}

impl Default for StripSettings {
    fn default() -> Self {
        Self { ns: None, nt: None, t0_factor: 8.0, floquet: Floquet::default(), ns_density: 10.0, nt_density: 12.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripDisc {
    /// Tangential nodes, periodic.
    pub ns: usize,
    /// Normal nodes including both walls.
    pub nt: usize,
    pub t0: f64,
    /// Exponential stretch of the normal grid, `0` for uniform.
    pub grading: f64,
    /// Envelope momentum `m`.
    pub momentum: f64,
    /// Arclength of the seam `σ = 0`.
    pub origin: f64,
}

impl StripDisc {
    pub fn new(ns: usize, nt: usize, t0: f64, grading: f64) -> Result<Self> {
        let d = Self { ns, nt, t0, grading, momentum: 0.0, origin: 0.0 };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ns < 64 || self.ns % 2 != 0 {
            return Err(Error::InvalidInput(format!("ns must be even and at least 64, got {}", self.ns)));
        }
        if self.nt < 32 {
            return Err(Error::InvalidInput(format!("nt must be at least 32, got {}", self.nt)));
        }
        if !(self.t0 > 0.0) || !(self.grading >= 0.0) || !self.momentum.is_finite() {
            return Err(Error::InvalidInput(format!("bad strip parameters {self:?}")));
        }
        Ok(())
    }

    pub fn with_momentum(mut self, m: f64) -> Self {
        self.momentum = m;
        self
    }

    pub fn with_origin(mut self, s: f64) -> Self {
        self.origin = s;
        self
    }

    /// Default resolution for field strength `b` with boundary minimum `b_prime`.
    ///
    /// The seam is placed half a period away from `s_star`.
    pub fn policy(
        b: f64,
        b_prime: f64,
        xi0: f64,
        s_star: f64,
        model: &impl StripModel,
        settings: &StripSettings,
    ) -> Result<Self> {
        if !(b > 0.0) || !(b_prime > 0.0) {
            return Err(Error::InvalidInput(format!("need B > 0 and b' > 0, got {b}, {b_prime}")));
        }
        let scale = b * b_prime;
        let ell = scale.powf(-0.5);
        let mut t0 = settings.t0_factor * ell * b_prime.powf(-0.5).max(1.0);
        let kmax = model.max_curvature();
        if kmax > 0.0 {
            t0 = t0.min(0.9 / kmax);
        }
        let ns = settings
            .ns
            .unwrap_or_else(|| (settings.ns_density * model.period() * scale.powf(0.25)).ceil() as usize)
            .max(64);
        let ns = ns + ns % 2;
        let nt = settings.nt.unwrap_or_else(|| (settings.nt_density * t0 / ell).round() as usize).max(32);
        let d = Self {
            ns,
            nt,
            t0,
            grading: grading_for(3.0 * ell / t0),
            momentum: xi0 * scale.sqrt(),
            origin: s_star + 0.5 * model.period(),
        };
        d.validate()?;
        Ok(d)
    }

    pub fn dof(&self) -> usize {
        self.ns * (self.nt - 1)
    }

    /// Unknown index of node `(i, j)`, `j < nt - 1`.
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * (self.nt - 1) + j
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        let n = self.nt - 1;
        (0..self.nt)
            .map(|j| {
                let eta = j as f64 / n as f64;
                self.t0 * stretch(self.grading, eta)
            })
            .collect()
    }

    /// Seam-relative tangential coordinates `σ_i`.
    pub fn sigma_nodes(&self, period: f64) -> Vec<f64> {
        (0..self.ns).map(|i| period * i as f64 / self.ns as f64).collect()
    }

    /// Envelope of a rough skyline storage estimate in bytes.
    pub fn estimated_bytes(&self) -> usize {
        self.dof().saturating_mul(2 * (self.nt - 1) + 1).saturating_mul(16)
    }
}

fn stretch(gamma: f64, eta: f64) -> f64 {
    if gamma < 1e-8 {
        eta
    } else {
        (gamma * eta).exp_m1() / gamma.exp_m1()
    }
}

/// Stretch so that `LAYER_SHARE` of the nodes fall within `ratio · t0` of the wall.
fn grading_for(ratio: f64) -> f64 {
    if ratio >= LAYER_SHARE {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if stretch(mid, LAYER_SHARE) > ratio {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Stiffness `K` and mass `M` of the strip problem. Both are Hermitian; `M` is
/// real when `θ = 0`.
#[derive(Debug, Clone)]
pub struct OperatorPair {
    pub k: CsrMatrix,
    pub m: CsrMatrix,
    pub b: f64,
    /// Envelope Floquet phase in `[0, 2π)`.
    pub floquet: f64,
    pub disc: StripDisc,
    pub period: f64,
}

impl OperatorPair {
    pub fn dim(&self) -> usize {
        self.k.nrows()
    }

    pub fn rayleigh(&self, x: &[Complex64]) -> f64 {
        self.k.form(x, x).re / self.m.form(x, x).re
    }

    pub fn t_nodes(&self) -> Vec<f64> {
        self.disc.t_nodes()
    }

    /// Physical arclength of the tangential nodes.
    pub fn s_nodes(&self) -> Vec<f64> {
        self.disc.sigma_nodes(self.period).iter().map(|x| (x + self.disc.origin).rem_euclid(self.period)).collect()
    }

    /// Samples `f(s, t)` on the unknowns; `s` is physical arclength.
    pub fn sample(&self, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Vec<Complex64> {
        let t = self.t_nodes();
        let s = self.s_nodes();
        let d = &self.disc;
        let mut out = vec![Complex64::new(0.0, 0.0); d.dof()];
        out.par_chunks_mut(d.nt - 1).enumerate().for_each(|(i, col)| {
            for (j, v) in col.iter_mut().enumerate() {
                *v = f(s[i], t[j]);
            }
        });
        out
    }

    /// Row sums of `M`, a positive nodal quadrature weight.
    pub fn lumped_mass(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.m.row(i).map(|(_, v)| v.re).sum()).collect()
    }

    /// Column ordering `0, ns-1, 1, ns-2, ...` that folds the periodic direction
    /// into a band about twice as wide as one column.
    pub fn fold_ordering(&self) -> Vec<usize> {
        let d = &self.disc;
        let cols = (0..d.ns / 2).flat_map(|i| [i, d.ns - 1 - i]);
        cols.flat_map(|i| (0..d.nt - 1).map(move |j| d.index(i, j))).collect()
    }

    /// Share of `xᴴMx` carried by nodes with `t ≥ t_cut`.
    pub fn mass_beyond(&self, x: &[Complex64], t_cut: f64) -> f64 {
        let t = self.t_nodes();
        let d = &self.disc;
        let outer: Vec<Complex64> = x
            .iter()
            .enumerate()
            .map(|(n, &v)| if t[n % (d.nt - 1)] >= t_cut { v } else { Complex64::new(0.0, 0.0) })
            .collect();
        self.m.form(&outer, &outer).re / self.m.form(x, x).re
    }
}

/// Mass fraction of an eigenvector in the outer 20% of the strip.
pub fn dirichlet_truncation_error(op: &OperatorPair, x: &[Complex64]) -> f64 {
    let frac = op.mass_beyond(x, (1.0 - OUTER_SHARE) * op.disc.t0);
    if frac > TRUNCATION_TOLERANCE {
        log::warn!(
            "ground state carries {frac:.2e} of its mass in the outer strip (B = {}, t0 = {:.4}); increase t0",
            op.b,
            op.disc.t0
        );
    }
    frac
}

/// Assembles `(K, M)` for field strength `b` and envelope Floquet phase `theta`.
pub fn assemble(model: &(impl StripModel + ?Sized), b: f64, theta: f64, disc: &StripDisc) -> Result<OperatorPair> {
    if !(b > 0.0) {
        return Err(Error::InvalidInput(format!("B must be positive, got {b}")));
    }
    disc.validate()?;
    if disc.estimated_bytes() > MEMORY_BUDGET {
        return Err(Error::Memory { needed: disc.estimated_bytes(), budget: MEMORY_BUDGET });
    }
    let period = model.period();
    let theta = theta.rem_euclid(2.0 * PI);
    let seam = Complex64::from_polar(1.0, theta);
    let tn = disc.t_nodes();
    let ne_t = disc.nt - 1;
    let hs = period / disc.ns as f64;
    // quadrature depths, increasing
    let tq: Vec<f64> =
        (0..ne_t).flat_map(|j| GAUSS3.iter().map(move |&(x, _)| (j, x))).map(|(j, x)| tn[j] + x * (tn[j + 1] - tn[j])).collect();

    type Triplets = Vec<(usize, usize, Complex64)>;
    let columns: Vec<Result<(Triplets, Triplets)>> = (0..disc.ns)
        .into_par_iter()
        .map(|i| {
            let mut kt = Vec::with_capacity(ne_t * 16);
            let mut mt = Vec::with_capacity(ne_t * 16);
            let mut ke = [[Complex64::new(0.0, 0.0); 4]; 4];
            let mut me = [[0.0f64; 4]; 4];
            // per s-quadrature point: curvature and Ã₁ column
            let cols: Vec<(f64, f64, Vec<f64>)> = GAUSS3
                .iter()
                .map(|&(x, wq)| {
                    let s = disc.origin + (i as f64 + x) * hs;
                    (wq, model.curvature(s), model.a1_column(s, &tq))
                })
                .collect();
            for j in 0..ne_t {
                let ht = tn[j + 1] - tn[j];
                for row in ke.iter_mut() {
                    row.fill(Complex64::new(0.0, 0.0));
                }
                for row in me.iter_mut() {
                    row.fill(0.0);
                }
                for (qs, &(xs, _)) in GAUSS3.iter().enumerate() {
                    let (ws, k, ref a1) = cols[qs];
                    for (qt, &(xt, wt)) in GAUSS3.iter().enumerate() {
                        let t = tn[j] + xt * ht;
                        let jac = 1.0 - t * k;
                        if jac <= 0.0 {
                            return Err(Error::Geometry(format!("Jacobian 1 - tk = {jac} at t = {t}")));
                        }
                        let a = b * a1[3 * j + qt] + disc.momentum;
                        let n = [(1.0 - xs) * (1.0 - xt), xs * (1.0 - xt), (1.0 - xs) * xt, xs * xt];
                        let ds = [-(1.0 - xt) / hs, (1.0 - xt) / hs, -xt / hs, xt / hs];
                        let dt = [-(1.0 - xs) / ht, -xs / ht, (1.0 - xs) / ht, xs / ht];
                        let w = ws * wt * hs * ht;
                        for p in 0..4 {
                            // D_s N = -i ∂_s N + a N
                            let dp = Complex64::new(a * n[p], -ds[p]);
                            for q in 0..4 {
                                let dq = Complex64::new(a * n[q], -ds[q]);
                                ke[p][q] += w * (dp.conj() * dq / jac + jac * dt[p] * dt[q]);
                                me[p][q] += w * jac * n[p] * n[q];
                            }
                        }
                    }
                }
                let corners = [(i, j), (i + 1, j), (i, j + 1), (i + 1, j + 1)];
                let map = |(ci, cj): (usize, usize)| -> Option<(usize, Complex64)> {
                    if cj == disc.nt - 1 {
                        return None;
                    }
                    if ci == disc.ns {
                        Some((disc.index(0, cj), seam))
                    } else {
                        Some((disc.index(ci, cj), Complex64::new(1.0, 0.0)))
                    }
                };
                for p in 0..4 {
                    let Some((gp, pp)) = map(corners[p]) else { continue };
                    for q in 0..4 {
                        let Some((gq, pq)) = map(corners[q]) else { continue };
                        let phase = pp.conj() * pq;
                        kt.push((gp, gq, phase * ke[p][q]));
                        mt.push((gp, gq, phase * me[p][q]));
                    }
                }
            }
            Ok((kt, mt))
        })
        .collect();

    let n = disc.dof();
    let mut kt = Vec::new();
    let mut mt = Vec::new();
    for col in columns {
        let (k, m) = col?;
        kt.extend(k);
        mt.extend(m);
    }
    let k = symmetrize(CsrMatrix::from_triplets(n, n, kt));
    let m = symmetrize(CsrMatrix::from_triplets(n, n, mt));
    Ok(OperatorPair { k, m, b, floquet: theta, disc: *disc, period })
}

/// Averages `A` with `Aᴴ` so the stored matrix is exactly Hermitian.
fn symmetrize(a: CsrMatrix) -> CsrMatrix {
    let n = a.nrows();
    let mut t = Vec::with_capacity(2 * a.nnz());
    for i in 0..n {
        for (j, v) in a.row(i) {
            t.push((i, j, 0.5 * v));
            t.push((j, i, 0.5 * v.conj()));
        }
    }
    CsrMatrix::from_triplets(n, n, t)
}
