//! Tangential Agmon distance `d(s) = |∫₀ˢ (β(s*+σ, 0) - b')^{1/2} dσ|` and the
//! localization diagnostics measured on solved strip eigenvectors.
//!
//! Offsets `s` are measured from the boundary minimum `s*` and lie in
//! `(-L/2, L/2]`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{adaptive_gauss, FieldModel, MinimumData};
use crate::geometry::BoundaryCurve;
use crate::strip::OperatorPair;

/// Radicand values below `-RADICAND_TOL` mean the trace dips under `b'`.
pub const RADICAND_TOL: f64 = 1e-12;
/// Largest max/min spread accepted for a moment family.
pub const MOMENT_SPREAD: f64 = 4.0;
/// Profile floor relative to the peak column norm.
const PROFILE_FLOOR: f64 = 1e-12;
const QUAD_TOL: f64 = 1e-13;

fn radicand(beta: f64, b_prime: f64, sigma: f64) -> Result<f64> {
    let r = beta - b_prime;
    if r < -RADICAND_TOL {
        return Err(Error::InvalidInput(format!(
            "boundary trace {beta} below its minimum {b_prime} at offset {sigma}"
        )));
    }
    Ok(r.max(0.0))
}

fn integrate_metric(trace: &impl Fn(f64) -> f64, b_prime: f64, a: f64, b: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    // fail fast on sampled nodes, the integrand itself clamps
    for k in 0..=8 {
        let s = a + (b - a) * k as f64 / 8.0;
        radicand(trace(s), b_prime, s)?;
    }
    let f = |s: f64| (trace(s) - b_prime).max(0.0).sqrt();
    adaptive_gauss(&f, a, b, QUAD_TOL, 30)
}

/// `d(s)` for a trace given as a function of the offset from `s*`.
pub fn agmon_distance(trace: impl Fn(f64) -> f64, b_prime: f64, s: f64) -> Result<f64> {
    Ok(integrate_metric(&trace, b_prime, 0.0, s)?.abs())
}

/// Boundary trace of `field` as a function of the offset from `s_star`.
pub fn offset_trace<'a>(field: &'a FieldModel, curve: &'a BoundaryCurve, s_star: f64) -> impl Fn(f64) -> f64 + 'a {
    move |sigma| field.eval(curve.at(s_star + sigma).point)
}

/// `d` on a uniform grid of offsets covering one period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgmonTable {
    pub s: Vec<f64>,
    pub d: Vec<f64>,
    pub period: f64,
}

impl AgmonTable {
    /// Tabulates `d` on `n` points (`n` even), accumulating panel integrals
    /// outward from the minimum.
    pub fn new(trace: impl Fn(f64) -> f64, b_prime: f64, period: f64, n: usize) -> Result<Self> {
        if n < 4 || n % 2 == 1 || !(period > 0.0) {
            return Err(Error::InvalidInput(format!("Agmon table needs an even n >= 4, got {n}")));
        }
        let h = period / n as f64;
        let half = n / 2;
        let s: Vec<f64> = (0..n).map(|i| (i as f64 - half as f64 + 1.0) * h).collect();
        let mut d = vec![0.0; n];
        let zero = half - 1;
        for i in zero + 1..n {
            d[i] = d[i - 1] + integrate_metric(&trace, b_prime, s[i - 1], s[i])?;
        }
        for i in (0..zero).rev() {
            d[i] = d[i + 1] + integrate_metric(&trace, b_prime, s[i], s[i + 1])?;
        }
        Ok(Self { s, d, period })
    }

    pub fn from_field(field: &FieldModel, curve: &BoundaryCurve, m: &MinimumData, n: usize) -> Result<Self> {
        Self::new(offset_trace(field, curve, m.s_star), m.b_prime, curve.perimeter(), n)
    }

    /// Linear interpolation at an offset, wrapped into `(-L/2, L/2]`.
    pub fn eval(&self, s: f64) -> f64 {
        let s = wrap_offset(s, self.period);
        let h = self.period / self.s.len() as f64;
        let x = (s - self.s[0]) / h;
        if x <= 0.0 {
            return self.d[0];
        }
        let i = (x.floor() as usize).min(self.s.len() - 2);
        let w = x - i as f64;
        (1.0 - w) * self.d[i] + w * self.d[i + 1]
    }

    pub fn is_trivial(&self) -> bool {
        self.d.iter().all(|&v| v == 0.0)
    }
}

/// Offset in `(-L/2, L/2]`.
pub fn wrap_offset(s: f64, period: f64) -> f64 {
    let w = s.rem_euclid(period);
    if w > 0.5 * period {
        w - period
    } else {
        w
    }
}

/// A solved eigenvector at field strength `b`.
#[derive(Debug, Clone, Copy)]
pub struct Snapshot<'a> {
    pub b: f64,
    pub op: &'a OperatorPair,
    pub x: &'a [Complex64],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentKind {
    /// `B^{n/2} ∫ tⁿ |u|²`
    Normal,
    /// `B^{n/2} ∫ s^{2n} |u|²`
    Tangential,
    /// `B^{(n-1)/2} ∫ s^{2n} |∂_s w|²`
    TangentialDerivative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Applicability {
    Applicable,
    NotApplicable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentFamily {
    pub kind: MomentKind,
    pub n: u32,
    pub b: Vec<f64>,
    pub values: Vec<f64>,
    /// max / min over the sweep.
    pub spread: f64,
    pub pass: bool,
}

impl MomentFamily {
    fn new(kind: MomentKind, n: u32, b: Vec<f64>, values: Vec<f64>) -> Self {
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = if min > 0.0 { max / min } else { f64::INFINITY };
        let pass = values.iter().all(|v| v.is_finite() && *v > 0.0) && spread <= MOMENT_SPREAD;
        Self { kind, n, b, values, spread, pass }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AgmonReport {
    pub d_table: Option<AgmonTable>,
    pub tangential: Applicability,
    /// `(B, α̂₁)` per snapshot, empty when not applicable.
    pub tangential_slope: Vec<(f64, f64)>,
    pub families: Vec<MomentFamily>,
    pub pass: bool,
}

impl AgmonReport {
    pub fn family(&self, kind: MomentKind, n: u32) -> Option<&MomentFamily> {
        self.families.iter().find(|f| f.kind == kind && f.n == n)
    }
}

/// Per-node quantities of one snapshot.
struct Nodal {
    weight: Vec<f64>,
    density: Vec<f64>,
    ds_density: Vec<f64>,
    t: Vec<f64>,
    offset: Vec<f64>,
}

fn nodal(snap: &Snapshot, s_star: f64) -> Nodal {
    let op = snap.op;
    let d = &op.disc;
    let cols = d.nt - 1;
    let weight = op.lumped_mass();
    let t_nodes = op.t_nodes();
    let offsets: Vec<f64> = op.s_nodes().iter().map(|s| wrap_offset(s - s_star, op.period)).collect();
    let h = op.period / d.ns as f64;
    let seam = Complex64::from_polar(1.0, op.floquet);
    let n = op.dim();
    let mut density = vec![0.0; n];
    let mut ds_density = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut offset = vec![0.0; n];
    for i in 0..d.ns {
        for j in 0..cols {
            let k = d.index(i, j);
            let next = if i + 1 == d.ns { seam * snap.x[d.index(0, j)] } else { snap.x[d.index(i + 1, j)] };
            let prev = if i == 0 { seam.conj() * snap.x[d.index(d.ns - 1, j)] } else { snap.x[d.index(i - 1, j)] };
            density[k] = snap.x[k].norm_sqr();
            ds_density[k] = ((next - prev) / (2.0 * h)).norm_sqr();
            t[k] = t_nodes[j];
            offset[k] = offsets[i];
        }
    }
    Nodal { weight, density, ds_density, t, offset }
}

fn weighted(n: &Nodal, f: impl Fn(usize) -> f64, derivative: bool) -> f64 {
    let dens = if derivative { &n.ds_density } else { &n.density };
    let norm: f64 = n.weight.iter().zip(&n.density).map(|(w, u)| w * u).sum();
    (0..n.weight.len()).map(|k| f(k) * n.weight[k] * dens[k]).sum::<f64>() / norm
}

/// Rescaled normal and tangential moments over a sweep of solved vectors.
pub fn moment_report(
    snapshots: &[Snapshot],
    m: &MinimumData,
    table: Option<AgmonTable>,
    n_max: u32,
) -> Result<AgmonReport> {
    if snapshots.len() < 4 {
        return Err(Error::InvalidInput(format!("moment report needs at least 4 snapshots, got {}", snapshots.len())));
    }
    let bmin = snapshots.iter().map(|s| s.b).fold(f64::INFINITY, f64::min);
    let bmax = snapshots.iter().map(|s| s.b).fold(0.0, f64::max);
    if !(bmin > 0.0) || bmax < 8.0 * bmin {
        return Err(Error::InvalidInput(format!("sweep [{bmin}, {bmax}] spans less than a factor 8")));
    }
    let tangential = if m.constant_trace || table.as_ref().is_some_and(AgmonTable::is_trivial) {
        Applicability::NotApplicable
    } else {
        Applicability::Applicable
    };
    let bs: Vec<f64> = snapshots.iter().map(|s| s.b).collect();
    let nodes: Vec<Nodal> = snapshots.iter().map(|s| nodal(s, m.s_star)).collect();

    let mut families = Vec::new();
    for n in 1..=n_max {
        let p = n as i32;
        let normal = nodes.iter().zip(&bs).map(|(nd, b)| b.powf(0.5 * n as f64) * weighted(nd, |k| nd.t[k].powi(p), false));
        families.push(MomentFamily::new(MomentKind::Normal, n, bs.clone(), normal.collect()));
        if tangential == Applicability::Applicable {
            let tan = nodes
                .iter()
                .zip(&bs)
                .map(|(nd, b)| b.powf(0.5 * n as f64) * weighted(nd, |k| nd.offset[k].powi(2 * p), false));
            families.push(MomentFamily::new(MomentKind::Tangential, n, bs.clone(), tan.collect()));
            let der = nodes
                .iter()
                .zip(&bs)
                .map(|(nd, b)| b.powf(0.5 * (n as f64 - 1.0)) * weighted(nd, |k| nd.offset[k].powi(2 * p), true));
            families.push(MomentFamily::new(MomentKind::TangentialDerivative, n, bs.clone(), der.collect()));
        }
    }

    let mut tangential_slope = Vec::new();
    if let (Applicability::Applicable, Some(tab)) = (tangential, table.as_ref()) {
        for s in snapshots {
            tangential_slope.push((s.b, decay_slope(s, m.s_star, tab)?));
        }
    }
    let pass = families.iter().all(|f| f.pass) && tangential_slope.iter().all(|&(_, a)| a > 0.0);
    Ok(AgmonReport { d_table: table, tangential, tangential_slope, families, pass })
}

/// `‖u(s, ·)‖_{L²(t)}` per tangential node, with the node offsets from `s_star`.
pub fn tangential_profile(snap: &Snapshot, s_star: f64) -> (Vec<f64>, Vec<f64>) {
    let op = snap.op;
    let d = &op.disc;
    let t = op.t_nodes();
    // trapezoid weights on the graded normal grid, last node is the wall
    let mut w = vec![0.0; d.nt - 1];
    for j in 0..d.nt - 1 {
        let left = if j > 0 { t[j] - t[j - 1] } else { 0.0 };
        w[j] = 0.5 * (left + t[j + 1] - t[j]);
    }
    let offsets = op.s_nodes().iter().map(|s| wrap_offset(s - s_star, op.period)).collect();
    let norms = (0..d.ns)
        .map(|i| (0..d.nt - 1).map(|j| w[j] * snap.x[d.index(i, j)].norm_sqr()).sum::<f64>().sqrt())
        .collect();
    (offsets, norms)
}

/// Least-squares slope of `-log‖u(s,·)‖` against `B^{1/2} d(s)`.
pub fn decay_slope(snap: &Snapshot, s_star: f64, table: &AgmonTable) -> Result<f64> {
    if table.is_trivial() {
        return Err(Error::InvalidInput("Agmon distance vanishes identically".into()));
    }
    let (offsets, norms) = tangential_profile(snap, s_star);
    let peak = norms.iter().copied().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::InvalidInput("empty tangential profile".into()));
    }
    let sqrt_b = snap.b.sqrt();
    let pts: Vec<(f64, f64)> = offsets
        .iter()
        .zip(&norms)
        .filter(|(_, &n)| n > PROFILE_FLOOR * peak)
        .map(|(&s, &n)| (sqrt_b * table.eval(s), -(n / peak).ln()))
        .collect();
    let count = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / count;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / count;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.len() < 3 || !(sxx > 0.0) {
        return Err(Error::InvalidInput("tangential profile below the floor everywhere".into()));
    }
    Ok(sxy / sxx)
}
