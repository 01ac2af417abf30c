//! Smooth closed boundaries in arclength parametrization and the tubular
//! coordinates `(s, t) ↦ γ(s) + t ν(s)` built on them.
//!
//! Orientation is counter-clockwise and `ν` is the inward normal, so
//! `det(γ', ν) = 1` and `γ'' = k ν` with `k > 0` on convex arcs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gauss–Legendre rule on [0, 1], 8 points.
pub(crate) const GL8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_856, 0.050_614_268_145_188_13),
    (0.101_666_761_293_186_63, 0.111_190_517_226_687_24),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_64),
    (0.408_282_678_752_175_1, 0.181_341_891_689_180_99),
    (0.591_717_321_247_824_9, 0.181_341_891_689_180_99),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_64),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_24),
    (0.980_144_928_248_768_1, 0.050_614_268_145_188_13),
];

pub const DEFAULT_SAMPLES: usize = 4096;

/// Boundary shape. Every kind is star-shaped about the origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum CurveKind {
    Disk { radius: f64 },
    Ellipse { a: f64, b: f64 },
    /// Polar radius `r(φ) = cos[0] + Σ_{k≥1} cos[k] cos kφ + sin[k-1] sin kφ`.
    Fourier {
        cos: Vec<f64>,
        #[serde(default)]
        sin: Vec<f64>,
    },
}

impl CurveKind {
    fn validate(&self) -> Result<()> {
        match self {
            CurveKind::Disk { radius } if !(*radius > 0.0) => {
                Err(Error::Geometry(format!("disk radius {radius} must be positive")))
            }
            CurveKind::Ellipse { a, b } if !(*a > 0.0 && *b > 0.0) => {
                Err(Error::Geometry(format!("ellipse semi-axes ({a}, {b}) must be positive")))
            }
            CurveKind::Fourier { cos, .. } if cos.is_empty() => {
                Err(Error::Geometry("fourier curve needs a mean radius".into()))
            }
            CurveKind::Fourier { .. } => {
                let n = 2048;
                for i in 0..n {
                    let phi = 2.0 * PI * i as f64 / n as f64;
                    if self.polar(phi)[0] <= 0.0 {
                        return Err(Error::Geometry(format!(
                            "fourier polar radius is not positive at φ = {phi:.4}"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Polar radius of the boundary and its first two φ-derivatives.
    pub fn polar(&self, phi: f64) -> [f64; 3] {
        match self {
            CurveKind::Disk { radius } => [*radius, 0.0, 0.0],
            CurveKind::Ellipse { a, b } => {
                // r = ab / sqrt(q), q = b² cos² + a² sin²
                let (s, c) = phi.sin_cos();
                let q = b * b * c * c + a * a * s * s;
                let dq = (a * a - b * b) * 2.0 * s * c;
                let d2q = (a * a - b * b) * 2.0 * (c * c - s * s);
                let r = a * b / q.sqrt();
                let dr = -0.5 * r * dq / q;
                let d2r = -0.5 * (dr * dq + r * d2q) / q + 0.5 * r * dq * dq / (q * q);
                [r, dr, d2r]
            }
            CurveKind::Fourier { cos, sin } => {
                let mut out = [cos[0], 0.0, 0.0];
                for k in 1..cos.len().max(sin.len() + 1) {
                    let kf = k as f64;
                    let (s, c) = (kf * phi).sin_cos();
                    let a = cos.get(k).copied().unwrap_or(0.0);
                    let b = sin.get(k - 1).copied().unwrap_or(0.0);
                    out[0] += a * c + b * s;
                    out[1] += kf * (-a * s + b * c);
                    out[2] += -kf * kf * (a * c + b * s);
                }
                out
            }
        }
    }

    /// Raw parametrization p(φ) with p' and p''.
    fn raw(&self, phi: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        if let CurveKind::Ellipse { a, b } = self {
            let (s, c) = phi.sin_cos();
            return ([a * c, b * s], [-a * s, b * c], [-a * c, -b * s]);
        }
        let [r, dr, d2r] = self.polar(phi);
        let (s, c) = phi.sin_cos();
        (
            [r * c, r * s],
            [dr * c - r * s, dr * s + r * c],
            [d2r * c - 2.0 * dr * s - r * c, d2r * s + 2.0 * dr * c - r * s],
        )
    }

    fn speed(&self, phi: f64) -> f64 {
        let (_, d, _) = self.raw(phi);
        d[0].hypot(d[1])
    }
}

/// One row of the dense arclength table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundarySample {
    pub s: f64,
    pub phi: f64,
    pub point: [f64; 2],
    pub tangent: [f64; 2],
    pub normal: [f64; 2],
    pub curvature: f64,
}

/// Closed counter-clockwise boundary with a uniform-arclength sample table.
#[derive(Debug, Clone)]
pub struct BoundaryCurve {
    kind: CurveKind,
    perimeter: f64,
    /// Cumulative arclength at the raw-parameter panel edges.
    panel_phi: Vec<f64>,
    panel_s: Vec<f64>,
    samples: Vec<BoundarySample>,
}

impl BoundaryCurve {
    pub fn new(kind: CurveKind) -> Result<Self> {
        Self::with_samples(kind, DEFAULT_SAMPLES)
    }

    pub fn with_samples(kind: CurveKind, count: usize) -> Result<Self> {
        kind.validate()?;
        if count < 64 {
            return Err(Error::Geometry(format!("{count} boundary samples is too few")));
        }
        let panels = count.max(256);
        let panel_phi: Vec<f64> =
            (0..=panels).map(|i| 2.0 * PI * i as f64 / panels as f64).collect();
        let mut panel_s = vec![0.0; panels + 1];
        for i in 0..panels {
            panel_s[i + 1] = panel_s[i] + gauss_integral(|p| kind.speed(p), panel_phi[i], panel_phi[i + 1]);
        }
        let perimeter = panel_s[panels];
        let mut curve = Self { kind, perimeter, panel_phi, panel_s, samples: Vec::new() };
        curve.samples = (0..count)
            .map(|j| curve.sample(perimeter * j as f64 / count as f64))
            .collect();
        Ok(curve)
    }

    pub fn kind(&self) -> &CurveKind {
        &self.kind
    }

    pub fn perimeter(&self) -> f64 {
        self.perimeter
    }

    pub fn samples(&self) -> &[BoundarySample] {
        &self.samples
    }

    pub fn wrap(&self, s: f64) -> f64 {
        s.rem_euclid(self.perimeter)
    }

    /// Raw parameter φ with arclength `s`, by Newton on the panel integral.
    fn phi_of_s(&self, s: f64) -> f64 {
        let s = self.wrap(s);
        let i = match self.panel_s.binary_search_by(|v| v.total_cmp(&s)) {
            Ok(i) => return self.panel_phi[i],
            Err(i) => i.saturating_sub(1).min(self.panel_s.len() - 2),
        };
        let (p0, p1) = (self.panel_phi[i], self.panel_phi[i + 1]);
        let (s0, s1) = (self.panel_s[i], self.panel_s[i + 1]);
        let mut phi = p0 + (p1 - p0) * (s - s0) / (s1 - s0);
        for _ in 0..8 {
            let f = s0 + gauss_integral(|p| self.kind.speed(p), p0, phi) - s;
            let step = f / self.kind.speed(phi);
            phi -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        phi
    }

    fn sample(&self, s: f64) -> BoundarySample {
        let phi = self.phi_of_s(s);
        let (p, d, dd) = self.kind.raw(phi);
        let speed = d[0].hypot(d[1]);
        let tangent = [d[0] / speed, d[1] / speed];
        let normal = [-tangent[1], tangent[0]];
        let curvature = (d[0] * dd[1] - d[1] * dd[0]) / speed.powi(3);
        BoundarySample { s: self.wrap(s), phi, point: p, tangent, normal, curvature }
    }

    /// Boundary data at arbitrary arclength (periodic).
    pub fn at(&self, s: f64) -> BoundarySample {
        self.sample(s)
    }

    pub fn curvature(&self, s: f64) -> f64 {
        self.sample(s).curvature
    }

    pub fn max_curvature(&self) -> f64 {
        self.samples.iter().map(|x| x.curvature).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `∮ k ds` by the periodic trapezoid rule on the table.
    pub fn total_turning(&self) -> f64 {
        let h = self.perimeter / self.samples.len() as f64;
        self.samples.iter().map(|x| x.curvature).sum::<f64>() * h
    }

    /// Polar radius of the boundary in direction `phi` from the origin.
    pub fn polar_radius(&self, phi: f64) -> f64 {
        self.kind.polar(phi)[0]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        let r = p[0].hypot(p[1]);
        r <= self.polar_radius(p[1].atan2(p[0]))
    }

    /// Nearest boundary point: returns `(s, t)` with `t` the signed inward distance.
    pub fn project(&self, p: [f64; 2]) -> (f64, f64) {
        let dist2 = |q: [f64; 2]| (p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2);
        let best = self
            .samples
            .iter()
            .min_by(|a, b| dist2(a.point).total_cmp(&dist2(b.point)))
            .expect("non-empty table");
        // Newton on g(s) = (γ(s) - p)·γ'(s) = 0
        let mut s = best.s;
        for _ in 0..30 {
            let b = self.sample(s);
            let r = [b.point[0] - p[0], b.point[1] - p[1]];
            let g = r[0] * b.tangent[0] + r[1] * b.tangent[1];
            let dg = 1.0 + b.curvature * (r[0] * b.normal[0] + r[1] * b.normal[1]);
            let step = g / dg;
            s -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        let b = self.sample(s);
        let t = (p[0] - b.point[0]) * b.normal[0] + (p[1] - b.point[1]) * b.normal[1];
        (self.wrap(s), t)
    }
}

pub(crate) fn gauss_integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = b - a;
    GL8.iter().map(|&(x, w)| w * f(a + x * h)).sum::<f64>() * h
}

/// Tubular neighbourhood `{γ(s) + t ν(s) : 0 ≤ t ≤ depth}`.
#[derive(Debug, Clone)]
pub struct TubularMap {
    curve: BoundaryCurve,
    depth: f64,
}

impl TubularMap {
    pub fn new(curve: BoundaryCurve, depth: f64) -> Result<Self> {
        let kmax = curve.max_curvature();
        if !(depth > 0.0) || depth * kmax >= 1.0 {
            return Err(Error::Geometry(format!(
                "strip depth {depth} violates t0·max k < 1 (max k = {kmax})"
            )));
        }
        Ok(Self { curve, depth })
    }

    /// Depth `0.5 / max k`, or `0.5 · perimeter / 2π` for flat curves.
    pub fn with_default_depth(curve: BoundaryCurve) -> Result<Self> {
        let kmax = curve.max_curvature();
        let depth = if kmax > 0.0 { 0.5 / kmax } else { 0.5 * curve.perimeter() / (2.0 * PI) };
        Self::new(curve, depth)
    }

    pub fn curve(&self) -> &BoundaryCurve {
        &self.curve
    }

    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn boundary_map(&self, s: f64, t: f64) -> Result<[f64; 2]> {
        if !(0.0..=self.depth).contains(&t) {
            return Err(Error::Geometry(format!("t = {t} outside the strip [0, {}]", self.depth)));
        }
        let b = self.curve.at(s);
        Ok([b.point[0] + t * b.normal[0], b.point[1] + t * b.normal[1]])
    }

    /// Area factor `1 - t k(s)`.
    pub fn jacobian(&self, s: f64, t: f64) -> f64 {
        1.0 - t * self.curve.curvature(s)
    }
}
