//! Magnetic field `β` on the closed domain: boundary traces, location of the
//! boundary minimum and the strip gauge `Ã₁(s, t) = ∫₀ᵗ (1 - t'k(s)) β̃(s, t') dt'`, `Ã₂ = 0`.
//!
//! `t` is the inward distance, so `∂β/∂t` is the inward normal derivative.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{gauss_integral, BoundaryCurve, TubularMap};

/// Step of the centered differences used for field derivatives.
const FD_STEP: f64 = 1e-3;
/// Two boundary values closer than this are the same minimum value.
const MIN_TIE: f64 = 1e-9;

/// Config form of a field: `field = { expr = "2 - x" }`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub expr: String,
    /// Optional analytic boundary trace as an expression in `s`, used only as
    /// an oracle.
    #[serde(default)]
    pub trace: Option<String>,
}

type ScalarFn = dyn Fn(f64, f64) -> f64 + Send + Sync;

/// A smooth scalar field `β(x, y)`.
#[derive(Clone)]
pub struct FieldModel {
    label: String,
    beta: Arc<ScalarFn>,
}

impl fmt::Debug for FieldModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FieldModel").field("label", &self.label).finish()
    }
}

/// Compiles an expression in the named variables into a closure over them.
pub(crate) fn compile(src: &str, vars: &[&str]) -> Result<Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>> {
    let expr = exmex::parse::<f64>(src).map_err(|e| Error::Expression(format!("{src:?}: {e}")))?;
    use exmex::Express;
    let slots: Vec<usize> = expr
        .var_names()
        .iter()
        .map(|name| {
            vars.iter().position(|v| v == name).ok_or_else(|| {
                Error::Expression(format!("{src:?}: unknown variable {name:?} (allowed: {vars:?})"))
            })
        })
        .collect::<Result<_>>()?;
    Ok(Arc::new(move |args: &[f64]| {
        let mut buf = [0.0; 4];
        for (k, &slot) in slots.iter().enumerate() {
            buf[k] = args[slot];
        }
        expr.eval(&buf[..slots.len()]).unwrap_or(f64::NAN)
    }))
}

impl FieldModel {
    pub fn from_expr(src: &str) -> Result<Self> {
        let f = compile(src, &["x", "y"])?;
        Ok(Self { label: src.to_string(), beta: Arc::new(move |x, y| f(&[x, y])) })
    }

    pub fn from_spec(spec: &FieldSpec) -> Result<Self> {
        Self::from_expr(&spec.expr)
    }

    pub fn constant(value: f64) -> Self {
        Self { label: format!("{value}"), beta: Arc::new(move |_, _| value) }
    }

    pub fn from_fn(label: &str, f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { label: label.to_string(), beta: Arc::new(f) }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    #[inline]
    pub fn eval(&self, p: [f64; 2]) -> f64 {
        (self.beta)(p[0], p[1])
    }

    /// Minimum of `β` over a dense polar sample of the closed domain,
    /// failing if the field is not positive and finite there.
    pub fn interior_infimum(&self, curve: &BoundaryCurve) -> Result<f64> {
        let (nr, nphi) = (96, 384);
        let mut lo = f64::INFINITY;
        for j in 0..nphi {
            let phi = 2.0 * PI * j as f64 / nphi as f64;
            let rmax = curve.polar_radius(phi);
            let (sn, cs) = phi.sin_cos();
            for i in 0..=nr {
                let r = rmax * i as f64 / nr as f64;
                let v = self.eval([r * cs, r * sn]);
                if !v.is_finite() {
                    return Err(Error::Expression(format!(
                        "β = {} is not finite at ({:.3}, {:.3})",
                        self.label,
                        r * cs,
                        r * sn
                    )));
                }
                lo = lo.min(v);
            }
        }
        for b in curve.samples() {
            lo = lo.min(self.eval(b.point));
        }
        if lo <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "β = {} must be positive on the closed domain (min {lo})",
                self.label
            )));
        }
        Ok(lo)
    }

    /// Total flux `∫_Ω β` in polar coordinates about the origin.
    pub fn flux(&self, curve: &BoundaryCurve) -> f64 {
        let nphi = 512;
        let panels = 6;
        let mut total = 0.0;
        for j in 0..nphi {
            let phi = 2.0 * PI * j as f64 / nphi as f64;
            let rmax = curve.polar_radius(phi);
            let (sn, cs) = phi.sin_cos();
            let mut radial = 0.0;
            for p in 0..panels {
                let a = rmax * p as f64 / panels as f64;
                let b = rmax * (p + 1) as f64 / panels as f64;
                radial += gauss_integral(|r| self.eval([r * cs, r * sn]) * r, a, b);
            }
            total += radial;
        }
        total * 2.0 * PI / nphi as f64
    }
}

/// Field data along the boundary at one arclength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub s: f64,
    pub beta: f64,
    pub dbeta_dt: f64,
    pub dbeta_ds: f64,
    pub d2beta_ds2: f64,
    pub curvature: f64,
}

/// `β̃(s,0)`, `∂β/∂t(s,0)`, `∂β/∂s(s,0)`, `∂²β/∂s²(s,0)` on the boundary table.
#[derive(Debug, Clone)]
pub struct BoundaryTables {
    pub s: Vec<f64>,
    pub beta: Vec<f64>,
    pub dbeta_dt: Vec<f64>,
    pub dbeta_ds: Vec<f64>,
    pub d2beta_ds2: Vec<f64>,
    pub curvature: Vec<f64>,
    pub perimeter: f64,
}

impl BoundaryTables {
    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.perimeter / self.s.len() as f64
    }

    /// Periodic linear interpolation of a table column.
    pub fn interpolate(&self, column: &[f64], s: f64) -> f64 {
        let n = self.len();
        let x = s.rem_euclid(self.perimeter) / self.spacing();
        let i = (x.floor() as usize) % n;
        let w = x - x.floor();
        (1.0 - w) * column[i] + w * column[(i + 1) % n]
    }
}

fn normal_derivative(field: &FieldModel, point: [f64; 2], normal: [f64; 2]) -> f64 {
    let d = |h: f64| {
        let p = field.eval([point[0] + h * normal[0], point[1] + h * normal[1]]);
        let m = field.eval([point[0] - h * normal[0], point[1] - h * normal[1]]);
        (p - m) / (2.0 * h)
    };
    (4.0 * d(FD_STEP / 2.0) - d(FD_STEP)) / 3.0
}

/// Field trace data at an arbitrary boundary point, by differences along the curve.
pub fn trace_at(field: &FieldModel, curve: &BoundaryCurve, s: f64) -> TracePoint {
    let b = curve.at(s);
    let beta = field.eval(b.point);
    let along = |h: f64| field.eval(curve.at(s + h).point);
    let d1 = |h: f64| (along(h) - along(-h)) / (2.0 * h);
    let d2 = |h: f64| (along(h) - 2.0 * beta + along(-h)) / (h * h);
    let h = FD_STEP;
    TracePoint {
        s: curve.wrap(s),
        beta,
        dbeta_dt: normal_derivative(field, b.point, b.normal),
        dbeta_ds: (4.0 * d1(h / 2.0) - d1(h)) / 3.0,
        d2beta_ds2: (4.0 * d2(h / 2.0) - d2(h)) / 3.0,
        curvature: b.curvature,
    }
}

/// Boundary trace and derivative tables: normal derivatives by centered
/// differences along `ν`, tangential ones spectrally.
pub fn boundary_trace_derivatives(field: &FieldModel, curve: &BoundaryCurve) -> Result<BoundaryTables> {
    let samples = curve.samples();
    let n = samples.len();
    let beta: Vec<f64> = samples.iter().map(|b| field.eval(b.point)).collect();
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Expression(format!("β = {} is not finite on the boundary", field.label())));
    }
    let dbeta_dt: Vec<f64> =
        samples.iter().map(|b| normal_derivative(field, b.point, b.normal)).collect();
    if dbeta_dt.iter().any(|v| !v.is_finite()) {
        return Err(Error::Expression("normal derivative step underflow".into()));
    }

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let mut spec: Vec<Complex64> = beta.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fwd.process(&mut spec);
    let scale = 2.0 * PI / curve.perimeter();
    let derive = |order: u32| -> Vec<f64> {
        let mut buf: Vec<Complex64> = spec
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let m = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                // the Nyquist mode has no consistent odd derivative
                if order % 2 == 1 && 2 * k == n {
                    return Complex64::new(0.0, 0.0);
                }
                c * Complex64::new(0.0, m * scale).powu(order)
            })
            .collect();
        inv.process(&mut buf);
        buf.iter().map(|c| c.re / n as f64).collect()
    };

    Ok(BoundaryTables {
        s: samples.iter().map(|b| b.s).collect(),
        dbeta_ds: derive(1),
        d2beta_ds2: derive(2),
        beta,
        dbeta_dt,
        curvature: samples.iter().map(|b| b.curvature).collect(),
        perimeter: curve.perimeter(),
    })
}

/// One non-degenerate (or degenerate) boundary minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryMinimum {
    pub s: f64,
    pub beta: f64,
    /// `½ ∂²β/∂s²` at the minimum.
    pub alpha: f64,
    pub dbeta_dt: f64,
    pub curvature: f64,
}

impl BoundaryMinimum {
    fn from_trace(p: &TracePoint) -> Self {
        Self {
            s: p.s,
            beta: p.beta,
            alpha: 0.5 * p.d2beta_ds2,
            dbeta_dt: p.dbeta_dt,
            curvature: p.curvature,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumData {
    pub s_star: f64,
    /// `inf_Ω β`
    pub b: f64,
    /// `inf_{∂Ω} β`
    pub b_prime: f64,
    pub alpha: f64,
    pub dbeta_dt: f64,
    pub kappa0: f64,
    pub unique: bool,
    pub nondegenerate: bool,
    /// The trace is constant to within the tie tolerance.
    pub constant_trace: bool,
    /// Every detected minimum, the primary one first.
    pub minima: Vec<BoundaryMinimum>,
}

impl MinimumData {
    /// `Θ₀ b' < b`
    pub fn spectral_assumption_holds(&self, theta0: f64) -> bool {
        theta0 * self.b_prime < self.b
    }

    pub fn primary(&self) -> BoundaryMinimum {
        self.minima[0]
    }
}

pub fn locate_minimum(field: &FieldModel, curve: &BoundaryCurve) -> Result<MinimumData> {
    let tables = boundary_trace_derivatives(field, curve)?;
    let b = field.interior_infimum(curve)?;
    let n = tables.len();
    let (lo, hi) = tables
        .beta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, c), &v| (a.min(v), c.max(v)));

    if hi - lo <= MIN_TIE {
        let p = trace_at(field, curve, 0.0);
        let m = BoundaryMinimum { alpha: 0.0, ..BoundaryMinimum::from_trace(&p) };
        return Ok(MinimumData {
            s_star: 0.0,
            b: b.min(lo),
            b_prime: lo,
            alpha: 0.0,
            dbeta_dt: m.dbeta_dt,
            kappa0: m.curvature,
            unique: false,
            nondegenerate: false,
            constant_trace: true,
            minima: vec![m],
        });
    }

    // discrete local minima close to the global one, then polish on the curve
    let h = tables.spacing();
    let window = (hi - lo) * 1e-3 + MIN_TIE;
    let mut minima: Vec<BoundaryMinimum> = Vec::new();
    for i in 0..n {
        let (prev, next) = (tables.beta[(i + n - 1) % n], tables.beta[(i + 1) % n]);
        let v = tables.beta[i];
        if v <= prev && v < next && v - lo <= window {
            let s0 = tables.s[i];
            let slope = |s: f64| trace_at(field, curve, s).dbeta_ds;
            let (a, c) = (s0 - h, s0 + h);
            let s = if slope(a) < 0.0 && slope(c) > 0.0 {
                let mut conv = roots::SimpleConvergency { eps: 1e-14, max_iter: 100 };
                roots::find_root_brent(a, c, slope, &mut conv).unwrap_or(s0)
            } else {
                s0
            };
            minima.push(BoundaryMinimum::from_trace(&trace_at(field, curve, s)));
        }
    }
    if minima.is_empty() {
        return Err(Error::Bracket("no boundary minimum detected".into()));
    }
    minima.sort_by(|x, y| x.beta.total_cmp(&y.beta));
    let b_prime = minima[0].beta;
    minima.retain(|m| m.beta - b_prime <= MIN_TIE);
    let primary = minima[0];
    Ok(MinimumData {
        s_star: primary.s,
        b: b.min(b_prime),
        b_prime,
        alpha: primary.alpha,
        dbeta_dt: primary.dbeta_dt,
        kappa0: primary.curvature,
        unique: minima.len() == 1,
        nondegenerate: minima.iter().all(|m| m.alpha > 1e-8 * b_prime.max(1.0)),
        constant_trace: false,
        minima,
    })
}

/// The strip gauge: `Ã₁(s,t) = ∫₀ᵗ (1 - t'k(s)) β̃(s,t') dt'`, `Ã₂ = 0`.
#[derive(Debug, Clone)]
pub struct StripGauge {
    field: FieldModel,
    map: TubularMap,
}

impl StripGauge {
    pub fn new(field: FieldModel, map: TubularMap) -> Self {
        Self { field, map }
    }

    pub fn field(&self) -> &FieldModel {
        &self.field
    }

    pub fn map(&self) -> &TubularMap {
        &self.map
    }

    /// `β̃(s, t)`; the field is evaluated on the straight normal segment even
    /// slightly beyond the strip.
    pub fn beta(&self, s: f64, t: f64) -> f64 {
        let b = self.map.curve().at(s);
        self.field.eval([b.point[0] + t * b.normal[0], b.point[1] + t * b.normal[1]])
    }

    pub fn gauge_a1(&self, s: f64, t: f64) -> Result<f64> {
        if !(0.0..=self.map.depth()).contains(&t) {
            return Err(Error::Geometry(format!("t = {t} outside the strip [0, {}]", self.map.depth())));
        }
        let b = self.map.curve().at(s);
        let integrand = |x: f64| {
            (1.0 - x * b.curvature)
                * self.field.eval([b.point[0] + x * b.normal[0], b.point[1] + x * b.normal[1]])
        };
        adaptive_gauss(&integrand, 0.0, t, 1e-13, 24)
    }

    /// `Ã₁(s, t_j)` for an increasing list of depths, accumulated panel by panel.
    pub fn a1_column(&self, s: f64, depths: &[f64]) -> Vec<f64> {
        let b = self.map.curve().at(s);
        let integrand = |x: f64| {
            (1.0 - x * b.curvature)
                * self.field.eval([b.point[0] + x * b.normal[0], b.point[1] + x * b.normal[1]])
        };
        let mut out = Vec::with_capacity(depths.len());
        let (mut acc, mut prev) = (0.0, 0.0);
        for &t in depths {
            debug_assert!(t >= prev);
            acc += gauss_integral(&integrand, prev, t);
            prev = t;
            out.push(acc);
        }
        out
    }

    /// `(t - k₁t²/2 + α σ² t) b'` with `σ` the arclength offset from the minimum.
    pub fn reference_a1(sigma: f64, t: f64, k1: f64, alpha: f64, b_prime: f64) -> f64 {
        (t - 0.5 * k1 * t * t + alpha * sigma * sigma * t) * b_prime
    }
}

pub(crate) fn adaptive_gauss(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let whole = gauss_integral(f, a, b);
    let mid = 0.5 * (a + b);
    let halves = gauss_integral(f, a, mid) + gauss_integral(f, mid, b);
    if (whole - halves).abs() <= tol * (1.0 + halves.abs()) {
        return Ok(halves);
    }
    if depth == 0 || !halves.is_finite() {
        return Err(Error::NoConvergence { what: "gauge line integral".into(), iterations: 24 });
    }
    Ok(adaptive_gauss(f, a, mid, tol, depth - 1)? + adaptive_gauss(f, mid, b, tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CurveKind;

    fn unit_disk() -> BoundaryCurve {
        BoundaryCurve::new(CurveKind::Disk { radius: 1.0 }).unwrap()
    }

    #[test]
    fn constant_field_minimum() {
        let m = locate_minimum(&FieldModel::constant(1.0), &unit_disk()).unwrap();
        assert_eq!(m.b, 1.0);
        assert_eq!(m.b_prime, 1.0);
        assert_eq!(m.alpha, 0.0);
        assert!(m.dbeta_dt.abs() < 1e-12);
        assert!(!m.nondegenerate && !m.unique && m.constant_trace);
    }

    #[test]
    fn linear_field_minimum_on_disk() {
        // trace 2 - cos s = 1 + 2 sin²(s/2): ∂²β/∂s²(0) = 1, so α = 1/2
        let f = FieldModel::from_expr("2 - x").unwrap();
        let m = locate_minimum(&f, &unit_disk()).unwrap();
        assert!(m.s_star.min(2.0 * PI - m.s_star) < 1e-8);
        assert!((m.b_prime - 1.0).abs() < 1e-12);
        assert!((m.alpha - 0.5).abs() < 1e-6);
        assert!((m.dbeta_dt - 1.0).abs() < 1e-9);
        assert!(m.unique && m.nondegenerate);
        assert!(m.spectral_assumption_holds(0.5901));

        // trace 1 + 4 sin²(s/2) has α = 1
        let g = FieldModel::from_expr("3 - 2*x").unwrap();
        let m = locate_minimum(&g, &unit_disk()).unwrap();
        assert!((m.alpha - 1.0).abs() < 1e-6);
    }

    #[test]
    fn two_minima_are_reported() {
        let f = FieldModel::from_expr("1 + y^2").unwrap();
        let m = locate_minimum(&f, &unit_disk()).unwrap();
        assert!(!m.unique);
        assert_eq!(m.minima.len(), 2);
    }

    #[test]
    fn trace_tables_constant_field_vanish() {
        let t = boundary_trace_derivatives(&FieldModel::constant(1.0), &unit_disk()).unwrap();
        for col in [&t.dbeta_dt, &t.dbeta_ds, &t.d2beta_ds2] {
            assert!(col.iter().all(|v| v.abs() < 1e-9));
        }
    }

    #[test]
    fn radial_field_normal_derivative() {
        let f = FieldModel::from_expr("2 - sqrt(x^2 + y^2)").unwrap();
        let t = boundary_trace_derivatives(&f, &unit_disk()).unwrap();
        assert!(t.dbeta_dt.iter().all(|v| (v - 1.0).abs() < 1e-6));
    }

    #[test]
    fn spectral_and_pointwise_derivatives_agree() {
        let f = FieldModel::from_expr("2 - x + 0.3*y^2").unwrap();
        let c = BoundaryCurve::new(CurveKind::Ellipse { a: 1.5, b: 1.0 }).unwrap();
        let t = boundary_trace_derivatives(&f, &c).unwrap();
        for i in (0..t.len()).step_by(331) {
            let p = trace_at(&f, &c, t.s[i]);
            assert!((p.d2beta_ds2 - t.d2beta_ds2[i]).abs() < 1e-6);
            assert!((p.dbeta_ds - t.dbeta_ds[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn symbolic_trace_second_derivative() {
        let f = FieldModel::from_expr("2 - x").unwrap();
        let t = boundary_trace_derivatives(&f, &unit_disk()).unwrap();
        // β(γ(s)) = 2 - cos s
        for i in (0..t.len()).step_by(257) {
            assert!((t.d2beta_ds2[i] - t.s[i].cos()).abs() < 1e-9);
        }
    }

    #[test]
    fn gauge_reductions() {
        let map = TubularMap::new(unit_disk(), 0.5).unwrap();
        let g = StripGauge::new(FieldModel::constant(1.0), map);
        for &t in &[0.0, 0.1, 0.37, 0.5] {
            let a = g.gauge_a1(1.3, t).unwrap();
            assert!((a - (t - t * t / 2.0)).abs() < 1e-10);
        }
        // s-independence for constant field on constant curvature
        let vals: Vec<f64> = (0..16).map(|i| g.gauge_a1(i as f64 * 0.4, 0.3).unwrap()).collect();
        let spread = vals.iter().fold(0.0_f64, |m, v| m.max((v - vals[0]).abs()));
        assert!(spread < 1e-10);
        assert!(g.gauge_a1(0.0, 0.6).is_err());
    }

    #[test]
    fn gauge_curl_matches_field() {
        let c = BoundaryCurve::new(CurveKind::Ellipse { a: 1.4, b: 1.0 }).unwrap();
        let map = TubularMap::new(c.clone(), 0.3).unwrap();
        let g = StripGauge::new(FieldModel::from_expr("1 + 0.5*x*y + 0.2*x^2").unwrap(), map);
        let h = 1e-4;
        for &(s, t) in &[(0.2, 0.1), (1.7, 0.05), (3.3, 0.2), (5.0, 0.15)] {
            let dt = (g.gauge_a1(s, t + h).unwrap() - g.gauge_a1(s, t - h).unwrap()) / (2.0 * h);
            let expect = (1.0 - t * c.curvature(s)) * g.beta(s, t);
            assert!((dt - expect).abs() < 1e-6 * expect.abs(), "{dt} vs {expect}");
        }
        let col = g.a1_column(0.9, &[0.05, 0.1, 0.2]);
        for (a, t) in col.iter().zip([0.05, 0.1, 0.2]) {
            assert!((a - g.gauge_a1(0.9, t).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn flux_of_unit_field_is_area() {
        let c = BoundaryCurve::new(CurveKind::Ellipse { a: 2.0, b: 1.0 }).unwrap();
        assert!((FieldModel::constant(1.0).flux(&c) - 2.0 * PI).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_expressions() {
        assert!(FieldModel::from_expr("1 + z").is_err());
        assert!(FieldModel::from_expr("1 + (x").is_err());
        let neg = FieldModel::from_expr("x").unwrap();
        assert!(neg.interior_infimum(&unit_disk()).is_err());
    }
}
