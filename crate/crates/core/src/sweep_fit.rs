//! Field-strength sweeps on the boundary strip and weighted least-squares fits
//! of `λ₁(B)` against the asymptotic laws.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{AsymptoticPrediction, PredictionModel};
use crate::eigensolve::{default_shift, lowest_pairs, EigMeta, EigOptions, EigResult};
use crate::error::{Error, Result};
use crate::field::{locate_minimum, FieldModel, MinimumData, StripGauge};
use crate::geometry::{BoundaryCurve, TubularMap};
use crate::halfline::DeGennesConstants;
use crate::strip::{
    assemble, dirichlet_truncation_error, holonomy_phase, Floquet, OperatorPair, StripDisc, StripSettings,
    TRUNCATION_TOLERANCE,
};

/// Fits with a design condition number above this are refused.
pub const MAX_CONDITION: f64 = 1e8;
/// Phases probed by the Floquet diagnostic.
const FLOQUET_PROBES: [f64; 4] = [0.0, 0.5 * PI, PI, 1.5 * PI];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub nev: usize,
    pub tol: f64,
    pub seed: u64,
    /// Re-solve at four Floquet phases and report the spread of `λ₁`.
    pub floquet_check: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self { nev: 1, tol: 1e-10, seed: 0x5eed, floquet_check: false }
    }
}

/// Everything needed to solve the strip problem at any `B`.
#[derive(Debug, Clone)]
pub struct StripProblem {
    pub curve: BoundaryCurve,
    pub gauge: StripGauge,
    pub minimum: MinimumData,
    pub constants: DeGennesConstants,
    pub strip: StripSettings,
    pub solver: SolverSettings,
    flux: f64,
}

/// An operator with its lowest eigenpairs.
#[derive(Debug, Clone)]
pub struct Solved {
    pub b: f64,
    pub op: OperatorPair,
    pub eig: EigResult,
}

impl StripProblem {
    pub fn new(
        curve: BoundaryCurve,
        field: FieldModel,
        constants: DeGennesConstants,
        strip: StripSettings,
        solver: SolverSettings,
    ) -> Result<Self> {
        if solver.nev == 0 || !(solver.tol > 0.0) {
            return Err(Error::InvalidInput(format!("need nev >= 1 and tol > 0, got {} and {}", solver.nev, solver.tol)));
        }
        let minimum = locate_minimum(&field, &curve)?;
        let kmax = curve.max_curvature();
        let depth = if kmax > 0.0 { 0.95 / kmax } else { 1.0 };
        let flux = field.flux(&curve);
        let gauge = StripGauge::new(field, TubularMap::new(curve.clone(), depth)?);
        Ok(Self { curve, gauge, minimum, constants, strip, solver, flux })
    }

    pub fn field(&self) -> &FieldModel {
        self.gauge.field()
    }

    pub fn flux(&self) -> f64 {
        self.flux
    }

    /// Discretization chosen by the resolution policy at `b`.
    pub fn disc(&self, b: f64) -> Result<StripDisc> {
        let m = &self.minimum;
        StripDisc::policy(b, m.b_prime, self.constants.xi0, m.s_star, &self.gauge, &self.strip)
    }

    /// Envelope Floquet phase at `b` on `disc`.
    pub fn theta(&self, b: f64, disc: &StripDisc) -> f64 {
        match self.strip.floquet {
            Floquet::Phase(t) => t,
            Floquet::Mode(_) => holonomy_phase(b, self.flux, disc.momentum, self.curve.perimeter()),
        }
    }

    /// Discretization `disc` with the band momentum of `b`.
    pub fn rescaled(&self, b: f64, disc: &StripDisc) -> StripDisc {
        disc.with_momentum(self.constants.xi0 * (b * self.minimum.b_prime).sqrt())
    }

    pub fn options(&self, b: f64) -> EigOptions {
        let shift = default_shift(self.constants.theta0, self.minimum.b_prime, b);
        EigOptions::new(self.solver.nev, self.solver.tol, shift).with_seed(self.solver.seed)
    }

    pub fn solve_on(&self, b: f64, disc: &StripDisc, theta: f64) -> Result<Solved> {
        let op = assemble(&self.gauge, b, theta, disc)?;
        let eig = lowest_pairs(&op, &self.options(b))?;
        Ok(Solved { b, op, eig })
    }

    pub fn solve(&self, b: f64) -> Result<Solved> {
        let disc = self.disc(b)?;
        self.solve_on(b, &disc, self.theta(b, &disc))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRecord {
    pub b: f64,
    pub values: Vec<f64>,
    pub stats: EigMeta,
    pub disc: StripDisc,
    pub theta: f64,
    pub tail_mass: f64,
    /// `max |λ₁(θ) - λ₁(0)| / λ₁(0)` over four phases, when requested.
    pub floquet_var: Option<f64>,
    pub flags: Vec<String>,
}

impl SweepRecord {
    pub fn lambda1(&self) -> f64 {
        self.values[0]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepFailure {
    pub b: f64,
    pub message: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Sweep {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
}

/// Checks that `b_values` is increasing, positive and spans a factor 8.
pub fn validate_sweep(b_values: &[f64]) -> Result<()> {
    if b_values.len() < 5 {
        return Err(Error::InvalidInput(format!("sweep needs at least 5 field strengths, got {}", b_values.len())));
    }
    if b_values.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return Err(Error::InvalidInput("field strengths must be positive and finite".into()));
    }
    if b_values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("field strengths must be strictly increasing".into()));
    }
    let span = b_values[b_values.len() - 1] / b_values[0];
    if span < 8.0 {
        return Err(Error::InvalidInput(format!("sweep spans a factor {span:.3}, need at least 8")));
    }
    Ok(())
}

pub fn sweep_record(problem: &StripProblem, b: f64) -> Result<SweepRecord> {
    let disc = problem.disc(b)?;
    let theta = problem.theta(b, &disc);
    let solved = problem.solve_on(b, &disc, theta)?;
    let tail_mass = dirichlet_truncation_error(&solved.op, &solved.eig.vectors[0]);
    let mut flags = Vec::new();
    if tail_mass > TRUNCATION_TOLERANCE {
        flags.push(format!("tail mass {tail_mass:.2e}"));
    }
    if !solved.eig.meta.monotone {
        flags.push("non-monotone Ritz history".into());
    }
    let floquet_var = if problem.solver.floquet_check {
        let base = solved.eig.lambda1();
        let mut worst = 0.0_f64;
        for phase in FLOQUET_PROBES {
            let l = if phase == theta { base } else { problem.solve_on(b, &disc, phase)?.eig.lambda1() };
            worst = worst.max((l - base).abs() / base.abs());
        }
        Some(worst)
    } else {
        None
    };
    Ok(SweepRecord {
        b,
        values: solved.eig.values.clone(),
        stats: solved.eig.meta.clone(),
        disc,
        theta,
        tail_mass,
        floquet_var,
        flags,
    })
}

/// Solves every `B` concurrently. A failed solve is listed and skipped.
pub fn run_sweep(problem: &StripProblem, b_values: &[f64]) -> Result<Sweep> {
    validate_sweep(b_values)?;
    let outcomes: Vec<(f64, Result<SweepRecord>)> =
        b_values.par_iter().map(|&b| (b, sweep_record(problem, b))).collect();
    let mut sweep = Sweep::default();
    for (b, r) in outcomes {
        match r {
            Ok(rec) => sweep.records.push(rec),
            Err(e) => {
                log::warn!("sweep point B = {b} failed: {e}");
                sweep.failures.push(SweepFailure { b, message: e.to_string() });
            }
        }
    }
    Ok(sweep)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub fitted: f64,
    pub std_error: f64,
    pub predicted: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub exponents: Vec<f64>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Weighted residual sum of squares.
    pub residual: f64,
    pub condition: f64,
    pub points: usize,
    pub model: Option<PredictionModel>,
    pub comparison: Vec<ComparisonRow>,
    /// Log-log slope of `|λ₁ - prediction|` against `B`.
    pub residual_exponent: Option<f64>,
}

pub const DEFAULT_EXPONENTS: [f64; 3] = [1.0, 0.5, 1.0 / 3.0];

/// Least squares of `λ(B) ≈ Σ cᵢ B^{eᵢ}` with residual weights `1/B`.
pub fn fit_points(b: &[f64], lambda: &[f64], exponents: &[f64]) -> Result<AsymptoticFit> {
    let n = b.len();
    let p = exponents.len();
    if n != lambda.len() || p == 0 || n < p {
        return Err(Error::InvalidInput(format!("{n} points cannot fit {p} coefficients")));
    }
    let x = DMatrix::from_fn(n, p, |i, j| b[i].powf(exponents[j]) / b[i]);
    let y = DVector::from_fn(n, |i, _| lambda[i] / b[i]);
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition > MAX_CONDITION {
        return Err(Error::Singular(format!(
            "fit design condition {condition:.3e} exceeds {MAX_CONDITION:.0e}; widen the B span or drop an exponent"
        )));
    }
    let coef = svd.solve(&y, 0.0).map_err(|e| Error::Singular(e.to_string()))?;
    let resid = &y - &x * &coef;
    let rss = resid.norm_squared();
    let dof = n.saturating_sub(p);
    let sigma2 = if dof > 0 { rss / dof as f64 } else { 0.0 };
    let gram = (x.transpose() * &x).try_inverse().ok_or_else(|| Error::Singular("normal equations".into()))?;
    let std_errors = (0..p).map(|j| (sigma2 * gram[(j, j)]).max(0.0).sqrt()).collect();
    Ok(AsymptoticFit {
        exponents: exponents.to_vec(),
        coefficients: coef.iter().copied().collect(),
        std_errors,
        residual: rss,
        condition,
        points: n,
        model: None,
        comparison: Vec::new(),
        residual_exponent: None,
    })
}

/// Log-log least-squares slope of `y` against `x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> =
        x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Fits `λ₁` over the records and compares with `prediction`.
pub fn fit(records: &[SweepRecord], prediction: Option<&AsymptoticPrediction>, exponents: &[f64]) -> Result<AsymptoticFit> {
    let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.b, r.lambda1())).collect();
    fit_pairs(&pts, prediction, exponents)
}

/// [`fit`] on bare `(B, λ₁)` pairs in any order.
pub fn fit_pairs(points: &[(f64, f64)], prediction: Option<&AsymptoticPrediction>, exponents: &[f64]) -> Result<AsymptoticFit> {
    if points.len() < 4 {
        return Err(Error::InvalidInput(format!("fit needs at least 4 records, got {}", points.len())));
    }
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let b: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let lambda: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let mut out = fit_points(&b, &lambda, exponents)?;
    if let Some(pred) = prediction {
        out.model = Some(pred.model);
        for (name, e, target) in [("a", 1.0, pred.a), ("b", 0.5, pred.b)] {
            if let Some(j) = exponents.iter().position(|&x| x == e) {
                let fitted = out.coefficients[j];
                out.comparison.push(ComparisonRow {
                    name: name.into(),
                    fitted,
                    std_error: out.std_errors[j],
                    predicted: target,
                    rel_error: (fitted - target) / target.abs(),
                });
            }
        }
        let dev: Vec<f64> = b.iter().zip(&lambda).map(|(&bb, &l)| (l - pred.eval(bb)).abs()).collect();
        out.residual_exponent = loglog_slope(&b, &dev);
    }
    Ok(out)
}

impl AsymptoticFit {
    pub fn row(&self, name: &str) -> Option<&ComparisonRow> {
        self.comparison.iter().find(|r| r.name == name)
    }

    /// Aligned plain-text report.
    pub fn text_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>16} {:>12}", "exponent", "coefficient", "std error");
        for ((e, c), se) in self.exponents.iter().zip(&self.coefficients).zip(&self.std_errors) {
            let _ = writeln!(s, "{e:<10.6} {c:>16.8} {se:>12.3e}");
        }
        let _ = writeln!(s, "points {}  condition {:.3e}  weighted rss {:.3e}", self.points, self.condition, self.residual);
        if !self.comparison.is_empty() {
            let _ = writeln!(s, "\n{:<6} {:>14} {:>14} {:>12}", "coef", "fitted", "predicted", "rel error");
            for r in &self.comparison {
                let _ = writeln!(s, "{:<6} {:>14.8} {:>14.8} {:>12.3e}", r.name, r.fitted, r.predicted, r.rel_error);
            }
        }
        if let Some(e) = self.residual_exponent {
            let _ = writeln!(s, "\nresidual exponent {e:.4}");
        }
        s
    }
}

/// Writes the sweep table. Prediction columns are empty when not given.
pub fn write_csv<W: Write>(
    out: W,
    records: &[SweepRecord],
    rough: Option<&AsymptoticPrediction>,
    two_term: Option<&AsymptoticPrediction>,
) -> Result<()> {
    let nev = records.iter().map(|r| r.values.len()).max().unwrap_or(1);
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::InvalidInput(format!("csv output: {e}"));
    let mut header = vec!["B".to_string()];
    header.extend((1..=nev).map(|i| format!("lambda{i}")));
    header.extend(["pred_rough", "pred_two_term", "resid", "tail_mass", "floquet_var"].map(String::from));
    w.write_record(&header).map_err(io)?;
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.12e}"));
    for r in records {
        let mut row = vec![format!("{}", r.b)];
        row.extend((0..nev).map(|i| opt(r.values.get(i).copied())));
        let reference = two_term.or(rough);
        row.push(opt(rough.map(|p| p.eval(r.b))));
        row.push(opt(two_term.map(|p| p.eval(r.b))));
        row.push(opt(reference.map(|p| r.lambda1() - p.eval(r.b))));
        row.push(format!("{:.6e}", r.tail_mass));
        row.push(opt(r.floquet_var));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv output: {e}")))?;
    Ok(())
}

/// Columns of a sweep table written by [`write_csv`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepTable {
    pub b: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub pred_rough: Vec<Option<f64>>,
    pub pred_two_term: Vec<Option<f64>>,
}

impl SweepTable {
    pub fn pairs(&self) -> Vec<(f64, f64)> {
        self.b.iter().copied().zip(self.lambda1.iter().copied()).collect()
    }
}

pub fn read_csv(text: &str) -> Result<SweepTable> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let bad = |e: String| Error::InvalidInput(format!("sweep table: {e}"));
    let headers = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let need = |name: &str| col(name).ok_or_else(|| bad(format!("missing column {name}")));
    let (ib, il) = (need("B")?, need("lambda1")?);
    let (ir, it) = (col("pred_rough"), col("pred_two_term"));
    let mut out = SweepTable::default();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let parse = |i: usize| rec.get(i).unwrap_or("").parse::<f64>().map_err(|e| bad(e.to_string()));
        let optional = |i: Option<usize>| i.and_then(|i| rec.get(i)).and_then(|v| v.parse::<f64>().ok());
        out.b.push(parse(ib)?);
        out.lambda1.push(parse(il)?);
        out.pred_rough.push(optional(ir));
        out.pred_two_term.push(optional(it));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_two_term_data() {
        let b = [50.0, 100.0, 200.0, 400.0, 800.0];
        let l: Vec<f64> = b.iter().map(|x: &f64| 2.0 * x + 3.0 * x.sqrt()).collect();
        let f = fit_points(&b, &l, &[1.0, 0.5]).unwrap();
        assert!((f.coefficients[0] - 2.0).abs() < 1e-12);
        assert!((f.coefficients[1] - 3.0).abs() < 1e-10);
        assert!(f.residual < 1e-24);
    }

    #[test]
    fn three_exponent_fit_recovers_remainder() {
        let b = [50.0, 100.0, 200.0, 400.0, 800.0];
        let l: Vec<f64> = b.iter().map(|x: &f64| 0.59 * x - 0.25 * x.sqrt() + 0.7 * x.cbrt()).collect();
        let f = fit_points(&b, &l, &DEFAULT_EXPONENTS).unwrap();
        for (c, e) in f.coefficients.iter().zip([0.59, -0.25, 0.7]) {
            assert!((c - e).abs() < 1e-8, "{c} vs {e}");
        }
        assert!(f.condition > 1.0 && f.condition < MAX_CONDITION);
    }

    #[test]
    fn ill_conditioned_design_is_refused() {
        let b = [100.0, 100.0 * (1.0 + 1e-9), 100.0 * (1.0 + 2e-9)];
        let l = [1.0, 2.0, 3.0];
        assert!(matches!(fit_points(&b, &l, &DEFAULT_EXPONENTS), Err(Error::Singular(_))));
    }

    #[test]
    fn sweep_validation() {
        assert!(validate_sweep(&[50.0, 100.0, 200.0, 400.0, 800.0]).is_ok());
        assert!(validate_sweep(&[50.0, 100.0, 100.0, 400.0, 800.0]).is_err());
        assert!(validate_sweep(&[0.0, 100.0, 200.0, 400.0, 800.0]).is_err());
        assert!(validate_sweep(&[100.0, 200.0, 300.0, 400.0, 500.0]).is_err());
        assert!(validate_sweep(&[50.0, 100.0, 800.0]).is_err());
    }

    #[test]
    fn loglog_slope_of_power() {
        let x = [1.0, 2.0, 4.0, 8.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.4)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 0.4).abs() < 1e-12);
    }
}
