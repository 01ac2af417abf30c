use magneto_spectra::eigensolve::{lowest_pairs, EigOptions};
use magneto_spectra::field::{FieldModel, StripGauge};
use magneto_spectra::geometry::{BoundaryCurve, CurveKind, TubularMap};
use magneto_spectra::halfline::{find_minimum, solve_mu, HalfLineDisc};
use magneto_spectra::strip::{assemble, FlatStrip, Floquet, FloquetMode, StripDisc, StripModel, StripSettings};
use magneto_spectra::sweep_fit::{SolverSettings, StripProblem};

const THETA0: f64 = 0.5901061250;

fn lowest(model: &impl StripModel, b: f64, theta: f64, disc: &StripDisc, nev: usize) -> Vec<f64> {
    let op = assemble(model, b, theta, disc).unwrap();
    lowest_pairs(&op, &EigOptions::new(nev, 1e-11, 0.5 * b)).unwrap().values
}

fn flat_disc(b: f64, momentum: f64) -> StripDisc {
    let ell = b.powf(-0.5);
    let nt = (12.0 * 8.0) as usize;
    StripDisc::new(64, nt, 8.0 * ell, 1.0).unwrap().with_momentum(momentum)
}

#[test]
fn flat_strip_band_bottom_is_theta0() {
    let b = 100.0;
    let model = FlatStrip { period: 1.0, field: FieldModel::constant(1.0) };
    let disc = flat_disc(b, -0.7681836531 * b.sqrt());
    let l = lowest(&model, b, 0.0, &disc, 1)[0];
    assert!((l / b - THETA0).abs() < 2e-4, "{}", l / b);
}

#[test]
fn flat_strip_phase_follows_half_line_band() {
    // mode e^{iθs/L} sees the shifted parameter ξ₀ + θ/(L√B)
    let b = 100.0;
    let period = 2.0;
    let xi0 = -0.7681836531;
    let model = FlatStrip { period, field: FieldModel::constant(1.0) };
    let disc = flat_disc(b, xi0 * b.sqrt());
    let hl = HalfLineDisc::default();
    for theta in [0.5, 1.5, 3.0] {
        let l = lowest(&model, b, theta, &disc, 1)[0];
        let xi = xi0 + theta / (period * b.sqrt());
        let mu = solve_mu(xi, &hl).unwrap().mu;
        assert!((l / b - mu).abs() < 3e-4, "θ = {theta}: {} vs {mu}", l / b);
    }
}

/// `Ã₁ + c`, compensated by the momentum.
struct Shifted<'a> {
    inner: &'a StripGauge,
    c: f64,
}

impl StripModel for Shifted<'_> {
    fn period(&self) -> f64 {
        self.inner.period()
    }
    fn curvature(&self, s: f64) -> f64 {
        StripModel::curvature(self.inner, s)
    }
    fn max_curvature(&self) -> f64 {
        StripModel::max_curvature(self.inner)
    }
    fn beta(&self, s: f64, t: f64) -> f64 {
        StripModel::beta(self.inner, s, t)
    }
    fn a1_column(&self, s: f64, depths: &[f64]) -> Vec<f64> {
        StripModel::a1_column(self.inner, s, depths).into_iter().map(|a| a + self.c).collect()
    }
}

#[test]
fn constant_gauge_shift_is_absorbed_by_momentum() {
    let curve = BoundaryCurve::new(CurveKind::Ellipse { a: 1.2, b: 0.8 }).unwrap();
    let gauge = StripGauge::new(FieldModel::from_expr("1 + 0.3*y").unwrap(), TubularMap::new(curve, 0.45).unwrap());
    let b = 80.0;
    let disc = StripDisc::new(96, 40, 0.4, 1.0).unwrap().with_momentum(-6.0);
    let base = lowest(&gauge, b, 0.9, &disc, 3);
    for c in [0.37, -1.25] {
        let shifted = Shifted { inner: &gauge, c };
        let moved = lowest(&shifted, b, 0.9, &disc.with_momentum(-6.0 - b * c), 3);
        for (x, y) in base.iter().zip(&moved) {
            assert!((x - y).abs() <= 1e-10 * x.abs(), "{x} vs {y}");
        }
    }
}

/// Lowest eigenvalue of the symmetric tridiagonal pencil by Sturm bisection.
fn tridiagonal_lowest(diag: &[f64], off: &[f64], mass: &[f64]) -> f64 {
    let n = diag.len();
    let a: Vec<f64> = (0..n).map(|i| diag[i] / mass[i]).collect();
    let e: Vec<f64> = (0..n - 1).map(|i| off[i] / (mass[i] * mass[i + 1]).sqrt()).collect();
    let below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            d = a[i] - x - if i > 0 { e[i - 1] * e[i - 1] / d } else { 0.0 };
            if d == 0.0 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    let (mut lo, mut hi) = (a.iter().zip(&e).fold(f64::INFINITY, |m, (x, y)| m.min(x - 2.0 * y.abs())), a[0].abs() + 1.0);
    while below(hi) == 0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi.abs() {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `-(1/r)(r u')' + (n/r - Br/2)² u` on the unit disk, Neumann at `r = 1`.
fn radial_lowest(b: f64, n: i64, cells: usize) -> f64 {
    let h = 1.0 / cells as f64;
    let r = |i: usize| (i as f64 + 0.5) * h;
    let face = |i: usize| (i + 1) as f64 * h;
    let mut diag = vec![0.0; cells];
    let mut off = vec![0.0; cells - 1];
    let mut mass = vec![0.0; cells];
    for i in 0..cells {
        let ri = r(i);
        let v = (n as f64 / ri - 0.5 * b * ri).powi(2);
        let left = if i > 0 { face(i - 1) } else { 0.0 };
        let right = if i + 1 < cells { face(i) } else { 0.0 };
        diag[i] = (left + right) / h + h * ri * v;
        mass[i] = h * ri;
        if i + 1 < cells {
            off[i] = -face(i) / h;
        }
    }
    tridiagonal_lowest(&diag, &off, &mass)
}

#[test]
fn disk_with_holonomy_matches_radial_oracle() {
    let b = 100.0;
    let oracle = (0..=(b as i64)).map(|n| radial_lowest(b, n, 4000)).fold(f64::INFINITY, f64::min);
    let c = find_minimum(&HalfLineDisc::default()).unwrap();
    let curve = BoundaryCurve::new(CurveKind::Disk { radius: 1.0 }).unwrap();
    let strip = StripSettings { floquet: Floquet::Mode(FloquetMode::Holonomy), ..Default::default() };
    let p = StripProblem::new(curve, FieldModel::constant(1.0), c, strip, SolverSettings::default()).unwrap();
    let l = p.solve(b).unwrap().eig.lambda1();
    assert!((l - oracle).abs() < 1e-3 * oracle, "strip {l} vs radial {oracle}");
}
