use std::f64::consts::PI;

use magneto_spectra::agmon::{agmon_distance, wrap_offset, AgmonTable};
use magneto_spectra::eigensolve::{dense_pencil, solve_pencil, EigOptions};
use magneto_spectra::halfline::IdentityCheck;
use magneto_spectra::sparse::CsrMatrix;
use magneto_spectra::strip::holonomy_phase;
use magneto_spectra::sweep_fit::{fit_pairs, loglog_slope};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn trace(a: f64, p: f64) -> impl Fn(f64) -> f64 {
    move |s: f64| 1.0 + a * (0.5 * s).sin().powi(2) + p * (0.5 * s).sin().powi(4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn agmon_distance_is_even_and_monotone(a in 0.1f64..3.0, p in 0.0f64..2.0, s in 0.05f64..3.0) {
        let f = trace(a, p);
        let d = agmon_distance(&f, 1.0, s).unwrap();
        let dm = agmon_distance(&f, 1.0, -s).unwrap();
        prop_assert!((d - dm).abs() <= 1e-10 * d.max(1e-12));
        let further = agmon_distance(&f, 1.0, s + 0.1).unwrap();
        prop_assert!(further > d);
        // |d'| = √(β - b') is bounded by its value at the far end
        prop_assert!(d <= s * (f(s) - 1.0).sqrt() + 1e-12);
    }

    #[test]
    fn agmon_table_matches_direct_distance(a in 0.2f64..2.0, i in 0usize..64) {
        let f = trace(a, 0.0);
        let table = AgmonTable::new(&f, 1.0, 2.0 * PI, 64).unwrap();
        let direct = agmon_distance(&f, 1.0, table.s[i]).unwrap();
        prop_assert!((table.d[i] - direct).abs() <= 1e-9);
    }

    #[test]
    fn wrapped_offsets(s in -50.0f64..50.0, period in 0.5f64..10.0) {
        let w = wrap_offset(s, period);
        prop_assert!(w > -0.5 * period - 1e-12 && w <= 0.5 * period + 1e-12);
        let k = (s - w) / period;
        prop_assert!((k - k.round()).abs() < 1e-9);
    }

    #[test]
    fn holonomy_phase_in_range(b in 1.0f64..5000.0, flux in 0.1f64..10.0, m in -80.0f64..0.0) {
        let t = holonomy_phase(b, flux, m, 2.0 * PI);
        prop_assert!((0.0..2.0 * PI).contains(&t));
    }

    #[test]
    fn fit_ignores_point_order(a in 0.3f64..1.0, b in -2.0f64..2.0, c in -1.0f64..1.0, rot in 1usize..5) {
        let mut pts: Vec<(f64, f64)> = [50.0, 100.0, 200.0, 400.0, 800.0]
            .iter()
            .map(|&x: &f64| (x, a * x + b * x.sqrt() + c * x.cbrt()))
            .collect();
        let first = fit_pairs(&pts, None, &[1.0, 0.5, 1.0 / 3.0]).unwrap();
        pts.rotate_left(rot);
        pts.swap(0, 3);
        let second = fit_pairs(&pts, None, &[1.0, 0.5, 1.0 / 3.0]).unwrap();
        prop_assert_eq!(&first.coefficients, &second.coefficients);
        prop_assert!((first.coefficients[0] - a).abs() < 1e-8);
    }

    #[test]
    fn loglog_slope_of_monomial(c in 0.1f64..10.0, p in -1.0f64..2.0) {
        let x: Vec<f64> = (0..6).map(|k| 10.0 * 2f64.powi(k)).collect();
        let y: Vec<f64> = x.iter().map(|v| c * v.powf(p)).collect();
        prop_assert!((loglog_slope(&x, &y).unwrap() - p).abs() < 1e-10);
    }

    #[test]
    fn identity_check_passes_within_tolerance(lhs in -1.0f64..1.0, delta in -1e-3f64..1e-3) {
        let check = IdentityCheck::new("x", lhs + delta, lhs, 5e-4);
        prop_assert_eq!(check.pass, delta.abs() <= 5e-4);
    }

    #[test]
    fn triplets_round_trip(entries in prop::collection::vec((0usize..12, 0usize..12, -5.0f64..5.0, -5.0f64..5.0), 1..60)) {
        let t = entries.iter().map(|&(i, j, re, im)| (i, j, Complex64::new(re, im))).collect();
        let a = CsrMatrix::from_triplets(12, 12, t);
        let mut buf = Vec::new();
        a.write_triplets(&mut buf).unwrap();
        let back = CsrMatrix::read_triplets(std::str::from_utf8(&buf).unwrap()).unwrap();
        prop_assert_eq!(back.to_dense(), a.to_dense());
    }

    #[test]
    fn hermitian_pencil_matches_dense(seed in 0u64..1000, n in 20usize..120) {
        let (k, m) = pencil(n, seed);
        prop_assert_eq!(k.hermitian_defect(), 0.0);
        let sparse = solve_pencil(&k, &m, &EigOptions::new(3, 1e-12, 0.0).with_seed(seed)).unwrap();
        let dense = dense_pencil(&k, &m);
        for (x, y) in sparse.values.iter().zip(&dense) {
            prop_assert!((x - y).abs() <= 1e-9 * y.abs(), "{} vs {}", x, y);
        }
    }
}

/// Banded Hermitian positive definite `K` and tridiagonal `M`.
fn pencil(n: usize, seed: u64) -> (CsrMatrix, CsrMatrix) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut next = move || rng.random::<f64>() - 0.5;
    let mut k = Vec::new();
    let mut m = Vec::new();
    for i in 0..n {
        k.push((i, i, Complex64::new(4.0 + next(), 0.0)));
        m.push((i, i, Complex64::new(2.0, 0.0)));
        for off in 1..=2 {
            if i + off < n {
                let v = Complex64::new(next(), next());
                k.push((i, i + off, v));
                k.push((i + off, i, v.conj()));
            }
        }
        if i + 1 < n {
            let v = Complex64::new(0.4 * next(), 0.4 * next());
            m.push((i, i + 1, v));
            m.push((i + 1, i, v.conj()));
        }
    }
    (CsrMatrix::from_triplets(n, n, k), CsrMatrix::from_triplets(n, n, m))
}
