use magneto_spectra::agmon::{moment_report, Applicability, MomentKind, Snapshot};
use magneto_spectra::asymptotics::{constant_field, rough};
use magneto_spectra::field::FieldModel;
use magneto_spectra::geometry::{BoundaryCurve, CurveKind};
use magneto_spectra::halfline::{find_minimum, HalfLineDisc};
use magneto_spectra::strip::StripSettings;
use magneto_spectra::sweep_fit::{fit, fit_pairs, read_csv, run_sweep, write_csv, Solved, SolverSettings, StripProblem};

fn disk_problem(strip: StripSettings) -> StripProblem {
    let c = find_minimum(&HalfLineDisc::default()).unwrap();
    let curve = BoundaryCurve::new(CurveKind::Disk { radius: 1.0 }).unwrap();
    StripProblem::new(curve, FieldModel::constant(1.0), c, strip, SolverSettings::default()).unwrap()
}

fn coarse() -> StripSettings {
    StripSettings { ns: Some(64), nt: Some(32), ..Default::default() }
}

#[test]
fn csv_round_trip_preserves_the_fit() {
    let p = disk_problem(coarse());
    let b = [20.0, 40.0, 80.0, 160.0, 320.0];
    let sweep = run_sweep(&p, &b).unwrap();
    assert!(sweep.failures.is_empty());
    let pred = constant_field(1.0, &p.constants);
    let lead = rough(&p.minimum, &p.constants);
    let mut buf = Vec::new();
    write_csv(&mut buf, &sweep.records, Some(&lead), Some(&pred)).unwrap();
    let table = read_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
    assert_eq!(table.b, b);
    let direct = fit(&sweep.records, Some(&pred), &[1.0, 0.5]).unwrap();
    let reread = fit_pairs(&table.pairs(), Some(&pred), &[1.0, 0.5]).unwrap();
    for (x, y) in direct.coefficients.iter().zip(&reread.coefficients) {
        assert!((x - y).abs() < 1e-9 * x.abs());
    }
    assert!(table.pred_two_term.iter().all(Option::is_some));
}

#[test]
fn sweeps_are_bitwise_reproducible() {
    let p = disk_problem(coarse());
    let b = [20.0, 40.0, 80.0, 160.0, 320.0];
    let one = run_sweep(&p, &b).unwrap();
    let two = run_sweep(&p, &b).unwrap();
    for (x, y) in one.records.iter().zip(&two.records) {
        assert_eq!(x.lambda1().to_bits(), y.lambda1().to_bits());
    }
}

#[test]
fn constant_field_normal_moments_are_stable() {
    let p = disk_problem(StripSettings::default());
    let solved: Vec<Solved> = [100.0, 200.0, 400.0, 800.0].iter().map(|&b| p.solve(b).unwrap()).collect();
    let snaps: Vec<Snapshot> = solved.iter().map(|s| Snapshot { b: s.b, op: &s.op, x: &s.eig.vectors[0] }).collect();
    let report = moment_report(&snaps, &p.minimum, None, 2).unwrap();
    assert_eq!(report.tangential, Applicability::NotApplicable);
    assert!(report.tangential_slope.is_empty());
    for n in 1..=2 {
        let f = report.family(MomentKind::Normal, n).unwrap();
        assert!(f.spread <= 2.0, "n = {n}: {:?}", f.values);
    }
    // B^{1/2} ∫ t |u|² tends to the half-line first moment ∫ t u₀² = M₁ + |ξ₀|
    let first = report.family(MomentKind::Normal, 1).unwrap();
    let limit = p.constants.xi0.abs();
    assert!((first.values[3] - limit).abs() < 0.1 * limit, "{:?} vs {limit}", first.values);
}
