use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, Context};
use magneto_spectra::agmon::{moment_report, tangential_profile, AgmonTable, Snapshot};
use magneto_spectra::asymptotics::{self, AsymptoticPrediction};
use magneto_spectra::critical_field::hc3_root;
use magneto_spectra::field::{boundary_trace_derivatives, FieldModel};
use magneto_spectra::geometry::BoundaryCurve;
use magneto_spectra::halfline::{find_minimum, identity_checks, DeGennesConstants, HalfLineDisc, IdentityCheck, Scheme};
use magneto_spectra::quasimode::{self, QuasimodeSpec};
use magneto_spectra::sweep_fit::{self, run_sweep, StripProblem, SweepTable};
use magneto_spectra::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::plot;

/// Failure classes with their exit codes.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Solver(anyhow::Error),
    Selftest(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Selftest(_) => 1,
            Failure::Config(_) => 2,
            Failure::Solver(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "configuration error: {e:#}"),
            Failure::Solver(e) => write!(f, "solver failure: {e:#}"),
            Failure::Selftest(m) => write!(f, "selftest failed: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Expression(_) | Error::Geometry(_) | Error::Hypothesis(_) => {
                Failure::Config(e.into())
            }
            _ => Failure::Solver(e.into()),
        }
    }
}

/// Output I/O problems are reported with the solver class.
fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Solver(e.into())
}

pub type Outcome = Result<(), Failure>;

pub struct RunContext {
    pub config: Option<RunConfig>,
    pub out: PathBuf,
    pub command: String,
}

pub fn constants() -> Result<DeGennesConstants, Failure> {
    Ok(find_minimum(&HalfLineDisc::default())?)
}

fn require(cfg: &Option<RunConfig>) -> Result<&RunConfig, Failure> {
    cfg.as_ref().ok_or_else(|| Failure::Config(anyhow!("this subcommand needs --config")))
}

fn write(dir: &Path, name: &str, contents: &str) -> Outcome {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display())).map_err(io)?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display())).map_err(io)?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn json(v: &impl Serialize) -> Result<String, Failure> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(io)
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    command: &'a str,
    created_unix: u64,
    config: Option<&'a RunConfig>,
}

fn manifest(ctx: &RunContext) -> Outcome {
    let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let m = Manifest { version: env!("CARGO_PKG_VERSION"), command: &ctx.command, created_unix, config: ctx.config.as_ref() };
    write(&ctx.out, "manifest.json", &json(&m)?)
}

fn problem(cfg: &RunConfig, c: &DeGennesConstants) -> Result<StripProblem, Failure> {
    let curve = BoundaryCurve::new(cfg.domain.clone())?;
    let field = FieldModel::from_spec(&cfg.field)?;
    Ok(StripProblem::new(curve, field, c.clone(), cfg.strip, cfg.solver_settings())?)
}

/// Leading-order law and the sharpest applicable two-term law.
fn predictions(p: &StripProblem) -> Result<(AsymptoticPrediction, Option<AsymptoticPrediction>), Failure> {
    let c = &p.constants;
    let leading = asymptotics::rough(&p.minimum, c);
    let second = if p.minimum.constant_trace {
        let tables = boundary_trace_derivatives(p.field(), &p.curve)?;
        Some(asymptotics::constant_boundary(&tables, c)?)
    } else if p.minimum.nondegenerate {
        Some(asymptotics::two_term(&p.minimum, c)?)
    } else {
        None
    };
    Ok((leading, second))
}

fn sweep_values(cfg: &RunConfig) -> Result<Vec<f64>, Failure> {
    cfg.sweep.values().map_err(Failure::Config)
}

pub fn degennes(ctx: &RunContext, points: usize, length: f64, p1: bool) -> Outcome {
    let scheme = if p1 { Scheme::LinearElement } else { Scheme::FiniteDifference };
    let disc = HalfLineDisc::new(length, points, scheme)?;
    let c = find_minimum(&disc)?;
    let text = json(&c.summary())?;
    print!("{text}");
    write(&ctx.out, "degennes.json", &text)?;
    manifest(ctx)
}

#[derive(Serialize)]
struct PredictReport {
    minimum: magneto_spectra::field::MinimumData,
    predictions: Vec<AsymptoticPrediction>,
    evaluated: Vec<(f64, Vec<f64>)>,
}

pub fn predict(ctx: &RunContext) -> Outcome {
    let cfg = require(&ctx.config)?;
    let c = constants()?;
    let curve = BoundaryCurve::new(cfg.domain.clone())?;
    let field = FieldModel::from_spec(&cfg.field)?;
    let minimum = magneto_spectra::field::locate_minimum(&field, &curve)?;
    let tables = boundary_trace_derivatives(&field, &curve)?;
    let preds = asymptotics::applicable(&minimum, &tables, &c);
    let evaluated = match cfg.sweep.values() {
        Ok(bs) => bs.iter().map(|&b| (b, preds.iter().map(|p| p.eval(b)).collect())).collect(),
        Err(_) => Vec::new(),
    };
    for p in &preds {
        println!("{:<18} a = {:>12.8}  b = {:>12.8}  {:?}", format!("{:?}", p.model), p.a, p.b, p.status);
    }
    let report = PredictReport { minimum, predictions: preds, evaluated };
    write(&ctx.out, "predict.json", &json(&report)?)?;
    manifest(ctx)
}

pub fn sweep(ctx: &RunContext) -> Outcome {
    let cfg = require(&ctx.config)?;
    let c = constants()?;
    let p = problem(cfg, &c)?;
    let bs = sweep_values(cfg)?;
    let sw = run_sweep(&p, &bs)?;
    let (leading, second) = predictions(&p)?;
    let mut csv = Vec::new();
    sweep_fit::write_csv(&mut csv, &sw.records, Some(&leading), second.as_ref())?;
    write(&ctx.out, "sweep.csv", &String::from_utf8_lossy(&csv))?;
    write(&ctx.out, "sweep.json", &json(&sw)?)?;
    for r in &sw.records {
        println!("B = {:>10}  λ₁ = {:>16.10}  tail = {:.1e}", r.b, r.lambda1(), r.tail_mass);
    }
    for f in &sw.failures {
        eprintln!("B = {} failed: {}", f.b, f.message);
    }
    manifest(ctx)?;
    if sw.records.is_empty() {
        return Err(Failure::Solver(anyhow!("every sweep point failed")));
    }
    Ok(())
}

pub fn fit(ctx: &RunContext, input: Option<&Path>) -> Outcome {
    let cfg = ctx.config.as_ref();
    let c = constants()?;
    let exponents = cfg.map_or_else(|| sweep_fit::DEFAULT_EXPONENTS.to_vec(), |c| c.fit.exponents.clone());
    let (pairs, prediction) = match (input, cfg) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Config)?;
            let table = sweep_fit::read_csv(&text)?;
            let pred = match cfg {
                Some(cfg) => predictions(&problem(cfg, &c)?)?.1,
                None => None,
            };
            (table.pairs(), pred)
        }
        (None, Some(cfg)) => {
            let p = problem(cfg, &c)?;
            let sw = run_sweep(&p, &sweep_values(cfg)?)?;
            (sw.records.iter().map(|r| (r.b, r.lambda1())).collect(), predictions(&p)?.1)
        }
        (None, None) => return Err(Failure::Config(anyhow!("fit needs --config or --input"))),
    };
    let f = sweep_fit::fit_pairs(&pairs, prediction.as_ref(), &exponents)?;
    let text = f.text_report();
    print!("{text}");
    write(&ctx.out, "fit.txt", &text)?;
    write(&ctx.out, "fit.json", &json(&f)?)?;
    manifest(ctx)
}

pub fn quasimode(ctx: &RunContext, order: usize, rho: f64) -> Outcome {
    let cfg = require(&ctx.config)?;
    let c = constants()?;
    let p = problem(cfg, &c)?;
    let (_, second) = predictions(&p)?;
    let bs = sweep_values(cfg)?;
    let m = &p.minimum;
    let rows: Vec<Result<(f64, f64, f64), Failure>> = bs
        .par_iter()
        .map(|&b| {
            let solved = p.solve(b)?;
            let spec = if m.nondegenerate {
                QuasimodeSpec::nondegenerate(b, m, order)?
            } else {
                QuasimodeSpec::degenerate(b, m.s_star, m.b_prime, m.kappa0, m.dbeta_dt, rho)?
            };
            let u = quasimode::build(&spec, &c, &solved.op)?;
            Ok((b, solved.eig.lambda1(), quasimode::rayleigh(&u, &solved.op)?))
        })
        .collect();
    let mut s = String::from("B,lambda1,quotient,pred_two_term,quotient_minus_pred\n");
    for r in rows {
        let (b, l, q) = r?;
        let pred = second.as_ref().map(|p| p.eval(b));
        let _ = writeln!(
            s,
            "{b},{l:.12e},{q:.12e},{},{}",
            pred.map_or(String::new(), |v| format!("{v:.12e}")),
            pred.map_or(String::new(), |v| format!("{:.12e}", q - v))
        );
        println!("B = {b:>10}  λ₁ = {l:>16.10}  quotient = {q:>16.10}");
    }
    write(&ctx.out, "quasimode.csv", &s)?;
    manifest(ctx)
}

pub fn agmon(ctx: &RunContext) -> Outcome {
    let cfg = require(&ctx.config)?;
    let c = constants()?;
    let p = problem(cfg, &c)?;
    let bs = sweep_values(cfg)?;
    let solved: Vec<_> = bs.par_iter().map(|&b| p.solve(b)).collect::<Result<_, _>>()?;
    let snaps: Vec<Snapshot> = solved.iter().map(|s| Snapshot { b: s.b, op: &s.op, x: &s.eig.vectors[0] }).collect();
    let table = if p.minimum.constant_trace {
        None
    } else {
        Some(AgmonTable::from_field(p.field(), &p.curve, &p.minimum, cfg.agmon.table_points)?)
    };
    let report = moment_report(&snaps, &p.minimum, table, cfg.agmon.n_max)?;
    let mut profiles = String::from("B,s,norm\n");
    for snap in &snaps {
        let (s, n) = tangential_profile(snap, p.minimum.s_star);
        for (si, ni) in s.iter().zip(&n) {
            let _ = writeln!(profiles, "{},{si:.12e},{ni:.12e}", snap.b);
        }
    }
    for f in &report.families {
        println!("{:<22} n = {}  spread = {:>8.4}  {}", format!("{:?}", f.kind), f.n, f.spread, if f.pass { "ok" } else { "FAIL" });
    }
    for (b, a) in &report.tangential_slope {
        println!("B = {b:>10}  decay slope = {a:.4}");
    }
    write(&ctx.out, "agmon.json", &json(&report)?)?;
    write(&ctx.out, "agmon_profiles.csv", &profiles)?;
    manifest(ctx)
}

pub fn hc3(ctx: &RunContext, kappa: Option<Vec<f64>>) -> Outcome {
    let cfg = require(&ctx.config)?;
    let c = constants()?;
    let p = problem(cfg, &c)?;
    let kappas = kappa.unwrap_or_else(|| cfg.hc3.kappa.clone());
    let results: Vec<_> = kappas.par_iter().map(|&k| hc3_root(k, &p)).collect::<Result<_, _>>()?;
    let mut s = String::from("kappa,h_formula,h_root,gap,residual\n");
    for r in &results {
        let _ = writeln!(s, "{},{:.12e},{:.12e},{:.6e},{:.3e}", r.kappa, r.h_formula, r.h_root, r.gap, r.residual);
        println!("κ = {:>6}  formula = {:>14.8}  root = {:>14.8}  gap = {:.3e}", r.kappa, r.h_formula, r.h_root, r.gap);
    }
    write(&ctx.out, "hc3.csv", &s)?;
    write(&ctx.out, "hc3.json", &json(&results)?)?;
    manifest(ctx)
}

pub fn plot(ctx: &RunContext, input: &Path) -> Outcome {
    let text = fs::read_to_string(input).with_context(|| format!("reading {}", input.display())).map_err(Failure::Config)?;
    let table: SweepTable = sweep_fit::read_csv(&text)?;
    if table.b.is_empty() {
        return Err(Failure::Config(anyhow!("{} has no rows", input.display())));
    }
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("sweep");
    write(&ctx.out, &format!("{stem}.svg"), &plot::render_svg(&table, stem))?;
    write(&ctx.out, &format!("{stem}.dat"), &plot::gnuplot_data(&table))?;
    Ok(())
}

fn print_checks(title: &str, checks: &[IdentityCheck]) {
    println!("{title}");
    println!("  {:<52} {:>16} {:>16} {:>11} {:>8}  ", "identity", "lhs", "rhs", "residual", "tol");
    for r in checks {
        println!(
            "  {:<52} {:>16.10} {:>16.10} {:>11.2e} {:>8.0e}  {}",
            r.name,
            r.lhs,
            r.rhs,
            r.residual,
            r.tolerance,
            if r.pass { "ok" } else { "FAIL" }
        );
    }
}

pub fn selftest(ctx: &RunContext) -> Outcome {
    let c = constants()?;
    let ids = identity_checks(&c)?;
    let web = asymptotics::reduction_web(&c)?;
    println!("ξ₀ = {:.10}  Θ₀ = {:.10}  C₁ = {:.10}\n", c.xi0, c.theta0, c.c1);
    print_checks("half-line identities", &ids);
    println!();
    print_checks("reduction identities", &web);
    let failed: Vec<&str> = ids.iter().chain(&web).filter(|r| !r.pass).map(|r| r.name.as_str()).collect();
    if ctx.config.is_some() {
        manifest(ctx)?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Selftest(failed.join(", ")))
    }
}
