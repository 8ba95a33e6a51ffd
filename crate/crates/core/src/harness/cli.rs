use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::config::RunConfig;
use super::export::{write_feasibility_csv, Format};
use super::recipes::{run_recipe, Recipe, RecipeOpts, RecipeReport};
use super::run::{run_batch, write_summary, RunResult, Sink};
use crate::analysis::{
    feasibility_point, feasibility_scan, interaction_dominance, kl_ratio_scan, universal_params,
    weak_mvi_rho, Side,
};
use crate::error::{Error, Result};
use crate::measures::StationarityReport;
use crate::oracle::GridSpec;
use crate::problems::{builtin, Builtin};

#[derive(Debug, Parser)]
#[command(name = "dsgda", version, about = "Doubly smoothed GDA experiments")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long, global = true, default_value = "results")]
    out: PathBuf,
    /// Override the stopping tolerance of every run.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Override the iteration budget of every run.
    #[arg(long, global = true)]
    max_iters: Option<u64>,
    /// Trajectory file format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Worker threads for batches.
    #[arg(long, global = true, default_value_t = 1)]
    parallel: usize,
    /// Seed of `random(n)` initializations.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a TOML config file.
    Run { config: PathBuf },
    /// Run a built-in recipe.
    Recipe { name: String },
    /// Scan the (t1, t2) feasibility region of the descent inequality.
    ScanParams {
        #[arg(long, default_value_t = 1.0)]
        l: f64,
        #[arg(long, default_value_t = 2e-4)]
        beta: f64,
        #[arg(long, default_value_t = 2e-4)]
        mu: f64,
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
        #[arg(long, default_value_t = 101)]
        steps: usize,
    },
    /// Weak-MVI, interaction-dominance and KL checks for a problem.
    CheckRegularity {
        problem: String,
        #[arg(long, default_value_t = 401)]
        resolution: usize,
    },
    /// Stationarity residuals at a point `x,y`.
    Measure {
        problem: String,
        point: String,
        /// Proximal weight of the OS residual (default `2 L_x`).
        #[arg(long)]
        r1: Option<f64>,
    },
}

/// Parse `args` (program name first), run, and return the exit status:
/// 0 on success, 1 on usage or config errors, 2 on numeric failures.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    if e.is_numeric() {
        2
    } else {
        1
    }
}

/// Worst status over member errors, which were already printed.
fn member_status<'a>(errors: impl IntoIterator<Item = &'a Error>) -> i32 {
    errors.into_iter().map(exit_code).min().unwrap_or(0)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let c = &cli.common;
    let sink = Sink::new(&c.out, c.format);
    match &cli.command {
        Command::Run { config } => {
            let cfg = RunConfig::load(config)?.with_overrides(c.tol, c.max_iters, c.seed);
            let members = cfg.expand()?;
            let results = run_batch(&members, c.parallel, Some(&sink));
            write_summary(
                results.iter().map(Result::as_ref),
                &sink.path_for(&format!("{}-summary", cfg.outputs), "json")?,
            )?;
            for r in &results {
                print_run(r.as_ref());
            }
            Ok(member_status(
                results.iter().filter_map(|r| r.as_ref().err()),
            ))
        }
        Command::Recipe { name } => {
            let recipe = Recipe::builtin(name)?;
            let opts = RecipeOpts {
                sink: Some(sink.clone()),
                parallelism: c.parallel,
                tol: c.tol,
                max_iters: c.max_iters,
                seed: c.seed,
            };
            let report = run_recipe(&recipe, &opts)?;
            println!("{name}: {}", recipe.description);
            print_report(&report);
            if !report.runs.is_empty() {
                let results = report.runs.iter().map(|(_, r)| r.as_ref());
                write_summary(results, &sink.path_for(&format!("{name}-summary"), "json")?)?;
            }
            Ok(member_status(report.errors()))
        }
        Command::ScanParams {
            l,
            beta,
            mu,
            t_max,
            steps,
        } => {
            let scan = feasibility_scan(*l, *beta, *mu, (0.0, *t_max), (0.0, *t_max), *steps);
            let path = sink.path_for("feasibility", "csv")?;
            write_feasibility_csv(&scan, &path)?;
            println!(
                "feasible {}/{} -> {}",
                scan.count_feasible(),
                steps * steps,
                path.display()
            );
            if let Ok(u) = universal_params(*l) {
                let (t1, t2) = (1.0 / (u.c * u.r1), u.r1 / l);
                let ok = feasibility_point(*l, *beta, *mu, t1, t2).feasible;
                println!("universal parameters at t1 = {t1:.4}, t2 = {t2}: feasible = {ok}");
            }
            Ok(0)
        }
        Command::CheckRegularity {
            problem,
            resolution,
        } => check_regularity(problem, *resolution).map(|_| 0),
        Command::Measure { problem, point, r1 } => measure(problem, point, *r1).map(|_| 0),
    }
}

fn print_run(r: std::result::Result<&RunResult, &Error>) {
    match r {
        Ok(r) => println!(
            "{:<28} {:<12} {:<14} iters {:>8}  gs ({:.2e}, {:.2e})  final ({:.6}, {:.6})",
            r.outputs,
            r.algorithm,
            r.outcome.kind.to_string(),
            r.iterations,
            r.final_residual.0,
            r.final_residual.1,
            r.final_state.x[0],
            r.final_state.y[0],
        ),
        Err(e) => println!("failed: {e}"),
    }
}

fn print_report(rep: &RecipeReport) {
    for (_, r) in &rep.runs {
        print_run(r.as_ref());
    }
    if let Some(f) = &rep.feasibility {
        println!(
            "feasible {}/{}; universal point (t1, t2) = ({:.4}, {}) feasible = {}",
            f.feasible, f.total, f.universal.0, f.universal.1, f.universal_feasible
        );
    }
    for r in &rep.rho {
        let w = r
            .witness_rho
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "undefined".into());
        println!(
            "{:<22} rho{:?} = {w}; lattice min {:.6} at ({:.4}, {:.4})",
            r.problem, r.witness, r.min_rho, r.min_at.0, r.min_at.1
        );
    }
    for a in &rep.audits {
        match a {
            Ok(a) => println!(
                "{:<22} {} steps, min margin {:.3e}, max Phi increase {:.3e} (tolerance {:.1e})",
                a.problem, a.steps, a.min_margin, a.max_phi_increase, a.tolerance
            ),
            Err(e) => println!("audit failed: {e}"),
        }
    }
}

fn check_regularity(name: &str, resolution: usize) -> Result<()> {
    let b = Builtin::parse(name)?;
    let prob = b.problem();
    let u_star = b.stationary_point();
    let grid = GridSpec::new(resolution, 2)?;
    println!(
        "{}: L_x = {}, L_y = {}",
        prob.name(),
        prob.lip_x(),
        prob.lip_y()
    );
    println!("declared: {:?}", prob.regularity());
    let scan = weak_mvi_rho(&prob, u_star, &grid)?;
    println!(
        "weak MVI at u* = ({}, {}): min rho {:.6} at ({:.4}, {:.4}); threshold {:.6}; violated = {}",
        u_star.0,
        u_star.1,
        scan.min_rho,
        scan.argmin.0,
        scan.argmin.1,
        scan.threshold,
        scan.violates()
    );
    let (dx, dy) = interaction_dominance(&prob, u_star.0, u_star.1, 1.0)?;
    println!("interaction dominance at u* (eta = 1): primal {dx:.6}, dual {dy:.6}");
    if prob.has_value() {
        for side in [Side::Dual, Side::Primal] {
            let kl = kl_ratio_scan(&prob, side, 0.5, &grid)?;
            println!(
                "KL (theta = 1/2, {side:?}): tau >= {:.6}, witness ({:.4}, {:.4})",
                kl.tau, kl.witness.0, kl.witness.1
            );
        }
    }
    Ok(())
}

fn measure(name: &str, point: &str, r1: Option<f64>) -> Result<()> {
    let prob = builtin(name)?;
    let bad = || Error::config("point", format!("expected `x,y`, got `{point}`"));
    let coords: Vec<f64> = point
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let [x, y] = coords[..] else {
        return Err(bad());
    };
    let r1 = r1.unwrap_or(2.0 * prob.lip_x());
    let grid = GridSpec::default();
    let os = prob.has_value().then_some((r1, &grid));
    let rep = StationarityReport::evaluate(&prob, &[x], &[y], os)?;
    println!("gs_x {:.6e}", rep.gs_x);
    println!("gs_y {:.6e}", rep.gs_y);
    match rep.os {
        Some(v) => println!("os   {v:.6e} (r1 = {r1})"),
        None => println!("os   unavailable (gradient-only problem)"),
    }
    Ok(())
}
