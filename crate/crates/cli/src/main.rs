mod config;
mod suite;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use g2cones::aks_flow::{self, aks_consistency};
use g2cones::curve_builder::{
    almost_complex_field, almost_complex_residual, build_from_seed, cone_associativity, point_cloud_normal,
    quadric_lift, quadric_lift_from_points, CurveGrid, CurveSeed, Stencil,
};
use g2cones::export::{format_number, Table};
use g2cones::g2_algebra::{eigenspace_basis, eigenspace_terms, eigenvalue, format_terms, sigma, ComplexG2Elem};
use g2cones::octonion::table_text;
use g2cones::primitive_frame::classify;
use g2cones::toda_lattice::{
    closed_form_y, detect_period, integrate, p_matrix, type3_initial_state, RealCoeffs, TodaState,
    Trajectory, TypeIIIConstants,
};
use g2cones::{cmax, tolerances, Mat7};

use config::{
    load_config, parse_json, read_json, resolve_seed, validate_seed, Check, ConfigError, RunConfig, SeedFlags,
    ToleranceOverride, Tolerances,
};
use suite::{run_checks, spectrum_line, Artifacts, Status};

/// The shipped type (iii) example, used by `verify` when no config is given.
const DEFAULT_CONFIG: &str = include_str!("../../../configs/type3.json");

#[derive(Parser)]
#[command(name = "g2cones", version, about = "Almost complex curves in S^6 from the G2 Toda lattice")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the octonion multiplication table.
    Table,
    /// Print a basis of each eigenspace of the order-6 grading with its eigenvalue.
    Eigenspaces,
    /// Integrate the Toda system.
    #[command(subcommand)]
    Toda(TodaCommand),
    /// Integrate the Lax flow on the loop algebra and recover frames.
    #[command(subcommand)]
    Aks(AksCommand),
    /// Assign a curve type to sampled coefficients.
    Classify(ClassifyArgs),
    /// Build and check sampled surfaces f(s, t) = exp(sA) k(t) e1.
    #[command(subcommand)]
    Curve(CurveCommand),
    /// Run the verification suite on one seed.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum TodaCommand {
    /// Integrate from a given state and write the trajectory.
    Solve(SolveArgs),
    /// Constants and elliptic solution of a type (iii) orbit.
    Type3(Type3Args),
}

#[derive(Args)]
struct SolveArgs {
    /// JSON run config; its `seed` supplies any state field not given as a flag.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    seed: SeedFlags,
    /// Output file, `.json` for JSON and CSV otherwise [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Type3Args {
    #[arg(long)]
    c1: f64,
    #[arg(long)]
    c2: f64,
    /// Also integrate numerically over this interval and compare.
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
}

#[derive(Subcommand)]
enum AksCommand {
    /// Integrate from `h0 = (a1, b1)` and `h_-1 = (c1, d1, e1)` and write k(t).
    Run(AksArgs),
}

#[derive(Args)]
struct AksArgs {
    /// JSON run config; its `seed` supplies the coefficients when flags are absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// a1,b1
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    h0: Option<Vec<f64>>,
    /// c1,d1,e1
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    hm1: Option<Vec<f64>>,
    /// Integration interval [default: 0.5]
    #[arg(long)]
    t_end: Option<f64>,
    /// Integrator step [default: 0.001]
    #[arg(long)]
    step: Option<f64>,
    /// Output file with t and the 49 entries of k(t), row-major [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Trajectory CSV (`a1, b1, v1, v2, v3`) or coefficient CSV (`a1, b1, c1, d1, e1`).
    #[arg(long)]
    input: PathBuf,
    /// Zero threshold relative to the largest coefficient.
    #[arg(long, default_value_t = tolerances::CLASSIFY_RELATIVE)]
    tol: f64,
}

#[derive(Subcommand)]
enum CurveCommand {
    /// Build a grid of points from a JSON seed.
    Build(BuildArgs),
    /// Check a grid of points read from a file.
    Verify(GridVerifyArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum GridCheck {
    Ac,
    Cone,
    Sl,
    Quadric,
}

#[derive(Args)]
struct BuildArgs {
    /// JSON seed: a1, b1, v1, v2, v3, optional lambda_spec or a_coords, t_end, step, s_samples.
    #[arg(long)]
    seed: Option<PathBuf>,
    /// JSON run config; `seed` and `outputs.grid` are read from it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: SeedFlags,
    /// Number of s samples [default: 100]
    #[arg(long)]
    s_samples: Option<usize>,
    /// Number of t samples [default: 100]
    #[arg(long)]
    t_samples: Option<usize>,
    /// Spacing in s [default: the t spacing]
    #[arg(long)]
    s_step: Option<f64>,
    /// Per-point residual columns to append.
    #[arg(long, value_delimiter = ',')]
    residuals: Vec<GridCheck>,
    /// Output grid file [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GridVerifyArgs {
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ac,cone,sl,quadric")]
    checks: Vec<GridCheck>,
    /// JSON run config for tolerances.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a tolerance, e.g. `--tol ac=1e-5`.
    #[arg(long)]
    tol: Vec<ToleranceOverride>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run every check.
    #[arg(long, conflicts_with = "checks")]
    all: bool,
    /// Checks to run [default: the config's list, else all].
    #[arg(long, value_delimiter = ',')]
    checks: Vec<Check>,
    /// JSON run config [default: the shipped type (iii) example].
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    flags: SeedFlags,
    /// Override a tolerance, e.g. `--tol ac=1e-5`.
    #[arg(long)]
    tol: Vec<ToleranceOverride>,
}

/// Check failures exit with 1, configuration errors with 2.
enum Outcome {
    Ok,
    ChecksFailed,
}

fn tolerance_help() -> String {
    let t = Tolerances::default();
    let rows = [
        ("algebra", t.algebra, "table, derivation and grading identities"),
        ("sum_v", t.sum_v, "drift of v1 + v2 + v3"),
        ("spectral", t.spectral, "drift of the rotation angles of P"),
        ("closed_form", t.closed_form, "max |y - elliptic formula| on type (iii)"),
        ("classify", t.classify, "relative zero threshold for curve types"),
        ("aks", t.aks, "max ||k^T A k - P||_F"),
        ("frames", t.frames, "frames in G2 along the grid"),
        ("ac", t.ac, "almost complex residual"),
        ("cone", t.cone, "associator residual of the cone"),
        ("sl_alpha", t.sl_alpha, "|alpha| = 1 and reality of beta"),
        ("sl_normal", t.sl_normal, "constancy of the special Lagrangian normal"),
        ("quadric", t.quadric, "isotropy of the lift"),
    ];
    let mut out = String::from("Tolerances (override with --tol name=value or the config's `tolerances`):\n");
    for (name, value, what) in rows {
        out.push_str(&format!("  {name:<12} {value:<8.0e} {what}\n"));
    }
    out
}

fn write_or_print(table: &Table, path: Option<&Path>) -> anyhow::Result<()> {
    match path {
        Some(p) => table.write(p).map_err(|e| anyhow::anyhow!("{e}")),
        None => {
            print!("{}", table.to_csv());
            Ok(())
        }
    }
}

fn cmd_table() {
    print!("{}", table_text());
}

fn cmd_eigenspaces() {
    for j in 0..6 {
        let basis = eigenspace_basis(j);
        let lambda = eigenvalue(j);
        let defect = basis
            .iter()
            .map(|v| {
                let m = *ComplexG2Elem::from_coords(v).matrix();
                cmax(&(sigma(&m) - m * lambda))
            })
            .fold(0.0, f64::max);
        println!(
            "h_{j}: dim {}, eigenvalue exp({j} pi i / 3) = {:.6} {:+.6}i, max defect {defect:.1e}",
            basis.len(),
            lambda.re,
            lambda.im
        );
        for terms in eigenspace_terms(j) {
            println!("    {}", format_terms(&terms));
        }
    }
}

fn cmd_toda_solve(args: &SolveArgs) -> anyhow::Result<Outcome> {
    let cfg = load_config(args.config.as_deref())?;
    let seed = resolve_seed(cfg.seed.as_ref(), &args.seed)?;
    let tr = integrate(&seed.state(), seed.t_end, seed.step)?;
    let out = args.out.as_deref().or(cfg.outputs.trajectory.as_deref());
    write_or_print(&tr.to_table(), out)?;
    let last = tr.states.last().expect("at least one sample");
    eprintln!(
        "{} steps of {}, end state a1={} b1={} v1={} v2={} v3={}",
        tr.len() - 1,
        format_number(tr.step),
        format_number(last.a1),
        format_number(last.b1),
        format_number(last.v1),
        format_number(last.v2),
        format_number(last.v3)
    );
    Ok(Outcome::Ok)
}

fn cmd_toda_type3(args: &Type3Args) -> anyhow::Result<Outcome> {
    let s0 = type3_initial_state(args.c1, args.c2)?;
    let g3 = (2.0 * s0.v1).exp();
    let c = TypeIIIConstants::from_energy(args.c1, args.c2, g3, false)?;
    println!("C1 = {}", format_number(c.c1));
    println!("C2 = {}", format_number(c.c2));
    for (k, g) in c.gamma.iter().enumerate() {
        println!("Gamma{} = {}", k + 1, format_number(*g));
    }
    println!("B1 = {}", format_number(c.b1));
    println!("B2 = {}", format_number(c.b2 + 0.0));
    println!("B3 = {}", format_number(c.b3));
    println!("period of sn(B1 t + B2, B3) = {}", format_number(c.sn_factor_period()?));
    println!("period of y = {}", format_number(c.y_period()?));
    println!(
        "initial state: a1 = {}, b1 = {}, v1 = {}, v2 = {}, v3 = {}",
        format_number(s0.a1),
        format_number(s0.b1),
        format_number(s0.v1),
        format_number(s0.v2),
        format_number(s0.v3)
    );
    if let Some(t_end) = args.t_end {
        let mut seed = CurveSeed::from_state(&s0);
        seed.t_end = t_end;
        seed.step = args.step;
        validate_seed(&seed, "")?;
        let tr = integrate(&s0, t_end, args.step)?;
        let err = tr
            .times
            .iter()
            .zip(&tr.states)
            .map(|(t, s)| ((2.0 * s.v1).exp() - closed_form_y(*t, &c)).abs())
            .fold(0.0, f64::max);
        println!("max |y_numeric - y_closed_form| on [0, {t_end}] = {err:.3e}");
        match detect_period(&tr) {
            Some(p) => println!("numeric period = {} ({} crossings)", format_number(p.period), p.crossings),
            None => println!("numeric period: fewer than two crossings, increase --t-end"),
        }
    }
    Ok(Outcome::Ok)
}

fn cmd_aks_run(args: &AksArgs) -> anyhow::Result<Outcome> {
    let cfg = load_config(args.config.as_deref())?;
    let flags = SeedFlags { t_end: args.t_end, step: args.step, ..Default::default() };
    let seed = resolve_seed(cfg.seed.as_ref(), &flags)?;
    let mut r = seed.state().coeffs();
    for (name, values, n) in [("h0", &args.h0, 2), ("hm1", &args.hm1, 3)] {
        if let Some(v) = values.as_ref().filter(|v| v.len() != n) {
            return Err(ConfigError::new(name, format!("expected {n} comma separated values, got {}", v.len())).into());
        }
    }
    if let Some(h0) = &args.h0 {
        (r.a1, r.b1) = (h0[0], h0[1]);
    }
    if let Some(h) = &args.hm1 {
        (r.c1, r.d1, r.e1) = (h[0], h[1], h[2]);
    }
    let run = aks_flow::run(&r, seed.t_end, seed.step)?;
    let out = args.out.as_deref().or(cfg.outputs.frames.as_deref());
    write_or_print(&run.frames.to_table(), out)?;
    report_consistency(&r, &run, seed.t_end, seed.step);
    Ok(Outcome::Ok)
}

fn report_consistency(r: &RealCoeffs, run: &aks_flow::AksRun, t_end: f64, step: f64) {
    let Ok(s0) = r.to_toda_state() else {
        eprintln!("c1, d1, e1 not all positive; skipping the comparison with the Toda trajectory");
        return;
    };
    match integrate(&s0, t_end, step) {
        Ok(tr) => {
            let ps: Vec<Mat7> = tr.states.iter().map(p_matrix).collect();
            match aks_consistency(&run.frames, &ps) {
                Ok(v) => eprintln!("max ||k^T A k - P||_F = {v:.3e}"),
                Err(e) => eprintln!("consistency: {e}"),
            }
        }
        Err(e) => eprintln!("Toda comparison: {e}"),
    }
}

fn read_coefficients(table: &Table) -> anyhow::Result<Vec<RealCoeffs>> {
    if let Some(tr) = Trajectory::from_table(table) {
        return Ok(tr.states.iter().map(TodaState::coeffs).collect());
    }
    let cols: Option<Vec<Vec<f64>>> = ["a1", "b1", "c1", "d1", "e1"].iter().map(|c| table.column(c)).collect();
    let Some(cols) = cols else {
        bail!("input needs columns a1, b1, v1, v2, v3 or a1, b1, c1, d1, e1");
    };
    Ok((0..cols[0].len())
        .map(|i| RealCoeffs { a1: cols[0][i], b1: cols[1][i], c1: cols[2][i], d1: cols[3][i], e1: cols[4][i] })
        .collect())
}

fn cmd_classify(args: &ClassifyArgs) -> anyhow::Result<Outcome> {
    if !(args.tol > 0.0) {
        return Err(ConfigError::new("tol", format!("must be positive, got {}", args.tol)).into());
    }
    let table = Table::read(&args.input).map_err(|e| anyhow::anyhow!("{e}"))?;
    let coeffs: Vec<_> = read_coefficients(&table)?.iter().map(RealCoeffs::to_primitive).collect();
    let t = classify(&coeffs, args.tol)?;
    println!("type {t} ({} samples)", coeffs.len());
    Ok(Outcome::Ok)
}

fn residual_column(g: &CurveGrid, check: GridCheck) -> anyhow::Result<(&'static str, Vec<f64>)> {
    Ok(match check {
        GridCheck::Ac => ("ac_residual", almost_complex_field(g, Stencil::Second)?),
        GridCheck::Cone => ("cone_residual", cone_associativity(g)?.field),
        GridCheck::Sl => {
            let (n, _) = point_cloud_normal(g);
            ("sl_residual", g.points.iter().map(|p| p.dot(&n).abs()).collect())
        }
        GridCheck::Quadric => {
            ("quadric_residual", quadric_lift(g)?.lift.iter().map(|l| l.bilinear(l).norm()).collect())
        }
    })
}

fn cmd_curve_build(args: &BuildArgs) -> anyhow::Result<Outcome> {
    let cfg = load_config(args.config.as_deref())?;
    let file_seed: Option<CurveSeed> = match &args.seed {
        Some(p) => Some(read_json(p)?),
        None => cfg.seed.clone(),
    };
    if file_seed.is_none() && args.flags == SeedFlags::default() {
        bail!("no seed given; pass --seed, --config or the state flags");
    }
    let mut seed = resolve_seed(file_seed.as_ref(), &args.flags)?;
    if let Some(n) = args.s_samples {
        seed.s_samples = n;
    }
    if let Some(n) = args.t_samples {
        seed.t_samples = n;
    }
    if args.s_step.is_some() {
        seed.s_step = args.s_step;
    }
    validate_seed(&seed, "seed")?;
    let curve = build_from_seed(&seed)?;
    let extra = args.residuals.iter().map(|c| residual_column(&curve.grid, *c)).collect::<anyhow::Result<Vec<_>>>()?;
    let out = args.out.as_deref().or(cfg.outputs.grid.as_deref());
    write_or_print(&curve.grid.to_table(&extra), out)?;
    eprintln!("{} x {} grid; {}", curve.grid.ns(), curve.grid.nt(), spectrum_line(&curve));
    Ok(Outcome::Ok)
}

fn cmd_curve_verify(args: &GridVerifyArgs) -> anyhow::Result<Outcome> {
    let cfg = load_config(args.config.as_deref())?;
    let mut tol = cfg.tolerances;
    tol.apply(&args.tol)?;
    tol.validate()?;
    let table = Table::read(&args.grid).map_err(|e| anyhow::anyhow!("{e}"))?;
    let g = CurveGrid::from_table(&table)?;
    let mut failed = false;
    for check in &args.checks {
        let (name, value, limit, extra) = match check {
            GridCheck::Ac => ("ac", almost_complex_residual(&g)?, tol.ac, String::new()),
            GridCheck::Cone => {
                let r = cone_associativity(&g)?;
                ("cone", r.residual, tol.cone, format!(", min calibration {:.6}", r.min_calibration))
            }
            GridCheck::Sl => {
                let (n, worst) = point_cloud_normal(&g);
                let n: Vec<String> = n.0.iter().map(|x| format!("{x:.6}")).collect();
                ("sl", worst, tol.sl_normal, format!(", normal ({})", n.join(", ")))
            }
            GridCheck::Quadric => {
                let r = quadric_lift_from_points(&g)?;
                let note = format!(", holomorphicity {:.3e}, skipped {}", r.max_holomorphicity, r.skipped);
                ("quadric", r.isotropy, tol.quadric, note)
            }
        };
        let pass = value <= limit;
        failed |= !pass;
        println!("[{}] {name:<8} {value:.3e} (tol {limit:.1e}){extra}", if pass { "PASS" } else { "FAIL" });
    }
    Ok(if failed { Outcome::ChecksFailed } else { Outcome::Ok })
}

fn cmd_verify(args: &VerifyArgs) -> anyhow::Result<Outcome> {
    let cfg: RunConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => parse_json(DEFAULT_CONFIG).context("built-in config")?,
    };
    let seed = resolve_seed(cfg.seed.as_ref(), &args.flags)?;
    let mut tol = cfg.tolerances.clone();
    tol.apply(&args.tol)?;
    tol.validate()?;
    let mut checks = if args.all || (args.checks.is_empty() && cfg.checks.is_none()) {
        Check::ALL.to_vec()
    } else if !args.checks.is_empty() {
        args.checks.clone()
    } else {
        cfg.checks.clone().unwrap_or_default()
    };
    checks.sort();
    checks.dedup();
    let art = Artifacts::compute(&seed, &checks);
    println!(
        "seed a1={} b1={} v1={} v2={} v3={}, t_end {}, step {}",
        seed.a1, seed.b1, seed.v1, seed.v2, seed.v3, seed.t_end, seed.step
    );
    if let Ok(curve) = &art.curve {
        println!("{} x {} grid; {}", curve.grid.ns(), curve.grid.nt(), spectrum_line(curve));
    }
    let results = run_checks(&checks, &tol, &art);
    for r in &results {
        println!("{}", r.line());
    }
    if let (Some(p), Ok(tr)) = (&cfg.outputs.trajectory, &art.trajectory) {
        tr.to_table().write(p).map_err(|e| anyhow::anyhow!("{e}"))?;
    }
    if let Ok(curve) = &art.curve {
        if let Some(p) = &cfg.outputs.frames {
            curve.run.frames.to_table().write(p).map_err(|e| anyhow::anyhow!("{e}"))?;
        }
        if let Some(p) = &cfg.outputs.grid {
            curve.grid.to_table(&[]).write(p).map_err(|e| anyhow::anyhow!("{e}"))?;
        }
    }
    let failed = results.iter().filter(|r| r.status == Status::Fail).count();
    println!("{} checks, {failed} failed", results.len());
    Ok(if failed > 0 { Outcome::ChecksFailed } else { Outcome::Ok })
}

fn run(cli: Cli) -> anyhow::Result<Outcome> {
    match &cli.command {
        Command::Table => cmd_table(),
        Command::Eigenspaces => cmd_eigenspaces(),
        Command::Toda(TodaCommand::Solve(a)) => return cmd_toda_solve(a),
        Command::Toda(TodaCommand::Type3(a)) => return cmd_toda_type3(a),
        Command::Aks(AksCommand::Run(a)) => return cmd_aks_run(a),
        Command::Classify(a) => return cmd_classify(a),
        Command::Curve(CurveCommand::Build(a)) => return cmd_curve_build(a),
        Command::Curve(CurveCommand::Verify(a)) => return cmd_curve_verify(a),
        Command::Verify(a) => return cmd_verify(a),
    }
    Ok(Outcome::Ok)
}

fn main() -> ExitCode {
    let help = tolerance_help();
    let command = Cli::command()
        .mut_subcommand("verify", |c| c.after_help(help.clone()))
        .mut_subcommand("curve", |c| c.mut_subcommand("verify", |v| v.after_help(help.clone())));
    let cli = match Cli::from_arg_matches(&command.get_matches()) {
        Ok(cli) => cli,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<ConfigError>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
