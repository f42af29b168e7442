//! contrast-homog: command-line front end to the homogenization lab.
//!
//! Exit status: 0 on success, 1 when an asserted check fails, 2 on bad
//! arguments or configuration, 3 when a computation itself fails.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use homog_core::cell::{CellSolver, DeltaTag};
use homog_core::experiments::acceptance::{run_criteria, write_csv, Outcome};
use homog_core::experiments::{run_grid, Check, RunConfig};
use homog_core::fem::{Backend, CoefficientField, SolverOptions};
use homog_core::flux::build_flux_with;
use homog_core::geometry::{build_perforated_mesh, InclusionShape, Mesh};
use homog_core::lab::{gradient_sup_probe, ProblemSpec};
use homog_core::layer::WeakLayerOperator;
use homog_core::LabError;

#[derive(Parser)]
#[command(name = "contrast-homog", version, about = "High-contrast periodic homogenization lab")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write the mesh used by the command to this path.
    #[arg(long, global = true)]
    mesh_dump: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    solver: Option<SolverArg>,
    /// Relative residual target for the linear solves.
    #[arg(long, global = true)]
    tol: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SolverArg {
    Direct,
    Cg,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoefArg {
    Identity,
    Oscillating,
}

impl CoefArg {
    fn build(self) -> CoefficientField {
        match self {
            CoefArg::Identity => CoefficientField::identity(1),
            CoefArg::Oscillating => CoefficientField::oscillating(),
        }
    }
}

#[derive(Args)]
struct CellArgs {
    /// `kind:r`, kind one of square, disk.
    #[arg(long, default_value = "square:0.25")]
    shape: String,
    #[arg(long, default_value_t = 64)]
    n: usize,
    #[arg(long, value_enum, default_value = "identity")]
    coef: CoefArg,
}

#[derive(Subcommand)]
enum Command {
    /// Cell correctors and the effective tensor at one contrast.
    Cell {
        /// A positive number, `zero` or `inf`.
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Flux defect and its skew potential.
    Flux {
        #[arg(long)]
        delta: String,
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Eigenvalues of the discrete Neumann-Poincare operator, as CSV.
    NpSpectrum {
        #[command(flatten)]
        cell: CellArgs,
    },
    /// Corrected error against ε for each δ of the config.
    RateEps,
    /// Effective tensor against δ and its convergence to both limits.
    RateDelta,
    /// Largest elementwise |∇u| across the δ grid.
    LipschitzProbe,
    /// P/Q/R and interior errors for each grid run.
    Diagnostics,
    /// Full config: grid, grid assertions and acceptance criteria.
    Run,
}

enum Failure {
    Usage(String),
    Compute(String),
}

impl From<LabError> for Failure {
    fn from(e: LabError) -> Self {
        match e {
            LabError::Config { .. } | LabError::InvalidInput(_) => Failure::Usage(e.to_string()),
            other => Failure::Compute(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Compute(e.to_string())
    }
}

type Res<T> = std::result::Result<T, Failure>;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CH_LOG", "error")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(j) = cli.global.jobs {
        if j == 0 {
            eprintln!("error: --jobs must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    match dispatch(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(3)
        }
    }
}

fn load_config(g: &Global) -> Res<RunConfig> {
    let mut cfg = match &g.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    cfg.solver = solver_opts(g, cfg.solver)?;
    Ok(cfg)
}

fn solver_opts(g: &Global, mut base: SolverOptions) -> Res<SolverOptions> {
    if let Some(s) = g.solver {
        base.backend = match s {
            SolverArg::Direct => Backend::Direct,
            SolverArg::Cg => Backend::Cg,
        };
    }
    if let Some(t) = g.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::Usage(format!("--tol must be in (0, 1), got {t}")));
        }
        base.tol = t;
    }
    Ok(base)
}

fn dump_mesh(g: &Global, mesh: &Mesh) -> Res<()> {
    if let Some(p) = &g.mesh_dump {
        let mut w = BufWriter::new(File::create(p)?);
        mesh.dump(&mut w)?;
        w.flush()?;
    }
    Ok(())
}

fn cell_solver(g: &Global, c: &CellArgs) -> Res<CellSolver> {
    let shape: InclusionShape = c.shape.parse()?;
    let s = CellSolver::new(c.coef.build(), shape, c.n, solver_opts(g, SolverOptions::default())?)?;
    dump_mesh(g, &s.cell.mesh)?;
    Ok(s)
}

fn print_json(v: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("JSON values always serialize"));
}

fn report_checks(checks: &[Check]) -> bool {
    for c in checks {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    checks.iter().all(|c| c.passed)
}

fn write_text(dir: &Path, name: &str, body: &[u8]) -> Res<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), body)?;
    Ok(())
}

fn dispatch(cli: &Cli) -> Res<bool> {
    let g = &cli.global;
    match &cli.command {
        Command::Cell { delta, cell } => {
            let tag: DeltaTag = delta.parse()?;
            let s = cell_solver(g, cell)?;
            let cc = s.solve_tag(tag)?;
            let t = s.homogenized(&cc);
            print_json(&json!({
                "delta": tag.to_string(),
                "chi_norms": cc.chi_norms(),
                "A_hat": t.entries,
                "mu1": t.mu1,
            }));
            Ok(true)
        }
        Command::Flux { delta, cell } => {
            let tag: DeltaTag = delta.parse()?;
            let s = cell_solver(g, cell)?;
            let cc = s.solve_tag(tag)?;
            let fd = build_flux_with(&s, &cc, &s.homogenized(&cc))?;
            print_json(&json!({
                "delta": tag.to_string(),
                "F_l2": fd.report.f_l2,
                "Psi_l2": fd.report.psi_l2,
                "div_residual": fd.report.div_residual,
                "skew_residual": fd.report.skew_residual,
            }));
            Ok(true)
        }
        Command::NpSpectrum { cell } => {
            let s = cell_solver(g, cell)?;
            let op = WeakLayerOperator::new(s.cell.clone(), s.coef.clone(), s.opts)?;
            println!("index,eigenvalue");
            for (k, v) in op.eigenvalues().iter().enumerate() {
                println!("{k},{v}");
            }
            Ok(true)
        }
        Command::RateEps | Command::Diagnostics => {
            let cfg = load_config(g)?;
            dump_domain_mesh(g, &cfg)?;
            let grid = run_grid(&cfg)?;
            let checks = if matches!(cli.command, Command::RateEps) {
                let mut c = grid.rate_checks(&cfg.assertions.tolerances);
                c.extend(grid.uniformity_checks(&cfg.assertions.tolerances));
                c
            } else {
                grid.pqr_checks(&cfg.assertions.tolerances)
            };
            grid.write(&cfg, &checks, &g.out)?;
            if matches!(cli.command, Command::Diagnostics) {
                println!("eps,delta,P_l2,Q_l2,R_l2,pqr,interior_error,corrector_helps");
                for r in &grid.rows {
                    println!("{},{},{},{},{},{},{},{}", r.eps, r.delta, r.p_l2, r.q_l2, r.r_l2, r.pqr, r.interior_error, r.corrector_helps);
                }
            } else {
                for s in &grid.per_delta {
                    println!("delta {}: slope {}", s.delta, s.h1_rate.as_ref().map(|r| format!("{:.4}", r.slope)).unwrap_or_else(|| "n/a".into()));
                }
            }
            Ok(!cfg.assertions.grid || report_checks(&checks))
        }
        Command::RateDelta => {
            let cfg = load_config(g)?;
            let s = CellSolver::new(cfg.coefficient.build()?, cfg.geometry.shape.into(), cfg.mesh.cell_n(), cfg.solver)?;
            dump_mesh(g, &s.cell.mesh)?;
            let mut deltas = cfg.delta_grid.clone();
            deltas.sort_by(f64::total_cmp);
            let sweep = s.sweep(&deltas)?;
            let mut csv = String::from("delta,min_eig,dist_zero,dist_inf\n");
            for (d, t) in sweep.deltas.iter().zip(&sweep.tensors) {
                csv.push_str(&format!("{d},{},{},{}\n", t.mu1, t.distance(&sweep.zero), t.distance(&sweep.infinity)));
            }
            write_text(&g.out, &cfg.outputs.csv, csv.as_bytes())?;
            let summary = json!({
                "soft_rate": sweep.soft_rate,
                "stiff_rate": sweep.stiff_rate,
                "A_hat_zero": sweep.zero.entries,
                "A_hat_inf": sweep.infinity.entries,
            });
            write_text(&g.out, &cfg.outputs.summary, serde_json::to_string_pretty(&summary).unwrap().as_bytes())?;
            print!("{csv}");
            Ok(true)
        }
        Command::LipschitzProbe => {
            let cfg = load_config(g)?;
            let eps = cfg.eps_grid.first().copied().unwrap_or(0.125);
            let mut spec = ProblemSpec::reference(cfg.coefficient.build()?, cfg.geometry.shape.into(), eps, 1.0, cfg.mesh.m_ref);
            spec.kappa = cfg.geometry.kappa;
            spec.kind = cfg.geometry.domain.into();
            spec.modify_f = cfg.modify_f.unwrap_or(true);
            dump_mesh(g, &spec.mesh()?.mesh)?;
            let mut deltas = cfg.delta_grid.clone();
            deltas.sort_by(f64::total_cmp);
            let sups = gradient_sup_probe(&spec, &deltas, cfg.solver)?;
            let mut csv = String::from("eps,delta,modify_f,grad_sup,grad_sup_inclusions,grad_sup_matrix\n");
            for s in &sups {
                csv.push_str(&format!("{eps},{},{},{},{},{}\n", s.delta, spec.modify_f, s.all, s.inclusions, s.matrix));
            }
            write_text(&g.out, &cfg.outputs.csv, csv.as_bytes())?;
            print!("{csv}");
            let base = sups.iter().find(|s| s.delta == 1.0).map(|s| s.all);
            match (cfg.assertions.grid, base) {
                (true, Some(b)) => {
                    let ratio = sups.iter().map(|s| s.all).fold(0.0, f64::max) / b;
                    let f = cfg.assertions.tolerances.lipschitz_factor;
                    Ok(report_checks(&[Check {
                        name: "uniform gradient bound".into(),
                        passed: ratio <= f,
                        detail: format!("max/δ=1 {ratio:.3} (max {f})"),
                    }]))
                }
                (true, None) => Err(Failure::Usage("lipschitz assertion needs δ = 1 in delta_grid".into())),
                _ => Ok(true),
            }
        }
        Command::Run => {
            let cfg = load_config(g)?;
            dump_domain_mesh(g, &cfg)?;
            let grid = run_grid(&cfg)?;
            let tol = &cfg.assertions.tolerances;
            let checks = if cfg.assertions.grid { grid.checks(tol) } else { Vec::new() };
            grid.write(&cfg, &checks, &g.out)?;
            let mut ok = report_checks(&checks);
            if !cfg.assertions.criteria.is_empty() {
                let outcomes: Vec<Outcome> = run_criteria(&cfg.assertions.criteria, tol, |o| println!("{}", o.line()));
                write_csv(&outcomes, &g.out.join(&cfg.outputs.acceptance_csv))?;
                ok &= outcomes.iter().all(|o| o.passed);
            }
            Ok(ok)
        }
    }
}

fn dump_domain_mesh(g: &Global, cfg: &RunConfig) -> Res<()> {
    if g.mesh_dump.is_none() {
        return Ok(());
    }
    let eps = cfg
        .eps_grid
        .first()
        .copied()
        .ok_or_else(|| Failure::Usage("--mesh-dump needs a non-empty eps_grid".into()))?;
    let dm = build_perforated_mesh(cfg.geometry.shape.into(), eps, cfg.geometry.kappa, cfg.mesh.m_ref, cfg.geometry.domain.into())?;
    dump_mesh(g, &dm.mesh)
}
