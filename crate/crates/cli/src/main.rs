use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use intineq::sdp::{self, eliminate_equalities, write_sdpa, DEFAULT_TOL};
use intineq::{bisect, sweep, Mode, Problem, ProblemSpec, Relaxation, RelaxationResult, Status};

#[derive(Parser)]
#[command(name = "intineq", version, about = "Outer and inner SDP relaxations of integral inequalities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the outer relaxation (lower bound on the optimal cost)
    Outer(Common),
    /// Solve the inner relaxation (upper bound and a feasible point)
    Inner(Common),
    /// Bisect on a parameter using a feasibility oracle
    Bisect {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::Inner)]
        mode: ModeArg,
        #[arg(long)]
        param: String,
        #[arg(long, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
    },
    /// Trace a two-parameter feasible set by its support function
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::Inner)]
        mode: ModeArg,
        #[arg(long, default_value_t = 300)]
        ndirs: usize,
    },
    /// Write a relaxation in sparse SDPA format
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = ModeArg::Outer)]
        mode: ModeArg,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    problem: PathBuf,
    #[arg(short = 'N')]
    n: usize,
    /// Degree of the S-procedure multiplier; defaults to min(N-2, 6)
    #[arg(long = "degT")]
    deg_t: Option<usize>,
    #[arg(long = "solver-tol", default_value_t = DEFAULT_TOL)]
    solver_tol: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Inner,
    Outer,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Inner => Mode::Inner,
            ModeArg::Outer => Mode::Outer,
        }
    }
}

impl Common {
    fn relaxation(&self, mode: Mode) -> Relaxation {
        Relaxation { mode, n: self.n, deg_t: self.deg_t, tol: self.solver_tol }
    }

    fn spec(&self) -> Result<ProblemSpec> {
        let text = std::fs::read_to_string(&self.problem)
            .with_context(|| format!("reading {}", self.problem.display()))?;
        Ok(ProblemSpec::from_json(&text)?)
    }

    fn problem(&self) -> Result<Problem> {
        Ok(self.spec()?.instantiate(&BTreeMap::new())?)
    }

    fn deg_t_field(&self, mode: Mode) -> Value {
        match mode {
            Mode::Inner => json!(intineq::InnerOptions { n: self.n, deg_t: self.deg_t }.deg_t()),
            Mode::Outer => Value::Null,
        }
    }
}

/// JSON has no infinities; unbounded and infeasible bounds are written as strings.
fn number(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else if v.is_nan() {
        json!("nan")
    } else if v > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn exit_code(status: Status) -> u8 {
    match status {
        Status::Optimal => 0,
        Status::Infeasible => 2,
        Status::Unbounded => 3,
        Status::Inaccurate => 1,
    }
}

fn relaxation_record(mode: Mode, c: &Common, p: &Problem, r: &RelaxationResult, secs: f64) -> Value {
    let gamma: serde_json::Map<String, Value> =
        p.param_names.iter().zip(&r.gamma).map(|(k, v)| (k.clone(), number(*v))).collect();
    json!({
        "command": mode,
        "status": r.status,
        "bound": number(r.bound),
        "gamma": gamma,
        "N": c.n,
        "degT": c.deg_t_field(mode),
        "residuals": {
            "primal": number(r.residuals.primal),
            "dual": number(r.residuals.dual),
            "gap": number(r.residuals.gap),
        },
        "iterations": r.iterations,
        "timings": {"total_s": secs},
    })
}

fn emit(v: &Value) {
    println!("{v}");
}

fn run(cli: Cli) -> Result<u8> {
    let start = Instant::now();
    match cli.command {
        Command::Outer(c) => single(Mode::Outer, &c, start),
        Command::Inner(c) => single(Mode::Inner, &c, start),
        Command::Bisect { common, mode, param, lo, hi, tol } => {
            let mode = Mode::from(mode);
            let spec = common.spec()?;
            let r = bisect(&spec, &param, lo, hi, tol, &common.relaxation(mode))?;
            emit(&json!({
                "command": "bisect",
                "status": "optimal",
                "mode": mode,
                "param": r.param,
                "value": r.value,
                "bracket": {"feasible": r.feasible, "infeasible": r.infeasible},
                "iterations": r.iterations,
                "N": common.n,
                "degT": common.deg_t_field(mode),
                "timings": {"total_s": start.elapsed().as_secs_f64()},
            }));
            Ok(0)
        }
        Command::Sweep { common, mode, ndirs } => {
            let mode = Mode::from(mode);
            let p = common.problem()?;
            let s = sweep(&p, ndirs, &common.relaxation(mode))?;
            for pt in &s.support_points {
                emit(&json!({
                    "command": "sweep",
                    "mode": mode,
                    "N": common.n,
                    "theta": pt.theta,
                    "status": pt.status,
                    "support": number(pt.support),
                    "gamma": pt.gamma.iter().map(|v| number(*v)).collect::<Vec<_>>(),
                    "error": pt.error,
                }));
            }
            let failed = s.support_points.iter().filter(|p| p.error.is_some()).count();
            emit(&json!({
                "command": "sweep-summary",
                "mode": mode,
                "N": common.n,
                "ndirs": ndirs,
                "failed": failed,
                "timings": {"total_s": start.elapsed().as_secs_f64()},
            }));
            Ok(0)
        }
        Command::Export { common, mode, out } => {
            let mode = Mode::from(mode);
            let p = common.problem()?;
            let relax = common.relaxation(mode);
            let prog = match mode {
                Mode::Outer => intineq::build_outer(&p, relax.n)?.program,
                Mode::Inner => {
                    intineq::build_inner_sdp(&p, &intineq::InnerOptions { n: relax.n, deg_t: relax.deg_t })?.0
                }
            };
            let (reduced, _) = eliminate_equalities(&prog)?;
            write(&reduced, &out)?;
            emit(&json!({
                "command": "export",
                "status": "optimal",
                "mode": mode,
                "N": common.n,
                "out": out.display().to_string(),
                "nvars": reduced.nvars,
                "blocks": reduced.psd_blocks.iter().map(|b| b.dim()).collect::<Vec<_>>(),
                "timings": {"total_s": start.elapsed().as_secs_f64()},
            }));
            Ok(0)
        }
    }
}

fn single(mode: Mode, c: &Common, start: Instant) -> Result<u8> {
    let p = c.problem()?;
    let r = c.relaxation(mode).solve(&p)?;
    emit(&relaxation_record(mode, c, &p, &r, start.elapsed().as_secs_f64()));
    Ok(exit_code(r.status))
}

fn write(prog: &sdp::ConicProgram, out: &Path) -> Result<()> {
    write_sdpa(prog, out).with_context(|| format!("writing {}", out.display()))
}

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, which would read as "infeasible"
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
