//! Command-line front end: model checking, certification, single solves and
//! closed-loop simulation.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use ellcert::certify::{Certificate, NoteValue};
use ellcert::ellipsoid::write_trace_csv;
use ellcert::linalg::{DenseMatrix, DenseVector};
use ellcert::mpc::{self, CompileOptions, CompiledFamily, MpcError, MpcModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandOutcome {
    pub exit_code: i32,
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
}

impl CommandOutcome {
    fn ok(summary: String, artifacts: Vec<PathBuf>) -> Self {
        Self { exit_code: EXIT_OK, artifacts, summary }
    }

    fn fail(exit_code: i32, summary: String) -> Self {
        Self { exit_code, artifacts: Vec::new(), summary }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ellcert", version, about = "Certified ellipsoid-method MPC toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct FamilyArgs {
    /// Model file.
    file: PathBuf,
    /// Radius of the parameter ball (default: V divided by the number of norm terms).
    #[arg(long = "r-o")]
    r_o: Option<f64>,
    /// Upper bound on each epigraph variable.
    #[arg(long = "t-max")]
    t_max: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Parse and validate a model, print its dimensions.
    Check {
        #[command(flatten)]
        family: FamilyArgs,
    },
    /// Compute the certificate and optionally write it as JSON.
    Certify {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        json: Option<PathBuf>,
        /// Per-column norm bound on the bounded block, reported as an alternative R.
        #[arg(long = "alt-u-norm")]
        alt_u_norm: Option<f64>,
    },
    /// Solve one instance.
    Solve {
        #[command(flatten)]
        family: FamilyArgs,
        /// Parameter value, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        /// Per-iteration CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the closed loop.
    Simulate {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x0: Vec<f64>,
        #[arg(long)]
        steps: usize,
        /// Plant matrices as headerless CSV files `A.csv,B.csv`
        /// (default: the model constants A and B).
        #[arg(long, value_delimiter = ',')]
        plant: Option<Vec<PathBuf>>,
        /// Sampling period.
        #[arg(long, default_value_t = 0.5)]
        dt: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(e: &MpcError) -> i32 {
    match e {
        MpcError::Certify(_) | MpcError::Solve { .. } => EXIT_FAILURE,
        _ => EXIT_INVALID,
    }
}

fn load_model(path: &Path) -> Result<MpcModel, CommandOutcome> {
    let text = fs::read_to_string(path)
        .map_err(|e| CommandOutcome::fail(EXIT_INVALID, format!("cannot read {}: {e}", path.display())))?;
    mpc::parse(&text).map_err(|e| CommandOutcome::fail(EXIT_INVALID, format!("{}: {e}", path.display())))
}

fn load_family(args: &FamilyArgs, alt: Option<f64>) -> Result<(MpcModel, CompiledFamily), CommandOutcome> {
    let model = load_model(&args.file)?;
    let opts = CompileOptions { recompute: true, r_o: args.r_o, t_max: args.t_max, alt_column_norm_bound: alt };
    let fam = mpc::compile_with(&model, &opts)
        .map_err(|e| CommandOutcome::fail(exit_code_for(&e), format!("{}: {e}", args.file.display())))?;
    Ok((model, fam))
}

fn param(values: &[f64], fam: &CompiledFamily) -> Result<DenseVector, CommandOutcome> {
    if values.len() != fam.input_dim {
        return Err(CommandOutcome::fail(
            EXIT_INVALID,
            format!("--x0 has {} entries, the model input has {}", values.len(), fam.input_dim),
        ));
    }
    DenseVector::new(values.to_vec()).map_err(|e| CommandOutcome::fail(EXIT_INVALID, format!("--x0: {e}")))
}

fn fmt_vec(v: &DenseVector) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x}")).collect();
    format!("({})", parts.join(", "))
}

fn fmt_budget(x: Option<u64>) -> String {
    x.map_or_else(|| "divergent".to_string(), |v| v.to_string())
}

/// Writes the certificate JSON; repeated calls produce identical bytes.
pub fn emit_certificate(cert: &Certificate, path: &Path) -> CommandOutcome {
    match fs::write(path, cert.to_json()) {
        Ok(()) => CommandOutcome::ok(format!("certificate written to {}", path.display()), vec![path.to_path_buf()]),
        Err(e) => CommandOutcome::fail(EXIT_FAILURE, format!("cannot write {}: {e}", path.display())),
    }
}

fn read_matrix(path: &Path) -> Result<DenseMatrix, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
        let row: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| format!("{}: {e}", path.display()))?);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| format!("{}: {e}", path.display()))
}

fn check(args: &FamilyArgs) -> CommandOutcome {
    let (model, fam) = match load_family(args, None) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let summary = format!(
        "n_x={}, d={}, n_z={}, n={}, constraints: {} groups",
        model.n_x(),
        fam.projection.d,
        fam.n_z,
        fam.dim(),
        model.num_groups()
    );
    CommandOutcome::ok(summary, Vec::new())
}

fn certify(args: &FamilyArgs, json: Option<&Path>, alt: Option<f64>) -> CommandOutcome {
    let (_, fam) = match load_family(args, alt) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let c = &fam.certificate;
    let mut s = String::new();
    let _ = writeln!(s, "n={}, r={}, R={}, V={}, eps={}, lambda={}", c.n, c.r, c.big_r, c.v, c.epsilon, c.lambda);
    let _ = writeln!(s, "N={}", c.big_n);
    let threshold = match c.notes.get("lambda_threshold_paper") {
        Some(NoteValue::Number(x)) => format!(" (threshold {x})"),
        _ => String::new(),
    };
    let _ = writeln!(
        s,
        "N_lambda_paper={} convergent={}{}",
        fmt_budget(c.n_lambda_paper),
        c.lambda_convergent,
        threshold
    );
    let _ = writeln!(s, "N_lambda_safe={} convergent={}", fmt_budget(c.n_lambda_safe), c.n_lambda_safe.is_some());
    if let Some(NoteValue::Number(w)) = c.notes.get("lambda_worst_case") {
        let conv = matches!(c.notes.get("lambda_worst_case_convergent_paper"), Some(NoteValue::Bool(true)));
        let _ = writeln!(s, "worst-case lambda={w} convergent_paper={conv}");
    }
    for key in ["R_bounded", "R_bounded_alt", "R_with_epigraph", "r_recomputed", "V_recomputed"] {
        if let Some(v) = c.notes.get(key) {
            let text = match v {
                NoteValue::Number(x) => x.to_string(),
                NoteValue::Integer(x) => x.to_string(),
                NoteValue::Bool(x) => x.to_string(),
                NoteValue::Text(x) => x.clone(),
            };
            let _ = writeln!(s, "{key}={text}");
        }
    }
    let mut artifacts = Vec::new();
    if let Some(path) = json {
        let out = emit_certificate(c, path);
        if out.exit_code != EXIT_OK {
            return out;
        }
        let _ = writeln!(s, "{}", out.summary);
        artifacts.extend(out.artifacts);
    }
    CommandOutcome::ok(s.trim_end().to_string(), artifacts)
}

fn write_trace(path: &Path, rows: &[ellcert::ellipsoid::TraceRow]) -> Result<(), String> {
    let file = fs::File::create(path).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    write_trace_csv(rows, file).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn solve(args: &FamilyArgs, x0: &[f64], trace: Option<&Path>) -> CommandOutcome {
    let (_, fam) = match load_family(args, None) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let x_o = match param(x0, &fam) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let cfg = match fam.solver_config() {
        Ok(c) => c.with_trace(trace.is_some()),
        Err(e) => return CommandOutcome::fail(EXIT_FAILURE, e.to_string()),
    };
    match fam.solve_instance_with(&x_o, &cfg) {
        Ok(sol) => {
            let mut s = String::new();
            if sol.outside_ball {
                let _ = writeln!(
                    s,
                    "warning: |x0| = {} exceeds the certified parameter radius {}",
                    x_o.two_norm(),
                    fam.r_o
                );
            }
            let best = sol.outcome.best.as_ref().map_or(f64::NAN, |b| b.cost);
            let _ = writeln!(s, "status: {}", sol.outcome.status);
            let _ = writeln!(
                s,
                "iterations: {} (corrective: {})",
                sol.outcome.iterations_used, sol.outcome.corrective_steps
            );
            let _ = writeln!(s, "best cost: {best}");
            let _ = writeln!(s, "objective: {}", sol.objective);
            let _ = write!(s, "u = {}", fmt_vec(&sol.u_applied));
            let mut artifacts = Vec::new();
            if let Some(path) = trace {
                if let Err(e) = write_trace(path, sol.outcome.trace.as_deref().unwrap_or(&[])) {
                    return CommandOutcome::fail(EXIT_FAILURE, e);
                }
                artifacts.push(path.to_path_buf());
            }
            CommandOutcome::ok(s, artifacts)
        }
        Err((e, rows)) => {
            let mut out = CommandOutcome::fail(EXIT_FAILURE, e.to_string());
            if let Some(path) = trace {
                match write_trace(path, &rows) {
                    Ok(()) => {
                        let _ = write!(out.summary, "\npartial trace: {}", path.display());
                        out.artifacts.push(path.to_path_buf());
                    }
                    Err(w) => {
                        let _ = write!(out.summary, "\n{w}");
                    }
                }
            }
            out
        }
    }
}

fn simulate(
    args: &FamilyArgs,
    x0: &[f64],
    steps: usize,
    plant: Option<&[PathBuf]>,
    dt: f64,
    out: Option<&Path>,
) -> CommandOutcome {
    let (model, fam) = match load_family(args, None) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let x_o = match param(x0, &fam) {
        Ok(x) => x,
        Err(o) => return o,
    };
    let (a, b) = match plant {
        Some([pa, pb]) => match (read_matrix(pa), read_matrix(pb)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return CommandOutcome::fail(EXIT_INVALID, e),
        },
        Some(_) => return CommandOutcome::fail(EXIT_INVALID, "--plant expects A.csv,B.csv".into()),
        None => match (model.constant("A"), model.constant("B")) {
            (Some(a), Some(b)) => (a.clone(), b.clone()),
            _ => {
                return CommandOutcome::fail(
                    EXIT_INVALID,
                    "no --plant given and the model has no constants A and B".into(),
                )
            }
        },
    };
    let traj = match mpc::simulate_with_step(&fam, &a, &b, &x_o, steps, dt) {
        Ok(t) => t,
        Err(e) => return CommandOutcome::fail(exit_code_for(&e), e.to_string()),
    };
    let mut artifacts = Vec::new();
    let mut s = String::new();
    if let Some(path) = out {
        let written = fs::File::create(path).map_err(|e| e.to_string()).and_then(|f| traj.write_csv(f).map_err(|e| e.to_string()));
        if let Err(e) = written {
            return CommandOutcome::fail(EXIT_FAILURE, format!("cannot write {}: {e}", path.display()));
        }
        artifacts.push(path.to_path_buf());
    }
    let done = traj.rows.len() - 1;
    let _ = writeln!(s, "steps: {done}/{steps}");
    let _ = write!(s, "final state: {} (norm {})", fmt_vec(traj.final_state()), traj.final_state().two_norm());
    if let Some(e) = &traj.failure {
        let mut o = CommandOutcome::fail(EXIT_FAILURE, format!("{s}\nsimulation aborted: {e}"));
        if let Some(path) = out {
            let _ = write!(o.summary, "\npartial trajectory: {}", path.display());
        }
        o.artifacts = artifacts;
        return o;
    }
    if let Some(path) = out {
        let _ = write!(s, "\ntrajectory written to {}", path.display());
    }
    CommandOutcome::ok(s, artifacts)
}

/// Runs one command line (including the program name).
pub fn run<I, T>(argv: I) -> CommandOutcome
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            return CommandOutcome { exit_code: code, artifacts: Vec::new(), summary: e.render().to_string() };
        }
    };
    match &cli.command {
        Command::Check { family } => check(family),
        Command::Certify { family, json, alt_u_norm } => certify(family, json.as_deref(), *alt_u_norm),
        Command::Solve { family, x0, trace } => solve(family, x0, trace.as_deref()),
        Command::Simulate { family, x0, steps, plant, dt, out } => {
            simulate(family, x0, *steps, plant.as_deref(), *dt, out.as_deref())
        }
    }
}
