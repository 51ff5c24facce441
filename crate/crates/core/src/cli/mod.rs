//! Command-line front end: spec loading, subcommand orchestration and
//! output emission.
//!
//! Exit codes: 0 success, 1 verdict failure, 2 numerical blow-up,
//! 3 input error.

pub mod builtins;
pub mod report;
pub mod spec;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use crate::asymptotics::{
    classify_net, geroch_traschen_pipeline, solution_moderateness, verify_system_conditions, verify_wave_conditions, Case,
    SweepReport,
};
use crate::error::{Error, Result};
use crate::genfunc::expr::pack;
use crate::genfunc::table::{fmt_f64, write_table};
use crate::genfunc::{CoefficientNet, Expr, Rescaling, SampleGrid};
use crate::solver::{equivalence_check, solve_system, solve_wave, GridSolution};
use crate::transform::{wave_to_system, WaveProblem};
use report::{conditions_csv, conditions_text, file_stem, series_csv, series_line, RunReport};
use spec::{parse_spec, ProblemSpec, SolverChoice};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERDICT: i32 = 1;
pub const EXIT_BLOWUP: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Environment variable naming the output directory.
pub const OUT_ENV: &str = "WAVESYS_OUT";
pub const DEFAULT_OUT: &str = "wavesys-out";
pub const REPORT_FILE: &str = "run_report.json";

/// Values below this are treated as exact zeros when fitting orders.
const ORDER_FLOOR: f64 = 1e-10;

#[derive(Debug, Parser)]
#[command(name = "wavesys", version, about = "Mollified wave equations, their first-order form and ε-sweep checks")]
pub struct Cli {
    /// Output directory; overrides WAVESYS_OUT.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for random directions; overrides the spec.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Mollifier for every coefficient, overriding the spec.
    #[arg(long, global = true)]
    pub mollifier: Option<Rescaling>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Wave,
    System,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the first-order system coefficients.
    Transform { spec: String },
    /// Solve at the requested ε values.
    Solve {
        spec: String,
        #[arg(long)]
        eps: Vec<f64>,
        #[arg(long, value_enum)]
        solver: Option<SolverChoice>,
    },
    /// Classify coefficient nets, or the solution net with --solution.
    Sweep {
        spec: String,
        /// Restrict to these nets (R, S, dS, g, a, b, c, f).
        #[arg(long)]
        net: Vec<String>,
        /// Sweep the solution net at h and h/2 instead of the coefficients.
        #[arg(long)]
        solution: bool,
    },
    /// Check the hypotheses of one case.
    Verify {
        spec: String,
        #[arg(long)]
        case: Case,
        #[arg(long, value_enum, default_value = "wave")]
        form: Form,
    },
    /// Compare system and wave solutions under grid refinement.
    Equivalence { spec: String },
    /// Raw metric check, mollification, case A and solution sweep.
    GtPipeline {
        spec: String,
        /// Stop after the coefficient conditions.
        #[arg(long)]
        skip_solution: bool,
    },
    /// Write a built-in spec.
    Example {
        #[arg(value_parser = builtins::NAMES)]
        name: String,
        /// Print the spec instead of writing it.
        #[arg(long)]
        stdout: bool,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Transform { .. } => "transform",
            Command::Solve { .. } => "solve",
            Command::Sweep { .. } => "sweep",
            Command::Verify { .. } => "verify",
            Command::Equivalence { .. } => "equivalence",
            Command::GtPipeline { .. } => "gt-pipeline",
            Command::Example { .. } => "example",
        }
    }

    fn spec_arg(&self) -> Option<&str> {
        match self {
            Command::Transform { spec }
            | Command::Solve { spec, .. }
            | Command::Sweep { spec, .. }
            | Command::Verify { spec, .. }
            | Command::Equivalence { spec }
            | Command::GtPipeline { spec, .. } => Some(spec),
            Command::Example { .. } => None,
        }
    }
}

/// Output directory: flag, then environment, then `./wavesys-out`.
pub fn output_dir(flag: Option<&Path>) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Loads `builtin:NAME` or a spec file.
pub fn load_spec(arg: &str) -> Result<ProblemSpec> {
    match arg.strip_prefix("builtin:") {
        Some(name) => {
            let text = builtins::text(name).ok_or_else(|| Error::Config(format!("unknown built-in '{name}'")))?;
            parse_spec(text)
        }
        None => parse_spec(&std::fs::read_to_string(arg).map_err(|e| Error::Config(format!("cannot read {arg}: {e}")))?),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    if err.is_blow_up() {
        EXIT_BLOWUP
    } else {
        EXIT_INPUT
    }
}

struct Outcome {
    verdict: Option<bool>,
    summary: serde_json::Value,
}

impl Outcome {
    fn info(summary: serde_json::Value) -> Self {
        Outcome { verdict: None, summary }
    }
}

#[derive(Default)]
struct Run {
    files: Vec<(String, Vec<u8>)>,
    timings: BTreeMap<String, f64>,
}

impl Run {
    fn emit(&mut self, name: impl Into<String>, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn timed<T>(&mut self, label: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        *self.timings.entry(label.into()).or_default() += start.elapsed().as_secs_f64() * 1e3;
        out
    }
}

/// Parses `args`, runs the subcommand, writes its outputs and returns the
/// exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if let Command::Example { name, stdout: true } = &cli.command {
        print!("{}", builtins::text(name).expect("validated by clap"));
        return EXIT_OK;
    }
    let out = output_dir(cli.out.as_deref());
    let report = run(&cli);
    match write_outputs(&out, report) {
        Ok(rep) => {
            println!(
                "{}: {}{} ({} files in {})",
                rep.command,
                match rep.verdict {
                    Some(true) => "pass",
                    Some(false) => "FAIL",
                    None if rep.error.is_some() => "error",
                    None => "done",
                },
                rep.error.as_deref().map(|e| format!(": {e}")).unwrap_or_default(),
                rep.files.len(),
                out.display()
            );
            if let Some(e) = &rep.error {
                eprintln!("error: {e}");
            }
            rep.exit_code
        }
        Err(e) => {
            eprintln!("error: cannot write outputs to {}: {e}", out.display());
            EXIT_INPUT
        }
    }
}

/// Runs the subcommand; file contents are held until [`write_outputs`].
fn run(cli: &Cli) -> (RunReport, Vec<(String, Vec<u8>)>) {
    let mut ctx = Run::default();
    let mut seed = cli.seed.unwrap_or(crate::solver::grid::DEFAULT_SEED);
    let result = (|| -> Result<Outcome> {
        if let Command::Example { name, .. } = &cli.command {
            let text = builtins::text(name).expect("validated by clap");
            ctx.emit(format!("{name}.toml"), text.as_bytes().to_vec());
            return Ok(Outcome::info(json!({ "example": name })));
        }
        let arg = cli.command.spec_arg().expect("every other command takes a spec");
        let mut spec = ctx.timed("parse", || load_spec(arg))?;
        if let Some(s) = cli.seed {
            spec.grid.seed = s;
        }
        seed = spec.grid.seed;
        dispatch(cli, &spec, &mut ctx)
    })();
    let (verdict, exit_code, error, summary) = match result {
        Ok(o) => {
            let code = if o.verdict == Some(false) { EXIT_VERDICT } else { EXIT_OK };
            (o.verdict, code, None, o.summary)
        }
        Err(e) => (None, exit_code(&e), Some(e.to_string()), serde_json::Value::Null),
    };
    let report = RunReport {
        command: cli.command.name().into(),
        spec: cli.command.spec_arg().map(str::to_string),
        seed,
        verdict,
        exit_code,
        error,
        timings_ms: ctx.timings,
        files: ctx.files.iter().map(|(n, _)| n.clone()).collect(),
        summary,
    };
    (report, ctx.files)
}

/// Single writer for every output file and the run report.
fn write_outputs(dir: &Path, (report, files): (RunReport, Vec<(String, Vec<u8>)>)) -> Result<RunReport> {
    std::fs::create_dir_all(dir)?;
    for (name, bytes) in &files {
        std::fs::write(dir.join(name), bytes)?;
    }
    let json = serde_json::to_vec_pretty(&report).map_err(|e| Error::Spec(format!("report: {e}")))?;
    std::fs::write(dir.join(REPORT_FILE), json)?;
    Ok(report)
}

fn dispatch(cli: &Cli, spec: &ProblemSpec, ctx: &mut Run) -> Result<Outcome> {
    let force = cli.mollifier;
    match &cli.command {
        Command::Transform { .. } => transform(spec, force, ctx),
        Command::Solve { eps, solver, .. } => solve(spec, force, eps, solver.unwrap_or(spec.outputs.solver), ctx),
        Command::Sweep { net, solution, .. } => {
            if *solution {
                moderateness(spec, force, ctx)
            } else {
                sweep(spec, force, net, ctx)
            }
        }
        Command::Verify { case, form, .. } => verify(spec, force, *case, *form, ctx),
        Command::Equivalence { .. } => equivalence(spec, force, ctx),
        Command::GtPipeline { skip_solution, .. } => gt_pipeline(spec, force, *skip_solution, ctx),
        Command::Example { .. } => unreachable!("handled before loading a spec"),
    }
}

fn build_problem(spec: &ProblemSpec, force: Option<Rescaling>, ctx: &mut Run) -> Result<WaveProblem> {
    ctx.timed("build", || spec.problem(force))
}

fn table_bytes(field: &crate::genfunc::SampledField, eps: f64) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_table(&mut buf, field, eps)?;
    Ok(buf)
}

fn transform(spec: &ProblemSpec, force: Option<Rescaling>, ctx: &mut Run) -> Result<Outcome> {
    let p = build_problem(spec, force, ctx)?;
    let sys = ctx.timed("transform", || wave_to_system(&p))?;
    let n = p.dim();
    let counts = vec![spec.sweep.points(n); n];
    let t = p.horizon;
    let grid = SampleGrid::uniform(vec![0.0, 0.5 * t, t], &p.domain.lower, &p.domain.upper, &counts);
    let initial = SampleGrid::uniform(vec![0.0], &p.domain.lower, &p.domain.upper, &counts);
    let mut nets: Vec<(String, &CoefficientNet, &SampleGrid)> =
        sys.a.iter().enumerate().map(|(i, a)| (format!("A{}", i + 1), a, &grid)).collect();
    nets.push(("B".into(), &sys.b, &grid));
    nets.push(("F".into(), &sys.f, &grid));
    nets.push(("w0".into(), &sys.w0, &initial));
    let eps = &spec.outputs.eps;
    let tables = ctx.timed("sample", || {
        eps.par_iter()
            .enumerate()
            .map(|(k, &e)| {
                nets.iter()
                    .map(|(name, net, g)| {
                        let field = net.sample(e, g).map_err(|err| err.at_eps(e))?;
                        Ok((format!("transform_{name}_eps{k}.txt"), table_bytes(&field, e)?))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut names = Vec::new();
    for (name, bytes) in tables.into_iter().flatten() {
        names.push(name.clone());
        ctx.emit(name, bytes);
    }
    Ok(Outcome::info(json!({
        "eps": eps,
        "components": 2 + n,
        "nets": nets.iter().map(|(n, _, _)| n.clone()).collect::<Vec<_>>(),
        "tables": names,
    })))
}

fn solve_summary(sol: &GridSolution) -> serde_json::Value {
    json!({
        "solver": sol.kind,
        "eps": sol.eps,
        "nodes": sol.grid.nodes,
        "tau": sol.grid.tau,
        "steps": sol.grid.steps,
        "lambda_max": sol.grid.lambda_max,
        "courant": sol.grid.courant,
        "residual": sol.residual,
        "max_abs": sol.max_abs,
    })
}

fn solve(spec: &ProblemSpec, force: Option<Rescaling>, eps: &[f64], choice: SolverChoice, ctx: &mut Run) -> Result<Outcome> {
    let p = build_problem(spec, force, ctx)?;
    let sys = wave_to_system(&p)?;
    let eps = if eps.is_empty() { spec.outputs.eps.clone() } else { eps.to_vec() };
    let kinds: Vec<&str> = match choice {
        SolverChoice::System => vec!["system"],
        SolverChoice::Wave => vec!["wave"],
        SolverChoice::Both => vec!["system", "wave"],
    };
    let jobs: Vec<(usize, f64, &str)> = eps
        .iter()
        .enumerate()
        .flat_map(|(k, &e)| kinds.iter().map(move |&kind| (k, e, kind)))
        .collect();
    let sols = ctx.timed("solve", || {
        jobs.par_iter()
            .map(|&(_, e, kind)| {
                let r = if kind == "system" { solve_system(&sys, e, &spec.grid) } else { solve_wave(&p, e, &spec.grid) };
                r.map_err(|err| err.at_eps(e))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let mut summary = Vec::new();
    for ((k, e, kind), sol) in jobs.iter().zip(&sols) {
        ctx.emit(format!("solve_{kind}_eps{k}.txt"), table_bytes(&sol.to_field()?, *e)?);
        summary.push(solve_summary(sol));
    }
    Ok(Outcome::info(json!({ "solves": summary })))
}

fn coefficient_nets(p: &WaveProblem) -> Result<Vec<CoefficientNet>> {
    let s = p.s()?;
    Ok(vec![
        p.r.clone(),
        s.clone(),
        s.differential()?.with_name("dS"),
        p.g.clone(),
        p.a.clone(),
        p.b.clone(),
        p.c.clone(),
        p.f.clone(),
    ])
}

fn sweep(spec: &ProblemSpec, force: Option<Rescaling>, only: &[String], ctx: &mut Run) -> Result<Outcome> {
    let p = build_problem(spec, force, ctx)?;
    let nets = coefficient_nets(&p)?;
    if let Some(bad) = only.iter().find(|n| !nets.iter().any(|net| net.name() == n.as_str())) {
        return Err(Error::Config(format!("unknown net '{bad}'")));
    }
    let selected: Vec<&CoefficientNet> = nets.iter().filter(|n| only.is_empty() || only.iter().any(|o| o == n.name())).collect();
    let reports = ctx.timed("sweep", || {
        selected
            .iter()
            .map(|net| classify_net(net, &p.domain, p.horizon, &spec.sweep))
            .collect::<Result<Vec<SweepReport>>>()
    })?;
    let mut text = String::from("# coefficient sweep\n");
    let mut summary = serde_json::Map::new();
    for rep in &reports {
        ctx.emit(format!("sweep_{}.csv", file_stem(&rep.subject)), series_csv(&rep.series)?);
        text.push_str(&format!("{}: {}\n", rep.subject, rep.classification));
        for s in &rep.series {
            text.push_str(&format!("  {}\n", series_line(s)));
        }
        summary.insert(rep.subject.clone(), serde_json::to_value(rep).map_err(json_err)?);
    }
    ctx.emit("sweep_report.txt", text.into_bytes());
    Ok(Outcome::info(serde_json::Value::Object(summary)))
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Spec(format!("report: {e}"))
}

fn moderateness(spec: &ProblemSpec, force: Option<Rescaling>, ctx: &mut Run) -> Result<Outcome> {
    let p = build_problem(spec, force, ctx)?;
    let rep = ctx.timed("moderateness", || solution_moderateness(&p, &spec.grid, &spec.sweep, &spec.moderateness))?;
    ctx.emit("moderateness.csv", series_csv(&rep.all_series())?);
    let mut text = format!("# solution moderateness h={}\npass: {}\n", rep.h, rep.pass);
    for s in rep.all_series() {
        text.push_str(&format!("{}\n", series_line(&s)));
    }
    text.push_str(&format!(
        "refinement shift: {:?} ok={}\nperturbation decay order: {:?} ok={}\n",
        rep.exponent_shift, rep.refinement_ok, rep.perturbation.decay_order, rep.perturbation.pass
    ));
    ctx.emit("moderateness_report.txt", text.into_bytes());
    Ok(Outcome {
        verdict: Some(rep.pass),
        summary: serde_json::to_value(&rep).map_err(json_err)?,
    })
}

fn verify(spec: &ProblemSpec, force: Option<Rescaling>, case: Case, form: Form, ctx: &mut Run) -> Result<Outcome> {
    let p = build_problem(spec, force, ctx)?;
    let rep = ctx.timed("verify", || match form {
        Form::Wave => verify_wave_conditions(&p, case, &spec.sweep),
        Form::System => verify_system_conditions(&wave_to_system(&p)?, case, &spec.sweep),
    })?;
    let prefix = format!("verify_{case}");
    for (name, bytes) in conditions_csv(&prefix, &rep)? {
        ctx.emit(name, bytes);
    }
    ctx.emit(format!("{prefix}_report.txt"), conditions_text(&format!("case {case}, {form:?} form"), &rep).into_bytes());
    Ok(Outcome {
        verdict: Some(rep.aggregate),
        summary: json!({
            "case": case,
            "aggregate": rep.aggregate,
            "failures": rep.failures().iter().map(|h| json!({
                "hypothesis": h.hypothesis,
                "net": h.net,
                "K_id": h.series.k_id,
                "classification": h.series.classification,
                "exponent": h.series.exponent(),
            })).collect::<Vec<_>>(),
        }),
    })
}

fn order_ok(values: &[f64], order: f64, min: f64) -> bool {
    values.iter().all(|v| *v < ORDER_FLOOR) || order >= min
}

fn equivalence(spec: &ProblemSpec, force: Option<Rescaling>, ctx: &mut Run) -> Result<Outcome> {
    let p = build_problem(spec, force, ctx)?;
    let eq = &spec.equivalence;
    let exact = eq.exact.as_deref().map(Expr::parse).transpose()?;
    let exact_fn = exact.as_ref().map(|e| move |t: f64, x: &[f64]| e.eval(&pack(t, x)));
    let rep = ctx.timed("equivalence", || {
        equivalence_check(
            &p,
            eq.eps,
            &spec.grid,
            &eq.h,
            exact_fn.as_ref().map(|f| f as &(dyn Fn(f64, &[f64]) -> f64 + Sync)),
        )
    })?;
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Spec(format!("csv: {e}"));
    w.write_record(["h", "discrepancy", "relation_residual", "exact_error"]).map_err(csv_err)?;
    for (k, h) in rep.h.iter().enumerate() {
        let exact = rep.exact_error.as_ref().map(|e| fmt_f64(e[k])).unwrap_or_default();
        w.write_record([fmt_f64(*h), fmt_f64(rep.discrepancy[k]), fmt_f64(rep.relation_residual[k]), exact])
            .map_err(csv_err)?;
    }
    ctx.emit("equivalence.csv", w.into_inner().map_err(|e| Error::Spec(format!("csv: {e}")))?);
    let pass = order_ok(&rep.discrepancy, rep.discrepancy_order, eq.min_order)
        && order_ok(&rep.relation_residual, rep.relation_order, eq.min_order)
        && match (&rep.exact_error, rep.exact_order) {
            (Some(e), Some(o)) => order_ok(e, o, eq.min_order),
            _ => true,
        };
    Ok(Outcome {
        verdict: Some(pass),
        summary: serde_json::to_value(&rep).map_err(json_err)?,
    })
}

fn gt_pipeline(spec: &ProblemSpec, force: Option<Rescaling>, skip_solution: bool, ctx: &mut Run) -> Result<Outcome> {
    let raw = spec.raw_metric()?;
    let key = if spec.acoustic.is_some() { "speed" } else { "R" };
    let rescaling = force.or_else(|| spec.mollifiers.get(key).copied()).unwrap_or(spec.mollifier);
    let (p, rep) = ctx.timed("conditions", || geroch_traschen_pipeline(&raw, rescaling, &spec.sweep))?;
    for (name, bytes) in conditions_csv("gt_conditions", &rep.conditions)? {
        ctx.emit(name, bytes);
    }
    let mut text = conditions_text(&format!("metric pipeline, {rescaling} mollifier, case A"), &rep.conditions);
    text.push_str(&format!(
        "raw metric: {} samples, eigenvalues {}..{}\n",
        rep.raw.samples, rep.raw.min_eigenvalue, rep.raw.max_eigenvalue
    ));
    let mut pass = rep.conditions.aggregate;
    let mut solution = serde_json::Value::Null;
    if !skip_solution {
        let m = ctx.timed("moderateness", || solution_moderateness(&p, &spec.grid, &spec.sweep, &spec.moderateness))?;
        ctx.emit("gt_solution.csv", series_csv(&m.all_series())?);
        let sup = m.sup_series();
        let solution_ok = sup.classification.is_log_type() && m.refinement_ok && m.perturbation.pass;
        text.push_str(&format!(
            "solution: {}\nrefinement shift: {:?} ok={}\nperturbation decay order: {:?} ok={}\nsolution verdict: {}\n",
            series_line(sup),
            m.exponent_shift,
            m.refinement_ok,
            m.perturbation.decay_order,
            m.perturbation.pass,
            if solution_ok { "pass" } else { "fail" }
        ));
        pass &= solution_ok;
        solution = json!({
            "classification": sup.classification,
            "exponent": sup.exponent(),
            "exponent_shift": m.exponent_shift,
            "refinement_ok": m.refinement_ok,
            "perturbation_decay_order": m.perturbation.decay_order,
            "pass": solution_ok,
        });
    }
    ctx.emit("gt_report.txt", text.into_bytes());
    Ok(Outcome {
        verdict: Some(pass),
        summary: json!({
            "rescaling": rescaling,
            "raw": rep.raw,
            "conditions_pass": rep.conditions.aggregate,
            "failures": rep.conditions.failures().iter().map(|h| format!("{} {} {}", h.hypothesis, h.net, h.series.k_id)).collect::<Vec<_>>(),
            "solution": solution,
        }),
    })
}
