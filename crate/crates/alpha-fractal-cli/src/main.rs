//! `afrac` — batch front end for the alpha-fractal library.
//!
//! Reads a JSON problem file, dispatches to the library, and writes
//! `<stem>.csv` / `<stem>.report.json` into the output directory. Exit
//! codes: 0 on success, 2 when the problem fails validation (the report is
//! still written), 1 on I/O or parse errors. All outputs are deterministic
//! for a fixed `--seed`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use alpha_fractal::basis::{fractalize_basis, haar_system, lift_ladder, BasisLadder};
use alpha_fractal::grid::fmt_full;
use alpha_fractal::operator::{
    neumann_inverse, operator_norm_lower_bound, operator_norm_upper_bound, perturbation_bounds,
    PerturbationBranch,
};
use alpha_fractal::problem::{parse_space_descriptor, Problem, SpaceJson};
use alpha_fractal::rb::{chaos_game, fixed_point};
use alpha_fractal::{falpha_operator, validate_spec, FractalError, SpaceSpec};

#[derive(Parser)]
#[command(name = "afrac", version, about = "Self-referential perturbations of interval functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// JSON problem file.
    #[arg(long)]
    input: PathBuf,
    /// Output directory for CSV curves and JSON reports.
    #[arg(long, default_value = ".")]
    output: PathBuf,
    /// Dyadic grid refinement (2^m + 1 nodes); overrides the problem file.
    #[arg(long)]
    grid_level: Option<u32>,
    /// Iteration / truncation tolerance.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Seed for randomized routines.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ambient space override, e.g. `bounded`, `lp:2`, `sobolev:1,2`,
    /// `hoelder:1,0.5`, `lp:inf`.
    #[arg(long)]
    space: Option<String>,
    /// Term / trial / point count where the command needs one.
    #[arg(long)]
    terms: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for the perturbation and emit its curve.
    Eval(CommonOpts),
    /// Validate the problem and report the contraction condition.
    Verify(CommonOpts),
    /// Check the perturbation-size bounds.
    PerturbBound(CommonOpts),
    /// Estimate operator norms empirically against the analytic bound.
    Opnorm(CommonOpts),
    /// Invert the perturbation operator on the problem's seed.
    Invert(CommonOpts),
    /// Build a fractal Schauder basis and reconstruct the seed.
    Basis(CommonOpts),
    /// Sample the graph attractor.
    Attractor(CommonOpts),
    /// Export the sampled seed (with derivative columns when present).
    Export(CommonOpts),
}

impl Command {
    fn opts(&self) -> &CommonOpts {
        match self {
            Command::Eval(o)
            | Command::Verify(o)
            | Command::PerturbBound(o)
            | Command::Opnorm(o)
            | Command::Invert(o)
            | Command::Basis(o)
            | Command::Attractor(o)
            | Command::Export(o) => o,
        }
    }
}

/// Failure carrying the process exit code and a machine-readable object.
struct Failure {
    code: u8,
    payload: Value,
    message: String,
}

impl Failure {
    fn io(message: String) -> Failure {
        Failure {
            code: 1,
            payload: json!({"schema": 1, "error": {"kind": "io", "message": message.clone()}}),
            message,
        }
    }

    fn parse(message: String) -> Failure {
        Failure {
            code: 1,
            payload: json!({"schema": 1, "error": {"kind": "parse", "message": message.clone()}}),
            message,
        }
    }

    fn from_error(err: FractalError) -> Failure {
        let kind = error_kind(&err);
        let message = err.to_string();
        Failure {
            code: 2,
            payload: json!({"schema": 1, "error": {"kind": kind, "message": message.clone()}}),
            message,
        }
    }
}

fn error_kind(err: &FractalError) -> &'static str {
    match err {
        FractalError::NonMonotoneKnots { .. } => "non-monotone-knots",
        FractalError::TooFewKnots { .. } => "too-few-knots",
        FractalError::OutOfRange { .. } => "out-of-range",
        FractalError::OutOfDomain { .. } => "out-of-domain",
        FractalError::OrderTooHigh { .. } => "order-too-high",
        FractalError::UnsupportedOrder { .. } => "unsupported-order",
        FractalError::SpecInvalid { .. } => "spec-invalid",
        FractalError::NotContractive { .. } => "not-contractive",
        FractalError::MaxIterExceeded { .. } => "max-iter-exceeded",
        FractalError::IncompatibleScalingKind { .. } => "incompatible-scaling-kind",
        FractalError::HypothesisViolated { .. } => "hypothesis-violated",
        FractalError::MaxTermsExceeded { .. } => "max-terms-exceeded",
    }
}

struct Ctx {
    opts: CommonOpts,
    problem: Problem,
    stem: String,
    space_override: Option<SpaceSpec>,
}

impl Ctx {
    fn new(opts: &CommonOpts) -> Result<Ctx, Failure> {
        let text = fs::read_to_string(&opts.input)
            .map_err(|e| Failure::io(format!("cannot read {}: {e}", opts.input.display())))?;
        let problem = Problem::from_json(&text)
            .map_err(|e| Failure::parse(format!("{}: {e}", opts.input.display())))?;
        let stem = opts
            .input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "problem".into());
        let space_override = match &opts.space {
            Some(text) => Some(parse_space_descriptor(text).map_err(Failure::from_error)?),
            None => None,
        };
        fs::create_dir_all(&opts.output)
            .map_err(|e| Failure::io(format!("cannot create {}: {e}", opts.output.display())))?;
        Ok(Ctx {
            opts: opts.clone(),
            problem,
            stem,
            space_override,
        })
    }

    fn out_path(&self, suffix: &str) -> PathBuf {
        self.opts.output.join(format!("{}{suffix}", self.stem))
    }

    fn report_path(&self) -> PathBuf {
        self.out_path(".report.json")
    }

    fn write_report(&self, value: &Value) -> Result<(), Failure> {
        write_json(&self.report_path(), value)
    }
}

fn write_json(path: &Path, value: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable report");
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn space_json(space: &SpaceSpec) -> Value {
    serde_json::to_value(SpaceJson::from_space(space)).expect("serializable space")
}

fn branch_json(branch: &PerturbationBranch) -> Value {
    json!({
        "norm": branch.norm_label,
        "factor": branch.factor,
        "lhs": branch.lhs,
        "prop_bound": branch.prop_bound,
        "base_gap_bound": branch.base_gap_bound,
        "operator_bound": branch.operator_bound,
        "prop_ok": branch.prop_ok,
        "base_gap_ok": branch.base_gap_ok,
        "operator_ok": branch.operator_ok,
    })
}

fn write_curve(path: &Path, rows: impl Iterator<Item = (f64, f64)>) -> Result<(), Failure> {
    let mut out = Vec::new();
    writeln!(out, "x,value").expect("in-memory write");
    for (x, v) in rows {
        writeln!(out, "{},{}", fmt_full(x), fmt_full(v)).expect("in-memory write");
    }
    fs::write(path, out).map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(1);
        }
        Err(e) => {
            // help / version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let opts = cli.command.opts().clone();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("afrac: {}", failure.message);
            // best-effort machine-readable failure report next to the
            // other outputs
            if let Some(stem) = opts.input.file_stem() {
                let path = opts
                    .output
                    .join(format!("{}.report.json", stem.to_string_lossy()));
                if fs::create_dir_all(&opts.output).is_ok() {
                    let _ = write_json(&path, &failure.payload);
                }
            }
            ExitCode::from(failure.code)
        }
    }
}

fn run(command: &Command) -> Result<(), Failure> {
    let ctx = Ctx::new(command.opts())?;
    match command {
        Command::Eval(_) => cmd_eval(&ctx),
        Command::Verify(_) => cmd_verify(&ctx),
        Command::PerturbBound(_) => cmd_perturb_bound(&ctx),
        Command::Opnorm(_) => cmd_opnorm(&ctx),
        Command::Invert(_) => cmd_invert(&ctx),
        Command::Basis(_) => cmd_basis(&ctx),
        Command::Attractor(_) => cmd_attractor(&ctx),
        Command::Export(_) => cmd_export(&ctx),
    }
}

fn cmd_eval(ctx: &Ctx) -> Result<(), Failure> {
    let spec = ctx
        .problem
        .assemble(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let result = fixed_point(&spec, ctx.opts.tol, 200).map_err(Failure::from_error)?;
    let curve = &result.falpha;
    write_curve(
        &ctx.out_path(".csv"),
        (0..curve.len()).map(|j| (curve.node(j), curve.values()[j])),
    )?;
    let report = spec.contraction_report().map_err(Failure::from_error)?;
    ctx.write_report(&json!({
        "schema": 1,
        "command": "eval",
        "space": space_json(&report.space),
        "factor": report.factor,
        "iterations": result.iterations,
        "final_residual": result.final_residual,
        "contraction_estimate": result.contraction_estimate,
        "knot_snap_error": spec.knot_snap_error(),
    }))?;
    println!(
        "eval: converged in {} iterations (residual {:.3e})",
        result.iterations, result.final_residual
    );
    Ok(())
}

fn cmd_verify(ctx: &Ctx) -> Result<(), Failure> {
    let spec = ctx
        .problem
        .assemble(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let validation = validate_spec(&spec);
    let mut report = json!({
        "schema": 1,
        "command": "verify",
        "passed": validation.passed,
        "knot_snap_error": validation.knot_snap_error,
        "checks": validation
            .checks
            .iter()
            .map(|c| json!({
                "name": c.name,
                "observed": c.observed,
                "requirement": c.requirement,
                "passed": c.passed,
            }))
            .collect::<Vec<_>>(),
    });
    if let Some(contraction) = &validation.contraction {
        report["space"] = space_json(&contraction.space);
        report["factor"] = json!(contraction.factor);
        report["satisfied"] = json!(contraction.satisfied);
        report["condition"] = json!(contraction.condition);
    }
    ctx.write_report(&report)?;

    let name_width = validation
        .checks
        .iter()
        .map(|c| c.name.len())
        .max()
        .unwrap_or(0);
    for check in &validation.checks {
        println!(
            "{:<width$}  {}  observed {: <24} requirement {}",
            check.name,
            if check.passed { "PASS" } else { "FAIL" },
            format!("{:.6e}", check.observed),
            check.requirement,
            width = name_width
        );
    }
    if let Some(c) = &validation.contraction {
        println!(
            "contraction factor {:.12} in {} — {}",
            c.factor,
            c.space,
            if c.satisfied { "satisfied" } else { "NOT satisfied" }
        );
    }
    if validation.passed {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            payload: report,
            message: "validation failed (see report)".into(),
        })
    }
}

fn cmd_perturb_bound(ctx: &Ctx) -> Result<(), Failure> {
    let (template, seed) = ctx
        .problem
        .template(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let report = perturbation_bounds(&template, &seed).map_err(Failure::from_error)?;
    let value = json!({
        "schema": 1,
        "command": "perturb-bound",
        "space": space_json(&report.space),
        "norm_bound": report.norm_bound,
        "deviation_bound": report.deviation_bound,
        "space_branch": branch_json(&report.space_branch),
        "sup_branch": report.sup_branch.as_ref().map(branch_json),
        "all_satisfied": report.all_satisfied,
    });
    ctx.write_report(&value)?;
    println!(
        "perturb-bound: lhs {:.6e} ≤ prop {:.6e} — {}",
        report.space_branch.lhs,
        report.space_branch.prop_bound,
        if report.all_satisfied { "satisfied" } else { "NOT satisfied" }
    );
    if report.all_satisfied {
        Ok(())
    } else {
        Err(Failure {
            code: 2,
            payload: value,
            message: "perturbation bounds violated".into(),
        })
    }
}

fn cmd_opnorm(ctx: &Ctx) -> Result<(), Failure> {
    let (template, _) = ctx
        .problem
        .template(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let trials = ctx.opts.terms.unwrap_or(16);
    let lower =
        operator_norm_lower_bound(&template, trials, ctx.opts.seed).map_err(Failure::from_error)?;
    let upper = operator_norm_upper_bound(&template).map_err(Failure::from_error)?;
    let factor = template.factor().map_err(Failure::from_error)?;
    let span = template.partition.span();
    ctx.write_report(&json!({
        "schema": 1,
        "command": "opnorm",
        "space": space_json(&template.space),
        "factor": factor,
        "trials": trials,
        "lower_bound": lower,
        "upper_bound": upper,
        "norm_bound": template.base.norm_bound(&template.space, span),
        "deviation_bound": template.base.deviation_bound(&template.space, span),
    }))?;
    match upper {
        Some(u) => println!("opnorm: empirical {lower:.6} ≤ analytic {u:.6}"),
        None => println!("opnorm: empirical {lower:.6} (no analytic bound in this norm)"),
    }
    Ok(())
}

fn cmd_invert(ctx: &Ctx) -> Result<(), Failure> {
    let (template, seed) = ctx
        .problem
        .template(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let max_terms = ctx.opts.terms.unwrap_or(500);
    let h = neumann_inverse(&template, &seed, ctx.opts.tol, max_terms)
        .map_err(Failure::from_error)?;
    let forward = falpha_operator(&template, &h).map_err(Failure::from_error)?;
    let residual = forward.max_abs_diff(&seed);
    write_curve(
        &ctx.out_path(".csv"),
        (0..h.len()).map(|j| (h.node(j), h.values()[j])),
    )?;
    ctx.write_report(&json!({
        "schema": 1,
        "command": "invert",
        "space": space_json(&template.space),
        "tol": ctx.opts.tol,
        "round_trip_residual_sup": residual,
    }))?;
    println!("invert: round-trip residual {residual:.3e}");
    Ok(())
}

fn cmd_basis(ctx: &Ctx) -> Result<(), Failure> {
    let (template, seed) = ctx
        .problem
        .template(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let count = ctx.opts.terms.unwrap_or(16).max(1);
    let level = template.space.derivative_order();
    let m = ctx.problem.grid_level(ctx.opts.grid_level);
    let mut ladder: BasisLadder = haar_system(count, m);
    for _ in 0..level {
        ladder = lift_ladder(&ladder, count).map_err(Failure::from_error)?;
    }
    let fb = fractalize_basis(&ladder, &template).map_err(Failure::from_error)?;
    for n in 1..=fb.len() {
        let el = fb.element(n);
        write_curve(
            &ctx.out_path(&format!(".element_{n:03}.csv")),
            (0..el.len()).map(|j| (el.node(j), el.values()[j])),
        )?;
    }
    let tol = if ctx.opts.tol < 1e-9 { 1e-9 } else { ctx.opts.tol };
    let (_, errors) = fb
        .reconstruct(&seed, count, tol)
        .map_err(Failure::from_error)?;
    ctx.write_report(&json!({
        "schema": 1,
        "command": "basis",
        "level": level,
        "count": count,
        "template": {
            "knots": template.partition.knots(),
            "base": template.base.name(),
            "space": space_json(&template.space),
        },
        "errors_by_n": errors,
    }))?;
    println!(
        "basis: {count} elements at level {level}; final reconstruction error {:.3e}",
        errors.last().copied().unwrap_or(0.0)
    );
    Ok(())
}

fn cmd_attractor(ctx: &Ctx) -> Result<(), Failure> {
    let spec = ctx
        .problem
        .assemble(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let points = ctx.opts.terms.unwrap_or(100_000);
    let cloud = chaos_game(&spec, points, ctx.opts.seed).map_err(Failure::from_error)?;
    write_curve(&ctx.out_path(".csv"), cloud.iter().copied())?;
    ctx.write_report(&json!({
        "schema": 1,
        "command": "attractor",
        "points": cloud.len(),
        "seed": ctx.opts.seed,
    }))?;
    println!("attractor: {} points", cloud.len());
    Ok(())
}

fn cmd_export(ctx: &Ctx) -> Result<(), Failure> {
    let spec = ctx
        .problem
        .assemble(ctx.opts.grid_level, ctx.space_override)
        .map_err(Failure::from_error)?;
    let mut out = Vec::new();
    spec.seed
        .write_csv(&mut out)
        .map_err(|e| Failure::io(format!("serializing seed: {e}")))?;
    let path = ctx.out_path(".csv");
    fs::write(&path, out)
        .map_err(|e| Failure::io(format!("cannot write {}: {e}", path.display())))?;
    ctx.write_report(&json!({
        "schema": 1,
        "command": "export",
        "grid_level": ctx.problem.grid_level(ctx.opts.grid_level),
        "nodes": spec.seed.len(),
        "knots": spec.partition.knots(),
        "knot_snap_error": spec.knot_snap_error(),
    }))?;
    println!("export: {} nodes", spec.seed.len());
    Ok(())
}
