use std::collections::BTreeMap;
use std::fmt;

use anyhow::{anyhow, bail, Result};
use nalgebra::DMatrix;
use serde::Serialize;
use serde_json::{json, Value};
use tslyap::conditions::ConditionSpec;
use tslyap::lmi::{Assignment, LmiProblem};
use tslyap::model::FuzzyModel;
use tslyap::regions::{largest_sublevel, DaEstimate, LyapunovFn, RegionSpec};
use tslyap::reproduce::{Mode, Reproduction, CRITERIA};
use tslyap::sdp::{solve, FeasibilityVerdict, MarginReport, SolverStats, VerdictStatus};
use tslyap::search::{bisect_hyper, compare_sweeps, sweep, sweep_svg, HyperAxis, SweepAxis};
use tslyap::verify::{integrate, validate_da, IntegratorConfig};

use crate::args::{
    CheckArgs, ConditionArgs, DaArgs, MaximizeArgs, ModelArgs, ReproduceArgs, SolverArgs, SweepArgs, ValidateArgs,
};
use crate::manifest::Run;

/// Bad flags or flag combinations; mapped to the usage exit code.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(r: Result<T>) -> Result<T> {
    r.map_err(|e| anyhow!(UsageError(format!("{e:#}"))))
}

pub fn status_code(status: VerdictStatus) -> u8 {
    match status {
        VerdictStatus::Feasible => 0,
        VerdictStatus::Infeasible => 1,
        VerdictStatus::Inconclusive => 2,
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn named_variables(problem: &LmiProblem, asg: &Assignment) -> BTreeMap<String, Vec<Vec<f64>>> {
    problem
        .variables()
        .iter()
        .filter_map(|v| asg.get(&v.id).map(|m| (v.name.clone(), rows(m))))
        .collect()
}

#[derive(Serialize)]
struct CertificateDoc<'a> {
    status: VerdictStatus,
    condition: &'a ConditionSpec,
    margin: f64,
    variables: Option<BTreeMap<String, Vec<Vec<f64>>>>,
    margins: Option<&'a MarginReport>,
    stats: &'a SolverStats,
    diagnostic: Option<&'a String>,
}

fn certificate_doc<'a>(spec: &'a ConditionSpec, problem: &LmiProblem, v: &'a FeasibilityVerdict) -> CertificateDoc<'a> {
    CertificateDoc {
        status: v.status,
        condition: spec,
        margin: problem.margin(),
        variables: v.certificate.as_ref().map(|c| named_variables(problem, c)),
        margins: v.margins.as_ref(),
        stats: &v.stats,
        diagnostic: v.diagnostic.as_ref(),
    }
}

fn record_setup(run: &mut Run, model: &ModelArgs, spec: Option<&ConditionSpec>, solver: &SolverArgs) {
    let m = run.manifest_mut();
    m.fixture = Some(model.fixture.clone());
    m.params = json!(model.params());
    if let Some(s) = spec {
        m.condition = json!(s.kind);
        m.hyperparameters = json!({ "hyper": s.hyper, "margin": s.margin });
    }
    m.solver = json!(solver.options());
}

fn print_verdict(spec: &ConditionSpec, problem: &LmiProblem, v: &FeasibilityVerdict) {
    println!("condition: {} {:?}", spec.kind, spec.hyper);
    println!("verdict:   {:?}", v.status);
    println!("margin:    {:.3e}", problem.margin());
    if let Some(m) = &v.margins {
        println!("worst slack: {:.3e} over {} constraints", m.worst_slack(), m.constraints.len());
    }
    println!(
        "solver:    {} iterations, {} attempts, {:.3}s",
        v.stats.iterations, v.stats.attempts, v.stats.seconds
    );
    if let Some(d) = &v.diagnostic {
        println!("note:      {d}");
    }
}

pub fn check(args: &CheckArgs) -> Result<u8> {
    let model = usage(args.model.build())?;
    let spec = usage(args.condition.spec_with(model.rules(), None))?;
    let problem = usage(spec.build(&model).map_err(Into::into))?;
    let mut run = Run::new(&args.out.out, "check")?;
    record_setup(&mut run, &args.model, Some(&spec), &args.solver);
    let v = solve(&problem, &args.solver.options());
    print_verdict(&spec, &problem, &v);
    let path = run.write_json("certificate.json", &certificate_doc(&spec, &problem, &v))?;
    println!("certificate: {}", path.display());
    run.finish()?;
    Ok(status_code(v.status))
}

fn default_hi(axis: HyperAxis) -> f64 {
    match axis {
        HyperAxis::Phi => 8.0,
        HyperAxis::B => 1.0,
        HyperAxis::Eta => 2.0,
    }
}

pub fn maximize(args: &MaximizeArgs) -> Result<u8> {
    let model = usage(args.model.build())?;
    let kind = usage(args.condition.kind())?;
    let axis = match &args.axis {
        Some(a) => usage(a.parse::<HyperAxis>().map_err(Into::into))?,
        None => HyperAxis::natural(kind).ok_or_else(|| anyhow!(UsageError(format!("{kind} has no hyperparameter"))))?,
    };
    let hi = args.hi.unwrap_or(default_hi(axis));
    let spec = usage(args.condition.spec_with(model.rules(), Some((axis.name(), hi))))?;
    let mut run = Run::new(&args.out.out, "maximize")?;
    record_setup(&mut run, &args.model, Some(&spec), &args.solver);
    run.manifest_mut().settings = json!({ "axis": axis, "lo": args.lo, "hi": hi, "tol": args.tol });
    let res = match bisect_hyper(&model, &spec, axis, args.lo, hi, args.tol, &args.solver.options()) {
        Ok(r) => r,
        Err(tslyap::Error::NoFeasibleBracket { lo }) => {
            println!("{kind}: not feasible at the lower end {axis} = {lo}");
            run.write_json("maximize.json", &json!({ "feasible": false, "axis": axis, "lo": lo }))?;
            run.finish()?;
            return Ok(1);
        }
        Err(e) => return usage(Err(e.into())),
    };
    let found = res.best_certificate.is_some();
    if found {
        println!("{axis}* = {:.6} ({kind}, bracket [{:.6}, {:.6}], {} solves)", res.best, res.lo, res.hi, res.trace.len());
        if res.saturated {
            println!("note: still feasible at the top of the search range");
        }
    } else {
        println!("{kind}: no feasible {axis} found in ({}, {hi}]", args.lo);
    }
    let certificate = match (&res.best_spec, &res.best_certificate) {
        (Some(s), Some(c)) => Some(json!({
            "condition": s,
            "variables": named_variables(&s.build(&model)?, c),
        })),
        _ => None,
    };
    run.write_json("maximize.json", &json!({ "feasible": found, "result": res, "certificate": certificate }))?;
    run.finish()?;
    Ok(if found { 0 } else { 1 })
}

fn sweep_axes(args: &SweepArgs) -> Result<[SweepAxis; 2]> {
    let defaults = match args.model.fixture.as_str() {
        "example2" => Some((("a", -10.0, 0.0), ("b", 0.0, 200.0))),
        _ => None,
    };
    let pick = |given: &Option<crate::args::AxisSpec>, default: Option<(&str, f64, f64)>, count: usize, flag: &str| {
        match (given, default) {
            (Some(a), _) => Ok(SweepAxis::new(&a.name, a.lo, a.hi, count)),
            (None, Some((n, lo, hi))) => Ok(SweepAxis::new(n, lo, hi, count)),
            (None, None) => Err(anyhow!(UsageError(format!("--{flag} is required for `{}`", args.model.fixture)))),
        }
    };
    Ok([
        pick(&args.x_axis, defaults.map(|d| d.0), args.grid.0, "x-axis")?,
        pick(&args.y_axis, defaults.map(|d| d.1), args.grid.1, "y-axis")?,
    ])
}

pub fn sweep_cmd(args: &SweepArgs) -> Result<u8> {
    let axes = sweep_axes(args)?;
    let mut base = args.model.params();
    for a in &axes {
        base.insert(a.name.clone(), a.lo);
    }
    let probe = usage(tslyap::model::fixture(&args.model.fixture, &base).map_err(Into::into))?;
    let rules = probe.rules();
    let spec = usage(args.condition.spec_with(rules, None))?;
    let against = match &args.against {
        Some(kind) => {
            let other = ConditionArgs {
                condition: kind.clone(),
                phi: args.against_phi.clone(),
                b_bound: args.against_b_bound.clone(),
                eta: args.against_eta,
                margin: args.condition.margin,
            };
            Some(usage(other.spec_with(rules, None))?)
        }
        None => None,
    };
    for a in &axes {
        base.remove(&a.name);
    }
    let mut run = Run::new(&args.out.out, "sweep")?;
    record_setup(&mut run, &args.model, Some(&spec), &args.solver);
    run.manifest_mut().grid = Some(vec![args.grid.0, args.grid.1]);
    run.manifest_mut().settings = json!({ "axes": axes, "against": against });

    let opts = args.solver.options();
    let res = usage(sweep(&args.model.fixture, &base, axes.clone(), &spec, &opts).map_err(Into::into))?;
    println!(
        "{}: {}/{} cells Feasible",
        spec.kind,
        res.feasible_count(),
        res.cell_count()
    );
    run.write_text("sweep.csv", &res.to_csv())?;
    let mut summary = json!({ "condition": spec, "axes": axes, "verdicts": codes(&res.verdicts) });
    let other = match &against {
        Some(o) => {
            let other = sweep(&args.model.fixture, &base, axes, o, &opts)?;
            let report = compare_sweeps(&res, &other)?;
            println!("{}: {}/{} cells Feasible", o.kind, other.feasible_count(), other.cell_count());
            println!(
                "relation: {:?} ({} cells only {}, {} only {})",
                report.relation,
                report.a_in_b.violations.len(),
                spec.kind,
                report.b_in_a.violations.len(),
                o.kind
            );
            run.write_text("against.csv", &other.to_csv())?;
            summary["against"] = json!({ "condition": o, "verdicts": codes(&other.verdicts), "comparison": report });
            Some(other)
        }
        None => None,
    };
    run.write_svg("sweep.svg", &sweep_svg(&res, other.as_ref()))?;
    run.write_json("sweep.json", &summary)?;
    let manifest = run.finish()?;
    println!("artifacts in {}", manifest.parent().map_or_else(String::new, |p| p.display().to_string()));
    Ok(0)
}

fn codes(v: &[Vec<VerdictStatus>]) -> Vec<String> {
    v.iter().map(|row| row.iter().map(|s| s.code()).collect()).collect()
}

struct DaRun {
    model: FuzzyModel,
    spec: ConditionSpec,
    estimate: DaEstimate,
}

/// Solves, extracts `V` and computes the sublevel estimate; `Err(code)` when
/// the condition has no certificate.
fn build_da(args: &DaArgs, run: &mut Run) -> Result<std::result::Result<DaRun, u8>> {
    let model = usage(args.model.build())?;
    let spec = usage(args.condition.spec_with(model.rules(), None))?;
    let resolution = match model.dim() {
        1 => vec![args.grid.0],
        2 => vec![args.grid.0, args.grid.1],
        n => bail!(UsageError(format!("grid estimates support 1 or 2 states, model has {n}"))),
    };
    record_setup(run, &args.model, Some(&spec), &args.solver);
    run.manifest_mut().grid = Some(resolution.clone());
    let problem = spec.build(&model)?;
    let v = solve(&problem, &args.solver.options());
    print_verdict(&spec, &problem, &v);
    run.write_json("certificate.json", &certificate_doc(&spec, &problem, &v))?;
    let cert = match (&v.status, &v.certificate) {
        (VerdictStatus::Feasible, Some(c)) => c,
        _ => {
            println!("no certificate, so no domain-of-attraction estimate");
            return Ok(Err(status_code(v.status)));
        }
    };
    let lyap = spec.lyapunov(&problem, cert)?;
    let estimate = largest_sublevel(&model, &lyap, &spec.validity_region(), &resolution)?;
    println!(
        "level c* = {:.6e}, {} of {} grid points inside{}",
        estimate.level,
        estimate.inside_count,
        estimate.grid.len(),
        if estimate.approximate { " (finite-difference gradients)" } else { "" }
    );
    Ok(Ok(DaRun { model, spec, estimate }))
}

#[derive(Serialize)]
struct DaDoc<'a> {
    condition: &'a ConditionSpec,
    lyapunov: &'a LyapunovFn,
    level: f64,
    region: &'a RegionSpec,
    grid: &'a tslyap::regions::Grid,
    inside_count: usize,
    approximate: bool,
    boundary_samples: &'a [Vec<f64>],
}

fn write_da(run: &mut Run, da: &DaRun) -> Result<()> {
    let e = &da.estimate;
    run.write_json(
        "da.json",
        &DaDoc {
            condition: &da.spec,
            lyapunov: &e.lyapunov,
            level: e.level,
            region: &e.region,
            grid: &e.grid,
            inside_count: e.inside_count,
            approximate: e.approximate,
            boundary_samples: &e.boundary_samples,
        },
    )?;
    run.write_text("da.csv", &e.to_csv())?;
    if da.model.dim() == 2 {
        run.write_svg("da.svg", &e.to_svg()?)?;
    }
    Ok(())
}

pub fn da(args: &DaArgs) -> Result<u8> {
    let mut run = Run::new(&args.out.out, "da")?;
    let code = match build_da(args, &mut run)? {
        Ok(da) => {
            write_da(&mut run, &da)?;
            0
        }
        Err(code) => code,
    };
    let manifest = run.finish()?;
    println!("artifacts in {}", manifest.parent().map_or_else(String::new, |p| p.display().to_string()));
    Ok(code)
}

pub fn validate(args: &ValidateArgs) -> Result<u8> {
    if !(args.dt > 0.0 && args.horizon > 0.0 && args.level_factor > 0.0) {
        bail!(UsageError("--dt, --horizon and --level-factor must be positive".into()));
    }
    let mut run = Run::new(&args.da.out.out, "validate")?;
    let da = match build_da(&args.da, &mut run)? {
        Ok(da) => da,
        Err(code) => {
            run.finish()?;
            return Ok(code);
        }
    };
    write_da(&mut run, &da)?;
    let cfg = IntegratorConfig {
        dt: args.dt,
        horizon: args.horizon,
        converge_tol: args.converge_tol,
        ..Default::default()
    };
    run.manifest_mut().settings = json!({
        "samples": args.samples,
        "integrator": cfg,
        "level_factor": args.level_factor,
        "seed": args.seed,
    });
    let level = da.estimate.level * args.level_factor;
    let audit = validate_da(&da.model, &da.estimate, Some(level), args.samples, &cfg, args.seed)?;
    println!(
        "audit: {} samples, {:.1}% converged, {:.1}% monotone, {} left the box, max one-step V change {:.3e}",
        audit.samples,
        100.0 * audit.converged_fraction,
        100.0 * audit.monotone_fraction,
        audit.left_region,
        audit.max_v_increase
    );
    let mut doc = serde_json::to_value(&audit)?;
    doc["passed"] = Value::Bool(audit.passed());
    run.write_json("audit.json", &doc)?;
    if let Some(text) = &args.trajectory {
        let x0 = usage(crate::args::parse_list(text, da.model.dim(), "trajectory"))?;
        let full = IntegratorConfig { sample_stride: 10, ..cfg };
        let report = integrate(&da.model, &x0, Some(&da.estimate.lyapunov), &full)?;
        run.write_text("trajectory.csv", &report.to_csv())?;
    }
    run.finish()?;
    Ok(if audit.passed() { 0 } else { 1 })
}

pub fn reproduce(args: &ReproduceArgs) -> Result<u8> {
    if args.list {
        for (id, title) in CRITERIA {
            println!("{id}. {title}");
        }
        return Ok(0);
    }
    let mode = if args.full { Mode::Full } else { Mode::Quick };
    let ids: Vec<u8> = if args.only.is_empty() { (1..=7).collect() } else { args.only.clone() };
    if let Some(bad) = ids.iter().find(|i| !(1..=7).contains(*i)) {
        bail!(UsageError(format!("no criterion {bad}; see --list")));
    }
    let mut run = Run::new(&args.out.out, "reproduce")?;
    run.manifest_mut().settings = json!({ "mode": mode, "criteria": ids });
    let mut repro = Reproduction::new(mode);
    run.manifest_mut().solver = json!(repro.options);
    let mut outcomes = Vec::new();
    for id in ids {
        let o = repro.run(id);
        println!("{o}");
        outcomes.push(o);
    }
    println!();
    for o in &outcomes {
        println!("criterion {}: {}", o.id, if o.passed() { "PASS" } else { "FAIL" });
    }
    let all = outcomes.iter().all(|o| o.passed());
    run.write_json("reproduce.json", &json!({ "mode": mode, "passed": all, "criteria": outcomes }))?;
    run.finish()?;
    Ok(if all { 0 } else { 1 })
}
