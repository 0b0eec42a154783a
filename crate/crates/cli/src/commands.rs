//! Subcommand implementations. Exit codes: 0 success, 1 config error,
//! 2 evaluation non-convergence, 3 verification failure.

use std::io::Write;

use serde::Serialize;

use rank_solutions::catalog::{list_catalog, CatalogEntry, NamedSolution, SolutionField};
use rank_solutions::engine::EvalOptions;
use rank_solutions::error::Error;
use rank_solutions::linalg::Vector;
use rank_solutions::rng::SplitMix64;
use rank_solutions::verify::{
    recompute_aggregates, verify_field, verify_solution, GridSpec, PointStatus,
    VerificationReport, VerifyOptions,
};
use rank_solutions::wave::{
    rank2_q2_condition, trace_condition_initial, trace_condition_symmetrized, xi_from_pi,
};

use crate::config::{OutputFormat, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGED: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

fn write_output(out: &Option<std::path::PathBuf>, content: &str) -> std::io::Result<()> {
    match out {
        Some(path) => std::fs::write(path, content),
        None => {
            line(content.trim_end_matches('\n'));
            Ok(())
        }
    }
}

/// Prints one stdout line, exiting quietly when the consumer closed the
/// pipe (e.g. `rank-solutions list | head`).
fn line(text: &str) {
    let mut stdout = std::io::stdout();
    if writeln!(stdout, "{text}").is_err() {
        std::process::exit(0);
    }
}

fn fmt_opt(v: &Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn fmt_vec(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

// ---------------------------------------------------------------- list

#[derive(Serialize)]
struct ListRow {
    id: &'static str,
    title: &'static str,
    equations: usize,
    independent: usize,
    dependent: usize,
    waves: usize,
    solutions: Vec<&'static str>,
}

pub fn cmd_list(format: &str) -> i32 {
    let rows: Vec<ListRow> = list_catalog()
        .iter()
        .map(|id| {
            let entry = rank_solutions::catalog::get_entry(id).expect("default build");
            ListRow {
                id: entry.id,
                title: entry.title,
                equations: entry.system.equations(),
                independent: entry.system.independent_vars(),
                dependent: entry.system.dependent_vars(),
                waves: entry.waves(),
                solutions: entry.solutions.iter().map(|s| s.name).collect(),
            }
        })
        .collect();
    assert!(!rows.is_empty(), "catalog can never be empty");
    match format {
        "json" => {
            line(&serde_json::to_string_pretty(&rows).unwrap());
            EXIT_OK
        }
        "text" => {
            line(&format!(
                "{:<28} {:>2} {:>2} {:>2} {:>2}  {:<24} {}",
                "entry", "l", "p", "q", "k", "solutions", "description"
            ));
            for row in rows {
                line(&format!(
                    "{:<28} {:>2} {:>2} {:>2} {:>2}  {:<24} {}",
                    row.id,
                    row.equations,
                    row.independent,
                    row.dependent,
                    row.waves,
                    row.solutions.join(","),
                    row.title
                ));
            }
            EXIT_OK
        }
        other => {
            eprintln!("config error: --format: `{other}` is neither text nor json");
            EXIT_CONFIG
        }
    }
}

// ---------------------------------------------------------------- eval

#[derive(Serialize)]
struct EvalRecord {
    x: Vector,
    u: Option<Vector>,
    r: Option<Vector>,
    det_phi1: Option<f64>,
    status: &'static str,
}

#[derive(Serialize)]
struct EvalOutput<'a> {
    command: &'static str,
    entry: &'static str,
    solution: &'static str,
    grid: &'a GridSpec,
    records: Vec<EvalRecord>,
}

pub fn cmd_eval(config: &RunConfig) -> i32 {
    let entry = &config.entry;
    let solution = entry.primary();
    let opts = EvalOptions::default().with_newton_tol(config.tol.unwrap_or(1e-12));
    let mut records = Vec::with_capacity(config.grid.total_points());
    let mut failures = 0usize;
    for x in config.grid.points() {
        let record = match &solution.field {
            SolutionField::Implicit(sol) => match sol.evaluate(&x, &opts) {
                Ok(eval) => EvalRecord {
                    x,
                    u: Some(eval.u),
                    r: Some(eval.r),
                    det_phi1: Some(eval.phi1_det),
                    status: PointStatus::Ok.as_str(),
                },
                Err(err) => {
                    failures += 1;
                    EvalRecord {
                        x,
                        u: None,
                        r: None,
                        det_phi1: None,
                        status: PointStatus::from_error(&err).as_str(),
                    }
                }
            },
            SolutionField::Explicit { eval, .. } => match eval(&x) {
                Ok(u) => EvalRecord {
                    x,
                    u: Some(u),
                    r: None,
                    det_phi1: None,
                    status: PointStatus::Ok.as_str(),
                },
                Err(err) => {
                    failures += 1;
                    EvalRecord {
                        x,
                        u: None,
                        r: None,
                        det_phi1: None,
                        status: PointStatus::from_error(&err).as_str(),
                    }
                }
            },
        };
        records.push(record);
    }

    let content = match config.format {
        OutputFormat::Json => {
            let out = EvalOutput {
                command: "eval",
                entry: entry.id,
                solution: solution.name,
                grid: &config.grid,
                records,
            };
            serde_json::to_string_pretty(&out).unwrap() + "\n"
        }
        OutputFormat::Csv => {
            let q = solution.field.components();
            let k = entry.waves();
            let mut header: Vec<String> =
                entry.system.x_names().iter().cloned().collect();
            header.extend((1..=q).map(|i| format!("u{i}")));
            header.extend((1..=k).map(|i| format!("r{i}")));
            header.push("det_phi1".into());
            header.push("status".into());
            let mut lines = vec![header.join(",")];
            for rec in &records {
                let mut cells = fmt_vec(&rec.x);
                match &rec.u {
                    Some(u) => cells.extend(fmt_vec(u)),
                    None => cells.extend(std::iter::repeat_n(String::new(), q)),
                }
                match &rec.r {
                    Some(r) => cells.extend(fmt_vec(r)),
                    None => cells.extend(std::iter::repeat_n(String::new(), k)),
                }
                cells.push(fmt_opt(&rec.det_phi1));
                cells.push(rec.status.to_string());
                lines.push(cells.join(","));
            }
            lines.join("\n") + "\n"
        }
    };
    if let Err(e) = write_output(&config.out, &content) {
        eprintln!("config error: --out: {e}");
        return EXIT_CONFIG;
    }
    if failures > 0 {
        EXIT_NONCONVERGED
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------- verify

#[derive(Serialize)]
struct ExtraCheckOutcome {
    name: &'static str,
    max: f64,
    tol: f64,
    pass: bool,
}

#[derive(Serialize)]
struct SolutionReport {
    name: &'static str,
    #[serde(flatten)]
    report: VerificationReport,
    extra_checks: Vec<ExtraCheckOutcome>,
}

#[derive(Serialize)]
struct VerifyOutput<'a> {
    command: &'static str,
    entry: &'static str,
    grid: &'a GridSpec,
    solutions: Vec<SolutionReport>,
}

/// Grid verification of a closed-form field: residuals plus side conditions
/// against the entry's leading frame.
fn verify_explicit(
    entry: &CatalogEntry,
    solution: &NamedSolution,
    grid: &GridSpec,
    fd_step: f64,
) -> VerificationReport {
    let eval = match &solution.field {
        SolutionField::Explicit { eval, .. } => eval.clone(),
        _ => unreachable!("verify_explicit on implicit solution"),
    };
    let frame = entry
        .families
        .first()
        .and_then(|(_, fam)| xi_from_pi(fam, &vec![0.0; fam.dependent_vars()], 1e-10).ok());
    let opts = VerifyOptions {
        fd_step,
        point_cap: usize::MAX,
        ..VerifyOptions::default()
    };
    verify_field(&entry.system, |y| eval(y), frame.as_ref(), grid, &opts)
        .expect("grid and system dimensions were validated at config time")
}

pub fn cmd_verify(config: &RunConfig) -> i32 {
    let entry = &config.entry;
    let residual_gate = config.tol.unwrap_or(entry.tol.max_residual);
    let constraint_gate = config.tol.unwrap_or(entry.tol.max_constraint);
    let mut solution_reports = Vec::new();
    let mut any_failed_points = false;
    let mut all_within = true;

    for solution in &entry.solutions {
        let report = match &solution.field {
            SolutionField::Implicit(sol) => {
                let opts = VerifyOptions {
                    fd_step: config.fd_step,
                    eval: EvalOptions::default().with_newton_tol(entry.tol.newton_tol),
                    point_cap: usize::MAX, // cap enforced at config time
                    ..VerifyOptions::default()
                };
                match verify_solution(sol, &config.grid, &opts) {
                    Ok(r) => r,
                    Err(e) => {
                        eprintln!("config error: {e}");
                        return EXIT_CONFIG;
                    }
                }
            }
            SolutionField::Explicit { .. } => {
                verify_explicit(entry, solution, &config.grid, config.fd_step)
            }
        };

        let mut extra_outcomes = Vec::new();
        for check in &solution.extra_checks {
            let mut worst: f64 = 0.0;
            for x in config.grid.points() {
                if let Ok(v) = (check.residual)(&x) {
                    worst = worst.max(v.abs());
                }
            }
            let pass = worst <= check.tol;
            if !pass {
                all_within = false;
            }
            extra_outcomes.push(ExtraCheckOutcome {
                name: check.name,
                max: worst,
                tol: check.tol,
                pass,
            });
        }

        let agg = &report.aggregates;
        debug_assert_eq!(agg.points, recompute_aggregates(&report.records).points);
        let rank_ok = agg.max_rank <= entry.waves();
        if agg.failed > 0 {
            any_failed_points = true;
        }
        if agg.max_residual > residual_gate || agg.max_constraint > constraint_gate || !rank_ok
        {
            all_within = false;
        }
        for &(eq, bound) in &entry.tol.eq_bounds {
            if agg
                .max_residual_per_eq
                .get(eq)
                .map(|v| *v > bound)
                .unwrap_or(false)
            {
                all_within = false;
            }
        }
        line(&format!(
            "solution={} max_residual={:e} max_constraint={:e} rank_ok={} points={} failed={}",
            solution.name,
            agg.max_residual,
            agg.max_constraint,
            rank_ok,
            agg.points,
            agg.failed
        ));
        solution_reports.push(SolutionReport {
            name: solution.name,
            report,
            extra_checks: extra_outcomes,
        });
    }

    let content = match config.format {
        OutputFormat::Json => {
            let out = VerifyOutput {
                command: "verify",
                entry: entry.id,
                grid: &config.grid,
                solutions: solution_reports,
            };
            serde_json::to_string_pretty(&out).unwrap() + "\n"
        }
        OutputFormat::Csv => {
            let q = entry.system.dependent_vars();
            let k = entry.waves();
            let l = entry.system.equations();
            let frame_rows = entry.system.independent_vars() - k;
            let mut lines = Vec::new();
            for sr in &solution_reports {
                let mut header: Vec<String> = vec!["solution".into()];
                header.extend(entry.system.x_names().iter().cloned());
                header.extend((1..=q).map(|i| format!("u{i}")));
                header.extend((1..=k).map(|i| format!("r{i}")));
                header.extend((1..=l).map(|i| format!("res{i}")));
                for a in 1..=frame_rows {
                    for al in 1..=q {
                        header.push(format!("con{a}_{al}"));
                    }
                }
                header.push("det_phi1".into());
                header.push("rank".into());
                header.push("status".into());
                lines.push(header.join(","));
                for rec in &sr.report.records {
                    let mut cells = vec![sr.name.to_string()];
                    cells.extend(fmt_vec(&rec.x));
                    match &rec.u {
                        Some(u) => cells.extend(fmt_vec(u)),
                        None => cells.extend(std::iter::repeat_n(String::new(), q)),
                    }
                    match &rec.r {
                        Some(r) => cells.extend(fmt_vec(r)),
                        None => cells.extend(std::iter::repeat_n(String::new(), k)),
                    }
                    match &rec.residual {
                        Some(v) => cells.extend(fmt_vec(v)),
                        None => cells.extend(std::iter::repeat_n(String::new(), l)),
                    }
                    match &rec.constraint {
                        Some(v) => cells.extend(fmt_vec(v)),
                        None => {
                            cells.extend(std::iter::repeat_n(String::new(), frame_rows * q))
                        }
                    }
                    cells.push(fmt_opt(&rec.det_phi1));
                    cells.push(rec.rank.map(|r| r.to_string()).unwrap_or_default());
                    cells.push(rec.status.as_str().to_string());
                    lines.push(cells.join(","));
                }
            }
            lines.join("\n") + "\n"
        }
    };
    if let Err(e) = write_output(&config.out, &content) {
        eprintln!("config error: --out: {e}");
        return EXIT_CONFIG;
    }
    if any_failed_points {
        EXIT_NONCONVERGED
    } else if !all_within {
        EXIT_VERIFY_FAILED
    } else {
        EXIT_OK
    }
}

// ---------------------------------------------------------------- trace-check

#[derive(Serialize)]
struct TraceRecord {
    solution: &'static str,
    kind: &'static str,
    mu: usize,
    slots: Vec<usize>,
    residual: f64,
}

#[derive(Serialize)]
struct TraceOutput {
    command: &'static str,
    entry: &'static str,
    seed: u64,
    samples: usize,
    tol: f64,
    max_residual: f64,
    pass: bool,
    records: Vec<TraceRecord>,
}

pub fn cmd_trace_check(config: &RunConfig) -> i32 {
    let entry = &config.entry;
    let tol = config.tol.unwrap_or(entry.tol.max_trace);
    let samples = 100usize;
    let mut rng = SplitMix64::new(config.seed);
    let mut records = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut checked_any = false;

    for solution in &entry.solutions {
        let sol = match &solution.field {
            SolutionField::Implicit(s) => s,
            _ => continue,
        };
        let r_box = match &solution.r_sample_box {
            Some(b) => b,
            None => continue,
        };
        checked_any = true;
        let q = sol.system().dependent_vars();
        let k = sol.family().waves();
        let s_max = q.saturating_sub(1).min(k.saturating_sub(1)).max(1);
        let determined_pair = q == 2 && k == 2 && sol.system().equations() == 2;
        for _ in 0..samples {
            let r = rng.point_in(r_box.bounds());
            let initial = match trace_condition_initial(
                sol.system(),
                sol.family(),
                sol.profile(),
                &r,
                tol,
            ) {
                Ok(rep) => rep,
                Err(Error::Domain(_)) => continue,
                Err(e) => {
                    eprintln!("config error: trace sampling failed: {e}");
                    return EXIT_CONFIG;
                }
            };
            for res in &initial.residuals {
                max_residual = max_residual.max(res.value.abs());
                records.push(TraceRecord {
                    solution: solution.name,
                    kind: "initial",
                    mu: res.mu,
                    slots: res.slots.clone(),
                    residual: res.value,
                });
            }
            let sym = trace_condition_symmetrized(
                sol.system(),
                sol.family(),
                sol.profile(),
                &r,
                s_max,
                tol,
            )
            .expect("symmetrized trace after initial succeeded");
            for res in &sym.residuals {
                max_residual = max_residual.max(res.value.abs());
                records.push(TraceRecord {
                    solution: solution.name,
                    kind: "symmetrized",
                    mu: res.mu,
                    slots: res.slots.clone(),
                    residual: res.value,
                });
            }
            if determined_pair {
                let u = sol.profile().value(&r).expect("sampled r is in-domain");
                let r2 = rank2_q2_condition(sol.system(), sol.family(), &u, tol)
                    .expect("rank-2 condition on a q=k=2 pair");
                for res in &r2.residuals {
                    max_residual = max_residual.max(res.value.abs());
                    records.push(TraceRecord {
                        solution: solution.name,
                        kind: "rank2",
                        mu: res.mu,
                        slots: res.slots.clone(),
                        residual: res.value,
                    });
                }
            }
        }
    }

    if !checked_any {
        line("max_trace=0e0 samples=0 pass=true (no implicit solutions registered)");
        return EXIT_OK;
    }
    let pass = max_residual <= tol;
    let content = match config.format {
        OutputFormat::Json => {
            let out = TraceOutput {
                command: "trace-check",
                entry: entry.id,
                seed: config.seed,
                samples,
                tol,
                max_residual,
                pass,
                records,
            };
            serde_json::to_string_pretty(&out).unwrap() + "\n"
        }
        OutputFormat::Csv => {
            let mut lines = vec!["solution,kind,mu,slots,residual".to_string()];
            for rec in &records {
                lines.push(format!(
                    "{},{},{},{},{}",
                    rec.solution,
                    rec.kind,
                    rec.mu,
                    rec.slots
                        .iter()
                        .map(|s| s.to_string())
                        .collect::<Vec<_>>()
                        .join("+"),
                    rec.residual
                ));
            }
            lines.join("\n") + "\n"
        }
    };
    if let Err(e) = write_output(&config.out, &content) {
        eprintln!("config error: --out: {e}");
        return EXIT_CONFIG;
    }
    line(&format!("max_trace={max_residual:e} samples={samples} pass={pass}"));
    if pass {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    }
}
