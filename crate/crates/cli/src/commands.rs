//! The five subcommands. Sweep items (one per degree, or degree x grid)
//! run in the worker pool; every item writes its own files atomically and
//! each worker re-instantiates the problem, so nothing unsendable crosses
//! threads. Summary lines print after collection, in item order.

use std::f64::consts::PI;
use std::path::PathBuf;

use anyhow::anyhow;
use serde_json::json;

use radau_dae::analysis::{self, Complex64, ErrorClass, Norm, PointwiseErrors, SampleSet};
use radau_dae::basis;
use radau_dae::dae_model::{register_builtin_problems, ProblemSpec};
use radau_dae::predictor::Counters;
use radau_dae::stepper::{self, GridSpec};

use crate::config::{
    instantiate, load_problem, parse_grid, parse_grids, parse_norms, runtime, usage, worker_cap,
    Failure, NewtonFlags,
};
use crate::output::{fmt_float, write_atomic, write_json, Csv};
use crate::pool::run_indexed;

const SETS: [(SampleSet, &str); 2] = [(SampleSet::Nodes, "node"), (SampleSet::Local, "local")];

#[derive(clap::Args, Debug)]
pub struct SolveArgs {
    /// Problem: registry name plus optional comma-separated key=value pairs
    /// (e.g. flame,delta=1e-4).
    #[arg(long)]
    pub problem: String,
    /// Polynomial degrees to run, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub degree: Vec<usize>,
    /// Grid as comma-chained contiguous start:end:cells segments.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    /// Local-solution samples per cell.
    #[arg(long, default_value_t = 4)]
    pub subnodes: usize,
    /// Norms in the global-error summary, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "L1,L2,Linf,final")]
    pub norms: Vec<String>,
    #[command(flatten)]
    pub newton: NewtonFlags,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn solve(args: &SolveArgs) -> Result<(), Failure> {
    let (spec, probe) = load_problem(&args.problem)?;
    let grid = parse_grid(&args.grid)?;
    let norms = parse_norms(&args.norms)?;
    if args.subnodes == 0 {
        return Err(usage(anyhow!("--subnodes must be at least 1")));
    }
    let opts = args.newton.options();
    let workers = worker_cap()?;
    let has_exact = probe.has_exact();

    struct Item {
        stem: String,
        files: Vec<String>,
        completed: usize,
        iterations: u64,
        failure: Option<String>,
    }

    let results = run_indexed(args.degree.len(), workers, |i| -> Result<Item, Failure> {
        let degree = args.degree[i];
        let problem = instantiate(&spec);
        let tables = basis::build_tables(degree).map_err(usage)?;
        // Span or degree problems are configuration mistakes, not failures.
        let report = stepper::solve(&problem, &grid, degree, &opts).map_err(usage)?;
        let stem = format!("{}_N{}", spec.name, degree);
        let mut files = Vec::new();

        let mut header = vec!["kind".to_owned(), "t".to_owned()];
        for c in 0..problem.d_u() {
            header.push(format!("u{c}"));
        }
        for c in 0..problem.d_v() {
            header.push(format!("v{c}"));
        }
        let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
        let times = grid.node_times();
        for n in 0..=report.completed_cells() {
            let mut row = vec!["node".to_owned(), fmt_float(times[n])];
            row.extend(report.node_u_at(n).iter().copied().map(fmt_float));
            row.extend(report.node_v_at(n).iter().copied().map(fmt_float));
            csv.row(row);
        }
        for sample in stepper::tabulate_local(&report, &tables, args.subnodes) {
            let mut row = vec!["local".to_owned(), fmt_float(sample.t)];
            row.extend(sample.u.iter().copied().map(fmt_float));
            row.extend(sample.v.iter().copied().map(fmt_float));
            csv.row(row);
        }
        let name = format!("{stem}.trajectory.csv");
        write_atomic(&args.out_dir.join(&name), &csv.into_bytes())?;
        files.push(name);

        let mut globals = json!(null);
        let mut floor = json!(null);
        if has_exact {
            let errors = analysis::pointwise_errors(&problem, &report, &tables, args.subnodes)
                .map_err(runtime)?;
            let mut header = vec!["kind".to_owned(), "t".to_owned(), "eps_u".to_owned()];
            if problem.d_v() > 0 {
                header.push("eps_v".to_owned());
            }
            for label in errors.g_labels() {
                header.push(format!("eps_{label}"));
            }
            let mut csv = Csv::new(&header.iter().map(String::as_str).collect::<Vec<_>>());
            for (kind, samples) in [("node", errors.node_samples()), ("local", errors.local_samples())]
            {
                for s in samples {
                    let mut row = vec![kind.to_owned(), fmt_float(s.t), fmt_float(s.eps_u)];
                    if problem.d_v() > 0 {
                        row.push(fmt_float(s.eps_v));
                    }
                    row.extend(s.eps_g.iter().copied().map(fmt_float));
                    csv.row(row);
                }
            }
            let name = format!("{stem}.errors.csv");
            write_atomic(&args.out_dir.join(&name), &csv.into_bytes())?;
            files.push(name);
            globals = globals_json(&errors, problem.d_v(), &norms);
            floor = json!(errors.precision_floor());
        }

        let counters = report.counters();
        let failure = report
            .failures()
            .first()
            .map(|(cell, e)| format!("{stem}: cell {cell}: {e}"));
        let sidecar = json!({
            "command": "solve",
            "config": {
                "problem": problem_json(&args.problem, &spec),
                "degrees": args.degree,
                "degree": degree,
                "grid": grid_json(&args.grid, &grid),
                "subnodes": args.subnodes,
                "norms": norms.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
                "newton": newton_json(&args.newton),
                "threads": workers,
                "out_dir": args.out_dir.display().to_string(),
            },
            "outcome": {
                "completed_cells": report.completed_cells(),
                "cell_count": grid.cell_count(),
                "counters": counters_json(&counters),
                "global_errors": globals,
                "precision_floor": floor,
                "failure": failure,
            },
        });
        let name = format!("{stem}.run.json");
        write_json(&args.out_dir.join(&name), &sidecar)?;
        files.push(name);

        Ok(Item {
            stem,
            files,
            completed: report.completed_cells(),
            iterations: counters.newton_iterations,
            failure,
        })
    });

    let mut first_failure = None;
    for item in results {
        let item = item?;
        println!(
            "{}: {}/{} cells, {} Newton iterations -> {}",
            item.stem,
            item.completed,
            grid.cell_count(),
            item.iterations,
            item.files.join(", ")
        );
        if first_failure.is_none() {
            first_failure = item.failure;
        }
    }
    match first_failure {
        Some(msg) => Err(runtime(anyhow!("solver did not converge: {msg}"))),
        None => Ok(()),
    }
}

#[derive(clap::Args, Debug)]
pub struct ConvergenceArgs {
    /// Problem: registry name plus optional key=value pairs.
    #[arg(long)]
    pub problem: String,
    /// Polynomial degrees, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub degree: Vec<usize>,
    /// At least two grids, semicolon separated; each is a comma-chained
    /// start:end:cells list.
    #[arg(long, allow_hyphen_values = true)]
    pub grids: String,
    /// Local-solution samples per cell entering the local error norms.
    #[arg(long, default_value_t = 4)]
    pub subnodes: usize,
    /// Norms to fit, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "L1,L2,Linf,final")]
    pub norms: Vec<String>,
    #[command(flatten)]
    pub newton: NewtonFlags,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn convergence(args: &ConvergenceArgs) -> Result<(), Failure> {
    let (spec, probe) = load_problem(&args.problem)?;
    if !probe.has_exact() {
        return Err(usage(anyhow!(
            "problem `{}` has no exact solution to measure orders against",
            spec.name
        )));
    }
    let grids = parse_grids(&args.grids)?;
    if grids.len() < 2 {
        return Err(usage(anyhow!(
            "--grids needs at least two semicolon-separated grids"
        )));
    }
    let norms = parse_norms(&args.norms)?;
    if args.subnodes == 0 {
        return Err(usage(anyhow!("--subnodes must be at least 1")));
    }
    let opts = args.newton.options();
    let workers = worker_cap()?;
    let per_degree = grids.len();
    let d_v = probe.d_v();

    let results = run_indexed(
        args.degree.len() * per_degree,
        workers,
        |i| -> Result<(PointwiseErrors, u64), Failure> {
            let degree = args.degree[i / per_degree];
            let (grid_text, grid) = &grids[i % per_degree];
            let problem = instantiate(&spec);
            let tables = basis::build_tables(degree).map_err(usage)?;
            let report = stepper::solve(&problem, grid, degree, &opts).map_err(usage)?;
            if let Some((cell, e)) = report.failures().first() {
                return Err(runtime(anyhow!(
                    "degree {degree}, grid `{grid_text}`: cell {cell}: {e}"
                )));
            }
            let errors = analysis::pointwise_errors(&problem, &report, &tables, args.subnodes)
                .map_err(runtime)?;
            Ok((errors, report.counters().newton_iterations))
        },
    );
    let mut runs = Vec::with_capacity(args.degree.len() * per_degree);
    for r in results {
        runs.push(r?);
    }

    let mut orders = Csv::new(&[
        "N",
        "target",
        "norm",
        "fitted_p",
        "fit_residual",
        "samples_used",
        "floor_filtered",
    ]);
    let mut globals = Csv::new(&["N", "grid_index", "min_dt", "target", "norm", "error"]);
    let mut floors = Vec::new();
    for (di, &degree) in args.degree.iter().enumerate() {
        let batch = &runs[di * per_degree..(di + 1) * per_degree];
        let floor = batch
            .iter()
            .map(|(e, _)| e.precision_floor())
            .fold(0.0, f64::max);
        floors.push(floor);
        for (set, set_name) in SETS {
            for (class_name, class) in class_targets(&batch[0].0, d_v) {
                for &norm in &norms {
                    if set == SampleSet::Local && norm == Norm::Final {
                        // The final-time norm is defined for node samples only.
                        continue;
                    }
                    let target = format!("{class_name}-{set_name}");
                    let samples: Vec<(f64, f64)> = batch
                        .iter()
                        .zip(&grids)
                        .map(|((e, _), (_, g))| (g.min_dt(), e.global(set, class, norm)))
                        .collect();
                    for (gi, &(dt, err)) in samples.iter().enumerate() {
                        globals.row([
                            degree.to_string(),
                            gi.to_string(),
                            fmt_float(dt),
                            target.clone(),
                            norm.as_str().to_owned(),
                            fmt_float(err),
                        ]);
                    }
                    match analysis::fit_order(norm, &samples, floor) {
                        Ok(fit) => orders.row([
                            degree.to_string(),
                            target,
                            norm.as_str().to_owned(),
                            fmt_float(fit.fitted_p),
                            fmt_float(fit.fit_residual),
                            fit.used.to_string(),
                            fit.floor_filtered.to_string(),
                        ]),
                        // Everything at the precision floor: no slope to fit.
                        Err(analysis::AnalysisError::InsufficientData { available }) => orders
                            .row([
                                degree.to_string(),
                                target,
                                norm.as_str().to_owned(),
                                "NaN".to_owned(),
                                "NaN".to_owned(),
                                available.to_string(),
                                (samples.len() - available).to_string(),
                            ]),
                        Err(e) => return Err(runtime(anyhow!("order fit: {e}"))),
                    }
                }
            }
        }
    }
    write_atomic(&args.out_dir.join("orders.csv"), &orders.into_bytes())?;
    write_atomic(&args.out_dir.join("global_errors.csv"), &globals.into_bytes())?;

    let sidecar = json!({
        "command": "convergence",
        "config": {
            "problem": problem_json(&args.problem, &spec),
            "degrees": args.degree,
            "grids": grids
                .iter()
                .map(|(text, g)| grid_json(text, g))
                .collect::<Vec<_>>(),
            "subnodes": args.subnodes,
            "norms": norms.iter().map(|n| n.as_str()).collect::<Vec<_>>(),
            "newton": newton_json(&args.newton),
            "threads": workers,
            "out_dir": args.out_dir.display().to_string(),
        },
        "outcome": {
            "precision_floors": floors,
            "newton_iterations": runs.iter().map(|(_, it)| *it).sum::<u64>(),
        },
    });
    write_json(&args.out_dir.join("run.json"), &sidecar)?;

    for (di, &degree) in args.degree.iter().enumerate() {
        println!(
            "degree {degree}: fits over {} grids (precision floor {})",
            per_degree,
            fmt_float(floors[di])
        );
    }
    println!("wrote orders.csv, global_errors.csv, run.json");
    Ok(())
}

#[derive(clap::Args, Debug)]
pub struct NewtonTraceArgs {
    /// Problem: registry name plus optional key=value pairs.
    #[arg(long)]
    pub problem: String,
    /// Polynomial degrees, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub degree: Vec<usize>,
    /// Grid as comma-chained start:end:cells segments.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: String,
    #[command(flatten)]
    pub newton: NewtonFlags,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn newton_trace(args: &NewtonTraceArgs) -> Result<(), Failure> {
    let (spec, _) = load_problem(&args.problem)?;
    let grid = parse_grid(&args.grid)?;
    let opts = args.newton.options();
    let workers = worker_cap()?;

    struct Item {
        stem: String,
        max_iterations: usize,
        failure: Option<String>,
    }

    let results = run_indexed(args.degree.len(), workers, |i| -> Result<Item, Failure> {
        let degree = args.degree[i];
        let problem = instantiate(&spec);
        let report = stepper::solve(&problem, &grid, degree, &opts).map_err(usage)?;
        let stem = format!("{}_N{}", spec.name, degree);

        let mut csv = Csv::new(&["cell", "iteration", "neg_log10_dx"]);
        let mut max_iterations = 0;
        for (cell, trace) in report.traces().iter().enumerate() {
            max_iterations = max_iterations.max(trace.iterations());
            for (j, &inc) in trace.increments().iter().enumerate() {
                csv.row([
                    cell.to_string(),
                    (j + 1).to_string(),
                    fmt_float(-inc.log10()),
                ]);
            }
        }
        write_atomic(
            &args.out_dir.join(format!("{stem}.newton_trace.csv")),
            &csv.into_bytes(),
        )?;

        let counters = report.counters();
        let failure = report
            .failures()
            .first()
            .map(|(cell, e)| format!("{stem}: cell {cell}: {e}"));
        let sidecar = json!({
            "command": "newton-trace",
            "config": {
                "problem": problem_json(&args.problem, &spec),
                "degrees": args.degree,
                "degree": degree,
                "grid": grid_json(&args.grid, &grid),
                "newton": newton_json(&args.newton),
                "threads": workers,
                "out_dir": args.out_dir.display().to_string(),
            },
            "outcome": {
                "completed_cells": report.completed_cells(),
                "cell_count": grid.cell_count(),
                "max_iterations": max_iterations,
                "counters": counters_json(&counters),
                "failure": failure,
            },
        });
        write_json(&args.out_dir.join(format!("{stem}.run.json")), &sidecar)?;

        Ok(Item { stem, max_iterations, failure })
    });

    let mut first_failure = None;
    for item in results {
        let item = item?;
        println!(
            "{}: at most {} iterations per cell -> {}.newton_trace.csv",
            item.stem, item.max_iterations, item.stem
        );
        if first_failure.is_none() {
            first_failure = item.failure;
        }
    }
    match first_failure {
        Some(msg) => Err(runtime(anyhow!("solver did not converge: {msg}"))),
        None => Ok(()),
    }
}

#[derive(clap::Args, Debug)]
pub struct StabilityArgs {
    /// Polynomial degrees, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub degree: Vec<usize>,
    /// Raster window re0:re1:im0:im1.
    #[arg(long, default_value = "-200:0:-200:200", allow_hyphen_values = true)]
    pub window: String,
    /// Raster resolution nre:nim, at least 2 per axis.
    #[arg(long, default_value = "400:400")]
    pub resolution: String,
    /// Ray angles as multiples of pi, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1", allow_hyphen_values = true)]
    pub rays: Vec<f64>,
    /// |z| range min:max for the ray profiles, log-spaced 8 per decade;
    /// every profile additionally records z = 0.
    #[arg(long, default_value = "1e-2:1e6")]
    pub ray_range: String,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

pub fn stability(args: &StabilityArgs) -> Result<(), Failure> {
    let w: Vec<f64> = parse_numbers(&args.window, 4, "--window re0:re1:im0:im1")?;
    if !(w[0] < w[1] && w[2] < w[3]) {
        return Err(usage(anyhow!("--window needs re0 < re1 and im0 < im1")));
    }
    let r: Vec<usize> = parse_numbers(&args.resolution, 2, "--resolution nre:nim")?;
    if r.iter().any(|&n| n < 2) {
        return Err(usage(anyhow!("--resolution needs at least 2 per axis")));
    }
    let range: Vec<f64> = parse_numbers(&args.ray_range, 2, "--ray-range min:max")?;
    if !(range[0] > 0.0 && range[0] < range[1]) {
        return Err(usage(anyhow!("--ray-range needs 0 < min < max")));
    }
    let decades = (range[1] / range[0]).log10();
    let steps = (8.0 * decades).ceil() as usize;
    let workers = worker_cap()?;

    struct Item {
        degree: usize,
        max_abs: f64,
    }

    let results = run_indexed(args.degree.len(), workers, |i| -> Result<Item, Failure> {
        let degree = args.degree[i];
        let tables = basis::build_tables(degree).map_err(usage)?;
        let scan = analysis::stability_scan(&tables, (w[0], w[1]), (w[2], w[3]), (r[0], r[1]));
        let stem = format!("stability_N{degree}");

        let mut csv = Csv::new(&["re", "im", "abs_r"]);
        for (j, &im) in scan.im_values().iter().enumerate() {
            for (i, &re) in scan.re_values().iter().enumerate() {
                csv.row([fmt_float(re), fmt_float(im), fmt_float(scan.magnitude(i, j))]);
            }
        }
        write_atomic(&args.out_dir.join(format!("{stem}.raster.csv")), &csv.into_bytes())?;

        let mut csv = Csv::new(&["angle_pi", "abs_z", "re_r", "im_r", "abs_r"]);
        for &angle in &args.rays {
            // z = 0 heads every profile; R(0) = 1 for all degrees.
            for k in 0..=steps + 1 {
                let mag = if k == 0 {
                    0.0
                } else {
                    range[0] * (range[1] / range[0]).powf((k - 1) as f64 / steps as f64)
                };
                let z = Complex64::from_polar(mag, angle * PI);
                let row = match analysis::stability_function(&tables, z) {
                    Ok(rz) => [fmt_float(rz.re), fmt_float(rz.im), fmt_float(rz.norm())],
                    // A pole of R on the ray.
                    Err(_) => [
                        "NaN".to_owned(),
                        "NaN".to_owned(),
                        fmt_float(f64::INFINITY),
                    ],
                };
                let mut cells = vec![fmt_float(angle), fmt_float(mag)];
                cells.extend(row);
                csv.row(cells);
            }
        }
        write_atomic(&args.out_dir.join(format!("{stem}.rays.csv")), &csv.into_bytes())?;

        let sidecar = json!({
            "command": "stability",
            "config": {
                "degrees": args.degree,
                "degree": degree,
                "window": { "re": [w[0], w[1]], "im": [w[2], w[3]] },
                "resolution": [r[0], r[1]],
                "rays": args.rays,
                "ray_range": [range[0], range[1]],
                "threads": workers,
                "out_dir": args.out_dir.display().to_string(),
            },
            "outcome": {
                "max_abs_r": scan.max_magnitude(),
            },
        });
        write_json(&args.out_dir.join(format!("{stem}.run.json")), &sidecar)?;

        Ok(Item { degree, max_abs: scan.max_magnitude() })
    });

    for item in results {
        let item = item?;
        println!(
            "degree {}: max |R| over the window = {}",
            item.degree,
            fmt_float(item.max_abs)
        );
    }
    Ok(())
}

pub fn list_problems() -> Result<(), Failure> {
    let registry = register_builtin_problems();
    for entry in registry.entries() {
        println!("{:<28} {}", entry.name(), entry.summary());
        if !entry.params_doc().is_empty() {
            println!("{:<28} parameters: {}", "", entry.params_doc());
        }
    }
    Ok(())
}

/// Parses a colon-separated numeric tuple of fixed arity.
fn parse_numbers<T: std::str::FromStr>(
    input: &str,
    arity: usize,
    what: &str,
) -> Result<Vec<T>, Failure> {
    let parts: Vec<&str> = input.split(':').collect();
    if parts.len() != arity {
        return Err(usage(anyhow!("expected {what}, got `{input}`")));
    }
    parts
        .iter()
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|_| usage(anyhow!("bad number `{p}` in {what}")))
        })
        .collect()
}

/// Error classes present on a problem, named for CSV targets: u, v (when
/// algebraic variables exist) and one entry per labelled constraint.
fn class_targets(errors: &PointwiseErrors, d_v: usize) -> Vec<(String, ErrorClass)> {
    let mut targets = vec![("u".to_owned(), ErrorClass::U)];
    if d_v > 0 {
        targets.push(("v".to_owned(), ErrorClass::V));
    }
    for (i, label) in errors.g_labels().iter().enumerate() {
        targets.push((label.clone(), ErrorClass::G(i)));
    }
    targets
}

fn globals_json(errors: &PointwiseErrors, d_v: usize, norms: &[Norm]) -> serde_json::Value {
    let mut rows = Vec::new();
    for (set, set_name) in SETS {
        for (target, class) in class_targets(errors, d_v) {
            for &norm in norms {
                if set == SampleSet::Local && norm == Norm::Final {
                    continue;
                }
                rows.push(json!({
                    "set": set_name,
                    "target": target,
                    "norm": norm.as_str(),
                    "value": errors.global(set, class, norm),
                }));
            }
        }
    }
    json!(rows)
}

fn problem_json(spec_text: &str, spec: &ProblemSpec) -> serde_json::Value {
    json!({
        "spec": spec_text,
        "name": spec.name,
        "params": spec
            .params
            .entries()
            .iter()
            .map(|(k, v)| json!({ "key": k, "value": v }))
            .collect::<Vec<_>>(),
    })
}

fn grid_json(spec_text: &str, grid: &GridSpec) -> serde_json::Value {
    json!({
        "spec": spec_text,
        "segments": grid.segments(),
        "cells": grid.cell_count(),
        "span": [grid.span().0, grid.span().1],
    })
}

fn newton_json(flags: &NewtonFlags) -> serde_json::Value {
    json!({
        "tolerance": flags.newton_tol,
        "max_iterations": flags.newton_max_iters,
        "reduction": flags.reduction.as_str(),
    })
}

fn counters_json(c: &Counters) -> serde_json::Value {
    json!({
        "f_evals": c.f_evals,
        "g_evals": c.g_evals,
        "jacobian_evals": {
            "jf_u": c.jac_evals.jf_u,
            "jf_v": c.jac_evals.jf_v,
            "jg_u": c.jac_evals.jg_u,
            "jg_v": c.jac_evals.jg_v,
        },
        "lu_factorizations": c.lu_factorizations,
        "newton_iterations": c.newton_iterations,
    })
}
