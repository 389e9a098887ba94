//! The four subcommands.

use std::path::Path;

use rayon::prelude::*;
use symsplit::verification::{measure_convergence_order, window_trace, HalfPeriodWindow, OrderReport, WindowTrace};
use symsplit::{hamiltonian, Error, Integrator, SchemeConfig, Variant};

use crate::config::{Options, Problem};
use crate::output::{float, metadata, state_columns, tau_tag, CsvWriter};
use crate::{CliError, EXIT_OK};

const DEFAULT_TAUS: [f64; 3] = [0.2, 0.1, 0.05];
const ORDER_TOLERANCE: f64 = 0.8;
const ORDER_T_FINAL: f64 = 5.0;

/// Exponent `m` of the scaled energy error `(H − H₀)/τᵐ`.
fn exponent(variant: Variant) -> u32 {
    variant.order().unwrap_or(2) as u32
}

fn pool(opts: &Options) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs()?)
        .build()
        .map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))
}

/// Picks the error that decides the exit code: Newton divergence first.
fn worst(errors: Vec<CliError>) -> Option<CliError> {
    let mut errors = errors;
    errors.sort_by_key(|e| std::cmp::Reverse(e.exit_code()));
    errors.into_iter().next()
}

struct TraceSummary {
    steps: usize,
    max_abs_dh: f64,
    final_h: f64,
    failure: Option<Error>,
}

/// Integrates and streams rows to `path`. An integration failure leaves the
/// rows written so far plus a `# truncated` footer.
fn write_trace(path: &Path, opts: &Options, command: &str, problem: &Problem, cfg: SchemeConfig, horizon: f64) -> Result<TraceSummary, CliError> {
    let window = opts.time_window()?;
    let integ = Integrator::new(cfg, problem.potential.as_ref(), &problem.mass)?;
    let n_steps = (horizon / cfg.tau).round() as usize;
    let meta = metadata("trace", &cfg.variant.to_string(), Some(cfg.tau), &problem.label, &opts.hash(command));
    let mut csv = CsvWriter::create(path, &meta)?;
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend(state_columns(problem.x0.dim()));
    header.extend(["H", "scaledH", "newton_iters", "newton_residual"].map(String::from));
    csv.row(&header)?;

    let h0 = hamiltonian(&problem.x0, problem.potential.as_ref(), &problem.mass)?;
    let scale = cfg.tau.powi(exponent(cfg.variant) as i32);
    let slack = 1e-9 * cfg.tau;
    let mut summary = TraceSummary {
        steps: 0,
        max_abs_dh: 0.0,
        final_h: h0,
        failure: None,
    };
    let mut write_error = None;
    let result = integ.integrate(&problem.x0, n_steps, |r| {
        let h = hamiltonian(r.state, problem.potential.as_ref(), &problem.mass).unwrap_or(f64::NAN);
        summary.steps = r.step;
        summary.max_abs_dh = summary.max_abs_dh.max((h - h0).abs());
        summary.final_h = h;
        if write_error.is_some() {
            return;
        }
        if let Some((a, b)) = window {
            if r.time + slack < a || r.time > b + slack {
                return;
            }
        }
        let mut row = vec![r.step.to_string(), float(r.time)];
        row.extend(r.state.q.iter().chain(r.state.p.iter()).map(|&x| float(x)));
        row.push(float(h));
        row.push(float((h - h0) / scale));
        row.push(r.report.newton_iterations.to_string());
        row.push(float(r.report.newton_residual));
        if let Err(e) = csv.row(&row) {
            write_error = Some(e);
        }
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    if let Err(e) = result {
        csv.line(&format!("# truncated: {e}"))?;
        summary.failure = Some(e);
    }
    csv.finish()?;
    Ok(summary)
}

pub fn run(opts: &Options) -> Result<u8, CliError> {
    let problem = opts.problem()?;
    let variant = match opts.schemes(&[Variant::CorrectedKmk(8)])?.as_slice() {
        [v] => *v,
        _ => return Err(CliError::Config("run takes a single scheme".into())),
    };
    let cfg = opts.scheme_config(variant, opts.single_tau(0.05)?)?;
    let horizon = problem.horizon(opts)?;
    let path = opts.out_dir()?.join("trace.csv");
    let summary = write_trace(&path, opts, "run", &problem, cfg, horizon)?;
    match summary.failure {
        Some(e) => Err(e.into()),
        None => {
            println!(
                "{}: {} steps, max |H - H0| = {:.3e}",
                path.display(),
                summary.steps,
                summary.max_abs_dh
            );
            Ok(EXIT_OK)
        }
    }
}

struct FigureSpec {
    schemes: Vec<Variant>,
    window: HalfPeriodWindow,
    description: String,
}

fn figure_spec(n: u8) -> Result<FigureSpec, CliError> {
    let (schemes, window, description) = match n {
        1 => (Variant::ladder().to_vec(), HalfPeriodWindow::last_half_of(16)?, "last half of period 16"),
        2 => (vec![Variant::BaselineKmk], HalfPeriodWindow::last_half_of(16)?, "last half of period 16"),
        3 => (vec![Variant::CorrectedKmk(4)], HalfPeriodWindow::first_half_of(257)?, "first half of period 257"),
        4 => (vec![Variant::CorrectedKmk(6)], HalfPeriodWindow::last_half_of(4104)?, "last half of period 4104"),
        5 => (vec![Variant::CorrectedKmk(8)], HalfPeriodWindow::last_half_of(262_718)?, "last half of period 262718"),
        _ => return Err(CliError::Config(format!("figure must be 1 to 5, got {n}"))),
    };
    Ok(FigureSpec {
        schemes,
        window,
        description: description.to_string(),
    })
}

fn write_figure_csv(path: &Path, meta: &[(&str, String)], trace: &WindowTrace) -> Result<(), CliError> {
    let mut csv = CsvWriter::create(path, meta)?;
    let dim = trace.states.first().map_or(1, |s| s.dim());
    let mut header = vec!["step".to_string(), "time".to_string(), "phase".to_string()];
    header.extend(state_columns(dim));
    header.extend(["H", "scaledH"].map(String::from));
    csv.row(&header)?;
    for i in 0..trace.len() {
        let s = &trace.states[i];
        let mut row = vec![trace.steps[i].to_string(), float(trace.times[i]), float(trace.phases[i])];
        row.extend(s.q.iter().chain(s.p.iter()).map(|&x| float(x)));
        row.push(float(trace.energies[i]));
        row.push(float(trace.scaled[i]));
        csv.row(&row)?;
    }
    csv.finish()?;
    Ok(())
}

pub fn figure(n: u8, opts: &Options) -> Result<u8, CliError> {
    let spec = figure_spec(n)?;
    if n == 5 && !opts.long {
        return Err(CliError::Config(
            "figure 5 runs to period 262718 (about 3.3e7 steps at tau=0.05); pass --long to run it".into(),
        ));
    }
    let problem = opts.problem()?;
    let schemes = opts.schemes(&spec.schemes)?;
    let taus = opts.taus(&DEFAULT_TAUS)?;
    let dir = opts.out_dir()?;
    let hash = opts.hash(&format!("figure {n}"));
    let mut tasks = Vec::new();
    for &variant in &schemes {
        for &tau in &taus {
            // Left out of figure 1: the baseline period error at this step
            // is large enough to clutter the comparison.
            if n == 1 && variant == Variant::BaselineKmk && tau == 0.2 {
                continue;
            }
            tasks.push((variant, opts.scheme_config(variant, tau)?));
        }
    }
    let results: Vec<Result<String, CliError>> = pool(opts)?.install(|| {
        tasks
            .par_iter()
            .map(|&(variant, cfg)| {
                let trace = window_trace(&problem.x0, &cfg, problem.potential.as_ref(), &problem.mass, spec.window, exponent(variant))?;
                let path = dir.join(format!("figure{n}_{variant}_tau{}.csv", tau_tag(cfg.tau)));
                let mut meta = metadata(&format!("figure {n}"), &variant.to_string(), Some(cfg.tau), &problem.label, &hash);
                meta.push(("window", spec.description.clone()));
                meta.push(("t_start", float(trace.t_start)));
                meta.push(("t_end", float(trace.t_end)));
                meta.push(("exponent", exponent(variant).to_string()));
                write_figure_csv(&path, &meta, &trace)?;
                Ok(format!("{} ({} rows, max |scaledH| = {:.4e})", path.display(), trace.len(), trace.peak()))
            })
            .collect()
    });
    let mut errors = Vec::new();
    for r in results {
        match r {
            Ok(line) => println!("{line}"),
            Err(e) => {
                eprintln!("error: {e}");
                errors.push(e);
            }
        }
    }
    match worst(errors) {
        Some(e) => Ok(e.exit_code()),
        None => Ok(EXIT_OK),
    }
}

pub fn order(opts: &Options) -> Result<u8, CliError> {
    let problem = opts.problem()?;
    let schemes = opts.schemes(&Variant::ladder())?;
    for v in &schemes {
        if v.order().is_none() {
            return Err(CliError::Config(format!("{v} has no nominal order to measure")));
        }
    }
    let pairs = opts.pairs()?;
    let t_final = if opts.periods.is_some() || opts.t_final.is_some() {
        problem.horizon(opts)?
    } else {
        ORDER_T_FINAL
    };
    let tasks: Vec<(Variant, (f64, f64))> = schemes.iter().flat_map(|&v| pairs.iter().map(move |&p| (v, p))).collect();
    let reports: Vec<Result<OrderReport, Error>> = pool(opts)?.install(|| {
        tasks
            .par_iter()
            .map(|&(variant, pair)| measure_convergence_order(variant, problem.potential.as_ref(), &problem.mass, &problem.x0, t_final, pair))
            .collect()
    });
    let names: Vec<String> = schemes.iter().map(Variant::to_string).collect();
    let mut meta = metadata("orders", &names.join(";"), None, &problem.label, &opts.hash("order"));
    meta.push(("t_final", float(t_final)));
    let path = opts.out_dir()?.join("orders.csv");
    let mut csv = CsvWriter::create(&path, &meta)?;
    csv.row(&["scheme", "tau_coarse", "tau_fine", "error_norm", "measured_order"])?;
    let mut mismatches = Vec::new();
    let mut failure = None;
    for (&(variant, _), report) in tasks.iter().zip(reports) {
        let r = match report {
            Ok(r) => r,
            Err(e) => {
                failure.get_or_insert(e);
                continue;
            }
        };
        csv.row(&[variant.to_string(), float(r.tau_coarse), float(r.tau_fine), float(r.error_fine), float(r.measured_order)])?;
        let nominal = variant.order().expect("checked above") as f64;
        let ok = (r.measured_order - nominal).abs() <= ORDER_TOLERANCE;
        println!(
            "{variant:<16} tau {:.4}/{:.4}  error {:.3e}  order {:.3} (nominal {nominal}) {}",
            r.tau_coarse,
            r.tau_fine,
            r.error_fine,
            r.measured_order,
            if ok { "ok" } else { "MISMATCH" }
        );
        if !ok {
            mismatches.push(format!("{variant}: {:.3}", r.measured_order));
        }
    }
    csv.finish()?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    if mismatches.is_empty() {
        Ok(EXIT_OK)
    } else {
        Err(CliError::OrderMismatch(format!("measured order outside ±{ORDER_TOLERANCE}: {}", mismatches.join(", "))))
    }
}

pub fn sweep(opts: &Options) -> Result<u8, CliError> {
    let problem = opts.problem()?;
    let schemes = opts.schemes(&Variant::ladder())?;
    let taus = opts.taus(&DEFAULT_TAUS)?;
    let horizon = problem.horizon(opts)?;
    let dir = opts.out_dir()?;
    let mut tasks = Vec::new();
    for &variant in &schemes {
        for &tau in &taus {
            tasks.push(opts.scheme_config(variant, tau)?);
        }
    }
    let results: Vec<Result<TraceSummary, CliError>> = pool(opts)?.install(|| {
        tasks
            .par_iter()
            .map(|&cfg| {
                let path = dir.join(format!("trace_{}_tau{}.csv", cfg.variant, tau_tag(cfg.tau)));
                write_trace(&path, opts, "sweep", &problem, cfg, horizon)
            })
            .collect()
    });
    let names: Vec<String> = schemes.iter().map(Variant::to_string).collect();
    let meta = metadata("sweep", &names.join(";"), None, &problem.label, &opts.hash("sweep"));
    let mut csv = CsvWriter::create(&dir.join("sweep.csv"), &meta)?;
    csv.row(&["scheme", "tau", "steps", "max_abs_dH", "final_H", "status"])?;
    let mut errors = Vec::new();
    for (cfg, result) in tasks.iter().zip(results) {
        let (row_tail, error) = match result {
            Ok(s) => {
                let status = match &s.failure {
                    None => "ok".to_string(),
                    Some(e) if matches!(e.root(), Error::NewtonDiverged { .. }) => "newton_diverged".to_string(),
                    Some(_) => "failed".to_string(),
                };
                (
                    vec![s.steps.to_string(), float(s.max_abs_dh), float(s.final_h), status],
                    s.failure.map(CliError::from),
                )
            }
            Err(e) => (vec![String::new(), String::new(), String::new(), "failed".to_string()], Some(e)),
        };
        let mut row = vec![cfg.variant.to_string(), float(cfg.tau)];
        row.extend(row_tail);
        csv.row(&row)?;
        if let Some(e) = error {
            eprintln!("error: {} tau={}: {e}", cfg.variant, cfg.tau);
            errors.push(e);
        }
    }
    let path = csv.finish()?;
    println!("{} ({} runs)", path.display(), tasks.len());
    Ok(worst(errors).map_or(EXIT_OK, |e| e.exit_code()))
}
