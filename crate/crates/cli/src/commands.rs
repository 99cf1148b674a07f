use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use nodim::caratheodory::{center, greedy_approximate_caratheodory, verify_caratheodory, GreedySolution, PointCloud};
use nodim::feasibility::{DykstraOptions, DEFAULT_MAX_ITER, DEFAULT_TOL};
use nodim::helly::{
    check_kwise_feasibility, solve_global_chebyshev, verify_local_to_global, witness_violation, GlobalOptions,
    SlabSystem,
};
use nodim::instances::{
    gen_caratheodory_instance, gen_frame_decomposition, gen_quantum_instance, gen_regression_instance,
    gen_signal_ensemble, FrameDecomposition,
};
use nodim::numkernel::DenseMatrix;
use nodim::quantum::{
    check_kwise_consistency, solve_global_state, sparsify_psd_decomposition, verify_quantum_bound, DensityMatrix,
    MeasurementSystem, Sparsification, StateOptions,
};
use nodim::report::VerificationReport;
use nodim::sketch::{greedy_sketch_ladder, verify_sketch, FiniteSignalEnsemble, Sketch};
use nodim::spaces::{caratheodory_rate_with, helly_rate, RateForm};
use nodim::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Cli, Command, Common, KList, Params, SpaceArg};
use crate::report::{read_json, write_csv, write_json, Hypothesis, RunReport};

/// Runs the command; `Ok(true)` means the run passed.
pub fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Bounds { space, k, out } => bounds(space, &k, out.as_deref()),
        Command::Carath { common, space, k } => finish(carath(&common, space, k)?, &common),
        Command::Sketch { common, k_ladder, csv } => finish(sketch(&common, &k_ladder, csv.as_deref())?, &common),
        Command::Chebyshev { common } => finish(chebyshev(&common)?, &common),
        Command::Quantum { common } => finish(quantum(&common)?, &common),
        Command::Sparsify { common, k_ladder, csv } => {
            finish(sparsify(&common, &k_ladder, csv.as_deref())?, &common)
        }
        Command::Verify { report, out } => verify(&report, out.as_deref()),
    }
}

fn finish(report: RunReport, common: &Common) -> Result<bool> {
    if let Some(path) = &common.out {
        write_json(path, &report)?;
    }
    report.print_summary();
    Ok(report.pass)
}

fn base_config(common: &Common, params: Option<&Params>) -> BTreeMap<String, Value> {
    let mut config = BTreeMap::new();
    config.insert("seed".into(), json!(common.seed));
    if let Some(p) = params {
        for (k, v) in p.echo() {
            config.insert(format!("gen.{k}"), json!(v));
        }
    }
    if let Some(path) = &common.instance {
        config.insert("instance".into(), json!(path.display().to_string()));
    }
    config
}

#[derive(Serialize)]
struct BoundRow {
    k: usize,
    #[serde(rename = "R_k")]
    greedy: Option<f64>,
    #[serde(rename = "R_k_raw")]
    greedy_raw: Option<f64>,
    r_k: Option<f64>,
}

fn bounds(space: SpaceArg, ks: &KList, out: Option<&Path>) -> Result<bool> {
    let space = space.0;
    let rows: Vec<BoundRow> = ks
        .0
        .iter()
        .map(|&k| BoundRow {
            k,
            greedy: caratheodory_rate_with(&space, k, RateForm::Rounded).ok(),
            greedy_raw: caratheodory_rate_with(&space, k, RateForm::Raw).ok(),
            r_k: helly_rate(&space, k).ok(),
        })
        .collect();
    write_csv(out, &rows)?;
    Ok(true)
}

fn carath(common: &Common, space: SpaceArg, k: usize) -> Result<RunReport> {
    let (cloud, params) = match &common.instance {
        Some(path) => (center(&read_json::<PointCloud>(path)?)?, None),
        None => {
            let p = Params::new(common.gen.as_ref(), &[("n", 50.0)])?;
            (gen_caratheodory_instance(common.seed, space.0, p.count("n")?)?, Some(p))
        }
    };
    let mut config = base_config(common, params.as_ref());
    config.insert("space".into(), serde_json::to_value(cloud.space)?);
    config.insert("k".into(), json!(k));
    let mut report = RunReport::new("carath", common.seed, config);
    let solution = greedy_approximate_caratheodory(&cloud, k)?;
    report.checks.push(verify_caratheodory(&cloud, &solution));
    report.instance = serde_json::to_value(&cloud)?;
    report.witness = serde_json::to_value(&solution)?;
    report.settle();
    Ok(report)
}

#[derive(Serialize)]
struct ErrorRow {
    k: usize,
    max_error: f64,
    bound: f64,
}

fn sketch(common: &Common, ladder: &KList, csv: Option<&Path>) -> Result<RunReport> {
    let (ensemble, params) = match &common.instance {
        Some(path) => (read_json::<FiniteSignalEnsemble>(path)?, None),
        None => {
            let p = Params::new(common.gen.as_ref(), &[("n", 10.0), ("N", 500.0)])?;
            (gen_signal_ensemble(common.seed, p.count("n")?, p.count("N")?)?, Some(p))
        }
    };
    let mut config = base_config(common, params.as_ref());
    config.insert("k_ladder".into(), json!(ladder.0));
    let mut report = RunReport::new("sketch", common.seed, config);
    let sketches = greedy_sketch_ladder(&ensemble, &ladder.0)?;
    let mut rows = Vec::new();
    for s in &sketches {
        let check = verify_sketch(&ensemble, s);
        rows.push(ErrorRow {
            k: s.k,
            max_error: check.achieved,
            bound: s.derived_bound,
        });
        report.checks.push(check);
    }
    if csv.is_some() {
        write_csv(csv, &rows)?;
    }
    report.instance = serde_json::to_value(&ensemble)?;
    report.witness = serde_json::to_value(&sketches)?;
    report.settle();
    Ok(report)
}

fn dykstra_options(common: &Common) -> DykstraOptions {
    DykstraOptions {
        tol: common.tol.unwrap_or(DEFAULT_TOL),
        max_iter: common.max_iter.unwrap_or(DEFAULT_MAX_ITER),
    }
}

/// Turns a subset-budget error into a failed check instead of an abort.
fn budget_failure(check: &str, e: &Error) -> Option<VerificationReport> {
    match e {
        Error::BudgetExceeded { .. } => {
            let mut r = VerificationReport::new(check, f64::NAN, f64::NAN, 0.0);
            r.fail(e.to_string());
            Some(r)
        }
        _ => None,
    }
}

fn hypothesis_check<W>(check: &mut VerificationReport, reports: &[nodim::report::FeasibilityReport<W>]) {
    if let Some(bad) = reports.iter().find(|r| !r.feasible) {
        if !check.failures.iter().any(|f| f.starts_with("k-wise")) {
            check.fail(format!("k-wise consistency not verified for subset {:?}", bad.subset));
        }
    }
}

fn chebyshev(common: &Common) -> Result<RunReport> {
    // noise defaults to r, so the defaults are built after reading r
    let defaults = |noise: f64| [("d", 50.0), ("m", 200.0), ("k", 20.0), ("R", 2.0), ("r", 0.1), ("noise", noise)];
    let (system, params) = match &common.instance {
        Some(path) => (read_json::<SlabSystem>(path)?, None),
        None => {
            let probe = Params::new(common.gen.as_ref(), &defaults(f64::NAN))?;
            let p = Params::new(common.gen.as_ref(), &defaults(probe.get("r")))?;
            let planted = gen_regression_instance(
                common.seed,
                p.count("d")?,
                p.count("m")?,
                p.get("R"),
                p.get("r"),
                p.get("noise"),
                p.count("k")?,
            )?;
            (planted.instance, Some(p))
        }
    };
    system.validate()?;
    let policy = common.policy.unwrap_or_default();
    let opts = dykstra_options(common);
    let mut config = base_config(common, params.as_ref());
    config.insert("policy".into(), json!(policy.to_string()));
    config.insert("tol".into(), json!(opts.tol));
    config.insert("max_iter".into(), json!(opts.max_iter));
    let mut report = RunReport::new("chebyshev", common.seed, config);
    report.instance = serde_json::to_value(&system)?;
    let kwise = match check_kwise_feasibility(&system, policy.with_seed(common.seed), opts) {
        Ok(k) => k,
        Err(e) => match budget_failure("local_to_global", &e) {
            Some(fail) => {
                report.checks.push(fail);
                report.settle();
                return Ok(report);
            }
            None => return Err(e.into()),
        },
    };
    let solution = solve_global_chebyshev(
        &system,
        GlobalOptions {
            max_iter: opts.max_iter,
            ..GlobalOptions::default()
        },
    )?;
    let mut check = verify_local_to_global(&system, &solution.x);
    check.diagnostics.insert("iterations".into(), solution.iterations as f64);
    hypothesis_check(&mut check, &kwise);
    report.checks.push(check);
    report.hypothesis = Some(Hypothesis::from_reports(policy.to_string(), &kwise)?);
    report.witness = serde_json::to_value(&solution.x)?;
    report.settle();
    Ok(report)
}

fn quantum(common: &Common) -> Result<RunReport> {
    let defaults = |noise: f64| {
        [("d", 16.0), ("m", 100.0), ("k", 25.0), ("t", 0.05), ("noise", noise), ("complex", 1.0)]
    };
    let (system, params) = match &common.instance {
        Some(path) => (read_json::<MeasurementSystem>(path)?, None),
        None => {
            let probe = Params::new(common.gen.as_ref(), &defaults(f64::NAN))?;
            let p = Params::new(common.gen.as_ref(), &defaults(probe.get("t")))?;
            let planted = gen_quantum_instance(
                common.seed,
                p.count("d")?,
                p.count("m")?,
                p.get("t"),
                p.get("noise"),
                p.count("k")?,
                p.get("complex") != 0.0,
            )?;
            (planted.instance, Some(p))
        }
    };
    system.validate()?;
    let policy = common.policy.unwrap_or_default();
    let opts = dykstra_options(common);
    let mut config = base_config(common, params.as_ref());
    config.insert("policy".into(), json!(policy.to_string()));
    config.insert("tol".into(), json!(opts.tol));
    config.insert("max_iter".into(), json!(opts.max_iter));
    let mut report = RunReport::new("quantum", common.seed, config);
    report.instance = serde_json::to_value(&system)?;
    let kwise = match check_kwise_consistency(&system, policy.with_seed(common.seed), opts) {
        Ok(k) => k,
        Err(e) => match budget_failure("quantum_local_to_global", &e) {
            Some(fail) => {
                report.checks.push(fail);
                report.settle();
                return Ok(report);
            }
            None => return Err(e.into()),
        },
    };
    let solution = solve_global_state(
        &system,
        StateOptions {
            max_iter: opts.max_iter,
            ..StateOptions::default()
        },
    )?;
    let mut check = verify_quantum_bound(&system, &solution.rho.matrix, &kwise);
    check.diagnostics.insert("iterations".into(), solution.iterations as f64);
    report.checks.push(check);
    report.hypothesis = Some(Hypothesis::from_reports(policy.to_string(), &kwise)?);
    report.witness = serde_json::to_value(&solution.rho)?;
    report.settle();
    Ok(report)
}

/// Sparsifier runs are recorded next to the heuristic bound but never judged
/// against it; they pass once they complete.
fn exploratory(achieved: f64, bound: f64) -> VerificationReport {
    let mut check = VerificationReport::new("sparsify", achieved, bound, 0.0);
    check.pass = true;
    check
}

#[derive(Serialize)]
struct SparsifyRow {
    k: usize,
    achieved_error: f64,
    heuristic_bound: f64,
}

fn sparsify(common: &Common, ladder: &KList, csv: Option<&Path>) -> Result<RunReport> {
    let (frame, params) = match &common.instance {
        Some(path) => (read_json::<FrameDecomposition>(path)?, None),
        None => {
            let p = Params::new(common.gen.as_ref(), &[("d", 8.0), ("n", 200.0)])?;
            (gen_frame_decomposition(common.seed, p.count("d")?, p.count("n")?)?, Some(p))
        }
    };
    let mut config = base_config(common, params.as_ref());
    config.insert("k_ladder".into(), json!(ladder.0));
    config.insert("experimental".into(), json!(true));
    let mut report = RunReport::new("sparsify", common.seed, config);
    let mut runs: Vec<Sparsification> = Vec::new();
    for &k in &ladder.0 {
        let out = sparsify_psd_decomposition(&frame.matrices, &frame.lambda, k, frame.op_bound)?;
        let mut check = exploratory(out.achieved_error, out.heuristic_bound);
        check.diagnostics.insert("k".into(), k as f64);
        report.checks.push(check);
        runs.push(out);
    }
    if csv.is_some() {
        let rows: Vec<SparsifyRow> = runs
            .iter()
            .map(|r| SparsifyRow {
                k: r.indices.len(),
                achieved_error: r.achieved_error,
                heuristic_bound: r.heuristic_bound,
            })
            .collect();
        write_csv(csv, &rows)?;
    }
    report.instance = serde_json::to_value(&frame)?;
    report.witness = serde_json::to_value(&runs)?;
    report.settle();
    Ok(report)
}

fn verify(path: &Path, out: Option<&Path>) -> Result<bool> {
    let saved: RunReport = read_json(path)?;
    let mut fresh = RunReport {
        checks: Vec::new(),
        pass: false,
        ..saved.clone()
    };
    if saved.witness.is_null() {
        let mut check = VerificationReport::new(&saved.command, f64::NAN, f64::NAN, 0.0);
        check.fail("report carries no witness to check");
        fresh.checks.push(check);
        fresh.settle();
        fresh.print_summary();
        return Ok(false);
    }
    match saved.command.as_str() {
        "carath" => {
            let cloud: PointCloud = serde_json::from_value(saved.instance.clone())?;
            let solution: GreedySolution = serde_json::from_value(saved.witness.clone())?;
            fresh.checks.push(verify_caratheodory(&cloud, &solution));
        }
        "sketch" => {
            let ensemble: FiniteSignalEnsemble = serde_json::from_value(saved.instance.clone())?;
            let sketches: Vec<Sketch> = serde_json::from_value(saved.witness.clone())?;
            for s in &sketches {
                fresh.checks.push(verify_sketch(&ensemble, s));
            }
        }
        "chebyshev" => {
            let system: SlabSystem = serde_json::from_value(saved.instance.clone())?;
            let x: Vec<f64> = serde_json::from_value(saved.witness.clone())?;
            let mut check = verify_local_to_global(&system, &x);
            if let Some(h) = &saved.hypothesis {
                let tol = saved.config.get("tol").and_then(Value::as_f64).unwrap_or(DEFAULT_TOL);
                let reports = h.reports::<Vec<f64>>()?;
                hypothesis_check(&mut check, &reports);
                for r in &reports {
                    if let Some(w) = &r.witness {
                        let v = witness_violation(&system, &r.subset, w);
                        if v > tol {
                            check.fail(format!("witness for subset {:?} violates by {v:e}", r.subset));
                        }
                    }
                }
            }
            fresh.checks.push(check);
        }
        "quantum" => {
            let system: MeasurementSystem = serde_json::from_value(saved.instance.clone())?;
            let rho: DenseMatrix = serde_json::from_value(saved.witness.clone())?;
            let reports = match &saved.hypothesis {
                Some(h) => h.reports::<DensityMatrix>()?,
                None => Vec::new(),
            };
            let tol = saved.config.get("tol").and_then(Value::as_f64).unwrap_or(DEFAULT_TOL);
            let mut check = verify_quantum_bound(&system, &rho, &reports);
            for r in &reports {
                if let Some(w) = &r.witness {
                    let slack = r
                        .subset
                        .iter()
                        .map(|&i| system.residual(i, &w.matrix) - system.t)
                        .fold(0.0, f64::max);
                    if slack > tol {
                        check.fail(format!("witness for subset {:?} violates by {slack:e}", r.subset));
                    }
                    if DensityMatrix::new(w.matrix.clone()).is_err() {
                        check.fail(format!("witness for subset {:?} is not a density matrix", r.subset));
                    }
                }
            }
            fresh.checks.push(check);
        }
        "sparsify" => {
            let frame: FrameDecomposition = serde_json::from_value(saved.instance.clone())?;
            let runs: Vec<Sparsification> = serde_json::from_value(saved.witness.clone())?;
            for r in &runs {
                let again = sparsify_psd_decomposition(&frame.matrices, &frame.lambda, r.indices.len(), frame.op_bound)?;
                let mut check = exploratory(again.achieved_error, r.heuristic_bound);
                if again.indices != r.indices || (again.achieved_error - r.achieved_error).abs() > 1e-12 {
                    check.fail("recomputed selection differs from the saved one");
                }
                fresh.checks.push(check);
            }
        }
        other => bail!("cannot verify a report for command {other:?}"),
    }
    fresh.settle();
    if fresh.pass != saved.pass {
        println!("note: saved report said {}, re-check says {}", pass_word(saved.pass), pass_word(fresh.pass));
    }
    if let Some(p) = out {
        write_json(p, &fresh)?;
    }
    fresh.print_summary();
    Ok(fresh.pass)
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}
