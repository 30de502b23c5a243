//! Subcommand bodies. Each returns the process exit status.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use wavemap_core::diagnostics::{
    record_run, stability_experiment, DiagnosticsOptions, RecordedRun, StabilityOptions, StabilityReport, Verdict,
};
use wavemap_core::evolution::{perturb_state, state_from_stationary, RunOptions};
use wavemap_core::geometry::{
    angle_identities_check, comparison_sweep, curvature_range, eikonal_residual, geodesic_distance, geodesic_trace, validate_profile,
    Bracket, IdentityOptions, SurfaceProfile, TargetProfile,
};
use wavemap_core::io::{sidecar_path, write_series, write_snapshot, write_solution, write_summary};
use wavemap_core::regularity::regularity_report;
use wavemap_core::stationary::{solve_stationary, SolverOptions};
use wavemap_core::StationarySolution64;

use crate::config::{Format, RunConfig, SurfaceConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_REFUSED: i32 = 2;
pub const EXIT_ABORTED: i32 = 3;

/// Run context shared by the subcommands.
pub struct Ctx {
    pub config: RunConfig,
    pub hash: String,
}

impl Ctx {
    pub fn new(config: RunConfig) -> Self {
        let hash = config.hash();
        Self { config, hash }
    }

    fn out_dir(&self) -> Result<PathBuf> {
        let dir = self.config.output.directory.clone();
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(dir)
    }

    fn summary(&self, name: &str, value: Value) -> Result<()> {
        if self.config.wants(Format::Json) {
            let path = self.out_dir()?.join(name);
            write_summary(&path, value, Some(&self.hash))?;
            println!("wrote {}", path.display());
        }
        Ok(())
    }

    fn surface(&self) -> Result<SurfaceProfile<f64>> {
        self.config.surface.build()
    }

    fn require_rotation_number(&self) -> Option<i32> {
        if self.config.l == 0 {
            eprintln!("error: l must be at least 1 for this subcommand");
            return Some(EXIT_REFUSED);
        }
        None
    }

    fn solve(&self, surface: &SurfaceProfile<f64>) -> Result<StationarySolution64> {
        let c = &self.config;
        let opts = SolverOptions { tol: c.solver.tol, max_iter: c.solver.max_iter, multistart: c.solver.multistart, ..Default::default() };
        let target = TargetProfile::round();
        let sol = solve_stationary(surface, &target, c.grid.n, c.l, c.omega, None, &opts)?;
        println!(
            "stationary: l={} omega={} N={} action={:.12} residual={:.3e} iterations={} converged={}",
            sol.l, sol.omega, c.grid.n, sol.action, sol.residual_norm, sol.iterations, sol.converged
        );
        Ok(sol)
    }
}

fn surface_name(config: &RunConfig) -> String {
    match &config.surface {
        SurfaceConfig::Tabulated { table } => format!("tabulated({})", table.display()),
        _ => config.surface.build().map(|s| s.name()).unwrap_or_default(),
    }
}

pub fn validate(ctx: &Ctx) -> Result<i32> {
    let surface = ctx.surface()?;
    let report = validate_profile(&surface, ctx.config.grid.n, 1e-9);
    for check in &report.checks {
        println!("{:<16} {:<5} {:.3e}", check.name, if check.passed { "ok" } else { "FAIL" }, check.residual);
    }
    let passed = report.passed();
    ctx.summary(
        "validation.json",
        json!({
            "surface": surface_name(&ctx.config),
            "closed": surface.is_closed(),
            "extent": surface.extent(),
            "checks": report.checks,
            "passed": passed,
        }),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_REFUSED })
}

pub fn stationary(ctx: &Ctx) -> Result<i32> {
    if let Some(code) = ctx.require_rotation_number() {
        return Ok(code);
    }
    let surface = ctx.surface()?;
    let sol = ctx.solve(&surface)?;
    if ctx.config.wants(Format::Csv) {
        let path = ctx.out_dir()?.join("solution.csv");
        write_solution(&path, &sol, Some(&ctx.hash))?;
        println!("wrote {}", path.display());
    }
    ctx.summary(
        "summary.json",
        json!({
            "command": "stationary",
            "l": sol.l,
            "omega": sol.omega,
            "cells": sol.cells(),
            "action": sol.action,
            "residual_norm": sol.residual_norm,
            "converged": sol.converged,
            "iterations": sol.iterations,
            "start_actions": sol.start_actions,
            "exponents": sol.exponents,
        }),
    )?;
    if !sol.converged {
        eprintln!("error: stationary solver did not reach tol {:e}", ctx.config.solver.tol);
        return Ok(EXIT_REFUSED);
    }
    Ok(EXIT_OK)
}

fn run_summary(run: &RecordedRun<f64>) -> Value {
    let drifts = run.drifts();
    json!({
        "steps": run.output.steps,
        "dt": run.output.dt,
        "t_end": run.output.state.t,
        "records": run.records.len(),
        "energy_drift": drifts.energy,
        "charge_drift": drifts.charge,
        "max_identity_residual": run.max_identity_residual(),
        "sup_dist": run.sup_dist(),
        "failure": run.output.failure,
    })
}

fn write_run_series(ctx: &Ctx, name: &str, run: &RecordedRun<f64>, extra: Value) -> Result<()> {
    if !ctx.config.wants(Format::Csv) {
        return Ok(());
    }
    let path = ctx.out_dir()?.join(name);
    write_series(&path, &run.records)?;
    let mut meta = run_summary(run);
    merge(&mut meta, extra);
    write_summary(&sidecar_path(&path), meta, Some(&ctx.hash))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn merge(into: &mut Value, extra: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, extra) {
        a.extend(b);
    }
}

pub fn evolve(ctx: &Ctx) -> Result<i32> {
    if let Some(code) = ctx.require_rotation_number() {
        return Ok(code);
    }
    let c = &ctx.config;
    let surface = ctx.surface()?;
    let sol = ctx.solve(&surface)?;
    if !sol.converged {
        eprintln!("error: stationary solver did not converge; refusing to evolve");
        return Ok(EXIT_REFUSED);
    }
    let reference = state_from_stationary(&sol, c.omega)?;
    let initial = perturb_state(&reference, c.evolve.delta, c.stability.shape, c.stability.seed)?;
    let run_options = RunOptions { t_final: c.evolve.t_final, cfl: c.evolve.cfl, record_every: c.evolve.record_every };
    let mut diag = DiagnosticsOptions::new(c.omega);
    diag.delta_hoelder = c.diagnostics.delta_hoelder;
    diag.reference = Some(reference);
    let run = record_run(initial, &run_options, &diag)?;
    let drifts = run.drifts();
    println!(
        "evolve: T={} steps={} dt={:.3e} energy_drift={:.3e} charge_drift={:.3e} identity={:.3e}",
        c.evolve.t_final,
        run.output.steps,
        run.output.dt,
        drifts.energy,
        drifts.charge,
        run.max_identity_residual()
    );
    let extra = json!({ "l": c.l, "omega": c.omega, "N": c.grid.n, "delta": c.evolve.delta });
    write_run_series(ctx, "series.csv", &run, extra.clone())?;
    if c.wants(Format::Csv) {
        let path = ctx.out_dir()?.join("final.csv");
        write_snapshot(&path, &run.output.state, Some(&ctx.hash))?;
        println!("wrote {}", path.display());
    }
    let mut summary = run_summary(&run);
    merge(&mut summary, json!({ "command": "evolve" }));
    merge(&mut summary, extra);
    ctx.summary("summary.json", summary)?;
    if let Some(f) = &run.output.failure {
        eprintln!("error: evolution aborted at t={} (step {}): {}", f.t, f.step, f.reason);
        return Ok(EXIT_ABORTED);
    }
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct StabilityEntry {
    delta: f64,
    verdict: Verdict,
    sup_dist: f64,
    initial_distance: f64,
    initial_energy: f64,
    energy_drift: f64,
    charge_drift: f64,
    series: Option<String>,
}

pub fn stability(ctx: &Ctx) -> Result<i32> {
    if let Some(code) = ctx.require_rotation_number() {
        return Ok(code);
    }
    let c = &ctx.config;
    let surface = ctx.surface()?;
    let sol = ctx.solve(&surface)?;
    if !sol.converged {
        eprintln!("error: stationary solver did not converge; refusing to run the experiment");
        return Ok(EXIT_REFUSED);
    }
    let deltas = if c.stability.deltas.is_empty() { vec![c.stability.delta] } else { c.stability.deltas.clone() };
    let opts = StabilityOptions {
        cfl: c.evolve.cfl,
        record_every: c.evolve.record_every,
        epsilon: c.stability.epsilon,
        shape: c.stability.shape,
        seed: c.stability.seed,
        delta_hoelder: c.diagnostics.delta_hoelder,
        keep_snapshots: false,
    };
    let t_final = c.stability.t_final;
    // One worker per perturbation size; results keep the input order.
    let reports: Vec<Result<StabilityReport<f64>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = deltas
            .iter()
            .map(|&delta| {
                let (sol, opts) = (&sol, &opts);
                scope.spawn(move || stability_experiment(sol, c.omega, delta, t_final, opts).map_err(anyhow::Error::from))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("stability worker panicked")).collect()
    });

    let single = deltas.len() == 1;
    let mut entries = Vec::new();
    for (k, (report, &delta)) in reports.into_iter().zip(&deltas).enumerate() {
        let report = report?;
        let name = if single { "series.csv".to_string() } else { format!("series_{k}.csv") };
        let extra = json!({
            "l": c.l,
            "omega": c.omega,
            "N": c.grid.n,
            "delta": delta,
            "epsilon": c.stability.epsilon,
            "verdict": report.verdict,
            "initial_distance": report.initial_distance,
        });
        write_run_series(ctx, &name, &report.run, extra)?;
        let drifts = report.run.drifts();
        println!(
            "stability: delta={delta:e} sup_dist={:.6e} epsilon={:e} verdict={:?}",
            report.sup_dist, c.stability.epsilon, report.verdict
        );
        entries.push(StabilityEntry {
            delta,
            verdict: report.verdict,
            sup_dist: report.sup_dist,
            initial_distance: report.initial_distance,
            initial_energy: report.run.records.first().map_or(f64::NAN, |r| r.energy),
            energy_drift: drifts.energy,
            charge_drift: drifts.charge,
            series: c.wants(Format::Csv).then_some(name),
        });
    }

    let mut by_delta: Vec<&StabilityEntry> = entries.iter().collect();
    by_delta.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    let monotone = by_delta.windows(2).all(|w| w[0].sup_dist <= w[1].sup_dist);
    // Largest initial energy among runs that reached the final time.
    let largest_regular_energy = entries.iter().filter(|e| e.verdict != Verdict::Aborted).map(|e| e.initial_energy).reduce(f64::max);
    let verdict = if entries.iter().any(|e| e.verdict == Verdict::Aborted) {
        Verdict::Aborted
    } else if entries.iter().any(|e| e.verdict == Verdict::Unstable) {
        Verdict::Unstable
    } else {
        Verdict::Stable
    };
    ctx.summary(
        "summary.json",
        json!({
            "command": "stability",
            "T": t_final,
            "epsilon": c.stability.epsilon,
            "verdict": verdict,
            "sup_dist_monotone_in_delta": monotone,
            "largest_regular_energy": largest_regular_energy,
            "runs": entries,
        }),
    )?;
    Ok(match verdict {
        Verdict::Stable => EXIT_OK,
        Verdict::Unstable => EXIT_FAILED,
        Verdict::Aborted => EXIT_ABORTED,
    })
}

#[derive(Serialize)]
struct Check {
    name: String,
    residual: f64,
    passed: bool,
}

fn check(name: &str, residual: f64, bound: f64) -> Check {
    Check { name: name.to_string(), residual, passed: residual <= bound }
}

pub fn geometry_check(ctx: &Ctx) -> Result<i32> {
    let c = &ctx.config;
    let surface = ctx.surface()?;
    let big_r = surface.extent();
    let mut checks: Vec<Check> = validate_profile(&surface, c.grid.n, 1e-9)
        .checks
        .into_iter()
        .map(|p| Check { name: format!("profile {}", p.name), residual: p.residual, passed: p.passed })
        .collect();

    let path = geodesic_trace(&surface, (0.3 * big_r, 0.0), 1.0, 0.4 * big_r, 1e-3)?;
    checks.push(check("clairaut drift", path.clairaut_drift(&surface), 1e-9));

    let (r, rp, th) = (0.25 * big_r, 0.35 * big_r, 1.0);
    let eik = eikonal_residual(&surface, r, rp, th, 1e-4)?;
    let tri = geodesic_distance(&surface, r, rp, th)?;
    checks.push(check("eikonal <grad y, grad y> = 4y", eik / (4.0 * tri.y), 1e-4));
    if matches!(c.surface, SurfaceConfig::Round) {
        let exact = (r.cos() * rp.cos() + r.sin() * rp.sin() * th.cos()).acos();
        checks.push(check("spherical law of cosines", (tri.d - exact).abs(), 1e-6));
    }

    let sweep = comparison_sweep(&surface, c.geometry.triangles, c.geometry.curvature_factor, c.stability.seed, 1e-9)?;
    checks.push(check("sine law f(r) sin b = f(r') sin a", sweep.max_sine_law, 1e-6));
    checks.push(check("gauss-bonnet", sweep.max_gauss_bonnet, 1e-5));
    checks.push(Check {
        name: "comparison d_K <= d <= d_0".into(),
        residual: (sweep.lower_violations + sweep.upper_violations) as f64,
        passed: sweep.holds(),
    });

    // Fitted constants of the two-sided estimates on a fixed hinge lattice.
    let (_, k_max) = curvature_range(&surface, 4096);
    let opts = IdentityOptions { h: 1e-4, curvature: c.geometry.curvature_factor * k_max, mu: None };
    let (mut sine_ratio, mut ratio_m, mut angle_ok) = (Bracket::default(), Bracket::default(), 0usize);
    let lattice: Vec<(f64, f64, f64)> = [0.1, 0.25, 0.4]
        .iter()
        .flat_map(|&a| [0.15, 0.3].map(move |b| (a, b)))
        .flat_map(|(a, b)| [0.4, 1.2, 2.4].map(move |th| (a * big_r, b * big_r, th)))
        .collect();
    for &(r, rp, th) in &lattice {
        let tri = geodesic_distance(&surface, r, rp, th)?;
        let rep = angle_identities_check(&surface, &tri, &IdentityOptions { mu: Some((th + 0.3).min(3.1)), ..opts })?;
        let [a, b, s] = rep.law_of_sines_ratios;
        sine_ratio.push(a / s);
        sine_ratio.push(b / s);
        if let Some(m) = rep.ratio_m {
            ratio_m.push(m);
        }
        let scale = rep.angle_derivative_brackets[1].abs().max(1.0);
        angle_ok += usize::from(rep.angle_bracket_holds(1e-6 * scale));
    }
    checks.push(Check {
        name: "angle derivative bracket".into(),
        residual: (lattice.len() - angle_ok) as f64,
        passed: angle_ok == lattice.len(),
    });

    for ch in &checks {
        println!("{:<36} {:<5} {:.3e}", ch.name, if ch.passed { "ok" } else { "FAIL" }, ch.residual);
    }
    let passed = checks.iter().all(|ch| ch.passed);
    ctx.summary(
        "geometry.json",
        json!({
            "surface": surface_name(c),
            "checks": checks,
            "comparison": sweep,
            "constants": {
                "law_of_sines_ratio": sine_ratio,
                "cosine_ratio_m": ratio_m,
            },
            "passed": passed,
        }),
    )?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

pub fn regularity_check(ctx: &Ctx) -> Result<i32> {
    let base = (ctx.config.grid.n / 8).max(16);
    let report = regularity_report(base)?;
    for ch in &report {
        let rate = ch.rate.map(|r| format!("{r:.3}")).unwrap_or_else(|| "-".into());
        println!("{:<40} {:<5} {:.3e} rate {}", ch.name, if ch.passed { "ok" } else { "FAIL" }, ch.residual, rate);
    }
    let passed = report.iter().all(|ch| ch.passed);
    let checks: Vec<Value> = report
        .iter()
        .map(|ch| {
            let constants: serde_json::Map<String, Value> = ch.constants.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
            json!({ "name": ch.name, "residual": ch.residual, "rate": ch.rate, "constants": constants, "passed": ch.passed })
        })
        .collect();
    ctx.summary("regularity.json", json!({ "base_cells": base, "checks": checks, "passed": passed }))?;
    Ok(if passed { EXIT_OK } else { EXIT_FAILED })
}

/// Exit status for an error that escaped a subcommand.
pub fn exit_code_for(err: &anyhow::Error) -> i32 {
    use wavemap_core::Error as E;
    match err.downcast_ref::<E>() {
        Some(E::EvolutionAborted { .. }) => EXIT_ABORTED,
        Some(E::Unconverged | E::Cfl { .. } | E::InvalidInput(_) | E::Table(_)) => EXIT_REFUSED,
        _ => EXIT_FAILED,
    }
}
