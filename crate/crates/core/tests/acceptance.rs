//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p wavemap-core --test acceptance -- --nocapture`.

use std::f64::consts::PI;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavemap_core::diagnostics::{
    cone_monotonicity_check, record_run, stability_experiment, DiagnosticsOptions, RecordedRun, StabilityOptions,
};
use wavemap_core::evolution::{perturb_state, run, state_from_stationary, FieldState, PerturbationShape, RunOptions};
use wavemap_core::geometry::{geodesic_distance, SurfaceProfile, TargetProfile};
use wavemap_core::regularity::{christoffel, intertwining_convergence, metric_chart, metric_derivatives, rhs_coefficient, smooth_bump};
use wavemap_core::stationary::{solve_stationary, SolverOptions};
use wavemap_core::StationarySolution64;

const N: usize = 2000;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

fn sci(values: &[f64]) -> String {
    let parts: Vec<String> = values.iter().map(|v| format!("{v:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn solve(cells: usize, l: u32, omega: f64) -> StationarySolution64 {
    solve_stationary(&SurfaceProfile::round(), &TargetProfile::round(), cells, l, omega, None, &SolverOptions::default())
        .expect("solver runs")
}

fn perturbed_run(delta: f64, t_final: f64, keep_snapshots: bool) -> RecordedRun<f64> {
    let sol = solve(N, 1, 0.5);
    let reference = state_from_stationary(&sol, 0.5).unwrap();
    let initial = perturb_state(&reference, delta, PerturbationShape::Bump, 0).unwrap();
    let mut diag = DiagnosticsOptions::new(0.5);
    diag.reference = Some(reference);
    diag.keep_snapshots = keep_snapshots;
    record_run(initial, &RunOptions::new(t_final, 0.4), &diag).unwrap()
}

fn harmonic_map_oracle() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for l in 1..=3u32 {
        let start = Instant::now();
        let sol = solve(N, l, 0.0);
        let secs = start.elapsed().as_secs_f64();
        let err = sol.r.iter().zip(&sol.phi).map(|(&r, &p)| (p - 2.0 * (r / 2.0).tan().powi(l as i32).atan()).abs()).fold(0.0, f64::max);
        let bogomolny = 4.0 * PI * l as f64;
        let rel = (sol.action - bogomolny).abs() / bogomolny;
        ok &= sol.converged && err < 1e-3 && rel < 1e-3 && secs < 30.0;
        parts.push(format!("l={l}: max|phi-oracle|={err:.2e} action rel err={rel:.2e} time={:.1}ms", secs * 1e3));
    }
    outcome(ok, parts.join("; "))
}

fn strict_gap() -> Outcome {
    let sol = solve(N, 1, 0.5);
    let bound = 4.0 * PI - PI / 3.0 + 1e-3;
    let ok = sol.converged && sol.action <= bound && sol.action < 4.0 * PI;
    outcome(ok, format!("action={:.6} competitor bound={:.6} 4pi={:.6}", sol.action, bound, 4.0 * PI))
}

fn conservation(run: &RecordedRun<f64>) -> Outcome {
    let first = &run.records[0];
    let e_drift = run.records.iter().map(|r| (r.energy - first.energy).abs() / first.energy).fold(0.0, f64::max);
    let q_drift = run.records.iter().map(|r| (r.charge - first.charge).abs() / first.charge.abs()).fold(0.0, f64::max);
    let identity = run.records.iter().map(|r| (r.energy - (r.g + 0.5 * r.charge + r.d)).abs()).fold(0.0, f64::max);
    let ok = run.output.failure.is_none() && e_drift < 1e-4 && q_drift < 1e-4 && identity < 1e-10;
    outcome(
        ok,
        format!("{} records, energy drift={e_drift:.2e} charge drift={q_drift:.2e} max|E-(G+wQ+D)|={identity:.2e}", run.records.len()),
    )
}

/// `max |u(t) - e^{ωtA} u(0)|` with the rotation applied in the test.
fn rotation_error(initial: &FieldState<f64>, evolved: &FieldState<f64>, omega: f64) -> f64 {
    let (s, c) = (omega * evolved.t).sin_cos();
    initial
        .u
        .iter()
        .zip(&evolved.u)
        .map(|(a, b)| {
            let rot = [c * a[0] - s * a[1], s * a[0] + c * a[1], a[2]];
            (0..3).map(|k| (b[k] - rot[k]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

fn rotating_oracle() -> Outcome {
    let omega = 0.5;
    let errors: Vec<f64> = [500, 1000, 2000]
        .iter()
        .map(|&cells| {
            let initial = state_from_stationary(&solve(cells, 1, omega), omega).unwrap();
            let out = run(initial.clone(), &RunOptions::new(1.0, 0.4), |_, _, _| {}).unwrap();
            rotation_error(&initial, &out.state, omega)
        })
        .collect();
    let rates: Vec<f64> = errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = rates.iter().all(|r| (1.8..=2.2).contains(r));
    outcome(ok, format!("errors={} rates={rates:.4?}", sci(&errors)))
}

fn stability(runs: &[(f64, f64, RecordedRun<f64>)]) -> Outcome {
    let sup = |delta: f64, t: f64| {
        runs.iter().find(|(d, tf, _)| *d == delta && *tf == t).and_then(|(_, _, r)| r.sup_dist()).unwrap_or(f64::INFINITY)
    };
    let floor = sup(0.0, 1.0);
    let d3 = sup(1e-3, 5.0);
    let sweep = [sup(1e-4, 5.0), d3, sup(1e-2, 5.0)];
    let monotone = sweep.windows(2).all(|w| w[0] <= w[1]);
    let aborted = runs.iter().any(|(_, _, r)| r.output.failure.is_some());
    let ok = !aborted && floor <= 1e-2 && d3 <= 1e-2 && monotone;
    outcome(ok, format!("delta=0,T=1: {floor:.2e}; delta=1e-3,T=5: {d3:.2e}; sweep {{1e-4,1e-3,1e-2}}: {}", sci(&sweep)))
}

/// Haversine form of the curvature-`k` law of cosines (`k = 0` is the plane).
fn hinge(r: f64, rp: f64, th: f64, k: f64) -> f64 {
    if k == 0.0 {
        return (r * r + rp * rp - 2.0 * r * rp * th.cos()).max(0.0).sqrt();
    }
    let sk = k.sqrt();
    let hav = |x: f64| (x / 2.0).sin().powi(2);
    let h = hav(sk * (r - rp)) + (sk * r).sin() * (sk * rp).sin() * hav(th);
    2.0 * h.sqrt().min(1.0).asin() / sk
}

fn geometry_suite() -> Outcome {
    let start = Instant::now();
    let round = SurfaceProfile::<f64>::round();
    let bumpy = SurfaceProfile::<f64>::bumpy(0.05);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut cosines, mut sines, mut gb, mut area) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..40 {
        let (r, rp, th) = (rng.gen_range(0.1..1.4), rng.gen_range(0.1..1.4), rng.gen_range(0.05..3.0));
        let tri = geodesic_distance(&round, r, rp, th).unwrap();
        let exact = (r.cos() * rp.cos() + r.sin() * rp.sin() * th.cos()).acos();
        cosines = cosines.max((tri.d - exact).abs());
        sines = sines.max((r.sin() * tri.beta.sin() - rp.sin() * tri.alpha.sin()).abs());
        gb = gb.max(tri.gauss_bonnet_residual().abs());
        // L'Huilier: the enclosed area equals the spherical excess.
        let s = (r + rp + tri.d) / 2.0;
        let t = ((s / 2.0).tan() * ((s - r) / 2.0).tan() * ((s - rp) / 2.0).tan() * ((s - tri.d) / 2.0).tan()).sqrt();
        area = area.max((4.0 * t.atan() - tri.curvature_integral).abs());
    }

    let f = |p: &SurfaceProfile<f64>, r: f64| p.eval(r).unwrap().f;
    let y = |p: &SurfaceProfile<f64>, r: f64, rp: f64, th: f64| geodesic_distance(p, r, rp, th).unwrap().y;
    let (mut dy_rel, mut eik_rel) = (0.0f64, 0.0f64);
    let h = 1e-4;
    for p in [&round, &bumpy] {
        for &(r, rp, th) in &[(0.3, 0.5, 0.7), (0.8, 0.4, 1.9), (0.6, 1.1, 0.3), (1.2, 0.9, 2.6)] {
            let tri = geodesic_distance(p, r, rp, th).unwrap();
            let y_rp = (y(p, r, rp + h, th) - y(p, r, rp - h, th)) / (2.0 * h);
            let y_th = (y(p, r, rp, th + h) - y(p, r, rp, th - h)) / (2.0 * h);
            let exact = 2.0 * tri.d * tri.alpha.cos();
            dy_rel = dy_rel.max((y_rp - exact).abs() / exact.abs().max(tri.y));
            eik_rel = eik_rel.max((y_rp * y_rp + y_th * y_th / f(p, rp).powi(2) - 4.0 * tri.y).abs() / (4.0 * tri.y));
            sines = sines.max((f(p, r) * tri.beta.sin() - f(p, rp) * tri.alpha.sin()).abs());
            gb = gb.max(tri.gauss_bonnet_residual().abs());
        }
    }

    // K = 1.05 max k with k = -f''/f sampled by central differences.
    let hk = 1e-4;
    let k_max = (1..3140)
        .map(|i| {
            let r = i as f64 * 1e-3;
            -(f(&bumpy, r + hk) - 2.0 * f(&bumpy, r) + f(&bumpy, r - hk)) / (hk * hk * f(&bumpy, r))
        })
        .fold(f64::NEG_INFINITY, f64::max);
    let big_k = 1.05 * k_max;
    let mut violations = 0;
    for _ in 0..1000 {
        let (r, rp, th) = (rng.gen_range(0.05..0.45) * PI, rng.gen_range(0.05..0.45) * PI, PI * (1.0 - rng.gen::<f64>()));
        let tri = geodesic_distance(&bumpy, r, rp, th).unwrap();
        gb = gb.max(tri.gauss_bonnet_residual().abs());
        let tol = 1e-9;
        if tri.d < hinge(r, rp, th, big_k) - tol || tri.d > hinge(r, rp, th, 0.0) + tol {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let ok =
        cosines < 1e-6 && dy_rel < 1e-4 && eik_rel < 1e-4 && sines < 1e-6 && gb < 1e-5 && area < 1e-5 && violations == 0 && secs < 60.0;
    outcome(
        ok,
        format!(
            "law of cosines={cosines:.1e} dy/dr'={dy_rel:.1e} eikonal={eik_rel:.1e} sine law={sines:.1e} \
             gauss-bonnet={gb:.1e} excess vs area={area:.1e} comparison violations={violations}/1000 (K={big_k:.4}) time={secs:.1}s"
        ),
    )
}

fn flux_and_cones(runs: &[&RecordedRun<f64>], with_snapshots: &RecordedRun<f64>) -> Outcome {
    let flux_excess = runs.iter().flat_map(|r| r.records.iter()).map(|rec| rec.flux - rec.energy).fold(f64::NEG_INFINITY, f64::max);
    let snaps = &with_snapshots.snapshots;
    let e0 = with_snapshots.records[0].energy;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (mut worst, mut samples) = (0.0f64, 0);
    let mut cones_ok = snaps.len() >= 2;
    for _ in 0..60 {
        let i = rng.gen_range(0..snaps.len() - 1);
        let j = rng.gen_range(i + 1..snaps.len());
        let (t1, t2) = (snaps[i].t, snaps[j].t);
        let rho = rng.gen_range((t2 - t1)..PI);
        let check = cone_monotonicity_check(snaps, t1, t2, rho, 1e-6 * e0).unwrap();
        worst = worst.max(check.violation / e0);
        cones_ok &= check.holds;
        samples += 1;
    }
    let ok = flux_excess <= 1e-6 && cones_ok;
    outcome(ok, format!("max(flux - E)={flux_excess:.3e}; cone checks={samples} worst violation/E={worst:.1e}"))
}

fn intertwining() -> Outcome {
    let profiles = [("flat", SurfaceProfile::<f64>::flat(1.0)), ("round", SurfaceProfile::round()), ("bumpy", SurfaceProfile::bumpy(0.05))];
    let mut ok = true;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (name, p) in &profiles {
        let big_r = p.extent();
        for l in 0..=3 {
            let study = intertwining_convergence(p, l, &[200, 400, 800], smooth_bump(0.5 * big_r, 0.35 * big_r)).unwrap();
            for &rate in &study.rates {
                lo = lo.min(rate);
                hi = hi.max(rate);
                if !(1.8..=2.2).contains(&rate) {
                    ok = false;
                    println!("  intertwining {name} l={l}: rates {:?}", study.rates);
                }
            }
        }
    }
    let flat = &profiles[0].1;
    let round = &profiles[1].1;
    let mut exact_zero = true;
    for i in 1..50 {
        for l in 0..=3 {
            exact_zero &= rhs_coefficient(flat, l, i as f64 * 0.02).unwrap() == 0.0;
        }
        exact_zero &= rhs_coefficient(round, 0, i as f64 * 0.06).unwrap() == 0.0;
    }
    outcome(ok && exact_zero, format!("rates in [{lo:.4}, {hi:.4}] over 12 cases; zero coefficient exact: {exact_zero}"))
}

fn christoffel_expansion() -> Outcome {
    let origin = christoffel(0.0f64, 0.0).unwrap().iter().flatten().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let dgxx = metric_derivatives(0.1f64, 0.0).unwrap()[0][0][0];
    let published: f64 = 0.204061;
    // On the unit sphere Γ^m_ij = x_m g_ij, so |Γ(X)|/|X| = |g(X)|.
    let mut oracle_err = 0.0f64;
    let mut constants = Vec::new();
    for &rho in &[0.1, 0.2, 0.3] {
        let mut best = 0.0f64;
        for a in 1..=30 {
            let rad = rho * a as f64 / 30.0;
            for b in 0..48 {
                let ang = 2.0 * PI * b as f64 / 48.0;
                let (x, y) = (rad * ang.cos(), rad * ang.sin());
                let gamma = christoffel(x, y).unwrap();
                let g = metric_chart(x, y).unwrap().g;
                let xs = [x, y];
                for m in 0..2 {
                    for i in 0..2 {
                        for j in 0..2 {
                            oracle_err = oracle_err.max((gamma[m][i][j] - xs[m] * g[i][j]).abs());
                        }
                    }
                }
                let norm = gamma.iter().flatten().flatten().map(|v| v * v).sum::<f64>().sqrt();
                best = best.max(norm / rad);
            }
        }
        constants.push(best);
    }
    let stable = constants[2] / constants[0] < 1.25;
    let ok = origin <= 1e-15 && (dgxx - published).abs() <= 1e-6 && oracle_err < 1e-13 && stable;
    outcome(
        ok,
        format!("|Gamma(0)|={origin:.1e}; dg_xx/dx(0.1,0)={dgxx:.7}; |Gamma - x_m g|={oracle_err:.1e}; C(rho=0.1,0.2,0.3)={constants:.4?}"),
    )
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    results.push((1, "harmonic-map oracle", harmonic_map_oracle()));
    results.push((2, "strict gap below l*vol", strict_gap()));

    let conserved = perturbed_run(1e-3, 1.0, true);
    results.push((3, "conservation", conservation(&conserved)));
    results.push((4, "rotating-solution oracle", rotating_oracle()));

    let opts = StabilityOptions::default();
    let sol = solve(N, 1, 0.5);
    let stability_runs: Vec<(f64, f64, RecordedRun<f64>)> = [(0.0, 1.0), (1e-4, 5.0), (1e-3, 5.0), (1e-2, 5.0)]
        .iter()
        .map(|&(delta, t)| (delta, t, stability_experiment(&sol, 0.5, delta, t, &opts).unwrap().run))
        .collect();
    results.push((5, "stability experiment", stability(&stability_runs)));
    results.push((6, "geometry suite", geometry_suite()));

    let mut accepted: Vec<&RecordedRun<f64>> = vec![&conserved];
    accepted.extend(stability_runs.iter().map(|(_, _, r)| r).filter(|r| r.output.failure.is_none()));
    results.push((7, "flux and cone monotonicity", flux_and_cones(&accepted, &conserved)));
    results.push((8, "intertwining identity", intertwining()));
    results.push((9, "christoffel expansion", christoffel_expansion()));

    for (n, name, o) in &results {
        println!("criterion {n} {}: {name}: {}", if o.passed { "PASS" } else { "FAIL" }, o.detail);
    }
    let failed: Vec<usize> = results.iter().filter(|(_, _, o)| !o.passed).map(|(n, _, _)| *n).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
