//! Monitored quantities of an evolving equivariant map.
//!
//! All surface integrals carry the angular factor `2π`, and every quantity
//! entering `E = 𝒢_ω + ωQ + D` uses the same quadrature: kinetic and
//! centrifugal densities at cell centers, gradient terms on faces.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::{perturb_state, run, state_from_stationary, FieldState, PerturbationShape, RunOptions, RunOutput, Visit};
use crate::scalar::{c, dot, norm2, rot_gen, sub, Real, Vec3};
use crate::stationary::StationarySolution;

/// Per-cell energy content; the face gradient terms are split evenly
/// between the two adjacent cells, so the entries sum to [`energy`].
pub fn cell_energy<T: Real>(state: &FieldState<T>) -> Vec<T> {
    let g = &state.grid;
    let n = state.cells();
    let l2 = g.lf() * g.lf();
    let half = c::<T>(0.5);
    let mut out: Vec<T> = (0..n)
        .map(|i| {
            let f = g.f[i];
            let a = rot_gen(&state.u[i]);
            T::PI() * g.h * (norm2(&state.v[i]) * f + l2 * norm2(&a) / f)
        })
        .collect();
    for i in 1..n {
        let du = sub(&state.u[i], &state.u[i - 1]);
        let face = T::PI() * g.f_face[i] * norm2(&du) / g.h;
        out[i - 1] = out[i - 1] + half * face;
        out[i] = out[i] + half * face;
    }
    out
}

fn gradient_energy<T: Real>(state: &FieldState<T>) -> T {
    let g = &state.grid;
    let l2 = g.lf() * g.lf();
    let faces: T = (1..state.cells()).map(|i| g.f_face[i] * norm2(&sub(&state.u[i], &state.u[i - 1])) / g.h).sum();
    let cent: T = (0..state.cells()).map(|i| l2 * norm2(&rot_gen(&state.u[i])) / g.f[i] * g.h).sum();
    T::PI() * (faces + cent)
}

fn weighted_sum<T: Real>(state: &FieldState<T>, q: impl Fn(usize) -> T) -> T {
    let g = &state.grid;
    (0..state.cells()).map(|i| q(i) * g.f[i] * g.h).sum()
}

/// Energy density `e = ½(|u_t|² + |u_r|² + l²|Au|²/f²)` at cell centers,
/// with `u_r` from [`FieldState::radial_derivative`].
pub fn energy_density<T: Real>(state: &FieldState<T>) -> Vec<T> {
    let g = &state.grid;
    let l2 = g.lf() * g.lf();
    let ur = state.radial_derivative();
    (0..state.cells())
        .map(|i| {
            let f = g.f[i];
            c::<T>(0.5) * (norm2(&state.v[i]) + norm2(&ur[i]) + l2 * norm2(&rot_gen(&state.u[i])) / (f * f))
        })
        .collect()
}

/// Total energy `2π ∫ e f dr` and the density `e(r)`.
pub fn energy<T: Real>(state: &FieldState<T>) -> (T, Vec<T>) {
    let kinetic = T::PI() * weighted_sum(state, |i| norm2(&state.v[i]));
    (kinetic + gradient_energy(state), energy_density(state))
}

/// `Q = 2π ∫ Au · u_t f dr`.
pub fn charge<T: Real>(state: &FieldState<T>) -> T {
    T::TAU() * weighted_sum(state, |i| dot(&rot_gen(&state.u[i]), &state.v[i]))
}

/// `D = π ∫ |u_t - ωAu|² f dr`.
pub fn rotation_defect<T: Real>(state: &FieldState<T>, omega: T) -> T {
    T::PI()
        * weighted_sum(state, |i| {
            let a = rot_gen(&state.u[i]);
            let w = [state.v[i][0] - omega * a[0], state.v[i][1] - omega * a[1], state.v[i][2]];
            norm2(&w)
        })
}

/// `𝒢_ω = π ∫ (|u_r|² + l²|Au|²/f² - ω²|Au|²) f dr` of the spatial slice.
pub fn g_omega<T: Real>(state: &FieldState<T>, omega: T) -> T {
    gradient_energy(state) - T::PI() * omega * omega * weighted_sum(state, |i| norm2(&rot_gen(&state.u[i])))
}

/// `|E - (𝒢_ω + ωQ + D)|`.
pub fn energy_identity_residual<T: Real>(state: &FieldState<T>, omega: T) -> T {
    let e = energy(state).0;
    (e - (g_omega(state, omega) + omega * charge(state) + rotation_defect(state, omega))).abs()
}

/// `E_ρ = 2π ∫_0^ρ e f dr`, linear in `ρ` inside each cell.
pub fn local_energy<T: Real>(state: &FieldState<T>, rho: T) -> T {
    local_energy_from_cells(&cell_energy(state), state.grid.h, rho)
}

fn local_energy_from_cells<T: Real>(cells: &[T], h: T, rho: T) -> T {
    if !(rho > T::zero()) {
        return T::zero();
    }
    let x = rho / h;
    let full = x.floor().to_usize().unwrap_or(usize::MAX).min(cells.len());
    let mut acc: T = cells[..full].iter().copied().sum();
    if full < cells.len() {
        acc = acc + (x - T::from_usize_lossy(full)) * cells[full];
    }
    acc
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConeCheck<T> {
    pub earlier: T,
    pub later: T,
    /// `max(0, later - earlier)`.
    pub violation: T,
    pub holds: bool,
}

/// Checks `E_ρ(u(T₁)) ≥ E_{ρ+T₁-T₂}(u(T₂)) - tol` on recorded snapshots.
/// `t1` and `t2` must be recorded times (to within `1e-9`).
pub fn cone_monotonicity_check<T: Real>(snapshots: &[FieldState<T>], t1: T, t2: T, rho: T, tol: T) -> Result<ConeCheck<T>> {
    if t1 > t2 {
        return Err(Error::InvalidInput("cone check needs T1 <= T2".into()));
    }
    let find = |t: T| snapshots.iter().find(|s| (s.t - t).abs() <= c(1e-9)).ok_or(Error::OutsideWindow);
    let (a, b) = (find(t1)?, find(t2)?);
    let shrunk = rho + t1 - t2;
    let earlier = local_energy(a, rho);
    if !(shrunk > T::zero()) {
        return Ok(ConeCheck { earlier, later: T::zero(), violation: T::zero(), holds: true });
    }
    let later = local_energy(b, shrunk);
    let violation = (later - earlier).max(T::zero());
    Ok(ConeCheck { earlier, later, violation, holds: violation <= tol })
}

#[derive(Debug, Clone, Serialize)]
pub struct CharacteristicDensities<T> {
    /// `𝒜 = (f/2)^{1/2} (|∂_η u|² + l²|Au|²/f²)^{1/2}` with `∂_η = ∂_t + ∂_r`.
    pub a: Vec<T>,
    /// `ℬ`, the same with `∂_ξ = ∂_t - ∂_r`.
    pub b: Vec<T>,
    /// `m = u_t · u_r`.
    pub m: Vec<T>,
    /// `max_r f^{1/2 - δ} 𝒜`.
    pub weighted_sup: T,
}

pub fn characteristic_densities<T: Real>(state: &FieldState<T>, delta: T) -> Result<CharacteristicDensities<T>> {
    if !(delta > T::zero() && delta < c(0.5)) {
        return Err(Error::InvalidInput(format!("Hölder exponent {delta} outside (0, 1/2)")));
    }
    let g = &state.grid;
    let l2 = g.lf() * g.lf();
    let ur = state.radial_derivative();
    let n = state.cells();
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut m = Vec::with_capacity(n);
    let mut sup = T::zero();
    for i in 0..n {
        let f = g.f[i];
        let cent = l2 * norm2(&rot_gen(&state.u[i])) / (f * f);
        let v = &state.v[i];
        let plus = [v[0] + ur[i][0], v[1] + ur[i][1], v[2] + ur[i][2]];
        let minus = sub(v, &ur[i]);
        let ai = (c::<T>(0.5) * f * (norm2(&plus) + cent)).sqrt();
        a.push(ai);
        b.push((c::<T>(0.5) * f * (norm2(&minus) + cent)).sqrt());
        m.push(dot(v, &ur[i]));
        sup = sup.max(f.powf(c::<T>(0.5) - delta) * ai);
    }
    Ok(CharacteristicDensities { a, b, m, weighted_sup: sup })
}

/// `f (e - m) = ½ f |u_t - u_r|² + ½ l²|Au|²/f`, the integrand of the
/// energy flux through a backward light cone.
fn cone_flux_density<T: Real>(state: &FieldState<T>) -> Vec<T> {
    let g = &state.grid;
    let l2 = g.lf() * g.lf();
    let ur = state.radial_derivative();
    (0..state.cells())
        .map(|i| {
            let f = g.f[i];
            T::PI() * (f * norm2(&sub(&state.v[i], &ur[i])) + l2 * norm2(&rot_gen(&state.u[i])) / f)
        })
        .collect()
}

/// Linear interpolation of cell-centered values that vanish at both poles.
fn interp_center<T: Real>(values: &[T], h: T, extent: T, closed: bool, rho: T) -> T {
    let n = values.len();
    let x = rho / h - c(0.5);
    if x <= T::zero() {
        let w = (rho / (h * c(0.5))).max(T::zero());
        return w * values[0];
    }
    let i = x.floor().to_usize().unwrap_or(n);
    if i + 1 >= n {
        let last = values[n - 1];
        if !closed {
            return last;
        }
        let w = ((extent - rho) / (h * c(0.5))).max(T::zero()).min(T::one());
        return w * last;
    }
    let frac = x - T::from_usize_lossy(i);
    values[i] + frac * (values[i + 1] - values[i])
}

/// `2π ∫ (e - m) f dt` along the backward cone `r = t̄ - t`, `t ∈ [t̄ - height, t̄]`,
/// by the trapezoid rule over recorded snapshots.
pub fn flux_on_cone<T: Real>(snapshots: &[FieldState<T>], tip: T, height: T) -> Result<T> {
    let first = snapshots.first().ok_or(Error::OutsideWindow)?;
    let last = snapshots.last().ok_or(Error::OutsideWindow)?;
    let slack = c::<T>(1e-9);
    if height < T::zero() || tip - height < first.t - slack || tip > last.t + slack || height > first.grid.extent + slack {
        return Err(Error::OutsideWindow);
    }
    let inside: Vec<&FieldState<T>> = snapshots.iter().filter(|s| s.t >= tip - height - slack && s.t <= tip + slack).collect();
    if inside.len() < 2 {
        return Ok(T::zero());
    }
    let values: Vec<T> = inside
        .iter()
        .map(|s| {
            let g = &s.grid;
            interp_center(&cone_flux_density(s), g.h, g.extent, g.closed, tip - s.t)
        })
        .collect();
    Ok(inside.windows(2).zip(values.windows(2)).map(|(s, v)| (s[1].t - s[0].t) * (v[0] + v[1]) * c(0.5)).sum())
}

/// Dense cone fluxes for a fixed set of tips, accumulated step by step.
struct FluxTracker<T> {
    height: T,
    tips: Vec<T>,
    flux: Vec<T>,
    started: Vec<bool>,
}

impl<T: Real> FluxTracker<T> {
    fn new(tips: Vec<T>, height: T) -> Self {
        let n = tips.len();
        Self { height, tips, flux: vec![T::zero(); n], started: vec![false; n] }
    }

    fn visit(&mut self, state: &FieldState<T>, dt: T) {
        let g = &state.grid;
        let mut density = None;
        let tol = dt * c(1e-6);
        for k in 0..self.tips.len() {
            let rho = self.tips[k] - state.t;
            if rho < -tol || rho > self.height + tol {
                continue;
            }
            let dens = density.get_or_insert_with(|| cone_flux_density(state));
            let value = interp_center(dens, g.h, g.extent, g.closed, rho.max(T::zero()));
            let first = !self.started[k];
            self.started[k] = true;
            let w = if first || rho.abs() <= tol { dt * c(0.5) } else { dt };
            self.flux[k] = self.flux[k] + w * value;
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct NonlinearityRatio<T> {
    /// `sup_r |Q(u)| f / (𝒜ℬ)` over admissible cells; `None` when no cell has `𝒜ℬ > 0`.
    pub sup: Option<T>,
    pub cells_used: usize,
}

/// Ratio of the wave-map nonlinearity `Q(u) = |u_t|² - |u_r|² + l²|Au|²/f²`
/// (the normal component `B(u)(u_t - u_r, u_t + u_r) + B(u)(lAu, lAu)/f²`
/// for the round sphere) to `𝒜ℬ/f`. Cauchy–Schwarz bounds it by 2.
pub fn nonlinearity_ratio<T: Real>(state: &FieldState<T>) -> NonlinearityRatio<T> {
    let g = &state.grid;
    let l2 = g.lf() * g.lf();
    let ur = state.radial_derivative();
    let dens = match characteristic_densities(state, c(0.25)) {
        Ok(d) => d,
        Err(_) => return NonlinearityRatio { sup: None, cells_used: 0 },
    };
    let scale_ab = dens.a.iter().zip(&dens.b).map(|(a, b)| *a * *b).fold(T::zero(), T::max);
    let floor = scale_ab * c(1e-12);
    let mut sup: Option<T> = None;
    let mut used = 0;
    for i in 0..state.cells() {
        let ab = dens.a[i] * dens.b[i];
        if !(ab > floor) || ab == T::zero() {
            continue;
        }
        let f = g.f[i];
        let q = norm2(&state.v[i]) - norm2(&ur[i]) + l2 * norm2(&rot_gen(&state.u[i])) / (f * f);
        let ratio = q.abs() * f / ab;
        sup = Some(sup.map_or(ratio, |s: T| s.max(ratio)));
        used += 1;
    }
    NonlinearityRatio { sup, cells_used: used }
}

fn h1_l2_inner<T: Real>(a: &FieldState<T>, b_u: &[Vec3<T>], b_v: &[Vec3<T>]) -> T {
    let g = &a.grid;
    let l2 = g.lf() * g.lf();
    let mut acc = T::zero();
    for i in 0..a.cells() {
        let f = g.f[i];
        let zero = dot(&a.u[i], &b_u[i]) + l2 * dot(&rot_gen(&a.u[i]), &rot_gen(&b_u[i])) / (f * f);
        acc = acc + (zero + dot(&a.v[i], &b_v[i])) * f * g.h;
    }
    for i in 1..a.cells() {
        let da = sub(&a.u[i], &a.u[i - 1]);
        let db = sub(&b_u[i], &b_u[i - 1]);
        acc = acc + g.f_face[i] * dot(&da, &db) / g.h;
    }
    T::TAU() * acc
}

/// `H¹ × L²` distance between two states on the same grid, with
/// `‖w‖²_{H¹} = 2π ∫ (|w|² + |w_r|² + l²|Aw|²/f²) f dr`.
pub fn state_distance<T: Real>(a: &FieldState<T>, b: &FieldState<T>) -> T {
    let du: Vec<Vec3<T>> = a.u.iter().zip(&b.u).map(|(x, y)| sub(x, y)).collect();
    let dv: Vec<Vec3<T>> = a.v.iter().zip(&b.v).map(|(x, y)| sub(x, y)).collect();
    let diff = FieldState { grid: a.grid.clone(), u: du.clone(), v: dv.clone(), t: a.t };
    h1_l2_inner(&diff, &du, &dv).max(T::zero()).sqrt()
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrbitDistance<T> {
    pub distance: T,
    /// Minimizing rotation angle.
    pub tau: T,
}

/// Distance from `state` to the rotation orbit `{e^{τA} reference}`. The
/// squared distance is `C₀ - 2(P cos τ + Q̃ sin τ)`, minimized at
/// `τ* = atan2(Q̃, P)`.
pub fn distance_to_orbit<T: Real>(state: &FieldState<T>, reference: &FieldState<T>) -> Result<OrbitDistance<T>> {
    if state.cells() != reference.cells() || state.l() != reference.l() {
        return Err(Error::InvalidInput("state and reference live on different grids".into()));
    }
    let perp = |w: &[Vec3<T>]| -> Vec<Vec3<T>> { w.iter().map(|x| [x[0], x[1], T::zero()]).collect() };
    let rot = |w: &[Vec3<T>]| -> Vec<Vec3<T>> { w.iter().map(rot_gen).collect() };
    let p = h1_l2_inner(state, &perp(&reference.u), &perp(&reference.v));
    let q = h1_l2_inner(state, &rot(&reference.u), &rot(&reference.v));
    let tau = if p == T::zero() && q == T::zero() { T::zero() } else { q.atan2(p) };
    let distance = state_distance(state, &reference.rotated(tau));
    Ok(OrbitDistance { distance, tau })
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsRecord<T> {
    pub t: T,
    pub energy: T,
    pub charge: T,
    pub d: T,
    pub g: T,
    pub identity_residual: T,
    /// Running `𝒳`: max of `f^{1/2-δ}𝒜` over all records up to `t`.
    pub x: T,
    /// Energy flux through the backward cone with tip `(t, r = 0)`, truncated
    /// at the configured height and at the start of the run.
    pub flux: T,
    pub local_energy: Vec<T>,
    /// Distance to the reference orbit, when a reference is configured.
    pub dist: Option<T>,
}

#[derive(Debug, Clone)]
pub struct DiagnosticsOptions<T> {
    pub omega: T,
    /// Hölder exponent in `𝒳`.
    pub delta_hoelder: T,
    pub reference: Option<FieldState<T>>,
    /// Radii at which cone-slice energies are recorded.
    pub local_radii: Vec<T>,
    /// Height of the backward cones in the flux column; `None` means `R/2`,
    /// so that each cone stays within the hemisphere around its tip.
    pub cone_height: Option<T>,
    pub keep_snapshots: bool,
}

impl<T: Real> DiagnosticsOptions<T> {
    pub fn new(omega: T) -> Self {
        Self { omega, delta_hoelder: c(0.1), reference: None, local_radii: Vec::new(), cone_height: None, keep_snapshots: false }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct Drifts<T> {
    /// `max_t |E(t) - E(0)| / E(0)`.
    pub energy: T,
    /// `max_t |Q(t) - Q(0)| / |Q(0)|`, or relative to `E(0)` when `Q(0)` vanishes.
    pub charge: T,
}

#[derive(Debug, Clone)]
pub struct RecordedRun<T> {
    pub output: RunOutput<T>,
    pub records: Vec<DiagnosticsRecord<T>>,
    pub snapshots: Vec<FieldState<T>>,
}

impl<T: Real> RecordedRun<T> {
    pub fn drifts(&self) -> Drifts<T> {
        drifts(&self.records)
    }

    pub fn max_identity_residual(&self) -> T {
        self.records.iter().map(|r| r.identity_residual).fold(T::zero(), T::max)
    }

    pub fn sup_dist(&self) -> Option<T> {
        self.records.iter().filter_map(|r| r.dist).reduce(T::max)
    }
}

pub fn drifts<T: Real>(records: &[DiagnosticsRecord<T>]) -> Drifts<T> {
    let Some(first) = records.first() else {
        return Drifts { energy: T::zero(), charge: T::zero() };
    };
    let e0 = first.energy.abs().max(T::min_positive_value());
    let q0 = if first.charge.abs() > c::<T>(1e-12) * e0 { first.charge.abs() } else { e0 };
    let energy = records.iter().map(|r| (r.energy - first.energy).abs() / e0).fold(T::zero(), T::max);
    let charge = records.iter().map(|r| (r.charge - first.charge).abs() / q0).fold(T::zero(), T::max);
    Drifts { energy, charge }
}

/// Evolves `state` and records the full diagnostic series.
pub fn record_run<T: Real>(state: FieldState<T>, run_options: &RunOptions<T>, options: &DiagnosticsOptions<T>) -> Result<RecordedRun<T>> {
    let (steps, dt) = run_options.schedule(&state.grid)?;
    let every = run_options.record_every.max(1);
    let t0 = state.t;
    let tips: Vec<T> = (0..=steps).filter(|&k| k % every == 0 || k == steps).map(|k| t0 + T::from_usize_lossy(k) * dt).collect();
    let height = options.cone_height.unwrap_or(state.grid.extent * c(0.5)).min(state.grid.extent);
    let mut tracker = FluxTracker::new(tips, height);
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut running_x = T::zero();
    let mut failure = None;
    let output = run(state, run_options, |s, visit, dt| {
        tracker.visit(s, dt);
        if visit != Visit::Record || failure.is_some() {
            return;
        }
        match record(s, options, &mut running_x) {
            Ok(mut rec) => {
                let k = records.len();
                rec.flux = tracker.flux.get(k).copied().unwrap_or(T::zero());
                records.push(rec);
            }
            Err(e) => failure = Some(e),
        }
        if options.keep_snapshots {
            snapshots.push(s.clone());
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(RecordedRun { output, records, snapshots })
}

fn record<T: Real>(s: &FieldState<T>, options: &DiagnosticsOptions<T>, running_x: &mut T) -> Result<DiagnosticsRecord<T>> {
    let omega = options.omega;
    let energy = energy(s).0;
    let charge = charge(s);
    let d = rotation_defect(s, omega);
    let g = g_omega(s, omega);
    let x = characteristic_densities(s, options.delta_hoelder)?.weighted_sup;
    *running_x = running_x.max(x);
    let dist = match &options.reference {
        Some(reference) => Some(distance_to_orbit(s, reference)?.distance),
        None => None,
    };
    Ok(DiagnosticsRecord {
        t: s.t,
        energy,
        charge,
        d,
        g,
        identity_residual: (energy - (g + omega * charge + d)).abs(),
        x: *running_x,
        flux: T::zero(),
        local_energy: options.local_radii.iter().map(|&r| local_energy(s, r)).collect(),
        dist,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Stable,
    Unstable,
    Aborted,
}

#[derive(Debug, Clone)]
pub struct StabilityOptions<T> {
    pub cfl: T,
    pub record_every: usize,
    /// Closeness threshold for the verdict.
    pub epsilon: T,
    pub shape: PerturbationShape,
    pub seed: u64,
    pub delta_hoelder: T,
    pub keep_snapshots: bool,
}

impl<T: Real> Default for StabilityOptions<T> {
    fn default() -> Self {
        Self {
            cfl: c(0.4),
            record_every: 50,
            epsilon: c(1e-2),
            shape: PerturbationShape::Bump,
            seed: 0,
            delta_hoelder: c(0.1),
            keep_snapshots: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport<T> {
    pub run: RecordedRun<T>,
    pub sup_dist: T,
    pub verdict: Verdict,
    /// `H¹ × L²` size of the initial perturbation.
    pub initial_distance: T,
}

/// Perturbs the rotating solution by `delta`, evolves to `t_final` and
/// tracks the distance to its rotation orbit.
pub fn stability_experiment<T: Real>(
    solution: &StationarySolution<T>,
    omega: T,
    delta: T,
    t_final: T,
    options: &StabilityOptions<T>,
) -> Result<StabilityReport<T>> {
    if !(t_final > T::zero()) {
        return Err(Error::InvalidInput("final time must be positive".into()));
    }
    let reference = state_from_stationary(solution, omega)?;
    let initial = perturb_state(&reference, delta, options.shape, options.seed)?;
    let initial_distance = state_distance(&initial, &reference);
    let run_options = RunOptions { t_final, cfl: options.cfl, record_every: options.record_every };
    let diag = DiagnosticsOptions {
        omega,
        delta_hoelder: options.delta_hoelder,
        reference: Some(reference),
        local_radii: Vec::new(),
        cone_height: None,
        keep_snapshots: options.keep_snapshots,
    };
    let run = record_run(initial, &run_options, &diag)?;
    let sup_dist = run.sup_dist().unwrap_or(T::zero());
    let verdict = if run.output.failure.is_some() {
        Verdict::Aborted
    } else if sup_dist <= options.epsilon {
        Verdict::Stable
    } else {
        Verdict::Unstable
    };
    Ok(StabilityReport { run, sup_dist, verdict, initial_distance })
}
