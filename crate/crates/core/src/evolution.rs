//! The equivariant Cauchy problem as a sphere-valued 1+1 wave equation
//!
//! ```text
//! u_tt = u_rr + (f'/f) u_r + (l²/f²) A²u + (|∇u|² - |u_t|²) u
//! ```
//!
//! on cells `r_i = (i + ½) h`. The spatial operator is the negative gradient
//! of the discrete energy, so the radial part is the conservative stencil
//! `[f_{i+½}(u_{i+1} - u_i) - f_{i-½}(u_i - u_{i-1})] / (f_i h²)`; the face
//! weights vanish at the poles and no ghost values enter the update. Time
//! stepping is RATTLE: leapfrog with the constraint multipliers `λu` chosen
//! so that `|u| = 1` and `u · v = 0` hold after every step.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::SurfaceProfile;
use crate::scalar::{axpy, c, dot, norm2, rotate, scale, sub, Real, Vec3};
use crate::stationary::StationarySolution;

/// Cell-centered discretization of `[0, R]` together with the rotation number.
#[derive(Debug, Clone)]
pub struct CellGrid<T> {
    pub l: u32,
    pub h: T,
    pub extent: T,
    /// Cell centers.
    pub r: Vec<T>,
    /// `f` at cell centers.
    pub f: Vec<T>,
    /// `f` at the `N + 1` faces `i h`; zero at both ends.
    pub f_face: Vec<T>,
    pub closed: bool,
}

impl<T: Real> CellGrid<T> {
    pub fn new(surface: &SurfaceProfile<T>, cells: usize, l: u32) -> Result<Self> {
        if cells < 4 {
            return Err(Error::InvalidInput(format!("need at least 4 cells, got {cells}")));
        }
        let extent = surface.extent();
        let h = extent / T::from_usize_lossy(cells);
        let r: Vec<T> = (0..cells).map(|i| h * (T::from_usize_lossy(i) + c(0.5))).collect();
        let f = r.iter().map(|&x| surface.jet(x).f).collect();
        let mut f_face: Vec<T> = (0..=cells).map(|i| surface.jet(h * T::from_usize_lossy(i)).f).collect();
        // open profiles get a reflecting (zero flux) outer boundary
        f_face[0] = T::zero();
        f_face[cells] = T::zero();
        Ok(Self { l, h, extent, r, f, f_face, closed: surface.is_closed() })
    }

    pub fn cells(&self) -> usize {
        self.r.len()
    }

    pub(crate) fn lf(&self) -> T {
        T::from_u32(self.l).unwrap_or_else(T::one)
    }

    /// Largest admissible `|dt|`, namely `h / (1 + l)`.
    pub fn max_step(&self) -> T {
        self.h / (T::one() + self.lf())
    }

    /// `(-1)^l`, the parity of `(u₁, u₂)` under reflection through a pole.
    pub(crate) fn pole_parity(&self) -> T {
        if self.l.is_multiple_of(2) {
            T::one()
        } else {
            -T::one()
        }
    }
}

/// Spatial slice `(u, u_t)` of an equivariant map at time `t`.
#[derive(Debug, Clone)]
pub struct FieldState<T> {
    pub grid: Arc<CellGrid<T>>,
    pub u: Vec<Vec3<T>>,
    pub v: Vec<Vec3<T>>,
    pub t: T,
}

impl<T: Real> FieldState<T> {
    /// Builds a state, normalizing `u` and projecting `v` onto the tangent
    /// plane where they are off by more than rounding. `u` must already be
    /// within `1e-6` of unit length.
    pub fn new(grid: Arc<CellGrid<T>>, u: Vec<Vec3<T>>, v: Vec<Vec3<T>>, t: T) -> Result<Self> {
        let n = grid.cells();
        if u.len() != n || v.len() != n {
            return Err(Error::InvalidInput(format!("state length mismatch: {} cells, {} u, {} v", n, u.len(), v.len())));
        }
        for (i, ui) in u.iter().enumerate() {
            let len = norm2(ui).sqrt();
            if !(len - T::one()).abs().le(&c(1e-6)) {
                return Err(Error::InvalidInput(format!("|u| = {len} at cell {i}")));
            }
        }
        let mut state = Self { grid, u, v, t };
        let eps = T::epsilon() * c(4.0);
        for (u, v) in state.u.iter_mut().zip(state.v.iter_mut()) {
            if (norm2(u) - T::one()).abs() > eps {
                *u = scale(T::one() / norm2(u).sqrt(), u);
            }
            if dot(u, v).abs() > eps * norm2(v).sqrt() {
                *v = axpy(-dot(u, v), u, v);
            }
        }
        Ok(state)
    }

    /// Constant map to the north pole at rest.
    pub fn pole(surface: &SurfaceProfile<T>, cells: usize, l: u32) -> Result<Self> {
        let grid = Arc::new(CellGrid::new(surface, cells, l)?);
        let north = [T::zero(), T::zero(), T::one()];
        let zero = [T::zero(); 3];
        Ok(Self { u: vec![north; cells], v: vec![zero; cells], grid, t: T::zero() })
    }

    pub fn cells(&self) -> usize {
        self.grid.cells()
    }

    pub fn l(&self) -> u32 {
        self.grid.l
    }

    fn project(&mut self) {
        for (u, v) in self.u.iter_mut().zip(self.v.iter_mut()) {
            *u = scale(T::one() / norm2(u).sqrt(), u);
            *v = axpy(-dot(u, v), u, v);
        }
    }

    /// `(max ||u| - 1|, max |u · v|)`.
    pub fn constraint_defect(&self) -> (T, T) {
        self.u
            .iter()
            .zip(&self.v)
            .fold((T::zero(), T::zero()), |(a, b), (u, v)| (a.max((norm2(u).sqrt() - T::one()).abs()), b.max(dot(u, v).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|w| w.iter().all(|x| x.is_finite()))
    }

    /// `e^{τA}` applied to both `u` and `v`.
    pub fn rotated(&self, tau: T) -> Self {
        let mut out = self.clone();
        for w in out.u.iter_mut().chain(out.v.iter_mut()) {
            *w = rotate(tau, w);
        }
        out
    }

    /// Unconstrained force `Δ_h u + (l²/f²) A²u`.
    pub fn force(&self) -> Vec<Vec3<T>> {
        force(&self.grid, &self.u)
    }

    /// `u_tt = force + λu` with `λ = -u · force - |u_t|²`, the multiplier that
    /// keeps `u · u_tt = -|u_t|²`.
    pub fn acceleration(&self) -> Vec<Vec3<T>> {
        self.force().iter().zip(self.u.iter().zip(&self.v)).map(|(fi, (u, v))| axpy(-dot(u, fi) - norm2(v), u, fi)).collect()
    }

    /// `max_i |u_i · u_tt,i + |v_i|²|`, which vanishes for the constrained flow.
    pub fn constraint_identity_residual(&self) -> T {
        self.acceleration().iter().zip(self.u.iter().zip(&self.v)).map(|(a, (u, v))| (dot(u, a) + norm2(v)).abs()).fold(T::zero(), T::max)
    }

    /// Central-difference `u_r` at cell centers. Ghost cells mirror the
    /// state through each pole with `(u₁, u₂) ↦ (-1)^l (u₁, u₂)`; an open
    /// outer boundary is mirrored evenly.
    pub fn radial_derivative(&self) -> Vec<Vec3<T>> {
        let n = self.cells();
        let g = &self.grid;
        let p = g.pole_parity();
        let mirror = |w: &Vec3<T>| [p * w[0], p * w[1], w[2]];
        let left = mirror(&self.u[0]);
        let right = if g.closed { mirror(&self.u[n - 1]) } else { self.u[n - 1] };
        let inv = T::one() / (c::<T>(2.0) * g.h);
        (0..n)
            .map(|i| {
                let a = if i == 0 { &left } else { &self.u[i - 1] };
                let b = if i + 1 == n { &right } else { &self.u[i + 1] };
                scale(inv, &sub(b, a))
            })
            .collect()
    }

    /// `|(u₁, u₂)| / r^l` in the first and last cell; bounded on smooth
    /// states with the expected pole decay.
    pub fn pole_amplitude(&self) -> (T, T) {
        let n = self.cells();
        let g = &self.grid;
        let rho = |w: &Vec3<T>| (w[0] * w[0] + w[1] * w[1]).sqrt();
        let lf = g.lf();
        (rho(&self.u[0]) / g.r[0].powf(lf), rho(&self.u[n - 1]) / (g.extent - g.r[n - 1]).powf(lf))
    }
}

pub(crate) fn force<T: Real>(grid: &CellGrid<T>, u: &[Vec3<T>]) -> Vec<Vec3<T>> {
    let n = grid.cells();
    let h2 = grid.h * grid.h;
    let l2 = grid.lf() * grid.lf();
    (0..n)
        .map(|i| {
            let mut acc = [T::zero(); 3];
            if i + 1 < n {
                acc = axpy(grid.f_face[i + 1], &sub(&u[i + 1], &u[i]), &acc);
            }
            if i > 0 {
                acc = axpy(-grid.f_face[i], &sub(&u[i], &u[i - 1]), &acc);
            }
            let fi = grid.f[i];
            let mut out = scale(T::one() / (fi * h2), &acc);
            let cent = l2 / (fi * fi);
            out[0] = out[0] - cent * u[i][0];
            out[1] = out[1] - cent * u[i][1];
            out
        })
        .collect()
}

/// One RATTLE step without the final renormalization. The update is
/// symmetric: stepping back with `-dt` recovers the input to rounding.
pub fn step_unprojected<T: Real>(state: &FieldState<T>, dt: T) -> Result<FieldState<T>> {
    let grid = &state.grid;
    let bound = grid.max_step();
    if dt.abs() > bound * (T::one() + c(1e-12)) {
        return Err(Error::Cfl { dt: dt.to_f64_lossy(), bound: bound.to_f64_lossy() });
    }
    let half = dt * c(0.5);
    let f0 = state.force();
    let n = state.cells();
    let mut u_new = Vec::with_capacity(n);
    let mut v_half = Vec::with_capacity(n);
    for i in 0..n {
        let (u, v) = (&state.u[i], &state.v[i]);
        let vh = axpy(half, &f0[i], v);
        let w = axpy(dt, &vh, u);
        // |w + s u| = 1 for the root s closest to zero
        let wu = dot(&w, u);
        let disc = wu * wu + T::one() - norm2(&w);
        if !(disc >= T::zero()) {
            return Err(Error::EvolutionAborted { t: state.t.to_f64_lossy(), reason: format!("constraint projection failed at cell {i}") });
        }
        let s = (T::one() - norm2(&w)) / (wu + disc.sqrt());
        u_new.push(axpy(s, u, &w));
        v_half.push(if dt == T::zero() { vh } else { axpy(s / dt, u, &vh) });
    }
    let f1 = force(grid, &u_new);
    let v_new = (0..n)
        .map(|i| {
            let w = axpy(half, &f1[i], &v_half[i]);
            let un = &u_new[i];
            axpy(-dot(un, &w) / norm2(un), un, &w)
        })
        .collect();
    Ok(FieldState { grid: state.grid.clone(), u: u_new, v: v_new, t: state.t + dt })
}

/// One RATTLE step followed by renormalization of `u` and tangential
/// projection of `v`, which only removes rounding drift.
pub fn step<T: Real>(state: &FieldState<T>, dt: T) -> Result<FieldState<T>> {
    let mut next = step_unprojected(state, dt)?;
    next.project();
    Ok(next)
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions<T> {
    pub t_final: T,
    /// Fraction of the stability bound `h / (1 + l)`; must lie in `(0, 1]`.
    pub cfl: T,
    /// Record every this many steps (the final state is always recorded).
    pub record_every: usize,
}

impl<T: Real> RunOptions<T> {
    pub fn new(t_final: T, cfl: T) -> Self {
        Self { t_final, cfl, record_every: 50 }
    }

    /// Step count and uniform step size covering `[t, t + t_final]`.
    pub fn schedule(&self, grid: &CellGrid<T>) -> Result<(usize, T)> {
        if !(self.cfl > T::zero() && self.cfl <= T::one()) {
            return Err(Error::Cfl { dt: (self.cfl * grid.max_step()).to_f64_lossy(), bound: grid.max_step().to_f64_lossy() });
        }
        if !(self.t_final >= T::zero()) {
            return Err(Error::InvalidInput(format!("final time {} must be non-negative", self.t_final)));
        }
        let target = self.cfl * grid.max_step();
        let steps = (self.t_final / target).ceil().to_usize().unwrap_or(0);
        if steps == 0 {
            return Ok((0, T::zero()));
        }
        Ok((steps, self.t_final / T::from_usize_lossy(steps)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FailureRecord {
    pub t: f64,
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    /// Final state, or the last good state when the run aborted.
    pub state: FieldState<T>,
    pub steps: usize,
    pub dt: T,
    pub failure: Option<FailureRecord>,
}

/// What the observer is shown after each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Visit {
    /// Initial state and every `record_every` steps (and the final state).
    Record,
    Step,
}

/// Evolves `state` for `options.t_final`, calling `observer` on the initial
/// state and after every step. Constraint blow-up or non-finite values stop
/// the run with a failure record; the returned state is then the last good one.
pub fn run<T: Real, F>(state: FieldState<T>, options: &RunOptions<T>, mut observer: F) -> Result<RunOutput<T>>
where
    F: FnMut(&FieldState<T>, Visit, T),
{
    let (steps, dt) = options.schedule(&state.grid)?;
    let every = options.record_every.max(1);
    observer(&state, Visit::Record, dt);
    let mut current = state;
    for k in 1..=steps {
        let fail = |reason: String| FailureRecord { t: (current.t + dt).to_f64_lossy(), step: k, reason };
        let next = match step(&current, dt) {
            Ok(s) => s,
            Err(Error::EvolutionAborted { reason, .. }) => {
                let failure = Some(fail(reason));
                return Ok(RunOutput { state: current, steps: k - 1, dt, failure });
            }
            Err(e) => return Err(e),
        };
        if !next.is_finite() {
            let failure = Some(fail("non-finite field values".into()));
            return Ok(RunOutput { state: current, steps: k - 1, dt, failure });
        }
        let (du, dv) = next.constraint_defect();
        if du > c(1e-10) || dv > c(1e-8) {
            let failure = Some(fail(format!("constraint defect |u|-1 = {du:e}, u.v = {dv:e}")));
            return Ok(RunOutput { state: current, steps: k - 1, dt, failure });
        }
        current = next;
        let visit = if k % every == 0 || k == steps { Visit::Record } else { Visit::Step };
        observer(&current, visit, dt);
    }
    Ok(RunOutput { state: current, steps, dt, failure: None })
}

/// Nodal values on `r_i = i h` to cell centers by 4-point Lagrange
/// interpolation (one-sided in the end cells).
pub(crate) fn nodes_to_centers<T: Real>(phi: &[T]) -> Vec<T> {
    let n = phi.len() - 1;
    let lagrange = |start: usize, x: T| -> T {
        (0..4)
            .map(|a| {
                let xa = T::from_usize_lossy(a);
                let w = (0..4).filter(|&b| b != a).fold(T::one(), |acc, b| {
                    let xb = T::from_usize_lossy(b);
                    acc * (x - xb) / (xa - xb)
                });
                w * phi[start + a]
            })
            .sum()
    };
    (0..n)
        .map(|i| {
            let start = i.saturating_sub(1).min(n - 3);
            lagrange(start, T::from_usize_lossy(i) + c(0.5) - T::from_usize_lossy(start))
        })
        .collect()
}

/// Initial data `u = (g(φ), 0, h(φ))`, `u_t = ωAu` of the rotating solution
/// `e^{ωtA} u` built from a converged minimizer.
pub fn state_from_stationary<T: Real>(solution: &StationarySolution<T>, omega: T) -> Result<FieldState<T>> {
    if !solution.converged {
        return Err(Error::Unconverged);
    }
    let cells = solution.cells();
    if cells < 4 {
        return Err(Error::InvalidInput("stationary grid too coarse".into()));
    }
    let grid = Arc::new(CellGrid::new(&solution.surface, cells, solution.l)?);
    let phi = nodes_to_centers(&solution.phi);
    let u: Vec<Vec3<T>> = phi.iter().map(|&p| [solution.target.g(p).0, T::zero(), solution.target.h(p).0]).collect();
    let v = u.iter().map(|w| [T::zero(), omega * w[0], T::zero()]).collect();
    let mut state = FieldState { grid, u, v, t: T::zero() };
    state.project();
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationShape {
    /// `cos²` bump of half-width `0.15 R` centered at a seeded point in `[0.35 R, 0.65 R]`.
    Bump,
    /// `sin²(πr/R)` over the whole interval.
    Mode,
}

/// Unit vector in the direction of increasing polar angle on the target.
fn polar_direction<T: Real>(u: &Vec3<T>) -> Vec3<T> {
    let rho = (u[0] * u[0] + u[1] * u[1]).sqrt();
    if rho <= T::epsilon() {
        return [T::one(), T::zero(), T::zero()];
    }
    [u[2] * u[0] / rho, u[2] * u[1] / rho, -rho]
}

/// Adds `δ b(r) e_φ` to both `u` and `u_t`, then restores the constraints.
pub fn perturb_state<T: Real>(state: &FieldState<T>, delta: T, shape: PerturbationShape, seed: u64) -> Result<FieldState<T>> {
    if !(delta >= T::zero()) {
        return Err(Error::InvalidInput(format!("perturbation size {delta} must be non-negative")));
    }
    if delta == T::zero() {
        return Ok(state.clone());
    }
    let g = &state.grid;
    let big_r = g.extent;
    let bump: Box<dyn Fn(T) -> T> = match shape {
        PerturbationShape::Bump => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let center = big_r * c(rng.gen_range(0.35..0.65));
            let width = big_r * c(0.15);
            Box::new(move |r: T| {
                let x = (r - center) / width;
                if x.abs() >= T::one() {
                    T::zero()
                } else {
                    let co = (x * T::FRAC_PI_2()).cos();
                    co * co
                }
            })
        }
        PerturbationShape::Mode => Box::new(move |r: T| {
            let s = (T::PI() * r / big_r).sin();
            s * s
        }),
    };
    let mut out = state.clone();
    for i in 0..state.cells() {
        let b = delta * bump(g.r[i]);
        let e = polar_direction(&state.u[i]);
        let u = axpy(b, &e, &state.u[i]);
        let len = norm2(&u).sqrt();
        if !(len >= c(0.5)) {
            return Err(Error::InvalidInput(format!("perturbation degenerates |u| at cell {i}")));
        }
        out.u[i] = scale(T::one() / len, &u);
        out.v[i] = axpy(b, &e, &state.v[i]);
    }
    out.project();
    Ok(out)
}

/// `e^{ωtA} u(0)` compared with `u(t)`: `max_i |u_i(t) - e^{ωtA} u_i(0)|`.
pub fn rotating_solution_error<T: Real>(initial: &FieldState<T>, evolved: &FieldState<T>, omega: T) -> T {
    let tau = omega * (evolved.t - initial.t);
    initial.u.iter().zip(&evolved.u).map(|(a, b)| norm2(&sub(&rotate(tau, a), b)).sqrt()).fold(T::zero(), T::max)
}

/// Random tangent-consistent state used by property tests: smooth `u`
/// with the right pole behavior and a small random velocity.
pub fn random_smooth_state<T: Real>(surface: &SurfaceProfile<T>, cells: usize, l: u32, seed: u64) -> Result<FieldState<T>> {
    let grid = Arc::new(CellGrid::new(surface, cells, l)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp: [f64; 3] = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let vamp: [f64; 3] = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    let big_r = grid.extent;
    let mut u = Vec::with_capacity(cells);
    let mut v = Vec::with_capacity(cells);
    for &r in &grid.r {
        let x = T::PI() * r / big_r;
        let phi = x + c::<T>(amp[0]) * x.sin() * (c::<T>(2.0) * x).sin();
        let zeta = c::<T>(amp[1]) * x.sin().powi(2);
        let (s, co) = phi.sin_cos();
        let w = [s * zeta.cos(), s * zeta.sin(), co];
        let dphi = c::<T>(vamp[0]) * x.sin().powi(2);
        let dzeta = c::<T>(vamp[1]) + c::<T>(amp[2]);
        let e = polar_direction(&w);
        let a = [-w[1], w[0], T::zero()];
        u.push(w);
        v.push(axpy(dphi, &e, &scale(dzeta, &a)));
    }
    FieldState::new(grid, u, v, T::zero())
}
