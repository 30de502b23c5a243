//! Geodesics on a surface of revolution.
//!
//! A unit-speed geodesic is tracked by `(r, θ, ψ)` where `ψ` is the angle
//! between the velocity and `∂_r`:
//!
//! ```text
//! r' = cos ψ,   θ' = sin ψ / f(r),   ψ' = -f'(r) sin ψ / f(r)
//! ```
//!
//! which keeps the Clairaut quantity `f sin ψ = f² θ'` constant.

use serde::Serialize;

use super::comparison::{comparison_angles, comparison_distances, Comparison};
use super::profile::SurfaceProfile;
use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Samples along a traced geodesic.
#[derive(Debug, Clone, Default)]
pub struct GeodesicPath<T> {
    pub s: Vec<T>,
    pub r: Vec<T>,
    pub theta: Vec<T>,
    pub psi: Vec<T>,
}

impl<T: Real> GeodesicPath<T> {
    /// Clairaut invariant `f(r) sin ψ` at every sample.
    pub fn clairaut(&self, profile: &SurfaceProfile<T>) -> Vec<T> {
        self.r.iter().zip(&self.psi).map(|(&r, &p)| profile.jet(r).f * p.sin()).collect()
    }

    /// `max |c_i - c_0| / max(|c_0|, 1e-300)` over the path.
    pub fn clairaut_drift(&self, profile: &SurfaceProfile<T>) -> T {
        let cl = self.clairaut(profile);
        let c0 = cl[0];
        let scale = c0.abs().max(T::min_positive_value());
        cl.iter().map(|&v| (v - c0).abs()).fold(T::zero(), T::max) / scale
    }
}

// State: r, θ, ψ, ∫(1 - f') dθ, and the Jacobi field (δr, δθ, δψ) along ∂/∂ψ₀.
type State<T> = [T; 7];

fn flow<T: Real>(profile: &SurfaceProfile<T>, y: &State<T>) -> State<T> {
    let jet = profile.jet(y[0]);
    let (sp, cp) = y[2].sin_cos();
    let inv_f = T::one() / jet.f;
    let dtheta = sp * inv_f;
    let q = jet.df * inv_f;
    [
        cp,
        dtheta,
        -q * sp,
        (T::one() - jet.df) * dtheta,
        -sp * y[6],
        cp * inv_f * y[6] - sp * q * inv_f * y[4],
        -(jet.d2f * inv_f - q * q) * sp * y[4] - q * cp * y[6],
    ]
}

fn rk4_step<T: Real>(profile: &SurfaceProfile<T>, y: &State<T>, h: T) -> State<T> {
    let half = h * c(0.5);
    let k1 = flow(profile, y);
    let y2: State<T> = std::array::from_fn(|i| y[i] + half * k1[i]);
    let k2 = flow(profile, &y2);
    let y3: State<T> = std::array::from_fn(|i| y[i] + half * k2[i]);
    let k3 = flow(profile, &y3);
    let y4: State<T> = std::array::from_fn(|i| y[i] + h * k3[i]);
    let k4 = flow(profile, &y4);
    std::array::from_fn(|i| y[i] + h / c(6.0) * (k1[i] + c::<T>(2.0) * (k2[i] + k3[i]) + k4[i]))
}

fn inside<T: Real>(profile: &SurfaceProfile<T>, r: T) -> bool {
    r > T::zero() && (r < profile.extent() || !profile.is_closed()) && r.is_finite()
}

/// Traces the geodesic leaving `start = (r, θ)` at angle `direction` from
/// `∂_r`, sampling every `step` up to arclength `length`.
pub fn geodesic_trace<T: Real>(profile: &SurfaceProfile<T>, start: (T, T), direction: T, length: T, step: T) -> Result<GeodesicPath<T>> {
    if !(step > T::zero()) || length < T::zero() {
        return Err(Error::InvalidInput("step must be positive and length non-negative".into()));
    }
    if !inside(profile, start.0) {
        return Err(Error::PoleCrossing { s: 0.0 });
    }
    let n = (length / step).ceil().to_usize().unwrap_or(0).max(1);
    let h = length / T::from_usize_lossy(n);
    let mut y: State<T> = [start.0, start.1, direction, T::zero(), T::zero(), T::zero(), T::zero()];
    let mut path = GeodesicPath::default();
    path.s.reserve(n + 1);
    let record = |path: &mut GeodesicPath<T>, s: T, y: &State<T>| {
        path.s.push(s);
        path.r.push(y[0]);
        path.theta.push(y[1]);
        path.psi.push(y[2]);
    };
    record(&mut path, T::zero(), &y);
    for i in 1..=n {
        y = rk4_step(profile, &y, h);
        let s = h * T::from_usize_lossy(i);
        if !inside(profile, y[0]) {
            return Err(Error::PoleCrossing { s: s.to_f64_lossy() });
        }
        record(&mut path, s, &y);
    }
    Ok(path)
}

/// Geodesic triangle spanned by the north pole, `(r, 0)` and `(r', θ')`.
///
/// `alpha` is the angle at `(r', θ')` (facing the side of length `r`),
/// `beta` the angle at `(r, 0)` (facing `r'`).
#[derive(Debug, Clone, Serialize)]
pub struct GeodesicTriangle<T> {
    pub r: T,
    pub r_prime: T,
    pub theta_prime: T,
    pub d: T,
    pub y: T,
    pub alpha: T,
    pub beta: T,
    /// `∬_Δ k dA`, accumulated along the connecting geodesic.
    pub curvature_integral: T,
    pub comparison: Option<Comparison<T>>,
}

impl<T: Real> GeodesicTriangle<T> {
    /// Fills the flat and constant-curvature comparison quantities.
    pub fn compare(mut self, curvature: T) -> Result<Self> {
        let (d0, dk) = comparison_distances(self.r, self.r_prime, self.theta_prime, curvature)?;
        let ang = comparison_angles(self.r, self.r_prime, self.d, curvature)?;
        self.comparison =
            Some(Comparison { curvature, d0, dk, alpha0: ang.alpha0, alpha_k: ang.alpha_k, beta0: ang.beta0, beta_k: ang.beta_k });
        Ok(self)
    }

    /// `α + β + θ' - π - ∬ k dA`.
    pub fn gauss_bonnet_residual(&self) -> T {
        self.alpha + self.beta + self.theta_prime - T::PI() - self.curvature_integral
    }

    /// `f(r) sin β - f(r') sin α`.
    pub fn sine_law_residual(&self, profile: &SurfaceProfile<T>) -> T {
        profile.jet(self.r).f * self.beta.sin() - profile.jet(self.r_prime).f * self.alpha.sin()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ShootingOptions<T> {
    /// Largest RK4 step along the geodesic.
    pub max_step: T,
    /// Absolute tolerance on the terminal mismatch.
    pub tol: T,
    pub max_iter: usize,
}

impl<T: Real> Default for ShootingOptions<T> {
    fn default() -> Self {
        Self { max_step: c(2e-4), tol: c(1e-13), max_iter: 60 }
    }
}

/// RK4 with steps capped at `max_step` and at a twentieth of the distance to
/// the nearest pole, so that near-polar passages stay resolved.
fn shoot<T: Real>(profile: &SurfaceProfile<T>, r0: T, psi0: T, length: T, max_step: T) -> Option<State<T>> {
    let mut y: State<T> = [r0, T::zero(), psi0, T::zero(), T::zero(), T::zero(), T::one()];
    let big_r = profile.extent();
    let floor = length * c(1e-12);
    let budget = (length / max_step).to_usize().unwrap_or(0) * 4 + 100_000;
    let mut s = T::zero();
    for _ in 0..budget {
        let remaining = length - s;
        if remaining <= T::zero() {
            return Some(y);
        }
        let pole = if profile.is_closed() { y[0].min(big_r - y[0]) } else { y[0] };
        let h = max_step.min(pole * c(0.05)).max(floor).min(remaining);
        y = rk4_step(profile, &y, h);
        s = s + h;
        if !inside(profile, y[0]) {
            return None;
        }
    }
    None
}

/// Distance between `(r, 0)` and `(r', θ')` with the angles of the polar
/// triangle, using default shooting options.
pub fn geodesic_distance<T: Real>(profile: &SurfaceProfile<T>, r: T, r_prime: T, theta_prime: T) -> Result<GeodesicTriangle<T>> {
    geodesic_distance_with(profile, r, r_prime, theta_prime, &ShootingOptions::default())
}

pub fn geodesic_distance_with<T: Real>(
    profile: &SurfaceProfile<T>,
    r: T,
    r_prime: T,
    theta_prime: T,
    opts: &ShootingOptions<T>,
) -> Result<GeodesicTriangle<T>> {
    if !inside(profile, r) || !inside(profile, r_prime) {
        return Err(Error::InvalidInput(format!("radii {r}, {r_prime} must lie strictly between the poles")));
    }
    // Reduce the pole angle to [0, π] using rotation and reflection symmetry.
    let mut th = theta_prime % T::TAU();
    if th < T::zero() {
        th = th + T::TAU();
    }
    if th > T::PI() {
        th = T::TAU() - th;
    }
    let tri = |d: T, alpha: T, beta: T, curv: T| GeodesicTriangle {
        r,
        r_prime,
        theta_prime: th,
        d,
        y: d * d,
        alpha,
        beta,
        curvature_integral: curv,
        comparison: None,
    };
    if th == T::zero() {
        let d = (r - r_prime).abs();
        let half_pi = T::FRAC_PI_2();
        return Ok(if r_prime > r {
            tri(d, T::zero(), T::PI(), T::zero())
        } else if r_prime < r {
            tri(d, T::PI(), T::zero(), T::zero())
        } else {
            tri(d, half_pi, half_pi, T::zero())
        });
    }

    if th == T::PI() && r + r_prime <= c::<T>(2.0) * profile.extent() - r - r_prime {
        // The meridian through the pole; the triangle degenerates.
        return Ok(tri(r + r_prime, T::zero(), T::zero(), T::zero()));
    }

    let mut seeds = Vec::new();
    let k_pole = profile.jet(T::zero()).k;
    if k_pole > T::zero() {
        if let Ok(s) = seed(r, r_prime, th, k_pole) {
            seeds.push(s);
        }
    }
    if let Ok(s) = seed(r, r_prime, th, T::zero()) {
        seeds.push(s);
    }
    let mut best: Option<GeodesicTriangle<T>> = None;
    let mut last_err = String::from("no usable seed");
    for (psi0, len) in seeds {
        match newton_shoot(profile, r, r_prime, th, psi0, len, opts) {
            Ok((psi0, len, end)) => {
                let cand = tri(len, end[2], T::PI() - psi0, end[3]);
                if best.as_ref().is_none_or(|b| cand.d < b.d - opts.tol) {
                    best = Some(cand);
                }
            }
            Err(e) => last_err = e,
        }
    }
    best.ok_or(Error::ShootingFailed(last_err))
}

fn seed<T: Real>(r: T, rp: T, th: T, k: T) -> Result<(T, T)> {
    let (d0, dk) = comparison_distances(r, rp, th, k)?;
    let d = if k > T::zero() { dk } else { d0 };
    let ang = comparison_angles(r, rp, d, k)?;
    let beta = if k > T::zero() { ang.beta_k } else { ang.beta0 };
    let eps = c::<T>(1e-6);
    let psi0 = (T::PI() - beta).max(eps).min(T::PI() - eps);
    Ok((psi0, d))
}

fn newton_shoot<T: Real>(
    profile: &SurfaceProfile<T>,
    r: T,
    rp: T,
    th: T,
    mut psi0: T,
    mut len: T,
    opts: &ShootingOptions<T>,
) -> std::result::Result<(T, T, State<T>), String> {
    let residual = |y: &State<T>| [y[0] - rp, y[1] - th];
    let norm = |f: [T; 2]| f[0].abs().max(f[1].abs());
    let mut end = shoot(profile, r, psi0, len, opts.max_step).ok_or("seed geodesic hits a pole")?;
    let mut fres = residual(&end);
    for _ in 0..opts.max_iter {
        if norm(fres) <= opts.tol {
            return Ok((psi0, len, end));
        }
        let jet = profile.jet(end[0]);
        let (sp, cp) = end[2].sin_cos();
        let (a, b) = (end[4], cp);
        let (cc, dd) = (end[5], sp / jet.f);
        let det = a * dd - b * cc;
        if det == T::zero() || !det.is_finite() {
            return Err(format!("singular shooting Jacobian at psi0={psi0}, L={len}"));
        }
        let dpsi = -(dd * fres[0] - b * fres[1]) / det;
        let dlen = -(-cc * fres[0] + a * fres[1]) / det;
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let p = psi0 + lambda * dpsi;
            let l = len + lambda * dlen;
            if p > T::zero() && p < T::PI() && l > T::zero() {
                if let Some(y) = shoot(profile, r, p, l, opts.max_step) {
                    let fr = residual(&y);
                    if norm(fr) < norm(fres) {
                        psi0 = p;
                        len = l;
                        end = y;
                        fres = fr;
                        accepted = true;
                        break;
                    }
                }
            }
            lambda = lambda * c(0.5);
        }
        if !accepted {
            if norm(fres) <= opts.tol * c(100.0) {
                return Ok((psi0, len, end));
            }
            return Err(format!("line search stalled with mismatch {:e}", norm(fres)));
        }
    }
    if norm(fres) <= opts.tol * c(100.0) {
        Ok((psi0, len, end))
    } else {
        Err(format!("no convergence after {} iterations (mismatch {:e})", opts.max_iter, norm(fres)))
    }
}
