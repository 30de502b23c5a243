//! Comparison triangles in the flat plane and on spheres of constant
//! curvature, plus the finite-difference identities satisfied by the squared
//! distance `y = d²` near a pole.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::geodesic::{geodesic_distance_with, GeodesicTriangle, ShootingOptions};
use super::profile::SurfaceProfile;
use crate::error::{Error, Result};
use crate::numeric::gauss_legendre;
use crate::scalar::{c, Real};

/// Flat and curvature-`K` comparison data for one triangle.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Comparison<T> {
    pub curvature: T,
    /// Hinge comparison distances: same `r, r'` and pole angle.
    pub d0: T,
    pub dk: T,
    /// Side comparison angles: same three side lengths.
    pub alpha0: T,
    pub alpha_k: T,
    pub beta0: T,
    pub beta_k: T,
}

fn hav<T: Real>(x: T) -> T {
    let s = (x * c(0.5)).sin();
    s * s
}

/// Third side of the hinge `(r, r', θ')` in the plane and on the sphere of
/// curvature `K ≥ 0`. Uses the haversine form so that `K → 0` is stable.
pub fn comparison_distances<T: Real>(r: T, r_prime: T, theta_prime: T, curvature: T) -> Result<(T, T)> {
    if curvature < T::zero() {
        return Err(Error::InvalidInput("comparison curvature must be non-negative".into()));
    }
    let d0 = (r * r + r_prime * r_prime - c::<T>(2.0) * r * r_prime * theta_prime.cos()).max(T::zero()).sqrt();
    if curvature == T::zero() {
        return Ok((d0, d0));
    }
    let sk = curvature.sqrt();
    let diameter = T::PI() / sk;
    if r >= diameter || r_prime >= diameter {
        return Err(Error::ComparisonDiameter { diameter: diameter.to_f64_lossy() });
    }
    let h = hav(sk * (r - r_prime)) + (sk * r).sin() * (sk * r_prime).sin() * hav(theta_prime);
    let dk = c::<T>(2.0) * h.max(T::zero()).min(T::one()).sqrt().asin() / sk;
    Ok((d0, dk))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ComparisonAngles<T> {
    pub alpha0: T,
    pub alpha_k: T,
    pub beta0: T,
    pub beta_k: T,
    /// The side lengths satisfy the triangle inequality with equality.
    pub degenerate: bool,
}

fn clamp_acos<T: Real>(x: T) -> T {
    x.max(-T::one()).min(T::one()).acos()
}

/// Angles of the triangle with sides `r, r', d`: `alpha` lies between the
/// sides `d` and `r'` (facing `r`), `beta` between `d` and `r` (facing `r'`).
pub fn comparison_angles<T: Real>(r: T, r_prime: T, d: T, curvature: T) -> Result<ComparisonAngles<T>> {
    let scale = r.max(r_prime).max(d);
    let slack = scale * c(1e-12);
    let viol = [r_prime + d - r, r + d - r_prime, r + r_prime - d];
    if viol.iter().any(|&v| v < -slack) || r <= T::zero() || r_prime <= T::zero() {
        return Err(Error::TriangleInequality { a: r.to_f64_lossy(), b: r_prime.to_f64_lossy(), c: d.to_f64_lossy() });
    }
    let degenerate = viol.iter().any(|&v| v <= slack);
    let two = c::<T>(2.0);
    let (alpha0, beta0) = if d > T::zero() {
        (
            clamp_acos((d * d + r_prime * r_prime - r * r) / (two * d * r_prime)),
            clamp_acos((d * d + r * r - r_prime * r_prime) / (two * d * r)),
        )
    } else {
        (T::FRAC_PI_2(), T::FRAC_PI_2())
    };
    let (alpha_k, beta_k) = if curvature > T::zero() && d > T::zero() {
        let sk = curvature.sqrt();
        if sk * scale >= T::PI() {
            return Err(Error::ComparisonDiameter { diameter: (T::PI() / sk).to_f64_lossy() });
        }
        let (a, b, dd) = (sk * r, sk * r_prime, sk * d);
        (
            clamp_acos((a.cos() - b.cos() * dd.cos()) / (b.sin() * dd.sin())),
            clamp_acos((b.cos() - a.cos() * dd.cos()) / (a.sin() * dd.sin())),
        )
    } else {
        (alpha0, beta0)
    };
    Ok(ComparisonAngles { alpha0, alpha_k, beta0, beta_k, degenerate })
}

fn distance_sq<T: Real>(profile: &SurfaceProfile<T>, r: T, rp: T, th: T, opts: &ShootingOptions<T>) -> Result<T> {
    Ok(geodesic_distance_with(profile, r, rp, th, opts)?.y)
}

/// `|y_{r'}² + y_{θ'}²/f(r')² - 4y|` with central differences of step `h`.
pub fn eikonal_residual<T: Real>(profile: &SurfaceProfile<T>, r: T, r_prime: T, theta_prime: T, h: T) -> Result<T> {
    let opts = ShootingOptions::default();
    let y = distance_sq(profile, r, r_prime, theta_prime, &opts)?;
    let two_h = c::<T>(2.0) * h;
    let y_rp =
        (distance_sq(profile, r, r_prime + h, theta_prime, &opts)? - distance_sq(profile, r, r_prime - h, theta_prime, &opts)?) / two_h;
    let y_th =
        (distance_sq(profile, r, r_prime, theta_prime + h, &opts)? - distance_sq(profile, r, r_prime, theta_prime - h, &opts)?) / two_h;
    let f = profile.jet(r_prime).f;
    Ok((y_rp * y_rp + y_th * y_th / (f * f) - c::<T>(4.0) * y).abs())
}

/// Running `(min, max)` of a ratio over a sampled family.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Bracket {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl Default for Bracket {
    fn default() -> Self {
        Self { min: f64::INFINITY, max: f64::NEG_INFINITY, count: 0 }
    }
}

impl Bracket {
    pub fn push(&mut self, v: f64) {
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.count += 1;
    }

    pub fn merge(&mut self, other: &Bracket) {
        self.min = self.min.min(other.min);
        self.max = self.max.max(other.max);
        self.count += other.count;
    }

    /// The ratio stayed in a bounded interval away from zero.
    pub fn is_positive_finite(&self) -> bool {
        self.count > 0 && self.min > 0.0 && self.max.is_finite()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityOptions<T> {
    /// Finite-difference step.
    pub h: T,
    /// Upper curvature bound used by the angle-derivative bracket.
    pub curvature: T,
    /// Pole angle `μ > θ'` for the cosine-ratio estimate; skipped when `None`.
    pub mu: Option<T>,
}

/// Evaluated identities and brackets for one triangle.
#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    /// `(sin β / r', sin α / r, sin θ' / d)`.
    pub law_of_sines_ratios: [f64; 3],
    /// `|∂_{r'} y - 2 d cos α| / max(|2 d cos α|, d²)`.
    pub dy_dr_prime_residual: f64,
    pub gauss_bonnet_residual: f64,
    /// `f(r) sin β - f(r') sin α`.
    pub sine_law_residual: f64,
    /// `m · r · r'` with `m = (cos θ' - cos μ) / (y(μ) - y(θ'))`.
    pub ratio_m: Option<f64>,
    /// `(sin β / d, α_r, √K sin β / sin(√K d))`; the middle value should lie between.
    pub angle_derivative_brackets: [f64; 3],
}

impl IdentityReport {
    pub fn angle_bracket_holds(&self, tol: f64) -> bool {
        let [lo, mid, hi] = self.angle_derivative_brackets;
        lo <= mid + tol && mid <= hi + tol
    }
}

/// Evaluates the distance/angle identities attached to `tri`.
pub fn angle_identities_check<T: Real>(
    profile: &SurfaceProfile<T>,
    tri: &GeodesicTriangle<T>,
    opts: &IdentityOptions<T>,
) -> Result<IdentityReport> {
    let so = ShootingOptions::default();
    let (r, rp, th, h) = (tri.r, tri.r_prime, tri.theta_prime, opts.h);
    let two = c::<T>(2.0);
    let sines = [tri.beta.sin() / rp, tri.alpha.sin() / r, th.sin() / tri.d];

    let y_plus = distance_sq(profile, r, rp + h, th, &so)?;
    let y_minus = distance_sq(profile, r, rp - h, th, &so)?;
    let fd = (y_plus - y_minus) / (two * h);
    let exact = two * tri.d * tri.alpha.cos();
    let dy_res = (fd - exact).abs() / exact.abs().max(tri.y);

    let ratio_m = match opts.mu {
        Some(mu) => {
            let y_mu = distance_sq(profile, r, rp, mu, &so)?;
            let m = (th.cos() - mu.cos()) / (y_mu - tri.y);
            Some((m * r * rp).to_f64_lossy())
        }
        None => None,
    };

    let a_plus = geodesic_distance_with(profile, r + h, rp, th, &so)?.alpha;
    let a_minus = geodesic_distance_with(profile, r - h, rp, th, &so)?.alpha;
    let alpha_r = (a_plus - a_minus) / (two * h);
    let sk = opts.curvature.sqrt();
    let lower = tri.beta.sin() / tri.d;
    let upper = if sk > T::zero() { sk * tri.beta.sin() / (sk * tri.d).sin() } else { lower };

    Ok(IdentityReport {
        law_of_sines_ratios: sines.map(|v| v.to_f64_lossy()),
        dy_dr_prime_residual: dy_res.to_f64_lossy(),
        gauss_bonnet_residual: tri.gauss_bonnet_residual().to_f64_lossy(),
        sine_law_residual: tri.sine_law_residual(profile).to_f64_lossy(),
        ratio_m,
        angle_derivative_brackets: [lower.to_f64_lossy(), alpha_r.to_f64_lossy(), upper.to_f64_lossy()],
    })
}

/// Pole angle `μ ∈ (0, π]` with `d(r, r', μ) = s`, or `None` when the whole
/// circle `r'` lies within distance `s`.
pub fn cone_angle<T: Real>(profile: &SurfaceProfile<T>, r: T, r_prime: T, s: T) -> Result<Option<T>> {
    let so = ShootingOptions::default();
    let target = s * s;
    let y_far = distance_sq(profile, r, r_prime, T::PI() * c(0.999), &so)?;
    if y_far <= target {
        return Ok(None);
    }
    let a = (r - r_prime) * (r - r_prime);
    if target <= a {
        return Ok(Some(T::zero()));
    }
    let (mut lo, mut hi) = (T::zero(), T::PI() * c(0.999));
    // Start from the flat hinge estimate and refine by safeguarded Newton.
    let cos_guess = (r * r + r_prime * r_prime - target) / (c::<T>(2.0) * r * r_prime);
    let mut mu = clamp_acos(cos_guess).max(c(1e-8)).min(hi);
    for _ in 0..80 {
        let tri = geodesic_distance_with(profile, r, r_prime, mu, &so)?;
        let g = tri.y - target;
        if g > T::zero() {
            hi = mu;
        } else {
            lo = mu;
        }
        if g.abs() <= target * c(1e-14) || hi - lo < c(1e-15) {
            break;
        }
        // y_θ' = 2 f(r') d sin α
        let dy = c::<T>(2.0) * profile.jet(r_prime).f * tri.d * tri.alpha.sin();
        let mut next = mu - g / dy;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = (lo + hi) * c(0.5);
        }
        mu = next;
    }
    Ok(Some(mu))
}

/// `∫_{θ' : s² ≥ d²} f(r') / √(s² - d²) dθ'` over the full circle.
///
/// The square-root singularity at the cone boundary `θ' = ±μ` is removed
/// by the substitution `θ' = μ sin φ`, under which the integrand stays
/// bounded; the half-interval is then integrated by Gauss-Legendre.
pub fn lightcone_kernel_integral<T: Real>(profile: &SurfaceProfile<T>, r: T, r_prime: T, s: T) -> Result<T> {
    lightcone_kernel_integral_with(profile, r, r_prime, s, 48)
}

pub fn lightcone_kernel_integral_with<T: Real>(profile: &SurfaceProfile<T>, r: T, r_prime: T, s: T, nodes: usize) -> Result<T> {
    if s <= (r - r_prime).abs() {
        return Ok(T::zero());
    }
    let so = ShootingOptions::default();
    let f_rp = profile.jet(r_prime).f;
    let target = s * s;
    let (x, w) = gauss_legendre::<T>(nodes);
    let total = match cone_angle(profile, r, r_prime, s)? {
        None => {
            let mut acc = T::zero();
            for (&xi, &wi) in x.iter().zip(&w) {
                let th = T::FRAC_PI_2() * (xi + T::one());
                let y = distance_sq(profile, r, r_prime, th, &so)?;
                acc = acc + wi * f_rp / (target - y).sqrt();
            }
            acc * T::FRAC_PI_2()
        }
        Some(mu) => {
            if mu == T::zero() {
                return Ok(T::zero());
            }
            let mut acc = T::zero();
            for (&xi, &wi) in x.iter().zip(&w) {
                let phi = T::FRAC_PI_4() * (xi + T::one());
                let th = mu * phi.sin();
                let y = distance_sq(profile, r, r_prime, th, &so)?;
                let gap = target - y;
                if gap > T::zero() {
                    acc = acc + wi * f_rp * mu * phi.cos() / gap.sqrt();
                }
            }
            acc * T::FRAC_PI_4()
        }
    };
    // Both halves θ' ∈ [-μ, 0] and [0, μ].
    Ok(total * c::<T>(2.0))
}

/// Sampled `(min, max)` of the Gaussian curvature `k = -f''/f` on `[0, R]`.
pub fn curvature_range<T: Real>(profile: &SurfaceProfile<T>, samples: usize) -> (f64, f64) {
    let n = samples.max(2);
    let h = profile.extent() / T::from_usize_lossy(n);
    (0..=n)
        .map(|i| profile.jet(h * T::from_usize_lossy(i)).k.to_f64_lossy())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| (lo.min(k), hi.max(k)))
}

/// Outcome of [`comparison_sweep`].
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonSweep {
    pub curvature: f64,
    pub samples: usize,
    /// Triangles with `d < d_K - tol`.
    pub lower_violations: usize,
    /// Triangles with `d > d_0 + tol`.
    pub upper_violations: usize,
    pub max_gauss_bonnet: f64,
    pub max_sine_law: f64,
    /// Smallest slack `d - d_K` and `d_0 - d` seen.
    pub min_lower_gap: f64,
    pub min_upper_gap: f64,
}

impl ComparisonSweep {
    pub fn holds(&self) -> bool {
        self.lower_violations == 0 && self.upper_violations == 0
    }
}

/// Samples `count` hinges with `r, r' ∈ [0.05 R, 0.45 R]` and `θ' ∈ (0, π]`
/// and checks `d_K ≤ d ≤ d_0` with `K = curvature_factor · max k`.
pub fn comparison_sweep(
    profile: &SurfaceProfile<f64>,
    count: usize,
    curvature_factor: f64,
    seed: u64,
    tol: f64,
) -> Result<ComparisonSweep> {
    let (_, k_max) = curvature_range(profile, 4096);
    let curvature = (curvature_factor * k_max).max(0.0);
    let big_r = profile.extent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ComparisonSweep {
        curvature,
        samples: count,
        lower_violations: 0,
        upper_violations: 0,
        max_gauss_bonnet: 0.0,
        max_sine_law: 0.0,
        min_lower_gap: f64::INFINITY,
        min_upper_gap: f64::INFINITY,
    };
    for _ in 0..count {
        let r = big_r * rng.gen_range(0.05..0.45);
        let rp = big_r * rng.gen_range(0.05..0.45);
        let th = std::f64::consts::PI * (1.0 - rng.gen::<f64>());
        let tri = geodesic_distance_with(profile, r, rp, th, &ShootingOptions::default())?.compare(curvature)?;
        let cmp = tri.comparison.expect("filled by compare");
        let lower = tri.d - cmp.dk;
        let upper = cmp.d0 - tri.d;
        out.min_lower_gap = out.min_lower_gap.min(lower);
        out.min_upper_gap = out.min_upper_gap.min(upper);
        out.lower_violations += usize::from(lower < -tol);
        out.upper_violations += usize::from(upper < -tol);
        out.max_gauss_bonnet = out.max_gauss_bonnet.max(tri.gauss_bonnet_residual().abs());
        out.max_sine_law = out.max_sine_law.max(tri.sine_law_residual(profile).abs());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_3, PI};

    #[test]
    fn flat_hinge_distance() {
        let (d0, _) = comparison_distances(0.3, 0.4, FRAC_PI_3, 0.0).unwrap();
        assert!((d0 - 0.13f64.sqrt()).abs() < 1e-15);
        assert!((d0 - 0.36056).abs() < 1e-5);
    }

    #[test]
    fn small_curvature_limit() {
        let (d0, dk) = comparison_distances(0.3, 0.4, FRAC_PI_3, 1e-6).unwrap();
        assert!((d0 - dk).abs() < 1e-6);
        assert!(dk <= d0);
    }

    #[test]
    fn spherical_hinge_matches_law_of_cosines() {
        let (_, dk) = comparison_distances(0.2, 0.3, PI / 2.0, 1.0).unwrap();
        assert!((dk - (0.2f64.cos() * 0.3f64.cos()).acos()).abs() < 1e-14);
        assert!(comparison_distances(3.5, 0.3, 1.0, 1.0).is_err());
    }

    #[test]
    fn flat_angles() {
        let a = comparison_angles(0.3f64, 0.4, 0.5, 0.0).unwrap();
        assert!((a.alpha0.cos() - 0.8).abs() < 1e-14);
        let a = comparison_angles(0.3f64, 0.4, 0.7, 0.0).unwrap();
        assert!(a.degenerate);
        assert!(a.alpha0.abs() < 1e-7);
        assert!(comparison_angles(0.3, 0.4, 0.8, 0.0).is_err());
    }

    #[test]
    fn tiny_triangles_see_no_curvature() {
        let a = comparison_angles(0.003f64, 0.004, 0.005, 1.0).unwrap();
        assert!((a.alpha_k - a.alpha0).abs() < 1e-4);
        assert!((a.beta_k - a.beta0).abs() < 1e-4);
        assert!(a.alpha_k >= a.alpha0);
    }

    #[test]
    fn eikonal_on_meridian_is_exact() {
        let p = SurfaceProfile::<f64>::bumpy(0.05);
        let res = eikonal_residual(&p, 0.2, 0.35, 0.0, 1e-3).unwrap();
        assert!(res < 1e-12, "{res}");
    }

    #[test]
    fn kernel_is_zero_outside_cone() {
        let p = SurfaceProfile::<f64>::round();
        assert_eq!(lightcone_kernel_integral(&p, 0.2, 0.3, 0.05).unwrap(), 0.0);
    }

    #[test]
    fn kernel_matches_flat_closed_form() {
        // In the plane y = r² + r'² - 2 r r' cos θ', so the integral equals
        // 2 r' ∫_0^μ dθ / √(2 r r' (cos θ - cos μ)) = 2 r' K(sin(μ/2)) / √(r r').
        let p = SurfaceProfile::<f64>::flat(10.0);
        let (r, rp, s) = (0.3f64, 0.5f64, 0.4f64);
        let v = lightcone_kernel_integral(&p, r, rp, s).unwrap();
        let cosmu: f64 = (r * r + rp * rp - s * s) / (2.0 * r * rp);
        let k = (cosmu.acos() / 2.0).sin();
        // complete elliptic integral of the first kind by AGM
        let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
        for _ in 0..30 {
            let (na, nb) = ((a + b) / 2.0, (a * b).sqrt());
            a = na;
            b = nb;
        }
        let kk = PI / (2.0 * a);
        let exact = 2.0 * rp * kk / (r * rp).sqrt();
        assert!((v - exact).abs() < 1e-8 * exact, "{v} vs {exact}");
    }

    #[test]
    fn sweep_on_round_sphere_is_tight() {
        let sw = comparison_sweep(&SurfaceProfile::round(), 20, 1.0, 3, 1e-9).unwrap();
        assert!(sw.holds());
        assert!((sw.curvature - 1.0).abs() < 1e-12);
        assert!(sw.min_lower_gap.abs() < 1e-9);
        assert!(sw.max_gauss_bonnet < 1e-10);
    }
}
