//! Rotationally symmetric domain and target profiles.
//!
//! A surface of revolution carries the metric `dr² + f(r)² dθ²` for
//! `r ∈ [0, R]`. Closed surfaces have `f(0) = f(R) = 0` with unit slopes of
//! opposite sign at the two poles.

use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numeric::{adaptive_simpson, MonotoneCubic};
use crate::scalar::{c, Real};

/// Built-in or tabulated radial profile.
#[derive(Debug, Clone)]
pub enum ProfileKind<T> {
    /// Unit round sphere, `f = sin r` on `[0, π]`.
    Round,
    /// `f = sin r · (1 + ε sin² r)` on `[0, π]`.
    Bumpy { eps: T },
    /// Euclidean plane in polar coordinates, `f = r` on `[0, extent]`. Not closed.
    Flat { extent: T },
    /// Samples `(r, f)` joined by a monotone cubic.
    Tabulated(MonotoneCubic<T>),
}

/// Values of the profile and its derivatives at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet<T> {
    pub f: T,
    pub df: T,
    pub d2f: T,
    /// Gaussian curvature `-f''/f`, continued to the poles by its limit.
    pub k: T,
}

#[derive(Debug, Clone)]
pub struct SurfaceProfile<T> {
    pub kind: ProfileKind<T>,
    extent: T,
    /// Width of the pole caps on which curvature must be positive.
    pub pole_margin: T,
}

impl<T: Real> SurfaceProfile<T> {
    pub fn round() -> Self {
        Self::with_kind(ProfileKind::Round, T::PI())
    }

    pub fn bumpy(eps: T) -> Self {
        Self::with_kind(ProfileKind::Bumpy { eps }, T::PI())
    }

    pub fn flat(extent: T) -> Self {
        Self::with_kind(ProfileKind::Flat { extent }, extent)
    }

    /// Builds a profile from samples `(r_i, f_i)` with `r` increasing from 0.
    pub fn tabulated(r: Vec<T>, f: Vec<T>) -> Result<Self> {
        if r.first().is_none_or(|&r0| r0 != T::zero()) {
            return Err(Error::Table("first radius must be 0".into()));
        }
        let spline = MonotoneCubic::new(r, f)?;
        let extent = spline.x_max();
        Ok(Self::with_kind(ProfileKind::Tabulated(spline), extent))
    }

    /// Reads the two-column `r,f` CSV format.
    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
        let headers = rdr.headers()?.clone();
        if headers.len() != 2 || &headers[0] != "r" || &headers[1] != "f" {
            return Err(Error::Table(format!("expected header \"r,f\", found {:?}", headers)));
        }
        let (mut r, mut f) = (Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parse =
                |i: usize| -> Result<T> { rec[i].parse::<f64>().map(T::lit).map_err(|e| Error::Table(format!("row {}: {e}", line + 2))) };
            r.push(parse(0)?);
            f.push(parse(1)?);
        }
        Self::tabulated(r, f)
    }

    fn with_kind(kind: ProfileKind<T>, extent: T) -> Self {
        Self { kind, extent, pole_margin: extent * c(0.2) }
    }

    /// Pole-to-pole extent `R`.
    pub fn extent(&self) -> T {
        self.extent
    }

    pub fn is_closed(&self) -> bool {
        !matches!(self.kind, ProfileKind::Flat { .. })
    }

    pub fn name(&self) -> String {
        match &self.kind {
            ProfileKind::Round => "round".into(),
            ProfileKind::Bumpy { eps } => format!("bumpy({eps})"),
            ProfileKind::Flat { extent } => format!("flat({extent})"),
            ProfileKind::Tabulated(_) => "tabulated".into(),
        }
    }

    /// Jet `(f, f', f'', k)` at `r ∈ [0, R]`.
    pub fn eval(&self, r: T) -> Result<Jet<T>> {
        let tol = self.extent * c(1e-12);
        if !(r >= -tol && r <= self.extent + tol) {
            return Err(Error::OutOfDomain { r: r.to_f64_lossy(), extent: self.extent.to_f64_lossy() });
        }
        Ok(self.jet(r.max(T::zero()).min(self.extent)))
    }

    /// Jet without domain check; analytic kinds extend periodically.
    pub(crate) fn jet(&self, r: T) -> Jet<T> {
        match &self.kind {
            ProfileKind::Round => {
                let (s, co) = r.sin_cos();
                Jet { f: s, df: co, d2f: -s, k: T::one() }
            }
            ProfileKind::Bumpy { eps } => {
                let e = *eps;
                let (s, co) = r.sin_cos();
                let s2 = s * s;
                let f = s * (T::one() + e * s2);
                let df = co * (T::one() + c::<T>(3.0) * e * s2);
                let d2f = -s + e * (c::<T>(6.0) * s * co * co - c::<T>(3.0) * s2 * s);
                let k = (T::one() - e * (c::<T>(6.0) * co * co - c::<T>(3.0) * s2)) / (T::one() + e * s2);
                Jet { f, df, d2f, k }
            }
            ProfileKind::Flat { .. } => Jet { f: r, df: T::one(), d2f: T::zero(), k: T::zero() },
            ProfileKind::Tabulated(sp) => {
                let (f, df, d2f) = sp.eval(r);
                let k = if f > self.extent * c(1e-9) {
                    -d2f / f
                } else {
                    // Limit at a pole: use the curvature one table step inside.
                    let probe = if r < self.extent * c(0.5) { self.extent * c(1e-3) } else { self.extent * c(0.999) };
                    let (fp, _, d2p) = sp.eval(probe);
                    -d2p / fp
                };
                Jet { f, df, d2f, k }
            }
        }
    }

    /// `s(r) = ∫_{R/2}^{r} dt / f(t)`, the coordinate in which the reduced
    /// action becomes translation-like.
    pub fn arclength_coordinate(&self, r: T) -> Result<T> {
        let big_r = self.extent;
        if r <= T::zero() || (self.is_closed() && r >= big_r) {
            return Err(Error::AtPole { r: r.to_f64_lossy() });
        }
        if r > big_r {
            return Err(Error::OutOfDomain { r: r.to_f64_lossy(), extent: big_r.to_f64_lossy() });
        }
        let half = big_r * c(0.5);
        // Subtract the pole singularities, integrate the bounded remainder.
        let closed = self.is_closed();
        let smooth = |t: T| {
            let mut v = T::one() / self.jet(t).f - T::one() / t;
            if closed {
                v = v - T::one() / (big_r - t);
            }
            v
        };
        let mut s = adaptive_simpson(&smooth, half, r, c(1e-13)) + (r / half).ln();
        if closed {
            s = s - ((big_r - r) / half).ln();
        }
        Ok(s)
    }
}

/// One named check of [`validate_profile`].
#[derive(Debug, Clone, Serialize)]
pub struct ProfileCheck {
    pub name: &'static str,
    pub passed: bool,
    pub residual: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub profile: String,
    pub checks: Vec<ProfileCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&ProfileCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Samples the profile on `samples` cells and tests the closed-surface,
/// pole-curvature and pole-expansion invariants. Open profiles only get the
/// checks at `r = 0`.
pub fn validate_profile<T: Real>(profile: &SurfaceProfile<T>, samples: usize, tol: f64) -> ValidationReport {
    let big_r = profile.extent();
    let jet0 = profile.jet(T::zero());
    let jet_r = profile.jet(big_r);
    let mut checks = Vec::new();
    let mut push = |name, residual: f64, passed: bool| checks.push(ProfileCheck { name, passed, residual });

    let res = jet0.f.to_f64_lossy().abs();
    push("f(0)=0", res, res <= tol);
    let closed = profile.is_closed();
    if closed {
        let res = jet_r.f.to_f64_lossy().abs();
        push("f(R)=0", res, res <= tol);
    }
    let res = (jet0.df.to_f64_lossy() - 1.0).abs();
    push("f'(0)=1", res, res <= tol);
    if closed {
        let res = (jet_r.df.to_f64_lossy() + 1.0).abs();
        push("f'(R)=-1", res, res <= tol);
    }

    let n = samples.max(8);
    let h = big_r / T::from_usize_lossy(n);
    let mut min_f = f64::INFINITY;
    let mut min_k = f64::INFINITY;
    for i in 0..=n {
        let r = h * T::from_usize_lossy(i);
        let jet = profile.jet(r);
        if i > 0 && i < n {
            min_f = min_f.min(jet.f.to_f64_lossy());
        }
        if r <= profile.pole_margin || r >= big_r - profile.pole_margin {
            min_k = min_k.min(jet.k.to_f64_lossy());
        }
    }
    push("f>0 interior", min_f, min_f > 0.0);
    if closed {
        push("k>0 near poles", min_k, min_k > 0.0);
    }

    // |f(r) - (r - k(0) r³/6)| / r³ must shrink along r = R 2^-j.
    let k0 = jet0.k;
    let ratios: Vec<f64> = (4..=12)
        .map(|j| {
            let r = big_r * c(0.5f64.powi(j));
            let f = profile.jet(r).f;
            ((f - (r - k0 * r * r * r / c(6.0))) / (r * r * r)).abs().to_f64_lossy()
        })
        .collect();
    let decreasing = ratios.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    push("pole expansion", ratios.last().copied().unwrap_or(f64::NAN), decreasing);

    ValidationReport { profile: profile.name(), checks }
}

/// Target surface of revolution; only the unit round sphere is built in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetKind {
    Round,
}

#[derive(Debug, Clone, Copy)]
pub struct TargetProfile<T> {
    pub kind: TargetKind,
    _marker: std::marker::PhantomData<T>,
}

impl<T: Real> TargetProfile<T> {
    pub fn round() -> Self {
        Self { kind: TargetKind::Round, _marker: std::marker::PhantomData }
    }

    /// Target extent `H`.
    pub fn extent(&self) -> T {
        T::PI()
    }

    /// `(g, g', g'')` at `α`.
    pub fn g(&self, alpha: T) -> (T, T, T) {
        let (s, co) = alpha.sin_cos();
        (s, co, -s)
    }

    /// Height function `h` of the embedding `α ↦ (g(α), 0, h(α))` and its derivative.
    pub fn h(&self, alpha: T) -> (T, T) {
        let (s, co) = alpha.sin_cos();
        (co, -s)
    }

    /// Antiderivative `G` of `g` with `G(0) = 0`.
    pub fn antiderivative(&self, alpha: T) -> T {
        T::one() - alpha.cos()
    }

    /// Target area `2π (G(H) - G(0))`.
    pub fn volume(&self) -> T {
        T::TAU() * (self.antiderivative(self.extent()) - self.antiderivative(T::zero()))
    }

    /// Curvature of the target.
    pub fn curvature(&self, _alpha: T) -> T {
        T::one()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn round_jet_at_equator() {
        let p = SurfaceProfile::<f64>::round();
        let j = p.eval(PI / 2.0).unwrap();
        assert!((j.f - 1.0).abs() < 1e-15);
        assert!(j.df.abs() < 1e-15);
        assert!((j.d2f + 1.0).abs() < 1e-15);
        assert!((j.k - 1.0).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_outside_domain() {
        let p = SurfaceProfile::<f64>::round();
        assert!(matches!(p.eval(-0.1), Err(Error::OutOfDomain { .. })));
        assert!(matches!(p.eval(3.2), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn round_expansion_residual_vanishes_at_pole() {
        let p = SurfaceProfile::<f64>::round();
        let mut prev = f64::INFINITY;
        for j in 2..10 {
            let r = 0.5f64.powi(j);
            let f = p.eval(r).unwrap().f;
            let ratio = (f - r + r.powi(3) / 6.0).abs() / r.powi(3);
            assert!(ratio < prev);
            prev = ratio;
        }
        assert!(prev < 1e-5);
    }

    #[test]
    fn bumpy_jet_at_pole() {
        // f = sin r (1 + ε sin² r): f'(0) = 1, f''(0) = 0, k(0) = 1 - 6ε.
        let p = SurfaceProfile::<f64>::bumpy(0.1);
        let j = p.eval(0.0).unwrap();
        assert_eq!(j.f, 0.0);
        assert!((j.df - 1.0).abs() < 1e-15);
        assert_eq!(j.d2f, 0.0);
        assert!((j.k - 0.4).abs() < 1e-14);
        // derivative consistency by central differences
        let h = 1e-5;
        for &r in &[0.3, 1.1, 2.5] {
            let jm = p.eval(r - h).unwrap();
            let jp = p.eval(r + h).unwrap();
            let j = p.eval(r).unwrap();
            assert!(((jp.f - jm.f) / (2.0 * h) - j.df).abs() < 1e-9);
            assert!(((jp.df - jm.df) / (2.0 * h) - j.d2f).abs() < 1e-9);
            assert!((j.k + j.d2f / j.f).abs() < 1e-12);
        }
    }

    #[test]
    fn validation_of_builtins() {
        let rep = validate_profile(&SurfaceProfile::<f64>::round(), 400, 1e-9);
        assert!(rep.passed(), "{rep:?}");
        let rep = validate_profile(&SurfaceProfile::<f64>::bumpy(0.05), 400, 1e-9);
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.check("k>0 near poles").unwrap().residual > 0.0);
        let rep = validate_profile(&SurfaceProfile::<f64>::flat(1.0), 400, 1e-9);
        assert!(rep.check("f(R)=0").is_none());
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn arclength_matches_log_tan_on_round() {
        let p = SurfaceProfile::<f64>::round();
        assert!(p.arclength_coordinate(PI / 2.0).unwrap().abs() < 1e-14);
        for &r in &[1e-3, 0.2, 1.0, 2.0, 3.0] {
            let s = p.arclength_coordinate(r).unwrap();
            assert!((s - (r / 2.0).tan().ln()).abs() < 1e-9, "r={r}");
        }
        assert!(matches!(p.arclength_coordinate(0.0), Err(Error::AtPole { .. })));
        assert!(matches!(p.arclength_coordinate(PI), Err(Error::AtPole { .. })));
        let mut prev = f64::INFINITY;
        for j in 1..20 {
            let s = p.arclength_coordinate(0.5f64.powi(j)).unwrap();
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn tabulated_round_profile_tracks_sine() {
        let n = 400;
        let r: Vec<f64> = (0..=n).map(|i| PI * i as f64 / n as f64).collect();
        let f: Vec<f64> = r.iter().map(|x| x.sin()).collect();
        let p = SurfaceProfile::tabulated(r, f).unwrap();
        for &x in &[0.3, 1.0, 2.2] {
            let j = p.eval(x).unwrap();
            assert!((j.f - x.sin()).abs() < 1e-6);
            assert!((j.df - x.cos()).abs() < 1e-3);
        }
    }

    #[test]
    fn round_target_volume() {
        let t = TargetProfile::<f64>::round();
        assert!((t.volume() - 4.0 * PI).abs() < 1e-14);
        let (g0, dg0, _) = t.g(0.0);
        let (gh, dgh, _) = t.g(PI);
        assert!(g0.abs() < 1e-15 && gh.abs() < 1e-15);
        assert!((dg0 - 1.0).abs() < 1e-15 && (dgh + 1.0).abs() < 1e-15);
    }
}
