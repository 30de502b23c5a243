//! Small numerical building blocks: monotone cubic interpolation, banded
//! solves, Gauss-Legendre rules and adaptive Simpson quadrature.

use crate::error::{Error, Result};
use crate::scalar::{c, Real};

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slopes.
#[derive(Debug, Clone)]
pub struct MonotoneCubic<T> {
    x: Vec<T>,
    y: Vec<T>,
    slope: Vec<T>,
}

impl<T: Real> MonotoneCubic<T> {
    pub fn new(x: Vec<T>, y: Vec<T>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(Error::Table("need at least three (r, f) rows".into()));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Table("abscissae must be strictly increasing".into()));
        }
        let h: Vec<T> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<T> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / h[k]).collect();
        let mut slope = vec![T::zero(); n];
        for k in 1..n - 1 {
            if delta[k - 1] * delta[k] <= T::zero() {
                slope[k] = T::zero();
            } else {
                let w1 = c::<T>(2.0) * h[k] + h[k - 1];
                let w2 = h[k] + c::<T>(2.0) * h[k - 1];
                slope[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
            }
        }
        slope[0] = end_slope(h[0], h[1], delta[0], delta[1]);
        slope[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        Ok(Self { x, y, slope })
    }

    pub fn x_min(&self) -> T {
        self.x[0]
    }

    pub fn x_max(&self) -> T {
        self.x[self.x.len() - 1]
    }

    fn locate(&self, x: T) -> usize {
        let n = self.x.len();
        match self.x.binary_search_by(|p| p.partial_cmp(&x).unwrap_or(std::cmp::Ordering::Less)) {
            Ok(k) => k.min(n - 2),
            Err(k) => k.saturating_sub(1).min(n - 2),
        }
    }

    /// Value and first two derivatives at `x`.
    pub fn eval(&self, x: T) -> (T, T, T) {
        let k = self.locate(x);
        let h = self.x[k + 1] - self.x[k];
        let t = (x - self.x[k]) / h;
        let (y0, y1) = (self.y[k], self.y[k + 1]);
        let (m0, m1) = (self.slope[k] * h, self.slope[k + 1] * h);
        let two = c::<T>(2.0);
        let three = c::<T>(3.0);
        let six = c::<T>(6.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = two * t3 - three * t2 + T::one();
        let h10 = t3 - two * t2 + t;
        let h01 = -two * t3 + three * t2;
        let h11 = t3 - t2;
        let v = h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1;
        let d00 = six * t2 - six * t;
        let d10 = three * t2 - c::<T>(4.0) * t + T::one();
        let d01 = -six * t2 + six * t;
        let d11 = three * t2 - two * t;
        let d1 = (d00 * y0 + d10 * m0 + d01 * y1 + d11 * m1) / h;
        let e00 = c::<T>(12.0) * t - six;
        let e10 = six * t - c::<T>(4.0);
        let e01 = -c::<T>(12.0) * t + six;
        let e11 = six * t - two;
        let d2 = (e00 * y0 + e10 * m0 + e01 * y1 + e11 * m1) / (h * h);
        (v, d1, d2)
    }
}

fn end_slope<T: Real>(h0: T, h1: T, d0: T, d1: T) -> T {
    let s = ((c::<T>(2.0) * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s * d0 <= T::zero() {
        T::zero()
    } else if d0 * d1 <= T::zero() && s.abs() > c::<T>(3.0) * d0.abs() {
        c::<T>(3.0) * d0
    } else {
        s
    }
}

/// Symmetric tridiagonal matrix stored as diagonal and off-diagonal.
#[derive(Debug, Clone)]
pub struct SymTridiagonal<T> {
    pub diag: Vec<T>,
    pub off: Vec<T>,
}

impl<T: Real> SymTridiagonal<T> {
    pub fn zeros(n: usize) -> Self {
        Self { diag: vec![T::zero(); n], off: vec![T::zero(); n.saturating_sub(1)] }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s = s + self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s = s + self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Solves `(self + shift I) x = b` by LDLᵀ; `None` when a pivot is not
    /// strictly positive (the shifted matrix is not positive definite).
    pub fn solve_spd(&self, shift: T, b: &[T]) -> Option<Vec<T>> {
        let n = self.len();
        let mut d = vec![T::zero(); n];
        let mut l = vec![T::zero(); n.saturating_sub(1)];
        for i in 0..n {
            let mut di = self.diag[i] + shift;
            if i > 0 {
                di = di - l[i - 1] * l[i - 1] * d[i - 1];
            }
            if !(di > T::zero()) || !di.is_finite() {
                return None;
            }
            d[i] = di;
            if i + 1 < n {
                l[i] = self.off[i] / di;
            }
        }
        let mut x = b.to_vec();
        for i in 1..n {
            x[i] = x[i] - l[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] = x[i] / d[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] = x[i] - l[i] * x[i + 1];
        }
        Some(x)
    }
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre<T: Real>(n: usize) -> (Vec<T>, Vec<T>) {
    let mut nodes = vec![T::zero(); n];
    let mut weights = vec![T::zero(); n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 0 {
                1.0
            } else if n == 1 {
                x
            } else {
                p1
            };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = c(-x);
        nodes[n - 1 - i] = c(x);
        weights[i] = c(w);
        weights[n - 1 - i] = c(w);
    }
    (nodes, weights)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T) -> T {
    let m = (a + b) * c(0.5);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / c(6.0) * (fa + c::<T>(4.0) * fm + fb);
    simpson_rec(f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, fa: T, fm: T, fb: T, whole: T, tol: T, depth: u32) -> T {
    let m = (a + b) * c(0.5);
    let lm = (a + m) * c(0.5);
    let rm = (m + b) * c(0.5);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / c(6.0) * (fa + c::<T>(4.0) * flm + fm);
    let right = (b - m) / c(6.0) * (fm + c::<T>(4.0) * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= c::<T>(15.0) * tol {
        return left + right + diff / c(15.0);
    }
    let half = tol * c(0.5);
    simpson_rec(f, a, m, fa, flm, fm, left, half, depth - 1) + simpson_rec(f, m, b, fm, frm, fb, right, half, depth - 1)
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit<T: Real>(x: &[T], y: &[T]) -> (T, T) {
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let sxy: T = x.iter().zip(y).map(|(&a, &b)| (a - mx) * (b - my)).sum();
    let sxx: T = x.iter().map(|&a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Observed convergence order from errors at successively halved steps.
pub fn observed_rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}
