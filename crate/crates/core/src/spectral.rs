//! Eigensystems of `-(a u')' + q u` on `(0, L)` with Dirichlet conditions,
//! projection of spatial data and sensor blind-spot diagnostics.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::special::CompensatedSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Discretization {
    /// Closed-form sine modes of the constant-coefficient Laplacian.
    Analytic,
    /// Second-order finite differences.
    FiniteDifference,
}

/// Eigenpairs in increasing order. `modes[n]` holds samples on `grid`
/// (endpoints included, where they vanish). `boundary_slopes[n]` holds
/// `a φ_n' ν` at `x = 0` and `x = L` with the outward normal `ν`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub length: f64,
    pub lambdas: Vec<f64>,
    pub grid: Vec<f64>,
    pub modes: Vec<Vec<f64>>,
    pub boundary_slopes: Vec<[f64; 2]>,
    pub discretization: Discretization,
}

impl EigenSystem {
    pub fn n_modes(&self) -> usize {
        self.lambdas.len()
    }

    pub fn spacing(&self) -> f64 {
        self.length / (self.grid.len() - 1) as f64
    }

    /// `φ_n(x)` for zero-based `n`; finite-difference modes are interpolated
    /// with cubic Lagrange polynomials.
    pub fn mode_value(&self, n: usize, x: f64) -> f64 {
        match self.discretization {
            Discretization::Analytic => {
                let l = self.length;
                (2.0 / l).sqrt() * ((n + 1) as f64 * PI * x / l).sin()
            }
            Discretization::FiniteDifference => interpolate(&self.modes[n], self.spacing(), x),
        }
    }

    /// `Σ a_n φ_n(x)` over the supplied coefficients.
    pub fn synthesize(&self, coefficients: &[f64], x: f64) -> f64 {
        coefficients
            .iter()
            .take(self.n_modes())
            .enumerate()
            .map(|(n, a)| a * self.mode_value(n, x))
            .collect::<CompensatedSum>()
            .value()
    }

    /// Largest deviation of the discrete Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let h = self.spacing();
        let mut worst: f64 = 0.0;
        for i in 0..self.n_modes() {
            for j in 0..=i {
                let dot: f64 = h * dot(&self.modes[i], &self.modes[j]);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).collect::<CompensatedSum>().value()
}

fn interpolate(samples: &[f64], h: f64, x: f64) -> f64 {
    let n = samples.len() - 1;
    let s = (x / h).clamp(0.0, n as f64);
    let i = (s.floor() as usize).min(n - 1);
    if s == i as f64 {
        return samples[i];
    }
    let start = i.saturating_sub(1).min(n.saturating_sub(3));
    let nodes: Vec<usize> = (start..(start + 4).min(n + 1)).collect();
    let mut value = 0.0;
    for &j in &nodes {
        let mut w = 1.0;
        for &k in &nodes {
            if k != j {
                w *= (s - k as f64) / (j as f64 - k as f64);
            }
        }
        value += w * samples[j];
    }
    value
}

/// Default grid for the closed-form system.
pub fn default_grid_size(n_modes: usize) -> usize {
    (16 * n_modes).max(1024)
}

pub fn build_dirichlet_laplacian(length: f64, n_modes: usize) -> Result<EigenSystem> {
    build_dirichlet_laplacian_on(length, n_modes, default_grid_size(n_modes))
}

pub fn build_dirichlet_laplacian_on(
    length: f64,
    n_modes: usize,
    grid_size: usize,
) -> Result<EigenSystem> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid("L", format!("must be positive, got {length}")));
    }
    if n_modes == 0 {
        return Err(invalid("n_modes", "at least one mode is required"));
    }
    if grid_size <= n_modes {
        return Err(invalid(
            "grid_size",
            format!("{grid_size} intervals cannot resolve {n_modes} modes"),
        ));
    }
    let h = length / grid_size as f64;
    let grid: Vec<f64> = (0..=grid_size).map(|i| i as f64 * h).collect();
    let norm = (2.0 / length).sqrt();
    let mut lambdas = Vec::with_capacity(n_modes);
    let mut modes = Vec::with_capacity(n_modes);
    let mut boundary_slopes = Vec::with_capacity(n_modes);
    for n in 1..=n_modes {
        let k = n as f64 * PI / length;
        lambdas.push(k * k);
        // sin(nπ i/N) through the exact rational argument
        let samples: Vec<f64> = (0..=grid_size)
            .map(|i| {
                let r = (n * i) % (2 * grid_size);
                norm * crate::special::sin_pi(r as f64 / grid_size as f64)
            })
            .collect();
        modes.push(samples);
        let parity = if n % 2 == 0 { 1.0 } else { -1.0 };
        boundary_slopes.push([-norm * k, parity * norm * k]);
    }
    Ok(EigenSystem {
        length,
        lambdas,
        grid,
        modes,
        boundary_slopes,
        discretization: Discretization::Analytic,
    })
}

/// Finite-difference eigensystem of `-(a u')' + q u` with `grid_size`
/// intervals.
pub fn build_sturm_liouville(
    a: &dyn Fn(f64) -> f64,
    q: &dyn Fn(f64) -> f64,
    length: f64,
    grid_size: usize,
    n_modes: usize,
) -> Result<EigenSystem> {
    if !(length > 0.0 && length.is_finite()) {
        return Err(invalid("L", format!("must be positive, got {length}")));
    }
    if n_modes == 0 {
        return Err(invalid("n_modes", "at least one mode is required"));
    }
    if grid_size < 8 * n_modes || grid_size < 8 {
        return Err(invalid(
            "grid_size",
            format!("need at least 8 points per mode ({}), got {grid_size}", 8 * n_modes),
        ));
    }
    let h = length / grid_size as f64;
    let interior = grid_size - 1;
    let a_half: Vec<f64> = (0..grid_size).map(|i| a((i as f64 + 0.5) * h)).collect();
    for (i, &v) in a_half.iter().enumerate() {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::CoefficientViolation {
                what: "a",
                location: (i as f64 + 0.5) * h,
                value: v,
            });
        }
    }
    let a_ends = [a(0.0), a(length)];
    for (x, v) in [(0.0, a_ends[0]), (length, a_ends[1])] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::CoefficientViolation {
                what: "a",
                location: x,
                value: v,
            });
        }
    }
    let mut diag = Vec::with_capacity(interior);
    for i in 1..grid_size {
        let x = i as f64 * h;
        let qi = q(x);
        if !(qi >= 0.0) || !qi.is_finite() {
            return Err(Error::CoefficientViolation {
                what: "q",
                location: x,
                value: qi,
            });
        }
        diag.push((a_half[i - 1] + a_half[i]) / (h * h) + qi);
    }
    let off: Vec<f64> = (1..interior).map(|i| -a_half[i] / (h * h)).collect();
    let tri = Tridiagonal { diag, off };

    let mut lambdas = Vec::with_capacity(n_modes);
    let mut modes = Vec::with_capacity(n_modes);
    let mut boundary_slopes = Vec::with_capacity(n_modes);
    for k in 0..n_modes {
        let lambda = tri.eigenvalue(k);
        let mut v = tri.eigenvector(lambda);
        let norm = (h * dot(&v, &v)).sqrt();
        let sign = if v[0] < 0.0 { -1.0 } else { 1.0 };
        for x in v.iter_mut() {
            *x *= sign / norm;
        }
        let mut samples = Vec::with_capacity(grid_size + 1);
        samples.push(0.0);
        samples.extend_from_slice(&v);
        samples.push(0.0);
        let u = &samples;
        let m = grid_size;
        let d0 = (-25.0 * u[0] + 48.0 * u[1] - 36.0 * u[2] + 16.0 * u[3] - 3.0 * u[4]) / (12.0 * h);
        let dl = (25.0 * u[m] - 48.0 * u[m - 1] + 36.0 * u[m - 2] - 16.0 * u[m - 3]
            + 3.0 * u[m - 4])
            / (12.0 * h);
        boundary_slopes.push([-a_ends[0] * d0, a_ends[1] * dl]);
        lambdas.push(lambda);
        modes.push(samples);
    }
    let grid = (0..=grid_size).map(|i| i as f64 * h).collect();
    Ok(EigenSystem {
        length,
        lambdas,
        grid,
        modes,
        boundary_slopes,
        discretization: Discretization::FiniteDifference,
    })
}

/// Symmetric tridiagonal matrix.
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    /// Number of eigenvalues strictly below `sigma` (Sturm count).
    fn count_below(&self, sigma: f64) -> usize {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..self.diag.len() {
            let e2 = if i == 0 { 0.0 } else { self.off[i - 1] * self.off[i - 1] };
            d = self.diag[i] - sigma - if i == 0 { 0.0 } else { e2 / d };
            if d == 0.0 {
                d = -f64::EPSILON * (self.diag[i].abs() + sigma.abs());
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// `k`-th smallest eigenvalue (zero-based) by bisection.
    fn eigenvalue(&self, k: usize) -> f64 {
        let n = self.diag.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = (if i > 0 { self.off[i - 1].abs() } else { 0.0 })
                + (if i + 1 < n { self.off[i].abs() } else { 0.0 });
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Eigenvector for an accurate eigenvalue by inverse iteration.
    fn eigenvector(&self, lambda: f64) -> Vec<f64> {
        let n = self.diag.len();
        let shift = lambda + 1e-13 * lambda.abs().max(1.0);
        // deterministic, generic start vector
        let mut x: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * ((i * 7919) % 13) as f64).collect();
        for _ in 0..3 {
            x = self.solve_shifted(shift, &x);
            let m = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for v in x.iter_mut() {
                *v /= m;
            }
        }
        x
    }

    /// Solves `(T - σ I) x = b` by Gaussian elimination with partial pivoting.
    fn solve_shifted(&self, sigma: f64, b: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        if n == 1 {
            let d = self.diag[0] - sigma;
            return vec![b[0] / if d == 0.0 { f64::EPSILON } else { d }];
        }
        // upper factor kept as (diagonal, first super, second super)
        let mut d: Vec<f64> = self.diag.iter().map(|v| v - sigma).collect();
        let mut du: Vec<f64> = self.off.clone();
        let mut du2 = vec![0.0; n];
        let dl = &self.off;
        let mut rhs = b.to_vec();
        let tiny = f64::EPSILON * self.diag.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for i in 0..n - 1 {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    d[i] = tiny;
                }
                let f = dl[i] / d[i];
                d[i + 1] -= f * du[i];
                rhs[i + 1] -= f * rhs[i];
            } else {
                let f = d[i] / dl[i];
                d[i] = dl[i];
                let below = d[i + 1];
                d[i + 1] = du[i] - f * below;
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -f * du2[i];
                }
                du[i] = below;
                let r = rhs[i];
                rhs[i] = rhs[i + 1];
                rhs[i + 1] = r - f * rhs[i];
            }
        }
        if d[n - 1] == 0.0 {
            d[n - 1] = tiny;
        }
        let mut x = vec![0.0; n];
        x[n - 1] = rhs[n - 1] / d[n - 1];
        x[n - 2] = (rhs[n - 2] - du[n - 2] * x[n - 1]) / d[n - 2];
        for i in (0..n - 2).rev() {
            x[i] = (rhs[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / d[i];
        }
        x
    }
}

/// Spatial source data: a function on `[0, L]` or explicit mode
/// coefficients.
#[derive(Clone)]
pub enum SpatialSource {
    Function(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
    Modes(Vec<f64>),
}

impl fmt::Debug for SpatialSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpatialSource::Function(_) => f.write_str("SpatialSource::Function(..)"),
            SpatialSource::Modes(a) => f.debug_tuple("SpatialSource::Modes").field(a).finish(),
        }
    }
}

impl SpatialSource {
    pub fn function<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        SpatialSource::Function(Arc::new(f))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub coefficients: Vec<f64>,
    /// `‖f‖² - Σ a_n²` in the discrete norm; nonnegative up to rounding.
    pub parseval_defect: f64,
}

pub fn project(f: &SpatialSource, sys: &EigenSystem) -> Projection {
    match f {
        SpatialSource::Modes(a) => {
            let mut coefficients = a.clone();
            coefficients.resize(sys.n_modes(), 0.0);
            let dropped: f64 = a.iter().skip(sys.n_modes()).map(|v| v * v).sum();
            Projection {
                coefficients,
                parseval_defect: dropped,
            }
        }
        SpatialSource::Function(func) => {
            let h = sys.spacing();
            let samples: Vec<f64> = sys.grid.iter().map(|&x| func(x)).collect();
            // endpoint samples carry no weight: every mode vanishes there
            let interior = &samples[1..samples.len() - 1];
            let coefficients: Vec<f64> = sys
                .modes
                .iter()
                .map(|m| h * dot(interior, &m[1..m.len() - 1]))
                .collect();
            let norm2 = h * dot(interior, interior);
            let captured: f64 = coefficients.iter().map(|a| a * a).collect::<CompensatedSum>().value();
            Projection {
                coefficients,
                parseval_defect: norm2 - captured,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeylFit {
    /// Fitted exponent `p` in `λ_n ≈ c n^p`.
    pub exponent: f64,
    pub constant: f64,
    /// Largest `|λ_n - c n^p| / λ_n` over the upper half of the spectrum.
    pub max_residual: f64,
}

pub fn weyl_check(sys: &EigenSystem) -> Result<WeylFit> {
    let n = sys.n_modes();
    if n < 20 {
        return Err(Error::InsufficientData(format!(
            "the Weyl fit needs at least 20 eigenvalues, got {n}"
        )));
    }
    // fitted on the upper half, where lower-order terms of the operator no
    // longer bend the log-log line
    let xs: Vec<f64> = (n / 2 + 1..=n).map(|k| (k as f64).ln()).collect();
    let ys: Vec<f64> = sys.lambdas[n / 2..].iter().map(|l| l.ln()).collect();
    let (slope, intercept) = least_squares_line(&xs, &ys);
    let constant = intercept.exp();
    let max_residual = (n / 2..n)
        .map(|k| {
            let model = constant * ((k + 1) as f64).powf(slope);
            (sys.lambdas[k] - model).abs() / sys.lambdas[k]
        })
        .fold(0.0, f64::max);
    Ok(WeylFit {
        exponent: slope,
        constant,
        max_residual,
    })
}

/// Ordinary least-squares line `y = slope x + intercept`.
pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlindSpots {
    /// Interior points where every `|a_n φ_n(x)|` is below tolerance.
    pub interior: Vec<f64>,
    /// Endpoints where every `|a_n ∂_ν φ_n|` is below tolerance.
    pub boundary: Vec<Endpoint>,
    /// Set when a contiguous run of grid points qualifies, i.e. `f ≈ 0`
    /// on a subinterval.
    pub warning: Option<String>,
}

pub fn blind_spots(sys: &EigenSystem, coefficients: &[f64], tolerance: f64) -> BlindSpots {
    let active: Vec<(usize, f64)> = coefficients
        .iter()
        .take(sys.n_modes())
        .copied()
        .enumerate()
        .filter(|(_, a)| *a != 0.0)
        .collect();
    let worst = |x: f64| {
        active
            .iter()
            .map(|&(n, a)| (a * sys.mode_value(n, x)).abs())
            .fold(0.0, f64::max)
    };

    let mut interior = Vec::new();
    let mut run = 0usize;
    let mut longest_run = 0usize;
    let last = sys.grid.len() - 1;
    for &x in &sys.grid[1..last] {
        if worst(x) < tolerance {
            interior.push(x);
            run += 1;
            longest_run = longest_run.max(run);
        } else {
            run = 0;
        }
    }

    // common zeros between grid points: every zero of the leading active mode
    // is a candidate
    if let Some(&(lead, _)) = active.first() {
        let g = |x: f64| sys.mode_value(lead, x);
        for w in sys.grid[1..last].windows(2) {
            let (x0, x1) = (w[0], w[1]);
            let (g0, g1) = (g(x0), g(x1));
            if g0 == 0.0 || g1 == 0.0 || g0.signum() == g1.signum() {
                continue;
            }
            let (mut lo, mut hi, mut glo) = (x0, x1, g0);
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                let gm = g(mid);
                if gm.signum() == glo.signum() {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            let root = 0.5 * (lo + hi);
            if worst(root) < tolerance {
                interior.push(root);
            }
        }
    }
    interior.sort_by(f64::total_cmp);
    let h = sys.spacing();
    interior.dedup_by(|a, b| (*a - *b).abs() < 0.5 * h);

    let mut boundary = Vec::new();
    for (side, endpoint) in [(0, Endpoint::Left), (1, Endpoint::Right)] {
        let flux = active
            .iter()
            .map(|&(n, a)| (a * sys.boundary_slopes[n][side]).abs())
            .fold(0.0, f64::max);
        if flux < tolerance {
            boundary.push(endpoint);
        }
    }

    let warning = (longest_run >= 3).then(|| {
        format!(
            "{longest_run} consecutive grid points fall below the tolerance; the source is numerically zero on a subinterval"
        )
    });
    BlindSpots {
        interior,
        boundary,
        warning,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_spectrum_on_pi() {
        let sys = build_dirichlet_laplacian(PI, 3).unwrap();
        for (n, l) in sys.lambdas.iter().enumerate() {
            assert!((l - ((n + 1) * (n + 1)) as f64).abs() < 1e-13);
        }
    }

    #[test]
    fn sine_peak() {
        let sys = build_dirichlet_laplacian(1.0, 1).unwrap();
        assert!((sys.mode_value(0, 0.5) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn boundary_slope_uses_outward_normal() {
        let sys = build_dirichlet_laplacian(PI, 2).unwrap();
        let expected = (2.0 / PI).sqrt() * 2.0;
        assert!((sys.boundary_slopes[1][0] + expected).abs() < 1e-14);
        assert!((sys.boundary_slopes[1][1] - expected).abs() < 1e-14);
    }

    #[test]
    fn tridiagonal_solve_with_pivoting() {
        let t = Tridiagonal {
            diag: vec![0.0, 1.0, 2.0, 0.5],
            off: vec![3.0, -1.0, 4.0],
        };
        let b = [1.0, 2.0, 3.0, 4.0];
        let x = t.solve_shifted(0.0, &b);
        let ax = [
            t.diag[0] * x[0] + t.off[0] * x[1],
            t.off[0] * x[0] + t.diag[1] * x[1] + t.off[1] * x[2],
            t.off[1] * x[1] + t.diag[2] * x[2] + t.off[2] * x[3],
            t.off[2] * x[2] + t.diag[3] * x[3],
        ];
        for i in 0..4 {
            assert!((ax[i] - b[i]).abs() < 1e-13, "{ax:?}");
        }
    }

    #[test]
    fn too_few_eigenvalues_for_weyl() {
        let sys = build_dirichlet_laplacian(PI, 5).unwrap();
        assert!(matches!(weyl_check(&sys), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn interpolation_is_exact_for_cubics() {
        let h = 0.1;
        let samples: Vec<f64> = (0..=10).map(|i| (i as f64 * h).powi(3)).collect();
        for x in [0.03, 0.47, 0.98] {
            assert!((interpolate(&samples, h, x) - x.powi(3)).abs() < 1e-14);
        }
    }
}
