//! Circle homeomorphisms and their harmonic extensions to the disk.

use std::f64::consts::TAU;

use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::par;
use crate::C64;

/// Minimum number of samples of a [`CircleMap`].
pub const MIN_SAMPLES: usize = 64;

/// Sampled orientation-preserving circle homeomorphism `θ ↦ f(θ)`.
///
/// Sources `theta` are strictly increasing within one turn; targets are
/// lifted so that they are strictly increasing and `f(θ + 2π) = f(θ) + 2π`.
/// Values between samples come from periodic monotone cubic (PCHIP)
/// interpolation.
#[derive(Debug, Clone)]
pub struct CircleMap {
    theta: Vec<f64>,
    target: Vec<f64>,
    slope: Vec<f64>,
}

impl CircleMap {
    /// Builds from sample pairs given in order of increasing source angle.
    /// Angles may be given modulo 2π; targets are lifted.
    pub fn new(theta: &[f64], target: &[f64]) -> Result<Self> {
        let n = theta.len();
        if n != target.len() {
            return Err(Error::DimensionMismatch(
                "circle map sources and targets differ in length".into(),
            ));
        }
        if n < MIN_SAMPLES {
            return Err(Error::InvalidArgument(format!(
                "circle map needs at least {MIN_SAMPLES} samples, got {n}"
            )));
        }
        let th = lift(theta);
        let tg = lift(target);
        for k in 0..n {
            let (dt, dg) = if k + 1 < n {
                (th[k + 1] - th[k], tg[k + 1] - tg[k])
            } else {
                (th[0] + TAU - th[k], tg[0] + TAU - tg[k])
            };
            if !(dt > 0.0 && dg > 0.0) {
                return Err(Error::NotMonotone { angle: th[k] });
            }
        }
        let turn_src = th[n - 1] - th[0];
        let turn_dst = tg[n - 1] - tg[0];
        if !(turn_src < TAU && turn_dst < TAU) {
            return Err(Error::NotMonotone { angle: th[n - 1] });
        }
        let slope = pchip_slopes(&th, &tg);
        Ok(Self {
            theta: th,
            target: tg,
            slope,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::rotation(n, 0.0)
    }

    pub fn rotation(n: usize, angle: f64) -> Self {
        let th: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
        let tg: Vec<f64> = th.iter().map(|t| t + angle).collect();
        Self::new(&th, &tg).expect("rotation is monotone")
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn sources(&self) -> &[f64] {
        &self.theta
    }

    pub fn targets(&self) -> &[f64] {
        &self.target
    }

    /// Interpolated lifted target angle.
    pub fn eval(&self, angle: f64) -> f64 {
        let n = self.theta.len();
        let t0 = self.theta[0];
        let turns = ((angle - t0) / TAU).floor();
        let a = angle - turns * TAU;
        // interval k: [theta[k], theta[k+1]] with theta[n] = theta[0] + 2π
        let k = match self.theta.partition_point(|&t| t <= a) {
            0 => 0,
            p => p - 1,
        };
        let (x0, y0, d0) = (self.theta[k], self.target[k], self.slope[k]);
        let (x1, y1, d1) = if k + 1 < n {
            (self.theta[k + 1], self.target[k + 1], self.slope[k + 1])
        } else {
            (self.theta[0] + TAU, self.target[0] + TAU, self.slope[0])
        };
        hermite(a, x0, x1, y0, y1, d0, d1) + turns * TAU
    }

    /// Samples `e^{i f(2πj/m)}` for `j = 0..m`.
    pub fn uniform_boundary(&self, m: usize) -> Vec<C64> {
        par::map_range(m, |j| C64::from_polar(1.0, self.eval(TAU * j as f64 / m as f64)))
    }

    /// Largest deviation of the lifted map from the best-fitting rotation.
    pub fn distance_from_rotation(&self, m: usize) -> f64 {
        let d: Vec<f64> = (0..m)
            .map(|j| {
                let t = TAU * j as f64 / m as f64;
                self.eval(t) - t
            })
            .collect();
        let (lo, hi) = d
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        0.5 * (hi - lo)
    }

    /// Minimum increment of the target angle between adjacent samples.
    pub fn min_increment(&self) -> f64 {
        let n = self.target.len();
        (0..n)
            .map(|k| {
                if k + 1 < n {
                    self.target[k + 1] - self.target[k]
                } else {
                    self.target[0] + TAU - self.target[k]
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Unwraps angles into a strictly increasing sequence (each step taken in
/// `[0, 2π)`), starting in `[0, 2π)`.
fn lift(a: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len());
    let mut prev = a[0].rem_euclid(TAU);
    out.push(prev);
    for &x in &a[1..] {
        let step = (x - prev).rem_euclid(TAU);
        prev += step;
        out.push(prev);
    }
    out
}

/// Fritsch–Carlson slopes for periodic data with period 2π in both axes.
fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let secant = |k: usize| {
        if k + 1 < n {
            (y[k + 1] - y[k]) / (x[k + 1] - x[k])
        } else {
            (y[0] + TAU - y[k]) / (x[0] + TAU - x[k])
        }
    };
    let width = |k: usize| {
        if k + 1 < n {
            x[k + 1] - x[k]
        } else {
            x[0] + TAU - x[k]
        }
    };
    (0..n)
        .map(|k| {
            let km = (k + n - 1) % n;
            let (s0, s1) = (secant(km), secant(k));
            if s0 <= 0.0 || s1 <= 0.0 {
                return 0.0;
            }
            let (h0, h1) = (width(km), width(k));
            let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
            (w1 + w2) / (w1 / s0 + w2 / s1)
        })
        .collect()
}

fn hermite(x: f64, x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let (t2, t3) = (t * t, t * t * t);
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Poisson integral of the circle map sampled at `n` equally spaced angles:
/// `H(re^{iα}) = (1/n) Σ_k P_r(α − θ_k) e^{i f(θ_k)}`. Points with `|z| ≥ 1`
/// take the boundary value `e^{i f(arg z)}`.
pub fn poisson_extend(f: &CircleMap, n: usize, points: &[C64]) -> Vec<C64> {
    let samples = f.uniform_boundary(n);
    let thetas: Vec<f64> = (0..n).map(|k| TAU * k as f64 / n as f64).collect();
    par::map_slice(points, |&z| {
        let r = z.norm();
        if r >= 1.0 {
            return C64::from_polar(1.0, f.eval(z.arg()));
        }
        let a = z.arg();
        let mut acc = C64::new(0.0, 0.0);
        for (t, g) in thetas.iter().zip(&samples) {
            let p = (1.0 - r * r) / (1.0 - 2.0 * r * (a - t).cos() + r * r);
            acc += g * p;
        }
        acc / n as f64
    })
}

/// Harmonic extension represented by its Fourier series,
/// `H(z) = Σ_{n≥0} a_n zⁿ + Σ_{n≥1} b_n z̄ⁿ`, so that
/// `H_z = Σ n a_n z^{n-1}` and `H_z̄ = Σ n b_n z̄^{n-1}` are exact.
#[derive(Debug, Clone)]
pub struct HarmonicExtension {
    /// `a_0, a_1, …`
    pos: Vec<C64>,
    /// `b_1, b_2, …` stored from index 0.
    neg: Vec<C64>,
}

/// Relative size below which Fourier coefficients are dropped.
const COEFF_CUTOFF: f64 = 1e-16;

impl HarmonicExtension {
    /// Fourier coefficients of `e^{i f}` from `m` uniform samples.
    pub fn new(f: &CircleMap, m: usize) -> Self {
        let mut g = f.uniform_boundary(m);
        let mut planner = FftPlanner::<f64>::new();
        planner.plan_fft_forward(m).process(&mut g);
        let scale = 1.0 / m as f64;
        let half = m / 2;
        let mut pos: Vec<C64> = (0..half).map(|n| g[n] * scale).collect();
        let mut neg: Vec<C64> = (1..half).map(|n| g[m - n] * scale).collect();
        let peak = pos
            .iter()
            .chain(&neg)
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        trim(&mut pos, peak * COEFF_CUTOFF);
        trim(&mut neg, peak * COEFF_CUTOFF);
        Self { pos, neg }
    }

    /// Coefficients of the extension of `θ ↦ f(θ + φ)`, i.e. `z ↦ H(e^{iφ} z)`.
    pub fn rotated(&self, phi: f64) -> Self {
        Self {
            pos: self
                .pos
                .iter()
                .enumerate()
                .map(|(n, c)| c * C64::from_polar(1.0, n as f64 * phi))
                .collect(),
            neg: self
                .neg
                .iter()
                .enumerate()
                .map(|(n, c)| c * C64::from_polar(1.0, -((n + 1) as f64) * phi))
                .collect(),
        }
    }

    pub fn degree(&self) -> usize {
        self.pos.len().max(self.neg.len() + 1)
    }

    /// Number of terms needed at radius `r` for geometric decay below 1e-17.
    fn terms(&self, r: f64) -> usize {
        if r < 1e-300 {
            return 2;
        }
        let k = (-39.0 / r.ln()).ceil();
        if k.is_finite() && k < self.degree() as f64 {
            k as usize + 1
        } else {
            self.degree()
        }
    }

    pub fn eval(&self, z: C64) -> C64 {
        let k = self.terms(z.norm());
        horner(&self.pos[..k.min(self.pos.len())], z)
            + z.conj() * horner(&self.neg[..k.min(self.neg.len())], z.conj())
    }

    /// Wirtinger derivatives `(H_z, H_z̄)`.
    pub fn derivatives(&self, z: C64) -> (C64, C64) {
        let k = self.terms(z.norm());
        let dz = horner_derivative(&self.pos[..k.min(self.pos.len())], z);
        let dzb = horner_shifted(&self.neg[..k.min(self.neg.len())], z.conj());
        (dz, dzb)
    }

    /// Beltrami coefficient `H_z̄ / H_z` (0 where `H_z` vanishes).
    pub fn beltrami(&self, z: C64) -> C64 {
        let (dz, dzb) = self.derivatives(z);
        if dz.norm_sqr() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            dzb / dz
        }
    }
}

fn trim(c: &mut Vec<C64>, tol: f64) {
    while c.len() > 1 && c.last().unwrap().norm() <= tol {
        c.pop();
    }
}

/// `Σ c_n zⁿ`.
fn horner(c: &[C64], z: C64) -> C64 {
    c.iter().rev().fold(C64::new(0.0, 0.0), |acc, &a| acc * z + a)
}

/// `d/dz Σ_k c_k z^k = Σ_{k≥1} k c_k z^{k-1}`.
fn horner_derivative(c: &[C64], z: C64) -> C64 {
    c.iter()
        .enumerate()
        .skip(1)
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, (k, &a)| acc * z + a * k as f64)
}

/// `Σ_k (k + 1) c_k z^k`.
fn horner_shifted(c: &[C64], z: C64) -> C64 {
    c.iter()
        .enumerate()
        .rev()
        .fold(C64::new(0.0, 0.0), |acc, (k, &a)| acc * z + a * (k + 1) as f64)
}

/// Angle of `z` in `[0, 2π)`.
pub fn angle(z: C64) -> f64 {
    let a = z.arg();
    if a < 0.0 {
        a + TAU
    } else if a >= TAU {
        a - TAU
    } else {
        a
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lift_and_monotone_check() {
        let th: Vec<f64> = (0..100).map(|k| TAU * k as f64 / 100.0).collect();
        let tg: Vec<f64> = th.iter().map(|t| (t + 0.3 * t.sin() + 5.0).rem_euclid(TAU)).collect();
        let f = CircleMap::new(&th, &tg).unwrap();
        assert!(f.min_increment() > 0.0);
        let mut bad = tg.clone();
        bad.swap(10, 11);
        assert!(matches!(
            CircleMap::new(&th, &bad),
            Err(Error::NotMonotone { .. })
        ));
    }

    #[test]
    fn interpolation_is_exact_at_samples_and_periodic() {
        let th: Vec<f64> = (0..80).map(|k| TAU * (k as f64 + 0.3 * (k % 3) as f64) / 80.0).collect();
        let tg: Vec<f64> = th.iter().map(|t| t + 0.4 * t.sin()).collect();
        let f = CircleMap::new(&th, &tg).unwrap();
        for (t, g) in th.iter().zip(&tg) {
            assert!((f.eval(*t) - g).abs() < 1e-12);
            assert!((f.eval(t + TAU) - g - TAU).abs() < 1e-12);
        }
        // monotone between samples
        let mut prev = f.eval(0.0);
        for j in 1..5000 {
            let v = f.eval(TAU * j as f64 / 5000.0);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn poisson_identity_and_rotation() {
        let pts: Vec<C64> = (0..50)
            .map(|k| C64::from_polar(0.9 * (k as f64 / 49.0), 0.7 * k as f64))
            .collect();
        let id = CircleMap::identity(512);
        let h = poisson_extend(&id, 512, &pts);
        for (z, w) in pts.iter().zip(&h) {
            assert!((z - w).norm() < 1e-3);
        }
        let rot = CircleMap::rotation(512, 0.8);
        let h = poisson_extend(&rot, 512, &pts);
        for (z, w) in pts.iter().zip(&h) {
            assert!((z * C64::from_polar(1.0, 0.8) - w).norm() < 1e-3);
        }
    }

    #[test]
    fn poisson_center_is_boundary_mean() {
        let th: Vec<f64> = (0..128).map(|k| TAU * k as f64 / 128.0).collect();
        let tg: Vec<f64> = th.iter().map(|t| t + 0.5 * t.sin()).collect();
        let f = CircleMap::new(&th, &tg).unwrap();
        let h0 = poisson_extend(&f, 256, &[C64::new(0.0, 0.0)])[0];
        let mean = f.uniform_boundary(256).iter().sum::<C64>() / 256.0;
        assert!((h0 - mean).norm() < 1e-15);
    }

    #[test]
    fn spectral_extension_matches_poisson() {
        let th: Vec<f64> = (0..256).map(|k| TAU * k as f64 / 256.0).collect();
        let tg: Vec<f64> = th.iter().map(|t| t + 0.3 * (2.0 * t).sin()).collect();
        let f = CircleMap::new(&th, &tg).unwrap();
        let h = HarmonicExtension::new(&f, 1024);
        for k in 0..20 {
            let z = C64::from_polar(0.05 * k as f64, 1.3 * k as f64);
            let p = poisson_extend(&f, 1024, &[z])[0];
            assert!((h.eval(z) - p).norm() < 1e-9);
            // derivatives against central differences
            let e = 1e-6;
            let hx = (h.eval(z + e) - h.eval(z - e)) / (2.0 * e);
            let hy = (h.eval(z + C64::new(0.0, e)) - h.eval(z - C64::new(0.0, e))) / (2.0 * e);
            let i = C64::new(0.0, 1.0);
            let (dz, dzb) = h.derivatives(z);
            assert!((dz - 0.5 * (hx - i * hy)).norm() < 1e-6);
            assert!((dzb - 0.5 * (hx + i * hy)).norm() < 1e-6);
        }
    }

    #[test]
    fn rotated_extension_law() {
        let th: Vec<f64> = (0..128).map(|k| TAU * k as f64 / 128.0).collect();
        let tg: Vec<f64> = th.iter().map(|t| t + 0.2 * (3.0 * t).cos()).collect();
        let f = CircleMap::new(&th, &tg).unwrap();
        let h = HarmonicExtension::new(&f, 512);
        let r = h.rotated(0.7);
        let z = C64::new(0.3, -0.4);
        assert!((r.eval(z) - h.eval(z * C64::from_polar(1.0, 0.7))).norm() < 1e-12);
        let b = h.beltrami(z * C64::from_polar(1.0, 0.7)) * C64::from_polar(1.0, -1.4);
        assert!((r.beltrami(z) - b).norm() < 1e-12);
    }
}
