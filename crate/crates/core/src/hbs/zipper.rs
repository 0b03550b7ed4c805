//! Conformal maps of the interior and exterior of a polygon by the geodesic
//! zipper algorithm.
//!
//! A chain of elementary maps (a square-root opening of the first edge, one
//! slit-opening step per remaining vertex, and a final squaring) sends the
//! contour onto the real line, the interior onto the upper half-plane and the
//! exterior onto the lower half-plane. Möbius maps then take the half-planes
//! to the unit disk and to its exterior with `∞ ↦ ∞`.

use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::geometry;
use crate::mesh::TriMesh;
use crate::par;
use crate::C64;

/// Square root in the closed upper half-plane.
#[inline]
fn sqrt_h(z: C64) -> C64 {
    let r = z.sqrt();
    if r.im < 0.0 {
        -r
    } else {
        r
    }
}

/// Real point on the extended line.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Proj {
    Finite(f64),
    Infinite,
}

/// 2×2 complex matrix acting as a Möbius transformation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moebius {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Moebius {
    pub fn apply(&self, z: C64) -> C64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    pub fn compose(&self, inner: &Moebius) -> Moebius {
        Moebius {
            a: self.a * inner.a + self.b * inner.c,
            b: self.a * inner.b + self.b * inner.d,
            c: self.c * inner.a + self.d * inner.c,
            d: self.c * inner.b + self.d * inner.d,
        }
    }

    pub fn inverse(&self) -> Moebius {
        Moebius {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    /// Disk automorphism `z ↦ (z - m) / (1 - m̄ z)`.
    pub fn disk(m: C64) -> Moebius {
        Moebius {
            a: C64::new(1.0, 0.0),
            b: -m,
            c: -m.conj(),
            d: C64::new(1.0, 0.0),
        }
    }
}

/// Result of zipping a contour: the chain of elementary maps and the images of
/// the contour vertices.
#[derive(Debug, Clone)]
pub struct ConformalMaps {
    points: Vec<C64>,
    z0: C64,
    z1: C64,
    /// `(b, c)` of each slit-opening step.
    steps: Vec<(f64, f64)>,
    /// Image of the first vertex just before the final step.
    p: Option<f64>,
    /// Sign of the final squaring.
    s: f64,
    /// Sign of the real axis that carries the interior side before the
    /// final squaring.
    quad: f64,
    /// Upper half-plane → unit disk, including the normalisation that centres
    /// the boundary correspondence.
    to_disk: Moebius,
    /// Lower half-plane → exterior of the unit disk, `w_inf ↦ ∞`.
    to_exterior: Moebius,
    /// Real images `(interior side, exterior side)` of the contour vertices
    /// (vertex 0 sits at infinity).
    real: Vec<Option<(f64, f64)>>,
}

/// Iteration cap for the boundary-centring Möbius normalisation.
const CENTER_ITERS: usize = 200;

impl ConformalMaps {
    /// Zips a simple counterclockwise closed polygon.
    pub fn new(points: &[C64]) -> Result<Self> {
        let n = points.len();
        if n < 4 {
            return Err(Error::ContourTooShort { got: n, min: 4 });
        }
        let (z0, z1) = (points[0], points[1]);
        let first = |z: C64| C64::new(0.0, 1.0) * ((z - z1) / (z - z0)).sqrt();

        // unzipped vertices 2..n as complex points of the upper half-plane
        let mut free: Vec<C64> = points[2..].iter().map(|&z| first(z)).collect();
        // zipped vertices carry their two one-sided real images, interior
        // side first
        let mut zipped: Vec<(f64, f64)> = Vec::with_capacity(n);
        zipped.push((0.0, 0.0)); // vertex 1
        let mut p = Proj::Infinite;
        let mut w_inf = C64::new(0.0, 1.0);
        let mut steps = Vec::with_capacity(n - 2);

        for k in 0..free.len() {
            let a = free[k];
            let m2 = a.norm_sqr();
            if !(a.im > 0.0) || m2 == 0.0 {
                return Err(Error::ContourNotSimple(format!(
                    "vertex {} left the upper half-plane while zipping",
                    k + 2
                )));
            }
            let (b, c) = (a.re / m2, a.im / m2);
            let c2 = 1.0 / (c * c);
            steps.push((b, c));
            let t = |z: C64| z / (1.0 - b * z);
            let open = |z: C64| {
                let tz = t(z);
                sqrt_h(tz * tz + c2)
            };
            let open_t = |tx: f64| tx.signum() * (tx * tx + c2).sqrt();
            let open_real = |x: f64| open_t(x / (1.0 - b * x));
            let rest = &mut free[k + 1..];
            par::for_each_mut(rest, |_, z| *z = open(*z));
            let last = zipped.len() - 1;
            for (j, pair) in zipped.iter_mut().enumerate() {
                if j == last {
                    // the previous tip sits at 0 and splits
                    *pair = (-1.0 / c, 1.0 / c);
                } else {
                    *pair = (open_real(pair.0), open_real(pair.1));
                }
            }
            zipped.push((0.0, 0.0));
            w_inf = open(w_inf);
            p = match p {
                Proj::Infinite if b == 0.0 => Proj::Infinite,
                Proj::Infinite => Proj::Finite(open_t(-1.0 / b)),
                Proj::Finite(x) if 1.0 - b * x == 0.0 => Proj::Infinite,
                Proj::Finite(x) => Proj::Finite(open_real(x)),
            };
        }

        let p_final = match p {
            Proj::Finite(x) => Some(x),
            Proj::Infinite => None,
        };
        let fin = |z: C64| match p_final {
            Some(pp) => z / (1.0 - z / pp),
            None => z,
        };
        let wf = fin(w_inf);
        let s = if (wf * wf).im > 0.0 { -1.0 } else { 1.0 };
        let w_inf = s * wf * wf;
        if !(w_inf.im < 0.0) {
            return Err(Error::ContourNotSimple(
                "degenerate image of infinity".into(),
            ));
        }
        let fin_real = |x: f64| {
            let fx = match p_final {
                Some(pp) => x / (1.0 - x / pp),
                None => x,
            };
            s * fx * fx
        };
        let mid = zipped[zipped.len() / 2].0;
        let quad = match p_final {
            Some(pp) => (mid / (1.0 - mid / pp)).signum(),
            None => mid.signum(),
        };
        let mut real = Vec::with_capacity(n);
        real.push(None);
        real.extend(zipped.iter().map(|&(l, r)| Some((fin_real(l), fin_real(r)))));

        let wc = w_inf.conj();
        let to_disk_raw = Moebius {
            a: C64::new(1.0, 0.0),
            b: -wc,
            c: C64::new(1.0, 0.0),
            d: -wc.conj(),
        };
        let to_exterior = Moebius {
            a: C64::new(1.0, 0.0),
            b: -w_inf.conj(),
            c: C64::new(1.0, 0.0),
            d: -w_inf,
        };
        let mut maps = Self {
            points: points.to_vec(),
            z0,
            z1,
            steps,
            p: p_final,
            s,
            quad,
            to_disk: to_disk_raw,
            to_exterior,
            real,
        };
        maps.center_boundary()?;
        Ok(maps)
    }

    /// Chooses the disk automorphism so that the arclength-weighted mean of
    /// the interior boundary correspondence vanishes.
    fn center_boundary(&mut self) -> Result<()> {
        let n = self.points.len();
        let weights: Vec<f64> = (0..n)
            .map(|k| {
                let prev = self.points[(k + n - 1) % n];
                let next = self.points[(k + 1) % n];
                0.5 * ((self.points[k] - prev).norm() + (next - self.points[k]).norm())
            })
            .collect();
        let total: f64 = weights.iter().sum();
        let mut u: Vec<C64> = (0..n).map(|k| self.disk_image_raw(k)).collect();
        let mut acc = Moebius::disk(C64::new(0.0, 0.0));
        for _ in 0..CENTER_ITERS {
            let m = u.iter().zip(&weights).map(|(z, w)| z * w).sum::<C64>() / total;
            if m.norm() < 1e-14 {
                break;
            }
            // damp large steps so the automorphism stays well inside the disk
            let m = if m.norm() > 0.5 { m * (0.5 / m.norm()) } else { m };
            let step = Moebius::disk(m);
            for z in u.iter_mut() {
                let w = step.apply(*z);
                *z = w / w.norm();
            }
            acc = step.compose(&acc);
        }
        let m = u.iter().zip(&weights).map(|(z, w)| z * w).sum::<C64>() / total;
        if !(m.norm() < 1e-8) {
            return Err(Error::Solver(format!(
                "boundary centring did not converge (residual {})",
                m.norm()
            )));
        }
        self.to_disk = acc.compose(&self.to_disk);
        Ok(())
    }

    fn disk_image_raw(&self, k: usize) -> C64 {
        match self.real[k] {
            None => C64::new(1.0, 0.0),
            Some((x, _)) => {
                let w = self.to_disk.apply(C64::new(x, 0.0));
                w / w.norm()
            }
        }
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    /// Angles `Φ1⁻¹(z_k)` of the contour vertices on the unit circle.
    pub fn interior_angles(&self) -> Vec<f64> {
        (0..self.points.len())
            .map(|k| {
                let w = match self.real[k] {
                    None => self.to_disk.apply_at_infinity(),
                    Some((x, _)) => self.to_disk.apply(C64::new(x, 0.0)),
                };
                super::welding::angle(w)
            })
            .collect()
    }

    /// Angles `Φ2⁻¹(z_k)` of the contour vertices on the unit circle.
    pub fn exterior_angles(&self) -> Vec<f64> {
        (0..self.points.len())
            .map(|k| {
                let w = match self.real[k] {
                    None => self.to_exterior.apply_at_infinity(),
                    Some((_, x)) => self.to_exterior.apply(C64::new(x, 0.0)),
                };
                super::welding::angle(w)
            })
            .collect()
    }

    /// Forward chain to the half-plane picture for a point off the contour.
    fn forward(&self, z: C64) -> C64 {
        let mut w = C64::new(0.0, 1.0) * ((z - self.z1) / (z - self.z0)).sqrt();
        for &(b, c) in &self.steps {
            let t = w / (1.0 - b * w);
            w = sqrt_h(t * t + 1.0 / (c * c));
        }
        let f = match self.p {
            Some(pp) => w / (1.0 - w / pp),
            None => w,
        };
        self.s * f * f
    }

    /// `Φ1⁻¹` for a point inside the contour.
    pub fn interior_inverse(&self, z: C64) -> C64 {
        self.to_disk.apply(self.forward(z))
    }

    /// `Φ2⁻¹` for a point outside the contour.
    pub fn exterior_inverse(&self, z: C64) -> C64 {
        self.to_exterior.apply(self.forward(z))
    }

    /// `Φ1`: unit disk → interior of the contour.
    pub fn interior_map(&self, zeta: C64) -> C64 {
        let g = self.to_disk.inverse().apply(zeta);
        // back through the final squaring, on the interior quadrant
        let mut w = if g.is_finite() && g.norm() < 1e150 {
            let mut f = sqrt_h(self.s * g);
            if f.im.abs() <= 1e-12 * f.norm() && f.re * self.quad < 0.0 {
                f = -f;
            }
            match self.p {
                Some(pp) => f / (1.0 + f / pp),
                None => f,
            }
        } else {
            match self.p {
                Some(pp) => C64::new(pp, 0.0),
                None => return self.z0,
            }
        };
        for &(b, c) in self.steps.iter().rev() {
            let mut t = sqrt_h(w * w - 1.0 / (c * c));
            // on the real line the root keeps the sign of w
            if t.im.abs() <= 1e-12 * t.norm() && t.re * w.re < 0.0 {
                t = -t;
            }
            w = t / (1.0 + b * t);
        }
        let q = -(w * w);
        if !q.is_finite() || q.norm() > 1e150 {
            return self.z0;
        }
        (self.z1 - q * self.z0) / (1.0 - q)
    }

    /// The welding `Φ1⁻¹ ∘ Φ2` as a circle map from exterior to interior
    /// angles.
    pub fn welding(&self) -> Result<super::welding::CircleMap> {
        let beta = self.exterior_angles();
        let alpha = self.interior_angles();
        // order by exterior angle, starting from the smallest
        let n = beta.len();
        let start = (0..n)
            .min_by(|&i, &j| beta[i].total_cmp(&beta[j]))
            .unwrap_or(0);
        let b: Vec<f64> = (0..n).map(|k| beta[(start + k) % n]).collect();
        let a: Vec<f64> = (0..n).map(|k| alpha[(start + k) % n]).collect();
        super::welding::CircleMap::new(&b, &a)
    }

    /// Largest face Beltrami coefficient of the piecewise linear interpolant
    /// of `Φ1` on a uniform `n × n` grid over the disk, taken over faces
    /// within radius `1 - 2h`.
    pub fn conformality_residual(&self, n: usize) -> Result<f64> {
        let mesh = TriMesh::square(n, 1.0)?;
        let h = mesh.spacing();
        let lim = 1.0 - 2.0 * h;
        let image = par::map_slice(mesh.vertices(), |&z| {
            if z.norm() <= 1.0 {
                self.interior_map(z)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let faces = mesh.faces();
        let worst = par::max_range(faces.len(), |fi| {
            let f = faces[fi];
            if f.iter().any(|&v| mesh.vertices()[v].norm() > lim) {
                return 0.0;
            }
            let (dz, dzb) = mesh.face_derivative(fi, &image);
            if dz.norm() == 0.0 {
                0.0
            } else {
                (dzb / dz).norm()
            }
        });
        Ok(worst)
    }
}

impl Moebius {
    fn apply_at_infinity(&self) -> C64 {
        self.a / self.c
    }
}

/// Checks that angles read in order around the contour are a circular
/// monotone sequence.
pub fn check_monotone(angles: &[f64]) -> Result<()> {
    let n = angles.len();
    let mut total = 0.0;
    for k in 0..n {
        let step = (angles[(k + 1) % n] - angles[k]).rem_euclid(TAU);
        if step <= 0.0 {
            return Err(Error::NotMonotone { angle: angles[k] });
        }
        total += step;
    }
    if (total - TAU).abs() > 1e-6 {
        let k = (0..n)
            .max_by(|&i, &j| {
                let si = (angles[(i + 1) % n] - angles[i]).rem_euclid(TAU);
                let sj = (angles[(j + 1) % n] - angles[j]).rem_euclid(TAU);
                si.total_cmp(&sj)
            })
            .unwrap();
        return Err(Error::NotMonotone { angle: angles[k] });
    }
    Ok(())
}

/// Validates and zips a contour after centring it on its centroid.
pub fn zip_contour(points: &[C64]) -> Result<ConformalMaps> {
    geometry::check_simple(points, 4)?;
    let c = geometry::centroid(points);
    let centered: Vec<C64> = points.iter().map(|z| z - c).collect();
    ConformalMaps::new(&centered)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ellipse(a: f64, b: f64, n: usize) -> Vec<C64> {
        (0..n)
            .map(|k| {
                let t = TAU * k as f64 / n as f64;
                C64::new(a * t.cos(), b * t.sin())
            })
            .collect()
    }

    #[test]
    fn circle_maps_are_rotations() {
        let pts = ellipse(1.0, 1.0, 256);
        let maps = ConformalMaps::new(&pts).unwrap();
        let alpha = maps.interior_angles();
        let beta = maps.exterior_angles();
        check_monotone(&alpha).unwrap();
        check_monotone(&beta).unwrap();
        let d0 = (alpha[0] - TAU * 0.0).rem_euclid(TAU);
        for (k, a) in alpha.iter().enumerate() {
            let t = TAU * k as f64 / 256.0;
            let d = (a - t - d0 + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            assert!(d.abs() < 1e-3, "{k} {d}");
        }
        let e0 = beta[0];
        for (k, b) in beta.iter().enumerate() {
            let t = TAU * k as f64 / 256.0;
            let d = (b - t - e0 + std::f64::consts::PI).rem_euclid(TAU) - std::f64::consts::PI;
            assert!(d.abs() < 1e-3, "{k} {d}");
        }
        assert!(maps.conformality_residual(64).unwrap() < 0.02);
        let w = maps.welding().unwrap();
        assert!(w.distance_from_rotation(512) < 1e-3);
    }

    #[test]
    fn scaled_circle_has_the_same_welding() {
        let w1 = ConformalMaps::new(&ellipse(1.0, 1.0, 200)).unwrap().welding().unwrap();
        let big: Vec<C64> = ellipse(2.0, 2.0, 200);
        let w2 = ConformalMaps::new(&big).unwrap().welding().unwrap();
        for j in 0..100 {
            let t = TAU * j as f64 / 100.0;
            let d = (w1.eval(t) - w2.eval(t) + 1.0).rem_euclid(TAU) - 1.0;
            assert!(d.abs() < 1e-9);
        }
    }

    #[test]
    fn interior_map_inverts_forward_chain() {
        let pts = ellipse(1.0, 1.2, 300);
        let maps = ConformalMaps::new(&pts).unwrap();
        for k in 0..30 {
            let zeta = C64::from_polar(0.95 * k as f64 / 30.0, 0.9 * k as f64);
            let z = maps.interior_map(zeta);
            assert!(geometry::contains(&pts, z));
            assert!((maps.interior_inverse(z) - zeta).norm() < 1e-9);
        }
        // boundary points land on their interior angles
        let alpha = maps.interior_angles();
        for k in (0..300).step_by(17) {
            let z = maps.interior_map(C64::from_polar(1.0, alpha[k]));
            assert!((z - pts[k]).norm() < 1e-6, "{k}");
        }
    }

    #[test]
    fn ellipse_welding_is_monotone_and_nontrivial() {
        let pts = ellipse(1.0, 1.2, 512);
        let maps = ConformalMaps::new(&pts).unwrap();
        check_monotone(&maps.interior_angles()).unwrap();
        check_monotone(&maps.exterior_angles()).unwrap();
        assert!(maps.conformality_residual(128).unwrap() <= 0.02);
        let w = maps.welding().unwrap();
        assert!(w.min_increment() > 0.0);
        assert!(w.distance_from_rotation(1024) >= 1e-3);
        // one-sided images agree with the limits of the chain from each side
        for k in (5..512).step_by(50) {
            let (prev, next) = (pts[k - 1], pts[k + 1]);
            let normal = C64::new(0.0, 1.0) * (next - prev) / (next - prev).norm();
            let inside = maps.interior_inverse(pts[k] + 1e-6 * normal);
            let outside = maps.exterior_inverse(pts[k] - 1e-6 * normal);
            let (a, b) = (maps.interior_angles()[k], maps.exterior_angles()[k]);
            assert!((inside - C64::from_polar(1.0, a)).norm() < 1e-3, "{k}");
            assert!((outside - C64::from_polar(1.0, b)).norm() < 1e-3, "{k}");
        }
    }

    #[test]
    fn exterior_inverse_fixes_infinity() {
        let pts = ellipse(1.0, 1.2, 256);
        let maps = ConformalMaps::new(&pts).unwrap();
        let far = maps.exterior_inverse(C64::new(1e7, 3e6));
        assert!(far.norm() > 1e5);
        let near = maps.exterior_inverse(C64::new(1.5, 0.5));
        assert!(near.norm() > 1.0);
        let inside = maps.interior_inverse(C64::new(0.2, 0.1));
        assert!(inside.norm() < 1.0);
    }

    #[test]
    fn centring_balances_boundary_correspondence() {
        let pts = ellipse(1.0, 1.6, 400);
        let maps = ConformalMaps::new(&pts).unwrap();
        let n = pts.len();
        let mut m = C64::new(0.0, 0.0);
        let mut total = 0.0;
        for (k, &a) in maps.interior_angles().iter().enumerate() {
            let w = 0.5 * ((pts[k] - pts[(k + n - 1) % n]).norm() + (pts[(k + 1) % n] - pts[k]).norm());
            m += w * C64::from_polar(1.0, a);
            total += w;
        }
        assert!(m.norm() / total < 1e-8);
    }
}
