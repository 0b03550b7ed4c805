//! Plane geometry on closed polylines: orientation, containment, scanline
//! filling, simplicity checks, resampling, Hausdorff distance and similarity
//! alignment. Points are complex numbers `x + iy`.

use crate::error::{Error, Result};
use crate::par;
use crate::C64;

/// Signed area of a closed polygon (positive when counterclockwise).
pub fn signed_area(poly: &[C64]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        s += a.re * b.im - b.re * a.im;
    }
    0.5 * s
}

/// Area centroid of a closed polygon; falls back to the vertex mean for
/// degenerate polygons.
pub fn centroid(poly: &[C64]) -> C64 {
    let n = poly.len();
    let a = signed_area(poly);
    if a.abs() < 1e-300 {
        return poly.iter().sum::<C64>() / n as f64;
    }
    let mut c = C64::new(0.0, 0.0);
    for k in 0..n {
        let (p, q) = (poly[k], poly[(k + 1) % n]);
        let cross = p.re * q.im - q.re * p.im;
        c += (p + q) * cross;
    }
    c / (6.0 * a)
}

pub fn perimeter(poly: &[C64]) -> f64 {
    let n = poly.len();
    (0..n).map(|k| (poly[(k + 1) % n] - poly[k]).norm()).sum()
}

/// Largest distance between two vertices.
pub fn diameter(poly: &[C64]) -> f64 {
    par::max_range(poly.len(), |i| {
        poly.iter().map(|q| (poly[i] - q).norm()).fold(0.0, f64::max)
    })
}

/// `n` points on the circle of the given centre and radius, counterclockwise
/// starting at angle 0.
pub fn circle(center: C64, radius: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| center + C64::from_polar(radius, std::f64::consts::TAU * k as f64 / n as f64))
        .collect()
}

/// Even-odd containment test.
pub fn contains(poly: &[C64], p: C64) -> bool {
    let n = poly.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (poly[i], poly[j]);
        if (a.im > p.im) != (b.im > p.im) {
            let x = a.re + (p.im - a.im) / (b.im - a.im) * (b.re - a.re);
            if p.re < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Even-odd scanline fill of a polygon given in pixel coordinates
/// (`x` = column, `y` = row). A pixel is set when its centre is inside.
pub fn fill_polygon(poly: &[C64], width: usize, height: usize) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    let n = poly.len();
    if n < 3 {
        return mask;
    }
    let rows: Vec<Vec<bool>> = par::map_range(height, |r| {
        let y = r as f64;
        let mut xs = Vec::new();
        for k in 0..n {
            let (a, b) = (poly[k], poly[(k + 1) % n]);
            if (a.im > y) != (b.im > y) {
                xs.push(a.re + (y - a.im) / (b.im - a.im) * (b.re - a.re));
            }
        }
        xs.sort_by(f64::total_cmp);
        let mut row = vec![false; width];
        for pair in xs.chunks_exact(2) {
            let lo = pair[0].ceil().max(0.0);
            let hi = pair[1].min(width as f64 - 1.0);
            if lo > hi {
                continue;
            }
            for c in lo as usize..=hi as usize {
                // strict on the right edge keeps the even-odd rule consistent
                if (c as f64) < pair[1] || c as f64 == pair[0] {
                    row[c] = true;
                }
            }
        }
        row
    });
    for (r, row) in rows.into_iter().enumerate() {
        mask[r * width..(r + 1) * width].copy_from_slice(&row);
    }
    mask
}

fn orient(a: C64, b: C64, c: C64) -> f64 {
    (b.re - a.re) * (c.im - a.im) - (b.im - a.im) * (c.re - a.re)
}

fn on_segment(a: C64, b: C64, p: C64) -> bool {
    p.re >= a.re.min(b.re) && p.re <= a.re.max(b.re) && p.im >= a.im.min(b.im) && p.im <= a.im.max(b.im)
}

/// Whether closed segments `ab` and `cd` share a point.
pub fn segments_intersect(a: C64, b: C64, c: C64, d: C64) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(c, d, a))
        || (d2 == 0.0 && on_segment(c, d, b))
        || (d3 == 0.0 && on_segment(a, b, c))
        || (d4 == 0.0 && on_segment(a, b, d))
}

/// First pair of intersecting non-adjacent edges of a closed polyline, if
/// any. Edge `k` joins point `k` to point `k + 1`.
pub fn self_intersection(poly: &[C64]) -> Option<(usize, usize)> {
    let n = poly.len();
    if n < 4 {
        return None;
    }
    // edges sorted by left x-extent for a sweep over overlapping boxes
    let mut order: Vec<usize> = (0..n).collect();
    let xmin = |k: usize| poly[k].re.min(poly[(k + 1) % n].re);
    let xmax = |k: usize| poly[k].re.max(poly[(k + 1) % n].re);
    order.sort_by(|&a, &b| xmin(a).total_cmp(&xmin(b)).then(a.cmp(&b)));
    let hits = par::map_range(n, |oi| {
        let e = order[oi];
        let (a, b) = (poly[e], poly[(e + 1) % n]);
        let (ylo, yhi) = (a.im.min(b.im), a.im.max(b.im));
        for &f in &order[oi + 1..] {
            if xmin(f) > xmax(e) {
                break;
            }
            if f == (e + 1) % n || e == (f + 1) % n {
                continue;
            }
            let (c, d) = (poly[f], poly[(f + 1) % n]);
            if c.im.max(d.im) < ylo || c.im.min(d.im) > yhi {
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return Some((e.min(f), e.max(f)));
            }
        }
        None
    });
    hits.into_iter().flatten().min()
}

/// Validates a closed polyline as a simple contour with at least `min`
/// distinct points.
pub fn check_simple(poly: &[C64], min: usize) -> Result<()> {
    if poly.len() < min {
        return Err(Error::ContourTooShort {
            got: poly.len(),
            min,
        });
    }
    if let Some((i, j)) = self_intersection(poly) {
        return Err(Error::ContourNotSimple(format!(
            "edges {i} and {j} intersect"
        )));
    }
    Ok(())
}

/// Resamples a closed polyline at `n` points equally spaced in arclength,
/// starting at the first vertex.
pub fn resample_closed(poly: &[C64], n: usize) -> Vec<C64> {
    let m = poly.len();
    let mut cum = Vec::with_capacity(m + 1);
    cum.push(0.0);
    for k in 0..m {
        let l = (poly[(k + 1) % m] - poly[k]).norm();
        cum.push(cum[k] + l);
    }
    let total = cum[m];
    let mut out = Vec::with_capacity(n);
    let mut seg = 0;
    for j in 0..n {
        let s = total * j as f64 / n as f64;
        while seg + 1 < m && cum[seg + 1] <= s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push(poly[seg] + (poly[(seg + 1) % m] - poly[seg]) * t);
    }
    out
}

/// Directed Hausdorff distance `max_a min_b |a - b|`.
pub fn directed_hausdorff(a: &[C64], b: &[C64]) -> f64 {
    par::max_range(a.len(), |i| {
        b.iter()
            .map(|q| (a[i] - q).norm_sqr())
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    })
}

/// Symmetric Hausdorff distance between two nonempty point sets.
pub fn hausdorff(a: &[C64], b: &[C64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("hausdorff of an empty point set".into()));
    }
    Ok(directed_hausdorff(a, b).max(directed_hausdorff(b, a)))
}

/// Similarity transform `z ↦ s z + t` with complex `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Similarity {
    pub s: C64,
    pub t: C64,
}

impl Similarity {
    pub fn apply(&self, z: C64) -> C64 {
        self.s * z + self.t
    }
}

/// Least-squares similarity mapping `src[k]` onto `dst[k]`.
pub fn fit_similarity(src: &[C64], dst: &[C64]) -> Similarity {
    let n = src.len() as f64;
    let ms = src.iter().sum::<C64>() / n;
    let md = dst.iter().sum::<C64>() / n;
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (p, q) in src.iter().zip(dst) {
        let a = p - ms;
        num += a.conj() * (q - md);
        den += a.norm_sqr();
    }
    let s = if den > 0.0 { num / den } else { C64::new(1.0, 0.0) };
    Similarity { s, t: md - s * ms }
}

/// Aligns closed curve `src` to `dst` by a similarity transform (iterative
/// closest points from a centroid/scale start and a scan over rotations) and
/// returns the symmetric Hausdorff distance after alignment together with the
/// transform.
pub fn aligned_hausdorff(src: &[C64], dst: &[C64]) -> Result<(f64, Similarity)> {
    if src.len() < 3 || dst.len() < 3 {
        return Err(Error::Empty("alignment needs at least three points".into()));
    }
    let (cs, cd) = (centroid(src), centroid(dst));
    let scale = (signed_area(dst).abs() / signed_area(src).abs().max(1e-300)).sqrt();
    let scale = if scale.is_finite() && scale > 0.0 { scale } else { 1.0 };
    let mut best: Option<(f64, Similarity)> = None;
    for k in 0..24 {
        let rot = C64::from_polar(scale, std::f64::consts::TAU * k as f64 / 24.0);
        let mut sim = Similarity {
            s: rot,
            t: cd - rot * cs,
        };
        for _ in 0..30 {
            let moved: Vec<C64> = src.iter().map(|&z| sim.apply(z)).collect();
            let matched = par::map_slice(&moved, |&p| nearest_on_polyline(dst, p));
            let next = fit_similarity(src, &matched);
            let change = (next.s - sim.s).norm() + (next.t - sim.t).norm();
            sim = next;
            if change < 1e-10 {
                break;
            }
        }
        let moved: Vec<C64> = src.iter().map(|&z| sim.apply(z)).collect();
        let d = hausdorff(&moved, dst)?;
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, sim));
        }
    }
    // equal sampling: also try point-to-point fits over cyclic shifts
    if src.len() == dst.len() {
        let n = src.len();
        let step = n.div_ceil(64);
        let shifted = |shift: usize| -> Vec<C64> { (0..n).map(|k| dst[(k + shift) % n]).collect() };
        let fit_err = |shift: usize| {
            let sim = fit_similarity(src, &shifted(shift));
            src.iter()
                .enumerate()
                .map(|(k, &z)| (sim.apply(z) - dst[(k + shift) % n]).norm_sqr())
                .sum::<f64>()
        };
        let coarse = (0..n)
            .step_by(step)
            .min_by(|&a, &b| fit_err(a).total_cmp(&fit_err(b)))
            .unwrap_or(0);
        let shift = (coarse + n - step..=coarse + n + step)
            .map(|s| s % n)
            .min_by(|&a, &b| fit_err(a).total_cmp(&fit_err(b)))
            .unwrap_or(coarse);
        let sim = fit_similarity(src, &shifted(shift));
        let moved: Vec<C64> = src.iter().map(|&z| sim.apply(z)).collect();
        let d = hausdorff(&moved, dst)?;
        if best.as_ref().is_none_or(|(bd, _)| d < *bd) {
            best = Some((d, sim));
        }
    }
    Ok(best.unwrap())
}

/// Closest point to `p` on the closed polyline.
pub fn nearest_on_polyline(poly: &[C64], p: C64) -> C64 {
    let n = poly.len();
    let mut best = poly[0];
    let mut bd = f64::INFINITY;
    for k in 0..n {
        let (a, b) = (poly[k], poly[(k + 1) % n]);
        let ab = b - a;
        let l2 = ab.norm_sqr();
        let t = if l2 > 0.0 {
            ((p - a).re * ab.re + (p - a).im * ab.im) / l2
        } else {
            0.0
        };
        let q = a + ab * t.clamp(0.0, 1.0);
        let d = (p - q).norm_sqr();
        if d < bd {
            bd = d;
            best = q;
        }
    }
    best
}
