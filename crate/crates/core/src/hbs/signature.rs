use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::par;
use crate::C64;

/// Format version written in the signature file header.
pub const FORMAT_VERSION: u32 = 1;

/// Tolerance on the argument conditions of the normalisation, in radians.
pub const ARG_TOL: f64 = 1e-3;

/// Area integrals below this magnitude make their argument condition vacuous.
pub const VACUOUS: f64 = 1e-9;

/// Truncation used when a signature sample reaches magnitude 1.
pub const MEAN_EPS: f64 = 1e-3;

/// Complex signature sampled on the grid `x = -1 + ix·h`, `y = -1 + iy·h`,
/// `h = 2 / (grid - 1)`. Only samples with `|z| ≤ 1 - h/2` are defined;
/// the rest are stored as zero and never read.
#[derive(Debug, Clone, PartialEq)]
pub struct HbsSignature {
    grid: usize,
    values: Vec<C64>,
    pub source: String,
}

impl HbsSignature {
    pub fn zero(grid: usize) -> Result<Self> {
        if grid < 4 {
            return Err(Error::InvalidArgument(format!(
                "signature grid {grid} below the minimum of 4"
            )));
        }
        Ok(Self {
            grid,
            values: vec![C64::new(0.0, 0.0); grid * grid],
            source: "zero".into(),
        })
    }

    /// Signature with defined samples `f(z)`.
    pub fn from_fn(grid: usize, f: impl Fn(C64) -> C64 + Sync + Send) -> Result<Self> {
        let mut s = Self::zero(grid)?;
        let values = par::map_range(grid * grid, |k| {
            let (ix, iy) = (k % grid, k / grid);
            if s.is_defined(ix, iy) {
                f(s.point(ix, iy))
            } else {
                C64::new(0.0, 0.0)
            }
        });
        s.values = values;
        s.source = "function".into();
        Ok(s)
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    pub fn spacing(&self) -> f64 {
        2.0 / (self.grid as f64 - 1.0)
    }

    pub fn point(&self, ix: usize, iy: usize) -> C64 {
        let h = self.spacing();
        C64::new(-1.0 + ix as f64 * h, -1.0 + iy as f64 * h)
    }

    pub fn is_defined(&self, ix: usize, iy: usize) -> bool {
        ix < self.grid && iy < self.grid && self.point(ix, iy).norm() <= 1.0 - 0.5 * self.spacing()
    }

    pub fn get(&self, ix: usize, iy: usize) -> Option<C64> {
        self.is_defined(ix, iy).then(|| self.values[iy * self.grid + ix])
    }

    /// Raw storage, row `iy` after row `iy - 1`.
    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn set(&mut self, ix: usize, iy: usize, v: C64) {
        if self.is_defined(ix, iy) {
            self.values[iy * self.grid + ix] = v;
        }
    }

    /// Indices `(ix, iy)` of the defined samples in file order.
    pub fn defined(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.grid)
            .flat_map(move |iy| (0..self.grid).map(move |ix| (ix, iy)))
            .filter(move |&(ix, iy)| self.is_defined(ix, iy))
    }

    pub fn n_defined(&self) -> usize {
        self.defined().count()
    }

    pub fn max_abs(&self) -> f64 {
        self.defined()
            .map(|(ix, iy)| self.values[iy * self.grid + ix].norm())
            .fold(0.0, f64::max)
    }

    /// Root mean square of the pointwise difference over defined samples.
    pub fn l2_distance(&self, other: &HbsSignature) -> Result<f64> {
        self.check_grid(other)?;
        let mut s = 0.0;
        let mut n = 0usize;
        for (ix, iy) in self.defined() {
            let k = iy * self.grid + ix;
            s += (self.values[k] - other.values[k]).norm_sqr();
            n += 1;
        }
        Ok((s / n as f64).sqrt())
    }

    /// Largest pointwise difference over defined samples.
    pub fn sup_distance(&self, other: &HbsSignature) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .defined()
            .map(|(ix, iy)| {
                let k = iy * self.grid + ix;
                (self.values[k] - other.values[k]).norm()
            })
            .fold(0.0, f64::max))
    }

    fn check_grid(&self, other: &HbsSignature) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch(format!(
                "grid {} vs grid {}",
                self.grid, other.grid
            )));
        }
        Ok(())
    }

    /// Area integrals `(∫ B dA, ∫ B/z dA)` by the grid quadrature.
    pub fn integrals(&self) -> (C64, C64) {
        integrals(self.grid, &self.values)
    }

    /// Bilinear interpolation from the defined samples; undefined corners are
    /// skipped and the weights renormalised.
    pub fn sample(&self, z: C64) -> C64 {
        let h = self.spacing();
        let mut z = z;
        for _ in 0..4 {
            if let Some(v) = self.sample_defined(z, h) {
                return v;
            }
            // pull rim points inward until a defined corner is reached
            let r = z.norm();
            if r == 0.0 {
                break;
            }
            z *= (r - h).max(0.0) / r;
        }
        C64::new(0.0, 0.0)
    }

    fn sample_defined(&self, z: C64, h: f64) -> Option<C64> {
        let gx = ((z.re + 1.0) / h).clamp(0.0, (self.grid - 1) as f64);
        let gy = ((z.im + 1.0) / h).clamp(0.0, (self.grid - 1) as f64);
        let (ix, iy) = ((gx.floor() as usize).min(self.grid - 2), (gy.floor() as usize).min(self.grid - 2));
        let (tx, ty) = (gx - ix as f64, gy - iy as f64);
        let mut acc = C64::new(0.0, 0.0);
        let mut wsum = 0.0;
        for (dx, dy, w) in [
            (0, 0, (1.0 - tx) * (1.0 - ty)),
            (1, 0, tx * (1.0 - ty)),
            (0, 1, (1.0 - tx) * ty),
            (1, 1, tx * ty),
        ] {
            if let Some(v) = self.get(ix + dx, iy + dy) {
                acc += v * w;
                wsum += w;
            }
        }
        if wsum > 1e-12 {
            Some(acc / wsum)
        } else if (0..4).any(|k| self.get(ix + k % 2, iy + k / 2).is_some()) {
            // the point coincides with an undefined corner; use a defined one
            (0..4).find_map(|k| self.get(ix + k % 2, iy + k / 2))
        } else {
            None
        }
    }

    /// Text form: header `HBS 1 <grid>` then `ix iy re im` per defined sample.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.n_defined() * 40 + 16);
        let _ = writeln!(s, "HBS {FORMAT_VERSION} {}", self.grid);
        for (ix, iy) in self.defined() {
            let v = self.values[iy * self.grid + ix];
            let _ = writeln!(s, "{ix} {iy} {} {}", super::fmt_sig(v.re), super::fmt_sig(v.im));
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, "empty signature file"))?
            .1;
        let fields: Vec<&str> = header.split_whitespace().collect();
        let grid = match fields.as_slice() {
            ["HBS", v, g] if v.parse::<u32>() == Ok(FORMAT_VERSION) => g
                .parse::<usize>()
                .map_err(|_| Error::parse(path, "bad grid size in header"))?,
            _ => return Err(Error::parse(path, format!("bad header '{header}'"))),
        };
        let mut sig = Self::zero(grid).map_err(|e| Error::parse(path, e.to_string()))?;
        for (no, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            let bad = || Error::parse(path, format!("line {}: expected 'ix iy re im'", no + 1));
            if f.len() != 4 {
                return Err(bad());
            }
            let ix: usize = f[0].parse().map_err(|_| bad())?;
            let iy: usize = f[1].parse().map_err(|_| bad())?;
            let re: f64 = f[2].parse().map_err(|_| bad())?;
            let im: f64 = f[3].parse().map_err(|_| bad())?;
            if !sig.is_defined(ix, iy) {
                return Err(Error::parse(
                    path,
                    format!("line {}: sample ({ix}, {iy}) outside the disk", no + 1),
                ));
            }
            sig.values[iy * grid + ix] = C64::new(re, im);
        }
        sig.source = path.display().to_string();
        Ok(sig)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Grid quadrature of `∫ B dA` and `∫ B/z dA` over defined samples.
pub(crate) fn integrals(grid: usize, values: &[C64]) -> (C64, C64) {
    let h = 2.0 / (grid as f64 - 1.0);
    let lim = 1.0 - 0.5 * h;
    let mut i0 = C64::new(0.0, 0.0);
    let mut i1 = C64::new(0.0, 0.0);
    for iy in 0..grid {
        for ix in 0..grid {
            let z = C64::new(-1.0 + ix as f64 * h, -1.0 + iy as f64 * h);
            if z.norm() > lim {
                continue;
            }
            let b = values[iy * grid + ix];
            i0 += b;
            if z.norm() > 0.5 * h {
                i1 += b / z;
            }
        }
    }
    (i0 * h * h, i1 * h * h)
}

/// Rotation `θ` such that `B_θ(z) = e^{-2iθ} B(e^{iθ} z)` satisfies both
/// argument conditions, or `None` when they already hold within tolerance
/// (or are vacuous).
pub(crate) fn rotation_correction(i0: C64, i1: C64) -> Option<f64> {
    let theta = if i0.norm() > VACUOUS {
        let mut t = 0.5 * i0.arg();
        if i1.norm() > VACUOUS {
            let a = (i1 * C64::from_polar(1.0, -t)).arg();
            if a < -ARG_TOL {
                t += PI;
            }
        }
        t
    } else if i1.norm() > VACUOUS {
        i1.arg() - 0.5 * PI
    } else {
        return None;
    };
    let wrapped = (theta + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped.abs() < 0.25 * ARG_TOL {
        None
    } else {
        Some(wrapped)
    }
}

/// Whether a signature satisfies both argument conditions within `tol`.
pub fn is_normalized(b: &HbsSignature, tol: f64) -> bool {
    let (i0, i1) = b.integrals();
    let ok0 = i0.norm() <= VACUOUS || i0.arg().abs() <= tol;
    let ok1 = i1.norm() <= VACUOUS || {
        let a = i1.arg();
        a >= -tol && a < PI + tol
    };
    ok0 && ok1
}

/// Fixes the rotation freedom of a signature directly on the grid using
/// `B_θ(z) = e^{-2iθ} B(e^{iθ} z)` with bilinear resampling. Input that
/// already satisfies the argument conditions is returned unchanged.
pub fn normalize_hbs(b: &HbsSignature) -> HbsSignature {
    let mut cur = b.clone();
    for _ in 0..10 {
        if is_normalized(&cur, ARG_TOL) {
            break;
        }
        let (i0, i1) = cur.integrals();
        let Some(theta) = rotation_correction(i0, i1) else {
            break;
        };
        let src = cur.clone();
        let rot = C64::from_polar(1.0, theta);
        let phase = C64::from_polar(1.0, -2.0 * theta);
        let grid = src.grid;
        cur.values = par::map_range(grid * grid, |k| {
            let (ix, iy) = (k % grid, k / grid);
            if src.is_defined(ix, iy) {
                phase * src.sample(rot * src.point(ix, iy))
            } else {
                C64::new(0.0, 0.0)
            }
        });
    }
    cur
}

/// Pointwise mean of signatures on a common grid. Samples reaching magnitude
/// 1 are truncated to `1 - 1e-3`; the number of truncated samples is returned.
pub fn mean_hbs(signatures: &[HbsSignature]) -> Result<(HbsSignature, usize)> {
    let first = signatures
        .first()
        .ok_or_else(|| Error::Empty("mean of no signatures".into()))?;
    for s in &signatures[1..] {
        first.check_grid(s)?;
    }
    let n = signatures.len() as f64;
    let mut out = first.clone();
    let mut truncated = 0;
    for k in 0..out.values.len() {
        let m = signatures.iter().map(|s| s.values[k]).sum::<C64>() / n;
        out.values[k] = if m.norm() >= 1.0 {
            truncated += 1;
            m * ((1.0 - MEAN_EPS) / m.norm())
        } else {
            m
        };
    }
    out.source = if signatures.len() == 1 {
        first.source.clone()
    } else {
        format!("mean of {}", signatures.len())
    };
    Ok((out, truncated))
}
