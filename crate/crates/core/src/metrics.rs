//! Binary masks and the overlap and boundary-distance measures used to score
//! segmentations.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry;
use crate::C64;

/// Binary image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} mask values for {width}x{height}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let data = (0..width * height).map(|k| f(k % width, k / width)).collect();
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn get(&self, col: usize, row: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, col: usize, row: usize, v: bool) {
        self.data[row * self.width + col] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    fn check(&self, other: &Mask) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch(format!(
                "masks {}x{} and {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    fn overlap(&self, other: &Mask) -> Result<(usize, usize)> {
        self.check(other)?;
        let mut inter = 0;
        let mut union = 0;
        for (&a, &b) in self.data.iter().zip(&other.data) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        Ok((inter, union))
    }

    /// Number of 4-connected components.
    pub fn components(&self) -> usize {
        let mut seen = vec![false; self.data.len()];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.data.len() {
            if !self.data[start] || seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (c, r) = (k % self.width, k / self.width);
                let mut visit = |n: usize| {
                    if self.data[n] && !seen[n] {
                        seen[n] = true;
                        stack.push(n);
                    }
                };
                if c > 0 {
                    visit(k - 1);
                }
                if c + 1 < self.width {
                    visit(k + 1);
                }
                if r > 0 {
                    visit(k - self.width);
                }
                if r + 1 < self.height {
                    visit(k + self.width);
                }
            }
        }
        count
    }

    /// Writes a 0/255 grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let buf: Vec<u8> = self.data.iter().map(|&b| if b { 255 } else { 0 }).collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer matches dimensions")
            .save(path)
            .map_err(|source| Error::Image {
                path: path.into(),
                source,
            })
    }

    /// Reads a mask image; pixels at or above half intensity are set.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let img = crate::imaging::load_image(path)?;
        Ok(Self {
            width: img.width(),
            height: img.height(),
            data: img.values().iter().map(|&v| v >= 0.5).collect(),
        })
    }
}

/// `2|a ∩ b| / (|a| + |b|)`; 1 when both are empty.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, _) = a.overlap(b)?;
    let total = a.count() + b.count();
    Ok(if total == 0 {
        1.0
    } else {
        2.0 * inter as f64 / total as f64
    })
}

/// `|a ∩ b| / |a ∪ b|`; 1 when both are empty.
pub fn jaccard(a: &Mask, b: &Mask) -> Result<f64> {
    let (inter, union) = a.overlap(b)?;
    Ok(if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    })
}

/// Pixels of the mask with a 4-neighbour outside the mask or on the image
/// border, as `(col, row)` points.
pub fn boundary_of(mask: &Mask) -> Result<Vec<C64>> {
    if mask.count() == 0 {
        return Err(Error::Empty("boundary of an empty mask".into()));
    }
    let (w, h) = (mask.width, mask.height);
    let mut out = Vec::new();
    for r in 0..h {
        for c in 0..w {
            if !mask.get(c, r) {
                continue;
            }
            let edge = c == 0
                || r == 0
                || c + 1 == w
                || r + 1 == h
                || !mask.get(c - 1, r)
                || !mask.get(c + 1, r)
                || !mask.get(c, r - 1)
                || !mask.get(c, r + 1);
            if edge {
                out.push(C64::new(c as f64, r as f64));
            }
        }
    }
    Ok(out)
}

/// Symmetric Hausdorff distance between point sets.
pub fn hausdorff(a: &[C64], b: &[C64]) -> Result<f64> {
    geometry::hausdorff(a, b)
}

/// Hausdorff distance between mask boundaries, in pixels.
pub fn mask_hausdorff(a: &Mask, b: &Mask) -> Result<f64> {
    a.check(b)?;
    hausdorff(&boundary_of(a)?, &boundary_of(b)?)
}

/// `name,value` rows comparing a prediction with a reference mask.
pub fn report(pred: &Mask, truth: &Mask) -> Result<Vec<(String, f64)>> {
    let mut rows = vec![
        ("dice".to_string(), dice(pred, truth)?),
        ("jaccard".to_string(), jaccard(pred, truth)?),
    ];
    let hd = if pred.count() == 0 && truth.count() == 0 {
        0.0
    } else if pred.count() == 0 || truth.count() == 0 {
        f64::INFINITY
    } else {
        mask_hausdorff(pred, truth)?
    };
    rows.push(("hausdorff".to_string(), hd));
    rows.push(("pred_pixels".to_string(), pred.count() as f64));
    rows.push(("truth_pixels".to_string(), truth.count() as f64));
    Ok(rows)
}

pub fn format_rows(rows: &[(String, f64)]) -> String {
    let mut s = String::new();
    for (name, value) in rows {
        let _ = writeln!(s, "{name},{value}");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(w: usize, c0: usize, r0: usize, side: usize) -> Mask {
        Mask::from_fn(w, w, |c, r| c >= c0 && c < c0 + side && r >= r0 && r < r0 + side)
    }

    #[test]
    fn dice_and_jaccard_examples() {
        let a = square(20, 2, 2, 6);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0);
        let b = square(20, 12, 12, 6);
        assert_eq!(dice(&a, &b).unwrap(), 0.0);
        assert_eq!(jaccard(&a, &b).unwrap(), 0.0);
        let c = square(20, 5, 2, 6);
        assert!((dice(&a, &c).unwrap() - 0.5).abs() < 1e-15);
        let e = Mask::empty(20, 20);
        assert_eq!(dice(&e, &e).unwrap(), 1.0);
        assert!(dice(&a, &Mask::empty(3, 3)).is_err());
    }

    #[test]
    fn boundary_examples() {
        let mut one = Mask::empty(5, 5);
        one.set(2, 3, true);
        assert_eq!(boundary_of(&one).unwrap(), vec![C64::new(2.0, 3.0)]);
        let sq = square(10, 2, 2, 4);
        let b = boundary_of(&sq).unwrap();
        assert_eq!(b.len(), 12);
        assert!(boundary_of(&Mask::empty(4, 4)).is_err());
    }

    #[test]
    fn concentric_circles_hausdorff() {
        let disk = |r: f64| Mask::from_fn(101, 101, move |c, w| {
            let (x, y) = (c as f64 - 50.0, w as f64 - 50.0);
            x * x + y * y <= r * r
        });
        let d = mask_hausdorff(&disk(20.0), &disk(35.0)).unwrap();
        assert!((d - 15.0).abs() <= 1.0, "{d}");
    }

    #[test]
    fn components_and_report() {
        let mut m = square(20, 1, 1, 3);
        for r in 10..14 {
            m.set(15, r, true);
        }
        assert_eq!(m.components(), 2);
        let rows = report(&m, &m).unwrap();
        assert_eq!(rows[0], ("dice".into(), 1.0));
        assert_eq!(rows[2], ("hausdorff".into(), 0.0));
        assert!(format_rows(&rows).starts_with("dice,1\n"));
    }
}
