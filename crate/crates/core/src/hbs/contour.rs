use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry;
use crate::C64;

/// Simple closed polyline, counterclockwise, with the closing edge implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Contour {
    points: Vec<C64>,
}

impl Contour {
    pub const MIN_POINTS: usize = 16;

    /// Validates a closed polyline. A repeated closing point and consecutive
    /// duplicates are dropped; clockwise input is reversed.
    pub fn new(points: Vec<C64>) -> Result<Self> {
        let mut pts: Vec<C64> = Vec::with_capacity(points.len());
        for p in points {
            if !(p.re.is_finite() && p.im.is_finite()) {
                return Err(Error::InvalidArgument("non-finite contour point".into()));
            }
            if pts.last() != Some(&p) {
                pts.push(p);
            }
        }
        while pts.len() > 1 && pts.first() == pts.last() {
            pts.pop();
        }
        geometry::check_simple(&pts, Self::MIN_POINTS)?;
        if geometry::signed_area(&pts) < 0.0 {
            pts.reverse();
        }
        Ok(Self { points: pts })
    }

    pub fn points(&self) -> &[C64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Image under `z ↦ s z + t`.
    pub fn transformed(&self, s: C64, t: C64) -> Result<Self> {
        Self::new(self.points.iter().map(|&z| s * z + t).collect())
    }

    /// Same curve with the starting vertex moved forward by `k`.
    pub fn rotated_start(&self, k: usize) -> Self {
        let n = self.points.len();
        Self {
            points: (0..n).map(|j| self.points[(j + k) % n]).collect(),
        }
    }

    pub fn diameter(&self) -> f64 {
        geometry::diameter(&self.points)
    }

    /// Parses `x y` lines; blank lines and `#` comments are skipped.
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut pts = Vec::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => pts.push(C64::new(x, y)),
                _ => {
                    return Err(Error::parse(
                        path,
                        format!("line {}: expected two numbers", no + 1),
                    ))
                }
            }
        }
        Self::new(pts)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        write_points(&self.points)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// `x y` lines for a closed polyline.
pub fn write_points(points: &[C64]) -> String {
    let mut s = String::with_capacity(points.len() * 32);
    for p in points {
        let _ = writeln!(s, "{} {}", super::fmt_sig(p.re), super::fmt_sig(p.im));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(n: usize) -> Vec<C64> {
        geometry::circle(C64::new(0.0, 0.0), 1.0, n)
    }

    #[test]
    fn orientation_is_normalized() {
        let mut pts = circle(32);
        pts.reverse();
        let c = Contour::new(pts).unwrap();
        assert!(geometry::signed_area(c.points()) > 0.0);
    }

    #[test]
    fn closing_duplicate_is_dropped() {
        let mut pts = circle(20);
        pts.push(pts[0]);
        assert_eq!(Contour::new(pts).unwrap().len(), 20);
    }

    #[test]
    fn rejects_short_and_self_intersecting() {
        assert!(matches!(
            Contour::new(circle(8)),
            Err(Error::ContourTooShort { .. })
        ));
        let lemniscate: Vec<C64> = (0..64)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / 64.0;
                C64::new(t.sin(), t.sin() * t.cos())
            })
            .collect();
        let err = Contour::new(lemniscate).unwrap_err();
        assert!(err.to_string().contains("contour not simple"));
    }

    #[test]
    fn text_round_trip() {
        let c = Contour::new(circle(24)).unwrap();
        let back = Contour::parse(&c.to_text(), Path::new("mem")).unwrap();
        for (a, b) in c.points().iter().zip(back.points()) {
            assert!((a - b).norm() < 1e-8);
        }
        assert!(Contour::parse("1 2\nx y\n", Path::new("mem")).is_err());
    }
}
