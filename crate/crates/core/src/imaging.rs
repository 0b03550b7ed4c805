//! Grayscale images: loading, sampling, gradients, smoothing, noise,
//! synthetic test scenes and overlay rendering.

use std::f64::consts::{PI, TAU};
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::geometry;
use crate::hbs::Contour;
use crate::mesh::{GridFrame, MIN_SIDE};
use crate::metrics::Mask;
use crate::C64;

/// Luminance weights for RGB input.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major intensities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::DimensionsTooSmall {
                width,
                height,
                min: MIN_SIDE,
            });
        }
        if values.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{} values for {width}x{height}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Image from `f(col, row)`, clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let values = (0..width * height)
            .map(|k| f(k % width, k / width).clamp(0.0, 1.0))
            .collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[row * self.width + col]
    }

    /// Bilinear value at fractional pixel coordinates, clamped to the frame.
    pub fn sample_pixel(&self, col: f64, row: f64) -> f64 {
        let x = col.clamp(0.0, (self.width - 1) as f64);
        let y = row.clamp(0.0, (self.height - 1) as f64);
        let c0 = (x.floor() as usize).min(self.width - 2);
        let r0 = (y.floor() as usize).min(self.height - 2);
        let (tx, ty) = (x - c0 as f64, y - r0 as f64);
        let v00 = self.get(c0, r0);
        let v10 = self.get(c0 + 1, r0);
        let v01 = self.get(c0, r0 + 1);
        let v11 = self.get(c0 + 1, r0 + 1);
        (1.0 - ty) * ((1.0 - tx) * v00 + tx * v10) + ty * ((1.0 - tx) * v01 + tx * v11)
    }

    fn to_luma8(&self) -> image::GrayImage {
        let buf = self
            .values
            .iter()
            .map(|v| (v * 255.0).round() as u8)
            .collect();
        image::GrayImage::from_raw(self.width as u32, self.height as u32, buf)
            .expect("buffer matches dimensions")
    }

    /// Writes an 8-bit grayscale PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.to_luma8().save(path).map_err(|source| Error::Image {
            path: path.into(),
            source,
        })
    }
}

/// Reads a PNG or PGM file; colour input is reduced by [`LUMA`].
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let img = image::ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?
        .decode()
        .map_err(|source| Error::Image {
            path: path.into(),
            source,
        })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let values = if img.color().has_color() {
        img.into_rgb16()
            .pixels()
            .map(|p| {
                (LUMA[0] * p[0] as f64 + LUMA[1] * p[1] as f64 + LUMA[2] * p[2] as f64) / 65535.0
            })
            .map(|v| v.clamp(0.0, 1.0))
            .collect()
    } else {
        img.into_luma16()
            .pixels()
            .map(|p| p[0] as f64 / 65535.0)
            .collect()
    };
    GrayImage::new(w, h, values)
}

/// Bilinear samples at domain points.
pub fn sample_bilinear(img: &GrayImage, frame: &GridFrame, points: &[C64]) -> Vec<f64> {
    points
        .iter()
        .map(|&z| {
            let (c, r) = frame.to_pixel(z);
            img.sample_pixel(c, r)
        })
        .collect()
}

/// Per-pixel gradient `∂x + i ∂y` in domain units: central differences
/// inside, one-sided at the edges.
pub fn gradient(img: &GrayImage, frame: &GridFrame) -> Vec<C64> {
    let (w, h) = (img.width, img.height);
    let s = frame.px_per_unit;
    let diff = |lo: usize, hi: usize, a: f64, b: f64| (b - a) / (hi - lo) as f64;
    (0..w * h)
        .map(|k| {
            let (c, r) = (k % w, k / w);
            let (cl, ch) = (c.saturating_sub(1), (c + 1).min(w - 1));
            let (rl, rh) = (r.saturating_sub(1), (r + 1).min(h - 1));
            let dx = diff(cl, ch, img.get(cl, r), img.get(ch, r));
            let drow = diff(rl, rh, img.get(c, rl), img.get(c, rh));
            // rows grow downwards, domain y upwards
            C64::new(dx * s, -drow * s)
        })
        .collect()
}

/// Separable Gaussian blur with edge clamping; `sigma <= 0` copies.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return img.clone();
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|d| (-(d * d) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let (w, h) = (img.width as isize, img.height as isize);
    let pass = |src: &[f64], horizontal: bool| -> Vec<f64> {
        (0..w * h)
            .map(|k| {
                let (c, r) = (k % w, k / w);
                kernel
                    .iter()
                    .zip(-radius..=radius)
                    .map(|(wt, d)| {
                        let idx = if horizontal {
                            r * w + (c + d).clamp(0, w - 1)
                        } else {
                            (r + d).clamp(0, h - 1) * w + c
                        };
                        wt * src[idx as usize]
                    })
                    .sum::<f64>()
                    .clamp(0.0, 1.0)
            })
            .collect()
    };
    let tmp = pass(&img.values, true);
    GrayImage {
        width: img.width,
        height: img.height,
        values: pass(&tmp, false),
    }
}

/// Adds seeded Gaussian noise and clamps. Returns the noisy image with its
/// SNR in dB (`+∞` when nothing changed).
pub fn add_gaussian_noise(img: &GrayImage, mean: f64, var: f64, seed: u64) -> Result<(GrayImage, f64)> {
    if !(var >= 0.0) || !var.is_finite() || !mean.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "noise mean {mean}, variance {var}"
        )));
    }
    let mut out = img.clone();
    if var > 0.0 || mean != 0.0 {
        let normal = Normal::new(mean, var.sqrt()).expect("valid deviation");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for v in out.values.iter_mut() {
            *v = (*v + normal.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok((out.clone(), snr_db(img, &out)))
}

/// `10 log10(Σ s² / Σ (n − s)²)`.
pub fn snr_db(signal: &GrayImage, noisy: &GrayImage) -> f64 {
    let power: f64 = signal.values.iter().map(|v| v * v).sum();
    let noise: f64 = signal
        .values
        .iter()
        .zip(&noisy.values)
        .map(|(s, n)| (n - s) * (n - s))
        .sum();
    if noise == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (power / noise).log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SynthKind {
    RectNotch,
    RectBumps,
    SplitTriangle,
    OccludedCircle,
    Ellipse,
    OverlapCircleStar,
    ThreeCircles,
}

impl SynthKind {
    pub const NAMES: &'static [&'static str] = &[
        "rect_notch",
        "rect_bumps",
        "split_triangle",
        "occluded_circle",
        "ellipse",
        "overlap_circle_star",
        "three_circles",
    ];

    pub const ALL: [SynthKind; 7] = [
        SynthKind::RectNotch,
        SynthKind::RectBumps,
        SynthKind::SplitTriangle,
        SynthKind::OccludedCircle,
        SynthKind::Ellipse,
        SynthKind::OverlapCircleStar,
        SynthKind::ThreeCircles,
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES[self as usize]
    }
}

impl FromStr for SynthKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::NAMES
            .iter()
            .position(|n| *n == s)
            .map(|i| Self::ALL[i])
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

impl std::fmt::Display for SynthKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A synthetic scene.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub image: GrayImage,
    /// Raster of the intact target shape.
    pub truth: Mask,
    /// Target outline with the `y` axis pointing up (`x = col`, `y = -row`),
    /// the orientation used by the segmentation domain.
    pub prior: Contour,
    /// Circle `(col, row, radius)` around the target, in pixels.
    pub init: (f64, f64, f64),
}

/// Region test in pixel coordinates.
type Region = Box<dyn Fn(f64, f64) -> bool>;

fn disk(cx: f64, cy: f64, r: f64) -> Region {
    Box::new(move |x, y| (x - cx).powi(2) + (y - cy).powi(2) <= r * r)
}

fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
    Box::new(move |x, y| x >= x0 && x <= x1 && y >= y0 && y <= y1)
}

fn polygon(pts: Vec<C64>) -> Region {
    Box::new(move |x, y| geometry::contains(&pts, C64::new(x, y)))
}

/// Polygon outline with edges subdivided to roughly `step` pixels.
fn densify(corners: &[C64], step: f64) -> Vec<C64> {
    let n = corners.len();
    let mut out = Vec::new();
    for i in 0..n {
        let (a, b) = (corners[i], corners[(i + 1) % n]);
        let k = ((b - a).norm() / step).ceil().max(1.0) as usize;
        out.extend((0..k).map(|j| a + (b - a) * (j as f64 / k as f64)));
    }
    out
}

fn ellipse_points(cx: f64, cy: f64, a: f64, b: f64, n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| {
            let t = TAU * k as f64 / n as f64;
            C64::new(cx + a * t.cos(), cy + b * t.sin())
        })
        .collect()
}

/// Averages 4x4 subsamples of `shade(x, y)` per pixel.
fn render(size: usize, shade: impl Fn(f64, f64) -> f64) -> Result<GrayImage> {
    const SS: usize = 4;
    GrayImage::from_fn(size, size, |c, r| {
        let mut acc = 0.0;
        for i in 0..SS {
            for j in 0..SS {
                let x = c as f64 + (i as f64 + 0.5) / SS as f64 - 0.5;
                let y = r as f64 + (j as f64 + 0.5) / SS as f64 - 0.5;
                acc += shade(x, y);
            }
        }
        acc / (SS * SS) as f64
    })
}

/// Builds the scene `kind` on a `size × size` canvas (shapes scale with size).
pub fn synth_image(kind: SynthKind, size: usize) -> Result<Synthetic> {
    if size < 32 {
        return Err(Error::DimensionsTooSmall {
            width: size,
            height: size,
            min: 32,
        });
    }
    let k = size as f64 / 256.0;
    let p = |x: f64, y: f64| C64::new(x * k, y * k);
    let step = 1.0_f64.max(k);

    // (shade, truth region, outline in pixels, init circle)
    let (shade, truth, outline, init): (Box<dyn Fn(f64, f64) -> f64>, Region, Vec<C64>, _) =
        match kind {
            SynthKind::RectNotch | SynthKind::RectBumps => {
                let corners = [p(58.0, 83.0), p(198.0, 83.0), p(198.0, 173.0), p(58.0, 173.0)];
                let body = rect(58.0 * k, 83.0 * k, 198.0 * k, 173.0 * k);
                let shade: Box<dyn Fn(f64, f64) -> f64> = if kind == SynthKind::RectNotch {
                    let notch = rect(116.0 * k, 80.0 * k, 138.0 * k, 158.0 * k);
                    Box::new(move |x, y| (body(x, y) && !notch(x, y)) as u8 as f64)
                } else {
                    let b1 = disk(100.0 * k, 83.0 * k, 16.0 * k);
                    let b2 = disk(160.0 * k, 173.0 * k, 16.0 * k);
                    Box::new(move |x, y| (body(x, y) || b1(x, y) || b2(x, y)) as u8 as f64)
                };
                let r0 = if kind == SynthKind::RectNotch { 77.0 } else { 62.0 };
                (
                    shade,
                    rect(58.0 * k, 83.0 * k, 198.0 * k, 173.0 * k),
                    densify(&corners, step),
                    (128.0 * k, 128.0 * k, r0 * k),
                )
            }
            SynthKind::SplitTriangle => {
                let corners = vec![p(48.0, 128.0), p(192.0, 208.0), p(192.0, 48.0)];
                let tri = polygon(corners.clone());
                let gap = rect(116.0 * k, 0.0, 138.0 * k, size as f64);
                (
                    Box::new(move |x, y| (tri(x, y) && !gap(x, y)) as u8 as f64),
                    polygon(corners.clone()),
                    densify(&corners, step),
                    (140.0 * k, 128.0 * k, 72.0 * k),
                )
            }
            SynthKind::OccludedCircle => {
                let body = disk(128.0 * k, 128.0 * k, 70.0 * k);
                let occluder = rect(150.0 * k, 100.0 * k, size as f64, 156.0 * k);
                (
                    Box::new(move |x, y| (body(x, y) && !occluder(x, y)) as u8 as f64),
                    disk(128.0 * k, 128.0 * k, 70.0 * k),
                    geometry::circle(p(128.0, 128.0), 70.0 * k, 512),
                    (128.0 * k, 128.0 * k, 70.0 * k),
                )
            }
            SynthKind::Ellipse => {
                let pts = ellipse_points(128.0 * k, 128.0 * k, 80.0 * k, 50.0 * k, 512);
                let (a, b) = (80.0 * k, 50.0 * k);
                let inside = move |x: f64, y: f64| {
                    ((x - 128.0 * k) / a).powi(2) + ((y - 128.0 * k) / b).powi(2) <= 1.0
                };
                (
                    Box::new(move |x, y| inside(x, y) as u8 as f64),
                    Box::new(inside),
                    pts,
                    (128.0 * k, 128.0 * k, 64.0 * k),
                )
            }
            SynthKind::OverlapCircleStar => {
                let circle = disk(105.0 * k, 128.0 * k, 60.0 * k);
                let star_pts: Vec<C64> = (0..10)
                    .map(|j| {
                        let r = if j % 2 == 0 { 55.0 } else { 24.0 };
                        let t = PI * j as f64 / 5.0 - PI / 2.0;
                        p(175.0 + r * t.cos(), 128.0 + r * t.sin())
                    })
                    .collect();
                let star = polygon(star_pts);
                (
                    Box::new(move |x, y| (circle(x, y) || star(x, y)) as u8 as f64),
                    disk(105.0 * k, 128.0 * k, 60.0 * k),
                    geometry::circle(p(105.0, 128.0), 60.0 * k, 512),
                    (105.0 * k, 128.0 * k, 60.0 * k),
                )
            }
            SynthKind::ThreeCircles => {
                let big = disk(100.0 * k, 160.0 * k, 60.0 * k);
                let gray = disk(155.0 * k, 105.0 * k, 42.0 * k);
                let small = disk(205.0 * k, 55.0 * k, 24.0 * k);
                (
                    Box::new(move |x, y| {
                        if big(x, y) || small(x, y) {
                            1.0
                        } else if gray(x, y) {
                            0.5
                        } else {
                            0.0
                        }
                    }),
                    disk(100.0 * k, 160.0 * k, 60.0 * k),
                    geometry::circle(p(100.0, 160.0), 60.0 * k, 512),
                    (100.0 * k, 160.0 * k, 60.0 * k),
                )
            }
        };

    let image = render(size, shade)?;
    let truth = Mask::from_fn(size, size, |c, r| truth(c as f64, r as f64));
    let prior = Contour::new(outline.iter().map(|z| C64::new(z.re, -z.im)).collect())?;
    Ok(Synthetic {
        image,
        truth,
        prior,
        init,
    })
}

/// Writes the image as RGB with the closed `contour` (pixel coordinates)
/// drawn in green.
pub fn render_overlay(img: &GrayImage, contour: &[C64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut rgb = image::DynamicImage::ImageLuma8(img.to_luma8()).into_rgb8();
    let (w, h) = (img.width as i64, img.height as i64);
    let mut plot = |x: f64, y: f64| {
        let (c, r) = (x.round() as i64, y.round() as i64);
        if (0..w).contains(&c) && (0..h).contains(&r) {
            rgb.put_pixel(c as u32, r as u32, image::Rgb([0, 255, 0]));
        }
    };
    let n = contour.len();
    for i in 0..n {
        let (a, b) = (contour[i], contour[(i + 1) % n]);
        let steps = ((b - a).norm() * 2.0).ceil().max(1.0) as usize;
        for s in 0..=steps {
            let z = a + (b - a) * (s as f64 / steps as f64);
            plot(z.re, z.im);
        }
    }
    rgb.save(path).map_err(|source| Error::Image {
        path: path.into(),
        source,
    })
}
