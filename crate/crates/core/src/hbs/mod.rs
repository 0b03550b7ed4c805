//! Harmonic Beltrami signatures: contour → conformal welding → harmonic
//! extension → Beltrami coefficient, plus averaging, extension to the
//! computation domain and shape reconstruction.

mod contour;
mod signature;
pub mod welding;
pub mod zipper;

use std::hash::{DefaultHasher, Hash, Hasher};

pub use contour::{write_points, Contour};
pub use signature::{
    is_normalized, mean_hbs, normalize_hbs, HbsSignature, ARG_TOL, FORMAT_VERSION, MEAN_EPS,
};
pub use welding::{poisson_extend, CircleMap, HarmonicExtension};
pub use zipper::{zip_contour, ConformalMaps};

use crate::error::{Error, Result};
use crate::geometry;
use crate::mesh::TriMesh;
use crate::par;
use crate::qc::{LbsSolver, PlanarMap};
use crate::C64;

pub const DEFAULT_GRID: usize = 256;
pub const DEFAULT_SAMPLES: usize = 512;
pub const DEFAULT_SPECTRAL: usize = 8192;

/// Largest signature magnitude kept; samples at or above 1 are pulled back.
const B_CAP: f64 = 1.0 - 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HbsOptions {
    /// Signature grid size.
    pub grid: usize,
    /// Contour points used by the conformal maps (arclength resampling).
    pub samples: usize,
    /// Uniform samples of the welding for the Fourier extension.
    pub spectral: usize,
}

impl Default for HbsOptions {
    fn default() -> Self {
        Self {
            grid: DEFAULT_GRID,
            samples: DEFAULT_SAMPLES,
            spectral: DEFAULT_SPECTRAL,
        }
    }
}

/// Intermediate stages of a signature computation.
#[derive(Debug, Clone)]
pub struct HbsPipeline {
    pub maps: ConformalMaps,
    pub welding: CircleMap,
    /// Rotation applied to the welding source by the normalisation.
    pub rotation: f64,
    pub signature: HbsSignature,
    /// Samples whose magnitude had to be capped below 1.
    pub capped: usize,
}

/// Runs the full signature pipeline on a contour.
pub fn hbs_pipeline(contour: &Contour, opts: &HbsOptions) -> Result<HbsPipeline> {
    if opts.samples < welding::MIN_SAMPLES || opts.grid < 4 || opts.spectral < 2 * opts.samples {
        return Err(Error::InvalidArgument(format!("invalid signature options {opts:?}")));
    }
    let pts = geometry::resample_closed(contour.points(), opts.samples);
    let maps = zip_contour(&pts)?;
    zipper::check_monotone(&maps.interior_angles())?;
    zipper::check_monotone(&maps.exterior_angles())?;
    let welding = maps.welding()?;
    let ext = HarmonicExtension::new(&welding, opts.spectral);

    let mut rotation = 0.0;
    let mut values = sample_signature(&ext, opts.grid);
    for _ in 0..20 {
        let (i0, i1) = signature::integrals(opts.grid, &values);
        match signature::rotation_correction(i0, i1) {
            None => break,
            Some(d) => {
                rotation += d;
                values = sample_signature(&ext.rotated(rotation), opts.grid);
            }
        }
    }
    let mut capped = 0;
    for v in values.iter_mut() {
        if v.norm() >= 1.0 {
            *v *= B_CAP / v.norm();
            capped += 1;
        }
    }
    let mut signature = HbsSignature::zero(opts.grid)?;
    for (ix, iy) in signature.defined().collect::<Vec<_>>() {
        signature.set(ix, iy, values[iy * opts.grid + ix]);
    }
    signature.source = format!("contour:{:016x}", contour_hash(contour));
    Ok(HbsPipeline {
        maps,
        welding,
        rotation,
        signature,
        capped,
    })
}

/// Normalised signature of a contour.
pub fn hbs_from_contour(contour: &Contour, opts: &HbsOptions) -> Result<HbsSignature> {
    Ok(hbs_pipeline(contour, opts)?.signature)
}

fn sample_signature(ext: &HarmonicExtension, grid: usize) -> Vec<C64> {
    let h = 2.0 / (grid as f64 - 1.0);
    let lim = 1.0 - 0.5 * h;
    par::map_range(grid * grid, |k| {
        let z = C64::new(-1.0 + (k % grid) as f64 * h, -1.0 + (k / grid) as f64 * h);
        if z.norm() <= lim {
            ext.beltrami(z)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

fn contour_hash(c: &Contour) -> u64 {
    let mut h = DefaultHasher::new();
    for p in c.points() {
        p.re.to_bits().hash(&mut h);
        p.im.to_bits().hash(&mut h);
    }
    h.finish()
}

/// Coefficient on the mesh: the signature inside the unit disk (bilinear),
/// exactly zero outside.
pub fn extend_to_domain(b: &HbsSignature, mesh: &TriMesh) -> Vec<C64> {
    par::map_slice(mesh.vertices(), |&z| {
        if z.norm() < 1.0 {
            b.sample(z)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReconstructOptions {
    /// Points on the returned contour.
    pub points: usize,
    /// Half-width of the uniform core of the mesh.
    pub core: f64,
    /// Half-width of the whole mesh.
    pub outer: f64,
    /// Growth ratio of the cells outside the core.
    pub ratio: f64,
    /// Core spacing; `None` uses the signature grid spacing.
    pub spacing: Option<f64>,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        Self {
            points: 1024,
            core: 1.05,
            outer: 8.0,
            ratio: 1.1,
            spacing: None,
        }
    }
}

/// Shape of a signature: the image of the unit circle under the map with
/// coefficient `B` on the disk and 0 outside, computed by the LBS on a large
/// graded mesh with identity boundary.
pub fn reconstruct_shape(b: &HbsSignature, opts: &ReconstructOptions) -> Result<Vec<C64>> {
    let h = opts.spacing.unwrap_or_else(|| b.spacing());
    let mesh = TriMesh::graded_square(opts.core, h, opts.outer, opts.ratio)?;
    let mut mu = extend_to_domain(b, &mesh);
    for m in mu.iter_mut() {
        if m.norm() >= B_CAP {
            *m *= B_CAP / m.norm();
        }
    }
    let solver = LbsSolver::new(&mesh)?;
    let map: PlanarMap = solver.solve(&mu, mesh.vertices())?;
    let circle = geometry::circle(C64::new(0.0, 0.0), 1.0, opts.points);
    Ok(par::map_slice(&circle, |&z| map.eval(&mesh, z)))
}

/// Decimal text with 9 significant digits.
pub(crate) fn fmt_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { format!("{x}") };
    }
    let e = x.abs().log10().floor() as i32;
    let prec = (8 - e).max(0) as usize;
    let s = format!("{x:.prec$}");
    // rounding may carry into a new leading digit
    let digits = s.chars().filter(|c| c.is_ascii_digit()).skip_while(|&c| c == '0').count();
    if digits > 9 && prec > 0 {
        format!("{x:.*}", prec - 1)
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(1.0), "1.00000000");
        assert_eq!(fmt_sig(-0.0123456789123), "-0.0123456789");
        assert_eq!(fmt_sig(123456.7891), "123456.789");
        assert_eq!(fmt_sig(9.9999999999), "10.0000000");
    }

    #[test]
    fn extension_vanishes_outside_the_disk() {
        let mesh = TriMesh::for_image(40, 40).unwrap();
        let b = HbsSignature::from_fn(65, |_| C64::new(0.3, 0.0)).unwrap();
        let mu = extend_to_domain(&b, &mesh);
        for (z, m) in mesh.vertices().iter().zip(&mu) {
            if z.norm() >= 1.0 {
                assert_eq!(*m, C64::new(0.0, 0.0));
            } else {
                assert!((m - C64::new(0.3, 0.0)).norm() < 1e-12);
            }
        }
        for v in 0..mesh.n_vertices() {
            if mesh.is_boundary(v) {
                assert_eq!(mu[v], C64::new(0.0, 0.0));
            }
        }
        let zero = extend_to_domain(&HbsSignature::zero(65).unwrap(), &mesh);
        assert!(zero.iter().all(|m| m.norm() == 0.0));
    }
}
