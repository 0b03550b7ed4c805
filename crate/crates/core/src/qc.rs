//! Beltrami coefficients of piecewise linear maps, truncation and dilation,
//! the linear Beltrami solver (LBS) and region inversion.

use crate::error::{Error, Result};
use crate::geometry;
use crate::mesh::{signed_area, TriMesh};
use crate::par;
use crate::sparse::{SpdFactor, SpdPattern};
use crate::C64;

/// Real pairing `(a + bi)·(c + di) = ac + bd` of two complex numbers seen as
/// plane vectors.
#[inline]
pub fn real_dot(a: C64, b: C64) -> f64 {
    a.re * b.re + a.im * b.im
}

/// Image positions of the mesh vertices under a piecewise linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanarMap {
    pub positions: Vec<C64>,
}

impl PlanarMap {
    pub fn identity(mesh: &TriMesh) -> Self {
        Self {
            positions: mesh.vertices().to_vec(),
        }
    }

    pub fn from_fn(mesh: &TriMesh, f: impl Fn(C64) -> C64 + Sync + Send) -> Self {
        Self {
            positions: par::map_slice(mesh.vertices(), |&z| f(z)),
        }
    }

    /// Number of faces whose image has non-positive signed area.
    pub fn flipped_faces(&self, mesh: &TriMesh) -> usize {
        let p = &self.positions;
        mesh.faces()
            .iter()
            .filter(|f| signed_area(p[f[0]], p[f[1]], p[f[2]]) <= 0.0)
            .count()
    }

    /// Root mean square vertex displacement between two maps.
    pub fn rms_distance(&self, other: &PlanarMap) -> f64 {
        let n = self.positions.len();
        let s = par::sum_range(n, |k| (self.positions[k] - other.positions[k]).norm_sqr());
        (s / n as f64).sqrt()
    }

    /// Evaluates the map at an arbitrary domain point by interpolation.
    pub fn eval(&self, mesh: &TriMesh, z: C64) -> C64 {
        mesh.interpolate(&self.positions, z)
    }
}

/// Per-face Beltrami coefficient `f_z̄ / f_z`; faces with vanishing `f_z` get 0.
pub fn beltrami_faces(mesh: &TriMesh, f: &[C64]) -> Vec<C64> {
    par::map_range(mesh.n_faces(), |fi| {
        let (dz, dzb) = mesh.face_derivative(fi, f);
        // f_z at rounding level relative to f_z̄ counts as zero
        if dz.norm() <= 1e-12 * dzb.norm() || dz.norm_sqr() == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            dzb / dz
        }
    })
}

/// Vertex Beltrami coefficient of a map: face ratios averaged over incident
/// faces.
pub fn beltrami_from_map(mesh: &TriMesh, f: &PlanarMap) -> Vec<C64> {
    mesh.face_to_vertex(&beltrami_faces(mesh, &f.positions))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "truncation epsilon {eps} outside (0, 1)"
        )))
    }
}

/// Caps magnitudes at `1 - eps`, keeping arguments.
pub fn truncate(mu: &[C64], eps: f64) -> Result<Vec<C64>> {
    check_eps(eps)?;
    let cap = 1.0 - eps;
    Ok(par::map_slice(mu, |&m| truncate_one(m, cap)))
}

/// In-place variant of [`truncate`] with a precomputed cap.
pub(crate) fn truncate_in_place(mu: &mut [C64], cap: f64) {
    par::for_each_mut(mu, |_, m| *m = truncate_one(*m, cap));
}

#[inline]
fn truncate_one(m: C64, cap: f64) -> C64 {
    let r = m.norm();
    if r < cap {
        m
    } else {
        m * (cap / r)
    }
}

/// Pointwise dilation `(1 + |μ|) / (1 - |μ|)`.
pub fn dilation(mu: &[C64]) -> Result<Vec<f64>> {
    if let Some((index, m)) = mu.iter().enumerate().find(|(_, m)| !(m.norm() < 1.0)) {
        return Err(Error::NotQuasiConformal {
            index,
            magnitude: m.norm(),
        });
    }
    Ok(mu
        .iter()
        .map(|m| {
            let r = m.norm();
            (1.0 + r) / (1.0 - r)
        })
        .collect())
}

/// Largest magnitude of a field.
pub fn max_abs(mu: &[C64]) -> f64 {
    par::max_range(mu.len(), |k| mu[k].norm())
}

/// Rounds of local coefficient halving tried when a solved map folds.
pub const LOCAL_REPAIRS: usize = 20;

/// Total repair rounds, the later ones halving the coefficient everywhere.
pub const MAX_REPAIRS: usize = 80;

/// Linear Beltrami solver on a fixed mesh.
///
/// Each real component of the map solves `∇·(A(ν)∇u) = 0` with Dirichlet
/// boundary values, discretised with P1 elements; boundary unknowns are
/// eliminated so the system is symmetric positive definite. The sparsity
/// pattern and its symbolic Cholesky factorization are built once.
pub struct LbsSolver<'m> {
    mesh: &'m TriMesh,
    /// Interior index of each vertex, or `usize::MAX` for boundary vertices.
    unknown: Vec<usize>,
    n_unknowns: usize,
    pattern: SpdPattern,
    /// Pattern slot of each local entry `(r, c)` of each face; `usize::MAX`
    /// for entries outside the stored lower triangle of interior rows.
    slots: Vec<[usize; 9]>,
    n_entries: usize,
}

impl<'m> LbsSolver<'m> {
    pub fn new(mesh: &'m TriMesh) -> Result<Self> {
        let mut unknown = vec![usize::MAX; mesh.n_vertices()];
        let mut n_unknowns = 0;
        for v in 0..mesh.n_vertices() {
            if !mesh.is_boundary(v) {
                unknown[v] = n_unknowns;
                n_unknowns += 1;
            }
        }
        let mut entries = Vec::new();
        let mut slots = Vec::with_capacity(mesh.n_faces());
        for f in mesh.faces() {
            let mut s = [usize::MAX; 9];
            for r in 0..3 {
                for c in 0..3 {
                    let (ur, uc) = (unknown[f[r]], unknown[f[c]]);
                    if ur != usize::MAX && uc != usize::MAX && ur >= uc {
                        s[3 * r + c] = entries.len();
                        entries.push((ur, uc));
                    }
                }
            }
            slots.push(s);
        }
        if n_unknowns == 0 {
            return Err(Error::InvalidArgument("mesh has no interior vertices".into()));
        }
        let pattern = SpdPattern::new(n_unknowns, &entries)?;
        Ok(Self {
            mesh,
            unknown,
            n_unknowns,
            pattern,
            slots,
            n_entries: entries.len(),
        })
    }

    pub fn mesh(&self) -> &TriMesh {
        self.mesh
    }

    /// Reconstructs the map with vertex coefficient `nu` (averaged to faces)
    /// and the given boundary positions (only boundary entries are read).
    pub fn solve(&self, nu: &[C64], boundary: &[C64]) -> Result<PlanarMap> {
        let mesh = self.mesh;
        if nu.len() != mesh.n_vertices() || boundary.len() != mesh.n_vertices() {
            return Err(Error::DimensionMismatch(
                "coefficient and boundary must be vertex fields".into(),
            ));
        }
        if let Some((index, m)) = nu.iter().enumerate().find(|(_, m)| !(m.norm() < 1.0)) {
            return Err(Error::NotQuasiConformal {
                index,
                magnitude: m.norm(),
            });
        }
        let nu_face = mesh.vertex_to_face(nu);
        self.solve_faces(&nu_face, boundary)
    }

    /// As [`solve`](Self::solve) with a per-face coefficient.
    ///
    /// P1 elements do not inherit the continuous bijectivity guarantee when
    /// the coefficient is strongly anisotropic and varies quickly. Faces whose
    /// image folds have the coefficient halved on them and on the faces around
    /// them, then the system is solved again. After [`LOCAL_REPAIRS`] such
    /// rounds the whole coefficient is halved instead, up to [`MAX_REPAIRS`]
    /// rounds in total.
    pub fn solve_faces(&self, nu_face: &[C64], boundary: &[C64]) -> Result<PlanarMap> {
        let mut map = self.solve_raw(nu_face, boundary)?;
        let mut flipped = self.flipped(&map);
        if flipped.is_empty() {
            return Ok(map);
        }
        let mesh = self.mesh;
        let mut nu = nu_face.to_vec();
        for round in 0..MAX_REPAIRS {
            let mut mark = vec![round >= LOCAL_REPAIRS; mesh.n_faces()];
            for &fi in &flipped {
                for &v in &mesh.faces()[fi] {
                    for &g in mesh.vertex_faces(v) {
                        mark[g] = true;
                    }
                }
            }
            for (m, &hit) in nu.iter_mut().zip(&mark) {
                if hit {
                    *m *= 0.5;
                }
            }
            map = self.solve_raw(&nu, boundary)?;
            flipped = self.flipped(&map);
            if flipped.is_empty() {
                break;
            }
        }
        Ok(map)
    }

    fn flipped(&self, map: &PlanarMap) -> Vec<usize> {
        let p = &map.positions;
        let faces = self.mesh.faces();
        (0..faces.len())
            .filter(|&fi| {
                let f = faces[fi];
                signed_area(p[f[0]], p[f[1]], p[f[2]]) <= 0.0
            })
            .collect()
    }

    fn solve_raw(&self, nu_face: &[C64], boundary: &[C64]) -> Result<PlanarMap> {
        let mesh = self.mesh;
        let (values, rhs) = self.assemble(nu_face, boundary)?;
        let factor = self.pattern.factor(&values)?;
        let sol = self.back_substitute(&factor, rhs);
        let mut positions = boundary.to_vec();
        for v in 0..mesh.n_vertices() {
            let u = self.unknown[v];
            if u != usize::MAX {
                positions[v] = sol[u];
            }
        }
        Ok(PlanarMap { positions })
    }

    fn assemble(&self, nu_face: &[C64], boundary: &[C64]) -> Result<(Vec<f64>, [Vec<f64>; 2])> {
        let mesh = self.mesh;
        let local = par::map_range(mesh.n_faces(), |fi| {
            let m = nu_face[fi];
            let (rho, sigma) = (m.re, m.im);
            let d = 1.0 - m.norm_sqr();
            let a11 = ((rho - 1.0).powi(2) + sigma * sigma) / d;
            let a12 = -2.0 * sigma / d;
            let a22 = ((1.0 + rho).powi(2) + sigma * sigma) / d;
            let g = mesh.face_gradients(fi);
            let area = mesh.face_area(fi);
            let mut k = [0.0; 9];
            for r in 0..3 {
                let (ax, ay) = (
                    a11 * g[r].re + a12 * g[r].im,
                    a12 * g[r].re + a22 * g[r].im,
                );
                for c in 0..3 {
                    k[3 * r + c] = area * (ax * g[c].re + ay * g[c].im);
                }
            }
            k
        });
        if let Some(fi) = nu_face.iter().position(|m| !(m.norm() < 1.0)) {
            return Err(Error::NotQuasiConformal {
                index: fi,
                magnitude: nu_face[fi].norm(),
            });
        }
        let mut values = vec![0.0; self.n_entries];
        let mut rhs_re = vec![0.0; self.n_unknowns];
        let mut rhs_im = vec![0.0; self.n_unknowns];
        for (fi, f) in mesh.faces().iter().enumerate() {
            let k = &local[fi];
            let s = &self.slots[fi];
            for r in 0..3 {
                let ur = self.unknown[f[r]];
                if ur == usize::MAX {
                    continue;
                }
                for c in 0..3 {
                    let idx = 3 * r + c;
                    if s[idx] != usize::MAX {
                        values[s[idx]] += k[idx];
                    } else if self.unknown[f[c]] == usize::MAX {
                        let b = boundary[f[c]];
                        rhs_re[ur] -= k[idx] * b.re;
                        rhs_im[ur] -= k[idx] * b.im;
                    }
                }
            }
        }
        Ok((values, [rhs_re, rhs_im]))
    }

    fn back_substitute(&self, factor: &SpdFactor, rhs: [Vec<f64>; 2]) -> Vec<C64> {
        let mut cols = rhs.to_vec();
        factor.solve_many(&mut cols);
        cols[0]
            .iter()
            .zip(&cols[1])
            .map(|(&a, &b)| C64::new(a, b))
            .collect()
    }
}

/// One-shot LBS: reconstructs the map with coefficient `nu` and the boundary
/// values of `boundary`.
pub fn lbs_solve(mesh: &TriMesh, nu: &[C64], boundary: &[C64]) -> Result<PlanarMap> {
    LbsSolver::new(mesh)?.solve(nu, boundary)
}

/// Image of the unit disk under a map: the deformed circle polyline (domain
/// coordinates), the pixel mask of the enclosed region on the mesh frame, and
/// whether the polyline is simple.
#[derive(Debug, Clone)]
pub struct Region {
    pub boundary: Vec<C64>,
    pub mask: Vec<bool>,
    pub simple: bool,
}

/// Number of circle samples used for a disk of `radius_px` pixels.
pub fn circle_samples(radius_px: f64) -> usize {
    ((std::f64::consts::TAU * radius_px * 2.0).ceil() as usize).max(64)
}

/// Forward-maps the discretised unit circle and rasterises the enclosed
/// region by even-odd filling. Requires a pixel mesh.
pub fn invert_region(mesh: &TriMesh, f: &PlanarMap) -> Result<Region> {
    let frame = *mesh
        .frame()
        .ok_or_else(|| Error::InvalidArgument("region inversion needs a pixel mesh".into()))?;
    let n = circle_samples(frame.px_per_unit);
    let circle = geometry::circle(C64::new(0.0, 0.0), 1.0, n);
    let boundary: Vec<C64> = par::map_slice(&circle, |&z| f.eval(mesh, z));
    let px: Vec<C64> = boundary
        .iter()
        .map(|&z| {
            let (x, y) = frame.to_pixel(z);
            C64::new(x, y)
        })
        .collect();
    let mask = geometry::fill_polygon(&px, frame.width, frame.height);
    let simple = geometry::self_intersection(&boundary).is_none();
    Ok(Region {
        boundary,
        mask,
        simple,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(mesh: &TriMesh, k: C64) -> PlanarMap {
        PlanarMap::from_fn(mesh, |z| z + k * z.conj())
    }

    #[test]
    fn beltrami_of_simple_maps() {
        let mesh = TriMesh::for_image(12, 12).unwrap();
        let id = PlanarMap::identity(&mesh);
        assert!(beltrami_from_map(&mesh, &id).iter().all(|m| m.norm() < 1e-14));
        let s = affine(&mesh, C64::new(0.3, 0.0));
        assert!(beltrami_from_map(&mesh, &s)
            .iter()
            .all(|m| (m - C64::new(0.3, 0.0)).norm() < 1e-12));
        let conj = PlanarMap::from_fn(&mesh, |z| z.conj());
        assert!(beltrami_from_map(&mesh, &conj).iter().all(|m| m.norm() == 0.0));
    }

    #[test]
    fn truncation_examples() {
        let t = truncate(&[C64::new(0.5, 0.0), C64::new(0.0, 1.2)], 0.01).unwrap();
        assert_eq!(t[0], C64::new(0.5, 0.0));
        assert!((t[1] - C64::new(0.0, 0.99)).norm() < 1e-15);
        assert!(truncate(&t, 0.0).is_err());
        assert!(truncate(&t, 1.0).is_err());
    }

    #[test]
    fn dilation_examples() {
        let k = dilation(&[C64::new(0.0, 0.0), C64::new(0.0, 0.5)]).unwrap();
        assert_eq!(k[0], 1.0);
        assert!((k[1] - 3.0).abs() < 1e-15);
        assert!(matches!(
            dilation(&[C64::new(1.0, 0.0)]),
            Err(Error::NotQuasiConformal { index: 0, .. })
        ));
    }

    #[test]
    fn real_dot_is_plane_dot() {
        assert_eq!(real_dot(C64::new(1.0, 2.0), C64::new(3.0, -4.0)), -5.0);
    }

    #[test]
    fn lbs_with_zero_coefficient_is_identity() {
        let mesh = TriMesh::for_image(32, 24).unwrap();
        let zero = vec![C64::new(0.0, 0.0); mesh.n_vertices()];
        let f = lbs_solve(&mesh, &zero, mesh.vertices()).unwrap();
        let id = PlanarMap::identity(&mesh);
        assert!(f.rms_distance(&id) < 1e-12);
        assert!(f
            .positions
            .iter()
            .zip(mesh.vertices())
            .all(|(a, b)| (a - b).norm() < 1e-12));
    }

    #[test]
    fn lbs_reproduces_affine_maps() {
        let mesh = TriMesh::for_image(40, 40).unwrap();
        let k = C64::new(0.3, 0.0);
        let target = affine(&mesh, k);
        let nu = vec![k; mesh.n_vertices()];
        let f = lbs_solve(&mesh, &nu, &target.positions).unwrap();
        assert!(f.rms_distance(&target) < 1e-10);
        let mu = beltrami_from_map(&mesh, &f);
        assert!(mu.iter().all(|m| (m - k).norm() < 1e-9));
        assert_eq!(f.flipped_faces(&mesh), 0);
    }

    #[test]
    fn folds_from_rotating_coefficients_are_repaired() {
        let mesh = TriMesh::square(48, 1.0).unwrap();
        let nu: Vec<C64> = mesh
            .vertices()
            .iter()
            .map(|z| C64::from_polar(0.99, 2.5 * z.im))
            .collect();
        let solver = LbsSolver::new(&mesh).unwrap();
        let raw = solver.solve_raw(&mesh.vertex_to_face(&nu), mesh.vertices()).unwrap();
        assert!(raw.flipped_faces(&mesh) > 0);
        let f = solver.solve(&nu, mesh.vertices()).unwrap();
        assert_eq!(f.flipped_faces(&mesh), 0);
    }

    #[test]
    fn lbs_rejects_non_quasiconformal() {
        let mesh = TriMesh::for_image(8, 8).unwrap();
        let mut nu = vec![C64::new(0.0, 0.0); mesh.n_vertices()];
        nu[20] = C64::new(1.0, 0.0);
        assert!(matches!(
            lbs_solve(&mesh, &nu, mesh.vertices()),
            Err(Error::NotQuasiConformal { index: 20, .. })
        ));
    }

    #[test]
    fn identity_region_is_the_disk() {
        let mesh = TriMesh::for_image(128, 128).unwrap();
        let r = invert_region(&mesh, &PlanarMap::identity(&mesh)).unwrap();
        assert!(r.simple);
        let frame = mesh.frame().unwrap();
        let area = r.mask.iter().filter(|&&b| b).count() as f64;
        let exact = std::f64::consts::PI * frame.px_per_unit.powi(2);
        assert!((area - exact).abs() / exact < 0.01);
        for (v, z) in mesh.vertices().iter().enumerate() {
            if (z.norm() - 1.0).abs() > 0.02 {
                assert_eq!(r.mask[v], z.norm() < 1.0);
            }
        }
    }

    #[test]
    fn scaled_region_area() {
        let mesh = TriMesh::for_image(256, 256).unwrap();
        // radial blend: scaling by one half inside radius 1.05, identity at ∂D
        let f = PlanarMap::from_fn(&mesh, |z| {
            let r = z.norm();
            let s = if r <= 1.05 {
                0.5
            } else {
                (0.5 + 0.5 * (r - 1.05) / 0.05).min(1.0)
            };
            z * s
        });
        let region = invert_region(&mesh, &f).unwrap();
        let frame = mesh.frame().unwrap();
        let area = region.mask.iter().filter(|&&b| b).count() as f64 / frame.px_per_unit.powi(2);
        let exact = 0.25 * std::f64::consts::PI;
        assert!((area - exact).abs() / exact < 0.02, "{area}");
    }
}
