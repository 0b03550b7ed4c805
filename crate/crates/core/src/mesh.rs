//! Triangulated rectangular domains and the discrete operators every solver
//! is built from.
//!
//! Meshes are tensor grids `xs × ys` with every cell split along the same
//! diagonal. Vertex `(i, j)` has index `j * nx + i`; for pixel meshes this is
//! exactly the row-major pixel index, with rows running top to bottom and the
//! domain `y` axis pointing up.

use crate::error::{Error, Result};
use crate::par;
use crate::sparse::CsrMatrix;
use crate::C64;

/// Minimum image side accepted by [`TriMesh::for_image`].
pub const MIN_SIDE: usize = 4;

/// Fraction of the shorter image side covered by the unit-disk radius.
pub const DISK_FILL: f64 = 0.45;

/// Affine correspondence between pixel coordinates and domain coordinates.
///
/// Pixel `(col, row)` maps to `((col - cx) / s, -(row - cy) / s)` with `s`
/// pixels per domain unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridFrame {
    pub width: usize,
    pub height: usize,
    pub cx: f64,
    pub cy: f64,
    pub px_per_unit: f64,
}

impl GridFrame {
    /// Frame centred on the image with the given scale.
    pub fn centered(width: usize, height: usize, px_per_unit: f64) -> Self {
        Self {
            width,
            height,
            cx: (width as f64 - 1.0) / 2.0,
            cy: (height as f64 - 1.0) / 2.0,
            px_per_unit,
        }
    }

    /// Frame whose unit disk is the circle `(cx, cy, radius)` in pixels.
    pub fn from_circle(width: usize, height: usize, cx: f64, cy: f64, radius: f64) -> Self {
        Self {
            width,
            height,
            cx,
            cy,
            px_per_unit: radius,
        }
    }

    pub fn to_domain(&self, col: f64, row: f64) -> C64 {
        C64::new(
            (col - self.cx) / self.px_per_unit,
            -(row - self.cy) / self.px_per_unit,
        )
    }

    pub fn to_pixel(&self, z: C64) -> (f64, f64) {
        (
            self.cx + z.re * self.px_per_unit,
            self.cy - z.im * self.px_per_unit,
        )
    }
}

/// Triangle mesh of a rectangle.
#[derive(Debug, Clone)]
pub struct TriMesh {
    nx: usize,
    ny: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
    vertices: Vec<C64>,
    faces: Vec<[usize; 3]>,
    boundary: Vec<bool>,
    spacing: f64,
    frame: Option<GridFrame>,
    face_area: Vec<f64>,
    /// Gradients of the three hat functions of each face, packed `dx + i dy`.
    face_grad: Vec<[C64; 3]>,
    vf_ptr: Vec<usize>,
    vf_idx: Vec<usize>,
    mass: Vec<f64>,
    stiffness: CsrMatrix,
}

impl TriMesh {
    /// Mesh with one vertex per pixel centre for a `width × height` image,
    /// `px_per_unit` pixels per domain unit, centred on the image.
    pub fn build_rect_mesh(width: usize, height: usize, px_per_unit: f64) -> Result<Self> {
        Self::from_frame(GridFrame::centered(width, height, px_per_unit))
    }

    /// Pixel mesh with the default scale (unit disk radius = 45% of the
    /// shorter side).
    pub fn for_image(width: usize, height: usize) -> Result<Self> {
        let s = DISK_FILL * width.min(height) as f64;
        Self::build_rect_mesh(width, height, s)
    }

    pub fn from_frame(frame: GridFrame) -> Result<Self> {
        let (w, h) = (frame.width, frame.height);
        if w < MIN_SIDE || h < MIN_SIDE {
            return Err(Error::DimensionsTooSmall {
                width: w,
                height: h,
                min: MIN_SIDE,
            });
        }
        if !(frame.px_per_unit > 0.0) {
            return Err(Error::InvalidArgument("scale must be positive".into()));
        }
        let xs = (0..w).map(|c| frame.to_domain(c as f64, 0.0).re).collect();
        let ys = (0..h).map(|r| frame.to_domain(0.0, r as f64).im).collect();
        let mut mesh = Self::tensor(xs, ys)?;
        mesh.frame = Some(frame);
        Ok(mesh)
    }

    /// Tensor-product mesh; `xs` and `ys` must each be strictly monotone.
    pub fn tensor(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let (nx, ny) = (xs.len(), ys.len());
        if nx < 2 || ny < 2 {
            return Err(Error::DimensionsTooSmall {
                width: nx,
                height: ny,
                min: 2,
            });
        }
        let monotone = |v: &[f64]| {
            v.windows(2).all(|p| p[1] > p[0]) || v.windows(2).all(|p| p[1] < p[0])
        };
        if !monotone(&xs) || !monotone(&ys) {
            return Err(Error::InvalidArgument(
                "grid coordinates must be strictly monotone".into(),
            ));
        }
        let vertices: Vec<C64> = (0..nx * ny)
            .map(|k| C64::new(xs[k % nx], ys[k / nx]))
            .collect();
        let boundary = (0..nx * ny)
            .map(|k| {
                let (i, j) = (k % nx, k / nx);
                i == 0 || j == 0 || i == nx - 1 || j == ny - 1
            })
            .collect();
        let spacing = xs
            .windows(2)
            .chain(ys.windows(2))
            .map(|p| (p[1] - p[0]).abs())
            .fold(f64::INFINITY, f64::min);

        let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let a = j * nx + i;
                let b = a + 1;
                let c = a + nx + 1;
                let d = a + nx;
                for tri in [[a, b, c], [a, c, d]] {
                    let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
                    faces.push(if area > 0.0 {
                        tri
                    } else {
                        [tri[0], tri[2], tri[1]]
                    });
                }
            }
        }

        let mut face_area = Vec::with_capacity(faces.len());
        let mut face_grad = Vec::with_capacity(faces.len());
        for f in &faces {
            let p = [vertices[f[0]], vertices[f[1]], vertices[f[2]]];
            let area = signed_area(p[0], p[1], p[2]);
            if !(area > 0.0) {
                return Err(Error::InvalidArgument("degenerate face".into()));
            }
            // grad of hat function k = rot90(opposite edge) / (2A), pointing inward
            let mut g = [C64::new(0.0, 0.0); 3];
            for k in 0..3 {
                let e = p[(k + 2) % 3] - p[(k + 1) % 3];
                g[k] = C64::new(-e.im, e.re) / (2.0 * area);
            }
            face_area.push(area);
            face_grad.push(g);
        }

        let nv = vertices.len();
        let mut counts = vec![0usize; nv + 1];
        for f in &faces {
            for &v in f {
                counts[v + 1] += 1;
            }
        }
        for k in 0..nv {
            counts[k + 1] += counts[k];
        }
        let vf_ptr = counts.clone();
        let mut fill = counts;
        let mut vf_idx = vec![0; vf_ptr[nv]];
        for (fi, f) in faces.iter().enumerate() {
            for &v in f {
                vf_idx[fill[v]] = fi;
                fill[v] += 1;
            }
        }

        let mut mass = vec![0.0; nv];
        let mut triplets = Vec::with_capacity(faces.len() * 9);
        for (fi, f) in faces.iter().enumerate() {
            let (a, g) = (face_area[fi], face_grad[fi]);
            for r in 0..3 {
                mass[f[r]] += a / 3.0;
                for c in 0..3 {
                    let k = a * (g[r].re * g[c].re + g[r].im * g[c].im);
                    triplets.push((f[r], f[c], k));
                }
            }
        }
        let stiffness = CsrMatrix::from_triplets(nv, nv, &triplets);

        Ok(Self {
            nx,
            ny,
            xs,
            ys,
            vertices,
            faces,
            boundary,
            spacing,
            frame: None,
            face_area,
            face_grad,
            vf_ptr,
            vf_idx,
            mass,
            stiffness,
        })
    }

    /// Square mesh on `[-outer, outer]²`: uniform spacing `h` on
    /// `[-core, core]`, then cells growing geometrically by `ratio` until the
    /// outer boundary is reached.
    pub fn graded_square(core: f64, h: f64, outer: f64, ratio: f64) -> Result<Self> {
        if !(h > 0.0 && core > 0.0 && outer > core && ratio >= 1.0) {
            return Err(Error::InvalidArgument("invalid graded mesh parameters".into()));
        }
        let n_core = (core / h).ceil() as usize;
        let mut half = vec![0.0];
        for k in 1..=n_core {
            half.push(k as f64 * h);
        }
        let mut step = h;
        loop {
            step *= ratio;
            let last = *half.last().unwrap();
            if last + step >= outer {
                if outer - last < 0.5 * step {
                    *half.last_mut().unwrap() = outer;
                } else {
                    half.push(outer);
                }
                break;
            }
            half.push(last + step);
        }
        let mut axis: Vec<f64> = half.iter().rev().map(|x| -x).collect();
        axis.pop();
        axis.extend(half.iter().copied());
        Self::tensor(axis.clone(), axis)
    }

    /// Uniform square grid with `n` points per side on `[-half, half]²`.
    pub fn square(n: usize, half: f64) -> Result<Self> {
        let axis: Vec<f64> = (0..n)
            .map(|k| -half + 2.0 * half * k as f64 / (n as f64 - 1.0))
            .collect();
        Self::tensor(axis.clone(), axis)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn vertices(&self) -> &[C64] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    /// Smallest grid step.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn frame(&self) -> Option<&GridFrame> {
        self.frame.as_ref()
    }

    pub fn face_area(&self, f: usize) -> f64 {
        self.face_area[f]
    }

    pub fn face_gradients(&self, f: usize) -> &[C64; 3] {
        &self.face_grad[f]
    }

    /// Faces incident to vertex `v`.
    pub fn vertex_faces(&self, v: usize) -> &[usize] {
        &self.vf_idx[self.vf_ptr[v]..self.vf_ptr[v + 1]]
    }

    /// Lumped (barycentric) vertex areas.
    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Lumped mass in units of `spacing²`; 1 at interior vertices of a
    /// uniform mesh.
    pub fn vertex_weight(&self, v: usize) -> f64 {
        self.mass[v] / (self.spacing * self.spacing)
    }

    /// Symmetric cotangent stiffness matrix (positive semidefinite, zero row
    /// sums).
    pub fn stiffness(&self) -> &CsrMatrix {
        &self.stiffness
    }

    /// Extent `(xmin, xmax, ymin, ymax)`.
    pub fn bounds(&self) -> (f64, f64, f64, f64) {
        let (x0, x1) = (self.xs[0], self.xs[self.nx - 1]);
        let (y0, y1) = (self.ys[0], self.ys[self.ny - 1]);
        (x0.min(x1), x0.max(x1), y0.min(y1), y0.max(y1))
    }

    /// Per-face Wirtinger derivatives `(∂f/∂z, ∂f/∂z̄)` of the piecewise
    /// linear interpolant of `f`.
    pub fn face_derivatives(&self, f: &[C64]) -> (Vec<C64>, Vec<C64>) {
        assert_eq!(f.len(), self.n_vertices());
        let pairs = par::map_range(self.n_faces(), |fi| {
            let (dz, dzb) = self.face_derivative(fi, f);
            (dz, dzb)
        });
        pairs.into_iter().unzip()
    }

    pub(crate) fn face_derivative(&self, fi: usize, f: &[C64]) -> (C64, C64) {
        let face = &self.faces[fi];
        let g = &self.face_grad[fi];
        let mut fx = C64::new(0.0, 0.0);
        let mut fy = C64::new(0.0, 0.0);
        for k in 0..3 {
            fx += f[face[k]] * g[k].re;
            fy += f[face[k]] * g[k].im;
        }
        let i = C64::new(0.0, 1.0);
        ((fx - i * fy) * 0.5, (fx + i * fy) * 0.5)
    }

    /// Unweighted mean of incident face values at each vertex.
    pub fn face_to_vertex(&self, g: &[C64]) -> Vec<C64> {
        assert_eq!(g.len(), self.n_faces());
        par::map_range(self.n_vertices(), |v| {
            let fs = self.vertex_faces(v);
            let s: C64 = fs.iter().map(|&f| g[f]).sum();
            s / fs.len() as f64
        })
    }

    /// Mean of the three vertex values on each face.
    pub fn vertex_to_face(&self, g: &[C64]) -> Vec<C64> {
        assert_eq!(g.len(), self.n_vertices());
        par::map_slice(&self.faces, |f| (g[f[0]] + g[f[1]] + g[f[2]]) / 3.0)
    }

    /// Pointwise Laplacian `Δf ≈ -M⁻¹ K f`. Exact on the 5-point stencil for
    /// interior vertices of a uniform mesh; boundary rows are one-sided and
    /// should not be read as Laplacian values.
    pub fn laplacian(&self, f: &[f64]) -> Vec<f64> {
        let kf = self.stiffness.mul_vec(f);
        kf.iter().zip(&self.mass).map(|(k, m)| -k / m).collect()
    }

    /// Laplacian with homogeneous Dirichlet data: boundary values of `f` are
    /// treated as zero and boundary outputs are zero.
    pub fn laplacian_dirichlet(&self, f: &[f64]) -> Vec<f64> {
        par::map_range(self.n_vertices(), |v| {
            if self.boundary[v] {
                return 0.0;
            }
            let s: f64 = self
                .stiffness
                .row(v)
                .filter(|&(c, _)| !self.boundary[c])
                .map(|(c, k)| k * f[c])
                .sum();
            -s / self.mass[v]
        })
    }

    /// Componentwise complex Laplacian.
    pub fn laplacian_complex(&self, f: &[C64]) -> Vec<C64> {
        let (re, im) = split(f);
        join(&self.laplacian(&re), &self.laplacian(&im))
    }

    pub fn laplacian_dirichlet_complex(&self, f: &[C64]) -> Vec<C64> {
        let (re, im) = split(f);
        join(
            &self.laplacian_dirichlet(&re),
            &self.laplacian_dirichlet(&im),
        )
    }

    /// Dirichlet energy `Σ_faces area·|∇f|²` of the piecewise linear field.
    pub fn dirichlet_energy(&self, f: &[f64]) -> f64 {
        let kf = self.stiffness.mul_vec(f);
        par::sum_range(f.len(), |v| f[v] * kf[v])
    }

    pub fn dirichlet_energy_complex(&self, f: &[C64]) -> f64 {
        let (re, im) = split(f);
        self.dirichlet_energy(&re) + self.dirichlet_energy(&im)
    }

    /// Locates `p`, clamped into the domain, and returns the containing face
    /// with barycentric weights keyed by vertex index.
    pub fn locate(&self, p: C64) -> (usize, [(usize, f64); 3]) {
        let (i, u) = cell_coord(&self.xs, p.re);
        let (j, v) = cell_coord(&self.ys, p.im);
        let a = j * self.nx + i;
        let b = a + 1;
        let c = a + self.nx + 1;
        let d = a + self.nx;
        let cell = j * (self.nx - 1) + i;
        if u >= v {
            (2 * cell, [(a, 1.0 - u), (b, u - v), (c, v)])
        } else {
            (2 * cell + 1, [(a, 1.0 - v), (c, u), (d, v - u)])
        }
    }

    /// Evaluates the piecewise linear interpolant of a complex field at `p`
    /// (clamped into the domain).
    pub fn interpolate(&self, field: &[C64], p: C64) -> C64 {
        let (_, w) = self.locate(p);
        field[w[0].0] * w[0].1 + field[w[1].0] * w[1].1 + field[w[2].0] * w[2].1
    }

    pub fn interpolate_real(&self, field: &[f64], p: C64) -> f64 {
        let (_, w) = self.locate(p);
        field[w[0].0] * w[0].1 + field[w[1].0] * w[1].1 + field[w[2].0] * w[2].1
    }

    /// Whether `p` lies inside the closed mesh rectangle.
    pub fn contains(&self, p: C64) -> bool {
        let (x0, x1, y0, y1) = self.bounds();
        p.re >= x0 && p.re <= x1 && p.im >= y0 && p.im <= y1
    }
}

/// Twice-halved cross product: positive for counterclockwise triangles.
pub fn signed_area(a: C64, b: C64, c: C64) -> f64 {
    0.5 * ((b.re - a.re) * (c.im - a.im) - (c.re - a.re) * (b.im - a.im))
}

/// Cell index and local coordinate in `[0, 1]` along a monotone axis.
fn cell_coord(axis: &[f64], x: f64) -> (usize, f64) {
    let n = axis.len();
    let increasing = axis[n - 1] > axis[0];
    // position of x measured along the increasing direction of the index
    let before = |k: usize| {
        if increasing {
            axis[k] <= x
        } else {
            axis[k] >= x
        }
    };
    // largest k in [0, n-2] with axis[k] before-or-at x
    let mut lo = 0usize;
    let mut hi = n - 2;
    if !before(0) {
        return (0, 0.0);
    }
    if before(n - 1) {
        return (n - 2, 1.0);
    }
    while lo < hi {
        let mid = (lo + hi).div_ceil(2);
        if before(mid) {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let t = (x - axis[lo]) / (axis[lo + 1] - axis[lo]);
    (lo, t.clamp(0.0, 1.0))
}

pub(crate) fn split(f: &[C64]) -> (Vec<f64>, Vec<f64>) {
    (f.iter().map(|z| z.re).collect(), f.iter().map(|z| z.im).collect())
}

pub(crate) fn join(re: &[f64], im: &[f64]) -> Vec<C64> {
    re.iter().zip(im).map(|(&a, &b)| C64::new(a, b)).collect()
}
