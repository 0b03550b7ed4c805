//! Shape-prior segmentation by alternating a deformation step (`μ`) and a
//! prior-regularised coefficient step (`ν`), reconstructing the map from `ν`
//! with the linear Beltrami solver after every outer iteration.
//!
//! Energies are plain sums over mesh vertices. Derivative terms of vertex
//! fields are measured per grid step: `Σ|∇f|²` is `fᵀKf` with the stiffness
//! matrix `K`, and the Laplacian is `-K f`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hbs::{extend_to_domain, HbsSignature};
use crate::imaging::{self, GrayImage};
use crate::mesh::{GridFrame, TriMesh, DISK_FILL};
use crate::metrics::Mask;
use crate::par;
use crate::qc::{self, LbsSolver, PlanarMap};
use crate::sparse::SpdPattern;
use crate::C64;

/// Standard deviation (pixels) of the smoothing applied before the image is
/// differentiated or sampled.
pub const SMOOTH_SIGMA: f64 = 1.0;

/// Vertices whose data coefficient is below this magnitude take no part in
/// the phase term, which also clamps `|ν|` here for its division.
pub const ARG_FLOOR: f64 = 1e-2;

/// Step halvings tried before a `ν` descent step is abandoned.
pub const MAX_HALVINGS: usize = 10;

pub const LOG_HEADER: &str =
    "iter,E_total,E_fit,E_alpha,E_beta,E_gamma,E_delta,E_lambda,E_eta,E_tau,c1,c2,max_abs_mu,map_change";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub eta: f64,
    pub tau: f64,
    pub eps_trunc: f64,
    pub step_t: f64,
    pub inner_max: usize,
    pub outer_max: usize,
    pub tol_inner: f64,
    pub tol_outer: f64,
    /// Initial circle centre `[col, row]` in pixels; image centre if absent.
    pub init_center: Option<[f64; 2]>,
    /// Initial circle radius in pixels; a default fraction of the shorter
    /// side if absent.
    pub init_radius: Option<f64>,
}

impl Default for SegParams {
    fn default() -> Self {
        Self {
            alpha: 0.01,
            beta: 0.1,
            gamma: 0.1,
            delta: 1.0,
            lambda: 1.0,
            eta: 10.0,
            tau: 10.0,
            eps_trunc: 1e-2,
            step_t: 1e-2,
            inner_max: 50,
            outer_max: 100,
            tol_inner: 1e-3,
            tol_outer: 1e-3,
            init_center: None,
            init_radius: None,
        }
    }
}

impl SegParams {
    pub fn validate(&self) -> Result<()> {
        let weights = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("lambda", self.lambda),
            ("eta", self.eta),
            ("tau", self.tau),
            ("tol_inner", self.tol_inner),
            ("tol_outer", self.tol_outer),
        ];
        for (name, w) in weights {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} = {w} must be finite and >= 0")));
            }
        }
        if self.gamma == 0.0 && self.delta == 0.0 {
            return Err(Error::InvalidArgument("gamma and delta cannot both be zero".into()));
        }
        if !(self.eps_trunc > 0.0 && self.eps_trunc < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_trunc = {} outside (0, 1)",
                self.eps_trunc
            )));
        }
        if !(self.step_t > 0.0 && self.step_t.is_finite()) {
            return Err(Error::InvalidArgument(format!("step_t = {} must be > 0", self.step_t)));
        }
        if self.inner_max == 0 || self.outer_max == 0 {
            return Err(Error::InvalidArgument("iteration caps must be at least 1".into()));
        }
        if let Some(r) = self.init_radius {
            if !(r > 0.0 && r.is_finite()) {
                return Err(Error::InvalidArgument(format!("init_radius = {r} must be > 0")));
            }
        }
        if let Some([x, y]) = self.init_center {
            if !(x.is_finite() && y.is_finite()) {
                return Err(Error::InvalidArgument("init_center must be finite".into()));
            }
        }
        Ok(())
    }

    /// Same weights without the shape prior (`λ = η = 0`).
    pub fn without_prior(&self) -> Self {
        Self {
            lambda: 0.0,
            eta: 0.0,
            ..self.clone()
        }
    }

    /// Initial circle `(col, row, radius)` for a `width × height` image.
    pub fn init_circle(&self, width: usize, height: usize) -> (f64, f64, f64) {
        let [cx, cy] = self
            .init_center
            .unwrap_or([(width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0]);
        let r = self
            .init_radius
            .unwrap_or(DISK_FILL * width.min(height) as f64);
        (cx, cy, r)
    }
}

/// Per-term energy of the relaxed model.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Energy {
    pub fit: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub lambda: f64,
    pub eta: f64,
    pub tau: f64,
}

impl Energy {
    pub fn total(&self) -> f64 {
        self.fit
            + self.alpha
            + self.beta
            + self.gamma
            + self.delta
            + self.lambda
            + self.eta
            + self.tau
    }

    /// The terms that depend on `ν`.
    pub fn nu_part(&self) -> f64 {
        self.alpha + self.beta + self.lambda + self.eta + self.tau
    }
}

#[derive(Debug, Clone)]
pub struct SegmentationState {
    pub f: PlanarMap,
    pub mu: Vec<C64>,
    pub nu: Vec<C64>,
    pub c1: f64,
    pub c2: f64,
    /// Raster of `f(𝔻)` on the image grid.
    pub mask: Vec<bool>,
    pub energy: Energy,
    pub iteration: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub iter: usize,
    pub energy: Energy,
    pub c1: f64,
    pub c2: f64,
    pub max_abs_mu: f64,
    pub map_change: f64,
}

impl LogRow {
    pub fn to_csv(&self) -> String {
        let e = &self.energy;
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{},{:e}",
            self.iter,
            e.total(),
            e.fit,
            e.alpha,
            e.beta,
            e.gamma,
            e.delta,
            e.lambda,
            e.eta,
            e.tau,
            self.c1,
            self.c2,
            self.max_abs_mu,
            self.map_change
        )
    }
}

/// Iteration log as CSV text with a header row.
pub fn log_csv(rows: &[LogRow], converged: bool) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{LOG_HEADER}");
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv());
    }
    if !converged {
        let _ = writeln!(s, "# not converged");
    }
    s
}

#[derive(Debug, Clone)]
pub struct SegmentationResult {
    /// Boundary of `f(𝔻)` in pixel coordinates (`x = col`, `y = row`).
    pub contour: Vec<C64>,
    pub mask: Mask,
    pub log: Vec<LogRow>,
    pub converged: bool,
    pub flipped_faces: usize,
    /// Whether the final contour is a simple closed curve.
    pub simple: bool,
    pub state: SegmentationState,
    pub frame: GridFrame,
}

/// `-K f`: the Laplacian per grid step.
fn grid_laplacian(mesh: &TriMesh, f: &[f64]) -> Vec<f64> {
    mesh.stiffness().mul_vec(f).into_iter().map(|v| -v).collect()
}

fn quad_form(mesh: &TriMesh, f: &[C64]) -> f64 {
    mesh.dirichlet_energy_complex(f)
}

fn sum_sq(a: &[C64], b: Option<&[C64]>) -> f64 {
    match b {
        Some(b) => par::sum_range(a.len(), |k| (a[k] - b[k]).norm_sqr()),
        None => par::sum_range(a.len(), |k| a[k].norm_sqr()),
    }
}

/// Root mean square of a vertex difference.
fn rms(a: &[C64], b: &[C64]) -> f64 {
    (sum_sq(a, Some(b)) / a.len() as f64).sqrt()
}

/// Means of the warped image over vertices inside and outside the unit disk.
pub fn region_means(warped: &[f64], mesh: &TriMesh) -> Result<(f64, f64)> {
    let (mut s1, mut n1, mut s2, mut n2) = (0.0, 0usize, 0.0, 0usize);
    for (z, &v) in mesh.vertices().iter().zip(warped) {
        if z.norm() < 1.0 {
            s1 += v;
            n1 += 1;
        } else {
            s2 += v;
            n2 += 1;
        }
    }
    if n1 == 0 || n2 == 0 {
        return Err(Error::Empty("region with no vertices".into()));
    }
    Ok((s1 / n1 as f64, s2 / n2 as f64))
}

/// Solver for the deformation step
/// `(r + ∇I·h)∇I + γh + δKh = 0`, `h = 0` on the boundary, with the
/// two components of `h` interleaved per interior vertex.
pub struct MuSolver<'m> {
    mesh: &'m TriMesh,
    unknown: Vec<usize>,
    pattern: SpdPattern,
    /// Per pattern entry: stiffness value, vertex for diagonal blocks
    /// (`usize::MAX` otherwise) and block kind (0 xx, 1 yy, 2 yx).
    terms: Vec<(f64, usize, u8)>,
}

impl<'m> MuSolver<'m> {
    pub fn new(mesh: &'m TriMesh) -> Result<Self> {
        let mut unknown = vec![usize::MAX; mesh.n_vertices()];
        let mut n = 0;
        for (v, u) in unknown.iter_mut().enumerate() {
            if !mesh.is_boundary(v) {
                *u = n;
                n += 1;
            }
        }
        let mut entries = Vec::new();
        let mut terms = Vec::new();
        let k = mesh.stiffness();
        for v in 0..mesh.n_vertices() {
            let ur = unknown[v];
            if ur == usize::MAX {
                continue;
            }
            for (c, w) in k.row(v) {
                let uc = unknown[c];
                if uc == usize::MAX || uc > ur {
                    continue;
                }
                let diag = if uc == ur { v } else { usize::MAX };
                entries.push((2 * ur, 2 * uc));
                terms.push((w, diag, 0));
                entries.push((2 * ur + 1, 2 * uc + 1));
                terms.push((w, diag, 1));
                if uc == ur {
                    entries.push((2 * ur + 1, 2 * ur));
                    terms.push((0.0, v, 2));
                }
            }
        }
        if n == 0 {
            return Err(Error::InvalidArgument("mesh has no interior vertices".into()));
        }
        let pattern = SpdPattern::new(2 * n, &entries)?;
        Ok(Self {
            mesh,
            unknown,
            pattern,
            terms,
        })
    }

    /// Displacement field for residual `r = I - J_n` and image gradient
    /// `grad` at the vertices.
    pub fn solve(&self, residual: &[f64], grad: &[C64], gamma: f64, delta: f64) -> Result<Vec<C64>> {
        let nv = self.mesh.n_vertices();
        if residual.len() != nv || grad.len() != nv {
            return Err(Error::DimensionMismatch("residual and gradient must be vertex fields".into()));
        }
        let values: Vec<f64> = self
            .terms
            .iter()
            .map(|&(k, v, kind)| {
                let stiff = if kind == 2 { 0.0 } else { delta * k };
                if v == usize::MAX {
                    return stiff;
                }
                let g = grad[v];
                stiff
                    + match kind {
                        0 => g.re * g.re + gamma,
                        1 => g.im * g.im + gamma,
                        _ => g.re * g.im,
                    }
            })
            .collect();
        let factor = self.pattern.factor(&values)?;
        let mut rhs = vec![0.0; self.pattern.dim()];
        for v in 0..nv {
            let u = self.unknown[v];
            if u != usize::MAX {
                rhs[2 * u] = -residual[v] * grad[v].re;
                rhs[2 * u + 1] = -residual[v] * grad[v].im;
            }
        }
        let x = factor.solve(&rhs);
        Ok((0..nv)
            .map(|v| match self.unknown[v] {
                usize::MAX => C64::new(0.0, 0.0),
                u => C64::new(x[2 * u], x[2 * u + 1]),
            })
            .collect())
    }
}

/// One-shot deformation step.
pub fn solve_mu_step(
    mesh: &TriMesh,
    residual: &[f64],
    grad: &[C64],
    params: &SegParams,
) -> Result<Vec<C64>> {
    MuSolver::new(mesh)?.solve(residual, grad, params.gamma, params.delta)
}

/// `f*(v) = f(v) + h(f(v))` and its truncated coefficient.
pub fn update_map(mesh: &TriMesh, h: &[C64], f: &PlanarMap, eps: f64) -> Result<(PlanarMap, Vec<C64>)> {
    let positions = par::map_slice(&f.positions, |&p| p + mesh.interpolate(h, p));
    let f_star = PlanarMap { positions };
    let mu = qc::truncate(&qc::beltrami_from_map(mesh, &f_star), eps)?;
    Ok((f_star, mu))
}

/// Interior vertices where the data coefficient is large enough for an
/// argument to be meaningful; fixed for a whole `ν` step.
fn phase_support(mesh: &TriMesh, mu: &[C64]) -> Vec<bool> {
    (0..mu.len())
        .map(|v| !mesh.is_boundary(v) && mu[v].norm() >= ARG_FLOOR)
        .collect()
}

/// Graph Laplacian of `arg ν` over the supported vertices, with neighbour
/// differences wrapped to `(-π, π]`.
fn phase_laplacian(mesh: &TriMesh, nu: &[C64], support: &[bool]) -> Vec<f64> {
    let k = mesh.stiffness();
    par::map_range(nu.len(), |v| {
        if !support[v] {
            return 0.0;
        }
        k.row(v)
            .filter(|&(c, _)| c != v && support[c])
            .map(|(c, w)| -w * (nu[c] * nu[v].conj()).arg())
            .sum()
    })
}

/// The same graph Laplacian applied to a plain vertex field.
fn support_laplacian(mesh: &TriMesh, f: &[f64], support: &[bool]) -> Vec<f64> {
    let k = mesh.stiffness();
    par::map_range(f.len(), |v| {
        if !support[v] {
            return 0.0;
        }
        k.row(v)
            .filter(|&(c, _)| c != v && support[c])
            .map(|(c, w)| -w * (f[c] - f[v]))
            .sum()
    })
}

/// The `ν`-dependent energy terms.
pub fn nu_energy(mesh: &TriMesh, nu: &[C64], mu: &[C64], mu_b: &[C64], p: &SegParams) -> Energy {
    let eta = if p.eta == 0.0 {
        0.0
    } else {
        let lap = phase_laplacian(mesh, nu, &phase_support(mesh, mu));
        p.eta * par::sum_range(lap.len(), |k| lap[k] * lap[k])
    };
    Energy {
        alpha: p.alpha * sum_sq(nu, None),
        beta: p.beta * quad_form(mesh, nu),
        lambda: p.lambda * sum_sq(nu, Some(mu_b)),
        eta,
        tau: p.tau * sum_sq(nu, Some(mu)),
        ..Energy::default()
    }
}

/// Gradient of the `ν` energy:
/// `2[(α+λ+τ)ν − βΔν − λμ_B − τμ + η iΔ²φ/ν̄]` with `φ = arg ν`, zero on
/// the boundary where `ν` is held at 0.
pub fn nu_gradient(mesh: &TriMesh, nu: &[C64], mu: &[C64], mu_b: &[C64], p: &SegParams) -> Vec<C64> {
    nu_gradient_scaled(mesh, nu, mu, mu_b, p, false)
}

/// With `scaled`, the phase part at each vertex is multiplied by `|ν|²`, which
/// keeps it a descent direction but removes the `1/|ν|` stiffness.
fn nu_gradient_scaled(
    mesh: &TriMesh,
    nu: &[C64],
    mu: &[C64],
    mu_b: &[C64],
    p: &SegParams,
    scaled: bool,
) -> Vec<C64> {
    let (re, im): (Vec<f64>, Vec<f64>) = nu.iter().map(|z| (z.re, z.im)).unzip();
    let lap_re = grid_laplacian(mesh, &re);
    let lap_im = grid_laplacian(mesh, &im);
    let support = phase_support(mesh, mu);
    let bilap = if p.eta == 0.0 {
        None
    } else {
        let lap = phase_laplacian(mesh, nu, &support);
        Some(support_laplacian(mesh, &lap, &support))
    };
    let a = p.alpha + p.lambda + p.tau;
    par::map_range(nu.len(), |v| {
        if mesh.is_boundary(v) {
            return C64::new(0.0, 0.0);
        }
        let lap = C64::new(lap_re[v], lap_im[v]);
        let mut g = nu[v] * a - lap * p.beta - mu_b[v] * p.lambda - mu[v] * p.tau;
        if let Some(b) = &bilap {
            if support[v] {
                let n = nu[v];
                g += if scaled {
                    C64::new(0.0, p.eta * b[v]) * n
                } else {
                    let n = if n.norm() < ARG_FLOOR { C64::from_polar(ARG_FLOOR, n.arg()) } else { n };
                    C64::new(0.0, p.eta * b[v]) / n.conj()
                };
            }
        }
        g * 2.0
    })
}

#[derive(Debug, Clone)]
pub struct NuStep {
    pub nu: Vec<C64>,
    pub iterations: usize,
    pub converged: bool,
}

fn zero_boundary(mesh: &TriMesh, f: &mut [C64]) {
    for (v, z) in f.iter_mut().enumerate() {
        if mesh.is_boundary(v) {
            *z = C64::new(0.0, 0.0);
        }
    }
}

/// Truncated gradient descent on the `ν` energy starting from `μ`, with step
/// halving whenever the energy would increase.
pub fn solve_nu_step(mesh: &TriMesh, mu: &[C64], mu_b: &[C64], p: &SegParams) -> Result<NuStep> {
    let cap = 1.0 - p.eps_trunc;
    let mut nu = qc::truncate(mu, p.eps_trunc)?;
    zero_boundary(mesh, &mut nu);
    let mut e = nu_energy(mesh, &nu, mu, mu_b, p).nu_part();
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..p.inner_max {
        iterations += 1;
        let g = nu_gradient_scaled(mesh, &nu, mu, mu_b, p, true);
        let mut t = p.step_t;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let mut cand: Vec<C64> = nu.iter().zip(&g).map(|(n, g)| n - g * t).collect();
            qc::truncate_in_place(&mut cand, cap);
            zero_boundary(mesh, &mut cand);
            let ec = nu_energy(mesh, &cand, mu, mu_b, p).nu_part();
            if ec <= e {
                accepted = Some((cand, ec));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, ec)) = accepted else {
            // no descent along the gradient at any tried step
            converged = true;
            break;
        };
        let change = rms(&cand, &nu);
        nu = cand;
        e = ec;
        if change < p.tol_inner {
            converged = true;
            break;
        }
    }
    Ok(NuStep {
        nu,
        iterations,
        converged,
    })
}

/// Template value at each vertex: `c1` inside the unit disk, `c2` outside.
fn template(mesh: &TriMesh, c1: f64, c2: f64) -> Vec<f64> {
    mesh.vertices()
        .iter()
        .map(|z| if z.norm() < 1.0 { c1 } else { c2 })
        .collect()
}

/// Everything fixed for one segmentation run.
pub struct Problem {
    pub mesh: TriMesh,
    pub frame: GridFrame,
    /// Smoothed input image.
    pub image: GrayImage,
    /// Gradient of the smoothed image per grid step, at the vertices.
    pub grad: Vec<C64>,
    /// Prior coefficient on the mesh.
    pub mu_b: Vec<C64>,
    pub params: SegParams,
}

impl Problem {
    /// Normalises the domain so the initial circle becomes the unit disk.
    pub fn new(img: &GrayImage, prior: &HbsSignature, params: &SegParams) -> Result<Self> {
        params.validate()?;
        let (w, h) = (img.width(), img.height());
        let (cx, cy, r) = params.init_circle(w, h);
        let inside = cx - r >= 0.0
            && cy - r >= 0.0
            && cx + r <= (w - 1) as f64
            && cy + r <= (h - 1) as f64;
        if !inside {
            return Err(Error::InvalidArgument(format!(
                "initial circle ({cx}, {cy}, {r}) leaves the {w}x{h} image"
            )));
        }
        let frame = GridFrame::from_circle(w, h, cx, cy, r);
        let mesh = TriMesh::from_frame(frame)?;
        let image = imaging::gaussian_blur(img, SMOOTH_SIGMA);
        let scale = 1.0 / frame.px_per_unit;
        let grad = imaging::gradient(&image, &frame).into_iter().map(|g| g * scale).collect();
        let mu_b = qc::truncate(&extend_to_domain(prior, &mesh), params.eps_trunc)?;
        Ok(Self {
            mesh,
            frame,
            image,
            grad,
            mu_b,
            params: params.clone(),
        })
    }

    /// Image values at the mapped vertices `I(f(v))`.
    pub fn warped(&self, f: &PlanarMap) -> Vec<f64> {
        imaging::sample_bilinear(&self.image, &self.frame, &f.positions)
    }

    /// Full energy breakdown of a state.
    pub fn energy(&self, f: &PlanarMap, mu: &[C64], nu: &[C64], c1: f64, c2: f64) -> Energy {
        let p = &self.params;
        let warped = self.warped(f);
        let tpl = template(&self.mesh, c1, c2);
        let fit = par::sum_range(warped.len(), |k| (warped[k] - tpl[k]).powi(2));
        let u: Vec<C64> = f
            .positions
            .iter()
            .zip(self.mesh.vertices())
            .map(|(a, b)| a - b)
            .collect();
        Energy {
            fit,
            gamma: p.gamma * sum_sq(&u, None),
            delta: p.delta * quad_form(&self.mesh, &u),
            ..nu_energy(&self.mesh, nu, mu, &self.mu_b, p)
        }
    }

    /// The unrelaxed model evaluated with `μ` in place of `ν` and no prior.
    pub fn baseline_energy(&self, f: &PlanarMap, mu: &[C64], c1: f64, c2: f64) -> Energy {
        let p = &self.params;
        let full = self.energy(f, mu, mu, c1, c2);
        Energy {
            alpha: p.alpha * sum_sq(mu, None),
            beta: p.beta * quad_form(&self.mesh, mu),
            lambda: 0.0,
            eta: 0.0,
            tau: 0.0,
            ..full
        }
    }

    /// Raster of `f(𝔻)` and its boundary polyline in domain coordinates.
    pub fn region(&self, f: &PlanarMap) -> Result<qc::Region> {
        qc::invert_region(&self.mesh, f)
    }

    pub fn run(&self) -> Result<SegmentationResult> {
        let p = &self.params;
        let mesh = &self.mesh;
        let lbs = LbsSolver::new(mesh)?;
        let mu_solver = MuSolver::new(mesh)?;
        let identity = mesh.vertices();
        let nv = mesh.n_vertices();

        let mut f = PlanarMap::identity(mesh);
        let mut mu = vec![C64::new(0.0, 0.0); nv];
        let mut nu = mu.clone();
        let mut region = self.region(&f)?;
        let (mut c1, mut c2) = (0.0, 0.0);
        let mut log = Vec::new();
        let mut converged = false;

        for iter in 1..=p.outer_max {
            (c1, c2) = region_means(&self.warped(&f), mesh)?;
            let residual: Vec<f64> = (0..nv)
                .map(|v| self.image.values()[v] - if region.mask[v] { c1 } else { c2 })
                .collect();
            // the step is solved in grid units and applied in domain units
            let h: Vec<C64> = mu_solver
                .solve(&residual, &self.grad, p.gamma, p.delta)?
                .into_iter()
                .map(|d| d * mesh.spacing())
                .collect();
            let (_, mu_next) = update_map(mesh, &h, &f, p.eps_trunc)?;
            mu = mu_next;
            nu = solve_nu_step(mesh, &mu, &self.mu_b, p)?.nu;
            let f_next = lbs.solve(&nu, identity)?;
            let change = f_next.rms_distance(&f);
            f = f_next;
            region = self.region(&f)?;
            log.push(LogRow {
                iter,
                energy: self.energy(&f, &mu, &nu, c1, c2),
                c1,
                c2,
                max_abs_mu: qc::max_abs(&mu),
                map_change: change,
            });
            if change < p.tol_outer {
                converged = true;
                break;
            }
        }

        let energy = log.last().map(|r| r.energy).unwrap_or_default();
        let contour = region
            .boundary
            .iter()
            .map(|&z| {
                let (x, y) = self.frame.to_pixel(z);
                C64::new(x, y)
            })
            .collect();
        let mask = Mask::new(self.frame.width, self.frame.height, region.mask.clone())?;
        Ok(SegmentationResult {
            contour,
            mask,
            converged,
            flipped_faces: f.flipped_faces(mesh),
            simple: region.simple,
            state: SegmentationState {
                iteration: log.len(),
                f,
                mu,
                nu,
                c1,
                c2,
                mask: region.mask,
                energy,
            },
            log,
            frame: self.frame,
        })
    }
}

/// Segments `img` with the prior signature `prior`.
pub fn segment(img: &GrayImage, prior: &HbsSignature, params: &SegParams) -> Result<SegmentationResult> {
    Problem::new(img, prior, params)?.run()
}
