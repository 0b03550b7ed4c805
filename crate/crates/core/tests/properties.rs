use std::f64::consts::{PI, TAU};

use proptest::prelude::*;
use qcseg_core::geometry;
use qcseg_core::hbs::{is_normalized, normalize_hbs, HbsSignature};
use qcseg_core::imaging::{add_gaussian_noise, gradient, sample_bilinear, snr_db, GrayImage};
use qcseg_core::mesh::{GridFrame, TriMesh};
use qcseg_core::metrics::{dice, jaccard, Mask};
use qcseg_core::qc::{dilation, lbs_solve, truncate};
use qcseg_core::segmentation::{nu_energy, solve_nu_step, SegParams};
use qcseg_core::C64;

fn complex(max: f64) -> impl Strategy<Value = C64> {
    (0.0..max, -PI..PI).prop_map(|(r, t)| C64::from_polar(r, t))
}

fn affine() -> impl Strategy<Value = (C64, C64, C64)> {
    (complex(3.0), complex(3.0), complex(3.0))
}

/// Smooth coefficient `Σ a_k e^{i(k·x)}` scaled to `sup = amp`.
fn smooth_field(mesh: &TriMesh, coeffs: &[(C64, f64, f64)], amp: f64) -> Vec<C64> {
    let raw: Vec<C64> = mesh
        .vertices()
        .iter()
        .map(|z| {
            coeffs
                .iter()
                .map(|&(a, kx, ky)| a * C64::from_polar(1.0, kx * z.re + ky * z.im))
                .sum()
        })
        .collect();
    let sup = raw.iter().map(|c| c.norm()).fold(0.0, f64::max).max(1e-12);
    raw.into_iter().map(|c| c * (amp / sup)).collect()
}

fn waves() -> impl Strategy<Value = Vec<(C64, f64, f64)>> {
    prop::collection::vec((complex(1.0), -3.0..3.0f64, -3.0..3.0f64), 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn face_derivatives_exact_on_affine_maps((a, b, c) in affine()) {
        let mesh = TriMesh::for_image(9, 7).unwrap();
        let f: Vec<C64> = mesh.vertices().iter().map(|&z| a * z + b * z.conj() + c).collect();
        let (dz, dzb) = mesh.face_derivatives(&f);
        for (p, q) in dz.iter().zip(&dzb) {
            prop_assert!((p - a).norm() < 1e-12);
            prop_assert!((q - b).norm() < 1e-12);
        }
    }

    #[test]
    fn face_to_vertex_preserves_constants(c in complex(5.0)) {
        let mesh = TriMesh::for_image(8, 11).unwrap();
        let out = mesh.face_to_vertex(&vec![c; mesh.n_faces()]);
        prop_assert!(out.iter().all(|v| (v - c).norm() <= 1e-14 * (1.0 + c.norm())));
    }

    #[test]
    fn laplacian_annihilates_affine_fields(a in -3.0..3.0f64, b in -3.0..3.0f64, c in -3.0..3.0f64) {
        let mesh = TriMesh::for_image(10, 12).unwrap();
        let f: Vec<f64> = mesh.vertices().iter().map(|z| a * z.re + b * z.im + c).collect();
        let lap = mesh.laplacian(&f);
        for v in (0..mesh.n_vertices()).filter(|&v| !mesh.is_boundary(v)) {
            prop_assert!(lap[v].abs() < 1e-9, "{}", lap[v]);
        }
    }

    #[test]
    fn truncation_keeps_arguments(mu in prop::collection::vec(complex(3.0), 1..40), eps in 0.001..0.5f64) {
        let t = truncate(&mu, eps).unwrap();
        for (a, b) in mu.iter().zip(&t) {
            prop_assert!(b.norm() <= a.norm() + 1e-15);
            prop_assert!(b.norm() <= 1.0 - eps + 1e-15);
            if b.norm() > 0.0 {
                prop_assert!((b.arg() - a.arg()).abs() < 1e-12);
            }
        }
        let bound = (2.0 - eps) / eps;
        prop_assert!(dilation(&t).unwrap().iter().all(|&k| k <= bound * (1.0 + 1e-12)));
    }

    #[test]
    fn lbs_map_has_no_flipped_faces(w in waves(), amp in 0.05..0.98f64) {
        let mesh = TriMesh::square(24, 1.0).unwrap();
        let nu = smooth_field(&mesh, &w, amp);
        let f = lbs_solve(&mesh, &nu, mesh.vertices()).unwrap();
        prop_assert_eq!(f.flipped_faces(&mesh), 0);
    }

    #[test]
    fn normalisation_is_idempotent(w in waves(), amp in 0.05..0.6f64) {
        let b = HbsSignature::from_fn(33, |z| {
            w.iter().map(|&(a, kx, ky)| a * C64::from_polar(1.0, kx * z.re + ky * z.im)).sum::<C64>() * (amp / 3.0)
        }).unwrap();
        let once = normalize_hbs(&b);
        let twice = normalize_hbs(&once);
        prop_assert!(is_normalized(&once, 1e-3));
        prop_assert!(once.sup_distance(&twice).unwrap() <= 1e-6);
    }

    #[test]
    fn nu_step_never_increases_the_energy(w1 in waves(), w2 in waves(), eta in 0.0..10.0f64, lambda in 0.0..5.0f64) {
        let mesh = TriMesh::for_image(16, 14).unwrap();
        let mut mu = smooth_field(&mesh, &w1, 0.7);
        let mut mu_b = smooth_field(&mesh, &w2, 0.5);
        for v in 0..mesh.n_vertices() {
            if mesh.is_boundary(v) {
                mu[v] = C64::new(0.0, 0.0);
                mu_b[v] = C64::new(0.0, 0.0);
            }
        }
        let p = SegParams { eta, lambda, ..SegParams::default() };
        let step = solve_nu_step(&mesh, &mu, &mu_b, &p).unwrap();
        let before = nu_energy(&mesh, &mu, &mu, &mu_b, &p).nu_part();
        let after = nu_energy(&mesh, &step.nu, &mu, &mu_b, &p).nu_part();
        prop_assert!(after <= before * (1.0 + 1e-12), "{after} > {before}");
        prop_assert!(step.nu.iter().all(|n| n.norm() <= 1.0 - p.eps_trunc + 1e-12));
    }

    #[test]
    fn bilinear_sampling_is_exact(a in 0.0..0.25f64, b in 0.0..0.25f64, c in 0.0..0.25f64, d in 0.0..0.25f64,
                                  pts in prop::collection::vec((0.0..15.0f64, 0.0..11.0f64), 1..20)) {
        let v = |x: f64, y: f64| a + b * x / 15.0 + c * y / 11.0 + d * x * y / 165.0;
        let img = GrayImage::from_fn(16, 12, |x, y| v(x as f64, y as f64)).unwrap();
        let frame = GridFrame::centered(16, 12, 5.0);
        let zs: Vec<C64> = pts.iter().map(|&(x, y)| frame.to_domain(x, y)).collect();
        for (s, &(x, y)) in sample_bilinear(&img, &frame, &zs).iter().zip(&pts) {
            prop_assert!((s - v(x, y)).abs() < 1e-12);
        }
    }

    #[test]
    fn ramp_gradient_is_constant(a in -0.02..0.02f64, b in -0.02..0.02f64) {
        let img = GrayImage::from_fn(20, 20, |x, y| 0.5 + a * (x as f64 - 10.0) + b * (y as f64 - 10.0)).unwrap();
        let frame = GridFrame::centered(20, 20, 4.0);
        let g = gradient(&img, &frame);
        let expect = C64::new(a * 4.0, -b * 4.0);
        for r in 1..19 {
            for c in 1..19 {
                prop_assert!((g[r * 20 + c] - expect).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn noise_is_reproducible(seed in any::<u64>(), var in 0.0001..0.05f64) {
        let img = GrayImage::from_fn(24, 24, |x, y| ((x + y) % 7) as f64 / 7.0).unwrap();
        let (a, snr_a) = add_gaussian_noise(&img, 0.0, var, seed).unwrap();
        let (b, snr_b) = add_gaussian_noise(&img, 0.0, var, seed).unwrap();
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(snr_a.to_bits(), snr_b.to_bits());
        let (louder, _) = add_gaussian_noise(&img, 0.0, var * 4.0, seed).unwrap();
        prop_assert!(snr_db(&img, &louder) < snr_db(&img, &a));
    }

    #[test]
    fn overlap_scores_are_symmetric(xs in prop::collection::vec(any::<bool>(), 64), ys in prop::collection::vec(any::<bool>(), 64)) {
        let a = Mask::new(8, 8, xs).unwrap();
        let b = Mask::new(8, 8, ys).unwrap();
        for s in [dice(&a, &b).unwrap(), jaccard(&a, &b).unwrap()] {
            prop_assert!((0.0..=1.0).contains(&s));
        }
        prop_assert_eq!(dice(&a, &b).unwrap(), dice(&b, &a).unwrap());
        prop_assert_eq!(jaccard(&a, &b).unwrap(), jaccard(&b, &a).unwrap());
    }

    #[test]
    fn hausdorff_is_a_metric(sets in prop::collection::vec(prop::collection::vec(complex(10.0), 1..12), 3)) {
        let (a, b, c) = (&sets[0], &sets[1], &sets[2]);
        let d = |x: &[C64], y: &[C64]| geometry::hausdorff(x, y).unwrap();
        prop_assert_eq!(d(a, a), 0.0);
        prop_assert_eq!(d(a, b), d(b, a));
        prop_assert!(d(a, c) <= d(a, b) + d(b, c) + 1e-12);
        prop_assert!(d(a, b) >= 0.0);
    }
}

#[test]
fn welding_of_random_star_shapes_is_monotone() {
    use qcseg_core::hbs::zip_contour;
    use qcseg_core::hbs::zipper::check_monotone;
    for seed in 0..6u32 {
        let s = seed as f64;
        let pts: Vec<C64> = (0..256)
            .map(|k| {
                let t = TAU * k as f64 / 256.0;
                let r = 1.0 + 0.25 * (3.0 * t + s).sin() + 0.1 * ((5.0 + s) * t).cos();
                C64::from_polar(r, t)
            })
            .collect();
        let pts = geometry::resample_closed(&pts, 256);
        let maps = zip_contour(&pts).unwrap();
        check_monotone(&maps.interior_angles()).unwrap();
        check_monotone(&maps.exterior_angles()).unwrap();
        let w = maps.welding().unwrap();
        let t = w.targets();
        assert!(t.windows(2).all(|p| p[1] > p[0]), "seed {seed}");
    }
}
