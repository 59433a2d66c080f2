use super::*;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::FRAC_1_SQRT_2;

fn lam(l: f64) -> Wavelength {
    Wavelength::new(l).unwrap()
}

fn centered(z: f64, half: f64, n: usize) -> TransverseGrid {
    TransverseGrid::new(z, 0.0, half, n).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

fn random_dense(rng: &mut ChaCha8Rng, grid_in: &TransverseGrid, grid_out: &TransverseGrid) -> Kernel {
    let data = random_vec(rng, grid_in.len() * grid_out.len());
    Kernel {
        input: grid_in.clone(),
        output: grid_out.clone(),
        matrix: KernelMatrix::Dense(Array2::from_shape_vec((grid_out.len(), grid_in.len()), data).unwrap()),
        path_length: 0.0,
        wavelength: lam(0.5e-6),
        sampling: Vec::new(),
    }
}

fn rel_l2(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    (num / den).sqrt()
}

fn on_axis(kernel: &Kernel) -> Complex64 {
    let i = kernel.output_grid().nearest(0.0).unwrap();
    let j = kernel.input_grid().nearest(0.0).unwrap();
    kernel.matrix().get(i, j)
}

#[test]
fn free_space_on_axis_magnitude() {
    let g_in = centered(0.0, 1e-6, 3);
    let g_out = centered(1.0, 1e-6, 3);
    let k = free_space_kernel(&g_in, &g_out, lam(0.5e-6)).unwrap();
    assert_relative_eq!(on_axis(&k).norm() / g_in.spacing(), 2.0e6, max_relative = 1e-12);
    assert_eq!(k.path_length(), 1.0);
}

#[test]
fn free_space_phase_at_integer_wavelengths() {
    let l = 0.5e-6;
    let g_in = centered(0.0, 1e-6, 3);
    let g_out = centered(2_000_000.0 * l, 1e-6, 3);
    let k = free_space_kernel(&g_in, &g_out, lam(l)).unwrap();
    let phase = on_axis(&k).arg();
    assert!((phase + PI / 2.0).abs() < 1e-12, "phase {phase}");
}

#[test]
fn free_space_doubling_gap_halves_magnitude() {
    let g_in = centered(0.0, 1e-6, 3);
    let a = free_space_kernel(&g_in, &centered(0.7, 1e-6, 3), lam(0.5e-6)).unwrap();
    let b = free_space_kernel(&g_in, &centered(1.4, 1e-6, 3), lam(0.5e-6)).unwrap();
    assert!((on_axis(&b).norm() / on_axis(&a).norm() - 0.5).abs() < 1e-12);
}

#[test]
fn non_forward_geometry_is_rejected() {
    let g = centered(1.0, 1e-6, 3);
    for z in [1.0, 0.5] {
        let out = centered(z, 1e-6, 3);
        assert!(matches!(
            free_space_kernel(&g, &out, lam(0.5e-6)),
            Err(Error::InvalidGeometry(_))
        ));
        assert!(matches!(
            fresnel_kernel(&g, &out, lam(0.5e-6)),
            Err(Error::InvalidGeometry(_))
        ));
    }
}

#[test]
fn fresnel_matches_exact_under_paraxial_offsets() {
    let z = 0.01;
    // offsets up to 100 µm = z/100
    let g_in = centered(0.0, 50e-6, 41);
    let g_out = centered(z, 50e-6, 41);
    let exact = free_space_kernel(&g_in, &g_out, lam(0.5e-6)).unwrap();
    let fres = fresnel_kernel(&g_in, &g_out, lam(0.5e-6)).unwrap();
    let (e, f) = (exact.matrix().to_dense(), fres.matrix().to_dense());
    let worst = e
        .iter()
        .zip(&f)
        .map(|(a, b)| (a - b).norm() / a.norm())
        .fold(0.0, f64::max);
    assert!(worst < 1e-3, "worst relative entry error {worst:e}");
    assert_eq!(on_axis(&exact).norm(), on_axis(&fres).norm());
}

#[test]
fn fresnel_phase_at_fresnel_length() {
    let (l, z): (f64, f64) = (0.5e-6, 0.2);
    let a = (l * z).sqrt();
    let g_in = TransverseGrid::from_samples(0.0, &[0.0, a]).unwrap();
    let g_out = TransverseGrid::from_samples(z, &[0.0, a]).unwrap();
    let k = fresnel_kernel(&g_in, &g_out, lam(l)).unwrap();
    let rel = k.matrix().get(1, 0) / k.matrix().get(0, 0);
    assert!((rel - Complex64::new(-1.0, 0.0)).norm() < 1e-9, "{rel}");
}

#[test]
fn cylindrical_wavelet_has_square_root_decay() {
    let g_in = centered(0.0, 1e-6, 3);
    let a = diffraction_kernel(
        &g_in,
        &centered(1.0, 1e-6, 3),
        lam(0.5e-6),
        Propagator::Exact,
        Wavelet::Cylindrical,
    )
    .unwrap();
    let b = diffraction_kernel(
        &g_in,
        &centered(4.0, 1e-6, 3),
        lam(0.5e-6),
        Propagator::Exact,
        Wavelet::Cylindrical,
    )
    .unwrap();
    assert_relative_eq!(
        on_axis(&a).norm() / g_in.spacing(),
        (1.0 / 0.5e-6f64).sqrt(),
        max_relative = 1e-12
    );
    assert_relative_eq!(on_axis(&b).norm() / on_axis(&a).norm(), 0.5, max_relative = 1e-12);
}

#[test]
fn lens_entries() {
    let (l, f): (f64, f64) = (0.5e-6, 0.2);
    let a = (l * f).sqrt();
    let g = TransverseGrid::from_samples(0.0, &[0.0, a]).unwrap();
    let k = lens_kernel(&g, f, lam(l)).unwrap();
    assert_eq!(k.matrix().get(0, 0), Complex64::new(1.0, 0.0));
    assert!((k.matrix().get(1, 1) + 1.0).norm() < 1e-12);
    assert_eq!(k.path_length(), 0.0);
    assert!(matches!(lens_kernel(&g, 0.0, lam(l)), Err(Error::InvalidArgument(_))));
}

#[test]
fn opposite_lenses_cancel() {
    let g = centered(0.3, 5e-3, 257);
    let a = lens_kernel(&g, 0.15, lam(0.8e-6)).unwrap();
    let b = lens_kernel(&g, -0.15, lam(0.8e-6)).unwrap();
    let c = compose(&a, &b).unwrap();
    for i in 0..g.len() {
        assert!((c.matrix().get(i, i) - 1.0).norm() < 1e-12);
    }
}

#[test]
fn double_slit_mask_kernel() {
    let g = TransverseGrid::new(0.0, 0.0, 299.5e-6, 600).unwrap();
    let m = MaskSpec::double_slit(200e-6, 10e-6, 0.0, 0.0);
    let k = mask_kernel(&g, &m, lam(0.5e-6)).unwrap();
    let mut open = 0;
    for (i, x) in g.samples().enumerate() {
        let t = k.matrix().get(i, i);
        let inside = (x.abs() - 100e-6).abs() < 5e-6;
        assert_eq!(t, Complex64::new(if inside { 1.0 } else { 0.0 }, 0.0), "x = {x:e}");
        open += inside as usize;
    }
    assert_eq!(open, 20);
}

#[test]
fn opaque_mask_blocks_everything() {
    let g = centered(0.0, 1e-4, 64);
    let m = MaskSpec::tabulated(&vec![Complex64::new(0.0, 0.0); 64]);
    let k = mask_kernel(&g, &m, lam(0.5e-6)).unwrap();
    assert!(k.matrix().to_dense().iter().all(|c| c.norm() == 0.0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let out = k.apply(&random_vec(&mut rng, 64)).unwrap();
    assert_eq!(crate::grid::vector_norm(&g, &out), 0.0);
    let short = MaskSpec::tabulated(&vec![Complex64::new(0.0, 0.0); 63]);
    assert!(matches!(
        mask_kernel(&g, &short, lam(0.5e-6)),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn phase_only_mask_is_unimodular() {
    let g = centered(0.0, 1e-3, 101);
    let m = MaskSpec::PhaseOnly {
        phase_rad: 0.4,
        tilt_rad_per_m: 3e3,
        curvature_rad_per_m2: -2e7,
    };
    let k = mask_kernel(&g, &m, lam(0.5e-6)).unwrap();
    for i in 0..g.len() {
        assert!((k.matrix().get(i, i).norm() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn compose_with_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = centered(0.0, 1e-4, 17);
    let b = centered(0.0, 2e-4, 23);
    let k = random_dense(&mut rng, &a, &b);
    let c = compose(&k, &Kernel::identity(&b, lam(0.5e-6))).unwrap();
    assert_eq!(c.matrix().to_dense(), k.matrix().to_dense());
    let c = compose(&Kernel::identity(&a, lam(0.5e-6)), &k).unwrap();
    assert_eq!(c.matrix().to_dense(), k.matrix().to_dense());
}

#[test]
fn compose_rejects_mismatched_grids() {
    let a = free_space_kernel(&centered(0.0, 1e-4, 8), &centered(0.1, 1e-4, 8), lam(0.5e-6)).unwrap();
    let b = free_space_kernel(&centered(0.1, 1e-4, 9), &centered(0.2, 1e-4, 8), lam(0.5e-6)).unwrap();
    assert!(matches!(compose(&a, &b), Err(Error::InvalidGeometry(_))));
    let c = free_space_kernel(&centered(0.1, 1e-4, 8), &centered(0.2, 1e-4, 8), lam(0.6e-6)).unwrap();
    assert!(matches!(compose(&a, &c), Err(Error::InvalidGeometry(_))));
}

#[test]
fn compose_is_associative() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let grids = [
        centered(0.0, 1e-4, 13),
        centered(0.0, 2e-4, 19),
        centered(0.0, 3e-4, 11),
        centered(0.0, 4e-4, 16),
    ];
    for _ in 0..5 {
        let a = random_dense(&mut rng, &grids[0], &grids[1]);
        let b = random_dense(&mut rng, &grids[1], &grids[2]);
        let c = random_dense(&mut rng, &grids[2], &grids[3]);
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        assert!(rel_l2(&left.matrix().to_dense(), &right.matrix().to_dense()) < 1e-12);
        let chain = compose_chain(&[a, b, c]).unwrap();
        assert!(rel_l2(&chain.matrix().to_dense(), &left.matrix().to_dense()) < 1e-12);
    }
}

#[test]
fn diagonal_and_dense_compositions_agree() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let g = centered(0.0, 1e-4, 12);
    let h = centered(0.0, 1e-4, 9);
    let dense = random_dense(&mut rng, &g, &h);
    let lens = lens_kernel(&h, 0.05, lam(0.5e-6)).unwrap();
    let lens_in = lens_kernel(&g, 0.05, lam(0.5e-6)).unwrap();
    let as_dense = |k: &Kernel| Kernel {
        matrix: KernelMatrix::Dense(k.matrix().to_dense()),
        ..k.clone()
    };
    let fast = compose(&lens_in, &compose(&dense, &lens).unwrap()).unwrap();
    let slow = compose(&as_dense(&lens_in), &compose(&dense, &as_dense(&lens)).unwrap()).unwrap();
    assert!(rel_l2(&fast.matrix().to_dense(), &slow.matrix().to_dense()) < 1e-14);
}

#[test]
fn free_space_semigroup() {
    let l = lam(0.5e-6);
    let (z1, z2) = (2e-3, 3e-3);
    let g_in = centered(0.0, 40e-6, 321);
    let g_out = centered(z1 + z2, 40e-6, 321);
    // the intermediate plane must hold every stationary point plus the
    // chirp tails, and sample them finely
    let g_mid = centered(z1, 1.5e-3, 15001);
    let k1 = diffraction_kernel(&g_in, &g_mid, l, Propagator::Exact, Wavelet::Cylindrical).unwrap();
    let k2 = diffraction_kernel(&g_mid, &g_out, l, Propagator::Exact, Wavelet::Cylindrical).unwrap();
    assert!(!k1.aliased() && !k2.aliased());
    let direct = diffraction_kernel(&g_in, &g_out, l, Propagator::Exact, Wavelet::Cylindrical).unwrap();
    let composed = compose(&k1, &k2).unwrap();
    assert_eq!(composed.path_length(), z1 + z2);
    let err = rel_l2(&composed.matrix().to_dense(), &direct.matrix().to_dense());
    assert!(err < 1e-2, "semigroup error {err:e}");
}

#[test]
fn kernels_are_linear() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let g_in = centered(0.0, 1e-4, 40);
    let g_out = centered(0.05, 2e-4, 30);
    let kernels = [
        free_space_kernel(&g_in, &g_out, lam(0.5e-6)).unwrap(),
        fresnel_kernel(&g_in, &g_out, lam(0.5e-6)).unwrap(),
        lens_kernel(&g_in, 0.1, lam(0.5e-6)).unwrap(),
        mask_kernel(&g_in, &MaskSpec::double_slit(1e-4, 2e-5, 0.0, 0.3), lam(0.5e-6)).unwrap(),
    ];
    for k in &kernels {
        let u = random_vec(&mut rng, 40);
        let v = random_vec(&mut rng, 40);
        let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-0.7, 0.4));
        let mix: Vec<_> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
        let lhs = k.apply(&mix).unwrap();
        let (ku, kv) = (k.apply(&u).unwrap(), k.apply(&v).unwrap());
        let scale: f64 = lhs.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for i in 0..lhs.len() {
            assert!((lhs[i] - (a * ku[i] + b * kv[i])).norm() <= 1e-12 * scale);
        }
    }
}

#[test]
fn apply_checks_length() {
    let k = lens_kernel(&centered(0.0, 1e-4, 10), 0.1, lam(0.5e-6)).unwrap();
    assert!(k.apply(&[Complex64::new(1.0, 0.0); 9]).is_err());
}

#[test]
fn undersampled_kernel_is_flagged() {
    let l = lam(0.5e-6);
    // 10 µm steps over ±1 mm at 1 cm: phase step ≈ k·Δ·0.2 ≈ 25 rad
    let coarse = diffraction_sampling(
        &centered(0.0, 1e-3, 201),
        &centered(0.01, 1e-3, 201),
        l,
        Propagator::Exact,
    )
    .unwrap();
    assert!(coarse.aliased);
    let k = free_space_kernel(&centered(0.0, 1e-3, 201), &centered(0.01, 1e-3, 201), l).unwrap();
    assert!(k.aliased());
    let fine = free_space_kernel(&centered(0.0, 1e-5, 201), &centered(0.01, 1e-5, 201), l).unwrap();
    assert!(!fine.aliased());
    assert!(fine.sampling()[0].max_phase_step_rad < PI);
}

#[test]
fn balanced_paths_cancel() {
    let k = free_space_kernel(&centered(0.0, 1e-4, 8), &centered(0.1, 1e-4, 8), lam(0.5e-6)).unwrap();
    let w = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let set = PathSet::new(vec![(k.clone(), w), (k.clone(), -w)]).unwrap();
    assert_eq!(set.len(), 2);
    assert!(set
        .effective_kernel()
        .matrix()
        .to_dense()
        .iter()
        .all(|c| c.norm() < 1e-15));

    let set = PathSet::new(vec![(k.clone(), w), (k.clone(), w)]).unwrap();
    let expected = k.matrix().to_dense().mapv(|c| c * 2f64.sqrt());
    assert!(rel_l2(&set.effective_kernel().matrix().to_dense(), &expected) < 1e-15);
    assert_eq!(set.path_lengths(), vec![0.1, 0.1]);
}

#[test]
fn path_set_consistency() {
    let a = free_space_kernel(&centered(0.0, 1e-4, 8), &centered(0.1, 1e-4, 8), lam(0.5e-6)).unwrap();
    let b = free_space_kernel(&centered(0.0, 1e-4, 8), &centered(0.1, 1e-4, 9), lam(0.5e-6)).unwrap();
    let one = Complex64::new(1.0, 0.0);
    assert!(matches!(PathSet::new(vec![]), Err(Error::InvalidArgument(_))));
    assert!(matches!(
        PathSet::new(vec![(a, one), (b, one)]),
        Err(Error::InvalidGeometry(_))
    ));
}

#[test]
fn interferometer_arm_weights() {
    let l = lam(0.5e-6);
    let g = centered(0.0, 299.5e-6, 600);
    let m1 = mask_kernel(&g, &MaskSpec::double_slit(200e-6, 10e-6, -100e-6, 0.0), l).unwrap();
    let m2 = mask_kernel(&g, &MaskSpec::double_slit(200e-6, 10e-6, 100e-6, 0.0), l).unwrap();
    let w = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let set = PathSet::new(vec![(m1.clone(), -w), (m2.clone(), w)]).unwrap();
    let sum = set.effective_kernel();
    for i in 0..g.len() {
        let expected = (m2.matrix().get(i, i) - m1.matrix().get(i, i)) * FRAC_1_SQRT_2;
        assert_eq!(sum.matrix().get(i, i), expected);
    }
    assert_eq!(set.paths()[0].matrix().get(300, 300), -w * m1.matrix().get(300, 300));
}
