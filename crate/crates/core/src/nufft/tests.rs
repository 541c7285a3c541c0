use super::*;
use crate::fft::fft2;
use crate::testutil::{random_image, random_samples, random_trajectory, rel_l2};
use crate::trajectory::{cartesian_full, radial, spiral};
use crate::types::inner_product;

fn one() -> Complex64 {
    Complex64::new(1.0, 0.0)
}

#[test]
fn ndft_zero_frequency_is_pixel_sum() {
    let x = random_image(5, 7, 1);
    let traj = Trajectory::new(vec![[0.0, 0.0]]).unwrap();
    let y = ndft_forward(&x, &traj);
    let sum: Complex64 = x.data().iter().sum();
    assert!((y.values()[0] - sum).norm() < 1e-13);
}

#[test]
fn ndft_of_centered_delta_is_all_ones() {
    let mut x = ComplexImage::zeros(6, 6);
    x.set(3, 3, one());
    let y = ndft_forward(&x, &random_trajectory(40, 2));
    assert!(y.values().iter().all(|v| (v - one()).norm() < 1e-15));
}

#[test]
fn ndft_on_cartesian_nodes_matches_fft() {
    let n = 8;
    let x = random_image(n, n, 3);
    let traj = cartesian_full(n, n).unwrap();
    let y = ndft_forward(&x, &traj);

    // Shift the image so the centered origin lands on index 0, then FFT.
    let mut shifted = ComplexImage::zeros(n, n);
    for r in 0..n {
        for c in 0..n {
            shifted.set((r + n / 2) % n, (c + n / 2) % n, x.get(r, c));
        }
    }
    let fx = fft2(&shifted, crate::fft::Direction::Forward);
    let expected: Vec<Complex64> = (0..n)
        .flat_map(|p| (0..n).map(move |q| (p, q)))
        .map(|(p, q)| fx.get((p + n / 2) % n, (q + n / 2) % n))
        .collect();
    assert!(rel_l2(y.values(), &expected) < 1e-12);
}

#[test]
fn ndft_adjoint_basics() {
    let traj = Trajectory::new(vec![[0.0, 0.0]]).unwrap();
    let y = KSpaceSamples::new(vec![one()]).unwrap();
    let img = ndft_adjoint(&y, &traj, (3, 4)).unwrap();
    assert!(img.data().iter().all(|v| (v - one()).norm() < 1e-15));

    let t = random_trajectory(10, 4);
    let zero = ndft_adjoint(&KSpaceSamples::zeros(10), &t, (4, 4)).unwrap();
    assert!(zero.data().iter().all(|v| v.norm() == 0.0));

    assert!(matches!(
        ndft_adjoint(&KSpaceSamples::zeros(3), &t, (4, 4)),
        Err(Error::Dimension { .. })
    ));
}

#[test]
fn ndft_adjoint_identity() {
    let traj = random_trajectory(30, 5);
    let x = random_image(6, 5, 6);
    let y = random_samples(30, 7);
    let lhs = inner_product(ndft_forward(&x, &traj).values(), y.values()).unwrap();
    let rhs = inner_product(x.data(), ndft_adjoint(&y, &traj, (6, 5)).unwrap().data()).unwrap();
    assert!((lhs - rhs).norm() / lhs.norm() < 1e-12);
}

#[test]
fn plan_on_cartesian_grid_is_well_posed() {
    let plan = make_plan(&cartesian_full(16, 16).unwrap(), 16, 16, 2.0, 6).unwrap();
    assert_eq!(plan.oversampled_shape(), (32, 32));
    for i in 0..plan.n_samples() {
        let total: f64 = plan.interpolation(i).map(|(_, w)| w).sum();
        assert!(total > 0.0);
        assert!(plan.interpolation(i).all(|(g, _)| g < 32 * 32));
    }
    assert!(plan.deapodization().iter().all(|&d| d > 0.0));
}

#[test]
fn plan_parameter_errors() {
    let t = random_trajectory(4, 8);
    assert!(matches!(
        make_plan(&t, 8, 8, 1.2, 6),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        make_plan(&t, 8, 8, 2.0, 1),
        Err(Error::Parameter(_))
    ));
    assert!(matches!(
        make_plan(&t, 0, 8, 2.0, 6),
        Err(Error::Parameter(_))
    ));
    assert!(make_plan(&t, 8, 8, 1.25, 2).is_ok());
}

#[test]
fn trajectory_with_upper_boundary_is_domain_error() {
    // The trajectory type already refuses +0.5, which is what protects the plan.
    assert!(matches!(
        Trajectory::new(vec![[0.5, 0.0]]),
        Err(Error::Domain { index: 0, .. })
    ));
}

#[test]
fn forward_matches_oracle_on_random_samples() {
    let traj = random_trajectory(500, 9);
    let x = random_image(32, 32, 10);
    let plan = make_plan(&traj, 32, 32, 2.0, 6).unwrap();
    let err = rel_l2(
        plan.forward(&x).unwrap().values(),
        ndft_forward(&x, &traj).values(),
    );
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn forward_matches_oracle_on_radial() {
    let traj = radial(8, 32).unwrap();
    let x = random_image(16, 16, 11);
    let plan = make_plan(&traj, 16, 16, 2.0, 6).unwrap();
    let err = rel_l2(
        plan.forward(&x).unwrap().values(),
        ndft_forward(&x, &traj).values(),
    );
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn forward_matches_oracle_on_odd_rectangular_grid() {
    let traj = spiral(3, 50, 1.5).unwrap();
    let x = random_image(13, 20, 12);
    let plan = make_plan(&traj, 13, 20, 2.0, 6).unwrap();
    let err = rel_l2(
        plan.forward(&x).unwrap().values(),
        ndft_forward(&x, &traj).values(),
    );
    assert!(err <= 1e-5, "relative error {err}");
}

#[test]
fn error_decreases_with_kernel_width() {
    let traj = random_trajectory(300, 13);
    let x = random_image(16, 16, 14);
    let exact = ndft_forward(&x, &traj);
    let errors: Vec<f64> = (2..=6)
        .map(|j| {
            let plan = make_plan(&traj, 16, 16, 2.0, j).unwrap();
            rel_l2(plan.forward(&x).unwrap().values(), exact.values())
        })
        .collect();
    assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
}

#[test]
fn forward_zero_and_linearity() {
    let plan = make_plan(&radial(6, 20).unwrap(), 12, 12, 2.0, 6).unwrap();
    let zero = plan.forward(&ComplexImage::zeros(12, 12)).unwrap();
    assert!(zero.values().iter().all(|v| v.norm() == 0.0));

    let x = random_image(12, 12, 15);
    let fx = plan.forward(&x).unwrap();
    let f2x = plan.forward(&x.scaled(2.0)).unwrap();
    for (a, b) in fx.values().iter().zip(f2x.values()) {
        assert_eq!(a * 2.0, *b);
    }
}

#[test]
fn shape_and_length_errors() {
    let plan = make_plan(&radial(2, 4).unwrap(), 8, 8, 2.0, 4).unwrap();
    assert!(matches!(
        plan.forward(&ComplexImage::zeros(8, 4)),
        Err(Error::Shape { .. })
    ));
    assert!(matches!(
        plan.adjoint(&KSpaceSamples::zeros(7)),
        Err(Error::Dimension {
            expected: 8,
            got: 7
        })
    ));
}

fn adjoint_gap(plan: &NufftPlan, seed: u64) -> f64 {
    let (h, w) = plan.grid_shape();
    let x = random_image(h, w, seed);
    let y = random_samples(plan.n_samples(), seed + 1000);
    let fx = plan.forward(&x).unwrap();
    let fhy = plan.adjoint(&y).unwrap();
    let lhs = inner_product(fx.values(), y.values()).unwrap();
    let rhs = inner_product(x.data(), fhy.data()).unwrap();
    (lhs - rhs).norm() / (fx.norm() * y.norm())
}

#[test]
fn adjoint_identity_all_trajectory_kinds() {
    let trajs = [
        radial(10, 24).unwrap(),
        spiral(4, 60, 0.5).unwrap(),
        cartesian_full(10, 14).unwrap(),
        random_trajectory(150, 16),
    ];
    for (i, traj) in trajs.iter().enumerate() {
        let (h, w) = if i == 2 { (10, 14) } else { (12, 9) };
        for norm in [Normalization::None, Normalization::Ortho] {
            let opts = NufftOptions {
                normalization: norm,
                ..Default::default()
            };
            let plan = NufftPlan::new(traj.clone(), (h, w), opts).unwrap();
            for s in 0..5 {
                let gap = adjoint_gap(&plan, 100 * i as u64 + s);
                assert!(gap <= 1e-10, "traj {i} seed {s}: {gap}");
            }
        }
    }
}

#[test]
fn adjoint_of_zero_is_zero() {
    let plan = make_plan(&radial(3, 8).unwrap(), 8, 8, 2.0, 6).unwrap();
    let img = plan.adjoint(&KSpaceSamples::zeros(24)).unwrap();
    assert!(img.data().iter().all(|v| v.norm() == 0.0));
}

#[test]
fn point_spread_peaks_at_center() {
    let n = 16;
    let traj = radial(40, 32).unwrap();
    let mut delta = ComplexImage::zeros(n, n);
    delta.set(n / 2, n / 2, one());
    let y = ndft_forward(&delta, &traj);
    let plan = make_plan(&traj, n, n, 2.0, 6).unwrap();
    let psf = plan.adjoint(&y).unwrap().magnitude();
    let argmax = psf
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap()
        .0;
    assert_eq!(argmax, (n / 2) * n + n / 2);
}

#[test]
fn ortho_scaling_relates_to_unnormalized() {
    let traj = radial(5, 16).unwrap();
    let raw = make_plan(&traj, 8, 8, 2.0, 6).unwrap();
    let ortho = NufftPlan::new(
        traj,
        (8, 8),
        NufftOptions {
            normalization: Normalization::Ortho,
            ..Default::default()
        },
    )
    .unwrap();
    let x = random_image(8, 8, 17);
    let a = raw.forward(&x).unwrap();
    let b = ortho.forward(&x).unwrap();
    for (u, v) in a.values().iter().zip(b.values()) {
        assert!((u / 8.0 - v).norm() < 1e-14);
    }
}

#[test]
fn parallel_mode_agrees_with_sequential() {
    let traj = random_trajectory(700, 18);
    let seq = make_plan(&traj, 20, 20, 2.0, 6).unwrap();
    let par = seq.clone().with_mode(ExecMode::Parallel);
    let x = random_image(20, 20, 19);
    let y = random_samples(700, 20);
    assert_eq!(seq.forward(&x).unwrap(), par.forward(&x).unwrap());
    let a = seq.adjoint(&y).unwrap();
    let b = par.adjoint(&y).unwrap();
    assert!(rel_l2(b.data(), a.data()) < 1e-13);
    // Fixed chunking makes the parallel adjoint reproducible run to run.
    assert_eq!(b, par.adjoint(&y).unwrap());
}

#[test]
fn plans_are_deterministic() {
    let traj = spiral(3, 40, 1.0).unwrap();
    let a = make_plan(&traj, 16, 16, 2.0, 6).unwrap();
    let b = make_plan(&traj, 16, 16, 2.0, 6).unwrap();
    assert_eq!(a, b);
}
