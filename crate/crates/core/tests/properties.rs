//! Randomized invariants across modules.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use proptest::prelude::*;

use penumbra::crb::{crb_for, fisher_matrix, Param};
use penumbra::forward::{
    build_falloff_matrix, build_falloff_matrix_known_height, falloff_kernel, stack_rgb, ForwardOperator,
};
use penumbra::geometry::{build_visibility_matrix, FloorGrid};
use penumbra::simulate::{render_point_emitter, render_scene, PointEmitter};
use penumbra::solvers::{
    alternate, default_lambda, fista_l1, AlternatingConfig, LinearProblem, SolveOptions,
};
use penumbra::{AngularGrid, HiddenScene, TargetSupport, WedgeTarget};

fn grid_strategy() -> impl Strategy<Value = FloorGrid> {
    (2usize..7, 2usize..7, 0.05f64..0.4, 0.05f64..0.4, 0.0f64..0.1, 0.0f64..0.1)
        .prop_map(|(nx, ny, fx, fy, ox, oy)| FloorGrid::new(nx, ny, [fx, fy], [ox, oy]).unwrap())
}

fn support_strategy(n: usize) -> impl Strategy<Value = TargetSupport> {
    (1..n, 0.1f64..3.0, 0.1f64..3.0).prop_map(move |(split, r0, r1)| {
        let angles = AngularGrid::new(n).unwrap();
        TargetSupport::from_bins(&angles, [(0..split, r0), (split..n, r1)], 100.0).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn visibility_rows_only_switch_off(grid in grid_strategy(), n in 1usize..30) {
        let angles = AngularGrid::new(n).unwrap();
        let v = build_visibility_matrix(&grid, angles.angles()).unwrap();
        for m in 0..grid.len() {
            for k in 1..n {
                prop_assert!(!(v[(m, k - 1)] == 0.0 && v[(m, k)] == 1.0));
            }
        }
    }

    #[test]
    fn forward_model_is_linear(
        grid in grid_strategy(),
        sup in support_strategy(6),
        s1 in prop::collection::vec(0.0f64..5.0, 6),
        s2 in prop::collection::vec(0.0f64..5.0, 6),
        c1 in prop::array::uniform2(-5.0f64..5.0),
        c2 in prop::array::uniform2(-5.0f64..5.0),
        a in 0.0f64..3.0,
    ) {
        let angles = AngularGrid::new(6).unwrap();
        let op = ForwardOperator::assemble(&grid, &angles, &sup, None).unwrap();
        let (s1, s2) = (DVector::from_vec(s1), DVector::from_vec(s2));
        let (c1, c2) = (DVector::from_row_slice(&c1), DVector::from_row_slice(&c2));
        let lhs = op.apply(&(&s1 * a + &s2), &(&c1 * a + &c2)).unwrap();
        let rhs = op.apply(&s1, &c1).unwrap() * a + op.apply(&s2, &c2).unwrap();
        let scale = lhs.amax().max(1.0);
        prop_assert!((lhs - rhs).amax() <= 1e-12 * scale);
    }

    #[test]
    fn falloff_entries_are_positive(grid in grid_strategy(), sup in support_strategy(9)) {
        let angles = AngularGrid::new(9).unwrap();
        let d = build_falloff_matrix(&grid, &angles, &sup).unwrap();
        prop_assert!(d.iter().all(|&v| v > 0.0 && v.is_finite()));
    }

    #[test]
    fn rgb_stack_matches_channels(
        grid in grid_strategy(),
        sup in support_strategy(5),
        s in prop::collection::vec(0.0f64..5.0, 15),
        c in prop::collection::vec(-5.0f64..5.0, 6),
    ) {
        let angles = AngularGrid::new(5).unwrap();
        let op = ForwardOperator::assemble(&grid, &angles, &sup, None).unwrap();
        let stacked = stack_rgb(&op).apply(&DVector::from_vec(s.clone()), &DVector::from_vec(c.clone())).unwrap();
        let m = grid.len();
        for ch in 0..3 {
            let one = op
                .apply(&DVector::from_row_slice(&s[5 * ch..5 * ch + 5]), &DVector::from_row_slice(&c[2 * ch..2 * ch + 2]))
                .unwrap();
            prop_assert_eq!(stacked.rows(ch * m, m).into_owned(), one);
        }
    }

    #[test]
    fn known_height_limits(rho in 0.1f64..3.0, d in 0.05f64..3.0) {
        let d2 = d * d;
        let tall = falloff_kernel(rho, d2, Some(1e9 * d));
        prop_assert!((tall - rho * FRAC_PI_2 / d).abs() <= 1e-6 * tall);
        let eta = 1e-4 * d;
        let short = falloff_kernel(rho, d2, Some(eta));
        let point = eta * falloff_kernel(rho, d2, None);
        prop_assert!((short - point).abs() <= 1e-6 * point);
    }

    #[test]
    fn known_height_matrix_uses_target_heights(grid in grid_strategy(), sup in support_strategy(6), h in 0.01f64..2.0) {
        let angles = AngularGrid::new(6).unwrap();
        prop_assert!(build_falloff_matrix_known_height(&grid, &angles, &sup).is_err());
        let mut tall = sup.clone();
        for t in tall.targets_mut() {
            t.height = Some(h);
        }
        let kh = build_falloff_matrix_known_height(&grid, &angles, &tall).unwrap();
        let flat = build_falloff_matrix(&grid, &angles, &sup).unwrap();
        // ρ·atan(h/d)/d ≤ h·ρ/d²
        prop_assert!(kh.iter().zip(flat.iter()).all(|(a, b)| *a <= h * b * (1.0 + 1e-12)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn render_is_linear_in_intensity(
        c in 0.1f64..10.0,
        rho in 0.3f64..3.0,
        phi in 0.1f64..1.4,
        k in 0.1f64..5.0,
        edge in any::<bool>(),
    ) {
        let g = FloorGrid::square(6, 0.2).unwrap();
        let a = render_point_emitter(&g, &PointEmitter::new(c, rho, phi).unwrap(), edge, 4).unwrap();
        let b = render_point_emitter(&g, &PointEmitter::new(k * c, rho, phi).unwrap(), edge, 4).unwrap();
        prop_assert!((b - a * k).amax() <= 1e-12 * k * c);
    }

    #[test]
    fn render_is_linear_in_radiosity(r1 in 0.0f64..100.0, r2 in 0.0f64..100.0, range in 0.3f64..2.0) {
        let g = FloorGrid::square(6, 0.2).unwrap();
        let scene = |r: f64| HiddenScene {
            targets: vec![WedgeTarget { center: 0.7, extent: 0.3, range, radiosity: vec![r], height: None }],
            emitters: vec![],
            ambient: vec![[0.0, 0.0]],
            near_field: None,
        };
        let a = &render_scene(&g, &scene(r1), 3).unwrap()[0];
        let b = &render_scene(&g, &scene(r2), 3).unwrap()[0];
        let ab = &render_scene(&g, &scene(r1 + r2), 3).unwrap()[0];
        prop_assert!((ab - a - b).amax() <= 1e-12 * ab.amax().max(1e-300));
    }

    #[test]
    fn shadowed_pixels_are_dark(rho in 0.3f64..3.0, phi in 0.1f64..1.4) {
        let g = FloorGrid::square(8, 0.2).unwrap();
        let y = render_point_emitter(&g, &PointEmitter::new(1.0, rho, phi).unwrap(), true, 4).unwrap();
        for m in 0..g.len() {
            let [x0, x1, y0, y1] = g.pixel_rect(m);
            let dark = [[x0, y0], [x1, y0], [x0, y1], [x1, y1]].iter().all(|p| p[1].atan2(p[0]) < phi);
            if dark {
                prop_assert_eq!(y[m], 0.0);
            }
        }
    }

    #[test]
    fn fisher_is_symmetric_psd(
        rho in 0.5f64..3.0,
        phi in 0.2f64..1.4,
        rho2 in 0.5f64..3.0,
        phi2 in 0.2f64..1.4,
        edge in any::<bool>(),
    ) {
        let g = FloorGrid::square(10, 0.2).unwrap();
        let es = [PointEmitter::new(1.0, rho, phi).unwrap(), PointEmitter::new(2.0, rho2, phi2).unwrap()];
        let f = fisher_matrix(&g, &es, edge, 1.0, 4).unwrap().entries;
        prop_assert_eq!(&f, &f.transpose());
        let eig = SymmetricEigen::new(f.clone());
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10 * f.norm()));
    }

    #[test]
    fn edge_hurts_range_at_deep_angles(rho in 0.5f64..3.0, phi in 1.2f64..1.5) {
        let g = FloorGrid::square(24, 0.2).unwrap();
        let e = [PointEmitter::new(1.0, rho, phi).unwrap()];
        let eo = crb_for(&g, &e, true, 10.0, 4).unwrap().get(0, Param::Range).unwrap();
        let no = crb_for(&g, &e, false, 10.0, 4).unwrap().get(0, Param::Range).unwrap();
        prop_assert!(eo >= no, "{} < {}", eo, no);
    }

    #[test]
    fn fista_output_is_feasible_and_monotone(seed in any::<u64>(), nonneg in any::<bool>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (30, 12);
        let d = DMatrix::from_fn(m, n, |_, _| rng.random_range(0.0..1.0));
        let a = DMatrix::from_fn(m, 2, |i, j| if j == 0 { 1.0 } else { i as f64 / m as f64 });
        let y = DVector::from_fn(m, |_, _| rng.random_range(-1.0..3.0));
        let lambda = default_lambda(&d, &a, &y, rng.random_range(0.01..0.5)).unwrap();
        let mut p = LinearProblem::new(d.clone(), a, y, lambda).unwrap();
        p.nonneg = nonneg;
        let sol = fista_l1(&p, SolveOptions::default()).unwrap();
        if nonneg {
            prop_assert!(sol.s.iter().all(|&v| v >= 0.0));
        }
        let tol = 1e-9 * sol.trace[0].abs();
        prop_assert!(sol.trace.windows(2).all(|w| w[1] <= w[0] + tol));
    }
}

proptest! {
    // each case is a full alternating reconstruction
    #![proptest_config(ProptestConfig::with_cases(4))]

    #[test]
    fn alternating_output_is_feasible(center in 0.5f64..1.1, range in 0.2f64..1.0, radiosity in 50.0f64..300.0) {
        let g = FloorGrid::square(24, 0.2).unwrap();
        let scene = HiddenScene {
            targets: vec![WedgeTarget { center, extent: 0.2, range, radiosity: vec![radiosity], height: None }],
            emitters: vec![],
            ambient: vec![[50.0, 0.0]],
            near_field: None,
        };
        let y = render_scene(&g, &scene, 3).unwrap();
        let cfg = AlternatingConfig::new(45);
        let r = alternate(&g, &y[0], &cfg).unwrap();
        prop_assert!(r.channels[0].s.iter().all(|&v| v >= 0.0));
        prop_assert!(r.ranges().iter().all(|&p| p >= cfg.min_range));
        let tol = 1e-9 * r.trace[0].abs();
        prop_assert!(r.trace.windows(2).all(|w| w[1] <= w[0] + tol));
    }
}
