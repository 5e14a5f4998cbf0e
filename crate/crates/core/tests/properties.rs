use proptest::prelude::*;
use weakscatter::collision::py_resolved_displacement;
use weakscatter::dynamics::{post_select, von_neumann_evolve, ExperimentConfig, Propagator, WindowMode};
use weakscatter::experiments::studies::product_spread;
use weakscatter::field::{CouplingTensor, Window};
use weakscatter::grid::{displace, make_gaussian, AxisGrid, GaussianSpec, GridSpec};
use weakscatter::spin::{eigenspinor, su2_rotation, weak_vector, SpinorState, UnitDirection};
use weakscatter::{Axis, Complex64};

fn plane() -> GridSpec {
    GridSpec::new(vec![AxisGrid::new(Axis::X, 64, 8.0), AxisGrid::new(Axis::Z, 64, 8.0)], 1.0).unwrap()
}

fn spinor() -> impl Strategy<Value = SpinorState> {
    (-1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
        .prop_filter("nonzero", |(a, b, c, d)| a * a + b * b + c * c + d * d > 1e-3)
        .prop_map(|(a, b, c, d)| SpinorState::new(Complex64::new(a, b), Complex64::new(c, d)).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transforms_round_trip(px in -2.0f64..2.0, pz in -2.0f64..2.0, y in -1.0f64..1.0, s in spinor()) {
        let spec = GaussianSpec::isotropic(1.0, s).with_center([
            Complex64::new(px, 0.5 * y), Complex64::new(0.0, 0.0), Complex64::new(pz, -0.5 * y),
        ]);
        let f = make_gaussian(&plane(), &spec).unwrap();
        let back = f.to_position().unwrap().to_momentum().unwrap();
        prop_assert!(f.distance(&back).unwrap() < 1e-12);
        prop_assert!((f.to_position().unwrap().norm_sqr() - f.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn von_neumann_coupling_is_unitary(eta in 0.0f64..2.0, hxx in -1.0f64..1.0, hxz in -1.0f64..1.0, s in spinor()) {
        let f = make_gaussian(&plane(), &GaussianSpec::isotropic(1.0, s)).unwrap();
        let out = von_neumann_evolve(&f, eta, 0.5, &CouplingTensor::maxwell(hxx, hxz)).unwrap();
        prop_assert!((out.norm_sqr() - f.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn real_displacement_moves_the_mean(dx in -1.5f64..1.5, dz in -1.5f64..1.5) {
        let grid = GridSpec::new(vec![AxisGrid::new(Axis::X, 128, 12.0), AxisGrid::new(Axis::Z, 128, 12.0)], 1.0).unwrap();
        let f = make_gaussian(&grid, &GaussianSpec::isotropic(1.0, SpinorState::up())).unwrap();
        let shift = [Complex64::new(dx, 0.0), Complex64::new(0.0, 0.0), Complex64::new(dz, 0.0)];
        let m = displace(&f, shift).unwrap().moments().unwrap();
        prop_assert!((m.mean_p_along(Axis::X) - dx).abs() < 1e-9);
        prop_assert!((m.mean_p_along(Axis::Z) - dz).abs() < 1e-9);
    }

    #[test]
    fn weak_vector_of_an_eigenstate_is_its_axis(x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, s in 0u8..2) {
        prop_assume!(x * x + y * y + z * z > 1e-2);
        let m = UnitDirection::new(x, y, z).unwrap();
        let chi = eigenspinor(&m, s).unwrap();
        let w = weak_vector(&chi, &chi).unwrap();
        let sign = if s == 0 { 1.0 } else { -1.0 };
        for (wi, mi) in w.iter().zip(m.components()) {
            prop_assert!((wi - Complex64::new(sign * mi, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotations_are_unitary(angle in -10.0f64..10.0, x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, s in spinor()) {
        prop_assume!(x * x + y * y + z * z > 1e-2);
        let n = UnitDirection::new(x, y, z).unwrap().components();
        let u = su2_rotation(angle, n);
        let a = s.amplitudes();
        let v = [u[0][0] * a[0] + u[0][1] * a[1], u[1][0] * a[0] + u[1][1] * a[1]];
        prop_assert!((v[0].norm_sqr() + v[1].norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn post_selection_is_normalized(pre in spinor(), post in spinor()) {
        prop_assume!(post.inner(&pre).norm() > 1e-3);
        let f = make_gaussian(&plane(), &GaussianSpec::isotropic(1.0, pre)).unwrap();
        let r = post_select(&f, &post).unwrap();
        prop_assert!((r.field.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!(r.success_probability <= 1.0 + 1e-12);
        prop_assert!((r.success_probability - post.inner(&pre).norm_sqr()).abs() < 1e-10);
    }

    #[test]
    fn slice_displacement_times_momentum_is_constant(p0 in 8.0f64..14.0, l in 0.5f64..3.0, eta in 0.001f64..0.1) {
        let grid = GridSpec::new(vec![AxisGrid::new(Axis::Y, 128, 20.0), AxisGrid::new(Axis::Z, 64, 8.0)], 1.0).unwrap();
        let pre = eigenspinor(&UnitDirection::tilted(2.0, Axis::X).unwrap(), 0).unwrap();
        let config = ExperimentConfig {
            eta, hbar: 1.0, mass: 1.0, window: Window::boxcar(l).unwrap(), mode: WindowMode::Spatial,
            tensor: CouplingTensor::maxwell(-1.0, 0.3), pre, post: SpinorState::up(), grid,
            packet: GaussianSpec::new([0.0, p0, 0.0], [1.0; 3], pre), tau_i: 1.0, tau_f: 1.0, steps: 10, kinetic: true,
        };
        let slices = py_resolved_displacement(&config.packet, &config).unwrap();
        prop_assert!(product_spread(&slices) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn split_step_preserves_the_norm(eta in 0.0f64..0.5, hxz in -1.0f64..1.0, kinetic in any::<bool>()) {
        let pre = eigenspinor(&UnitDirection::tilted(1.0, Axis::Y).unwrap(), 0).unwrap();
        let config = ExperimentConfig {
            eta, hbar: 1.0, mass: 1.0, window: Window::boxcar(1.0).unwrap(), mode: WindowMode::Temporal,
            tensor: CouplingTensor::maxwell(-1.0, hxz), pre, post: SpinorState::up(), grid: plane(),
            packet: GaussianSpec::isotropic(1.0, pre), tau_i: 1.0, tau_f: 1.0, steps: 100, kinetic,
        };
        let psi = config.initial_state().unwrap();
        let out = Propagator::new(&config, WindowMode::Temporal, config.steps).run(&psi).unwrap();
        prop_assert!((out.norm_sqr() - psi.norm_sqr()).abs() < 1e-12);
    }
}
