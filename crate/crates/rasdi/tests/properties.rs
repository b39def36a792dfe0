//! Randomized properties of the splitting, the interface operator, the
//! extrapolation and the phasor transforms.

mod common;

use proptest::prelude::*;
use rasdi::aitken::{self, InterfaceOperator, OperatorSource};
use rasdi::dae;
use rasdi::linalg::{self, Lu};
use rasdi::partition::{interface_map, prolong, restrict, restriction_matrix, Family, Selector};
use rasdi::phasor::{self, PhasorConfig};
use rasdi::ras;
use rasdi::{DMatrix, DVector};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sweep_equals_richardson(seed in 0u64..10_000) {
        let case = common::random_case(seed);
        let sys = &case.sys;
        let locals = ras::build_locals(sys, &case.part, case.dt).unwrap();
        let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, case.dt);
        let m_inv = ras::ras_inverse(&locals, sys.n());
        let b = common::random_vector(seed, sys.n());
        let mut z = common::random_vector(seed + 1, sys.n());
        for _ in 0..5 {
            let swept = ras::di_sweep(&locals, &b, &z);
            let rich = ras::richardson_update(&m_inv, &step, &b, &z);
            prop_assert!(linalg::norm_inf(&(&swept - &rich)) <= 1e-12 * (1.0 + linalg::norm_inf(&swept)));
            z = swept;
        }
    }

    #[test]
    fn interface_error_is_propagated_by_p(seed in 0u64..10_000) {
        let case = common::random_case(seed);
        let sys = &case.sys;
        let locals = ras::build_locals(sys, &case.part, case.dt).unwrap();
        let map = interface_map(&case.part).unwrap();
        let p = aitken::interface_operator(&locals, &case.part, &map);
        let b = common::random_vector(seed, sys.n());
        let iterates = ras::sweeps(&locals, &b, &common::random_vector(seed + 2, sys.n()), 6);
        let gamma: Vec<DVector<f64>> = iterates.iter().map(|z| map.gather(z)).collect();
        let c = aitken::interface_affine(&locals, &case.part, &map, &b);
        for k in 0..6 {
            let predicted = ras::interface_iterate(&p, &gamma[k], &c).unwrap();
            prop_assert!(linalg::norm_inf(&(&predicted - &gamma[k + 1])) <= 1e-10 * (1.0 + linalg::norm_inf(&gamma[k + 1])));
        }
    }

    #[test]
    fn accelerated_step_hits_the_monolithic_step(seed in 0u64..10_000) {
        let case = common::random_case(seed);
        let sys = &case.sys;
        let locals = ras::build_locals(sys, &case.part, case.dt).unwrap();
        let map = interface_map(&case.part).unwrap();
        let p = aitken::interface_operator(&locals, &case.part, &map);
        let z_prev = common::random_vector(seed, sys.n());
        let b_step = dae::step_rhs(&sys.diff_mask, case.dt, &z_prev, &sys.b(case.dt));
        let step = dae::step_matrix(&sys.big_a, &sys.diff_mask, case.dt);
        let exact = Lu::new(&step).unwrap().solve(&b_step);
        let scale = 1.0 + linalg::norm_inf(&exact);

        let with_exact = aitken::accelerated_step(&locals, &map, &b_step, &z_prev, aitken::StepMode::ReuseP(&p)).unwrap();
        prop_assert_eq!(with_exact.sweeps, 1);
        prop_assert!(linalg::norm_inf(&(&with_exact.state - &exact)) <= 1e-10 * scale);

        // The fitted operator is only as good as the Krylov history: fast
        // decaying directions are poorly identified, so the bound is loose.
        let fitted = aitken::accelerated_step(&locals, &map, &b_step, &z_prev, aitken::StepMode::FirstStep).unwrap();
        prop_assert!(fitted.estimate.is_some());
        prop_assert!(linalg::norm_inf(&(&fitted.state - &exact)) <= 5e-3 * scale);
    }

    #[test]
    fn restriction_identities(seed in 0u64..10_000) {
        let case = common::random_case(seed);
        let part = &case.part;
        let n = part.n();
        let v = common::random_vector(seed, n);
        // Owned sets cover every unknown exactly once.
        let mut sum = DMatrix::zeros(n, n);
        for i in 0..part.count() {
            let ext = Selector::new(Family::Extended, i);
            let owned = Selector::new(Family::Owned, i);
            let r = restriction_matrix(part, &ext).unwrap();
            let r_owned = restriction_matrix(part, &owned).unwrap();
            sum += r_owned.transpose() * &r_owned;
            let k = r.nrows();
            prop_assert_eq!(&r * r.transpose(), DMatrix::identity(k, k));
            prop_assert_eq!(restrict(part, &ext, &v).unwrap(), &r * &v);
            let local = restrict(part, &ext, &v).unwrap();
            prop_assert_eq!(restrict(part, &ext, &prolong(part, &ext, &local).unwrap()).unwrap(), local);
        }
        prop_assert_eq!(sum, DMatrix::identity(n, n));
        // External sets are absorbed by the interface projection.
        let r_gamma = interface_map(part).unwrap().matrix(n);
        let gamma_proj = r_gamma.transpose() * &r_gamma;
        for i in 0..part.count() {
            let r_ext = restriction_matrix(part, &Selector::new(Family::External, i)).unwrap();
            let ext_proj = r_ext.transpose() * &r_ext;
            prop_assert_eq!(&ext_proj * &gamma_proj, ext_proj);
        }
    }

    #[test]
    fn extrapolation_recovers_affine_fixed_point(
        entries in proptest::collection::vec(-1.5f64..1.5, 9),
        c in proptest::collection::vec(-1.0f64..1.0, 3),
        z0 in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let p = DMatrix::from_row_slice(3, 3, &entries);
        let op = InterfaceOperator::new(p.clone(), OperatorSource::Analytic);
        let i_minus_p = DMatrix::identity(3, 3) - &p;
        let Some(lu) = Lu::new(&i_minus_p) else { return Ok(()) };
        prop_assume!(!op.has_unit_eigenvalue && i_minus_p.determinant().abs() > 1e-3);
        let c = DVector::from_vec(c);
        let z0 = DVector::from_vec(z0);
        let z1 = &p * &z0 + &c;
        let got = aitken::accelerate(&op, &z1, &z0).unwrap();
        let want = lu.solve(&c);
        prop_assert!(linalg::norm_inf(&(&got - &want)) <= 1e-9 * (1.0 + linalg::norm_inf(&want)));
    }

    #[test]
    fn numeric_operator_recovers_a_generic_map(entries in proptest::collection::vec(-1.0f64..1.0, 9), seed in 0u64..1000) {
        let p = DMatrix::from_row_slice(3, 3, &entries);
        let mut e = vec![common::random_vector(seed, 3)];
        for _ in 0..4 {
            let next = &p * e.last().unwrap();
            e.push(next);
        }
        let est = aitken::numeric_p(&e).unwrap();
        prop_assume!(!est.rank_deficient());
        let scale = 1.0 + linalg::max_abs(&p);
        prop_assert!(linalg::max_abs(&(&est.operator.matrix - &p)) <= 1e-6 * scale);
    }

    #[test]
    fn extraction_is_linear_and_real(
        a in proptest::collection::vec(-2.0f64..2.0, 6),
        alpha in -3.0f64..3.0,
        beta in -3.0f64..3.0,
        t_end in 0.0f64..0.1,
    ) {
        let cfg = PhasorConfig::new(2.0 * std::f64::consts::PI * 50.0, &[-2, -1, 0, 1, 2], 2e-3, 2e-4).unwrap();
        let w = cfg.omega0;
        let sig = |c: &[f64], t: f64| {
            DVector::from_element(1, c[0] + c[1] * (w * t).cos() + c[2] * (w * t).sin() + c[3] * (3.0 * w * t).cos() + c[4] * (2.0 * w * t).sin() + c[5] * t)
        };
        let times: Vec<f64> = (0..cfg.n_hist).map(|j| t_end - (cfg.n_hist - 1 - j) as f64 * cfg.dt_emt).collect();
        let h1: Vec<DVector<f64>> = times.iter().map(|&t| sig(&a[..], t)).collect();
        let rev: Vec<f64> = a.iter().rev().copied().collect();
        let h2: Vec<DVector<f64>> = times.iter().map(|&t| sig(&rev, t)).collect();
        let mix: Vec<DVector<f64>> = h1.iter().zip(&h2).map(|(x, y)| x * alpha + y * beta).collect();
        let f = |h: &[DVector<f64>]| phasor::f_mod(&h.iter().collect::<Vec<_>>(), t_end, &cfg).unwrap();
        let (p1, p2, pm) = (f(&h1), f(&h2), f(&mix));
        prop_assert!(linalg::max_abs(&(&pm.coeffs - (&p1.coeffs * alpha + &p2.coeffs * beta))) <= 1e-12);
        for k in [1, 2] {
            prop_assert_eq!(p1.coefficient(0, -k, &cfg), p1.coefficient(0, k, &cfg).conj());
        }
        let t = t_end + 0.3 * cfg.dt_ts;
        let lhs = phasor::r_mod(&pm, t, &cfg);
        let rhs = phasor::r_mod(&p1, t, &cfg) * alpha + phasor::r_mod(&p2, t, &cfg) * beta;
        prop_assert!(linalg::norm_inf(&(lhs - rhs)) <= 1e-12);
    }
}

#[test]
fn dc_mode_system_is_the_original() {
    let case = common::random_case(3);
    let cfg = PhasorConfig::new(2.0 * std::f64::consts::PI * 50.0, &[0], 2e-3, 2e-5).unwrap();
    let ts = phasor::ts_system(&case.sys, &cfg);
    assert_eq!(ts.big_a, case.sys.big_a);
    assert_eq!(ts.diff_mask, case.sys.diff_mask);
}

/// `x' + a x = cos(w t)` in modes {-1, 1} settles at `x_1 = (1/2) / (a + i w)`.
#[test]
fn forced_scalar_oscillator_in_phasor_form() {
    use std::sync::Arc;
    let a = 30.0;
    let cfg = PhasorConfig::new(2.0 * std::f64::consts::PI * 50.0, &[-1, 1], 1e-3, 1e-4).unwrap();
    let w = cfg.omega0;
    let forcing: rasdi::dae::Forcing = Arc::new(move |t| DVector::from_element(1, (w * t).cos()));
    let sys = dae::CombinedSystem {
        big_a: DMatrix::from_element(1, 1, a),
        diff_mask: vec![true],
        forcing,
        x0: DVector::zeros(1),
    };
    let ts = phasor::ts_system(&sys, &cfg);
    let traj = dae::monolithic_solve(&ts, cfg.dt_ts, 1.0).unwrap();
    let last = traj.last();
    let want = nalgebra::Complex::new(0.5, 0.0) / nalgebra::Complex::new(a, w);
    assert!(
        (last[0] - want.re).abs() < 1e-9 && (last[1] - want.im).abs() < 1e-9,
        "{last} vs {want}"
    );
    // Recombined it is the particular solution of the original equation.
    let t = 0.0123;
    let ph = phasor::PhasorState::unflatten(last, 1, &cfg);
    let x = phasor::r_mod(&ph, t, &cfg)[0];
    let exact = (a * (w * t).cos() + w * (w * t).sin()) / (a * a + w * w);
    assert!((x - exact).abs() < 1e-9);
}

/// This case used to stall the unbounded Schur iteration.
#[test]
fn eigenvalues_of_a_stalling_operator_match_traces() {
    let case = common::random_case(167);
    let (p, _) = aitken::operator_at(&case.sys, &case.part, case.dt).unwrap();
    let ev = &p.eigenvalues;
    assert_eq!(ev.len(), p.dim());
    let sum: nalgebra::Complex<f64> = ev.iter().sum();
    let sum_sq: nalgebra::Complex<f64> = ev.iter().map(|l| l * l).sum();
    let scale = 1.0 + linalg::max_abs(&p.matrix);
    assert!((sum.re - p.matrix.trace()).abs() < 1e-10 * scale && sum.im.abs() < 1e-10 * scale);
    assert!((sum_sq.re - (&p.matrix * &p.matrix).trace()).abs() < 1e-9 * scale * scale);
}
