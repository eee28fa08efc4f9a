//! Property tests for the invariants of each module.

use proptest::prelude::*;
use zerosets::boundary;
use zerosets::domain::{DefiningForm, Domain};
use zerosets::forms::{self, CarlesonBudget, DiscreteMeasure, Polynomial};
use zerosets::geometry;
use zerosets::matrix::{self, ContourSpec};
use zerosets::num::{self, c, C64};

fn cvec(n: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| c(a, b)), n)
}

fn domain() -> impl Strategy<Value = Domain> {
    prop_oneof![
        Just(Domain::unit_ball(2)),
        (1u32..=3, 1u32..=3).prop_map(|(a, b)| Domain::ellipsoid(&[a, b]).unwrap()),
        Just(Domain::ellipsoid(&[1, 2, 1]).unwrap()),
    ]
}

fn boundary_point(dom: &Domain, v: &[C64]) -> Option<Vec<C64>> {
    if num::norm(v) < 1e-3 {
        return None;
    }
    dom.boundary_projection(v).ok()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn gauge_is_homogeneous(dom in domain(), z in cvec(3), t in 0.01f64..2.0) {
        let z = &z[..dom.dim()];
        prop_assume!(num::norm(z) > 1e-3);
        let p = dom.gauge(z).unwrap();
        let q = dom.gauge(&num::scale_re(z, t)).unwrap();
        prop_assert!((q - t * p).abs() <= 1e-9 * t * p);
    }

    #[test]
    fn midpoints_of_boundary_pairs_are_inside(dom in domain(), x in cvec(3), y in cvec(3)) {
        let n = dom.dim();
        let (Some(a), Some(b)) = (boundary_point(&dom, &x[..n]), boundary_point(&dom, &y[..n])) else { return Ok(()); };
        let m = num::scale_re(&num::add(&a, &b), 0.5);
        for form in [DefiningForm::Analytic, DefiningForm::Gauge] {
            let r = dom.r(form, &m).unwrap();
            let edge = dom.r(form, &a).unwrap().max(dom.r(form, &b).unwrap());
            prop_assert!(r <= edge + 1e-12);
        }
    }

    #[test]
    fn normal_annihilates_the_complex_tangent_space(dom in domain(), x in cvec(3), w in cvec(3)) {
        let n = dom.dim();
        let Some(p) = boundary_point(&dom, &x[..n]) else { return Ok(()); };
        let z = num::scale_re(&p, 0.99);
        let eta = dom.unit_normal(&z).unwrap();
        // tangent vectors: the Hermitian complement of the normal
        let Some(v) = num::orthogonalize(&w[..n], std::slice::from_ref(&eta)) else { return Ok(()); };
        let g = dom.complex_gradient(DefiningForm::Analytic, &z).unwrap();
        prop_assert!(num::bdot(&g, &v).norm() <= 1e-8 * num::norm(&g));
        prop_assert!(num::hdot(&eta, &v).norm() <= 1e-8);
    }

    #[test]
    fn tau_is_homogeneous(dom in domain(), x in cvec(3), v in cvec(3), r in 0.1f64..3.0, arg in 0.0f64..6.3, le in -4.0f64..-0.5) {
        let n = dom.dim();
        let Some(p) = boundary_point(&dom, &x[..n]) else { return Ok(()); };
        let v = &v[..n];
        prop_assume!(num::norm(v) > 1e-3);
        let z = num::scale_re(&p, 0.95);
        let eps = 10f64.powf(le);
        let lam = C64::from_polar(r, arg);
        let a = geometry::tau(&dom, &z, v, eps).unwrap();
        let b = geometry::tau(&dom, &z, &num::scale(v, lam), eps).unwrap() * r;
        prop_assert!((a - b).abs() <= 1e-7 * a);
    }

    #[test]
    fn tau_grows_with_eps(x in cvec(2), v in cvec(2), le in -4.0f64..-1.0, k in 1.0f64..100.0) {
        let dom = Domain::ellipsoid(&[1, 2]).unwrap();
        let Some(p) = boundary_point(&dom, &x) else { return Ok(()); };
        prop_assume!(num::norm(&v) > 1e-3);
        let z = num::scale_re(&p, 0.97);
        let e = 10f64.powf(le);
        let t1 = geometry::tau(&dom, &z, &v, e).unwrap();
        let t2 = geometry::tau(&dom, &z, &v, k * e).unwrap();
        // doubling band with m = 4 and C = 4
        prop_assert!(t2 >= t1 * k.powf(0.25) / 4.0 && t2 <= 4.0 * k * t1);
    }

    #[test]
    fn extremal_frames_are_orthonormal(dom in domain(), x in cvec(3), le in -4.0f64..-1.0) {
        let n = dom.dim();
        let Some(p) = boundary_point(&dom, &x[..n]) else { return Ok(()); };
        let f = geometry::extremal_basis(&dom, &num::scale_re(&p, 0.98), 10f64.powf(le)).unwrap();
        prop_assert!(f.orthonormality_error() < 1e-9);
        prop_assert!(f.radii.iter().all(|t| *t > 0.0));
    }

    #[test]
    fn sylvester_solvers_agree(seed in any::<u64>(), n in 1usize..=6, lc in 0.0f64..6.0) {
        let mut rng = num::rng(seed);
        let m = matrix::random_hpd(&mut rng, n, 10f64.powf(lc));
        let cm = matrix::random_herm(&mut rng, n);
        let d = matrix::sylvester_direct(&m, &cm);
        let k = matrix::sylvester_contour(&m, &cm, &ContourSpec::relative(&m, 0.25).unwrap()).unwrap();
        prop_assert!(num::frobenius(&(k - &d)) <= 1e-8 * num::frobenius(&d));
        let back = m.matrix() * &d + &d * m.matrix();
        prop_assert!(num::frobenius(&(back - &cm)) <= 1e-8 * num::frobenius(&cm));
    }

    #[test]
    fn dphi_inverse_round_trip(seed in any::<u64>(), n in 1usize..=4) {
        let mut rng = num::rng(seed);
        let b = matrix::random_hpd(&mut rng, n, 1e3);
        let hp = matrix::random_herm(&mut rng, n);
        let h = matrix::dphi_inverse(&b, &hp, 0.25).unwrap();
        let back = matrix::dphi(&matrix::inv_sqrt(&b), &h);
        prop_assert!(num::frobenius(&(back - &hp)) <= 1e-7 * num::frobenius(&hp));
    }

    #[test]
    fn inverse_square_root_squares_to_the_inverse(seed in any::<u64>(), n in 1usize..=5) {
        let mut rng = num::rng(seed);
        let b = matrix::random_hpd(&mut rng, n, 1e4);
        let a = matrix::inv_sqrt(&b);
        let prod = a.matrix() * a.matrix() * b.matrix();
        let id = num::CMat::identity(n, n);
        prop_assert!(num::frobenius(&(prod - id)) < 1e-8);
    }

    #[test]
    fn distribution_is_monotone(vals in prop::collection::vec(-3.0f64..3.0, 20..200)) {
        let w = vec![1.0 / vals.len() as f64; vals.len()];
        let r = boundary::exp_integrability(&vals, &w, None).unwrap();
        prop_assert!(r.is_monotone());
        prop_assert!(r.layer_cake_error() <= 2e-2);
    }

    #[test]
    fn weak_norm_scales(vals in prop::collection::vec(-3.0f64..3.0, 1..100), k in 0.1f64..10.0) {
        let w = vec![0.5; vals.len()];
        let a = boundary::weak_norm(&vals, &w);
        let scaled: Vec<f64> = vals.iter().map(|v| k * v).collect();
        let b = boundary::weak_norm(&scaled, &w);
        prop_assert!((b - k * a).abs() <= 1e-12 * (1.0 + b));
    }

    #[test]
    fn polynomial_gradient_matches_differences(a in -2.0f64..2.0, b in -2.0f64..2.0, z in cvec(2)) {
        let src = format!("{a}*z1^2*z2 + ({b}+1i)*z2 - 0.5");
        let p = Polynomial::parse(&src, 2).unwrap();
        let g = p.gradient(&z);
        let h = 1e-6;
        for (j, gj) in g.iter().enumerate() {
            let e = num::unit(2, j);
            let d = (p.eval(&num::axpy(&z, c(h, 0.0), &e)) - p.eval(&num::axpy(&z, c(-h, 0.0), &e))) / (2.0 * h);
            prop_assert!((d - gj).norm() <= 1e-6 * (1.0 + gj.norm()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn carleson_norm_is_linear_in_the_measure(seed in any::<u64>(), k in 0.1f64..10.0) {
        let dom = Domain::unit_ball(2);
        let mut rng = num::rng(seed);
        let pts: Vec<Vec<C64>> = (0..5).map(|_| num::scale_re(&num::random_unit(&mut rng, 2), 0.97)).collect();
        let mu = DiscreteMeasure::new(pts, vec![1e-3; 5]).unwrap();
        let budget = CarlesonBudget::default();
        let a = forms::carleson_norm_measure(&mu, &dom, &budget).unwrap().norm;
        let b = forms::carleson_norm_measure(&mu.scaled(k), &dom, &budget).unwrap().norm;
        prop_assert!((b - k * a).abs() <= 1e-12 * b.max(1e-300));
    }

    #[test]
    fn measures_survive_a_csv_round_trip(seed in any::<u64>()) {
        let mut rng = num::rng(seed);
        let pts: Vec<Vec<C64>> = (0..4).map(|_| num::random_in_ball(&mut rng, 2, 0.9)).collect();
        let mu = DiscreteMeasure::new(pts, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("mu.csv");
        mu.write_csv(&path).unwrap();
        prop_assert_eq!(DiscreteMeasure::read_csv(&path).unwrap(), mu);
    }
}
