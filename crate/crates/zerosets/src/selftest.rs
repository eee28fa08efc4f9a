//! Invariant suite behind `zerosets selftest`: one row per property with the
//! measured value and the bound it is held to.

use crate::boundary::{self, BoundaryGrid, WeakTypeConfig};
use crate::dbar::{self, support_linear, KernelParams};
use crate::domain::{DefiningForm, Domain};
use crate::error::Result;
use crate::forms::{self, CarlesonBudget, DivisorModel, FormField, LocalizedLelong};
use crate::geometry;
use crate::homotopy::{self, Homotopy, RetractParams};
use crate::matrix::{self, ContourSpec};
use crate::metric::MetricModel;
use crate::num::{self, c, C64};
use crate::pipeline::{self, PipelineConfig};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// `value <= bound` passes unless `lower` is set.
    pub bound: f64,
    #[serde(default)]
    pub lower: bool,
    pub passed: bool,
    /// Error text when the check could not be evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Check {
    fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, lower: false, passed: value <= bound, error: None }
    }

    fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self { name: name.into(), value, bound, lower: true, passed: value >= bound, error: None }
    }

    fn failed(name: &str, err: &crate::Error) -> Self {
        Self { name: name.into(), value: f64::NAN, bound: f64::NAN, lower: false, passed: false, error: Some(err.to_string()) }
    }
}

type Probe = fn() -> Result<Check>;

fn tau_origin() -> Result<Check> {
    let b = Domain::unit_ball(2);
    let t = geometry::tau(&b, &[c(0.0, 0.0), c(0.0, 0.0)], &num::unit(2, 0), 0.25)?;
    Ok(Check::at_most("tau on the ball at the origin is sqrt(eps)", (t - 0.5).abs(), 1e-9))
}

fn tau_homogeneity() -> Result<Check> {
    let e = Domain::ellipsoid(&[1, 2])?;
    let mut rng = num::rng(11);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let z = num::random_in_ball(&mut rng, 2, 0.7);
        let v = num::random_cvec(&mut rng, 2);
        let lam = C64::from_polar(0.2 + 2.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
        let eps = 10f64.powf(-3.0 * rng.random::<f64>());
        let a = geometry::tau(&e, &z, &v, eps)?;
        let b = geometry::tau(&e, &z, &num::scale(&v, lam), eps)? * lam.norm();
        worst = worst.max((a - b).abs() / a);
    }
    Ok(Check::at_most("tau is homogeneous in the direction", worst, 1e-7))
}

fn gauge_homogeneity() -> Result<Check> {
    let e = Domain::ellipsoid(&[1, 3])?;
    let mut rng = num::rng(12);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let z = num::random_in_ball(&mut rng, 2, 1.5);
        let t = 0.01 + 1.99 * rng.random::<f64>();
        let p = e.gauge(&z)?;
        worst = worst.max((e.gauge(&num::scale_re(&z, t))? - t * p).abs() / p);
    }
    Ok(Check::at_most("gauge is positively homogeneous", worst, 1e-9))
}

fn sylvester() -> Result<Check> {
    let mut rng = num::rng(13);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.random_range(1..=6);
        let m = matrix::random_hpd(&mut rng, n, 1e6);
        let cm = matrix::random_herm(&mut rng, n);
        let direct = matrix::sylvester_direct(&m, &cm);
        let contour = matrix::sylvester_contour(&m, &cm, &ContourSpec::relative(&m, 0.25)?)?;
        worst = worst.max(num::frobenius(&(contour - &direct)) / num::frobenius(&direct));
    }
    Ok(Check::at_most("contour Sylvester solve agrees with the direct solve", worst, 1e-8))
}

fn dphi_round_trip() -> Result<Check> {
    let mut rng = num::rng(14);
    let mut worst: f64 = 0.0;
    for _ in 0..30 {
        let n = rng.random_range(1..=4);
        let b = matrix::random_hpd(&mut rng, n, 1e3);
        let hp = matrix::random_herm(&mut rng, n);
        let h = matrix::dphi_inverse(&b, &hp, 0.25)?;
        let back = matrix::dphi(&matrix::inv_sqrt(&b), &h);
        worst = worst.max(num::frobenius(&(back - &hp)) / num::frobenius(&hp));
    }
    Ok(Check::at_most("dphi after its contour inverse is the identity", worst, 1e-7))
}

fn metric_comparability() -> Result<Check> {
    let metric = MetricModel::exact_ball(2);
    let dom = metric.domain().clone();
    let mut rng = num::rng(15);
    let mut worst: f64 = 1.0;
    for _ in 0..50 {
        let d = 10f64.powf(-3.0 + 2.4 * rng.random::<f64>());
        let zeta = num::scale_re(&num::random_unit(&mut rng, 2), 1.0 - d);
        let v = num::random_unit(&mut rng, 2);
        let dz = dom.d(DefiningForm::Analytic, &zeta)?;
        let x = metric.norm(&zeta, &v)? * geometry::tau(&dom, &zeta, &v, dz)?;
        worst = worst.max(x).max(1.0 / x);
    }
    Ok(Check::at_most("Bergman norm times tau stays in [1/10, 10]", worst, 10.0))
}

fn derivative_bound() -> Result<Check> {
    let b = Domain::unit_ball(2);
    let zeta = [c(0.99, 0.0), c(0.0, 0.0)];
    let mut worst: f64 = 0.0;
    for (a, bb) in [([1, 0], [0, 0]), ([0, 1], [0, 0]), ([0, 1], [0, 1]), ([1, 1], [0, 0])] {
        for eps in [0.01, 0.005] {
            worst = worst.max(geometry::derivative_bound_check(&b, &zeta, eps, &a, &bb, 100, 16)?.max_ratio);
        }
    }
    Ok(Check::at_most("normalized derivatives of r are bounded", worst, 10.0))
}

fn lelong_closed() -> Result<Check> {
    let dom = Domain::unit_ball(2);
    let d = DivisorModel::parse("z1", 2, 1.0, 0.1)?;
    let f = LocalizedLelong::new(&d, &dom, 0.2);
    let mut rng = num::rng(17);
    let basis = num::real_basis(2);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let z = num::scale_re(&num::random_unit(&mut rng, 2), 0.85);
        let (v, s) = forms::exterior_derivative_2form(&f, &z, &basis[0], &basis[1], &basis[3], 1e-5)?;
        worst = worst.max(v / s.max(1e-8));
    }
    Ok(Check::at_most("localized smoothed Lelong current is closed", worst, 1e-5))
}

fn homotopy_inverts_d() -> Result<Check> {
    let dom = Domain::unit_ball(2);
    let d = DivisorModel::parse("z1", 2, 1.0, 0.1)?;
    let theta: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&d, &dom, 0.2));
    let h = Homotopy::new(RetractParams::default(), MetricModel::exact_ball(2), theta.clone())?;
    let (mut err, mut scale) = (0.0, 0.0);
    for z in [[c(0.1, 0.05), c(0.9, 0.1)], [c(0.6, -0.3), c(0.2, 0.6)]] {
        let chk = homotopy::d_omega_check(|w| h.omega_real(w), &theta.coefficients(&z)?, &z, 1e-3)?;
        err += chk.error * chk.error;
        scale += chk.scale * chk.scale;
    }
    Ok(Check::at_most("homotopy operator inverts d on a closed current", (err / scale).sqrt(), 1e-2))
}

fn dbar_known_primitive() -> Result<Check> {
    let support = support_linear(&Domain::unit_ball(2));
    let r = dbar::known_primitive_residual(&KernelParams::calibrated(2), &support)?;
    Ok(Check::at_most("dbar kernel recovers a known primitive", r, 5e-2))
}

fn cauchy_normalization() -> Result<Check> {
    let support = support_linear(&Domain::unit_ball(1));
    let r = dbar::calibrate_cn(&KernelParams::calibrated(1), &support)?;
    let want = 1.0 / (2.0 * PI);
    Ok(Check::at_most("one-dimensional kernel constant is Cauchy's", (r.cn - want).abs() / want, 1e-2))
}

fn maximal_constant() -> Result<Check> {
    let d = Domain::unit_ball(2);
    let g = BoundaryGrid::sobol(&d, 512, 5)?;
    let ones = vec![1.0; g.len()];
    let m = boundary::maximal_fn(&d, &g, &ones, &[c(0.0, 0.0), c(0.97, 0.0)])?;
    Ok(Check::at_most("maximal function of 1 is 1", (m - 1.0).abs(), 0.0))
}

fn layer_cake() -> Result<Check> {
    let d = Domain::unit_ball(2);
    let g = BoundaryGrid::product(&d, 16, 16)?;
    let v: Vec<f64> = g.points.iter().map(|z| 1.5 * z[0].re + z[1].norm_sqr()).collect();
    let r = boundary::exp_integrability(&v, &g.weights, None)?;
    Ok(Check::at_most("layer-cake and direct exp-integrals agree", r.layer_cake_error(), 2e-2))
}

fn blaschke() -> Result<Check> {
    let d = DivisorModel::parse("z1", 2, 1.0, 0.05)?;
    let r = forms::blaschke_integral(&d, &Domain::unit_ball(2))?;
    Ok(Check::at_most("Blaschke integral of z1 on the ball is pi/2", (r.value - PI / 2.0).abs() / (PI / 2.0), 1e-2))
}

fn carleson_atom() -> Result<Check> {
    let d = Domain::unit_ball(2);
    let zero = forms::DiscreteMeasure::default();
    let r = forms::carleson_norm_measure(&zero, &d, &CarlesonBudget::default())?;
    Ok(Check::at_most("Carleson norm of the zero measure is 0", r.norm, 0.0))
}

fn weak_type() -> Result<Check> {
    let d = Domain::unit_ball(2);
    let r = boundary::weak_type_test(
        &KernelParams::calibrated(2),
        &support_linear(&d),
        &MetricModel::exact_ball(2),
        &WeakTypeConfig::default(),
        &CarlesonBudget::default(),
    )?;
    Ok(Check::at_most("weak-type ratio of L_i is bounded over random trials", r.max_ratio, 1e3))
}

fn pipeline_level0() -> Result<Check> {
    let r = pipeline::run(&PipelineConfig { level: 0, ..Default::default() }, None)?;
    Ok(Check::at_most("end-to-end i ddbar u matches the smoothed current", r.residual, 1e-1))
}

fn p_star_positive() -> Result<Check> {
    let d = Domain::unit_ball(2);
    let g = BoundaryGrid::product(&d, 16, 16)?;
    let v: Vec<f64> = g.points.iter().map(|z| -(1.0 - z[0].re + 1e-3).ln()).collect();
    let r = boundary::exp_integrability(&v, &g.weights, Some(1.0))?;
    Ok(Check::at_least("fitted exponent of a logarithmic singularity is positive", r.p_star.unwrap_or(0.0), f64::MIN_POSITIVE))
}

const FAST: &[(&str, Probe)] = &[
    ("tau_origin", tau_origin),
    ("tau_homogeneity", tau_homogeneity),
    ("gauge_homogeneity", gauge_homogeneity),
    ("sylvester", sylvester),
    ("dphi_round_trip", dphi_round_trip),
    ("metric_comparability", metric_comparability),
    ("derivative_bound", derivative_bound),
    ("lelong_closed", lelong_closed),
    ("homotopy", homotopy_inverts_d),
    ("dbar", dbar_known_primitive),
    ("maximal", maximal_constant),
    ("layer_cake", layer_cake),
    ("p_star", p_star_positive),
    ("blaschke", blaschke),
    ("carleson", carleson_atom),
];

const SLOW: &[(&str, Probe)] = &[
    ("cauchy", cauchy_normalization),
    ("weak_type", weak_type),
    ("pipeline", pipeline_level0),
];

/// Runs the suite; `fast` skips the Monte-Carlo sweep, the n = 1
/// calibration and the pipeline.
pub fn run(fast: bool) -> Vec<Check> {
    let list: Vec<&(&str, Probe)> = if fast { FAST.iter().collect() } else { FAST.iter().chain(SLOW).collect() };
    list.into_iter()
        .map(|(key, f)| f().unwrap_or_else(|e| Check::failed(key, &e)))
        .collect()
}

/// Fixed-width table, one line per check.
pub fn table(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let op = if c.lower { ">=" } else { "<=" };
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        match &c.error {
            Some(e) => out.push_str(&format!("{verdict}  {:width$}  error: {e}\n", c.name)),
            None => out.push_str(&format!("{verdict}  {:width$}  {:.3e} {op} {:.1e}\n", c.name, c.value, c.bound)),
        }
    }
    out
}
