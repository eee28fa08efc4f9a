//! Acceptance suite: one PASS/FAIL line per criterion. Runs without the
//! libtest harness so the lines always reach stdout.

use rand::Rng;
use std::f64::consts::PI;
use std::sync::Arc;
use std::time::{Duration, Instant};
use zerosets::boundary::{self, BoundaryGrid, WeakTypeConfig};
use zerosets::dbar::{self, support_linear, KernelParams};
use zerosets::domain::{DefiningForm, Domain};
use zerosets::forms::{CarlesonBudget, DivisorModel, FormField, LocalizedLelong};
use zerosets::geometry::{self, Polydisc};
use zerosets::homotopy::{self, Homotopy, RetractParams};
use zerosets::matrix::{self, ContourSpec};
use zerosets::metric::MetricModel;
use zerosets::num::{self, c, C64};
use zerosets::pipeline::{self, PipelineConfig, LEVELS};
use zerosets::Result;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Result<Verdict> {
    Ok(Verdict { pass, detail })
}

/// Random point at analytic distance `d` in `[lo, hi]` from `bD`.
fn near_boundary<R: Rng>(rng: &mut R, dom: &Domain, lo: f64, hi: f64) -> Result<Vec<C64>> {
    let dir = num::random_unit(rng, dom.dim());
    let b = dom.boundary_projection(&dir)?;
    let target = lo + (hi - lo) * rng.random::<f64>();
    // bisection on the ray toward the origin for d(z) = target
    let (mut a, mut s) = (0.0f64, 1.0f64);
    for _ in 0..60 {
        let m = 0.5 * (a + s);
        if dom.d(DefiningForm::Analytic, &num::scale_re(&b, 1.0 - m))? < target {
            a = m;
        } else {
            s = m;
        }
    }
    Ok(num::scale_re(&b, 1.0 - 0.5 * (a + s)))
}

fn sylvester_oracle() -> Result<Verdict> {
    let start = Instant::now();
    let mut rng = num::rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=6);
        let m = matrix::random_hpd(&mut rng, n, 1e6);
        let cm = matrix::random_herm(&mut rng, n);
        let direct = matrix::sylvester_direct(&m, &cm);
        let contour = matrix::sylvester_contour(&m, &cm, &ContourSpec::relative(&m, 0.25)?)?;
        worst = worst.max(num::frobenius(&(contour - &direct)) / num::frobenius(&direct));
    }
    let t = start.elapsed();
    verdict(worst <= 1e-8 && t <= Duration::from_secs(60), format!("max rel err {worst:.2e} over 1000 systems, {t:.1?}"))
}

fn matrix_round_trip() -> Result<Verdict> {
    let mut rng = num::rng(102);
    let mut worst: f64 = 0.0;
    for _ in 0..300 {
        let n = rng.random_range(1..=5);
        let b = matrix::random_hpd(&mut rng, n, 1e4);
        let hp = matrix::random_herm(&mut rng, n);
        let h = matrix::dphi_inverse(&b, &hp, 0.25)?;
        let back = matrix::dphi(&matrix::inv_sqrt(&b), &h);
        worst = worst.max(num::frobenius(&(back - &hp)) / num::frobenius(&hp));
    }
    let metric = MetricModel::exact_ball(2);
    let dom = Domain::unit_ball(2);
    let mut da_err: f64 = 0.0;
    for _ in 0..300 {
        let zeta = near_boundary(&mut rng, &dom, 0.05, 0.6)?;
        let u = num::random_unit(&mut rng, 2);
        let a = metric.da(&zeta, &u)?;
        let f = metric.da_fd(&zeta, &u)?;
        da_err = da_err.max(num::frobenius(&(a - &f)) / num::frobenius(&f));
    }
    verdict(
        worst <= 1e-7 && da_err <= 1e-4,
        format!("round trip {worst:.2e} (300), dA vs differences {da_err:.2e} (300)"),
    )
}

fn geometry_suite() -> Result<Verdict> {
    let start = Instant::now();
    let domains = [Domain::unit_ball(2), Domain::ellipsoid(&[1, 2])?, Domain::ellipsoid(&[1, 3])?];
    let mut rng = num::rng(103);
    let (mut homog, mut doubling, mut decomp, mut engulf): (f64, f64, f64, f64) = (0.0, 1.0, 1.0, 0.0);
    for dom in &domains {
        let m = dom.finite_type() as f64;
        for _ in 0..40 {
            let z = near_boundary(&mut rng, dom, 1e-3, 0.2)?;
            let v = num::random_unit(&mut rng, 2);
            let lam = C64::from_polar(0.1 + 3.0 * rng.random::<f64>(), 2.0 * PI * rng.random::<f64>());
            let e1 = 10f64.powf(-4.0 + 3.4 * rng.random::<f64>());
            let e2 = e1 * 10f64.powf(-2.0 * rng.random::<f64>());
            let t1 = geometry::tau(dom, &z, &v, e1)?;
            let t2 = geometry::tau(dom, &z, &v, e2)?;
            let tl = geometry::tau(dom, &z, &num::scale(&v, lam), e1)? * lam.norm();
            homog = homog.max((tl - t1).abs() / t1);
            let (ratio, er) = (t1 / t2, e1 / e2);
            doubling = doubling.max(er.powf(1.0 / m) / ratio).max(ratio / er);
            let frame = geometry::extremal_basis(dom, &z, e1)?;
            let sum: f64 = frame.components(&v).iter().zip(&frame.radii).map(|(x, t)| x.norm() / t).sum();
            let q = sum * t1;
            decomp = decomp.max(q).max(1.0 / q);
            // engulfing: zeta in P_eps(z) witnesses the intersection
            let pz = Polydisc { frame };
            let zeta = pz.sample(&mut rng, 0.9);
            if dom.contains(&zeta) {
                let pzeta = Polydisc::new(dom, &zeta, e1)?;
                for _ in 0..20 {
                    engulf = engulf.max(pzeta.gauge(&pz.sample(&mut rng, 1.0)));
                }
            }
        }
    }
    let bz = [c(1.0, 0.0), c(0.0, 0.0)];
    let by = [c(0.0, 0.0), c(1.0, 0.0)];
    let e12 = Domain::ellipsoid(&[1, 2])?;
    let e13 = Domain::ellipsoid(&[1, 3])?;
    let orders = [
        (geometry::contact_order_estimate(&e12, &bz, &num::unit(2, 1))?, 4.0),
        (geometry::contact_order_estimate(&e13, &bz, &num::unit(2, 1))?, 6.0),
        (geometry::contact_order_estimate(&e12, &by, &num::unit(2, 0))?, 2.0),
        (geometry::contact_order_estimate(&e13, &by, &num::unit(2, 0))?, 2.0),
    ];
    let order_err = orders.iter().map(|(g, w)| (g - w).abs() / w).fold(0.0, f64::max);
    let t = start.elapsed();
    verdict(
        homog <= 1e-7 && doubling <= 4.0 && decomp <= 8.0 && engulf.is_finite() && order_err <= 0.05 && t <= Duration::from_secs(300),
        format!(
            "homogeneity {homog:.1e}, doubling C {doubling:.2}, decomposition C {decomp:.2}, engulfing C {engulf:.2}, contact order err {:.1}%, {t:.1?}",
            100.0 * order_err
        ),
    )
}

fn metric_comparability() -> Result<Verdict> {
    let mut rng = num::rng(104);
    let mut band = [1.0f64; 2];
    let models = [MetricModel::exact_ball(2), MetricModel::surrogate(Domain::ellipsoid(&[1, 2])?)];
    for (k, model) in models.iter().enumerate() {
        let dom = model.domain().clone();
        for _ in 0..500 {
            let zeta = near_boundary(&mut rng, &dom, 1e-3, 0.25)?;
            let v = num::random_unit(&mut rng, 2);
            let d = dom.d(DefiningForm::Analytic, &zeta)?;
            let x = model.norm(&zeta, &v)? * geometry::tau(&dom, &zeta, &v, d)?;
            band[k] = band[k].max(x).max(1.0 / x);
        }
    }
    // normalized derivative bound: finite at two scales, stable when the sample budget doubles
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 1.0;
    for dom in [Domain::unit_ball(2), Domain::ellipsoid(&[1, 2])?] {
        let zeta = dom.boundary_projection(&[c(0.6, 0.0), c(0.8, 0.0)])?;
        let zeta = num::scale_re(&zeta, 0.995);
        for (a, b) in [([1, 0], [0, 0]), ([0, 1], [0, 0]), ([1, 0], [1, 0]), ([0, 1], [0, 1]), ([1, 1], [0, 0])] {
            let x = geometry::derivative_bound_check(&dom, &zeta, 0.02, &a, &b, 200, 7)?.max_ratio;
            let y = geometry::derivative_bound_check(&dom, &zeta, 0.02, &a, &b, 400, 8)?.max_ratio;
            let half = geometry::derivative_bound_check(&dom, &zeta, 0.01, &a, &b, 400, 9)?.max_ratio;
            worst = worst.max(x).max(y).max(half);
            if x > 1e-3 && y > 1e-3 {
                drift = drift.max(x / y).max(y / x);
            }
        }
    }
    verdict(
        band[0] <= 10.0 && band[1] <= 10.0 && worst.is_finite() && drift <= 2.0,
        format!(
            "band ball {:.2}, ellipsoid surrogate {:.2} (500 each); derivative bound {worst:.2}, budget drift {drift:.2}",
            band[0], band[1]
        ),
    )
}

fn homotopy_identity() -> Result<Verdict> {
    let start = Instant::now();
    let dom = Domain::unit_ball(2);
    let metric = MetricModel::exact_ball(2);
    let mut rng = num::rng(105);
    let probes: Vec<Vec<C64>> = (0..50).map(|_| near_boundary(&mut rng, &dom, 0.01, 0.19)).collect::<Result<_>>()?;
    let inputs = ["z1", "z1 - 0.5*z2", "z1*z2"];
    let mut errs = vec![[0.0f64; 3]; inputs.len()];
    for (k, poly) in inputs.iter().enumerate() {
        let div = DivisorModel::parse(poly, 2, 1.0, 0.1)?;
        let theta: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&div, &dom, 0.2));
        for level in 0..3 {
            let h = Homotopy::new(RetractParams::at_level(level)?, metric.clone(), theta.clone())?;
            let (mut e, mut s) = (0.0, 0.0);
            for z in &probes {
                // the cutoff onset has large high derivatives; 5e-4 keeps the oracle below level 2
                let chk = homotopy::d_omega_check(|w| h.omega_real(w), &theta.coefficients(z)?, z, 5e-4)?;
                e += chk.error * chk.error;
                s += chk.scale * chk.scale;
            }
            errs[k][level] = (e / s).sqrt();
        }
    }
    let default_ok = errs.iter().all(|e| e[1] <= 1e-2);
    let decreasing = errs.iter().all(|e| e[0] > e[1] && e[1] > e[2]);
    let a = homotopy::regime_report(&RetractParams::default(), &metric, 100, 3)?;
    let b = homotopy::regime_report(&RetractParams::default(), &metric, 200, 4)?;
    let (ca, cb) = (a.max_constant(), b.max_constant());
    let stable = ca.is_finite() && cb.is_finite() && cb <= 2.0 * ca && ca <= 2.0 * cb;
    let t = start.elapsed();
    let table: Vec<String> = errs.iter().map(|e| format!("{:.1e}/{:.1e}/{:.1e}", e[0], e[1], e[2])).collect();
    verdict(
        default_ok && decreasing && stable && t <= Duration::from_secs(900),
        format!("rel err by level {} (50 probes), regime C {ca:.2} -> {cb:.2}, {t:.1?}", table.join(", ")),
    )
}

fn dbar_solver() -> Result<Verdict> {
    let support = support_linear(&Domain::unit_ball(2));
    let p = KernelParams::calibrated(2);
    let r0 = dbar::known_primitive_residual(&p, &support)?;
    let r1 = dbar::known_primitive_residual(&p.refined(), &support)?;
    let s1 = support_linear(&Domain::unit_ball(1));
    let cal = dbar::calibrate_cn(&KernelParams::calibrated(1), &s1)?;
    let cauchy = 1.0 / (2.0 * PI);
    let cn_err = (cal.cn - cauchy).abs() / cauchy;
    verdict(
        r0 <= 5e-2 && r1 < r0 && cn_err <= 1e-2,
        format!("known primitive residual {r0:.2e} -> {r1:.2e} refined, n=1 constant off by {:.2}%", 100.0 * cn_err),
    )
}

fn estimate_battery() -> Result<Verdict> {
    let dom = Domain::unit_ball(2);
    let support = support_linear(&dom);
    let p = KernelParams::calibrated(2);
    let metric = MetricModel::exact_ball(2);
    let zeta = [c(0.0, 0.0), c(0.0, 0.99)];
    let decay = dbar::psi_decay(&p, &support, &metric, &zeta, 5, 40, 3)?.decay_exponent().unwrap_or(f64::NAN);
    let ratio = dbar::kernel_boundary_mass(&p, &support, &metric, &zeta, 40, 6)?.geometric_ratio().unwrap_or(f64::NAN);
    let weak = boundary::weak_type_test(&p, &support, &metric, &WeakTypeConfig::default(), &CarlesonBudget::default())?;
    let grid = BoundaryGrid::product(&dom, 24, 24)?;
    let v: Vec<f64> = grid.points.iter().map(|z| -(1.0 - z[0].re + 1e-2).ln()).collect();
    let dist = boundary::exp_integrability(&v, &grid.weights, Some(1.0))?;
    let lc = dist.layer_cake_error();
    verdict(
        decay >= 0.4 && ratio <= 0.75 && weak.ratios.len() == 100 && weak.bounded(1e3) && lc <= 2e-2,
        format!(
            "psi decay {decay:.3}, shell ratio {ratio:.3}, weak-type max {:.3} over {} trials, layer cake {lc:.1e}",
            weak.max_ratio,
            weak.ratios.len()
        ),
    )
}

fn pipeline_end_to_end() -> Result<Verdict> {
    let start = Instant::now();
    let mut res = Vec::new();
    let mut last = None;
    for level in 0..LEVELS {
        let r = pipeline::run(&PipelineConfig { level, ..Default::default() }, None)?;
        res.push(r.residual);
        if level == PipelineConfig::default().level {
            last = Some(r);
        }
    }
    let r = last.expect("default level is in range");
    let t = start.elapsed();
    let p_star = r.p_star().unwrap_or(f64::NAN);
    let monotone = res.windows(2).all(|w| w[1] < w[0]);
    let bl = (r.blaschke.value - PI / 2.0).abs() / (PI / 2.0);
    verdict(
        r.residual <= 1e-1 && monotone && p_star.is_finite() && p_star > 0.0 && bl <= 1e-2 && t <= Duration::from_secs(1800),
        format!(
            "residual by level {:.2e}/{:.2e}/{:.2e}, p* {p_star:.3}, Blaschke {:.7} (pi/2), {t:.1?}",
            res[0], res[1], res[2], r.blaschke.value
        ),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Verdict>); 8] = [
        ("Sylvester oracle equivalence", sylvester_oracle),
        ("matrix calculus round trip", matrix_round_trip),
        ("geometry property suite", geometry_suite),
        ("metric comparability", metric_comparability),
        ("homotopy identity", homotopy_identity),
        ("dbar solver", dbar_solver),
        ("boundary estimate battery", estimate_battery),
        ("end-to-end pipeline", pipeline_end_to_end),
    ];
    // `cargo test -- <filter>` style selection by criterion number
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let id = k + 1;
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let (pass, detail) = match f() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        println!("criterion {id} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
