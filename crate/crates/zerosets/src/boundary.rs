//! Boundary quadrature and the estimates living on `bD`: Hardy and
//! Nevanlinna norms, the maximal function, the operators `L_i` with their
//! weak-type test, and the exponential integrability of solutions.

use crate::dbar::{KernelParams, PsiKernel, SupportModel};
use crate::domain::Domain;
use crate::error::{Error, Result};
use crate::forms::{CarlesonBudget, DiscreteMeasure, ProbeSet};
use crate::geometry::Polydisc;
use crate::metric::MetricModel;
use crate::num::{self, C64};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// `|f|` below this is clipped inside `log|f|`.
pub const LOG_CLIP: f64 = 1e-14;

/// Points of `bD` with area weights. Level sets `bD_{-eps}` are the images
/// under `z -> (1 - eps) z`, exact for the gauge defining function.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BoundaryGrid {
    pub points: Vec<Vec<C64>>,
    pub weights: Vec<f64>,
    /// `eps` of the level set these points sit on.
    pub level: f64,
}

impl BoundaryGrid {
    /// Radial image of the tensor sphere rule. The cone map has Jacobian
    /// `R^{2n-1} / <nu, theta>` with `R = 1 / p(theta)`.
    pub fn product(domain: &Domain, m_u: usize, m_phi: usize) -> Result<Self> {
        let n = domain.dim();
        let rule = num::sphere_rule(n, m_u, m_phi);
        Self::from_directions(domain, rule)
    }

    /// Sobol directions on the sphere with equal solid-angle weights.
    pub fn sobol(domain: &Domain, count: usize, seed: u32) -> Result<Self> {
        if count == 0 {
            return Err(Error::InvalidInput("empty boundary grid".into()));
        }
        let n = domain.dim();
        let w = num::sphere_area(n) / count as f64;
        let rule = (0..count)
            .map(|i| (num::cube_to_sphere(&num::sobol(i, 2 * n - 1, seed), n), w))
            .collect();
        Self::from_directions(domain, rule)
    }

    fn from_directions(domain: &Domain, rule: Vec<(Vec<C64>, f64)>) -> Result<Self> {
        let n = domain.dim();
        let mut points = Vec::with_capacity(rule.len());
        let mut weights = Vec::with_capacity(rule.len());
        for (theta, w) in rule {
            let b = domain.boundary_projection(&theta)?;
            let big_r = num::norm(&b);
            let nu = domain.unit_normal(&b)?;
            let cos = num::hdot(&theta, &nu).re;
            if cos <= 0.0 {
                return Err(Error::Singular(format!("boundary not star-shaped at {b:?}")));
            }
            points.push(b);
            weights.push(w * big_r.powi(2 * n as i32 - 1) / cos);
        }
        Ok(Self { points, weights, level: 0.0 })
    }

    /// The same mesh pushed to `bD_{-eps}`.
    pub fn level_set(&self, eps: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eps) {
            return Err(Error::InvalidInput(format!("level eps = {eps} outside [0, 1)")));
        }
        let n = self.points.first().map_or(1, |p| p.len());
        let k = 1.0 - eps;
        let s = k.powi(2 * n as i32 - 1) / (1.0 - self.level).powi(2 * n as i32 - 1);
        let f = k / (1.0 - self.level);
        Ok(Self {
            points: self.points.iter().map(|p| num::scale_re(p, f)).collect(),
            weights: self.weights.iter().map(|w| w * s).collect(),
            level: eps,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate<F: FnMut(&[C64]) -> Result<f64>>(&self, mut f: F) -> Result<f64> {
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            acc += w * f(p)?;
        }
        Ok(acc)
    }
}

/// Default ladder for `sup_{eps > 0}`; `0` is the boundary itself.
pub fn default_ladder() -> Vec<f64> {
    vec![0.0, 1e-3, 1e-2, 0.05, 0.1, 0.2]
}

/// `(sup_eps int_{bD_{-eps}} |f|^p)^{1/p}` over the ladder.
pub fn hardy_norm<F>(f: F, p: f64, ladder: &[f64], grid: &BoundaryGrid) -> Result<f64>
where
    F: Fn(&[C64]) -> Result<C64>,
{
    if !(p > 0.0) {
        return Err(Error::InvalidInput(format!("p = {p} must be positive")));
    }
    let mut best: f64 = 0.0;
    for &eps in ladder {
        let g = grid.level_set(eps)?;
        best = best.max(g.integrate(|z| Ok(f(z)?.norm().powf(p)))?);
    }
    Ok(best.powf(1.0 / p))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NevanlinnaReport {
    pub value: f64,
    /// Largest area (over the ladder) where `|f|` was clipped at `LOG_CLIP`.
    pub clipped_mass: f64,
}

/// `sup_eps int_{bD_{-eps}} |log|f||` over the ladder.
pub fn nevanlinna_norm<F>(f: F, ladder: &[f64], grid: &BoundaryGrid) -> Result<NevanlinnaReport>
where
    F: Fn(&[C64]) -> Result<C64>,
{
    let mut value: f64 = 0.0;
    let mut clipped_mass: f64 = 0.0;
    for &eps in ladder {
        let g = grid.level_set(eps)?;
        let mut clipped = 0.0;
        let mut acc = 0.0;
        for (z, w) in g.points.iter().zip(&g.weights) {
            let a = f(z)?.norm();
            if a < LOG_CLIP {
                clipped += w;
            }
            acc += w * a.max(LOG_CLIP).ln().abs();
        }
        value = value.max(acc);
        clipped_mass = clipped_mass.max(clipped);
    }
    Ok(NevanlinnaReport { value, clipped_mass })
}

/// Largest cap size of the maximal function ladder.
pub const MAXIMAL_EPS_MAX: f64 = 0.5;

/// `sup_{eps >= d(zeta)}` of the mean of `|f|` over `P_eps(pi(zeta)) cap bD`,
/// on the geometric ladder `d 2^k`. Means use the grid weights on both sides.
pub fn maximal_fn(domain: &Domain, grid: &BoundaryGrid, values: &[f64], zeta: &[C64]) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput("values do not match the grid".into()));
    }
    let d = domain.point_query(zeta)?.d.max(1e-3);
    let base = domain.boundary_projection(zeta)?;
    let mut best: f64 = 0.0;
    let mut eps = d;
    while eps <= MAXIMAL_EPS_MAX * (1.0 + 1e-12) {
        let p = Polydisc::new(domain, &base, eps)?;
        let (mut num_, mut den) = (0.0, 0.0);
        for ((z, w), v) in grid.points.iter().zip(&grid.weights).zip(values) {
            if p.contains(z) {
                num_ += w * v.abs();
                den += w;
            }
        }
        if den > 0.0 {
            best = best.max(num_ / den);
        }
        eps *= 2.0;
    }
    Ok(best)
}

/// `L_i(f)(zeta) = int_{bD} psi_i(zeta, z) f(z) dsigma(z)`.
pub fn l_operator(psi: &PsiKernel, grid: &BoundaryGrid, f: &[f64], i: usize) -> Result<f64> {
    let mut acc = 0.0;
    for ((z, w), v) in grid.points.iter().zip(&grid.weights).zip(f) {
        if *v != 0.0 {
            acc += w * psi.psi(z, i)? * v;
        }
    }
    Ok(acc)
}

/// `max_s s nu{|g| >= s}`, attained at one of the values.
pub fn weak_norm(values: &[f64], weights: &[f64]) -> f64 {
    let mut pairs: Vec<(f64, f64)> = values.iter().map(|v| v.abs()).zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum = 0.0;
    let mut best: f64 = 0.0;
    for (v, w) in pairs {
        cum += w;
        best = best.max(v * cum);
    }
    best
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakTypeConfig {
    pub trials: usize,
    pub atoms: usize,
    /// Atom depths are log-uniform in this range.
    pub depth: (f64, f64),
    /// Cap sizes are log-uniform in this range.
    pub cap_eps: (f64, f64),
    pub grid_points: usize,
    pub seed: u64,
}

impl Default for WeakTypeConfig {
    fn default() -> Self {
        Self { trials: 100, atoms: 6, depth: (0.01, 0.2), cap_eps: (0.05, 0.5), grid_points: 512, seed: 41 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeakTypeReport {
    /// Per trial `max_i max_s s nu{|L_i f| >= s} / (||nu||_{W^1} ||f||_{L^1})`.
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    /// Max over the first half of the trials.
    pub half_max_ratio: f64,
}

impl WeakTypeReport {
    /// `max_ratio <= bound` and the second half did not more than double the max.
    pub fn bounded(&self, bound: f64) -> bool {
        self.max_ratio.is_finite() && self.max_ratio <= bound && self.max_ratio <= 2.0 * self.half_max_ratio.max(f64::MIN_POSITIVE)
    }
}

/// One weak-type ratio for a given measure and boundary data.
pub fn weak_type_ratio(
    params: &KernelParams,
    support: &SupportModel,
    metric: &MetricModel,
    grid: &BoundaryGrid,
    nu: &DiscreteMeasure,
    nu_norm: f64,
    f: &[f64],
) -> Result<f64> {
    let l1: f64 = grid.weights.iter().zip(f).map(|(w, v)| w * v.abs()).sum();
    if l1 == 0.0 {
        return Ok(0.0);
    }
    if !(nu_norm > 0.0) {
        return Err(Error::InvalidInput(format!("W1 norm {nu_norm} of a nonzero measure")));
    }
    let n = support.domain().dim();
    let mut per_i = vec![Vec::with_capacity(nu.points.len()); n];
    for zeta in &nu.points {
        let psi = PsiKernel::new(params, support, metric, zeta)?;
        for (i, vals) in per_i.iter_mut().enumerate() {
            vals.push(l_operator(&psi, grid, f, i)?);
        }
    }
    let best = per_i.iter().map(|v| weak_norm(v, &nu.weights)).fold(0.0, f64::max);
    Ok(best / (nu_norm * l1))
}

/// Random atoms near `bD` against random cap indicators. All trial atoms
/// seed one shared probe set for the `W^1` norms.
pub fn weak_type_test(
    params: &KernelParams,
    support: &SupportModel,
    metric: &MetricModel,
    config: &WeakTypeConfig,
    budget: &CarlesonBudget,
) -> Result<WeakTypeReport> {
    let domain = support.domain();
    let n = domain.dim();
    let grid = BoundaryGrid::sobol(domain, config.grid_points, config.seed as u32)?;
    let mut rng = num::rng(config.seed);
    let log_uniform = |rng: &mut rand_chacha::ChaCha8Rng, (a, b): (f64, f64)| (a.ln() + rng.random::<f64>() * (b / a).ln()).exp();
    let mut trials = Vec::with_capacity(config.trials);
    let mut seeds = Vec::new();
    for _ in 0..config.trials {
        let mut points = Vec::with_capacity(config.atoms);
        let mut weights = Vec::with_capacity(config.atoms);
        for _ in 0..config.atoms {
            let b = domain.boundary_projection(&num::random_unit(&mut rng, n))?;
            let d = log_uniform(&mut rng, config.depth);
            points.push(num::scale_re(&b, 1.0 - d));
            weights.push(rng.random_range(0.05..1.0));
        }
        seeds.extend(points.iter().cloned());
        let nu = DiscreteMeasure::new(points, weights)?;
        let f = loop {
            let b0 = domain.boundary_projection(&num::random_unit(&mut rng, n))?;
            let cap = Polydisc::new(domain, &b0, log_uniform(&mut rng, config.cap_eps))?;
            let f: Vec<f64> = grid.points.iter().map(|z| if cap.contains(z) { 1.0 } else { 0.0 }).collect();
            if f.iter().any(|v| *v > 0.0) {
                break f;
            }
        };
        trials.push((nu, f));
    }
    let probes = ProbeSet::new(domain, budget, &seeds)?;
    let mut ratios = Vec::with_capacity(trials.len());
    for (nu, f) in &trials {
        let norm = probes.evaluate(nu).norm;
        ratios.push(weak_type_ratio(params, support, metric, &grid, nu, norm, f)?);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    let half_max_ratio = ratios[..ratios.len().div_ceil(2)].iter().copied().fold(0.0, f64::max);
    Ok(WeakTypeReport { ratios, max_ratio, half_max_ratio })
}

/// Thresholds, `sigma(E_t)` and the exponential fit of its tail.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DistributionReport {
    pub thresholds: Vec<f64>,
    /// `sigma(E_t)` with `E_t = {v > t}`.
    pub measures: Vec<f64>,
    /// Fitted `C'` in `sigma(E_t) ~ C e^{-C' t}`; `None` when `v <= 0`.
    pub decay_rate: Option<f64>,
    /// `C' / ||nu||` (or `C'` without context); `None` means every `p` is admissible.
    pub p_star: Option<f64>,
    /// `r^2` of the log-linear fit.
    pub fit_r2: f64,
    /// Tail is exponential enough to trust `p_star`.
    pub fit_ok: bool,
    /// Exponent the integrals were taken at: `p_star / 2`, or 1.
    pub p: f64,
    pub direct: f64,
    pub layer_cake: f64,
    pub total_area: f64,
}

impl DistributionReport {
    pub fn layer_cake_error(&self) -> f64 {
        (self.direct - self.layer_cake).abs() / self.direct.abs().max(f64::MIN_POSITIVE)
    }

    pub fn is_monotone(&self) -> bool {
        self.measures.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Number of thresholds of the distribution curve.
pub const THRESHOLDS: usize = 48;
/// Trapezoid panels of the layer-cake integrals.
const LAYER_PANELS: usize = 4096;

/// Distribution of `v` under `sigma`, the tail fit and
/// `int exp(p v) dsigma` both directly and by the layer-cake formula
/// `sigma(bD) + int_0^inf p e^{pt} sigma(v > t) dt - int_{-inf}^0 p e^{pt} sigma(v <= t) dt`.
pub fn exp_integrability(values: &[f64], weights: &[f64], nu_norm: Option<f64>) -> Result<DistributionReport> {
    if values.len() != weights.len() || values.is_empty() {
        return Err(Error::InvalidInput("values and weights must be nonempty and match".into()));
    }
    if values.iter().any(|v| !v.is_finite()) || weights.iter().any(|w| !(*w >= 0.0)) {
        return Err(Error::InvalidInput("non-finite values or negative weights".into()));
    }
    let mut pairs: Vec<(f64, f64)> = values.iter().copied().zip(weights.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sorted: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    // suffix[k] = weight of pairs[k..]
    let mut suffix = vec![0.0; pairs.len() + 1];
    for k in (0..pairs.len()).rev() {
        suffix[k] = suffix[k + 1] + pairs[k].1;
    }
    let total_area = suffix[0];
    let above = |t: f64| suffix[sorted.partition_point(|v| *v <= t)];

    let vmax = *sorted.last().unwrap();
    let vmin = sorted[0];
    let (thresholds, measures): (Vec<f64>, Vec<f64>) = if vmax > 0.0 {
        (1..=THRESHOLDS).map(|k| vmax * k as f64 / THRESHOLDS as f64).map(|t| (t, above(t))).unzip()
    } else {
        (1..=THRESHOLDS).map(|k| (k as f64 / THRESHOLDS as f64, 0.0)).unzip()
    };

    let (xs, ys): (Vec<f64>, Vec<f64>) = thresholds
        .iter()
        .zip(&measures)
        .skip(THRESHOLDS / 4)
        .filter(|(_, m)| **m > 0.0)
        .map(|(t, m)| (*t, m.ln()))
        .unzip();
    let (decay_rate, fit_r2) = if vmax <= 0.0 {
        (None, 1.0)
    } else {
        match num::linear_fit(&xs, &ys).filter(|_| xs.len() >= 3) {
            Some((slope, intercept)) => (Some(-slope), r_squared(&xs, &ys, slope, intercept)),
            None => (Some(f64::NAN), 0.0),
        }
    };
    let fit_ok = match decay_rate {
        None => true,
        Some(c) => c.is_finite() && c > 0.0 && fit_r2 >= 0.8,
    };
    let p_star = decay_rate.map(|c| c / nu_norm.unwrap_or(1.0));
    let p = match p_star {
        Some(ps) if ps.is_finite() && ps > 0.0 => ps / 2.0,
        _ => 1.0,
    };

    let direct: f64 = pairs.iter().map(|(v, w)| w * (p * v).exp()).sum();
    let mut layer_cake = total_area;
    if vmax > 0.0 {
        layer_cake += trapezoid(0.0, vmax, |t| p * (p * t).exp() * above(t));
    }
    if vmin < 0.0 {
        layer_cake -= trapezoid(vmin, 0.0, |t| p * (p * t).exp() * (total_area - above(t)));
    }
    Ok(DistributionReport {
        thresholds,
        measures,
        decay_rate,
        p_star,
        fit_r2,
        fit_ok,
        p,
        direct,
        layer_cake,
        total_area,
    })
}

fn trapezoid<F: Fn(f64) -> f64>(a: f64, b: f64, f: F) -> f64 {
    let h = (b - a) / LAYER_PANELS as f64;
    let mut acc = 0.5 * (f(a) + f(b));
    for k in 1..LAYER_PANELS {
        acc += f(a + h * k as f64);
    }
    acc * h
}

fn r_squared(xs: &[f64], ys: &[f64], slope: f64, intercept: f64) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    let res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    if tot == 0.0 {
        1.0
    } else {
        1.0 - res / tot
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dbar::support_linear;
    use std::f64::consts::PI;

    fn ball() -> Domain {
        Domain::unit_ball(2)
    }

    #[test]
    fn grid_areas() {
        let d = ball();
        let g = BoundaryGrid::product(&d, 6, 8).unwrap();
        assert!((g.total_weight() - 2.0 * PI * PI).abs() < 1e-10);
        let s = BoundaryGrid::sobol(&d, 256, 3).unwrap();
        assert!((s.total_weight() - 2.0 * PI * PI).abs() < 1e-10);
        let l = g.level_set(0.1).unwrap();
        assert!((l.total_weight() - 2.0 * PI * PI * 0.9f64.powi(3)).abs() < 1e-10);
        assert!(g.weights.iter().all(|w| *w > 0.0));
        // ellipsoid area converges under refinement
        let e = Domain::ellipsoid(&[1, 2]).unwrap();
        let a1 = BoundaryGrid::product(&e, 16, 24).unwrap().total_weight();
        let a2 = BoundaryGrid::product(&e, 32, 48).unwrap().total_weight();
        assert!((a1 - a2).abs() < 0.02 * a2, "{a1} {a2}");
    }

    #[test]
    fn hardy_oracles() {
        let d = ball();
        let g = BoundaryGrid::product(&d, 6, 8).unwrap();
        let lad = default_ladder();
        let c = hardy_norm(|_| Ok(num::real(3.0)), 2.0, &lad, &g).unwrap();
        assert!((c - 3.0 * (2.0 * PI * PI).sqrt()).abs() < 1e-9);
        let z1 = hardy_norm(|z| Ok(z[0]), 2.0, &lad, &g).unwrap();
        assert!((z1 - PI).abs() < 1e-9, "{z1}");
        let half = hardy_norm(|z| Ok(z[0] * 0.5), 2.0, &lad, &g).unwrap();
        assert!(half <= z1);
    }

    #[test]
    fn nevanlinna_oracles() {
        let d = ball();
        let g = BoundaryGrid::product(&d, 6, 8).unwrap();
        let lad = default_ladder();
        assert_eq!(nevanlinna_norm(|_| Ok(num::real(1.0)), &lad, &g).unwrap().value, 0.0);
        let e = nevanlinna_norm(|_| Ok(num::real(1f64.exp())), &lad, &g).unwrap().value;
        assert!((e - 2.0 * PI * PI).abs() < 1e-9);
        let a = nevanlinna_norm(|z| Ok(z[0]), &lad, &BoundaryGrid::product(&d, 12, 16).unwrap()).unwrap();
        let b = nevanlinna_norm(|z| Ok(z[0]), &lad, &BoundaryGrid::product(&d, 24, 32).unwrap()).unwrap();
        assert!(a.value.is_finite() && (a.value - b.value).abs() < 0.02 * b.value, "{a:?} {b:?}");
    }

    #[test]
    fn maximal_function_of_constants_and_caps() {
        let d = ball();
        let g = BoundaryGrid::sobol(&d, 2048, 5).unwrap();
        let ones = vec![1.0; g.len()];
        let zeta = vec![num::c(0.0, 0.0), num::c(0.97, 0.0)];
        assert_eq!(maximal_fn(&d, &g, &ones, &zeta).unwrap(), 1.0);
        let b0 = vec![num::c(0.0, 0.0), num::c(1.0, 0.0)];
        let cap = Polydisc::new(&d, &b0, 0.3).unwrap();
        let f: Vec<f64> = g.points.iter().map(|z| if cap.contains(z) { 1.0 } else { 0.0 }).collect();
        let under = maximal_fn(&d, &g, &f, &zeta).unwrap();
        assert!((under - 1.0).abs() < 1e-12);
        let far = vec![num::c(0.97, 0.0), num::c(0.0, 0.0)];
        let mf = maximal_fn(&d, &g, &f, &far).unwrap();
        assert!(mf < 0.5, "{mf}");
        let g2: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        assert!(maximal_fn(&d, &g, &g2, &far).unwrap() >= mf);
    }

    #[test]
    fn weak_type_trivial_cases() {
        let d = ball();
        let metric = MetricModel::exact_ball(2);
        let support = support_linear(&d);
        let params = KernelParams::calibrated(2);
        let g = BoundaryGrid::sobol(&d, 128, 9).unwrap();
        let nu = DiscreteMeasure::atom(vec![num::c(0.0, 0.0), num::c(0.95, 0.0)], 1.0);
        let zero = vec![0.0; g.len()];
        assert_eq!(weak_type_ratio(&params, &support, &metric, &g, &nu, 1.0, &zero).unwrap(), 0.0);
        let f: Vec<f64> = g.points.iter().map(|z| if z[1].re > 0.7 { 1.0 } else { 0.0 }).collect();
        let f2: Vec<f64> = f.iter().map(|v| 2.0 * v).collect();
        let a = weak_type_ratio(&params, &support, &metric, &g, &nu, 1.0, &f).unwrap();
        let b = weak_type_ratio(&params, &support, &metric, &g, &nu, 1.0, &f2).unwrap();
        assert!(a > 0.0 && (a - b).abs() < 1e-12 * a);
    }

    #[test]
    fn weak_norm_is_layer_max() {
        let v = [3.0, 1.0, 2.0];
        let w = [1.0, 1.0, 1.0];
        // s = 3 -> 3, s = 2 -> 4, s = 1 -> 3
        assert_eq!(weak_norm(&v, &w), 4.0);
    }

    #[test]
    fn zero_solution_admits_every_p() {
        let r = exp_integrability(&[0.0; 10], &[0.1; 10], None).unwrap();
        assert!(r.measures.iter().all(|m| *m == 0.0));
        assert!(r.p_star.is_none() && r.fit_ok);
        assert!((r.direct - 1.0).abs() < 1e-12 && (r.layer_cake - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_tail_is_recovered() {
        // v = -log(u) / 3 under uniform u has sigma(v > t) = e^{-3t}
        let m = 20000;
        let vals: Vec<f64> = (0..m).map(|k| -(((k as f64) + 0.5) / m as f64).ln() / 3.0).collect();
        let w = vec![1.0 / m as f64; m];
        let r = exp_integrability(&vals, &w, Some(1.5)).unwrap();
        assert!(r.is_monotone() && r.fit_ok);
        assert!((r.decay_rate.unwrap() - 3.0).abs() < 0.3, "{:?}", r.decay_rate);
        assert!((r.p_star.unwrap() - 2.0).abs() < 0.2);
        assert!(r.layer_cake_error() < 0.02, "{} {}", r.direct, r.layer_cake);
    }

    #[test]
    fn cap_bump_integral_matches_one_dimensional_oracle() {
        // on S^3 the law of |z_1|^2 is uniform, so int g(|z_1|^2) = 2 pi^2 int_0^1 g
        let d = ball();
        let grid = BoundaryGrid::product(&d, 24, 6).unwrap();
        let bump = |u: f64| 2.0 * num::smooth_step((u - 0.6) / 0.3).0 - 0.5;
        let vals: Vec<f64> = grid.points.iter().map(|z| bump(z[0].norm_sqr())).collect();
        let r = exp_integrability(&vals, &grid.weights, None).unwrap();
        let oracle: f64 = num::gauss_legendre(200, 0.0, 1.0)
            .iter()
            .map(|(u, w)| w * (r.p * bump(*u)).exp())
            .sum::<f64>()
            * 2.0
            * PI
            * PI;
        assert!((r.direct - oracle).abs() < 1e-3 * oracle, "{} {oracle}", r.direct);
        assert!(r.layer_cake_error() < 0.02);
        assert!(r.is_monotone());
    }
}

#[cfg(test)]
mod sweep {
    use super::*;
    use crate::dbar::support_linear;

    #[test]
    fn weak_type_sweep_is_bounded() {
        let d = Domain::unit_ball(2);
        let metric = MetricModel::exact_ball(2);
        let support = support_linear(&d);
        let params = KernelParams::calibrated(2);
        let r = weak_type_test(&params, &support, &metric, &WeakTypeConfig::default(), &CarlesonBudget::default()).unwrap();
        assert_eq!(r.ratios.len(), 100);
        assert!(r.bounded(1e3));
    }
}
