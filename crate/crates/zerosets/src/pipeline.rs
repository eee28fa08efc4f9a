//! End-to-end run for a divisor in the ball: Carleson norm of `d theta_s`,
//! `omega = H theta`, `w = -i omega`, `v = solve_dbar(w_{0,1})`,
//! `u = 2 Re v`, then finite-difference checks of `i ddbar u` and the
//! distribution of `Re v` on `bD`.

use crate::boundary::{self, BoundaryGrid, DistributionReport};
use crate::dbar::{self, support_linear, KernelParams, SupportModel};
use crate::domain::{DomainKind, Domain};
use crate::error::{Error, Result};
use crate::forms::{self, BlaschkeReport, CarlesonBudget, CellBudget, DivisorModel, FormField, LocalizedLelong};
use crate::homotopy::{self, Homotopy, RetractAt, RetractParams};
use crate::metric::MetricModel;
use crate::num::{self, C64, CMat};
use serde::{Deserialize, Serialize};
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::Arc;

pub const SCHEMA: &str = "zerosets.pipeline/1";
/// Budget levels are `0..LEVELS`.
pub const LEVELS: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub polynomial: String,
    pub weight: f64,
    pub s: f64,
    pub eps0: f64,
    pub level: usize,
    pub probes: usize,
    /// Probe distances to `bD` are uniform in this range.
    pub probe_depth: (f64, f64),
    /// Largest `|z_1|` of a probe.
    pub probe_spread: f64,
    pub fd_step: f64,
    pub seed: u64,
    pub carleson: CarlesonBudget,
    pub cells: CellBudget,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            polynomial: "z1".into(),
            weight: 1.0,
            s: 0.1,
            eps0: 0.6,
            level: 1,
            probes: 8,
            probe_depth: (0.02, 0.1),
            probe_spread: 0.2,
            fd_step: 5e-3,
            seed: 7,
            carleson: CarlesonBudget::default(),
            cells: CellBudget::default(),
        }
    }
}

/// Everything that is refined together between levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelBudget {
    pub t_nodes: usize,
    pub t_panel: f64,
    pub cache: CacheLayout,
    pub kernel: KernelParams,
    pub shell_nodes: usize,
    pub boundary_points: usize,
}

pub fn level_budget(level: usize) -> Result<LevelBudget> {
    let base = KernelParams::calibrated(2);
    let (t_nodes, cr, grid, bp) = match level {
        0 => (4, (5, 6, 6), (12, 6, 12), 32),
        1 => (6, (7, 8, 8), (base.radial, base.sphere_u, base.sphere_phi), 64),
        2 => (8, (9, 10, 10), (24, 12, 24), 96),
        _ => return Err(Error::InvalidInput(format!("budget level {level} (expected 0..{LEVELS})"))),
    };
    let retract = RetractParams::at_level(level)?;
    debug_assert_eq!(retract.t_nodes, t_nodes);
    Ok(LevelBudget {
        t_nodes,
        t_panel: retract.t_panel,
        cache: CacheLayout { radial: cr.0, transition_panels: cr.1, angular: cr.2 },
        kernel: KernelParams { radial: grid.0, sphere_u: grid.1, sphere_phi: grid.2, ..base },
        shell_nodes: cr.0,
        boundary_points: bp,
    })
}

/// Chebyshev first-kind nodes (interior points) on `[a, b]`.
fn cheb_nodes(m: usize, (a, b): (f64, f64)) -> Vec<f64> {
    (0..m)
        .map(|k| {
            let c = (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * m) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * c
        })
        .collect()
}

/// Barycentric weights of the first-kind nodes at `x`.
fn cheb_weights(m: usize, (a, b): (f64, f64), x: f64) -> Vec<f64> {
    let nodes = cheb_nodes(m, (a, b));
    if let Some(k) = nodes.iter().position(|t| *t == x) {
        let mut w = vec![0.0; m];
        w[k] = 1.0;
        return w;
    }
    let raw: Vec<f64> = (0..m)
        .map(|k| {
            let s = if k % 2 == 0 { 1.0 } else { -1.0 };
            let h = (std::f64::consts::PI * (2 * k + 1) as f64 / (2 * m) as f64).sin();
            s * h / (x - nodes[k])
        })
        .collect();
    let sum: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / sum).collect()
}

/// Panels of a piecewise Chebyshev axis.
#[derive(Clone, Debug)]
struct Axis {
    breaks: Vec<f64>,
    m: usize,
}

impl Axis {
    fn panels(&self) -> usize {
        self.breaks.len() - 1
    }

    fn panel(&self, k: usize) -> (f64, f64) {
        (self.breaks[k], self.breaks[k + 1])
    }

    fn locate(&self, x: f64) -> usize {
        let k = self.breaks.partition_point(|b| *b <= x);
        k.clamp(1, self.panels()) - 1
    }

    /// All nodes, panel by panel.
    fn nodes(&self) -> Vec<f64> {
        (0..self.panels()).flat_map(|k| cheb_nodes(self.m, self.panel(k))).collect()
    }
}

/// Tensor piecewise Chebyshev interpolant, barycentric inside each panel.
#[derive(Clone, Debug)]
struct Cheb2 {
    x: Axis,
    y: Axis,
    /// `values[i * ny + j]` over the node lists of both axes.
    values: Vec<Vec<C64>>,
}

impl Cheb2 {
    fn eval(&self, x: f64, y: f64) -> Vec<C64> {
        let (px, py) = (self.x.locate(x), self.y.locate(y));
        let wx = cheb_weights(self.x.m, self.x.panel(px), x);
        let wy = cheb_weights(self.y.m, self.y.panel(py), y);
        let ny = self.y.m * self.y.panels();
        let len = self.values[0].len();
        let mut out = vec![C64::new(0.0, 0.0); len];
        for (i, a) in wx.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in wy.iter().enumerate() {
                if *b == 0.0 {
                    continue;
                }
                let idx = (px * self.x.m + i) * ny + py * self.y.m + j;
                for (o, v) in out.iter_mut().zip(&self.values[idx]) {
                    *o += v * (a * b);
                }
            }
        }
        out
    }
}

/// `omega = H theta` for a torus-invariant `theta` on the ball in `C^2`.
/// Invariance gives `a_j(z) = conj(z_j) b_j(|z|, xi)` with `b_j` smooth in
/// `xi = |z_1|^2 / |z|^2`; `b_j` is interpolated at representatives with
/// real positive coordinates. Zero for `|z| <= r0`, where every retract
/// image stays outside the support.
#[derive(Clone, Debug)]
pub struct OmegaCache {
    r0: f64,
    cheb: Cheb2,
}

/// Node layout of the cache.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CacheLayout {
    /// Nodes per panel along `|z|`.
    pub radial: usize,
    /// Panels from `r0` across the cutoff zone `eps0/2 <= d <= eps0`.
    pub transition_panels: usize,
    /// Nodes per panel along `xi`.
    pub angular: usize,
}

impl OmegaCache {
    /// `s` places the `xi` panel breaks at `4 s^2` and `20 s^2`, where
    /// `|z_1|^2 + s^2` varies fastest.
    pub fn build(h: &Homotopy, layout: &CacheLayout, s: f64) -> Result<Self> {
        let domain = h.domain();
        if domain.kind() != DomainKind::UnitBall || domain.dim() != 2 {
            return Err(Error::Unsupported("the omega cache needs the unit ball in C^2".into()));
        }
        if layout.radial < 2 || layout.angular < 2 || layout.transition_panels == 0 {
            return Err(Error::InvalidInput("cache needs at least 2 nodes per panel".into()));
        }
        let rep = |r: f64, xi: f64| vec![num::real(r * xi.sqrt()), num::real(r * (1.0 - xi).sqrt())];
        // t_start = 1 means the whole t-range is skipped
        let vanishes = |r: f64| -> Result<bool> {
            Ok(RetractAt::new(&h.params, &h.metric, &rep(r, 1.0))?.t_start() >= 1.0)
        };
        let (mut lo, mut hi) = (1e-3, 1.0 - 1e-3);
        if !vanishes(lo)? {
            lo = 0.0;
        } else {
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if vanishes(mid)? {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        let r0 = lo;
        // uniform panels from r0 across the cutoff zone, one panel above
        let t_hi = 1.0 - 0.4 * h.params.eps0;
        let mut rb = vec![r0];
        for k in 1..=layout.transition_panels {
            rb.push(r0 + (t_hi - r0) * k as f64 / layout.transition_panels as f64);
        }
        rb.push(1.0);
        let mut yb = vec![0.0];
        yb.extend([4.0 * s * s, 20.0 * s * s].into_iter().filter(|b| *b < 0.5));
        yb.push(1.0);
        let x = Axis { breaks: rb, m: layout.radial };
        let y = Axis { breaks: yb, m: layout.angular };
        let (rs, xs) = (x.nodes(), y.nodes());
        let mut values = Vec::with_capacity(rs.len() * xs.len());
        for r in &rs {
            for xi in &xs {
                let z = rep(*r, *xi);
                let a = h.omega(&z)?;
                values.push(a.iter().zip(&z).map(|(aj, zj)| aj / zj.re).collect());
            }
        }
        Ok(Self { r0, cheb: Cheb2 { x, y, values } })
    }

    pub fn inner_radius(&self) -> f64 {
        self.r0
    }

    /// Panel breaks along `|z|`; the data is only piecewise smooth across them.
    pub fn radii(&self) -> &[f64] {
        &self.cheb.x.breaks
    }

    /// `a_j` of `omega = 2 Re sum a_j dz_j`.
    pub fn omega(&self, z: &[C64]) -> Vec<C64> {
        let r = num::norm(z);
        if r <= self.r0 {
            return vec![C64::new(0.0, 0.0); z.len()];
        }
        let xi = z[0].norm_sqr() / (r * r);
        let b = self.cheb.eval(r, xi);
        b.iter().zip(z).map(|(bj, zj)| bj * zj.conj()).collect()
    }

    pub fn w01(&self, z: &[C64]) -> Vec<C64> {
        homotopy::split(&self.omega(z)).w01
    }

    /// Node table `(R, xi, Re b_1, Im b_1, ...)`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut head = vec!["R".to_string(), "xi".to_string()];
        for j in 1..=2 {
            head.push(format!("re_b{j}"));
            head.push(format!("im_b{j}"));
        }
        w.write_record(&head)?;
        let rs = self.cheb.x.nodes();
        let xs = self.cheb.y.nodes();
        for (i, r) in rs.iter().enumerate() {
            for (j, xi) in xs.iter().enumerate() {
                let mut row = vec![r.to_string(), xi.to_string()];
                for b in &self.cheb.values[i * xs.len() + j] {
                    row.push(b.re.to_string());
                    row.push(b.im.to_string());
                }
                w.write_record(&row)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `v(z) = int K(zeta, z) ^ w_{0,1}(zeta)` with the cached `w`.
pub struct Solution {
    pub kernel: KernelParams,
    /// Gauss nodes per shell panel of the polar grid.
    pub shell_nodes: usize,
    pub support: SupportModel,
    pub cache: OmegaCache,
}

impl Solution {
    pub fn v(&self, z: &[C64]) -> Result<C64> {
        let c = &self.cache;
        let grid = dbar::shell_polar_grid(&self.kernel, self.support.domain(), z, c.radii(), self.shell_nodes, c.inner_radius())?;
        dbar::solve_on_grid(&self.kernel, &self.support, &grid, z, |zeta| Ok(self.cache.w01(zeta)))
    }

    pub fn u(&self, z: &[C64]) -> Result<f64> {
        Ok(2.0 * self.v(z)?.re)
    }
}

/// Complex directions whose Levi values determine a Hermitian 2 x 2 matrix.
pub fn levi_directions() -> Vec<Vec<C64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    vec![
        vec![num::real(1.0), num::real(0.0)],
        vec![num::real(0.0), num::real(1.0)],
        vec![num::real(s), num::real(s)],
        vec![num::real(s), num::c(0.0, s)],
    ]
}

/// `sum u_{j conj k} e_j conj(e_k)` as a quarter of the Laplacian of `u`
/// on the complex line through `z` along unit `e`, five-point stencil.
pub fn levi_fd<F: Fn(&[C64]) -> Result<f64>>(u: &F, z: &[C64], e: &[C64], h: f64, center: f64) -> Result<f64> {
    let mut acc = -4.0 * center;
    for s in [num::real(h), num::real(-h), num::c(0.0, h), num::c(0.0, -h)] {
        acc += u(&num::axpy(z, s, e))?;
    }
    Ok(acc / (4.0 * h * h))
}

/// `e^T Theta conj(e)` for `theta = i sum Theta_jk dz_j ^ d conj(z_k)`.
pub fn levi_value(theta: &CMat, e: &[C64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..e.len() {
        for k in 0..e.len() {
            acc += e[j] * theta[(j, k)] * e[k].conj();
        }
    }
    acc.re
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProbeRecord {
    pub z: Vec<C64>,
    pub d: f64,
    /// `levi(u)` along each of `levi_directions()`.
    pub levi_u: Vec<f64>,
    /// `levi(potential)` along the same directions.
    pub levi_potential: Vec<f64>,
    pub levi_theta: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub schema: String,
    pub config: PipelineConfig,
    pub budget: LevelBudget,
    /// (a) `||d theta_s||` over the probe ladder.
    pub carleson_norm: f64,
    pub carleson_probes: usize,
    pub cache_inner_radius: f64,
    /// (b) `|| i ddbar u - theta ||_2 / || theta ||_2` over probes and directions.
    pub residual: f64,
    /// (c) the same for `i ddbar (u - chi Psi)` against zero.
    pub defect: f64,
    /// `|| theta ||_2`, the scale of (b) and (c).
    pub theta_scale: f64,
    /// (d) distribution of `Re v` on `bD`.
    pub distribution: DistributionReport,
    pub blaschke: BlaschkeReport,
    pub probes: Vec<ProbeRecord>,
    /// Hash of the probe coordinates, the FD step and the boundary grid.
    pub probe_hash: String,
}

impl PipelineReport {
    /// `p*` from the tail fit; `None` when every `p` is admissible.
    pub fn p_star(&self) -> Option<f64> {
        self.distribution.p_star
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per probe and direction.
    pub fn write_probes_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["probe", "direction", "d", "levi_u", "levi_potential", "levi_theta"])?;
        for (i, p) in self.probes.iter().enumerate() {
            for k in 0..p.levi_u.len() {
                w.write_record([
                    i.to_string(),
                    k.to_string(),
                    p.d.to_string(),
                    p.levi_u[k].to_string(),
                    p.levi_potential[k].to_string(),
                    p.levi_theta[k].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Probe points `z = R (cos phi e^{i a}, sin phi e^{i b})` near `bD` and
/// near the divisor `z_1 = 0`.
pub fn probe_points(config: &PipelineConfig) -> Vec<Vec<C64>> {
    let mut rng = num::rng(config.seed);
    (0..config.probes)
        .map(|_| {
            let (lo, hi) = config.probe_depth;
            let d = lo + (hi - lo) * rand::Rng::random::<f64>(&mut rng);
            let r = 1.0 - d;
            let z1 = config.probe_spread * rand::Rng::random::<f64>(&mut rng);
            let phi = (z1 / r).min(1.0).acos();
            let a = 2.0 * std::f64::consts::PI * rand::Rng::random::<f64>(&mut rng);
            let b = 2.0 * std::f64::consts::PI * rand::Rng::random::<f64>(&mut rng);
            vec![C64::from_polar(r * phi.cos(), a), C64::from_polar(r * phi.sin(), b)]
        })
        .collect()
}

fn hash_points(points: &[Vec<C64>], extra: &[f64]) -> String {
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for p in points {
        for c in p {
            c.re.to_bits().hash(&mut h);
            c.im.to_bits().hash(&mut h);
        }
    }
    for x in extra {
        x.to_bits().hash(&mut h);
    }
    format!("{:016x}", h.finish())
}

/// Intermediate grids written by `run` when a directory is given.
pub const CACHE_CSV: &str = "omega_cache.csv";
pub const PROBES_CSV: &str = "probes.csv";

/// Runs every stage; failures carry the stage name.
pub fn run(config: &PipelineConfig, checkpoint: Option<&Path>) -> Result<PipelineReport> {
    let budget = level_budget(config.level)?;
    if !(config.fd_step > 0.0 && config.fd_step < config.probe_depth.0) {
        return Err(Error::InvalidInput("fd_step must be positive and below the probe depth".into()));
    }
    let domain = Domain::unit_ball(2);
    let metric = MetricModel::exact_ball(2);
    let divisor = DivisorModel::parse(&config.polynomial, 2, config.weight, config.s).map_err(|e| e.in_stage("divisor"))?;
    if divisor.polynomial.terms.len() > 1 {
        return Err(Error::Unsupported("the pipeline needs a single-term polynomial (torus-invariant |f|)".into()).in_stage("divisor"));
    }
    let theta = Arc::new(LocalizedLelong::new(&divisor, &domain, config.eps0));

    // (a) weighted Carleson norm of the localized current
    let carleson = forms::carleson_norm_current(theta.as_ref(), &domain, &metric, true, &config.carleson, &config.cells)
        .map_err(|e| e.in_stage("carleson"))?;

    let params = RetractParams { eps0: config.eps0, t_nodes: budget.t_nodes, t_panel: budget.t_panel, ..RetractParams::default() };
    let h = Homotopy::new(params, metric.clone(), theta.clone()).map_err(|e| e.in_stage("homotopy"))?;
    let cache = OmegaCache::build(&h, &budget.cache, config.s).map_err(|e| e.in_stage("homotopy"))?;
    if let Some(dir) = checkpoint {
        std::fs::create_dir_all(dir)?;
        cache.write_csv(&dir.join(CACHE_CSV)).map_err(|e| e.in_stage("checkpoint"))?;
    }
    let cache_inner_radius = cache.inner_radius();
    let sol = Solution { kernel: budget.kernel.clone(), shell_nodes: budget.shell_nodes, support: support_linear(&domain), cache };

    // (b), (c) Levi forms by finite differences
    let points = probe_points(config);
    let dirs = levi_directions();
    let mut probes = Vec::with_capacity(points.len());
    let (mut res2, mut def2, mut scale2) = (0.0, 0.0, 0.0);
    let u = |z: &[C64]| sol.u(z);
    let pot = |z: &[C64]| theta.potential(z);
    for z in &points {
        let coeffs = match theta.coefficients(z).map_err(|e| e.in_stage("residual"))? {
            forms::Coefficients::Mixed(m) => m,
            _ => unreachable!("(1,1) field"),
        };
        let u0 = u(z).map_err(|e| e.in_stage("dbar"))?;
        let p0 = pot(z)?;
        let mut rec = ProbeRecord { z: z.clone(), d: 1.0 - num::norm(z), levi_u: vec![], levi_potential: vec![], levi_theta: vec![] };
        for e in &dirs {
            let lu = levi_fd(&u, z, e, config.fd_step, u0).map_err(|e| e.in_stage("dbar"))?;
            let lp = levi_fd(&pot, z, e, config.fd_step, p0).map_err(|e| e.in_stage("residual"))?;
            let lt = levi_value(&coeffs, e);
            res2 += (lu - lt).powi(2);
            def2 += (lu - lp).powi(2);
            scale2 += lt * lt;
            rec.levi_u.push(lu);
            rec.levi_potential.push(lp);
            rec.levi_theta.push(lt);
        }
        probes.push(rec);
    }
    let theta_scale = scale2.sqrt();
    let denom = theta_scale.max(f64::MIN_POSITIVE);

    // (d) distribution of Re v on bD
    let grid = BoundaryGrid::sobol(&domain, budget.boundary_points, config.seed as u32).map_err(|e| e.in_stage("distribution"))?;
    let mut values = Vec::with_capacity(grid.len());
    for b in &grid.points {
        values.push(sol.v(b).map_err(|e| e.in_stage("distribution"))?.re);
    }
    let nu = (carleson.norm > 0.0).then_some(carleson.norm);
    let distribution = boundary::exp_integrability(&values, &grid.weights, nu).map_err(|e| e.in_stage("distribution"))?;

    let blaschke = forms::blaschke_integral(&divisor, &domain).map_err(|e| e.in_stage("blaschke"))?;
    let mut extra = vec![config.fd_step];
    extra.extend(grid.weights.iter().copied());
    let mut all = points.clone();
    all.extend(grid.points.iter().cloned());
    let report = PipelineReport {
        schema: SCHEMA.into(),
        config: config.clone(),
        budget,
        carleson_norm: carleson.norm,
        carleson_probes: carleson.probes,
        cache_inner_radius,
        residual: res2.sqrt() / denom,
        defect: def2.sqrt() / denom,
        theta_scale,
        distribution,
        blaschke,
        probes,
        probe_hash: hash_points(&all, &extra),
    };
    if let Some(dir) = checkpoint {
        report.write_probes_csv(&dir.join(PROBES_CSV)).map_err(|e| e.in_stage("checkpoint"))?;
    }
    Ok(report)
}

/// The same run over a ladder of smoothing scales.
pub fn s_ladder(config: &PipelineConfig, scales: &[f64]) -> Result<Vec<PipelineReport>> {
    scales
        .iter()
        .map(|s| run(&PipelineConfig { s: *s, ..config.clone() }, None))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chebyshev_reproduces_polynomials() {
        let f = |x: f64, y: f64| num::c(x * x * y - 2.0 * y, x + y * y * y);
        let x = Axis { breaks: vec![0.3, 0.5, 0.9], m: 3 };
        let y = Axis { breaks: vec![0.0, 1.5], m: 4 };
        let (xs, ys) = (x.nodes(), y.nodes());
        let values = xs.iter().flat_map(|a| ys.iter().map(move |b| vec![f(*a, *b)])).collect();
        let c = Cheb2 { x, y, values };
        for (x, y) in [(0.31, 0.2), (0.5, 1.4), (0.9, 0.0), (0.77, 0.77)] {
            assert!((c.eval(x, y)[0] - f(x, y)).norm() < 1e-12);
        }
    }

    #[test]
    fn levi_stencil_on_quadratics() {
        let u = |z: &[C64]| Ok(z[0].norm_sqr() + 2.0 * (z[0] * z[1].conj()).re + 3.0 * z[1].norm_sqr());
        let theta = CMat::from_row_slice(2, 2, &[num::real(1.0), num::real(1.0), num::real(1.0), num::real(3.0)]);
        let z = vec![num::c(0.1, 0.2), num::c(-0.3, 0.1)];
        for e in levi_directions() {
            let l = levi_fd(&u, &z, &e, 1e-2, u(&z).unwrap()).unwrap();
            assert!((l - levi_value(&theta, &e)).abs() < 1e-8, "{l}");
        }
    }

    #[test]
    fn level_budgets_refine() {
        let b: Vec<LevelBudget> = (0..LEVELS).map(|l| level_budget(l).unwrap()).collect();
        for w in b.windows(2) {
            assert!(w[1].t_nodes > w[0].t_nodes && w[1].cache.radial > w[0].cache.radial);
            assert!(w[1].kernel.radial > w[0].kernel.radial && w[1].boundary_points > w[0].boundary_points);
        }
        assert!(level_budget(LEVELS).is_err());
    }
}
