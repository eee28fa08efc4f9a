//! The retract family `h_Lambda`, the averaged homotopy operator and the
//! splitting of its output into bidegrees.

use crate::domain::{DefiningForm, Domain};
use crate::error::{Error, Result};
use crate::forms::{Coefficients, FormField};
use crate::geometry::{self, Polydisc};
use crate::metric::MetricModel;
use crate::num::{self, C64, CMat};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetractParams {
    /// Radius of the Lambda ball.
    pub rho: f64,
    /// Regime threshold.
    pub gamma: f64,
    /// Lower end of the t-integral.
    pub t0: f64,
    /// Support width of the input current.
    pub eps0: f64,
    /// Gauss nodes per t-panel.
    pub t_nodes: usize,
    /// Longest t-panel.
    pub t_panel: f64,
    /// Quasi-random radial nodes of the Lambda ball.
    pub lambda_radial: usize,
    /// Equispaced angles per coordinate of the Lambda ball.
    pub lambda_angles: usize,
    pub seed: u32,
}

impl Default for RetractParams {
    fn default() -> Self {
        Self {
            rho: 0.1,
            gamma: 0.1,
            t0: 0.25,
            eps0: 0.2,
            t_nodes: 6,
            t_panel: 0.015,
            lambda_radial: 4,
            lambda_angles: 3,
            seed: 31,
        }
    }
}

impl RetractParams {
    /// Defaults with the t-rule of refinement level `0..3`: `(t_nodes,
    /// t_panel)` = (4, 0.02), (6, 0.015), (8, 0.01). Level 1 is the default.
    pub fn at_level(level: usize) -> Result<Self> {
        let (t_nodes, t_panel) = match level {
            0 => (4, 0.02),
            1 => (6, 0.015),
            2 => (8, 0.01),
            _ => return Err(Error::InvalidInput(format!("refinement level {level} not in 0..3"))),
        };
        Ok(Self { t_nodes, t_panel, ..Self::default() })
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.rho > 0.0
            && self.rho <= 1.0
            && self.gamma > 0.0
            && self.gamma <= 0.5
            && self.t0 > 0.0
            && self.t0 < 1.0
            && self.eps0 > 0.0
            && self.t_nodes > 0
            && self.t_panel > 0.0
            && self.lambda_radial > 0
            && self.lambda_angles > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid retract parameters {self:?}")))
        }
    }

    /// Quasi-random nodes of `{|Lambda| < rho}`: `|Lambda_j|^2 / rho^2` on the
    /// solid simplex times an equispaced angle grid in every coordinate.
    pub fn lambda_nodes(&self, n: usize) -> Vec<Vec<C64>> {
        let m = self.lambda_angles;
        let angles = num::trapezoid_angles(m, 0.5);
        let total = m.pow(n as u32);
        let mut out = Vec::with_capacity(self.lambda_radial * total);
        for i in 0..self.lambda_radial {
            let u = num::cube_to_simplex(&num::sobol(i, n, self.seed));
            for idx in 0..total {
                let mut rem = idx;
                let lam: Vec<C64> = (0..n)
                    .map(|j| {
                        let a = angles[rem % m] + 0.37 * (i as f64 + 1.0) * (j as f64 + 1.0);
                        rem /= m;
                        C64::from_polar(self.rho * u[j].max(0.0).sqrt(), a)
                    })
                    .collect();
                out.push(lam);
            }
        }
        out
    }
}

/// `phi(x)`: 1 for `x <= 1/2`, 0 for `x >= 1`; returns value and derivative.
pub fn phi(x: f64) -> (f64, f64) {
    let (s, s1, _) = num::smooth_step((x - 0.5) / 0.5);
    (1.0 - s, -2.0 * s1)
}

/// Value and derivatives of `h_Lambda(z, t)`.
#[derive(Clone, Debug)]
pub struct RetractJet {
    pub value: Vec<C64>,
    pub dt: Vec<C64>,
    /// `d_z h[u]` for the real basis `e_1, i e_1, e_2, ...`.
    pub dz: Vec<Vec<C64>>,
    /// Complex-linear differential in `Lambda`.
    pub dlambda: CMat,
}

impl RetractJet {
    /// `d_z h[u]` for an arbitrary real direction.
    pub fn dz_along(&self, u: &[C64]) -> Vec<C64> {
        let n = u.len();
        let mut out = vec![C64::new(0.0, 0.0); n];
        for j in 0..n {
            out = num::axpy(&out, C64::new(u[j].re, 0.0), &self.dz[2 * j]);
            out = num::axpy(&out, C64::new(u[j].im, 0.0), &self.dz[2 * j + 1]);
        }
        out
    }
}

/// Per-point data of the retract family.
pub struct RetractAt<'a> {
    params: &'a RetractParams,
    metric: &'a MetricModel,
    z: Vec<C64>,
    d: f64,
    /// `dd[e_a] = -dp[e_a]` over the real basis
    dd: Vec<f64>,
    a_z: CMat,
    da_z: Vec<CMat>,
    /// bound on `|h - tz|` over the Lambda ball
    reach: f64,
}

/// Per-time data: `A(tz)` and `dA_{tz}` along the real basis.
pub struct TimeSlice {
    pub t: f64,
    a_tz: Option<CMat>,
    da_tz: Vec<CMat>,
}

impl<'a> RetractAt<'a> {
    pub fn new(params: &'a RetractParams, metric: &'a MetricModel, z: &[C64]) -> Result<Self> {
        let domain = metric.domain();
        let p = domain.gauge(z)?;
        let d = 1.0 - p;
        if !(d > 0.0) {
            return Err(Error::Exterior(format!("gauge {p}")));
        }
        let grad = domain.complex_gradient(DefiningForm::Gauge, z)?;
        let dd: Vec<f64> = grad
            .iter()
            .flat_map(|g| [-2.0 * g.re, 2.0 * g.im])
            .collect();
        let a = metric.a_matrix(z)?;
        let a_far = metric.a_matrix(&num::scale_re(z, params.t0))?;
        // |h - tz| <= t rho (gamma |A(z)| + |A(tz)|); |A(tz)| is largest deep inside
        let a_max = a.eigenvalues()[0].max(a_far.eigenvalues()[0]);
        let reach = 1.5 * params.rho * (1.0 + params.gamma) * a_max;
        let a_z = a.matrix().clone();
        let da_z = metric.a_derivatives(z)?;
        Ok(Self {
            params,
            metric,
            z: z.to_vec(),
            d,
            dd,
            a_z,
            da_z,
            reach,
        })
    }

    pub fn distance(&self) -> f64 {
        self.d
    }

    fn s_of(&self, t: f64) -> f64 {
        (1.0 - t) / (self.params.gamma * self.d)
    }

    pub fn time_slice(&self, t: f64) -> Result<TimeSlice> {
        let (ph, _) = phi(self.s_of(t));
        if ph >= 1.0 {
            return Ok(TimeSlice { t, a_tz: None, da_tz: Vec::new() });
        }
        let tz = num::scale_re(&self.z, t);
        Ok(TimeSlice {
            t,
            a_tz: Some(self.metric.a_matrix(&tz)?.matrix().clone()),
            da_tz: self.metric.a_derivatives(&tz)?,
        })
    }

    /// The value only.
    pub fn value(&self, slice: &TimeSlice, lambda: &[C64]) -> Vec<C64> {
        let t = slice.t;
        let (ph, _) = phi(self.s_of(t));
        let g = t * ph * (1.0 - t) / self.d;
        let mut h = num::scale_re(&self.z, t);
        if g != 0.0 {
            h = num::axpy(&h, C64::new(g, 0.0), &num::mat_vec(&self.a_z, lambda));
        }
        if let Some(a) = &slice.a_tz {
            h = num::axpy(&h, C64::new(t * (1.0 - ph), 0.0), &num::mat_vec(a, lambda));
        }
        h
    }

    pub fn jet(&self, slice: &TimeSlice, lambda: &[C64]) -> RetractJet {
        let n = self.z.len();
        let t = slice.t;
        let gd = self.params.gamma * self.d;
        let s = self.s_of(t);
        let (ph, dph) = phi(s);
        let ds_dt = -1.0 / gd;
        let az_l = num::mat_vec(&self.a_z, lambda);
        let g = t * ph * (1.0 - t) / self.d;
        let dg_dt = ph * (1.0 - t) / self.d + t * dph * ds_dt * (1.0 - t) / self.d - t * ph / self.d;

        let mut value = num::axpy(&num::scale_re(&self.z, t), C64::new(g, 0.0), &az_l);
        let mut dt = num::axpy(&self.z, C64::new(dg_dt, 0.0), &az_l);
        let mut dlambda = &self.a_z * C64::new(g, 0.0);
        let atz_l = slice.a_tz.as_ref().map(|a| num::mat_vec(a, lambda));
        if let (Some(a), Some(al)) = (&slice.a_tz, &atz_l) {
            value = num::axpy(&value, C64::new(t * (1.0 - ph), 0.0), al);
            // d/dt of t (1 - phi) A(tz) Lambda
            let da_z_dir = self.combine(&slice.da_tz, &self.z);
            let k1 = (1.0 - ph) - t * dph * ds_dt;
            dt = num::axpy(&dt, C64::new(k1, 0.0), al);
            dt = num::axpy(&dt, C64::new(t * (1.0 - ph), 0.0), &num::mat_vec(&da_z_dir, lambda));
            dlambda += a * C64::new(t * (1.0 - ph), 0.0);
        }
        let mut dz = Vec::with_capacity(2 * n);
        for a in 0..2 * n {
            let u = basis_vec(n, a);
            let mut v = num::scale_re(&u, t);
            let ds = -(1.0 - t) / (gd * self.d) * self.dd[a];
            // d_u of phi(s) (1 - t) / d
            let dcoef = (1.0 - t) * (dph * ds / self.d - ph * self.dd[a] / (self.d * self.d));
            v = num::axpy(&v, C64::new(t * dcoef, 0.0), &az_l);
            if g != 0.0 {
                v = num::axpy(&v, C64::new(g, 0.0), &num::mat_vec(&self.da_z[a], lambda));
            }
            if let Some(al) = &atz_l {
                v = num::axpy(&v, C64::new(-t * dph * ds, 0.0), al);
                v = num::axpy(
                    &v,
                    C64::new(t * (1.0 - ph) * t, 0.0),
                    &num::mat_vec(&slice.da_tz[a], lambda),
                );
            }
            dz.push(v);
        }
        RetractJet { value, dt, dz, dlambda }
    }

    fn combine(&self, das: &[CMat], u: &[C64]) -> CMat {
        let n = u.len();
        let mut out = CMat::zeros(n, n);
        for j in 0..n {
            out += &das[2 * j] * C64::new(u[j].re, 0.0);
            out += &das[2 * j + 1] * C64::new(u[j].im, 0.0);
        }
        out
    }

    /// Gauss rule on `[t_start, 1]` in the variable
    /// `F(t) = t / t_panel - k ln(1 - t + gamma d / 4)`, uniform away from
    /// `t = 1` and graded toward it with `k = 0.04 / t_panel` panels per
    /// e-fold of `1 - t`. The panel count depends on the parameters only, so
    /// nodes and weights move smoothly with `z` and finite differences of
    /// `omega` see no jumps from a changing rule.
    pub fn t_rule(&self) -> Vec<(f64, f64)> {
        let p = &self.params;
        let k = 0.04 / p.t_panel;
        let eps = 0.25 * p.gamma * self.d;
        let f = |t: f64| t / p.t_panel - k * (1.0 - t + eps).ln();
        let df = |t: f64| 1.0 / p.t_panel + k / (1.0 - t + eps);
        let lo = self.t_start();
        if lo >= 1.0 {
            return Vec::new();
        }
        let (f0, f1) = (f(lo), f(1.0));
        let panels = panel_count(p);
        let breaks: Vec<f64> = (0..=panels).map(|i| i as f64 / panels as f64).collect();
        num::composite_gauss(&breaks, p.t_nodes)
            .into_iter()
            .map(|(sigma, w)| {
                let y = f0 + sigma * (f1 - f0);
                // F is increasing and convex: Newton from t = 1 decreases monotonically to the root
                let mut t = 1.0;
                for _ in 0..100 {
                    let step = (f(t) - y) / df(t);
                    t -= step;
                    if step.abs() <= 1e-15 {
                        break;
                    }
                }
                let t = t.clamp(lo, 1.0);
                (t, w * (f1 - f0) / df(t))
            })
            .collect()
    }
}

/// Panels of the t-rule: the `F`-length of `[t0, 1]` at `d = 1e-4`.
fn panel_count(p: &RetractParams) -> usize {
    let k = 0.04 / p.t_panel;
    let eps = 0.25 * p.gamma * 1e-4;
    ((1.0 - p.t0) / p.t_panel + k * ((1.0 - p.t0 + eps) / eps).ln()).ceil() as usize
}

impl RetractAt<'_> {
    /// Gauge is 1-homogeneous and 1-Lipschitz in the Euclidean norm up to
    /// the inradius; on the built-in domains the inradius is 1.
    pub fn t_start(&self) -> f64 {
        let p = 1.0 - self.d;
        if self.metric.domain().kind() == crate::domain::DomainKind::Custom || p <= 0.0 {
            return self.params.t0;
        }
        let t = (1.0 - self.params.eps0 - self.reach) / p;
        t.clamp(self.params.t0, 1.0)
    }
}

fn basis_vec(n: usize, a: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); n];
    v[a / 2] = if a % 2 == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 1.0) };
    v
}

/// Value and jet of `h_Lambda(z, t)`.
pub fn retract(
    params: &RetractParams,
    metric: &MetricModel,
    z: &[C64],
    t: f64,
    lambda: &[C64],
) -> Result<RetractJet> {
    let at = RetractAt::new(params, metric, z)?;
    let slice = at.time_slice(t)?;
    Ok(at.jet(&slice, lambda))
}

/// `theta(h)[dh/dt, d_z h[u]]` with `theta` a real 2-form.
pub fn pullback_t_component(theta_at_h: &Coefficients, jet: &RetractJet, u: &[C64]) -> Result<f64> {
    if theta_at_h.bidegree() != (1, 1) {
        return Err(Error::InvalidInput("pullback needs a (1,1) form".into()));
    }
    Ok(theta_at_h.eval(&[&jet.dt, &jet.dz_along(u)]).re)
}

/// `omega = H theta` as a real 1-form `2 Re sum a_j dz_j`.
pub struct Homotopy {
    pub params: RetractParams,
    pub metric: MetricModel,
    pub theta: Arc<dyn FormField>,
    lambdas: Vec<Vec<C64>>,
}

impl Homotopy {
    pub fn new(params: RetractParams, metric: MetricModel, theta: Arc<dyn FormField>) -> Result<Self> {
        params.validate()?;
        if theta.bidegree() != (1, 1) {
            return Err(Error::InvalidInput("the homotopy acts on (1,1) forms".into()));
        }
        let lambdas = params.lambda_nodes(metric.domain().dim());
        Ok(Self { params, metric, theta, lambdas })
    }

    pub fn domain(&self) -> &Domain {
        self.metric.domain()
    }

    pub fn lambda_count(&self) -> usize {
        self.lambdas.len()
    }

    /// Real values `omega[e_1], omega[i e_1], ...`.
    pub fn omega_real(&self, z: &[C64]) -> Result<Vec<f64>> {
        let n = z.len();
        let at = RetractAt::new(&self.params, &self.metric, z)?;
        let rule = at.t_rule();
        let mut acc = vec![0.0; 2 * n];
        let w_lambda = 1.0 / self.lambdas.len() as f64;
        for &(t, wt) in &rule {
            let slice = at.time_slice(t)?;
            for lam in &self.lambdas {
                let jet = at.jet(&slice, lam);
                let c = self.theta.coefficients(&jet.value)?;
                if c.norm() == 0.0 {
                    continue;
                }
                if !self.domain().contains(&jet.value) {
                    return Err(Error::Exterior("retract image left the domain".into()));
                }
                for (a, dz) in jet.dz.iter().enumerate() {
                    acc[a] += wt * w_lambda * c.eval(&[&jet.dt, dz]).re;
                }
            }
        }
        Ok(acc)
    }

    /// Coefficients `a_j` with `omega = 2 Re sum a_j dz_j`.
    pub fn omega(&self, z: &[C64]) -> Result<Vec<C64>> {
        Ok(real_to_coeffs(&self.omega_real(z)?))
    }
}

/// `a_j = (omega[e_j] - i omega[i e_j]) / 2`.
pub fn real_to_coeffs(vals: &[f64]) -> Vec<C64> {
    vals.chunks(2).map(|p| C64::new(0.5 * p[0], -0.5 * p[1])).collect()
}

/// `omega[u] = 2 Re sum a_j u_j`.
pub fn eval_real_one_form(a: &[C64], u: &[C64]) -> f64 {
    2.0 * num::bdot(a, u).re
}

/// Bidegree parts of `w = -i omega`.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    /// `w_{1,0} = -i sum a_j dz_j`
    pub w10: Vec<C64>,
    /// `w_{0,1} = -i sum conj(a_j) d conj(z_j)`
    pub w01: Vec<C64>,
}

pub fn split(a: &[C64]) -> Split {
    Split {
        w10: a.iter().map(|x| -num::I * x).collect(),
        w01: a.iter().map(|x| -num::I * x.conj()).collect(),
    }
}

impl Split {
    /// `|conj(w01) + w10|`, zero up to rounding.
    pub fn conjugation_defect(&self) -> f64 {
        self.w10
            .iter()
            .zip(&self.w01)
            .map(|(a, b)| (a + b.conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// The `(0,1)` part of `-i H theta` as a form field.
pub struct W01Field {
    pub homotopy: Arc<Homotopy>,
}

impl FormField for W01Field {
    fn dim(&self) -> usize {
        self.homotopy.domain().dim()
    }
    fn bidegree(&self) -> (usize, usize) {
        (0, 1)
    }
    fn coefficients(&self, z: &[C64]) -> Result<Coefficients> {
        Ok(Coefficients::Antiholomorphic(split(&self.homotopy.omega(z)?).w01))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SplitReport {
    pub conjugation_defect: f64,
    /// max `|dbar w01|` by central differences
    pub dbar_residual: f64,
    /// max `|dbar_k b_j|`, the size the residual is compared with
    pub dbar_scale: f64,
}

/// Splits `-i H theta` at `z` and checks the two bidegree identities.
pub fn split_and_reconstruct(h: &Homotopy, z: &[C64], step: f64) -> Result<(Split, SplitReport)> {
    let parts = split(&h.omega(z)?);
    let (res, scale) = dbar_residual(|w| Ok(split(&h.omega(w)?).w01), z, step)?;
    let report = SplitReport {
        conjugation_defect: parts.conjugation_defect(),
        dbar_residual: res,
        dbar_scale: scale,
    };
    Ok((parts, report))
}

/// Error of `d omega` against `theta` at one point.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExteriorCheck {
    pub error: f64,
    pub scale: f64,
}

/// `d omega(X, Y) = X omega(Y) - Y omega(X)` over the real basis by central
/// differences with one Richardson step, compared with `theta(X, Y)`.
pub fn d_omega_check<F>(omega_real: F, theta: &Coefficients, z: &[C64], h: f64) -> Result<ExteriorCheck>
where
    F: Fn(&[C64]) -> Result<Vec<f64>>,
{
    let n = z.len();
    let m = 2 * n;
    // jac[a][b] = d/dx_a omega[e_b]
    let deriv = |a: usize, step: f64| -> Result<Vec<f64>> {
        let e = basis_vec(n, a);
        let p = omega_real(&num::axpy(z, C64::new(step, 0.0), &e))?;
        let q = omega_real(&num::axpy(z, C64::new(-step, 0.0), &e))?;
        Ok(p.iter().zip(&q).map(|(x, y)| (x - y) / (2.0 * step)).collect())
    };
    let mut jac = Vec::with_capacity(m);
    for a in 0..m {
        let d1 = deriv(a, h)?;
        let d2 = deriv(a, 0.5 * h)?;
        jac.push(d1.iter().zip(&d2).map(|(x, y)| (4.0 * y - x) / 3.0).collect::<Vec<f64>>());
    }
    let mut err = 0.0;
    let mut scale = 0.0;
    for a in 0..m {
        for b in a + 1..m {
            let dw = jac[a][b] - jac[b][a];
            let th = theta.eval(&[&basis_vec(n, a), &basis_vec(n, b)]).re;
            err += (dw - th) * (dw - th);
            scale += th * th;
        }
    }
    Ok(ExteriorCheck { error: err.sqrt(), scale: scale.sqrt() })
}

/// `dbar w01` as the antisymmetric matrix `dbar_k b_j - dbar_j b_k`.
pub fn dbar_residual<F>(w01: F, z: &[C64], h: f64) -> Result<(f64, f64)>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let n = z.len();
    let mut dbar = vec![vec![C64::new(0.0, 0.0); n]; n];
    let mut scale: f64 = 0.0;
    for k in 0..n {
        let ex = basis_vec(n, 2 * k);
        let ey = basis_vec(n, 2 * k + 1);
        let dx: Vec<C64> = {
            let p = w01(&num::axpy(z, C64::new(h, 0.0), &ex))?;
            let m = w01(&num::axpy(z, C64::new(-h, 0.0), &ex))?;
            p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        let dy: Vec<C64> = {
            let p = w01(&num::axpy(z, C64::new(h, 0.0), &ey))?;
            let m = w01(&num::axpy(z, C64::new(-h, 0.0), &ey))?;
            p.iter().zip(&m).map(|(a, b)| (a - b) / (2.0 * h)).collect()
        };
        for j in 0..n {
            dbar[k][j] = 0.5 * (dx[j] + num::I * dy[j]);
            scale = scale.max(dbar[k][j].norm());
        }
    }
    let mut res: f64 = 0.0;
    for j in 0..n {
        for k in j + 1..n {
            res = res.max((dbar[k][j] - dbar[j][k]).norm());
        }
    }
    Ok((res, scale))
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RegimeConstants {
    pub samples: usize,
    /// max `k(h, dh/dt)`
    pub k_time: f64,
    /// max `k(h, d_z h[u]) / k(z, u)`
    pub k_space: f64,
    /// max of `k_space` divided by `((1-t)/d)^{1-1/m}`
    pub k_space_normalized: f64,
    /// max gauge of `h` in `P_d(z)`, divided by `(1-t)/d` outside the first regime
    pub inclusion_near: f64,
    /// max gauge of `h` in `P_{d(tz)}(tz)` divided by `t rho`
    pub inclusion_far: f64,
    /// fraction of sampled retract points inside the domain
    pub inside_fraction: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegimeReport {
    /// `1 - t <= gamma d / 2`
    pub near: RegimeConstants,
    /// `gamma d / 2 < 1 - t < gamma d`
    pub middle: RegimeConstants,
    /// `1 - t >= gamma d`
    pub far: RegimeConstants,
}

impl RegimeReport {
    pub fn max_constant(&self) -> f64 {
        [&self.near, &self.middle, &self.far]
            .iter()
            .flat_map(|c| [c.k_time, c.k_space, c.k_space_normalized, c.inclusion_near, c.inclusion_far])
            .fold(0.0, f64::max)
    }
}

/// Empirical constants of the three t-regimes over random `(z, t, Lambda, u)`.
pub fn regime_report(
    params: &RetractParams,
    metric: &MetricModel,
    samples: usize,
    seed: u64,
) -> Result<RegimeReport> {
    use rand::Rng;
    let domain = metric.domain();
    let n = domain.dim();
    let m = domain.finite_type() as f64;
    let mut rng = num::rng(seed);
    let mut out = [RegimeConstants::default(), RegimeConstants::default(), RegimeConstants::default()];
    for i in 0..samples {
        let regime = i % 3;
        let dir = num::random_unit(&mut rng, n);
        let b = domain.boundary_projection(&dir)?;
        let dist = 0.01 + 0.14 * rng.random::<f64>();
        let z = num::scale_re(&b, 1.0 - dist);
        let at = RetractAt::new(params, metric, &z)?;
        let d = at.distance();
        let gd = params.gamma * d;
        let one_minus_t = match regime {
            0 => gd * 0.5 * rng.random_range(0.05..1.0),
            1 => gd * rng.random_range(0.5..1.0),
            _ => gd + (1.0 - params.t0 - gd) * rng.random::<f64>(),
        };
        let t = 1.0 - one_minus_t;
        let lam = num::random_in_ball(&mut rng, n, params.rho);
        let u = num::random_unit(&mut rng, n);
        let slice = at.time_slice(t)?;
        let jet = at.jet(&slice, &lam);
        let c = &mut out[regime];
        c.samples += 1;
        if !domain.contains(&jet.value) {
            continue;
        }
        c.inside_fraction += 1.0;
        c.k_time = c.k_time.max(geometry::knorm(domain, &jet.value, &jet.dt)?);
        let ks = geometry::knorm(domain, &jet.value, &jet.dz_along(&u))? / geometry::knorm(domain, &z, &u)?;
        c.k_space = c.k_space.max(ks);
        if regime > 0 {
            c.k_space_normalized = c.k_space_normalized.max(ks / (one_minus_t / d).powf(1.0 - 1.0 / m));
        }
        let da = domain.d(DefiningForm::Analytic, &z)?;
        let near = Polydisc::new(domain, &z, da)?.gauge(&jet.value);
        let scale = if regime == 0 { 1.0 } else { one_minus_t / d };
        c.inclusion_near = c.inclusion_near.max(near / scale);
        if regime == 2 {
            let tz = num::scale_re(&z, t);
            let dtz = domain.d(DefiningForm::Analytic, &tz)?;
            let far = Polydisc::new(domain, &tz, dtz)?;
            let rel = num::add(&far.frame.center, &num::sub(&jet.value, &tz));
            c.inclusion_far = c.inclusion_far.max(far.gauge(&rel) / (t * params.rho));
        }
    }
    for c in out.iter_mut() {
        c.inside_fraction /= c.samples.max(1) as f64;
    }
    let [near, middle, far] = out;
    Ok(RegimeReport { near, middle, far })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{lelong_smoothed, DivisorModel, LocalizedLelong};
    use crate::num::c;

    fn ball() -> MetricModel {
        MetricModel::exact_ball(2)
    }

    #[test]
    fn phi_plateaus() {
        assert_eq!(phi(0.3).0, 1.0);
        assert_eq!(phi(0.5).0, 1.0);
        assert_eq!(phi(1.0).0, 0.0);
        assert_eq!(phi(2.0).0, 0.0);
        assert!(phi(0.75).1 < 0.0);
    }

    #[test]
    fn endpoint_and_radial_identities() {
        let p = RetractParams::default();
        let m = ball();
        let z = [c(0.6, 0.1), c(-0.3, 0.5)];
        let lam = [c(0.05, 0.0), c(0.0, -0.04)];
        let j = retract(&p, &m, &z, 1.0, &lam).unwrap();
        assert!(num::norm(&num::sub(&j.value, &z)) == 0.0);
        let zero = [c(0.0, 0.0), c(0.0, 0.0)];
        let j = retract(&p, &m, &z, 0.7, &zero).unwrap();
        assert!(num::norm(&num::sub(&j.value, &num::scale_re(&z, 0.7))) < 1e-15);
        assert!(num::norm(&num::sub(&j.dt, &z)) < 1e-15);
        let u = num::unit(2, 1);
        assert!(num::norm(&num::sub(&j.dz_along(&u), &num::scale_re(&u, 0.7))) < 1e-15);
    }

    #[test]
    fn jet_matches_differences() {
        let p = RetractParams::default();
        let m = ball();
        let z = [c(0.8, 0.1), c(-0.2, 0.45)];
        let lam = [c(0.05, 0.03), c(-0.02, -0.04)];
        let at = RetractAt::new(&p, &m, &z).unwrap();
        let gd = p.gamma * at.distance();
        for t in [0.5, 1.0 - 0.75 * gd, 1.0 - 0.3 * gd, 1.0 - 2.0 * gd] {
            let jet = retract(&p, &m, &z, t, &lam).unwrap();
            let h = 1e-6;
            let v = |zz: &[C64], tt: f64| retract(&p, &m, zz, tt, &lam).unwrap().value;
            let fd_t = num::scale_re(&num::sub(&v(&z, t + h), &v(&z, t - h)), 0.5 / h);
            let scale = num::norm(&jet.dt);
            assert!(num::norm(&num::sub(&fd_t, &jet.dt)) <= 1e-5 * scale, "t {t}");
            for a in 0..4 {
                let e = basis_vec(2, a);
                let fd = num::scale_re(
                    &num::sub(&v(&num::axpy(&z, c(h, 0.0), &e), t), &v(&num::axpy(&z, c(-h, 0.0), &e), t)),
                    0.5 / h,
                );
                assert!(num::norm(&num::sub(&fd, &jet.dz[a])) <= 1e-5 * num::norm(&jet.dz[a]), "t {t} a {a}");
            }
        }
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let zero: Arc<dyn FormField> = Arc::new(crate::forms::ZeroForm { dim: 2, bidegree: (1, 1) });
        let h = Homotopy::new(RetractParams::default(), ball(), zero).unwrap();
        let w = h.omega(&[c(0.9, 0.0), c(0.1, 0.1)]).unwrap();
        assert!(num::norm(&w) == 0.0);
        let s = split(&w);
        assert_eq!(s.conjugation_defect(), 0.0);
    }

    #[test]
    fn pullback_is_antisymmetric() {
        let d = DivisorModel::parse("z1", 2, 1.0, 0.1).unwrap();
        let th = lelong_smoothed(&d).coefficients(&[c(0.3, 0.0), c(0.2, 0.1)]).unwrap();
        let x = [c(0.3, -0.1), c(0.2, 0.7)];
        let y = [c(-0.5, 0.2), c(0.1, 0.1)];
        let a = th.eval(&[&x, &y]).re;
        let b = th.eval(&[&y, &x]).re;
        assert!((a + b).abs() < 1e-15 && a.abs() > 0.0);
    }

    #[test]
    fn homotopy_inverts_d_on_a_localized_current() {
        let dom = Domain::unit_ball(2);
        let d = DivisorModel::parse("z1", 2, 1.0, 0.1).unwrap();
        let theta: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&d, &dom, 0.2));
        let p = RetractParams { t_nodes: 8, lambda_radial: 2, lambda_angles: 2, ..Default::default() };
        let h = Homotopy::new(p, ball(), theta.clone()).unwrap();
        let z = [c(0.1, 0.05), c(0.9, 0.1)];
        let chk = d_omega_check(|w| h.omega_real(w), &theta.coefficients(&z).unwrap(), &z, 1e-3).unwrap();
        assert!(chk.error <= 1e-3 * chk.scale, "{} {}", chk.error, chk.scale);
    }

    #[test]
    fn regime_constants_are_finite_and_stable() {
        let p = RetractParams::default();
        let a = regime_report(&p, &ball(), 60, 3).unwrap();
        let b = regime_report(&p, &ball(), 120, 4).unwrap();
        eprintln!("{a:?}\n{b:?}");
        assert!(a.max_constant().is_finite() && a.max_constant() > 0.0);
        assert!(b.max_constant() <= 2.0 * a.max_constant());
    }

    #[test]
    fn radial_pullback_on_the_disc() {
        // theta = i b(|z|^2) dz ^ dzbar, Lambda = 0: theta(tz)[z, t u] = -2 t b(t^2|z|^2) Im(z conj(u))
        struct Bump;
        impl FormField for Bump {
            fn dim(&self) -> usize {
                1
            }
            fn bidegree(&self) -> (usize, usize) {
                (1, 1)
            }
            fn coefficients(&self, z: &[C64]) -> Result<Coefficients> {
                let b = (-z[0].norm_sqr()).exp();
                Ok(Coefficients::Mixed(CMat::from_element(1, 1, c(b, 0.0))))
            }
        }
        let p = RetractParams::default();
        let m = MetricModel::exact_ball(1);
        let z = [c(0.5, 0.3)];
        let u = [c(0.2, 0.9)];
        let t = 0.6;
        let jet = retract(&p, &m, &z, t, &[c(0.0, 0.0)]).unwrap();
        let th = Bump.coefficients(&jet.value).unwrap();
        let got = pullback_t_component(&th, &jet, &u).unwrap();
        let want = -2.0 * t * (-(t * t) * z[0].norm_sqr()).exp() * (z[0] * u[0].conj()).im;
        assert!((got - want).abs() < 1e-14, "{got} {want}");
        let zero = crate::forms::ZeroForm { dim: 1, bidegree: (1, 1) };
        assert_eq!(pullback_t_component(&zero.coefficients(&jet.value).unwrap(), &jet, &u).unwrap(), 0.0);
    }

    #[test]
    fn homotopy_is_linear() {
        let dom = Domain::unit_ball(2);
        let d1 = DivisorModel::parse("z1", 2, 1.0, 0.1).unwrap();
        let d2 = DivisorModel::parse("z2 - 0.3", 2, 1.0, 0.1).unwrap();
        let f1: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&d1, &dom, 0.2));
        let f2: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&d2, &dom, 0.2));
        let sum: Arc<dyn FormField> = Arc::new(crate::forms::LinearCombination {
            terms: vec![(2.0, f1.clone()), (-0.5, f2.clone())],
        });
        let p = RetractParams { lambda_radial: 2, lambda_angles: 2, ..Default::default() };
        let z = [c(0.3, 0.2), c(0.8, -0.1)];
        let w = |f: Arc<dyn FormField>| Homotopy::new(p.clone(), ball(), f).unwrap().omega(&z).unwrap();
        let lhs = w(sum);
        let rhs = num::axpy(&num::scale_re(&w(f1), 2.0), c(-0.5, 0.0), &w(f2));
        assert!(num::norm(&num::sub(&lhs, &rhs)) <= 1e-12 * num::norm(&rhs));
    }

    #[test]
    fn w01_is_dbar_closed() {
        let dom = Domain::unit_ball(2);
        let d = DivisorModel::parse("z1", 2, 1.0, 0.1).unwrap();
        let theta: Arc<dyn FormField> = Arc::new(LocalizedLelong::new(&d, &dom, 0.2));
        let z = [c(0.1, 0.05), c(0.9, 0.1)];
        let mut last = f64::INFINITY;
        for tn in [4, 6, 8] {
            let p = RetractParams { t_nodes: tn, lambda_radial: 1, lambda_angles: 2, ..Default::default() };
            let h = Homotopy::new(p, ball(), theta.clone()).unwrap();
            let (_, rep) = split_and_reconstruct(&h, &z, 1e-3).unwrap();
            assert!(rep.conjugation_defect == 0.0);
            let rel = rep.dbar_residual / rep.dbar_scale;
            assert!(rel < last, "{tn}: {rel}");
            last = rel;
        }
        assert!(last <= 1e-2, "{last}");
    }

    #[test]
    fn regime_constants_on_an_ellipsoid_and_smaller_gamma() {
        let p = RetractParams::default();
        let base = regime_report(&p, &ball(), 60, 5).unwrap();
        let half = regime_report(&RetractParams { gamma: 0.05, ..p.clone() }, &ball(), 60, 5).unwrap();
        let r1 = |r: &RegimeReport| r.near.k_time.max(r.near.k_space).max(r.near.inclusion_near);
        assert!(r1(&half) <= 2.0 * r1(&base));
        assert!(base.max_constant() <= 50.0);
        assert_eq!(base.near.inside_fraction, 1.0);
        let ell = MetricModel::surrogate(Domain::ellipsoid(&[1, 2]).unwrap());
        let a = regime_report(&p, &ell, 30, 7).unwrap();
        let b = regime_report(&p, &ell, 60, 8).unwrap();
        assert!(a.max_constant().is_finite() && b.max_constant() <= 2.0 * a.max_constant() + 1.0);
    }
}
