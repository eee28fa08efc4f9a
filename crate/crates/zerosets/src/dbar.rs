//! The linear support function, the forms `s` and `q`, the weighted kernel
//! `K`, the integral solution of `dbar u = omega` and the `psi_i` kernels.

use crate::domain::{DefiningForm, Domain, Jet, ETA0};
use crate::error::{Error, Result};
use crate::exterior::{self, Form};
use crate::forms::FormField;
use crate::geometry::{self, CoverCell, Polydisc};
use crate::metric::MetricModel;
use crate::num::{self, C64, CMat};
use serde::{Deserialize, Serialize};

/// Denominators below this are treated as singular.
const TINY: f64 = 1e-300;

/// `S(zeta, z) = <dr(zeta), zeta - z>` with Hefer vector `Q(zeta, z) = dr(zeta)`.
#[derive(Clone, Debug)]
pub struct SupportModel {
    domain: Domain,
    eta0: f64,
}

pub fn support_linear(domain: &Domain) -> SupportModel {
    SupportModel { domain: domain.clone(), eta0: ETA0 }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SupportReport {
    pub pairs: usize,
    /// max `|S - <Q, zeta - z>| / (1 + |S|)`
    pub reproduction: f64,
    /// min of `2 Re S(zeta, z) - r(zeta) + r(z)`
    pub positivity_margin: f64,
    /// max `|dbar_z S|` by central differences
    pub holomorphy: f64,
}

impl SupportModel {
    pub fn with_eta0(mut self, eta0: f64) -> Self {
        self.eta0 = eta0;
        self
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    fn jet(&self, z: &[C64]) -> Result<Jet> {
        self.domain.jet(DefiningForm::Analytic, z)
    }

    pub fn support(&self, zeta: &[C64], z: &[C64]) -> Result<C64> {
        let g = self.domain.complex_gradient(DefiningForm::Analytic, zeta)?;
        Ok(num::bdot(&g, &num::sub(zeta, z)))
    }

    pub fn hefer(&self, zeta: &[C64], _z: &[C64]) -> Result<Vec<C64>> {
        self.domain.complex_gradient(DefiningForm::Analytic, zeta)
    }

    /// 1 for `r <= -eta0`, 0 for `r >= -eta0/2`.
    pub fn chi(&self, z: &[C64]) -> Result<f64> {
        let r = self.domain.r_analytic(z)?;
        let h = 0.5 * self.eta0;
        Ok(1.0 - num::smooth_step((r + self.eta0) / h).0)
    }

    /// Checks the three support invariants on random pairs near `bD`.
    pub fn check(&self, pairs: usize, seed: u64) -> Result<SupportReport> {
        use rand::Rng;
        let n = self.domain.dim();
        let mut rng = num::rng(seed);
        let mut rep = SupportReport { pairs, positivity_margin: f64::INFINITY, ..Default::default() };
        for _ in 0..pairs {
            let b = self.domain.boundary_projection(&num::random_unit(&mut rng, n))?;
            let zeta = num::scale_re(&b, 1.0 - 0.2 * rng.random::<f64>());
            let b2 = self.domain.boundary_projection(&num::random_unit(&mut rng, n))?;
            let z = num::scale_re(&b2, rng.random::<f64>());
            let s = self.support(&zeta, &z)?;
            let q = self.hefer(&zeta, &z)?;
            rep.reproduction = rep
                .reproduction
                .max((s - num::bdot(&q, &num::sub(&zeta, &z))).norm() / (1.0 + s.norm()));
            let m = 2.0 * s.re - self.domain.r_analytic(&zeta)? + self.domain.r_analytic(&z)?;
            rep.positivity_margin = rep.positivity_margin.min(m);
            let h = 1e-5;
            for k in 0..n {
                let e = num::unit(n, k);
                let ie = num::scale(&e, num::I);
                let dx = (self.support(&zeta, &num::axpy(&z, C64::new(h, 0.0), &e))?
                    - self.support(&zeta, &num::axpy(&z, C64::new(-h, 0.0), &e))?)
                    / (2.0 * h);
                let dy = (self.support(&zeta, &num::axpy(&z, C64::new(h, 0.0), &ie))?
                    - self.support(&zeta, &num::axpy(&z, C64::new(-h, 0.0), &ie))?)
                    / (2.0 * h);
                rep.holomorphy = rep.holomorphy.max((0.5 * (dx + num::I * dy)).norm());
            }
        }
        Ok(rep)
    }
}

/// A (1,0) form in `zeta` with its `dbar_zeta`, `dbar[(i, j)] = dbar_j a_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct FormWithDbar {
    pub coeffs: Vec<C64>,
    pub dbar: CMat,
}

/// `s = -r(z) sum conj(zeta_i - z_i) dzeta_i - (1 - chi(z)) conj(S(z, zeta)) sum Q_i(z, zeta) dzeta_i`.
pub fn s_form(support: &SupportModel, zeta: &[C64], z: &[C64]) -> Result<FormWithDbar> {
    let n = z.len();
    let jz = support.jet(z)?;
    let chi = support.chi(z)?;
    let eta = num::sub(zeta, z);
    let s_zz = num::bdot(&jz.grad, &num::sub(z, zeta));
    let coeffs: Vec<C64> = (0..n)
        .map(|i| -jz.value * eta[i].conj() - (1.0 - chi) * s_zz.conj() * jz.grad[i])
        .collect();
    let dbar = CMat::from_fn(n, n, |i, j| {
        let delta = if i == j { -jz.value } else { 0.0 };
        C64::new(delta, 0.0) + (1.0 - chi) * jz.grad[i] * jz.grad[j].conj()
    });
    Ok(FormWithDbar { coeffs, dbar })
}

/// `q = dr(zeta) / r(zeta)`; needs `r(zeta) != 0`.
pub fn q_form(support: &SupportModel, zeta: &[C64], _z: &[C64]) -> Result<FormWithDbar> {
    let n = zeta.len();
    let j = support.jet(zeta)?;
    let r = j.value;
    if r.abs() < 1e-14 {
        return Err(Error::Singular(format!("q needs an interior point, r = {r:e}")));
    }
    let coeffs = j.grad.iter().map(|g| g / r).collect();
    let dbar = CMat::from_fn(n, n, |a, b| j.levi[(a, b)] / r - j.grad[a] * j.grad[b].conj() / (r * r));
    Ok(FormWithDbar { coeffs, dbar })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    /// Magnitude of the normalizing constant.
    pub cn: f64,
    /// Unit phase of the normalizing constant (orientation convention).
    pub phase: C64,
    /// Gauss nodes along each ray of the polar grid.
    pub radial: usize,
    /// Simplex nodes of the sphere rule.
    pub sphere_u: usize,
    /// Angles per coordinate of the sphere rule.
    pub sphere_phi: usize,
}

impl KernelParams {
    /// Default grid for dimension `n` with the calibrated constant
    /// `-1/(2 pi i)^n`, stored as magnitude `(2 pi)^{-n}` and phase `-(-i)^n`.
    pub fn calibrated(n: usize) -> Self {
        let cn = (2.0 * std::f64::consts::PI).powi(-(n as i32));
        let phase = -C64::new(0.0, -1.0).powu(n as u32);
        let (radial, sphere_u, sphere_phi) = match n {
            1 => (96, 1, 96),
            2 => (16, 8, 16),
            _ => (8, 3, 8),
        };
        Self { cn, phase, radial, sphere_u, sphere_phi }
    }

    pub fn constant(&self) -> C64 {
        self.phase * self.cn
    }

    /// Same constants, every node count doubled.
    pub fn refined(&self) -> Self {
        Self {
            radial: 2 * self.radial,
            sphere_u: 2 * self.sphere_u,
            sphere_phi: 2 * self.sphere_phi,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cn > 0.0) || (self.phase.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput("kernel constant must be positive with a unit phase".into()));
        }
        if self.radial == 0 || self.sphere_u == 0 || self.sphere_phi == 0 {
            return Err(Error::InvalidInput("empty kernel grid".into()));
        }
        Ok(())
    }
}

/// `sum_k (-1)^k s ^ (dbar s)^{n-1-k} ^ (dbar q)^k / (<s,eta>^{n-k} (1-<q,eta>)^{k+1})`
/// without the normalizing constant.
pub fn kernel_raw(support: &SupportModel, zeta: &[C64], z: &[C64]) -> Result<Form> {
    let n = z.len();
    if n > exterior::MAX_DIM {
        return Err(Error::Unsupported(format!("kernel assembly is capped at n = {}", exterior::MAX_DIM)));
    }
    let eta = num::sub(zeta, z);
    if num::norm(&eta) == 0.0 {
        return Err(Error::Singular("kernel on the diagonal".into()));
    }
    let s = s_form(support, zeta, z)?;
    let q = q_form(support, zeta, z)?;
    let se = num::bdot(&s.coeffs, &eta);
    let qe = C64::new(1.0, 0.0) - num::bdot(&q.coeffs, &eta);
    if se.norm() < TINY || qe.norm() < TINY {
        return Err(Error::Singular("vanishing kernel denominator".into()));
    }
    let sf = Form::holomorphic(&s.coeffs);
    let ds = Form::dbar_of_holomorphic(&s.dbar);
    let dq = Form::dbar_of_holomorphic(&q.dbar);
    let mut out = Form::zero(n);
    for k in 0..n {
        let num_form = sf.wedge(&ds.power(n - 1 - k)).wedge(&dq.power(k));
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let den = se.powu((n - k) as u32) * qe.powu((k + 1) as u32);
        out = out.add(&num_form.scale(sign / den));
    }
    Ok(out)
}

pub fn kernel(params: &KernelParams, support: &SupportModel, zeta: &[C64], z: &[C64]) -> Result<Form> {
    Ok(kernel_raw(support, zeta, z)?.scale(params.constant()))
}

/// `K_1` and `K_2` at a boundary point `z` (`r(z) = 0`, `chi(z) = 0`):
/// `K_2 = (-1)^n c r Q ^ L^{n-1} / (S(z,zeta) (r - S)^n)` and
/// `K_1 = (-1)^{n+1} c (n-1) Q ^ L^{n-2} ^ dbar r ^ dr / (S(z,zeta) (r - S)^n)`.
pub fn kernel_split(params: &KernelParams, support: &SupportModel, zeta: &[C64], z: &[C64]) -> Result<(Form, Form)> {
    let n = z.len();
    let jz = support.jet(z)?;
    if jz.value.abs() > 1e-10 {
        return Err(Error::InvalidInput(format!("the split is taken at boundary points, r = {:e}", jz.value)));
    }
    let jzeta = support.jet(zeta)?;
    let r = jzeta.value;
    let s_zz = num::bdot(&jz.grad, &num::sub(z, zeta));
    let s_zetaz = num::bdot(&jzeta.grad, &num::sub(zeta, z));
    let den = s_zz * (r - s_zetaz).powu(n as u32);
    if den.norm() < TINY {
        return Err(Error::Singular("vanishing split denominator".into()));
    }
    let qf = Form::holomorphic(&jz.grad);
    let lf = Form::dbar_of_holomorphic(&jzeta.levi);
    let pf = Form::dbar_of_holomorphic(&CMat::from_fn(n, n, |a, b| jzeta.grad[a] * jzeta.grad[b].conj()));
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    let c = params.constant();
    let k2 = qf.wedge(&lf.power(n - 1)).scale(c * sign * r / den);
    let k1 = if n >= 2 {
        qf.wedge(&lf.power(n - 2)).wedge(&pf).scale(c * (-sign) * (n - 1) as f64 / den)
    } else {
        Form::zero(n)
    };
    Ok((k1, k2))
}

/// Density of `omega ^ K` against Lebesgue measure for a (0,1) form `omega`.
pub fn density(omega01: &[C64], k: &Form) -> C64 {
    let n = omega01.len();
    Form::antiholomorphic(omega01).wedge(k).top() * exterior::top_to_lebesgue(n)
}

/// `sup{rho >= 0 : z + rho theta in D}` for `z` in the closure.
fn exit_radius(domain: &Domain, z: &[C64], theta: &[C64]) -> Result<f64> {
    let r = domain.r_analytic(z)?;
    if r < 0.0 {
        return domain.ray_exit(z, theta);
    }
    if r > 1e-10 {
        return Err(Error::Exterior(format!("r = {r:e}")));
    }
    let mut h = 1e-6;
    for _ in 0..40 {
        let p = num::axpy(z, C64::new(h, 0.0), theta);
        if domain.r_analytic(&p)? < 0.0 {
            return Ok(h + domain.ray_exit(&p, theta)?);
        }
        h *= 0.5;
    }
    Ok(0.0)
}

/// Sphere rule in coordinates `theta = b e^{i phi} nu + sqrt(1-b^2) omega`,
/// `omega` a unit vector orthogonal to `nu`; the measure is
/// `b (1-b^2)^{n-2} db dphi dsigma(omega)`, so Gauss nodes in `b` absorb the
/// `1/|<nu, theta>|` singularity of the kernel at boundary points.
pub fn aligned_sphere_rule(nu: &[C64], m_u: usize, m_phi: usize) -> Vec<(Vec<C64>, f64)> {
    let n = nu.len();
    let angles = num::trapezoid_angles(m_phi, 0.5);
    let wphi = 2.0 * std::f64::consts::PI / m_phi as f64;
    if n == 1 {
        return angles.iter().map(|&a| (vec![nu[0] * C64::from_polar(1.0, a)], wphi)).collect();
    }
    let comp = num::complement_basis(n, &[nu.to_vec()]);
    let inner: Vec<(Vec<C64>, f64)> = if n == 2 {
        angles.iter().map(|&a| (vec![C64::from_polar(1.0, a)], wphi)).collect()
    } else {
        num::sphere_rule(n - 1, m_u, m_phi)
    };
    let mut out = Vec::new();
    for (b, wb) in num::gauss_legendre(2 * m_u, 0.0, 1.0) {
        let c = (1.0 - b * b).max(0.0).sqrt();
        let jac = b * (1.0 - b * b).powi(n as i32 - 2);
        for &a in &angles {
            let head = num::scale(nu, C64::from_polar(b, a));
            for (om, wo) in &inner {
                let mut th = head.clone();
                for (k, e) in comp.iter().enumerate() {
                    th = num::axpy(&th, om[k] * c, e);
                }
                out.push((th, wb * jac * wphi * wo));
            }
        }
    }
    out
}

/// Polar grid around `z`: points of `D` with weights for `dlambda`.
pub fn polar_grid(params: &KernelParams, domain: &Domain, z: &[C64]) -> Result<Vec<(Vec<C64>, f64)>> {
    let n = z.len();
    let nu = if num::norm(z) == 0.0 { num::unit(n, 0) } else { domain.unit_normal(z)? };
    let dirs = aligned_sphere_rule(&nu, params.sphere_u, params.sphere_phi);
    let base = num::gauss_legendre(params.radial, 0.0, 1.0);
    let mut out = Vec::with_capacity(dirs.len() * base.len());
    for (theta, wt) in &dirs {
        let big_r = exit_radius(domain, z, theta)?;
        // rays that leave at once carry O(R^{2n}) mass
        if big_r <= 1e-9 {
            continue;
        }
        for &(x, wx) in &base {
            let rho = big_r * x;
            out.push((num::axpy(z, C64::new(rho, 0.0), theta), wt * wx * big_r * rho.powi(2 * n as i32 - 1)));
        }
    }
    Ok(out)
}

/// Polar grid whose rays are cut where they cross the spheres `|zeta| = R_k`,
/// for data that is only piecewise smooth across those spheres. The first
/// panel keeps `params.radial` nodes, later panels get `per_panel`; panels
/// inside `|zeta| < inner` are dropped (the data vanishes there).
pub fn shell_polar_grid(
    params: &KernelParams,
    domain: &Domain,
    z: &[C64],
    radii: &[f64],
    per_panel: usize,
    inner: f64,
) -> Result<Vec<(Vec<C64>, f64)>> {
    let n = z.len();
    let nu = if num::norm(z) == 0.0 { num::unit(n, 0) } else { domain.unit_normal(z)? };
    let dirs = aligned_sphere_rule(&nu, params.sphere_u, params.sphere_phi);
    let first = num::gauss_legendre(params.radial, 0.0, 1.0);
    let later = num::gauss_legendre(per_panel, 0.0, 1.0);
    let z2 = num::norm_sqr(z);
    let mut out = Vec::new();
    for (theta, wt) in &dirs {
        let big_r = exit_radius(domain, z, theta)?;
        if big_r <= 1e-9 {
            continue;
        }
        // |z + rho theta|^2 = |z|^2 + 2 rho b + rho^2
        let b = num::hdot(theta, z).re;
        let mut breaks = vec![0.0, big_r];
        for r in radii {
            let disc = b * b - z2 + r * r;
            if disc < 0.0 {
                continue;
            }
            for rho in [-b - disc.sqrt(), -b + disc.sqrt()] {
                if rho > 1e-12 && rho < big_r - 1e-12 {
                    breaks.push(rho);
                }
            }
        }
        breaks.sort_by(f64::total_cmp);
        for (k, w) in breaks.windows(2).enumerate() {
            let (a, c) = (w[0], w[1]);
            let mid = 0.5 * (a + c);
            if num::norm(&num::axpy(z, C64::new(mid, 0.0), theta)) < inner {
                continue;
            }
            let rule = if k == 0 { &first } else { &later };
            for &(x, wx) in rule {
                let rho = a + (c - a) * x;
                out.push((num::axpy(z, C64::new(rho, 0.0), theta), wt * wx * (c - a) * rho.powi(2 * n as i32 - 1)));
            }
        }
    }
    Ok(out)
}

/// `u(z) = int_D omega ^ K(., z)` for a (0,1) form field `omega`.
pub fn solve_dbar(params: &KernelParams, support: &SupportModel, omega: &dyn FormField, z: &[C64]) -> Result<C64> {
    params.validate()?;
    if omega.bidegree() != (0, 1) {
        return Err(Error::InvalidInput("solve_dbar expects a (0,1) form".into()));
    }
    let grid = polar_grid(params, support.domain(), z)?;
    solve_on_grid(params, support, &grid, z, |zeta| match omega.coefficients(zeta)? {
        crate::forms::Coefficients::Antiholomorphic(b) => Ok(b),
        _ => Err(Error::InvalidInput("expected (0,1) coefficients".into())),
    })
}

/// Same integral with the form given by a closure on the grid points.
pub fn solve_on_grid<F>(
    params: &KernelParams,
    support: &SupportModel,
    grid: &[(Vec<C64>, f64)],
    z: &[C64],
    omega: F,
) -> Result<C64>
where
    F: Fn(&[C64]) -> Result<Vec<C64>>,
{
    let mut acc = C64::new(0.0, 0.0);
    for (zeta, w) in grid {
        let b = omega(zeta)?;
        if b.iter().all(|x| x.norm() == 0.0) {
            continue;
        }
        acc += density(&b, &kernel_raw(support, zeta, z)?) * *w;
    }
    Ok(acc * params.constant())
}

/// `dbar u` at `z` by central differences with one Richardson step.
pub fn dbar_fd<F>(u: F, z: &[C64], h: f64) -> Result<Vec<C64>>
where
    F: Fn(&[C64]) -> Result<C64>,
{
    let n = z.len();
    let partial = |dir: &[C64], step: f64| -> Result<C64> {
        Ok((u(&num::axpy(z, C64::new(step, 0.0), dir))? - u(&num::axpy(z, C64::new(-step, 0.0), dir))?)
            / (2.0 * step))
    };
    let rich = |dir: &[C64]| -> Result<C64> {
        let a = partial(dir, h)?;
        let b = partial(dir, 0.5 * h)?;
        Ok((4.0 * b - a) / 3.0)
    };
    (0..n)
        .map(|k| {
            let e = num::unit(n, k);
            let dx = rich(&e)?;
            let dy = rich(&num::scale(&e, num::I))?;
            Ok(0.5 * (dx + num::I * dy))
        })
        .collect()
}

/// `f = conj(z_1) beta(|z|^2)`, smooth with support in `|z|^2 < 0.5`.
#[derive(Clone, Copy, Debug)]
pub struct KnownPrimitive {
    pub dim: usize,
}

impl KnownPrimitive {
    const A: f64 = 0.1;
    const B: f64 = 0.5;

    fn beta(x: f64) -> (f64, f64) {
        let w = Self::B - Self::A;
        let (s, s1, _) = num::smooth_step((x - Self::A) / w);
        (1.0 - s, -s1 / w)
    }

    pub fn value(&self, z: &[C64]) -> C64 {
        z[0].conj() * Self::beta(num::norm_sqr(z)).0
    }

    pub fn dbar(&self, z: &[C64]) -> Vec<C64> {
        let (b, b1) = Self::beta(num::norm_sqr(z));
        (0..self.dim)
            .map(|j| {
                let d = if j == 0 { C64::new(b, 0.0) } else { C64::new(0.0, 0.0) };
                d + z[0].conj() * b1 * z[j]
            })
            .collect()
    }
}

impl FormField for KnownPrimitive {
    fn dim(&self) -> usize {
        self.dim
    }
    fn bidegree(&self) -> (usize, usize) {
        (0, 1)
    }
    fn coefficients(&self, z: &[C64]) -> Result<crate::forms::Coefficients> {
        Ok(crate::forms::Coefficients::Antiholomorphic(self.dbar(z)))
    }
}

/// Probe points for the known-primitive residual: inside the bump, in the
/// transition and beyond it.
pub fn residual_probes(n: usize) -> Vec<Vec<C64>> {
    let mut rng = num::rng(41);
    [0.2, 0.35, 0.5, 0.6, 0.75, 0.85]
        .iter()
        .map(|&rad| num::scale_re(&num::random_unit(&mut rng, n), rad))
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub kappa: C64,
    pub cn: f64,
    /// relative residual of `dbar u - omega` after calibration
    pub residual: f64,
}

/// Fits the complex constant by least squares on the known-primitive test.
pub fn calibrate_cn(params: &KernelParams, support: &SupportModel) -> Result<CalibrationReport> {
    let n = support.domain().dim();
    let raw = KernelParams { cn: 1.0, phase: C64::new(1.0, 0.0), ..params.clone() };
    let omega = KnownPrimitive { dim: n };
    let mut g = Vec::new();
    let mut w = Vec::new();
    for z in residual_probes(n) {
        let d = dbar_fd(|p| solve_dbar(&raw, support, &omega, p), &z, 1e-3)?;
        g.extend(d);
        w.extend(omega.dbar(&z));
    }
    let gg: f64 = g.iter().map(|x| x.norm_sqr()).sum();
    if !(gg > 0.0) {
        return Err(Error::NoConvergence { what: "kernel calibration", iterations: 0, lo: 0.0, hi: 0.0 });
    }
    let kappa: C64 = g.iter().zip(&w).map(|(a, b)| a.conj() * b).sum::<C64>() / gg;
    let res: f64 = g.iter().zip(&w).map(|(a, b)| (kappa * a - b).norm_sqr()).sum::<f64>();
    let ww: f64 = w.iter().map(|x| x.norm_sqr()).sum();
    Ok(CalibrationReport { kappa, cn: kappa.norm(), residual: (res / ww).sqrt() })
}

/// Relative residual `|dbar u - omega| / |omega|` of the known-primitive test.
pub fn known_primitive_residual(params: &KernelParams, support: &SupportModel) -> Result<f64> {
    let n = support.domain().dim();
    let omega = KnownPrimitive { dim: n };
    let (mut num_, mut den) = (0.0, 0.0);
    for z in residual_probes(n) {
        let d = dbar_fd(|p| solve_dbar(params, support, &omega, p), &z, 1e-3)?;
        let w = omega.dbar(&z);
        num_ += d.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>();
        den += w.iter().map(|x| x.norm_sqr()).sum::<f64>();
    }
    Ok((num_ / den).sqrt())
}

/// `int_D |K(zeta, z)| dlambda(zeta)` on the polar grid around `z`.
pub fn kernel_mass(params: &KernelParams, support: &SupportModel, z: &[C64]) -> Result<f64> {
    let grid = polar_grid(params, support.domain(), z)?;
    let mut acc = 0.0;
    for (zeta, w) in &grid {
        acc += w * kernel(params, support, zeta, z)?.max_abs();
    }
    Ok(acc)
}

/// Per-`zeta` data of the `psi_i` kernels.
pub struct PsiKernel<'a> {
    params: &'a KernelParams,
    support: &'a SupportModel,
    zeta: Vec<C64>,
    frame: Vec<Vec<C64>>,
    knorms: Vec<f64>,
    det_b: f64,
}

impl<'a> PsiKernel<'a> {
    pub fn new(params: &'a KernelParams, support: &'a SupportModel, metric: &MetricModel, zeta: &[C64]) -> Result<Self> {
        let f = metric.frame(zeta)?;
        let det_b = f.eigenvalues.iter().product::<f64>().abs();
        let knorms = f
            .columns
            .iter()
            .map(|e| geometry::knorm(support.domain(), zeta, e))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self { params, support, zeta: zeta.to_vec(), frame: f.columns, knorms, det_b })
    }

    /// `|K(e_1..e_n, conj(e_j) for j != i)| k(zeta, e_i) |det B(zeta)|`.
    pub fn psi(&self, z: &[C64], i: usize) -> Result<f64> {
        let k = kernel(self.params, self.support, &self.zeta, z)?;
        Ok(self.contract(&k, i))
    }

    fn contract(&self, k: &Form, i: usize) -> f64 {
        let mut vecs: Vec<Vec<C64>> = self.frame.iter().map(|e| exterior::holomorphic_vector(e)).collect();
        for (j, e) in self.frame.iter().enumerate() {
            if j != i {
                vecs.push(exterior::antiholomorphic_vector(e));
            }
        }
        k.eval(&vecs).norm() * self.knorms[i] * self.det_b
    }

    /// Contractions of the two parts of the boundary split.
    pub fn psi_split(&self, z: &[C64], i: usize) -> Result<(f64, f64)> {
        let (k1, k2) = kernel_split(self.params, self.support, &self.zeta, z)?;
        Ok((self.contract(&k1, i), self.contract(&k2, i)))
    }

    pub fn max_over_i(&self, z: &[C64]) -> Result<f64> {
        let k = kernel(self.params, self.support, &self.zeta, z)?;
        Ok((0..self.frame.len()).map(|i| self.contract(&k, i)).fold(0.0, f64::max))
    }
}

/// Boundary points of `P_eps(zeta0) \ c P_eps(zeta0)`, by radial projection of
/// polydisc samples.
fn boundary_ring(domain: &Domain, zeta0: &[C64], eps: f64, inner: f64, count: usize, seed: u64) -> Result<Vec<Vec<C64>>> {
    let p = Polydisc::new(domain, zeta0, eps)?;
    let mut rng = num::rng(seed);
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < count && tries < 200 * count {
        tries += 1;
        let x = p.sample(&mut rng, 1.0);
        if num::norm(&x) == 0.0 {
            continue;
        }
        let b = domain.boundary_projection(&x)?;
        let g = p.gauge(&b);
        if g < 1.0 && g >= inner {
            out.push(b);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PsiDecayReport {
    /// max `psi * cap_area(zeta0, d)` over `P_d(zeta0) cap bD`
    pub core_constant: f64,
    /// `(eps, max psi * cap_area(zeta0, eps) / (d/eps)^{1/2})` on the rings
    pub ring_constants: Vec<(f64, f64)>,
    /// `(eps, max psi * cap_area(zeta0, eps))` on the rings
    pub raw: Vec<(f64, f64)>,
    pub d: f64,
}

impl PsiDecayReport {
    pub fn max_constant(&self) -> f64 {
        self.ring_constants.iter().map(|r| r.1).fold(self.core_constant, f64::max)
    }

    /// Fitted `alpha` in `max psi * cap_area(eps) ~ (d/eps)^alpha` over the rings.
    pub fn decay_exponent(&self) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .raw
            .iter()
            .filter(|r| r.1 > 0.0)
            .map(|r| ((self.d / r.0).ln(), r.1.ln()))
            .unzip();
        if xs.len() < 2 {
            return None;
        }
        num::linear_fit(&xs, &ys).map(|(slope, _)| slope)
    }
}

/// Empirical constants of the core bound and the near-diagonal decay.
pub fn psi_decay(
    params: &KernelParams,
    support: &SupportModel,
    metric: &MetricModel,
    zeta0: &[C64],
    levels: usize,
    samples: usize,
    seed: u64,
) -> Result<PsiDecayReport> {
    let domain = support.domain();
    let d = domain.d(DefiningForm::Analytic, zeta0)?;
    let psi = PsiKernel::new(params, support, metric, zeta0)?;
    let core_pts = boundary_ring(domain, zeta0, d, 0.0, samples, seed)?;
    let mut core = 0.0f64;
    let cap_d = geometry::cap_area(domain, zeta0, d)?;
    for z in &core_pts {
        core = core.max(psi.max_over_i(z)? * cap_d);
    }
    let mut rings = Vec::new();
    let mut raw = Vec::new();
    for k in 1..=levels {
        let eps = d * 2f64.powi(k as i32);
        if eps > 1.0 {
            break;
        }
        let pts = boundary_ring(domain, zeta0, eps, 0.5, samples, seed + k as u64)?;
        let cap = geometry::cap_area(domain, zeta0, eps)?;
        let mut m = 0.0f64;
        for z in &pts {
            m = m.max(psi.max_over_i(z)? * cap);
        }
        raw.push((eps, m));
        rings.push((eps, m / (d / eps).sqrt()));
    }
    Ok(PsiDecayReport { core_constant: core, ring_constants: rings, raw, d })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScaleInequalities {
    /// max `eps / |S(z, zeta0)|`
    pub c_forward: f64,
    /// max `eps / |S(zeta0, z) + r(zeta0)|`
    pub c_backward: f64,
}

/// Support inequalities at scale on `P_eps(zeta0) \ c P_eps(zeta0) cap bD`.
pub fn support_at_scale(support: &SupportModel, zeta0: &[C64], eps: f64, samples: usize, seed: u64) -> Result<ScaleInequalities> {
    let domain = support.domain();
    let r0 = domain.r_analytic(zeta0)?;
    let pts = boundary_ring(domain, zeta0, eps, 0.5, samples, seed)?;
    let mut out = ScaleInequalities { c_forward: 0.0, c_backward: 0.0 };
    for z in &pts {
        out.c_forward = out.c_forward.max(eps / support.support(z, zeta0)?.norm());
        out.c_backward = out.c_backward.max(eps / (support.support(zeta0, z)? + r0).norm());
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HeferBounds {
    /// max `|Q'_i| tau_i / eps`
    pub q_same_index: f64,
    /// max over `i, j` of `|Q'_i| tau_j / eps` (the printed index pattern)
    pub q_printed_index: f64,
    /// max `|dQ'_i / d conj(zeta'_j)| tau_i tau_j / eps`
    pub dq: f64,
}

/// Hefer bounds in the extremal frame at `(zeta, eps)` over points of `P_eps(zeta)`.
pub fn hefer_bounds(support: &SupportModel, zeta: &[C64], eps: f64, samples: usize, seed: u64) -> Result<HeferBounds> {
    let domain = support.domain();
    let p = Polydisc::new(domain, zeta, eps)?;
    let f = &p.frame;
    let n = zeta.len();
    let mut rng = num::rng(seed);
    let mut out = HeferBounds { q_same_index: 0.0, q_printed_index: 0.0, dq: 0.0 };
    for _ in 0..samples {
        let xi = p.sample(&mut rng, 1.0);
        if !domain.contains(&xi) {
            continue;
        }
        let j = support.jet(&xi)?;
        for a in 0..n {
            let qa = num::bdot(&j.grad, &f.vectors[a]).norm();
            out.q_same_index = out.q_same_index.max(qa * f.radii[a] / eps);
            for b in 0..n {
                out.q_printed_index = out.q_printed_index.max(qa * f.radii[b] / eps);
                let l = num::bdot(&f.vectors[a], &num::mat_vec(&j.levi, &num::conj_vec(&f.vectors[b]))).norm();
                out.dq = out.dq.max(l * f.radii[a] * f.radii[b] / eps);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ShellMass {
    pub level: usize,
    pub eps: f64,
    /// `sigma(P_eps cap bD) * max psi` over boundary samples assigned to the shell
    pub mass: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelMassReport {
    pub zeta: Vec<C64>,
    pub d: f64,
    pub core: f64,
    pub shells: Vec<ShellMass>,
    pub far: f64,
    pub total: f64,
}

impl KernelMassReport {
    /// `exp` of the slope of `log mass` against the shell level, over the
    /// shells with samples; `None` with fewer than two.
    pub fn geometric_ratio(&self) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .shells
            .iter()
            .filter(|s| s.samples > 0 && s.mass > 0.0)
            .map(|s| (s.level as f64, s.mass.ln()))
            .unzip();
        if xs.len() < 2 {
            return None;
        }
        num::linear_fit(&xs, &ys).map(|(slope, _)| slope.exp())
    }
}

/// `int_{bD} psi dsigma` bounded cell by cell along the polyannulus cover:
/// `sum_cells sigma(cell cap bD) * max_cell psi` plus the far part. Each
/// boundary sample is charged to the cell `locate` assigns it to.
pub fn kernel_boundary_mass(
    params: &KernelParams,
    support: &SupportModel,
    metric: &MetricModel,
    zeta0: &[C64],
    samples: usize,
    seed: u64,
) -> Result<KernelMassReport> {
    let domain = support.domain();
    let eps0 = 0.5;
    let cover = geometry::polyannulus_cover(domain, zeta0, eps0)?;
    let psi = PsiKernel::new(params, support, metric, zeta0)?;
    let core_pts = boundary_ring(domain, zeta0, cover.d, 0.0, samples, seed)?;
    let mut m = 0.0f64;
    for z in &core_pts {
        m = m.max(psi.max_over_i(z)?);
    }
    let core = m * geometry::cap_area_of(&cover.core.frame);
    let mut shells = Vec::new();
    for sh in &cover.shells {
        let eps = sh.outer.frame.epsilon;
        let pts = boundary_ring(domain, zeta0, eps, sh.inner_scale, samples, seed + 1 + sh.level as u64)?;
        let mut m = 0.0f64;
        let mut used = 0;
        for z in &pts {
            if cover.locate(z) != Some(CoverCell::Shell(sh.level)) {
                continue;
            }
            used += 1;
            m = m.max(psi.max_over_i(z)?);
        }
        shells.push(ShellMass { level: sh.level, eps, mass: m * geometry::cap_area_of(&sh.outer.frame), samples: used });
    }
    let outer = Polydisc::new(domain, zeta0, eps0)?;
    let n = zeta0.len();
    let mut m = 0.0f64;
    for p in num::sphere_points(4 * samples, n, seed as u32) {
        let b = domain.boundary_projection(&p)?;
        if outer.contains(&b) {
            continue;
        }
        m = m.max(psi.max_over_i(&b)?);
    }
    let far = m * num::sphere_area(n);
    let total = core + far + shells.iter().map(|s| s.mass).sum::<f64>();
    Ok(KernelMassReport { zeta: zeta0.to_vec(), d: cover.d, core, shells, far, total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::c;

    fn ball(n: usize) -> SupportModel {
        support_linear(&Domain::unit_ball(n))
    }

    #[test]
    fn support_on_the_ball() {
        let s = ball(2);
        let zeta = [c(0.6, 0.2), c(0.1, -0.5)];
        assert_eq!(s.support(&zeta, &zeta).unwrap(), c(0.0, 0.0));
        // S = <conj(zeta), zeta - z>
        let z = [c(0.1, 0.1), c(0.0, 0.3)];
        let want = num::bdot(&num::conj_vec(&zeta), &num::sub(&zeta, &z));
        assert!((s.support(&zeta, &z).unwrap() - want).norm() < 1e-15);
        let nu = Domain::unit_ball(2).unit_normal(&zeta).unwrap();
        for lam in [0.01, 0.1, 0.3] {
            let zi = num::axpy(&zeta, c(-lam, 0.0), &nu);
            assert!(s.support(&zeta, &zi).unwrap().re > 0.0);
        }
    }

    #[test]
    fn support_invariants_on_an_ellipsoid() {
        let s = support_linear(&Domain::ellipsoid(&[1, 2]).unwrap());
        let rep = s.check(1000, 5).unwrap();
        assert!(rep.reproduction <= 1e-12);
        assert!(rep.positivity_margin >= -1e-12, "{rep:?}");
        assert!(rep.holomorphy <= 1e-8);
    }

    #[test]
    fn s_form_identities() {
        let s = ball(2);
        let zeta = [c(0.3, 0.1), c(-0.2, 0.2)];
        let z = [c(0.1, 0.0), c(0.2, 0.1)];
        assert_eq!(s.chi(&z).unwrap(), 1.0);
        let f = s_form(&s, &zeta, &z).unwrap();
        let r = Domain::unit_ball(2).r_analytic(&z).unwrap();
        let eta = num::sub(&zeta, &z);
        for i in 0..2 {
            assert!((f.coeffs[i] + r * eta[i].conj()).norm() < 1e-15);
        }
        let f0 = s_form(&s, &zeta, &zeta).unwrap();
        assert_eq!(num::bdot(&f0.coeffs, &[c(0.0, 0.0), c(0.0, 0.0)]), c(0.0, 0.0));
        let mut rng = num::rng(2);
        for _ in 0..200 {
            let zeta = num::random_in_ball(&mut rng, 2, 1.0);
            let z = num::random_in_ball(&mut rng, 2, 0.85);
            if s.chi(&z).unwrap() < 1.0 {
                continue;
            }
            let r = Domain::unit_ball(2).r_analytic(&z).unwrap();
            let eta = num::sub(&zeta, &z);
            let se = num::bdot(&s_form(&s, &zeta, &z).unwrap().coeffs, &eta);
            assert!(se.re >= -r * num::norm_sqr(&eta) * (1.0 - 1e-9));
        }
        assert!(q_form(&s, &[c(1.0, 0.0), c(0.0, 0.0)], &z).is_err());
    }

    #[test]
    fn s_form_dbar_matches_differences() {
        let s = ball(2);
        let zeta = [c(0.3, 0.1), c(-0.2, 0.2)];
        let z = [c(0.6, 0.0), c(0.5, 0.5)];
        assert!(s.chi(&z).unwrap() < 1.0);
        let f = s_form(&s, &zeta, &z).unwrap();
        let q = q_form(&s, &zeta, &z).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let e = num::unit(2, j);
            let ie = num::scale(&e, num::I);
            let d = |g: &dyn Fn(&[C64]) -> Vec<C64>| -> Vec<C64> {
                let dx = num::scale_re(&num::sub(&g(&num::axpy(&zeta, c(h, 0.0), &e)), &g(&num::axpy(&zeta, c(-h, 0.0), &e))), 0.5 / h);
                let dy = num::scale_re(&num::sub(&g(&num::axpy(&zeta, c(h, 0.0), &ie)), &g(&num::axpy(&zeta, c(-h, 0.0), &ie))), 0.5 / h);
                num::scale_re(&num::axpy(&dx, num::I, &dy), 0.5)
            };
            let ds = d(&|p| s_form(&s, p, &z).unwrap().coeffs);
            let dq = d(&|p| q_form(&s, p, &z).unwrap().coeffs);
            for i in 0..2 {
                assert!((ds[i] - f.dbar[(i, j)]).norm() < 1e-8);
                assert!((dq[i] - q.dbar[(i, j)]).norm() < 1e-6 * q.dbar[(i, j)].norm().max(1.0));
            }
        }
    }

    #[test]
    fn one_dimensional_kernel_is_cauchy() {
        // single term: the Cauchy factor 1/(zeta - z) times the weight (1 - <q, eta>)^{-1}
        let s = ball(1);
        let p = KernelParams::calibrated(1);
        let zeta = [c(-0.3, 0.4)];
        let r = Domain::unit_ball(1).r_analytic(&zeta).unwrap();
        for z in [[c(0.1, 0.2)], [c(0.7, -0.6)], [c(0.0, 1.0)]] {
            let k = kernel_raw(&s, &zeta, &z).unwrap();
            let eta = zeta[0] - z[0];
            let weight = 1.0 - zeta[0].conj() * eta / r;
            let want = C64::new(1.0, 0.0) / (eta * weight);
            assert!((k.coefficient(1) - want).norm() < 1e-12 * want.norm());
        }
        let f = KnownPrimitive { dim: 1 };
        for z in residual_probes(1) {
            let d = dbar_fd(|x| solve_dbar(&p, &s, &f, x), &z, 1e-3).unwrap();
            let w = f.dbar(&z);
            assert!((d[0] - w[0]).norm() < 1e-2 * w[0].norm().max(1.0), "{z:?} {} {}", d[0], w[0]);
        }
    }

    #[test]
    fn zero_and_linearity() {
        let s = ball(2);
        let p = KernelParams::calibrated(2);
        let zero = crate::forms::ZeroForm { dim: 2, bidegree: (0, 1) };
        let z = [c(0.2, 0.1), c(0.3, 0.0)];
        assert_eq!(solve_dbar(&p, &s, &zero, &z).unwrap(), c(0.0, 0.0));
        let grid = polar_grid(&p, s.domain(), &z).unwrap();
        let f = KnownPrimitive { dim: 2 };
        let a = solve_on_grid(&p, &s, &grid, &z, |x| Ok(f.dbar(x))).unwrap();
        let b = solve_on_grid(&p, &s, &grid, &z, |x| Ok(num::scale(&f.dbar(x), c(2.0, -1.0)))).unwrap();
        assert!((b - a * c(2.0, -1.0)).norm() < 1e-12 * a.norm());
    }

    #[test]
    fn boundary_split_recombines() {
        let s = ball(2);
        let p = KernelParams::calibrated(2);
        let z = [c(0.6, 0.0), c(0.0, 0.8)];
        for zeta in [[c(0.5, 0.1), c(0.1, 0.6)], [c(-0.2, 0.3), c(0.4, 0.1)]] {
            let k = kernel(&p, &s, &zeta, &z).unwrap();
            let (k1, k2) = kernel_split(&p, &s, &zeta, &z).unwrap();
            let diff = k.add(&k1.add(&k2).scale(c(-1.0, 0.0)));
            assert!(diff.max_abs() <= 1e-10 * k.max_abs(), "{} {}", diff.max_abs(), k.max_abs());
        }
    }

    #[test]
    fn wedge_assembly_antisymmetry() {
        let s = ball(2);
        let zeta = [c(0.5, 0.1), c(0.1, 0.6)];
        let z = [c(0.1, 0.0), c(0.2, 0.1)];
        let k = kernel_raw(&s, &zeta, &z).unwrap();
        let v: Vec<Vec<C64>> = vec![
            exterior::holomorphic_vector(&[c(1.0, 0.0), c(0.3, 0.0)]),
            exterior::holomorphic_vector(&[c(0.0, 1.0), c(1.0, 0.0)]),
            exterior::antiholomorphic_vector(&[c(0.2, 0.1), c(1.0, 0.0)]),
        ];
        let w = vec![v[1].clone(), v[0].clone(), v[2].clone()];
        assert!((k.eval(&v) + k.eval(&w)).norm() < 1e-12);
    }

    #[test]
    fn calibration_recovers_the_closed_form_constant() {
        let s = ball(2);
        let coarse = KernelParams { radial: 12, sphere_u: 6, sphere_phi: 12, ..KernelParams::calibrated(2) };
        let a = calibrate_cn(&coarse, &s).unwrap();
        let want = KernelParams::calibrated(2).constant();
        assert!(a.cn > 0.0);
        assert!((a.kappa - want).norm() <= 0.02 * want.norm(), "{a:?}");
        let r = known_primitive_residual(&KernelParams::calibrated(2), &s).unwrap();
        assert!(r <= 5e-2, "{r}");
    }

    #[test]
    fn three_dimensional_constant_on_a_coarse_grid() {
        let s = ball(3);
        let f = KnownPrimitive { dim: 3 };
        let p = KernelParams::calibrated(3);
        let z = [c(0.2, 0.1), c(0.1, 0.0), c(0.0, 0.15)];
        let d = dbar_fd(|x| solve_dbar(&p, &s, &f, x), &z, 2e-3).unwrap();
        let w = f.dbar(&z);
        let err: f64 = d.iter().zip(&w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        assert!(err <= 0.1 * num::norm(&w), "{d:?}");
    }

    #[test]
    fn kernel_mass_is_grid_stable_at_a_boundary_point() {
        let s = ball(2);
        let p = KernelParams { radial: 8, sphere_u: 4, sphere_phi: 8, ..KernelParams::calibrated(2) };
        let z = [c(0.6, 0.0), c(0.0, 0.8)];
        let a = kernel_mass(&p, &s, &z).unwrap();
        let b = kernel_mass(&p.refined(), &s, &z).unwrap();
        eprintln!("mass {a} {b}");
        assert!(a.is_finite() && b.is_finite());
        assert!((a - b).abs() <= 0.02 * b, "{a} {b}");
    }

    #[test]
    fn psi_bounds_near_the_diagonal() {
        let s = ball(2);
        let p = KernelParams::calibrated(2);
        let m = MetricModel::exact_ball(2);
        let zeta0 = [c(0.0, 0.0), c(0.0, 0.95)];
        let rep = psi_decay(&p, &s, &m, &zeta0, 4, 40, 3).unwrap();
        assert!(rep.core_constant > 0.0 && rep.max_constant().is_finite());
        let pk = PsiKernel::new(&p, &s, &m, &zeta0).unwrap();
        let z = [c(0.1, 0.0), c(0.0, (1.0f64 - 0.01).sqrt())];
        let (k1, k2) = pk.psi_split(&z, 0).unwrap();
        assert!(k1 >= 0.0 && k2 >= 0.0 && pk.psi(&z, 0).unwrap() >= 0.0);
        let sc = support_at_scale(&s, &zeta0, 0.2, 40, 4).unwrap();
        let hb = hefer_bounds(&s, &zeta0, 0.2, 40, 5).unwrap();
        assert!(sc.c_forward.is_finite() && sc.c_backward.is_finite());
        assert!(hb.q_same_index.is_finite() && hb.dq.is_finite());
        let mass = kernel_boundary_mass(&p, &s, &m, &zeta0, 20, 6).unwrap();
        assert!(mass.total.is_finite() && mass.total > 0.0);
        let z1 = [c(0.0, 0.0), c(0.0, 0.99)];
        let dec = psi_decay(&p, &s, &m, &z1, 5, 40, 3).unwrap();
        let mass = kernel_boundary_mass(&p, &s, &m, &z1, 40, 6).unwrap();
        assert!(dec.decay_exponent().unwrap() >= 0.4, "{dec:?}");
        assert!(mass.geometric_ratio().unwrap() <= 0.75, "{mass:?}");
    }

    #[test]
    fn aligned_sphere_rule_has_the_sphere_area() {
        for n in 1..=3 {
            let nu = num::normalized(&(0..n).map(|k| c(0.3 + k as f64, -0.2)).collect::<Vec<_>>()).unwrap();
            let r = aligned_sphere_rule(&nu, 4, 6);
            let area: f64 = r.iter().map(|p| p.1).sum();
            assert!((area - num::sphere_area(n)).abs() < 1e-12 * area, "{n}");
            assert!(r.iter().all(|p| (num::norm(&p.0) - 1.0).abs() < 1e-12));
            // second moment |theta_1|^2 averages to 1/n
            let m: f64 = r.iter().map(|p| p.0[0].norm_sqr() * p.1).sum::<f64>() / area;
            assert!((m - 1.0 / n as f64).abs() < 1e-12, "{n} {m}");
        }
    }
}
