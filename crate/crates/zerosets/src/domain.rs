//! Convex finite-type model domains, their defining functions and gauges.

use crate::error::{Error, Result};
use crate::num::{self, C64, CMat};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Neighborhood width of the boundary used by every "near bD" precondition.
pub const ETA0: f64 = 0.25;

const GAUGE_MAX_ITER: usize = 80;
const GAUGE_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    UnitBall,
    ComplexEllipsoid,
    Custom,
}

/// Which of the two defining functions an operation evaluates.
///
/// `Analytic` is `sum |z_j|^{2 m_j} - 1` for the built-ins, `Gauge` is the
/// homogeneous `p(z) - 1` built from the Minkowski functional.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DefiningForm {
    #[default]
    Analytic,
    Gauge,
}

/// User-supplied defining function for custom domains.
pub trait DefiningFunction: Send + Sync + fmt::Debug {
    fn eval(&self, z: &[C64]) -> Result<f64>;
}

#[derive(Clone, Debug)]
pub struct Domain {
    kind: DomainKind,
    dim: usize,
    exponents: Vec<u32>,
    finite_type: u32,
    custom: Option<Arc<dyn DefiningFunction>>,
}

/// On-disk description `{"kind": ..., "exponents": [...], "dimension": n}`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainFile {
    pub kind: DomainKind,
    #[serde(default)]
    pub exponents: Vec<u32>,
    pub dimension: usize,
}

/// Value, complex gradient and both complex Hessians of a real function.
#[derive(Clone, Debug)]
pub struct Jet {
    pub value: f64,
    /// `d r / d z_j`
    pub grad: Vec<C64>,
    /// `d^2 r / d z_j d conj(z_k)`
    pub levi: CMat,
    /// `d^2 r / d z_j d z_k`
    pub holo: CMat,
}

#[derive(Clone, Debug)]
pub struct PointQuery {
    pub z: Vec<C64>,
    pub r: f64,
    pub d: f64,
    pub grad: Vec<C64>,
    pub normal: Vec<C64>,
}

impl Domain {
    pub fn unit_ball(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self {
            kind: DomainKind::UnitBall,
            dim,
            exponents: vec![1; dim],
            finite_type: 2,
            custom: None,
        }
    }

    /// `sum |z_j|^{2 m_j} < 1`.
    pub fn ellipsoid(exponents: &[u32]) -> Result<Self> {
        if exponents.is_empty() || exponents.iter().any(|&m| m == 0) {
            return Err(Error::InvalidInput(
                "ellipsoid exponents must be positive integers".into(),
            ));
        }
        let finite_type = 2 * exponents.iter().copied().max().unwrap_or(1);
        Ok(Self {
            kind: DomainKind::ComplexEllipsoid,
            dim: exponents.len(),
            exponents: exponents.to_vec(),
            finite_type,
            custom: None,
        })
    }

    /// A custom convex domain; the finite type must be declared.
    pub fn custom(
        dim: usize,
        finite_type: u32,
        f: Arc<dyn DefiningFunction>,
    ) -> Result<Self> {
        if dim == 0 || finite_type < 2 || finite_type % 2 != 0 {
            return Err(Error::InvalidInput(
                "custom domains need dimension >= 1 and an even finite type >= 2".into(),
            ));
        }
        let d = Self {
            kind: DomainKind::Custom,
            dim,
            exponents: Vec::new(),
            finite_type,
            custom: Some(f),
        };
        if d.r_analytic(&vec![C64::new(0.0, 0.0); dim])? >= 0.0 {
            return Err(Error::InvalidInput("the origin must be interior".into()));
        }
        Ok(d)
    }

    pub fn from_file(f: &DomainFile) -> Result<Self> {
        match f.kind {
            DomainKind::UnitBall => Ok(Self::unit_ball(f.dimension.max(1))),
            DomainKind::ComplexEllipsoid => {
                if f.exponents.len() != f.dimension {
                    return Err(Error::InvalidInput(format!(
                        "{} exponents given for dimension {}",
                        f.exponents.len(),
                        f.dimension
                    )));
                }
                Self::ellipsoid(&f.exponents)
            }
            DomainKind::Custom => Err(Error::Unsupported(
                "custom domains are registered programmatically".into(),
            )),
        }
    }

    pub fn to_file(&self) -> DomainFile {
        DomainFile {
            kind: self.kind,
            exponents: self.exponents.clone(),
            dimension: self.dim,
        }
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    /// Finite type `m` (even).
    pub fn finite_type(&self) -> u32 {
        self.finite_type
    }

    fn check_dim(&self, z: &[C64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::InvalidInput(format!(
                "point has {} coordinates, domain dimension is {}",
                z.len(),
                self.dim
            )));
        }
        if z.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite coordinate".into()));
        }
        Ok(())
    }

    pub fn r_analytic(&self, z: &[C64]) -> Result<f64> {
        self.check_dim(z)?;
        match &self.custom {
            Some(f) => f.eval(z),
            None => Ok(z
                .iter()
                .zip(&self.exponents)
                .map(|(x, &m)| x.norm_sqr().powi(m as i32))
                .sum::<f64>()
                - 1.0),
        }
    }

    /// Minkowski gauge `p(z) = inf{lambda > 0 : z in lambda D}`.
    pub fn gauge(&self, z: &[C64]) -> Result<f64> {
        self.check_dim(z)?;
        let nz = num::norm(z);
        if nz == 0.0 {
            return Ok(0.0);
        }
        if self.kind == DomainKind::UnitBall {
            return Ok(nz);
        }
        if self.custom.is_none() {
            let nonzero: Vec<usize> = (0..self.dim).filter(|&j| z[j].norm() > 0.0).collect();
            if nonzero.len() == 1 {
                return Ok(z[nonzero[0]].norm());
            }
            let a: Vec<f64> = z
                .iter()
                .zip(&self.exponents)
                .map(|(x, &m)| x.norm_sqr().powi(m as i32))
                .collect();
            let g = |lam: f64| -> f64 {
                a.iter()
                    .zip(&self.exponents)
                    .map(|(&aj, &m)| aj * lam.powi(-2 * m as i32))
                    .sum::<f64>()
                    - 1.0
            };
            let n = self.dim as f64;
            let mut lo = a
                .iter()
                .zip(&self.exponents)
                .map(|(&aj, &m)| aj.powf(1.0 / (2.0 * m as f64)))
                .fold(0.0, f64::max);
            let mut hi = a
                .iter()
                .zip(&self.exponents)
                .map(|(&aj, &m)| (n * aj).powf(1.0 / (2.0 * m as f64)))
                .fold(0.0, f64::max);
            return bisect_decreasing(g, &mut lo, &mut hi);
        }
        let f = self.custom.as_ref().expect("custom");
        let r_at = |lam: f64| -> Result<f64> {
            let w: Vec<C64> = z.iter().map(|x| x / lam).collect();
            f.eval(&w)
        };
        let mut hi = 1.0;
        let mut k = 0;
        while r_at(hi)? >= 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 200 {
                return Err(Error::NoConvergence {
                    what: "gauge bracket",
                    iterations: k,
                    lo: 0.0,
                    hi,
                });
            }
        }
        let mut lo = hi;
        k = 0;
        while r_at(lo)? < 0.0 {
            lo *= 0.5;
            k += 1;
            if k > 200 {
                return Ok(0.0);
            }
        }
        let mut it = 0;
        while it < GAUGE_MAX_ITER && hi - lo > GAUGE_TOL.min(1e-15 * hi) {
            let mid = 0.5 * (lo + hi);
            if r_at(mid)? >= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            it += 1;
        }
        if hi - lo > GAUGE_TOL {
            return Err(Error::NoConvergence {
                what: "gauge bisection",
                iterations: it,
                lo,
                hi,
            });
        }
        Ok(0.5 * (lo + hi))
    }

    /// Homogeneous defining function `p(z) - 1`.
    pub fn eval_r(&self, z: &[C64]) -> Result<f64> {
        Ok(self.gauge(z)? - 1.0)
    }

    pub fn r(&self, form: DefiningForm, z: &[C64]) -> Result<f64> {
        match form {
            DefiningForm::Analytic => self.r_analytic(z),
            DefiningForm::Gauge => self.eval_r(z),
        }
    }

    /// Boundary distance surrogate `d(z) = |r(z)|`.
    pub fn d(&self, form: DefiningForm, z: &[C64]) -> Result<f64> {
        Ok(self.r(form, z)?.abs())
    }

    pub fn contains(&self, z: &[C64]) -> bool {
        self.r_analytic(z).map(|r| r < 0.0).unwrap_or(false)
    }

    /// Radial projection `z / p(z)` onto the boundary.
    pub fn boundary_projection(&self, z: &[C64]) -> Result<Vec<C64>> {
        let p = self.gauge(z)?;
        if p == 0.0 {
            return Err(Error::Singular("projection of the origin".into()));
        }
        Ok(num::scale_re(z, 1.0 / p))
    }

    pub fn jet(&self, form: DefiningForm, z: &[C64]) -> Result<Jet> {
        self.check_dim(z)?;
        if self.custom.is_some() {
            return self.jet_fd(form, z);
        }
        match form {
            DefiningForm::Analytic => Ok(self.jet_analytic(z)),
            DefiningForm::Gauge => self.jet_gauge(z),
        }
    }

    pub fn complex_gradient(&self, form: DefiningForm, z: &[C64]) -> Result<Vec<C64>> {
        if self.custom.is_some() {
            return self.gradient_fd(form, z);
        }
        Ok(self.jet(form, z)?.grad)
    }

    /// Real Hessian in the coordinates `(x_1, y_1, x_2, y_2, ...)`.
    pub fn hessian(&self, form: DefiningForm, z: &[C64]) -> Result<DMatrix<f64>> {
        let j = self.jet(form, z)?;
        Ok(real_hessian_from(&j.levi, &j.holo))
    }

    /// Unit outward normal `conj(dr) / |dr|` of the analytic level set.
    pub fn unit_normal(&self, z: &[C64]) -> Result<Vec<C64>> {
        let g = self.complex_gradient(DefiningForm::Analytic, z)?;
        let n = num::norm(&g);
        if n < 1e-12 {
            return Err(Error::Singular(format!("|dr| = {n:e}")));
        }
        Ok(g.iter().map(|x| x.conj() / n).collect())
    }

    pub fn point_query(&self, z: &[C64]) -> Result<PointQuery> {
        let r = self.r_analytic(z)?;
        let grad = self.complex_gradient(DefiningForm::Analytic, z)?;
        let normal = self.unit_normal(z)?;
        Ok(PointQuery {
            z: z.to_vec(),
            r,
            d: r.abs(),
            grad,
            normal,
        })
    }

    /// `sup{rho >= 0 : r(z0 + rho dir) < 0}` for an interior `z0` and unit `dir`.
    pub fn ray_exit(&self, z0: &[C64], dir: &[C64]) -> Result<f64> {
        if self.kind == DomainKind::UnitBall {
            let b = num::hdot(dir, z0).re;
            let c = num::norm_sqr(z0) - 1.0;
            let a = num::norm_sqr(dir);
            if c >= 0.0 {
                return Err(Error::Exterior("ray origin is not interior".into()));
            }
            return Ok((-b + (b * b - a * c).sqrt()) / a);
        }
        let f = |rho: f64| self.r_analytic(&num::axpy(z0, C64::new(rho, 0.0), dir));
        if f(0.0)? >= 0.0 {
            return Err(Error::Exterior("ray origin is not interior".into()));
        }
        let mut hi = 1.0;
        let mut k = 0;
        while f(hi)? < 0.0 {
            hi *= 2.0;
            k += 1;
            if k > 100 {
                return Err(Error::NoConvergence { what: "ray exit bracket", iterations: k, lo: 0.0, hi });
            }
        }
        let mut lo = 0.0;
        while hi - lo > 1e-15 * hi {
            let mid = 0.5 * (lo + hi);
            if f(mid)? < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    fn jet_analytic(&self, z: &[C64]) -> Jet {
        let n = self.dim;
        let mut grad = vec![C64::new(0.0, 0.0); n];
        let mut levi = CMat::zeros(n, n);
        let mut holo = CMat::zeros(n, n);
        let mut value = -1.0;
        for j in 0..n {
            let m = self.exponents[j] as i32;
            let s = z[j].norm_sqr();
            value += s.powi(m);
            grad[j] = z[j].conj() * (m as f64) * s.powi(m - 1);
            levi[(j, j)] = C64::new((m * m) as f64 * s.powi(m - 1), 0.0);
            if m > 1 {
                holo[(j, j)] = z[j].conj() * z[j].conj() * ((m * (m - 1)) as f64) * s.powi(m - 2);
            }
        }
        Jet {
            value,
            grad,
            levi,
            holo,
        }
    }

    fn jet_gauge(&self, z: &[C64]) -> Result<Jet> {
        let n = self.dim;
        let p = self.gauge(z)?;
        if p == 0.0 {
            return Err(Error::Singular("gauge is not differentiable at 0".into()));
        }
        let ms: Vec<f64> = self.exponents.iter().map(|&m| m as f64).collect();
        let mut gj = vec![C64::new(0.0, 0.0); n];
        let mut gjj_bar = vec![0.0; n];
        let mut gjj = vec![C64::new(0.0, 0.0); n];
        let mut gp = 0.0;
        let mut gpp = 0.0;
        for j in 0..n {
            let m = self.exponents[j] as i32;
            let s = z[j].norm_sqr();
            let a = s.powi(m);
            let pw = p.powi(-2 * m);
            gj[j] = z[j].conj() * (m as f64) * s.powi(m - 1) * pw;
            gjj_bar[j] = (m * m) as f64 * s.powi(m - 1) * pw;
            if m > 1 {
                gjj[j] = z[j].conj() * z[j].conj() * ((m * (m - 1)) as f64) * s.powi(m - 2) * pw;
            }
            gp += -2.0 * ms[j] * a * pw / p;
            gpp += 2.0 * ms[j] * (2.0 * ms[j] + 1.0) * a * pw / (p * p);
        }
        let pj: Vec<C64> = gj.iter().map(|g| -g / gp).collect();
        let gjp: Vec<C64> = (0..n).map(|j| -2.0 * ms[j] * gj[j] / p).collect();
        let mut levi = CMat::zeros(n, n);
        let mut holo = CMat::zeros(n, n);
        for j in 0..n {
            for k in 0..n {
                let pk_bar = pj[k].conj();
                let gjk_bar = if j == k { C64::new(gjj_bar[j], 0.0) } else { C64::new(0.0, 0.0) };
                let gpk_bar = gjp[k].conj();
                levi[(j, k)] =
                    -(gjk_bar + gjp[j] * pk_bar + gpk_bar * pj[j] + gpp * pj[j] * pk_bar) / gp;
                let gjk = if j == k { gjj[j] } else { C64::new(0.0, 0.0) };
                holo[(j, k)] = -(gjk + gjp[j] * pj[k] + gjp[k] * pj[j] + gpp * pj[j] * pj[k]) / gp;
            }
        }
        Ok(Jet {
            value: p - 1.0,
            grad: pj,
            levi,
            holo,
        })
    }

    fn fd_step(z: &[C64]) -> f64 {
        1e-6 * num::norm(z).max(1.0)
    }

    fn gradient_fd(&self, form: DefiningForm, z: &[C64]) -> Result<Vec<C64>> {
        let h = Self::fd_step(z);
        let basis = num::real_basis(self.dim);
        let mut d = vec![0.0; 2 * self.dim];
        for (a, e) in basis.iter().enumerate() {
            let p = self.r(form, &num::axpy(z, C64::new(h, 0.0), e))?;
            let m = self.r(form, &num::axpy(z, C64::new(-h, 0.0), e))?;
            d[a] = (p - m) / (2.0 * h);
        }
        Ok((0..self.dim)
            .map(|j| C64::new(0.5 * d[2 * j], -0.5 * d[2 * j + 1]))
            .collect())
    }

    fn jet_fd(&self, form: DefiningForm, z: &[C64]) -> Result<Jet> {
        let n = self.dim;
        let value = self.r(form, z)?;
        let grad = self.gradient_fd(form, z)?;
        let h = 1e-4 * num::norm(z).max(1.0);
        let basis = num::real_basis(n);
        let f = |w: Vec<C64>| self.r(form, &w);
        let mut hess = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for a in 0..2 * n {
            for b in a..2 * n {
                let ea = &basis[a];
                let eb = &basis[b];
                let pp = f(num::add(&num::axpy(z, C64::new(h, 0.0), ea), &num::scale_re(eb, h)))?;
                let pm = f(num::add(&num::axpy(z, C64::new(h, 0.0), ea), &num::scale_re(eb, -h)))?;
                let mp = f(num::add(&num::axpy(z, C64::new(-h, 0.0), ea), &num::scale_re(eb, h)))?;
                let mm = f(num::add(&num::axpy(z, C64::new(-h, 0.0), ea), &num::scale_re(eb, -h)))?;
                let v = (pp - pm - mp + mm) / (4.0 * h * h);
                hess[(a, b)] = v;
                hess[(b, a)] = v;
            }
        }
        let (levi, holo) = wirtinger_from_real_hessian(&hess);
        Ok(Jet {
            value,
            grad,
            levi,
            holo,
        })
    }
}

fn bisect_decreasing<F: Fn(f64) -> f64>(g: F, lo: &mut f64, hi: &mut f64) -> Result<f64> {
    let mut it = 0;
    while it < GAUGE_MAX_ITER && *hi - *lo > 1e-15 * *hi {
        let mid = 0.5 * (*lo + *hi);
        if g(mid) > 0.0 {
            *lo = mid;
        } else {
            *hi = mid;
        }
        it += 1;
    }
    if *hi - *lo > GAUGE_TOL {
        return Err(Error::NoConvergence {
            what: "gauge bisection",
            iterations: it,
            lo: *lo,
            hi: *hi,
        });
    }
    Ok(0.5 * (*lo + *hi))
}

/// Real Hessian in `(x_1, y_1, ...)` coordinates from the Wirtinger Hessians.
pub fn real_hessian_from(levi: &CMat, holo: &CMat) -> DMatrix<f64> {
    let n = levi.nrows();
    let mut out = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for j in 0..n {
        for k in 0..n {
            let l = levi[(j, k)];
            let h = holo[(j, k)];
            out[(2 * j, 2 * k)] = 2.0 * (h.re + l.re);
            out[(2 * j + 1, 2 * k + 1)] = 2.0 * (l.re - h.re);
            out[(2 * j, 2 * k + 1)] = -2.0 * h.im + 2.0 * l.im;
            out[(2 * j + 1, 2 * k)] = -2.0 * h.im - 2.0 * l.im;
        }
    }
    out
}

/// Inverse of [`real_hessian_from`].
pub fn wirtinger_from_real_hessian(h: &DMatrix<f64>) -> (CMat, CMat) {
    let n = h.nrows() / 2;
    let mut levi = CMat::zeros(n, n);
    let mut holo = CMat::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            let xx = h[(2 * j, 2 * k)];
            let yy = h[(2 * j + 1, 2 * k + 1)];
            let xy = h[(2 * j, 2 * k + 1)];
            let yx = h[(2 * j + 1, 2 * k)];
            levi[(j, k)] = C64::new(0.25 * (xx + yy), 0.25 * (xy - yx));
            holo[(j, k)] = C64::new(0.25 * (xx - yy), -0.25 * (xy + yx));
        }
    }
    (levi, holo)
}
