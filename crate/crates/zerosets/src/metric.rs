//! Hermitian metric models `B(zeta)`, their inverse square roots `A(zeta)`,
//! the frames `e_j(zeta)` and the derivative `dA` through the contour calculus.

use crate::domain::{DefiningForm, Domain};
use crate::error::{Error, Result};
use crate::geometry::{self, ExtremalFrame, Polydisc};
use crate::matrix::{self, ContourSpec, HermitianPd};
use crate::num::{self, C64, CMat};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::sync::Arc;

/// Smallest boundary distance at which the metric is evaluated.
pub const MIN_DISTANCE: f64 = 1e-4;
/// Contour scale `c` in the radius `c * d(zeta)`.
pub const CONTOUR_SCALE: f64 = 0.2;
/// Radius of the mollification ball, relative to `d(zeta)`.
pub const MOLLIFY_RADIUS: f64 = 0.1;
/// Number of mollification nodes.
pub const MOLLIFY_NODES: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ExactBall,
    Surrogate,
    Custom,
}

/// User-supplied metric matrix.
pub trait MetricEvaluator: Send + Sync + fmt::Debug {
    fn matrix(&self, zeta: &[C64]) -> Result<CMat>;
}

#[derive(Clone, Debug)]
pub struct MetricModel {
    kind: MetricKind,
    domain: Domain,
    nodes: Vec<Vec<C64>>,
    custom: Option<Arc<dyn MetricEvaluator>>,
    contour_scale: f64,
}

/// `A(zeta)`, its columns and the eigenvalues of `B(zeta)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricFrame {
    pub point: Vec<C64>,
    pub a: Vec<Vec<[f64; 2]>>,
    pub columns: Vec<Vec<C64>>,
    pub eigenvalues: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SandwichReport {
    pub rho: f64,
    /// Largest `c` with `c rho P_d subset {zeta + A v : |v| < rho}`.
    pub inner: f64,
    /// Smallest `C` with `{zeta + A v : |v| < rho} subset C rho P_d`.
    pub outer: f64,
    pub ratio: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EigenTauReport {
    /// `lambda_1 tau_1^2, lambda_2 tau_n^2, ..., lambda_n tau_2^2`.
    pub ratios: Vec<f64>,
    /// `det B * vol(P_d)`.
    pub det_volume: f64,
}

impl MetricModel {
    pub fn exact_ball(dim: usize) -> Self {
        Self {
            kind: MetricKind::ExactBall,
            domain: Domain::unit_ball(dim),
            nodes: Vec::new(),
            custom: None,
            contour_scale: CONTOUR_SCALE,
        }
    }

    /// `B = average of U diag(1/tau_j^2) U*` over fixed nodes of the ball of
    /// radius `0.1 d(zeta)` around `zeta`.
    pub fn surrogate(domain: Domain) -> Self {
        let n = domain.dim();
        let nodes = (0..MOLLIFY_NODES)
            .map(|i| num::cube_to_ball(&num::sobol(i, 2 * n, 11), n, 1.0))
            .collect();
        Self {
            kind: MetricKind::Surrogate,
            domain,
            nodes,
            custom: None,
            contour_scale: CONTOUR_SCALE,
        }
    }

    pub fn custom(domain: Domain, eval: Arc<dyn MetricEvaluator>) -> Self {
        Self {
            kind: MetricKind::Custom,
            domain,
            nodes: Vec::new(),
            custom: Some(eval),
            contour_scale: CONTOUR_SCALE,
        }
    }

    pub fn kind(&self) -> MetricKind {
        self.kind
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Only the closed-form ball model is smooth; the surrogate is flagged.
    pub fn is_smooth(&self) -> bool {
        self.kind != MetricKind::Surrogate
    }

    fn distance(&self, zeta: &[C64]) -> Result<f64> {
        let r = self.domain.r_analytic(zeta)?;
        if r >= 0.0 {
            return Err(Error::Exterior(format!("r = {r:e}")));
        }
        if -r < MIN_DISTANCE {
            return Err(Error::TooCloseToBoundary(-r));
        }
        Ok(-r)
    }

    pub fn bergman_matrix(&self, zeta: &[C64]) -> Result<HermitianPd> {
        let d = self.distance(zeta)?;
        let m = match self.kind {
            MetricKind::ExactBall => ball_matrix(zeta),
            MetricKind::Surrogate => {
                let n = self.domain.dim();
                let mut acc = CMat::zeros(n, n);
                for nu in &self.nodes {
                    let p = num::axpy(zeta, C64::new(MOLLIFY_RADIUS * d, 0.0), nu);
                    let dp = self.domain.d(DefiningForm::Analytic, &p)?;
                    let f = geometry::extremal_basis(&self.domain, &p, dp)?;
                    acc += frame_matrix(&f);
                }
                acc / C64::new(self.nodes.len() as f64, 0.0)
            }
            MetricKind::Custom => self.custom.as_ref().expect("custom evaluator").matrix(zeta)?,
        };
        HermitianPd::new(m)
    }

    /// `||v||_{B,zeta} = sqrt(v* B v)`.
    pub fn norm(&self, zeta: &[C64], v: &[C64]) -> Result<f64> {
        let b = self.bergman_matrix(zeta)?;
        Ok(quad_norm(b.matrix(), v))
    }

    /// `A(zeta) = B(zeta)^{-1/2}`.
    pub fn a_matrix(&self, zeta: &[C64]) -> Result<HermitianPd> {
        if self.kind == MetricKind::ExactBall {
            self.distance(zeta)?;
            return HermitianPd::new(ball_a(zeta));
        }
        Ok(matrix::inv_sqrt(&self.bergman_matrix(zeta)?))
    }

    pub fn frame(&self, zeta: &[C64]) -> Result<MetricFrame> {
        let b = self.bergman_matrix(zeta)?;
        let a = matrix::inv_sqrt(&b);
        let n = b.dim();
        Ok(MetricFrame {
            point: zeta.to_vec(),
            a: matrix::matrix_to_json(a.matrix()),
            columns: (0..n).map(|j| num::column(a.matrix(), j)).collect(),
            eigenvalues: b.eigenvalues().to_vec(),
        })
    }

    /// Directional derivative of `B` along the real direction `u`.
    pub fn db(&self, zeta: &[C64], u: &[C64]) -> Result<CMat> {
        if self.kind == MetricKind::ExactBall {
            self.distance(zeta)?;
            return Ok(ball_db(zeta, u));
        }
        let d = self.distance(zeta)?;
        let h = 1e-5 * d;
        let p = self.bergman_matrix(&num::axpy(zeta, C64::new(h, 0.0), u))?;
        let m = self.bergman_matrix(&num::axpy(zeta, C64::new(-h, 0.0), u))?;
        Ok((p.matrix() - m.matrix()) / C64::new(2.0 * h, 0.0))
    }

    /// The contour used for `dA` at `zeta`: discs of radius `c d(zeta)`.
    pub fn contour(&self, zeta: &[C64], a: &HermitianPd) -> Result<ContourSpec> {
        let d = self.distance(zeta)?;
        ContourSpec::absolute(a, self.contour_scale, d)
    }

    /// `dA_zeta[u]`, the inverse Frechet derivative applied to `dB[u]`.
    pub fn da(&self, zeta: &[C64], u: &[C64]) -> Result<CMat> {
        let a = self.a_matrix(zeta)?;
        let contour = self.contour(zeta, &a)?;
        let db = self.db(zeta, u)?;
        Ok(-matrix::dphi_inverse_with(&a, &db, &contour)?)
    }

    /// `dA` along every real basis direction `e_1, i e_1, e_2, ...`, sharing
    /// one eigendecomposition and contour.
    pub fn da_all(&self, zeta: &[C64]) -> Result<Vec<CMat>> {
        let a = self.a_matrix(zeta)?;
        let contour = self.contour(zeta, &a)?;
        num::real_basis(self.domain.dim())
            .iter()
            .map(|u| Ok(-matrix::dphi_inverse_with(&a, &self.db(zeta, u)?, &contour)?))
            .collect()
    }

    /// `dA` along the real basis for hot loops: the closed form on the exact
    /// ball, `da_all` otherwise.
    pub fn a_derivatives(&self, zeta: &[C64]) -> Result<Vec<CMat>> {
        if self.kind != MetricKind::ExactBall {
            return self.da_all(zeta);
        }
        self.distance(zeta)?;
        Ok(num::real_basis(zeta.len()).iter().map(|u| ball_da(zeta, u)).collect())
    }

    /// Central difference of `A` with step `1e-5 d(zeta)`.
    pub fn da_fd(&self, zeta: &[C64], u: &[C64]) -> Result<CMat> {
        let d = self.distance(zeta)?;
        let h = 1e-5 * d;
        let p = self.a_matrix(&num::axpy(zeta, C64::new(h, 0.0), u))?;
        let m = self.a_matrix(&num::axpy(zeta, C64::new(-h, 0.0), u))?;
        Ok((p.matrix() - m.matrix()) / C64::new(2.0 * h, 0.0))
    }

    /// Best inclusion constants between `{zeta + A v : |v| < rho}` and `rho P_d`.
    pub fn sandwich_check(&self, zeta: &[C64], rho: f64, samples: usize) -> Result<SandwichReport> {
        let d = self.distance(zeta)?;
        let pd = Polydisc::new(&self.domain, zeta, d)?;
        let a = self.a_matrix(zeta)?;
        let ainv = a.map(|x| 1.0 / x);
        let n = self.domain.dim();
        let mut worst_in: f64 = 0.0;
        for i in 0..samples {
            let u = num::sobol(i, n, 3);
            let coords: Vec<C64> = u
                .iter()
                .zip(&pd.frame.radii)
                .map(|(&x, &t)| C64::from_polar(t, 2.0 * std::f64::consts::PI * x))
                .collect();
            let y = num::sub(&pd.frame.point(&coords), zeta);
            worst_in = worst_in.max(num::norm(&num::mat_vec(&ainv, &y)));
        }
        let mut worst_out: f64 = 0.0;
        for v in num::sphere_points(samples, n, 5) {
            let av = num::mat_vec(a.matrix(), &v);
            worst_out = worst_out.max(pd.gauge(&num::add(zeta, &av)));
        }
        let inner = 1.0 / worst_in;
        Ok(SandwichReport {
            rho,
            inner,
            outer: worst_out,
            ratio: worst_out / inner,
            samples,
        })
    }

    pub fn eigen_tau_check(&self, zeta: &[C64]) -> Result<EigenTauReport> {
        let d = self.distance(zeta)?;
        let b = self.bergman_matrix(zeta)?;
        let f = geometry::extremal_basis(&self.domain, zeta, d)?;
        let lam = b.eigenvalues();
        let n = lam.len();
        let mut ratios = vec![lam[0] * f.radii[0] * f.radii[0]];
        for j in 1..n {
            let t = f.radii[n - j];
            ratios.push(lam[j] * t * t);
        }
        let det: f64 = lam.iter().product();
        Ok(EigenTauReport {
            ratios,
            det_volume: det * geometry::polydisc_volume(&f),
        })
    }

    /// Largest observed `||dA[u] Lambda||_B * tau(zeta, u, d)` over unit `u`
    /// and `|Lambda| < 1`.
    pub fn da_growth(&self, zeta: &[C64], samples: usize, seed: u64) -> Result<f64> {
        let d = self.distance(zeta)?;
        let b = self.bergman_matrix(zeta)?;
        let n = self.domain.dim();
        let mut rng = num::rng(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let u = num::random_unit(&mut rng, n);
            let lam = num::random_in_ball(&mut rng, n, 1.0);
            let da = self.da(zeta, &u)?;
            let t = geometry::tau(&self.domain, zeta, &u, d)?;
            worst = worst.max(quad_norm(b.matrix(), &num::mat_vec(&da, &lam)) * t);
        }
        Ok(worst)
    }
}

pub fn quad_norm(b: &CMat, v: &[C64]) -> f64 {
    num::hdot(v, &num::mat_vec(b, v)).re.max(0.0).sqrt()
}

fn frame_matrix(f: &ExtremalFrame) -> CMat {
    let n = f.dim();
    let mut m = CMat::zeros(n, n);
    for (w, t) in f.vectors.iter().zip(&f.radii) {
        let s = 1.0 / (t * t);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += w[i] * w[j].conj() * s;
            }
        }
    }
    m
}

fn outer(a: &[C64], b: &[C64]) -> CMat {
    CMat::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
}

/// `(n+1)[(1-|z|^2) I + z z*] / (1-|z|^2)^2`.
pub fn ball_matrix(z: &[C64]) -> CMat {
    let n = z.len();
    let s = num::norm_sqr(z);
    let q = 1.0 - s;
    let k = (n as f64 + 1.0) / (q * q);
    (CMat::identity(n, n) * C64::new(q, 0.0) + outer(z, z)) * C64::new(k, 0.0)
}

/// Closed form of `B^{-1/2}` for the ball.
pub fn ball_a(z: &[C64]) -> CMat {
    let n = z.len();
    let s = num::norm_sqr(z);
    let q = 1.0 - s;
    let np1 = n as f64 + 1.0;
    let at = (q / np1).sqrt();
    let an = q / np1.sqrt();
    let mut a = CMat::identity(n, n) * C64::new(at, 0.0);
    if s > 0.0 {
        a += outer(z, z) * C64::new((an - at) / s, 0.0);
    }
    a
}

fn ball_db(z: &[C64], u: &[C64]) -> CMat {
    let n = z.len();
    let s = num::norm_sqr(z);
    let q = 1.0 - s;
    let ds = 2.0 * num::hdot(z, u).re;
    let np1 = n as f64 + 1.0;
    let id = CMat::identity(n, n);
    let first = (&id * C64::new(-ds, 0.0) + outer(u, z) + outer(z, u)) * C64::new(np1 / (q * q), 0.0);
    let second = (&id * C64::new(q, 0.0) + outer(z, z)) * C64::new(2.0 * ds * np1 / (q * q * q), 0.0);
    first + second
}

/// Derivative of `ball_a` along `u`: `A = f(s) I + g(s) z z*` with `s = |z|^2`.
fn ball_da(z: &[C64], u: &[C64]) -> CMat {
    let n = z.len();
    let s = num::norm_sqr(z);
    let q = 1.0 - s;
    let r = (n as f64 + 1.0).sqrt();
    let ds = 2.0 * num::hdot(z, u).re;
    let df = -0.5 / (r * q.sqrt());
    // a(s) = an - at vanishes at s = 0, so g = a / s is smooth there
    let (g, dg) = if s < 1e-6 {
        let a1 = -1.0 / r + 0.5 / r;
        let a2 = 0.25 / r;
        (a1 + 0.5 * a2 * s, 0.5 * a2)
    } else {
        let a = q / r - q.sqrt() / r;
        let da = -1.0 / r + 0.5 / (r * q.sqrt());
        (a / s, (da * s - a) / (s * s))
    };
    let id = CMat::identity(n, n);
    &id * C64::new(df * ds, 0.0) + outer(z, z) * C64::new(dg * ds, 0.0) + (outer(u, z) + outer(z, u)) * C64::new(g, 0.0)
}
